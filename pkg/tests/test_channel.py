import math

import numpy as np
import pytest
from scipy.stats import ks_2samp

from csaeo.link.channel import (
    ChannelInstance, ChannelKind, FadingModel, apply_channel, equalize, estimate_k_factor, noise_sigma_from_psnr,
    realize_channel, response_at, sample_fading,
)


def test_awgn_gain_is_unity():
    rng = np.random.default_rng(0)
    assert sample_fading(ChannelKind(FadingModel.awgn), 1.0, rng) == 1 + 0j
    assert np.all(sample_fading(ChannelKind(FadingModel.awgn), 0.3, rng, size=5) == 1 + 0j)


def test_huge_k_collapses_to_los():
    zeta = 1e-14
    gain = sample_fading(ChannelKind(FadingModel.rician, k_factor=1e12), zeta, np.random.default_rng(1))
    assert abs(gain) == pytest.approx(math.sqrt(zeta), rel=1e-5)


def test_rician_power_and_k_estimate():
    gains = sample_fading(ChannelKind(FadingModel.rician, k_factor=2.8), 1.0, np.random.default_rng(2),
                          size=1_000_000)
    assert np.mean(np.abs(gains) ** 2) == pytest.approx(1.0, rel=0.01)
    assert estimate_k_factor(gains) == pytest.approx(2.8, rel=0.1)


def test_rician_with_zero_k_is_rayleigh():
    rician = sample_fading(ChannelKind(FadingModel.rician, k_factor=0.0), 1.0, np.random.default_rng(3),
                           size=50_000)
    rayleigh = sample_fading(ChannelKind(FadingModel.rayleigh), 1.0, np.random.default_rng(4), size=50_000)
    assert ks_2samp(np.abs(rician), np.abs(rayleigh)).pvalue > 0.01


def test_rayleigh_ignores_k():
    kind = ChannelKind(FadingModel.rayleigh, k_factor=5.0)
    assert kind.effective_k == 0.0
    first = sample_fading(kind, 1.0, np.random.default_rng(5), size=10)
    second = sample_fading(ChannelKind(FadingModel.rayleigh), 1.0, np.random.default_rng(5), size=10)
    np.testing.assert_array_equal(first, second)


def test_los_is_deterministic():
    kind = ChannelKind(FadingModel.los, k_factor=2.8)
    gain = sample_fading(kind, 1.0, np.random.default_rng(0))
    assert gain == pytest.approx(math.sqrt(2.8 / 3.8))
    with pytest.raises(ValueError):
        ChannelKind(FadingModel.los, k_factor=0.0)


def test_invalid_kinds_rejected():
    with pytest.raises(ValueError):
        ChannelKind(FadingModel.rician, k_factor=-1.0)
    with pytest.raises(ValueError):
        ChannelKind(FadingModel.leo_rician, k_factor=2.8)
    with pytest.raises(ValueError):
        sample_fading(ChannelKind(FadingModel.rayleigh), 0.0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        ChannelInstance(noise_sigma=-0.1)


def test_noise_variance():
    block = np.zeros(1_000_000, dtype=complex)
    y = apply_channel(block, ChannelInstance(noise_sigma=0.5), np.random.default_rng(6))
    assert np.var(y.real) == pytest.approx(0.25, rel=0.02)
    assert np.var(y.imag) == pytest.approx(0.25, rel=0.02)


def test_noiseless_unit_channel_is_identity():
    block = np.exp(1j * np.linspace(0, 3, 17))
    y = apply_channel(block, ChannelInstance(), np.random.default_rng(0))
    np.testing.assert_array_equal(y, block)


def test_perfect_equalization_undoes_gain():
    block = np.exp(1j * np.linspace(0, 3, 17))
    inst = ChannelInstance(gain=0.3 - 0.4j)
    y = apply_channel(block, inst, np.random.default_rng(0))
    np.testing.assert_allclose(equalize(y, inst), block, atol=1e-12)
    np.testing.assert_array_equal(equalize(y, inst, "none"), y)
    with pytest.raises(ValueError):
        equalize(y, inst, "zf")


def test_response_at():
    fading = 0.8 + 0.6j
    assert response_at(0.0, 0.0, fading, 1e3, 1e-3) == pytest.approx(fading)
    assert response_at(1.0, 0.0, fading, 0.0, 0.0) == pytest.approx(fading)
    # Half a Doppler cycle flips the sign
    assert response_at(0.5e-3, 0.0, fading, 1e3, 0.0) == pytest.approx(-fading)
    assert abs(response_at(0.37, 2e6, fading, 653.8e3, 3.6e-3)) == pytest.approx(abs(fading))


def test_noise_sigma_from_psnr():
    assert noise_sigma_from_psnr(0.0, 1.0) == pytest.approx(0.7071, abs=1e-4)
    assert noise_sigma_from_psnr(14.0, 1.0) ** 2 * 2 == pytest.approx(0.0398, abs=1e-4)
    assert noise_sigma_from_psnr(None, 1.0) == 0.0
    with pytest.raises(ValueError):
        noise_sigma_from_psnr(10.0, 0.0)


def test_realize_channel_block_fading():
    inst = realize_channel(ChannelKind(FadingModel.rayleigh), 4, 8, 0.1, np.random.default_rng(9))
    gains = inst.gain.reshape(4, 8)
    assert np.all(gains == gains[:, :1])
    assert len(set(gains[:, 0].tolist())) == 4
    assert inst.noise_sigma == 0.1


def test_realize_leo_channel_rotates_within_block():
    kind = ChannelKind(FadingModel.leo_rician, k_factor=2.8, zeta_db=142.76, doppler_hz=1e3)
    inst = realize_channel(kind, 2, 8, 0.0, np.random.default_rng(1), symbol_period_s=1e-4)
    magnitudes = np.abs(inst.gain).reshape(2, 8)
    np.testing.assert_allclose(magnitudes, magnitudes[:, :1].repeat(8, axis=1))
    assert not np.allclose(inst.gain[:8], inst.gain[0])


def test_realize_channel_is_reproducible():
    kind = ChannelKind(FadingModel.leo_rayleigh, zeta_db=140.0, shadow_sigma_db=4.0)
    first = realize_channel(kind, 5, 3, 0.2, np.random.default_rng(11))
    second = realize_channel(kind, 5, 3, 0.2, np.random.default_rng(11))
    np.testing.assert_array_equal(first.gain, second.gain)


def test_estimate_k_factor_edges():
    assert estimate_k_factor(np.ones(100, dtype=complex)) == math.inf
