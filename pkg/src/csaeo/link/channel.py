"""Small-scale fading, Y = H*X + N and the time-frequency phase response"""
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np

ComplexGain = Union[complex, np.ndarray]


class FadingModel(Enum):
    awgn = "awgn"
    rician = "rician"
    rayleigh = "rayleigh"
    leo_rician = "leo_rician"
    leo_rayleigh = "leo_rayleigh"
    # Inter-satellite link: LoS path only
    los = "los"

    @property
    def is_leo(self) -> bool:
        return self in (FadingModel.leo_rician, FadingModel.leo_rayleigh)

    @property
    def has_rician_k(self) -> bool:
        return self in (FadingModel.rician, FadingModel.leo_rician, FadingModel.los)


@dataclass(frozen=True)
class ChannelKind:
    model: FadingModel
    k_factor: float = 0.0
    zeta_db: Optional[float] = None
    shadow_sigma_db: float = 0.0
    doppler_hz: float = 0.0
    delay_s: float = 0.0
    los_phase_rad: float = 0.0

    def __post_init__(self):
        if self.k_factor < 0:
            raise ValueError(f"k_factor must be >= 0, got {self.k_factor}")
        if self.model.is_leo and (self.zeta_db is None or not math.isfinite(self.zeta_db)):
            raise ValueError(f"{self.model.value} needs a finite zeta_db")
        if self.model is FadingModel.los and self.k_factor == 0:
            raise ValueError("a LoS-only channel needs k_factor > 0")

    @property
    def effective_k(self) -> float:
        """K used by the sampler: 0 for the Rayleigh family"""
        return self.k_factor if self.model.has_rician_k else 0.0

    def as_dict(self):
        return {
            "model": self.model.value,
            "k_factor": self.effective_k,
            "zeta_db": self.zeta_db,
            "shadow_sigma_db": self.shadow_sigma_db,
            "doppler_hz": self.doppler_hz,
            "delay_s": self.delay_s,
        }


@dataclass(frozen=True)
class ChannelInstance:
    """One fading realization; gain is a scalar or one coefficient per sample"""
    gain: ComplexGain = 1 + 0j
    noise_sigma: float = 0.0

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")


def sample_fading(kind: ChannelKind, zeta_lin: float, rng: np.random.Generator,
                  size: Optional[int] = None) -> ComplexGain:
    if kind.k_factor < 0:
        raise ValueError(f"k_factor must be >= 0, got {kind.k_factor}")
    if not zeta_lin > 0:
        raise ValueError(f"zeta_lin must be > 0, got {zeta_lin}")

    if kind.model is FadingModel.awgn:
        return 1 + 0j if size is None else np.ones(size, dtype=complex)

    k = kind.effective_k
    los_phasor = complex(math.cos(kind.los_phase_rad), math.sin(kind.los_phase_rad))
    los = math.sqrt(k * zeta_lin / (k + 1)) * los_phasor
    if kind.model is FadingModel.los:
        return los if size is None else np.full(size, los, dtype=complex)

    shape = 1 if size is None else size
    nlos = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)
    gains = los + math.sqrt(zeta_lin / (k + 1)) * nlos
    return complex(gains[0]) if size is None else gains


def apply_channel(block: np.ndarray, inst: ChannelInstance, rng: np.random.Generator) -> np.ndarray:
    x = np.asarray(block, dtype=complex)
    y = inst.gain * x
    if inst.noise_sigma > 0:
        noise = rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape)
        y = y + inst.noise_sigma * noise
    return y


def equalize(block: np.ndarray, inst: ChannelInstance, mode: str = "perfect") -> np.ndarray:
    """Coherent detection with known H divides it out; 'none' passes y through"""
    if mode == "none":
        return np.asarray(block, dtype=complex)
    if mode != "perfect":
        raise ValueError(f"unknown equalization mode: {mode!r}")
    return np.asarray(block, dtype=complex) / inst.gain


def response_at(t: float, f: float, fading: ComplexGain, doppler_hz: float, delay_s: float) -> ComplexGain:
    """H(t, f) = fading * exp(j 2 pi (t v - f tau))"""
    return fading * np.exp(1j * 2 * np.pi * (np.asarray(t) * doppler_hz - f * delay_s))


def noise_sigma_from_psnr(psnr_db: Optional[float], peak_symbol_power: float) -> float:
    """Per-component noise std for a given peak-symbol-power to noise ratio

    A None PSNR is the noiseless link.
    """
    if not peak_symbol_power > 0:
        raise ValueError(f"peak_symbol_power must be > 0, got {peak_symbol_power}")
    if psnr_db is None:
        return 0.0
    total = peak_symbol_power / 10 ** (psnr_db / 10)
    return math.sqrt(total / 2)


def realize_channel(kind: ChannelKind, n_blocks: int, block_len: int, noise_sigma: float,
                    rng: np.random.Generator, symbol_period_s: float = 1e-6,
                    baseband_frequency_hz: float = 0.0) -> ChannelInstance:
    """Block fading: one draw per block (image), constant across its symbols

    LEO kinds add shadow fading per block, normalized to the deterministic
    large-scale gain, and rotate each symbol by the Doppler/delay phase response.
    """
    if kind.model.is_leo and kind.shadow_sigma_db > 0:
        shadow_db = rng.normal(0.0, kind.shadow_sigma_db, size=n_blocks)
        zeta = 10 ** (-shadow_db / 10)
        fading = np.array([sample_fading(kind, z, rng) for z in zeta], dtype=complex)
    else:
        fading = np.asarray(sample_fading(kind, 1.0, rng, size=n_blocks), dtype=complex)

    gains = np.repeat(fading, block_len)
    if kind.model.is_leo:
        t = np.arange(n_blocks * block_len) * symbol_period_s
        gains = response_at(t, baseband_frequency_hz, gains, kind.doppler_hz, kind.delay_s)
    return ChannelInstance(gain=gains, noise_sigma=noise_sigma)


def estimate_k_factor(gains: np.ndarray) -> float:
    """Moment estimate of the Rician K from E|H|^2 and E|H|^4"""
    power = np.abs(np.asarray(gains)) ** 2
    m2 = float(np.mean(power))
    m4 = float(np.mean(power ** 2))
    disc = 2 * m2 ** 2 - m4
    if disc <= 0:
        return 0.0
    los_power = math.sqrt(disc)
    if m2 - los_power <= 0:
        return math.inf
    return los_power / (m2 - los_power)


__all__ = (
    'FadingModel', 'ChannelKind', 'ChannelInstance', 'sample_fading', 'apply_channel', 'equalize',
    'response_at', 'noise_sigma_from_psnr', 'realize_channel', 'estimate_k_factor',
)
