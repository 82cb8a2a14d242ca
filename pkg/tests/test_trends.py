"""Statistical trends over trained codecs; run with -m slow

Accuracy here is single-downlink Top-1 from evaluate_link, as in the sweep command,
except for the CSA comparison which runs full relay episodes.
"""
import numpy as np
import pytest

from csaeo.link.modem import build_16apsk
from csaeo.models.config import AppConfig, ChannelConfig
from csaeo.semantic.data import generate_synthetic
from csaeo.sim.pipeline import build_link, compare_csa, evaluate_link, train_codec
from csaeo.utils.rng import derive_rng

pytestmark = pytest.mark.slow

SEEDS = range(5)


@pytest.fixture(scope="module")
def trend_cfg():
    return AppConfig.model_validate({
        "data": {"height": 16, "width": 16},
        "dtjscc": {"epochs": 20},
    })


@pytest.fixture(scope="module")
def trend_data(trend_cfg):
    d = trend_cfg.data
    dataset = generate_synthetic(d.n_classes, d.n_per_class, d.height, d.width, d.bands, d.noise_level, seed=0)
    return dataset.split(d.test_fraction, seed=0)


@pytest.fixture(scope="module")
def trend_codec(trend_cfg, trend_data):
    codec, _ = train_codec(trend_cfg, trend_data[0], 32, seed=0)
    return codec


def mean_top1(cfg, codec, test_set, kind, psnr):
    c = build_16apsk()
    link = build_link(ChannelConfig(kind=kind), cfg, c, psnr)
    return float(np.mean([evaluate_link(codec, test_set, c, link, derive_rng(s, "trend", kind, psnr)).top1
                          for s in SEEDS]))


def test_accuracy_rises_with_psnr(trend_cfg, trend_codec, trend_data):
    curve = [mean_top1(trend_cfg, trend_codec, trend_data[1], "rician", p) for p in (0.0, 4.0, 8.0, 12.0, 16.0)]
    violations = sum(b < a - 0.01 for a, b in zip(curve, curve[1:]))
    assert violations <= 1
    assert curve[-1] > curve[0]


def test_rician_beats_rayleigh(trend_cfg, trend_codec, trend_data):
    for psnr in (4.0, 8.0, 12.0):
        rician = mean_top1(trend_cfg, trend_codec, trend_data[1], "rician", psnr)
        rayleigh = mean_top1(trend_cfg, trend_codec, trend_data[1], "rayleigh", psnr)
        assert rician >= rayleigh - 0.01


def test_seed_spread_shrinks_with_codebook_size(trend_cfg, trend_data):
    train_set, test_set = trend_data
    c = build_16apsk()
    link = build_link(ChannelConfig(kind="rician"), trend_cfg, c, 8.0)
    spreads = []
    for k_q in (32, 64, 128):
        scores = []
        for s in SEEDS:
            codec, _ = train_codec(trend_cfg, train_set, k_q, seed=s)
            scores.append(evaluate_link(codec, test_set, c, link, derive_rng(s, "spread", k_q)).top1)
        spreads.append(float(np.std(scores)))
    assert all(b <= a + 0.02 for a, b in zip(spreads, spreads[1:]))


def test_csa_beats_plain_receiver():
    cfg = AppConfig.model_validate({
        "data": {"height": 16, "width": 16},
        "dtjscc": {"epochs": 20},
        "scenario": {"psnr_db": 4.0, "n_timesteps": 16},
    })
    d = cfg.data
    dataset = generate_synthetic(d.n_classes, d.n_per_class, d.height, d.width, d.bands, d.noise_level, seed=0)
    comparison = compare_csa(cfg, dataset, n_seeds=5)
    difference = np.nan_to_num(comparison.difference())
    assert np.sum(difference >= 0) >= 8
    assert comparison.mean("csa") - comparison.mean("non_csa") >= 2.0


def test_sa_training_helps_with_noisy_labels():
    base = {
        "data": {"height": 16, "width": 16},
        "dtjscc": {"epochs": 20, "train_psnr_db": 4.0},
        "scenario": {"psnr_db": 4.0},
    }
    plain_cfg = AppConfig.model_validate(base)
    sa_cfg = AppConfig.model_validate({**base, "semaug": {"train_with_sa": True}})
    d = plain_cfg.data
    clean = generate_synthetic(d.n_classes, d.n_per_class, d.height, d.width, d.bands, d.noise_level, seed=0)
    noisy = generate_synthetic(d.n_classes, d.n_per_class, d.height, d.width, d.bands, d.noise_level, seed=0,
                               label_noise=0.3)
    # Same images in both; train on flipped labels, score on the true ones
    order = derive_rng(0, "label-noise-split").permutation(len(clean))
    n_test = len(clean) // 4
    test_set, train_set = clean.subset(order[:n_test]), noisy.subset(order[n_test:])

    c = build_16apsk()
    link = build_link(ChannelConfig(kind="rician"), plain_cfg, c, 4.0)
    scores = {"plain": [], "sa": []}
    for s in SEEDS:
        for name, cfg in (("plain", plain_cfg), ("sa", sa_cfg)):
            codec, _ = train_codec(cfg, train_set, 32, seed=s)
            scores[name].append(evaluate_link(codec, test_set, c, link, derive_rng(s, "label-noise-eval")).top1)
    assert np.mean(scores["sa"]) >= np.mean(scores["plain"]) - 0.01
