import logging

import numpy as np
import pytest

from csaeo.link.channel import FadingModel
from csaeo.link.modem import build_16apsk, build_16psk
from csaeo.models.config import AppConfig, ChannelConfig, DTJSCCConfig
from csaeo.semantic.data import generate_synthetic
from csaeo.sim.pipeline import (
    EpisodeReport, NodeModels, build_link, channel_flip_prob, compare_csa, evaluate_link, frames_from_dataset,
    run_episode, send, train_codec, with_scenario,
)
from csaeo.semantic.dtjscc import encode, predict
from csaeo.utils.errors import ShapeMismatchError
from csaeo.utils.rng import derive_rng


def scenario_cfg(**scenario):
    return with_scenario(AppConfig(), **scenario)


@pytest.fixture(scope="module")
def relay_frames():
    dataset = generate_synthetic(10, 110, 8, 8, 3, 0.1, seed=9)
    return frames_from_dataset(dataset, 100, 11, seed=0)


def test_zero_timesteps_give_empty_report(trained_codec):
    report = run_episode(scenario_cfg(n_timesteps=0), NodeModels.from_codec(trained_codec), [], seed=0)
    assert len(report) == 0
    assert report.ut_top1 is None
    assert report.to_csv().strip() == ",".join(EpisodeReport.CSV_COLUMNS)


def test_episode_needs_one_frame_more_than_steps(trained_codec, relay_frames):
    with pytest.raises(ValueError):
        run_episode(scenario_cfg(n_timesteps=3), NodeModels.from_codec(trained_codec), relay_frames[:3], seed=0)


@pytest.mark.parametrize("csa_enabled", [False, True])
def test_lossless_relay_matches_sat2(trained_codec, relay_frames, csa_enabled):
    cfg = scenario_cfg(psnr_db=None, n_timesteps=10, csa_enabled=csa_enabled)
    report = run_episode(cfg, NodeModels.from_codec(trained_codec), relay_frames, seed=0)
    assert report.labels.size == 1000
    np.testing.assert_array_equal(report.ut_predictions, report.sat2_predictions)
    assert all(step.relay_index_error_rate == 0.0 for step in report.steps)
    assert all(step.isl_index_error_rate == 0.0 for step in report.steps)


def test_episode_labels_come_from_next_frame(trained_codec, relay_frames):
    cfg = scenario_cfg(psnr_db=None, n_timesteps=2, csa_enabled=False)
    report = run_episode(cfg, NodeModels.from_codec(trained_codec), relay_frames, seed=0)
    np.testing.assert_array_equal(report.steps[0].labels, relay_frames[1][1])
    np.testing.assert_array_equal(report.steps[0].sat2_predictions, predict(relay_frames[1][0], trained_codec))


def test_episode_is_reproducible(trained_codec, relay_frames):
    cfg = scenario_cfg(psnr_db=6.0, n_timesteps=4)
    first = run_episode(cfg, NodeModels.from_codec(trained_codec), relay_frames, seed=3).to_csv()
    second = run_episode(cfg, NodeModels.from_codec(trained_codec), relay_frames, seed=3).to_csv()
    assert first == second
    assert first.count("\n") == 1 + 4 * 100


def test_episode_csv_layout(trained_codec, relay_frames):
    cfg = scenario_cfg(psnr_db=10.0, n_timesteps=1)
    text = run_episode(cfg, NodeModels.from_codec(trained_codec), relay_frames, seed=0).to_csv()
    header, first = text.splitlines()[:2]
    assert header.split(",") == list(EpisodeReport.CSV_COLUMNS)
    assert first.split(",")[:3] == ["1", "0", "0"]


def test_online_adaptation_touches_only_receivers(trained_codec, relay_frames):
    models = NodeModels.from_codec(trained_codec)
    run_episode(scenario_cfg(psnr_db=4.0, n_timesteps=2), models, relay_frames, seed=0)
    np.testing.assert_array_equal(models.sat1.decoder.weights, trained_codec.decoder.weights)
    assert not np.array_equal(models.ut.decoder.weights, trained_codec.decoder.weights)
    np.testing.assert_array_equal(models.ut.extractor.w1, trained_codec.extractor.w1)
    assert models.ut.bank is not None


def test_sat2_adaptation_is_visible_in_its_own_accuracy(trained_codec, relay_frames, caplog):
    models = NodeModels.from_codec(trained_codec)
    with caplog.at_level(logging.DEBUG, logger="csaeo"):
        report = run_episode(scenario_cfg(psnr_db=4.0, n_timesteps=2), models, relay_frames, seed=0)
    assert not np.array_equal(models.sat2.decoder.weights, trained_codec.decoder.weights)
    np.testing.assert_array_equal(models.sat2.extractor.w1, trained_codec.extractor.w1)
    assert all(step.sat2_sa_loss is not None for step in report.steps)
    assert "Sat2 top1=" in caplog.text


def test_mismatched_nodes_rejected(trained_codec, relay_frames):
    other_data = generate_synthetic(10, 5, 4, 4, 3, 0.1, seed=0)
    other, _ = train_codec(AppConfig(dtjscc=DTJSCCConfig(epochs=1, codebook_sizes=[16])), other_data, 16, seed=0)
    models = NodeModels.from_codec(trained_codec)
    models.ut = other
    with pytest.raises(ShapeMismatchError):
        run_episode(scenario_cfg(n_timesteps=1), models, relay_frames, seed=0)


def test_build_link_downlink_and_isl():
    cfg = AppConfig()
    c = build_16apsk()
    downlink = build_link(ChannelConfig(kind="leo_rician"), cfg, c, 12.0)
    assert downlink.kind.model is FadingModel.leo_rician
    assert downlink.distance_km == pytest.approx(1075.19, abs=0.01)
    assert downlink.kind.zeta_db == pytest.approx(downlink.loss.total_db - 35.0)
    assert downlink.kind.doppler_hz == pytest.approx(653.8e3, abs=100)

    isl = build_link(ChannelConfig(kind="los"), cfg, c, 12.0, isl=True)
    assert isl.distance_km == 1000.0
    assert isl.loss.gas_db == 0.0
    assert isl.kind.zeta_db == pytest.approx(181.39 - 35.0, abs=0.01)
    assert isl.kind.doppler_hz == 0.0


@pytest.mark.parametrize("mode", ["paper", "expanded"])
def test_closed_form_slant_range_mode(mode):
    link = build_link(ChannelConfig(kind="awgn"), scenario_cfg(slant_range_mode=mode), build_16psk(), None)
    assert link.distance_km > 3000
    assert link.noise_sigma == 0.0


def test_send_draws_one_fade_per_image(trained_codec, small_dataset):
    cfg = AppConfig()
    link = build_link(ChannelConfig(kind="rayleigh"), cfg, build_16psk(), None)
    msg = encode(small_dataset.images[:4], trained_codec)
    received = send(msg, link, build_16psk(), np.random.default_rng(0))
    np.testing.assert_array_equal(received.indices, msg.indices)


def test_channel_flip_prob():
    c = build_16apsk()
    kind = build_link(ChannelConfig(kind="rician"), AppConfig(), c, 8.0).kind
    assert channel_flip_prob(c, None, kind, np.random.default_rng(0)) == 0.0
    low = channel_flip_prob(c, 4.0, kind, np.random.default_rng(0))
    high = channel_flip_prob(c, 16.0, kind, np.random.default_rng(0))
    assert 0.0 < high < low < 1.0


def test_evaluate_link_over_perfect_channel(trained_codec, small_dataset):
    c = build_16apsk()
    link = build_link(ChannelConfig(kind="awgn"), AppConfig(), c, None)
    evaluation = evaluate_link(trained_codec, small_dataset, c, link, np.random.default_rng(0))
    assert evaluation.index_error_rate == 0.0
    np.testing.assert_array_equal(evaluation.predictions, predict(small_dataset.images, trained_codec))
    assert evaluation.confusion().accuracy() == pytest.approx(evaluation.top1)


def test_frames_wrap_around(small_dataset):
    frames = frames_from_dataset(small_dataset, 150, 3, seed=0)
    assert [f[0].shape[0] for f in frames] == [150, 150, 150]
    again = frames_from_dataset(small_dataset, 150, 3, seed=0)
    np.testing.assert_array_equal(frames[2][1], again[2][1])


@pytest.fixture(scope="module")
def tiny_app_cfg():
    return AppConfig.model_validate({
        "data": {"n_classes": 10, "n_per_class": 12, "height": 8, "width": 8},
        "dtjscc": {"epochs": 3, "codebook_sizes": [16]},
        "scenario": {"k_q": 16, "n_timesteps": 10, "batch_size": 8, "psnr_db": 8.0},
    })


def test_compare_csa_against_itself_is_zero(tiny_app_cfg):
    dataset = generate_synthetic(10, 12, 8, 8, 3, 0.1, seed=0)
    comparison = compare_csa(tiny_app_cfg, dataset, n_seeds=1, modes=(True, True))
    assert comparison.mode_labels == ["csa", "csa_control"]
    np.testing.assert_array_equal(np.nan_to_num(comparison.difference()), 0.0)
    assert len(comparison.rows()) == 11
    assert comparison.rows()[-1][0] == "Mean"
    assert comparison.rows()[-1][-1] == 0.0


def test_compare_csa_table_layout(tiny_app_cfg):
    dataset = generate_synthetic(10, 12, 8, 8, 3, 0.1, seed=0)
    comparison = compare_csa(tiny_app_cfg, dataset, n_seeds=1, psnr_db=4.0)
    assert comparison.psnr_db == 4.0
    lines = comparison.to_csv().splitlines()
    assert lines[0] == "schema_version,class,csa,non_csa,difference"
    assert len(lines) == 12
    assert set(comparison.reports) == {"csa", "non_csa"}


def test_train_codec_is_seeded(small_dataset):
    cfg = AppConfig(dtjscc=DTJSCCConfig(epochs=2, codebook_sizes=[16], train_psnr_db=8.0))
    a, trace_a = train_codec(cfg, small_dataset, 16, seed=1)
    b, trace_b = train_codec(cfg, small_dataset, 16, seed=1)
    assert trace_a.loss == trace_b.loss
    np.testing.assert_array_equal(a.decoder.weights, b.decoder.weights)


def test_derive_rng_streams_differ():
    assert derive_rng(0, "a").integers(1 << 30) != derive_rng(0, "b").integers(1 << 30)
