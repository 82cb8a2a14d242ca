import math

import numpy as np
import pytest

from csaeo.link.channel import ChannelInstance, noise_sigma_from_psnr
from csaeo.link.modem import analytic_ser_psk, build_16apsk, build_16psk
from csaeo.models.config import DTJSCCConfig
from csaeo.semantic.data import generate_synthetic, nearest_mean_oracle
from csaeo.semantic.dtjscc import (
    Codebook, Codec, LinearDecoder, SemanticMessage, decode, encode, flip_indices, index_to_symbols,
    loss_and_grads, pooled_statistics, predict, predict_stats, quantization_error, symbols_per_index,
    symbols_to_index, train, transmit,
)
from csaeo.sim.metrics import index_error_rate, top1
from csaeo.utils.errors import DivergenceError, ShapeMismatchError
from csaeo.utils.rng import derive_rng


def fresh_codec(dataset, k_q=16, seed=0, **overrides):
    cfg = DTJSCCConfig(**{"epochs": 15, "codebook_sizes": [k_q], **overrides})
    return Codec.create(dataset, k_q, cfg, derive_rng(seed, "test-codec")), cfg


@pytest.mark.parametrize("k_q, expected", [(2, 1), (16, 1), (17, 2), (32, 2), (128, 2), (256, 2), (257, 3)])
def test_symbols_per_index(k_q, expected):
    assert symbols_per_index(k_q) == expected


def test_symbol_mapping_is_big_endian_and_wraps():
    np.testing.assert_array_equal(index_to_symbols([[31, 2]], 32), [[1, 15, 0, 2]])
    np.testing.assert_array_equal(symbols_to_index([[1, 15, 0, 2]], 32), [[31, 2]])
    np.testing.assert_array_equal(symbols_to_index([[15, 15]], 32), [[255 % 32]])
    with pytest.raises(ShapeMismatchError):
        symbols_to_index([[1, 2, 3]], 32)
    with pytest.raises(ValueError):
        symbols_per_index(1)


def test_pooled_statistics_of_constant_image():
    image = np.full((4, 5, 2), 0.25)
    stats = pooled_statistics(image)
    assert stats.shape == (1, 8)
    np.testing.assert_allclose(stats[0], [0.25, 0.25, 0, 0, 0, 0, 0, 0])


def test_quantize_exact_codeword_and_ties():
    codewords = np.random.default_rng(0).standard_normal((3, 5, 2))
    book = Codebook(codewords)
    for k in range(5):
        features = codewords[:, k, :].reshape(1, -1)
        np.testing.assert_array_equal(book.quantize(features), [[k, k, k]])

    same = Codebook(np.zeros((2, 4, 3)))
    np.testing.assert_array_equal(same.quantize(np.ones((1, 6))), [[0, 0]])


def test_encode_is_deterministic(trained_codec, small_dataset):
    first = encode(small_dataset.images[:10], trained_codec)
    second = encode(small_dataset.images[:10], trained_codec)
    np.testing.assert_array_equal(first.indices, second.indices)
    assert first.indices.shape == (10, trained_codec.codebook.n_sub)
    assert first.symbols_per_image == trained_codec.codebook.n_sub


def test_encode_rejects_wrong_shape(trained_codec):
    with pytest.raises(ShapeMismatchError):
        encode(np.zeros((2, 8, 8, 4)), trained_codec)
    with pytest.raises(ShapeMismatchError):
        encode(np.zeros((8, 8)), trained_codec)


def test_message_validates_indices():
    with pytest.raises(ValueError):
        SemanticMessage(np.array([[16]]), 16, 10, 4)
    with pytest.raises(ShapeMismatchError):
        SemanticMessage(np.array([1, 2]), 16, 10, 4)


@pytest.mark.parametrize("constellation", [build_16psk(), build_16apsk()])
def test_transmit_over_perfect_channel_is_identity(constellation):
    rng = np.random.default_rng(0)
    msg = SemanticMessage(rng.integers(0, 128, size=(20, 16)), 128, 10, 64)
    received = transmit(msg, constellation, ChannelInstance(), rng)
    np.testing.assert_array_equal(received.indices, msg.indices)


def test_transmit_at_very_low_snr_scatters_uniformly():
    rng = np.random.default_rng(1)
    c = build_16psk()
    msg = SemanticMessage(rng.integers(0, 16, size=(62_500, 16)), 16, 10, 64)
    chan = ChannelInstance(noise_sigma=noise_sigma_from_psnr(-20.0, c.peak_power))
    received = transmit(msg, c, chan, rng)
    # Rotational symmetry of 16PSK keeps the output uniform for uniform input
    frequencies = np.bincount(received.indices.ravel(), minlength=16) / received.indices.size
    np.testing.assert_allclose(frequencies, 1 / 16, atol=0.002)
    # The residual signal leaves slightly fewer errors than pure guessing
    error_rate = float(np.mean(received.indices != msg.indices))
    assert 0.9 < error_rate < 15 / 16 + 0.002


def test_index_error_rate_matches_ser_for_one_symbol_per_index():
    rng = np.random.default_rng(2)
    c = build_16psk()
    msg = SemanticMessage(rng.integers(0, 16, size=(12_500, 16)), 16, 10, 64)
    chan = ChannelInstance(noise_sigma=noise_sigma_from_psnr(14.0, c.peak_power))
    received = transmit(msg, c, chan, rng)
    expected = float(analytic_ser_psk(14.0))
    sigma = math.sqrt(expected * (1 - expected) / msg.indices.size)
    assert abs(index_error_rate(msg.indices, received.indices) - expected) <= 4 * sigma


def test_zero_decoder_gives_equal_logits(small_dataset):
    codec, _ = fresh_codec(small_dataset)
    logits = decode(encode(small_dataset.images[:5], codec), codec)
    assert np.all(logits == logits[:, :1])


def test_decode_is_equivariant_to_decoder_row_order(trained_codec, small_dataset):
    msg = encode(small_dataset.images[:20], trained_codec)
    perm = np.random.default_rng(0).permutation(trained_codec.n_classes)
    permuted = trained_codec.copy()
    permuted.decoder = LinearDecoder(trained_codec.decoder.weights[perm], trained_codec.decoder.bias[perm])
    np.testing.assert_allclose(decode(msg, permuted), decode(msg, trained_codec)[:, perm])


def test_decode_rejects_foreign_message(trained_codec):
    with pytest.raises(ShapeMismatchError):
        decode(SemanticMessage(np.zeros((1, 3), dtype=np.int64), 16, 10, 12), trained_codec)


def test_noiseless_link_matches_local_prediction(trained_codec, small_dataset):
    rng = np.random.default_rng(0)
    msg = encode(small_dataset.images, trained_codec)
    received = transmit(msg, build_16apsk(), ChannelInstance(gain=0.2 + 0.7j), rng)
    np.testing.assert_array_equal(np.argmax(decode(received, trained_codec), axis=1),
                                  predict(small_dataset.images, trained_codec))
    np.testing.assert_array_equal(predict(small_dataset.images, trained_codec), trained_codec.train_predictions)


def test_trained_codec_learns_small_dataset(trained_codec, small_dataset):
    assert top1(predict(small_dataset.images, trained_codec), small_dataset.labels) >= 0.9


def test_default_dataset_reaches_oracle_level():
    dataset = generate_synthetic(10, 100, 64, 64, 3, 0.1, seed=0)
    cfg = DTJSCCConfig(codebook_sizes=[32])
    codec = Codec.create(dataset, 32, cfg, derive_rng(0, "codec", 32))
    trace = train(dataset, codec, cfg, derive_rng(0, "train", 32))
    assert trace.accuracy[-1] >= 0.95
    assert trace.accuracy[-1] >= nearest_mean_oracle(dataset) - 0.05


def test_zero_learning_rate_changes_nothing(small_dataset):
    codec, cfg = fresh_codec(small_dataset, epochs=3, lr=0.0, commitment=0.0)
    before = {name: value.copy() for name, value in codec.parameters().items()}
    codewords = codec.codebook.codewords.copy()
    trace = train(small_dataset, codec, cfg, np.random.default_rng(0))
    for name, value in codec.parameters().items():
        np.testing.assert_array_equal(value, before[name])
    np.testing.assert_array_equal(codec.codebook.codewords, codewords)
    assert trace.loss[0] == pytest.approx(trace.loss[-1], rel=1e-9)
    assert trace.loss[0] == pytest.approx(math.log(small_dataset.n_classes), rel=1e-3)


def test_training_is_deterministic(small_dataset):
    traces = []
    for _ in range(2):
        codec, cfg = fresh_codec(small_dataset, epochs=3)
        traces.append((train(small_dataset, codec, cfg, derive_rng(4, "train")), codec))
    (first, a), (second, b) = traces
    assert first.loss == second.loss
    for name, value in a.parameters().items():
        np.testing.assert_array_equal(value, b.parameters()[name])


def test_training_loss_decreases(small_dataset):
    codec, cfg = fresh_codec(small_dataset, epochs=8)
    trace = train(small_dataset, codec, cfg, derive_rng(0, "train"))
    assert trace.loss[-1] < trace.loss[0]
    assert len(trace.rows()) == 8
    assert trace.rows()[0][0] == 1


def test_gradients_match_finite_differences(small_dataset, small_stats):
    codec, _ = fresh_codec(small_dataset)
    rng = np.random.default_rng(5)
    codec.decoder.weights[:] = 0.3 * rng.standard_normal(codec.decoder.weights.shape)
    codec.decoder.bias[:] = 0.1 * rng.standard_normal(codec.decoder.bias.shape)
    stats, labels = small_stats[:16], small_dataset.labels[:16]

    _, grads, _ = loss_and_grads(codec, stats, labels, quantize=False)
    params = codec.parameters()
    eps = 1e-6
    for name in ("w1", "b1", "w2", "b2", "dec_w", "dec_b"):
        flat = params[name].reshape(-1)
        for j in rng.choice(flat.size, size=min(10, flat.size), replace=False):
            saved = flat[j]
            flat[j] = saved + eps
            plus = loss_and_grads(codec, stats, labels, quantize=False)[0]
            flat[j] = saved - eps
            minus = loss_and_grads(codec, stats, labels, quantize=False)[0]
            flat[j] = saved
            numeric = (plus - minus) / (2 * eps)
            analytic = grads[name].reshape(-1)[j]
            scale = max(abs(numeric), abs(analytic), 1e-4)
            assert abs(numeric - analytic) / scale < 1e-4, (name, j)


def test_accuracy_degrades_with_symbol_flips(trained_codec, small_dataset, small_stats):
    msg = encode(small_dataset.images, trained_codec)
    accuracies = []
    for p in (0.0, 0.125, 0.25, 0.375, 0.5):
        rng = np.random.default_rng(0)
        hits = []
        for _ in range(10):
            flipped = flip_indices(msg.indices, trained_codec.k_q, p, rng)
            logits = trained_codec.decoder.logits(trained_codec.codebook.dequantize(flipped))
            hits.append(top1(logits, small_dataset.labels))
        accuracies.append(float(np.mean(hits)))
    assert all(b <= a + 0.03 for a, b in zip(accuracies, accuracies[1:]))
    assert accuracies[-1] < accuracies[0]


def test_flip_probability_bounds():
    with pytest.raises(ValueError):
        flip_indices(np.zeros((1, 2), dtype=np.int64), 16, 1.5, np.random.default_rng(0))
    unchanged = flip_indices(np.arange(8).reshape(2, 4), 16, 0.0, np.random.default_rng(0))
    np.testing.assert_array_equal(unchanged, np.arange(8).reshape(2, 4))


def test_learned_codebook_beats_random_codebook(trained_codec, small_stats):
    features = trained_codec.extractor.features(small_stats)
    rng = np.random.default_rng(0)
    shape = trained_codec.codebook.codewords.shape
    random_book = Codebook(features.mean() + features.std() * rng.standard_normal(shape))
    assert quantization_error(trained_codec, small_stats) < quantization_error(trained_codec, small_stats, random_book)


def test_divergence_is_reported(small_dataset):
    codec, cfg = fresh_codec(small_dataset, epochs=1)
    codec.decoder.bias[:] = np.nan
    with pytest.raises(DivergenceError):
        train(small_dataset, codec, cfg, np.random.default_rng(0))


def test_predict_stats_agrees_with_predict(trained_codec, small_dataset, small_stats):
    np.testing.assert_array_equal(predict_stats(small_stats, trained_codec),
                                  predict(small_dataset.images, trained_codec))


def test_train_rejects_mismatched_dataset(trained_codec, small_codec_cfg):
    other = generate_synthetic(10, 2, 4, 4, 3, 0.1, seed=0)
    with pytest.raises(ShapeMismatchError):
        train(other, trained_codec.copy(), small_codec_cfg, np.random.default_rng(0))
