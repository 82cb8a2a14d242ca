"""Discrete task-oriented JSCC codec

f: per-band pooled statistics -> tanh hidden layer -> A = L * A_sub features
codebooks: L tables of K_q codewords, one index per sub-vector
l: linear decoder over the dequantized features

An index is carried by ceil(log2(K_q) / 4) 16-ary symbols, most significant first.
"""
import copy
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from csaeo.link.channel import ChannelInstance, apply_channel, equalize
from csaeo.link.modem import ORDER, Constellation, demodulate_hard, modulate
from csaeo.models.config import DTJSCCConfig, SemAugConfig
from csaeo.semantic import semaug
from csaeo.semantic.data import LabeledDataset
from csaeo.utils.errors import DivergenceError, ShapeMismatchError
from csaeo.utils.logger import logger

STATS_PER_BAND = 4
_TIE_DECIMALS = 12
_STATS_CHUNK = 256


def symbols_per_index(k_q: int) -> int:
    if k_q < 2:
        raise ValueError(f"codebook size must be >= 2, got {k_q}")
    return max(1, math.ceil(math.log2(k_q) / 4))


def index_to_symbols(indices, k_q: int) -> np.ndarray:
    """(..., L) indices -> (..., L * n) base-16 digits, big-endian per index"""
    idx = np.asarray(indices, dtype=np.int64)
    n = symbols_per_index(k_q)
    powers = ORDER ** np.arange(n - 1, -1, -1)
    digits = (idx[..., None] // powers) % ORDER
    return digits.reshape(*idx.shape[:-1], idx.shape[-1] * n)


def symbols_to_index(symbols, k_q: int) -> np.ndarray:
    """Inverse of index_to_symbols; values past K_q - 1 wrap modulo K_q"""
    sym = np.asarray(symbols, dtype=np.int64)
    n = symbols_per_index(k_q)
    if sym.shape[-1] % n:
        raise ShapeMismatchError(f"{sym.shape[-1]} symbols is not a multiple of {n}")
    grouped = sym.reshape(*sym.shape[:-1], sym.shape[-1] // n, n)
    powers = ORDER ** np.arange(n - 1, -1, -1)
    return (grouped * powers).sum(axis=-1) % k_q


def pooled_statistics(images) -> np.ndarray:
    """Per band: mean, std, mean |horizontal step|, mean |vertical step|"""
    x = np.asarray(images)
    if x.ndim == 3:
        x = x[None]
    if x.ndim != 4:
        raise ShapeMismatchError(f"expected H x W x D or N x H x W x D images, got {x.shape}")
    out = np.zeros((x.shape[0], STATS_PER_BAND * x.shape[3]))
    d = x.shape[3]
    for start in range(0, x.shape[0], _STATS_CHUNK):
        chunk = x[start:start + _STATS_CHUNK].astype(np.float64)
        block = out[start:start + _STATS_CHUNK]
        block[:, :d] = chunk.mean(axis=(1, 2))
        block[:, d:2 * d] = chunk.std(axis=(1, 2))
        if chunk.shape[2] > 1:
            block[:, 2 * d:3 * d] = np.abs(np.diff(chunk, axis=2)).mean(axis=(1, 2))
        if chunk.shape[1] > 1:
            block[:, 3 * d:] = np.abs(np.diff(chunk, axis=1)).mean(axis=(1, 2))
    return out


@dataclass(eq=False)
class FeatureExtractor:
    input_shape: Tuple[int, int, int]
    input_mean: np.ndarray
    input_scale: np.ndarray
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    n_sub: int
    sub_dim: int

    def __post_init__(self):
        self.input_shape = tuple(int(v) for v in self.input_shape)
        n_in = STATS_PER_BAND * self.input_shape[2]
        hidden = self.b1.shape[0]
        if self.w1.shape != (hidden, n_in) or self.input_mean.shape != (n_in, ):
            raise ShapeMismatchError("hidden layer does not match the input statistics")
        if self.w2.shape != (self.feature_dim, hidden) or self.b2.shape != (self.feature_dim, ):
            raise ShapeMismatchError("output layer does not match n_sub x sub_dim")

    @classmethod
    def create(cls, stats: np.ndarray, input_shape, n_sub: int, sub_dim: int, hidden: int,
               rng: np.random.Generator) -> "FeatureExtractor":
        n_in = stats.shape[1]
        mean = stats.mean(axis=0)
        scale = stats.std(axis=0)
        scale[scale < 1e-12] = 1.0
        dim = n_sub * sub_dim
        return cls(
            input_shape=input_shape,
            input_mean=mean,
            input_scale=scale,
            w1=rng.standard_normal((hidden, n_in)) / math.sqrt(n_in),
            b1=np.zeros(hidden),
            w2=rng.standard_normal((dim, hidden)) / math.sqrt(hidden),
            b2=np.zeros(dim),
            n_sub=n_sub,
            sub_dim=sub_dim,
        )

    @property
    def feature_dim(self) -> int:
        return self.n_sub * self.sub_dim

    @property
    def hidden(self) -> int:
        return self.b1.shape[0]

    def forward(self, stats: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        z = (stats - self.input_mean) / self.input_scale
        h = np.tanh(z @ self.w1.T + self.b1)
        return z, h, h @ self.w2.T + self.b2

    def features(self, stats: np.ndarray) -> np.ndarray:
        return self.forward(stats)[2]


@dataclass(eq=False)
class Codebook:
    """L tables of K codewords with moving-average statistics"""
    codewords: np.ndarray
    counts: Optional[np.ndarray] = None
    sums: Optional[np.ndarray] = None

    def __post_init__(self):
        self.codewords = np.asarray(self.codewords, dtype=np.float64)
        if self.codewords.ndim != 3:
            raise ShapeMismatchError(f"expected L x K x A_sub codewords, got {self.codewords.shape}")
        if not np.all(np.isfinite(self.codewords)):
            raise ValueError("codewords must be finite")
        if self.counts is None:
            self.counts = np.ones(self.codewords.shape[:2])
        if self.sums is None:
            self.sums = self.codewords * self.counts[..., None]

    @classmethod
    def from_features(cls, features: np.ndarray, n_sub: int, size: int,
                      rng: np.random.Generator) -> "Codebook":
        """Seed each table with randomly chosen training sub-vectors plus a small jitter"""
        sub = features.reshape(features.shape[0], n_sub, -1)
        picks = rng.choice(sub.shape[0], size=size, replace=sub.shape[0] < size)
        codewords = np.transpose(sub[picks], (1, 0, 2)).copy()
        codewords += 1e-3 * sub.std() * rng.standard_normal(codewords.shape)
        return cls(codewords)

    @property
    def n_sub(self) -> int:
        return self.codewords.shape[0]

    @property
    def size(self) -> int:
        return self.codewords.shape[1]

    @property
    def sub_dim(self) -> int:
        return self.codewords.shape[2]

    def quantize(self, features: np.ndarray) -> np.ndarray:
        """Nearest codeword per sub-vector; ties go to the lowest index"""
        sub = np.asarray(features, dtype=np.float64).reshape(-1, self.n_sub, self.sub_dim)
        d2 = ((sub[:, :, None, :] - self.codewords[None]) ** 2).sum(axis=3)
        return np.argmin(np.round(d2, _TIE_DECIMALS), axis=2)

    def dequantize(self, indices: np.ndarray) -> np.ndarray:
        idx = np.asarray(indices, dtype=np.int64)
        picked = self.codewords[np.arange(self.n_sub)[None, :], idx]
        return picked.reshape(idx.shape[0], self.n_sub * self.sub_dim)

    def ema_update(self, features: np.ndarray, indices: np.ndarray, decay: float):
        sub = features.reshape(-1, self.n_sub, self.sub_dim)
        onehot = np.zeros((sub.shape[0], self.n_sub, self.size))
        np.put_along_axis(onehot, indices[..., None], 1.0, axis=2)
        batch_counts = onehot.sum(axis=0)
        batch_sums = np.einsum('blk,bla->lka', onehot, sub)
        self.counts = decay * self.counts + (1 - decay) * batch_counts
        self.sums = decay * self.sums + (1 - decay) * batch_sums
        self.codewords = self.sums / self.counts[..., None]


@dataclass(eq=False)
class LinearDecoder:
    weights: np.ndarray
    bias: np.ndarray

    @classmethod
    def zeros(cls, n_classes: int, dim: int) -> "LinearDecoder":
        return cls(np.zeros((n_classes, dim)), np.zeros(n_classes))

    def logits(self, features: np.ndarray) -> np.ndarray:
        return np.asarray(features, dtype=np.float64) @ self.weights.T + self.bias


@dataclass(frozen=True, eq=False)
class SemanticMessage:
    """Per-image codebook indices; B, C and A ride along as metadata"""
    indices: np.ndarray
    k_q: int
    n_classes: int
    feature_dim: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 2:
            raise ShapeMismatchError(f"expected B x L indices, got shape {idx.shape}")
        if idx.size and (idx.min() < 0 or idx.max() >= self.k_q):
            raise ValueError(f"indices must lie in 0..{self.k_q - 1}")
        object.__setattr__(self, "indices", idx)

    @property
    def batch_size(self) -> int:
        return self.indices.shape[0]

    @property
    def symbols_per_index(self) -> int:
        return symbols_per_index(self.k_q)

    @property
    def symbols_per_image(self) -> int:
        return self.indices.shape[1] * self.symbols_per_index

    def to_symbols(self) -> np.ndarray:
        return index_to_symbols(self.indices, self.k_q)

    def with_symbols(self, symbols) -> "SemanticMessage":
        return SemanticMessage(symbols_to_index(symbols, self.k_q), self.k_q, self.n_classes, self.feature_dim)

    def as_dict(self):
        return {
            "batch_size": self.batch_size,
            "k_q": self.k_q,
            "n_classes": self.n_classes,
            "feature_dim": self.feature_dim,
            "indices": self.indices,
        }


@dataclass(eq=False)
class Codec:
    extractor: FeatureExtractor
    codebook: Codebook
    decoder: LinearDecoder
    class_names: Tuple[str, ...]
    predictor: Optional[semaug.CovariancePredictor] = None
    bank: Optional[semaug.ClassCovarianceBank] = None
    # Noiseless predictions on the training set after the last epoch
    train_predictions: Optional[np.ndarray] = field(default=None, repr=False)
    _velocity: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.class_names = tuple(self.class_names)
        if self.codebook.n_sub != self.extractor.n_sub or self.codebook.sub_dim != self.extractor.sub_dim:
            raise ShapeMismatchError("codebook does not match the extractor's sub-vector layout")
        if self.decoder.weights.shape != (len(self.class_names), self.extractor.feature_dim):
            raise ShapeMismatchError("decoder does not map A features to C classes")

    @classmethod
    def create(cls, dataset: LabeledDataset, k_q: int, cfg: DTJSCCConfig, rng: np.random.Generator,
               stats: Optional[np.ndarray] = None) -> "Codec":
        if len(dataset) == 0:
            raise ValueError("cannot build a codec from an empty dataset")
        symbols_per_index(k_q)
        stats = pooled_statistics(dataset.images) if stats is None else stats
        extractor = FeatureExtractor.create(stats, dataset.image_shape, cfg.n_sub, cfg.sub_dim, cfg.hidden, rng)
        codebook = Codebook.from_features(extractor.features(stats), cfg.n_sub, k_q, rng)
        decoder = LinearDecoder.zeros(dataset.n_classes, extractor.feature_dim)
        return cls(extractor, codebook, decoder, dataset.class_names)

    @property
    def k_q(self) -> int:
        return self.codebook.size

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def feature_dim(self) -> int:
        return self.extractor.feature_dim

    @property
    def input_shape(self) -> Tuple[int, int, int]:
        return self.extractor.input_shape

    def parameters(self) -> Dict[str, np.ndarray]:
        """Gradient-trained arrays; the codebook follows its moving averages instead"""
        return {
            "w1": self.extractor.w1,
            "b1": self.extractor.b1,
            "w2": self.extractor.w2,
            "b2": self.extractor.b2,
            "dec_w": self.decoder.weights,
            "dec_b": self.decoder.bias,
        }

    def quantized_features(self, stats: np.ndarray) -> np.ndarray:
        return self.codebook.dequantize(self.codebook.quantize(self.extractor.features(stats)))

    def apply_gradients(self, grads: Dict[str, np.ndarray], lr: float, momentum: float):
        params = self.parameters()
        for name, grad in grads.items():
            velocity = self._velocity.get(name)
            if velocity is None:
                velocity = np.zeros_like(grad)
            velocity = momentum * velocity - lr * grad
            self._velocity[name] = velocity
            params[name] += velocity

    def reset_optimizer(self):
        self._velocity = {}

    def copy(self) -> "Codec":
        return copy.deepcopy(self)


@dataclass
class TrainingTrace:
    loss: List[float] = field(default_factory=list)
    accuracy: List[float] = field(default_factory=list)
    final_predictions: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def epochs(self) -> int:
        return len(self.loss)

    def append(self, loss: float, accuracy: float):
        self.loss.append(loss)
        self.accuracy.append(accuracy)

    def rows(self):
        return [(epoch + 1, loss, acc) for epoch, (loss, acc) in enumerate(zip(self.loss, self.accuracy))]

    def as_dict(self):
        return {
            "epochs": self.epochs,
            "loss": self.loss,
            "accuracy": self.accuracy,
            "final_accuracy": self.accuracy[-1] if self.accuracy else None,
        }


def _check_shape(images: np.ndarray, codec: Codec) -> np.ndarray:
    x = np.asarray(images)
    if x.ndim == 3:
        x = x[None]
    if x.ndim != 4 or tuple(x.shape[1:]) != codec.input_shape:
        raise ShapeMismatchError(f"codec expects {codec.input_shape} images, got {np.shape(images)}")
    return x


def encode(images, codec: Codec) -> SemanticMessage:
    x = _check_shape(images, codec)
    indices = codec.codebook.quantize(codec.extractor.features(pooled_statistics(x)))
    return SemanticMessage(indices, codec.k_q, codec.n_classes, codec.feature_dim)


def transmit(msg: SemanticMessage, c: Constellation, chan: ChannelInstance, rng: np.random.Generator,
             equalize_mode: str = "perfect") -> SemanticMessage:
    """indices -> symbols -> H x + n -> equalize -> hard decisions -> indices"""
    symbols = msg.to_symbols()
    received = apply_channel(modulate(symbols.ravel(), c), chan, rng)
    decided = demodulate_hard(equalize(received, chan, equalize_mode), c)
    return msg.with_symbols(decided.reshape(symbols.shape))


def decode(msg: SemanticMessage, codec: Codec) -> np.ndarray:
    if msg.k_q != codec.k_q or msg.indices.shape[1] != codec.codebook.n_sub:
        raise ShapeMismatchError("message layout does not match the codec")
    return codec.decoder.logits(codec.codebook.dequantize(msg.indices))


def predict(images, codec: Codec) -> np.ndarray:
    """Local, channel-free class predictions"""
    return np.argmax(decode(encode(images, codec), codec), axis=1)


def predict_stats(stats: np.ndarray, codec: Codec) -> np.ndarray:
    return np.argmax(codec.decoder.logits(codec.quantized_features(stats)), axis=1)


def flip_indices(indices: np.ndarray, k_q: int, flip_prob: float, rng: np.random.Generator) -> np.ndarray:
    """Replace each carrying symbol, with probability flip_prob, by a uniformly chosen other symbol"""
    if not 0 <= flip_prob <= 1:
        raise ValueError(f"flip_prob must lie in [0, 1], got {flip_prob}")
    symbols = index_to_symbols(indices, k_q)
    flip = rng.random(symbols.shape) < flip_prob
    shift = rng.integers(1, ORDER, size=symbols.shape)
    return symbols_to_index(np.where(flip, (symbols + shift) % ORDER, symbols), k_q)


def loss_and_grads(codec: Codec, stats: np.ndarray, labels: np.ndarray, commitment: float = 0.25,
                   quantize: bool = True, flip_prob: float = 0.0, rng: Optional[np.random.Generator] = None,
                   lam: float = 0.0, sigma: Optional[np.ndarray] = None):
    """Loss, parameter gradients and the forward cache for one batch

    Quantization passes gradients straight through: dL/de = dL/da, plus the
    commitment pull of e toward its codeword. With quantize=False the decoder
    reads e directly.
    """
    ex, dec = codec.extractor, codec.decoder
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.size
    z, h, e = ex.forward(stats)

    indices = None
    if quantize:
        indices = codec.codebook.quantize(e)
        q = codec.codebook.dequantize(indices)
        if flip_prob > 0:
            if rng is None:
                raise ValueError("a random stream is required for channel-in-the-loop training")
            a = codec.codebook.dequantize(flip_indices(indices, codec.k_q, flip_prob, rng))
        else:
            a = q
    else:
        q = a = e

    logits = dec.logits(a)
    dsigma = None
    if lam > 0 and sigma is not None:
        loss, dlogits, dweights_aug, dsigma = semaug.augmented_cross_entropy(logits, labels, dec.weights, sigma,
                                                                            lam)
    else:
        loss, dlogits = semaug.cross_entropy_with_grad(logits, labels)
        dweights_aug = 0.0

    de = dlogits @ dec.weights
    if quantize and commitment > 0:
        gap = e - q
        loss += commitment * float(np.mean((gap ** 2).sum(axis=1))) / ex.feature_dim
        de = de + (2 * commitment / (ex.feature_dim * n)) * gap

    dpre = (de @ ex.w2) * (1 - h ** 2)
    grads = {
        "w1": dpre.T @ z,
        "b1": dpre.sum(axis=0),
        "w2": de.T @ h,
        "b2": de.sum(axis=0),
        "dec_w": dlogits.T @ a + dweights_aug,
        "dec_b": dlogits.sum(axis=0),
    }
    cache = {"features": e, "indices": indices, "received": a, "logits": logits, "dsigma": dsigma}
    return loss, grads, cache


def train_step(codec: Codec, stats: np.ndarray, labels: np.ndarray, lr: float, cfg: DTJSCCConfig,
               rng: np.random.Generator, flip_prob: float = 0.0, lam: float = 0.0,
               sigma: Optional[np.ndarray] = None):
    """One SGD step on f and l plus the codebook moving average; returns (loss, dL/dSigma)"""
    loss, grads, cache = loss_and_grads(codec, stats, labels, commitment=cfg.commitment, flip_prob=flip_prob,
                                        rng=rng, lam=lam, sigma=sigma)
    if not math.isfinite(loss):
        raise DivergenceError(f"non-finite training loss {loss}")
    if lr > 0:
        codec.apply_gradients(grads, lr, cfg.momentum)
        codec.codebook.ema_update(cache["features"], cache["indices"], cfg.ema_decay)
    return loss, cache["dsigma"]


def decoder_step(codec: Codec, features: np.ndarray, labels: np.ndarray, lr: float, momentum: float,
                 lam: float = 0.0, sigma: Optional[np.ndarray] = None):
    """SGD step on l alone from already dequantized (e.g. received) features"""
    labels = np.asarray(labels, dtype=np.int64)
    dec = codec.decoder
    logits = dec.logits(features)
    if lam > 0 and sigma is not None:
        loss, dlogits, dweights_aug, dsigma = semaug.augmented_cross_entropy(logits, labels, dec.weights, sigma,
                                                                            lam)
    else:
        (loss, dlogits), dweights_aug, dsigma = semaug.cross_entropy_with_grad(logits, labels), 0.0, None
    if not math.isfinite(loss):
        raise DivergenceError(f"non-finite decoder loss {loss}")
    if lr > 0:
        codec.apply_gradients({"dec_w": dlogits.T @ features + dweights_aug, "dec_b": dlogits.sum(axis=0)},
                              lr, momentum)
    return loss, dsigma


def train(dataset: LabeledDataset, codec: Codec, cfg: DTJSCCConfig, rng: np.random.Generator,
          flip_prob: float = 0.0, semaug_cfg: Optional[SemAugConfig] = None) -> TrainingTrace:
    """Minibatch SGD over cfg.epochs; SA loss when semaug_cfg.train_with_sa and lambda > 0"""
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    if cfg.lr < 0:
        raise ValueError(f"lr must be >= 0, got {cfg.lr}")
    _check_shape(dataset.images[:1], codec)

    stats = pooled_statistics(dataset.images)
    labels = dataset.labels
    n = len(dataset)
    use_sa = semaug_cfg is not None and semaug_cfg.train_with_sa and semaug_cfg.lambda_sa > 0
    trace = TrainingTrace()

    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        lam = 0.0
        if use_sa:
            ramp = semaug_cfg.lambda_ramp_epochs
            lam = semaug_cfg.lambda_sa * (min(1.0, (epoch + 1) / ramp) if ramp else 1.0)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            if lam > 0:
                loss = semaug.sa_train_step(codec, labels[batch], lam, cfg.lr, rng, semaug_cfg, cfg,
                                            stats=stats[batch], flip_prob=flip_prob).loss
            else:
                loss, _ = train_step(codec, stats[batch], labels[batch], cfg.lr, cfg, rng, flip_prob=flip_prob)
            total += loss * batch.size
        accuracy = float(np.mean(predict_stats(stats, codec) == labels))
        trace.append(total / n, accuracy)
        logger.info(f"Epoch {epoch + 1}/{cfg.epochs}: loss={total / n:.4f}, train_top1={accuracy:.4f}")

    codec.train_predictions = predict_stats(stats, codec)
    trace.final_predictions = codec.train_predictions
    return trace


def quantization_error(codec: Codec, stats: np.ndarray, codebook: Optional[Codebook] = None) -> float:
    """Mean squared distance from each feature sub-vector to its chosen codeword"""
    codebook = codec.codebook if codebook is None else codebook
    e = codec.extractor.features(stats)
    q = codebook.dequantize(codebook.quantize(e))
    return float(np.mean(((e - q) ** 2).sum(axis=1)))


__all__ = (
    'STATS_PER_BAND', 'symbols_per_index', 'index_to_symbols', 'symbols_to_index', 'pooled_statistics',
    'FeatureExtractor', 'Codebook', 'LinearDecoder', 'SemanticMessage', 'Codec', 'TrainingTrace', 'encode',
    'transmit', 'decode', 'predict', 'predict_stats', 'flip_indices', 'loss_and_grads', 'train_step',
    'decoder_step', 'train', 'quantization_error',
)
