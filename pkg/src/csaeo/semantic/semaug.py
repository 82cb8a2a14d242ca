"""Semantic data augmentation: class covariance bank, covariance predictor and the SA loss

The SA loss is the closed-form upper bound of the expected cross-entropy when each
feature a of class y is perturbed by N(0, lambda * Sigma_y):

    -log exp(z_y) / sum_j exp(z_j + lambda/2 (w_j - w_y)^T Sigma_y (w_j - w_y))

with z = W a + b the decoder logits and Sigma_y diagonal.
"""
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional, Tuple, Union

import numpy as np
from scipy.special import logsumexp

from csaeo.models.config import DTJSCCConfig, SemAugConfig
from csaeo.utils.errors import DivergenceError, ShapeMismatchError
from csaeo.utils.logger import logger

if TYPE_CHECKING:
    from csaeo.semantic.dtjscc import Codec, LinearDecoder

INITIAL_VARIANCE = 0.01


@dataclass(eq=False)
class ClassCovarianceBank:
    """Per-class running mean and diagonal population variance"""
    counts: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    @classmethod
    def empty(cls, n_classes: int, dim: int) -> "ClassCovarianceBank":
        return cls(counts=np.zeros(n_classes, dtype=np.int64),
                   means=np.zeros((n_classes, dim)),
                   variances=np.zeros((n_classes, dim)))

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def update(self, features, labels) -> "ClassCovarianceBank":
        features = np.asarray(features, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        if features.size == 0:
            return self
        if features.ndim != 2 or features.shape[1] != self.dim:
            raise ShapeMismatchError(f"expected N x {self.dim} features, got {features.shape}")
        if labels.shape != (features.shape[0],):
            raise ShapeMismatchError("one label per feature row is required")
        if labels.min() < 0 or labels.max() >= self.n_classes:
            raise ValueError(f"labels must lie in 0..{self.n_classes - 1}")

        for c in np.unique(labels):
            x = features[labels == c]
            n_b = x.shape[0]
            mean_b = x.mean(axis=0)
            m2_b = ((x - mean_b) ** 2).sum(axis=0)
            n_a = int(self.counts[c])
            n = n_a + n_b
            delta = mean_b - self.means[c]
            m2 = self.variances[c] * n_a + m2_b + delta ** 2 * (n_a * n_b / n)
            self.means[c] = self.means[c] + delta * (n_b / n)
            self.variances[c] = m2 / n
            self.counts[c] = n
        return self

    def copy(self) -> "ClassCovarianceBank":
        return ClassCovarianceBank(self.counts.copy(), self.means.copy(), self.variances.copy())

    def as_dict(self):
        return {"counts": self.counts, "mean_variance": self.variances.mean(axis=1)}


def update_class_covariance(bank: ClassCovarianceBank, features, labels) -> ClassCovarianceBank:
    return bank.update(features, labels)


@dataclass(eq=False)
class CovariancePredictor:
    """g: batch-mean received features -> per-class diagonal variances

    v = (U a_bar + c)^2 reshaped to C x A, nonnegative by construction.
    """
    n_classes: int
    dim: int
    weights: Optional[np.ndarray] = None
    offset: Optional[np.ndarray] = None

    def __post_init__(self):
        size = self.n_classes * self.dim
        if self.weights is None:
            self.weights = np.zeros((size, self.dim))
        if self.offset is None:
            self.offset = np.full(size, np.sqrt(INITIAL_VARIANCE))
        if self.weights.shape != (size, self.dim) or self.offset.shape != (size, ):
            raise ShapeMismatchError("predictor parameters do not match n_classes x dim")

    def _pre(self, features) -> Tuple[np.ndarray, np.ndarray]:
        a = np.asarray(features, dtype=np.float64)
        a_bar = a.mean(axis=0) if a.ndim == 2 else a
        if a_bar.shape != (self.dim, ):
            raise ShapeMismatchError(f"expected {self.dim}-dim features, got {a.shape}")
        return a_bar, self.weights @ a_bar + self.offset

    def predict(self, features) -> np.ndarray:
        _, u = self._pre(features)
        return (u ** 2).reshape(self.n_classes, self.dim)

    def step(self, features, dpredicted: np.ndarray, lr: float):
        """Plain gradient step given dLoss/dpredicted (C x A)"""
        a_bar, u = self._pre(features)
        du = 2 * u * np.asarray(dpredicted).reshape(-1)
        self.weights -= lr * np.outer(du, a_bar)
        self.offset -= lr * du

    def copy(self) -> "CovariancePredictor":
        return CovariancePredictor(self.n_classes, self.dim, self.weights.copy(), self.offset.copy())


CovarianceLike = Union[np.ndarray, ClassCovarianceBank]


def _as_sigma(sigma: CovarianceLike) -> np.ndarray:
    if isinstance(sigma, ClassCovarianceBank):
        return sigma.variances
    return np.asarray(sigma, dtype=np.float64)


def cross_entropy(logits, labels) -> float:
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    return float(np.mean(logsumexp(logits, axis=1) - logits[np.arange(labels.size), labels]))


def cross_entropy_with_grad(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    n = labels.size
    lse = logsumexp(logits, axis=1)
    loss = float(np.mean(lse - logits[np.arange(n), labels]))
    dlogits = np.exp(logits - lse[:, None])
    dlogits[np.arange(n), labels] -= 1
    return loss, dlogits / n


def augmented_cross_entropy(logits: np.ndarray, labels: np.ndarray, weights: np.ndarray, sigma: np.ndarray,
                            lam: float) -> Tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """SA loss with gradients for the logits, the decoder weights and the class variances"""
    n = labels.size
    rows = np.arange(n)
    diff = weights[None, :, :] - weights[labels][:, None, :]
    s = sigma[labels]
    quad = 0.5 * lam * np.einsum('bca,ba->bc', diff ** 2, s)
    augmented = logits + quad
    lse = logsumexp(augmented, axis=1)
    loss = float(np.mean(lse - logits[rows, labels]))

    p = np.exp(augmented - lse[:, None]) / n
    dlogits = p.copy()
    dlogits[rows, labels] -= 1.0 / n

    coef = lam * p[:, :, None] * s[:, None, :] * diff
    dweights = coef.sum(axis=0)
    np.add.at(dweights, labels, -coef.sum(axis=1))

    dsigma = np.zeros_like(sigma)
    np.add.at(dsigma, labels, 0.5 * lam * np.einsum('bc,bca->ba', p, diff ** 2))
    return loss, dlogits, dweights, dsigma


def sa_loss(features, labels, decoder: "LinearDecoder", sigma: CovarianceLike, lam: float) -> float:
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    sigma = _as_sigma(sigma)
    if not (np.all(np.isfinite(features)) and np.all(np.isfinite(sigma))):
        raise ValueError("sa_loss inputs must be finite")
    if np.any(sigma < 0):
        raise ValueError("class variances must be nonnegative")
    logits = decoder.logits(features)
    return augmented_cross_entropy(logits, labels, decoder.weights, sigma, lam)[0]


def blended_covariance(codec: "Codec", features: np.ndarray, cfg: SemAugConfig) -> np.ndarray:
    """Sigma used by the SA loss: blend * g(features) + (1 - blend) * bank"""
    bank = codec.bank.variances
    if cfg.predictor and codec.predictor is not None:
        return cfg.blend * codec.predictor.predict(features) + (1 - cfg.blend) * bank
    return bank


def ensure_sa_state(codec: "Codec", cfg: SemAugConfig):
    if codec.bank is None:
        codec.bank = ClassCovarianceBank.empty(codec.n_classes, codec.feature_dim)
    if cfg.predictor and codec.predictor is None:
        codec.predictor = CovariancePredictor(codec.n_classes, codec.feature_dim)


@dataclass(frozen=True)
class SAStepResult:
    loss: float
    predictor_loss: Optional[float] = None

    def as_dict(self):
        return {"loss": self.loss, "predictor_loss": self.predictor_loss}


def sa_train_step(codec: "Codec", labels, lam: float, lr: float, rng: np.random.Generator,
                  cfg: SemAugConfig, codec_cfg: DTJSCCConfig, stats: Optional[np.ndarray] = None,
                  features: Optional[np.ndarray] = None, flip_prob: float = 0.0) -> SAStepResult:
    """One alternating SA update

    1. fold the batch features into the class covariance bank
    2. step (f, l) on the SA loss with Sigma frozen; with `features` (a received
       message) only l is reachable, with `stats` the whole codec trains
    3. step g toward the bank and down the SA loss
    """
    from csaeo.semantic.dtjscc import decoder_step, train_step

    if (stats is None) == (features is None):
        raise ValueError("pass exactly one of stats or features")
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    labels = np.asarray(labels, dtype=np.int64)
    ensure_sa_state(codec, cfg)

    seen = codec.quantized_features(stats) if features is None else np.asarray(features, dtype=np.float64)
    codec.bank.update(seen, labels)
    sigma = blended_covariance(codec, seen, cfg)

    if stats is not None:
        loss, dsigma = train_step(codec, stats, labels, lr, codec_cfg, rng, flip_prob=flip_prob, lam=lam,
                                  sigma=sigma)
    else:
        loss, dsigma = decoder_step(codec, seen, labels, lr, codec_cfg.momentum, lam=lam, sigma=sigma)

    predictor_loss = None
    if cfg.predictor and codec.predictor is not None:
        predicted = codec.predictor.predict(seen)
        target = codec.bank.variances
        predictor_loss = float(np.mean((predicted - target) ** 2))
        dpredicted = 2 * (predicted - target) / predicted.size
        if dsigma is not None:
            dpredicted = dpredicted + cfg.sa_weight * cfg.blend * dsigma
        if lr > 0:
            codec.predictor.step(seen, dpredicted, cfg.predictor_lr)
        if not np.isfinite(predictor_loss):
            raise DivergenceError(f"covariance predictor loss is {predictor_loss}")

    logger.debug(f"SA step: loss={loss:.6f}, predictor_loss={predictor_loss}")
    return SAStepResult(loss=loss, predictor_loss=predictor_loss)


__all__ = (
    'ClassCovarianceBank', 'update_class_covariance', 'CovariancePredictor', 'cross_entropy',
    'cross_entropy_with_grad', 'augmented_cross_entropy', 'sa_loss', 'blended_covariance', 'ensure_sa_state',
    'SAStepResult', 'sa_train_step',
)
