"""16PSK / 16APSK constellations, hard demapping and symbol error rates"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

from csaeo.link.channel import ChannelInstance, apply_channel

ORDER = 16
BITS_PER_SYMBOL = 4
# Squared distances are compared on this grid so geometric ties stay ties
_TIE_DECIMALS = 12
_DEMOD_CHUNK = 1 << 16


def _gray(n: int) -> int:
    return n ^ (n >> 1)


@dataclass(frozen=True, eq=False)
class Constellation:
    """points are in geometric order; gray_map[k] is the point carrying symbol k"""
    name: str
    points: np.ndarray
    gray_map: np.ndarray
    bits_per_symbol: int = BITS_PER_SYMBOL
    labelled: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        points = np.asarray(self.points, dtype=complex)
        gray_map = np.asarray(self.gray_map, dtype=np.int64)
        if points.shape != (ORDER,):
            raise ValueError(f"expected {ORDER} points, got shape {points.shape}")
        if sorted(gray_map.tolist()) != list(range(ORDER)):
            raise ValueError("gray_map must be a permutation of 0..15")
        if len(set(np.round(points, 12).tolist())) != ORDER:
            raise ValueError("constellation points must be distinct")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "gray_map", gray_map)
        object.__setattr__(self, "labelled", points[gray_map])

    @property
    def average_energy(self) -> float:
        return float(np.mean(np.abs(self.points) ** 2))

    @property
    def peak_power(self) -> float:
        return float(np.max(np.abs(self.points) ** 2))

    def label_of(self, position: int) -> int:
        """Symbol carried by the geometric position"""
        return int(np.flatnonzero(self.gray_map == position)[0])


def build_16psk() -> Constellation:
    k = np.arange(ORDER)
    points = np.exp(1j * 2 * np.pi * k / ORDER)
    points[0] = 1 + 0j
    # Position m carries label gray(m); invert for symbol -> position
    gray_map = np.empty(ORDER, dtype=np.int64)
    for m in range(ORDER):
        gray_map[_gray(m)] = m
    return Constellation(name="16psk", points=points, gray_map=gray_map)


def build_16apsk(gamma: float = 2.85) -> Constellation:
    """4+12 rings, outer radius gamma * inner, unit average energy

    Labels follow the reflected Gray sequence ring by ring.
    """
    if not gamma > 1:
        raise ValueError(f"gamma must be > 1, got {gamma}")
    r1 = math.sqrt(ORDER / (4 + 12 * gamma ** 2))
    r2 = gamma * r1
    inner = r1 * np.exp(1j * (np.pi / 4 + np.arange(4) * np.pi / 2))
    outer = r2 * np.exp(1j * np.arange(12) * np.pi / 6)
    points = np.concatenate([inner, outer])
    gray_map = np.empty(ORDER, dtype=np.int64)
    for m in range(ORDER):
        gray_map[_gray(m)] = m
    return Constellation(name="16apsk", points=points, gray_map=gray_map)


def build_constellation(name: str, gamma: float = 2.85) -> Constellation:
    if name == "16psk":
        return build_16psk()
    if name == "16apsk":
        return build_16apsk(gamma)
    raise ValueError(f"unknown constellation: {name!r}")


def modulate(indices, c: Constellation) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= ORDER):
        raise ValueError(f"symbol indices must lie in 0..{ORDER - 1}")
    return c.labelled[idx]


def demodulate_hard(block, c: Constellation) -> np.ndarray:
    """Nearest point per sample; equidistant points resolve to the lowest symbol"""
    y = np.asarray(block, dtype=complex).ravel()
    out = np.empty(y.shape, dtype=np.int64)
    for start in range(0, y.size, _DEMOD_CHUNK):
        chunk = y[start:start + _DEMOD_CHUNK]
        d2 = np.abs(chunk[:, None] - c.labelled[None, :]) ** 2
        out[start:start + _DEMOD_CHUNK] = np.argmin(np.round(d2, _TIE_DECIMALS), axis=1)
    return out.reshape(np.shape(block))


def q_function(x):
    return 0.5 * erfc(np.asarray(x) / math.sqrt(2))


def analytic_ser_psk(esn0_db, m: int = ORDER):
    """2 Q(sqrt(2 Es/N0) sin(pi/M)), the high-SNR M-PSK approximation"""
    snr = 10 ** (np.asarray(esn0_db, dtype=float) / 10)
    return np.minimum(2 * q_function(np.sqrt(2 * snr) * math.sin(math.pi / m)), 1 - 1 / m)


def union_bound_ser(c: Constellation, esn0_db):
    """Pairwise union bound (1/M) sum_i sum_j Q(d_ij / sqrt(2 N0)), capped at 1 - 1/M"""
    n0 = c.average_energy / 10 ** (np.asarray(esn0_db, dtype=float) / 10)
    d = np.abs(c.points[:, None] - c.points[None, :])
    d = d[~np.eye(ORDER, dtype=bool)]
    pairwise = q_function(d[..., None] / np.sqrt(2 * np.atleast_1d(n0))[None, :])
    ser = pairwise.sum(axis=0) / ORDER
    ser = np.minimum(ser, 1 - 1 / ORDER)
    return float(ser[0]) if np.ndim(esn0_db) == 0 else ser


def symbol_error_rate(c: Constellation, esn0_db):
    if c.name == "16psk":
        return analytic_ser_psk(esn0_db)
    return union_bound_ser(c, esn0_db)


def fading_average_ser(c: Constellation, esn0_db: float, gains: np.ndarray) -> float:
    """Mean SER over fading draws with perfect equalization"""
    effective = esn0_db + 10 * np.log10(np.maximum(np.abs(np.asarray(gains)) ** 2, 1e-30))
    return float(np.mean(symbol_error_rate(c, effective)))


def ser_monte_carlo(c: Constellation, snr_db: float, n_trials: int, rng: np.random.Generator) -> float:
    """Fraction of symbol errors through AWGN at Es/N0 = snr_db"""
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials}")
    sent = rng.integers(0, ORDER, size=n_trials)
    n0 = c.average_energy / 10 ** (snr_db / 10)
    inst = ChannelInstance(gain=1 + 0j, noise_sigma=math.sqrt(n0 / 2))
    received = demodulate_hard(apply_channel(modulate(sent, c), inst, rng), c)
    return float(np.mean(received != sent))


__all__ = (
    'ORDER', 'BITS_PER_SYMBOL', 'Constellation', 'build_16psk', 'build_16apsk', 'build_constellation',
    'modulate', 'demodulate_hard', 'q_function', 'analytic_ser_psk', 'union_bound_ser', 'symbol_error_rate',
    'fading_average_ser', 'ser_monte_carlo',
)
