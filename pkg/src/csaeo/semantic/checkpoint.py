"""DTJC codec checkpoint format

    magic "DTJC" | version u32 | flags u32 | dimension header (9 x u32)
    class names: per name u16 length + utf-8 bytes
    float64 little-endian parameter blocks in a fixed order
    [flags & 1] covariance predictor block, [flags & 2] covariance bank block
"""
import os
import struct
from typing import List, Union

import numpy as np

from csaeo.semantic.dtjscc import Codebook, Codec, FeatureExtractor, LinearDecoder
from csaeo.semantic.semaug import ClassCovarianceBank, CovariancePredictor
from csaeo.utils.errors import CheckpointError
from csaeo.utils.logger import logger

CHECKPOINT_MAGIC = b"DTJC"
CHECKPOINT_VERSION = 1
FLAG_PREDICTOR = 1
FLAG_BANK = 2

_PREAMBLE = struct.Struct("<4sII")
# height, width, bands, hidden, n_sub, sub_dim, k_q, n_classes, n_stats
_DIMS = struct.Struct("<9I")
_NAME_LEN = struct.Struct("<H")

PathLike = Union[str, os.PathLike]


def _f8(array) -> bytes:
    return np.ascontiguousarray(array, dtype="<f8").tobytes()


def codec_to_bytes(codec: Codec) -> bytes:
    ex, cb, dec = codec.extractor, codec.codebook, codec.decoder
    flags = (FLAG_PREDICTOR if codec.predictor is not None else 0) | (FLAG_BANK if codec.bank is not None else 0)
    h, w, d = codec.input_shape
    parts = [
        _PREAMBLE.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, flags),
        _DIMS.pack(h, w, d, ex.hidden, ex.n_sub, ex.sub_dim, cb.size, codec.n_classes, ex.input_mean.size),
    ]
    for name in codec.class_names:
        raw = name.encode("utf-8")
        parts.append(_NAME_LEN.pack(len(raw)) + raw)
    for array in (ex.input_mean, ex.input_scale, ex.w1, ex.b1, ex.w2, ex.b2,
                  cb.codewords, cb.counts, cb.sums, dec.weights, dec.bias):
        parts.append(_f8(array))
    if codec.predictor is not None:
        parts += [_f8(codec.predictor.weights), _f8(codec.predictor.offset)]
    if codec.bank is not None:
        parts += [_f8(codec.bank.counts), _f8(codec.bank.means), _f8(codec.bank.variances)]
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError(f"checkpoint truncated at byte {self.pos}, needed {n} more")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: struct.Struct):
        return fmt.unpack(self.take(fmt.size))

    def floats(self, *shape) -> np.ndarray:
        count = int(np.prod(shape))
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(np.float64).reshape(shape)


def codec_from_bytes(data: bytes) -> Codec:
    reader = _Reader(data)
    magic, version, flags = reader.unpack(_PREAMBLE)
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointError(f"bad checkpoint magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    h, w, d, hidden, n_sub, sub_dim, k_q, n_classes, n_stats = reader.unpack(_DIMS)
    dim = n_sub * sub_dim

    names: List[str] = []
    for _ in range(n_classes):
        (length, ) = reader.unpack(_NAME_LEN)
        names.append(reader.take(length).decode("utf-8"))

    try:
        extractor = FeatureExtractor(
            input_shape=(h, w, d),
            input_mean=reader.floats(n_stats),
            input_scale=reader.floats(n_stats),
            w1=reader.floats(hidden, n_stats),
            b1=reader.floats(hidden),
            w2=reader.floats(dim, hidden),
            b2=reader.floats(dim),
            n_sub=n_sub,
            sub_dim=sub_dim,
        )
        codebook = Codebook(reader.floats(n_sub, k_q, sub_dim), reader.floats(n_sub, k_q),
                            reader.floats(n_sub, k_q, sub_dim))
        decoder = LinearDecoder(reader.floats(n_classes, dim), reader.floats(n_classes))
        predictor = bank = None
        if flags & FLAG_PREDICTOR:
            predictor = CovariancePredictor(n_classes, dim, reader.floats(n_classes * dim, dim),
                                            reader.floats(n_classes * dim))
        if flags & FLAG_BANK:
            bank = ClassCovarianceBank(reader.floats(n_classes).astype(np.int64),
                                       reader.floats(n_classes, dim), reader.floats(n_classes, dim))
        codec = Codec(extractor, codebook, decoder, tuple(names), predictor=predictor, bank=bank)
    except ValueError as e:
        raise CheckpointError(f"inconsistent checkpoint: {e}") from e

    if reader.pos != len(data):
        raise CheckpointError(f"{len(data) - reader.pos} trailing bytes in checkpoint")
    return codec


def write_checkpoint(codec: Codec, path: PathLike):
    with open(path, "wb") as fh:
        fh.write(codec_to_bytes(codec))
    logger.info(f"Wrote codec checkpoint {path} (K_q={codec.k_q})")


def read_checkpoint(path: PathLike) -> Codec:
    if not os.path.exists(path):
        raise CheckpointError(f"checkpoint not found: {path}")
    with open(path, "rb") as fh:
        data = fh.read()
    return codec_from_bytes(data)


__all__ = (
    'CHECKPOINT_MAGIC', 'CHECKPOINT_VERSION', 'codec_to_bytes', 'codec_from_bytes', 'write_checkpoint',
    'read_checkpoint',
)
