"""Multispectral images, the synthetic EO dataset and the MSIM raw tensor format"""
import math
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Sequence, Tuple, Union

import numpy as np

from csaeo.utils.errors import (
    BadMagicError, DimensionOverflowError, MsimFormatError, ShapeMismatchError, TruncatedPayloadError,
)
from csaeo.utils.logger import logger
from csaeo.utils.rng import derive_rng

EUROSAT_CLASSES = (
    "AnnualCrop", "Forest", "HerbaceousVegetation", "Highway", "Industrial",
    "Pasture", "PermanentCrop", "Residential", "River", "SeaLake",
)

MSIM_MAGIC = b"MSIM"
_MSIM_HEADER = struct.Struct("<4sIII")
MSIM_MAX_ELEMENTS = 1 << 28

# Distance between neighbouring class signatures in band space
SIGNATURE_SPACING = 0.25

PathLike = Union[str, os.PathLike]


@dataclass(frozen=True, eq=False)
class MultispectralImage:
    """H x W x D tensor, row-major with the band index fastest"""
    values: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float32)
        if values.ndim != 3 or min(values.shape) < 1:
            raise ValueError(f"expected a nonempty H x W x D tensor, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("image values must be finite")
        object.__setattr__(self, "values", values)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def bands(self) -> int:
        return self.values.shape[2]

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.values.shape


@dataclass(eq=False)
class LabeledDataset:
    images: np.ndarray
    labels: np.ndarray
    class_names: Tuple[str, ...]
    # Band means of the noiseless class images, when known
    centers: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.class_names = tuple(self.class_names)
        if self.images.ndim != 4:
            raise ShapeMismatchError(f"expected N x H x W x D images, got shape {self.images.shape}")
        if self.labels.shape != (self.images.shape[0],):
            raise ShapeMismatchError("one label per image is required")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= len(self.class_names)):
            raise ValueError("class ids must lie in 0..C-1")

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def __getitem__(self, i: int) -> Tuple[MultispectralImage, int]:
        return MultispectralImage(self.images[i]), int(self.labels[i])

    def __iter__(self) -> Iterator[Tuple[MultispectralImage, int]]:
        for i in range(len(self)):
            yield self[i]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def image_shape(self) -> Tuple[int, int, int]:
        return tuple(self.images.shape[1:])

    def subset(self, indices) -> "LabeledDataset":
        indices = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(self.images[indices], self.labels[indices], self.class_names, self.centers)

    def shuffled(self, seed: int) -> "LabeledDataset":
        return self.subset(derive_rng(seed, "shuffle").permutation(len(self)))

    def split(self, test_fraction: float, seed: int) -> Tuple["LabeledDataset", "LabeledDataset"]:
        """Stratified train/test split, seeded"""
        if not 0 < test_fraction < 1:
            raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
        rng = derive_rng(seed, "split")
        train_idx, test_idx = [], []
        for k in range(self.n_classes):
            members = rng.permutation(np.flatnonzero(self.labels == k))
            n_test = int(math.ceil(test_fraction * members.size)) if members.size > 1 else 0
            test_idx.append(members[:n_test])
            train_idx.append(members[n_test:])
        train_idx = np.sort(np.concatenate(train_idx))
        test_idx = np.sort(np.concatenate(test_idx))
        return self.subset(train_idx), self.subset(test_idx)


def class_names_for(c_classes: int) -> Tuple[str, ...]:
    if c_classes <= len(EUROSAT_CLASSES):
        return EUROSAT_CLASSES[:c_classes]
    return tuple(f"class_{k:02d}" for k in range(c_classes))


def spectral_signatures(c_classes: int, bands: int, seed: int) -> np.ndarray:
    """One reflectance vector per class, equally spaced in band space

    With C <= D + 1 the signatures are the vertices of a regular simplex, so all
    pairwise distances are equal. With more classes they sit evenly on a circle in
    a plane orthogonal to the all-ones direction, so neighbours are equidistant.
    """
    rng = derive_rng(seed, "signature")
    if bands == 1:
        offsets = (np.arange(c_classes) - (c_classes - 1) / 2) * SIGNATURE_SPACING
        return 0.5 + offsets[:, None]

    if c_classes <= bands + 1:
        centred = np.eye(c_classes) - 1.0 / c_classes
        # Orthonormal coordinates of the simplex in its own (C-1)-dim span
        u, s, _ = np.linalg.svd(centred)
        coords = u[:, :c_classes - 1] * s[:c_classes - 1]
        coords *= SIGNATURE_SPACING / math.sqrt(2)
        embed = np.zeros((c_classes, bands))
        embed[:, :c_classes - 1] = coords
        rotation, _ = np.linalg.qr(rng.standard_normal((bands, bands)))
        return 0.5 + embed @ rotation.T

    if bands == 2:
        plane = np.eye(2)
    else:
        ones = np.ones((bands, 1)) / math.sqrt(bands)
        basis, _ = np.linalg.qr(np.hstack([ones, rng.standard_normal((bands, 2))]))
        plane = basis[:, 1:3].T
    radius = SIGNATURE_SPACING / (2 * math.sin(math.pi / c_classes))
    phase = rng.uniform(0, 2 * math.pi)
    angles = phase + 2 * math.pi * np.arange(c_classes) / c_classes
    return 0.5 + radius * (np.cos(angles)[:, None] * plane[0] + np.sin(angles)[:, None] * plane[1])


def class_textures(c_classes: int, h: int, w: int, seed: int) -> np.ndarray:
    """Low-frequency spatial pattern per class, shape C x H x W"""
    rng = derive_rng(seed, "texture")
    rows = np.arange(h)[:, None] / h
    cols = np.arange(w)[None, :] / w
    textures = np.empty((c_classes, h, w))
    for k in range(c_classes):
        fy, fx = rng.integers(1, 4, size=2)
        psi = rng.uniform(0, 2 * math.pi)
        amplitude = 0.05 * (1 + k % 3)
        textures[k] = amplitude * np.sin(2 * math.pi * fy * rows + psi) * np.cos(2 * math.pi * fx * cols)
    return textures


def generate_synthetic(c_classes: int, n_per_class: int, h: int, w: int, d: int, noise_level: float,
                       seed: int, label_noise: float = 0.0) -> LabeledDataset:
    if c_classes < 2:
        raise ValueError(f"c_classes must be >= 2, got {c_classes}")
    if n_per_class < 1:
        raise ValueError(f"n_per_class must be >= 1, got {n_per_class}")
    if min(h, w, d) < 1:
        raise ValueError(f"image dimensions must be >= 1, got {h}x{w}x{d}")
    if noise_level < 0:
        raise ValueError(f"noise_level must be >= 0, got {noise_level}")
    if not 0 <= label_noise < 1:
        raise ValueError(f"label_noise must lie in [0, 1), got {label_noise}")

    signatures = spectral_signatures(c_classes, d, seed)
    textures = class_textures(c_classes, h, w, seed)
    clean = signatures[:, None, None, :] + textures[..., None]

    # Noise is drawn even at noise_level = 0 so that one seed gives the same
    # perturbation direction for every noise level
    pixel_rng = derive_rng(seed, "pixels")
    images = np.empty((c_classes * n_per_class, h, w, d), dtype=np.float32)
    for k in range(c_classes):
        z = pixel_rng.standard_normal((n_per_class, h, w, d))
        images[k * n_per_class:(k + 1) * n_per_class] = clean[k] + noise_level * z
    labels = np.repeat(np.arange(c_classes), n_per_class)

    if label_noise > 0:
        label_rng = derive_rng(seed, "label-noise")
        flip = label_rng.random(labels.size) < label_noise
        shift = label_rng.integers(1, c_classes, size=labels.size)
        labels = np.where(flip, (labels + shift) % c_classes, labels)

    centers = clean.astype(np.float32).mean(axis=(1, 2), dtype=np.float64)
    logger.debug(f"Generated {labels.size} synthetic images of {h}x{w}x{d}, noise={noise_level}")
    return LabeledDataset(images, labels, class_names_for(c_classes), centers)


def band_means(images: np.ndarray) -> np.ndarray:
    return np.asarray(images, dtype=np.float64).mean(axis=(1, 2))


def nearest_mean_predict(images: np.ndarray, centers: np.ndarray) -> np.ndarray:
    means = band_means(images)
    d2 = ((means[:, None, :] - np.asarray(centers)[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


def nearest_mean_oracle(dataset: LabeledDataset, reference: Optional[LabeledDataset] = None) -> float:
    """Accuracy of a nearest-class-mean classifier on band means

    Class centres come from the generator's noiseless signatures when known,
    otherwise from the band means of `reference` (default: the dataset itself).
    """
    centers = dataset.centers
    if centers is None:
        source = reference if reference is not None else dataset
        means = band_means(source.images)
        centers = np.stack([means[source.labels == k].mean(axis=0) for k in range(source.n_classes)])
    predictions = nearest_mean_predict(dataset.images, centers)
    return float(np.mean(predictions == dataset.labels))


def write_raw_tensor(image: MultispectralImage, path: PathLike):
    h, w, d = image.shape
    payload = image.values.astype("<f4", copy=False).tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(_MSIM_HEADER.pack(MSIM_MAGIC, h, w, d))
        fh.write(payload)


def load_raw_tensor(path: PathLike) -> MultispectralImage:
    with open(path, "rb") as fh:
        data = fh.read()

    if len(data) < len(MSIM_MAGIC) or data[:len(MSIM_MAGIC)] != MSIM_MAGIC:
        raise BadMagicError(f"{path}: not an MSIM file (magic {data[:4]!r})")
    if len(data) < _MSIM_HEADER.size:
        raise TruncatedPayloadError(f"{path}: header truncated at {len(data)} bytes")

    _, h, w, d = _MSIM_HEADER.unpack_from(data)
    n = h * w * d
    if min(h, w, d) == 0 or n > MSIM_MAX_ELEMENTS:
        raise DimensionOverflowError(f"{path}: unsupported dimensions {h}x{w}x{d}")

    available = len(data) - _MSIM_HEADER.size
    if available < 4 * n:
        raise TruncatedPayloadError(f"{path}: expected {4 * n} payload bytes, found {available}")
    if available > 4 * n:
        raise MsimFormatError(f"{path}: {available - 4 * n} trailing bytes after payload")

    values = np.frombuffer(data, dtype="<f4", count=n, offset=_MSIM_HEADER.size).reshape(h, w, d)
    try:
        return MultispectralImage(values.astype(np.float32))
    except ValueError as e:
        raise MsimFormatError(f"{path}: {e}") from e


def write_dataset_dir(dataset: LabeledDataset, root: PathLike):
    root = Path(root)
    for k, name in enumerate(dataset.class_names):
        (root / name).mkdir(parents=True, exist_ok=True)
    for i, (image, label) in enumerate(dataset):
        write_raw_tensor(image, root / dataset.class_names[label] / f"{i:05d}.msim")
    logger.info(f"Wrote {len(dataset)} images under {root}")


def read_dataset_dir(root: PathLike, class_names: Optional[Sequence[str]] = None) -> LabeledDataset:
    """Load <root>/<class_name>/<id>.msim; class order follows EuroSAT when it can"""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {root}")
    if class_names is None:
        found = sorted(p.name for p in root.iterdir() if p.is_dir())
        known = [c for c in EUROSAT_CLASSES if c in found]
        class_names = known + [c for c in found if c not in known]
    if not class_names:
        raise ValueError(f"no class directories under {root}")

    images, labels = [], []
    for k, name in enumerate(class_names):
        for path in sorted((root / name).glob("*.msim")):
            images.append(load_raw_tensor(path).values)
            labels.append(k)
    if not images:
        raise ValueError(f"no .msim files under {root}")
    shapes = {img.shape for img in images}
    if len(shapes) != 1:
        raise ShapeMismatchError(f"images under {root} have differing shapes: {sorted(shapes)}")
    logger.info(f"Loaded {len(images)} images in {len(class_names)} classes from {root}")
    return LabeledDataset(np.stack(images), np.asarray(labels), tuple(class_names))


__all__ = (
    'EUROSAT_CLASSES', 'MSIM_MAGIC', 'MultispectralImage', 'LabeledDataset', 'class_names_for',
    'spectral_signatures', 'class_textures', 'generate_synthetic', 'band_means', 'nearest_mean_predict',
    'nearest_mean_oracle', 'write_raw_tensor', 'load_raw_tensor', 'write_dataset_dir', 'read_dataset_dir',
)
