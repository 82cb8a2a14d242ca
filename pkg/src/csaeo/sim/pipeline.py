"""Sat1 -> Sat2 -> UT episodes, single-link evaluation and the CSA / non-CSA comparison"""
import csv
import io
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from csaeo.link.channel import ChannelKind, FadingModel, noise_sigma_from_psnr, realize_channel, sample_fading
from csaeo.link.geometry import GeometryParams, doppler_shift_hz, propagation_delay_s, slant_range_km
from csaeo.link.linkbudget import PathLossBreakdown, ground_path_loss, isl_path_loss, large_scale_gain_db
from csaeo.link.modem import Constellation, build_constellation, fading_average_ser
from csaeo.models.config import AppConfig, ChannelConfig
from csaeo.semantic.data import LabeledDataset
from csaeo.semantic.dtjscc import Codec, SemanticMessage, TrainingTrace, decode, encode, train, transmit
from csaeo.semantic.semaug import sa_train_step
from csaeo.sim.metrics import ConfusionMatrix, confusion, index_error_rate, top1
from csaeo.utils.encoder import CSV_SCHEMA_VERSION, format_csv_value
from csaeo.utils.errors import ShapeMismatchError
from csaeo.utils.logger import logger
from csaeo.utils.rng import derive_rng

PathLike = Union[str, os.PathLike]
Frame = Tuple[np.ndarray, np.ndarray]

_EVAL_CHUNK = 256
_FLIP_RATE_DRAWS = 4096


@dataclass(frozen=True)
class LinkSetup:
    """A configured link: fading kind with its large-scale terms, and the noise level"""
    name: str
    kind: ChannelKind
    noise_sigma: float
    distance_km: float
    loss: PathLossBreakdown
    symbol_period_s: float = 1e-6
    baseband_frequency_hz: float = 0.0
    equalize: str = "perfect"

    def as_dict(self):
        return {
            "name": self.name,
            "kind": self.kind,
            "noise_sigma": self.noise_sigma,
            "distance_km": self.distance_km,
            "loss": self.loss,
            "equalize": self.equalize,
        }


def build_link(channel: ChannelConfig, cfg: AppConfig, constellation: Constellation, psnr_db: Optional[float],
               isl: bool = False) -> LinkSetup:
    """Geometry and link budget -> zeta, Doppler and delay; PSNR -> noise std"""
    geo, budget = cfg.geometry, cfg.linkbudget
    if isl:
        distance_km = geo.isl_distance_km
        loss = isl_path_loss(distance_km * 1e3, budget)
        radial_velocity = geo.isl_radial_velocity_mps
        shadow_sigma = 0.0
    else:
        params = GeometryParams.from_degrees(geo.altitude_km, geo.elevation_deg, geo.radial_velocity_mps)
        distance_km = slant_range_km(params, cfg.scenario.slant_range_mode)
        loss = ground_path_loss(distance_km * 1e3, budget)
        radial_velocity = geo.radial_velocity_mps
        shadow_sigma = budget.shadow_sigma_db

    kind = ChannelKind(
        model=FadingModel(channel.kind),
        k_factor=channel.k_factor,
        zeta_db=large_scale_gain_db(loss.total_db, budget.tx_gain_dbi),
        shadow_sigma_db=shadow_sigma,
        doppler_hz=doppler_shift_hz(budget.carrier_ghz * 1e9, radial_velocity),
        delay_s=propagation_delay_s(distance_km),
        los_phase_rad=math.radians(channel.los_phase_deg),
    )
    return LinkSetup(
        name="isl" if isl else "downlink",
        kind=kind,
        noise_sigma=noise_sigma_from_psnr(psnr_db, constellation.peak_power),
        distance_km=distance_km,
        loss=loss,
        symbol_period_s=channel.symbol_period_s,
        baseband_frequency_hz=channel.baseband_frequency_hz,
        equalize=channel.equalize,
    )


def send(msg: SemanticMessage, link: LinkSetup, c: Constellation, rng: np.random.Generator) -> SemanticMessage:
    """One fading block per image across its symbols"""
    inst = realize_channel(link.kind, msg.batch_size, msg.symbols_per_image, link.noise_sigma, rng,
                           link.symbol_period_s, link.baseband_frequency_hz)
    return transmit(msg, c, inst, rng, link.equalize)


def channel_flip_prob(c: Constellation, psnr_db: Optional[float], kind: ChannelKind,
                      rng: np.random.Generator, draws: int = _FLIP_RATE_DRAWS) -> float:
    """Symbol error rate to emulate the link during training, averaged over fading"""
    if psnr_db is None:
        return 0.0
    esn0_db = psnr_db + 10 * math.log10(c.average_energy / c.peak_power)
    gains = sample_fading(kind, 1.0, rng, size=draws)
    return fading_average_ser(c, esn0_db, gains)


def train_codec(cfg: AppConfig, train_set: LabeledDataset, k_q: int, seed: int) -> Tuple[Codec, TrainingTrace]:
    rng = derive_rng(seed, "codec", k_q)
    codec = Codec.create(train_set, k_q, cfg.dtjscc, rng)
    flip_prob = 0.0
    if cfg.dtjscc.train_psnr_db is not None:
        c = build_constellation(cfg.scenario.constellation, cfg.scenario.apsk_gamma)
        kind = build_link(cfg.scenario.downlink, cfg, c, cfg.dtjscc.train_psnr_db).kind
        flip_prob = channel_flip_prob(c, cfg.dtjscc.train_psnr_db, kind, derive_rng(seed, "flip-rate", k_q))
        logger.debug(f"Channel-in-the-loop training with symbol flip rate {flip_prob:.4f}")
    trace = train(train_set, codec, cfg.dtjscc, rng, flip_prob=flip_prob, semaug_cfg=cfg.semaug)
    return codec, trace


@dataclass(eq=False)
class NodeModels:
    sat1: Codec
    sat2: Codec
    ut: Codec

    @classmethod
    def from_codec(cls, codec: Codec) -> "NodeModels":
        """Three independent copies of one trained codec, optimizer state cleared"""
        nodes = []
        for _ in range(3):
            node = codec.copy()
            node.reset_optimizer()
            nodes.append(node)
        return cls(*nodes)

    def check(self):
        reference = self.sat1
        for node in (self.sat2, self.ut):
            if (node.k_q, node.input_shape, node.n_classes, node.codebook.n_sub) != \
                    (reference.k_q, reference.input_shape, reference.n_classes, reference.codebook.n_sub):
                raise ShapeMismatchError("Sat1, Sat2 and UT codecs have different dimensions")


@dataclass(eq=False)
class EpisodeStep:
    step: int
    labels: np.ndarray
    sat2_predictions: np.ndarray
    ut_predictions: np.ndarray
    isl_index_error_rate: float
    direct_index_error_rate: float
    relay_index_error_rate: float
    sat2_sa_loss: Optional[float] = None
    ut_sa_loss: Optional[float] = None

    def as_dict(self):
        return {
            "step": self.step,
            "ut_top1": top1(self.ut_predictions, self.labels),
            "sat2_top1": top1(self.sat2_predictions, self.labels),
            "isl_index_error_rate": self.isl_index_error_rate,
            "direct_index_error_rate": self.direct_index_error_rate,
            "relay_index_error_rate": self.relay_index_error_rate,
            "sat2_sa_loss": self.sat2_sa_loss,
            "ut_sa_loss": self.ut_sa_loss,
        }


@dataclass(eq=False)
class EpisodeReport:
    steps: List[EpisodeStep] = field(default_factory=list)
    class_names: Tuple[str, ...] = ()

    CSV_COLUMNS = (
        "schema_version", "step", "image", "label", "sat2_prediction", "ut_prediction",
        "isl_index_error_rate", "direct_index_error_rate", "relay_index_error_rate",
    )

    def __len__(self) -> int:
        return len(self.steps)

    def _concat(self, attr: str) -> np.ndarray:
        if not self.steps:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate([getattr(step, attr) for step in self.steps])

    @property
    def labels(self) -> np.ndarray:
        return self._concat("labels")

    @property
    def ut_predictions(self) -> np.ndarray:
        return self._concat("ut_predictions")

    @property
    def sat2_predictions(self) -> np.ndarray:
        return self._concat("sat2_predictions")

    @property
    def ut_top1(self) -> Optional[float]:
        return top1(self.ut_predictions, self.labels) if self.steps else None

    @property
    def sat2_top1(self) -> Optional[float]:
        return top1(self.sat2_predictions, self.labels) if self.steps else None

    def to_csv(self, path: Optional[PathLike] = None) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(self.CSV_COLUMNS)
        for step in self.steps:
            for image, (label, sat2, ut) in enumerate(zip(step.labels, step.sat2_predictions,
                                                          step.ut_predictions)):
                writer.writerow([format_csv_value(v) for v in (
                    CSV_SCHEMA_VERSION, step.step, image, label, sat2, ut, step.isl_index_error_rate,
                    step.direct_index_error_rate, step.relay_index_error_rate,
                )])
        text = buffer.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    def summary(self) -> str:
        if not self.steps:
            return "episode: 0 steps"

        def mean(attr):
            return float(np.mean([getattr(step, attr) for step in self.steps]))

        return "\n".join([
            f"episode: {len(self.steps)} steps, {self.labels.size} images",
            f"UT top1: {self.ut_top1:.4f}",
            f"Sat2 top1: {self.sat2_top1:.4f}",
            f"ISL index error rate: {mean('isl_index_error_rate'):.4f}",
            f"downlink index error rate: {mean('relay_index_error_rate'):.4f}",
        ])

    def as_dict(self):
        return {
            "n_steps": len(self.steps),
            "ut_top1": self.ut_top1,
            "sat2_top1": self.sat2_top1,
            "steps": self.steps,
        }


def frames_from_dataset(dataset: LabeledDataset, batch_size: int, n_frames: int, seed: int) -> List[Frame]:
    """Consecutive batches of a seeded permutation, wrapping around when the data runs out"""
    if len(dataset) == 0:
        raise ValueError("cannot draw frames from an empty dataset")
    order = derive_rng(seed, "frames").permutation(len(dataset))
    frames = []
    for k in range(n_frames):
        idx = order[np.arange(k * batch_size, (k + 1) * batch_size) % len(dataset)]
        frames.append((dataset.images[idx], dataset.labels[idx]))
    return frames


def run_episode(cfg: AppConfig, models: NodeModels, frames: Sequence[Frame], seed: int) -> EpisodeReport:
    """Streaming loop over t_0..t_n

    Step i: Sat1 encodes frame i and sends it to Sat2 (ISL) and to the UT (downlink).
    With CSA on, Sat2 and the UT each take one SA step on what they received, with
    the labels of frame i. Sat2 then encodes frame i+1, predicts locally and relays
    its message to the UT, which decodes it.
    """
    sc = cfg.scenario
    n = sc.n_timesteps
    report = EpisodeReport(class_names=models.sat1.class_names)
    if n == 0:
        return report
    if len(frames) < n + 1:
        raise ValueError(f"{n} timesteps need {n + 1} frames, got {len(frames)}")
    models.check()

    c = build_constellation(sc.constellation, sc.apsk_gamma)
    isl_psnr = sc.psnr_db if sc.isl_psnr_db is None else sc.isl_psnr_db
    isl = build_link(sc.isl, cfg, c, isl_psnr, isl=True)
    downlink = build_link(sc.downlink, cfg, c, sc.psnr_db)

    for i in range(n):
        rng = derive_rng(seed, "episode", i)
        x1, y1 = frames[i]
        x2, y2 = frames[i + 1]

        msg1 = encode(x1, models.sat1)
        at_sat2 = send(msg1, isl, c, rng)
        at_ut = send(msg1, downlink, c, rng)
        msg2 = encode(x2, models.sat2)

        sat2_loss = ut_loss = None
        if sc.csa_enabled:
            # Sat2 adapts only its own decoder; msg2 does not change, the gain shows in sat2_top1
            sat2_loss = sa_train_step(models.sat2, y1, cfg.semaug.lambda_sa, sc.online_lr, rng, cfg.semaug,
                                      cfg.dtjscc, features=models.sat2.codebook.dequantize(at_sat2.indices)).loss
            ut_loss = sa_train_step(models.ut, y1, cfg.semaug.lambda_sa, sc.online_lr, rng, cfg.semaug,
                                    cfg.dtjscc, features=models.ut.codebook.dequantize(at_ut.indices)).loss

        sat2_predictions = np.argmax(decode(msg2, models.sat2), axis=1)
        relayed = send(msg2, downlink, c, rng)
        ut_predictions = np.argmax(decode(relayed, models.ut), axis=1)

        step = EpisodeStep(
            step=i,
            labels=np.asarray(y2, dtype=np.int64),
            sat2_predictions=sat2_predictions,
            ut_predictions=ut_predictions,
            isl_index_error_rate=index_error_rate(msg1.indices, at_sat2.indices),
            direct_index_error_rate=index_error_rate(msg1.indices, at_ut.indices),
            relay_index_error_rate=index_error_rate(msg2.indices, relayed.indices),
            sat2_sa_loss=sat2_loss,
            ut_sa_loss=ut_loss,
        )
        report.steps.append(step)
        logger.debug(f"Step {i}: Sat2 top1={top1(sat2_predictions, y2):.4f}, "
                     f"UT top1={top1(ut_predictions, y2):.4f}, relay IER={step.relay_index_error_rate:.4f}")
    return report


@dataclass(eq=False)
class LinkEvaluation:
    predictions: np.ndarray
    labels: np.ndarray
    index_error_rate: float
    class_names: Tuple[str, ...]

    @property
    def top1(self) -> float:
        return top1(self.predictions, self.labels)

    def confusion(self) -> ConfusionMatrix:
        return confusion(self.predictions, self.labels, len(self.class_names), self.class_names)

    def as_dict(self):
        return {"top1": self.top1, "index_error_rate": self.index_error_rate, "n_images": int(self.labels.size)}


def evaluate_link(codec: Codec, dataset: LabeledDataset, c: Constellation, link: LinkSetup,
                  rng: np.random.Generator) -> LinkEvaluation:
    """Encode every image, send it over one link and decode at the far end"""
    if len(dataset) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    predictions, errors, total = [], 0, 0
    for start in range(0, len(dataset), _EVAL_CHUNK):
        msg = encode(dataset.images[start:start + _EVAL_CHUNK], codec)
        received = send(msg, link, c, rng)
        predictions.append(np.argmax(decode(received, codec), axis=1))
        errors += int(np.sum(msg.indices != received.indices))
        total += msg.indices.size
    return LinkEvaluation(np.concatenate(predictions), dataset.labels.copy(), errors / total, codec.class_names)


def with_scenario(cfg: AppConfig, **update) -> AppConfig:
    return cfg.model_copy(update={"scenario": cfg.scenario.model_copy(update=update)})


def _mode_labels(modes: Sequence[bool]) -> List[str]:
    labels: List[str] = []
    for mode in modes:
        label = "csa" if mode else "non_csa"
        while label in labels:
            label += "_control"
        labels.append(label)
    return labels


@dataclass(eq=False)
class CsaComparison:
    """Per-class UT Top-1 (fractions) for each mode, one row per seed"""
    class_names: Tuple[str, ...]
    mode_labels: List[str]
    per_seed: Dict[str, np.ndarray]
    psnr_db: Optional[float] = None
    # First-seed episode per mode
    reports: Dict[str, EpisodeReport] = field(default_factory=dict)

    def class_means(self, label: str) -> np.ndarray:
        """Per-class accuracy in percent averaged over seeds"""
        return 100.0 * np.nanmean(self.per_seed[label], axis=0)

    def mean(self, label: str) -> float:
        return float(np.nanmean(self.class_means(label)))

    def difference(self) -> np.ndarray:
        first, second = self.mode_labels[:2]
        return self.class_means(first) - self.class_means(second)

    def rows(self) -> List[list]:
        paired = len(self.mode_labels) == 2
        columns = [self.class_means(label) for label in self.mode_labels]
        rows = []
        for k, name in enumerate(self.class_names):
            row = [name] + [round(float(col[k]), 2) for col in columns]
            if paired:
                row.append(round(float(columns[0][k] - columns[1][k]), 2))
            rows.append(row)
        mean_row = ["Mean"] + [round(self.mean(label), 2) for label in self.mode_labels]
        if paired:
            mean_row.append(round(self.mean(self.mode_labels[0]) - self.mean(self.mode_labels[1]), 2))
        rows.append(mean_row)
        return rows

    def header(self) -> List[str]:
        header = ["schema_version", "class"] + list(self.mode_labels)
        if len(self.mode_labels) == 2:
            header.append("difference")
        return header

    def to_csv(self, path: Optional[PathLike] = None) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(self.header())
        for row in self.rows():
            writer.writerow([CSV_SCHEMA_VERSION, row[0]] + [f"{v:.2f}" for v in row[1:]])
        text = buffer.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    def as_dict(self):
        return {
            "psnr_db": self.psnr_db,
            "modes": self.mode_labels,
            "mean": {label: self.mean(label) for label in self.mode_labels},
            "n_seeds": int(next(iter(self.per_seed.values())).shape[0]),
        }


def compare_csa(cfg: AppConfig, dataset: LabeledDataset, n_seeds: int, modes: Sequence[bool] = (True, False),
                psnr_db: Optional[float] = None) -> CsaComparison:
    """Train once per seed, then run the same episode under each mode

    psnr_db overrides the scenario PSNR when given.
    """
    if n_seeds < 1:
        raise ValueError(f"n_seeds must be >= 1, got {n_seeds}")
    if not modes:
        raise ValueError("at least one mode is required")
    if psnr_db is not None:
        cfg = with_scenario(cfg, psnr_db=psnr_db)
    sc = cfg.scenario
    labels = _mode_labels(modes)
    per_seed: Dict[str, List[np.ndarray]] = {label: [] for label in labels}
    reports: Dict[str, EpisodeReport] = {}

    for s in range(n_seeds):
        seed = cfg.harness.seed + s
        train_set, test_set = dataset.split(cfg.data.test_fraction, seed)
        codec, _ = train_codec(cfg, train_set, sc.k_q, seed)
        frames = frames_from_dataset(test_set, sc.batch_size, sc.n_timesteps + 1, seed)
        for label, mode in zip(labels, modes):
            report = run_episode(with_scenario(cfg, csa_enabled=mode), NodeModels.from_codec(codec), frames, seed)
            matrix = confusion(report.ut_predictions, report.labels, dataset.n_classes, dataset.class_names)
            per_seed[label].append(matrix.per_class_accuracy())
            if s == 0:
                reports[label] = report
            logger.info(f"Seed {seed} {label}: UT top1={report.ut_top1}")

    return CsaComparison(
        class_names=dataset.class_names,
        mode_labels=labels,
        per_seed={label: np.vstack(rows) for label, rows in per_seed.items()},
        psnr_db=sc.psnr_db,
        reports=reports,
    )


__all__ = (
    'LinkSetup', 'build_link', 'send', 'channel_flip_prob', 'train_codec', 'NodeModels', 'EpisodeStep',
    'EpisodeReport', 'frames_from_dataset', 'run_episode', 'LinkEvaluation', 'evaluate_link', 'with_scenario',
    'CsaComparison', 'compare_csa',
)
