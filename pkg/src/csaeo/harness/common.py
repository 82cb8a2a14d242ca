"""Shared plumbing for the command handlers: dataset, artifact guard, CSV and summaries"""
import csv
import json
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple

from csaeo.models.config import AppConfig
from csaeo.semantic.data import LabeledDataset, generate_synthetic, read_dataset_dir
from csaeo.utils.encoder import ReportEncoder, format_csv_value
from csaeo.utils.errors import ArtifactExistsError
from csaeo.utils.i18n import t
from csaeo.utils.logger import logger


def output_dir(cfg: AppConfig) -> Path:
    return Path(cfg.harness.output_dir)


def checkpoint_path(cfg: AppConfig, k_q: int) -> Path:
    return output_dir(cfg) / f"codec-kq{k_q}.dtjc"


def summary_name(command: str) -> str:
    return f"{command}-summary.json"


def prepare_artifacts(cfg: AppConfig, names: Sequence[str]) -> List[Path]:
    """Resolve artifact paths, refusing to clobber existing files unless overwrite is set"""
    out = output_dir(cfg)
    paths = [out / name for name in names]
    if not cfg.harness.overwrite:
        for path in paths:
            if path.exists():
                raise ArtifactExistsError(path)
    out.mkdir(parents=True, exist_ok=True)
    return paths


def load_dataset(cfg: AppConfig) -> LabeledDataset:
    data = cfg.data
    logger.info(t("loading_dataset", source=data.source))
    if data.source == "directory":
        dataset = read_dataset_dir(data.directory)
    else:
        dataset = generate_synthetic(data.n_classes, data.n_per_class, data.height, data.width, data.bands,
                                     data.noise_level, cfg.harness.seed, label_noise=data.label_noise)
    logger.info(t("dataset_ready", count=len(dataset), shape="x".join(map(str, dataset.image_shape)),
                  classes=dataset.n_classes))
    return dataset


def split_dataset(cfg: AppConfig, dataset: LabeledDataset) -> Tuple[LabeledDataset, LabeledDataset]:
    return dataset.split(cfg.data.test_fraction, cfg.harness.seed)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_csv_value(v) for v in row])
    logger.info(t("wrote_artifact", path=path))


def write_text(path: Path, text: str):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    logger.info(t("wrote_artifact", path=path))


def write_summary(path: Path, payload: dict):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, cls=ReportEncoder, sort_keys=True, indent=2)
        fh.write("\n")
    logger.info(t("wrote_artifact", path=path))


__all__ = (
    'output_dir', 'checkpoint_path', 'summary_name', 'prepare_artifacts', 'load_dataset', 'split_dataset',
    'write_csv', 'write_text', 'write_summary',
)
