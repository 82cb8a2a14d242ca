"""sweep: Top-1 and index error rate over channel x constellation x PSNR x K_q x seed

Each point is one Sat1 -> ground downlink scored with evaluate_link, not the relayed
UT accuracy of a full episode; compare-csa reports that one.
"""
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from csaeo.harness.common import (
    checkpoint_path, load_dataset, prepare_artifacts, split_dataset, summary_name, write_csv, write_summary,
    write_text,
)
from csaeo.link.modem import build_constellation
from csaeo.models.config import AppConfig
from csaeo.semantic.checkpoint import read_checkpoint
from csaeo.semantic.data import LabeledDataset
from csaeo.semantic.dtjscc import Codec
from csaeo.sim.pipeline import build_link, evaluate_link
from csaeo.utils.encoder import CSV_SCHEMA_VERSION, format_csv_value
from csaeo.utils.errors import CheckpointError
from csaeo.utils.i18n import t
from csaeo.utils.logger import logger
from csaeo.utils.rng import derive_rng

SWEEP_NAME = "sweep.csv"
AGGREGATE_NAME = "sweep_aggregate.dat"
SWEEP_COLUMNS = (
    "schema_version", "run_id", "channel", "constellation", "psnr_db", "k_q", "rician_k", "seed", "top1",
    "index_error_rate",
)


@dataclass(frozen=True, order=True)
class SweepPoint:
    channel: str
    constellation: str
    psnr_db: float
    k_q: int
    seed: int

    @property
    def run_id(self) -> str:
        return f"{self.channel}-{self.constellation}-p{self.psnr_db:g}-k{self.k_q}-s{self.seed}"


@dataclass
class _WorkerState:
    cfg: AppConfig
    test_set: LabeledDataset
    codecs: Dict[int, Codec]


_worker_state: Optional[_WorkerState] = None


def set_worker_state(cfg_json: str, checkpoints: Dict[int, str]):
    """Pool initializer: every worker rebuilds the test split and loads the codecs once"""
    global _worker_state
    cfg = AppConfig.model_validate_json(cfg_json)
    _, test_set = split_dataset(cfg, load_dataset(cfg))
    codecs = {k_q: read_checkpoint(path) for k_q, path in checkpoints.items()}
    _worker_state = _WorkerState(cfg=cfg, test_set=test_set, codecs=codecs)


def get_worker_state() -> Optional[_WorkerState]:
    return _worker_state


def sweep_points(cfg: AppConfig) -> List[SweepPoint]:
    sw = cfg.sweep
    return sorted(SweepPoint(channel, constellation, float(psnr), k_q, seed)
                  for channel, constellation, psnr, k_q, seed
                  in itertools.product(sw.channel_kinds, sw.constellations, sw.psnr_list, sw.kq_list, sw.seeds))


def evaluate_point(point: SweepPoint) -> Tuple:
    state = get_worker_state()
    cfg = state.cfg
    c = build_constellation(point.constellation, cfg.scenario.apsk_gamma)
    channel_cfg = cfg.scenario.downlink.model_copy(update={"kind": point.channel})
    link = build_link(channel_cfg, cfg, c, point.psnr_db, isl=point.channel == "los")
    rng = derive_rng(point.seed, "sweep", point.channel, point.constellation, repr(point.psnr_db), point.k_q)
    result = evaluate_link(state.codecs[point.k_q], state.test_set, c, link, rng)
    return (CSV_SCHEMA_VERSION, point.run_id, point.channel, point.constellation, point.psnr_db, point.k_q,
            link.kind.effective_k, point.seed, result.top1, result.index_error_rate)


def aggregate(rows: Sequence[Tuple]) -> List[Tuple]:
    """(channel, constellation, k_q, psnr_db, mean top1, std top1, n) per sweep point over seeds"""
    groups: Dict[Tuple, List[float]] = {}
    for row in rows:
        _, _, channel, constellation, psnr, k_q, _, _, top1, _ = row
        groups.setdefault((channel, constellation, k_q, psnr), []).append(top1)
    return [(*key, float(np.mean(values)), float(np.std(values)), len(values))
            for key, values in sorted(groups.items())]


def format_aggregate(entries: Sequence[Tuple]) -> str:
    """gnuplot data: one index block per (channel, constellation, K_q), PSNR along the block"""
    lines = ["# channel constellation k_q psnr_db mean_top1 std_top1 n"]
    previous = None
    for channel, constellation, k_q, psnr, mean, std, n in entries:
        block = (channel, constellation, k_q)
        if previous is not None and block != previous:
            lines += ["", ""]
        if block != previous:
            lines.append(f"# {channel} {constellation} k_q={k_q}")
        previous = block
        lines.append(" ".join(format_csv_value(v) for v in (channel, constellation, k_q, psnr, mean, std, n)))
    return "\n".join(lines) + "\n"


def sweep_handler(cfg: AppConfig) -> dict:
    sweep_path, aggregate_path, summary_path = prepare_artifacts(
        cfg, [SWEEP_NAME, AGGREGATE_NAME, summary_name("sweep")])

    checkpoints = {}
    for k_q in cfg.sweep.kq_list:
        path = checkpoint_path(cfg, k_q)
        if not path.exists():
            raise CheckpointError(t("checkpoint_missing", k_q=k_q, path=path))
        checkpoints[k_q] = str(path)

    points = sweep_points(cfg)
    jobs = cfg.harness.jobs
    logger.info(t("sweep_points", count=len(points), jobs=jobs))

    rows = []
    if jobs == 1:
        set_worker_state(cfg.model_dump_json(), checkpoints)
        for i, point in enumerate(points):
            rows.append(evaluate_point(point))
            logger.info(t("sweep_point_done", done=i + 1, total=len(points), run_id=point.run_id, top1=rows[-1][8]))
    else:
        with ProcessPoolExecutor(max_workers=jobs, initializer=set_worker_state,
                                 initargs=(cfg.model_dump_json(), checkpoints)) as pool:
            for i, row in enumerate(pool.map(evaluate_point, points)):
                rows.append(row)
                logger.info(t("sweep_point_done", done=i + 1, total=len(points), run_id=row[1], top1=row[8]))

    # Sorted by point so completion order never shows in the output
    rows.sort(key=lambda row: (row[2], row[3], row[4], row[5], row[7]))
    write_csv(sweep_path, SWEEP_COLUMNS, rows)
    entries = aggregate(rows)
    write_text(aggregate_path, format_aggregate(entries))

    summary = {
        "command": "sweep",
        "seed": cfg.harness.seed,
        "n_points": len(points),
        "aggregate": [dict(zip(("channel", "constellation", "k_q", "psnr_db", "mean_top1", "std_top1", "n"), e))
                      for e in entries],
    }
    write_summary(summary_path, summary)
    return summary


__all__ = ('SweepPoint', 'set_worker_state', 'get_worker_state', 'sweep_points', 'evaluate_point', 'aggregate',
           'format_aggregate', 'sweep_handler')
