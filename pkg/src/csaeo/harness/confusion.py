"""confusion: row-normalized confusion matrix at the scenario's link operating point"""
from csaeo.harness.common import (
    checkpoint_path, load_dataset, prepare_artifacts, split_dataset, summary_name, write_summary, write_text,
)
from csaeo.link.modem import build_constellation
from csaeo.models.config import AppConfig
from csaeo.semantic.checkpoint import read_checkpoint
from csaeo.sim.pipeline import build_link, evaluate_link
from csaeo.utils.errors import CheckpointError
from csaeo.utils.i18n import t
from csaeo.utils.logger import logger
from csaeo.utils.rng import derive_rng


def confusion_handler(cfg: AppConfig) -> dict:
    sc = cfg.scenario
    psnr = "inf" if sc.psnr_db is None else f"{sc.psnr_db:g}"
    point = f"{sc.downlink.kind}-{sc.constellation}-p{psnr}-k{sc.k_q}"
    csv_path, summary_path = prepare_artifacts(cfg, [f"confusion-{point}.csv", summary_name("confusion")])

    path = checkpoint_path(cfg, sc.k_q)
    if not path.exists():
        raise CheckpointError(t("checkpoint_missing", k_q=sc.k_q, path=path))
    codec = read_checkpoint(path)
    _, test_set = split_dataset(cfg, load_dataset(cfg))

    c = build_constellation(sc.constellation, sc.apsk_gamma)
    link = build_link(sc.downlink, cfg, c, sc.psnr_db)
    result = evaluate_link(codec, test_set, c, link, derive_rng(cfg.harness.seed, "confusion"))
    matrix = result.confusion()
    write_text(csv_path, matrix.to_csv())
    logger.info(t("confusion_accuracy", accuracy=100 * matrix.accuracy(), point=point))

    summary = {
        "command": "confusion",
        "seed": cfg.harness.seed,
        "point": point,
        "evaluation": result,
        "confusion": matrix,
        "per_class_accuracy": dict(zip(matrix.class_names, matrix.per_class_accuracy())),
    }
    write_summary(summary_path, summary)
    return summary


__all__ = ('confusion_handler', )
