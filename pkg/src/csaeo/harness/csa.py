"""compare-csa: per-class UT Top-1 with and without cognitive semantic augmentation"""
from csaeo.harness.common import (
    load_dataset, prepare_artifacts, summary_name, write_csv, write_summary, write_text,
)
from csaeo.models.config import AppConfig
from csaeo.sim.pipeline import compare_csa
from csaeo.utils.encoder import CSV_SCHEMA_VERSION
from csaeo.utils.i18n import t
from csaeo.utils.logger import logger

TABLE_NAME = "csa_table.csv"
CURVE_NAME = "csa_curve.csv"
CURVE_COLUMNS = ("schema_version", "psnr_db", "csa", "non_csa", "difference")


def compare_csa_handler(cfg: AppConfig) -> dict:
    """Table at the scenario PSNR, the accuracy-vs-PSNR curve and the first-seed episodes"""
    episode_names = ["episode-csa.csv", "episode-non_csa.csv"]
    table_path, curve_path, csa_episode, plain_episode, summary_path = prepare_artifacts(
        cfg, [TABLE_NAME, CURVE_NAME, *episode_names, summary_name("compare-csa")])

    dataset = load_dataset(cfg)
    n_seeds = cfg.harness.n_seeds

    logger.info(t("csa_running", seeds=n_seeds, psnr=cfg.scenario.psnr_db))
    table = compare_csa(cfg, dataset, n_seeds)
    write_text(table_path, table.to_csv())
    write_text(csa_episode, table.reports["csa"].to_csv())
    write_text(plain_episode, table.reports["non_csa"].to_csv())
    logger.info(t("csa_mean", csa=table.mean("csa"), non_csa=table.mean("non_csa")))

    curve = []
    for psnr in cfg.sweep.csa_psnr_list:
        logger.info(t("csa_running", seeds=n_seeds, psnr=psnr))
        point = compare_csa(cfg, dataset, n_seeds, psnr_db=psnr)
        csa, plain = point.mean("csa"), point.mean("non_csa")
        curve.append((CSV_SCHEMA_VERSION, float(psnr), csa, plain, csa - plain))
    write_csv(curve_path, CURVE_COLUMNS, curve)

    summary = {
        "command": "compare-csa",
        "seed": cfg.harness.seed,
        "table": table,
        "episode": {label: report.summary() for label, report in table.reports.items()},
        "curve": [dict(zip(CURVE_COLUMNS[1:], row[1:])) for row in curve],
    }
    write_summary(summary_path, summary)
    return summary


__all__ = ('compare_csa_handler', )
