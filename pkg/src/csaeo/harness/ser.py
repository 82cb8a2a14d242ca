"""ser-curve: Monte-Carlo SER against Es/N0 for both constellations, with analytic overlays"""
import math

from csaeo.harness.common import prepare_artifacts, summary_name, write_csv, write_summary
from csaeo.link.modem import analytic_ser_psk, build_16apsk, build_16psk, ser_monte_carlo, union_bound_ser
from csaeo.models.config import AppConfig
from csaeo.utils.encoder import CSV_SCHEMA_VERSION
from csaeo.utils.errors import ConfigError
from csaeo.utils.i18n import t
from csaeo.utils.logger import logger
from csaeo.utils.rng import derive_rng

SER_NAME = "ser_curve.csv"
SER_COLUMNS = (
    "schema_version", "esn0_db", "ser_16psk", "ser_16apsk", "ser_16psk_analytic", "ser_16apsk_union_bound",
    "ser_16psk_sigma", "n_symbols",
)


def ser_curve_handler(cfg: AppConfig) -> dict:
    snr_list = cfg.modem.snr_db_list
    if not snr_list:
        raise ConfigError("modem.snr_db_list must not be empty")
    csv_path, summary_path = prepare_artifacts(cfg, [SER_NAME, summary_name("ser-curve")])

    psk = build_16psk()
    apsk = build_16apsk(cfg.modem.apsk_gamma)
    n = cfg.modem.n_symbols
    seed = cfg.harness.seed

    rows = []
    for i, snr in enumerate(snr_list):
        ser_psk = ser_monte_carlo(psk, snr, n, derive_rng(seed, "ser", psk.name, i))
        ser_apsk = ser_monte_carlo(apsk, snr, n, derive_rng(seed, "ser", apsk.name, i))
        analytic = float(analytic_ser_psk(snr))
        sigma = math.sqrt(analytic * (1 - analytic) / n)
        rows.append((CSV_SCHEMA_VERSION, float(snr), ser_psk, ser_apsk, analytic, union_bound_ser(apsk, snr),
                     sigma, n))
        logger.info(t("ser_point", snr=snr, psk=ser_psk, apsk=ser_apsk))

    write_csv(csv_path, SER_COLUMNS, rows)
    summary = {
        "command": "ser-curve",
        "seed": seed,
        "apsk_gamma": cfg.modem.apsk_gamma,
        "n_symbols": n,
        "points": [dict(zip(SER_COLUMNS[1:], row[1:])) for row in rows],
    }
    write_summary(summary_path, summary)
    return summary


__all__ = ('ser_curve_handler', )
