"""channel-probe: fading statistics per channel kind and the link budget behind them"""
import numpy as np

from csaeo.harness.common import prepare_artifacts, summary_name, write_csv, write_summary
from csaeo.link.channel import FadingModel, estimate_k_factor, sample_fading
from csaeo.link.geometry import GeometryParams, slant_range_expanded, slant_range_geometric
from csaeo.link.linkbudget import received_snr_db
from csaeo.link.modem import build_constellation
from csaeo.models.config import AppConfig
from csaeo.sim.pipeline import build_link
from csaeo.utils.encoder import CSV_SCHEMA_VERSION
from csaeo.utils.i18n import t
from csaeo.utils.logger import logger
from csaeo.utils.rng import derive_rng

PROBE_NAME = "channel_probe.csv"
PROBE_COLUMNS = (
    "schema_version", "kind", "k_factor", "draws", "mean_power", "mean_amplitude", "k_estimate",
)


def _link_report(link, cfg: AppConfig) -> dict:
    snr = received_snr_db(link.kind.zeta_db, cfg.linkbudget)
    logger.info(t("link_budget", link=link.name, distance_km=link.distance_km, loss_db=link.loss.total_db,
                  snr_db=snr))
    return {
        "distance_km": link.distance_km,
        "loss": link.loss,
        "zeta_db": link.kind.zeta_db,
        "received_snr_db": snr,
        "doppler_hz": link.kind.doppler_hz,
        "delay_s": link.kind.delay_s,
    }


def channel_probe_handler(cfg: AppConfig) -> dict:
    csv_path, summary_path = prepare_artifacts(cfg, [PROBE_NAME, summary_name("channel-probe")])
    sc = cfg.scenario
    c = build_constellation(sc.constellation, sc.apsk_gamma)
    draws = cfg.harness.probe_draws

    rows = []
    for i, model in enumerate(FadingModel):
        is_isl = model is FadingModel.los
        base = sc.isl if is_isl else sc.downlink
        link = build_link(base.model_copy(update={"kind": model.value}), cfg, c, sc.psnr_db, isl=is_isl)
        gains = np.asarray(sample_fading(link.kind, 1.0, derive_rng(cfg.harness.seed, "probe", i), size=draws))
        power = float(np.mean(np.abs(gains) ** 2))
        k_estimate = estimate_k_factor(gains)
        rows.append((CSV_SCHEMA_VERSION, model.value, link.kind.effective_k, draws, power,
                     float(np.mean(np.abs(gains))), k_estimate))
        logger.info(t("probe_kind", kind=model.value, power=power, k_estimate=k_estimate))
    write_csv(csv_path, PROBE_COLUMNS, rows)

    geo = cfg.geometry
    params = GeometryParams.from_degrees(geo.altitude_km, geo.elevation_deg, geo.radial_velocity_mps)
    summary = {
        "command": "channel-probe",
        "seed": cfg.harness.seed,
        "slant_range_km": {"expanded": slant_range_expanded(params), "geometric": slant_range_geometric(params)},
        "downlink": _link_report(build_link(sc.downlink, cfg, c, sc.psnr_db), cfg),
        "isl": _link_report(build_link(sc.isl, cfg, c, sc.psnr_db, isl=True), cfg),
        "kinds": [dict(zip(PROBE_COLUMNS[1:], row[1:])) for row in rows],
    }
    write_summary(summary_path, summary)
    return summary


__all__ = ('channel_probe_handler', )
