"""Large-scale loss terms and the antenna-adjusted large-scale gain"""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from csaeo.models.config import LinkBudgetParams

BOLTZMANN_DBW_PER_K_HZ = 10 * math.log10(1.380649e-23)


@dataclass(frozen=True)
class PathLossBreakdown:
    fspl_db: float
    shadow_db: float = 0.0
    gas_db: float = 0.0
    scint_db: float = 0.0

    @property
    def total_db(self) -> float:
        return self.fspl_db + self.shadow_db + self.gas_db + self.scint_db

    def as_dict(self):
        return {
            "fspl_db": self.fspl_db,
            "shadow_db": self.shadow_db,
            "gas_db": self.gas_db,
            "scint_db": self.scint_db,
            "total_db": self.total_db,
        }


def fspl_db(distance_m: float, carrier_ghz: float) -> float:
    """Free-space path loss with the range in metres and the carrier in GHz"""
    if not distance_m > 0:
        raise ValueError(f"distance_m must be > 0, got {distance_m}")
    if not carrier_ghz > 0:
        raise ValueError(f"carrier_ghz must be > 0, got {carrier_ghz}")
    return 32.45 + 20 * math.log10(carrier_ghz) + 20 * math.log10(distance_m)


def sample_shadow_fading_db(sigma_db: float, rng: Optional[np.random.Generator]) -> float:
    if sigma_db < 0:
        raise ValueError(f"sigma_db must be >= 0, got {sigma_db}")
    if sigma_db == 0:
        return 0.0
    if rng is None:
        raise ValueError("a random stream is required when sigma_db > 0")
    return float(rng.normal(0.0, sigma_db))


def ground_path_loss(distance_m: float, params: LinkBudgetParams,
                     rng: Optional[np.random.Generator] = None) -> PathLossBreakdown:
    return PathLossBreakdown(
        fspl_db=fspl_db(distance_m, params.carrier_ghz),
        shadow_db=sample_shadow_fading_db(params.shadow_sigma_db, rng),
        gas_db=params.gas_loss_db,
        scint_db=params.scint_loss_db,
    )


def isl_path_loss(distance_m: float, params: LinkBudgetParams) -> PathLossBreakdown:
    return PathLossBreakdown(fspl_db=fspl_db(distance_m, params.carrier_ghz))


def large_scale_gain_db(total_loss_db: float, tx_gain_dbi: float) -> float:
    """zeta in dB, kept as a loss; see zeta_linear for the power gain"""
    return total_loss_db - tx_gain_dbi


def zeta_linear(zeta_db: float) -> float:
    return 10 ** (-zeta_db / 10)


def received_snr_db(zeta_db: float, params: LinkBudgetParams) -> float:
    """Absolute received SNR: Ptx - zeta + G_R - kTB"""
    noise_dbw = BOLTZMANN_DBW_PER_K_HZ + 10 * math.log10(params.noise_temperature_k) \
        + 10 * math.log10(params.bandwidth_hz)
    return params.tx_power_dbw - zeta_db + params.rx_gain_dbi - noise_dbw


__all__ = (
    'PathLossBreakdown', 'fspl_db', 'sample_shadow_fading_db', 'ground_path_loss', 'isl_path_loss',
    'large_scale_gain_db', 'zeta_linear', 'received_snr_db',
)
