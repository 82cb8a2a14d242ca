"""Validated configuration models, one per TOML section"""
import math
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


ChannelKindName = Literal["awgn", "rician", "rayleigh", "leo_rician", "leo_rayleigh", "los"]
ConstellationName = Literal["16psk", "16apsk"]


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GeometryConfig(Section):
    altitude_km: float = Field(600.0, ge=0)
    elevation_deg: float = Field(30.0, ge=0, le=90)
    # Positive when the satellite closes on the receiver
    radial_velocity_mps: float = 7000.0
    isl_distance_km: float = Field(1000.0, gt=0)
    isl_radial_velocity_mps: float = 0.0


class LinkBudgetParams(Section):
    carrier_ghz: float = Field(28.0, gt=0)
    tx_gain_dbi: float = 35.0
    rx_gain_dbi: float = 37.0
    gas_loss_db: float = Field(0.3, ge=0)
    scint_loss_db: float = Field(0.5, ge=0)
    shadow_sigma_db: float = Field(0.0, ge=0)
    tx_power_dbw: float = 10.0
    noise_temperature_k: float = Field(290.0, gt=0)
    bandwidth_hz: float = Field(1.0e6, gt=0)


class ChannelConfig(Section):
    kind: ChannelKindName = "awgn"
    k_factor: float = Field(2.8, ge=0)
    los_phase_deg: float = 0.0
    symbol_period_s: float = Field(1.0e-6, gt=0)
    baseband_frequency_hz: float = 0.0
    equalize: Literal["perfect", "none"] = "perfect"

    @model_validator(mode="after")
    def _los_needs_k(self):
        if self.kind == "los" and self.k_factor <= 0:
            raise ValueError("a LoS-only channel needs k_factor > 0")
        return self


class ModemConfig(Section):
    apsk_gamma: float = Field(2.85, gt=1)
    snr_db_list: List[float] = Field(default_factory=lambda: [0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0],
                                     min_length=1)
    n_symbols: int = Field(1_000_000, ge=1)


class DataConfig(Section):
    source: Literal["synthetic", "directory"] = "synthetic"
    directory: Optional[str] = None
    n_classes: int = Field(10, ge=2)
    n_per_class: int = Field(100, ge=1)
    height: int = Field(64, ge=1)
    width: int = Field(64, ge=1)
    bands: int = Field(3, ge=1)
    noise_level: float = Field(0.1, ge=0)
    label_noise: float = Field(0.0, ge=0, lt=1)
    test_fraction: float = Field(0.3, gt=0, lt=1)

    @model_validator(mode="after")
    def _directory_given(self):
        if self.source == "directory" and not self.directory:
            raise ValueError("data.directory is required when data.source = 'directory'")
        return self


class DTJSCCConfig(Section):
    n_sub: int = Field(16, ge=1)
    sub_dim: int = Field(4, ge=1)
    hidden: int = Field(64, ge=1)
    codebook_sizes: List[int] = Field(default_factory=lambda: [32, 64, 128], min_length=1)
    epochs: int = Field(30, ge=0)
    lr: float = Field(0.05, ge=0)
    momentum: float = Field(0.9, ge=0, lt=1)
    batch_size: int = Field(32, ge=1)
    commitment: float = Field(0.25, ge=0)
    ema_decay: float = Field(0.99, gt=0, lt=1)
    # None trains over a noiseless channel
    train_psnr_db: Optional[float] = None

    @field_validator("codebook_sizes")
    @classmethod
    def _sizes_in_range(cls, sizes):
        for size in sizes:
            if not 2 <= size <= 65536:
                raise ValueError(f"codebook size {size} outside [2, 65536]")
        return sizes


class SemAugConfig(Section):
    lambda_sa: float = Field(0.5, ge=0)
    lambda_ramp_epochs: int = Field(0, ge=0)
    predictor: bool = True
    blend: float = Field(0.5, ge=0, le=1)
    predictor_lr: float = Field(0.01, ge=0)
    sa_weight: float = Field(0.1, ge=0)
    # Train the base codec with SA as well, not only the online receivers
    train_with_sa: bool = False


class ScenarioConfig(Section):
    isl: ChannelConfig = ChannelConfig(kind="los")
    downlink: ChannelConfig = ChannelConfig(kind="leo_rician")
    constellation: ConstellationName = "16apsk"
    apsk_gamma: float = Field(2.85, gt=1)
    psnr_db: Optional[float] = 12.0
    # None reuses psnr_db on the inter-satellite link
    isl_psnr_db: Optional[float] = None
    k_q: int = Field(32, ge=2, le=65536)
    csa_enabled: bool = True
    n_timesteps: int = Field(8, ge=0)
    batch_size: int = Field(32, ge=1)
    online_lr: float = Field(0.05, ge=0)
    slant_range_mode: Literal["paper", "expanded", "geometric"] = "geometric"

    @field_validator("psnr_db", "isl_psnr_db")
    @classmethod
    def _finite(cls, value):
        if value is not None and not math.isfinite(value):
            raise ValueError("PSNR must be finite; leave it unset for a noiseless link")
        return value


class SweepSpec(Section):
    psnr_list: List[float] = Field(default_factory=lambda: [0.0, 4.0, 8.0, 12.0, 16.0], min_length=1)
    kq_list: List[int] = Field(default_factory=lambda: [32, 64, 128], min_length=1)
    channel_kinds: List[ChannelKindName] = Field(default_factory=lambda: ["awgn", "rician", "rayleigh"],
                                                 min_length=1)
    constellations: List[ConstellationName] = Field(default_factory=lambda: ["16psk", "16apsk"], min_length=1)
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4], min_length=1)
    csa_psnr_list: List[float] = Field(default_factory=lambda: [4.0, 8.0, 12.0], min_length=1)


class HarnessConfig(Section):
    seed: int = Field(0, ge=0)
    jobs: int = Field(1, ge=1)
    output_dir: str = "runs/default"
    overwrite: bool = False
    n_seeds: int = Field(5, ge=1)
    probe_draws: int = Field(100_000, ge=2)


class AppConfig(Section):
    geometry: GeometryConfig = GeometryConfig()
    linkbudget: LinkBudgetParams = LinkBudgetParams()
    modem: ModemConfig = ModemConfig()
    data: DataConfig = DataConfig()
    dtjscc: DTJSCCConfig = DTJSCCConfig()
    semaug: SemAugConfig = SemAugConfig()
    scenario: ScenarioConfig = ScenarioConfig()
    sweep: SweepSpec = SweepSpec()
    harness: HarnessConfig = HarnessConfig()


__all__ = (
    'ChannelKindName', 'ConstellationName', 'GeometryConfig', 'LinkBudgetParams', 'ChannelConfig',
    'ModemConfig', 'DataConfig', 'DTJSCCConfig', 'SemAugConfig', 'ScenarioConfig', 'SweepSpec',
    'HarnessConfig', 'AppConfig',
)
