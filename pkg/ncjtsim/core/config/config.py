"""Run configuration model and defaults"""
import math
from typing import List, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

SCHEMES = ("none", "dps", "fncjt", "nfncjt")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class RunSection(_Section):
    scheme: Literal["none", "dps", "fncjt", "nfncjt"] = "nfncjt"
    users_per_trp: int = Field(3, ge=1, le=64)
    max_coord: int = Field(2, ge=1)
    seeds: List[int] = Field(default_factory=lambda: [1], min_length=1)
    ttis: int = Field(10000, ge=1)
    warmup_ttis: int = Field(200, ge=0)
    out: str = "results"
    workers: int = Field(1, ge=1, le=256)

    @field_validator("seeds")
    @classmethod
    def validate_seeds(cls, v):
        if len(set(v)) != len(v):
            raise ValueError("seeds must be unique")
        if any(s < 0 for s in v):
            raise ValueError("seeds must be non-negative")
        return v


class DeploymentSection(_Section):
    trp_count: int = Field(8, ge=1, le=64)
    isd: float = Field(30.0, gt=0)
    rows: int = Field(2, ge=1)
    row_spacing: float = Field(20.0, gt=0)
    hall_length: float = Field(120.0, gt=0)
    hall_width: float = Field(50.0, gt=0)
    trp_height: float = Field(6.0, gt=0)
    ue_height: float = Field(1.5, gt=0)
    tx_power_dbm: float = Field(24.0, ge=-30, le=60)
    n_tx: int = Field(2, ge=1, le=16)
    n_rx: int = Field(4, ge=1, le=16)
    trp_antenna_gain_dbi: float = Field(5.0, ge=-20, le=30)
    ue_antenna_gain_dbi: float = Field(0.0, ge=-20, le=30)
    max_drop_attempts: int = Field(100000, ge=1)


class CarrierSection(_Section):
    fc_ghz: float = Field(3.5, gt=0, le=100)
    bandwidth_mhz: float = Field(10.0, gt=0)
    n_prb: int = Field(50, ge=1, le=275)
    subcarrier_spacing_khz: float = Field(15.0, gt=0)
    tti_s: float = Field(0.001, gt=0)
    noise_psd_dbm_hz: float = Field(-174.0, le=-100)
    noise_figure_db: float = Field(9.0, ge=0, le=30)


class ChannelSection(_Section):
    rho: float = Field(0.99, ge=0.0, le=1.0)
    subbands: int = Field(4, ge=1)
    shadowing_los_db: float = Field(3.0, ge=0)
    shadowing_nlos_db: float = Field(4.0, ge=0)
    csi_error_var: float = Field(0.0, ge=0)


class PhySection(_Section):
    se_cap: float = Field(7.4, gt=0, le=30)
    feedback_delay: int = Field(5, ge=0, le=1000)
    csi_hypothesis: Literal["exclude_in_set", "all_interfere"] = "exclude_in_set"
    power_split: Literal["allocated", "all"] = "allocated"


class TrafficSection(_Section):
    file_bytes: int = Field(500_000, ge=1)
    lambda_per_s: float = Field(1.0, gt=0)
    scope: Literal["network", "trp", "ue"] = "ue"


class PfSection(_Section):
    horizon: float = Field(100.0, ge=1.0)
    floor_bps: float = Field(1.0, gt=0)
    subband_metric: bool = True


class LoggingSection(_Section):
    level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = "INFO"
    format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


class DebugSection(_Section):
    dump_grids: bool = False
    dump_links: bool = False
    dump_sinr: bool = False


class RunConfig(_Section):
    """Fully validated configuration of one experiment cell"""

    run: RunSection = Field(default_factory=RunSection)
    deployment: DeploymentSection = Field(default_factory=DeploymentSection)
    carrier: CarrierSection = Field(default_factory=CarrierSection)
    channel: ChannelSection = Field(default_factory=ChannelSection)
    phy: PhySection = Field(default_factory=PhySection)
    traffic: TrafficSection = Field(default_factory=TrafficSection)
    pf: PfSection = Field(default_factory=PfSection)
    logging: LoggingSection = Field(default_factory=LoggingSection)
    debug: DebugSection = Field(default_factory=DebugSection)

    @model_validator(mode="after")
    def validate_consistency(self):
        dep = self.deployment
        if self.run.max_coord > dep.trp_count:
            raise ValueError(
                f"run.max_coord={self.run.max_coord} exceeds deployment.trp_count={dep.trp_count}"
            )
        if dep.trp_count > 1 and dep.trp_count % dep.rows != 0:
            raise ValueError(
                f"deployment.trp_count={dep.trp_count} is not a multiple of deployment.rows={dep.rows}"
            )
        if self.channel.subbands > self.carrier.n_prb:
            raise ValueError(
                f"channel.subbands={self.channel.subbands} exceeds carrier.n_prb={self.carrier.n_prb}"
            )
        if self.prb_bandwidth_hz * self.carrier.n_prb > self.carrier.bandwidth_mhz * 1e6:
            raise ValueError(
                f"carrier.n_prb={self.carrier.n_prb} PRBs do not fit in {self.carrier.bandwidth_mhz} MHz"
            )
        return self

    # Derived quantities

    @property
    def prb_bandwidth_hz(self) -> float:
        return 12 * self.carrier.subcarrier_spacing_khz * 1e3

    @property
    def noise_power_w(self) -> float:
        dbm = (self.carrier.noise_psd_dbm_hz + 10 * math.log10(self.prb_bandwidth_hz)
               + self.carrier.noise_figure_db)
        return 10 ** ((dbm - 30) / 10)

    @property
    def tx_power_w(self) -> float:
        return 10 ** ((self.deployment.tx_power_dbm - 30) / 10)

    @property
    def file_bits(self) -> int:
        return 8 * self.traffic.file_bytes

    @property
    def effective_max_coord(self) -> int:
        # no coordination means every TRP is its own set
        return 1 if self.run.scheme == "none" else self.run.max_coord

    def with_overrides(self, **sections) -> "RunConfig":
        """Return a copy with some section fields replaced, e.g. run={'scheme': 'dps'}"""
        data = self.model_dump()
        for section, values in sections.items():
            data[section].update(values)
        return RunConfig.model_validate(data)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.model_dump(), sort_keys=True)
