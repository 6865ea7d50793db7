"""Pydantic request/response models for the simulation service."""

from __future__ import annotations

from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class ConfigRequest(BaseModel):
    """Base request: inline INI text (defaults to the shipped config) plus
    section.key=value overrides."""

    config_text: Optional[str] = None
    overrides: List[str] = Field(default_factory=list)


class ValidateResponse(BaseModel):
    valid: bool
    error: Optional[str] = None
    config_hash: Optional[str] = None


class MapRequest(ConfigRequest):
    kind: str  # "power" | "illuminance"
    step_m: float = 0.25


class MapStats(BaseModel):
    min_value: float
    max_value: float
    compliance_fraction: Optional[float] = None  # illuminance: share in [300,1500] lx
    band_lo: Optional[float] = None
    band_hi: Optional[float] = None


class MapResponse(BaseModel):
    kind: str
    csv: str
    stats: MapStats
    config_hash: str


class DatabaseRequest(ConfigRequest):
    cell_size_m: Optional[float] = None


class DatabaseResponse(BaseModel):
    csv: str
    cell_size_m: float
    config_hash: str


class SimulateRequest(ConfigRequest):
    pass


class DeviceMetricsModel(BaseModel):
    connected_s: float
    disrupted_s: float
    disconnected_s: float
    cell_gain_bits: Dict[int, float]


class SchemeMetricsModel(BaseModel):
    scheme: str
    handover_count: int
    unnecessary_count: int
    failure_count: int
    mean_delay_s: float
    max_delay_s: float
    total_disruption_s: float
    localization_rmse_m: Optional[float]
    prediction_rmse_m: Optional[float]
    total_time_s: float
    per_device: Dict[str, DeviceMetricsModel]


class SchemeOutput(BaseModel):
    metrics: SchemeMetricsModel
    metrics_csv: str
    events_csv: str
    trace_csv: str


class SimulateResponse(BaseModel):
    schemes: Dict[str, SchemeOutput]
    config_hash: str


class CompareResponse(BaseModel):
    schemes: Dict[str, SchemeOutput]
    comparison_csv: str
    per_handover_delay_s: Dict[str, float]
    delay_ratio: float
    config_hash: str
