"""FastAPI service wrapping the simulator core.

Config errors map to HTTP 422 (CLI exit code 2), simulation errors to
HTTP 500 (CLI exit code 1).
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import configio, engine
from ..channel import illuminance_map, power_map
from ..configio import ConfigError
from ..engine import SchemeResult
from ..prediction import build_database, database_to_gridmap
from ..protocol import events_to_csv
from .models import (
    CompareResponse,
    ConfigRequest,
    DatabaseRequest,
    DatabaseResponse,
    DeviceMetricsModel,
    MapRequest,
    MapResponse,
    MapStats,
    SchemeMetricsModel,
    SchemeOutput,
    SimulateRequest,
    SimulateResponse,
    ValidateResponse,
)

ILLUMINANCE_BAND_LX = (300.0, 1500.0)

app = FastAPI(title="vlcsim", description="Indoor VLC link-switching simulator")


def _load(req: ConfigRequest):
    text = req.config_text if req.config_text is not None else configio.default_config_text()
    try:
        cp = configio.parse_config(text)
        configio.apply_overrides(cp, req.overrides)
        return cp
    except ConfigError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


def _sim_config(cp):
    try:
        return configio.load_sim_config(cp)
    except ConfigError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


def _scheme_output(result: SchemeResult, stamp: str) -> SchemeOutput:
    metrics = result.metrics
    return SchemeOutput(
        metrics=SchemeMetricsModel(
            scheme=metrics.scheme,
            handover_count=metrics.handover_count,
            unnecessary_count=metrics.unnecessary_count,
            failure_count=metrics.failure_count,
            mean_delay_s=metrics.mean_delay_s,
            max_delay_s=metrics.max_delay_s,
            total_disruption_s=metrics.total_disruption_s,
            localization_rmse_m=metrics.localization_rmse_m,
            prediction_rmse_m=metrics.prediction_rmse_m,
            total_time_s=metrics.total_time_s,
            per_device={
                dev: DeviceMetricsModel(
                    connected_s=dm.connected_s,
                    disrupted_s=dm.disrupted_s,
                    disconnected_s=dm.disconnected_s,
                    cell_gain_bits=dm.cell_gain_bits,
                )
                for dev, dm in metrics.per_device.items()
            },
        ),
        metrics_csv=engine.metrics_to_csv(metrics, comment=stamp),
        events_csv=events_to_csv(result.events, comment=stamp),
        trace_csv=engine.trace_to_csv(result.trace, comment=stamp),
    )


@app.get("/health")
def health():
    return {"status": "ok"}


@app.post("/validate", response_model=ValidateResponse)
def validate_config(req: ConfigRequest):
    try:
        text = (
            req.config_text if req.config_text is not None else configio.default_config_text()
        )
        cp = configio.parse_config(text)
        configio.apply_overrides(cp, req.overrides)
        configio.load_sim_config(cp)
    except ConfigError as exc:
        return ValidateResponse(valid=False, error=str(exc))
    return ValidateResponse(valid=True, config_hash=configio.config_hash(cp))


@app.post("/maps", response_model=MapResponse)
def maps(req: MapRequest):
    if req.kind not in ("power", "illuminance"):
        raise HTTPException(status_code=422, detail=f"unknown map kind {req.kind!r}")
    if req.step_m <= 0:
        raise HTTPException(status_code=422, detail="step_m must be > 0")
    cp = _load(req)
    try:
        scenario = configio.load_scenario(cp)
    except ConfigError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    stamp = f"config_hash={configio.config_hash(cp)}"
    gm = (
        power_map(scenario, req.step_m)
        if req.kind == "power"
        else illuminance_map(scenario, req.step_m)
    )
    stats = MapStats(min_value=float(gm.values.min()), max_value=float(gm.values.max()))
    if req.kind == "illuminance":
        lo, hi = ILLUMINANCE_BAND_LX
        inside = ((gm.values >= lo) & (gm.values <= hi)).mean()
        stats.compliance_fraction = float(inside)
        stats.band_lo, stats.band_hi = lo, hi
    return MapResponse(
        kind=req.kind, csv=gm.to_csv(comment=stamp), stats=stats,
        config_hash=configio.config_hash(cp),
    )


@app.post("/database", response_model=DatabaseResponse)
def database(req: DatabaseRequest):
    cp = _load(req)
    config = _sim_config(cp)
    cell = req.cell_size_m if req.cell_size_m is not None else config.db_cell_size_m
    if cell <= 0:
        raise HTTPException(status_code=422, detail="cell_size_m must be > 0")
    stamp = f"config_hash={configio.config_hash(cp)}"
    db = build_database(config.scenario, cell)
    return DatabaseResponse(
        csv=database_to_gridmap(db).to_csv(comment=stamp),
        cell_size_m=cell,
        config_hash=configio.config_hash(cp),
    )


@app.post("/simulate", response_model=SimulateResponse)
def simulate(req: SimulateRequest):
    cp = _load(req)
    config = _sim_config(cp)
    stamp = f"config_hash={configio.config_hash(cp)}"
    try:
        results = engine.run(config)
    except engine.EngineError as exc:
        raise HTTPException(status_code=500, detail=str(exc)) from exc
    return SimulateResponse(
        schemes={s: _scheme_output(r, stamp) for s, r in results.items()},
        config_hash=configio.config_hash(cp),
    )


@app.post("/compare", response_model=CompareResponse)
def compare(req: SimulateRequest):
    cp = _load(req)
    config = _sim_config(cp)
    stamp = f"config_hash={configio.config_hash(cp)}"
    try:
        cmp = engine.compare(config)
    except engine.EngineError as exc:
        raise HTTPException(status_code=500, detail=str(exc)) from exc
    return CompareResponse(
        schemes={s: _scheme_output(r, stamp) for s, r in cmp.results.items()},
        comparison_csv=engine.comparison_to_csv(cmp, comment=stamp),
        per_handover_delay_s=cmp.per_handover_delay_s,
        delay_ratio=cmp.delay_ratio,
        config_hash=configio.config_hash(cp),
    )
