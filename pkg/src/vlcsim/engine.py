"""Fixed-step superframe-synchronous simulation loop binding mobility,
channel, protocol and metrics.  Owns the seeded random generator; results
are deterministic in (config, seed)."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import channel, mobility, prediction, protocol
from .localization import RssReport
from .mobility import ConnectivitySample, Trajectory, position_at
from .protocol import (
    Coordinator,
    DelayParams,
    HandoverEvent,
    OutcomeTruth,
    SuperframeConfig,
    SwitchCommand,
    UdState,
    classify_outcome,
    ud_step,
)
from .scenario import Scenario, Vec2, validate

SCHEME_BOTH = "both"


class EngineError(RuntimeError):
    pass


def default_rss_threshold(scenario: Scenario, distance_m: float = 3.5) -> float:
    """Traditional-scheme threshold: photocurrent at the given horizontal
    distance from an AP, derived from the channel model at config time."""
    ap = scenario.aps_sorted[0]
    rx = (ap.pos_xy[0] + distance_m, ap.pos_xy[1])
    p = channel.los_power(ap, rx, scenario.channel, scenario.room)
    return scenario.channel.responsivity_a_per_w * p


@dataclass
class SimConfig:
    scenario: Scenario
    trajectories: Dict[str, Trajectory]
    duration_s: float
    seed: int = 42
    scheme: str = protocol.SCHEME_PREDICTIVE  # traditional | predictive | both
    superframe: SuperframeConfig = field(default_factory=SuperframeConfig)
    delays: DelayParams = field(default_factory=DelayParams)
    alpha: float = 0.5
    k_history: Optional[int] = None
    db_cell_size_m: float = prediction.DEFAULT_CELL_SIZE_M
    rss_threshold_a: Optional[float] = None  # None: derive from 3.5 m rule
    rss_threshold_distance_m: float = 3.5
    use_all_anchors: bool = False
    fused_single: bool = False
    path_capacity: int = 64

    def __post_init__(self):
        if self.duration_s <= 0:
            raise EngineError("duration_s must be > 0")
        if not self.trajectories:
            raise EngineError("at least one device required")

    def threshold(self) -> float:
        if self.rss_threshold_a is not None:
            return self.rss_threshold_a
        return default_rss_threshold(self.scenario, self.rss_threshold_distance_m)


@dataclass
class DeviceMetrics:
    connected_s: float = 0.0
    disrupted_s: float = 0.0
    disconnected_s: float = 0.0
    cell_gain_bits: Dict[int, float] = field(default_factory=dict)

    @property
    def total_cell_gain_bits(self) -> float:
        return sum(self.cell_gain_bits.values())


@dataclass
class SchemeMetrics:
    scheme: str
    handover_count: int = 0
    unnecessary_count: int = 0
    failure_count: int = 0
    mean_delay_s: float = 0.0
    max_delay_s: float = 0.0
    total_disruption_s: float = 0.0
    localization_rmse_m: Optional[float] = None
    prediction_rmse_m: Optional[float] = None
    total_time_s: float = 0.0
    per_device: Dict[str, DeviceMetrics] = field(default_factory=dict)


@dataclass
class TraceRow:
    superframe_index: int
    device_id: str
    truth_xy: Vec2
    est_xy: Optional[Vec2]
    serving_ap: Optional[int]
    phase: str


@dataclass
class SchemeResult:
    metrics: SchemeMetrics
    events: List[HandoverEvent]
    trace: List[TraceRow]
    truth_best: Dict[str, List[int]]  # noiseless argmax AP per superframe
    serving_seq: Dict[str, List[Optional[int]]]


@dataclass
class ComparisonResult:
    results: Dict[str, SchemeResult]
    per_handover_delay_s: Dict[str, float]
    delay_ratio: float


def _device_rng(seed: int, device_id: str) -> np.random.Generator:
    # per-device substream: adding a device never perturbs the others
    digest = hashlib.sha256(f"{seed}:{device_id}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


@dataclass
class _PendingEvent:
    device_id: str
    arrival_k: int
    from_ap: Optional[int]
    to_ap: int
    delay_s: float
    disruption_s: float
    predicted_xy: Optional[Vec2]
    best_at_arrival: int
    within_coverage: bool


def run_scheme(config: SimConfig, scheme: str) -> SchemeResult:
    scenario = validate(config.scenario)
    sf = config.superframe
    dt1 = sf.duration_s
    n_frames = max(1, int(round(config.duration_s / dt1)))
    threshold = config.threshold()
    params = scenario.channel
    room = scenario.room
    aps = scenario.aps_sorted
    ap_by_id = {ap.id: ap for ap in aps}

    devices = sorted(config.trajectories)
    states = {
        dev: UdState(device_id=dev, scheme=scheme, rss_threshold_a=threshold)
        for dev in devices
    }
    rngs = {dev: _device_rng(config.seed, dev) for dev in devices}

    coord: Optional[Coordinator] = None
    if scheme == protocol.SCHEME_PREDICTIVE:
        db = prediction.build_database(scenario, config.db_cell_size_m)
        coord = Coordinator(
            scenario,
            db,
            alpha=config.alpha,
            k_history=config.k_history,
            use_all_anchors=config.use_all_anchors,
            path_capacity=config.path_capacity,
        )

    metrics = SchemeMetrics(scheme=scheme)
    for dev in devices:
        metrics.per_device[dev] = DeviceMetrics()
    trace: List[TraceRow] = []
    events: List[HandoverEvent] = []
    truth_best: Dict[str, List[int]] = {dev: [] for dev in devices}
    serving_seq: Dict[str, List[Optional[int]]] = {dev: [] for dev in devices}
    connectivity: Dict[str, List[ConnectivitySample]] = {dev: [] for dev in devices}

    pending_commands: Dict[str, SwitchCommand] = {}
    issued_queue: Dict[str, List[protocol.IssuedSwitch]] = {dev: [] for dev in devices}
    pending_events: List[_PendingEvent] = []
    loc_sq_errors: List[float] = []
    pred_sq_errors: List[float] = []
    prev_prediction: Dict[str, Vec2] = {}

    for k in range(n_frames):
        t = k * dt1
        reports: List[RssReport] = []
        frame_truth: Dict[str, Vec2] = {}
        for dev in devices:
            xy = position_at(config.trajectories[dev], t)
            frame_truth[dev] = xy
            truth_best[dev].append(prediction._argmax_ap(xy, scenario))

            readings: Dict[int, float] = {}
            rng = rngs[dev]
            for ap in aps:
                sample = channel.sample_rss(ap, xy, params, room, rng)
                readings[ap.id] = max(0.0, sample.photocurrent_a)

            res = ud_step(
                states[dev],
                k,
                readings,
                pending_commands.get(dev),
                sf,
                config.delays,
                config.fused_single,
            )
            if res.report is not None:
                reports.append(res.report)

            state = states[dev]
            dm = metrics.per_device[dev]
            if state.serving_ap is None or state.phase == protocol.PHASE_DISCONNECTED:
                dm.disconnected_s += dt1
                connected = 0.0
            else:
                connected = dt1 - res.disrupted_s
                dm.disrupted_s += res.disrupted_s
                dm.connected_s += connected
            metrics.total_time_s += dt1
            connectivity[dev].append(
                ConnectivitySample(t=t, connected_s=connected, xy=xy, ap_id=state.serving_ap)
            )
            serving_seq[dev].append(state.serving_ap)

            if res.completed is not None:
                best_now = truth_best[dev][-1]
                target_ap = ap_by_id[res.completed.to_ap]
                within = (
                    math.dist(xy, target_ap.pos_xy) <= target_ap.coverage_radius_m
                )
                # tie-tolerant: at an exact equal-power boundary the target is
                # as good as the argmax pick
                p_best = prediction._noiseless_power(ap_by_id[best_now], xy, scenario)
                p_target = prediction._noiseless_power(target_ap, xy, scenario)
                target_is_best = (
                    res.completed.to_ap == best_now
                    or p_target >= p_best * (1.0 - 1e-9)
                )
                if target_is_best:
                    best_now = res.completed.to_ap
                predicted_xy = None
                if scheme == protocol.SCHEME_PREDICTIVE and issued_queue[dev]:
                    predicted_xy = issued_queue[dev].pop(0).predicted_xy
                success = target_is_best and within
                if coord is not None:
                    prediction.record_switch_outcome(
                        coord.db,
                        predicted_xy if predicted_xy is not None else xy,
                        success,
                        scenario,
                    )
                pending_events.append(
                    _PendingEvent(
                        device_id=dev,
                        arrival_k=k,
                        from_ap=res.completed.from_ap,
                        to_ap=res.completed.to_ap,
                        delay_s=res.completed.delay_s,
                        disruption_s=res.completed.disruption_s,
                        predicted_xy=predicted_xy,
                        best_at_arrival=best_now,
                        within_coverage=within,
                    )
                )

        # finalize events whose "one superframe later" truth is now known
        still_pending: List[_PendingEvent] = []
        for pe in pending_events:
            if pe.arrival_k + 1 < len(truth_best[pe.device_id]):
                events.append(_finalize_event(pe, scheme, truth_best, sf))
            else:
                still_pending.append(pe)
        pending_events = still_pending

        pending_commands = {}
        if coord is not None:
            # prediction error: last frame's prediction targeted this frame
            for dev, pred_xy in prev_prediction.items():
                pred_sq_errors.append(math.dist(pred_xy, frame_truth[dev]) ** 2)
            prev_prediction = {}
            cmds, issued = coord.step(k, reports)
            pending_commands = cmds
            for isw in issued:
                issued_queue[isw.device_id].append(isw)
            for dev in devices:
                est = coord.last_estimate.get(dev)
                if est is not None and dev in [r.device_id for r in reports]:
                    loc_sq_errors.append(math.dist(est, frame_truth[dev]) ** 2)
                pred_xy = coord.last_prediction.get(dev)
                if pred_xy is not None:
                    prev_prediction[dev] = pred_xy

        for dev in devices:
            est = coord.last_estimate.get(dev) if coord is not None else None
            trace.append(
                TraceRow(
                    superframe_index=k,
                    device_id=dev,
                    truth_xy=frame_truth[dev],
                    est_xy=est,
                    serving_ap=states[dev].serving_ap,
                    phase=states[dev].phase,
                )
            )

    for pe in pending_events:  # run ended: no "one frame later" truth
        events.append(_finalize_event(pe, scheme, truth_best, sf, run_ended=True))
    events.sort(key=lambda e: (e.superframe_index, e.device_id))

    delays_list = [e.delay_s for e in events]
    metrics.handover_count = len(events)
    metrics.unnecessary_count = sum(
        1 for e in events if e.outcome == protocol.OUTCOME_UNNECESSARY
    )
    metrics.failure_count = sum(
        1 for e in events if e.outcome == protocol.OUTCOME_FAILURE
    )
    metrics.mean_delay_s = sum(delays_list) / len(delays_list) if delays_list else 0.0
    metrics.max_delay_s = max(delays_list) if delays_list else 0.0
    metrics.total_disruption_s = sum(e.disruption_s for e in events)
    if loc_sq_errors:
        metrics.localization_rmse_m = math.sqrt(sum(loc_sq_errors) / len(loc_sq_errors))
    if pred_sq_errors:
        metrics.prediction_rmse_m = math.sqrt(sum(pred_sq_errors) / len(pred_sq_errors))
    for dev in devices:
        dm = metrics.per_device[dev]
        for ap in aps:
            gain = mobility.cell_gain(connectivity[dev], ap)
            if gain > 0:
                dm.cell_gain_bits[ap.id] = gain

    return SchemeResult(
        metrics=metrics,
        events=events,
        trace=trace,
        truth_best=truth_best,
        serving_seq=serving_seq,
    )


def _finalize_event(
    pe: _PendingEvent,
    scheme: str,
    truth_best: Dict[str, List[int]],
    sf: SuperframeConfig,
    run_ended: bool = False,
) -> HandoverEvent:
    seq = truth_best[pe.device_id]
    best_after = None
    if not run_ended and pe.arrival_k + 1 < len(seq):
        best_after = seq[pe.arrival_k + 1]
    event = HandoverEvent(
        device_id=pe.device_id,
        superframe_index=pe.arrival_k,
        scheme=scheme,
        from_ap=pe.from_ap,
        to_ap=pe.to_ap,
        delay_s=pe.delay_s,
        disruption_s=pe.disruption_s,
        outcome="",
    )
    truth = OutcomeTruth(
        best_at_arrival=pe.best_at_arrival,
        within_target_coverage=pe.within_coverage,
        best_after_arrival=best_after,
    )
    from dataclasses import replace

    return replace(event, outcome=classify_outcome(event, truth, sf))


def run(config: SimConfig) -> Dict[str, SchemeResult]:
    """Run the configured scheme(s); 'both' runs each on identical
    trajectories and seeds."""
    if config.scheme == SCHEME_BOTH:
        return {
            s: run_scheme(config, s)
            for s in (protocol.SCHEME_TRADITIONAL, protocol.SCHEME_PREDICTIVE)
        }
    return {config.scheme: run_scheme(config, config.scheme)}


def compare(config: SimConfig) -> ComparisonResult:
    """Side-by-side run of both schemes with the per-handover delay ratio."""
    results = {
        s: run_scheme(config, s)
        for s in (protocol.SCHEME_TRADITIONAL, protocol.SCHEME_PREDICTIVE)
    }
    t_delay = protocol.traditional_delay(config.delays)
    p_delay = protocol.predictive_delay(config.delays, config.fused_single)
    ratio = p_delay / t_delay if t_delay > 0 else float("nan")
    return ComparisonResult(
        results=results,
        per_handover_delay_s={
            protocol.SCHEME_TRADITIONAL: t_delay,
            protocol.SCHEME_PREDICTIVE: p_delay,
        },
        delay_ratio=ratio,
    )


TRACE_CSV_HEADER = "k,device,truth_x,truth_y,est_x,est_y,serving_ap,phase"


def trace_to_csv(trace: List[TraceRow], comment: Optional[str] = None) -> str:
    lines: List[str] = []
    if comment:
        lines.append(f"# {comment}")
    lines.append(TRACE_CSV_HEADER)
    for r in trace:
        est_x = f"{r.est_xy[0]:.9g}" if r.est_xy is not None else ""
        est_y = f"{r.est_xy[1]:.9g}" if r.est_xy is not None else ""
        serving = "" if r.serving_ap is None else str(r.serving_ap)
        lines.append(
            f"{r.superframe_index},{r.device_id},{r.truth_xy[0]:.9g},"
            f"{r.truth_xy[1]:.9g},{est_x},{est_y},{serving},{r.phase}"
        )
    return "\n".join(lines) + "\n"


def metrics_to_rows(metrics: SchemeMetrics) -> List[Tuple[str, str]]:
    rows = [
        ("scheme", metrics.scheme),
        ("handover_count", str(metrics.handover_count)),
        ("unnecessary_count", str(metrics.unnecessary_count)),
        ("failure_count", str(metrics.failure_count)),
        ("mean_delay_s", f"{metrics.mean_delay_s:.9g}"),
        ("max_delay_s", f"{metrics.max_delay_s:.9g}"),
        ("total_disruption_s", f"{metrics.total_disruption_s:.9g}"),
        ("total_time_s", f"{metrics.total_time_s:.9g}"),
        (
            "localization_rmse_m",
            "" if metrics.localization_rmse_m is None else f"{metrics.localization_rmse_m:.9g}",
        ),
        (
            "prediction_rmse_m",
            "" if metrics.prediction_rmse_m is None else f"{metrics.prediction_rmse_m:.9g}",
        ),
    ]
    for dev in sorted(metrics.per_device):
        dm = metrics.per_device[dev]
        rows.append((f"{dev}.connected_s", f"{dm.connected_s:.9g}"))
        rows.append((f"{dev}.disrupted_s", f"{dm.disrupted_s:.9g}"))
        rows.append((f"{dev}.disconnected_s", f"{dm.disconnected_s:.9g}"))
        rows.append((f"{dev}.cell_gain_bits", f"{dm.total_cell_gain_bits:.9g}"))
    return rows


def metrics_to_csv(metrics: SchemeMetrics, comment: Optional[str] = None) -> str:
    lines: List[str] = []
    if comment:
        lines.append(f"# {comment}")
    lines.append("metric,value")
    for key, value in metrics_to_rows(metrics):
        lines.append(f"{key},{value}")
    return "\n".join(lines) + "\n"


def comparison_to_csv(cmp: ComparisonResult, comment: Optional[str] = None) -> str:
    lines: List[str] = []
    if comment:
        lines.append(f"# {comment}")
    lines.append("metric,traditional,predictive")
    trad = dict(metrics_to_rows(cmp.results[protocol.SCHEME_TRADITIONAL].metrics))
    pred = dict(metrics_to_rows(cmp.results[protocol.SCHEME_PREDICTIVE].metrics))
    keys = [k for k, _ in metrics_to_rows(cmp.results[protocol.SCHEME_TRADITIONAL].metrics)]
    for key in keys:
        if key == "scheme":
            continue
        lines.append(f"{key},{trad.get(key, '')},{pred.get(key, '')}")
    lines.append(
        "per_handover_delay_s,"
        f"{cmp.per_handover_delay_s[protocol.SCHEME_TRADITIONAL]:.9g},"
        f"{cmp.per_handover_delay_s[protocol.SCHEME_PREDICTIVE]:.9g}"
    )
    lines.append(f"delay_ratio,,{cmp.delay_ratio:.9g}")
    return "\n".join(lines) + "\n"
