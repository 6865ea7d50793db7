"""Superframe clock, the two handover state machines (user device and
coordinator), and the delay accounting for both link-switching schemes.

The traditional scheme is user-driven: scan when the serving RSS falls
below a threshold, decide, then run the sequential
disconnect/switch/associate/sync pipeline.  The predictive scheme is
coordinator-driven: devices report RSS every superframe, the coordinator
localizes, extrapolates, looks up the pre-scanned best AP for the predicted
position, and commands a simultaneous disconnect + associate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

from .localization import LocalizationError, RssReport, estimate_position
from .prediction import (
    BestApDatabase,
    PathReport,
    lookup_best_ap,
    predict_next,
    predict_next_k,
)
from .scenario import Scenario, Vec2

SCHEME_TRADITIONAL = "traditional"
SCHEME_PREDICTIVE = "predictive"

PHASE_ASSOCIATED = "associated"
PHASE_SCANNING = "scanning"
PHASE_SWITCHING = "switching"
PHASE_DISCONNECTED = "disconnected"

OUTCOME_SUCCESS = "success"
OUTCOME_FAILURE = "failure"
OUTCOME_UNNECESSARY = "unnecessary"


@dataclass(frozen=True)
class SuperframeConfig:
    duration_s: float = 0.1
    active_fraction: float = 0.9

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValueError("duration_s must be > 0")
        if not (0.0 < self.active_fraction < 1.0):
            raise ValueError("active_fraction must be in (0, 1)")


@dataclass(frozen=True)
class DelayParams:
    t_scan: float = 0.01
    t_decision: float = 0.01
    t_discon: float = 0.01
    t_linksw: float = 0.01
    t_linkasso: float = 0.01
    t_sync: float = 0.01


def traditional_delay(p: DelayParams) -> float:
    """Sequential pipeline: scan + decision + disconnect + switch + associate
    + sync."""
    return p.t_scan + p.t_decision + p.t_discon + p.t_linksw + p.t_linkasso + p.t_sync


def predictive_delay(p: DelayParams, fused_single: bool = False) -> float:
    """Pre-scanned scheme: no scan or decision stage; disconnection and new
    link establishment run simultaneously, so the first stage costs their
    maximum.  fused_single treats them as one shared stage of duration
    t_discon instead."""
    first = p.t_discon if fused_single else max(p.t_discon, p.t_linksw)
    return first + p.t_linkasso + p.t_sync


@dataclass
class UdState:
    device_id: str
    scheme: str
    rss_threshold_a: float = 0.0
    serving_ap: Optional[int] = None
    phase: str = PHASE_DISCONNECTED
    timer: int = 0
    pending_from: Optional[int] = None
    pending_target: Optional[int] = None
    pending_delay_s: float = 0.0
    pending_disruption_s: float = 0.0
    disruption_remaining_s: float = 0.0


@dataclass(frozen=True)
class SwitchCommand:
    device_id: str
    target_ap: int
    predicted_xy: Vec2
    associate_only: bool = False  # bootstrap association, not a handover


@dataclass(frozen=True)
class CompletedSwitch:
    from_ap: Optional[int]
    to_ap: int
    delay_s: float
    disruption_s: float


@dataclass(frozen=True)
class UdFrameResult:
    report: Optional[RssReport]
    disrupted_s: float
    completed: Optional[CompletedSwitch]


@dataclass(frozen=True)
class HandoverEvent:
    device_id: str
    superframe_index: int
    scheme: str
    from_ap: Optional[int]
    to_ap: int
    delay_s: float
    disruption_s: float
    outcome: str


def _argmax_reading(readings: Dict[int, float]) -> Optional[int]:
    best_id, best_v = None, 0.0
    for ap_id in sorted(readings):  # ascending id: ties keep the lowest id
        v = readings[ap_id]
        if v > best_v:
            best_id, best_v = ap_id, v
    return best_id


def _frames(duration_s: float, dt1: float) -> int:
    return max(1, int(math.ceil(duration_s / dt1 - 1e-12)))


def ud_step(
    state: UdState,
    superframe_index: int,
    readings: Dict[int, float],
    command: Optional[SwitchCommand],
    sf: SuperframeConfig,
    delays: DelayParams,
    fused_single: bool = False,
) -> UdFrameResult:
    """Advance one user-device state machine by one superframe (in place).

    readings are photocurrents clamped at zero, one per AP.
    """
    dt1 = sf.duration_s
    disrupted = 0.0
    completed: Optional[CompletedSwitch] = None
    report: Optional[RssReport] = None

    if state.scheme == SCHEME_PREDICTIVE:
        # measurement report rides every inactive portion
        report = RssReport(
            device_id=state.device_id,
            superframe_index=superframe_index,
            readings=tuple(sorted(readings.items())),
        )
        if command is not None and command.associate_only and state.serving_ap is None:
            state.serving_ap = command.target_ap
            state.phase = PHASE_ASSOCIATED
            command = None
        if (
            command is not None
            and state.phase != PHASE_SWITCHING
            and command.target_ap != state.serving_ap
        ):
            dt2 = predictive_delay(delays, fused_single)
            state.pending_from = state.serving_ap
            state.pending_target = command.target_ap
            state.pending_delay_s = dt2
            state.pending_disruption_s = max(0.0, dt2 - dt1)
            state.disruption_remaining_s = state.pending_disruption_s
            state.timer = _frames(dt2, dt1)
            state.phase = PHASE_SWITCHING
        if state.phase == PHASE_SWITCHING:
            disrupted = min(dt1, state.disruption_remaining_s)
            state.disruption_remaining_s -= disrupted
            state.timer -= 1
            if state.timer <= 0:
                completed = CompletedSwitch(
                    from_ap=state.pending_from,
                    to_ap=state.pending_target,
                    delay_s=state.pending_delay_s,
                    disruption_s=state.pending_disruption_s,
                )
                state.serving_ap = state.pending_target
                state.pending_from = state.pending_target = None
                state.phase = PHASE_ASSOCIATED
        elif state.serving_ap is not None:
            if readings.get(state.serving_ap, 0.0) <= 0.0:
                state.phase = PHASE_DISCONNECTED
            else:
                state.phase = PHASE_ASSOCIATED
        return UdFrameResult(report=report, disrupted_s=disrupted, completed=completed)

    # traditional scheme
    if state.serving_ap is None or state.phase == PHASE_DISCONNECTED:
        best = _argmax_reading(readings)
        if best is not None:
            state.serving_ap = best
            state.phase = PHASE_ASSOCIATED
        else:
            state.serving_ap = None
            state.phase = PHASE_DISCONNECTED
    elif state.phase == PHASE_ASSOCIATED:
        rss = readings.get(state.serving_ap, 0.0)
        if rss <= 0.0:
            state.phase = PHASE_DISCONNECTED
        elif rss < state.rss_threshold_a:
            state.phase = PHASE_SCANNING
            state.timer = _frames(delays.t_scan + delays.t_decision, dt1)
    elif state.phase == PHASE_SCANNING:
        state.timer -= 1
        if state.timer <= 0:
            target = _argmax_reading(readings)
            if target is None:
                state.phase = PHASE_DISCONNECTED
                state.serving_ap = None
            elif target == state.serving_ap:
                state.phase = PHASE_ASSOCIATED
            else:
                state.pending_from = state.serving_ap
                state.pending_target = target
                state.pending_delay_s = traditional_delay(delays)
                state.pending_disruption_s = (
                    delays.t_discon + delays.t_linksw + delays.t_linkasso + delays.t_sync
                )
                state.disruption_remaining_s = state.pending_disruption_s
                state.timer = _frames(state.pending_disruption_s, dt1)
                state.phase = PHASE_SWITCHING
    elif state.phase == PHASE_SWITCHING:
        disrupted = min(dt1, state.disruption_remaining_s)
        state.disruption_remaining_s -= disrupted
        state.timer -= 1
        if state.timer <= 0:
            completed = CompletedSwitch(
                from_ap=state.pending_from,
                to_ap=state.pending_target,
                delay_s=state.pending_delay_s,
                disruption_s=state.pending_disruption_s,
            )
            state.serving_ap = state.pending_target
            state.pending_from = state.pending_target = None
            state.phase = PHASE_ASSOCIATED
    return UdFrameResult(report=report, disrupted_s=disrupted, completed=completed)


@dataclass(frozen=True)
class IssuedSwitch:
    device_id: str
    superframe_index: int
    from_ap: Optional[int]
    to_ap: int
    predicted_xy: Vec2


class Coordinator:
    """Central controller for the predictive scheme: localization, path
    history, extrapolation, and best-AP lookup."""

    def __init__(
        self,
        scenario: Scenario,
        db: BestApDatabase,
        alpha: float = 0.5,
        k_history: Optional[int] = None,
        use_all_anchors: bool = False,
        path_capacity: int = 64,
    ):
        self.scenario = scenario
        self.db = db
        self.alpha = alpha
        self.k_history = k_history
        self.use_all_anchors = use_all_anchors
        self.path_capacity = path_capacity
        self.paths: Dict[str, PathReport] = {}
        self.serving: Dict[str, int] = {}
        self.last_estimate: Dict[str, Vec2] = {}
        self.last_prediction: Dict[str, Vec2] = {}

    def _predict(self, path: PathReport) -> Optional[Vec2]:
        try:
            if self.k_history is not None and len(path.entries) >= self.k_history:
                return predict_next_k(path, self.k_history)
            return predict_next(path, self.alpha)
        except Exception:
            return None

    def step(
        self, superframe_index: int, reports: List[RssReport]
    ) -> Tuple[Dict[str, SwitchCommand], List[IssuedSwitch]]:
        commands: Dict[str, SwitchCommand] = {}
        issued: List[IssuedSwitch] = []
        for report in sorted(reports, key=lambda r: r.device_id):
            dev = report.device_id
            path = self.paths.setdefault(
                dev, PathReport(device_id=dev, capacity=self.path_capacity)
            )
            try:
                est = estimate_position(report, self.scenario, self.use_all_anchors)
            except LocalizationError:
                # serve by the last known estimate; no prediction this frame
                continue
            self.last_estimate[dev] = est.xy
            path.append(superframe_index, est.xy)
            predicted = self._predict(path)
            if predicted is None:
                predicted = est.xy
            predicted = self.scenario.room.clamp_xy(predicted)
            self.last_prediction[dev] = predicted
            best = lookup_best_ap(self.db, predicted)
            serving = self.serving.get(dev)
            if serving is None:
                commands[dev] = SwitchCommand(
                    device_id=dev,
                    target_ap=best,
                    predicted_xy=predicted,
                    associate_only=True,
                )
                self.serving[dev] = best
            elif best != serving:
                commands[dev] = SwitchCommand(
                    device_id=dev, target_ap=best, predicted_xy=predicted
                )
                issued.append(
                    IssuedSwitch(
                        device_id=dev,
                        superframe_index=superframe_index,
                        from_ap=serving,
                        to_ap=best,
                        predicted_xy=predicted,
                    )
                )
                self.serving[dev] = best
        return commands, issued


@dataclass(frozen=True)
class OutcomeTruth:
    best_at_arrival: int
    within_target_coverage: bool
    best_after_arrival: Optional[int]  # one superframe later; None if run ended


def classify_outcome(
    event: HandoverEvent, truth: OutcomeTruth, sf: SuperframeConfig
) -> str:
    """Success / failure / unnecessary classification against ground truth."""
    if event.to_ap != truth.best_at_arrival or not truth.within_target_coverage:
        return OUTCOME_FAILURE
    if truth.best_after_arrival is not None and truth.best_after_arrival == event.from_ap:
        return OUTCOME_UNNECESSARY
    return OUTCOME_SUCCESS


EVENT_CSV_HEADER = "device_id,superframe_index,scheme,from_ap,to_ap,delay_s,disruption_s,outcome"


def events_to_csv(events: List[HandoverEvent], comment: Optional[str] = None) -> str:
    lines: List[str] = []
    if comment:
        lines.append(f"# {comment}")
    lines.append(EVENT_CSV_HEADER)
    for e in events:
        lines.append(
            f"{e.device_id},{e.superframe_index},{e.scheme},"
            f"{'' if e.from_ap is None else e.from_ap},{e.to_ap},"
            f"{e.delay_s:.9g},{e.disruption_s:.9g},{e.outcome}"
        )
    return "\n".join(lines) + "\n"
