import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vlcsim.localization import noiseless_report
from vlcsim.prediction import build_database
from vlcsim.protocol import (
    EVENT_CSV_HEADER,
    OUTCOME_FAILURE,
    OUTCOME_SUCCESS,
    OUTCOME_UNNECESSARY,
    PHASE_ASSOCIATED,
    PHASE_DISCONNECTED,
    PHASE_SCANNING,
    PHASE_SWITCHING,
    SCHEME_PREDICTIVE,
    SCHEME_TRADITIONAL,
    Coordinator,
    DelayParams,
    HandoverEvent,
    OutcomeTruth,
    SuperframeConfig,
    SwitchCommand,
    UdState,
    classify_outcome,
    events_to_csv,
    predictive_delay,
    traditional_delay,
    ud_step,
)

SF = SuperframeConfig()
DELAYS = DelayParams()


class TestDelays:
    def test_traditional_sum(self):
        assert traditional_delay(DELAYS) == pytest.approx(0.06, rel=1e-12)

    def test_traditional_zero(self):
        assert traditional_delay(DelayParams(0, 0, 0, 0, 0, 0)) == 0.0

    def test_traditional_single_term(self):
        p = DelayParams(t_scan=0.005, t_decision=0, t_discon=0, t_linksw=0,
                        t_linkasso=0, t_sync=0)
        assert traditional_delay(p) == pytest.approx(0.005, rel=1e-12)

    def test_predictive_reference(self):
        assert predictive_delay(DELAYS) == pytest.approx(0.03, rel=1e-12)

    def test_predictive_ignores_scan(self):
        p = DelayParams(t_scan=1.0, t_decision=0, t_discon=0, t_linksw=0,
                        t_linkasso=0, t_sync=0)
        assert predictive_delay(p) == 0.0

    def test_predictive_fused_single(self):
        p = DelayParams(t_discon=0.004, t_linksw=0.02, t_linkasso=0.01, t_sync=0.01)
        assert predictive_delay(p) == pytest.approx(0.04, rel=1e-12)
        assert predictive_delay(p, fused_single=True) == pytest.approx(0.024, rel=1e-12)

    def test_predictive_never_exceeds_traditional(self):
        rng = np.random.default_rng(13)
        for _ in range(10_000):
            p = DelayParams(*rng.uniform(0.0, 0.05, size=6))
            assert predictive_delay(p) <= traditional_delay(p)
            if p.t_scan + p.t_decision > 0 or min(p.t_discon, p.t_linksw) > 0:
                assert predictive_delay(p) < traditional_delay(p)

    @given(
        st.lists(st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
                 min_size=6, max_size=6)
    )
    def test_delay_inequality_property(self, components):
        p = DelayParams(*components)
        assert predictive_delay(p) <= traditional_delay(p)
        assert predictive_delay(p, fused_single=True) <= predictive_delay(p)


def predictive_state(serving=9):
    return UdState(device_id="ud1", scheme=SCHEME_PREDICTIVE,
                   serving_ap=serving, phase=PHASE_ASSOCIATED)


def traditional_state(serving=9, threshold=1e-3):
    return UdState(device_id="ud1", scheme=SCHEME_TRADITIONAL,
                   rss_threshold_a=threshold, serving_ap=serving,
                   phase=PHASE_ASSOCIATED)


READINGS = {9: 2e-3, 6: 1e-3, 5: 5e-4}


class TestUdStepPredictive:
    def test_steady_state_emits_report(self):
        st = predictive_state()
        res = ud_step(st, 4, READINGS, None, SF, DELAYS)
        assert st.phase == PHASE_ASSOCIATED and st.serving_ap == 9
        assert res.report is not None
        assert res.report.superframe_index == 4
        assert dict(res.report.readings) == READINGS
        assert res.completed is None and res.disrupted_s == 0.0

    def test_switch_completes_within_superframe(self):
        # dt2 = 30 ms fits inside dt1 = 100 ms: zero disruption
        st = predictive_state()
        cmd = SwitchCommand(device_id="ud1", target_ap=6, predicted_xy=(3.0, 0.0))
        res = ud_step(st, 0, READINGS, cmd, SF, DELAYS)
        assert st.serving_ap == 6 and st.phase == PHASE_ASSOCIATED
        assert res.completed is not None
        assert res.completed.from_ap == 9 and res.completed.to_ap == 6
        assert res.completed.delay_s == pytest.approx(0.03, rel=1e-12)
        assert res.completed.disruption_s == 0.0
        assert res.disrupted_s == 0.0

    def test_long_switch_spills_into_next_superframe(self):
        slow = DelayParams(*(0.05,) * 6)  # dt2 = 150 ms > dt1
        st = predictive_state()
        cmd = SwitchCommand(device_id="ud1", target_ap=6, predicted_xy=(3.0, 0.0))
        r0 = ud_step(st, 0, READINGS, cmd, SF, slow)
        assert st.phase == PHASE_SWITCHING and r0.completed is None
        r1 = ud_step(st, 1, READINGS, None, SF, slow)
        assert st.phase == PHASE_ASSOCIATED and st.serving_ap == 6
        assert r1.completed.disruption_s == pytest.approx(0.05, rel=1e-12)
        assert r0.disrupted_s + r1.disrupted_s == pytest.approx(0.05, rel=1e-12)

    def test_bootstrap_association(self):
        st = UdState(device_id="ud1", scheme=SCHEME_PREDICTIVE)
        cmd = SwitchCommand(device_id="ud1", target_ap=9, predicted_xy=(0.0, 0.0),
                            associate_only=True)
        res = ud_step(st, 0, READINGS, cmd, SF, DELAYS)
        assert st.serving_ap == 9 and st.phase == PHASE_ASSOCIATED
        assert res.completed is None  # bootstrap is not a handover

    def test_command_to_current_ap_ignored(self):
        st = predictive_state()
        cmd = SwitchCommand(device_id="ud1", target_ap=9, predicted_xy=(0.0, 0.0))
        res = ud_step(st, 0, READINGS, cmd, SF, DELAYS)
        assert st.phase == PHASE_ASSOCIATED and res.completed is None

    def test_zero_serving_rss_disconnects(self):
        st = predictive_state()
        res = ud_step(st, 0, {9: 0.0, 6: 1e-3}, None, SF, DELAYS)
        assert st.phase == PHASE_DISCONNECTED
        assert res.report is not None  # still reports


class TestUdStepTraditional:
    def test_no_periodic_report(self):
        st = traditional_state()
        res = ud_step(st, 0, READINGS, None, SF, DELAYS)
        assert res.report is None

    def test_above_threshold_steady(self):
        st = traditional_state()
        ud_step(st, 0, READINGS, None, SF, DELAYS)
        assert st.phase == PHASE_ASSOCIATED and st.serving_ap == 9

    def test_below_threshold_starts_scanning(self):
        st = traditional_state(threshold=5e-3)
        ud_step(st, 0, READINGS, None, SF, DELAYS)
        assert st.phase == PHASE_SCANNING

    def test_full_handover_pipeline(self):
        st = traditional_state(threshold=5e-3)
        fading = {9: 4e-4, 6: 2e-3, 5: 5e-4}
        ud_step(st, 0, fading, None, SF, DELAYS)          # -> scanning
        res = ud_step(st, 1, fading, None, SF, DELAYS)    # scan+decide -> switching
        assert st.phase == PHASE_SWITCHING and res.completed is None
        res = ud_step(st, 2, fading, None, SF, DELAYS)
        assert st.phase == PHASE_ASSOCIATED and st.serving_ap == 6
        assert res.completed.delay_s == pytest.approx(0.06, rel=1e-12)
        assert res.completed.disruption_s == pytest.approx(0.04, rel=1e-12)

    def test_scan_can_reaffirm_serving_ap(self):
        st = traditional_state(threshold=5e-3)
        ud_step(st, 0, READINGS, None, SF, DELAYS)
        assert st.phase == PHASE_SCANNING
        res = ud_step(st, 1, READINGS, None, SF, DELAYS)
        assert st.phase == PHASE_ASSOCIATED and st.serving_ap == 9
        assert res.completed is None

    def test_all_zero_readings_disconnects(self):
        st = traditional_state()
        ud_step(st, 0, {9: 0.0, 6: 0.0}, None, SF, DELAYS)
        assert st.phase == PHASE_DISCONNECTED
        # recovers once any AP is audible again
        ud_step(st, 1, READINGS, None, SF, DELAYS)
        assert st.phase == PHASE_ASSOCIATED and st.serving_ap == 9

    def test_reassociates_from_disconnected(self):
        st = UdState(device_id="ud1", scheme=SCHEME_TRADITIONAL)
        ud_step(st, 0, READINGS, None, SF, DELAYS)
        assert st.phase == PHASE_ASSOCIATED and st.serving_ap == 9


@pytest.fixture(scope="module")
def coordinator(scenario):
    return lambda **kw: Coordinator(
        scenario, build_database(scenario, 0.5), **kw
    )


class TestCoordinator:
    def run_walk(self, scenario, coord, positions):
        issued_all = []
        for k, xy in enumerate(positions):
            report = noiseless_report("ud1", k, xy, scenario)
            _, issued = coord.step(k, [report])
            issued_all.extend(issued)
        return issued_all

    def test_stationary_device_never_switches(self, scenario, coordinator):
        coord = coordinator(alpha=1.0)
        issued = self.run_walk(scenario, coord, [(0.0, 0.0)] * 50)
        assert issued == []
        assert coord.serving["ud1"] == 9

    def test_crossing_issues_single_switch(self, scenario, coordinator):
        # (0,0) -> (5,0) at 1 m/s, 0.1 s superframes: boundary at x = 2.5
        coord = coordinator(alpha=1.0)
        positions = [(min(0.1 * k, 5.0), 0.0) for k in range(60)]
        issued = self.run_walk(scenario, coord, positions)
        assert len(issued) == 1
        sw = issued[0]
        assert sw.from_ap == 9 and sw.to_ap == 6
        assert sw.superframe_index <= 25  # at or before the crossing superframe

    def test_two_devices_independent(self, scenario, coordinator):
        coord_pair = coordinator(alpha=1.0)
        coord_solo = coordinator(alpha=1.0)
        walk = [(min(0.1 * k, 5.0), 0.0) for k in range(60)]
        solo_issued = []
        pair_issued = []
        for k in range(60):
            r1 = noiseless_report("ud1", k, walk[k], scenario)
            r2 = noiseless_report("ud2", k, (-4.0, -4.0), scenario)
            _, i_pair = coord_pair.step(k, [r2, r1])
            _, i_solo = coord_solo.step(k, [r1])
            pair_issued.extend(e for e in i_pair if e.device_id == "ud1")
            solo_issued.extend(i_solo)
        assert [(e.superframe_index, e.from_ap, e.to_ap) for e in pair_issued] == [
            (e.superframe_index, e.from_ap, e.to_ap) for e in solo_issued
        ]

    def test_localization_failure_skips_device(self, scenario, coordinator):
        from vlcsim.localization import RssReport

        coord = coordinator()
        bad = RssReport(device_id="ud1", superframe_index=0, readings=((9, 1e-3),))
        commands, issued = coord.step(0, [bad])
        assert commands == {} and issued == []
        assert "ud1" not in coord.serving

    def test_k_history_mode(self, scenario, coordinator):
        coord = coordinator(k_history=3)
        positions = [(min(0.1 * k, 5.0), 0.0) for k in range(60)]
        issued = self.run_walk(scenario, coord, positions)
        assert len(issued) == 1 and issued[0].to_ap == 6


class TestClassifyOutcome:
    def event(self, from_ap=9, to_ap=6, delay=0.03, disruption=0.0):
        return HandoverEvent(
            device_id="ud1", superframe_index=10, scheme=SCHEME_PREDICTIVE,
            from_ap=from_ap, to_ap=to_ap, delay_s=delay, disruption_s=disruption,
            outcome="",
        )

    def test_success(self):
        truth = OutcomeTruth(best_at_arrival=6, within_target_coverage=True,
                             best_after_arrival=6)
        assert classify_outcome(self.event(), truth, SF) == OUTCOME_SUCCESS

    def test_failure_wrong_target(self):
        truth = OutcomeTruth(best_at_arrival=9, within_target_coverage=True,
                             best_after_arrival=9)
        assert classify_outcome(self.event(), truth, SF) == OUTCOME_FAILURE

    def test_failure_out_of_coverage(self):
        truth = OutcomeTruth(best_at_arrival=6, within_target_coverage=False,
                             best_after_arrival=6)
        assert classify_outcome(self.event(), truth, SF) == OUTCOME_FAILURE

    def test_unnecessary_ping_pong(self):
        truth = OutcomeTruth(best_at_arrival=6, within_target_coverage=True,
                             best_after_arrival=9)
        assert classify_outcome(self.event(), truth, SF) == OUTCOME_UNNECESSARY

    def test_run_end_counts_as_success(self):
        truth = OutcomeTruth(best_at_arrival=6, within_target_coverage=True,
                             best_after_arrival=None)
        assert classify_outcome(self.event(), truth, SF) == OUTCOME_SUCCESS


class TestEventCsv:
    def test_header_and_rows(self):
        e = HandoverEvent(
            device_id="ud1", superframe_index=25, scheme=SCHEME_PREDICTIVE,
            from_ap=9, to_ap=6, delay_s=0.03, disruption_s=0.0,
            outcome=OUTCOME_SUCCESS,
        )
        csv = events_to_csv([e], comment="config_hash=abc")
        lines = csv.strip().split("\n")
        assert lines[0] == "# config_hash=abc"
        assert lines[1] == EVENT_CSV_HEADER
        assert lines[2] == "ud1,25,predictive,9,6,0.03,0,success"

    def test_bootstrap_from_ap_empty(self):
        e = HandoverEvent(
            device_id="ud1", superframe_index=0, scheme=SCHEME_PREDICTIVE,
            from_ap=None, to_ap=9, delay_s=0.0, disruption_s=0.0,
            outcome=OUTCOME_SUCCESS,
        )
        row = events_to_csv([e]).strip().split("\n")[1]
        assert row.startswith("ud1,0,predictive,,9,")
