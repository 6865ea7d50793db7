import math

import pytest

from vlcsim.mobility import (
    ConnectivitySample,
    MobilityError,
    Trajectory,
    cell_gain,
    export_trajectory_csv,
    position_at,
)
from vlcsim.scenario import AccessPoint


def line(a, b, v=1.0):
    return Trajectory(model="line", speed_mps=v, waypoints=[a, b])


class TestPositionAt:
    def test_linear_motion(self):
        traj = line((-5.0, 0.0), (5.0, 0.0))
        assert position_at(traj, 3.0) == pytest.approx((-2.0, 0.0))

    def test_zero_speed_is_stationary(self):
        traj = Trajectory(model="line", speed_mps=0.0, waypoints=[(1.0, 2.0), (5.0, 5.0)])
        for t in (0.0, 1.0, 100.0):
            assert position_at(traj, t) == (1.0, 2.0)

    def test_stops_at_final_waypoint(self):
        traj = line((-5.0, 0.0), (5.0, 0.0))
        assert position_at(traj, 50.0) == (5.0, 0.0)

    def test_multi_segment_waypoints(self):
        traj = Trajectory(
            model="waypoints", speed_mps=2.0, waypoints=[(0.0, 0.0), (4.0, 0.0), (4.0, 4.0)]
        )
        assert position_at(traj, 1.0) == pytest.approx((2.0, 0.0))
        assert position_at(traj, 3.0) == pytest.approx((4.0, 2.0))

    def test_negative_time_rejected(self):
        with pytest.raises(MobilityError, match="t must be"):
            position_at(line((0, 0), (1, 0)), -0.1)

    def test_random_waypoint_deterministic(self):
        kw = dict(model="random_waypoint", speed_mps=1.5, seed=21, bounds=(-6, 6, -6, 6))
        a = [position_at(Trajectory(**kw), t) for t in [0.0, 2.0, 5.0, 17.0]]
        b = [position_at(Trajectory(**kw), t) for t in [0.0, 2.0, 5.0, 17.0]]
        assert a == b

    def test_random_waypoint_stays_in_bounds(self):
        traj = Trajectory(
            model="random_waypoint", speed_mps=2.0, seed=4, bounds=(-6, 6, -6, 6)
        )
        for t in range(0, 300, 7):
            x, y = position_at(traj, float(t))
            assert -6 <= x <= 6 and -6 <= y <= 6

    def test_random_waypoint_requires_seed_and_bounds(self):
        with pytest.raises(MobilityError, match="seed"):
            Trajectory(model="random_waypoint", speed_mps=1.0, bounds=(-6, 6, -6, 6))
        with pytest.raises(MobilityError, match="bounds"):
            Trajectory(model="random_waypoint", speed_mps=1.0, seed=1)

    def test_unknown_model(self):
        with pytest.raises(MobilityError, match="unknown mobility model"):
            Trajectory(model="levy_flight", speed_mps=1.0, waypoints=[(0, 0)])

    def test_lipschitz_in_time(self):
        traj = Trajectory(
            model="waypoints", speed_mps=3.0,
            waypoints=[(-5.0, -5.0), (5.0, -5.0), (5.0, 5.0), (-5.0, 5.0)],
        )
        dt = 0.05
        prev = position_at(traj, 0.0)
        for k in range(1, 200):
            cur = position_at(traj, k * dt)
            assert math.dist(prev, cur) <= traj.speed_mps * dt + 1e-12
            prev = cur


def crossing_samples(ap_x=0.0, v=1.0, dt=0.1, duration=12.0, ap_id=1):
    """Synthetic connectivity log for a straight crossing through a cell center.

    The device runs x = -5 -> +7 along y = 0; each sample is one superframe,
    attributed at its midpoint position.
    """
    samples = []
    n = int(round(duration / dt))
    for k in range(n):
        t = k * dt
        x = -5.0 + v * (t + dt / 2.0)
        samples.append(ConnectivitySample(t=t, connected_s=dt, xy=(x, 0.0), ap_id=ap_id))
    return samples


class TestCellGain:
    AP = AccessPoint(id=1, pos_xy=(0.0, 0.0))  # r = 4 m, D = 10 Mbit/s defaults

    def test_full_chord_crossing(self):
        # chord length 2r = 8 m at 1 m/s -> 8 s connected -> 80 Mbit
        gain = cell_gain(crossing_samples(), self.AP)
        assert gain == pytest.approx(8.0 * 10e6, rel=1e-12)

    def test_never_entering_cell(self):
        far_ap = AccessPoint(id=2, pos_xy=(5.0, 5.0))
        samples = [
            ConnectivitySample(t=0.0, connected_s=0.1, xy=(-5.0, -5.0), ap_id=2)
        ]
        assert cell_gain(samples, far_ap) == 0.0

    def test_disruption_subtracts(self):
        samples = crossing_samples()
        # one 60 ms disruption in a mid-cell superframe
        idx = next(i for i, s in enumerate(samples) if abs(s.xy[0]) < 0.1)
        s = samples[idx]
        samples[idx] = ConnectivitySample(t=s.t, connected_s=s.connected_s - 0.06,
                                          xy=s.xy, ap_id=s.ap_id)
        gain = cell_gain(samples, self.AP)
        assert gain == pytest.approx(80e6 - 0.6e6, rel=1e-9)

    def test_only_serving_ap_counts(self):
        samples = crossing_samples(ap_id=2)
        assert cell_gain(samples, self.AP) == 0.0

    def test_gain_conserves_connected_time(self):
        aps = [AccessPoint(id=1, pos_xy=(0.0, 0.0)), AccessPoint(id=2, pos_xy=(5.0, 0.0))]
        samples = []
        for k in range(100):
            x = -4.0 + k * 0.1
            ap_id = 1 if x < 2.5 else 2
            samples.append(ConnectivitySample(t=k * 0.1, connected_s=0.1, xy=(x, 0.0), ap_id=ap_id))
        in_cell = sum(
            s.connected_s
            for s in samples
            for ap in aps
            if s.ap_id == ap.id and math.dist(s.xy, ap.pos_xy) <= ap.coverage_radius_m
        )
        total = sum(cell_gain(samples, ap) for ap in aps)
        assert total == pytest.approx(10e6 * in_cell, rel=1e-12)


class TestTrajectoryCsv:
    def test_format_and_rows(self):
        traj = line((-5.0, 0.0), (5.0, 0.0))
        csv = export_trajectory_csv(traj, duration_s=1.0, step_s=0.1, comment="config_hash=x")
        lines = csv.strip().split("\n")
        assert lines[0] == "# config_hash=x"
        assert lines[1] == "t,x,y"
        assert len(lines) == 2 + 11
        t, x, y = lines[2].split(",")
        assert float(t) == 0.0 and float(x) == -5.0 and float(y) == 0.0
