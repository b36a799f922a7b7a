"""Integrator, blow-up detection, and the concavity monitor."""

import numpy as np
import pytest

from conftest import gaussian_field
from kglab import (
    BlowUpDetected,
    Completed,
    CouplingParams,
    FunctionalSnapshot,
    RadialField,
    SimOptions,
    State,
    StepFailure,
    build_grid,
    inner_l2,
    levine_indicator,
    levine_met,
    levine_streak_start,
    rhs,
    sim_result_to_json,
    simulate,
    step_leapfrog,
)


def zero_state(g, t=0.0):
    z = RadialField.zeros(g)
    return State(u=z, ut=z, v=z, vt=z, t=t)


def gaussian_state(g, amp, both=True):
    f = gaussian_field(g, amp=amp)
    z = RadialField.zeros(g)
    return State(u=f, ut=z, v=f if both else z, vt=z)


# ---------------------------------------------------------------------
# Options validation
# ---------------------------------------------------------------------

class TestSimOptions:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            SimOptions(dt=0.0, t_end=1.0)
        with pytest.raises(ValueError):
            SimOptions(dt=0.1, t_end=-1.0)
        with pytest.raises(ValueError):
            SimOptions(dt=0.1, t_end=1.0, sup_threshold=0.5)
        with pytest.raises(ValueError):
            SimOptions(dt=0.1, t_end=1.0, dt_min=0.2)
        with pytest.raises(ValueError):
            SimOptions(dt=0.1, t_end=1.0, snapshot_every=0)

    def test_dt_min_default(self):
        assert SimOptions(dt=0.128, t_end=1.0).resolved_dt_min == 0.128 / 1024.0
        assert SimOptions(dt=0.1, t_end=1.0, dt_min=0.01).resolved_dt_min == 0.01


# ---------------------------------------------------------------------
# Right-hand side
# ---------------------------------------------------------------------

class TestRhs:
    def test_zero_state(self):
        g = build_grid(10.0, 64)
        au, av = rhs(zero_state(g), CouplingParams(1.0))
        assert np.all(au.values == 0.0)
        assert np.all(av.values == 0.0)

    def test_cubic_terms_cancel_at_beta_minus_one(self):
        # u = v and beta = -1: u^3 + beta v^2 u = 0, so the acceleration
        # reduces to the linear part up to round-off of the cubic term.
        g = build_grid(10.0, 128)
        f = gaussian_field(g, amp=2.0)
        s = State(u=f, ut=RadialField.zeros(g), v=f, vt=RadialField.zeros(g))
        au, _ = rhs(s, CouplingParams(-1.0))
        from kglab import laplacian3d

        linear = laplacian3d(f).values - f.values
        assert np.allclose(au.values, linear, rtol=0.0, atol=1e-13)

    def test_field_swap_symmetry(self):
        g = build_grid(10.0, 64)
        rng = np.random.default_rng(71)
        a = RadialField(g, rng.standard_normal(g.n))
        b = RadialField(g, rng.standard_normal(g.n))
        z = RadialField.zeros(g)
        p = CouplingParams(0.4)
        au1, av1 = rhs(State(u=a, ut=z, v=b, vt=z), p)
        au2, av2 = rhs(State(u=b, ut=z, v=a, vt=z), p)
        assert np.array_equal(au1.values, av2.values)
        assert np.array_equal(av1.values, au2.values)


# ---------------------------------------------------------------------
# Single step
# ---------------------------------------------------------------------

class TestStepLeapfrog:
    def test_zero_state_stays_zero(self):
        g = build_grid(10.0, 64)
        s = step_leapfrog(zero_state(g), 0.01, CouplingParams(1.0))
        assert s.t == 0.01
        assert np.all(s.u.values == 0.0)
        assert np.all(s.vt.values == 0.0)

    def test_rejects_zero_dt(self):
        g = build_grid(10.0, 64)
        with pytest.raises(ValueError):
            step_leapfrog(zero_state(g), 0.0, CouplingParams(1.0))

    def test_reversibility(self):
        # 100 steps forward then 100 backward; measured 2.5e-14
        # relative round-trip error, well under the 1e-8 contract.
        g = build_grid(15.0, 256)
        p = CouplingParams(1.0)
        s0 = gaussian_state(g, amp=0.1)
        s = s0
        for _ in range(100):
            s = step_leapfrog(s, 0.01, p)
        for _ in range(100):
            s = step_leapfrog(s, -0.01, p)
        err = max(
            np.max(np.abs(s.u.values - s0.u.values)),
            np.max(np.abs(s.ut.values - s0.ut.values)),
            np.max(np.abs(s.v.values - s0.v.values)),
            np.max(np.abs(s.vt.values - s0.vt.values)),
        )
        assert err <= 1e-8 * 0.1

    def test_linear_dispersion_relation(self):
        # Amplitude 1e-6 single mode sin(kr)/r: the cubic terms are
        # negligible and the mode oscillates at omega^2 = k^2 + 1.
        # Frequency measured from zero crossings of the mode projection;
        # measured 7.9e-5 relative, contract 1%.
        g = build_grid(30.0, 512)
        k = 10.0 * np.pi / g.r_max
        mode = RadialField(g, np.sin(k * g.nodes) / g.nodes)
        z = RadialField.zeros(g)
        s = State(u=RadialField(g, 1e-6 * mode.values), ut=z, v=z, vt=z)
        p = CouplingParams(1.0)
        dt = 5e-3
        ts, amps = [], []
        for _ in range(2000):
            s = step_leapfrog(s, dt, p)
            ts.append(s.t)
            amps.append(inner_l2(s.u, mode))
        ts, amps = np.array(ts), np.array(amps)
        idx = np.where(np.diff(np.sign(amps)) != 0)[0]
        crossings = ts[idx] - amps[idx] * (ts[idx + 1] - ts[idx]) / (amps[idx + 1] - amps[idx])
        assert len(crossings) >= 4
        omega = np.pi / np.mean(np.diff(crossings))
        assert omega == pytest.approx(np.sqrt(k * k + 1.0), rel=1e-2)


# ---------------------------------------------------------------------
# Full simulation
# ---------------------------------------------------------------------

class TestSimulate:
    def test_zero_data_completes(self):
        g = build_grid(10.0, 64)
        res = simulate(zero_state(g), CouplingParams(1.0), SimOptions(dt=0.01, t_end=1.0))
        assert isinstance(res.outcome, Completed)
        assert res.outcome.t_end == pytest.approx(1.0)
        assert all(s.y == 0.0 for s in res.snapshots)
        assert res.energy_drift == 0.0
        assert res.trusted

    def test_snapshot_times_increase_and_cover_endpoints(self):
        g = build_grid(15.0, 128)
        res = simulate(
            gaussian_state(g, amp=0.01),
            CouplingParams(1.0),
            SimOptions(dt=0.01, t_end=0.5, snapshot_every=7),
        )
        times = [s.t for s in res.snapshots]
        assert times[0] == 0.0
        assert times[-1] == pytest.approx(0.5, abs=1e-9)
        assert all(b > a for a, b in zip(times, times[1:]))

    def test_energy_drift_small_and_second_order(self):
        # Bounded run: drift measured 1.9e-9 at dt=2e-3 and the
        # dt-halving ratio measured 4.0000 (second-order integrator).
        g = build_grid(15.0, 256)
        p = CouplingParams(1.0)

        def drift(dt):
            res = simulate(
                gaussian_state(g, amp=1e-2),
                p,
                SimOptions(dt=dt, t_end=2.0, snapshot_every=20),
            )
            assert isinstance(res.outcome, Completed)
            return res.energy_drift

        d1, d2 = drift(2e-3), drift(1e-3)
        assert d1 <= 5e-9
        assert 3.5 <= d1 / d2 <= 4.5

    def test_negative_energy_gaussian_blows_up(self):
        # Amplitude-4 equal fields have E = -52.2 < 0 at beta = 1; the
        # quartic dominates and the run must end in finite time.
        g = build_grid(20.0, 512)
        p = CouplingParams(1.0)
        res = simulate(
            gaussian_state(g, amp=4.0),
            p,
            SimOptions(dt=0.25 * g.dr, t_end=10.0, snapshot_every=4),
        )
        assert isinstance(res.outcome, BlowUpDetected)
        assert 0.0 < res.outcome.t_star < 10.0
        assert res.trusted
        last = res.snapshots[-1]
        assert max(last.sup_u, last.sup_v) > 1e6

    def test_blowup_mass_monotone_while_nehari_negative(self):
        # K(0) < 0 and K stays negative: d2y = 2 kin - 2K > 0, so dy
        # increases and y is convex increasing at snapshot resolution.
        g = build_grid(20.0, 512)
        res = simulate(
            gaussian_state(g, amp=4.0),
            CouplingParams(1.0),
            SimOptions(dt=0.25 * g.dr, t_end=10.0, snapshot_every=2),
        )
        stable = res.stable_snapshots
        assert all(s.K < 0.0 for s in stable)
        dys = [s.dy for s in stable]
        assert all(b > a for a, b in zip(dys, dys[1:]))
        ys = [s.y for s in stable]
        assert all(b > a for a, b in zip(ys[1:], ys[2:]))

    def test_levine_monitor_positive_on_blowup_tail(self):
        g = build_grid(20.0, 512)
        res = simulate(
            gaussian_state(g, amp=4.0),
            CouplingParams(1.0),
            SimOptions(dt=0.25 * g.dr, t_end=10.0, snapshot_every=4),
        )
        stable = list(res.stable_snapshots)
        assert levine_met(stable, gamma=1.5)
        assert len(stable) - levine_streak_start(stable, 1.5) >= 3

    def test_step_failure_without_threshold_evidence(self):
        # With the amplitude trigger parked at 1e300 the overflow hits
        # non-finite values before any threshold crossing; the halving
        # cascade exhausts and the run reports a step failure.
        g = build_grid(20.0, 512)
        res = simulate(
            gaussian_state(g, amp=4.0),
            CouplingParams(1.0),
            SimOptions(dt=0.25 * g.dr, t_end=10.0, sup_threshold=1e300),
        )
        assert isinstance(res.outcome, StepFailure)
        assert res.outcome.reason

    def test_wall_support_marks_run_untrusted(self):
        g = build_grid(20.0, 256)
        f = gaussian_field(g, amp=1e-4, width=1.0, center=19.5)
        z = RadialField.zeros(g)
        s = State(u=f, ut=z, v=z, vt=z)
        res = simulate(s, CouplingParams(1.0), SimOptions(dt=0.01, t_end=0.1))
        assert not res.trusted

    def test_json_summary_keys(self):
        g = build_grid(10.0, 64)
        res = simulate(zero_state(g), CouplingParams(1.0), SimOptions(dt=0.01, t_end=0.1))
        js = sim_result_to_json(res)
        assert set(js) == {"outcome", "t_star", "energy_drift", "trusted"}
        assert js["outcome"] == "Completed"
        assert js["t_star"] is None
        assert js["trusted"] is True


# ---------------------------------------------------------------------
# Concavity monitor
# ---------------------------------------------------------------------

def synthetic_series(ts, ys, dys, d2ys):
    return [
        FunctionalSnapshot(
            t=t, E=0.0, y=y, dy=dy, d2y=d2y, P=0.0, K=0.0, J=0.0,
            kinetic=0.0, quartic=0.0, sup_u=0.0, sup_v=0.0,
        )
        for t, y, dy, d2y in zip(ts, ys, dys, d2ys)
    ]


class TestLevineMonitor:
    def test_constant_mass_gives_zero(self):
        series = synthetic_series([0.0, 1.0, 2.0], [3.0] * 3, [0.0] * 3, [0.0] * 3)
        assert np.all(levine_indicator(series, 1.5) == 0.0)
        assert not levine_met(series, 1.5)

    def test_power_law_closed_form(self):
        # y = (T-t)^(-alpha): indicator = alpha(alpha+1-gamma*alpha)
        # * (T-t)^(-2 alpha - 2); vanishes at gamma = (alpha+1)/alpha.
        T, alpha = 2.0, 2.0
        ts = np.linspace(0.0, 1.5, 12)
        tau = T - ts
        ys = tau**-alpha
        dys = alpha * tau ** (-alpha - 1.0)
        d2ys = alpha * (alpha + 1.0) * tau ** (-alpha - 2.0)
        series = synthetic_series(ts, ys, dys, d2ys)
        for gamma in (1.2, 1.5, 1.8):
            expected = alpha * (alpha + 1.0 - gamma * alpha) * tau ** (-2.0 * alpha - 2.0)
            got = levine_indicator(series, gamma)
            assert np.allclose(got, expected, rtol=1e-12, atol=1e-12 * np.max(np.abs(d2ys * ys)))
        assert np.all(levine_indicator(series, 1.2) > 0.0)
        assert np.all(levine_indicator(series, 1.8) < 0.0)

    def test_streak_requires_positive_mass_growth(self):
        # Positive indicator alone is not enough: the streak also needs
        # y, dy > 0 at each member.
        series = synthetic_series(
            [0.0, 1.0, 2.0, 3.0],
            [1.0, 1.0, 1.0, 1.0],
            [-1.0, 1.0, 1.0, 1.0],
            [5.0, 5.0, 5.0, 5.0],
        )
        assert levine_streak_start(series, 1.5) == 1
        assert levine_met(series, 1.5, min_len=3)
        assert not levine_met(series, 1.5, min_len=4)

    def test_streak_broken_by_sign_change(self):
        series = synthetic_series(
            [0.0, 1.0, 2.0],
            [1.0, 1.0, 1.0],
            [1.0, 1.0, 1.0],
            [5.0, 5.0, 0.5],
        )
        # last indicator: 0.5*1 - 1.5*1 = -1 < 0, so no trailing streak
        assert levine_streak_start(series, 1.5) == 3
        assert not levine_met(series, 1.5, min_len=1)
