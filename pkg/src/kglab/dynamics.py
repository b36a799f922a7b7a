"""Time integration, blow-up detection, and the concavity monitor.

The flow is integrated with the Störmer-Verlet scheme in kick-drift-
kick form; accelerations depend only on positions, so the scheme is
time-reversible and nearly conserves the energy functional, making
|E(t) - E(0)| a usable accuracy oracle rather than an artifact.

Blow-up handling is deliberately simple and deterministic: when a step
produces values above ``sup_threshold`` or non-finite values, the step
is retried from the last good state with dt halved (never re-increased).
Finite-time blow-up is declared either when the amplitude exceeds the
threshold with three consecutive increasing snapshot sup-norms, or when
the halving cascade exhausts (dt < dt_min) while the amplitude evidence
points at growth.  A cascade exhausted by non-finite values without
growth evidence is reported as a step failure, not as blow-up.

Truncation-boundary policy: the Dirichlet wall at r_max reflects
outgoing radiation, so any run whose support (|values| > 1e-8) reaches
within five cells of the wall is marked untrusted; the run continues,
only the trust flag drops.  Post-detection continuation is meaningless
on a reflecting grid, so integration stops at detection.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np

from .functionals import CouplingParams, FunctionalSnapshot, State, evaluate_snapshot
from .grid import RadialField, laplacian3d

# Support threshold and cell margin of the wall-contamination guard.
CONTAINMENT_LEVEL = 1e-8
CONTAINMENT_CELLS = 5

# Number of trailing snapshots entering the 1/sup extrapolation fit.
EXTRAPOLATION_POINTS = 10


class StepFailureError(RuntimeError):
    """A single integrator step produced non-finite values."""


@dataclass(frozen=True)
class SimOptions:
    """Integration controls.

    dt_min defaults to dt/1024, the floor of the halving cascade;
    gamma_levine is the exponent of the concavity monitor y''y - g y'^2.
    """

    dt: float
    t_end: float
    snapshot_every: int = 10
    sup_threshold: float = 1e6
    dt_min: Optional[float] = None
    gamma_levine: float = 1.5

    def __post_init__(self) -> None:
        if not (np.isfinite(self.dt) and self.dt > 0.0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not (np.isfinite(self.t_end) and self.t_end > 0.0):
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if not self.sup_threshold > 1.0:
            raise ValueError(f"sup_threshold must exceed 1, got {self.sup_threshold}")
        if self.snapshot_every < 1:
            raise ValueError(f"snapshot_every must be >= 1, got {self.snapshot_every}")
        if self.dt_min is not None and not 0.0 < self.dt_min <= self.dt:
            raise ValueError(f"dt_min must lie in (0, dt], got {self.dt_min}")

    @property
    def resolved_dt_min(self) -> float:
        return self.dt / 1024.0 if self.dt_min is None else self.dt_min


@dataclass(frozen=True)
class Completed:
    """The run reached t_end without incident."""

    t_end: float
    kind: str = field(default="Completed", init=False)


@dataclass(frozen=True)
class BlowUpDetected:
    """Finite-time blow-up declared at the last stable time t_star.

    t_star_estimate extrapolates the vanishing of 1/sup-norm by a
    least-squares line through the trailing snapshots; extrapolated
    records whether that fit succeeded.
    """

    t_star: float
    extrapolated: bool
    t_star_estimate: Optional[float] = None
    kind: str = field(default="BlowUpDetected", init=False)


@dataclass(frozen=True)
class StepFailure:
    """Non-finite values survived the dt reduction cascade."""

    t: float
    reason: str
    kind: str = field(default="StepFailure", init=False)


Outcome = Union[Completed, BlowUpDetected, StepFailure]


@dataclass(frozen=True)
class SimResult:
    """Snapshots, outcome, and run-quality flags of one integration.

    energy_drift is computed over the stable snapshots only: past the
    detection time a single overshoot step leaves the resolved regime
    and its functionals measure nothing.
    """

    snapshots: Tuple[FunctionalSnapshot, ...]
    outcome: Outcome
    energy_drift: float
    trusted: bool
    final_state: State
    steps: int

    def __post_init__(self) -> None:
        times = [s.t for s in self.snapshots]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("snapshot times must be strictly increasing")

    @property
    def t_star(self) -> Optional[float]:
        if isinstance(self.outcome, BlowUpDetected):
            return self.outcome.t_star
        return None

    @property
    def stable_snapshots(self) -> Tuple[FunctionalSnapshot, ...]:
        """Snapshots up to the last stable time.

        On blow-up the final recorded snapshot documents the threshold
        crossing itself; diagnostics such as the concavity monitor are
        meaningful on the resolved segment t <= t_star.
        """
        if isinstance(self.outcome, BlowUpDetected):
            ts = self.outcome.t_star
            return tuple(s for s in self.snapshots if s.t <= ts)
        return self.snapshots


# =====================================================================
# Right-hand side and one step
# =====================================================================

def _accel(u: RadialField, v: RadialField, beta: float):
    # Raw-array accelerations; the cubic terms may overflow to inf for
    # exploding iterates, so evaluation suppresses fp warnings and the
    # caller checks finiteness.
    with np.errstate(over="ignore", invalid="ignore"):
        uv, vv = u.values, v.values
        au = laplacian3d(u).values - uv + uv**3 + beta * vv**2 * uv
        av = laplacian3d(v).values - vv + vv**3 + beta * uv**2 * vv
    return au, av


def rhs(s: State, params: CouplingParams) -> Tuple[RadialField, RadialField]:
    """Accelerations (a_u, a_v) of the coupled cubic system.

    a_u = Delta u - u + u^3 + beta v^2 u, and symmetrically for v.
    """
    au, av = _accel(s.u, s.v, params.beta)
    return RadialField(s.grid, au), RadialField(s.grid, av)


def step_leapfrog(s: State, dt: float, params: CouplingParams) -> State:
    """One Störmer-Verlet step: half-kick, drift, recompute, half-kick.

    Negative dt steps backwards; the scheme is its own inverse.  Raises
    StepFailureError when the step produces non-finite values.
    """
    if dt == 0.0 or not np.isfinite(dt):
        raise ValueError(f"dt must be finite and non-zero, got {dt}")
    g = s.grid
    au, av = _accel(s.u, s.v, params.beta)
    with np.errstate(over="ignore", invalid="ignore"):
        ut_half = s.ut.values + 0.5 * dt * au
        vt_half = s.vt.values + 0.5 * dt * av
        u_new = s.u.values + dt * ut_half
        v_new = s.v.values + dt * vt_half
    if not (np.all(np.isfinite(u_new)) and np.all(np.isfinite(v_new))):
        raise StepFailureError(f"non-finite fields after drift at t={s.t}")
    s_mid = State(
        u=RadialField(g, u_new),
        ut=RadialField(g, ut_half),
        v=RadialField(g, v_new),
        vt=RadialField(g, vt_half),
        t=s.t,
    )
    au2, av2 = _accel(s_mid.u, s_mid.v, params.beta)
    with np.errstate(over="ignore", invalid="ignore"):
        ut_new = ut_half + 0.5 * dt * au2
        vt_new = vt_half + 0.5 * dt * av2
    if not (np.all(np.isfinite(ut_new)) and np.all(np.isfinite(vt_new))):
        raise StepFailureError(f"non-finite velocities after kick at t={s.t}")
    return State(
        u=RadialField(g, u_new),
        ut=RadialField(g, ut_new),
        v=RadialField(g, v_new),
        vt=RadialField(g, vt_new),
        t=s.t + dt,
    )


# =====================================================================
# Full integration
# =====================================================================

def _sup(s: State) -> float:
    return max(
        float(np.max(np.abs(s.u.values))),
        float(np.max(np.abs(s.v.values))),
    )


def _contained(s: State) -> bool:
    m = CONTAINMENT_CELLS
    for f in (s.u, s.ut, s.v, s.vt):
        if np.any(np.abs(f.values[-m:]) > CONTAINMENT_LEVEL):
            return False
    return True


def _extrapolate_t_star(snapshots: List[FunctionalSnapshot]) -> Optional[float]:
    # Least-squares line through the trailing (t, 1/sup) points; the
    # root is the predicted time where the amplitude diverges.
    pts = snapshots[-EXTRAPOLATION_POINTS:]
    if len(pts) < 3:
        return None
    t = np.array([s.t for s in pts])
    sup = np.array([max(s.sup_u, s.sup_v) for s in pts])
    if np.any(sup <= 0.0):
        return None
    z = 1.0 / sup
    slope, intercept = np.polyfit(t, z, 1)
    if not np.isfinite(slope) or slope >= 0.0:
        return None
    root = -intercept / slope
    if not np.isfinite(root) or root < t[-1]:
        return None
    return float(root)


def simulate(s0: State, params: CouplingParams, opts: SimOptions) -> SimResult:
    """Integrate from s0 until t_end, blow-up, or step failure.

    Snapshots are taken at t=0, every ``snapshot_every`` accepted steps,
    at the threshold-crossing event, and at the final time.
    """
    dt = opts.dt
    dt_min = opts.resolved_dt_min
    state = s0
    snaps: List[FunctionalSnapshot] = [evaluate_snapshot(s0, params)]
    trusted = _contained(s0)
    steps = 0
    growth_evidence = False

    def record(s: State) -> None:
        snaps.append(evaluate_snapshot(s, params))

    def finish(outcome: Outcome) -> SimResult:
        e0 = snaps[0].E
        if isinstance(outcome, BlowUpDetected):
            stable = [s for s in snaps if s.t <= outcome.t_star]
        else:
            stable = snaps
        drift = max(abs(s.E - e0) for s in stable) / max(1.0, abs(e0))
        return SimResult(
            snapshots=tuple(snaps),
            outcome=outcome,
            energy_drift=drift,
            trusted=trusted,
            final_state=state,
            steps=steps,
        )

    eps = 1e-12 * opts.t_end
    while state.t < opts.t_end - eps:
        dt_step = min(dt, opts.t_end - state.t)
        try:
            nxt = step_leapfrog(state, dt_step, params)
        except StepFailureError:
            dt = 0.5 * dt
            if dt < dt_min:
                if growth_evidence:
                    est = _extrapolate_t_star(snaps)
                    return finish(BlowUpDetected(
                        t_star=state.t,
                        extrapolated=est is not None,
                        t_star_estimate=est,
                    ))
                return finish(StepFailure(
                    t=state.t,
                    reason="non-finite values persist at the minimal step size",
                ))
            continue

        sup = _sup(nxt)
        if sup > opts.sup_threshold:
            growth_evidence = True
            prev_sups = [max(s.sup_u, s.sup_v) for s in snaps[-2:]]
            if len(prev_sups) == 2 and prev_sups[0] < prev_sups[1] < sup:
                state_t_star = state.t
                state = nxt
                record(nxt)
                trusted = trusted and _contained(nxt)
                est = _extrapolate_t_star(snaps)
                return finish(BlowUpDetected(
                    t_star=state_t_star,
                    extrapolated=est is not None,
                    t_star_estimate=est,
                ))
            dt = 0.5 * dt
            if dt < dt_min:
                est = _extrapolate_t_star(snaps)
                return finish(BlowUpDetected(
                    t_star=state.t,
                    extrapolated=est is not None,
                    t_star_estimate=est,
                ))
            continue

        state = nxt
        steps += 1
        if steps % opts.snapshot_every == 0:
            record(state)
            trusted = trusted and _contained(state)

    if snaps[-1].t < state.t:
        record(state)
        trusted = trusted and _contained(state)
    return finish(Completed(t_end=state.t))


# =====================================================================
# Concavity monitor
# =====================================================================

def levine_indicator(series: List[FunctionalSnapshot], gamma: float) -> np.ndarray:
    """Per-snapshot values of y'' y - gamma (y')^2 from exact columns.

    For gamma > 1, eventual positivity of the indicator along with
    y, y' > 0 is the differential-inequality mechanism that forces
    finite-time divergence of y.
    """
    if not np.isfinite(gamma):
        raise ValueError(f"gamma must be finite, got {gamma}")
    y = np.array([s.y for s in series])
    dy = np.array([s.dy for s in series])
    d2y = np.array([s.d2y for s in series])
    return d2y * y - gamma * dy**2


def levine_streak_start(series: List[FunctionalSnapshot], gamma: float) -> int:
    """Index where the trailing positive streak of the monitor begins.

    A snapshot belongs to the streak when the indicator, y, and y' are
    all strictly positive; returns len(series) when the last snapshot
    fails the test.
    """
    ind = levine_indicator(series, gamma)
    i = len(series)
    while i > 0:
        s = series[i - 1]
        if not (ind[i - 1] > 0.0 and s.y > 0.0 and s.dy > 0.0):
            break
        i -= 1
    return i


def levine_met(series: List[FunctionalSnapshot], gamma: float, min_len: int = 3) -> bool:
    """True when the trailing streak has at least min_len snapshots."""
    return len(series) - levine_streak_start(series, gamma) >= min_len


# =====================================================================
# Serialization
# =====================================================================

def sim_result_to_json(result: SimResult) -> dict:
    """Summary mapping {outcome, t_star, energy_drift, trusted}."""
    return {
        "outcome": result.outcome.kind,
        "t_star": result.t_star,
        "energy_drift": result.energy_drift,
        "trusted": result.trusted,
    }
