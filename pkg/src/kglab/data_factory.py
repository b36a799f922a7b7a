"""Constructors for the initial-data families the classifiers target.

Three families, each built so that a hypothesis of one of the blow-up
or global-existence checks holds by construction and is re-verified
numerically before the state is returned:

* ``bump_data``: a dilated compactly supported shell with zero
  velocity, tuned so the mass-trapping comparison quantities line up
  at equality while the energy grows like the dilation cubed,
* ``scaled_groundstate_data``: a stationary pair scaled off its
  constraint manifold, landing on either side of the level d,
* ``zero_energy_data``: a scaled pair plus a parallel velocity with
  the scale solved so the energy vanishes while the mass keeps
  strictly growing.

Every constructor aborts rather than return a state that misses its
family's defining inequalities, and every output is checked to vanish
near the wall so truncation cannot masquerade as dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .functionals import (
    CouplingParams,
    State,
    energy,
    energy_scale,
    mass,
    mass_derivative,
    nehari,
    projection,
)
from .grid import (
    RadialField,
    RadialGrid,
    dirichlet_form,
    integrate,
    norm_h1_sq,
    norm_l2_sq,
)
from .groundstate import GroundState

# Constructed profiles must be numerically zero this close to the
# wall, relative to their sup; truncation artifacts are refused here
# rather than diagnosed later in a simulation.
WALL_CELLS = 5
WALL_LEVEL = 1e-14


def cutoff_chi(x) -> np.ndarray:
    """Smooth shell cutoff: 1 on |x-3| <= 1, 0 on |x-3| >= 2.

    The bridges use the exponential smoothstep s(t) =
    e^{-1/t} / (e^{-1/t} + e^{-1/(1-t)}), rising on (1, 2) and
    falling on (4, 5); all derivatives vanish at the junctions.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    xs = np.atleast_1d(x)
    out = np.zeros(xs.shape)
    out[np.abs(xs - 3.0) <= 1.0] = 1.0

    def smoothstep(t):
        a = np.exp(-1.0 / t)
        b = np.exp(-1.0 / (1.0 - t))
        return a / (a + b)

    rise = (xs > 1.0) & (xs < 2.0)
    fall = (xs > 4.0) & (xs < 5.0)
    if np.any(rise):
        out[rise] = smoothstep(xs[rise] - 1.0)
    if np.any(fall):
        out[fall] = smoothstep(5.0 - xs[fall])
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class BumpSpec:
    """Dilated-shell datum: profile chi(r/R), support [R, 5R].

    Amplitudes k1, k2 may be left unset; the factory then solves for
    the equal-amplitude pair that puts the datum exactly on the
    boundary of the mass-trapping region.
    """

    R: float
    grid: RadialGrid
    k1: Optional[float] = None
    k2: Optional[float] = None

    def __post_init__(self) -> None:
        if not (np.isfinite(self.R) and self.R > 0.0):
            raise ValueError(f"R must be positive, got {self.R}")
        if (self.k1 is None) != (self.k2 is None):
            raise ValueError("set both amplitudes or neither")
        if self.k1 is not None:
            if not (np.isfinite(self.k1) and np.isfinite(self.k2)):
                raise ValueError("amplitudes must be finite")
            if self.k1 == 0.0 and self.k2 == 0.0:
                raise ValueError("amplitudes must not both vanish")
        need = 5.0 * self.R + WALL_CELLS * self.grid.dr
        if self.grid.r_max < need:
            raise ValueError(
                f"r_max={self.grid.r_max} cannot contain support "
                f"[R, 5R] with a wall margin (need >= {need})"
            )

    @property
    def auto_amplitudes(self) -> bool:
        return self.k1 is None


def _check_contained(state: State) -> None:
    sup = max(
        np.max(np.abs(f.values))
        for f in (state.u, state.ut, state.v, state.vt)
    )
    if sup == 0.0:
        return
    for f in (state.u, state.ut, state.v, state.vt):
        wall = np.max(np.abs(f.values[-WALL_CELLS:]))
        if wall > WALL_LEVEL * sup:
            raise ValueError(
                f"field reaches {wall:.2e} within {WALL_CELLS} cells of the "
                f"wall (limit {WALL_LEVEL:.0e} relative); widen the grid"
            )


def _verify_growth_conditions(state: State, params: CouplingParams) -> None:
    # The three hypotheses of the mass-growth blow-up check; equality
    # in the third is the designed boundary case, so it gets slack.
    y0 = mass(state)
    dy0 = mass_derivative(state)
    e0 = energy(state, params)
    p0 = projection(state)
    scale = energy_scale(state, params)
    if not y0 > 0.0:
        raise ValueError("constructed datum has zero mass")
    if not dy0 >= 0.0:
        raise ValueError("constructed datum has negative mass slope")
    if not e0 > 0.0:
        raise ValueError(
            f"amplitudes give non-positive energy E={e0:.3e}; "
            "the mass-growth hypotheses need E > 0"
        )
    if not 0.25 * y0 + 0.5 * p0 + 1e-12 * scale >= e0:
        raise ValueError(
            f"amplitudes break the energy bound: E={e0:.3e} > "
            f"y/4 + P/2 = {0.25 * y0 + 0.5 * p0:.3e}"
        )


def bump_data(spec: BumpSpec, params: CouplingParams) -> State:
    """Zero-velocity shell datum (k1 Q, 0, k2 Q, 0), Q = chi(r/R).

    With automatic amplitudes, k1 = k2 = k solves
    k^2 = 2 ratio / (1+beta), ratio = (norm_l2_sq/2 + dirichlet) /
    int Q^4, placing the datum exactly on E = y/4 + P/2 in the
    discrete functionals.  Requires beta > -1 in that branch.  Every
    output is re-verified against the mass-growth hypotheses.
    """
    grid = spec.grid
    q = RadialField(grid, cutoff_chi(grid.nodes / spec.R))
    if spec.auto_amplitudes:
        if not params.beta > -1.0:
            raise ValueError(
                f"automatic amplitudes need beta > -1, got {params.beta}"
            )
        ratio = (0.5 * norm_l2_sq(q) + dirichlet_form(q)) / integrate(
            RadialField(grid, q.values**4)
        )
        k1 = k2 = float(np.sqrt(2.0 * ratio / (1.0 + params.beta)))
    else:
        k1, k2 = float(spec.k1), float(spec.k2)
    zero = RadialField.zeros(grid)
    state = State(
        u=RadialField(grid, k1 * q.values),
        ut=zero,
        v=RadialField(grid, k2 * q.values),
        vt=zero,
        t=0.0,
    )
    _check_contained(state)
    _verify_growth_conditions(state, params)
    return state


def scaled_groundstate_data(gs: GroundState, lam: float) -> State:
    """Datum (lam phi, 0, lam psi, 0) off the constraint manifold.

    lam < 1 lands strictly inside the well (K > 0, 0 < E < d); lam > 1
    lands outside (K < 0, E < d); both are re-verified and the
    constructor aborts on a ground state too degenerate to classify.
    """
    if not (np.isfinite(lam) and lam > 0.0):
        raise ValueError(f"lam must be positive, got {lam}")
    if lam == 1.0:
        raise ValueError("lam = 1 sits on the manifold; no strict side")
    grid = gs.grid
    zero = RadialField.zeros(grid)
    state = State(
        u=RadialField(grid, lam * gs.phi.values),
        ut=zero,
        v=RadialField(grid, lam * gs.psi.values),
        vt=zero,
        t=0.0,
    )
    _check_contained(state)
    params = CouplingParams(beta=gs.beta)
    k = nehari(state.u, state.v, params)
    e = energy(state, params)
    if lam < 1.0:
        ok = k > 0.0 and 0.0 < e < gs.d_level
    else:
        ok = k < 0.0 and e < gs.d_level
    if not ok:
        raise RuntimeError(
            f"ground state too degenerate to classify at lam={lam}: "
            f"K={k:.3e}, E={e:.3e}, d={gs.d_level:.3e}"
        )
    return state


def zero_energy_data(gs: GroundState, eps: float) -> State:
    """Datum (lam phi, eps phi, lam psi, eps psi) with E = 0 exactly.

    The scale lam is the positive root of E(lam, eps) = 0, which sits
    beyond the energy peak; the parallel velocity keeps the mass slope
    2 lam eps (|phi|^2 + |psi|^2) strictly positive.
    """
    if not (np.isfinite(eps) and eps > 0.0):
        raise ValueError(f"eps must be positive, got {eps}")
    params = CouplingParams(beta=gs.beta)
    grid = gs.grid

    def energy_at(lam: float) -> float:
        state = State(
            u=RadialField(grid, lam * gs.phi.values),
            ut=RadialField(grid, eps * gs.phi.values),
            v=RadialField(grid, lam * gs.psi.values),
            vt=RadialField(grid, eps * gs.psi.values),
            t=0.0,
        )
        return energy(state, params)

    lo, hi = 1.0, 2.0
    for _ in range(60):
        if energy_at(hi) < 0.0:
            break
        hi *= 2.0
    else:
        raise RuntimeError("no negative-energy scale found; degenerate profile")
    lam = float(brentq(energy_at, lo, hi, xtol=1e-15, rtol=8.9e-16))
    state = State(
        u=RadialField(grid, lam * gs.phi.values),
        ut=RadialField(grid, eps * gs.phi.values),
        v=RadialField(grid, lam * gs.psi.values),
        vt=RadialField(grid, eps * gs.psi.values),
        t=0.0,
    )
    _check_contained(state)
    e = energy(state, params)
    scale = energy_scale(state, params)
    if abs(e) > 1e-10 * scale:
        raise RuntimeError(f"energy residual {e:.3e} exceeds 1e-10 * {scale:.3e}")
    if not mass_derivative(state) > 0.0:
        raise RuntimeError("mass slope failed to come out positive")
    return state
