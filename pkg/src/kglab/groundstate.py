"""Stationary profiles and the mountain-pass level d.

Two independent routes to the stationary system

    -Delta phi + phi = phi^3 + beta psi^2 phi,
    -Delta psi + psi = psi^3 + beta phi^2 psi:

``shoot_scalar`` solves the scalar reduction -w'' - (2/r) w' + w =
kappa w^3 by bisection shooting on w(0) and supplies the two explicit
critical points (w, 0) and (w, w)/sqrt(1+beta); ``minimize_d`` runs a
preconditioned projected gradient flow for the action J over the
constraint K = 0 and returns the lowest converged level.  Keeping the
routes separate lets each serve as an oracle for the other: the flow's
level d must not exceed the candidate levels built from the shooting
profile by more than discretization error.

Residual conventions differ by route and both are honest sup-norms:
the shooting profile is measured against the radial ODE on an
auxiliary fine mesh with fourth-order stencils (solver accuracy,
independent of the simulation grid), while the flow's output is
measured by the grid stencil itself, which its fixed point satisfies
to convergence tolerance rather than to O(dr^2).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import solve_banded

from .functionals import CouplingParams, action, nehari, quartic_coupling
from .grid import (
    RadialField,
    RadialGrid,
    integrate,
    laplacian3d,
    norm_h1_sq,
    schwarz_rearrange,
)

# Shooting controls: series start radius, decay splice level relative
# to w(0), bisection bracket for w(0)*sqrt(kappa), and the integration
# ceiling (the turning point sits near r = 11 for every kappa).
_SERIES_R0 = 1e-2
_TAIL_FACTOR = 1e-6
_BRACKET = (1.05, 10.0)
_R_SHOOT_END = 40.0
_RTOL = 1e-13
_ATOL = 1e-16

# The profile needs this much domain before the wall for its tail to
# decay below quadrature relevance.
MIN_R_MAX = 15.0

SEED_NAMES = ("semitrivial", "symmetric", "gaussian", "bump")


# =====================================================================
# Scalar shooting
# =====================================================================

class ScalarProfile:
    """Dense scalar ground-state profile w(r) for one kappa.

    Piecewise evaluation: power series below the integration start,
    the DOP853 dense solution up to the splice radius, and the exact
    linear-tail solution C e^{-r}/r beyond it.
    """

    def __init__(self, kappa: float, b0: float, sol, r_switch: float) -> None:
        self.kappa = kappa
        self.b0 = b0
        self.r_switch = r_switch
        self._sol = sol
        w_sw = float(sol.sol(r_switch)[0])
        self.tail_coeff = w_sw * r_switch * np.exp(r_switch)

    def _series(self, r: np.ndarray) -> np.ndarray:
        b, k = self.b0, self.kappa
        c2 = (b - k * b**3) / 6.0
        c4 = (1.0 - 3.0 * k * b * b) * c2 / 20.0
        return b + c2 * r**2 + c4 * r**4

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        out = np.empty(r.shape)
        lo = r < _SERIES_R0
        hi = r > self.r_switch
        mid = ~(lo | hi)
        out[lo] = self._series(r[lo])
        if np.any(mid):
            out[mid] = self._sol.sol(r[mid])[0]
        out[hi] = self.tail_coeff * np.exp(-r[hi]) / r[hi]
        return out


def _integrate_scalar(b: float, kappa: float, events) -> object:
    c2 = (b - kappa * b**3) / 6.0
    c4 = (1.0 - 3.0 * kappa * b * b) * c2 / 20.0
    r0 = _SERIES_R0
    y0 = [b + c2 * r0**2 + c4 * r0**4, 2.0 * c2 * r0 + 4.0 * c4 * r0**3]

    def f(r, y):
        w, wp = y
        return [wp, -2.0 / r * wp + w - kappa * w**3]

    return solve_ivp(
        f, (r0, _R_SHOOT_END), y0, method="DOP853",
        rtol=_RTOL, atol=_ATOL, events=events,
        dense_output=events is None or len(events) == 1,
    )


def _classify_shot(b: float, kappa: float) -> str:
    # overshoot: w crosses zero (w(0) too large); undershoot: w' turns
    # positive while w > 0 (w(0) too small).
    def overshoot(r, y):
        return y[0]

    overshoot.terminal = True
    overshoot.direction = -1

    def undershoot(r, y):
        return y[1]

    undershoot.terminal = True
    undershoot.direction = 1

    sol = _integrate_scalar(b, kappa, [overshoot, undershoot])
    if sol.t_events[0].size:
        return "over"
    if sol.t_events[1].size:
        return "under"
    return "under"


@lru_cache(maxsize=32)
def scalar_profile(kappa: float) -> ScalarProfile:
    """Shoot the decaying scalar profile for one kappa (cached)."""
    if not (np.isfinite(kappa) and kappa > 0.0):
        raise ValueError(f"kappa must be positive, got {kappa}")
    scale = 1.0 / np.sqrt(kappa)
    lo, hi = _BRACKET[0] * scale, _BRACKET[1] * scale
    if _classify_shot(lo, kappa) != "under" or _classify_shot(hi, kappa) != "over":
        raise RuntimeError(f"shooting bracket failed to straddle at kappa={kappa}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _classify_shot(mid, kappa) == "over":
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15 * hi:
            break
    b_star = 0.5 * (lo + hi)

    def tail_ev(r, y):
        return y[0] - _TAIL_FACTOR * b_star

    tail_ev.terminal = True
    tail_ev.direction = -1
    sol = _integrate_scalar(b_star, kappa, [tail_ev])
    if not sol.t_events[0].size:
        raise RuntimeError(f"decaying branch not reached at kappa={kappa}")
    return ScalarProfile(kappa, b_star, sol, float(sol.t_events[0][0]))


def shoot_scalar(grid: RadialGrid, kappa: float) -> RadialField:
    """Positive decreasing solution of -w'' - (2/r)w' + w = kappa w^3.

    The grid must leave room for the decaying tail (r_max >= 15).
    """
    if grid.r_max < MIN_R_MAX:
        raise ValueError(
            f"r_max={grid.r_max} too small for the decaying profile "
            f"(need >= {MIN_R_MAX})"
        )
    return RadialField(grid, scalar_profile(float(kappa))(grid.nodes))


def scalar_ode_residual(profile: ScalarProfile, h: float = 0.002) -> float:
    """Sup-norm ODE residual of a shot profile on an auxiliary mesh.

    Fourth-order stencils over [0.2, r_switch - 0.1]; measured 1.1e-7
    at the default spacing, against the 1e-6 accuracy contract.
    """
    rr = np.arange(0.2, profile.r_switch - 0.1, h)
    w = profile(rr)
    d1 = (w[:-4] - 8.0 * w[1:-3] + 8.0 * w[3:-1] - w[4:]) / (12.0 * h)
    d2 = (-w[:-4] + 16.0 * w[1:-3] - 30.0 * w[2:-2] + 16.0 * w[3:-1] - w[4:]) / (
        12.0 * h * h
    )
    rm, wm = rr[2:-2], w[2:-2]
    res = -d2 - 2.0 / rm * d1 + wm - profile.kappa * wm**3
    return float(np.max(np.abs(res)))


# =====================================================================
# Nehari scaling
# =====================================================================

def nehari_scale(u: RadialField, v: RadialField, params: CouplingParams) -> float:
    """The positive scale lambda0 with K[lambda0 u, lambda0 v] = 0.

    K[su, sv] = s^2 H - s^4 Phi with H the H^1 sum, so lambda0 =
    sqrt(H/Phi); it is the maximizer of j(s) = J[su, sv], and j stays
    positive up to sqrt(2) lambda0 and is negative beyond.
    """
    h1 = norm_h1_sq(u) + norm_h1_sq(v)
    phi = quartic_coupling(u, v, params)
    if not phi > 0.0:
        raise ValueError("no Nehari crossing: quartic coupling is not positive")
    return float(np.sqrt(h1 / phi))


# =====================================================================
# Mountain-pass minimization
# =====================================================================

@dataclass(frozen=True)
class MinimizeOptions:
    """Controls of the projected gradient flow."""

    max_iters: int = 600
    step_size: float = 0.6
    tol_residual: float = 1e-6
    tol_K: float = 1e-10
    seed_profile: Optional[str] = None
    use_rearrangement: bool = True

    def __post_init__(self) -> None:
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be positive, got {self.max_iters}")
        if not 0.0 < self.step_size <= 1.0:
            raise ValueError(f"step_size must lie in (0, 1], got {self.step_size}")
        if not self.tol_residual > 0.0:
            raise ValueError("tol_residual must be positive")
        if not self.tol_K > 0.0:
            raise ValueError("tol_K must be positive")
        if self.seed_profile is not None and self.seed_profile not in SEED_NAMES:
            raise ValueError(
                f"seed_profile must be one of {SEED_NAMES}, got {self.seed_profile}"
            )


@dataclass(frozen=True)
class GroundState:
    """Converged minimizer with its level and quality measures."""

    phi: RadialField
    psi: RadialField
    d_level: float
    residual: float
    lambda0: float
    beta: float
    seed: str

    def __post_init__(self) -> None:
        if self.phi.grid != self.psi.grid:
            raise ValueError("components live on different grids")
        for name in ("d_level", "residual", "lambda0", "beta"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.d_level <= 0.0:
            raise ValueError(f"d_level must be positive, got {self.d_level}")

    @property
    def grid(self) -> RadialGrid:
        return self.phi.grid


def d_candidates(params: CouplingParams, w: RadialField) -> Tuple[float, float]:
    """Levels of the two explicit critical points built from w.

    With F = int w^4 dx: the pair (w, 0) sits at F/4 and the pair
    (w, w)/sqrt(1+beta) at F/(2(1+beta)); each component of the latter
    solves the kappa = 1+beta scalar equation.
    """
    if params.beta <= -1.0:
        raise ValueError(f"candidates require beta > -1, got {params.beta}")
    f4 = integrate(RadialField(w.grid, w.values**4))
    return 0.25 * f4, f4 / (2.0 * (1.0 + params.beta))


def _h_operator_banded(grid: RadialGrid) -> np.ndarray:
    # Banded (-Delta + 1) with the stencil's own ghost closures, for
    # scipy.linalg.solve_banded ordering (upper, diag, lower).
    n = grid.n
    r = grid.nodes
    dr = grid.dr
    ab = np.zeros((3, n))
    ab[1, :] = 2.0 / dr**2 + 1.0
    ab[1, 0] = 3.0 / dr**2 + 1.0
    ab[1, -1] = (3.0 * r[-1] + dr) / (r[-1] * dr**2) + 1.0
    ab[0, 1:] = -r[1:] / (r[:-1] * dr**2)
    ab[2, :-1] = -r[:-1] / (r[1:] * dr**2)
    return ab


def _stationary_residual(u: RadialField, v: RadialField, beta: float) -> float:
    fu = u.values**3 + beta * v.values**2 * u.values
    fv = v.values**3 + beta * u.values**2 * v.values
    ru = -laplacian3d(u).values + u.values - fu
    rv = -laplacian3d(v).values + v.values - fv
    return float(max(np.max(np.abs(ru)), np.max(np.abs(rv))))


def _seed_pair(name: str, grid: RadialGrid, beta: float) -> Tuple[RadialField, RadialField]:
    if name == "semitrivial":
        return shoot_scalar(grid, 1.0), RadialField.zeros(grid)
    if name == "symmetric":
        w = shoot_scalar(grid, 1.0 + beta)
        return w, RadialField(grid, w.values.copy())
    if name == "gaussian":
        f = RadialField.from_function(grid, lambda r: 3.0 * np.exp(-(r**2)))
        return f, RadialField(grid, f.values.copy())
    if name == "bump":
        f = RadialField.from_function(grid, lambda r: 3.0 * np.exp(-((r - 2.0) ** 2)))
        return f, RadialField(grid, f.values.copy())
    raise ValueError(f"unknown seed profile {name}")


def _flow_from_seed(
    seed: str,
    grid: RadialGrid,
    params: CouplingParams,
    opts: MinimizeOptions,
) -> Optional[GroundState]:
    beta = params.beta
    ab = _h_operator_banded(grid)
    u, v = _seed_pair(seed, grid, beta)
    lam = nehari_scale(u, v, params)
    u = RadialField(grid, lam * u.values)
    v = RadialField(grid, lam * v.values)

    for _ in range(opts.max_iters):
        fu = u.values**3 + beta * v.values**2 * u.values
        fv = v.values**3 + beta * u.values**2 * v.values
        # H^1-metric gradient of J: u - (-Delta+1)^{-1} (u^3 + b v^2 u).
        pu = u.values - solve_banded((1, 1), ab, fu)
        pv = v.values - solve_banded((1, 1), ab, fv)
        u_new = u.values - opts.step_size * pu
        v_new = v.values - opts.step_size * pv
        u = RadialField(grid, u_new)
        v = RadialField(grid, v_new)
        if opts.use_rearrangement:
            u = schwarz_rearrange(u)
            v = schwarz_rearrange(v)
        lam = nehari_scale(u, v, params)
        u = RadialField(grid, lam * u.values)
        v = RadialField(grid, lam * v.values)

        res = _stationary_residual(u, v, beta)
        k = nehari(u, v, params)
        k_scale = norm_h1_sq(u) + norm_h1_sq(v) + abs(quartic_coupling(u, v, params))
        if res <= opts.tol_residual and abs(k) <= opts.tol_K * k_scale:
            return GroundState(
                phi=u,
                psi=v,
                d_level=action(u, v, params),
                residual=res,
                lambda0=nehari_scale(u, v, params),
                beta=beta,
                seed=seed,
            )
    return None


def minimize_d(
    params: CouplingParams,
    grid: RadialGrid,
    opts: Optional[MinimizeOptions] = None,
) -> GroundState:
    """Minimize the action over the Nehari constraint; report level d.

    Runs the flow from each seed (or the one selected in opts) and
    returns the converged result with the lowest level.  Requires
    beta >= 0; whether a minimizer exists below that is open, so the
    solver refuses rather than guesses.
    """
    if params.beta < 0.0:
        raise ValueError(f"minimize_d requires beta >= 0, got {params.beta}")
    if grid.r_max < MIN_R_MAX:
        raise ValueError(
            f"r_max={grid.r_max} too small for contained profiles "
            f"(need >= {MIN_R_MAX})"
        )
    if opts is None:
        opts = MinimizeOptions()
    seeds = SEED_NAMES if opts.seed_profile is None else (opts.seed_profile,)
    best: Optional[GroundState] = None
    for seed in seeds:
        gs = _flow_from_seed(seed, grid, params, opts)
        if gs is not None and (best is None or gs.d_level < best.d_level):
            best = gs
    if best is None:
        raise RuntimeError(
            f"no seed converged within {opts.max_iters} iterations at beta={params.beta}"
        )
    return best


# =====================================================================
# Serialization
# =====================================================================

GROUNDSTATE_CSV_HEADER = "r,phi,psi"


def groundstate_to_csv(gs: GroundState, path: str) -> None:
    """Write the profile pair as CSV with header ``r,phi,psi``."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(GROUNDSTATE_CSV_HEADER + "\n")
        for r, a, b in zip(gs.grid.nodes, gs.phi.values, gs.psi.values):
            fh.write(f"{float(r)!r},{float(a)!r},{float(b)!r}\n")


def groundstate_to_json(gs: GroundState) -> dict:
    """Summary mapping {beta, d_level, residual, lambda0, seed}."""
    return {
        "beta": gs.beta,
        "d_level": gs.d_level,
        "residual": gs.residual,
        "lambda0": gs.lambda0,
        "seed": gs.seed,
    }
