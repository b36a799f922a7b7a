"""Scalar functionals of the coupled cubic Klein-Gordon system.

The system couples two radial scalar fields through a cubic interaction
of strength beta:

    u_tt - Delta u + u = u^3 + beta v^2 u,
    v_tt - Delta v + v = v^3 + beta u^2 v.

Every quantity the blow-up and global-existence criteria depend on is a
scalar functional of the phase-space point (u, u_t, v, v_t):

    Phi[u,v]   = int (u^4 + v^4 + 2 beta u^2 v^2) dx      shared quartic
    E          = 1/2 (|u|_{H1}^2 + |v|_{H1}^2 + |u_t|^2 + |v_t|^2) - Phi/4
    y          = |u|_{L2}^2 + |v|_{L2}^2                   mass
    y'         = 2 <(u,v), (u_t,v_t)>
    y''        = 2 |(u_t,v_t)|^2 - 2 K[u,v]
    P          = <(u,v),(u_t,v_t)>^2 / y                   projection
    K[u,v]     = |u|_{H1}^2 + |v|_{H1}^2 - Phi             Nehari functional
    J[u,v]     = 1/2 (|u|_{H1}^2 + |v|_{H1}^2) - Phi/4     action
    E1[u,v]    = 1/4 (|u|_{H1}^2 + |v|_{H1}^2)

These satisfy exact algebraic identities that hold in the discrete
setting to round-off and are exposed here as computable residuals:
J = K/4 + E1, the gamma-parametrized identity

    2(1+gamma) E - K = (1+gamma) |(u_t,v_t)|^2
                       + gamma (|u|_{H1}^2 + |v|_{H1}^2)
                       + (1-gamma)/2 * Phi,

and the orthogonal decomposition of the energy through P and y.
Residual tolerances are quoted against ``scale``, the sum of the
absolute values of an identity's terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List

import numpy as np

from .grid import (
    RadialField,
    inner_l2,
    integrate,
    norm_h1_sq,
    norm_l2_sq,
)

# Mass threshold below which the projection functional takes its zero
# branch: the case split is exact at y = 0, floating point needs a band.
EPS_MASS = 1e-30


# =====================================================================
# Domain types
# =====================================================================

@dataclass(frozen=True)
class CouplingParams:
    """Coupling strength beta of the cubic interaction.

    The negative-energy blow-up criterion requires beta >= -1, the
    potential-well dichotomy requires beta >= 0, and the projection
    criterion applies for every real beta; callers check applicability
    through the properties rather than at construction.
    """

    beta: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.beta):
            raise ValueError(f"beta must be finite, got {self.beta}")

    @property
    def admits_negative_energy_criterion(self) -> bool:
        return self.beta >= -1.0

    @property
    def admits_potential_well(self) -> bool:
        return self.beta >= 0.0


@dataclass(frozen=True, eq=False)
class State:
    """Phase-space point (u, u_t, v, v_t) at time t on a common grid."""

    u: RadialField
    ut: RadialField
    v: RadialField
    vt: RadialField
    t: float = 0.0

    def __post_init__(self) -> None:
        g = self.u.grid
        if not (self.ut.grid == g and self.v.grid == g and self.vt.grid == g):
            raise ValueError("all four fields must share one grid")
        if not np.isfinite(self.t):
            raise ValueError(f"t must be finite, got {self.t}")

    @property
    def grid(self):
        return self.u.grid


#: Fixed column order of the snapshot CSV serialization.
SNAPSHOT_COLUMNS = (
    "t", "E", "y", "dy", "d2y", "P", "K", "J", "kinetic", "quartic", "sup_u", "sup_v",
)


@dataclass(frozen=True)
class FunctionalSnapshot:
    """All scalar functionals evaluated on one State."""

    t: float
    E: float
    y: float
    dy: float
    d2y: float
    P: float
    K: float
    J: float
    kinetic: float
    quartic: float
    sup_u: float
    sup_v: float

    def __post_init__(self) -> None:
        for name in SNAPSHOT_COLUMNS:
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"snapshot field {name} must be finite")
        if self.y < 0.0 or self.P < 0.0 or self.kinetic < 0.0:
            raise ValueError("y, P and kinetic must be non-negative")

    def row(self) -> List[float]:
        return [getattr(self, name) for name in SNAPSHOT_COLUMNS]


# =====================================================================
# Elementary functionals
# =====================================================================

def quartic_coupling(u: RadialField, v: RadialField, params: CouplingParams) -> float:
    """Phi[u,v] = int (u^4 + v^4 + 2 beta u^2 v^2) dx.

    Non-negative whenever beta >= -1, by
    u^4 + v^4 + 2 beta u^2 v^2 = (u^2 - v^2)^2 + 2(1+beta) u^2 v^2.
    """
    if u.grid != v.grid:
        raise ValueError("fields live on different grids")
    u2 = u.values**2
    v2 = v.values**2
    dens = u2 * u2 + v2 * v2 + 2.0 * params.beta * u2 * v2
    return float(integrate(RadialField(u.grid, dens)))


def kinetic_energy_sq(s: State) -> float:
    """Squared L^2 x L^2 norm of the velocities."""
    return norm_l2_sq(s.ut) + norm_l2_sq(s.vt)


def energy(s: State, params: CouplingParams) -> float:
    """Conserved energy E of the flow."""
    h1 = norm_h1_sq(s.u) + norm_h1_sq(s.v)
    return 0.5 * (h1 + kinetic_energy_sq(s)) - 0.25 * quartic_coupling(s.u, s.v, params)


def energy_scale(s: State, params: CouplingParams) -> float:
    """Sum of the absolute values of the terms of E (tolerance scale)."""
    h1 = norm_h1_sq(s.u) + norm_h1_sq(s.v)
    return 0.5 * (abs(h1) + kinetic_energy_sq(s)) + 0.25 * abs(
        quartic_coupling(s.u, s.v, params)
    )


def mass(s: State) -> float:
    """y = |u|_{L2}^2 + |v|_{L2}^2."""
    return norm_l2_sq(s.u) + norm_l2_sq(s.v)


def mass_derivative(s: State) -> float:
    """dy/dt = 2 <(u,v),(u_t,v_t)>, exact along the flow."""
    return 2.0 * (inner_l2(s.u, s.ut) + inner_l2(s.v, s.vt))


def nehari(u: RadialField, v: RadialField, params: CouplingParams) -> float:
    """K[u,v] = |u|_{H1}^2 + |v|_{H1}^2 - Phi[u,v]."""
    return norm_h1_sq(u) + norm_h1_sq(v) - quartic_coupling(u, v, params)


def mass_second_derivative(s: State, params: CouplingParams) -> float:
    """y'' = 2 |(u_t,v_t)|^2 - 2 K[u,v], exact along the flow."""
    return 2.0 * kinetic_energy_sq(s) - 2.0 * nehari(s.u, s.v, params)


def projection(s: State, eps_mass: float = EPS_MASS) -> float:
    """P = <(u,v),(u_t,v_t)>^2 / y, and 0 on the zero-mass branch."""
    y = mass(s)
    if y <= eps_mass:
        return 0.0
    ip = inner_l2(s.u, s.ut) + inner_l2(s.v, s.vt)
    return ip * ip / y


def action(u: RadialField, v: RadialField, params: CouplingParams) -> float:
    """J[u,v] = 1/2 (|u|_{H1}^2 + |v|_{H1}^2) - Phi/4."""
    h1 = norm_h1_sq(u) + norm_h1_sq(v)
    return 0.5 * h1 - 0.25 * quartic_coupling(u, v, params)


def e1(u: RadialField, v: RadialField) -> float:
    """E1[u,v] = 1/4 (|u|_{H1}^2 + |v|_{H1}^2); J = K/4 + E1 exactly."""
    return 0.25 * (norm_h1_sq(u) + norm_h1_sq(v))


# =====================================================================
# Identity residuals
# =====================================================================

def gamma_identity_gap(s: State, params: CouplingParams, gamma: float) -> float:
    """Residual of the gamma-parametrized energy/Nehari identity.

    |2(1+g)E - K - (1+g)|(u_t,v_t)|^2 - g(|u|_{H1}^2+|v|_{H1}^2)
     - (1-g)/2 Phi|, pure algebra, <= 1e-12 * gamma_identity_scale for
    any State.  For beta >= -1 and g in (0,1] the dropped term
    (1-g)/2 * Phi is non-negative, which turns the identity into the
    lower bound used by the concavity argument.
    """
    if not np.isfinite(gamma):
        raise ValueError(f"gamma must be finite, got {gamma}")
    h1 = norm_h1_sq(s.u) + norm_h1_sq(s.v)
    kin = kinetic_energy_sq(s)
    phi = quartic_coupling(s.u, s.v, params)
    e = 0.5 * (h1 + kin) - 0.25 * phi
    k = h1 - phi
    lhs = 2.0 * (1.0 + gamma) * e - k
    rhs = (1.0 + gamma) * kin + gamma * h1 + 0.5 * (1.0 - gamma) * phi
    return abs(lhs - rhs)


def gamma_identity_scale(s: State, params: CouplingParams, gamma: float) -> float:
    """Sum of absolute values of the identity's terms."""
    h1 = norm_h1_sq(s.u) + norm_h1_sq(s.v)
    kin = kinetic_energy_sq(s)
    phi = quartic_coupling(s.u, s.v, params)
    e = 0.5 * (h1 + kin) - 0.25 * phi
    k = h1 - phi
    return (
        abs(2.0 * (1.0 + gamma) * e)
        + abs(k)
        + abs((1.0 + gamma) * kin)
        + abs(gamma * h1)
        + abs(0.5 * (1.0 - gamma) * phi)
    )


def energy_decomposition_gap(s: State, params: CouplingParams) -> float:
    """Residual of the orthogonal decomposition of E through P and y.

    With c = <(u,v),(u_t,v_t)>/y,

        E = 1/2 (P + y)
            + 1/2 (|u_t - c u|^2 + |v_t - c v|^2 + |grad u|^2 + |grad v|^2)
            - Phi/4,

    valid for y > 0; exact to round-off.
    """
    y = mass(s)
    if y <= EPS_MASS:
        raise ValueError("energy decomposition requires positive mass")
    c = (inner_l2(s.u, s.ut) + inner_l2(s.v, s.vt)) / y
    ru = RadialField(s.grid, s.ut.values - c * s.u.values)
    rv = RadialField(s.grid, s.vt.values - c * s.v.values)
    grad = (norm_h1_sq(s.u) - norm_l2_sq(s.u)) + (norm_h1_sq(s.v) - norm_l2_sq(s.v))
    rhs = (
        0.5 * (projection(s) + y)
        + 0.5 * (norm_l2_sq(ru) + norm_l2_sq(rv) + grad)
        - 0.25 * quartic_coupling(s.u, s.v, params)
    )
    return abs(energy(s, params) - rhs)


def energy_decomposition_scale(s: State, params: CouplingParams) -> float:
    """Sum of absolute values of the decomposition's terms."""
    y = mass(s)
    if y <= EPS_MASS:
        raise ValueError("energy decomposition requires positive mass")
    c = (inner_l2(s.u, s.ut) + inner_l2(s.v, s.vt)) / y
    ru = RadialField(s.grid, s.ut.values - c * s.u.values)
    rv = RadialField(s.grid, s.vt.values - c * s.v.values)
    grad = (norm_h1_sq(s.u) - norm_l2_sq(s.u)) + (norm_h1_sq(s.v) - norm_l2_sq(s.v))
    return (
        abs(energy(s, params))
        + 0.5 * (projection(s) + y)
        + 0.5 * (norm_l2_sq(ru) + norm_l2_sq(rv) + abs(grad))
        + 0.25 * abs(quartic_coupling(s.u, s.v, params))
    )


def g_threshold(params: CouplingParams, k1: float, k2: float) -> float:
    """Amplitude functional G(beta,k1,k2) of the bump construction.

    G = (k1^2 + k2^2)/2 - (1-beta) k1^2 k2^2 / (k1^2 + k2^2); requesting
    G at least as large as the profile's Rayleigh-type ratio is what
    places bump data inside the projection blow-up criterion.
    """
    q = k1 * k1 + k2 * k2
    if q == 0.0:
        raise ValueError("amplitudes (k1, k2) must not both vanish")
    return 0.5 * q - (1.0 - params.beta) * (k1 * k1) * (k2 * k2) / q


# =====================================================================
# Snapshots and serialization
# =====================================================================

def evaluate_snapshot(s: State, params: CouplingParams) -> FunctionalSnapshot:
    """Evaluate every snapshot functional on one State."""
    h1 = norm_h1_sq(s.u) + norm_h1_sq(s.v)
    kin = kinetic_energy_sq(s)
    phi = quartic_coupling(s.u, s.v, params)
    k = h1 - phi
    return FunctionalSnapshot(
        t=s.t,
        E=0.5 * (h1 + kin) - 0.25 * phi,
        y=mass(s),
        dy=mass_derivative(s),
        d2y=2.0 * kin - 2.0 * k,
        P=projection(s),
        K=k,
        J=0.5 * h1 - 0.25 * phi,
        kinetic=kin,
        quartic=phi,
        sup_u=float(np.max(np.abs(s.u.values))),
        sup_v=float(np.max(np.abs(s.v.values))),
    )


def snapshots_to_csv(snapshots: List[FunctionalSnapshot], path: str) -> None:
    """Write snapshots as CSV rows in the fixed column order."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(SNAPSHOT_COLUMNS) + "\n")
        for snap in snapshots:
            fh.write(",".join(repr(float(x)) for x in snap.row()) + "\n")


def snapshots_from_csv(path: str) -> List[FunctionalSnapshot]:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != ",".join(SNAPSHOT_COLUMNS):
            raise ValueError(f"unexpected snapshot header in {path}: {header}")
        out = []
        for line in fh:
            if not line.strip():
                continue
            vals = [float(x) for x in line.split(",")]
            out.append(FunctionalSnapshot(**dict(zip(SNAPSHOT_COLUMNS, vals))))
    return out


STATE_CSV_HEADER = "r,u,ut,v,vt"


def state_to_csv(s: State, path: str) -> None:
    """Dump a constructed State for inspection (columns r,u,ut,v,vt)."""
    cols = (s.u.values, s.ut.values, s.v.values, s.vt.values)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(STATE_CSV_HEADER + "\n")
        for i, r in enumerate(s.grid.nodes):
            fh.write(",".join(repr(float(x)) for x in (r, *[c[i] for c in cols])) + "\n")


def state_from_csv(path: str, grid=None, t: float = 0.0) -> State:
    """Read a State written by state_to_csv."""
    from .grid import build_grid  # local import to keep module load light

    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 5:
        raise ValueError(f"expected 5 columns (r,u,ut,v,vt) in {path}")
    r = data[:, 0]
    if grid is None:
        dr = 2.0 * r[0]
        grid = build_grid(r_max=dr * r.size, n=r.size)
    if r.size != grid.n or not np.allclose(r, grid.nodes, rtol=0.0, atol=1e-10 * grid.dr):
        raise ValueError(f"r column in {path} does not match the grid nodes")
    fields = [RadialField(grid, data[:, j]) for j in range(1, 5)]
    return State(u=fields[0], ut=fields[1], v=fields[2], vt=fields[3], t=t)
