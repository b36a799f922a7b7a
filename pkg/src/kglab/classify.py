"""Sufficient-condition checks on initial data and the joined verdict.

Three independent checks, each a sufficient condition only:

* ``check_negative_energy``: breakdown from E(0) < 0, or from E(0) = 0
  (within a tolerance band) together with a strictly positive mass
  slope; needs beta >= -1.
* ``check_projection_bound``: breakdown from mass-growth trapping,
  y(0) > 0, dy(0) >= 0, y(0)/4 + P(0)/2 >= E(0) > 0; any beta.
* ``check_potential_well``: the energy-level dichotomy below d; needs
  beta >= 0 and a computed level d.  K >= 0 traps the flow in the well
  (global existence), K < 0 expels it (breakdown).

``classify`` runs whichever checks apply, cross-checks the set
inclusion that a negative- or zero-energy datum must also sit on the
unstable side of the well, and emits a Verdict that never guesses:
when no hypothesis holds the prediction is Inconclusive.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

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

# |E| below this (relative to the state's energy scale) counts as
# exactly zero for the zero-energy branch; exact zero is measure-zero
# in floating point.
ZERO_ENERGY_BAND = 1e-8
# Slack on the trapping inequality, which constructed boundary data
# satisfies with equality up to round-off.
PROJECTION_SLACK = 1e-12

FINDING_TAGS = (
    "NegativeEnergy",
    "ZeroEnergyAngle",
    "ProjectionBound",
    "WellUnstable",
    "WellStable",
)

PREDICT_BLOW_UP = "BlowUp"
PREDICT_GLOBAL = "Global"
PREDICT_INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class Finding:
    """One satisfied sufficient condition with its witness scalars."""

    tag: str
    blow_up: bool
    evidence: Dict[str, float]
    note: str = ""

    def __post_init__(self) -> None:
        if self.tag not in FINDING_TAGS:
            raise ValueError(f"unknown finding tag {self.tag!r}")
        for key, val in self.evidence.items():
            if not np.isfinite(val):
                raise ValueError(f"evidence {key} is not finite: {val}")


@dataclass(frozen=True)
class Verdict:
    """Joined result of all applicable checks on one datum."""

    findings: Tuple[Finding, ...]
    evidence: Dict[str, float]
    prediction: str
    beta_valid: Dict[str, bool] = field(default_factory=dict)

    def __post_init__(self) -> None:
        any_blow_up = any(f.blow_up for f in self.findings)
        stable = any(f.tag == "WellStable" for f in self.findings)
        if any_blow_up != (self.prediction == PREDICT_BLOW_UP):
            raise ValueError(
                "prediction must be BlowUp exactly when a breakdown finding exists"
            )
        if not any_blow_up and stable != (self.prediction == PREDICT_GLOBAL):
            raise ValueError(
                "prediction must be Global exactly when only WellStable holds"
            )
        for key, val in self.evidence.items():
            if not np.isfinite(val):
                raise ValueError(f"evidence {key} is not finite: {val}")

    @property
    def conclusive(self) -> bool:
        return self.prediction != PREDICT_INCONCLUSIVE


def check_negative_energy(s0: State, params: CouplingParams) -> Optional[Finding]:
    """Breakdown check from E < 0, or E = 0 with growing mass."""
    if not params.admits_negative_energy_criterion:
        return None
    e0 = energy(s0, params)
    dy0 = mass_derivative(s0)
    band = ZERO_ENERGY_BAND * energy_scale(s0, params)
    if abs(e0) <= band:
        if dy0 > 0.0:
            return Finding(
                tag="ZeroEnergyAngle",
                blow_up=True,
                evidence={"E0": e0, "dy0": dy0},
                note=f"|E0| within {ZERO_ENERGY_BAND:g} * scale treated as zero",
            )
        return None
    if e0 < 0.0:
        return Finding(
            tag="NegativeEnergy", blow_up=True, evidence={"E0": e0, "dy0": dy0}
        )
    return None


def check_projection_bound(s0: State, params: CouplingParams) -> Optional[Finding]:
    """Breakdown check from mass-growth trapping; valid for every beta."""
    y0 = mass(s0)
    if not y0 > 0.0:
        return None
    dy0 = mass_derivative(s0)
    if not dy0 >= 0.0:
        return None
    e0 = energy(s0, params)
    p0 = projection(s0)
    slack = PROJECTION_SLACK * energy_scale(s0, params)
    if not (e0 > 0.0 and 0.25 * y0 + 0.5 * p0 + slack >= e0):
        return None
    return Finding(
        tag="ProjectionBound",
        blow_up=True,
        evidence={
            "y0": y0,
            "dy0": dy0,
            "P0": p0,
            "E0": e0,
            "t_b": 0.5 * dy0 / y0,
            "t_b_alt": 0.5 * dy0,
        },
    )


def check_potential_well(
    s0: State, params: CouplingParams, d: float
) -> Optional[Finding]:
    """Energy-level dichotomy below d; needs beta >= 0."""
    if not (np.isfinite(d) and d > 0.0):
        raise ValueError(f"well level d must be positive, got {d}")
    if not params.admits_potential_well:
        return None
    e0 = energy(s0, params)
    if not e0 < d:
        return None
    k0 = nehari(s0.u, s0.v, params)
    if k0 >= 0.0:
        return Finding(
            tag="WellStable", blow_up=False, evidence={"E0": e0, "K0": k0, "d": d}
        )
    return Finding(
        tag="WellUnstable", blow_up=True, evidence={"E0": e0, "K0": k0, "d": d}
    )


def classify(
    s0: State, params: CouplingParams, d: Optional[float] = None
) -> Verdict:
    """Run every applicable check and join them into one Verdict.

    The well check runs only when d is supplied.  When a negative- or
    zero-energy finding appears while the well check applies, the well
    must agree (unstable side); disagreement means the discrete
    functionals broke an exact inclusion and is raised, not returned.
    """
    findings = []
    f_neg = check_negative_energy(s0, params)
    if f_neg is not None:
        findings.append(f_neg)
    f_proj = check_projection_bound(s0, params)
    if f_proj is not None:
        findings.append(f_proj)
    f_well = None
    if d is not None:
        f_well = check_potential_well(s0, params, d)
        if f_well is not None:
            findings.append(f_well)

    if (
        f_neg is not None
        and d is not None
        and params.admits_potential_well
        and (f_well is None or f_well.tag != "WellUnstable")
    ):
        raise RuntimeError(
            "inclusion violated: an energy-criterion datum must sit on the "
            f"unstable side of the well (finding {f_neg.tag}, well "
            f"{'absent' if f_well is None else f_well.tag})"
        )

    evidence: Dict[str, float] = {
        "E0": energy(s0, params),
        "y0": mass(s0),
        "dy0": mass_derivative(s0),
        "P0": projection(s0),
        "K0": nehari(s0.u, s0.v, params),
    }
    if d is not None:
        evidence["d"] = float(d)
    if evidence["y0"] > 0.0:
        evidence["t_b"] = 0.5 * evidence["dy0"] / evidence["y0"]
    evidence["t_b_alt"] = 0.5 * evidence["dy0"]

    if any(f.blow_up for f in findings):
        prediction = PREDICT_BLOW_UP
    elif any(f.tag == "WellStable" for f in findings):
        prediction = PREDICT_GLOBAL
    else:
        prediction = PREDICT_INCONCLUSIVE

    beta_valid = {
        "negative_energy": params.admits_negative_energy_criterion,
        "projection_bound": True,
        "potential_well": params.admits_potential_well,
    }
    return Verdict(
        findings=tuple(findings),
        evidence=evidence,
        prediction=prediction,
        beta_valid=beta_valid,
    )


def verdict_to_json(v: Verdict) -> dict:
    """JSON-ready mapping with every finding and evidence scalar."""
    return {
        "prediction": v.prediction,
        "findings": [
            {
                "tag": f.tag,
                "blow_up": f.blow_up,
                "evidence": dict(f.evidence),
                "note": f.note,
            }
            for f in v.findings
        ],
        "evidence": dict(v.evidence),
        "beta_valid": dict(v.beta_valid),
        "zero_energy_tol": ZERO_ENERGY_BAND,
    }
