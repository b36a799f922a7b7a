"""Experiment engine: config parsing, full runs, and parameter sweeps.

A config describes one pipeline run: build a grid and a coupling,
construct an initial datum from one of the shipped families, optionally
compute the well level d, classify the datum, integrate it, and write
the report files (delimited time series, verdict and summary JSON, and
rendered figures) into one directory.  Sweeps rerun the pipeline across
one dotted config parameter and collect a row per point.

Determinism is a contract: rerunning the same config writes
byte-identical files.  Nothing here reads the clock, and figures are
written without embedded timestamps.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from matplotlib.figure import Figure

from .classify import Verdict, classify, verdict_to_json
from .data_factory import BumpSpec, bump_data, scaled_groundstate_data, zero_energy_data
from .dynamics import (
    CONTAINMENT_CELLS,
    CONTAINMENT_LEVEL,
    SimOptions,
    SimResult,
    simulate,
    sim_result_to_json,
)
from .functionals import (
    CouplingParams,
    State,
    energy,
    mass,
    mass_derivative,
    nehari,
    projection,
    snapshots_to_csv,
    state_from_csv,
    state_to_csv,
)
from .grid import RadialField, build_grid
from .groundstate import (
    GroundState,
    MinimizeOptions,
    groundstate_to_csv,
    groundstate_to_json,
    minimize_d,
)

DATA_FAMILIES = ("zero", "bump", "scaled_gs", "zero_energy", "custom_csv")
OUTPUT_FORMATS = ("csv", "json", "png")
THREADS_ENV = "KGLAB_THREADS"

SWEEP_CSV_HEADER = "param,E0,K0,y0,P0,d,verdict,outcome,t_star,error"


class ConfigError(ValueError):
    """Invalid config value, carrying the dotted field path."""

    def __init__(self, path: str, message: str) -> None:
        self.path = path
        super().__init__(f"{path}: {message}")


# =====================================================================
# Config model
# =====================================================================

@dataclass(frozen=True)
class GridConfig:
    r_max: float = 30.0
    n: int = 1024


@dataclass(frozen=True)
class CouplingConfig:
    beta: float = 1.0


@dataclass(frozen=True)
class DataConfig:
    family: str = "zero"
    R: float = 5.0
    k1: Optional[float] = None
    k2: Optional[float] = None
    lam: float = 0.5
    eps: float = 0.1
    path: Optional[str] = None


@dataclass(frozen=True)
class SimulationConfig:
    dt: float = 1e-3
    t_end: float = 10.0
    snapshot_every: int = 10
    sup_threshold: float = 1e6
    gamma_levine: float = 1.5
    dt_min: Optional[float] = None


@dataclass(frozen=True)
class GroundstateConfig:
    enabled: bool = False
    seed_profile: Optional[str] = None
    max_iters: int = 600
    step_size: float = 0.6
    tol_residual: float = 1e-6
    tol_K: float = 1e-10


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    formats: Tuple[str, ...] = OUTPUT_FORMATS


@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    coupling: CouplingConfig = field(default_factory=CouplingConfig)
    data: DataConfig = field(default_factory=DataConfig)
    sim: SimulationConfig = field(default_factory=SimulationConfig)
    groundstate: GroundstateConfig = field(default_factory=GroundstateConfig)
    output: OutputConfig = field(default_factory=OutputConfig)


_SECTIONS = {
    "grid": GridConfig,
    "coupling": CouplingConfig,
    "data": DataConfig,
    "sim": SimulationConfig,
    "groundstate": GroundstateConfig,
    "output": OutputConfig,
}


def parse_config_text(text: str) -> dict:
    """Parse dotted key=value lines, or a JSON object, into sections.

    The two formats are interchangeable; a leading '{' selects JSON.
    Values in the line format are read as JSON scalars when they parse
    as such, bare words otherwise.
    """
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            mapping = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<json>", f"not valid JSON: {exc}") from exc
        if not isinstance(mapping, dict):
            raise ConfigError("<json>", "top level must be an object")
        return mapping
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"<line {lineno}>", f"expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(key, "conflicts with an earlier scalar value")
        node[parts[-1]] = parsed
    return out


def _coerce(section: str, name: str, value, target_type):
    # Config files carry JSON scalars; numeric fields accept ints for
    # floats but nothing silently truncates.
    path = f"{section}.{name}"
    if value is None:
        return None
    if target_type is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if target_type is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if target_type is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected true/false, got {value!r}")
        return value
    if target_type is str:
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    return value


_FIELD_TYPES = {
    (GridConfig, "r_max"): float,
    (GridConfig, "n"): int,
    (CouplingConfig, "beta"): float,
    (DataConfig, "family"): str,
    (DataConfig, "R"): float,
    (DataConfig, "k1"): float,
    (DataConfig, "k2"): float,
    (DataConfig, "lam"): float,
    (DataConfig, "eps"): float,
    (DataConfig, "path"): str,
    (SimulationConfig, "dt"): float,
    (SimulationConfig, "t_end"): float,
    (SimulationConfig, "snapshot_every"): int,
    (SimulationConfig, "sup_threshold"): float,
    (SimulationConfig, "gamma_levine"): float,
    (SimulationConfig, "dt_min"): float,
    (GroundstateConfig, "enabled"): bool,
    (GroundstateConfig, "seed_profile"): str,
    (GroundstateConfig, "max_iters"): int,
    (GroundstateConfig, "step_size"): float,
    (GroundstateConfig, "tol_residual"): float,
    (GroundstateConfig, "tol_K"): float,
    (OutputConfig, "directory"): str,
}


def _build_section(section: str, cls, mapping: dict):
    known = {f.name for f in fields(cls)}
    for key in mapping:
        if key not in known:
            raise ConfigError(f"{section}.{key}", "unknown key")
    kwargs = {}
    for name, value in mapping.items():
        if (cls, name) in _FIELD_TYPES:
            kwargs[name] = _coerce(section, name, value, _FIELD_TYPES[(cls, name)])
        elif cls is OutputConfig and name == "formats":
            if isinstance(value, str):
                value = [v.strip() for v in value.split(",") if v.strip()]
            if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
                raise ConfigError("output.formats", f"expected a list, got {value!r}")
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(section, str(exc)) from exc


def build_config(mapping: dict) -> ExperimentConfig:
    """Assemble and validate an ExperimentConfig from parsed sections."""
    for key in mapping:
        if key not in _SECTIONS:
            raise ConfigError(key, "unknown section")
    cfg = ExperimentConfig(
        **{
            name: _build_section(name, cls, mapping.get(name, {}))
            for name, cls in _SECTIONS.items()
        }
    )
    _validate_config(cfg)
    return cfg


def load_config(path: str) -> ExperimentConfig:
    """Read a config file (key=value lines or JSON)."""
    with open(path, encoding="utf-8") as fh:
        return build_config(parse_config_text(fh.read()))


def _validate_config(cfg: ExperimentConfig) -> None:
    if not (np.isfinite(cfg.grid.r_max) and cfg.grid.r_max > 0.0):
        raise ConfigError("grid.r_max", f"must be positive, got {cfg.grid.r_max}")
    if cfg.grid.n < 16:
        raise ConfigError("grid.n", f"must be at least 16, got {cfg.grid.n}")
    if not np.isfinite(cfg.coupling.beta):
        raise ConfigError("coupling.beta", "must be finite")
    if cfg.data.family not in DATA_FAMILIES:
        raise ConfigError(
            "data.family",
            f"must be one of {DATA_FAMILIES}, got {cfg.data.family!r}",
        )
    if cfg.data.family == "custom_csv" and not cfg.data.path:
        raise ConfigError("data.path", "required for the custom_csv family")
    if cfg.data.family in ("scaled_gs", "zero_energy") and not cfg.groundstate.enabled:
        raise ConfigError(
            "groundstate.enabled",
            f"the {cfg.data.family} family needs the computed level; set it to true",
        )
    if not cfg.sim.dt > 0.0:
        raise ConfigError("sim.dt", f"must be positive, got {cfg.sim.dt}")
    if not cfg.sim.t_end > 0.0:
        raise ConfigError("sim.t_end", f"must be positive, got {cfg.sim.t_end}")
    for name in ("sup_threshold", "gamma_levine"):
        if not getattr(cfg.sim, name) > 0.0:
            raise ConfigError(f"sim.{name}", "must be positive")
    if cfg.sim.snapshot_every < 1:
        raise ConfigError("sim.snapshot_every", "must be at least 1")
    if cfg.groundstate.enabled:
        try:
            _minimize_options(cfg.groundstate)
        except ValueError as exc:
            raise ConfigError("groundstate", str(exc)) from exc
    bad = [f for f in cfg.output.formats if f not in OUTPUT_FORMATS]
    if bad:
        raise ConfigError(
            "output.formats", f"unknown formats {bad}; allowed: {OUTPUT_FORMATS}"
        )


def _minimize_options(g: GroundstateConfig) -> MinimizeOptions:
    return MinimizeOptions(
        max_iters=g.max_iters,
        step_size=g.step_size,
        tol_residual=g.tol_residual,
        tol_K=g.tol_K,
        seed_profile=g.seed_profile,
    )


def config_with(cfg: ExperimentConfig, dotted: str, value) -> ExperimentConfig:
    """A copy of cfg with one dotted field replaced (sweep axis)."""
    section, _, name = dotted.partition(".")
    if section not in _SECTIONS or not name:
        raise ConfigError(dotted, "expected section.field")
    current = getattr(cfg, section)
    if name not in {f.name for f in fields(current)}:
        raise ConfigError(dotted, "unknown key")
    return replace(cfg, **{section: replace(current, **{name: value})})


# =====================================================================
# Pipeline pieces
# =====================================================================

def build_initial_state(cfg: ExperimentConfig, gs: Optional[GroundState]) -> State:
    """Construct the configured datum on the configured grid."""
    grid = build_grid(cfg.grid.r_max, cfg.grid.n)
    params = CouplingParams(beta=cfg.coupling.beta)
    family = cfg.data.family
    if family == "zero":
        zero = RadialField.zeros(grid)
        return State(u=zero, ut=zero, v=zero, vt=zero, t=0.0)
    if family == "bump":
        spec = BumpSpec(R=cfg.data.R, grid=grid, k1=cfg.data.k1, k2=cfg.data.k2)
        return bump_data(spec, params)
    if family == "scaled_gs":
        assert gs is not None
        return scaled_groundstate_data(gs, cfg.data.lam)
    if family == "zero_energy":
        assert gs is not None
        return zero_energy_data(gs, cfg.data.eps)
    if family == "custom_csv":
        return state_from_csv(cfg.data.path, grid=grid)
    raise ConfigError("data.family", f"unhandled family {family!r}")


def compute_groundstate(cfg: ExperimentConfig) -> Optional[GroundState]:
    if not cfg.groundstate.enabled:
        return None
    grid = build_grid(cfg.grid.r_max, cfg.grid.n)
    params = CouplingParams(beta=cfg.coupling.beta)
    return minimize_d(params, grid, _minimize_options(cfg.groundstate))


def _sim_options(cfg: ExperimentConfig) -> SimOptions:
    return SimOptions(
        dt=cfg.sim.dt,
        t_end=cfg.sim.t_end,
        snapshot_every=cfg.sim.snapshot_every,
        sup_threshold=cfg.sim.sup_threshold,
        dt_min=cfg.sim.dt_min,
        gamma_levine=cfg.sim.gamma_levine,
    )


def _agreement(verdict: Verdict, result: SimResult) -> Optional[bool]:
    # Inconclusive makes no claim, so there is nothing to contradict.
    if verdict.prediction == "BlowUp":
        return result.outcome.kind == "BlowUpDetected"
    if verdict.prediction == "Global":
        return result.outcome.kind == "Completed"
    return None


# =====================================================================
# Figures
# =====================================================================

def _save_png(fig: Figure, path: Path) -> None:
    # A null Date keeps PNG bytes free of wall-clock metadata.
    fig.savefig(path, format="png", dpi=110, metadata={"Date": None})


def _figure_snapshots(result: SimResult, path: Path) -> None:
    snaps = result.snapshots
    t = [s.t for s in snaps]
    fig = Figure(figsize=(9.0, 6.0))
    axes = fig.subplots(2, 2)
    axes[0][0].plot(t, [s.y for s in snaps])
    axes[0][0].set_ylabel("y")
    axes[0][1].plot(t, [s.E for s in snaps])
    axes[0][1].set_ylabel("E")
    sup = [max(s.sup_u, s.sup_v) for s in snaps]
    axes[1][0].semilogy(t, [max(v, 1e-300) for v in sup])
    axes[1][0].set_ylabel("sup |u|, |v|")
    axes[1][0].set_xlabel("t")
    axes[1][1].plot(t, [s.K for s in snaps])
    axes[1][1].set_ylabel("K")
    axes[1][1].set_xlabel("t")
    fig.tight_layout()
    _save_png(fig, path)


def _figure_profiles(state: State, path: Path) -> None:
    r = state.u.grid.nodes
    fig = Figure(figsize=(7.0, 4.5))
    ax = fig.subplots()
    ax.plot(r, state.u.values, label="u")
    ax.plot(r, state.v.values, label="v", linestyle="--")
    ax.set_xlabel("r")
    ax.set_ylabel("final profiles")
    ax.legend()
    fig.tight_layout()
    _save_png(fig, path)


def _figure_sweep(rows: List[dict], param_name: str, path: Path) -> None:
    fig = Figure(figsize=(7.0, 4.5))
    ax = fig.subplots()
    good = [r for r in rows if not r["error"]]
    xs = [r["param"] for r in good]
    ax.plot(xs, [r["E0"] for r in good], marker="o", label="E0")
    ax.plot(xs, [r["K0"] for r in good], marker="s", label="K0")
    ds = [(r["param"], r["d"]) for r in good if r["d"] is not None]
    if ds:
        ax.plot([p for p, _ in ds], [v for _, v in ds], marker="^", label="d")
    ax.set_xlabel(param_name)
    ax.legend()
    fig.tight_layout()
    _save_png(fig, path)


# =====================================================================
# Reports
# =====================================================================

def _write_json(obj: dict, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass(frozen=True)
class ExperimentReport:
    """What one run produced and where its files went."""

    config: ExperimentConfig
    verdict: Verdict
    result: SimResult
    groundstate: Optional[GroundState]
    summary: dict
    files: Dict[str, str]


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Run the full pipeline for one config and write its reports."""
    out_dir = Path(cfg.output.directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    formats = set(cfg.output.formats)

    gs = compute_groundstate(cfg)
    params = CouplingParams(beta=cfg.coupling.beta)
    state = build_initial_state(cfg, gs)
    verdict = classify(state, params, gs.d_level if gs is not None else None)
    result = simulate(state, params, _sim_options(cfg))

    files: Dict[str, str] = {}
    if "csv" in formats:
        snapshots_to_csv(result.snapshots, str(out_dir / "snapshots.csv"))
        files["snapshots"] = "snapshots.csv"
        if gs is not None:
            groundstate_to_csv(gs, str(out_dir / "groundstate.csv"))
            files["groundstate"] = "groundstate.csv"
    if "json" in formats:
        _write_json(verdict_to_json(verdict), out_dir / "verdict.json")
        files["verdict"] = "verdict.json"
        if gs is not None:
            _write_json(groundstate_to_json(gs), out_dir / "groundstate.json")
            files["groundstate_summary"] = "groundstate.json"
    if "png" in formats:
        _figure_snapshots(result, out_dir / "snapshots.png")
        files["snapshots_figure"] = "snapshots.png"
        _figure_profiles(result.final_state, out_dir / "profile.png")
        files["profile_figure"] = "profile.png"

    summary = {
        "beta": cfg.coupling.beta,
        "family": cfg.data.family,
        "prediction": verdict.prediction,
        "simulation": sim_result_to_json(result),
        "agreement": _agreement(verdict, result),
        "d_level": gs.d_level if gs is not None else None,
        "boundary_policy": {
            "trusted": result.trusted,
            "wall_cells": CONTAINMENT_CELLS,
            "wall_level": CONTAINMENT_LEVEL,
            "note": (
                "reflecting wall at r_max; once fields reach the wall band "
                "the reported dynamics no longer approximate free space"
            ),
        },
        "files": files,
    }
    if "json" in formats:
        _write_json(summary, out_dir / "summary.json")
    return ExperimentReport(
        config=cfg,
        verdict=verdict,
        result=result,
        groundstate=gs,
        summary=summary,
        files=files,
    )


# =====================================================================
# Sweeps
# =====================================================================

def _sweep_row(cfg: ExperimentConfig, param: str, value) -> dict:
    row = {
        "param": value,
        "E0": None,
        "K0": None,
        "y0": None,
        "P0": None,
        "d": None,
        "verdict": "",
        "outcome": "",
        "t_star": None,
        "error": "",
    }
    try:
        point = config_with(cfg, param, value)
        _validate_config(point)
        gs = compute_groundstate(point)
        params = CouplingParams(beta=point.coupling.beta)
        state = build_initial_state(point, gs)
        verdict = classify(state, params, gs.d_level if gs is not None else None)
        result = simulate(state, params, _sim_options(point))
        row.update(
            E0=energy(state, params),
            K0=nehari(state.u, state.v, params),
            y0=mass(state),
            P0=projection(state),
            d=gs.d_level if gs is not None else None,
            verdict=verdict.prediction,
            outcome=result.outcome.kind,
            t_star=result.t_star,
        )
    except Exception as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def max_workers() -> int:
    """Sweep parallelism: KGLAB_THREADS caps the CPU count."""
    cap = os.environ.get(THREADS_ENV)
    workers = os.cpu_count() or 1
    if cap is not None:
        try:
            workers = min(workers, max(1, int(cap)))
        except ValueError:
            raise ConfigError(THREADS_ENV, f"expected an integer, got {cap!r}")
    return workers


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def run_sweep(
    cfg: ExperimentConfig, param: str, values: Sequence[float]
) -> List[dict]:
    """Run the pipeline per axis value and write sweep.csv (+ figure).

    Rows run concurrently but land in axis order; a failing row records
    its error and the sweep continues.
    """
    config_with(cfg, param, values[0] if values else 0.0)
    out_dir = Path(cfg.output.directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    if values:
        with ThreadPoolExecutor(max_workers=min(len(values), max_workers())) as pool:
            rows = list(pool.map(lambda v: _sweep_row(cfg, param, v), values))
    else:
        rows = []
    with open(out_dir / "sweep.csv", "w", encoding="utf-8") as fh:
        fh.write(SWEEP_CSV_HEADER + "\n")
        for row in rows:
            cells = [
                _format_cell(row[name])
                for name in (
                    "param", "E0", "K0", "y0", "P0", "d",
                    "verdict", "outcome", "t_star",
                )
            ]
            err = row["error"].replace("\n", " ").replace(",", ";")
            fh.write(",".join(cells + [err]) + "\n")
    if "png" in set(cfg.output.formats) and rows:
        _figure_sweep(rows, param, out_dir / "sweep.png")
    return rows
