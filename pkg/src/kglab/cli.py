"""Command line front end over the experiment engine."""

from __future__ import annotations

import json
from pathlib import Path

import click
import numpy as np

from .classify import classify as classify_state
from .classify import verdict_to_json
from .experiment import (
    ConfigError,
    build_initial_state,
    config_with,
    load_config,
    run_experiment,
    run_sweep,
    compute_groundstate,
)
from .functionals import (
    CouplingParams,
    State,
    action,
    e1,
    energy_decomposition_gap,
    energy_decomposition_scale,
    gamma_identity_gap,
    gamma_identity_scale,
    kinetic_energy_sq,
    energy,
    nehari,
    state_to_csv,
)
from .grid import RadialField, build_grid, norm_h1_sq
from .groundstate import (
    MinimizeOptions,
    SEED_NAMES,
    groundstate_to_csv,
    groundstate_to_json,
    minimize_d,
)


def _fail(exc: Exception) -> None:
    raise click.ClickException(str(exc))


@click.group()
def main() -> None:
    """Numerical laboratory for a coupled cubic Klein-Gordon system."""


@main.command()
@click.option(
    "--config",
    "config_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False),
    help="Experiment config (key=value lines or JSON).",
)
@click.option(
    "--out",
    "out_dir",
    default=None,
    show_default=True,
    help="Override output.directory from the config.",
)
def simulate(config_path: str, out_dir: str) -> None:
    """Run the full pipeline and write the report files."""
    try:
        cfg = load_config(config_path)
        if out_dir is not None:
            cfg = config_with(cfg, "output.directory", out_dir)
        report = run_experiment(cfg)
    except (ConfigError, ValueError, RuntimeError, OSError) as exc:
        _fail(exc)
    click.echo(json.dumps(report.summary, indent=2, sort_keys=True))


@main.command()
@click.option("--beta", required=True, type=float, help="Coupling strength.")
@click.option("--r-max", default=35.0, show_default=True, type=float)
@click.option("--n", default=1024, show_default=True, type=int)
@click.option(
    "--seed-profile",
    default=None,
    show_default=True,
    type=click.Choice(SEED_NAMES),
    help="Restrict the flow to one seed (default: all).",
)
@click.option("--max-iters", default=600, show_default=True, type=int)
@click.option("--step-size", default=0.6, show_default=True, type=float)
@click.option("--tol-residual", default=1e-6, show_default=True, type=float)
@click.option("--tol-k", default=1e-10, show_default=True, type=float)
@click.option("--out", "out_dir", default="out", show_default=True)
def groundstate(
    beta: float,
    r_max: float,
    n: int,
    seed_profile: str,
    max_iters: int,
    step_size: float,
    tol_residual: float,
    tol_k: float,
    out_dir: str,
) -> None:
    """Minimize the action level d and write the profile pair."""
    try:
        opts = MinimizeOptions(
            max_iters=max_iters,
            step_size=step_size,
            tol_residual=tol_residual,
            tol_K=tol_k,
            seed_profile=seed_profile,
        )
        gs = minimize_d(CouplingParams(beta=beta), build_grid(r_max, n), opts)
    except (ValueError, RuntimeError) as exc:
        _fail(exc)
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    groundstate_to_csv(gs, str(path / "groundstate.csv"))
    summary = groundstate_to_json(gs)
    with open(path / "groundstate.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    click.echo(json.dumps(summary, indent=2, sort_keys=True))


@main.command("classify")
@click.option(
    "--config",
    "config_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False),
    help="Experiment config describing the datum.",
)
def classify_cmd(config_path: str) -> None:
    """Check the datum against the sufficient conditions.

    Exit status 0 when some condition fires, 2 when inconclusive.
    """
    try:
        cfg = load_config(config_path)
        gs = compute_groundstate(cfg)
        state = build_initial_state(cfg, gs)
        verdict = classify_state(
            state,
            CouplingParams(beta=cfg.coupling.beta),
            gs.d_level if gs is not None else None,
        )
    except (ConfigError, ValueError, RuntimeError, OSError) as exc:
        _fail(exc)
    click.echo(json.dumps(verdict_to_json(verdict), indent=2, sort_keys=True))
    if not verdict.findings:
        click.get_current_context().exit(2)


@main.command()
@click.option(
    "--config",
    "config_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False),
    help="Template config for every row.",
)
@click.option(
    "--param",
    required=True,
    help="Dotted config field to vary, e.g. data.lam or coupling.beta.",
)
@click.option(
    "--values",
    required=True,
    help="Comma-separated numeric axis, e.g. 0.5,1.1,3.",
)
@click.option(
    "--out",
    "out_dir",
    default=None,
    show_default=True,
    help="Override output.directory from the config.",
)
def sweep(config_path: str, param: str, values: str, out_dir: str) -> None:
    """Rerun the pipeline across one parameter; write sweep.csv."""
    try:
        cfg = load_config(config_path)
        if out_dir is not None:
            cfg = config_with(cfg, "output.directory", out_dir)
        axis = [float(v) for v in values.split(",") if v.strip() != ""]
        rows = run_sweep(cfg, param, axis)
    except (ConfigError, ValueError, RuntimeError, OSError) as exc:
        _fail(exc)
    failed = sum(1 for r in rows if r["error"])
    click.echo(
        f"{len(rows)} rows ({failed} failed) -> "
        f"{Path(cfg.output.directory) / 'sweep.csv'}"
    )


@main.command("verify-identities")
@click.option("--count", default=200, show_default=True, type=int, help="Random states per suite.")
@click.option("--n", default=256, show_default=True, type=int)
@click.option("--r-max", default=20.0, show_default=True, type=float)
@click.option("--seed", default=1234, show_default=True, type=int)
def verify_identities(count: int, n: int, r_max: float, seed: int) -> None:
    """Check the algebraic identities on random states; exit 1 on failure.

    Covers the gamma-parametrized energy identity, the action split
    J = K/4 + E1, the energy decomposition through the mass line, and
    the kinetic-bound inequality for gamma in (0, 1].
    """
    grid = build_grid(r_max, n)
    rng = np.random.default_rng(seed)

    def random_state() -> State:
        def f():
            vals = np.zeros(grid.n)
            for _ in range(rng.integers(1, 4)):
                amp = rng.uniform(-2.0, 2.0)
                width = rng.uniform(0.5, r_max / 4.0)
                center = rng.uniform(0.0, r_max / 2.0)
                vals += amp * np.exp(-(((grid.nodes - center) / width) ** 2))
            return RadialField(grid, vals)

        return State(u=f(), ut=f(), v=f(), vt=f(), t=0.0)

    states = [random_state() for _ in range(count)]
    worst: dict = {"gamma_identity": 0.0, "action_split": 0.0, "energy_decomposition": 0.0, "kinetic_bound": 0.0}
    failures = 0
    for st in states:
        for beta in (-1.0, -0.5, 0.0, 1.0):
            params = CouplingParams(beta=beta)
            for gamma in (0.1, 0.5, 1.0):
                rel = abs(gamma_identity_gap(st, params, gamma)) / gamma_identity_scale(
                    st, params, gamma
                )
                worst["gamma_identity"] = max(worst["gamma_identity"], rel)
                if rel > 1e-12:
                    failures += 1
                lhs = (1.0 + gamma) * kinetic_energy_sq(st) + gamma * (
                    norm_h1_sq(st.u) + norm_h1_sq(st.v)
                )
                rhs = 2.0 * (1.0 + gamma) * energy(st, params) - nehari(
                    st.u, st.v, params
                )
                slack = 1e-12 * gamma_identity_scale(st, params, gamma)
                if lhs > rhs + slack:
                    failures += 1
                    worst["kinetic_bound"] = max(
                        worst["kinetic_bound"], (lhs - rhs) / slack
                    )
            j = action(st.u, st.v, params)
            k = nehari(st.u, st.v, params)
            e_1 = e1(st.u, st.v)
            scale = abs(j) + 0.25 * abs(k) + e_1
            rel = abs(j - (0.25 * k + e_1)) / scale
            worst["action_split"] = max(worst["action_split"], rel)
            if rel > 1e-12:
                failures += 1
            rel = abs(energy_decomposition_gap(st, params)) / energy_decomposition_scale(
                st, params
            )
            worst["energy_decomposition"] = max(worst["energy_decomposition"], rel)
            if rel > 1e-12:
                failures += 1
    for name, value in sorted(worst.items()):
        click.echo(f"{name}: worst relative residual {value:.3e}")
    if failures:
        click.echo(f"{failures} checks exceeded tolerance")
        click.get_current_context().exit(1)
    click.echo(f"all identities hold on {count} states")


@main.command("make-data")
@click.option(
    "--config",
    "config_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False),
    help="Experiment config describing the datum.",
)
@click.option(
    "--out",
    "out_path",
    default="state.csv",
    show_default=True,
    help="Destination CSV for the constructed state.",
)
def make_data(config_path: str, out_path: str) -> None:
    """Construct the configured initial datum and dump it to CSV."""
    try:
        cfg = load_config(config_path)
        gs = compute_groundstate(cfg)
        state = build_initial_state(cfg, gs)
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        state_to_csv(state, out_path)
    except (ConfigError, ValueError, RuntimeError, OSError) as exc:
        _fail(exc)
    click.echo(out_path)
