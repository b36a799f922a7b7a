"""Shared builders for test fields and states."""

import numpy as np

from kglab import CouplingParams, RadialField, State, build_grid


def gaussian_field(grid, amp=1.0, width=1.0, center=0.0):
    """amp * exp(-((r - center)/width)^2) as a RadialField."""
    return RadialField.from_function(
        grid, lambda r: amp * np.exp(-(((r - center) / width) ** 2))
    )


def rough_random_field(grid, rng, amp=1.0):
    """Unstructured random cell values; enough for algebraic identities."""
    return RadialField(grid, amp * rng.standard_normal(grid.n))


def smooth_random_field(grid, rng, amp=1.0, bumps=4):
    """Superposition of random Gaussian bumps supported inside the ball."""
    v = np.zeros(grid.n)
    r = grid.nodes
    for _ in range(bumps):
        a = amp * rng.uniform(-1.0, 1.0)
        c = rng.uniform(0.0, 0.5 * grid.r_max)
        w = rng.uniform(grid.r_max / 16.0, grid.r_max / 4.0)
        v = v + a * np.exp(-(((r - c) / w) ** 2))
    return RadialField(grid, v)


def random_state(grid, rng, amp=1.0, t=0.0):
    """State with four independent rough random fields."""
    return State(
        u=rough_random_field(grid, rng, amp),
        ut=rough_random_field(grid, rng, amp),
        v=rough_random_field(grid, rng, amp),
        vt=rough_random_field(grid, rng, amp),
        t=t,
    )


def smooth_random_state(grid, rng, amp=1.0, t=0.0):
    """State with four independent smooth random fields."""
    return State(
        u=smooth_random_field(grid, rng, amp),
        ut=smooth_random_field(grid, rng, amp),
        v=smooth_random_field(grid, rng, amp),
        vt=smooth_random_field(grid, rng, amp),
        t=t,
    )


def small_grid(r_max=5.0, n=64):
    return build_grid(r_max=r_max, n=n)


def default_params(beta=1.0):
    return CouplingParams(beta=beta)
