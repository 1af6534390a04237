"""Shared test oracles, independent of the library's computation paths."""

from __future__ import annotations

import math

import numpy as np
import pytest

from vekit import Scenario, TabulatedCdf


def cox_fixed_point_oracle(s: Scenario, t: float, n_grid: int = 200_000) -> float:
    """VE from the self-consistent weighted hazard-mean ratio.

    Iterates theta <- int(w * lam1) / int(w * lam0) with
    w = S1 S0 / (theta S1 + S0) by composite trapezoid on a dense grid
    split at the hazard jumps (edge nodes nudged inside each piece so a
    right-continuous hazard is sampled on the correct side).  Independent
    of the library's root solve: different algorithm, different quadrature.
    """
    knots = [k for k in sorted(set(s.f0.knots()) | set(s.f1.knots())) if 0.0 < k < t]
    edges = np.asarray([0.0] + knots + [t])
    nodes = []
    weights = []
    total = edges[-1] - edges[0]
    for a, b in zip(edges[:-1], edges[1:]):
        m = max(8, int(round(n_grid * (b - a) / total)))
        x = np.linspace(a, b, m + 1)
        w = np.empty(m + 1)
        w[0] = w[-1] = 0.5 * (b - a) / m
        w[1:-1] = (b - a) / m
        x[0] += 1e-9 * (b - a)
        x[-1] -= 1e-9 * (b - a)
        nodes.append(x)
        weights.append(w)
    x = np.concatenate(nodes)
    wq = np.concatenate(weights)
    lam0 = np.atleast_1d(np.asarray(s.f0.hazard(x)))
    lam1 = np.atleast_1d(np.asarray(s.f1.hazard(x)))
    s0 = np.atleast_1d(np.asarray(s.f0.survival(x)))
    s1 = np.atleast_1d(np.asarray(s.f1.survival(x)))
    theta = 1.0
    for _ in range(500):
        w = s1 * s0 / (theta * s1 + s0)
        new = float(np.sum(wq * w * lam1) / np.sum(wq * w * lam0))
        if abs(math.log(new / theta)) < 1e-14:
            return 1.0 - new
        theta = new
    return 1.0 - theta


def random_dominated_pair(rng: np.random.Generator, n_points: int = 24):
    """A tabulated pair with F1 < F0 strictly on (0, tau], tau = 1.

    F0 is a random nondecreasing curve; F1 is a randomly damped copy kept
    strictly below F0 and nondecreasing.
    """
    t = np.concatenate(([0.0], np.sort(rng.uniform(0.02, 0.98, n_points - 2)), [1.0]))
    steps = rng.exponential(1.0, n_points - 1)
    f0 = np.concatenate(([0.0], np.cumsum(steps)))
    f0 *= rng.uniform(0.05, 0.9) / f0[-1]
    damp = rng.uniform(0.05, 0.95, n_points)
    raw = f0 * damp
    f1 = np.minimum(np.maximum.accumulate(raw), 0.999 * f0)
    s = Scenario(
        f0=TabulatedCdf(list(zip(t, f0))),
        f1=TabulatedCdf(list(zip(t, f1))),
        tau=1.0,
    )
    return s


@pytest.fixture
def rng():
    return np.random.default_rng(20250809)
