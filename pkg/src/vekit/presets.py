"""Bundled example scenarios addressable by name from the CLI and tests.

``discussion``    exponential pair with attack rates 6.5% / 0.8% at day 182.
``figure3:a..d``  one-year pairs with a 50% control attack rate that agree
                  on the endpoint incidences but differ in path: (a) plain
                  proportional hazards, (b)/(c) arms equal until 0.1/0.5
                  then a linear-in-F tail, (d) a strong early effect that
                  collapses after t = 0.9.
``rampup:1..3``   the ramp-up hazard-path scenarios of the rampup module.
"""

from __future__ import annotations

import math

import numpy as np

from .distributions import Exponential, SurvivalModel, TabulatedCdf
from .errors import DomainError
from .estimands import Scenario
from .rampup import build_scenario

__all__ = ["preset_scenario", "PRESET_NAMES"]

_F3_LAMBDA0 = math.log(2.0)  # F0(1) = 50%
_F3_F1_TAU = 1.0 - 2.0**-0.5  # the proportional-hazards arm's F1(1)
_F3_GRID = 512  # tabulation intervals for the curved parts


def _tabulate(times: np.ndarray, cdf_vals: np.ndarray) -> TabulatedCdf:
    return TabulatedCdf(list(zip(times.tolist(), cdf_vals.tolist())))


def _figure3_pair(breakpoint: float, early_ratio: float) -> tuple[SurvivalModel, SurvivalModel]:
    """Both arms tabulated on a shared grid so the early parts match exactly."""
    grid = np.union1d(np.linspace(0.0, 1.0, _F3_GRID + 1), [breakpoint])
    f0 = _tabulate(grid, -np.expm1(-_F3_LAMBDA0 * grid))
    early = grid[grid <= breakpoint]
    early_f = -np.expm1(-early_ratio * _F3_LAMBDA0 * early)
    times = np.append(early, 1.0)
    # The tail may be exactly flat (breakpoint value == endpoint value up to
    # one ulp); keep F nondecreasing.
    vals = np.append(early_f, max(early_f[-1], _F3_F1_TAU))
    return f0, _tabulate(times, vals)


def _discussion() -> Scenario:
    tau = 182.0
    lam0 = -math.log1p(-0.065) / tau
    lam1 = -math.log1p(-0.008) / tau
    return Scenario(f0=Exponential(lam0), f1=Exponential(lam1), tau=tau)


def _figure3(panel: str) -> Scenario:
    if panel == "a":
        return Scenario(
            f0=Exponential(_F3_LAMBDA0), f1=Exponential(0.5 * _F3_LAMBDA0), tau=1.0
        )
    breakpoints = {"b": (0.1, 1.0), "c": (0.5, 1.0), "d": (0.9, 0.1)}
    if panel not in breakpoints:
        raise DomainError(f"unknown panel {panel!r}; expected a-d")
    bp, ratio = breakpoints[panel]
    f0, f1 = _figure3_pair(bp, ratio)
    return Scenario(f0=f0, f1=f1, tau=1.0)


PRESET_NAMES = (
    "discussion",
    "figure3:a",
    "figure3:b",
    "figure3:c",
    "figure3:d",
    "rampup:1",
    "rampup:2",
    "rampup:3",
)


def preset_scenario(name: str) -> Scenario:
    """Look up a compiled-in scenario by its CLI name."""
    if name == "discussion":
        return _discussion()
    if name.startswith("figure3:"):
        return _figure3(name.split(":", 1)[1])
    if name.startswith("rampup:"):
        tag = name.split(":", 1)[1]
        if tag not in ("1", "2", "3"):
            raise DomainError(f"unknown ramp-up preset {tag!r}")
        return build_scenario(int(tag))
    raise DomainError(f"unknown preset {name!r}; expected one of {PRESET_NAMES}")
