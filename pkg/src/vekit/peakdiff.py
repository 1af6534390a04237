"""Closed forms for the largest gaps between the attack-rate estimands.

At a fixed control attack rate F0, the gap between the cumulative-hazard
and cumulative-incidence VEs, and the gap between the odds and
cumulative-hazard VEs, are each maximized at an explicit F1; the two
maxima coincide.  These are the curves behind the "how different can the
estimands be" comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "PeakDiffResult",
    "delta1",
    "delta2",
    "delta1_max",
    "delta2_max",
    "verify_peak_equality",
    "gap_curves",
]


def _check_f0(f0: float):
    if not 0.0 < f0 < 1.0:
        raise DomainError(f"F0 must be in (0, 1), got {f0!r}")


def _check_pair(f0: float, f1: float):
    _check_f0(f0)
    if not 0.0 < f1 < f0:
        raise DomainError(f"need 0 < F1 < F0, got F1={f1!r}, F0={f0!r}")


@dataclass(frozen=True)
class PeakDiffResult:
    f0: float
    f1_argmax: float
    delta_max: float


def delta1(f0: float, f1: float) -> float:
    """VE_CH - VE_CI = F1/F0 - ln(1-F1)/ln(1-F0)."""
    _check_pair(f0, f1)
    return f1 / f0 - math.log1p(-f1) / math.log1p(-f0)


def delta2(f0: float, f1: float) -> float:
    """VE_odds - VE_CH = ln(1-F1)/ln(1-F0) - F1(1-F0)/[F0(1-F1)]."""
    _check_pair(f0, f1)
    return math.log1p(-f1) / math.log1p(-f0) - (f1 * (1.0 - f0)) / (f0 * (1.0 - f1))


def _delta_max_value(f0: float) -> float:
    log0 = math.log1p(-f0)
    return 1.0 / f0 + 1.0 / log0 - math.log(-f0 / log0) / log0


def delta1_max(f0: float) -> PeakDiffResult:
    """Argmax F1 = 1 + F0/ln(1-F0) and the peak VE_CH - VE_CI gap."""
    _check_f0(f0)
    f1 = 1.0 + f0 / math.log1p(-f0)
    return PeakDiffResult(f0=f0, f1_argmax=f1, delta_max=_delta_max_value(f0))


def delta2_max(f0: float) -> PeakDiffResult:
    """Argmax F1 = 1 + ln(1-F0)(1-F0)/F0; the peak equals delta1_max's."""
    _check_f0(f0)
    log0 = math.log1p(-f0)
    f1 = 1.0 + log0 * (1.0 - f0) / f0
    return PeakDiffResult(f0=f0, f1_argmax=f1, delta_max=_delta_max_value(f0))


def verify_peak_equality(f0_grid) -> float:
    """max |delta1(F0, F1max) - delta2(F0, F*1max)| over the grid.

    Evaluates both gaps at their own closed-form argmaxes, so this checks
    the transcription of all four formulas, not an identity by construction.
    """
    worst = 0.0
    for f0 in np.asarray(f0_grid, dtype=float):
        f0 = float(f0)
        d1 = delta1(f0, delta1_max(f0).f1_argmax)
        d2 = delta2(f0, delta2_max(f0).f1_argmax)
        worst = max(worst, abs(d1 - d2))
    return worst


def gap_curves(f0_list, ve_grid) -> list[dict]:
    """Gap curves over a VE grid, one row per (F0, VE) point.

    For each F0: delta1 as a function of VE_CI (F1 = (1-VE_CI)*F0) and
    delta2 as a function of VE_CH (F1 = 1 - (1-F0)**(1-VE_CH)).
    """
    rows = []
    for f0 in f0_list:
        _check_f0(f0)
        for ve in np.asarray(ve_grid, dtype=float):
            if not 0.0 < ve < 1.0:
                raise DomainError(f"VE grid values must be in (0, 1), got {ve!r}")
            f1_ci = (1.0 - ve) * f0
            f1_ch = -math.expm1((1.0 - ve) * math.log1p(-f0))
            rows.append(
                {
                    "f0": float(f0),
                    "ve": float(ve),
                    "delta1": delta1(f0, f1_ci),
                    "delta2": delta2(f0, f1_ch),
                }
            )
    return rows
