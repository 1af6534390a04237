"""Ramp-up (conditional) distributions and estimands.

Counting events only after a ramp-up period of length ``t_ru`` amounts to
replacing each arm's distribution F with the conditional distribution

    F*(t*) = [F(t_ru + t*) - F(t_ru)] / [1 - F(t_ru)],   t* = t - t_ru,

and evaluating any cumulative estimand on the conditional pair.  The
conditional model shifts the time origin and rescales survival; hazards
are reused directly, so no numerical error is introduced by conditioning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import (
    Exponential,
    HazardSegment,
    PiecewiseHazard,
    SurvivalModel,
    _as_array,
    _ret,
)
from .errors import DomainError
from .estimands import Scenario, cumulative_ve

__all__ = [
    "ConditionalModel",
    "conditional_distribution",
    "rampup_ve",
    "ve_ci_star_from_ve_ci",
    "RampUpScenarioParams",
    "build_scenario",
    "ve_curves",
]


class ConditionalModel(SurvivalModel):
    """A model restricted to survivors of [0, t_ru], on the t* clock."""

    def __init__(self, base: SurvivalModel, t_ru: float):
        if not t_ru > 0:
            raise DomainError(f"t_ru must be positive, got {t_ru!r}")
        if not base.cdf(t_ru) < 1.0:
            raise DomainError(f"F(t_ru={t_ru:g}) = 1: conditioning set is empty")
        self.base = base
        self.t_ru = float(t_ru)
        self._lam_ru = float(base.cumulative_hazard(t_ru))

    def hazard(self, t):
        arr, scalar = _as_array(t)
        return _ret(np.atleast_1d(np.asarray(self.base.hazard(arr + self.t_ru))), scalar)

    def cumulative_hazard(self, t):
        arr, scalar = _as_array(t)
        vals = np.atleast_1d(np.asarray(self.base.cumulative_hazard(arr + self.t_ru)))
        return _ret(vals - self._lam_ru, scalar)

    def sup_cumulative_hazard(self) -> float:
        return self.base.sup_cumulative_hazard() - self._lam_ru

    def inverse_cumulative_hazard(self, h):
        arr, scalar = self._check_h(h)
        vals = np.atleast_1d(np.asarray(self.base.inverse_cumulative_hazard(arr + self._lam_ru)))
        return _ret(vals - self.t_ru, scalar)

    def knots(self) -> list[float]:
        return [k - self.t_ru for k in self.base.knots() if k > self.t_ru]

    def __repr__(self):
        return f"ConditionalModel({self.base!r}, t_ru={self.t_ru:g})"


def conditional_distribution(f: SurvivalModel, t_ru: float) -> SurvivalModel:
    """The distribution of T - t_ru given T > t_ru.

    An exponential is returned unchanged (memorylessness); t_ru = 0 is the
    identity.
    """
    if t_ru == 0:
        return f
    if isinstance(f, Exponential):
        return f
    return ConditionalModel(f, t_ru)


def rampup_ve(kind: str, s: Scenario, t_star: float) -> float:
    """A cumulative estimand applied to the conditional pair at t*."""
    if s.t_ru is None:
        raise DomainError("scenario has no ramp-up time t_ru")
    if not t_star > 0:
        raise DomainError(f"t_star must be positive, got {t_star!r}")
    cond = Scenario(
        f0=conditional_distribution(s.f0, s.t_ru),
        f1=conditional_distribution(s.f1, s.t_ru),
        tau=s.tau - s.t_ru,
    )
    return cumulative_ve(kind, cond, t_star)


def ve_ci_star_from_ve_ci(ve_ci_t: float, f0_t: float, f0_tru: float) -> float:
    """Ramp-up cumulative-incidence VE implied by the ITT value.

    Valid only under the ideal ramp-up model (F0 = F1 on [0, t_ru]):
    VE*_CI(t*) = VE_CI(t) * F0(t) / (F0(t) - F0(t_ru)).
    """
    if not 0.0 <= f0_tru < f0_t:
        raise DomainError(f"need 0 <= F0(t_ru) < F0(t), got {f0_tru!r}, {f0_t!r}")
    return ve_ci_t * f0_t / (f0_t - f0_tru)


@dataclass(frozen=True)
class RampUpScenarioParams:
    """A hazard-ratio path that moves linearly from psi1 to psi2 over the ramp.

    The control arm is exponential with rate ``lambda0``; the test arm's
    hazard is lambda0 * [psi1 - (psi1 - psi2) * t / t_ru] on [0, t_ru] and
    lambda0 * psi2 afterwards.
    """

    t_ru: float
    tau: float
    lambda0: float
    psi1: float
    psi2: float

    def __post_init__(self):
        if not 0 < self.t_ru < self.tau:
            raise DomainError("need 0 < t_ru < tau")
        if not (self.lambda0 > 0 and self.psi1 > 0 and self.psi2 > 0):
            raise DomainError("lambda0, psi1, psi2 must be positive")


# Preset ramp scenarios share t_ru = 28, tau = 150, lambda0 = 5e-4.
# Preset 1 is a step (no effect, then full effect); presets 2 and 3 ramp the
# hazard ratio linearly, 1 -> 0.30 and 3 -> 0.70 respectively.
_PRESETS = {
    1: ("step", 1.0, 0.30),
    2: ("linear", 1.0, 0.30),
    3: ("linear", 3.0, 0.70),
}
_PRESET_T_RU = 28.0
_PRESET_TAU = 150.0
_PRESET_LAMBDA0 = 0.0005


def build_scenario(preset: int | RampUpScenarioParams) -> Scenario:
    """A preset (1 | 2 | 3) or parameterized ramp-up scenario."""
    if isinstance(preset, RampUpScenarioParams):
        p = preset
        shape = "linear"
    else:
        if preset not in _PRESETS:
            raise DomainError(f"unknown ramp-up preset {preset!r}; expected 1, 2 or 3")
        shape, psi1, psi2 = _PRESETS[preset]
        p = RampUpScenarioParams(
            t_ru=_PRESET_T_RU,
            tau=_PRESET_TAU,
            lambda0=_PRESET_LAMBDA0,
            psi1=psi1,
            psi2=psi2,
        )
    lam0, t_ru = p.lambda0, p.t_ru
    if shape == "step":
        first = HazardSegment(0.0, t_ru, "constant", (lam0 * p.psi1,))
    else:
        slope = -lam0 * (p.psi1 - p.psi2) / t_ru
        first = HazardSegment(0.0, t_ru, "linear", (lam0 * p.psi1, slope))
    f1 = PiecewiseHazard([first, HazardSegment(t_ru, None, "constant", (lam0 * p.psi2,))])
    return Scenario(f0=Exponential(lam0), f1=f1, tau=p.tau, t_ru=t_ru)


def ve_curves(
    s: Scenario,
    grid,
    kinds=("ch",),
    include_rampup: bool = False,
) -> list[dict]:
    """Per-time values of cumulative estimands, CSV-ready.

    With ``include_rampup``, each requested kind also gets a conditional
    column (onto the t* clock), defined only for t > t_ru.
    """
    rows = []
    for t in np.asarray(grid, dtype=float):
        if not 0 < t <= s.tau:
            raise DomainError(f"grid point {t!r} outside (0, tau]")
        row = {"t": float(t)}
        for kind in kinds:
            row[f"ve_{kind}"] = cumulative_ve(kind, s, float(t))
            if include_rampup:
                key = f"ve_{kind}_rampup"
                if s.t_ru is not None and t > s.t_ru:
                    row[key] = rampup_ve(kind, s, float(t) - s.t_ru)
                else:
                    row[key] = None
        rows.append(row)
    return rows
