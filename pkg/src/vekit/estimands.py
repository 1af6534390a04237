"""Cumulative and local vaccine-efficacy estimands on a distribution pair.

Every estimand is written as VE = 1 - theta for a ratio effect theta
comparing the test-vaccine arm (f1) to the control arm (f0):

  * ``ve_ci``:   theta = F1(t) / F0(t)                (cumulative incidence)
  * ``ve_ir``:   theta = [F1/mu1] / [F0/mu0]          (incidence rate)
  * ``ve_ch``:   theta = Lam1(t) / Lam0(t)            (cumulative hazard)
  * ``ve_odds``: theta = odds1(t) / odds0(t)
  * ``ve_cox``:  theta solves the weighted hazard-difference equation the
    single-covariate proportional-hazards estimator converges to without
    censoring (see :func:`ve_cox`).

All functions are pure and evaluate at a single time; tolerances and the
root-solver policy are fixed here, not configurable per call.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import brentq

from .distributions import SurvivalModel
from .errors import (
    DomainError,
    MultipleRootWarning,
    SolverError,
    UndefinedEstimandError,
)
from .quadrature import fixed_simpson_nodes, integrate

__all__ = [
    "Scenario",
    "EstimandReport",
    "IrBounds",
    "ve_ci",
    "ve_ir",
    "ve_ch",
    "ve_odds",
    "ve_cox",
    "ve_local_hazard",
    "weighted_mean_hazard_ratio",
    "theta_ci_to_theta_ch",
    "theta_odds_to_theta_ci",
    "theta_ir_bounds",
    "estimand_report",
    "CUMULATIVE_KINDS",
]

CUMULATIVE_KINDS = ("ci", "ir", "cox", "ch", "odds")

# ve_cox solver policy: bracket in log-theta, Brent to the stated widths,
# one quadrature per g evaluation.
_COX_BRACKET = (1e-8, 1e8)
_COX_G_TOL = 1e-11
_COX_ROOT_TOL = 1e-10
_COX_SCAN_POINTS = 1024


@dataclass(frozen=True)
class Scenario:
    """A control/test distribution pair with study horizon tau.

    ``t_ru`` is the optional end of the ramp-up period (see the rampup
    module); it must lie strictly inside (0, tau).
    """

    f0: SurvivalModel
    f1: SurvivalModel
    tau: float
    t_ru: float | None = None

    def __post_init__(self):
        if not self.tau > 0:
            raise DomainError(f"tau must be positive, got {self.tau!r}")
        if self.t_ru is not None and not 0 < self.t_ru < self.tau:
            raise DomainError(f"t_ru must be in (0, tau), got {self.t_ru!r}")
        if not self.f0.cdf(self.tau) > 0:
            raise DomainError("control attack rate F0(tau) must be positive")

    def _check_t(self, t: float) -> float:
        if not 0 < t <= self.tau:
            raise DomainError(f"t must be in (0, tau={self.tau:g}], got {t!r}")
        return float(t)


def _f0_f1(s: Scenario, t: float) -> tuple[float, float]:
    t = s._check_t(t)
    p0 = s.f0.cdf(t)
    p1 = s.f1.cdf(t)
    if p0 <= 0.0:
        raise UndefinedEstimandError(f"F0({t:g}) = 0; cumulative estimands undefined")
    return p0, p1


def ve_ci(s: Scenario, t: float) -> float:
    """1 - F1(t)/F0(t)."""
    p0, p1 = _f0_f1(s, t)
    return 1.0 - p1 / p0


def ve_ir(s: Scenario, t: float) -> float:
    """1 - [F1(t)/mu1(t)] / [F0(t)/mu0(t)], with mu the restricted mean."""
    p0, p1 = _f0_f1(s, t)
    return 1.0 - (p1 / s.f1.restricted_mean(t)) / (p0 / s.f0.restricted_mean(t))


def ve_ch(s: Scenario, t: float) -> float:
    """1 - Lam1(t)/Lam0(t)."""
    t = s._check_t(t)
    l0 = s.f0.cumulative_hazard(t)
    if l0 <= 0.0:
        raise UndefinedEstimandError(f"Lam0({t:g}) = 0; cumulative hazard ratio undefined")
    return 1.0 - s.f1.cumulative_hazard(t) / l0


def ve_odds(s: Scenario, t: float) -> float:
    """1 - odds ratio of the event by t."""
    p0, p1 = _f0_f1(s, t)
    if p1 >= 1.0:
        raise UndefinedEstimandError(f"F1({t:g}) = 1; odds undefined")
    return 1.0 - (p1 / (1.0 - p1)) / (p0 / (1.0 - p0))


def ve_local_hazard(s: Scenario, t: float) -> float:
    """1 - lam1(t)/lam0(t); may be negative (harm).

    Undefined where lam0(t) = 0 (including where both hazards vanish:
    with no control events the local effect is genuinely indeterminate).
    """
    t = s._check_t(t)
    lam0 = s.f0.hazard(t)
    if not lam0 > 0.0:
        raise UndefinedEstimandError(f"lam0({t:g}) = 0; local hazard ratio undefined")
    return 1.0 - s.f1.hazard(t) / lam0


class _PairGrid:
    """Hazard/survival evaluations of both arms on a shared node set."""

    def __init__(self, s: Scenario, t: float):
        knots = sorted(set(s.f0.knots()) | set(s.f1.knots()))
        self.knots = [k for k in knots if 0.0 < k < t]
        self.t = t
        self.s = s

    @cached_property
    def scan_nodes(self):
        x, w = fixed_simpson_nodes(0.0, self.t, self.knots)
        return x, w, self.s.f0.hazard(x), self.s.f1.hazard(x), self.s.f0.survival(x), self.s.f1.survival(x)

    def g(self, theta: float) -> float:
        """Weighted hazard-difference functional at theta, by adaptive quadrature."""
        f0, f1 = self.s.f0, self.s.f1

        def integrand(x):
            s0 = f0.survival(x)
            s1 = f1.survival(x)
            return s1 * s0 * (f1.hazard(x) - theta * f0.hazard(x)) / (theta * s1 + s0)

        return integrate(integrand, 0.0, self.t, knots=self.knots, tol=_COX_G_TOL)

    def g_scan(self, thetas: np.ndarray) -> np.ndarray:
        """g on a theta grid via one shared fixed-node quadrature (diagnostic)."""
        x, w, lam0, lam1, s0, s1 = self.scan_nodes
        th = thetas[:, None]
        vals = s1 * s0 * (lam1 - th * lam0) / (th * s1 + s0)
        return vals @ w


def ve_cox(s: Scenario, t: float, diagnose_roots: bool = True) -> float:
    """VE implied by the uncensored single-covariate proportional-hazards fit.

    Returns 1 - theta* where theta* solves

        0 = int_0^t  S1 S0 / (theta S1 + S0) * (lam1 - theta lam0)  du,

    i.e. theta* is a ratio of hazard means weighted by
    w(u) = S1 S0 / (theta S1 + S0).  theta is bracketed in [1e-8, 1e8] on
    the log scale and solved by Brent's method; each g evaluation uses
    knot-aware quadrature.  Uniqueness is not guaranteed for arbitrary
    hazards, so by default g is also scanned on a 1024-point log grid and
    a MultipleRootWarning is issued if it changes sign more than once.
    """
    t = s._check_t(t)
    grid = _PairGrid(s, t)
    lo, hi = math.log(_COX_BRACKET[0]), math.log(_COX_BRACKET[1])
    g_lo = grid.g(math.exp(lo))
    g_hi = grid.g(math.exp(hi))
    if g_lo == 0.0:
        return 1.0 - _COX_BRACKET[0]
    if g_hi == 0.0:
        return 1.0 - _COX_BRACKET[1]
    if np.sign(g_lo) == np.sign(g_hi):
        raise SolverError(
            "no sign change for the hazard-ratio root: "
            f"g({_COX_BRACKET[0]:g}) = {g_lo:.3e}, g({_COX_BRACKET[1]:g}) = {g_hi:.3e}"
        )
    if diagnose_roots:
        thetas = np.exp(np.linspace(lo, hi, _COX_SCAN_POINTS))
        signs = np.sign(grid.g_scan(thetas))
        changes = int(np.sum(np.abs(np.diff(signs[signs != 0.0]))) // 2)
        if changes > 1:
            warnings.warn(
                f"g changes sign {changes} times on the scan grid; "
                "the hazard-ratio root may not be unique",
                MultipleRootWarning,
            )
    x_root = brentq(lambda x: grid.g(math.exp(x)), lo, hi, xtol=1e-12, rtol=8.9e-16)
    theta = math.exp(x_root)
    resid = grid.g(theta)
    if abs(resid) > _COX_ROOT_TOL:
        raise SolverError(f"root residual |g| = {abs(resid):.3e} exceeds {_COX_ROOT_TOL:g}")
    return 1.0 - theta


def weighted_mean_hazard_ratio(s: Scenario, t: float, w="control_hazard") -> float:
    """Weighted mean of the local hazard ratio over (0, t].

    ``w`` is ``"control_hazard"`` (weight proportional to lam0, which makes
    the mean equal the cumulative hazard ratio), ``"uniform"``, or a
    callable weight function of time.
    """
    t = s._check_t(t)
    knots = sorted({k for k in (set(s.f0.knots()) | set(s.f1.knots())) if 0.0 < k < t})
    if w == "control_hazard":
        # w * theta_h = lam1, so the numerator is just the lam1 integral.
        num = integrate(s.f1.hazard, 0.0, t, knots=knots)
        den = integrate(s.f0.hazard, 0.0, t, knots=knots)
    else:
        if w == "uniform":
            wf = lambda x: np.ones_like(x)
        elif callable(w):
            wf = w
        else:
            raise DomainError(f"unknown weight tag {w!r}")

        def check_ratio(x):
            lam0 = np.asarray(s.f0.hazard(x), dtype=float)
            if np.any(lam0 <= 0.0):
                raise UndefinedEstimandError("lam0 vanishes where the weight is positive")
            return np.asarray(s.f1.hazard(x)) / lam0

        num = integrate(lambda x: wf(x) * check_ratio(x), 0.0, t, knots=knots)
        den = integrate(lambda x: np.asarray(wf(x), dtype=float) + 0.0 * x, 0.0, t, knots=knots)
    if den <= 0.0:
        raise DomainError("total weight is zero")
    return num / den


def theta_ci_to_theta_ch(theta_ci: float, f0_tau: float) -> float:
    """ln(1 - theta_CI * F0) / ln(1 - F0)."""
    if not 0.0 < f0_tau < 1.0:
        raise DomainError(f"F0(tau) must be in (0, 1), got {f0_tau!r}")
    if not 0.0 < theta_ci * f0_tau < 1.0:
        raise DomainError("theta_CI * F0(tau) must be in (0, 1)")
    return math.log1p(-theta_ci * f0_tau) / math.log1p(-f0_tau)


def theta_odds_to_theta_ci(theta_odds: float, f0_tau: float) -> float:
    """theta_odds / (1 - F0 + theta_odds * F0)."""
    if not 0.0 < f0_tau < 1.0:
        raise DomainError(f"F0(tau) must be in (0, 1), got {f0_tau!r}")
    if not theta_odds > 0.0:
        raise DomainError(f"theta_odds must be positive, got {theta_odds!r}")
    return theta_odds / (1.0 - f0_tau + theta_odds * f0_tau)


@dataclass(frozen=True)
class IrBounds:
    """Sandwich for the incidence-rate ratio from the restricted-mean bounds."""

    theta_lower: float
    theta_upper: float

    @property
    def ve_lower(self) -> float:
        return 1.0 - self.theta_upper

    @property
    def ve_upper(self) -> float:
        return 1.0 - self.theta_lower


def theta_ir_bounds(s: Scenario, t: float) -> IrBounds:
    """theta_CI*(1-F0) <= theta_IR <= theta_odds/(1-F0)."""
    p0, p1 = _f0_f1(s, t)
    th_ci = p1 / p0
    th_odds = (p1 / (1.0 - p1)) / (p0 / (1.0 - p0))
    return IrBounds(theta_lower=th_ci * (1.0 - p0), theta_upper=th_odds / (1.0 - p0))


@dataclass(frozen=True)
class EstimandReport:
    """All five cumulative VE values at one time."""

    evaluated_at: float
    ve_ci: float
    ve_ir: float
    ve_cox: float
    ve_ch: float
    ve_odds: float
    ir_bounds: IrBounds

    @property
    def thetas(self) -> dict[str, float]:
        return {
            "ci": 1.0 - self.ve_ci,
            "ir": 1.0 - self.ve_ir,
            "cox": 1.0 - self.ve_cox,
            "ch": 1.0 - self.ve_ch,
            "odds": 1.0 - self.ve_odds,
        }

    def summary(self) -> str:
        pct = lambda v: f"{100.0 * v:.1f}%"
        return (
            f"VE_CI={pct(self.ve_ci)} "
            f"VE_IR={pct(self.ve_ir)} (bounds [{pct(self.ir_bounds.ve_lower)}, "
            f"{pct(self.ir_bounds.ve_upper)}]) "
            f"VE_Cox={pct(self.ve_cox)} VE_CH={pct(self.ve_ch)} "
            f"VE_odds={pct(self.ve_odds)} at t={self.evaluated_at:g}"
        )


def estimand_report(s: Scenario, t: float | None = None) -> EstimandReport:
    """Evaluate all five estimands (default: at the study horizon)."""
    t = s.tau if t is None else s._check_t(t)
    return EstimandReport(
        evaluated_at=t,
        ve_ci=ve_ci(s, t),
        ve_ir=ve_ir(s, t),
        ve_cox=ve_cox(s, t),
        ve_ch=ve_ch(s, t),
        ve_odds=ve_odds(s, t),
        ir_bounds=theta_ir_bounds(s, t),
    )


def cumulative_ve(kind: str, s: Scenario, t: float) -> float:
    """Dispatch one of the five cumulative estimands by tag."""
    try:
        fn = {"ci": ve_ci, "ir": ve_ir, "cox": ve_cox, "ch": ve_ch, "odds": ve_odds}[kind]
    except KeyError:
        raise DomainError(f"unknown estimand kind {kind!r}; expected one of {CUMULATIVE_KINDS}")
    return fn(s, t)
