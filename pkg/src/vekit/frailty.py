"""Gamma and positive-stable frailty machinery.

A frailty is a positive multiplier U on an individual's hazard, shared by
both potential outcomes.  Mixing over U turns an individual-level model
into a population-level one:

  * gamma(mean 1, variance nu):  Lam_pop = ln(1 + nu * Lam_id) / nu, so
    lam_pop(t) = lam_id(t) / (1 + nu * Lam_id(t));
  * positive stable PS(alpha, alpha, 0):  S_pop = exp(-Lam_id ** alpha),
    which maps proportional-hazards pairs to proportional-hazards pairs
    with ratio theta ** alpha.

Each family carries a Kendall's-tau view of its dependence between the
potential outcomes: K = nu / (nu + 2) (gamma) and K = 1 - alpha (stable).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc

from .distributions import SurvivalModel, _as_array, _ret
from .errors import DomainError

__all__ = [
    "FrailtySpec",
    "spec_from_tau",
    "GammaFrailtyMixture",
    "StablePopulationModel",
    "population_model",
    "gamma_population_hazard",
    "gamma_population_hr",
    "gamma_ph_population_ve",
    "stable_population_model",
    "stable_individual_from_population",
    "sample_frailty",
    "log10_frailty_cdf",
]


@dataclass(frozen=True)
class FrailtySpec:
    """Description of the frailty law: gamma(variance) or positive stable(alpha)."""

    family: str  # "gamma" | "positive_stable"
    variance: float | None = None
    alpha: float | None = None

    def __post_init__(self):
        if self.family == "gamma":
            if self.variance is None or self.variance < 0 or self.alpha is not None:
                raise DomainError("gamma frailty needs variance >= 0 and no alpha")
        elif self.family == "positive_stable":
            if self.alpha is None or not 0 < self.alpha <= 1 or self.variance is not None:
                raise DomainError("positive-stable frailty needs alpha in (0, 1] and no variance")
        else:
            raise DomainError(f"unknown frailty family {self.family!r}")

    @classmethod
    def gamma(cls, variance: float) -> "FrailtySpec":
        return cls(family="gamma", variance=variance)

    @classmethod
    def positive_stable(cls, alpha: float) -> "FrailtySpec":
        return cls(family="positive_stable", alpha=alpha)

    @property
    def kendall_tau(self) -> float:
        if self.family == "gamma":
            return self.variance / (self.variance + 2.0)
        return 1.0 - self.alpha

    @property
    def is_trivial(self) -> bool:
        """True when the frailty is a point mass at 1."""
        return self.variance == 0.0 if self.family == "gamma" else self.alpha == 1.0


def spec_from_tau(family: str, kendall_tau: float) -> FrailtySpec:
    """Invert the Kendall's-tau maps: nu = 2K/(1-K), alpha = 1-K."""
    if not 0.0 <= kendall_tau < 1.0:
        raise DomainError(f"Kendall's tau must be in [0, 1), got {kendall_tau!r}")
    if family == "gamma":
        return FrailtySpec.gamma(2.0 * kendall_tau / (1.0 - kendall_tau))
    if family == "positive_stable":
        return FrailtySpec.positive_stable(1.0 - kendall_tau)
    raise DomainError(f"unknown frailty family {family!r}")


class GammaFrailtyMixture(SurvivalModel):
    """Population law of a base model mixed over gamma(mean 1, variance nu > 0)."""

    def __init__(self, base: SurvivalModel, variance: float):
        if not variance > 0:
            raise DomainError("variance must be positive (use the base model for nu = 0)")
        self.base = base
        self.variance = float(variance)

    def hazard(self, t):
        arr, scalar = _as_array(t)
        lam = np.atleast_1d(np.asarray(self.base.hazard(arr)))
        cum = np.atleast_1d(np.asarray(self.base.cumulative_hazard(arr)))
        return _ret(lam / (1.0 + self.variance * cum), scalar)

    def cumulative_hazard(self, t):
        arr, scalar = _as_array(t)
        cum = np.atleast_1d(np.asarray(self.base.cumulative_hazard(arr)))
        return _ret(np.log1p(self.variance * cum) / self.variance, scalar)

    def sup_cumulative_hazard(self) -> float:
        sup = self.base.sup_cumulative_hazard()
        if math.isinf(sup):
            return math.inf
        return math.log1p(self.variance * sup) / self.variance

    def inverse_cumulative_hazard(self, h):
        arr, scalar = self._check_h(h)
        base_h = np.expm1(self.variance * arr) / self.variance
        vals = np.atleast_1d(np.asarray(self.base.inverse_cumulative_hazard(base_h)))
        return _ret(vals, scalar)

    def knots(self) -> list[float]:
        return self.base.knots()

    def __repr__(self):
        return f"GammaFrailtyMixture({self.base!r}, variance={self.variance:g})"


class StablePopulationModel(SurvivalModel):
    """Population law of a base model mixed over PS(alpha, alpha, 0), alpha in (0,1).

    Lam_pop = Lam_base ** alpha, so the population hazard diverges at t -> 0
    when the base hazard is positive there (integrable singularity).
    """

    def __init__(self, base: SurvivalModel, alpha: float):
        if not 0 < alpha < 1:
            raise DomainError("alpha must be in (0, 1); alpha = 1 is the base model itself")
        self.base = base
        self.alpha = float(alpha)

    def hazard(self, t):
        arr, scalar = _as_array(t)
        lam = np.atleast_1d(np.asarray(self.base.hazard(arr)))
        cum = np.atleast_1d(np.asarray(self.base.cumulative_hazard(arr)))
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.alpha * cum ** (self.alpha - 1.0) * lam
        return _ret(out, scalar)

    def cumulative_hazard(self, t):
        arr, scalar = _as_array(t)
        cum = np.atleast_1d(np.asarray(self.base.cumulative_hazard(arr)))
        return _ret(cum**self.alpha, scalar)

    def sup_cumulative_hazard(self) -> float:
        sup = self.base.sup_cumulative_hazard()
        return math.inf if math.isinf(sup) else sup**self.alpha

    def inverse_cumulative_hazard(self, h):
        arr, scalar = self._check_h(h)
        vals = np.atleast_1d(
            np.asarray(self.base.inverse_cumulative_hazard(arr ** (1.0 / self.alpha)))
        )
        return _ret(vals, scalar)

    def knots(self) -> list[float]:
        return self.base.knots()

    def __repr__(self):
        return f"StablePopulationModel({self.base!r}, alpha={self.alpha:g})"


def population_model(base: SurvivalModel, spec: FrailtySpec) -> SurvivalModel:
    """The marginal law after mixing the base hazard over the frailty."""
    if spec.is_trivial:
        return base
    if spec.family == "gamma":
        return GammaFrailtyMixture(base, spec.variance)
    return StablePopulationModel(base, spec.alpha)


def gamma_population_hazard(base: SurvivalModel, variance: float, t):
    """lam_pop(t) = lam_id(t) / (1 + nu * Lam_id(t)); nu = 0 is the base hazard."""
    if variance < 0:
        raise DomainError("variance must be nonnegative")
    if variance == 0:
        return base.hazard(t)
    return GammaFrailtyMixture(base, variance).hazard(t)


def gamma_population_hr(theta_id, s0_id: SurvivalModel, s1_id: SurvivalModel | None, variance: float, t):
    """Population hazard ratio under gamma frailty.

    ``theta_id`` is the individual-level hazard ratio, a constant (then the
    proportional-hazards form using only the control model applies) or a
    callable of time.  The general form is
    theta_pop(t) = theta_id(t) * (1 + nu Lam0_id(t)) / (1 + nu Lam1_id(t)).
    """
    if variance < 0:
        raise DomainError("variance must be nonnegative")
    arr, scalar = _as_array(t)
    cum0 = np.atleast_1d(np.asarray(s0_id.cumulative_hazard(arr)))
    if callable(theta_id):
        if s1_id is None:
            raise DomainError("time-varying theta_id needs the test-arm model")
        th = np.asarray(theta_id(arr), dtype=float)
        cum1 = np.atleast_1d(np.asarray(s1_id.cumulative_hazard(arr)))
        out = th * (1.0 + variance * cum0) / (1.0 + variance * cum1)
    else:
        th = float(theta_id)
        out = th * (1.0 + variance * cum0) / (1.0 + variance * th * cum0)
    return _ret(np.atleast_1d(out), scalar)


def gamma_ph_population_ve(theta_id: float, variance: float, f0_values) -> np.ndarray:
    """Population VE_h as a function of the control attack rate F0_id.

    Proportional individual hazards with ratio theta_id; the population
    ratio is evaluated at Lam0 = -ln(1 - F0).
    """
    f0 = np.asarray(f0_values, dtype=float)
    if np.any(f0 < 0) or np.any(f0 >= 1):
        raise DomainError("F0 values must be in [0, 1)")
    cum0 = -np.log1p(-f0)
    theta = theta_id * (1.0 + variance * cum0) / (1.0 + variance * theta_id * cum0)
    return 1.0 - theta


def stable_population_model(base: SurvivalModel, alpha: float) -> SurvivalModel:
    """S_pop(t) = exp(-Lam_base(t) ** alpha); alpha = 1 returns the base model."""
    if not 0 < alpha <= 1:
        raise DomainError(f"alpha must be in (0, 1], got {alpha!r}")
    if alpha == 1.0:
        return base
    return StablePopulationModel(base, alpha)


def stable_individual_from_population(
    pop0: SurvivalModel, pop1: SurvivalModel, alpha: float, t
):
    """Individual-level hazard ratio implied by assuming PS(alpha) frailty.

    Inverts the stable map on population quantities:
    theta_id(t) = [Lam1(t)/Lam0(t)] ** (1/alpha - 1) * lam1(t)/lam0(t).
    """
    if not 0 < alpha <= 1:
        raise DomainError(f"alpha must be in (0, 1], got {alpha!r}")
    arr, scalar = _as_array(t)
    cum0 = np.atleast_1d(np.asarray(pop0.cumulative_hazard(arr)))
    lam0 = np.atleast_1d(np.asarray(pop0.hazard(arr)))
    if np.any(cum0 <= 0) or np.any(lam0 <= 0):
        raise DomainError("population control cumulative hazard and hazard must be positive")
    cum1 = np.atleast_1d(np.asarray(pop1.cumulative_hazard(arr)))
    lam1 = np.atleast_1d(np.asarray(pop1.hazard(arr)))
    ratio = (cum1 / cum0) ** (1.0 / alpha - 1.0) * (lam1 / lam0)
    return _ret(ratio, scalar)


def _sample_positive_stable(alpha: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """PS(alpha, alpha, 0) draws with E[exp(-s U)] = exp(-s ** alpha).

    Chambers-Mallows-Stuck construction specialized to the totally skewed
    positive case: U = (a(V) / W) ** ((1 - alpha) / alpha) with V uniform
    on (0, pi) and W unit exponential.
    """
    v = rng.uniform(0.0, math.pi, n)
    w = rng.exponential(1.0, n)
    one_m = 1.0 - alpha
    log_a = (
        np.log(np.sin(one_m * v))
        + (alpha / one_m) * np.log(np.sin(alpha * v))
        - (1.0 / one_m) * np.log(np.sin(v))
    )
    return np.exp((one_m / alpha) * (log_a - np.log(w)))


def sample_frailty(spec: FrailtySpec, n: int, seed) -> np.ndarray:
    """n i.i.d. frailty draws, deterministic given the seed (int or Generator)."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n!r}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if spec.is_trivial:
        return np.ones(n)
    if spec.family == "gamma":
        nu = spec.variance
        return rng.gamma(shape=1.0 / nu, scale=nu, size=n)
    return _sample_positive_stable(spec.alpha, n, rng)


_STABLE_CDF_SAMPLES = 10**6
_STABLE_CDF_SEED = 988121


def log10_frailty_cdf(spec: FrailtySpec, grid) -> np.ndarray:
    """CDF of log10(U) at the grid points.

    Gamma uses the regularized incomplete gamma function; the positive
    stable CDF has no elementary form and is computed as a seeded
    empirical CDF from 10^6 draws (Monte Carlo error ~ 1e-3).
    """
    w = np.asarray(grid, dtype=float)
    u = 10.0**w
    if spec.is_trivial:
        return (u >= 1.0).astype(float)
    if spec.family == "gamma":
        nu = spec.variance
        return gammainc(1.0 / nu, u / nu)
    draws = np.sort(sample_frailty(spec, _STABLE_CDF_SAMPLES, _STABLE_CDF_SEED))
    return np.searchsorted(draws, u, side="right") / draws.size


def gamma_mixture_survival_mc(
    base: SurvivalModel, variance: float, times, n_draws: int, seed
) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo population survival (mean of S_id ** U) and its standard error."""
    u = sample_frailty(FrailtySpec.gamma(variance), n_draws, seed)
    t = np.asarray(times, dtype=float)
    cum = np.atleast_1d(np.asarray(base.cumulative_hazard(t)))
    surv = np.empty_like(cum)
    se = np.empty_like(cum)
    for i, c in enumerate(cum):
        vals = np.exp(-u * c)
        surv[i] = vals.mean()
        se[i] = vals.std(ddof=1) / math.sqrt(n_draws)
    return surv, se
