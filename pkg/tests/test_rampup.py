"""Conditional (post-ramp) distributions and estimands."""

import math

import numpy as np
import pytest

from vekit import (
    DomainError,
    Exponential,
    HazardSegment,
    PiecewiseHazard,
    RampUpScenarioParams,
    Scenario,
    TabulatedCdf,
    Weibull,
    build_scenario,
    conditional_distribution,
    rampup_ve,
    ve_ch,
    ve_ci,
    ve_ci_star_from_ve_ci,
    ve_curves,
)

LAM0 = 0.0005


# ---------------------------------------------------------------------------
# conditional_distribution

@pytest.mark.parametrize(
    "model",
    [
        Weibull(1.7, 400.0),
        PiecewiseHazard(
            [
                HazardSegment(0.0, 20.0, "constant", (0.002,)),
                HazardSegment(20.0, None, "linear", (0.0, 1e-5)),
            ]
        ),
        TabulatedCdf([(0.0, 0.0), (10.0, 0.1), (50.0, 0.4), (200.0, 0.8)]),
    ],
)
def test_conditioning_identity(model):
    t_ru = 15.0
    cond = conditional_distribution(model, t_ru)
    s_ru = model.survival(t_ru)
    for t_star in (0.5, 5.0, 30.0, 100.0):
        want = model.survival(t_ru + t_star) / s_ru
        assert abs(cond.survival(t_star) - want) <= 1e-12
        # hazards carry over unchanged on the shifted clock
        assert cond.hazard(t_star) == pytest.approx(model.hazard(t_ru + t_star), rel=1e-12)


def test_memorylessness_exponential():
    model = Exponential(0.01)
    cond = conditional_distribution(model, 37.0)
    assert cond is model
    grid = np.linspace(0.1, 200.0, 40)
    for fn in ("cdf", "hazard", "cumulative_hazard"):
        assert np.allclose(
            getattr(cond, fn)(grid), getattr(model, fn)(grid), atol=1e-12, rtol=0.0
        )


def test_conditional_scenario1_test_arm_is_exponential():
    s = build_scenario(1)
    cond = conditional_distribution(s.f1, 28.0)
    ref = Exponential(0.3 * LAM0)
    for t_star in (1.0, 50.0, 122.0):
        assert cond.cdf(t_star) == pytest.approx(ref.cdf(t_star), abs=1e-14)
        assert cond.hazard(t_star) == pytest.approx(ref.hazard(t_star), abs=1e-18)


def test_conditional_t_ru_zero_is_identity():
    model = Weibull(2.0, 50.0)
    assert conditional_distribution(model, 0.0) is model


def test_conditional_inverse_roundtrip():
    model = Weibull(0.9, 120.0)
    cond = conditional_distribution(model, 9.0)
    for h in (1e-4, 0.05, 0.4):
        assert cond.cumulative_hazard(cond.inverse_cumulative_hazard(h)) == pytest.approx(
            h, abs=1e-12
        )


def test_conditional_degenerate_rejected():
    # Survival underflows to exactly 0 by t_ru, so no one is left to condition on.
    model = Weibull(5.0, 1.0)
    with pytest.raises(DomainError):
        conditional_distribution(model, 60.0)


# ---------------------------------------------------------------------------
# preset scenarios

def test_scenario1_equal_distributions_during_ramp():
    s = build_scenario(1)
    for t in (1.0, 14.0, 28.0):
        assert s.f1.cdf(t) == pytest.approx(s.f0.cdf(t), abs=1e-15)
    assert s.f1.knots() == [28.0]
    assert s.f0.knots() == []


def test_scenario_closed_form_cdf_during_ramp():
    # F1(t) = 1 - exp(-lam0 psi1 t + t^2 (psi1 - psi2) lam0 / (2 t_ru))
    for preset, psi1, psi2 in ((2, 1.0, 0.30), (3, 3.0, 0.70)):
        s = build_scenario(preset)
        for t in (5.0, 14.0, 28.0):
            want = -math.expm1(-LAM0 * psi1 * t + t * t * (psi1 - psi2) * LAM0 / 56.0)
            assert s.f1.cdf(t) == pytest.approx(want, abs=1e-15)


def test_scenario_rampup_ch_values():
    for preset, want in ((1, 0.7), (2, 0.7), (3, 0.3)):
        s = build_scenario(preset)
        for t_star in (0.5, 30.0, 122.0):
            assert rampup_ve("ch", s, t_star) == pytest.approx(want, abs=1e-9)


def test_rampup_null_pair_zero():
    s = Scenario(Exponential(0.001), Exponential(0.001), tau=100.0, t_ru=10.0)
    assert rampup_ve("ch", s, 50.0) == pytest.approx(0.0, abs=1e-12)
    assert rampup_ve("ci", s, 50.0) == pytest.approx(0.0, abs=1e-12)


def test_scenario3_danger_pattern():
    # Constant post-ramp benefit on the conditional clock while the
    # unconditional cumulative-hazard VE is negative through the ramp and
    # far beyond it (it crosses zero near t = 107.6 for these parameters).
    s = build_scenario(3)
    for t_star in (1.0, 60.0, 122.0):
        assert rampup_ve("ch", s, t_star) == pytest.approx(0.3, abs=1e-9)
    for t in np.linspace(0.5, 107.0, 100):
        assert ve_ch(s, float(t)) < 0.0
    assert ve_ch(s, 107.7) > 0.0  # the cautionary signal fades by the horizon
    assert ve_ci(s, 28.0) < 0.0


def test_scenario2_local_ve_reaches_target_at_ramp_end():
    from vekit import ve_local_hazard

    s = build_scenario(2)
    assert ve_local_hazard(s, 28.0) == pytest.approx(0.7, abs=1e-12)
    assert ve_local_hazard(s, 100.0) == pytest.approx(0.7, abs=1e-12)


def test_build_scenario_custom_params():
    p = RampUpScenarioParams(t_ru=14.0, tau=90.0, lambda0=0.001, psi1=1.5, psi2=0.5)
    s = build_scenario(p)
    assert s.t_ru == 14.0
    assert s.f1.hazard(0.0) == pytest.approx(0.0015, abs=1e-18)
    assert s.f1.hazard(14.0) == pytest.approx(0.0005, abs=1e-18)


def test_build_scenario_bad_preset():
    with pytest.raises(DomainError):
        build_scenario(4)


# ---------------------------------------------------------------------------
# relation between unconditional and conditional cumulative incidence

def test_ve_ci_star_identity_under_ideal_ramp():
    # Holds only when the arms match during the ramp (preset 1 qualifies;
    # a custom step scenario cross-checks).
    scenarios = [build_scenario(1)]
    lam0 = 0.002
    f1 = PiecewiseHazard(
        [
            HazardSegment(0.0, 10.0, "constant", (lam0,)),
            HazardSegment(10.0, None, "constant", (0.45 * lam0,)),
        ]
    )
    scenarios.append(Scenario(Exponential(lam0), f1, tau=80.0, t_ru=10.0))
    for s in scenarios:
        for t in np.linspace(s.t_ru * 1.02, s.tau, 37):
            lhs = rampup_ve("ci", s, float(t) - s.t_ru)
            rhs = ve_ci_star_from_ve_ci(
                ve_ci(s, float(t)), s.f0.cdf(float(t)), s.f0.cdf(s.t_ru)
            )
            assert lhs == pytest.approx(rhs, abs=1e-9)


def test_ve_ci_star_trivial_cases():
    assert ve_ci_star_from_ve_ci(0.42, 0.3, 0.0) == pytest.approx(0.42)
    assert ve_ci_star_from_ve_ci(0.0, 0.3, 0.1) == 0.0
    with pytest.raises(DomainError):
        ve_ci_star_from_ve_ci(0.5, 0.1, 0.2)


# ---------------------------------------------------------------------------
# curve emission

def test_ve_curves_rampup_columns():
    s = build_scenario(1)
    rows = ve_curves(s, [14.0, 29.0, 150.0], kinds=("ch",), include_rampup=True)
    assert rows[0]["ve_ch_rampup"] is None  # during the ramp
    assert rows[1]["ve_ch_rampup"] == pytest.approx(0.7, abs=1e-9)
    assert rows[2]["ve_ch_rampup"] == pytest.approx(0.7, abs=1e-9)


def test_ve_curves_scenario2_grows_toward_target():
    s = build_scenario(2)
    rows = ve_curves(s, np.linspace(5.0, 150.0, 30), kinds=("ch",))
    vals = [r["ve_ch"] for r in rows]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert vals[-1] == pytest.approx(1.0 - 54.8 / 150.0, abs=1e-12)


def test_ve_curves_empty_grid():
    assert ve_curves(build_scenario(1), [], kinds=("ci",)) == []
