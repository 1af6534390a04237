"""Time-to-first-event distribution kernel.

Every model exposes the same survival functionals: F, S, f, the hazard
``lam(t)``, the cumulative hazard ``Lam(t) = -ln S(t)``, its inverse, the
restricted mean survival time, and the list of hazard/density breakpoints
(knots).  All evaluators accept a scalar or a 1-D array of times and are
pure; models are immutable and safe to share across threads.

Conventions:
  * the hazard at a discontinuity is the right-limit (cadlag);
  * Weibull uses S(t) = exp(-(t/scale)**shape);
  * improper distributions (S(inf) > 0) are allowed, and the inverse
    cumulative hazard then has bounded range.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Sequence

import numpy as np

from .errors import DomainError, SupportExhaustedError
from .quadrature import integrate

__all__ = [
    "SurvivalModel",
    "Exponential",
    "Weibull",
    "HazardSegment",
    "PiecewiseHazard",
    "TabulatedCdf",
    "parse_distribution",
    "distribution_spec",
]


def _as_array(t, name: str = "t", minimum: float = 0.0):
    arr = np.asarray(t, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if np.any(np.isnan(arr)) or np.any(arr < minimum):
        raise DomainError(f"{name} must be >= {minimum:g}, got {t!r}")
    return arr, scalar


def _ret(values: np.ndarray, scalar: bool):
    return float(values[0]) if scalar else values


class SurvivalModel(ABC):
    """A distribution of time to first event."""

    @abstractmethod
    def hazard(self, t):
        """Hazard rate at t (right-limit at discontinuities)."""

    @abstractmethod
    def cumulative_hazard(self, t):
        """Lam(t) = integral of the hazard over [0, t], exact at knots."""

    @abstractmethod
    def inverse_cumulative_hazard(self, h):
        """Smallest t with Lam(t) >= h; error if h exceeds sup Lam."""

    @abstractmethod
    def knots(self) -> list[float]:
        """Hazard/density discontinuity points, increasing; [] if smooth."""

    def cdf(self, t):
        arr = np.atleast_1d(np.asarray(self.cumulative_hazard(t), dtype=float))
        return _ret(-np.expm1(-arr), np.asarray(t).ndim == 0)

    def survival(self, t):
        arr = np.atleast_1d(np.asarray(self.cumulative_hazard(t), dtype=float))
        return _ret(np.exp(-arr), np.asarray(t).ndim == 0)

    def density(self, t):
        lam = np.atleast_1d(np.asarray(self.hazard(t), dtype=float))
        s = np.atleast_1d(np.asarray(self.survival(t), dtype=float))
        return _ret(lam * s, np.asarray(t).ndim == 0)

    def restricted_mean(self, tau: float) -> float:
        """mu(tau) = integral of S over [0, tau]."""
        if not tau > 0:
            raise DomainError(f"tau must be positive, got {tau!r}")
        return integrate(self.survival, 0.0, tau, knots=self.knots())

    def sup_cumulative_hazard(self) -> float:
        """Upper bound of Lam over the support (may be inf)."""
        return math.inf

    def _check_h(self, h):
        arr, scalar = _as_array(h, "h")
        sup = self.sup_cumulative_hazard()
        if np.any(arr > sup):
            raise SupportExhaustedError(
                f"cumulative hazard {np.max(arr):g} beyond support (sup {sup:g})"
            )
        return arr, scalar


@dataclass(frozen=True)
class Exponential(SurvivalModel):
    """Constant-hazard model: S(t) = exp(-rate * t)."""

    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise DomainError(f"rate must be positive, got {self.rate!r}")

    def hazard(self, t):
        arr, scalar = _as_array(t)
        return _ret(np.full_like(arr, self.rate), scalar)

    def cumulative_hazard(self, t):
        arr, scalar = _as_array(t)
        return _ret(self.rate * arr, scalar)

    def inverse_cumulative_hazard(self, h):
        arr, scalar = self._check_h(h)
        return _ret(arr / self.rate, scalar)

    def restricted_mean(self, tau: float) -> float:
        if not tau > 0:
            raise DomainError(f"tau must be positive, got {tau!r}")
        return -math.expm1(-self.rate * tau) / self.rate

    def knots(self) -> list[float]:
        return []


@dataclass(frozen=True)
class Weibull(SurvivalModel):
    """S(t) = exp(-(t/scale)**shape)."""

    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise DomainError("Weibull shape and scale must be positive")

    def hazard(self, t):
        arr, scalar = _as_array(t)
        with np.errstate(divide="ignore"):
            lam = (self.shape / self.scale) * (arr / self.scale) ** (self.shape - 1.0)
        return _ret(lam, scalar)

    def cumulative_hazard(self, t):
        arr, scalar = _as_array(t)
        return _ret((arr / self.scale) ** self.shape, scalar)

    def inverse_cumulative_hazard(self, h):
        arr, scalar = self._check_h(h)
        return _ret(self.scale * arr ** (1.0 / self.shape), scalar)

    def knots(self) -> list[float]:
        return []


@dataclass(frozen=True)
class HazardSegment:
    """One piece of a piecewise hazard.

    ``kind`` is one of:
      * ``constant``: params (c,), hazard c;
      * ``linear``: params (a, b), hazard a + b*t with t in absolute time;
      * ``weibull_local``: params (shape, scale), a Weibull hazard with its
        time origin at the segment start.
    ``end`` of the final segment may be None (open-ended).
    """

    start: float
    end: float | None
    kind: str
    params: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in ("constant", "linear", "weibull_local"):
            raise DomainError(f"unknown hazard segment kind {self.kind!r}")
        if self.end is not None and not self.end > self.start:
            raise DomainError("segment end must exceed start")
        p = self.params
        if self.kind == "constant":
            if len(p) != 1 or p[0] < 0:
                raise DomainError("constant segment needs one nonnegative rate")
        elif self.kind == "linear":
            if len(p) != 2:
                raise DomainError("linear segment needs params (a, b)")
            a, b = p
            lo = a + b * self.start
            if lo < 0:
                raise DomainError("linear hazard negative at segment start")
            if self.end is None:
                if b < 0:
                    raise DomainError("open-ended linear hazard must have b >= 0")
            elif a + b * self.end < 0:
                raise DomainError("linear hazard negative at segment end")
        else:
            if len(p) != 2 or p[0] <= 0 or p[1] <= 0:
                raise DomainError("weibull_local segment needs positive (shape, scale)")

    def hazard_at(self, t: np.ndarray) -> np.ndarray:
        if self.kind == "constant":
            return np.full_like(t, self.params[0])
        if self.kind == "linear":
            a, b = self.params
            return a + b * t
        k, b = self.params
        with np.errstate(divide="ignore"):
            return (k / b) * ((t - self.start) / b) ** (k - 1.0)

    def hazard_integral(self, t: np.ndarray) -> np.ndarray:
        """Integral of the hazard over [start, t] for t inside the segment."""
        if self.kind == "constant":
            return self.params[0] * (t - self.start)
        if self.kind == "linear":
            a, b = self.params
            return a * (t - self.start) + 0.5 * b * (t * t - self.start * self.start)
        k, b = self.params
        return ((t - self.start) / b) ** k

    def invert_integral(self, area: np.ndarray) -> np.ndarray:
        """Smallest t in the segment with hazard_integral(t) = area."""
        if self.kind == "constant":
            c = self.params[0]
            out = np.full_like(area, self.start, dtype=float)
            if c > 0:
                out = self.start + area / c
            return out
        if self.kind == "linear":
            a, b = self.params
            if b == 0:
                return self.start + (area / a if a > 0 else 0.0)
            # Solve b/2 t^2 + a t = area + (b/2 s^2 + a s) for the root on the
            # increasing branch; the a > 0 form avoids cancellation for |b| small.
            rhs = area + 0.5 * b * self.start**2 + a * self.start
            disc = np.sqrt(np.maximum(a * a + 2.0 * b * rhs, 0.0))
            if a > 0:
                return 2.0 * rhs / (a + disc)
            return (-a + disc) / b
        k, b = self.params
        return self.start + b * area ** (1.0 / k)


class PiecewiseHazard(SurvivalModel):
    """Hazard defined piecewise on contiguous segments starting at 0."""

    def __init__(self, segments: Sequence[HazardSegment]):
        if not segments:
            raise DomainError("need at least one segment")
        if segments[0].start != 0.0:
            raise DomainError("first segment must start at 0")
        for prev, cur in zip(segments, segments[1:]):
            if prev.end is None or prev.end != cur.start:
                raise DomainError("segments must be contiguous and non-overlapping")
        self.segments = tuple(segments)
        self._starts = np.array([s.start for s in self.segments])
        cum = [0.0]
        for seg in self.segments[:-1]:
            cum.append(cum[-1] + float(seg.hazard_integral(np.asarray(seg.end))))
        self._cum = np.array(cum)

    @cached_property
    def _end(self) -> float:
        last = self.segments[-1].end
        return math.inf if last is None else last

    def _segment_index(self, t: np.ndarray, side: str = "right") -> np.ndarray:
        return np.clip(np.searchsorted(self._starts, t, side=side) - 1, 0, None)

    def _check_t(self, arr: np.ndarray):
        if np.any(arr > self._end):
            raise SupportExhaustedError(
                f"t={np.max(arr):g} beyond the model's last segment end {self._end:g}"
            )

    def hazard(self, t):
        arr, scalar = _as_array(t)
        self._check_t(arr)
        idx = self._segment_index(arr)
        out = np.empty_like(arr)
        for i, seg in enumerate(self.segments):
            m = idx == i
            if m.any():
                out[m] = seg.hazard_at(arr[m])
        return _ret(out, scalar)

    def cumulative_hazard(self, t):
        arr, scalar = _as_array(t)
        self._check_t(arr)
        idx = self._segment_index(arr)
        out = np.empty_like(arr)
        for i, seg in enumerate(self.segments):
            m = idx == i
            if m.any():
                out[m] = self._cum[i] + seg.hazard_integral(arr[m])
        return _ret(out, scalar)

    def sup_cumulative_hazard(self) -> float:
        last = self.segments[-1]
        if last.end is not None:
            return float(self._cum[-1] + last.hazard_integral(np.asarray(last.end)))
        if last.kind == "constant" and last.params[0] == 0.0:
            return float(self._cum[-1])
        if last.kind == "linear" and last.params == (0.0, 0.0):
            return float(self._cum[-1])
        return math.inf

    def inverse_cumulative_hazard(self, h):
        arr, scalar = self._check_h(h)
        # Last segment whose cumulative start is <= h; ties resolved to the
        # earliest such segment so plateaus (zero-hazard pieces) invert to
        # their left edge.
        idx = np.searchsorted(self._cum, arr, side="right") - 1
        exact = self._cum[np.clip(idx, 0, None)] == arr
        idx = np.where(exact, np.searchsorted(self._cum, arr, side="left"), idx)
        idx = np.clip(idx, 0, len(self.segments) - 1)
        out = np.empty_like(arr)
        for i, seg in enumerate(self.segments):
            m = idx == i
            if m.any():
                out[m] = seg.invert_integral(arr[m] - self._cum[i])
        return _ret(out, scalar)

    def knots(self) -> list[float]:
        return [float(s.start) for s in self.segments[1:]]

    def __repr__(self):
        return f"PiecewiseHazard({list(self.segments)!r})"


class TabulatedCdf(SurvivalModel):
    """CDF given as (t, F) points, linear in F between points.

    Linear interpolation of F implies a piecewise-constant density, so the
    hazard is right-continuous with jumps at the table points (at the final
    point the left segment's value is used).  Evaluation beyond the last
    point is an error; no extrapolation is performed.
    """

    def __init__(self, points: Sequence[tuple[float, float]]):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise DomainError("points must be a list of at least two (t, F) pairs")
        self._t = pts[:, 0]
        self._f = pts[:, 1]
        if self._t[0] != 0.0 or self._f[0] != 0.0:
            raise DomainError("table must start at (0, 0)")
        if np.any(np.diff(self._t) <= 0):
            raise DomainError("times must be strictly increasing")
        if np.any(np.diff(self._f) < 0) or np.any(self._f >= 1.0) or np.any(self._f < 0):
            raise DomainError("F must be nondecreasing and within [0, 1)")
        self._slopes = np.diff(self._f) / np.diff(self._t)

    def _check_t(self, arr: np.ndarray):
        if np.any(arr > self._t[-1]):
            raise SupportExhaustedError(
                f"t={np.max(arr):g} beyond the last tabulated point {self._t[-1]:g}"
            )

    def cdf(self, t):
        arr, scalar = _as_array(t)
        self._check_t(arr)
        return _ret(np.interp(arr, self._t, self._f), scalar)

    def survival(self, t):
        arr, scalar = _as_array(t)
        self._check_t(arr)
        return _ret(1.0 - np.interp(arr, self._t, self._f), scalar)

    def density(self, t):
        arr, scalar = _as_array(t)
        self._check_t(arr)
        idx = np.clip(np.searchsorted(self._t, arr, side="right") - 1, 0, len(self._slopes) - 1)
        return _ret(self._slopes[idx], scalar)

    def hazard(self, t):
        arr, scalar = _as_array(t)
        f = np.atleast_1d(np.asarray(self.density(arr)))
        s = 1.0 - np.interp(arr, self._t, self._f)
        return _ret(f / s, scalar)

    def cumulative_hazard(self, t):
        arr, scalar = _as_array(t)
        self._check_t(arr)
        return _ret(-np.log1p(-np.interp(arr, self._t, self._f)), scalar)

    def sup_cumulative_hazard(self) -> float:
        return float(-math.log1p(-self._f[-1]))

    def inverse_cumulative_hazard(self, h):
        arr, scalar = self._check_h(h)
        target = -np.expm1(-arr)
        # Earliest t attaining each target F; plateaus in F resolve left.
        j = np.searchsorted(self._f, target, side="left")
        j = np.clip(j, 0, len(self._f) - 1)
        at_point = self._f[j] == target
        jm = np.clip(j, 1, None)
        slope = self._slopes[jm - 1]
        interp = self._t[jm - 1] + np.where(
            slope > 0, (target - self._f[jm - 1]) / np.where(slope > 0, slope, 1.0), 0.0
        )
        return _ret(np.where(at_point, self._t[j], interp), scalar)

    def restricted_mean(self, tau: float) -> float:
        if not tau > 0:
            raise DomainError(f"tau must be positive, got {tau!r}")
        self._check_t(np.asarray([tau]))
        # S is piecewise linear, so the trapezoid rule is exact.
        grid = np.concatenate((self._t[self._t < tau], [tau]))
        surv = 1.0 - np.interp(grid, self._t, self._f)
        return float(np.trapezoid(surv, grid))

    def knots(self) -> list[float]:
        return [float(x) for x in self._t[1:-1]]

    def __repr__(self):
        return f"TabulatedCdf({len(self._t)} points, F({self._t[-1]:g})={self._f[-1]:g})"


# ---------------------------------------------------------------------------
# JSON distribution specs (the scenario-file wire format)

def parse_distribution(spec: dict[str, Any]) -> SurvivalModel:
    """Build a model from a JSON-style distribution spec."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise DomainError(f"distribution spec must be an object with a 'kind': {spec!r}")
    kind = spec["kind"]
    known = {
        "exponential": {"kind", "rate"},
        "weibull": {"kind", "shape", "scale"},
        "piecewise_hazard": {"kind", "segments"},
        "tabulated": {"kind", "points"},
    }
    if kind not in known:
        raise DomainError(f"unknown distribution kind {kind!r}")
    extra = set(spec) - known[kind]
    if extra:
        raise DomainError(f"unknown keys {sorted(extra)} in {kind!r} spec")
    if kind == "exponential":
        return Exponential(rate=float(spec["rate"]))
    if kind == "weibull":
        return Weibull(shape=float(spec["shape"]), scale=float(spec["scale"]))
    if kind == "tabulated":
        return TabulatedCdf([(float(t), float(f)) for t, f in spec["points"]])
    segments = []
    for seg in spec["segments"]:
        extra = set(seg) - {"start", "end", "hazard"}
        if extra:
            raise DomainError(f"unknown keys {sorted(extra)} in segment spec")
        hz = seg["hazard"]
        typ = hz.get("type")
        if typ == "constant":
            params = (float(hz["c"]),)
        elif typ == "linear":
            params = (float(hz["a"]), float(hz["b"]))
        elif typ == "weibull_local":
            params = (float(hz["shape"]), float(hz["scale"]))
        else:
            raise DomainError(f"unknown hazard type {typ!r}")
        end = seg.get("end")
        segments.append(
            HazardSegment(
                start=float(seg["start"]),
                end=None if end is None else float(end),
                kind=typ,
                params=params,
            )
        )
    return PiecewiseHazard(segments)


def distribution_spec(model: SurvivalModel) -> dict[str, Any]:
    """Inverse of :func:`parse_distribution` for the four wire-format kinds."""
    if isinstance(model, Exponential):
        return {"kind": "exponential", "rate": model.rate}
    if isinstance(model, Weibull):
        return {"kind": "weibull", "shape": model.shape, "scale": model.scale}
    if isinstance(model, TabulatedCdf):
        return {
            "kind": "tabulated",
            "points": [[float(t), float(f)] for t, f in zip(model._t, model._f)],
        }
    if isinstance(model, PiecewiseHazard):
        segs = []
        for seg in model.segments:
            if seg.kind == "constant":
                hz = {"type": "constant", "c": seg.params[0]}
            elif seg.kind == "linear":
                hz = {"type": "linear", "a": seg.params[0], "b": seg.params[1]}
            else:
                hz = {"type": "weibull_local", "shape": seg.params[0], "scale": seg.params[1]}
            segs.append({"start": seg.start, "end": seg.end, "hazard": hz})
        return {"kind": "piecewise_hazard", "segments": segs}
    raise DomainError(f"{type(model).__name__} has no wire-format spec")
