"""Magnetic-field curves (r, theta, phi)(t) and the kinematics derived from them.

A :class:`FieldCurve` is a direction (theta, phi) plus an optional magnitude r.
Every quantity here is evaluated pointwise in closed form where possible;
integrals (arc length, phases) use composite Simpson on a grid spanning [0, t]
with ``sample_count`` nodes, so they are smooth functions of the upper limit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import minimize_scalar

OMEGA_EPS = 1e-12
DEFAULT_SAMPLES = 2001
DEFAULT_THETA_MARGIN = 1e-6


class IndeterminateError(ValueError):
    """Raised where a quantity needs omega > 0 but the direction is stationary."""


class FieldDesignWarning(UserWarning):
    pass


class Profile:
    """A scalar function of time with access to its first two derivatives.

    Derivatives that are not supplied fall back to central differences.
    """

    def __init__(self, f: Callable, df: Callable | None = None, d2f: Callable | None = None,
                 *, step: float = 1e-4, description: str = "custom"):
        self._fns = [f, df, d2f]
        self.step = step
        self.description = description

    def __call__(self, t, order: int = 0):
        t = np.asarray(t, dtype=float)
        fn = self._fns[order]
        if fn is not None:
            return np.broadcast_to(np.asarray(fn(t), dtype=float), t.shape).copy()
        h = self.step
        # 4th-order stencil keeps fallback derivatives well below quadrature error.
        lower = lambda s: self(s, order - 1)
        return (8.0 * (lower(t + h) - lower(t - h)) - (lower(t + 2 * h) - lower(t - 2 * h))) / (12.0 * h)

    def __repr__(self):
        return f"Profile({self.description})"

    @classmethod
    def constant(cls, c: float) -> "Profile":
        c = float(c)
        return cls(lambda t: np.full_like(t, c), lambda t: np.zeros_like(t),
                   lambda t: np.zeros_like(t), description=f"constant {c}")

    @classmethod
    def linear(cls, c0: float, c1: float) -> "Profile":
        return cls.wobble(c0, c1, 0.0, 0.0)

    @classmethod
    def wobble(cls, c0: float, c1: float, amplitude: float, freq: float, phase: float = 0.0) -> "Profile":
        """c0 + c1 t + amplitude sin(freq t + phase)."""
        c0, c1, a, k, p = map(float, (c0, c1, amplitude, freq, phase))
        return cls(
            lambda t: c0 + c1 * t + a * np.sin(k * t + p),
            lambda t: c1 + a * k * np.cos(k * t + p),
            lambda t: -a * k * k * np.sin(k * t + p),
            description=f"{c0} + {c1} t + {a} sin({k} t + {p})",
        )

    @classmethod
    def smooth_ramp(cls, start: float, total: float, duration: float) -> "Profile":
        """start + total (u - sin(2 pi u) / 2 pi), u = t / duration; rate vanishes at both ends."""
        s, d, T = float(start), float(total), float(duration)
        w = 2.0 * np.pi / T
        return cls(
            lambda t: s + d * (t / T - np.sin(w * t) / (2.0 * np.pi)),
            lambda t: d / T * (1.0 - np.cos(w * t)),
            lambda t: d / T * w * np.sin(w * t),
            description=f"smooth ramp {s} -> {s + d} over {T}",
        )

    @classmethod
    def step_change(cls, before: float, after: float, at: float) -> "Profile":
        b, a, t0 = float(before), float(after), float(at)
        return cls(lambda t: np.where(t < t0, b, a), lambda t: np.zeros_like(t),
                   lambda t: np.zeros_like(t), description=f"step {b} -> {a} at {t0}")

    @classmethod
    def sampled(cls, t, y) -> "Profile":
        """Interpolate samples; node derivatives come from central differences."""
        t = np.asarray(t, dtype=float)
        y = np.asarray(y, dtype=float)
        if t.ndim != 1 or t.shape != y.shape or t.size < 3:
            raise ValueError("sampled profile needs matching 1-D arrays with at least 3 samples")
        if np.any(np.diff(t) <= 0):
            raise ValueError("sample times must be strictly increasing")
        dy = np.gradient(y, t, edge_order=2)
        spline = CubicHermiteSpline(t, y, dy)
        d1, d2 = spline.derivative(1), spline.derivative(2)
        return cls(spline, d1, d2, description=f"sampled ({t.size} nodes)")


@dataclass(frozen=True)
class FieldCurve:
    """Field direction (theta, phi) and, unless this is a bare direction, magnitude r."""

    theta: Profile
    phi: Profile
    duration: float
    r: Profile | None = None
    sample_count: int = DEFAULT_SAMPLES
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if self.sample_count < 3:
            raise ValueError("sample_count must be at least 3")

    @property
    def is_direction(self) -> bool:
        return self.r is None

    def angles(self, t):
        return self.theta(t), self.phi(t)

    def rates(self, t):
        return self.theta(t, 1), self.phi(t, 1)

    def accels(self, t):
        return self.theta(t, 2), self.phi(t, 2)

    def magnitude(self, t):
        if self.r is None:
            raise ValueError("curve has no magnitude; it only describes a direction")
        return self.r(t)

    def evaluate(self, t):
        return self.magnitude(t), self.theta(t), self.phi(t)

    def sample_times(self, n: int | None = None) -> np.ndarray:
        return np.linspace(0.0, self.duration, n or self.sample_count)

    def with_magnitude(self, r: Profile | float, **params) -> "FieldCurve":
        if not isinstance(r, Profile):
            r = Profile.constant(r)
        return replace(self, r=r, params={**self.params, **params})


# ---------------------------------------------------------------- presets

def cone(theta0: float, rate: float, duration: float, phi0: float = 0.0, **kw) -> FieldCurve:
    return FieldCurve(Profile.constant(theta0), Profile.linear(phi0, rate), duration, kind="cone",
                      params=dict(theta0=theta0, rate=rate, phi0=phi0), **kw)


def smooth_loop(theta0: float, duration: float, turns: float = 1.0, phi0: float = 0.0, **kw) -> FieldCurve:
    """Cone of fixed polar angle whose azimuthal rate ramps up from and back to zero."""
    return FieldCurve(Profile.constant(theta0), Profile.smooth_ramp(phi0, 2 * np.pi * turns, duration),
                      duration, kind="smooth_loop", params=dict(theta0=theta0, turns=turns, phi0=phi0), **kw)


def planar(rate: float, duration: float, wobble: float = 0.0, wobble_freq: float = 1.0,
           phi0: float = 0.0, **kw) -> FieldCurve:
    """Field in the x-y plane, phi(t) = phi0 + rate t + wobble sin(wobble_freq t)."""
    return FieldCurve(Profile.constant(np.pi / 2), Profile.wobble(phi0, rate, wobble, wobble_freq),
                      duration, kind="planar",
                      params=dict(rate=rate, wobble=wobble, wobble_freq=wobble_freq, phi0=phi0), **kw)


def rotating_xy(rate: float, duration: float, phi0: float = 0.0, **kw) -> FieldCurve:
    curve = planar(rate, duration, phi0=phi0, **kw)
    return replace(curve, kind="rotating_xy", params=dict(rate=rate, phi0=phi0))


def meridian(theta_start: float, speed: float, duration: float, phi0: float = 0.0, **kw) -> FieldCurve:
    return FieldCurve(Profile.linear(theta_start, speed), Profile.constant(phi0), duration, kind="meridian",
                      params=dict(theta_start=theta_start, speed=speed, phi0=phi0), **kw)


def spiral(theta_start: float, theta_rate: float, rate: float, duration: float, phi0: float = 0.0,
           **kw) -> FieldCurve:
    return FieldCurve(Profile.linear(theta_start, theta_rate), Profile.linear(phi0, rate), duration,
                      kind="spiral",
                      params=dict(theta_start=theta_start, theta_rate=theta_rate, rate=rate, phi0=phi0), **kw)


def stationary(theta0: float, phi0: float, duration: float, **kw) -> FieldCurve:
    return FieldCurve(Profile.constant(theta0), Profile.constant(phi0), duration, kind="stationary",
                      params=dict(theta0=theta0, phi0=phi0), **kw)


PRESETS = {
    "cone": cone,
    "smooth_loop": smooth_loop,
    "planar": planar,
    "rotating_xy": rotating_xy,
    "meridian": meridian,
    "spiral": spiral,
    "stationary": stationary,
}


def sampled_curve(t, r, theta, phi) -> FieldCurve:
    """Curve from tabulated samples; phi is unwrapped before interpolation."""
    t = np.asarray(t, dtype=float)
    if t.size < 3 or abs(t[0]) > 1e-12:
        raise ValueError("sampled curves must start at t = 0 and have at least 3 rows")
    if np.any(np.diff(t) <= 0):
        raise ValueError("sample times must be strictly increasing")
    phi = np.unwrap(np.asarray(phi, dtype=float))
    return FieldCurve(Profile.sampled(t, theta), Profile.sampled(t, phi), float(t[-1]),
                      r=Profile.sampled(t, r), sample_count=t.size, kind="sampled")


# ---------------------------------------------------------------- quadrature

def _node_count(curve: FieldCurve, n: int | None) -> int:
    n = n or curve.sample_count
    return n if n % 2 else n + 1


def time_grid(curve: FieldCurve, t, n: int | None = None):
    """Return ``(grid, spacing)``: for every t, ``n`` uniform nodes on [0, t]."""
    t = np.asarray(t, dtype=float)
    n = _node_count(curve, n)
    unit = np.linspace(0.0, 1.0, n)
    return t[..., None] * unit, t / (n - 1)


def integrate_from_zero(curve: FieldCurve, integrand: Callable, t, n: int | None = None):
    """Composite Simpson estimate of int_0^t integrand(s) ds, vectorised over t."""
    grid, h = time_grid(curve, t, n)
    return simpson(integrand(grid), dx=1.0, axis=-1) * h


# ---------------------------------------------------------------- kinematics

def omega(curve: FieldCurve, t):
    """Angular speed of the field direction on the unit sphere."""
    theta = curve.theta(t)
    dtheta, dphi = curve.rates(t)
    return np.hypot(dtheta, np.sin(theta) * dphi)


def _xi_raw(curve: FieldCurve, t):
    theta = curve.theta(t)
    dtheta, dphi = curve.rates(t)
    return np.arctan2(dtheta, np.sin(theta) * dphi), np.hypot(dtheta, np.sin(theta) * dphi)


def _hold_and_unwrap(xi: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Carry the last defined angle through omega = 0 stretches, then unwrap along the last axis."""
    n = xi.shape[-1]
    idx = np.where(valid, np.arange(n), -1)
    idx = np.maximum.accumulate(idx, axis=-1)
    first = np.argmax(valid, axis=-1)
    any_valid = valid.any(axis=-1)
    idx = np.where(idx < 0, first[..., None], idx)
    held = np.take_along_axis(xi, idx, axis=-1)
    held = np.where(any_valid[..., None], held, 0.0)
    return np.unwrap(held, axis=-1)


def omega_xi(curve: FieldCurve, t, n: int | None = None):
    """Return ``(omega, xi)`` at t with xi unwrapped continuously from t = 0.

    Where omega vanishes xi keeps its last defined value.
    """
    t = np.asarray(t, dtype=float)
    grid, _ = time_grid(curve, t, n)
    xi, w = _xi_raw(curve, grid)
    xi = _hold_and_unwrap(xi, w > OMEGA_EPS)
    return omega(curve, t), xi[..., -1]


def arc_length(curve: FieldCurve, t, n: int | None = None):
    """Length of the direction's trace on the unit sphere between 0 and t."""
    return integrate_from_zero(curve, lambda s: omega(curve, s), t, n)


def xi_rate(curve: FieldCurve, t):
    """d(xi)/dt from the curve's first and second derivatives; NaN where omega = 0."""
    theta = curve.theta(t)
    dtheta, dphi = curve.rates(t)
    ddtheta, ddphi = curve.accels(t)
    x = np.sin(theta) * dphi
    y = dtheta
    dx = np.cos(theta) * dtheta * dphi + np.sin(theta) * ddphi
    w2 = x * x + y * y
    with np.errstate(divide="ignore", invalid="ignore"):
        rate = (x * ddtheta - y * dx) / w2
    return np.where(w2 > OMEGA_EPS**2, rate, np.nan)


def _strict(values, name: str, strict: bool):
    if strict and np.any(np.isnan(values)):
        raise IndeterminateError(f"{name} is indeterminate where omega = 0")
    return values


def r_star(curve: FieldCurve, t, strict: bool = True):
    """Field magnitude that freezes sigma: cos(theta) phi' - xi'."""
    theta = curve.theta(t)
    _, dphi = curve.rates(t)
    return _strict(np.cos(theta) * dphi - xi_rate(curve, t), "r_star", strict)


def r_star_quotient(curve: FieldCurve, t):
    """The same quantity written with phi' in the denominators (NaN where sin(theta) phi' = 0)."""
    theta = curve.theta(t)
    dtheta, dphi = curve.rates(t)
    ddtheta, ddphi = curve.accels(t)
    x = np.sin(theta) * dphi
    dx = np.cos(theta) * dtheta * dphi + np.sin(theta) * ddphi
    with np.errstate(divide="ignore", invalid="ignore"):
        q = dtheta / x
        dq = (ddtheta * x - dtheta * dx) / (x * x)
        out = np.cos(theta) * dphi - dq / (1.0 + q * q)
    return np.where(np.abs(x) > OMEGA_EPS, out, np.nan)


def nu(curve: FieldCurve, t, strict: bool = True):
    """d(sigma)/d(arc length) = (r - r_star) / omega."""
    w = omega(curve, t)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = (curve.magnitude(t) - r_star(curve, t, strict=False)) / w
    value = np.where(w > OMEGA_EPS, value, np.nan)
    return _strict(value, "nu", strict)


def sigma(curve: FieldCurve, phases, t, n: int | None = None):
    """Continuous sigma = -alpha - phi + xi, with alpha from a PhaseRecord evaluated at t."""
    t = np.asarray(t, dtype=float)
    if np.shape(phases.alpha) != t.shape or not np.allclose(phases.t, t):
        raise ValueError("phase record was evaluated at different times")
    _, xi = omega_xi(curve, t, n)
    return -phases.alpha - curve.phi(t) + xi


def initial_sigma(curve: FieldCurve) -> float:
    """sigma at t = 0: -phi0 + xi(0), quadrant fixed by the two-argument arctangent."""
    _, xi0 = omega_xi(curve, 0.0)
    return float(-curve.phi(0.0) + xi0)


@dataclass(frozen=True)
class Kinematics:
    t: np.ndarray
    omega: np.ndarray
    xi: np.ndarray
    arc_length: np.ndarray
    r_star: np.ndarray
    nu: np.ndarray | None
    sigma: np.ndarray | None = None


def kinematics(curve: FieldCurve, t, phases=None) -> Kinematics:
    t = np.asarray(t, dtype=float)
    w, xi = omega_xi(curve, t)
    return Kinematics(
        t=t, omega=w, xi=xi, arc_length=arc_length(curve, t),
        r_star=r_star(curve, t, strict=False),
        nu=None if curve.is_direction else nu(curve, t, strict=False),
        sigma=None if phases is None else sigma(curve, phases, t),
    )


# ---------------------------------------------------------------- validation

@dataclass
class ValidationReport:
    ok: bool
    min_r: float | None
    t_min_r: float | None
    max_theta: float
    t_max_theta: float
    violations: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return dict(ok=self.ok, min_r=self.min_r, t_min_r=self.t_min_r, max_theta=self.max_theta,
                    t_max_theta=self.t_max_theta, violations=list(self.violations))


def _refine_extremum(fn, grid, values, sign):
    """Polish a grid extremum (sign=+1 for min) with a bounded 1-D search around it."""
    k = int(np.argmin(sign * values))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    best_t, best_v = float(grid[k]), float(values[k])
    if hi > lo:
        res = minimize_scalar(lambda s: sign * float(fn(s)), bounds=(lo, hi), method="bounded",
                              options=dict(xatol=1e-12 * max(1.0, hi)))
        if sign * res.fun < sign * best_v:
            best_t, best_v = float(res.x), float(sign * res.fun)
    return best_t, best_v


def validate(curve: FieldCurve, theta_margin: float = DEFAULT_THETA_MARGIN) -> ValidationReport:
    """Check that r stays positive and theta stays off the negative z-axis."""
    grid = curve.sample_times()
    violations = []
    theta = curve.theta(grid)
    t_th, max_th = _refine_extremum(curve.theta, grid, theta, -1.0)
    if not np.all(np.isfinite(theta)):
        violations.append("theta is not finite everywhere")
    if max_th > np.pi - theta_margin:
        violations.append(f"theta reaches {max_th:.12g} at t={t_th:.12g}, within {theta_margin:g} of the negative z-axis")
    if np.min(theta) < 0.0:
        k = int(np.argmin(theta))
        violations.append(f"theta negative ({theta[k]:.6g}) at t={grid[k]:.12g}")
    t_r = min_r = None
    if curve.r is not None:
        r = curve.r(grid)
        t_r, min_r = _refine_extremum(curve.r, grid, r, 1.0)
        if min_r <= 0.0 or not np.all(np.isfinite(r)):
            violations.append(f"field magnitude reaches {min_r:.6g} at t={t_r:.12g} (curve through the origin)")
    return ValidationReport(ok=not violations, min_r=min_r, t_min_r=t_r, max_theta=max_th,
                            t_max_theta=t_th, violations=violations)


# ---------------------------------------------------------------- design

def _intervals(grid, mask):
    out, start = [], None
    for t, bad in zip(grid, mask):
        if bad and start is None:
            start = t
        elif not bad and start is not None:
            out.append((float(start), float(prev)))
            start = None
        prev = t
    if start is not None:
        out.append((float(start), float(grid[-1])))
    return out


def design_field(direction: FieldCurve, nu0: float) -> FieldCurve:
    """Attach the magnitude r = r_star + nu0 * omega to a direction curve.

    Intervals where that magnitude is not positive are recorded in
    ``params["nonpositive_intervals"]`` and announced with a FieldDesignWarning;
    such stretches need the time-reversed system and are not handled here.
    """
    nu0 = float(nu0)
    grid = direction.sample_times()
    if np.all(omega(direction, grid) <= OMEGA_EPS):
        raise IndeterminateError("direction is stationary (omega = 0); nothing to design")

    def magnitude(t):
        return r_star(direction, t, strict=False) + nu0 * omega(direction, t)

    bare = replace(direction, r=None)
    curve = bare.with_magnitude(Profile(magnitude, description=f"designed nu0={nu0}"), nu0=nu0,
                                designed=True)
    r = magnitude(grid)
    bad = ~(r > 0.0)
    intervals = _intervals(grid, bad)
    curve.params["nonpositive_intervals"] = intervals
    if intervals:
        warnings.warn(
            f"designed magnitude is not positive on {intervals}; consider the time-reversed system there",
            FieldDesignWarning, stacklevel=2,
        )
    return curve


def lemma1_field(direction: FieldCurve) -> FieldCurve:
    """Shortcut for ``design_field(direction, 0.0)``: r = r_star."""
    return design_field(direction, 0.0)


def describe(curve: FieldCurve) -> str:
    return f"{curve.kind}({', '.join(f'{k}={v:.6g}' for k, v in curve.params.items() if isinstance(v, (int, float)))})"


__all__ = [
    "FieldCurve", "Profile", "Kinematics", "ValidationReport", "IndeterminateError", "FieldDesignWarning",
    "PRESETS", "cone", "smooth_loop", "planar", "rotating_xy", "meridian", "spiral", "stationary",
    "sampled_curve", "omega", "omega_xi", "arc_length", "xi_rate", "r_star", "r_star_quotient", "nu",
    "sigma", "initial_sigma", "kinematics", "validate", "design_field", "lemma1_field",
    "integrate_from_zero", "time_grid",
]
