"""Phases, frame-transformed Hamiltonians and closed-form evolution operators.

The exact propagators follow the chain of frames

    U(t) = U0(t) W0 V(t) W0^dagger,

where U0 is the adiabatic propagator, W0 = W(theta0, phi0), and V solves the
reduced planar problem: exp(-i l (cos s0 J1 - sin s0 J2)) when sigma is
constant, or exp(i sigma(l) J3) exp(-i l (J1 + nu0 J3)) exp(-i sigma0 J3)
when sigma grows linearly in the arc length l.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import curves as fc
from .curves import FieldCurve, IndeterminateError, OMEGA_EPS
from .su2 import SpinRep, dagger, dipole_hamiltonian, hermitian_exp, ladder_coefficient, rotation_W, unitarity_defect

METHODS = ("adiabatic", "lemma1", "lemma2", "oracle", "large_omega")
DEFAULT_LEMMA_RTOL = 1e-7
GAUGE_TOL = 1e-8


class NotSolvableError(ValueError):
    """The curve does not satisfy the solvability condition a method relies on."""


class GaugeWarning(UserWarning):
    pass


def lemma_rtol() -> float:
    """Relative tolerance for the solvability conditions; ``DIPOLEKIT_LEMMA_RTOL`` overrides it."""
    value = os.environ.get("DIPOLEKIT_LEMMA_RTOL")
    return float(value) if value else DEFAULT_LEMMA_RTOL


@dataclass(frozen=True)
class PhaseRecord:
    t: np.ndarray
    delta: np.ndarray
    gamma: np.ndarray

    @property
    def alpha(self) -> np.ndarray:
        return self.delta + self.gamma

    def per_level(self, rep: SpinRep) -> dict:
        """Phases of each instantaneous eigenstate n = -j..j; they are n times the scalar ones."""
        n = rep.m[::-1]
        return dict(n=n, delta=np.multiply.outer(self.delta, n), gamma=np.multiply.outer(self.gamma, n),
                    alpha=np.multiply.outer(self.alpha, n))


@dataclass
class Propagator:
    matrix: np.ndarray
    method: str
    t: np.ndarray | float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown propagator method {self.method!r}")
        self.meta.setdefault("unitarity_defect", unitarity_defect(self.matrix))


@dataclass
class SolvabilityReport:
    nu0: float
    residual: float
    lemma1_residual: float
    tolerance: float
    classification: str
    negative_rstar_intervals: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return dict(nu0=self.nu0, residual=self.residual, lemma1_residual=self.lemma1_residual,
                    tolerance=self.tolerance, classification=self.classification,
                    negative_rstar_intervals=self.negative_rstar_intervals)


# ---------------------------------------------------------------- phases and couplings

def phases(curve: FieldCurve, t, n: int | None = None) -> PhaseRecord:
    """Dynamical phase -int r and geometric phase -int (1 - cos theta) phi'."""
    t = np.asarray(t, dtype=float)
    delta = -fc.integrate_from_zero(curve, curve.magnitude, t, n)
    gamma = -fc.integrate_from_zero(curve, lambda s: (1.0 - np.cos(curve.theta(s))) * curve.phi(s, 1), t, n)
    return PhaseRecord(t=t, delta=delta, gamma=gamma)


def adiabatic_coupling(rep: SpinRep, curve: FieldCurve, t) -> np.ndarray:
    """Matrix of <m;t| d/dt |n;t> for the W-convention eigenbasis (rows/columns in descending m)."""
    theta, phi = curve.angles(t)
    dtheta, dphi = curve.rates(t)
    theta, phi, dtheta, dphi = (np.asarray(a)[..., None] for a in (theta, phi, dtheta, dphi))
    m = rep.m
    j = float(rep.j)
    d = rep.dim
    A = np.zeros(np.shape(theta)[:-1] + (d, d), dtype=complex)
    idx = np.arange(d)
    A[..., idx, idx] = 1j * m * (1.0 - np.cos(theta)) * dphi
    # (m, n) with m = n - 1 sits at row i, column i - 1; coefficient C_m.
    c_low = ladder_coefficient(j, m[1:])
    lower = np.exp(1j * phi) * c_low * (0.5j * np.sin(theta) * dphi + 0.5 * dtheta)
    # (m, n) with n = m - 1 sits at row i, column i + 1; coefficient C_n.
    c_up = ladder_coefficient(j, m[1:])
    upper = np.exp(-1j * phi) * c_up * (0.5j * np.sin(theta) * dphi - 0.5 * dtheta)
    A[..., idx[1:], idx[:-1]] = lower
    A[..., idx[:-1], idx[1:]] = upper
    return A


def adiabaticity(rep: SpinRep, curve: FieldCurve, t=None) -> dict:
    """Largest off-diagonal coupling and its ratio to the level spacing r along the curve."""
    t = curve.sample_times() if t is None else np.asarray(t, dtype=float)
    A = adiabatic_coupling(rep, curve, t)
    off = np.abs(A - A * np.eye(rep.dim))
    peak = off.reshape(off.shape[0], -1).max(axis=1)
    ratio = peak / curve.magnitude(t)
    k = int(np.argmax(ratio))
    return dict(max_offdiag_coupling=float(peak.max()), max_coupling_over_gap=float(ratio[k]),
                t_worst=float(t[k]))


# ---------------------------------------------------------------- frames

def _initial_frame(rep: SpinRep, curve: FieldCurve) -> np.ndarray:
    theta0, phi0 = curve.angles(0.0)
    return rotation_W(rep, theta0, phi0)


def adiabatic_frame(rep: SpinRep, curve: FieldCurve, t, record: PhaseRecord | None = None) -> np.ndarray:
    """U0(t) = W(theta(t), phi(t)) exp(i alpha(t) J3) W0^dagger."""
    t = np.asarray(t, dtype=float)
    record = record or phases(curve, t)
    theta, phi = curve.angles(t)
    return rotation_W(rep, theta, phi) @ rep.exp_generator(3, -record.alpha) @ dagger(_initial_frame(rep, curve))


def adiabatic_U0(rep: SpinRep, curve: FieldCurve, t) -> Propagator:
    t = np.asarray(t, dtype=float)
    record = phases(curve, t)
    U = adiabatic_frame(rep, curve, t, record)
    meta = dict(alpha=record.alpha, delta=record.delta, gamma=record.gamma)
    if not curve.is_direction:
        meta.update(adiabaticity(rep, curve))
    return Propagator(U, "adiabatic", t, meta)


def hamiltonian_sampler(rep: SpinRep, curve: FieldCurve) -> Callable:
    def H(t):
        r, theta, phi = curve.evaluate(t)
        return dipole_hamiltonian(rep, r, theta, phi)
    return H


def _derivative(fn: Callable, t, h: float):
    # five-point stencil
    return (8.0 * (fn(t + h) - fn(t - h)) - (fn(t + 2 * h) - fn(t - 2 * h))) / (12.0 * h)


def gauge_transform(H: Callable, U: Callable, t, *, step: float = 1e-3, tol: float = GAUGE_TOL,
                    return_residual: bool = False):
    """H' = U H U^dagger - i U dU^dagger/dt, with dU^dagger/dt from finite differences.

    A Hermiticity defect above ``tol`` means the derivative of U is unreliable
    and triggers a GaugeWarning. The Hermitian part is returned.
    """
    t = np.asarray(t, dtype=float)
    Ut = U(t)
    dUdag = _derivative(lambda s: dagger(U(s)), t, step)
    Hp = Ut @ H(t) @ dagger(Ut) - 1j * Ut @ dUdag
    residual = float(np.max(np.abs(Hp - dagger(Hp))))
    if residual > tol:
        warnings.warn(f"transformed Hamiltonian Hermiticity defect {residual:.3e} exceeds {tol:g}",
                      GaugeWarning, stacklevel=2)
    Hp = 0.5 * (Hp + dagger(Hp))
    return (Hp, residual) if return_residual else Hp


def sigma_of_t(curve: FieldCurve, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return fc.sigma(curve, phases(curve, t), t)


def H1(rep: SpinRep, curve: FieldCurve, t) -> np.ndarray:
    """omega (cos sigma J1 - sin sigma J2): the field seen in the adiabatic frame."""
    t = np.asarray(t, dtype=float)
    w = fc.omega(curve, t)
    s = sigma_of_t(curve, t)
    return rep.combination(np.stack([w * np.cos(s), -w * np.sin(s), np.zeros_like(w)], axis=-1))


def H2_H3(rep: SpinRep, curve: FieldCurve, t):
    """(omega J1 + sigma' J3, sigma' (cos l J3 + sin l J2)) with sigma' = r - r_star."""
    t = np.asarray(t, dtype=float)
    w = fc.omega(curve, t)
    ds = curve.magnitude(t) - fc.r_star(curve, t, strict=False)
    ds = np.where(w > OMEGA_EPS, ds, 0.0)
    ell = fc.arc_length(curve, t)
    zero = np.zeros_like(w)
    H2 = rep.combination(np.stack([w, zero, ds], axis=-1))
    H3 = rep.combination(np.stack([zero, ds * np.sin(ell), ds * np.cos(ell)], axis=-1))
    return H2, H3


def time_at_arclength(curve: FieldCurve, ell, iterations: int = 6) -> np.ndarray:
    """Invert l(t): monotone cubic seed refined by Newton steps on l(t) - target."""
    grid = curve.sample_times()
    L = fc.arc_length(curve, grid)
    if np.any(np.diff(L) <= 0.0):
        raise IndeterminateError("arc length is not strictly increasing (omega vanishes); cannot invert")
    ell = np.asarray(ell, dtype=float)
    if np.any(ell < -1e-12) or np.any(ell > L[-1] + 1e-12):
        raise ValueError(f"arc length outside [0, {L[-1]:.6g}]")
    t = np.clip(PchipInterpolator(L, grid)(ell), 0.0, curve.duration)
    for _ in range(iterations):
        t = np.clip(t - (fc.arc_length(curve, t) - ell) / fc.omega(curve, t), 0.0, curve.duration)
    return t


def Hbar1(rep: SpinRep, curve: FieldCurve, ell) -> np.ndarray:
    s = sigma_of_t(curve, time_at_arclength(curve, ell))
    return rep.combination(np.stack([np.cos(s), -np.sin(s), np.zeros_like(s)], axis=-1))


def Hbar2(rep: SpinRep, curve: FieldCurve, ell) -> np.ndarray:
    """J1 + nu(l) J3, the planar problem in the frame rotating with sigma."""
    nu = fc.nu(curve, time_at_arclength(curve, ell))
    return rep.combination(np.stack([np.ones_like(nu), np.zeros_like(nu), nu], axis=-1))


# ---------------------------------------------------------------- solvability

def solvability_check(curve: FieldCurve, rtol: float | None = None) -> SolvabilityReport:
    """Fit r - r_star = nu0 * omega by least squares over the sample grid and classify."""
    rtol = lemma_rtol() if rtol is None else rtol
    grid = curve.sample_times()
    r = curve.magnitude(grid)
    w = fc.omega(curve, grid)
    tol = rtol * float(np.sqrt(np.mean(r * r)))
    moving = w > OMEGA_EPS
    if not moving.any():
        return SolvabilityReport(0.0, 0.0, 0.0, tol, "adiabatic_exact")
    rs = fc.r_star(curve, grid, strict=False)
    d = (r - rs)[moving]
    wm = w[moving]
    nu0 = float(np.dot(d, wm) / np.dot(wm, wm))
    residual = float(np.sqrt(np.mean((d - nu0 * wm) ** 2)))
    lemma1_residual = float(np.sqrt(np.mean(d * d)))
    if lemma1_residual <= tol:
        label = "lemma1"
    elif residual <= tol:
        label = "lemma2"
    else:
        label = "none"
    negative = fc._intervals(grid, np.where(moving, rs < 0.0, False))
    return SolvabilityReport(nu0, residual, lemma1_residual, tol, label, negative)


def _require(curve: FieldCurve, allowed: tuple, force: bool, report: SolvabilityReport | None):
    check = fc.validate(curve)
    if not check.ok:
        raise ValueError("; ".join(check.violations))
    report = report or solvability_check(curve)
    if report.classification not in allowed and not force:
        raise NotSolvableError(
            f"curve classified {report.classification!r} (residual {report.residual:.3e}, "
            f"lemma1 residual {report.lemma1_residual:.3e}, tolerance {report.tolerance:.3e})"
        )
    return report


# ---------------------------------------------------------------- exact propagators

def exact_U_lemma1(rep: SpinRep, curve: FieldCurve, t, *, force: bool = False,
                   report: SolvabilityReport | None = None) -> Propagator:
    """Exact evolution when r = r_star (sigma constant along the curve)."""
    report = _require(curve, ("lemma1", "adiabatic_exact"), force, report)
    t = np.asarray(t, dtype=float)
    W0 = _initial_frame(rep, curve)
    s0 = fc.initial_sigma(curve)
    ell = fc.arc_length(curve, t)
    rot = rep.exp_generator(3, -s0)
    inner = rot @ rep.exp_generator(1, ell) @ dagger(rot)
    U = adiabatic_frame(rep, curve, t) @ W0 @ inner @ dagger(W0)
    return Propagator(U, "lemma1", t, dict(sigma0=s0, arc_length=ell, solvability=report.as_dict()))


def exact_U_lemma2(rep: SpinRep, curve: FieldCurve, t, nu0: float | None = None, *, force: bool = False,
                   report: SolvabilityReport | None = None) -> Propagator:
    """Exact evolution when r = r_star + nu0 * omega (sigma affine in arc length)."""
    report = report or solvability_check(curve)
    if nu0 is None:
        nu0 = report.nu0
    else:
        nu0 = float(nu0)
        grid = curve.sample_times()
        w = fc.omega(curve, grid)
        moving = w > OMEGA_EPS
        if moving.any():
            d = (curve.magnitude(grid) - fc.r_star(curve, grid, strict=False) - nu0 * w)[moving]
            res = float(np.sqrt(np.mean(d * d)))
            label = "lemma2" if res <= report.tolerance else "none"
            report = SolvabilityReport(nu0, res, report.lemma1_residual, report.tolerance, label,
                                       report.negative_rstar_intervals)
    report = _require(curve, ("lemma1", "lemma2", "adiabatic_exact"), force, report)
    t = np.asarray(t, dtype=float)
    W0 = _initial_frame(rep, curve)
    s0 = fc.initial_sigma(curve)
    ell = fc.arc_length(curve, t)
    rotating = rep.exp_generator(3, -(s0 + nu0 * ell))
    reduced = hermitian_exp(rep.J1 + nu0 * rep.J3, ell)
    inner = rotating @ reduced @ rep.exp_generator(3, s0)
    U = adiabatic_frame(rep, curve, t) @ W0 @ inner @ dagger(W0)
    return Propagator(U, "lemma2", t, dict(nu0=nu0, sigma0=s0, arc_length=ell, solvability=report.as_dict()))


def approx_large_omega(rep: SpinRep, curve: FieldCurve, t) -> Propagator:
    """Neglect nu = (r - r_star)/omega in the rotating frame; exact when nu vanishes.

    The frame rotation exp(i sigma J3) uses the true sigma(t); only the
    reduced Hamiltonian J1 + nu J3 is replaced by J1.
    """
    t = np.asarray(t, dtype=float)
    W0 = _initial_frame(rep, curve)
    s0 = fc.initial_sigma(curve)
    ell = fc.arc_length(curve, t)
    s = sigma_of_t(curve, t)
    inner = rep.exp_generator(3, -s) @ rep.exp_generator(1, ell) @ rep.exp_generator(3, s0)
    U = adiabatic_frame(rep, curve, t) @ W0 @ inner @ dagger(W0)
    grid = curve.sample_times()
    nu = fc.nu(curve, grid, strict=False)
    max_nu = float(np.nanmax(np.abs(nu))) if np.any(np.isfinite(nu)) else 0.0
    return Propagator(U, "large_omega", t, dict(max_abs_nu=max_nu, sigma0=s0, arc_length=ell))


def schrodinger_residual(rep: SpinRep, curve: FieldCurve, U: Callable, t, h: float) -> float:
    """max || i dU/dt - H U || with a second-order central difference of step h."""
    t = np.asarray(t, dtype=float)
    dU = (U(t + h) - U(t - h)) / (2.0 * h)
    H = hamiltonian_sampler(rep, curve)(t)
    return float(np.max(np.abs(1j * dU - H @ U(t))))


def evolve(rep: SpinRep, curve: FieldCurve, t, method: str = "auto", *, force: bool = False,
           oracle_steps: int = 100_000) -> Propagator:
    """Dispatch to one propagator; ``auto`` picks an exact method when the curve allows it."""
    from .oracle import IntegrationConfig, trajectory

    method = method.replace("-", "_")
    t = np.asarray(t, dtype=float)
    if method == "auto":
        report = solvability_check(curve)
        if report.classification in ("lemma1", "adiabatic_exact"):
            return exact_U_lemma1(rep, curve, t, report=report)
        if report.classification == "lemma2":
            return exact_U_lemma2(rep, curve, t, report=report)
        method = "oracle"
    if method == "adiabatic":
        return adiabatic_U0(rep, curve, t)
    if method == "lemma1":
        return exact_U_lemma1(rep, curve, t, force=force)
    if method == "lemma2":
        return exact_U_lemma2(rep, curve, t, force=force)
    if method == "large_omega":
        return approx_large_omega(rep, curve, t)
    if method == "oracle":
        check = fc.validate(curve)
        if check.min_r is not None and check.min_r <= 0.0:
            raise ValueError("; ".join(check.violations))
        return trajectory(hamiltonian_sampler(rep, curve), t, IntegrationConfig(steps=oracle_steps),
                          duration=curve.duration)
    raise ValueError(f"unknown method {method!r}; choose auto or one of {METHODS}")
