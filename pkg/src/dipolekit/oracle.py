"""Brute-force time-ordered exponentials, the reference every closed form is checked against.

Each step factor is an exact unitary from a spectral exponential, and steps are
processed in vectorised chunks: Hamiltonians for a whole chunk are sampled at
once and the ordered product inside a chunk is formed by pairwise reduction.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .propagators import Propagator
from .su2 import commutator, hermitian_exp, unitarity_defect

SCHEMES = ("midpoint_exponential", "magnus2")
EXPECTED_ORDER = {"midpoint_exponential": 2.0, "magnus2": 4.0}
_GAUSS = np.array([0.5 - np.sqrt(3.0) / 6.0, 0.5 + np.sqrt(3.0) / 6.0])


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class IntegrationConfig:
    steps: int = 100_000
    scheme: str = "midpoint_exponential"
    unitarity_check_interval: int = 16
    chunk: int = 4096

    def __post_init__(self):
        if int(self.steps) < 1:
            raise ValueError("steps must be at least 1")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.chunk < 1 or self.unitarity_check_interval < 1:
            raise ValueError("chunk and unitarity_check_interval must be positive")


def _ordered_product(factors: np.ndarray) -> np.ndarray:
    """factors[-1] @ ... @ factors[0] by pairwise reduction."""
    while factors.shape[0] > 1:
        if factors.shape[0] % 2:
            tail = factors[-1:]
            factors = factors[:-1]
        else:
            tail = None
        factors = factors[1::2] @ factors[0::2]
        if tail is not None:
            factors = np.concatenate([factors, tail])
    return factors[0]


def _step_factors(H: Callable, starts: np.ndarray, dt: float, scheme: str) -> np.ndarray:
    if scheme == "midpoint_exponential":
        return hermitian_exp(H(starts + 0.5 * dt), dt)
    # Two-term Magnus expansion at the two Gauss-Legendre nodes.
    Ha = np.asarray(H(starts + _GAUSS[0] * dt))
    Hb = np.asarray(H(starts + _GAUSS[1] * dt))
    K = 0.5 * dt * (Ha + Hb) - 1j * (np.sqrt(3.0) / 12.0) * dt * dt * commutator(Hb, Ha)
    return hermitian_exp(K, 1.0)


def integrate(H: Callable, T: float, cfg: IntegrationConfig = IntegrationConfig(), t0: float = 0.0) -> Propagator:
    """Approximate T exp(-i int_{t0}^{t0+T} H) with ``cfg.steps`` uniform steps.

    ``H`` must accept an array of times and return a stack of Hermitian matrices.
    """
    steps = int(cfg.steps)
    dt = float(T) / steps
    U = None
    worst = 0.0
    for k, start in enumerate(range(0, steps, cfg.chunk)):
        idx = np.arange(start, min(start + cfg.chunk, steps))
        factors = _step_factors(H, t0 + idx * dt, dt, cfg.scheme)
        block = _ordered_product(factors)
        U = block if U is None else block @ U
        if k % cfg.unitarity_check_interval == 0:
            worst = max(worst, unitarity_defect(U))
    worst = max(worst, unitarity_defect(U))
    return Propagator(U, "oracle", float(t0 + T), dict(steps=steps, scheme=cfg.scheme, dt=dt,
                                                      unitarity_defect=worst))


def trajectory(H: Callable, times, cfg: IntegrationConfig = IntegrationConfig(), duration: float | None = None) -> Propagator:
    """U(t) at each requested time, integrating piecewise between consecutive times.

    The step density is ``cfg.steps`` per ``duration`` (default: the largest time).
    """
    times = np.asarray(times, dtype=float)
    flat = np.atleast_1d(times)
    order = np.argsort(flat)
    span = float(duration or flat.max() or 1.0)
    dim = np.asarray(H(np.zeros(1))).shape[-1]
    U = np.eye(dim, dtype=complex)
    out = np.empty((flat.size, dim, dim), dtype=complex)
    current, total = 0.0, 0
    for i in order:
        target = flat[i]
        if target < current - 1e-15:
            raise ValueError("times must be non-negative")
        gap = target - current
        if gap > 0:
            n = max(1, int(np.ceil(cfg.steps * gap / span)))
            piece = integrate(H, gap, IntegrationConfig(n, cfg.scheme, cfg.unitarity_check_interval, cfg.chunk), current)
            U = piece.matrix @ U
            total += n
        current = max(current, target)
        out[i] = U
    matrix = out.reshape(times.shape + (dim, dim))
    return Propagator(matrix, "oracle", times, dict(steps=total, scheme=cfg.scheme))


@dataclass
class OrderEstimate:
    order: float
    differences: tuple
    expected: float
    reliable: bool


def convergence_order(H: Callable, T: float, base_steps: int = 200,
                      scheme: str = "midpoint_exponential", floor: float = 1e-13) -> OrderEstimate:
    """Richardson estimate of the observed order from runs with N, 2N and 4N steps."""
    if base_steps < 100:
        raise ValueError("base_steps must be at least 100")
    runs = [integrate(H, T, IntegrationConfig(base_steps * 2**k, scheme)).matrix for k in range(3)]
    e1 = float(np.max(np.abs(runs[0] - runs[1])))
    e2 = float(np.max(np.abs(runs[1] - runs[2])))
    expected = EXPECTED_ORDER[scheme]
    if e2 <= floor:
        warnings.warn("differences at round-off level; order is indeterminate", ConvergenceWarning, stacklevel=2)
        return OrderEstimate(float("nan"), (e1, e2), expected, False)
    order = float(np.log2(e1 / e2))
    reliable = abs(order - expected) <= 0.5
    if not reliable:
        warnings.warn(f"observed order {order:.2f} differs from {expected:g}; Hamiltonian may be non-smooth",
                      ConvergenceWarning, stacklevel=2)
    return OrderEstimate(order, (e1, e2), expected, reliable)

