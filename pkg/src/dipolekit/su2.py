"""Spin-j generators of SU(2) and the unitaries built from them.

Basis ordering is descending magnetic quantum number, so ``J3 = diag(j, j-1, ..., -j)``.
All routines broadcast over leading axes of angle arrays, which lets the
propagator and oracle modules build whole time grids of matrices at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

HERMITIAN_TOL = 1e-10

# Levi-Civita symbol, 0-based indices.
LEVI_CIVITA = np.zeros((3, 3, 3))
for _a, _b, _c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    LEVI_CIVITA[_a, _b, _c] = 1.0
    LEVI_CIVITA[_b, _a, _c] = -1.0


def parse_spin(j) -> Fraction:
    """Return ``j`` as an exact Fraction, accepting floats, ints and strings like ``"3/2"``."""
    if isinstance(j, str):
        try:
            value = Fraction(j.strip())
        except ValueError as exc:
            raise ValueError(f"cannot parse spin value {j!r}") from exc
    else:
        value = Fraction(j).limit_denominator(1000)
        if abs(float(value) - float(j)) > 1e-12:
            raise ValueError(f"spin j={j} is not a half-integer")
    if value < 0 or (2 * value).denominator != 1:
        raise ValueError(f"spin j={j} must be a non-negative half-integer")
    return value


def ladder_coefficient(j: float, m):
    """C_m = sqrt((j - m)(j + m + 1)), the raising amplitude out of |m>."""
    m = np.asarray(m, dtype=float)
    return np.sqrt(np.clip((j - m) * (j + m + 1.0), 0.0, None))


@dataclass(frozen=True)
class SpinRep:
    """Generators J1, J2, J3 of the (2j+1)-dimensional irreducible representation."""

    j: Fraction
    J1: np.ndarray = field(repr=False)
    J2: np.ndarray = field(repr=False)
    J3: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.J3.shape[0]

    @property
    def m(self) -> np.ndarray:
        """Magnetic quantum numbers in basis order (descending)."""
        return float(self.j) - np.arange(self.dim)

    @property
    def generators(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.J1, self.J2, self.J3

    @property
    def Jp(self) -> np.ndarray:
        return self.J1 + 1j * self.J2

    @property
    def Jm(self) -> np.ndarray:
        return self.J1 - 1j * self.J2

    @property
    def casimir(self) -> float:
        j = float(self.j)
        return j * (j + 1.0)

    @cached_property
    def _eigenbases(self):
        # J1 and J2 share the spectrum of J3; cache their eigenvectors so that
        # exp(-i s J_a) reduces to a diagonal phase and two matmuls.
        bases = []
        for gen in self.generators[:2]:
            vals, vecs = np.linalg.eigh(gen)
            bases.append((vals, vecs))
        bases.append((np.diag(self.J3).real.copy(), np.eye(self.dim, dtype=complex)))
        return bases

    def exp_generator(self, axis: int, angle) -> np.ndarray:
        """exp(-i * angle * J_axis) for axis in {1, 2, 3}; broadcasts over ``angle``."""
        vals, vecs = self._eigenbases[axis - 1]
        angle = np.asarray(angle, dtype=float)
        phases = np.exp(-1j * angle[..., None] * vals)
        if axis == 3:
            out = np.zeros(angle.shape + (self.dim, self.dim), dtype=complex)
            idx = np.arange(self.dim)
            out[..., idx, idx] = phases
            return out
        return (vecs * phases[..., None, :]) @ vecs.conj().T

    def combination(self, coeffs) -> np.ndarray:
        """sum_a coeffs[..., a] J_a as a (..., dim, dim) array."""
        coeffs = np.asarray(coeffs, dtype=float)
        return np.einsum("...a,aij->...ij", coeffs, np.stack(self.generators))


def build_generators(j) -> SpinRep:
    """Build the spin-j generators from the ladder action J+|m> = C_m |m+1>."""
    j = parse_spin(j)
    jf = float(j)
    dim = int(2 * j) + 1
    m = jf - np.arange(dim)
    # Row i-1, column i raises |m_i> to |m_i + 1>.
    Jp = np.diag(ladder_coefficient(jf, m[1:]), k=1).astype(complex)
    Jm = Jp.conj().T
    J1 = 0.5 * (Jp + Jm)
    J2 = (Jp - Jm) / 2j
    J3 = np.diag(m).astype(complex)
    return SpinRep(j=j, J1=J1, J2=J2, J3=J3)


def _check_hermitian(H: np.ndarray, tol: float = HERMITIAN_TOL) -> None:
    if H.ndim < 2 or H.shape[-1] != H.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {H.shape}")
    scale = max(1.0, float(np.max(np.abs(H), initial=0.0)))
    defect = float(np.max(np.abs(H - np.swapaxes(H.conj(), -1, -2)), initial=0.0))
    if defect > tol * scale:
        raise ValueError(f"matrix is not Hermitian (defect {defect:.3e})")


def hermitian_exp(H, s=1.0, *, check: bool = True) -> np.ndarray:
    """Return exp(-i s H) for Hermitian ``H`` via its spectral decomposition.

    ``H`` may carry leading batch axes; ``s`` broadcasts against them.
    """
    H = np.asarray(H, dtype=complex)
    if check:
        _check_hermitian(H)
    H = 0.5 * (H + np.swapaxes(H.conj(), -1, -2))
    vals, vecs = np.linalg.eigh(H)
    s = np.asarray(s, dtype=float)
    phases = np.exp(-1j * s[..., None] * vals)
    return (vecs * phases[..., None, :]) @ np.swapaxes(vecs.conj(), -1, -2)


def rotation_W(rep: SpinRep, theta, phi) -> np.ndarray:
    """W(theta, phi) = exp(-i phi J3) exp(-i theta J2) exp(i phi J3).

    ``theta`` must lie in [0, pi); ``phi`` is taken modulo 2 pi, W being
    periodic in it for every j.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if np.any(theta < 0.0) or np.any(theta >= np.pi):
        raise ValueError("theta must lie in [0, pi) (negative z-axis excluded)")
    theta, phi = np.broadcast_arrays(theta, phi)
    m = rep.m
    left = np.exp(-1j * phi[..., None] * m)
    middle = rep.exp_generator(2, theta)
    return left[..., :, None] * middle * left.conj()[..., None, :]


def unit_vector(theta, phi) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    return np.stack(
        np.broadcast_arrays(np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)),
        axis=-1,
    )


def dipole_hamiltonian(rep: SpinRep, r, theta, phi) -> np.ndarray:
    """H = r (sin(theta) cos(phi) J1 + sin(theta) sin(phi) J2 + cos(theta) J3)."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise ValueError("field magnitude r must be positive (curve may not pass through the origin)")
    return rep.combination(r[..., None] * unit_vector(theta, phi))


def field_hamiltonian(rep: SpinRep, R) -> np.ndarray:
    """H = R . J for Cartesian field components R[..., 3]; zero fields allowed."""
    return rep.combination(R)


def eigensystem(rep: SpinRep, r: float, theta: float, phi: float):
    """Eigenpairs of the dipole Hamiltonian with the phase convention fixed by W.

    Returns ``(energies, vectors)`` where ``energies[k] = n r`` for
    ``n = -j, ..., j`` and ``vectors[:, k]`` is ``W(theta, phi)|n>``.
    """
    if r <= 0.0:
        raise ValueError("field magnitude r must be positive")
    W = rotation_W(rep, theta, phi)
    order = np.arange(rep.dim)[::-1]
    return r * rep.m[order], W[:, order]


def commutator(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return A @ B - B @ A


def dagger(U: np.ndarray) -> np.ndarray:
    return np.swapaxes(np.conj(U), -1, -2)


def unitarity_defect(U) -> float:
    """max-norm of U^dagger U - I, maximised over any batch axes."""
    U = np.asarray(U)
    eye = np.eye(U.shape[-1])
    return float(np.max(np.abs(dagger(U) @ U - eye)))
