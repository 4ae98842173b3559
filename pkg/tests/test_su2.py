from fractions import Fraction

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from dipolekit.su2 import (
    LEVI_CIVITA,
    build_generators,
    commutator,
    dagger,
    dipole_hamiltonian,
    eigensystem,
    field_hamiltonian,
    hermitian_exp,
    ladder_coefficient,
    parse_spin,
    rotation_W,
    unit_vector,
    unitarity_defect,
)

SPINS = ["1/2", 1, "3/2", 2, "5/2", 5, 12]
spins = st.sampled_from([Fraction(k, 2) for k in range(1, 9)])
thetas = st.floats(0.0, np.pi - 1e-3)
phis = st.floats(-10.0, 10.0)


def test_spin_half_is_pauli_over_two():
    rep = build_generators("1/2")
    np.testing.assert_array_equal(rep.J3, np.diag([0.5, -0.5]))
    np.testing.assert_array_equal(rep.J1, [[0, 0.5], [0.5, 0]])
    np.testing.assert_array_equal(rep.J2, [[0, -0.5j], [0.5j, 0]])


def test_spin_one_ladder():
    rep = build_generators(1)
    np.testing.assert_array_equal(np.diag(rep.J3), [1, 0, -1])
    # C_0 = C_{-1} = sqrt(2) by hand
    np.testing.assert_allclose(rep.Jp, [[0, np.sqrt(2), 0], [0, 0, np.sqrt(2)], [0, 0, 0]], atol=1e-15)
    assert ladder_coefficient(1, 0) == pytest.approx(np.sqrt(2))
    assert ladder_coefficient(1.5, -1.5) == pytest.approx(np.sqrt(3))


@pytest.mark.parametrize("bad", [-0.5, 0.3, "1/3", "x"])
def test_rejects_bad_spin(bad):
    with pytest.raises(ValueError):
        parse_spin(bad)


@pytest.mark.parametrize("j", SPINS)
def test_algebra(j):
    rep = build_generators(j)
    J = rep.generators
    scale = max(np.abs(M).max() for M in J)
    for a in range(3):
        np.testing.assert_allclose(J[a], dagger(J[a]), atol=0)
        for b in range(3):
            expected = 1j * sum(LEVI_CIVITA[a, b, c] * J[c] for c in range(3))
            assert np.abs(commutator(J[a], J[b]) - expected).max() <= 1e-12 * scale
    jf = float(rep.j)
    assert np.abs(sum(M @ M for M in J) - jf * (jf + 1) * np.eye(rep.dim)).max() <= 1e-12 * jf * (jf + 1)
    np.testing.assert_array_equal(np.diag(rep.J3).real, np.arange(jf, -jf - 1, -1))


@given(spins, st.integers(0, 2), st.integers(0, 2), st.floats(-7, 7))
def test_conjugation_identity(j, a, b, beta):
    if a == b:
        return
    rep = build_generators(j)
    J = rep.generators
    c = 3 - a - b
    lhs = rep.exp_generator(a + 1, beta) @ J[b] @ rep.exp_generator(a + 1, -beta)
    rhs = np.cos(beta) * J[b] + LEVI_CIVITA[a, b, c] * np.sin(beta) * J[c]
    assert np.abs(lhs - rhs).max() <= 1e-10


def test_hermitian_exp_examples():
    rep = build_generators("1/2")
    np.testing.assert_allclose(hermitian_exp(rep.J3, 2 * np.pi), -np.eye(2), atol=1e-15)
    np.testing.assert_allclose(hermitian_exp(rep.J2, np.pi), [[0, -1], [1, 0]], atol=1e-15)
    np.testing.assert_allclose(hermitian_exp(rep.J1 + 0.3 * rep.J3, 0.0), np.eye(2), atol=1e-15)


def test_hermitian_exp_rejects():
    with pytest.raises(ValueError):
        hermitian_exp(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        hermitian_exp(np.array([[0, 1], [0, 0]], dtype=complex))


@given(spins, st.lists(st.floats(-2, 2), min_size=3, max_size=3), st.floats(-5, 5), st.floats(-5, 5))
def test_hermitian_exp_matches_expm_and_group_law(j, coeffs, s, s2):
    rep = build_generators(j)
    H = rep.combination(np.array(coeffs))
    U = hermitian_exp(H, s)
    assert np.abs(U - scipy.linalg.expm(-1j * s * H)).max() <= 1e-10
    assert np.abs(U @ hermitian_exp(H, s2) - hermitian_exp(H, s + s2)).max() <= 1e-10
    assert unitarity_defect(U) <= 1e-12


def test_rotation_examples():
    half = build_generators("1/2")
    np.testing.assert_allclose(rotation_W(half, 0.0, 0.0), np.eye(2), atol=1e-15)
    np.testing.assert_allclose(rotation_W(half, np.pi / 2, 0.0), np.array([[1, -1], [1, 1]]) / np.sqrt(2),
                               atol=1e-15)
    with pytest.raises(ValueError):
        rotation_W(half, np.pi, 0.0)


@given(spins, thetas, phis)
def test_rotation_conjugates_J3_to_field_direction(j, theta, phi):
    rep = build_generators(j)
    W = rotation_W(rep, theta, phi)
    n = unit_vector(theta, phi)
    assert np.abs(W @ rep.J3 @ dagger(W) - rep.combination(n)).max() <= 1e-10
    assert unitarity_defect(W) <= 1e-12


@pytest.mark.parametrize("j", ["1/2", "3/2", 2])
def test_rotation_continuous_across_phi_seam(j):
    rep = build_generators(j)
    for theta in (0.3, 1.2, 2.9):
        before = rotation_W(rep, theta, 2 * np.pi - 1e-9)
        assert np.abs(before - rotation_W(rep, theta, 0.0)).max() < 1e-8


def test_dipole_hamiltonian_examples():
    rep = build_generators("1/2")
    np.testing.assert_allclose(dipole_hamiltonian(rep, 2.0, 0.0, 0.0), 2.0 * rep.J3, atol=0)
    np.testing.assert_allclose(dipole_hamiltonian(rep, 1.0, np.pi / 2, 0.0), rep.J1, atol=1e-16)
    with pytest.raises(ValueError):
        dipole_hamiltonian(rep, 0.0, 0.1, 0.1)
    R = np.array([0.3, -0.4, 1.2])
    r = np.linalg.norm(R)
    np.testing.assert_allclose(field_hamiltonian(rep, R),
                               dipole_hamiltonian(rep, r, np.arccos(R[2] / r), np.arctan2(R[1], R[0])), atol=1e-14)


def test_eigensystem_diagonal_case():
    values, vectors = eigensystem(build_generators(1), 2.0, 0.0, 0.0)
    np.testing.assert_allclose(values, [-2, 0, 2])
    np.testing.assert_allclose(np.abs(vectors), np.fliplr(np.eye(3)), atol=1e-15)


@given(spins, st.floats(0.1, 10), thetas, phis)
def test_eigensystem_residual(j, r, theta, phi):
    rep = build_generators(j)
    values, vectors = eigensystem(rep, r, theta, phi)
    H = dipole_hamiltonian(rep, r, theta, phi)
    np.testing.assert_allclose(values, np.linalg.eigvalsh(H), atol=1e-10 * r)
    assert np.abs(H @ vectors - vectors * values).max() <= 1e-10 * r
