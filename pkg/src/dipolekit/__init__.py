"""Exact, adiabatic and brute-force propagators for spin-j dipole Hamiltonians H(t) = R(t).J."""

from .su2 import SpinRep, build_generators, dipole_hamiltonian, eigensystem, hermitian_exp, rotation_W
from .curves import FieldCurve, Profile, design_field, validate
from .propagators import (
    Propagator,
    PhaseRecord,
    SolvabilityReport,
    adiabatic_U0,
    approx_large_omega,
    evolve,
    exact_U_lemma1,
    exact_U_lemma2,
    phases,
    solvability_check,
)
from .oracle import IntegrationConfig, integrate

__version__ = "0.1.0"
