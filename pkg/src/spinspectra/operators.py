"""Collective-spin operators in the maximal-spin (Dicke) basis.

An ensemble of N spin-1/2 particles restricted to its fully symmetric
sector carries total spin J = N/2 and lives in an (N+1)-dimensional
space spanned by |J,m>.  Basis convention used everywhere in this
package: m runs in ascending order, m = -J at index 0 up to m = +J at
index N.  With this ordering Jz is diagonal with monotone entries and
the mirror index of m is simply N - k.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ValidationError

HERMITICITY_TOL = 1e-12


@dataclass(frozen=True)
class SpinSystem:
    """A collective spin of N particles, J = N/2, dimension N + 1."""

    n_particles: int

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValidationError(
                f"need at least one particle, got N={self.n_particles}"
            )

    @property
    def j(self) -> float:
        return self.n_particles / 2.0

    @property
    def dim(self) -> int:
        return self.n_particles + 1

    @property
    def m_values(self) -> np.ndarray:
        """Magnetic quantum numbers in basis order, -J ... +J."""
        return np.arange(self.dim) - self.j


@dataclass(frozen=True)
class Operator:
    """Dense complex matrix on a :class:`SpinSystem`, with a Hermitian tag."""

    system: SpinSystem
    matrix: np.ndarray
    hermitian: bool = False
    label: str = field(default="", compare=False)

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        if mat.shape != (self.system.dim, self.system.dim):
            raise ValidationError(
                f"matrix shape {mat.shape} does not match system dim {self.system.dim}"
            )
        object.__setattr__(self, "matrix", mat)
        if self.hermitian:
            self.require_hermitian(HERMITICITY_TOL)

    def require_hermitian(self, tol: float = 1e-10) -> None:
        dev = hermiticity_deviation(self.matrix)
        if dev > tol:
            raise ValidationError(f"matrix is not Hermitian: max deviation {dev:.3e}")

    def dagger(self) -> "Operator":
        return Operator(self.system, self.matrix.conj().T, self.hermitian)

    # Light algebra so Hamiltonian assembly stays readable.  The Hermitian
    # tag propagates only where it is guaranteed by construction.
    def __add__(self, other: "Operator") -> "Operator":
        self._check_same_system(other)
        return Operator(
            self.system,
            self.matrix + other.matrix,
            hermitian=self.hermitian and other.hermitian,
        )

    def __sub__(self, other: "Operator") -> "Operator":
        self._check_same_system(other)
        return Operator(
            self.system,
            self.matrix - other.matrix,
            hermitian=self.hermitian and other.hermitian,
        )

    def __mul__(self, scalar: complex) -> "Operator":
        herm = self.hermitian and float(np.imag(scalar)) == 0.0
        return Operator(self.system, self.matrix * scalar, hermitian=herm)

    __rmul__ = __mul__

    def __matmul__(self, other: "Operator") -> "Operator":
        self._check_same_system(other)
        return Operator(self.system, self.matrix @ other.matrix, hermitian=False)

    def _check_same_system(self, other: "Operator") -> None:
        if other.system.dim != self.system.dim:
            raise ValidationError("operators act on different systems")


def hermiticity_deviation(matrix: np.ndarray) -> float:
    return float(np.max(np.abs(matrix - matrix.conj().T)))


def identity(system: SpinSystem) -> Operator:
    return Operator(system, np.eye(system.dim), hermitian=True, label="identity")


@lru_cache(maxsize=None)
def collective_operators(system: SpinSystem) -> tuple[Operator, Operator, Operator]:
    """Angular-momentum matrices (Jx, Jy, Jz) on the ascending-m basis.

    Jz is diagonal with entries m.  Jx and Jy come from the ladder
    operators with <J,m+1|J+|J,m> = sqrt(J(J+1) - m(m+1)).  Operators are
    immutable, so the per-system instances are cached and shared.
    """
    j = system.j
    m = system.m_values
    ladder = np.sqrt(j * (j + 1) - m[:-1] * (m[:-1] + 1))
    jplus = np.zeros((system.dim, system.dim), dtype=complex)
    jplus[np.arange(1, system.dim), np.arange(system.dim - 1)] = ladder
    jminus = jplus.conj().T
    jx = Operator(system, (jplus + jminus) / 2.0, hermitian=True, label="jx")
    jy = Operator(system, (jplus - jminus) / 2.0j, hermitian=True, label="jy")
    jz = Operator(system, np.diag(m).astype(complex), hermitian=True, label="jz")
    return jx, jy, jz


@lru_cache(maxsize=None)
def exchange_operator(system: SpinSystem) -> Operator:
    """Mode-exchange unitary exp(-i pi Jx).

    Conjugation by this operator leaves Jx invariant and flips the sign
    of both Jy and Jz, which is the symmetry the antisymmetric-spectrum
    machinery is built on.
    """
    jx, _, _ = collective_operators(system)
    return Operator(
        system, expm_hermitian(jx, np.pi).matrix, hermitian=False, label="exchange"
    )


def expm_hermitian(h: Operator, tau: float) -> Operator:
    """Unitary exp(-i H tau) of a Hermitian operator via eigendecomposition.

    Eigendecomposition keeps the result unitary to round-off, which the
    long pulse-train propagations rely on.
    """
    if not h.hermitian:
        raise ValidationError("expm_hermitian requires an operator tagged Hermitian")
    w, v = np.linalg.eigh(h.matrix)
    u = (v * np.exp(-1j * w * tau)[None, :]) @ v.conj().T
    return Operator(h.system, u, hermitian=False, label=f"expm({h.label})")
