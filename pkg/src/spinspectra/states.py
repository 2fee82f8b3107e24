"""Initial states and the mirror-symmetry test on their amplitudes.

A state sum_m C_m |J,m> is called symmetric when C_m = +C_{-m} for all m
or C_m = -C_{-m} for all m (one global sign).  Such states are exchange
eigenstates, and feeding them into an exchange-symmetric sequence is what
makes the output spectrum antisymmetric in the detuning.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import comb
from typing import Optional

import numpy as np

from .errors import ValidationError
from .operators import Operator, SpinSystem, exchange_operator

NORM_TOL = 1e-12
SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class PureState:
    """Amplitude vector over |J,m>, index k holding m = k - J."""

    system: SpinSystem
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        if amp.shape != (self.system.dim,):
            raise ValidationError(
                f"amplitude vector has shape {amp.shape}, expected ({self.system.dim},)"
            )
        norm = np.linalg.norm(amp)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValidationError(f"state is not normalized: |norm - 1| = {abs(norm-1):.3e}")
        object.__setattr__(self, "amplitudes", amp)

    def density(self) -> "DensityMatrix":
        return DensityMatrix(self.system, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class DensityMatrix:
    """Dense density matrix on a :class:`SpinSystem`."""

    system: SpinSystem
    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        if mat.shape != (self.system.dim, self.system.dim):
            raise ValidationError(
                f"density matrix shape {mat.shape} does not match dim {self.system.dim}"
            )
        object.__setattr__(self, "matrix", mat)

    def validate(self, tol: float = 1e-10, eig_floor: float = -1e-9) -> None:
        """Assert Hermiticity, unit trace, and positivity up to round-off."""
        dev = float(np.max(np.abs(self.matrix - self.matrix.conj().T)))
        if dev > tol:
            raise ValidationError(f"density matrix not Hermitian: deviation {dev:.3e}")
        tr = complex(np.trace(self.matrix))
        if abs(tr - 1.0) > tol:
            raise ValidationError(f"density matrix trace {tr} differs from 1")
        eigs = np.linalg.eigvalsh((self.matrix + self.matrix.conj().T) / 2)
        if eigs.min() < eig_floor:
            raise ValidationError(f"density matrix has negative eigenvalue {eigs.min():.3e}")


def dicke_state(system: SpinSystem, m: float) -> PureState:
    """Basis state |J,m>; m must sit on the ladder -J, -J+1, ..., +J."""
    offset = m + system.j
    index = int(round(offset))
    if abs(offset - index) > 1e-12 or not 0 <= index < system.dim:
        raise ValidationError(f"m={m} is not in the ladder -J..+J for J={system.j}")
    amp = np.zeros(system.dim, dtype=complex)
    amp[index] = 1.0
    return PureState(system, amp)


def x_polarized(system: SpinSystem) -> PureState:
    """Product state with every spin along +x; C_m = sqrt(binom(N, m+J))/2^(N/2).

    This is the +J eigenstate of Jx and the standard symmetric input.
    """
    n = system.n_particles
    amp = np.array([np.sqrt(comb(n, k)) for k in range(system.dim)], dtype=complex)
    amp /= np.sqrt(2.0) ** n
    return PureState(system, amp)


def ghz_state(system: SpinSystem) -> PureState:
    """(|J,J> + |J,-J>)/sqrt(2), an even symmetric superposition."""
    amp = np.zeros(system.dim, dtype=complex)
    amp[0] = amp[-1] = 1.0 / np.sqrt(2.0)
    return PureState(system, amp)


def is_symmetric(state: PureState, tol: float = SYMMETRY_TOL) -> tuple[bool, Optional[int]]:
    """Test C_m = s * C_{-m} for a single global sign s in {+1, -1}.

    The comparison is made after rotating the largest-magnitude amplitude
    onto the positive real axis, so a global phase does not spoil it.
    Returns ``(True, s)`` on success and ``(False, None)`` otherwise.
    """
    amp = state.amplitudes
    pivot = amp[np.argmax(np.abs(amp))]
    rotated = amp * np.exp(-1j * np.angle(pivot))
    mirrored = rotated[::-1]
    for sign in (1, -1):
        if np.max(np.abs(rotated - sign * mirrored)) <= tol:
            return True, sign
    return False, None


def is_symmetric_density(rho: DensityMatrix, tol: float = SYMMETRY_TOL) -> bool:
    """Mixed-state version: invariance of rho under exchange conjugation."""
    u = exchange_operator(rho.system).matrix
    conj = u.conj().T @ rho.matrix @ u
    return float(np.max(np.abs(conj - rho.matrix))) <= tol


def expectation_value(state: PureState, op: Operator) -> complex:
    """<psi|A|psi> without any Hermiticity bookkeeping (internal helper)."""
    return complex(state.amplitudes.conj() @ (op.matrix @ state.amplitudes))


# --- JSON round trip used by the CLI's custom initial states -----------------

def state_to_json(state: PureState) -> str:
    pairs = [[float(c.real), float(c.imag)] for c in state.amplitudes]
    return json.dumps(pairs)


def state_from_json(system: SpinSystem, text: str) -> PureState:
    try:
        pairs = json.loads(text)
        amp = np.array([complex(re, im) for re, im in pairs], dtype=complex)
    except (ValueError, TypeError) as exc:
        raise ValidationError(f"malformed state JSON: {exc}") from exc
    if amp.shape != (system.dim,):
        raise ValidationError(
            f"state file has {amp.shape[0]} amplitudes, expected {system.dim}"
        )
    return PureState(system, amp)
