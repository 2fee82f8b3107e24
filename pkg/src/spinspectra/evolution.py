"""Time evolution of pure states and density matrices over schedules.

A :class:`Schedule` is an ordered list of contiguous :class:`Segment`
objects.  Each segment carries either a static Hamiltonian (propagated
by one exact exponential), an :class:`AffineDrive` or generic builder
(propagated by midpoint-exponential stepping,
psi <- expm(-i H(t + dt/2) dt) psi), or an instantaneous unitary such as
an idealized pulse.  Open-system segments integrate the master equation

    drho/dt = -i [H(t), rho] + sum_k gamma_k (L rho L^dag - {L^dag L, rho}/2)

with classical fourth-order Runge-Kutta.

``evolve_pure_many`` propagates a whole family of structurally identical
schedules in lockstep (one vectorized pass over grid points); it applies
exactly the same midpoint-exponential rule per point and exists purely
so detuning sweeps do not pay Python overhead per point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import AccuracyError, ValidationError
from .hamiltonians import NoiseModel
from .operators import Operator, SpinSystem, expm_hermitian
from .states import DensityMatrix, PureState

NORM_DRIFT_TOL = 1e-9
TRACE_DRIFT_TOL = 1e-8
HERM_DRIFT_TOL = 1e-8
POSITIVITY_FLOOR = -1e-7

#: Taylor tail theta^(j+1)/(j+1)! must drop below this before truncation.
_SERIES_TOL = 1e-16


@dataclass(frozen=True)
class LindbladChannel:
    """Jump operator L with rate gamma >= 0."""

    operator: Operator
    rate: float

    def __post_init__(self):
        if self.rate < 0:
            raise ValidationError("Lindblad rate must be non-negative")


@dataclass(frozen=True)
class AffineDrive:
    """Time dependence of the form H(t) = base + f(t) * coupling.

    ``scalar`` must broadcast over numpy arrays of times.  This covers
    every drive in the package (oscillating signal on Jz, square pulse
    envelopes) and lets the integrators exploit structure: if base and
    coupling are both diagonal the whole segment reduces to accumulated
    phases, with no change to the midpoint-rule result.
    """

    base: Operator
    coupling: Operator
    scalar: Callable[[np.ndarray], np.ndarray]
    label: str = ""

    @property
    def diagonal(self) -> bool:
        return _is_diagonal(self.base.matrix) and _is_diagonal(self.coupling.matrix)

    def __call__(self, t: float) -> Operator:
        h = self.base.matrix + float(self.scalar(t)) * self.coupling.matrix
        return Operator(self.base.system, h, hermitian=False)


HamiltonianSpec = Union[Operator, AffineDrive, Callable[[float], Operator], None]


@dataclass(frozen=True)
class SegmentNoise:
    """Per-step white-noise injection on an affine drive's scalar.

    ``stream`` uniquely identifies the draw (for sweeps: grid-point and
    segment indices) so parallel and serial evaluation agree bit for bit.
    """

    model: NoiseModel
    stream: tuple[int, ...] = ()

    def values(self, n: int, dt: float) -> np.ndarray:
        seq = np.random.SeedSequence([int(self.model.seed), *map(int, self.stream)])
        rng = np.random.default_rng(seq)
        return self.model.amplitude * rng.standard_normal(n) / math.sqrt(dt)


@dataclass(frozen=True)
class Segment:
    """One contiguous piece of a schedule.

    Exactly one of ``hamiltonian`` / ``unitary`` drives the dynamics; an
    instantaneous ``unitary`` segment must have zero duration.  ``step``
    is required whenever stepping happens (time-dependent Hamiltonian or
    any Lindblad channels).
    """

    duration: float
    hamiltonian: HamiltonianSpec = None
    unitary: Optional[Operator] = None
    channels: tuple[LindbladChannel, ...] = ()
    step: Optional[float] = None
    start: float = 0.0
    label: str = ""
    noise: Optional[SegmentNoise] = None

    def __post_init__(self):
        if self.duration < 0:
            raise ValidationError("segment duration must be non-negative")
        if self.unitary is not None:
            if self.duration != 0:
                raise ValidationError("instantaneous unitary segments have zero duration")
            if self.hamiltonian is not None:
                raise ValidationError("segment cannot carry both a unitary and a Hamiltonian")
        time_dependent = self.hamiltonian is not None and not isinstance(self.hamiltonian, Operator)
        if (time_dependent or self.channels) and self.duration > 0:
            if self.step is None or self.step <= 0:
                raise ValidationError(
                    "a positive integrator step is required for time-dependent "
                    "or dissipative segments"
                )
        if self.noise is not None and self.noise.model.active:
            if not isinstance(self.hamiltonian, AffineDrive):
                raise ValidationError("per-step noise requires an affine drive segment")

    def n_steps(self) -> int:
        # tolerate float noise when duration is an exact multiple of step
        return max(1, math.ceil(self.duration / self.step - 1e-9))


@dataclass(frozen=True)
class Schedule:
    """Contiguous segments sharing one spin system."""

    system: SpinSystem
    segments: tuple[Segment, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        t = 0.0
        scale = max(1.0, sum(s.duration for s in self.segments))
        for seg in self.segments:
            if abs(seg.start - t) > 1e-9 * scale:
                raise ValidationError(
                    f"segment '{seg.label}' starts at {seg.start}, expected {t}"
                )
            t = seg.start + seg.duration

    @property
    def duration(self) -> float:
        if not self.segments:
            return 0.0
        last = self.segments[-1]
        return last.start + last.duration

    def to_json_dict(self) -> dict:
        """Loss-tolerant description for debugging dumps."""
        segs = []
        for seg in self.segments:
            kind = ("unitary" if seg.unitary is not None
                    else "static" if isinstance(seg.hamiltonian, Operator)
                    else "none" if seg.hamiltonian is None
                    else "drive")
            entry = {
                "label": seg.label,
                "kind": kind,
                "start": seg.start,
                "duration": seg.duration,
                "step": seg.step,
                "channels": [
                    {"operator": ch.operator.label or "custom", "rate": ch.rate}
                    for ch in seg.channels
                ],
            }
            if isinstance(seg.hamiltonian, AffineDrive):
                entry["drive"] = seg.hamiltonian.label
            if seg.noise is not None and seg.noise.model.active:
                entry["noise"] = {
                    "kind": seg.noise.model.kind,
                    "amplitude": seg.noise.model.amplitude,
                    "stream": list(seg.noise.stream),
                }
            segs.append(entry)
        return {"n_particles": self.system.n_particles, "segments": segs}


# ---------------------------------------------------------------------------
# Small dense matrix-exponential helpers
# ---------------------------------------------------------------------------

def _is_diagonal(matrix: np.ndarray) -> bool:
    return not np.any(matrix[~np.eye(matrix.shape[-1], dtype=bool)])

def _series_order(theta: float) -> int:
    """Smallest Taylor order whose tail bound drops below _SERIES_TOL."""
    term = 1.0
    for j in range(1, 60):
        term *= theta / j
        if term < _SERIES_TOL:
            return j
    raise AccuracyError(f"matrix exponential series would not converge (theta={theta})")


def _expm_batch(x: np.ndarray) -> np.ndarray:
    """exp of a stack (..., d, d) of small anti-Hermitian matrices.

    Scaling-and-squaring with a Taylor series truncated at machine
    precision; equivalent to the exact exponential to round-off.
    """
    d = x.shape[-1]
    norm = float(np.max(np.sum(np.abs(x), axis=-2))) if x.size else 0.0
    squarings = max(0, math.ceil(math.log2(norm / 0.5)) if norm > 0.5 else 0)
    y = x / (2.0 ** squarings)
    order = _series_order(min(norm / 2.0 ** squarings, 0.5) + 1e-30)
    eye = np.broadcast_to(np.eye(d, dtype=complex), y.shape)
    u = eye + y / order
    for j in range(order - 1, 0, -1):
        u = eye + (y / j) @ u
    for _ in range(squarings):
        u = u @ u
    return u


def _fold_ordered(us: np.ndarray) -> np.ndarray:
    """Time-ordered product U_{n-1} ... U_0 of a stack of matrices."""
    while us.shape[0] > 1:
        n = us.shape[0]
        paired = np.matmul(us[1 : n - n % 2 : 2], us[0 : n - n % 2 : 2])
        us = np.concatenate([paired, us[n - n % 2 :]], axis=0)
    return us[0]


def _apply_series(x: np.ndarray, psi: np.ndarray, order: int) -> np.ndarray:
    """psi <- expm(x) psi for stacked x (..., d, d) and psi (..., d)."""
    acc = psi.copy()
    term = psi[..., None]
    for j in range(1, order + 1):
        term = np.matmul(x, term) / j
        acc = acc + term[..., 0]
    return acc


def _one_norm(matrix: np.ndarray) -> float:
    return float(np.max(np.sum(np.abs(matrix), axis=0)))


# ---------------------------------------------------------------------------
# Midpoint Hamiltonian evaluation for one segment
# ---------------------------------------------------------------------------

def _segment_grid(seg: Segment) -> tuple[int, float, np.ndarray]:
    n = seg.n_steps()
    dt = seg.duration / n
    t_mid = seg.start + (np.arange(n) + 0.5) * dt
    return n, dt, t_mid


def _drive_scalars(seg: Segment, drive: AffineDrive, t: np.ndarray, dt: float) -> np.ndarray:
    f = np.asarray(drive.scalar(t), dtype=float)
    if seg.noise is not None and seg.noise.model.active:
        f = f + seg.noise.values(len(t), dt)
    return f


def _builder_stack(seg: Segment, t_mid: np.ndarray, dim: int) -> np.ndarray:
    """Evaluate a generic t -> Operator builder on all midpoints."""
    builder = seg.hamiltonian
    stack = np.empty((len(t_mid), dim, dim), dtype=complex)
    for i, t in enumerate(t_mid):
        h = builder(t)
        stack[i] = h.matrix if isinstance(h, Operator) else np.asarray(h, dtype=complex)
    return stack


# ---------------------------------------------------------------------------
# Pure-state propagation
# ---------------------------------------------------------------------------

def evolve_pure(state: PureState, schedule: Schedule) -> PureState:
    """Propagate a pure state through a closed-system schedule.

    Static segments use one exact exponential; time-dependent segments
    use midpoint-exponential steps, which are unitary up to round-off.
    Raises :class:`AccuracyError` if the norm drifts beyond 1e-9 and
    :class:`ValidationError` if any segment carries Lindblad channels.
    """
    psi = state.amplitudes.copy()
    for seg in schedule.segments:
        if seg.channels:
            raise ValidationError(
                "schedule has Lindblad channels; use evolve_density for open systems"
            )
        psi = _advance_pure(psi, seg, schedule.system.dim)
    norm = float(np.linalg.norm(psi))
    if abs(norm - 1.0) > NORM_DRIFT_TOL:
        raise AccuracyError(f"norm drifted by {abs(norm-1.0):.3e} over the schedule")
    if abs(norm - 1.0) > 1e-13:  # rescale round-off drift; bit-identity otherwise
        psi = psi / norm
    return PureState(schedule.system, psi)


def _advance_pure(psi: np.ndarray, seg: Segment, dim: int) -> np.ndarray:
    if seg.unitary is not None:
        return seg.unitary.matrix @ psi
    if seg.hamiltonian is None or seg.duration == 0.0:
        return psi
    if isinstance(seg.hamiltonian, Operator):
        u = expm_hermitian(seg.hamiltonian, seg.duration)
        return u.matrix @ psi

    n, dt, t_mid = _segment_grid(seg)
    drive = seg.hamiltonian
    if isinstance(drive, AffineDrive):
        f = _drive_scalars(seg, drive, t_mid, dt)
        if drive.diagonal:
            # All step propagators commute; summing the midpoint phases is
            # exactly the stepped product.
            phase = (np.diag(drive.base.matrix).real * seg.duration
                     + np.diag(drive.coupling.matrix).real * (dt * float(np.sum(f))))
            return np.exp(-1j * phase) * psi
        stack = drive.base.matrix[None, :, :] + f[:, None, None] * drive.coupling.matrix[None, :, :]
    else:
        stack = _builder_stack(seg, t_mid, dim)
        if not np.any(stack[:, ~np.eye(dim, dtype=bool)]):
            phase = dt * np.sum(np.einsum("kii->ki", stack), axis=0).real
            return np.exp(-1j * phase) * psi

    u = _fold_ordered(_expm_batch(-1j * dt * stack))
    return u @ psi


# ---------------------------------------------------------------------------
# Density-matrix propagation (RK4 master equation)
# ---------------------------------------------------------------------------

def evolve_density(rho: DensityMatrix, schedule: Schedule, check: bool = True) -> DensityMatrix:
    """Propagate a density matrix, with dissipation where channels are set.

    Static channel-free segments are applied as exact unitary
    conjugations; everything else integrates the full master-equation
    right-hand side with classical RK4 at the segment's step.  The RHS is
    evaluated through the drift operator H - (i/2) sum_k gamma_k L^dag L,
    which is algebraically identical and preserves Hermiticity exactly,
    but requires a Hermitian input.  At the end the trace and Hermiticity
    drift must stay below 1e-8 and the smallest eigenvalue above -1e-7,
    otherwise an :class:`AccuracyError` is raised (never silently
    repaired).
    """
    if float(np.max(np.abs(rho.matrix - rho.matrix.conj().T))) > 1e-10:
        raise ValidationError("input density matrix is not Hermitian")
    r = rho.matrix.copy()
    for seg in schedule.segments:
        r = _advance_density(r, seg, schedule.system.dim)
    if check:
        tr_drift = abs(complex(np.trace(r)) - 1.0)
        herm_drift = float(np.max(np.abs(r - r.conj().T)))
        min_eig = float(np.linalg.eigvalsh((r + r.conj().T) / 2).min())
        if tr_drift > TRACE_DRIFT_TOL:
            raise AccuracyError(f"trace drifted by {tr_drift:.3e}; reduce the step")
        if herm_drift > HERM_DRIFT_TOL:
            raise AccuracyError(f"Hermiticity drifted by {herm_drift:.3e}; reduce the step")
        if min_eig < POSITIVITY_FLOOR:
            raise AccuracyError(f"positivity violated: min eigenvalue {min_eig:.3e}")
    return DensityMatrix(rho.system, r)


def _advance_density(r: np.ndarray, seg: Segment, dim: int) -> np.ndarray:
    if seg.unitary is not None:
        u = seg.unitary.matrix
        return u @ r @ u.conj().T
    if seg.hamiltonian is None and not seg.channels:
        return r
    if isinstance(seg.hamiltonian, Operator) and not seg.channels:
        u = expm_hermitian(seg.hamiltonian, seg.duration).matrix
        return u @ r @ u.conj().T

    diagonal = _diagonal_density_map(r, seg)
    if diagonal is not None:
        return diagonal

    n = seg.n_steps()
    dt = seg.duration / n

    gamma_ls = [(ch.rate, ch.operator.matrix) for ch in seg.channels if ch.rate > 0]
    g_half = np.zeros((dim, dim), dtype=complex)
    for rate, l_mat in gamma_ls:
        g_half += (0.5j * rate) * (l_mat.conj().T @ l_mat)

    h_at = _stage_hamiltonians(seg, n, dt, dim)

    def rhs(state: np.ndarray, drift: np.ndarray) -> np.ndarray:
        # -i(M rho - rho M^dag) with M = H - (i/2) sum gamma L^dag L equals
        # -i[H, rho] - {sum gamma L^dag L, rho}/2 for Hermitian rho
        a = -1j * (drift @ state)
        out = a + a.conj().T
        for rate, l_mat in gamma_ls:
            out += rate * ((l_mat @ state) @ l_mat.conj().T)
        return out

    for k in range(n):
        h0, hh, h1 = h_at(k)
        m0, mh, m1 = h0 - g_half, hh - g_half, h1 - g_half
        k1 = rhs(r, m0)
        k2 = rhs(r + 0.5 * dt * k1, mh)
        k3 = rhs(r + 0.5 * dt * k2, mh)
        k4 = rhs(r + dt * k3, m1)
        r = r + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return r


def _diagonal_density_map(r: np.ndarray, seg: Segment) -> Optional[np.ndarray]:
    """Exact segment map when Hamiltonian and all jump operators are diagonal.

    Every matrix element then obeys a decoupled scalar ODE,
    d rho_mm' / dt = [-i (h_m - h_m') - sum_k (gamma_k/2)(l_m - l_m')^2] rho_mm',
    so the segment applies elementwise phases and decays exactly.  RK4 at
    the default step is both slower and less stable than this map for the
    large detuning-spread free segments, where it matters most.  Returns
    None when the structure does not apply.
    """
    if not all(_is_diagonal(ch.operator.matrix) for ch in seg.channels):
        return None
    ham = seg.hamiltonian
    if ham is None:
        phase = np.zeros(r.shape[0])
    elif isinstance(ham, Operator):
        if not _is_diagonal(ham.matrix):
            return None
        phase = np.diag(ham.matrix).real * seg.duration
    elif isinstance(ham, AffineDrive) and ham.diagonal:
        n, dt, t_mid = _segment_grid(seg)
        f = _drive_scalars(seg, ham, t_mid, dt)
        phase = (np.diag(ham.base.matrix).real * seg.duration
                 + np.diag(ham.coupling.matrix).real * (dt * float(np.sum(f))))
    else:
        return None

    exponent = -1j * (phase[:, None] - phase[None, :])
    for ch in seg.channels:
        if ch.rate > 0:
            l_diag = np.diag(ch.operator.matrix).real
            exponent = exponent - (ch.rate / 2.0) * seg.duration * (
                l_diag[:, None] - l_diag[None, :]) ** 2
    return r * np.exp(exponent)


def _stage_hamiltonians(seg: Segment, n: int, dt: float, dim: int):
    """Returns h_at(k) -> (H(t_k), H(t_k + dt/2), H(t_k + dt))."""
    if seg.hamiltonian is None:
        zero = np.zeros((dim, dim), dtype=complex)
        return lambda k: (zero, zero, zero)
    if isinstance(seg.hamiltonian, Operator):
        h = seg.hamiltonian.matrix
        return lambda k: (h, h, h)
    if isinstance(seg.hamiltonian, AffineDrive):
        drive = seg.hamiltonian
        t_half = seg.start + np.arange(2 * n + 1) * (dt / 2.0)
        f = np.asarray(drive.scalar(t_half), dtype=float)
        if seg.noise is not None and seg.noise.model.active:
            per_step = seg.noise.values(n, dt)
            f = f + np.repeat(per_step, 2, axis=0)[: 2 * n + 1]
        base, coup = drive.base.matrix, drive.coupling.matrix

        def h_at(k):
            return (base + f[2 * k] * coup,
                    base + f[2 * k + 1] * coup,
                    base + f[2 * k + 2] * coup)

        return h_at

    builder = seg.hamiltonian

    def h_at_generic(k):
        t = seg.start + k * dt
        def mat(tt):
            h = builder(tt)
            return h.matrix if isinstance(h, Operator) else np.asarray(h, dtype=complex)
        return mat(t), mat(t + dt / 2.0), mat(t + dt)

    return h_at_generic


# ---------------------------------------------------------------------------
# Expectation values
# ---------------------------------------------------------------------------

def expectation(state: Union[PureState, DensityMatrix], op: Operator) -> float:
    """Real expectation value of a Hermitian operator."""
    if not op.hermitian:
        raise ValidationError("expectation requires an operator tagged Hermitian")
    if isinstance(state, PureState):
        value = complex(state.amplitudes.conj() @ (op.matrix @ state.amplitudes))
    else:
        value = complex(np.trace(op.matrix @ state.matrix))
    if abs(value.imag) > 1e-10:
        raise AccuracyError(f"expectation has imaginary residue {value.imag:.3e}")
    return value.real


# ---------------------------------------------------------------------------
# Lockstep propagation of structurally identical schedules
# ---------------------------------------------------------------------------

def evolve_pure_many(states: np.ndarray, schedules: Sequence[Schedule]) -> np.ndarray:
    """Propagate one state per schedule, vectorized across schedules.

    All schedules must share the segment structure (same count, same
    kinds, same operator matrices for drive segments, equal step counts
    for non-diagonal drives).  The result matches per-point
    :func:`evolve_pure` to round-off; sweeps cross-check that.
    """
    n_sched = len(schedules)
    psi = np.array(states, dtype=complex)
    if psi.shape[0] != n_sched:
        raise ValidationError("need exactly one input state per schedule")
    n_segs = {len(s.segments) for s in schedules}
    if len(n_segs) != 1:
        raise ValidationError("schedules differ in segment count")
    dim = schedules[0].system.dim

    for i in range(n_segs.pop()):
        segs = [s.segments[i] for s in schedules]
        psi = _advance_pure_many(psi, segs, dim)

    norms = np.linalg.norm(psi, axis=1)
    drift = float(np.max(np.abs(norms - 1.0)))
    if drift > NORM_DRIFT_TOL:
        raise AccuracyError(f"norm drifted by {drift:.3e} in lockstep evolution")
    return psi / norms[:, None]


def _advance_pure_many(psi: np.ndarray, segs: list[Segment], dim: int) -> np.ndarray:
    first = segs[0]
    if any(s.channels for s in segs):
        raise ValidationError("lockstep evolution handles closed systems only")

    if first.unitary is not None:
        if all(s.unitary is first.unitary for s in segs):
            return psi @ first.unitary.matrix.T
        stack = np.stack([s.unitary.matrix for s in segs])
        return np.matmul(stack, psi[:, :, None])[:, :, 0]

    if first.hamiltonian is None:
        return psi

    if not isinstance(first.hamiltonian, AffineDrive):
        # No structure to exploit; fall back to one-by-one stepping.
        for idx, seg in enumerate(segs):
            psi[idx] = _advance_pure(psi[idx], seg, dim)
        return psi

    drive = first.hamiltonian
    shared_ops = all(
        isinstance(s.hamiltonian, AffineDrive)
        and s.hamiltonian.base is drive.base
        and s.hamiltonian.coupling is drive.coupling
        for s in segs
    )
    if not shared_ops:
        for idx, seg in enumerate(segs):
            psi[idx] = _advance_pure(psi[idx], seg, dim)
        return psi

    starts = np.array([s.start for s in segs])
    durations = np.array([s.duration for s in segs])
    counts = np.array([s.n_steps() for s in segs])
    dts = durations / counts

    if drive.diagonal:
        base_diag = np.diag(drive.base.matrix).real
        coup_diag = np.diag(drive.coupling.matrix).real
        sums = np.empty(len(segs))
        for n in np.unique(counts):
            rows = np.nonzero(counts == n)[0]
            t_mid = starts[rows, None] + (np.arange(n)[None, :] + 0.5) * dts[rows, None]
            f = np.asarray(drive.scalar(t_mid), dtype=float)
            for j, row in enumerate(rows):
                seg = segs[row]
                if seg.noise is not None and seg.noise.model.active:
                    f[j] += seg.noise.values(n, dts[row])
            sums[rows] = dts[rows] * np.sum(f, axis=1)
        phases = durations[:, None] * base_diag[None, :] + sums[:, None] * coup_diag[None, :]
        return np.exp(-1j * phases) * psi

    if len(set(counts.tolist())) != 1:
        raise ValidationError("non-diagonal lockstep segments must share the step count")
    n = int(counts[0])
    dt_col = dts[:, None, None]
    base = -1j * dt_col * drive.base.matrix[None, :, :]
    coup = -1j * dt_col * drive.coupling.matrix[None, :, :]

    # Pre-evaluate the drive on the whole (point, step) grid; it is small
    # and gives a sound norm bound for the series order.
    t_mid = starts[:, None] + (np.arange(n)[None, :] + 0.5) * dts[:, None]
    f_all = np.asarray(drive.scalar(t_mid), dtype=float)
    for idx, seg in enumerate(segs):
        if seg.noise is not None and seg.noise.model.active:
            f_all[idx] = f_all[idx] + seg.noise.values(n, dts[idx])

    theta = float(np.max(dts)) * (
        _one_norm(drive.base.matrix)
        + float(np.max(np.abs(f_all))) * _one_norm(drive.coupling.matrix)
    )
    order = 0 if theta > 0.9 else _series_order(theta)
    for k in range(n):
        x = base + f_all[:, k, None, None] * coup
        if order == 0:  # too stiff for the plain series; full expm per step
            psi = np.matmul(_expm_batch(x), psi[:, :, None])[:, :, 0]
        else:
            psi = _apply_series(x, psi, order)
    return psi
