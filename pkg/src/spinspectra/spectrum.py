"""Detuning sweeps, spectrum analysis, and spectrum serialization.

A sweep evolves one schedule per grid point and records the final <Jz>.
Grids must be symmetric about zero (every x paired with -x, zero
included for odd lengths) because the headline analysis is the
antisymmetry residual: for exchange-symmetric sequences fed symmetric
inputs, y(x) + y(-x) vanishes and the zero crossing marks resonance
without any interaction-induced shift.

Every sweep passes an accuracy gate before returning: the grid point
with the largest |<Jz>| is recomputed with halved integrator steps (and
for the vectorized lock-in engine also re-derived point-by-point), and a
disagreement beyond one part in 1e6 of the signal fails the run loudly
rather than returning a quietly wrong spectrum.  Runs with active noise
skip the gate, since changing the step changes the noise realization.
"""

from __future__ import annotations

import dataclasses
import json
import multiprocessing
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import __version__
from .errors import AccuracyError, ValidationError
from .evolution import (
    LindbladChannel,
    Schedule,
    Segment,
    evolve_density,
    evolve_pure,
    evolve_pure_many,
    expectation,
)
from .hamiltonians import LockinParams, RamseyParams, effective_hamiltonian
from .operators import SpinSystem, collective_operators
from .sequences import lockin_schedule, ramsey_schedule, rotation_unitary
from .states import DensityMatrix, PureState

StateLike = Union[PureState, DensityMatrix]

#: Relative disagreement between full-step and half-step reference runs
#: beyond this fails the sweep.
GATE_RTOL = 1e-6

#: Agreement required between the vectorized lock-in engine and the
#: per-point integrator at the reference grid point.
LOCKSTEP_ATOL = 1e-8


@dataclass(frozen=True)
class Spectrum:
    """Sampled curve of <Jz> versus the sweep variable, plus provenance."""

    sweep_variable: str
    xs: np.ndarray
    ys: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ys = np.asarray(self.ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape:
            raise ValidationError("spectrum needs matching 1-d x and y arrays")
        if len(xs) < 3:
            raise ValidationError(f"spectrum needs at least 3 points, got {len(xs)}")
        if np.any(np.diff(xs) <= 0):
            raise ValidationError("spectrum x values must be strictly increasing")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    # -- serialization ------------------------------------------------------

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.csv_text())

    def csv_text(self) -> str:
        header = {"sweep_variable": self.sweep_variable, **self.meta}
        lines = ["# meta: " + json.dumps(header, sort_keys=True, separators=(",", ":"))]
        lines += [f"{x:.17g},{y:.17g}" for x, y in zip(self.xs, self.ys)]
        return "\n".join(lines) + "\n"

    def to_json(self, path) -> None:
        payload = {
            "meta": {"sweep_variable": self.sweep_variable, **self.meta},
            "points": [[float(x), float(y)] for x, y in zip(self.xs, self.ys)],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_csv(cls, path) -> "Spectrum":
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
        if not lines or not lines[0].startswith("# meta:"):
            raise ValidationError(f"{path}: missing '# meta:' header line")
        try:
            meta = json.loads(lines[0][len("# meta:"):])
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: malformed meta JSON: {exc}") from exc
        xs, ys = [], []
        for ln in lines[1:]:
            try:
                sx, sy = ln.split(",")
                xs.append(float(sx))
                ys.append(float(sy))
            except ValueError as exc:
                raise ValidationError(f"{path}: malformed data row {ln!r}") from exc
        variable = meta.pop("sweep_variable", "delta")
        return cls(variable, np.array(xs), np.array(ys), meta)

    @classmethod
    def from_json(cls, path) -> "Spectrum":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                payload = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}: malformed JSON: {exc}") from exc
        try:
            meta = dict(payload["meta"])
            points = payload["points"]
            xs = np.array([p[0] for p in points], dtype=float)
            ys = np.array([p[1] for p in points], dtype=float)
        except (KeyError, TypeError, IndexError) as exc:
            raise ValidationError(f"{path}: missing spectrum fields: {exc}") from exc
        variable = meta.pop("sweep_variable", "delta")
        return cls(variable, xs, ys, meta)

    @classmethod
    def load(cls, path) -> "Spectrum":
        text_start = open(path, "r", encoding="utf-8").read(1).strip()
        return cls.from_json(path) if text_start == "{" else cls.from_csv(path)


# ---------------------------------------------------------------------------
# Analysis
# ---------------------------------------------------------------------------

def require_symmetric_grid(xs: np.ndarray, tol: float = 1e-9) -> None:
    xs = np.asarray(xs, dtype=float)
    scale = max(float(np.max(np.abs(xs))), 1e-300)
    if np.max(np.abs(xs + xs[::-1])) > tol * scale:
        raise ValidationError("grid is not symmetric about zero")


def antisymmetry_residual(s: Spectrum) -> float:
    """max over mirror pairs of |y(x) + y(-x)|; the center contributes 2|y(0)|.

    Zero (to integration accuracy) certifies the antisymmetric spectrum
    that symmetric inputs guarantee; the same number computed for an
    asymmetric input quantifies how badly the resonance marker degrades.
    """
    require_symmetric_grid(s.xs)
    return float(np.max(np.abs(s.ys + s.ys[::-1])))


def locate_zero_crossing(s: Spectrum) -> float:
    """Linearly interpolated sign change nearest x = 0.

    Raises if the spectrum never changes sign; warns and keeps the
    crossing closest to zero when there are several.
    """
    xs, ys = s.xs, s.ys
    crossings = []
    for i in range(len(xs) - 1):
        y0, y1 = ys[i], ys[i + 1]
        if y0 == 0.0:
            crossings.append(float(xs[i]))
        elif y0 * y1 < 0.0:
            crossings.append(float(xs[i] - y0 * (xs[i + 1] - xs[i]) / (y1 - y0)))
    if ys[-1] == 0.0:
        crossings.append(float(xs[-1]))
    crossings = sorted(set(crossings), key=abs)
    if not crossings:
        raise ValidationError("no zero crossing in the analysis window")
    if len(crossings) > 1:
        warnings.warn(
            f"{len(crossings)} zero crossings found; returning the one nearest 0",
            stacklevel=2,
        )
    return crossings[0]


def locate_peak(s: Spectrum) -> float:
    """Parabolic interpolation of the maximum sample and its neighbors.

    A maximum on the grid boundary cannot be interpolated; it is returned
    as-is with a warning.
    """
    i = int(np.argmax(s.ys))
    if i == 0 or i == len(s.ys) - 1:
        warnings.warn("spectrum peak sits on the grid boundary", stacklevel=2)
        return float(s.xs[i])
    x0, x1, x2 = s.xs[i - 1 : i + 2]
    y0, y1, y2 = s.ys[i - 1 : i + 2]
    denom = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0)
    if denom == 0.0:
        return float(x1)
    shift = 0.5 * ((x1 - x0) ** 2 * (y1 - y2) - (x1 - x2) ** 2 * (y1 - y0)) / denom
    return float(x1 - shift)


def mirrored(s: Spectrum) -> Spectrum:
    """The spectrum with y negated (used to track minima with locate_peak)."""
    return Spectrum(s.sweep_variable, s.xs, -s.ys, dict(s.meta))


# ---------------------------------------------------------------------------
# Sweep plumbing
# ---------------------------------------------------------------------------

def _jz(system: SpinSystem):
    return collective_operators(system)[2]


def _halved(schedule: Schedule) -> Schedule:
    segs = []
    for seg in schedule.segments:
        if seg.step is not None:
            segs.append(dataclasses.replace(seg, step=seg.step / 2.0))
        else:
            segs.append(seg)
    return Schedule(schedule.system, tuple(segs))


def _evolve_point(schedule: Schedule, input_state: StateLike,
                  channels_present: bool) -> float:
    system = schedule.system
    if isinstance(input_state, DensityMatrix) or channels_present:
        rho = input_state if isinstance(input_state, DensityMatrix) else input_state.density()
        return expectation(evolve_density(rho, schedule), _jz(system))
    return expectation(evolve_pure(input_state, schedule), _jz(system))


def _accuracy_gate(build_schedule, input_state: StateLike, channels_present: bool,
                   y_full: float, j: float, noise_active: bool) -> None:
    """Re-run one point at half step and compare; loud failure on drift."""
    if noise_active:
        return  # a different step implies a different noise realization
    y_half = _evolve_point(_halved(build_schedule()), input_state, channels_present)
    disagreement = abs(y_full - y_half)
    if disagreement > GATE_RTOL * max(abs(y_half), 1e-3 * j):
        raise AccuracyError(
            f"step-halving check failed: <Jz> moved by {disagreement:.3e} "
            f"(reference value {y_half:.6e}); reduce the integrator step"
        )


# -- Ramsey -----------------------------------------------------------------

def _ramsey_point(args) -> float:
    system, params, delta, input_state, channels, ideal_pulses, step = args
    p = dataclasses.replace(params, delta=delta)
    schedule = ramsey_schedule(system, p, channels, ideal_pulses=ideal_pulses, step=step)
    return _evolve_point(schedule, input_state, bool(channels))


def sweep_ramsey(system: SpinSystem, params: RamseyParams, grid: Sequence[float],
                 input_state: StateLike, channels: Sequence[LindbladChannel] = (),
                 *, ideal_pulses: bool = False, step: Optional[float] = None,
                 threads: int = 1, check_accuracy: bool = True,
                 seed: int = 0, extra_meta: Optional[dict] = None) -> Spectrum:
    """Sweep the detuning of the Ramsey sequence; params.delta is ignored."""
    xs = np.asarray(grid, dtype=float)
    if np.any(np.diff(xs) <= 0):
        raise ValidationError("detuning grid must be strictly increasing")
    require_symmetric_grid(xs)
    channels = tuple(channels)

    jobs = [(system, params, float(d), input_state, channels, ideal_pulses, step)
            for d in xs]
    ys = np.array(_map_jobs(_ramsey_point, jobs, threads))

    if check_accuracy:
        ref = int(np.argmax(np.abs(ys)))
        p_ref = dataclasses.replace(params, delta=float(xs[ref]))
        _accuracy_gate(
            lambda: ramsey_schedule(system, p_ref, channels, ideal_pulses=ideal_pulses,
                                    step=step),
            input_state, bool(channels), float(ys[ref]), system.j, noise_active=False,
        )

    meta = {
        "experiment": "ramsey",
        "engine": "density" if (channels or isinstance(input_state, DensityMatrix)) else "pure",
        "n_particles": system.n_particles,
        "chi": params.chi,
        "omega": params.omega,
        "t_free": params.t_free,
        "t_pulse": params.t_pulse,
        "pulse_scale": params.pulse_scale,
        "ideal_pulses": ideal_pulses,
        "channels": [{"operator": ch.operator.label or "custom", "rate": ch.rate}
                     for ch in channels],
        "step": step,
        "seed": seed,
        "grid_points": len(xs),
        "version": __version__,
    }
    meta.update(extra_meta or {})
    return Spectrum("delta", xs, ys, meta)


# -- Lock-in ----------------------------------------------------------------

def _lockin_schedule_for(system, params, delta_tau, channels, ideal_pulses,
                         finite_readout, omega_readout, point_index, op_cache=None):
    p = params.with_tau_r(params.tau_s + delta_tau)
    return lockin_schedule(system, p, channels, ideal_pulses=ideal_pulses,
                           finite_readout=finite_readout, omega_readout=omega_readout,
                           noise_stream=(point_index,), op_cache=op_cache)


def _lockin_point(args) -> float:
    (system, params, delta_tau, input_state, channels, ideal_pulses,
     finite_readout, omega_readout, index) = args
    schedule = _lockin_schedule_for(system, params, delta_tau, channels,
                                    ideal_pulses, finite_readout, omega_readout, index)
    return _evolve_point(schedule, input_state, bool(channels))


def _effective_point(args) -> float:
    system, params, variant, delta_tau, input_state, channels, step = args
    h_eff = effective_hamiltonian(system, params, variant, delta_tau)
    t_total = params.pulse_count * params.tau_s
    segments = (
        Segment(t_total, hamiltonian=h_eff, channels=tuple(channels),
                step=step if step is not None else t_total / 200.0, label="effective"),
        Segment(0.0, unitary=rotation_unitary(system.n_particles, "x", np.pi / 2.0),
                start=t_total, label="readout"),
    )
    schedule = Schedule(system, segments)
    return _evolve_point(schedule, input_state, bool(channels))


def sweep_lockin(system: SpinSystem, params: LockinParams, grid: Sequence[float],
                 input_state: StateLike, channels: Sequence[LindbladChannel] = (),
                 *, engine: str = "exact", variant: Optional[str] = None,
                 ideal_pulses: bool = False, finite_readout: bool = False,
                 omega_readout: float = 4.0 * np.pi, step: Optional[float] = None,
                 threads: int = 1, check_accuracy: bool = True,
                 seed: int = 0, extra_meta: Optional[dict] = None) -> Spectrum:
    """Sweep the timing detuning delta_tau = tau_r - tau_s of the lock-in.

    ``engine='exact'`` integrates the lab-frame pulse train for each grid
    point (tau_r = tau_s + delta_tau); ``engine='effective'`` evolves
    under the requested time-averaged Hamiltonian variant instead, for
    the same total time L tau_s.  params.tau_r is ignored.
    """
    xs = np.asarray(grid, dtype=float)
    if np.any(np.diff(xs) <= 0):
        raise ValidationError("delta_tau grid must be strictly increasing")
    require_symmetric_grid(xs)
    channels = tuple(channels)

    if engine == "effective":
        if variant is None:
            raise ValidationError("effective engine requires a variant")
        jobs = [(system, params, variant, float(d), input_state, channels, step)
                for d in xs]
        ys = np.array(_map_jobs(_effective_point, jobs, threads))
    elif engine == "exact":
        if variant is not None:
            raise ValidationError("variant is only meaningful with the effective engine")
        if not ideal_pulses and np.min(params.tau_s + xs) <= params.t_pulse:
            raise ValidationError(
                "grid violates tau_r > t_pulse; shrink the window or the pulse"
            )
        pure_input = isinstance(input_state, PureState) and not channels
        if pure_input:
            ys = _lockin_lockstep(system, params, xs, input_state, ideal_pulses,
                                  finite_readout, omega_readout,
                                  check_accuracy=check_accuracy)
        else:
            jobs = [(system, params, float(d), input_state, channels, ideal_pulses,
                     finite_readout, omega_readout, i) for i, d in enumerate(xs)]
            ys = np.array(_map_jobs(_lockin_point, jobs, threads))
    else:
        raise ValidationError(f"unknown engine {engine!r}; use 'exact' or 'effective'")

    if check_accuracy and engine == "exact":
        ref = int(np.argmax(np.abs(ys)))
        _accuracy_gate(
            lambda: _lockin_schedule_for(system, params, float(xs[ref]), channels,
                                         ideal_pulses, finite_readout, omega_readout, ref),
            input_state, bool(channels), float(ys[ref]), system.j,
            noise_active=params.noise.active,
        )

    meta = {
        "experiment": "lockin",
        "engine": engine,
        "variant": variant,
        "n_particles": system.n_particles,
        "chi": params.chi,
        "gamma_g": params.gamma_g,
        "b_ac": params.b_ac,
        "omega_s": params.omega_s,
        "t_pulse": params.t_pulse,
        "pulse_count": params.pulse_count,
        "lam": params.lam,
        "axis": params.axis,
        "ideal_pulses": ideal_pulses,
        "finite_readout": finite_readout,
        "omega_readout": omega_readout if finite_readout else None,
        "noise": {"kind": params.noise.kind, "amplitude": params.noise.amplitude,
                  "seed": params.noise.seed},
        "channels": [{"operator": ch.operator.label or "custom", "rate": ch.rate}
                     for ch in channels],
        "step": step,
        "seed": seed,
        "grid_points": len(xs),
        "version": __version__,
    }
    meta.update(extra_meta or {})
    return Spectrum("delta_tau", xs, ys, meta)


def _lockin_lockstep(system, params, xs, input_state, ideal_pulses, finite_readout,
                     omega_readout, check_accuracy=True):
    """Vectorized exact lock-in sweep; semantics match per-point evolution."""
    op_cache: dict = {}
    schedules = [
        _lockin_schedule_for(system, params, float(d), (), ideal_pulses,
                             finite_readout, omega_readout, i, op_cache=op_cache)
        for i, d in enumerate(xs)
    ]
    psi0 = np.tile(input_state.amplitudes, (len(xs), 1))
    psi = evolve_pure_many(psi0, schedules)
    m = system.m_values
    ys = np.einsum("pd,d,pd->p", psi.conj(), m, psi).real

    if check_accuracy and not params.noise.active:
        ref = int(np.argmax(np.abs(ys)))
        y_pp = _evolve_point(schedules[ref], input_state, False)
        if abs(y_pp - ys[ref]) > LOCKSTEP_ATOL * max(1.0, system.j):
            raise AccuracyError(
                f"vectorized sweep disagrees with per-point evolution by "
                f"{abs(y_pp - ys[ref]):.3e} at the reference point"
            )
    return ys


def _map_jobs(fn, jobs, threads: int):
    if threads <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with multiprocessing.Pool(processes=min(threads, len(jobs))) as pool:
        return pool.map(fn, jobs)
