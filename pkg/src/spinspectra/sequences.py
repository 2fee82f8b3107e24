"""Compile interrogation parameters into executable schedules.

Two sequence families are provided: the two-pulse Ramsey interrogation
(pi/2 pulse, free evolution, pi/2 pulse, measure Jz) and the pulse-train
lock-in interrogation (equidistant pi pulses against an oscillating
signal, then a pi/2 readout rotation about x, measure Jz).

Step defaults resolve the fastest timescale of each sequence by more
than two decades: pulses step at t_pulse/200, lock-in schedules at
min(t_pulse, tau_s)/200, and dissipative free evolution at duration/200.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError
from .evolution import AffineDrive, LindbladChannel, Schedule, Segment, SegmentNoise
from .hamiltonians import LockinParams, RamseyParams, ramsey_hamiltonian
from .operators import Operator, SpinSystem, collective_operators, expm_hermitian

STEPS_PER_SEGMENT = 200

#: Ideal-pulse lock-in schedules only step the (diagonal, cheap) signal
#: phase, so they afford a finer grid; tau_s/200 leaves midpoint-rule
#: phase errors just above the sweep accuracy gate.
IDEAL_STEPS_PER_PERIOD = 2000

#: Default Rabi frequency of the optional finite-duration readout pulse.
DEFAULT_READOUT_OMEGA = 4.0 * np.pi


@lru_cache(maxsize=None)
def _cached_system_ops(n_particles: int):
    system = SpinSystem(n_particles)
    return collective_operators(system)


@lru_cache(maxsize=None)
def rotation_unitary(n_particles: int, axis: str, angle: float) -> Operator:
    """exp(-i angle J_axis); cached so sweeps share one instance."""
    jx, jy, jz = _cached_system_ops(n_particles)
    j = {"x": jx, "y": jy, "z": jz}[axis]
    u = expm_hermitian(j, angle)
    return Operator(j.system, u.matrix, hermitian=False, label=f"rot_{axis}({angle:g})")


# ---------------------------------------------------------------------------
# Ramsey
# ---------------------------------------------------------------------------

def ramsey_schedule(system: SpinSystem, p: RamseyParams,
                    channels: Sequence[LindbladChannel] = (),
                    ideal_pulses: bool = False,
                    step: Optional[float] = None) -> Schedule:
    """Pulse - free - pulse schedule with channels attached to every segment.

    Pulse segments last ``pulse_scale * t_pulse``; with ``ideal_pulses``
    they collapse to instantaneous rotations by pulse_scale * pi/2 and the
    free evolution is the only timed segment.
    """
    channels = tuple(channels)
    t_pulse = p.pulse_scale * p.t_pulse
    pulse_step = step if step is not None else p.t_pulse / STEPS_PER_SEGMENT
    free_step = step if step is not None else (p.t_free / STEPS_PER_SEGMENT
                                               if p.t_free > 0 else None)

    segments: list[Segment] = []
    cursor = 0.0

    def add_pulse():
        nonlocal cursor
        if ideal_pulses:
            pulse = rotation_unitary(system.n_particles, "x", p.pulse_scale * np.pi / 2.0)
            segments.append(Segment(0.0, unitary=pulse, start=cursor, label="pulse"))
        else:
            segments.append(Segment(t_pulse, hamiltonian=ramsey_hamiltonian(system, p, "pulse"),
                                    channels=channels, step=pulse_step if channels else None,
                                    start=cursor, label="pulse"))
            cursor += t_pulse

    add_pulse()
    if p.t_free > 0:
        segments.append(Segment(p.t_free, hamiltonian=ramsey_hamiltonian(system, p, "free"),
                                channels=channels, step=free_step if channels else None,
                                start=cursor, label="free"))
        cursor += p.t_free
    add_pulse()
    return Schedule(system, tuple(segments))


# ---------------------------------------------------------------------------
# Lock-in pulse trains
# ---------------------------------------------------------------------------

def _lockin_ops(system: SpinSystem, p: LockinParams, op_cache: Optional[dict]):
    """Shared base/coupling operators; cached so lockstep sweeps can
    recognize identical structure across grid points."""
    cache = op_cache if op_cache is not None else {}
    key = (system.n_particles, p.chi, p.axis, p.t_pulse)
    if key not in cache:
        jx, jy, jz = _cached_system_ops(system.n_particles)
        j_drive = jx if p.axis == "x" else jy
        chi_term = p.chi * (jz.matrix @ jz.matrix)
        cache[key] = {
            "jz": jz,
            "free_base": Operator(system, chi_term, hermitian=True, label="chi_jz2"),
            "pulse_base": Operator(system, chi_term + (np.pi / p.t_pulse) * j_drive.matrix,
                                   hermitian=True, label=f"chi_jz2+pi_pulse_{p.axis}"),
        }
    return cache[key]


def lockin_schedule(system: SpinSystem, p: LockinParams,
                    channels: Sequence[LindbladChannel] = (),
                    ideal_pulses: bool = False,
                    finite_readout: bool = False,
                    omega_readout: float = DEFAULT_READOUT_OMEGA,
                    noise_stream: tuple[int, ...] = (),
                    op_cache: Optional[dict] = None) -> Schedule:
    """Alternating free/pulse segments on [0, L tau_r] plus the readout.

    Pulse windows are centred at (l - lam) tau_r with width t_pulse and
    drive amplitude pi/t_pulse on the configured axis; the signal times
    chi Jz^2 acts everywhere.  Windows are clipped to the interrogation
    interval, so the lam = 0 train ends on a half pulse at the readout
    boundary.  With ``ideal_pulses`` every pulse becomes an instantaneous
    pi rotation at its centre.  The readout is an instantaneous pi/2
    rotation about x unless ``finite_readout`` asks for a driven segment
    of duration pi/(2 omega_readout).
    """
    channels = tuple(channels)
    total = p.total_time
    step = min(p.t_pulse, p.tau_s) / STEPS_PER_SEGMENT if not ideal_pulses \
        else p.tau_s / IDEAL_STEPS_PER_PERIOD
    ops = _lockin_ops(system, p, op_cache)
    jz = ops["jz"]

    centers = (np.arange(1, p.pulse_count + 1) - p.lam) * p.tau_r
    segments: list[Segment] = []
    tiny = 1e-12 * total

    def noise_for(index: int) -> Optional[SegmentNoise]:
        if p.noise.active:
            return SegmentNoise(p.noise, (*noise_stream, index))
        return None

    def add_free(t0: float, t1: float):
        if t1 - t0 <= tiny:
            return
        segments.append(Segment(
            t1 - t0, hamiltonian=AffineDrive(ops["free_base"], jz, p.signal, label="signal"),
            channels=channels, step=step, start=t0, label="free",
            noise=noise_for(len(segments)),
        ))

    t = 0.0
    if ideal_pulses:
        pulse = rotation_unitary(system.n_particles, p.axis, np.pi)
        for c in centers:
            add_free(t, min(c, total))
            segments.append(Segment(0.0, unitary=pulse, start=min(c, total), label="pulse"))
            t = min(c, total)
    else:
        for c in centers:
            a, b = c - p.t_pulse / 2.0, min(c + p.t_pulse / 2.0, total)
            if a < 0:
                raise ValidationError("first pulse window extends below t = 0")
            if a < t - tiny:
                raise ValidationError("pulse windows overlap; reduce t_pulse or lam offset")
            add_free(t, a)
            segments.append(Segment(
                b - a, hamiltonian=AffineDrive(ops["pulse_base"], jz, p.signal, label="signal"),
                channels=channels, step=step, start=a, label="pulse",
                noise=noise_for(len(segments)),
            ))
            t = b
    add_free(t, total)

    if finite_readout:
        if omega_readout <= 0:
            raise ValidationError("readout Rabi frequency must be positive")
        jx, _, _ = _cached_system_ops(system.n_particles)
        base = Operator(system, p.chi * (jz.matrix @ jz.matrix) + omega_readout * jx.matrix,
                        hermitian=True, label="readout_drive")
        dur = np.pi / (2.0 * omega_readout)
        segments.append(Segment(
            dur, hamiltonian=AffineDrive(base, jz, p.signal, label="signal"),
            channels=channels, step=min(step, dur / STEPS_PER_SEGMENT), start=total,
            label="readout", noise=noise_for(len(segments)),
        ))
    else:
        segments.append(Segment(0.0, unitary=rotation_unitary(system.n_particles, "x", np.pi / 2.0),
                                start=total, label="readout"))
    return Schedule(system, tuple(segments))


def alpha_profile(p: LockinParams, t) -> np.ndarray:
    """Accumulated pulse rotation angle, the integral of the drive envelope.

    Piecewise linear: each window contributes pi, ramped linearly across
    its width.  For the Carr-Purcell offset the train finishes inside the
    interrogation window and alpha(L tau_r) = L pi; the lam = 0 train has
    its last window centred on the boundary, so only half of it (pi/2)
    has accumulated by the readout.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < -1e-12) or np.any(t > p.total_time * (1 + 1e-12)):
        raise ValidationError("alpha_profile evaluated outside [0, L tau_r]")
    starts = (np.arange(1, p.pulse_count + 1) - p.lam) * p.tau_r - p.t_pulse / 2.0
    frac = np.clip((t[..., None] - starts) / p.t_pulse, 0.0, 1.0)
    return np.pi * np.sum(frac, axis=-1)
