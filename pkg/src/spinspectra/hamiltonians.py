"""Hamiltonian builders, pulse-train Fourier coefficients, and lineshapes.

Everything here is expressed in units of hbar = 1; frequencies are in
radians per unit time.  All builders share the ascending-m basis from
:mod:`spinspectra.operators`.

The central structural property is exchange symmetry: conjugating a
builder's output by exp(-i pi Jx) and flipping the sign of the detuning
must reproduce the same matrix.  ``symmetry_residual`` measures exactly
that, and the spectrum module turns it into an antisymmetry statement
about measured spectra.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Literal, Optional, Sequence

import numpy as np

from .errors import ValidationError
from .operators import (
    Operator,
    SpinSystem,
    collective_operators,
    exchange_operator,
    hermiticity_deviation,
)

Parity = Literal["even", "odd", "none"]

#: Below this |omega_s * delta_tau| the lineshapes switch to Taylor
#: expansions; avoids cancellation exactly where spectra are read out.
LINESHAPE_GUARD = 1e-8


# ---------------------------------------------------------------------------
# General interaction-picture Hamiltonian with tagged coefficient parities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Coefficient:
    """Scalar coefficient c(delta, t) with a declared parity in delta."""

    fn: Callable[[float, float], float]
    parity: Parity = "none"

    def __call__(self, delta: float, t: float) -> float:
        return self.fn(delta, t)

    def check_parity(self, deltas: Sequence[float], ts: Sequence[float],
                     tol: float = 1e-12) -> None:
        if self.parity == "none":
            return
        sign = 1.0 if self.parity == "even" else -1.0
        for d in deltas:
            for t in ts:
                dev = abs(self(d, t) - sign * self(-d, t))
                if dev > tol:
                    raise ValidationError(
                        f"coefficient declared {self.parity} violates parity by {dev:.3e}"
                    )


def constant(value: float, parity: Parity = "even") -> Coefficient:
    return Coefficient(lambda delta, t, v=value: v, parity)


ZERO = constant(0.0, "even")


@dataclass(frozen=True)
class GeneralCoefficients:
    """The nine scalar functions multiplying the linear, cross, and
    quadratic collective-spin terms.

    The exchange-compatible parity assignment is f1, e1, g1, g2, g3 even
    and f2, f3, e2, e3 odd; ``check_parities`` spot-checks the declared
    tags on a sample grid.
    """

    f1: Coefficient = ZERO
    f2: Coefficient = ZERO
    f3: Coefficient = ZERO
    e1: Coefficient = ZERO
    e2: Coefficient = ZERO
    e3: Coefficient = ZERO
    g1: Coefficient = ZERO
    g2: Coefficient = ZERO
    g3: Coefficient = ZERO

    def check_parities(self, deltas: Sequence[float], ts: Sequence[float],
                       tol: float = 1e-12) -> None:
        for name in ("f1", "f2", "f3", "e1", "e2", "e3", "g1", "g2", "g3"):
            getattr(self, name).check_parity(deltas, ts, tol)


def general_hamiltonian(system: SpinSystem, coeffs: GeneralCoefficients,
                        delta: float, t: float) -> Operator:
    """Assemble the general collective-spin Hamiltonian at one (delta, t).

    Cross terms use the symmetrized product (AB + BA)/2 so real
    coefficients always produce a Hermitian matrix; the exchange-parity
    argument is untouched because conjugation acts factor by factor.
    """
    jx, jy, jz = collective_operators(system)
    x, y, z = jx.matrix, jy.matrix, jz.matrix

    def sym(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return (a @ b + b @ a) / 2.0

    h = (
        coeffs.f1(delta, t) * x
        + coeffs.f2(delta, t) * y
        + coeffs.f3(delta, t) * z
        + coeffs.e1(delta, t) * sym(y, z)
        + coeffs.e2(delta, t) * sym(z, x)
        + coeffs.e3(delta, t) * sym(x, y)
        + coeffs.g1(delta, t) * (x @ x)
        + coeffs.g2(delta, t) * (y @ y)
        + coeffs.g3(delta, t) * (z @ z)
    )
    return Operator(system, h, hermitian=hermiticity_deviation(h) <= 1e-10)


def symmetry_residual(builder: Callable[[float, float], Operator],
                      system: SpinSystem, delta: float, t: float) -> float:
    """Max-entry deviation of U_ex^dag H(delta,t) U_ex from H(-delta,t).

    A residual at round-off level certifies that spectra produced from
    symmetric inputs under this builder are antisymmetric in delta.
    """
    u = exchange_operator(system).matrix
    h_plus = builder(delta, t).matrix
    h_minus = builder(-delta, t).matrix
    return float(np.max(np.abs(u.conj().T @ h_plus @ u - h_minus)))


# ---------------------------------------------------------------------------
# Ramsey interrogation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RamseyParams:
    """Parameters of the pulse - free evolution - pulse sequence.

    ``t_pulse`` defaults to the pi/2 duration pi/(2 omega); the actual
    segment length is ``pulse_scale * t_pulse``, the knob for modelling
    timing inaccuracy.
    """

    chi: float = 0.0
    delta: float = 0.0
    omega: float = 1.0
    t_free: float = 0.0
    t_pulse: Optional[float] = None
    pulse_scale: float = 1.0

    def __post_init__(self):
        if self.omega <= 0:
            raise ValidationError("Rabi frequency omega must be positive")
        if self.t_free < 0:
            raise ValidationError("free evolution time must be non-negative")
        if self.t_pulse is None:
            object.__setattr__(self, "t_pulse", np.pi / (2.0 * self.omega))
        if self.t_pulse <= 0:
            raise ValidationError("pulse duration must be positive")
        if self.pulse_scale <= 0:
            raise ValidationError("pulse_scale must be positive")

    @property
    def t_rabi(self) -> float:
        """Combined duration of both pi/2 pulses, T_R = 2 T_Omega."""
        return 2.0 * self.t_pulse


def ramsey_hamiltonian(system: SpinSystem, p: RamseyParams,
                       segment: Literal["pulse", "free"]) -> Operator:
    """chi Jz^2 + delta Jz, plus omega Jx while the drive is on."""
    jx, _, jz = collective_operators(system)
    h = p.chi * (jz.matrix @ jz.matrix) + p.delta * jz.matrix
    if segment == "pulse":
        h = h + p.omega * jx.matrix
    elif segment != "free":
        raise ValidationError(f"unknown Ramsey segment {segment!r}")
    return Operator(system, h, hermitian=True, label=f"ramsey_{segment}")


# ---------------------------------------------------------------------------
# Lock-in interrogation: pi-pulse trains against an oscillating signal
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseModel:
    """Additive noise on the signal M(t).

    ``gaussian_white`` draws one normal deviate per integrator step,
    scaled by amplitude/sqrt(dt); the stream is derived deterministically
    from the seed and the segment position, so runs are reproducible.
    ``none`` leaves M(t) purely sinusoidal regardless of seed.
    """

    kind: Literal["none", "gaussian_white"] = "none"
    amplitude: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("none", "gaussian_white"):
            raise ValidationError(f"unknown noise kind {self.kind!r}")
        if self.amplitude < 0:
            raise ValidationError("noise amplitude must be non-negative")

    @property
    def active(self) -> bool:
        return self.kind != "none" and self.amplitude > 0


@dataclass(frozen=True)
class LockinParams:
    """Pulse-train lock-in parameters.

    The signal is gamma_g * b_ac * sin(omega_s t).  Pi pulses of length
    ``t_pulse`` and amplitude pi/t_pulse are centred at (l - lam) tau_r
    for l = 1..pulse_count; lam = 0 is the periodic train (first pulse a
    full spacing in), lam = 1/2 the Carr-Purcell train (first pulse half
    a spacing in).  ``tau_r`` defaults to the resonant spacing
    tau_s = pi/omega_s; sweeps override it point by point.
    """

    chi: float = 0.0
    gamma_g: float = 1.0
    b_ac: float = 1.0
    omega_s: float = 2.0 * np.pi
    t_pulse: float = 0.1
    pulse_count: int = 10
    lam: float = 0.5
    axis: Literal["x", "y"] = "x"
    tau_r: Optional[float] = None
    noise: NoiseModel = field(default_factory=NoiseModel)

    def __post_init__(self):
        if self.omega_s <= 0:
            raise ValidationError("signal frequency omega_s must be positive")
        if self.t_pulse <= 0:
            raise ValidationError(
                "pulse length must be positive (ideal pulses are a schedule "
                "option, not t_pulse = 0)"
            )
        if self.pulse_count < 1:
            raise ValidationError("need at least one pulse")
        if self.lam not in (0.0, 0.5):
            raise ValidationError("lam must be 0 (periodic) or 0.5 (Carr-Purcell)")
        if self.axis not in ("x", "y"):
            raise ValidationError("pulse axis must be 'x' or 'y'")
        if self.tau_r is None:
            object.__setattr__(self, "tau_r", self.tau_s)
        if self.t_pulse >= self.tau_r:
            raise ValidationError(
                f"pulse length {self.t_pulse} must be shorter than spacing {self.tau_r}"
            )

    @property
    def tau_s(self) -> float:
        """Half period of the target signal, pi/omega_s."""
        return np.pi / self.omega_s

    @property
    def omega_r(self) -> float:
        return np.pi / self.tau_r

    @property
    def delta_tau(self) -> float:
        return self.tau_r - self.tau_s

    @property
    def total_time(self) -> float:
        return self.pulse_count * self.tau_r

    def with_tau_r(self, tau_r: float) -> "LockinParams":
        return dataclasses.replace(self, tau_r=tau_r)

    def signal(self, t):
        """Deterministic part of M(t); broadcasts over array t."""
        return self.gamma_g * self.b_ac * np.sin(self.omega_s * np.asarray(t))

    def drive_envelope(self, t):
        """Pi-pulse Rabi frequency profile; broadcasts over array t."""
        t = np.asarray(t, dtype=float)
        nearest = np.clip(np.round(t / self.tau_r + self.lam), 1, self.pulse_count)
        centers = (nearest - self.lam) * self.tau_r
        inside = np.abs(t - centers) <= self.t_pulse / 2.0
        return np.where(inside, np.pi / self.t_pulse, 0.0)


def lockin_lab_hamiltonian(system: SpinSystem, p: LockinParams, t: float) -> Operator:
    """Lab-frame lock-in Hamiltonian chi Jz^2 + M(t) Jz + Omega_pi(t) J_axis.

    Only the deterministic signal enters here; white noise is not a
    pointwise-defined function of t and is injected per integrator step
    by the evolution engine.
    """
    if not 0.0 <= t <= p.total_time + 1e-12 * p.total_time:
        raise ValidationError(f"t={t} outside the schedule [0, {p.total_time}]")
    jx, jy, jz = collective_operators(system)
    j_drive = jx if p.axis == "x" else jy
    h = (
        p.chi * (jz.matrix @ jz.matrix)
        + float(p.signal(t)) * jz.matrix
        + float(p.drive_envelope(t)) * j_drive.matrix
    )
    return Operator(system, h, hermitian=True, label="lockin_lab")


# ---------------------------------------------------------------------------
# Fourier content of the finite-length pulse train
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FourierCoefficients:
    """Harmonics of cos/sin of the accumulated pulse rotation angle.

    ``a[k-1]``/``b[k-1]`` hold the k-th cosine/sine coefficients, a_s and
    b_s their truncated sums of squares, and a1/b1 the closed forms for
    the fundamental.
    """

    a: np.ndarray
    b: np.ndarray
    a_s: float
    b_s: float
    a1: float
    b1: float


def _ratio_term(k: np.ndarray, u: np.ndarray) -> np.ndarray:
    """cos((k+1)pi/2 + u) / (1 - (pi/(2u))^2) for odd k, rearranged exactly.

    With h = u - pi/2 the numerator is -sigma sin(h) and the denominator
    factors as (4h/pi)(1 + h/pi)/(1 + 2h/pi)^2, so the removable
    singularity at u = pi/2 (k t_pulse = tau_r) cancels analytically and
    the expression stays accurate arbitrarily close to resonance.
    """
    sigma = np.where((k + 2) % 4 == 1, 1.0, -1.0)
    h = u - np.pi / 2.0
    sinc_h = np.where(np.abs(h) < 1e-9, 1.0 - h * h / 6.0, np.sin(h) / np.where(h == 0, 1.0, h))
    return -sigma * sinc_h * (np.pi / 4.0) * (1.0 + 2.0 * h / np.pi) ** 2 / (1.0 + h / np.pi)


def fourier_coefficients(p: LockinParams, k_max: int = 200) -> FourierCoefficients:
    """Harmonics a_k, b_k of the finite-pulse train up to k_max.

    a_k vanishes for even k; odd coefficients follow
    a_k = (4/(k pi)) [sin(k pi/2 - u) + cos((k+1) pi/2 + u)/(1 - (tau_r/(k T))^2)]
    with u = k pi T/(2 tau_r), and b_k = k T a_k / tau_r.  The second
    bracket term is evaluated through an exact rearrangement so the
    k T = tau_r resonance is handled without any special-casing.
    """
    if k_max < 1:
        raise ValidationError("k_max must be at least 1")
    t_pulse, tau_r = p.t_pulse, p.tau_r
    k = np.arange(1, k_max + 1, dtype=float)
    u = k * np.pi * t_pulse / (2.0 * tau_r)

    odd = k.astype(int) % 2 == 1
    a = np.zeros(k_max)
    k_odd = k[odd]
    u_odd = u[odd]
    # sin(k pi/2 - u) = sin(k pi/2) cos(u) for odd k, with sign from k mod 4
    lead = np.where(k_odd.astype(int) % 4 == 1, 1.0, -1.0) * np.cos(u_odd)
    a[odd] = (4.0 / (k_odd * np.pi)) * (lead + _ratio_term(k_odd, u_odd))
    b = k * t_pulse * a / tau_r

    r = tau_r / t_pulse
    a1 = 4.0 * r**2 * np.cos(np.pi * t_pulse / (2.0 * tau_r)) / (np.pi * (r**2 - 1.0))
    b1 = 4.0 * r * np.cos(np.pi * t_pulse / (2.0 * tau_r)) / (np.pi * (r**2 - 1.0))
    return FourierCoefficients(
        a=a, b=b, a_s=float(np.sum(a**2)), b_s=float(np.sum(b**2)), a1=a1, b1=b1
    )


# ---------------------------------------------------------------------------
# Lineshapes (scalar prefactors of the effective detuning coupling)
# ---------------------------------------------------------------------------

def cp_lineshape(delta_tau: float, p: LockinParams) -> float:
    """sin^2(L w_s dt/2) / sin(w_s dt/2); odd in delta_tau, 0 at resonance."""
    x = p.omega_s * delta_tau / 2.0
    big_l = p.pulse_count
    if abs(p.omega_s * delta_tau) < LINESHAPE_GUARD:
        c2 = 1.0 / 6.0 - big_l**2 / 3.0
        c4 = 2.0 * big_l**4 / 45.0 - big_l**2 / 18.0 + 7.0 / 360.0
        return big_l**2 * x * (1.0 + c2 * x * x + c4 * x**4)
    return float(np.sin(big_l * x) ** 2 / np.sin(x))


def pdd_lineshape(delta_tau: float, p: LockinParams) -> float:
    """sin(L w_s dt) / (w_s dt); even in delta_tau, equals L at resonance."""
    y = p.omega_s * delta_tau
    big_l = p.pulse_count
    if abs(y) < LINESHAPE_GUARD:
        ly = big_l * y
        return big_l * (1.0 - ly * ly / 6.0 + ly**4 / 120.0)
    return float(np.sin(big_l * y) / y)


def sinc2_lineshape(delta_tau: float, p: LockinParams) -> float:
    """sin^2(L w_s dt/2) / (L w_s dt/2); odd in delta_tau, 0 at resonance."""
    z = p.pulse_count * p.omega_s * delta_tau / 2.0
    if abs(p.omega_s * delta_tau) < LINESHAPE_GUARD:
        return z * (1.0 - z * z / 3.0 + 2.0 * z**4 / 45.0)
    return float(np.sin(z) ** 2 / z)


def _sinc(w: float) -> float:
    if abs(w) < LINESHAPE_GUARD:
        return 1.0 - w * w / 6.0 + w**4 / 120.0
    return float(np.sin(w) / w)


# ---------------------------------------------------------------------------
# Effective (time-averaged) lock-in Hamiltonians
# ---------------------------------------------------------------------------

EFFECTIVE_VARIANTS = ("cp_ideal", "pdd_ideal", "cp_finite_x", "cp_finite_y")


def effective_hamiltonian(system: SpinSystem, p: LockinParams, variant: str,
                          delta_tau: float, k_max: int = 200) -> Operator:
    """Time-averaged lock-in Hamiltonian for the given train variant.

    The finite-pulse variants evaluate the train harmonics at the nominal
    spacing ``p.tau_r`` (the resonant spacing by default); delta_tau
    enters only through the lineshapes, whose parity carries the
    symmetry or its breaking:

    - ``cp_ideal`` / ``pdd_ideal``: chi Jz^2 plus the ideal-train
      lineshape coupling on Jz.
    - ``cp_finite_x``: x-axis pulses; the even-in-delta_tau Jy term
      breaks exchange symmetry.
    - ``cp_finite_y``: y-axis pulses; the residual drive appears on Jx
      instead and the symmetry survives.
    """
    jx, jy, jz = collective_operators(system)
    jz2 = jz.matrix @ jz.matrix
    amp = p.gamma_g * p.b_ac
    big_l = p.pulse_count

    if variant == "cp_ideal":
        h = p.chi * jz2 + (2.0 * amp / (big_l * np.pi)) * cp_lineshape(delta_tau, p) * jz.matrix
    elif variant == "pdd_ideal":
        h = p.chi * jz2 + (2.0 * amp / (big_l * np.pi)) * pdd_lineshape(delta_tau, p) * jz.matrix
    elif variant in ("cp_finite_x", "cp_finite_y"):
        fc = fourier_coefficients(p, k_max=k_max)
        sinc_term = _sinc(big_l * p.omega_s * delta_tau)
        j_sq = jy.matrix @ jy.matrix if variant == "cp_finite_x" else jx.matrix @ jx.matrix
        h = (
            p.chi / 2.0 * (fc.a_s * jz2 + fc.b_s * j_sq)
            + (fc.a1 * amp / 2.0) * sinc2_lineshape(delta_tau, p) * jz.matrix
        )
        if variant == "cp_finite_x":
            h = h + (fc.b1 * amp / 2.0) * sinc_term * jy.matrix
        else:
            h = h - (fc.b1 * amp / 2.0) * sinc_term * jx.matrix
    else:
        raise ValidationError(
            f"unknown effective variant {variant!r}; choose from {EFFECTIVE_VARIANTS}"
        )
    return Operator(system, h, hermitian=True, label=f"effective_{variant}")
