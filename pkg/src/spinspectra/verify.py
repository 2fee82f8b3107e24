"""Self-contained invariant suite behind the ``verify`` CLI command.

Each check re-derives a property that the library is supposed to
guarantee: operator algebra, exchange-conjugation signs, builder
symmetry residuals, end-to-end spectrum antisymmetry, Fourier/lineshape
identities, and master-equation conservation laws.  The suite is meant
to run in seconds, so dynamical checks use small ensembles and coarse
grids; the heavyweight parameter-faithful runs live in the acceptance
tests instead.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import SpinspectraError
from .evolution import (
    AffineDrive,
    LindbladChannel,
    Schedule,
    Segment,
    evolve_density,
    evolve_pure,
)
from .hamiltonians import (
    LockinParams,
    RamseyParams,
    cp_lineshape,
    effective_hamiltonian,
    fourier_coefficients,
    pdd_lineshape,
    ramsey_hamiltonian,
    sinc2_lineshape,
    symmetry_residual,
)
from .operators import (
    Operator,
    SpinSystem,
    collective_operators,
    exchange_operator,
    expm_hermitian,
)
from .spectrum import antisymmetry_residual, sweep_lockin, sweep_ramsey
from .states import dicke_state, ghz_state, is_symmetric, x_polarized


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _check(name: str, fn: Callable[[], str]) -> CheckResult:
    try:
        return CheckResult(name, True, fn())
    except AssertionError as exc:
        return CheckResult(name, False, str(exc) or "assertion failed")
    except SpinspectraError as exc:
        return CheckResult(name, False, f"{type(exc).__name__}: {exc}")


def run_verification(inject_parity_bug: bool = False) -> list[CheckResult]:
    """Run every invariant check; returns one result per check."""
    checks = [
        ("operator algebra", _operator_algebra),
        ("exchange conjugation", _exchange_conjugation),
        ("propagator group property", _expm_group),
        ("state symmetry criterion", _state_symmetry),
        ("builder symmetry residuals",
         lambda: _builder_symmetry(inject_parity_bug)),
        ("fourier coefficient identities", _fourier_identities),
        ("lineshape limits and parity", _lineshapes),
        ("ramsey spectrum antisymmetry", _ramsey_antisymmetry),
        ("effective lock-in antisymmetry", _effective_antisymmetry),
        ("dissipator exchange symmetry", _dissipator_symmetry),
        ("master equation conservation", _lindblad_conservation),
        ("integrator cross-validation", _integrator_cross_check),
    ]
    return [_check(name, fn) for name, fn in checks]


# ---------------------------------------------------------------------------

_NS = (1, 2, 5, 20)


def _operator_algebra() -> str:
    worst = 0.0
    for n in _NS:
        system = SpinSystem(n)
        jx, jy, jz = (op.matrix for op in collective_operators(system))
        j = system.j
        for a, b, c in ((jx, jy, jz), (jy, jz, jx), (jz, jx, jy)):
            worst = max(worst, float(np.max(np.abs(a @ b - b @ a - 1j * c))))
        casimir = jx @ jx + jy @ jy + jz @ jz - j * (j + 1) * np.eye(system.dim)
        worst = max(worst, float(np.max(np.abs(casimir))))
        assert worst <= 1e-10, f"algebra deviation {worst:.3e} at N={n}"
    return f"max deviation {worst:.2e} for N in {_NS}"


def _exchange_conjugation() -> str:
    worst = 0.0
    for n in _NS:
        system = SpinSystem(n)
        jx, jy, jz = (op.matrix for op in collective_operators(system))
        u = exchange_operator(system).matrix
        ud = u.conj().T
        worst = max(worst, float(np.max(np.abs(ud @ jx @ u - jx))))
        worst = max(worst, float(np.max(np.abs(ud @ jy @ u + jy))))
        worst = max(worst, float(np.max(np.abs(ud @ jz @ u + jz))))
        worst = max(worst, float(np.max(np.abs(u @ ud - np.eye(system.dim)))))
        assert worst <= 1e-10, f"conjugation deviation {worst:.3e} at N={n}"
    return f"signs (+x, -y, -z) hold to {worst:.2e}"


def _expm_group() -> str:
    rng = np.random.default_rng(7)
    system = SpinSystem(5)
    a = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    h = Operator(system, (a + a.conj().T) / 2, hermitian=True)
    u1 = expm_hermitian(h, 0.31).matrix
    u2 = expm_hermitian(h, 0.52).matrix
    u12 = expm_hermitian(h, 0.83).matrix
    dev = float(np.max(np.abs(u1 @ u2 - u12)))
    assert dev <= 1e-9, f"group-property deviation {dev:.3e}"
    return f"exp(-iH t1) exp(-iH t2) = exp(-iH (t1+t2)) to {dev:.2e}"


def _state_symmetry() -> str:
    system = SpinSystem(20)
    jy, jz = collective_operators(system)[1:]
    u = exchange_operator(system).matrix
    details = []
    for state, expect_sign in ((x_polarized(system), 1), (ghz_state(system), 1)):
        ok, sign = is_symmetric(state)
        assert ok and sign == expect_sign, "constructor state failed symmetry test"
        for op in (jy, jz):
            val = abs(complex(state.amplitudes.conj() @ (op.matrix @ state.amplitudes)))
            assert val <= 1e-12, f"<{op.label}> = {val:.3e} for symmetric state"
        overlap = abs(complex(state.amplitudes.conj() @ (u @ state.amplitudes)))
        assert abs(overlap - 1.0) <= 1e-9, "symmetric state is not an exchange eigenstate"
        details.append(f"{sign:+d}")
    ok, _ = is_symmetric(dicke_state(system, system.j))
    assert not ok, "|J,+J> misclassified as symmetric"
    return "constructors classified correctly (signs " + ", ".join(details) + ")"


def _builder_symmetry(inject_parity_bug: bool) -> str:
    worst = 0.0
    deltas = np.linspace(-0.5, 0.5, 5)
    ts = np.linspace(0.0, 2.0, 5)
    for n in _NS:
        system = SpinSystem(n)
        jx = collective_operators(system)[0]

        def ramsey_builder(d, t):
            h = ramsey_hamiltonian(
                system, RamseyParams(chi=0.02, delta=d, omega=1.0, t_free=1.0), "pulse"
            )
            if inject_parity_bug:
                h = Operator(system, h.matrix + d * jx.matrix)
            return h

        for d in deltas:
            for t in ts:
                worst = max(worst, symmetry_residual(ramsey_builder, system, d, t))
    assert worst <= 1e-10, f"ramsey builder symmetry residual {worst:.3e}"

    system = SpinSystem(6)
    p = LockinParams(chi=0.2 * np.pi, omega_s=200 * np.pi,
                     t_pulse=0.2 / 200.0, pulse_count=100, lam=0.5, axis="y")
    tau_s = p.tau_s

    def eff_y(d, t):
        return effective_hamiltonian(system, p, "cp_finite_y", d)

    def eff_x(d, t):
        return effective_hamiltonian(system, p, "cp_finite_x", d)

    worst_y = max(symmetry_residual(eff_y, system, d, 0.0)
                  for d in (1e-3 * tau_s, 0.005 * tau_s, 0.03 * tau_s))
    assert worst_y <= 1e-10, f"y-axis effective Hamiltonian residual {worst_y:.3e}"
    # sample off the sinc zeros so the symmetry-breaking term is live
    broken = symmetry_residual(eff_x, system, 0.005 * tau_s, 0.0)
    assert broken > 1e-6, "x-axis finite-pulse term failed to break the symmetry"
    return f"ramsey {worst:.2e}, effective-y {worst_y:.2e}, effective-x breaks at {broken:.2e}"


def _fourier_identities() -> str:
    p = LockinParams(omega_s=200 * np.pi, t_pulse=0.2 / 200.0, pulse_count=100, lam=0.5)
    fc = fourier_coefficients(p, k_max=200)
    k = np.arange(1, 201)
    dev_b = float(np.max(np.abs(fc.b - k * p.t_pulse * fc.a / p.tau_r)))
    assert dev_b <= 1e-12, f"b_k identity deviation {dev_b:.3e}"
    dev_even = float(np.max(np.abs(fc.a[1::2])))
    assert dev_even <= 1e-15, f"even-k coefficients not zero: {dev_even:.3e}"
    dev_a1 = abs(fc.a[0] - fc.a1)
    assert dev_a1 <= 1e-12, f"series a_1 vs closed form: {dev_a1:.3e}"
    tiny = dataclasses.replace(p, t_pulse=1e-8 * p.tau_r)
    fc0 = fourier_coefficients(tiny, k_max=1)
    assert abs(fc0.a1 - 4 / np.pi) <= 1e-6, "a_1 limit"
    assert abs(fc0.b1) <= 1e-6, "b_1 limit"
    return f"identities hold (b_k {dev_b:.1e}, a_1 {dev_a1:.1e})"


def _lineshapes() -> str:
    p = LockinParams(omega_s=200 * np.pi, t_pulse=0.2 / 200.0, pulse_count=100, lam=0.5)
    assert abs(pdd_lineshape(0.0, p) - p.pulse_count) <= 1e-12, "pdd limit"
    assert cp_lineshape(0.0, p) == 0.0, "cp limit"
    assert sinc2_lineshape(0.0, p) == 0.0, "sinc2 limit"
    xs = np.linspace(1e-6, 0.04 * p.tau_s, 13)
    odd_dev = max(abs(cp_lineshape(x, p) + cp_lineshape(-x, p)) for x in xs)
    assert odd_dev <= 1e-12, f"cp lineshape parity deviation {odd_dev:.3e}"
    even_dev = max(abs(pdd_lineshape(x, p) - pdd_lineshape(-x, p)) for x in xs)
    assert even_dev <= 1e-12, f"pdd lineshape parity deviation {even_dev:.3e}"
    return "limits and parities hold"


def _ramsey_antisymmetry() -> str:
    system = SpinSystem(20)
    params = RamseyParams(chi=0.02, omega=1.0, t_free=2 * np.pi)
    grid = np.linspace(-2.0, 2.0, 41)
    spec = sweep_ramsey(system, params, grid, x_polarized(system))
    residual = antisymmetry_residual(spec)
    s0 = abs(spec.ys[len(grid) // 2])
    assert residual <= 1e-7, f"ramsey antisymmetry residual {residual:.3e}"
    assert s0 <= 1e-10, f"ramsey S(0) = {s0:.3e}"
    return f"residual {residual:.2e}, S(0) {s0:.2e}"


def _effective_antisymmetry() -> str:
    system = SpinSystem(6)
    p = LockinParams(chi=0.2 * np.pi, omega_s=200 * np.pi,
                     t_pulse=0.2 / 200.0, pulse_count=100, lam=0.5, axis="y")
    grid = np.linspace(-0.03, 0.03, 21) * p.tau_s
    spec = sweep_lockin(system, p, grid, x_polarized(system),
                        engine="effective", variant="cp_finite_y")
    residual = antisymmetry_residual(spec)
    assert residual <= 1e-7, f"effective antisymmetry residual {residual:.3e}"
    return f"residual {residual:.2e}"


def _dissipator_symmetry() -> str:
    system = SpinSystem(6)
    jz = collective_operators(system)[2].matrix
    u = exchange_operator(system).matrix
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(4):
        a = rng.normal(size=(system.dim, system.dim)) + 1j * rng.normal(size=(system.dim, system.dim))
        rho = a @ a.conj().T
        rho /= np.trace(rho)

        def dissipator(r):
            return jz @ r @ jz - 0.5 * (jz @ jz @ r + r @ jz @ jz)

        lhs = u.conj().T @ dissipator(rho) @ u
        rhs = dissipator(u.conj().T @ rho @ u)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    assert worst <= 1e-10, f"collective dephasing does not commute with exchange: {worst:.3e}"
    return f"collective dephasing commutes with exchange to {worst:.2e}"


def _lindblad_conservation() -> str:
    system = SpinSystem(6)
    params = RamseyParams(chi=0.02, delta=0.3, omega=1.0, t_free=2 * np.pi)
    jz = collective_operators(system)[2]
    channels = (LindbladChannel(jz, 0.05),)
    from .sequences import ramsey_schedule

    rho = evolve_density(x_polarized(system).density(),
                         ramsey_schedule(system, params, channels))
    tr = abs(complex(np.trace(rho.matrix)) - 1.0)
    herm = float(np.max(np.abs(rho.matrix - rho.matrix.conj().T)))
    min_eig = float(np.linalg.eigvalsh((rho.matrix + rho.matrix.conj().T) / 2).min())
    assert tr <= 1e-8 and herm <= 1e-8 and min_eig >= -1e-7
    return f"trace drift {tr:.1e}, hermiticity {herm:.1e}, min eig {min_eig:.1e}"


def _integrator_cross_check() -> str:
    # Smooth closed-system drive: midpoint stepping vs RK4 on the projector.
    system = SpinSystem(4)
    jx, _, jz = collective_operators(system)
    drive = AffineDrive(
        Operator(system, 0.4 * jx.matrix, hermitian=True),
        Operator(system, jz.matrix, hermitian=True),
        lambda t: np.sin(3.0 * np.asarray(t)),
        label="test_drive",
    )
    seg = Segment(1.5, hamiltonian=drive, step=1.5e-4, label="drive")
    schedule = Schedule(system, (seg,))
    psi = evolve_pure(x_polarized(system), schedule)
    rho = evolve_density(x_polarized(system).density(), schedule)
    dev = float(np.max(np.abs(rho.matrix - np.outer(psi.amplitudes, psi.amplitudes.conj()))))
    assert dev <= 1e-8, f"pure/density integrators disagree by {dev:.3e}"
    return f"pure vs density evolution agree to {dev:.2e}"
