"""Command-line front end.

Four commands: ``ramsey`` and ``lockin`` run detuning sweeps and write
spectrum files (CSV with a ``# meta:`` JSON header, or JSON), ``verify``
runs the physics invariant suite, and ``analyze`` recomputes the
antisymmetry residual, zero crossing, and peak location from a spectrum
file.

Configuration can come from an INI-style file with one section per
command (``--config run.ini``); explicit command-line flags override
file values, which override built-in defaults.  Exit codes: 0 success,
2 bad configuration or input file, 3 integration accuracy failure,
4 I/O failure, 5 invariant failure.

Units: the Ramsey command reads chi, omega, gamma, and the grid in
multiples of ``omega_unit`` (and t_free in 1/omega_unit); the lock-in
command uses absolute rad/time except for the grid bounds and
``t_pulse_frac``, which are fractions of the signal half-period tau_s.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import sys
import warnings
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .errors import AccuracyError, InvariantFailure, ValidationError
from .evolution import LindbladChannel
from .hamiltonians import EFFECTIVE_VARIANTS, LockinParams, NoiseModel, RamseyParams
from .operators import SpinSystem, collective_operators
from .sequences import DEFAULT_READOUT_OMEGA, lockin_schedule, ramsey_schedule
from .spectrum import (
    Spectrum,
    antisymmetry_residual,
    locate_peak,
    locate_zero_crossing,
    mirrored,
    sweep_lockin,
    sweep_ramsey,
)
from .states import PureState, dicke_state, ghz_state, state_from_json, x_polarized
from .verify import run_verification

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ACCURACY = 3
EXIT_IO = 4
EXIT_INVARIANT = 5


# ---------------------------------------------------------------------------
# Option plumbing: defaults < config file < explicit flags
# ---------------------------------------------------------------------------

RAMSEY_DEFAULTS = {
    "n": 20,
    "chi": "0.02",
    "omega": 1.0,
    "omega_unit": 1.0,
    "t_free": None,          # defaults to 2*pi/omega
    "pulse_scale": 1.0,
    "gamma": "0",
    "input": "x-polarized",
    "grid_min": -2.0,
    "grid_max": 2.0,
    "grid_points": 201,
    "ideal_pulses": False,
    "step": None,
    "seed": 0,
    "threads": 1,
    "format": "csv",
}

LOCKIN_DEFAULTS = {
    "n": 20,
    "chi": 0.0,
    "gamma_g": 1.0,
    "b_ac": 1.0,
    "omega_s": 200.0 * np.pi,
    "t_pulse": None,
    "t_pulse_frac": None,     # defaults to 0.2 when t_pulse is not given
    "pulses": 100,
    "sequence": "cp",
    "lam": None,          # overrides sequence when given (0 = pdd, 0.5 = cp)
    "axis": "x",
    "engine": "exact",
    "variant": None,
    "gamma": 0.0,
    "input": "x-polarized",
    "grid_min": -0.04,
    "grid_max": 0.04,
    "grid_points": 201,
    "ideal_pulses": False,
    "finite_readout": False,
    "omega_readout": DEFAULT_READOUT_OMEGA,
    "noise": "none",
    "noise_amplitude": 0.0,
    "step": None,
    "seed": 0,
    "threads": 1,
    "format": "csv",
}

_BOOL_KEYS = {"ideal_pulses", "finite_readout"}
_INT_KEYS = {"n", "grid_points", "pulses", "seed", "threads"}
# ramsey chi/gamma stay strings because they may be comma-separated lists
_RAMSEY_STR_KEYS = {"chi", "gamma", "input", "format"}
_LOCKIN_STR_KEYS = {"input", "sequence", "axis", "engine", "variant", "noise", "format"}


def _coerce(key: str, raw, str_keys: set):
    if raw is None:
        return None
    if key in _BOOL_KEYS:
        if isinstance(raw, bool):
            return raw
        text = str(raw).strip().lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise ValidationError(f"cannot parse boolean config value {key}={raw!r}")
    if key in _INT_KEYS:
        return int(str(raw))
    if key in str_keys:
        return str(raw)
    return float(str(raw))


def _load_config(path: Optional[str], section: str) -> dict:
    if path is None:
        return {}
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError:
        raise
    except configparser.Error as exc:
        raise ValidationError(f"malformed config file {path}: {exc}") from exc
    if not parser.has_section(section):
        return {}
    out = {}
    for key, value in parser.items(section):
        key = key.replace("-", "_")
        if key == "lambda":  # python-keyword-safe alias
            key = "lam"
        out[key] = value
    return out


def _resolve(defaults: dict, config: dict, args: argparse.Namespace,
             str_keys: set) -> dict:
    """Three-layer option resolution with type coercion."""
    resolved = dict(defaults)
    for key, value in config.items():
        if key not in defaults:
            raise ValidationError(f"unknown config key {key!r}")
        resolved[key] = _coerce(key, value, str_keys)
    for key in defaults:
        cli_value = getattr(args, key, None)
        if cli_value is not None:
            resolved[key] = _coerce(key, cli_value, str_keys)
    return resolved


def _parse_float_list(text: str) -> list[float]:
    try:
        values = [float(tok) for tok in str(text).split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise ValidationError(f"cannot parse number list {text!r}") from exc
    if not values:
        raise ValidationError(f"empty number list {text!r}")
    return values


def _parse_input_state(system: SpinSystem, spec: str) -> tuple[PureState, str]:
    spec = spec.strip()
    if spec == "x-polarized":
        return x_polarized(system), spec
    if spec == "ghz":
        return ghz_state(system), spec
    if spec.startswith("dicke:"):
        arg = spec[len("dicke:"):].strip()
        if arg in ("+J", "J"):
            m = system.j
        elif arg == "-J":
            m = -system.j
        else:
            try:
                m = float(arg)
            except ValueError as exc:
                raise ValidationError(f"cannot parse Dicke level {arg!r}") from exc
        return dicke_state(system, m), spec
    if spec.startswith("custom:"):
        path = spec[len("custom:"):]
        text = Path(path).read_text(encoding="utf-8")
        return state_from_json(system, text), spec
    raise ValidationError(
        f"unknown input state {spec!r}; use x-polarized, ghz, dicke:<m>, or custom:<file>"
    )


def _grid(lo: float, hi: float, points: int) -> np.ndarray:
    if points < 3:
        raise ValidationError(f"grid needs at least 3 points, got {points}")
    if not lo < hi:
        raise ValidationError("grid_min must be below grid_max")
    return np.linspace(lo, hi, points)


def _write_spectrum(spec: Spectrum, out: Path, fmt: str) -> None:
    if fmt == "csv":
        spec.to_csv(out)
    elif fmt == "json":
        spec.to_json(out)
    else:
        raise ValidationError(f"unknown output format {fmt!r}")


def _suffixed(out: Path, suffix: str) -> Path:
    return out.with_name(out.stem + suffix + out.suffix)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _cmd_ramsey(args: argparse.Namespace) -> int:
    opts = _resolve(RAMSEY_DEFAULTS, _load_config(args.config, "ramsey"), args,
                    _RAMSEY_STR_KEYS)
    unit = opts["omega_unit"]
    if unit <= 0:
        raise ValidationError("omega_unit must be positive")
    omega = opts["omega"] * unit
    chis = [c * unit for c in _parse_float_list(opts["chi"])]
    gammas = [g * unit for g in _parse_float_list(opts["gamma"])]
    t_free = (2.0 * np.pi / omega) if opts["t_free"] is None else opts["t_free"] / unit
    system = SpinSystem(opts["n"])
    state, state_desc = _parse_input_state(system, opts["input"])
    grid = _grid(opts["grid_min"] * unit, opts["grid_max"] * unit, opts["grid_points"])
    jz = collective_operators(system)[2]

    runs = [(chi, gamma) for chi in chis for gamma in gammas]
    out = Path(args.out) if args.out else Path("ramsey.csv" if opts["format"] == "csv"
                                               else "ramsey.json")
    spectra = []
    for chi, gamma in runs:
        params = RamseyParams(chi=chi, omega=omega, t_free=t_free,
                              pulse_scale=opts["pulse_scale"])
        channels = (LindbladChannel(jz, gamma),) if gamma > 0 else ()
        if args.dump_schedule:
            p0 = dataclasses.replace(params, delta=float(grid[0]))
            schedule = ramsey_schedule(system, p0, channels,
                                       ideal_pulses=opts["ideal_pulses"],
                                       step=opts["step"])
            print(json.dumps(schedule.to_json_dict(), sort_keys=True))
        spec = sweep_ramsey(
            system, params, grid, state, channels,
            ideal_pulses=opts["ideal_pulses"], step=opts["step"],
            threads=opts["threads"], seed=opts["seed"],
            extra_meta={"input": state_desc, "omega_unit": unit, "gamma": gamma},
        )
        path = out if len(runs) == 1 else _suffixed(out, f"_chi{chi:g}_gamma{gamma:g}")
        _write_spectrum(spec, path, opts["format"])
        print(f"wrote {path}")
        spectra.append(spec)

    if args.svg:
        from .plotting import save_spectrum_plot
        save_spectrum_plot(spectra, args.svg, title="Ramsey spectrum")
        print(f"wrote {args.svg}")
    return EXIT_OK


def _cmd_lockin(args: argparse.Namespace) -> int:
    opts = _resolve(LOCKIN_DEFAULTS, _load_config(args.config, "lockin"), args,
                    _LOCKIN_STR_KEYS)
    omega_s = opts["omega_s"]
    tau_s = np.pi / omega_s
    if opts["t_pulse"] is not None and opts["t_pulse_frac"] is not None:
        raise ValidationError("give either t_pulse or t_pulse_frac, not both")
    if opts["t_pulse"] is not None:
        t_pulse = opts["t_pulse"]
    else:
        frac = 0.2 if opts["t_pulse_frac"] is None else opts["t_pulse_frac"]
        t_pulse = frac * tau_s
    if t_pulse <= 0:
        raise ValidationError(
            "t_pulse = 0 is not a valid drive (amplitude pi/t_pulse diverges); "
            "request ideal pulses with --ideal-pulses instead"
        )
    lam = {"pdd": 0.0, "cp": 0.5}.get(opts["sequence"])
    if lam is None:
        raise ValidationError(f"unknown sequence {opts['sequence']!r}; use pdd or cp")
    if opts["lam"] is not None:
        lam = opts["lam"]  # the raw train-offset knob wins over --sequence
    engine = opts["engine"]
    if engine not in ("exact", "effective"):
        raise ValidationError(f"unknown engine {engine!r}")
    variant = opts["variant"]
    if engine == "effective" and variant is None:
        raise ValidationError(
            f"effective engine needs --variant (one of {', '.join(EFFECTIVE_VARIANTS)})"
        )

    noise = NoiseModel(kind=opts["noise"], amplitude=opts["noise_amplitude"],
                       seed=opts["seed"])
    params = LockinParams(
        chi=opts["chi"], gamma_g=opts["gamma_g"], b_ac=opts["b_ac"], omega_s=omega_s,
        t_pulse=t_pulse, pulse_count=opts["pulses"], lam=lam, axis=opts["axis"],
        noise=noise,
    )
    system = SpinSystem(opts["n"])
    state, state_desc = _parse_input_state(system, opts["input"])
    grid = _grid(opts["grid_min"] * tau_s, opts["grid_max"] * tau_s, opts["grid_points"])
    jz = collective_operators(system)[2]
    channels = (LindbladChannel(jz, opts["gamma"]),) if opts["gamma"] > 0 else ()

    if args.dump_schedule:
        schedule = lockin_schedule(system, params.with_tau_r(tau_s + float(grid[0])),
                                   channels, ideal_pulses=opts["ideal_pulses"],
                                   finite_readout=opts["finite_readout"],
                                   omega_readout=opts["omega_readout"])
        print(json.dumps(schedule.to_json_dict(), sort_keys=True))

    spec = sweep_lockin(
        system, params, grid, state, channels,
        engine=engine, variant=variant, ideal_pulses=opts["ideal_pulses"],
        finite_readout=opts["finite_readout"], omega_readout=opts["omega_readout"],
        step=opts["step"], threads=opts["threads"], seed=opts["seed"],
        extra_meta={"input": state_desc, "gamma": opts["gamma"]},
    )
    out = Path(args.out) if args.out else Path("lockin.csv" if opts["format"] == "csv"
                                               else "lockin.json")
    _write_spectrum(spec, out, opts["format"])
    print(f"wrote {out}")

    if args.svg:
        from .plotting import save_spectrum_plot
        label = f"{opts['sequence']}-{opts['axis']}, chi={opts['chi']:g}"
        save_spectrum_plot([spec], args.svg, labels=[label], title="Lock-in spectrum")
        print(f"wrote {args.svg}")
    return EXIT_OK


def _cmd_verify(args: argparse.Namespace) -> int:
    results = run_verification(inject_parity_bug=args.inject_parity_bug)
    if args.json:
        payload = {
            "passed": all(r.passed for r in results),
            "checks": [{"name": r.name, "passed": r.passed, "detail": r.detail}
                       for r in results],
        }
        print(json.dumps(payload, sort_keys=True, indent=2))
    else:
        for r in results:
            print(f"[{'PASS' if r.passed else 'FAIL'}] {r.name}: {r.detail}")
    if not all(r.passed for r in results):
        raise InvariantFailure("one or more invariant checks failed")
    return EXIT_OK


def _cmd_analyze(args: argparse.Namespace) -> int:
    spec = Spectrum.load(args.file)
    report: dict = {"points": len(spec.xs), "sweep_variable": spec.sweep_variable}
    try:
        report["antisymmetry_residual"] = antisymmetry_residual(spec)
    except ValidationError:
        report["antisymmetry_residual"] = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            report["zero_crossing"] = locate_zero_crossing(spec)
        except ValidationError:
            report["zero_crossing"] = None
        report["peak"] = locate_peak(spec)
        report["dip"] = locate_peak(mirrored(spec))
    if args.json:
        print(json.dumps(report, sort_keys=True, indent=2))
    else:
        def fmt(v):
            return "none" if v is None else f"{v:.9g}"
        print(f"points:                {report['points']}")
        print(f"sweep variable:        {report['sweep_variable']}")
        print(f"antisymmetry residual: {fmt(report['antisymmetry_residual'])}")
        print(f"zero crossing:         {fmt(report['zero_crossing'])}")
        print(f"peak (max of y):       {fmt(report['peak'])}")
        print(f"dip (max of -y):       {fmt(report['dip'])}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="INI-style config file with per-command sections")
    sub.add_argument("--out", help="output spectrum path")
    sub.add_argument("--format", choices=("csv", "json"), help="output format")
    sub.add_argument("--svg", help="also render the spectrum to this figure file")
    sub.add_argument("--seed", type=int, help="noise seed (u64)")
    sub.add_argument("--threads", type=int, help="worker processes for sweep points")
    sub.add_argument("--step", type=float, help="override the integrator step")
    sub.add_argument("--dump-schedule", action="store_true",
                     help="print the first grid point's schedule as JSON")
    sub.add_argument("--grid-min", type=float)
    sub.add_argument("--grid-max", type=float)
    sub.add_argument("--grid-points", type=int)
    sub.add_argument("--n", type=int, help="particle number N")
    sub.add_argument("--input", "--initial-state", dest="input",
                     help="x-polarized | ghz | dicke:<m> | custom:<file>")
    sub.add_argument("--ideal-pulses", action="store_const", const=True, default=None,
                     help="replace finite pulses by instantaneous rotations")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinspectra",
        description="Collective-spin Ramsey and lock-in spectroscopy simulator",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    ramsey = subs.add_parser("ramsey", help="sweep the Ramsey detuning")
    _add_common(ramsey)
    ramsey.add_argument("--chi", help="interaction strength(s), comma separated, in omega_unit")
    ramsey.add_argument("--omega", type=float, help="Rabi frequency in omega_unit")
    ramsey.add_argument("--omega-unit", type=float, help="base frequency unit [rad/time]")
    ramsey.add_argument("--t-free", type=float, help="free evolution time in 1/omega_unit")
    ramsey.add_argument("--pulse-scale", type=float, help="pulse duration scale factor")
    ramsey.add_argument("--gamma", help="collective dephasing rate(s), comma separated")
    ramsey.set_defaults(func=_cmd_ramsey)

    lockin = subs.add_parser("lockin", help="sweep the lock-in timing detuning")
    _add_common(lockin)
    lockin.add_argument("--chi", type=float, help="interaction strength [rad/time]")
    lockin.add_argument("--gamma-g", type=float, help="gyromagnetic ratio")
    lockin.add_argument("--b-ac", type=float, help="signal amplitude")
    lockin.add_argument("--omega-s", type=float, help="signal frequency [rad/time]")
    lockin.add_argument("--t-pulse", type=float, help="pi-pulse length [time]")
    lockin.add_argument("--t-pulse-frac", type=float, help="pi-pulse length as fraction of tau_s")
    lockin.add_argument("--pulses", type=int, help="number of pi pulses L")
    lockin.add_argument("--sequence", choices=("pdd", "cp"), help="pulse train offset")
    lockin.add_argument("--lambda", dest="lam", type=float,
                        help="train offset parameter: 0 (pdd) or 0.5 (cp)")
    lockin.add_argument("--axis", choices=("x", "y"), help="pulse rotation axis")
    lockin.add_argument("--engine", choices=("exact", "effective"))
    lockin.add_argument("--variant", choices=EFFECTIVE_VARIANTS,
                        help="effective Hamiltonian variant")
    lockin.add_argument("--gamma", type=float, help="collective dephasing rate [rad/time]")
    lockin.add_argument("--noise", choices=("none", "gaussian_white"))
    lockin.add_argument("--noise-amplitude", type=float)
    lockin.add_argument("--finite-readout", action="store_const", const=True, default=None,
                        help="drive the readout pulse for pi/(2 omega_readout)")
    lockin.add_argument("--omega-readout", type=float)
    lockin.set_defaults(func=_cmd_lockin)

    verify = subs.add_parser("verify", help="run the physics invariant suite")
    verify.add_argument("--json", action="store_true", help="machine-readable report")
    verify.add_argument("--inject-parity-bug", action="store_true",
                        help=argparse.SUPPRESS)
    verify.set_defaults(func=_cmd_verify)

    analyze = subs.add_parser("analyze", help="analyze a spectrum file")
    analyze.add_argument("file", help="CSV or JSON spectrum produced by this tool")
    analyze.add_argument("--json", action="store_true", help="machine-readable report")
    analyze.set_defaults(func=_cmd_analyze)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AccuracyError as exc:
        print(f"accuracy failure: {exc}", file=sys.stderr)
        return EXIT_ACCURACY
    except InvariantFailure as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
