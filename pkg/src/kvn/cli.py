"""Command-line front end.

Every subcommand reads its parameters from flags, then from an optional
config file (``[section]`` headers, ``key = value`` lines; section names are
``common`` and the subcommand name), then from built-in defaults.  Output
goes to ``--out`` or standard output; a one-line summary goes to standard
error.  Exit codes: 0 success, 2 configuration error, 3 tolerance failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from typing import Callable

import numpy as np

EXIT_OK, EXIT_CONFIG, EXIT_TOLERANCE = 0, 2, 3


class ConfigError(ValueError):
    pass


def int_range(text: str) -> list:
    """``"a..b"`` (inclusive), ``"a,b,c"`` or a single integer."""
    text = str(text).strip()
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ConfigError(f"empty range {text!r}")
            return list(range(lo, hi + 1))
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"not an integer range: {text!r}") from None


def float_list(text: str) -> list:
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"not a list of numbers: {text!r}") from None


def positive(conv):
    def f(text):
        v = conv(text)
        if not v > 0:
            raise ConfigError(f"expected a positive value, got {text!r}")
        return v
    return f


def boolean(text):
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def choice(*options):
    def f(text):
        if text not in options:
            raise ConfigError(f"expected one of {options}, got {text!r}")
        return text
    return f


@dataclass
class Param:
    conv: Callable
    default: object
    help: str


PF = positive(float)
PI = positive(int)

COMMON = {
    "format": Param(choice("csv", "json"), "csv", "output format"),
    "out": Param(str, None, "output file (default: standard output)"),
}

SUBCOMMANDS = {
    "oscillator": {
        "N": Param(int_range, "-3..3", "winding numbers, e.g. -2..3"),
        "n": Param(int, -1, "lower Hermite index (default: smallest admissible)"),
        "delta": Param(PF, 1.0, "action scale of the mixed representation"),
        "m": Param(PF, 1.0, "mass"),
        "omega": Param(PF, 1.0, "angular frequency"),
        "grid": Param(PI, 256, "points per axis"),
        "tol": Param(PF, 1e-6, "largest acceptable eigen-residual"),
    },
    "landau": {
        "n_max": Param(int, 10, "highest quantum level"),
        "N": Param(int_range, "-3..3", "KvN winding numbers"),
        "B": Param(PF, 1.0, "field strength"),
        "e": Param(PF, 1.0, "charge"),
        "m": Param(PF, 1.0, "mass"),
        "c": Param(PF, 1.0, "speed of light"),
        "hbar": Param(PF, 1.0, "reduced Planck constant"),
        "delta": Param(PF, 1.0, "action scale of the mixed representation"),
        "p_z0": Param(float, 0.0, "momentum along the field"),
        "lambda_z0": Param(float, 0.0, "conjugate label along the field"),
        "grid": Param(PI, 128, "points per axis of the reduced eigen-residual grid"),
        "tol": Param(PF, 1e-6, "largest acceptable eigen-residual"),
    },
    "ab": {
        "flux_alpha": Param(float_list, "0.1", "flux in units of the flux quantum (list)"),
        "m": Param(int_range, "1", "angular quantum numbers"),
        "k": Param(int_range, "2", "zero labels (k=1 is the origin for positive order)"),
        "hbar": Param(PF, 1.0, "reduced Planck constant"),
        "mu": Param(PF, 1.0, "mass"),
        "b": Param(PF, 1.0, "outer radius"),
        "e": Param(PF, 1.0, "charge"),
        "c": Param(PF, 1.0, "speed of light"),
        "p_z0": Param(float, 0.0, "momentum along the solenoid"),
        "samples": Param(PI, 50, "random test functions for the classical check"),
        "tol": Param(PF, 1e-10, "largest acceptable operator residual"),
    },
    "gauge-check": {
        "scenario": Param(str, None, "gauge scenario file"),
        "samples": Param(PI, 20, "random states"),
        "seed": Param(int, 0, "random seed"),
        "tol": Param(PF, 1e-8, "largest acceptable residual"),
    },
    "evolve": {
        "system": Param(choice("free", "oscillator", "landau"), "oscillator", "Hamiltonian"),
        "method": Param(choice("spectral", "characteristics"), "spectral", "evolution scheme"),
        "t": Param(float, 1.0, "final time"),
        "dt": Param(PF, 1e-3, "time step for spectral evolution"),
        "grid": Param(PI, 128, "points per axis"),
        "half_width": Param(PF, 8.0, "half width of each axis"),
        "center": Param(float_list, "1.0,0.0", "initial centre q,p"),
        "width": Param(PF, 0.5, "initial density width"),
        "m": Param(PF, 1.0, "mass"),
        "omega": Param(PF, 1.0, "oscillator frequency"),
        "B": Param(PF, 1.0, "field strength (landau: reduced x-p_x sector)"),
        "p_y0": Param(float, 0.0, "conserved p_y (landau)"),
        "snapshot": Param(str, None, "also write a binary wavefunction snapshot here"),
    },
    "bessel-zeros": {
        "nu": Param(float_list, "0,0.9,1", "orders (list)"),
        "k": Param(int_range, "1..3", "zero labels"),
        "positive_only": Param(boolean, False, "count positive zeros only"),
    },
}


def _flag(name):
    return "--" + name.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kvn", description="KvN mechanics experiments")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for cmd, params in SUBCOMMANDS.items():
        sp = sub.add_parser(cmd)
        sp.add_argument("--config", default=None, help="config file")
        for name, prm in {**COMMON, **params}.items():
            if name == "N":
                # allow negative ranges such as "-2..3" as the flag value
                sp.add_argument("--N", dest="N", default=argparse.SUPPRESS, help=prm.help, type=str)
            else:
                sp.add_argument(_flag(name), dest=name, default=argparse.SUPPRESS, help=prm.help)
    return p


def _normalise_argv(argv):
    # "--N -2..3" would be taken for an option; join it as "--N=-2..3"
    out = []
    i = 0
    while i < len(argv):
        a = argv[i]
        if a in ("--N", "--center", "--flux-alpha", "--nu", "--m", "--k") and i + 1 < len(argv) \
                and argv[i + 1].startswith("-") and argv[i + 1][1:2].isdigit():
            out.append(f"{a}={argv[i + 1]}")
            i += 2
            continue
        out.append(a)
        i += 1
    return out


def resolve(cmd: str, flags: dict, config_path: str | None) -> dict:
    params = {**COMMON, **SUBCOMMANDS[cmd]}
    raw = {}
    if config_path:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        try:
            with open(config_path) as fh:
                cp.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
        except configparser.Error as exc:
            raise ConfigError(f"malformed config file: {exc}") from None
        for sec in cp.sections():
            if sec not in ("common", *SUBCOMMANDS):
                raise ConfigError(f"unknown config section [{sec}]")
        for sec in ("common", cmd):
            if cp.has_section(sec):
                for key, val in cp[sec].items():
                    k = key.replace("-", "_")
                    known = {**COMMON, **SUBCOMMANDS[cmd]} if sec == cmd else COMMON
                    if sec == "common" and k not in COMMON and not any(k in s for s in SUBCOMMANDS.values()):
                        raise ConfigError(f"unknown config key {key!r} in [common]")
                    if sec == cmd and k not in known:
                        raise ConfigError(f"unknown config key {key!r} in [{sec}]")
                    if k in params:
                        raw[k] = val
    raw.update(flags)
    out = {}
    for name, prm in params.items():
        if name in raw:
            try:
                out[name] = prm.conv(raw[name])
            except ConfigError:
                raise
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {name}: {raw[name]!r} ({exc})") from None
        else:
            out[name] = prm.conv(prm.default) if isinstance(prm.default, str) and name != "out" \
                and name != "scenario" and name != "snapshot" else prm.default
    return out


# -- output helpers ---------------------------------------------------------------

def _num(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


def _table(header, rows, fmt) -> str:
    if fmt == "json":
        doc = [dict(zip(header, r)) for r in rows]
        return json.dumps(doc, indent=2, sort_keys=True, default=float) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([v if isinstance(v, str) else _num(v) for v in r])
    return buf.getvalue()


def _emit(text: str, out: str | None, mode: str = "w"):
    if out:
        with open(out, mode, newline="" if mode == "w" else None) as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- subcommands ------------------------------------------------------------------

def cmd_oscillator(o) -> tuple:
    from .spectra import kvn_oscillator, oscillator_residual

    rows = []
    worst = 0.0
    for N in o["N"]:
        n = max(0, -N) if o["n"] < 0 else o["n"]
        pair = kvn_oscillator(N, n, o["delta"], o["m"], o["omega"])
        r = oscillator_residual(pair, count=o["grid"])
        worst = max(worst, r)
        rows.append([N, n, o["delta"], pair.eigenvalue, f"{r:.3e}"])
    text = _table(["N", "n", "Delta", "eigenvalue", "residual"], rows, o["format"])
    ok = worst <= o["tol"]
    return text, ok, f"oscillator: {len(rows)} eigenpairs, max residual {worst:.2e}"


def cmd_landau(o) -> tuple:
    from .spectra import (QUANTUM_DEGENERACY_LABELS, KVN_DEGENERACY_LABELS, LandauLabels,
                          Units, certificate_json, landau_eigenfunction, landau_reduced_operator,
                          landau_spectrum_kvn, landau_spectrum_quantum, eigen_residual)
    from .representations import Axis, PhaseGrid, QLAMBDAP

    u = Units(m=o["m"], e=o["e"], c_light=o["c"], hbar=o["hbar"], B=o["B"], Delta=o["delta"])
    qE = landau_spectrum_quantum(o["n_max"], o["p_z0"], u)
    levels = landau_spectrum_kvn(o["N"], o["lambda_z0"], o["p_z0"], u)
    # eigen-residual of the reduced (x, lam_px) problem for every level
    sigma = math.sqrt(u.Delta / (u.m * u.larmor))
    grid = PhaseGrid((Axis.centered(12 * sigma, o["grid"]), Axis.centered(12 * sigma / u.Delta, o["grid"])),
                     QLAMBDAP)
    op = landau_reduced_operator(grid, 0.0, 0.0, u)
    worst = 0.0
    for lv in levels:
        L = LandauLabels(lv.N, max(0, -lv.N), 0.0, 0.0, 0.0, 0.0)
        f = landau_eigenfunction(L, u, n_dof=2)
        psi = grid.sample(lambda x, lam: f(x, 0.0, lam, 0.0))
        worst = max(worst, eigen_residual(op, psi, lv.N * u.larmor))
    if o["format"] == "json":
        doc = json.loads(certificate_json(levels, u))
        doc["quantum_levels"] = [round(e, 12) for e in qE]
        doc["max_residual"] = float(f"{worst:.3e}")
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    else:
        rows = [["quantum", n, "", E, len(QUANTUM_DEGENERACY_LABELS)] for n, E in enumerate(qE)]
        rows += [["kvn", "", lv.N, lv.eigenvalue, len(KVN_DEGENERACY_LABELS)] for lv in levels]
        text = _table(["kind", "n", "N", "eigenvalue", "degeneracy_labels"], rows, "csv")
    spacing = np.diff(qE)
    ok = worst <= o["tol"] and (len(spacing) == 0 or np.ptp(spacing) <= 1e-12 * max(1.0, abs(spacing[0])))
    return text, ok, (f"landau: {len(qE)} quantum levels, {len(levels)} KvN levels, "
                      f"{len(KVN_DEGENERACY_LABELS)} vs {len(QUANTUM_DEGENERACY_LABELS)} degeneracy labels, "
                      f"max residual {worst:.2e}")


def cmd_ab(o) -> tuple:
    from .aharonov import (ABUnits, ab_order, ab_quantum_spectrum, bessel_zero,
                           operator_shift_residual)

    u = ABUnits(hbar=o["hbar"], mu=o["mu"], b=o["b"], e=o["e"], c_light=o["c"])
    rows = []
    worst = 0.0
    for a in o["flux_alpha"]:
        flux = u.flux_from_alpha(a)
        res = operator_shift_residual(flux, o["samples"], 0, u.mu, u.e, u.c_light)
        worst = max(worst, res)
        for m in o["m"]:
            for k in o["k"]:
                nu = ab_order(m, a)
                z = bessel_zero(nu, k)
                E = ab_quantum_spectrum(k, m, a, o["p_z0"], u) if z else float("nan")
                rows.append([a, k, m, nu, z, E, 0.0, f"{res:.3e}"])
    header = ["alpha", "k", "m", "order", "zero", "E_quantum", "E_classical_shift", "operator_residual"]
    text = _table(header, rows, o["format"])
    return text, worst <= o["tol"], f"ab: {len(rows)} rows, classical operator residual {worst:.2e}"


def cmd_gauge_check(o) -> tuple:
    from .gauge_coupling import (couple_calH, couple_H, gauge_transform_field,
                                 gauge_transform_state, kinetic, parse_scenario,
                                 velocity_evolution_check)
    from .state import ExtendedState
    from .superspace import berezin, lift

    if not o["scenario"]:
        raise ConfigError("gauge-check needs --scenario")
    try:
        with open(o["scenario"]) as fh:
            sc = parse_scenario(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read scenario: {exc}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    A, al, n = sc.field, sc.alpha, sc.field.n
    Hf = kinetic(n, sc.m, sc.potential)
    Hc = couple_H(Hf, A.at_time(0.0))
    Ap = gauge_transform_field(A, al)
    rng = np.random.default_rng(o["seed"])
    worst = {"superfield_vs_substitution": 0.0, "paired_transform_invariance": 0.0,
             "velocity_extra_term": 0.0, "full_transform_extra": 0.0}
    for _ in range(o["samples"]):
        s = ExtendedState(rng.uniform(-1.5, 1.5, 2 * n), rng.uniform(-1.5, 1.5, 2 * n))
        a = couple_calH(Hf, A, s)
        b = complex(berezin(lift(Hc, s).element).body).real
        worst["superfield_vs_substitution"] = max(worst["superfield_vs_substitution"], abs(a - b) / max(1, abs(a)))
        s2 = gauge_transform_state(s, al, A.e, A.c_light)
        c = couple_calH(Hf, Ap, s2)
        worst["paired_transform_invariance"] = max(worst["paired_transform_invariance"], abs(a - c) / max(1, abs(a)))
        rep = velocity_evolution_check(A, al, s, sc.m, sc.potential)
        worst["velocity_extra_term"] = max(worst["velocity_extra_term"], rep.mismatch)
        worst["full_transform_extra"] = max(worst["full_transform_extra"], float(np.max(np.abs(rep.extra_full))))
    rows = [[k, f"{v:.3e}"] for k, v in worst.items()]
    text = _table(["check", "max_residual"], rows, o["format"])
    ok = all(v <= o["tol"] for v in worst.values())
    return text, ok, f"gauge-check: {o['samples']} states, max residual {max(worst.values()):.2e}"


def cmd_evolve(o) -> tuple:
    from .expr import Var
    from .liouville import build_liouvillian, evolve_characteristics, evolve_spectral
    from .representations import Axis, PhaseGrid, QP, density, gaussian
    from .dynamics import flow

    q, p = Var("q"), Var("p")
    m = o["m"]
    if o["system"] == "free":
        H = p * p / (2 * m)
    elif o["system"] == "oscillator":
        H = p * p / (2 * m) + 0.5 * m * o["omega"] ** 2 * q * q
    else:
        # x-p_x sector of the Landau problem at fixed p_y (A = (0, B x, 0))
        H = p * p / (2 * m) + (o["p_y0"] - o["B"] * q) ** 2 / (2 * m)
    if len(o["center"]) != 2:
        raise ConfigError("--center needs two numbers q,p")
    hw = o["half_width"]
    grid = PhaseGrid((Axis.centered(hw, o["grid"]), Axis.centered(hw, o["grid"])), QP)
    psi0 = gaussian(grid, o["center"], o["width"])
    if o["method"] == "spectral":
        try:
            psi = evolve_spectral(build_liouvillian(H, grid), psi0, o["t"], o["dt"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    else:
        psi = evolve_characteristics(H, psi0, o["t"])
    if o["snapshot"]:
        psi.save(o["snapshot"])
    rho = density(psi)
    idx = np.unravel_index(np.argmax(rho), grid.shape)
    peak = [grid.axes[i].points()[j] for i, j in enumerate(idx)]
    cl = flow(H, np.array(o["center"], dtype=float).reshape(2, 1), o["t"], max(1, int(400 * abs(o["t"]))))[:, 0]
    cells = max(abs(a - b) / ax.spacing for a, b, ax in zip(peak, cl, grid.axes))
    if o["format"] == "json":
        doc = {"system": o["system"], "method": o["method"], "t": o["t"], "norm": round(psi.norm(), 12),
               "peak": [round(v, 12) for v in peak], "classical": [round(float(v), 12) for v in cl],
               "peak_offset_cells": round(float(cells), 6)}
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    else:
        text = psi.density_csv()
    ok = cells <= 1.0 + 1e-9 if o["width"] <= 2 * grid.axes[0].spacing else True
    return text, ok, f"evolve: {o['system']} by {o['method']} to t={o['t']:g}, peak {cells:.2f} cells from trajectory"


def cmd_bessel_zeros(o) -> tuple:
    from .aharonov import bessel_zero, zeros_csv

    rows = []
    for nu in o["nu"]:
        if nu < 0:
            raise ConfigError("orders must be non-negative")
        for k in o["k"]:
            if k < 1:
                raise ConfigError("k must be >= 1")
            rows.append((nu, k, bessel_zero(nu, k, count_origin=not o["positive_only"])))
    if o["format"] == "json":
        text = json.dumps([{"nu": nu, "k": k, "zero": z} for nu, k, z in rows], indent=2, sort_keys=True) + "\n"
    else:
        text = zeros_csv(rows)
    return text, True, f"bessel-zeros: {len(rows)} zeros"


HANDLERS = {
    "oscillator": cmd_oscillator,
    "landau": cmd_landau,
    "ab": cmd_ab,
    "gauge-check": cmd_gauge_check,
    "evolve": cmd_evolve,
    "bessel-zeros": cmd_bessel_zeros,
}


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        ns = parser.parse_args(_normalise_argv(argv))
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    flags = {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
    try:
        from .representations import fft_workers

        fft_workers()
        opts = resolve(ns.command, flags, ns.config)
        text, ok, summary = HANDLERS[ns.command](opts)
    except ConfigError as exc:
        print(f"kvn {ns.command}: configuration error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"kvn {ns.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _emit(text, opts["out"])
    print(summary + ("" if ok else " [TOLERANCE FAILURE]"), file=sys.stderr)
    return EXIT_OK if ok else EXIT_TOLERANCE


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
