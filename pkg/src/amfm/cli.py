"""Command-line front end.

Units at the boundary: gate times in microseconds, drift and spectroscopy
frequencies in kHz, mode files in Hz. Exit codes: 0 success, 1
computational failure (JSON error on stderr), 2 usage error.

Every output file ``X`` gets a ``X.meta.json`` sidecar carrying the run
timestamp and command line; ``X`` itself never contains a timestamp, so
re-running a command reproduces it byte for byte.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .analysis import apply_amplitude_floor, sample_and_demodulate, sweep_drift
from .chain import ChainConfig, ModeData, preset, solve_transverse_modes
from .spectroscopy import fit_sideband, simulate_scan
from .sweeps import drift_report, sweep_power_vs_tau
from .synthesis import PulseSolution, SynthesisRequest, repeat_pulse, synthesize

__all__ = ["Command", "parse_args", "execute", "main"]

VERBS = ("modes", "synth", "sweep-tau", "sweep-drift", "demod", "spectro-sim", "verify")
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Command:
    verb: str
    options: dict
    inputs: tuple = ()
    outputs: tuple = ()
    argv: tuple = field(default=(), compare=False)


# ---------------------------------------------------------------------------
# argument parsing


def _pair(text):
    try:
        i, j = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two qubit labels like 4,5, got {text!r}") from None
    if i == j:
        raise argparse.ArgumentTypeError("the two qubits of a gate must differ")
    return (i, j)


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _basis(text):
    if text == "auto":
        return None
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("N_A must be an integer or 'auto'") from None
    if n < 1:
        raise argparse.ArgumentTypeError("N_A must be positive")
    return n


def _positive_int(text):
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def _add_chain(p):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--preset", choices=("umd7", "chain15"), help="built-in chain")
    g.add_argument("--modes", metavar="FILE", help="mode file (JSON, frequencies in Hz)")


def _add_request(p, with_tau=True):
    _add_chain(p)
    p.add_argument("--pair", type=_pair, required=True, help="qubit labels, e.g. 4,5 (1-based)")
    if with_tau:
        p.add_argument("--tau-us", type=float, required=True, help="gate time in microseconds")
    p.add_argument("--K", type=int, default=0, help="stabilization order (default 0)")
    p.add_argument("--protocol", choices=("exact", "fmatrix", "ens"), default="exact")
    p.add_argument("--N-A", dest="n_basis", type=_basis, default=None,
                   help="basis size or 'auto' (default: 300, larger for long gates)")
    cut = p.add_mutually_exclusive_group()
    cut.add_argument("--L-cut", type=int, help="fmatrix: number of kept F eigenvectors")
    cut.add_argument("--L-bar-cut", type=int, help="fmatrix: N_A minus L_cut")
    knob = p.add_mutually_exclusive_group()
    knob.add_argument("--Z", type=float, help="ens: relative Gamma threshold")
    knob.add_argument("--target-f", type=float, help="ens: infidelity target")
    p.add_argument("--null-cutoff", type=float, default=None, help="relative null-space cutoff")
    p.add_argument("--convergence-check", action="store_true",
                   help="re-run at 1.5 N_A and warn if omega0 moves by more than 0.5%%")


def _add_out(p, required=False):
    p.add_argument("-o", "--output", metavar="FILE", required=required,
                   help="output file" if required else "output file (default: standard output)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="amfm",
        description="Power-optimal AMFM pulse synthesis for trapped-ion two-qubit gates.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="verb", metavar="VERB")
    sub.required = True

    p = sub.add_parser("modes", help="solve or export chain normal modes")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--preset", choices=("umd7", "chain15"))
    g.add_argument("--config", metavar="FILE", help="chain configuration JSON (SI units)")
    _add_out(p)

    p = sub.add_parser("synth", help="synthesise a pulse")
    _add_request(p)
    p.add_argument("--repeat", type=_positive_int, default=1, help="play the pulse R times")
    p.add_argument("--amplitude-floor", type=float, nargs="?", const=1e-4, default=None,
                   help="zero amplitudes below this fraction of the largest (default 1e-4 when given)")
    _add_out(p)

    p = sub.add_parser("sweep-tau", help="power versus gate time")
    _add_request(p, with_tau=False)
    p.add_argument("--tau-us", type=_floats, required=True, help="comma-separated gate times (us)")
    p.add_argument("--jobs", type=_positive_int, default=1)
    _add_out(p, required=True)

    p = sub.add_parser("sweep-drift", help="infidelity versus uniform mode drift")
    p.add_argument("--solution", required=True, metavar="FILE", help="pulse JSON from synth")
    _add_chain(p)
    p.add_argument("--span-khz", type=float, default=10.0, help="grid covers +-span (default 10)")
    p.add_argument("--points", type=_positive_int, default=81, help="grid points (default 81)")
    p.add_argument("--threshold", type=float, default=1e-3, help="infidelity bound for the robust width")
    p.add_argument("--repeat", type=_positive_int, default=1, help="play the pulse R times")
    p.add_argument("--jobs", type=_positive_int, default=1, help="worker threads; output order is fixed")
    _add_out(p, required=True)

    p = sub.add_parser("demod", help="sample a pulse and extract envelope and detuning")
    p.add_argument("--solution", required=True, metavar="FILE")
    p.add_argument("--samples-per-period", type=_positive_int, default=16,
                   help="samples per period of the highest tone (min 8)")
    p.add_argument("--repeat", type=_positive_int, default=1)
    _add_out(p, required=True)

    p = sub.add_parser("spectro-sim", help="simulate and fit a sideband scan")
    p.add_argument("--center-khz", type=float, required=True, help="mode frequency (kHz)")
    p.add_argument("--rabi-khz", type=float, required=True, help="sideband Rabi rate / 2pi (kHz)")
    p.add_argument("--t-us", type=float, required=True, help="pulse duration (us)")
    p.add_argument("--span-khz", type=float, default=30.0, help="scan covers centre +-span (default 30)")
    p.add_argument("--points", type=_positive_int, default=61)
    p.add_argument("--shots", type=int, default=4000, help="0 for no shot noise")
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    _add_out(p, required=True)

    p = sub.add_parser("verify", help="compare closed forms against adaptive quadrature")
    p.add_argument("--samples", type=_positive_int, default=20, help="random c_integral cases")
    p.add_argument("--seed", type=int, default=0)
    _add_out(p)
    return parser


def parse_args(argv):
    """Parse and validate; usage errors exit with status 2."""
    parser = build_parser()
    ns = parser.parse_args(argv)
    opts = vars(ns)
    inputs = tuple(opts[k] for k in ("modes", "config", "solution") if opts.get(k))
    for path in inputs:
        if not os.path.isfile(path):
            parser.error(f"input file not found: {path}")
    if ns.verb in ("synth", "sweep-tau"):
        if ns.protocol == "fmatrix" and ns.L_cut is None and ns.L_bar_cut is None:
            parser.error("fmatrix needs --L-cut or --L-bar-cut")
        if ns.protocol == "ens" and ns.Z is None and ns.target_f is None:
            parser.error("ens needs --Z or --target-f")
    outputs = (opts["output"],) if opts.get("output") else ()
    return Command(verb=ns.verb, options=opts, inputs=inputs, outputs=outputs, argv=tuple(argv))


# ---------------------------------------------------------------------------
# execution


def _write(path, text, argv):
    if path is None:
        sys.stdout.write(text)
        return
    _atomic(path, text)
    meta = {
        "created_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "argv": list(argv),
        "library_version": __version__,
    }
    _atomic(path + ".meta.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _atomic(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _load_json(path):
    with open(path) as fh:
        return json.load(fh)


def _modes(opts):
    if opts.get("preset"):
        return preset(opts["preset"])[1]
    return ModeData.from_dict(_load_json(opts["modes"]))


def _template(opts, modes):
    t = {
        "modes": modes,
        "pair": opts["pair"],
        "K": opts["K"],
        "protocol": opts["protocol"],
        "n_basis": opts["n_basis"],
        "convergence_check": opts["convergence_check"],
    }
    if opts.get("null_cutoff") is not None:
        t["null_cutoff"] = opts["null_cutoff"]
    if opts["protocol"] == "ens":
        t["Z"], t["target_f"] = opts["Z"], opts["target_f"]
    return t


def _with_lcut(template, opts, tau):
    if template["protocol"] != "fmatrix":
        return template
    if opts.get("L_cut") is not None:
        return dict(template, L_cut=opts["L_cut"])
    probe = SynthesisRequest(**dict(template, protocol="exact"), tau=tau)
    return dict(template, L_cut=probe.n_basis - opts["L_bar_cut"])


def _run_modes(opts):
    if opts.get("preset"):
        cfg, modes = preset(opts["preset"])
    else:
        cfg = ChainConfig.from_dict(_load_json(opts["config"]))
        modes = solve_transverse_modes(cfg)
    d = modes.to_dict()
    d["chain_config"] = cfg.to_dict()
    return _dumps(d)


def _run_synth(opts):
    modes = _modes(opts)
    tau = opts["tau_us"] * 1e-6
    template = _with_lcut(_template(opts, modes), opts, tau)
    sol = synthesize(SynthesisRequest(**template, tau=tau))
    if opts["amplitude_floor"] is not None:
        sol = apply_amplitude_floor(sol, modes, opts["amplitude_floor"])
    sol = repeat_pulse(sol, opts["repeat"], modes=modes)
    return _dumps(sol.to_dict())


def _run_sweep_tau(opts):
    modes = _modes(opts)
    taus = [t * 1e-6 for t in opts["tau_us"]]
    template = _template(opts, modes)
    if opts["protocol"] == "fmatrix":
        if opts.get("L_bar_cut") is not None:
            raise ValueError("sweep-tau with fmatrix takes --L-cut (N_A changes with tau)")
        template["L_cut"] = opts["L_cut"]
    report = sweep_power_vs_tau(template, taus, jobs=opts["jobs"])
    return report.to_csv(), report.sidecar()


def _load_solution(opts):
    return PulseSolution.from_dict(_load_json(opts["solution"]))


def _run_sweep_drift(opts):
    modes = _modes(opts)
    sol = _load_solution(opts)
    if sol.fingerprint and sol.fingerprint != modes.fingerprint():
        raise ValueError("solution was synthesised for a different chain (fingerprint mismatch)")
    sol = repeat_pulse(sol, opts["repeat"], modes=modes)
    curve = sweep_drift(sol, modes, span=TWO_PI * 1e3 * opts["span_khz"], points=opts["points"],
                        threshold=opts["threshold"], jobs=opts["jobs"])
    report = drift_report(curve, sol)
    return report.to_csv(), report.sidecar()


def _run_demod(opts):
    sol = repeat_pulse(_load_solution(opts), opts["repeat"])
    nz = np.flatnonzero(sol.amplitudes)
    n_top = int(nz[-1]) + 1 if nz.size else 1
    per = opts["samples_per_period"]
    count = per * n_top * sol.repeats
    t = np.arange(count + 1) * (sol.duration / count)
    out = sample_and_demodulate(sol, t)
    lines = ["t_us,g_rad_s,envelope_rad_s,detuning_rad_s\n"]
    for row in zip(out["t"] * 1e6, out["g"], out["envelope"], out["detuning"]):
        lines.append(",".join(repr(float(x)) for x in row) + "\n")
    return "".join(lines)


def _run_spectro(opts):
    wp = TWO_PI * 1e3 * opts["center_khz"]
    rabi = TWO_PI * 1e3 * opts["rabi_khz"]
    t = opts["t_us"] * 1e-6
    det = wp + TWO_PI * 1e3 * np.linspace(-opts["span_khz"], opts["span_khz"], opts["points"])
    scan = simulate_scan(wp, rabi, det, t, shots=opts["shots"] or None, noise=opts["noise"],
                         seed=opts["seed"])
    fit = fit_sideband(scan)
    lines = ["detuning_khz,population\n"]
    for d, p in zip(scan.detunings, scan.populations):
        lines.append(f"{float(d) / (TWO_PI * 1e3)!r},{float(p)!r}\n")
    side = {
        "truth": {"center_khz": opts["center_khz"], "rabi_khz": opts["rabi_khz"]},
        "fit": {
            "center_khz": fit.omega_p / (TWO_PI * 1e3),
            "rabi_khz": fit.rabi / (TWO_PI * 1e3),
            "sigma_center_khz": fit.sigma_omega_p / (TWO_PI * 1e3),
            "sigma_rabi_khz": fit.sigma_rabi / (TWO_PI * 1e3),
            "residual": fit.residual,
        },
        "scan": {"t_us": opts["t_us"], "shots": opts["shots"], "noise": opts["noise"],
                 "seed": opts["seed"], "points": opts["points"], "span_khz": opts["span_khz"]},
        "library_version": __version__,
    }
    return "".join(lines), _dumps(side)


def _run_verify(opts):
    from .verify import verification_report

    report = verification_report(samples=opts["samples"], seed=opts["seed"])
    return _dumps(report), report["passed"]


def execute(cmd):
    """Run a parsed command; returns the process exit code."""
    opts = cmd.options
    out = opts.get("output")
    try:
        if cmd.verb == "modes":
            _write(out, _run_modes(opts), cmd.argv)
        elif cmd.verb == "synth":
            _write(out, _run_synth(opts), cmd.argv)
        elif cmd.verb in ("sweep-tau", "sweep-drift", "spectro-sim"):
            run = {"sweep-tau": _run_sweep_tau, "sweep-drift": _run_sweep_drift,
                   "spectro-sim": _run_spectro}[cmd.verb]
            body, side = run(opts)
            _write(out, body, cmd.argv)
            _atomic(out + ".json", side)
        elif cmd.verb == "demod":
            _write(out, _run_demod(opts), cmd.argv)
        elif cmd.verb == "verify":
            body, passed = _run_verify(opts)
            _write(out, body, cmd.argv)
            if not passed:
                return _fail(RuntimeError("closed-form values disagree with quadrature"))
        return 0
    except (ValueError, ArithmeticError, RuntimeError, OSError, KeyError) as exc:
        return _fail(exc)


def _fail(exc):
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}, sort_keys=True) + "\n")
    return 1


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cmd = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return execute(cmd)
