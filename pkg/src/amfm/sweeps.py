"""Parameter sweeps with tabular output (CSV plus a JSON provenance sidecar).

Rows come back in input order whatever ``jobs`` is, and floats are written
with ``repr`` so a re-run reproduces the file byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from . import __version__
from .analysis import power_metrics
from .synthesis import SynthesisRequest, fmatrix_scan, synthesize

__all__ = [
    "SweepReport",
    "sweep_power_vs_tau",
    "sweep_pairs",
    "sweep_lbar",
    "drift_report",
]

POWER_COLUMNS = (
    ("tau_us", "us"),
    ("pair", "qubits"),
    ("protocol", ""),
    ("K", ""),
    ("N_A", ""),
    ("knob", ""),
    ("subspace_dim", ""),
    ("omega0", "rad/s"),
    ("mean_square", "(rad/s)^2"),
    ("rms", "rad/s"),
    ("peak", "rad/s"),
    ("predicted_f", ""),
    ("f_max", ""),
    ("gate_angle", "rad"),
    ("flags", ""),
    ("error", ""),
)


def _us(seconds):
    # strip binary noise from the seconds -> microseconds conversion
    return float(f"{seconds * 1e6:.12g}")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass(frozen=True, eq=False)
class SweepReport:
    """Rows of a sweep plus the provenance needed to re-run it."""

    columns: tuple
    rows: list
    meta: dict = field(default_factory=dict)

    def column(self, name):
        return [r.get(name) for r in self.rows]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"{n} [{u}]" if u else n for n, u in self.columns])
        for r in self.rows:
            w.writerow([_fmt(r.get(n)) for n, _ in self.columns])
        return buf.getvalue()

    def sidecar(self):
        return json.dumps(dict(self.meta, library_version=__version__), indent=2, sort_keys=True) + "\n"


def _template_meta(template):
    t = dict(template)
    modes = t.pop("modes")
    t["pair"] = list(t.get("pair", ()))
    return {"chain_fingerprint": modes.fingerprint(), "request": t}


def _power_row(sol):
    pm = power_metrics(sol)
    knob = ";".join(f"{k}={_fmt(v)}" for k, v in sorted(sol.knobs.items()))
    return {
        "tau_us": _us(sol.tau),
        "pair": f"{sol.pair[0]}-{sol.pair[1]}",
        "protocol": sol.protocol,
        "K": sol.K,
        "N_A": sol.n_basis,
        "knob": knob,
        "subspace_dim": sol.subspace_dim,
        "omega0": sol.omega0,
        "mean_square": pm["mean_square"],
        "rms": pm["rms"],
        "peak": pm["peak"],
        "predicted_f": sol.predicted_f,
        "f_max": sol.f_max,
        "gate_angle": sol.gate_angle,
        "flags": ";".join(sol.flags),
        "error": "",
    }


def _run(fn, items, jobs):
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def _guarded(build):
    def run(item):
        try:
            return _power_row(synthesize(build(item)))
        except (ValueError, ArithmeticError) as exc:
            return {"error": f"{type(exc).__name__}: {exc}"}
    return run


def sweep_power_vs_tau(template, taus, jobs=1):
    """Synthesise one pulse per gate time (seconds) and tabulate its power.

    ``template`` holds ``SynthesisRequest`` keyword arguments without
    ``tau``. A failing point becomes a row with the ``error`` column set.
    """
    taus = [float(t) for t in taus]

    def build(tau):
        return SynthesisRequest(**template, tau=tau)

    rows = _run(_guarded(build), taus, jobs)
    for tau, row in zip(taus, rows):
        row.setdefault("tau_us", _us(tau))
    meta = dict(_template_meta(template), sweep="power_vs_tau", taus_s=taus)
    return SweepReport(columns=POWER_COLUMNS, rows=rows, meta=meta)


def sweep_pairs(template, pairs, jobs=1):
    """Power for several qubit pairs at fixed gate time."""
    pairs = [tuple(int(q) for q in p) for p in pairs]
    base = {k: v for k, v in template.items() if k != "pair"}

    def build(pair):
        return SynthesisRequest(**base, pair=pair)

    rows = _run(_guarded(build), pairs, jobs)
    for pair, row in zip(pairs, rows):
        row.setdefault("pair", f"{pair[0]}-{pair[1]}")
    meta = dict(_template_meta(dict(base, pair=())), sweep="pairs", pairs=[list(p) for p in pairs])
    return SweepReport(columns=POWER_COLUMNS, rows=rows, meta=meta)


def sweep_lbar(template, lbars):
    """F-matrix solutions for each ``L_bar_cut = N_A - L_cut``."""
    req = SynthesisRequest(**dict(template, protocol="fmatrix", L_cut=1))
    lbars = [int(x) for x in lbars]
    sols = fmatrix_scan(req, [req.n_basis - lb for lb in lbars])
    rows = [_power_row(s) for s in sols]
    meta = dict(_template_meta(template), sweep="lbar", lbars=lbars, N_A=req.n_basis)
    return SweepReport(columns=POWER_COLUMNS, rows=rows, meta=meta)


DRIFT_COLUMNS = (("drift_khz", "kHz"), ("infidelity", ""), ("chi_deviation", "rad"))


def drift_report(curve, solution):
    """Tabulate a ``DriftCurve``."""
    meta = {
        "sweep": "drift",
        "chain_fingerprint": curve.fingerprint,
        "threshold": curve.threshold,
        "robust_width_khz": curve.robust_width / (2e3 * math.pi),
        "predicted_f": curve.predicted_f,
        "flags": list(curve.flags),
        "solution": {k: v for k, v in solution.to_dict().items() if k != "amplitudes_rad_s"},
    }
    return SweepReport(columns=DRIFT_COLUMNS, rows=curve.rows(), meta=meta)
