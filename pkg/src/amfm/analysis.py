"""Evaluate synthesised pulses: trajectories, drift robustness, power and demodulation.

Drift is modelled as a uniform shift of every mode frequency. Qubits are
1-based labels inside the chain's qubit window; modes are 0-based rows of
``ModeData``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from . import spectral
from .synthesis import infidelity_at

__all__ = [
    "AnalysisError",
    "DriftCurve",
    "displacement",
    "residual_infidelity",
    "gate_angle",
    "power_metrics",
    "sample_and_demodulate",
    "stationarity",
    "sweep_drift",
    "robust_width",
    "apply_amplitude_floor",
    "DEFAULT_DRIFT_SPAN",
    "DEFAULT_DRIFT_POINTS",
]

DEFAULT_DRIFT_SPAN = 2.0 * math.pi * 10e3  # rad/s
DEFAULT_DRIFT_POINTS = 81
DEFAULT_THRESHOLD = 1e-3
MIN_SAMPLES_PER_PERIOD = 8


class AnalysisError(ValueError):
    """Invalid evaluation request."""


def _pair(sol, i, j):
    return (sol.pair[0] if i is None else int(i), sol.pair[1] if j is None else int(j))


def displacement(sol, modes, ion, mode, t=None, drift=0.0, order=0):
    """Phase-space displacement ``alpha_p^i(t)`` of qubit ``ion`` in mode ``mode``.

    ``-eta_p^i sum_n A_n int_0^t (i s)^order sin(2 pi n s/tau) e^{i (omega_p + drift) s} ds``;
    ``order > 0`` gives the omega-derivative. ``t`` defaults to the full
    duration (all repeats).
    """
    T = sol.duration if t is None else float(t)
    if T < 0 or T > sol.duration * (1 + 1e-12):
        raise AnalysisError(f"t={T:g} s outside [0, {sol.duration:g}] s")
    eta = modes.eta[mode, modes.ion_of_qubit(ion)]
    if eta == 0.0:
        return 0j
    n = np.arange(1, sol.n_basis + 1)
    c = spectral.sine_moment(n, modes.frequencies[mode] + drift, sol.tau, order, upper=T)
    return complex(-eta * (sol.amplitudes @ c))


def residual_infidelity(sol, modes, i=None, j=None, drift=0.0):
    """``f = (4/5) sum_p [(eta_p^i)^2 + (eta_p^j)^2] |alpha_p|^2`` at the end of the pulse."""
    pair = _pair(sol, i, j)
    return infidelity_at(sol.amplitudes, modes, pair, sol.tau, upper=sol.duration, drift=drift)


def _kernel_sym(modes, pair, tau, n_basis, upper, drift=0.0):
    ci, cj = (modes.ion_of_qubit(q) for q in pair)
    if ci == cj:
        raise AnalysisError("the two qubits of a gate must differ")
    weights = modes.eta[:, ci] * modes.eta[:, cj]
    total = np.zeros((n_basis, n_basis))
    for w, omega in zip(weights, modes.frequencies):
        if w != 0.0:
            total += w * spectral.mode_kernel(omega + drift, tau, n_basis, upper, cache=(drift == 0.0))
    return 0.5 * (total + total.T)


def gate_angle(sol, modes, i=None, j=None, drift=0.0):
    """Accumulated entangling angle ``chi = A^T K A`` recomputed from scratch."""
    pair = _pair(sol, i, j)
    a = sol.amplitudes
    if not np.any(a):
        return 0.0
    K = _kernel_sym(modes, pair, sol.tau, sol.n_basis, sol.duration, drift)
    return float(a @ K @ a)


def _g(a, tau, t):
    n = np.arange(1, a.size + 1)
    return np.sin(np.multiply.outer(np.atleast_1d(t), 2.0 * np.pi * n / tau)) @ a


def power_metrics(sol):
    """Mean-square power ``sum A^2 / 2``, its root, and the peak ``max |g(t)|``.

    The peak is located on a grid of ``64 N_A`` samples per period and
    polished by bounded scalar minimisation around the best grid points.
    """
    a = sol.amplitudes
    ms = 0.5 * float(a @ a)
    tau = sol.tau
    m = 64 * a.size
    t = np.arange(m) * (tau / m)
    n = np.arange(1, a.size + 1)
    # one period suffices: repeats are identical
    g = np.zeros(m)
    for start in range(0, m, 4096):
        tt = t[start:start + 4096]
        g[start:start + 4096] = np.sin(np.outer(tt, 2.0 * np.pi * n / tau)) @ a
    absg = np.abs(g)
    best_t, best = float(t[np.argmax(absg)]) if m else 0.0, float(absg.max()) if m else 0.0
    dt = tau / m
    for idx in np.argsort(absg)[-3:]:
        res = optimize.minimize_scalar(
            lambda x: -abs(float(_g(a, tau, x)[0])),
            bounds=(t[idx] - dt, t[idx] + dt),
            method="bounded",
            options={"xatol": dt * 1e-9},
        )
        if -res.fun > best:
            best, best_t = float(-res.fun), float(res.x) % tau
    return {"mean_square": ms, "rms": math.sqrt(ms), "peak": best, "peak_time": best_t}


def sample_and_demodulate(sol, times):
    """Sample ``g`` and split it into envelope and instantaneous frequency.

    With ``z(t) = sum A_n exp(i 2 pi n t / tau)`` one has ``g = Im z``, so
    ``g = Omega sin(psi)`` with ``Omega = |z|`` and ``psi = unwrap(arg z)``;
    ``mu = d psi / dt`` by finite differences of the unwrapped phase.
    """
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise AnalysisError("need a 1-D grid of at least two samples")
    if np.any(np.diff(t) <= 0):
        raise AnalysisError("time grid must be strictly increasing")
    if t[0] < 0 or t[-1] > sol.duration * (1 + 1e-12):
        raise AnalysisError(f"time grid must lie within [0, {sol.duration:g}] s")
    a = sol.amplitudes
    nz = np.flatnonzero(a)
    n_top = int(nz[-1]) + 1 if nz.size else 1
    period = sol.tau / n_top
    if np.max(np.diff(t)) > period / MIN_SAMPLES_PER_PERIOD:
        raise AnalysisError(
            f"grid too coarse: need at least {MIN_SAMPLES_PER_PERIOD} samples per "
            f"period of the highest tone ({period:.3g} s)"
        )
    n = np.arange(1, a.size + 1)
    z = np.exp(1j * np.outer(t, 2.0 * np.pi * n / sol.tau)) @ a
    g = z.imag
    env = np.abs(z)
    psi = np.unwrap(np.angle(z))
    mu = np.gradient(psi, t)
    return {"t": t, "g": g, "envelope": env, "phase": psi, "detuning": mu}


def stationarity(sol, modes, h=None, i=None, j=None, tol=0.5):
    """Finite-difference check that ``f(drift) - f(0)`` starts at order ``2K+2``.

    If the first ``2K+1`` drift derivatives of ``f`` vanish, then
    ``f(2h) - f(0) = 2^(2K+2) (f(h) - f(0))`` to leading order, so the
    log2 ratio on each side of zero estimates the leading order. The check
    passes when both one-sided slopes are within ``tol`` of ``2K+2``.
    ``h`` defaults to ``0.1 / duration``.
    """
    if h is None:
        h = 0.1 / sol.duration
    f0 = residual_infidelity(sol, modes, i, j)
    slopes = []
    for sign in (1.0, -1.0):
        d1 = residual_infidelity(sol, modes, i, j, drift=sign * h) - f0
        d2 = residual_infidelity(sol, modes, i, j, drift=2 * sign * h) - f0
        slopes.append(math.log2(d2 / d1) if d1 > 0 and d2 > 0 else math.nan)
    order = 2 * sol.K + 2
    ok = all(abs(sl - order) <= tol for sl in slopes)
    return {"h": h, "f0": f0, "slopes": tuple(slopes), "order": order, "passed": bool(ok)}


@dataclass(frozen=True, eq=False)
class DriftCurve:
    """Infidelity versus uniform mode drift (rad/s)."""

    offsets: np.ndarray
    infidelity: np.ndarray
    chi_deviation: np.ndarray
    fingerprint: str
    robust_width: float
    threshold: float
    predicted_f: float
    flags: tuple = field(default_factory=tuple)

    def rows(self):
        return [
            {"drift_khz": float(d) / (2e3 * math.pi), "infidelity": float(f), "chi_deviation": float(c)}
            for d, f, c in zip(self.offsets, self.infidelity, self.chi_deviation)
        ]


def robust_width(offsets, infidelity, threshold=DEFAULT_THRESHOLD):
    """Width of the contiguous region around zero drift with ``f <= threshold``.

    Edges are interpolated in ``log f`` between the last inside and first
    outside grid point. Returns ``(width, touches_edge)``.
    """
    d = np.asarray(offsets, dtype=float)
    f = np.asarray(infidelity, dtype=float)
    if d.size == 0:
        return 0.0, False
    c = int(np.argmin(np.abs(d)))
    if f[c] > threshold:
        return 0.0, False
    lt = math.log(threshold)

    def edge(step):
        k = c
        while 0 <= k + step < d.size and f[k + step] <= threshold:
            k += step
        if not 0 <= k + step < d.size:
            return float(d[k]), True
        fi, fo = max(f[k], 1e-300), f[k + step]
        w = (lt - math.log(fi)) / (math.log(fo) - math.log(fi))
        return float(d[k] + w * (d[k + step] - d[k])), False

    lo, hit_lo = edge(-1)
    hi, hit_hi = edge(+1)
    return hi - lo, hit_lo or hit_hi


def sweep_drift(sol, modes, span=DEFAULT_DRIFT_SPAN, points=DEFAULT_DRIFT_POINTS,
                threshold=DEFAULT_THRESHOLD, jobs=1, with_chi=True):
    """Infidelity on a uniform grid over ``[-span, span]`` plus the robust width.

    The ``chi_deviation`` column is ``|chi(drift) - chi(0)|``, a diagnostic
    beyond the displacement-only infidelity model.
    """
    if points < 1:
        raise AnalysisError("points must be >= 1")
    if span < 0:
        raise AnalysisError("span must be >= 0")
    offsets = np.array([0.0]) if points == 1 else np.linspace(-span, span, points)

    def one(d):
        f = residual_infidelity(sol, modes, drift=float(d))
        chi = gate_angle(sol, modes, drift=float(d)) if with_chi else math.nan
        return f, chi

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            out = list(ex.map(one, offsets))
    else:
        out = [one(d) for d in offsets]
    f = np.array([o[0] for o in out])
    chi0 = gate_angle(sol, modes) if with_chi else math.nan
    chi = np.abs(np.array([o[1] for o in out]) - chi0)
    width, touches = robust_width(offsets, f, threshold)
    return DriftCurve(
        offsets=offsets,
        infidelity=f,
        chi_deviation=chi,
        fingerprint=sol.fingerprint,
        robust_width=width,
        threshold=threshold,
        predicted_f=sol.predicted_f,
        flags=("width_reaches_grid_edge",) if touches else (),
    )


def apply_amplitude_floor(sol, modes, floor=1e-4):
    """Zero amplitudes below ``floor * max|A|`` and re-evaluate angle and infidelity."""
    a = np.array(sol.amplitudes)
    if not np.any(a):
        return sol
    cut = np.abs(a) < floor * np.max(np.abs(a))
    a[cut] = 0.0
    trimmed = replace(sol, amplitudes=a)
    return replace(
        trimmed,
        gate_angle=gate_angle(trimmed, modes),
        predicted_f=residual_infidelity(trimmed, modes),
        knobs=dict(sol.knobs, amplitude_floor=floor, zeroed=int(cut.sum())),
        flags=sol.flags + ("amplitude_floor",),
    )
