"""Blue-sideband spectroscopy: two-level line shape, synthetic scans and fitting.

Scan positions are drive frequencies measured from the carrier (rad/s);
the line is centred on the mode frequency ``omega_p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

__all__ = [
    "SpectroscopyScan",
    "SidebandFit",
    "SidebandFitError",
    "bsb_population",
    "simulate_scan",
    "fit_sideband",
]

MAX_ITERATIONS = 200


class SidebandFitError(RuntimeError):
    """The line-shape fit did not converge; ``best`` holds the last iterate."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


def bsb_population(rabi, detuning, t):
    """Excited population after a square sideband pulse of length ``t``.

    ``P = Omega^2 / (Omega^2 + d^2/4) sin^2(t sqrt(Omega^2 + d^2/4))``.
    Broadcasts over its arguments.
    """
    rabi = np.asarray(rabi, dtype=float)
    d = np.asarray(detuning, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("pulse duration must be >= 0")
    gen2 = rabi**2 + 0.25 * d**2
    with np.errstate(invalid="ignore", divide="ignore"):
        amp = np.where(gen2 > 0, rabi**2 / np.where(gen2 > 0, gen2, 1.0), 0.0)
    p = amp * np.sin(t * np.sqrt(gen2)) ** 2
    return float(p) if p.ndim == 0 else p


@dataclass(frozen=True, eq=False)
class SpectroscopyScan:
    detunings: np.ndarray
    populations: np.ndarray
    pulse_duration: float
    truth: tuple | None = None
    shots: int | None = None

    def __post_init__(self):
        d = np.asarray(self.detunings, dtype=float)
        p = np.asarray(self.populations, dtype=float)
        if d.shape != p.shape or d.ndim != 1:
            raise ValueError("detunings and populations must be 1-D and equal length")
        if np.any((p < 0) | (p > 1)):
            raise ValueError("populations must lie in [0, 1]")
        object.__setattr__(self, "detunings", d)
        object.__setattr__(self, "populations", p)


def simulate_scan(omega_p, rabi, detunings, t, shots=4000, noise=0.01, seed=0):
    """Synthetic scan: binomial shot noise plus Gaussian technical noise.

    ``shots=None`` and ``noise=0`` give the noiseless line shape.
    """
    d = np.asarray(detunings, dtype=float)
    p = bsb_population(rabi, d - omega_p, t)
    rng = np.random.default_rng(seed)
    if shots:
        p = rng.binomial(int(shots), p) / shots
    if noise:
        p = p + rng.normal(0.0, noise, size=p.shape)
    p = np.clip(p, 0.0, 1.0)
    return SpectroscopyScan(detunings=d, populations=p, pulse_duration=float(t),
                            truth=(float(omega_p), float(rabi)), shots=shots)


@dataclass(frozen=True)
class SidebandFit:
    omega_p: float
    rabi: float
    sigma_omega_p: float
    sigma_rabi: float
    residual: float
    iterations: int


def _initial_guesses(scan, branches=3):
    p, d, t = scan.populations, scan.detunings, scan.pulse_duration
    k = int(np.argmax(p))
    # resonant height sin^2(Omega t) fixes Omega t up to the branch of arcsin
    theta = math.asin(math.sqrt(min(p[k], 1.0)))
    if theta <= 0:
        return []
    angles = sorted({theta + m * math.pi for m in range(branches)}
                    | {math.pi - theta + m * math.pi for m in range(branches)})
    return [np.array([d[k], a / t]) for a in angles]


def fit_sideband(scan):
    """Least-squares fit of the sideband line shape for ``(omega_p, |Omega|)``.

    Starting points: the brightest scan point for the centre, and every
    arcsine branch of its height (pulse area up to three half turns) for
    the Rabi rate; the lowest-cost fit wins. One-sigma errors come from
    the Jacobian scaled by the residual variance.
    """
    d, p, t = scan.detunings, scan.populations, scan.pulse_duration
    if d.size < 5:
        raise ValueError("need at least 5 scan points")
    starts = _initial_guesses(scan)
    if not starts:
        raise SidebandFitError("no sideband signal in the scan", best=None)

    def resid(x):
        return bsb_population(abs(x[1]), d - x[0], t) - p

    res = None
    for x0 in starts:
        sx = np.array([max(np.ptp(d), 1.0), x0[1]])
        r = optimize.least_squares(resid, x0, x_scale=sx, method="trf",
                                   max_nfev=MAX_ITERATIONS, xtol=1e-15, ftol=1e-15, gtol=1e-15)
        if res is None or (r.status > 0 and (res.status <= 0 or r.cost < res.cost)):
            res = r
    best = (float(res.x[0]), float(abs(res.x[1])))
    if res.status <= 0:
        raise SidebandFitError(f"sideband fit did not converge: {res.message}", best=best)
    J = res.jac
    dof = max(d.size - 2, 1)
    s2 = float(res.fun @ res.fun) / dof
    try:
        cov = np.linalg.inv(J.T @ J) * s2
    except np.linalg.LinAlgError:
        raise SidebandFitError("singular Jacobian at the fitted point", best=best) from None
    return SidebandFit(
        omega_p=best[0],
        rabi=best[1],
        sigma_omega_p=math.sqrt(max(cov[0, 0], 0.0)),
        sigma_rabi=math.sqrt(max(cov[1, 1], 0.0)),
        residual=math.sqrt(float(res.fun @ res.fun) / d.size),
        iterations=int(res.nfev),
    )
