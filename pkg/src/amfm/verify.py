"""Cross-check the closed-form integrals against adaptive quadrature.

Cases are drawn from a seeded generator so a report is reproducible.
Overlap integrals are compared by plain relative error. Kernel entries
whose value cancels to rounding level against the diagonal scale
``sqrt(|K_nn K_mm|)`` are compared absolutely against that scale, since a
relative error of an entry that is zero up to rounding means nothing.
"""

from __future__ import annotations

import math

import numpy as np

from . import spectral
from .oracle import c_integral_quad, kernel_entry_quad

__all__ = ["overlap_cases", "kernel_cases", "check_overlaps", "check_kernels", "verification_report"]

OVERLAP_TOL = 1e-10
KERNEL_TOL = 1e-8


def overlap_cases(count=200, near=20, seed=0):
    """Random ``(n, omega, tau, k)`` tuples plus near-resonant ones.

    Near-resonant cases put ``omega tau`` within ``1e-9 .. 1e-1`` of
    ``2 pi n``, where the closed form switches to its series branch.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.integers(1, 301))
        tau = float(rng.uniform(10e-6, 300e-6))
        omega = 2 * math.pi * float(rng.uniform(0.05e6, 5e6))
        out.append((n, omega, tau, int(rng.integers(0, 7))))
    for _ in range(near):
        n = int(rng.integers(1, 301))
        tau = float(rng.uniform(10e-6, 300e-6))
        off = float(10 ** rng.uniform(-9, -1)) * float(rng.choice([-1.0, 1.0]))
        out.append((n, (2 * math.pi * n + off) / tau, tau, int(rng.integers(0, 7))))
    return out


def kernel_cases(count=12, seed=0):
    """``(n, m, omega, tau, upper)`` with full, doubled and partial windows."""
    rng = np.random.default_rng(seed + 1)
    out = []
    for _ in range(count):
        n, m = (int(x) for x in rng.integers(1, 13, size=2))
        tau = float(rng.uniform(10e-6, 40e-6))
        omega = 2 * math.pi * float(rng.uniform(0.2e6, 3.2e6))
        scale = float(rng.choice([1.0, 2.0, float(rng.uniform(0.3, 1.0))]))
        out.append((n, m, omega, tau, tau * scale))
    return out


def check_overlaps(cases, tol=OVERLAP_TOL):
    rows = []
    for n, omega, tau, k in cases:
        got = spectral.c_integral(n, omega, tau, k)
        ref = c_integral_quad(n, omega, tau, k)
        err = abs(got - ref) / abs(ref)
        rows.append({"n": n, "omega": omega, "tau": tau, "k": k, "closed_form": [got.real, got.imag],
                     "quadrature": [ref.real, ref.imag], "rel_error": err, "ok": bool(err <= tol)})
    return rows


def check_kernels(cases, tol=KERNEL_TOL):
    rows = []
    for n, m, omega, tau, upper in cases:
        K = spectral.mode_kernel(omega, tau, max(n, m), upper=upper, cache=False)
        got = float(K[n - 1, m - 1])
        ref = kernel_entry_quad(n, m, omega, tau, upper=upper)
        scale = math.sqrt(abs(K[n - 1, n - 1] * K[m - 1, m - 1]))
        denom = abs(ref) if abs(ref) > 1e-10 * scale else scale
        err = abs(got - ref) / denom
        rows.append({"n": n, "m": m, "omega": omega, "tau": tau, "upper": upper, "closed_form": got,
                     "quadrature": ref, "rel_error": err, "ok": bool(err <= tol)})
    return rows


def verification_report(samples=20, seed=0, kernels=None):
    """JSON-ready comparison of closed forms and quadrature.

    ``samples`` random overlap cases plus ``max(1, samples // 10)``
    near-resonant ones; ``kernels`` defaults to ``max(2, samples // 10)``.
    """
    near = max(1, samples // 10)
    if kernels is None:
        kernels = max(2, samples // 10)
    ov = check_overlaps(overlap_cases(samples, near, seed))
    ke = check_kernels(kernel_cases(kernels, seed))
    return {
        "seed": seed,
        "overlap": {"tolerance": OVERLAP_TOL, "worst": max(r["rel_error"] for r in ov), "cases": ov},
        "kernel": {"tolerance": KERNEL_TOL, "worst": max(r["rel_error"] for r in ke), "cases": ke},
        "passed": all(r["ok"] for r in ov + ke),
    }
