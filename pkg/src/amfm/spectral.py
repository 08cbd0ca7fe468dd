"""Closed-form integrals of the Fourier-sine pulse basis.

Overlaps are divided differences of ``exp`` at purely imaginary nodes,
with a series branch that stays accurate at and near resonance (basis
frequency equal to a mode frequency). The kernel over whole periods uses a
convolution closed form with one ``O(N_A^2)`` pass; partial windows fall
back to second divided differences.

* ``sine_moment`` -- ``int_0^T (i t)^k sin(2 pi n t / tau) e^{i w t} dt``,
  the mode overlap and its w-derivatives;
* ``constraint_matrix`` -- stacked real/imaginary closure conditions;
* ``kernel_matrix`` -- the nested double integral giving the gate angle;
* ``infidelity_matrix`` -- the positive-semidefinite infidelity form.

Qubit labels are 1-based and resolved through ``ModeData.qubit_window``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "SpectralError",
    "ConstraintMatrix",
    "KernelMatrix",
    "InfidelityMatrix",
    "sine_moment",
    "c_integral",
    "overlap_table",
    "constraint_matrix",
    "mode_kernel",
    "kernel_matrix",
    "infidelity_matrix",
    "infidelity_factor",
    "NEAR_RESONANCE",
]

# ``|w tau / 2 pi - n|`` below this counts as resonant. The series branch of
# ``_unit_moment`` covers a much wider band, so this is informational.
NEAR_RESONANCE = 1e-6

_SERIES_TERMS = 60


class SpectralError(ValueError):
    """Invalid argument to a spectral builder."""


# ---------------------------------------------------------------------------
# scalar building blocks


def _phi1(x):
    """(e^{ix} - 1) / (ix) for real ``x``, accurate for all ``x``."""
    x = np.asarray(x, dtype=float)
    s = np.sinc(x / (2.0 * np.pi))  # sin(x/2) / (x/2)
    # real: sin x / x = cos(x/2) s ; imag: (1 - cos x)/x = (x/2) s^2
    return np.cos(0.5 * x) * s + 1j * (0.5 * x) * s * s


def _unit_moment(k, beta):
    """``int_0^1 u^k e^{i beta u} du`` elementwise over real ``beta``.

    Upward recursion in ``k`` is stable once ``|beta| > k``; below that a
    power series in ``beta`` is used (this covers the resonant point
    ``beta = 0``).
    """
    beta = np.asarray(beta, dtype=float)
    out = np.empty(beta.shape, dtype=complex)
    if k == 0:
        out[...] = _phi1(beta)
        return out
    small = np.abs(beta) <= max(k, 1)
    if np.any(small):
        b = beta[small]
        term = np.ones_like(b, dtype=complex)  # (i b)^m / m!
        acc = term / (k + 1)
        for m in range(1, _SERIES_TERMS):
            term = term * (1j * b) / m
            acc = acc + term / (k + m + 1)
            if np.all(np.abs(term) < 1e-18 * np.maximum(np.abs(acc), 1e-300)):
                break
        out[small] = acc
    big = ~small
    if np.any(big):
        b = beta[big]
        e = np.exp(1j * b)
        j = _phi1(b)
        for m in range(1, k + 1):
            j = (e - m * j) / (1j * b)
        out[big] = j
    return out


def sine_moment(n, omega, tau, k=0, upper=None):
    """``int_0^T (i t)^k sin(2 pi n t / tau) e^{i omega t} dt`` with ``T = upper``.

    ``n`` and ``omega`` broadcast against each other. ``upper`` defaults to
    ``tau``. With ``k > 0`` this is the k-th omega-derivative of the
    ``k = 0`` value.
    """
    if tau <= 0:
        raise SpectralError("tau must be positive")
    if k < 0:
        raise SpectralError("derivative order must be >= 0")
    T = tau if upper is None else float(upper)
    n = np.asarray(n, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if T == 0:
        return np.zeros(np.broadcast(n, omega).shape, dtype=complex)
    a = 2.0 * np.pi * n / tau
    # sin(at) = (e^{iat} - e^{-iat}) / 2i
    jp = _unit_moment(k, (omega + a) * T)
    jm = _unit_moment(k, (omega - a) * T)
    return (1j**k) * T ** (k + 1) * (jp - jm) / 2j


def c_integral(n, omega, tau, k=0):
    """Mode overlap ``int_0^tau (i t)^k sin(2 pi n t/tau) e^{i omega t} dt``.

    >>> abs(c_integral(3, 2 * math.pi * 3 / 1e-4, 1e-4) - 0.5e-4j) < 1e-18
    True
    """
    if np.any(np.asarray(n) < 1):
        raise SpectralError("basis index n must be >= 1")
    val = sine_moment(n, omega, tau, k)
    return complex(val) if val.ndim == 0 else val


def overlap_table(frequencies, tau, n_basis, k=0, upper=None):
    """``C[n-1, p]`` for n = 1..n_basis and every mode frequency (N_A x N)."""
    n = np.arange(1, n_basis + 1, dtype=float)[:, None]
    w = np.asarray(frequencies, dtype=float)[None, :]
    return sine_moment(n, w, tau, k, upper)


# ---------------------------------------------------------------------------
# constraint matrix


@dataclass(frozen=True, eq=False)
class ConstraintMatrix:
    """Real stacking of the stabilised closure conditions.

    Row ``2 * (k * N + p) + r`` holds ``-Re`` (r = 0) or ``-Im`` (r = 1) of
    the k-th omega-derivative of the overlap of mode ``p`` (0-based) with
    each basis function. Entries of order-k rows carry units of s^(k+1).
    """

    rows: np.ndarray
    tau: float
    stabilization_order: int
    mode_count: int

    @property
    def n_basis(self):
        return self.rows.shape[1]

    def row_index(self, p, k, imag=False):
        return 2 * (k * self.mode_count + p) + int(imag)

    def order_of_rows(self):
        """Derivative order of each row."""
        return np.repeat(np.arange(self.stabilization_order + 1), 2 * self.mode_count)

    def balanced(self):
        """Rows rescaled to be dimensionless (order-k rows divided by tau^(k+1))."""
        scale = self.tau ** (self.order_of_rows() + 1.0)
        return self.rows / scale[:, None]


def constraint_matrix(modes, tau, K, n_basis):
    """Stabilised closure conditions as a ``2 N (K+1) x N_A`` real matrix.

    The Lamb-Dicke prefactor is left out: for non-zero couplings it does
    not change the null space, and it makes the rows ion-independent.
    """
    if tau <= 0:
        raise SpectralError("tau must be positive")
    if K < 0:
        raise SpectralError("stabilization order K must be >= 0")
    n_modes = modes.mode_count
    need = 2 * n_modes * (K + 1) + 1
    if n_basis < need:
        raise SpectralError(
            f"N_A={n_basis} leaves no null space for {n_modes} modes at K={K}; "
            f"need N_A >= {need}"
        )
    rows = np.empty((2 * n_modes * (K + 1), n_basis))
    for k in range(K + 1):
        c = overlap_table(modes.frequencies, tau, n_basis, k)  # N_A x N
        block = -c.T  # N x N_A
        rows[2 * k * n_modes:2 * (k + 1) * n_modes:2] = block.real
        rows[2 * k * n_modes + 1:2 * (k + 1) * n_modes:2] = block.imag
    rows.setflags(write=False)
    return ConstraintMatrix(rows=rows, tau=float(tau), stabilization_order=int(K),
                            mode_count=n_modes)


# ---------------------------------------------------------------------------
# entangling kernel


def _dd2(x0, x1, x2):
    """Second divided difference of exp at nodes ``i x0, i x1, i x2``.

    Equals the integral of ``exp`` over the 2-simplex. Nodes more than 0.5
    apart use the recursive definition with the widest pair in the
    denominator; clustered nodes use a Taylor series about their centroid.
    """
    x0, x1, x2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x0, x1, x2)))
    lo = np.minimum(np.minimum(x0, x1), x2)
    hi = np.maximum(np.maximum(x0, x1), x2)
    mid = x0 + x1 + x2 - lo - hi
    width = hi - lo
    out = np.empty(lo.shape, dtype=complex)

    wide = width > 0.5
    if np.any(wide):
        l, m, h = lo[wide], mid[wide], hi[wide]
        d_lm = np.exp(1j * l) * _phi1(m - l)
        d_mh = np.exp(1j * m) * _phi1(h - m)
        out[wide] = (d_lm - d_mh) / (1j * (l - h))

    tight = ~wide
    if np.any(tight):
        c = (lo[tight] + mid[tight] + hi[tight]) / 3.0
        y0, y1, y2 = lo[tight] - c, mid[tight] - c, hi[tight] - c
        # h_m: complete homogeneous symmetric polynomials of (y0, y1, y2)
        p0 = np.ones_like(y0)
        h2 = np.ones_like(y0)
        h3 = np.ones_like(y0)
        acc = 0.5 * h3.astype(complex)
        fact = 2.0
        im = 1.0 + 0j
        for m in range(1, 30):
            p0 = p0 * y0
            h2 = p0 + y1 * h2
            h3 = h2 + y2 * h3
            fact *= m + 2
            im *= 1j
            term = im * h3 / fact
            acc = acc + term
            if np.all(np.abs(term) < 1e-18):
                break
        out[tight] = np.exp(1j * c) * acc
    return out


def _q(x):
    """(1 - sin(x)/x) / x, accurate near 0."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 0.5
    xs = x[small]
    x2 = xs * xs
    # x/3! - x^3/5! + x^5/7! - ...
    term = xs / 6.0
    acc = term.copy()
    for j in range(1, 9):
        term = -term * x2 / ((2 * j + 2) * (2 * j + 3))
        acc += term
    out[small] = acc
    xb = x[~small]
    out[~small] = (1.0 - np.sin(xb) / xb) / xb
    return out


def _mode_kernel_periodic(omega, T, rates):
    """Kernel when ``T`` spans whole basis periods (``a_n T`` in 2 pi Z).

    The inner integral is a sine-sine convolution, which collapses the
    triangle integral to
    ``w T delta_nm / (2 (w^2 - a_m^2)) - a_n a_m sin(w T) / ((w^2 - a_n^2)(w^2 - a_m^2))``.
    Factors that vanish at resonance are rewritten with ``sin(w T) =
    sin((w - a) T)`` so both branches stay accurate there.
    """
    a = rates
    delta = omega - a
    near = np.abs(delta * T) <= 1.0
    swT = math.sin(omega * T)
    # r_n = sin(wT) / (w^2 - a_n^2), regular at resonance
    r = np.empty_like(a)
    r[near] = T * np.sinc(delta[near] * T / np.pi) / (omega + a[near])
    r[~near] = swT / ((omega - a[~near]) * (omega + a[~near]))
    inv = np.empty_like(a)  # 1 / (w^2 - a^2) where safe
    inv[~near] = 1.0 / ((omega - a[~near]) * (omega + a[~near]))

    n_basis = a.size
    out = np.empty((n_basis, n_basis))
    # off-diagonal: -a_n a_m sin(wT)/((w^2-a_n^2)(w^2-a_m^2)); use r on the
    # resonant factor (at most one of n, m can be resonant when |dT| <= 1)
    an = a[:, None]
    am = a[None, :]
    rn = r[:, None]
    rm = r[None, :]
    inv_n = inv[:, None]
    inv_m = inv[None, :]
    near_n = near[:, None]
    near_m = near[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        both_far = -an * am * rn * inv_m
        n_near = -an * am * rn * np.where(near_m, 0.0, inv_m)
        m_near = -an * am * rm * np.where(near_n, 0.0, inv_n)
    out[...] = np.where(near_n, n_near, np.where(near_m, m_near, both_far))
    # pairs with both factors near resonance only occur off the diagonal when
    # a_n T and a_m T differ by 2 pi < 2, impossible, so only n == m remains
    d = np.empty(n_basis)
    s = omega + a
    dn = delta[near]
    d[near] = T * (1.5 * a[near] + 0.5 * dn + a[near] ** 2 * T * _q(dn * T)) / s[near] ** 2
    far = ~near
    d[far] = omega * T * 0.5 * inv[far] - a[far] ** 2 * r[far] * inv[far]
    out[np.diag_indices(n_basis)] = d
    return out


def _mode_kernel_general(omega, tau, n_basis, T):
    n = np.arange(1, n_basis + 1, dtype=float)
    phase_n = (2.0 * np.pi * T / tau) * n  # a_n T
    wT = omega * T
    acc = np.zeros((n_basis, n_basis), dtype=complex)
    for s1 in (1.0, -1.0):
        x1 = (s1 * phase_n + wT)[:, None]  # outer (t2) exponent times T
        for s2 in (1.0, -1.0):
            x2 = s1 * phase_n[:, None] + s2 * phase_n[None, :]
            acc += (s1 * s2) * _dd2(0.0, x1, x2)
    return -0.25 * T * T * acc.imag


def _mode_kernel_uncached(omega, tau, n_basis, upper):
    periods = upper / tau
    if abs(periods - round(periods)) < 1e-12 and round(periods) >= 1:
        rates = 2.0 * np.pi * np.arange(1, n_basis + 1, dtype=float) / tau
        out = _mode_kernel_periodic(omega, upper, rates)
    else:
        out = _mode_kernel_general(omega, tau, n_basis, upper)
    out.setflags(write=False)
    return out


_mode_kernel_cached = lru_cache(maxsize=48)(_mode_kernel_uncached)


def mode_kernel(omega, tau, n_basis, upper=None, cache=True):
    """Single-mode kernel (unit coupling), ``N_A x N_A``, units s^2.

    Entry ``[n-1, m-1]`` is the triangle integral over
    ``0 <= t1 <= t2 <= T`` of
    ``sin(a_n t2) sin(a_m t1) sin(omega (t2 - t1))`` with ``a_n = 2 pi n / tau``.
    Results are read-only; ``cache=False`` skips the small LRU cache (for
    one-off frequencies such as drift scans).
    """
    T = float(tau if upper is None else upper)
    fn = _mode_kernel_cached if cache else _mode_kernel_uncached
    return fn(float(omega), float(tau), int(n_basis), T)


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Gate-angle bilinear form for one qubit pair: ``chi = A^T K A``."""

    entries: np.ndarray
    pair: tuple[int, int]
    tau: float
    upper: float

    @property
    def symmetric(self):
        return 0.5 * (self.entries + self.entries.T)


def _check_pair(modes, i, j):
    if i == j:
        raise SpectralError("the two qubits of a gate must differ")
    return modes.ion_of_qubit(i), modes.ion_of_qubit(j)


def kernel_matrix(modes, i, j, tau, n_basis, upper=None):
    """Entangling kernel of qubits ``i, j``: sum of mode kernels weighted by
    ``eta_p^i eta_p^j``, accumulated in ascending mode order."""
    if tau <= 0:
        raise SpectralError("tau must be positive")
    ci, cj = _check_pair(modes, i, j)
    weights = modes.eta[:, ci] * modes.eta[:, cj]
    T = float(tau if upper is None else upper)
    total = np.zeros((n_basis, n_basis))
    for w, omega in zip(weights, modes.frequencies):
        if w != 0.0:
            total += w * mode_kernel(omega, tau, n_basis, T)
    return KernelMatrix(entries=total, pair=(i, j), tau=float(tau), upper=T)


# ---------------------------------------------------------------------------
# infidelity


@dataclass(frozen=True, eq=False)
class InfidelityMatrix:
    """``f(A) = (4/5) A^T F A`` at zero drift and zero temperature."""

    entries: np.ndarray
    pair: tuple[int, int]
    tau: float
    factor: np.ndarray  # G with F = G G^T, shape N_A x 2N

    def value(self, amplitudes):
        """(4/5) A^T F A evaluated as (4/5) |G^T A|^2."""
        r = self.factor.T @ np.asarray(amplitudes, dtype=float)
        return 0.8 * float(r @ r)


def infidelity_factor(modes, i, j, tau, n_basis):
    """Real factor ``G = [Re C sqrt(D), Im C sqrt(D)]`` with ``F = G G^T``."""
    ci, cj = _check_pair(modes, i, j)
    d = modes.eta[:, ci] ** 2 + modes.eta[:, cj] ** 2
    c = overlap_table(modes.frequencies, tau, n_basis)
    root = np.sqrt(d)[None, :]
    return np.hstack([c.real * root, c.imag * root])


def infidelity_matrix(modes, i, j, tau, n_basis):
    """``F_nm = sum_p [(eta_p^i)^2 + (eta_p^j)^2] Re(C_np conj(C_mp))``."""
    g = infidelity_factor(modes, i, j, tau, n_basis)
    f = g @ g.T
    f = 0.5 * (f + f.T)
    return InfidelityMatrix(entries=f, pair=(i, j), tau=float(tau), factor=g)
