"""Adaptive-quadrature reference values for the closed forms in ``spectral``.

Nothing here reuses the closed-form machinery: integrands are evaluated
pointwise and integrated with QUADPACK's adaptive Gauss-Kronrod rule over
short panels (about one oscillation period each). Work is done in the
dimensionless time ``u = t / T``.

Phases such as ``omega * t`` reach several thousand radians, so forming
them in double precision would cost ~1e-13 absolute accuracy. Each panel
instead gets its starting phase reduced in extended precision and the
integrand only ever sees the small in-panel phase.
"""

import math
import warnings

import numpy as np
from scipy import integrate

__all__ = [
    "QuadratureError",
    "quadrature_oracle",
    "c_integral_quad",
    "kernel_entry_quad",
    "ABS_TOL",
    "REL_TOL",
]

ABS_TOL = 1e-12
REL_TOL = 1e-10

_PANEL_EPSABS = 1e-19
_PANEL_EPSREL = 1e-14


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""


def _panels(max_rate):
    count = max(1, int(math.ceil(max_rate / (2.0 * math.pi))))
    return [i / count for i in range(count + 1)]


def _sincos(rate, u0):
    # sin/cos of rate * u0 with the product formed in extended precision
    ph = np.longdouble(rate) * np.longdouble(u0)
    return float(np.sin(ph)), float(np.cos(ph))


class _Tone:
    """sin and cos of ``rate * (u0 + v)`` for a fixed panel start ``u0``."""

    __slots__ = ("rate", "s0", "c0")

    def __init__(self, rate, u0):
        self.rate = rate
        self.s0, self.c0 = _sincos(rate, u0)

    def sin(self, v):
        x = self.rate * v
        return self.s0 * math.cos(x) + self.c0 * math.sin(x)

    def cos(self, v):
        x = self.rate * v
        return self.c0 * math.cos(x) - self.s0 * math.sin(x)


def _quad(f, a, b, epsabs=_PANEL_EPSABS, epsrel=_PANEL_EPSREL):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, a, b, epsabs=epsabs, epsrel=epsrel, limit=200)
        except integrate.IntegrationWarning as exc:
            # roundoff-limited panels are fine once the estimate is tiny
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                val, err = integrate.quad(f, a, b, epsabs=epsabs, epsrel=epsrel, limit=200)
            # QUADPACK reports a roundoff floor of a few 1e-15 per unit length
            if err > 1e-13 * abs(b - a):
                raise QuadratureError(f"quadrature did not converge on [{a}, {b}]: {exc}") from None
    return val, err


def _check(val, err, epsabs, epsrel):
    if err > max(epsabs, epsrel * abs(val)):
        raise QuadratureError(
            f"error estimate {err:.3g} exceeds tolerance "
            f"max({epsabs:.1g}, {epsrel:.1g}*|value|)"
        )


def c_integral_quad(n, omega, tau, k=0, upper=None, epsabs=ABS_TOL, epsrel=REL_TOL):
    """``int_0^T (i t)^k sin(2 pi n t/tau) e^{i omega t} dt`` by quadrature."""
    T = tau if upper is None else upper
    a = 2.0 * math.pi * n * T / tau
    w = omega * T
    edges = _panels(abs(a) + abs(w) + 1.0)
    re_parts, im_parts, errs = [], [], []
    for u0, u1 in zip(edges[:-1], edges[1:]):
        basis = _Tone(a, u0)
        mode = _Tone(w, u0)

        def re(v):
            return (u0 + v) ** k * basis.sin(v) * mode.cos(v)

        def im(v):
            return (u0 + v) ** k * basis.sin(v) * mode.sin(v)

        vr, er = _quad(re, 0.0, u1 - u0)
        vi, ei = _quad(im, 0.0, u1 - u0)
        re_parts.append(vr)
        im_parts.append(vi)
        errs.append(math.hypot(er, ei))
    val = complex(math.fsum(re_parts), math.fsum(im_parts))
    _check(val, math.fsum(errs), epsabs, epsrel)
    return (1j**k) * T ** (k + 1) * val


def kernel_entry_quad(n, m, omega, tau, upper=None, epsabs=ABS_TOL, epsrel=REL_TOL):
    """Single-mode kernel entry by iterated quadrature over the triangle.

    ``int_0^T dt2 int_0^t2 dt1 sin(a_n t2) sin(a_m t1) sin(omega (t2 - t1))``.
    The inner integral is a running sum over whole panels plus one adaptive
    piece, so every quadrature call sees a smooth integrand.
    """
    T = tau if upper is None else upper
    an = 2.0 * math.pi * n * T / tau
    am = 2.0 * math.pi * m * T / tau
    w = omega * T
    edges = _panels(max(an, am) + abs(w) + 1.0)

    # sin(w(u2-u1)) = sin(w u2) cos(w u1) - cos(w u2) sin(w u1)
    def inner_pair(u0, length):
        bm = _Tone(am, u0)
        md = _Tone(w, u0)
        ic = _quad(lambda v: bm.sin(v) * md.cos(v), 0.0, length)[0]
        is_ = _quad(lambda v: bm.sin(v) * md.sin(v), 0.0, length)[0]
        return ic, is_

    cum_c, cum_s = [0.0], [0.0]
    parts_c, parts_s = [], []
    for u0, u1 in zip(edges[:-1], edges[1:]):
        ic, is_ = inner_pair(u0, u1 - u0)
        parts_c.append(ic)
        parts_s.append(is_)
        cum_c.append(math.fsum(parts_c))
        cum_s.append(math.fsum(parts_s))

    pieces, errs = [], []
    for idx, (u0, u1) in enumerate(zip(edges[:-1], edges[1:])):
        base_c, base_s = cum_c[idx], cum_s[idx]
        bn = _Tone(an, u0)
        md = _Tone(w, u0)

        def outer(v):
            ic, is_ = inner_pair(u0, v) if v > 0 else (0.0, 0.0)
            return bn.sin(v) * (md.sin(v) * (base_c + ic) - md.cos(v) * (base_s + is_))

        val, err = _quad(outer, 0.0, u1 - u0)
        pieces.append(val)
        errs.append(err)
    total = math.fsum(pieces)
    _check(total, math.fsum(errs), epsabs, epsrel)
    return T * T * total


def quadrature_oracle(kind, **params):
    """Dispatch: ``kind`` is ``"c_integral"`` or ``"kernel_entry"``.

    ``c_integral`` takes ``n, omega, tau, k``; ``kernel_entry`` takes
    ``n, m, omega, tau``. Optional ``epsabs``/``epsrel`` override the
    defaults (1e-12 absolute in scaled units, 1e-10 relative).
    """
    if kind == "c_integral":
        return c_integral_quad(**params)
    if kind == "kernel_entry":
        return kernel_entry_quad(**params)
    raise ValueError(f"unknown oracle kind {kind!r}")
