import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amfm import spectral
from amfm.chain import ModeData
from amfm.oracle import c_integral_quad, kernel_entry_quad
from amfm.spectral import SpectralError, c_integral, constraint_matrix, infidelity_matrix, kernel_matrix

TAU = 120e-6


def one_mode(f_hz, eta=0.1, ions=2):
    return ModeData(frequencies=[2 * math.pi * f_hz], eta=[[eta] * ions])


# -- overlap integrals -------------------------------------------------------


def test_zero_frequency_overlap_vanishes():
    assert abs(c_integral(1, 0.0, 100e-6)) < 1e-20


def test_resonant_overlap_is_half_tau():
    tau = 100e-6
    val = c_integral(3, 2 * math.pi * 3 / tau, tau)
    assert val.real == pytest.approx(0.0, abs=1e-19)
    assert val.imag == pytest.approx(5.0e-5, rel=1e-14)


def test_second_derivative_overlap_against_quadrature():
    args = (2, 2 * math.pi * 2.7e6, 80e-6, 2)
    ref = c_integral_quad(*args)
    assert abs(c_integral(*args) - ref) <= 1e-10 * abs(ref)


def test_overlap_rejects_bad_arguments():
    with pytest.raises(SpectralError):
        c_integral(0, 1.0, 1e-4)
    with pytest.raises(SpectralError):
        c_integral(1, 1.0, -1e-4)
    with pytest.raises(SpectralError):
        c_integral(1, 1.0, 1e-4, k=-1)


@pytest.mark.parametrize("k", [0, 1, 3, 6])
def test_overlap_continuous_across_resonance(k):
    n, tau = 17, 90e-6
    w0 = 2 * math.pi * n / tau
    for off in np.linspace(-1e-5, 1e-5, 7):
        w = w0 + off * 2 * math.pi / tau
        ref = c_integral_quad(n, w, tau, k)
        assert abs(c_integral(n, w, tau, k) - ref) <= 1e-10 * abs(ref)


@pytest.mark.parametrize("k", [1, 2, 5])
def test_series_and_recursion_branches_agree(k):
    # the two evaluation branches meet at |(w - a) T| = k
    n, tau = 40, 50e-6
    a = 2 * math.pi * n / tau
    inner = c_integral(n, a + k * (1 - 1e-13) / tau, tau, k)
    outer = c_integral(n, a + k * (1 + 1e-13) / tau, tau, k)
    assert abs(inner - outer) <= 1e-10 * abs(inner)


params = st.tuples(
    st.integers(1, 300),
    st.floats(2 * math.pi * 0.05e6, 2 * math.pi * 4e6),
    st.floats(10e-6, 300e-6),
    st.integers(1, 6),
)


@settings(max_examples=60, deadline=None)
@given(params)
def test_derivative_matches_central_difference(p):
    n, w, tau, k = p
    h = 2 * math.pi * 1.0
    lo, hi = c_integral(n, w - h, tau, k - 1), c_integral(n, w + h, tau, k - 1)
    # d/dw of int (it)^(k-1) ... is int (it)^k ...
    fd = (hi - lo) / (2 * h)
    exact = c_integral(n, w, tau, k)
    scale = max(abs(exact), 1e-3 * tau * abs(c_integral(n, w, tau, k - 1)))
    assert abs(fd - exact) <= 1e-6 * scale


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 200), st.floats(2 * math.pi * 0.1e6, 2 * math.pi * 4e6),
       st.floats(10e-6, 200e-6), st.floats(0.25, 4.0))
def test_overlap_dimensional_scaling(n, w, tau, c):
    # substituting t = c s: stretching the window by c is compressing frequency by c
    lhs = c_integral(n, w, c * tau)
    rhs = c * c_integral(n, c * w, tau)
    assert abs(lhs - rhs) <= 1e-10 * abs(lhs) + phase_rounding(n, w, c * tau)


def phase_rounding(n, w, T):
    """Absolute error from an ulp in the phase w T of the exponential terms.

    Near whole turns the terms cancel and the overlap becomes ill-conditioned
    in its arguments, so the two sides of an identity can differ by this much.
    """
    a = 2 * math.pi * n / T
    terms = sum(min(1 / abs(w + s * a), T) if w != -s * a else T for s in (1, -1))
    return 64 * np.finfo(float).eps * w * T * terms


def test_partial_window_moment_against_quadrature():
    val = spectral.sine_moment(5, 2 * math.pi * 1.3e6, 40e-6, 2, upper=27e-6)
    ref = c_integral_quad(5, 2 * math.pi * 1.3e6, 40e-6, 2, upper=27e-6)
    assert abs(val - ref) <= 1e-10 * abs(ref)


# -- constraint matrix -------------------------------------------------------


def test_constraint_rows_single_mode():
    modes = one_mode(2.9e6)
    M = constraint_matrix(modes, TAU, 0, 10)
    c = np.array([c_integral(n, modes.frequencies[0], TAU) for n in range(1, 11)])
    assert M.rows.shape == (2, 10)
    np.testing.assert_array_equal(M.rows[0], -c.real)
    np.testing.assert_array_equal(M.rows[1], -c.imag)


def test_constraint_derivative_rows_by_finite_difference(umd7):
    h = 2 * math.pi * 1.0
    N, NA = umd7.mode_count, 60
    M = constraint_matrix(umd7, TAU, 1, NA)
    for p in range(N):
        w = umd7.frequencies[p]
        shifted = [
            ModeData(frequencies=[w + s], eta=[[0.1]]) for s in (-h, h)
        ]
        lo, hi = (constraint_matrix(m, TAU, 0, NA).rows for m in shifted)
        fd = (hi - lo) / (2 * h)
        got = M.rows[[M.row_index(p, 1, False), M.row_index(p, 1, True)]]
        # one part can nearly vanish when w tau sits close to a multiple of 2 pi,
        # so the scale is that of the complex row
        assert np.max(np.abs(got - fd)) <= 1e-6 * np.max(np.abs(got))


def test_constraint_shape_umd7(umd7):
    M = constraint_matrix(umd7, TAU, 4, 300)
    assert M.rows.shape == (70, 300)
    assert np.all(np.isfinite(M.rows))
    assert list(np.unique(M.order_of_rows())) == [0, 1, 2, 3, 4]


def test_constraint_sizing_error(umd7):
    with pytest.raises(SpectralError, match="need N_A >= 29"):
        constraint_matrix(umd7, TAU, 1, 20)


# -- kernel ------------------------------------------------------------------


def test_kernel_zero_coupling_is_zero():
    modes = ModeData(frequencies=[1e7, 2e7], eta=np.zeros((2, 2)))
    assert not np.any(kernel_matrix(modes, 1, 2, TAU, 20).entries)


def test_kernel_zero_frequency_is_zero():
    # the model needs positive frequencies, so test the single-mode kernel directly
    K = spectral.mode_kernel(0.0, TAU, 12, cache=False)
    assert np.max(np.abs(K)) < 1e-30


def test_kernel_rejects_same_qubit(umd7):
    with pytest.raises(SpectralError):
        kernel_matrix(umd7, 3, 3, TAU, 20)


def test_kernel_entry_umd7_against_triangle_quadrature(umd7):
    n, m = 11, 12
    K = kernel_matrix(umd7, 4, 5, TAU, 12).entries
    ci, cj = umd7.ion_of_qubit(4), umd7.ion_of_qubit(5)
    ref = math.fsum(
        umd7.eta[p, ci] * umd7.eta[p, cj] * kernel_entry_quad(n, m, umd7.frequencies[p], TAU)
        for p in range(umd7.mode_count)
    )
    assert abs(K[n - 1, m - 1] - ref) <= 1e-8 * abs(ref)


@pytest.mark.parametrize("n,m,scale", [(3, 8, 0.61), (4, 4, 2.0), (9, 2, 1.37)])
def test_general_window_kernel_against_quadrature(n, m, scale):
    tau, w = 30e-6, 2 * math.pi * 0.83e6
    K = spectral.mode_kernel(w, tau, 10, upper=scale * tau, cache=False)
    ref = kernel_entry_quad(n, m, w, tau, upper=scale * tau)
    assert abs(K[n - 1, m - 1] - ref) <= 1e-8 * abs(ref)


def test_periodic_and_general_kernels_agree():
    tau, w = 25e-6, 2 * math.pi * 1.91e6
    per = spectral._mode_kernel_periodic(w, tau, 2 * np.pi * np.arange(1, 61) / tau)
    gen = spectral._mode_kernel_general(w, tau, 60, tau)
    assert np.max(np.abs(per - gen)) <= 1e-10 * np.max(np.abs(per))


def test_resonant_kernel_diagonal_against_quadrature():
    tau, n = 20e-6, 7
    w = 2 * math.pi * n / tau * (1 + 1e-9)
    K = spectral.mode_kernel(w, tau, 8, cache=False)
    ref = kernel_entry_quad(n, n, w, tau)
    assert abs(K[n - 1, n - 1] - ref) <= 1e-8 * abs(ref)


def test_kernel_cache_is_read_only():
    K = spectral.mode_kernel(2 * math.pi * 2.0e6, TAU, 8)
    with pytest.raises(ValueError):
        K[0, 0] = 1.0


# -- infidelity matrix -------------------------------------------------------


def test_infidelity_zero_coupling_is_zero():
    modes = ModeData(frequencies=[1e7, 2e7], eta=np.zeros((2, 2)))
    assert not np.any(infidelity_matrix(modes, 1, 2, TAU, 20).entries)


def test_infidelity_matches_direct_sum(umd7):
    rng = np.random.default_rng(3)
    NA = 120
    A = rng.normal(size=NA)
    F = infidelity_matrix(umd7, 4, 5, TAU, NA)
    ci, cj = umd7.ion_of_qubit(4), umd7.ion_of_qubit(5)
    direct = []
    for p, w in enumerate(umd7.frequencies):
        alpha = sum(A[n - 1] * c_integral(n, w, TAU) for n in range(1, NA + 1))
        direct.append((umd7.eta[p, ci] ** 2 + umd7.eta[p, cj] ** 2) * abs(alpha) ** 2)
    ref = 0.8 * math.fsum(direct)
    assert 0.8 * A @ F.entries @ A == pytest.approx(ref, rel=1e-12)
    assert F.value(A) == pytest.approx(ref, rel=1e-12)


def test_infidelity_vanishes_on_null_space(umd7):
    NA = 200
    M = constraint_matrix(umd7, TAU, 2, NA).balanced()
    _, s, vt = np.linalg.svd(M)
    null = vt[np.sum(s > 1e-20 * s[0]):]
    F = infidelity_matrix(umd7, 4, 5, TAU, NA).entries
    norm = np.linalg.norm(F, 2)
    for A in null[:5]:
        assert A @ F @ A <= 1e-18 * (A @ A) * norm


@settings(max_examples=20, deadline=None)
@given(st.floats(10e-6, 250e-6), st.integers(30, 200), st.sampled_from([(1, 2), (2, 5), (3, 4)]))
def test_infidelity_matrix_is_psd(tau, na, pair):
    from amfm import preset

    modes = preset("umd7")[1]
    F = infidelity_matrix(modes, *pair, tau, na).entries
    assert np.max(np.abs(F - F.T)) <= 1e-12 * np.max(np.abs(F))
    ev = np.linalg.eigvalsh(F)
    assert ev.min() >= -1e-12 * np.trace(F) / na
