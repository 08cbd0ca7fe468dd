import json
import math

import numpy as np
import pytest
import scipy.constants as sc
from hypothesis import given, settings
from hypothesis import strategies as st

from amfm import chain
from amfm.chain import ChainConfig, ChainError, ModeData, UnstableChainError, preset, solve_transverse_modes
from amfm.constants import RAMAN_DELTA_K, YB171_MASS

TOP = 2 * math.pi * 3.054e6


def uniform(n, spacing=5e-6, omega=TOP, **kw):
    pos = (np.arange(n) - (n - 1) / 2) * spacing
    return ChainConfig(positions=pos, transverse_confinement=np.full(n, omega), **kw)


def test_single_ion_matches_independent_constants():
    modes = solve_transverse_modes(uniform(1))
    assert modes.frequencies[0] == pytest.approx(TOP, rel=1e-15)
    assert modes.mode_vectors.tolist() == [[1.0]]
    # independent arithmetic with scipy's constants table
    m = 170.936330208 * sc.atomic_mass - sc.m_e
    eta = (4 * math.pi / 355e-9) * math.sqrt(sc.hbar / (2 * m * TOP))
    assert modes.eta[0, 0] == pytest.approx(eta, rel=1e-7)
    assert modes.eta[0, 0] == pytest.approx(0.110, abs=5e-4)


@pytest.mark.parametrize("n", [2, 5, 15])
def test_uniform_chain_top_mode_is_center_of_mass(n):
    modes = solve_transverse_modes(uniform(n))
    assert modes.frequencies[-1] == pytest.approx(TOP, rel=1e-12)
    np.testing.assert_allclose(modes.mode_vectors[-1], np.full(n, 1 / math.sqrt(n)), atol=1e-10)


def test_uniform_chain_noncom_modes_sum_to_zero():
    modes = solve_transverse_modes(uniform(9))
    sums = modes.mode_vectors.sum(axis=1)
    np.testing.assert_allclose(sums[:-1], 0.0, atol=1e-10)


def test_coupling_table_against_direct_construction():
    cfg = uniform(4, spacing=4e-6)
    x = cfg.positions
    c = sc.e**2 / (4 * math.pi * sc.epsilon_0 * YB171_MASS)
    A = np.zeros((4, 4))
    for i in range(4):
        for j in range(4):
            if i != j:
                A[i, j] = c / abs(x[i] - x[j]) ** 3
        A[i, i] = TOP**2 - A[i].sum()
    modes = solve_transverse_modes(cfg)
    np.testing.assert_allclose(modes.frequencies, np.sqrt(np.linalg.eigvalsh(A)), rtol=1e-9)


def test_sign_convention_first_component_nonnegative():
    modes = solve_transverse_modes(uniform(6))
    for row in modes.mode_vectors:
        nz = row[np.abs(row) > 1e-12]
        assert nz[0] > 0


def test_unstable_chain_names_mode():
    cfg = uniform(3, spacing=0.5e-6, omega=2 * math.pi * 0.2e6)
    with pytest.raises(UnstableChainError) as err:
        solve_transverse_modes(cfg)
    assert err.value.mode_index == 1
    assert "mode 1" in str(err.value)


@pytest.mark.parametrize(
    "kw",
    [
        dict(positions=[0.0, 0.0], transverse_confinement=[1.0, 1.0]),
        dict(positions=[0.0, 1e-6], transverse_confinement=[1.0, -1.0]),
        dict(positions=[0.0], transverse_confinement=[1.0], ion_mass=0.0),
        dict(positions=[0.0], transverse_confinement=[1.0], raman_delta_k=0.0),
        dict(positions=[0.0, 1e-6], transverse_confinement=[1.0, 1.0], qubit_window=(2, 2)),
    ],
)
def test_config_rejects_invalid_fields(kw):
    with pytest.raises(ChainError):
        ChainConfig(**kw)


def test_umd7_matches_measured_table(umd7):
    hz = umd7.frequencies / (2 * math.pi)
    np.testing.assert_allclose(hz, chain.UMD7_TABLE_HZ, atol=1e3)
    assert hz[-1] == pytest.approx(3.054e6, abs=1e3)


def test_umd7_refit_reproduces_frozen_layout():
    pos, conf, info = chain.fit_symmetric_chain(2 * math.pi * np.array(chain.UMD7_TABLE_HZ))
    assert info["max_abs_error_hz"] < 1.0
    np.testing.assert_allclose(np.diff(pos), chain._UMD7_GAPS, rtol=1e-6)


def test_umd7_qubit_window(umd7):
    assert umd7.qubit_window == (2, 5)
    assert [umd7.ion_of_qubit(q) for q in range(1, 6)] == [1, 2, 3, 4, 5]  # ions 2..6, 0-based
    with pytest.raises(ChainError):
        umd7.ion_of_qubit(6)


def test_chain15_preset(chain15):
    f = chain15.frequencies
    assert f.size == 15 and np.all(np.diff(f) > 0)
    assert f[-1] == pytest.approx(TOP, rel=1e-12)
    assert chain15.qubit_count == 11
    assert "assumption" in chain15.metadata


def test_unknown_preset():
    with pytest.raises(ChainError):
        preset("nope")


def test_mode_file_round_trip(umd7):
    d = json.loads(json.dumps(umd7.to_dict()))
    back = ModeData.from_dict(d)
    assert back.fingerprint() == umd7.fingerprint()
    np.testing.assert_array_equal(back.eta, umd7.eta)
    assert d["frequencies_hz"][-1] == pytest.approx(3.054e6, abs=1e3)


def test_mode_file_validation():
    with pytest.raises(ChainError):
        ModeData.from_dict({"eta": [[0.1]]})
    with pytest.raises(ChainError):
        ModeData(frequencies=[2.0, 1.0], eta=[[0.1], [0.1]])
    with pytest.raises(ChainError):
        ModeData(frequencies=[1.0, 2.0], eta=[[0.1], [0.1]], mode_vectors=[[1, 1], [0, 1]])


def test_config_round_trip():
    cfg = uniform(3, qubit_window=(1, 2))
    back = ChainConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    np.testing.assert_array_equal(back.positions, cfg.positions)
    assert back.qubit_window == (1, 2)


chains = st.builds(
    lambda n, gaps, conf: (np.r_[0.0, np.cumsum(gaps[: n - 1])], np.asarray(conf[:n])),
    st.integers(1, 8),
    st.lists(st.floats(3e-6, 8e-6), min_size=7, max_size=7),
    st.lists(st.floats(2 * math.pi * 2.8e6, 2 * math.pi * 3.2e6), min_size=8, max_size=8),
)


@settings(max_examples=40, deadline=None)
@given(chains)
def test_mode_vectors_orthonormal_and_eta_formula(layout):
    pos, conf = layout
    modes = solve_transverse_modes(ChainConfig(positions=pos, transverse_confinement=conf))
    B = modes.mode_vectors
    np.testing.assert_allclose(B @ B.T, np.eye(B.shape[0]), atol=1e-10)
    zpf = np.sqrt(sc.hbar / (2 * YB171_MASS * modes.frequencies))
    np.testing.assert_allclose(modes.eta, B * (RAMAN_DELTA_K * zpf)[:, None], rtol=1e-6, atol=1e-15)


@settings(max_examples=25, deadline=None)
@given(chains)
def test_eta_scales_linearly_with_wavevector(layout):
    pos, conf = layout
    a = solve_transverse_modes(ChainConfig(positions=pos, transverse_confinement=conf))
    b = solve_transverse_modes(ChainConfig(positions=pos, transverse_confinement=conf,
                                           raman_delta_k=2 * RAMAN_DELTA_K))
    np.testing.assert_array_equal(b.eta, 2 * a.eta)


@settings(max_examples=25, deadline=None)
@given(chains)
def test_solver_is_bitwise_deterministic(layout):
    pos, conf = layout
    cfg = ChainConfig(positions=pos, transverse_confinement=conf)
    a, b = solve_transverse_modes(cfg), solve_transverse_modes(cfg)
    assert a.frequencies.tobytes() == b.frequencies.tobytes()
    assert a.eta.tobytes() == b.eta.tobytes()
