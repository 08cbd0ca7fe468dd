import json

import pytest

from amfm import analysis
from amfm.sweeps import drift_report, sweep_lbar, sweep_pairs, sweep_power_vs_tau


@pytest.fixture(scope="module")
def template(umd7):
    return {"modes": umd7, "pair": (4, 5), "K": 0, "protocol": "exact"}


def test_power_vs_tau_three_points(template):
    rep = sweep_power_vs_tau(template, [30e-6, 120e-6, 200e-6])
    assert len(rep.rows) == 3
    power = rep.column("mean_square")
    assert power[0] > power[-1]
    assert rep.column("tau_us") == [30.0, 120.0, 200.0]


def test_empty_sweep(template):
    rep = sweep_power_vs_tau(template, [])
    assert rep.rows == []
    assert rep.to_csv().count("\n") == 1


def test_sweep_is_reproducible_and_order_stable(template):
    taus = [60e-6, 20e-6, 90e-6]
    a = sweep_power_vs_tau(template, taus)
    b = sweep_power_vs_tau(template, taus, jobs=3)
    assert a.to_csv() == b.to_csv()
    assert a.sidecar() == b.sidecar()
    assert json.loads(a.sidecar())["taus_s"] == taus


def test_failing_point_becomes_error_row(template):
    rep = sweep_power_vs_tau(dict(template, n_basis=20, K=1), [50e-6])
    assert "need N_A" in rep.rows[0]["error"]


def test_pairs_and_lbar(chain15):
    tmpl = {"modes": chain15, "tau": 50e-6, "K": 0, "protocol": "exact"}
    rep = sweep_pairs(tmpl, [(1, 2), (1, 11)])
    assert rep.column("pair") == ["1-2", "1-11"]
    lb = sweep_lbar({"modes": chain15, "pair": (1, 11), "tau": 50e-6}, [4, 12])
    assert [r["knob"] for r in lb.rows] == ["L_bar_cut=4;L_cut=296", "L_bar_cut=12;L_cut=288"]


def test_drift_report_columns(solver, umd7):
    sol = solver("umd7", (4, 5), 120, 0)
    curve = analysis.sweep_drift(sol, umd7, points=5)
    rep = drift_report(curve, sol)
    head = rep.to_csv().splitlines()[0]
    assert head == "drift_khz [kHz],infidelity,chi_deviation [rad]"
    assert json.loads(rep.sidecar())["chain_fingerprint"] == umd7.fingerprint()
