from fractions import Fraction

import pytest

from hacss import metrics, sim
from hacss.metrics import DivisorZero, EfficiencyParams, ScenarioMismatch
from hacss.scenario import bundled, from_dict, load


def test_capacity():
    assert metrics.capacity(1200, 12) == 100
    assert metrics.capacity(5, 10) == 0
    with pytest.raises(DivisorZero):
        metrics.capacity(5, 0)


def test_flood_time():
    p = EfficiencyParams(N_c=50, N_f=50, P_requests_c=4, P_requests_f=4, t=1, I=4, N_f_expected=100)
    T, Tf = metrics.predict_flood_time(p)
    assert T == 400 and Tf == 25
    with pytest.raises(DivisorZero):
        metrics.predict_flood_time(EfficiencyParams(I=0))


def test_stamp_savings():
    assert metrics.predict_stamp_savings(1000, 5, 1) == (5000, 1000, 4000)
    assert metrics.predict_stamp_savings(1000, 3, 3)[2] == 0


def test_eq4_eq5_helpers():
    assert metrics.requests_from_processes(400, 4) == 100
    assert metrics.total_processes(2, Fraction(3, 2), 4, 1) == 7
    with pytest.raises(DivisorZero):
        metrics.requests_from_processes(1, 0)


def test_predict_bundle():
    pr = metrics.predict(EfficiencyParams(s=1200, p=12, c=50, t_fixed=10, I=4, n_mal=10))
    assert (pr.n, pr.D, pr.expected_fraction, pr.T_saved) == (100, 5, Fraction(1, 4), 40)


def test_negative_params_rejected():
    with pytest.raises(ValueError):
        EfficiencyParams(N_c=-1)


def test_honest_only_rows():
    r = sim.run(load(bundled("honest-only")))
    t = metrics.compare(r)
    assert t.row("N_f").predicted == 0 and t.row("N_f").measured == 0
    assert t.row("stamp_savings").measured == 0
    assert t.row("expected_fraction").measured is None
    assert not t.flagged


def test_flood_demo_rows_present_and_exact():
    r = sim.run(load(bundled("flood-demo")))
    t = metrics.compare(r)
    names = {row.metric for row in t.rows}
    assert {
        "capacity_n",
        "block_duration_sum",
        "N",
        "P",
        "T",
        "expected_fraction",
        "attacker_expected_units",
        "stamp_savings",
    } <= names
    for name in ("capacity_n", "block_duration_sum", "block_duration_mismatches", "N", "P", "T", "stamp_savings"):
        assert t.row(name).rel_err == 0, name
    assert not t.flagged
    assert t.to_csv().splitlines()[0] == "metric,predicted,measured,tolerance,rel_err,flag"
    assert '"metric": "capacity_n"' in t.to_json()


def test_mismatch():
    r = sim.run(load(bundled("honest-only")))
    with pytest.raises(ScenarioMismatch):
        metrics.compare(r, EfficiencyParams(I=99, s=r.scenario["s"], p=12))


def test_eq5_identity_on_counters():
    r = sim.run(load(bundled("flood-demo")))
    m = r.measured
    p = metrics.params_from_report(r)
    assert m["N_c"] * p.P_requests_c + m["N_f"] * p.P_requests_f == m["P_c"] + m["P_f"]
    assert m["N_c"] + m["N_f"] == sum(v for k, v in r.outcomes.items() if k != "Unprocessed")


def test_paired_savings_requires_pair():
    sc = load(bundled("mutator-flood"))
    a = sim.run(sc)
    with pytest.raises(ScenarioMismatch):
        metrics.paired_savings(a, a)
    d = sc.to_dict()
    d["engine"]["header_filter"] = False
    b = sim.run(from_dict(d))
    assert metrics.paired_savings(a, b) == 4 * a.measured["N_f_not_expected"]
