"""Closed-form efficiency model and a predicted-vs-measured comparator.

All predictions use exact rational arithmetic (``fractions.Fraction``); floats
appear only when a table is serialized.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

from .filter import block_duration


class DivisorZero(ZeroDivisionError):
    pass


class ScenarioMismatch(ValueError):
    pass


def _nonzero(value, name: str):
    if value == 0:
        raise DivisorZero(f"{name} must be non-zero")
    return value


def capacity(s: int, p: int) -> int:
    """Clients served per tick: ``floor(s / p)``."""
    return s // _nonzero(p, "p")


def requests_from_processes(P: int, P_requests) -> Fraction:
    """``N = P / P_requests``."""
    return Fraction(P) / Fraction(_nonzero(P_requests, "P_requests"))


def total_processes(N_c: int, P_c, N_f: int, P_f) -> Fraction:
    """``P = N_c * P_c + N_f * P_f`` with per-class mean processes per request."""
    return N_c * Fraction(P_c) + N_f * Fraction(P_f)


@dataclass(frozen=True)
class EfficiencyParams:
    p: int = 12
    s: int = 1200
    t_fixed: int = 10
    c: int = 0
    n: int = 0
    N: int = 0
    N_c: int = 0
    N_f: int = 0
    P: int = 0
    # The model uses one symbol for the mean processes per request of both
    # classes; they are kept apart here.
    P_requests_c: Fraction = Fraction(0)
    P_requests_f: Fraction = Fraction(0)
    I: int = 1  # noqa: E741
    t: Fraction = Fraction(1)
    t_c: int = 5
    t_d: int = 1
    n_mal: int = 0
    N_f_expected: int = 0  # attacker datagrams carrying a currently valid header
    P_f_expected: Fraction = Fraction(4)  # units spent on one such datagram once it passes

    def __post_init__(self):
        for name, value in asdict(self).items():
            if value < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class PredictedMetrics:
    n: int
    D: int
    N: int
    P: Fraction
    T: Fraction
    expected_fraction: Fraction
    T_f_request: Fraction
    T_prime: Fraction
    T_double_prime: Fraction
    T_saved: Fraction


def predict_flood_time(params: EfficiencyParams) -> tuple[Fraction, Fraction]:
    """Total handling time and the attacker share that survives the endpoint split.

    ``T = (N_c * P_c + N_f * P_f) * t``. The second value is ``N'_f_expected * t / I``;
    datagrams whose header does not match are dropped from the header alone and
    are charged nothing here.
    """
    T = total_processes(params.N_c, params.P_requests_c, params.N_f, params.P_requests_f) * params.t
    T_f = Fraction(params.N_f_expected) * params.t / _nonzero(params.I, "I")
    return T, T_f


def predict_stamp_savings(n_mal: int, t_c, t_d) -> tuple[Fraction, Fraction, Fraction]:
    """(all-full-check time, header-drop time, saving) for ``n_mal`` malicious datagrams."""
    T1 = n_mal * Fraction(t_c)
    T2 = n_mal * Fraction(t_d)
    saved = T1 - T2
    if t_c > t_d and n_mal > 0:
        assert saved > 0
    return T1, T2, saved


def predict(params: EfficiencyParams) -> PredictedMetrics:
    n = capacity(params.s, params.p)
    T, T_f = predict_flood_time(params)
    T1, T2, saved = predict_stamp_savings(params.n_mal, params.t_c, params.t_d)
    return PredictedMetrics(
        n=n,
        D=block_duration(params.t_fixed, min(params.c, n), n),
        N=params.N_c + params.N_f,
        P=total_processes(params.N_c, params.P_requests_c, params.N_f, params.P_requests_f),
        T=T,
        expected_fraction=Fraction(1, _nonzero(params.I, "I")),
        T_f_request=T_f * params.P_f_expected,
        T_prime=T1,
        T_double_prime=T2,
        T_saved=saved,
    )


def _mean(total: int, count: int) -> Fraction:
    return Fraction(total, count) if count else Fraction(0)


def params_from_report(report) -> EfficiencyParams:
    """Model inputs read off a report's scenario and measured counters."""
    sc = report.scenario
    m = report.measured
    costs = sc["costs"]
    return EfficiencyParams(
        p=sc["engine"]["p"],
        s=sc["s"],
        t_fixed=sc["engine"]["t_fixed"],
        c=min(sc["engine"]["baseline_served"], sc["s"] // sc["engine"]["p"]),
        n=sc["s"] // sc["engine"]["p"],
        N=m["N_c"] + m["N_f"],
        N_c=m["N_c"],
        N_f=m["N_f"],
        P=m["P_c"] + m["P_f"],
        P_requests_c=_mean(m["P_c"], m["N_c"]),
        P_requests_f=_mean(m["P_f"], m["N_f"]),
        I=sc["I"],
        t=Fraction(1),
        t_c=costs["stamp_check"],
        t_d=costs["drop"],
        n_mal=m["N_f_not_expected"],
        N_f_expected=m["N_f_valid"],
        P_f_expected=Fraction(costs["header_inspect"] + costs["open_body"]),
    )


@dataclass
class ComparisonRow:
    metric: str
    predicted: Fraction | int | None
    measured: Fraction | int | None
    tolerance: Fraction | float | None  # absolute; None means informational
    rel_err: float | None = None
    flag: bool = False

    def __post_init__(self):
        if self.predicted is not None and self.measured is not None:
            diff = abs(Fraction(self.measured) - Fraction(self.predicted))
            self.rel_err = float(diff / abs(Fraction(self.predicted))) if self.predicted else float(diff)
            if self.tolerance is not None:
                self.flag = diff > Fraction(self.tolerance)


def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, int) or (isinstance(x, Fraction) and x.denominator == 1):
        return str(int(x))
    return format(float(x), ".10g")


@dataclass
class ComparisonTable:
    rows: list[ComparisonRow] = field(default_factory=list)

    def row(self, metric: str) -> ComparisonRow:
        for r in self.rows:
            if r.metric == metric:
                return r
        raise KeyError(metric)

    @property
    def flagged(self) -> list[ComparisonRow]:
        return [r for r in self.rows if r.flag]

    def records(self) -> list[dict]:
        return [
            {
                "metric": r.metric,
                "predicted": _num(r.predicted),
                "measured": _num(r.measured),
                "tolerance": _num(r.tolerance),
                "rel_err": "" if r.rel_err is None else format(r.rel_err, ".6g"),
                "flag": "FLAG" if r.flag else "",
            }
            for r in self.rows
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(
            buf,
            ["metric", "predicted", "measured", "tolerance", "rel_err", "flag"],
            lineterminator="\n",
        )
        w.writeheader()
        w.writerows(self.records())
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(self.records(), indent=1, sort_keys=True) + "\n"


def _binomial_sd(n: int, p: Fraction) -> float:
    return math.sqrt(n * float(p) * (1 - float(p)))


def compare(report, params: EfficiencyParams | None = None) -> ComparisonTable:
    """Rows of predicted vs measured values; tolerances are 0 or three sigma."""
    sc = report.scenario
    if params is None:
        params = params_from_report(report)
    if params.I != sc["I"] or params.s != sc["s"] or params.p != sc["engine"]["p"]:
        raise ScenarioMismatch(
            f"params (I={params.I}, s={params.s}, p={params.p}) do not describe this report "
            f"(I={sc['I']}, s={sc['s']}, p={sc['engine']['p']})"
        )
    m = report.measured
    pred = predict(params)
    rows = []

    rows.append(ComparisonRow("capacity_n", pred.n, report.events["filter_capacity"], 0))
    # Budget bound: no tick can serve more CA requests than s over the cheapest CA cost.
    cheapest = min(sc["costs"]["drop"], sc["costs"]["header_inspect"])
    rows.append(
        ComparisonRow("peak_ca_requests_per_tick", sc["s"] // cheapest, m["peak_ca_per_tick"], None)
    )
    rows[-1].flag = m["peak_ca_per_tick"] > sc["s"] // cheapest

    pred_D = sum(block_duration(params.t_fixed, g["c"], g["n"]) * g["count"] for g in report.gate_samples)
    meas_D = sum(g["D"] * g["count"] for g in report.gate_samples)
    rows.append(ComparisonRow("block_duration_sum", pred_D, meas_D, 0))
    bad = sum(g["count"] for g in report.gate_samples if block_duration(params.t_fixed, g["c"], g["n"]) != g["D"])
    rows.append(ComparisonRow("block_duration_mismatches", 0, bad, 0))

    rows.append(ComparisonRow("N", params.N_c + params.N_f, m["N_c"] + m["N_f"], 0))
    rows.append(ComparisonRow("N_c", params.N_c, m["N_c"], 0))
    rows.append(ComparisonRow("N_f", params.N_f, m["N_f"], 0))
    rows.append(ComparisonRow("P", pred.P, m["P_c"] + m["P_f"], 0))
    rows.append(ComparisonRow("T", pred.T, m["units_total"] + m["carried_debt"], 0))

    n_valid = m["N_f_valid"]
    frac = Fraction(1, params.I)
    if n_valid:
        sd = _binomial_sd(n_valid, frac)
        rows.append(
            ComparisonRow("expected_fraction", frac, Fraction(m["N_f_expected"], n_valid), 3 * sd / n_valid)
        )
        rows.append(
            ComparisonRow(
                "attacker_expected_units",
                pred.T_f_request,
                m["attacker_expected_units"],
                3 * float(params.P_f_expected) * sd,
            )
        )
    else:
        rows.append(ComparisonRow("expected_fraction", frac, None, None))
        rows.append(ComparisonRow("attacker_expected_units", pred.T_f_request, m["attacker_expected_units"], 0))

    header_filter = sc["engine"]["header_filter"]
    full = params.n_mal * params.t_c
    measured_saving = full - m["attacker_unexpected_units"] if header_filter else 0
    expected_saving = pred.T_saved if header_filter else 0
    rows.append(ComparisonRow("stamp_savings", expected_saving, measured_saving, 0))
    return ComparisonTable(rows)


def paired_savings(header_drop, forced) -> int:
    """Units the header-drop path saved against a forced-full-check run of the same traffic."""
    a, b = header_drop.scenario, forced.scenario
    if not a["engine"]["header_filter"] or b["engine"]["header_filter"]:
        raise ScenarioMismatch("need one header-drop run and one forced-full-check run")
    strip = lambda sc: {**sc, "engine": {**sc["engine"], "header_filter": None}}  # noqa: E731
    if strip(a) != strip(b):
        raise ScenarioMismatch("paired runs must share every other scenario setting")
    return forced.attacker_total("units") - header_drop.attacker_total("units")
