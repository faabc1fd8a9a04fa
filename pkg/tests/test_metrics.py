from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from siif_pdn.errors import PdnError
from siif_pdn.metrics import (PUBLISHED_TABLE, FomReport, computing_performance,
                              delivered_power, normalize_to_pt, published_flags,
                              rank_topologies, score)
from siif_pdn.platform import TopologyKind

K = TopologyKind


def rep(kind, drop=1.0, loss=1.0, perf=1.0, app="X", fd=100):
    return FomReport(topology=kind, app=app, fd_count=fd, delivered_power=fd * 1.0,
                     computing_performance=perf, dc_drop_worst=drop, inductive_droop_worst=0.0,
                     resistive_loss=loss, inductive_loss=0.0)


def test_delivered_power_examples():
    assert delivered_power(825, 0.085) == pytest.approx(70.1, abs=0.05)
    assert delivered_power(582, 25) == 14550
    assert delivered_power(0, 40) == 0


def test_computing_performance_examples():
    assert computing_performance(825, 1.26) == pytest.approx(1.04, abs=0.005)
    assert computing_performance(603, 6) == pytest.approx(3.62, abs=0.005)
    assert computing_performance(582, 0.61) == pytest.approx(0.355, abs=0.0005)


def test_epyc_performance_flagged():
    flags = published_flags("EPYC", K.PT, 582, 14550.0, computing_performance(582, 0.61), 25)
    assert len(flags) == 1 and "computing_performance" in flags[0]
    assert published_flags("TPU", K.PT, 603, 24120.0, 3.618, 40) == []
    assert published_flags("CUSTOM", K.PT, 1, 1, 1, 1) == []


def test_published_table_shape():
    assert len(PUBLISHED_TABLE) == 15


def test_pt_normalizes_to_one():
    out = normalize_to_pt([rep(K.PT, 0.3, 5.0), rep(K.BT1, 0.6, 2.5, 2.0)])
    assert out[0].normalized == {"drop": 1.0, "loss": 1.0, "performance": 1.0}
    assert out[1].normalized == {"drop": 2.0, "loss": 0.5, "performance": 2.0}


def test_normalize_needs_pt():
    with pytest.raises(PdnError):
        normalize_to_pt([rep(K.BT1), rep(K.BT3)])


def test_normalize_leaves_input_untouched():
    reports = [rep(K.PT), rep(K.BT1)]
    normalize_to_pt(reports)
    assert all(r.normalized == {} for r in reports)


def test_totals():
    r = replace(rep(K.PT, drop=0.1, loss=2.0), inductive_droop_worst=0.05, inductive_loss=0.5,
                conversion_loss=1.0)
    assert r.total_drop == pytest.approx(0.15)
    assert r.total_loss == pytest.approx(3.5)
    d = r.to_dict()
    assert d["topology"] == "PT" and d["total_loss"] == pytest.approx(3.5)


@given(st.floats(1e-6, 1e6), st.lists(st.floats(1e-3, 1e3), min_size=2, max_size=5))
def test_normalization_scale_invariant(k, drops):
    kinds = list(K)[:len(drops)]
    a = normalize_to_pt([rep(kd, d) for kd, d in zip(kinds, drops)])
    b = normalize_to_pt([rep(kd, k * d) for kd, d in zip(kinds, drops)])
    for x, y in zip(a, b):
        assert x.normalized["drop"] == pytest.approx(y.normalized["drop"], rel=1e-12)


def test_equal_reports_tie_break_on_enum_order():
    reports = [rep(k) for k in reversed(list(K))]
    assert [r.topology for r in rank_topologies(reports)] == list(K)


def test_ranking_orders_by_score():
    reports = [rep(K.PT), rep(K.BT1, drop=0.1, loss=0.2, perf=1.4), rep(K.BT2_8, drop=3, loss=3)]
    ranked = rank_topologies(reports)
    assert [r.topology for r in ranked] == [K.BT1, K.PT, K.BT2_8]
    assert score(ranked[1]) == pytest.approx(1.0)


@given(st.floats(1e-3, 1e3))
def test_ranking_invariant_under_weight_rescaling(k):
    reports = [rep(K.PT), rep(K.BT1, drop=0.5, loss=1.7, perf=1.1),
               rep(K.BT2_8, drop=0.9, loss=0.8, perf=0.9), rep(K.BT3, drop=1.1, loss=1.05)]
    w = {"drop": 0.4, "loss": 0.4, "performance": 0.2}
    ref = [r.topology for r in rank_topologies(reports, w)]
    scaled = {key: v * k for key, v in w.items()}
    assert [r.topology for r in rank_topologies(reports, scaled)] == ref


def test_ranking_preconditions():
    with pytest.raises(PdnError):
        rank_topologies([rep(K.PT)])
    with pytest.raises(PdnError):
        rank_topologies([rep(K.PT), rep(K.BT1, app="Y")])
    with pytest.raises(ValueError):
        rank_topologies([rep(K.PT), rep(K.BT1)], {"drop": -1, "loss": 0, "performance": 0})


def test_matrix_reports(matrix):
    for run in matrix["runs"]:
        r = run.report
        tdp = run.scenario.app.dielet.effective_tdp_w
        assert r.delivered_power == r.fd_count * tdp
        assert r.computing_performance == r.fd_count * run.scenario.app.dielet.throughput_tflops / 1000
        assert r.dc_drop_worst > 0 and r.inductive_droop_worst >= 0
        assert r.resistive_loss > 0 and r.inductive_loss >= 0 and r.conversion_loss > 0


@pytest.mark.xfail(strict=True, reason="lumped model puts PT's lateral ring drop above every "
                   "backside topology; see decisions ledger")
def test_loihi_normalized_drop_ordering(matrix):
    loihi = [r.report for r in matrix["runs"] if r.report.app == "LOIHI"]
    norm = {r.topology: r.normalized["drop"] for r in normalize_to_pt(loihi)}
    # published ordering: BT1/BT3 far above BT2, BT2 above PT
    assert min(norm[K.BT1], norm[K.BT3]) > 10 * max(norm[K.BT2_8], norm[K.BT2_24])
    assert min(norm[K.BT2_8], norm[K.BT2_24]) > 1.0
