import csv
import io
import json
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pbmeasures.measures import ALL_KINDS, MeasureError, MeasureKind as K, OutcomeAnalysis
from pbmeasures.model import Q
from pbmeasures.report import (CorrelationError, build_package, correlation_matrix, decimal_repr,
                               losing_projects, measure_projects, pearson, project_columns,
                               project_rows)
from pbmeasures.sampling import SamplingConfig
from pbmeasures.synthetic import tiny_instance

from instances import e1, order


def test_pearson_examples():
    assert pearson([1, 2, 3], [2, 4, 6]) == 1
    assert pearson([1, 2, 3], [3, 2, 1]) == -1
    assert pearson([1, 2, 3], [1, 3, 2]) == 0.5
    assert pearson([Q(1, 3), Q(2, 3), 1], [0, 1, 1]) == pytest.approx(np.corrcoef([1, 2, 3], [0, 1, 1])[0, 1])


def test_pearson_errors():
    with pytest.raises(CorrelationError):
        pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(CorrelationError):
        pearson([1], [1])
    with pytest.raises(CorrelationError):
        pearson([1, 2], [1, 2, 3])


def test_matrix_pairwise_deletion():
    recs = [{K.COST_RED: Q(1, 2), K.OPTIMIST_ADD: Q(1, 3), K.RIVAL_RED: None},
            {K.COST_RED: Q(1, 4), K.OPTIMIST_ADD: Q(1, 5), K.RIVAL_RED: Q(1)},
            {K.COST_RED: Q(3, 4), K.OPTIMIST_ADD: Q(1, 2), K.RIVAL_RED: Q(0)}]
    m = correlation_matrix(recs, [K.COST_RED, K.OPTIMIST_ADD, K.RIVAL_RED])
    assert m.n[(K.COST_RED, K.RIVAL_RED)] == 2
    assert m.n[(K.COST_RED, K.OPTIMIST_ADD)] == 3
    assert m.get("cost_red", "rival_red") == -1
    assert m.get("cost_red", "cost_red") == 1
    with pytest.raises(CorrelationError):
        correlation_matrix(recs[:1])


def test_matrix_unavailable_entries():
    recs = [{K.COST_RED: Q(1), K.OPTIMIST_ADD: None}, {K.COST_RED: Q(1, 2), K.OPTIMIST_ADD: Q(1)}]
    m = correlation_matrix(recs, [K.COST_RED, K.OPTIMIST_ADD])
    assert m.get(K.COST_RED, K.OPTIMIST_ADD) is None
    assert ",," in m.to_csv() or m.to_csv().splitlines()[1].endswith(",")


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(*[st.one_of(st.none(), st.fractions(0, 1, max_denominator=20))] * 3),
                min_size=2, max_size=15))
def test_matrix_invariants(rows):
    kinds = [K.COST_RED, K.OPTIMIST_ADD, K.SINGLETON_ADD]
    recs = [dict(zip(kinds, (None if v is None else Q(v.numerator, v.denominator) for v in r)))
            for r in rows]
    m = correlation_matrix(recs, kinds)
    for a in kinds:
        for b in kinds:
            assert m.r[(a, b)] == m.r[(b, a)]
            if m.r[(a, b)] is not None:
                assert -1 <= m.r[(a, b)] <= 1
        if m.r[(a, a)] is not None:
            assert m.r[(a, a)] == 1


def test_matrix_matches_per_pair_pearson_on_measured_corpus():
    rng = np.random.default_rng(4)
    recs = []
    for _ in range(15):
        inst = tiny_instance(rng)
        an = OutcomeAnalysis(inst, "phragmen", order(inst))
        recs += measure_projects(inst, "phragmen", order(inst), losing_projects(an), ALL_KINDS,
                                 SamplingConfig(), analysis=an)
    norm = [r.normalized() for r in recs]
    m = correlation_matrix(norm)
    for a in ALL_KINDS:
        for b in ALL_KINDS:
            pairs = [(r[a], r[b]) for r in norm if r[a] is not None and r[b] is not None]
            try:
                expected = pearson([x for x, _ in pairs], [y for _, y in pairs])
            except CorrelationError:
                expected = None
            assert m.r[(a, b)] == expected


def test_package_e1_eq():
    inst = e1()
    pkg = build_package(inst, "eq", order(inst), "e", SamplingConfig())
    assert pkg.measure(K.COST_RED).raw == 1
    assert [pkg.measure(k).raw for k in (K.OPTIMIST_ADD, K.PESSIMIST_ADD, K.FIFTY_ADD, K.SINGLETON_ADD)] \
        == [2, 4, 4, 2]
    assert not pkg.measure(K.RIVAL_RED).defined
    doc = json.loads(pkg.to_json())
    assert doc["measures"]["rival_red"]["status"] == "undefined"
    assert doc["instance"] == {"budget": "10/1", "n_voters": 10, "n_projects": 5}


def test_package_e1_av():
    inst = e1()
    pkg = build_package(inst, "av", order(inst), "b")
    assert {pkg.measure(k).raw for k in (K.OPTIMIST_ADD, K.PESSIMIST_ADD, K.FIFTY_ADD, K.SINGLETON_ADD)} == {3}


def test_package_rejects_funded():
    inst = e1()
    with pytest.raises(MeasureError, match="project was funded"):
        build_package(inst, "eq", order(inst), "b")


def test_package_deterministic():
    inst = e1()
    cfg = SamplingConfig(seed=11, samples=20, exhaustive_cap=5)
    a = build_package(inst, "eq", order(inst), "e", cfg, curves=True, grid=(3, 3)).to_json()
    b = build_package(inst, "eq", order(inst), "e", cfg, curves=True, grid=(3, 3)).to_json()
    assert a == b


def test_csv_agrees_with_json():
    inst = e1()
    an = OutcomeAnalysis(inst, "eq", order(inst))
    recs = measure_projects(inst, "eq", order(inst), losing_projects(an), ALL_KINDS, analysis=an)
    text = io.StringIO()
    csv.writer(text).writerows([project_columns(ALL_KINDS)] + project_rows(recs, ALL_KINDS))
    rows = list(csv.DictReader(io.StringIO(text.getvalue())))
    for rec, row in zip(recs, rows):
        for m in rec.results:
            d = m.to_dict()
            assert row[f"{m.kind.value}_raw"] == (d["raw"] or "")
            assert row[f"{m.kind.value}_norm"] == (d["normalized"] or "")


def test_decimal_repr():
    assert decimal_repr(Q(1, 4)) == "0.25"
    assert decimal_repr(Q(1, 3)) == "0.3333333333"
    assert decimal_repr(Q(2, 3)) == "0.6666666667"
    assert decimal_repr(Q(7)) == "7"
