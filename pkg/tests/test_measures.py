import pytest

from pbmeasures.measures import (ALL_KINDS, MeasureError, MeasureKind as K, OutcomeAnalysis,
                                 Status, compute_measure, cost_reduction, default_grid_axes,
                                 fifty_percent_add, funding_curve, normalize_measure, optimist_add,
                                 pessimist_add, rivalry_reduction, singleton_add, strategy_grid)
from pbmeasures.model import Instance, Q, TieBreakOrder
from pbmeasures.rules import funded
from pbmeasures.sampling import PerturbKind, SamplingConfig

import oracles
from instances import e1, e1_prime, order

EXACT = SamplingConfig(exhaustive_cap=10**6)


def raw(result):
    assert result.status is Status.DEFINED, result.reason
    return result.raw


def test_cost_reduction_examples():
    inst = e1()
    o = order(inst)
    assert raw(cost_reduction(inst, "av", o, "b")) == 3
    assert raw(cost_reduction(inst, "av", o, "d")) == 0
    assert raw(cost_reduction(inst, "eq", o, "e")) == 1


def test_cost_reduction_reports_supremum_flag():
    inst = e1()
    res = cost_reduction(inst, "eq", order(inst), "e")
    assert res.diagnostics["attained"] is True
    assert funded(inst.with_cost("e", 1), "eq", order(inst), "e")


def test_optimist_depends_on_tie_break():
    inst = e1()
    assert raw(optimist_add(inst, "av", TieBreakOrder(tuple("abcde")), "b")) == 3
    assert raw(optimist_add(inst, "av", TieBreakOrder(tuple("bacde")), "b")) == 2


def test_add_measures_on_e1():
    inst = e1()
    o = order(inst)
    eq = optimist_add(inst, "eq", o, "e")
    assert raw(eq) == 2
    assert raw(optimist_add(inst, "phragmen", o, "e")) == 2
    assert raw(pessimist_add(inst, "eq", o, "e")) == 4
    assert raw(pessimist_add(inst, "phragmen", o, "e")) == 2
    assert raw(fifty_percent_add(inst, "eq", o, "e", EXACT)) == 4
    assert raw(singleton_add(inst, "eq", o, "e")) == 2
    assert raw(singleton_add(inst, "phragmen", o, "e")) == 2
    for kind in (K.OPTIMIST_ADD, K.PESSIMIST_ADD, K.FIFTY_ADD, K.SINGLETON_ADD):
        assert raw(compute_measure(kind, inst, "av", o, "b", EXACT)) == 3


def test_vignette_witnesses():
    inst = e1()
    o = order(inst)
    x2, x3, z1, z2 = (inst.voter_ids.index(v) for v in ("x2", "x3", "z1", "z2"))
    assert funded(inst.with_added_approvals("e", [x2, x3]), "eq", o, "e")
    assert not funded(inst.with_added_approvals("e", [z1, z2]), "eq", o, "e")
    prime = e1_prime()
    assert not funded(prime, "eq", o, "e")
    assert funded(prime.with_rivals_removed("e", [z1, z2]), "eq", o, "e")


def test_rivalry_reduction():
    inst = e1()
    o = order(inst)
    assert rivalry_reduction(inst, "eq", o, "e", EXACT).status is Status.UNDEFINED
    assert rivalry_reduction(inst, "eq", o, "a", EXACT).status is Status.UNDEFINED
    prime = e1_prime()
    res = rivalry_reduction(prime, "eq", order(prime), "e", EXACT)
    assert res.defined and res.raw == oracles.rival(prime, "eq", order(prime), "e")


def test_funded_project_rejected():
    inst = e1()
    for kind in ALL_KINDS:
        with pytest.raises(MeasureError, match="project was funded"):
            compute_measure(kind, inst, "eq", order(inst), "b")


def test_normalization():
    inst = Instance.from_dicts({"p": 5, "q": 1}, {f"v{i}": "p" for i in range(20)}, 3)
    assert normalize_measure(K.OPTIMIST_ADD, 80, "p", inst) == Q(1, 5)
    assert normalize_measure(K.COST_RED, 5, "p", inst) == 1
    assert normalize_measure(K.RIVAL_RED, 20, "p", inst) == 0
    assert normalize_measure(K.OPTIMIST_ADD, 0, "p", inst) == 1


def test_curves_on_e1():
    inst = e1()
    o = order(inst)
    add = funding_curve(inst, "eq", o, "e", PerturbKind.ADD_APPROVALS, EXACT)
    assert [(ell, f) for ell, f, _ in add.points] == [(1, 0), (2, Q(1, 36)), (3, Q(1, 6)), (4, 1)]
    riv = funding_curve(inst, "eq", o, "e", PerturbKind.REMOVE_RIVALS, EXACT)
    assert all(f == 0 for _, f, _ in riv.points)


def test_strategy_grid_on_e1():
    inst = e1()
    grid = strategy_grid(inst, "eq", order(inst), "e", [0, Q(1, 2)], [0, 2])
    assert not grid.cell(0, 0)
    assert grid.cell(Q(1, 2), 0)
    assert grid.cell(0, 2)
    deltas, singles = default_grid_axes(40, 4, 4)
    assert deltas[0] == 0 and deltas[-1] == 1 and singles == (0, 10, 20, 30, 40)


def test_shared_analysis_gives_same_answers():
    inst = e1()
    o = order(inst)
    an = OutcomeAnalysis(inst, "phragmen", o)
    for kind in ALL_KINDS:
        a = compute_measure(kind, inst, "phragmen", o, "e", EXACT, an)
        b = compute_measure(kind, inst, "phragmen", o, "e", EXACT)
        assert a == b


def test_eq_increment_optimist_and_pessimist_unsupported():
    inst = e1()
    o = order(inst)
    for fn in (optimist_add, pessimist_add):
        res = fn(inst, "eq-increment", o, "e")
        assert res.status is Status.UNDEFINED and res.reason == "unsupported-rule"
    assert raw(singleton_add(inst, "eq-increment", o, "e")) == oracles.singleton(inst, "eq-increment", o, "e")
