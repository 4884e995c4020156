import pytest
from hypothesis import given, strategies as st

from pbmeasures.model import (Instance, InstanceError, Q, TieBreakOrder, amount_from_decimal,
                              decimal_str, fraction_str)

from instances import e1


@pytest.mark.parametrize("text, expected", [("10", Q(10)), ("0.25", Q(1, 4)),
                                            ("1.333333", Q(1333333, 1000000))])
def test_decimal_amounts_are_exact(text, expected):
    assert amount_from_decimal(text) == expected
    assert amount_from_decimal("1.333333") != Q(4, 3)


@pytest.mark.parametrize("text", ["-1", "1e3", "abc", "", "1/2", ".5"])
def test_malformed_amounts_rejected(text):
    with pytest.raises(ValueError):
        amount_from_decimal(text)


def test_rendering():
    assert fraction_str(Q(5, 2)) == "5/2"
    assert decimal_str(Q(5, 2)) == "2.5"
    assert decimal_str(Q(10)) == "10"
    with pytest.raises(ValueError):
        decimal_str(Q(1, 3))


def test_tiebreak_compare():
    order = TieBreakOrder(("a", "b", "c"))
    assert order.compare("a", "b") == -1
    assert order.compare("c", "a") == 1
    assert order.precedes("a", "c")


@given(st.permutations(list("abcdef")))
def test_tiebreak_antisymmetric(perm):
    order = TieBreakOrder(tuple(perm))
    for a in perm:
        for b in perm:
            assert order.compare(a, b) == -order.compare(b, a)
            assert (order.compare(a, b) == 0) == (a == b)


def test_tiebreak_parse_and_check():
    inst = e1()
    assert TieBreakOrder.parse("file-order", inst).ids == ("a", "b", "c", "d", "e")
    assert TieBreakOrder.parse("e,d,c,b,a", inst).ids[0] == "e"
    with pytest.raises(ValueError):
        TieBreakOrder.parse("a,b", inst)
    with pytest.raises(ValueError):
        TieBreakOrder(("a", "a"))


def test_e1_shape():
    inst = e1()
    assert (inst.n_projects, inst.n_voters, inst.budget) == (5, 10, 10)
    assert [inst.score(p) for p in "abcde"] == [6, 4, 3, 2, 1]
    assert inst.project("a").cost == 7


def test_instance_validation():
    with pytest.raises(InstanceError):
        Instance.from_dicts({"a": 1}, {"v": "b"}, 5)
    with pytest.raises(InstanceError):
        Instance.from_dicts({"a": -1}, {"v": "a"}, 5)


def test_perturbations_keep_caches_consistent():
    inst = e1()
    _ = inst.incidence, inst.supporter_arrays, inst.supporters
    for mod in (inst.with_added_approvals("e", [6, 7]), inst.with_singletons("e", 3),
                inst.with_rivals_removed("a", [0, 1]), inst.with_cost("e", 1)):
        fresh = Instance(mod.projects, mod.ballots, mod.budget)
        assert mod.approvals == fresh.approvals
        assert mod.supporters == fresh.supporters
        assert (mod.incidence == fresh.incidence).all()
        assert [list(a) for a in mod.supporter_arrays] == [list(a) for a in fresh.supporter_arrays]
    assert inst.with_singletons("e", 2).score("e") == 3
    assert inst.score("e") == 1
