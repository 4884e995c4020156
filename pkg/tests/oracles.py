"""Brute-force reference implementations of the measures.

Everything here reruns the full rule on explicitly perturbed instances and
enumerates subsets; nothing is shared with the trace-based code paths.
"""
import math
from fractions import Fraction
from itertools import combinations
from math import comb

from pbmeasures.model import Q
from pbmeasures.rules import run_rule


def wins(inst, rule, order, pid) -> bool:
    return pid in run_rule(inst, rule, order).selected


def non_supporters(inst, pid):
    sup = set(inst.supporters[inst.project_index[pid]])
    return [v for v in range(inst.n_voters) if v not in sup]


def add_success_counts(inst, rule, order, pid):
    """``{l: number of l-subsets of non-supporters whose approval funds pid}``."""
    pool = non_supporters(inst, pid)
    out = {}
    for ell in range(len(pool) + 1):
        out[ell] = sum(wins(inst.with_added_approvals(pid, s), rule, order, pid)
                       for s in combinations(pool, ell))
    return pool, out


def optimist(inst, rule, order, pid):
    pool, counts = add_success_counts(inst, rule, order, pid)
    return next((ell for ell, c in counts.items() if c > 0), None)


def pessimist(inst, rule, order, pid):
    pool, counts = add_success_counts(inst, rule, order, pid)
    return next((ell for ell, c in counts.items() if c == comb(len(pool), ell)), None)


def fifty(inst, rule, order, pid):
    pool, counts = add_success_counts(inst, rule, order, pid)
    return next((ell for ell, c in counts.items()
                 if ell > 0 and 2 * c >= comb(len(pool), ell)), None)


def rival(inst, rule, order, pid):
    sup = list(inst.supporters[inst.project_index[pid]])
    for ell in range(1, len(sup) + 1):
        c = sum(wins(inst.with_rivals_removed(pid, s), rule, order, pid)
                for s in combinations(sup, ell))
        if 2 * c >= comb(len(sup), ell):
            return ell
    return None


def singleton(inst, rule, order, pid, limit=120):
    for ell in range(1, limit + 1):
        if wins(inst.with_singletons(pid, ell), rule, order, pid):
            return ell
    return None


def simplest_between(lo: Fraction, hi: Fraction) -> Fraction:
    """Rational with the smallest denominator in ``[lo, hi]`` (Stern-Brocot descent)."""
    if math.ceil(lo) <= hi:
        return Fraction(math.ceil(lo))
    fl = math.floor(lo)
    # both in (fl, fl + 1)
    inv = simplest_between(1 / (hi - fl), 1 / (lo - fl))
    return fl + 1 / inv


def cost_red(inst, rule, order, pid, steps=60):
    """``(supremum, attained)`` of the winning costs, or None if nothing wins."""
    c = inst.project(pid).cost
    cost = Fraction(int(c.numerator), int(c.denominator))

    def ok(x):
        return wins(inst.with_cost(pid, Q(x.numerator, x.denominator)), rule, order, pid)

    if not ok(Fraction(0)):
        return None
    lo, hi = Fraction(0), cost
    for _ in range(steps):
        mid = (lo + hi) / 2
        if ok(mid):
            lo = mid
        else:
            hi = mid
    sup = simplest_between(lo, hi)
    return sup, ok(sup)


def all_measures(inst, rule, order, pid):
    """Every measure by brute force; add-type values share one enumeration.

    ``cost_red`` is ``(supremum, attained)``; undefined values are None.
    """
    pool, counts = add_success_counts(inst, rule, order, pid)
    out = {
        "optimist_add": next((ell for ell, c in counts.items() if c > 0), None),
        "pessimist_add": next((ell for ell, c in counts.items() if c == comb(len(pool), ell)), None),
        "fifty_add": next((ell for ell, c in counts.items()
                           if ell > 0 and 2 * c >= comb(len(pool), ell)), None),
        "rival_red": rival(inst, rule, order, pid),
        "singleton_add": singleton(inst, rule, order, pid),
        "cost_red": cost_red(inst, rule, order, pid),
    }
    if inst.score(pid) == 0 and str(getattr(rule, "value", rule)) != "av":
        out["cost_red"] = None  # undefined without supporters
    return out


def as_fraction(value):
    return Fraction(int(value.numerator), int(value.denominator))
