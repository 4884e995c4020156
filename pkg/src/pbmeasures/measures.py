"""Closeness-to-victory measures for losing projects.

Most measures are computed from the trace of a single unperturbed run.  The
key observation: giving a losing project ``p`` extra support (or a lower
cost) changes nothing in the run until ``p`` itself is bought, so ``p`` is
funded exactly when it beats the actual winner at one of the run's
*decision points* (a purchase round, or the end of a phase), judged on the
balances the unperturbed run had at that point.

Per point the test is a threshold on the funds ``F`` that ``p``'s
supporters could contribute:

* Phragmén round at time ``T`` (rival ``c`` bought at ``T``): ``p`` wins if
  ``F(T) > cost``, or ``F(T) == cost`` and ``p`` precedes ``c``.  When ``T``
  equals the previous purchase time, ``p`` cannot have been earlier, so only
  ``F(T) >= cost`` with ``p`` preceding ``c`` wins.  Budget must allow ``p``.
* Equal-Shares round with rival ``q``: with ``Q = q * cost`` and capped funds
  ``F = sum(min(b, Q))``, ``p`` wins if ``F > cost``; if ``F == cost`` it wins
  when ``p`` precedes ``c``, or when every contributor is capped (then
  ``p``'s own ``q`` is strictly smaller).
* End of Equal-Shares: ``sum(min(b, cost)) >= cost``.  End of Phragmén:
  budget allows ``p`` and somebody approves it.

Every value obtained this way is confirmed by rerunning the rule.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from math import ceil, lcm
from typing import Optional, Sequence

import numpy as np

from .model import Instance, Q, Rule, RuleSpec, TieBreakOrder, fraction_str
from .packing import solve_integer_packing
from .rules import Outcome, Snapshot, funded, run_rule
from .sampling import (PerturbKind, Perturbation, SamplingConfig, funding_frequency,
                       population)


class MeasureKind(str, Enum):
    COST_RED = "cost_red"
    OPTIMIST_ADD = "optimist_add"
    PESSIMIST_ADD = "pessimist_add"
    FIFTY_ADD = "fifty_add"
    SINGLETON_ADD = "singleton_add"
    RIVAL_RED = "rival_red"


ADD_KINDS = frozenset({MeasureKind.OPTIMIST_ADD, MeasureKind.PESSIMIST_ADD,
                       MeasureKind.FIFTY_ADD, MeasureKind.SINGLETON_ADD})
ALL_KINDS = tuple(MeasureKind)
NON_SAMPLING = (MeasureKind.COST_RED, MeasureKind.OPTIMIST_ADD,
                MeasureKind.PESSIMIST_ADD, MeasureKind.SINGLETON_ADD)


class Status(str, Enum):
    DEFINED = "defined"
    UNDEFINED = "undefined"


class MeasureError(ValueError):
    """Contract violation, e.g. asking for the measures of a funded project."""


def _ceil(x) -> int:
    return int(ceil(x))


def _num(v):
    if v is None:
        return None, None
    return fraction_str(v), round(float(v), 6)


@dataclass(frozen=True)
class MeasureResult:
    kind: MeasureKind
    project: str
    status: Status
    raw: object = None
    normalized: object = None
    reason: Optional[str] = None
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def defined(self) -> bool:
        return self.status is Status.DEFINED

    def to_dict(self) -> dict:
        raw, raw_dec = _num(self.raw)
        norm, norm_dec = _num(self.normalized)
        out = {"kind": self.kind.value, "status": self.status.value,
               "raw": raw, "raw_decimal": raw_dec, "normalized": norm, "normalized_decimal": norm_dec}
        if self.reason:
            out["reason"] = self.reason
        if self.diagnostics:
            out["diagnostics"] = self.diagnostics
        return out


def normalize_measure(kind, raw, pid: str, instance: Instance):
    """Map a raw value to [0, 1]; 1 means funded as is.  None if undefined."""
    kind = MeasureKind(kind)
    score = instance.score(pid)
    if kind is MeasureKind.COST_RED:
        return Q(raw) / instance.project(pid).cost
    if score == 0:
        return None
    if kind is MeasureKind.RIVAL_RED:
        return Q(score - raw, score)
    return Q(score, score + raw)


def _defined(kind, pid, instance, raw, **diag) -> MeasureResult:
    norm = normalize_measure(kind, raw, pid, instance)
    if norm is None:
        return MeasureResult(kind, pid, Status.UNDEFINED, raw, None, "no-supporters", diag)
    return MeasureResult(kind, pid, Status.DEFINED, raw, norm, None, diag)


def _undefined(kind, pid, reason, **diag) -> MeasureResult:
    return MeasureResult(kind, pid, Status.UNDEFINED, None, None, reason, diag)


# ---------------------------------------------------------------------------
# decision points of an unperturbed run


@dataclass(frozen=True)
class Point:
    kind: str  # "ph", "eq", "ph_end" or "eq_end"
    state: Snapshot
    rival: Optional[int]
    value: Optional[Q]  # purchase time (ph) or q (eq)
    budget_left: Q
    simultaneous: bool = False
    label: str = ""


@dataclass(frozen=True)
class Requirement:
    """``p`` wins at a point iff the added contribution ``s`` satisfies this.

    ``s > need`` always wins; ``s == need`` wins if ``equal_wins``, or if
    ``equal_wins_if_flat`` and every contributor is below the cap.
    ``any_voter`` replaces the test by "at least one approver".
    """

    need: Q = Q(0)
    equal_wins: bool = False
    equal_wins_if_flat: bool = False
    any_voter: bool = False

    def wins(self, s, n_added: int, added_flat: bool) -> bool:
        if self.any_voter:
            return n_added > 0
        if s > self.need:
            return True
        return s == self.need and (self.equal_wins or (self.equal_wins_if_flat and added_flat))


class OutcomeAnalysis:
    """The unperturbed run of one rule plus lazily built per-point indices.

    Shared by all losing projects of an instance.
    """

    def __init__(self, instance: Instance, rule, order: Optional[TieBreakOrder] = None):
        self.instance = instance
        self.spec = RuleSpec.of(rule)
        self.rule = self.spec.kind
        self.order = order or TieBreakOrder.file_order(instance)
        self.rank = [self.order.rank[p.id] for p in instance.projects]
        self.outcome: Outcome = run_rule(instance, self.spec, self.order)

    def require_losing(self, pid: str) -> int:
        j = self.instance.project_index.get(pid)
        if j is None:
            raise MeasureError(f"unknown project {pid!r}")
        if pid in self.outcome.selected:
            raise MeasureError(f"project was funded: {pid!r}")
        return j

    @cached_property
    def points(self) -> list:
        out = self.outcome
        idx = self.instance.project_index
        B = self.instance.budget
        ends = {e.phase: e for e in out.phase_ends}
        pts = []
        if self.rule in (Rule.EQ, Rule.EQ_PHRAGMEN):
            for t in out.trace:
                if t.phase is Rule.EQ:
                    pts.append(Point("eq", t.pre, idx[t.selected], t.event_value,
                                     t.remaining_budget_before, label=f"round {t.round_index}"))
            end = ends[Rule.EQ]
            pts.append(Point("eq_end", end.state, None, None, B - end.spent, label="end of equal shares"))
        if self.rule in (Rule.PHRAGMEN, Rule.EQ_PHRAGMEN):
            prev = Q(0)
            for t in out.trace:
                if t.phase is Rule.PHRAGMEN:
                    pts.append(Point("ph", t.pre, idx[t.selected], t.event_value,
                                     t.remaining_budget_before, t.event_value == prev,
                                     label=f"round {t.round_index}"))
                    prev = t.event_value
            end = ends[Rule.PHRAGMEN]
            pts.append(Point("ph_end", end.state, None, end.time, B - end.spent, label="end of phragmen"))
        return pts

    @cached_property
    def class_counts(self) -> list:
        return [Counter(pt.state.voter_class) for pt in self.points]

    @cached_property
    def voter_types(self):
        """Voters grouped by their class history over all points."""
        index, types = {}, []
        hist = zip(*[pt.state.voter_class for pt in self.points]) if self.points else \
            ((),) * self.instance.n_voters
        for h in hist:
            t = index.get(h)
            if t is None:
                t = index[h] = len(index)
            types.append(t)
        histories = [None] * len(index)
        for h, t in index.items():
            histories[t] = h
        return types, histories

    @cached_property
    def type_array(self):
        return np.asarray(self.voter_types[0], dtype=np.intp)

    @cached_property
    def type_matrix(self):
        """``types x points`` matrix of class ids."""
        hist = self.voter_types[1]
        return np.array(hist, dtype=np.intp).reshape(len(hist), len(self.points))

    def point_scale(self, i: int):
        """Class values at point ``i`` as integers over a common denominator:
        ``(scaled, rank, D)`` indexed by class id, rank by exact value."""
        cache = self.__dict__.setdefault("_point_scale", {})
        if i not in cache:
            vals = self.points[i].state.class_balance
            D = 1
            for v in set(vals):
                D = lcm(D, int(v.denominator))
            scaled = np.array([int(v * D) for v in vals], dtype=object)
            distinct = sorted(set(vals))
            where = {v: r for r, v in enumerate(distinct)}
            rank = np.array([where[v] for v in vals], dtype=np.int64)
            cache[i] = (scaled, rank, D)
        return cache[i]

    @cached_property
    def voters_by_type(self) -> list:
        types, histories = self.voter_types
        out = [[] for _ in histories]
        for v, t in enumerate(types):
            out[t].append(v)
        return out

    # -- per project helpers ----------------------------------------------

    def cap(self, pt: Point, cost):
        if pt.kind == "eq":
            return pt.value * cost
        if pt.kind == "eq_end":
            return cost
        return None

    def requirement(self, pt: Point, j: int, cost=None) -> Optional[Requirement]:
        """What the added approvers must contribute at ``pt`` (None: cannot win there)."""
        inst = self.instance
        cost = inst.costs[j] if cost is None else cost
        sup = inst.supporters[j]
        cap = self.cap(pt, cost)
        cb, vc = pt.state.class_balance, pt.state.voter_class
        if pt.kind in ("ph", "ph_end") and pt.budget_left < cost:
            return None
        if pt.kind == "ph_end":
            return Requirement(any_voter=True) if not sup else None
        funds = Q(0)
        flat = True
        for v in sup:
            b = cb[vc[v]]
            if cap is not None and b >= cap:
                funds += cap
                flat = False
            else:
                funds += b
        need = cost - funds
        if pt.kind == "eq_end":
            return Requirement(need, equal_wins=True)
        p_first = self.rank[j] < self.rank[pt.rival]
        if pt.kind == "ph":
            if pt.simultaneous and not p_first:
                return None
            return Requirement(need, equal_wins=p_first)
        return Requirement(need, equal_wins=p_first, equal_wins_if_flat=(not p_first and flat))

    def pool_classes(self, i: int, j: int) -> list:
        """Non-supporters of project ``j`` at point ``i`` as ``(class, count)``, richest first."""
        pt = self.points[i]
        counts = Counter(self.class_counts[i])
        vc = pt.state.voter_class
        for v in self.instance.supporters[j]:
            counts[vc[v]] -= 1
        cb = pt.state.class_balance
        return sorted(((c, k) for c, k in counts.items() if k > 0), key=lambda ck: -cb[ck[0]])

    def supporter_set(self, j: int) -> frozenset:
        cache = self.__dict__.setdefault("_supporter_sets", {})
        if j not in cache:
            cache[j] = frozenset(self.instance.supporters[j])
        return cache[j]

    def pool_voters(self, i: int, j: int) -> list:
        """Non-supporters sorted by balance at point ``i``, richest first (stable by index)."""
        pt = self.points[i]
        cb, vc = pt.state.class_balance, pt.state.voter_class
        sup = self.supporter_set(j)
        vs = [v for v in range(self.instance.n_voters) if v not in sup]
        return sorted(vs, key=lambda v: -cb[vc[v]])


def _analysis(instance, rule, order, analysis) -> OutcomeAnalysis:
    if analysis is not None:
        return analysis
    return OutcomeAnalysis(instance, rule, order)


def _with_added(instance, pid, voters):
    return instance.with_added_approvals(pid, voters)


# ---------------------------------------------------------------------------
# GreedyAV closed forms


def _av_scan(an: OutcomeAnalysis, j: int):
    """``(remaining budget when p is scanned, m*)``; m* None if no position helps."""
    inst = an.instance
    sup = inst.supporters
    rank = an.rank
    cost = inst.costs[j]
    scan = sorted((k for k in range(inst.n_projects) if k != j),
                  key=lambda k: (-len(sup[k]), rank[k]))
    key_p = (-len(sup[j]), rank[j])
    left = inst.budget
    at_p = None
    m_star = None
    for k in scan:
        if at_p is None and (-len(sup[k]), rank[k]) > key_p:
            at_p = left
        c = inst.costs[k]
        if c <= left:
            if m_star is None and left >= cost > left - c:
                m_star = len(sup[k]) - len(sup[j]) + (1 if rank[k] < rank[j] else 0)
            left -= c
    if at_p is None:
        at_p = left
    return at_p, m_star


# ---------------------------------------------------------------------------
# cost reduction


def _largest_root(balances, q):
    """Largest ``x >= 0`` with ``sum(min(b, q*x)) >= x`` (the function is concave, 0 at 0)."""
    if q == 0:
        return Q(0)
    bs = sorted(b for b in balances if b > 0)
    capped = Q(0)
    uncapped = len(bs)
    start = Q(0)
    for b in bs:
        end = b / q
        # on [start, end]: G(x) = capped + (q*uncapped - 1) * x
        slope = q * uncapped - 1
        if capped + slope * end < 0:
            return start if slope >= 0 else max(start, capped / -slope)
        capped += b
        uncapped -= 1
        start = end
    return max(start, capped)


def _cost_candidates(an: OutcomeAnalysis, j: int) -> list:
    """Per decision point ``(sup of winning costs, attained, label)``."""
    inst = an.instance
    sup = inst.supporters[j]
    out = []
    for pt in an.points:
        cb, vc = pt.state.class_balance, pt.state.voter_class
        bal = [cb[vc[v]] for v in sup]
        if pt.kind == "ph_end":
            if sup:
                out.append((pt.budget_left, True, pt.label))
            continue
        if pt.kind == "eq_end":
            out.append((sum(bal, Q(0)), True, pt.label))
            continue
        p_first = an.rank[j] < an.rank[pt.rival]
        if pt.kind == "ph":
            funds = sum(bal, Q(0))
            if pt.simultaneous and not p_first:
                continue
            if pt.budget_left < funds:
                out.append((pt.budget_left, True, pt.label))
            elif p_first:
                out.append((funds, True, pt.label))
            elif not pt.simultaneous:
                out.append((funds, False, pt.label))
            continue
        q = pt.value
        x = _largest_root(bal, q)
        if p_first:
            out.append((x, True, pt.label))
        elif q == 0:
            continue
        elif q * sum(1 for b in bal if b > 0) > 1:
            out.append((x, max(bal) < q * x, pt.label))
        else:
            out.append((Q(0), True, pt.label))
    return out


def cost_reduction(instance: Instance, rule, order: TieBreakOrder, pid: str,
                   analysis: Optional[OutcomeAnalysis] = None, bisection_steps: int = 40) -> MeasureResult:
    """Supremum of the costs at which ``pid`` would be funded.

    ``diagnostics["attained"]`` tells whether the supremum itself funds the
    project (with an unfavourable tie it can be a strict supremum).
    """
    kind = MeasureKind.COST_RED
    an = _analysis(instance, rule, order, analysis)
    j = an.require_losing(pid)
    cost = instance.costs[j]
    if an.rule is Rule.AV:
        left, _ = _av_scan(an, j)
        return _defined(kind, pid, instance, left, attained=True)
    if not instance.supporters[j]:
        return _undefined(kind, pid, "no-supporters")
    if an.rule is Rule.EQ_INCREMENT:
        return _cost_by_bisection(an, pid, bisection_steps)
    cands = sorted(_cost_candidates(an, j), key=lambda c: (c[0], c[1]), reverse=True)
    tried = []
    for x, attained, label in cands:
        x = min(x, cost)
        if tried and x >= tried[-1][0]:
            continue  # a failed larger candidate already covered this one
        # one rerun: at the candidate itself if attained, just below it otherwise
        probe = x if attained or x == 0 else x - x / 10**6
        if funded(instance.with_cost(pid, probe), an.spec, an.order, pid):
            return _defined(kind, pid, instance, x, attained=attained, point=label,
                            candidates=[[fraction_str(c), a, lab] for c, a, lab in cands])
        tried.append((x, attained))
    return _undefined(kind, pid, "no-verified-candidate")


def _cost_by_bisection(an: OutcomeAnalysis, pid: str, steps: int) -> MeasureResult:
    inst = an.instance
    cost = inst.project(pid).cost

    def ok(x):
        return funded(inst.with_cost(pid, x), an.spec, an.order, pid)

    if not ok(Q(0)):
        return _undefined(MeasureKind.COST_RED, pid, "not-funded-at-zero-cost")
    lo, hi = Q(0), cost
    for _ in range(steps):
        mid = (lo + hi) / 2
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return _defined(MeasureKind.COST_RED, pid, inst, lo, attained=True,
                    bracket=[fraction_str(lo), fraction_str(hi)], method="bisection")


# ---------------------------------------------------------------------------
# optimist


def _optimist_at(an: OutcomeAnalysis, i: int, j: int, pool_size: int) -> Optional[int]:
    pt = an.points[i]
    req = an.requirement(pt, j)
    if req is None:
        return None
    if req.any_voter:
        return 1 if pool_size >= 1 else None
    if req.wins(Q(0), 0, True):
        return 0
    cap = an.cap(pt, an.instance.costs[j])
    cb = pt.state.class_balance
    total, k, flat = Q(0), 0, True
    for c, cnt in an.pool_classes(i, j):
        b = cb[c]
        val = b if cap is None or b < cap else cap
        below = cap is None or b < cap
        if val == 0:
            return None
        need = req.need - total
        t = max(1, _ceil(need / val)) if need > 0 else 1
        if t <= cnt:
            s = total + t * val
            if req.wins(s, k + t, flat and below):
                return k + t
            if t + 1 <= cnt:
                return k + t + 1
        total += cnt * val
        k += cnt
        flat = flat and below
    return None


def optimist_add(instance: Instance, rule, order: TieBreakOrder, pid: str,
                 analysis: Optional[OutcomeAnalysis] = None) -> MeasureResult:
    """Fewest extra approvers that fund ``pid`` when chosen as favourably as possible."""
    kind = MeasureKind.OPTIMIST_ADD
    an = _analysis(instance, rule, order, analysis)
    j = an.require_losing(pid)
    pool = population(instance, pid, PerturbKind.ADD_APPROVALS)
    if an.rule is Rule.AV:
        return _av_add(kind, an, j, pool)
    if an.rule is Rule.EQ_INCREMENT:
        return _undefined(kind, pid, "unsupported-rule")
    cands = []
    for i, pt in enumerate(an.points):
        k = _optimist_at(an, i, j, len(pool))
        if k is not None and k <= len(pool):
            cands.append((k, i))
    if not cands:
        return _undefined(kind, pid, "pool-exhausted")
    k, i = min(cands)
    order_ = an.pool_voters(i, j)
    while k <= len(order_):
        chosen = order_[:k]
        if funded(_with_added(instance, pid, chosen), an.spec, an.order, pid):
            return _defined(kind, pid, instance, k, point=an.points[i].label,
                            witness=[instance.voter_ids[v] for v in chosen],
                            candidates=[[c, an.points[p].label] for c, p in cands])
        k += 1
    return _undefined(kind, pid, "pool-exhausted")


def _av_add(kind, an: OutcomeAnalysis, j: int, pool, limit_to_pool=True) -> MeasureResult:
    inst = an.instance
    pid = inst.projects[j].id
    if inst.costs[j] > inst.budget:
        return _undefined(kind, pid, "cost-exceeds-budget")
    _, m = _av_scan(an, j)
    if m is None:  # pragma: no cover - only possible for a funded project
        return _undefined(kind, pid, "no-position")
    if limit_to_pool and m > len(pool):
        return _undefined(kind, pid, "pool-exhausted", needed=m)
    return _defined(kind, pid, inst, m, closed_form="greedy-av")


# ---------------------------------------------------------------------------
# pessimist


def pessimist_add(instance: Instance, rule, order: TieBreakOrder, pid: str,
                  analysis: Optional[OutcomeAnalysis] = None) -> MeasureResult:
    """Smallest ``l`` such that every choice of ``l`` extra approvers funds ``pid``."""
    kind = MeasureKind.PESSIMIST_ADD
    an = _analysis(instance, rule, order, analysis)
    j = an.require_losing(pid)
    pool = population(instance, pid, PerturbKind.ADD_APPROVALS)
    if an.rule is Rule.AV:
        return _av_add(kind, an, j, pool)
    if an.rule is Rule.EQ_INCREMENT:
        return _undefined(kind, pid, "unsupported-rule")
    problem = _pessimist_problem(an, j)
    sol = solve_integer_packing(problem.uppers, problem.rows, problem.caps, problem.strict,
                                problem.waived)
    groups = problem.members
    if sol.optimum >= len(pool):
        return _undefined(kind, pid, "pool-exhausted", blocking=sol.optimum)
    sup = an.supporter_set(j)
    chosen = []
    for x, members in zip(sol.witness, groups):
        if x:
            avail = (v for t in members for v in an.voters_by_type[t] if v not in sup)
            chosen.extend(next(avail) for _ in range(x))
    if funded(_with_added(instance, pid, chosen), an.spec, an.order, pid):
        raise AssertionError(f"pessimist witness for {pid!r} unexpectedly funds it")
    return _defined(kind, pid, instance, sol.optimum + 1, blocking_set_size=sol.optimum,
                    variables=len(groups), constraints=len(problem.rows),
                    nodes=sol.nodes, certified=sol.certified)


def _pessimist_problem(an: OutcomeAnalysis, j: int) -> "_Packing":
    """Packing problem: largest set of added approvers that still loses everywhere.

    One variable per group of non-supporter types with equal coefficients;
    every row is scaled to integers.
    """
    inst = an.instance
    cost = inst.costs[j]
    types = an.type_array
    counts = np.bincount(types, minlength=len(an.voter_types[1]))
    sup = inst.supporter_arrays[j]
    if len(sup):
        counts = counts - np.bincount(types[sup], minlength=len(counts))
    live = np.flatnonzero(counts > 0)
    H = an.type_matrix[live]
    rows, caps, strict, flat_rows, keys = [], [], [], [], []
    for i, pt in enumerate(an.points):
        req = an.requirement(pt, j)
        if req is None:
            continue
        if req.any_voter:
            rows.append(np.ones(len(live), dtype=object))
            caps.append(0)
            strict.append(False)
            flat_rows.append(None)
            keys.append(np.zeros(len(live), dtype=np.int64))
            continue
        cap = an.cap(pt, cost)
        scaled, rank, D = an.point_scale(i)
        den = lcm(D, int(req.need.denominator))
        if cap is not None:
            den = lcm(den, int(cap.denominator))
        table = scaled * (den // D)
        col = H[:, i]
        if cap is None:
            at_cap = None
            key = rank
        else:
            cap_int = int(cap * den)
            at_cap = table >= cap_int
            table = np.where(at_cap, cap_int, table)
            # every class at or above the cap shares one coefficient
            key = np.where(at_cap, -1, rank)
        rows.append(table[col])
        caps.append(int(req.need * den))
        keys.append(key[col])
        strict.append(bool(req.equal_wins or req.equal_wins_if_flat))
        if req.equal_wins_if_flat and not req.equal_wins and at_cap is not None:
            flat_rows.append(at_cap.astype(bool)[col])
        else:
            flat_rows.append(None)
    # merge types with identical coefficient vectors
    if keys:
        _, first, inverse = np.unique(np.stack(keys, axis=1), axis=0, return_index=True,
                                      return_inverse=True)
        inverse = inverse.reshape(-1)
    else:
        first, inverse = np.zeros(min(1, len(live)), dtype=np.int64), np.zeros(len(live), dtype=np.int64)
    uppers = np.bincount(inverse, weights=counts[live], minlength=len(first)).astype(np.int64)
    members = [[] for _ in first]
    for t, g in zip(live.tolist(), inverse.tolist()):
        members[g].append(t)
    rows = [r[first].tolist() for r in rows]
    waived = [() if fr is None else tuple(np.flatnonzero(fr[first].astype(bool)).tolist())
              for fr in flat_rows]
    if any(c < (1 if st else 0) for c, st in zip(caps, strict)):
        raise MeasureError("pessimist packing with an unsatisfiable empty row")
    return _Packing(uppers.tolist(), rows, caps, strict, waived, members)


@dataclass
class _Packing:
    uppers: list
    rows: list
    caps: list
    strict: list
    waived: list
    members: list  # voter types behind each variable


# ---------------------------------------------------------------------------
# 50%-add and rivalry reduction


def fifty_percent_add(instance: Instance, rule, order: TieBreakOrder, pid: str,
                      cfg: SamplingConfig = SamplingConfig(),
                      analysis: Optional[OutcomeAnalysis] = None) -> MeasureResult:
    """Smallest ``l`` on the step grid with funding frequency >= threshold."""
    kind = MeasureKind.FIFTY_ADD
    an = _analysis(instance, rule, order, analysis)
    j = an.require_losing(pid)
    pool = population(instance, pid, PerturbKind.ADD_APPROVALS)
    if an.rule is Rule.AV:
        return _av_add(kind, an, j, pool)
    grid = cfg.grid(instance.score(pid), len(pool))
    if pool and (not grid or grid[-1] != len(pool)) and cfg.max_steps is None:
        grid.append(len(pool))
    profile = []
    for ell in grid:
        freq, exact = funding_frequency(instance, an.spec, an.order, pid,
                                        Perturbation(PerturbKind.ADD_APPROVALS, ell), cfg)
        profile.append([ell, fraction_str(freq), exact])
        if freq >= cfg.threshold:
            return _defined(kind, pid, instance, ell, profile=profile)
    return _undefined(kind, pid, "pool-exhausted" if cfg.max_steps is None else "step-cap",
                      profile=profile)


def rivalry_reduction(instance: Instance, rule, order: TieBreakOrder, pid: str,
                      cfg: SamplingConfig = SamplingConfig(),
                      analysis: Optional[OutcomeAnalysis] = None) -> MeasureResult:
    """Smallest ``l`` such that rewriting ``l`` random supporters to ``{pid}`` funds it w.p. >= threshold."""
    kind = MeasureKind.RIVAL_RED
    an = _analysis(instance, rule, order, analysis)
    an.require_losing(pid)
    score = instance.score(pid)
    if score == 0:
        return _undefined(kind, pid, "no-supporters")
    grid = cfg.grid(score, score)
    if not grid or grid[-1] != score:
        grid.append(score)
    profile = []
    for ell in grid:
        freq, exact = funding_frequency(instance, an.spec, an.order, pid,
                                        Perturbation(PerturbKind.REMOVE_RIVALS, ell), cfg)
        profile.append([ell, fraction_str(freq), exact])
        if freq >= cfg.threshold:
            return _defined(kind, pid, instance, ell, profile=profile)
    return _undefined(kind, pid, "too-few-supporters", profile=profile)


# ---------------------------------------------------------------------------
# singleton-add


def eq_singleton_bound(instance: Instance, pid: str) -> Optional[int]:
    """Number of singletons that certainly wins round one of Equal-Shares (None: never)."""
    n, B = instance.n_voters, instance.budget
    cost = instance.project(pid).cost
    a = instance.score(pid)
    if cost > B or (cost == B and a < n):
        return None
    bound = n - a + 1
    if cost < B:
        bound = max(bound, _ceil((cost * n - a * B) / (B - cost)))
    return max(bound, 1)


def singleton_add(instance: Instance, rule, order: TieBreakOrder, pid: str,
                  cfg: SamplingConfig = SamplingConfig(), cap: Optional[int] = None,
                  analysis: Optional[OutcomeAnalysis] = None, full_profile: bool = False) -> MeasureResult:
    """Fewest added voters approving only ``pid`` that get it funded."""
    kind = MeasureKind.SINGLETON_ADD
    an = _analysis(instance, rule, order, analysis)
    j = an.require_losing(pid)
    if an.rule is Rule.AV:
        return _av_add(kind, an, j, (), limit_to_pool=False)
    if an.rule is Rule.PHRAGMEN:
        return _singleton_phragmen(an, j, cap)
    return _singleton_scan(an, j, cfg, cap, full_profile)


def _singleton_phragmen(an: OutcomeAnalysis, j: int, cap: Optional[int]) -> MeasureResult:
    kind = MeasureKind.SINGLETON_ADD
    inst = an.instance
    pid = inst.projects[j].id
    cands = []
    for pt in an.points:
        req = an.requirement(pt, j)
        if req is None:
            continue
        if req.any_voter:
            cands.append((1, pt.label))
            continue
        T = pt.value
        if T == 0:
            continue
        m = max(1, _ceil(req.need / T))
        if m * T == req.need and not req.equal_wins:
            m += 1
        cands.append((m, pt.label))
    if not cands:
        return _undefined(kind, pid, "no-room-for-project")
    m, label = min(cands)
    limit = m + inst.n_voters if cap is None else cap
    while m <= limit:
        if funded(inst.with_singletons(pid, m), an.spec, an.order, pid):
            return _defined(kind, pid, inst, m, point=label,
                            candidates=[[c, lab] for c, lab in cands])
        m += 1
    return _undefined(kind, pid, "scan-cap")


def _singleton_scan(an: OutcomeAnalysis, j: int, cfg: SamplingConfig, cap, full_profile) -> MeasureResult:
    kind = MeasureKind.SINGLETON_ADD
    inst = an.instance
    pid = inst.projects[j].id
    cost, B = inst.costs[j], inst.budget
    if cost > B:
        return _undefined(kind, pid, "cost-exceeds-budget")
    bound = eq_singleton_bound(inst, pid)
    if bound is None and an.rule is Rule.EQ:
        return _undefined(kind, pid, "cost-equals-budget-without-unanimity")
    if cap is None:
        # without a round-one guarantee (cost == budget, phragmen completion) the
        # scan length is a convention
        cap = max(inst.n_voters, bound) if bound is not None else 10 * (inst.n_voters + 1)
    step = cfg.step_for(inst.score(pid))
    # plain Equal-Shares: fewer singletons than this cannot make p affordable
    floor_ = 1
    if an.rule is Rule.EQ and cost < B:
        n, a = inst.n_voters, inst.score(pid)
        floor_ = max(1, _ceil((cost * n - a * B) / (B - cost)))
    profile = []
    found = None
    ell = 1
    while ell <= cap:
        if ell < floor_:
            ok = False
        else:
            ok = funded(inst.with_singletons(pid, ell), an.spec, an.order, pid)
        profile.append([ell, ok])
        if ok and found is None:
            found = ell
            if not full_profile:
                break
        ell += step
    if found is None:
        return _undefined(kind, pid, "scan-cap", profile=_compress(profile))
    return _defined(kind, pid, inst, found, profile=_compress(profile))


def _compress(profile):
    """Run-length form ``[[first_l, last_l, funded], ...]`` of a scan profile."""
    out = []
    for ell, ok in profile:
        if out and out[-1][2] == ok:
            out[-1][1] = ell
        else:
            out.append([ell, ell, ok])
    return out


# ---------------------------------------------------------------------------
# dispatch, curves and grids


def compute_measure(kind, instance: Instance, rule, order: TieBreakOrder, pid: str,
                    cfg: SamplingConfig = SamplingConfig(),
                    analysis: Optional[OutcomeAnalysis] = None) -> MeasureResult:
    kind = MeasureKind(kind)
    an = _analysis(instance, rule, order, analysis)
    if kind is MeasureKind.COST_RED:
        return cost_reduction(instance, rule, order, pid, an)
    if kind is MeasureKind.OPTIMIST_ADD:
        return optimist_add(instance, rule, order, pid, an)
    if kind is MeasureKind.PESSIMIST_ADD:
        return pessimist_add(instance, rule, order, pid, an)
    if kind is MeasureKind.FIFTY_ADD:
        return fifty_percent_add(instance, rule, order, pid, cfg, an)
    if kind is MeasureKind.SINGLETON_ADD:
        return singleton_add(instance, rule, order, pid, cfg, analysis=an)
    return rivalry_reduction(instance, rule, order, pid, cfg, an)


@dataclass(frozen=True)
class Curve:
    mode: PerturbKind
    points: tuple  # ((l, frequency, exact), ...)

    def to_rows(self):
        return [(ell, fraction_str(f), round(float(f), 6), exact) for ell, f, exact in self.points]


def funding_curve(instance: Instance, rule, order: TieBreakOrder, pid: str, mode,
                  cfg: SamplingConfig = SamplingConfig(),
                  analysis: Optional[OutcomeAnalysis] = None) -> Curve:
    """Funding frequency along the step grid.

    Adding approvals can only help, so ADD curves stop at the first point
    with frequency 1.
    """
    mode = PerturbKind(mode)
    an = _analysis(instance, rule, order, analysis)
    an.require_losing(pid)
    pop = population(instance, pid, mode)
    pts = []
    for ell in cfg.grid(instance.score(pid), len(pop)):
        freq, exact = funding_frequency(instance, an.spec, an.order, pid, Perturbation(mode, ell), cfg)
        pts.append((ell, freq, exact))
        if mode is PerturbKind.ADD_APPROVALS and freq == 1:
            break
    return Curve(mode, tuple(pts))


@dataclass(frozen=True)
class StrategyGrid:
    deltas: tuple
    singletons: tuple
    funded: tuple  # funded[row][col] for deltas[row], singletons[col]

    def cell(self, delta, s) -> bool:
        return self.funded[self.deltas.index(Q(delta))][self.singletons.index(s)]


def default_grid_axes(score: int, delta_steps: int = 10, s_steps: int = 10):
    deltas = tuple(Q(i, delta_steps) for i in range(delta_steps + 1))
    singles = sorted({_ceil(Q(k * max(score, 1), s_steps)) for k in range(s_steps + 1)})
    return deltas, tuple(singles)


def strategy_grid(instance: Instance, rule, order: TieBreakOrder, pid: str,
                  deltas: Sequence, singletons: Sequence,
                  analysis: Optional[OutcomeAnalysis] = None) -> StrategyGrid:
    """Funded flags after cutting the cost by ``delta`` and adding ``s`` singletons."""
    an = _analysis(instance, rule, order, analysis)
    an.require_losing(pid)
    deltas = tuple(Q(d) for d in deltas)
    if any(not 0 <= d <= 1 for d in deltas):
        raise ValueError("cost reductions must lie in [0, 1]")
    cost = instance.project(pid).cost
    rows = []
    for d in deltas:
        cheaper = instance.with_cost(pid, (1 - d) * cost)
        rows.append(tuple(funded(cheaper.with_singletons(pid, s), an.spec, an.order, pid)
                          for s in singletons))
    return StrategyGrid(deltas, tuple(singletons), tuple(rows))
