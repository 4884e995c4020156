"""Round-based execution of GreedyAV, Phragmén and Equal-Shares.

Voter balances are kept in *classes*: voters whose balances are equal share
a class id, and each round only remaps the classes of the voters who paid.
This keeps exact arithmetic cheap on instances with tens of thousands of
voters, and the per-round class snapshots double as the balance vectors
used by the measure computations.

Phragmén balances are stored as offsets: a voter's balance at time ``t`` is
``t + offset`` (everybody earns one unit per unit of time), so a purchase
at time ``t`` moves its payers to the class with offset ``-t``.
"""
from __future__ import annotations

import heapq
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .model import ExactAmount, Instance, Q, Rule, RuleSpec, TieBreakOrder, fraction_str


class RuleError(ValueError):
    """Raised for inputs a rule cannot run on (no voters, bad options)."""


class StopRun(Exception):
    """Raise from a round hook to end the run early; the partial trace is kept."""


class _Decided(Exception):
    """Internal: the watched project's fate is known before the run ends."""

    def __init__(self, funded: bool):
        super().__init__(funded)
        self.funded = funded


@dataclass(frozen=True)
class Snapshot:
    """Balances of all voters at one moment, in class-compressed form."""

    voter_class: tuple
    class_balance: tuple

    def balance(self, v: int) -> ExactAmount:
        return self.class_balance[self.voter_class[v]]

    def as_dict(self, voter_ids: Sequence[str]) -> dict:
        cb, vc = self.class_balance, self.voter_class
        return {vid: cb[vc[v]] for v, vid in enumerate(voter_ids)}


@dataclass(frozen=True)
class RoundTrace:
    round_index: int
    selected: str
    phase: Rule
    event_value: Optional[ExactAmount]
    remaining_budget_before: ExactAmount
    pre: Optional[Snapshot] = None
    payers: tuple = ()
    class_payment: Mapping[int, ExactAmount] = field(default_factory=dict)
    voter_ids: tuple = field(default=(), repr=False, compare=False)

    @property
    def pre_round_balances(self) -> dict:
        return {} if self.pre is None else self.pre.as_dict(self.voter_ids)

    @property
    def payments(self) -> dict:
        if self.pre is None:
            return {}
        vc, pay = self.pre.voter_class, self.class_payment
        return {self.voter_ids[v]: pay[vc[v]] for v in self.payers}

    def payment_total(self) -> ExactAmount:
        if self.pre is None:
            return Q(0)
        vc, pay = self.pre.voter_class, self.class_payment
        return sum((pay[vc[v]] for v in self.payers), Q(0))

    def to_dict(self) -> dict:
        return {
            "round": self.round_index,
            "project": self.selected,
            "phase": self.phase.value,
            "event_value": None if self.event_value is None else fraction_str(self.event_value),
            "remaining_budget_before": fraction_str(self.remaining_budget_before),
        }


@dataclass(frozen=True)
class PhaseEnd:
    phase: Rule
    state: Snapshot
    spent: ExactAmount
    time: ExactAmount = Q(0)


@dataclass(frozen=True)
class Outcome:
    rule: Rule
    selected: tuple
    trace: tuple
    terminal_remaining_budget: ExactAmount
    terminal: Optional[Snapshot] = None
    phase_ends: tuple = ()
    endowment: Optional[ExactAmount] = None
    completed: bool = True
    voter_ids: tuple = field(default=(), repr=False, compare=False)

    @property
    def terminal_balances(self) -> dict:
        return {} if self.terminal is None else self.terminal.as_dict(self.voter_ids)

    def __contains__(self, pid: str) -> bool:
        return pid in self.selected

    def to_dict(self) -> dict:
        out = {
            "rule": self.rule.value,
            "selected": list(self.selected),
            "rounds": [t.to_dict() for t in self.trace],
            "terminal_remaining_budget": fraction_str(self.terminal_remaining_budget),
            "completed": self.completed,
        }
        if self.endowment is not None:
            out["endowment"] = fraction_str(self.endowment)
        return out


class _Book:
    """Class table shared by all voters of one run."""

    __slots__ = ("values", "index", "voter_class")

    def __init__(self, values, voter_class):
        self.values = list(values)
        self.index = {}
        for c, val in enumerate(self.values):
            self.index.setdefault(val, c)
        self.voter_class = list(voter_class)

    @classmethod
    def from_balances(cls, balances: Sequence[ExactAmount]) -> "_Book":
        book = cls((), ())
        book.voter_class = [book.intern(b) for b in balances]
        return book

    def intern(self, value) -> int:
        c = self.index.get(value)
        if c is None:
            c = len(self.values)
            self.values.append(value)
            self.index[value] = c
        return c

    def snapshot(self, shift=None) -> Snapshot:
        if shift is None:
            return Snapshot(tuple(self.voter_class), tuple(self.values))
        return Snapshot(tuple(self.voter_class), tuple(shift + v for v in self.values))


def eq_q_from_classes(items, cost) -> Optional[ExactAmount]:
    """Smallest ``q`` with ``sum(n * min(b, q*cost)) == cost``, or None.

    ``items`` is a sequence of ``(balance, count)`` pairs sorted by balance.
    """
    if cost == 0:
        return Q(0)
    capped = Q(0)
    rem = 0
    for _, n in items:
        rem += n
    for b, n in items:
        # candidate per-voter payment (cost - capped) / rem, tested without dividing
        if cost - capped <= b * rem:
            return (cost - capped) / (rem * cost)
        capped += b * n
        rem -= n
    return None


# relative tolerance inside which float screening defers to exact arithmetic
_WINDOW = 1e-9


class RuleRun:
    """One execution of a rule, with optional per-round observers."""

    def __init__(self, instance: Instance, rule, order: TieBreakOrder, keep_trace: bool = True):
        self.instance = instance
        self.spec = RuleSpec.of(rule)
        self.order = order
        self.keep_trace = keep_trace
        self.hooks: list = []
        self.watch: Optional[int] = None
        self._trace: list = []
        self._rank = [order.rank[p.id] for p in instance.projects] if instance.projects else []
        if len(order.ids) != instance.n_projects:
            order.check(instance)

    def register_round_hook(self, hook: Callable[[RoundTrace], None]) -> None:
        self.hooks.append(hook)

    # -- plumbing ----------------------------------------------------------

    def _emit(self, rt: RoundTrace) -> None:
        for hook in self.hooks:
            hook(rt)
        if self.keep_trace:
            self._trace.append(rt)

    @property
    def _observed(self) -> bool:
        return self.keep_trace or bool(self.hooks)

    def execute(self) -> Outcome:
        kind = self.spec.kind
        inst = self.instance
        self._trace = []
        self._selected: list = []
        self._ends: list = []
        self._terminal = None
        self._remaining = inst.budget
        self._endowment = None
        completed = True
        try:
            if kind is Rule.AV:
                self._av()
            elif kind is Rule.PHRAGMEN:
                self._phragmen_entry()
            elif kind is Rule.EQ:
                self._eq(self.spec.endowment)
            elif kind is Rule.EQ_PHRAGMEN:
                book = self._eq(None)
                self._phragmen(book, set(self._selected_idx), inst.budget - self._remaining)
            elif kind is Rule.EQ_INCREMENT:
                return self._eq_increment()
        except StopRun:
            completed = False
        return Outcome(kind, tuple(self._selected), tuple(self._trace), self._remaining,
                       self._terminal, tuple(self._ends), self._endowment, completed,
                       inst.voter_ids)

    # -- GreedyAV ----------------------------------------------------------

    def _av(self) -> None:
        inst, rank = self.instance, self._rank
        scan = sorted(range(inst.n_projects), key=lambda j: (-len(inst.supporters[j]), rank[j]))
        rnd = 0
        for j in scan:
            cost = inst.costs[j]
            if cost <= self._remaining:
                rnd += 1
                self._emit(RoundTrace(rnd, inst.projects[j].id, Rule.AV, None, self._remaining,
                                      voter_ids=inst.voter_ids))
                self._remaining -= cost
                self._selected.append(inst.projects[j].id)

    # -- Phragmén ----------------------------------------------------------

    def _phragmen_entry(self) -> None:
        inst, spec = self.instance, self.spec
        if inst.n_voters == 0:
            raise RuleError("Phragmén needs at least one voter")
        pre = set()
        for pid in spec.preselected:
            pre.add(inst.project_index[pid])
            self._selected.append(pid)
        spent = sum((inst.costs[j] for j in pre), Q(0))
        if spent > inst.budget:
            raise RuleError("preselected projects exceed the budget")
        self._remaining = inst.budget - spent
        if spec.initial_balances is not None:
            bal = spec.initial_balances
            if set(bal) != set(inst.voter_ids):
                raise RuleError("initial balances must cover exactly the instance's voters")
            book = _Book.from_balances([Q(bal[v]) for v in inst.voter_ids])
            if any(b < 0 for b in book.values):
                raise RuleError("initial balances must be nonnegative")
        else:
            book = _Book([Q(0)], [0] * inst.n_voters)
        self._phragmen(book, pre, spent)

    def _phragmen(self, book: _Book, chosen: set, spent) -> None:
        inst, rank = self.instance, self._rank
        costs, sup, appr, budget = inst.costs, inst.supporters, inst.approvals, inst.budget
        if inst.n_voters == 0:
            raise RuleError("Phragmén needs at least one voter")
        vals, vcls = book.values, book.voter_class
        funds = [sum((vals[vcls[v]] for v in s), Q(0)) for s in sup]
        live = [j for j in range(inst.n_projects) if sup[j] and j not in chosen]
        now = Q(0)
        rnd = len(self._trace)
        watch = self.watch
        if watch is not None and watch not in chosen and not sup[watch]:
            raise _Decided(False)
        while True:
            if watch is not None and watch not in chosen and spent + costs[watch] > budget:
                raise _Decided(False)
            best = None
            for j in live:
                cost = costs[j]
                if spent + cost > budget:
                    continue
                t = (cost - funds[j]) / len(sup[j])
                if t < now:
                    t = now
                if best is None or t < bt or (t == bt and rank[j] < rank[best]):
                    best, bt = j, t
            if best is None:
                break
            j, t = best, bt
            if j == watch:
                raise _Decided(True)
            rnd += 1
            if self._observed:
                snap = book.snapshot(shift=t)
                pay = {c: snap.class_balance[c] for c in {vcls[v] for v in sup[j]}}
                self._emit(RoundTrace(rnd, inst.projects[j].id, Rule.PHRAGMEN, t,
                                      budget - spent, snap, sup[j], pay, inst.voter_ids))
            reset = book.intern(-t)
            moved = defaultdict(int)
            for v in sup[j]:
                old = vcls[v]
                if old != reset:
                    vcls[v] = reset
                    for j2 in appr[v]:
                        moved[j2, old] += 1
            for (j2, old), cnt in moved.items():
                funds[j2] += cnt * (-t - vals[old])
            spent += costs[j]
            chosen.add(j)
            live.remove(j)
            self._selected.append(inst.projects[j].id)
            self._remaining = budget - spent
            now = t
        if watch is not None:
            raise _Decided(watch in chosen)
        self._terminal = book.snapshot(shift=now)
        self._ends.append(PhaseEnd(Rule.PHRAGMEN, self._terminal, spent, now))

    # -- Equal-Shares ------------------------------------------------------

    @property
    def _selected_idx(self):
        idx = self.instance.project_index
        return [idx[p] for p in self._selected]

    def _eq(self, endowment) -> _Book:
        inst, rank = self.instance, self._rank
        n = inst.n_voters
        if n == 0:
            raise RuleError("Equal-Shares needs at least one voter")
        costs, sup = inst.costs, inst.supporters
        arrays, incidence = inst.supporter_arrays, inst.incidence
        e = inst.budget / n if endowment is None else Q(endowment)
        self._endowment = e
        book = _Book([e], ())
        vals = book.values
        # voter classes live in an array so per-project class counts are one
        # bincount; a float copy of the class values screens candidates and
        # exact arithmetic settles the winner and anything within _WINDOW
        vcls = np.zeros(n, dtype=np.intp)
        vf = np.empty(256)
        vf[0] = float(e)
        costs_f = [float(c) for c in costs]

        def counts(j):
            cnt = np.bincount(vcls[arrays[j]])
            nz = np.flatnonzero(cnt)
            return nz, cnt[nz]

        def exact_q(j):
            nz, k = counts(j)
            items = sorted(zip((vals[c] for c in nz.tolist()), k.tolist()), key=_first)
            return eq_q_from_classes(items, costs[j])

        def float_q(j):
            """Approximate q, or None when certainly unaffordable."""
            cost = costs_f[j]
            if cost == 0:
                return 0.0
            nz, k = counts(j)
            b = vf[nz]
            order = np.argsort(b)
            b, k = b[order], k[order]
            paid = b * k
            total = paid.sum()
            if total < cost * (1 - _WINDOW):
                return None
            if total <= cost * (1 + _WINDOW):
                q = exact_q(j)
                return None if q is None else float(q)
            capped = np.cumsum(paid) - paid
            rem = k.sum() - (np.cumsum(k) - k)
            i = int(np.argmax(cost - capped <= b * rem))
            return (cost - capped[i]) / (rem[i] * cost)

        def unaffordable(j):
            if j == self.watch and self.spec.kind is Rule.EQ:
                raise _Decided(False)

        dirty = [False] * inst.n_projects
        # balances only decrease, so a stale q is a lower bound on the current
        # one: lazy evaluation through a heap keyed by (q, rank)
        heap = []
        for j in range(inst.n_projects):
            k = len(sup[j])
            # everybody holds e: affordable iff k * e >= cost, and then q = 1/k
            if k and k * e >= costs[j]:
                heap.append((0.0 if costs[j] == 0 else 1.0 / k, rank[j], j))
        heapq.heapify(heap)
        if self.watch is not None and self.spec.kind is Rule.EQ and \
                all(j != self.watch for _, _, j in heap):
            raise _Decided(False)
        spent = Q(0)
        rnd = len(self._trace)
        while heap:
            qf, r, j = heapq.heappop(heap)
            if dirty[j]:
                dirty[j] = False
                qf = float_q(j)
                if qf is None:
                    unaffordable(j)
                else:
                    heapq.heappush(heap, (qf, r, j))
                continue
            # every project that could tie or beat j exactly has a key in the window
            limit = qf * (1 + _WINDOW)
            cands = [(qf, r, j)]
            while heap and heap[0][0] <= limit:
                q2, r2, j2 = heapq.heappop(heap)
                if dirty[j2]:
                    dirty[j2] = False
                    q2 = float_q(j2)
                    if q2 is None:
                        unaffordable(j2)
                        continue
                    if q2 > limit:
                        heapq.heappush(heap, (q2, r2, j2))
                        continue
                cands.append((q2, r2, j2))
            if len(cands) == 1:
                q = exact_q(j)
            else:
                exact = [(exact_q(jc), rc, jc) for _, rc, jc in cands]
                q, _, j = min(exact)
                for entry in cands:
                    if entry[2] != j:
                        heapq.heappush(heap, entry)
            if j == self.watch:
                raise _Decided(True)
            cap = q * costs[j]
            nz, k = counts(j)
            pay = {c: (vals[c] if vals[c] < cap else cap) for c in nz.tolist()}
            rnd += 1
            if self._observed:
                book.voter_class = vcls.tolist()
                self._emit(RoundTrace(rnd, inst.projects[j].id, Rule.EQ, q,
                                      inst.budget - spent, book.snapshot(), sup[j], pay,
                                      inst.voter_ids))
            table = np.arange(len(vals) + len(pay) + 1, dtype=np.intp)
            if len(vf) < len(table):
                vf = np.concatenate([vf, np.empty(len(table))])
            zero = None
            for c, amount in pay.items():
                if amount is vals[c]:
                    # paid everything
                    if zero is None:
                        zero = book.intern(Q(0))
                        vf[zero] = 0.0
                    table[c] = zero
                    continue
                c2 = book.intern(vals[c] - amount)
                table[c] = c2
                vf[c2] = float(vals[c2])
            members = arrays[j]
            old = vcls[members]
            new = table[old]
            moved = members[new != old]
            if len(moved):
                for j2 in np.flatnonzero(incidence[moved].any(axis=0)).tolist():
                    dirty[j2] = True
            vcls[members] = new
            dirty[j] = False
            spent += costs[j]
            self._selected.append(inst.projects[j].id)
            self._remaining = inst.budget - spent
        if self.watch is not None and self.spec.kind is Rule.EQ:
            raise _Decided(False)
        book.voter_class = vcls.tolist()
        self._terminal = book.snapshot()
        self._ends.append(PhaseEnd(Rule.EQ, self._terminal, spent))
        return book

    def _eq_increment(self) -> Outcome:
        inst = self.instance
        if inst.n_voters == 0:
            raise RuleError("Equal-Shares needs at least one voter")
        base = inst.budget / inst.n_voters
        approved = {p.id for p, s in zip(inst.projects, inst.supporters) if s}
        previous = None
        step = 0
        while True:
            e = base + step
            out = RuleRun(inst, RuleSpec(Rule.EQ, endowment=e), self.order, keep_trace=False).execute()
            cost = inst.total_cost(out.selected)
            if cost > inst.budget:
                e = base + step - 1
                break
            previous = out
            chosen = set(out.selected)
            exhaustive = all(cost + p.cost > inst.budget for p in inst.projects if p.id not in chosen)
            if exhaustive or approved <= chosen:
                break
            step += 1
        assert previous is not None  # the first run spends at most B
        final = RuleRun(inst, RuleSpec(Rule.EQ, endowment=e), self.order, self.keep_trace)
        final.hooks = list(self.hooks)
        res = final.execute()
        return Outcome(Rule.EQ_INCREMENT, res.selected, res.trace,
                       inst.budget - inst.total_cost(res.selected), res.terminal,
                       res.phase_ends, e, res.completed, inst.voter_ids)


def _first(pair):
    return pair[0]


def register_round_hook(run: RuleRun, hook: Callable[[RoundTrace], None]) -> None:
    run.register_round_hook(hook)


def run_rule(instance: Instance, rule, order: Optional[TieBreakOrder] = None,
             hooks: Sequence[Callable] = (), keep_trace: bool = True) -> Outcome:
    """Run ``rule`` (a :class:`Rule`, its string name, or a :class:`RuleSpec`)."""
    if order is None:
        order = TieBreakOrder.file_order(instance)
    run = RuleRun(instance, rule, order, keep_trace)
    for h in hooks:
        run.register_round_hook(h)
    return run.execute()


def is_selected(instance: Instance, rule, order: TieBreakOrder, pid: str) -> bool:
    return pid in run_rule(instance, rule, order, keep_trace=False).selected


def funded(instance: Instance, rule, order: TieBreakOrder, pid: str) -> bool:
    """Whether ``rule`` selects ``pid``; stops as soon as the answer is known."""
    run = RuleRun(instance, rule, order, keep_trace=False)
    if run.spec.kind in (Rule.AV, Rule.EQ_INCREMENT):
        return pid in run.execute().selected
    run.watch = instance.project_index[pid]
    try:
        out = run.execute()
    except _Decided as d:
        return d.funded
    return pid in out.selected


def eq_affordability(balances: Mapping[str, ExactAmount], supporters, cost):
    """Equal-Shares affordability of one project.

    Returns ``(q, payments)``; ``q`` is None when the supporters cannot
    afford ``cost`` (and ``payments`` is then empty).
    """
    cost = Q(cost)
    if cost <= 0:
        raise ValueError("cost must be positive")
    grouped = defaultdict(int)
    for v in supporters:
        grouped[Q(balances[v])] += 1
    q = eq_q_from_classes(sorted(grouped.items()), cost)
    if q is None:
        return None, {}
    cap = q * cost
    return q, {v: min(Q(balances[v]), cap) for v in supporters}
