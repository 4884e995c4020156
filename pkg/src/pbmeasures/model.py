"""Domain types for approval-based participatory budgeting instances.

All money and time quantities are exact rationals (``gmpy2.mpq`` when
available, ``fractions.Fraction`` otherwise). Floats only appear when a
report is formatted.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

try:
    from gmpy2 import mpq as Q
except ImportError:  # pragma: no cover - gmpy2 is a declared dependency
    from fractions import Fraction as Q

ExactAmount = type(Q(0))

_DECIMAL = re.compile(r"^\d+(\.\d+)?$")


class InstanceError(ValueError):
    """Raised when an instance violates its structural invariants."""


def amount_from_decimal(text: str) -> ExactAmount:
    """Parse ``digits[.digits]`` into an exact rational.

    >>> amount_from_decimal("0.25")
    mpq(1,4)
    """
    token = text.strip()
    if not _DECIMAL.match(token):
        raise ValueError(f"malformed decimal amount: {text!r}")
    return Q(token)


def as_amount(value) -> ExactAmount:
    """Coerce ints, Fractions, mpq or decimal strings to an exact amount."""
    if isinstance(value, str):
        if "/" in value:
            num, den = value.split("/", 1)
            return Q(int(num), int(den))
        return amount_from_decimal(value)
    if isinstance(value, float):
        raise TypeError("floats are not accepted as exact amounts")
    return Q(value)


def fraction_str(value) -> str:
    """Render an exact amount as ``num/den``."""
    value = Q(value)
    return f"{value.numerator}/{value.denominator}"


def decimal_str(value) -> str:
    """Render a terminating rational as a minimal decimal string."""
    value = Q(value)
    den = value.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        raise ValueError(f"{fraction_str(value)} has no finite decimal expansion")
    places = max(twos, fives)
    scaled = value * 10**places
    digits = str(int(scaled))
    if places == 0:
        return digits
    digits = digits.rjust(places + 1, "0")
    head, tail = digits[:-places], digits[-places:].rstrip("0")
    return head if not tail else f"{head}.{tail}"


@dataclass(frozen=True)
class Project:
    id: str
    cost: ExactAmount
    name: Optional[str] = None
    extra: Mapping[str, str] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "cost", as_amount(self.cost))
        # zero cost is allowed for perturbed copies (cost-reduction to 0);
        # parsed files require strictly positive costs
        if self.cost < 0:
            raise InstanceError(f"project {self.id!r} has negative cost")


@dataclass(frozen=True)
class Ballot:
    voter_id: str
    approved: frozenset
    extra: Mapping[str, str] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "approved", frozenset(self.approved))


@dataclass(frozen=True)
class Instance:
    """A PB instance ``(P, V, B)``; projects keep their file order."""

    projects: tuple
    ballots: tuple
    budget: ExactAmount
    meta: Mapping[str, str] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "projects", tuple(self.projects))
        object.__setattr__(self, "ballots", tuple(self.ballots))
        object.__setattr__(self, "budget", as_amount(self.budget))
        self._validate()

    def _validate(self) -> None:
        if self.budget < 0:
            raise InstanceError("budget must be nonnegative")
        seen = set()
        for p in self.projects:
            if p.id in seen:
                raise InstanceError(f"duplicate project id {p.id!r}")
            seen.add(p.id)
        voters = set()
        for b in self.ballots:
            if b.voter_id in voters:
                raise InstanceError(f"duplicate voter id {b.voter_id!r}")
            voters.add(b.voter_id)
            dangling = b.approved - seen
            if dangling:
                raise InstanceError(
                    f"voter {b.voter_id!r} approves unknown project(s) {sorted(dangling)}"
                )

    @classmethod
    def _unchecked(cls, projects, ballots, budget, meta, derived=None) -> "Instance":
        # perturbation helpers only touch already-validated data; ``derived``
        # seeds the cached indices they can patch cheaply
        inst = object.__new__(cls)
        object.__setattr__(inst, "projects", tuple(projects))
        object.__setattr__(inst, "ballots", tuple(ballots))
        object.__setattr__(inst, "budget", budget)
        object.__setattr__(inst, "meta", meta)
        if derived:
            inst.__dict__.update(derived)
        return inst

    @classmethod
    def from_dicts(cls, costs: Mapping[str, object], approvals: Mapping[str, Iterable[str]],
                   budget, meta: Optional[Mapping[str, str]] = None) -> "Instance":
        """Convenience constructor: ``costs`` in project order, ``approvals`` per voter."""
        projects = [Project(pid, as_amount(c)) for pid, c in costs.items()]
        ballots = [Ballot(v, frozenset(a)) for v, a in approvals.items()]
        return cls(projects, ballots, as_amount(budget), dict(meta or {}))

    # --- derived indices -------------------------------------------------

    @property
    def n_voters(self) -> int:
        return len(self.ballots)

    @property
    def n_projects(self) -> int:
        return len(self.projects)

    @cached_property
    def project_index(self) -> dict:
        return {p.id: j for j, p in enumerate(self.projects)}

    @cached_property
    def voter_ids(self) -> tuple:
        return tuple(b.voter_id for b in self.ballots)

    @cached_property
    def voter_id_set(self) -> frozenset:
        return frozenset(self.voter_ids)

    @cached_property
    def costs(self) -> tuple:
        return tuple(p.cost for p in self.projects)

    @cached_property
    def approvals(self) -> tuple:
        """Per voter, the sorted tuple of approved project indices."""
        idx = self.project_index
        return tuple(tuple(sorted(idx[a] for a in b.approved)) for b in self.ballots)

    @cached_property
    def supporters(self) -> tuple:
        """Per project, the tuple of approving voter indices (``A(p)``)."""
        sup = [[] for _ in self.projects]
        for v, approved in enumerate(self.approvals):
            for j in approved:
                sup[j].append(v)
        return tuple(tuple(s) for s in sup)

    @cached_property
    def supporter_arrays(self) -> tuple:
        return tuple(np.asarray(s, dtype=np.intp) for s in self.supporters)

    @cached_property
    def incidence(self):
        """Boolean ``voters x projects`` approval matrix."""
        out = np.zeros((self.n_voters, self.n_projects), dtype=bool)
        for j, arr in enumerate(self.supporter_arrays):
            out[arr, j] = True
        return out

    def _shared(self, *names) -> dict:
        return {k: self.__dict__[k] for k in names if k in self.__dict__}

    def project(self, pid: str) -> Project:
        try:
            return self.projects[self.project_index[pid]]
        except KeyError:
            raise InstanceError(f"unknown project {pid!r}") from None

    def score(self, pid: str) -> int:
        return len(self.supporters[self.project_index[pid]])

    def scores(self) -> dict:
        return {p.id: len(s) for p, s in zip(self.projects, self.supporters)}

    def total_cost(self, pids: Iterable[str]) -> ExactAmount:
        return sum((self.project(pid).cost for pid in pids), Q(0))

    # --- perturbations (always return new instances) ---------------------

    def with_cost(self, pid: str, cost) -> "Instance":
        j = self.project_index[pid]
        old = self.projects[j]
        projects = list(self.projects)
        projects[j] = Project(old.id, as_amount(cost), old.name, old.extra)
        derived = self._shared("project_index", "voter_ids", "approvals", "supporters",
                               "supporter_arrays", "incidence")
        return Instance._unchecked(projects, self.ballots, self.budget, self.meta, derived)

    def with_added_approvals(self, pid: str, voters: Iterable[int]) -> "Instance":
        """Add ``pid`` to the ballots of the given voter indices."""
        self.project(pid)
        j = self.project_index[pid]
        ballots = list(self.ballots)
        approvals = list(self.approvals)
        added = []
        for v in voters:
            b = ballots[v]
            if pid not in b.approved:
                ballots[v] = Ballot(b.voter_id, b.approved | {pid}, b.extra)
                approvals[v] = tuple(sorted(approvals[v] + (j,)))
                added.append(v)
        derived = self._shared("project_index", "voter_ids")
        derived["approvals"] = tuple(approvals)
        derived["supporters"] = _replace(self.supporters, j, tuple(sorted(self.supporters[j] + tuple(added))))
        if "supporter_arrays" in self.__dict__:
            derived["supporter_arrays"] = _replace(self.supporter_arrays, j,
                                                   np.asarray(derived["supporters"][j], dtype=np.intp))
        if "incidence" in self.__dict__:
            inc = self.incidence.copy()
            inc[added, j] = True
            derived["incidence"] = inc
        return Instance._unchecked(self.projects, ballots, self.budget, self.meta, derived)

    def with_singletons(self, pid: str, count: int) -> "Instance":
        """Append ``count`` new voters who approve only ``pid``."""
        self.project(pid)
        j = self.project_index[pid]
        taken = self.voter_id_set
        ballots = list(self.ballots)
        k = 0
        while count > 0:
            vid = f"~single{k}"
            k += 1
            if vid in taken:
                continue
            ballots.append(Ballot(vid, frozenset((pid,))))
            count -= 1
        n0, n1 = len(self.ballots), len(ballots)
        derived = self._shared("project_index")
        derived["approvals"] = self.approvals + ((j,),) * (n1 - n0)
        derived["supporters"] = _replace(self.supporters, j, self.supporters[j] + tuple(range(n0, n1)))
        if "supporter_arrays" in self.__dict__:
            derived["supporter_arrays"] = _replace(self.supporter_arrays, j,
                                                   np.asarray(derived["supporters"][j], dtype=np.intp))
        if "incidence" in self.__dict__:
            extra = np.zeros((n1 - n0, self.n_projects), dtype=bool)
            extra[:, j] = True
            derived["incidence"] = np.vstack([self.incidence, extra])
        return Instance._unchecked(self.projects, ballots, self.budget, self.meta, derived)

    def with_rivals_removed(self, pid: str, voters: Iterable[int]) -> "Instance":
        """Rewrite the ballots of the given supporters of ``pid`` to ``{pid}``."""
        j = self.project_index[pid]
        ballots = list(self.ballots)
        approvals = list(self.approvals)
        dropped = {}
        for v in voters:
            b = ballots[v]
            if pid not in b.approved:
                raise InstanceError(f"voter {b.voter_id!r} does not approve {pid!r}")
            ballots[v] = Ballot(b.voter_id, frozenset((pid,)), b.extra)
            for k in approvals[v]:
                if k != j:
                    dropped.setdefault(k, set()).add(v)
            approvals[v] = (j,)
        supporters = list(self.supporters)
        for k, gone in dropped.items():
            supporters[k] = tuple(v for v in supporters[k] if v not in gone)
        derived = self._shared("project_index", "voter_ids")
        derived["approvals"] = tuple(approvals)
        derived["supporters"] = tuple(supporters)
        return Instance._unchecked(self.projects, ballots, self.budget, self.meta, derived)


def _replace(seq: tuple, i: int, value) -> tuple:
    return seq[:i] + (value,) + seq[i + 1:]


@dataclass(frozen=True)
class TieBreakOrder:
    """A strict priority order over project ids (earlier wins ties)."""

    ids: tuple

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(self.ids))
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("tie-break order repeats a project id")

    @cached_property
    def rank(self) -> dict:
        return {pid: r for r, pid in enumerate(self.ids)}

    def compare(self, a: str, b: str) -> int:
        """-1 if ``a`` precedes ``b``, 1 if ``b`` precedes ``a``, 0 if equal."""
        try:
            ra, rb = self.rank[a], self.rank[b]
        except KeyError as exc:
            raise KeyError(f"project {exc.args[0]!r} not in tie-break order") from None
        return (ra > rb) - (ra < rb)

    def precedes(self, a: str, b: str) -> bool:
        return self.compare(a, b) < 0

    def check(self, instance: Instance) -> None:
        if set(self.ids) != set(instance.project_index) or len(self.ids) != instance.n_projects:
            raise ValueError("tie-break order is not a permutation of the instance's projects")

    @classmethod
    def file_order(cls, instance: Instance) -> "TieBreakOrder":
        return cls(tuple(p.id for p in instance.projects))

    @classmethod
    def id_ascending(cls, instance: Instance) -> "TieBreakOrder":
        def key(pid):
            return (0, int(pid), "") if pid.isdigit() else (1, 0, pid)
        return cls(tuple(sorted((p.id for p in instance.projects), key=key)))

    @classmethod
    def parse(cls, spec: str, instance: Instance) -> "TieBreakOrder":
        """``file-order``, ``id-asc`` or an explicit comma-separated id list."""
        if spec == "file-order":
            return cls.file_order(instance)
        if spec == "id-asc":
            return cls.id_ascending(instance)
        order = cls(tuple(s.strip() for s in spec.split(",") if s.strip()))
        order.check(instance)
        return order


class Rule(str, Enum):
    AV = "av"
    PHRAGMEN = "phragmen"
    EQ = "eq"
    EQ_PHRAGMEN = "eq-phragmen"
    EQ_INCREMENT = "eq-increment"


@dataclass(frozen=True)
class RuleSpec:
    """A rule plus its options.

    ``initial_balances`` and ``preselected`` continue a Phragmén run from a
    given state; ``endowment`` overrides the Equal-Shares per-voter budget.
    """

    kind: Rule
    initial_balances: Optional[Mapping[str, ExactAmount]] = None
    preselected: Sequence[str] = ()
    endowment: Optional[ExactAmount] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Rule(self.kind))
        object.__setattr__(self, "preselected", tuple(self.preselected))
        phragmen_opts = self.initial_balances is not None or self.preselected
        if phragmen_opts and self.kind is not Rule.PHRAGMEN:
            raise ValueError("initial balances / preselected projects only apply to PHRAGMEN")
        if self.endowment is not None:
            if self.kind is not Rule.EQ:
                raise ValueError("an endowment override only applies to EQ")
            object.__setattr__(self, "endowment", as_amount(self.endowment))
            if self.endowment < 0:
                raise ValueError("endowment must be nonnegative")

    @classmethod
    def of(cls, rule) -> "RuleSpec":
        return rule if isinstance(rule, RuleSpec) else cls(Rule(rule))
