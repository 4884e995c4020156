"""Exact solver for bounded integer packing problems.

    maximize   sum(x)
    subject to sum_v a[k][v] * x[v]  <=  b[k]   (or < b[k] when strict)
               0 <= x[v] <= u[v], x integer

with nonnegative rational data.  A strict row may carry a *waiver*: a set
of variables such that the row only needs to hold non-strictly as soon as
one of them is positive.

Rows are scaled to integers, which turns a strict row into ``<= b - 1``.
The search is a depth-first branch and bound; the bound is a fractional
knapsack over a surrogate row whose multipliers come from a floating-point
LP dual.  Any nonnegative multipliers give a valid surrogate, so float
error can only weaken the bound, never the exactness of the result.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .model import Q


class PackingError(ValueError):
    """Contract violation: a constraint that x = 0 does not satisfy."""


@dataclass(frozen=True)
class Variable:
    upper: int
    label: object = None


@dataclass(frozen=True)
class Constraint:
    coefficients: tuple
    bound: object
    strict: bool = False
    waived_by: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(Q(c) for c in self.coefficients))
        object.__setattr__(self, "bound", Q(self.bound))
        object.__setattr__(self, "waived_by", frozenset(self.waived_by))


@dataclass(frozen=True)
class PackingProblem:
    variables: tuple
    constraints: tuple = ()

    def __post_init__(self):
        variables = tuple(v if isinstance(v, Variable) else Variable(*v) for v in self.variables)
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "constraints", tuple(self.constraints))
        n = len(variables)
        for v in variables:
            if v.upper < 0:
                raise PackingError("variable bounds must be nonnegative")
        for c in self.constraints:
            if len(c.coefficients) != n:
                raise PackingError("constraint length differs from the variable count")
            if any(a < 0 for a in c.coefficients):
                raise PackingError("coefficients must be nonnegative")
            if c.bound < 0:
                raise PackingError("negative constraint bound")
            if c.strict and c.bound == 0:
                raise PackingError("strict constraint with bound 0 excludes x = 0")

    def is_feasible(self, x: Sequence[int]) -> bool:
        if len(x) != len(self.variables):
            return False
        if any(not 0 <= xv <= v.upper for xv, v in zip(x, self.variables)):
            return False
        for c in self.constraints:
            lhs = sum((a * xv for a, xv in zip(c.coefficients, x) if xv), Q(0))
            strict = c.strict and not any(x[v] > 0 for v in c.waived_by)
            if lhs > c.bound or (strict and lhs == c.bound):
                return False
        return True


@dataclass(frozen=True)
class PackingSolution:
    optimum: int
    witness: tuple
    nodes: int = 0
    # False when optimality rests on a floating-point MIP solve (wide
    # problems the exact search gave up on); the witness is always exact
    certified: bool = True


def _scaled(c: Constraint):
    distinct = set(c.coefficients)
    distinct.add(c.bound)
    den = 1
    for a in distinct:
        d = int(a.denominator)
        den = den * d // math.gcd(den, d)
    as_int = {a: int(a * den) for a in distinct}
    return [as_int[a] for a in c.coefficients], as_int[c.bound]


def _surrogate(rows, caps, uppers):
    """LP duals for the relaxation as exact nonnegative rationals, plus the
    rounded-down primal solution (a hint only)."""
    try:
        import numpy as np
        from scipy.optimize import linprog
    except ImportError:  # pragma: no cover
        return None, None
    if not rows or not uppers:
        return None, None
    scale = [max(max(r), 1) for r in rows]
    A = np.array([[a / s for a in r] for r, s in zip(rows, scale)], dtype=float)
    b = np.array([cap / s for cap, s in zip(caps, scale)], dtype=float)
    res = linprog(-np.ones(A.shape[1]), A_ub=A, b_ub=b,
                  bounds=[(0, u) for u in uppers], method="highs")
    if res.status != 0:
        return None, None
    lam = []
    for y, s in zip(res.ineqlin.marginals, scale):
        y = max(0.0, -float(y))
        f = Fraction(y).limit_denominator(10**6)
        lam.append(Q(f.numerator, f.denominator) / s)
    hint = [min(u, max(0, math.floor(v + 1e-9))) for v, u in zip(res.x, uppers)]
    return lam, hint


def solve_max_packing(problem: PackingProblem, node_limit: Optional[int] = None) -> PackingSolution:
    """Exact optimum; ``node_limit`` caps the LP search on wide problems
    (default: 60 nodes, or 5 beyond 400 variables)."""
    rows, caps = [], []
    for c in problem.constraints:
        coefs, bound = _scaled(c)
        rows.append(coefs)
        caps.append(bound)
    sol = solve_integer_packing([v.upper for v in problem.variables], rows, caps,
                                [c.strict for c in problem.constraints],
                                [c.waived_by for c in problem.constraints], node_limit)
    if not problem.is_feasible(sol.witness):  # pragma: no cover - internal consistency
        raise AssertionError("packing witness failed the independent feasibility check")
    return sol


def solve_integer_packing(uppers, rows, caps, strict=None, waived_by=None,
                          node_limit: Optional[int] = None) -> PackingSolution:
    """The same problem with integer data given row by row (no validation
    beyond what the search needs; rows must be nonnegative)."""
    n = len(uppers)
    uppers = list(uppers)
    strict = strict or [False] * len(rows)
    waived_by = waived_by or [()] * len(rows)
    caps_in = list(caps)
    caps, exact = [], []
    for k, (cap, st, w) in enumerate(zip(caps_in, strict, waived_by)):
        if st and not w:
            cap -= 1
        caps.append(cap)
        # rows that still need an exact check at the leaves
        if st and w:
            exact.append((k, cap, tuple(w)))

    wide = n > DFS_LIMIT and rows and _have_scipy()
    A = None
    if wide:
        import numpy as np
        A = np.array(rows, dtype=object).reshape(len(rows), n)

    def finish(best, witness, nodes, certified=True) -> PackingSolution:
        witness = tuple(int(t) for t in witness)
        if sum(witness) != best or not _int_feasible(rows, caps_in, strict, waived_by, uppers, witness, A):
            raise AssertionError("packing witness failed the exact feasibility check")  # pragma: no cover
        return PackingSolution(best, witness, nodes, certified)

    # drop variables that cannot be positive; fixed at zero
    if wide:
        for k in range(len(rows)):
            over = np.flatnonzero(A[k] > caps[k])
            for v in over.tolist():
                uppers[v] = min(uppers[v], caps[k] // rows[k][v])
    else:
        for k, r in enumerate(rows):
            for v in range(n):
                if r[v] > caps[k]:
                    uppers[v] = min(uppers[v], caps[k] // r[v])

    if wide:
        if node_limit is None:
            node_limit = 60 if n <= 400 else 5
        search = _LPSearch(rows, caps, exact, uppers, A)
        done, best, witness = search.run(-1, None, node_limit)
        if done:
            return finish(best, witness, search.nodes)
        x = search.milp()
        if x is not None and sum(x) > best:
            best, witness = sum(x), x
        return finish(best, witness, search.nodes, certified=False)

    lam, hint = _surrogate(rows, caps, uppers)
    if lam is None:
        lam = [Q(1, max(1, sum(r))) for r in rows]
    by_var = [[(k, a) for k, a in enumerate(col) if a] for col in zip(*rows)] if rows else [[] for _ in range(n)]
    weight = [sum((lam[k] * a for k, a in col), Q(0)) for col in by_var]
    order = sorted(range(n), key=lambda v: (weight[v], -uppers[v]))
    w = [weight[v] for v in order]
    u = [uppers[v] for v in order]
    cols = [by_var[v] for v in order]
    suffix_u = [0] * (n + 1)
    for i in range(n - 1, -1, -1):
        suffix_u[i] = suffix_u[i + 1] + u[i]

    pos = {v: i for i, v in enumerate(order)}
    exact = [(k, cap, tuple(pos[v] for v in waivers)) for k, cap, waivers in exact]
    m = len(rows)
    x = [0] * n
    left = list(caps)

    def leaf_ok() -> bool:
        for k, cap, waivers in exact:
            if caps[k] - left[k] == cap and not any(x[i] for i in waivers):
                return False
        return True

    def bound(i: int, total: int):
        room = sum((lam[k] * left[k] for k in range(m)), Q(0))
        extra = Q(0)
        for j in range(i, n):
            if w[j] == 0:
                extra += u[j]
                continue
            take = room / w[j]
            if take >= u[j]:
                extra += u[j]
                room -= w[j] * u[j]
            else:
                extra += take
                break
        return total + min(extra, suffix_u[i])

    def fits(i: int) -> int:
        hi = u[i] - x[i]
        for k, a in cols[i]:
            hi = min(hi, left[k] // a)
        return hi

    def assign(i: int, val: int) -> None:
        delta = val - x[i]
        if not delta:
            return
        x[i] = val
        for k, a in cols[i]:
            left[k] -= a * delta

    def incumbent(start) -> int:
        # rounded LP point, repaired if float error broke a row, then greedy fill
        for i in range(n):
            assign(i, start[i])
        if any(c < 0 for c in left):
            for i in reversed(range(n)):
                while x[i] and any(left[k] < 0 for k, _ in cols[i]):
                    assign(i, x[i] - 1)
        for i in range(n):
            assign(i, x[i] + fits(i))
        return sum(x) if leaf_ok() else -1

    ceiling = min(math.floor(bound(0, 0)), suffix_u[0])
    best, best_x = -1, None
    if hint is not None:
        best = incumbent([hint[v] for v in order])
        if best >= 0:
            best_x = list(x)
        for i in range(n):
            assign(i, 0)
    # iterative depth-first search, largest value first; it ends once the
    # incumbent meets the root bound
    nodes = 0
    stack = []  # (index, value currently assigned)
    i, total = 0, 0
    descend = best < ceiling
    while True:
        if descend:
            nodes += 1
            if i == n:
                if total > best and leaf_ok():
                    best, best_x = total, list(x)
                    if best >= ceiling:
                        break
                descend = False
            elif total + suffix_u[i] <= best or math.floor(bound(i, total)) <= best:
                descend = False
            else:
                val = fits(i)
                assign(i, val)
                stack.append((i, val))
                total += val
                i += 1
                continue
        if not stack:
            break
        j, val = stack.pop()
        assign(j, 0)
        total -= val
        val -= 1
        if val >= 0 and total + val + suffix_u[j + 1] > best:
            assign(j, val)
            stack.append((j, val))
            total += val
            i = j + 1
            descend = True
        else:
            i = j
            descend = False

    witness = [0] * n
    for i, v in enumerate(order):
        witness[v] = best_x[i]
    return finish(best, witness, nodes)


def _int_feasible(rows, caps, strict, waived_by, uppers, x, A=None) -> bool:
    if any(not 0 <= xv <= u for xv, u in zip(x, uppers)):
        return False
    if A is not None:
        import numpy as np
        totals = A.dot(np.array(x, dtype=object)).tolist()
    else:
        totals = [sum(a * xv for a, xv in zip(r, x) if xv) for r in rows]
    for used, cap, st, w in zip(totals, caps, strict, waived_by):
        if used > cap or (st and used == cap and not any(x[v] for v in w)):
            return False
    return True


def _have_scipy() -> bool:
    try:
        import scipy.optimize  # noqa: F401
    except ImportError:  # pragma: no cover
        return False
    return True


# problems with more variables than this go to LP-based branch and bound
DFS_LIMIT = 40


class _LPSearch:
    """Branch and bound on LP relaxations, for problems too wide for the DFS.

    HiGHS only proposes: each node's bound is recomputed exactly from the
    LP multipliers (a Lagrangian bound, valid for any nonnegative
    multipliers), and infeasible nodes are only dropped on an exactly
    checked Farkas certificate.  Otherwise the node is split further.

    A waivable strict row ``k`` is satisfied either with ``used <= cap - 1``
    or with some waiver positive; a node violating it branches on exactly
    that disjunction.
    """

    def __init__(self, rows, caps, waivable, uppers, A=None):
        import numpy as np
        self.np = np
        self.n, self.m = len(uppers), len(rows)
        self.rows, self.caps, self.uppers = rows, caps, uppers
        self.waivable = waivable  # [(row, cap, waivers)]
        self.A = np.array(rows, dtype=object).reshape(self.m, self.n) if A is None else A
        self.scale = [max(max(r), 1) for r in rows]
        self.Af = (self.A / np.array(self.scale, dtype=object)[:, None]).astype(float) \
            if self.m else np.zeros((0, self.n))
        self.nodes = 0
        self._cols = {}

    # -- exact helpers -----------------------------------------------------

    def _row_caps(self, capmod):
        return [capmod.get(k, c) for k, c in enumerate(self.caps)]

    def _valid(self, x, lo, hi, capmod, covers) -> bool:
        """Exact membership of ``x`` in the node (and in the original problem)."""
        np = self.np
        if any(not l <= xv <= h for xv, l, h in zip(x, lo, hi)):
            return False
        used = self.A.dot(np.array(x, dtype=object)) if self.m else []
        caps = self._row_caps(capmod)
        if any(u > c for u, c in zip(used, caps)):
            return False
        if any(not any(x[v] for v in cov) for cov in covers):
            return False
        for k, cap, waivers in self.waivable:
            if used[k] == cap and not any(x[v] for v in waivers):
                return False
        return True

    def _lagrange(self, lam, mu, lo, hi, capmod, covers):
        """Exact upper bound on ``sum(x)`` over the node from multipliers
        ``lam`` (rows) and ``mu`` (cover rows ``-sum(x_cov) <= -1``)."""
        np = self.np
        red = np.full(self.n, Q(1), dtype=object)
        if self.m:
            red = red - np.array(lam, dtype=object).dot(self.A)
        for mval, cov in zip(mu, covers):
            if mval:
                for v in cov:
                    red[v] += mval
        total = sum((l * c for l, c in zip(lam, self._row_caps(capmod))), Q(0)) - sum(mu, Q(0))
        for v in range(self.n):
            r = red[v]
            total += r * (hi[v] if r > 0 else lo[v])
        return total

    def _infeasible(self, lam, mu, lo, hi, capmod, covers) -> bool:
        """Farkas check: ``lam.A x - mu.cover(x) <= lam.caps - mu`` has no
        solution in the box."""
        np = self.np
        coef = np.array(lam, dtype=object).dot(self.A) if self.m else np.zeros(self.n, dtype=object)
        coef = coef.copy()
        for mval, cov in zip(mu, covers):
            if mval:
                for v in cov:
                    coef[v] -= mval
        least = sum((c * (lo[v] if c > 0 else hi[v]) for v, c in enumerate(coef)), Q(0))
        rhs = sum((l * c for l, c in zip(lam, self._row_caps(capmod))), Q(0)) - sum(mu, Q(0))
        return least > rhs

    # -- LP ----------------------------------------------------------------

    def _lp(self, lo, hi, capmod, covers, phase1=False):
        np = self.np
        from scipy.optimize import linprog
        caps = self._row_caps(capmod)
        A = self.Af
        b = [c / s for c, s in zip(caps, self.scale)]
        if covers:
            extra = np.zeros((len(covers), self.n))
            for i, cov in enumerate(covers):
                extra[i, list(cov)] = -1.0
            A = np.vstack([A, extra]) if self.m else extra
            b = b + [-1.0] * len(covers)
        rows = A.shape[0]
        bounds = list(zip(lo, hi))
        if phase1:
            # minimise total violation; its duals certify infeasibility
            A = np.hstack([A, -np.eye(rows)])
            obj = np.concatenate([np.zeros(self.n), np.ones(rows)])
            bounds = bounds + [(0, None)] * rows
        else:
            obj = -np.ones(self.n)
        res = linprog(obj, A_ub=A, b_ub=np.array(b, dtype=float), bounds=bounds, method="highs")
        if res.status != 0:
            return None
        y = [max(0.0, -float(t)) for t in res.ineqlin.marginals]
        lam = [_rational(t) / s for t, s in zip(y[:self.m], self.scale)]
        mu = [_rational(t) for t in y[self.m:]]
        return res, lam, mu

    # -- search ------------------------------------------------------------

    def _round(self, xf, lo, hi, capmod, covers):
        """Rounded-down LP point, repaired and greedily filled, if valid."""
        np = self.np
        x = [min(h, max(l, math.floor(t + 1e-9))) for t, l, h in zip(xf, lo, hi)]
        caps = self._row_caps(capmod)
        left = [c - u for c, u in zip(caps, self.A.dot(np.array(x, dtype=object)))]
        col = self.rows_by_var
        if any(t < 0 for t in left):
            for v in reversed(range(self.n)):
                while x[v] > lo[v] and any(left[k] < 0 for k, _ in col(v)):
                    x[v] -= 1
                    for k, a in col(v):
                        left[k] += a
        # greedy fill, most LP-favoured variable first; the float room
        # estimate only screens (a variable below one unit has no exact room)
        hi_a = np.array(hi)
        x_a = np.array(x)
        xf = np.asarray(xf)
        while True:
            left_f = np.array([float(t) / s for t, s in zip(left, self.scale)])
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(self.Af > 0, left_f[:, None] / self.Af, np.inf)
            room_f = ratio.min(axis=0) if self.m else np.full(self.n, np.inf)
            open_vars = np.flatnonzero((room_f >= 1 - 1e-6) & (hi_a > x_a))
            filled = False
            for v in open_vars[np.argsort(-xf[open_vars], kind="stable")].tolist():
                room = hi[v] - x[v]
                for k, a in col(v):
                    room = min(room, left[k] // a)
                if room > 0:
                    x[v] += room
                    x_a[v] = x[v]
                    for k, a in col(v):
                        left[k] -= a * room
                    filled = True
                    break
            if not filled:
                break
        return x if self._valid(x, lo, hi, capmod, covers) else None

    def rows_by_var(self, v):
        cached = self._cols.get(v)
        if cached is None:
            cached = self._cols[v] = [(k, a) for k, a in enumerate(self.A[:, v]) if a]
        return cached

    def run(self, best, start, node_limit=None):
        """``(finished, best, witness)``; unfinished when the node limit hit."""
        best_x = start if best >= 0 else None
        root = (tuple([0] * self.n), tuple(self.uppers), {}, ())
        stack = [root]
        while stack:
            if node_limit is not None and self.nodes >= node_limit:
                return False, best, best_x
            lo, hi, capmod, covers = stack.pop()
            lo, hi = list(lo), list(hi)
            self.nodes += 1
            if lo == hi:
                if sum(lo) > best and self._valid(lo, lo, hi, capmod, covers):
                    best, best_x = sum(lo), lo
                continue
            sol = self._lp(lo, hi, capmod, covers)
            if sol is None:
                cert = self._lp(lo, hi, capmod, covers, phase1=True)
                if cert is not None and self._infeasible(cert[1], cert[2], lo, hi, capmod, covers):
                    continue
                self._split(stack, lo, hi, capmod, covers, None)
                continue
            res, lam, mu = sol
            bound = self._lagrange(lam, mu, lo, hi, capmod, covers)
            if math.floor(bound) <= best:
                continue
            x = self._round(res.x, lo, hi, capmod, covers)
            if x is not None and sum(x) > best:
                best, best_x = sum(x), x
                if math.floor(bound) <= best:
                    continue
            self._split(stack, lo, hi, capmod, covers, res.x)
        return True, best, best_x

    def milp(self):
        """HiGHS MIP on the float rows; the result is checked exactly and
        only returned if it is valid.  Waivable rows are taken strictly."""
        np = self.np
        from scipy.optimize import Bounds, LinearConstraint, milp
        caps = list(self.caps)
        for k, cap, _ in self.waivable:
            caps[k] = cap - 1
        b = np.array([c / s for c, s in zip(caps, self.scale)], dtype=float)
        # shave the float right-hand side so rounding cannot admit used > cap
        b = b - 1e-9 * np.maximum(1.0, np.abs(b))
        res = milp(-np.ones(self.n), constraints=LinearConstraint(self.Af, -np.inf, b),
                   integrality=np.ones(self.n), bounds=Bounds(0, self.uppers),
                   options={"mip_rel_gap": 0})
        if res.x is None:
            return None
        lo, hi = [0] * self.n, list(self.uppers)
        x = [int(round(t)) for t in res.x]
        if self._valid(x, lo, hi, {}, ()):
            return x
        return self._round(res.x, lo, hi, {}, ())

    def _split(self, stack, lo, hi, capmod, covers, xf):
        np = self.np
        if xf is not None:
            frac = [abs(t - round(t)) for t in xf]
            v = max(range(self.n), key=frac.__getitem__)
            if frac[v] > 1e-7:
                f = math.floor(xf[v])
                self._push(stack, lo, hi, capmod, covers, v, f, f + 1)
                return
            # integral LP point: a waivable row at equality, or float error
            x = [min(h, max(l, int(round(t)))) for t, l, h in zip(xf, lo, hi)]
            used = self.A.dot(np.array(x, dtype=object)) if self.m else []
            caps = self._row_caps(capmod)
            for k, cap, waivers in self.waivable:
                if k not in capmod and used[k] == cap and not any(x[w] for w in waivers) \
                        and tuple(waivers) not in covers:
                    tightened = dict(capmod)
                    tightened[k] = cap - 1
                    stack.append((tuple(lo), tuple(hi), capmod, covers + (tuple(waivers),)))
                    stack.append((tuple(lo), tuple(hi), tightened, covers))
                    return
            for k in range(self.m):
                if used[k] > caps[k]:
                    v = max((v for v in range(self.n) if self.rows[k][v] and x[v] > lo[v]),
                            key=lambda v: x[v], default=None)
                    if v is not None:
                        self._push(stack, lo, hi, capmod, covers, v, x[v] - 1, x[v])
                        return
        # no usable LP point: halve the widest box
        v = max(range(self.n), key=lambda v: hi[v] - lo[v])
        mid = (lo[v] + hi[v]) // 2
        self._push(stack, lo, hi, capmod, covers, v, mid, mid + 1)

    @staticmethod
    def _push(stack, lo, hi, capmod, covers, v, down, up):
        """Children ``x_v <= down`` and ``x_v >= up``; the upper one is explored first."""
        if lo[v] <= down:
            h = list(hi)
            h[v] = down
            stack.append((tuple(lo), tuple(h), capmod, covers))
        if up <= hi[v]:
            l = list(lo)
            l[v] = up
            stack.append((tuple(l), tuple(hi), capmod, covers))


def _rational(y: float):
    f = Fraction(y).limit_denominator(10**6)
    return Q(f.numerator, f.denominator)
