"""Information packages, per-project tables and Pearson correlations."""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import gmpy2

from .measures import (ALL_KINDS, MeasureKind, MeasureResult, OutcomeAnalysis, StrategyGrid,
                       compute_measure, default_grid_axes, funding_curve, strategy_grid)
from .model import Instance, Q, TieBreakOrder, decimal_str, fraction_str
from .sampling import PerturbKind, SamplingConfig


class CorrelationError(ValueError):
    """Raised when a correlation is undefined (zero variance, too few rows)."""


def pearson(xs: Sequence, ys: Sequence) -> float:
    """Product-moment correlation, exact up to the final square root."""
    if len(xs) != len(ys):
        raise CorrelationError("sequences differ in length")
    if len(xs) < 2:
        raise CorrelationError("need at least two observations")
    xs = [Q(x) for x in xs]
    ys = [Q(y) for y in ys]
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    if sxx == 0 or syy == 0:
        raise CorrelationError("zero variance")
    r2 = sxy * sxy / (sxx * syy)
    num, den = r2.numerator, r2.denominator
    if gmpy2.is_square(num) and gmpy2.is_square(den):
        r = float(Q(int(gmpy2.isqrt(num)), int(gmpy2.isqrt(den))))
    else:
        with gmpy2.context(gmpy2.get_context(), precision=128):
            r = float(gmpy2.sqrt(gmpy2.mpfr(r2)))
    r = min(r, 1.0)
    return r if sxy >= 0 else -r


@dataclass(frozen=True)
class CorrelationMatrix:
    kinds: tuple
    r: dict  # (a, b) -> float, or None when unavailable
    n: dict  # (a, b) -> number of complete rows

    def get(self, a, b) -> Optional[float]:
        return self.r[(MeasureKind(a), MeasureKind(b))]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["measure"] + [k.value for k in self.kinds])
        for a in self.kinds:
            w.writerow([a.value] + [_r4(self.r[(a, b)]) for b in self.kinds])
        w.writerow([])
        w.writerow(["pairs"] + [k.value for k in self.kinds])
        for a in self.kinds:
            w.writerow([a.value] + [self.n[(a, b)] for b in self.kinds])
        return buf.getvalue()


def _r4(r) -> str:
    return "" if r is None else f"{r:.4f}"


def correlation_matrix(records: Sequence[Mapping], kinds: Sequence = ALL_KINDS) -> CorrelationMatrix:
    """Pairwise-complete correlations over normalized values (``None`` = undefined)."""
    if len(records) < 2:
        raise CorrelationError("need at least two records")
    kinds = tuple(MeasureKind(k) for k in kinds)
    r, n = {}, {}
    for i, a in enumerate(kinds):
        for b in kinds[i:]:
            pairs = [(rec.get(a), rec.get(b)) for rec in records]
            pairs = [(x, y) for x, y in pairs if x is not None and y is not None]
            try:
                val = pearson([x for x, _ in pairs], [y for _, y in pairs])
            except CorrelationError:
                val = None
            r[(a, b)] = r[(b, a)] = val
            n[(a, b)] = n[(b, a)] = len(pairs)
    return CorrelationMatrix(kinds, r, n)


# ---------------------------------------------------------------------------
# information packages


@dataclass(frozen=True)
class InformationPackage:
    project: str
    rule: str
    measures: tuple  # MeasureResult, in ALL_KINDS order
    budget: object
    n_voters: int
    n_projects: int
    cost: object
    score: int
    curves: tuple = ()
    grid: Optional[StrategyGrid] = None
    settings: dict = field(default_factory=dict)

    def measure(self, kind) -> MeasureResult:
        kind = MeasureKind(kind)
        return next(m for m in self.measures if m.kind is kind)

    def to_dict(self) -> dict:
        out = {
            "project": self.project,
            "rule": self.rule,
            "instance": {"budget": fraction_str(self.budget), "n_voters": self.n_voters,
                         "n_projects": self.n_projects},
            "cost": fraction_str(self.cost),
            "score": self.score,
            "measures": {m.kind.value: m.to_dict() for m in self.measures},
            "settings": self.settings,
        }
        if self.curves:
            out["curves"] = {c.mode.value: [list(row) for row in c.to_rows()] for c in self.curves}
        if self.grid is not None:
            out["grid"] = {"cost_reductions": [fraction_str(d) for d in self.grid.deltas],
                           "singletons": list(self.grid.singletons),
                           "funded": [list(row) for row in self.grid.funded]}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def build_package(instance: Instance, rule, order: TieBreakOrder, pid: str,
                  cfg: SamplingConfig = SamplingConfig(), curves: bool = False,
                  grid: Optional[tuple] = None,
                  analysis: Optional[OutcomeAnalysis] = None) -> InformationPackage:
    """All six measures for a losing project, plus curves and the strategy grid on request.

    ``grid`` is ``(delta_steps, s_steps)``.
    """
    an = analysis or OutcomeAnalysis(instance, rule, order)
    an.require_losing(pid)
    results = tuple(compute_measure(k, instance, an.spec, an.order, pid, cfg, an) for k in ALL_KINDS)
    curve_list = ()
    if curves:
        curve_list = tuple(funding_curve(instance, an.spec, an.order, pid, mode, cfg, an)
                           for mode in PerturbKind)
    sg = None
    if grid is not None:
        deltas, singles = default_grid_axes(instance.score(pid), *grid)
        sg = strategy_grid(instance, an.spec, an.order, pid, deltas, singles, an)
    settings = {"seed": cfg.seed, "samples": cfg.samples, "step": cfg.step,
                "threshold": fraction_str(cfg.threshold), "exhaustive_cap": cfg.exhaustive_cap}
    return InformationPackage(pid, an.rule.value, results, instance.budget, instance.n_voters,
                              instance.n_projects, instance.project(pid).cost, instance.score(pid),
                              curve_list, sg, settings)


# ---------------------------------------------------------------------------
# per-project tables


def decimal_repr(value, places: int = 10) -> str:
    """Exact decimal when it terminates, otherwise rounded to ``places``."""
    value = Q(value)
    try:
        return decimal_str(value)
    except ValueError:
        scaled = value * 10**places
        q = int(gmpy2.f_div(scaled.numerator * 2 + scaled.denominator, 2 * scaled.denominator))
        sign = "-" if q < 0 else ""
        digits = str(abs(q)).rjust(places + 1, "0")
        return f"{sign}{digits[:-places]}.{digits[-places:]}"


@dataclass(frozen=True)
class ProjectRecord:
    instance: str
    project: str
    cost: object
    score: int
    results: tuple  # MeasureResult

    def normalized(self) -> dict:
        return {m.kind: m.normalized if m.defined else None for m in self.results}


def _cells(value) -> list:
    if value is None:
        return ["", ""]
    return [fraction_str(value), decimal_repr(value)]


def project_columns(kinds: Sequence) -> list:
    cols = ["instance", "project_id", "cost", "cost_decimal", "score"]
    for k in kinds:
        k = MeasureKind(k).value
        cols += [f"{k}_raw", f"{k}_raw_decimal", f"{k}_norm", f"{k}_norm_decimal"]
    return cols


def project_rows(records: Sequence[ProjectRecord], kinds: Sequence) -> list:
    kinds = [MeasureKind(k) for k in kinds]
    rows = []
    for rec in records:
        by_kind = {m.kind: m for m in rec.results}
        row = [rec.instance, rec.project, *_cells(rec.cost), rec.score]
        for k in kinds:
            m = by_kind.get(k)
            if m is None or not m.defined:
                row += ["", "", "", ""]
            else:
                row += _cells(m.raw) + _cells(m.normalized)
        rows.append(row)
    return rows


def write_csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def measure_projects(instance: Instance, rule, order: TieBreakOrder, pids: Sequence[str],
                     kinds: Sequence, cfg: SamplingConfig = SamplingConfig(),
                     name: str = "", analysis: Optional[OutcomeAnalysis] = None) -> list:
    an = analysis or OutcomeAnalysis(instance, rule, order)
    out = []
    for pid in pids:
        res = tuple(compute_measure(k, instance, an.spec, an.order, pid, cfg, an) for k in kinds)
        out.append(ProjectRecord(name, pid, instance.project(pid).cost, instance.score(pid), res))
    return out


def losing_projects(analysis: OutcomeAnalysis) -> list:
    won = set(analysis.outcome.selected)
    return [p.id for p in analysis.instance.projects if p.id not in won]


def _work(args):
    instance, rule, order, pids, kinds, cfg, name = args
    return measure_projects(instance, rule, order, pids, kinds, cfg, name)


def run_work_queue(items: Sequence[tuple], workers: int = 1) -> list:
    """Evaluate ``(instance, rule, order, pids, kinds, cfg, name)`` items.

    Results come back in item order, so the worker count never changes output.
    """
    if workers <= 1 or len(items) <= 1:
        return [rec for item in items for rec in _work(item)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return [rec for chunk in pool.map(_work, items) for rec in chunk]
