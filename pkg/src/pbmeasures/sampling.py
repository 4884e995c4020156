"""Seeded Monte Carlo and exhaustive perturbation experiments.

Every trial draws from its own stream, derived from
``(seed, perturbation kind, ell, trial index)``, so results do not depend
on how trials are spread over worker processes.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from math import comb
from typing import Optional, Sequence

import numpy as np

from .model import Instance, Q, TieBreakOrder
from .rules import run_rule


class PerturbKind(str, Enum):
    ADD_APPROVALS = "add"
    REMOVE_RIVALS = "rivals"


_KIND_CODE = {PerturbKind.ADD_APPROVALS: 1, PerturbKind.REMOVE_RIVALS: 2}


class EnumerationCapExceeded(ValueError):
    pass


@dataclass(frozen=True)
class SamplingConfig:
    samples: int = 100
    step: Optional[int] = None  # None: 1% of the approval score, at least 1
    threshold: Q = Q(1, 2)
    seed: int = 0
    max_steps: Optional[int] = None
    exhaustive_cap: int = 10**6
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "threshold", Q(self.threshold))
        if self.samples < 1:
            raise ValueError("samples per step must be at least 1")
        if self.step is not None and self.step < 1:
            raise ValueError("step must be at least 1")
        if not 0 < self.threshold <= 1:
            raise ValueError("threshold must lie in (0, 1]")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    def step_for(self, score: int) -> int:
        if self.step is not None:
            return self.step
        return max(1, (score + 50) // 100)

    def grid(self, score: int, limit: int) -> list:
        """``step, 2*step, ...`` clamped to ``limit``, capped by ``max_steps``."""
        step = self.step_for(score)
        out = list(range(step, limit + 1, step))
        if self.max_steps is not None:
            out = out[: self.max_steps]
        return out


@dataclass(frozen=True)
class Perturbation:
    kind: PerturbKind
    count: int

    def __post_init__(self):
        object.__setattr__(self, "kind", PerturbKind(self.kind))
        if self.count < 0:
            raise ValueError("perturbation count must be nonnegative")


def population(instance: Instance, pid: str, kind: PerturbKind) -> tuple:
    """Voter indices a perturbation of ``kind`` draws from."""
    sup = instance.supporters[instance.project_index[pid]]
    if PerturbKind(kind) is PerturbKind.REMOVE_RIVALS:
        return sup
    approving = set(sup)
    return tuple(v for v in range(instance.n_voters) if v not in approving)


def apply_perturbation(instance: Instance, pid: str, kind: PerturbKind, voters) -> Instance:
    if PerturbKind(kind) is PerturbKind.REMOVE_RIVALS:
        return instance.with_rivals_removed(pid, voters)
    return instance.with_added_approvals(pid, voters)


def trial_rng(seed: int, kind: PerturbKind, ell: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed & (2**64 - 1), _KIND_CODE[kind], ell, trial]))


def sample_subset(pop: Sequence, count: int, rng: np.random.Generator) -> frozenset:
    """Uniform ``count``-subset of ``pop`` (sampling without replacement)."""
    if not 0 <= count <= len(pop):
        raise ValueError(f"cannot draw {count} of {len(pop)} items")
    if count == 0:
        return frozenset()
    picks = rng.choice(len(pop), size=count, replace=False)
    return frozenset(pop[int(i)] for i in picks)


def _trial_batch(instance, rule, order, pid, kind, ell, seed, trials) -> int:
    pop = population(instance, pid, kind)
    wins = 0
    for t in trials:
        chosen = sample_subset(pop, ell, trial_rng(seed, kind, ell, t))
        modified = apply_perturbation(instance, pid, kind, chosen)
        wins += pid in run_rule(modified, rule, order, keep_trace=False).selected
    return wins


def _chunks(seq, parts):
    k, r = divmod(len(seq), parts)
    out, start = [], 0
    for i in range(parts):
        end = start + k + (1 if i < r else 0)
        if end > start:
            out.append(seq[start:end])
        start = end
    return out


def _run_batches(fn, instance, rule, order, pid, args_list, workers: int) -> int:
    if workers <= 1 or len(args_list) <= 1:
        return sum(fn(instance, rule, order, pid, *a) for a in args_list)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, instance, rule, order, pid, *a) for a in args_list]
        return sum(f.result() for f in futures)


def estimate_funding_frequency(instance: Instance, rule, order: TieBreakOrder, pid: str,
                               perturbation: Perturbation, cfg: SamplingConfig):
    """``(successes, trials)`` over ``cfg.samples`` independent random perturbations."""
    pop = population(instance, pid, perturbation.kind)
    if perturbation.count > len(pop):
        raise ValueError(f"cannot draw {perturbation.count} of {len(pop)} voters")
    trials = list(range(cfg.samples))
    batches = [(perturbation.kind, perturbation.count, cfg.seed, chunk)
               for chunk in _chunks(trials, cfg.workers)]
    wins = _run_batches(_trial_batch, instance, rule, order, pid, batches, cfg.workers)
    return wins, cfg.samples


def _ballot_groups(instance: Instance, pop) -> list:
    """Voters of ``pop`` grouped by identical ballots (interchangeable for anonymous rules)."""
    groups = {}
    for v in pop:
        groups.setdefault(instance.approvals[v], []).append(v)
    return list(groups.values())


def _compositions(sizes, total):
    """All ``(k_1, ..., k_g)`` with ``0 <= k_i <= sizes[i]`` summing to ``total``."""
    suffix = [0] * (len(sizes) + 1)
    for i in range(len(sizes) - 1, -1, -1):
        suffix[i] = suffix[i + 1] + sizes[i]

    def rec(i, left):
        if i == len(sizes):
            if left == 0:
                yield ()
            return
        lo = max(0, left - suffix[i + 1])
        for k in range(lo, min(sizes[i], left) + 1):
            for rest in rec(i + 1, left - k):
                yield (k,) + rest

    return rec(0, total)


def _composition_batch(instance, rule, order, pid, kind, groups, comps) -> int:
    wins = 0
    for comp in comps:
        chosen = [v for g, k in zip(groups, comp) for v in g[:k]]
        modified = apply_perturbation(instance, pid, kind, chosen)
        if pid in run_rule(modified, rule, order, keep_trace=False).selected:
            weight = 1
            for g, k in zip(groups, comp):
                weight *= comb(len(g), k)
            wins += weight
    return wins


def exhaustive_funding_frequency(instance: Instance, rule, order: TieBreakOrder, pid: str,
                                 perturbation: Perturbation, cap: int = 10**6, workers: int = 1):
    """Exact success probability over all ``count``-subsets of the population."""
    pop = population(instance, pid, perturbation.kind)
    ell = perturbation.count
    if ell > len(pop):
        raise ValueError(f"cannot draw {ell} of {len(pop)} voters")
    total = comb(len(pop), ell)
    if total > cap:
        raise EnumerationCapExceeded(f"C({len(pop)}, {ell}) = {total} exceeds the cap {cap}")
    groups = _ballot_groups(instance, pop)
    comps = list(_compositions([len(g) for g in groups], ell))
    batches = [(perturbation.kind, groups, chunk) for chunk in _chunks(comps, workers)]
    wins = _run_batches(_composition_batch, instance, rule, order, pid, batches, workers)
    return Q(wins, total)


def funding_frequency(instance: Instance, rule, order: TieBreakOrder, pid: str,
                      perturbation: Perturbation, cfg: SamplingConfig):
    """Exact probability under the enumeration cap, sampled frequency otherwise.

    Returns ``(frequency, exact)``.
    """
    pop = population(instance, pid, perturbation.kind)
    if comb(len(pop), perturbation.count) <= cfg.exhaustive_cap:
        return exhaustive_funding_frequency(instance, rule, order, pid, perturbation,
                                            cfg.exhaustive_cap, cfg.workers), True
    wins, trials = estimate_funding_frequency(instance, rule, order, pid, perturbation, cfg)
    return Q(wins, trials), False
