"""Seeded synthetic instances for benchmarks, tests and the bundled corpus."""
from __future__ import annotations

import numpy as np

from .model import Ballot, Instance, Project, Q


def random_instance(n_voters: int, n_projects: int, mean_ballot: float = 5.0, seed: int = 0,
                    cost_range=(50, 500), budget_share=(1, 3)) -> Instance:
    """Ballots drawn with Zipf-like project popularity.

    Costs are integers in ``cost_range`` (in units of 1000); the budget is
    ``budget_share`` (a fraction) of the total cost.
    """
    rng = np.random.default_rng(seed)
    weights = 1.0 / np.arange(1, n_projects + 1) ** 0.8
    weights = weights[rng.permutation(n_projects)]
    weights /= weights.sum()
    sizes = np.clip(rng.poisson(mean_ballot - 1, n_voters) + 1, 1, n_projects)
    projects = [Project(str(j + 1), Q(int(c) * 1000))
                for j, c in enumerate(rng.integers(cost_range[0], cost_range[1] + 1, n_projects))]
    ballots = []
    for v, k in enumerate(sizes):
        chosen = rng.choice(n_projects, size=int(k), replace=False, p=weights)
        ballots.append(Ballot(str(v + 1), frozenset(str(j + 1) for j in chosen)))
    total = sum(p.cost for p in projects)
    budget = Q(int(total * Q(*budget_share)) // 1000 * 1000)
    return Instance(projects, ballots, budget, {"description": f"synthetic seed {seed}"})


def tiny_instance(rng, max_projects=5, max_voters=8, max_cost=8, max_budget=12) -> Instance:
    """Desk-scale random instance (the oracle-equivalence regime)."""
    m = int(rng.integers(1, max_projects + 1))
    n = int(rng.integers(1, max_voters + 1))
    projects = [Project(chr(ord("a") + j), Q(int(rng.integers(1, max_cost + 1)))) for j in range(m)]
    ballots = []
    for v in range(n):
        mask = rng.random(m) < 0.4
        ballots.append(Ballot(f"v{v}", frozenset(p.id for p, keep in zip(projects, mask) if keep)))
    budget = Q(int(rng.integers(1, max_budget + 1)))
    return Instance(projects, ballots, budget)
