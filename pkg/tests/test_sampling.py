from collections import Counter
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare

from pbmeasures.model import Q
from pbmeasures.sampling import (PerturbKind, Perturbation, SamplingConfig,
                                 estimate_funding_frequency, exhaustive_funding_frequency,
                                 funding_frequency, population, sample_subset, trial_rng)

from instances import e1, order

ADD = PerturbKind.ADD_APPROVALS


def test_sample_edges():
    rng = np.random.default_rng(0)
    assert sample_subset((1, 2, 3), 0, rng) == frozenset()
    assert sample_subset((1, 2, 3), 3, rng) == frozenset({1, 2, 3})
    with pytest.raises(ValueError):
        sample_subset((1, 2), 3, rng)


def test_subset_uniformity():
    rng = np.random.default_rng(12345)
    pop = tuple(range(5))
    counts = Counter(sample_subset(pop, 2, rng) for _ in range(100_000))
    observed = [counts[frozenset(c)] for c in combinations(pop, 2)]
    assert sum(observed) == 100_000
    assert chisquare(observed).pvalue > 0.001


@pytest.mark.parametrize("ell, expected", [(0, Q(0)), (1, Q(0)), (2, Q(1, 36)),
                                           (3, Q(14, 84)), (4, Q(1))])
def test_e1_exhaustive_frequencies(ell, expected):
    inst = e1()
    freq = exhaustive_funding_frequency(inst, "eq", order(inst), "e", Perturbation(ADD, ell))
    assert freq == expected


def test_e1_sampled_extremes():
    inst = e1()
    cfg = SamplingConfig(samples=50, seed=3)
    assert estimate_funding_frequency(inst, "eq", order(inst), "e", Perturbation(ADD, 1), cfg)[0] == 0
    wins, trials = estimate_funding_frequency(inst, "eq", order(inst), "e", Perturbation(ADD, 4), cfg)
    assert wins == trials == 50


def test_cap_switches_to_sampling():
    inst = e1()
    f, exact = funding_frequency(inst, "eq", order(inst), "e", Perturbation(ADD, 2), SamplingConfig())
    assert exact and f == Q(1, 36)
    f, exact = funding_frequency(inst, "eq", order(inst), "e", Perturbation(ADD, 2),
                                 SamplingConfig(exhaustive_cap=10, samples=40))
    assert not exact and 0 <= f <= 1


def test_streams_are_independent_of_scheduling():
    a = trial_rng(5, ADD, 3, 17).integers(0, 10**9, 4)
    b = trial_rng(5, ADD, 3, 17).integers(0, 10**9, 4)
    c = trial_rng(5, ADD, 3, 18).integers(0, 10**9, 4)
    assert (a == b).all() and not (a == c).all()


def test_worker_count_does_not_change_estimates():
    inst = e1()
    p = Perturbation(ADD, 3)
    one = estimate_funding_frequency(inst, "eq", order(inst), "e", p, SamplingConfig(samples=30, seed=9))
    two = estimate_funding_frequency(inst, "eq", order(inst), "e", p,
                                     SamplingConfig(samples=30, seed=9, workers=2))
    assert one == two


def test_grid_is_clamped():
    cfg = SamplingConfig(step=4)
    assert cfg.grid(10, 9) == [4, 8]
    assert max(SamplingConfig().grid(1000, 35)) <= 35
    assert SamplingConfig().step_for(1000) == 10 and SamplingConfig().step_for(3) == 1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 9))
def test_samples_come_from_population(seed, ell):
    inst = e1()
    pop = population(inst, "e", ADD)
    ell = min(ell, len(pop))
    s = sample_subset(pop, ell, np.random.default_rng(seed))
    assert len(s) == ell and s <= set(pop)
