"""Compare the trace-based measures with the brute-force oracle."""
from pbmeasures.measures import ALL_KINDS, MeasureKind, OutcomeAnalysis, compute_measure
from pbmeasures.model import TieBreakOrder
from pbmeasures.sampling import SamplingConfig

import oracles

EXHAUSTIVE = SamplingConfig(exhaustive_cap=10**9)


def measured(inst, rule, order, pid, an):
    return {k: compute_measure(k, inst, rule, order, pid, EXHAUSTIVE, an) for k in ALL_KINDS}


def comparable(results):
    out = {}
    for kind, m in results.items():
        if kind is MeasureKind.COST_RED:
            out[kind.value] = (oracles.as_fraction(m.raw), m.diagnostics.get("attained")) if m.defined else None
        else:
            out[kind.value] = int(m.raw) if m.raw is not None else None
    return out


def check_instance(inst, rules):
    """Yield ``(rule, pid, measured results, mismatches)`` for every losing project."""
    order = TieBreakOrder.file_order(inst)
    for rule in rules:
        an = OutcomeAnalysis(inst, rule, order)
        for p in inst.projects:
            if p.id in an.outcome.selected:
                continue
            got = measured(inst, rule, order, p.id, an)
            expected = oracles.all_measures(inst, rule, order, p.id)
            mine = comparable(got)
            bad = {k: (mine[k], v) for k, v in expected.items() if mine[k] != v}
            yield rule, p.id, got, bad
