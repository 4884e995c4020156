"""How close did a losing participatory-budgeting project come to winning?"""
from .measures import (ALL_KINDS, MeasureError, MeasureKind, MeasureResult, OutcomeAnalysis,
                       Status, compute_measure, cost_reduction, fifty_percent_add,
                       funding_curve, normalize_measure, optimist_add, pessimist_add,
                       rivalry_reduction, singleton_add, strategy_grid)
from .model import Ballot, Instance, Project, Q, Rule, RuleSpec, TieBreakOrder
from .pabulib import PabulibParseError, load_instance, parse_instance, serialize_instance
from .packing import solve_max_packing
from .report import build_package, correlation_matrix, pearson
from .rules import Outcome, run_rule
from .sampling import PerturbKind, SamplingConfig

__version__ = "0.1.0"
