"""Prefix, sentence, plan and reachability probabilities from cyclic explanation graphs."""

from .model import (
    ModelError,
    ModelSyntaxError,
    ModelValidationError,
    detect_useless,
    first_sets,
    left_corner_closure,
    make_plcg,
    parse_cfg,
    parse_markov_chain,
    parse_pcfg,
    parse_plan_model,
)
from .queries import (
    QueryResult,
    SolverOptions,
    conditional_next,
    plcg_prefix_probability,
    prefix_probability,
    reach_probability,
    recognize_plan,
    sentence_probability,
)

__version__ = "0.1.0"

__all__ = [
    "ModelError",
    "ModelSyntaxError",
    "ModelValidationError",
    "QueryResult",
    "SolverOptions",
    "conditional_next",
    "detect_useless",
    "first_sets",
    "left_corner_closure",
    "make_plcg",
    "parse_cfg",
    "parse_markov_chain",
    "parse_pcfg",
    "parse_plan_model",
    "plcg_prefix_probability",
    "prefix_probability",
    "reach_probability",
    "recognize_plan",
    "sentence_probability",
]
