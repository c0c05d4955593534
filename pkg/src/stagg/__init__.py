"""Lift C loop nests to TACO index notation.

LLM candidates are turned into a probabilistic grammar of templates, which
weighted A* enumerates; templates are checked against input/output examples
and confirmed by differential testing.
"""

from .benchmark import Benchmark, extract_constants, lhs_rank, load_benchmark, run_oracle
from .candidates import Template, TemplateSet, normalize_response, predict_dimensions, templatize
from .grammar import TemplateGrammar, generate_grammar, learn_weights, normalize, uniform
from .llm import LlmConfig, build_prompt, fetch_candidates
from .pipeline import LiftConfig, LiftReport, lift, run_suite
from .search import SearchContext, enumerate_bu, enumerate_td
from .taco import Assignment, TensorValue, evaluate, parse_expression, render
from .validation import ExampleSet, Substitution, differential_verify, enumerate_substitutions, generate_examples, validate

__all__ = [
    "Assignment",
    "Benchmark",
    "ExampleSet",
    "LiftConfig",
    "LiftReport",
    "LlmConfig",
    "SearchContext",
    "Substitution",
    "Template",
    "TemplateGrammar",
    "TemplateSet",
    "TensorValue",
    "build_prompt",
    "differential_verify",
    "enumerate_bu",
    "enumerate_substitutions",
    "enumerate_td",
    "evaluate",
    "extract_constants",
    "fetch_candidates",
    "generate_examples",
    "generate_grammar",
    "learn_weights",
    "lhs_rank",
    "lift",
    "load_benchmark",
    "normalize",
    "normalize_response",
    "parse_expression",
    "predict_dimensions",
    "render",
    "run_oracle",
    "run_suite",
    "templatize",
    "uniform",
]
