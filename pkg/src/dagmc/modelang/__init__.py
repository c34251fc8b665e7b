"""Model-description language: parsing, printing, evaluation and rewrites."""

from .ast import ModelFile
from .evaluate import eval_expr
from .parser import parse_expr, parse_model, parse_model_file
from .printer import pretty, pretty_model
from .transform import apply_replications, merge_overrides

__all__ = [
    "ModelFile",
    "eval_expr",
    "parse_expr",
    "parse_model",
    "parse_model_file",
    "pretty",
    "pretty_model",
    "apply_replications",
    "merge_overrides",
]
