"""Adaptive Metropolis-within-Gibbs sampling for directed graphical models."""

from .build import prepare
from .errors import DagmcError
from .model import Block, Graph, build_graph, default_blocks
from .modelang import merge_overrides, parse_model, parse_model_file
from .sampler import RunConfig, RunReport, run

__version__ = "0.1.0"

__all__ = [
    "Block",
    "DagmcError",
    "Graph",
    "RunConfig",
    "RunReport",
    "build_graph",
    "default_blocks",
    "merge_overrides",
    "parse_model",
    "parse_model_file",
    "prepare",
    "run",
]
