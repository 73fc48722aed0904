"""Block heat-bath samplers for H-colourings of a path, with exact mixing diagnostics."""

from .errors import (
    CapExceeded,
    ClassMismatch,
    ConditionViolated,
    DisconnectedGraph,
    EmptyGraph,
    EmptySupport,
    GraphParseError,
    HColError,
    NotReached,
    NoWalk,
    PathTooShort,
)
from .hgraph import ColourGraph, builtin, has_all_two_paths, load_graph

__version__ = "0.1.0"

__all__ = [
    "CapExceeded",
    "ClassMismatch",
    "ColourGraph",
    "ConditionViolated",
    "DisconnectedGraph",
    "EmptyGraph",
    "EmptySupport",
    "GraphParseError",
    "HColError",
    "NoWalk",
    "NotReached",
    "PathTooShort",
    "__version__",
    "builtin",
    "has_all_two_paths",
    "load_graph",
]
