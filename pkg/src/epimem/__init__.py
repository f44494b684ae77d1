"""Episodic memory over quantized invariant feature vectors."""

from .cue import ANY, Cue, Exact, Range, parse_cue
from .episodic_log import Direction, Op
from .features import ClassSchema, DimensionSpec, FeatureVector, Kind, make_vector, vector_from_bins
from .query import QueryEngine
from .store import MemoryStore

__version__ = "0.1.0"

__all__ = [
    "ANY",
    "ClassSchema",
    "Cue",
    "DimensionSpec",
    "Direction",
    "Exact",
    "FeatureVector",
    "Kind",
    "MemoryStore",
    "Op",
    "QueryEngine",
    "Range",
    "make_vector",
    "parse_cue",
    "vector_from_bins",
]
