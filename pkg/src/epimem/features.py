"""Class schemas, feature vectors and per-dimension quantization.

A feature vector keeps both its raw real values and the bin indexes the
tree set is keyed on. Two raw values that fall in the same bin are the
same value as far as the index is concerned.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

from .errors import ArityError, ClassMismatchError, FeatureError, OutOfRangeError

# Absorbs representation error such as 0.3/0.1 == 2.9999999999999996.
_BIN_EPS = 1e-9


@dataclass(frozen=True)
class DimensionSpec:
    name: str
    min: float
    max: float
    resolution: float

    def __post_init__(self) -> None:
        if not self.name:
            raise FeatureError("dimension name must be non-empty")
        if not (math.isfinite(self.min) and math.isfinite(self.max)):
            raise FeatureError(f"dimension {self.name!r}: bounds must be finite")
        if not self.min < self.max:
            raise FeatureError(f"dimension {self.name!r}: min must be < max")
        if not (self.resolution > 0 and math.isfinite(self.resolution)):
            raise FeatureError(f"dimension {self.name!r}: resolution must be > 0")

    @property
    def bin_count(self) -> int:
        return max(1, math.ceil((self.max - self.min) / self.resolution - _BIN_EPS))

    def bin_center(self, b: int) -> float:
        """Midpoint of bin ``b``'s extent; the last bin may be truncated at ``max``."""
        lo = self.min + b * self.resolution
        hi = min(self.max, lo + self.resolution)
        return (lo + hi) / 2.0


class Kind(enum.Enum):
    OBJECT = "object"
    RELATION = "relation"


@dataclass(frozen=True)
class ClassSchema:
    class_id: str
    kind: Kind
    dims: tuple[DimensionSpec, ...]
    arity: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "dims", tuple(self.dims))
        if not self.class_id:
            raise FeatureError("class id must be non-empty")
        if not self.dims:
            raise FeatureError(f"class {self.class_id!r}: at least one dimension required")
        names = [d.name for d in self.dims]
        if len(set(names)) != len(names):
            raise FeatureError(f"class {self.class_id!r}: duplicate dimension names")
        if self.kind is Kind.OBJECT and self.arity != 0:
            raise FeatureError(f"class {self.class_id!r}: objects have arity 0")
        if self.kind is Kind.RELATION and self.arity < 1:
            raise FeatureError(f"class {self.class_id!r}: relations need arity >= 1")

    @property
    def ndim(self) -> int:
        return len(self.dims)

    def dim_index(self, name: str) -> int:
        for i, d in enumerate(self.dims):
            if d.name == name:
                return i
        raise FeatureError(f"class {self.class_id!r} has no dimension {name!r}")


@dataclass(frozen=True)
class FeatureVector:
    class_id: str
    raw: tuple[float, ...]
    bins: tuple[int, ...]


def quantize(value: float, spec: DimensionSpec) -> int:
    if not (spec.min <= value <= spec.max):
        raise OutOfRangeError(spec.name, value, spec.min, spec.max)
    b = math.floor((value - spec.min) / spec.resolution + _BIN_EPS)
    return min(b, spec.bin_count - 1)


def make_vector(schema: ClassSchema, raw: Sequence[float]) -> FeatureVector:
    if len(raw) != schema.ndim:
        raise ArityError(
            f"class {schema.class_id!r} expects {schema.ndim} values, got {len(raw)}"
        )
    values = tuple(float(v) for v in raw)
    bins = tuple(quantize(v, d) for v, d in zip(values, schema.dims))
    return FeatureVector(schema.class_id, values, bins)


def vector_from_bins(schema: ClassSchema, bins: Sequence[int]) -> FeatureVector:
    """Build a vector whose raw values sit at the centers of ``bins``."""
    if len(bins) != schema.ndim:
        raise ArityError(f"class {schema.class_id!r} expects {schema.ndim} bins")
    for b, d in zip(bins, schema.dims):
        if not 0 <= b < d.bin_count:
            raise FeatureError(f"dimension {d.name!r}: bin {b} outside [0, {d.bin_count})")
    return make_vector(schema, [d.bin_center(b) for b, d in zip(bins, schema.dims)])


def validate_vector(schema: ClassSchema, vector: FeatureVector) -> None:
    """Raise unless ``vector`` satisfies every FeatureVector invariant for ``schema``."""
    if vector.class_id != schema.class_id:
        raise ClassMismatchError(f"vector of {vector.class_id!r} used as {schema.class_id!r}")
    if len(vector.raw) != schema.ndim or len(vector.bins) != schema.ndim:
        raise ArityError(f"class {schema.class_id!r} expects {schema.ndim} dimensions")
    for v, b, d in zip(vector.raw, vector.bins, schema.dims):
        if quantize(v, d) != b:
            raise FeatureError(f"dimension {d.name!r}: bin {b} does not match value {v!r}")


def bin_distance(a: FeatureVector, b: FeatureVector) -> list[int]:
    if a.class_id != b.class_id:
        raise ClassMismatchError(f"cannot compare {a.class_id!r} with {b.class_id!r}")
    if len(a.bins) != len(b.bins):
        raise ArityError("vectors differ in dimensionality")
    return [abs(x - y) for x, y in zip(a.bins, b.bins)]
