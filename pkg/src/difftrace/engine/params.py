"""Flat parameter and gradient vectors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ArgumentError, NumericError, ShapeError


@dataclass(frozen=True)
class Segment:
    """Named contiguous slice of a flat parameter vector."""

    name: str
    offset: int
    shape: tuple[int, ...]

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    @property
    def stop(self) -> int:
        return self.offset + self.size


def build_layout(named_shapes: list[tuple[str, tuple[int, ...]]]) -> tuple[Segment, ...]:
    """Pack named shapes back to back, in order."""
    layout = []
    offset = 0
    for name, shape in named_shapes:
        segment = Segment(name=name, offset=offset, shape=tuple(shape))
        layout.append(segment)
        offset = segment.stop
    return tuple(layout)


@dataclass
class ParameterVector:
    """Ordered float64 parameters plus the layout that names their segments."""

    values: np.ndarray
    layout: tuple[Segment, ...]

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ShapeError(f"Parameter values must be 1-D, got shape {self.values.shape}")
        expected = 0
        for segment in self.layout:
            if segment.offset != expected:
                raise ArgumentError(f"Segment '{segment.name}' is not contiguous at offset {expected}")
            expected = segment.stop
        if expected != self.values.size:
            raise ShapeError(f"Layout covers {expected} values but vector has {self.values.size}")

    @property
    def size(self) -> int:
        return int(self.values.size)

    def segment(self, name: str) -> np.ndarray:
        """Reshaped view of one named segment."""
        for segment in self.layout:
            if segment.name == name:
                return self.values[segment.offset : segment.stop].reshape(segment.shape)
        available = [s.name for s in self.layout]
        raise KeyError(f"Unknown segment: '{name}'. Available: {available}")

    def with_values(self, values: np.ndarray) -> ParameterVector:
        return ParameterVector(values=np.array(values, dtype=np.float64), layout=self.layout)

    def copy(self) -> ParameterVector:
        return self.with_values(self.values.copy())

    def check_finite(self) -> None:
        """Raise NumericError naming the first segment holding NaN/Inf."""
        for name in non_finite_segments(self.values, self.layout):
            raise NumericError("Non-finite parameter values", where=name)


@dataclass(frozen=True)
class GradientVector:
    """Gradient of a scalar loss with its Euclidean norm cached."""

    values: np.ndarray
    norm: float = field(init=False)

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "norm", float(np.linalg.norm(values)))

    @property
    def size(self) -> int:
        return int(self.values.size)

    def dot(self, other: GradientVector | np.ndarray) -> float:
        other_values = other.values if isinstance(other, GradientVector) else other
        return float(np.dot(self.values, other_values))

    def scaled(self, factor: float) -> GradientVector:
        return GradientVector(self.values * factor)

    def unit(self, norm_floor: float) -> GradientVector:
        """Unit-normalized copy; the caller handles degenerate norms."""
        if self.norm < norm_floor:
            raise ArgumentError(f"Cannot normalize gradient with norm {self.norm} < {norm_floor}")
        return GradientVector(self.values / self.norm)


def non_finite_segments(values: np.ndarray, layout: tuple[Segment, ...]) -> list[str]:
    return [s.name for s in layout if not np.all(np.isfinite(values[s.offset : s.stop]))]
