from dataclasses import dataclass
from enum import Enum
from typing import Optional
from app.core.exceptions import InvalidParametersError


@dataclass(frozen=True)
class Interval1D:
    """Interval given by its center and length"""
    center: float
    length: float

    def __post_init__(self):
        if not self.length > 0.0:
            raise InvalidParametersError(f"interval length must be positive, got {self.length}")

    @classmethod
    def from_endpoints(cls, left: float, right: float) -> "Interval1D":
        """Build an interval from (left, right)"""
        if not left < right:
            raise InvalidParametersError(f"interval ({left}, {right}) is not well formed")
        return cls(center=0.5 * (left + right), length=right - left)

    @property
    def left(self) -> float:
        return self.center - 0.5 * self.length

    @property
    def right(self) -> float:
        return self.center + 0.5 * self.length


@dataclass(frozen=True)
class Cube2D:
    """Axis-parallel square given by its center and side"""
    cx: float
    cy: float
    side: float

    def __post_init__(self):
        if not self.side > 0.0:
            raise InvalidParametersError(f"cube side must be positive, got {self.side}")

    @classmethod
    def from_ranges(cls, x_lo: float, x_hi: float, y_lo: float) -> "Cube2D":
        """Square with the given x-range whose bottom edge sits at y_lo"""
        side = x_hi - x_lo
        return cls(cx=0.5 * (x_lo + x_hi), cy=y_lo + 0.5 * side, side=side)

    @property
    def x_range(self) -> tuple[float, float]:
        half = 0.5 * self.side
        return self.cx - half, self.cx + half

    @property
    def y_range(self) -> tuple[float, float]:
        half = 0.5 * self.side
        return self.cy - half, self.cy + half

    def contains_height(self, height: float) -> bool:
        y_lo, y_hi = self.y_range
        return y_lo <= height <= y_hi


class KernelKind(str, Enum):
    """The kernels the library evaluates"""
    FRAC1D = "frac1d"
    RIESZ1D = "riesz1d"
    FRAC2D = "frac2d"
    RIESZ2D = "riesz2d"
    POISSON_VARIANT_REPRODUCING = "poisson_variant_reproducing"
    POISSON_VARIANT_STANDARD = "poisson_variant_standard"
    POISSON2D_REPRODUCING = "poisson2d_reproducing"
    POISSON2D_STANDARD = "poisson2d_standard"


@dataclass(frozen=True)
class KernelSpec:
    """Kernel selection with its exponent and vertical smoothing"""
    kind: KernelKind
    alpha: float
    gamma: float = 0.0
    component: Optional[int] = None

    def __post_init__(self):
        if not 0.0 <= self.alpha < 2.0:
            raise InvalidParametersError(f"alpha must lie in [0, 2), got {self.alpha}")
        if self.gamma < 0.0:
            raise InvalidParametersError(f"gamma must be nonnegative, got {self.gamma}")
        if self.kind == KernelKind.RIESZ2D and self.component not in (1, 2):
            raise InvalidParametersError("riesz2d needs component m in {1, 2}")


@dataclass(frozen=True)
class CubeRestriction:
    """Indicator of a closed cube or of its complement"""
    cube: Cube2D
    keep_inside: bool = True


@dataclass(frozen=True)
class IntervalRestriction:
    """Indicator of a closed interval or of its complement"""
    left: float
    right: float
    keep_inside: bool = True
