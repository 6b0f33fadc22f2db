"""In-memory measures of the construction.

All objects are frozen after construction and hold numpy arrays that are
never written to again, so they can be shared freely between threads.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union
import numpy as np
from app.schemas.schemas import ConstructionParams
from app.core.exceptions import InvalidParametersError


class Provenance(str, Enum):
    """Where an atomic measure came from"""
    SIGMA_CENTER = "sigma-center"
    SIGMA_RIESZ = "sigma-riesz"
    CUSTOM = "custom"


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class CantorTree:
    """Generations 0..depth of the middle-b Cantor construction on [0, 1]"""
    params: ConstructionParams
    depth: int
    lefts: tuple

    @property
    def ratio(self) -> float:
        return self.params.ratio

    @property
    def b(self) -> float:
        return self.params.b

    @property
    def half_span(self) -> float:
        """Offset of the right child inside its parent, in units of the parent length"""
        return (1.0 + self.b) * 0.5

    @property
    def lengths(self) -> np.ndarray:
        """|I^k| for k = 0..depth"""
        return np.array([self.length(k) for k in range(self.depth + 1)], dtype=np.float64)

    def length(self, k: int) -> float:
        """Common length of the generation-k intervals"""
        return self.ratio ** k

    def count(self, k: int) -> int:
        return 1 << k

    def intervals(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Left and right endpoints of I_j^k, j = 1..2^k"""
        lefts = self.lefts[k]
        return lefts, lefts + self.length(k)

    def gaps(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Endpoints a_j^k, b_j^k of the removed gaps G_j^k"""
        lefts = self.lefts[k]
        length = self.length(k)
        return lefts + length * self.ratio, lefts + length * self.half_span

    def centers(self, k: int) -> np.ndarray:
        """Gap centers z_j^k, which are also the interval midpoints"""
        return self.lefts[k] + 0.5 * self.length(k)

    def interval(self, k: int, j: int) -> tuple[float, float]:
        """I_j^k with 1-based j"""
        left = float(self.lefts[k][j - 1])
        return left, left + self.length(k)

    def gap(self, k: int, j: int) -> tuple[float, float]:
        a, b = self.gaps(k)
        return float(a[j - 1]), float(b[j - 1])

    def center(self, k: int, j: int) -> float:
        return float(self.lefts[k][j - 1] + 0.5 * self.length(k))

    def locate(self, k: int, x: float) -> Optional[int]:
        """1-based index of the generation-k interval containing x, if any"""
        lefts = self.lefts[k]
        idx = int(np.searchsorted(lefts, x, side="right")) - 1
        if idx < 0 or x > lefts[idx] + self.length(k):
            return None
        return idx + 1

    def node_of(self, left: float, right: float, rtol: float = 1e-12) -> Optional[tuple[int, int]]:
        """(k, j) when (left, right) is a tree interval up to rounding"""
        length = right - left
        if length <= 0.0:
            return None
        k = int(round(np.log(length) / np.log(self.ratio)))
        if k < 0 or k > self.depth or not np.isclose(length, self.length(k), rtol=1e-9, atol=0.0):
            return None
        lefts = self.lefts[k]
        idx = int(np.searchsorted(lefts, left))
        for cand in (idx - 1, idx):
            if 0 <= cand < lefts.size and abs(lefts[cand] - left) <= rtol * max(1.0, abs(left)) + 1e-15:
                return k, cand + 1
        return None


@dataclass(frozen=True, eq=False)
class CantorWeights:
    """The Cantor measure on a tree, integrated through its ω^(m) approximation"""
    tree: CantorTree
    level: int
    tol: float
    total_mass: float = 1.0

    def __post_init__(self):
        if self.level > self.tree.depth:
            raise InvalidParametersError(
                f"approximation level {self.level} exceeds tree depth {self.tree.depth}"
            )

    @property
    def params(self) -> ConstructionParams:
        return self.tree.params

    @property
    def variance_factor(self) -> float:
        """Variance of the Cantor measure on a node divided by the node length squared"""
        r = self.tree.ratio
        return ((1.0 + self.tree.b) * 0.5) ** 2 / (4.0 * (1.0 - r * r))

    def node_mass(self, k: int) -> float:
        """ω̈(I_j^k) = 2^-k for any j"""
        return self.total_mass * 0.5 ** k

    def leaf_midpoints(self) -> np.ndarray:
        return self.tree.centers(self.level)


@dataclass(frozen=True, eq=False)
class AtomicMeasure1D:
    """Finitely many point masses on the line, sorted by position"""
    positions: np.ndarray
    masses: np.ndarray
    provenance: Provenance = Provenance.CUSTOM
    depth: Optional[int] = None
    tail_bound: float = 0.0
    cumulative: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        positions = np.asarray(self.positions, dtype=np.float64)
        masses = np.asarray(self.masses, dtype=np.float64)
        if positions.shape != masses.shape or positions.ndim != 1:
            raise InvalidParametersError("positions and masses must be matching 1-d arrays")
        if np.any(masses <= 0.0):
            raise InvalidParametersError("atom masses must be positive")
        order = np.argsort(positions, kind="stable")
        positions = positions[order]
        masses = masses[order]
        if positions.size > 1 and np.any(np.diff(positions) <= 0.0):
            raise InvalidParametersError("atom positions must be distinct")
        object.__setattr__(self, "positions", _readonly(positions))
        object.__setattr__(self, "masses", _readonly(masses))
        object.__setattr__(self, "cumulative", _readonly(np.concatenate(([0.0], np.cumsum(masses)))))

    @classmethod
    def empty(cls) -> "AtomicMeasure1D":
        return cls(np.zeros(0), np.zeros(0))

    @property
    def size(self) -> int:
        return int(self.positions.size)

    @property
    def total_mass(self) -> float:
        return float(self.cumulative[-1])

    def restricted(self, left: float, right: float) -> "AtomicMeasure1D":
        """1_[left, right] times the measure"""
        lo = np.searchsorted(self.positions, left, side="left")
        hi = np.searchsorted(self.positions, right, side="right")
        return AtomicMeasure1D(self.positions[lo:hi], self.masses[lo:hi], self.provenance, self.depth, 0.0)


Measure1D = Union[AtomicMeasure1D, CantorWeights]


@dataclass(frozen=True, eq=False)
class PlanarRow:
    """One copy of a 1-d measure placed on [a_n, a_n + 1] x {height}"""
    offset: float
    height: float
    base: Measure1D


@dataclass(frozen=True, eq=False)
class PlanarMeasure:
    """Sum of horizontal rows of 1-d measures"""
    rows: tuple
    separations: tuple = ()

    @property
    def offsets(self) -> list[float]:
        return [row.offset for row in self.rows]

    @property
    def heights(self) -> list[float]:
        return [row.height for row in self.rows]

    def row_mass(self, n: int) -> float:
        return self.rows[n].base.total_mass

    @property
    def total_mass(self) -> float:
        return sum(row.base.total_mass for row in self.rows)
