"""Candidate families for the sampled supremum searches.

Every family is nested across depths: generation k always draws from its own
generator seeded with (seed, k), so the family at depth d is a prefix-wise
subset of the family at depth d + 2. Order is generation, then index, then
class, which fixes the tie-breaking of the searches.
"""
from dataclasses import dataclass
from typing import Union
import numpy as np
from app.core.logging import logger
from app.models.geometry import Cube2D, Interval1D
from app.models.measures import CantorTree, PlanarMeasure

INTERVAL_CLASSES = (
    "tree", "gap", "case1-wide", "case1-narrow", "case1-offcenter", "subgap",
    "straddle-left", "straddle-right", "case2", "far", "large",
)

CUBE_CLASSES = (
    "row-tree-low", "row-tree-mid", "row-tree-high", "row-gap-low", "row-gap-high",
    "row-random", "unit-row", "span",
)

# cube families stop refining here; deeper cubes only repeat the 1-d geometry
MAX_CUBE_GENERATION = 8
MAX_ENERGY_CUBE_GENERATION = 7


@dataclass(frozen=True, eq=False)
class IntervalFamily:
    """Candidate intervals in scan order"""
    centers: np.ndarray
    lengths: np.ndarray
    classes: np.ndarray

    @property
    def size(self) -> int:
        return int(self.centers.size)

    def interval(self, i: int) -> Interval1D:
        return Interval1D(center=float(self.centers[i]), length=float(self.lengths[i]))

    def class_name(self, i: int) -> str:
        return INTERVAL_CLASSES[int(self.classes[i])]


@dataclass(frozen=True, eq=False)
class CubeFamily:
    """Candidate cubes in scan order"""
    cubes: list
    classes: np.ndarray

    @property
    def size(self) -> int:
        return len(self.cubes)

    def class_name(self, i: int) -> str:
        return CUBE_CLASSES[int(self.classes[i])]


@dataclass(frozen=True)
class EnergyCandidate:
    """A domain with one of its partitions; 1-d domains are (left, right) pairs"""
    domain: Union[tuple, Cube2D]
    pieces: tuple
    family_class: str


class FamilyService:
    """Service for building candidate families"""

    @staticmethod
    def sample_indices(count: int, samples: int, rng: np.random.Generator) -> np.ndarray:
        """All indices when few, else both extremes plus a sorted random interior"""
        if count <= samples:
            return np.arange(count)
        interior = rng.choice(np.arange(1, count - 1), size=max(samples - 2, 0), replace=False)
        return np.concatenate(([0], np.sort(interior), [count - 1]))

    @staticmethod
    def interval_family(tree: CantorTree, depth: int, samples: int, seed: int) -> IntervalFamily:
        """Tree intervals, gaps and the case geometries around every sampled gap"""
        centers = []
        lengths = []
        classes = []
        names = {name: i for i, name in enumerate(INTERVAL_CLASSES)}
        for k in range(depth + 1):
            rng = np.random.default_rng([seed, k])
            js = FamilyService.sample_indices(tree.count(k), samples, rng)
            u = rng.random((js.size, 18))
            ell = tree.length(k)
            gap = tree.b * ell
            left = tree.lefts[k][js]
            a = left + ell * tree.ratio
            b = left + ell * tree.half_span
            z = left + 0.5 * ell

            columns = [
                (z, np.full(js.size, ell), "tree"),
                (z, np.full(js.size, gap), "gap"),
                (z, np.full(js.size, 0.5 * gap), "case1-wide"),
                (z, np.full(js.size, gap / 16.0), "case1-narrow"),
            ]
            for d in range(2):
                c = a + gap * (0.2 + 0.6 * u[:, 2 * d])
                room = np.minimum(c - a, b - c)
                columns.append((c, 2.0 * room * (0.1 + 0.9 * u[:, 2 * d + 1]), "case1-offcenter"))
            for d in range(3):
                c = a + gap * (0.05 + 0.9 * u[:, 4 + 2 * d])
                room = np.minimum(c - a, b - c)
                columns.append((c, 2.0 * room * (0.05 + 0.95 * u[:, 5 + 2 * d]), "subgap"))
            for d in range(2):
                columns.append((a, gap * (0.05 + 1.95 * u[:, 10 + d]), "straddle-left"))
            for d in range(2):
                columns.append((b, gap * (0.05 + 1.95 * u[:, 12 + d]), "straddle-right"))
            for d in range(2):
                lo = a - ell * tree.ratio * (0.05 + 0.95 * u[:, 14 + 2 * d])
                hi = b + ell * tree.ratio * (0.05 + 0.95 * u[:, 15 + 2 * d])
                columns.append((0.5 * (lo + hi), hi - lo, "case2"))
            columns.append((z + 11.0, np.full(js.size, ell), "far"))

            centers.append(np.stack([col[0] for col in columns], axis=1).ravel())
            lengths.append(np.stack([col[1] for col in columns], axis=1).ravel())
            classes.append(np.tile([names[col[2]] for col in columns], js.size))

            if k == 0:
                sizes = np.array([2.0, 4.0, 8.0, 16.0])
                centers.append(np.full(sizes.size, 0.5))
                lengths.append(sizes)
                classes.append(np.full(sizes.size, names["large"]))

        family = IntervalFamily(
            centers=np.concatenate(centers),
            lengths=np.concatenate(lengths),
            classes=np.concatenate(classes).astype(np.int64),
        )
        logger.debug(f"Interval family depth={depth}: {family.size} candidates")
        return family

    @staticmethod
    def cube_family(tree: CantorTree, sigma: PlanarMeasure, depth: int, samples: int, seed: int) -> CubeFamily:
        """Cubes within one row at three heights, random cubes and cubes spanning rows"""
        names = {name: i for i, name in enumerate(CUBE_CLASSES)}
        cubes = []
        classes = []

        def add(cube: Cube2D, name: str):
            cubes.append(cube)
            classes.append(names[name])

        for n, row in enumerate(sigma.rows):
            a, h = row.offset, row.height
            for k in range(min(depth, MAX_CUBE_GENERATION) + 1):
                rng = np.random.default_rng([seed, n, k])
                js = FamilyService.sample_indices(tree.count(k), samples, rng)
                ell = tree.length(k)
                gap = tree.b * ell
                for z in tree.centers(k)[js]:
                    add(Cube2D(a + z, 0.0, ell), "row-tree-low")
                    add(Cube2D(a + z, 0.5 * h, ell), "row-tree-mid")
                    add(Cube2D(a + z, h, ell), "row-tree-high")
                    add(Cube2D(a + z, 0.0, gap), "row-gap-low")
                    add(Cube2D(a + z, h, gap), "row-gap-high")
            rng = np.random.default_rng([seed, n, 10_000])
            u = rng.random((4 * samples, 3))
            for ux, uy, us in u:
                add(Cube2D(a + ux, h * (2.0 * uy - 0.5), 10.0 ** (-3.0 + 3.3 * us)), "row-random")
            add(Cube2D(a + 0.5, -0.5, 1.0), "unit-row")
            add(Cube2D(a + 0.5, 0.5 * h, max(1.0, 1.01 * h)), "unit-row")

        offsets = sigma.offsets
        for m in range(1, len(offsets)):
            for extra in (0.0, 0.5, 2.0):
                side = offsets[m] + 1.0 + 2.0 * extra
                cx = 0.5 * (offsets[m] + 1.0)
                add(Cube2D(cx, 0.0, side), "span")
                add(Cube2D(cx, 0.5 * side - 0.5, side), "span")

        logger.debug(f"Cube family depth={depth}: {len(cubes)} candidates")
        return CubeFamily(cubes=cubes, classes=np.array(classes, dtype=np.int64))

    @staticmethod
    def dyadic_pieces(left: float, right: float, s: int) -> tuple:
        """2^s equal subintervals"""
        edges = np.linspace(left, right, (1 << s) + 1)
        edges[-1] = right
        return tuple((float(edges[i]), float(edges[i + 1])) for i in range(edges.size - 1))

    @staticmethod
    def tree_pieces(tree: CantorTree, k: int, j: int, levels: int) -> tuple:
        """Descendants of I_j^k that many generations down"""
        depth = k + levels
        first = (j - 1) << levels
        lefts = tree.lefts[depth][first:first + (1 << levels)]
        ell = tree.length(depth)
        pieces = [(float(x), float(x + ell)) for x in lefts]
        # the last child ends where its parent does
        _, parent_right = tree.interval(k, j)
        pieces[-1] = (pieces[-1][0], min(pieces[-1][1], parent_right))
        return tuple(pieces)

    @staticmethod
    def random_pieces(left: float, right: float, rng: np.random.Generator) -> tuple:
        """Random cut of [left, right] into 2..8 pieces"""
        count = int(rng.integers(2, 9))
        cuts = np.sort(left + (right - left) * rng.random(count - 1))
        edges = np.concatenate(([left], cuts, [right]))
        return tuple((float(edges[i]), float(edges[i + 1])) for i in range(count) if edges[i + 1] > edges[i])

    @staticmethod
    def energy_family_1d(tree: CantorTree, depth: int, samples: int, seed: int) -> list[EnergyCandidate]:
        """Tree and random intervals with trivial, dyadic, tree-aligned and random partitions"""
        candidates = []
        for k in range(depth + 1):
            rng = np.random.default_rng([seed, 7, k])
            js = FamilyService.sample_indices(tree.count(k), samples, rng)
            domains = []
            for j in js:
                left, right = tree.interval(k, int(j) + 1)
                domains.append((left, right, int(j) + 1, "tree"))
            for uc, ul in rng.random((4, 2)):
                ell = tree.length(k) * (0.5 + 1.5 * ul)
                center = uc
                domains.append((center - 0.5 * ell, center + 0.5 * ell, None, "random"))
            for left, right, j, kind in domains:
                domain = (left, right)
                candidates.append(EnergyCandidate(domain, ((left, right),), f"{kind}-trivial"))
                for s in range(1, 5):
                    candidates.append(EnergyCandidate(domain, FamilyService.dyadic_pieces(left, right, s),
                                                      f"{kind}-dyadic"))
                if j is not None:
                    for levels in range(1, 5):
                        if k + levels <= tree.depth:
                            candidates.append(EnergyCandidate(domain, FamilyService.tree_pieces(tree, k, j, levels),
                                                              "tree-aligned"))
                for _ in range(2):
                    candidates.append(EnergyCandidate(domain, FamilyService.random_pieces(left, right, rng),
                                                      f"{kind}-random"))
        logger.debug(f"Energy family (1d) depth={depth}: {len(candidates)} candidates")
        return candidates

    @staticmethod
    def dyadic_cubes(cube: Cube2D, s: int) -> tuple:
        """4^s equal subcubes"""
        n = 1 << s
        side = cube.side / n
        x_lo, _ = cube.x_range
        y_lo, _ = cube.y_range
        return tuple(
            Cube2D(x_lo + (ix + 0.5) * side, y_lo + (iy + 0.5) * side, side)
            for ix in range(n) for iy in range(n)
        )

    @staticmethod
    def energy_family_2d(tree: CantorTree, sigma: PlanarMeasure, depth: int, samples: int,
                         seed: int) -> list[EnergyCandidate]:
        """Single-row cubes, cubes holding both rows of a pair and cubes spanning rows, dyadically split"""
        domains = []
        for n, row in enumerate(sigma.rows):
            a, h = row.offset, row.height
            for k in range(min(depth, MAX_ENERGY_CUBE_GENERATION) + 1):
                rng = np.random.default_rng([seed, 11, n, k])
                js = FamilyService.sample_indices(tree.count(k), samples, rng)
                ell = tree.length(k)
                for z in tree.centers(k)[js]:
                    domains.append((Cube2D(a + z, 0.0, ell), "row-low"))
                    side = max(ell, 1.01 * h)
                    domains.append((Cube2D(a + z, 0.5 * h, side), "row-pair"))
            domains.append((Cube2D(a + 0.5, -0.5, 1.0), "unit-row"))
            domains.append((Cube2D(a + 0.5, 0.5 * h, max(1.0, 1.01 * h)), "unit-pair"))
        offsets = sigma.offsets
        for m in range(1, len(offsets)):
            for extra in (0.0, 0.5, 2.0):
                side = offsets[m] + 1.0 + 2.0 * extra
                domains.append((Cube2D(0.5 * (offsets[m] + 1.0), 0.5 * side - 0.5, side), "span"))

        candidates = []
        for cube, name in domains:
            for s in range(3):
                candidates.append(EnergyCandidate(cube, FamilyService.dyadic_cubes(cube, s), f"{name}-dyadic{s}"))
        logger.debug(f"Energy family (2d) depth={depth}: {len(candidates)} candidates")
        return candidates
