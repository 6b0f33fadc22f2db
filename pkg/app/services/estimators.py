"""Constants of the measure pair: Ä₂ and 𝒜₂ products, energies, testing sums and off-testing quotients"""
from dataclasses import dataclass
from typing import Optional, Sequence
import numpy as np
from app.core.exceptions import (
    InvalidParametersError, OverlappingPartitionError, ZeroOmegaMassError
)
from app.core.logging import logger
from app.models.geometry import Cube2D, CubeRestriction, Interval1D, IntervalRestriction
from app.models.measures import AtomicMeasure1D, CantorTree, CantorWeights, Measure1D, PlanarMeasure
from app.schemas.schemas import (
    CurvePoint, DivergenceCurve, EnergyTerm, SupSearchResult, WitnessSchema
)
from app.services.families import CubeFamily, EnergyCandidate, IntervalFamily
from app.services.kernels import KernelService
from app.services.quadrature import (
    FRAC, KEEP_INSIDE, POISSON_REPRODUCING, POISSON_STANDARD, RIESZ, RIESZ_VERTICAL
)
from app.utils.helpers import linear_fit

DIRECTIONS = ("forward", "dual")
MEAN_SLACK = 1e-12
EDGE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class EnergyBatch:
    """Per-candidate energy values with the per-term diagnostics"""
    values: np.ndarray
    pivotal: np.ndarray
    owners: np.ndarray
    masses: np.ndarray
    e_squared: np.ndarray
    poisson: np.ndarray
    terms: np.ndarray
    centers: list
    sizes: np.ndarray
    means_inside: np.ndarray

    @property
    def max_e_squared(self) -> float:
        return float(self.e_squared.max()) if self.e_squared.size else 0.0


def _best_index(values: np.ndarray) -> int:
    # np.argmax returns the first maximum, so ties go to the first scanned witness
    return int(np.argmax(values))


def _class_maxima(values: np.ndarray, names: list[str]) -> dict[str, float]:
    maxima = {}
    for value, name in zip(values, names):
        key = f"max[{name}]"
        maxima[key] = max(maxima.get(key, 0.0), float(value))
    return maxima


def _edge_slack(*coords) -> float:
    # rounding of an edge grows with its magnitude, not with the piece size
    return EDGE_RTOL * max(1.0, *(abs(c) for c in coords))


def _validate_pieces_1d(left: float, right: float, pieces: Sequence[tuple]):
    if not pieces:
        raise InvalidParametersError("a partition needs at least one piece")
    ordered = sorted(pieces)
    slack = _edge_slack(left, right)
    for lo, hi in ordered:
        if not lo < hi:
            raise InvalidParametersError(f"piece ({lo}, {hi}) is not well formed")
        if lo < left - slack or hi > right + slack:
            raise InvalidParametersError(f"piece ({lo}, {hi}) is not contained in ({left}, {right})")
    for (lo1, hi1), (lo2, hi2) in zip(ordered, ordered[1:]):
        if lo2 < hi1:
            raise OverlappingPartitionError(f"pieces ({lo1}, {hi1}) and ({lo2}, {hi2}) overlap")


def _validate_pieces_2d(cube: Cube2D, pieces: Sequence[Cube2D]):
    if not pieces:
        raise InvalidParametersError("a partition needs at least one piece")
    x_lo, x_hi = cube.x_range
    y_lo, y_hi = cube.y_range
    slack = _edge_slack(x_lo, x_hi, y_lo, y_hi)
    for piece in pieces:
        px, py = piece.x_range, piece.y_range
        if px[0] < x_lo - slack or px[1] > x_hi + slack or py[0] < y_lo - slack or py[1] > y_hi + slack:
            raise InvalidParametersError(f"piece {piece} is not contained in {cube}")
    for i, p in enumerate(pieces):
        for q in pieces[i + 1:]:
            overlap_x = min(p.x_range[1], q.x_range[1]) - max(p.x_range[0], q.x_range[0])
            overlap_y = min(p.y_range[1], q.y_range[1]) - max(p.y_range[0], q.y_range[0])
            if overlap_x > slack and overlap_y > slack:
                raise OverlappingPartitionError(f"pieces {p} and {q} overlap")


class EstimatorService:
    """Service for the constants of the construction"""

    # One-dimensional Ä₂

    @staticmethod
    def a2_variant_batch(centers, lengths, sigma: Measure1D, omega: Measure1D, alpha: float) -> np.ndarray:
        """𝒫̈(I, σ)·𝒫̈(I, ω) for many intervals"""
        ps = KernelService.poisson_variant_batch(POISSON_REPRODUCING, centers, lengths, sigma, alpha)
        pw = KernelService.poisson_variant_batch(POISSON_REPRODUCING, centers, lengths, omega, alpha)
        return ps * pw

    @staticmethod
    def a2_variant_product(interval: Interval1D, sigma: Measure1D, omega: Measure1D, alpha: float) -> float:
        """𝒫̈(I, σ)·𝒫̈(I, ω)"""
        return float(EstimatorService.a2_variant_batch([interval.center], [interval.length], sigma, omega, alpha)[0])

    @staticmethod
    def a2_variant_sup(sigma: Measure1D, omega: Measure1D, family: IntervalFamily, alpha: float) -> SupSearchResult:
        """Largest Ä₂ product over the family"""
        if family.size == 0:
            raise InvalidParametersError("candidate family is empty")
        values = EstimatorService.a2_variant_batch(family.centers, family.lengths, sigma, omega, alpha)
        best = _best_index(values)
        names = [family.class_name(i) for i in range(family.size)]
        logger.info(f"Ä₂ sup over {family.size} intervals: {values[best]:.6g} ({names[best]})")
        return SupSearchResult(
            value=float(values[best]),
            witness=WitnessSchema(
                kind="interval",
                center=[float(family.centers[best])],
                size=float(family.lengths[best]),
                family_class=names[best],
            ),
            candidates=family.size,
            family="intervals: tree, gaps, case geometries, straddling, far and large",
            depth_sigma=EstimatorService._depth_of(sigma),
            depth_omega=EstimatorService._depth_of(omega),
            tail_bound=EstimatorService._tail_of(sigma),
            notes=_class_maxima(values, names),
        )

    @staticmethod
    def _depth_of(mu) -> int:
        if isinstance(mu, CantorWeights):
            return mu.level
        if isinstance(mu, AtomicMeasure1D):
            return mu.depth if mu.depth is not None else 0
        return EstimatorService._depth_of(mu.rows[0].base) if mu.rows else 0

    @staticmethod
    def _tail_of(mu) -> float:
        if isinstance(mu, AtomicMeasure1D):
            return mu.tail_bound
        if isinstance(mu, PlanarMeasure):
            return sum(EstimatorService._tail_of(row.base) for row in mu.rows)
        return 0.0

    # Planar masses and moments

    @staticmethod
    def planar_moments(mu: PlanarMeasure, x_lo, x_hi, y_lo, y_hi, cx, cy) -> np.ndarray:
        """Rows of (mass, first x, first y, second) about (cx, cy) over closed boxes"""
        x_lo, x_hi, y_lo, y_hi, cx, cy = (np.asarray(v, dtype=np.float64) for v in (x_lo, x_hi, y_lo, y_hi, cx, cy))
        out = np.zeros((x_lo.size, 4))
        for row in mu.rows:
            sel = np.flatnonzero((y_lo <= row.height) & (row.height <= y_hi))
            if sel.size == 0:
                continue
            mom = KernelService.moments_1d(row.base, x_lo[sel] - row.offset, x_hi[sel] - row.offset,
                                           cx[sel] - row.offset)
            dy = row.height - cy[sel]
            out[sel, 0] += mom[:, 0]
            out[sel, 1] += mom[:, 1]
            out[sel, 2] += mom[:, 0] * dy
            out[sel, 3] += mom[:, 2] + mom[:, 0] * dy * dy
        return out

    @staticmethod
    def cube_masses(mu: PlanarMeasure, cubes: Sequence[Cube2D]) -> np.ndarray:
        """μ(Q) for closed cubes"""
        x = np.array([q.x_range for q in cubes]).reshape(-1, 2)
        y = np.array([q.y_range for q in cubes]).reshape(-1, 2)
        c = np.array([(q.cx, q.cy) for q in cubes]).reshape(-1, 2)
        return EstimatorService.planar_moments(mu, x[:, 0], x[:, 1], y[:, 0], y[:, 1], c[:, 0], c[:, 1])[:, 0]

    # Two-dimensional 𝒜₂

    @staticmethod
    def a2_2d_batch(cubes: Sequence[Cube2D], sigma: PlanarMeasure, omega: PlanarMeasure, alpha: float,
                    dual: bool = False) -> np.ndarray:
        """𝒫^α(Q, 1_{Q^c}σ)·ω(Q)/|Q|^(1-α/2), roles swapped when dual"""
        source, target = (omega, sigma) if dual else (sigma, omega)
        outside = [CubeRestriction(cube=q, keep_inside=False) for q in cubes]
        poisson = KernelService.poisson2d_batch(POISSON_REPRODUCING, cubes, source, alpha, outside)
        masses = EstimatorService.cube_masses(target, cubes)
        sides = np.array([q.side for q in cubes])
        return poisson * masses / sides ** (2.0 - alpha)

    @staticmethod
    def a2_2d(cube: Cube2D, sigma: PlanarMeasure, omega: PlanarMeasure, alpha: float, dual: bool = False) -> float:
        return float(EstimatorService.a2_2d_batch([cube], sigma, omega, alpha, dual)[0])

    @staticmethod
    def a2_2d_sup(sigma: PlanarMeasure, omega: PlanarMeasure, family: CubeFamily, alpha: float,
                  dual: bool = False) -> SupSearchResult:
        """Largest 𝒜₂ (or dual) value over the cube family"""
        if family.size == 0:
            raise InvalidParametersError("candidate family is empty")
        values = EstimatorService.a2_2d_batch(family.cubes, sigma, omega, alpha, dual)
        best = _best_index(values)
        cube = family.cubes[best]
        names = [family.class_name(i) for i in range(family.size)]
        logger.info(f"{'dual ' if dual else ''}𝒜₂ sup over {family.size} cubes: {values[best]:.6g} ({names[best]})")
        return SupSearchResult(
            value=float(values[best]),
            witness=WitnessSchema(kind="cube", center=[cube.cx, cube.cy], size=cube.side, family_class=names[best]),
            candidates=family.size,
            family="cubes: single row at three heights, gaps, random, unit rows, spanning rows",
            depth_sigma=EstimatorService._depth_of(sigma),
            depth_omega=EstimatorService._depth_of(omega),
            tail_bound=EstimatorService._tail_of(sigma),
            notes=_class_maxima(values, names),
        )

    # Energies

    @staticmethod
    def _energy_1d(candidates: Sequence[EnergyCandidate], sigma: Measure1D, omega: Measure1D,
                   alpha: float, direction: str) -> EnergyBatch:
        weights, source = (omega, sigma) if direction == "forward" else (sigma, omega)
        owners, los, his, effs = [], [], [], []
        for idx, cand in enumerate(candidates):
            left, right = cand.domain
            _validate_pieces_1d(left, right, cand.pieces)
            for lo, hi in cand.pieces:
                owners.append(idx)
                los.append(lo)
                his.append(hi)
                # pieces are half-open except at the right end of the domain
                effs.append(hi if hi >= right else np.nextafter(hi, -np.inf))
        owners = np.array(owners, dtype=np.int64)
        los = np.array(los)
        his = np.array(his)
        effs = np.array(effs)
        centers = 0.5 * (los + his)
        lengths = his - los

        mom = KernelService.moments_1d(weights, los, effs, centers)
        masses = mom[:, 0]
        positive = masses > 0.0
        safe = np.where(positive, masses, 1.0)
        variance = np.maximum(mom[:, 2] - mom[:, 1] ** 2 / safe, 0.0)
        e_squared = np.where(positive, variance / (safe * lengths ** 2), 0.0)
        means = centers + mom[:, 1] / safe
        slack = MEAN_SLACK * np.maximum(1.0, np.abs(centers))
        means_inside = ~positive | ((means >= los - slack) & (means <= his + slack))

        poisson = np.zeros(owners.size)
        idx = np.flatnonzero(positive)
        if idx.size:
            restrictions = [IntervalRestriction(*candidates[o].domain, keep_inside=True) for o in owners[idx]]
            poisson[idx] = KernelService.poisson_variant_batch(
                POISSON_STANDARD, centers[idx], lengths[idx], source, alpha, restrictions
            )
        terms = masses * e_squared * poisson ** 2

        domains = np.array([cand.domain for cand in candidates], dtype=np.float64).reshape(-1, 2)
        norm = KernelService.moments_1d(source, domains[:, 0], domains[:, 1], domains.mean(axis=1))[:, 0]
        sums = np.bincount(owners, weights=terms, minlength=len(candidates))
        pivots = np.bincount(owners, weights=masses * poisson ** 2, minlength=len(candidates))
        ok = norm > 0.0
        safe_norm = np.where(ok, norm, 1.0)
        return EnergyBatch(
            values=np.where(ok, sums / safe_norm, 0.0),
            pivotal=np.where(ok, pivots / safe_norm, 0.0),
            owners=owners, masses=masses, e_squared=e_squared, poisson=poisson, terms=terms,
            centers=[[float(c)] for c in domains.mean(axis=1)],
            sizes=domains[:, 1] - domains[:, 0],
            means_inside=means_inside,
        )

    @staticmethod
    def _energy_2d(candidates: Sequence[EnergyCandidate], sigma: PlanarMeasure, omega: PlanarMeasure,
                   alpha: float, direction: str) -> EnergyBatch:
        weights, source = (omega, sigma) if direction == "forward" else (sigma, omega)
        owners, boxes, cubes, restrictions = [], [], [], []
        for idx, cand in enumerate(candidates):
            domain = cand.domain
            _validate_pieces_2d(domain, cand.pieces)
            dx_hi = domain.x_range[1]
            dy_hi = domain.y_range[1]
            for piece in cand.pieces:
                x_lo, x_hi = piece.x_range
                y_lo, y_hi = piece.y_range
                if x_hi < dx_hi:
                    x_hi = np.nextafter(x_hi, -np.inf)
                if y_hi < dy_hi:
                    y_hi = np.nextafter(y_hi, -np.inf)
                owners.append(idx)
                boxes.append((x_lo, x_hi, y_lo, y_hi, piece.cx, piece.cy))
                cubes.append(piece)
                restrictions.append(CubeRestriction(cube=domain, keep_inside=True))
        owners = np.array(owners, dtype=np.int64)
        boxes = np.array(boxes, dtype=np.float64)
        sides = np.array([c.side for c in cubes])

        mom = EstimatorService.planar_moments(weights, *boxes.T)
        masses = mom[:, 0]
        positive = masses > 0.0
        safe = np.where(positive, masses, 1.0)
        spread = np.maximum(mom[:, 3] - (mom[:, 1] ** 2 + mom[:, 2] ** 2) / safe, 0.0)
        e_squared = np.where(positive, spread / (safe * sides ** 2), 0.0)
        mean_x = boxes[:, 4] + mom[:, 1] / safe
        mean_y = boxes[:, 5] + mom[:, 2] / safe
        slack = MEAN_SLACK * np.maximum(1.0, np.abs(boxes[:, :4]).max(axis=1))
        means_inside = ~positive | (
            (mean_x >= boxes[:, 0] - slack) & (mean_x <= boxes[:, 1] + slack)
            & (mean_y >= boxes[:, 2] - slack) & (mean_y <= boxes[:, 3] + slack)
        )

        poisson = np.zeros(owners.size)
        idx = np.flatnonzero(positive)
        if idx.size:
            poisson[idx] = KernelService.poisson2d_batch(
                POISSON_STANDARD, [cubes[i] for i in idx], source, alpha, [restrictions[i] for i in idx]
            )
        terms = masses * e_squared * poisson ** 2

        domains = [cand.domain for cand in candidates]
        norm = EstimatorService.cube_masses(source, domains)
        sums = np.bincount(owners, weights=terms, minlength=len(candidates))
        pivots = np.bincount(owners, weights=masses * poisson ** 2, minlength=len(candidates))
        ok = norm > 0.0
        safe_norm = np.where(ok, norm, 1.0)
        return EnergyBatch(
            values=np.where(ok, sums / safe_norm, 0.0),
            pivotal=np.where(ok, pivots / safe_norm, 0.0),
            owners=owners, masses=masses, e_squared=e_squared, poisson=poisson, terms=terms,
            centers=[[q.cx, q.cy] for q in domains],
            sizes=np.array([q.side for q in domains]),
            means_inside=means_inside,
        )

    @staticmethod
    def energy_batch(candidates: Sequence[EnergyCandidate], sigma, omega, alpha: float,
                     direction: str, flavor: str) -> EnergyBatch:
        """Normalized energy sums for every candidate"""
        if direction not in DIRECTIONS:
            raise InvalidParametersError(f"unknown direction {direction!r}")
        if flavor == "1d-variant":
            return EstimatorService._energy_1d(candidates, sigma, omega, alpha, direction)
        if flavor == "2d":
            return EstimatorService._energy_2d(candidates, sigma, omega, alpha, direction)
        raise InvalidParametersError(f"unknown flavor {flavor!r}")

    @staticmethod
    def energy_functional(domain, partition: Sequence, sigma, omega, alpha: float,
                          direction: str = "forward", flavor: str = "1d-variant") -> float:
        """Energy sum of one partition, normalized by the mass of the domain"""
        if isinstance(domain, Interval1D):
            domain = (domain.left, domain.right)
        candidate = EnergyCandidate(domain, tuple(partition), "single")
        return float(EstimatorService.energy_batch([candidate], sigma, omega, alpha, direction, flavor).values[0])

    @staticmethod
    def energy_terms(domain, partition: Sequence, sigma, omega, alpha: float,
                     direction: str = "forward", flavor: str = "1d-variant") -> list[EnergyTerm]:
        """Piece-by-piece decomposition of energy_functional"""
        if isinstance(domain, Interval1D):
            domain = (domain.left, domain.right)
        batch = EstimatorService.energy_batch(
            [EnergyCandidate(domain, tuple(partition), "single")], sigma, omega, alpha, direction, flavor
        )
        terms = []
        for i, piece in enumerate(partition):
            if flavor == "1d-variant":
                center, size = [0.5 * (piece[0] + piece[1])], piece[1] - piece[0]
            else:
                center, size = [piece.cx, piece.cy], piece.side
            terms.append(EnergyTerm(
                center=center, size=size, mass=float(batch.masses[i]),
                e_squared=float(batch.e_squared[i]), poisson=float(batch.poisson[i]), value=float(batch.terms[i]),
            ))
        return terms

    @staticmethod
    def energy_sup(sigma, omega, alpha: float, direction: str, flavor: str,
                   family: Sequence[EnergyCandidate]) -> SupSearchResult:
        """Largest normalized energy over the sampled (domain, partition) pairs"""
        if not family:
            raise InvalidParametersError("candidate family is empty")
        batch = EstimatorService.energy_batch(family, sigma, omega, alpha, direction, flavor)
        best = _best_index(batch.values)
        names = [cand.family_class for cand in family]
        notes = _class_maxima(batch.values, names)
        notes["max_e_squared"] = batch.max_e_squared
        notes["means_inside"] = float(bool(batch.means_inside.all()))
        notes["terms"] = float(batch.terms.size)
        notes["pivotal_max"] = float(batch.pivotal.max())
        logger.info(
            f"Energy sup ({flavor}, {direction}) over {len(family)} partitions: "
            f"{batch.values[best]:.6g} ({names[best]})"
        )
        return SupSearchResult(
            value=float(batch.values[best]),
            witness=WitnessSchema(
                kind="interval" if flavor == "1d-variant" else "cube",
                center=batch.centers[best],
                size=float(batch.sizes[best]),
                family_class=names[best],
                pieces=len(family[best].pieces),
            ),
            candidates=len(family),
            family=f"{flavor} partitions: trivial, dyadic, tree-aligned, random",
            depth_sigma=EstimatorService._depth_of(sigma),
            depth_omega=EstimatorService._depth_of(omega),
            tail_bound=EstimatorService._tail_of(sigma),
            notes=notes,
        )

    @staticmethod
    def dual_single_piece(tree: CantorTree, depth: int, sigma: Measure1D, omega: CantorWeights,
                          alpha: float) -> np.ndarray:
        """σ(I)E(I, σ)²P̈(I, ω)²/ω(I) for every tree interval down to depth"""
        ratios = []
        for k in range(depth + 1):
            lefts, rights = tree.intervals(k)
            centers = 0.5 * (lefts + rights)
            mom = KernelService.moments_1d(sigma, lefts, rights, centers)
            masses = mom[:, 0]
            safe = np.where(masses > 0.0, masses, 1.0)
            variance = np.maximum(mom[:, 2] - mom[:, 1] ** 2 / safe, 0.0)
            ell = tree.length(k)
            poisson = KernelService.poisson_variant_batch(POISSON_STANDARD, centers, ell, omega, alpha)
            ratios.append(variance / ell ** 2 * poisson ** 2 / omega.node_mass(k))
        return np.concatenate(ratios)

    # Testing sums

    @staticmethod
    def testing_points(tree: CantorTree, k: int, placement: str = "center", c: Optional[float] = None) -> np.ndarray:
        """z̈_j^k or ż_j^k = a_j^k + c b |I^k|"""
        if placement == "center":
            return tree.centers(k)
        if c is None or not 0.0 < c < 1.0:
            raise InvalidParametersError(f"riesz placement needs c in (0, 1), got {c}")
        left_ends, _ = tree.gaps(k)
        return left_ends + c * tree.b * tree.length(k)

    @staticmethod
    def generation_terms(K: int, kind: str, tree: CantorTree, omega: CantorWeights, alpha: float,
                         c: Optional[float] = None) -> np.ndarray:
        """Σ_j s^k (Kω̈(z_j^k))² for k = 0..K"""
        if K > tree.depth:
            raise InvalidParametersError(f"testing depth {K} exceeds tree depth {tree.depth}")
        ratio = tree.params.sigma_ratio
        terms = np.zeros(K + 1)
        for k in range(K + 1):
            if kind == "frac":
                values = KernelService.frac1d_batch(EstimatorService.testing_points(tree, k), omega, alpha)
            elif kind == "riesz":
                values = KernelService.riesz1d_batch(EstimatorService.testing_points(tree, k, "riesz", c), omega, alpha)
            else:
                raise InvalidParametersError(f"unknown testing kind {kind!r}")
            terms[k] = ratio ** k * np.sum(values ** 2)
        return terms

    @staticmethod
    def testing_partial_sum(K: int, kind: str, tree: CantorTree, omega: CantorWeights, alpha: float,
                            c: Optional[float] = None, lower_bound: Optional[float] = None) -> DivergenceCurve:
        """S(K) = Σ_{k=1}^{K} Σ_j s^k (Kω̈(z_j^k))² with its straight-line fit"""
        terms = EstimatorService.generation_terms(K, kind, tree, omega, alpha, c)
        increments = terms[1:]
        partial = np.cumsum(increments)
        if K == 0:
            points = [CurvePoint(depth=0, value=0.0)]
            slope, intercept, residual = 0.0, 0.0, 0.0
        else:
            depths = np.arange(1, K + 1)
            points = [CurvePoint(depth=float(d), value=float(v)) for d, v in zip(depths, partial)]
            slope, intercept, residual = linear_fit(depths, partial)
        if lower_bound is None:
            lower_bound = 4.0 ** (2.0 - alpha) if kind == "frac" else 0.0
        logger.info(f"Testing sum ({kind}) K={K}: S={partial[-1] if K else 0.0:.6g}, slope={slope:.6g}")
        return DivergenceCurve(
            kind=kind,
            points=points,
            increments=[float(v) for v in increments],
            slope=slope,
            intercept=intercept,
            max_residual=residual,
            lower_bound_per_generation=float(lower_bound),
            k0_term=float(terms[0]),
        )

    # Maximal function

    @staticmethod
    def maximal_square_integral(tree: CantorTree, k: int, j: int, sigma: AtomicMeasure1D,
                                omega: CantorWeights, alpha: float) -> tuple[float, float]:
        """∫_I (M^α 1_I σ)² dω over the tree interval I_j^k, paired with σ(I)"""
        if k > omega.level:
            raise InvalidParametersError(f"interval generation {k} is below the ω resolution {omega.level}")
        left, right = tree.interval(k, j)
        restricted = sigma.restricted(left, right)
        level = omega.level
        span = 1 << (level - k)
        leaves = tree.lefts[level][(j - 1) * span:j * span] + 0.5 * tree.length(level)
        values = KernelService.maximal_alpha_batch(leaves, restricted, tree, alpha)
        return float(omega.node_mass(level) * np.sum(values ** 2)), restricted.total_mass

    # Off-testing

    @staticmethod
    def offtest_quotient(cube: Cube2D, kind: str, sigma: PlanarMeasure, omega: PlanarMeasure,
                         alpha: float, m: int = 1) -> float:
        """(1/ω(Q)) Σ_{σ atoms outside Q} s (∫_Q K dω)²"""
        omega_mass = float(EstimatorService.cube_masses(omega, [cube])[0])
        if not omega_mass > 0.0:
            logger.error(f"Off-testing cube {cube} carries no ω mass")
            raise ZeroOmegaMassError(f"ω({cube}) = 0")
        if kind == "frac":
            code = FRAC
        elif kind == "riesz":
            if m not in (1, 2):
                raise InvalidParametersError(f"riesz component must be 1 or 2, got {m}")
            code = RIESZ if m == 1 else RIESZ_VERTICAL
        else:
            raise InvalidParametersError(f"unknown off-testing kind {kind!r}")

        x_lo, x_hi = cube.x_range
        total = 0.0
        for s_row in sigma.rows:
            base = s_row.base
            if not isinstance(base, AtomicMeasure1D):
                raise InvalidParametersError("off-testing needs an atomic σ")
            inside = np.zeros(base.size, dtype=bool)
            if cube.contains_height(s_row.height):
                inside = (base.positions >= x_lo - s_row.offset) & (base.positions <= x_hi - s_row.offset)
            outside = np.flatnonzero(~inside)
            if outside.size == 0:
                continue
            positions = base.positions[outside]
            inner = np.zeros(outside.size)
            for w_row in omega.rows:
                if not cube.contains_height(w_row.height):
                    continue
                # shift is exactly zero when the σ row sits above its own ω row
                xs = positions + (s_row.offset - w_row.offset)
                n = xs.size
                inner += KernelService.sum_1d(
                    code, w_row.base, xs, s_row.height - w_row.height, 1.0,
                    np.full(n, x_lo - w_row.offset), np.full(n, x_hi - w_row.offset),
                    np.full(n, KEEP_INSIDE, dtype=np.int64), alpha,
                )
            KernelService.check_finite(inner, positions, "off-testing")
            total += float(np.sum(base.masses[outside] * inner ** 2))
        return total / omega_mass
