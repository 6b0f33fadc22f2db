"""Kernel integrals against the 1-d and planar measures.

Single-point operations wrap the batch versions, which hand arrays to the
compiled core in app.services.quadrature.
"""
from typing import Optional, Sequence, Union
import numpy as np
from app.core.exceptions import InvalidParametersError, SingularEvaluationError
from app.core.logging import logger
from app.models.geometry import (
    Cube2D, CubeRestriction, Interval1D, IntervalRestriction, KernelKind, KernelSpec
)
from app.models.measures import AtomicMeasure1D, CantorTree, CantorWeights, Measure1D, PlanarMeasure
from app.services import quadrature
from app.services.quadrature import (
    FRAC, KEEP_INSIDE, KEEP_OUTSIDE, NO_RESTRICTION, POISSON_REPRODUCING, POISSON_STANDARD,
    RIESZ, RIESZ_VERTICAL
)

SINGULAR_KINDS = (FRAC, RIESZ, RIESZ_VERTICAL)


def _as_array(values) -> np.ndarray:
    return np.ascontiguousarray(np.atleast_1d(np.asarray(values, dtype=np.float64)))


def _interval_restrictions(n: int, restriction: Union[None, IntervalRestriction, Sequence]):
    los = np.zeros(n)
    his = np.zeros(n)
    modes = np.full(n, NO_RESTRICTION, dtype=np.int64)
    if restriction is None:
        return los, his, modes
    items = [restriction] * n if isinstance(restriction, IntervalRestriction) else list(restriction)
    if len(items) != n:
        raise InvalidParametersError(f"expected {n} restrictions, got {len(items)}")
    for i, item in enumerate(items):
        if item is None:
            continue
        los[i] = item.left
        his[i] = item.right
        modes[i] = KEEP_INSIDE if item.keep_inside else KEEP_OUTSIDE
    return los, his, modes


class KernelService:
    """Service for kernel integrals"""

    @staticmethod
    def sum_1d(kind: int, mu: Measure1D, xs, ys, scales, los, his, modes, alpha: float) -> np.ndarray:
        """Batch ∫ K(x_i - t, y_i) dμ(t) for a 1-d measure; NaN marks a singular point"""
        xs = _as_array(xs)
        n = xs.size
        ys = np.broadcast_to(_as_array(ys), (n,)).copy()
        scales = np.broadcast_to(_as_array(scales), (n,)).copy()
        if isinstance(mu, AtomicMeasure1D):
            if mu.size == 0:
                return np.zeros(n)
            return quadrature.atom_sums(kind, xs, ys, scales, los, his, modes,
                                        mu.positions, mu.masses, float(alpha))
        tree = mu.tree
        return quadrature.cantor_sums(kind, xs, ys, scales, los, his, modes,
                                      tree.lengths, tree.half_span, mu.level, mu.tol,
                                      float(alpha), mu.total_mass)

    @staticmethod
    def check_finite(values: np.ndarray, xs, what: str) -> np.ndarray:
        """Raise SingularEvaluationError on the first NaN"""
        bad = np.flatnonzero(np.isnan(values))
        if bad.size:
            x = np.atleast_1d(xs)[bad[0]]
            logger.error(f"Singular {what} evaluation at x={x!r}")
            raise SingularEvaluationError(f"{what} evaluated on an atom at x={x!r}")
        return values

    @staticmethod
    def _check_support(mu: Measure1D, xs: np.ndarray, ys: np.ndarray, what: str):
        # points on supp ω̈ with no vertical offset are singular for 0 <= alpha < 2
        if not isinstance(mu, CantorWeights):
            return
        flat = ys == 0.0
        if not flat.any():
            return
        lefts = mu.tree.lefts[mu.level]
        length = mu.tree.length(mu.level)
        pts = xs[flat]
        idx = np.searchsorted(lefts, pts, side="right") - 1
        inside = (idx >= 0) & (pts <= lefts[np.maximum(idx, 0)] + length)
        if inside.any():
            x = pts[np.flatnonzero(inside)[0]]
            raise SingularEvaluationError(f"{what} evaluated on the Cantor support at x={x!r}")

    @staticmethod
    def _smoothed_1d(kind: int, xs, mu: Measure1D, alpha: float, gamma: float, what: str) -> np.ndarray:
        if gamma < 0.0:
            raise InvalidParametersError(f"gamma must be nonnegative, got {gamma}")
        xs = _as_array(xs)
        ys = np.full(xs.size, float(gamma))
        KernelService._check_support(mu, xs, ys, what)
        los, his, modes = _interval_restrictions(xs.size, None)
        values = KernelService.sum_1d(kind, mu, xs, ys, 1.0, los, his, modes, alpha)
        return KernelService.check_finite(values, xs, what)

    @staticmethod
    def frac1d_batch(xs, mu: Measure1D, alpha: float, gamma: float = 0.0) -> np.ndarray:
        """∫ ((x-y)² + γ²)^((α-2)/2) dμ(y) at every x"""
        return KernelService._smoothed_1d(FRAC, xs, mu, alpha, gamma, "frac1d")

    @staticmethod
    def frac1d(x: float, mu: Measure1D, alpha: float, gamma: float = 0.0) -> float:
        return float(KernelService.frac1d_batch([x], mu, alpha, gamma)[0])

    @staticmethod
    def riesz1d_batch(xs, mu: Measure1D, alpha: float, gamma: float = 0.0) -> np.ndarray:
        """∫ (x-y) ((x-y)² + γ²)^((α-3)/2) dμ(y) at every x"""
        return KernelService._smoothed_1d(RIESZ, xs, mu, alpha, gamma, "riesz1d")

    @staticmethod
    def riesz1d(x: float, mu: Measure1D, alpha: float, gamma: float = 0.0) -> float:
        return float(KernelService.riesz1d_batch([x], mu, alpha, gamma)[0])

    @staticmethod
    def poisson_variant_batch(kind: int, centers, lengths, mu: Measure1D, alpha: float,
                              restricted_to=None) -> np.ndarray:
        """𝒫̈ (POISSON_REPRODUCING) or P̈ (POISSON_STANDARD) for many intervals at once"""
        centers = _as_array(centers)
        lengths = np.broadcast_to(_as_array(lengths), centers.shape).copy()
        if np.any(lengths <= 0.0):
            raise InvalidParametersError("interval lengths must be positive")
        los, his, modes = _interval_restrictions(centers.size, restricted_to)
        return KernelService.sum_1d(kind, mu, centers, 0.0, lengths, los, his, modes, alpha)

    @staticmethod
    def poisson_variant_reproducing(interval: Interval1D, mu: Measure1D, alpha: float,
                                    restricted_to: Optional[IntervalRestriction] = None) -> float:
        """𝒫̈(I, μ) = ∫ (|I| / (|I| + |x - x_I|)²)^(2-α) dμ(x)"""
        return float(KernelService.poisson_variant_batch(
            POISSON_REPRODUCING, [interval.center], [interval.length], mu, alpha, restricted_to
        )[0])

    @staticmethod
    def poisson_variant_standard(interval: Interval1D, mu: Measure1D, alpha: float,
                                 restricted_to: Optional[IntervalRestriction] = None) -> float:
        """P̈(I, μ) = ∫ |I| / (|I| + |x - x_I|)^(3-α) dμ(x)"""
        return float(KernelService.poisson_variant_batch(
            POISSON_STANDARD, [interval.center], [interval.length], mu, alpha, restricted_to
        )[0])

    @staticmethod
    def planar_sums(kind: int, mu: PlanarMeasure, x1s, x2s, scales, alpha: float,
                    restrictions: Optional[Sequence[Optional[CubeRestriction]]] = None) -> np.ndarray:
        """Batch kernel sums over all rows, each row evaluated in its own local frame"""
        x1s = _as_array(x1s)
        x2s = _as_array(x2s)
        n = x1s.size
        scales = np.broadcast_to(_as_array(scales), (n,)).copy()
        if restrictions is not None and len(restrictions) != n:
            raise InvalidParametersError(f"expected {n} restrictions, got {len(restrictions)}")
        total = np.zeros(n)
        for row in mu.rows:
            los = np.zeros(n)
            his = np.zeros(n)
            modes = np.full(n, NO_RESTRICTION, dtype=np.int64)
            active = np.ones(n, dtype=bool)
            if restrictions is not None:
                for i, item in enumerate(restrictions):
                    if item is None:
                        continue
                    if item.cube.contains_height(row.height):
                        x_lo, x_hi = item.cube.x_range
                        los[i] = x_lo - row.offset
                        his[i] = x_hi - row.offset
                        modes[i] = KEEP_INSIDE if item.keep_inside else KEEP_OUTSIDE
                    elif item.keep_inside:
                        active[i] = False
            idx = np.flatnonzero(active)
            if idx.size == 0:
                continue
            xs = x1s[idx] - row.offset
            ys = x2s[idx] - row.height
            if kind in SINGULAR_KINDS:
                KernelService._check_support(row.base, xs, ys, "planar kernel")
            total[idx] += KernelService.sum_1d(kind, row.base, xs, ys, scales[idx],
                                               los[idx], his[idx], modes[idx], alpha)
        return KernelService.check_finite(total, x1s, "planar kernel")

    @staticmethod
    def poisson2d_batch(kind: int, cubes: Sequence[Cube2D], mu: PlanarMeasure, alpha: float,
                        restrictions: Optional[Sequence[Optional[CubeRestriction]]] = None) -> np.ndarray:
        """𝒫^α or P^α for a list of cubes"""
        return KernelService.planar_sums(
            kind, mu,
            [q.cx for q in cubes], [q.cy for q in cubes], [q.side for q in cubes],
            alpha, restrictions,
        )

    @staticmethod
    def poisson2d_reproducing(cube: Cube2D, mu: PlanarMeasure, alpha: float,
                              restricted_to: Optional[CubeRestriction] = None) -> float:
        """𝒫^α(Q, μ) = ∫ (|Q|^(1/2) / (|Q|^(1/2) + |x - x_Q|)²)^(2-α) dμ(x)"""
        return float(KernelService.poisson2d_batch(POISSON_REPRODUCING, [cube], mu, alpha, [restricted_to])[0])

    @staticmethod
    def poisson2d_standard(cube: Cube2D, mu: PlanarMeasure, alpha: float,
                           restricted_to: Optional[CubeRestriction] = None) -> float:
        """P^α(Q, μ) = ∫ |Q|^(1/2) / (|Q|^(1/2) + |x - x_Q|)^(3-α) dμ(x)"""
        return float(KernelService.poisson2d_batch(POISSON_STANDARD, [cube], mu, alpha, [restricted_to])[0])

    @staticmethod
    def frac2d_batch(points, mu: PlanarMeasure, alpha: float,
                     restrictions: Optional[Sequence[Optional[CubeRestriction]]] = None) -> np.ndarray:
        """∫ |x - y|^(α-2) dμ(y) at every point (x1, x2)"""
        points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        return KernelService.planar_sums(FRAC, mu, points[:, 0], points[:, 1], 1.0, alpha, restrictions)

    @staticmethod
    def frac2d(point: tuple[float, float], mu: PlanarMeasure, alpha: float) -> float:
        return float(KernelService.frac2d_batch([point], mu, alpha)[0])

    @staticmethod
    def riesz2d_batch(m: int, points, mu: PlanarMeasure, alpha: float,
                      restrictions: Optional[Sequence[Optional[CubeRestriction]]] = None) -> np.ndarray:
        """∫ (t_m - x_m) |x - t|^(α-3) dμ(t) at every point x"""
        if m not in (1, 2):
            raise InvalidParametersError(f"riesz component must be 1 or 2, got {m}")
        points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        kind = RIESZ if m == 1 else RIESZ_VERTICAL
        return -KernelService.planar_sums(kind, mu, points[:, 0], points[:, 1], 1.0, alpha, restrictions)

    @staticmethod
    def riesz2d(m: int, point: tuple[float, float], mu: PlanarMeasure, alpha: float) -> float:
        return float(KernelService.riesz2d_batch(m, [point], mu, alpha)[0])

    @staticmethod
    def node_masses(mu: Measure1D, tree: CantorTree, k: int) -> np.ndarray:
        """μ(I_j^k) for j = 1..2^k, closed intervals"""
        if isinstance(mu, CantorWeights):
            return np.full(tree.count(k), mu.node_mass(k))
        lefts, rights = tree.intervals(k)
        lo = np.searchsorted(mu.positions, lefts, side="left")
        hi = np.searchsorted(mu.positions, rights, side="right")
        return mu.cumulative[hi] - mu.cumulative[lo]

    @staticmethod
    def maximal_alpha_batch(xs, mu: Measure1D, tree: CantorTree, alpha: float) -> np.ndarray:
        """Tree-restricted M^α μ(x) = max over I_j^k ∋ x of μ(I_j^k) / |I_j^k|^(2-α)"""
        xs = _as_array(xs)
        result = np.zeros(xs.size)
        alive = (xs >= 0.0) & (xs <= 1.0)
        for k in range(tree.depth + 1):
            lefts = tree.lefts[k]
            length = tree.length(k)
            idx = np.searchsorted(lefts, xs, side="right") - 1
            safe = np.maximum(idx, 0)
            alive &= (idx >= 0) & (xs <= lefts[safe] + length)
            if not alive.any():
                break
            values = KernelService.node_masses(mu, tree, k)[safe] / length ** (2.0 - alpha)
            result = np.where(alive, np.maximum(result, values), result)
        return result

    @staticmethod
    def maximal_alpha(x: float, mu: Measure1D, tree: CantorTree, alpha: float) -> float:
        return float(KernelService.maximal_alpha_batch([x], mu, tree, alpha)[0])

    @staticmethod
    def moments_1d(mu: Measure1D, los, his, centers) -> np.ndarray:
        """Rows of (mass, first moment, second moment) of 1_[lo, hi] μ about the given centers"""
        los = _as_array(los)
        his = _as_array(his)
        centers = _as_array(centers)
        if isinstance(mu, AtomicMeasure1D):
            if mu.size == 0:
                return np.zeros((los.size, 3))
            return quadrature.atom_moments(los, his, centers, mu.positions, mu.masses)
        tree = mu.tree
        return quadrature.cantor_moments(los, his, centers, tree.lengths, tree.half_span,
                                         mu.level, mu.variance_factor, mu.total_mass)

    @staticmethod
    def evaluate(kernel_spec: KernelSpec, target, mu, restricted_to=None) -> float:
        """Evaluate any of the supported kernels on one target point, interval or cube"""
        kind = kernel_spec.kind
        if kind == KernelKind.FRAC1D:
            return KernelService.frac1d(target, mu, kernel_spec.alpha, kernel_spec.gamma)
        if kind == KernelKind.RIESZ1D:
            return KernelService.riesz1d(target, mu, kernel_spec.alpha, kernel_spec.gamma)
        if kind == KernelKind.FRAC2D:
            return KernelService.frac2d(target, mu, kernel_spec.alpha)
        if kind == KernelKind.RIESZ2D:
            return KernelService.riesz2d(kernel_spec.component, target, mu, kernel_spec.alpha)
        if kind == KernelKind.POISSON_VARIANT_REPRODUCING:
            return KernelService.poisson_variant_reproducing(target, mu, kernel_spec.alpha, restricted_to)
        if kind == KernelKind.POISSON_VARIANT_STANDARD:
            return KernelService.poisson_variant_standard(target, mu, kernel_spec.alpha, restricted_to)
        if kind == KernelKind.POISSON2D_REPRODUCING:
            return KernelService.poisson2d_reproducing(target, mu, kernel_spec.alpha, restricted_to)
        return KernelService.poisson2d_standard(target, mu, kernel_spec.alpha, restricted_to)
