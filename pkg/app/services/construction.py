"""Construction of the Cantor tree and of the 1-d and planar measures"""
from pathlib import Path
from typing import Optional
import numpy as np
from pydantic import ValidationError
from app.core.config import settings
from app.core.exceptions import (
    DepthOverflowError, InvalidHeightError, InvalidParametersError
)
from app.core.logging import logger
from app.models.measures import (
    AtomicMeasure1D, CantorTree, CantorWeights, Measure1D, PlanarMeasure, PlanarRow, Provenance
)
from app.schemas.schemas import (
    ConstructionParams, GenerationSummary, MeasureSnapshot, SnapshotAtom, SnapshotRow,
    WINDOW_RTOL, window_holds
)
from app.services import quadrature
from app.utils.helpers import admissible_b, geometric_tail, row_gap

MAX_TREE_DEPTH = 24
# smallest gap b|I^k| the tree may carry, in units of the spacing of doubles near 1
RESOLUTION_ULPS = 16

PLACEMENTS = {
    "center": Provenance.SIGMA_CENTER,
    "riesz": Provenance.SIGMA_RIESZ,
}


class ConstructionService:
    """Service for building the measures"""

    @staticmethod
    def make_params(alpha: float, b: Optional[float] = None, depth_omega: Optional[int] = None,
                    depth_sigma: Optional[int] = None, riesz_c: Optional[float] = None) -> ConstructionParams:
        """Validate the global dial; b defaults to the smallest admissible value"""
        if b is None:
            b = admissible_b(alpha) if 0.0 <= alpha < 2.0 else 1.0 / 3.0
        try:
            return ConstructionParams(
                alpha=alpha,
                b=b,
                depth_omega=depth_omega if depth_omega is not None else settings.DEFAULT_DEPTH_OMEGA,
                depth_sigma=depth_sigma if depth_sigma is not None else settings.DEFAULT_DEPTH_SIGMA,
                riesz_c=riesz_c,
            )
        except ValidationError as e:
            messages = "; ".join(err["msg"] for err in e.errors())
            logger.error(f"Rejected construction parameters alpha={alpha}, b={b}: {messages}")
            raise InvalidParametersError(messages)

    @staticmethod
    def derive_s0(alpha: float, b: float) -> float:
        """s0 = ((1-b)/2)^(alpha-2)"""
        if not 0.0 <= alpha < 2.0 or not b < 1.0 or not window_holds(alpha, b):
            raise InvalidParametersError(
                f"alpha={alpha}, b={b} is outside the window 1/9 <= ((1-b)/2)^(2-alpha) <= 1/3"
            )
        if b < (1.0 / 3.0) * (1.0 - WINDOW_RTOL):
            raise InvalidParametersError(f"b must be at least 1/3, got {b}")
        return ((1.0 - b) / 2.0) ** (alpha - 2.0)

    @staticmethod
    def max_resolved_depth(params: ConstructionParams) -> int:
        """Deepest generation whose gaps still span RESOLUTION_ULPS doubles"""
        floor = RESOLUTION_ULPS * np.finfo(np.float64).eps
        depth = 0
        while depth < MAX_TREE_DEPTH and params.b * params.ratio ** (depth + 1) >= floor:
            depth += 1
        return depth

    @staticmethod
    def build_tree(params: ConstructionParams, depth: int) -> CantorTree:
        """Generations 0..depth of the middle-b construction on [0, 1]"""
        if depth < 0 or depth > MAX_TREE_DEPTH:
            raise InvalidParametersError(f"tree depth must lie in [0, {MAX_TREE_DEPTH}], got {depth}")
        resolved = ConstructionService.max_resolved_depth(params)
        if depth > resolved:
            logger.error(f"Tree depth {depth} is below float resolution for alpha={params.alpha}, b={params.b:.6g}")
            raise DepthOverflowError(
                f"generation {depth} gaps are below float resolution at alpha={params.alpha}, b={params.b:.6g}; "
                f"deepest resolved generation is {resolved}",
                hint=f"lower the depths to at most {resolved}",
            )
        half_span = (1.0 + params.b) * 0.5
        # same products as CantorTree.gaps and the compiled traversal, so endpoints agree bit for bit
        lefts = [np.zeros(1)]
        for k in range(depth):
            parent = lefts[-1]
            children = np.empty(2 * parent.size)
            children[0::2] = parent
            children[1::2] = parent + params.ratio ** k * half_span
            children.setflags(write=False)
            lefts.append(children)
        lefts[0].setflags(write=False)
        logger.debug(f"Built Cantor tree b={params.b:.6g} depth={depth}")
        return CantorTree(params=params, depth=depth, lefts=tuple(lefts))

    @staticmethod
    def cantor_weights(tree: CantorTree, level: Optional[int] = None, tol: Optional[float] = None) -> CantorWeights:
        """ω̈ on the tree, integrated through its generation-level approximation"""
        return CantorWeights(
            tree=tree,
            level=tree.depth if level is None else level,
            tol=settings.QUADRATURE_TOL if tol is None else tol,
        )

    @staticmethod
    def sigma_atoms(tree: CantorTree, depth: int, placement: str = "center",
                    c: Optional[float] = None) -> AtomicMeasure1D:
        """σ̈ (centers) or σ̇ (riesz) truncated after generation depth"""
        if depth > tree.depth:
            raise DepthOverflowError(f"sigma depth {depth} exceeds tree depth {tree.depth}")
        if depth < 0:
            raise InvalidParametersError(f"sigma depth must be nonnegative, got {depth}")
        if placement not in PLACEMENTS:
            raise InvalidParametersError(f"unknown placement {placement!r}")
        params = tree.params
        if placement == "riesz":
            c = params.riesz_c if c is None else c
            if c is None or not 0.0 < c < 1.0:
                raise InvalidParametersError(f"riesz placement needs c in (0, 1), got {c}")

        positions = []
        masses = []
        for k in range(depth + 1):
            if placement == "center":
                points = tree.centers(k)
            else:
                left_ends, right_ends = tree.gaps(k)
                points = left_ends + c * params.b * tree.length(k)
                if not np.all((points > left_ends) & (points < right_ends)):
                    logger.error(f"Riesz atoms of generation {k} collapse onto their gap ends for c={c}")
                    raise DepthOverflowError(
                        f"c={c} places generation-{k} atoms on the gap ends in floating point",
                        hint="lower --depth-sigma or move c away from 0 and 1",
                    )
            positions.append(points)
            masses.append(np.full(points.size, params.sigma_ratio ** k))
        measure = AtomicMeasure1D(
            np.concatenate(positions),
            np.concatenate(masses),
            provenance=PLACEMENTS[placement],
            depth=depth,
            tail_bound=ConstructionService.sigma_tail_bound(params, depth),
        )
        logger.info(
            f"Built sigma ({placement}) depth={depth}: {measure.size} atoms, mass={measure.total_mass:.12g}"
        )
        return measure

    @staticmethod
    def sigma_tail_bound(params: ConstructionParams, depth: int) -> float:
        """Mass of σ̈ beyond generation depth: Σ_{k > depth} (4/s0²)^k"""
        return geometric_tail(4.0 / params.s0 ** 2, depth + 1)

    @staticmethod
    def sigma_node_mass(params: ConstructionParams, level: int, depth: int) -> float:
        """Closed form of σ̈(I_r^level) truncated at depth: 2^-level Σ_{k=level}^{depth} (4/s0²)^k"""
        q = 4.0 / params.s0 ** 2
        return 0.5 ** level * sum(q ** k for k in range(level, depth + 1))

    @staticmethod
    def sigma_total_mass(params: ConstructionParams) -> float:
        """Untruncated mass s0²/(s0² - 4)"""
        return params.s0 ** 2 / (params.s0 ** 2 - 4.0)

    @staticmethod
    def node_mass(measure: Measure1D, left: float, right: float) -> float:
        """Mass of the closed interval [left, right]"""
        if not left < right:
            raise InvalidParametersError(f"interval ({left}, {right}) is not well formed")
        if isinstance(measure, AtomicMeasure1D):
            lo = np.searchsorted(measure.positions, left, side="left")
            hi = np.searchsorted(measure.positions, right, side="right")
            return float(measure.cumulative[hi] - measure.cumulative[lo])
        node = measure.tree.node_of(left, right)
        if node is not None:
            return measure.node_mass(node[0])
        tree = measure.tree
        moments = quadrature.cantor_moments(
            np.array([float(left)]), np.array([float(right)]), np.array([0.5 * (left + right)]),
            tree.lengths, tree.half_span, measure.level, measure.variance_factor, measure.total_mass,
        )
        return float(moments[0, 0])

    @staticmethod
    def build_planar(params: ConstructionParams, n_rows: int, heights: list[float], omega_base: Measure1D,
                     sigma_base: Measure1D) -> tuple[PlanarMeasure, PlanarMeasure]:
        """Rows of ω on [a_n, a_n+1] x {0} and of σ on [a_n, a_n+1] x {γ_n}"""
        if n_rows < 1:
            raise InvalidParametersError(f"need at least one row, got {n_rows}")
        if len(heights) != n_rows:
            raise InvalidParametersError(f"expected {n_rows} heights, got {len(heights)}")
        for n, height in enumerate(heights):
            if not height > 0.0:
                raise InvalidHeightError(f"row {n} height must be positive, got {height}")

        offsets = [0.0]
        separations = []
        for n in range(n_rows - 1):
            k_n = row_gap(n, params.alpha)
            separations.append(k_n)
            offsets.append(offsets[-1] + 1.0 + k_n)

        omega = PlanarMeasure(
            rows=tuple(PlanarRow(offset=a, height=0.0, base=omega_base) for a in offsets),
            separations=tuple(separations),
        )
        sigma = PlanarMeasure(
            rows=tuple(PlanarRow(offset=a, height=float(h), base=sigma_base) for a, h in zip(offsets, heights)),
            separations=tuple(separations),
        )
        logger.info(f"Built planar pair with {n_rows} rows, last offset a={offsets[-1]:.6g}")
        return omega, sigma

    @staticmethod
    def snapshot(params: ConstructionParams, tree: CantorTree, sigma: AtomicMeasure1D,
                 rows: Optional[PlanarMeasure] = None) -> MeasureSnapshot:
        """Serializable record of the parameters, the tree summary, σ and the row layout"""
        placement = "riesz" if sigma.provenance == Provenance.SIGMA_RIESZ else "center"
        return MeasureSnapshot(
            params=params,
            placement=placement,
            depth=sigma.depth if sigma.depth is not None else tree.depth,
            generations=[
                GenerationSummary(k=k, count=tree.count(k), length=tree.length(k), first_center=tree.center(k, 1))
                for k in range(tree.depth + 1)
            ],
            atoms=[SnapshotAtom(x=float(x), mass=float(m)) for x, m in zip(sigma.positions, sigma.masses)],
            rows=[] if rows is None else [SnapshotRow(a_n=r.offset, height=r.height) for r in rows.rows],
            tail_bound=sigma.tail_bound,
        )

    @staticmethod
    def save_snapshot(snapshot: MeasureSnapshot, path: str) -> Path:
        """Write a snapshot as JSON"""
        target = Path(path)
        if target.parent and not target.parent.exists():
            target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(snapshot.model_dump_json(indent=2))
        logger.info(f"Snapshot written: {target} ({len(snapshot.atoms)} atoms)")
        return target

    @staticmethod
    def load_snapshot(path: str) -> tuple[MeasureSnapshot, AtomicMeasure1D]:
        """Read a snapshot back and rebuild its σ measure"""
        try:
            snapshot = MeasureSnapshot.model_validate_json(Path(path).read_text())
        except ValidationError as e:
            logger.error(f"Invalid snapshot {path}: {str(e)}")
            raise InvalidParametersError(f"invalid snapshot {path}")
        provenance = PLACEMENTS.get(snapshot.placement, Provenance.CUSTOM)
        sigma = AtomicMeasure1D(
            np.array([a.x for a in snapshot.atoms]),
            np.array([a.mass for a in snapshot.atoms]),
            provenance=provenance,
            depth=snapshot.depth,
            tail_bound=snapshot.tail_bound,
        )
        return snapshot, sigma
