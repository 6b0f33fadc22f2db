"""The two searches the construction needs: the Riesz placement constant c and the heights γ_n"""
import math
from typing import Sequence
import numpy as np
from app.core.exceptions import InfeasibleTargetError, InvalidParametersError, NoAdmissibleCError
from app.core.logging import logger
from app.models.measures import AtomicMeasure1D, CantorTree, CantorWeights
from app.schemas.schemas import GammaSearchResult, LemmaResult, LemmaRow
from app.services.estimators import EstimatorService
from app.services.kernels import KernelService
from app.services.families import FamilyService

GAMMA_TOP_EXPONENT = 3.0
GAMMA_GRID_STEP = 0.25
GAMMA_FLOOR_FACTOR = 1e-6
FEASIBILITY_MARGIN = 0.9
GAMMA_RTOL = 1e-7
MAX_BISECTIONS = 200
LEMMA_MAX_RATIO = 1e3
INTERIOR_SAMPLES = 16


class SearchService:
    """Service for the lemma constant and the off-testing heights"""

    @staticmethod
    def _lemma_values(tree: CantorTree, omega: CantorWeights, alpha: float, c: float, k: int,
                      js: np.ndarray) -> np.ndarray:
        # R̈ω̈(ż_j^k) / (s0/2)^k for 0-based indices js
        points = EstimatorService.testing_points(tree, k, "riesz", c)[js]
        scale = (tree.params.s0 / 2.0) ** k
        return KernelService.riesz1d_batch(points, omega, alpha) / scale

    @staticmethod
    def lemma_search_c(tree: CantorTree, omega: CantorWeights, alpha: float, k_max: int,
                       grid: Sequence[float], max_ratio: float = LEMMA_MAX_RATIO, seed: int = 0) -> LemmaResult:
        """Grid point c whose normalized Riesz values at ż_1^k and ż_{2^k}^k stay in [C1, C2] with C2/C1 smallest"""
        if k_max > omega.level - 4:
            raise InvalidParametersError(
                f"k_max={k_max} needs ω resolved four generations deeper (level {omega.level})"
            )
        if k_max > tree.depth:
            raise InvalidParametersError(f"k_max={k_max} exceeds tree depth {tree.depth}")
        if not grid:
            raise InvalidParametersError("c grid is empty")

        rows = []
        best = None
        for c in grid:
            if not 0.0 < c < 1.0:
                raise InvalidParametersError(f"c must lie in (0, 1), got {c}")
            firsts = np.empty(k_max)
            lasts = np.empty(k_max)
            for k in range(1, k_max + 1):
                values = SearchService._lemma_values(tree, omega, alpha, c, k, np.array([0, (1 << k) - 1]))
                firsts[k - 1], lasts[k - 1] = values
            both = np.concatenate((firsts, lasts))
            c1, c2 = float(both.min()), float(both.max())
            admissible = c1 > 0.0 and c2 / c1 <= max_ratio
            rows.append(LemmaRow(c=float(c), c1=c1, c2=c2, admissible=admissible))
            logger.debug(f"lemma c={c}: C1={c1:.6g} C2={c2:.6g} admissible={admissible}")
            if admissible and (best is None or c2 / c1 < best[2] / best[1]):
                ordered = bool(np.all(firsts <= lasts * (1.0 + 1e-12)))
                best = (float(c), c1, c2, ordered)

        if best is None:
            logger.warning(f"No admissible c on grid {list(grid)} for k_max={k_max}")
            raise NoAdmissibleCError(f"no c on the grid keeps C2/C1 <= {max_ratio:g} for k <= {k_max}")

        c, c1, c2, ordered = best
        checked = 0
        held = 0
        for k in range(2, k_max + 1):
            rng = np.random.default_rng([seed, 31, k])
            js = FamilyService.sample_indices(1 << k, INTERIOR_SAMPLES + 2, rng)
            values = SearchService._lemma_values(tree, omega, alpha, c, k, js)
            interior = values[1:-1]
            checked += interior.size
            held += int(np.sum((values[0] <= interior) & (interior <= values[-1])))
        fraction = held / checked if checked else 1.0
        logger.info(f"Lemma constant c={c} with C1={c1:.6g}, C2={c2:.6g}, interior ordering {fraction:.3f}")
        return LemmaResult(
            c=c, c1=c1, c2=c2, k_max=k_max, extremes_ordered=ordered,
            interior_fraction_ordered=fraction, grid=rows,
        )

    @staticmethod
    def smoothed_functional(gamma: float, kind: str, sigma: AtomicMeasure1D, omega: CantorWeights,
                            alpha: float) -> float:
        """F(γ) = Σ_i s_i (K_γ ω̈(x_i))² over the σ atoms"""
        if kind == "frac":
            values = KernelService.frac1d_batch(sigma.positions, omega, alpha, gamma)
        elif kind == "riesz":
            values = KernelService.riesz1d_batch(sigma.positions, omega, alpha, gamma)
        else:
            raise InvalidParametersError(f"unknown kind {kind!r}")
        return float(np.sum(sigma.masses * values ** 2))

    @staticmethod
    def gamma_grid(floor: float) -> list[float]:
        """10^3, 10^2.75, ... down to the floor, exactly 1.0 included"""
        grid = []
        i = 0
        while True:
            gamma = 10.0 ** (GAMMA_TOP_EXPONENT - GAMMA_GRID_STEP * i)
            if gamma < floor:
                return grid
            grid.append(gamma)
            i += 1

    @staticmethod
    def gamma_search(n_target: float, kind: str, sigma: AtomicMeasure1D, omega: CantorWeights,
                     alpha: float) -> GammaSearchResult:
        """Height γ with F(γ) = n_target, approached from the side where F(γ) >= n_target"""
        if not n_target > 0.0:
            raise InvalidParametersError(f"target must be positive, got {n_target}")
        depth = sigma.depth if sigma.depth is not None else omega.tree.depth
        floor = GAMMA_FLOOR_FACTOR * omega.tree.length(min(depth, omega.tree.depth))

        def F(gamma: float) -> float:
            return SearchService.smoothed_functional(gamma, kind, sigma, omega, alpha)

        limit = F(floor)
        if n_target > FEASIBILITY_MARGIN * limit:
            logger.warning(f"Target {n_target} exceeds {FEASIBILITY_MARGIN} x F({floor:.3g}) = {limit:.6g}")
            raise InfeasibleTargetError(
                f"target {n_target} is not reachable: F(γ) <= {limit:.6g} at depth {depth} ({kind})"
            )

        lo, hi = None, None
        f_lo = limit
        previous = None
        for gamma in SearchService.gamma_grid(floor):
            value = F(gamma)
            if value == n_target:
                logger.info(f"γ search ({kind}) n={n_target}: grid point γ={gamma:.6g}")
                return GammaSearchResult(target=n_target, kind=kind, gamma=gamma, value=value, relative_error=0.0,
                                         iterations=0, bracket=[gamma, gamma])
            if value > n_target:
                if previous is None:
                    logger.warning(f"Target {n_target} lies below F({gamma:.3g}) = {value:.6g}")
                    raise InfeasibleTargetError(
                        f"target {n_target} needs a height above the grid top {gamma:.3g} ({kind})",
                        hint="raise --n-targets",
                    )
                lo, f_lo = gamma, value
                hi = previous
                break
            previous = gamma
        if lo is None:
            lo, f_lo, hi = floor, limit, previous if previous is not None else floor

        # invariant: F(lo) >= n_target > F(hi)
        iterations = 0
        while (f_lo - n_target) / n_target > GAMMA_RTOL and iterations < MAX_BISECTIONS:
            if hi <= lo or hi - lo <= 4.0 * math.ulp(hi):
                break
            mid = math.sqrt(lo * hi)
            if not lo < mid < hi:
                mid = 0.5 * (lo + hi)
            value = F(mid)
            iterations += 1
            if value >= n_target:
                lo, f_lo = mid, value
            else:
                hi = mid
        relative = abs(f_lo - n_target) / n_target
        logger.info(
            f"γ search ({kind}) n={n_target}: γ={lo:.9g}, F={f_lo:.9g}, rel={relative:.2e}, {iterations} steps"
        )
        return GammaSearchResult(target=n_target, kind=kind, gamma=lo, value=f_lo, relative_error=relative,
                                 iterations=iterations, bracket=[lo, hi])
