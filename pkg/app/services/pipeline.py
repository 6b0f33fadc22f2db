"""Certification pipeline: runs the selected claims and assembles the report"""
import csv
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional
import numpy as np
from pydantic import ValidationError
from app.core.exceptions import Cantor2wError, ConfigError
from app.core.logging import logger
from app.core.parallel import configure_threads
from app.models.geometry import Cube2D
from app.models.measures import AtomicMeasure1D, CantorTree, CantorWeights, PlanarMeasure
from app.schemas.schemas import (
    CLAIM_IDS, ClaimResult, ConstructionParams, GammaSearchResult, LemmaResult, Report, RunConfig,
    SweepEntry, SweepReport
)
from app.services.construction import ConstructionService
from app.services.estimators import EstimatorService
from app.services.families import FamilyService
from app.services.searches import SearchService
from app.utils.helpers import CSV_COLUMNS, admissible_b, csv_rows, relative_difference

STABILITY_RTOL = 0.15
E_SQUARED_MAX = 0.5
GAMMA_RTOL = 1e-6
INCREMENT_SPREAD = 10.0
FIT_RESIDUAL = 0.05
MAXIMAL_SPREAD = 2.0
MAXIMAL_GENERATIONS = 8
REFINEMENT_GENERATIONS = 4
REFINEMENT_RTOL = 5e-3
SWEEP_PARAMETERS = ("alpha", "b", "depth")
# kind of σ row and the prefix of its report keys
PLANAR_PAIRS = (("frac", ""), ("riesz", "riesz_"))


@dataclass
class RunContext:
    """Measures and cached search results shared by the claims of one run"""
    config: RunConfig
    params: ConstructionParams
    tree: CantorTree
    omega: CantorWeights
    _sigma: dict = field(default_factory=dict)
    _sigma_dot: dict = field(default_factory=dict)
    _lemma: Optional[LemmaResult] = None
    _gammas: dict = field(default_factory=dict)

    @property
    def alpha(self) -> float:
        return self.params.alpha

    @property
    def depths(self) -> tuple[int, int]:
        """Shallow and full σ depth of the stability comparisons"""
        return self.config.depth_sigma - 2, self.config.depth_sigma

    def sigma(self, depth: int) -> AtomicMeasure1D:
        if depth not in self._sigma:
            self._sigma[depth] = ConstructionService.sigma_atoms(self.tree, depth, "center")
        return self._sigma[depth]

    def lemma(self) -> LemmaResult:
        if self._lemma is None:
            self._lemma = SearchService.lemma_search_c(
                self.tree, self.omega, self.alpha, self.config.k_max, self.config.c_grid, seed=self.config.seed
            )
        return self._lemma

    def sigma_dot(self, depth: int) -> AtomicMeasure1D:
        if depth not in self._sigma_dot:
            self._sigma_dot[depth] = ConstructionService.sigma_atoms(self.tree, depth, "riesz", self.lemma().c)
        return self._sigma_dot[depth]

    def sigma_for(self, kind: str, depth: int) -> AtomicMeasure1D:
        return self.sigma(depth) if kind == "frac" else self.sigma_dot(depth)

    def gammas(self, kind: str) -> list[GammaSearchResult]:
        """γ_n for every target, computed once per run at the full σ depth"""
        if kind not in self._gammas:
            sigma = self.sigma_for(kind, self.config.depth_sigma)
            self._gammas[kind] = [
                SearchService.gamma_search(n, kind, sigma, self.omega, self.alpha) for n in self.config.n_targets
            ]
        return self._gammas[kind]

    def planar(self, kind: str, depth: int) -> tuple[PlanarMeasure, PlanarMeasure]:
        heights = [g.gamma for g in self.gammas(kind)]
        return ConstructionService.build_planar(
            self.params, len(heights), heights, self.omega, self.sigma_for(kind, depth)
        )


def _stability(values: dict, name: str, shallow: float, full: float, depths: tuple[int, int]) -> bool:
    values[f"{name}_depth_{depths[0]}"] = shallow
    values[f"{name}_depth_{depths[1]}"] = full
    change = relative_difference(shallow, full)
    values[f"{name}_relative_change"] = change
    return math.isfinite(full) and change <= STABILITY_RTOL


def _truncation(ctx: RunContext, sigma: AtomicMeasure1D) -> dict[str, float]:
    return {
        "sigma_tail_bound": sigma.tail_bound,
        "depth_sigma": float(sigma.depth if sigma.depth is not None else 0),
        "depth_omega": float(ctx.omega.level),
        "quadrature_tol": ctx.omega.tol,
    }


def claim_a2_1d(ctx: RunContext) -> ClaimResult:
    """Sampled Ä₂ sup is stable between depth_sigma - 2 and depth_sigma"""
    values = {}
    results = {}
    for depth in ctx.depths:
        family = FamilyService.interval_family(ctx.tree, depth, ctx.config.interval_samples, ctx.config.seed)
        results[depth] = EstimatorService.a2_variant_sup(ctx.sigma(depth), ctx.omega, family, ctx.alpha)
    shallow, full = (results[d] for d in ctx.depths)
    values["candidates"] = float(full.candidates)
    passed = _stability(values, "sup", shallow.value, full.value, ctx.depths)
    witnesses = [shallow, full]

    dots = {}
    for depth in ctx.depths:
        family = FamilyService.interval_family(ctx.tree, depth, ctx.config.interval_samples, ctx.config.seed)
        dots[depth] = EstimatorService.a2_variant_sup(ctx.sigma_dot(depth), ctx.omega, family, ctx.alpha)
    passed &= _stability(values, "sigma_dot_sup", dots[ctx.depths[0]].value, dots[ctx.depths[1]].value, ctx.depths)
    witnesses.append(dots[ctx.depths[1]])

    return ClaimResult(
        claim_id="a2-1d",
        passed=bool(passed),
        rule="relative change of the sampled Ä₂ sup between the two σ depths <= 0.15, for σ̈ and for σ̇",
        values=values,
        bounds={"sup_relative_change": STABILITY_RTOL, "sigma_dot_sup_relative_change": STABILITY_RTOL},
        witnesses=witnesses,
        lemma=ctx.lemma(),
        truncation=_truncation(ctx, ctx.sigma(ctx.depths[1])),
    )


def _planar_gammas(ctx: RunContext) -> list[GammaSearchResult]:
    return [g for kind, _ in PLANAR_PAIRS for g in ctx.gammas(kind)]


def claim_a2_2d(ctx: RunContext) -> ClaimResult:
    """𝒜₂ and dual 𝒜₂ sups over the cube family are stable in depth, for both planar pairs"""
    values = {}
    bounds = {}
    witnesses = []
    passed = True
    for kind, prefix in PLANAR_PAIRS:
        for dual, suffix in ((False, "a2"), (True, "a2_dual")):
            name = prefix + suffix
            sups = {}
            for depth in ctx.depths:
                omega, sigma = ctx.planar(kind, depth)
                family = FamilyService.cube_family(ctx.tree, sigma, depth, ctx.config.cube_samples, ctx.config.seed)
                sups[depth] = EstimatorService.a2_2d_sup(sigma, omega, family, ctx.alpha, dual=dual)
            full = sups[ctx.depths[1]]
            values[f"{name}_candidates"] = float(full.candidates)
            passed &= _stability(values, name, sups[ctx.depths[0]].value, full.value, ctx.depths)
            bounds[f"{name}_relative_change"] = STABILITY_RTOL
            witnesses.append(full)
    return ClaimResult(
        claim_id="a2-2d",
        passed=bool(passed),
        rule=("relative change of the sampled 𝒜₂ and dual 𝒜₂ sups between the two σ depths <= 0.15, "
              "on the σ̈ rows and on the σ̇ rows"),
        values=values,
        bounds=bounds,
        witnesses=witnesses,
        gammas=_planar_gammas(ctx),
        lemma=ctx.lemma(),
        truncation=_truncation(ctx, ctx.sigma(ctx.depths[1])),
    )


def _energy_checks(values: dict, name: str, result) -> bool:
    values[f"{name}_max_e_squared"] = result.notes["max_e_squared"]
    values[f"{name}_means_inside"] = result.notes["means_inside"]
    return result.notes["max_e_squared"] <= E_SQUARED_MAX and result.notes["means_inside"] == 1.0


def claim_energy_1d(ctx: RunContext) -> ClaimResult:
    """Forward and dual Ë stable in depth, with the pivotal and maximal-function checks"""
    values = {}
    witnesses = []
    passed = True
    for direction in ("forward", "dual"):
        sups = {}
        for depth in ctx.depths:
            family = FamilyService.energy_family_1d(ctx.tree, depth, ctx.config.energy_samples, ctx.config.seed)
            sups[depth] = EstimatorService.energy_sup(
                ctx.sigma(depth), ctx.omega, ctx.alpha, direction, "1d-variant", family
            )
        full = sups[ctx.depths[1]]
        values[f"{direction}_candidates"] = float(full.candidates)
        passed &= _stability(values, direction, sups[ctx.depths[0]].value, full.value, ctx.depths)
        passed &= _energy_checks(values, direction, full)
        if direction == "forward":
            values["pivotal_max"] = full.notes["pivotal_max"]
        witnesses.append(full)

    full_depth = ctx.depths[1]
    single = EstimatorService.dual_single_piece(ctx.tree, full_depth, ctx.sigma(full_depth), ctx.omega, ctx.alpha)
    values["dual_single_piece_max"] = float(single.max())

    sigma = ctx.sigma(full_depth)
    integral, mass = EstimatorService.maximal_square_integral(ctx.tree, 0, 1, sigma, ctx.omega, ctx.alpha)
    root = integral / mass
    values["maximal_root_ratio"] = root
    ratios = []
    for level in range(1, min(MAXIMAL_GENERATIONS, full_depth - 1, ctx.omega.level) + 1):
        integral, mass = EstimatorService.maximal_square_integral(ctx.tree, level, 1, sigma, ctx.omega, ctx.alpha)
        ratio = integral / mass if mass > 0.0 else 0.0
        values[f"maximal_ratio_level_{level}"] = ratio
        ratios.append(ratio)
    maximal_ok = all(root / MAXIMAL_SPREAD <= r <= MAXIMAL_SPREAD * root for r in ratios)
    values["maximal_within_spread"] = float(maximal_ok)

    return ClaimResult(
        claim_id="energy-1d",
        passed=bool(passed and maximal_ok),
        rule=("forward and dual Ë sups change by <= 0.15 between depths, every E² <= 1/2, every mean inside "
              "its piece, and ∫(M^α 1_I σ̈)² dω̈ / σ̈(I) within a factor 2 of the root value"),
        values=values,
        bounds={
            "forward_relative_change": STABILITY_RTOL,
            "dual_relative_change": STABILITY_RTOL,
            "forward_max_e_squared": E_SQUARED_MAX,
            "dual_max_e_squared": E_SQUARED_MAX,
            "maximal_spread": MAXIMAL_SPREAD,
        },
        witnesses=witnesses,
        truncation=_truncation(ctx, sigma),
    )


def claim_energy_2d(ctx: RunContext) -> ClaimResult:
    """Forward and dual ℰ₂ over cube partitions stable in depth, for both planar pairs"""
    values = {}
    bounds = {}
    witnesses = []
    passed = True
    for kind, prefix in PLANAR_PAIRS:
        for direction in ("forward", "dual"):
            name = prefix + direction
            sups = {}
            for depth in ctx.depths:
                omega, sigma = ctx.planar(kind, depth)
                family = FamilyService.energy_family_2d(ctx.tree, sigma, depth, ctx.config.energy_samples,
                                                        ctx.config.seed)
                sups[depth] = EstimatorService.energy_sup(sigma, omega, ctx.alpha, direction, "2d", family)
            full = sups[ctx.depths[1]]
            values[f"{name}_candidates"] = float(full.candidates)
            passed &= _stability(values, name, sups[ctx.depths[0]].value, full.value, ctx.depths)
            passed &= _energy_checks(values, name, full)
            bounds[f"{name}_relative_change"] = STABILITY_RTOL
            bounds[f"{name}_max_e_squared"] = E_SQUARED_MAX
            witnesses.append(full)
    return ClaimResult(
        claim_id="energy-2d",
        passed=bool(passed),
        rule=("forward and dual ℰ₂ sups change by <= 0.15 between depths, every E² <= 1/2, every mean inside "
              "its piece, on the σ̈ rows and on the σ̇ rows"),
        values=values,
        bounds=bounds,
        witnesses=witnesses,
        gammas=_planar_gammas(ctx),
        lemma=ctx.lemma(),
        truncation=_truncation(ctx, ctx.sigma(ctx.depths[1])),
    )


def _curve_checks(values: dict, curve, strict_lower: bool) -> bool:
    increments = np.array(curve.increments)
    total = curve.points[-1].value
    values[f"{curve.kind}_S_K"] = total
    values[f"{curve.kind}_slope"] = curve.slope
    values[f"{curve.kind}_min_increment"] = float(increments.min())
    values[f"{curve.kind}_max_increment"] = float(increments.max())
    values[f"{curve.kind}_max_residual"] = curve.max_residual
    values[f"{curve.kind}_k0_term"] = curve.k0_term
    ok = bool(increments.min() > 0.0)
    ok &= increments.max() <= INCREMENT_SPREAD * increments.min()
    ok &= curve.max_residual <= FIT_RESIDUAL * total
    ok &= curve.slope > 0.0
    if strict_lower:
        ok &= increments.min() >= curve.lower_bound_per_generation
    return bool(ok)


def claim_testing_divergence(ctx: RunContext) -> ClaimResult:
    """Testing partial sums grow linearly for both the fractional and the Riesz placement"""
    K = ctx.config.testing_k
    values = {}
    frac = EstimatorService.testing_partial_sum(K, "frac", ctx.tree, ctx.omega, ctx.alpha)
    passed = _curve_checks(values, frac, strict_lower=True)

    deep_level = min(ctx.omega.level + REFINEMENT_GENERATIONS, ConstructionService.max_resolved_depth(ctx.params))
    values["frac_deep_omega_level"] = float(deep_level)
    if deep_level > ctx.omega.level:
        deep_tree = ConstructionService.build_tree(ctx.params, deep_level)
        deep = ConstructionService.cantor_weights(deep_tree, level=deep_level, tol=ctx.omega.tol)
        deep_terms = EstimatorService.generation_terms(K, "frac", deep_tree, deep, ctx.alpha)
        values["frac_S_K_deep_omega"] = float(deep_terms[1:].sum())
        change = relative_difference(values["frac_S_K_deep_omega"], values["frac_S_K"])
        values["frac_deep_relative_change"] = change
        passed &= change <= REFINEMENT_RTOL
    else:
        logger.warning(f"ω cannot be refined past generation {ctx.omega.level}; deeper cross-check skipped")

    lemma = ctx.lemma()
    riesz = EstimatorService.testing_partial_sum(K, "riesz", ctx.tree, ctx.omega, ctx.alpha,
                                                 c=lemma.c, lower_bound=lemma.c1 ** 2)
    passed &= _curve_checks(values, riesz, strict_lower=False)

    return ClaimResult(
        claim_id="testing-divergence",
        passed=bool(passed),
        rule=("positive per-generation increments within a factor 10 of each other, line-fit residual <= 5% of "
              "S(K), positive slope, fractional increments >= 4^(2-α), fractional S(K) within 0.5% of its value "
              "against ω̈ resolved four generations deeper"),
        values=values,
        bounds={
            "increment_spread": INCREMENT_SPREAD,
            "fit_residual_fraction": FIT_RESIDUAL,
            "frac_lower_bound_per_generation": frac.lower_bound_per_generation,
            "frac_deep_relative_change": REFINEMENT_RTOL,
        },
        curves=[frac, riesz],
        lemma=lemma,
        truncation={"depth_omega": float(ctx.omega.level), "testing_k": float(K), "quadrature_tol": ctx.omega.tol},
    )


def claim_lemma_c(ctx: RunContext) -> ClaimResult:
    """A grid constant c with bounded normalized Riesz values and ordered extremes"""
    lemma = ctx.lemma()
    return ClaimResult(
        claim_id="lemma-c",
        passed=lemma.extremes_ordered and lemma.c1 > 0.0,
        rule="C1 > 0, C2/C1 <= 1000 over k <= k_max and R̈ω̈(ż_1^k) <= R̈ω̈(ż_{2^k}^k) for every k",
        values={
            "c": lemma.c, "c1": lemma.c1, "c2": lemma.c2, "ratio": lemma.c2 / lemma.c1,
            "interior_fraction_ordered": lemma.interior_fraction_ordered,
        },
        bounds={"ratio": 1e3},
        lemma=lemma,
        truncation={"depth_omega": float(ctx.omega.level), "k_max": float(lemma.k_max)},
    )


def _offtest_claim(ctx: RunContext, kind: str) -> ClaimResult:
    gammas = ctx.gammas(kind)
    omega, sigma = ctx.planar(kind, ctx.config.depth_sigma)
    values = {}
    passed = True
    for i, result in enumerate(gammas):
        cube = Cube2D(cx=omega.rows[i].offset + 0.5, cy=-0.5, side=1.0)
        quotient = EstimatorService.offtest_quotient(cube, kind, sigma, omega, ctx.alpha, m=1)
        n = result.target
        values[f"gamma_n={n:g}"] = result.gamma
        values[f"quotient_n={n:g}"] = quotient
        values[f"relative_error_n={n:g}"] = result.relative_error
        passed &= result.relative_error <= GAMMA_RTOL and quotient >= n
    heights = [g.gamma for g in gammas]
    decreasing = all(a > b for a, b in zip(heights, heights[1:]))
    values["gammas_decreasing"] = float(decreasing)
    label = "fractional" if kind == "frac" else "Riesz (m=1)"
    return ClaimResult(
        claim_id=f"offtest-{kind}",
        passed=bool(passed and decreasing),
        rule=f"{label} off-testing: |F(γ_n) - n|/n <= 1e-6, quotient on Q_n >= n, γ_n strictly decreasing",
        values=values,
        bounds={"gamma_relative_error": GAMMA_RTOL},
        gammas=gammas,
        lemma=ctx.lemma() if kind == "riesz" else None,
        truncation=_truncation(ctx, ctx.sigma_for(kind, ctx.config.depth_sigma)),
    )


def claim_offtest_frac(ctx: RunContext) -> ClaimResult:
    return _offtest_claim(ctx, "frac")


def claim_offtest_riesz(ctx: RunContext) -> ClaimResult:
    return _offtest_claim(ctx, "riesz")


CLAIM_RUNNERS: dict[str, Callable[[RunContext], ClaimResult]] = {
    "a2-1d": claim_a2_1d,
    "a2-2d": claim_a2_2d,
    "energy-1d": claim_energy_1d,
    "energy-2d": claim_energy_2d,
    "testing-divergence": claim_testing_divergence,
    "lemma-c": claim_lemma_c,
    "offtest-frac": claim_offtest_frac,
    "offtest-riesz": claim_offtest_riesz,
}


class PipelineService:
    """Service for verification runs"""

    @staticmethod
    def make_config(**fields) -> RunConfig:
        """Validate a run configuration"""
        try:
            return RunConfig(**{k: v for k, v in fields.items() if v is not None})
        except ValidationError as e:
            messages = "; ".join(err["msg"] for err in e.errors())
            logger.error(f"Invalid run configuration: {messages}")
            raise ConfigError(messages)

    @staticmethod
    def build_context(config: RunConfig) -> RunContext:
        """Parameters, tree and ω̈ for one run"""
        params = ConstructionService.make_params(config.alpha, config.b, config.depth_omega, config.depth_sigma)
        tree = ConstructionService.build_tree(params, max(config.depth_omega, config.depth_sigma))
        omega = ConstructionService.cantor_weights(tree, level=config.depth_omega, tol=config.quadrature_tol)
        logger.info(
            f"Run alpha={params.alpha} b={params.b:.6g} s0={params.s0:.6g} "
            f"depths omega={config.depth_omega} sigma={config.depth_sigma}"
        )
        return RunContext(config=config, params=params, tree=tree, omega=omega)

    @staticmethod
    def run(config: RunConfig) -> Report:
        """Run the selected claims in claim-id order"""
        configure_threads(config.threads)
        ctx = PipelineService.build_context(config)
        claims = []
        timings = {}
        for claim_id in CLAIM_IDS:
            if claim_id not in config.claims:
                continue
            start = time.perf_counter()
            result = CLAIM_RUNNERS[claim_id](ctx)
            timings[claim_id] = time.perf_counter() - start
            logger.info(f"Claim {claim_id}: {'pass' if result.passed else 'FAIL'} ({timings[claim_id]:.1f}s)")
            claims.append(result)
        return Report(
            config=config,
            params=ctx.params,
            claims=claims,
            passed=all(c.passed for c in claims),
            timings=timings if config.timings else None,
        )

    @staticmethod
    def write_report(report, out: Optional[str], fmt: str = "json") -> Optional[Path]:
        """Write a report or sweep report as JSON or fixed-column CSV"""
        if out is None:
            return None
        target = Path(out)
        if target.parent and not target.parent.exists():
            target.parent.mkdir(parents=True, exist_ok=True)
        if fmt == "json":
            target.write_text(report.model_dump_json(indent=2))
        else:
            reports = report.reports if isinstance(report, SweepReport) else [report]
            with target.open("w", newline="") as handle:
                writer = csv.DictWriter(handle, fieldnames=CSV_COLUMNS)
                writer.writeheader()
                for item in reports:
                    for claim in item.claims:
                        writer.writerows(csv_rows(claim.claim_id, claim.values, claim.bounds, claim.passed))
        logger.info(f"Report written: {target}")
        return target

    @staticmethod
    def sweep(config: RunConfig, parameter: str, values: list[float]) -> SweepReport:
        """One run per value; failures are recorded and the sweep continues"""
        if parameter not in SWEEP_PARAMETERS:
            raise ConfigError(f"unknown sweep parameter {parameter!r}")
        if not values:
            raise ConfigError("sweep needs at least one value")
        entries = []
        reports = []
        for value in values:
            if parameter == "alpha":
                update = {"alpha": value, "b": None}
            elif parameter == "b":
                update = {"b": value}
            else:
                update = {"depth_sigma": int(value), "testing_k": min(config.testing_k, int(value))}
            try:
                run_config = PipelineService.make_config(**{**config.model_dump(), **update})
                report = PipelineService.run(run_config)
                reports.append(report)
                constants = {
                    f"{claim.claim_id}:{name}": v for claim in report.claims for name, v in claim.values.items()
                }
                entries.append(SweepEntry(
                    parameter=parameter, value=value, alpha=report.params.alpha, b=report.params.b,
                    s0=report.params.s0, passed=report.passed, constants=constants,
                ))
            except Cantor2wError as e:
                logger.warning(f"Sweep {parameter}={value} failed: {e.describe()}")
                alpha = value if parameter == "alpha" else config.alpha
                b = value if parameter == "b" else config.b
                s0 = None
                if 0.0 <= alpha < 2.0:
                    b = admissible_b(alpha) if b is None else b
                    try:
                        s0 = ConstructionService.derive_s0(alpha, b)
                    except Cantor2wError:
                        pass
                entries.append(SweepEntry(
                    parameter=parameter, value=value, alpha=alpha, b=b, s0=s0,
                    passed=False, error=e.describe(),
                ))
        return SweepReport(
            parameter=parameter,
            entries=entries,
            reports=reports,
            passed=all(entry.passed for entry in entries),
        )
