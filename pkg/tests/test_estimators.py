import math
import numpy as np
import pytest
from app.core.exceptions import InvalidParametersError, OverlappingPartitionError, ZeroOmegaMassError
from app.models.geometry import Cube2D, Interval1D
from app.models.measures import AtomicMeasure1D
from app.services.construction import ConstructionService
from app.services.estimators import EstimatorService
from app.services.families import INTERVAL_CLASSES, FamilyService


def test_a2_variant_sup(tree, omega, sigma):
    """Test the sampled Ä₂ sup is finite and attained by a family member"""
    family = FamilyService.interval_family(tree, sigma.depth, 16, seed=2)
    result = EstimatorService.a2_variant_sup(sigma, omega, family, 0.0)
    assert math.isfinite(result.value) and result.value > 0.0
    assert result.candidates == family.size
    assert result.witness.family_class in INTERVAL_CLASSES
    assert result.depth_sigma == sigma.depth
    assert result.tail_bound == pytest.approx(sigma.tail_bound)
    root = EstimatorService.a2_variant_product(Interval1D(0.5, 1.0), sigma, omega, 0.0)
    assert result.value >= root


def test_a2_2d_sup(params, tree, omega, sigma):
    """Test forward and dual 𝒜₂ sups over a two-row pair"""
    omega_rows, sigma_rows = ConstructionService.build_planar(params, 2, [0.5, 0.25], omega, sigma)
    family = FamilyService.cube_family(tree, sigma_rows, 5, 4, seed=1)
    forward = EstimatorService.a2_2d_sup(sigma_rows, omega_rows, family, 0.0)
    dual = EstimatorService.a2_2d_sup(sigma_rows, omega_rows, family, 0.0, dual=True)
    assert math.isfinite(forward.value) and forward.value > 0.0
    assert math.isfinite(dual.value) and dual.value > 0.0
    assert forward.witness.kind == "cube"


def test_energy_two_atoms():
    """Test one forward energy term against its closed form"""
    omega = AtomicMeasure1D(np.array([0.25, 0.75]), np.array([1.0, 1.0]))
    sigma = AtomicMeasure1D(np.array([0.5]), np.array([1.0]))
    # ω(J) E² P̈(J, 1_I σ)² / σ(I) = 2 * (1/16) * 1 / 1
    value = EstimatorService.energy_functional((0.0, 1.0), [(0.0, 1.0)], sigma, omega, 0.0)
    assert value == pytest.approx(0.125)
    terms = EstimatorService.energy_terms((0.0, 1.0), [(0.0, 1.0)], sigma, omega, 0.0)
    assert terms[0].e_squared == pytest.approx(0.0625)
    assert terms[0].mass == pytest.approx(2.0)
    # dual direction: σ has a single atom in the piece, so no spread
    assert EstimatorService.energy_functional((0.0, 1.0), [(0.0, 1.0)], sigma, omega, 0.0, "dual") == 0.0


def test_energy_terms_sum_to_functional(omega, sigma, tree):
    """Test the per-piece terms add up to the normalized energy"""
    domain = tree.interval(1, 1)
    pieces = FamilyService.tree_pieces(tree, 1, 1, 2)
    value = EstimatorService.energy_functional(domain, pieces, sigma, omega, 0.0)
    terms = EstimatorService.energy_terms(domain, pieces, sigma, omega, 0.0)
    norm = ConstructionService.node_mass(sigma, *domain)
    assert sum(t.value for t in terms) / norm == pytest.approx(value, rel=1e-12)
    assert all(t.e_squared <= 0.25 + 1e-12 for t in terms)


def test_energy_rejects_bad_partitions(omega, sigma):
    """Test overlapping and escaping pieces"""
    with pytest.raises(OverlappingPartitionError):
        EstimatorService.energy_functional((0.0, 1.0), [(0.0, 0.6), (0.4, 1.0)], sigma, omega, 0.0)
    with pytest.raises(InvalidParametersError):
        EstimatorService.energy_functional((0.0, 1.0), [(0.0, 1.5)], sigma, omega, 0.0)
    with pytest.raises(InvalidParametersError):
        EstimatorService.energy_functional((0.0, 1.0), [(0.0, 1.0)], sigma, omega, 0.0, direction="sideways")


def test_energy_sup_diagnostics(tree, omega, sigma):
    """Test E² stays below 1/4 and every mean lies in its piece"""
    family = FamilyService.energy_family_1d(tree, 5, 4, seed=3)
    for direction in ("forward", "dual"):
        result = EstimatorService.energy_sup(sigma, omega, 0.0, direction, "1d-variant", family)
        assert math.isfinite(result.value)
        assert result.notes["max_e_squared"] <= 0.25 + 1e-12
        assert result.notes["means_inside"] == 1.0
        assert result.candidates == len(family)


def test_energy_2d_sup(params, tree, omega, sigma):
    """Test the planar energy over dyadic cube partitions"""
    omega_rows, sigma_rows = ConstructionService.build_planar(params, 2, [0.5, 0.25], omega, sigma)
    family = FamilyService.energy_family_2d(tree, sigma_rows, 3, 2, seed=4)
    result = EstimatorService.energy_sup(sigma_rows, omega_rows, 0.0, "forward", "2d", family)
    assert math.isfinite(result.value)
    assert result.notes["means_inside"] == 1.0


def test_dual_single_piece(tree, omega, sigma):
    """Test one ratio per tree interval"""
    ratios = EstimatorService.dual_single_piece(tree, 4, sigma, omega, 0.0)
    assert ratios.size == 2 ** 5 - 1
    assert np.all(ratios >= 0.0) and np.all(np.isfinite(ratios))


def test_testing_sum_frac_grows(tree, omega):
    """Test every generation adds at least 4^(2-α) to the fractional testing sum"""
    curve = EstimatorService.testing_partial_sum(6, "frac", tree, omega, 0.0)
    assert len(curve.points) == 6
    assert curve.lower_bound_per_generation == pytest.approx(16.0)
    assert min(curve.increments) >= 16.0 * (1.0 - 2e-3)
    assert curve.slope > 0.0
    values = [p.value for p in curve.points]
    assert values == sorted(values)
    assert curve.k0_term > 0.0


def test_testing_sum_empty_and_deep(tree, omega):
    """Test K = 0 and K beyond the tree"""
    curve = EstimatorService.testing_partial_sum(0, "frac", tree, omega, 0.0)
    assert [(p.depth, p.value) for p in curve.points] == [(0.0, 0.0)]
    with pytest.raises(InvalidParametersError):
        EstimatorService.testing_partial_sum(tree.depth + 1, "frac", tree, omega, 0.0)
    with pytest.raises(InvalidParametersError):
        EstimatorService.testing_points(tree, 2, "riesz")


def test_maximal_square_integral(tree, omega, sigma):
    """Test the maximal integral pairs with σ̈ of the interval"""
    integral, mass = EstimatorService.maximal_square_integral(tree, 0, 1, sigma, omega, 0.0)
    assert mass == pytest.approx(sigma.total_mass)
    assert integral > 0.0
    integral, mass = EstimatorService.maximal_square_integral(tree, 2, 3, sigma, omega, 0.0)
    assert mass == pytest.approx(ConstructionService.node_mass(sigma, *tree.interval(2, 3)))


def test_offtest_zero_omega_mass(params, omega, sigma):
    """Test a cube away from every ω row"""
    omega_rows, sigma_rows = ConstructionService.build_planar(params, 1, [0.5], omega, sigma)
    with pytest.raises(ZeroOmegaMassError):
        EstimatorService.offtest_quotient(Cube2D(100.5, -0.5, 1.0), "frac", sigma_rows, omega_rows, 0.0)
    with pytest.raises(InvalidParametersError):
        EstimatorService.offtest_quotient(Cube2D(0.5, -0.5, 1.0), "riesz", sigma_rows, omega_rows, 0.0, m=3)


def test_energy_accepts_rounded_pieces(tree, omega, sigma):
    """Test tree-aligned and far dyadic partitions pass the containment check"""
    for k, j in ((6, 1), (6, 23), (8, 256)):
        domain = tree.interval(k, j)
        pieces = FamilyService.tree_pieces(tree, k, j, 2)
        value = EstimatorService.energy_functional(domain, pieces, sigma, omega, 0.0)
        assert math.isfinite(value)
    params = ConstructionService.make_params(0.0, depth_omega=10, depth_sigma=8)
    omega_rows, sigma_rows = ConstructionService.build_planar(params, 3, [0.5, 0.25, 0.125], omega, sigma)
    cube = Cube2D(19.00068587105624, 0.0, tree.length(6))
    for s in (1, 2):
        value = EstimatorService.energy_functional(cube, FamilyService.dyadic_cubes(cube, s), sigma_rows,
                                                   omega_rows, 0.0, flavor="2d")
        assert math.isfinite(value)


def test_a2_product_decays_far_away(omega, sigma):
    """Test an interval at distance 10 from [0, 1] sees almost nothing of either measure"""
    unit = EstimatorService.a2_variant_product(Interval1D(0.5, 1.0), sigma, omega, 0.0)
    far = EstimatorService.a2_variant_product(Interval1D(11.5, 1.0), sigma, omega, 0.0)
    assert 0.0 < far <= 1e-4 * unit


def test_testing_sum_riesz(tree, omega):
    """Test the Riesz testing sum grows in every generation at the shifted points"""
    curve = EstimatorService.testing_partial_sum(5, "riesz", tree, omega, 0.0, c=0.25, lower_bound=0.01)
    assert curve.kind == "riesz"
    assert len(curve.points) == 5
    assert min(curve.increments) > 0.0
    values = [p.value for p in curve.points]
    assert values == sorted(values)
    assert curve.lower_bound_per_generation == pytest.approx(0.01)
    with pytest.raises(InvalidParametersError):
        EstimatorService.testing_partial_sum(3, "riesz", tree, omega, 0.0)
