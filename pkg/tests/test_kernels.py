import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from app.core.exceptions import InvalidParametersError, SingularEvaluationError
from app.models.geometry import Cube2D, CubeRestriction, Interval1D, IntervalRestriction, KernelKind, KernelSpec
from app.models.measures import AtomicMeasure1D, PlanarMeasure, PlanarRow
from app.services.construction import ConstructionService
from app.services.kernels import KernelService


def test_frac1d_single_atom(unit_atom):
    """Test |x - y|^(α-2) and its γ-smoothed form"""
    assert KernelService.frac1d(2.0, unit_atom, 0.0) == pytest.approx(0.25)
    assert KernelService.frac1d(2.0, unit_atom, 0.0, gamma=1.0) == pytest.approx(0.2)
    assert KernelService.frac1d(4.0, unit_atom, 1.0) == pytest.approx(0.25)


def test_riesz1d_is_odd(unit_atom):
    """Test the Riesz kernel changes sign with x"""
    assert KernelService.riesz1d(2.0, unit_atom, 0.0) == pytest.approx(0.25)
    assert KernelService.riesz1d(-2.0, unit_atom, 0.0) == pytest.approx(-0.25)


def test_riesz1d_symmetric_cancellation():
    """Test symmetric atoms cancel exactly at the midpoint"""
    mu = AtomicMeasure1D(np.array([-1.0, 1.0]), np.array([1.0, 1.0]))
    assert KernelService.riesz1d(0.0, mu, 0.5) == 0.0


def test_singular_evaluation(unit_atom, omega):
    """Test evaluation on an atom or on the Cantor support"""
    with pytest.raises(SingularEvaluationError):
        KernelService.frac1d(0.0, unit_atom, 0.0)
    with pytest.raises(SingularEvaluationError):
        KernelService.riesz1d_batch([3.0, 0.0], unit_atom, 0.0)
    with pytest.raises(SingularEvaluationError):
        KernelService.frac1d(0.0, omega, 0.0)
    # a vertical offset lifts the singularity
    assert np.isfinite(KernelService.frac1d(0.0, unit_atom, 0.0, gamma=0.5))


def test_negative_gamma_rejected(unit_atom):
    """Test γ < 0"""
    with pytest.raises(InvalidParametersError):
        KernelService.frac1d(1.0, unit_atom, 0.0, gamma=-1.0)


def test_cantor_quadrature_matches_leaf_atoms(omega, tree):
    """Test the adaptive tree quadrature against equal atoms at the generation-10 midpoints"""
    level = omega.level
    leaves = AtomicMeasure1D(tree.centers(level), np.full(tree.count(level), 0.5 ** level))
    xs = np.array([-1.0, 0.5, 2.0])
    adaptive = KernelService.frac1d_batch(xs, omega, 0.0)
    direct = KernelService.frac1d_batch(xs, leaves, 0.0)
    assert adaptive == pytest.approx(direct, rel=2e-3)
    far = np.array([-1.0, 2.0])
    adaptive = KernelService.riesz1d_batch(far, omega, 0.5)
    direct = KernelService.riesz1d_batch(far, leaves, 0.5)
    assert adaptive == pytest.approx(direct, rel=2e-3)
    # the midpoint gap sees equal pulls from both halves
    assert abs(KernelService.riesz1d(0.5, omega, 0.0)) < 1e-9


def test_poisson_variants_single_atom():
    """Test both Poisson variants against their closed forms"""
    mu = AtomicMeasure1D(np.array([3.0]), np.array([1.0]))
    interval = Interval1D(center=0.0, length=1.0)
    assert KernelService.poisson_variant_standard(interval, mu, 0.0) == pytest.approx(1.0 / 64.0)
    assert KernelService.poisson_variant_reproducing(interval, mu, 0.0) == pytest.approx(1.0 / 256.0)
    assert KernelService.poisson_variant_standard(interval, mu, 1.0) == pytest.approx(1.0 / 16.0)


def test_poisson_restrictions():
    """Test restriction to a closed interval and to its complement"""
    mu = AtomicMeasure1D(np.array([0.0, 3.0]), np.array([1.0, 1.0]))
    interval = Interval1D(center=0.0, length=1.0)
    inside = KernelService.poisson_variant_standard(interval, mu, 0.0, IntervalRestriction(-1.0, 1.0))
    outside = KernelService.poisson_variant_standard(
        interval, mu, 0.0, IntervalRestriction(-1.0, 1.0, keep_inside=False)
    )
    full = KernelService.poisson_variant_standard(interval, mu, 0.0)
    assert inside == pytest.approx(1.0)
    assert outside == pytest.approx(1.0 / 64.0)
    assert inside + outside == pytest.approx(full)


@settings(max_examples=30, deadline=None)
@given(
    st.floats(min_value=0.1, max_value=10.0),
    st.floats(min_value=0.0, max_value=1.9),
    st.floats(min_value=-5.0, max_value=5.0),
)
def test_poisson_standard_homogeneity(scale, alpha, position):
    """Test P̈(λI, μ_λ) = λ^(α-2) P̈(I, μ) for a dilated atom"""
    mu = AtomicMeasure1D(np.array([position]), np.array([1.0]))
    dilated = AtomicMeasure1D(np.array([scale * position]), np.array([1.0]))
    base = KernelService.poisson_variant_standard(Interval1D(0.0, 1.0), mu, alpha)
    scaled = KernelService.poisson_variant_standard(Interval1D(0.0, scale), dilated, alpha)
    assert scaled == pytest.approx(scale ** (alpha - 2.0) * base, rel=1e-9)


def _single_row(base, offset=0.0, height=0.0):
    return PlanarMeasure(rows=(PlanarRow(offset=offset, height=height, base=base),))


def test_riesz2d_single_row_negates_riesz1d():
    """Test riesz2d(1, ·) = -riesz1d(·) on the row's own line"""
    base = AtomicMeasure1D(np.array([0.2, 0.7]), np.array([1.0, 0.5]))
    planar = _single_row(base)
    for x in (-1.0, 0.4, 2.5):
        assert KernelService.riesz2d(1, (x, 0.0), planar, 0.5) == -KernelService.riesz1d(x, base, 0.5)


def test_frac2d_and_vertical_riesz(unit_atom):
    """Test the planar kernels against a single atom lifted to height 1"""
    planar = _single_row(unit_atom, offset=2.0, height=1.0)
    # point (2, 0) sits one unit under the atom at (2, 1)
    assert KernelService.frac2d((2.0, 0.0), planar, 0.0) == pytest.approx(1.0)
    assert KernelService.frac2d((5.0, 5.0), planar, 0.0) == pytest.approx(1.0 / 25.0)
    assert KernelService.riesz2d(2, (2.0, 0.0), planar, 0.0) == pytest.approx(1.0)
    assert KernelService.riesz2d(1, (2.0, 0.0), planar, 0.0) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(InvalidParametersError):
        KernelService.riesz2d(3, (2.0, 0.0), planar, 0.0)


def test_poisson2d_cube_restriction(unit_atom):
    """Test a cube restriction keeps or drops a row"""
    planar = _single_row(unit_atom, offset=0.0, height=0.5)
    cube = Cube2D(cx=0.0, cy=0.5, side=1.0)
    full = KernelService.poisson2d_standard(cube, planar, 0.0)
    assert full == pytest.approx(1.0)
    inside = KernelService.poisson2d_standard(cube, planar, 0.0, CubeRestriction(cube))
    outside = KernelService.poisson2d_standard(cube, planar, 0.0, CubeRestriction(cube, keep_inside=False))
    assert inside == pytest.approx(full)
    assert outside == 0.0
    far = Cube2D(cx=10.0, cy=10.0, side=1.0)
    assert KernelService.poisson2d_standard(cube, planar, 0.0, CubeRestriction(far)) == 0.0


def test_maximal_alpha_on_cantor(omega, tree):
    """Test M^α ω̈ at a tree point reaches the deepest generation for alpha = 0"""
    value = KernelService.maximal_alpha(0.0, omega, tree, 0.0)
    assert value == pytest.approx(4.5 ** tree.depth, rel=1e-9)
    assert KernelService.maximal_alpha(0.5, omega, tree, 0.0) == pytest.approx(1.0)
    assert KernelService.maximal_alpha(2.0, omega, tree, 0.0) == 0.0


def test_evaluate_dispatch(unit_atom):
    """Test KernelSpec routing and validation"""
    assert KernelService.evaluate(KernelSpec(KernelKind.FRAC1D, 0.0), 2.0, unit_atom) == pytest.approx(0.25)
    interval = Interval1D(center=3.0, length=1.0)
    kernel_spec = KernelSpec(KernelKind.POISSON_VARIANT_STANDARD, 0.0)
    assert KernelService.evaluate(kernel_spec, interval, unit_atom) == pytest.approx(1.0 / 64.0)
    with pytest.raises(InvalidParametersError):
        KernelSpec(KernelKind.RIESZ2D, 0.0)
    with pytest.raises(InvalidParametersError):
        KernelSpec(KernelKind.FRAC1D, 2.0)


def test_planar_kernels_reduce_to_smoothed_1d(sigma):
    """Test one σ row at height h seen from height h + γ gives the γ-smoothed 1-d kernels"""
    rng = np.random.default_rng(7)
    offset, height = 2.0, 0.75
    planar = PlanarMeasure(rows=(PlanarRow(offset=offset, height=height, base=sigma),))
    x1 = offset + rng.uniform(-1.0, 2.0, 1000)
    x2 = height + rng.uniform(0.01, 1.0, 1000)
    points = np.column_stack((x1, x2))
    local_x = x1 - offset
    local_gamma = x2 - height
    for alpha in (0.0, 0.5, 1.5):
        planar_frac = KernelService.frac2d_batch(points, planar, alpha)
        planar_riesz = KernelService.riesz2d_batch(1, points, planar, alpha)
        line_frac = np.array([KernelService.frac1d(x, sigma, alpha, g) for x, g in zip(local_x, local_gamma)])
        line_riesz = np.array([KernelService.riesz1d(x, sigma, alpha, g) for x, g in zip(local_x, local_gamma)])
        assert np.all(np.abs(planar_frac - line_frac) <= 10 * np.spacing(np.abs(line_frac)))
        assert np.all(np.abs(planar_riesz + line_riesz) <= 10 * np.spacing(np.abs(line_riesz)))


def test_frac1d_against_deep_atomization():
    """Test T̈ω̈(1/2) on ω̈ at generation 14 against 2^18 equal leaf atoms"""
    params = ConstructionService.make_params(0.0, depth_omega=14, depth_sigma=12)
    tree = ConstructionService.build_tree(params, 18)
    omega = ConstructionService.cantor_weights(tree, level=14)
    leaves = AtomicMeasure1D(tree.centers(18), np.full(tree.count(18), 0.5 ** 18))
    expected = KernelService.frac1d(0.5, leaves, 0.0)
    assert KernelService.frac1d(0.5, omega, 0.0) == pytest.approx(expected, rel=5e-3)
