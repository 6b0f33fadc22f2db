import numpy as np
import pytest
from app.models.geometry import Cube2D
from app.services.construction import ConstructionService
from app.services.families import CUBE_CLASSES, INTERVAL_CLASSES, FamilyService


def test_sample_indices_keep_extremes():
    """Test sampling keeps both extreme indices and sorts the interior"""
    rng = np.random.default_rng(0)
    js = FamilyService.sample_indices(1024, 10, rng)
    assert js.size == 10
    assert js[0] == 0 and js[-1] == 1023
    assert np.all(np.diff(js) > 0)
    assert FamilyService.sample_indices(4, 10, rng).tolist() == [0, 1, 2, 3]


def test_interval_family_size_and_determinism(tree):
    """Test the interval family is reproducible from its seed"""
    family = FamilyService.interval_family(tree, 8, 128, seed=5)
    sampled = sum(min(2 ** k, 128) for k in range(9))
    assert family.size == 16 * sampled + 4
    assert np.all(family.lengths > 0.0)
    again = FamilyService.interval_family(tree, 8, 128, seed=5)
    assert np.array_equal(family.centers, again.centers)
    assert np.array_equal(family.lengths, again.lengths)
    assert {family.class_name(i) for i in range(family.size)} <= set(INTERVAL_CLASSES)


def test_cube_family_spans_rows(params, tree, omega, sigma):
    """Test the cube family covers single rows and spans between rows"""
    _, planar = ConstructionService.build_planar(params, 2, [0.5, 0.25], omega, sigma)
    family = FamilyService.cube_family(tree, planar, 6, 8, seed=1)
    names = {family.class_name(i) for i in range(family.size)}
    assert {"row-tree-low", "row-random", "span", "unit-row"} <= names
    assert names <= set(CUBE_CLASSES)


def test_energy_family_1d_partitions(tree):
    """Test every 1-d partition is ordered and inside its domain"""
    family = FamilyService.energy_family_1d(tree, 5, 4, seed=3)
    assert family
    for cand in family:
        left, right = cand.domain
        pieces = sorted(cand.pieces)
        assert pieces[0][0] >= left and pieces[-1][1] <= right + 1e-12
        for (_, hi), (lo, _) in zip(pieces, pieces[1:]):
            assert lo >= hi


def test_dyadic_cubes():
    """Test 4^s equal subcubes tile the cube"""
    pieces = FamilyService.dyadic_cubes(Cube2D(0.0, 0.0, 2.0), 1)
    assert len(pieces) == 4
    assert all(p.side == pytest.approx(1.0) for p in pieces)
    assert sorted((p.cx, p.cy) for p in pieces) == [(-0.5, -0.5), (-0.5, 0.5), (0.5, -0.5), (0.5, 0.5)]


def test_dyadic_pieces_end_exactly():
    """Test the last dyadic piece ends at the domain edge"""
    pieces = FamilyService.dyadic_pieces(0.1, 0.7, 3)
    assert len(pieces) == 8
    assert pieces[0][0] == 0.1 and pieces[-1][1] == 0.7


def test_tree_pieces_end_at_parent():
    """Test the last tree piece ends exactly at its parent's right end at depth 12"""
    params = ConstructionService.make_params(0.0, depth_omega=14, depth_sigma=12)
    tree = ConstructionService.build_tree(params, 14)
    for k in range(9, 13):
        for j in (1, 2, tree.count(k) // 3, tree.count(k)):
            left, right = tree.interval(k, j)
            pieces = FamilyService.tree_pieces(tree, k, j, 2)
            assert pieces[0][0] == left
            assert pieces[-1][1] == right
