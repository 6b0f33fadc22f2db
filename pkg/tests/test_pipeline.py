import json
import pytest
from app.schemas.schemas import CLAIM_IDS
from app.services.pipeline import (
    E_SQUARED_MAX, REFINEMENT_RTOL, STABILITY_RTOL, PipelineService
)
from main import main


@pytest.fixture(scope="module")
def report():
    config = PipelineService.make_config(depth_omega=10, depth_sigma=8, k_max=4, n_targets=[1.0, 2.0])
    return PipelineService.run(config)


@pytest.fixture(scope="module")
def claims(report):
    return {c.claim_id: c for c in report.claims}


def test_every_claim_runs(report, claims):
    """Test a full run reports every claim in order"""
    assert [c.claim_id for c in report.claims] == list(CLAIM_IDS)
    assert report.passed == all(c.passed for c in report.claims)


def test_a2_1d_gates_on_both_placements(claims):
    """Test the Ä₂ claim fails when either the σ̈ or the σ̇ sup moves"""
    claim = claims["a2-1d"]
    stable = (claim.values["sup_relative_change"] <= STABILITY_RTOL
              and claim.values["sigma_dot_sup_relative_change"] <= STABILITY_RTOL)
    assert claim.passed == stable
    assert len(claim.witnesses) == 3
    assert claim.lemma is not None


def test_planar_claims_cover_riesz_rows(claims):
    """Test 𝒜₂ and energy are evaluated on the σ̇ rows with their own heights"""
    a2 = claims["a2-2d"]
    for name in ("a2", "a2_dual", "riesz_a2", "riesz_a2_dual"):
        assert f"{name}_relative_change" in a2.values
        assert a2.bounds[f"{name}_relative_change"] == STABILITY_RTOL
    assert {g.kind for g in a2.gammas} == {"frac", "riesz"}
    assert len(a2.witnesses) == 4

    energy = claims["energy-2d"]
    for name in ("forward", "dual", "riesz_forward", "riesz_dual"):
        assert energy.values[f"{name}_max_e_squared"] <= E_SQUARED_MAX
        assert energy.values[f"{name}_means_inside"] == 1.0
    assert len(energy.witnesses) == 4


def test_energy_1d_diagnostics(claims):
    """Test every 1-d energy term stays below E² = 1/2 with its mean inside the piece"""
    energy = claims["energy-1d"]
    for direction in ("forward", "dual"):
        assert energy.values[f"{direction}_max_e_squared"] <= E_SQUARED_MAX
        assert energy.values[f"{direction}_means_inside"] == 1.0


def test_testing_divergence_checks_deeper_omega(claims):
    """Test the fractional sum is compared against ω̈ four generations deeper"""
    claim = claims["testing-divergence"]
    assert claim.values["frac_deep_omega_level"] == 14.0
    change = claim.values["frac_deep_relative_change"]
    assert change >= 0.0
    if change > REFINEMENT_RTOL:
        assert not claim.passed
    assert [c.kind for c in claim.curves] == ["frac", "riesz"]


def test_offtest_claims_pass(claims):
    """Test both off-testing quotients reach their targets"""
    for claim_id in ("offtest-frac", "offtest-riesz"):
        claim = claims[claim_id]
        assert claim.passed
        assert claim.values["quotient_n=2"] >= 2.0
        assert claim.values["gammas_decreasing"] == 1.0


def test_verify_energy_1d_at_default_depths(tmp_path):
    """Test the default depths run the 1-d energy claim to a verdict"""
    out = tmp_path / "energy.json"
    code = main(["verify", "--claims", "energy-1d", "--out", str(out)])
    assert code in (0, 1)
    claim = json.loads(out.read_text())["claims"][0]
    assert claim["claim_id"] == "energy-1d"
    assert claim["values"]["forward_means_inside"] == 1.0
