import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccdc import sdp
from ccdc.approximations import HierarchyLevel, build_inner_set, build_outer_set_qubit
from ccdc.processes import ProcessMatrix, canonical_process, white_noise
from ccdc.randomness import hs_density, random_channel_choi
from ccdc.robustness import (
    GENERALIZED,
    WHITE_NOISE,
    RobustnessReport,
    Witness,
    _dual,
    _state_dual,
    analytic_bounds,
    analytic_witnesses,
    ddd2_white_noise_lower,
    dual_witness,
    generalized_cap,
    is_dc_by_inner,
    normalize_kind,
    robustness,
    verify_witness_sufficient,
    white_noise_cap,
)
from ccdc.sampling import SamplerSpec, sample_process

PPT1 = HierarchyLevel.ppt(1)


def _random_dc(rng, dims=(2, 2, 2), terms=3):
    dai, dao, dbi = dims
    p = rng.dirichlet(np.ones(terms))
    return sum(pi * np.kron(hs_density(dai, rng), random_channel_choi(dao, dbi, rng)) for pi in p)


def _random_ccdc(rng, dims=(2, 2, 2)):
    dai, dao, dbi = dims
    cc = np.einsum("abcd,xy->axbcyd", hs_density(dai * dbi, rng).reshape(dai, dbi, dai, dbi),
                   np.eye(dao)).reshape(dai * dao * dbi, -1)
    p = rng.uniform()
    return p * cc + (1 - p) * _random_dc(rng, dims)


def test_normalize_kind():
    assert normalize_kind("whitenoise") == normalize_kind("WN") == WHITE_NOISE
    assert normalize_kind("generalized") == normalize_kind("g") == GENERALIZED
    with pytest.raises(ValueError):
        normalize_kind("random")


@pytest.mark.parametrize("name,kind,expect", [
    ("W_222", "G", 0.5), ("W_222", "WN", 2 / 3),
    ("W_MRSR", "WN", 0.5),
    ("W_SEP", "G", 0.0), ("W_SEP", "WN", 0.0),
    ("W_PPT", "G", 0.0), ("W_PPT", "WN", 0.0),
])
def test_ppt1_values(name, kind, expect):
    rep = robustness(canonical_process(name), kind, PPT1)
    assert abs(rep.value - expect) < 1e-6
    assert rep.direction == "LOWER"
    assert rep.residuals["relative_gap"] < 1e-6


def test_primal_decomposition_reproduces_mixture():
    w = canonical_process("W_222")
    rep = robustness(w, "G", PPT1)
    dec = rep.decomposition
    t = rep.value
    # rho lives on AI ⊗ BI; the identity on AO goes in the middle
    cc = np.einsum("abcd,xy->axbcyd", dec["rho"].reshape(2, 2, 2, 2), np.eye(2)).reshape(8, 8)
    lhs = (1 - t) * w.matrix + dec["Omega"]
    assert np.abs(lhs - cc - dec["X"]).max() < 1e-6
    assert np.linalg.eigvalsh(dec["rho"])[0] > -1e-7
    assert np.linalg.eigvalsh(dec["Omega"])[0] > -1e-7


def test_dc_process_has_zero_robustness(rng):
    w = ProcessMatrix.from_matrix(_random_dc(rng), (2, 2, 2))
    for kind in ("G", "WN"):
        assert abs(robustness(w, kind, PPT1).value) < 1e-6


def test_bounds_sandwich_the_value():
    w = canonical_process("W_MRSR")
    inner = build_inner_set(2, ("POLYHEDRON_FAMILY", 9))
    outer = build_outer_set_qubit(9)
    for kind in ("G", "WN"):
        low = robustness(w, kind, PPT1).value
        up = robustness(w, kind, HierarchyLevel.inner(inner)).value
        out = robustness(w, kind, HierarchyLevel.outer(outer)).value
        assert out <= up + 1e-6
        assert low <= up + 1e-6
        assert up - max(low, out) < 0.05


def test_ppt_hierarchy_is_monotone_in_k():
    w = canonical_process("W_PPT")
    values = [robustness(w, "G", HierarchyLevel.ppt(k)).value for k in (1, 2)]
    assert values[0] <= values[1] + 1e-7
    assert values[1] > 1e-3


def test_inner_bound_decreases_with_more_states():
    w = canonical_process("W_222")
    full = build_inner_set(2, ("RANDOM", 40, 3))
    small = full.subset(range(12))
    v_small = robustness(w, "WN", HierarchyLevel.inner(small)).value
    v_full = robustness(w, "WN", HierarchyLevel.inner(full)).value
    assert v_full <= v_small + 1e-6
    assert v_full >= 2 / 3 - 1e-6


@pytest.mark.parametrize("name", ["W_222", "W_MRSR", "W_SEP", "W_222^2"])
def test_values_respect_caps(name):
    w = canonical_process(name)
    assert robustness(w, "G", PPT1).value <= generalized_cap(w.dims) + 1e-7
    assert robustness(w, "WN", PPT1).value <= white_noise_cap(w.dims) + 1e-7


def test_analytic_certificates_are_dc():
    w = canonical_process("W_222")
    b = analytic_bounds(w, "G")
    assert b["cap"] == generalized_cap(w.dims) == 0.5
    # both certificates are classical CCDC, so they have zero PPT robustness
    for key in ("generalized_certificate", "white_noise_certificate"):
        m = ProcessMatrix.from_matrix(b[key]["mixture"], w.dims)
        assert abs(robustness(m, "G", PPT1).value) < 1e-6


def test_ddd2_white_noise_lower():
    assert abs(ddd2_white_noise_lower(2) - 8 / 15) < 1e-15
    assert "ddd2_white_noise_lower" in analytic_bounds(canonical_process("W_222^2"))
    assert "ddd2_white_noise_lower" not in analytic_bounds(canonical_process("W_222"))


@pytest.mark.parametrize("d", [2, 3])
def test_ddd2_witness_value(d):
    wit = analytic_witnesses("DDD2", d)
    w = canonical_process("W_DDD2", d=d)
    assert abs(wit.evaluate(w) - d * (1 - d)) < 1e-10
    assert verify_witness_sufficient(wit).passed


def test_w222_witness_value():
    wit = analytic_witnesses("W222")
    assert abs(wit.evaluate(canonical_process("W_222")) + 2) < 1e-10
    assert verify_witness_sufficient(wit).passed
    with pytest.raises(ValueError):
        analytic_witnesses("CHSH")


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_analytic_witnesses_are_nonnegative_on_ccdc(seed):
    rng = np.random.default_rng(seed)
    for wit in (analytic_witnesses("W222"), analytic_witnesses("DDD2", 2)):
        assert wit.evaluate(_random_ccdc(rng, wit.dims)) >= -1e-10


def test_dual_witness_matches_primal(rng):
    w = canonical_process("W_MRSR")
    wit, rep = dual_witness(w, "G", PPT1)
    assert abs(rep.value - robustness(w, "G", PPT1).value) < 1e-6
    assert abs(-wit.evaluate(w) - rep.value) < 1e-6
    # a PPT_1 witness is certified on ordered operators only, not by the sufficient conditions
    assert min(wit.evaluate(_random_ccdc(rng)) for _ in range(50)) >= -1e-7


def test_white_noise_witness_normalization():
    w = canonical_process("W_222")
    wit, rep = dual_witness(w, "WN", PPT1)
    assert wit.white_noise_normalization(w) <= 1 + 1e-6
    assert abs(rep.value - 2 / 3) < 1e-6


def test_witness_json_round_trip():
    wit, _ = dual_witness(canonical_process("W_222"), "G", PPT1)
    back = Witness.from_json(wit.to_json())
    assert np.abs(back.S - wit.S).max() == 0
    assert back.dims == wit.dims and back.certified_by == "DUAL_SOLUTION"


def test_report_json():
    rep = robustness(canonical_process("W_222"), "G", PPT1)
    assert isinstance(rep, RobustnessReport)
    text = rep.to_json()
    assert '"value"' in text and rep.rounded == 0.5


def test_direct_dual_matches_modeling_layer():
    w = canonical_process("W_MRSR")
    states = build_inner_set(2, ("POLYHEDRON_FAMILY", 5))
    level = HierarchyLevel.inner(states)
    for kind in (GENERALIZED, WHITE_NOISE):
        direct = _state_dual(w, kind, states.elements)
        sol = sdp.solve(_dual(w, kind, level))
        assert abs(direct.value - sol.value) < 1e-6
        assert direct.relative_gap < 1e-6


def test_column_generation_matches_full_solve():
    w = canonical_process("W_SEP")
    level = HierarchyLevel.inner(build_inner_set(2, ("POLYHEDRON_FAMILY", 7)))
    for kind in ("G", "WN"):
        full = robustness(w, kind, level, column_generation=False)
        cg = robustness(w, kind, level, column_generation=True)
        assert abs(full.value - cg.value) < 1e-6
        assert cg.residuals["decomposition_residual"] < 1e-6
        assert cg.residuals["relative_gap"] < 1e-6


def test_column_generation_rejects_ppt_levels():
    with pytest.raises(ValueError):
        robustness(canonical_process("W_222"), "G", PPT1, column_generation=True)


def test_dual_needs_supported_level():
    with pytest.raises(ValueError):
        dual_witness(canonical_process("W_222"), "G", HierarchyLevel.ppt(2))


def test_white_noise_is_dc_by_inner():
    states = build_inner_set(2, ("POLYHEDRON_FAMILY", 3))
    assert is_dc_by_inner(white_noise((2, 2, 2)), states)
    assert not is_dc_by_inner(canonical_process("W_222"), states)


def test_random_process_values_bracket(rng):
    w = sample_process(SamplerSpec("M1", (2, 2, 2), 5))
    inner = build_inner_set(2, ("POLYHEDRON_FAMILY", 5))
    low = robustness(w, "WN", PPT1).value
    up = robustness(w, "WN", HierarchyLevel.inner(inner)).value
    assert -1e-7 <= low <= up + 1e-6


def test_white_noise_certificate_is_dc_by_inner():
    w = canonical_process("W_MRSR")
    cert = analytic_bounds(w)["white_noise_certificate"]
    assert abs(cert["r"] - 8 / 9) < 1e-15 and abs(cert["q"] - 1 / 3) < 1e-15
    states = build_inner_set(2, ("POLYHEDRON_FAMILY", 3))
    assert is_dc_by_inner(ProcessMatrix.from_matrix(cert["mixture"], w.dims), states)
