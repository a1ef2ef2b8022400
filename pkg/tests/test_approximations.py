import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccdc.approximations import (
    OUTER_OPERATORS,
    HierarchyLevel,
    StateSet,
    bloch_to_state,
    bloch_vector,
    bose_symmetric_projector,
    build_inner_set,
    build_outer_set_qubit,
    family_radius,
    hull_membership,
    inradius,
    outer_from_shrinking,
    polyhedron_family,
    shrinking_factor,
    symmetric_rank,
)
from ccdc.randomness import haar_state, hs_density
from ccdc.tensor import projector


@pytest.mark.parametrize("n", [1, 3, 5, 9])
def test_family_has_2n2_unit_vectors(n):
    v = polyhedron_family(n)
    assert v.shape == (2 * n * n, 3)
    assert np.abs(np.linalg.norm(v, axis=1) - 1).max() < 1e-12


def test_family_rejects_even_n():
    with pytest.raises(ValueError):
        polyhedron_family(4)


@pytest.mark.parametrize("n", [3, 5, 9, 15])
def test_inradius_meets_bound(n):
    assert inradius(polyhedron_family(n)) >= family_radius(n) - 1e-9


def test_inradius_of_octahedron():
    v = np.vstack([np.eye(3), -np.eye(3)])
    assert abs(inradius(v) - 1 / np.sqrt(3)) < 1e-8


def test_inradius_rejects_flat_sets():
    with pytest.raises(ValueError):
        inradius(np.array([[1.0, 0, 0], [0, 1, 0], [-1, 0, 0]]))


def test_bloch_round_trip(rng):
    for _ in range(10):
        rho = hs_density(2, rng)
        assert np.abs(bloch_to_state(bloch_vector(rho)) - rho).max() < 1e-12


def test_outer_set_is_trace_one_and_certified():
    out = build_outer_set_qubit(9)
    assert out.kind == OUTER_OPERATORS and out.certified
    assert np.abs(np.einsum("nii->n", out.elements) - 1).max() < 1e-12
    # vertices sit outside the Bloch ball
    assert (np.linalg.norm([bloch_vector(e) for e in out.elements], axis=1) > 1).all()


def test_outer_hull_contains_haar_states(rng):
    out = build_outer_set_qubit(9)
    for _ in range(100):
        rho = projector(haar_state(2, rng))
        w = hull_membership(out, rho)
        assert w is not None
        assert abs(w.sum() - 1) < 1e-7 and w.min() > -1e-9


def test_inner_hull_misses_pure_states_off_the_family(rng):
    inner = build_inner_set(2, ("POLYHEDRON_FAMILY", 5))
    rho = projector(haar_state(2, rng))
    assert hull_membership(inner, rho) is None
    assert hull_membership(inner, inner.elements[3]) is not None


def test_random_inner_set_is_seeded():
    a = build_inner_set(3, ("RANDOM", 10, 4))
    b = build_inner_set(3, ("RANDOM", 10, 4))
    assert np.abs(a.elements - b.elements).max() == 0
    ev = np.linalg.eigvalsh(a.elements)
    assert np.abs(ev[:, -1] - 1).max() < 1e-12 and np.abs(ev[:, :-1]).max() < 1e-12


def test_family_needs_qubits():
    with pytest.raises(ValueError):
        build_inner_set(3, ("POLYHEDRON_FAMILY", 5))
    with pytest.raises(ValueError):
        build_inner_set(2, ("SPIRAL", 5))


def test_state_set_json_round_trip():
    s = build_inner_set(3, ("RANDOM", 4, 1))
    back = StateSet.from_json(s.to_json())
    assert np.abs(back.elements - s.elements).max() < 1e-15
    assert back.seed == 1 and back.source == s.source


def test_state_set_validation():
    with pytest.raises(ValueError):
        StateSet(np.zeros((0, 2, 2)))
    with pytest.raises(ValueError):
        StateSet(np.eye(2)[None])
    with pytest.raises(ValueError):
        StateSet(np.eye(2)[None] / 2, kind="MIXED")


def test_hierarchy_level_validation():
    inner = build_inner_set(2, ("POLYHEDRON_FAMILY", 3))
    outer = build_outer_set_qubit(3)
    assert HierarchyLevel.ppt(2).tag() == "PPT_2"
    assert HierarchyLevel.inner(inner).direction == "UPPER"
    assert HierarchyLevel.outer(outer).direction == "LOWER"
    assert HierarchyLevel.outer(outer, 2).tag().startswith("OUTER_POLY+PPT_2")
    with pytest.raises(ValueError):
        HierarchyLevel("PPT_K", 0)
    with pytest.raises(ValueError):
        HierarchyLevel("INNER")
    with pytest.raises(ValueError):
        HierarchyLevel.inner(outer)
    with pytest.raises(ValueError):
        HierarchyLevel("DPS")


@pytest.mark.parametrize("d,k", [(2, 2), (2, 3), (3, 2)])
def test_bose_projector(d, k):
    p = bose_symmetric_projector(d, k).matrix
    assert np.abs(p @ p - p).max() < 1e-12
    assert np.abs(p - p.conj().T).max() == 0
    assert round(np.trace(p).real) == symmetric_rank(d, k)


def test_shrinking_factor_of_octahedron(rng):
    # octahedron vertices are the Pauli eigenstates; the inscribed ball has radius 1/sqrt(3)
    v = np.vstack([np.eye(3), -np.eye(3)])
    states = StateSet(np.array([bloch_to_state(x) for x in v]))
    probes = [projector(haar_state(2, rng)) for _ in range(30)]
    probes.append(bloch_to_state(np.ones(3) / np.sqrt(3)))
    eta, per = shrinking_factor(states, probes, resolution=1e-6)
    assert abs(eta - 1 / np.sqrt(3)) < 1e-5
    assert len(per) == len(probes) and min(per) == eta
    outer = outer_from_shrinking(states, eta)
    assert outer.kind == OUTER_OPERATORS
    for rho in probes:
        assert hull_membership(outer, rho) is not None


def test_shrinking_factor_needs_the_mixed_state():
    states = StateSet(np.array([bloch_to_state([0, 0, 1])]))
    with pytest.raises(ValueError):
        shrinking_factor(states, [bloch_to_state([1, 0, 0])])


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_hull_weights_reproduce_target(seed):
    rng = np.random.default_rng(seed)
    out = build_outer_set_qubit(5)
    rho = hs_density(2, rng)
    w = hull_membership(out, rho)
    assert np.abs(np.einsum("n,nij->ij", w, out.elements) - rho).max() < 1e-7
