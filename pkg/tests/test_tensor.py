import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccdc.randomness import haar_unitary, hs_density, random_channel_choi
from ccdc.tensor import (
    LabeledOperator,
    LayoutError,
    SystemLayout,
    apply_channel,
    choi_of_map,
    choi_of_unitary,
    fuse,
    link_product,
    operator,
    partial_trace,
    partial_transpose,
    permute_subsystems,
    project_ordered,
    psd_check,
    tensor,
    trace_replace,
)

seeds = st.integers(0, 2**32 - 1)
dims = st.integers(1, 3)


def _random_op(rng, *factors):
    n = int(np.prod([d for _, d in factors]))
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return operator(g, *factors)


def _ptrace_loop(m, da, db):
    # reference: explicit sum over the basis of the traced factor
    out = np.zeros((da, da), dtype=complex)
    for j in range(db):
        e = np.zeros(db)
        e[j] = 1
        k = np.kron(np.eye(da), e[None, :])
        out += k @ m @ k.T
    return out


def test_layout_rejects_duplicates_and_bad_dims():
    with pytest.raises(LayoutError):
        SystemLayout.of(("A", 2), ("A", 2))
    with pytest.raises(LayoutError):
        SystemLayout.of(("A", 0))
    with pytest.raises(LayoutError):
        operator(np.eye(3), ("A", 2))


def test_unknown_label_raises():
    op = operator(np.eye(4), ("A", 2), ("B", 2))
    with pytest.raises(LayoutError):
        partial_trace(op, ["C"])


@settings(max_examples=30, deadline=None)
@given(seeds, dims, dims)
def test_partial_trace_matches_loop(seed, da, db):
    rng = np.random.default_rng(seed)
    op = _random_op(rng, ("A", da), ("B", db))
    assert np.abs(partial_trace(op, ["B"]).matrix - _ptrace_loop(op.matrix, da, db)).max() < 1e-10


@settings(max_examples=30, deadline=None)
@given(seeds, dims, dims, dims)
def test_permutation_and_trace_commute(seed, da, db, dc):
    rng = np.random.default_rng(seed)
    op = _random_op(rng, ("A", da), ("B", db), ("C", dc))
    p = permute_subsystems(op, ["C", "A", "B"])
    assert partial_trace(p, ["A"]).allclose(partial_trace(op, ["A"]))
    back = permute_subsystems(p, ["A", "B", "C"])
    assert np.abs(back.matrix - op.matrix).max() == 0


def test_permute_product_swaps_kron(rng):
    a, b = hs_density(2, rng), hs_density(3, rng)
    op = tensor([operator(a, ("A", 2)), operator(b, ("B", 3))])
    p = permute_subsystems(op, ["B", "A"])
    assert np.abs(p.matrix - np.kron(b, a)).max() < 1e-14


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_partial_transpose_of_product(seed):
    rng = np.random.default_rng(seed)
    a, b = hs_density(2, rng), hs_density(3, rng)
    op = operator(np.kron(a, b), ("A", 2), ("B", 3))
    assert np.abs(partial_transpose(op, ["A"]).matrix - np.kron(a.T, b)).max() < 1e-14
    twice = partial_transpose(partial_transpose(op, ["B"]), ["B"])
    assert np.abs(twice.matrix - op.matrix).max() == 0


def test_trace_replace_keeps_trace(rng):
    op = _random_op(rng, ("A", 2), ("B", 3), ("C", 2))
    r = trace_replace(op, ["B"])
    assert abs(r.trace() - op.trace()) < 1e-12
    assert r.labels == op.labels
    assert np.abs(trace_replace(r, ["B"]).matrix - r.matrix).max() < 1e-12


@settings(max_examples=50, deadline=None)
@given(seeds, st.integers(2, 3))
def test_link_product_applies_unitary(seed, d):
    rng = np.random.default_rng(seed)
    u = haar_unitary(d, rng)
    rho = hs_density(d, rng)
    choi = choi_of_unitary(u, [("in", d)], [("out", d)])
    out = apply_channel(choi, operator(rho, ("in", d)))
    assert np.abs(out.matrix - u @ rho @ u.conj().T).max() < 1e-10


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_link_product_applies_kraus_channel(seed):
    rng = np.random.default_rng(seed)
    choi = random_channel_choi(2, 3, rng)
    rho = hs_density(2, rng)
    # reference: Choi-defined action sum_ij rho_ij * block_ij
    blocks = choi.reshape(2, 3, 2, 3)
    direct = np.einsum("ij,iajb->ab", rho, blocks)
    out = apply_channel(operator(choi, ("in", 2), ("out", 3)), operator(rho, ("in", 2)))
    assert np.abs(out.matrix - direct).max() < 1e-10


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_link_product_is_associative(seed):
    rng = np.random.default_rng(seed)
    x = _random_op(rng, ("A", 2), ("B", 2))
    y = _random_op(rng, ("B", 2), ("C", 3))
    z = _random_op(rng, ("C", 3), ("D", 2))
    left = link_product(link_product(x, y), z)
    right = link_product(x, link_product(y, z))
    assert left.allclose(right, 1e-9)


def test_link_product_without_shared_labels_is_tensor(rng):
    x = _random_op(rng, ("A", 2))
    y = _random_op(rng, ("B", 3))
    assert np.abs(link_product(x, y).matrix - np.kron(x.matrix, y.matrix)).max() == 0


def test_link_product_dimension_mismatch():
    x = operator(np.eye(4), ("A", 2), ("B", 2))
    y = operator(np.eye(6), ("B", 3), ("C", 2))
    with pytest.raises(LayoutError):
        link_product(x, y)


def test_choi_of_identity_map():
    c = choi_of_map(lambda x: x, [("in", 2)], [("out", 2)])
    v = np.array([1, 0, 0, 1])
    assert np.abs(c.matrix - np.outer(v, v)).max() == 0


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(2, 3), st.integers(2, 3), st.integers(2, 3))
def test_ordered_projector_is_idempotent_and_self_adjoint(seed, a, b, c):
    rng = np.random.default_rng(seed)
    op = _random_op(rng, ("AI", a), ("AO", b), ("BI", c))
    other = _random_op(rng, ("AI", a), ("AO", b), ("BI", c))
    p1 = project_ordered(op)
    assert np.abs(project_ordered(p1).matrix - p1.matrix).max() < 1e-10
    lhs = np.trace(project_ordered(other).matrix.conj().T @ op.matrix)
    rhs = np.trace(other.matrix.conj().T @ p1.matrix)
    assert abs(lhs - rhs) < 1e-9


def test_project_ordered_fixes_markov_process(rng):
    rho = hs_density(2, rng)
    choi = random_channel_choi(2, 2, rng)
    w = operator(np.kron(rho, choi), ("AI", 2), ("AO", 2), ("BI", 2))
    assert project_ordered(w).allclose(w, 1e-12)


def test_psd_check_threshold():
    ok, lmin = psd_check(np.diag([1.0, -1e-12]))
    assert ok and lmin < 0
    ok, _ = psd_check(np.diag([1.0, -1e-3]))
    assert not ok
    with pytest.raises(ValueError):
        psd_check(np.array([[0, 1], [0, 0]]))


def test_fuse_merges_factors(rng):
    op = _random_op(rng, ("A", 2), ("B", 3), ("C", 2))
    f = fuse(op, ["A", "C"], "AC")
    assert f.layout.factors == (("AC", 4), ("B", 3))
    assert np.abs(f.matrix - permute_subsystems(op, ["A", "C", "B"]).matrix).max() == 0


def test_labeled_arithmetic_aligns_layouts(rng):
    x = _random_op(rng, ("A", 2), ("B", 3))
    y = permute_subsystems(x, ["B", "A"])
    assert np.abs((x - y).matrix).max() < 1e-14
    assert isinstance(2 * x, LabeledOperator)
