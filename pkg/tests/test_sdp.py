import cvxpy as cp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccdc import sdp
from ccdc.lmi import LMIProblem, elementary_hermitian, smat_embedded, svec_embedded
from ccdc.randomness import hs_density
from ccdc.tensor import operator, partial_trace, partial_transpose, project_ordered

seeds = st.integers(0, 2**32 - 1)


def _herm(rng, n):
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (g + g.conj().T) / 2


@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_hermitian_basis_is_orthogonal(d):
    b = sdp.hermitian_basis(d)
    assert len(b) == d * d
    gram = np.einsum("aij,bji->ab", b, b)
    assert np.abs(gram - np.diag(np.diag(gram))).max() < 1e-12
    traceless = sdp.hermitian_basis(d, "traceless")
    assert traceless.shape == (d * d - 1, d, d)
    assert np.abs(np.einsum("aii->a", traceless)).max(initial=0) < 1e-12
    with pytest.raises(ValueError):
        sdp.hermitian_basis(d, "odd")


def test_functional_matrix_evaluates_traces(rng):
    dims, kinds = (2, 3, 2), ("full", "traceless", "identity")
    x = _herm(rng, 12)
    c = sdp.functional_matrix(dims, kinds)
    got = c @ x.reshape(-1)
    basis = [sdp.hermitian_basis(d, k) for d, k in zip(dims, kinds)]
    expect = [np.trace(np.kron(np.kron(a, b), g) @ x) for a in basis[0] for b in basis[1]
              for g in basis[2]]
    assert np.abs(got - np.array(expect)).max() < 1e-12


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_expression_maps_match_dense_tensor_ops(seed):
    rng = np.random.default_rng(seed)
    dims = [2, 3, 2]
    x = _herm(rng, 12)
    op = operator(x, ("AI", 2), ("AO", 3), ("BI", 2))
    cx = cp.Constant(x)
    assert np.abs(sdp.ptrace(cx, dims, [1]).value - partial_trace(op, ["AO"]).matrix).max() < 1e-12
    assert np.abs(sdp.ptranspose(cx, dims, [0]).value
                  - partial_transpose(op, ["AI"]).matrix).max() < 1e-12
    assert np.abs(sdp.project_ordered(cx, dims).value - project_ordered(op).matrix).max() < 1e-12


def test_ordered_vanish_matches_projector(rng):
    dims = [2, 2, 2]
    x = project_ordered(operator(_herm(rng, 8), ("AI", 2), ("AO", 2), ("BI", 2))).matrix
    c = sdp.functional_matrix(tuple(dims), sdp.ordered_kinds(3))
    assert np.abs(c @ x.reshape(-1)).max() < 1e-12
    y = _herm(rng, 8)
    assert np.abs(c @ y.reshape(-1)).max() > 1e-3


def test_partial_pairing(rng):
    tau = hs_density(2, rng)
    x = _herm(rng, 6)
    got = sdp.partial_pairing(cp.Constant(x), tau, 3).value
    expect = np.einsum("ba,axby->xy", tau, x.reshape(2, 3, 2, 3))
    assert np.abs(got - expect).max() < 1e-12


def test_embed_hermitian_doubles_spectrum(rng):
    h = _herm(rng, 3)
    e = sdp.embed_hermitian(h)
    ev = np.sort(np.concatenate([np.linalg.eigvalsh(h)] * 2))
    assert np.abs(np.linalg.eigvalsh(e) - ev).max() < 1e-12
    with pytest.raises(ValueError):
        sdp.embed_hermitian(np.array([[0, 1], [0, 0]]))


@pytest.mark.parametrize("backend,tol", [("clarabel", 1e-7), ("scs", 1e-4), ("auto", 1e-7)])
def test_largest_eigenvalue_program(backend, tol):
    rng = np.random.default_rng(7)
    a = _herm(rng, 4)
    P = sdp.ConicProblem({}, None)
    lam = P.scalar("lam")
    P.objective = lam
    P.add("lmi", lam * np.eye(4) - a >> 0)
    sol = sdp.solve(P, backend=backend)
    assert sol.optimal
    assert abs(sol.value - np.linalg.eigvalsh(a)[-1]) < tol
    assert sol.relative_gap < 1e-4


def test_infeasible_program():
    P = sdp.ConicProblem({}, None)
    x = P.hermitian("X", 2)
    P.objective = sdp.real_trace(x)
    P.add("psd", x >> 0)
    P.add("neg", sdp.real_trace(x) == -1)
    sol = sdp.solve(P, raise_on_failure=False)
    assert sol.status == "infeasible" and not sol.optimal
    with pytest.raises(sdp.SolverError):
        sdp.solve(P)


def test_duplicate_constraint_name():
    P = sdp.ConicProblem({}, None)
    x = P.scalar("x")
    P.add("c", x >= 0)
    with pytest.raises(KeyError):
        P.add("c", x <= 1)


def test_unknown_backend():
    P = sdp.ConicProblem({}, None)
    x = P.scalar("x")
    P.objective = x
    P.add("c", x >= 0)
    with pytest.raises(ValueError):
        sdp.solve(P, backend="mosek")


def test_svec_round_trip(rng):
    h = _herm(rng, 3)
    g = _herm(rng, 3)
    v = svec_embedded(g[None])[0]
    # pairing convention: <svec(emb A), svec(emb B)> = tr(emb A emb B) = 2 tr(A B)
    assert abs(v @ svec_embedded(h[None])[0] - 2 * np.trace(g @ h).real) < 1e-10
    d = smat_embedded(svec_embedded(h[None])[0], 3)
    assert abs(np.trace(g @ d).real - 2 * np.trace(g @ h).real) < 1e-10


def test_direct_lmi_matches_modeling_layer(rng):
    # min tr(S A) s.t. 1 - S >= 0, S + 1 >= 0  ->  -sum |eig(A)|
    n = 3
    a = _herm(rng, n)
    E = elementary_hermitian(n)
    prob = LMIProblem(len(E))
    prob.q[:] = np.real(np.einsum("kij,ji->k", E, a))
    cols = np.arange(len(E))
    prob.add_block(np.eye(n, dtype=complex), cols, -E)
    prob.add_block(np.eye(n, dtype=complex), cols, E)
    sol = prob.solve()
    assert abs(sol.primal_objective + np.abs(np.linalg.eigvalsh(a)).sum()) < 1e-7
    # multipliers are the primal matrices: q_k = tr(E_k (Y2 - Y1))
    y1, y2 = sol.multipliers
    assert np.abs(np.real(np.einsum("kij,ji->k", E, y2 - y1)) - prob.q).max() < 1e-7
    assert np.linalg.eigvalsh(y1)[0] > -1e-8 and np.linalg.eigvalsh(y2)[0] > -1e-8
