"""Thin modeling layer over cvxpy + Clarabel for small dense SDPs.

Complex Hermitian variables are handed to cvxpy, whose complex-to-real
reduction performs the ``[[Re, -Im], [Im, Re]]`` embedding before the
problem reaches Clarabel.  The raw Clarabel solution is kept so primal and
dual objectives, residuals and the duality gap can be reported.
"""

from __future__ import annotations

import time
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import cvxpy as cp
import numpy as np
import scipy.sparse as sp

# Clarabel tolerances; its defaults are 1e-8 for feasibility and gaps
CLARABEL_TOL = {"tol_feas": 1e-9, "tol_gap_abs": 1e-9, "tol_gap_rel": 1e-9, "max_iter": 500}
# second attempt after a loose "AlmostSolved" stop; equilibration is what
# stalls on rank-deficient data, so switch it off and refine harder
CLARABEL_RETRY = {"equilibrate_enable": False, "iterative_refinement_reltol": 1e-14,
                  "iterative_refinement_abstol": 1e-14, "iterative_refinement_max_iter": 50}
SCS_TOL = {"eps_abs": 1e-9, "eps_rel": 1e-9, "max_iters": 200000}
GAP_TOL = 1e-6
# Clarabel keeps a dense (svec x svec) block per PSD cone in its KKT system;
# past this many bytes the first-order SCS backend is used instead
CLARABEL_MEMORY_BUDGET = 1.2e9


class SolverError(RuntimeError):
    """The backend failed to return an optimal solution."""

    def __init__(self, message, solution: "ConicSolution | None" = None):
        super().__init__(message)
        self.solution = solution


def embed_hermitian(h, tol: float = 1e-9) -> np.ndarray:
    """Real symmetric embedding ``[[Re H, -Im H], [Im H, Re H]]``."""
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("expected a square matrix")
    if np.abs(h - h.conj().T).max(initial=0) > tol:
        raise ValueError("matrix is not Hermitian")
    re, im = h.real, h.imag
    return np.block([[re, -im], [im, re]])


@dataclass
class ConicProblem:
    """Variables, a linear objective and named constraints.

    ``sense`` is "min" or "max".  Constraints are cvxpy constraint objects
    built from the helpers in this module (or directly with cvxpy).
    """

    variables: dict[str, cp.Variable]
    objective: cp.Expression
    constraints: dict[str, cp.Constraint] = field(default_factory=dict)
    sense: str = "min"

    def add(self, name: str, constraint: cp.Constraint):
        if name in self.constraints:
            raise KeyError(f"duplicate constraint name {name!r}")
        self.constraints[name] = constraint

    def hermitian(self, name: str, n: int) -> cp.Variable:
        v = cp.Variable((n, n), hermitian=True, name=name)
        self.variables[name] = v
        return v

    def scalar(self, name: str, nonneg: bool = False) -> cp.Variable:
        v = cp.Variable(nonneg=nonneg, name=name)
        self.variables[name] = v
        return v

    def to_cvxpy(self) -> cp.Problem:
        obj = cp.Minimize(self.objective) if self.sense == "min" else cp.Maximize(self.objective)
        return cp.Problem(obj, list(self.constraints.values()))


@dataclass
class ConicSolution:
    status: str                      # optimal | infeasible | numerical-failure
    value: float
    primal: dict[str, np.ndarray]
    dual: dict[str, np.ndarray]
    primal_objective: float
    dual_objective: float
    primal_residual: float
    dual_residual: float
    iterations: int
    solve_time: float
    backend_status: str = ""

    @property
    def gap(self) -> float:
        return abs(self.primal_objective - self.dual_objective)

    @property
    def relative_gap(self) -> float:
        return self.gap / (1 + abs(self.primal_objective))

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    def residuals(self) -> dict:
        return {"primal_objective": self.primal_objective, "dual_objective": self.dual_objective,
                "gap": self.gap, "relative_gap": self.relative_gap,
                "primal_residual": self.primal_residual, "dual_residual": self.dual_residual,
                "iterations": self.iterations, "solve_time": self.solve_time}


_STATUS = {
    "Solved": "optimal",
    "AlmostSolved": "optimal",
    "PrimalInfeasible": "infeasible",
    "AlmostPrimalInfeasible": "infeasible",
    "DualInfeasible": "unbounded",
    "AlmostDualInfeasible": "unbounded",
    "solved": "optimal",
    "solved_inaccurate": "optimal",
    "infeasible": "infeasible",
    "infeasible_inaccurate": "infeasible",
    "unbounded": "unbounded",
    "unbounded_inaccurate": "unbounded",
}


def clarabel_memory(data) -> float:
    """Bytes of the dense PSD-cone blocks Clarabel would allocate."""
    dims = data.get("dims") if isinstance(data, dict) else None
    sizes = getattr(dims, "psd", []) if dims is not None else []
    return float(sum((n * (n + 1) // 2) ** 2 for n in sizes)) * 8 * 2


def solve(problem: ConicProblem, tol: Mapping | None = None, raise_on_failure: bool = True,
          backend: str = "auto") -> ConicSolution:
    """Solve the problem and collect primal values, duals and residuals.

    ``backend`` is "clarabel", "scs" or "auto" (Clarabel unless its PSD
    blocks would exceed ``CLARABEL_MEMORY_BUDGET``, with an SCS retry when
    Clarabel reports a numerical failure or stops short of ``GAP_TOL``).
    """
    if backend.lower() == "auto":
        sol = _solve(problem, tol, "auto")
        if _loose(sol):
            sol = _solve(problem, dict(CLARABEL_RETRY, **(tol or {})), "clarabel")
        if _loose(sol):
            # interior point stalled: retry with the first-order backend
            sol = _solve(problem, None, "scs")
        if raise_on_failure and not sol.optimal:
            raise SolverError(f"solver returned {sol.backend_status}", sol)
        return sol
    sol = _solve(problem, tol, backend)
    if raise_on_failure and not sol.optimal:
        raise SolverError(f"solver returned {sol.backend_status}", sol)
    return sol


def _loose(sol: ConicSolution) -> bool:
    return sol.backend_status.startswith("clarabel") and (
        sol.status == "numerical-failure"
        or sol.backend_status.endswith("AlmostSolved")
        and max(sol.relative_gap, sol.primal_residual, sol.dual_residual) > GAP_TOL)


def _solve(problem: ConicProblem, tol, backend: str) -> ConicSolution:
    prob = problem.to_cvxpy()
    t0 = time.perf_counter()
    name = backend.lower()
    if name == "auto":
        data, chain, inv = prob.get_problem_data(cp.CLARABEL)
        name = "clarabel" if clarabel_memory(data) <= CLARABEL_MEMORY_BUDGET else "scs"
    if name == "clarabel":
        if backend.lower() != "auto":
            data, chain, inv = prob.get_problem_data(cp.CLARABEL)
        opts = dict(CLARABEL_TOL, **(tol or {}))
        raw = chain.solver.solve_via_data(data, False, False, opts)
        info = {"status": str(raw.status), "pobj": raw.obj_val, "dobj": raw.obj_val_dual,
                "res_pri": raw.r_prim, "res_dual": raw.r_dual, "iter": raw.iterations}
    elif name == "scs":
        data, chain, inv = prob.get_problem_data(cp.SCS)
        opts = dict(SCS_TOL, **(tol or {}))
        raw = chain.solver.solve_via_data(data, False, False, opts)
        info = dict(raw["info"])
    else:
        raise ValueError(f"unknown backend {backend!r}")
    status = _STATUS.get(info["status"], "numerical-failure")
    if status == "optimal":
        prob.unpack_results(raw, chain, inv)
    elapsed = time.perf_counter() - t0
    sol = ConicSolution(
        status=status,
        value=float(prob.value) if status == "optimal" else float("nan"),
        primal={k: _value(v) for k, v in problem.variables.items()} if status == "optimal" else {},
        dual={k: _value_dual(c) for k, c in problem.constraints.items()} if status == "optimal" else {},
        primal_objective=float(info["pobj"]),
        dual_objective=float(info["dobj"]),
        primal_residual=float(info["res_pri"]),
        dual_residual=float(info["res_dual"]),
        iterations=int(info["iter"]),
        solve_time=elapsed,
        backend_status=f"{name}:{info['status']}",
    )
    return sol


def _value(v):
    return None if v.value is None else np.asarray(v.value)


def _value_dual(c):
    d = c.dual_value
    return None if d is None else np.asarray(d)


# ------------------------------------------------------ expression helpers
# Operators are matrices over a list of factor dims, first factor most
# significant, matching the dense conventions of the tensor module.  Every
# structural map is a sparse matrix acting on the row-major vectorization, so
# canonicalization stays cheap for the 100-250 dimensional operators.

def _indices(dims):
    k = len(dims)
    return np.indices(tuple(dims) + tuple(dims)).reshape(2 * k, -1)


@lru_cache(maxsize=256)
def ptrace_matrix(dims: tuple, over: tuple) -> sp.csr_matrix:
    """Sparse matrix of the partial trace on row-major vectorized operators."""
    k = len(dims)
    idx = _indices(dims)
    mask = np.ones(idx.shape[1], dtype=bool)
    for i in over:
        mask &= idx[i] == idx[k + i]
    keep = [i for i in range(k) if i not in over]
    kd = [dims[i] for i in keep]
    m = int(np.prod(kd)) if keep else 1
    if keep:
        rows = np.ravel_multi_index(tuple(idx[i][mask] for i in keep), kd)
        cols = np.ravel_multi_index(tuple(idx[k + i][mask] for i in keep), kd)
        out = rows * m + cols
    else:
        out = np.zeros(mask.sum(), dtype=int)
    n = int(np.prod(dims))
    return sp.csr_matrix((np.ones(mask.sum()), (out, np.flatnonzero(mask))), shape=(m * m, n * n))


@lru_cache(maxsize=256)
def permute_matrix(dims: tuple, perm: tuple) -> sp.csr_matrix:
    """Sparse matrix taking vec(X) to vec(X') for an axis permutation of the (rows, cols) tensor."""
    n2 = int(np.prod(dims)) ** 2
    src = np.arange(n2).reshape(tuple(dims) * 2).transpose(perm).reshape(-1)
    return sp.csr_matrix((np.ones(n2), (np.arange(n2), src)), shape=(n2, n2))


def ptranspose_matrix(dims: tuple, on: tuple) -> sp.csr_matrix:
    k = len(dims)
    perm = list(range(2 * k))
    for i in on:
        perm[i], perm[k + i] = k + i, i
    return permute_matrix(tuple(dims), tuple(perm))


def reorder_matrix(dims: tuple, order: tuple) -> sp.csr_matrix:
    k = len(dims)
    return permute_matrix(tuple(dims), tuple(order) + tuple(k + i for i in order))


@lru_cache(maxsize=256)
def trace_replace_matrix(dims: tuple, on: tuple) -> sp.csr_matrix:
    m = ptrace_matrix(dims, on)
    d = int(np.prod([dims[i] for i in on])) if on else 1
    return (m.T @ m / d).tocsr()


@lru_cache(maxsize=64)
def ordered_projector_matrix(dims: tuple, ao: int = 1, bi: int = 2) -> sp.csr_matrix:
    n2 = int(np.prod(dims)) ** 2
    return (sp.identity(n2, format="csr") + trace_replace_matrix(dims, tuple(sorted((ao, bi))))
            - trace_replace_matrix(dims, (bi,))).tocsr()


def apply_map(x, m: sp.spmatrix, hermitian: bool = True):
    """Apply a sparse vec-map to a square expression, returning a square expression."""
    out = int(round(np.sqrt(m.shape[0])))
    y = cp.reshape(m @ cp.vec(x, order="C"), (out, out), order="C")
    return cp.hermitian_wrap(y) if hermitian else y


def ptrace(x, dims: Sequence[int], over: Sequence[int]):
    """Partial trace of an expression over the factor indices ``over``."""
    return apply_map(x, ptrace_matrix(tuple(dims), tuple(sorted(over))))


def ptranspose(x, dims: Sequence[int], on: Sequence[int]):
    return apply_map(x, ptranspose_matrix(tuple(dims), tuple(sorted(on))))


def reorder(x, dims: Sequence[int], order: Sequence[int]):
    """Permute tensor factors so that new factor j is old factor ``order[j]``."""
    return apply_map(x, reorder_matrix(tuple(dims), tuple(order)))


def trace_replace(x, dims: Sequence[int], on: Sequence[int]):
    """``tr_X(x) ⊗ 1_X / d_X`` on the factor indices ``on``."""
    return apply_map(x, trace_replace_matrix(tuple(dims), tuple(sorted(on))))


def project_ordered(x, dims: Sequence[int], ao: int = 1, bi: int = 2):
    """Ordered-process projector ``x + _{AO BI}(x) - _{BI}(x)`` on an expression."""
    return apply_map(x, ordered_projector_matrix(tuple(dims), ao, bi))


def ordered_complement(x, dims: Sequence[int], ao: int = 1, bi: int = 2):
    """``x - L(x)``, which vanishes exactly on the ordered-process span."""
    return apply_map(x, (sp.identity(int(np.prod(dims)) ** 2)
                         - ordered_projector_matrix(tuple(dims), ao, bi)).tocsr())


def embed_identity(x, dims_x: Sequence[int], dims_id: Sequence[int], order: Sequence[int]):
    """``x ⊗ 1`` reordered: factors of x followed by identity factors, then ``order``."""
    d = int(np.prod(dims_id))
    y = cp.kron(x, sp.identity(d, format="csr")) if d > 1 else x
    full = list(dims_x) + list(dims_id)
    if list(order) == list(range(len(full))):
        return cp.hermitian_wrap(y)
    return reorder(y, full, order)


def real_trace(x):
    return cp.real(cp.trace(x))


def inner(a: np.ndarray, x):
    """Real Hilbert-Schmidt pairing ``tr(A X)`` for Hermitian A and X."""
    return cp.real(cp.sum(cp.multiply(np.asarray(a).T, x)))


# ------------------------------------------------- product-basis functionals

def hermitian_basis(d: int, kind: str = "full") -> np.ndarray:
    """Orthogonal Hermitian basis of d x d matrices as an array (m, d, d).

    ``full`` is the identity plus the generalized Gell-Mann matrices,
    ``traceless`` drops the identity and ``identity`` keeps only it.
    """
    if kind == "identity":
        return np.eye(d, dtype=complex)[None]
    mats = [] if kind == "traceless" else [np.eye(d, dtype=complex)]
    if kind not in ("full", "traceless"):
        raise ValueError(f"unknown basis kind {kind!r}")
    for j in range(d):
        for k in range(j + 1, d):
            s = np.zeros((d, d), dtype=complex)
            s[j, k] = s[k, j] = 1
            a = np.zeros((d, d), dtype=complex)
            a[j, k], a[k, j] = -1j, 1j
            mats += [s, a]
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1
        diag[l] = -l
        mats.append(np.diag(diag).astype(complex))
    return np.array(mats, dtype=complex).reshape(-1, d, d)


@lru_cache(maxsize=128)
def functional_matrix(dims: tuple, kinds: tuple) -> sp.csr_matrix:
    """Rows ``vec(A^T)`` for every product ``A = A_1 ⊗ ... ⊗ A_k`` of basis elements.

    Then ``(C @ vec(X))[i] = tr(A_i X)`` for row-major ``vec``.
    """
    k = len(dims)
    blocks = [sp.csr_matrix(hermitian_basis(d, kind).transpose(0, 2, 1).reshape(-1, d * d))
              for d, kind in zip(dims, kinds)]
    c = blocks[0]
    for b in blocks[1:]:
        c = sp.kron(c, b, format="csr")
    # columns are ordered (r1, c1, r2, c2, ...); reorder to (r1, ..., rk, c1, ..., ck)
    inter = [x for i in range(k) for x in (dims[i], dims[i])]
    order = [2 * i for i in range(k)] + [2 * i + 1 for i in range(k)]
    n2 = int(np.prod(inter))
    src = np.arange(n2).reshape(inter).transpose(order).reshape(-1)
    return c[:, src].tocsr()


def vanish(x, dims: Sequence[int], kinds: Sequence[str]):
    """Constraint ``tr(A x) = 0`` for every product-basis element A of the given kinds."""
    c = functional_matrix(tuple(dims), tuple(kinds))
    return cp.real(c @ cp.vec(x, order="C")) == 0


def span(coeffs, dims: Sequence[int], kinds: Sequence[str]):
    """Hermitian expression ``sum_i c_i A_i`` over a product basis, real coefficients."""
    c = functional_matrix(tuple(dims), tuple(kinds))
    n = int(np.prod(dims))
    # vec(A_i) = conj of the row vec(A_i^T) for Hermitian A_i
    y = cp.reshape(c.T.conj() @ coeffs, (n, n), order="C")
    return cp.hermitian_wrap(y)


def span_size(dims: Sequence[int], kinds: Sequence[str]) -> int:
    return int(np.prod([hermitian_basis(d, k).shape[0] for d, k in zip(dims, kinds)]))


def ordered_kinds(n_factors: int, ao: int = 1, bi: int = 2) -> tuple:
    """Kinds whose span is the orthogonal complement of the ordered-process span.

    ``L(X) = X`` iff ``tr[(H ⊗ G ⊗ 1) X] = 0`` for H any operator on AI and
    G traceless on AO; factors other than AI/AO/BI are left unrestricted.
    """
    kinds = ["full"] * n_factors
    kinds[ao] = "traceless"
    kinds[bi] = "identity"
    return tuple(kinds)


@lru_cache(maxsize=4096)
def _partial_pairing_matrix(tau_bytes: bytes, d: int, m: int) -> sp.csr_matrix:
    tau = np.frombuffer(tau_bytes, dtype=complex).reshape(d, d)
    left = sp.kron(sp.csr_matrix(np.kron(tau, np.eye(m))), sp.identity(d * m), format="csr")
    return (ptrace_matrix((d, m), (0,)) @ left).tocsr()


def partial_pairing(x, tau: np.ndarray, m: int):
    """``tr_1[(tau ⊗ 1) x]`` for x on C^d ⊗ C^m and a Hermitian tau on C^d."""
    tau = np.ascontiguousarray(tau, dtype=complex)
    return apply_map(x, _partial_pairing_matrix(tau.tobytes(), tau.shape[0], m))
