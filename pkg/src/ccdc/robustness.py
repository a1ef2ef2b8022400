"""Generalized and white-noise robustness of ordered processes, plus witnesses.

A process is classical common-cause/direct-cause (CCDC) when it splits as a
common-cause part ``rho ⊗ 1_AO`` plus a direct-cause part.  Robustness is the
smallest weight of added noise (worst-case ordered noise, or white noise)
that makes the mixture CCDC.  The direct-cause cone is replaced by one of
the approximations in :mod:`ccdc.approximations`, giving lower bounds
(outer levels) or upper bounds (inner levels).

Programs are written in cone form, with all weights absorbed into
unnormalized operators:

generalized   min tr(Om)/d_AO  s.t. (1 - tr(Om)/d_AO) W + Om = rho ⊗ 1_AO + X
white noise   min r            s.t. (1 - r) W + r 1/(d_AI d_BI) = rho ⊗ 1_AO + X

with Om and rho PSD, Om in the ordered span and X in the DC approximation.
The duals maximize ``-tr(S W)`` and yield witnesses S.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import cvxpy as cp
import numpy as np
from scipy.optimize import minimize

from . import sdp
from .approximations import OUTER_OPERATORS, HierarchyLevel, StateSet, build_inner_set
from .processes import (
    BIPARTITE,
    TRIPARTITE,
    ProcessMatrix,
    canonical_process,
    noise_maps,
    white_noise_matrix,
)
from .tensor import hermitian_part, operator, partial_trace, partial_transpose, psd_check

GENERALIZED = "GENERALIZED"
WHITE_NOISE = "WHITE_NOISE"

# column generation kicks in above this many states
COLUMN_GENERATION_THRESHOLD = 400
PRICING_TOL = 1e-7
EXACT_MARGIN_CHUNK = 2000


def normalize_kind(kind: str) -> str:
    key = kind.upper().replace("-", "").replace("_", "").replace(" ", "")
    if key in ("G", "GENERALIZED", "GEN"):
        return GENERALIZED
    if key in ("WN", "WHITENOISE", "WHITE"):
        return WHITE_NOISE
    raise ValueError(f"unknown robustness kind {kind!r}")


# --------------------------------------------------------------- data types

@dataclass(frozen=True, eq=False)
class Witness:
    """Hermitian S with ``tr(S W) >= 0`` on every classical CCDC process."""

    S: np.ndarray
    dims: tuple[int, int, int]
    kind: str
    certified_by: str            # SUFFICIENT_CONDITIONS or DUAL_SOLUTION
    name: str = ""

    def __post_init__(self):
        s = np.array(self.S, dtype=complex)
        s.setflags(write=False)
        object.__setattr__(self, "S", s)
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))

    @property
    def op(self):
        return operator(self.S, *zip(BIPARTITE, self.dims))

    def evaluate(self, w) -> float:
        m = w.matrix if hasattr(w, "matrix") else np.asarray(w)
        return float(np.real(np.trace(self.S @ m)))

    def white_noise_normalization(self, w) -> float:
        """``tr(S)/(d_AI d_BI) - tr(S W)``; at most 1 for a normalized witness."""
        dai, _, dbi = self.dims
        return float(np.real(np.trace(self.S))) / (dai * dbi) - self.evaluate(w)

    def as_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "certified_by": self.certified_by,
                "dims": list(self.dims), "matrix": _matrix_json(self.S)}

    def to_json(self) -> str:
        return json.dumps(self.as_dict())

    @classmethod
    def from_json(cls, text: str) -> "Witness":
        obj = json.loads(text)
        return cls(_matrix_from_json(obj["matrix"]), tuple(obj["dims"]), obj["kind"],
                   obj["certified_by"], obj.get("name", ""))


@dataclass(eq=False)
class RobustnessReport:
    process: str
    kind: str
    method: str
    direction: str               # LOWER, UPPER or EXACT
    value: float
    residuals: dict = field(default_factory=dict)
    witness: Witness | None = None
    decomposition: dict | None = None

    @property
    def rounded(self) -> float:
        return round(self.value, 4)

    def as_dict(self, include_witness: bool = True) -> dict:
        out = {"process": self.process, "kind": self.kind, "method": self.method,
               "direction": self.direction, "value": self.value, "rounded": self.rounded,
               "residuals": _jsonable(self.residuals)}
        if include_witness and self.witness is not None:
            out["witness"] = self.witness.as_dict()
        return out

    def to_json(self, include_witness: bool = True) -> str:
        return json.dumps(self.as_dict(include_witness))


def _matrix_json(m) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


def _matrix_from_json(rows) -> np.ndarray:
    return np.array([[complex(a, b) for a, b in row] for row in rows])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


# ------------------------------------------------------------ primal builder

def _dc_terms(P: sdp.ConicProblem, x, dims, states: np.ndarray, prefix: str = "D"):
    """``x == sum_i tau_i ⊗ D_i`` with each D_i PSD and channel-like on AO ⊗ BI."""
    dai, dao, dbi = dims
    m = dao * dbi
    total = 0
    ds = []
    for i, tau in enumerate(states):
        d = P.hermitian(f"{prefix}{i}", m)
        P.add(f"{prefix}{i}_psd", d >> 0)
        if dao > 1:
            P.add(f"{prefix}{i}_channel", sdp.vanish(d, [dao, dbi], ["traceless", "identity"]))
        total = total + cp.kron(tau, d)
        ds.append(d)
    P.add(f"{prefix}_sum", x == total)
    return ds


def _dc_constraints(P: sdp.ConicProblem, x, dims, level: HierarchyLevel, states=None):
    """Membership of the bipartite operator x in the chosen DC approximation."""
    dims = list(dims)
    method = level.method
    if method in ("PPT_K", "OUTER_POLY_PLUS_PPT"):
        P.add("x_ordered", sdp.vanish(x, dims, sdp.ordered_kinds(3)))
        ext_vars, cons = sdp_ppt(x, dims, level.k)
        P.variables.update(ext_vars)
        for k, c in cons.items():
            P.add(k, c)
    if method in ("INNER", "OUTER_POLY", "OUTER_POLY_PLUS_PPT"):
        els = level.states.elements if states is None else states
        return _dc_terms(P, x, dims, els)
    return []


def sdp_ppt(x, dims, k):
    from .approximations import ppt_k_constraints
    return ppt_k_constraints(x, dims, k, prefix="x")


def _cc_part(rho, dims):
    dai, dao, dbi = dims
    return sdp.embed_identity(rho, [dai, dbi], [dao], [0, 2, 1])


def _primal(w: ProcessMatrix, kind: str, level: HierarchyLevel, states=None):
    dims = list(w.dims)
    dai, dao, dbi = dims
    n = int(np.prod(dims))
    W = w.matrix
    P = sdp.ConicProblem({}, None)
    x = P.hermitian("X", n)
    rho = P.hermitian("rho", dai * dbi)
    P.add("rho_psd", rho >> 0)
    if kind == GENERALIZED:
        om = P.hermitian("Omega", n)
        t = sdp.real_trace(om) / dao
        P.add("omega_psd", om >> 0)
        P.add("omega_ordered", sdp.vanish(om, dims, sdp.ordered_kinds(3)))
        lhs = W - t * W + om
        P.objective = t
    else:
        r = P.scalar("r", nonneg=True)
        lhs = (1 - r) * W + r * white_noise_matrix(w)
        P.objective = r
    P.add("decomposition", lhs == _cc_part(rho, dims) + x)
    ds = _dc_constraints(P, x, dims, level, states)
    return P, ds


# -------------------------------------------------------------- dual builder

def _dual(w: ProcessMatrix, kind: str, level: HierarchyLevel, states=None):
    """Dual program ``min tr(S W)``; the robustness is minus its optimum."""
    dims = list(w.dims)
    dai, dao, dbi = dims
    n = int(np.prod(dims))
    W = w.matrix
    P = sdp.ConicProblem({}, None)
    S = P.hermitian("S", n)
    sw = sdp.inner(W, S)
    P.objective = sw
    comp = sdp.ordered_kinds(3)
    ncomp = sdp.span_size(dims, comp)
    if kind == GENERALIZED:
        c1 = P.variables.setdefault("N_omega", cp.Variable(ncomp, name="N_omega"))
        P.add("omega_dual", (1 + sw) * np.eye(n) - dao * S + sdp.span(c1, dims, comp) >> 0)
    else:
        P.add("white_noise_norm", sdp.real_trace(S) / (dai * dbi) - sw <= 1)
    P.add("cc_dual", sdp.ptrace(S, dims, [1]) >> 0)
    method = level.method
    if method == "PPT_K":
        if level.k != 1:
            raise ValueError("explicit duals are provided for PPT_1 only")
        q = P.hermitian("Q", n)
        c2 = P.variables.setdefault("N_dc", cp.Variable(ncomp, name="N_dc"))
        P.add("q_psd", q >> 0)
        P.add("dc_dual", S - sdp.ptranspose(q, dims, [0]) - sdp.span(c2, dims, comp) >> 0)
    elif method in ("INNER", "OUTER_POLY"):
        els = level.states.elements if states is None else states
        ng = dao * dao - 1
        for i, tau in enumerate(els):
            m_i = sdp.partial_pairing(S, tau, dao * dbi)
            if ng:
                z = P.variables.setdefault(f"Z{i}", cp.Variable(ng, name=f"Z{i}"))
                m_i = m_i + sdp.span(z, [dao, dbi], ["traceless", "identity"])
            P.add(f"term{i}", m_i >> 0)
    else:
        raise ValueError(f"no explicit dual for {method}")
    return P


def _product_basis(dims, kinds) -> np.ndarray:
    out = np.ones((1, 1, 1), dtype=complex)
    for d, k in zip(dims, kinds):
        b = sdp.hermitian_basis(d, k)
        out = np.einsum("aij,bkl->abikjl", out, b).reshape(
            len(out) * len(b), out.shape[1] * d, out.shape[2] * d)
    return out


@dataclass
class StateDual:
    value: float            # min tr(S W); the robustness bound is -value
    S: np.ndarray
    Z: np.ndarray           # (N, dao^2 - 1) coefficients of the traceless AO parts
    relative_gap: float
    decomposition: dict | None = None


def _state_dual(w: ProcessMatrix, kind: str, states: np.ndarray) -> StateDual:
    """The state-set dual assembled directly as a sparse LMI.

    Same program as :func:`_dual` for INNER and OUTER_POLY levels, skipping
    the modeling layer, whose compile time dominates with hundreds of
    states.  S is parametrized by elementary Hermitian coordinates so each
    state's block depends on few of them.
    """
    from .lmi import LMIProblem, elementary_hermitian

    dims = list(w.dims)
    dai, dao, dbi = dims
    n = int(np.prod(dims))
    m = dao * dbi
    W = w.matrix
    E = elementary_hermitian(n)
    ns = len(E)
    span = _product_basis(dims, sdp.ordered_kinds(3)) if kind == GENERALIZED else np.zeros((0, n, n))
    nc = len(span)
    tb = _traceless_basis(dao, dbi)
    ng = len(tb)
    z0 = ns + nc
    prob = LMIProblem(z0 + ng * len(states))
    tr_w = np.real(np.einsum("kij,ji->k", E, W))
    prob.q[:ns] = tr_w
    s_cols = np.arange(ns)
    if kind == GENERALIZED:
        coeffs = tr_w[:, None, None] * np.eye(n) - dao * E
        prob.add_block(np.eye(n, dtype=complex), np.arange(z0), np.concatenate([coeffs, span]))
    else:
        a = np.zeros(prob.nvar)
        a[:ns] = tr_w - np.real(np.einsum("kii->k", E)) / (dai * dbi)
        prob.add_nonneg(a, 1.0)
    tr_ao = np.einsum("kaxbcxd->kabcd", E.reshape(ns, dai, dao, dbi, dai, dao, dbi)).reshape(
        ns, dai * dbi, dai * dbi)
    prob.add_block(np.zeros((dai * dbi,) * 2, dtype=complex), s_cols, tr_ao)
    e4 = E.reshape(ns, dai, m, dai, m)
    zero = np.zeros((m, m), dtype=complex)
    for i, tau in enumerate(states):
        pair = np.einsum("ba,kaxby->kxy", tau, e4)
        keep = np.flatnonzero(np.abs(pair).reshape(ns, -1).max(axis=1) > 0)
        cols = np.concatenate([s_cols[keep], z0 + ng * i + np.arange(ng)])
        prob.add_block(zero, cols, np.concatenate([pair[keep], tb]))
    sol = prob.solve()
    x = sol.x
    S = np.einsum("k,kij->ij", x[:ns], E)
    Z = x[z0:].reshape(len(states), ng)
    # the multipliers of the blocks form the primal decomposition
    first, rho, ds = sol.multipliers[0], sol.multipliers[1], sol.multipliers[2:]
    dec = {"rho": rho, "X": sum(np.kron(tau, d) for tau, d in zip(states, ds)),
           "terms": [(tau, d) for tau, d in zip(states, ds) if np.real(np.trace(d)) > 1e-9]}
    if kind == GENERALIZED:
        dec["Omega"] = dao * first
    dec["weight"] = float(np.real(np.trace(first))) if kind == GENERALIZED else float(first)
    return StateDual(float(np.dot(prob.q, x)), S, Z, sol.relative_gap, dec)


# ------------------------------------------------------------------- pricing

def _pairings(S: np.ndarray, states: np.ndarray, dai: int, m: int) -> np.ndarray:
    """``tr_AI[(tau_i ⊗ 1) S]`` for every tau_i, shape (N, m, m)."""
    s4 = S.reshape(dai, m, dai, m)
    return np.einsum("nba,axby->nxy", states, s4)


def _lambda_min(mats: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(mats)[:, 0]


def channel_cone_margin(M: np.ndarray, dao: int, dbi: int, z0=None) -> tuple[float, np.ndarray]:
    """``max_Z lambda_min(M + Z ⊗ 1_BI)`` over traceless Hermitian Z on AO.

    M lies in the dual of the channel cone iff the margin is nonnegative.
    """
    basis = np.array([np.kron(g, np.eye(dbi)) for g in sdp.hermitian_basis(dao, "traceless")])
    if len(basis) == 0:
        return float(np.linalg.eigvalsh(M)[0]), np.zeros(0)

    def neg(z):
        ev, vec = np.linalg.eigh(M + np.einsum("k,kij->ij", z, basis))
        u = vec[:, 0]
        grad = np.real(np.einsum("i,kij,j->k", u.conj(), basis, u))
        return -ev[0], -grad

    z0 = np.zeros(len(basis)) if z0 is None else np.asarray(z0, dtype=float)
    res = minimize(neg, z0, jac=True, method="L-BFGS-B", options={"maxiter": 500})
    best_z, best = res.x, -res.fun
    res2 = minimize(lambda z: neg(z)[0], best_z, method="Nelder-Mead",
                    options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
    if -res2.fun > best:
        best_z, best = res2.x, -res2.fun
    return float(best), best_z


def _traceless_basis(dao: int, dbi: int) -> np.ndarray:
    return np.array([np.kron(g, np.eye(dbi)) for g in sdp.hermitian_basis(dao, "traceless")])


def price_states(S: np.ndarray, states: np.ndarray, dims, anchors=None,
                 tol: float = PRICING_TOL, iters: int = 300) -> np.ndarray:
    """Margins of every state's dual constraint under S (negative = violated).

    The margin of a state is ``max_Z lambda_min(M + Z ⊗ 1)``.  Every value
    returned is attained by an explicit Z, so a nonnegative margin is a
    certificate; a negative one may be pessimistic.  States are screened with
    ``Z = 0``, then with Z blended from ``anchors`` (pairs of states already
    in the program and their optimal Z; the margin is concave in (tau, Z) so
    neighbours give good guesses), then by a batched smoothed ascent.
    """
    dai, dao, dbi = dims
    m = dao * dbi
    mats = _pairings(S, states, dai, m)
    scale = max(1.0, float(np.abs(S).max()))
    basis = _traceless_basis(dao, dbi)
    margins = _lambda_min(mats)
    if not len(basis):
        return margins / scale
    best_z = np.zeros((len(states), len(basis)))
    todo = np.flatnonzero(margins < -tol * scale)
    if len(todo) and anchors is not None:
        a_states, a_z = anchors
        for g in _interpolated_z(states[todo], a_states, a_z):
            cand = _lambda_min(mats[todo] + np.einsum("nk,kij->nij", g, basis))
            better = cand > margins[todo]
            margins[todo[better]] = cand[better]
            best_z[todo[better]] = g[better]
    todo = np.flatnonzero(margins < -tol * scale)
    if len(todo):
        val, z = batched_margin(mats[todo], basis, best_z[todo], iters=iters)
        margins[todo] = np.maximum(margins[todo], val)
        best_z[todo] = z
    # the ascent stalls on degenerate eigenvalues; settle what is left exactly
    todo = np.flatnonzero(margins < -tol * scale)
    for chunk in np.array_split(todo, max(1, len(todo) // EXACT_MARGIN_CHUNK)):
        if len(chunk):
            margins[chunk] = np.maximum(margins[chunk], exact_margins(mats[chunk], basis))
    return margins / scale


def exact_margins(mats: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """``max_z lambda_min(M_n + sum_k z_k B_k)`` for every M_n, as one block-separable LMI.

    The returned values are exact eigenvalues at the optimal z, so they stay
    attained lower bounds even when the solve is inaccurate.
    """
    from .lmi import LMIProblem

    n, m, _ = mats.shape
    k = len(basis)
    prob = LMIProblem(n * (k + 1))
    prob.q[::k + 1] = -1.0
    coeffs = np.concatenate([-np.eye(m, dtype=complex)[None], basis.astype(complex)])
    for i in range(n):
        prob.add_block(mats[i].astype(complex), i * (k + 1) + np.arange(k + 1), coeffs)
    try:
        sol = prob.solve()
    except sdp.SolverError:
        return np.full(n, -np.inf)
    z = sol.x.reshape(n, k + 1)[:, 1:]
    return _lambda_min(mats + np.einsum("nk,kij->nij", z, basis))


def batched_margin(mats: np.ndarray, basis: np.ndarray, z0: np.ndarray, iters: int = 300,
                   tol: float = 0.0):
    """Maximize ``lambda_min(M_n + sum_k z_nk B_k)`` for a stack of matrices at once.

    Ascent on the soft minimum ``-log(sum exp(-beta lambda))/beta`` with a
    per-matrix step that grows on success and shrinks on failure; beta
    increases so the soft minimum approaches the true one.  A matrix leaves
    the batch once it is certified (value above ``-tol``) or its step has
    collapsed.  Returns the best exact ``lambda_min`` seen and its Z.
    """
    n, m, _ = mats.shape
    k = len(basis)
    bflat = basis.transpose(0, 2, 1).reshape(k, m * m)
    scale = max(1e-12, float(np.abs(mats).max()))

    def evaluate(idx, z, beta):
        ev, vec = np.linalg.eigh(mats[idx] + (z @ basis.reshape(k, -1)).reshape(-1, m, m))
        e = np.exp(-beta[:, None] * (ev - ev[:, :1]))
        tot = e.sum(axis=1)
        soft = ev[:, 0] - np.log(tot) / beta
        # gradient of the soft minimum: tr(B_k R) with R = sum_j w_j |u_j><u_j|
        r = (vec * (e / tot[:, None])[:, None, :]) @ vec.conj().transpose(0, 2, 1)
        grad = np.real(r.reshape(len(idx), -1) @ bflat.T)
        return ev[:, 0], soft, grad

    z = np.array(z0, dtype=float)
    step = np.full(n, 0.1 * scale)
    beta = np.full(n, 20.0 / scale)
    all_idx = np.arange(n)
    best, soft, grad = evaluate(all_idx, z, beta)
    best_z = z.copy()
    for it in range(iters):
        live = np.flatnonzero((best < -tol) & (step > 1e-9 * scale))
        if not len(live):
            break
        if it and it % 50 == 0:
            beta[live] *= 4
            _, soft[live], grad[live] = evaluate(live, z[live], beta[live])
        norm = np.linalg.norm(grad[live], axis=1) + 1e-300
        trial = z[live] + (step[live] / norm)[:, None] * grad[live]
        t_exact, t_soft, t_grad = evaluate(live, trial, beta[live])
        ok = t_soft > soft[live]
        acc = live[ok]
        z[acc], soft[acc], grad[acc] = trial[ok], t_soft[ok], t_grad[ok]
        step[live] = np.where(ok, step[live] * 1.5, step[live] * 0.5)
        imp = t_exact > best[live]
        best[live[imp]] = t_exact[imp]
        best_z[live[imp]] = trial[imp]
    return best, best_z


def _interpolated_z(targets: np.ndarray, a_states: np.ndarray, a_z: np.ndarray, k: int = 4):
    """Candidate Z per target: nearest anchor's Z and a nonnegative blend of k neighbours."""
    t = targets.reshape(len(targets), -1)
    a = a_states.reshape(len(a_states), -1)
    dist = (np.linalg.norm(t, axis=1)[:, None] ** 2 + np.linalg.norm(a, axis=1)[None] ** 2
            - 2 * np.real(t.conj() @ a.T))
    k = min(k, len(a))
    near = np.argsort(dist, axis=1)[:, :k]
    nearest = a_z[near[:, 0]]
    blend = np.empty_like(nearest)
    for n in range(len(t)):
        basis = a[near[n]]
        coef, *_ = np.linalg.lstsq(np.vstack([basis.T, np.ones(k)]),
                                   np.concatenate([t[n], [1]]), rcond=None)
        coef = np.clip(np.real(coef), 0, None)
        coef = coef / coef.sum() if coef.sum() > 0 else np.eye(k)[0]
        blend[n] = coef @ a_z[near[n]]
    return [nearest, blend]


# ---------------------------------------------------------------- robustness

def _is_tripartite(w) -> bool:
    return isinstance(w, ProcessMatrix) and w.tripartite


def robustness(w: ProcessMatrix, kind: str, level: HierarchyLevel, *, backend: str = "auto",
               column_generation: bool | None = None, verbose: bool = False) -> RobustnessReport:
    """Robustness of ``w`` against the chosen DC approximation.

    Outer levels give lower bounds, the inner level an upper bound.  Large
    state sets are handled by column generation: the dual is solved on an
    active subset and every remaining state is priced until none is violated.
    """
    kind = normalize_kind(kind)
    if _is_tripartite(w):
        return _tripartite_robustness(w, kind, level, backend=backend)
    uses_states = level.method in ("INNER", "OUTER_POLY")
    if column_generation is None:
        column_generation = uses_states and len(level.states) > COLUMN_GENERATION_THRESHOLD
    if column_generation and not uses_states:
        raise ValueError("column generation applies to state-set levels only")
    extra = {}
    states = None
    if column_generation:
        active, extra, dual = _column_generation(w, kind, level, backend=backend, verbose=verbose)
        states = level.states.elements[active]
        if dual.decomposition is not None:
            return _report_from_dual(w, kind, level, dual, extra)
    P, ds = _primal(w, kind, level, states)
    sol = sdp.solve(P, backend=backend)
    value = float(sol.value)
    decomposition = {
        "rho": sol.primal["rho"],
        "X": sol.primal["X"],
    }
    if kind == GENERALIZED:
        decomposition["Omega"] = sol.primal["Omega"]
    if ds:
        used = states if states is not None else level.states.elements
        weights = [float(np.real(np.trace(sol.primal[f"D{i}"]))) for i in range(len(ds))]
        decomposition["terms"] = [(used[i], sol.primal[f"D{i}"]) for i in range(len(ds))
                                  if weights[i] > 1e-9]
    residuals = sol.residuals()
    residuals.update(extra)
    residuals["backend"] = sol.backend_status
    return RobustnessReport(w.name, kind, level.tag(), level.direction, value, residuals,
                            None, decomposition)


def _column_generation(w, kind, level, backend="auto", verbose=False, max_rounds=100,
                       initial: int = 96, batch: int = 48):
    """Grow the active state set until every state passes pricing."""
    dims = w.dims
    els = level.states.elements
    n_all = len(els)
    active = list(np.unique(np.linspace(0, n_all - 1, min(initial, n_all)).astype(int)))
    for rnd in range(max_rounds):
        dual = _restricted_dual(w, kind, level, els[active], backend)
        S = dual.S
        anchors = (els[active], dual.Z) if dual.Z.shape[1] else None
        margins = price_states(S, els, dims, anchors)
        margins[active] = np.maximum(margins[active], 0)
        bad = np.flatnonzero(margins < -PRICING_TOL)
        worst = float(margins.min())
        if verbose:
            print(f"round {rnd}: value {-dual.value:.6f} active {len(active)} "
                  f"violated {len(bad)} worst {worst:.2e}")
        if len(bad) == 0:
            info = {"active_states": len(active), "rounds": rnd + 1, "pricing_margin": worst,
                    "dual_value": -dual.value}
            return np.array(active), info, dual
        order = bad[np.argsort(margins[bad])]
        chosen = _diverse(order, els, batch)
        active = sorted(set(active) | set(chosen))
    raise sdp.SolverError("column generation did not converge")


def _report_from_dual(w, kind, level, dual: StateDual, extra: dict) -> RobustnessReport:
    """Report built from the multipliers of the direct dual; no second solve."""
    dec = dict(dual.decomposition)
    t = dec.pop("weight")
    noise = dec["Omega"] if kind == GENERALIZED else t * white_noise_matrix(w)
    dai, dao, dbi = w.dims
    cc = np.einsum("abcd,xy->axbcyd", dec["rho"].reshape(dai, dbi, dai, dbi),
                   np.eye(dao)).reshape(w.matrix.shape)
    residual = float(np.abs((1 - t) * w.matrix + noise - cc - dec["X"]).max())
    residuals = {"primal_objective": t, "dual_objective": -dual.value,
                 "relative_gap": dual.relative_gap, "decomposition_residual": residual,
                 "backend": "clarabel:direct"}
    residuals.update(extra)
    return RobustnessReport(w.name, kind, level.tag(), level.direction, -dual.value, residuals,
                            None, dec)


def _restricted_dual(w, kind, level, states, backend="auto") -> StateDual:
    """State-set dual on a subset of states, direct LMI first, modeling layer as fallback."""
    if backend in ("auto", "clarabel"):
        try:
            return _state_dual(w, kind, states)
        except sdp.SolverError:
            if backend == "clarabel":
                raise
    sol = sdp.solve(_dual(w, kind, level, states), backend=backend)
    ng = w.d_ao ** 2 - 1
    z = np.array([sol.primal[f"Z{i}"] for i in range(len(states))]) if ng else \
        np.zeros((len(states), 0))
    return StateDual(float(sol.value), sol.primal["S"], z.reshape(len(states), ng),
                     float(sol.residuals().get("relative_gap", 0.0)))


def _diverse(order, els, batch):
    """Pick up to ``batch`` violated states, skipping near-duplicates."""
    chosen = []
    for i in order:
        if all(np.abs(els[i] - els[j]).max() > 1e-3 for j in chosen):
            chosen.append(i)
        if len(chosen) >= batch:
            break
    return chosen


def dual_witness(w: ProcessMatrix, kind: str, level: HierarchyLevel, *, backend: str = "auto"
                 ) -> tuple[Witness, RobustnessReport]:
    """Optimal witness from the explicit dual; ``-tr(S W)`` is the robustness."""
    kind = normalize_kind(kind)
    if _is_tripartite(w):
        raise ValueError("witness extraction is implemented for bipartite processes")
    states = None
    extra = {}
    if level.method in ("INNER", "OUTER_POLY") and len(level.states) > COLUMN_GENERATION_THRESHOLD:
        active, extra, dual = _column_generation(w, kind, level, backend=backend)
        wit = Witness(hermitian_part(dual.S), w.dims, kind, "DUAL_SOLUTION",
                      f"{w.name}:{level.tag()}")
        extra["relative_gap"] = dual.relative_gap
        return wit, RobustnessReport(w.name, kind, level.tag(), level.direction, -dual.value,
                                     extra, wit, None)
    P = _dual(w, kind, level, states)
    sol = sdp.solve(P, backend=backend)
    S = hermitian_part(sol.primal["S"])
    wit = Witness(S, w.dims, kind, "DUAL_SOLUTION", f"{w.name}:{level.tag()}")
    residuals = sol.residuals()
    residuals.update(extra)
    residuals["backend"] = sol.backend_status
    rep = RobustnessReport(w.name, kind, level.tag(), level.direction, -float(sol.value),
                           residuals, wit, None)
    return wit, rep


# ------------------------------------------------------------- tripartite

def _comb_constraints(P, x, dims, name):
    P.add(f"{name}_psd", x >> 0)
    P.add(f"{name}_comb_c", sdp.vanish(x, dims, ("full", "full", "full", "traceless", "identity")))
    P.add(f"{name}_comb_b", sdp.vanish(x, dims, ("full", "traceless", "identity", "identity",
                                                  "identity")))


def _tripartite_robustness(w: ProcessMatrix, kind: str, level: HierarchyLevel, backend="auto"):
    """CC and DC parts are tripartite combs whose AB marginals are CC or DC."""
    dims = list(w.dims)
    dai, dao, dbi, dbo, dci = dims
    n = int(np.prod(dims))
    W = w.matrix
    P = sdp.ConicProblem({}, None)
    c = P.hermitian("C", n)
    x = P.hermitian("X", n)
    rho = P.hermitian("rho", dai * dbi)
    _comb_constraints(P, c, dims, "cc")
    _comb_constraints(P, x, dims, "dc")
    P.add("rho_psd", rho >> 0)
    P.add("cc_marginal", sdp.ptrace(c, dims, [3, 4]) == _cc_part(rho, dims[:3]))
    xr = sdp.ptrace(x, dims, [3, 4])
    if level.method == "PPT_K":
        if level.k != 1:
            raise ValueError("tripartite robustness supports PPT_1 only")
        P.add("dc_ppt", sdp.ptranspose(xr, dims[:3], [0]) >> 0)
    elif level.method in ("INNER", "OUTER_POLY"):
        _dc_terms(P, xr, dims[:3], level.states.elements)
    else:
        raise ValueError(f"unsupported tripartite level {level.method}")
    if kind == GENERALIZED:
        om = P.hermitian("Omega", n)
        _comb_constraints(P, om, dims, "omega")
        t = sdp.real_trace(om) / (dao * dbo)
        lhs = W - t * W + om
        P.objective = t
    else:
        r = P.scalar("r", nonneg=True)
        lhs = (1 - r) * W + r * white_noise_matrix(w)
        P.objective = r
    P.add("decomposition", lhs == c + x)
    sol = sdp.solve(P, backend=backend)
    residuals = sol.residuals()
    residuals["backend"] = sol.backend_status
    return RobustnessReport(w.name, kind, level.tag(), level.direction, float(sol.value),
                            residuals, None, None)


# --------------------------------------------------------- witness checks

@dataclass(frozen=True)
class SufficientCheck:
    passed: bool
    trace_ao_lambda_min: float
    transpose_ai_lambda_min: float

    def as_dict(self) -> dict:
        return {"passed": self.passed, "trace_ao_lambda_min": self.trace_ao_lambda_min,
                "transpose_ai_lambda_min": self.transpose_ai_lambda_min}


def verify_witness_sufficient(S, dims=None, tol: float = 1e-9) -> SufficientCheck:
    """``tr_AO S >= 0`` and ``S^{T_AI} >= 0``, which together make S a witness."""
    if isinstance(S, Witness):
        dims, S = S.dims, S.S
    if dims is None:
        raise ValueError("dims are required for a raw matrix")
    op = operator(S, *zip(BIPARTITE, dims))
    ok1, l1 = psd_check(partial_trace(op, ["AO"]), tol)
    ok2, l2 = psd_check(partial_transpose(op, ["AI"]), tol)
    return SufficientCheck(ok1 and ok2, l1, l2)


def analytic_witnesses(name: str, d: int = 2) -> Witness:
    """Closed-form witnesses: ``1 - W_ddd2`` (DDD2) and ``1 - 2 W_222`` (W222)."""
    key = name.upper()
    if key in ("DDD2", "W_DDD2"):
        w = canonical_process("W_DDD2", d=d)
        s = np.eye(w.matrix.shape[0]) - w.matrix
        return Witness(s, w.dims, GENERALIZED, "SUFFICIENT_CONDITIONS", f"1-W_ddd2(d={d})")
    if key in ("W222", "W_222"):
        w = canonical_process("W_222")
        s = np.eye(8) - 2 * w.matrix
        return Witness(s, w.dims, GENERALIZED, "SUFFICIENT_CONDITIONS", "1-2W_222")
    raise ValueError(f"unknown analytic witness {name!r}")


# ------------------------------------------------------------ analytic bounds

def generalized_cap(dims) -> float:
    """Every process has generalized robustness at most ``1 - 1/d_AI``."""
    return 1 - 1 / dims[0]


def white_noise_cap(dims) -> float:
    """Every process has white-noise robustness at most ``1 - 1/(d_AI d_AO d_BI + 1)``."""
    dai, dao, dbi = dims[:3]
    return 1 - 1 / (dai * dao * dbi + 1)


def ddd2_white_noise_lower(d: int) -> float:
    """Lower bound ``d^3 / ((d^2 + 1)(d + 1))`` on the white-noise robustness of W_ddd2."""
    return d ** 3 / ((d * d + 1) * (d + 1))


def analytic_bounds(w_or_dims, kind: str | None = None) -> dict:
    """Scalar caps and, for a concrete process, their constructive certificates.

    The generalized certificate is the punctured clock twirl on AI, for which
    ``(1/d) W + (1 - 1/d) Omega`` is the full clock twirl of W, a DC process.
    The white-noise certificate combines the depolarized W (weight
    ``q = (d_AI + 1)/(d_AI d_AO d_BI + 1)``) with a DC completion, which
    equals W mixed with white noise at weight ``r = 1 - 1/(d_AI d_AO d_BI + 1)``.
    """
    if isinstance(w_or_dims, ProcessMatrix):
        w = w_or_dims
        dims = w.dims[:3]
    else:
        w = None
        dims = tuple(w_or_dims)
    dai, dao, dbi = dims
    out = {"dims": list(dims), "generalized_cap": generalized_cap(dims),
           "white_noise_cap": white_noise_cap(dims)}
    if w is not None and not w.tripartite:
        omega = noise_maps(w, "CLOCK_TWIRL_PUNCTURED")
        mixture = w.matrix / dai + (1 - 1 / dai) * omega.matrix
        out["generalized_certificate"] = {"omega": omega, "mixture": mixture}
        # q weights the depolarized process against a second DC process; together
        # they equal W mixed with white noise at weight 1 - 1/(d_AI d_AO d_BI + 1)
        q = (dai + 1) / (dai * dao * dbi + 1)
        r = white_noise_cap(dims)
        out["white_noise_certificate"] = {"q": q, "r": r,
                                          "mixture": (1 - r) * w.matrix + r * white_noise_matrix(w)}
    if w is not None and (w.name in ("W_222^2", "W_333^2") or w.name.startswith("W_ddd2")):
        out["ddd2_white_noise_lower"] = ddd2_white_noise_lower(dai)
    if kind is not None:
        kind = normalize_kind(kind)
        out["cap"] = out["generalized_cap"] if kind == GENERALIZED else out["white_noise_cap"]
    return out


def is_dc_by_inner(w: ProcessMatrix, states: StateSet, tol: float = 1e-6) -> bool:
    """Membership of w in the inner DC set, as a feasibility program."""
    dims = list(w.dims)
    P = sdp.ConicProblem({}, cp.Constant(0))
    n = int(np.prod(dims))
    x = cp.Constant(w.matrix)
    _dc_terms(P, x, dims, states.elements)
    sol = sdp.solve(P, raise_on_failure=False)
    return sol.optimal
