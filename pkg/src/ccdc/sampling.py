"""Random ordered processes and the see-saw search for the most robust process.

Three samplers are provided:

M1  project a Hilbert-Schmidt random state onto the ordered span, shift by
    its smallest eigenvalue and renormalize
M2  a Haar random state on AI ⊗ aux linked with a traced Haar random unitary
    ``AO ⊗ aux -> BI ⊗ aux'`` (needs ``d_AI d_AO / d_BI`` integral)
M3  a Haar random state on AI ⊗ aux linked with the channel obtained by
    normalizing a random state on AO ⊗ aux ⊗ BI by its marginal
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from . import sdp
from .approximations import HierarchyLevel
from .processes import BIPARTITE, ProcessMatrix
from .randomness import haar_state, haar_unitary, hs_density, random_primitives, rng_from
from .robustness import (
    GENERALIZED,
    RobustnessReport,
    Witness,
    dual_witness,
    normalize_kind,
)
from .tensor import (
    LabeledOperator,
    SystemLayout,
    choi_of_unitary,
    hermitian_part,
    link_product,
    operator,
    partial_trace,
    permute_subsystems,
    project_ordered,
    projector,
)

__all__ = ["random_primitives", "SamplerSpec", "sample_process", "max_violation", "seesaw",
           "SeesawTrace"]

METHODS = ("M1", "M2", "M3")
DEFAULT_EPS = 1e-4
MAX_ITER = 100


@dataclass(frozen=True)
class SamplerSpec:
    method: str
    dims: tuple[int, int, int]
    seed: int | None = None

    def __post_init__(self):
        m = self.method.upper()
        if m not in METHODS:
            raise ValueError(f"unknown sampler {self.method!r}")
        object.__setattr__(self, "method", m)
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or min(dims) < 1:
            raise ValueError(f"dims must be three positive integers, got {self.dims}")
        object.__setattr__(self, "dims", dims)
        dai, dao, dbi = dims
        if m == "M2" and (dai * dao) % dbi:
            raise ValueError(f"M2 needs d_AI d_AO / d_BI integral, got {dims}")

    @property
    def aux_out(self) -> int:
        """Dimension of the discarded output of the M2 unitary."""
        dai, dao, dbi = self.dims
        return dao * dai // dbi


def _state_on(psi: np.ndarray, dai: int) -> LabeledOperator:
    return LabeledOperator(SystemLayout((("AI", dai), ("aux", dai))), projector(psi))


def _finish(op: LabeledOperator, name: str) -> ProcessMatrix:
    op = permute_subsystems(op, BIPARTITE)
    m = hermitian_part(op.matrix)
    return ProcessMatrix(op.with_matrix(m), {r: r for r in BIPARTITE}, name)


def _m1(spec, rng) -> ProcessMatrix:
    dai, dao, dbi = spec.dims
    n = dai * dao * dbi
    rho = hs_density(n, rng)
    wbar = project_ordered(operator(rho, *zip(BIPARTITE, spec.dims))).matrix
    wbar = hermitian_part(wbar)
    lam = np.linalg.eigvalsh(wbar)[0]
    shifted = wbar - lam * np.eye(n)
    w = dao * shifted / np.trace(shifted).real
    return ProcessMatrix.from_matrix(w, spec.dims, f"M1(seed={spec.seed})")


def _m2(spec, rng) -> ProcessMatrix:
    dai, dao, dbi = spec.dims
    psi = haar_state(dai * dai, rng)
    u = haar_unitary(dao * dai, rng)
    choi = choi_of_unitary(u, [("AO", dao), ("aux", dai)], [("BI", dbi), ("auxp", spec.aux_out)])
    d = partial_trace(choi, ["auxp"])
    return _finish(link_product(_state_on(psi, dai), d), f"M2(seed={spec.seed})")


def normalized_channel(rho: np.ndarray, d_in: int, d_out: int, tol: float = 1e-12) -> np.ndarray:
    """``(sigma^{-1/2} ⊗ 1) rho (sigma^{-1/2} ⊗ 1)`` with ``sigma = tr_out rho``.

    On the kernel of sigma the inverse square root is undefined; there the
    result is completed with ``P_ker ⊗ 1/d_out`` so the output is always the
    Choi operator of a channel.
    """
    r4 = rho.reshape(d_in, d_out, d_in, d_out)
    sigma = np.einsum("ajbj->ab", r4)
    ev, vec = np.linalg.eigh(hermitian_part(sigma))
    keep = ev > tol * max(1.0, ev.max())
    inv_sqrt = (vec[:, keep] / np.sqrt(ev[keep])) @ vec[:, keep].conj().T
    k = np.kron(inv_sqrt, np.eye(d_out))
    d = k @ rho @ k
    if not keep.all():
        p_ker = vec[:, ~keep] @ vec[:, ~keep].conj().T
        d = d + np.kron(p_ker, np.eye(d_out) / d_out)
    return hermitian_part(d)


def _m3(spec, rng) -> ProcessMatrix:
    dai, dao, dbi = spec.dims
    psi = haar_state(dai * dai, rng)
    rho = hs_density(dao * dai * dbi, rng)
    d = normalized_channel(rho, dao * dai, dbi)
    d_op = LabeledOperator(SystemLayout((("AO", dao), ("aux", dai), ("BI", dbi))), d)
    return _finish(link_product(_state_on(psi, dai), d_op), f"M3(seed={spec.seed})")


def sample_process(spec: SamplerSpec) -> ProcessMatrix:
    """Draw one random ordered process; a fixed seed gives a fixed output."""
    rng = rng_from(spec.seed)
    return {"M1": _m1, "M2": _m2, "M3": _m3}[spec.method](spec, rng)


# ------------------------------------------------------------------ see-saw

def max_violation(S, dims=None, *, backend: str = "auto") -> tuple[ProcessMatrix, float]:
    """Valid ordered process minimizing ``tr(S W)``, with the optimal value."""
    if isinstance(S, Witness):
        dims, S = S.dims, S.S
    dims = list(dims)
    dao = dims[1]
    n = int(np.prod(dims))
    P = sdp.ConicProblem({}, None)
    w = P.hermitian("W", n)
    P.objective = sdp.inner(np.asarray(S), w)
    P.add("psd", w >> 0)
    P.add("ordered", sdp.vanish(w, dims, sdp.ordered_kinds(3)))
    P.add("trace", sdp.real_trace(w) == dao)
    sol = sdp.solve(P, backend=backend)
    # solver output is ordered only to ~1e-8; an off-subspace residue would force
    # the next robustness program to r = 1, so project exactly and then mix in
    # the least white noise that removes negative eigenvalues
    m = project_ordered(operator(hermitian_part(sol.primal["W"]), *zip(BIPARTITE, dims))).matrix
    m = hermitian_part(m) * dao / np.trace(m).real
    lmin = float(np.linalg.eigvalsh(m)[0])
    if lmin < 0:
        c = dao / n
        delta = -lmin / (c - lmin)
        m = (1 - delta) * m + delta * c * np.eye(n)
    return ProcessMatrix.from_matrix(m, tuple(dims), "max_violation"), float(sol.value)


@dataclass(eq=False)
class SeesawTrace:
    dims: tuple[int, int, int]
    kind: str
    eps: float
    iterations: list = field(default_factory=list)   # (W, S, R)
    stopping_reason: str = ""
    initial: str = ""

    @property
    def values(self) -> list[float]:
        return [r for _, _, r in self.iterations]

    @property
    def final_value(self) -> float:
        return max(self.values) if self.values else float("nan")

    @property
    def final_process(self) -> ProcessMatrix | None:
        if not self.iterations:
            return None
        best = int(np.argmax(self.values))
        return self.iterations[best][0]

    def as_dict(self, include_process: bool = True) -> dict:
        out = {"dims": list(self.dims), "kind": self.kind, "eps": self.eps,
               "initial": self.initial, "values": self.values,
               "final_value": self.final_value, "stopping_reason": self.stopping_reason}
        if include_process and self.final_process is not None:
            out["final_process"] = json.loads(self.final_process.to_json())
        return out

    def to_json(self, include_process: bool = True) -> str:
        return json.dumps(self.as_dict(include_process))


def seesaw(dims, kind: str = "WHITE_NOISE", level: HierarchyLevel | None = None,
           eps: float = DEFAULT_EPS, initial=None, max_iter: int = MAX_ITER,
           backend: str = "auto", log=None) -> SeesawTrace:
    """Alternate optimal witnesses and maximally violating processes.

    Starts from ``initial`` (a process or a SamplerSpec, default M1 with
    seed 0) and stops once the robustness gains at most ``eps``.
    """
    kind = normalize_kind(kind)
    level = HierarchyLevel.ppt(1) if level is None else level
    dims = tuple(int(d) for d in dims)
    if initial is None:
        initial = SamplerSpec("M1", dims, 0)
    if isinstance(initial, SamplerSpec):
        w = sample_process(initial)
        label = f"{initial.method}(seed={initial.seed})"
    else:
        w = initial
        label = w.name
    trace = SeesawTrace(dims, kind, eps, initial=label)
    prev = None
    for it in range(max_iter):
        try:
            wit, rep = dual_witness(w, kind, level, backend=backend)
        except sdp.SolverError as exc:
            trace.stopping_reason = f"solver failure: {exc}"
            return trace
        r = rep.value
        trace.iterations.append((w, wit, r))
        if log is not None:
            log(f"iteration {it}: R = {r:.6f}")
        if prev is not None and r - prev <= eps:
            trace.stopping_reason = "converged"
            return trace
        prev = r
        try:
            w, _ = max_violation(wit, backend=backend)
        except sdp.SolverError as exc:
            trace.stopping_reason = f"solver failure: {exc}"
            return trace
    trace.stopping_reason = "iteration cap"
    return trace
