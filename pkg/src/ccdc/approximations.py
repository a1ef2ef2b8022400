"""Inner and outer approximations of the direct-cause cone.

Three families bracket the set of direct-cause processes: PPT symmetric
extensions on k copies of AI (outer), finite sets of pure states on AI
(inner) and finite sets of trace-one operators whose hull contains every
state (outer).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import permutations
from math import comb, factorial
from typing import Sequence

import cvxpy as cp
import numpy as np
from scipy.optimize import linprog, minimize

from . import sdp
from .randomness import haar_state, rng_from
from .tensor import LabeledOperator, SystemLayout, projector

PURE_STATES = "PURE_STATES"
OUTER_OPERATORS = "OUTER_OPERATORS"
DENSE_BUDGET = 1024

PAULIS = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)


# ------------------------------------------------------------------ state sets

@dataclass(frozen=True, eq=False)
class StateSet:
    """Trace-one operators on AI, either pure states or outer-polytope vertices."""

    elements: np.ndarray
    kind: str = PURE_STATES
    certified: bool = False
    seed: int | None = None
    source: str = ""

    def __post_init__(self):
        els = np.array(self.elements, dtype=complex)
        if els.ndim != 3 or els.shape[1] != els.shape[2]:
            raise ValueError("elements must have shape (N, d, d)")
        if len(els) == 0:
            raise ValueError("empty state set")
        tr = np.einsum("nii->n", els)
        if np.abs(tr - 1).max() > 1e-8:
            raise ValueError("every element must have unit trace")
        if self.kind not in (PURE_STATES, OUTER_OPERATORS):
            raise ValueError(f"unknown state-set kind {self.kind!r}")
        els.setflags(write=False)
        object.__setattr__(self, "elements", els)

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def d(self) -> int:
        return self.elements.shape[1]

    def subset(self, idx) -> "StateSet":
        return StateSet(self.elements[np.asarray(idx)], self.kind, self.certified, self.seed,
                        f"{self.source}[subset]")

    def to_json(self) -> str:
        return json.dumps({
            "kind": self.kind, "certified": self.certified, "seed": self.seed,
            "source": self.source, "dim": self.d,
            "elements": [[[[z.real, z.imag] for z in row] for row in m] for m in self.elements],
        })

    @classmethod
    def from_json(cls, text: str) -> "StateSet":
        obj = json.loads(text)
        els = np.array([[[complex(a, b) for a, b in row] for row in m] for m in obj["elements"]])
        return cls(els, obj.get("kind", PURE_STATES), bool(obj.get("certified", False)),
                   obj.get("seed"), obj.get("source", ""))


@dataclass(frozen=True)
class HierarchyLevel:
    """One member of a DC approximation family.

    ``method`` is PPT_K, INNER, OUTER_POLY or OUTER_POLY_PLUS_PPT.
    """

    method: str
    k: int = 1
    states: StateSet | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.method not in ("PPT_K", "INNER", "OUTER_POLY", "OUTER_POLY_PLUS_PPT"):
            raise ValueError(f"unknown hierarchy method {self.method!r}")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.method != "PPT_K" and self.states is None:
            raise ValueError(f"{self.method} needs a state set")
        if self.method == "INNER" and self.states.kind != PURE_STATES:
            raise ValueError("the inner level needs pure states")

    @classmethod
    def ppt(cls, k: int = 1) -> "HierarchyLevel":
        return cls("PPT_K", k)

    @classmethod
    def inner(cls, states: StateSet) -> "HierarchyLevel":
        return cls("INNER", 1, states)

    @classmethod
    def outer(cls, states: StateSet, k: int | None = None) -> "HierarchyLevel":
        return cls("OUTER_POLY", 1, states) if k is None else cls("OUTER_POLY_PLUS_PPT", k, states)

    @property
    def direction(self) -> str:
        return "UPPER" if self.method == "INNER" else "LOWER"

    @property
    def n_states(self) -> int | None:
        return None if self.states is None else len(self.states)

    def tag(self) -> str:
        if self.method == "PPT_K":
            return f"PPT_{self.k}"
        label = {"INNER": "INNER", "OUTER_POLY": "OUTER_POLY",
                 "OUTER_POLY_PLUS_PPT": f"OUTER_POLY+PPT_{self.k}"}[self.method]
        src = f":{self.states.source}" if self.states.source else ""
        return f"{label}(N={len(self.states)}{src})"


# ------------------------------------------------------------ PPT extensions

def bose_symmetric_projector(d: int, k: int) -> LabeledOperator:
    """Projector onto the symmetric subspace of k copies of C^d."""
    if d < 2 or k < 1:
        raise ValueError("need d >= 2 and k >= 1")
    n = d ** k
    if n > DENSE_BUDGET:
        raise ValueError(f"symmetric projector of dimension {n} exceeds the dense budget")
    p = np.zeros((n, n))
    idx = np.arange(n).reshape((d,) * k)
    for perm in permutations(range(k)):
        src = idx.transpose(perm).reshape(-1)
        p[np.arange(n), src] += 1
    p /= factorial(k)
    factors = tuple((f"AI{i + 1}", d) for i in range(k))
    return LabeledOperator(SystemLayout(factors), p)


def symmetric_rank(d: int, k: int) -> int:
    return comb(d + k - 1, k)


def ppt_k_constraints(x, dims: Sequence[int], k: int, prefix: str = "ext"):
    """Extension variable and constraints for a PPT k-symmetric extension of ``x``.

    ``x`` lives on AI ⊗ rest with ``dims[0]`` the AI dimension.  Returns
    ``(variables, constraints)``: the extension is PSD, Bose symmetric on
    the AI copies, reduces to ``x`` and has PSD partial transposes on the
    first j copies for every j = 1..k.  For k = 1 this is PSD + PPT on AI.
    """
    dims = list(dims)
    dai, rest = dims[0], dims[1:]
    if k == 1:
        return {}, {f"{prefix}_psd": x >> 0, f"{prefix}_ppt1": sdp.ptranspose(x, dims, [0]) >> 0}
    edims = [dai] * k + rest
    n = int(np.prod(edims))
    if n > 4 * DENSE_BUDGET:
        raise ValueError(f"extension of dimension {n} exceeds the dense budget")
    e = cp.Variable((n, n), hermitian=True, name=f"{prefix}_E")
    psym = bose_symmetric_projector(dai, k).matrix
    big = np.kron(psym, np.eye(int(np.prod(rest))))
    cons = {
        f"{prefix}_psd": e >> 0,
        f"{prefix}_bose": big @ e == e,
        f"{prefix}_marginal": sdp.ptrace(e, edims, list(range(1, k))) == x,
    }
    for j in range(1, k + 1):
        cons[f"{prefix}_ppt{j}"] = sdp.ptranspose(e, edims, list(range(j))) >> 0
    return {f"{prefix}_E": e}, cons


# -------------------------------------------------------------- qubit family

def bloch_to_state(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return (np.eye(2) + np.einsum("k,kij->ij", v, PAULIS)) / 2


def bloch_vector(rho) -> np.ndarray:
    return np.real(np.einsum("ij,kji->k", np.asarray(rho), PAULIS))


def polyhedron_family(n: int) -> np.ndarray:
    """The ``2 n^2`` unit vectors of the latitude-longitude family (n odd).

    Rings at polar angles ``(2a + 1) pi / 2n`` (a = 0..n-1), each carrying
    2n points at azimuths ``b pi / n``.  The inscribed radius is at least
    ``cos^2(pi / 2n)``.
    """
    if n < 1 or n % 2 == 0:
        raise ValueError(f"the family needs an odd n, got {n}")
    theta = (2 * np.arange(n) + 1) * np.pi / (2 * n)
    phi = np.arange(2 * n) * np.pi / n
    t, p = np.meshgrid(theta, phi, indexing="ij")
    v = np.stack([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)], axis=-1)
    return v.reshape(-1, 3)


def family_radius(n: int) -> float:
    return float(np.cos(np.pi / (2 * n)) ** 2)


def build_inner_set(d: int, spec) -> StateSet:
    """Pure-state set from ``("RANDOM", N, seed)`` or ``("POLYHEDRON_FAMILY", n)``."""
    kind = spec[0].upper()
    if kind == "RANDOM":
        _, n_states, seed = spec
        rng = rng_from(seed)
        els = np.array([projector(haar_state(d, rng)) for _ in range(n_states)])
        return StateSet(els, PURE_STATES, seed=seed, source=f"random:{n_states}")
    if kind == "POLYHEDRON_FAMILY":
        n = spec[1]
        if d != 2:
            raise ValueError("the polyhedron family is defined for qubits only")
        vs = polyhedron_family(n)
        return StateSet(np.array([bloch_to_state(v) for v in vs]), PURE_STATES, source=f"family:{n}")
    raise ValueError(f"unknown inner-set spec {spec!r}")


# ------------------------------------------------------------------- inradius

def _fibonacci_sphere(m: int) -> np.ndarray:
    i = np.arange(m) + 0.5
    z = 1 - 2 * i / m
    r = np.sqrt(1 - z * z)
    phi = np.pi * (1 + 5 ** 0.5) * i
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def _support(vertices, u):
    u = u / np.linalg.norm(u)
    return float(np.max(vertices @ u))


def inradius(vertices, samples: int = 20000, refine: int = 24) -> float:
    """Radius of the largest origin-centred ball inside the hull of ``vertices``.

    Minimizes the support function ``h(u) = max_i <u, v_i>`` over unit u by
    dense direction sampling followed by Nelder-Mead refinement from the
    best samples.
    """
    v = np.asarray(vertices, dtype=float)
    if v.ndim != 2 or v.shape[1] != 3 or np.linalg.matrix_rank(v) < 3:
        raise ValueError("vertices must span three dimensions")
    dirs = _fibonacci_sphere(samples)
    chunk = max(1, int(2e7 // len(v)))
    h = np.concatenate([np.max(dirs[i:i + chunk] @ v.T, axis=1) for i in range(0, samples, chunk)])
    if h.min() <= 0:
        raise ValueError("hull does not contain the origin")
    best = float(h.min())
    for j in np.argsort(h)[:refine]:
        res = minimize(lambda u: _support(v, u), dirs[j], method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
        best = min(best, float(res.fun))
    return best


def build_outer_set_qubit(n: int, radius: float | None = None) -> StateSet:
    """Family vertices scaled by ``1 / r_in`` so their hull contains the Bloch ball."""
    if n < 3 or n % 2 == 0:
        raise ValueError(f"the outer family needs odd n >= 3, got {n}")
    vs = polyhedron_family(n)
    r_in = inradius(vs) if radius is None else float(radius)
    certified = r_in >= family_radius(n) - 1e-12
    r = min(r_in, 1.0)
    els = np.array([bloch_to_state(v / r) for v in vs])
    return StateSet(els, OUTER_OPERATORS, certified=certified, source=f"outer-family:{n}")


# --------------------------------------------------------- shrinking factor

def _coords(mats: np.ndarray) -> np.ndarray:
    """Real coordinates of Hermitian matrices in the full Hermitian basis."""
    basis = sdp.hermitian_basis(mats.shape[-1])
    return np.real(np.einsum("bij,nji->nb", basis, mats))


def hull_membership(states: StateSet | np.ndarray, target, tol: float = 1e-8):
    """Linear feasibility ``target = sum_i p_i rho_i`` with p a distribution.

    Returns the weights, or None when infeasible.
    """
    els = states.elements if isinstance(states, StateSet) else np.asarray(states)
    a = _coords(els).T
    b = _coords(np.asarray(target)[None])[0]
    res = linprog(np.zeros(len(els)), A_eq=a, b_eq=b, bounds=(0, None), method="highs",
                  options={"primal_feasibility_tolerance": tol})
    if res.status != 0:
        return None
    if np.abs(a @ res.x - b).max() > 10 * tol:
        return None
    return res.x


def shrinking_factor(states: StateSet, probes: Sequence[np.ndarray], resolution: float = 1e-4
                     ) -> tuple[float, list[float]]:
    """Largest eta with every ``eta rho + (1 - eta) 1/d`` inside the hull of ``states``.

    Bisection per probe; returns the minimum and the per-probe values.
    """
    d = states.d
    mixed = np.eye(d) / d
    if hull_membership(states, mixed) is None:
        raise ValueError("the maximally mixed state is outside the hull")
    per = []
    for rho in probes:
        lo, hi = 0.0, 1.0
        if hull_membership(states, rho) is not None:
            per.append(1.0)
            continue
        while hi - lo > resolution:
            mid = (lo + hi) / 2
            if hull_membership(states, mid * rho + (1 - mid) * mixed) is not None:
                lo = mid
            else:
                hi = mid
        per.append(lo)
    eta = min(per)
    if eta < resolution:
        raise ValueError("no feasible shrinking factor above the resolution")
    return eta, per


def outer_from_shrinking(states: StateSet, eta: float) -> StateSet:
    """``(1/eta) rho_i + (1 - 1/eta) 1/d`` for every pure state in the set."""
    d = states.d
    els = states.elements / eta + (1 - 1 / eta) * np.eye(d)[None] / d
    return StateSet(els, OUTER_OPERATORS, certified=True, seed=states.seed,
                    source=f"{states.source}/eta={eta:.4f}")
