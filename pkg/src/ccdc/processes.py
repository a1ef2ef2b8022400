"""Named states, gates and ordered processes, plus validators and realizations."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .tensor import (
    ATOL,
    LabeledOperator,
    LayoutError,
    SystemLayout,
    choi_of_map,
    choi_of_unitary,
    fuse,
    hermitian_part,
    ket,
    link_product,
    max_abs,
    operator,
    partial_trace,
    permute_subsystems,
    project_ordered,
    projector,
    tensor,
    trace_replace,
)

BIPARTITE = ("AI", "AO", "BI")
TRIPARTITE = ("AI", "AO", "BI", "BO", "CI")

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class ProcessError(ValueError):
    """A component or process violates its defining constraints."""


@dataclass(frozen=True, eq=False)
class ProcessMatrix:
    """An ordered process with one layout factor per causal role.

    The operator is always stored with its factors in role order
    (AI, AO, BI[, BO, CI]); ``roles`` maps each role to its label.
    """

    op: LabeledOperator
    roles: Mapping[str, str] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        roles = dict(self.roles) or {lab: lab for lab in self.op.labels}
        order = TRIPARTITE if "BO" in roles or "CI" in roles else BIPARTITE
        missing = [r for r in order if r not in roles]
        if missing:
            raise LayoutError(f"missing role assignment for {missing}")
        labels = [roles[r] for r in order]
        if sorted(labels) != sorted(self.op.labels):
            raise LayoutError(f"roles {roles} do not cover layout {self.op.labels}")
        op = permute_subsystems(self.op, labels) if tuple(labels) != self.op.labels else self.op
        object.__setattr__(self, "op", op)
        object.__setattr__(self, "roles", {r: roles[r] for r in order})

    @classmethod
    def from_matrix(cls, matrix, dims: Sequence[int], name: str = "") -> "ProcessMatrix":
        order = BIPARTITE if len(dims) == 3 else TRIPARTITE
        return cls(operator(matrix, *zip(order, dims)), {r: r for r in order}, name)

    @property
    def matrix(self) -> np.ndarray:
        return self.op.matrix

    @property
    def dims(self) -> tuple[int, ...]:
        return self.op.dims

    @property
    def tripartite(self) -> bool:
        return len(self.dims) == 5

    def dim(self, role: str) -> int:
        return self.op.layout.dim(self.roles[role])

    @property
    def d_ai(self) -> int:
        return self.dim("AI")

    @property
    def d_ao(self) -> int:
        return self.dim("AO")

    @property
    def d_bi(self) -> int:
        return self.dim("BI")

    def canonical(self) -> LabeledOperator:
        """The operator relabeled so that labels equal role names."""
        return self.op.relabel({lab: r for r, lab in self.roles.items()})

    def __repr__(self) -> str:
        return f"ProcessMatrix({self.name or 'unnamed'}, dims={self.dims})"

    def as_dict(self) -> dict:
        m = self.matrix
        return {"name": self.name, "dims": list(self.dims), "real": m.real.tolist(),
                "imag": m.imag.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.as_dict())

    @classmethod
    def from_dict(cls, obj: dict) -> "ProcessMatrix":
        try:
            dims = [int(d) for d in obj["dims"]]
            m = np.array(obj["real"], dtype=float) + 1j * np.array(obj.get("imag", 0.0), dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ProcessError(f"malformed process record: {exc}") from exc
        if len(dims) not in (3, 5):
            raise ProcessError(f"a process has 3 or 5 factors, got dims {dims}")
        if m.shape != (int(np.prod(dims)),) * 2:
            raise ProcessError(f"matrix shape {m.shape} does not match dims {dims}")
        return cls.from_matrix(m, dims, obj.get("name", ""))

    @classmethod
    def from_json(cls, text: str) -> "ProcessMatrix":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ProcessError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(obj)


@dataclass(frozen=True)
class DCDecomposition:
    """Terms ``(p_i, rho_i, D_i)`` of a direct-cause process ``sum_i p_i rho_i ⊗ D_i``."""

    terms: tuple[tuple[float, np.ndarray, np.ndarray], ...]
    dims: tuple[int, int, int]

    def __post_init__(self):
        terms = tuple((float(p), np.asarray(r, dtype=complex), np.asarray(d, dtype=complex))
                      for p, r, d in self.terms)
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "dims", tuple(int(x) for x in self.dims))


@dataclass(frozen=True)
class Realization:
    """State on AI⊗aux and channel Choi on aux⊗AO⊗BI with ``rho * D = W``."""

    rho: LabeledOperator
    channel: LabeledOperator

    @property
    def d_aux(self) -> int:
        return self.rho.layout.dim("aux")

    def process(self) -> LabeledOperator:
        return permute_subsystems(link_product(self.rho, self.channel), BIPARTITE)


# ---------------------------------------------------------------- states, gates

def max_entangled(d: int, labels: Sequence[str] = ("A", "B")) -> LabeledOperator:
    if d < 2:
        raise ValueError(f"maximally entangled state needs d >= 2, got {d}")
    v = np.eye(d).reshape(-1) / np.sqrt(d)
    return operator(projector(v), (labels[0], d), (labels[1], d))


def clock(d: int) -> np.ndarray:
    w = np.exp(2j * np.pi / d)
    return np.diag(w ** np.arange(d))


def swap(d: int = 2) -> np.ndarray:
    u = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            u[i * d + j, j * d + i] = 1
    return u


_FIXED = {
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "PAULI_X": PAULI["X"],
    "PAULI_Y": PAULI["Y"],
    "PAULI_Z": PAULI["Z"],
}


def canonical_gate(name: str, d: int | None = None) -> np.ndarray:
    """Unitary matrix of a named gate.

    CNOT and the Paulis are qubit gates; SWAP and PARTIAL_SWAP act on two
    d-level systems (default qubits); CLOCK and IDENTITY are single d-level.
    """
    key = name.upper()
    if key in _FIXED:
        if d not in (None, 2, 4 if key == "CNOT" else 2):
            raise ValueError(f"{name} is a fixed-size gate")
        return _FIXED[key].copy()
    if key == "SWAP":
        return swap(d or 2)
    if key == "PARTIAL_SWAP":
        dd = d or 2
        return (np.eye(dd * dd) + 1j * swap(dd)) / np.sqrt(2)
    if key == "CLOCK":
        return clock(d or 2)
    if key == "IDENTITY":
        return np.eye(d or 2, dtype=complex)
    raise ValueError(f"unknown gate {name!r}")


def pauli_string(s: str) -> np.ndarray:
    m = np.ones((1, 1), dtype=complex)
    for ch in s:
        m = np.kron(m, PAULI[ch])
    return m


# --------------------------------------------------------------- named processes

def _bip(op: LabeledOperator, name: str) -> ProcessMatrix:
    return ProcessMatrix(op, {r: r for r in BIPARTITE}, name)


def _ddd2(d: int, closed_form: bool = False) -> LabeledOperator:
    if closed_form:
        cc = max_entangled(d, ("AI", "BI1"))
        ident = choi_of_unitary(np.eye(d), [("AO", d)], [("BI2", d)])
        w = tensor([cc, ident])
    else:
        state = max_entangled(d, ("AI", "aux"))
        ident = choi_of_unitary(np.eye(d * d), [("aux", d), ("AO", d)], [("BI1", d), ("BI2", d)])
        w = link_product(state, ident)
    return permute_subsystems(fuse(w, ["BI1", "BI2"], "BI"), BIPARTITE)


def _traced_circuit(gate: np.ndarray, inputs, outputs) -> LabeledOperator:
    """``tr_aux'[phi+^{AI aux} * |U>><<U|]`` for a two-qubit decoder."""
    state = max_entangled(2, ("AI", "aux"))
    choi = choi_of_unitary(gate, inputs, outputs)
    return permute_subsystems(partial_trace(link_product(state, choi), ["auxp"]), BIPARTITE)


def _w222() -> LabeledOperator:
    # control = aux, target = AO; BI receives the control, aux' the target
    return _traced_circuit(canonical_gate("CNOT"), [("aux", 2), ("AO", 2)], [("BI", 2), ("auxp", 2)])


def ghz_form_w222() -> np.ndarray:
    ghz = projector(ket(0, 8) + ket(7, 8))
    x_ao = np.kron(np.kron(np.eye(2), PAULI["X"]), np.eye(2))
    return (ghz + x_ao @ ghz @ x_ao) / 2


def pauli_form_w222() -> np.ndarray:
    return (pauli_string("III") + pauli_string("ZIZ") + pauli_string("XXX") - pauli_string("YXY")) / 4


def _mrsr() -> LabeledOperator:
    return _traced_circuit(canonical_gate("PARTIAL_SWAP"), [("AO", 2), ("aux", 2)], [("BI", 2), ("auxp", 2)])


def _sep(closed_form: bool = False) -> LabeledOperator:
    k0, k1 = ket(0, 2), ket(1, 2)
    kp, km = (k0 + k1) / np.sqrt(2), (k0 - k1) / np.sqrt(2)
    if closed_form:
        terms = [(k0, k0, k0), (k1, k0, k1), (kp, k1, kp), (km, k1, km)]
        m = sum(np.kron(np.kron(projector(a), projector(b)), projector(c)) for a, b, c in terms) / 2
        return operator(m, ("AI", 2), ("AO", 2), ("BI", 2))
    dec = (np.kron(projector(k0), projector(np.kron(k0, k0)) + projector(np.kron(k1, k1)))
           + np.kron(projector(k1), projector(np.kron(kp, kp)) + projector(np.kron(km, km))))
    channel = operator(dec, ("AO", 2), ("aux", 2), ("BI", 2))
    w = link_product(max_entangled(2, ("AI", "aux")), channel)
    return permute_subsystems(w, BIPARTITE)


def horodecki_state(a: float) -> np.ndarray:
    """The 2x4 bound-entangled family, entangled for 0 < a < 1."""
    if not 0 <= a <= 1:
        raise ValueError(f"parameter a must lie in [0, 1], got {a}")
    b = (1 + a) / 2
    c = np.sqrt(1 - a * a) / 2
    m = np.zeros((8, 8))
    for i in range(8):
        m[i, i] = a
    m[4, 4] = m[7, 7] = b
    m[4, 7] = m[7, 4] = c
    for i in range(3):
        m[i, i + 5] = m[i + 5, i] = a
    return m / (7 * a + 1)


def _fb() -> LabeledOperator:
    """Feix-Brukner process via its circuit: a |+> control picks CC or DC routing."""
    plus = (ket(0, 2) + ket(1, 2)) / np.sqrt(2)
    state = tensor([max_entangled(2, ("AI", "aux")), operator(projector(plus), ("c", 2))])
    # controlled routing on (aux, c, AO) -> (BI, auxp, cp)
    u = np.zeros((8, 8), dtype=complex)
    for aux in range(2):
        for c in range(2):
            for ao in range(2):
                bi, auxp = (aux, ao) if c == 0 else (ao, aux)
                u[(bi * 2 + auxp) * 2 + c, (aux * 2 + c) * 2 + ao] = 1
    da = choi_of_unitary(u, [("aux", 2), ("c", 2), ("AO", 2)], [("BI", 2), ("auxp", 2), ("cp", 2)])
    # (auxp, cp, BO) -> CI1 CI3 CI2 so that CI = CI1 ⊗ CI2 ⊗ CI3
    v = np.zeros((8, 8), dtype=complex)
    for auxp in range(2):
        for cp in range(2):
            for bo in range(2):
                v[(auxp * 2 + bo) * 2 + cp, (auxp * 2 + cp) * 2 + bo] = 1
    db = choi_of_unitary(v, [("auxp", 2), ("cp", 2), ("BO", 2)], [("CI1", 2), ("CI2", 2), ("CI3", 2)])
    w = link_product(link_product(state, da), db)
    return permute_subsystems(fuse(w, ["CI1", "CI2", "CI3"], "CI"), TRIPARTITE)


def fb_vector() -> np.ndarray:
    """``|W_FB>>`` on AI AO BI BO CI1 CI2 CI3 (all qubits), from its closed form."""
    vec = np.zeros(2 ** 7, dtype=complex)
    s = 1 / np.sqrt(2)
    for i in range(2):          # maximally entangled index
        for j in range(2):      # AO identity index
            for k in range(2):  # BO identity index
                # AI BI entangled, AO -> CI1, BO -> CI2, CI3 = 0
                idx1 = [i, j, i, k, j, k, 0]
                # AI CI1 entangled, AO -> BI, BO -> CI2, CI3 = 1
                idx2 = [i, j, j, k, i, k, 1]
                for idx in (idx1, idx2):
                    vec[int("".join(map(str, idx)), 2)] += s * s
    return vec


def canonical_process(name: str, *, d: int = 2, a: float = 0.5, closed_form: bool = False
                      ) -> ProcessMatrix:
    """Build a named process.

    Names (case-insensitive): W_DDD2 (parameter ``d``), W_222, W_MRSR, W_FB,
    W_SEP, W_PPT (parameter ``a``).  Aliases W_222^2 / W_333^2 fix ``d``.
    """
    key = name.upper().replace(" ", "").replace("²", "^2")
    aliases = {"W_222^2": ("W_DDD2", 2), "W_2222": ("W_DDD2", 2), "W_333^2": ("W_DDD2", 3),
               "W_3332": ("W_DDD2", 3)}
    if key in aliases:
        key, d = aliases[key]
    if key == "W_DDD2":
        if d < 2:
            raise ValueError(f"W_ddd2 needs d >= 2, got {d}")
        label = {2: "W_222^2", 3: "W_333^2"}.get(d, f"W_ddd2(d={d})")
        return _bip(_ddd2(d, closed_form), label)
    if key == "W_222":
        op = operator(ghz_form_w222(), *zip(BIPARTITE, (2, 2, 2))) if closed_form else _w222()
        return _bip(op, "W_222")
    if key == "W_MRSR":
        return _bip(_mrsr(), "W_MRSR")
    if key == "W_SEP":
        return _bip(_sep(closed_form), "W_SEP")
    if key == "W_PPT":
        op = operator(2 * horodecki_state(a), ("AI", 2), ("AO", 2), ("BI", 2))
        return _bip(op, "W_PPT" if a == 0.5 else f"W_PPT(a={a})")
    if key == "W_FB":
        if closed_form:
            op = operator(projector(fb_vector()), ("AI", 2), ("AO", 2), ("BI", 2), ("BO", 2), ("CI", 8))
        else:
            op = _fb()
        return ProcessMatrix(op, {r: r for r in TRIPARTITE}, "W_FB")
    raise ValueError(f"unknown process {name!r}")


BUILTINS = ("W_222", "W_222^2", "W_333^2", "W_MRSR", "W_FB", "W_SEP", "W_PPT")


def builtin(name: str) -> ProcessMatrix:
    return canonical_process(name)


# --------------------------------------------------------------------- assembly

def _check_state(rho: np.ndarray, tol: float, what: str):
    rho = np.asarray(rho, dtype=complex)
    if max_abs(rho - rho.conj().T) > tol:
        raise ProcessError(f"{what} is not Hermitian")
    if np.linalg.eigvalsh(hermitian_part(rho))[0] < -tol:
        raise ProcessError(f"{what} is not positive semidefinite")
    if abs(np.trace(rho) - 1) > tol:
        raise ProcessError(f"{what} does not have unit trace")


def _check_channel(choi: np.ndarray, d_in: int, d_out: int, tol: float, what: str):
    choi = np.asarray(choi, dtype=complex)
    if choi.shape != (d_in * d_out,) * 2:
        raise ProcessError(f"{what} has shape {choi.shape}, expected {(d_in * d_out,) * 2}")
    if max_abs(choi - choi.conj().T) > tol or np.linalg.eigvalsh(hermitian_part(choi))[0] < -tol:
        raise ProcessError(f"{what} is not positive semidefinite")
    marg = partial_trace(operator(choi, ("in", d_in), ("out", d_out)), ["out"]).matrix
    if max_abs(marg - np.eye(d_in)) > tol:
        raise ProcessError(f"{what} is not trace preserving (tr_out != 1)")


def assemble(kind: str, *components, tol: float = 1e-8) -> ProcessMatrix:
    """Compose a process from its defining parts.

    ``assemble("MARKOV", rho, D, dims)``, ``assemble("CC", rho_ab, dims)``,
    ``assemble("DC", decomposition)``, ``assemble("CCDC", p, w_cc, w_dc)``.
    ``dims`` is ``(d_ai, d_ao, d_bi)``; D and rho_ab use AO⊗BI / AI⊗BI order.
    """
    kind = kind.upper()
    if kind == "MARKOV":
        rho, d_choi, dims = components
        dai, dao, dbi = dims
        _check_state(rho, tol, "state")
        _check_channel(d_choi, dao, dbi, tol, "channel")
        return ProcessMatrix.from_matrix(np.kron(rho, d_choi), dims, "markov")
    if kind == "CC":
        rho_ab, dims = components
        dai, dao, dbi = dims
        _check_state(rho_ab, tol, "shared state")
        op = tensor([operator(rho_ab, ("AI", dai), ("BI", dbi)), operator(np.eye(dao), ("AO", dao))])
        return ProcessMatrix(op, {r: r for r in BIPARTITE}, "cc")
    if kind == "DC":
        (dec,) = components
        if not dec.terms:
            raise ProcessError("empty decomposition")
        dai, dao, dbi = dec.dims
        ps = np.array([p for p, _, _ in dec.terms])
        if np.any(ps < -tol) or abs(ps.sum() - 1) > tol:
            raise ProcessError("weights must form a probability distribution")
        m = np.zeros((dai * dao * dbi,) * 2, dtype=complex)
        for i, (p, rho, d_choi) in enumerate(dec.terms):
            _check_state(rho, tol, f"state {i}")
            _check_channel(d_choi, dao, dbi, tol, f"channel {i}")
            m += p * np.kron(rho, d_choi)
        return ProcessMatrix.from_matrix(m, dec.dims, "dc")
    if kind == "CCDC":
        p, w_cc, w_dc = components
        if not -tol <= p <= 1 + tol:
            raise ProcessError(f"mixing weight {p} outside [0, 1]")
        m = p * w_cc.matrix + (1 - p) * w_dc.matrix
        return ProcessMatrix.from_matrix(m, w_cc.dims, "ccdc")
    raise ValueError(f"unknown assembly kind {kind!r}")


# ------------------------------------------------------------------- validation

@dataclass(frozen=True)
class OrderedReport:
    """Residuals of both characterizations of an ordered process."""

    lambda_min: float
    trace_residual: float
    projector_residual: float
    marginal_residual: float
    sigma_lambda_min: float
    tol: float

    @property
    def psd(self) -> bool:
        return self.lambda_min >= -self.tol

    @property
    def projector_ok(self) -> bool:
        return self.projector_residual <= self.tol

    @property
    def trace_ok(self) -> bool:
        return self.trace_residual <= self.tol

    @property
    def marginal_ok(self) -> bool:
        return self.marginal_residual <= self.tol and self.sigma_lambda_min >= -self.tol

    @property
    def passed_marginal_form(self) -> bool:
        """``W >= 0`` and ``tr_BI W = sigma ⊗ 1_AO`` with sigma a state."""
        return self.psd and self.marginal_ok and self.trace_ok

    @property
    def passed_projector_form(self) -> bool:
        """``W >= 0``, ``W = L(W)`` and ``tr W = d_AO``."""
        return self.psd and self.projector_ok and self.trace_ok

    @property
    def passed(self) -> bool:
        return self.passed_projector_form and self.passed_marginal_form

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "psd": self.psd,
            "projector": self.projector_ok,
            "trace": self.trace_ok,
            "marginal": self.marginal_ok,
            "lambda_min": self.lambda_min,
            "trace_residual": self.trace_residual,
            "projector_residual": self.projector_residual,
            "marginal_residual": self.marginal_residual,
        }


def _as_canonical(w) -> LabeledOperator:
    if isinstance(w, ProcessMatrix):
        return w.canonical()
    return w


def validate_ordered(w, tol: float = 1e-8) -> OrderedReport:
    op = _as_canonical(w)
    for r in BIPARTITE:
        op.layout.index(r)
    m = op.matrix
    herm = max_abs(m - m.conj().T)
    lmin = float(np.linalg.eigvalsh(hermitian_part(m))[0]) - herm
    dao = op.layout.dim("AO")
    proj = max_abs(project_ordered(op).matrix - m)
    trace_res = abs(np.trace(m) - dao)
    marg = partial_trace(op, ["BI"])
    sigma = partial_trace(marg, ["AO"]) / dao
    expect = permute_subsystems(tensor([sigma, LabeledOperator.identity(SystemLayout.of(("AO", dao)))]),
                                marg.labels)
    marg_res = max_abs(marg.matrix - expect.matrix)
    s_min = float(np.linalg.eigvalsh(hermitian_part(sigma.matrix))[0])
    return OrderedReport(lmin, float(trace_res), proj, marg_res, s_min, tol)


@dataclass(frozen=True)
class TripartiteReport:
    lambda_min: float
    comb_residual_c: float
    comb_residual_b: float
    trace_residual: float
    tol: float
    reduced: LabeledOperator

    @property
    def passed(self) -> bool:
        return (self.lambda_min >= -self.tol and self.comb_residual_c <= self.tol
                and self.comb_residual_b <= self.tol and self.trace_residual <= self.tol)

    def as_dict(self) -> dict:
        return {"passed": self.passed, "lambda_min": self.lambda_min,
                "comb_residual_c": self.comb_residual_c, "comb_residual_b": self.comb_residual_b,
                "trace_residual": self.trace_residual}


def validate_tripartite_ordered(w, tol: float = 1e-8) -> TripartiteReport:
    """Comb conditions for A -> B -> C processes.

    ``tr_CI W = W2 ⊗ 1_BO``, ``tr_BI W2 = sigma ⊗ 1_AO`` and
    ``tr W = d_AO d_BO``; ``reduced`` is ``tr_{BO CI}(W) / d_BO``.
    """
    op = _as_canonical(w)
    for r in TRIPARTITE:
        op.layout.index(r)
    m = op.matrix
    lmin = float(np.linalg.eigvalsh(hermitian_part(m))[0])
    dao, dbo = op.layout.dim("AO"), op.layout.dim("BO")
    tc = partial_trace(op, ["CI"])
    res_c = max_abs((tc - trace_replace(tc, ["BO"])).matrix)
    w2 = partial_trace(tc, ["BO"]) / dbo
    res_b = max_abs((w2 - project_ordered(w2)).matrix)
    trace_res = abs(np.trace(m) - dao * dbo)
    return TripartiteReport(lmin, res_c, res_b, float(trace_res), tol, w2)


def reduced_bipartite(w: ProcessMatrix) -> ProcessMatrix:
    rep = validate_tripartite_ordered(w)
    return ProcessMatrix(rep.reduced, {r: r for r in BIPARTITE}, f"{w.name}|AB")


# ------------------------------------------------------------------ realization

def realization(w: ProcessMatrix, tol: float = 1e-8) -> Realization:
    """Purification-style state and decoder channel reproducing ``w``.

    The auxiliary space has dimension ``rank(sigma)`` and is written in the
    eigenbasis of ``sigma = tr_{AO BI}(W) / d_AO``.
    """
    rep = validate_ordered(w, tol=max(tol, 1e-7))
    if not rep.passed:
        raise ProcessError(f"not a valid ordered process: {rep.as_dict()}")
    op = _as_canonical(w)
    dai, dao, dbi = op.dims
    sigma = partial_trace(op, ["AO", "BI"]).matrix / dao
    evals, vecs = np.linalg.eigh(hermitian_part(sigma))
    keep = evals > tol * max(1.0, evals[-1])
    lam, v = evals[keep], vecs[:, keep]
    r = len(lam)
    k = np.sqrt(lam)[:, None] * v.T                 # aux <- AI, K = Lambda^1/2 V^T
    a = (1 / np.sqrt(lam))[:, None] * v.conj().T    # A = Lambda^-1/2 V^dag
    vec = np.zeros(dai * r, dtype=complex)
    for i in range(dai):
        vec[i * r:(i + 1) * r] = k[:, i]
    rho = operator(projector(vec), ("AI", dai), ("aux", r))
    big = np.kron(a, np.eye(dao * dbi))
    d_choi = hermitian_part(big @ op.matrix @ big.conj().T)
    channel = operator(d_choi, ("aux", r), ("AO", dao), ("BI", dbi))
    return Realization(rho, channel)


def dc_to_no_memory(dec: DCDecomposition) -> Realization:
    """Separable state ``sum_i p_i rho_i ⊗ |i><i|`` plus classically controlled channel."""
    if not dec.terms:
        raise ProcessError("empty decomposition")
    dai, dao, dbi = dec.dims
    n = len(dec.terms)
    rho = np.zeros((dai * n,) * 2, dtype=complex)
    chan = np.zeros((n * dao * dbi,) * 2, dtype=complex)
    for i, (p, r, d_choi) in enumerate(dec.terms):
        _check_state(r, 1e-8, f"state {i}")
        _check_channel(d_choi, dao, dbi, 1e-8, f"channel {i}")
        e = projector(ket(i, n))
        rho += p * np.kron(r, e)
        chan += np.kron(e, d_choi)
    return Realization(operator(rho, ("AI", dai), ("aux", n)),
                       operator(chan, ("aux", n), ("AO", dao), ("BI", dbi)))


# ------------------------------------------------------------------- noise maps

def _on_role(w: ProcessMatrix, role: str, u: np.ndarray) -> np.ndarray:
    dims = w.dims
    idx = list(w.roles).index(role)
    full = np.ones((1, 1))
    for i, d in enumerate(dims):
        full = np.kron(full, u if i == idx else np.eye(d))
    return full @ w.matrix @ full.conj().T


def clock_twirl_choi(d: int) -> LabeledOperator:
    z = clock(d)
    return choi_of_map(lambda x: sum(np.linalg.matrix_power(z, k) @ x @ np.linalg.matrix_power(z, -k)
                                     for k in range(d)) / d, [("in", d)], [("out", d)])


def depolarizing_choi(d: int, eta: float) -> LabeledOperator:
    return choi_of_map(lambda x: (1 - eta) * x + eta * np.trace(x) * np.eye(d) / d,
                       [("in", d)], [("out", d)])


def noise_maps(w: ProcessMatrix, which: str, *, role: str = "AI", eta: float | None = None,
               r: float | None = None) -> ProcessMatrix:
    """Apply a noise map to a process.

    ``which`` is one of CLOCK_TWIRL, CLOCK_TWIRL_PUNCTURED (the twirl without
    its identity term), DEPOLARIZE (needs ``eta``, acts on ``role``) and
    WHITE_MIX (needs ``r``).
    """
    key = which.upper()
    if key in ("CLOCK_TWIRL", "CLOCK_TWIRL_PUNCTURED"):
        d = w.dim(role)
        z = clock(d)
        ks = range(d) if key == "CLOCK_TWIRL" else range(1, d)
        m = sum(_on_role(w, role, np.linalg.matrix_power(z, k)) for k in ks) / len(ks)
        return ProcessMatrix(w.op.with_matrix(m), w.roles, f"{key.lower()}({w.name})")
    if key == "DEPOLARIZE":
        if eta is None or not 0 <= eta <= 1:
            raise ValueError(f"depolarizing strength must lie in [0, 1], got {eta}")
        rep = trace_replace(w.op, [w.roles[role]])
        m = (1 - eta) * w.matrix + eta * rep.matrix
        return ProcessMatrix(w.op.with_matrix(m), w.roles, f"depolarize({w.name})")
    if key == "WHITE_MIX":
        if r is None or not 0 <= r <= 1:
            raise ValueError(f"mixing weight must lie in [0, 1], got {r}")
        m = (1 - r) * w.matrix + r * white_noise_matrix(w)
        return ProcessMatrix(w.op.with_matrix(m), w.roles, f"white_mix({w.name})")
    raise ValueError(f"unknown noise map {which!r}")


def white_noise_matrix(w: ProcessMatrix) -> np.ndarray:
    n = int(np.prod(w.dims))
    norm = n / (w.d_ao * (w.dim("BO") if w.tripartite else 1))
    return np.eye(n) / norm


def white_noise(dims: Sequence[int]) -> ProcessMatrix:
    dai, dao, dbi = dims
    return ProcessMatrix.from_matrix(np.eye(dai * dao * dbi) / (dai * dbi), dims, "white")
