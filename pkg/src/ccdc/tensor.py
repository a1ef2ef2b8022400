"""Dense multilinear algebra over labeled tensor factors.

Every operator carries a :class:`SystemLayout`, an ordered list of
``(label, dim)`` factors.  The first factor is the most significant index
of the computational basis, so ``kron(a, b)`` lives on ``[a-factors,
b-factors]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

ATOL = 1e-9

#: Causal roles of a bipartite (or tripartite) ordered process.
ROLES = ("AI", "AO", "BI", "BO", "CI")


class LayoutError(ValueError):
    """Raised when labels or dimensions of operands do not fit together."""


@dataclass(frozen=True)
class SystemLayout:
    factors: tuple[tuple[str, int], ...]

    def __post_init__(self):
        factors = tuple((str(lab), int(dim)) for lab, dim in self.factors)
        labels = [lab for lab, _ in factors]
        if len(set(labels)) != len(labels):
            raise LayoutError(f"duplicate labels in layout: {labels}")
        if any(dim < 1 for _, dim in factors):
            raise LayoutError(f"dimensions must be positive: {factors}")
        object.__setattr__(self, "factors", factors)

    @classmethod
    def of(cls, *factors: tuple[str, int]) -> "SystemLayout":
        return cls(tuple(factors))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lab for lab, _ in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.factors)

    @property
    def total(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.factors else 1

    def dim(self, label: str) -> int:
        return self.dims[self.index(label)]

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LayoutError(f"unknown label {label!r}; layout has {self.labels}") from None

    def dim_of(self, labels: Iterable[str]) -> int:
        return int(np.prod([self.dim(lab) for lab in labels], dtype=np.int64))

    def without(self, labels: Iterable[str]) -> "SystemLayout":
        drop = set(labels)
        return SystemLayout(tuple(f for f in self.factors if f[0] not in drop))

    def __contains__(self, label) -> bool:
        return label in self.labels

    def __len__(self) -> int:
        return len(self.factors)


@dataclass(frozen=True, eq=False)
class LabeledOperator:
    layout: SystemLayout
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        n = self.layout.total
        if m.shape != (n, n):
            raise LayoutError(f"matrix shape {m.shape} does not match layout total {n}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls, layout: SystemLayout) -> "LabeledOperator":
        return cls(layout, np.eye(layout.total))

    @property
    def labels(self) -> tuple[str, ...]:
        return self.layout.labels

    @property
    def dims(self) -> tuple[int, ...]:
        return self.layout.dims

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def is_hermitian(self, tol: float = ATOL) -> bool:
        return hermiticity_error(self.matrix) <= tol

    def eigvalsh(self) -> np.ndarray:
        return np.linalg.eigvalsh(hermitian_part(self.matrix))

    def allclose(self, other: "LabeledOperator", tol: float = ATOL) -> bool:
        other = permute_subsystems(other, self.labels) if other.labels != self.labels else other
        return max_abs(self.matrix - other.matrix) <= tol

    def with_matrix(self, matrix) -> "LabeledOperator":
        return LabeledOperator(self.layout, matrix)

    def relabel(self, mapping: Mapping[str, str]) -> "LabeledOperator":
        layout = SystemLayout(tuple((mapping.get(lab, lab), d) for lab, d in self.layout.factors))
        return LabeledOperator(layout, self.matrix)

    def __add__(self, other: "LabeledOperator") -> "LabeledOperator":
        other = _aligned(other, self.labels)
        return LabeledOperator(self.layout, self.matrix + other.matrix)

    def __sub__(self, other: "LabeledOperator") -> "LabeledOperator":
        other = _aligned(other, self.labels)
        return LabeledOperator(self.layout, self.matrix - other.matrix)

    def __mul__(self, scalar) -> "LabeledOperator":
        return LabeledOperator(self.layout, self.matrix * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> "LabeledOperator":
        return LabeledOperator(self.layout, self.matrix / scalar)

    def __matmul__(self, other: "LabeledOperator") -> "LabeledOperator":
        other = _aligned(other, self.labels)
        return LabeledOperator(self.layout, self.matrix @ other.matrix)

    def dag(self) -> "LabeledOperator":
        return LabeledOperator(self.layout, self.matrix.conj().T)

    def __repr__(self) -> str:
        return f"LabeledOperator({list(self.layout.factors)})"


def _aligned(op: LabeledOperator, labels: Sequence[str]) -> LabeledOperator:
    if op.labels == tuple(labels):
        return op
    if set(op.labels) != set(labels):
        raise LayoutError(f"operands live on different systems: {op.labels} vs {tuple(labels)}")
    return permute_subsystems(op, labels)


def hermitian_part(m: np.ndarray) -> np.ndarray:
    return (m + m.conj().T) / 2


def hermiticity_error(m: np.ndarray) -> float:
    return max_abs(m - m.conj().T)


def max_abs(m) -> float:
    m = np.asarray(m)
    return float(np.abs(m).max()) if m.size else 0.0


def operator(matrix, *factors: tuple[str, int]) -> LabeledOperator:
    """Shorthand: ``operator(m, ("A", 2), ("B", 2))``."""
    return LabeledOperator(SystemLayout(tuple(factors)), matrix)


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1
    return v


def projector(vec) -> np.ndarray:
    v = np.asarray(vec, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())


def tensor(ops: Sequence[LabeledOperator]) -> LabeledOperator:
    if not ops:
        raise LayoutError("tensor of an empty operand list")
    factors = tuple(f for op in ops for f in op.layout.factors)
    layout = SystemLayout(factors)  # raises on duplicate labels
    m = ops[0].matrix
    for op in ops[1:]:
        m = np.kron(m, op.matrix)
    return LabeledOperator(layout, m)


def _as_tensor(op: LabeledOperator) -> np.ndarray:
    dims = op.dims
    return op.matrix.reshape(dims + dims)


def _from_tensor(t: np.ndarray, layout: SystemLayout) -> LabeledOperator:
    n = layout.total
    return LabeledOperator(layout, t.reshape(n, n))


def permute_subsystems(op: LabeledOperator, order: Sequence[str]) -> LabeledOperator:
    order = tuple(order)
    if sorted(order) != sorted(op.labels) or len(order) != len(op.labels):
        raise LayoutError(f"{order} is not a permutation of {op.labels}")
    perm = [op.layout.index(lab) for lab in order]
    n = len(perm)
    t = _as_tensor(op).transpose(perm + [p + n for p in perm])
    layout = SystemLayout(tuple(op.layout.factors[p] for p in perm))
    return _from_tensor(t, layout)


def _check_labels(op: LabeledOperator, labels: Iterable[str]) -> list[str]:
    labels = list(labels)
    for lab in labels:
        op.layout.index(lab)
    return labels


def partial_trace(op: LabeledOperator, over: Iterable[str]) -> LabeledOperator:
    over = _check_labels(op, over)
    if not over:
        return op
    n = len(op.dims)
    keep = [i for i, lab in enumerate(op.labels) if lab not in over]
    # einsum subscripts: traced axes share the same index in row and column
    row = list(range(n))
    col = [i if op.labels[i] in over else n + i for i in range(n)]
    out = keep + [n + i for i in keep]
    t = np.einsum(_as_tensor(op), row + col, out)
    return _from_tensor(t, op.layout.without(over))


def partial_transpose(op: LabeledOperator, on: Iterable[str]) -> LabeledOperator:
    on = _check_labels(op, on)
    n = len(op.dims)
    perm = list(range(2 * n))
    for lab in on:
        i = op.layout.index(lab)
        perm[i], perm[n + i] = n + i, i
    return _from_tensor(_as_tensor(op).transpose(perm), op.layout)


def trace_replace(op: LabeledOperator, on: Iterable[str]) -> LabeledOperator:
    """``tr_X(op) ⊗ 1_X / d_X`` with the factors kept in their original order."""
    on = _check_labels(op, on)
    if not on:
        return op
    reduced = partial_trace(op, on)
    d = op.layout.dim_of(on)
    ident = LabeledOperator(SystemLayout(tuple(f for f in op.layout.factors if f[0] in on)),
                            np.eye(d) / d)
    return permute_subsystems(tensor([reduced, ident]), op.labels)


def link_product(x: LabeledOperator, y: LabeledOperator) -> LabeledOperator:
    """Link product ``x * y``: transpose-and-trace over the shared labels.

    The result lives on x's private factors followed by y's private factors.
    """
    shared = [lab for lab in x.labels if lab in y.labels]
    for lab in shared:
        if x.layout.dim(lab) != y.layout.dim(lab):
            raise LayoutError(f"shared label {lab!r} has dims {x.layout.dim(lab)} and {y.layout.dim(lab)}")
    if not shared:
        return tensor([x, y])
    nx, ny = len(x.labels), len(y.labels)
    # index ids: x rows 0..nx-1, x cols nx..2nx-1; y gets fresh ids unless shared
    x_row = list(range(nx))
    x_col = list(range(nx, 2 * nx))
    y_row, y_col = [], []
    fresh = 2 * nx
    for lab in y.labels:
        if lab in shared:
            i = x.layout.index(lab)
            # (x * y)[a c; a' c'] = sum_{s,s'} x[a s'; a' s] y[s' c; s c']
            y_row.append(x_row[i])
            y_col.append(x_col[i])
        else:
            y_row.append(fresh)
            y_col.append(fresh + 1)
            fresh += 2
    x_only = [i for i, lab in enumerate(x.labels) if lab not in shared]
    y_only = [j for j, lab in enumerate(y.labels) if lab not in shared]
    out = ([x_row[i] for i in x_only] + [y_row[j] for j in y_only]
           + [x_col[i] for i in x_only] + [y_col[j] for j in y_only])
    t = np.einsum(_as_tensor(x), x_row + x_col, _as_tensor(y), y_row + y_col, out)
    layout = SystemLayout(tuple(x.layout.factors[i] for i in x_only)
                          + tuple(y.layout.factors[j] for j in y_only))
    if not layout.factors:
        return LabeledOperator(layout, np.asarray(t).reshape(1, 1))
    return _from_tensor(t, layout)


def apply_channel(choi: LabeledOperator, rho: LabeledOperator) -> LabeledOperator:
    """Evaluate ``tr_in[(rho^T ⊗ 1) choi]``; the channel input is rho's layout."""
    for lab, d in rho.layout.factors:
        if lab not in choi.layout or choi.layout.dim(lab) != d:
            raise LayoutError(f"channel input does not contain factor {(lab, d)}")
    return link_product(choi, rho)


def choi_of_unitary(u: np.ndarray, inputs: Sequence[tuple[str, int]],
                    outputs: Sequence[tuple[str, int]]) -> LabeledOperator:
    """Rank-one Choi operator ``|U>><<U|`` with ``|U>> = sum_i |i> ⊗ U|i>``."""
    u = np.asarray(u, dtype=complex)
    din = int(np.prod([d for _, d in inputs]))
    dout = int(np.prod([d for _, d in outputs]))
    if u.shape != (dout, din):
        raise LayoutError(f"map shape {u.shape} does not match {dout}x{din}")
    vec = np.zeros(din * dout, dtype=complex)
    for i in range(din):
        vec[i * dout:(i + 1) * dout] = u[:, i]
    return LabeledOperator(SystemLayout(tuple(inputs) + tuple(outputs)), projector(vec))


def choi_of_map(fn, inputs: Sequence[tuple[str, int]],
                outputs: Sequence[tuple[str, int]]) -> LabeledOperator:
    """Choi operator ``sum_ij |i><j| ⊗ fn(|i><j|)`` of a linear map on matrices."""
    din = int(np.prod([d for _, d in inputs]))
    dout = int(np.prod([d for _, d in outputs]))
    m = np.zeros((din * dout, din * dout), dtype=complex)
    for i in range(din):
        for j in range(din):
            e = np.zeros((din, din), dtype=complex)
            e[i, j] = 1
            m[i * dout:(i + 1) * dout, j * dout:(j + 1) * dout] = fn(e)
    return LabeledOperator(SystemLayout(tuple(inputs) + tuple(outputs)), m)


def _role_labels(roles: Mapping[str, Sequence[str] | str], role: str) -> tuple[str, ...]:
    labs = roles.get(role)
    if labs is None:
        raise LayoutError(f"missing role assignment for {role}")
    return (labs,) if isinstance(labs, str) else tuple(labs)


def project_ordered(op: LabeledOperator, roles: Mapping[str, Sequence[str] | str] | None = None
                    ) -> LabeledOperator:
    """Projector onto the span of bipartite ordered processes A -> B.

    ``L(W) = W + _{AO BI}(W) - _{BI}(W)``.  ``roles`` maps "AI"/"AO"/"BI" to
    labels; by default the role names are the labels themselves.
    """
    roles = roles or {r: r for r in ("AI", "AO", "BI") if r in op.layout}
    ao = _role_labels(roles, "AO")
    bi = _role_labels(roles, "BI")
    _role_labels(roles, "AI")
    return op + trace_replace(op, ao + bi) - trace_replace(op, bi)


def psd_check(op: LabeledOperator | np.ndarray, tol: float = ATOL) -> tuple[bool, float]:
    """Return ``(is_psd, lambda_min)`` with the threshold ``-tol * max(1, lambda_max)``."""
    m = op.matrix if isinstance(op, LabeledOperator) else np.asarray(op)
    scale = max(1.0, max_abs(m))
    if hermiticity_error(m) > tol * scale:
        raise ValueError(f"operator is not Hermitian (error {hermiticity_error(m):.2e})")
    ev = np.linalg.eigvalsh(hermitian_part(m))
    lmin, lmax = float(ev[0]), float(ev[-1])
    return lmin >= -tol * max(1.0, lmax), lmin


def fuse(op: LabeledOperator, labels: Sequence[str], new_label: str) -> LabeledOperator:
    """Merge ``labels`` (most significant first) into one factor named ``new_label``.

    The fused factor takes the position of the first merged label.
    """
    labels = _check_labels(op, labels)
    first = op.labels.index(labels[0])
    rest = [lab for lab in op.labels if lab not in labels]
    pos = sum(1 for lab in op.labels[:first] if lab not in labels)
    order = rest[:pos] + labels + rest[pos:]
    p = permute_subsystems(op, order)
    factors = ([f for f in p.layout.factors[:pos]]
               + [(new_label, op.layout.dim_of(labels))]
               + [f for f in p.layout.factors[pos + len(labels):]])
    return LabeledOperator(SystemLayout(tuple(factors)), p.matrix)
