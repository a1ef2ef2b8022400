"""Direct sparse assembly of linear matrix inequalities for Clarabel.

Used where a program has hundreds of small PSD blocks and the generic
modeling layer would spend most of its time compiling.  Complex Hermitian
blocks are embedded as real symmetric ``[[Re, -Im], [Im, Re]]`` matrices.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import clarabel
import numpy as np
import scipy.sparse as sp

from .sdp import CLARABEL_TOL, SolverError

SQRT2 = np.sqrt(2.0)


def _svec_index(n: int):
    """Upper triangle, column-major, as Clarabel's PSD triangle cone expects."""
    rows, cols = [], []
    for c in range(n):
        for r in range(c + 1):
            rows.append(r)
            cols.append(c)
    rows, cols = np.array(rows), np.array(cols)
    weight = np.where(rows == cols, 1.0, SQRT2)
    return rows, cols, weight


_SVEC_CACHE: dict[int, tuple] = {}


def svec_embedded(mats: np.ndarray) -> np.ndarray:
    """svec of the real embedding of each Hermitian matrix in a stack."""
    m = mats.shape[-1]
    rows, cols, weight = _SVEC_CACHE.setdefault(2 * m, _svec_index(2 * m))
    re, im = mats.real, mats.imag
    emb = np.block([[re, -im], [im, re]])
    return emb[..., rows, cols] * weight


def elementary_hermitian(n: int) -> np.ndarray:
    """Real coordinates of an n x n Hermitian matrix: diagonal, real and imaginary off-diagonal parts."""
    out = []
    for i in range(n):
        e = np.zeros((n, n), dtype=complex)
        e[i, i] = 1
        out.append(e)
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = e[j, i] = 1
            out.append(e)
            e = np.zeros((n, n), dtype=complex)
            e[i, j], e[j, i] = -1j, 1j
            out.append(e)
    return np.array(out)


def smat_embedded(v: np.ndarray, m: int) -> np.ndarray:
    """Hermitian m x m matrix D with ``tr(A D) = <svec(emb(A)), v>`` for Hermitian A."""
    rows, cols, weight = _SVEC_CACHE.setdefault(2 * m, _svec_index(2 * m))
    y = np.zeros((2 * m, 2 * m))
    y[rows, cols] = v / weight
    y[cols, rows] = v / weight
    return (y[:m, :m] + y[m:, m:]) + 1j * (y[m:, :m] - y[:m, m:])


@dataclass
class LMISolution:
    status: str
    x: np.ndarray
    primal_objective: float
    dual_objective: float
    iterations: int
    solve_time: float
    multipliers: list   # one Hermitian matrix per PSD block, a scalar per scalar row

    @property
    def relative_gap(self) -> float:
        return abs(self.primal_objective - self.dual_objective) / (1 + abs(self.primal_objective))


class LMIProblem:
    """Minimize ``q.x`` subject to Hermitian blocks ``A0 + sum_j x_j A_j >= 0``
    and scalar rows ``a.x + b >= 0``."""

    def __init__(self, nvar: int):
        self.nvar = nvar
        self.q = np.zeros(nvar)
        self._rows, self._cols, self._vals, self._b = [], [], [], []
        self._cones = []
        self._offset = 0

    def _append(self, coeff: np.ndarray, cols: np.ndarray, const: np.ndarray):
        # coeff: (len(cols), L); the cone slack is const + coeff.T @ x[cols]
        k, length = coeff.shape
        nz = np.nonzero(np.abs(coeff) > 1e-15)
        self._rows.append(self._offset + nz[1])
        self._cols.append(cols[nz[0]])
        self._vals.append(-coeff[nz])
        self._b.append(const)
        self._offset += length

    def add_block(self, a0: np.ndarray, cols, coeffs: np.ndarray):
        """PSD block ``a0 + sum_k x[cols[k]] coeffs[k]`` (complex Hermitian m x m)."""
        cols = np.asarray(cols, dtype=int)
        m = a0.shape[0]
        self._append(svec_embedded(np.asarray(coeffs)), cols, svec_embedded(np.asarray(a0)))
        self._cones.append(("psd", 2 * m))

    def add_nonneg(self, a: np.ndarray, b: float):
        """``a.x + b >= 0``."""
        cols = np.flatnonzero(a)
        self._append(a[cols][:, None], cols, np.array([b]))
        self._cones.append(("nonneg", 1))

    def solve(self, tol=None) -> LMISolution:
        rows = np.concatenate(self._rows)
        cols = np.concatenate(self._cols)
        vals = np.concatenate(self._vals)
        A = sp.csc_matrix((vals, (rows, cols)), shape=(self._offset, self.nvar))
        b = np.concatenate(self._b)
        cones = [clarabel.NonnegativeConeT(1) if kind == "nonneg" else clarabel.PSDTriangleConeT(size)
                 for kind, size in self._cones]
        settings = clarabel.DefaultSettings()
        settings.verbose = False
        for key, val in dict(CLARABEL_TOL, **(tol or {})).items():
            setattr(settings, key, val)
        t0 = time.perf_counter()
        P = sp.csc_matrix((self.nvar, self.nvar))
        raw = clarabel.DefaultSolver(P, self.q, A, b, cones, settings).solve()
        status = str(raw.status)
        if status not in ("Solved", "AlmostSolved"):
            raise SolverError(f"solver returned clarabel:{status}")
        z = np.array(raw.z)
        mult, pos = [], 0
        for kind, size in self._cones:
            if kind == "nonneg":
                mult.append(float(z[pos]))
                pos += 1
            else:
                length = size * (size + 1) // 2
                mult.append(smat_embedded(z[pos:pos + length], size // 2))
                pos += length
        return LMISolution(status, np.array(raw.x), float(raw.obj_val), float(raw.obj_val_dual),
                           int(raw.iterations), time.perf_counter() - t0, mult)
