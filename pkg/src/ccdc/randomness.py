"""Seeded Haar and Hilbert-Schmidt random primitives.

All draws go through ``numpy.random.Generator`` (PCG64), so a fixed seed
gives bit-identical output within one numpy build.
"""

from __future__ import annotations

import numpy as np


def rng_from(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _ginibre(rng, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def haar_unitary(d: int, seed=None) -> np.ndarray:
    """QR of a complex Gaussian matrix with the diagonal phases of R removed."""
    if d < 1:
        raise ValueError(f"dimension must be positive, got {d}")
    q, r = np.linalg.qr(_ginibre(rng_from(seed), (d, d)))
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def haar_state(d: int, seed=None) -> np.ndarray:
    """Normalized complex Gaussian vector."""
    if d < 1:
        raise ValueError(f"dimension must be positive, got {d}")
    v = _ginibre(rng_from(seed), d)
    return v / np.linalg.norm(v)


def hs_density(d: int, seed=None) -> np.ndarray:
    """Hilbert-Schmidt random state: marginal of a Haar pure state on d x d."""
    if d < 1:
        raise ValueError(f"dimension must be positive, got {d}")
    g = _ginibre(rng_from(seed), (d, d))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_primitives(kind: str, d: int, seed=None) -> np.ndarray:
    """Dispatch on HAAR_UNITARY, HAAR_PURE_STATE or HS_DENSITY."""
    key = kind.upper()
    if key == "HAAR_UNITARY":
        return haar_unitary(d, seed)
    if key == "HAAR_PURE_STATE":
        return haar_state(d, seed)
    if key == "HS_DENSITY":
        return hs_density(d, seed)
    raise ValueError(f"unknown primitive {kind!r}")


def random_channel_choi(d_in: int, d_out: int, seed=None) -> np.ndarray:
    """Choi operator on in ⊗ out of a channel from a Haar isometry into out ⊗ env."""
    rng = rng_from(seed)
    env = d_in
    u = haar_unitary(d_out * env * d_in, rng)[:, :d_in]   # isometry in -> out ⊗ env ⊗ in-pad
    v = u[: d_out * env * d_in].reshape(d_out, env * d_in, d_in)
    choi = np.zeros((d_in * d_out,) * 2, dtype=complex)
    for k in range(env * d_in):
        kraus = v[:, k, :]
        vec = np.zeros(d_in * d_out, dtype=complex)
        for i in range(d_in):
            vec[i * d_out:(i + 1) * d_out] = kraus[:, i]
        choi += np.outer(vec, vec.conj())
    return choi
