"""Dense complex linear algebra, state metrics and random sampling.

All matrices are numpy complex arrays in row-major tensor order. Logarithms
are base 2 throughout (bit/qubit/ebit units). Randomness comes from a
counter-based Philox generator so that fixed seeds reproduce runs.
"""

from __future__ import annotations

import contextlib
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

DEFAULT_DIM_CAP = 64
DIM_CAP_ENV = "HSRD_DIM_CAP"

# Relative eigenvalue threshold below which support is treated as zero
# (pseudo-inverses, square roots, purification ranks).
SUPPORT_RTOL = 1e-10

_cap_override = None


class DimensionError(ValueError):
    """Operation would exceed the configured total-dimension cap."""


class ShapeError(ValueError):
    """Matrix shape or symmetry requirement violated."""


class NotAStateError(ValueError):
    """Operator is not (sub-normalized) positive semidefinite."""


def dim_cap() -> int:
    """Current total-dimension cap (HSRD_DIM_CAP env var, default 64)."""
    if _cap_override is not None:
        return _cap_override
    return int(os.environ.get(DIM_CAP_ENV, DEFAULT_DIM_CAP))


@contextlib.contextmanager
def cap_override(cap: int):
    """Temporarily raise the dimension cap (protocol internals need headroom)."""
    global _cap_override
    old = _cap_override
    _cap_override = int(cap)
    try:
        yield
    finally:
        _cap_override = old


def rng(seed: int) -> np.random.Generator:
    """Philox (counter-based) generator with a 64-bit seed."""
    return np.random.Generator(np.random.Philox(np.uint64(seed)))


def dagger(m: np.ndarray) -> np.ndarray:
    return m.conj().T


def is_hermitian(m: np.ndarray, tol: float = 1e-10) -> bool:
    return m.shape[0] == m.shape[1] and np.abs(m - dagger(m)).max() <= tol


def hermitize(m: np.ndarray) -> np.ndarray:
    return (m + dagger(m)) / 2


def kron(a: np.ndarray, b: np.ndarray, *rest: np.ndarray) -> np.ndarray:
    """Tensor product with dimension-cap enforcement."""
    mats = (a, b) + rest
    total = 1
    for m in mats:
        total *= m.shape[0]
    if total > dim_cap():
        raise DimensionError(f"kron result dim {total} exceeds cap {dim_cap()}")
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def permute_vector(v: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors of a state vector: new order = old factors at perm."""
    v = np.asarray(v).reshape(tuple(dims))
    return np.transpose(v, axes=tuple(perm)).reshape(-1)


def permute_matrix(m: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors of an operator (rows and columns alike)."""
    k = len(dims)
    dims = tuple(dims)
    full = m.reshape(dims + dims)
    axes = tuple(perm) + tuple(k + p for p in perm)
    new_dims = tuple(dims[p] for p in perm)
    d = int(np.prod(new_dims))
    return np.transpose(full, axes=axes).reshape(d, d)


def partial_trace(m: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Trace out all tensor factors not listed in keep (order preserved)."""
    dims = tuple(dims)
    k = len(dims)
    keep = tuple(keep)
    for i in keep:
        if not 0 <= i < k:
            raise ShapeError(f"keep index {i} out of range for {k} factors")
    traced = [i for i in range(k) if i not in keep]
    full = m.reshape(dims + dims)
    for off, i in enumerate(sorted(traced, reverse=True)):
        n_ax = full.ndim // 2
        full = np.trace(full, axis1=i, axis2=n_ax + i)
    d = int(np.prod([dims[i] for i in keep])) if keep else 1
    return full.reshape(d, d)


@dataclass
class HermEigen:
    """Eigen-decomposition of a Hermitian matrix, eigenvalues descending."""

    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ dagger(self.vectors)


def hermitian_eig(m: np.ndarray, tol: float = 1e-10) -> HermEigen:
    if not is_hermitian(m, tol * max(1.0, np.abs(m).max())):
        raise ShapeError("matrix is not Hermitian within tolerance")
    w, v = np.linalg.eigh(hermitize(m))
    order = np.argsort(w)[::-1]
    return HermEigen(values=w[order], vectors=v[:, order])


def support_eigs(m: np.ndarray) -> HermEigen:
    """Eigen-decomposition restricted to the numerical support."""
    eig = hermitian_eig(m)
    cut = SUPPORT_RTOL * max(abs(eig.values[0]), 1e-300)
    keep = eig.values > cut
    return HermEigen(values=eig.values[keep], vectors=eig.vectors[:, keep])


def sqrtm_psd(m: np.ndarray) -> np.ndarray:
    eig = hermitian_eig(m)
    w = np.sqrt(np.maximum(eig.values, 0.0))
    return (eig.vectors * w) @ dagger(eig.vectors)


def pinv_sqrt_psd(m: np.ndarray) -> np.ndarray:
    """(M^+)^(1/2) with support projection."""
    sup = support_eigs(m)
    return (sup.vectors / np.sqrt(sup.values)) @ dagger(sup.vectors)


def thin_factor(rho: np.ndarray) -> np.ndarray:
    """n x r factor F with rho = F F^dagger, r = numerical rank."""
    sup = support_eigs(rho)
    return sup.vectors * np.sqrt(sup.values)


def trace_norm(m: np.ndarray) -> float:
    """Sum of singular values."""
    return float(np.linalg.svd(m, compute_uv=False).sum())


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    return trace_norm(rho - sigma)


def _check_substate(rho: np.ndarray, tol: float = 1e-9) -> None:
    w = np.linalg.eigvalsh(hermitize(rho))
    if w[0] < -tol:
        raise NotAStateError(f"negative eigenvalue {w[0]:.3e}")
    if w.sum() > 1 + tol:
        raise NotAStateError(f"trace {w.sum():.6f} exceeds 1")


def fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """F(rho, sigma) = || sqrt(rho) sqrt(sigma) ||_1 (root fidelity).

    Evaluated as ||A^+ B||_1 for thin factors rho = A A^+, sigma = B B^+,
    which is the same quantity but much better conditioned near rank
    deficiency than multiplying matrix square roots.
    """
    return trace_norm(dagger(thin_factor(rho)) @ thin_factor(sigma))


def generalized_fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    a = max(0.0, 1.0 - float(np.trace(rho).real))
    b = max(0.0, 1.0 - float(np.trace(sigma).real))
    return min(1.0, fidelity(rho, sigma) + np.sqrt(a * b))


def purified_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    f = generalized_fidelity(rho, sigma)
    return float(np.sqrt(max(0.0, 1.0 - f * f)))


def metrics(rho: np.ndarray, sigma: np.ndarray) -> dict:
    """Trace distance, generalized fidelity and purified distance of two sub-states."""
    _check_substate(rho)
    _check_substate(sigma)
    return {
        "trace_distance": trace_distance(rho, sigma),
        "generalized_fidelity": generalized_fidelity(rho, sigma),
        "purified_distance": purified_distance(rho, sigma),
    }


def purify(rho: np.ndarray, trim: bool = False) -> np.ndarray:
    """Purification on system (x) mirror, Schmidt basis = eigenbasis of rho.

    With trim=True the mirror has dimension rank(rho) instead of dim(rho).
    """
    _check_substate(rho)
    n = rho.shape[0]
    eig = hermitian_eig(rho)
    w = np.maximum(eig.values, 0.0)
    if trim:
        cut = SUPPORT_RTOL * max(w[0], 1e-300)
        r = max(1, int((w > cut).sum()))
    else:
        r = n
    # |psi> = sum_i sqrt(w_i) |v_i> (x) |i>_mirror
    psi = np.zeros(n * r, dtype=complex)
    for i in range(min(r, n)):
        if w[i] <= 0:
            continue
        psi += np.sqrt(w[i]) * np.kron(eig.vectors[:, i], _basis(r, i))
    return psi


def _basis(d: int, i: int) -> np.ndarray:
    e = np.zeros(d, dtype=complex)
    e[i] = 1.0
    return e


def sample_haar_unitary(d: int, gen: np.random.Generator) -> np.ndarray:
    """Haar unitary via QR of a complex Ginibre matrix with phase correction."""
    if d < 1:
        raise DimensionError(f"dimension {d} < 1")
    z = (gen.normal(size=(d, d)) + 1j * gen.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r).copy()
    ph /= np.abs(ph)
    return q * ph


def sample_haar_state(d: int, gen: np.random.Generator) -> np.ndarray:
    if d < 1:
        raise DimensionError(f"dimension {d} < 1")
    v = gen.normal(size=d) + 1j * gen.normal(size=d)
    return v / np.linalg.norm(v)


def overlap_operator(
    psi_a: np.ndarray,
    dims_a: Sequence[int],
    shared_a: Sequence[int],
    psi_b: np.ndarray,
    dims_b: Sequence[int],
    shared_b: Sequence[int],
) -> np.ndarray:
    """Cross-overlap Tr_shared |psi_b><psi_a| as a (compl_b x compl_a) matrix."""
    da = tuple(dims_a)
    db = tuple(dims_b)
    ca = [i for i in range(len(da)) if i not in set(shared_a)]
    cb = [i for i in range(len(db)) if i not in set(shared_b)]
    ds_a = [da[i] for i in shared_a]
    ds_b = [db[i] for i in shared_b]
    if ds_a != ds_b:
        raise ShapeError(f"shared dims differ: {ds_a} vs {ds_b}")
    A = permute_vector(psi_a, da, tuple(shared_a) + tuple(ca)).reshape(
        int(np.prod(ds_a)) if ds_a else 1, -1
    )
    B = permute_vector(psi_b, db, tuple(shared_b) + tuple(cb)).reshape(
        int(np.prod(ds_b)) if ds_b else 1, -1
    )
    # K[j, i] = sum_s B*[s, j] A[s, i]; the overlap is sum_{j,i} V[j,i] K[j,i]
    return B.conj().T @ A


def uhlmann_isometry(
    psi_a: np.ndarray,
    dims_a: Sequence[int],
    shared_a: Sequence[int],
    psi_b: np.ndarray,
    dims_b: Sequence[int],
    shared_b: Sequence[int],
    sv_cut: float = 1e-9,
):
    """Partial isometry V on the complement of the shared registers maximizing
    |<psi_b| (I_shared (x) V) |psi_a>|.

    Returns (V, overlap): V maps complement-of-shared(a) to
    complement-of-shared(b), both in original factor order; the achieved
    overlap equals the root fidelity of the shared marginals. Singular values
    below sv_cut are zero-padded into an isometry completion (exact isometry
    when dim(compl_b) >= dim(compl_a), co-isometry otherwise).
    """
    del sv_cut  # the full SVD already pads null directions into a completion
    K = overlap_operator(psi_a, dims_a, shared_a, psi_b, dims_b, shared_b)
    U, s, Wh = np.linalg.svd(K, full_matrices=True)
    k = min(K.shape)
    # overlap = sum_{j,i} V[j,i] K[j,i] is maximized by the conjugated polar part;
    # truncating to rank min(shape) keeps V an isometry (or co-isometry) exactly
    V = (U[:, :k] @ Wh[:k, :]).conj()
    return V, float(s.sum())
