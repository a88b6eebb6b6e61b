"""One-shot and von Neumann entropy engine.

Conditional min-entropies are semidefinite programs; max-entropies are
evaluated exclusively through duality on a purification whose mirror
register is the eigenbasis of the state. Smoothing is over the
purified-distance ball of sub-normalized states. All values are in bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import numkit, sdp
from .qstate import LabeledState
from .registers import RegisterLayout

NEG_INF = float("-inf")

# Reported entropy precision target is 1e-5 absolute; solver default keeps
# a comfortable margin.
SOLVER_TOL = 1e-7

_kernel_cache: dict = {}
_CACHE_MAX = 4096


class EntropyError(RuntimeError):
    """Solver failure, reported with the offending program."""


@dataclass(frozen=True)
class EntropyQuery:
    """A named entropy evaluation over register groups."""

    quantity: str  # hmin | hmax | hmax_prime | h_star | i_min_tilde | vn | vn_mi
    targets: tuple
    conditioning: tuple = ()
    eps: float = 0.0
    iota: float = 0.0
    kappa: float = 0.0
    extra: tuple = ()  # the C group of the min mutual information

    def __post_init__(self):
        if not 0.0 <= self.eps < 1.0:
            raise ValueError(f"smoothing eps {self.eps} outside [0, 1)")
        if set(self.targets) & set(self.conditioning):
            raise ValueError("targets and conditioning overlap")


def _cache_get(key):
    return _kernel_cache.get(key)


def _cache_put(key, value):
    if len(_kernel_cache) >= _CACHE_MAX:
        _kernel_cache.clear()
    _kernel_cache[key] = value


def clear_cache() -> None:
    _kernel_cache.clear()


# ---------------------------------------------------------------------------
# Kernels on raw matrices (target-major ordering: rho on H_A (x) H_B)
# ---------------------------------------------------------------------------


def hmin_kernel(rho: np.ndarray, d_a: int, d_b: int, tol: float = SOLVER_TOL) -> float:
    """H_min(A|B) = -log2 min{Tr Y : I (x) Y >= rho}."""
    key = ("hmin", rho.tobytes(), d_a, d_b)
    hit = _cache_get(key)
    if hit is not None:
        return hit
    sol = sdp.solve(sdp.min_trace_kron_problem(rho, d_a, d_b), tol)
    if sol.status != sdp.STATUS_OPTIMAL:
        raise EntropyError(f"hmin SDP ended with status {sol.status} (gap {sol.gap:.2e})")
    val = -math.log2(max(sol.value, 1e-300))
    _cache_put(key, val)
    return val


def smooth_hmin_kernel(
    rho: np.ndarray, d_a: int, d_b: int, eps: float, tol: float = SOLVER_TOL
) -> float:
    if eps == 0.0:
        return hmin_kernel(rho, d_a, d_b, tol)
    key = ("shmin", rho.tobytes(), d_a, d_b, round(eps, 12))
    hit = _cache_get(key)
    if hit is not None:
        return hit
    sol = sdp.solve(sdp.smooth_min_entropy_problem(rho, d_a, d_b, eps), tol)
    if sol.status != sdp.STATUS_OPTIMAL:
        raise EntropyError(
            f"smooth hmin SDP (eps={eps}) ended with status {sol.status} (gap {sol.gap:.2e})"
        )
    val = -math.log2(max(sol.value, 1e-300))
    _cache_put(key, val)
    return val


def _purified_complement(rho: np.ndarray, d_a: int, d_b: int):
    """Marginal on A (x) mirror of a purification of rho^{AB}.

    Used for duality: H_max(A|B)_rho = -H_min(A|M)_psi.
    """
    psi = numkit.purify(rho, trim=True)
    n = rho.shape[0]
    r = psi.size // n
    # psi lives on (A B) (x) M; trace out B
    full = psi.reshape(d_a, d_b, r)
    am = np.einsum("abm,cbn->amcn", full, full.conj()).reshape(d_a * r, d_a * r)
    return am, r


def hmax_kernel(rho: np.ndarray, d_a: int, d_b: int, tol: float = SOLVER_TOL) -> float:
    am, r = _purified_complement(rho, d_a, d_b)
    return -hmin_kernel(am, d_a, r, tol)


def smooth_hmax_kernel(
    rho: np.ndarray, d_a: int, d_b: int, eps: float, tol: float = SOLVER_TOL
) -> float:
    am, r = _purified_complement(rho, d_a, d_b)
    return -smooth_hmin_kernel(am, d_a, r, eps, tol)


def hmin_fixed_kernel(rho: np.ndarray, d_a: int, d_b: int, sigma: np.ndarray) -> float:
    """H_min(A|B)_{rho|sigma} with explicit conditioning state; -inf if the
    support of rho exceeds that of I (x) sigma."""
    isqrt = numkit.pinv_sqrt_psd(sigma)
    proj = isqrt @ sigma @ isqrt  # projector onto supp(sigma)
    big_proj = np.kron(np.eye(d_a), proj)
    leak = float(np.trace(rho @ (np.eye(d_a * d_b) - big_proj)).real)
    if leak > 1e-10:
        return NEG_INF
    big = np.kron(np.eye(d_a), isqrt)
    lam = float(np.linalg.eigvalsh(numkit.hermitize(big @ rho @ big))[-1])
    if lam <= 0:
        return float("inf")
    return -math.log2(lam)


def von_neumann_kernel(rho: np.ndarray) -> float:
    """H(rho) = -Tr rho log2 rho with 0 log 0 = 0."""
    w = np.linalg.eigvalsh(numkit.hermitize(rho))
    w = w[w > 1e-15]
    return float(-(w * np.log2(w)).sum()) if w.size else 0.0


# ---------------------------------------------------------------------------
# Named-register interface
# ---------------------------------------------------------------------------


def _arranged(state: LabeledState, targets: Sequence[str], conds: Sequence[str]):
    names = tuple(targets) + tuple(conds)
    if len(names) == 0:
        raise ValueError("no registers selected")
    marg = state.marginal(names)
    d_a = state.layout.dim_of(targets)
    d_b = state.layout.dim_of(conds) if conds else 1
    return marg.matrix, d_a, d_b


def hmin_cond(state: LabeledState, targets, conds=(), tol: float = SOLVER_TOL) -> float:
    rho, d_a, d_b = _arranged(state, targets, conds)
    return hmin_kernel(rho, d_a, d_b, tol)


def hmax_cond(state: LabeledState, targets, conds=(), tol: float = SOLVER_TOL) -> float:
    rho, d_a, d_b = _arranged(state, targets, conds)
    return hmax_kernel(rho, d_a, d_b, tol)


def hmin_cond_fixed(state: LabeledState, targets, conds, sigma: np.ndarray) -> float:
    rho, d_a, d_b = _arranged(state, targets, conds)
    return hmin_fixed_kernel(rho, d_a, d_b, sigma)


def hmin_cond_cq_oracle(blocks, d_a: int, d_b: int, tol: float = SOLVER_TOL) -> float:
    """H_min(A|BK) for sum_k p_k rho_k (x) |k><k| from the per-block values:
    -log2 sum_k p_k 2^(-H_min(A|B)_{rho_k})."""
    acc = 0.0
    for p_k, rho_k in blocks:
        if p_k == 0:
            continue
        acc += p_k * 2.0 ** (-hmin_kernel(np.asarray(rho_k, dtype=complex), d_a, d_b, tol))
    return -math.log2(acc)


def smooth_hmin(state: LabeledState, targets, conds=(), eps: float = 0.0, tol: float = SOLVER_TOL) -> float:
    rho, d_a, d_b = _arranged(state, targets, conds)
    return smooth_hmin_kernel(rho, d_a, d_b, eps, tol)


def smooth_hmax(state: LabeledState, targets, conds=(), eps: float = 0.0, tol: float = SOLVER_TOL) -> float:
    rho, d_a, d_b = _arranged(state, targets, conds)
    return smooth_hmax_kernel(rho, d_a, d_b, eps, tol)


def hmax_prime(state: LabeledState, targets, eps: float = 0.0) -> float:
    """log2 of the smallest rank keeping eigenvalue mass >= 1 - eps."""
    rho, _, _ = _arranged(state, targets, ())
    w = np.sort(np.maximum(np.linalg.eigvalsh(numkit.hermitize(rho)), 0.0))[::-1]
    total = 0.0
    for k, v in enumerate(w, start=1):
        total += v
        if total >= 1.0 - eps - 1e-12:
            return math.log2(k)
    return math.log2(len(w))


def h_star(state: LabeledState, targets, conds, iota: float, kappa: float, tol: float = SOLVER_TOL) -> float:
    return max(
        smooth_hmin(state, targets, conds, iota, tol),
        smooth_hmax(state, targets, conds, kappa, tol),
    )


def i_min_tilde(state: LabeledState, targets, extra, conds, eps: float, tol: float = SOLVER_TOL) -> float:
    """Smooth conditional min mutual information
    H_min^eps(A|B) - H_min^eps(A|BC) for groups A=targets, C=extra, B=conds."""
    if set(targets) & set(extra) or set(targets) & set(conds) or set(extra) & set(conds):
        raise ValueError("register groups must be disjoint")
    h_b = smooth_hmin(state, targets, conds, eps, tol)
    h_bc = smooth_hmin(state, targets, tuple(conds) + tuple(extra), eps, tol)
    return h_b - h_bc


def von_neumann(state: LabeledState, targets, conds=()) -> float:
    """H(targets | conds) in bits."""
    rho_all, _, _ = _arranged(state, targets, conds)
    h_joint = von_neumann_kernel(rho_all)
    if not conds:
        return h_joint
    rho_b, _, _ = _arranged(state, conds, ())
    return h_joint - von_neumann_kernel(rho_b)


def mutual_information(state: LabeledState, targets, others) -> float:
    """I(A:B) = H(A) - H(A|B)."""
    return von_neumann(state, targets) - von_neumann(state, targets, others)


def evaluate_query(state: LabeledState, q: EntropyQuery, tol: float = SOLVER_TOL) -> float:
    if q.quantity == "hmin":
        return smooth_hmin(state, q.targets, q.conditioning, q.eps, tol)
    if q.quantity == "hmax":
        return smooth_hmax(state, q.targets, q.conditioning, q.eps, tol)
    if q.quantity == "hmax_prime":
        return hmax_prime(state, q.targets, q.eps)
    if q.quantity == "h_star":
        return h_star(state, q.targets, q.conditioning, q.iota, q.kappa, tol)
    if q.quantity == "i_min_tilde":
        return i_min_tilde(state, q.targets, q.extra, q.conditioning, q.eps, tol)
    if q.quantity == "vn":
        return von_neumann(state, q.targets, q.conditioning)
    if q.quantity == "vn_mi":
        return mutual_information(state, q.targets, q.conditioning)
    raise ValueError(f"unknown quantity {q.quantity!r}")


def f_eps(x: float) -> float:
    """f(x) = -log2(1 - sqrt(1 - x^2)), strictly decreasing on (0, 1]."""
    if not 0.0 < x <= 1.0:
        raise ValueError(f"f_eps domain is (0, 1], got {x}")
    inner = 1.0 - math.sqrt(max(0.0, 1.0 - x * x))
    return -math.log2(inner)
