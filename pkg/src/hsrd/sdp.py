"""Small dense semidefinite programming layer.

Problems are stated over Hermitian PSD blocks with affine operator
constraints and a real-linear objective. Two solution paths:

* a structure-exploiting interior-point path for the dominant shape
  ``min Tr Y  s.t.  I_dA (x) Y >= R`` (barrier Newton in Y with certified
  duality gap from an explicitly repaired dual feasible point), and
* a general conic path (scalarized Hermitian blocks with a real symmetric
  embedding) solved by cvxopt's conelp.

Every optimal solution carries a duality gap and feasibility residuals so
callers can assert KKT quality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from cvxopt import matrix as cvx_matrix
from cvxopt import solvers as cvx_solvers
from cvxopt import spmatrix as cvx_spmatrix

from . import numkit

DEFAULT_TOL = 1e-7
MAX_ITERATIONS = 200

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_MAX_ITERATIONS = "max-iterations"


class SdpError(RuntimeError):
    """Solver failure that the caller did not anticipate."""


@dataclass
class BlockSpec:
    """A named variable: Hermitian d x d ('herm') or real scalar ('scalar')."""

    name: str
    kind: str
    dim: int = 1
    psd: bool = True
    nonneg: bool = False

    @property
    def n_coords(self) -> int:
        return self.dim * self.dim if self.kind == "herm" else 1


@dataclass
class Lmi:
    """Affine Hermitian constraint  const + sum_k x_k E_k >= 0.

    Entries are (coord, i, j, value) with i <= j; the (j, i) conjugate term
    is implied. Diagonal entries must have real values.
    """

    size: int
    const: np.ndarray
    entries: list


@dataclass
class Soc:
    """Second-order cone row block: s = h - row_coeffs . x, s0 >= ||s_1:||."""

    h: np.ndarray
    rows: list  # per cone row, list of (coord, real coefficient)


@dataclass
class SdpProblem:
    blocks: list = field(default_factory=list)
    objective: list = field(default_factory=list)  # (coord, real coeff), minimized
    obj_const: float = 0.0
    lmis: list = field(default_factory=list)
    socs: list = field(default_factory=list)
    lin_ineq: list = field(default_factory=list)  # (coeffs list, ub): a.x <= ub
    lin_eq: list = field(default_factory=list)  # (coeffs list, rhs): a.x == rhs
    structure: Optional[str] = None
    meta: dict = field(default_factory=dict)

    # -- variable management -------------------------------------------------
    def add_herm_block(self, name: str, dim: int, psd: bool = True) -> None:
        self._check_name(name)
        self.blocks.append(BlockSpec(name, "herm", dim, psd=psd))

    def add_scalar(self, name: str, nonneg: bool = False) -> None:
        self._check_name(name)
        self.blocks.append(BlockSpec(name, "scalar", 1, psd=False, nonneg=nonneg))

    def _check_name(self, name: str) -> None:
        if any(b.name == name for b in self.blocks):
            raise ValueError(f"duplicate block name {name!r}")

    def n_vars(self) -> int:
        return sum(b.n_coords for b in self.blocks)

    def offset(self, name: str) -> int:
        off = 0
        for b in self.blocks:
            if b.name == name:
                return off
            off += b.n_coords
        raise KeyError(name)

    def block(self, name: str) -> BlockSpec:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)

    # -- coordinate helpers for Hermitian blocks ------------------------------
    # coordinate order within a herm block of dim d: d diagonal entries, then
    # (re, im) pairs for i < j in row-major order.
    @staticmethod
    def herm_coord_list(d: int) -> list:
        coords = [("d", i, i) for i in range(d)]
        for i in range(d):
            for j in range(i + 1, d):
                coords.append(("r", i, j))
                coords.append(("i", i, j))
        return coords

    def coord(self, name: str, i: int, j: int, part: str = "d") -> int:
        """Flat coordinate index for entry (i, j) of a herm block (or scalar)."""
        b = self.block(name)
        off = self.offset(name)
        if b.kind == "scalar":
            return off
        d = b.dim
        if i == j:
            return off + i
        if i > j:
            i, j = j, i
        pair_rank = i * d - i * (i + 1) // 2 + (j - i - 1)
        base = off + d + 2 * pair_rank
        return base if part == "r" else base + 1

    def matrix_from_coords(self, name: str, x: np.ndarray) -> np.ndarray:
        b = self.block(name)
        off = self.offset(name)
        if b.kind == "scalar":
            return float(x[off])
        d = b.dim
        M = np.zeros((d, d), dtype=complex)
        k = off
        for i in range(d):
            M[i, i] = x[k]
            k += 1
        for i in range(d):
            for j in range(i + 1, d):
                M[i, j] += x[k] + 1j * x[k + 1]
                M[j, i] += x[k] - 1j * x[k + 1]
                k += 2
        return M

    # -- constraint builders ---------------------------------------------------
    def add_lmi(self, size: int, const: np.ndarray) -> Lmi:
        lmi = Lmi(size=size, const=np.asarray(const, dtype=complex), entries=[])
        self.lmis.append(lmi)
        return lmi

    def lmi_block_entries(self, lmi: Lmi, name: str, row0: int, col0: int, scale: float = 1.0) -> None:
        """Place a Hermitian block variable at diagonal position (row0, col0=row0 block)."""
        b = self.block(name)
        for i in range(b.dim):
            lmi.entries.append((self.coord(name, i, i), row0 + i, col0 + i, scale))
            for j in range(i + 1, b.dim):
                lmi.entries.append((self.coord(name, i, j, "r"), row0 + i, col0 + j, scale))
                lmi.entries.append((self.coord(name, i, j, "i"), row0 + i, col0 + j, 1j * scale))

    def lmi_kron_identity(self, lmi: Lmi, name: str, d_left: int, row0: int) -> None:
        """Place I_{d_left} (x) X_name at diagonal offset row0."""
        b = self.block(name)
        d = b.dim
        for a in range(d_left):
            base = row0 + a * d
            for i in range(d):
                lmi.entries.append((self.coord(name, i, i), base + i, base + i, 1.0))
                for j in range(i + 1, d):
                    lmi.entries.append((self.coord(name, i, j, "r"), base + i, base + j, 1.0))
                    lmi.entries.append((self.coord(name, i, j, "i"), base + i, base + j, 1j))

    def objective_trace(self, name: str, coeff: np.ndarray) -> None:
        """Add Re Tr[coeff^dagger X_name] to the minimized objective."""
        b = self.block(name)
        C = np.asarray(coeff, dtype=complex)
        for i in range(b.dim):
            self.objective.append((self.coord(name, i, i), float(C[i, i].real)))
            for j in range(i + 1, b.dim):
                self.objective.append((self.coord(name, i, j, "r"), float((C[i, j] + C[j, i]).real)))
                self.objective.append((self.coord(name, i, j, "i"), float((C[i, j] - C[j, i]).imag)))


@dataclass
class SdpSolution:
    value: float
    primal: dict
    status: str
    gap: float
    residuals: dict = field(default_factory=dict)
    iterations: int = 0


# ---------------------------------------------------------------------------
# Fast path: min Tr Y  s.t.  I_dA (x) Y >= R
# ---------------------------------------------------------------------------


def solve_min_trace_kron(R: np.ndarray, d_left: int, d_right: int, tol: float = DEFAULT_TOL) -> SdpSolution:
    """min Tr Y s.t. I (x) Y >= R, Y >= 0, with a certified duality gap.

    Full-rank R goes through a structure-exploiting barrier path; rank
    deficient R (the normal case for purification marginals) is solved in
    the equivalent thin-factored cone form, which keeps a strictly feasible
    interior. Both paths recover a feasible point of the dual
    (max Tr[R X] s.t. Tr_left X = I, X >= 0), so the reported gap is a true
    optimality certificate.
    """
    n = d_left * d_right
    R = np.asarray(R, dtype=complex)
    if R.shape != (n, n):
        raise numkit.ShapeError(f"R must be {n}x{n}")
    rank = numkit.support_eigs(numkit.hermitize(R)).values.size if np.abs(R).max() > 0 else 0
    if rank == n and n > 48:
        # barrier is faster on large well-conditioned instances; the thin
        # cone form below is the certified fallback either way
        try:
            sol = _solve_min_trace_barrier(R, d_left, d_right, tol)
            if sol.status == STATUS_OPTIMAL:
                return sol
        except SdpError:
            pass
    return _solve_min_trace_thin(R, d_left, d_right, tol)


def _repair_kron_dual(X: np.ndarray, R: np.ndarray, d_left: int, d_right: int):
    """Project a PSD candidate onto {X >= 0, Tr_left X = I} without leaving the cone."""
    X = numkit.hermitize(X)
    w = np.linalg.eigvalsh(X)
    if w[0] < 0:
        X = X - w[0] * np.eye(X.shape[0])  # keep PSD; trace condition fixed below
    marg = np.einsum("aiaj->ij", X.reshape(d_left, d_right, d_left, d_right))
    lam = float(np.linalg.eigvalsh(numkit.hermitize(marg))[-1])
    s = 1.0 if lam <= 1.0 else 1.0 / lam
    D = np.eye(d_right) - s * marg
    X = s * X + np.kron(np.eye(d_left), D) / d_left
    return X, float(np.trace(R @ X).real)


def _solve_min_trace_thin(R: np.ndarray, d_left: int, d_right: int, tol: float) -> SdpSolution:
    """Thin-factored form: R = F F^+, constraint [[I_r, F^+], [F, I (x) Y]] >= 0."""
    n = d_left * d_right
    F = numkit.thin_factor(R) if np.abs(R).max() > 0 else np.zeros((n, 1), dtype=complex)
    r = F.shape[1]
    p = SdpProblem()
    p.add_herm_block("Y", d_right, psd=False)
    p.objective_trace("Y", np.eye(d_right))
    m0 = r + n
    const = np.zeros((m0, m0), dtype=complex)
    const[:r, :r] = np.eye(r)
    const[r:, :r] = F
    const[:r, r:] = F.conj().T
    lmi = p.add_lmi(m0, const)
    p.lmi_kron_identity(lmi, "Y", d_left, r)
    sol = _solve_conelp(p, tol)
    if sol.status != STATUS_OPTIMAL:
        raise SdpError(f"thin-form conelp status {sol.status}")
    Y = numkit.hermitize(sol.primal["Y"])
    pval = float(np.trace(Y).real)
    feas = float(-min(np.linalg.eigvalsh(numkit.hermitize(np.kron(np.eye(d_left), Y) - R))[0], 0.0))
    # the lower-right corner of the cone dual is (a multiple of) the dual X
    Z = sol.residuals["lmi_duals"][0]
    Z22 = Z[r:, r:]
    kappa = float(np.trace(Z22).real) / d_right
    X0 = Z22 / kappa if kappa > 1e-300 else np.eye(n) / d_left
    X, dval = _repair_kron_dual(X0, R, d_left, d_right)
    gap = pval - dval
    dual_eq = float(
        np.abs(
            np.einsum("aiaj->ij", X.reshape(d_left, d_right, d_left, d_right)) - np.eye(d_right)
        ).max()
    )
    status = STATUS_OPTIMAL if abs(gap) <= tol * max(1.0, abs(pval)) else STATUS_MAX_ITERATIONS
    return SdpSolution(
        value=pval,
        primal={"Y": Y},
        status=status,
        gap=gap,
        residuals={"primal_cone": feas, "dual_eq": dual_eq, "dual": {"X": X}, "conelp_gap": float(sol.gap)},
        iterations=sol.iterations,
    )


def _solve_min_trace_barrier(R: np.ndarray, d_left: int, d_right: int, tol: float = DEFAULT_TOL) -> SdpSolution:
    n = d_left * d_right
    eye_l = np.eye(d_left)
    lam_max = float(np.linalg.eigvalsh(numkit.hermitize(R))[-1])
    Y = (max(lam_max, 0.0) + 1.0) * np.eye(d_right, dtype=complex)
    t = max(1.0, n / max(d_right * (max(lam_max, 0.0) + 1.0), 1e-6))
    iters = 0

    def center(Y, t):
        nonlocal iters
        for _inner in range(60):
            iters += 1
            M = np.kron(eye_l, Y) - R
            w, V = np.linalg.eigh(M)
            if w[0] <= 0:
                raise SdpError("barrier iterate left the cone")
            Minv = (V / w) @ V.conj().T
            Minv4 = Minv.reshape(d_left, d_right, d_left, d_right)
            G = t * np.eye(d_right) - np.einsum("aiaj->ij", Minv4)
            H = np.einsum("aibk,blaj->ijkl", Minv4, Minv4, optimize=True)
            H = H.reshape(d_right * d_right, d_right * d_right)
            g = G.reshape(-1)
            try:
                dy = np.linalg.solve(H, -g)
            except np.linalg.LinAlgError:
                dy = np.linalg.lstsq(H, -g, rcond=None)[0]
            dY = numkit.hermitize(dy.reshape(d_right, d_right))
            ndec = float(np.real(np.vdot(-g, dy)))
            if not np.isfinite(ndec) or ndec <= 0:
                break
            K = np.kron(eye_l, dY)
            step = 1.0
            for _ in range(50):
                if np.linalg.eigvalsh(M + step * K)[0] > 0:
                    break
                step *= 0.5
            else:
                break
            Y = Y + step * dY
            if ndec < 1e-12 * max(1.0, t):
                break
        return Y

    def certify(Y, t):
        """Repair the barrier dual X = M^-1 / t to exact feasibility."""
        M = np.kron(eye_l, Y) - R
        w, V = np.linalg.eigh(M)
        Minv = (V / np.maximum(w, 1e-300)) @ V.conj().T
        X, dval = _repair_kron_dual(Minv / t, R, d_left, d_right)
        pval = float(np.trace(Y).real)
        return X, pval, pval - dval

    X = None
    pval = gap = float("inf")
    for _outer in range(60):
        Y = center(Y, t)
        if n / t < tol / 4:
            X, pval, gap = certify(Y, t)
            if abs(gap) <= 0.5 * tol * max(1.0, abs(pval)) or t > 1e13:
                break
        t *= 25.0
    if X is None:
        X, pval, gap = certify(Y, t)
    feas = float(-min(np.linalg.eigvalsh(numkit.hermitize(np.kron(eye_l, Y) - R))[0], 0.0))
    dual_feas = float(np.abs(np.einsum("aiaj->ij", X.reshape(d_left, d_right, d_left, d_right)) - np.eye(d_right)).max())
    status = STATUS_OPTIMAL if abs(gap) <= max(tol, 1e-9) * max(1.0, abs(pval)) else STATUS_MAX_ITERATIONS
    return SdpSolution(
        value=pval,
        primal={"Y": numkit.hermitize(Y)},
        status=status,
        gap=gap,
        residuals={"primal_cone": feas, "dual_eq": dual_feas, "dual": {"X": X}},
        iterations=iters,
    )


# ---------------------------------------------------------------------------
# General conic path (cvxopt conelp)
# ---------------------------------------------------------------------------


def _embed_positions(size: int, i: int, j: int, val: complex):
    """Real symmetric embedding positions of a Hermitian entry contribution.

    Hermitian M embeds as [[Re M, -Im M], [Im M, Re M]] (2*size square).
    Yields (p, q, real value) pairs for M[i,j] += val, M[j,i] += conj(val).
    """
    m = size
    re, im = val.real, val.imag
    if i == j:
        if abs(im) > 1e-15:
            raise ValueError("diagonal LMI entry must be real")
        yield (i, i, re)
        yield (m + i, m + i, re)
        return
    if re != 0.0:
        yield (i, j, re)
        yield (j, i, re)
        yield (m + i, m + j, re)
        yield (m + j, m + i, re)
    if im != 0.0:
        yield (i, m + j, -im)
        yield (j, m + i, im)
        yield (m + i, j, im)
        yield (m + j, i, -im)


def _embed_const(C: np.ndarray) -> np.ndarray:
    m = C.shape[0]
    E = np.zeros((2 * m, 2 * m))
    E[:m, :m] = C.real
    E[m:, m:] = C.real
    E[:m, m:] = -C.imag
    E[m:, :m] = C.imag
    return E


def _solve_conelp(problem: SdpProblem, tol: float) -> SdpSolution:
    N = problem.n_vars()
    c = np.zeros(N)
    for k, v in problem.objective:
        c[k] += v

    G_rows, G_cols, G_vals = [], [], []
    h_parts = []
    offset = 0
    dims_l = 0

    # nonneg scalars
    for b in problem.blocks:
        if b.kind == "scalar" and b.nonneg:
            G_rows.append(offset)
            G_cols.append(problem.offset(b.name))
            G_vals.append(-1.0)
            h_parts.append(np.zeros(1))
            offset += 1
            dims_l += 1
    # linear inequalities a.x <= ub  ->  s = ub - a.x >= 0
    for coeffs, ub in problem.lin_ineq:
        for k, v in coeffs:
            G_rows.append(offset)
            G_cols.append(k)
            G_vals.append(float(v))
        h_parts.append(np.array([float(ub)]))
        offset += 1
        dims_l += 1

    dims_q = []
    for soc in problem.socs:
        kdim = len(soc.h)
        for r, row in enumerate(soc.rows):
            for k, v in row:
                G_rows.append(offset + r)
                G_cols.append(k)
                G_vals.append(float(v))
        h_parts.append(np.asarray(soc.h, dtype=float))
        offset += kdim
        dims_q.append(kdim)

    dims_s = []
    psd_lmis = list(problem.lmis)
    for b in problem.blocks:
        if b.kind == "herm" and b.psd:
            lmi = Lmi(size=b.dim, const=np.zeros((b.dim, b.dim), dtype=complex), entries=[])
            for i in range(b.dim):
                lmi.entries.append((problem.coord(b.name, i, i), i, i, 1.0))
                for j in range(i + 1, b.dim):
                    lmi.entries.append((problem.coord(b.name, i, j, "r"), i, j, 1.0))
                    lmi.entries.append((problem.coord(b.name, i, j, "i"), i, j, 1j))
            psd_lmis.append(lmi)
    for lmi in psd_lmis:
        D = 2 * lmi.size
        h_parts.append(_embed_const(lmi.const).reshape(-1, order="F"))
        for coord, i, j, val in lmi.entries:
            for p, q, rv in _embed_positions(lmi.size, i, j, complex(val)):
                G_rows.append(offset + p + q * D)
                G_cols.append(coord)
                G_vals.append(-rv)
        offset += D * D
        dims_s.append(D)

    h = np.concatenate(h_parts) if h_parts else np.zeros(0)
    G = cvx_spmatrix(
        [float(v) for v in G_vals], [int(r) for r in G_rows], [int(cc) for cc in G_cols], (offset, N)
    )
    A = b_eq = None
    if problem.lin_eq:
        A_rows, A_cols, A_vals, b_list = [], [], [], []
        for r, (coeffs, rhs) in enumerate(problem.lin_eq):
            for k, v in coeffs:
                A_rows.append(r)
                A_cols.append(k)
                A_vals.append(float(v))
            b_list.append(float(rhs))
        A = cvx_spmatrix(A_vals, A_rows, A_cols, (len(problem.lin_eq), N))
        b_eq = cvx_matrix(np.asarray(b_list))

    opts = dict(cvx_solvers.options)
    cvx_solvers.options.update(
        {
            "show_progress": False,
            "abstol": tol,
            "reltol": tol,
            "feastol": min(1e-8, tol),
            "maxiters": MAX_ITERATIONS,
        }
    )
    try:
        sol = cvx_solvers.conelp(
            cvx_matrix(c),
            G,
            cvx_matrix(h),
            dims={"l": dims_l, "q": dims_q, "s": dims_s},
            A=A,
            b=b_eq,
            kktsolver="ldl",
        )
    except (ValueError, ArithmeticError, ZeroDivisionError) as exc:
        raise SdpError(f"conelp failed: {exc}") from exc
    finally:
        cvx_solvers.options.clear()
        cvx_solvers.options.update(opts)

    status_map = {
        "optimal": STATUS_OPTIMAL,
        "primal infeasible": STATUS_INFEASIBLE,
        "dual infeasible": STATUS_INFEASIBLE,
        "unknown": STATUS_MAX_ITERATIONS,
    }
    status = status_map.get(sol["status"], STATUS_MAX_ITERATIONS)
    primal = {}
    gap = float("nan")
    value = float("nan")
    residuals = {}
    if sol["x"] is not None:
        x = np.array(sol["x"]).ravel()
        for b in problem.blocks:
            primal[b.name] = problem.matrix_from_coords(b.name, x)
        value = float(c @ x) + problem.obj_const
        if status == STATUS_OPTIMAL:
            gap = float(sol["gap"])
            residuals = {
                "primal_inf": float(sol["relative gap"] if sol["relative gap"] is not None else 0.0),
                "primal_slack": float(sol["primal slack"]),
                "dual_slack": float(sol["dual slack"]),
                "primal_infeasibility": float(sol["primal infeasibility"]),
                "dual_infeasibility": float(sol["dual infeasibility"]),
            }
            # unembed the Hermitian dual of each LMI cone (user LMIs first)
            z = np.array(sol["z"]).ravel()
            pos = dims_l + sum(dims_q)
            lmi_duals = []
            for D in dims_s:
                Zfull = z[pos : pos + D * D].reshape(D, D, order="F")
                m = D // 2
                Zh = (Zfull[:m, :m] + Zfull[m:, m:]) / 2 + 1j * (
                    Zfull[m:, :m] - Zfull[:m, m:]
                ) / 2
                lmi_duals.append(numkit.hermitize(Zh))
                pos += D * D
            residuals["lmi_duals"] = lmi_duals
    return SdpSolution(
        value=value,
        primal=primal,
        status=status,
        gap=gap,
        residuals=residuals,
        iterations=sol.get("iterations", 0),
    )


# ---------------------------------------------------------------------------
# Problem builders
# ---------------------------------------------------------------------------


def min_trace_kron_problem(R: np.ndarray, d_left: int, d_right: int) -> SdpProblem:
    """min Tr Y s.t. I_{d_left} (x) Y >= R, Y >= 0."""
    p = SdpProblem(structure="min_trace_kron", meta={"R": np.asarray(R, dtype=complex), "d_left": d_left, "d_right": d_right})
    p.add_herm_block("Y", d_right, psd=True)
    p.objective_trace("Y", np.eye(d_right))
    lmi = p.add_lmi(d_left * d_right, -np.asarray(R, dtype=complex))
    p.lmi_kron_identity(lmi, "Y", d_left, 0)
    return p


def smooth_min_entropy_problem(rho: np.ndarray, d_left: int, d_right: int, eps: float) -> SdpProblem:
    """Joint program for 2^(-Hmin^eps): min Tr Y over the purified-distance ball.

    The smoothed state is parameterized through its thin factor: rhohat =
    L^dagger L with L an r x n matrix (r = rank rho), which makes the
    fidelity constraint F(rho, rhohat) >= sqrt(1 - eps^2) linear in L and
    keeps every cone small. Tr rhohat <= 1 becomes ||L||_F <= 1, and the
    generalized-fidelity completion term for sub-normalized inputs enters
    through one extra scalar.
    """
    n = d_left * d_right
    rho = np.asarray(rho, dtype=complex)
    F = numkit.thin_factor(rho)  # n x r, rho = F F^dagger
    r = F.shape[1]
    a = max(0.0, 1.0 - float(np.trace(rho).real))
    has_u = a > 1e-14
    p = SdpProblem(structure="smooth_min_entropy", meta={"r": r, "n": n})
    p.add_herm_block("Y", d_right, psd=False)  # PSD implied by the big block
    for k in range(r * n):
        p.add_scalar(f"Lr{k}")
        p.add_scalar(f"Li{k}")
    if has_u:
        p.add_scalar("u", nonneg=True)
    # one PSD block [[I_r, L], [L^+, I (x) Y]]: equivalent to I (x) Y >= L^+ L
    m0 = r + n
    const = np.zeros((m0, m0), dtype=complex)
    const[:r, :r] = np.eye(r)
    big = p.add_lmi(m0, const)
    for i in range(r):
        for j in range(n):
            k = i * n + j
            big.entries.append((p.offset(f"Lr{k}"), i, r + j, 1.0))
            big.entries.append((p.offset(f"Li{k}"), i, r + j, 1j))
    p.lmi_kron_identity(big, "Y", d_left, r)
    # objective
    p.objective_trace("Y", np.eye(d_right))
    # fidelity row: Re Tr[F_thin L] + sqrt(a) u >= sqrt(1 - eps^2)
    # Tr[F L] = sum_{i,j} F[j, i] L[i, j]
    fid_coeffs = []
    for i in range(r):
        for j in range(n):
            k = i * n + j
            v = F[j, i]
            fid_coeffs.append((p.offset(f"Lr{k}"), -float(v.real)))
            fid_coeffs.append((p.offset(f"Li{k}"), float(v.imag)))
    if has_u:
        fid_coeffs.append((p.offset("u"), -float(np.sqrt(a))))
    p.lin_ineq.append((fid_coeffs, -float(np.sqrt(max(0.0, 1.0 - eps * eps)))))
    # ball: u^2 + ||L||_F^2 <= 1
    rows = [[]]
    h = [1.0]
    if has_u:
        rows.append([(p.offset("u"), -1.0)])
        h.append(0.0)
    for k in range(r * n):
        rows.append([(p.offset(f"Lr{k}"), -1.0)])
        h.append(0.0)
        rows.append([(p.offset(f"Li{k}"), -1.0)])
        h.append(0.0)
    p.socs.append(Soc(h=np.asarray(h), rows=rows))
    return p


def fidelity_problem(rho: np.ndarray, sigma: np.ndarray) -> SdpProblem:
    """max Re Tr X s.t. [[rho, X], [X^+, sigma]] >= 0, as min of the negative.

    Thin-factored: X = sqrt_factor(rho) L, cone size rank(rho) + n.
    """
    n = rho.shape[0]
    F = numkit.thin_factor(np.asarray(rho, dtype=complex))
    r = F.shape[1]
    p = SdpProblem(structure="fidelity", meta={"r": r, "n": n})
    for k in range(r * n):
        p.add_scalar(f"Lr{k}")
        p.add_scalar(f"Li{k}")
    m0 = r + n
    const = np.zeros((m0, m0), dtype=complex)
    const[:r, :r] = np.eye(r)
    const[r:, r:] = np.asarray(sigma, dtype=complex)
    big = p.add_lmi(m0, const)
    for i in range(r):
        for j in range(n):
            k = i * n + j
            big.entries.append((p.offset(f"Lr{k}"), i, r + j, 1.0))
            big.entries.append((p.offset(f"Li{k}"), i, r + j, 1j))
    for i in range(r):
        for j in range(n):
            k = i * n + j
            v = F[j, i]
            p.objective.append((p.offset(f"Lr{k}"), -float(v.real)))
            p.objective.append((p.offset(f"Li{k}"), float(v.imag)))
    return p


def solve(problem: SdpProblem, tol: float = DEFAULT_TOL) -> SdpSolution:
    """Solve an SdpProblem; dispatches to the structured path when possible."""
    if tol < 1e-9:
        raise ValueError("tolerance below 1e-9 is not supported")
    if problem.structure == "min_trace_kron":
        return solve_min_trace_kron(problem.meta["R"], problem.meta["d_left"], problem.meta["d_right"], tol)
    sol = _solve_conelp(problem, tol)
    if problem.structure == "fidelity" and np.isfinite(sol.value):
        sol.value = -sol.value  # maximization stated as minimization
    return sol
