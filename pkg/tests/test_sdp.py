import numpy as np
import pytest

from hsrd import numkit, sdp
from conftest import random_density, random_pure


def bell_projector():
    v = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
    return np.outer(v, v.conj())


def test_min_trace_dominating_density(gen):
    rho = random_density(gen, 3)
    sol = sdp.solve(sdp.min_trace_kron_problem(rho, 1, 3))
    assert sol.status == sdp.STATUS_OPTIMAL
    assert abs(sol.value - 1.0) < 1e-6


def test_min_trace_kron_bell():
    sol = sdp.solve(sdp.min_trace_kron_problem(bell_projector(), 2, 2))
    assert sol.status == sdp.STATUS_OPTIMAL
    assert abs(sol.value - 2.0) < 1e-6


def test_fidelity_commuting():
    p = np.array([0.2, 0.5, 0.3])
    q = np.array([0.6, 0.1, 0.3])
    sol = sdp.solve(sdp.fidelity_problem(np.diag(p).astype(complex), np.diag(q).astype(complex)))
    assert sol.status == sdp.STATUS_OPTIMAL
    assert abs(sol.value - np.sum(np.sqrt(p * q))) < 1e-6


def test_fidelity_matches_eigen_formula(gen):
    for _ in range(10):
        rho = random_density(gen, 3)
        sig = random_density(gen, 3)
        sol = sdp.solve(sdp.fidelity_problem(rho, sig))
        assert abs(sol.value - numkit.fidelity(rho, sig)) < 1e-6


def test_kkt_certificates(gen):
    for _ in range(10):
        d_a, d_b = 2, 3
        rho = random_density(gen, d_a * d_b)
        sol = sdp.solve(sdp.min_trace_kron_problem(rho, d_a, d_b))
        assert sol.status == sdp.STATUS_OPTIMAL
        # certified duality gap and primal/dual feasibility residuals
        assert abs(sol.gap) <= 1e-6 * max(1.0, abs(sol.value))
        assert sol.residuals["primal_cone"] <= 1e-8
        assert sol.residuals["dual_eq"] <= 1e-7
        X = sol.residuals["dual"]["X"]
        assert np.linalg.eigvalsh(numkit.hermitize(X))[0] >= -1e-10


def test_determinism(gen):
    rho = random_density(gen, 6)
    a = sdp.solve(sdp.min_trace_kron_problem(rho, 2, 3)).value
    b = sdp.solve(sdp.min_trace_kron_problem(rho, 2, 3)).value
    assert a == b
    p1 = sdp.solve(sdp.smooth_min_entropy_problem(rho, 2, 3, 0.1)).value
    p2 = sdp.solve(sdp.smooth_min_entropy_problem(rho, 2, 3, 0.1)).value
    assert abs(p1 - p2) < 1e-9


def test_smooth_problem_pinned_values():
    pure = np.zeros((2, 2), dtype=complex)
    pure[0, 0] = 1.0
    sol = sdp.solve(sdp.smooth_min_entropy_problem(pure, 2, 1, 0.1))
    assert abs(-np.log2(sol.value) - (-np.log2(1 - 0.01))) < 1e-5
    sol = sdp.solve(sdp.smooth_min_entropy_problem(np.eye(2, dtype=complex) / 2, 2, 1, 0.1))
    assert abs(-np.log2(sol.value) - (1 - np.log2(1 - 0.01))) < 1e-5


def test_tolerance_floor():
    with pytest.raises(ValueError):
        sdp.solve(sdp.min_trace_kron_problem(np.eye(2, dtype=complex) / 2, 1, 2), tol=1e-12)


def test_infeasible_detection():
    # x >= 0, x <= -1 has no solution
    p = sdp.SdpProblem()
    p.add_scalar("x", nonneg=True)
    p.objective.append((0, 1.0))
    p.lin_ineq.append(([(0, 1.0)], -1.0))
    sol = sdp.solve(p)
    assert sol.status == sdp.STATUS_INFEASIBLE


def test_conelp_general_psd_block(gen):
    # min Tr Y s.t. Y >= rho via the generic path (explicit LMI), cross-check fast path
    rho = random_density(gen, 3)
    p = sdp.SdpProblem()
    p.add_herm_block("Y", 3, psd=True)
    p.objective_trace("Y", np.eye(3))
    lmi = p.add_lmi(3, -rho)
    p.lmi_kron_identity(lmi, "Y", 1, 0)
    sol = sdp.solve(p)
    assert sol.status == sdp.STATUS_OPTIMAL
    assert abs(sol.value - 1.0) < 1e-6
    Y = sol.primal["Y"]
    assert np.linalg.eigvalsh(numkit.hermitize(Y - rho))[0] >= -1e-7
