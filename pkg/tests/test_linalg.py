"""Solver tests: frozen oracles, enumeration cross-checks, invariants."""

from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import sparse

from bsfree.linalg import (
    CgConfig,
    PsorConfig,
    SolverError,
    cg_solve,
    complementarity_residual,
    dense_solve,
    psor_solve,
)


def _random_spd(n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, n))
    A = B @ B.T + n * np.eye(n)
    b = rng.standard_normal(n)
    return A, b


def test_cg_two_by_two_oracle() -> None:
    A = np.array([[2.0, -1.0], [-1.0, 2.0]])
    b = np.array([1.0, 1.0])
    x, info = cg_solve(A, b)
    assert np.allclose(x, [1.0, 1.0], atol=1e-12)
    assert info.converged
    assert info.iterations <= 2


def test_cg_zero_rhs_returns_zero_without_iterating() -> None:
    A = np.array([[2.0, -1.0], [-1.0, 2.0]])
    x, info = cg_solve(A, np.zeros(2))
    assert np.array_equal(x, np.zeros(2))
    assert info.iterations == 0


@given(seed=st.integers(min_value=0, max_value=10_000), n=st.integers(min_value=2, max_value=30))
@settings(max_examples=25, deadline=None)
def test_cg_matches_direct_solve(seed: int, n: int) -> None:
    A, b = _random_spd(n, seed)
    x, info = cg_solve(A, b, config=CgConfig(rel_tol=1e-13, abs_tol=0.0))
    assert info.converged
    assert np.allclose(x, np.linalg.solve(A, b), atol=1e-8, rtol=1e-8)


def test_cg_permutation_equivariant() -> None:
    A, b = _random_spd(25, seed=3)
    perm = np.random.default_rng(4).permutation(25)
    x, _ = cg_solve(A, b, config=CgConfig(rel_tol=1e-13))
    xp, _ = cg_solve(A[np.ix_(perm, perm)], b[perm], config=CgConfig(rel_tol=1e-13))
    assert np.allclose(xp, x[perm], atol=1e-9)


def test_cg_is_deterministic() -> None:
    A, b = _random_spd(20, seed=11)
    x1, info1 = cg_solve(A, b)
    x2, info2 = cg_solve(A, b)
    assert np.array_equal(x1, x2)
    assert info1 == info2


def test_cg_warm_start_skips_work() -> None:
    A, b = _random_spd(15, seed=5)
    x, _ = cg_solve(A, b, config=CgConfig(rel_tol=1e-14))
    x2, info = cg_solve(A, b, x0=x, config=CgConfig(rel_tol=1e-10))
    assert info.iterations == 0
    assert np.array_equal(x2, x)


def test_cg_jacobi_helps_badly_scaled_systems() -> None:
    rng = np.random.default_rng(9)
    scales = 10.0 ** rng.uniform(-4, 4, size=40)
    A0, b = _random_spd(40, seed=12)
    A = sparse.csr_matrix(np.diag(scales) @ A0 @ np.diag(scales))
    plain = cg_solve(A, b, config=CgConfig(rel_tol=1e-10, max_iter=4000))[1]
    jac = cg_solve(A, b, config=CgConfig(rel_tol=1e-10, preconditioner="jacobi", max_iter=4000))[1]
    assert jac.converged
    assert jac.iterations < plain.iterations


def test_cg_rejects_indefinite_operator() -> None:
    A = np.array([[1.0, 2.0], [2.0, 1.0]])  # eigenvalues 3 and -1
    with pytest.raises(SolverError, match="positive definite"):
        cg_solve(A, np.array([0.3, -1.0]))


def test_cg_reports_non_convergence() -> None:
    A, b = _random_spd(30, seed=8)
    x, info = cg_solve(A, b, config=CgConfig(rel_tol=1e-14, abs_tol=0.0, max_iter=1))
    assert not info.converged
    assert info.iterations == 1


def test_cg_config_validation() -> None:
    with pytest.raises(ValueError, match="preconditioner"):
        CgConfig(preconditioner="ilu")
    with pytest.raises(ValueError, match="non-negative"):
        CgConfig(rel_tol=-1.0)


def test_dense_solve_oracle() -> None:
    A = np.array([[4.0, 3.0], [6.0, 3.0]])
    b = np.array([10.0, 12.0])
    assert np.allclose(dense_solve(A, b), [1.0, 2.0], atol=1e-9)


def _enumerate_lcp(A: np.ndarray, b: np.ndarray, constrained: np.ndarray) -> np.ndarray:
    """Brute-force LCP solution by trying every active set."""
    n = A.shape[0]
    for active in itertools.chain.from_iterable(
        itertools.combinations(constrained, k) for k in range(len(constrained) + 1)
    ):
        active = np.asarray(active, dtype=int)
        free = np.setdiff1d(np.arange(n), active)
        x = np.zeros(n)
        x[free] = np.linalg.solve(A[np.ix_(free, free)], b[free])
        rho = A @ x - b
        inactive = np.setdiff1d(constrained, active)
        if inactive.size and np.min(x[inactive]) < -1e-10:
            continue
        if active.size and np.min(rho[active]) < -1e-10:
            continue
        return x
    raise AssertionError("enumeration found no KKT point")


def test_psor_all_constraints_active_oracle() -> None:
    A = sparse.csr_matrix(np.array([[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]]))
    b = np.array([-1.0, -1.0, -1.0])
    x, info = psor_solve(A, b, constrained=np.arange(3))
    assert info.converged
    assert np.array_equal(x, np.zeros(3))
    assert info.comp_residual == 0.0


def test_psor_partial_contact_oracle() -> None:
    A = np.array([[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]])
    b = np.array([1.0, -3.0, 1.0])
    x, info = psor_solve(sparse.csr_matrix(A), b, constrained=np.arange(3))
    assert info.converged
    expected = _enumerate_lcp(A, b, np.arange(3))
    assert np.allclose(x, expected, atol=1e-9)
    assert x[1] == 0.0 and x[0] > 0.0 and x[2] > 0.0


@given(seed=st.integers(min_value=0, max_value=10_000))
@settings(max_examples=25, deadline=None)
def test_psor_matches_enumeration(seed: int) -> None:
    rng = np.random.default_rng(seed)
    n = 7
    A, _ = _random_spd(n, seed)
    b = rng.standard_normal(n) * 2.0
    constrained = np.flatnonzero(rng.random(n) < 0.6)
    x, info = psor_solve(
        sparse.csr_matrix(A), b, constrained, config=PsorConfig(update_tol=1e-12)
    )
    assert info.converged
    expected = _enumerate_lcp(A, b, constrained)
    assert np.allclose(x, expected, atol=1e-7)


def test_psor_kkt_invariants_on_converged_solve() -> None:
    A, _ = _random_spd(12, seed=21)
    b = np.random.default_rng(22).standard_normal(12)
    constrained = np.arange(0, 12, 2)
    x, info = psor_solve(sparse.csr_matrix(A), b, constrained)
    assert info.converged
    rho = A @ x - b
    lam = -rho[constrained]  # multiplier convention: lam <= 0 at the bound
    assert x[constrained].min() >= -1e-12
    assert lam.max() <= 1e-8
    assert np.max(np.abs(x[constrained] * lam)) <= 1e-8


def test_psor_energy_never_increases_over_sweeps() -> None:
    A, _ = _random_spd(10, seed=31)
    b = np.random.default_rng(32).standard_normal(10)
    As = sparse.csr_matrix(A)
    constrained = np.arange(10)

    def energy(v: np.ndarray) -> float:
        return 0.5 * float(v @ (A @ v)) - float(b @ v)

    values = []
    for sweeps in range(1, 12):
        x, _ = psor_solve(
            As, b, constrained, config=PsorConfig(update_tol=0.0, max_sweeps=sweeps)
        )
        values.append(energy(x))
    assert all(values[i + 1] <= values[i] + 1e-12 for i in range(len(values) - 1))


def test_psor_unconstrained_is_sor() -> None:
    A, b = _random_spd(9, seed=41)
    x, info = psor_solve(
        sparse.csr_matrix(A), b, constrained=np.array([], dtype=int),
        config=PsorConfig(update_tol=1e-13),
    )
    assert info.converged
    assert np.allclose(x, np.linalg.solve(A, b), atol=1e-8)


def test_psor_reports_stall_honestly() -> None:
    A, _ = _random_spd(8, seed=51)
    b = np.random.default_rng(52).standard_normal(8)
    x, info = psor_solve(
        sparse.csr_matrix(A), b, np.arange(8), config=PsorConfig(max_sweeps=1)
    )
    assert not info.converged
    assert info.sweeps == 1


def test_complementarity_residual_definition() -> None:
    A = np.eye(2)
    b = np.array([1.0, -1.0])
    # x = (1, 0): rho = (0, 1); constrained row 1 satisfies min(0, 1) = 0.
    assert complementarity_residual(A, b, np.array([1.0, 0.0]), np.array([1])) == 0.0
    # x = (0.5, 0): unconstrained row 0 has residual -0.5.
    assert complementarity_residual(A, b, np.array([0.5, 0.0]), np.array([1])) == 0.5


def test_psor_config_validation() -> None:
    with pytest.raises(ValueError, match="relaxation"):
        PsorConfig(omega=2.0)
