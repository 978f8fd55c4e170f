"""LDL^T factorization: inertia against dense eigenvalues, solve accuracy."""

import numpy as np
import pytest
import scipy.sparse as sp

from opfkit.sparseldl import SymmetricSolver, factor_and_solve


def quasi_definite(rng, n, m, delta=1e-3):
    """Random KKT-shaped matrix [[H, A'], [A, -delta I]] with H spd."""
    B = rng.standard_normal((n, n))
    H = B @ B.T + n * np.eye(n)
    A = rng.standard_normal((m, n))
    K = np.block([[H, A.T], [A, -delta * np.eye(m)]])
    return sp.csc_matrix(K)


@pytest.mark.parametrize("seed,n,m", [(0, 6, 3), (1, 12, 5), (2, 25, 10)])
def test_inertia_matches_dense_eigenvalues(seed, n, m):
    rng = np.random.default_rng(seed)
    K = quasi_definite(rng, n, m)
    solver = SymmetricSolver()
    rep = solver.factor(K)
    w = np.linalg.eigvalsh(K.toarray())
    assert rep.n_pos == int(np.sum(w > 0))
    assert rep.n_neg == int(np.sum(w < 0))


@pytest.mark.parametrize("seed", range(4))
def test_solve_matches_dense(seed):
    rng = np.random.default_rng(seed)
    K = quasi_definite(rng, 15, 6)
    b = rng.standard_normal(21)
    x, rep = factor_and_solve(K, b)
    ref = np.linalg.solve(K.toarray(), b)
    assert np.max(np.abs(x - ref)) <= 1e-8 * max(1.0, np.max(np.abs(ref)))
    assert rep.n_pos == 15 and rep.n_neg == 6


def test_indefinite_h_block_detected():
    # H indefinite and Schur complement -d - A H^-1 A' negative: two negs
    H = np.diag([2.0, -1.0, 3.0])
    A = np.array([[2.0, 0.0, 0.0]])
    K = sp.csc_matrix(np.block([[H, A.T], [A, -1e-8 * np.eye(1)]]))
    rep = SymmetricSolver().factor(K)
    w = np.linalg.eigvalsh(K.toarray())
    assert int(np.sum(w < 0)) == 2
    assert rep.n_neg == 2 and rep.n_pos == 2


def test_refactor_reuses_symbolic_analysis():
    rng = np.random.default_rng(9)
    K1 = quasi_definite(rng, 10, 4)
    K2 = K1.copy()
    K2.data = K2.data * 1.7  # same pattern, different values
    solver = SymmetricSolver()
    solver.factor(K1)
    b = rng.standard_normal(14)
    x1 = solver.solve(b)
    solver.factor(K2)
    x2 = solver.solve(b)
    assert np.allclose(K1 @ x1, b, atol=1e-9)
    assert np.allclose(K2 @ x2, b, atol=1e-9)
    assert not np.allclose(x1, x2)


def test_zero_pivot_reported_not_raised():
    # factor() reports failure so callers can regularize and retry
    K = sp.csc_matrix(np.array([[0.0, 0.0], [0.0, 1.0]]))
    rep = SymmetricSolver().factor(K)
    assert not rep.ok
    assert rep.zero_pivot_at >= 0


def test_singular_one_shot_raises():
    A = np.array([[1.0, 2.0], [2.0, 4.0]])  # rank 1, symmetric
    with pytest.raises(np.linalg.LinAlgError):
        factor_and_solve(sp.csc_matrix(A), np.ones(2))


def test_one_by_one():
    x, rep = factor_and_solve(sp.csc_matrix(np.array([[4.0]])), np.array([2.0]))
    assert x[0] == pytest.approx(0.5)
    assert rep.n_pos == 1 and rep.n_neg == 0


def test_rejects_nonsquare():
    K = sp.csc_matrix(np.ones((2, 3)))
    with pytest.raises(ValueError):
        SymmetricSolver().factor(K)
