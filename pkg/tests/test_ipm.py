"""Interior-point solver: QP fixtures, Newton-step oracle, line search."""

import numpy as np
import pytest
import scipy.sparse as sp

from opfkit.errors import EvalError
from opfkit.formulation import EvalBundle
from opfkit.ipm import (
    OPTIMAL,
    STEP_FAILURE,
    Direction,
    IpmOptions,
    IterateState,
    KktResiduals,
    QuadraticProblem,
    SolveResult,
    binding_constraints,
    check_kkt,
    initial_duals,
    max_step,
    newton_step,
    solve,
)


def test_qp_scalar_inequality():
    # min x^2 s.t. x >= 1: x* = 1, f* = 1, nu* = 2
    qp = QuadraticProblem(Q=[[2.0]], A_in=[[-1.0]], b_in=[-1.0])
    res = solve(qp, IpmOptions(), np.array([5.0]))
    assert res.status == OPTIMAL
    assert abs(res.x[0] - 1.0) <= 1e-8
    assert abs(res.objective - 1.0) <= 1e-8
    assert abs(res.nu[0] - 2.0) <= 1e-6


def test_qp_equality_projection():
    # min (x-1)^2 + (y-2)^2 s.t. x + y = 1: x* = (0, 1), lam* = 2
    qp = QuadraticProblem(
        Q=2 * np.eye(2), c=[-2.0, -4.0], c0=5.0, A_eq=[[1.0, 1.0]], b_eq=[1.0]
    )
    res = solve(qp, IpmOptions(), np.array([3.0, -3.0]))
    assert res.status == OPTIMAL
    assert np.max(np.abs(res.x - np.array([0.0, 1.0]))) <= 1e-8
    assert abs(res.objective - 2.0) <= 1e-8
    assert abs(res.lam[0] - 2.0) <= 1e-6


def test_qp_active_box_bound():
    # min (x+2)^2 on [0, 3]: x* = 0 with lower-bound dual 4
    qp = QuadraticProblem(Q=[[2.0]], c=[4.0], c0=4.0, lo=[0.0], hi=[3.0])
    res = solve(qp, IpmOptions(), np.array([1.5]))
    assert res.status == OPTIMAL
    assert abs(res.x[0]) <= 1e-8
    assert abs(res.z_lo[0] - 4.0) <= 1e-6
    assert res.kkt.worst <= 1e-8


def test_qp_duplicated_equality_rows_still_solve():
    # rank-deficient J_h exercises the equality-block regularization
    qp = QuadraticProblem(
        Q=2 * np.eye(2), c=[-2.0, -4.0], c0=5.0,
        A_eq=[[1.0, 1.0], [1.0, 1.0]], b_eq=[1.0, 1.0],
    )
    res = solve(qp, IpmOptions(), np.array([3.0, -3.0]))
    assert res.status == OPTIMAL
    assert np.max(np.abs(res.x - np.array([0.0, 1.0]))) <= 1e-6


def test_newton_direction_satisfies_linearized_kkt():
    rng = np.random.default_rng(11)
    n, m, p = 6, 2, 3
    B = rng.standard_normal((n, n))
    qp = QuadraticProblem(
        Q=B @ B.T + n * np.eye(n),
        c=rng.standard_normal(n),
        A_eq=rng.standard_normal((m, n)),
        b_eq=rng.standard_normal(m),
        A_in=rng.standard_normal((p, n)),
        b_in=rng.standard_normal(p) + 5.0,
        lo=np.full(n, -10.0),
        hi=np.full(n, 10.0),
    )
    opts = IpmOptions()
    x = rng.uniform(-1.0, 1.0, n)
    s, lam, nu, z_lo, z_hi = initial_duals(qp, x, opts)
    state = IterateState(x=x, s=s, lam=lam, nu=nu, z_lo=z_lo, z_hi=z_hi, mu=opts.mu0)
    bundle = qp.eval(x, lam, nu, order=2)
    mu = opts.mu0
    d = newton_step(qp, bundle, state, mu, opts)

    rd = bundle.grad + bundle.J_h.T @ lam + bundle.J_g.T @ nu - z_lo + z_hi
    lhs_dual = (
        (bundle.H + d.delta_w * sp.eye(n)) @ d.dx
        + bundle.J_h.T @ d.dlam
        + bundle.J_g.T @ d.dnu
        - d.dz_lo
        + d.dz_hi
    )
    assert np.max(np.abs(lhs_dual + rd)) <= 1e-9
    assert np.max(np.abs(bundle.J_h @ d.dx - d.delta_c * d.dlam + bundle.h)) <= 1e-9
    assert np.max(np.abs(bundle.J_g @ d.dx + d.ds + bundle.g + s)) <= 1e-9
    assert np.max(np.abs(nu * d.ds + s * d.dnu + (s * nu - mu))) <= 1e-9
    sl, sh = x - qp.lo, qp.hi - x
    assert np.max(np.abs(z_lo * d.dx + sl * d.dz_lo + (sl * z_lo - mu))) <= 1e-9
    assert np.max(np.abs(-z_hi * d.dx + sh * d.dz_hi + (sh * z_hi - mu))) <= 1e-9


def test_fraction_to_boundary_cap():
    # slack 1 with step -2 caps alpha at tau/2
    state = IterateState(
        x=np.array([0.0]), s=np.array([1.0]), lam=np.zeros(0),
        nu=np.array([1.0]), z_lo=np.zeros(1), z_hi=np.zeros(1), mu=0.1,
    )
    d = Direction(
        dx=np.array([0.0]), ds=np.array([-2.0]), dlam=np.zeros(0),
        dnu=np.zeros(1), dz_lo=np.zeros(1), dz_hi=np.zeros(1),
        delta_w=0.0, delta_c=0.0,
    )
    a = max_step(state, d, np.array([-np.inf]), np.array([np.inf]), 0.995)
    assert a == pytest.approx(0.995 / 2.0)


class OffTheIslandProblem:
    """Evaluates only at the start point; every trial step fails."""

    n_var, n_eq, n_ineq = 1, 0, 0
    lo = np.array([-np.inf])
    hi = np.array([np.inf])

    def eval(self, x, lam=None, nu=None, order=2):
        if abs(x[0] - 3.0) > 1e-9:
            raise EvalError("off the island")
        bundle = EvalBundle(f=4.0, h=np.zeros(0), g=np.zeros(0))
        if order >= 1:
            bundle.grad = np.array([-4.0])
            bundle.J_h = sp.csr_matrix((0, 1))
            bundle.J_g = sp.csr_matrix((0, 1))
        if order >= 2:
            bundle.H = sp.csr_matrix(np.array([[2.0]]))
        return bundle


def test_unsteppable_problem_reports_step_failure():
    res = solve(OffTheIslandProblem(), IpmOptions(), np.array([3.0]))
    assert res.status == STEP_FAILURE


def test_barrier_parameter_monotone():
    qp = QuadraticProblem(
        Q=2 * np.eye(2), c=[-2.0, -4.0], c0=5.0,
        A_in=[[1.0, 1.0]], b_in=[1.0], lo=[-5.0, -5.0], hi=[5.0, 5.0],
    )
    res = solve(qp, IpmOptions(collect_trace=True), np.array([0.0, 0.0]))
    assert res.status == OPTIMAL
    mus = [t["mu"] for t in res.trace]
    assert all(b <= a + 1e-15 for a, b in zip(mus, mus[1:]))
    assert res.trace[-1]["mu"] <= 1e-8


def test_check_kkt_recomputes_stored_residuals():
    qp = QuadraticProblem(Q=[[2.0]], A_in=[[-1.0]], b_in=[-1.0])
    res = solve(qp, IpmOptions(), np.array([5.0]))
    again = check_kkt(qp, res)
    assert again.worst <= max(1e-8, 2.0 * res.kkt.worst + 1e-12)


def test_binding_constraints_mask():
    res = SolveResult(
        status=OPTIMAL, objective=0.0,
        x=np.zeros(1), s=np.array([1e-9, 0.5, 1e-9, 0.2]),
        lam=np.zeros(0), nu=np.array([3.0, 1e-9, 1e-9, 2.0]),
        z_lo=np.zeros(1), z_hi=np.zeros(1),
        g=np.array([-1e-9, -0.5, -1e-9, -0.2]), h=np.zeros(0),
        iterations=1, kkt=KktResiduals(0.0, 0.0, 0.0), timings={},
    )
    mask = binding_constraints(res)
    # row 0: active by value and multiplier; row 2: active by value with
    # tiny multiplier; row 3: inactive value, strong multiplier, open slack
    assert mask.tolist() == [True, False, True, False]


def test_options_validation():
    with pytest.raises(ValueError):
        IpmOptions(sigma=1.5)
    with pytest.raises(ValueError):
        IpmOptions(tau=0.0)
    with pytest.raises(ValueError):
        IpmOptions(tol=-1.0)
    with pytest.raises(ValueError):
        IpmOptions(reg_min=0.0)


def test_solve_requires_start_point():
    qp = QuadraticProblem(Q=[[2.0]])
    with pytest.raises(ValueError):
        solve(qp, IpmOptions())
