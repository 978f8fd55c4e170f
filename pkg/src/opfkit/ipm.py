"""Primal-dual interior-point solver on a reduced symmetric KKT system.

Solves problems of the form

    min f(x)   s.t.   h(x) = 0,   g(x) + s = 0,  s > 0,   lo <= x <= hi

through a monotone barrier homotopy: Newton steps on the perturbed KKT
conditions at fixed mu until their residual drops below kappa * mu, then
mu shrinks geometrically down to a floor of tol / 10.  Inequality slack
and bound blocks are eliminated analytically, leaving a symmetric
quasi-definite system in (dx, dlam) that is factorized by sparse LDL^T;
an inertia-correction loop adds delta_w to the Hessian block (doubling
from reg_min) and, when the equality Jacobian itself is rank deficient,
delta_c to the constraint block, until the inertia is exactly
(n_var, n_eq, 0).  Steps are damped by a fraction-to-boundary rule and an
l1 merit line search with Armijo backtracking; a rejected full step gets
one second-order correction (re-solving the cached factorization against
the trial constraint residuals) before backtracking begins, which removes
the quadratic infeasibility growth that otherwise stalls steps near the
central path.

The problem object must provide n_var, n_eq, n_ineq, lo, hi, and
eval(x, lam, nu, order) returning a formulation.EvalBundle.  A generic
QuadraticProblem implementation lives here for linear/quadratic programs
(DC OPF, test fixtures).
"""

from __future__ import annotations

import math
import sys
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .errors import EvalError, FactorizationError
from .formulation import EvalBundle
from .sparseldl import SymmetricSolver

OPTIMAL = "OPTIMAL"
MAX_ITER = "MAX_ITER"
STEP_FAILURE = "STEP_FAILURE"
INFEASIBLE_DETECTED = "INFEASIBLE_DETECTED"


@dataclass
class IpmOptions:
    """Solver parameters.  Defaults are the production settings."""

    mu0: float = 1e-1
    sigma: float = 0.2
    tol: float = 1e-8
    max_iter: int = 300
    tau: float = 0.995
    reg_min: float = 1e-10
    reg_max: float = 1e-2
    reg_eq: float = 1e-8
    bound_relax: float = 1e-8
    kappa_mu: float = 10.0
    armijo: float = 1e-4
    alpha_min: float = 1e-12
    verbose: bool = False
    log_path: Optional[str] = None
    collect_trace: bool = False

    def __post_init__(self):
        if not 0.0 < self.sigma < 1.0:
            raise ValueError("sigma must lie in (0, 1)")
        if not 0.0 < self.tau < 1.0:
            raise ValueError("tau must lie in (0, 1)")
        if self.tol <= 0.0 or self.mu0 <= 0.0:
            raise ValueError("tol and mu0 must be positive")
        if self.reg_min <= 0.0 or self.reg_max < self.reg_min:
            raise ValueError("need 0 < reg_min <= reg_max")


@dataclass
class IterateState:
    """Primal-dual iterate: variables, slacks, and all multipliers."""

    x: np.ndarray
    s: np.ndarray
    lam: np.ndarray
    nu: np.ndarray
    z_lo: np.ndarray
    z_hi: np.ndarray
    mu: float


@dataclass
class Direction:
    dx: np.ndarray
    ds: np.ndarray
    dlam: np.ndarray
    dnu: np.ndarray
    dz_lo: np.ndarray
    dz_hi: np.ndarray
    delta_w: float
    delta_c: float
    # second-order correction hook: (h_trial, g_trial + s_trial) ->
    # (dx_c, ds_c) via the factorization that produced this direction
    soc: Optional[object] = None


@dataclass
class KktResiduals:
    """Unperturbed KKT residual infinity norms."""

    dual: float
    primal: float
    comp: float

    @property
    def worst(self) -> float:
        return max(self.dual, self.primal, self.comp)


@dataclass
class SolveResult:
    status: str
    objective: float
    x: np.ndarray
    s: np.ndarray
    lam: np.ndarray
    nu: np.ndarray
    z_lo: np.ndarray
    z_hi: np.ndarray
    g: np.ndarray
    h: np.ndarray
    iterations: int
    kkt: KktResiduals
    timings: dict
    trace: Optional[list] = None
    label: str = ""
    ineq_kind: Optional[np.ndarray] = None
    ineq_branch: Optional[np.ndarray] = None
    ineq_from: Optional[np.ndarray] = None
    ineq_to: Optional[np.ndarray] = None

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def _bound_masks(lo, hi):
    return np.isfinite(lo), np.isfinite(hi)


def _residuals(bundle, state, lo, hi, mu: float) -> KktResiduals:
    """KKT residuals at perturbation mu (mu = 0 gives the exact ones)."""
    has_lo, has_hi = _bound_masks(lo, hi)
    rd = bundle.grad.copy()
    if bundle.J_h is not None and bundle.J_h.shape[0]:
        rd += bundle.J_h.T @ state.lam
    if bundle.J_g is not None and bundle.J_g.shape[0]:
        rd += bundle.J_g.T @ state.nu
    rd -= state.z_lo
    rd += state.z_hi
    dual = float(np.max(np.abs(rd))) if rd.size else 0.0

    primal = 0.0
    if bundle.h is not None and bundle.h.size:
        primal = float(np.max(np.abs(bundle.h)))
    if bundle.g is not None and bundle.g.size:
        primal = max(primal, float(np.max(np.abs(bundle.g + state.s))))

    comp = 0.0
    if state.s.size:
        comp = float(np.max(np.abs(state.s * state.nu - mu)))
    if has_lo.any():
        sl = state.x[has_lo] - lo[has_lo]
        comp = max(comp, float(np.max(np.abs(sl * state.z_lo[has_lo] - mu))))
    if has_hi.any():
        sh = hi[has_hi] - state.x[has_hi]
        comp = max(comp, float(np.max(np.abs(sh * state.z_hi[has_hi] - mu))))
    return KktResiduals(dual=dual, primal=primal, comp=comp)


def kkt_residuals(problem, x, lam, nu, s, z_lo, z_hi) -> KktResiduals:
    """Recompute unperturbed KKT residuals from scratch at a given point."""
    bundle = problem.eval(x, lam, nu, order=1)
    state = IterateState(x=x, s=s, lam=lam, nu=nu, z_lo=z_lo, z_hi=z_hi, mu=0.0)
    return _residuals(bundle, state, problem.lo, problem.hi, 0.0)


def check_kkt(problem, result: SolveResult) -> KktResiduals:
    """Independent KKT certificate for a finished solve."""
    return kkt_residuals(
        problem, result.x, result.lam, result.nu, result.s,
        result.z_lo, result.z_hi,
    )


def newton_step(
    problem, bundle, state: IterateState, mu: float, opts: IpmOptions,
    solver: Optional[SymmetricSolver] = None,
) -> Direction:
    """One primal-dual Newton direction via the reduced (dx, dlam) system.

    Slack, inequality-dual, and bound-dual blocks are eliminated exactly;
    the remaining symmetric system is factorized with inertia correction.
    Raises FactorizationError if no regularization in range fixes it.
    """
    lo, hi = problem.lo, problem.hi
    has_lo, has_hi = _bound_masks(lo, hi)
    n = problem.n_var
    m = problem.n_eq
    x, s, lam, nu = state.x, state.s, state.lam, state.nu

    rd = bundle.grad.copy()
    if m:
        rd += bundle.J_h.T @ lam
    if problem.n_ineq:
        rd += bundle.J_g.T @ nu
    rd -= state.z_lo
    rd += state.z_hi

    sl = np.where(has_lo, x - lo, 1.0)
    sh = np.where(has_hi, hi - x, 1.0)
    r_lo = np.where(has_lo, sl * state.z_lo - mu, 0.0)
    r_hi = np.where(has_hi, sh * state.z_hi - mu, 0.0)
    sigma_b = np.where(has_lo, state.z_lo / sl, 0.0) + np.where(
        has_hi, state.z_hi / sh, 0.0
    )

    rhs_x = -rd - np.where(has_lo, r_lo / sl, 0.0) + np.where(has_hi, r_hi / sh, 0.0)
    if problem.n_ineq:
        r_g = bundle.g + s
        r_cs = s * nu - mu
        d_in = nu / s
        rhs_x -= bundle.J_g.T @ (d_in * r_g - r_cs / s)
        M_in = (bundle.J_g.T @ bundle.J_g.multiply(d_in[:, None])).tocsr()
    else:
        r_g = np.zeros(0)
        r_cs = np.zeros(0)
        d_in = np.zeros(0)
        M_in = sp.csr_matrix((n, n))

    H = bundle.H.tocsr()
    rhs = np.concatenate([rhs_x, -bundle.h]) if m else rhs_x
    solver = solver or SymmetricSolver()

    delta_w = 0.0
    delta_c = 0.0
    while True:
        M = (H + M_in + sp.diags(sigma_b + delta_w, format="csr")).tocsr()
        if m:
            K = sp.vstack(
                [
                    sp.hstack([M, bundle.J_h.T]),
                    sp.hstack([bundle.J_h, sp.diags(np.full(m, -delta_c))]),
                ]
            ).tocsc()
        else:
            K = M.tocsc()
        rep = solver.factor(K)
        if rep.ok and rep.inertia == (n, m, 0):
            break
        if (not rep.ok or rep.inertia[2] > 0) and delta_c == 0.0:
            delta_c = opts.reg_eq
            continue
        delta_w = opts.reg_min if delta_w == 0.0 else 2.0 * delta_w
        if delta_w > opts.reg_max:
            raise FactorizationError(
                f"KKT inertia not correctable within reg_max={opts.reg_max}"
            )

    step = solver.solve(rhs)
    # one round of iterative refinement keeps the back-substituted full
    # system residual at noise level even for ill-conditioned barriers
    resid = rhs - K @ step
    scale = max(1.0, float(np.max(np.abs(rhs))))
    if np.max(np.abs(resid)) > 1e-12 * scale:
        step = step + solver.solve(resid)

    dx = step[:n]
    dlam = step[n:] if m else np.zeros(0)
    if problem.n_ineq:
        ds = -r_g - bundle.J_g @ dx
        dnu = -(r_cs + nu * ds) / s
    else:
        ds = np.zeros(0)
        dnu = np.zeros(0)
    dz_lo = np.where(has_lo, -(r_lo + state.z_lo * dx) / sl, 0.0)
    dz_hi = np.where(has_hi, -(r_hi - state.z_hi * dx) / sh, 0.0)

    J_g = bundle.J_g if problem.n_ineq else None

    def soc(h_t: np.ndarray, r_g_t: np.ndarray):
        """Primal correction: same KKT matrix, trial constraint residuals."""
        rx = -(J_g.T @ (d_in * r_g_t)) if J_g is not None else np.zeros(n)
        r = np.concatenate([rx, -h_t]) if m else rx
        c_step = solver.solve(r)
        res = r - K @ c_step
        if np.max(np.abs(res)) > 1e-12 * max(1.0, float(np.max(np.abs(r)))):
            c_step = c_step + solver.solve(res)
        dx_c = c_step[:n]
        ds_c = -r_g_t - J_g @ dx_c if J_g is not None else np.zeros(0)
        return dx_c, ds_c

    return Direction(
        dx=dx, ds=ds, dlam=dlam, dnu=dnu, dz_lo=dz_lo, dz_hi=dz_hi,
        delta_w=delta_w, delta_c=delta_c, soc=soc,
    )


def _ftb(v: np.ndarray, dv: np.ndarray, tau: float) -> float:
    """Largest alpha <= 1 with v + alpha * dv >= (1 - tau) * v."""
    neg = dv < 0.0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, np.min(-tau * v[neg] / dv[neg])))


def max_step(state: IterateState, d: Direction, lo, hi, tau: float) -> float:
    """Fraction-to-boundary cap over slacks, bound slacks, and duals."""
    has_lo, has_hi = _bound_masks(lo, hi)
    alpha = 1.0
    if state.s.size:
        alpha = min(alpha, _ftb(state.s, d.ds, tau))
        alpha = min(alpha, _ftb(state.nu, d.dnu, tau))
    if has_lo.any():
        alpha = min(alpha, _ftb(state.x[has_lo] - lo[has_lo], d.dx[has_lo], tau))
        alpha = min(alpha, _ftb(state.z_lo[has_lo], d.dz_lo[has_lo], tau))
    if has_hi.any():
        alpha = min(alpha, _ftb(hi[has_hi] - state.x[has_hi], -d.dx[has_hi], tau))
        alpha = min(alpha, _ftb(state.z_hi[has_hi], d.dz_hi[has_hi], tau))
    return alpha


def _merit(problem, x, s, mu, eta, f=None, h=None, g=None):
    """l1-penalized barrier merit.  Returns +inf outside the domain."""
    lo, hi = problem.lo, problem.hi
    has_lo, has_hi = _bound_masks(lo, hi)
    if f is None:
        b = problem.eval(x, order=0)
        f, h, g = b.f, b.h, b.g
    val = f
    if s.size:
        if np.any(s <= 0.0):
            return math.inf, 0.0
        val -= mu * float(np.sum(np.log(s)))
    if has_lo.any():
        sl = x[has_lo] - lo[has_lo]
        if np.any(sl <= 0.0):
            return math.inf, 0.0
        val -= mu * float(np.sum(np.log(sl)))
    if has_hi.any():
        sh = hi[has_hi] - x[has_hi]
        if np.any(sh <= 0.0):
            return math.inf, 0.0
        val -= mu * float(np.sum(np.log(sh)))
    feas = 0.0
    if h is not None and h.size:
        feas += float(np.sum(np.abs(h)))
    if g is not None and g.size:
        feas += float(np.sum(np.abs(g + s)))
    return val + eta * feas, feas


@dataclass
class StepInfo:
    alpha: float
    backtracks: int
    ok: bool
    eta: float
    soc_used: bool = False
    dx_corr: Optional[np.ndarray] = None
    ds_corr: Optional[np.ndarray] = None


def _trial_merit(problem, x, s, mu, eta):
    """Merit at a trial point plus the constraint values behind it."""
    try:
        b = problem.eval(x, order=0)
    except EvalError:
        return math.inf, 0.0, None, None
    val, feas = _merit(problem, x, s, mu, eta, f=b.f, h=b.h, g=b.g)
    return val, feas, b.h, b.g


def _soc_trial(problem, d: Direction, xt, st, h_t, g_t, mu, eta, tau):
    """Corrected trial point: solve for the constraint-restoring step,
    damp it by fraction-to-boundary at the trial point, evaluate merit."""
    r_h = h_t if h_t is not None and h_t.size else np.zeros(0)
    r_g = (g_t + st) if st.size else np.zeros(0)
    dx_c, ds_c = d.soc(r_h, r_g)
    lo, hi = problem.lo, problem.hi
    has_lo, has_hi = _bound_masks(lo, hi)
    a_c = 1.0
    if st.size:
        a_c = min(a_c, _ftb(st, ds_c, tau))
    if has_lo.any():
        a_c = min(a_c, _ftb(xt[has_lo] - lo[has_lo], dx_c[has_lo], tau))
    if has_hi.any():
        a_c = min(a_c, _ftb(hi[has_hi] - xt[has_hi], -dx_c[has_hi], tau))
    dx_c = a_c * dx_c
    ds_c = a_c * ds_c
    trial, _, _, _ = _trial_merit(problem, xt + dx_c, st + ds_c, mu, eta)
    return trial, dx_c, ds_c


def step_length(
    problem, bundle, state: IterateState, d: Direction, mu: float,
    opts: IpmOptions,
) -> StepInfo:
    """Fraction-to-boundary cap followed by Armijo backtracking.

    The l1 penalty weight is set fresh each call from the updated
    equality and inequality multipliers (the exact-penalty threshold);
    it is deliberately not ratcheted across iterations, since a stale
    large weight turns the merit function against tangential steps.
    When the first trial fails while increasing infeasibility, one
    second-order correction is attempted before halving begins.
    """
    lo, hi = problem.lo, problem.hi
    has_lo, has_hi = _bound_masks(lo, hi)
    eta = max(
        1.0,
        1.1 * max(
            float(np.max(np.abs(state.lam + d.dlam))) if d.dlam.size else 0.0,
            float(np.max(np.abs(state.nu + d.dnu))) if d.dnu.size else 0.0,
        ),
    )
    merit0, feas0 = _merit(
        problem, state.x, state.s, mu, eta, f=bundle.f, h=bundle.h, g=bundle.g
    )

    dd = float(bundle.grad @ d.dx)
    if state.s.size:
        dd -= mu * float(np.sum(d.ds / state.s))
    if has_lo.any():
        dd -= mu * float(np.sum(d.dx[has_lo] / (state.x[has_lo] - lo[has_lo])))
    if has_hi.any():
        dd += mu * float(np.sum(d.dx[has_hi] / (hi[has_hi] - state.x[has_hi])))
    dd -= eta * feas0

    alpha = max_step(state, d, lo, hi, opts.tau)
    backtracks = 0
    while alpha >= opts.alpha_min:
        xt = state.x + alpha * d.dx
        st = state.s + alpha * d.ds
        trial, feas_t, h_t, g_t = _trial_merit(problem, xt, st, mu, eta)
        bound = merit0 + opts.armijo * alpha * dd
        if trial <= bound:
            return StepInfo(alpha=alpha, backtracks=backtracks, ok=True, eta=eta)
        if (
            backtracks == 0 and d.soc is not None and h_t is not None
            and feas_t > feas0
        ):
            trial_c, dx_c, ds_c = _soc_trial(
                problem, d, xt, st, h_t, g_t, mu, eta, opts.tau
            )
            if trial_c <= bound:
                return StepInfo(
                    alpha=alpha, backtracks=0, ok=True, eta=eta,
                    soc_used=True, dx_corr=dx_c, ds_corr=ds_c,
                )
        alpha *= 0.5
        backtracks += 1
    return StepInfo(alpha=0.0, backtracks=backtracks, ok=False, eta=eta)


def initial_duals(problem, x0: np.ndarray, opts: IpmOptions):
    """Slacks from g(x0), complementarity-consistent multipliers."""
    bundle = problem.eval(x0, order=0)
    g0 = bundle.g if bundle.g is not None else np.zeros(0)
    s0 = np.maximum(-g0, 1e-2)
    nu0 = opts.mu0 / s0 if s0.size else np.zeros(0)
    lo, hi = problem.lo, problem.hi
    has_lo, has_hi = _bound_masks(lo, hi)
    z_lo = np.where(has_lo, opts.mu0 / np.maximum(x0 - lo, 1e-12), 0.0)
    z_hi = np.where(has_hi, opts.mu0 / np.maximum(hi - x0, 1e-12), 0.0)
    lam0 = np.zeros(problem.n_eq)
    return s0, lam0, nu0, z_lo, z_hi


def solve(problem, opts: IpmOptions = None, x0: np.ndarray = None, label: str = "") -> SolveResult:
    """Run the interior-point iteration to a KKT point.

    x0 must be strictly interior with respect to the variable bounds;
    formulation.initial_point produces a suitable one.
    """
    opts = opts or IpmOptions()
    if x0 is None:
        raise ValueError("x0 is required")
    x0 = np.asarray(x0, dtype=float)
    lo, hi = problem.lo, problem.hi
    if np.any(x0 <= lo) or np.any(x0 >= hi):
        k = int(np.flatnonzero((x0 <= lo) | (x0 >= hi))[0])
        raise ValueError(f"x0 not strictly interior at variable {k}")

    t_start = time.perf_counter()
    t_factor = 0.0
    log_fh = open(opts.log_path, "w") if opts.log_path else None
    trace = [] if opts.collect_trace else None

    s, lam, nu, z_lo, z_hi = initial_duals(problem, x0, opts)
    state = IterateState(x=x0.copy(), s=s, lam=lam, nu=nu, z_lo=z_lo, z_hi=z_hi, mu=opts.mu0)
    mu_min = opts.tol / 10.0
    solver = SymmetricSolver()
    status = MAX_ITER
    it = 0
    kkt = None

    def log_line(msg: str) -> None:
        if opts.verbose:
            print(msg, file=sys.stderr)
        if log_fh:
            print(msg, file=log_fh)

    try:
        for it in range(opts.max_iter + 1):
            bundle = problem.eval(state.x, state.lam, state.nu, order=2)
            kkt = _residuals(bundle, state, lo, hi, 0.0)
            if kkt.worst <= opts.tol:
                status = OPTIMAL
                break
            if it == opts.max_iter:
                status = MAX_ITER
                break

            # barrier schedule: drop mu once the mu-perturbed system is
            # solved to within kappa_mu * mu
            while state.mu > mu_min:
                pert = _residuals(bundle, state, lo, hi, state.mu)
                if pert.worst > opts.kappa_mu * state.mu:
                    break
                state.mu = max(mu_min, opts.sigma * state.mu)

            t0 = time.perf_counter()
            d = newton_step(problem, bundle, state, state.mu, opts, solver)
            t_factor += time.perf_counter() - t0
            info = step_length(problem, bundle, state, d, state.mu, opts)
            if not info.ok:
                status = (
                    INFEASIBLE_DETECTED if kkt.primal > max(1e-6, 1e2 * opts.tol)
                    else STEP_FAILURE
                )
                break

            a = info.alpha
            state.x += a * d.dx
            state.s += a * d.ds
            if info.dx_corr is not None:
                state.x += info.dx_corr
                if info.ds_corr is not None and info.ds_corr.size:
                    state.s += info.ds_corr
            state.lam += a * d.dlam
            state.nu += a * d.dnu
            state.z_lo += a * d.dz_lo
            state.z_hi += a * d.dz_hi

            log_line(
                f"it {it:3d}  mu {state.mu:9.2e}  alpha {a:8.2e}  "
                f"dual {kkt.dual:9.2e}  prim {kkt.primal:9.2e}  "
                f"comp {kkt.comp:9.2e}  f {bundle.f:14.6e}  reg {d.delta_w:7.1e}"
                + ("  soc" if info.soc_used else "")
            )
            if trace is not None:
                trace.append(
                    {
                        "iter": it, "mu": state.mu, "alpha": a,
                        "dual_inf": kkt.dual, "primal_inf": kkt.primal,
                        "comp_inf": kkt.comp, "objective": bundle.f,
                        "delta_w": d.delta_w, "delta_c": d.delta_c,
                        "backtracks": info.backtracks,
                        "soc": info.soc_used,
                    }
                )
    finally:
        if log_fh:
            log_fh.close()

    final = problem.eval(state.x, order=0)
    return SolveResult(
        status=status,
        objective=final.f,
        x=state.x,
        s=state.s,
        lam=state.lam,
        nu=state.nu,
        z_lo=state.z_lo,
        z_hi=state.z_hi,
        g=final.g if final.g is not None else np.zeros(0),
        h=final.h if final.h is not None else np.zeros(0),
        iterations=it,
        kkt=kkt,
        timings={
            "total": time.perf_counter() - t_start,
            "kkt_solve": t_factor,
        },
        trace=trace,
        label=label,
        ineq_kind=getattr(problem, "ineq_kind", None),
        ineq_branch=getattr(problem, "ineq_branch", None),
        ineq_from=getattr(problem, "ineq_from", None),
        ineq_to=getattr(problem, "ineq_to", None),
    )


def binding_constraints(
    result: SolveResult, activity_tol: float = 1e-4, multiplier_tol: float = 1e-4
) -> np.ndarray:
    """Boolean mask of binding inequalities.

    A row is binding when its value is within activity_tol of zero, or its
    multiplier is at least multiplier_tol while the stored slack is below
    activity_tol.
    """
    g, nu, s = result.g, result.nu, result.s
    return (g >= -activity_tol) | ((nu >= multiplier_tol) & (s <= activity_tol))


class QuadraticProblem:
    """min 0.5 x'Qx + c'x + c0 with linear constraints and box bounds.

    Implements the same problem interface as formulation.OpfProblem, which
    makes it both the DC OPF vehicle and a convenient solver test fixture.
    """

    def __init__(self, Q=None, c=None, c0=0.0, A_eq=None, b_eq=None,
                 A_in=None, b_in=None, lo=None, hi=None, n_var=None):
        if n_var is None:
            if c is not None:
                n_var = len(c)
            elif Q is not None:
                n_var = sp.csr_matrix(Q).shape[0]
            else:
                raise ValueError("cannot infer n_var")
        self.n_var = n_var
        self.Q = sp.csr_matrix((n_var, n_var)) if Q is None else sp.csr_matrix(Q)
        self.c = np.zeros(n_var) if c is None else np.asarray(c, dtype=float)
        self.c0 = float(c0)
        self.A_eq = (
            sp.csr_matrix((0, n_var)) if A_eq is None else sp.csr_matrix(A_eq)
        )
        self.b_eq = (
            np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
        )
        self.A_in = (
            sp.csr_matrix((0, n_var)) if A_in is None else sp.csr_matrix(A_in)
        )
        self.b_in = (
            np.zeros(0) if b_in is None else np.asarray(b_in, dtype=float)
        )
        self.lo = np.full(n_var, -np.inf) if lo is None else np.asarray(lo, dtype=float)
        self.hi = np.full(n_var, np.inf) if hi is None else np.asarray(hi, dtype=float)
        self.n_eq = self.A_eq.shape[0]
        self.n_ineq = self.A_in.shape[0]
        sym_gap = abs(self.Q - self.Q.T)
        if sym_gap.nnz and sym_gap.max() > 1e-12:
            raise ValueError("Q must be symmetric")

    def eval(self, x, lam=None, nu=None, order: int = 2) -> EvalBundle:
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise EvalError("non-finite entry in x")
        Qx = self.Q @ x
        bundle = EvalBundle(
            f=float(0.5 * x @ Qx + self.c @ x + self.c0),
            h=self.A_eq @ x - self.b_eq,
            g=self.A_in @ x - self.b_in,
        )
        if order >= 1:
            bundle.grad = Qx + self.c
            bundle.J_h = self.A_eq
            bundle.J_g = self.A_in
        if order >= 2:
            bundle.H = self.Q
        return bundle
