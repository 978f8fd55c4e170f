"""NLP assembly: counts, sparsity, derivative checks, mode agreement."""

import math

import numpy as np
import pytest

from opfkit import dcflow, formulation as fm, netmodel
from opfkit.netmodel import parse_matpower_text

RNG = np.random.default_rng(20260816)

LOSSY = """
function mpc = lossy
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
    1 3 0  0  0 0 1 1 0 138 1 1.1 0.9;
    2 1 80 20 0 0 1 1 0 138 1 1.1 0.9;
    3 1 50 10 0 5 1 1 0 138 1 1.1 0.9;
];
mpc.gen = [
    1 100 0 80 -80 1.0 100 1 300 10;
    3  40 0 40 -40 1.0 100 1 150  5;
];
mpc.branch = [
    1 2 0.02 0.10 0.04 130 0 0 0    0 1 -30 30;
    2 3 0.03 0.12 0.02 100 0 0 0.98 0 1 -30 30;
    1 3 0.01 0.08 0.00 120 0 0 0    2 1 -30 30;
];
mpc.gencost = [
    2 0 0 3 0.02 12 100;
    2 0 0 3 0.05 18  80;
];
"""


def interior_points(prob, count):
    lo = np.where(np.isfinite(prob.lo), prob.lo, -1.0)
    hi = np.where(np.isfinite(prob.hi), prob.hi, 1.0)
    pts = []
    for _ in range(count):
        t = RNG.uniform(0.35, 0.65, prob.n_var)
        pts.append(lo + t * (hi - lo))
    return pts


def rel(err, ref):
    return np.max(np.abs(err) / np.maximum(1.0, np.abs(ref)))


def fd_dir(fun, x, d, eps=3e-6):
    return (fun(x + eps * d) - fun(x - eps * d)) / (2 * eps)


def test_case9_counts(cache):
    for variant in (fm.TRIG, fm.ALLPASS):
        cb, prob = cache.bundle("case9"), cache.bundle("case9").problem(variant)
        assert prob.n_var == 2 * cb.case.n_bus - 1 + 2 * cb.case.tables.on_gens.size == 23
        assert prob.n_eq == 2 * cb.case.n_bus == 18
        assert prob.n_ineq == 18


def test_allpass_requires_rotations():
    with pytest.raises(ValueError):
        fm.FlowMode(fm.ALLPASS, fm.KernelParam(0.5), None)


def test_sparsity_fixed_and_mode_identical(cache):
    cb = cache.bundle("case30")
    pt = fm.assemble(cb.case, cb.adm, fm.FlowMode(fm.TRIG, fm.KernelParam(0.5), None))
    pa = cb.problem(fm.ALLPASS)
    xs = interior_points(pt, 2)
    lam = RNG.standard_normal(pt.n_eq)
    nu = RNG.uniform(0.1, 1.0, pt.n_ineq)
    evs = [p.eval(x, lam, nu) for p in (pt, pa) for x in xs]
    ref = evs[0]
    for ev in evs[1:]:
        for mat_ref, mat in ((ref.J_h, ev.J_h), (ref.J_g, ev.J_g), (ref.H, ev.H)):
            assert np.array_equal(mat_ref.indptr, mat.indptr)
            assert np.array_equal(mat_ref.indices, mat.indices)


@pytest.mark.parametrize("variant", [fm.TRIG, fm.ALLPASS])
@pytest.mark.parametrize("name", ["case9", "case30"])
def test_fd_first_order(cache, name, variant):
    prob = cache.bundle(name).problem(variant)
    for x in interior_points(prob, 3):
        ev = prob.eval(x)
        d = RNG.standard_normal(prob.n_var)
        d /= np.linalg.norm(d)
        fd_f = fd_dir(lambda z: prob.eval(z, order=0).f, x, d)
        assert rel(fd_f - ev.grad @ d, ev.grad @ d) <= 1e-6
        fd_h = fd_dir(lambda z: prob.eval(z, order=0).h, x, d)
        assert rel(fd_h - ev.J_h @ d, ev.J_h @ d) <= 1e-6
        fd_g = fd_dir(lambda z: prob.eval(z, order=0).g, x, d)
        assert rel(fd_g - ev.J_g @ d, ev.J_g @ d) <= 1e-6


@pytest.mark.parametrize("variant", [fm.TRIG, fm.ALLPASS])
@pytest.mark.parametrize("name", ["case9", "case30"])
def test_fd_lagrangian_hessian(cache, name, variant):
    prob = cache.bundle(name).problem(variant)
    lam = RNG.standard_normal(prob.n_eq)
    nu = RNG.uniform(0.1, 2.0, prob.n_ineq)

    def grad_lag(z):
        e = prob.eval(z, lam, nu, order=1)
        return e.grad + e.J_h.T @ lam + e.J_g.T @ nu

    for x in interior_points(prob, 3):
        H = prob.eval(x, lam, nu).H
        Hd = H.toarray()
        assert np.max(np.abs(Hd - Hd.T)) <= 1e-12
        d = RNG.standard_normal(prob.n_var)
        d /= np.linalg.norm(d)
        fd = fd_dir(grad_lag, x, d)
        assert rel(fd - H @ d, H @ d) <= 1e-6


def test_modes_agree_at_reference(cache):
    cb = cache.bundle("case9")
    pt = fm.assemble(cb.case, cb.adm, fm.FlowMode(fm.TRIG, fm.KernelParam(0.5), None))
    pa = cb.problem(fm.ALLPASS)
    lay = pt.layout
    x = np.empty(pt.n_var)
    x[: cb.case.n_bus - 1] = cb.rot.theta_dc[lay.free_buses]
    x[lay.v_of_bus] = 1.0 + 0.01 * np.arange(cb.case.n_bus) / cb.case.n_bus
    x[lay.p_of_gen] = 0.5 * (pt.lo[lay.p_of_gen] + pt.hi[lay.p_of_gen])
    x[lay.q_of_gen] = 0.25 * pt.hi[lay.q_of_gen]
    et, ea = pt.eval(x), pa.eval(x)
    assert np.max(np.abs(et.h - ea.h)) <= 1e-12
    assert np.max(np.abs(et.g - ea.g)) <= 1e-12


def test_loss_consistency_dense_route():
    case = parse_matpower_text(LOSSY, name="lossy")
    adm = netmodel.build_admittance(case)
    prob = fm.assemble(case, adm, fm.FlowMode(fm.TRIG, fm.KernelParam(0.5), None))
    x = interior_points(prob, 1)[0]
    op = prob.operating_point(x)
    ev = prob.eval(x, order=0)
    tab = case.tables
    n = case.n_bus
    # equality rows are P then Q mismatches: (gen - load) - injection
    pg_bus = np.zeros(n)
    qg_bus = np.zeros(n)
    np.add.at(pg_bus, prob.gen_bus, op.pg)
    np.add.at(qg_bus, prob.gen_bus, op.qg)
    p_inj = pg_bus - tab.pd - ev.h[:n]
    q_inj = qg_bus - tab.qd - ev.h[n:]
    # dense complex route, no kernel code involved
    rows = np.repeat(np.arange(n), np.diff(adm.indptr))
    Y = np.zeros((n, n), dtype=complex)
    Y[rows, adm.indices] = adm.mag * np.exp(1j * adm.ang)
    V = op.vm * np.exp(1j * op.theta)
    S = V * np.conj(Y @ V)
    assert np.max(np.abs(p_inj - S.real)) <= 1e-10
    assert np.max(np.abs(q_inj - S.imag)) <= 1e-10


def test_angle_rows_linear():
    case = parse_matpower_text(LOSSY, name="lossy")
    adm = netmodel.build_admittance(case)
    prob = fm.assemble(case, adm, fm.FlowMode(fm.TRIG, fm.KernelParam(0.5), None))
    # 3 rated branches -> 6 flow rows, 3 angle-limited pairs -> 6 linear rows
    assert prob.n_ineq == 12
    x1, x2 = interior_points(prob, 2)
    J1 = prob.eval(x1).J_g.toarray()[6:]
    J2 = prob.eval(x2).J_g.toarray()[6:]
    assert np.array_equal(J1, J2)


def test_initial_point_interior(cache):
    for name in ("case9", "case30"):
        cb = cache.bundle(name)
        for variant in (fm.TRIG, fm.ALLPASS):
            prob = cb.problem(variant)
            x0 = fm.initial_point(prob, cb.dcsol)
            assert np.all(x0 > prob.lo) and np.all(x0 < prob.hi)


def test_initial_point_empty_interior():
    pinned = LOSSY.replace("1 100 0 80 -80 1.0 100 1 300 10;",
                           "1 100 0 80 -80 1.0 100 1 100 100;")
    case = parse_matpower_text(pinned, name="lossy")
    adm = netmodel.build_admittance(case)
    prob = fm.assemble(case, adm, fm.FlowMode(fm.TRIG, fm.KernelParam(0.5), None))
    with pytest.raises(fm.EmptyInteriorError) as exc:
        fm.initial_point(prob)
    assert "p of gen" in str(exc.value)


def test_describe_var_blocks(cache):
    prob = cache.bundle("case9").problem(fm.TRIG)
    names = [fm.describe_var(prob, k) for k in range(prob.n_var)]
    assert sum(s.startswith("theta at bus") for s in names) == 8
    assert sum(s.startswith("V at bus") for s in names) == 9
    assert sum(s.startswith("p of gen") for s in names) == 3
    assert sum(s.startswith("q of gen") for s in names) == 3


def test_eval_rejects_bad_input(cache):
    prob = cache.bundle("case9").problem(fm.TRIG)
    with pytest.raises(fm.EvalError):
        prob.eval(np.zeros(prob.n_var - 1))
    bad = np.zeros(prob.n_var)
    bad[3] = np.nan
    with pytest.raises(fm.EvalError):
        prob.eval(bad)
