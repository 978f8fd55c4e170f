"""Acceptance gate: one test and one printed verdict line per criterion.

Each test computes its verdict at the stated tolerance, records a
"criterion N: PASS/FAIL - detail" line (echoed in the terminal summary),
and then asserts.  Tolerances are the published bars, not looser ones.
"""

import json

import numpy as np
import pytest

from conftest import record_criterion
from opfkit import cli, dcflow, formulation as fm, ipm, kernels, verify
from opfkit.kernels import KernelParam

FIVE_CASES = ("case9", "case30", "case57", "case118", "case300")

RNG = np.random.default_rng(470)


def interior_points(prob, count, rng):
    lo = np.where(np.isfinite(prob.lo), prob.lo, -1.0)
    hi = np.where(np.isfinite(prob.hi), prob.hi, 1.0)
    return [lo + rng.uniform(0.35, 0.65, prob.n_var) * (hi - lo) for _ in range(count)]


def mixed_rel(fd, an):
    return np.max(np.abs(fd - an) / np.maximum(1.0, np.abs(an)))


def test_criterion_1_kernel_identity():
    rng = np.random.default_rng(1)
    n_batches, per = 1000, 100
    worst_plain = worst_rot = 0.0
    symmetric = True
    for a in 2.0 * (1.0 - rng.random(n_batches)):
        param = KernelParam(a=float(a))
        d = rng.uniform(-np.pi, np.pi, per)
        ev = kernels.eval_allpass(d, param)
        evn = kernels.eval_allpass(-d, param)
        worst_plain = max(worst_plain, float(np.max(np.abs(ev.c**2 + ev.s**2 - 1.0))))
        symmetric &= bool(np.array_equal(ev.c, evn.c) and np.array_equal(ev.s, -evn.s))
        ang = rng.uniform(-np.pi, np.pi, per)
        ref = dcflow.RotationRef(delta_dc=ang, cos_dc=np.cos(ang), sin_dc=np.sin(ang))
        evr = kernels.eval_rotated(ref, d, param)
        worst_rot = max(worst_rot, float(np.max(np.abs(evr.c**2 + evr.s**2 - 1.0))))
    ok = worst_plain <= 1e-12 and worst_rot <= 1e-12 and symmetric
    record_criterion(
        1,
        ok,
        f"1e5 pairs: max |c^2+s^2-1| plain {worst_plain:.2e}, rotated "
        f"{worst_rot:.2e} (bar 1e-12), even/odd exact: {symmetric}",
    )
    assert worst_plain <= 1e-12
    assert worst_rot <= 1e-12
    assert symmetric


def test_criterion_2_derivative_suite(cache):
    rng = np.random.default_rng(2)
    eps = 3e-6
    worst = 0.0

    # kernel derivatives at 20 random (delta, a) points
    for _ in range(20):
        a = float(2.0 * (1.0 - rng.random()))
        param = KernelParam(a=a)
        d = rng.uniform(-np.pi, np.pi, 1)
        ang = rng.uniform(-np.pi, np.pi, 1)
        ref = dcflow.RotationRef(delta_dc=ang, cos_dc=np.cos(ang), sin_dc=np.sin(ang))
        evals = {
            "trig": lambda z: kernels.eval_trig(z),
            "allpass": lambda z: kernels.eval_allpass(z, param),
            "rotated": lambda z: kernels.eval_rotated(ref, z, param),
        }
        for fn in evals.values():
            ev = fn(d)
            lo, hi = fn(d - eps), fn(d + eps)
            for first, val in ((ev.dc, "c"), (ev.ds, "s")):
                fd = (getattr(hi, val) - getattr(lo, val)) / (2 * eps)
                worst = max(worst, float(mixed_rel(fd, first)))
            for second, val in ((ev.d2c, "dc"), (ev.d2s, "ds")):
                fd = (getattr(hi, val) - getattr(lo, val)) / (2 * eps)
                worst = max(worst, float(mixed_rel(fd, second)))

    # every Jacobian/Hessian entry at 20 random points per case and mode
    for name in ("case9", "case30"):
        cb = cache.bundle(name)
        for variant in (fm.TRIG, fm.ALLPASS):
            prob = cb.problem(variant)
            lam = rng.standard_normal(prob.n_eq)
            nu = rng.uniform(0.1, 1.0, prob.n_ineq)
            for x in interior_points(prob, 20, rng):
                ev = prob.eval(x, lam, nu)
                n = prob.n_var
                J_h_fd = np.empty((prob.n_eq, n))
                J_g_fd = np.empty((prob.n_ineq, n))
                grad_fd = np.empty(n)
                H_fd = np.empty((n, n))
                for k in range(n):
                    e = np.zeros(n)
                    e[k] = eps
                    p, m = prob.eval(x + e, lam, nu, order=1), prob.eval(x - e, lam, nu, order=1)
                    grad_fd[k] = (p.f - m.f) / (2 * eps)
                    J_h_fd[:, k] = (p.h - m.h) / (2 * eps)
                    J_g_fd[:, k] = (p.g - m.g) / (2 * eps)
                    gl_p = p.grad + p.J_h.T @ lam + p.J_g.T @ nu
                    gl_m = m.grad + m.J_h.T @ lam + m.J_g.T @ nu
                    H_fd[:, k] = (gl_p - gl_m) / (2 * eps)
                worst = max(worst, float(mixed_rel(grad_fd, ev.grad)))
                worst = max(worst, float(mixed_rel(J_h_fd, ev.J_h.toarray())))
                worst = max(worst, float(mixed_rel(J_g_fd, ev.J_g.toarray())))
                worst = max(worst, float(mixed_rel(H_fd, ev.H.toarray())))

    ok = worst <= 1e-6
    record_criterion(
        2,
        ok,
        f"kernel + formulation derivatives vs central FD: worst mixed "
        f"rel err {worst:.2e} (bar 1e-6) at 20 points on case9/case30",
    )
    assert worst <= 1e-6


def test_criterion_3_prerotation_exactness(cache):
    worst = 0.0
    for name in ("case9", "case30", "case57"):
        cb = cache.bundle(name)
        pt = fm.assemble(cb.case, cb.adm, fm.FlowMode(fm.TRIG, KernelParam(0.5), None))
        pa = cb.problem(fm.ALLPASS)
        lay = pt.layout
        x = np.empty(pt.n_var)
        x[: cb.case.n_bus - 1] = cb.rot.theta_dc[lay.free_buses]
        x[lay.v_of_bus] = 1.0
        x[lay.p_of_gen] = 0.5 * (pt.lo[lay.p_of_gen] + pt.hi[lay.p_of_gen])
        x[lay.q_of_gen] = 0.0
        diff = float(np.max(np.abs(pt.eval(x, order=0).h - pa.eval(x, order=0).h)))
        worst = max(worst, diff)
    ok = worst <= 1e-12
    record_criterion(
        3,
        ok,
        f"equality residuals TRIG vs ALLPASS at theta=theta_dc: max "
        f"|diff| {worst:.2e} (bar 1e-12) on case9/case30/case57",
    )
    assert worst <= 1e-12


def test_criterion_4_ipm_and_reference(cache, data_dir):
    qp1 = ipm.QuadraticProblem(Q=[[2.0]], c=[0.0], A_in=[[-1.0]], b_in=[-1.0])
    r1 = ipm.solve(qp1, ipm.IpmOptions(), np.array([3.0]))
    e1 = max(abs(r1.x[0] - 1.0), abs(r1.nu[0] - 2.0))

    qp2 = ipm.QuadraticProblem(
        Q=2 * np.eye(2), c=[-2.0, -4.0], c0=5.0, A_eq=[[1.0, 1.0]], b_eq=[1.0]
    )
    r2 = ipm.solve(qp2, ipm.IpmOptions(), np.array([0.5, 0.5]))
    e2 = max(float(np.max(np.abs(r2.x - [0.0, 1.0]))), abs(r2.lam[0] - 2.0))

    qp3 = ipm.QuadraticProblem(Q=[[2.0]], c=[4.0], c0=4.0, lo=[0.0], hi=[3.0])
    r3 = ipm.solve(qp3, ipm.IpmOptions(), np.array([1.5]))
    e3 = max(abs(r3.x[0]), abs(r3.z_lo[0] - 4.0))

    qp_err = max(e1, e2, e3)

    fixture = json.loads((data_dir / "reference_values.json").read_text())["case9_trig"]
    _, _, res = cache.solved("case9", fm.TRIG)
    rel = abs(res.objective - fixture["objective"]) / abs(fixture["objective"])

    ok = qp_err <= 1e-8 and rel <= 1e-4
    record_criterion(
        4,
        ok,
        f"QP fixtures max KKT-point err {qp_err:.2e} (bar 1e-8); case9 "
        f"TRIG objective rel err vs reference fixture {rel:.2e} (bar 1e-4)",
    )
    assert qp_err <= 1e-8
    assert rel <= 1e-4


def test_criterion_5_optimality_gap(cache):
    gaps = {}
    for name in FIVE_CASES:
        _, _, rt = cache.solved(name, fm.TRIG)
        _, _, ra = cache.solved(name, fm.ALLPASS)
        assert rt.status == ipm.OPTIMAL, f"{name} TRIG not OPTIMAL"
        assert ra.status == ipm.OPTIMAL, f"{name} ALLPASS not OPTIMAL"
        gaps[name] = abs(ra.objective - rt.objective) / abs(rt.objective) * 100.0
    worst = max(gaps.values())
    ok = worst <= 1e-3
    detail = ", ".join(f"{n} {g:.2e}%" for n, g in gaps.items())
    record_criterion(5, ok, f"|f_APF-f_AC|/f_AC gaps: {detail} (bar 1e-3 %)")
    assert worst <= 1e-3, gaps


def test_criterion_6_feasibility(cache):
    worst_p = worst_q = 0.0
    clean = True
    for name in FIVE_CASES:
        rep = cache.audit(name, fm.ALLPASS)
        worst_p = max(worst_p, rep.classes["bus_p"].max)
        worst_q = max(worst_q, rep.classes["bus_q"].max)
        for cls in ("v", "p_g", "q_g", "angle", "s_ij"):
            clean &= rep.classes[cls].count == 0
    ok = worst_p <= 1e-3 and worst_q <= 1e-3 and clean
    record_criterion(
        6,
        ok,
        f"APF exact-AC audits: max bus P mismatch {worst_p:.2e}, Q "
        f"{worst_q:.2e} pu (bar 1e-3); zero violations in "
        f"v/p_g/q_g/angle/s_ij: {clean}",
    )
    assert worst_p <= 1e-3
    assert worst_q <= 1e-3
    assert clean


def test_criterion_7_congestion(cache):
    cb30 = cache.bundle("case30")
    _, _, rt30 = cache.solved("case30", fm.TRIG)
    _, _, ra30 = cache.solved("case30", fm.ALLPASS)
    set_t = verify.congested_lines(rt30, cb30.case)
    set_a = verify.congested_lines(ra30, cb30.case)
    cb9 = cache.bundle("case9")
    _, _, rt9 = cache.solved("case9", fm.TRIG)
    _, _, ra9 = cache.solved("case9", fm.ALLPASS)
    empt = verify.congested_lines(rt9, cb9.case) | verify.congested_lines(ra9, cb9.case)
    mismatch = len(set_t ^ set_a)
    ok = len(set_t) == 2 and len(set_a) == 2 and mismatch == 0 and not empt
    record_criterion(
        7,
        ok,
        f"case30 binding flow lines: TRIG {sorted(set_t)}, APF "
        f"{sorted(set_a)}, mismatch {mismatch}; case9 congested set "
        f"{'empty' if not empt else sorted(empt)}",
    )
    assert len(set_t) == 2 and len(set_a) == 2
    assert mismatch == 0
    assert not empt


def test_criterion_8_angle_bands(cache):
    bands = {"case9": (5.5, 1.0), "case300": (20.7, 2.0)}
    seen = {}
    ok = True
    for name, (center, width) in bands.items():
        cb = cache.bundle(name)
        for variant in (fm.TRIG, fm.ALLPASS):
            _, prob, res = cache.solved(name, variant)
            ev = verify.evaluate_true_ac(cb.case, cb.adm, prob.operating_point(res.x))
            deg = float(np.degrees(np.max(np.abs(ev.angle_diff))))
            seen[(name, variant)] = deg
            ok &= center - width <= deg <= center + width
    detail = ", ".join(f"{n}/{v} {d:.3f} deg" for (n, v), d in seen.items())
    record_criterion(
        8, ok, f"max branch angle: {detail} (bars 5.5+-1, 20.7+-2 deg)"
    )
    assert ok, seen


def _write_chain_case(path, n_bus=600):
    lines = [
        "function mpc = chain600",
        "mpc.version = '2';",
        "mpc.baseMVA = 100;",
        "mpc.bus = [",
    ]
    gens = list(range(1, n_bus + 1, 10))
    gen_set = set(gens)
    for b in range(1, n_bus + 1):
        btype = 3 if b == 1 else (2 if b in gen_set else 1)
        pd = 0.0 if b in gen_set else 4.0
        qd = 0.0 if b in gen_set else 1.0
        lines.append(f"    {b} {btype} {pd} {qd} 0 0 1 1 0 138 1 1.06 0.94;")
    lines.append("];")
    lines.append("mpc.gen = [")
    for b in gens:
        lines.append(f"    {b} 36 0 30 -30 1.0 100 1 60 0;")
    lines.append("];")
    lines.append("mpc.branch = [")
    for b in range(1, n_bus):
        lines.append(f"    {b} {b + 1} 0.002 0.02 0.004 0 0 0 0 0 1 -360 360;")
    lines.append("];")
    lines.append("mpc.gencost = [")
    for k, _ in enumerate(gens):
        lines.append(f"    2 0 0 3 {0.01 + 0.0001 * (k % 7)} {20 + 0.1 * (k % 11)} 0;")
    lines.append("];")
    path.write_text("\n".join(lines) + "\n")


def test_criterion_9_iterations_and_large_case(cache, tmp_path, capsys):
    pairs = {}
    ok = True
    for name in FIVE_CASES:
        _, _, rt = cache.solved(name, fm.TRIG)
        _, _, ra = cache.solved(name, fm.ALLPASS)
        pairs[name] = (rt.iterations, ra.iterations)
        ok &= ra.iterations <= rt.iterations + 5

    big = tmp_path / "chain600.m"
    _write_chain_case(big)
    rc = cli.main(["--case", str(big), "--model", "ac", "--max-iter", "60"])
    err = capsys.readouterr().err
    structural = any(f"opfkit: error: {c}:" in err for c in ("io", "parse", "assembly", "config"))
    accepted = rc in (cli.EXIT_OK, cli.EXIT_SOLVE, cli.EXIT_AUDIT) and not structural

    detail = ", ".join(f"{n} ac={a} apf={b}" for n, (a, b) in pairs.items())
    record_criterion(
        9,
        ok and accepted,
        f"iterations (bar apf <= ac+5): {detail}; 600-bus case accepted "
        f"by CLI without structural failure: {accepted}",
    )
    assert ok, pairs
    assert accepted, (rc, err)
