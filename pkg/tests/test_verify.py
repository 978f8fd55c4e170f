"""Exact-AC audit: independence, class stats, congestion, comparison."""

import dataclasses

import numpy as np
import pytest

from opfkit import formulation as fm, kernels, verify
from opfkit.errors import CaseDataError


def test_audit_never_touches_surrogate_kernels(cache, monkeypatch):
    cb, prob, res = cache.solved("case9", fm.ALLPASS)

    def poisoned(*a, **k):
        raise AssertionError("audit reached surrogate kernel code")

    monkeypatch.setattr(kernels, "eval_allpass", poisoned)
    monkeypatch.setattr(kernels, "eval_rotated", poisoned)
    monkeypatch.setattr(fm, "eval_rotated", poisoned)
    monkeypatch.setattr(fm, "eval_trig", poisoned)
    op = verify.solution_point(cb.case, res.x)
    ev = verify.evaluate_true_ac(cb.case, cb.adm, op)
    rep = verify.feasibility_check(ev, cb.case)
    assert rep.classes["bus_p"].max < 1.0


def test_trig_audit_clean(cache):
    cb, prob, res = cache.solved("case9", fm.TRIG)
    op = verify.solution_point(cb.case, res.x)
    ev = verify.evaluate_true_ac(cb.case, cb.adm, op)
    rep = verify.feasibility_check(ev, cb.case)
    assert rep.passed
    assert rep.classes["bus_p"].max <= 1e-6
    assert rep.classes["bus_q"].max <= 1e-6
    for name in ("v", "p_g", "q_g", "angle", "s_ij"):
        assert rep.classes[name].count == 0
        assert rep.classes[name].max <= 1e-8


def test_constructed_voltage_violation(cache):
    cb, prob, res = cache.solved("case9", fm.TRIG)
    op = verify.solution_point(cb.case, res.x)
    vm = op.vm.copy()
    vm[0] = cb.case.tables.v_max[0] + 1e-3
    bad = dataclasses.replace(op, vm=vm)
    rep = verify.feasibility_check(verify.evaluate_true_ac(cb.case, cb.adm, bad), cb.case)
    assert not rep.passed
    st = rep.classes["v"]
    assert st.count == 1
    assert abs(st.max - 1e-3) <= 1e-12
    # max/mean/min run over every element, zeros included
    assert st.min == 0.0
    assert abs(st.mean - 1e-3 / cb.case.n_bus) <= 1e-15


def test_class_stats_strict_exceedance():
    st = verify.ClassStats.of(np.array([0.0, 5e-7, 2e-6]), 1e-6)
    assert st.count == 1
    assert st.max == 2e-6
    assert st.min == 0.0


def test_congested_sets(cache):
    _, _, r9t = cache.solved("case9", fm.TRIG)
    cb9 = cache.bundle("case9")
    assert verify.congested_lines(r9t, cb9.case) == set()
    cb30 = cache.bundle("case30")
    want = {(6, 8), (25, 27)}
    for variant in (fm.TRIG, fm.ALLPASS):
        _, _, res = cache.solved("case30", variant)
        assert verify.congested_lines(res, cb30.case) == want


def test_compare_modes_case9(cache):
    cb, _, rt = cache.solved("case9", fm.TRIG)
    _, _, ra = cache.solved("case9", fm.ALLPASS)
    rep = verify.compare(rt, ra, cb.case, cb.adm)
    assert rep.gap_pct <= 1e-3
    assert rep.congestion_mismatch == 0
    assert rep.mismatch["v"].max <= 1e-4
    assert rep.mismatch["theta"].max <= 1e-4
    flip = verify.compare(ra, rt, cb.case, cb.adm)
    assert flip.objective_a == rep.objective_b
    assert flip.objective_b == rep.objective_a
    assert flip.gap_abs == rep.gap_abs
    assert flip.congestion_mismatch == rep.congestion_mismatch
    assert flip.mismatch["p_g"].max == rep.mismatch["p_g"].max


def test_evaluate_rejects_bad_points(cache):
    cb, _, res = cache.solved("case9", fm.TRIG)
    op = verify.solution_point(cb.case, res.x)
    with pytest.raises(CaseDataError):
        verify.evaluate_true_ac(cb.case, cb.adm, dataclasses.replace(op, vm=op.vm[:-1]))
    with pytest.raises(ValueError):
        verify.evaluate_true_ac(cb.case, cb.adm, dataclasses.replace(op, vm=0.0 * op.vm))
    with pytest.raises(CaseDataError):
        verify.solution_point(cb.case, res.x[:-1])


def test_tolerances_validation():
    with pytest.raises(ValueError):
        verify.Tolerances(balance_tol=0.0)
    with pytest.raises(ValueError):
        verify.Tolerances(bound_tol=-1e-9)
