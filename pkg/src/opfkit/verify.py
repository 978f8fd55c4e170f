"""Exact-AC audits and cross-solution comparison reports.

Every number here is recomputed from the plain trigonometric AC power
flow equations with numpy cos/sin directly on the admittance data.  This
module deliberately shares no code with the surrogate kernels, so it can
referee surrogate-based solves: a solution is only called feasible if it
satisfies the real physics, regardless of what the solver iterated on.

All magnitudes are per-unit, angles radians unless a field name says
degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import CaseDataError
from .formulation import FLOW_TO, OperatingPoint, VarLayout
from .ipm import SolveResult, binding_constraints
from .netmodel import AdmittanceModel, NetworkCase

GAP_EPS = 1e-10

FEASIBILITY_CLASSES = ("bus_p", "bus_q", "v", "p_g", "q_g", "angle", "s_ij")


@dataclass(frozen=True)
class Tolerances:
    """Audit thresholds, all per-unit (angle class in radians).

    balance_tol gates the bus P/Q mismatch classes, bound_tol every box
    and flow-limit class, binding_tol the activity/multiplier test that
    declares a flow constraint congested.  relative maps a class name to
    True to measure its violations relative to the limit magnitude.
    """

    balance_tol: float = 1e-4
    bound_tol: float = 1e-6
    binding_tol: float = 1e-4
    relative: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("balance_tol", "bound_tol", "binding_tol"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class TrueAcEvaluation:
    """A solution re-evaluated under the exact AC equations.

    Bus mismatches are generation minus load minus network injection;
    branch arrays follow the in-service branch order of the admittance
    model, with from/to flows measured into the line at each terminal.
    """

    op: OperatingPoint
    mismatch_p: np.ndarray
    mismatch_q: np.ndarray
    p_from: np.ndarray
    q_from: np.ndarray
    p_to: np.ndarray
    q_to: np.ndarray
    s_from: np.ndarray
    s_to: np.ndarray
    angle_diff: np.ndarray


def evaluate_true_ac(
    case: NetworkCase, adm: AdmittanceModel, op: OperatingPoint
) -> TrueAcEvaluation:
    """Recompute injections and branch flows with exact trigonometry."""
    tab = case.tables
    n = adm.n_bus
    ng = tab.on_gens.size
    if op.theta.shape != (n,) or op.vm.shape != (n,):
        raise CaseDataError(
            f"solution has {op.theta.size} bus angles / {op.vm.size} "
            f"magnitudes, case has {n} buses"
        )
    if op.pg.shape != (ng,) or op.qg.shape != (ng,):
        raise CaseDataError(
            f"solution has {op.pg.size}/{op.qg.size} dispatch entries, "
            f"case has {ng} in-service generators"
        )
    if np.any(op.vm <= 0.0) or not np.all(np.isfinite(op.vm)):
        raise ValueError("voltage magnitudes must be positive and finite")
    if not np.all(np.isfinite(op.theta)):
        raise ValueError("voltage angles must be finite")

    theta, vm = op.theta, op.vm
    rows, cols = adm.rows, adm.indices
    arg = theta[rows] - theta[cols] - adm.ang
    w = vm[rows] * vm[cols] * adm.mag
    inj_p = np.bincount(rows, weights=w * np.cos(arg), minlength=n)
    inj_q = np.bincount(rows, weights=w * np.sin(arg), minlength=n)

    gb = tab.gen_bus[tab.on_gens]
    gen_p = np.bincount(gb, weights=op.pg, minlength=n)
    gen_q = np.bincount(gb, weights=op.qg, minlength=n)
    mismatch_p = gen_p - tab.pd - inj_p
    mismatch_q = gen_q - tab.qd - inj_q

    f, t = adm.f, adm.t
    vf, vt = vm[f], vm[t]
    df = theta[f] - theta[t]
    # S_f = Vf^2 conj(y_ff) + Vf Vt conj(y_ft) e^{j(th_f - th_t)}, etc.
    p_from = vf**2 * adm.ff_mag * np.cos(adm.ff_ang) + vf * vt * adm.ft_mag * np.cos(
        df - adm.ft_ang
    )
    q_from = -(vf**2) * adm.ff_mag * np.sin(adm.ff_ang) + vf * vt * adm.ft_mag * np.sin(
        df - adm.ft_ang
    )
    p_to = vt**2 * adm.tt_mag * np.cos(adm.tt_ang) + vt * vf * adm.tf_mag * np.cos(
        -df - adm.tf_ang
    )
    q_to = -(vt**2) * adm.tt_mag * np.sin(adm.tt_ang) + vt * vf * adm.tf_mag * np.sin(
        -df - adm.tf_ang
    )
    return TrueAcEvaluation(
        op=op,
        mismatch_p=mismatch_p,
        mismatch_q=mismatch_q,
        p_from=p_from,
        q_from=q_from,
        p_to=p_to,
        q_to=q_to,
        s_from=np.hypot(p_from, q_from),
        s_to=np.hypot(p_to, q_to),
        angle_diff=df,
    )


@dataclass(frozen=True)
class ClassStats:
    """Violation statistics for one constraint class."""

    count: int
    max: float
    mean: float
    min: float

    @classmethod
    def of(cls, violations: np.ndarray, tol: float) -> "ClassStats":
        if violations.size == 0:
            return cls(count=0, max=0.0, mean=0.0, min=0.0)
        return cls(
            count=int(np.sum(violations > tol)),
            max=float(np.max(violations)),
            mean=float(np.mean(violations)),
            min=float(np.min(violations)),
        )

    def to_dict(self) -> dict:
        return {"count": self.count, "max": self.max, "mean": self.mean, "min": self.min}


@dataclass(frozen=True)
class FeasibilityReport:
    """Per-class violation statistics from an exact-AC audit."""

    classes: dict
    passed: bool

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "classes": {k: v.to_dict() for k, v in self.classes.items()},
        }

    def to_text(self) -> str:
        lines = [f"feasibility: {'PASS' if self.passed else 'FAIL'}"]
        for name in FEASIBILITY_CLASSES:
            st = self.classes[name]
            lines.append(
                f"  {name:6s}  viol {st.count:4d}  max {st.max:11.4e}  "
                f"mean {st.mean:11.4e}"
            )
        return "\n".join(lines)


def _box_violation(v, lo, hi):
    """Nonnegative exceedance of a box; infinite bounds contribute zero."""
    over = np.where(np.isfinite(hi), v - hi, -np.inf)
    under = np.where(np.isfinite(lo), lo - v, -np.inf)
    return np.maximum(0.0, np.maximum(over, under))


def feasibility_check(
    ev: TrueAcEvaluation, case: NetworkCase, tol: Optional[Tolerances] = None
) -> FeasibilityReport:
    """Audit a recomputed solution class by class.

    Equality classes measure absolute mismatch, inequality classes the
    nonnegative exceedance; counts use strict exceedance of the class
    tolerance while max/mean/min run over all elements including zeros.
    """
    tol = tol or Tolerances()
    tab = case.tables
    on_g = tab.on_gens
    on_b = tab.on_branches

    viol = {
        "bus_p": np.abs(ev.mismatch_p),
        "bus_q": np.abs(ev.mismatch_q),
        "v": _box_violation(ev.op.vm, tab.v_min, tab.v_max),
        "p_g": _box_violation(ev.op.pg, tab.p_min[on_g], tab.p_max[on_g]),
        "q_g": _box_violation(ev.op.qg, tab.q_min[on_g], tab.q_max[on_g]),
        "angle": _box_violation(
            ev.angle_diff, tab.ang_min[on_b], tab.ang_max[on_b]
        ),
    }
    rate = tab.rate_a[on_b]
    rated = np.isfinite(rate) & (rate > 0.0)
    viol["s_ij"] = np.maximum(
        0.0,
        np.concatenate(
            [ev.s_from[rated] - rate[rated], ev.s_to[rated] - rate[rated]]
        ),
    )

    limits = {
        "v": (tab.v_min, tab.v_max),
        "p_g": (tab.p_min[on_g], tab.p_max[on_g]),
        "q_g": (tab.q_min[on_g], tab.q_max[on_g]),
        "angle": (tab.ang_min[on_b], tab.ang_max[on_b]),
        "s_ij": (None, np.concatenate([rate[rated], rate[rated]])),
    }
    classes = {}
    for name in FEASIBILITY_CLASSES:
        v = viol[name]
        if tol.relative.get(name) and name in limits:
            hi = limits[name][1]
            scale = np.maximum(1.0, np.abs(np.where(np.isfinite(hi), hi, 1.0)))
            v = v / scale
        gate = tol.balance_tol if name in ("bus_p", "bus_q") else tol.bound_tol
        classes[name] = ClassStats.of(v, gate)
    passed = all(st.count == 0 for st in classes.values())
    return FeasibilityReport(classes=classes, passed=passed)


def solution_point(case: NetworkCase, x: np.ndarray) -> OperatingPoint:
    """Unpack a solver vector into a full operating point for this case."""
    tab = case.tables
    lay = VarLayout.build(len(case.buses), tab.on_gens.size, case.ref)
    if x.shape != (lay.n_var,):
        raise CaseDataError(
            f"solution vector has {x.size} entries, case needs {lay.n_var}"
        )
    theta = np.zeros(lay.n_bus)
    theta[lay.free_buses] = x[: lay.n_bus - 1]
    return OperatingPoint(
        theta=theta,
        vm=x[lay.v_of_bus].copy(),
        pg=x[lay.p_of_gen].copy(),
        qg=x[lay.q_of_gen].copy(),
    )


def congested_lines(
    result: SolveResult, case: NetworkCase, tol: Optional[Tolerances] = None
) -> set:
    """Binding flow constraints as undirected external (i, j) line keys."""
    tol = tol or Tolerances()
    if result.ineq_kind is None or result.ineq_kind.size == 0:
        return set()
    mask = binding_constraints(
        result, activity_tol=tol.binding_tol, multiplier_tol=tol.binding_tol
    )
    mask &= result.ineq_kind <= FLOW_TO
    ids = np.array([b.bus_id for b in case.buses], dtype=np.int64)
    fi = ids[result.ineq_from[mask]]
    ti = ids[result.ineq_to[mask]]
    return {(int(min(a, b)), int(max(a, b))) for a, b in zip(fi, ti)}


@dataclass(frozen=True)
class MismatchStats:
    """Elementwise |a - b| statistics for one variable class."""

    max: float
    mean: float
    min: float

    @classmethod
    def of(cls, a: np.ndarray, b: np.ndarray) -> "MismatchStats":
        if a.size == 0:
            return cls(max=0.0, mean=0.0, min=0.0)
        d = np.abs(a - b)
        return cls(max=float(np.max(d)), mean=float(np.mean(d)), min=float(np.min(d)))

    def to_dict(self) -> dict:
        return {"max": self.max, "mean": self.mean, "min": self.min}


MISMATCH_CLASSES = ("p_g", "q_g", "v", "theta", "p_ij", "p_ji", "q_ij", "q_ji")


@dataclass(frozen=True)
class ComparisonReport:
    """Standardized two-solution comparison on one case.

    The gap is reported as an absolute value, so compare(a, b) and
    compare(b, a) agree on every field up to the a/b labeling.
    """

    label_a: str
    label_b: str
    objective_a: float
    objective_b: float
    gap_abs: float
    gap_pct: float
    mismatch: dict
    congestion_a: list
    congestion_b: list
    congestion_mismatch: int
    max_angle_deg_a: float
    max_angle_deg_b: float
    iterations_a: int
    iterations_b: int
    time_a: float
    time_b: float

    def to_dict(self) -> dict:
        return {
            "label_a": self.label_a,
            "label_b": self.label_b,
            "objective_a": self.objective_a,
            "objective_b": self.objective_b,
            "gap_abs": self.gap_abs,
            "gap_pct": self.gap_pct,
            "mismatch": {k: v.to_dict() for k, v in self.mismatch.items()},
            "congestion_a": [list(t) for t in self.congestion_a],
            "congestion_b": [list(t) for t in self.congestion_b],
            "congestion_mismatch": self.congestion_mismatch,
            "max_angle_deg_a": self.max_angle_deg_a,
            "max_angle_deg_b": self.max_angle_deg_b,
            "iterations_a": self.iterations_a,
            "iterations_b": self.iterations_b,
            "time_a": self.time_a,
            "time_b": self.time_b,
        }

    def to_text(self) -> str:
        lines = [
            f"compare {self.label_a or 'a'} vs {self.label_b or 'b'}",
            f"  objective  {self.objective_a:.6f} vs {self.objective_b:.6f}"
            f"  gap {self.gap_pct:.6f} %",
            f"  iterations {self.iterations_a} vs {self.iterations_b}"
            f"   time {self.time_a:.3f}s vs {self.time_b:.3f}s",
            f"  max |th_i - th_j|  {self.max_angle_deg_a:.4f} vs "
            f"{self.max_angle_deg_b:.4f} deg",
            f"  congestion {sorted(self.congestion_a)} vs "
            f"{sorted(self.congestion_b)}  mismatch {self.congestion_mismatch}",
        ]
        for name in MISMATCH_CLASSES:
            st = self.mismatch[name]
            lines.append(
                f"  d{name:5s}  max {st.max:11.4e}  mean {st.mean:11.4e}"
            )
        return "\n".join(lines)


def compare(
    result_a: SolveResult,
    result_b: SolveResult,
    case: NetworkCase,
    adm: AdmittanceModel,
    tol: Optional[Tolerances] = None,
) -> ComparisonReport:
    """Objective gap, variable mismatches, and congestion agreement.

    Branch flows for both solutions are recomputed under exact AC
    physics, so the flow mismatch measures real delivered power, not
    model-internal quantities.  Angles are aligned by subtracting each
    solution's reference angle before differencing.
    """
    tol = tol or Tolerances()
    if result_a.x.shape != result_b.x.shape:
        raise CaseDataError("results have different variable counts")
    op_a = solution_point(case, result_a.x)
    op_b = solution_point(case, result_b.x)
    ev_a = evaluate_true_ac(case, adm, op_a)
    ev_b = evaluate_true_ac(case, adm, op_b)

    th_a = op_a.theta - op_a.theta[case.ref]
    th_b = op_b.theta - op_b.theta[case.ref]
    mismatch = {
        "p_g": MismatchStats.of(op_a.pg, op_b.pg),
        "q_g": MismatchStats.of(op_a.qg, op_b.qg),
        "v": MismatchStats.of(op_a.vm, op_b.vm),
        "theta": MismatchStats.of(th_a, th_b),
        "p_ij": MismatchStats.of(ev_a.p_from, ev_b.p_from),
        "p_ji": MismatchStats.of(ev_a.p_to, ev_b.p_to),
        "q_ij": MismatchStats.of(ev_a.q_from, ev_b.q_from),
        "q_ji": MismatchStats.of(ev_a.q_to, ev_b.q_to),
    }
    con_a = congested_lines(result_a, case, tol)
    con_b = congested_lines(result_b, case, tol)
    fa, fb = result_a.objective, result_b.objective
    gap_abs = abs(fa - fb)
    return ComparisonReport(
        label_a=result_a.label,
        label_b=result_b.label,
        objective_a=fa,
        objective_b=fb,
        gap_abs=gap_abs,
        gap_pct=100.0 * gap_abs / max(abs(fa), GAP_EPS),
        mismatch=mismatch,
        congestion_a=sorted(con_a),
        congestion_b=sorted(con_b),
        congestion_mismatch=len(con_a ^ con_b),
        max_angle_deg_a=float(np.degrees(np.max(np.abs(ev_a.angle_diff))))
        if ev_a.angle_diff.size else 0.0,
        max_angle_deg_b=float(np.degrees(np.max(np.abs(ev_b.angle_diff))))
        if ev_b.angle_diff.size else 0.0,
        iterations_a=result_a.iterations,
        iterations_b=result_b.iterations,
        time_a=float(result_a.timings.get("total", math.nan)),
        time_b=float(result_b.timings.get("total", math.nan)),
    )
