"""Nonlinear OPF assembly: variables, constraints, sparse derivatives.

Builds the optimization problem

    min   sum_g  c2 p_g^2 + c1 p_g + c0
    s.t.  active/reactive power balance at every bus        (equalities)
          squared apparent-power limits, both directions    (inequalities)
          angle-difference limits on flagged branches       (inequalities)
          box bounds on theta, V, p, q                      (bounds)

over x = [theta (non-reference) | V | p | q], everything per unit, with the
reference angle fixed at zero and eliminated.  The angle coupling runs
through a pluggable kernel: exact trig for the classical formulation, or
the pre-rotated all-pass surrogate where only the deviation from a frozen
DC reference angle passes through the rational pair.

All constraint Jacobians and the Lagrangian Hessian are assembled
analytically into CSR matrices whose sparsity pattern is fixed at
assembly; evaluations only rewrite the numeric values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .errors import EmptyInteriorError, EvalError
from .kernels import KernelEval, KernelParam, RotationRef, eval_rotated, eval_trig
from .netmodel import AdmittanceModel, NetworkCase

TRIG = "trig"
ALLPASS = "allpass"

FLOW_FROM = 0
FLOW_TO = 1
ANG_UPPER = 2
ANG_LOWER = 3

INEQ_KIND_NAMES = {
    FLOW_FROM: "flow_from",
    FLOW_TO: "flow_to",
    ANG_UPPER: "ang_upper",
    ANG_LOWER: "ang_lower",
}


@dataclass(frozen=True)
class FlowMode:
    """Which angle kernel drives the coupling terms.

    variant is "trig" or "allpass".  The all-pass variant needs a kernel
    parameter and a rotation table (see dcflow.rotation_refs); passing
    rotations built from a zero DC angle vector recovers the plain
    surrogate without pre-rotation.
    """

    variant: str
    kernel: Optional[KernelParam] = None
    rotations: object = None

    def __post_init__(self):
        if self.variant not in (TRIG, ALLPASS):
            raise ValueError(f"unknown flow mode {self.variant!r}")
        if self.variant == ALLPASS:
            if self.rotations is None:
                raise ValueError("all-pass mode requires a rotation table")
            if self.kernel is None:
                object.__setattr__(self, "kernel", KernelParam())


@dataclass(frozen=True)
class VarLayout:
    """Index map from model quantities into the flat variable vector."""

    n_bus: int
    n_gen: int
    ref: int
    free_buses: np.ndarray
    th_of_bus: np.ndarray
    v_of_bus: np.ndarray
    p_of_gen: np.ndarray
    q_of_gen: np.ndarray
    n_var: int

    @classmethod
    def build(cls, n_bus: int, n_gen: int, ref: int) -> "VarLayout":
        free = np.array([b for b in range(n_bus) if b != ref], dtype=np.int64)
        th = np.full(n_bus, -1, dtype=np.int64)
        th[free] = np.arange(n_bus - 1)
        v = np.arange(n_bus, dtype=np.int64) + (n_bus - 1)
        p = np.arange(n_gen, dtype=np.int64) + (2 * n_bus - 1)
        q = p + n_gen
        return cls(
            n_bus=n_bus, n_gen=n_gen, ref=ref, free_buses=free,
            th_of_bus=th, v_of_bus=v, p_of_gen=p, q_of_gen=q,
            n_var=2 * n_bus - 1 + 2 * n_gen,
        )


@dataclass(frozen=True)
class OperatingPoint:
    """Physical interpretation of a variable vector (full theta, ref = 0)."""

    theta: np.ndarray
    vm: np.ndarray
    pg: np.ndarray
    qg: np.ndarray


@dataclass
class EvalBundle:
    """Objective, constraints, and derivatives at one point.

    J_h, J_g are present from order 1, H (Hessian of the Lagrangian
    f + lam . h + nu . g) from order 2.  Missing pieces are None.
    """

    f: float
    grad: Optional[np.ndarray] = None
    h: Optional[np.ndarray] = None
    g: Optional[np.ndarray] = None
    J_h: Optional[sp.csr_matrix] = None
    J_g: Optional[sp.csr_matrix] = None
    H: Optional[sp.csr_matrix] = None


class StampPlan:
    """Fixed COO-to-CSR accumulation map.

    Given the row/col index of every stamped entry (with -1 meaning "this
    entry is masked out", used for the eliminated reference angle), the
    plan computes the canonical CSR pattern once.  build(values) then sums
    a value vector, aligned with the original entry order, into a CSR
    matrix with that exact pattern.
    """

    def __init__(self, rows: np.ndarray, cols: np.ndarray, shape: tuple[int, int]):
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        keep = np.flatnonzero((rows >= 0) & (cols >= 0))
        order = np.lexsort((cols[keep], rows[keep]))
        take = keep[order]
        r, c = rows[take], cols[take]
        new_group = np.ones(r.size, dtype=bool)
        if r.size:
            new_group[1:] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
        starts = np.flatnonzero(new_group)
        ur, uc = r[starts], c[starts]
        indptr = np.zeros(shape[0] + 1, dtype=np.int64)
        np.add.at(indptr, ur + 1, 1)
        np.cumsum(indptr, out=indptr)
        self.shape = shape
        self._take = take
        self._starts = starts
        self._indices = uc
        self._indptr = indptr
        self.nnz = starts.size

    def build(self, values: np.ndarray) -> sp.csr_matrix:
        v = np.asarray(values, dtype=float).ravel()[self._take]
        data = np.add.reduceat(v, self._starts) if self._starts.size else np.zeros(0)
        return sp.csr_matrix(
            (data, self._indices.copy(), self._indptr.copy()), shape=self.shape
        )


def _kernel_for(problem: "OpfProblem", which: str, live: np.ndarray) -> KernelEval:
    """Evaluate the configured kernel for one precomputed edge group."""
    mode = problem.mode
    if mode.variant == TRIG:
        return eval_trig(live - problem._phi[which])
    ref = problem._refs[which]
    return eval_rotated(ref, live - problem._tdiff[which], mode.kernel)


class OpfProblem:
    """Assembled OPF instance with fixed sparsity evaluation plans."""

    def __init__(self, case: NetworkCase, adm: AdmittanceModel, mode: FlowMode):
        self.case = case
        self.adm = adm
        self.mode = mode
        tab = case.tables
        self.on_gens = tab.on_gens
        ng = self.on_gens.size
        n = case.n_bus
        self.layout = VarLayout.build(n, ng, case.ref)
        lay = self.layout

        self.gen_bus = tab.gen_bus[self.on_gens]
        self.c2 = tab.c2[self.on_gens]
        self.c1 = tab.c1[self.on_gens]
        self.c0 = tab.c0[self.on_gens]
        self.pd = tab.pd
        self.qd = tab.qd

        lo = np.empty(lay.n_var)
        hi = np.empty(lay.n_var)
        lo[: n - 1] = -math.pi
        hi[: n - 1] = math.pi
        lo[lay.v_of_bus] = tab.v_min
        hi[lay.v_of_bus] = tab.v_max
        lo[lay.p_of_gen] = tab.p_min[self.on_gens]
        hi[lay.p_of_gen] = tab.p_max[self.on_gens]
        lo[lay.q_of_gen] = tab.q_min[self.on_gens]
        hi[lay.q_of_gen] = tab.q_max[self.on_gens]
        self.lo, self.hi = lo, hi

        self.n_var = lay.n_var
        self.n_eq = 2 * n

        self._setup_pairs()
        self._setup_flows()
        self._setup_angles()
        self.n_ineq = int(self._g_rows_total)
        self._setup_plans()

    # -- assembly ---------------------------------------------------------

    def _setup_pairs(self):
        adm = self.adm
        rows, cols = adm.rows, adm.indices
        off = np.flatnonzero(rows != cols)
        dia = np.flatnonzero(rows == cols)
        if dia.size != adm.n_bus:
            raise EvalError("admittance matrix misses a structural diagonal")
        n = adm.n_bus
        self._oi = rows[off].astype(np.int64)
        self._oj = cols[off].astype(np.int64)
        self._omag = adm.mag[off]
        dmag = np.zeros(n)
        dang = np.zeros(n)
        dmag[rows[dia]] = adm.mag[dia]
        dang[rows[dia]] = adm.ang[dia]
        # diagonal kernel collapses to exact constants in both modes
        self._cP = dmag * np.cos(dang)
        self._cQ = -dmag * np.sin(dang)

        self._phi = {"pair": adm.ang[off]}
        self._tdiff = {}
        self._refs = {}
        if self.mode.variant == ALLPASS:
            rot = self.mode.rotations
            self._tdiff["pair"] = rot.pair_tdiff[off]
            self._refs["pair"] = RotationRef(
                delta_dc=rot.pair_ref.delta_dc[off],
                cos_dc=rot.pair_ref.cos_dc[off],
                sin_dc=rot.pair_ref.sin_dc[off],
            )

    def _setup_flows(self):
        adm = self.adm
        tab = self.case.tables
        rate = tab.rate_a[adm.br_idx]
        rb = np.flatnonzero(rate > 0.0)
        self._rb = rb
        self._rate2 = rate[rb] ** 2
        self._fb = adm.f[rb]
        self._tb = adm.t[rb]
        self._own = {
            "from": (adm.ff_mag[rb] * np.cos(adm.ff_ang[rb]),
                     adm.ff_mag[rb] * np.sin(adm.ff_ang[rb])),
            "to": (adm.tt_mag[rb] * np.cos(adm.tt_ang[rb]),
                   adm.tt_mag[rb] * np.sin(adm.tt_ang[rb])),
        }
        self._cross = {"from": adm.ft_mag[rb], "to": adm.tf_mag[rb]}
        self._phi["from"] = adm.ft_ang[rb]
        self._phi["to"] = adm.tf_ang[rb]
        if self.mode.variant == ALLPASS:
            rot = self.mode.rotations
            self._tdiff["from"] = rot.from_tdiff[rb]
            self._tdiff["to"] = rot.to_tdiff[rb]
            self._refs["from"] = RotationRef(
                delta_dc=rot.from_ref.delta_dc[rb],
                cos_dc=rot.from_ref.cos_dc[rb],
                sin_dc=rot.from_ref.sin_dc[rb],
            )
            self._refs["to"] = RotationRef(
                delta_dc=rot.to_ref.delta_dc[rb],
                cos_dc=rot.to_ref.cos_dc[rb],
                sin_dc=rot.to_ref.sin_dc[rb],
            )

    def _setup_angles(self):
        adm = self.adm
        tab = self.case.tables
        amin = tab.ang_min[adm.br_idx]
        amax = tab.ang_max[adm.br_idx]
        self._au = np.flatnonzero(np.isfinite(amax))
        self._al = np.flatnonzero(np.isfinite(amin))
        self._au_lim = amax[self._au]
        self._al_lim = amin[self._al]
        nf = self._rb.size
        self._g_rows_total = 2 * nf + self._au.size + self._al.size
        kind = np.concatenate([
            np.full(nf, FLOW_FROM, dtype=np.int8),
            np.full(nf, FLOW_TO, dtype=np.int8),
            np.full(self._au.size, ANG_UPPER, dtype=np.int8),
            np.full(self._al.size, ANG_LOWER, dtype=np.int8),
        ])
        branch = np.concatenate([
            adm.br_idx[self._rb], adm.br_idx[self._rb],
            adm.br_idx[self._au], adm.br_idx[self._al],
        ]) if kind.size else np.zeros(0, dtype=np.int64)
        self.ineq_kind = kind
        self.ineq_branch = branch.astype(np.int64)
        self.ineq_from = np.concatenate([
            adm.f[self._rb], adm.f[self._rb], adm.f[self._au], adm.f[self._al],
        ]).astype(np.int64) if kind.size else np.zeros(0, dtype=np.int64)
        self.ineq_to = np.concatenate([
            adm.t[self._rb], adm.t[self._rb], adm.t[self._au], adm.t[self._al],
        ]).astype(np.int64) if kind.size else np.zeros(0, dtype=np.int64)

    def _setup_plans(self):
        lay = self.layout
        n = lay.n_bus
        oi, oj = self._oi, self._oj
        ne = oi.size
        thi, thj = lay.th_of_bus[oi], lay.th_of_bus[oj]
        vi, vj = lay.v_of_bus[oi], lay.v_of_bus[oj]
        vb = lay.v_of_bus
        pg, qg = lay.p_of_gen, lay.q_of_gen
        gb = self.gen_bus

        # J_h entry order: 8 pair blocks, 2 diag blocks, 2 gen blocks.
        rp, rq = oi, n + oi
        jh_rows = np.concatenate([
            rp, rp, rp, rp, rq, rq, rq, rq,
            np.arange(n), n + np.arange(n), gb, n + gb,
        ])
        jh_cols = np.concatenate([
            thi, thj, vi, vj, thi, thj, vi, vj, vb, vb, pg, qg,
        ])
        self._jh_plan = StampPlan(jh_rows, jh_cols, (self.n_eq, lay.n_var))

        # flow rows: per rated branch, 4 columns (th_i, th_j, V_i, V_j)
        # where i is the metering end.
        rb = self._rb
        nf = rb.size
        f, t = self._fb, self._tb
        self._u4 = {
            "from": np.stack(
                [lay.th_of_bus[f], lay.th_of_bus[t], lay.v_of_bus[f], lay.v_of_bus[t]],
                axis=1,
            ),
            "to": np.stack(
                [lay.th_of_bus[t], lay.th_of_bus[f], lay.v_of_bus[t], lay.v_of_bus[f]],
                axis=1,
            ),
        }
        row_from = np.arange(nf)
        row_to = nf + np.arange(nf)
        row_au = 2 * nf + np.arange(self._au.size)
        row_al = 2 * nf + self._au.size + np.arange(self._al.size)
        adm = self.adm
        jg_rows = np.concatenate([
            np.repeat(row_from, 4), np.repeat(row_to, 4),
            np.repeat(row_au, 2), np.repeat(row_al, 2),
        ])
        au_cols = np.stack(
            [lay.th_of_bus[adm.f[self._au]], lay.th_of_bus[adm.t[self._au]]], axis=1
        )
        al_cols = np.stack(
            [lay.th_of_bus[adm.f[self._al]], lay.th_of_bus[adm.t[self._al]]], axis=1
        )
        jg_cols = np.concatenate([
            self._u4["from"].ravel(), self._u4["to"].ravel(),
            au_cols.ravel(), al_cols.ravel(),
        ])
        self._jg_plan = StampPlan(jg_rows, jg_cols, (self.n_ineq, lay.n_var))

        # Hessian entries: per-edge 4x4 (pair terms), diag V^2 terms,
        # objective diagonal, per-rated-branch 4x4 for each direction.
        e4 = np.stack([thi, thj, vi, vj], axis=1)
        h_rows = [np.repeat(e4, 4, axis=1).ravel()]
        h_cols = [np.tile(e4, (1, 4)).ravel()]
        h_rows.append(vb)
        h_cols.append(vb)
        h_rows.append(pg)
        h_cols.append(pg)
        for side in ("from", "to"):
            u4 = self._u4[side]
            h_rows.append(np.repeat(u4, 4, axis=1).ravel())
            h_cols.append(np.tile(u4, (1, 4)).ravel())
        self._h_plan = StampPlan(
            np.concatenate(h_rows), np.concatenate(h_cols), (lay.n_var, lay.n_var)
        )

    # -- evaluation -------------------------------------------------------

    def operating_point(self, x: np.ndarray) -> OperatingPoint:
        lay = self.layout
        theta = np.zeros(lay.n_bus)
        theta[lay.free_buses] = x[: lay.n_bus - 1]
        return OperatingPoint(
            theta=theta,
            vm=x[lay.v_of_bus].copy(),
            pg=x[lay.p_of_gen].copy(),
            qg=x[lay.q_of_gen].copy(),
        )

    def eval(self, x, lam=None, nu=None, order: int = 2) -> EvalBundle:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_var,):
            raise EvalError(f"x has shape {x.shape}, expected ({self.n_var},)")
        if not np.all(np.isfinite(x)):
            raise EvalError("non-finite entry in x", index=int(np.flatnonzero(~np.isfinite(x))[0]))
        return self.eval_point(self.operating_point(x), lam=lam, nu=nu, order=order)

    def eval_point(self, op: OperatingPoint, lam=None, nu=None, order: int = 2) -> EvalBundle:
        """Evaluate at a full operating point (theta includes the ref bus).

        Derivatives are still with respect to the reduced variable vector.
        """
        lay = self.layout
        th, v, p, q = op.theta, op.vm, op.pg, op.qg
        n = lay.n_bus

        f_obj = float(np.sum(self.c2 * p * p + self.c1 * p + self.c0))
        bundle = EvalBundle(f=f_obj)
        if not math.isfinite(f_obj):
            raise EvalError("non-finite objective")

        oi, oj = self._oi, self._oj
        kp = _kernel_for(self, "pair", th[oi] - th[oj])
        w_vv = v[oi] * v[oj] * self._omag
        tP = w_vv * kp.c
        tQ = w_vv * kp.s
        inj_P = v * v * self._cP + np.bincount(oi, weights=tP, minlength=n)
        inj_Q = v * v * self._cQ + np.bincount(oi, weights=tQ, minlength=n)
        gen_P = np.bincount(self.gen_bus, weights=p, minlength=n)
        gen_Q = np.bincount(self.gen_bus, weights=q, minlength=n)
        h = np.concatenate([gen_P - self.pd - inj_P, gen_Q - self.qd - inj_Q])
        if not np.all(np.isfinite(h)):
            raise EvalError(
                "non-finite equality residual",
                index=int(np.flatnonzero(~np.isfinite(h))[0]),
            )
        bundle.h = h

        flows = {}
        for side, (i_bus, j_bus) in (("from", (self._fb, self._tb)),
                                     ("to", (self._tb, self._fb))):
            ke = _kernel_for(self, side, th[i_bus] - th[j_bus])
            C, S = self._own[side]
            M = self._cross[side]
            vi_, vj_ = v[i_bus], v[j_bus]
            W = vi_ * vj_ * M
            P = vi_ * vi_ * C + W * ke.c
            Q = -(vi_ * vi_) * S + W * ke.s
            flows[side] = (P, Q, W, ke, vi_, vj_, M, C, S)

        nf = self._rb.size
        g = np.empty(self.n_ineq)
        for k, side in enumerate(("from", "to")):
            P, Q = flows[side][0], flows[side][1]
            g[k * nf : (k + 1) * nf] = P * P + Q * Q - self._rate2
        dth_u = th[self.adm.f[self._au]] - th[self.adm.t[self._au]]
        dth_l = th[self.adm.f[self._al]] - th[self.adm.t[self._al]]
        g[2 * nf : 2 * nf + self._au.size] = dth_u - self._au_lim
        g[2 * nf + self._au.size :] = self._al_lim - dth_l
        if not np.all(np.isfinite(g)):
            raise EvalError(
                "non-finite inequality value",
                index=int(np.flatnonzero(~np.isfinite(g))[0]),
            )
        bundle.g = g
        if order < 1:
            return bundle

        grad = np.zeros(lay.n_var)
        grad[lay.p_of_gen] = 2.0 * self.c2 * p + self.c1
        bundle.grad = grad

        # J_h values in the plan's entry order
        w_dc = w_vv * kp.dc
        w_ds = w_vv * kp.ds
        yj_c = v[oj] * self._omag * kp.c
        yi_c = v[oi] * self._omag * kp.c
        yj_s = v[oj] * self._omag * kp.s
        yi_s = v[oi] * self._omag * kp.s
        ones_g = np.ones(self.gen_bus.size)
        jh_vals = np.concatenate([
            -w_dc, w_dc, -yj_c, -yi_c,
            -w_ds, w_ds, -yj_s, -yi_s,
            -2.0 * v * self._cP, -2.0 * v * self._cQ,
            ones_g, ones_g,
        ])
        bundle.J_h = self._jh_plan.build(jh_vals)

        grad4 = {}
        hess4 = {}
        for side in ("from", "to"):
            P, Q, W, ke, vi_, vj_, M, C, S = flows[side]
            gP = np.stack([
                W * ke.dc, -W * ke.dc, 2.0 * vi_ * C + vj_ * M * ke.c, vi_ * M * ke.c,
            ], axis=1)
            gQ = np.stack([
                W * ke.ds, -W * ke.ds, -2.0 * vi_ * S + vj_ * M * ke.s, vi_ * M * ke.s,
            ], axis=1)
            grad4[side] = (gP, gQ)
            if order >= 2:
                z = np.zeros(nf)
                HP = _sym4(
                    W * ke.d2c, -W * ke.d2c, vj_ * M * ke.dc, vi_ * M * ke.dc,
                    W * ke.d2c, -vj_ * M * ke.dc, -vi_ * M * ke.dc,
                    2.0 * C, M * ke.c, z,
                )
                HQ = _sym4(
                    W * ke.d2s, -W * ke.d2s, vj_ * M * ke.ds, vi_ * M * ke.ds,
                    W * ke.d2s, -vj_ * M * ke.ds, -vi_ * M * ke.ds,
                    -2.0 * S, M * ke.s, z,
                )
                hess4[side] = (HP, HQ)

        jg_blocks = []
        for side in ("from", "to"):
            P, Q = flows[side][0], flows[side][1]
            gP, gQ = grad4[side]
            jg_blocks.append((2.0 * P[:, None] * gP + 2.0 * Q[:, None] * gQ).ravel())
        jg_blocks.append(np.tile([1.0, -1.0], self._au.size))
        jg_blocks.append(np.tile([-1.0, 1.0], self._al.size))
        bundle.J_g = self._jg_plan.build(np.concatenate(jg_blocks))
        if order < 2:
            return bundle

        lam = np.zeros(self.n_eq) if lam is None else np.asarray(lam, dtype=float)
        nu = np.zeros(self.n_ineq) if nu is None else np.asarray(nu, dtype=float)

        # pair-term 4x4: weights -lamP[i], -lamQ[i] on the P/Q coupling terms
        wP = -lam[oi]
        wQ = -lam[n + oi]
        yv = self._omag
        pair_P = _sym4(
            w_vv * kp.d2c, -w_vv * kp.d2c, v[oj] * yv * kp.dc, v[oi] * yv * kp.dc,
            w_vv * kp.d2c, -v[oj] * yv * kp.dc, -v[oi] * yv * kp.dc,
            np.zeros(oi.size), yv * kp.c, np.zeros(oi.size),
        )
        pair_Q = _sym4(
            w_vv * kp.d2s, -w_vv * kp.d2s, v[oj] * yv * kp.ds, v[oi] * yv * kp.ds,
            w_vv * kp.d2s, -v[oj] * yv * kp.ds, -v[oi] * yv * kp.ds,
            np.zeros(oi.size), yv * kp.s, np.zeros(oi.size),
        )
        h_pair = (wP[:, None, None] * pair_P + wQ[:, None, None] * pair_Q).ravel()
        h_diag_v = -2.0 * (lam[:n] * self._cP + lam[n:] * self._cQ)
        h_obj = 2.0 * self.c2
        h_blocks = [h_pair, h_diag_v, h_obj]
        for k, side in enumerate(("from", "to")):
            P, Q = flows[side][0], flows[side][1]
            gP, gQ = grad4[side]
            HP, HQ = hess4[side]
            nu_side = nu[k * nf : (k + 1) * nf]
            outer = (
                np.einsum("ei,ej->eij", gP, gP)
                + np.einsum("ei,ej->eij", gQ, gQ)
                + P[:, None, None] * HP
                + Q[:, None, None] * HQ
            )
            h_blocks.append((2.0 * nu_side[:, None, None] * outer).ravel())
        bundle.H = self._h_plan.build(np.concatenate(h_blocks))
        return bundle


def _sym4(aa, ab, ac, ad, bb, bc, bd, cc, cd, dd):
    """Pack per-edge symmetric 4x4 blocks from their upper entries.

    Index order matches the (th_i, th_j, V_i, V_j) stamp layout, with
    ba = ab etc.  bb equals aa for the angle-angle corner of our terms, so
    it is passed explicitly for clarity.
    """
    n = aa.shape[0]
    H = np.empty((n, 4, 4))
    H[:, 0, 0] = aa
    H[:, 0, 1] = H[:, 1, 0] = ab
    H[:, 0, 2] = H[:, 2, 0] = ac
    H[:, 0, 3] = H[:, 3, 0] = ad
    H[:, 1, 1] = bb
    H[:, 1, 2] = H[:, 2, 1] = bc
    H[:, 1, 3] = H[:, 3, 1] = bd
    H[:, 2, 2] = cc
    H[:, 2, 3] = H[:, 3, 2] = cd
    H[:, 3, 3] = dd
    return H


def assemble(case: NetworkCase, adm: AdmittanceModel, mode: FlowMode) -> OpfProblem:
    """Build an OpfProblem; counts and sparsity are fixed from here on."""
    return OpfProblem(case, adm, mode)


def initial_point(problem: OpfProblem, dc=None) -> np.ndarray:
    """Flat-start interior point.

    V = 1 clipped into bounds, theta from the DC solution when given else
    zero, p and q at bound midpoints (zero when a side is unbounded),
    everything pushed strictly inside by a margin of 1e-4 (shrunk to a
    quarter of the interval for very tight bounds).  A variable with an
    empty interior (lo >= hi) raises EmptyInteriorError.
    """
    lay = problem.layout
    lo, hi = problem.lo, problem.hi
    width = hi - lo
    if np.any(width <= 0.0):
        k = int(np.flatnonzero(width <= 0.0)[0])
        raise EmptyInteriorError(f"variable {k} ({describe_var(problem, k)}) has no interior")
    margin = np.minimum(1e-4, 0.25 * np.where(np.isfinite(width), width, 1.0))

    x0 = np.zeros(lay.n_var)
    x0[lay.v_of_bus] = 1.0
    if dc is not None:
        theta = np.asarray(dc.theta, dtype=float)
        x0[: lay.n_bus - 1] = theta[lay.free_buses] - theta[problem.case.ref]
    both = np.isfinite(lo) & np.isfinite(hi)
    mid = np.where(both, 0.5 * (lo + hi), 0.0)
    sel = np.concatenate([lay.p_of_gen, lay.q_of_gen])
    x0[sel] = mid[sel]
    return np.clip(
        x0,
        np.where(np.isfinite(lo), lo + margin, -np.inf),
        np.where(np.isfinite(hi), hi - margin, np.inf),
    )


def describe_var(problem: OpfProblem, k: int) -> str:
    """Human-readable name of variable k, for error messages."""
    lay = problem.layout
    case = problem.case
    if k < lay.n_bus - 1:
        return f"theta at bus {case.buses[int(lay.free_buses[k])].bus_id}"
    if k < 2 * lay.n_bus - 1:
        return f"V at bus {case.buses[k - (lay.n_bus - 1)].bus_id}"
    base_p = 2 * lay.n_bus - 1
    if k < base_p + lay.n_gen:
        return f"p of gen {int(problem.on_gens[k - base_p])}"
    return f"q of gen {int(problem.on_gens[k - base_p - lay.n_gen])}"
