"""DC power flow / DC OPF and the pre-rotation reference tables.

The all-pass OPF formulation needs a cheap angle estimate theta_dc per
bus.  Two producers are available: a plain DC power flow at the case's
initial dispatch (default), and a DC OPF that co-optimizes the dispatch
under DC flow limits.  Both use the standard B-theta linearization with
1 / (x * tap) branch susceptances and phase-shift injections moved to the
right-hand side.

rotation_refs freezes the estimate into per-Ybus-entry and per-branch
rotation references: the reference kernel angle delta_dc = theta_dc_i -
theta_dc_j - phi together with its exact cos/sin, plus the reference
angle difference used to form the live remainder.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import ipm
from .errors import DcOpfError, IslandError
from .kernels import RotationRef
from .netmodel import AdmittanceModel, NetworkCase

DCPF = "dcpf"
DCOPF = "dcopf"
NONE = "none"

PREROTATION_MODES = (DCPF, DCOPF, NONE)


@dataclass(frozen=True)
class DcSolution:
    """Bus angles (radians, ref = 0) plus optional per-gen dispatch."""

    mode: str
    theta: np.ndarray
    dispatch: Optional[np.ndarray]
    residual: float


@dataclass(frozen=True)
class RotationTable:
    """Frozen pre-rotation references aligned with an AdmittanceModel.

    pair_* arrays follow the Ybus entry order (all structural nonzeros),
    from_*/to_* the in-service branch order.  *_tdiff holds the reference
    angle difference theta_dc_i - theta_dc_j of the metering direction.
    """

    mode: str
    theta_dc: np.ndarray
    pair_ref: RotationRef
    pair_tdiff: np.ndarray
    from_ref: RotationRef
    from_tdiff: np.ndarray
    to_ref: RotationRef
    to_tdiff: np.ndarray


def _dc_arrays(case: NetworkCase):
    tab = case.tables
    on = tab.on_branches
    b = 1.0 / (tab.x[on] * tab.tap[on])
    return on, tab.f[on], tab.t[on], b, tab.shift[on]


def _b_matrix(case: NetworkCase) -> tuple[sp.csr_matrix, np.ndarray]:
    """Laplacian B and the phase-shift injection added to the rhs."""
    n = case.n_bus
    _, f, t, b, shift = _dc_arrays(case)
    rows = np.concatenate([f, t, f, t])
    cols = np.concatenate([f, t, t, f])
    vals = np.concatenate([b, b, -b, -b])
    B = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    rhs_shift = np.zeros(n)
    np.add.at(rhs_shift, f, b * shift)
    np.add.at(rhs_shift, t, -b * shift)
    return B, rhs_shift


def solve_dc_pf(case: NetworkCase) -> DcSolution:
    """DC power flow at the case's initial dispatch.

    The reference row/column is removed and the reduced symmetric system
    solved by sparse elimination; the returned residual is the infinity
    norm of the reduced system mismatch.
    """
    tab = case.tables
    n = case.n_bus
    B, rhs_shift = _b_matrix(case)
    on_g = tab.on_gens
    p_net = -tab.pd - tab.gs
    np.add.at(p_net, tab.gen_bus[on_g], tab.pg_init[on_g])
    rhs = p_net + rhs_shift

    keep = np.array([i for i in range(n) if i != case.ref], dtype=np.int64)
    B_red = B[keep][:, keep].tocsc()
    theta = np.zeros(n)
    if keep.size:
        sol = spla.spsolve(B_red, rhs[keep])
        if not np.all(np.isfinite(sol)):
            raise IslandError(f"{case.name}: DC matrix singular")
        theta[keep] = sol
        residual = float(np.max(np.abs(B_red @ sol - rhs[keep])))
    else:
        residual = 0.0
    return DcSolution(
        mode=DCPF, theta=theta, dispatch=tab.pg_init[on_g].copy(),
        residual=residual,
    )


def solve_dc_opf(case: NetworkCase, opts: ipm.IpmOptions = None) -> DcSolution:
    """DC OPF as a box-bounded QP over [theta_free | p_on].

    Raises DcOpfError when the interior-point solve does not reach
    OPTIMAL (e.g. the DC flow limits are infeasible); callers may fall
    back to solve_dc_pf.
    """
    tab = case.tables
    n = case.n_bus
    on_g = tab.on_gens
    ng = on_g.size
    gen_bus = tab.gen_bus[on_g]
    keep = np.array([i for i in range(n) if i != case.ref], dtype=np.int64)
    col_of_bus = np.full(n, -1, dtype=np.int64)
    col_of_bus[keep] = np.arange(n - 1)
    n_var = (n - 1) + ng

    B, rhs_shift = _b_matrix(case)
    A_theta = B[:, keep]
    G = sp.coo_matrix(
        (np.ones(ng), (gen_bus, np.arange(ng))), shape=(n, ng)
    ).tocsr()
    A_eq = sp.hstack([A_theta, -G], format="csr")
    b_eq = -tab.pd - tab.gs + rhs_shift

    on, f, t, b, shift = _dc_arrays(case)
    rate = tab.rate_a[on]
    lim = np.flatnonzero(rate > 0.0)
    rows_in = []
    if lim.size:
        fi, ti = f[lim], t[lim]
        bi, si, ri = b[lim], shift[lim], rate[lim]
        nr = lim.size
        idx = np.arange(nr)
        rows = np.concatenate([idx, idx, nr + idx, nr + idx])
        cols = np.concatenate(
            [col_of_bus[fi], col_of_bus[ti], col_of_bus[fi], col_of_bus[ti]]
        )
        vals = np.concatenate([bi, -bi, -bi, bi])
        keep_e = cols >= 0
        A_in = sp.coo_matrix(
            (vals[keep_e], (rows[keep_e], cols[keep_e])), shape=(2 * nr, n_var)
        ).tocsr()
        b_in = np.concatenate([ri + bi * si, ri - bi * si])
    else:
        A_in = sp.csr_matrix((0, n_var))
        b_in = np.zeros(0)

    c2 = tab.c2[on_g]
    Q = sp.diags(
        np.concatenate([np.zeros(n - 1), 2.0 * c2]), format="csr"
    )
    c = np.concatenate([np.zeros(n - 1), tab.c1[on_g]])
    lo = np.concatenate([np.full(n - 1, -np.inf), tab.p_min[on_g]])
    hi = np.concatenate([np.full(n - 1, np.inf), tab.p_max[on_g]])
    qp = ipm.QuadraticProblem(
        Q=Q, c=c, c0=float(np.sum(tab.c0[on_g])), A_eq=A_eq, b_eq=b_eq,
        A_in=A_in, b_in=b_in, lo=lo, hi=hi,
    )

    pf = solve_dc_pf(case)
    width = hi - lo
    if np.any(width <= 0.0):
        raise DcOpfError(f"{case.name}: generator with empty dispatch interval")
    margin = np.minimum(1e-4, 0.25 * np.where(np.isfinite(width), width, 1.0))
    x0 = np.concatenate([pf.theta[keep], 0.5 * (tab.p_min + tab.p_max)[on_g]])
    x0 = np.clip(
        x0,
        np.where(np.isfinite(lo), lo + margin, -np.inf),
        np.where(np.isfinite(hi), hi - margin, np.inf),
    )
    res = ipm.solve(qp, opts or ipm.IpmOptions(), x0=x0, label=f"{case.name}:dcopf")
    if res.status != ipm.OPTIMAL:
        raise DcOpfError(f"{case.name}: DC OPF ended with {res.status}")
    theta = np.zeros(n)
    theta[keep] = res.x[: n - 1]
    return DcSolution(
        mode=DCOPF, theta=theta, dispatch=res.x[n - 1 :].copy(),
        residual=res.kkt.worst,
    )


def flat_reference(case: NetworkCase) -> DcSolution:
    """Zero-angle reference: the all-pass kernel runs un-rotated."""
    return DcSolution(
        mode=NONE, theta=np.zeros(case.n_bus), dispatch=None, residual=0.0
    )


def dc_reference(case: NetworkCase, mode: str, opts: ipm.IpmOptions = None) -> DcSolution:
    """Dispatch on the pre-rotation mode name."""
    if mode == DCPF:
        return solve_dc_pf(case)
    if mode == DCOPF:
        return solve_dc_opf(case, opts)
    if mode == NONE:
        return flat_reference(case)
    raise ValueError(f"unknown pre-rotation mode {mode!r}")


def rotation_refs(dc: DcSolution, adm: AdmittanceModel) -> RotationTable:
    """Freeze a DC angle vector into kernel rotation references."""
    theta = np.asarray(dc.theta, dtype=float)
    if theta.shape != (adm.n_bus,):
        raise ValueError("theta_dc length does not match the network")
    if not np.all(np.isfinite(theta)):
        raise ValueError("non-finite theta_dc")
    pair_tdiff = theta[adm.rows] - theta[adm.indices]
    from_tdiff = theta[adm.f] - theta[adm.t]
    return RotationTable(
        mode=dc.mode,
        theta_dc=theta.copy(),
        pair_ref=RotationRef.from_angle(pair_tdiff - adm.ang),
        pair_tdiff=pair_tdiff,
        from_ref=RotationRef.from_angle(from_tdiff - adm.ft_ang),
        from_tdiff=from_tdiff,
        to_ref=RotationRef.from_angle(-from_tdiff - adm.tf_ang),
        to_tdiff=-from_tdiff,
    )


def write_rotation_csv(dest, case: NetworkCase, adm: AdmittanceModel, table: RotationTable) -> None:
    """Debug dump: per-bus theta_dc and per-branch delta_dc, degrees."""
    rows = [("kind", "id", "from_bus", "to_bus", "theta_dc_deg", "delta_dc_deg")]
    for i, bus in enumerate(case.buses):
        rows.append(("bus", bus.bus_id, "", "", repr(math.degrees(table.theta_dc[i])), ""))
    for k in range(adm.f.size):
        e = case.branches[int(adm.br_idx[k])]
        rows.append(
            (
                "branch", int(adm.br_idx[k]), e.from_bus, e.to_bus, "",
                repr(math.degrees(float(table.from_ref.delta_dc[k]))),
            )
        )

    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerows(rows)

    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="") as fh:
            emit(fh)
    else:
        emit(dest)
