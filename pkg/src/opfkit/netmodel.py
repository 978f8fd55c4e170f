"""Case parsing, validation, and per-unit network model.

Reads MATPOWER-format case files into immutable record dataclasses, converts
everything to per unit on the system MVA base (loads, generator limits, line
ratings, cost coefficients), and builds the sparse bus admittance matrix in
magnitude/angle form together with per-branch two-port blocks.

Conventions carried through the rest of the package:

* internal bus indices are dense 0..n-1 in file order after pruning
  isolated (type 4) buses; external ids live only in the records
* angles are radians, powers and admittances per unit
* ``rate_a == 0`` means an unlimited branch, ``tap == 0`` in the raw file
  means nominal ratio 1.0 and is normalized at parse time
* angle-difference limits of (0, 0) or beyond +-360 degrees mean
  unconstrained and are stored as -inf/+inf
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, replace
from enum import IntEnum
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import (
    AdmittanceError,
    CaseDataError,
    CaseFormatError,
    IslandError,
    UnsupportedCostError,
)


class BusKind(IntEnum):
    PQ = 1
    PV = 2
    REF = 3
    ISOLATED = 4


@dataclass(frozen=True)
class BusRecord:
    """One bus row, per unit on the system base.

    gs/bs are the shunt conductance/susceptance in pu (MW / MVAr consumed
    at V = 1 divided by baseMVA). va_init is radians.
    """

    bus_id: int
    kind: BusKind
    pd: float
    qd: float
    gs: float
    bs: float
    base_kv: float
    vm_init: float
    va_init: float
    v_min: float
    v_max: float


@dataclass(frozen=True)
class GenRecord:
    """One generator row with polynomial cost on the per-unit power basis.

    Cost of output p (pu) is c2 * p**2 + c1 * p + c0 in $/h, i.e. the file
    coefficients have been scaled by baseMVA**2 and baseMVA respectively.
    """

    bus_id: int
    pg_init: float
    qg_init: float
    q_max: float
    q_min: float
    vg: float
    status: int
    p_max: float
    p_min: float
    c2: float
    c1: float
    c0: float


@dataclass(frozen=True)
class BranchRecord:
    """One branch row (line or transformer), impedances in pu.

    rate_a is the thermal limit in pu MVA with 0 meaning unlimited.  tap is
    the off-nominal ratio (already normalized so 0 never appears), shift the
    phase shift in radians, ang_min/ang_max the angle-difference bounds in
    radians with -inf/+inf when unconstrained.
    """

    from_bus: int
    to_bus: int
    r: float
    x: float
    b: float
    rate_a: float
    tap: float
    shift: float
    status: int
    ang_min: float
    ang_max: float


@dataclass(frozen=True)
class CaseTables:
    """Column-major numpy views of a NetworkCase with internal bus indices."""

    pd: np.ndarray
    qd: np.ndarray
    gs: np.ndarray
    bs: np.ndarray
    v_min: np.ndarray
    v_max: np.ndarray
    vm_init: np.ndarray
    va_init: np.ndarray
    gen_bus: np.ndarray
    p_min: np.ndarray
    p_max: np.ndarray
    q_min: np.ndarray
    q_max: np.ndarray
    gen_status: np.ndarray
    c2: np.ndarray
    c1: np.ndarray
    c0: np.ndarray
    pg_init: np.ndarray
    qg_init: np.ndarray
    f: np.ndarray
    t: np.ndarray
    r: np.ndarray
    x: np.ndarray
    b: np.ndarray
    rate_a: np.ndarray
    tap: np.ndarray
    shift: np.ndarray
    br_status: np.ndarray
    ang_min: np.ndarray
    ang_max: np.ndarray

    @property
    def on_gens(self) -> np.ndarray:
        return np.flatnonzero(self.gen_status)

    @property
    def on_branches(self) -> np.ndarray:
        return np.flatnonzero(self.br_status)


@dataclass(frozen=True)
class NetworkCase:
    """Validated per-unit network: bus/gen/branch records plus index maps."""

    name: str
    base_mva: float
    buses: tuple[BusRecord, ...]
    gens: tuple[GenRecord, ...]
    branches: tuple[BranchRecord, ...]

    @cached_property
    def bus_index(self) -> dict[int, int]:
        return {b.bus_id: i for i, b in enumerate(self.buses)}

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @cached_property
    def ref(self) -> int:
        """Internal index of the reference bus."""
        for i, b in enumerate(self.buses):
            if b.kind == BusKind.REF:
                return i
        raise CaseDataError(f"{self.name}: no reference bus")

    @cached_property
    def tables(self) -> CaseTables:
        bi = self.bus_index
        bus = self.buses
        gen = self.gens
        br = self.branches
        return CaseTables(
            pd=np.array([b.pd for b in bus]),
            qd=np.array([b.qd for b in bus]),
            gs=np.array([b.gs for b in bus]),
            bs=np.array([b.bs for b in bus]),
            v_min=np.array([b.v_min for b in bus]),
            v_max=np.array([b.v_max for b in bus]),
            vm_init=np.array([b.vm_init for b in bus]),
            va_init=np.array([b.va_init for b in bus]),
            gen_bus=np.array([bi[g.bus_id] for g in gen], dtype=np.int64),
            p_min=np.array([g.p_min for g in gen]),
            p_max=np.array([g.p_max for g in gen]),
            q_min=np.array([g.q_min for g in gen]),
            q_max=np.array([g.q_max for g in gen]),
            gen_status=np.array([g.status for g in gen], dtype=bool),
            c2=np.array([g.c2 for g in gen]),
            c1=np.array([g.c1 for g in gen]),
            c0=np.array([g.c0 for g in gen]),
            pg_init=np.array([g.pg_init for g in gen]),
            qg_init=np.array([g.qg_init for g in gen]),
            f=np.array([bi[e.from_bus] for e in br], dtype=np.int64),
            t=np.array([bi[e.to_bus] for e in br], dtype=np.int64),
            r=np.array([e.r for e in br]),
            x=np.array([e.x for e in br]),
            b=np.array([e.b for e in br]),
            rate_a=np.array([e.rate_a for e in br]),
            tap=np.array([e.tap for e in br]),
            shift=np.array([e.shift for e in br]),
            br_status=np.array([e.status for e in br], dtype=bool),
            ang_min=np.array([e.ang_min for e in br]),
            ang_max=np.array([e.ang_max for e in br]),
        )


@dataclass(frozen=True)
class AdmittanceModel:
    """Sparse Ybus in polar form plus per-branch two-port blocks.

    Ybus is CSR: ``indptr``/``indices`` give the structure, ``mag``/``ang``
    the entries as magnitude >= 0 and angle in (-pi, pi].  Branch arrays
    cover in-service branches only, in case order; ``br_idx`` maps back to
    positions in ``case.branches``.  Block k of branch e relates terminal
    currents to voltages via y_ff, y_ft, y_tf, y_tt in the usual pi-model
    sense, stored again as (mag, ang) pairs.
    """

    n_bus: int
    indptr: np.ndarray
    indices: np.ndarray
    mag: np.ndarray
    ang: np.ndarray
    br_idx: np.ndarray
    f: np.ndarray
    t: np.ndarray
    ff_mag: np.ndarray
    ff_ang: np.ndarray
    ft_mag: np.ndarray
    ft_ang: np.ndarray
    tf_mag: np.ndarray
    tf_ang: np.ndarray
    tt_mag: np.ndarray
    tt_ang: np.ndarray

    @cached_property
    def rows(self) -> np.ndarray:
        """COO row index per stored Ybus entry, aligned with mag/ang."""
        return np.repeat(
            np.arange(self.n_bus, dtype=np.int64), np.diff(self.indptr)
        )

    @cached_property
    def ybus(self) -> sp.csr_matrix:
        data = self.mag * np.exp(1j * self.ang)
        return sp.csr_matrix(
            (data, self.indices.copy(), self.indptr.copy()),
            shape=(self.n_bus, self.n_bus),
        )


_MAT_RE = re.compile(r"mpc\.(\w+)\s*=\s*\[(.*?)\]\s*;", re.DOTALL)
_SCALAR_RE = re.compile(r"mpc\.(\w+)\s*=\s*([^;\[\]]+);")


def _strip_comments(text: str) -> str:
    return "\n".join(line.split("%", 1)[0] for line in text.splitlines())


def _parse_rows(block: str, table: str) -> list[list[float]]:
    rows = []
    for chunk in block.replace("\n", ";").split(";"):
        tokens = chunk.split()
        if not tokens:
            continue
        try:
            rows.append([float(tok) for tok in tokens])
        except ValueError as exc:
            raise CaseFormatError(f"bad token in {table} table: {exc}") from None
    if not rows:
        raise CaseFormatError(f"{table} table is empty")
    width = len(rows[0])
    for k, row in enumerate(rows):
        if len(row) != width:
            raise CaseFormatError(
                f"{table} row {k} has {len(row)} columns, expected {width}"
            )
    return rows


def _angle_bounds(amin_deg: float, amax_deg: float) -> tuple[float, float]:
    # MATPOWER: (0, 0) or magnitudes >= 360 mean unconstrained.
    if amin_deg == 0.0 and amax_deg == 0.0:
        return -math.inf, math.inf
    lo = -math.inf if amin_deg <= -360.0 else math.radians(amin_deg)
    hi = math.inf if amax_deg >= 360.0 else math.radians(amax_deg)
    return lo, hi


def parse_matpower_text(text: str, name: str = "case") -> NetworkCase:
    """Parse MATPOWER case text into a validated NetworkCase.

    Raises CaseFormatError for malformed text, UnsupportedCostError for
    piecewise-linear or higher-than-quadratic costs, CaseDataError for
    inconsistent data, IslandError when the in-service network is not
    connected from the reference bus.
    """
    clean = _strip_comments(text)
    tables = {m.group(1): m.group(2) for m in _MAT_RE.finditer(clean)}
    scalars = {m.group(1): m.group(2).strip() for m in _SCALAR_RE.finditer(clean)}

    if "baseMVA" not in scalars:
        raise CaseFormatError(f"{name}: missing baseMVA")
    base = float(scalars["baseMVA"])
    if base <= 0:
        raise CaseDataError(f"{name}: baseMVA must be positive")
    for key in ("bus", "gen", "branch", "gencost"):
        if key not in tables:
            raise CaseFormatError(f"{name}: missing mpc.{key} table")

    bus_rows = _parse_rows(tables["bus"], "bus")
    gen_rows = _parse_rows(tables["gen"], "gen")
    br_rows = _parse_rows(tables["branch"], "branch")
    cost_rows = _parse_rows(tables["gencost"], "gencost")

    if len(bus_rows[0]) < 13:
        raise CaseFormatError(f"{name}: bus table needs 13 columns")
    if len(gen_rows[0]) < 10:
        raise CaseFormatError(f"{name}: gen table needs 10 columns")
    if len(br_rows[0]) < 11:
        raise CaseFormatError(f"{name}: branch table needs 11 columns")

    buses = []
    seen = set()
    for row in bus_rows:
        bus_id = int(row[0])
        if bus_id in seen:
            raise CaseDataError(f"{name}: duplicate bus id {bus_id}")
        seen.add(bus_id)
        kind_code = int(row[1])
        if kind_code not in (1, 2, 3, 4):
            raise CaseDataError(f"{name}: bus {bus_id} has type {kind_code}")
        buses.append(
            BusRecord(
                bus_id=bus_id,
                kind=BusKind(kind_code),
                pd=row[2] / base,
                qd=row[3] / base,
                gs=row[4] / base,
                bs=row[5] / base,
                base_kv=row[9],
                vm_init=row[7],
                va_init=math.radians(row[8]),
                v_min=row[12],
                v_max=row[11],
            )
        )

    # Cost table: one row per generator, or two (reactive rows ignored).
    if len(cost_rows) == 2 * len(gen_rows):
        cost_rows = cost_rows[: len(gen_rows)]
    elif len(cost_rows) != len(gen_rows):
        raise CaseFormatError(
            f"{name}: gencost has {len(cost_rows)} rows for {len(gen_rows)} gens"
        )

    gens = []
    for row, cost in zip(gen_rows, cost_rows):
        model = int(cost[0])
        if model != 2:
            raise UnsupportedCostError(
                f"{name}: only polynomial costs supported, got model {model}"
            )
        ncost = int(cost[3])
        coeffs = cost[4 : 4 + ncost]
        if len(coeffs) != ncost:
            raise CaseFormatError(f"{name}: gencost row shorter than ncost")
        if ncost > 3:
            if any(c != 0.0 for c in coeffs[:-3]):
                raise UnsupportedCostError(
                    f"{name}: cost degree {ncost - 1} exceeds quadratic"
                )
            coeffs = coeffs[-3:]
        padded = [0.0] * (3 - len(coeffs)) + list(coeffs)
        c2, c1, c0 = padded
        gens.append(
            GenRecord(
                bus_id=int(row[0]),
                pg_init=row[1] / base,
                qg_init=row[2] / base,
                q_max=row[3] / base,
                q_min=row[4] / base,
                vg=row[5],
                status=int(row[7] > 0),
                p_max=row[8] / base,
                p_min=row[9] / base,
                c2=c2 * base * base,
                c1=c1 * base,
                c0=c0,
            )
        )

    branches = []
    for row in br_rows:
        tap = row[8]
        if tap < 0:
            raise CaseDataError(f"{name}: negative tap ratio {tap}")
        amin, amax = _angle_bounds(row[11], row[12]) if len(row) >= 13 else (
            -math.inf,
            math.inf,
        )
        branches.append(
            BranchRecord(
                from_bus=int(row[0]),
                to_bus=int(row[1]),
                r=row[2],
                x=row[3],
                b=row[4],
                rate_a=row[5] / base,
                tap=tap if tap != 0.0 else 1.0,
                shift=math.radians(row[9]),
                status=int(row[10] > 0),
                ang_min=amin,
                ang_max=amax,
            )
        )

    case = _prune_isolated(NetworkCase(name, base, tuple(buses), tuple(gens), tuple(branches)))
    _validate(case)
    return case


def parse_matpower(path: str | Path) -> NetworkCase:
    """Parse a MATPOWER .m case file from disk."""
    p = Path(path)
    return parse_matpower_text(p.read_text(), name=p.stem)


def _prune_isolated(case: NetworkCase) -> NetworkCase:
    dead = {b.bus_id for b in case.buses if b.kind == BusKind.ISOLATED}
    if not dead:
        return case
    return replace(
        case,
        buses=tuple(b for b in case.buses if b.bus_id not in dead),
        gens=tuple(g for g in case.gens if g.bus_id not in dead),
        branches=tuple(
            e for e in case.branches
            if e.from_bus not in dead and e.to_bus not in dead
        ),
    )


def _validate(case: NetworkCase) -> None:
    name = case.name
    ids = case.bus_index
    n_ref = sum(1 for b in case.buses if b.kind == BusKind.REF)
    if n_ref != 1:
        raise CaseDataError(f"{name}: need exactly one reference bus, found {n_ref}")
    for b in case.buses:
        if not (0 < b.v_min <= b.v_max):
            raise CaseDataError(f"{name}: bus {b.bus_id} voltage bounds invalid")
    for k, g in enumerate(case.gens):
        if g.bus_id not in ids:
            raise CaseDataError(f"{name}: gen {k} references unknown bus {g.bus_id}")
        if g.status and (g.p_min > g.p_max or g.q_min > g.q_max):
            raise CaseDataError(f"{name}: gen {k} has crossed limits")
    for k, e in enumerate(case.branches):
        if e.from_bus not in ids or e.to_bus not in ids:
            raise CaseDataError(f"{name}: branch {k} references unknown bus")
        if e.status and e.r == 0.0 and e.x == 0.0:
            raise CaseDataError(f"{name}: branch {k} has zero impedance")
        if e.status and e.x == 0.0:
            raise CaseDataError(f"{name}: branch {k} has zero reactance")
    _check_connected(case)


def _check_connected(case: NetworkCase) -> None:
    n = case.n_bus
    tab = case.tables
    on = tab.on_branches
    if n > 1 and on.size == 0:
        raise IslandError(f"{case.name}: no in-service branches")
    adj = sp.csr_matrix(
        (np.ones(on.size), (tab.f[on], tab.t[on])), shape=(n, n)
    )
    n_comp, labels = sp.csgraph.connected_components(adj, directed=False)
    if n_comp != 1:
        sizes = np.bincount(labels)
        raise IslandError(
            f"{case.name}: network splits into {n_comp} islands "
            f"(sizes {sorted(sizes.tolist(), reverse=True)[:5]})"
        )


def build_admittance(case: NetworkCase) -> AdmittanceModel:
    """Assemble branch two-port blocks and the sparse Ybus in polar form."""
    tab = case.tables
    on = tab.on_branches
    r, x, b = tab.r[on], tab.x[on], tab.b[on]
    tap, shift = tab.tap[on], tab.shift[on]
    f, t = tab.f[on], tab.t[on]

    if np.any((r == 0.0) & (x == 0.0)):
        k = int(on[np.flatnonzero((r == 0.0) & (x == 0.0))[0]])
        raise AdmittanceError(f"{case.name}: branch {k} has zero impedance")
    if np.any(tap <= 0.0):
        k = int(on[np.flatnonzero(tap <= 0.0)[0]])
        raise AdmittanceError(f"{case.name}: branch {k} has tap <= 0")

    ys = 1.0 / (r + 1j * x)
    sh = 0.5j * b
    y_ff = (ys + sh) / tap**2
    y_ft = -ys * np.exp(1j * shift) / tap
    y_tf = -ys * np.exp(-1j * shift) / tap
    y_tt = ys + sh

    n = case.n_bus
    diag = np.arange(n, dtype=np.int64)
    rows = np.concatenate([f, t, f, t, diag])
    cols = np.concatenate([f, t, t, f, diag])
    vals = np.concatenate([y_ff, y_tt, y_ft, y_tf, tab.gs + 1j * tab.bs])
    ybus = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    ybus.sort_indices()

    return AdmittanceModel(
        n_bus=n,
        indptr=ybus.indptr,
        indices=ybus.indices,
        mag=np.abs(ybus.data),
        ang=np.angle(ybus.data),
        br_idx=on,
        f=f,
        t=t,
        ff_mag=np.abs(y_ff),
        ff_ang=np.angle(y_ff),
        ft_mag=np.abs(y_ft),
        ft_ang=np.angle(y_ft),
        tf_mag=np.abs(y_tf),
        tf_ang=np.angle(y_tf),
        tt_mag=np.abs(y_tt),
        tt_ang=np.angle(y_tt),
    )


def scale_line_ratings(case: NetworkCase, m: float) -> NetworkCase:
    """Return a copy with a congestion-inducing rating reduction applied.

    The first floor(0.9 * k) of the k in-service rated branches, in
    ascending branch order, get rate_a scaled by (1 - m / 100).  Unrated
    branches and out-of-service branches are untouched.  m = 0 is a no-op
    copy.
    """
    if not 0.0 <= m < 100.0:
        raise ValueError(f"rating reduction m={m} outside [0, 100)")
    pool = [
        k for k, e in enumerate(case.branches) if e.status and e.rate_a > 0.0
    ]
    cut = pool[: math.floor(0.9 * len(pool))]
    factor = 1.0 - m / 100.0
    branches = list(case.branches)
    for k in cut:
        branches[k] = replace(branches[k], rate_a=branches[k].rate_a * factor)
    return replace(case, branches=tuple(branches))


_INF_ENC = {math.inf: "inf", -math.inf: "-inf"}


def _enc(v: float) -> float | str:
    return _INF_ENC.get(v, v)


def _dec(v: float | str) -> float:
    if v == "inf":
        return math.inf
    if v == "-inf":
        return -math.inf
    return float(v)


def to_json(case: NetworkCase) -> str:
    """Serialize the per-unit model to JSON (round-trips exactly)."""
    doc = {
        "schema": "opfkit-case-1",
        "name": case.name,
        "base_mva": case.base_mva,
        "buses": [
            {
                "bus_id": b.bus_id,
                "kind": int(b.kind),
                "pd": b.pd,
                "qd": b.qd,
                "gs": b.gs,
                "bs": b.bs,
                "base_kv": b.base_kv,
                "vm_init": b.vm_init,
                "va_init": b.va_init,
                "v_min": b.v_min,
                "v_max": b.v_max,
            }
            for b in case.buses
        ],
        "gens": [
            {
                "bus_id": g.bus_id,
                "pg_init": g.pg_init,
                "qg_init": g.qg_init,
                "q_max": _enc(g.q_max),
                "q_min": _enc(g.q_min),
                "vg": g.vg,
                "status": g.status,
                "p_max": _enc(g.p_max),
                "p_min": _enc(g.p_min),
                "c2": g.c2,
                "c1": g.c1,
                "c0": g.c0,
            }
            for g in case.gens
        ],
        "branches": [
            {
                "from_bus": e.from_bus,
                "to_bus": e.to_bus,
                "r": e.r,
                "x": e.x,
                "b": e.b,
                "rate_a": e.rate_a,
                "tap": e.tap,
                "shift": e.shift,
                "status": e.status,
                "ang_min": _enc(e.ang_min),
                "ang_max": _enc(e.ang_max),
            }
            for e in case.branches
        ],
    }
    return json.dumps(doc, indent=1)


def from_json(text: str) -> NetworkCase:
    """Inverse of to_json."""
    doc = json.loads(text)
    if doc.get("schema") != "opfkit-case-1":
        raise CaseFormatError("unrecognized case JSON schema")
    buses = tuple(
        BusRecord(
            bus_id=int(d["bus_id"]),
            kind=BusKind(d["kind"]),
            pd=d["pd"],
            qd=d["qd"],
            gs=d["gs"],
            bs=d["bs"],
            base_kv=d["base_kv"],
            vm_init=d["vm_init"],
            va_init=d["va_init"],
            v_min=d["v_min"],
            v_max=d["v_max"],
        )
        for d in doc["buses"]
    )
    gens = tuple(
        GenRecord(
            bus_id=int(d["bus_id"]),
            pg_init=d["pg_init"],
            qg_init=d["qg_init"],
            q_max=_dec(d["q_max"]),
            q_min=_dec(d["q_min"]),
            vg=d["vg"],
            status=int(d["status"]),
            p_max=_dec(d["p_max"]),
            p_min=_dec(d["p_min"]),
            c2=d["c2"],
            c1=d["c1"],
            c0=d["c0"],
        )
        for d in doc["gens"]
    )
    branches = tuple(
        BranchRecord(
            from_bus=int(d["from_bus"]),
            to_bus=int(d["to_bus"]),
            r=d["r"],
            x=d["x"],
            b=d["b"],
            rate_a=d["rate_a"],
            tap=d["tap"],
            shift=d["shift"],
            status=int(d["status"]),
            ang_min=_dec(d["ang_min"]),
            ang_max=_dec(d["ang_max"]),
        )
        for d in doc["branches"]
    )
    return NetworkCase(doc["name"], doc["base_mva"], buses, gens, branches)
