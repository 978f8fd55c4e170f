"""Generate cases/case300.m, a deterministic synthetic 300-bus benchmark.

The canonical 300-bus test system could not be reproduced verbatim in this
repository, so this script builds a stand-in of identical dimensional class:
300 buses, 69 generators, 411 branches, non-consecutive bus numbering.  Six
45-bus 138 kV load areas hang off a 30-bus 345 kV ring; area 6 is a cheap
generation pocket behind two deliberately long ring legs, sized so the
optimal dispatch exports ~1.4 GW and the largest branch angle difference
lands near 20.7 degrees.  Construction is pure integer arithmetic (no RNG),
so the emitted file is stable across runs.

Usage: python3 scripts/make_case300.py [dest]
"""

from __future__ import annotations

import sys
from pathlib import Path

N_AREAS = 6  # area index 5 is the export pocket
N_PER_AREA = 45
N_RING_SUB = 12  # per-area subtransmission ring
RING_IDS = [9001 + i for i in range(30)]
LONG_LEGS = {(9025, 9026), (9026, 9027), (9028, 9029), (9029, 9030)}
LONG_X = 0.0515
CHORDS = [
    (9001, 9008), (9004, 9013), (9008, 9016), (9011, 9019), (9013, 9022),
    (9002, 9024), (9006, 9020), (9010, 9024), (9016, 9024),
]
BACKBONE_GEN_BUSES = [9003, 9007, 9012, 9016, 9020, 9024]
SLACK_BUS = 9012
BACKBONE_LOAD_BUSES = [9005, 9014, 9021]
# (ring attachment 1, ring attachment 2) per area; pocket feeds the north leg
AREA_TAPS = [(9001, 9003), (9005, 9007), (9009, 9011), (9013, 9015),
             (9017, 9019), (9027, 9028)]


def area_base(k: int) -> int:
    return 100 * (k + 1)


def build():
    buses = []   # (id, type, pd, qd, gs, bs)
    gens = []    # (bus, pg, qmax, qmin, vg, pmax, pmin, c2, c1)
    branches = []  # (f, t, r, x, b, ratio)

    for k in range(N_AREAS):
        base = area_base(k)
        pocket = k == 5
        for i in range(1, N_PER_AREA + 1):
            bid = base + i
            bs = 0
            if i <= N_RING_SUB:
                pd = (14 if pocket else 48) + 2 * ((k + i) % 6)
            else:
                j = i - N_RING_SUB - 1
                pd = (6 if pocket else 28) + ((3 * j + 2 * k) % 7) - 3
                if not pocket and j % 3 == 0:
                    bs = 8  # feeder capacitor bank
            qd = round(0.25 * pd, 1)
            if pocket and i in (20, 33):  # cogeneration taps export a little
                pd, qd = (-15, -4) if i == 20 else (-10, -2)
            buses.append((bid, 1, pd, qd, 0, bs))
        # subtransmission ring (stiff collector in the pocket)
        for i in range(1, N_RING_SUB + 1):
            f, t = base + i, base + 1 + (i % N_RING_SUB)
            if pocket:
                x = 0.012 + 0.001 * (i % 3)
                branches.append((f, t, round(x / 8, 5), round(x, 5), 0.03, 0))
            else:
                x = 0.05 + 0.01 * ((3 * i + k) % 5)
                branches.append((f, t, round(x / 4, 5), round(x, 5),
                                 round(0.012 + 0.002 * (i % 4), 5), 0))
        # load taps
        for j in range(33):
            parent = base + 1 + (j % N_RING_SUB)
            tap = base + N_RING_SUB + 1 + j
            x = 0.06 + 0.01 * (j % 5)
            branches.append((parent, tap, round(x / 3, 5), round(x, 5), 0.004, 0))
        # chords between taps
        for j in range(0, 30, 2):
            f = base + N_RING_SUB + 1 + j
            t = base + N_RING_SUB + 1 + (j + 11) % 33
            x = 0.10 + 0.01 * (j % 5)
            branches.append((f, t, round(x / 3.5, 5), round(x, 5), 0.006, 0))
        # generation
        if pocket:
            for i in range(1, 9):
                pmax = 250 if i <= 4 else 200
                c1 = (12 + 0.3 * i) if i <= 4 else (14 + 0.25 * i)
                gens.append((base + i, 0.8 * pmax, round(0.55 * pmax, 1),
                             round(-0.4 * pmax, 1), 1.03, pmax, 0,
                             round(1.2 / pmax, 6), round(c1, 2)))
        else:
            for i in range(1, 12):
                if i <= 3:
                    pmax = 200 + 25 * ((k + i) % 3)
                    c1, c2 = 20 + 0.8 * k + 0.3 * i, 2.2 / pmax
                    qmax, qmin, vg = 0.5 * pmax, -0.35 * pmax, 1.02
                elif i <= 5:
                    pmax = 110
                    c1, c2 = 36 + 1.1 * k + 0.7 * i, 4.0 / pmax
                    qmax, qmin, vg = 60, -25, 1.01
                else:
                    pmax = 55 + 5 * ((i + k) % 4)
                    c1, c2 = 25 + 0.9 * ((7 * i + 3 * k) % 8), 3.0 / pmax
                    qmax, qmin, vg = 30, -12, 1.0
                gens.append((base + i, 0.5 * pmax, round(qmax, 1),
                             round(qmin, 1), vg, pmax, 0,
                             round(c2, 6), round(c1, 2)))

    # 345 kV backbone ring
    for bid in RING_IDS:
        pd = 120 if bid in BACKBONE_LOAD_BUSES else 0
        qd = 40 if pd else 0
        btype = 3 if bid == SLACK_BUS else (2 if bid in BACKBONE_GEN_BUSES else 1)
        buses.append((bid, btype, pd, qd, 0, 0))
    for i in range(30):
        f, t = RING_IDS[i], RING_IDS[(i + 1) % 30]
        if (f, t) in LONG_LEGS or (t, f) in LONG_LEGS:
            x = LONG_X
            branches.append((f, t, round(x / 15, 5), x, round(7 * x, 4), 0))
        else:
            x = 0.014 + 0.002 * (i % 4)
            branches.append((f, t, round(x / 12, 5), round(x, 5),
                             round(9 * x, 4), 0))
    for c, (f, t) in enumerate(CHORDS):
        x = 0.03 + 0.004 * (c % 3)
        branches.append((f, t, round(x / 12, 5), round(x, 5), round(8 * x, 4), 0))
    for g, bid in enumerate(BACKBONE_GEN_BUSES):
        pmax = 650 + 50 * (g % 3)
        gens.append((bid, 0.7 * pmax, round(0.5 * pmax, 1), round(-0.4 * pmax, 1),
                     1.03, pmax, 0, round(1.8 / pmax, 6), round(17.5 + 0.9 * g, 2)))

    # step-down transformers tying each area into the ring
    for k, (t1, t2) in enumerate(AREA_TAPS):
        base = area_base(k)
        x1 = 0.022 if k == 5 else 0.028
        x2 = 0.022 if k == 5 else 0.030
        branches.append((t1, base + 1, 0.0012, x1, 0, 0.985))
        branches.append((t2, base + 7, 0.0012, x2, 0, 1.0))

    # mark PV buses
    gen_buses = {g[0] for g in gens}
    buses = [(bid, (3 if bid == SLACK_BUS else 2) if bid in gen_buses else 1,
              pd, qd, gs, bs) for bid, _, pd, qd, gs, bs in buses]
    buses.sort(key=lambda b: b[0])
    return buses, gens, branches


def emit(dest: Path):
    buses, gens, branches = build()
    assert len(buses) == 300 and len(gens) == 69 and len(branches) == 411
    out = []
    out.append("function mpc = case300")
    out.append("% Synthetic 300-bus system: six 138 kV areas on a 345 kV ring")
    out.append("% with a remote export pocket behind two long legs.  Generated")
    out.append("% by scripts/make_case300.py; edit that script, not this file.")
    out.append("")
    out.append("mpc.version = '2';")
    out.append("mpc.baseMVA = 100;")
    out.append("")
    out.append("% bus_i type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin")
    out.append("mpc.bus = [")
    for bid, bt, pd, qd, gs, bs in buses:
        kv = 345 if bid >= 9000 else 138
        out.append(f"\t{bid}\t{bt}\t{pd}\t{qd}\t{gs}\t{bs}\t1\t1\t0\t{kv}\t1\t1.06\t0.94;")
    out.append("];")
    out.append("")
    out.append("% bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin")
    out.append("mpc.gen = [")
    for bus, pg, qmax, qmin, vg, pmax, pmin, _, _ in gens:
        out.append(f"\t{bus}\t{pg:g}\t0\t{qmax:g}\t{qmin:g}\t{vg:g}\t100\t1\t{pmax:g}\t{pmin:g};")
    out.append("];")
    out.append("")
    out.append("% fbus tbus r x b rateA rateB rateC ratio angle status angmin angmax")
    out.append("mpc.branch = [")
    for f, t, r, x, b, ratio in branches:
        out.append(f"\t{f}\t{t}\t{r:g}\t{x:g}\t{b:g}\t0\t0\t0\t{ratio:g}\t0\t1\t-360\t360;")
    out.append("];")
    out.append("")
    out.append("% model startup shutdown n c2 c1 c0")
    out.append("mpc.gencost = [")
    for *_, c2, c1 in gens:
        out.append(f"\t2\t0\t0\t3\t{c2:g}\t{c1:g}\t0;")
    out.append("];")
    dest.write_text("\n".join(out) + "\n")
    total_pd = sum(b[2] for b in buses)
    total_cap = sum(g[5] for g in gens)
    print(f"wrote {dest}: 300 buses, 69 gens, 411 branches, "
          f"load {total_pd:.0f} MW, capacity {total_cap:.0f} MW")


if __name__ == "__main__":
    dest = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("cases/case300.m")
    emit(dest)
