"""Solve the bundled cases in both modes and print a summary table.

Runs the same pipeline as the CLI (parse -> admittance -> pre-rotation ->
assemble -> solve -> exact-AC audit) for every case, with the DC-OPF
pre-rotation for the larger systems, and prints one row per case:
objectives, gap, iteration counts, max branch angle, congested lines,
and audit verdicts.  Optionally dumps the per-case JSON reports.

Usage:
    python3 scripts/run_benchmarks.py [--cases-dir cases] [--report-dir out]
"""

import argparse
import json
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from opfkit import cli  # noqa: E402

PREROTATION = {
    "case9": "dcpf",
    "case30": "dcpf",
    "case57": "dcopf",
    "case118": "dcopf",
    "case300": "dcopf",
}

COLUMNS = (
    "case          bus   br   f_ac [$/h]    f_apf [$/h]   gap [%]    "
    "it ac/apf  maxang ac/apf [deg]  binding  busP [pu]  audit"
)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cases-dir", default=Path(__file__).resolve().parent.parent / "cases",
                    type=Path)
    ap.add_argument("--report-dir", type=Path, default=None,
                    help="write the per-case JSON reports here")
    ap.add_argument("--a", type=float, default=0.5, help="kernel parameter")
    ap.add_argument("--tol", type=float, default=1e-8, help="IPM KKT tolerance")
    ap.add_argument("--balance-tol", type=float, default=1e-3,
                    help="bus mismatch audit bar (default: the 1e-3 pu "
                    "feasibility bar the summary table is judged against)")
    args = ap.parse_args(argv)

    if args.report_dir:
        args.report_dir.mkdir(parents=True, exist_ok=True)

    print(COLUMNS)
    rc = 0
    for name, pre in PREROTATION.items():
        path = args.cases_dir / f"{name}.m"
        if not path.exists():
            print(f"{name:12s}  missing ({path})")
            rc = 1
            continue
        cfg = cli.RunConfig(
            case_paths=[str(path)], model="both", prerotation=pre,
            a=args.a, tol=args.tol, balance_tol=args.balance_tol,
        )
        t0 = time.perf_counter()
        try:
            payload = cli.run_case(cfg, str(path))
        except cli.CliError as e:
            print(f"{name:12s}  {e.category}: {e}")
            rc = 1
            continue
        wall = time.perf_counter() - t0

        comp = payload["comparison"]
        ac, apf = payload["solves"]["ac"], payload["solves"]["apf"]
        audit = "pass" if apf["feasibility"]["passed"] else "FAIL"
        bus_p = apf["feasibility"]["classes"]["bus_p"]["max"]
        n_bus = payload["n_bus"]
        n_br = payload["n_branch"]
        print(
            f"{name:12s} {n_bus:4d} {n_br:4d}   "
            f"{ac['objective']:12.4f}  {apf['objective']:12.4f}  "
            f"{comp['gap_pct']:.2e}   {ac['iterations']:3d}/{apf['iterations']:3d}"
            f"    {comp['max_angle_deg_a']:6.3f}/{comp['max_angle_deg_b']:6.3f}"
            f"        {len(comp['congestion_a']):2d}/{len(comp['congestion_b']):2d}"
            f"     {bus_p:.1e}    {audit}   ({wall:.1f}s)"
        )
        if not payload["ok"]:
            rc = 1
        if args.report_dir:
            with open(args.report_dir / f"{name}.json", "w") as fh:
                json.dump(payload, fh, indent=2, sort_keys=True)
    return rc


if __name__ == "__main__":
    raise SystemExit(main())
