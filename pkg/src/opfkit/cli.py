"""Batch driver: parse -> admittance -> pre-rotation -> solve -> report.

One invocation handles one or more case files, solving the exact model
("ac"), the surrogate model ("apf"), or both, then auditing every
solution under exact AC physics and comparing the two models when both
ran.  Reports are JSON (schema "opfkit-report-1"); kernel sample tables
and rotation references can be emitted as CSV.  Exit code 0 means every
requested solve reached OPTIMAL and, when both models ran, the surrogate
solution passed the exact-AC audit.

Errors print one machine-readable line to stderr:
    opfkit: error: <category>: <message>
with category one of config, parse, assembly, solve, audit, io.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import dcflow, formulation, ipm, verify
from .errors import (
    AdmittanceError,
    CaseDataError,
    CaseFormatError,
    DcOpfError,
    EmptyInteriorError,
    FactorizationError,
    OpfKitError,
)
from .kernels import KernelParam, write_kernel_samples
from .netmodel import build_admittance, parse_matpower, scale_line_ratings

REPORT_SCHEMA = "opfkit-report-1"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARSE = 2
EXIT_ASSEMBLY = 3
EXIT_SOLVE = 4
EXIT_AUDIT = 5

_CATEGORY_EXIT = {
    "config": EXIT_CONFIG,
    "io": EXIT_CONFIG,
    "parse": EXIT_PARSE,
    "assembly": EXIT_ASSEMBLY,
    "solve": EXIT_SOLVE,
    "audit": EXIT_AUDIT,
}

MODELS = ("ac", "apf", "both")
_VARIANT = {"ac": formulation.TRIG, "apf": formulation.ALLPASS}


class CliError(OpfKitError):
    """Driver-level failure carrying a machine-readable category."""

    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category


def _fail(category: str, message: str) -> CliError:
    return CliError(category, message)


@dataclass
class RunConfig:
    """Everything one driver invocation needs, in plain fields."""

    case_paths: list = field(default_factory=list)
    model: str = "both"
    prerotation: str = dcflow.DCPF
    a: float = 0.5
    rate_scale_m: float = 0.0
    balance_tol: float = 1e-4
    bound_tol: float = 1e-6
    binding_tol: float = 1e-4
    tol: float = 1e-8
    max_iter: int = 300
    mu0: float = 1e-1
    report_json: Optional[str] = None
    kernel_csv: Optional[str] = None
    emit_kernel_samples: bool = False
    delta_lo_deg: float = -180.0
    delta_hi_deg: float = 180.0
    kernel_samples_n: int = 721
    rotation_csv: Optional[str] = None
    trace_json: Optional[str] = None
    log_file: Optional[str] = None
    jobs: int = 1
    verbose: bool = False

    def validate(self) -> None:
        if self.model not in MODELS:
            raise _fail("config", f"unknown model '{self.model}'")
        if self.prerotation not in dcflow.PREROTATION_MODES:
            raise _fail("config", f"unknown prerotation '{self.prerotation}'")
        if not (math.isfinite(self.a) and self.a > 0.0):
            raise _fail("config", "kernel parameter a must be finite and > 0")
        if not 0.0 <= self.rate_scale_m < 100.0:
            raise _fail("config", "rate-scale-m must lie in [0, 100)")
        if self.jobs < 1:
            raise _fail("config", "jobs must be >= 1")
        if not self.case_paths and not self.emit_kernel_samples:
            raise _fail("config", "no case files given and no kernel samples requested")

    def tolerances(self) -> verify.Tolerances:
        return verify.Tolerances(
            balance_tol=self.balance_tol,
            bound_tol=self.bound_tol,
            binding_tol=self.binding_tol,
        )

    def ipm_options(self, log_path: Optional[str], trace: bool) -> ipm.IpmOptions:
        return ipm.IpmOptions(
            mu0=self.mu0,
            tol=self.tol,
            max_iter=self.max_iter,
            verbose=self.verbose,
            log_path=log_path,
            collect_trace=trace,
        )


def _solve_payload(result: ipm.SolveResult, audit: verify.FeasibilityReport) -> dict:
    return {
        "status": result.status,
        "objective": result.objective,
        "iterations": result.iterations,
        "kkt": {
            "dual": result.kkt.dual,
            "primal": result.kkt.primal,
            "comp": result.kkt.comp,
        },
        "feasibility": audit.to_dict(),
        "timings": result.timings,
    }


def run_case(cfg: RunConfig, path: str) -> dict:
    """Full pipeline for one case file; returns the report payload.

    The payload always carries "ok": True only when every requested
    solve is OPTIMAL and, for model=both, the apf exact-AC audit passed.
    """
    stem = Path(path).stem
    try:
        case = parse_matpower(path)
    except OSError as e:
        raise _fail("io", f"{path}: {e}") from e
    except (CaseFormatError, CaseDataError) as e:
        raise _fail("parse", f"{path}: {e}") from e

    if cfg.rate_scale_m > 0.0:
        case = scale_line_ratings(case, cfg.rate_scale_m)

    try:
        adm = build_admittance(case)
        pre_mode = cfg.prerotation
        try:
            dcsol = dcflow.dc_reference(case, pre_mode)
        except DcOpfError as e:
            print(
                f"opfkit: warning: {stem}: dcopf pre-rotation failed "
                f"({e}); falling back to dcpf",
                file=sys.stderr,
            )
            pre_mode = dcflow.DCPF
            dcsol = dcflow.dc_reference(case, pre_mode)
        rot = dcflow.rotation_refs(dcsol, adm)
    except (AdmittanceError, CaseDataError, DcOpfError) as e:
        raise _fail("assembly", f"{stem}: {e}") from e

    models = ("ac", "apf") if cfg.model == "both" else (cfg.model,)
    tol = cfg.tolerances()
    results: dict[str, ipm.SolveResult] = {}
    audits: dict[str, verify.FeasibilityReport] = {}

    for name in models:
        variant = _VARIANT[name]
        try:
            mode = formulation.FlowMode(
                variant=variant,
                kernel=KernelParam(a=cfg.a),
                rotations=rot if variant == formulation.ALLPASS else None,
            )
            problem = formulation.assemble(case, adm, mode)
            x0 = formulation.initial_point(problem, dcsol)
        except (EmptyInteriorError, CaseDataError, ValueError) as e:
            raise _fail("assembly", f"{stem}/{name}: {e}") from e
        log_path = f"{cfg.log_file}.{stem}.{name}" if cfg.log_file else None
        opts = cfg.ipm_options(log_path, trace=cfg.trace_json is not None)
        try:
            result = ipm.solve(problem, opts, x0, label=f"{stem}/{name}")
        except FactorizationError as e:
            raise _fail("solve", f"{stem}/{name}: {e}") from e
        results[name] = result
        ev = verify.evaluate_true_ac(case, adm, verify.solution_point(case, result.x))
        audits[name] = verify.feasibility_check(ev, case, tol)

    payload = {
        "schema": REPORT_SCHEMA,
        "case": stem,
        "case_path": str(path),
        "n_bus": case.n_bus,
        "n_branch": int(case.tables.on_branches.size),
        "n_gen": int(case.tables.on_gens.size),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "config": {
            "model": cfg.model,
            "prerotation": pre_mode,
            "a": cfg.a,
            "rate_scale_m": cfg.rate_scale_m,
            "tol": cfg.tol,
            "balance_tol": cfg.balance_tol,
            "bound_tol": cfg.bound_tol,
            "binding_tol": cfg.binding_tol,
        },
        "solves": {m: _solve_payload(results[m], audits[m]) for m in models},
    }

    ok = all(results[m].ok for m in models)
    if cfg.model == "both":
        comparison = verify.compare(results["ac"], results["apf"], case, adm, tol)
        payload["comparison"] = comparison.to_dict()
        ok = ok and audits["apf"].passed

    payload["ok"] = bool(ok)

    if cfg.rotation_csv:
        dcflow.write_rotation_csv(_per_case(cfg.rotation_csv, stem), case, adm, rot)
    if cfg.trace_json:
        traces = {
            m: results[m].trace for m in models if results[m].trace is not None
        }
        with open(_per_case(cfg.trace_json, stem), "w") as fh:
            json.dump(traces, fh, indent=2)
    return payload


def _per_case(path: str, stem: str) -> str:
    """Target path for a per-case artifact; directories get <stem> names."""
    p = Path(path)
    if p.is_dir():
        return str(p / f"{stem}{''.join(p.suffix) or ''}" )
    return path


def _report_target(cfg: RunConfig, stem: str) -> Optional[Path]:
    if not cfg.report_json:
        return None
    p = Path(cfg.report_json)
    if p.is_dir() or len(cfg.case_paths) > 1:
        p.mkdir(parents=True, exist_ok=True)
        return p / f"{stem}.json"
    return p


def run(cfg: RunConfig) -> int:
    """Execute a full configuration; returns the process exit code."""
    try:
        cfg.validate()

        if cfg.emit_kernel_samples or cfg.kernel_csv:
            dest = cfg.kernel_csv or "kernel_samples.csv"
            write_kernel_samples(
                dest,
                KernelParam(a=cfg.a),
                lo_deg=cfg.delta_lo_deg,
                hi_deg=cfg.delta_hi_deg,
                n=cfg.kernel_samples_n,
            )
            if cfg.verbose:
                print(f"opfkit: kernel samples -> {dest}", file=sys.stderr)

        if not cfg.case_paths:
            return EXIT_OK

        if cfg.jobs > 1 and len(cfg.case_paths) > 1:
            with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
                payloads = list(pool.map(lambda p: run_case(cfg, p), cfg.case_paths))
        else:
            payloads = [run_case(cfg, p) for p in cfg.case_paths]
    except CliError as e:
        print(f"opfkit: error: {e.category}: {e}", file=sys.stderr)
        return _CATEGORY_EXIT.get(e.category, EXIT_CONFIG)

    all_ok = True
    for payload in payloads:
        stem = payload["case"]
        target = _report_target(cfg, stem)
        if target is not None:
            with open(target, "w") as fh:
                json.dump(payload, fh, indent=2, sort_keys=True)
                fh.write("\n")
        for mdl, solved in payload["solves"].items():
            feas = "pass" if solved["feasibility"]["passed"] else "FAIL"
            print(
                f"{stem:10s} {mdl:4s} {solved['status']:9s} "
                f"f={solved['objective']:.6f} it={solved['iterations']:3d} "
                f"audit={feas}"
            )
        if "comparison" in payload:
            c = payload["comparison"]
            print(
                f"{stem:10s} gap={c['gap_pct']:.6f}%  congestion "
                f"{c['congestion_a']} vs {c['congestion_b']} "
                f"(mismatch {c['congestion_mismatch']})"
            )
        if not payload["ok"]:
            all_ok = False
            bad_solve = any(
                s["status"] != ipm.OPTIMAL for s in payload["solves"].values()
            )
            category = "solve" if bad_solve else "audit"
            print(
                f"opfkit: error: {category}: {stem} "
                + ("solver did not reach OPTIMAL" if bad_solve
                   else "apf solution failed the exact-AC audit"),
                file=sys.stderr,
            )

    if all_ok:
        return EXIT_OK
    if any(
        s["status"] != ipm.OPTIMAL
        for p in payloads for s in p["solves"].values()
    ):
        return EXIT_SOLVE
    return EXIT_AUDIT


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="opfkit",
        description="AC / all-pass OPF batch driver with exact-AC auditing",
    )
    ap.add_argument("--case", dest="case_paths", action="append", default=[],
                    metavar="FILE", help="case file; repeat for batches")
    ap.add_argument("--model", choices=MODELS, default="both")
    ap.add_argument("--prerotation", choices=sorted(dcflow.PREROTATION_MODES),
                    default=dcflow.DCPF)
    ap.add_argument("--a", type=float, default=0.5,
                    help="all-pass kernel parameter (default 0.5)")
    ap.add_argument("--a-params", type=float, nargs="+", default=None,
                    metavar="A", help="kernel parameter list; only length 1 "
                    "is supported for now")
    ap.add_argument("--rate-scale-m", type=float, default=0.0,
                    metavar="PCT", help="tighten the first 90%% of line "
                    "ratings by PCT percent")
    ap.add_argument("--balance-tol", type=float, default=1e-4)
    ap.add_argument("--bound-tol", type=float, default=1e-6)
    ap.add_argument("--binding-tol", type=float, default=1e-4)
    ap.add_argument("--tol", type=float, default=1e-8,
                    help="IPM KKT tolerance")
    ap.add_argument("--max-iter", type=int, default=300)
    ap.add_argument("--mu0", type=float, default=1e-1)
    ap.add_argument("--report-json", metavar="PATH",
                    help="report file (single case) or directory")
    ap.add_argument("--kernel-csv", metavar="PATH",
                    help="write kernel sample CSV here")
    ap.add_argument("--emit-kernel-samples", action="store_true",
                    help="write kernel samples (default kernel_samples.csv)")
    ap.add_argument("--delta-range", type=float, nargs=2, default=(-180.0, 180.0),
                    metavar=("LO", "HI"), help="kernel sample range, degrees")
    ap.add_argument("--samples", type=int, default=721,
                    help="kernel sample count")
    ap.add_argument("--rotation-csv", metavar="PATH",
                    help="write pre-rotation reference CSV here")
    ap.add_argument("--trace-json", metavar="PATH",
                    help="write per-iteration solver trace JSON here")
    ap.add_argument("--log-file", metavar="PATH",
                    help="iteration log prefix (suffixed per case/model)")
    ap.add_argument("--jobs", type=int, default=1,
                    help="solve independent cases concurrently")
    ap.add_argument("--verbose", action="store_true")
    return ap


def config_from_args(argv=None) -> RunConfig:
    ns = build_parser().parse_args(argv)
    a = ns.a
    if ns.a_params is not None:
        if len(ns.a_params) > 1:
            raise _fail(
                "config",
                "a-params sweeps are not supported yet; pass a single value",
            )
        a = ns.a_params[0]
    return RunConfig(
        case_paths=list(ns.case_paths),
        model=ns.model,
        prerotation=ns.prerotation,
        a=a,
        rate_scale_m=ns.rate_scale_m,
        balance_tol=ns.balance_tol,
        bound_tol=ns.bound_tol,
        binding_tol=ns.binding_tol,
        tol=ns.tol,
        max_iter=ns.max_iter,
        mu0=ns.mu0,
        report_json=ns.report_json,
        kernel_csv=ns.kernel_csv,
        emit_kernel_samples=ns.emit_kernel_samples,
        delta_lo_deg=ns.delta_range[0],
        delta_hi_deg=ns.delta_range[1],
        kernel_samples_n=ns.samples,
        rotation_csv=ns.rotation_csv,
        trace_json=ns.trace_json,
        log_file=ns.log_file,
        jobs=ns.jobs,
        verbose=ns.verbose,
    )


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
    except CliError as e:
        print(f"opfkit: error: {e.category}: {e}", file=sys.stderr)
        return _CATEGORY_EXIT.get(e.category, EXIT_CONFIG)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
