"""Command-line front end.

Exit codes: 0 success, 1 validation or parse failure, 2 infeasible,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .barrier import (InfeasibleCertificate, SolverConfig, feasibility_margins, phase1,
                      solve)
from .errors import KypError
from .fileio import (ProblemFileError, load_problem, report_to_dict, save_problem,
                     save_report)
from .model import is_controllable, validate_problem
from .synthesis import (assemble_kyp_sdp, build_actuator_uncertainty,
                        generate_mass_spring_chain, probe_start)
from .verification import check_frequency_domain, check_synthesis_lmi

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INFEASIBLE = 2
EXIT_NUMERICAL = 3

BENCH_COLUMNS = ("n", "p", "newton_iters", "riccati_solves", "lyapunov_solves", "secs_per_iter")


def _err(msg: str):
    print(msg, file=sys.stderr)


def _config_from_args(args) -> SolverConfig:
    kw = {}
    for name in ("t0", "t_max", "t_factor", "newton_tol"):
        val = getattr(args, name, None)
        if val is not None:
            kw[name] = val
    return SolverConfig(**kw)


def _margins_dict(m) -> dict:
    return {"N": m.N, "negR": m.negR, "P_plus": m.P_plus, "Delta": m.Delta}


def _find_start(prob, lam0, config, *, probe: bool = False):
    """Starting point, or an :class:`InfeasibleCertificate`.

    A supplied ``lam0`` is used as is. Otherwise ``probe`` tries the cheap
    scan of :func:`probe_start` before falling back to phase I.
    """
    if lam0 is not None:
        return np.asarray(lam0, dtype=float), "given"
    if probe:
        lam = probe_start(prob)
        if lam is not None:
            return lam, "probe"
    return phase1(prob, config), "phase1"


def run_solve(prob, lam0, config: SolverConfig, *, probe: bool = False):
    """Start-point search plus barrier solve.

    Returns
    -------
    code : int
        Exit code.
    doc : dict
        Report document.
    """
    try:
        start, how = _find_start(prob, lam0, config, probe=probe)
    except KypError as exc:
        return EXIT_NUMERICAL, {"status": "domain_error", "message": f"phase I failed: {exc}"}
    if isinstance(start, InfeasibleCertificate):
        doc = {"schema_version": "1", "status": "infeasible",
               "message": "phase I ended with lambda_0 >= 0",
               "lambda0": start.lambda0, "lambda_phase1": start.lam.tolist()}
        return EXIT_INFEASIBLE, doc
    report = solve(prob, start, config)
    margins = feasibility_margins(prob, report.lambda_opt, config)
    doc = report_to_dict(report, config, {"start": {"method": how, "lambda": start},
                                          "margins": _margins_dict(margins)})
    code = EXIT_OK if report.status == "optimal" else EXIT_NUMERICAL
    return code, doc


def _print_summary(doc: dict, out=None):
    out = out or sys.stdout
    print(f"status: {doc['status']}", file=out)
    if doc.get("status") == "infeasible":
        print(f"lambda_0: {doc['lambda0']!r}", file=out)
        return
    if doc.get("objective") is not None:
        print(f"objective: {doc['objective']!r}", file=out)
    if doc.get("lambda_opt") is not None:
        print(f"lambda: {doc['lambda_opt']}", file=out)
    if doc.get("margins"):
        print("margins: " + ", ".join(f"{k}={v:.3e}" if v is not None else f"{k}=-inf"
                                      for k, v in doc["margins"].items()), file=out)
    if doc.get("message"):
        print(doc["message"], file=out)


def cmd_validate(args) -> int:
    try:
        prob, _, _ = load_problem(args.file)
    except (OSError, ProblemFileError) as exc:
        _err(f"error: {exc}")
        return EXIT_INVALID
    except KypError as exc:
        _err(f"error: {exc}")
        return EXIT_INVALID
    report = validate_problem(prob)
    for f in report.findings:
        print(f"{f.severity}: [{f.code}] {f.message}")
    print("ok" if report.ok else "invalid")
    return EXIT_OK if report.ok else EXIT_INVALID


def cmd_solve(args) -> int:
    try:
        prob, lam0, _ = load_problem(args.file)
    except (OSError, KypError) as exc:
        _err(f"error: {exc}")
        return EXIT_INVALID
    report = validate_problem(prob)
    if not report.ok:
        for f in report.findings:
            _err(f"{f.severity}: [{f.code}] {f.message}")
        return EXIT_INVALID
    try:
        config = _config_from_args(args)
    except ValueError as exc:
        _err(f"error: {exc}")
        return EXIT_INVALID
    code, doc = run_solve(prob, lam0, config)
    _print_summary(doc)
    if args.out:
        save_report(args.out, doc)
    return code


def _load_plant(path):
    data = json.loads(Path(path).read_text())
    Acal = np.array(data["Acal"], dtype=float)
    B1 = np.array(data["B1"], dtype=float).reshape(Acal.shape[0], -1)
    return Acal, B1


def cmd_synth(args) -> int:
    if args.plant:
        try:
            Acal, B1 = _load_plant(args.plant)
        except (OSError, KeyError, ValueError, TypeError) as exc:
            _err(f"error: cannot read plant file: {exc}")
            return EXIT_INVALID
        origin = {"plant_file": str(args.plant)}
    else:
        Acal, B1 = generate_mass_spring_chain(args.chain)
        origin = {"chain": args.chain}
    if not is_controllable(Acal, B1):
        _err("error: (Acal, B1) is not controllable")
        return EXIT_INVALID
    n, m = B1.shape
    spec = build_actuator_uncertainty(Acal, B1, args.gamma,
                                      Qcal=args.q_weight * np.eye(n),
                                      Rcal=args.r_weight * np.eye(m))
    prob = assemble_kyp_sdp(spec)
    prefix = Path(args.out)
    meta = dict(origin, gamma=args.gamma, q_weight=args.q_weight, r_weight=args.r_weight)
    save_problem(prefix.with_name(prefix.name + ".problem.json"), prob, metadata=meta)

    config = _config_from_args(args)
    code, doc = run_solve(prob, None, config, probe=True)
    if doc.get("status") == "optimal":
        lam, P = np.array(doc["lambda_opt"]), np.array(doc["P_plus"])
        freq = check_frequency_domain(prob, lam)
        doc["verification"] = {
            "frequency_margin": freq.margin,
            "frequency_points": freq.evaluated,
            "frequency_skipped": list(freq.skipped),
            "synthesis_lmi_margin": check_synthesis_lmi(spec, lam, P),
        }
        if not freq.margin > 0.0:
            code = EXIT_NUMERICAL
            doc["message"] = "frequency check found a nonnegative point"
    doc.setdefault("metadata", meta)
    save_report(prefix.with_name(prefix.name + ".report.json"), doc)
    _print_summary(doc)
    if "verification" in doc:
        v = doc["verification"]
        print(f"frequency margin: {v['frequency_margin']:.3e} over {v['frequency_points']} points")
        print(f"synthesis LMI margin: {v['synthesis_lmi_margin']:.3e}")
    return code


def bench_rows(sizes: Sequence[int], repeats: int = 1, gamma: float = 0.25,
               config: Optional[SolverConfig] = None) -> list[dict]:
    """Solve one actuator-uncertainty chain per even state dimension ``n``.

    Each row holds the median ``secs_per_iter`` over ``repeats`` runs and
    the counters of the run that attained it.
    """
    config = config or SolverConfig()
    rows = []
    for n in sizes:
        if n < 2 or n % 2:
            raise ValueError(f"chain state dimension must be even and positive, got {n}")
        Acal, B1 = generate_mass_spring_chain(n // 2)
        prob = assemble_kyp_sdp(build_actuator_uncertainty(Acal, B1, gamma))
        runs = []
        for _ in range(repeats):
            start, _ = _find_start(prob, None, config, probe=True)
            if isinstance(start, InfeasibleCertificate):
                raise KypError(f"chain with n={n} reported infeasible")
            rep = solve(prob, start, config)
            runs.append(rep)
        runs.sort(key=lambda r: r.secs_per_iter)
        med = runs[len(runs) // 2]
        rows.append({"n": n, "p": prob.p, "newton_iters": med.newton_iters_total,
                     "riccati_solves": med.riccati_solves,
                     "lyapunov_solves": med.lyapunov_solves,
                     "secs_per_iter": med.secs_per_iter, "status": med.status})
    return rows


def fit_exponent(rows) -> Optional[float]:
    """Least-squares slope of ``log secs_per_iter`` against ``log n``; None below two sizes."""
    ns = np.array([r["n"] for r in rows], dtype=float)
    ts = np.array([r["secs_per_iter"] for r in rows], dtype=float)
    if np.unique(ns).size < 2:
        return None
    return float(np.polyfit(np.log(ns), np.log(ts), 1)[0])


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=BENCH_COLUMNS, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def cmd_bench(args) -> int:
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except ValueError:
        _err(f"error: bad size list {args.sizes!r}")
        return EXIT_INVALID
    tick = time.perf_counter()
    try:
        rows = bench_rows(sizes, args.repeats)
    except ValueError as exc:
        _err(f"error: {exc}")
        return EXIT_INVALID
    except KypError as exc:
        _err(f"error: {exc}")
        return EXIT_NUMERICAL
    text = rows_to_csv(rows)
    if args.csv:
        Path(args.csv).write_text(text)
    sys.stdout.write(text)
    slope = fit_exponent(rows)
    if slope is not None:
        print(f"scaling exponent: {slope:.3f}")
    print(f"total seconds: {time.perf_counter() - tick:.1f}")
    bad = [r["n"] for r in rows if r["status"] != "optimal"]
    if bad:
        _err(f"warning: solves did not reach optimal status for n={bad}")
    return EXIT_OK


def _positive_int(text):
    val = int(text)
    if val < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return val


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kypsdp", description="Riccati-based KYP-SDP solver")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a problem file")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate)

    def solver_flags(p):
        p.add_argument("--t0", type=float)
        p.add_argument("--t-max", dest="t_max", type=float)
        p.add_argument("--t-factor", dest="t_factor", type=float)
        p.add_argument("--newton-tol", dest="newton_tol", type=float)

    p = sub.add_parser("solve", help="solve a problem file")
    p.add_argument("file")
    solver_flags(p)
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("synth", help="robust state-feedback instance with actuator uncertainty")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--chain", type=_positive_int, help="number of masses in a spring chain")
    src.add_argument("--plant", help="JSON file with Acal and B1")
    p.add_argument("--gamma", type=float, default=0.25)
    p.add_argument("--q-weight", dest="q_weight", type=float, default=1.0)
    p.add_argument("--r-weight", dest="r_weight", type=float, default=1.0)
    p.add_argument("--out", default="synth", help="prefix for the problem and report files")
    solver_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="per-iteration timing on spring chains")
    p.add_argument("--sizes", required=True, help="comma-separated state dimensions n")
    p.add_argument("--repeats", type=_positive_int, default=1)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "gamma", None) is not None and args.gamma <= 0:
        _err("error: gamma must be positive")
        return EXIT_INVALID
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
