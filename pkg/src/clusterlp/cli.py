"""Command-line entry point.

Every subcommand prints one JSON document (the gap table may be CSV) with a
``schema_version`` field.  Exit codes: 0 success, 2 invalid input,
3 instance too large, 4 a checked criterion failed, 1 anything else.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .errors import ClusterLpError, ValidationError
from .instance import SCHEMA_VERSION, objective_clustering, read_instance

logger = logging.getLogger("clusterlp")

EXIT_OK, EXIT_ERROR, EXIT_VALIDATION, EXIT_CAPACITY, EXIT_CRITERION = 0, 1, 2, 3, 4


def _emit(doc: dict, out: str | None) -> None:
    text = json.dumps({"schema_version": SCHEMA_VERSION, **doc}, indent=2, default=_json_default)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _rules(name: str):
    from .sdp import rules_by_name
    return rules_by_name(name)


def _n_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty n list")
    return values


# -- subcommands ---------------------------------------------------------------

def cmd_solve_exact(args) -> int:
    from .exact import bell_number, solve_exact
    inst = read_instance(args.instance)
    res = solve_exact(inst, max_n=args.max_n)
    _emit({"command": "solve-exact", "n": inst.n, "opt": res.opt_value,
           "witness": res.witness.to_json()["clusters"],
           "partitions_enumerated": res.partitions_enumerated, "bell_number": bell_number(inst.n)}, args.out)
    return EXIT_OK


def cmd_solve_lp(args) -> int:
    from .lp import solve_cluster_lp_exact, solve_pairwise_lp
    inst = read_instance(args.instance)
    if args.relaxation == "cluster":
        sol = solve_cluster_lp_exact(inst, max_n=args.max_n)
        doc = {"relaxation": "cluster", "lp_value": sol.lp_value,
               "support": [{"set": sorted(s), "value": v} for s, v in zip(sol.sets, sol.values.tolist())],
               "x": sol.x_matrix(), "solver": sol.report.to_json() if sol.report else None}
    else:
        sol = solve_pairwise_lp(inst)
        doc = {"relaxation": "pairwise", "lp_value": sol.lp_value, "x": sol.x.matrix(),
               "max_triangle_violation": sol.max_triangle_violation(),
               "solver": sol.report.to_json() if sol.report else None}
    _emit({"command": "solve-lp", "n": inst.n, **doc}, args.out)
    return EXIT_OK


def cmd_precluster(args) -> int:
    from .preclustering import build_admissible, build_atoms, dense_atom_violations
    inst = read_instance(args.instance)
    atoms = build_atoms(inst, beta=args.beta, seed=args.seed)
    pre = build_admissible(inst, atoms, args.eps)
    _emit({"command": "precluster", "seed": args.seed, "beta": args.beta, **pre.to_json(),
           "dense_atom_violations": dense_atom_violations(inst, atoms, args.beta)}, args.out)
    return EXIT_OK


def cmd_round(args) -> int:
    from .lp import read_solution, solve_cluster_lp_exact
    from .rounding import round_classic_pivot, round_cluster_based, round_pivot
    inst = read_instance(args.instance)
    if args.trials < 1:
        raise ValidationError("--trials must be at least 1")
    sol = None
    if args.rules != "classic":
        sol = read_solution(args.solution, inst) if args.solution else solve_cluster_lp_exact(inst)
        if sol.n != inst.n:
            raise ValidationError("solution and instance have different vertex counts")
    seeds = np.random.SeedSequence(args.seed).generate_state(args.trials, dtype=np.uint64)
    costs = np.empty(args.trials, dtype=np.int64)
    best, best_cost = None, None
    for t, s in enumerate(seeds.tolist()):
        if args.rules == "classic":
            c = round_classic_pivot(inst, s)
        elif args.rules == "cluster":
            c = round_cluster_based(sol, s)
        else:
            c = round_pivot(sol, _rules(args.rules), s, inst).clustering
        costs[t] = objective_clustering(inst, c)
        if best_cost is None or costs[t] < best_cost:
            best, best_cost = c, int(costs[t])
    lp_value = sol.lp_value if sol is not None else None
    _emit({"command": "round", "rules": args.rules, "seed": args.seed, "trials": args.trials,
           "best_cost": best_cost, "best_clustering": best.to_json()["clusters"],
           "mean_cost": float(costs.mean()), "min_cost": int(costs.min()), "max_cost": int(costs.max()),
           "lp_value": lp_value,
           "mean_over_lp": float(costs.mean() / lp_value) if lp_value else None}, args.out)
    return EXIT_OK


def cmd_verify_triangles(args) -> int:
    from .triangles import verify_lemmas
    report = verify_lemmas(args.alpha, _rules(args.rules), args.step,
                           degenerate_alpha=args.degenerate_alpha)
    ok = report.passed(args.tol)
    _emit({"command": "verify-triangles", "passed": ok, **report.to_json()}, args.out)
    return EXIT_OK if ok else EXIT_CRITERION


def cmd_build_sdp(args) -> int:
    from .sdp import assemble_matrices, default_breakpoints, emit_sdpa, read_breakpoints
    disc = read_breakpoints(args.breakpoints) if args.breakpoints else default_breakpoints()
    model = assemble_matrices(disc, _rules(args.rules), args.alpha, tol=args.tol, workers=args.workers)
    path = emit_sdpa(model, args.out)
    _emit({"command": "build-sdp", "model": str(path), "sidecar": str(path) + ".json",
           "variables": model.num_vars, "cells": len(model.cells), "empty_cells": model.empty_cells,
           "alpha": args.alpha, "rules": args.rules, "intervals": disc.t,
           "objective_min": float(model.objective.min()), **model.meta}, None)
    return EXIT_OK


def cmd_eval_eta(args) -> int:
    from .sdp import evaluate_eta, read_eta, read_sdpa
    model = read_sdpa(args.model)
    ev = evaluate_eta(model, read_eta(args.eta))
    ok = ev.min_eig_q >= -args.tol and ev.min_eig_f >= -args.tol and abs(ev.eta_sum - 1) <= args.tol
    _emit({"command": "eval-eta", "feasible": ok, **ev.to_json()}, args.out)
    return EXIT_OK


def cmd_gap(args) -> int:
    from .gap import gap_report
    rows = [r.to_json() for r in gap_report(args.n)]
    if args.format == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
        if args.out:
            Path(args.out).write_text(buf.getvalue())
        else:
            sys.stdout.write(buf.getvalue())
    else:
        _emit({"command": "gap", "rows": rows}, args.out)
    return EXIT_OK


def cmd_reproduce(args) -> int:
    from .acceptance import run_acceptance
    ids = [c.strip().upper() for c in args.criteria.split(",")] if args.criteria else None
    results = run_acceptance(args.level, ids)
    for r in results:
        print(r.line(), file=sys.stderr)
    doc = {"command": "reproduce", "level": args.level, "passed": all(r.passed for r in results),
           "criteria": [r.to_json() for r in results]}
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _emit(doc, str(out / "manifest.json"))
    _emit({k: v for k, v in doc.items() if k != "criteria"} |
          {"criteria": [{"id": r.cid, "passed": r.passed, "summary": r.summary} for r in results]}, None)
    return EXIT_OK if doc["passed"] else EXIT_CRITERION


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="clusterlp", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def out_flag(sp):
        sp.add_argument("--out", help="write the JSON result here instead of stdout")

    sp = sub.add_parser("solve-exact", help="exact optimum by partition enumeration")
    sp.add_argument("--instance", required=True, help="instance JSON file")
    sp.add_argument("--max-n", type=int, default=12, help="refuse instances above this size (default 12)")
    out_flag(sp)
    sp.set_defaults(func=cmd_solve_exact)

    sp = sub.add_parser("solve-lp", help="solve the cluster LP or the pairwise LP exactly")
    sp.add_argument("--instance", required=True, help="instance JSON file")
    sp.add_argument("--relaxation", choices=("cluster", "pairwise"), default="cluster",
                    help="which relaxation (default cluster)")
    sp.add_argument("--max-n", type=int, default=12, help="cluster LP size limit (default 12)")
    out_flag(sp)
    sp.set_defaults(func=cmd_solve_lp)

    sp = sub.add_parser("precluster", help="atoms and admissible pairs")
    sp.add_argument("--instance", required=True, help="instance JSON file")
    sp.add_argument("--eps", type=float, default=0.25, help="admissibility parameter in (0, 1)")
    sp.add_argument("--beta", type=float, default=0.1, help="atom density parameter in (0, 1)")
    sp.add_argument("--seed", type=int, default=0, help="seed of the starting pivot clustering")
    out_flag(sp)
    sp.set_defaults(func=cmd_precluster)

    sp = sub.add_parser("round", help="round an LP solution repeatedly and keep the best clustering")
    sp.add_argument("--instance", required=True, help="instance JSON file")
    sp.add_argument("--solution", help="cluster LP solution JSON (solved on the fly if omitted)")
    sp.add_argument("--rules", choices=("alg3", "alg4", "cluster", "classic"), default="alg3",
                    help="pivot rule set, cluster-based rounding, or the classic pivot")
    sp.add_argument("--trials", type=int, default=100, help="number of independent roundings")
    sp.add_argument("--seed", type=int, default=0, help="master seed")
    out_flag(sp)
    sp.set_defaults(func=cmd_round)

    sp = sub.add_parser("verify-triangles", help="grid check of delta - cost >= 0 over all triangle cases")
    sp.add_argument("--alpha", type=float, default=1.56, help="budget scale alpha in [1, 2)")
    sp.add_argument("--rules", default="alg3", help="rule set: alg3, alg4 or independent")
    sp.add_argument("--step", type=float, default=0.02, help="grid step dividing 1")
    sp.add_argument("--degenerate-alpha", type=float, default=None,
                    help="alpha for the degenerate-pair grid (default: --alpha)")
    sp.add_argument("--tol", type=float, default=1e-9, help="allowed negative slack")
    out_flag(sp)
    sp.set_defaults(func=cmd_verify_triangles)

    sp = sub.add_parser("build-sdp", help="assemble the factor-revealing SDP and write SDPA sparse format")
    sp.add_argument("--alpha", type=float, default=1.485, help="budget scale alpha")
    sp.add_argument("--rules", default="alg4", help="rule set used for d-tilde")
    sp.add_argument("--breakpoints", help="JSON list or text file of breakpoints (default: built-in 29)")
    sp.add_argument("--tol", type=float, default=2e-3, help="branch-and-bound target gap for d-tilde")
    sp.add_argument("--workers", type=int, default=os.cpu_count() or 1, help="parallel worker processes")
    sp.add_argument("--out", required=True, help="output .dat-s path; the sidecar goes to <out>.json")
    sp.set_defaults(func=cmd_build_sdp)

    sp = sub.add_parser("eval-eta", help="objective and PSD diagnostics of an eta vector")
    sp.add_argument("--model", required=True, help=".dat-s file written by build-sdp")
    sp.add_argument("--eta", required=True, help="JSON list (or {'eta': [...]}) of nonnegative values")
    sp.add_argument("--tol", type=float, default=1e-7, help="feasibility tolerance for the report flag")
    out_flag(sp)
    sp.set_defaults(func=cmd_eval_eta)

    sp = sub.add_parser("gap", help="integrality-gap table for the line graph of K_n")
    sp.add_argument("--n", type=_n_list, default=[5], help="comma-separated base sizes, e.g. 5,20,60")
    sp.add_argument("--format", choices=("json", "csv"), default="json", help="output format")
    out_flag(sp)
    sp.set_defaults(func=cmd_gap)

    sp = sub.add_parser("reproduce", help="run the acceptance criteria")
    sp.add_argument("level", choices=("smoke", "full"), help="smoke: A1-A5 quickly; full: A1-A9")
    sp.add_argument("--criteria", help="comma-separated subset, e.g. A3,A5")
    sp.add_argument("--out-dir", help="directory for manifest.json")
    sp.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ClusterLpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
