"""``mublab`` command line.

Exit codes: 0 when every checked invariant holds, 1 when one fails, 2 for
usage, configuration or unsupported-size errors.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from ..mub import (UnsupportedDimensionError, build_prime_mub, build_qubit_mub,
                   random_basis_union, verify_unbiasedness)
from ..numcore import SeededRng
from ..width import (Ensemble, block_vs_dense, complete_mub, dominance_sweep, gap_sweep,
                     octahedron_trial, radial_width, simplex_blocks, two_sided_agree,
                     union_sweep)
from . import report as report_mod
from . import runner
from .config import ConfigError, config_hash, load_config

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
WIDTH_SUBCOMMANDS = ("compare", "dominance", "octahedron", "radial", "gap")


def _write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _out_dir(cfg) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


# --------------------------------------------------------------------------
# mub-verify
# --------------------------------------------------------------------------

def _build(label):
    kind, k = label
    return build_prime_mub(k) if kind == "prime" else build_qubit_mub(k)


def cmd_mub_verify(cfg, dims=None) -> int:
    out = _out_dir(cfg)
    m = cfg["mub"]
    if dims:
        labels = []
        for d in dims:
            if d >= 2 and d & (d - 1) == 0 and d > 2:
                labels.append(("qubits", d.bit_length() - 1))
            else:
                labels.append(("prime", d))
    else:
        labels = [("prime", d) for d in m["primes"]] + [("qubits", n) for n in range(1, m["n_max"] + 1)]
    results, ok = [], True
    for label in labels:
        entry = {"construction": label[0], "parameter": label[1]}
        try:
            rep = verify_unbiasedness(_build(label), m["tol"])
        except UnsupportedDimensionError as exc:
            entry["error"] = str(exc)
            results.append(entry)
            _write_json(out / "mub_verify.json", {"results": results, "passed": False})
            print(f"mub-verify: unsupported dimension: {exc}", file=sys.stderr)
            return EXIT_USAGE
        entry.update(rep.to_dict())
        ok &= rep.passed
        results.append(entry)
        print(f"{label[0]:>7} {label[1]:>2}: max overlap dev {rep.max_overlap_deviation:.2e} "
              f"{'PASS' if rep.passed else 'FAIL'}")
    _write_json(out / "mub_verify.json", {"results": results, "passed": ok})
    runner.update_manifest(out, "mub-verify", cfg, config_hash(cfg, "mub"), ["mub_verify.json"])
    return EXIT_OK if ok else EXIT_FAIL


# --------------------------------------------------------------------------
# width
# --------------------------------------------------------------------------

def _compare_job(args):
    d, n_unions, n_samples, seed = args
    rng = SeededRng(seed).derive("width-compare")
    sweep = union_sweep(d, n_unions, n_samples, rng)
    blocks = simplex_blocks(complete_mub(d), n_samples, rng.derive("blocks", d))
    return {"sweep": sweep.to_dict(), "simplex_blocks": blocks.to_dict(),
            "passed": sweep.passed and blocks.cross_independent}


def _dominance_job(args):
    d, n_unions, n_samples, seed = args
    curve, reps = dominance_sweep(d, n_unions, n_samples, SeededRng(seed).derive("width-dominance"))
    return {"dim": d, "curve_csv": curve.to_csv(), "reports": [r.to_dict() for r in reps],
            "passed": all(r.passed for r in reps)}


def _width_compare(cfg, out, workers):
    w = cfg["width"]
    jobs = [(d, w["n_unions"], w["n_samples"], cfg["seed"]) for d in w["dims"]]
    res = runner.parallel_map(_compare_job, jobs, workers)
    rows = []
    for d, r in zip(w["dims"], res):
        for k, c in enumerate(r["sweep"]["comparisons"]):
            rows.append({"d": d, "union": k, "w_union": c["candidate"]["mean"],
                         "w_mub": c["reference"]["mean"], "diff": c["diff"],
                         "joint_stderr": c["joint_stderr"], "violation": c["violation"]})
    runner.write_csv(out / "width_compare.csv",
                     ["d", "union", "w_union", "w_mub", "diff", "joint_stderr", "violation"], rows)
    return {"dims": dict(zip(map(str, w["dims"]), res)), "passed": all(r["passed"] for r in res)}, \
        ["width_compare.json", "width_compare.csv"]


def _width_dominance(cfg, out, workers):
    w = cfg["width"]
    jobs = [(d, w["dominance_unions"], w["n_samples"], cfg["seed"]) for d in w["dims"]]
    res = runner.parallel_map(_dominance_job, jobs, workers)
    files = ["width_dominance.json"]
    for r in res:
        name = f"mub_max_cdf_d{r['dim']}.csv"
        (out / name).write_text(r.pop("curve_csv"))
        files.append(name)
    return {"dims": {str(r["dim"]): r for r in res}, "passed": all(r["passed"] for r in res)}, files


def _width_octahedron(cfg, out, workers):
    w = cfg["width"]
    rep = octahedron_trial(w["octahedron_ensembles"], w["n_samples"],
                           SeededRng(cfg["seed"]).derive("width-octahedron"))
    rows = [{"ensemble": k, "width": e.mean, "stderr": e.stderr} for k, e in enumerate(rep.estimates)]
    runner.write_csv(out / "width_octahedron.csv", ["ensemble", "width", "stderr"], rows)
    return rep.to_dict(), ["width_octahedron.json", "width_octahedron.csv"]


def radial_ensembles(seed):
    union = random_basis_union(3, SeededRng(seed).derive("radial-union"))
    return [Ensemble.from_union(complete_mub(2)), Ensemble.from_union(union, "random_union_d3")]


def _width_radial(cfg, out, workers):
    w = cfg["width"]
    rng = SeededRng(cfg["seed"]).derive("width-radial")
    reps = []
    for k, ens in enumerate(radial_ensembles(cfg["seed"])):
        for law in w["radial_laws"]:
            rep = radial_width(ens, law, w["n_samples"], rng.derive(k, law))
            reps.append({"ensemble": ens.name, **rep.to_dict()})
    return {"reports": reps, "passed": all(r["passed"] for r in reps)}, ["width_radial.json"]


def _width_gap(cfg, out, workers):
    w = cfg["width"]
    bad = [n for n in w["gap_n"] if not 1 <= n <= 4]
    if bad:
        raise ValueError(f"gap probe supports n in 1..4, got {bad}")
    rng = SeededRng(cfg["seed"]).derive("width-gap")
    sweep = gap_sweep(w["gap_n"], w["n_samples"], rng)
    agree = {}
    for n in w["gap_n"]:
        comp = block_vs_dense(n, w["n_samples"], rng.derive("samplers", n))
        agree[str(n)] = {**comp.to_dict(), "agree": two_sided_agree(comp)}
    rows = [{"n": r.n_qubits, "d": r.dim, "N": r.n_points, "m_N": r.m_n_hat.mean,
             "W_M": r.w_m_hat.mean, "gap": r.gap, "gap_stderr": r.gap_stderr} for r in sweep.reports]
    runner.write_csv(out / "width_gap.csv", ["n", "d", "N", "m_N", "W_M", "gap", "gap_stderr"], rows)
    ok = sweep.passed and all(a["agree"] for a in agree.values())
    return {"sweep": sweep.to_dict(), "block_vs_dense": agree, "passed": ok}, \
        ["width_gap.json", "width_gap.csv"]


_WIDTH = {"compare": _width_compare, "dominance": _width_dominance,
          "octahedron": _width_octahedron, "radial": _width_radial, "gap": _width_gap}


def cmd_width(sub, cfg) -> int:
    out = _out_dir(cfg)
    t0 = time.perf_counter()
    try:
        doc, files = _WIDTH[sub](cfg, out, cfg["workers"])
    except ValueError as exc:
        print(f"width {sub}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    elapsed = time.perf_counter() - t0
    doc["elapsed_s"] = elapsed
    _write_json(out / f"width_{sub}.json", doc)
    runner.update_manifest(out, f"width-{sub}", cfg, config_hash(cfg, "width"), files,
                           extra={"elapsed_s": elapsed})
    print(f"width {sub}: {'PASS' if doc['passed'] else 'FAIL'} ({elapsed:.1f} s)")
    return EXIT_OK if doc["passed"] else EXIT_FAIL


# --------------------------------------------------------------------------
# benchmarks and report
# --------------------------------------------------------------------------

def cmd_qaoa_bench(cfg) -> int:
    out = _out_dir(cfg)
    rows, tasks, chash, resumed, elapsed = runner.qaoa_bench(cfg, out, cfg["workers"])
    summ = report_mod.qaoa_summary(report_mod.load_rows(out / runner.QAOA_CSV, runner.QAOA_COLUMNS),
                                   cfg["seed"], cfg["qaoa"]["bootstrap"])
    _write_json(out / "qaoa_summary.json", summ)
    runner.update_manifest(out, "qaoa-bench", cfg, chash, [runner.QAOA_CSV, "qaoa_summary.json"],
                           tasks, {"elapsed_s": elapsed, "resumed_tasks": resumed})
    overall = summ["overall"]
    print(f"qaoa-bench: {len(tasks)} paired cells, W/T/L {overall['win_tie_loss']}, "
          f"mean delta {overall['mean_delta']:+.4f}")
    chk = summ.get("mis_directional_check")
    if chk is not None and chk["red_flag"]:
        print(f"qaoa-bench: RED FLAG: MIS mean delta {chk['mean_delta']:+.4f}, "
              f"90% CI [{chk['ci90'][0]:+.4f}, {chk['ci90'][1]:+.4f}] does not clear 0")
    return EXIT_OK


def cmd_qrao_bench(cfg, exhaustive=False) -> int:
    out = _out_dir(cfg)
    rows, tasks, chash, resumed, elapsed = runner.qrao_bench(cfg, out, cfg["workers"], exhaustive)
    summ = report_mod.qrao_report(report_mod.load_rows(out / runner.QRAO_CSV, runner.QRAO_COLUMNS))
    _write_json(out / "qrao_summary.json", summ)
    runner.update_manifest(out, "qrao-bench", cfg, chash, [runner.QRAO_CSV, "qrao_summary.json"],
                           tasks, {"elapsed_s": elapsed, "resumed_tasks": resumed})
    print(f"qrao-bench: {len(tasks)} cells, {len(rows)} records")
    return EXIT_OK if summ["checks"]["passed"] else EXIT_FAIL


def cmd_report(cfg, results_dir=None) -> int:
    rdir = Path(results_dir or cfg["out"])
    try:
        report_mod.build_report(rdir, cfg["seed"], cfg["qaoa"]["bootstrap"])
    except (report_mod.ResultSchemaError, report_mod.MixedConfigError, FileNotFoundError) as exc:
        print(f"report: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"report: wrote summaries to {rdir}")
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

def _common(p):
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--workers", type=int, help="process count for independent tasks")
    p.add_argument("--full", action="store_true", help="use the published-scale grids")
    p.add_argument("--exhaustive", action="store_true", help="add the exhaustive family oracle")
    p.add_argument("--out", help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(prog="mublab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("mub-verify", help="build and verify MUB systems")
    _common(p)
    p.add_argument("--dim", type=int, action="append", help="verify one dimension (repeatable)")
    p = sub.add_parser("width", help="Gaussian-width experiments")
    p.add_argument("sub", choices=WIDTH_SUBCOMMANDS)
    _common(p)
    p = sub.add_parser("qaoa-bench", help="standard vs adaptive MUB-XRot QAOA")
    _common(p)
    p = sub.add_parser("qrao-bench", help="QRAO family-search strategies")
    _common(p)
    p = sub.add_parser("report", help="recompute summaries from result CSVs")
    _common(p)
    p.add_argument("results", nargs="?", help="results directory (defaults to --out)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and args.seed < 0:
        print("--seed must be non-negative", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(args.config, args.full, seed=args.seed, workers=args.workers, out=args.out)
    except (ConfigError, OSError, TypeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.command == "mub-verify":
        return cmd_mub_verify(cfg, args.dim)
    if args.command == "width":
        return cmd_width(args.sub, cfg)
    if args.command == "qaoa-bench":
        return cmd_qaoa_bench(cfg)
    if args.command == "qrao-bench":
        return cmd_qrao_bench(cfg, args.exhaustive)
    return cmd_report(cfg, args.results)


if __name__ == "__main__":
    sys.exit(main())
