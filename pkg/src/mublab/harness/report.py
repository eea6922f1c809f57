"""Summaries recomputed from result CSVs alone."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..numcore import SeededRng
from ..qaoa import SOLVED_TOL, bootstrap_mean_ci, paired_stats
from ..qrao import CSV_COLUMNS as QRAO_COLUMNS, MUB_STRATEGIES, gain_decomposition, \
    summarize as qrao_summarize
from .runner import QAOA_COLUMNS, QAOA_CSV, QRAO_CSV, read_csv, write_csv

CI_LEVEL = 0.90
DOMINANCE_TOL = 1e-12

_INT = {"instance_seed", "n", "p", "seed", "n_cost_evals", "final_family_r",
        "decoded_bitstring", "graph_seed", "family_evals", "chosen_r", "chosen_b0", "n_qubits"}
_FLOAT = {"decoded_ratio", "postselected_ratio", "energy", "runtime_s", "alpha_r", "alpha_c"}


class ResultSchemaError(ValueError):
    pass


class MixedConfigError(ValueError):
    pass


def _typed(row):
    out = {}
    for k, v in row.items():
        if k in _INT:
            out[k] = int(v) if v != "" else None
        elif k in _FLOAT:
            out[k] = float(v)
        else:
            out[k] = v
    return out


def load_rows(path, required) -> list:
    raw = read_csv(path)
    if raw:
        missing = [c for c in tuple(required) + ("config_hash",) if c not in raw[0]]
    else:
        header = Path(path).read_text().splitlines()[:1]
        cols = header[0].split(",") if header else []
        missing = [c for c in tuple(required) + ("config_hash",) if c not in cols]
    if missing:
        raise ResultSchemaError(f"{path}: missing columns {missing}")
    hashes = sorted({r["config_hash"] for r in raw})
    if len(hashes) > 1:
        raise MixedConfigError(f"{path}: rows from several configurations {hashes}")
    return [_typed(r) for r in raw]


# --------------------------------------------------------------------------
# QAOA
# --------------------------------------------------------------------------

def _split(rows):
    std = [r for r in rows if r["method"] == "standard"]
    adp = [r for r in rows if r["method"] == "adaptive_mub_xrot"]
    return std, adp


def _paired_dict(std, adp, rng, n_boot):
    pc = paired_stats(std, adp)
    d = pc.to_dict()
    lo, hi = bootstrap_mean_ci(pc.deltas, rng, n_boot, CI_LEVEL)
    d["mean_delta_ci90"] = [lo, hi]
    return d


def qaoa_summary(rows, seed=0, n_boot=10_000) -> dict:
    std, adp = _split(rows)
    rng = SeededRng(seed).derive("bootstrap")
    out = {
        "config_hash": rows[0]["config_hash"] if rows else None,
        "overall": _paired_dict(std, adp, rng.derive("all"), n_boot) if std else None,
        "by_family": {},
    }
    for fam in sorted({r["family"] for r in std}):
        s = [r for r in std if r["family"] == fam]
        a = [r for r in adp if r["family"] == fam]
        out["by_family"][fam] = _paired_dict(s, a, rng.derive(fam), n_boot)
    mis = out["by_family"].get("mis")
    if mis is not None:
        lo, _ = mis["mean_delta_ci90"]
        out["mis_directional_check"] = {
            "mean_delta": mis["mean_delta"],
            "ci90": mis["mean_delta_ci90"],
            "mean_delta_nonnegative": mis["mean_delta"] >= 0,
            # the directional claim is only "cleared" when the whole interval is above 0
            "red_flag": not lo > 0,
        }
    return out


def qaoa_facets(rows) -> list:
    cells = {}
    for r in rows:
        cells.setdefault((r["family"], r["n"], r["p"], r["method"]), []).append(r)
    out = []
    for (fam, n, p, method), rs in sorted(cells.items()):
        dec = np.array([r["decoded_ratio"] for r in rs])
        out.append({
            "family": fam, "n": n, "p": p, "method": method, "cells": len(rs),
            "mean_decoded_ratio": float(dec.mean()),
            "mean_postselected_ratio": float(np.mean([r["postselected_ratio"] for r in rs])),
            "solved_rate": float(np.mean(dec >= 1 - SOLVED_TOL)),
        })
    return out


# --------------------------------------------------------------------------
# QRAO
# --------------------------------------------------------------------------

def qrao_checks(rows) -> dict:
    """Per-cell oracle dominance and evaluation-count comparisons."""
    cells = {}
    for r in rows:
        cells.setdefault((r["graph_seed"], r["n"], r["p"]), {})[r["strategy"]] = r
    dom_viol, eval_viol = [], []
    checked = 0
    for key, by in sorted(cells.items()):
        ex = by.get("exhaustive_oracle")
        if ex is None:
            continue
        checked += 1
        for name, r in by.items():
            if name in MUB_STRATEGIES and r["alpha_r"] > ex["alpha_r"] + DOMINANCE_TOL:
                dom_viol.append({"cell": list(key), "strategy": name})
        bf = by.get("bitflip_2pole")
        if bf is not None and (ex.get("n_qubits") or 0) >= 3 and bf["family_evals"] > ex["family_evals"]:
            eval_viol.append(list(key))
    return {
        "cells_with_oracle": checked,
        "oracle_dominance_violations": dom_viol,
        "eval_count_violations": eval_viol,
        "passed": not dom_viol and not eval_viol,
    }


def qrao_report(rows) -> dict:
    return {
        "config_hash": rows[0]["config_hash"] if rows else None,
        "strategies": qrao_summarize(rows),
        "checks": qrao_checks(rows),
        "gain_decomposition": gain_decomposition(rows),
    }


def qrao_facets(rows) -> list:
    cells = {}
    for r in rows:
        cells.setdefault((r["n"], r["p"], r["strategy"]), []).append(r)
    return [{
        "n": n, "p": p, "strategy": s, "cells": len(rs),
        "mean_alpha_r": float(np.mean([r["alpha_r"] for r in rs])),
        "mean_alpha_c": float(np.mean([r["alpha_c"] for r in rs])),
        "mean_family_evals": float(np.mean([r["family_evals"] for r in rs])),
    } for (n, p, s), rs in sorted(cells.items())]


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def _table(title, header, body):
    lines = [f"## {title}", "", "| " + " | ".join(header) + " |",
             "|" + "---|" * len(header)]
    for row in body:
        lines.append("| " + " | ".join(_cell(v) for v in row) + " |")
    return "\n".join(lines) + "\n"


def _cell(v):
    if isinstance(v, float):
        return f"{v:.4f}"
    if isinstance(v, list):
        return "[" + ", ".join(_cell(x) for x in v) + "]"
    return str(v)


def build_report(results_dir, seed=0, n_boot=10_000) -> dict:
    """Write summary JSON, facet CSVs and a Markdown table file; return the summaries."""
    rdir = Path(results_dir)
    written = {}
    md = ["# Summary", ""]
    qaoa_path, qrao_path = rdir / QAOA_CSV, rdir / QRAO_CSV
    if not qaoa_path.exists() and not qrao_path.exists():
        raise FileNotFoundError(f"no result CSVs in {rdir}")
    if qaoa_path.exists():
        rows = load_rows(qaoa_path, QAOA_COLUMNS)
        summ = qaoa_summary(rows, seed, n_boot)
        (rdir / "qaoa_summary.json").write_text(json.dumps(summ, indent=2, sort_keys=True) + "\n")
        facets = qaoa_facets(rows)
        write_csv(rdir / "qaoa_facets.csv", list(facets[0]) if facets else [], facets)
        header = ["family", "cases", "W/T/L", "non-worse", "mean delta", "90% CI",
                  "solved std", "solved adp", "runtime ratio"]
        body = [[fam, d["paired_cases"], d["win_tie_loss"], d["non_worse_rate"], d["mean_delta"],
                 d["mean_delta_ci90"], d["solved_rate_standard"], d["solved_rate_adaptive"],
                 d["median_runtime_ratio"]]
                for fam, d in list(summ["by_family"].items()) + [("all", summ["overall"])] if d]
        md.append(_table("QAOA: adaptive MUB-XRot vs standard (decoded ratio)", header, body))
        chk = summ.get("mis_directional_check")
        if chk is not None:
            flag = "RED FLAG" if chk["red_flag"] else "cleared"
            md.append(f"MIS directional check: mean delta {chk['mean_delta']:.4f}, "
                      f"90% CI {_cell(chk['ci90'])}: {flag}\n")
        written["qaoa"] = summ
    if qrao_path.exists():
        rows = load_rows(qrao_path, QRAO_COLUMNS)
        summ = qrao_report(rows)
        (rdir / "qrao_summary.json").write_text(json.dumps(summ, indent=2, sort_keys=True) + "\n")
        facets = qrao_facets(rows)
        write_csv(rdir / "qrao_facets.csv", list(facets[0]) if facets else [], facets)
        header = ["strategy", "cells", "mean alpha_r", "mean delta vs X", "W/T/L",
                  "solved rate", "family evals"]
        body = []
        for name, e in summ["strategies"].items():
            wtl = f"{e['wins']}/{e['ties']}/{e['losses']}" if "wins" in e else "-"
            body.append([name, e["cells"], e["mean_alpha_r"], e.get("mean_delta_alpha_r_vs_x", "-"),
                         wtl, e["solved_rate"], e.get("mean_family_evals", "-")])
        md.append(_table("QRAO strategies", header, body))
        gd = summ["gain_decomposition"]
        if gd is not None:
            md.append(f"Gain over X: prescreen {gd['prescreen']:+.4f}, poles {gd['poles']:+.4f}, "
                      f"local search {gd['local_search']:+.4f}, total {gd['total']:+.4f}\n")
        written["qrao"] = summ
    (rdir / "summary_tables.md").write_text("\n".join(md))
    return written
