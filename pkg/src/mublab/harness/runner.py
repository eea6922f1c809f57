"""Task execution, resumable partial results and deterministic CSV output."""
from __future__ import annotations

import csv
import io
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from functools import partial
from pathlib import Path

from .. import _accel
from ..problems import encode, gen_er_graph, gen_instance
from ..qaoa import QaoaConfig, run_adaptive_mub_xrot, run_standard
from ..qrao import BENCH_STRATEGIES, CSV_COLUMNS as QRAO_COLUMNS, QraoConfig, build_relaxed, run_strategy
from .config import ARTIFACT_VERSION, config_hash, task_seed

QAOA_COLUMNS = ("family", "instance_seed", "n", "p", "method", "decoded_ratio",
                "postselected_ratio", "energy", "runtime_s", "n_cost_evals",
                "final_family_r", "seed", "decoded_bitstring")
QAOA_CSV = "qaoa_results.csv"
QRAO_CSV = "qrao_results.csv"
MANIFEST = "manifest.json"
TIMING_COLUMNS = ("runtime_s",)


# --------------------------------------------------------------------------
# formatting
# --------------------------------------------------------------------------

def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_value(row.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(path, columns, rows):
    Path(path).write_text(csv_text(columns, rows))


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def csv_body(path, mask=TIMING_COLUMNS) -> str:
    """CSV text with wall-clock columns blanked, for determinism checks."""
    rows = read_csv(path)
    if not rows:
        return Path(path).read_text()
    cols = list(rows[0])
    for r in rows:
        for c in mask:
            if c in r:
                r[c] = ""
    return csv_text(cols, rows)


# --------------------------------------------------------------------------
# parallel map with resumable partial files
# --------------------------------------------------------------------------

def parallel_map(fn, items, workers=1):
    """Order-preserving map; processes only when ``workers > 1``."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=1))


class PartialStore:
    """One JSON file per finished task under ``<out>/partial/<kind>/``."""

    def __init__(self, out_dir, kind, chash):
        self.dir = Path(out_dir) / "partial" / kind
        self.dir.mkdir(parents=True, exist_ok=True)
        self.chash = chash

    def _path(self, task_id):
        return self.dir / f"{task_id}.json"

    def load(self, task):
        path = self._path(task["id"])
        if not path.exists():
            return None
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError:
            return None  # torn write from an interrupted run
        # the task itself is compared too: strategy lists are not part of the config
        if data.get("config_hash") != self.chash or data.get("task") != task:
            return None
        return data["rows"]

    def save(self, task, rows):
        tmp = self._path(task["id"]).with_suffix(".tmp")
        tmp.write_text(json.dumps({"config_hash": self.chash, "task": task, "rows": rows}))
        os.replace(tmp, self._path(task["id"]))


def run_resumable(tasks, fn, store: PartialStore, workers=1):
    """Run ``fn`` on tasks lacking a saved result; returns rows in task order."""
    done = {t["id"]: store.load(t) for t in tasks}
    todo = [t for t in tasks if done[t["id"]] is None]
    if todo:
        if workers <= 1:
            for t in todo:
                done[t["id"]] = fn(t)
                store.save(t, done[t["id"]])
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = {t["id"]: pool.submit(fn, t) for t in todo}
                for t in todo:
                    done[t["id"]] = futures[t["id"]].result()
                    store.save(t, done[t["id"]])
    rows = []
    for t in tasks:
        rows.extend(done[t["id"]])
    return rows, len(tasks) - len(todo)


# --------------------------------------------------------------------------
# task definitions
# --------------------------------------------------------------------------

def qaoa_tasks(cfg) -> list:
    q = cfg["qaoa"]
    tasks = []
    for fam in q["families"]:
        for n in q["sizes"]:
            for p in q["depths"]:
                for s in range(q["seed_start"], q["seed_start"] + q["n_seeds"]):
                    tasks.append({
                        "id": f"{fam}-n{n}-p{p}-s{s}", "family": fam, "n": n, "p": p,
                        "instance_seed": s, "seed": task_seed(cfg["seed"], "qaoa", fam, n, p, s),
                        "edge_prob": q["edge_prob"], "method": q["method"],
                    })
    return tasks


def _qaoa_row(rec, chash):
    row = {c: getattr(rec, c) for c in QAOA_COLUMNS}
    row["config_hash"] = chash
    return row


def run_qaoa_task(task, chash="") -> list:
    mcfg = QaoaConfig.from_dict(task["method"])
    enc = encode(gen_instance(task["family"], task["n"], task["instance_seed"], task["edge_prob"]))
    std = run_standard(enc, task["p"], task["seed"], mcfg)
    adp = run_adaptive_mub_xrot(enc, task["p"], task["seed"], mcfg)
    return [_qaoa_row(std, chash), _qaoa_row(adp, chash)]


def qrao_tasks(cfg, exhaustive=False) -> list:
    q = cfg["qrao"]
    strategies = BENCH_STRATEGIES + (("exhaustive_oracle",) if exhaustive or q["exhaustive"] else ())
    tasks = []
    for n in q["sizes"]:
        for p in q["depths"]:
            for s in range(q["seed_start"], q["seed_start"] + q["n_seeds"]):
                tasks.append({
                    "id": f"n{n}-p{p}-s{s}", "n": n, "p": p, "graph_seed": s,
                    "seed": task_seed(cfg["seed"], "qrao", n, p, s),
                    "edge_prob": q["edge_prob"], "strategies": list(strategies),
                    "method": q["method"],
                })
    return tasks


def run_qrao_task(task, chash="") -> list:
    mcfg = QraoConfig.from_dict(task["method"])
    graph = gen_er_graph(task["n"], task["edge_prob"], task["graph_seed"])
    relaxed = build_relaxed(graph)
    rows = []
    for name in task["strategies"]:
        rec = run_strategy(relaxed, name, task["p"], task["seed"], mcfg)
        row = rec.row()
        row["n_qubits"] = rec.n_qubits
        row["config_hash"] = chash
        rows.append(row)
    return rows


def qaoa_bench(cfg, out_dir, workers=1):
    chash = config_hash(cfg, "qaoa")
    tasks = qaoa_tasks(cfg)
    store = PartialStore(out_dir, "qaoa", chash)
    t0 = time.perf_counter()
    rows, resumed = run_resumable(tasks, partial(run_qaoa_task, chash=chash), store, workers)
    write_csv(Path(out_dir) / QAOA_CSV, QAOA_COLUMNS + ("config_hash",), rows)
    return rows, tasks, chash, resumed, time.perf_counter() - t0


def qrao_bench(cfg, out_dir, workers=1, exhaustive=False):
    chash = config_hash(cfg, "qrao")
    if exhaustive and not cfg["qrao"]["exhaustive"]:
        chash = config_hash({**cfg, "qrao": {**cfg["qrao"], "exhaustive": True}}, "qrao")
    tasks = qrao_tasks(cfg, exhaustive)
    store = PartialStore(out_dir, "qrao", chash)
    t0 = time.perf_counter()
    rows, resumed = run_resumable(tasks, partial(run_qrao_task, chash=chash), store, workers)
    cols = QRAO_COLUMNS + ("n_qubits", "config_hash")
    write_csv(Path(out_dir) / QRAO_CSV, cols, rows)
    return rows, tasks, chash, resumed, time.perf_counter() - t0


# --------------------------------------------------------------------------
# manifest
# --------------------------------------------------------------------------

def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def update_manifest(out_dir, command, cfg, chash, outputs, tasks=None, extra=None):
    """Merge one command's entry into ``manifest.json``."""
    path = Path(out_dir) / MANIFEST
    doc = json.loads(path.read_text()) if path.exists() else {"runs": {}}
    doc.update({"artifact_version": ARTIFACT_VERSION, "backend": _accel.backend_name()})
    entry = {
        "config_hash": chash,
        "master_seed": cfg["seed"],
        "workers": cfg["workers"],
        "finished": _now(),
        "outputs": sorted(outputs),
        "config": cfg,
    }
    if tasks is not None:
        entry["task_seeds"] = {t["id"]: t["seed"] for t in tasks}
    entry.update(extra or {})
    doc["runs"][command] = entry
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return doc
