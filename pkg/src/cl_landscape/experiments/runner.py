"""Sweep execution: resumable JSONL records, CSV summaries and figures."""

from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .cells import PLANNERS, canonical_json, cell_key, run_cell
from .presets import preset_config

log = logging.getLogger(__name__)

SUMMARY_COLUMNS = [
    "law", "task", "decoder", "n_runs", "n_errors",
    "median_rsse", "q25_rsse", "q75_rsse", "median_loglik_ratio",
    "median_cost", "median_cost_truth", "success_rate", "failure_count",
]


def resolve_workers(workers: int | None = None) -> int:
    """``workers`` if given, else ``$CL_WORKERS``, else 1."""
    if workers is None:
        env = os.environ.get("CL_WORKERS")
        workers = int(env) if env else 1
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    return workers


def read_records(path) -> list[dict]:
    """Records of a JSONL file; a truncated final line is ignored."""
    path = Path(path)
    if not path.exists():
        return []
    records = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError:
                log.warning("%s:%d: skipping unreadable record", path, lineno)
    return records


def _execute(cells, workers):
    if workers == 1 or len(cells) <= 1:
        for cell in cells:
            yield run_cell(cell)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(run_cell, cells, chunksize=1)


def records_path(experiment: str, out=".") -> Path:
    """``out`` itself if it names a ``.jsonl`` file, else ``out/<experiment>.jsonl``."""
    out = Path(out)
    return out if out.suffix == ".jsonl" else out / f"{experiment}.jsonl"


def run_experiment(experiment: str, cfg: dict | None = None, seed: int = 0, out=".",
                   workers: int | None = None, progress=None) -> list[dict]:
    """Run (or resume) a sweep and return every record for it.

    Records are appended to :func:`records_path` as cells finish, in
    planning order. Cells whose key is already present are skipped, so an
    interrupted sweep picks up where it stopped.
    """
    if experiment not in PLANNERS:
        raise KeyError(f"unknown experiment {experiment!r}")
    cfg = cfg if cfg is not None else preset_config(experiment)
    workers = resolve_workers(workers)
    path = records_path(experiment, out)
    path.parent.mkdir(parents=True, exist_ok=True)

    cells = PLANNERS[experiment](cfg, seed)
    keys = [cell_key(c) for c in cells]
    done = {r["key"]: r for r in read_records(path) if r.get("key") in set(keys)}
    todo = [c for c, k in zip(cells, keys) if k not in done]
    log.info("%s: %d cells, %d already done", experiment, len(cells), len(cells) - len(todo))

    with path.open("a+b") as raw:
        # a killed run can leave a torn last line; start ours on a fresh one
        if raw.tell() > 0:
            raw.seek(-1, 2)
            if raw.read(1) != b"\n":
                raw.write(b"\n")
    with path.open("a") as fh:
        for i, record in enumerate(_execute(todo, workers), 1):
            fh.write(canonical_json(record) + "\n")
            fh.flush()
            done[record["key"]] = record
            if record["error"]:
                log.warning("cell %s failed: %s", record["key"], record["error"])
            if progress is not None:
                progress(i, len(todo))
    return [done[k] for k in keys]


def _q(values, q):
    return float(np.quantile(values, q)) if values else ""


def _summary_row(axis, axis_value, law, task, decoder, reports, n_errors=0):
    reports = [r for r in reports if r is not None and "error" not in r]
    rsse = [r["rsse"] for r in reports if r.get("rsse") is not None]
    ratio = [r["loglik_ratio"] for r in reports if r.get("loglik_ratio") is not None]
    costs = [r["cost_decoded"] for r in reports if r.get("cost_decoded") is not None]
    truth = [r["cost_ground_truth"] for r in reports if r.get("cost_ground_truth") is not None]
    flags = [r["kmeans_success"] if task == "kmeans" else r["gmm_success"] for r in reports]
    flags = [f for f in flags if f is not None]
    failures = [r["failure_detected"] for r in reports if r.get("failure_detected") is not None]
    return {
        "axis": axis,
        "axis_value": axis_value,
        "law": law,
        "task": task,
        "decoder": decoder,
        "n_runs": len(reports),
        "n_errors": n_errors,
        "median_rsse": _q(rsse, 0.5),
        "q25_rsse": _q(rsse, 0.25),
        "q75_rsse": _q(rsse, 0.75),
        "median_loglik_ratio": _q(ratio, 0.5),
        "median_cost": _q(costs, 0.5),
        "median_cost_truth": _q(truth, 0.5),
        "success_rate": float(np.mean(flags)) if flags else "",
        "failure_count": int(np.sum(failures)),
    }


def _group(records, coord):
    groups = {}
    for r in records:
        groups.setdefault(r["config"]["coords"][coord], []).append(r)
    return sorted(groups.items())


def summarize(experiment: str, records: list[dict]) -> list[dict]:
    """Aggregate records into one row per (axis value, law, task, decoder)."""
    rows = []
    if experiment == "fig2":
        for ratio, group in _group(records, "m_over_Kd"):
            ok = [r for r in group if r["metrics"]]
            trials = group[0]["config"]["trials"]
            rows.append(_summary_row("m_over_Kd", ratio, group[0]["config"]["law"], "kmeans",
                                     f"clomprx{trials}", [r["metrics"]["clomprx"] for r in ok],
                                     len(group) - len(ok)))
    elif experiment == "fig3":
        for ratio, group in _group(records, "m_over_Kd"):
            ok = [r for r in group if r["metrics"]]
            trials = group[0]["config"]["trials"]
            for name, label in (("clompr", "clompr"), ("clomprx", f"clomprx{trials}"),
                                ("geneticl", "geneticl"), ("truth", "truth")):
                rows.append(_summary_row("m_over_Kd", ratio, group[0]["config"]["law"], "kmeans", label,
                                         [r["metrics"][name] for r in ok], len(group) - len(ok)))
    elif experiment == "fig4":
        by_law = {}
        for r in records:
            by_law.setdefault(r["config"]["law"], []).append(r)
        for law in sorted(by_law):
            for log_sigma, group in _group(by_law[law], "log10_sigma"):
                ok = [r for r in group if r["metrics"]]
                trials = group[0]["config"]["trials"]
                for task in ("kmeans", "gmm"):
                    reports = [r["metrics"][task] for r in ok]
                    n_err = len(group) - len(ok) + sum("error" in rep for rep in reports)
                    rows.append(_summary_row("log10_sigma", log_sigma, law, task, f"clomprx{trials}",
                                             reports, n_err))
    else:
        raise KeyError(f"unknown experiment {experiment!r}")
    return rows


def write_summary(rows: list[dict], path) -> None:
    """One CSV row per summary row; the first column is named after the sweep axis."""
    axis = rows[0]["axis"] if rows else "axis"
    with Path(path).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=[axis] + SUMMARY_COLUMNS)
        writer.writeheader()
        for row in rows:
            out = {axis: row["axis_value"], **{k: row[k] for k in SUMMARY_COLUMNS}}
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in out.items()})


def report(experiment: str, records: list[dict], out=".", figures: bool = True) -> dict:
    """Write a summary CSV (and a PNG figure) next to the records file; return the paths."""
    stem = records_path(experiment, out).with_suffix("")
    rows = summarize(experiment, records)
    paths = {"summary": stem.with_name(stem.name + "_summary.csv")}
    write_summary(rows, paths["summary"])
    if figures:
        from .plots import PLOTTERS

        paths["figure"] = stem.with_suffix(".png")
        PLOTTERS[experiment](rows, paths["figure"])
    return paths
