"""Command-line interface: ``cl-landscape <command> ...``.

Commands: ``gen``, ``sketch``, ``decode``, ``eval``, ``experiment
{fig2,fig3,fig4}`` and ``selfcheck``. Every command accepts ``--seed``,
``--out`` and ``--config FILE.json``; explicit flags win over config keys.
Exit status is 0 on success, 2 on invalid input and 1 on runtime errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import DatasetIOError, DecodeError, ParameterError

log = logging.getLogger("cl_landscape")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

DEFAULTS = {
    "gen": {"K": 10, "d": 10, "n": 50_000, "separation": 3.0, "within_std": 1.0,
            "weight_mode": "uniform", "seed": 0, "out": "data.clds", "truth_out": None},
    "sketch": {"data": None, "m": None, "law": "fg", "sigma": None, "sigma_factor": 1.0,
               "seed": 0, "out": None},
    "decode": {"sketch": None, "model": "dirac", "K": None, "decoder": "clompr", "box": None,
               "trials": None, "max_inner_iterations": 300, "polish_iterations": 3000,
               "genetic": None, "seed": 0, "out": None},
    "eval": {"data": None, "model": None, "truth": None, "sketch": None, "lloyd_restarts": 10,
             "seed": 0, "out": None},
    "experiment": {"preset": "desk", "seed": 0, "out": None, "workers": None, "figures": True,
                   "set": None},
    "selfcheck": {"seed": 0, "out": None, "repetitions": 20},
}


class UsageError(Exception):
    pass


def _common(p):
    p.add_argument("--seed", type=int, default=None, help="master seed")
    p.add_argument("--out", default=None, help="output path (stdout if omitted where allowed)")
    p.add_argument("--config", default=None, help="JSON file whose keys fill unset flags")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cl-landscape", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="sample a synthetic Gaussian-mixture dataset")
    _common(p)
    p.add_argument("--K", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--separation", type=float)
    p.add_argument("--within-std", dest="within_std", type=float)
    p.add_argument("--weight-mode", dest="weight_mode", choices=["uniform", "dirichlet"])
    p.add_argument("--truth-out", dest="truth_out", help="where to write the generating model JSON")

    p = sub.add_parser("sketch", help="sketch a dataset file")
    _common(p)
    p.add_argument("--data", help="dataset (.clds binary or .csv)")
    p.add_argument("--m", type=int, help="number of frequencies")
    p.add_argument("--law", choices=["fg", "ar"])
    p.add_argument("--sigma", type=float, help="frequency scale (default: heuristic * --sigma-factor)")
    p.add_argument("--sigma-factor", dest="sigma_factor", type=float)

    p = sub.add_parser("decode", help="decode a mixture from a sketch JSON")
    _common(p)
    p.add_argument("--sketch")
    p.add_argument("--model", choices=["dirac", "gaussian"])
    p.add_argument("--K", type=int)
    p.add_argument("--decoder", help="clompr, clomprx<T> or geneticl")
    p.add_argument("--box", help="search box as 'lo,hi' (every coordinate) or a JSON [[lo...],[hi...]]")
    p.add_argument("--trials", type=int)
    p.add_argument("--max-inner-iterations", dest="max_inner_iterations", type=int)
    p.add_argument("--polish-iterations", dest="polish_iterations", type=int)

    p = sub.add_parser("eval", help="evaluate a decoded model on a dataset")
    _common(p)
    p.add_argument("--data")
    p.add_argument("--model", help="decoded model or DecodeResult JSON")
    p.add_argument("--truth", help="ground-truth model JSON (enables likelihood ratio and failure check)")
    p.add_argument("--sketch", help="sketch JSON (enables the failure check)")
    p.add_argument("--lloyd-restarts", dest="lloyd_restarts", type=int)

    p = sub.add_parser("experiment", help="run a landscape sweep")
    _common(p)
    p.add_argument("name", choices=["fig2", "fig3", "fig4"])
    p.add_argument("--preset", choices=["desk", "paper"])
    p.add_argument("--workers", type=int, help="worker processes (default $CL_WORKERS or 1)")
    p.add_argument("--no-figures", dest="figures", action="store_false", default=None)
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override one sweep knob; VALUE is parsed as JSON when possible")

    p = sub.add_parser("selfcheck", help="run the quick invariant suite")
    _common(p)
    p.add_argument("--repetitions", type=int)
    return parser


def _resolve(args) -> dict:
    """Flags > config file > defaults."""
    opts = dict(DEFAULTS[args.command])
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise UsageError("config must be a JSON object")
        opts.update(cfg)
    for key, value in vars(args).items():
        if value is not None and key not in ("command", "config", "verbose"):
            opts[key] = value
    return opts


def _require(opts, *keys):
    missing = [k for k in keys if opts.get(k) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _emit(obj, out):
    text = json.dumps(obj, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _parse_box(spec, d):
    if isinstance(spec, str):
        spec = spec.strip()
        if spec.startswith("["):
            spec = json.loads(spec)
        else:
            try:
                lo, hi = (float(v) for v in spec.split(","))
            except ValueError:
                raise UsageError(f"bad --box {spec!r}; expected 'lo,hi' or JSON") from None
            return np.full(d, lo), np.full(d, hi)
    lo, hi = (np.broadcast_to(np.asarray(v, dtype=np.float64), (d,)).copy() for v in spec)
    return lo, hi


def cmd_gen(opts):
    from .data import GeneratorConfig, generate_gmm_data
    from .io import write_csv, write_dataset, write_model

    cfg = GeneratorConfig(K=opts["K"], d=opts["d"], n=opts["n"], separation=opts["separation"],
                          within_std=opts["within_std"], weight_mode=opts["weight_mode"], seed=opts["seed"])
    X, truth = generate_gmm_data(cfg)
    out = Path(opts["out"])
    (write_csv if out.suffix.lower() == ".csv" else write_dataset)(X, out)
    truth_out = opts["truth_out"] or str(out.with_suffix(".truth.json"))
    write_model(truth, truth_out)
    config_out = out.with_suffix(".config.json")
    config_out.write_text(cfg.to_json() + "\n")
    if "warning" in X.metadata:
        log.warning(X.metadata["warning"])
    print(json.dumps({"data": str(out), "truth": truth_out, "config": str(config_out), "n": X.n, "d": X.d}))


def cmd_sketch(opts):
    from .io import read_dataset, write_sketch
    from .sketch import draw_frequencies, empirical_sketch, scale_heuristic

    _require(opts, "data", "m")
    X = read_dataset(opts["data"])
    sigma = opts["sigma"]
    if sigma is None:
        sigma = scale_heuristic(X, seed=opts["seed"]) * opts["sigma_factor"]
    freqs = draw_frequencies(opts["m"], X.d, opts["law"], sigma, opts["seed"])
    z = empirical_sketch(X, freqs)
    lo, hi = X.bounds()
    if opts["out"]:
        write_sketch(z, freqs, opts["out"], box=(lo, hi))
    else:
        from .io import sketch_to_dict

        print(json.dumps(sketch_to_dict(z, freqs, box=(lo, hi))))


def cmd_decode(opts):
    from .decoders import DecodeOptions, GeneticOptions, decode
    from .io import read_sketch

    _require(opts, "sketch", "K")
    z, freqs, box = read_sketch(opts["sketch"])
    if opts["box"] is not None:
        box = _parse_box(opts["box"], freqs.d)
    if box is None:
        raise UsageError("no search box: pass --box or use a sketch file that stores one")
    name = opts["decoder"].lower()
    trials = opts["trials"]
    if trials is not None and name.startswith("clompr"):
        name = f"clomprx{trials}"
    dopts = DecodeOptions(K=opts["K"], model_kind=opts["model"], box_lower=box[0], box_upper=box[1],
                          max_inner_iterations=opts["max_inner_iterations"],
                          polish_iterations=opts["polish_iterations"], seed=opts["seed"])
    gopts = GeneticOptions(**opts["genetic"]) if opts["genetic"] else None
    result = decode(name, z, freqs, dopts, gopts)
    _emit(result.to_dict(), opts["out"])


def _load_model(path):
    from .model import MixtureModel

    try:
        return MixtureModel.from_dict(json.loads(Path(path).read_text()))
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise DatasetIOError(f"{path}: cannot read model: {exc}") from exc


def cmd_eval(opts):
    from .io import read_dataset, read_sketch
    from .tasks import evaluate, lloyd_kmeans

    _require(opts, "data", "model")
    X = read_dataset(opts["data"])
    theta = _load_model(opts["model"])
    truth = _load_model(opts["truth"]) if opts["truth"] else None
    z = freqs = None
    if opts["sketch"]:
        z, freqs, _ = read_sketch(opts["sketch"])
    baseline = lloyd_kmeans(X, theta.K, restarts=opts["lloyd_restarts"], seed=opts["seed"]).sse
    report = evaluate(X, theta, baseline_sse=baseline, truth=truth, z=z, freqs=freqs)
    _emit({**report.to_dict(), "baseline_sse": baseline}, opts["out"])


def _parse_set(items):
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def cmd_experiment(opts):
    from .experiments import preset_config, records_path, report, run_experiment

    name = opts["name"]
    overrides = {k: v for k, v in opts.items() if k not in DEFAULTS["experiment"] and k != "name"}
    overrides.update(_parse_set(opts["set"]))
    try:
        cfg = preset_config(name, opts["preset"], overrides)
    except KeyError as exc:
        raise UsageError(str(exc)) from exc
    out = opts["out"] or f"{name}.jsonl"

    def progress(i, total):
        log.info("%s: %d/%d cells", name, i, total)

    records = run_experiment(name, cfg, seed=opts["seed"], out=out, workers=opts["workers"], progress=progress)
    paths = report(name, records, out, figures=opts["figures"])
    n_err = sum(1 for r in records if r["error"])
    print(json.dumps({"records": str(records_path(name, out)), "cells": len(records), "errors": n_err,
                      **{k: str(v) for k, v in paths.items()}}))
    if n_err:
        log.warning("%d cell(s) recorded errors", n_err)


def cmd_selfcheck(opts):
    from .selfcheck import run_selfcheck

    results = run_selfcheck(seed=opts["seed"], repetitions=opts["repetitions"])
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    if opts["out"]:
        _emit([{"check": n, "ok": ok, "detail": d} for n, ok, d in results], opts["out"])
    if not all(ok for _, ok, _ in results):
        raise DecodeError("selfcheck found invariant violations")


COMMANDS = {"gen": cmd_gen, "sketch": cmd_sketch, "decode": cmd_decode, "eval": cmd_eval,
            "experiment": cmd_experiment, "selfcheck": cmd_selfcheck}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        opts = _resolve(args)
        COMMANDS[args.command](opts)
    except (UsageError, ParameterError, DatasetIOError, FileNotFoundError, ValueError, TypeError) as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        print(f"{parser.prog} {args.command}: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
