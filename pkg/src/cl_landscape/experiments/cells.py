"""Planning and execution of individual sweep cells.

A cell config is a plain, JSON-serializable dict that fully determines its
record: data generator, frequency law and scale, sketch size, and every
seed. :func:`run_cell` turns one into a record; re-running a record's
config reproduces its metrics bit for bit.
"""

from __future__ import annotations

import hashlib
import json
from functools import lru_cache

import numpy as np

from .._rng import derive_seed
from ..data import GeneratorConfig, generate_gmm_data
from ..decoders import DecodeOptions, GeneticOptions, clompr_multi, geneticl
from ..errors import CLError
from ..model import ModelKind
from ..sketch import Sketch, cost, draw_frequencies, empirical_sketch, scale_heuristic
from ..tasks import EvaluationReport, dirac_truth, gmm_loglik, lloyd_kmeans, relative_sse

_DATA_KEYS = ("K", "d", "n", "separation", "within_std", "weight_mode")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def cell_key(config: dict) -> str:
    """Stable identity of a cell: experiment, coordinates and a config digest."""
    digest = hashlib.sha256(canonical_json(config).encode()).hexdigest()[:16]
    coords = "/".join(f"{k}={config['coords'][k]}" for k in sorted(config["coords"]))
    return f"{config['experiment']}/{coords}/{digest}"


def _data_config(cfg: dict, seed: int) -> dict:
    out = {k: cfg[k] for k in _DATA_KEYS}
    out["seed"] = int(seed)
    return out


def _decode_block(cfg: dict) -> dict:
    return {"max_inner_iterations": int(cfg["max_inner_iterations"]),
            "polish_iterations": int(cfg["polish_iterations"])}


# Per-process caches: cells in one sweep share datasets and baselines.

@lru_cache(maxsize=8)
def _dataset(data_json: str):
    return generate_gmm_data(GeneratorConfig.from_dict(json.loads(data_json)))


@lru_cache(maxsize=8)
def _baseline_sse(data_json: str, restarts: int, seed: int) -> float:
    X, _ = _dataset(data_json)
    return lloyd_kmeans(X, json.loads(data_json)["K"], restarts=restarts, seed=seed).sse


@lru_cache(maxsize=4)
def _master_sketch(data_json: str, m: int, law: str, sigma: float, seed: int):
    X, _ = _dataset(data_json)
    freqs = draw_frequencies(m, X.d, law, sigma, seed)
    return freqs, empirical_sketch(X, freqs)


def reference_scale(data_cfg: dict, subsample: int, seed: int) -> float:
    X, _ = _dataset(canonical_json(data_cfg))
    return scale_heuristic(X, subsample_size=subsample, seed=seed)


def _sigma(cfg: dict, data_cfg: dict, master: int) -> tuple[float, float]:
    sigma_hat = reference_scale(data_cfg, cfg["heuristic_subsample"], derive_seed(master, "scale"))
    sigma = cfg.get("sigma")
    if sigma is None:
        sigma = sigma_hat * float(cfg["sigma_factor"])
    return float(sigma), float(sigma_hat)


def sketch_size(ratio: float, K: int, d: int) -> int:
    return max(1, int(round(ratio * K * d)))


def plan_fig2(cfg: dict, seed: int) -> list[dict]:
    """One cell per (sketch-size ratio, frequency draw) on a fixed dataset."""
    K, d = cfg["K"], cfg["d"]
    data_cfg = _data_config(cfg, derive_seed(seed, "data"))
    sigma, sigma_hat = _sigma(cfg, data_cfg, seed)
    cells = []
    for i, ratio in enumerate(cfg["ratios"]):
        for draw in range(cfg["draws"]):
            cells.append({
                "experiment": "fig2",
                "coords": {"m_over_Kd": float(ratio), "draw": draw},
                "data": data_cfg,
                "m": sketch_size(ratio, K, d),
                "law": cfg["law"],
                "sigma": sigma,
                "sigma_hat": sigma_hat,
                "omega_seed": derive_seed(seed, "omega", i, draw),
                "decoder_seed": derive_seed(seed, "decoder", i, draw),
                "trials": int(cfg["trials"]),
                "lloyd": {"restarts": int(cfg["lloyd_restarts"]), "seed": derive_seed(seed, "lloyd")},
                "decode": _decode_block(cfg),
            })
    return cells


def plan_fig3(cfg: dict, seed: int) -> list[dict]:
    """One cell per (sketch-size ratio, seed); all sizes are prefixes of one master frequency set."""
    K, d = cfg["K"], cfg["d"]
    data_cfg = _data_config(cfg, derive_seed(seed, "data"))
    sigma, sigma_hat = _sigma(cfg, data_cfg, seed)
    m_max = max(sketch_size(r, K, d) for r in cfg["ratios"])
    cells = []
    for ratio in cfg["ratios"]:
        for s in range(cfg["seeds"]):
            cells.append({
                "experiment": "fig3",
                "coords": {"m_over_Kd": float(ratio), "seed": s},
                "data": data_cfg,
                "m": sketch_size(ratio, K, d),
                "m_master": m_max,
                "law": cfg["law"],
                "sigma": sigma,
                "sigma_hat": sigma_hat,
                "omega_seed": derive_seed(seed, "omega"),
                "decoder_seed": derive_seed(seed, "decoder", s),
                "trials": int(cfg["trials"]),
                "genetic": dict(cfg["genetic"]),
                "lloyd": {"restarts": int(cfg["lloyd_restarts"]), "seed": derive_seed(seed, "lloyd")},
                "decode": _decode_block(cfg),
            })
    return cells


def fig4_grid(cfg: dict, seed: int) -> tuple[np.ndarray, float]:
    """Absolute ``log10(sigma)`` grid centred on the reference dataset's scale."""
    ref = _data_config(cfg, derive_seed(seed, "data", 0))
    sigma_hat = reference_scale(ref, cfg["heuristic_subsample"], derive_seed(seed, "scale"))
    off = cfg["log10_offsets"]
    offsets = np.linspace(off["start"], off["stop"], int(off["num"]))
    return np.log10(sigma_hat) + offsets, sigma_hat


def plan_fig4(cfg: dict, seed: int) -> list[dict]:
    """One cell per (law, frequency scale, seed); every seed draws fresh data."""
    K, d = cfg["K"], cfg["d"]
    grid, sigma_hat = fig4_grid(cfg, seed)
    m = sketch_size(cfg["m_per_Kd"], K, d)
    cells = []
    for law in cfg["laws"]:
        for j, log_sigma in enumerate(grid):
            log_sigma = round(float(log_sigma), 12)
            for s in range(cfg["seeds"]):
                cells.append({
                    "experiment": "fig4",
                    "coords": {"law": law, "log10_sigma": log_sigma, "seed": s},
                    "data": _data_config(cfg, derive_seed(seed, "data", s)),
                    "m": m,
                    "law": law,
                    "sigma": 10.0 ** log_sigma,
                    "sigma_hat": sigma_hat,
                    "omega_seed": derive_seed(seed, "omega", law, j, s),
                    "decoder_seed": derive_seed(seed, "decoder", law, j, s),
                    "trials": int(cfg["trials"]),
                    "lloyd": {"restarts": int(cfg["lloyd_restarts"]), "seed": derive_seed(seed, "lloyd", s)},
                    "decode": _decode_block(cfg),
                })
    return cells


PLANNERS = {"fig2": plan_fig2, "fig3": plan_fig3, "fig4": plan_fig4}


def _options(X, K, kind, config, seed, trials):
    return DecodeOptions.from_data(X, K, kind, seed=seed, trials=trials, **config["decode"])


def _setup(config):
    data_json = canonical_json(config["data"])
    X, truth = _dataset(data_json)
    baseline = _baseline_sse(data_json, config["lloyd"]["restarts"], config["lloyd"]["seed"])
    return X, truth, baseline


def _run_fig2(config):
    X, truth, baseline = _setup(config)
    freqs = draw_frequencies(config["m"], X.d, config["law"], config["sigma"], config["omega_seed"])
    z = empirical_sketch(X, freqs)
    opts = _options(X, truth.K, ModelKind.DIRAC, config, config["decoder_seed"], config["trials"])
    res = clompr_multi(z, freqs, opts)
    c_true = cost(dirac_truth(truth), z, freqs)
    report = EvaluationReport.build(relative_sse(X, res.theta.centers, baseline), None, res.final_cost, c_true)
    return {"clomprx": report.to_dict(), "trial_costs": res.extra["trial_costs"]}


def _run_fig3(config):
    X, truth, baseline = _setup(config)
    freqs_all, z_all = _master_sketch(canonical_json(config["data"]), config["m_master"], config["law"],
                                      config["sigma"], config["omega_seed"])
    m = config["m"]
    freqs = freqs_all.prefix(m)
    z = Sketch(z_all.values[:m].copy(), z_all.n, freqs.fingerprint)
    truth_d = dirac_truth(truth)
    c_true = cost(truth_d, z, freqs)

    opts = _options(X, truth.K, ModelKind.DIRAC, config, config["decoder_seed"], config["trials"])
    multi = clompr_multi(z, freqs, opts)
    single_cost = multi.extra["trial_costs"][0]
    gopts = GeneticOptions(**config["genetic"], seed=derive_seed(config["decoder_seed"], "geneticl"))
    gen = geneticl(z, freqs, opts, gopts)

    out = {
        "clomprx": EvaluationReport.build(relative_sse(X, multi.theta.centers, baseline), None,
                                          multi.final_cost, c_true).to_dict(),
        "geneticl": EvaluationReport.build(relative_sse(X, gen.theta.centers, baseline), None,
                                           gen.final_cost, c_true).to_dict(),
        "truth": EvaluationReport.build(relative_sse(X, truth_d.centers, baseline), None,
                                        c_true, c_true).to_dict(),
        "trial_costs": multi.extra["trial_costs"],
    }
    # single CLOMPR is trial 0 of the multi-start run
    out["clompr"] = EvaluationReport.build(None, None, single_cost, c_true).to_dict() \
        if single_cost is not None else None
    return out


def _run_fig4(config):
    X, truth, baseline = _setup(config)
    freqs = draw_frequencies(config["m"], X.d, config["law"], config["sigma"], config["omega_seed"])
    z = empirical_sketch(X, freqs)
    out = {}
    opts = _options(X, truth.K, ModelKind.DIRAC, config, derive_seed(config["decoder_seed"], "kmeans"),
                    config["trials"])
    try:
        res = clompr_multi(z, freqs, opts)
        out["kmeans"] = EvaluationReport.build(relative_sse(X, res.theta.centers, baseline), None,
                                               res.final_cost, cost(dirac_truth(truth), z, freqs)).to_dict()
    except CLError as exc:
        out["kmeans"] = {"error": f"{type(exc).__name__}: {exc}"}
    opts = _options(X, truth.K, ModelKind.GAUSSIAN, config, derive_seed(config["decoder_seed"], "gmm"),
                    config["trials"])
    try:
        res = clompr_multi(z, freqs, opts)
        ratio = float(np.exp((gmm_loglik(X, res.theta) - gmm_loglik(X, truth)) / X.n))
        out["gmm"] = EvaluationReport.build(None, ratio, res.final_cost, cost(truth, z, freqs)).to_dict()
    except CLError as exc:
        out["gmm"] = {"error": f"{type(exc).__name__}: {exc}"}
    return out


RUNNERS = {"fig2": _run_fig2, "fig3": _run_fig3, "fig4": _run_fig4}


def run_cell(config: dict) -> dict:
    """Execute one cell. Errors are recorded in the result, never raised."""
    record = {"key": cell_key(config), "config": config}
    try:
        record["metrics"] = RUNNERS[config["experiment"]](config)
        record["error"] = None
    except Exception as exc:  # a bad cell must not abort the sweep
        record["metrics"] = None
        record["error"] = f"{type(exc).__name__}: {exc}"
    return record


def rerun_record(record: dict) -> dict:
    """Re-execute the cell that produced ``record``."""
    return run_cell(record["config"])


def baseline_sse_for(data_cfg: dict, restarts: int, seed: int) -> float:
    return _baseline_sse(canonical_json(data_cfg), restarts, seed)


def dataset_for(data_cfg: dict):
    return _dataset(canonical_json(data_cfg))


__all__ = ["PLANNERS", "canonical_json", "cell_key", "plan_fig2", "plan_fig3", "plan_fig4",
           "rerun_record", "run_cell", "sketch_size", "fig4_grid"]
