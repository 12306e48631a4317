"""Default knobs for the three landscape experiments.

``desk`` presets are sized to finish in minutes on one core; ``paper``
presets use the sizes of the published figures. Any knob can be overridden
from a JSON config or the command line.
"""

from copy import deepcopy

COMMON = {
    "separation": 3.0,
    "within_std": 1.0,
    "weight_mode": "uniform",
    "lloyd_restarts": 10,
    "heuristic_subsample": 1000,
    "max_inner_iterations": 300,
    "polish_iterations": 3000,
}

FIG2 = {
    "desk": {"K": 5, "d": 5, "n": 10_000, "draws": 10, "ratios": [0.5, 1, 2, 5, 10, 30]},
    "paper": {"K": 10, "d": 10, "n": 50_000, "draws": 50, "ratios": [0.5, 1, 2, 3, 5, 10, 20, 30]},
}
FIG2_DEFAULTS = {"law": "ar", "sigma_factor": 0.5, "sigma": None, "trials": 10}

FIG3 = {
    "desk": {"K": 5, "d": 3, "n": 10_000, "seeds": 20, "ratios": [0.5, 1, 1.5, 2, 3, 5, 10]},
    "paper": {"K": 10, "d": 5, "n": 100_000, "seeds": 20, "ratios": [0.5, 1, 1.5, 2, 3, 5, 10]},
}
FIG3_DEFAULTS = {
    "law": "ar",
    "sigma_factor": 0.5,
    "sigma": None,
    "trials": 10,
    "genetic": {
        # four islands of 50: the same evaluation budget as one population
        # of 200, but far less likely to settle in a single wrong basin
        "population_size": 50,
        "islands": 4,
        "generations": 500,
        "gamma": 4.0,
        "mutation_scale": 0.05,
        "crossover_rate": 0.5,
        "elitism_count": 2,
    },
}

FIG4 = {
    "desk": {"K": 4, "d": 3, "n": 10_000, "seeds": 20, "log10_offsets": {"start": -3.0, "stop": 3.0, "num": 15}},
    "paper": {"K": 6, "d": 5, "n": 100_000, "seeds": 50, "log10_offsets": {"start": -3.0, "stop": 3.0, "num": 25}},
}
FIG4_DEFAULTS = {"laws": ["fg", "ar"], "m_per_Kd": 20, "trials": 3}

PRESETS = {"fig2": (FIG2, FIG2_DEFAULTS), "fig3": (FIG3, FIG3_DEFAULTS), "fig4": (FIG4, FIG4_DEFAULTS)}


def preset_config(experiment: str, preset: str = "desk", overrides: dict | None = None) -> dict:
    try:
        sizes, defaults = PRESETS[experiment]
    except KeyError:
        raise KeyError(f"unknown experiment {experiment!r}") from None
    if preset not in sizes:
        raise KeyError(f"unknown preset {preset!r}; expected one of {sorted(sizes)}")
    cfg = deepcopy(COMMON)
    cfg.update(deepcopy(defaults))
    cfg.update(deepcopy(sizes[preset]))
    for key, value in (overrides or {}).items():
        if isinstance(value, dict) and isinstance(cfg.get(key), dict):
            cfg[key] = {**cfg[key], **value}
        else:
            cfg[key] = value
    cfg["preset"] = preset
    return cfg
