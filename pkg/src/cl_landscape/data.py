"""Synthetic Gaussian-cluster datasets."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from ._rng import make_rng
from .errors import ParameterError
from .model import Dataset, MixtureModel, ModelKind

MAX_CENTER_RESAMPLES = 100
DIRICHLET_ALPHA = 5.0


@dataclass
class GeneratorConfig:
    """Parameters of a synthetic mixture of K isotropic Gaussians.

    ``separation`` is measured in units of ``within_std``. Centers are drawn
    uniformly in ``[-L, L]^d`` with ``L = separation * within_std * K**(1/d)``
    and redrawn while closer than ``separation * within_std * sqrt(d)`` to
    an earlier center.
    """

    K: int = 10
    d: int = 10
    n: int = 50_000
    separation: float = 3.0
    within_std: float = 1.0
    weight_mode: str = "uniform"
    seed: int = 0

    def __post_init__(self):
        if min(self.K, self.d, self.n) < 1:
            raise ParameterError("K, d and n must all be >= 1")
        if not self.separation > 0 or not self.within_std > 0:
            raise ParameterError("separation and within_std must be > 0")
        if self.weight_mode not in ("uniform", "dirichlet"):
            raise ParameterError(f"weight_mode must be 'uniform' or 'dirichlet', got {self.weight_mode!r}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, obj) -> "GeneratorConfig":
        return cls(**{k: obj[k] for k in cls.__dataclass_fields__ if k in obj})


def _place_centers(cfg: GeneratorConfig, rng):
    half = cfg.separation * cfg.within_std * cfg.K ** (1.0 / cfg.d)
    min_dist = cfg.separation * cfg.within_std * np.sqrt(cfg.d)
    centers = np.empty((cfg.K, cfg.d))
    crowded = 0
    for k in range(cfg.K):
        for attempt in range(MAX_CENTER_RESAMPLES + 1):
            c = rng.uniform(-half, half, cfg.d)
            if k == 0 or np.min(np.linalg.norm(centers[:k] - c, axis=1)) >= min_dist:
                break
        else:
            crowded += 1
        centers[k] = c
    return centers, crowded


def generate_gmm_data(cfg: GeneratorConfig) -> tuple[Dataset, MixtureModel]:
    """Sample ``cfg.n`` points and return them with the generating GMM."""
    rng = make_rng(cfg.seed, "gmm-data")
    centers, crowded = _place_centers(cfg, rng)
    if cfg.weight_mode == "uniform":
        weights = np.full(cfg.K, 1.0 / cfg.K)
    else:
        weights = rng.dirichlet(np.full(cfg.K, DIRICHLET_ALPHA))
    labels = rng.choice(cfg.K, size=cfg.n, p=weights)
    points = centers[labels] + cfg.within_std * rng.standard_normal((cfg.n, cfg.d))
    truth = MixtureModel(ModelKind.GAUSSIAN, weights, centers, np.full((cfg.K, cfg.d), cfg.within_std ** 2))
    meta = {"generator": asdict(cfg), "labels": labels}
    if crowded:
        meta["warning"] = (f"{crowded} center(s) could not meet the separation after "
                           f"{MAX_CENTER_RESAMPLES} resamples")
    return Dataset(points, meta), truth
