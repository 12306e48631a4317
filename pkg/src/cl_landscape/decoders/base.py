"""Decoder options, results, and the flat optimization parameterization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import ParameterError
from ..model import MixtureModel, ModelKind
from ..sketch import FrequencyMatrix, Sketch, cost_and_grad_arrays

VARIANCE_FLOOR = 1e-6
POLISH_MAX_ITER = 3000


@dataclass
class DecodeOptions:
    """Knobs shared by every decoder.

    ``box_lower``/``box_upper`` bound the centers per coordinate. Variance
    bounds for Gaussian atoms default to ``[1e-6, width**2]`` per coordinate.
    """

    K: int
    model_kind: ModelKind
    box_lower: np.ndarray
    box_upper: np.ndarray
    var_lower: np.ndarray | None = None
    var_upper: np.ndarray | None = None
    max_inner_iterations: int = 300
    polish_iterations: int = POLISH_MAX_ITER
    trials: int = 1
    seed: int = 0

    def __post_init__(self):
        self.model_kind = ModelKind.parse(self.model_kind)
        self.box_lower = np.atleast_1d(np.asarray(self.box_lower, dtype=np.float64))
        self.box_upper = np.atleast_1d(np.asarray(self.box_upper, dtype=np.float64))
        if self.K < 1:
            raise ParameterError(f"K must be >= 1, got {self.K}")
        if self.trials < 1:
            raise ParameterError(f"trials must be >= 1, got {self.trials}")
        if self.max_inner_iterations < 1 or self.polish_iterations < 1:
            raise ParameterError("iteration caps must be >= 1")
        if self.box_lower.shape != self.box_upper.shape or np.any(self.box_lower >= self.box_upper):
            raise ParameterError("search box needs lower < upper in every coordinate")
        if not (np.all(np.isfinite(self.box_lower)) and np.all(np.isfinite(self.box_upper))):
            raise ParameterError("search box must be finite")
        width = self.box_upper - self.box_lower
        if self.var_lower is None:
            self.var_lower = np.full_like(width, VARIANCE_FLOOR)
        if self.var_upper is None:
            self.var_upper = np.maximum(width ** 2, 2 * VARIANCE_FLOOR)
        self.var_lower = np.broadcast_to(np.asarray(self.var_lower, dtype=np.float64), width.shape).copy()
        self.var_upper = np.broadcast_to(np.asarray(self.var_upper, dtype=np.float64), width.shape).copy()
        if np.any(self.var_lower <= 0) or np.any(self.var_lower >= self.var_upper):
            raise ParameterError("variance bounds need 0 < lower < upper")

    @property
    def d(self) -> int:
        return self.box_lower.shape[0]

    @classmethod
    def from_data(cls, X, K, model_kind, **kwargs) -> "DecodeOptions":
        """Options whose search box is the bounding box of the data."""
        points = getattr(X, "points", X)
        lo, hi = np.min(points, axis=0), np.max(points, axis=0)
        flat = hi <= lo
        hi = np.where(flat, lo + 1.0, hi)
        return cls(K=K, model_kind=model_kind, box_lower=lo, box_upper=hi, **kwargs)

    def replace(self, **changes) -> "DecodeOptions":
        fields = dict(
            K=self.K, model_kind=self.model_kind, box_lower=self.box_lower, box_upper=self.box_upper,
            var_lower=self.var_lower, var_upper=self.var_upper,
            max_inner_iterations=self.max_inner_iterations, polish_iterations=self.polish_iterations,
            trials=self.trials, seed=self.seed)
        fields.update(changes)
        return DecodeOptions(**fields)


@dataclass
class DecodeResult:
    theta: MixtureModel
    final_cost: float
    cost_trace: list
    seed: int
    elapsed: float
    decoder: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = self.theta.to_dict()
        out.update(
            decoder=self.decoder,
            final_cost=self.final_cost,
            cost_trace=[[int(i), float(c)] for i, c in self.cost_trace],
            seed=int(self.seed),
            elapsed_ms=1000.0 * self.elapsed,
        )
        out.update(self.extra)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict) -> "DecodeResult":
        return cls(
            theta=MixtureModel.from_dict(obj),
            final_cost=float(obj["final_cost"]),
            cost_trace=[tuple(t) for t in obj.get("cost_trace", [])],
            seed=int(obj.get("seed", 0)),
            elapsed=float(obj.get("elapsed_ms", 0.0)) / 1000.0,
            decoder=obj.get("decoder", ""),
        )


class Parameterization:
    """Maps a K-atom mixture to the flat vector the inner optimizer sees.

    Layout ``[weights, centers, log-variances]`` (log-variances only for the
    Gaussian kind); gradients are chain-ruled from :func:`cost_and_grad_arrays`.
    """

    def __init__(self, opts: DecodeOptions, z: Sketch, freqs: FrequencyMatrix):
        self.opts = opts
        self.z = z.values
        self.freqs = freqs
        self.d = opts.d
        self.gaussian = opts.model_kind is ModelKind.GAUSSIAN
        self.log_var_lower = np.log(opts.var_lower)
        self.log_var_upper = np.log(opts.var_upper)

    def bounds(self, K):
        lo = [np.zeros(K), np.tile(self.opts.box_lower, K)]
        hi = [np.full(K, np.inf), np.tile(self.opts.box_upper, K)]
        if self.gaussian:
            lo.append(np.tile(self.log_var_lower, K))
            hi.append(np.tile(self.log_var_upper, K))
        return np.concatenate(lo), np.concatenate(hi)

    def pack(self, weights, centers, log_var):
        parts = [weights, centers.ravel()]
        if self.gaussian:
            parts.append(log_var.ravel())
        return np.concatenate(parts)

    def unpack(self, x, K):
        d = self.d
        weights = x[:K]
        centers = x[K:K + K * d].reshape(K, d)
        log_var = x[K + K * d:].reshape(K, d) if self.gaussian else None
        return weights, centers, log_var

    def objective(self, K):
        def fun(x):
            weights, centers, log_var = self.unpack(x, K)
            var = None if log_var is None else np.exp(log_var)
            f, g_w, g_c, g_v = cost_and_grad_arrays(weights, centers, var, self.z, self.freqs)
            parts = [g_w, g_c.ravel()]
            if var is not None:
                parts.append((g_v * var).ravel())
            return f, np.concatenate(parts)
        return fun

    def joint_scale(self, x, K):
        """Per-coordinate ``1/sqrt(curvature)`` of the cost at ``x``.

        Weight and center curvatures differ by orders of magnitude, so the
        inner optimizer is run in these units. Weights enter at their nominal
        value 1/K to stay finite when NNLS zeroes an atom.
        """
        _, centers, log_var = self.unpack(x, K)
        w_nom = 1.0 / K
        if log_var is None:
            mag2 = np.ones((K, self.freqs.m))
        else:
            mag2 = np.exp(-(np.exp(log_var) @ self.freqs.omega_sq.T))
        # caps keep the scale finite where an atom's sketch has vanished
        width = self.opts.box_upper - self.opts.box_lower
        parts = [_inv_sqrt(2.0 * mag2.sum(axis=1), 1.0),
                 _inv_sqrt(2.0 * w_nom ** 2 * (mag2 @ self.freqs.omega_sq), width).ravel()]
        if log_var is not None:
            half = 0.5 * np.exp(log_var)[:, None, :] * self.freqs.omega_sq[None, :, :]  # (K, m, d)
            curv = 2.0 * w_nom ** 2 * np.einsum("km,kmd->kd", mag2, half ** 2)
            parts.append(_inv_sqrt(curv, self.log_var_upper - self.log_var_lower).ravel())
        return np.concatenate(parts)

    def model(self, weights, centers, log_var) -> MixtureModel:
        var = None if log_var is None else np.exp(log_var)
        return MixtureModel(self.opts.model_kind, weights, centers, var)


def _inv_sqrt(curvature, cap):
    """``1/sqrt(curvature)``, capped at ``cap`` (broadcast)."""
    with np.errstate(divide="ignore"):
        out = 1.0 / np.sqrt(curvature)
    return np.minimum(out, cap)
