"""Mixture models and datasets."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError


class ModelKind(str, enum.Enum):
    DIRAC = "dirac"
    GAUSSIAN = "gaussian"

    @classmethod
    def parse(cls, value) -> "ModelKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ParameterError(f"unknown model kind {value!r}; expected 'dirac' or 'gaussian'") from None


@dataclass(frozen=True, eq=False)
class MixtureModel:
    """Weighted Dirac atoms (k-means) or diagonal Gaussian atoms (GMM).

    Weights are stored exactly as given: sketch matching uses them raw,
    while likelihood evaluation normalizes them first (see
    :meth:`normalized`).

    The flat parameter layout used by gradients and optimizers is
    ``[weights (K), centers (K*d, row-major), variances (K*d, row-major)]``,
    the last block only for the Gaussian kind.
    """

    kind: ModelKind
    weights: np.ndarray
    centers: np.ndarray
    variances: np.ndarray | None = None

    def __post_init__(self):
        kind = ModelKind.parse(self.kind)
        weights = np.array(self.weights, dtype=np.float64).reshape(-1)
        centers = np.array(self.centers, dtype=np.float64)
        if centers.ndim == 1:
            centers = centers.reshape(len(weights), -1) if len(weights) else centers[None, :]
        if centers.ndim != 2 or centers.shape[0] != weights.shape[0]:
            raise ParameterError(
                f"centers shape {centers.shape} does not match {weights.shape[0]} weights")
        if weights.shape[0] < 1 or centers.shape[1] < 1:
            raise ParameterError("a mixture needs K >= 1 atoms of dimension d >= 1")
        if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(centers))):
            raise ParameterError("mixture parameters must be finite")
        if np.any(weights < 0):
            raise ParameterError("mixture weights must be nonnegative")

        variances = self.variances
        if kind is ModelKind.DIRAC:
            if variances is not None:
                raise ParameterError("Dirac mixtures carry no variances")
        else:
            if variances is None:
                raise ParameterError("Gaussian mixtures need per-coordinate variances")
            variances = np.array(variances, dtype=np.float64)
            if variances.shape != centers.shape:
                raise ParameterError(
                    f"variances shape {variances.shape} != centers shape {centers.shape}")
            if not np.all(np.isfinite(variances)) or np.any(variances <= 0):
                raise ParameterError("variances must be finite and > 0")
            variances.setflags(write=False)
        weights.setflags(write=False)
        centers.setflags(write=False)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "variances", variances)

    @property
    def K(self) -> int:
        return self.centers.shape[0]

    @property
    def d(self) -> int:
        return self.centers.shape[1]

    @property
    def n_params(self) -> int:
        blocks = 2 if self.kind is ModelKind.DIRAC else 3
        return self.K + (blocks - 1) * self.K * self.d

    def to_vector(self) -> np.ndarray:
        parts = [self.weights, self.centers.ravel()]
        if self.variances is not None:
            parts.append(self.variances.ravel())
        return np.concatenate(parts)

    @classmethod
    def from_vector(cls, kind, K: int, d: int, vec) -> "MixtureModel":
        kind = ModelKind.parse(kind)
        vec = np.asarray(vec, dtype=np.float64)
        expected = K + K * d * (1 if kind is ModelKind.DIRAC else 2)
        if vec.shape != (expected,):
            raise ParameterError(f"expected a flat vector of length {expected}, got {vec.shape}")
        weights = vec[:K]
        centers = vec[K:K + K * d].reshape(K, d)
        variances = None if kind is ModelKind.DIRAC else vec[K + K * d:].reshape(K, d)
        return cls(kind, weights, centers, variances)

    def normalized(self) -> "MixtureModel":
        total = self.weights.sum()
        if total <= 0:
            raise ParameterError("cannot normalize a mixture whose weights sum to zero")
        return MixtureModel(self.kind, self.weights / total, self.centers, self.variances)

    def atom(self, k: int) -> "MixtureModel":
        """The k-th component as a unit-weight single-atom model."""
        var = None if self.variances is None else self.variances[k:k + 1]
        return MixtureModel(self.kind, [1.0], self.centers[k:k + 1], var)

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind.value,
            "K": self.K,
            "d": self.d,
            "weights": self.weights.tolist(),
            "centers": self.centers.tolist(),
        }
        if self.variances is not None:
            out["variances"] = self.variances.tolist()
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "MixtureModel":
        return cls(obj["kind"], obj["weights"], obj["centers"], obj.get("variances"))

    def __eq__(self, other):
        if not isinstance(other, MixtureModel):
            return NotImplemented
        same_var = (self.variances is None and other.variances is None) or (
            self.variances is not None and other.variances is not None
            and np.array_equal(self.variances, other.variances))
        return (self.kind is other.kind and np.array_equal(self.weights, other.weights)
                and np.array_equal(self.centers, other.centers) and same_var)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Dataset:
    """An n-by-d matrix of finite points plus free-form provenance metadata."""

    points: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ParameterError(f"dataset must be a non-empty n x d matrix, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ParameterError("dataset contains non-finite values")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.points.min(axis=0), self.points.max(axis=0)


def as_points(X) -> np.ndarray:
    return X.points if isinstance(X, Dataset) else Dataset(X).points
