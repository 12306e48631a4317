"""Random Fourier sketches of datasets and mixture models.

A sketch is the vector of averaged complex exponentials
``z_j = mean_i exp(1j * omega_j . x_i)`` for a matrix of random frequencies
``omega`` (one row per frequency). Mixture models have closed-form sketches,
so a model can be fitted to a dataset by matching sketches; :func:`cost` and
:func:`cost_gradient` give that objective and its analytic gradient.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._rng import fnv1a64, make_rng
from .errors import DegenerateAtomError, DegenerateScaleError, IncompatibleSketchError, ParameterError
from .model import Dataset, MixtureModel, ModelKind, as_points

# AR inverse-CDF table: 2**14 grid points over [0, 8/sigma].
AR_GRID_SIZE = 2 ** 14
AR_RADIUS_CUTOFF = 8.0

_CHUNK_ELEMENTS = 1 << 21


class FrequencyLaw(str, enum.Enum):
    FG = "fg"
    AR = "ar"

    @classmethod
    def parse(cls, value) -> "FrequencyLaw":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ParameterError(f"unknown frequency law {value!r}; expected 'fg' or 'ar'") from None


@dataclass(frozen=True, eq=False)
class FrequencyMatrix:
    omega: np.ndarray
    law: FrequencyLaw
    sigma: float
    seed: int

    @property
    def m(self) -> int:
        return self.omega.shape[0]

    @property
    def d(self) -> int:
        return self.omega.shape[1]

    @cached_property
    def omega_sq(self) -> np.ndarray:
        return self.omega ** 2

    @cached_property
    def fingerprint(self) -> int:
        """64-bit FNV-1a hash of ``omega`` as little-endian float64 bytes."""
        return fnv1a64(np.ascontiguousarray(self.omega, dtype="<f8").tobytes())

    def prefix(self, m: int) -> "FrequencyMatrix":
        """The first ``m`` rows, as used by nested-prefix sweeps."""
        if not 1 <= m <= self.m:
            raise ParameterError(f"prefix size {m} outside [1, {self.m}]")
        return FrequencyMatrix(self.omega[:m], self.law, self.sigma, self.seed)


@dataclass(frozen=True, eq=False)
class Sketch:
    """``m`` complex moments; ``n`` samples were averaged (0 for model sketches)."""

    values: np.ndarray
    n: int
    frequency_fingerprint: int

    @property
    def m(self) -> int:
        return self.values.shape[0]

    def as_real(self) -> np.ndarray:
        """Interleaved ``(re, im)`` pairs, length ``2m``."""
        return np.ascontiguousarray(self.values).view(np.float64)


def _radius_fg(rng, m, sigma):
    # p_R ∝ exp(-(sigma R)^2) is half-normal with scale 1/(sigma sqrt 2)
    return np.abs(rng.standard_normal(m)) / (sigma * np.sqrt(2.0))


def ar_density(r, sigma):
    """Unnormalized adapted-radius density of the frequency norm."""
    s = sigma * np.asarray(r, dtype=np.float64)
    return np.sqrt(s ** 2 + s ** 4 / 4.0) * np.exp(-s ** 2)


def _radius_ar(rng, m, sigma):
    grid = np.linspace(0.0, AR_RADIUS_CUTOFF / sigma, AR_GRID_SIZE)
    pdf = ar_density(grid, sigma)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(grid))])
    cdf /= cdf[-1]
    return np.interp(rng.random(m), cdf, grid)


def draw_frequencies(m: int, d: int, law="fg", sigma: float = 1.0, seed: int = 0) -> FrequencyMatrix:
    """Draw ``m`` frequencies ``omega_j = R_j * phi_j`` in ``R^d``.

    ``phi_j`` is a normalized standard Gaussian vector (uniform on the unit
    sphere) and ``R_j`` follows the folded-Gaussian (``"fg"``) or
    adapted-radius (``"ar"``) law at scale ``sigma``. The output is a pure
    function of the arguments.
    """
    law = FrequencyLaw.parse(law)
    if int(m) < 1 or int(d) < 1:
        raise ParameterError(f"need m >= 1 and d >= 1, got m={m}, d={d}")
    sigma = float(sigma)
    if not np.isfinite(sigma) or sigma <= 0:
        raise ParameterError(f"sigma must be a positive finite number, got {sigma}")
    m, d = int(m), int(d)
    rng = make_rng(seed, "frequencies")
    directions = unit_directions(rng, m, d)
    radius = _radius_fg(rng, m, sigma) if law is FrequencyLaw.FG else _radius_ar(rng, m, sigma)
    omega = directions * radius[:, None]
    omega.setflags(write=False)
    return FrequencyMatrix(omega, law, sigma, int(seed))


def unit_directions(rng, m, d):
    g = rng.standard_normal((m, d))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    # a zero Gaussian vector has probability 0; guard anyway
    norms[norms == 0] = 1.0
    return g / norms


def _check_dims(d_data, freqs):
    if d_data != freqs.d:
        raise ParameterError(f"dimension mismatch: data/model d={d_data}, frequencies d={freqs.d}")


def _fourier_sum(points, omega):
    m = omega.shape[0]
    rows = max(1, _CHUNK_ELEMENTS // max(m, 1))
    total = np.zeros(m, dtype=np.complex128)
    for start in range(0, points.shape[0], rows):
        phase = points[start:start + rows] @ omega.T
        total += np.exp(1j * phase).sum(axis=0)
    return total


def empirical_sketch(X, freqs: FrequencyMatrix) -> Sketch:
    """Average ``exp(1j * omega x)`` over the rows of ``X`` in one pass."""
    points = as_points(X)
    _check_dims(points.shape[1], freqs)
    n = points.shape[0]
    return Sketch(_fourier_sum(points, freqs.omega) / n, n, freqs.fingerprint)


def merge_sketches(a: Sketch, b: Sketch) -> Sketch:
    if a.frequency_fingerprint != b.frequency_fingerprint:
        raise IncompatibleSketchError(
            f"fingerprints differ: {a.frequency_fingerprint:016x} vs {b.frequency_fingerprint:016x}")
    if a.n < 1 or b.n < 1:
        raise IncompatibleSketchError("only empirical sketches (n >= 1) can be merged")
    n = a.n + b.n
    return Sketch((a.n * a.values + b.n * b.values) / n, n, a.frequency_fingerprint)


def atom_sketches(centers, variances, freqs: FrequencyMatrix) -> np.ndarray:
    """Per-atom sketches, shape ``(K, m)``; ``variances`` is None for Diracs."""
    phase = centers @ freqs.omega.T
    if variances is None:
        return np.exp(1j * phase)
    return np.exp(-0.5 * (variances @ freqs.omega_sq.T) + 1j * phase)


def model_sketch(theta: MixtureModel, freqs: FrequencyMatrix) -> Sketch:
    """Closed-form sketch ``sum_k w_k E[exp(1j omega x)]`` of a mixture."""
    _check_dims(theta.d, freqs)
    values = theta.weights @ atom_sketches(theta.centers, theta.variances, freqs)
    return Sketch(values, 0, freqs.fingerprint)


def _check_sketch(z: Sketch, freqs: FrequencyMatrix):
    if z.m != freqs.m:
        raise ParameterError(f"sketch has {z.m} entries but there are {freqs.m} frequencies")
    if z.frequency_fingerprint != freqs.fingerprint:
        raise IncompatibleSketchError("sketch was not produced with these frequencies")


def cost_and_grad_arrays(weights, centers, variances, z_values, freqs):
    """Cost and its gradient blocks ``(f, g_weights, g_centers, g_variances)``.

    Works on raw arrays; ``g_variances`` is None for Diracs.
    """
    A = atom_sketches(centers, variances, freqs)
    r = z_values - weights @ A
    f = float(np.vdot(r, r).real)
    C = np.conj(r)[None, :] * A
    g_w = -2.0 * C.real.sum(axis=1)
    g_c = 2.0 * weights[:, None] * (C.imag @ freqs.omega)
    g_v = None if variances is None else weights[:, None] * (C.real @ freqs.omega_sq)
    return f, g_w, g_c, g_v


def cost(theta: MixtureModel, z: Sketch, freqs: FrequencyMatrix) -> float:
    """Sketch-matching cost ``||z - A(theta)||_2^2`` over the complex entries."""
    _check_dims(theta.d, freqs)
    _check_sketch(z, freqs)
    r = z.values - model_sketch(theta, freqs).values
    return float(np.vdot(r, r).real)


def cost_gradient(theta: MixtureModel, z: Sketch, freqs: FrequencyMatrix) -> np.ndarray:
    """Analytic gradient of :func:`cost` in the flat layout of
    :meth:`MixtureModel.to_vector` (weights, centers, then variances)."""
    _check_dims(theta.d, freqs)
    _check_sketch(z, freqs)
    _, g_w, g_c, g_v = cost_and_grad_arrays(theta.weights, theta.centers, theta.variances, z.values, freqs)
    parts = [g_w, g_c.ravel()]
    if g_v is not None:
        parts.append(g_v.ravel())
    return np.concatenate(parts)


def atom_correlation_arrays(center, variance, residual, freqs):
    """Normalized correlation of one unit-weight atom with a residual.

    Returns ``(value, grad_center, grad_variance)``; ``variance`` and
    ``grad_variance`` are None for a Dirac atom.
    """
    phase = freqs.omega @ center
    if variance is None:
        a = np.exp(1j * phase)
        sq = None
        norm = np.sqrt(freqs.m)
    else:
        sq = np.exp(-(freqs.omega_sq @ variance))
        a = np.exp(1j * phase) * np.sqrt(sq)
        norm = float(np.sqrt(sq.sum()))
    if not norm > 0 or not np.isfinite(norm):
        raise DegenerateAtomError("atom sketch has zero norm")
    s = np.conj(a) * residual
    g = float(s.real.sum())
    value = g / norm
    grad_c = (s.imag @ freqs.omega) / norm
    if variance is None:
        return value, grad_c, None
    dg_dv = -0.5 * (s.real @ freqs.omega_sq)
    dnorm_dv = -(sq @ freqs.omega_sq) / (2.0 * norm)
    grad_v = dg_dv / norm - g * dnorm_dv / norm ** 2
    return value, grad_c, grad_v


def atom_correlation(atom: MixtureModel, residual: Sketch, freqs: FrequencyMatrix):
    """``Re <A(atom)/||A(atom)||, residual>`` and its gradient.

    The gradient is taken with respect to the atom's center and, for a
    Gaussian atom, its variances (concatenated in that order).
    """
    if atom.K != 1 or atom.weights[0] != 1.0:
        raise ParameterError("atom_correlation expects a single atom with unit weight")
    _check_dims(atom.d, freqs)
    if residual.m != freqs.m:
        raise ParameterError(f"residual has {residual.m} entries but there are {freqs.m} frequencies")
    var = None if atom.variances is None else atom.variances[0]
    value, g_c, g_v = atom_correlation_arrays(atom.centers[0], var, residual.values, freqs)
    grad = g_c if g_v is None else np.concatenate([g_c, g_v])
    return value, grad


def scale_heuristic(X, subsample_size: int = 1000, seed: int = 0, n_pairs: int = 1000) -> float:
    """Data-driven scale: ``sqrt(mean ||x - x'||^2 / (2d))`` over random pairs.

    Pairs are drawn from a random subsample of ``subsample_size`` points.
    For an isotropic cloud with per-coordinate variance ``s^2`` this
    estimates ``s``.
    """
    points = as_points(X)
    n, d = points.shape
    if subsample_size < 2:
        raise ParameterError("subsample_size must be at least 2")
    if n < 2:
        raise ParameterError("the scale heuristic needs at least 2 points")
    rng = make_rng(seed, "scale-heuristic")
    size = min(int(subsample_size), n)
    sub = points[rng.choice(n, size=size, replace=False)]
    i = rng.integers(0, size, n_pairs)
    j = (i + rng.integers(1, size, n_pairs)) % size  # j != i
    sq = np.sum((sub[i] - sub[j]) ** 2, axis=1)
    sigma = float(np.sqrt(sq.mean() / (2 * d)))
    if not sigma > 0 or not np.isfinite(sigma):
        raise DegenerateScaleError("all sampled pairs coincide; the scale is degenerate")
    return sigma


__all__ = [
    "FrequencyLaw",
    "FrequencyMatrix",
    "Sketch",
    "Dataset",
    "MixtureModel",
    "ModelKind",
    "draw_frequencies",
    "empirical_sketch",
    "merge_sketches",
    "model_sketch",
    "cost",
    "cost_gradient",
    "atom_correlation",
    "scale_heuristic",
    "ar_density",
]
