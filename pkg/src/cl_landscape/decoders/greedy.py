"""Greedy decoding by orthogonal matching pursuit with replacement (CLOMPR)."""

from __future__ import annotations

import logging
import time

import numpy as np

from .._rng import derive_seed, make_rng
from ..errors import CLError, DecodeError, DegenerateAtomError
from ..sketch import FrequencyMatrix, Sketch, _check_sketch, atom_correlation_arrays, atom_sketches, cost
from .base import DecodeOptions, DecodeResult, Parameterization, _inv_sqrt
from .optim import local_minimize, nnls_weights

log = logging.getLogger(__name__)

ATOM_RETRIES = 10


def _random_atom(rng, param: Parameterization):
    opts = param.opts
    center = rng.uniform(opts.box_lower, opts.box_upper)
    log_var = rng.uniform(param.log_var_lower, param.log_var_upper) if param.gaussian else None
    return center, log_var


def _find_atom(rng, param: Parameterization, residual: np.ndarray, max_iter: int):
    """Locally maximize the normalized atom/residual correlation from a
    random start; returns ``(center, log_var)`` or None if every start was
    degenerate."""
    opts, d, freqs = param.opts, param.d, param.freqs

    def neg_corr(x):
        center = x[:d]
        var = np.exp(x[d:]) if param.gaussian else None
        try:
            value, g_c, g_v = atom_correlation_arrays(center, var, residual, freqs)
        except DegenerateAtomError:
            return np.inf, np.zeros_like(x)
        if g_v is None:
            return -value, -g_c
        return -value, -np.concatenate([g_c, g_v * var])

    lo, hi = [opts.box_lower], [opts.box_upper]
    if param.gaussian:
        lo.append(param.log_var_lower)
        hi.append(param.log_var_upper)
    lo, hi = np.concatenate(lo), np.concatenate(hi)

    for _ in range(ATOM_RETRIES):
        center, log_var = _random_atom(rng, param)
        x0 = center if log_var is None else np.concatenate([center, log_var])
        if not np.isfinite(neg_corr(x0)[0]):
            continue
        scale = _atom_scale(param, residual, log_var)
        res = local_minimize(neg_corr, x0, lo, hi, max_iter=max_iter, scale=scale)
        return res.x[:d], (res.x[d:] if param.gaussian else None)
    return None


def _atom_scale(param, residual, log_var):
    """``1/sqrt`` of a curvature bound of the normalized correlation."""
    freqs, opts = param.freqs, param.opts
    if log_var is None:
        mag = np.ones(freqs.m)
    else:
        mag = np.exp(-0.5 * (freqs.omega_sq @ np.exp(log_var)))
    weight = np.abs(residual) * mag / max(float(np.sqrt(np.sum(mag ** 2))), np.finfo(float).tiny)
    parts = [_inv_sqrt(weight @ freqs.omega_sq, opts.box_upper - opts.box_lower)]
    if log_var is not None:
        half = 0.5 * freqs.omega_sq * np.exp(log_var)[None, :]
        parts.append(_inv_sqrt(weight @ half ** 2, param.log_var_upper - param.log_var_lower))
    return np.concatenate(parts)


def _support_sketches(param, centers, log_vars):
    var = None if log_vars is None else np.exp(log_vars)
    return atom_sketches(centers, var, param.freqs)


def _prune(weights, K):
    """Indices to keep: the K largest weights, ties dropping the later atom."""
    order = sorted(range(len(weights)), key=lambda k: (-weights[k], k))
    return np.sort(np.array(order[:K]))


def polish(param: Parameterization, weights, centers, log_vars, max_iter):
    """NNLS weight solve followed by a joint local minimization of the cost."""
    K = centers.shape[0]
    weights = nnls_weights(_support_sketches(param, centers, log_vars), param.z)
    x0 = param.pack(weights, centers, log_vars)
    lo, hi = param.bounds(K)
    res = local_minimize(param.objective(K), x0, lo, hi, max_iter=max_iter, scale=param.joint_scale(x0, K))
    return param.unpack(res.x, K) + (res.fun,)


def clompr(z: Sketch, freqs: FrequencyMatrix, opts: DecodeOptions) -> DecodeResult:
    """Decode a K-atom mixture from ``z`` by CL-OMP with replacement.

    Runs ``2K`` greedy iterations. Each one adds the atom best correlated
    with the current residual, prunes the support back to K atoms by
    NNLS weight once it exceeds K, re-solves the weights, and jointly polishes
    all parameters against the sketch-matching cost. The last polish runs
    up to ``opts.polish_iterations`` iterations.

    The returned weights are renormalized to sum to 1 and ``final_cost`` is
    the cost of that normalized model; the fitted weights are kept in
    ``extra["fitted_weights"]``.
    """
    _check_sketch(z, freqs)
    if opts.d != freqs.d:
        raise DecodeError(f"search box has d={opts.d} but frequencies have d={freqs.d}")
    start = time.perf_counter()
    rng = make_rng(opts.seed, "clompr")
    param = Parameterization(opts, z, freqs)
    K, d = opts.K, opts.d

    centers = np.empty((0, d))
    log_vars = np.empty((0, d)) if param.gaussian else None
    weights = np.empty(0)
    residual = param.z.copy()
    trace = []
    n_iter = 2 * K
    for it in range(n_iter):
        found = _find_atom(rng, param, residual, opts.max_inner_iterations)
        if found is None:
            log.warning("clompr iteration %d: every atom start was degenerate, skipping", it)
        else:
            centers = np.vstack([centers, found[0]])
            if param.gaussian:
                log_vars = np.vstack([log_vars, found[1]])
        if centers.shape[0] == 0:
            continue
        if centers.shape[0] > K:
            w_all = nnls_weights(_support_sketches(param, centers, log_vars), param.z)
            keep = _prune(w_all, K)
            centers = centers[keep]
            if param.gaussian:
                log_vars = log_vars[keep]
        last = it == n_iter - 1
        cap = opts.polish_iterations if last else opts.max_inner_iterations
        weights, centers, log_vars, f = polish(param, weights, centers, log_vars, cap)
        var = None if log_vars is None else np.exp(log_vars)
        residual = param.z - weights @ atom_sketches(centers, var, freqs)
        trace.append((it, float(f)))

    if centers.shape[0] != K:
        raise DecodeError(f"clompr ended with {centers.shape[0]} atoms instead of {K}")
    theta = normalized_model(param, weights, centers, log_vars)
    return DecodeResult(
        theta=theta,
        final_cost=cost(theta, z, freqs),
        cost_trace=trace,
        seed=opts.seed,
        elapsed=time.perf_counter() - start,
        decoder="clompr",
        extra={"fitted_weights": [float(w) for w in weights]},
    )


def normalized_model(param: Parameterization, weights, centers, log_vars):
    """Model with weights rescaled to sum 1 (uniform if they are all zero)."""
    total = float(np.sum(weights))
    if total > 0:
        weights = weights / total
    else:
        log.warning("all fitted weights are zero; returning uniform weights")
        weights = np.full(len(weights), 1.0 / len(weights))
    return param.model(weights, centers, log_vars)


def clompr_multi(z: Sketch, freqs: FrequencyMatrix, opts: DecodeOptions) -> DecodeResult:
    """Run ``opts.trials`` independent CLOMPR decodes; keep the lowest cost.

    Trial ``t`` uses seed ``derive_seed(opts.seed, t)``, so trial 0 is what
    :func:`trial_options` (or a single-trial call) reproduces.
    """
    start = time.perf_counter()
    best = None
    costs = []
    errors = []
    for t in range(opts.trials):
        try:
            res = clompr(z, freqs, trial_options(opts, t))
        except CLError as exc:
            errors.append(exc)
            costs.append(None)
            continue
        costs.append(res.final_cost)
        if best is None or res.final_cost < best.final_cost:
            best = res
    if best is None:
        raise DecodeError(f"all {opts.trials} clompr trials failed: {errors[-1]}") from errors[-1]
    best.decoder = f"clomprx{opts.trials}"
    best.elapsed = time.perf_counter() - start
    best.extra = {**best.extra, "master_seed": int(opts.seed), "trial_costs": costs}
    return best


def trial_options(opts: DecodeOptions, t: int) -> DecodeOptions:
    return opts.replace(seed=derive_seed(opts.seed, t), trials=1)
