"""GenetiCL: a genetic-algorithm decoder for sketched mixture learning.

Each chromosome is a full K-atom mixture. Weights live in log-space and are
softmax-normalized before the fitness ``||z - A(theta)||^-gamma`` is
evaluated; variances (Gaussian kind) are kept as log-variances. Crossover
swaps whole atoms between parents after pairing each atom with its nearest
counterpart; mutation adds Gaussian noise whose scale
decays linearly to 1/100 of its initial value over the run. Several
independent populations ("islands") can be evolved from separate seeds;
one population tends to collapse into a single basin, so a few small
islands explore more of the landscape than one large population.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .._rng import make_rng
from ..errors import DecodeError, ParameterError
from ..sketch import FrequencyMatrix, Sketch, _check_sketch, cost
from .base import DecodeOptions, DecodeResult, Parameterization
from .greedy import normalized_model, polish
from .optim import local_minimize

LOG_WEIGHT_BOUND = 20.0
# noise width for log-weights, which have no search box
LOG_WEIGHT_WIDTH = 1.0


@dataclass
class GeneticOptions:
    population_size: int = 100
    generations: int = 500
    gamma: float = 4.0
    mutation_scale: float = 0.05
    crossover_rate: float = 0.5
    elitism_count: int = 2
    islands: int = 1
    seed: int | None = None

    def __post_init__(self):
        if self.population_size < 2:
            raise ParameterError("population_size must be >= 2")
        if self.generations < 1:
            raise ParameterError("generations must be >= 1")
        if not self.gamma > 0:
            raise ParameterError("gamma must be > 0")
        if not 0 <= self.crossover_rate <= 1 or not 0 <= self.mutation_scale <= 1:
            raise ParameterError("crossover_rate and mutation_scale must lie in [0, 1]")
        if not 0 <= self.elitism_count <= self.population_size:
            raise ParameterError("elitism_count must lie in [0, population_size]")
        if self.islands < 1:
            raise ParameterError("islands must be >= 1")


def fitness(residual_norm, gamma):
    """``residual_norm ** -gamma``; a zero residual has infinite fitness."""
    residual_norm = np.asarray(residual_norm, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return residual_norm ** (-gamma)


def _softmax(logw):
    e = np.exp(logw - logw.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


class _Population:
    def __init__(self, logw, centers, log_var):
        self.logw = logw          # (P, K)
        self.centers = centers    # (P, K, d)
        self.log_var = log_var    # (P, K, d) or None

    def take(self, idx):
        lv = None if self.log_var is None else self.log_var[idx]
        return _Population(self.logw[idx], self.centers[idx], lv)

    @staticmethod
    def concat(a, b):
        lv = None if a.log_var is None else np.concatenate([a.log_var, b.log_var])
        return _Population(np.concatenate([a.logw, b.logw]), np.concatenate([a.centers, b.centers]), lv)


def _align(a: _Population, b: _Population) -> _Population:
    """Reorder each chromosome of ``b`` so its atoms pair with ``a``'s nearest centers.

    Atom order within a chromosome is arbitrary, so swapping atom k of one
    parent for atom k of the other would mostly swap unrelated atoms.
    """
    K = a.centers.shape[1]
    if K == 1:
        return b
    diff = a.centers[:, :, None, :] - b.centers[:, None, :, :]
    dist = np.einsum("pijd,pijd->pij", diff, diff)
    perm = np.empty((len(dist), K), dtype=np.intp)
    for i, D in enumerate(dist):
        perm[i] = linear_sum_assignment(D)[1]
    rows = np.arange(len(perm))[:, None]
    lv = None if b.log_var is None else b.log_var[rows, perm]
    return _Population(b.logw[rows, perm], b.centers[rows, perm], lv)


def population_costs(pop: _Population, z_values, freqs: FrequencyMatrix):
    """Sketch-matching cost of each chromosome (weights normalized)."""
    A = np.exp(1j * (pop.centers @ freqs.omega.T))
    if pop.log_var is not None:
        A *= np.exp(-0.5 * (np.exp(pop.log_var) @ freqs.omega_sq.T))
    model = np.einsum("pk,pkm->pm", _softmax(pop.logw), A)
    r = z_values[None, :] - model
    return np.einsum("pm,pm->p", r.real, r.real) + np.einsum("pm,pm->p", r.imag, r.imag)


def _simplex_polish(param: Parameterization, theta, max_iter):
    """Locally minimize the cost with weights kept on the simplex (softmax logits)."""
    K = theta.K
    logw = np.log(np.maximum(theta.weights, np.exp(-LOG_WEIGHT_BOUND)))
    logw -= logw.max()
    log_var = None if theta.variances is None else np.log(theta.variances)
    free = param.objective(K)

    def fun(x):
        u = x[:K]
        w = _softmax(u)
        f, g = free(np.concatenate([w, x[K:]]))
        g_w = g[:K]
        return f, np.concatenate([w * (g_w - w @ g_w), g[K:]])

    x0 = param.pack(logw, theta.centers, log_var)
    lo, hi = param.bounds(K)
    lo[:K], hi[:K] = -LOG_WEIGHT_BOUND, LOG_WEIGHT_BOUND
    scale = param.joint_scale(param.pack(np.full(K, 1.0 / K), theta.centers, log_var), K)
    scale[:K] = 1.0
    res = local_minimize(fun, x0, lo, hi, max_iter=max_iter, scale=scale)
    u, centers, lv = param.unpack(res.x, K)
    return param.model(_softmax(u), centers, lv)


def _finish(param, chrom, z, freqs, polish_iterations):
    """Polish one chromosome; each stage is kept only if it lowers the cost."""
    log_var = chrom.log_var[0] if param.gaussian else None
    theta = param.model(_softmax(chrom.logw[0]), chrom.centers[0], log_var)
    final_cost = cost(theta, z, freqs)
    w, c, lv, _ = polish(param, theta.weights, theta.centers, log_var, polish_iterations)
    candidate = normalized_model(param, w, c, lv)
    # the joint polish fits free weights, so renormalizing can undo its gain
    for model in (candidate, _simplex_polish(param, candidate, polish_iterations)):
        c_model = cost(model, z, freqs)
        if c_model <= final_cost:
            theta, final_cost = model, c_model
    return theta, final_cost


def _evolve(param, freqs, opts, gopts, rng):
    """One population run; returns ``(best, best_cost, trace, population_best)``."""
    P, K, d, G = gopts.population_size, opts.K, opts.d, gopts.generations
    lo_c, hi_c = opts.box_lower, opts.box_upper
    lo_v, hi_v = param.log_var_lower, param.log_var_upper
    width_c = hi_c - lo_c
    width_v = hi_v - lo_v

    pop = _Population(
        np.zeros((P, K)),
        rng.uniform(lo_c, hi_c, size=(P, K, d)),
        rng.uniform(lo_v, hi_v, size=(P, K, d)) if param.gaussian else None,
    )
    costs = population_costs(pop, param.z, freqs)
    best_i = int(np.argmin(costs))
    best_cost, best = float(costs[best_i]), pop.take([best_i])
    trace = [(0, best_cost)]
    population_best = [best_cost]

    n_children = P - gopts.elitism_count
    n_pairs = (n_children + 1) // 2
    for gen in range(1, G + 1):
        if best_cost == 0.0:
            break
        frac = (gen - 1) / max(G - 1, 1)
        scale = gopts.mutation_scale * (1.0 - 0.99 * frac)

        order = np.argsort(costs, kind="stable")
        elites = pop.take(order[:gopts.elitism_count])
        if n_children > 0:
            # fitness-proportional selection, computed in log-space
            log_fit = -0.5 * gopts.gamma * np.log(np.maximum(costs, np.finfo(float).tiny))
            p = np.exp(log_fit - log_fit.max())
            p /= p.sum()
            parents = rng.choice(P, size=(n_pairs, 2), p=p)
            a, b = pop.take(parents[:, 0]), pop.take(parents[:, 1])
            b = _align(a, b)
            do_cross = rng.random(n_pairs) < gopts.crossover_rate
            swap = (rng.random((n_pairs, K)) < 0.5) & do_cross[:, None]

            def cross(x, y):
                s = swap.reshape(swap.shape + (1,) * (x.ndim - 2))
                return np.where(s, y, x), np.where(s, x, y)

            lw1, lw2 = cross(a.logw, b.logw)
            c1, c2 = cross(a.centers, b.centers)
            children = _Population(np.concatenate([lw1, lw2])[:n_children],
                                   np.concatenate([c1, c2])[:n_children], None)
            if param.gaussian:
                v1, v2 = cross(a.log_var, b.log_var)
                children.log_var = np.concatenate([v1, v2])[:n_children]

            if scale > 0:
                children.logw = np.clip(
                    children.logw + rng.normal(0.0, scale * LOG_WEIGHT_WIDTH, children.logw.shape),
                    -LOG_WEIGHT_BOUND, LOG_WEIGHT_BOUND)
                children.centers = np.clip(
                    children.centers + rng.normal(0.0, 1.0, children.centers.shape) * (scale * width_c),
                    lo_c, hi_c)
                if param.gaussian:
                    children.log_var = np.clip(
                        children.log_var + rng.normal(0.0, 1.0, children.log_var.shape) * (scale * width_v),
                        lo_v, hi_v)
            pop = _Population.concat(elites, children)
        else:
            pop = elites
        costs = population_costs(pop, param.z, freqs)
        i = int(np.argmin(costs))
        population_best.append(float(costs[i]))
        if costs[i] < best_cost:
            best_cost, best = float(costs[i]), pop.take([i])
        trace.append((gen, best_cost))
    return best, best_cost, trace, population_best

def geneticl(z: Sketch, freqs: FrequencyMatrix, opts: DecodeOptions,
             gopts: GeneticOptions | None = None) -> DecodeResult:
    """Evolve populations of K-atom mixtures toward low sketch cost.

    Per generation: fitness-proportional parent selection, atom-swap
    crossover with probability ``crossover_rate``, Gaussian mutation of
    every continuous parameter (clamped to the search box), and
    ``elitism_count`` best chromosomes copied unchanged. With ``islands > 1``
    that many independent populations of ``population_size`` evolve from
    separate seeds. The best chromosome each island ever saw is refined with
    an NNLS weight solve and a joint local polish, renormalized, and refined
    once more with the weights held on the simplex; each stage is kept only
    if it lowers the cost, and the lowest-cost island wins.
    ``cost_trace`` holds the best-so-far cost over all islands per generation.
    """
    gopts = gopts or GeneticOptions()
    _check_sketch(z, freqs)
    if opts.d != freqs.d:
        raise DecodeError(f"search box has d={opts.d} but frequencies have d={freqs.d}")
    start = time.perf_counter()
    seed = opts.seed if gopts.seed is None else gopts.seed
    param = Parameterization(opts, z, freqs)
    runs = []
    for i in range(gopts.islands):
        rng = make_rng(seed, "geneticl") if gopts.islands == 1 else make_rng(seed, "geneticl", "island", i)
        runs.append(_evolve(param, freqs, opts, gopts, rng))

    # islands that hit an exact fit stop early; carry their last value forward
    n_gen = max(len(r[2]) for r in runs)
    trace = [(g, min(r[2][min(g, len(r[2]) - 1)][1] for r in runs)) for g in range(n_gen)]
    population_best = [min(r[3][g] for r in runs if g < len(r[3])) for g in range(n_gen)]

    theta, final_cost = None, np.inf
    for best, _, _, _ in runs:
        model, c_model = _finish(param, best, z, freqs, opts.polish_iterations)
        if c_model < final_cost:
            theta, final_cost = model, c_model
    return DecodeResult(
        theta=theta,
        final_cost=final_cost,
        cost_trace=trace,
        seed=seed,
        elapsed=time.perf_counter() - start,
        decoder="geneticl",
        extra={"population_best": population_best, "best_fitness_cost": min(r[1] for r in runs)},
    )
