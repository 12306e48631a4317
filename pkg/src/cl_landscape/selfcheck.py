"""Fast invariant checks behind ``cl-landscape selfcheck``."""

from __future__ import annotations

import numpy as np

from ._rng import make_rng
from .decoders.optim import nnls, stack_complex
from .model import MixtureModel, ModelKind
from .sketch import (
    atom_correlation_arrays,
    cost_and_grad_arrays,
    draw_frequencies,
    empirical_sketch,
    merge_sketches,
    model_sketch,
)

GRAD_RTOL = 1e-5
MERGE_TOL = 1e-12


def _fd(fun, x, h=1e-6):
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h * max(1.0, abs(x[i]))
        g[i] = (fun(x + e) - fun(x - e)) / (2 * e[i])
    return g


def _rel_err(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12))


def check_gradients(seed, repetitions):
    """Analytic cost and correlation gradients against central differences."""
    rng = make_rng(seed, "selfcheck", "grad")
    worst = 0.0
    for rep in range(repetitions):
        K, d, m = int(rng.integers(1, 4)), int(rng.integers(1, 4)), int(rng.integers(5, 30))
        freqs = draw_frequencies(m, d, "fg", 1.0, seed + rep)
        z = rng.normal(size=m) + 1j * rng.normal(size=m)
        w = rng.uniform(0.1, 1.0, K)
        c = rng.normal(size=(K, d))
        v = rng.uniform(0.1, 1.0, (K, d)) if rep % 2 else None

        def f_flat(x):
            return cost_and_grad_arrays(x[:K], x[K:K + K * d].reshape(K, d),
                                        None if v is None else x[K + K * d:].reshape(K, d), z, freqs)[0]

        x = np.concatenate([w, c.ravel()] + ([] if v is None else [v.ravel()]))
        _, gw, gc, gv = cost_and_grad_arrays(w, c, v, z, freqs)
        g = np.concatenate([gw, gc.ravel()] + ([] if v is None else [gv.ravel()]))
        worst = max(worst, _rel_err(g, _fd(f_flat, x)))

        vk = None if v is None else v[0]

        def corr(y):
            return atom_correlation_arrays(y[:d], None if vk is None else y[d:], z, freqs)[0]

        y = np.concatenate([c[0]] + ([] if vk is None else [vk]))
        _, gc1, gv1 = atom_correlation_arrays(c[0], vk, z, freqs)
        g1 = np.concatenate([gc1] + ([] if vk is None else [gv1]))
        worst = max(worst, _rel_err(g1, _fd(corr, y)))
    return worst <= GRAD_RTOL, f"worst relative error {worst:.2e} (tolerance {GRAD_RTOL:g})"


def check_merge(seed, repetitions):
    """Chunked sketches merge back to the whole-data sketch."""
    rng = make_rng(seed, "selfcheck", "merge")
    worst = 0.0
    for rep in range(repetitions):
        n, d = int(rng.integers(20, 300)), int(rng.integers(1, 5))
        X = rng.normal(size=(n, d))
        freqs = draw_frequencies(16, d, "ar", 1.0, seed + rep)
        cuts = np.sort(rng.choice(np.arange(1, n), size=6, replace=False))
        merged = None
        for part in np.split(X, cuts):
            s = empirical_sketch(part, freqs)
            merged = s if merged is None else merge_sketches(merged, s)
        worst = max(worst, float(np.max(np.abs(merged.values - empirical_sketch(X, freqs).values))))
    return worst <= MERGE_TOL, f"worst entry deviation {worst:.2e} (tolerance {MERGE_TOL:g})"


def check_sketch_consistency(seed, repetitions, n=20_000):
    """Empirical sketch of GMM samples within 5/sqrt(n) of the closed form."""
    rng = make_rng(seed, "selfcheck", "clt")
    tol = 5.0 / np.sqrt(n)
    bad = 0
    for rep in range(repetitions):
        K, d = 3, 5
        theta = MixtureModel(ModelKind.GAUSSIAN, rng.dirichlet(np.ones(K)), rng.normal(0, 3, (K, d)),
                             rng.uniform(0.5, 2.0, (K, d)))
        labels = rng.choice(K, size=n, p=theta.weights)
        X = theta.centers[labels] + np.sqrt(theta.variances[labels]) * rng.standard_normal((n, d))
        freqs = draw_frequencies(50, d, "fg", 1.0, seed + rep)
        err = np.max(np.abs(empirical_sketch(X, freqs).values - model_sketch(theta, freqs).values))
        bad += err > tol
    allowed = max(1, repetitions // 100)
    return bad <= allowed, f"{bad}/{repetitions} repetitions above {tol:.3g}"


def check_nnls(seed, repetitions):
    """NNLS solutions satisfy the KKT conditions."""
    rng = make_rng(seed, "selfcheck", "nnls")
    worst = 0.0
    for _ in range(repetitions):
        A = stack_complex(rng.normal(size=(3, 20)) + 1j * rng.normal(size=(3, 20))).T
        b = rng.normal(size=40)
        x = nnls(A, b)
        grad = A.T @ (A @ x - b)
        viol = max(float(-x.min()), float(np.max(np.abs(grad[x > 0]), initial=0.0)),
                   float(-grad[x == 0].min(initial=0.0)))
        worst = max(worst, viol)
    return worst <= 1e-8, f"worst KKT violation {worst:.2e}"


CHECKS = [
    ("gradients", check_gradients),
    ("merge", check_merge),
    ("sketch-consistency", check_sketch_consistency),
    ("nnls-kkt", check_nnls),
]


def run_selfcheck(seed=0, repetitions=20):
    """Run every check; returns ``[(name, passed, detail), ...]``."""
    out = []
    for name, check in CHECKS:
        ok, detail = check(seed, repetitions)
        out.append((name, bool(ok), detail))
    return out
