"""Inner solvers shared by the decoders: nonnegative least squares for the
mixture weights, and a box-constrained projected-gradient minimizer."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DecodeError

NNLS_MAX_ITER = 10_000
NNLS_KKT_TOL = 1e-9

ARMIJO_C = 1e-4
DEFAULT_MAX_ITER = 300
PG_TOL = 1e-8
# stop when the objective falls by less than STALL_RTOL * (1 + |f|) over STALL_WINDOW iterations
STALL_WINDOW = 10
STALL_RTOL = 1e-10
_MAX_HALVINGS = 80


def stack_complex(a: np.ndarray) -> np.ndarray:
    """Complex array ``(..., m)`` -> real ``(..., 2m)`` with (re, im) interleaved."""
    a = np.ascontiguousarray(a, dtype=np.complex128)
    return a.view(np.float64)


def nnls(A, b, max_iter=NNLS_MAX_ITER, tol=NNLS_KKT_TOL):
    """Solve ``min ||A x - b||_2`` subject to ``x >= 0`` (Lawson-Hanson).

    The KKT tolerance is relative to ``max(1, ||A^T b||_inf)``.
    Raises :class:`DecodeError` if ``max_iter`` outer iterations do not
    reach it.
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n = A.shape[1]
    scale = max(1.0, float(np.max(np.abs(A.T @ b))) if n else 1.0)
    thresh = tol * scale
    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    w = A.T @ b
    for _ in range(max_iter):
        candidates = ~passive & (w > thresh)
        if not candidates.any():
            return x
        j = int(np.argmax(np.where(candidates, w, -np.inf)))
        passive[j] = True
        for _inner in range(3 * n + 1):
            s = np.zeros(n)
            s[passive] = np.linalg.lstsq(A[:, passive], b, rcond=None)[0]
            blocking = passive & (s <= 0)
            if not blocking.any():
                x = s
                break
            alpha = np.min(x[blocking] / (x[blocking] - s[blocking]))
            x = x + alpha * (s - x)
            passive &= x > thresh * 1e-3
            x[~passive] = 0.0
        else:
            raise DecodeError("NNLS inner loop did not terminate")
        w = A.T @ (b - A @ x)
        # a column entering with a nonpositive LS coefficient would loop
        if not passive[j]:
            w[j] = min(w[j], 0.0)
    raise DecodeError(f"NNLS exceeded {max_iter} iterations")


def nnls_weights(atom_sketches, z) -> np.ndarray:
    """Nonnegative weights minimizing ``||z - sum_k w_k a_k||_2^2``.

    ``atom_sketches`` is a ``(K', m)`` complex array (or a sequence of
    :class:`~cl_landscape.sketch.Sketch`); ``z`` is a complex vector or a
    Sketch. Complex entries are treated as stacked reals.
    """
    if hasattr(z, "values"):
        z = z.values
    if not isinstance(atom_sketches, np.ndarray):
        atom_sketches = np.array([getattr(a, "values", a) for a in atom_sketches])
    atoms = np.atleast_2d(atom_sketches)
    if atoms.shape[0] < 1:
        raise DecodeError("nnls_weights needs at least one atom")
    A = stack_complex(atoms).T
    b = stack_complex(np.asarray(z))
    return nnls(A, b)


@dataclass
class MinimizeResult:
    x: np.ndarray
    fun: float
    nit: int
    history: list = field(default_factory=list)


def local_minimize(fun, x0, lower, upper, max_iter=DEFAULT_MAX_ITER, tol=PG_TOL,
                   scale=None) -> MinimizeResult:
    """Projected-gradient descent on the box ``[lower, upper]``.

    ``fun(x)`` must return ``(value, gradient)``. Each iteration backtracks
    (halving, Armijo constant 1e-4) from a trial step that is 1.0 on the
    first iteration and afterwards alternates the two Barzilai-Borwein step
    lengths (``s.s/s.y`` and ``s.y/y.y``). Stops when the
    projected-gradient norm drops to ``tol * (1 + |f|)``, when the last
    ``STALL_WINDOW`` iterations together reduced the objective by less than
    ``STALL_RTOL * (1 + |f|)``, or after ``max_iter`` iterations. The
    objective never increases along the returned ``history``.

    ``scale`` (positive, per coordinate) runs the same iteration in the
    variables ``y = x / scale``; the box stays a box, so the projection is
    unchanged in kind. Roughly ``1/sqrt(diag(Hessian))`` is a good choice.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    if scale is not None:
        scale = np.asarray(scale, dtype=np.float64)
        inner = fun

        def fun(y):
            f, g = inner(y * scale)
            return f, g * scale

        res = local_minimize(fun, x0 / scale, lower / scale, upper / scale, max_iter, tol)
        res.x = np.clip(res.x * scale, lower, upper)
        return res

    x = np.clip(x0, lower, upper)
    f, g = fun(x)
    history = [f]
    step = 1.0
    nit = 0
    for nit in range(1, max_iter + 1):
        pg = np.clip(x - g, lower, upper) - x
        if np.linalg.norm(pg) <= tol * (1.0 + abs(f)):
            nit -= 1
            break
        t = step
        for _ in range(_MAX_HALVINGS):
            x_new = np.clip(x - t * g, lower, upper)
            dx = x_new - x
            decrease = float(g @ dx)
            if decrease >= 0:
                t *= 0.5
                continue
            f_new, g_new = fun(x_new)
            if f_new <= f + ARMIJO_C * decrease:
                break
            t *= 0.5
        else:
            nit -= 1
            break
        s = dx
        y = g_new - g
        sy = float(s @ y)
        if sy > 0:
            step = float(s @ s) / sy if nit % 2 == 0 else sy / float(y @ y)
        else:
            step = 1.0
        step = min(max(step, 1e-12), 1e12)
        x, f, g = x_new, f_new, g_new
        history.append(f)
        if len(history) > STALL_WINDOW and history[-1 - STALL_WINDOW] - f <= STALL_RTOL * (1.0 + abs(f)):
            break
    return MinimizeResult(x, f, nit, history)
