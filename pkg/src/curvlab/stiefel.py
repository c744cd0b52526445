"""Batched multistart minimization over orthonormal k-frames.

Frames are stored row-wise: ``X[b]`` is a ``k x m`` matrix with orthonormal
rows. Each iteration takes a Riemannian gradient step with Armijo
backtracking and retracts by the polar factor, so every iterate is an
orthonormal frame to machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

# objective(X, idx) -> (values, euclidean_grads) for the starts ``idx`` of the batch
Objective = Callable[[np.ndarray, np.ndarray], "tuple[np.ndarray, np.ndarray]"]


@dataclass
class StiefelResult:
    X: np.ndarray
    values: np.ndarray
    grad_norms: np.ndarray
    converged: np.ndarray
    iterations: int


def start_rng(seed: int, index: int) -> np.random.Generator:
    """Per-start generator; independent of how starts are scheduled."""
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, int(index)])


def random_frames(k: int, m: int, seed: int, count: int, offset: int = 0) -> np.ndarray:
    out = np.empty((count, k, m))
    for s in range(count):
        g = start_rng(seed, offset + s).standard_normal((m, k))
        q, r = np.linalg.qr(g)
        out[s] = (q * np.sign(np.diag(r))).T
    return out


def polar(Y: np.ndarray) -> np.ndarray:
    U, _, Vt = np.linalg.svd(Y, full_matrices=False)
    return U @ Vt


def tangent(X: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Project a Euclidean gradient onto the tangent space at X (embedded metric)."""
    GX = G @ X.transpose(0, 2, 1)
    return G - 0.5 * (GX + GX.transpose(0, 2, 1)) @ X


def minimize(
    objective: Objective,
    X0: np.ndarray,
    *,
    max_iter: int = 3000,
    gtol: float = 1e-7,
    inner: Optional[Callable[[np.ndarray, np.ndarray], None]] = None,
    step0: float = 0.1,
    ftol: float = 1e-13,
    window: int = 25,
    scale: float = 1.0,
) -> StiefelResult:
    """Minimize each start independently.

    ``inner(X, idx)`` is called before every gradient evaluation; block
    coordinate methods use it to update auxiliary variables held by the
    objective for the starts ``idx``.
    """
    X = polar(np.array(X0, dtype=float))
    B = X.shape[0]
    t = np.full(B, step0)
    prev_X = np.zeros_like(X)
    prev_xi = np.zeros_like(X)
    have_prev = np.zeros(B, dtype=bool)
    active = np.ones(B, dtype=bool)
    converged = np.zeros(B, dtype=bool)
    gtol = gtol * scale
    ftol = ftol * scale
    history = np.full((window, B), np.inf)
    it = 0
    for it in range(1, max_iter + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        Xa = X[idx]
        if inner is not None:
            inner(Xa, idx)
        fa, G = objective(Xa, idx)
        xa = tangent(Xa, G)
        g2 = np.sum(xa * xa, axis=(1, 2))
        old = history[it % window, idx]
        history[it % window, idx] = fa
        done = (g2 < gtol * gtol) | (old - fa < ftol)
        converged[idx[done]] = True
        active[idx[done]] = False
        keep = ~done
        if not keep.any():
            break
        idx, Xa, xa, fa, g2 = idx[keep], Xa[keep], xa[keep], fa[keep], g2[keep]
        ts = np.minimum(2.0 * t[idx], 10.0)
        # Barzilai-Borwein step where the previous iterate is available
        hp = have_prev[idx]
        if hp.any():
            sv = Xa[hp] - prev_X[idx[hp]]
            yv = xa[hp] - prev_xi[idx[hp]]
            sy = np.abs(np.sum(sv * yv, axis=(1, 2)))
            ss = np.sum(sv * sv, axis=(1, 2))
            bb = np.where(sy > 1e-300, ss / np.maximum(sy, 1e-300), ts[hp])
            ts[hp] = np.clip(bb, 1e-8, 10.0)
        prev_X[idx] = Xa
        prev_xi[idx] = xa
        have_prev[idx] = True
        accepted = np.zeros(idx.size, dtype=bool)
        Xnew = Xa.copy()
        for _ in range(40):
            todo = np.flatnonzero(~accepted)
            if todo.size == 0:
                break
            Xt = polar(Xa[todo] - ts[todo, None, None] * xa[todo])
            ft, _ = objective(Xt, idx[todo], grad=False)
            ok = ft <= fa[todo] - 1e-4 * ts[todo] * g2[todo]
            Xnew[todo[ok]] = Xt[ok]
            accepted[todo[ok]] = True
            ts[todo[~ok]] *= 0.5
        # a failed line search means the start sits at a numerically flat point
        stuck = ~accepted
        if stuck.any():
            converged[idx[stuck]] = g2[stuck] < 1e6 * gtol * gtol
            active[idx[stuck]] = False
        X[idx] = Xnew
        t[idx] = ts
    everyone = np.arange(B)
    if inner is not None:
        inner(X, everyone)
    f, G = objective(X, everyone)
    xi = tangent(X, G)
    gnorm = np.sqrt(np.sum(xi * xi, axis=(1, 2)))
    converged |= gnorm < gtol
    return StiefelResult(X=X, values=f, grad_norms=gnorm, converged=converged, iterations=it)
