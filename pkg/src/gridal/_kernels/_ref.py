"""Reference implementations of the hot kernels (numpy / pure Python).

These carry the exact same contracts as the compiled extension in
``_core.pyx`` and serve as the fallback when the extension is unavailable.
The Ising sweep consumes its uniforms in the same order as the compiled
version, so the two backends produce bit-identical lattices.
"""
from __future__ import annotations

import math

import numpy as np

__all__ = ["bnn_loglik_grad", "ising_run", "mlp_forward"]

LOG_2PI = math.log(2.0 * math.pi)


def _layer_slices(widths: np.ndarray):
    """Yield (W, b) index ranges for the flat parameter layout.

    Layout per layer: row-major weight matrix (fan_in, fan_out) followed by
    the fan_out bias entries.
    """
    offset = 0
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        w_end = offset + fan_in * fan_out
        yield offset, w_end, fan_in, fan_out
        offset = w_end + fan_out


def n_params(widths) -> int:
    widths = np.asarray(widths, dtype=np.int64)
    return int(sum((i + 1) * o for i, o in zip(widths[:-1], widths[1:])))


def _forward_single(X: np.ndarray, widths: np.ndarray, w: np.ndarray) -> np.ndarray:
    a = X
    n_layers = len(widths) - 1
    for layer, (lo, w_end, fan_in, fan_out) in enumerate(_layer_slices(widths)):
        W = w[lo:w_end].reshape(fan_in, fan_out)
        b = w[w_end : w_end + fan_out]
        z = a @ W + b
        a = np.tanh(z) if layer < n_layers - 1 else z
    return a[:, 0]


def mlp_forward(X, widths, w) -> np.ndarray:
    """Tanh MLP with a linear scalar output.

    ``w`` may be a single flat parameter vector (returns shape (n,)) or a
    stack of them (returns shape (n_draws, n)).
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    widths = np.asarray(widths, dtype=np.int64)
    w = np.asarray(w, dtype=np.float64)
    if w.ndim == 1:
        return _forward_single(X, widths, w)
    return np.stack([_forward_single(X, widths, wi) for wi in w])


def bnn_loglik_grad(X, y, widths, w, sigma: float):
    """Gaussian log likelihood of the MLP regression and its weight gradient.

    Returns (loglik, grad_w, ssr) where ssr is the sum of squared residuals.
    Non-finite results are the caller's concern (they signal divergence).
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    widths = np.asarray(widths, dtype=np.int64)
    w = np.asarray(w, dtype=np.float64)
    n = X.shape[0]
    n_layers = len(widths) - 1

    acts = [X]
    a = X
    for layer, (lo, w_end, fan_in, fan_out) in enumerate(_layer_slices(widths)):
        W = w[lo:w_end].reshape(fan_in, fan_out)
        b = w[w_end : w_end + fan_out]
        z = a @ W + b
        a = np.tanh(z) if layer < n_layers - 1 else z
        acts.append(a)

    resid = y - acts[-1][:, 0]
    ssr = float(resid @ resid)
    loglik = -0.5 * n * LOG_2PI - n * math.log(sigma) - ssr / (2.0 * sigma * sigma)

    grad = np.zeros_like(w)
    delta = (resid / (sigma * sigma))[:, None]
    for layer, (lo, w_end, fan_in, fan_out) in reversed(list(enumerate(_layer_slices(widths)))):
        W = w[lo:w_end].reshape(fan_in, fan_out)
        a_in = acts[layer]
        grad[lo:w_end] = (a_in.T @ delta).ravel()
        grad[w_end : w_end + fan_out] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ W.T) * (1.0 - a_in * a_in)
    return loglik, grad, ssr


def ising_run(spins, p_table, dE_table, u, e0: float, n_warmup: int):
    """Sequential-order Metropolis sweeps on a periodic square lattice.

    ``spins`` (int8, L x L) is updated in place.  ``p_table``/``dE_table``
    are (2, 5) lookup tables indexed by (spin sign, neighbor sum):
    row (s+1)//2, column (nn+4)//2.  ``u`` holds one uniform per site per
    sweep.  Sweeps with index >= n_warmup accumulate |m|, E and E^2.

    Returns (sum_abs_m, sum_e, sum_e2, n_measured).
    """
    L = spins.shape[0]
    n_sites = L * L
    total_sweeps = u.shape[0]
    grid = [list(map(int, row)) for row in spins]
    p = [list(map(float, row)) for row in p_table]
    dE = [list(map(float, row)) for row in dE_table]

    e = float(e0)
    m = sum(sum(row) for row in grid)
    sum_abs_m = 0.0
    sum_e = 0.0
    sum_e2 = 0.0
    n_meas = 0

    for s in range(total_sweeps):
        u_s = u[s].ravel().tolist()
        k = 0
        for i in range(L):
            row = grid[i]
            up = grid[i - 1 if i > 0 else L - 1]
            down = grid[i + 1 if i < L - 1 else 0]
            for j in range(L):
                sp = row[j]
                nn = (
                    up[j]
                    + down[j]
                    + row[j - 1 if j > 0 else L - 1]
                    + row[j + 1 if j < L - 1 else 0]
                )
                si = (sp + 1) // 2
                ci = (nn + 4) // 2
                if u_s[k] < p[si][ci]:
                    row[j] = -sp
                    e += dE[si][ci]
                    m -= 2 * sp
                k += 1
        if s >= n_warmup:
            sum_abs_m += abs(m) / n_sites
            sum_e += e
            sum_e2 += e * e
            n_meas += 1

    spins[:, :] = np.asarray(grid, dtype=np.int8)
    return sum_abs_m, sum_e, sum_e2, n_meas
