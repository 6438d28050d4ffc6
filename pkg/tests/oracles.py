"""Slow, independent reference implementations used only by the tests."""

from __future__ import annotations

import math

import numpy as np


def jacobi_eigh(a: np.ndarray, tol: float = 1e-15, max_sweeps: int = 100):
    """Cyclic Jacobi eigensolver for a real symmetric matrix (no LAPACK)."""
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    for _ in range(max_sweeps):
        off = math.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off <= tol * max(np.linalg.norm(np.diag(a)), 1e-300):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if a[p, q] == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2 * a[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1))
                c = 1 / math.sqrt(t * t + 1)
                s = t * c
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p], a[:, q] = c * ap - s * aq, s * ap + c * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :], a[q, :] = c * ap - s * aq, s * ap + c * aq
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p], v[:, q] = c * vp - s * vq, s * vp + c * vq
    return np.diag(a).copy(), v


def hermitian_principal(h: np.ndarray):
    """Largest eigenpair of a complex Hermitian matrix via its real 2N embedding.

    ``[[Re, -Im], [Im, Re]]`` has every eigenvalue of ``h`` twice; an eigenvector
    ``[x; y]`` corresponds to ``x + 1j*y``.
    """
    h = np.asarray(h, dtype=complex)
    n = h.shape[0]
    big = np.block([[h.real, -h.imag], [h.imag, h.real]])
    vals, vecs = jacobi_eigh(big)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    w = vecs[:n, 0] + 1j * vecs[n:, 0]
    w /= np.linalg.norm(w)
    # distinct complex eigenvalues, largest and second largest
    return w, vals[0], vals[2]


def phase_align(w: np.ndarray, ref: np.ndarray) -> np.ndarray:
    return w * np.exp(-1j * np.angle(np.vdot(ref, w)))


def direct_dft(x: np.ndarray) -> np.ndarray:
    """``X[k] = sum_n x[n] exp(-2j pi n k / N)`` by explicit summation."""
    x = np.asarray(x, dtype=complex)
    n = len(x)
    out = np.zeros(n, dtype=complex)
    for k in range(n):
        for m in range(n):
            out[k] += x[m] * complex(math.cos(2 * math.pi * m * k / n),
                                     -math.sin(2 * math.pi * m * k / n))
    return out


def circular_convolution(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = len(a)
    out = np.zeros(n, dtype=complex)
    for i in range(n):
        for j in range(n):
            out[i] += a[j] * b[(i - j) % n]
    return out


def grid_music(r: np.ndarray, spacing: float, n_grid: int = 20001) -> float:
    """Grid-search MUSIC pseudo-spectrum peak, refined by golden-section search."""
    m = r.shape[0]
    vals, vecs = np.linalg.eigh((r + r.conj().T) / 2)
    en = vecs[:, : m - 1]

    def cost(theta):
        a = np.exp(2j * np.pi * spacing * np.arange(m) * np.sin(theta))
        return float(np.sum(np.abs(en.conj().T @ a) ** 2))

    grid = np.linspace(-np.pi / 2, np.pi / 2, n_grid)
    costs = [cost(t) for t in grid]
    k = int(np.argmin(costs))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, n_grid - 1)]
    g = (math.sqrt(5) - 1) / 2
    for _ in range(100):
        x1, x2 = hi - g * (hi - lo), lo + g * (hi - lo)
        if cost(x1) < cost(x2):
            hi = x2
        else:
            lo = x1
    return (lo + hi) / 2


def floyd_warshall(w: np.ndarray) -> np.ndarray:
    d = np.array(w, dtype=float)
    n = len(d)
    for k in range(n):
        d = np.minimum(d, d[:, k:k + 1] + d[k:k + 1, :])
    return d


def affine_normal_equations(chart: np.ndarray, truth: np.ndarray):
    """Solve ``(X^T X) beta = X^T Y`` with ``X = [chart, 1]``."""
    x = np.column_stack([chart, np.ones(len(chart))])
    beta = np.linalg.solve(x.T @ x, x.T @ truth)
    pred = x @ beta
    return beta[:2].T, beta[2], float(np.mean(np.linalg.norm(pred - truth, axis=1)))


def numeric_grad(f, params: list[np.ndarray], h: float = 1e-6) -> list[np.ndarray]:
    """Central finite differences of scalar ``f()`` w.r.t. each array, in place."""
    grads = []
    for p in params:
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            old = p[idx]
            p[idx] = old + h
            up = f()
            p[idx] = old - h
            down = f()
            p[idx] = old
            g[idx] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def steering(n: int, spacing: float, theta: float) -> np.ndarray:
    return np.exp(2j * np.pi * spacing * np.arange(n) * np.sin(theta))
