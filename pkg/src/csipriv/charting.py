"""Dissimilarity-based channel charting.

Pipeline: power-profile cosine dissimilarity between feature vectors, fused
with a timestamp bound, corrected by shortest paths over a k-nearest-neighbor
graph, then a forward charting network trained through a Siamese pair loss.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .features import power_profile
from .mlp import (MlpModel, RmsProp, forward_cached, backward, fit_standardization,
                  flat_grads, forward, init_mlp)

log = logging.getLogger(__name__)


@dataclass
class ChartConfig:
    hidden: tuple[int, ...] = (128, 64)
    learning_rate: float = 1e-3
    lr_decay: float = 0.9
    epochs: int = 30
    pairs_per_epoch: int | None = 20_000
    batch_pairs: int = 256
    monitor_pairs: int = 2000
    single_precision: bool = True
    beta: float | None = None
    k_neighbors: int = 10
    t_thresh: float = 1.0
    v_max: float = 1.5
    seed: int = 0

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if (self.learning_rate <= 0 or self.epochs < 1 or self.batch_pairs < 1
                or self.k_neighbors < 1 or not 0 < self.lr_decay <= 1
                or self.monitor_pairs < 1):
            raise ValueError(f"invalid chart configuration {self}")


@dataclass
class ChannelChart:
    positions: np.ndarray
    model: MlpModel
    beta: float


@dataclass(frozen=True)
class AffineFit:
    matrix: np.ndarray
    offset: np.ndarray
    mae: float

    def apply(self, chart: np.ndarray) -> np.ndarray:
        return np.asarray(chart) @ self.matrix.T + self.offset


def _cosine_dissimilarity(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    num = p @ q.T
    den = np.linalg.norm(p, axis=-1)[:, None] * np.linalg.norm(q, axis=-1)[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        d = 1.0 - num / den
    d = np.where(den > 0, d, 1.0)
    return np.clip(d, 0.0, 1.0)


def adp_dissimilarity(f_i: np.ndarray, f_j: np.ndarray, antennas_per_array: int) -> float:
    """``1 - <P_i, P_j> / (|P_i| |P_j|)`` over the per-(array, tap, antenna) powers."""
    f_i, f_j = np.asarray(f_i), np.asarray(f_j)
    if f_i.shape != f_j.shape:
        raise ValueError("feature vectors differ in length")
    p = power_profile(f_i, antennas_per_array)[None]
    q = power_profile(f_j, antennas_per_array)[None]
    return float(_cosine_dissimilarity(p, q)[0, 0])


def adp_dissimilarity_matrix(features: np.ndarray, antennas_per_array: int) -> np.ndarray:
    p = power_profile(np.asarray(features), antennas_per_array)
    d = _cosine_dissimilarity(p, p)
    d = (d + d.T) / 2
    np.fill_diagonal(d, 0.0)
    return d


def fuse_with_time(d_adp, dt, v_max: float, t_thresh: float, beta_t: float):
    """Bound the dissimilarity by the distance reachable within ``dt`` when ``dt <= t_thresh``."""
    d_adp = np.asarray(d_adp, dtype=float)
    dt = np.asarray(dt, dtype=float)
    if np.any(dt < 0):
        raise ValueError("dt must be non-negative")
    bound = beta_t * v_max * dt
    out = np.where(dt <= t_thresh, np.minimum(d_adp, bound), d_adp)
    return out if out.ndim else float(out)


def calibrate_time_scale(d_adp: np.ndarray, timestamps: np.ndarray, v_max: float) -> float:
    """``beta_t`` matching time and dissimilarity scales between consecutive records."""
    t = np.asarray(timestamps, dtype=float)
    dt = np.diff(t)
    steps = np.diagonal(d_adp, offset=1)
    ok = dt > 0
    if not np.any(ok):
        return 1.0
    ratio = steps[ok] / (v_max * dt[ok])
    ratio = ratio[ratio > 0]
    return float(np.median(ratio)) if len(ratio) else 1.0


def fused_dissimilarity(features: np.ndarray, timestamps: np.ndarray, antennas_per_array: int,
                        v_max: float = 1.5, t_thresh: float = 1.0) -> np.ndarray:
    d = adp_dissimilarity_matrix(features, antennas_per_array)
    t = np.asarray(timestamps, dtype=float)
    beta_t = calibrate_time_scale(d, t, v_max)
    dt = np.abs(t[:, None] - t[None, :])
    fused = fuse_with_time(d, dt, v_max, t_thresh, beta_t)
    fused = (fused + fused.T) / 2
    np.fill_diagonal(fused, 0.0)
    return fused


def geodesic(d: np.ndarray, k: int = 10) -> np.ndarray:
    """All-pairs shortest paths over the symmetric k-nearest-neighbor graph.

    Pairs in different connected components get 1.5 times the largest finite
    geodesic distance.
    """
    d = np.asarray(d, dtype=float)
    n = len(d)
    if k < 1 or k >= n:
        raise ValueError(f"k must lie in [1, {n - 1}], got {k}")
    masked = d.copy()
    np.fill_diagonal(masked, np.inf)
    nbrs = np.argpartition(masked, k - 1, axis=1)[:, :k]
    rows = np.repeat(np.arange(n), k)
    cols = nbrs.reshape(-1)
    # explicit zeros would read as missing edges in the sparse graph
    weights = np.maximum(d[rows, cols], 1e-300)
    graph = csr_matrix((weights, (rows, cols)), shape=(n, n))
    graph = graph.maximum(graph.T)
    geo = dijkstra(graph, directed=False)
    finite = np.isfinite(geo)
    if not finite.all():
        geo[~finite] = 1.5 * geo[finite].max()
    geo = np.minimum(geo, geo.T)
    np.fill_diagonal(geo, 0.0)
    return geo


def siamese_loss(z_i: np.ndarray, z_j: np.ndarray, d: np.ndarray, beta: float):
    """``sum (d - |z_i - z_j|)^2 / (d + beta)`` and its gradients w.r.t. ``z_i``, ``z_j``."""
    diff = z_i - z_j
    dist = np.linalg.norm(diff, axis=-1)
    resid = d - dist
    loss = float(np.sum(resid ** 2 / (d + beta)))
    safe = np.where(dist > 0, dist, 1.0)
    coef = -2.0 * resid / (d + beta) / safe
    g_i = coef[:, None] * diff
    return loss, g_i, -g_i


def siamese_value_and_grad(model: MlpModel, x_i: np.ndarray, x_j: np.ndarray,
                           d: np.ndarray, beta: float):
    """Loss and parameter gradients with both branches sharing ``model``."""
    n = len(x_i)
    out, cache = forward_cached(model, np.concatenate([x_i, x_j]))
    loss, g_i, g_j = siamese_loss(out[:n], out[n:], d, beta)
    return loss, backward(model, cache, np.concatenate([g_i, g_j]))


def _pair_batches(rng, n: int, config: ChartConfig):
    iu, ju = np.triu_indices(n, k=1)
    total = len(iu)
    if config.pairs_per_epoch is None or config.pairs_per_epoch >= total:
        order = rng.permutation(total)
        i, j = iu[order], ju[order]
    else:
        i = rng.integers(0, n, config.pairs_per_epoch)
        j = (i + rng.integers(1, n, config.pairs_per_epoch)) % n
    for start in range(0, len(i), config.batch_pairs):
        yield i[start:start + config.batch_pairs], j[start:start + config.batch_pairs]


def train_chart(features: np.ndarray, d_geo: np.ndarray,
                config: ChartConfig | None = None) -> ChannelChart:
    config = config or ChartConfig()
    x = np.asarray(features, dtype=float)
    d_geo = np.asarray(d_geo, dtype=float)
    if d_geo.shape != (len(x), len(x)):
        raise ValueError("dissimilarity matrix does not match the number of feature rows")
    beta = config.beta if config.beta is not None else 0.1 * float(
        np.median(d_geo[np.triu_indices(len(x), k=1)]))
    model = init_mlp([x.shape[1], *config.hidden, 2], config.seed)
    fit_standardization(model, x)
    dtype = np.float32 if config.single_precision else np.float64
    xs = ((x - model.feature_mean) / model.feature_std).astype(dtype)
    d_geo = d_geo.astype(dtype)
    plain = MlpModel(model.widths, [w.astype(dtype) for w in model.weights],
                     [b.astype(dtype) for b in model.biases], model.activations)
    params = plain.parameters()
    opt = RmsProp(params, config.learning_rate)
    rng = np.random.default_rng(config.seed)
    # fixed pair sample for a noise-free per-epoch loss
    mi = rng.integers(0, len(xs), config.monitor_pairs)
    mj = (mi + rng.integers(1, len(xs), config.monitor_pairs)) % len(xs)
    lr = config.learning_rate
    for epoch in range(config.epochs):
        for i, j in _pair_batches(rng, len(xs), config):
            loss, (gw, gb) = siamese_value_and_grad(plain, xs[i], xs[j], d_geo[i, j], beta)
            if not np.isfinite(loss):
                raise FloatingPointError(f"non-finite Siamese loss at epoch {epoch}")
            opt.step(params, flat_grads(gw, gb), lr)
        z = forward_cached(plain, xs)[0]
        model.loss_history.append(siamese_loss(z[mi], z[mj], d_geo[mi, mj], beta)[0]
                                  / config.monitor_pairs)
        lr *= config.lr_decay
        log.debug("chart epoch %d loss %.6g", epoch, model.loss_history[-1])
    model.weights = [w.astype(float) for w in plain.weights]
    model.biases = [b.astype(float) for b in plain.biases]
    return ChannelChart(forward(model, x), model, beta)


def affine_align(chart: np.ndarray, truth: np.ndarray) -> AffineFit:
    """Least-squares affine map from chart to truth and the resulting MAE."""
    chart = np.asarray(chart, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if chart.shape != truth.shape or chart.shape[1] != 2:
        raise ValueError("chart and truth must both be (L, 2)")
    if len(truth) < 3:
        raise ValueError("affine alignment needs at least 3 points")
    centred = truth - truth.mean(axis=0)
    sv = np.linalg.svd(centred, compute_uv=False)
    if sv[1] <= 1e-10 * max(sv[0], 1e-300):
        raise ValueError("ground-truth points are collinear")
    design = np.column_stack([chart, np.ones(len(chart))])
    coef, *_ = np.linalg.lstsq(design, truth, rcond=None)
    fit = AffineFit(coef[:2].T, coef[2], 0.0)
    err = np.linalg.norm(fit.apply(chart) - truth, axis=1)
    return AffineFit(fit.matrix, fit.offset, float(err.mean()))
