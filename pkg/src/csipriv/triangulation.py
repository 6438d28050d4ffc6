"""Angle-of-arrival triangulation baseline.

Per array: row-summed azimuth covariance, single-source root-MUSIC, a
delay-spread based concentration, then a von Mises likelihood over position
maximized by grid search plus Nelder-Mead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .channel_sim import SPEED_OF_LIGHT, ArrayGeometry, Scene
from .features import TapWindow, default_window, to_time_domain

KAPPA_MAX = 50.0


@dataclass(frozen=True)
class AoAEstimate:
    azimuth: float
    kappa: float


@dataclass(frozen=True)
class Fix:
    position: np.ndarray
    informative: bool
    estimates: tuple[AoAEstimate, ...] = ()


def azimuth_covariance(csi: np.ndarray, b: int) -> np.ndarray:
    """``sum_{m_r} sum_n H[b, m_r, :, n] H[b, m_r, :, n]^H`` (M_c x M_c)."""
    csi = np.asarray(csi)
    if not 0 <= b < csi.shape[0]:
        raise IndexError(f"array index {b} out of range for {csi.shape[0]} arrays")
    h = csi[b]
    return np.einsum("rcn,rdn->cd", h, h.conj())


def root_music(r: np.ndarray, spacing_wavelengths: float) -> float:
    """Single-source root-MUSIC azimuth (radians) for a uniform linear array."""
    r = np.asarray(r, dtype=complex)
    m = r.shape[0]
    if m < 2:
        raise ValueError("root-MUSIC needs at least 2 elements")
    if spacing_wavelengths <= 0:
        raise ValueError("spacing must be positive")
    r = (r + r.conj().T) / 2
    vals, vecs = np.linalg.eigh(r)
    if vals[-1] - vals[0] <= 1e-9 * max(abs(vals[-1]), np.finfo(float).tiny):
        raise ValueError("no dominant source: all eigenvalues are equal")
    noise = vecs[:, : m - 1]
    c = noise @ noise.conj().T
    # a(z)^H C a(z) = sum_l z^l * (sum of the l-th superdiagonal of C), |z| = 1
    coeffs = np.array([np.trace(c, offset=l) for l in range(m - 1, -m, -1)])
    roots = np.roots(coeffs)
    inside = roots[np.abs(roots) <= 1.0]
    if len(inside) == 0:
        inside = roots
    z = inside[np.argmin(np.abs(np.abs(inside) - 1.0))]
    s = np.angle(z) / (2 * np.pi * spacing_wavelengths)
    return float(np.arcsin(np.clip(s, -1.0, 1.0)))


def kappa_heuristic(csi: np.ndarray, b: int, window: TapWindow,
                    kappa_max: float = KAPPA_MAX) -> float:
    """``kappa_max * rho**2`` with ``rho`` the mean in-window energy fraction."""
    td = to_time_domain(np.asarray(csi)[b]).reshape(-1, csi.shape[-1])
    total = np.sum(np.abs(td) ** 2, axis=-1)
    inside = np.sum(np.abs(td[:, window.tau_min:window.tau_max]) ** 2, axis=-1)
    live = total > 0
    if not np.any(live):
        return 0.0
    rho = float(np.mean(inside[live] / total[live]))
    return kappa_max * rho ** 2


def log_i0(kappa) -> np.ndarray:
    """``log I_0(kappa)`` from the power series, scaled by ``exp(-kappa)``.

    Terms ``(kappa/2)^(2k) / (k!)^2`` are summed in log space, so the series
    stays finite far beyond the range where ``I_0`` itself overflows.
    """
    kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
    out = np.empty_like(kappa)
    for i, x in enumerate(kappa):
        if x == 0:
            out[i] = 0.0
            continue
        n_terms = int(x + 12 * math.sqrt(x) + 40)
        k = np.arange(n_terms)
        log_terms = 2 * k * math.log(x / 2) - 2 * np.array([math.lgamma(j + 1) for j in k])
        top = log_terms.max()
        out[i] = top + math.log(np.sum(np.exp(log_terms - top)))
    return out


def signed_azimuth(x: np.ndarray, arr: ArrayGeometry) -> np.ndarray:
    return arr.azimuth_of(x)


def aoa_log_likelihood(x, estimates) -> np.ndarray:
    """Log of the von Mises product likelihood at point(s) ``x``."""
    x = np.asarray(x, dtype=float)
    total = np.zeros(x.shape[:-1])
    for est, arr in estimates:
        total = total + est.kappa * np.cos(signed_azimuth(x, arr) - est.azimuth)
        total = total - math.log(2 * math.pi) - log_i0(est.kappa)[0]
    return total


def aoa_likelihood(x, estimates) -> np.ndarray:
    """``prod_b exp(kappa_b cos(az_b(x) - alpha_b)) / (2 pi I_0(kappa_b))``."""
    if not estimates:
        raise ValueError("need at least one AoA estimate")
    return np.exp(aoa_log_likelihood(x, estimates))


def effective_frequency(csi: np.ndarray, b: int, scene: Scene) -> float:
    """Power-weighted mean subcarrier frequency observed at array ``b``.

    The subcarrier-summed covariance behaves like a narrowband covariance at
    this frequency, which moves away from the carrier whenever the spectrum is
    reweighted (e.g. by an obfuscating filter).
    """
    power = np.sum(np.abs(np.asarray(csi)[b]) ** 2, axis=(0, 1))
    freqs = scene.subcarrier_frequencies()
    if power.sum() == 0:
        return scene.carrier_frequency_hz
    return float(np.sum(power * freqs) / power.sum())


def estimate_aoas(csi: np.ndarray, scene: Scene, window: TapWindow,
                  kappa_max: float = KAPPA_MAX) -> list[tuple[AoAEstimate, ArrayGeometry]]:
    out = []
    for b, arr in enumerate(scene.arrays):
        spacing = arr.element_spacing * effective_frequency(csi, b, scene) / SPEED_OF_LIGHT
        kappa = kappa_heuristic(csi, b, window, kappa_max)
        try:
            az = root_music(azimuth_covariance(csi, b), spacing)
        except ValueError:
            az, kappa = 0.0, 0.0
        out.append((AoAEstimate(az, kappa), arr))
    return out


def locate(csi: np.ndarray, scene: Scene, window: TapWindow | None = None,
           kappa_max: float = KAPPA_MAX, grid_step: float = 0.25) -> Fix:
    """Maximum-likelihood position from per-array AoA estimates."""
    if len(scene.arrays) < 2:
        raise ValueError("triangulation needs at least 2 arrays for a unique fix")
    window = window or default_window(scene.n_sub)
    estimates = estimate_aoas(csi, scene, window, kappa_max)
    x0, x1, y0, y1 = scene.area
    if all(est.kappa == 0 for est, _ in estimates):
        return Fix(np.array([(x0 + x1) / 2, (y0 + y1) / 2]), False, tuple(e for e, _ in estimates))

    gx = np.arange(x0, x1 + grid_step / 2, grid_step)
    gy = np.arange(y0, y1 + grid_step / 2, grid_step)
    grid = np.stack(np.meshgrid(gx, gy, indexing="ij"), axis=-1)
    ll = aoa_log_likelihood(grid, estimates)
    start = grid.reshape(-1, 2)[int(np.argmax(ll))]
    res = minimize(lambda p: -float(aoa_log_likelihood(p, estimates)), start,
                   method="Nelder-Mead",
                   options={"xatol": 1e-7, "fatol": 1e-12, "maxiter": 2000})
    best = res.x if res.fun <= -ll.max() else start
    return Fix(np.asarray(best, dtype=float), True, tuple(e for e, _ in estimates))


def locate_dataset(ds, window: TapWindow | None = None,
                   kappa_max: float = KAPPA_MAX) -> np.ndarray:
    return np.array([locate(ds.csi[i], ds.scene, window, kappa_max).position
                     for i in range(len(ds))])
