"""Receiver-side removal of the signal component shared by all antennas.

Every antenna observes ``o_m = v * h_m`` with the same unknown ``v``. The
common spectral pattern is the unit vector most correlated with all
observations (principal eigenvector of ``sum_m o_m o_m^H``); dividing it out
leaves per-antenna features that no longer depend on ``v``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .channel_sim import Dataset

log = logging.getLogger(__name__)

DEGENERATE_GAP = 0.99


class NotHermitianError(ValueError):
    pass


@dataclass(frozen=True)
class CommonPattern:
    w_hat: np.ndarray
    eigenvalue: float
    spectral_gap: float
    converged: bool = True
    iterations: int = 0

    @property
    def degenerate(self) -> bool:
        return self.spectral_gap > DEGENERATE_GAP


def autocorrelation(csi: np.ndarray) -> np.ndarray:
    """``R = sum_m o_m o_m^H`` over all ``B*M_r*M_c`` antenna vectors."""
    csi = np.asarray(csi)
    obs = csi.reshape(-1, csi.shape[-1])
    if obs.shape[0] < 2:
        raise ValueError("autocorrelation needs at least 2 antennas")
    r = obs.T @ obs.conj()
    return (r + r.conj().T) / 2


def _gauge(w: np.ndarray) -> np.ndarray:
    """Rotate ``w`` so its first non-negligible entry is real and non-negative."""
    mag = np.abs(w)
    if mag.max() == 0:
        return w
    k = int(np.argmax(mag > 1e-12 * mag.max()))
    return w * np.exp(-1j * np.angle(w[k]))


def _power_iterate(a: np.ndarray, tol: float, max_iter: int, squarings: int):
    """Dominant eigenvector of a Hermitian PSD matrix.

    Runs the power method on ``a**(2**squarings)`` (same eigenvectors, gap ratio
    raised to that power), starting from the column with the largest diagonal.
    """
    n = a.shape[0]
    scale = np.abs(a).max()
    if scale == 0:
        w = np.zeros(n, dtype=complex)
        w[0] = 1.0
        return w, True, 0
    p = a / scale
    for _ in range(squarings):
        p = p @ p
        p = (p + p.conj().T) / 2
        p /= max(np.abs(p).max(), np.finfo(float).tiny)
    w = p[:, int(np.argmax(np.real(np.diag(p))))].astype(complex)
    if np.linalg.norm(w) == 0:
        w = np.zeros(n, dtype=complex)
        w[0] = 1.0
    w /= np.linalg.norm(w)
    for it in range(1, max_iter + 1):
        nxt = p @ w
        norm = np.linalg.norm(nxt)
        if norm == 0:
            return w, True, it
        nxt /= norm
        # compare modulo the arbitrary global phase
        nxt *= np.exp(-1j * np.angle(np.vdot(w, nxt)))
        if np.linalg.norm(nxt - w) < tol:
            return nxt, True, it
        w = nxt
    return w, False, max_iter


def principal_pattern(r: np.ndarray, tol: float = 1e-12, max_iter: int = 10_000,
                      squarings: int = 6) -> CommonPattern:
    """Unit ``w`` maximizing ``w^H R w``, gauge-fixed, with the eigenvalue ratio.

    ``spectral_gap`` is ``lambda_2 / lambda_1``, the second eigenvalue coming from
    power iteration on the deflated matrix. Non-convergence is reported through
    ``converged=False`` with the best iterate returned.
    """
    r = np.asarray(r, dtype=complex)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {r.shape}")
    asym = np.abs(r - r.conj().T).max()
    if asym > 1e-9 * max(1.0, np.abs(r).max()):
        raise NotHermitianError(f"matrix is not Hermitian (asymmetry {asym:.3g})")
    r = (r + r.conj().T) / 2

    w, converged, iters = _power_iterate(r, tol, max_iter, squarings)
    lam1 = max(float(np.real(np.vdot(w, r @ w))), 0.0)
    deflated = r - lam1 * np.outer(w, w.conj())
    w2, _, _ = _power_iterate(deflated, tol, max_iter, squarings)
    lam2 = max(float(np.real(np.vdot(w2, deflated @ w2))), 0.0)
    gap = 1.0 if lam1 == 0 else min(lam2 / lam1, 1.0)
    if not converged:
        log.warning("power iteration did not converge after %d iterations", iters)
    return CommonPattern(_gauge(w), lam1, gap, converged, iters)


def estimate_pattern(csi: np.ndarray, whiten: bool = True) -> CommonPattern:
    """Common spectral pattern of one CSI tensor.

    With ``whiten`` the eigenproblem is solved on the per-subcarrier power
    normalized autocorrelation ``D^-1/2 R D^-1/2`` (``D = diag R``) and the
    result is mapped back by ``D^1/2``. This makes the estimate exactly
    equivariant to any common per-subcarrier multiplier, including ones with
    non-constant magnitude. Without it the plain principal eigenvector of ``R``
    is returned.
    """
    r = autocorrelation(csi)
    if not whiten:
        return principal_pattern(r)
    power = np.real(np.diag(r)).copy()
    scale = np.sqrt(np.where(power > 0, power, 1.0))
    coherence = r / np.outer(scale, scale)
    pat = principal_pattern(coherence)
    w = scale * pat.w_hat
    w = w / np.linalg.norm(w)
    return CommonPattern(_gauge(w), pat.eigenvalue, pat.spectral_gap, pat.converged,
                         pat.iterations)


def recover(csi: np.ndarray, epsilon: float | None = None, *, whiten: bool = True,
            normalize: bool = True, tap_shift: int = 0,
            pattern: CommonPattern | None = None) -> np.ndarray:
    """Recovered features ``o_m * conj(w) / (|w|^2 + epsilon)``.

    ``epsilon=None`` uses ``1e-6 * max|w|^2``. With ``normalize`` the output is
    rescaled to unit mean power and rotated so that the sum of all entries is
    real positive, which removes the remaining global complex scalar.
    ``tap_shift`` delays the result by a fixed number of time-domain taps, since
    dividing by the pattern also removes the common propagation delay.
    """
    csi = np.asarray(csi)
    if pattern is None:
        pattern = estimate_pattern(csi, whiten=whiten)
    w = pattern.w_hat
    power = np.abs(w) ** 2
    if epsilon is None:
        epsilon = 1e-6 * power.max()
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    out = csi * (w.conj() / (power + epsilon))
    if normalize:
        total = out.sum()
        if total != 0:
            out = out * np.exp(-1j * np.angle(total))
        rms = np.sqrt(np.mean(np.abs(out) ** 2))
        if rms > 0:
            out = out / rms
    if tap_shift:
        n_sub = csi.shape[-1]
        out = out * np.exp(-2j * np.pi * np.arange(n_sub) * tap_shift / n_sub)
    return out


def recover_dataset(ds: Dataset, epsilon: float | None = None, *, whiten: bool = True,
                    normalize: bool = True, tap_shift: int = 0) -> Dataset:
    """Per-record recovery; spectral gaps are kept in ``notes['spectral_gap']``."""
    out = np.empty_like(ds.csi, dtype=complex)
    gaps = []
    for i in range(len(ds)):
        pat = estimate_pattern(ds.csi[i], whiten=whiten)
        gaps.append(pat.spectral_gap)
        out[i] = recover(ds.csi[i], epsilon, normalize=normalize, tap_shift=tap_shift,
                         pattern=pat)
    n_flagged = sum(g > DEGENERATE_GAP for g in gaps)
    if n_flagged:
        log.warning("%d of %d records have a degenerate spectrum (gap > %.2f)",
                    n_flagged, len(ds), DEGENERATE_GAP)
    return ds.with_csi(out, spectral_gap=gaps, recovered=True)
