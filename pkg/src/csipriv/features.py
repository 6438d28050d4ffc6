"""Angle-delay features: time-domain taps and per-array antenna autocorrelations.

Transform convention: ``to_time_domain`` is the forward FFT over subcarriers
divided by ``N_sub``, so time-domain energy equals frequency-domain energy
divided by ``N_sub``. Being a forward transform, it mirrors the delay axis: a
path delayed by ``k`` taps, ``exp(-2j*pi*n*k/N_sub)``, lands on tap
``(N_sub - k) mod N_sub``, and later arrivals sit at lower tap indices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TapWindow:
    tau_min: int = 27
    tau_max: int = 40

    def __post_init__(self):
        if not 0 <= self.tau_min < self.tau_max:
            raise ValueError(f"invalid tap window {self.tau_min}:{self.tau_max}")

    @property
    def n_tap(self) -> int:
        return self.tau_max - self.tau_min

    @classmethod
    def parse(cls, text: str) -> "TapWindow":
        lo, _, hi = text.partition(":")
        return cls(int(lo), int(hi))

    def __str__(self) -> str:
        return f"{self.tau_min}:{self.tau_max}"


def default_window(n_sub: int) -> TapWindow:
    """(27, 40) for 64 subcarriers, proportionally rescaled otherwise."""
    if n_sub == 64:
        return TapWindow(27, 40)
    return TapWindow(round(27 * n_sub / 64), max(round(40 * n_sub / 64), round(27 * n_sub / 64) + 1))


def to_time_domain(csi: np.ndarray) -> np.ndarray:
    csi = np.asarray(csi)
    return np.fft.fft(csi, axis=-1) / csi.shape[-1]


def to_frequency_domain(td: np.ndarray) -> np.ndarray:
    td = np.asarray(td)
    return np.fft.ifft(td, axis=-1) * td.shape[-1]


def extract_taps(td: np.ndarray, window: TapWindow) -> np.ndarray:
    if window.tau_max > td.shape[-1]:
        raise ValueError(f"window {window} exceeds {td.shape[-1]} taps")
    return td[..., window.tau_min:window.tau_max]


def antenna_autocorrelation(taps: np.ndarray) -> np.ndarray:
    """``F[b, t] = a a^H`` with ``a`` the row-major vectorized antenna snapshot.

    ``taps`` is ``(..., B, M_r, M_c, N_tap)``; the result is
    ``(..., B, N_tap, M_r*M_c, M_r*M_c)``.
    """
    taps = np.asarray(taps)
    *lead, B, rows, cols, n_tap = taps.shape
    snap = taps.reshape(*lead, B, rows * cols, n_tap)
    snap = np.moveaxis(snap, -1, -2)                       # (..., B, T, K)
    return snap[..., :, None] * snap[..., None, :].conj()


def feature_length(dims, window: TapWindow) -> int:
    B, rows, cols, _ = dims
    return 2 * B * (rows * cols) ** 2 * window.n_tap


def featurize(csi: np.ndarray, window: TapWindow | None = None) -> np.ndarray:
    """Real feature vector(s): real block then imaginary block of all ``F[b, t]``.

    Layout within each block: array ``b`` ascending, tap ``t`` ascending, matrix
    entries row-major. Accepts a single tensor or a stack ``(L, B, M_r, M_c, N)``.
    """
    csi = np.asarray(csi)
    window = window or default_window(csi.shape[-1])
    corr = antenna_autocorrelation(extract_taps(to_time_domain(csi), window))
    lead = csi.shape[:-4]
    flat = corr.reshape(*lead, -1)
    return np.concatenate([flat.real, flat.imag], axis=-1)


def featurize_dataset(ds, window: TapWindow | None = None, chunk: int = 256) -> np.ndarray:
    window = window or default_window(ds.dims[-1])
    out = np.empty((len(ds), feature_length(ds.dims, window)))
    for start in range(0, len(ds), chunk):
        out[start:start + chunk] = featurize(ds.csi[start:start + chunk], window)
    return out


def power_profile(features: np.ndarray, antennas_per_array: int) -> np.ndarray:
    """Diagonals of every ``F[b, t]``: per-(array, tap, antenna) power."""
    features = np.asarray(features)
    half = features.shape[-1] // 2
    k = antennas_per_array
    real = features[..., :half].reshape(*features.shape[:-1], -1, k, k)
    return np.diagonal(real, axis1=-2, axis2=-1).reshape(*features.shape[:-1], -1)
