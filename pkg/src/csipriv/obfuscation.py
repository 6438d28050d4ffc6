"""Transmitter-side CSI obfuscation by a random finite-length filter."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel_sim import Dataset, record_seed


@dataclass(frozen=True)
class ObfuscationSequence:
    time_taps: np.ndarray
    transfer: np.ndarray

    @property
    def length(self) -> int:
        return len(self.time_taps)


def sequence_from_taps(taps, n_sub: int) -> ObfuscationSequence:
    """Normalize ``taps`` to unit norm and attach its ``n_sub``-point transfer function.

    The transfer function is ``sqrt(n_sub) * F @ zero_pad(taps)`` with ``F`` the
    unitary DFT matrix, i.e. the plain forward FFT of the padded taps, so that
    ``sum |transfer|**2 == n_sub``.
    """
    taps = np.asarray(taps, dtype=complex).reshape(-1)
    if not 1 <= len(taps) <= n_sub:
        raise ValueError(f"sequence length must lie in [1, {n_sub}], got {len(taps)}")
    norm = np.linalg.norm(taps)
    if norm == 0:
        raise ValueError("obfuscation taps must not be all zero")
    taps = taps / norm
    padded = np.zeros(n_sub, dtype=complex)
    padded[: len(taps)] = taps
    return ObfuscationSequence(taps, np.fft.fft(padded))


def draw_sequence(l_v: int, n_sub: int, seed: int) -> ObfuscationSequence:
    """Random taps ``a_i * exp(j*phi_i)``, ``a_i ~ U[0,1]``, ``phi_i ~ U[0, 2pi)``, unit norm."""
    if not 1 <= l_v <= n_sub:
        raise ValueError(f"l_v must lie in [1, n_sub={n_sub}], got {l_v}")
    rng = np.random.default_rng(seed)
    amplitude = rng.uniform(0.0, 1.0, l_v)
    phase = rng.uniform(0.0, 2 * np.pi, l_v)
    return sequence_from_taps(amplitude * np.exp(1j * phase), n_sub)


def apply(seq: ObfuscationSequence, csi: np.ndarray) -> np.ndarray:
    """Multiply every antenna's subcarrier vector by the same transfer function."""
    csi = np.asarray(csi)
    if csi.shape[-1] != len(seq.transfer):
        raise ValueError(
            f"transfer length {len(seq.transfer)} does not match N_sub={csi.shape[-1]}")
    return csi * seq.transfer


def obfuscate_dataset(ds: Dataset, l_v: int = 16, seed: int = 0) -> Dataset:
    """Fresh sequence per record, seeded by ``record_seed(seed, i)``."""
    n_sub = ds.dims[-1]
    out = np.empty_like(ds.csi, dtype=complex)
    for i in range(len(ds)):
        out[i] = apply(draw_sequence(l_v, n_sub, record_seed(seed, i)), ds.csi[i])
    return ds.with_csi(out, obfuscation_seed=seed, obfuscation_length=l_v)
