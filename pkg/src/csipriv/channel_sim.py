"""Synthetic distributed massive-MIMO channels.

A 2-D geometric model: one line-of-sight ray plus one single-bounce ray per
point scatterer, with exact per-element propagation delays. Tensor shapes
follow the measurement layout used throughout the package:
``(B, M_r, M_c, N_sub)`` per time instant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class ArrayGeometry:
    position: tuple[float, float]
    normal: tuple[float, float]
    rows: int = 2
    cols: int = 4
    element_spacing: float = 0.1

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("array needs at least one row and one column")
        if not self.element_spacing > 0:
            raise ValueError("element_spacing must be positive")
        if abs(math.hypot(*self.normal) - 1.0) > 1e-9:
            raise ValueError(f"array normal {self.normal} is not a unit vector")

    @property
    def tangent(self) -> np.ndarray:
        """Column axis: the normal rotated by +90 degrees."""
        nx, ny = self.normal
        return np.array([-ny, nx])

    def element_positions(self) -> np.ndarray:
        """(cols, 2) positions of the element columns; rows share them in 2-D."""
        offsets = (np.arange(self.cols) - (self.cols - 1) / 2) * self.element_spacing
        return np.asarray(self.position) + offsets[:, None] * self.tangent

    def azimuth_of(self, points: np.ndarray) -> np.ndarray:
        """Signed azimuth of ``points - position`` relative to the normal."""
        d = np.asarray(points, dtype=float) - np.asarray(self.position)
        n = np.asarray(self.normal)
        return np.arctan2(n[0] * d[..., 1] - n[1] * d[..., 0], d @ n)


@dataclass
class SceneConfig:
    n_arrays: int = 4
    rows: int = 2
    cols: int = 4
    n_sub: int = 64
    n_scatterers: int = 10
    trajectory_length: int = 2000
    area: tuple[float, float, float, float] = (0.0, 8.0, 0.0, 8.0)
    array_margin: float = 2.0
    scatterer_margin: float = 4.0
    carrier_frequency_hz: float = 1.272e9
    bandwidth_hz: float = 50e6
    noise_std: float = 0.0
    sample_interval_s: float = 0.1
    speed_mps: float = 1.0
    timing_offset_taps: float = 30.0
    bounce_attenuation: float = 0.5
    element_spacing_wavelengths: float = 0.5


@dataclass
class Scene:
    arrays: list[ArrayGeometry]
    scatterers: np.ndarray
    trajectory: np.ndarray
    timestamps: np.ndarray
    carrier_wavelength: float
    bandwidth_hz: float
    noise_std: float = 0.0
    n_sub: int = 64
    area: tuple[float, float, float, float] = (0.0, 8.0, 0.0, 8.0)
    timing_offset_taps: float = 30.0
    bounce_attenuation: float = 0.5

    def __post_init__(self):
        self.scatterers = np.asarray(self.scatterers, dtype=float).reshape(-1, 2)
        self.trajectory = np.asarray(self.trajectory, dtype=float).reshape(-1, 2)
        self.timestamps = np.asarray(self.timestamps, dtype=float).reshape(-1)
        if not self.arrays:
            raise ValueError("scene needs at least one array")
        if len(self.trajectory) != len(self.timestamps):
            raise ValueError("trajectory and timestamps differ in length")
        if np.any(np.diff(self.timestamps) <= 0):
            raise ValueError("trajectory timestamps must strictly increase")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")
        shapes = {(a.rows, a.cols) for a in self.arrays}
        if len(shapes) != 1:
            raise ValueError("all arrays must share one (rows, cols) shape")

    @property
    def dims(self) -> tuple[int, int, int, int]:
        a = self.arrays[0]
        return (len(self.arrays), a.rows, a.cols, self.n_sub)

    @property
    def carrier_frequency_hz(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_wavelength

    def subcarrier_frequencies(self) -> np.ndarray:
        df = self.bandwidth_hz / self.n_sub
        return self.carrier_frequency_hz + (np.arange(self.n_sub) - self.n_sub / 2) * df

    def to_dict(self) -> dict:
        return {
            "arrays": [
                {
                    "position": list(a.position),
                    "normal": list(a.normal),
                    "rows": a.rows,
                    "cols": a.cols,
                    "element_spacing": a.element_spacing,
                }
                for a in self.arrays
            ],
            "scatterers": self.scatterers.tolist(),
            "trajectory": self.trajectory.tolist(),
            "timestamps": self.timestamps.tolist(),
            "carrier_wavelength": self.carrier_wavelength,
            "bandwidth_hz": self.bandwidth_hz,
            "noise_std": self.noise_std,
            "n_sub": self.n_sub,
            "area": list(self.area),
            "timing_offset_taps": self.timing_offset_taps,
            "bounce_attenuation": self.bounce_attenuation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scene":
        arrays = [
            ArrayGeometry(
                position=tuple(a["position"]),
                normal=tuple(a["normal"]),
                rows=int(a["rows"]),
                cols=int(a["cols"]),
                element_spacing=float(a["element_spacing"]),
            )
            for a in d["arrays"]
        ]
        return cls(
            arrays=arrays,
            scatterers=np.asarray(d["scatterers"], dtype=float),
            trajectory=np.asarray(d["trajectory"], dtype=float),
            timestamps=np.asarray(d["timestamps"], dtype=float),
            carrier_wavelength=float(d["carrier_wavelength"]),
            bandwidth_hz=float(d["bandwidth_hz"]),
            noise_std=float(d["noise_std"]),
            n_sub=int(d["n_sub"]),
            area=tuple(d["area"]),
            timing_offset_taps=float(d["timing_offset_taps"]),
            bounce_attenuation=float(d["bounce_attenuation"]),
        )


@dataclass
class Dataset:
    """Stacked records: ``csi`` is ``(L, B, M_r, M_c, N_sub)``."""

    csi: np.ndarray
    positions: np.ndarray
    timestamps: np.ndarray
    scene: Scene
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        self.csi = np.asarray(self.csi)
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        self.timestamps = np.asarray(self.timestamps, dtype=float).reshape(-1)
        if self.csi.ndim != 5:
            raise ValueError(f"csi must be 5-D (L, B, M_r, M_c, N_sub), got {self.csi.shape}")
        n = len(self.csi)
        if len(self.positions) != n or len(self.timestamps) != n:
            raise ValueError("csi, positions and timestamps differ in record count")
        if np.any(np.diff(self.timestamps) < 0):
            raise ValueError("timestamps must be non-decreasing")

    def __len__(self) -> int:
        return len(self.csi)

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return tuple(self.csi.shape[1:])

    def record(self, i: int):
        return self.csi[i], self.positions[i], self.timestamps[i]

    def with_csi(self, csi: np.ndarray, **notes) -> "Dataset":
        return Dataset(csi, self.positions.copy(), self.timestamps.copy(), self.scene,
                       {**self.notes, **notes})

    def take(self, index) -> "Dataset":
        index = np.asarray(index)
        return Dataset(self.csi[index], self.positions[index], self.timestamps[index],
                       self.scene, dict(self.notes))

    def split(self, ratio: float = 0.5) -> tuple["Dataset", "Dataset"]:
        """Interleaved split so that both halves cover the same area.

        Record ``i`` goes to the first part when ``ceil(i*ratio) < ceil((i+1)*ratio)``;
        for ``ratio=0.5`` that is every even record.
        """
        if not 0 < ratio < 1:
            raise ValueError("ratio must lie in (0, 1)")
        idx = np.arange(len(self))
        first = np.ceil(idx * ratio) < np.ceil((idx + 1) * ratio)
        return self.take(idx[first]), self.take(idx[~first])


def _array_slots(n_arrays: int, area) -> list[tuple[tuple[float, float], tuple[float, float]]]:
    """Side-centre slots (bottom, left, top, right), then corners, all facing inward."""
    x0, x1, y0, y1 = area
    cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
    slots = [((cx, y0), (0.0, 1.0)), ((x0, cy), (1.0, 0.0)),
             ((cx, y1), (0.0, -1.0)), ((x1, cy), (-1.0, 0.0))]
    s = 1 / math.sqrt(2)
    slots += [((x0, y0), (s, s)), ((x1, y1), (-s, -s)),
              ((x0, y1), (s, -s)), ((x1, y0), (-s, s))]
    if n_arrays > len(slots):
        raise ValueError(f"at most {len(slots)} arrays supported, got {n_arrays}")
    return slots[:n_arrays]


def _random_waypoint(rng, n: int, area, dt: float, speed: float) -> np.ndarray:
    x0, x1, y0, y1 = area
    step = speed * dt
    pos = np.array([rng.uniform(x0, x1), rng.uniform(y0, y1)])
    out = np.empty((n, 2))
    target = pos
    for i in range(n):
        out[i] = pos
        remaining = step
        while remaining > 0:
            d = target - pos
            dist = math.hypot(*d)
            if dist < 1e-12:
                target = np.array([rng.uniform(x0, x1), rng.uniform(y0, y1)])
                continue
            if dist <= remaining:
                pos = target
                remaining -= dist
            else:
                pos = pos + d * (remaining / dist)
                remaining = 0.0
    return out


def generate_scene(config: SceneConfig | None = None, seed: int = 0) -> Scene:
    """Deterministic scene for ``(config, seed)``."""
    config = config or SceneConfig()
    counts = {
        "n_arrays": config.n_arrays,
        "rows": config.rows,
        "cols": config.cols,
        "n_sub": config.n_sub,
        "trajectory_length": config.trajectory_length,
    }
    for name, value in counts.items():
        if value < 1:
            raise ValueError(f"{name} must be positive, got {value}")
    if config.n_scatterers < 0:
        raise ValueError("n_scatterers must be non-negative")
    x0, x1, y0, y1 = config.area
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate area bounds {config.area}")
    if config.sample_interval_s <= 0 or config.speed_mps <= 0:
        raise ValueError("sample_interval_s and speed_mps must be positive")

    rng = np.random.default_rng(seed)
    wavelength = SPEED_OF_LIGHT / config.carrier_frequency_hz
    m = config.array_margin
    outer = (x0 - m, x1 + m, y0 - m, y1 + m)
    arrays = [
        ArrayGeometry(pos, normal, config.rows, config.cols,
                      config.element_spacing_wavelengths * wavelength)
        for pos, normal in _array_slots(config.n_arrays, outer)
    ]
    sm = config.scatterer_margin
    scatterers = np.column_stack([
        rng.uniform(x0 - sm, x1 + sm, config.n_scatterers),
        rng.uniform(y0 - sm, y1 + sm, config.n_scatterers),
    ])
    trajectory = _random_waypoint(rng, config.trajectory_length, config.area,
                                  config.sample_interval_s, config.speed_mps)
    timestamps = np.arange(config.trajectory_length) * config.sample_interval_s
    return Scene(
        arrays=arrays,
        scatterers=scatterers,
        trajectory=trajectory,
        timestamps=timestamps,
        carrier_wavelength=wavelength,
        bandwidth_hz=config.bandwidth_hz,
        noise_std=config.noise_std,
        n_sub=config.n_sub,
        area=tuple(config.area),
        timing_offset_taps=config.timing_offset_taps,
        bounce_attenuation=config.bounce_attenuation,
    )


def _noiseless_batch(scene: Scene, ue: np.ndarray) -> np.ndarray:
    """Noiseless CSI for ``ue`` of shape (L, 2) -> (L, B, M_r, M_c, N_sub)."""
    B, rows, cols, n_sub = scene.dims
    freqs = scene.subcarrier_frequencies()
    # common receiver timing offset, expressed relative to the band centre
    offset_s = scene.timing_offset_taps / scene.bandwidth_hz
    out = np.zeros((len(ue), B, cols, n_sub), dtype=complex)
    for b, arr in enumerate(scene.arrays):
        elems = arr.element_positions()                      # (C, 2)
        centre = np.asarray(arr.position)
        # line of sight
        d_elem = np.linalg.norm(ue[:, None, :] - elems[None], axis=-1)  # (L, C)
        d_ref = np.linalg.norm(ue - centre, axis=-1)
        gain = np.maximum(np.cos(arr.azimuth_of(ue)), 0.0) / d_ref
        paths = [(gain, d_elem)]
        for s in scene.scatterers:
            leg1 = np.linalg.norm(ue - s, axis=-1)           # (L,)
            leg2 = np.linalg.norm(elems - s, axis=-1)        # (C,)
            leg2_ref = np.linalg.norm(centre - s)
            g = (scene.bounce_attenuation * max(math.cos(arr.azimuth_of(s)), 0.0)
                 / (leg1 + leg2_ref))
            paths.append((g, leg1[:, None] + leg2[None, :]))
        for g, dist in paths:
            tau = dist / SPEED_OF_LIGHT + offset_s           # (L, C)
            out[:, b] += g[:, None, None] * np.exp(-2j * np.pi * tau[..., None] * freqs)
    # rows share the azimuth-plane geometry
    return np.repeat(out[:, :, None], rows, axis=2)


def _add_noise(csi: np.ndarray, noise_std: float, rng) -> np.ndarray:
    if noise_std <= 0:
        return csi
    noise = rng.standard_normal(csi.shape) + 1j * rng.standard_normal(csi.shape)
    return csi + noise_std / math.sqrt(2) * noise


def synthesize_csi(scene: Scene, ue_position, seed: int = 0) -> np.ndarray:
    """One CSI tensor ``(B, M_r, M_c, N_sub)`` for a UE at ``ue_position``."""
    ue = np.asarray(ue_position, dtype=float).reshape(1, 2)
    if not np.all(np.isfinite(ue)):
        raise ValueError("ue_position must be finite")
    csi = _noiseless_batch(scene, ue)[0]
    return _add_noise(csi, scene.noise_std, np.random.default_rng(seed))


def record_seed(seed: int, index: int) -> int:
    """Independent integer seed for record ``index`` of a stream seeded by ``seed``."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, dtype=np.uint64)[0])


def generate_dataset(scene: Scene, seed: int = 0, chunk: int = 256) -> Dataset:
    """One record per trajectory point; noise for record ``i`` is seeded by ``(seed, i)``."""
    n = len(scene.trajectory)
    if n == 0:
        raise ValueError("scene trajectory is empty")
    csi = np.empty((n,) + scene.dims, dtype=complex)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        csi[start:stop] = _noiseless_batch(scene, scene.trajectory[start:stop])
    if scene.noise_std > 0:
        for i in range(n):
            csi[i] = _add_noise(csi[i], scene.noise_std,
                                np.random.default_rng(record_seed(seed, i)))
    return Dataset(csi, scene.trajectory.copy(), scene.timestamps.copy(), scene,
                   {"generator_seed": seed})


def los_only(scene: Scene) -> Scene:
    """Same scene with all scatterers removed."""
    return replace(scene, scatterers=np.zeros((0, 2)))
