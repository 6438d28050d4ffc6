"""Scenario matrix: every localization method under both train/test scenarios.

Scenario 1 trains on original CSI and is evaluated on original and obfuscated
test CSI. Scenario 2 trains on recovered CSI and is evaluated on the recovered
versions of both test sets. Obfuscation is applied to the test split only.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import charting, fingerprinting, obfuscation, recovery, triangulation
from .channel_sim import Dataset, generate_dataset, generate_scene
from .config import AntennaConfig, GlobalConfig, to_dict
from .features import TapWindow, default_window, featurize_dataset
from .io import write_plotdata_csv, write_positions_csv

log = logging.getLogger(__name__)

METHODS = ("triangulation", "fingerprint", "chart")
CELLS = (
    ("original", "original"),
    ("original", "obfuscated"),
    ("recovered", "original_recovered"),
    ("recovered", "obfuscated_recovered"),
)


class CellError(RuntimeError):
    pass


@dataclass(frozen=True)
class ScenarioSpec:
    method: str
    train_variant: str
    eval_variant: str
    antenna: AntennaConfig = field(default_factory=AntennaConfig)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method '{self.method}'")
        if (self.train_variant, self.eval_variant) not in CELLS:
            raise ValueError(f"({self.train_variant}, {self.eval_variant}) is not a valid "
                             "train/evaluation pairing")

    @property
    def scenario(self) -> int:
        return 1 if self.train_variant == "original" else 2

    def name(self, dims) -> str:
        return f"{self.method}_{self.antenna.label(dims)}_{self.train_variant}_{self.eval_variant}"


def table_cells(methods=METHODS, antenna_configs=None) -> list[ScenarioSpec]:
    antenna_configs = antenna_configs or [AntennaConfig()]
    return [ScenarioSpec(m, tv, ev, a) for a in antenna_configs for m in methods
            for tv, ev in CELLS]


def _pick(sel, size: int, what: str) -> list[int]:
    if sel is None:
        return list(range(size))
    sel = [int(i) for i in sel]
    if not sel:
        raise ValueError(f"empty {what} selection")
    bad = [i for i in sel if not 0 <= i < size]
    if bad:
        raise ValueError(f"{what} index {bad} out of range for size {size}")
    if len(set(sel)) != len(sel):
        raise ValueError(f"duplicate {what} indices {sel}")
    return sel


def subset_antennas(ds: Dataset, spec: AntennaConfig) -> Dataset:
    """Keep the selected arrays, rows and columns (0-based indices).

    A uniformly strided column selection scales the element spacing by the
    stride, so angle estimation still sees a uniform linear array.
    """
    B, R, C, _ = ds.dims
    arrays = _pick(spec.arrays, B, "array")
    rows = _pick(spec.rows, R, "row")
    cols = _pick(spec.cols, C, "column")
    csi = ds.csi[:, arrays][:, :, rows][:, :, :, cols]
    stride = cols[1] - cols[0] if len(cols) > 1 else 1
    if len(cols) > 1 and np.any(np.diff(cols) != stride):
        log.warning("non-uniform column selection %s; angle estimates assume uniform spacing", cols)
    geoms = [dataclasses.replace(ds.scene.arrays[b], rows=len(rows), cols=len(cols),
                                 element_spacing=ds.scene.arrays[b].element_spacing * abs(stride))
             for b in arrays]
    scene = dataclasses.replace(ds.scene, arrays=geoms)
    return Dataset(np.ascontiguousarray(csi), ds.positions.copy(), ds.timestamps.copy(), scene,
                   {**ds.notes, "antenna_subset": to_dict(spec)})


def record_errors(pred, truth) -> np.ndarray:
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise ValueError(f"prediction shape {pred.shape} != truth shape {truth.shape}")
    if len(pred) < 1:
        raise ValueError("need at least one record")
    return np.linalg.norm(pred - truth, axis=-1)


def mae(pred, truth) -> float:
    """Mean Euclidean distance between predicted and true positions."""
    return float(np.mean(record_errors(pred, truth)))


@dataclass
class CellResult:
    name: str
    spec: ScenarioSpec
    predicted: np.ndarray
    truth: np.ndarray
    errors: np.ndarray
    mae: float
    runtime_s: float

    def to_dict(self) -> dict:
        return {
            "method": self.spec.method,
            "scenario": self.spec.scenario,
            "antenna": to_dict(self.spec.antenna),
            "train_variant": self.spec.train_variant,
            "eval_variant": self.spec.eval_variant,
            "mae_m": self.mae,
            "errors_m": self.errors.tolist(),
            "runtime_s": self.runtime_s,
        }


@dataclass
class Report:
    cells: dict[str, CellResult]
    config: dict
    seeds: dict
    version: str
    runtime_s: float
    notes: dict = field(default_factory=dict)

    def mae_table(self) -> dict[str, float]:
        return {name: cell.mae for name, cell in self.cells.items()}

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "seeds": self.seeds,
            "config": self.config,
            "runtime_s": self.runtime_s,
            "notes": self.notes,
            "cells": {name: cell.to_dict() for name, cell in self.cells.items()},
        }

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        (out / "plotdata").mkdir(parents=True, exist_ok=True)
        for name, cell in self.cells.items():
            cell_dir = out / "cells" / name
            cell_dir.mkdir(parents=True, exist_ok=True)
            write_positions_csv(cell_dir / "positions.csv", cell.predicted, cell.truth)
            write_plotdata_csv(out / "plotdata" / f"{name}.csv", cell.predicted, cell.errors)
        (out / "report.json").write_text(json.dumps(self.to_dict(), indent=2) + "\n")


class _Pipeline:
    """Lazily built datasets, features and models for one antenna configuration."""

    def __init__(self, full: Dataset, antenna: AntennaConfig, config: GlobalConfig,
                 window: TapWindow):
        self.config = config
        self.window = window
        ds = subset_antennas(full, antenna)
        self.train_set, test = ds.split(config.split_ratio)
        self.sets = {("train", "original"): self.train_set, ("test", "original"): test}
        self._features: dict = {}
        self._models: dict = {}
        self.gaps: dict[str, list[float]] = {}

    def dataset(self, split: str, variant: str) -> Dataset:
        key = (split, variant)
        if key in self.sets:
            return self.sets[key]
        rc = self.config.recovery
        if variant == "obfuscated":
            out = obfuscation.obfuscate_dataset(self.dataset(split, "original"),
                                                self.config.l_v, self.config.seeds.obfuscation)
        elif variant in ("recovered", "original_recovered", "obfuscated_recovered"):
            source = "obfuscated" if variant == "obfuscated_recovered" else "original"
            out = recovery.recover_dataset(self.dataset(split, source), rc.epsilon,
                                           whiten=rc.whiten, tap_shift=rc.tap_shift)
            self.gaps[f"{split}_{source}"] = out.notes["spectral_gap"]
        else:
            raise ValueError(f"unknown variant '{variant}'")
        self.sets[key] = out
        return out

    def features(self, split: str, variant: str) -> np.ndarray:
        key = (split, variant)
        if key not in self._features:
            self._features[key] = featurize_dataset(self.dataset(split, variant), self.window)
        return self._features[key]

    def fingerprint_model(self, train_variant: str):
        key = ("fingerprint", train_variant)
        if key not in self._models:
            cfg = dataclasses.replace(self.config.fingerprint, seed=self.config.seeds.train)
            self._models[key] = fingerprinting.train(self.features("train", train_variant),
                                                     self.train_set.positions, cfg)
        return self._models[key]

    def chart_model(self, train_variant: str):
        key = ("chart", train_variant)
        if key not in self._models:
            cfg = dataclasses.replace(self.config.chart, seed=self.config.seeds.train)
            feats = self.features("train", train_variant)
            _, R, C, _ = self.train_set.dims
            d = charting.fused_dissimilarity(feats, self.train_set.timestamps, R * C,
                                             cfg.v_max, cfg.t_thresh)
            geo = charting.geodesic(d, min(cfg.k_neighbors, len(feats) - 1))
            self._models[key] = charting.train_chart(feats, geo, cfg).model
        return self._models[key]

    def predict(self, spec: ScenarioSpec) -> tuple[np.ndarray, np.ndarray]:
        test = self.dataset("test", spec.eval_variant)
        if spec.method == "triangulation":
            tri = self.config.triangulation
            pred = np.array([
                triangulation.locate(test.csi[i], test.scene, self.window, tri.kappa_max,
                                     tri.grid_step).position
                for i in range(len(test))])
        elif spec.method == "fingerprint":
            model = self.fingerprint_model(spec.train_variant)
            pred = fingerprinting.predict_dataset(model, self.features("test", spec.eval_variant))
        else:
            model = self.chart_model(spec.train_variant)
            z = charting.forward(model, self.features("test", spec.eval_variant))
            pred = charting.affine_align(z, test.positions).apply(z)
        return pred, test.positions


def run_matrix(config: GlobalConfig | None = None, out_dir=None,
               cells: list[ScenarioSpec] | None = None) -> Report:
    """Run the requested cells (default: all methods x antenna configs x scenario cells)."""
    from . import __version__

    config = config or GlobalConfig()
    seeds = to_dict(config.seeds)
    log.info("csipriv %s, seeds %s", __version__, seeds)
    t_start = time.perf_counter()
    scene = generate_scene(config.scene, config.seeds.scene)
    full = generate_dataset(scene, config.seeds.dataset)
    window = TapWindow.parse(config.window) if config.window else default_window(scene.n_sub)
    cells = cells if cells is not None else table_cells(config.methods, config.antenna_configs)

    pipelines: dict[str, _Pipeline] = {}
    results: dict[str, CellResult] = {}
    for spec in cells:
        label = spec.antenna.label(full.dims)
        name = spec.name(full.dims)
        t0 = time.perf_counter()
        try:
            if label not in pipelines:
                pipelines[label] = _Pipeline(full, spec.antenna, config, window)
            pred, truth = pipelines[label].predict(spec)
            errors = record_errors(pred, truth)
        except Exception as exc:
            raise CellError(f"cell {name}: {type(exc).__name__}: {exc}") from exc
        results[name] = CellResult(name, spec, pred, truth, errors, float(np.mean(errors)),
                                   time.perf_counter() - t0)
        log.info("cell %s: MAE %.4f m (%.1f s)", name, results[name].mae, results[name].runtime_s)

    notes = {
        "window": str(window),
        "degenerate_records": {
            f"{label}/{key}": int(sum(g > recovery.DEGENERATE_GAP for g in gaps))
            for label, p in pipelines.items() for key, gaps in p.gaps.items()
        },
    }
    report = Report(results, to_dict(config), seeds, __version__,
                    time.perf_counter() - t_start, notes)
    if out_dir is not None:
        report.write(out_dir)
    return report
