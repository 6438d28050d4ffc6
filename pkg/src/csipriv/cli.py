"""Command line entry point: ``csipriv <subcommand> [options]``.

Exit codes: 0 success, 2 configuration error, 3 data-format error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__, charting, fingerprinting, obfuscation, recovery, triangulation
from .channel_sim import Scene, generate_dataset, generate_scene
from .config import ConfigError, GlobalConfig, parse_and_validate, to_dict
from .evaluation import CellError, mae, run_matrix
from .features import TapWindow, default_window, featurize_dataset
from .io import (DataFormatError, load_dataset, load_dissimilarity, load_features, load_model,
                 save_dataset, save_dissimilarity, save_features, save_model,
                 write_positions_csv)

log = logging.getLogger("csipriv")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class NumericalError(RuntimeError):
    pass


def _common() -> argparse.ArgumentParser:
    # SUPPRESS lets the flags appear before or after the subcommand
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=argparse.SUPPRESS, help="JSON configuration file")
    p.add_argument("--set", dest="overrides", action="append", default=argparse.SUPPRESS,
                   metavar="KEY=VALUE", help="override a configuration entry (repeatable)")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                   help="base seed for every stochastic stage")
    p.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                   help="BLAS thread limit")
    p.add_argument("--out-dir", default=argparse.SUPPRESS, help="output directory")
    p.add_argument("--log-level", default=argparse.SUPPRESS,
                   choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="csipriv", parents=[common],
                                     description="CSI obfuscation and recovery simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="simulate a scene and its CSI dataset")
    p.add_argument("--output", required=True)
    p.add_argument("--scene-output", help="also write the scene as JSON")

    p = sub.add_parser("obfuscate", parents=[common], help="apply per-record obfuscation")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--lv", type=int)

    p = sub.add_parser("recover", parents=[common], help="remove the common pattern")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--tap-shift", type=int)
    p.add_argument("--plain", action="store_true",
                   help="principal eigenvector of the raw autocorrelation (no whitening)")

    p = sub.add_parser("featurize", parents=[common], help="time-domain autocorrelation features")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--window", help="tap window tau_min:tau_max")

    p = sub.add_parser("localize", parents=[common], help="estimate positions")
    p.add_argument("--method", required=True, choices=["triangulation", "fingerprint", "chart"])
    p.add_argument("--input", help="dataset (triangulation)")
    p.add_argument("--scene", help="scene JSON overriding the dataset's own scene")
    p.add_argument("--window")
    p.add_argument("--train", help="training feature file")
    p.add_argument("--test", help="test feature file")
    p.add_argument("--model-out", help="write the trained model here")
    p.add_argument("--diss-cache", help="dissimilarity cache file (read if present)")
    p.add_argument("--output", required=True, help="positions CSV")

    sub.add_parser("evaluate", parents=[common], help="run the scenario matrix")
    return parser


def _window(text, n_sub: int) -> TapWindow:
    return TapWindow.parse(text) if text else default_window(n_sub)


def _cmd_generate(args, cfg: GlobalConfig) -> None:
    scene = generate_scene(cfg.scene, cfg.seeds.scene)
    ds = generate_dataset(scene, cfg.seeds.dataset)
    ds.notes.update(scene_seed=cfg.seeds.scene, dataset_seed=cfg.seeds.dataset)
    save_dataset(ds, args.output)
    if args.scene_output:
        Path(args.scene_output).write_text(json.dumps(scene.to_dict()))
    log.info("wrote %d records of dims %s to %s", len(ds), ds.dims, args.output)


def _cmd_obfuscate(args, cfg: GlobalConfig) -> None:
    ds = load_dataset(args.input)
    lv = args.lv if args.lv is not None else cfg.l_v
    # here --seed is the obfuscation seed itself
    seed = getattr(args, "seed", cfg.seeds.obfuscation)
    log.info("obfuscation seed %d, l_v %d", seed, lv)
    save_dataset(obfuscation.obfuscate_dataset(ds, lv, seed), args.output)


def _cmd_recover(args, cfg: GlobalConfig) -> None:
    ds = load_dataset(args.input)
    rc = cfg.recovery
    eps = args.epsilon if args.epsilon is not None else rc.epsilon
    shift = args.tap_shift if args.tap_shift is not None else rc.tap_shift
    out = recovery.recover_dataset(ds, eps, whiten=rc.whiten and not args.plain, tap_shift=shift)
    if not np.all(np.isfinite(out.csi)):
        raise NumericalError("recovered CSI contains non-finite values")
    save_dataset(out, args.output)


def _cmd_featurize(args, cfg: GlobalConfig) -> None:
    ds = load_dataset(args.input)
    window = _window(args.window or cfg.window, ds.dims[-1])
    feats = featurize_dataset(ds, window)
    variant = "recovered" if ds.notes.get("recovered") else (
        "obfuscated" if "obfuscation_seed" in ds.notes else "original")
    save_features(args.output, feats, ds.positions, ds.timestamps, ds.dims, window, variant)
    log.info("wrote %s features of length %d", variant, feats.shape[1])


def _need(args, *names) -> None:
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise ConfigError(f"--method {args.method} requires " +
                          ", ".join("--" + n.replace("_", "-") for n in missing))


def _cmd_localize(args, cfg: GlobalConfig) -> None:
    if args.method == "triangulation":
        _need(args, "input")
        ds = load_dataset(args.input)
        scene = ds.scene
        if args.scene:
            try:
                scene = Scene.from_dict(json.loads(Path(args.scene).read_text()))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DataFormatError(f"{args.scene}: invalid scene file ({exc})") from exc
        window = _window(args.window or cfg.window, ds.dims[-1])
        tri = cfg.triangulation
        pred = np.array([triangulation.locate(ds.csi[i], scene, window, tri.kappa_max,
                                              tri.grid_step).position for i in range(len(ds))])
        truth = ds.positions
    else:
        _need(args, "train", "test")
        f_tr, p_tr, t_tr, h_tr = load_features(args.train)
        f_te, truth, _, h_te = load_features(args.test)
        if f_tr.shape[1] != f_te.shape[1]:
            raise DataFormatError("train and test feature lengths differ")
        if args.method == "fingerprint":
            tc = dataclasses.replace(cfg.fingerprint, seed=cfg.seeds.train)
            model = fingerprinting.train(f_tr, p_tr, tc)
            pred = fingerprinting.predict_dataset(model, f_te)
        else:
            cc = dataclasses.replace(cfg.chart, seed=cfg.seeds.train)
            if args.diss_cache and Path(args.diss_cache).exists():
                geo = load_dissimilarity(args.diss_cache)
                if len(geo) != len(f_tr):
                    raise DataFormatError("dissimilarity cache does not match the training set")
            else:
                apa = int(h_tr["dims"][1]) * int(h_tr["dims"][2])
                d = charting.fused_dissimilarity(f_tr, t_tr, apa, cc.v_max, cc.t_thresh)
                geo = charting.geodesic(d, min(cc.k_neighbors, len(f_tr) - 1))
                if args.diss_cache:
                    save_dissimilarity(geo, args.diss_cache)
            model = charting.train_chart(f_tr, geo, cc).model
            z = charting.forward(model, f_te)
            pred = charting.affine_align(z, truth).apply(z)
        if not model.all_finite():
            raise NumericalError("trained model has non-finite parameters")
        if args.model_out:
            save_model(model, args.model_out, kind=args.method)
    write_positions_csv(args.output, pred, truth)
    log.info("%s MAE %.4f m over %d records", args.method, mae(pred, truth), len(pred))


def _cmd_evaluate(args, cfg: GlobalConfig) -> None:
    out_dir = getattr(args, "out_dir", None)
    if out_dir is None:
        raise ConfigError("evaluate requires --out-dir")
    report = run_matrix(cfg, out_dir)
    for name, value in report.mae_table().items():
        print(f"{name}\t{value:.4f}")


COMMANDS = {
    "generate": _cmd_generate,
    "obfuscate": _cmd_obfuscate,
    "recover": _cmd_recover,
    "featurize": _cmd_featurize,
    "localize": _cmd_localize,
    "evaluate": _cmd_evaluate,
}


def _exit_code(exc: BaseException) -> int | None:
    while exc is not None:
        if isinstance(exc, ConfigError):
            return EXIT_CONFIG
        if isinstance(exc, (DataFormatError, FileNotFoundError)):
            return EXIT_DATA
        if isinstance(exc, (FloatingPointError, NumericalError, np.linalg.LinAlgError,
                            recovery.NotHermitianError)):
            return EXIT_NUMERIC
        exc = exc.__cause__
    return None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(args, "log_level", "INFO"),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = parse_and_validate(getattr(args, "config", None), getattr(args, "overrides", []),
                                 getattr(args, "seed", None))
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    log.info("csipriv %s, command %s", __version__, args.command)
    log.info("seeds %s", json.dumps(to_dict(cfg.seeds), sort_keys=True))
    log.info("effective configuration %s", json.dumps(to_dict(cfg), sort_keys=True))
    threads = getattr(args, "threads", None)
    try:
        with threadpool_limits(limits=threads):
            COMMANDS[args.command](args, cfg)
    except (ConfigError, DataFormatError, FileNotFoundError, FloatingPointError, NumericalError,
            np.linalg.LinAlgError, recovery.NotHermitianError, CellError) as exc:
        code = _exit_code(exc)
        if code is None:
            raise
        log.error("%s", exc)
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
