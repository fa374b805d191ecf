"""Command line entry point: segment, extract, train, predict, evaluate."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from PIL import Image

from melaseg import dataset, evaluation, features, plotting, svm, synthetic
from melaseg.color_features import DEFAULT_GLCM_LEVELS
from melaseg.errors import MelasegError
from melaseg.segmentation import DEFAULT_SE_RADIUS, SeedSpec, segment
from melaseg.texture_features import DEFAULT_DELTA, DEFAULT_NGTDM_LEVELS

log = logging.getLogger("melaseg")

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_USAGE = 2
THREADS_ENV = "MELASEG_THREADS"


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    input: Path | None = None
    output: Path | None = None
    masks: Path | None = None
    labels: Path | None = None
    model: Path | None = None
    seeds: SeedSpec = SeedSpec()
    delta: float = DEFAULT_DELTA
    ngtdm_levels: int = DEFAULT_NGTDM_LEVELS
    glcm_levels: int = DEFAULT_GLCM_LEVELS
    c_values: tuple[float, ...] = (svm.DEFAULT_C,)
    se_radius: int = DEFAULT_SE_RADIUS
    threads: int = 1
    max_dim: int | None = None


# -- argument parsing --------------------------------------------------------


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v <= 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _non_negative_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return v


def _c_list(text: str) -> tuple[float, ...]:
    return tuple(_positive_float(part) for part in text.split(",") if part.strip())


def _seed_triple(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected x,y,r")
    try:
        x, y, r = (float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed {text!r}")
    if r < 1:
        raise argparse.ArgumentTypeError("seed radius must be >= 1")
    return x, y, r


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="melaseg",
        description="CIELAB marker segmentation, lesion descriptors and one-vs-all SVM scoring.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_parallel(p):
        p.add_argument("--threads", type=_positive_int, default=None,
                       help=f"worker count (falls back to ${THREADS_ENV}, then 1)")
        p.add_argument("--max-dim", type=_positive_int, default=None,
                       help="downscale images whose longest side exceeds this")

    p = sub.add_parser("segment", help="write one lesion mask PNG per image")
    p.add_argument("--input", type=Path, required=True, help="image directory")
    p.add_argument("--output", type=Path, required=True, help="mask directory")
    p.add_argument("--seed-mode", choices=("auto", "manual"), default="auto")
    p.add_argument("--lesion-seed", type=_seed_triple, default=None, metavar="X,Y,R")
    p.add_argument("--se-radius", type=_non_negative_int, default=DEFAULT_SE_RADIUS)
    add_parallel(p)

    p = sub.add_parser("extract", help="write the 42-column features CSV")
    p.add_argument("--input", type=Path, required=True, help="image directory")
    p.add_argument("--masks", type=Path, required=True, help="mask directory")
    p.add_argument("--output", type=Path, required=True, help="features CSV")
    p.add_argument("--delta", type=_positive_float, default=DEFAULT_DELTA)
    p.add_argument("--ngtdm-levels", type=_positive_int, default=DEFAULT_NGTDM_LEVELS)
    p.add_argument("--glcm-levels", type=_positive_int, default=DEFAULT_GLCM_LEVELS)
    add_parallel(p)

    p = sub.add_parser("train", help="train the one-vs-all SVM model")
    p.add_argument("--input", type=Path, required=True, help="features CSV")
    p.add_argument("--labels", type=Path, required=True, help="ground-truth label CSV")
    p.add_argument("--model", type=Path, required=True, help="model file to write")
    p.add_argument("--c", type=_c_list, default=(svm.DEFAULT_C,),
                   help="penalty C; a comma list runs a sweep and keeps the best training accuracy")

    p = sub.add_parser("predict", help="write the challenge submission CSV")
    p.add_argument("--input", type=Path, required=True, help="features CSV")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--output", type=Path, required=True, help="submission CSV")

    p = sub.add_parser("evaluate", help="score masks or a submission against ground truth")
    p.add_argument("--kind", choices=("seg", "cls"), required=True)
    p.add_argument("--input", type=Path, required=True,
                   help="predicted mask directory (seg) or submission CSV (cls)")
    p.add_argument("--masks", type=Path, help="ground-truth mask directory (seg)")
    p.add_argument("--labels", type=Path, help="ground-truth label CSV (cls)")
    p.add_argument("--output", type=Path, required=True,
                   help="report path; a .csv table and a .png figure are written beside it")

    p = sub.add_parser("synth", help="generate a labeled synthetic corpus")
    p.add_argument("--output", type=Path, required=True)
    p.add_argument("--n-per-class", type=_positive_int, default=20)
    p.add_argument("--size", type=_positive_int, default=128)
    p.add_argument("--seed", type=int, default=0)
    return parser


def resolve_threads(flag: int | None) -> int:
    if flag is not None:
        return flag
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be a positive integer, got {env!r}")
        if n <= 0:
            raise UsageError(f"{THREADS_ENV} must be a positive integer, got {env!r}")
        return n
    return 1


# -- helpers -----------------------------------------------------------------


def _require_dir(path: Path, what: str) -> Path:
    if not path.is_dir():
        raise UsageError(f"{what} directory not found: {path}")
    return path


def _require_file(path: Path, what: str) -> Path:
    if not path.is_file():
        raise UsageError(f"{what} not found: {path}")
    return path


def _downscale(img: np.ndarray, max_dim: int | None, resample=Image.Resampling.LANCZOS) -> np.ndarray:
    if max_dim is None or max(img.shape[:2]) <= max_dim:
        return img
    h, w = img.shape[:2]
    scale = max_dim / max(h, w)
    size = (max(1, round(w * scale)), max(1, round(h * scale)))
    if img.dtype == bool:
        out = Image.fromarray(img.astype(np.uint8) * 255).resize(size, Image.Resampling.NEAREST)
        return np.asarray(out) >= 128
    return np.asarray(Image.fromarray(img).resize(size, resample))


def _upscale_mask(mask: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    if mask.shape == shape:
        return mask
    im = Image.fromarray(mask.astype(np.uint8) * 255).resize((shape[1], shape[0]), Image.Resampling.NEAREST)
    return np.asarray(im) >= 128


def _run_pool(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# -- subcommands -------------------------------------------------------------


def cmd_segment(cfg: RunConfig) -> int:
    _require_dir(cfg.input, "input")
    cfg.output.mkdir(parents=True, exist_ok=True)
    images = dataset.list_images(cfg.input)

    def work(path: Path):
        image_id = dataset.image_id_of(path)
        try:
            img = dataset.load_image(path)
            small = _downscale(img, cfg.max_dim)
            mask = _upscale_mask(segment(small, cfg.seeds, cfg.se_radius), img.shape[:2])
            dataset.save_mask(mask, dataset.mask_path(cfg.output, image_id))
            return image_id, None
        except (MelasegError, ValueError) as exc:
            return image_id, str(exc)

    failures = 0
    for image_id, err in _run_pool(work, images, cfg.threads):
        if err is None:
            log.info("segmented %s", image_id)
        else:
            failures += 1
            log.warning("skipped %s: %s", image_id, err)
    log.info("segment: %d masks written, %d skipped", len(images) - failures, failures)
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_extract(cfg: RunConfig) -> int:
    _require_dir(cfg.input, "input")
    _require_dir(cfg.masks, "mask")
    images = dataset.list_images(cfg.input)

    def work(path: Path):
        image_id = dataset.image_id_of(path)
        mpath = dataset.mask_path(cfg.masks, image_id)
        if not mpath.is_file():
            return image_id, None, f"no mask {mpath.name}"
        try:
            img = _downscale(dataset.load_image(path), cfg.max_dim)
            mask = _downscale(dataset.load_mask(mpath), cfg.max_dim)
            fv = features.extract_features(
                img, mask, image_id, cfg.delta, cfg.ngtdm_levels, cfg.glcm_levels
            )
            return image_id, fv, None
        except (MelasegError, ValueError) as exc:
            return image_id, None, str(exc)

    vectors, failures = [], 0
    for image_id, fv, err in _run_pool(work, images, cfg.threads):
        if err is None:
            vectors.append(fv)
        else:
            failures += 1
            log.warning("skipped %s: %s", image_id, err)
    if cfg.output.parent != Path(""):
        cfg.output.parent.mkdir(parents=True, exist_ok=True)
    features.write_features_csv(vectors, cfg.output)
    log.info("extract: %d feature rows, %d skipped", len(vectors), failures)
    return EXIT_PARTIAL if failures else EXIT_OK


def _training_accuracy(model: svm.OvaSvmModel, vectors, labels) -> tuple[float, float, float]:
    X = np.array([fv.values for fv in vectors])
    f_mel, f_sk = model.decisions(X)
    truth = [labels[fv.image_id] for fv in vectors]
    mel = np.mean([(f > 0) == (t == dataset.MELANOMA) for f, t in zip(f_mel, truth)])
    sk = np.mean([(f > 0) == (t == dataset.SEBORRHEIC_KERATOSIS) for f, t in zip(f_sk, truth)])
    three = np.mean([svm.class_from_decisions(a, b) == t for a, b, t in zip(f_mel, f_sk, truth)])
    return float(mel), float(sk), float(three)


def cmd_train(cfg: RunConfig) -> int:
    vectors = features.read_features_csv(_require_file(cfg.input, "features CSV"))
    labels = dataset.load_labels(_require_file(cfg.labels, "label CSV"))
    if not vectors:
        raise UsageError(f"{cfg.input} has no feature rows")
    missing = [fv.image_id for fv in vectors if fv.image_id not in labels]
    if missing:
        raise UsageError(f"no label for image(s): {', '.join(missing)}")

    best = None
    for C in cfg.c_values:
        model = svm.train_ova(vectors, labels, C)
        mel, sk, three = _training_accuracy(model, vectors, labels)
        print(f"C={C:g} training accuracy: melanoma_vs_rest={mel:.4f} "
              f"sk_vs_rest={sk:.4f} three_class={three:.4f}")
        if best is None or (mel + sk) > best[0]:
            best = (mel + sk, C, model)
    if len(cfg.c_values) > 1:
        print(f"selected C={best[1]:g}")
    if cfg.model.parent != Path(""):
        cfg.model.parent.mkdir(parents=True, exist_ok=True)
    svm.save_model(best[2], cfg.model)
    return EXIT_OK


def cmd_predict(cfg: RunConfig) -> int:
    model = svm.load_model(_require_file(cfg.model, "model file"))
    if list(model.feature_order) != list(features.FEATURE_NAMES):
        raise UsageError(
            f"model feature order does not match this build's {features.N_FEATURES} features"
        )
    vectors = features.read_features_csv(_require_file(cfg.input, "features CSV"))
    rows = svm.predict_many(model, vectors)
    if cfg.output.parent != Path(""):
        cfg.output.parent.mkdir(parents=True, exist_ok=True)
    dataset.write_submission([(i, mel, sk) for i, mel, sk, _ in rows], cfg.output)
    log.info("predict: %d rows written to %s", len(rows), cfg.output)
    return EXIT_OK


def _companion(path: Path, suffix: str) -> Path:
    return path.with_name(path.stem + suffix)


def cmd_evaluate(cfg: RunConfig, kind: str) -> int:
    if kind == "seg":
        if cfg.masks is None:
            raise UsageError("--masks (ground-truth directory) is required for --kind seg")
        pred = dataset.list_masks(_require_dir(cfg.input, "prediction"))
        truth = dataset.list_masks(_require_dir(cfg.masks, "ground-truth"))
        only_pred = sorted(set(pred) - set(truth))
        only_truth = sorted(set(truth) - set(pred))
        if only_pred or only_truth:
            raise UsageError(
                "image ids differ between prediction and truth: "
                + ", ".join(only_pred + only_truth)
            )
        report = evaluation.evaluate_masks(
            (i, dataset.load_mask(pred[i]), dataset.load_mask(truth[i])) for i in sorted(pred)
        )
    else:
        if cfg.labels is None:
            raise UsageError("--labels (ground-truth CSV) is required for --kind cls")
        rows = dataset.read_submission(_require_file(cfg.input, "submission CSV"))
        labels = dataset.load_labels(_require_file(cfg.labels, "label CSV"))
        try:
            report = evaluation.classification_metrics(rows, labels)
        except KeyError as exc:
            raise UsageError(str(exc.args[0]))
    if cfg.output.parent != Path(""):
        cfg.output.parent.mkdir(parents=True, exist_ok=True)
    evaluation.write_report(report, cfg.output)
    evaluation.write_metrics_csv(report, _companion(cfg.output, ".csv"))
    plotting.plot_report(report, _companion(cfg.output, ".png"))
    print(evaluation.format_summary(report))
    return EXIT_OK


def _config_from_args(args) -> RunConfig:
    cfg = RunConfig()
    for name in ("input", "output", "masks", "labels", "model", "delta", "ngtdm_levels",
                 "glcm_levels", "se_radius", "max_dim"):
        if hasattr(args, name) and getattr(args, name) is not None:
            setattr(cfg, name, getattr(args, name))
    if hasattr(args, "c"):
        cfg.c_values = args.c
        if not cfg.c_values:
            raise UsageError("--c needs at least one value")
    if hasattr(args, "threads"):
        cfg.threads = resolve_threads(args.threads)
    if hasattr(args, "seed_mode"):
        if args.seed_mode == "manual" and args.lesion_seed is None:
            raise UsageError("--seed-mode manual requires --lesion-seed x,y,r")
        if args.seed_mode == "auto" and args.lesion_seed is not None:
            raise UsageError("--lesion-seed is only valid with --seed-mode manual")
        cfg.seeds = SeedSpec(args.seed_mode, args.lesion_seed)
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = _config_from_args(args)
        if args.command == "segment":
            return cmd_segment(cfg)
        if args.command == "extract":
            return cmd_extract(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "predict":
            return cmd_predict(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.kind)
        if args.command == "synth":
            synthetic.write_corpus(args.output, args.n_per_class, args.seed, args.size)
            return EXIT_OK
    except (UsageError, MelasegError, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"melaseg {args.command}: error: {msg}", file=sys.stderr)
        return EXIT_USAGE
    parser.error(f"unknown command {args.command}")
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
