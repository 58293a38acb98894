"""Command-line pipeline: prepare, train, eval, report.

Every stage is driven by the config file and explicit seeds, so a fixed
(config, input files) pair determines every output byte.  Exit codes:
0 success, 1 data/model errors, 2 usage errors.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, bundle as bundle_io, dataset, metrics, ndae, plots
from .bundle import BundleError, ModelBundle
from .config import (
    ConfigError,
    PipelineConfig,
    config_hash,
    override_seeds,
    parse_config,
    softmax_train_knobs,
)
from .dataset import AttackClass, DatasetError
from .forest import Forest, ForestParams, predict_matrix, train_forest
from .ndae import SoftmaxHead, extract, softmax_predict, train_softmax_baseline, train_stacked
from .neural import DimensionMismatch, NonFiniteParameter, TrainConfig


class StageError(Exception):
    """A pipeline stage failed; message already carries the context."""


def _file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _require_file(path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise StageError(f"{what} not found: {p}")
    return p


def _load_config(args) -> PipelineConfig:
    cfg = parse_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = override_seeds(cfg, args.seed)
    return cfg


def _class_counts(labels: list[AttackClass]) -> dict[AttackClass, int]:
    counts = {c: 0 for c in AttackClass}
    for label in labels:
        counts[label] += 1
    return counts


def cmd_prepare(args) -> int:
    cfg = _load_config(args)
    out = Path(args.out or cfg.prepared_dir)
    out.mkdir(parents=True, exist_ok=True)

    train_path = _require_file(cfg.train_path, "training dataset")
    test_path = _require_file(cfg.test_path, "test dataset")

    def load(path: Path):
        with open(path) as fh:
            try:
                records = dataset.parse_records(fh, cfg.format)
            except DatasetError as err:
                raise StageError(f"{path}: {err}") from err
        try:
            labels = [dataset.map_label(r.label) for r in records]
        except DatasetError as err:
            raise StageError(f"{path}: {err}") from err
        return records, labels

    train_records, train_labels = load(train_path)
    test_records, test_labels = load(test_path)
    print(f"parsed {len(train_records)} training and {len(test_records)} test records")

    emap = dataset.fit_encoding(train_records)
    train_matrix = dataset.encode_matrix(train_records, emap)
    test_matrix = dataset.encode_matrix(test_records, emap)
    print(f"encoded dimension: {emap.dimension}")

    if cfg.subsample_fraction < 1.0:
        keep = dataset.stratified_indices(train_labels, cfg.subsample_fraction, cfg.subsample_seed)
        train_matrix = train_matrix[keep]
        train_labels = [train_labels[i] for i in keep]
        print(f"stratified subsample kept {len(keep)} training records")

    dataset.write_matrix(out / "train.matrix", train_matrix)
    dataset.write_labels(out / "train.labels", train_labels)
    dataset.write_matrix(out / "test.matrix", test_matrix)
    dataset.write_labels(out / "test.labels", test_labels)
    dataset.write_encoding(out / "encoding", emap)
    print(f"wrote prepared matrices to {out}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args)
    prepared = Path(args.prepared or cfg.prepared_dir)
    out = Path(args.out or cfg.model_dir)
    out.mkdir(parents=True, exist_ok=True)

    train_matrix = dataset.read_matrix(_require_file(prepared / "train.matrix", "prepared train matrix"))
    train_labels = dataset.read_labels(_require_file(prepared / "train.labels", "prepared train labels"))
    emap = dataset.read_encoding(_require_file(prepared / "encoding", "encoding sidecar"))
    if train_matrix.shape[1] != emap.dimension:
        raise DimensionMismatch(emap.dimension, train_matrix.shape[1], "train matrix vs encoding")

    log_lines = [f"ndae-nids {__version__} training log"]
    timings: list[tuple[str, float]] = []

    train_cfg = TrainConfig(cfg.learning_rate, cfg.epochs, cfg.batch_size, cfg.train_seed)
    t0 = time.perf_counter()
    try:
        stacked, (curve1, curve2) = train_stacked(
            train_matrix, list(cfg.dims1), list(cfg.dims2), train_cfg, cfg.feature_mode
        )
    except NonFiniteParameter as err:
        raise StageError(f"stacked feature extractor diverged: {err}") from err
    timings.append(("stacked_ndae", time.perf_counter() - t0))
    for stage, curve in (("ndae1", curve1), ("ndae2", curve2)):
        for epoch, loss in enumerate(curve, start=1):
            log_lines.append(f"loss {stage} epoch {epoch} {loss!r}")

    t0 = time.perf_counter()
    features = extract(stacked, train_matrix)
    timings.append(("extract", time.perf_counter() - t0))

    y = np.fromiter((l.index for l in train_labels), dtype=np.int64, count=len(train_labels))
    curves = {"ndae1": curve1, "ndae2": curve2}
    t0 = time.perf_counter()
    if cfg.classifier == "forest":
        params = ForestParams(
            n_trees=cfg.n_trees,
            max_depth=cfg.max_depth,
            min_samples_split=cfg.min_samples_split,
            mtry=cfg.mtry,
        )
        classifier = train_forest(features, y, params, cfg.forest_seed, n_jobs=cfg.n_jobs)
        timings.append(("forest", time.perf_counter() - t0))
    else:
        lr, epochs, batch = softmax_train_knobs(cfg)
        try:
            classifier, softmax_curve = train_softmax_baseline(
                features, y, TrainConfig(lr, epochs, batch, cfg.forest_seed)
            )
        except NonFiniteParameter as err:
            raise StageError(f"softmax head diverged: {err}") from err
        timings.append(("softmax", time.perf_counter() - t0))
        curves["softmax"] = softmax_curve
        for epoch, loss in enumerate(softmax_curve, start=1):
            log_lines.append(f"loss softmax epoch {epoch} {loss!r}")

    provenance = {
        "config_hash": config_hash(cfg),
        "subsample_seed": str(cfg.subsample_seed),
        "train_seed": str(cfg.train_seed),
        "forest_seed": str(cfg.forest_seed),
        "train_fingerprint": _file_sha256(prepared / "train.matrix"),
        "encoding_fingerprint": _file_sha256(prepared / "encoding"),
    }
    model = ModelBundle(emap, stacked, classifier, provenance, _class_counts(train_labels))
    bundle_io.save_bundle(out, model)

    for stage, seconds in timings:
        log_lines.append(f"timing {stage} wall_seconds {seconds:.3f}")
    (out / "train.log").write_text("\n".join(log_lines) + "\n")
    plots.save_loss_curves(curves, out / "train_loss.png")
    for stage, seconds in timings:
        print(f"{stage}: {seconds:.1f}s")
    print(f"saved model bundle to {out}")
    return 0


def _predict_labels(model: ModelBundle, features: np.ndarray) -> np.ndarray:
    if isinstance(model.classifier, Forest):
        pred, _ = predict_matrix(model.classifier, features)
        return pred
    return softmax_predict(model.classifier, features)


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    model_dir = Path(args.model or cfg.model_dir)
    prepared = Path(args.prepared or cfg.prepared_dir)
    out = Path(args.out or cfg.report_dir)
    out.mkdir(parents=True, exist_ok=True)

    model = bundle_io.load_bundle(model_dir)
    test_matrix_path = _require_file(prepared / "test.matrix", "prepared test matrix")
    test_matrix = dataset.read_matrix(test_matrix_path)
    test_labels = dataset.read_labels(_require_file(prepared / "test.labels", "prepared test labels"))

    expected = model.stacked.first.input_dim
    if test_matrix.shape[1] != expected:
        raise DimensionMismatch(expected, test_matrix.shape[1], "test matrix vs model input")
    if len(test_labels) != test_matrix.shape[0]:
        raise DimensionMismatch(test_matrix.shape[0], len(test_labels), "test labels vs matrix rows")

    features = extract(model.stacked, test_matrix)
    pred = _predict_labels(model, features)
    true = np.fromiter((l.index for l in test_labels), dtype=np.int64, count=len(test_labels))
    matrix = metrics.confusion_from_indices(pred, true)

    provenance = dict(model.provenance)
    provenance["test_fingerprint"] = _file_sha256(test_matrix_path)
    reference = None
    if cfg.reference_path:
        reference = metrics.read_reference_table(_require_file(cfg.reference_path, "reference table"))
    report = metrics.build_report(matrix, model.train_class_counts, provenance, reference)

    metrics.write_report(out / "report.tsv", report)
    rendered = metrics.render_table(report)
    (out / "report.txt").write_text(rendered)
    plots.save_confusion_heatmap(matrix, out / "confusion.png")
    plots.save_metric_bars(report, out / "metrics.png")
    print(rendered, end="")
    print(f"\nwrote report files to {out}")
    return 0


def cmd_report(args) -> int:
    report_path = _require_file(args.report_file, "machine-readable report")
    try:
        report = metrics.read_report(report_path)
    except ValueError as err:
        raise StageError(str(err)) from err
    out = Path(args.out or report_path.parent)
    out.mkdir(parents=True, exist_ok=True)
    rendered = metrics.render_table(report)
    (out / "report.txt").write_text(rendered)
    plots.save_metric_bars(report, out / "metrics.png")
    if report.matrix is not None:
        plots.save_confusion_heatmap(report.matrix, out / "confusion.png")
    print(rendered, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ndae-nids",
        description="Intrusion-detection pipeline: stacked NDAE features + random forest",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, seed=True):
        p.add_argument("--config", required=True, help="pipeline config file")
        if seed:
            p.add_argument("--seed", type=int, default=None, help="override every config seed")
        p.add_argument("--out", default=None, help="output directory")

    p = sub.add_parser("prepare", help="parse, encode, and write train/test matrices")
    common(p)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train the feature extractor and classifier")
    common(p)
    p.add_argument("--prepared", default=None, help="directory with prepared matrices")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained model on the prepared test set")
    common(p)
    p.add_argument("--model", default=None, help="model bundle directory")
    p.add_argument("--prepared", default=None, help="directory with prepared matrices")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="re-render an existing machine-readable report")
    p.add_argument("report_file", help="path to a report.tsv file")
    p.add_argument("--out", default=None, help="output directory")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (StageError, DatasetError, BundleError, DimensionMismatch, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
