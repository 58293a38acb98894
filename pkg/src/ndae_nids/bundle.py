"""Versioned model persistence: a directory of human-inspectable text files.

Layout: ``manifest``, ``encoding``, ``ndae1``, ``ndae2``, ``classifier``,
``checksums``.  Floats are written with 17 significant digits, which
round-trips every float64 bit pattern exactly, so load(save(bundle))
reproduces the model bit for bit.  The checksums file holds a sha256 per
sibling file and is verified on load.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .dataset import AttackClass, EncodingMap, read_encoding, write_encoding
from .forest import Forest, ForestParams, Leaf, Split, TreeNode
from .ndae import NdaeModel, SoftmaxHead, StackedModel
from .neural import Network, NeuralLayer

BUNDLE_MAGIC = "ndae-bundle"
BUNDLE_VERSION = "v1"
BUNDLE_FILES = ("manifest", "encoding", "ndae1", "ndae2", "classifier")


class BundleError(Exception):
    """Base class for persistence failures."""


class UnsupportedVersion(BundleError):
    pass


class CorruptBundle(BundleError):
    pass


@dataclass
class ModelBundle:
    encoding: EncodingMap
    stacked: StackedModel
    classifier: Union[Forest, SoftmaxHead]
    provenance: dict[str, str]
    train_class_counts: dict[AttackClass, int]
    version: str = BUNDLE_VERSION


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _fmt_row(row: np.ndarray) -> str:
    return ",".join(_fmt(v) for v in row.tolist())


def _write_layer(fh, tag: str, layer: NeuralLayer) -> None:
    fh.write(f"{tag} {layer.activation} {layer.out_dim} {layer.in_dim}\n")
    for row in layer.weights:
        fh.write(_fmt_row(row) + "\n")
    fh.write("bias " + _fmt_row(layer.biases) + "\n")


def _read_layer(lines, expect_tag: str) -> NeuralLayer:
    header = next(lines).split()
    if len(header) != 4 or header[0] != expect_tag:
        raise CorruptBundle(f"expected a {expect_tag!r} header, got {header!r}")
    activation, out_dim, in_dim = header[1], int(header[2]), int(header[3])
    weights = np.empty((out_dim, in_dim), dtype=np.float64)
    for i in range(out_dim):
        weights[i] = np.array(next(lines).split(","), dtype=np.float64)
    bias_line = next(lines).split(" ", 1)
    if bias_line[0] != "bias":
        raise CorruptBundle("missing bias line")
    biases = np.array(bias_line[1].split(","), dtype=np.float64)
    if biases.shape != (out_dim,):
        raise CorruptBundle("bias length does not match the layer header")
    return NeuralLayer(weights, biases, activation)


def _write_ndae(path: Path, model: NdaeModel) -> None:
    with open(path, "w") as fh:
        fh.write("ndae-net v1\n")
        fh.write(f"input_dim {model.input_dim}\n")
        fh.write("hidden_dims " + ",".join(str(d) for d in model.hidden_dims) + "\n")
        for layer in model.encoder.layers:
            _write_layer(fh, "layer", layer)
        _write_layer(fh, "reconstructor", model.reconstructor)


def _read_ndae(path: Path) -> NdaeModel:
    lines = iter(path.read_text().splitlines())
    if next(lines) != "ndae-net v1":
        raise UnsupportedVersion(f"{path}: unsupported network file version")
    input_dim = int(next(lines).split()[1])
    hidden_dims = [int(d) for d in next(lines).split()[1].split(",")]
    layers = [_read_layer(lines, "layer") for _ in hidden_dims]
    reconstructor = _read_layer(lines, "reconstructor")
    return NdaeModel(Network(layers), reconstructor, input_dim, hidden_dims)


def _write_tree(fh, tree: TreeNode) -> int:
    n_nodes = 0
    stack = [tree]
    pending = []
    while stack:
        node = stack.pop()
        n_nodes += 1
        if isinstance(node, Leaf):
            counts = " ".join(str(int(c)) for c in node.class_counts)
            pending.append(f"leaf {node.label.index} {counts}")
        else:
            pending.append(f"split {node.feature} {_fmt(node.threshold)}")
            stack.append(node.right)
            stack.append(node.left)
    fh.write("\n".join(pending) + "\n")
    return n_nodes


def _read_tree(lines, n_nodes: int) -> TreeNode:
    # pre-order stream; a stack of unfilled Split slots rebuilds the shape
    root: list[TreeNode] = [None]  # type: ignore[list-item]
    slots = [(root, 0)]
    for _ in range(n_nodes):
        if not slots:
            raise CorruptBundle("tree stream has more nodes than slots")
        parts = next(lines).split()
        node: TreeNode
        if parts[0] == "leaf":
            counts = np.array([int(c) for c in parts[2:]], dtype=np.int64)
            node = Leaf(AttackClass.from_index(int(parts[1])), counts)
        elif parts[0] == "split":
            node = Split(int(parts[1]), float(parts[2]), None, None)  # type: ignore[arg-type]
        else:
            raise CorruptBundle(f"unknown tree node kind {parts[0]!r}")
        holder, side = slots.pop()
        if isinstance(holder, list):
            holder[0] = node
        elif side == 0:
            holder.left = node
        else:
            holder.right = node
        if isinstance(node, Split):
            slots.append((node, 1))
            slots.append((node, 0))
    if slots:
        raise CorruptBundle("tree stream ended with unfilled nodes")
    return root[0]


def _write_forest(path: Path, forest: Forest) -> None:
    p = forest.params
    with open(path, "w") as fh:
        fh.write("ndae-forest v1\n")
        fh.write(
            f"params n_trees {p.n_trees} max_depth "
            f"{'none' if p.max_depth is None else p.max_depth} "
            f"min_samples_split {p.min_samples_split} "
            f"mtry {'auto' if p.mtry is None else p.mtry} "
            f"bootstrap {'true' if p.bootstrap else 'false'}\n"
        )
        fh.write(f"n_features {forest.n_features}\n")
        fh.write(f"mtry {forest.mtry}\n")
        fh.write(f"seed {forest.seed}\n")
        for t, tree in enumerate(forest.trees):
            buf = io.StringIO()
            n_nodes = _write_tree(buf, tree)
            fh.write(f"tree {t} {n_nodes}\n")
            fh.write(buf.getvalue())


def _read_forest(path: Path) -> Forest:
    lines = iter(path.read_text().splitlines())
    if next(lines) != "ndae-forest v1":
        raise UnsupportedVersion(f"{path}: unsupported forest file version")
    p = next(lines).split()
    if p[0] != "params":
        raise CorruptBundle("missing forest params line")
    kv = dict(zip(p[1::2], p[2::2]))
    params = ForestParams(
        n_trees=int(kv["n_trees"]),
        max_depth=None if kv["max_depth"] == "none" else int(kv["max_depth"]),
        min_samples_split=int(kv["min_samples_split"]),
        mtry=None if kv["mtry"] == "auto" else int(kv["mtry"]),
        bootstrap=kv["bootstrap"] == "true",
    )
    n_features = int(next(lines).split()[1])
    mtry = int(next(lines).split()[1])
    seed = int(next(lines).split()[1])
    trees = []
    for t in range(params.n_trees):
        header = next(lines).split()
        if header[0] != "tree" or int(header[1]) != t:
            raise CorruptBundle(f"expected tree {t} header, got {header!r}")
        trees.append(_read_tree(lines, int(header[2])))
    return Forest(trees, n_features, mtry, seed, params)


def _write_softmax(path: Path, head: SoftmaxHead) -> None:
    with open(path, "w") as fh:
        fh.write("ndae-softmax v1\n")
        _write_layer(fh, "layer", head.layer)


def _read_softmax(path: Path) -> SoftmaxHead:
    lines = iter(path.read_text().splitlines())
    if next(lines) != "ndae-softmax v1":
        raise UnsupportedVersion(f"{path}: unsupported softmax file version")
    return SoftmaxHead(_read_layer(lines, "layer"))


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def save_bundle(directory, bundle: ModelBundle) -> None:
    """Write every bundle file plus the checksums file; deterministic bytes."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    kind = "forest" if isinstance(bundle.classifier, Forest) else "softmax"
    with open(directory / "manifest", "w") as fh:
        fh.write(f"{BUNDLE_MAGIC} {bundle.version}\n")
        fh.write(f"feature_mode {bundle.stacked.feature_mode}\n")
        fh.write(f"classifier {kind}\n")
        for cls in AttackClass:
            fh.write(f"train_count_{cls.value} {bundle.train_class_counts.get(cls, 0)}\n")
        for key in sorted(bundle.provenance):
            fh.write(f"provenance {key} {bundle.provenance[key]}\n")
    write_encoding(directory / "encoding", bundle.encoding)
    _write_ndae(directory / "ndae1", bundle.stacked.first)
    _write_ndae(directory / "ndae2", bundle.stacked.second)
    if kind == "forest":
        _write_forest(directory / "classifier", bundle.classifier)
    else:
        _write_softmax(directory / "classifier", bundle.classifier)
    with open(directory / "checksums", "w") as fh:
        for name in BUNDLE_FILES:
            fh.write(f"{_sha256(directory / name)}  {name}\n")


def load_bundle(directory) -> ModelBundle:
    """Load and verify a bundle; checksum or version problems raise loudly."""
    directory = Path(directory)
    checksums_path = directory / "checksums"
    if not checksums_path.exists():
        raise CorruptBundle(f"{directory}: missing checksums file")
    expected = {}
    for line in checksums_path.read_text().splitlines():
        digest, name = line.split()
        expected[name] = digest
    for name in BUNDLE_FILES:
        path = directory / name
        if not path.exists():
            raise CorruptBundle(f"{directory}: missing bundle file {name!r}")
        if name not in expected:
            raise CorruptBundle(f"{directory}: checksums file lacks an entry for {name!r}")
        if _sha256(path) != expected[name]:
            raise CorruptBundle(f"{directory}: checksum mismatch for {name!r}")

    manifest = (directory / "manifest").read_text().splitlines()
    magic = manifest[0].split()
    if magic[0] != BUNDLE_MAGIC:
        raise CorruptBundle(f"{directory}: not a model bundle")
    if magic[1] != BUNDLE_VERSION:
        raise UnsupportedVersion(f"{directory}: unsupported bundle version {magic[1]!r}")
    feature_mode = "deepest"
    kind = "forest"
    provenance: dict[str, str] = {}
    train_counts: dict[AttackClass, int] = {}
    for line in manifest[1:]:
        if line.startswith("feature_mode "):
            feature_mode = line.split()[1]
        elif line.startswith("classifier "):
            kind = line.split()[1]
        elif line.startswith("train_count_"):
            key, value = line.split()
            train_counts[AttackClass.from_name(key[len("train_count_"):])] = int(value)
        elif line.startswith("provenance "):
            _, key, value = line.split(" ", 2)
            provenance[key] = value

    encoding = read_encoding(directory / "encoding")
    first = _read_ndae(directory / "ndae1")
    second = _read_ndae(directory / "ndae2")
    stacked = StackedModel(first, second, feature_mode)
    if kind == "forest":
        classifier: Union[Forest, SoftmaxHead] = _read_forest(directory / "classifier")
    else:
        classifier = _read_softmax(directory / "classifier")
    return ModelBundle(encoding, stacked, classifier, provenance, train_counts, magic[1])
