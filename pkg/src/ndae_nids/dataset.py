"""Connection-record parsing, label taxonomy, feature encoding, and matrix files.

Handles the two common benchmark file layouts: classic KDD '99 (41 features
plus a dot-terminated label) and NSL-KDD (same features, undotted label,
optional trailing difficulty column).  Categorical columns are one-hot
encoded over the categories seen in training data; numeric columns are
min-max normalized to [0, 1].
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

# The 41 feature columns of a connection record, in file order.
FEATURE_COLUMNS = (
    "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes",
    "land", "wrong_fragment", "urgent", "hot", "num_failed_logins",
    "logged_in", "num_compromised", "root_shell", "su_attempted", "num_root",
    "num_file_creations", "num_shells", "num_access_files",
    "num_outbound_cmds", "is_host_login", "is_guest_login", "count",
    "srv_count", "serror_rate", "srv_serror_rate", "rerror_rate",
    "srv_rerror_rate", "same_srv_rate", "diff_srv_rate",
    "srv_diff_host_rate", "dst_host_count", "dst_host_srv_count",
    "dst_host_same_srv_rate", "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate", "dst_host_srv_diff_host_rate",
    "dst_host_serror_rate", "dst_host_srv_serror_rate",
    "dst_host_rerror_rate", "dst_host_srv_rerror_rate",
)

CATEGORICAL_COLUMNS = ("protocol_type", "service", "flag")

N_FEATURES = len(FEATURE_COLUMNS)

MATRIX_MAGIC = "ndae-matrix"
LABELS_MAGIC = "ndae-labels"
ENCODING_MAGIC = "ndae-encoding"
FORMAT_VERSION = "v1"


class AttackClass(Enum):
    """The five report classes, in fixed row/tie-break order."""

    NORMAL = "Normal"
    DOS = "Dos"
    PROBE = "Probe"
    R2L = "R2l"
    U2R = "U2r"

    @property
    def index(self) -> int:
        return _CLASS_ORDER[self]

    @classmethod
    def from_index(cls, index: int) -> "AttackClass":
        return _CLASS_LIST[index]

    @classmethod
    def from_name(cls, name: str) -> "AttackClass":
        try:
            return _CLASS_BY_NAME[name.lower()]
        except KeyError:
            raise ValueError(f"not an attack class name: {name!r}") from None


_CLASS_LIST = list(AttackClass)
_CLASS_ORDER = {c: i for i, c in enumerate(_CLASS_LIST)}
_CLASS_BY_NAME = {c.value.lower(): c for c in _CLASS_LIST}

N_CLASSES = len(_CLASS_LIST)


class DatasetError(Exception):
    """Base class for record/encoding errors."""


class MalformedRecord(DatasetError):
    """A line whose field count does not match the declared format."""

    def __init__(self, line_number: int, field_count: int):
        self.line_number = line_number
        self.field_count = field_count
        super().__init__(f"line {line_number}: expected a full record, got {field_count} fields")


class UnknownLabel(DatasetError):
    """An attack name missing from the bundled taxonomy; never silently guessed."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown attack label {name!r}; extend the taxonomy file if legitimate")


class NonNumericValue(DatasetError):
    """A declared-numeric column whose value does not parse as a float."""

    def __init__(self, column: str, value: str):
        self.column = column
        self.value = value
        super().__init__(f"column {column!r}: non-numeric value {value!r}")


class FileFormatError(DatasetError):
    """A matrix/labels/encoding file with a bad header or inconsistent body."""


@dataclass
class RawRecord:
    features: list[str]  # exactly 41 string fields
    label: str           # attack name, trailing dot stripped
    difficulty: int | None = None


@dataclass
class LabeledExample:
    features: np.ndarray
    label: AttackClass


def parse_records(source: Iterable[str], fmt: str) -> list[RawRecord]:
    """Parse comma-separated connection records from a line stream.

    ``fmt`` is ``"kdd99"`` (42 fields, dotted label) or ``"nslkdd"``
    (42 or 43 fields, optional difficulty).  Blank lines are skipped;
    record order follows line order.
    """
    if fmt not in ("kdd99", "nslkdd"):
        raise ValueError(f"unknown record format {fmt!r}")
    records = []
    for line_number, line in enumerate(source, start=1):
        line = line.strip()
        if not line:
            continue
        fields = line.split(",")
        n = len(fields)
        difficulty = None
        if fmt == "kdd99":
            if n != N_FEATURES + 1:
                raise MalformedRecord(line_number, n)
            label = fields[N_FEATURES]
        else:
            if n == N_FEATURES + 2:
                label = fields[N_FEATURES]
                try:
                    difficulty = int(fields[N_FEATURES + 1])
                except ValueError:
                    raise MalformedRecord(line_number, n) from None
            elif n == N_FEATURES + 1:
                label = fields[N_FEATURES]
            else:
                raise MalformedRecord(line_number, n)
        label = label.strip().rstrip(".")
        if not label:
            raise MalformedRecord(line_number, n)
        records.append(RawRecord(fields[:N_FEATURES], label, difficulty))
    return records


def _load_taxonomy() -> dict[str, AttackClass]:
    text = resources.files("ndae_nids.data").joinpath("attack_taxonomy.txt").read_text()
    table = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        name, class_name = line.split()
        table[name] = AttackClass.from_name(class_name)
    return table


_TAXONOMY: dict[str, AttackClass] | None = None


def taxonomy() -> dict[str, AttackClass]:
    """The bundled attack-name -> class table (loaded once)."""
    global _TAXONOMY
    if _TAXONOMY is None:
        _TAXONOMY = _load_taxonomy()
    return _TAXONOMY


def map_label(label: str) -> AttackClass:
    """Map an attack name to its 5-way class via the bundled taxonomy."""
    try:
        return taxonomy()[label]
    except KeyError:
        raise UnknownLabel(label) from None


@dataclass
class EncodingMap:
    """Per-column encoding state fitted on training data.

    ``categories`` holds the sorted, duplicate-free category list per
    categorical column; ``ranges`` holds the (min, max) pair per numeric
    column.  Both are keyed by column name; vector layout follows
    FEATURE_COLUMNS order.
    """

    categories: dict[str, list[str]]
    ranges: dict[str, tuple[float, float]]

    @property
    def dimension(self) -> int:
        return sum(len(v) for v in self.categories.values()) + len(self.ranges)


def fit_encoding(records: Sequence[RawRecord]) -> EncodingMap:
    """Scan training records once and fit category lists and numeric ranges."""
    if not records:
        raise ValueError("cannot fit an encoding on an empty record list")
    columns = list(zip(*(r.features for r in records)))
    categories: dict[str, list[str]] = {}
    ranges: dict[str, tuple[float, float]] = {}
    for i, name in enumerate(FEATURE_COLUMNS):
        if name in CATEGORICAL_COLUMNS:
            categories[name] = sorted(set(columns[i]))
        else:
            values = _numeric_column(name, columns[i])
            ranges[name] = (float(values.min()), float(values.max()))
    return EncodingMap(categories, ranges)


def _numeric_column(name: str, values: Sequence[str]) -> np.ndarray:
    try:
        return np.asarray(values, dtype=np.float64)
    except ValueError:
        for v in values:
            try:
                float(v)
            except ValueError:
                raise NonNumericValue(name, v) from None
        raise  # unreachable: some value must have failed above


def encode(record: RawRecord, emap: EncodingMap) -> np.ndarray:
    """Encode a single record into a fixed-length [0, 1] float vector."""
    out = np.zeros(emap.dimension, dtype=np.float64)
    pos = 0
    for i, name in enumerate(FEATURE_COLUMNS):
        value = record.features[i]
        if name in CATEGORICAL_COLUMNS:
            cats = emap.categories[name]
            j = _category_index(cats, value)
            if j >= 0:
                out[pos + j] = 1.0  # unseen categories leave the group all-zero
            pos += len(cats)
        else:
            lo, hi = emap.ranges[name]
            try:
                v = float(value)
            except ValueError:
                raise NonNumericValue(name, value) from None
            out[pos] = 0.0 if hi == lo else min(max((v - lo) / (hi - lo), 0.0), 1.0)
            pos += 1
    return out


def _category_index(sorted_cats: list[str], value: str) -> int:
    j = bisect.bisect_left(sorted_cats, value)
    if j < len(sorted_cats) and sorted_cats[j] == value:
        return j
    return -1


def encode_matrix(records: Sequence[RawRecord], emap: EncodingMap) -> np.ndarray:
    """Encode records into an (n, dimension) matrix; column-vectorized.

    Row i equals ``encode(records[i], emap)`` exactly.
    """
    n = len(records)
    out = np.zeros((n, emap.dimension), dtype=np.float64)
    if n == 0:
        return out
    columns = list(zip(*(r.features for r in records)))
    pos = 0
    for i, name in enumerate(FEATURE_COLUMNS):
        if name in CATEGORICAL_COLUMNS:
            cats = emap.categories[name]
            if not cats:
                continue
            values = np.asarray(columns[i], dtype=object)
            sorted_arr = np.asarray(cats, dtype=object)
            idx = np.searchsorted(sorted_arr, values)
            idx_clipped = np.minimum(idx, len(cats) - 1)
            seen = sorted_arr[idx_clipped] == values
            rows = np.nonzero(seen)[0]
            out[rows, pos + idx_clipped[rows].astype(np.intp)] = 1.0
            pos += len(cats)
        else:
            lo, hi = emap.ranges[name]
            values = _numeric_column(name, columns[i])
            if hi == lo:
                scaled = np.zeros(n, dtype=np.float64)
            else:
                scaled = np.clip((values - lo) / (hi - lo), 0.0, 1.0)
            out[:, pos] = scaled
            pos += 1
    return out


def stratified_indices(labels: Sequence[AttackClass], fraction: float, seed: int) -> list[int]:
    """Deterministic per-class subsample; returns selected indices in input order.

    Each class keeps round(fraction * count) examples (half-up rounding),
    at least 1 when the class is non-empty.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    rng = np.random.default_rng(seed)
    by_class: dict[AttackClass, list[int]] = {c: [] for c in AttackClass}
    for i, label in enumerate(labels):
        by_class[label].append(i)
    selected: list[int] = []
    for cls in AttackClass:
        idx = by_class[cls]
        if not idx:
            continue
        k = max(1, math.floor(fraction * len(idx) + 0.5))
        k = min(k, len(idx))
        chosen = rng.choice(len(idx), size=k, replace=False)
        selected.extend(idx[j] for j in chosen)
    selected.sort()
    return selected


def stratified_subsample(
    examples: Sequence[LabeledExample], fraction: float, seed: int
) -> list[LabeledExample]:
    """Subsample labeled examples class-by-class; deterministic for a fixed seed."""
    idx = stratified_indices([e.label for e in examples], fraction, seed)
    return [examples[i] for i in idx]


# ---------------------------------------------------------------------------
# file formats: encoded matrices, label files, encoding sidecar
# ---------------------------------------------------------------------------

def write_matrix(path, matrix: np.ndarray) -> None:
    """Write an encoded matrix: header line, then one comma-separated row per record."""
    matrix = np.asarray(matrix, dtype=np.float64)
    rows, cols = matrix.shape
    with open(path, "w") as fh:
        fh.write(f"{MATRIX_MAGIC} {FORMAT_VERSION} {rows} {cols}\n")
        for row in matrix:
            fh.write(",".join(repr(v) for v in row.tolist()))
            fh.write("\n")


def read_matrix(path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != MATRIX_MAGIC or header[1] != FORMAT_VERSION:
            raise FileFormatError(f"{path}: not a {MATRIX_MAGIC} {FORMAT_VERSION} file")
        rows, cols = int(header[2]), int(header[3])
        if rows == 0:
            return np.zeros((0, cols), dtype=np.float64)
        matrix = np.loadtxt(fh, delimiter=",", dtype=np.float64, ndmin=2)
    if matrix.shape != (rows, cols):
        raise FileFormatError(
            f"{path}: header declares {rows}x{cols}, body is {matrix.shape[0]}x{matrix.shape[1]}"
        )
    return matrix


def write_labels(path, labels: Sequence[AttackClass]) -> None:
    with open(path, "w") as fh:
        fh.write(f"{LABELS_MAGIC} {FORMAT_VERSION} {len(labels)}\n")
        for label in labels:
            fh.write(label.value + "\n")


def read_labels(path) -> list[AttackClass]:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3 or header[0] != LABELS_MAGIC or header[1] != FORMAT_VERSION:
            raise FileFormatError(f"{path}: not a {LABELS_MAGIC} {FORMAT_VERSION} file")
        count = int(header[2])
        labels = [AttackClass.from_name(line.strip()) for line in fh if line.strip()]
    if len(labels) != count:
        raise FileFormatError(f"{path}: header declares {count} labels, found {len(labels)}")
    return labels


def write_encoding(path, emap: EncodingMap) -> None:
    """Write the encoding sidecar: one line per column, in column order."""
    with open(path, "w") as fh:
        fh.write(f"{ENCODING_MAGIC} {FORMAT_VERSION} {len(FEATURE_COLUMNS)}\n")
        for name in FEATURE_COLUMNS:
            if name in CATEGORICAL_COLUMNS:
                fh.write(f"categorical {name} {','.join(emap.categories[name])}\n")
            else:
                lo, hi = emap.ranges[name]
                fh.write(f"numeric {name} {lo!r} {hi!r}\n")


def read_encoding(path) -> EncodingMap:
    categories: dict[str, list[str]] = {}
    ranges: dict[str, tuple[float, float]] = {}
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3 or header[0] != ENCODING_MAGIC or header[1] != FORMAT_VERSION:
            raise FileFormatError(f"{path}: not a {ENCODING_MAGIC} {FORMAT_VERSION} file")
        for line in fh:
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 3:
                raise FileFormatError(f"{path}: bad encoding line {line!r}")
            kind, name = parts[0], parts[1]
            if kind == "categorical":
                categories[name] = parts[2].split(",") if parts[2] else []
            elif kind == "numeric":
                if len(parts) != 4:
                    raise FileFormatError(f"{path}: bad numeric line {line!r}")
                ranges[name] = (float(parts[2]), float(parts[3]))
            else:
                raise FileFormatError(f"{path}: unknown column kind {kind!r}")
    expected = set(FEATURE_COLUMNS)
    if set(categories) | set(ranges) != expected or set(categories) != set(CATEGORICAL_COLUMNS):
        raise FileFormatError(f"{path}: column set does not match the record schema")
    return EncodingMap(categories, ranges)
