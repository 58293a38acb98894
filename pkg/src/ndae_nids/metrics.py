"""Confusion matrices, one-vs-rest metrics, and the evaluation report.

Per-class metrics only make sense one-vs-rest for a 5-class problem:
``binarize`` treats one class as positive and everything else as negative,
which collapses to the usual attack-vs-normal outcome definitions for two
classes.  Any metric whose denominator is zero is carried as None and
rendered as an em dash, never as 0 or 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dataset import AttackClass, N_CLASSES
from .neural import DimensionMismatch

REPORT_MAGIC = "ndae-report"
REPORT_VERSION = "v1"
UNDEFINED_MARK = "—"  # em dash in rendered tables
UNDEFINED_TOKEN = "undefined"  # in machine-readable files

METRIC_FIELDS = ("accuracy", "precision", "recall", "f_score", "false_alarm")

RENDER_HEADERS = (
    "Attack class", "No. training", "No. attacks",
    "Accuracy", "Precision", "Recall", "F-score", "False alarm",
)


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # (5, 5) int64; rows = true class, columns = predicted

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class BinaryCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "BinaryCounts") -> "BinaryCounts":
        return BinaryCounts(
            self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn
        )


@dataclass(frozen=True)
class MetricSet:
    accuracy: Optional[float]
    precision: Optional[float]
    recall: Optional[float]
    false_alarm: Optional[float]
    f_score: Optional[float]


@dataclass
class ReportRow:
    label: str  # class name or "Total"
    n_train: int
    n_test: int
    metrics: MetricSet


@dataclass
class ReferenceTable:
    """External metric values (percentages) printed beside computed results."""

    name: str
    rows: list[ReportRow]


@dataclass
class EvaluationReport:
    rows: list[ReportRow]          # 5 class rows then the Total row
    overall_accuracy: float        # multiclass trace / N
    provenance: dict[str, str] = field(default_factory=dict)
    reference: Optional[ReferenceTable] = None
    matrix: Optional[ConfusionMatrix] = None  # carried for figure re-rendering


def confusion(
    predictions: Sequence[AttackClass], labels: Sequence[AttackClass]
) -> ConfusionMatrix:
    """Tally cell (true, predicted) counts over aligned prediction/label lists."""
    if len(predictions) != len(labels):
        raise DimensionMismatch(len(labels), len(predictions), "confusion")
    if len(labels) == 0:
        raise ValueError("confusion needs at least one prediction")
    t = np.fromiter((l.index for l in labels), dtype=np.int64, count=len(labels))
    p = np.fromiter((q.index for q in predictions), dtype=np.int64, count=len(predictions))
    flat = np.bincount(t * N_CLASSES + p, minlength=N_CLASSES * N_CLASSES)
    return ConfusionMatrix(flat.reshape(N_CLASSES, N_CLASSES))


def confusion_from_indices(pred_idx: np.ndarray, true_idx: np.ndarray) -> ConfusionMatrix:
    """Same tally from integer class indices (fast path for matrix pipelines)."""
    pred_idx = np.asarray(pred_idx, dtype=np.int64)
    true_idx = np.asarray(true_idx, dtype=np.int64)
    if pred_idx.shape != true_idx.shape:
        raise DimensionMismatch(true_idx.shape, pred_idx.shape, "confusion")
    if len(true_idx) == 0:
        raise ValueError("confusion needs at least one prediction")
    flat = np.bincount(true_idx * N_CLASSES + pred_idx, minlength=N_CLASSES * N_CLASSES)
    return ConfusionMatrix(flat.reshape(N_CLASSES, N_CLASSES))


def binarize(matrix: ConfusionMatrix, cls: AttackClass) -> BinaryCounts:
    """One-vs-rest counts for one class: TP on the diagonal, FN/FP off it."""
    c = cls.index
    counts = matrix.counts
    tp = int(counts[c, c])
    fn = int(counts[c, :].sum()) - tp
    fp = int(counts[:, c].sum()) - tp
    tn = matrix.total - tp - fp - fn
    return BinaryCounts(tp, fp, tn, fn)


def _ratio(num: int, den: int) -> Optional[float]:
    return None if den == 0 else num / den


def compute_metrics(counts: BinaryCounts) -> MetricSet:
    """The five measures; zero-denominator values become None, not 0 or 1."""
    n = counts.total
    if n == 0:
        raise ValueError("metrics need at least one outcome")
    accuracy = (counts.tp + counts.tn) / n
    precision = _ratio(counts.tp, counts.tp + counts.fp)
    recall = _ratio(counts.tp, counts.tp + counts.fn)
    false_alarm = _ratio(counts.fp, counts.fp + counts.tn)
    if precision is None or recall is None or precision + recall == 0:
        f_score = None
    else:
        f_score = 2.0 * precision * recall / (precision + recall)
    return MetricSet(accuracy, precision, recall, false_alarm, f_score)


def build_report(
    matrix: ConfusionMatrix,
    train_counts: dict[AttackClass, int],
    provenance: Optional[dict[str, str]] = None,
    reference: Optional[ReferenceTable] = None,
) -> EvaluationReport:
    """One row per class in fixed order plus a micro-averaged Total row.

    The Total row's metrics come from the one-vs-rest counts summed over all
    classes; the headline overall accuracy is the multiclass trace / N.
    """
    rows = []
    total_counts = BinaryCounts(0, 0, 0, 0)
    for cls in AttackClass:
        bc = binarize(matrix, cls)
        total_counts = total_counts + bc
        rows.append(
            ReportRow(
                label=cls.value,
                n_train=int(train_counts.get(cls, 0)),
                n_test=int(matrix.counts[cls.index, :].sum()),
                metrics=compute_metrics(bc),
            )
        )
    rows.append(
        ReportRow(
            label="Total",
            n_train=sum(r.n_train for r in rows),
            n_test=matrix.total,
            metrics=compute_metrics(total_counts),
        )
    )
    overall = float(np.trace(matrix.counts)) / matrix.total
    return EvaluationReport(rows, overall, dict(provenance or {}), reference, matrix)


# ---------------------------------------------------------------------------
# rendering and machine-readable serialization
# ---------------------------------------------------------------------------

def _percent(value: Optional[float]) -> str:
    return UNDEFINED_MARK if value is None else f"{100.0 * value:.2f}"


def _render_rows(rows: list[ReportRow]) -> str:
    cells = [list(RENDER_HEADERS)]
    for r in rows:
        m = r.metrics
        cells.append([
            r.label, str(r.n_train), str(r.n_test),
            _percent(m.accuracy), _percent(m.precision), _percent(m.recall),
            _percent(m.f_score), _percent(m.false_alarm),
        ])
    widths = [max(len(row[i]) for row in cells) for i in range(len(RENDER_HEADERS))]
    lines = []
    for row in cells:
        first = row[0].ljust(widths[0])
        rest = "  ".join(v.rjust(w) for v, w in zip(row[1:], widths[1:]))
        lines.append((first + "  " + rest).rstrip())
    lines.insert(1, "-" * max(len(l) for l in lines))
    return "\n".join(lines)


def render_table(report: EvaluationReport) -> str:
    """Fixed-width table in the benchmark layout; reference table appended below."""
    parts = [_render_rows(report.rows)]
    parts.append(f"\nOverall accuracy (multiclass): {100.0 * report.overall_accuracy:.2f}")
    if report.reference is not None:
        parts.append(f"\nReference ({report.reference.name}):")
        parts.append(_render_rows(report.reference.rows))
    return "\n".join(parts) + "\n"


def _metric_token(value: Optional[float]) -> str:
    return UNDEFINED_TOKEN if value is None else repr(value)


def _parse_metric(token: str) -> Optional[float]:
    return None if token == UNDEFINED_TOKEN else float(token)


def _write_rows(fh, rows: list[ReportRow]) -> None:
    for r in rows:
        m = r.metrics
        fields = [r.label, str(r.n_train), str(r.n_test)] + [
            _metric_token(getattr(m, name)) for name in METRIC_FIELDS
        ]
        fh.write("\t".join(fields) + "\n")


def write_report(path, report: EvaluationReport) -> None:
    """Machine-readable report: provenance header plus a tab-delimited table."""
    with open(path, "w") as fh:
        fh.write(f"{REPORT_MAGIC} {REPORT_VERSION}\n")
        fh.write(f"overall_accuracy {report.overall_accuracy!r}\n")
        for key in sorted(report.provenance):
            fh.write(f"provenance {key} {report.provenance[key]}\n")
        if report.matrix is not None:
            for row in report.matrix.counts:
                fh.write("confusion " + " ".join(str(int(c)) for c in row) + "\n")
        fh.write("columns class\tn_train\tn_test\t" + "\t".join(METRIC_FIELDS) + "\n")
        _write_rows(fh, report.rows)
        if report.reference is not None:
            fh.write(f"reference {report.reference.name}\n")
            _write_rows(fh, report.reference.rows)


def _parse_row(line: str) -> ReportRow:
    fields = line.rstrip("\n").split("\t")
    if len(fields) != 3 + len(METRIC_FIELDS):
        raise ValueError(f"bad report row: {line!r}")
    values = {name: _parse_metric(tok) for name, tok in zip(METRIC_FIELDS, fields[3:])}
    return ReportRow(fields[0], int(fields[1]), int(fields[2]), MetricSet(**values))


def read_report(path) -> EvaluationReport:
    rows: list[ReportRow] = []
    ref_rows: list[ReportRow] = []
    matrix_rows: list[list[int]] = []
    ref_name = None
    overall = None
    provenance: dict[str, str] = {}
    current = rows
    with open(path) as fh:
        header = fh.readline().split()
        if header[:2] != [REPORT_MAGIC, REPORT_VERSION]:
            raise ValueError(f"{path}: not a {REPORT_MAGIC} {REPORT_VERSION} file")
        for line in fh:
            if line.startswith("overall_accuracy "):
                overall = float(line.split(" ", 1)[1])
            elif line.startswith("provenance "):
                _, key, value = line.rstrip("\n").split(" ", 2)
                provenance[key] = value
            elif line.startswith("confusion "):
                matrix_rows.append([int(c) for c in line.split()[1:]])
            elif line.startswith("columns "):
                continue
            elif line.startswith("reference "):
                ref_name = line.rstrip("\n").split(" ", 1)[1]
                current = ref_rows
            elif line.strip():
                current.append(_parse_row(line))
    if overall is None or not rows:
        raise ValueError(f"{path}: incomplete report file")
    reference = ReferenceTable(ref_name, ref_rows) if ref_name is not None else None
    matrix = ConfusionMatrix(np.array(matrix_rows, dtype=np.int64)) if matrix_rows else None
    return EvaluationReport(rows, overall, provenance, reference, matrix)


def read_reference_table(path) -> ReferenceTable:
    """Load an external reference table (tab-delimited percentages).

    Expected columns: class, n_train, n_test, then the five metrics as
    percentages; the undefined mark or an empty cell means undefined.
    A leading ``# name: <label>`` comment names the table.
    """
    name = "reference"
    rows = []
    with open(path) as fh:
        for line in fh:
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.startswith("#"):
                comment = stripped.lstrip("#").strip()
                if comment.lower().startswith("name:"):
                    name = comment.split(":", 1)[1].strip()
                continue
            fields = stripped.split("\t")
            if fields[0] == "class":
                continue
            if len(fields) != 3 + len(METRIC_FIELDS):
                raise ValueError(f"{path}: bad reference row {line!r}")
            values = {}
            for metric, tok in zip(METRIC_FIELDS, fields[3:]):
                tok = tok.strip()
                if tok in ("", UNDEFINED_MARK, UNDEFINED_TOKEN):
                    values[metric] = None
                else:
                    values[metric] = float(tok) / 100.0
            rows.append(ReportRow(fields[0], int(fields[1]), int(fields[2]), MetricSet(**values)))
    return ReferenceTable(name, rows)
