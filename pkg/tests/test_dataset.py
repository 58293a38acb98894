"""Parsing, taxonomy, encoding, subsampling, and the matrix file formats."""

import io

import numpy as np
import pytest

from conftest import CLASS_ATTACKS, synthetic_records, write_kdd99_file
from ndae_nids import dataset
from ndae_nids.dataset import (
    AttackClass,
    EncodingMap,
    LabeledExample,
    MalformedRecord,
    NonNumericValue,
    RawRecord,
    UnknownLabel,
    encode,
    encode_matrix,
    fit_encoding,
    map_label,
    parse_records,
    stratified_subsample,
)

# first record of the published 10% training file
KDD_FIRST_LINE = (
    "0,tcp,http,SF,215,45076,0,0,0,0,0,1,0,0,0,0,0,0,0,0,0,0,8,8,"
    "0.00,0.00,0.00,0.00,1.00,0.00,0.00,9,9,1.00,0.00,0.11,0.00,0.00,0.00,0.00,0.00,normal."
)


def _record(**overrides) -> RawRecord:
    fields = KDD_FIRST_LINE.split(",")[:41]
    for name, value in overrides.items():
        fields[dataset.FEATURE_COLUMNS.index(name)] = value
    return RawRecord(fields, "normal")


class TestParsing:
    def test_kdd99_line(self):
        records = parse_records([KDD_FIRST_LINE], "kdd99")
        assert len(records) == 1
        r = records[0]
        assert r.label == "normal"  # trailing dot stripped
        assert len(r.features) == 41
        assert r.features[1] == "tcp"
        assert r.difficulty is None

    def test_nslkdd_line_with_difficulty(self):
        line = KDD_FIRST_LINE.rstrip(".") + ",21"
        r = parse_records([line], "nslkdd")[0]
        assert r.label == "normal"
        assert r.difficulty == 21

    def test_nslkdd_line_without_difficulty(self):
        line = KDD_FIRST_LINE.rstrip(".")
        r = parse_records([line], "nslkdd")[0]
        assert r.label == "normal"
        assert r.difficulty is None

    def test_wrong_arity_raises(self):
        bad = ",".join(["0"] * 40)
        with pytest.raises(MalformedRecord) as exc:
            parse_records([KDD_FIRST_LINE, bad], "kdd99")
        assert exc.value.line_number == 2
        assert exc.value.field_count == 40

    def test_blank_lines_skipped_order_preserved(self):
        lines = [KDD_FIRST_LINE, "", "  ", KDD_FIRST_LINE]
        records = parse_records(lines, "kdd99")
        assert len(records) == 2

    def test_stream_input(self):
        stream = io.StringIO(KDD_FIRST_LINE + "\n" + KDD_FIRST_LINE + "\n")
        assert len(parse_records(stream, "kdd99")) == 2

    def test_unknown_format_rejected(self):
        with pytest.raises(ValueError):
            parse_records([KDD_FIRST_LINE], "csv")


class TestTaxonomy:
    def test_normal_maps_to_normal(self):
        assert map_label("normal") is AttackClass.NORMAL

    def test_smurf_is_dos(self):
        assert map_label("smurf") is AttackClass.DOS

    def test_unknown_label_is_hard_error(self):
        with pytest.raises(UnknownLabel):
            map_label("xyzzy")

    def test_covers_all_39_attack_names(self):
        table = dataset.taxonomy()
        attacks = {name for name, cls in table.items() if cls is not AttackClass.NORMAL}
        assert len(attacks) == 39
        by_class = {cls: 0 for cls in AttackClass}
        for cls in table.values():
            by_class[cls] += 1
        assert by_class[AttackClass.DOS] == 10
        assert by_class[AttackClass.PROBE] == 6
        assert by_class[AttackClass.R2L] == 16
        assert by_class[AttackClass.U2R] == 7

    def test_test_only_names_covered(self):
        # names that appear only in the test sets must still map
        assert map_label("apache2") is AttackClass.DOS
        assert map_label("mscan") is AttackClass.PROBE
        assert map_label("snmpguess") is AttackClass.R2L
        assert map_label("xterm") is AttackClass.U2R

    def test_class_count_conservation(self):
        records = synthetic_records(400, seed=3)
        labels = [map_label(name) for _, name in records]
        per_class = {cls: sum(1 for l in labels if l is cls) for cls in AttackClass}
        assert sum(per_class.values()) == len(records)


class TestEncodingFit:
    def test_categories_sorted_and_deduped(self):
        records = [_record(protocol_type=p) for p in ("udp", "tcp", "icmp", "tcp")]
        emap = fit_encoding(records)
        assert emap.categories["protocol_type"] == ["icmp", "tcp", "udp"]

    def test_single_record_degenerate_ranges(self):
        emap = fit_encoding([_record()])
        for lo, hi in emap.ranges.values():
            assert lo == hi

    def test_direct_scan_range(self):
        records = [_record(src_bytes="0"), _record(src_bytes="255")]
        emap = fit_encoding(records)
        assert emap.ranges["src_bytes"] == (0.0, 255.0)

    def test_non_numeric_value_raises(self):
        with pytest.raises(NonNumericValue) as exc:
            fit_encoding([_record(duration="fast")])
        assert exc.value.column == "duration"
        assert exc.value.value == "fast"

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            fit_encoding([])

    def test_dimension_formula(self):
        records = [_record(protocol_type=p) for p in ("tcp", "udp")]
        emap = fit_encoding(records)
        n_categorical = sum(len(v) for v in emap.categories.values())
        assert emap.dimension == 38 + n_categorical


class TestEncode:
    def _fitted(self, n=200, seed=5):
        raw = synthetic_records(n, seed)
        records = [RawRecord(fields, name) for fields, name in raw]
        return records, fit_encoding(records)

    def test_onehot_groups_sum_to_one_on_training(self):
        records, emap = self._fitted()
        matrix = encode_matrix(records, emap)
        pos = 0
        for name in dataset.FEATURE_COLUMNS:
            if name in dataset.CATEGORICAL_COLUMNS:
                width = len(emap.categories[name])
                np.testing.assert_array_equal(matrix[:, pos:pos + width].sum(axis=1), 1.0)
                pos += width
            else:
                pos += 1

    def test_unseen_category_encodes_all_zero(self):
        records, emap = self._fitted()
        unseen = _record(service="uucp")
        vec = encode(unseen, emap)
        pos = 0
        for name in dataset.FEATURE_COLUMNS:
            if name in dataset.CATEGORICAL_COLUMNS:
                width = len(emap.categories[name])
                if name == "service":
                    assert vec[pos:pos + width].sum() == 0.0
                pos += width
            else:
                pos += 1

    def test_value_at_max_encodes_one(self):
        records = [_record(src_bytes="10"), _record(src_bytes="50")]
        emap = fit_encoding(records)
        vec = encode(records[1], emap)
        col = _encoded_column(emap, "src_bytes")
        assert vec[col] == 1.0

    def test_constant_column_encodes_zero(self):
        records, emap = self._fitted()
        matrix = encode_matrix(records, emap)
        col = _encoded_column(emap, "num_outbound_cmds")
        assert emap.ranges["num_outbound_cmds"][0] == emap.ranges["num_outbound_cmds"][1]
        np.testing.assert_array_equal(matrix[:, col], 0.0)

    def test_out_of_range_test_value_clamps(self):
        records = [_record(src_bytes="10"), _record(src_bytes="50")]
        emap = fit_encoding(records)
        col = _encoded_column(emap, "src_bytes")
        assert encode(_record(src_bytes="999"), emap)[col] == 1.0
        assert encode(_record(src_bytes="1"), emap)[col] == 0.0

    def test_training_features_lie_in_unit_interval(self):
        records, emap = self._fitted()
        matrix = encode_matrix(records, emap)
        assert matrix.min() >= 0.0 and matrix.max() <= 1.0

    def test_matrix_rows_equal_scalar_encode(self):
        records, emap = self._fitted(n=60, seed=9)
        matrix = encode_matrix(records, emap)
        for i in (0, 17, 59):
            np.testing.assert_array_equal(matrix[i], encode(records[i], emap))

    def test_onehot_round_trip_recovers_categories(self):
        records, emap = self._fitted(n=80, seed=2)
        matrix = encode_matrix(records, emap)
        pos = 0
        for ci, name in enumerate(dataset.FEATURE_COLUMNS):
            if name in dataset.CATEGORICAL_COLUMNS:
                cats = emap.categories[name]
                for row, record in zip(matrix, records):
                    decoded = cats[int(np.argmax(row[pos:pos + len(cats)]))]
                    assert decoded == record.features[ci]
                pos += len(cats)
            else:
                pos += 1


def _encoded_column(emap: EncodingMap, column: str) -> int:
    pos = 0
    for name in dataset.FEATURE_COLUMNS:
        if name == column:
            return pos
        pos += len(emap.categories[name]) if name in dataset.CATEGORICAL_COLUMNS else 1
    raise KeyError(column)


class TestStratifiedSubsample:
    def _examples(self, sizes: dict[AttackClass, int]) -> list[LabeledExample]:
        out = []
        for cls, size in sizes.items():
            out.extend(LabeledExample(np.array([float(len(out))]), cls) for _ in range(size))
        return out

    def test_fraction_one_is_identity(self):
        examples = self._examples({AttackClass.NORMAL: 10, AttackClass.DOS: 5})
        result = stratified_subsample(examples, 1.0, seed=0)
        assert result == examples

    def test_per_class_rounding_rule(self):
        examples = self._examples({AttackClass.NORMAL: 1000, AttackClass.DOS: 10})
        result = stratified_subsample(examples, 0.1, seed=1)
        counts = {cls: sum(1 for e in result if e.label is cls) for cls in AttackClass}
        assert counts[AttackClass.NORMAL] == 100
        assert counts[AttackClass.DOS] == 1

    def test_nonempty_class_keeps_at_least_one(self):
        examples = self._examples({AttackClass.U2R: 3, AttackClass.NORMAL: 1000})
        result = stratified_subsample(examples, 0.01, seed=2)
        assert sum(1 for e in result if e.label is AttackClass.U2R) == 1

    def test_same_seed_same_output(self):
        examples = self._examples({AttackClass.NORMAL: 50, AttackClass.PROBE: 30})
        a = stratified_subsample(examples, 0.4, seed=3)
        b = stratified_subsample(examples, 0.4, seed=3)
        assert a == b

    def test_fraction_out_of_range_rejected(self):
        examples = self._examples({AttackClass.NORMAL: 4})
        with pytest.raises(ValueError):
            stratified_subsample(examples, 0.0, seed=0)
        with pytest.raises(ValueError):
            stratified_subsample(examples, 1.5, seed=0)


class TestFileFormats:
    def test_matrix_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        matrix = rng.uniform(0, 1, size=(7, 5))
        path = tmp_path / "m.matrix"
        dataset.write_matrix(path, matrix)
        header = path.read_text().splitlines()[0]
        assert header == "ndae-matrix v1 7 5"
        np.testing.assert_array_equal(dataset.read_matrix(path), matrix)

    def test_matrix_bad_header_rejected(self, tmp_path):
        path = tmp_path / "m.matrix"
        path.write_text("garbage\n")
        with pytest.raises(dataset.FileFormatError):
            dataset.read_matrix(path)

    def test_matrix_row_count_mismatch_rejected(self, tmp_path):
        path = tmp_path / "m.matrix"
        path.write_text("ndae-matrix v1 2 2\n0.0,0.0\n")
        with pytest.raises(dataset.FileFormatError):
            dataset.read_matrix(path)

    def test_labels_round_trip(self, tmp_path):
        labels = [AttackClass.NORMAL, AttackClass.U2R, AttackClass.DOS]
        path = tmp_path / "l.labels"
        dataset.write_labels(path, labels)
        assert dataset.read_labels(path) == labels

    def test_encoding_round_trip(self, tmp_path):
        raw = synthetic_records(50, seed=4)
        emap = fit_encoding([RawRecord(f, n) for f, n in raw])
        path = tmp_path / "encoding"
        dataset.write_encoding(path, emap)
        loaded = dataset.read_encoding(path)
        assert loaded.categories == emap.categories
        assert loaded.ranges == emap.ranges

    def test_kdd_writer_round_trips_through_parser(self, tmp_path):
        raw = synthetic_records(30, seed=8)
        path = tmp_path / "raw.kdd"
        write_kdd99_file(path, raw)
        with open(path) as fh:
            records = parse_records(fh, "kdd99")
        assert len(records) == 30
        assert [r.label for r in records] == [name for _, name in raw]
        taxonomy_names = {n for names in CLASS_ATTACKS.values() for n in names}
        assert {r.label for r in records} <= taxonomy_names
