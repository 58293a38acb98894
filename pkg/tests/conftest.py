"""Shared test fixtures: a synthetic KDD-shaped corpus and pipeline helpers.

The synthetic generator emits well-separated classes over the real 41-column
record layout, so end-to-end runs are fast and classifiable without the
published benchmark files.  Tests that do need the published files locate
them via the NDAE_NIDS_DATA env var (default ./data) and skip when absent.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import pytest

from ndae_nids.dataset import FEATURE_COLUMNS, AttackClass

COL = {name: i for i, name in enumerate(FEATURE_COLUMNS)}

CLASS_ATTACKS = {
    AttackClass.NORMAL: ["normal"],
    AttackClass.DOS: ["smurf", "neptune"],
    AttackClass.PROBE: ["ipsweep", "portsweep"],
    AttackClass.R2L: ["guess_passwd", "ftp_write"],
    AttackClass.U2R: ["rootkit", "buffer_overflow"],
}

CLASS_WEIGHTS = [0.40, 0.30, 0.15, 0.10, 0.05]

# (protocol, services, flag, count range, srv error rate, src_bytes range)
_PROFILES = {
    AttackClass.NORMAL: ("tcp", ["http", "smtp", "domain_u"], "SF", (1, 20), 0.0, (100, 2000)),
    AttackClass.DOS: ("icmp", ["ecr_i"], "SF", (350, 511), 0.9, (500, 1500)),
    AttackClass.PROBE: ("icmp", ["eco_i", "private"], "REJ", (80, 220), 0.4, (0, 40)),
    AttackClass.R2L: ("tcp", ["ftp", "telnet"], "SF", (1, 6), 0.0, (3000, 9000)),
    AttackClass.U2R: ("tcp", ["telnet", "shell"], "SF", (1, 4), 0.1, (20, 300)),
}


def synthetic_records(n: int, seed: int) -> list[tuple[list[str], str]]:
    """Deterministic (features, attack_name) pairs over all five classes."""
    rng = np.random.default_rng(seed)
    classes = list(AttackClass)
    out = []
    for _ in range(n):
        cls = classes[rng.choice(len(classes), p=CLASS_WEIGHTS)]
        protocol, services, flag, count_rng, err, src_rng = _PROFILES[cls]
        fields = ["0"] * len(FEATURE_COLUMNS)
        fields[COL["protocol_type"]] = protocol
        fields[COL["service"]] = services[rng.integers(0, len(services))]
        fields[COL["flag"]] = flag
        fields[COL["duration"]] = str(int(rng.integers(0, 60)))
        fields[COL["src_bytes"]] = str(int(rng.integers(*src_rng)))
        fields[COL["dst_bytes"]] = str(int(rng.integers(0, 5000)))
        count = int(rng.integers(*count_rng))
        fields[COL["count"]] = str(count)
        fields[COL["srv_count"]] = str(max(1, count - int(rng.integers(0, 5))))
        rate = min(1.0, max(0.0, err + float(rng.normal(0, 0.05))))
        fields[COL["serror_rate"]] = f"{rate:.2f}"
        fields[COL["srv_serror_rate"]] = f"{rate:.2f}"
        fields[COL["same_srv_rate"]] = f"{float(rng.uniform(0.5, 1.0)):.2f}"
        fields[COL["dst_host_count"]] = str(int(rng.integers(1, 256)))
        # num_outbound_cmds stays "0" everywhere: a constant column by design
        names = CLASS_ATTACKS[cls]
        out.append((fields, names[rng.integers(0, len(names))]))
    return out


def write_kdd99_file(path: Path, records: list[tuple[list[str], str]]) -> None:
    with open(path, "w") as fh:
        for fields, name in records:
            fh.write(",".join(fields) + f",{name}.\n")


def write_nslkdd_file(path: Path, records: list[tuple[list[str], str]], difficulty: int = 15) -> None:
    with open(path, "w") as fh:
        for fields, name in records:
            fh.write(",".join(fields) + f",{name},{difficulty}\n")


DEFAULT_SMOKE_CONFIG = {
    "format": "kdd99",
    "subsample_fraction": "1.0",
    "subsample_seed": "7",
    "dims1": "16,8",
    "dims2": "8",
    "feature_mode": "deepest",
    "learning_rate": "0.1",
    "epochs": "8",
    "batch_size": "64",
    "train_seed": "13",
    "classifier": "forest",
    "n_trees": "15",
    "forest_seed": "21",
    "n_jobs": "1",
    "softmax_learning_rate": "0.5",
    "softmax_epochs": "30",
}


def write_config(path: Path, train_path: Path, test_path: Path, **overrides) -> Path:
    values = dict(DEFAULT_SMOKE_CONFIG)
    values.update({k: str(v) for k, v in overrides.items()})
    lines = [f"train_path = {train_path}", f"test_path = {test_path}"]
    lines += [f"{k} = {v}" for k, v in values.items()]
    path.write_text("\n".join(lines) + "\n")
    return path


def make_workspace(root: Path, n_train: int = 700, n_test: int = 300, seed: int = 11, **overrides):
    """Raw files + config under ``root``; returns (config_path, train_path, test_path)."""
    root.mkdir(parents=True, exist_ok=True)
    train_path = root / "train.kdd"
    test_path = root / "test.kdd"
    write_kdd99_file(train_path, synthetic_records(n_train, seed))
    write_kdd99_file(test_path, synthetic_records(n_test, seed + 1))
    config_path = write_config(root / "pipeline.cfg", train_path, test_path, **overrides)
    return config_path, train_path, test_path


def published_file(name: str) -> Path | None:
    """Locate a published benchmark file, or None when it is not available."""
    root = Path(os.environ.get("NDAE_NIDS_DATA", "data"))
    path = root / name
    return path if path.is_file() else None


def require_published(name: str) -> Path:
    path = published_file(name)
    if path is None:
        pytest.skip(
            f"published dataset file {name!r} not present under "
            f"{os.environ.get('NDAE_NIDS_DATA', 'data')}/; "
            "run scripts/fetch_datasets.py to download it"
        )
    return path


@pytest.fixture(scope="session")
def smoke_run(tmp_path_factory):
    """One shared end-to-end run on the synthetic corpus (forest classifier)."""
    from ndae_nids import cli

    root = tmp_path_factory.mktemp("smoke")
    config_path, _, _ = make_workspace(root / "ws")
    prepared = root / "prepared"
    model = root / "model"
    report = root / "report"
    assert cli.main(["prepare", "--config", str(config_path), "--out", str(prepared)]) == 0
    assert cli.main(["train", "--config", str(config_path), "--prepared", str(prepared),
                     "--out", str(model)]) == 0
    assert cli.main(["eval", "--config", str(config_path), "--prepared", str(prepared),
                     "--model", str(model), "--out", str(report)]) == 0
    return {"config": config_path, "prepared": prepared, "model": model, "report": report}
