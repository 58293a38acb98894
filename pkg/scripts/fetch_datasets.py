#!/usr/bin/env python3
"""Download the KDD Cup '99 and NSL-KDD benchmark files into a data directory.

Usage: python3 scripts/fetch_datasets.py [data_dir]

Grabs the 10% KDD '99 training file, the corrected test set, and the
NSL-KDD KDDTrain+/KDDTest+ files, decompressing where needed.  Files that
already exist are left alone.
"""

import gzip
import shutil
import sys
import urllib.request
from pathlib import Path

KDD99 = [
    ("http://kdd.ics.uci.edu/databases/kddcup99/kddcup.data_10_percent.gz",
     "kddcup.data_10_percent"),
    ("http://kdd.ics.uci.edu/databases/kddcup99/corrected.gz", "corrected"),
]

NSLKDD = [
    ("https://raw.githubusercontent.com/defcom17/NSL_KDD/master/KDDTrain%2B.txt",
     "KDDTrain+.txt"),
    ("https://raw.githubusercontent.com/defcom17/NSL_KDD/master/KDDTest%2B.txt",
     "KDDTest+.txt"),
]


def fetch(url: str, dest: Path) -> None:
    if dest.exists():
        print(f"already present: {dest}")
        return
    print(f"downloading {url}")
    tmp = dest.with_suffix(dest.suffix + ".part")
    with urllib.request.urlopen(url) as response, open(tmp, "wb") as out:
        shutil.copyfileobj(response, out)
    if url.endswith(".gz"):
        with gzip.open(tmp, "rb") as src, open(dest, "wb") as out:
            shutil.copyfileobj(src, out)
        tmp.unlink()
    else:
        tmp.rename(dest)
    print(f"wrote {dest}")


def main() -> int:
    data_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("data")
    data_dir.mkdir(parents=True, exist_ok=True)
    for url, name in KDD99 + NSLKDD:
        fetch(url, data_dir / name)
    return 0


if __name__ == "__main__":
    sys.exit(main())
