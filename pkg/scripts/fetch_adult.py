"""Place the UCI Adult files under data/adult/.

The files are taken from the ``responsibly`` wheel, which bundles them and is
available from the package index. Pass ``--wheel`` to use a wheel that is
already on disk.
"""
from __future__ import annotations

import argparse
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

MEMBERS = ("adult.data", "adult.test", "adult.names")
PREFIX = "responsibly/dataset/adult/"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=Path(__file__).resolve().parents[1] / "data" / "adult", type=Path)
    parser.add_argument("--wheel", type=Path, default=None)
    args = parser.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        wheel = args.wheel
        if wheel is None:
            subprocess.run(
                [sys.executable, "-m", "pip", "download", "--no-deps", "--only-binary=:all:",
                 "responsibly==0.1.2", "-d", tmp],
                check=True,
            )
            wheel = next(Path(tmp).glob("responsibly-*.whl"))
        args.out.mkdir(parents=True, exist_ok=True)
        with zipfile.ZipFile(wheel) as zf:
            for member in MEMBERS:
                (args.out / member).write_bytes(zf.read(PREFIX + member))
    print(f"wrote {', '.join(MEMBERS)} to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
