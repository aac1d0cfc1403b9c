"""Rewrite the golden outputs from the current library.

Run ``python3 tests/golden/regenerate.py`` after an intentional change to
the filter command; the files are outputs of the library, not hand edited.
"""
from pathlib import Path

from gspfilter.cli import main

HERE = Path(__file__).resolve().parent
CASES = ("white", "deriv1", "deriv2")
FILES = ("mse.csv", "summary.json")


def regenerate() -> None:
    for name in CASES:
        d = HERE / name
        out = d / "out"
        code = main(["filter", "--config", str(d / "config.ini"), "--out", str(out), "--quiet"])
        if code != 0:
            raise SystemExit(f"{name}: filter exited with {code}")
        for f in FILES:
            (d / f).write_bytes((out / f).read_bytes())
        for p in out.iterdir():
            p.unlink()
        out.rmdir()


if __name__ == "__main__":
    regenerate()
