#!/usr/bin/env python3
"""Desk-scale end-to-end run: dataset, training, evaluation, latency.

Generates 200 notes from the demo electric-piano voice, trains a
hidden-64 model for 8000 steps (expect on the order of fifteen minutes on
a laptop CPU), then reports the test-split envelope error, segmented SNR,
and the per-frame inference latency.  Results land in --workdir.
"""

import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).parent))
from make_demo_bank import build_bank  # noqa: E402

from fmtone.cli import main as fmtone  # noqa: E402


def run(argv):
    print("+ fmtone " + " ".join(argv))
    code = fmtone(argv)
    if code != 0:
        sys.exit(code)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", default="desk_run")
    parser.add_argument("--voice", default="10")
    parser.add_argument("--seed", default="2024")
    args = parser.parse_args()

    work = pathlib.Path(args.workdir)
    work.mkdir(parents=True, exist_ok=True)
    bank = work / "demo_bank.syx"
    bank.write_bytes(build_bank())

    ds = work / "epiano"
    model = work / "epiano.fmtm"
    run(["gen", "--patch", str(bank), "--voice", args.voice,
         "--notes", "200", "--frames", "1000", "--seed", args.seed,
         "--out", str(ds)])
    run(["train", "--dataset", str(ds), "--hidden", "64", "--steps", "8000",
         "--batch", "16", "--seed", args.seed, "--out", str(model)])
    run(["eval", "--dataset", f"{ds}.test.fmtd", "--model", str(model),
         "--patch", str(bank), "--voice", args.voice,
         "--out", str(work / "eval.csv")])
    run(["bench", "--model", str(model), "--patch", str(bank),
         "--voice", args.voice, "--frames", "3000"])
    print(f"artifacts in {work}/")


if __name__ == "__main__":
    main()
