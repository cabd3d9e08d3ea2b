"""
List the training runs stored in an output directory.

Usage:
    python scripts/list_runs.py results [--limit 20]
"""

import argparse
import sys

sys.path.insert(0, ".")

from backend.fairexp.storage.artifacts import list_runs, read_run  # noqa: E402


def run_rows(out_dir):
    rows = []
    for path in list_runs(out_dir):
        run = read_run(path)
        rows.append(
            (
                run.get("cell", path.stem),
                run["seed"],
                run["method"],
                run["best_epoch"],
                run["test_report"]["score"],
            )
        )
    return rows


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    parser.add_argument("out_dir")
    parser.add_argument("--limit", type=int, default=None)
    args = parser.parse_args(argv)

    rows = run_rows(args.out_dir)
    if not rows:
        print(f"no runs under {args.out_dir}")
        return 1
    for cell, seed, method, epoch, score in rows[: args.limit]:
        print(
            f"{cell:<48} seed={seed:<3} {method:<9} epoch={epoch:<4} score={score:.2f}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
