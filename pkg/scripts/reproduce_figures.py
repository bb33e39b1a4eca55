"""Write the CSV behind each figure preset into one directory.

    python scripts/reproduce_figures.py --out figures/

Tables are cached, so a second run only redoes the cheap curve steps.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from marton import cli


@dataclass(frozen=True)
class Job:
    name: str
    argv: tuple[str, ...]


JOBS = (
    Job("fig1_sweep_instance1.csv", ("sweep", "--figure", "1")),
    Job("fig2_exact_exponent_instance1.csv", ("ahlswede-exact", "--figure", "2")),
    Job("fig3_marton_inverse_instance1.csv", ("marton-inverse", "--figure", "3")),
    Job("fig3_blahut_inverse_instance1.csv", ("blahut-inverse", "--figure", "3")),
    Job("fig3_marton_exponent_instance1.csv", ("exponent", "--figure", "3", "--kind", "marton")),
    Job("fig3_blahut_exponent_instance1.csv", ("exponent", "--figure", "3", "--kind", "blahut")),
    Job("fig5_sweep_instance2.csv", ("sweep", "--figure", "5")),
    Job("fig6_exact_exponent_instance2.csv", ("ahlswede-exact", "--figure", "6")),
)


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=Path("figures"))
    p.add_argument("--table-cache", default=None)
    args = p.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)
    extra = ("--table-cache", args.table_cache) if args.table_cache else ()
    for job in JOBS:
        t0 = time.perf_counter()
        code = cli.main([*job.argv, *extra, "-o", str(args.out / job.name)])
        print(f"{job.name}: exit {code} in {time.perf_counter() - t0:.1f}s")
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
