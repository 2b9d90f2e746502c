#!/usr/bin/env python3
"""Shape-gate retention statistics over a synthetic repo population.

Plants a seeded population of dependency trees with known depth and
fan-out, runs them through the same metric and filter code the pipeline
uses, and reports retention plus per-value histograms. Useful for
sanity-checking gate bounds before touching a real corpus.
"""

from __future__ import annotations

import argparse
import random
import sys
from pathlib import Path

from depalign import (
    BinSpec,
    DependencyTree,
    FilterPolicy,
    filter_repo,
    histogram,
    repo_metrics,
)


def planted_tree(depth: int, siblings: int) -> DependencyTree:
    """A tree whose max depth and max fan-out are exactly as requested."""
    if depth == 1:
        return DependencyTree("root", False, (), 1)
    chain = DependencyTree(f"chain{depth - 2}", False, (), 1)
    for i in range(depth - 3, -1, -1):
        chain = DependencyTree(f"chain{i}", False, (chain,), chain.depth + 1)
    leaves = tuple(
        DependencyTree(f"leaf{i}", False, (), 1) for i in range(siblings - 1)
    )
    kids = (chain,) + leaves
    return DependencyTree("root", False, kids, 1 + max(k.depth for k in kids))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repos", type=int, default=200)
    parser.add_argument("--seed", type=int, default=20260814)
    parser.add_argument("--depth-max", type=int, default=10,
                        help="largest planted depth (planted range is 1..N)")
    parser.add_argument("--siblings-max", type=int, default=10,
                        help="largest planted fan-out")
    parser.add_argument("--keep-depth", default="3:6",
                        help="kept depth range, inclusive, as lo:hi")
    parser.add_argument("--keep-siblings", default="3:10",
                        help="kept fan-out range, inclusive, as lo:hi")
    parser.add_argument("--out-dir", default=None,
                        help="also write metrics.csv and histogram CSVs here")
    return parser


def _parse_range(text: str, flag: str) -> tuple[int, int]:
    try:
        lo, hi = (int(part) for part in text.split(":"))
    except ValueError:
        raise SystemExit(f"{flag} must look like lo:hi, got {text!r}")
    return lo, hi


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    depth_lo, depth_hi = _parse_range(args.keep_depth, "--keep-depth")
    sib_lo, sib_hi = _parse_range(args.keep_siblings, "--keep-siblings")
    policy = FilterPolicy(depth_lo, depth_hi, sib_lo, sib_hi)

    rng = random.Random(args.seed)
    rows = []
    decisions = []
    for i in range(args.repos):
        depth = rng.randint(1, args.depth_max)
        siblings = 0 if depth == 1 else rng.randint(1, args.siblings_max)
        tree = planted_tree(depth, siblings)
        metrics = repo_metrics(f"synth-{i:04d}", [tree], [])
        rows.append(metrics)
        decisions.append(filter_repo(metrics, policy))

    kept = sum(d.kept for d in decisions)
    print(f"repos: {len(rows)}  kept: {kept}  dropped: {len(rows) - kept}")
    reasons: dict[str, int] = {}
    for decision in decisions:
        if decision.reason:
            reasons[decision.reason] = reasons.get(decision.reason, 0) + 1
    for reason, count in sorted(reasons.items()):
        print(f"  {reason}: {count}")

    tables = {}
    for field in ("depth", "siblings"):
        attr = "max_depth" if field == "depth" else "max_siblings"
        values = [getattr(r, attr) for r in rows]
        tables[field] = histogram(rows, field, BinSpec(min(values), max(values)))
        print(f"\n{field} histogram (value count):")
        for label, count in tables[field]:
            print(f"  {label:>3} {count}")

    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        lines = ["repo_id,max_depth,max_siblings,kept,reason"]
        for metrics, decision in zip(rows, decisions):
            lines.append(
                f"{metrics.repo_id},{metrics.max_depth},"
                f"{metrics.max_siblings},"
                f"{'true' if decision.kept else 'false'},"
                f"{decision.reason or ''}"
            )
        (out / "metrics.csv").write_text("\n".join(lines) + "\n", "utf-8")
        for field, table in tables.items():
            body = "value,count\n" + "".join(
                f"{label},{count}\n" for label, count in table
            )
            (out / f"{field}_histogram.csv").write_text(body, "utf-8")
        print(f"\nwrote CSVs under {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
