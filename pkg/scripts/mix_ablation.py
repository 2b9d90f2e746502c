#!/usr/bin/env python3
"""Sweep the math/code mixing ratio over synthetic pools.

For each requested ratio, mixes two labelled pools and reports the
achieved composition next to the quota the rounding rule promises.
Optionally writes each mixed stream to a JSONL dataset so byte-level
determinism can be checked across runs.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from depalign import (
    CafSample,
    MixConfig,
    math_quota,
    mix_stream,
    write_dataset,
)


def synthetic_pool(task: str, size: int) -> list[CafSample]:
    return [
        CafSample(
            task=task,
            input_x=f"input {task} {i}",
            dependencies_d=(),
            target_y=f"target {task} {i}",
            provenance=f"synthetic:{task}:{i:05d}",
        )
        for i in range(size)
    ]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--alphas", default="0.0,0.25,0.5,0.75,1.0",
                        help="comma-separated math ratios to sweep")
    parser.add_argument("--total", type=int, default=8000)
    parser.add_argument("--seed", type=int, default=17)
    parser.add_argument("--math-pool", type=int, default=8000)
    parser.add_argument("--code-pool", type=int, default=8000)
    parser.add_argument("--policy", choices=("exact_quota", "bernoulli"),
                        default="exact_quota")
    parser.add_argument("--out-dir", default=None,
                        help="write mixed_<alpha>.jsonl datasets here")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        alphas = [float(part) for part in args.alphas.split(",") if part]
    except ValueError:
        raise SystemExit(f"--alphas must be comma-separated floats, got {args.alphas!r}")

    math_pool = synthetic_pool("math", args.math_pool)
    code_pool = synthetic_pool("code", args.code_pool)
    out = Path(args.out_dir) if args.out_dir else None
    if out:
        out.mkdir(parents=True, exist_ok=True)

    print(f"policy: {args.policy}  total: {args.total}  seed: {args.seed}")
    print(f"{'alpha':>6} {'quota':>6} {'math':>6} {'code':>6}")
    for alpha in alphas:
        config = MixConfig(alpha=alpha, seed=args.seed, total=args.total,
                           policy=args.policy)
        mixed = mix_stream(math_pool, code_pool, config)
        n_math = sum(s.task == "math" for s in mixed)
        quota = math_quota(alpha, args.total)
        marker = "" if (args.policy != "exact_quota" or n_math == quota) else "  MISMATCH"
        print(f"{alpha:>6.2f} {quota:>6} {n_math:>6} {len(mixed) - n_math:>6}{marker}")
        if out:
            path = out / f"mixed_{alpha:.2f}.jsonl"
            manifest = write_dataset(mixed, path)
            print(f"        wrote {path.name}  {manifest.content_hash}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
