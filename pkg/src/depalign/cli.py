"""Command-line entry point.

Every subcommand takes the same JSON run configuration. Failures exit
non-zero with a one-line JSON error object on stderr so wrapping scripts
can branch on the error type without scraping prose.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from .ast_ingest import analysis_from_dict
from .depgraph import (
    build_call_tree,
    enumerate_roots,
    function_table,
    graph_from_dict,
    render_tree_text,
)
from .errors import ConfigInvalid, CorpusError, StageInputMissing
from .fsutil import read_text
from .mix_sampler import MixConfig
from .pipeline import STAGE_ORDER, RunConfig, load_config, run_pipeline

_STAGE_HELP = {
    "scan": "inventory repositories under the corpus root",
    "analyze": "parse files and build per-repo dependency graphs",
    "filter": "measure tree shape and keep repos inside the policy bounds",
    "augment": "collect or generate descriptions for root functions",
    "assemble": "emit code and math training samples as JSONL",
    "mix": "interleave math and code samples at the configured alpha",
    "stats": "write metric CSVs and shape histograms",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="depalign",
        description=(
            "Decompose repositories into dependency-aligned training"
            " samples for code autoformalisation."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p: argparse.ArgumentParser) -> None:
        p.add_argument(
            "--config", required=True, help="path to the JSON run configuration"
        )

    for name in STAGE_ORDER:
        stage_parser = sub.add_parser(name, help=_STAGE_HELP[name])
        with_config(stage_parser)
        if name == "mix":
            stage_parser.add_argument("--alpha", type=float, default=None)
            stage_parser.add_argument("--seed", type=int, default=None)
            stage_parser.add_argument("--total", type=int, default=None)
            stage_parser.add_argument(
                "--policy", choices=("exact_quota", "bernoulli"), default=None
            )

    run_parser = sub.add_parser("run", help="run several stages in order")
    with_config(run_parser)
    run_parser.add_argument(
        "--stages",
        default="all",
        help="comma-separated stage subset (default: all)",
    )

    trees_parser = sub.add_parser(
        "trees", help="debug: print the dependency trees of one repo"
    )
    with_config(trees_parser)
    trees_parser.add_argument("--repo", required=True)
    trees_parser.add_argument(
        "--root", default=None, help="print only this root's tree"
    )
    return parser


def _print_trees(cfg: RunConfig, repo: str, root: Optional[str]) -> None:
    path = Path(cfg.output_dir) / "analyses" / f"{repo}.json"
    if not path.exists():
        raise StageInputMissing(
            f"no analysis artifact for '{repo}'; run the analyze stage first"
        )
    payload = json.loads(read_text(path))
    graph = graph_from_dict(payload["graph"])
    analyses = [analysis_from_dict(d) for d in payload["files"]]
    table = function_table(analyses)
    roots = [root] if root else enumerate_roots(graph)
    blocks = []
    for r in roots:
        fn = table.get(r)
        tree = build_call_tree(
            graph, r, docstring_ref=fn.docstring if fn else None
        )
        blocks.append(render_tree_text(tree))
    print("\n\n".join(blocks))


def _mix_override(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    mix = cfg.mix
    updated = MixConfig(
        alpha=args.alpha if args.alpha is not None else mix.alpha,
        seed=args.seed if args.seed is not None else mix.seed,
        total=args.total if args.total is not None else mix.total,
        policy=args.policy if args.policy is not None else mix.policy,
    )
    return replace(cfg, mix=updated)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "trees":
            _print_trees(cfg, args.repo, args.root)
            return 0
        if args.command == "run":
            if args.stages == "all":
                stages = None
            else:
                stages = [s.strip() for s in args.stages.split(",") if s.strip()]
            manifest = run_pipeline(cfg, stages)
        else:
            if args.command == "mix":
                cfg = _mix_override(cfg, args)
            manifest = run_pipeline(cfg, [args.command])
        print(json.dumps(manifest.to_dict(), sort_keys=True, indent=2))
        return 0
    except CorpusError as exc:
        payload = {"error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, ConfigInvalid):
            payload["field"] = exc.field
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
