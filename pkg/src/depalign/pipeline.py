"""Run configuration and the staged corpus pipeline.

Stages: scan -> analyze -> filter -> augment -> assemble -> mix, with
stats branching off the filter outputs. Every stage reads only serialized
artifacts of earlier stages, hashes its inputs, and skips itself when
nothing changed. All artifact content is deterministic: rerunning with a
different worker count or output directory produces byte-identical
datasets and manifests. Wall-clock timings go to a separate log file for
that reason.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, TypeVar

from .ast_ingest import (
    DEFAULT_ADAPTER,
    analysis_from_dict,
    analysis_to_dict,
    parse_file,
)
from .caf_assembler import (
    CafSample,
    assemble_code_sample,
    assemble_math_sample,
    load_formal_records,
    read_dataset,
    write_dataset,
)
from .corpus_filter import (
    BinSpec,
    FilterPolicy,
    RepoMetrics,
    filter_repo,
    get_tokenizer,
    histogram,
    repo_metrics,
)
from .depgraph import (
    build_call_tree,
    build_project_graph,
    enumerate_roots,
    function_table,
    graph_from_dict,
)
from .doc_augment import (
    QualityPolicy,
    SummarizerConfig,
    SummaryClient,
    description_from_dict,
    description_to_dict,
    extract_description,
    needs_augmentation,
    summarize_function,
)
from .errors import (
    AlphaOutOfRange,
    CacheMiss,
    ConfigInvalid,
    EmptyFormal,
    EmptyInput,
    IOFailure,
    MissingDescription,
    StageInputMissing,
)
from .fsutil import atomic_write_text, read_text, sha256_bytes, sha256_text, stable_json
from .mix_sampler import MixConfig, mix_stream
from .prompts import SUMMARY_PROMPT_TEMPLATE

TOOL_VERSION = "0.1.0"

STAGE_ORDER = ("scan", "analyze", "filter", "augment", "assemble", "mix", "stats")

PREREQS: dict[str, tuple[str, ...]] = {
    "scan": (),
    "analyze": ("scan",),
    "filter": ("analyze",),
    "augment": ("filter",),
    "assemble": ("augment",),
    "mix": ("assemble",),
    "stats": ("filter",),
}


@dataclass(frozen=True)
class AssembleOptions:
    direct_only: bool = False
    signatures_only: bool = False
    unaligned: bool = False
    max_prompt_tokens: Optional[int] = None


@dataclass(frozen=True)
class RunConfig:
    corpus_root: Path
    output_dir: Path
    filter_policy: FilterPolicy = field(default_factory=FilterPolicy)
    summarizer: SummarizerConfig = field(default_factory=SummarizerConfig)
    quality: QualityPolicy = field(default_factory=QualityPolicy)
    mix: MixConfig = field(default_factory=lambda: MixConfig(0.5, 0, 0))
    assemble: AssembleOptions = field(default_factory=AssembleOptions)
    tokenizer: str = "split"
    sibling_mode: str = "children"
    math_records: Optional[Path] = None
    parallelism: int = 1


_TOP_KEYS = {
    "corpus_root",
    "output_dir",
    "filter_policy",
    "tokenizer",
    "sibling_mode",
    "summarizer",
    "quality",
    "mix",
    "assemble",
    "math_records",
    "parallelism",
}


def _object(data: dict, key: str) -> dict:
    value = data.get(key, {})
    if not isinstance(value, dict):
        raise ConfigInvalid(key, "must be an object")
    return value


def _reject_unknown(section: dict, name: str, allowed: set[str]) -> None:
    for key in section:
        if key not in allowed:
            raise ConfigInvalid(f"{name}.{key}", "unknown configuration key")


def _string(section: dict, name: str, key: str, default: Optional[str] = None) -> str:
    value = section.get(key, default)
    if not isinstance(value, str) or not value:
        raise ConfigInvalid(
            f"{name}.{key}" if name else key, "must be a non-empty string"
        )
    return value


def _int(section: dict, name: str, key: str, default: int, minimum: int) -> int:
    value = section.get(key, default)
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise ConfigInvalid(
            f"{name}.{key}" if name else key,
            f"must be an integer >= {minimum}",
        )
    return value


def _number(
    section: dict, name: str, key: str, default: float, lo: float, hi: float
) -> float:
    value = section.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigInvalid(f"{name}.{key}", "must be a number")
    if not (lo <= float(value) <= hi):
        raise ConfigInvalid(
            f"{name}.{key}", f"must lie in [{lo}, {hi}]"
        )
    return float(value)


def _bool(section: dict, name: str, key: str, default: bool) -> bool:
    value = section.get(key, default)
    if not isinstance(value, bool):
        raise ConfigInvalid(f"{name}.{key}", "must be true or false")
    return value


def validate_config(raw: str) -> RunConfig:
    """Parse and fully validate a JSON run configuration."""
    try:
        data = json.loads(raw)
    except ValueError as exc:
        raise ConfigInvalid("config", f"not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigInvalid("config", "top level must be a JSON object")
    for key in data:
        if key not in _TOP_KEYS:
            raise ConfigInvalid(key, "unknown configuration key")

    corpus_root = _string(data, "", "corpus_root")
    output_dir = _string(data, "", "output_dir")

    fp = _object(data, "filter_policy")
    _reject_unknown(
        fp,
        "filter_policy",
        {"depth_min", "depth_max", "siblings_min", "siblings_max"},
    )
    policy = FilterPolicy(
        depth_min=fp.get("depth_min", 3),
        depth_max=fp.get("depth_max", 6),
        siblings_min=fp.get("siblings_min", 3),
        siblings_max=fp.get("siblings_max", 10),
    )

    tokenizer = data.get("tokenizer", "split")
    if not isinstance(tokenizer, str):
        raise ConfigInvalid("tokenizer", "must be a string")
    get_tokenizer(tokenizer)

    sibling_mode = data.get("sibling_mode", "children")
    if sibling_mode not in ("children", "level"):
        raise ConfigInvalid("sibling_mode", "must be 'children' or 'level'")

    sm = _object(data, "summarizer")
    _reject_unknown(
        sm,
        "summarizer",
        {
            "mode",
            "endpoint",
            "model",
            "temperature",
            "timeout_s",
            "max_retries",
            "backoff_s",
            "cache_dir",
            "api_key_env",
            "max_in_flight",
            "min_interval_s",
        },
    )
    mode = sm.get("mode", "cache_only")
    if mode not in ("cache_only", "live"):
        raise ConfigInvalid("summarizer.mode", "must be 'cache_only' or 'live'")
    endpoint = sm.get("endpoint", "")
    model = sm.get("model", "")
    if mode == "live" and not endpoint:
        raise ConfigInvalid("summarizer.endpoint", "required when mode is 'live'")
    if mode == "live" and not model:
        raise ConfigInvalid("summarizer.model", "required when mode is 'live'")
    summarizer = SummarizerConfig(
        mode=mode,
        endpoint=endpoint,
        model=model,
        temperature=_number(sm, "summarizer", "temperature", 0.0, 0.0, 2.0),
        timeout_s=_number(sm, "summarizer", "timeout_s", 30.0, 0.001, 3600.0),
        max_retries=_int(sm, "summarizer", "max_retries", 3, 0),
        backoff_s=_number(sm, "summarizer", "backoff_s", 0.5, 0.0, 60.0),
        cache_dir=sm.get(
            "cache_dir", str(Path(output_dir) / "cache" / "summaries")
        ),
        api_key_env=_string(sm, "summarizer", "api_key_env", "SUMMARY_API_KEY"),
        max_in_flight=_int(sm, "summarizer", "max_in_flight", 4, 1),
        min_interval_s=_number(sm, "summarizer", "min_interval_s", 0.0, 0.0, 60.0),
    )

    q = _object(data, "quality")
    _reject_unknown(
        q, "quality", {"min_words", "interface_line_ratio", "interface_tags"}
    )
    tags = q.get("interface_tags")
    if tags is not None and (
        not isinstance(tags, list)
        or not all(isinstance(t, str) and t for t in tags)
    ):
        raise ConfigInvalid(
            "quality.interface_tags", "must be a list of non-empty strings"
        )
    quality = QualityPolicy(
        min_words=_int(q, "quality", "min_words", 5, 0),
        interface_line_ratio=_number(
            q, "quality", "interface_line_ratio", 0.5, 0.0, 1.0
        ),
        **({"interface_tags": tuple(tags)} if tags is not None else {}),
    )

    mx = _object(data, "mix")
    _reject_unknown(mx, "mix", {"alpha", "seed", "total", "policy"})
    alpha = mx.get("alpha", 0.5)
    if isinstance(alpha, bool) or not isinstance(alpha, (int, float)):
        raise ConfigInvalid("mix.alpha", "must be a number")
    policy_name = mx.get("policy", "exact_quota")
    if not isinstance(policy_name, str):
        raise ConfigInvalid("mix.policy", "must be a string")
    try:
        mix = MixConfig(
            alpha=float(alpha),
            seed=_int(mx, "mix", "seed", 0, -(2**63)),
            total=_int(mx, "mix", "total", 0, 0),
            policy=policy_name,
        )
    except AlphaOutOfRange as exc:
        raise ConfigInvalid("mix.alpha", str(exc)) from exc

    asm = _object(data, "assemble")
    _reject_unknown(
        asm,
        "assemble",
        {"direct_only", "signatures_only", "unaligned", "max_prompt_tokens"},
    )
    budget = asm.get("max_prompt_tokens")
    if budget is not None and (
        not isinstance(budget, int) or isinstance(budget, bool) or budget < 1
    ):
        raise ConfigInvalid(
            "assemble.max_prompt_tokens", "must be a positive integer or null"
        )
    assemble = AssembleOptions(
        direct_only=_bool(asm, "assemble", "direct_only", False),
        signatures_only=_bool(asm, "assemble", "signatures_only", False),
        unaligned=_bool(asm, "assemble", "unaligned", False),
        max_prompt_tokens=budget,
    )

    math_records = data.get("math_records")
    if math_records is not None and (
        not isinstance(math_records, str) or not math_records
    ):
        raise ConfigInvalid("math_records", "must be a non-empty string or null")

    parallelism = _int(data, "", "parallelism", 1, 1)

    return RunConfig(
        corpus_root=Path(corpus_root),
        output_dir=Path(output_dir),
        filter_policy=policy,
        summarizer=summarizer,
        quality=quality,
        mix=mix,
        assemble=assemble,
        tokenizer=tokenizer,
        sibling_mode=sibling_mode,
        math_records=Path(math_records) if math_records else None,
        parallelism=parallelism,
    )


def load_config(path: Path | str) -> RunConfig:
    return validate_config(read_text(Path(path)))


@dataclass(frozen=True)
class Layout:
    out: Path

    @property
    def scan_json(self) -> Path:
        return self.out / "scan.json"

    @property
    def analyses_dir(self) -> Path:
        return self.out / "analyses"

    @property
    def metrics_csv(self) -> Path:
        return self.out / "metrics.csv"

    @property
    def filter_json(self) -> Path:
        return self.out / "filter.json"

    @property
    def descriptions_dir(self) -> Path:
        return self.out / "descriptions"

    @property
    def datasets_dir(self) -> Path:
        return self.out / "datasets"

    @property
    def manifests_dir(self) -> Path:
        return self.out / "manifest"

    @property
    def stats_dir(self) -> Path:
        return self.out / "stats"

    @property
    def logs_dir(self) -> Path:
        return self.out / "logs"

    def analysis_path(self, repo_id: str) -> Path:
        return self.analyses_dir / f"{repo_id}.json"

    def descriptions_path(self, repo_id: str) -> Path:
        return self.descriptions_dir / f"{repo_id}.json"


@dataclass
class StageResult:
    name: str
    skipped: bool
    input_hash: str
    counts: dict
    outputs: dict

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "skipped": self.skipped,
            "input_hash": self.input_hash,
            "counts": dict(sorted(self.counts.items())),
            "outputs": dict(sorted(self.outputs.items())),
        }


@dataclass
class RunManifest:
    stages: dict[str, StageResult]

    def to_dict(self) -> dict:
        return {"stages": {n: r.to_dict() for n, r in sorted(self.stages.items())}}


T = TypeVar("T")
U = TypeVar("U")


def _parallel_map(items: Sequence[T], fn: Callable[[T], U], workers: int) -> list[U]:
    """Apply fn preserving item order; thread count never changes results."""
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _input_hash(stage: str, config_part: dict, inputs: dict[str, str]) -> str:
    return sha256_text(
        stable_json(
            {
                "tool": TOOL_VERSION,
                "stage": stage,
                "config": config_part,
                "inputs": inputs,
            }
        )
    )


def _maybe_skip(lay: Layout, stage: str, input_hash: str) -> Optional[StageResult]:
    path = lay.manifests_dir / f"{stage}.json"
    if not path.exists():
        return None
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError):
        return None
    if data.get("input_hash") != input_hash:
        return None
    for rel, digest in data.get("outputs", {}).items():
        target = lay.out / rel
        if not target.exists() or sha256_bytes(target.read_bytes()) != digest:
            return None
    return StageResult(
        name=stage,
        skipped=True,
        input_hash=input_hash,
        counts=data["counts"],
        outputs=data["outputs"],
    )


def _finish(
    lay: Layout,
    stage: str,
    input_hash: str,
    counts: dict,
    output_paths: Sequence[Path],
) -> StageResult:
    outputs = {
        p.relative_to(lay.out).as_posix(): sha256_bytes(p.read_bytes())
        for p in sorted(output_paths)
    }
    manifest = {
        "stage": stage,
        "tool_version": TOOL_VERSION,
        "input_hash": input_hash,
        "counts": dict(sorted(counts.items())),
        "outputs": outputs,
    }
    atomic_write_text(
        lay.manifests_dir / f"{stage}.json", stable_json(manifest) + "\n"
    )
    return StageResult(
        name=stage,
        skipped=False,
        input_hash=input_hash,
        counts=counts,
        outputs=outputs,
    )


def _load_artifact(path: Path, producer: str) -> dict:
    if not path.exists():
        raise StageInputMissing(
            f"artifact '{path.name}' is missing; run the {producer} stage first"
        )
    return json.loads(read_text(path))


def _stage_scan(cfg: RunConfig, lay: Layout) -> StageResult:
    adapter = DEFAULT_ADAPTER
    root = Path(cfg.corpus_root)
    if not root.is_dir():
        raise IOFailure(f"corpus_root '{root}' is not a directory")
    repos: list[dict] = []
    skipped: list[dict] = []
    for entry in sorted(root.iterdir(), key=lambda p: p.name):
        if not entry.is_dir():
            continue
        files: list[dict] = []
        readmes: list[dict] = []
        for path in sorted(entry.rglob("*")):
            if not path.is_file():
                continue
            rel = path.relative_to(entry).as_posix()
            is_source = adapter.handles(rel)
            is_readme = path.name.lower().startswith("readme")
            if not is_source and not is_readme:
                continue
            data = path.read_bytes()
            try:
                data.decode("utf-8")
            except UnicodeDecodeError:
                skipped.append(
                    {"repo": entry.name, "path": rel, "reason": "not utf-8"}
                )
                continue
            row = {"path": rel, "sha256": sha256_bytes(data)}
            if is_source:
                files.append(row)
            else:
                readmes.append(row)
        if files:
            repos.append(
                {"repo_id": entry.name, "files": files, "readmes": readmes}
            )

    inputs = {
        f"{repo['repo_id']}/{row['path']}": row["sha256"]
        for repo in repos
        for row in repo["files"] + repo["readmes"]
    }
    input_hash = _input_hash("scan", {"adapter": adapter.name}, inputs)
    cached = _maybe_skip(lay, "scan", input_hash)
    if cached:
        return cached

    payload = {"adapter": adapter.name, "repos": repos, "skipped": skipped}
    atomic_write_text(lay.scan_json, stable_json(payload) + "\n")
    counts = {
        "repos": len(repos),
        "files": sum(len(r["files"]) for r in repos),
        "readmes": sum(len(r["readmes"]) for r in repos),
        "skipped_decode": len(skipped),
    }
    return _finish(lay, "scan", input_hash, counts, [lay.scan_json])


def _stage_analyze(cfg: RunConfig, lay: Layout) -> StageResult:
    scan = _load_artifact(lay.scan_json, "scan")
    input_hash = _input_hash(
        "analyze",
        {"adapter": scan["adapter"]},
        {"scan.json": sha256_bytes(lay.scan_json.read_bytes())},
    )
    cached = _maybe_skip(lay, "analyze", input_hash)
    if cached:
        return cached

    corpus = Path(cfg.corpus_root)

    def analyze_repo(repo: dict) -> tuple[Path, dict]:
        analyses = []
        for row in repo["files"]:
            text = read_text(corpus / repo["repo_id"] / row["path"])
            analyses.append(parse_file(text, row["path"]))
        graph = build_project_graph(analyses)
        payload = {
            "repo_id": repo["repo_id"],
            "files": [analysis_to_dict(a) for a in analyses],
            "graph": graph.to_dict(),
        }
        path = lay.analysis_path(repo["repo_id"])
        atomic_write_text(path, stable_json(payload) + "\n")
        tallies = {
            "functions": sum(len(a.functions) for a in analyses),
            "parse_errors": sum(len(a.parse_errors) for a in analyses),
            "unresolved": graph.unresolved_count,
        }
        return path, tallies

    results = _parallel_map(scan["repos"], analyze_repo, cfg.parallelism)
    counts = {
        "repos": len(results),
        "functions": sum(t["functions"] for _, t in results),
        "parse_errors": sum(t["parse_errors"] for _, t in results),
        "unresolved_calls": sum(t["unresolved"] for _, t in results),
    }
    return _finish(
        lay, "analyze", input_hash, counts, [path for path, _ in results]
    )


def _repo_ids(lay: Layout) -> list[str]:
    scan = _load_artifact(lay.scan_json, "scan")
    return [repo["repo_id"] for repo in scan["repos"]]


def _analysis_inputs(lay: Layout, repo_ids: Sequence[str]) -> dict[str, str]:
    inputs = {}
    for repo_id in repo_ids:
        path = lay.analysis_path(repo_id)
        if not path.exists():
            raise StageInputMissing(
                f"analysis artifact for '{repo_id}' is missing; run analyze"
            )
        inputs[f"analyses/{repo_id}.json"] = sha256_bytes(path.read_bytes())
    return inputs


def _stage_filter(cfg: RunConfig, lay: Layout) -> StageResult:
    repo_ids = _repo_ids(lay)
    config_part = {
        "policy": {
            "depth_min": cfg.filter_policy.depth_min,
            "depth_max": cfg.filter_policy.depth_max,
            "siblings_min": cfg.filter_policy.siblings_min,
            "siblings_max": cfg.filter_policy.siblings_max,
        },
        "sibling_mode": cfg.sibling_mode,
        "tokenizer": cfg.tokenizer,
    }
    input_hash = _input_hash(
        "filter", config_part, _analysis_inputs(lay, repo_ids)
    )
    cached = _maybe_skip(lay, "filter", input_hash)
    if cached:
        return cached

    tok = get_tokenizer(cfg.tokenizer)

    def measure(repo_id: str) -> tuple[RepoMetrics, str]:
        payload = json.loads(read_text(lay.analysis_path(repo_id)))
        analyses = [analysis_from_dict(d) for d in payload["files"]]
        graph = graph_from_dict(payload["graph"])
        table = function_table(analyses)
        trees = [build_call_tree(graph, r) for r in enumerate_roots(graph)]
        metrics = repo_metrics(
            repo_id, trees, table.values(), tok, cfg.sibling_mode
        )
        decision = filter_repo(metrics, cfg.filter_policy)
        return metrics, decision.reason if not decision.kept else ""

    rows = _parallel_map(repo_ids, measure, cfg.parallelism)

    csv_lines = ["repo_id,max_depth,max_siblings,function_count,token_count,kept,reason"]
    kept: list[str] = []
    dropped: dict[str, str] = {}
    for metrics, reason in rows:
        is_kept = reason == ""
        if is_kept:
            kept.append(metrics.repo_id)
        else:
            dropped[metrics.repo_id] = reason
        csv_lines.append(
            f"{metrics.repo_id},{metrics.max_depth},{metrics.max_siblings},"
            f"{metrics.function_count},{metrics.token_count},"
            f"{'true' if is_kept else 'false'},{reason}"
        )
    atomic_write_text(lay.metrics_csv, "\n".join(csv_lines) + "\n")
    atomic_write_text(
        lay.filter_json,
        stable_json(
            {
                "policy": config_part["policy"],
                "sibling_mode": cfg.sibling_mode,
                "kept": kept,
                "dropped": dropped,
            }
        )
        + "\n",
    )
    counts = {"repos": len(rows), "kept": len(kept), "dropped": len(dropped)}
    return _finish(
        lay, "filter", input_hash, counts, [lay.metrics_csv, lay.filter_json]
    )


def _stage_augment(cfg: RunConfig, lay: Layout) -> StageResult:
    scan = _load_artifact(lay.scan_json, "scan")
    filter_payload = _load_artifact(lay.filter_json, "filter")
    kept = list(filter_payload["kept"])
    readme_rows = {
        repo["repo_id"]: repo["readmes"]
        for repo in scan["repos"]
        if repo["repo_id"] in set(kept)
    }
    inputs = _analysis_inputs(lay, kept)
    inputs["filter.json"] = sha256_bytes(lay.filter_json.read_bytes())
    for repo_id, rows in sorted(readme_rows.items()):
        for row in rows:
            inputs[f"{repo_id}/{row['path']}"] = row["sha256"]
    config_part = {
        "summarizer": {
            "mode": cfg.summarizer.mode,
            "model": cfg.summarizer.model,
            "temperature": cfg.summarizer.temperature,
            "template": sha256_text(SUMMARY_PROMPT_TEMPLATE),
        },
        "quality": {
            "min_words": cfg.quality.min_words,
            "interface_line_ratio": cfg.quality.interface_line_ratio,
            "interface_tags": list(cfg.quality.interface_tags),
        },
    }
    input_hash = _input_hash("augment", config_part, inputs)
    cached = _maybe_skip(lay, "augment", input_hash)
    if cached:
        return cached

    corpus = Path(cfg.corpus_root)
    client = SummaryClient(cfg.summarizer)

    def augment_repo(repo_id: str) -> tuple[Path, dict]:
        payload = json.loads(read_text(lay.analysis_path(repo_id)))
        analyses = [analysis_from_dict(d) for d in payload["files"]]
        graph = graph_from_dict(payload["graph"])
        table = function_table(analyses)
        readmes = {
            row["path"]: read_text(corpus / repo_id / row["path"])
            for row in readme_rows.get(repo_id, [])
        }
        records: dict[str, dict] = {}
        tallies = {
            "roots": 0,
            "docstring": 0,
            "readme": 0,
            "generated": 0,
            "cache_misses": 0,
            "undescribed": 0,
        }
        for root in enumerate_roots(graph):
            tallies["roots"] += 1
            fn = table[root]
            desc = extract_description(fn, readmes, cfg.quality)
            if needs_augmentation(desc, cfg.quality):
                try:
                    desc = summarize_function(
                        fn.body_text, client, root, cfg.quality
                    )
                except CacheMiss:
                    tallies["cache_misses"] += 1
            if desc is None:
                tallies["undescribed"] += 1
                continue
            tallies[desc.origin] += 1
            records[root] = description_to_dict(desc)
        path = lay.descriptions_path(repo_id)
        atomic_write_text(
            path,
            stable_json({"repo_id": repo_id, "records": records}) + "\n",
        )
        return path, tallies

    results = _parallel_map(kept, augment_repo, cfg.parallelism)
    counts = {"repos": len(kept)}
    for key in (
        "roots",
        "docstring",
        "readme",
        "generated",
        "cache_misses",
        "undescribed",
    ):
        counts[key] = sum(t[key] for _, t in results)
    return _finish(
        lay, "augment", input_hash, counts, [path for path, _ in results]
    )


def _stage_assemble(cfg: RunConfig, lay: Layout) -> StageResult:
    filter_payload = _load_artifact(lay.filter_json, "filter")
    kept = list(filter_payload["kept"])
    inputs = _analysis_inputs(lay, kept)
    inputs["filter.json"] = sha256_bytes(lay.filter_json.read_bytes())
    for repo_id in kept:
        path = lay.descriptions_path(repo_id)
        if not path.exists():
            raise StageInputMissing(
                f"descriptions for '{repo_id}' are missing; run augment"
            )
        inputs[f"descriptions/{repo_id}.json"] = sha256_bytes(path.read_bytes())
    if cfg.math_records is not None:
        math_path = Path(cfg.math_records)
        if not math_path.exists():
            raise IOFailure(f"math_records file '{math_path}' does not exist")
        inputs["math_records"] = sha256_bytes(math_path.read_bytes())
    config_part = {
        "assemble": {
            "direct_only": cfg.assemble.direct_only,
            "signatures_only": cfg.assemble.signatures_only,
            "unaligned": cfg.assemble.unaligned,
            "max_prompt_tokens": cfg.assemble.max_prompt_tokens,
        },
        "tokenizer": cfg.tokenizer,
    }
    input_hash = _input_hash("assemble", config_part, inputs)
    cached = _maybe_skip(lay, "assemble", input_hash)
    if cached:
        return cached

    tok = get_tokenizer(cfg.tokenizer)

    def assemble_repo(repo_id: str) -> tuple[list[CafSample], int]:
        payload = json.loads(read_text(lay.analysis_path(repo_id)))
        analyses = [analysis_from_dict(d) for d in payload["files"]]
        graph = graph_from_dict(payload["graph"])
        table = function_table(analyses)
        desc_payload = json.loads(read_text(lay.descriptions_path(repo_id)))
        descriptions = {
            fid: description_from_dict(d)
            for fid, d in desc_payload["records"].items()
        }
        samples: list[CafSample] = []
        missing = 0
        for root in enumerate_roots(graph):
            if cfg.assemble.unaligned:
                fn = table[root]
                if not fn.docstring or not fn.docstring.strip():
                    missing += 1
                    continue
                samples.append(
                    CafSample(
                        task="code",
                        input_x=fn.docstring,
                        dependencies_d=(),
                        target_y=fn.body_text,
                        provenance=f"{repo_id}:{root}",
                    )
                )
                continue
            desc = descriptions.get(root)
            if desc is None:
                missing += 1
                continue
            tree = build_call_tree(graph, root)
            samples.append(
                assemble_code_sample(
                    tree,
                    table,
                    desc,
                    provenance=f"{repo_id}:{root}",
                    direct_only=cfg.assemble.direct_only,
                    signatures_only=cfg.assemble.signatures_only,
                )
            )
        return samples, missing

    results = _parallel_map(kept, assemble_repo, cfg.parallelism)
    code_samples = [s for samples, _ in results for s in samples]
    missing_total = sum(m for _, m in results)

    flags = ("unaligned",) if cfg.assemble.unaligned else ()
    code_path = lay.datasets_dir / "code.jsonl"
    code_manifest = write_dataset(
        code_samples,
        code_path,
        tokenizer=tok,
        max_sample_tokens=cfg.assemble.max_prompt_tokens,
        flags=flags,
    )

    math_samples: list[CafSample] = []
    skipped_math = 0
    if cfg.math_records is not None:
        for record in load_formal_records(Path(cfg.math_records)):
            try:
                math_samples.append(assemble_math_sample(record))
            except (EmptyFormal, MissingDescription):
                skipped_math += 1
    math_path = lay.datasets_dir / "math.jsonl"
    math_manifest = write_dataset(
        math_samples,
        math_path,
        tokenizer=tok,
        max_sample_tokens=cfg.assemble.max_prompt_tokens,
    )

    counts = {
        "code_samples": code_manifest.samples,
        "math_samples": math_manifest.samples,
        "missing_description": missing_total,
        "dropped_oversized": code_manifest.dropped_oversized
        + math_manifest.dropped_oversized,
        "skipped_math_records": skipped_math,
    }
    outputs = [
        code_path,
        code_path.with_name("code.manifest.json"),
        math_path,
        math_path.with_name("math.manifest.json"),
    ]
    return _finish(lay, "assemble", input_hash, counts, outputs)


def _stage_mix(cfg: RunConfig, lay: Layout) -> StageResult:
    code_path = lay.datasets_dir / "code.jsonl"
    math_path = lay.datasets_dir / "math.jsonl"
    for path in (code_path, math_path):
        if not path.exists():
            raise StageInputMissing(
                f"dataset '{path.name}' is missing; run assemble"
            )
    config_part = {
        "alpha": cfg.mix.alpha,
        "seed": cfg.mix.seed,
        "total": cfg.mix.total,
        "policy": cfg.mix.policy,
    }
    inputs = {
        "datasets/code.jsonl": sha256_bytes(code_path.read_bytes()),
        "datasets/math.jsonl": sha256_bytes(math_path.read_bytes()),
    }
    input_hash = _input_hash("mix", config_part, inputs)
    cached = _maybe_skip(lay, "mix", input_hash)
    if cached:
        return cached

    math_pool = read_dataset(math_path)
    code_pool = read_dataset(code_path)
    mixed = mix_stream(math_pool, code_pool, cfg.mix)
    mixed_path = lay.datasets_dir / "mixed.jsonl"
    write_dataset(mixed, mixed_path)
    counts = {
        "total": len(mixed),
        "math": sum(1 for s in mixed if s.task == "math"),
        "code": sum(1 for s in mixed if s.task == "code"),
    }
    outputs = [mixed_path, mixed_path.with_name("mixed.manifest.json")]
    return _finish(lay, "mix", input_hash, counts, outputs)


def _stage_stats(cfg: RunConfig, lay: Layout) -> StageResult:
    if not lay.metrics_csv.exists():
        raise StageInputMissing("metrics.csv is missing; run filter")
    input_hash = _input_hash(
        "stats", {}, {"metrics.csv": sha256_bytes(lay.metrics_csv.read_bytes())}
    )
    cached = _maybe_skip(lay, "stats", input_hash)
    if cached:
        return cached

    rows: list[RepoMetrics] = []
    kept = 0
    lines = read_text(lay.metrics_csv).splitlines()
    for line in lines[1:]:
        if not line.strip():
            continue
        repo_id, depth, siblings, fn_count, tokens, kept_flag, _reason = (
            line.split(",")
        )
        rows.append(
            RepoMetrics(
                repo_id=repo_id,
                max_depth=int(depth),
                max_siblings=int(siblings),
                function_count=int(fn_count),
                token_count=int(tokens),
            )
        )
        kept += kept_flag == "true"
    if not rows:
        raise EmptyInput("stats over an empty corpus")

    outputs: list[Path] = []
    for field_name in ("depth", "siblings"):
        attr = "max_depth" if field_name == "depth" else "max_siblings"
        values = [getattr(r, attr) for r in rows]
        bins = BinSpec(min(values), max(values))
        hist = histogram(rows, field_name, bins)
        path = lay.stats_dir / f"{field_name}_histogram.csv"
        atomic_write_text(
            path,
            "value,count\n"
            + "".join(f"{label},{count}\n" for label, count in hist),
        )
        outputs.append(path)

    summary_path = lay.stats_dir / "summary.json"
    atomic_write_text(
        summary_path,
        stable_json(
            {
                "repos": len(rows),
                "kept": kept,
                "total_functions": sum(r.function_count for r in rows),
                "total_tokens": sum(r.token_count for r in rows),
            }
        )
        + "\n",
    )
    outputs.append(summary_path)
    counts = {"repos": len(rows), "kept": kept}
    return _finish(lay, "stats", input_hash, counts, outputs)


_STAGES: dict[str, Callable[[RunConfig, Layout], StageResult]] = {
    "scan": _stage_scan,
    "analyze": _stage_analyze,
    "filter": _stage_filter,
    "augment": _stage_augment,
    "assemble": _stage_assemble,
    "mix": _stage_mix,
    "stats": _stage_stats,
}


def run_pipeline(
    cfg: RunConfig, stages: Optional[Sequence[str]] = None
) -> RunManifest:
    """Run the requested stages in canonical order.

    A requested stage whose prerequisite is neither requested nor already
    materialised on disk raises :class:`StageInputMissing` before any work
    starts.
    """
    if stages is None:
        requested = set(STAGE_ORDER)
    else:
        requested = set(stages)
        for name in requested:
            if name not in STAGE_ORDER:
                raise ConfigInvalid("stages", f"unknown stage '{name}'")
    selected = [s for s in STAGE_ORDER if s in requested]

    lay = Layout(Path(cfg.output_dir))
    for name in selected:
        for pre in PREREQS[name]:
            if pre in requested and selected.index(pre) < selected.index(name):
                continue
            if (lay.manifests_dir / f"{pre}.json").exists():
                continue
            raise StageInputMissing(
                f"stage '{name}' needs stage '{pre}' to run first"
            )

    results: dict[str, StageResult] = {}
    timings: dict[str, float] = {}
    for name in selected:
        started = time.monotonic()
        results[name] = _STAGES[name](cfg, lay)
        timings[name] = round(time.monotonic() - started, 6)

    atomic_write_text(
        lay.logs_dir / "timing.json", stable_json({"seconds": timings}) + "\n"
    )
    return RunManifest(stages=results)
