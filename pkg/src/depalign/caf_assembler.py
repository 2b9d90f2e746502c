"""Training-sample assembly and JSONL dataset serialization.

A sample pairs a natural-language description with a target artifact
(function body or formal statement) plus the ordered dependency context
the target is allowed to lean on. Code samples come out of dependency
trees; math samples are re-shaped from pre-extracted formal-statement
records.
"""

from __future__ import annotations

import json
import textwrap
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .ast_ingest import FunctionRecord
from .corpus_filter import Tokenizer, count_tokens
from .depgraph import DependencyTree
from .doc_augment import DescriptionRecord
from .errors import EmptyFormal, IOFailure, MissingBody, MissingDescription
from .fsutil import atomic_write_text, read_text, sha256_text, stable_json
from .prompts import render_code_prompt, render_math_prompt

SCHEMA_VERSION = 1

TASKS = ("code", "math")


@dataclass(frozen=True)
class CafSample:
    task: str
    input_x: str
    dependencies_d: tuple[tuple[str, str], ...]
    target_y: str
    provenance: str
    alpha_tag: Optional[float] = None

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise ValueError(f"unknown task '{self.task}'")
        if not self.input_x.strip():
            raise ValueError("input_x must be non-empty")


@dataclass(frozen=True)
class FormalStatementRecord:
    informal: str
    formal: str
    dependencies: tuple[tuple[str, str], ...]
    source_id: str


def _tree_dependency_ids(tree: DependencyTree, direct_only: bool) -> list[str]:
    """Non-root identifiers in breadth-first order, first occurrence kept.

    Recursion markers point back at identifiers already collected (or at
    the root itself), so first-occurrence dedup drops them naturally.
    """
    seen: set[str] = set()
    ordered: list[str] = []
    queue: deque[DependencyTree] = deque(
        tree.children if direct_only else [tree]
    )
    while queue:
        node = queue.popleft()
        if node is not tree and node.root != tree.root and node.root not in seen:
            seen.add(node.root)
            ordered.append(node.root)
        if not direct_only:
            queue.extend(node.children)
    return ordered


def _signature_text(body_text: str) -> str:
    """The ``def`` header of a function body, through its closing colon."""
    text = textwrap.dedent(body_text)
    depth = 0
    for i, ch in enumerate(text):
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
        elif ch == ":" and depth == 0:
            return text[: i + 1]
    return text.splitlines()[0] if text else text


def assemble_code_sample(
    tree: DependencyTree,
    bodies: Mapping[str, FunctionRecord],
    desc: DescriptionRecord,
    provenance: Optional[str] = None,
    direct_only: bool = False,
    signatures_only: bool = False,
) -> CafSample:
    """Tree + bodies + description -> one code-generation sample.

    Dependencies keep the tree's breadth-first order so callers come
    before the functions they call within each level.
    """
    if desc is None or not desc.text.strip():
        raise MissingDescription(f"no description for '{tree.root}'")
    if desc.function_id != tree.root:
        raise MissingDescription(
            f"description is for '{desc.function_id}', tree root is"
            f" '{tree.root}'"
        )
    if tree.root not in bodies:
        raise MissingBody(f"no body recorded for root '{tree.root}'")

    deps: list[tuple[str, str]] = []
    for ident in _tree_dependency_ids(tree, direct_only):
        if ident not in bodies:
            raise MissingBody(f"no body recorded for dependency '{ident}'")
        body = bodies[ident].body_text
        if signatures_only:
            body = _signature_text(body)
        deps.append((ident, body))

    return CafSample(
        task="code",
        input_x=desc.text,
        dependencies_d=tuple(deps),
        target_y=bodies[tree.root].body_text,
        provenance=provenance if provenance is not None else tree.root,
    )


def assemble_math_sample(record: FormalStatementRecord) -> CafSample:
    """Formal-statement record -> one formalisation sample."""
    if not record.formal.strip():
        raise EmptyFormal(
            f"record '{record.source_id}' has no formal statement"
        )
    if not record.informal.strip():
        raise MissingDescription(
            f"record '{record.source_id}' has no informal statement"
        )
    return CafSample(
        task="math",
        input_x=record.informal,
        dependencies_d=tuple(record.dependencies),
        target_y=record.formal,
        provenance=record.source_id,
    )


def render_prompt(sample: CafSample) -> str:
    """The full training/inference prompt text for a sample."""
    block = "\n\n".join(body for _, body in sample.dependencies_d)
    if sample.task == "math":
        return render_math_prompt(block, sample.input_x)
    return render_code_prompt(block, sample.input_x)


def sample_to_dict(sample: CafSample) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "task": sample.task,
        "input_x": sample.input_x,
        "dependencies_d": [
            {"name": name, "body": body}
            for name, body in sample.dependencies_d
        ],
        "target_y": sample.target_y,
        "provenance": sample.provenance,
        "alpha_tag": sample.alpha_tag,
    }


def sample_from_dict(payload: dict) -> CafSample:
    version = payload.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(
            f"unsupported sample schema_version {version!r}"
        )
    return CafSample(
        task=payload["task"],
        input_x=payload["input_x"],
        dependencies_d=tuple(
            (d["name"], d["body"]) for d in payload["dependencies_d"]
        ),
        target_y=payload["target_y"],
        provenance=payload["provenance"],
        alpha_tag=payload["alpha_tag"],
    )


def sample_tokens(sample: CafSample, tokenizer: Optional[Tokenizer] = None) -> int:
    """Description + dependency bodies + target, in tokenizer units."""
    total = count_tokens(sample.input_x, tokenizer)
    for _, body in sample.dependencies_d:
        total += count_tokens(body, tokenizer)
    return total + count_tokens(sample.target_y, tokenizer)


@dataclass(frozen=True)
class DatasetManifest:
    schema_version: int
    samples: int
    counts: dict
    token_totals: dict
    dropped_oversized: int
    content_hash: str
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "samples": self.samples,
            "counts": dict(sorted(self.counts.items())),
            "token_totals": dict(sorted(self.token_totals.items())),
            "dropped_oversized": self.dropped_oversized,
            "content_hash": self.content_hash,
            "flags": list(self.flags),
        }


def manifest_from_dict(payload: dict) -> DatasetManifest:
    return DatasetManifest(
        schema_version=payload["schema_version"],
        samples=payload["samples"],
        counts=dict(payload["counts"]),
        token_totals=dict(payload["token_totals"]),
        dropped_oversized=payload["dropped_oversized"],
        content_hash=payload["content_hash"],
        flags=tuple(payload.get("flags", ())),
    )


def manifest_path_for(dataset_path: Path) -> Path:
    return dataset_path.with_name(dataset_path.stem + ".manifest.json")


def write_dataset(
    samples: Iterable[CafSample],
    path: Path,
    tokenizer: Optional[Tokenizer] = None,
    max_sample_tokens: Optional[int] = None,
    flags: Sequence[str] = (),
) -> DatasetManifest:
    """Serialise samples (order preserved) plus a manifest beside them.

    Samples over ``max_sample_tokens`` are dropped whole and tallied;
    nothing is ever truncated. An empty stream still produces a valid
    dataset file and a zero-count manifest.
    """
    kept: list[CafSample] = []
    dropped = 0
    for sample in samples:
        if (
            max_sample_tokens is not None
            and sample_tokens(sample, tokenizer) > max_sample_tokens
        ):
            dropped += 1
            continue
        kept.append(sample)

    lines = [stable_json(sample_to_dict(s)) for s in kept]
    content = "".join(line + "\n" for line in lines)

    counts = {task: 0 for task in TASKS}
    token_totals = {task: 0 for task in TASKS}
    for sample in kept:
        counts[sample.task] += 1
        token_totals[sample.task] += sample_tokens(sample, tokenizer)
    token_totals["total"] = sum(token_totals[t] for t in TASKS)

    manifest = DatasetManifest(
        schema_version=SCHEMA_VERSION,
        samples=len(kept),
        counts=counts,
        token_totals=token_totals,
        dropped_oversized=dropped,
        content_hash="sha256:" + sha256_text(content),
        flags=tuple(sorted(flags)),
    )
    atomic_write_text(path, content)
    atomic_write_text(
        manifest_path_for(path), stable_json(manifest.to_dict()) + "\n"
    )
    return manifest


def read_dataset(path: Path) -> list[CafSample]:
    text = read_text(path)
    samples: list[CafSample] = []
    # split on newline only: JSON strings may carry other line separators
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        try:
            samples.append(sample_from_dict(json.loads(line)))
        except (ValueError, KeyError) as exc:
            raise IOFailure(f"{path}:{lineno}: bad sample line ({exc})") from exc
    return samples


def load_formal_records(path: Path) -> list[FormalStatementRecord]:
    """Read pre-extracted formal-statement records from JSONL."""
    text = read_text(path)
    records: list[FormalStatementRecord] = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except ValueError as exc:
            raise IOFailure(f"{path}:{lineno}: bad JSON ({exc})") from exc
        records.append(
            FormalStatementRecord(
                informal=data.get("informal", ""),
                formal=data.get("formal", ""),
                dependencies=tuple(
                    (d["name"], d["statement"])
                    for d in data.get("dependencies", [])
                ),
                source_id=data.get("source_id", f"{path.name}:{lineno}"),
            )
        )
    return records
