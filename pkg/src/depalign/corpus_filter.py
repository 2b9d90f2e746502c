"""Structural metrics over dependency trees and shape-based repo filtering.

A repository is worth training on when its call structure is neither a
flat script nor an unboundedly tangled web. The default gate keeps repos
whose deepest tree has depth 3 to 6 and whose widest fan-out is 3 to 10,
both bounds inclusive.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional, Protocol, Sequence

from .ast_ingest import FunctionRecord
from .depgraph import DependencyTree
from .errors import ConfigInvalid, EmptyInput


class Tokenizer(Protocol):
    name: str

    def count(self, text: str) -> int: ...


class SplitTokenizer:
    """Deterministic fallback tokenizer.

    A token is either a maximal run of word characters or a single other
    non-space character. Counts are stable across runs and platforms but
    are not comparable to any subword vocabulary.
    """

    name = "split"
    _pattern = re.compile(r"\w+|[^\w\s]", re.UNICODE)

    def count(self, text: str) -> int:
        return len(self._pattern.findall(text))


_TOKENIZERS: dict[str, Tokenizer] = {"split": SplitTokenizer()}


def get_tokenizer(name: str) -> Tokenizer:
    try:
        return _TOKENIZERS[name]
    except KeyError:
        raise ConfigInvalid(
            "tokenizer", f"unknown tokenizer '{name}'"
        ) from None


def count_tokens(text: str, tokenizer: Optional[Tokenizer] = None) -> int:
    tok = tokenizer if tokenizer is not None else _TOKENIZERS["split"]
    return tok.count(text)


def tree_depth(tree: DependencyTree) -> int:
    """Number of nodes on the longest root-to-leaf path; a lone root is 1."""
    best = 0
    stack: list[tuple[DependencyTree, int]] = [(tree, 1)]
    while stack:
        node, depth = stack.pop()
        best = max(best, depth)
        for child in node.children:
            stack.append((child, depth + 1))
    return best


def max_siblings(tree: DependencyTree) -> int:
    """Largest child count any single node has; a lone root scores 0."""
    best = 0
    stack = [tree]
    while stack:
        node = stack.pop()
        best = max(best, len(node.children))
        stack.extend(node.children)
    return best


def level_width(tree: DependencyTree) -> int:
    """Largest number of nodes sharing one depth level (root level is 1)."""
    best = 0
    level: deque[DependencyTree] = deque([tree])
    while level:
        best = max(best, len(level))
        nxt: deque[DependencyTree] = deque()
        for node in level:
            nxt.extend(node.children)
        level = nxt
    return best


@dataclass(frozen=True)
class RepoMetrics:
    repo_id: str
    max_depth: int
    max_siblings: int
    function_count: int
    token_count: int


def repo_metrics(
    repo_id: str,
    trees: Sequence[DependencyTree],
    functions: Iterable[FunctionRecord],
    tokenizer: Optional[Tokenizer] = None,
    sibling_mode: str = "children",
) -> RepoMetrics:
    """Aggregate structure and size over every root tree of one repo.

    ``sibling_mode`` selects how fan-out is scored: ``children`` takes the
    per-node child count, ``level`` the total width of a tree level.
    """
    if sibling_mode not in ("children", "level"):
        raise ConfigInvalid("sibling_mode", f"unknown mode '{sibling_mode}'")
    width = max_siblings if sibling_mode == "children" else level_width
    fns = list(functions)
    return RepoMetrics(
        repo_id=repo_id,
        max_depth=max((tree_depth(t) for t in trees), default=0),
        max_siblings=max((width(t) for t in trees), default=0),
        function_count=len(fns),
        token_count=sum(count_tokens(f.body_text, tokenizer) for f in fns),
    )


@dataclass(frozen=True)
class FilterPolicy:
    depth_min: int = 3
    depth_max: int = 6
    siblings_min: int = 3
    siblings_max: int = 10

    def __post_init__(self) -> None:
        for name in ("depth_min", "depth_max", "siblings_min", "siblings_max"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise ConfigInvalid(
                    f"filter_policy.{name}", "must be a non-negative integer"
                )
        if self.depth_min > self.depth_max:
            raise ConfigInvalid(
                "filter_policy.depth_min", "depth_min exceeds depth_max"
            )
        if self.siblings_min > self.siblings_max:
            raise ConfigInvalid(
                "filter_policy.siblings_min", "siblings_min exceeds siblings_max"
            )


@dataclass(frozen=True)
class FilterDecision:
    kept: bool
    reason: Optional[str] = None


def filter_repo(metrics: RepoMetrics, policy: FilterPolicy) -> FilterDecision:
    """Inclusive bounds on both axes; the first violated bound names the reason."""
    if metrics.max_depth < policy.depth_min:
        return FilterDecision(False, "depth_below_min")
    if metrics.max_depth > policy.depth_max:
        return FilterDecision(False, "depth_above_max")
    if metrics.max_siblings < policy.siblings_min:
        return FilterDecision(False, "siblings_below_min")
    if metrics.max_siblings > policy.siblings_max:
        return FilterDecision(False, "siblings_above_max")
    return FilterDecision(True)


@dataclass(frozen=True)
class BinSpec:
    lo: int
    hi: int
    width: int = 1

    def __post_init__(self) -> None:
        if self.width < 1:
            raise ValueError("bin width must be at least 1")
        if self.lo > self.hi:
            raise ValueError("bin range is empty")

    def labels(self) -> list[int]:
        return list(range(self.lo, self.hi + 1, self.width))


_HISTOGRAM_FIELDS = {"depth": "max_depth", "siblings": "max_siblings"}


def histogram(
    metrics: Iterable[RepoMetrics], field: str, bins: BinSpec
) -> list[tuple[int, int]]:
    """Count repos per bin; every repo lands in exactly one bin.

    Bins are labelled by their lower bound. Values outside the bin range
    are a caller error, not silently clipped.
    """
    if field not in _HISTOGRAM_FIELDS:
        raise ValueError(f"unknown histogram field '{field}'")
    rows = list(metrics)
    if not rows:
        raise EmptyInput("histogram of an empty repo set")
    attr = _HISTOGRAM_FIELDS[field]
    counts = {label: 0 for label in bins.labels()}
    for row in rows:
        value = getattr(row, attr)
        if value < bins.lo or value > bins.hi:
            raise ValueError(
                f"{field} value {value} of '{row.repo_id}' falls outside"
                f" bins [{bins.lo}, {bins.hi}]"
            )
        label = bins.lo + ((value - bins.lo) // bins.width) * bins.width
        counts[label] += 1
    return sorted(counts.items())
