"""Project-wide call graphs and the dependency trees hung from each root.

The graph is the cross-file join of per-file analyses: only calls that
land on a function defined somewhere in the same repository become edges.
Trees are finite by construction; cycles are cut with recursion markers
instead of unrolled.
"""

from __future__ import annotations

import heapq
import itertools
import logging
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional

from .ast_ingest import FileAnalysis, FunctionRecord, resolve_callee
from .errors import RootNotFound

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DependencyGraph:
    nodes: frozenset[str]
    edges: frozenset[tuple[str, str]]
    self_recursive: frozenset[str]
    unresolved_count: int

    def sorted_nodes(self) -> list[str]:
        return sorted(self.nodes)

    def sorted_edges(self) -> list[tuple[str, str]]:
        return sorted(self.edges)

    def successors(self) -> dict[str, list[str]]:
        adj: dict[str, list[str]] = {n: [] for n in self.nodes}
        for caller, callee in self.sorted_edges():
            adj[caller].append(callee)
        return adj

    def to_dict(self) -> dict:
        return {
            "nodes": self.sorted_nodes(),
            "edges": [list(e) for e in self.sorted_edges()],
            "self_recursive": sorted(self.self_recursive),
            "unresolved_count": self.unresolved_count,
        }


def graph_from_dict(payload: dict) -> DependencyGraph:
    return DependencyGraph(
        nodes=frozenset(payload["nodes"]),
        edges=frozenset((a, b) for a, b in payload["edges"]),
        self_recursive=frozenset(payload["self_recursive"]),
        unresolved_count=payload["unresolved_count"],
    )


@dataclass(frozen=True)
class DependencyTree:
    root: str
    recursion_marker: bool
    children: tuple["DependencyTree", ...]
    depth: int
    docstring_ref: Optional[str] = None


def function_table(analyses: Iterable[FileAnalysis]) -> dict[str, FunctionRecord]:
    """All definitions by qualified name; collisions warn, last file wins."""
    table: dict[str, FunctionRecord] = {}
    for analysis in sorted(analyses, key=lambda a: a.file_path):
        for fn in analysis.functions:
            if fn.qualified_name in table:
                logger.warning(
                    "duplicate definition of %s (keeping the one from %s)",
                    fn.qualified_name,
                    analysis.file_path,
                )
            table[fn.qualified_name] = fn
    return table


def build_project_graph(analyses: Iterable[FileAnalysis]) -> DependencyGraph:
    """Join per-file analyses into one project graph.

    Calls that resolve to nothing defined in the project are dropped and
    tallied in ``unresolved_count``. A resolved class identifier falls
    back to its ``__init__`` when that is what the project defines.
    Self-calls are recorded in ``self_recursive`` rather than as edges, so
    the edge relation stays irreflexive.
    """
    ordered = sorted(analyses, key=lambda a: a.file_path)
    table = function_table(ordered)
    edges: set[tuple[str, str]] = set()
    self_recursive: set[str] = set()
    unresolved = 0

    for analysis in ordered:
        for fn in analysis.functions:
            for site in fn.call_sites:
                target = resolve_callee(site, analysis, caller=fn)
                if target is not None and target not in table:
                    init = f"{target}.__init__"
                    target = init if init in table else None
                if target is None:
                    unresolved += 1
                elif target == fn.qualified_name:
                    self_recursive.add(target)
                else:
                    edges.add((fn.qualified_name, target))

    return DependencyGraph(
        nodes=frozenset(table),
        edges=frozenset(edges),
        self_recursive=frozenset(self_recursive),
        unresolved_count=unresolved,
    )


def _ordered_sccs(graph: DependencyGraph) -> list[frozenset[str]]:
    """Strongly connected components, callers-first, deterministically.

    Tarjan finds the components; a Kahn pass over the condensation with a
    min-heap keyed by each component's smallest member fixes one canonical
    emission order.
    """
    succ = graph.successors()
    sccs = _tarjan(sorted(graph.nodes), succ)
    comp_of = {node: i for i, comp in enumerate(sccs) for node in comp}
    out: dict[int, set[int]] = {i: set() for i in range(len(sccs))}
    indeg = {i: 0 for i in range(len(sccs))}
    for caller, callee in graph.edges:
        a, b = comp_of[caller], comp_of[callee]
        if a != b and b not in out[a]:
            out[a].add(b)
            indeg[b] += 1

    key = {i: min(comp) for i, comp in enumerate(sccs)}
    ready = [(key[i], i) for i in range(len(sccs)) if indeg[i] == 0]
    heapq.heapify(ready)
    order: list[frozenset[str]] = []
    while ready:
        _, i = heapq.heappop(ready)
        order.append(sccs[i])
        for j in sorted(out[i]):
            indeg[j] -= 1
            if indeg[j] == 0:
                heapq.heappush(ready, (key[j], j))
    return order


def _tarjan(nodes: list[str], succ: dict[str, list[str]]) -> list[frozenset[str]]:
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    counter = itertools.count()
    result: list[frozenset[str]] = []

    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(succ.get(root, ())))]
        index[root] = low[root] = next(counter)
        stack.append(root)
        on_stack.add(root)
        while work:
            node, children = work[-1]
            advanced = False
            for child in children:
                if child not in index:
                    index[child] = low[child] = next(counter)
                    stack.append(child)
                    on_stack.add(child)
                    work.append((child, iter(succ.get(child, ()))))
                    advanced = True
                    break
                if child in on_stack:
                    low[node] = min(low[node], index[child])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == node:
                        break
                result.append(frozenset(comp))
    return result


def strongly_connected_components(graph: DependencyGraph) -> tuple[frozenset[str], ...]:
    """Components in the same callers-first order ``topological_order`` uses."""
    return tuple(_ordered_sccs(graph))


def topological_order(graph: DependencyGraph) -> list[str]:
    """Callers before callees; each cycle flattened to a sorted block."""
    return [node for comp in _ordered_sccs(graph) for node in sorted(comp)]


def enumerate_roots(graph: DependencyGraph) -> list[str]:
    """Functions worth a tree: every caller, plus anything never called."""
    indeg: dict[str, int] = {n: 0 for n in graph.nodes}
    outdeg: dict[str, int] = {n: 0 for n in graph.nodes}
    for caller, callee in graph.edges:
        outdeg[caller] += 1
        indeg[callee] += 1
    return sorted(
        n for n in graph.nodes if outdeg[n] >= 1 or indeg[n] == 0
    )


class _MutNode:
    __slots__ = ("ident", "marker", "children")

    def __init__(self, ident: str, marker: bool) -> None:
        self.ident = ident
        self.marker = marker
        self.children: list[_MutNode] = []


def build_call_tree(
    graph: DependencyGraph,
    root: str,
    docstring_ref: Optional[str] = None,
) -> DependencyTree:
    """Expand the graph under ``root`` into a finite tree, breadth-first.

    Children appear in sorted order. A callee already on the path from the
    root is not expanded again: it becomes a childless marker leaf. A
    function that calls itself is flagged in place (self-edges carry no
    child node).
    """
    if root not in graph.nodes:
        raise RootNotFound(f"'{root}' is not a function in this graph")
    succ = graph.successors()
    top = _MutNode(root, root in graph.self_recursive)
    queue: deque[tuple[_MutNode, frozenset[str]]] = deque(
        [(top, frozenset({root}))]
    )
    while queue:
        node, path = queue.popleft()
        for callee in succ.get(node.ident, ()):
            if callee in path:
                node.children.append(_MutNode(callee, True))
                continue
            child = _MutNode(callee, callee in graph.self_recursive)
            node.children.append(child)
            queue.append((child, path | {callee}))
    return _freeze(top, docstring_ref)


def _freeze(top: _MutNode, docstring_ref: Optional[str]) -> DependencyTree:
    done: dict[int, DependencyTree] = {}
    stack: list[tuple[_MutNode, bool]] = [(top, False)]
    while stack:
        node, expanded = stack.pop()
        if not expanded:
            stack.append((node, True))
            for child in reversed(node.children):
                stack.append((child, False))
            continue
        children = tuple(done[id(c)] for c in node.children)
        done[id(node)] = DependencyTree(
            root=node.ident,
            recursion_marker=node.marker,
            children=children,
            depth=1 + max((c.depth for c in children), default=0),
            docstring_ref=docstring_ref if node is top else None,
        )
    return done[id(top)]


def render_tree_text(tree: DependencyTree) -> str:
    """Indented one-line-per-node rendering for eyeballing trees."""
    lines: list[str] = []
    stack: list[tuple[DependencyTree, int]] = [(tree, 0)]
    while stack:
        node, level = stack.pop()
        suffix = " [recursion]" if node.recursion_marker else ""
        lines.append(f"{'  ' * level}{node.root}{suffix}")
        for child in reversed(node.children):
            stack.append((child, level + 1))
    return "\n".join(lines)
