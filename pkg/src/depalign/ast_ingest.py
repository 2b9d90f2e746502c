"""Per-file static analysis: definitions, imports, object types, call sites.

One file goes in, one immutable :class:`FileAnalysis` comes out. The walk
is purely syntactic: no imports are executed, no type inference happens.
Dynamic dispatch that syntax cannot see (reflection, first-class function
values, wildcard imports) is reported as a diagnostic or simply left
unresolved rather than guessed at.

Language support sits behind :class:`GrammarAdapter`; the default adapter
parses Python with the standard library ``ast`` module.
"""

from __future__ import annotations

import ast
import json
from dataclasses import dataclass
from typing import Iterator, Optional, Protocol

from .errors import GrammarUnsupported
from .fsutil import stable_json


@dataclass(frozen=True)
class Diagnostic:
    """A non-fatal oddity found while analysing a file."""

    kind: str
    message: str
    line: Optional[int] = None


@dataclass(frozen=True)
class CallSite:
    """A call expression as written: dotted name text plus its line."""

    callee: str
    line: int


@dataclass(frozen=True)
class ObjectAssignment:
    """One ``var = SomeClass(...)`` event, kept in source order."""

    var: str
    class_id: str
    line: int


@dataclass(frozen=True)
class FunctionRecord:
    qualified_name: str
    class_context: Optional[str]
    docstring: Optional[str]
    body_text: str
    source_span: tuple[int, int]
    call_sites: tuple[CallSite, ...]

    @property
    def name(self) -> str:
        return self.qualified_name.rsplit(".", 1)[-1]


@dataclass(frozen=True)
class FileAnalysis:
    file_path: str
    functions: tuple[FunctionRecord, ...]
    imports: dict[str, str]
    object_types: dict[str, str]
    object_assignments: tuple[ObjectAssignment, ...]
    classes: tuple[str, ...]
    parse_errors: tuple[Diagnostic, ...]

    def to_json(self) -> str:
        return stable_json(analysis_to_dict(self))


def module_path_for(file_path: str) -> str:
    """Repo-relative file path -> dotted module path.

    ``pkg/util.py`` becomes ``pkg.util``; a package ``__init__.py`` takes
    the package's own path.
    """
    norm = file_path.replace("\\", "/").strip("/")
    if norm.endswith(".py"):
        norm = norm[: -len(".py")]
    parts = [p for p in norm.split("/") if p]
    if len(parts) > 1 and parts[-1] == "__init__":
        parts = parts[:-1]
    return ".".join(parts)


class GrammarAdapter(Protocol):
    """Boundary for language frontends.

    An adapter names itself, says which files it handles, and turns source
    text into a :class:`FileAnalysis`. Nothing outside the adapter touches
    parse trees.
    """

    name: str
    suffixes: tuple[str, ...]

    def handles(self, file_path: str) -> bool: ...

    def extract(self, source_text: str, file_path: str) -> FileAnalysis: ...


def _dotted_chain(expr: ast.expr) -> Optional[tuple[str, ...]]:
    """``a.b.c`` -> ("a", "b", "c"); anything fancier -> None."""
    parts: list[str] = []
    while isinstance(expr, ast.Attribute):
        parts.append(expr.attr)
        expr = expr.value
    if isinstance(expr, ast.Name):
        parts.append(expr.id)
        return tuple(reversed(parts))
    return None


class _Walker:
    """Single source-order walk collecting definitions and raw uses.

    Decorators, default arguments and annotations are deliberately not
    descended into: a decoration is metadata about a definition, not a
    dependency of the function body.
    """

    def __init__(self, module: str) -> None:
        self.module = module
        self.qual_parts: list[str] = []
        self.kinds: list[str] = []
        self.func_stack: list[dict] = []
        self.builders: list[dict] = []
        self.imports: dict[str, str] = {}
        self.registry: dict[str, str] = {}
        self.classes: list[str] = []
        self.module_level_funcs: set[str] = set()
        self.module_level_classes: set[str] = set()
        self.module_level_def_lines: dict[str, int] = {}
        self.raw_assigns: list[tuple[tuple[str, ...], tuple[str, ...], int]] = []
        self.diagnostics: list[Diagnostic] = []

    def walk_module(self, tree: ast.Module) -> None:
        for stmt in tree.body:
            self._walk(stmt)

    def _walk(self, node: ast.AST) -> None:
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            self._handle_function(node)
        elif isinstance(node, ast.ClassDef):
            self._handle_class(node)
        elif isinstance(node, ast.Import):
            self._handle_import(node)
        elif isinstance(node, ast.ImportFrom):
            self._handle_import_from(node)
        else:
            if isinstance(node, (ast.Assign, ast.AnnAssign)):
                self._note_assign(node)
            if isinstance(node, ast.Call):
                self._note_call(node)
            for child in ast.iter_child_nodes(node):
                self._walk(child)

    def _qualify(self, name: str) -> str:
        if self.qual_parts:
            return f"{self.module}.{'.'.join(self.qual_parts)}.{name}"
        return f"{self.module}.{name}"

    def _class_context(self) -> Optional[str]:
        chain: list[str] = []
        for part, kind in zip(reversed(self.qual_parts), reversed(self.kinds)):
            if kind != "class":
                break
            chain.append(part)
        if not chain:
            return None
        return ".".join(reversed(chain))

    def _handle_function(self, node) -> None:
        qualified = self._qualify(node.name)
        builder = {
            "qualified": qualified,
            "class_context": self._class_context(),
            "docstring": ast.get_docstring(node),
            "span": (node.lineno, node.end_lineno),
            "calls": [],
        }
        self.builders.append(builder)
        if not self.qual_parts:
            self.module_level_funcs.add(node.name)
            self.module_level_def_lines.setdefault(node.name, node.lineno)
        self.qual_parts.append(f"{node.name}.<locals>")
        self.kinds.append("func")
        self.func_stack.append(builder)
        for stmt in node.body:
            self._walk(stmt)
        self.func_stack.pop()
        self.kinds.pop()
        self.qual_parts.pop()

    def _handle_class(self, node: ast.ClassDef) -> None:
        qualified = self._qualify(node.name)
        self.classes.append(qualified)
        self.registry[node.name] = qualified
        if not self.qual_parts:
            self.module_level_classes.add(node.name)
            self.module_level_def_lines.setdefault(node.name, node.lineno)
        self.qual_parts.append(node.name)
        self.kinds.append("class")
        for stmt in node.body:
            self._walk(stmt)
        self.kinds.pop()
        self.qual_parts.pop()

    def _handle_import(self, node: ast.Import) -> None:
        for alias in node.names:
            if alias.asname:
                self.imports[alias.asname] = alias.name
            else:
                root = alias.name.split(".")[0]
                self.imports[root] = root

    def _handle_import_from(self, node: ast.ImportFrom) -> None:
        base = self._relative_base(node)
        if base is None:
            return
        for alias in node.names:
            if alias.name == "*":
                self.diagnostics.append(
                    Diagnostic(
                        "wildcard_import",
                        f"'from {node.module or '.'} import *' hides which"
                        " names are bound; calls through it stay unresolved",
                        node.lineno,
                    )
                )
                continue
            bound = alias.asname or alias.name
            self.imports[bound] = f"{base}.{alias.name}" if base else alias.name

    def _relative_base(self, node: ast.ImportFrom) -> Optional[str]:
        if node.level == 0:
            return node.module or ""
        anchor = self.module.split(".")[:-1]
        up = node.level - 1
        if up > len(anchor):
            self.diagnostics.append(
                Diagnostic(
                    "relative_beyond_root",
                    "relative import climbs above the repository root",
                    node.lineno,
                )
            )
            return None
        base = anchor[: len(anchor) - up] if up else anchor
        if node.module:
            base = base + node.module.split(".")
        return ".".join(base)

    def _note_assign(self, node) -> None:
        value = node.value
        if not isinstance(value, ast.Call):
            return
        chain = _dotted_chain(value.func)
        if chain is None:
            return
        if isinstance(node, ast.Assign):
            names = tuple(t.id for t in node.targets if isinstance(t, ast.Name))
        else:
            names = (node.target.id,) if isinstance(node.target, ast.Name) else ()
        if names:
            self.raw_assigns.append((names, chain, node.lineno))

    def _note_call(self, node: ast.Call) -> None:
        chain = _dotted_chain(node.func)
        if chain is None or not self.func_stack:
            return
        self.func_stack[-1]["calls"].append(CallSite(".".join(chain), node.lineno))


class PythonAstAdapter:
    """Python frontend built on the standard library ``ast`` module."""

    name = "python-ast"
    suffixes = (".py",)

    def handles(self, file_path: str) -> bool:
        return file_path.replace("\\", "/").lower().endswith(self.suffixes)

    def extract(self, source_text: str, file_path: str) -> FileAnalysis:
        module = module_path_for(file_path)
        try:
            tree = ast.parse(source_text)
        except (SyntaxError, ValueError) as exc:
            line = getattr(exc, "lineno", None)
            return FileAnalysis(
                file_path=file_path,
                functions=(),
                imports={},
                object_types={},
                object_assignments=(),
                classes=(),
                parse_errors=(Diagnostic("syntax_error", str(exc), line),),
            )

        walker = _Walker(module)
        walker.walk_module(tree)
        diagnostics = list(walker.diagnostics)

        object_assignments = _classify_assigns(walker)
        object_types = {a.var: a.class_id for a in object_assignments}

        lines = source_text.splitlines(keepends=True)
        last_index = {b["qualified"]: i for i, b in enumerate(walker.builders)}
        functions: list[FunctionRecord] = []
        reported_dups: set[str] = set()
        for i, b in enumerate(walker.builders):
            if last_index[b["qualified"]] != i:
                if b["qualified"] not in reported_dups:
                    reported_dups.add(b["qualified"])
                    diagnostics.append(
                        Diagnostic(
                            "duplicate_definition",
                            f"{b['qualified']} is defined more than once;"
                            " the last definition wins",
                            b["span"][0],
                        )
                    )
                continue
            lo, hi = b["span"]
            functions.append(
                FunctionRecord(
                    qualified_name=b["qualified"],
                    class_context=b["class_context"],
                    docstring=b["docstring"],
                    body_text="".join(lines[lo - 1 : hi]),
                    source_span=(lo, hi),
                    call_sites=tuple(b["calls"]),
                )
            )

        shadowers = (
            walker.module_level_funcs | walker.module_level_classes
        ) & set(walker.imports)
        for shadowed in sorted(shadowers):
            diagnostics.append(
                Diagnostic(
                    "shadowed_import",
                    f"local definition of '{shadowed}' shadows the import of"
                    f" '{walker.imports[shadowed]}'; local-first resolution"
                    " applies",
                    walker.module_level_def_lines.get(shadowed),
                )
            )

        return FileAnalysis(
            file_path=file_path,
            functions=tuple(functions),
            imports=dict(walker.imports),
            object_types=object_types,
            object_assignments=tuple(object_assignments),
            classes=tuple(walker.classes),
            parse_errors=tuple(diagnostics),
        )


def _classify_assigns(walker: _Walker) -> list[ObjectAssignment]:
    """Decide which ``x = Something(...)`` lines construct objects.

    Local classes win over imports; assignments from known local functions
    are ordinary value bindings and dropped.
    """
    out: list[ObjectAssignment] = []
    for names, chain, line in walker.raw_assigns:
        base = chain[0]
        rest = chain[1:]
        class_id: Optional[str] = None
        if base in walker.registry:
            class_id = walker.registry[base]
            if rest:
                class_id = f"{class_id}.{'.'.join(rest)}"
        elif base in walker.module_level_funcs:
            class_id = None
        elif base in walker.imports:
            class_id = walker.imports[base]
            if rest:
                class_id = f"{class_id}.{'.'.join(rest)}"
        if class_id:
            for var in names:
                out.append(ObjectAssignment(var, class_id, line))
    return out


DEFAULT_ADAPTER = PythonAstAdapter()


def parse_file(
    source_text: str,
    file_path: str,
    grammar: Optional[GrammarAdapter] = None,
) -> FileAnalysis:
    """Analyse one source file.

    Syntax errors never raise: they land in ``parse_errors`` and the
    analysis comes back empty. A file the adapter does not handle raises
    :class:`GrammarUnsupported`.
    """
    adapter = grammar if grammar is not None else DEFAULT_ADAPTER
    if not adapter.handles(file_path):
        raise GrammarUnsupported(
            f"{adapter.name} does not handle '{file_path}'"
        )
    return adapter.extract(source_text, file_path)


def _function_scopes(caller_qualified: str, module: str) -> list[str]:
    """Enclosing function scopes, innermost first, for bare-name lookup.

    Class scopes are skipped on purpose: a bare name inside a method sees
    enclosing functions and module globals, never class attributes.
    """
    scopes = [caller_qualified]
    prefix = f"{module}."
    if not caller_qualified.startswith(prefix):
        return scopes
    rel = caller_qualified[len(prefix):].split(".")
    while "<locals>" in rel:
        idx = len(rel) - 1 - rel[::-1].index("<locals>")
        rel = rel[:idx]
        scopes.append(f"{module}.{'.'.join(rel)}")
    return scopes


def _owner_of(raw_call: CallSite, analysis: FileAnalysis) -> Optional[FunctionRecord]:
    for fn in analysis.functions:
        for site in fn.call_sites:
            if site is raw_call:
                return fn
    best: Optional[FunctionRecord] = None
    for fn in analysis.functions:
        lo, hi = fn.source_span
        if lo <= raw_call.line <= hi:
            if best is None or (lo >= best.source_span[0] and hi <= best.source_span[1]):
                best = fn
    return best


def resolve_callee(
    raw_call: CallSite,
    analysis: FileAnalysis,
    caller: Optional[FunctionRecord] = None,
) -> Optional[str]:
    """Turn raw call text into a fully qualified callee, or None.

    Resolution tries, in order: local definitions (including nested
    functions visible from the caller's scope and local-class
    constructors), tracked object types for method calls, then import
    aliases. Anything else is statically unresolvable and returns None;
    nothing is ever fabricated.
    """
    if caller is None:
        caller = _owner_of(raw_call, analysis)
    if caller is None:
        return None

    module = module_path_for(analysis.file_path)
    functions = {fn.qualified_name for fn in analysis.functions}
    classes = set(analysis.classes)
    parts = raw_call.callee.split(".")
    scopes = _function_scopes(caller.qualified_name, module)

    def local_candidates(dotted: str) -> Iterator[str]:
        for scope in scopes:
            yield f"{scope}.<locals>.{dotted}"
        yield f"{module}.{dotted}"

    def try_local(dotted: str) -> tuple[bool, Optional[str]]:
        for cand in local_candidates(dotted):
            if cand in functions:
                return True, cand
            init = f"{cand}.__init__"
            if init in functions:
                return True, init
            if cand in classes:
                # A local class with no __init__ shadows anything outer;
                # there is no function body to depend on.
                return True, None
        return False, None

    if len(parts) == 1:
        decided, target = try_local(parts[0])
        if decided:
            return target
        return analysis.imports.get(parts[0])

    decided, target = try_local(".".join(parts))
    if decided:
        return target

    base, rest = parts[0], parts[1:]
    class_id: Optional[str] = None
    if base in ("self", "cls") and caller.class_context:
        class_id = f"{module}.{caller.class_context}"
    else:
        for event in analysis.object_assignments:
            if event.var == base and event.line <= raw_call.line:
                class_id = event.class_id
    if class_id:
        candidate = f"{class_id}.{'.'.join(rest)}"
        if class_id in classes:
            return candidate if candidate in functions else None
        return candidate

    if base in analysis.imports:
        return f"{analysis.imports[base]}.{'.'.join(rest)}"
    return None


def analysis_to_dict(analysis: FileAnalysis) -> dict:
    return {
        "file_path": analysis.file_path,
        "functions": [
            {
                "qualified_name": fn.qualified_name,
                "class_context": fn.class_context,
                "docstring": fn.docstring,
                "body_text": fn.body_text,
                "source_span": list(fn.source_span),
                "call_sites": [
                    {"callee": site.callee, "line": site.line}
                    for site in fn.call_sites
                ],
            }
            for fn in analysis.functions
        ],
        "imports": dict(sorted(analysis.imports.items())),
        "object_types": dict(sorted(analysis.object_types.items())),
        "object_assignments": [
            {"var": a.var, "class_id": a.class_id, "line": a.line}
            for a in analysis.object_assignments
        ],
        "classes": list(analysis.classes),
        "parse_errors": [
            {"kind": d.kind, "message": d.message, "line": d.line}
            for d in analysis.parse_errors
        ],
    }


def analysis_from_dict(payload: dict) -> FileAnalysis:
    return FileAnalysis(
        file_path=payload["file_path"],
        functions=tuple(
            FunctionRecord(
                qualified_name=f["qualified_name"],
                class_context=f["class_context"],
                docstring=f["docstring"],
                body_text=f["body_text"],
                source_span=tuple(f["source_span"]),
                call_sites=tuple(
                    CallSite(callee=c["callee"], line=c["line"])
                    for c in f["call_sites"]
                ),
            )
            for f in payload["functions"]
        ),
        imports=dict(payload["imports"]),
        object_types=dict(payload["object_types"]),
        object_assignments=tuple(
            ObjectAssignment(a["var"], a["class_id"], a["line"])
            for a in payload["object_assignments"]
        ),
        classes=tuple(payload["classes"]),
        parse_errors=tuple(
            Diagnostic(d["kind"], d["message"], d["line"])
            for d in payload["parse_errors"]
        ),
    )


def analysis_from_json(text: str) -> FileAnalysis:
    return analysis_from_dict(json.loads(text))
