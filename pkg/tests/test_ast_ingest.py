"""Single-file analysis: registration, imports, object types, resolution."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from depalign import module_path_for, parse_file, resolve_callee
from depalign.ast_ingest import analysis_from_dict, analysis_to_dict
from depalign.errors import GrammarUnsupported

from conftest import CORPUS, analyze_repo, repo_sources


def _resolve_all(analysis):
    out = {}
    for fn in analysis.functions:
        for site in fn.call_sites:
            out[(fn.qualified_name, site.callee, site.line)] = resolve_callee(
                site, analysis, caller=fn
            )
    return out


def test_single_function_registration():
    analysis = parse_file(
        'def solo(x):\n    """One liner."""\n    return x\n', "mod.py"
    )
    assert [f.qualified_name for f in analysis.functions] == ["mod.solo"]
    fn = analysis.functions[0]
    assert fn.docstring == "One liner."
    assert fn.class_context is None
    assert fn.source_span == (1, 3)
    assert fn.call_sites == ()


def test_module_path_for():
    assert module_path_for("app.py") == "app"
    assert module_path_for("pkg/util.py") == "pkg.util"
    assert module_path_for("pkg/__init__.py") == "pkg"
    assert module_path_for("a/b/c.py") == "a.b.c"


def test_unsupported_file_type_raises():
    with pytest.raises(GrammarUnsupported):
        parse_file("whatever", "notes.txt")


def test_syntax_error_is_collected_not_raised():
    analysis = parse_file("def broken(:\n    return\n", "bad.py")
    assert analysis.functions == ()
    assert [d.kind for d in analysis.parse_errors] == ["syntax_error"]
    assert analysis.parse_errors[0].line == 1


def test_aliased_import_binding():
    """`from util import helper as h` binds h to util.helper."""
    (analysis,) = [
        a for a in analyze_repo("aliased_import") if a.file_path == "main.py"
    ]
    assert analysis.imports == {"h": "util.helper"}
    resolved = _resolve_all(analysis)
    assert resolved[("main.go", "h", 6)] == "util.helper"


def test_plain_import_binds_root_module():
    (analysis,) = [
        a for a in analyze_repo("plain_import") if a.file_path == "main.py"
    ]
    assert analysis.imports == {"util": "util"}
    assert list(_resolve_all(analysis).values()) == ["util.helper"]


def test_constructor_call_and_method_on_object():
    (analysis,) = [
        a
        for a in analyze_repo("constructor_method")
        if a.file_path == "main.py"
    ]
    assert analysis.object_types == {"e": "models.Engine"}
    resolved = _resolve_all(analysis)
    # The constructor resolves to the imported class path; the graph layer
    # maps it onto __init__. The method call resolves through the object.
    assert resolved[("main.boot", "Engine", 6)] == "models.Engine"
    assert resolved[("main.boot", "e.start", 7)] == "models.Engine.start"


def test_local_constructor_maps_to_init():
    (analysis,) = analyze_repo("constructor_local")
    resolved = _resolve_all(analysis)
    assert resolved[("widgets.make", "Widget", 8)] == "widgets.Widget.__init__"


def test_class_without_init_resolves_absent():
    (analysis,) = analyze_repo("method_calls")
    resolved = _resolve_all(analysis)
    assert resolved[("service.main", "Service", 11)] is None


def test_self_method_call_resolves_to_class():
    (analysis,) = analyze_repo("method_calls")
    run = next(f for f in analysis.functions if f.name == "run")
    assert run.class_context == "Service"
    assert [
        resolve_callee(s, analysis, caller=run) for s in run.call_sites
    ] == ["service.Service.step", "service.Service.step"]


def test_object_reassignment_last_before_call_wins():
    (analysis,) = analyze_repo("object_reassign")
    resolved = _resolve_all(analysis)
    assert resolved[("swap.use", "holder.ping", 14)] == "swap.First.ping"
    assert resolved[("swap.use", "holder.ping", 16)] == "swap.Second.ping"
    # final state of the flat map reflects the last assignment
    assert analysis.object_types["holder"] == "swap.Second"


def test_unknown_names_resolve_absent():
    analysis = parse_file(
        "def f():\n    return mystery() + len('x')\n", "mod.py"
    )
    assert list(_resolve_all(analysis).values()) == [None, None]


def test_nested_function_qualification_and_scope():
    (analysis,) = analyze_repo("nested_functions")
    assert [f.qualified_name for f in analysis.functions] == [
        "outer.outer",
        "outer.outer.<locals>.inner",
        "outer.standalone",
    ]
    resolved = _resolve_all(analysis)
    assert resolved[("outer.outer", "inner", 5)] == "outer.outer.<locals>.inner"
    assert resolved[("outer.standalone", "outer", 9)] == "outer.outer"


def test_nested_name_not_visible_from_sibling():
    source = (
        "def a():\n"
        "    def hidden():\n"
        "        return 1\n"
        "    return hidden()\n"
        "\n"
        "def b():\n"
        "    return hidden()\n"
    )
    analysis = parse_file(source, "mod.py")
    b = next(f for f in analysis.functions if f.name == "b")
    assert resolve_callee(b.call_sites[0], analysis, caller=b) is None


def test_wildcard_import_diagnostic():
    (analysis,) = [
        a for a in analyze_repo("wildcard_import") if a.file_path == "main.py"
    ]
    assert analysis.imports == {}
    assert "wildcard_import" in {d.kind for d in analysis.parse_errors}
    assert list(_resolve_all(analysis).values()) == [None]


def test_shadowing_prefers_local_and_flags():
    (analysis,) = [
        a for a in analyze_repo("shadowing") if a.file_path == "main.py"
    ]
    caller = next(f for f in analysis.functions if f.name == "caller")
    assert (
        resolve_callee(caller.call_sites[0], analysis, caller=caller)
        == "main.helper"
    )
    assert "shadowed_import" in {d.kind for d in analysis.parse_errors}


def test_duplicate_definition_keeps_last():
    (analysis,) = analyze_repo("duplicate_defs")
    task = next(f for f in analysis.functions if f.name == "task")
    assert task.docstring == "Second definition wins."
    assert task.source_span[0] > 1
    assert "duplicate_definition" in {d.kind for d in analysis.parse_errors}
    assert len([f for f in analysis.functions if f.name == "task"]) == 1


def test_relative_import_resolves_against_package():
    analysis = parse_file(
        "from .util import helper\n\ndef f():\n    return helper()\n",
        "pkg/main.py",
    )
    assert analysis.imports == {"helper": "pkg.util.helper"}


def test_import_of_dotted_module_binds_root():
    analysis = parse_file(
        "import os.path\n\ndef f(p):\n    return os.path.join(p, 'x')\n",
        "mod.py",
    )
    assert analysis.imports == {"os": "os"}
    assert list(_resolve_all(analysis).values()) == ["os.path.join"]


def test_decorators_and_defaults_are_not_call_sites():
    source = (
        "def decor(fn):\n"
        "    return fn\n"
        "\n"
        "def factory():\n"
        "    return 0\n"
        "\n"
        "@decor\n"
        "def shiny(x=factory()):\n"
        "    return x\n"
    )
    analysis = parse_file(source, "mod.py")
    shiny = next(f for f in analysis.functions if f.name == "shiny")
    assert shiny.call_sites == ()
    assert shiny.body_text.startswith("def shiny")


def test_call_sites_keep_source_order():
    source = "def f():\n    first(second())\n    third()\n"
    analysis = parse_file(source, "mod.py")
    assert [s.callee for s in analysis.functions[0].call_sites] == [
        "first",
        "second",
        "third",
    ]


def test_span_soundness_across_corpus():
    """body_text is exactly the source slice named by source_span."""
    for repo_dir in sorted(p.name for p in CORPUS.iterdir()):
        for rel, text in repo_sources(repo_dir).items():
            analysis = parse_file(text, rel)
            lines = text.splitlines(keepends=True)
            for fn in analysis.functions:
                lo, hi = fn.source_span
                assert fn.body_text == "".join(lines[lo - 1 : hi]), (
                    repo_dir,
                    rel,
                    fn.qualified_name,
                )


def test_analysis_idempotent_and_round_trips():
    for repo_dir in sorted(p.name for p in CORPUS.iterdir()):
        for rel, text in repo_sources(repo_dir).items():
            first = parse_file(text, rel)
            second = parse_file(text, rel)
            assert first == second
            assert first.to_json() == second.to_json()
            assert analysis_from_dict(analysis_to_dict(first)) == first


_IDENT = st.from_regex(r"[a-z][a-z_0-9]{0,8}", fullmatch=True).filter(
    lambda s: s not in ("def", "if", "in", "is", "for", "not", "del", "or", "and")
)


@settings(max_examples=50, deadline=None)
@given(st.lists(_IDENT, min_size=2, max_size=6, unique=True))
def test_generated_chains_register_and_resolve(names):
    """Each function calls the next; registration order and edges follow."""
    parts = []
    for i, name in enumerate(names):
        callee = names[i + 1] if i + 1 < len(names) else None
        body = f"    return {callee}(x)\n" if callee else "    return x\n"
        parts.append(f"def {name}(x):\n{body}")
    analysis = parse_file("\n".join(parts), "gen.py")
    assert [f.name for f in analysis.functions] == names
    for i, fn in enumerate(analysis.functions[:-1]):
        (site,) = fn.call_sites
        assert resolve_callee(site, analysis, caller=fn) == f"gen.{names[i + 1]}"
