"""Shared fixtures: the handcrafted repo corpus and helpers to analyse it."""

from pathlib import Path

import pytest

from depalign import FileAnalysis, build_project_graph, parse_file

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS = FIXTURES / "corpus"
GOLDEN = Path(__file__).parent / "golden"
MATH_RECORDS = FIXTURES / "math_records.jsonl"


def repo_sources(repo_id: str) -> dict[str, str]:
    """Repo-relative path -> source text, sorted by path."""
    repo = CORPUS / repo_id
    return {
        p.relative_to(repo).as_posix(): p.read_text(encoding="utf-8")
        for p in sorted(repo.rglob("*.py"))
    }


def analyze_repo(repo_id: str) -> list[FileAnalysis]:
    return [
        parse_file(text, rel) for rel, text in repo_sources(repo_id).items()
    ]


def repo_graph(repo_id: str):
    return build_project_graph(analyze_repo(repo_id))


@pytest.fixture(scope="session")
def corpus_root() -> Path:
    return CORPUS


@pytest.fixture(scope="session")
def math_records_path() -> Path:
    return MATH_RECORDS
