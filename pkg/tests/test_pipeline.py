"""End-to-end pipeline runs over the fixture corpus, plus the CLI."""

import json
import shutil

import pytest

from depalign import (
    SUMMARY_PROMPT_TEMPLATE,
    SummaryCache,
    math_quota,
    read_dataset,
    run_pipeline,
    validate_config,
)
from depalign.cli import main
from depalign.errors import (
    ConfigInvalid,
    InsufficientSamples,
    StageInputMissing,
)
from depalign.fsutil import sha256_text

from conftest import CORPUS, MATH_RECORDS

# permissive bounds: every fixture repo passes the shape gate
PERMISSIVE = {
    "depth_min": 1,
    "depth_max": 10,
    "siblings_min": 0,
    "siblings_max": 10,
}


def _config_data(out, **overrides):
    data = {
        "corpus_root": str(CORPUS),
        "output_dir": str(out),
        "filter_policy": dict(PERMISSIVE),
        "mix": {"alpha": 0.5, "seed": 7, "total": 10},
        "math_records": str(MATH_RECORDS),
    }
    data.update(overrides)
    return data


def _run(out, stages=None, **overrides):
    cfg = validate_config(json.dumps(_config_data(out, **overrides)))
    return cfg, run_pipeline(cfg, stages)


def _write_config(tmp_path, data, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def test_full_run_counts(tmp_path):
    out = tmp_path / "out"
    _, manifest = _run(out)
    stages = manifest.stages
    assert set(stages) == {
        "scan",
        "analyze",
        "filter",
        "augment",
        "assemble",
        "mix",
        "stats",
    }
    assert not any(r.skipped for r in stages.values())

    assert stages["scan"].counts == {
        "repos": 20,
        "files": 28,
        "readmes": 1,
        "skipped_decode": 0,
    }
    assert stages["analyze"].counts == {
        "repos": 20,
        "functions": 53,
        "parse_errors": 4,
        "unresolved_calls": 5,
    }
    assert stages["filter"].counts == {"repos": 20, "kept": 20, "dropped": 0}
    assert stages["augment"].counts == {
        "repos": 20,
        "roots": 33,
        "docstring": 20,
        "readme": 1,
        "generated": 0,
        "cache_misses": 18,
        "undescribed": 12,
    }
    assert stages["assemble"].counts == {
        "code_samples": 21,
        "math_samples": 6,
        "missing_description": 12,
        "dropped_oversized": 0,
        "skipped_math_records": 0,
    }
    assert stages["mix"].counts == {"total": 10, "math": 5, "code": 5}
    assert stages["stats"].counts == {"repos": 20, "kept": 20}

    for rel in (
        "scan.json",
        "metrics.csv",
        "filter.json",
        "datasets/code.jsonl",
        "datasets/code.manifest.json",
        "datasets/math.jsonl",
        "datasets/math.manifest.json",
        "datasets/mixed.jsonl",
        "datasets/mixed.manifest.json",
        "stats/depth_histogram.csv",
        "stats/siblings_histogram.csv",
        "stats/summary.json",
        "logs/timing.json",
    ):
        assert (out / rel).is_file(), rel
    for stage in stages:
        assert (out / "manifest" / f"{stage}.json").is_file()

    timing = json.loads((out / "logs" / "timing.json").read_text("utf-8"))
    assert set(timing["seconds"]) == set(stages)


def test_rerun_skips_everything(tmp_path):
    out = tmp_path / "out"
    _run(out)
    before = {
        p.relative_to(out).as_posix(): p.read_bytes()
        for p in sorted(out.rglob("*"))
        if p.is_file() and "logs" not in p.parts
    }
    _, again = _run(out)
    assert all(r.skipped for r in again.stages.values())
    after = {
        p.relative_to(out).as_posix(): p.read_bytes()
        for p in sorted(out.rglob("*"))
        if p.is_file() and "logs" not in p.parts
    }
    assert before == after


def test_config_change_reruns_only_downstream(tmp_path):
    out = tmp_path / "out"
    _run(out)
    tightened = dict(PERMISSIVE, depth_min=3, siblings_min=3)
    _, manifest = _run(
        out,
        filter_policy=tightened,
        mix={"alpha": 0.5, "seed": 7, "total": 2},
    )
    assert manifest.stages["scan"].skipped
    assert manifest.stages["analyze"].skipped
    assert not manifest.stages["filter"].skipped
    assert manifest.stages["filter"].counts["kept"] == 1
    payload = json.loads((out / "filter.json").read_text("utf-8"))
    assert payload["kept"] == ["deep_wide"]
    assert payload["dropped"]["direct_chain"] == "siblings_below_min"
    assert payload["dropped"]["wildcard_import"] == "depth_below_min"


def test_worker_count_does_not_change_bytes(tmp_path):
    serial_out = tmp_path / "serial"
    threaded_out = tmp_path / "threaded"
    _run(serial_out, parallelism=1)
    _run(threaded_out, parallelism=8)

    def snapshot(root):
        return {
            p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*"))
            if p.is_file() and "logs" not in p.parts
        }

    assert snapshot(serial_out) == snapshot(threaded_out)


def test_missing_prerequisites_fail_fast(tmp_path):
    with pytest.raises(StageInputMissing):
        _run(tmp_path / "a", stages=["mix"])
    with pytest.raises(StageInputMissing):
        _run(tmp_path / "b", stages=["scan", "filter"])
    with pytest.raises(ConfigInvalid) as err:
        _run(tmp_path / "c", stages=["scan", "shine"])
    assert err.value.field == "stages"
    # explicitly listing a legal prefix works
    _, manifest = _run(tmp_path / "d", stages=["scan", "analyze"])
    assert set(manifest.stages) == {"scan", "analyze"}


def test_mix_pool_shortfall_raises(tmp_path):
    with pytest.raises(InsufficientSamples):
        _run(tmp_path / "out", mix={"alpha": 0.5, "seed": 7, "total": 1000})


def test_unaligned_mode_drops_dependencies(tmp_path):
    out = tmp_path / "out"
    _, manifest = _run(out, assemble={"unaligned": True})
    counts = manifest.stages["assemble"].counts
    # readme-described and augmented roots don't count: docstrings only
    assert counts["code_samples"] == 20
    assert counts["missing_description"] == 13
    samples = read_dataset(out / "datasets" / "code.jsonl")
    assert all(s.dependencies_d == () for s in samples)
    dataset_manifest = json.loads(
        (out / "datasets" / "code.manifest.json").read_text("utf-8")
    )
    assert dataset_manifest["flags"] == ["unaligned"]


def test_assemble_option_variants(tmp_path):
    out = tmp_path / "out"
    _, manifest = _run(
        out, assemble={"direct_only": True, "signatures_only": True}
    )
    samples = read_dataset(out / "datasets" / "code.jsonl")
    by_provenance = {s.provenance: s for s in samples}
    fan = by_provenance["deep_wide:pipeline.fan"]
    assert [name for name, _ in fan.dependencies_d] == [
        f"pipeline.w{i}" for i in range(1, 6)
    ]
    assert all(body.endswith(":") for _, body in fan.dependencies_d)


def test_prompt_token_budget_drops_whole_samples(tmp_path):
    out = tmp_path / "out"
    _, manifest = _run(out, assemble={"max_prompt_tokens": 60})
    counts = manifest.stages["assemble"].counts
    assert counts["dropped_oversized"] > 0
    assert (
        counts["code_samples"]
        + counts["math_samples"]
        + counts["dropped_oversized"]
        == 27
    )


def test_seeded_cache_feeds_generated_descriptions(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    shutil.copytree(CORPUS / "mutual_recursion", corpus / "mutual_recursion")
    out = tmp_path / "out"
    cache_dir = tmp_path / "summaries"

    source = (corpus / "mutual_recursion" / "parity.py").read_text("utf-8")
    is_odd_body = "".join(source.splitlines(keepends=True)[7:11])
    assert is_odd_body.startswith("def is_odd")
    cache = SummaryCache(cache_dir)
    cache.put(
        sha256_text(SUMMARY_PROMPT_TEMPLATE),
        sha256_text(is_odd_body),
        {"response": "Decides oddness by stepping down through is_even."},
    )

    data = _config_data(
        out,
        corpus_root=str(corpus),
        summarizer={"mode": "cache_only", "cache_dir": str(cache_dir)},
        mix={"alpha": 0.5, "seed": 0, "total": 4},
    )
    cfg = validate_config(json.dumps(data))
    manifest = run_pipeline(
        cfg, ["scan", "analyze", "filter", "augment", "assemble"]
    )
    assert manifest.stages["augment"].counts == {
        "repos": 1,
        "roots": 2,
        "docstring": 1,
        "readme": 0,
        "generated": 1,
        "cache_misses": 0,
        "undescribed": 0,
    }
    records = json.loads(
        (out / "descriptions" / "mutual_recursion.json").read_text("utf-8")
    )["records"]
    assert records["parity.is_odd"]["origin"] == "generated"
    assert manifest.stages["assemble"].counts["code_samples"] == 2


def test_scan_skips_undecodable_files(tmp_path):
    corpus = tmp_path / "corpus"
    repo = corpus / "binary_repo"
    repo.mkdir(parents=True)
    (repo / "ok.py").write_text("def fine():\n    return 1\n", encoding="utf-8")
    (repo / "junk.py").write_bytes(b"\xff\xfe\x00broken")
    out = tmp_path / "out"
    data = _config_data(out, corpus_root=str(corpus))
    cfg = validate_config(json.dumps(data))
    manifest = run_pipeline(cfg, ["scan"])
    assert manifest.stages["scan"].counts == {
        "repos": 1,
        "files": 1,
        "readmes": 0,
        "skipped_decode": 1,
    }


def test_stats_histograms_cover_all_repos(tmp_path):
    out = tmp_path / "out"
    _run(out)
    for name in ("depth_histogram.csv", "siblings_histogram.csv"):
        lines = (out / "stats" / name).read_text("utf-8").strip().splitlines()
        assert lines[0] == "value,count"
        total = sum(int(line.split(",")[1]) for line in lines[1:])
        assert total == 20
    summary = json.loads((out / "stats" / "summary.json").read_text("utf-8"))
    assert summary["repos"] == 20
    assert summary["kept"] == 20
    assert summary["total_functions"] == 53


@pytest.mark.parametrize(
    "patch, field",
    [
        ({"mix": {"alpha": 1.5}}, "mix.alpha"),
        ({"mix": {"alpha": "half"}}, "mix.alpha"),
        ({"mix": {"policy": "roulette"}}, "mix.policy"),
        ({"mix": {"total": -4}}, "mix.total"),
        ({"filter_policy": {"depth_min": 6, "depth_max": 3}},
         "filter_policy.depth_min"),
        ({"filter_policy": {"depth_min": True}}, "filter_policy.depth_min"),
        ({"filter_policy": {"bogus": 1}}, "filter_policy.bogus"),
        ({"tokenizer": "bpe"}, "tokenizer"),
        ({"sibling_mode": "rows"}, "sibling_mode"),
        ({"summarizer": {"mode": "offline"}}, "summarizer.mode"),
        ({"summarizer": {"mode": "live"}}, "summarizer.endpoint"),
        ({"summarizer": {"mode": "live", "endpoint": "http://x"}},
         "summarizer.model"),
        ({"summarizer": {"temperature": 9.0}}, "summarizer.temperature"),
        ({"quality": {"interface_line_ratio": 2.0}},
         "quality.interface_line_ratio"),
        ({"quality": {"interface_tags": ["ok", ""]}},
         "quality.interface_tags"),
        ({"assemble": {"max_prompt_tokens": 0}},
         "assemble.max_prompt_tokens"),
        ({"assemble": {"direct_only": "yes"}}, "assemble.direct_only"),
        ({"parallelism": 0}, "parallelism"),
        ({"math_records": ""}, "math_records"),
        ({"made_up_key": 1}, "made_up_key"),
    ],
)
def test_config_validation_errors(tmp_path, patch, field):
    data = _config_data(tmp_path / "out")
    data.update(patch)
    with pytest.raises(ConfigInvalid) as err:
        validate_config(json.dumps(data))
    assert err.value.field == field


def test_config_rejects_malformed_json(tmp_path):
    with pytest.raises(ConfigInvalid):
        validate_config("{not json")
    with pytest.raises(ConfigInvalid):
        validate_config('["list", "not", "object"]')
    with pytest.raises(ConfigInvalid) as err:
        validate_config(json.dumps({"output_dir": "x"}))
    assert err.value.field == "corpus_root"


def test_cli_run_and_skip(tmp_path, capsys):
    config = _write_config(tmp_path, _config_data(tmp_path / "out"))
    assert main(["run", "--config", config]) == 0
    first = json.loads(capsys.readouterr().out)
    assert set(first["stages"]) == set(
        ("scan", "analyze", "filter", "augment", "assemble", "mix", "stats")
    )
    assert not any(s["skipped"] for s in first["stages"].values())

    assert main(["run", "--config", config]) == 0
    second = json.loads(capsys.readouterr().out)
    assert all(s["skipped"] for s in second["stages"].values())


def test_cli_single_stage_and_trees(tmp_path, capsys):
    config = _write_config(tmp_path, _config_data(tmp_path / "out"))
    assert main(["scan", "--config", config]) == 0
    assert main(["analyze", "--config", config]) == 0
    capsys.readouterr()

    assert main(["trees", "--config", config, "--repo", "direct_chain"]) == 0
    rendered = capsys.readouterr().out
    assert "app.top\n  app.middle\n    app.bottom" in rendered

    assert (
        main(
            [
                "trees",
                "--config",
                config,
                "--repo",
                "mutual_recursion",
                "--root",
                "parity.is_odd",
            ]
        )
        == 0
    )
    only = capsys.readouterr().out.strip()
    assert only.startswith("parity.is_odd")
    assert "[recursion]" in only


def test_cli_trees_missing_analysis(tmp_path, capsys):
    config = _write_config(tmp_path, _config_data(tmp_path / "out"))
    assert main(["trees", "--config", config, "--repo", "ghost"]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "StageInputMissing"


def test_cli_reports_config_errors_as_json(tmp_path, capsys):
    data = _config_data(tmp_path / "out")
    data["mix"] = {"alpha": 1.5}
    config = _write_config(tmp_path, data)
    assert main(["run", "--config", config]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err == {
        "error": "ConfigInvalid",
        "field": "mix.alpha",
        "message": err["message"],
    }
    assert "mix.alpha" in err["message"] or "[0" in err["message"]


def test_cli_mix_overrides(tmp_path, capsys):
    out = tmp_path / "out"
    config = _write_config(tmp_path, _config_data(out))
    assert (
        main(
            [
                "run",
                "--config",
                config,
                "--stages",
                "scan,analyze,filter,augment,assemble",
            ]
        )
        == 0
    )
    capsys.readouterr()
    assert (
        main(
            ["mix", "--config", config, "--alpha", "0.25", "--total", "8"]
        )
        == 0
    )
    result = json.loads(capsys.readouterr().out)
    counts = result["stages"]["mix"]["counts"]
    assert counts["math"] == math_quota(0.25, 8)
    assert counts["total"] == 8

    # an out-of-range override fails like any other config error
    assert main(["mix", "--config", config, "--alpha", "1.5"]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "AlphaOutOfRange"


def test_cli_insufficient_pool_is_reported(tmp_path, capsys):
    data = _config_data(tmp_path / "out")
    data["mix"] = {"alpha": 0.5, "seed": 7, "total": 1000}
    config = _write_config(tmp_path, data)
    assert main(["run", "--config", config]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "InsufficientSamples"
