"""depalign: dependency-aware corpus engineering for code autoformalisation.

The toolchain decomposes source repositories into (description, main
function, dependency functions) triples by static call analysis, filters
repositories by the shape of their dependency trees, assembles aligned
training samples, and interleaves them with formalisation samples at a
configurable mixing weight.
"""

from .ast_ingest import (
    CallSite,
    Diagnostic,
    FileAnalysis,
    FunctionRecord,
    GrammarAdapter,
    ObjectAssignment,
    PythonAstAdapter,
    module_path_for,
    parse_file,
    resolve_callee,
)
from .caf_assembler import (
    CafSample,
    DatasetManifest,
    FormalStatementRecord,
    assemble_code_sample,
    assemble_math_sample,
    load_formal_records,
    read_dataset,
    render_prompt,
    write_dataset,
)
from .corpus_filter import (
    BinSpec,
    FilterDecision,
    FilterPolicy,
    RepoMetrics,
    SplitTokenizer,
    count_tokens,
    filter_repo,
    get_tokenizer,
    histogram,
    level_width,
    max_siblings,
    repo_metrics,
    tree_depth,
)
from .depgraph import (
    DependencyGraph,
    DependencyTree,
    build_call_tree,
    build_project_graph,
    enumerate_roots,
    function_table,
    render_tree_text,
    strongly_connected_components,
    topological_order,
)
from .doc_augment import (
    DescriptionRecord,
    QualityPolicy,
    SummarizerConfig,
    SummaryCache,
    SummaryClient,
    evaluate_quality,
    extract_description,
    needs_augmentation,
    readme_section_for,
    summarize_function,
)
from .prompts import (
    CODE_PROMPT_TEMPLATE,
    MATH_PROMPT_TEMPLATE,
    SUMMARY_PROMPT_TEMPLATE,
    render_code_prompt,
    render_math_prompt,
    render_summary_prompt,
)
from .mix_sampler import (
    MixConfig,
    math_quota,
    mix_stream,
    mixed_loss,
    nll,
    pass_at_k,
)
from .pipeline import (
    AssembleOptions,
    RunConfig,
    RunManifest,
    TOOL_VERSION,
    load_config,
    run_pipeline,
    validate_config,
)

__version__ = TOOL_VERSION

__all__ = [
    "AssembleOptions",
    "BinSpec",
    "CafSample",
    "CallSite",
    "DatasetManifest",
    "DependencyGraph",
    "DependencyTree",
    "DescriptionRecord",
    "Diagnostic",
    "FileAnalysis",
    "FilterDecision",
    "FilterPolicy",
    "FormalStatementRecord",
    "FunctionRecord",
    "GrammarAdapter",
    "MixConfig",
    "ObjectAssignment",
    "PythonAstAdapter",
    "QualityPolicy",
    "RepoMetrics",
    "RunConfig",
    "RunManifest",
    "SplitTokenizer",
    "SummarizerConfig",
    "SummaryCache",
    "SummaryClient",
    "TOOL_VERSION",
    "assemble_code_sample",
    "assemble_math_sample",
    "build_call_tree",
    "build_project_graph",
    "count_tokens",
    "enumerate_roots",
    "evaluate_quality",
    "extract_description",
    "filter_repo",
    "function_table",
    "get_tokenizer",
    "histogram",
    "level_width",
    "load_config",
    "load_formal_records",
    "math_quota",
    "max_siblings",
    "mix_stream",
    "mixed_loss",
    "module_path_for",
    "needs_augmentation",
    "readme_section_for",
    "nll",
    "parse_file",
    "pass_at_k",
    "read_dataset",
    "render_prompt",
    "render_code_prompt",
    "render_math_prompt",
    "render_summary_prompt",
    "CODE_PROMPT_TEMPLATE",
    "MATH_PROMPT_TEMPLATE",
    "SUMMARY_PROMPT_TEMPLATE",
    "render_tree_text",
    "repo_metrics",
    "resolve_callee",
    "run_pipeline",
    "strongly_connected_components",
    "summarize_function",
    "topological_order",
    "tree_depth",
    "validate_config",
    "write_dataset",
]
