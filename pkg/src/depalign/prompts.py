"""Prompt templates used for description generation and sample rendering.

The templates are frozen text: tests compare them byte-for-byte, and the
summary cache is keyed by their hashes, so any edit here deliberately
invalidates cached responses. Slots are spelled as literal ``{...}``
markers and filled with ``str.replace`` so no other brace in a template
or payload needs escaping.
"""

from __future__ import annotations

SUMMARY_PROMPT_TEMPLATE = (
    "Provide a concise description of the problem solved in the code "
    "snippet below. Format the response as a docstring.\n"
    "\n"
    "{code}"
)

MATH_PROMPT_TEMPLATE = (
    "Use the following pre-defined Lean 4 dependencies:\n"
    "{dependencies}\n"
    "\n"
    "Based on the context and the problem description, generate a single, "
    "syntactically correct Lean 4 formal statement that accurately captures "
    "the problem's meaning.\n"
    "\n"
    "Problem Description:\n"
    "{problem description}"
)

CODE_PROMPT_TEMPLATE = (
    "Use the following pre-defined functions:\n"
    "{pre-defined functions}\n"
    "\n"
    "Based on the context and the problem description, generate a "
    "syntactically correct function implementation that accurately captures "
    "the problem's meaning.\n"
    "\n"
    "Problem Description:\n"
    "{problem description}"
)


def render_summary_prompt(code: str) -> str:
    """Fill the docstring-generation template with a code snippet."""
    return SUMMARY_PROMPT_TEMPLATE.replace("{code}", code)


def render_math_prompt(dependencies: str, description: str) -> str:
    """Fill the formal-statement template."""
    return MATH_PROMPT_TEMPLATE.replace("{dependencies}", dependencies).replace(
        "{problem description}", description
    )


def render_code_prompt(functions: str, description: str) -> str:
    """Fill the function-implementation template."""
    return CODE_PROMPT_TEMPLATE.replace(
        "{pre-defined functions}", functions
    ).replace("{problem description}", description)
