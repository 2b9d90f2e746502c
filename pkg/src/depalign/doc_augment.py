"""Descriptions for root functions, and generation of the missing ones.

Order of preference: the function's own docstring, then a README section
headed by the function's name, then a cached or freshly generated summary.
Generated text is produced by an HTTP endpoint speaking the usual chat
completion shape; every response is cached on disk keyed by the prompt
template hash and the code hash, so re-runs are free and a cache-only mode
can run with no network at all.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping, Optional

import requests

from .ast_ingest import FunctionRecord
from .errors import CacheMiss, EmptyResponse, ServiceUnavailable
from .fsutil import atomic_write_text, sha256_text, stable_json
from .prompts import SUMMARY_PROMPT_TEMPLATE, render_summary_prompt


@dataclass(frozen=True)
class QualityPolicy:
    """What counts as a usable description.

    ``interface_tags`` are line-start markers of parameter/return
    boilerplate; when at least ``interface_line_ratio`` of the non-empty
    lines look like that, the text explains the signature rather than the
    problem.
    """

    min_words: int = 5
    interface_line_ratio: float = 0.5
    interface_tags: tuple[str, ...] = (
        ":param",
        ":return",
        ":returns",
        ":rtype",
        ":raises",
        ":type",
        ":arg",
        "@param",
        "@return",
        "@returns",
        "@throws",
        "@raise",
        "args:",
        "arguments:",
        "keyword arguments:",
        "returns:",
        "return:",
        "raises:",
        "yields:",
        "parameters",
        "----",
    )


DEFAULT_QUALITY_POLICY = QualityPolicy()

_FIELD_LINE = re.compile(r"^\w+(\s*\([^)]*\))?\s*:(\s|$)")


@dataclass(frozen=True)
class DescriptionRecord:
    function_id: str
    text: str
    origin: str
    quality_flags: frozenset[str]
    prompt_hash: Optional[str] = None


def evaluate_quality(text: str, policy: QualityPolicy) -> frozenset[str]:
    flags: set[str] = set()
    if len(text.split()) < policy.min_words:
        flags.add("too_short")
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if lines:
        tagged = sum(1 for ln in lines if _looks_like_interface(ln, policy))
        if tagged / len(lines) >= policy.interface_line_ratio:
            flags.add("interface_only")
    return frozenset(flags)


def _looks_like_interface(line: str, policy: QualityPolicy) -> bool:
    lowered = line.lower()
    if lowered.startswith(policy.interface_tags):
        return True
    return bool(_FIELD_LINE.match(line))


def needs_augmentation(
    desc: Optional[DescriptionRecord], policy: QualityPolicy
) -> bool:
    """Recomputed from the text itself; stored flags are not trusted."""
    if desc is None or not desc.text.strip():
        return True
    return bool(evaluate_quality(desc.text, policy))


_HEADING = re.compile(r"^(#{1,6})\s+(.*?)\s*#*\s*$")


def _readme_sections(text: str) -> Iterator[tuple[str, str]]:
    heading: Optional[str] = None
    body: list[str] = []
    for line in text.splitlines():
        match = _HEADING.match(line)
        if match:
            if heading is not None:
                yield heading, "\n".join(body).strip()
            heading = match.group(2)
            body = []
        elif heading is not None:
            body.append(line)
    if heading is not None:
        yield heading, "\n".join(body).strip()


def readme_section_for(name: str, readme_text: str) -> Optional[str]:
    """The first non-empty section whose heading names the function exactly.

    The match is word-boundary exact, so ``run`` does not match a section
    about ``dry_run``.
    """
    pattern = re.compile(
        rf"(?<![A-Za-z0-9_]){re.escape(name)}(?![A-Za-z0-9_])"
    )
    for heading, body in _readme_sections(readme_text):
        if pattern.search(heading) and body:
            return body
    return None


def extract_description(
    fn: FunctionRecord,
    readmes: Mapping[str, str],
    policy: QualityPolicy = DEFAULT_QUALITY_POLICY,
) -> Optional[DescriptionRecord]:
    """Docstring first, then README sections in sorted path order."""
    if fn.docstring and fn.docstring.strip():
        text = fn.docstring
        return DescriptionRecord(
            function_id=fn.qualified_name,
            text=text,
            origin="docstring",
            quality_flags=evaluate_quality(text, policy),
        )
    for _, readme_text in sorted(readmes.items()):
        section = readme_section_for(fn.name, readme_text)
        if section:
            return DescriptionRecord(
                function_id=fn.qualified_name,
                text=section,
                origin="readme",
                quality_flags=evaluate_quality(section, policy),
            )
    return None


@dataclass(frozen=True)
class SummarizerConfig:
    mode: str = "cache_only"
    endpoint: str = ""
    model: str = ""
    temperature: float = 0.0
    timeout_s: float = 30.0
    max_retries: int = 3
    backoff_s: float = 0.5
    cache_dir: str = "summary_cache"
    api_key_env: str = "SUMMARY_API_KEY"
    max_in_flight: int = 4
    min_interval_s: float = 0.0


class SummaryCache:
    """One JSON file per (template, code) pair, written atomically."""

    def __init__(self, root: Path | str) -> None:
        self.root = Path(root)

    def _path(self, template_hash: str, code_hash: str) -> Path:
        return self.root / f"{template_hash[:16]}-{code_hash}.json"

    def get(self, template_hash: str, code_hash: str) -> Optional[dict]:
        path = self._path(template_hash, code_hash)
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except (OSError, ValueError):
            return None

    def put(self, template_hash: str, code_hash: str, payload: dict) -> None:
        atomic_write_text(
            self._path(template_hash, code_hash), stable_json(payload) + "\n"
        )


class SummaryClient:
    """Summarisation endpoint client: cached, throttled, retried.

    A ``requests``-compatible session can be injected for tests; nothing
    here touches the network when the cache answers.
    """

    def __init__(
        self,
        config: SummarizerConfig,
        session: Optional[requests.Session] = None,
        cache: Optional[SummaryCache] = None,
    ) -> None:
        self.config = config
        self._session = session if session is not None else requests.Session()
        self._cache = cache if cache is not None else SummaryCache(config.cache_dir)
        self._gate = threading.Semaphore(max(1, config.max_in_flight))
        self._pace_lock = threading.Lock()
        self._last_request = 0.0
        self.template_hash = sha256_text(SUMMARY_PROMPT_TEMPLATE)

    def summarize(self, code: str) -> dict:
        """Return the cached or fresh summary payload for a code snippet."""
        code_hash = sha256_text(code)
        cached = self._cache.get(self.template_hash, code_hash)
        if cached is not None:
            return cached
        if self.config.mode == "cache_only":
            raise CacheMiss(
                f"no cached summary for code hash {code_hash[:12]} and"
                " mode is cache_only"
            )
        prompt = render_summary_prompt(code)
        text = self._request(prompt)
        if not text.strip():
            raise EmptyResponse("summary endpoint returned blank text")
        payload = {
            "response": text,
            "prompt": prompt,
            "prompt_hash": sha256_text(prompt),
            "prompt_template_hash": self.template_hash,
            "code_hash": code_hash,
            "model": self.config.model,
        }
        self._cache.put(self.template_hash, code_hash, payload)
        return payload

    def _throttle(self) -> None:
        if self.config.min_interval_s <= 0:
            return
        with self._pace_lock:
            wait = self._last_request + self.config.min_interval_s - time.monotonic()
            if wait > 0:
                time.sleep(wait)
            self._last_request = time.monotonic()

    def _request(self, prompt: str) -> str:
        headers = {}
        api_key = os.environ.get(self.config.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        body = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
        }
        last_error = "no attempt made"
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                time.sleep(min(8.0, self.config.backoff_s * (2 ** (attempt - 1))))
            self._throttle()
            try:
                with self._gate:
                    response = self._session.post(
                        self.config.endpoint,
                        json=body,
                        timeout=self.config.timeout_s,
                        headers=headers,
                    )
            except requests.RequestException as exc:
                last_error = str(exc)
                continue
            if response.status_code == 200:
                try:
                    data = response.json()
                except ValueError:
                    last_error = "response body is not JSON"
                    continue
                text = _completion_text(data)
                if text is None:
                    raise EmptyResponse(
                        "summary response carries no completion text"
                    )
                return text
            if response.status_code == 429 or response.status_code >= 500:
                last_error = f"status {response.status_code}"
                continue
            raise ServiceUnavailable(
                f"summary endpoint rejected the request:"
                f" status {response.status_code}"
            )
        raise ServiceUnavailable(
            f"summary endpoint unreachable after"
            f" {self.config.max_retries + 1} attempts ({last_error})"
        )


def _completion_text(data: object) -> Optional[str]:
    if not isinstance(data, dict):
        return None
    choices = data.get("choices")
    if isinstance(choices, list) and choices:
        first = choices[0]
        if isinstance(first, dict):
            message = first.get("message")
            if isinstance(message, dict) and isinstance(
                message.get("content"), str
            ):
                return message["content"]
            if isinstance(first.get("text"), str):
                return first["text"]
    if isinstance(data.get("content"), str):
        return data["content"]
    return None


def summarize_function(
    code: str,
    client: SummaryClient,
    function_id: str = "",
    policy: QualityPolicy = DEFAULT_QUALITY_POLICY,
) -> DescriptionRecord:
    """Summarise one function body into a generated description record."""
    payload = client.summarize(code)
    text = payload["response"]
    return DescriptionRecord(
        function_id=function_id,
        text=text,
        origin="generated",
        quality_flags=evaluate_quality(text, policy),
        prompt_hash=payload.get("prompt_hash"),
    )


def description_to_dict(desc: DescriptionRecord) -> dict:
    return {
        "function_id": desc.function_id,
        "text": desc.text,
        "origin": desc.origin,
        "quality_flags": sorted(desc.quality_flags),
        "prompt_hash": desc.prompt_hash,
    }


def description_from_dict(payload: dict) -> DescriptionRecord:
    return DescriptionRecord(
        function_id=payload["function_id"],
        text=payload["text"],
        origin=payload["origin"],
        quality_flags=frozenset(payload["quality_flags"]),
        prompt_hash=payload.get("prompt_hash"),
    )
