"""Weighted interleaving of math and code samples, plus loss utilities.

The mixing weight alpha is the fraction of the stream drawn from the math
pool. The default policy hits the quota exactly: it takes the first
round(alpha * total) math samples and the first total - that code samples,
then shuffles only the order with the seed, so the multiset of chosen
samples depends on the pools and alpha alone. The bernoulli policy flips
an alpha-weighted coin per slot instead; its counts vary with the seed by
design.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, Sequence

from .caf_assembler import CafSample
from .errors import (
    AlphaOutOfRange,
    ConfigInvalid,
    InsufficientSamples,
    KOutOfRange,
    PositiveLogProb,
)

POLICIES = ("exact_quota", "bernoulli")


def _check_alpha(alpha: float) -> None:
    if not (0.0 <= alpha <= 1.0):
        raise AlphaOutOfRange(f"alpha must lie in [0, 1], got {alpha!r}")


@dataclass(frozen=True)
class MixConfig:
    alpha: float
    seed: int
    total: int
    policy: str = "exact_quota"

    def __post_init__(self) -> None:
        _check_alpha(self.alpha)
        if self.total < 0:
            raise ConfigInvalid("mix.total", "must be non-negative")
        if self.policy not in POLICIES:
            raise ConfigInvalid(
                "mix.policy", f"unknown policy '{self.policy}'"
            )


def math_quota(alpha: float, total: int) -> int:
    """round(alpha * total) computed exactly, half-to-even.

    The decimal the caller wrote is honoured via ``Fraction(str(alpha))``,
    so 0.25 * 6 rounds as 3/2 and not as a float artifact near 1.5.
    """
    _check_alpha(alpha)
    return int(round(Fraction(str(alpha)) * total))


def mix_stream(
    math_pool: Sequence[CafSample],
    code_pool: Sequence[CafSample],
    config: MixConfig,
) -> list[CafSample]:
    """Draw ``config.total`` samples without replacement from the two pools.

    Every emitted sample is tagged with the alpha it was mixed under. A
    pool too small for its share raises :class:`InsufficientSamples`.
    """
    rng = random.Random(config.seed)
    if config.policy == "exact_quota":
        n_math = math_quota(config.alpha, config.total)
        n_code = config.total - n_math
        if n_math > len(math_pool):
            raise InsufficientSamples(
                f"need {n_math} math samples, pool holds {len(math_pool)}"
            )
        if n_code > len(code_pool):
            raise InsufficientSamples(
                f"need {n_code} code samples, pool holds {len(code_pool)}"
            )
        chosen = [
            replace(s, alpha_tag=config.alpha)
            for s in list(math_pool[:n_math]) + list(code_pool[:n_code])
        ]
        rng.shuffle(chosen)
        return chosen

    out: list[CafSample] = []
    next_math = 0
    next_code = 0
    for _ in range(config.total):
        if rng.random() < config.alpha:
            if next_math >= len(math_pool):
                raise InsufficientSamples(
                    f"math pool exhausted after {next_math} draws"
                )
            sample = math_pool[next_math]
            next_math += 1
        else:
            if next_code >= len(code_pool):
                raise InsufficientSamples(
                    f"code pool exhausted after {next_code} draws"
                )
            sample = code_pool[next_code]
            next_code += 1
        out.append(replace(sample, alpha_tag=config.alpha))
    return out


def mixed_loss(math_loss: float, caf_loss: float, alpha: float) -> float:
    """alpha-weighted convex combination of the two loss terms."""
    _check_alpha(alpha)
    return alpha * math_loss + (1.0 - alpha) * caf_loss


def nll(log_probs: Iterable[float]) -> float:
    """Negative sum of per-token log-probabilities; empty input scores 0.

    Entries must be non-positive: a log-probability above zero means the
    caller passed probabilities, not logs.
    """
    entries = list(log_probs)
    for value in entries:
        if value > 0.0:
            raise PositiveLogProb(
                f"log-probability {value!r} is greater than zero"
            )
    total = math.fsum(entries)
    return 0.0 if total == 0.0 else -total


def pass_at_k(outcomes: Sequence[bool], k: int) -> bool:
    """Did any of the first k attempts succeed?"""
    if k < 1 or k > len(outcomes):
        raise KOutOfRange(
            f"k={k} outside [1, {len(outcomes)}] attempts"
        )
    return any(outcomes[:k])
