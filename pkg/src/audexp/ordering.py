"""Deterministic construction of stimulus presentation orderings.

Every scheme is a pure function of (scheme, stimulus list, repetitions,
seed): repetition r draws from a child seed derived from (seed, r), and
constrained shuffles retry on child seeds derived from the repetition
seed, so the whole array replays identically across processes and
languages implementing the same generator (see rng).

Baseline-flagged stimuli never enter the candidate pool; they are
structural and get woven in afterwards by interleave_baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, permutations
from typing import Sequence, Union

from .rng import SplitMix64, derive_seed, shuffled

MAX_CONSTRAINT_ATTEMPTS = 10_000

BLOCK_FIELDS = ("stim_type", "condition")


class SchemeIncompatible(Exception):
    """The scheme cannot be applied to this stimulus list."""


class InfeasibleConstraint(Exception):
    """No ordering satisfying the adjacency constraint was found."""


class AllZeroWeights(Exception):
    """Probability selection has no remaining positive weight."""


class NoBaselineStimulus(Exception):
    """interleave_baseline was given an index not flagged as baseline."""


@dataclass(frozen=True)
class FixedOrder:
    kind: str = field(default="fixed_order", init=False)


@dataclass(frozen=True)
class FullShuffle:
    kind: str = field(default="full_shuffle", init=False)


@dataclass(frozen=True)
class BlockedShuffle:
    """Contiguous blocks grouped by one stimulus field.

    block_field is "stim_type" or "condition".  Within each repetition the
    block order and the items inside each block may be shuffled; when
    no_adjacent_repeat_field is set, draws are retried until no two
    consecutive trials (including across repetition boundaries) share that
    field's value.
    """

    block_field: str
    shuffle_within: bool = True
    shuffle_blocks: bool = True
    no_adjacent_repeat_field: str | None = None
    kind: str = field(default="blocked_shuffle", init=False)


@dataclass(frozen=True)
class ProbabilitySelect:
    """Weighted draws from the stimulus list.

    weights align one-to-one with the spec's stimulus list; entries for
    baseline stimuli are ignored.  Without replacement, chosen stimuli are
    removed before the next draw.
    """

    weights: tuple[float, ...]
    draws: int
    replacement: bool = True
    kind: str = field(default="probability_select", init=False)


@dataclass(frozen=True)
class AllPairs:
    """Every pair of stimuli, for comparison studies.

    ordered=True enumerates both directions of each pair; otherwise each
    unordered pair appears once, with its presentation direction decided
    by a seeded coin flip.
    """

    ordered: bool = False
    kind: str = field(default="all_pairs", init=False)


RandomizationScheme = Union[FixedOrder, FullShuffle, BlockedShuffle, ProbabilitySelect, AllPairs]

Trial = Union[int, tuple[int, int]]


@dataclass(frozen=True)
class StimulusArray:
    """Resolved presentation ordering: single indices or ordered pairs."""

    items: tuple[Trial, ...]
    seed: int


def full_shuffle(n: int, seed: int) -> list[int]:
    """Seeded uniform permutation of 0..n-1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return shuffled(list(range(n)), SplitMix64(seed))


def probability_select(
    weights: Sequence[float], draws: int, replacement: bool, seed: int
) -> list[int]:
    """Weighted index sampling.

    With replacement each draw follows the weights normalized to 1;
    without replacement the chosen index's weight is removed before the
    next draw (sequential weighted sampling).
    """
    if any(w < 0 for w in weights):
        raise ValueError("weights must be non-negative")
    if draws < 1:
        raise ValueError("draws must be >= 1")
    if not replacement and draws > len(weights):
        raise SchemeIncompatible(
            f"cannot draw {draws} from {len(weights)} stimuli without replacement"
        )
    remaining = list(weights)
    rng = SplitMix64(seed)
    chosen: list[int] = []
    for _ in range(draws):
        total = sum(remaining)
        if total <= 0:
            raise AllZeroWeights("no positive weight remains to draw from")
        r = rng.unit() * total
        acc = 0.0
        pick = len(remaining) - 1
        for i, w in enumerate(remaining):
            acc += w
            if r < acc:
                pick = i
                break
        chosen.append(pick)
        if not replacement:
            remaining[pick] = 0.0
    return chosen


def interleave_baseline(array: StimulusArray, baseline_index: int) -> StimulusArray:
    """Weave the baseline stimulus in before every trial.

    Output length is twice the input; even positions are the baseline,
    odd positions preserve the input order.
    """
    if baseline_index < 0:
        raise NoBaselineStimulus("baseline index must be a valid stimulus index")
    woven: list[Trial] = []
    for item in array.items:
        woven.append(baseline_index)
        woven.append(item)
    return StimulusArray(items=tuple(woven), seed=array.seed)


def build_array(
    scheme: RandomizationScheme,
    stimuli: Sequence,
    repetitions: int,
    seed: int,
) -> StimulusArray:
    """Build the full presentation ordering for one session.

    ``stimuli`` is the spec's stimulus list (objects carrying .baseline,
    .stim_type and .condition); indices in the result refer to positions
    in that list.  Repetition r is an independent draw from
    derive_seed(seed, r), concatenated in order.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    pool = [i for i, s in enumerate(stimuli) if not getattr(s, "baseline", False)]
    if not pool:
        raise SchemeIncompatible("no non-baseline stimuli to order")

    items: list[Trial] = []
    for rep in range(repetitions):
        rep_seed = derive_seed(seed, rep)
        if isinstance(scheme, FixedOrder):
            items.extend(pool)
        elif isinstance(scheme, FullShuffle):
            items.extend(shuffled(pool, SplitMix64(rep_seed)))
        elif isinstance(scheme, BlockedShuffle):
            prev = items[-1] if items else None
            items.extend(_blocked_shuffle(scheme, stimuli, pool, rep_seed, prev))
        elif isinstance(scheme, ProbabilitySelect):
            items.extend(_probability_trials(scheme, pool, rep_seed))
        elif isinstance(scheme, AllPairs):
            items.extend(_all_pairs(scheme, pool, rep_seed))
        else:
            raise SchemeIncompatible(f"unknown scheme {scheme!r}")
    return StimulusArray(items=tuple(items), seed=seed)


def _field_value(stimuli: Sequence, index: int, field_name: str) -> str:
    if field_name not in BLOCK_FIELDS:
        raise SchemeIncompatible(f"unknown block field {field_name!r}")
    return getattr(stimuli[index], field_name)


def _blocked_shuffle(
    scheme: BlockedShuffle,
    stimuli: Sequence,
    pool: list[int],
    rep_seed: int,
    prev_item: Trial | None,
) -> list[int]:
    blocks: dict[str, list[int]] = {}
    for i in pool:
        blocks.setdefault(_field_value(stimuli, i, scheme.block_field), []).append(i)

    constraint = scheme.no_adjacent_repeat_field
    attempts = MAX_CONSTRAINT_ATTEMPTS if constraint else 1
    for attempt in range(attempts):
        rng = SplitMix64(derive_seed(rep_seed, attempt))
        order = list(blocks.values())
        if scheme.shuffle_blocks:
            order = shuffled(order, rng)
        drawn: list[int] = []
        for block in order:
            drawn.extend(shuffled(block, rng) if scheme.shuffle_within else block)
        if not constraint or _adjacency_ok(drawn, stimuli, constraint, prev_item):
            return drawn
    raise InfeasibleConstraint(
        f"no ordering without adjacent {constraint!r} repeats found in "
        f"{MAX_CONSTRAINT_ATTEMPTS} attempts"
    )


def _adjacency_ok(
    drawn: list[int], stimuli: Sequence, field_name: str, prev_item: Trial | None
) -> bool:
    values = [_field_value(stimuli, i, field_name) for i in drawn]
    if prev_item is not None and isinstance(prev_item, int):
        if values and _field_value(stimuli, prev_item, field_name) == values[0]:
            return False
    return all(a != b for a, b in zip(values, values[1:]))


def _probability_trials(scheme: ProbabilitySelect, pool: list[int], rep_seed: int) -> list[int]:
    weights = [scheme.weights[i] for i in pool]
    if not scheme.replacement and scheme.draws > len(pool):
        raise SchemeIncompatible(
            f"cannot draw {scheme.draws} from {len(pool)} stimuli without replacement"
        )
    picks = probability_select(weights, scheme.draws, scheme.replacement, rep_seed)
    return [pool[p] for p in picks]


def _all_pairs(scheme: AllPairs, pool: list[int], rep_seed: int) -> list[tuple[int, int]]:
    if len(pool) < 2:
        raise SchemeIncompatible("pair construction needs at least 2 stimuli")
    rng = SplitMix64(rep_seed)
    if scheme.ordered:
        pairs = list(permutations(pool, 2))
        return shuffled(pairs, rng)
    pairs = shuffled(list(combinations(pool, 2)), rng)
    return [(b, a) if rng.below(2) else (a, b) for a, b in pairs]
