from __future__ import annotations

import math
from itertools import permutations

import pytest

from audexp.fixtures import demo_stimuli
from audexp.ordering import (
    AllPairs,
    AllZeroWeights,
    BlockedShuffle,
    FixedOrder,
    FullShuffle,
    InfeasibleConstraint,
    ProbabilitySelect,
    SchemeIncompatible,
    StimulusArray,
    build_array,
    full_shuffle,
    interleave_baseline,
    probability_select,
)
from audexp.specfile import StimulusEntry


def entry(i: int, stim_type: str = "t", condition: str = "c", baseline: bool = False):
    return StimulusEntry(
        file=f"s{i}.wav", title=f"s{i}", artist="x", stim_type=stim_type,
        condition=condition, baseline=baseline,
    )


class TestFullShuffle:
    def test_single_element_is_identity(self):
        assert full_shuffle(1, 12345) == [0]

    def test_golden_values_for_fixed_seeds(self):
        # Frozen from the documented generator at first implementation.
        assert full_shuffle(4, 1) == [2, 0, 3, 1]
        assert full_shuffle(4, 2) == [0, 1, 3, 2]
        assert full_shuffle(8, 99) == [6, 4, 5, 0, 2, 1, 7, 3]

    def test_always_a_permutation(self):
        for seed in range(50):
            assert sorted(full_shuffle(7, seed)) == list(range(7))

    def test_zero_elements_rejected(self):
        with pytest.raises(ValueError):
            full_shuffle(0, 1)

    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_support_covers_all_permutations(self, n):
        # Brute-force equivalence: every one of the n! orderings shows up.
        want = {p for p in permutations(range(n))}
        seen = set()
        for seed in range(40 * math.factorial(n)):
            seen.add(tuple(full_shuffle(n, seed)))
            if seen == want:
                break
        assert seen == want


class TestProbabilitySelect:
    def test_degenerate_weight_always_picks_it(self):
        assert probability_select([1, 0, 0], 3, True, 42) == [0, 0, 0]

    def test_exhaustion_without_replacement(self):
        for seed in range(20):
            assert sorted(probability_select([1, 1], 2, False, seed)) == [0, 1]

    def test_law_of_large_numbers(self):
        picks = probability_select([3, 1], 10_000, True, 7)
        freq = picks.count(0) / len(picks)
        assert abs(freq - 0.75) <= 0.02

    def test_all_zero_weights_rejected(self):
        with pytest.raises(AllZeroWeights):
            probability_select([0, 0], 1, True, 1)

    def test_weight_exhaustion_mid_draw(self):
        with pytest.raises(AllZeroWeights):
            probability_select([1, 0], 2, False, 1)

    def test_too_many_draws_without_replacement(self):
        with pytest.raises(SchemeIncompatible):
            probability_select([1, 1], 3, False, 1)

    def test_negative_weights_rejected(self):
        with pytest.raises(ValueError):
            probability_select([1, -1], 1, True, 1)


class TestInterleaveBaseline:
    def test_weaves_before_every_item(self):
        arr = StimulusArray(items=(2, 0, 1), seed=9)
        woven = interleave_baseline(arr, 3)
        assert woven.items == (3, 2, 3, 0, 3, 1)

    def test_empty_array_stays_empty(self):
        arr = StimulusArray(items=(), seed=9)
        assert interleave_baseline(arr, 0).items == ()

    def test_stripping_even_positions_recovers_input(self):
        for seed in range(20):
            base = tuple(full_shuffle(6, seed))
            woven = interleave_baseline(StimulusArray(items=base, seed=seed), 6)
            assert woven.items[1::2] == base
            assert all(x == 6 for x in woven.items[0::2])


class TestBuildArray:
    def test_single_stimulus_full_shuffle(self):
        arr = build_array(FullShuffle(), [entry(0)], 1, 999)
        assert arr.items == (0,)

    def test_determinism_across_calls(self):
        stimuli = demo_stimuli()
        scheme = BlockedShuffle(block_field="stim_type")
        a = build_array(scheme, stimuli, 3, 77)
        b = build_array(scheme, stimuli, 3, 77)
        assert a == b
        assert a != build_array(scheme, stimuli, 3, 78)

    def test_blocked_shuffle_demo_structure(self):
        # 12 stimuli, 3 keys x 4 conditions: blocks of 4, each covering
        # all four conditions of one key.
        stimuli = demo_stimuli()
        for seed in range(30):
            arr = build_array(BlockedShuffle(block_field="stim_type"), stimuli, 1, seed)
            assert len(arr.items) == 12
            for b in range(3):
                block = arr.items[b * 4 : (b + 1) * 4]
                keys = {stimuli[i].stim_type for i in block}
                conditions = {stimuli[i].condition for i in block}
                assert len(keys) == 1
                assert conditions == {"dominant", "flatII", "silence", "tonic"}

    def test_block_values_form_single_runs(self):
        stimuli = demo_stimuli()
        for seed in range(20):
            arr = build_array(BlockedShuffle(block_field="condition"), stimuli, 1, seed)
            values = [stimuli[i].condition for i in arr.items]
            runs = [v for k, v in enumerate(values) if k == 0 or values[k - 1] != v]
            assert len(runs) == len(set(values))

    def test_repetitions_cover_every_stimulus_r_times(self):
        stimuli = demo_stimuli()
        for scheme in (FullShuffle(), BlockedShuffle(block_field="stim_type"), FixedOrder()):
            arr = build_array(scheme, stimuli, 3, 5)
            assert len(arr.items) == 36
            for i in range(12):
                assert arr.items.count(i) == 3

    def test_repetitions_differ_between_passes(self):
        stimuli = demo_stimuli()
        arr = build_array(FullShuffle(), stimuli, 2, 5)
        assert arr.items[:12] != arr.items[12:]

    def test_baseline_excluded_from_pool(self):
        stimuli = [entry(0), entry(1, baseline=True), entry(2)]
        arr = build_array(FullShuffle(), stimuli, 4, 3)
        assert 1 not in arr.items
        assert sorted(set(arr.items)) == [0, 2]

    def test_no_adjacent_repeat_holds_across_many_seeds(self):
        stimuli = demo_stimuli()
        scheme = BlockedShuffle(
            block_field="stim_type", no_adjacent_repeat_field="condition"
        )
        for seed in range(1000):
            arr = build_array(scheme, stimuli, 2, seed)
            conditions = [stimuli[i].condition for i in arr.items]
            assert all(a != b for a, b in zip(conditions, conditions[1:])), seed

    def test_infeasible_constraint_raises(self):
        # Two stimuli of one type in one block: some adjacent pair always
        # shares the type.
        stimuli = [entry(0, "a", "x"), entry(1, "a", "y")]
        scheme = BlockedShuffle(block_field="stim_type", no_adjacent_repeat_field="stim_type")
        with pytest.raises(InfeasibleConstraint):
            build_array(scheme, stimuli, 1, 1)

    def test_all_pairs_unordered_enumerates_each_pair_once(self):
        stimuli = [entry(i) for i in range(3)]
        arr = build_array(AllPairs(ordered=False), stimuli, 1, 11)
        assert len(arr.items) == 3  # C(3,2) by hand
        assert {frozenset(p) for p in arr.items} == {
            frozenset({0, 1}), frozenset({0, 2}), frozenset({1, 2})
        }
        assert all(a != b for a, b in arr.items)

    def test_all_pairs_ordered_enumerates_both_directions(self):
        stimuli = [entry(i) for i in range(3)]
        arr = build_array(AllPairs(ordered=True), stimuli, 1, 11)
        assert sorted(arr.items) == sorted(
            [(a, b) for a in range(3) for b in range(3) if a != b]
        )

    def test_all_pairs_needs_two_stimuli(self):
        with pytest.raises(SchemeIncompatible):
            build_array(AllPairs(), [entry(0)], 1, 1)

    def test_probability_scheme_respects_baseline_pool(self):
        stimuli = [entry(0), entry(1, baseline=True), entry(2)]
        scheme = ProbabilitySelect(weights=(0.0, 100.0, 1.0), draws=5, replacement=True)
        arr = build_array(scheme, stimuli, 1, 3)
        # weight on the baseline entry is ignored; only index 2 can win
        assert set(arr.items) == {2}

    def test_empty_pool_rejected(self):
        with pytest.raises(SchemeIncompatible):
            build_array(FullShuffle(), [entry(0, baseline=True)], 1, 1)
