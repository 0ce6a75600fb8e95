"""Tour of the stimulus-ordering schemes and their determinism."""

from audexp import (
    AllPairs,
    BlockedShuffle,
    FullShuffle,
    ProbabilitySelect,
    build_array,
    full_shuffle,
    interleave_baseline,
    probability_select,
)
from audexp.fixtures import demo_stimuli

stimuli = demo_stimuli()

print("full_shuffle is a pure function of (n, seed):")
for seed in (1, 2, 1):
    print(f"  seed {seed}: {full_shuffle(6, seed)}")

print("\nblocked shuffle by key, two repetitions (seed 7):")
arr = build_array(BlockedShuffle(block_field="stim_type"), stimuli, 2, 7)
for rep in range(2):
    chunk = arr.items[rep * 12 : (rep + 1) * 12]
    keys = [stimuli[i].stim_type[0] for i in chunk]
    print(f"  pass {rep + 1}: {''.join(keys)}")

print("\nno-adjacent-condition constraint (seed 3):")
constrained = BlockedShuffle(block_field="stim_type", no_adjacent_repeat_field="condition")
arr = build_array(constrained, stimuli, 1, 3)
print("  conditions:", " -> ".join(stimuli[i].condition for i in arr.items))

print("\nweighted selection, 10 draws favoring the first clip 3:1 (seed 5):")
print(" ", probability_select([3, 1], 10, True, 5))

print("\nall pairs of three clips (seed 9):")
arr = build_array(AllPairs(), stimuli[:3], 1, 9)
for a, b in arr.items:
    print(f"  {stimuli[a].title}  vs  {stimuli[b].title}")

print("\nbaseline interleaving for neurophysiological designs:")
experimental = build_array(FullShuffle(), stimuli[:4], 1, 11)
woven = interleave_baseline(experimental, baseline_index=99)
print(f"  {experimental.items} -> {woven.items}")
