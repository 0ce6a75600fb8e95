import { afterEach, beforeEach, expect, test, vi } from "vitest";

import { throttle } from "../src/throttle.js";

beforeEach(() => vi.useFakeTimers());
afterEach(() => vi.useRealTimers());

test("first call passes through immediately", () => {
	const got: number[] = [];
	const push = throttle<number>((v) => got.push(v), 30);
	push(1);
	expect(got).toEqual([1]);
});

test("burst collapses to first plus trailing value", () => {
	const got: number[] = [];
	const push = throttle<number>((v) => got.push(v), 30);
	push(1);
	push(2);
	push(3);
	expect(got).toEqual([1]);
	vi.advanceTimersByTime(31);
	expect(got).toEqual([1, 3]);
});

test("sends are spaced at least the interval apart", () => {
	const sentAt: number[] = [];
	const push = throttle<number>(() => sentAt.push(Date.now()), 30);
	for (let t = 0; t < 100; t += 5) {
		push(t);
		vi.advanceTimersByTime(5);
	}
	vi.advanceTimersByTime(50);
	const gaps = sentAt.slice(1).map((t, i) => t - sentAt[i]!);
	expect(gaps.every((g) => g >= 30)).toBe(true);
});

test("slow calls are never delayed", () => {
	const got: number[] = [];
	const push = throttle<number>((v) => got.push(v), 30);
	push(1);
	vi.advanceTimersByTime(40);
	push(2);
	expect(got).toEqual([1, 2]);
});
