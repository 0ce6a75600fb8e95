// Trailing-edge throttle: the engine samples at ~20 Hz, so the slider
// never needs to send faster than once per interval, but the final
// position of a burst must still go out.

export function throttle<T>(
	fn: (value: T) => void,
	intervalMs: number,
	now: () => number = () => Date.now(),
): (value: T) => void {
	let lastSent = -Infinity;
	let pending: { value: T } | null = null;
	let timer: ReturnType<typeof setTimeout> | null = null;

	const flush = () => {
		timer = null;
		if (pending !== null) {
			lastSent = now();
			const { value } = pending;
			pending = null;
			fn(value);
		}
	};

	return (value: T) => {
		const elapsed = now() - lastSent;
		if (elapsed >= intervalMs) {
			lastSent = now();
			fn(value);
			return;
		}
		pending = { value };
		if (timer === null) {
			timer = setTimeout(flush, intervalMs - elapsed);
		}
	};
}
