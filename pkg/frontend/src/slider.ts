// The continuous-rating slider. The UI pushes positions (throttled); the
// engine owns the actual 20 Hz sampling, so missing intermediate values
// here costs nothing.

import { throttle } from "./throttle.js";

export const SLIDER_MIN_SEND_SPACING_MS = 30;

export interface ContinuousSlider {
	element: HTMLElement;
	dispose(): void;
}

export function createSlider(
	labels: [string, string],
	onValue: (value: number) => void,
): ContinuousSlider {
	const wrap = document.createElement("div");
	wrap.className = "slider-wrap";

	const left = document.createElement("span");
	left.className = "slider-label";
	left.textContent = labels[0];

	const input = document.createElement("input");
	input.type = "range";
	input.id = "slider";
	input.min = "0";
	input.max = "1000";
	input.value = "500";

	const right = document.createElement("span");
	right.className = "slider-label";
	right.textContent = labels[1];

	let active = true;
	const push = throttle<number>((v) => {
		if (active) onValue(v);
	}, SLIDER_MIN_SEND_SPACING_MS);

	input.addEventListener("input", () => {
		push(Number(input.value) / 1000);
	});

	wrap.append(left, input, right);
	return {
		element: wrap,
		dispose() {
			active = false;
			wrap.remove();
		},
	};
}
