import { describe, expect, test } from "vitest";

import { encodeUiMessage, parseEngineMessage } from "../src/protocol.js";

describe("parseEngineMessage", () => {
	test("accepts every engine message type", () => {
		const frames = [
			{ type: "Theme", background_color: "101018", font_color: "F2F2F2", font_size_pt: 28 },
			{ type: "ShowInstructions", text: "hello" },
			{ type: "PresentStimulus", url: "/session/t/stim/0", label: null },
			{ type: "ShowQuestion", prompt: "ok?", scale_min: 1, scale_max: 9, anchors: null },
			{ type: "StartContinuous", labels: ["low", "high"] },
			{ type: "StopContinuous" },
			{ type: "SessionDone" },
		];
		for (const frame of frames) {
			expect(parseEngineMessage(JSON.stringify(frame))).toEqual(frame);
		}
	});

	test("rejects garbage and unknown types", () => {
		expect(parseEngineMessage("{not json")).toBeNull();
		expect(parseEngineMessage("42")).toBeNull();
		expect(parseEngineMessage(JSON.stringify({ type: "SelfDestruct" }))).toBeNull();
		expect(parseEngineMessage(JSON.stringify({ no_type: true }))).toBeNull();
	});

	test("rejects malformed questions and stimuli", () => {
		expect(
			parseEngineMessage(JSON.stringify({ type: "ShowQuestion", prompt: "x" })),
		).toBeNull();
		expect(parseEngineMessage(JSON.stringify({ type: "PresentStimulus" }))).toBeNull();
	});
});

test("encodeUiMessage produces plain JSON", () => {
	expect(JSON.parse(encodeUiMessage({ type: "Answer", value: 5 }))).toEqual({
		type: "Answer",
		value: 5,
	});
});
