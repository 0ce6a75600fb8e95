// Wire schema for the session WebSocket (audexp.ui/1).
// Engine -> UI messages drive the whole state machine; the UI only ever
// acknowledges them or streams slider positions back.

export type EngineMessage =
	| { type: "Theme"; background_color: string; font_color: string; font_size_pt: number }
	| { type: "ShowInstructions"; text: string }
	| { type: "PresentStimulus"; url: string; label: string | null }
	| {
			type: "ShowQuestion";
			prompt: string;
			scale_min: number;
			scale_max: number;
			anchors: [string, string] | null;
	  }
	| { type: "StartContinuous"; labels: [string, string] }
	| { type: "StopContinuous" }
	| { type: "SessionDone" };

export type UiMessage =
	| { type: "Ready" }
	| { type: "StimulusEnded" }
	| { type: "Answer"; value: number }
	| { type: "Slider"; value: number }
	| { type: "Heartbeat" };

const ENGINE_TYPES = new Set([
	"Theme",
	"ShowInstructions",
	"PresentStimulus",
	"ShowQuestion",
	"StartContinuous",
	"StopContinuous",
	"SessionDone",
]);

/** Parse one engine frame; null for anything that is not ours. */
export function parseEngineMessage(data: string): EngineMessage | null {
	let obj: unknown;
	try {
		obj = JSON.parse(data);
	} catch {
		return null;
	}
	if (typeof obj !== "object" || obj === null) return null;
	const type = (obj as { type?: unknown }).type;
	if (typeof type !== "string" || !ENGINE_TYPES.has(type)) return null;
	if (type === "ShowQuestion") {
		const q = obj as { scale_min?: unknown; scale_max?: unknown };
		if (typeof q.scale_min !== "number" || typeof q.scale_max !== "number") return null;
	}
	if (type === "PresentStimulus" && typeof (obj as { url?: unknown }).url !== "string") {
		return null;
	}
	return obj as EngineMessage;
}

export function encodeUiMessage(msg: UiMessage): string {
	return JSON.stringify(msg);
}
