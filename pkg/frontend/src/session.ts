// The subject-facing session state machine. It is driven entirely by
// engine messages arriving on one WebSocket: render what the engine
// says, acknowledge with the single expected reply, never volunteer
// anything else. Transport and audio are injected so the same machine
// runs under a real browser and under tests.

import type { StimulusPlayer, PlayerFactory } from "./audio.js";
import { encodeUiMessage, parseEngineMessage, type EngineMessage } from "./protocol.js";
import { createSlider, type ContinuousSlider } from "./slider.js";

export interface WsLike {
	send(data: string): void;
	close(): void;
	addEventListener(type: string, listener: (event: any) => void): void;
}

export interface SessionOptions {
	connect: () => WsLike;
	playerFactory: PlayerFactory;
	root: HTMLElement;
	heartbeatMs?: number;
	maxReconnects?: number;
	reconnectDelayMs?: number;
	onDone?: () => void;
}

export class SessionClient {
	private ws: WsLike | null = null;
	private player: StimulusPlayer;
	private root: HTMLElement;
	private opts: Required<Pick<SessionOptions, "heartbeatMs" | "maxReconnects" | "reconnectDelayMs">> &
		SessionOptions;

	private everConnected = false;
	private reconnectsLeft: number;
	private heartbeatTimer: ReturnType<typeof setInterval> | null = null;
	private questionOpen = false;
	private currentScale: [number, number] = [0, 0];
	private slider: ContinuousSlider | null = null;
	private done = false;
	private keyHandler = (ev: KeyboardEvent) => this.onKey(ev);

	constructor(options: SessionOptions) {
		this.opts = {
			heartbeatMs: 5000,
			maxReconnects: 10,
			reconnectDelayMs: 1000,
			...options,
		};
		this.root = options.root;
		this.player = options.playerFactory(() => this.onStimulusEnded());
		this.reconnectsLeft = this.opts.maxReconnects;
	}

	start(): void {
		document.addEventListener("keydown", this.keyHandler);
		this.openSocket();
	}

	private openSocket(): void {
		const ws = this.opts.connect();
		this.ws = ws;
		ws.addEventListener("open", () => {
			this.reconnectsLeft = this.opts.maxReconnects;
			if (!this.everConnected) {
				this.everConnected = true;
				this.send({ type: "Ready" });
			}
			this.startHeartbeat();
		});
		ws.addEventListener("message", (event: { data: unknown }) => {
			const text =
				typeof event.data === "string" ? event.data : String(event.data ?? "");
			const msg = parseEngineMessage(text);
			if (msg) this.handle(msg);
		});
		ws.addEventListener("close", () => {
			this.stopHeartbeat();
			this.ws = null;
			if (this.done) return;
			if (this.reconnectsLeft > 0) {
				this.reconnectsLeft -= 1;
				this.renderStatus("Connection lost, reconnecting...");
				setTimeout(() => this.openSocket(), this.opts.reconnectDelayMs);
			} else {
				this.renderStatus("Connection lost.");
			}
		});
		ws.addEventListener("error", () => {
			// close follows; reconnect logic lives there
		});
	}

	private send(msg: Parameters<typeof encodeUiMessage>[0]): void {
		this.ws?.send(encodeUiMessage(msg));
	}

	private startHeartbeat(): void {
		this.stopHeartbeat();
		this.heartbeatTimer = setInterval(
			() => this.send({ type: "Heartbeat" }),
			this.opts.heartbeatMs,
		);
	}

	private stopHeartbeat(): void {
		if (this.heartbeatTimer !== null) {
			clearInterval(this.heartbeatTimer);
			this.heartbeatTimer = null;
		}
	}

	// -- engine message dispatch ------------------------------------------

	private handle(msg: EngineMessage): void {
		switch (msg.type) {
			case "Theme":
				this.applyTheme(msg.background_color, msg.font_color, msg.font_size_pt);
				break;
			case "ShowInstructions":
				this.renderInstructions(msg.text);
				break;
			case "PresentStimulus":
				this.renderPlaying(msg.label);
				this.player.play(msg.url);
				break;
			case "ShowQuestion":
				this.renderQuestion(msg.prompt, msg.scale_min, msg.scale_max, msg.anchors);
				break;
			case "StartContinuous":
				this.renderContinuous(msg.labels);
				break;
			case "StopContinuous":
				this.teardownContinuous();
				break;
			case "SessionDone":
				this.finish();
				break;
		}
	}

	private onStimulusEnded(): void {
		this.send({ type: "StimulusEnded" });
	}

	private commitAnswer(value: number): void {
		if (!this.questionOpen) return; // double commits are suppressed here
		const [lo, hi] = this.currentScale;
		if (value < lo || value > hi) return;
		this.questionOpen = false;
		this.send({ type: "Answer", value });
		this.renderStatus("");
	}

	private onKey(ev: KeyboardEvent): void {
		if (!this.questionOpen) return;
		if (ev.key >= "0" && ev.key <= "9") {
			this.commitAnswer(Number(ev.key)); // out-of-scale digits are ignored
		}
	}

	private finish(): void {
		this.done = true;
		this.teardownContinuous();
		this.player.stop();
		this.stopHeartbeat();
		document.removeEventListener("keydown", this.keyHandler);
		this.renderStatus("Session complete. Thank you!");
		this.ws?.close();
		this.opts.onDone?.();
	}

	// -- rendering -----------------------------------------------------------

	private applyTheme(bg: string, fg: string, sizePt: number): void {
		const style = this.root.style;
		style.backgroundColor = `#${bg}`;
		style.color = `#${fg}`;
		style.fontSize = `${sizePt}pt`;
	}

	private clear(): void {
		this.root.replaceChildren();
	}

	private renderStatus(text: string): void {
		this.clear();
		const p = document.createElement("p");
		p.className = "status";
		p.textContent = text;
		this.root.append(p);
	}

	private renderInstructions(text: string): void {
		this.clear();
		const block = document.createElement("div");
		block.className = "instructions";
		block.textContent = text;
		const go = document.createElement("button");
		go.id = "continue";
		go.textContent = "Continue";
		go.addEventListener("click", () => {
			this.send({ type: "Ready" });
			this.renderStatus("");
		});
		this.root.append(block, go);
	}

	private renderPlaying(label: string | null): void {
		this.clear();
		if (label) {
			const tag = document.createElement("div");
			tag.className = "stimulus-label";
			tag.textContent = label;
			this.root.append(tag);
		}
		const note = document.createElement("p");
		note.className = "status";
		note.textContent = "Listen...";
		this.root.append(note);
	}

	private renderQuestion(
		prompt: string,
		lo: number,
		hi: number,
		anchors: [string, string] | null,
	): void {
		this.clear();
		this.questionOpen = true;
		this.currentScale = [lo, hi];

		const q = document.createElement("p");
		q.className = "prompt";
		q.textContent = prompt;
		this.root.append(q);

		const row = document.createElement("div");
		row.className = "answer-row";
		if (anchors) {
			const left = document.createElement("span");
			left.className = "anchor";
			left.textContent = anchors[0];
			row.append(left);
		}
		for (let v = lo; v <= hi; v++) {
			const btn = document.createElement("button");
			btn.className = "answer-btn";
			btn.dataset.value = String(v);
			btn.textContent = String(v);
			btn.addEventListener("click", () => this.commitAnswer(v));
			row.append(btn);
		}
		if (anchors) {
			const right = document.createElement("span");
			right.className = "anchor";
			right.textContent = anchors[1];
			row.append(right);
		}
		this.root.append(row);
	}

	private renderContinuous(labels: [string, string]): void {
		this.teardownContinuous();
		this.slider = createSlider(labels, (value) => this.send({ type: "Slider", value }));
		this.root.append(this.slider.element);
	}

	private teardownContinuous(): void {
		this.slider?.dispose();
		this.slider = null;
	}
}
