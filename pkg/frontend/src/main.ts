// Browser entry point: pull the session token from the page URL, open
// the WebSocket, and hand everything to the state machine.

import { htmlAudioPlayer } from "./audio.js";
import { SessionClient } from "./session.js";

function boot(): void {
	const root = document.getElementById("app");
	if (!root) throw new Error("missing #app element");
	const token = new URLSearchParams(window.location.search).get("token");
	if (!token) {
		root.textContent = "Missing ?token= in the session URL.";
		return;
	}
	const scheme = window.location.protocol === "https:" ? "wss" : "ws";
	const wsUrl = `${scheme}://${window.location.host}/session/${token}/ws`;
	const client = new SessionClient({
		connect: () => new WebSocket(wsUrl),
		playerFactory: htmlAudioPlayer,
		root,
	});
	client.start();
}

boot();
