// Stimulus playback behind a tiny port so tests can fake the clock-side
// of audio: the session only cares that "ended" fires exactly once.

export interface StimulusPlayer {
	play(url: string): void;
	stop(): void;
}

export type PlayerFactory = (onEnded: () => void) => StimulusPlayer;

export const htmlAudioPlayer: PlayerFactory = (onEnded) => {
	let element: HTMLAudioElement | null = null;
	return {
		play(url: string) {
			element?.pause();
			element = new Audio(url);
			element.addEventListener("ended", () => onEnded(), { once: true });
			void element.play().catch((err) => {
				console.error("stimulus playback failed", err);
			});
		},
		stop() {
			element?.pause();
			element = null;
		},
	};
};
