// Audio playback abstraction. The session logic only needs "play from the
// start and tell me when it finished"; tests substitute a fake factory.

export interface StimulusPlayer {
  play(): void;
  stop(): void;
  preload(): void;
  readonly playing: boolean;
  onEnded(handler: () => void): void;
}

export type PlayerFactory = (url: string) => StimulusPlayer;

export class HtmlAudioPlayer implements StimulusPlayer {
  private readonly el: HTMLAudioElement;
  private endedHandlers: Array<() => void> = [];
  playing = false;

  constructor(url: string) {
    this.el = new Audio(url);
    this.el.preload = "none";
    this.el.addEventListener("ended", () => {
      this.playing = false;
      for (const handler of this.endedHandlers) handler();
    });
  }

  preload(): void {
    this.el.preload = "auto";
    this.el.load();
  }

  play(): void {
    this.el.currentTime = 0;
    this.playing = true;
    void this.el.play();
  }

  stop(): void {
    this.el.pause();
    this.playing = false;
  }

  onEnded(handler: () => void): void {
    this.endedHandlers.push(handler);
  }
}

export const htmlAudioFactory: PlayerFactory = (url) => new HtmlAudioPlayer(url);
