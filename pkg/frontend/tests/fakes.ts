// Test doubles: an audio player driven by explicit finish() calls and a
// player factory that records every instance it hands out.

import { PlayerFactory, StimulusPlayer } from "../src/audio.js";

export class FakePlayer implements StimulusPlayer {
  playing = false;
  preloaded = false;
  playCount = 0;
  private handlers: Array<() => void> = [];

  constructor(readonly url: string) {}

  play(): void {
    this.playing = true;
    this.playCount += 1;
  }

  stop(): void {
    this.playing = false;
  }

  preload(): void {
    this.preloaded = true;
  }

  onEnded(handler: () => void): void {
    this.handlers.push(handler);
  }

  finish(): void {
    this.playing = false;
    for (const handler of this.handlers) handler();
  }
}

export class FakePlayerFactory {
  players: FakePlayer[] = [];

  factory: PlayerFactory = (url: string) => {
    const player = new FakePlayer(url);
    this.players.push(player);
    return player;
  };

  byUrl(fragment: string): FakePlayer[] {
    return this.players.filter((p) => p.url.includes(fragment));
  }
}
