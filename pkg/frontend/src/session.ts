// Session state machine: fetch trials in order, gate responses on full
// playback of every stimulus, submit, advance. The server stays the source
// of truth for progress, so reconstructing this object (a page refresh)
// resumes at the first unanswered trial.

import { isDone, ListenClient, NextTrial, ResponseValue, Trial } from "./api.js";
import { PlayerFactory, StimulusPlayer } from "./audio.js";

export type SessionState =
  | { kind: "loading" }
  | { kind: "trial"; trial: Trial; played: boolean[]; canRespond: boolean; submitting: boolean }
  | { kind: "done"; answered: number; total: number }
  | { kind: "error"; message: string };

export type StateListener = (state: SessionState) => void;

export class SessionRunner {
  private state: SessionState = { kind: "loading" };
  private players: StimulusPlayer[] = [];
  private listeners: StateListener[] = [];
  private trialStarted = 0;
  private nextPreloaded = false;

  constructor(
    private readonly client: ListenClient,
    private readonly playerFactory: PlayerFactory,
    private readonly now: () => number = () => Date.now(),
  ) {}

  getState(): SessionState {
    return this.state;
  }

  onChange(listener: StateListener): void {
    this.listeners.push(listener);
  }

  private setState(state: SessionState): void {
    this.state = state;
    for (const listener of this.listeners) listener(state);
  }

  async start(): Promise<void> {
    this.setState({ kind: "loading" });
    let next: NextTrial;
    try {
      next = await this.client.nextTrial();
    } catch (err) {
      this.setState({ kind: "error", message: String(err) });
      return;
    }
    if (isDone(next)) {
      this.setState({ kind: "done", answered: next.answered, total: next.total });
      return;
    }
    this.beginTrial(next);
  }

  private beginTrial(trial: Trial): void {
    for (const player of this.players) player.stop();
    this.players = trial.stimuli.map((path) => this.playerFactory(this.client.audioUrl(path)));
    const played = trial.stimuli.map(() => false);
    this.players.forEach((player, i) => {
      player.onEnded(() => {
        played[i] = true;
        this.refreshTrialState(trial, played);
      });
    });
    this.trialStarted = this.now();
    this.nextPreloaded = false;
    this.setState({ kind: "trial", trial, played, canRespond: false, submitting: false });
    this.players[0]?.preload();
  }

  private refreshTrialState(trial: Trial, played: boolean[]): void {
    if (this.state.kind !== "trial" || this.state.trial.trial_id !== trial.trial_id) return;
    this.setState({
      kind: "trial",
      trial,
      played: [...played],
      canRespond: played.every(Boolean),
      submitting: this.state.submitting,
    });
  }

  play(stimulusIndex: number): void {
    if (this.state.kind !== "trial") return;
    this.players.forEach((player, i) => {
      if (i !== stimulusIndex) player.stop();
    });
    this.players[stimulusIndex]?.play();
  }

  // A response is only transmitted once every stimulus has finished playing.
  async respond(value: ResponseValue): Promise<void> {
    if (this.state.kind !== "trial") return;
    if (!this.state.canRespond || this.state.submitting) return;
    const trial = this.state.trial;
    this.setState({ ...this.state, submitting: true });
    try {
      await this.client.submitResponse(trial.trial_id, value, this.now() - this.trialStarted);
    } catch (err) {
      this.setState({ kind: "error", message: String(err) });
      return;
    }
    await this.start();
  }

  // Hint the browser to fetch the upcoming trial's audio while the rater
  // listens to the current one.
  preloadNext(stimuli: string[]): void {
    if (this.nextPreloaded) return;
    this.nextPreloaded = true;
    for (const path of stimuli) {
      this.playerFactory(this.client.audioUrl(path)).preload();
    }
  }
}

export function stimulusLabels(trial: Trial): string[] {
  if (trial.protocol === "MOS") return ["Play"];
  if (trial.protocol === "AB") return ["A", "B"];
  return ["X", "A", "B"];
}

export function responseOptions(trial: Trial): ResponseValue[] {
  if (trial.protocol === "MOS") return [1, 2, 3, 4, 5];
  return ["A", "B"];
}
