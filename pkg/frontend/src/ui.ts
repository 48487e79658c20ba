// DOM view for a rating session. Response controls stay disabled until the
// runner reports that every stimulus finished playing.

import { ResponseValue, Trial } from "./api.js";
import { responseOptions, SessionRunner, SessionState, stimulusLabels } from "./session.js";

const PROTOCOL_PROMPTS: Record<string, string> = {
  MOS: "Rate the overall quality of the sample (1 = bad, 5 = excellent).",
  AB: "Which sample has the higher speech quality?",
  XAB: "Which sample sounds closer to reference X in emotional expression?",
};

export class SessionView {
  constructor(private readonly root: HTMLElement, private readonly runner: SessionRunner) {
    runner.onChange((state) => this.render(state));
    this.render(runner.getState());
    document.addEventListener("keydown", (event) => this.onKey(event));
  }

  private onKey(event: KeyboardEvent): void {
    const state = this.runner.getState();
    if (state.kind !== "trial" || !state.canRespond) return;
    const key = event.key.toUpperCase();
    if (state.trial.protocol === "MOS" && /^[1-5]$/.test(key)) {
      void this.runner.respond(Number(key));
    } else if (state.trial.protocol !== "MOS" && (key === "A" || key === "B")) {
      void this.runner.respond(key as ResponseValue);
    }
  }

  private render(state: SessionState): void {
    this.root.textContent = "";
    switch (state.kind) {
      case "loading":
        this.root.append(el("p", "status", "Loading next trial..."));
        break;
      case "error": {
        this.root.append(el("p", "error", `Something went wrong: ${state.message}`));
        const retry = button("Retry", "retry");
        retry.addEventListener("click", () => void this.runner.start());
        this.root.append(retry);
        break;
      }
      case "done": {
        const panel = el("div", "completion");
        panel.append(el("h2", "", "Session complete"));
        panel.append(el("p", "count", `You rated ${state.answered} of ${state.total} trials. Thank you!`));
        this.root.append(panel);
        break;
      }
      case "trial":
        this.renderTrial(state.trial, state.played, state.canRespond, state.submitting);
        break;
    }
  }

  private renderTrial(trial: Trial, played: boolean[], canRespond: boolean, submitting: boolean): void {
    const header = el("div", "header");
    header.append(el("span", "progress",
      `Trial ${trial.progress.answered + 1} / ${trial.progress.total}`));
    header.append(el("span", "protocol", trial.protocol));
    this.root.append(header);

    this.root.append(el("p", "prompt", PROTOCOL_PROMPTS[trial.protocol]));

    const players = el("div", "players");
    stimulusLabels(trial).forEach((label, i) => {
      const btn = button(`▶ ${label}`, "play-button", `play-${i}`);
      btn.addEventListener("click", () => this.runner.play(i));
      const mark = el("span", played[i] ? "played-check done" : "played-check", played[i] ? "✓" : "");
      const cell = el("div", "player-cell");
      cell.append(btn, mark);
      players.append(cell);
    });
    this.root.append(players);

    const hint = canRespond
      ? "Pick your answer."
      : "Listen to every sample before answering.";
    this.root.append(el("p", "hint", hint));

    const answers = el("div", "answers");
    for (const option of responseOptions(trial)) {
      const btn = button(String(option), "answer-button", `answer-${option}`);
      btn.disabled = !canRespond || submitting;
      btn.addEventListener("click", () => void this.runner.respond(option));
      answers.append(btn);
    }
    this.root.append(answers);
  }
}

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function button(label: string, className: string, id?: string): HTMLButtonElement {
  const node = document.createElement("button");
  node.className = className;
  node.textContent = label;
  if (id) node.id = id;
  return node;
}
