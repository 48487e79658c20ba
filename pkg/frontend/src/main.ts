import { ListenClient } from "./api.js";
import { htmlAudioFactory } from "./audio.js";
import { SessionRunner } from "./session.js";
import { SessionView } from "./ui.js";

function requireParam(params: URLSearchParams, name: string): string {
  const value = params.get(name);
  if (!value) {
    throw new Error(`missing ?${name}= query parameter`);
  }
  return value;
}

function main(): void {
  const params = new URLSearchParams(window.location.search);
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app container");
  try {
    const session = requireParam(params, "session");
    const rater = params.get("rater") ?? `rater-${Math.random().toString(36).slice(2, 8)}`;
    const server = params.get("server") ?? "";
    const client = new ListenClient(server, session, rater);
    const runner = new SessionRunner(client, htmlAudioFactory);
    new SessionView(root, runner);
    void runner.start();
  } catch (err) {
    root.textContent = String(err);
  }
}

main();
