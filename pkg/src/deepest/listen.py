"""Listening-test backend: builds MOS/AB/XAB trial sessions over converted
and reference audio, collects ratings into an append-only record log, and
aggregates scores with 95% confidence intervals.

Raters never see condition tags; stimuli travel as opaque audio refs and
the per-session presentation order is de-randomized only at aggregation.
"""

from __future__ import annotations

import json
import random
import threading
import time
import uuid
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from scipy import stats as sstats

from .errors import (
    DeepestError,
    DuplicateResponse,
    InsufficientResponses,
    InvalidValue,
    MissingStimulus,
    UnknownSession,
    UnknownTrial,
)

PROTOCOLS = ("MOS", "AB", "XAB")
MOS_SCALE = (1, 2, 3, 4, 5)


@dataclass
class TrialSpec:
    trial_id: str
    protocol: str
    stimuli: list[str]          # opaque audio refs, presentation order
    condition_tags: list[str]   # hidden: true system per stimulus
    emotion_pair: str

    def public_view(self) -> dict:
        return {
            "trial_id": self.trial_id,
            "protocol": self.protocol,
            "emotion_pair": self.emotion_pair,
            "stimuli": [f"/audio/{ref}" for ref in self.stimuli],
        }


@dataclass
class TrialResponse:
    session_id: str
    rater_id: str
    trial_id: str
    value: str | int
    elapsed_ms: float = 0.0
    timestamp: float = field(default_factory=time.time)

    def to_record(self) -> dict:
        return asdict(self)


def mos_interval(values) -> tuple[float, float]:
    """Mean and 95% t-interval half-width (sample std, n-1 dof)."""
    values = np.asarray(list(values), dtype=np.float64)
    n = len(values)
    if n < 2:
        raise InsufficientResponses(f"need >= 2 ratings, got {n}")
    mean = float(np.mean(values))
    s = float(np.std(values, ddof=1))
    half = float(sstats.t.ppf(0.975, n - 1) * s / np.sqrt(n))
    return mean, half


class ListeningStudy:
    """Sessions, responses and aggregation over a data directory.

    One JSON file per session (trial specs including hidden tags plus the
    audio ref registry); responses append to ``responses.jsonl`` through a
    single lock-serialized writer and are reloaded on restart.
    """

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.sessions_dir = self.data_dir / "sessions"
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        self.responses_path = self.data_dir / "responses.jsonl"
        self._lock = threading.Lock()
        self._sessions: dict[str, dict] = {}
        self._responses: list[TrialResponse] = []
        self._seen: set[tuple[str, str]] = set()
        self._load()

    # -- persistence --------------------------------------------------

    def _load(self) -> None:
        for path in sorted(self.sessions_dir.glob("*.json")):
            record = json.loads(path.read_text())
            self._sessions[record["session_id"]] = record
        if self.responses_path.exists():
            with open(self.responses_path) as fh:
                for line in fh:
                    if line.strip():
                        rec = json.loads(line)
                        resp = TrialResponse(**rec)
                        self._responses.append(resp)
                        self._seen.add((resp.rater_id, resp.trial_id))

    def _persist_session(self, record: dict) -> None:
        path = self.sessions_dir / f"{record['session_id']}.json"
        path.write_text(json.dumps(record, indent=2))

    # -- session construction -----------------------------------------

    def build_session(self, config: dict) -> dict:
        """Create a session from {protocols, systems, references,
        emotion_pairs, clips_per_pair, seed}.

        systems: {name: {pair: [audio paths]}}. AB/XAB need exactly two
        systems; XAB additionally needs references: {pair: [paths]}.
        Trials are shuffled and stimulus order counterbalanced with the
        session seed.
        """
        protocols = config.get("protocols", ["MOS"])
        systems: dict = config["systems"]
        references: dict = config.get("references", {})
        pairs = config.get("emotion_pairs") or sorted(
            {p for files in systems.values() for p in files}
        )
        clips_cfg = config.get("clips_per_pair")
        seed = int(config.get("seed", 0))
        rng = random.Random(seed)

        session_id = config.get("session_id") or uuid.uuid4().hex[:12]
        registry: dict[str, str] = {}

        def register(path: str) -> str:
            path = str(path)
            if not Path(path).is_file():
                raise MissingStimulus(path)
            ref = f"{session_id}-{len(registry):04d}"
            registry[ref] = path
            return ref

        def clips_for(protocol: str, pair: str) -> int:
            available = min(len(systems[name].get(pair, [])) for name in systems)
            if protocol == "XAB":
                available = min(available, len(references.get(pair, [])))
            if clips_cfg is None:
                return available
            if isinstance(clips_cfg, dict):
                return min(int(clips_cfg.get(protocol, available)), available)
            return min(int(clips_cfg), available)

        system_names = sorted(systems)
        trials: list[TrialSpec] = []
        t_index = 0
        for protocol in protocols:
            if protocol not in PROTOCOLS:
                raise InvalidValue(f"unknown protocol {protocol}")
            if protocol in ("AB", "XAB") and len(system_names) != 2:
                raise InvalidValue(f"{protocol} needs exactly 2 systems")
            for pair in pairs:
                n_clips = clips_for(protocol, pair)
                for i in range(n_clips):
                    if protocol == "MOS":
                        for name in system_names:
                            trials.append(TrialSpec(
                                trial_id=f"{session_id}-t{t_index:04d}",
                                protocol="MOS",
                                stimuli=[register(systems[name][pair][i])],
                                condition_tags=[name],
                                emotion_pair=pair,
                            ))
                            t_index += 1
                    else:
                        order = list(system_names)
                        if rng.random() < 0.5:
                            order.reverse()
                        stimuli = [register(systems[name][pair][i]) for name in order]
                        tags = list(order)
                        if protocol == "XAB":
                            stimuli = [register(references[pair][i])] + stimuli
                            tags = ["reference"] + tags
                        trials.append(TrialSpec(
                            trial_id=f"{session_id}-t{t_index:04d}",
                            protocol=protocol,
                            stimuli=stimuli,
                            condition_tags=tags,
                            emotion_pair=pair,
                        ))
                        t_index += 1

        rng.shuffle(trials)
        record = {
            "session_id": session_id,
            "seed": seed,
            "allow_no_preference": bool(config.get("allow_no_preference", False)),
            "trials": [asdict(t) for t in trials],
            "registry": registry,
            "created": time.time(),
        }
        with self._lock:
            self._sessions[session_id] = record
            self._persist_session(record)
        return {"session_id": session_id, "n_trials": len(trials),
                "n_stimuli": len(registry)}

    # -- serving -------------------------------------------------------

    def session(self, session_id: str) -> dict:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise UnknownSession(session_id) from None

    def trials(self, session_id: str) -> list[TrialSpec]:
        return [TrialSpec(**t) for t in self.session(session_id)["trials"]]

    def next_trial(self, session_id: str, rater_id: str) -> dict:
        trials = self.trials(session_id)
        answered = {t.trial_id for t in trials} & {
            r.trial_id for r in self._responses if r.rater_id == rater_id
        }
        progress = {"answered": len(answered), "total": len(trials)}
        for trial in trials:
            if trial.trial_id not in answered:
                view = trial.public_view()
                view["progress"] = progress
                return view
        return {"done": True, **progress}

    def audio_path(self, ref: str) -> str:
        for record in self._sessions.values():
            if ref in record["registry"]:
                return record["registry"][ref]
        raise MissingStimulus(ref)

    def _trial_by_id(self, session_id: str, trial_id: str) -> TrialSpec:
        for t in self.trials(session_id):
            if t.trial_id == trial_id:
                return t
        raise UnknownTrial(trial_id)

    def submit_response(self, response: TrialResponse) -> dict:
        session = self.session(response.session_id)
        trial = self._trial_by_id(response.session_id, response.trial_id)

        if trial.protocol == "MOS":
            if not (isinstance(response.value, int) and response.value in MOS_SCALE):
                raise InvalidValue(f"MOS rating must be an integer 1..5, got {response.value!r}")
        else:
            allowed = {"A", "B"}
            if session.get("allow_no_preference"):
                allowed.add("no_preference")
            if response.value not in allowed:
                raise InvalidValue(f"{trial.protocol} choice must be one of {sorted(allowed)}")

        with self._lock:
            key = (response.rater_id, response.trial_id)
            if key in self._seen:
                raise DuplicateResponse(f"rater {response.rater_id} already answered {response.trial_id}")
            with open(self.responses_path, "a") as fh:
                fh.write(json.dumps(response.to_record(), sort_keys=True) + "\n")
                fh.flush()
            self._responses.append(response)
            self._seen.add(key)
        return {"status": "accepted", "trial_id": response.trial_id}

    # -- aggregation ----------------------------------------------------

    def _trial_map(self) -> dict[str, TrialSpec]:
        out = {}
        for record in self._sessions.values():
            for t in record["trials"]:
                out[t["trial_id"]] = TrialSpec(**t)
        return out

    def aggregate_mos(self, group: str | None = None) -> list[dict]:
        """Rows of mean +/- 95% CI per (emotion_pair, system)."""
        trial_map = self._trial_map()
        cells: dict[tuple[str, str], list[int]] = {}
        for r in self._responses:
            trial = trial_map.get(r.trial_id)
            if trial is None or trial.protocol != "MOS":
                continue
            key = (trial.emotion_pair, trial.condition_tags[0])
            cells.setdefault(key, []).append(int(r.value))
        rows = []
        for (pair, system), values in sorted(cells.items()):
            name = f"{pair}:{system}"
            if group is not None and group != name:
                continue
            if len(values) < 2 and group is None:
                continue  # cell below the 2-response floor; only listed on request
            mean, half = mos_interval(values)
            rows.append({"group": name, "emotion_pair": pair, "system": system,
                         "n": len(values), "mean": mean, "ci95": half})
        if group is not None and not rows:
            raise InsufficientResponses(f"no MOS responses for group {group}")
        return rows

    def aggregate_preference(self, protocol: str = "AB", group: str | None = None) -> list[dict]:
        """Percentages per system after undoing the presentation shuffle."""
        trial_map = self._trial_map()
        cells: dict[str, dict[str, int]] = {}
        for r in self._responses:
            trial = trial_map.get(r.trial_id)
            if trial is None or trial.protocol != protocol:
                continue
            counts = cells.setdefault(trial.emotion_pair, {})
            if r.value == "no_preference":
                counts["no_preference"] = counts.get("no_preference", 0) + 1
                continue
            position = {"A": 0, "B": 1}[r.value]
            if protocol == "XAB":
                position += 1  # skip the reference slot
            system = trial.condition_tags[position]
            counts[system] = counts.get(system, 0) + 1
        rows = []
        for pair, counts in sorted(cells.items()):
            if group is not None and group != pair:
                continue
            total = sum(counts.values())
            if total < 1:
                raise InsufficientResponses(pair)
            rows.append({
                "group": pair,
                "protocol": protocol,
                "n": total,
                "percentages": {sys: 100.0 * c / total for sys, c in sorted(counts.items())},
            })
        if group is not None and not rows:
            raise InsufficientResponses(f"no {protocol} responses for group {group}")
        return rows


# ---------------------------------------------------------------------------
# HTTP layer


def create_app(study: ListeningStudy, static_dir: str | Path | None = None):
    from fastapi import FastAPI, Request
    from fastapi.responses import FileResponse, JSONResponse
    from fastapi.staticfiles import StaticFiles

    app = FastAPI(title="listening-test service")

    status_codes = {
        "UnknownSession": 404,
        "UnknownTrial": 404,
        "MissingStimulus": 404,
        "DuplicateResponse": 409,
        "InvalidValue": 422,
        "InsufficientResponses": 422,
    }

    @app.exception_handler(DeepestError)
    async def _handle(request: Request, exc: DeepestError):
        return JSONResponse(
            status_code=status_codes.get(exc.code, 400),
            content={"code": exc.code, "message": str(exc)},
        )

    @app.post("/sessions", status_code=201)
    async def create_session(config: dict):
        return study.build_session(config)

    @app.get("/sessions/{session_id}/trials/next")
    async def next_trial(session_id: str, rater_id: str = "anonymous"):
        return study.next_trial(session_id, rater_id)

    @app.get("/audio/{ref}")
    async def audio(ref: str):
        return FileResponse(study.audio_path(ref), media_type="audio/wav")

    @app.post("/responses")
    async def submit(body: dict):
        response = TrialResponse(
            session_id=body["session_id"],
            rater_id=body.get("rater_id", "anonymous"),
            trial_id=body["trial_id"],
            value=body["value"],
            elapsed_ms=float(body.get("elapsed_ms", 0.0)),
        )
        return study.submit_response(response)

    @app.get("/results")
    async def results(protocol: str = "MOS", group: str | None = None):
        if protocol == "MOS":
            return {"protocol": "MOS", "results": study.aggregate_mos(group)}
        return {"protocol": protocol,
                "results": study.aggregate_preference(protocol, group)}

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")
    return app
