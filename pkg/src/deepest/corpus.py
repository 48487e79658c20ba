"""Corpus ingestion, manifests and deterministic train/reference/test splits.

Directory convention: ``root/speaker/emotion/speaker_textid.wav`` with an
optional JSON manifest override. Splits are assigned by ascending text_id,
never randomly, so downstream results are reproducible without seed
bookkeeping.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .audio import TARGET_RATE, wav_header_info
from .errors import (
    InsufficientUtterances,
    MissingDirectory,
    SampleRateMismatch,
    UnreadableAudio,
)

EMOTIONS = ("neutral", "happy", "sad", "angry", "surprise")
SPLITS = ("train", "reference", "test")
DEFAULT_SPLIT_COUNTS = (300, 30, 20)


@dataclass(frozen=True)
class Utterance:
    id: str
    speaker_id: str
    emotion: str
    text_id: str
    split: str | None
    audio_path: str
    sample_rate: int
    duration: float
    gender: str | None = None  # optional tag used by report grouping

    def to_record(self) -> dict:
        rec = {
            "id": self.id,
            "speaker_id": self.speaker_id,
            "emotion": self.emotion,
            "text_id": self.text_id,
            "split": self.split,
            "audio_path": self.audio_path,
            "sample_rate": self.sample_rate,
            "duration": self.duration,
        }
        if self.gender is not None:
            rec["gender"] = self.gender
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "Utterance":
        return cls(
            id=rec["id"],
            speaker_id=rec["speaker_id"],
            emotion=rec["emotion"],
            text_id=str(rec["text_id"]),
            split=rec.get("split"),
            audio_path=rec["audio_path"],
            sample_rate=int(rec["sample_rate"]),
            duration=float(rec["duration"]),
            gender=rec.get("gender"),
        )


def _text_key(text_id: str):
    # numeric ids sort numerically ("2" < "10"); mixed ids fall back to text
    return (0, int(text_id)) if text_id.isdigit() else (1, text_id)


def _sort_key(u: Utterance):
    return (u.speaker_id, u.emotion, _text_key(u.text_id))


@dataclass(frozen=True)
class CorpusIndex:
    """Immutable view of a corpus; safe to share between threads."""

    utterances: tuple[Utterance, ...]
    speakers: tuple[str, ...]
    emotions: tuple[str, ...]
    language: str = "en"
    problems: tuple[str, ...] = field(default=(), compare=False)

    @classmethod
    def build(cls, utterances, language: str = "en", problems=()) -> "CorpusIndex":
        utts = tuple(sorted(utterances, key=_sort_key))
        speakers = tuple(sorted({u.speaker_id for u in utts}))
        emotions = tuple(sorted({u.emotion for u in utts}))
        return cls(utts, speakers, emotions, language, tuple(problems))

    def __len__(self) -> int:
        return len(self.utterances)

    def text_ids(self, speaker: str, emotion: str) -> tuple[str, ...]:
        return tuple(
            u.text_id
            for u in self.utterances
            if u.speaker_id == speaker and u.emotion == emotion
        )


def ingest(
    root_path: str | Path,
    manifest: str | Path | None = None,
    language: str = "en",
    strict: bool = False,
) -> CorpusIndex:
    """Scan an ESD-style directory tree (or a manifest) into a CorpusIndex.

    Audio must be 16 kHz mono 16-bit PCM. Files with a wrong sample rate or
    that fail to decode are rejected and reported via ``index.problems``
    (raised immediately when ``strict`` is set); they are never resampled.
    """
    if manifest is not None:
        return load_manifest(manifest)
    root = Path(root_path)
    if not root.is_dir():
        raise MissingDirectory(str(root))

    utterances: list[Utterance] = []
    problems: list[str] = []
    for wav in sorted(root.glob("*/*/*.wav")):
        emotion = wav.parent.name.lower()
        speaker = wav.parent.parent.name
        if emotion not in EMOTIONS:
            problems.append(f"UnknownEmotion:{wav}")
            continue
        stem = wav.stem
        text_id = stem.rsplit("_", 1)[-1] if "_" in stem else stem
        try:
            rate, _, duration = wav_header_info(wav)
            if rate != TARGET_RATE:
                raise SampleRateMismatch(f"{wav}: found {rate} Hz, expected {TARGET_RATE} Hz")
        except (UnreadableAudio, SampleRateMismatch) as exc:
            if strict:
                raise
            problems.append(f"{exc.code}:{wav}")
            continue
        utterances.append(
            Utterance(
                id=f"{speaker}_{emotion}_{text_id}",
                speaker_id=speaker,
                emotion=emotion,
                text_id=text_id,
                split=None,
                audio_path=str(wav),
                sample_rate=rate,
                duration=duration,
            )
        )
    return CorpusIndex.build(utterances, language=language, problems=problems)


def make_splits(
    index: CorpusIndex, counts: tuple[int, int, int] = DEFAULT_SPLIT_COUNTS
) -> CorpusIndex:
    """Assign train/reference/test deterministically by ascending text_id.

    Per (speaker, emotion): the first ``counts[0]`` text ids go to train,
    the next ``counts[1]`` to reference and the following ``counts[2]`` to
    test. Raises InsufficientUtterances when a group is too small.
    """
    n_train, n_ref, n_test = counts
    need = n_train + n_ref + n_test
    groups: dict[tuple[str, str], list[Utterance]] = {}
    for u in index.utterances:
        groups.setdefault((u.speaker_id, u.emotion), []).append(u)

    out: list[Utterance] = []
    for (speaker, emotion), utts in sorted(groups.items()):
        utts = sorted(utts, key=lambda u: _text_key(u.text_id))
        if len(utts) < need:
            raise InsufficientUtterances(speaker, emotion, len(utts), need)
        for i, u in enumerate(utts):
            if i < n_train:
                split = "train"
            elif i < n_train + n_ref:
                split = "reference"
            elif i < need:
                split = "test"
            else:
                split = None  # beyond the requested partition
            out.append(replace(u, split=split))
    return CorpusIndex.build(out, language=index.language, problems=index.problems)


def select(
    index: CorpusIndex,
    speaker: str | None = None,
    emotion: str | None = None,
    split: str | None = None,
) -> list[Utterance]:
    """Filter utterances; stable (speaker, emotion, text_id) order."""
    picked = [
        u
        for u in index.utterances
        if (speaker is None or u.speaker_id == speaker)
        and (emotion is None or u.emotion == emotion)
        and (split is None or u.split == split)
    ]
    return sorted(picked, key=_sort_key)


def set_genders(index: CorpusIndex, genders: dict[str, str]) -> CorpusIndex:
    """Attach gender tags per speaker (used by the MCD report grouping)."""
    out = [replace(u, gender=genders.get(u.speaker_id, u.gender)) for u in index.utterances]
    return CorpusIndex.build(out, language=index.language, problems=index.problems)


def save_manifest(index: CorpusIndex, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    records = [u.to_record() for u in index.utterances]
    path.write_text(json.dumps(records, indent=2, sort_keys=True) + "\n")


def load_manifest(path: str | Path) -> CorpusIndex:
    records = json.loads(Path(path).read_text())
    return CorpusIndex.build(Utterance.from_record(r) for r in records)
