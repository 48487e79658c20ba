"""Log-F0 statistics pooled over utterance lists (per speaker/emotion)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NoVoicedFrames


@dataclass(frozen=True)
class F0Statistics:
    mean_logf0: float
    std_logf0: float
    voiced_frames: int
    scope: tuple[str, str] = ("", "")  # (speaker_id, emotion)
    degenerate: bool = False  # std below measurable resolution

    def to_dict(self) -> dict:
        return {
            "mean_logf0": self.mean_logf0,
            "std_logf0": self.std_logf0,
            "voiced_frames": self.voiced_frames,
            "scope": list(self.scope),
            "degenerate": self.degenerate,
        }


def f0_statistics(f0_contours, scope: tuple[str, str] = ("", "")) -> F0Statistics:
    """Mean/std of ln(f0) over voiced frames pooled across contours.

    Population (ddof=0) convention. Raises NoVoicedFrames when fewer
    than 2 voiced frames exist in total; a near-zero spread is reported
    via the ``degenerate`` flag instead of an error.
    """
    voiced = np.concatenate([np.asarray(c, dtype=np.float64)[np.asarray(c) > 0] for c in f0_contours]) if f0_contours else np.array([])
    if voiced.size < 2:
        raise NoVoicedFrames(f"need at least 2 voiced frames, found {voiced.size}")
    log_f0 = np.log(voiced)
    std = float(np.std(log_f0))
    return F0Statistics(
        mean_logf0=float(np.mean(log_f0)),
        std_logf0=std,
        voiced_frames=int(voiced.size),
        scope=scope,
        degenerate=std < 1e-8,
    )
