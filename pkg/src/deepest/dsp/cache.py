"""Per-utterance feature cache files.

Layout: one JSON header line (utterance id, frame count, dims, frame
period, fft size, sample rate) terminated by a newline, followed by f0,
sp and ap as little-endian float64 in row-major order.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import InvalidFeatures
from .vocoder import FeatureSet

CACHE_SUFFIX = ".feat"


def feature_cache_path(cache_dir: str | Path, utterance_id: str) -> Path:
    return Path(cache_dir) / f"{utterance_id}{CACHE_SUFFIX}"


def write_features(path: str | Path, utterance_id: str, features: FeatureSet) -> None:
    features.validate()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "id": utterance_id,
        "T": features.n_frames,
        "sp_dim": features.sp.shape[1],
        "frame_period": features.frame_period,
        "fft_size": features.fft_size,
        "sample_rate": features.sample_rate,
    }
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
        fh.write(features.f0.astype("<f8").tobytes())
        fh.write(np.ascontiguousarray(features.sp, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(features.ap, dtype="<f8").tobytes())


def read_features(path: str | Path) -> tuple[str, FeatureSet]:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        t, dim = header["T"], header["sp_dim"]
        body = np.frombuffer(fh.read(), dtype="<f8")
    expected = t + 2 * t * dim
    if body.size != expected:
        raise InvalidFeatures(f"{path}: expected {expected} floats, found {body.size}")
    f0 = body[:t]
    sp = body[t : t + t * dim].reshape(t, dim)
    ap = body[t + t * dim :].reshape(t, dim)
    features = FeatureSet(
        f0=f0,
        sp=sp,
        ap=ap,
        frame_period=header["frame_period"],
        fft_size=header["fft_size"],
        sample_rate=header["sample_rate"],
    )
    return header["id"], features
