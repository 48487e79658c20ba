"""Run-time conversion: neutral source utterance toward a reference
emotional style, with log-Gaussian F0 conversion and vocoder resynthesis."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import ser as ser_mod
from . import vawgan
from .audio import read_wav, write_wav
from .corpus import Utterance
from .dsp import (
    FeatureSet,
    analyze,
    f0_statistics,
    sp_denormalize,
    sp_normalize,
    synthesize,
    write_features,
    feature_cache_path,
)
from .dsp.stats import F0Statistics
from .errors import DegenerateSourceStats, EmptyReferenceSet


@dataclass
class ConversionRequest:
    source: Utterance
    target_emotion: str
    reference_set: list[Utterance]
    vc_model: vawgan.VCModel
    ser_model: ser_mod.SERModel
    f0_stats_source: F0Statistics
    f0_stats_target: F0Statistics
    # where the target F0 stats came from; "reference_set" marks the
    # unseen-emotion fallback
    target_stats_origin: str = "train_split"

    def validate(self):
        if not self.reference_set:
            raise EmptyReferenceSet("conversion needs at least one reference utterance")
        off = [u.id for u in self.reference_set if u.emotion != self.target_emotion]
        if off:
            raise EmptyReferenceSet(
                f"reference utterances {off} do not carry target emotion {self.target_emotion}"
            )


def convert_f0(f0: np.ndarray, src: F0Statistics, tgt: F0Statistics) -> np.ndarray:
    """Log-Gaussian moment matching; unvoiced frames stay at 0."""
    if src.std_logf0 <= 1e-8:
        raise DegenerateSourceStats(
            f"source log-f0 spread {src.std_logf0} is too small to rescale"
        )
    f0 = np.asarray(f0, dtype=np.float64)
    out = np.zeros_like(f0)
    voiced = f0 > 0
    log_f0 = np.log(f0[voiced])
    out[voiced] = np.exp(
        (log_f0 - src.mean_logf0) * (tgt.std_logf0 / src.std_logf0) + tgt.mean_logf0
    )
    return out


@dataclass
class ConversionResult:
    waveform: np.ndarray
    features: FeatureSet
    embedding: ser_mod.EmotionEmbedding
    f0_stats_used: dict


def convert_utterance(request: ConversionRequest,
                      source_waveform: np.ndarray | None = None,
                      reference_waveforms: list[np.ndarray] | None = None) -> ConversionResult:
    """Full conversion pipeline on one utterance.

    analyze -> normalize -> encode (posterior mean) -> reference style
    mean -> converted F0 -> decode -> denormalize with the source frame
    energy -> resynthesize with the source aperiodicity. The source frame
    count is preserved exactly.
    """
    request.validate()
    request.vc_model.require_trained()
    request.ser_model.require_trained()

    if source_waveform is None:
        source_waveform, _ = read_wav(request.source.audio_path, expect_rate=16000)
    if reference_waveforms is None:
        reference_waveforms = [read_wav(u.audio_path, expect_rate=16000)[0]
                               for u in request.reference_set]

    feats = analyze(source_waveform, 16000)
    norm = sp_normalize(feats.sp)
    code = vawgan.encode(request.vc_model, norm.log_sp)  # posterior mean as z

    phi_t = ser_mod.mean_embedding(request.ser_model, reference_waveforms,
                                   emotion_hint=request.target_emotion)

    f0_hat = convert_f0(feats.f0, request.f0_stats_source, request.f0_stats_target)

    f0_cond = request.vc_model.scale_f0(f0_hat)[:, None]
    phi_rows = np.tile(phi_t.phi, (len(code.mu), 1))
    log_sp_hat = vawgan.decode(request.vc_model, code.mu, phi_rows, f0_cond)

    sp_hat = sp_denormalize(type(norm)(log_sp=log_sp_hat, energy=norm.energy))
    converted = FeatureSet(f0=f0_hat, sp=np.maximum(sp_hat, 1e-12), ap=feats.ap)
    waveform = synthesize(converted)

    stats_used = {
        "source": request.f0_stats_source.to_dict(),
        "target": request.f0_stats_target.to_dict(),
    }
    return ConversionResult(waveform=waveform, features=converted,
                            embedding=phi_t, f0_stats_used=stats_used)


def _checksum(arr: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr, dtype="<f8").tobytes()).hexdigest()


def utterance_f0_stats(utterances, scope: tuple[str, str] = ("", ""),
                       cache_dir: str | Path | None = None) -> F0Statistics:
    """Pool voiced log-F0 statistics over utterances, using cached
    features when available and falling back to fresh analysis."""
    contours = []
    for u in utterances:
        contour = None
        if cache_dir is not None:
            path = feature_cache_path(cache_dir, u.id)
            if Path(path).exists():
                from .dsp import read_features as _read

                contour = _read(path)[1].f0
        if contour is None:
            samples, _ = read_wav(u.audio_path, expect_rate=16000)
            contour = analyze(samples, 16000).f0
        contours.append(contour)
    return f0_statistics(contours, scope=scope)


def batch_convert(requests, out_dir: str | Path, cache_features: bool = True) -> dict:
    """Convert each request to ``<utt_id>__to__<emotion>.wav`` plus a JSON
    sidecar; failures are recorded and the batch continues."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs, errors = [], []
    for request in requests:
        name = f"{request.source.id}__to__{request.target_emotion}"
        try:
            result = convert_utterance(request)
        except Exception as exc:  # per-request isolation
            errors.append({"request": name, "code": getattr(exc, "code", type(exc).__name__),
                           "message": str(exc)})
            continue
        wav_path = out_dir / f"{name}.wav"
        write_wav(wav_path, result.waveform, 16000)
        if cache_features:
            write_features(feature_cache_path(out_dir, name), name, result.features)
        seen = (not request.vc_model.train_emotions
                or request.target_emotion in request.vc_model.train_emotions)
        sidecar = {
            "source_id": request.source.id,
            "source_speaker": request.source.speaker_id,
            "source_text_id": request.source.text_id,
            "target_emotion": request.target_emotion,
            "target_emotion_seen_in_training": seen,
            "target_stats_origin": request.target_stats_origin,
            "embedding_checksum": _checksum(result.embedding.phi),
            "n_references": len(request.reference_set),
            "f0_stats": result.f0_stats_used,
        }
        (out_dir / f"{name}.json").write_text(json.dumps(sidecar, indent=2))
        outputs.append({"request": name, "wav": str(wav_path)})
    manifest = {"outputs": outputs, "errors": errors}
    (out_dir / "conversions.json").write_text(json.dumps(manifest, indent=2))
    return manifest
