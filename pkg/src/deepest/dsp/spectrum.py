"""Spectral feature transforms: unit-sum normalization, mel-cepstral
coefficients with all-pass frequency warping, and the mel+delta front end
for the emotion descriptor."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyWaveform, NonPositiveSpectrum
from .vocoder import SAMPLE_RATE, SP_DIM

MCEP_ORDER = 24
MCEP_ALPHA = 0.42  # frequency warping for 16 kHz

MEL_BANDS = 40
MEL_WIN = 400  # 25 ms at 16 kHz
MEL_HOP = 160  # 10 ms
MEL_NFFT = 512
SER_FRAMES = 300


@dataclass
class NormalizedSpectrum:
    """Log of unit-sum spectral frames plus the original frame energies."""

    log_sp: np.ndarray  # (T, 513)
    energy: np.ndarray  # (T,)


def sp_normalize(sp: np.ndarray) -> NormalizedSpectrum:
    """Normalize each frame to unit sum, then take the logarithm.

    Frame sums are kept as ``energy`` so the transform is invertible.
    """
    sp = np.asarray(sp, dtype=np.float64)
    if sp.ndim != 2:
        raise NonPositiveSpectrum(f"expected (T, {SP_DIM}) matrix, got shape {sp.shape}")
    bad = np.argwhere(sp <= 0)
    if bad.size:
        t, d = bad[0]
        raise NonPositiveSpectrum(f"non-positive entry at frame {t}, bin {d}")
    energy = sp.sum(axis=1)
    return NormalizedSpectrum(log_sp=np.log(sp / energy[:, None]), energy=energy)


def sp_denormalize(norm: NormalizedSpectrum) -> np.ndarray:
    """Inverse of sp_normalize: exp(log_sp) scaled back by frame energy."""
    return np.exp(norm.log_sp) * np.asarray(norm.energy)[:, None]


@dataclass
class MCEPTrack:
    coeffs: np.ndarray  # (T, order+1)
    order: int = MCEP_ORDER
    alpha: float = MCEP_ALPHA

    @property
    def n_frames(self) -> int:
        return len(self.coeffs)


def _warp_frequency(omega: np.ndarray, alpha: float) -> np.ndarray:
    """All-pass frequency warp; alpha > 0 stretches low frequencies."""
    return omega + 2.0 * np.arctan(alpha * np.sin(omega) / (1.0 - alpha * np.cos(omega)))


def mcep(sp: np.ndarray, order: int = MCEP_ORDER, alpha: float = MCEP_ALPHA) -> MCEPTrack:
    """Mel-cepstral coefficients of a linear-power envelope track.

    Log amplitude (0.5 * ln SP) is resampled onto the warped frequency
    axis and expanded in a cosine series; c0 carries the frame level,
    scaling SP by k moves only c0 (by ln(k)/2).
    """
    sp = np.atleast_2d(np.asarray(sp, dtype=np.float64))
    if np.any(sp <= 0):
        raise NonPositiveSpectrum("mcep requires strictly positive spectra")
    n_bins = sp.shape[1]
    n_fft = 2 * (n_bins - 1)

    log_amp = 0.5 * np.log(sp)
    omega_warped = np.linspace(0.0, np.pi, n_bins)
    omega_linear = _warp_frequency(omega_warped, -alpha)  # inverse warp
    grid = np.linspace(0.0, np.pi, n_bins)
    warped = np.array([np.interp(omega_linear, grid, row) for row in log_amp])

    ce = np.fft.irfft(warped, n_fft, axis=1)
    coeffs = ce[:, : order + 1].copy()
    coeffs[:, 1:] *= 2.0
    return MCEPTrack(coeffs=coeffs, order=order, alpha=alpha)


def mcep_to_log_sp(track: MCEPTrack, n_bins: int = SP_DIM) -> np.ndarray:
    """Reconstruct log power spectra from mel-cepstral coefficients."""
    omega = np.linspace(0.0, np.pi, n_bins)
    omega_warped = _warp_frequency(omega, track.alpha)
    m = np.arange(track.order + 1)
    basis = np.cos(np.outer(omega_warped, m))  # (n_bins, order+1)
    return 2.0 * (track.coeffs @ basis.T)  # back to power-log convention


# ---------------------------------------------------------------------------
# Emotion-descriptor front end


def _mel_filterbank(n_bands: int, n_fft: int, sr: int) -> np.ndarray:
    def hz_to_mel(f):
        return 2595.0 * np.log10(1.0 + f / 700.0)

    def mel_to_hz(m):
        return 700.0 * (10.0 ** (m / 2595.0) - 1.0)

    mel_pts = np.linspace(hz_to_mel(0.0), hz_to_mel(sr / 2), n_bands + 2)
    hz_pts = mel_to_hz(mel_pts)
    bins = hz_pts * n_fft / sr
    fb = np.zeros((n_bands, n_fft // 2 + 1))
    for b in range(n_bands):
        lo, ctr, hi = bins[b], bins[b + 1], bins[b + 2]
        k = np.arange(n_fft // 2 + 1)
        up = (k - lo) / max(ctr - lo, 1e-9)
        down = (hi - k) / max(hi - ctr, 1e-9)
        fb[b] = np.clip(np.minimum(up, down), 0.0, None)
    return fb


_FILTERBANK = _mel_filterbank(MEL_BANDS, MEL_NFFT, SAMPLE_RATE)


def _delta(feat: np.ndarray, n: int = 2) -> np.ndarray:
    """Regression delta over a +/-n frame window, edges replicated."""
    padded = np.concatenate([feat[:1].repeat(n, axis=0), feat, feat[-1:].repeat(n, axis=0)])
    denom = 2 * sum(k * k for k in range(1, n + 1))
    out = np.zeros_like(feat)
    for k in range(1, n + 1):
        out += k * (padded[n + k : n + k + len(feat)] - padded[n - k : n - k + len(feat)])
    return out / denom


def mel_with_deltas(waveform: np.ndarray, sr: int = SAMPLE_RATE) -> np.ndarray:
    """Log-mel spectrogram with delta and delta-delta, shaped (3, 300, 40).

    25 ms window / 10 ms hop / 40 bands; utterances are padded by
    repeating the last frame or center-cropped to exactly 300 frames.
    """
    x = np.asarray(waveform, dtype=np.float64).ravel()
    if x.size == 0:
        raise EmptyWaveform("empty waveform")
    if len(x) < MEL_WIN:
        x = np.concatenate([x, np.zeros(MEL_WIN - len(x))])

    n_frames = 1 + (len(x) - MEL_WIN) // MEL_HOP
    window = np.hanning(MEL_WIN)
    idx = np.arange(MEL_WIN)[None, :] + MEL_HOP * np.arange(n_frames)[:, None]
    frames = x[idx] * window
    power = np.abs(np.fft.rfft(frames, MEL_NFFT, axis=1)) ** 2
    mel = np.log(power @ _FILTERBANK.T + 1e-10)

    if n_frames < SER_FRAMES:
        pad = np.repeat(mel[-1:], SER_FRAMES - n_frames, axis=0)
        mel = np.concatenate([mel, pad])
    elif n_frames > SER_FRAMES:
        start = (n_frames - SER_FRAMES) // 2
        mel = mel[start : start + SER_FRAMES]

    d1 = _delta(mel)
    d2 = _delta(d1)
    return np.stack([mel, d1, d2])
