"""Frame-synchronous vocoder analysis/synthesis.

Self-contained analysis into (F0, spectral envelope, aperiodicity) at a
5 ms hop with a 1024-point FFT, and the matching pulse+noise synthesis.

F0 comes from a cumulative-mean-normalized difference function with
parabolic refinement. For voiced frames the envelope samples the power
spectrum exactly at the harmonics (single-bin DFTs under a pitch-adaptive
Hann window) and interpolates log-power between them, which keeps
analysis consistent with the harmonic synthesis model; unvoiced frames
fall back to a smoothed periodogram.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyWaveform, InvalidFeatures, UnsupportedSampleRate

SAMPLE_RATE = 16000
FRAME_PERIOD_MS = 5.0
HOP = 80  # samples per 5 ms frame at 16 kHz
FFT_SIZE = 1024
SP_DIM = FFT_SIZE // 2 + 1  # 513

F0_FLOOR = 60.0
F0_CEIL = 420.0
_YIN_WINDOW = 512
_YIN_THRESHOLD = 0.18
_SP_FLOOR = 1e-12
_UNVOICED_WIN = 400
_UNVOICED_SMOOTH_HZ = 300.0


@dataclass
class FeatureSet:
    """F0 contour (Hz, 0 = unvoiced), linear-power spectral envelope and
    per-bin aperiodicity in [0, 1], sharing the frame axis."""

    f0: np.ndarray
    sp: np.ndarray
    ap: np.ndarray
    frame_period: float = FRAME_PERIOD_MS
    fft_size: int = FFT_SIZE
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        self.f0 = np.asarray(self.f0, dtype=np.float64)
        self.sp = np.asarray(self.sp, dtype=np.float64)
        self.ap = np.asarray(self.ap, dtype=np.float64)

    @property
    def n_frames(self) -> int:
        return len(self.f0)

    def validate(self) -> None:
        if self.n_frames == 0:
            raise InvalidFeatures("empty feature set (T == 0)")
        if self.sp.shape != (self.n_frames, self.fft_size // 2 + 1):
            raise InvalidFeatures(f"sp shape {self.sp.shape} inconsistent with T={self.n_frames}")
        if self.ap.shape != self.sp.shape:
            raise InvalidFeatures("ap shape differs from sp shape")
        if not (np.all(np.isfinite(self.f0)) and np.all(np.isfinite(self.sp)) and np.all(np.isfinite(self.ap))):
            raise InvalidFeatures("non-finite entries")
        if np.any(self.sp <= 0):
            raise InvalidFeatures("sp must be strictly positive")
        if np.any((self.ap < 0) | (self.ap > 1)):
            raise InvalidFeatures("ap must lie in [0, 1]")
        if np.any(self.f0 < 0):
            raise InvalidFeatures("negative f0")


def n_frames_for(n_samples: int) -> int:
    return n_samples // HOP + 1


# ---------------------------------------------------------------------------
# F0 estimation


def _difference_function(segment: np.ndarray, window: int, tau_max: int) -> np.ndarray:
    """d(tau) = sum_{j<W} (x[j] - x[j+tau])^2 for tau = 0..tau_max."""
    x = segment
    head = x[:window]
    n_fft = 1 << int(np.ceil(np.log2(len(x) + window)))
    spec_all = np.fft.rfft(x, n_fft)
    spec_head = np.fft.rfft(head, n_fft)
    corr = np.fft.irfft(spec_all * np.conj(spec_head), n_fft)[: tau_max + 1]
    sq = np.concatenate(([0.0], np.cumsum(x * x)))
    e_tau = sq[window : window + tau_max + 1] - sq[: tau_max + 1]
    return e_tau + sq[window] - 2.0 * corr


def _estimate_f0(x: np.ndarray, n_frames: int, sr: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame F0 plus a periodicity score in [0, 1] (1 = fully periodic)."""
    tau_min = int(sr / F0_CEIL)
    tau_max = int(np.ceil(sr / F0_FLOOR))
    window = _YIN_WINDOW
    seg_len = window + tau_max
    pad = seg_len // 2
    xp = np.concatenate([np.zeros(pad), x, np.zeros(seg_len)])

    rms_global = np.sqrt(np.mean(x * x)) if len(x) else 0.0
    silence_gate = max(1e-5, 0.005 * rms_global)

    f0 = np.zeros(n_frames)
    clarity = np.zeros(n_frames)
    for i in range(n_frames):
        center = i * HOP
        seg = xp[center : center + seg_len]
        frame_rms = np.sqrt(np.mean(seg[:window] ** 2))
        if frame_rms < silence_gate:
            continue
        d = _difference_function(seg, window, tau_max)
        cum = np.cumsum(d[1:])
        cmndf = np.ones(tau_max + 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            cmndf[1:] = d[1:] * np.arange(1, tau_max + 1) / np.where(cum > 0, cum, np.inf)

        search = cmndf[tau_min : tau_max + 1]
        below = np.nonzero(search < _YIN_THRESHOLD)[0]
        if below.size:
            k = below[0] + tau_min
            while k + 1 <= tau_max and cmndf[k + 1] < cmndf[k]:
                k += 1
        else:
            k = int(np.argmin(search)) + tau_min
        dip = cmndf[k]
        if dip >= 0.5:
            continue
        tau = float(k)
        if tau_min < k < tau_max:  # parabolic interpolation around the dip
            a, b, c = cmndf[k - 1], cmndf[k], cmndf[k + 1]
            denom = a - 2 * b + c
            if abs(denom) > 1e-12:
                tau += 0.5 * (a - c) / denom
        f0[i] = sr / tau
        clarity[i] = float(np.clip(1.0 - dip, 0.0, 1.0))

    # 3-point median removes isolated voicing flips
    if n_frames >= 3:
        med = f0.copy()
        for i in range(1, n_frames - 1):
            med[i] = np.median(f0[i - 1 : i + 2])
        newly_voiced = (med > 0) & (f0 == 0)
        f0 = med
        clarity[newly_voiced] = np.maximum(clarity[newly_voiced], 0.5)
        clarity[f0 == 0] = 0.0
    return f0, clarity


# ---------------------------------------------------------------------------
# Spectral envelope


def _smooth_power(power: np.ndarray, width_bins: float) -> np.ndarray:
    """Rectangular smoothing with fractional width via integrated spectrum."""
    if width_bins <= 1.0:
        return power
    n = len(power)
    half = int(np.ceil(width_bins / 2)) + 2
    padded = np.concatenate([power[half:0:-1], power, power[-2 : -half - 2 : -1]])
    integ = np.concatenate(([0.0], np.cumsum(padded)))
    pos = np.arange(n) + half
    lo = pos - width_bins / 2 + 0.5
    hi = pos + width_bins / 2 + 0.5

    def frac_sum(idx):
        base = np.floor(idx).astype(int)
        frac = idx - base
        return integ[base] + frac * padded[np.minimum(base, len(padded) - 1)]

    return (frac_sum(hi) - frac_sum(lo)) / width_bins


def _voiced_envelope(segment: np.ndarray, f0: float, periodic_fraction: float, sr: int) -> np.ndarray:
    """Envelope from log-interpolated harmonic powers.

    The single-bin DFT at k*f0 under a 3-period Hann window measures the
    k-th harmonic amplitude without interference from its neighbours
    (main-lobe half-width 2*f0/3 < f0).
    """
    length = len(segment)
    n = np.arange(length) - (length - 1) / 2.0
    win = 0.5 + 0.5 * np.cos(2 * np.pi * n / length)
    xw = segment * win
    win_gain = np.sum(win) / 2.0  # amplitude gain for a coherent sinusoid

    k_max = max(1, int(np.floor((sr / 2 - f0 / 2) / f0)))
    freqs = f0 * np.arange(1, k_max + 1)
    phasors = np.exp(-2j * np.pi * np.outer(freqs, n) / sr)
    amps = np.abs(phasors @ xw) / win_gain  # harmonic amplitudes

    t0 = sr / f0
    # harmonic amplitude A for PSD S under pulse excitation: A^2 = 4 S / t0,
    # thinned by the periodic share of the frame's power
    env_at_harmonics = amps**2 * t0 / 4.0 / max(periodic_fraction, 0.05)

    bin_freqs = np.arange(SP_DIM) * sr / FFT_SIZE
    log_env = np.interp(bin_freqs, freqs, np.log(env_at_harmonics + _SP_FLOOR))
    return np.exp(log_env) + _SP_FLOOR


def _unvoiced_envelope(segment: np.ndarray, sr: int) -> np.ndarray:
    win = np.hanning(len(segment))
    power = np.abs(np.fft.rfft(segment * win, FFT_SIZE)) ** 2 / np.sum(win**2)
    df = sr / FFT_SIZE
    return _smooth_power(power, _UNVOICED_SMOOTH_HZ / df) + _SP_FLOOR


def _spectral_envelope(x: np.ndarray, f0: np.ndarray, clarity: np.ndarray, sr: int) -> np.ndarray:
    n_frames = len(f0)
    max_half = int(round(1.5 * sr / F0_FLOOR)) + 2
    xp = np.concatenate([np.zeros(max_half), x, np.zeros(max_half + HOP * 2)])

    sp = np.empty((n_frames, SP_DIM))
    for i in range(n_frames):
        center = max_half + i * HOP
        if f0[i] > 0:
            half = min(int(round(1.5 * sr / f0[i])), max_half - 1)
            seg = xp[center - half : center + half + 1]
            sp[i] = _voiced_envelope(seg, f0[i], clarity[i], sr)
        else:
            half = _UNVOICED_WIN // 2
            seg = xp[center - half : center + half]
            sp[i] = _unvoiced_envelope(seg, sr)
    return sp


# ---------------------------------------------------------------------------
# Public analysis / synthesis


def analyze(waveform: np.ndarray, sample_rate: int = SAMPLE_RATE) -> FeatureSet:
    """Decompose a waveform into F0, spectral envelope and aperiodicity.

    T == floor(n_samples / 80) + 1 frames at the 5 ms hop; unvoiced frames
    carry f0 == 0 and aperiodicity 1.
    """
    x = np.asarray(waveform, dtype=np.float64).ravel()
    if x.size == 0:
        raise EmptyWaveform("empty waveform")
    if sample_rate != SAMPLE_RATE:
        raise UnsupportedSampleRate(f"got {sample_rate} Hz, only {SAMPLE_RATE} Hz supported")

    n_frames = n_frames_for(len(x))
    f0, clarity = _estimate_f0(x, n_frames, sample_rate)
    sp = _spectral_envelope(x, f0, clarity, sample_rate)

    # aperiodicity: flat per frame, noise share of total power
    ap_frame = np.where(f0 > 0, np.sqrt(np.clip(1.0 - clarity, 0.001, 1.0)), 1.0)
    ap = np.repeat(ap_frame[:, None], SP_DIM, axis=1)
    return FeatureSet(f0=f0, sp=sp, ap=ap)


def _min_phase_spectra(amplitude: np.ndarray) -> np.ndarray:
    """Minimum-phase complex spectra (rfft grid) from amplitude rows.

    Causal responses keep the overlap-add free of circular-wrap clicks
    that a zero-phase filter would spray across the buffer.
    """
    log_amp = np.log(np.maximum(amplitude, 1e-10))
    cep = np.fft.irfft(log_amp, FFT_SIZE, axis=-1)
    folded = np.zeros_like(cep)
    folded[..., 0] = cep[..., 0]
    folded[..., 1 : FFT_SIZE // 2] = 2.0 * cep[..., 1 : FFT_SIZE // 2]
    folded[..., FFT_SIZE // 2] = cep[..., FFT_SIZE // 2]
    return np.exp(np.fft.rfft(folded, FFT_SIZE, axis=-1))


_FRAC_TAPS = 64


def _frac_delay_kernel(frac: float, taps: int = _FRAC_TAPS) -> np.ndarray:
    """Windowed-sinc fractional delay of (taps/2 - 1 + frac) samples.

    A linear FIR keeps the sub-sample pulse timing free of the broadband
    clicks a circular DFT phase shift would wrap into the buffer tail.
    """
    m = np.arange(taps)
    delay = taps // 2 - 1 + frac
    kernel = np.sinc(m - delay)
    kernel *= np.kaiser(taps, 14.0)
    return kernel / np.sum(kernel)


def synthesize(features: FeatureSet, seed: int = 0) -> np.ndarray:
    """Render a waveform from a FeatureSet (pulse + noise excitation).

    Output spans exactly T frames (T*80 samples); a peak above full scale
    is normalized down so samples always land in [-1, 1].
    """
    features.validate()
    f0, sp, ap = features.f0, features.sp, features.ap
    n_frames = features.n_frames
    sr = features.sample_rate
    n_out = n_frames * HOP
    rng = np.random.default_rng(seed)

    periodic_amp = np.sqrt(sp * np.clip(1.0 - ap**2, 0.0, 1.0))
    noise_amp = np.sqrt(sp) * ap

    margin = _FRAC_TAPS
    out = np.zeros(n_out + 2 * FFT_SIZE + 2 * margin)

    # --- periodic part: one fractional-delay minimum-phase response per pulse
    if np.any(f0 > 0):
        voiced_frames = np.nonzero(f0 > 0)[0]
        pulse_responses = np.zeros((n_frames, FFT_SIZE))
        pulse_responses[voiced_frames] = np.fft.irfft(
            _min_phase_spectra(periodic_amp[voiced_frames]), FFT_SIZE, axis=-1
        )

        f0_samples = np.repeat(f0, HOP)[:n_out]
        phase = np.cumsum(f0_samples / sr)
        floor_phase = np.floor(np.concatenate(([0.0], phase)))
        wraps = np.nonzero(np.diff(floor_phase) > 0)[0]
        for p in wraps:
            frame = min(p // HOP, n_frames - 1)
            if f0[frame] <= 0:
                continue
            # exact crossing time between samples p-1 and p keeps the
            # harmonics jitter-free at high frequencies
            prev = phase[p - 1] if p > 0 else 0.0
            step = phase[p] - prev
            frac = (np.ceil(prev) - prev) / step if step > 0 else 0.0
            gain = np.sqrt(sr / f0[frame])
            response = np.convolve(pulse_responses[frame], _frac_delay_kernel(frac))
            start = margin + p - 1 - (_FRAC_TAPS // 2 - 1)
            out[start : start + len(response)] += gain * response

    # --- noise part: overlap-add of shaped white noise, hop 80, window 160.
    # Segments share the underlying noise stream and the Hann windows sum
    # to one at 50% overlap, so the OLA equals exact filtering of unit
    # white noise; no extra gain correction is needed.
    win = np.hanning(2 * HOP + 1)[:-1]
    noise = rng.standard_normal(n_out + 2 * HOP)
    noise_spectra = _min_phase_spectra(noise_amp)
    for i in range(n_frames):
        seg = noise[i * HOP : i * HOP + 2 * HOP] * win
        spec = np.fft.rfft(seg, FFT_SIZE)
        shaped = np.fft.irfft(spec * noise_spectra[i], FFT_SIZE)
        out[margin + i * HOP : margin + i * HOP + FFT_SIZE] += shaped

    out = out[margin : margin + n_out]
    peak = np.max(np.abs(out))
    if peak > 1.0:
        out = out / (peak * 1.001)
    return out
