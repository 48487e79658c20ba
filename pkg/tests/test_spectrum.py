import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deepest.dsp import (
    mcep,
    mcep_to_log_sp,
    mel_with_deltas,
    sp_denormalize,
    sp_normalize,
)
from deepest.dsp.spectrum import _delta
from deepest.dsp.vocoder import SP_DIM, analyze
from deepest.errors import EmptyWaveform, NonPositiveSpectrum


def test_normalize_constant_frame():
    # every bin equal: log of 1/513 everywhere
    sp = np.full((4, SP_DIM), 7.5)
    norm = sp_normalize(sp)
    assert np.allclose(norm.log_sp, -np.log(SP_DIM), atol=1e-12)
    assert np.allclose(norm.energy, 7.5 * SP_DIM)


def test_normalize_rows_sum_to_one(rng):
    sp = rng.uniform(0.1, 5.0, size=(20, SP_DIM))
    norm = sp_normalize(sp)
    assert np.allclose(np.exp(norm.log_sp).sum(axis=1), 1.0, atol=1e-9)


def test_normalize_round_trip(rng):
    sp = rng.uniform(1e-4, 10.0, size=(50, SP_DIM))
    back = sp_denormalize(sp_normalize(sp))
    assert np.max(np.abs(back - sp) / sp) < 1e-6


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=1, max_value=8), st.integers(min_value=0, max_value=2**31 - 1))
def test_normalize_round_trip_property(n_frames, seed):
    sp = np.exp(np.random.default_rng(seed).uniform(-12, 3, size=(n_frames, SP_DIM)))
    back = sp_denormalize(sp_normalize(sp))
    assert np.max(np.abs(back - sp) / sp) < 1e-6


def test_normalize_rejects_zero():
    sp = np.ones((3, SP_DIM))
    sp[1, 100] = 0.0
    with pytest.raises(NonPositiveSpectrum):
        sp_normalize(sp)


def test_denormalize_identity_energy(rng):
    log_sp = rng.normal(-6, 1, size=(5, SP_DIM))
    from deepest.dsp.spectrum import NormalizedSpectrum

    norm = NormalizedSpectrum(log_sp=log_sp, energy=np.ones(5))
    assert np.allclose(sp_denormalize(norm), np.exp(log_sp))


def test_denormalize_energy_scaling(rng):
    sp = rng.uniform(0.5, 2.0, size=(6, SP_DIM))
    norm = sp_normalize(sp)
    doubled = sp_denormalize(
        type(norm)(log_sp=norm.log_sp, energy=2.0 * norm.energy)
    )
    assert np.allclose(doubled, 2.0 * sp_denormalize(norm))


def test_mcep_flat_spectrum():
    level = 4.2
    track = mcep(np.full((3, SP_DIM), level))
    # c0 carries the (amplitude-domain) log level, detail coefficients vanish
    assert np.allclose(track.coeffs[:, 0], 0.5 * np.log(level), atol=1e-9)
    assert np.max(np.abs(track.coeffs[:, 1:])) < 1e-6


def test_mcep_scaling_moves_only_c0(rng):
    sp = np.exp(rng.normal(-4, 1.5, size=(5, SP_DIM)))
    k = 3.7
    base = mcep(sp).coeffs
    scaled = mcep(k * sp).coeffs
    assert np.allclose(scaled[:, 0] - base[:, 0], 0.5 * np.log(k), atol=1e-9)
    assert np.max(np.abs(scaled[:, 1:] - base[:, 1:])) < 1e-6


def test_mcep_has_25_coefficients(speech_clip):
    feats = analyze(speech_clip, 16000)
    track = mcep(feats.sp)
    assert track.coeffs.shape == (feats.n_frames, 25)


def test_mcep_reconstruction_correlates(speech_clip):
    feats = analyze(speech_clip, 16000)
    track = mcep(feats.sp)
    rec = mcep_to_log_sp(track)
    target = np.log(feats.sp)
    r = np.corrcoef(rec.ravel(), target.ravel())[0, 1]
    assert r > 0.99


def test_mel_shape(speech_clip):
    vol = mel_with_deltas(speech_clip)
    assert vol.shape == (3, 300, 40)
    # short and long clips both land on 300 frames
    assert mel_with_deltas(speech_clip[:1600]).shape == (3, 300, 40)
    assert mel_with_deltas(np.tile(speech_clip, 5)).shape == (3, 300, 40)


def test_mel_deltas_vanish_on_steady_tone():
    # 400 Hz is hop-synchronous (4 cycles / 10 ms), so steady-state frames
    # are identical and the regression deltas must vanish
    t = np.arange(32000) / 16000
    tone = 0.3 * np.sin(2 * np.pi * 400 * t)
    vol = mel_with_deltas(tone)
    static_range = vol[0].max() - vol[0].min() + 1e-12
    interior = vol[1][5:-5]
    assert np.max(np.abs(interior)) < 1e-3 * static_range


def test_delta_of_delta_equals_delta_delta(speech_clip):
    vol = mel_with_deltas(speech_clip)
    recomputed = _delta(vol[1])
    assert np.allclose(recomputed[2:-2], vol[2][2:-2], atol=1e-6)


def test_mel_empty_raises():
    with pytest.raises(EmptyWaveform):
        mel_with_deltas(np.array([]))
