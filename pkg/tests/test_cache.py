import json

import numpy as np

from deepest.dsp import analyze, read_features, write_features, feature_cache_path


def test_cache_round_trip(tmp_path, speech_clip):
    feats = analyze(speech_clip, 16000)
    path = feature_cache_path(tmp_path, "s01_neutral_0042")
    write_features(path, "s01_neutral_0042", feats)

    utt_id, loaded = read_features(path)
    assert utt_id == "s01_neutral_0042"
    assert np.array_equal(loaded.f0, feats.f0)
    assert np.array_equal(loaded.sp, feats.sp)
    assert np.array_equal(loaded.ap, feats.ap)
    assert loaded.frame_period == feats.frame_period
    assert loaded.fft_size == feats.fft_size


def test_cache_header_is_json_line(tmp_path, speech_clip):
    feats = analyze(speech_clip, 16000)
    path = feature_cache_path(tmp_path, "x")
    write_features(path, "x", feats)
    with open(path, "rb") as fh:
        header = json.loads(fh.readline())
    assert header["id"] == "x"
    assert header["T"] == feats.n_frames
    assert header["sp_dim"] == 513
    assert header["fft_size"] == 1024
    assert header["frame_period"] == 5.0
