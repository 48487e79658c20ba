import numpy as np
import pytest

from deepest.dsp import f0_statistics
from deepest.errors import NoVoicedFrames


def test_constant_contour_degenerate():
    f0 = np.full(50, np.exp(3.0))
    stats = f0_statistics([f0], scope=("s01", "neutral"))
    assert abs(stats.mean_logf0 - 3.0) < 1e-12
    assert stats.std_logf0 < 1e-8
    assert stats.degenerate
    assert stats.voiced_frames == 50


def test_two_frame_hand_arithmetic():
    # ln f0 = {4, 6}: mean 5, population std 1
    f0 = np.exp(np.array([4.0, 6.0]))
    stats = f0_statistics([f0])
    assert abs(stats.mean_logf0 - 5.0) < 1e-12
    assert abs(stats.std_logf0 - 1.0) < 1e-12
    assert not stats.degenerate


def test_unvoiced_frames_excluded():
    contour = np.array([0.0, np.exp(4.0), 0.0, np.exp(6.0), 0.0])
    stats = f0_statistics([contour])
    assert stats.voiced_frames == 2
    assert abs(stats.mean_logf0 - 5.0) < 1e-12


def test_pooling_across_utterances():
    a = np.exp(np.array([4.0]))
    b = np.exp(np.array([6.0]))
    stats = f0_statistics([a, b])
    assert abs(stats.mean_logf0 - 5.0) < 1e-12


def test_all_unvoiced_raises():
    with pytest.raises(NoVoicedFrames):
        f0_statistics([np.zeros(100)])
    with pytest.raises(NoVoicedFrames):
        f0_statistics([np.array([0.0, 120.0])])  # single voiced frame
