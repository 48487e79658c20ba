import numpy as np
import pytest

from deepest.errors import (
    EmptyCorpus,
    EmptyReferenceSet,
    EmptyWaveform,
    InsufficientClasses,
    UntrainedModel,
)
from deepest.ser import (
    EmotionEmbedding,
    SERModel,
    attention_weights,
    classify,
    embed,
    load_checkpoint,
    mean_embedding,
    save_checkpoint,
    train_ser,
)
from deepest.synthetic import synth_utterance


def test_embedding_dim_for_any_length(tiny_ser):
    for dur in (0.2, 0.8, 3.5):
        clip = synth_utterance("happy", "s01", "0001", dur)
        e = embed(tiny_ser, clip)
        assert e.phi.shape == (256,)
        assert np.all(np.isfinite(e.phi))


def test_embed_deterministic(tiny_ser, speech_clip):
    a = embed(tiny_ser, speech_clip)
    b = embed(tiny_ser, speech_clip)
    assert np.array_equal(a.phi, b.phi)


def test_attention_weights_sum_to_one(tiny_ser, speech_clip):
    w = attention_weights(tiny_ser, speech_clip)
    assert np.all(w >= 0)
    assert abs(w.sum() - 1.0) < 1e-6


def test_classify_is_distribution(tiny_ser, speech_clip):
    probs = classify(tiny_ser, speech_clip)
    assert probs.shape == (4,)
    assert np.all(probs >= 0)
    assert abs(probs.sum() - 1.0) < 1e-6


def test_mean_embedding_of_one(tiny_ser, speech_clip):
    single = mean_embedding(tiny_ser, [speech_clip])
    direct = embed(tiny_ser, speech_clip)
    assert np.allclose(single.phi, direct.phi)
    assert single.source == "reference_mean"


def test_mean_embedding_midpoint(tiny_ser):
    a = synth_utterance("happy", "s01", "0001", 0.5)
    b = synth_utterance("happy", "s01", "0002", 0.5)
    mid = mean_embedding(tiny_ser, [a, b]).phi
    expected = 0.5 * (embed(tiny_ser, a).phi + embed(tiny_ser, b).phi)
    assert np.allclose(mid, expected, atol=1e-12)


def test_mean_embedding_matches_bruteforce_sum(tiny_ser):
    clips = [synth_utterance("sad", "s01", f"{i:04d}", 0.4) for i in range(1, 9)]
    got = mean_embedding(tiny_ser, clips).phi
    brute = sum(embed(tiny_ser, c).phi for c in clips) / len(clips)
    assert np.max(np.abs(got - brute)) < 1e-9


def test_mean_embedding_permutation_invariant(tiny_ser):
    clips = [synth_utterance("sad", "s01", f"{i:04d}", 0.4) for i in range(1, 5)]
    fwd = mean_embedding(tiny_ser, clips).phi
    rev = mean_embedding(tiny_ser, clips[::-1]).phi
    assert np.allclose(fwd, rev, atol=1e-12)


def test_train_errors():
    with pytest.raises(EmptyCorpus):
        train_ser([])
    clips = [(synth_utterance("sad", "s01", f"{i:04d}", 0.3), "sad") for i in range(4)]
    with pytest.raises(InsufficientClasses):
        train_ser(clips)


def test_untrained_model_rejected(tiny_ser):
    untrained = SERModel(net=tiny_ser.net, class_labels=tiny_ser.class_labels,
                         config=tiny_ser.config, trained=False)
    with pytest.raises(UntrainedModel):
        embed(untrained, np.zeros(1000))


def test_empty_inputs(tiny_ser):
    with pytest.raises(EmptyWaveform):
        embed(tiny_ser, np.array([]))
    with pytest.raises(EmptyReferenceSet):
        mean_embedding(tiny_ser, [])


def test_embedding_type_validates_dim():
    with pytest.raises(ValueError):
        EmotionEmbedding(phi=np.zeros(255))


def test_checkpoint_round_trip(tiny_ser, tmp_path, speech_clip):
    save_checkpoint(tiny_ser, tmp_path / "ser")
    loaded = load_checkpoint(tmp_path / "ser")
    assert loaded.class_labels == tiny_ser.class_labels
    assert np.array_equal(embed(loaded, speech_clip).phi, embed(tiny_ser, speech_clip).phi)


def test_history_logged(tiny_ser):
    assert tiny_ser.history
    assert {"epoch", "train_loss", "train_acc", "val_acc"} <= set(tiny_ser.history[0])
