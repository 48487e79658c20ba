import numpy as np
import pytest

from deepest.synthetic import build_corpus, synth_utterance


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """2 speakers x 3 emotions x 10 clips, ingested."""
    root = tmp_path_factory.mktemp("corpus")
    index = build_corpus(root, speakers=("s01", "s02"),
                         emotions=("neutral", "happy", "sad"),
                         clips_per_emotion=10, duration=0.5)
    return root, index


@pytest.fixture(scope="session")
def speech_clip():
    return synth_utterance("neutral", "s01", "0042", duration=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tiny_ser():
    """Quickly trained 4-class descriptor for contract tests."""
    from deepest.ser import SERConfig, train_ser

    dataset = [
        (synth_utterance(emo, "s01", f"{i:04d}", 0.5), emo)
        for emo in ("neutral", "happy", "sad", "angry")
        for i in range(1, 7)
    ]
    return train_ser(dataset, SERConfig(epochs=3, batch_size=8, seed=0))


@pytest.fixture(scope="session")
def tiny_vc():
    """Reduced-channel conversion model trained through both phases."""
    from deepest.dsp import analyze, sp_normalize
    from deepest.vawgan import ArchConfig, TrainConfig, train

    rng = np.random.default_rng(3)
    phis = {e: rng.normal(0.0, 1.0, 256) for e in ("neutral", "happy", "sad")}
    records = []
    for emo in ("neutral", "happy", "sad"):
        for i in range(1, 5):
            feats = analyze(synth_utterance(emo, "s01", f"{i:04d}", 0.4), 16000)
            records.append((sp_normalize(feats.sp).log_sp, feats.f0, phis[emo]))
    config = TrainConfig(epochs=4, vae_epochs=3, batch_size=128, learning_rate=5e-4, seed=0)
    return train(records, config, arch=ArchConfig.tiny(), train_emotions=("neutral", "happy", "sad"))
