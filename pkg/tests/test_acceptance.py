"""Acceptance suite: one test per gate, each printing its pass line.

Run with ``pytest tests/test_acceptance.py -v -s``. The toy end-to-end
(the slowest gate) trains the full descriptor + conversion stack on a
synthetic corpus at reduced channel counts.
"""

import hashlib
import time

import numpy as np
import pytest
import torch

from deepest import corpus
from deepest.convert import ConversionRequest, convert_f0, convert_utterance
from deepest.dsp import (
    analyze,
    dtw_align,
    f0_statistics,
    mcd,
    mcep,
    sp_denormalize,
    sp_normalize,
    synthesize,
)
from deepest.dsp.align import MCD_CONSTANT, path_cost
from deepest.dsp.spectrum import MCEPTrack
from deepest.evaluate import cluster_purity
from deepest.listen import mos_interval
from deepest.ser import SERConfig, embed, train_ser
from deepest.synthetic import synth_utterance
from deepest.vawgan import (
    ArchConfig,
    TrainConfig,
    TrainingBatch,
    _kl_term,
    build_model,
    decode,
    discriminate,
    encode,
    gradient_check,
    train,
)

EMOTIONS_SER = ("neutral", "happy", "sad", "angry")
EMOTIONS_VC = ("neutral", "happy", "sad")


def _report(name: str, detail: str = ""):
    print(f"[ACCEPT] {name}: PASS {detail}".rstrip())


# -------------------------------------------------------------------------
# 1. DSP oracle suite (< 1 min)


def test_dsp_oracle_suite():
    t0 = time.time()
    rng = np.random.default_rng(0)

    # normalization round trip < 1e-6 relative
    sp = np.exp(rng.uniform(-12, 3, size=(40, 513)))
    back = sp_denormalize(sp_normalize(sp))
    rel = np.max(np.abs(back - sp) / sp)
    assert rel < 1e-6

    # MCD identity and hand-derived unit-c1 constant
    track = MCEPTrack(coeffs=rng.normal(size=(6, 25)))
    assert mcd(track, track) == 0.0
    a = MCEPTrack(coeffs=np.zeros((1, 25)))
    b = MCEPTrack(coeffs=np.concatenate([[0.0, 1.0], np.zeros(23)])[None, :])
    unit = mcd(a, b, aligned=True)
    assert abs(unit - 6.1418) < 1e-4
    assert abs(unit - MCD_CONSTANT) < 1e-12

    # DTW equals brute-force enumeration, >= 100 random cases, lengths <= 6
    from test_align import brute_force_min_cost

    n_cases = 0
    while n_cases < 100:
        ta, tb = rng.integers(1, 7, size=2)
        x = MCEPTrack(coeffs=rng.normal(size=(ta, 5)), order=4)
        y = MCEPTrack(coeffs=rng.normal(size=(tb, 5)), order=4)
        ref_cost, _ = brute_force_min_cost(x, y)
        assert abs(path_cost(x, y, dtw_align(x, y)) - ref_cost) < 1e-9
        n_cases += 1

    elapsed = time.time() - t0
    assert elapsed < 60
    _report("dsp-oracle-suite",
            f"(round-trip rel {rel:.1e}, unit-c1 {unit:.4f} dB, {n_cases} DTW cases, {elapsed:.1f}s)")


# -------------------------------------------------------------------------
# 2. Analysis/synthesis round trip (< 2 min)


def test_vocoder_round_trip_gate():
    t0 = time.time()
    clips = [
        ("neutral", "0101"), ("happy", "0102"), ("sad", "0103"),
        ("angry", "0104"), ("surprise", "0105"), ("neutral", "0106"),
    ]
    worst = 0.0
    for emotion, text in clips:
        x = synth_utterance(emotion, "s01", text, duration=2.0)
        feats = analyze(x, 16000)
        re = analyze(synthesize(feats), 16000)
        d = mcd(mcep(feats.sp), mcep(re.sp), aligned=False)
        worst = max(worst, d)
        assert d < 1.5, f"{emotion}/{text}: {d:.3f} dB"
    elapsed = time.time() - t0
    assert elapsed < 120
    _report("vocoder-round-trip", f"({len(clips)} clips, worst {worst:.3f} dB < 1.5, {elapsed:.1f}s)")


# -------------------------------------------------------------------------
# 3. Architecture shape suite (< 1 min)


def test_architecture_shapes(tiny_ser):
    t0 = time.time()
    model = build_model(seed=0)  # full-size layer plan
    rng = np.random.default_rng(0)
    for b in (1, 7, 256):
        x = rng.normal(-6, 1, size=(b, 513))
        code = encode(model, x)
        assert code.mu.shape == (b, 128)
        out = decode(model, code.mu, rng.normal(size=(b, 256)), rng.random((b, 1)))
        assert out.shape == (b, 513)
        assert discriminate(model, x).shape == (b,)
    for dur in (0.3, 1.0):
        e = embed(tiny_ser, synth_utterance("happy", "s01", "0001", dur))
        assert e.phi.shape == (256,)
    elapsed = time.time() - t0
    assert elapsed < 60
    _report("architecture-shapes", f"(B in {{1,7,256}}; embedding dim 256, {elapsed:.1f}s)")


# -------------------------------------------------------------------------
# 4. Numerical-optimization checks (< 2 min)


def test_numerical_checks():
    t0 = time.time()
    rng = np.random.default_rng(1)

    # closed-form KL vs brute-force per-dimension divergence, 1e-9
    mu = torch.tensor(rng.normal(size=(4, 128)))
    log_var = torch.tensor(rng.normal(scale=0.5, size=(4, 128)))
    brute = float(np.mean(np.sum(
        0.5 * (mu.numpy() ** 2 + np.exp(log_var.numpy()) - 1.0 - log_var.numpy()), axis=1)))
    kl_err = abs(float(_kl_term(mu, log_var)) - brute)
    assert kl_err < 1e-9

    model = build_model(ArchConfig.tiny(), seed=2)
    batch = TrainingBatch(frames=rng.normal(-6, 0.5, (3, 513)),
                          phi=rng.normal(size=(3, 256)), f0=rng.random((3, 1)))
    worst = max(gradient_check(model, batch, terms=t) for t in ("kl", "recon", "kl+recon"))
    assert worst < 1e-3
    elapsed = time.time() - t0
    assert elapsed < 120
    _report("numerical-checks", f"(KL err {kl_err:.1e}, grad err {worst:.1e}, {elapsed:.1f}s)")


# -------------------------------------------------------------------------
# 5. Toy end-to-end (<= 10 min CPU)


@pytest.fixture(scope="module")
def toy_stack():
    """Synthetic corpus at 50 clips/emotion; descriptor on 4 emotions,
    conversion model on 3 (angry stays unseen), reduced channels."""
    t0 = time.time()
    speaker = "s01"
    clips = {
        emotion: [synth_utterance(emotion, speaker, f"{i:04d}", 0.6) for i in range(1, 51)]
        for emotion in EMOTIONS_SER
    }

    ser_model = train_ser(
        [(w, emotion) for emotion in EMOTIONS_SER for w in clips[emotion]],
        SERConfig(epochs=40, batch_size=16, early_stop_train_acc=0.98, seed=0),
    )

    features = {
        emotion: [analyze(w, 16000) for w in clips[emotion]] for emotion in EMOTIONS_VC
    }
    records = []
    for emotion in EMOTIONS_VC:
        for w, feats in zip(clips[emotion], features[emotion]):
            phi = embed(ser_model, w).phi
            records.append((sp_normalize(feats.sp).log_sp, feats.f0, phi))

    vc_model = train(
        records,
        TrainConfig(epochs=12, vae_epochs=8, batch_size=256, learning_rate=1e-3, seed=0),
        arch=ArchConfig.tiny(),
        train_emotions=EMOTIONS_VC,
    )
    return {"clips": clips, "ser": ser_model, "vc": vc_model,
            "build_seconds": time.time() - t0}


def test_toy_ser_accuracy_and_purity(toy_stack):
    ser_model = toy_stack["ser"]
    train_acc = ser_model.history[-1]["train_acc"]
    assert train_acc > 0.9

    embeddings, labels = [], []
    for emotion in EMOTIONS_SER:
        for w in toy_stack["clips"][emotion][:25]:
            embeddings.append(embed(ser_model, w).phi)
            labels.append(emotion)
    purity = cluster_purity(np.array(embeddings), labels, seed=0)
    assert purity > 0.9
    _report("toy-ser", f"(train acc {train_acc:.3f} > 0.9, k-means purity {purity:.3f} > 0.9)")


def test_toy_vc_phase1_recon_halves(toy_stack):
    rows = [r for r in toy_stack["vc"].training_log if "epoch" in r]
    phase1 = [r for r in rows if r["phase"] == 1]
    ratio = phase1[-1]["recon"] / phase1[0]["recon"]
    assert ratio < 0.5
    _report("toy-vc-recon", f"(phase-1 recon ratio {ratio:.3f} < 0.5)")


def test_toy_critic_gap(toy_stack):
    """After the adversarial phase the critic scores real frames above
    reconstructions of the same frames."""
    ser_model, vc_model = toy_stack["ser"], toy_stack["vc"]
    real_scores, fake_scores = [], []
    for emotion in EMOTIONS_VC:
        for w in toy_stack["clips"][emotion][:5]:
            feats = analyze(w, 16000)
            x = sp_normalize(feats.sp).log_sp
            phi = embed(ser_model, w).phi
            code = encode(vc_model, x)
            fake = decode(vc_model, code.mu, np.tile(phi, (len(x), 1)),
                          vc_model.scale_f0(feats.f0)[:, None])
            real_scores.append(np.mean(discriminate(vc_model, x)))
            fake_scores.append(np.mean(discriminate(vc_model, fake)))
    gap = float(np.mean(real_scores) - np.mean(fake_scores))
    assert gap > 0
    _report("toy-critic-gap", f"(mean real - fake = {gap:.2f} > 0)")


def test_toy_one_to_many_and_unseen(toy_stack):
    """One universal checkpoint: the same neutral clip converted toward two
    seen emotions and one unseen emotion, pairwise distinct outputs."""
    ser_model, vc_model = toy_stack["ser"], toy_stack["vc"]
    speaker = "s01"
    source_wav = toy_stack["clips"]["neutral"][0]
    source_stats = f0_statistics([analyze(source_wav, 16000).f0], scope=(speaker, "neutral"))

    outputs = {}
    for target in ("happy", "sad", "angry"):  # angry never entered VC training
        ref_wavs = toy_stack["clips"][target][40:45]
        ref_utts = [
            corpus.Utterance(id=f"{speaker}_{target}_{i}", speaker_id=speaker,
                             emotion=target, text_id=str(i), split="reference",
                             audio_path="", sample_rate=16000, duration=0.6)
            for i in range(len(ref_wavs))
        ]
        target_stats = f0_statistics([analyze(w, 16000).f0 for w in ref_wavs],
                                     scope=(speaker, target))
        request = ConversionRequest(
            source=corpus.Utterance(id=f"{speaker}_neutral_0001", speaker_id=speaker,
                                    emotion="neutral", text_id="0001", split="test",
                                    audio_path="", sample_rate=16000, duration=0.6),
            target_emotion=target, reference_set=ref_utts,
            vc_model=vc_model, ser_model=ser_model,
            f0_stats_source=source_stats, f0_stats_target=target_stats,
        )
        outputs[target] = convert_utterance(request, source_wav, ref_wavs)

    diffs = {}
    names = list(outputs)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            # identical source energy is reused, so log-SP differences track
            # the decoder output exactly
            diffs[f"{a}/{b}"] = float(np.mean(np.abs(
                np.log(outputs[a].features.sp) - np.log(outputs[b].features.sp))))
    assert all(d > 1e-3 for d in diffs.values()), diffs
    src_frames = analyze(source_wav, 16000).n_frames
    assert all(o.features.n_frames == src_frames for o in outputs.values())
    pretty = ", ".join(f"{k} {v:.3f}" for k, v in diffs.items())
    _report("toy-one-to-many", f"(mean |dSP| {pretty}; all > 1e-3; unseen target included)")


def test_toy_same_emotion_stays_closest(toy_stack):
    """Reconstruction sanity: a neutral-to-neutral pass with identical F0
    statistics distorts the source less than any cross-emotion output."""
    ser_model, vc_model = toy_stack["ser"], toy_stack["vc"]
    speaker = "s01"
    source_wav = toy_stack["clips"]["neutral"][3]
    source_feats = analyze(source_wav, 16000)
    source_track = mcep(source_feats.sp)
    source_stats = f0_statistics([source_feats.f0], scope=(speaker, "neutral"))

    distances = {}
    for target in ("neutral", "happy", "sad"):
        ref_wavs = toy_stack["clips"][target][40:43]
        stats_tgt = (source_stats if target == "neutral"
                     else f0_statistics([analyze(w, 16000).f0 for w in ref_wavs],
                                        scope=(speaker, target)))
        request = ConversionRequest(
            source=corpus.Utterance(id=f"{speaker}_neutral_0004", speaker_id=speaker,
                                    emotion="neutral", text_id="0004", split="test",
                                    audio_path="", sample_rate=16000, duration=0.6),
            target_emotion=target,
            reference_set=[corpus.Utterance(id=f"{speaker}_{target}_{i}", speaker_id=speaker,
                                            emotion=target, text_id=str(i), split="reference",
                                            audio_path="", sample_rate=16000, duration=0.6)
                           for i in range(len(ref_wavs))],
            vc_model=vc_model, ser_model=ser_model,
            f0_stats_source=source_stats, f0_stats_target=stats_tgt,
        )
        result = convert_utterance(request, source_wav, ref_wavs)
        distances[target] = mcd(mcep(result.features.sp), source_track, aligned=True)

    assert distances["neutral"] < distances["happy"]
    assert distances["neutral"] < distances["sad"]
    pretty = ", ".join(f"{k} {v:.2f} dB" for k, v in distances.items())
    _report("toy-same-emotion-floor", f"({pretty})")


def test_toy_f0_moment_matching(toy_stack):
    source_wav = toy_stack["clips"]["neutral"][1]
    contour = analyze(source_wav, 16000).f0
    src_stats = f0_statistics([contour])  # exact source stats
    tgt_wavs = toy_stack["clips"]["happy"][:5]
    tgt_stats = f0_statistics([analyze(w, 16000).f0 for w in tgt_wavs])

    converted = convert_f0(contour, src_stats, tgt_stats)
    got = f0_statistics([converted])
    mean_rel = abs(got.mean_logf0 - tgt_stats.mean_logf0) / abs(tgt_stats.mean_logf0)
    std_rel = abs(got.std_logf0 - tgt_stats.std_logf0) / tgt_stats.std_logf0
    assert mean_rel < 0.01
    assert std_rel < 0.01
    _report("toy-f0-moments", f"(mean rel {mean_rel:.2e}, std rel {std_rel:.2e} < 1%)")


def test_toy_budget(toy_stack):
    assert toy_stack["build_seconds"] < 600
    _report("toy-budget", f"({toy_stack['build_seconds']:.0f}s <= 600s)")


# -------------------------------------------------------------------------
# 6. Determinism


def test_determinism_gate(tmp_path, toy_stack):
    from deepest.synthetic import build_corpus

    # identical split manifests
    root = tmp_path / "corpus"
    build_corpus(root, speakers=("s01",), emotions=("neutral", "happy"),
                 clips_per_emotion=4, duration=0.3)
    blobs = []
    for i in range(2):
        index = corpus.make_splits(corpus.ingest(root), counts=(2, 1, 1))
        out = tmp_path / f"manifest_{i}.json"
        corpus.save_manifest(index, out)
        blobs.append(out.read_bytes())
    assert blobs[0] == blobs[1]

    # identical first-epoch training log across two runs
    rng = np.random.default_rng(5)
    records = []
    for i in range(3):
        feats = analyze(synth_utterance("neutral", "s01", f"{i:04d}", 0.3), 16000)
        records.append((sp_normalize(feats.sp).log_sp, feats.f0, rng.normal(size=256)))
    cfg = TrainConfig(epochs=1, vae_epochs=1, batch_size=128, learning_rate=1e-4, seed=3)
    first = [
        [r for r in train(records, cfg, arch=ArchConfig.tiny()).training_log if "epoch" in r][0]
        for _ in range(2)
    ]
    assert first[0]["kl"] == first[1]["kl"]
    assert first[0]["recon"] == first[1]["recon"]

    # identical converted waveform checksums across two runs
    ser_model, vc_model = toy_stack["ser"], toy_stack["vc"]
    source_wav = toy_stack["clips"]["neutral"][2]
    ref_wavs = toy_stack["clips"]["happy"][:3]
    stats_src = f0_statistics([analyze(source_wav, 16000).f0])
    stats_tgt = f0_statistics([analyze(w, 16000).f0 for w in ref_wavs])
    request = ConversionRequest(
        source=corpus.Utterance(id="s01_neutral_0003", speaker_id="s01",
                                emotion="neutral", text_id="0003", split="test",
                                audio_path="", sample_rate=16000, duration=0.6),
        target_emotion="happy",
        reference_set=[corpus.Utterance(id=f"s01_happy_{i}", speaker_id="s01",
                                        emotion="happy", text_id=str(i), split="reference",
                                        audio_path="", sample_rate=16000, duration=0.6)
                       for i in range(3)],
        vc_model=vc_model, ser_model=ser_model,
        f0_stats_source=stats_src, f0_stats_target=stats_tgt)
    checksums = {
        hashlib.sha256(convert_utterance(request, source_wav, ref_wavs)
                       .waveform.tobytes()).hexdigest()
        for _ in range(2)
    }
    assert len(checksums) == 1
    _report("determinism", "(manifests, first-epoch log, conversion checksums)")


# -------------------------------------------------------------------------
# 7. Aggregation oracles


def test_aggregation_oracles():
    # t quantile at 2 dof from the closed-form CDF inversion
    t975 = np.sqrt(2 * 0.95**2 / (1 - 0.95**2))
    expected_half = t975 * np.sqrt(1.0 / 3.0) / np.sqrt(3.0)
    mean, half = mos_interval([5, 5, 4])
    assert abs(mean - 14.0 / 3.0) < 1e-6
    assert abs(half - expected_half) < 1e-6
    assert abs(half - 1.434) < 1e-3

    # preference percentages: sum to 100 and shuffle-invariant
    rng = np.random.default_rng(0)
    choices = ["sysA"] * 3 + ["sysB"] * 1
    for _ in range(5):
        shuffled = list(rng.permutation(choices))
        counts = {s: shuffled.count(s) for s in ("sysA", "sysB")}
        pct = {s: 100.0 * c / len(shuffled) for s, c in counts.items()}
        assert abs(sum(pct.values()) - 100.0) < 1e-9
        assert pct == {"sysA": 75.0, "sysB": 25.0}
    _report("aggregation-oracles", f"(MOS 4.667 +/- {half:.3f}; preferences 75/25)")
