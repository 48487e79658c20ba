"""Command-line entry point binding the pipeline stages together.

Every command takes ``--seed`` and ``--config`` (a JSON file of default
overrides; explicit flags win over the file). All built-in defaults are
the published operating points of the pipeline.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import corpus as corpus_mod
from . import convert as convert_mod
from . import evaluate as evaluate_mod
from . import ser as ser_mod
from . import vawgan
from .audio import read_wav
from .dsp import analyze, read_features, write_features, feature_cache_path, sp_normalize
from .errors import DeepestError

DEFAULT_VC_EMOTIONS = ("neutral", "happy", "sad")


def _fail(exc: DeepestError):
    click.echo(f"error code={exc.code} message={exc}", err=True)
    sys.exit(1)


def _load_config(ctx, config_path):
    if not config_path:
        return {}
    overrides = json.loads(Path(config_path).read_text())
    for name, value in overrides.items():
        key = name.replace("-", "_")
        if key in ctx.params and ctx.get_parameter_source(key).name == "DEFAULT":
            ctx.params[key] = value
    return overrides


def common_options(fn):
    fn = click.option("--seed", type=int, default=0, show_default=True,
                      help="Seed for every stochastic step.")(fn)
    fn = click.option("--config", "config_path", type=click.Path(exists=True),
                      default=None, help="JSON file overriding defaults.")(fn)
    return fn


@click.group()
def main():
    """Emotional style transfer pipeline."""


@main.command()
@click.option("--root", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--splits", default="300,30,20", show_default=True,
              help="train,reference,test counts per (speaker, emotion).")
@click.option("--language", default="en", show_default=True)
@click.option("--genders", "genders_path", type=click.Path(exists=True), default=None,
              help="JSON mapping speaker_id -> gender tag.")
@common_options
@click.pass_context
def prepare(ctx, root, out_path, splits, language, genders_path, seed, config_path):
    """Scan a corpus tree, assign deterministic splits, write a manifest."""
    _load_config(ctx, config_path)
    splits = ctx.params["splits"]
    try:
        counts = tuple(int(x) for x in str(splits).split(","))
        if len(counts) != 3:
            raise click.BadParameter("--splits needs three comma-separated counts")
        index = corpus_mod.ingest(root, language=ctx.params["language"])
        for problem in index.problems:
            click.echo(f"skipped {problem}", err=True)
        index = corpus_mod.make_splits(index, counts)
        if ctx.params["genders_path"]:
            genders = json.loads(Path(ctx.params["genders_path"]).read_text())
            index = corpus_mod.set_genders(index, genders)
        corpus_mod.save_manifest(index, out_path)
        click.echo(f"wrote {out_path}: {len(index)} utterances, "
                   f"{len(index.speakers)} speakers, splits={counts}")
    except DeepestError as exc:
        _fail(exc)


def _cache_dir(cache):
    return os.environ.get("DEEPEST_CACHE", cache)


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--cache", "cache", required=True, type=click.Path())
@common_options
@click.pass_context
def featurize(ctx, manifest_path, cache, seed, config_path):
    """Extract vocoder features for every manifest utterance into a cache."""
    _load_config(ctx, config_path)
    cache = Path(_cache_dir(cache))
    try:
        index = corpus_mod.load_manifest(manifest_path)
        done = 0
        for u in index.utterances:
            out = feature_cache_path(cache, u.id)
            if out.exists():
                continue
            samples, _ = read_wav(u.audio_path, expect_rate=16000)
            write_features(out, u.id, analyze(samples, 16000))
            done += 1
        click.echo(f"featurized {done} utterances into {cache}")
    except DeepestError as exc:
        _fail(exc)


@main.command("train-ser")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "ckpt", required=True, type=click.Path())
@click.option("--epochs", default=50, show_default=True)
@click.option("--lr", default=1e-4, show_default=True)
@click.option("--batch", default=16, show_default=True)
@click.option("--split", default=None, help="Restrict training to one split.")
@common_options
@click.pass_context
def train_ser_cmd(ctx, manifest_path, ckpt, epochs, lr, batch, split, seed, config_path):
    """Train the emotion descriptor on a labeled corpus."""
    _load_config(ctx, config_path)
    p = ctx.params
    try:
        index = corpus_mod.load_manifest(manifest_path)
        utts = corpus_mod.select(index, split=p["split"])
        dataset = [(read_wav(u.audio_path, expect_rate=16000)[0], u.emotion) for u in utts]
        config = ser_mod.SERConfig(epochs=p["epochs"], learning_rate=p["lr"],
                                   batch_size=p["batch"], seed=p["seed"])
        model = ser_mod.train_ser(dataset, config, progress=True)
        ser_mod.save_checkpoint(model, ckpt)
        last = model.history[-1]
        click.echo(f"saved {ckpt}: {len(model.history)} epochs, "
                   f"train_acc={last['train_acc']:.3f} val_acc={last['val_acc']:.3f}")
    except DeepestError as exc:
        _fail(exc)


@main.command()
@click.option("--ckpt", required=True, type=click.Path(exists=True))
@click.option("--audio", "audio_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@common_options
@click.pass_context
def embed(ctx, ckpt, audio_path, out_path, seed, config_path):
    """Extract the 256-dim emotional style embedding of one clip."""
    _load_config(ctx, config_path)
    try:
        model = ser_mod.load_checkpoint(ckpt)
        samples, _ = read_wav(audio_path, expect_rate=16000)
        embedding = ser_mod.embed(model, samples)
        probs = ser_mod.classify(model, samples)
        Path(out_path).write_text(json.dumps({
            "phi": embedding.phi.tolist(),
            "source": embedding.source,
            "classes": list(model.class_labels),
            "probabilities": probs.tolist(),
        }, indent=2))
        click.echo(f"wrote {out_path} (dim {len(embedding.phi)}, "
                   f"prediction {model.class_labels[int(np.argmax(probs))]})")
    except DeepestError as exc:
        _fail(exc)


@main.command("train-vc")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--cache", required=True, type=click.Path())
@click.option("--ser", "ser_ckpt", required=True, type=click.Path(exists=True))
@click.option("--out", "ckpt", required=True, type=click.Path())
@click.option("--epochs", default=45, show_default=True)
@click.option("--vae-epochs", default=15, show_default=True)
@click.option("--batch", default=256, show_default=True)
@click.option("--lr", default=1e-5, show_default=True)
@click.option("--emotions", default=",".join(DEFAULT_VC_EMOTIONS), show_default=True,
              help="Training emotions (comma separated).")
@click.option("--tiny-arch", is_flag=True, help="Reduced channels for smoke runs.")
@common_options
@click.pass_context
def train_vc(ctx, manifest_path, cache, ser_ckpt, ckpt, epochs, vae_epochs, batch, lr,
             emotions, tiny_arch, seed, config_path):
    """Train the universal spectral conversion model on the train split."""
    _load_config(ctx, config_path)
    p = ctx.params
    cache = Path(_cache_dir(cache))
    try:
        index = corpus_mod.load_manifest(manifest_path)
        ser_model = ser_mod.load_checkpoint(ser_ckpt)
        train_emotions = tuple(e.strip() for e in str(p["emotions"]).split(",") if e.strip())

        records = []
        for emotion in train_emotions:
            for u in corpus_mod.select(index, emotion=emotion, split="train"):
                _, feats = read_features(feature_cache_path(cache, u.id))
                samples, _ = read_wav(u.audio_path, expect_rate=16000)
                phi = ser_mod.embed(ser_model, samples).phi
                records.append((sp_normalize(feats.sp).log_sp, feats.f0, phi))

        config = vawgan.TrainConfig(epochs=p["epochs"], vae_epochs=p["vae_epochs"],
                                    batch_size=p["batch"], learning_rate=p["lr"],
                                    seed=p["seed"])
        arch = vawgan.ArchConfig.tiny() if p["tiny_arch"] else None
        model = vawgan.train(records, config, arch=arch,
                             train_emotions=train_emotions, progress=True)
        vawgan.save_checkpoint(model, ckpt)
        header = model.training_log[0]["header"]
        click.echo(f"saved {ckpt}: epochs={header['epochs']} batch={header['batch']} "
                   f"lr={header['lr']} frames={header['n_frames']}")
    except DeepestError as exc:
        _fail(exc)


@main.command()
@click.option("--ckpt", "vc_ckpt", required=True, type=click.Path(exists=True))
@click.option("--ser", "ser_ckpt", required=True, type=click.Path(exists=True))
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--source-split", default="test", show_default=True)
@click.option("--source-emotion", default="neutral", show_default=True)
@click.option("--target-emotion", required=True)
@click.option("--refs", "refs_split", default="reference", show_default=True,
              help="Split providing the reference style utterances.")
@click.option("--cache", default=None, type=click.Path(),
              help="Feature cache (speeds up F0 statistics).")
@click.option("--out", "out_dir", required=True, type=click.Path())
@common_options
@click.pass_context
def convert(ctx, vc_ckpt, ser_ckpt, manifest_path, source_split, source_emotion,
            target_emotion, refs_split, cache, out_dir, seed, config_path):
    """Convert every source-split utterance toward the target emotion."""
    _load_config(ctx, config_path)
    p = ctx.params
    cache = _cache_dir(p["cache"])
    try:
        index = corpus_mod.load_manifest(manifest_path)
        vc_model = vawgan.load_checkpoint(vc_ckpt)
        ser_model = ser_mod.load_checkpoint(ser_ckpt)
        target = p["target_emotion"]

        requests = []
        for speaker in index.speakers:
            sources = corpus_mod.select(index, speaker=speaker,
                                        emotion=p["source_emotion"], split=p["source_split"])
            refs = corpus_mod.select(index, speaker=speaker, emotion=target,
                                     split=p["refs_split"])
            if not sources or not refs:
                continue
            src_train = corpus_mod.select(index, speaker=speaker,
                                          emotion=p["source_emotion"], split="train")
            stats_src = convert_mod.utterance_f0_stats(
                src_train or sources, scope=(speaker, p["source_emotion"]), cache_dir=cache)
            seen = target in (vc_model.train_emotions or DEFAULT_VC_EMOTIONS)
            if seen:
                tgt_train = corpus_mod.select(index, speaker=speaker, emotion=target,
                                              split="train")
                stats_tgt = convert_mod.utterance_f0_stats(
                    tgt_train or refs, scope=(speaker, target), cache_dir=cache)
                origin = "train_split"
            else:
                stats_tgt = convert_mod.utterance_f0_stats(
                    refs, scope=(speaker, target), cache_dir=cache)
                origin = "reference_set"
            for source in sources:
                requests.append(convert_mod.ConversionRequest(
                    source=source, target_emotion=target, reference_set=refs,
                    vc_model=vc_model, ser_model=ser_model,
                    f0_stats_source=stats_src, f0_stats_target=stats_tgt,
                    target_stats_origin=origin,
                ))
        manifest = convert_mod.batch_convert(requests, out_dir)
        click.echo(f"converted {len(manifest['outputs'])} utterances "
                   f"({len(manifest['errors'])} errors) into {out_dir}")
    except DeepestError as exc:
        _fail(exc)


@main.command()
@click.option("--converted", "converted_dir", required=True, type=click.Path(exists=True))
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--ser", "ser_ckpt", default=None, type=click.Path(exists=True),
              help="Also render the embedding-space analysis with this descriptor.")
@click.option("--embed-split", default="reference", show_default=True)
@common_options
@click.pass_context
def evaluate(ctx, converted_dir, manifest_path, out_dir, ser_ckpt, embed_split,
             seed, config_path):
    """MCD report (CSV + figure), plus optional embedding projections."""
    _load_config(ctx, config_path)
    p = ctx.params
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        index = corpus_mod.load_manifest(manifest_path)
        report = evaluate_mod.mcd_report(converted_dir, index)
        report.to_csv(out_dir / "mcd_report.csv")
        report.render(out_dir / "mcd_report.png")
        for row in sorted(report.rows, key=lambda r: (r.emotion_pair, r.gender)):
            click.echo(f"{row.emotion_pair} [{row.gender}] zero-effort "
                       f"{row.zero_effort:.3f} dB converted {row.converted:.3f} dB "
                       f"(n={row.n_pairs})")

        if p["ser_ckpt"]:
            ser_model = ser_mod.load_checkpoint(p["ser_ckpt"])
            utts = corpus_mod.select(index, split=p["embed_split"])
            embeddings, labels = [], []
            for u in utts:
                samples, _ = read_wav(u.audio_path, expect_rate=16000)
                embeddings.append(ser_mod.embed(ser_model, samples).phi)
                labels.append(u.emotion)
            summary = evaluate_mod.embedding_report(np.array(embeddings), labels,
                                                    out_dir, seed=p["seed"])
            click.echo(f"embedding purity {summary['purity_embeddings']:.3f} "
                       f"(2-D projection {summary['purity_tsne2d']:.3f})")
        click.echo(f"report written to {out_dir}")
    except DeepestError as exc:
        _fail(exc)


@main.command("listen-serve")
@click.option("--data", "data_dir", required=True, type=click.Path())
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8765, show_default=True)
@click.option("--session-config", type=click.Path(exists=True), default=None,
              help="Build one session from this JSON at startup.")
@click.option("--ui", "ui_dir", type=click.Path(exists=True), default=None,
              help="Serve a static rater UI from this directory.")
@common_options
@click.pass_context
def listen_serve(ctx, data_dir, host, port, session_config, ui_dir, seed, config_path):
    """Run the listening-test HTTP service."""
    from .listen import ListeningStudy, create_app
    import uvicorn

    _load_config(ctx, config_path)
    p = ctx.params
    try:
        study = ListeningStudy(p["data_dir"])
        if p["session_config"]:
            session = study.build_session(json.loads(Path(p["session_config"]).read_text()))
            click.echo(f"session {session['session_id']}: {session['n_trials']} trials")
        app = create_app(study, static_dir=p["ui_dir"])
        uvicorn.run(app, host=p["host"], port=p["port"], log_level="warning")
    except DeepestError as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
