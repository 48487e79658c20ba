"""Objective evaluation: MCD report tables grouped by emotion pair and
gender, plus 2-D embedding projections with cluster purity. The report
path writes delimited output (CSV) and rendered figures side by side."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
from sklearn.cluster import KMeans
from sklearn.manifold import TSNE

from .audio import read_wav
from .corpus import CorpusIndex
from .dsp import analyze, mcd, mcep, read_features
from .errors import LabelMismatch, MissingPair, TooFewPoints

PAIR_NAMES = {"happy": "N2H", "sad": "N2S", "angry": "N2A", "surprise": "N2Sur"}


@dataclass
class McdReportRow:
    emotion_pair: str
    gender: str
    zero_effort: float
    converted: float
    n_pairs: int


@dataclass
class McdReport:
    rows: list[McdReportRow] = field(default_factory=list)
    settings: dict = field(default_factory=dict)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("# " + json.dumps(self.settings, sort_keys=True) + "\n")
            writer = csv.writer(fh)
            writer.writerow(["emotion_pair", "gender", "zero_effort_mcd_db",
                             "converted_mcd_db", "n_pairs"])
            for r in sorted(self.rows, key=lambda r: (r.emotion_pair, r.gender)):
                writer.writerow([r.emotion_pair, r.gender,
                                 f"{r.zero_effort:.3f}", f"{r.converted:.3f}", r.n_pairs])

    def render(self, path: str | Path) -> None:
        rows = sorted(self.rows, key=lambda r: (r.emotion_pair, r.gender))
        labels = [f"{r.emotion_pair}\n{r.gender}" for r in rows]
        x = np.arange(len(rows))
        fig, ax = plt.subplots(figsize=(max(4, 1.6 * len(rows)), 3.5))
        ax.bar(x - 0.18, [r.zero_effort for r in rows], width=0.36, label="zero effort")
        ax.bar(x + 0.18, [r.converted for r in rows], width=0.36, label="converted")
        ax.set_xticks(x, labels)
        ax.set_ylabel("MCD [dB]")
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path, dpi=150)
        plt.close(fig)


def _mcep_of_wav(path: str) -> "np.ndarray":
    samples, _ = read_wav(path, expect_rate=16000)
    return mcep(analyze(samples, 16000).sp)


def mcd_report(converted_dir: str | Path, index: CorpusIndex,
               source_emotion: str = "neutral",
               reference_split: str | None = None) -> McdReport:
    """Mean MCD per (emotion pair, gender) over converted/reference pairs.

    Converted files are matched to parallel target-emotion recordings of
    the same speaker by text_id; the zero-effort column aligns the
    unconverted neutral source with the same reference. Pairs are
    DTW-aligned on c1..c24.
    """
    converted_dir = Path(converted_dir)
    by_key = {(u.speaker_id, u.emotion, u.text_id): u for u in index.utterances}

    groups: dict[tuple[str, str], dict[str, list[float]]] = {}
    n_missing = 0
    for wav in sorted(converted_dir.glob("*__to__*.wav")):
        stem = wav.stem
        src_id, target_emotion = stem.split("__to__")
        sidecar = converted_dir / f"{stem}.json"
        if sidecar.exists():
            meta = json.loads(sidecar.read_text())
            speaker, text_id = meta["source_speaker"], meta["source_text_id"]
        else:
            speaker, _, text_id = src_id.split("_")

        reference = by_key.get((speaker, target_emotion, text_id))
        source = by_key.get((speaker, source_emotion, text_id))
        if reference is None or source is None:
            raise MissingPair(text_id, f"(speaker {speaker} -> {target_emotion})")
        if reference_split is not None and reference.split != reference_split:
            continue

        gender = reference.gender or "all"
        pair = PAIR_NAMES.get(target_emotion, f"N2{target_emotion[:1].upper()}")
        cell = groups.setdefault((pair, gender), {"zero": [], "conv": []})

        ref_mcep = _mcep_of_wav(reference.audio_path)
        feat_cache = converted_dir / f"{stem}.feat"
        if feat_cache.exists():
            _, feats = read_features(feat_cache)
            conv_mcep = mcep(feats.sp)
        else:
            conv_mcep = _mcep_of_wav(str(wav))
        cell["conv"].append(mcd(conv_mcep, ref_mcep, aligned=False))
        cell["zero"].append(mcd(_mcep_of_wav(source.audio_path), ref_mcep, aligned=False))

    report = McdReport(settings={
        "alignment": "dtw", "coefficients": "c1..c24", "order": 24, "alpha": 0.42,
        "source_emotion": source_emotion,
    })
    for (pair, gender), cell in sorted(groups.items()):
        report.rows.append(McdReportRow(
            emotion_pair=pair, gender=gender,
            zero_effort=float(np.mean(cell["zero"])),
            converted=float(np.mean(cell["conv"])),
            n_pairs=len(cell["conv"]),
        ))
    return report


def tsne_project(embeddings: np.ndarray, labels, plot_path: str | Path | None = None,
                 perplexity: float = 10.0, seed: int = 0,
                 max_iter: int = 1000) -> np.ndarray:
    """2-D t-SNE of utterance embeddings, optionally rendered to a file."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    labels = list(labels)
    n = len(embeddings)
    if n < 5:
        raise TooFewPoints(f"need at least 5 points, got {n}")
    if perplexity >= n:
        raise TooFewPoints(f"perplexity {perplexity} requires more than {n} points")
    tsne = TSNE(n_components=2, perplexity=perplexity, random_state=seed,
                max_iter=max_iter, init="pca")
    coords = tsne.fit_transform(embeddings)

    if plot_path is not None:
        fig, ax = plt.subplots(figsize=(5, 4))
        for lab in sorted(set(labels)):
            mask = np.array([l == lab for l in labels])
            ax.scatter(coords[mask, 0], coords[mask, 1], s=18, alpha=0.8, label=str(lab))
        ax.legend(frameon=False, fontsize=8)
        ax.set_xticks([])
        ax.set_yticks([])
        fig.tight_layout()
        fig.savefig(plot_path, dpi=150)
        plt.close(fig)
    return coords


def cluster_purity(points: np.ndarray, labels, k: int | None = None, seed: int = 0) -> float:
    """k-means purity: fraction of points whose cluster's majority label
    matches their own (best of 10 restarts, fixed seed)."""
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    distinct = sorted(set(labels.tolist()))
    if k is None:
        k = len(distinct)
    if k != len(distinct):
        raise LabelMismatch(f"k={k} but {len(distinct)} distinct labels")
    if k == 1:
        return 1.0
    km = KMeans(n_clusters=k, n_init=10, random_state=seed)
    assign = km.fit_predict(points)
    total = 0
    for c in range(k):
        members = labels[assign == c]
        if members.size:
            _, counts = np.unique(members, return_counts=True)
            total += counts.max()
    return total / len(labels)


def embedding_report(embeddings: np.ndarray, labels, out_dir: str | Path,
                     perplexity: float = 10.0, seed: int = 0) -> dict:
    """t-SNE plot + purity numbers, written as PNG + CSV."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    coords = tsne_project(embeddings, labels, out_dir / "embedding_tsne.png",
                          perplexity=perplexity, seed=seed)
    purity_hd = cluster_purity(embeddings, labels, seed=seed)
    purity_2d = cluster_purity(coords, labels, seed=seed)
    with open(out_dir / "embedding_clusters.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        writer.writerow(["kmeans_purity_embeddings", f"{purity_hd:.4f}"])
        writer.writerow(["kmeans_purity_tsne2d", f"{purity_2d:.4f}"])
        writer.writerow(["n_points", len(labels)])
    return {"purity_embeddings": purity_hd, "purity_tsne2d": purity_2d,
            "coords": coords}
