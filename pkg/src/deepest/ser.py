"""Emotion descriptor: a 3-D CNN + BLSTM + attention classifier whose
attention-pooled 256-dim activation serves as the utterance-level
emotional style embedding."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .dsp.spectrum import mel_with_deltas
from .errors import EmptyCorpus, EmptyReferenceSet, EmptyWaveform, InsufficientClasses, UntrainedModel

EMBEDDING_DIM = 256
DEFAULT_CLASSES = ("angry", "happy", "neutral", "sad")


@dataclass(frozen=True)
class EmotionEmbedding:
    phi: np.ndarray  # (256,)
    source: str = "single_utterance"  # or "reference_mean"
    emotion_hint: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "phi", np.asarray(self.phi, dtype=np.float64))
        if self.phi.shape != (EMBEDDING_DIM,):
            raise ValueError(f"embedding must have dim {EMBEDDING_DIM}, got {self.phi.shape}")
        if not np.all(np.isfinite(self.phi)):
            raise ValueError("non-finite embedding")


@dataclass
class SERConfig:
    epochs: int = 50
    learning_rate: float = 1e-4
    batch_size: int = 16
    val_fraction: float = 0.1
    early_stop_train_acc: float = 0.995
    dropout: float = 0.2
    cnn_channels: tuple[int, int] = (8, 16)
    lstm_hidden: int = 128
    seed: int = 0


class EmotionDescriptorNet(nn.Module):
    """(B, 3, 300, 40) feature volumes -> logits + 256-dim embedding.

    The (static, delta, delta-delta) axis is treated as the depth of a
    3-D convolution; the BLSTM summarizes time and a single-head additive
    attention pools it into the utterance-level feature.
    """

    def __init__(self, n_classes: int = 4, cnn_channels=(8, 16), lstm_hidden: int = 128,
                 n_mels: int = 40, dropout: float = 0.2):
        super().__init__()
        c1, c2 = cnn_channels
        self.conv1 = nn.Conv3d(1, c1, kernel_size=3, padding=1)
        self.conv2 = nn.Conv3d(c1, c2, kernel_size=3, padding=1)
        self.pool = nn.MaxPool3d(kernel_size=(1, 2, 2))
        self.act = nn.ReLU()

        feat_per_step = c2 * 3 * (n_mels // 4)
        self.blstm = nn.LSTM(feat_per_step, lstm_hidden, batch_first=True, bidirectional=True)
        emb = 2 * lstm_hidden
        self.attn_proj = nn.Linear(emb, lstm_hidden)
        self.attn_score = nn.Linear(lstm_hidden, 1, bias=False)
        self.dropout = nn.Dropout(dropout)
        self.classifier = nn.Linear(emb, n_classes)

    def forward(self, x: torch.Tensor):
        # x: (B, 3, T, M) -> conv over (depth=3, time, mel)
        h = x.unsqueeze(1)
        h = self.pool(self.act(self.conv1(h)))
        h = self.pool(self.act(self.conv2(h)))
        b, c, d, t, m = h.shape
        h = h.permute(0, 3, 1, 2, 4).reshape(b, t, c * d * m)
        h, _ = self.blstm(h)

        scores = self.attn_score(torch.tanh(self.attn_proj(h))).squeeze(-1)
        weights = torch.softmax(scores, dim=1)
        phi = torch.sum(weights.unsqueeze(-1) * h, dim=1)

        logits = self.classifier(self.dropout(phi))
        return logits, phi, weights


@dataclass
class SERModel:
    net: EmotionDescriptorNet
    class_labels: tuple[str, ...]
    config: SERConfig
    trained: bool = False
    history: list[dict] = field(default_factory=list)

    def require_trained(self):
        if not self.trained:
            raise UntrainedModel("descriptor has not been trained")


def _features(waveform: np.ndarray) -> torch.Tensor:
    vol = mel_with_deltas(np.asarray(waveform, dtype=np.float64))
    return torch.from_numpy(vol).float()


def train_ser(dataset, config: SERConfig | None = None,
              class_labels: tuple[str, ...] | None = None,
              progress: bool = False) -> SERModel:
    """Train the descriptor on (waveform, label) pairs.

    Cross-entropy on utterance labels; per-epoch train/validation accuracy
    is kept in ``model.history``. Needs at least 2 emotion classes.
    """
    config = config or SERConfig()
    dataset = list(dataset)
    if not dataset:
        raise EmptyCorpus("no training clips")
    labels = sorted({lab for _, lab in dataset}) if class_labels is None else list(class_labels)
    if len(labels) < 2:
        raise InsufficientClasses(f"need >= 2 emotion classes, got {len(labels)}")
    label_idx = {lab: i for i, lab in enumerate(labels)}

    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)

    feats = torch.stack([_features(w) for w, _ in dataset])
    targets = torch.tensor([label_idx[lab] for _, lab in dataset], dtype=torch.long)

    # stratified validation tail, deterministic in the seed
    order = rng.permutation(len(dataset))
    n_val = int(round(config.val_fraction * len(dataset)))
    val_idx = order[:n_val]
    train_idx = order[n_val:]

    net = EmotionDescriptorNet(
        n_classes=len(labels),
        cnn_channels=config.cnn_channels,
        lstm_hidden=config.lstm_hidden,
        dropout=config.dropout,
    )
    optimizer = torch.optim.Adam(net.parameters(), lr=config.learning_rate)
    loss_fn = nn.CrossEntropyLoss()

    history = []
    for epoch in range(1, config.epochs + 1):
        net.train()
        perm = train_idx[rng.permutation(len(train_idx))]
        total_loss, n_correct = 0.0, 0
        for start in range(0, len(perm), config.batch_size):
            batch = perm[start : start + config.batch_size]
            x, y = feats[batch], targets[batch]
            optimizer.zero_grad()
            logits, _, _ = net(x)
            loss = loss_fn(logits, y)
            loss.backward()
            optimizer.step()
            total_loss += float(loss.detach()) * len(batch)
            n_correct += int((logits.argmax(dim=1) == y).sum())
        train_acc = n_correct / len(perm)

        net.eval()
        with torch.no_grad():
            if len(val_idx):
                logits, _, _ = net(feats[val_idx])
                val_acc = float((logits.argmax(dim=1) == targets[val_idx]).float().mean())
            else:
                val_acc = float("nan")
        row = {
            "epoch": epoch,
            "train_loss": total_loss / len(perm),
            "train_acc": train_acc,
            "val_acc": val_acc,
        }
        history.append(row)
        if progress:
            print(f"[ser] epoch {epoch}: loss {row['train_loss']:.4f} "
                  f"train_acc {train_acc:.3f} val_acc {val_acc:.3f}")
        if train_acc >= config.early_stop_train_acc:
            break

    net.eval()
    return SERModel(net=net, class_labels=tuple(labels), config=config,
                    trained=True, history=history)


def _forward_single(model: SERModel, waveform: np.ndarray):
    model.require_trained()
    if np.asarray(waveform).size == 0:
        raise EmptyWaveform("empty waveform")
    model.net.eval()
    with torch.no_grad():
        logits, phi, weights = model.net(_features(waveform).unsqueeze(0))
    return logits[0], phi[0], weights[0]


def embed(model: SERModel, waveform: np.ndarray) -> EmotionEmbedding:
    """Deterministic utterance-level emotional feature (inference mode)."""
    _, phi, _ = _forward_single(model, waveform)
    return EmotionEmbedding(phi=phi.numpy().astype(np.float64))


def attention_weights(model: SERModel, waveform: np.ndarray) -> np.ndarray:
    _, _, weights = _forward_single(model, waveform)
    return weights.numpy().astype(np.float64)


def classify(model: SERModel, waveform: np.ndarray) -> np.ndarray:
    """Probability vector over model.class_labels (sums to 1)."""
    logits, _, _ = _forward_single(model, waveform)
    return torch.softmax(logits, dim=0).numpy().astype(np.float64)


def mean_embedding(model: SERModel, waveforms, emotion_hint: str | None = None) -> EmotionEmbedding:
    """Arithmetic mean of per-utterance embeddings (the reference style)."""
    waveforms = list(waveforms)
    if not waveforms:
        raise EmptyReferenceSet("reference set is empty")
    acc = np.zeros(EMBEDDING_DIM)
    for w in waveforms:
        acc += embed(model, w).phi
    return EmotionEmbedding(phi=acc / len(waveforms), source="reference_mean",
                            emotion_hint=emotion_hint)


def save_checkpoint(model: SERModel, ckpt_dir: str | Path) -> None:
    model.require_trained()
    ckpt_dir = Path(ckpt_dir)
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    torch.save(model.net.state_dict(), ckpt_dir / "weights.pt")
    meta = {
        "class_labels": list(model.class_labels),
        "embedding_dim": EMBEDDING_DIM,
        "frontend": {"mel_bands": 40, "window_ms": 25, "hop_ms": 10, "frames": 300},
        "config": {
            "epochs": model.config.epochs,
            "learning_rate": model.config.learning_rate,
            "batch_size": model.config.batch_size,
            "cnn_channels": list(model.config.cnn_channels),
            "lstm_hidden": model.config.lstm_hidden,
            "dropout": model.config.dropout,
            "seed": model.config.seed,
        },
        "history": model.history,
    }
    (ckpt_dir / "config.json").write_text(json.dumps(meta, indent=2))


def load_checkpoint(ckpt_dir: str | Path) -> SERModel:
    ckpt_dir = Path(ckpt_dir)
    meta = json.loads((ckpt_dir / "config.json").read_text())
    cfg = meta["config"]
    config = SERConfig(
        epochs=cfg["epochs"],
        learning_rate=cfg["learning_rate"],
        batch_size=cfg["batch_size"],
        cnn_channels=tuple(cfg["cnn_channels"]),
        lstm_hidden=cfg["lstm_hidden"],
        dropout=cfg["dropout"],
        seed=cfg["seed"],
    )
    net = EmotionDescriptorNet(
        n_classes=len(meta["class_labels"]),
        cnn_channels=config.cnn_channels,
        lstm_hidden=config.lstm_hidden,
        dropout=config.dropout,
    )
    net.load_state_dict(torch.load(ckpt_dir / "weights.pt", weights_only=True))
    net.eval()
    return SERModel(net=net, class_labels=tuple(meta["class_labels"]), config=config,
                    trained=True, history=meta.get("history", []))
