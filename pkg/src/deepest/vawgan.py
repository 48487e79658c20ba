"""Spectral conversion model: variational encoder, conditional
decoder/generator and Wasserstein critic over 513-dim normalized log
spectral frames, with two-phase training (VAE warm-up, then adversarial).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .errors import (
    DivergedTraining,
    EmptyTrainSet,
    NonFiniteLoss,
    NonFiniteOutput,
    ShapeMismatch,
    UntrainedModel,
)

INPUT_DIM = 513
LATENT_DIM = 128
COND_DIM = 256  # emotional style embedding width
DECODER_INPUT = LATENT_DIM + COND_DIM + 1  # + scalar pitch condition = 385


@dataclass(frozen=True)
class ArchConfig:
    """Layer plan; paddings make the widths land exactly on 513.

    Encoder: 5 conv layers, kernel 7 / stride 3 (513->171->57->19->7->3).
    Decoder: transposed convs with kernels {9,7,7} / stride 3 expanding
    19->57->171->513, then a kernel-1025 stride-1 linear output layer.
    Critic: kernels {7,7,115} / stride 3 collapsing 513->171->57->1.
    """

    enc_channels: tuple[int, ...] = (16, 32, 64, 128, 256)
    enc_kernel: int = 7
    enc_stride: int = 3
    enc_padding: int = 3
    dec_base_channels: int = 64
    dec_channels: tuple[int, ...] = (32, 16, 8, 1)
    dec_kernels: tuple[int, ...] = (9, 7, 7, 1025)
    dec_strides: tuple[int, ...] = (3, 3, 3, 1)
    dec_paddings: tuple[int, ...] = (3, 2, 2, 512)
    disc_channels: tuple[int, ...] = (16, 32, 64)
    disc_kernels: tuple[int, ...] = (7, 7, 115)
    disc_strides: tuple[int, ...] = (3, 3, 3)
    disc_paddings: tuple[int, ...] = (2, 2, 29)
    leaky_slope: float = 0.2

    @staticmethod
    def tiny() -> "ArchConfig":
        """Reduced channels for fast tests; widths and contracts unchanged."""
        return ArchConfig(
            enc_channels=(4, 4, 8, 8, 16),
            dec_base_channels=8,
            dec_channels=(8, 4, 2, 1),
            dec_kernels=(9, 7, 7, 65),
            dec_paddings=(3, 2, 2, 32),
            disc_channels=(4, 4, 8),
        )


@dataclass
class TrainConfig:
    epochs: int = 45
    vae_epochs: int = 15
    batch_size: int = 256
    learning_rate: float = 1e-5
    lambda_rec: float = 1.0
    lambda_adv: float = 0.01
    n_critic: int = 5
    gradient_penalty: float = 10.0
    seed: int = 0


@dataclass(frozen=True)
class LatentCode:
    mu: np.ndarray
    log_var: np.ndarray
    sample: np.ndarray


@dataclass
class TrainingBatch:
    frames: np.ndarray  # (B, 513) normalized log-SP
    phi: np.ndarray     # (B, 256)
    f0: np.ndarray      # (B, 1) scaled log-f0, 0 when unvoiced


class Encoder(nn.Module):
    def __init__(self, arch: ArchConfig):
        super().__init__()
        layers = []
        in_ch = 1
        width = INPUT_DIM
        for out_ch in arch.enc_channels:
            layers += [
                nn.Conv1d(in_ch, out_ch, arch.enc_kernel, arch.enc_stride, arch.enc_padding),
                nn.LeakyReLU(arch.leaky_slope),
            ]
            width = (width + 2 * arch.enc_padding - arch.enc_kernel) // arch.enc_stride + 1
            in_ch = out_ch
        self.conv = nn.Sequential(*layers)
        self.out_width = width
        self.head = nn.Linear(in_ch * width, 2 * LATENT_DIM)

    def forward(self, x: torch.Tensor):
        h = self.conv(x.unsqueeze(1))
        stats = self.head(h.flatten(1))
        return stats[:, :LATENT_DIM], stats[:, LATENT_DIM:]


class Decoder(nn.Module):
    def __init__(self, arch: ArchConfig):
        super().__init__()
        self.base_width = 19
        self.fc = nn.Linear(DECODER_INPUT, arch.dec_base_channels * self.base_width)
        self.act = nn.LeakyReLU(arch.leaky_slope)
        blocks = []
        in_ch = arch.dec_base_channels
        for i, out_ch in enumerate(arch.dec_channels):
            k, s, p = arch.dec_kernels[i], arch.dec_strides[i], arch.dec_paddings[i]
            last = i == len(arch.dec_channels) - 1
            if s > 1:
                blocks.append(nn.ConvTranspose1d(in_ch, out_ch, k, s, p))
            else:
                blocks.append(nn.Conv1d(in_ch, out_ch, k, s, p))
            if not last:
                blocks.append(nn.LeakyReLU(arch.leaky_slope))
            in_ch = out_ch
        self.blocks = nn.Sequential(*blocks)

    def forward(self, z, phi, f0):
        h = self.act(self.fc(torch.cat([z, phi, f0], dim=1)))
        h = h.view(len(z), -1, self.base_width)
        return self.blocks(h).squeeze(1)


class Critic(nn.Module):
    def __init__(self, arch: ArchConfig):
        super().__init__()
        layers = []
        in_ch = 1
        width = INPUT_DIM
        for i, out_ch in enumerate(arch.disc_channels):
            k, s, p = arch.disc_kernels[i], arch.disc_strides[i], arch.disc_paddings[i]
            layers += [nn.Conv1d(in_ch, out_ch, k, s, p), nn.LeakyReLU(arch.leaky_slope)]
            width = (width + 2 * p - k) // s + 1
            in_ch = out_ch
        self.conv = nn.Sequential(*layers)
        self.head = nn.Linear(in_ch * width, 1)

    def forward(self, x: torch.Tensor):
        h = self.conv(x.unsqueeze(1))
        return self.head(h.flatten(1)).squeeze(-1)


@dataclass
class VCModel:
    encoder: Encoder
    decoder: Decoder
    critic: Critic
    arch: ArchConfig
    train_config: TrainConfig | None = None
    f0_log_range: tuple[float, float] = (np.log(60.0), np.log(420.0))
    training_log: list[dict] = field(default_factory=list)
    trained: bool = False
    train_emotions: tuple[str, ...] = ()

    def require_trained(self):
        if not self.trained:
            raise UntrainedModel("conversion model has not been trained")

    def scale_f0(self, f0: np.ndarray) -> np.ndarray:
        """ln(f0) min-max scaled to [0, 1] over the training range; 0 stays 0."""
        lo, hi = self.f0_log_range
        out = np.zeros_like(np.asarray(f0, dtype=np.float64))
        voiced = f0 > 0
        out[voiced] = np.clip((np.log(f0[voiced]) - lo) / max(hi - lo, 1e-9), 0.0, 1.0)
        return out


def build_model(arch: ArchConfig | None = None, seed: int = 0) -> VCModel:
    arch = arch or ArchConfig()
    torch.manual_seed(seed)
    return VCModel(encoder=Encoder(arch), decoder=Decoder(arch), critic=Critic(arch), arch=arch)


def _as_tensor(x, dim: int, name: str) -> torch.Tensor:
    arr = torch.as_tensor(np.asarray(x), dtype=torch.float32)
    if arr.ndim == 1:
        arr = arr.unsqueeze(0)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ShapeMismatch(f"{name}: expected (B, {dim}), got {tuple(arr.shape)}")
    return arr


def encode(model: VCModel, x, training: bool = False,
           generator: torch.Generator | None = None) -> LatentCode:
    """Latent posterior of spectral frames; samples in training mode,
    returns the mean deterministically at inference."""
    xt = _as_tensor(x, INPUT_DIM, "encoder input")
    model.encoder.eval()
    with torch.no_grad():
        mu, log_var = model.encoder(xt)
        if training:
            eps = torch.randn(mu.shape, generator=generator)
            sample = mu + torch.exp(0.5 * log_var) * eps
        else:
            sample = mu
    return LatentCode(mu=mu.numpy().astype(np.float64),
                      log_var=log_var.numpy().astype(np.float64),
                      sample=sample.numpy().astype(np.float64))


def decode(model: VCModel, z, phi, f0) -> np.ndarray:
    """x = G(z, phi, f0); conditioning concatenated to width 385."""
    zt = _as_tensor(z, LATENT_DIM, "latent z")
    pt = _as_tensor(phi, COND_DIM, "style phi")
    ft = _as_tensor(f0, 1, "f0 condition")
    if not (len(zt) == len(pt) == len(ft)):
        raise ShapeMismatch("batch sizes of z, phi, f0 differ")
    model.decoder.eval()
    with torch.no_grad():
        out = model.decoder(zt, pt, ft)
    arr = out.numpy().astype(np.float64)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteOutput("decoder produced non-finite frames")
    return arr


def discriminate(model: VCModel, x) -> np.ndarray:
    """Unbounded critic scores (no squashing)."""
    xt = _as_tensor(x, INPUT_DIM, "critic input")
    if not torch.all(torch.isfinite(xt)):
        raise NonFiniteOutput("critic input contains non-finite values")
    model.critic.eval()
    with torch.no_grad():
        return model.critic(xt).numpy().astype(np.float64)


# ---------------------------------------------------------------------------
# Losses


def _kl_term(mu: torch.Tensor, log_var: torch.Tensor) -> torch.Tensor:
    return torch.mean(-0.5 * torch.sum(1 + log_var - mu**2 - torch.exp(log_var), dim=1))


def _gradient_penalty(critic: Critic, real: torch.Tensor, fake: torch.Tensor,
                      generator: torch.Generator | None = None) -> torch.Tensor:
    eps = torch.rand(len(real), 1, generator=generator)
    mixed = (eps * real + (1 - eps) * fake).requires_grad_(True)
    scores = critic(mixed)
    grads, = torch.autograd.grad(scores, mixed, grad_outputs=torch.ones_like(scores),
                                 create_graph=True)
    return torch.mean((grads.norm(2, dim=1) - 1.0) ** 2)


def loss_terms(model: VCModel, batch: TrainingBatch,
               generator: torch.Generator | None = None) -> dict:
    """All four objective terms on one batch (floats, inference pass)."""
    x = _as_tensor(batch.frames, INPUT_DIM, "frames")
    phi = _as_tensor(batch.phi, COND_DIM, "phi")
    f0 = _as_tensor(batch.f0, 1, "f0")

    mu, log_var = model.encoder(x)
    eps = torch.randn(mu.shape, generator=generator)
    z = mu + torch.exp(0.5 * log_var) * eps
    recon_x = model.decoder(z, phi, f0)

    kl = _kl_term(mu, log_var)
    recon = torch.mean((recon_x - x) ** 2)
    score_real = model.critic(x)
    score_fake = model.critic(recon_x)
    gp = _gradient_penalty(model.critic, x, recon_x.detach(), generator)
    adv_d = torch.mean(score_fake) - torch.mean(score_real) + \
        (model.train_config.gradient_penalty if model.train_config else 10.0) * gp
    adv_g = -torch.mean(score_fake)

    out = {"kl": float(kl.detach()), "recon": float(recon.detach()),
           "adv_g": float(adv_g.detach()), "adv_d": float(adv_d.detach())}
    for term, value in out.items():
        if not np.isfinite(value):
            raise NonFiniteLoss(term)
    return out


# ---------------------------------------------------------------------------
# Training


def build_frame_pool(utterance_records) -> tuple[TrainingBatch, tuple[float, float]]:
    """Pool (normalized log-SP frame, per-utterance phi, raw f0) rows.

    ``utterance_records`` yields (log_sp (T,513), f0 (T,), phi (256,)).
    Returns the pooled arrays (f0 still in Hz) plus the voiced log-f0
    range used for conditioning scale.
    """
    frames, phis, f0s = [], [], []
    for log_sp, f0, phi in utterance_records:
        frames.append(np.asarray(log_sp, dtype=np.float64))
        f0 = np.asarray(f0, dtype=np.float64)
        f0s.append(f0)
        phis.append(np.tile(np.asarray(phi, dtype=np.float64), (len(f0), 1)))
    if not frames:
        raise EmptyTrainSet("no training utterances")
    frames = np.concatenate(frames)
    phis = np.concatenate(phis)
    f0 = np.concatenate(f0s)
    voiced = f0[f0 > 0]
    if voiced.size:
        rng = (float(np.log(voiced.min())), float(np.log(voiced.max())))
        if rng[1] - rng[0] < 1e-6:
            rng = (rng[0] - 0.5, rng[1] + 0.5)
    else:
        rng = (np.log(60.0), np.log(420.0))
    return TrainingBatch(frames=frames, phi=phis, f0=f0[:, None]), rng


def train(records, config: TrainConfig | None = None, arch: ArchConfig | None = None,
          train_emotions: tuple[str, ...] = (), progress: bool = False) -> VCModel:
    """Two-phase optimization of the encoder/decoder/critic triple.

    Phase 1 (epochs 1..vae_epochs): kl + lambda_rec * recon.
    Phase 2: per iteration, n_critic critic steps on the Wasserstein loss
    with gradient penalty, then one generator step on the full objective.
    RMSProp, lr 1e-5, batch 256, 45 epochs by default.
    """
    config = config or TrainConfig()
    records = list(records)
    if not records:
        raise EmptyTrainSet("no training utterances")

    pool, f0_range = build_frame_pool(records)
    n = len(pool.frames)

    torch.manual_seed(config.seed)
    model = build_model(arch, seed=config.seed)
    model.train_config = config
    model.f0_log_range = f0_range
    model.train_emotions = tuple(train_emotions)

    x_all = torch.from_numpy(pool.frames).float()
    phi_all = torch.from_numpy(pool.phi).float()
    f0_scaled = model.scale_f0(pool.f0.ravel())[:, None]
    f0_all = torch.from_numpy(f0_scaled).float()

    gen_params = list(model.encoder.parameters()) + list(model.decoder.parameters())
    opt_g = torch.optim.RMSprop(gen_params, lr=config.learning_rate)
    opt_d = torch.optim.RMSprop(model.critic.parameters(), lr=config.learning_rate)
    rng = np.random.default_rng(config.seed)
    noise_gen = torch.Generator().manual_seed(config.seed)

    def vae_losses(idx):
        x, phi, f0 = x_all[idx], phi_all[idx], f0_all[idx]
        mu, log_var = model.encoder(x)
        eps = torch.randn(mu.shape, generator=noise_gen)
        z = mu + torch.exp(0.5 * log_var) * eps
        recon_x = model.decoder(z, phi, f0)
        return _kl_term(mu, log_var), torch.mean((recon_x - x) ** 2), recon_x, x

    header = {
        "epochs": config.epochs,
        "vae_epochs": config.vae_epochs,
        "batch": config.batch_size,
        "lr": config.learning_rate,
        "lambda_rec": config.lambda_rec,
        "lambda_adv": config.lambda_adv,
        "n_critic": config.n_critic,
        "gradient_penalty": config.gradient_penalty,
        "seed": config.seed,
        "n_frames": n,
    }
    model.training_log.append({"header": header})

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        batches = [order[s : s + config.batch_size] for s in range(0, n, config.batch_size)]
        sums = {"kl": 0.0, "recon": 0.0, "adv_g": 0.0, "adv_d": 0.0}
        counts = {"kl": 0, "recon": 0, "adv_g": 0, "adv_d": 0}
        phase = 1 if epoch <= config.vae_epochs else 2

        if phase == 1:
            for idx in batches:
                opt_g.zero_grad()
                kl, recon, _, _ = vae_losses(idx)
                loss = kl + config.lambda_rec * recon
                loss.backward()
                opt_g.step()
                sums["kl"] += float(kl.detach()); counts["kl"] += 1
                sums["recon"] += float(recon.detach()); counts["recon"] += 1
        else:
            b = 0
            while b < len(batches):
                for _ in range(config.n_critic):
                    if b >= len(batches):
                        break
                    idx = batches[b]; b += 1
                    opt_d.zero_grad()
                    with torch.no_grad():
                        _, _, fake, real = vae_losses(idx)
                    score_real = model.critic(real)
                    score_fake = model.critic(fake)
                    gp = _gradient_penalty(model.critic, real, fake, noise_gen)
                    adv_d = score_fake.mean() - score_real.mean() + config.gradient_penalty * gp
                    adv_d.backward()
                    opt_d.step()
                    sums["adv_d"] += float(adv_d.detach()); counts["adv_d"] += 1
                if b >= len(batches):
                    break
                idx = batches[b]; b += 1
                opt_g.zero_grad()
                kl, recon, fake, _ = vae_losses(idx)
                adv_g = -model.critic(fake).mean()
                loss = kl + config.lambda_rec * recon + config.lambda_adv * adv_g
                loss.backward()
                opt_g.step()
                sums["kl"] += float(kl.detach()); counts["kl"] += 1
                sums["recon"] += float(recon.detach()); counts["recon"] += 1
                sums["adv_g"] += float(adv_g.detach()); counts["adv_g"] += 1

        row = {"epoch": epoch, "phase": phase}
        for term in sums:
            row[term] = sums[term] / counts[term] if counts[term] else float("nan")
        for term in ("kl", "recon"):
            if counts[term] and not np.isfinite(row[term]):
                raise DivergedTraining(f"non-finite {term} at epoch {epoch}")
        model.training_log.append(row)
        if progress:
            print(f"[vc] epoch {epoch} phase {phase}: " +
                  " ".join(f"{k}={row[k]:.4f}" for k in sums if counts[k]))

    model.trained = True
    for module in (model.encoder, model.decoder, model.critic):
        module.eval()
    return model


def gradient_check(model: VCModel, batch: TrainingBatch, n_params: int = 10,
                   step: float = 1e-4, seed: int = 0,
                   terms: str = "kl+recon") -> float:
    """Max relative error of autograd vs central differences on kl + recon
    (or a single term via ``terms`` in {"kl", "recon", "kl+recon"}).

    Runs in float64 with the reparameterization noise frozen so both
    sides evaluate the same deterministic objective. Central differences
    are only a valid reference where the objective is locally smooth, so
    picks whose half-step estimate disagrees with the full-step one (an
    activation kink inside the probe interval) are redrawn.
    """
    enc = model.encoder.double()
    dec = model.decoder.double()
    x = torch.as_tensor(np.asarray(batch.frames), dtype=torch.float64)
    phi = torch.as_tensor(np.asarray(batch.phi), dtype=torch.float64)
    f0 = torch.as_tensor(np.asarray(batch.f0), dtype=torch.float64)
    eps = torch.randn(len(x), LATENT_DIM, generator=torch.Generator().manual_seed(seed),
                      dtype=torch.float64)

    def objective():
        mu, log_var = enc(x)
        z = mu + torch.exp(0.5 * log_var) * eps
        recon_x = dec(z, phi, f0)
        kl = _kl_term(mu, log_var)
        recon = torch.mean((recon_x - x) ** 2)
        if terms == "kl":
            return kl
        if terms == "recon":
            return recon
        return kl + recon

    params = [p for p in list(enc.parameters()) + list(dec.parameters()) if p.requires_grad]
    for p in params:
        p.grad = None
    objective().backward()

    flat = [(p, i) for p in params for i in range(0, p.numel(), max(1, p.numel() // 3))]
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(flat))

    def central(p, i, h):
        orig = float(p.view(-1)[i])
        p.view(-1)[i] = orig + h
        up = float(objective())
        p.view(-1)[i] = orig - h
        down = float(objective())
        p.view(-1)[i] = orig
        return (up - down) / (2 * h)

    grad_sq = sum(float((p.grad**2).sum()) for p in params if p.grad is not None)
    grad_scale = float(np.sqrt(grad_sq / sum(p.numel() for p in params)))
    # differences at this step cannot resolve gradients far below the
    # objective's cancellation noise; such picks carry no information
    magnitude_floor = max(1e-5 * grad_scale, 1e-12)

    max_rel = 0.0
    checked = 0
    with torch.no_grad():
        for k in order:
            if checked >= n_params:
                break
            p, i = flat[k]
            analytic = float(p.grad.view(-1)[i]) if p.grad is not None else 0.0
            numeric = central(p, i, step)
            confirm = central(p, i, step / 2)
            scale = max(abs(numeric), abs(confirm), 1e-8)
            if abs(numeric - confirm) / scale > 3e-5:
                continue  # kink inside the interval: reference invalid here
            if max(abs(numeric), abs(analytic)) < magnitude_floor:
                continue
            denom = max(abs(numeric), abs(analytic))
            max_rel = max(max_rel, abs(numeric - analytic) / denom)
            checked += 1
    enc.float()
    dec.float()
    return max_rel


# ---------------------------------------------------------------------------
# Checkpointing


def save_checkpoint(model: VCModel, ckpt_dir: str | Path) -> None:
    model.require_trained()
    ckpt_dir = Path(ckpt_dir)
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "encoder": model.encoder.state_dict(),
            "decoder": model.decoder.state_dict(),
            "critic": model.critic.state_dict(),
        },
        ckpt_dir / "weights.pt",
    )
    meta = {
        "arch": asdict(model.arch),
        "train_config": asdict(model.train_config) if model.train_config else None,
        "f0_log_range": list(model.f0_log_range),
        "train_emotions": list(model.train_emotions),
        "latent_dim": LATENT_DIM,
        "cond_dim": COND_DIM,
        "input_dim": INPUT_DIM,
    }
    (ckpt_dir / "config.json").write_text(json.dumps(meta, indent=2))
    write_training_log_csv(model, ckpt_dir / "training_log.csv")


def write_training_log_csv(model: VCModel, path: str | Path) -> None:
    rows = [r for r in model.training_log if "epoch" in r]
    header = next((r["header"] for r in model.training_log if "header" in r), {})
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
        writer = csv.writer(fh)
        writer.writerow(["epoch", "kl", "recon", "adv_g", "adv_d"])
        for r in rows:
            writer.writerow([r["epoch"], r["kl"], r["recon"], r["adv_g"], r["adv_d"]])


def load_checkpoint(ckpt_dir: str | Path) -> VCModel:
    ckpt_dir = Path(ckpt_dir)
    meta = json.loads((ckpt_dir / "config.json").read_text())
    arch_dict = meta["arch"]
    for key, val in arch_dict.items():
        if isinstance(val, list):
            arch_dict[key] = tuple(val)
    arch = ArchConfig(**arch_dict)
    model = build_model(arch)
    state = torch.load(ckpt_dir / "weights.pt", weights_only=True)
    model.encoder.load_state_dict(state["encoder"])
    model.decoder.load_state_dict(state["decoder"])
    model.critic.load_state_dict(state["critic"])
    if meta.get("train_config"):
        model.train_config = TrainConfig(**meta["train_config"])
    model.f0_log_range = tuple(meta["f0_log_range"])
    model.train_emotions = tuple(meta.get("train_emotions", ()))
    model.trained = True
    for module in (model.encoder, model.decoder, model.critic):
        module.eval()
    return model
