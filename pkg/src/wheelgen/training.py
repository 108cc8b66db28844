"""Toy pixel-space denoiser: a small conditional UNet trained with the
standard noise-prediction objective on the synthetic wheel corpus.

Conditioning uses the weighted-sum surrogate: the 216-dim vector
[text embedding | weighted context-image sum | global template embedding]
modulates every block through a FiLM-style projection.  The trained model
is saved as one file embedding its schedule and config.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
import torch
import torch.nn as nn

from .conditioning import DEFAULT_PROMPT, ToyEmbedder, assemble_prompt
from .core import ConceptGroup
from .pipeline import ConditioningBundle, DenoiseSchedule, linear_schedule
from .wheels import CorpusItem

ARTIFACT_VERSION = 1
COND_DIM = 216  # 3 x 72-dim embeddings


class TrainingDivergence(RuntimeError):
    pass


@dataclass(frozen=True)
class ToyTrainConfig:
    canvas: int = 64
    base_channels: int = 16
    emb_dim: int = 96
    steps: int = 1200
    batch_size: int = 24
    lr: float = 2e-3
    cond_dropout: float = 0.15
    seed: int = 0
    log_every: int = 100


def _timestep_embedding(t: torch.Tensor, dim: int) -> torch.Tensor:
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=torch.float32) / half)
    args = t.float()[:, None] * freqs[None, :]
    return torch.cat([torch.sin(args), torch.cos(args)], dim=-1)


class _Block(nn.Module):
    def __init__(self, c_in: int, c_out: int, emb_dim: int):
        super().__init__()
        self.conv1 = nn.Conv2d(c_in, c_out, 3, padding=1)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1)
        self.emb = nn.Linear(emb_dim, c_out * 2)
        self.norm = nn.GroupNorm(4, c_out)
        self.act = nn.SiLU()

    def forward(self, x, emb):
        h = self.act(self.conv1(x))
        scale, shift = self.emb(emb)[:, :, None, None].chunk(2, dim=1)
        h = self.norm(h) * (1.0 + scale) + shift
        return self.act(self.conv2(h))


class ToyUNet(nn.Module):
    def __init__(self, base: int = 24, emb_dim: int = 128):
        super().__init__()
        self.time_mlp = nn.Sequential(
            nn.Linear(64, emb_dim), nn.SiLU(), nn.Linear(emb_dim, emb_dim)
        )
        self.cond_mlp = nn.Sequential(
            nn.Linear(COND_DIM, emb_dim), nn.SiLU(), nn.Linear(emb_dim, emb_dim)
        )
        self.inc = _Block(1, base, emb_dim)
        self.down1 = _Block(base, base * 2, emb_dim)
        self.down2 = _Block(base * 2, base * 4, emb_dim)
        self.mid = _Block(base * 4, base * 4, emb_dim)
        self.up1 = _Block(base * 4 + base * 2, base * 2, emb_dim)
        self.up2 = _Block(base * 2 + base, base, emb_dim)
        self.out = nn.Conv2d(base, 1, 3, padding=1)
        self.pool = nn.AvgPool2d(2)
        self.upsample = nn.Upsample(scale_factor=2, mode="nearest")

    def forward(self, x, t, cond):
        emb = self.time_mlp(_timestep_embedding(t, 64)) + self.cond_mlp(cond)
        h0 = self.inc(x, emb)
        h1 = self.down1(self.pool(h0), emb)
        h2 = self.down2(self.pool(h1), emb)
        m = self.mid(h2, emb)
        u1 = self.up1(torch.cat([self.upsample(m), h1], dim=1), emb)
        u2 = self.up2(torch.cat([self.upsample(u1), h0], dim=1), emb)
        return self.out(u2)


def bundle_to_cond_vector(cond: Optional[ConditioningBundle], dim: int = 72) -> np.ndarray:
    """Flatten a bundle into the fixed conditioning layout the toy net eats."""
    if cond is None:
        return np.zeros(COND_DIM)
    text = cond.prompt_embedding if cond.prompt_embedding is not None else np.zeros(dim)
    mixed = cond.mixed_context(dim)
    glob = cond.global_image if cond.global_image is not None else np.zeros(dim)
    return np.concatenate([text, mixed, glob])


class ToyDenoiserBackend:
    """DenoiserBackend over a trained ToyUNet; deterministic at inference."""

    parallel_safe = False
    x0_range = (0.0, 1.0)  # training pixel domain; sampler clamps x0 to it

    def __init__(self, model: ToyUNet, schedule: DenoiseSchedule, canvas: int,
                 config: ToyTrainConfig, backend_id: str = "toy"):
        self.id = backend_id
        self.canvas = canvas
        self.model = model.eval()
        self.schedule = schedule
        self.config = config

    def _cond_tensor(self, cond):
        return torch.from_numpy(bundle_to_cond_vector(cond).astype(np.float32))

    def predict_noise(self, x: np.ndarray, t: int, cond: ConditioningBundle) -> np.ndarray:
        with torch.no_grad():
            xt = torch.from_numpy(np.asarray(x, dtype=np.float32))[None, None]
            tt = torch.tensor([t], dtype=torch.long)
            cv = self._cond_tensor(cond)[None]
            eps = self.model(xt, tt, cv)
        return eps[0, 0].numpy().astype(np.float64)

    def predict_noise_batch(self, xs: np.ndarray, t: int, conds: Sequence) -> np.ndarray:
        with torch.no_grad():
            xt = torch.from_numpy(np.asarray(xs, dtype=np.float32))[:, None]
            tt = torch.full((xs.shape[0],), t, dtype=torch.long)
            cv = torch.stack([self._cond_tensor(c) for c in conds])
            eps = self.model(xt, tt, cv)
        return eps[:, 0].numpy().astype(np.float64)

    def save(self, path: str) -> None:
        torch.save(
            {
                "format_version": ARTIFACT_VERSION,
                "backend_id": self.id,
                "canvas": self.canvas,
                "betas": self.schedule.betas,
                "config": asdict(self.config),
                "state_dict": self.model.state_dict(),
            },
            path,
        )


def load_toy_backend(path: str) -> ToyDenoiserBackend:
    blob = torch.load(path, map_location="cpu", weights_only=False)
    if blob.get("format_version") != ARTIFACT_VERSION:
        raise ValueError(f"unsupported artifact version {blob.get('format_version')}")
    config = ToyTrainConfig(**blob["config"])
    model = ToyUNet(base=config.base_channels, emb_dim=config.emb_dim)
    model.load_state_dict(blob["state_dict"])
    return ToyDenoiserBackend(
        model, DenoiseSchedule(blob["betas"]), blob["canvas"], config,
        backend_id=blob["backend_id"],
    )


# ---------------------------------------------------------------------------
# training


def _training_conditioning(items: list[CorpusItem], embedder: ToyEmbedder):
    """Precompute per-item text embeddings, image embeddings, and same-label
    candidate pools."""
    img_embs = np.stack([embedder.embed(it.image) for it in items])
    text_embs = []
    for it in items:
        groups = [ConceptGroup(keyword=lb) for lb in it.labels] or [ConceptGroup(keyword="plain")]
        text_embs.append(embedder.embed_text(assemble_prompt(groups, DEFAULT_PROMPT)))
    by_label: dict[str, list[int]] = {}
    for i, it in enumerate(items):
        for lb in it.labels:
            by_label.setdefault(lb, []).append(i)
    pools = []
    for i, it in enumerate(items):
        pool = sorted({j for lb in it.labels for j in by_label[lb]} or {i})
        pools.append(np.array(pool))
    return img_embs, np.stack(text_embs), pools


def train_toy_denoiser(
    items: list[CorpusItem],
    schedule: Optional[DenoiseSchedule] = None,
    config: ToyTrainConfig = ToyTrainConfig(),
) -> tuple[ToyDenoiserBackend, dict]:
    """Train the toy denoiser; returns (backend, history with losses)."""
    if not items:
        raise ValueError("corpus must be nonempty")
    canvas = items[0].image.shape[0]
    if canvas != config.canvas:
        raise ValueError(f"corpus canvas {canvas} != config canvas {config.canvas}")
    if schedule is None:
        schedule = linear_schedule(200)

    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x7A]))
    torch.manual_seed(config.seed)
    embedder = ToyEmbedder()
    img_embs, text_embs, pools = _training_conditioning(items, embedder)
    data = torch.from_numpy(
        np.stack([it.image for it in items]).astype(np.float32)
    )[:, None]
    abar = torch.from_numpy(schedule.alpha_bars.astype(np.float32))

    model = ToyUNet(base=config.base_channels, emb_dim=config.emb_dim)
    opt = torch.optim.Adam(model.parameters(), lr=config.lr)
    losses = []
    n = len(items)
    for step in range(config.steps):
        idx = rng.integers(0, n, size=config.batch_size)
        # assemble conditioning vectors with dropout for unconditional use
        conds = np.zeros((config.batch_size, COND_DIM), dtype=np.float32)
        for b, i in enumerate(idx):
            if rng.random() > config.cond_dropout:
                conds[b, :72] = text_embs[i]
            if rng.random() > config.cond_dropout:
                n_ctx = int(rng.integers(1, 3))
                picks = rng.choice(pools[i], size=min(n_ctx, pools[i].size), replace=False)
                weights = rng.uniform(0.3, 1.0, size=picks.size)
                conds[b, 72:144] = (img_embs[picks] * weights[:, None]).sum(axis=0)
            if rng.random() > config.cond_dropout:
                j = i if rng.random() < 0.5 else int(rng.choice(pools[i]))
                conds[b, 144:] = img_embs[j]

        x0 = data[idx]
        t = torch.from_numpy(rng.integers(1, schedule.T + 1, size=config.batch_size))
        ab = abar[t - 1][:, None, None, None]
        eps = torch.randn(x0.shape)
        xt = torch.sqrt(ab) * x0 + torch.sqrt(1.0 - ab) * eps
        pred = model(xt, t, torch.from_numpy(conds))
        loss = torch.mean((pred - eps) ** 2)
        if not torch.isfinite(loss):
            raise TrainingDivergence(
                f"loss became non-finite at step {step} (last finite: "
                f"{losses[-1] if losses else 'n/a'})"
            )
        opt.zero_grad()
        loss.backward()
        opt.step()
        losses.append(float(loss.detach()))

    backend = ToyDenoiserBackend(model, schedule, canvas, config)
    history = {
        "losses": losses,
        "initial_loss": float(np.mean(losses[:20])) if losses else None,
        "final_loss": float(np.mean(losses[-20:])) if losses else None,
    }
    return backend, history


def sample_batch(
    backend: ToyDenoiserBackend,
    conds: Sequence[Optional[ConditioningBundle]],
    seeds: Sequence[int],
) -> np.ndarray:
    """Ancestral sampling with clamped-x0 posterior means, batched over
    outputs for speed; matches the pipeline's update for this backend.

    Per-output noise streams are drawn from independent generators, so each
    output depends only on its own seed.
    """
    schedule = backend.schedule
    canvas = backend.canvas
    lo, hi = backend.x0_range
    rngs = [np.random.default_rng(np.random.SeedSequence([int(s), 0])) for s in seeds]
    x = np.stack([r.standard_normal((canvas, canvas)) for r in rngs])
    for t in range(schedule.T, 0, -1):
        eps = backend.predict_noise_batch(x, t, conds)
        beta = schedule.beta(t)
        ab = schedule.alpha_bar(t)
        ab_prev = schedule.alpha_bar(t - 1)
        x0 = np.clip((x - np.sqrt(1.0 - ab) * eps) / np.sqrt(ab), lo, hi)
        mean = (np.sqrt(ab_prev) * beta * x0
                + np.sqrt(schedule.alpha(t)) * (1.0 - ab_prev) * x) / (1.0 - ab)
        if t > 1:
            var = beta * (1.0 - ab_prev) / (1.0 - ab)
            z = np.stack([r.standard_normal((canvas, canvas)) for r in rngs])
            x = mean + np.sqrt(var) * z
        else:
            x = mean
    return np.clip(x, 0.0, 1.0)
