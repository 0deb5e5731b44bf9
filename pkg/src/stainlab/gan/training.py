"""Cycle-consistent adversarial training between unpaired image domains.

Two generators (source->target, target->source), two patch discriminators,
LSGAN objectives, cycle L1 weighted by lambda_cycle, optional identity term.
Discriminators train against a 50-image history buffer of past fakes.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from ..errors import InvalidArgumentError, TrainingDivergedError
from ..autodiff import Adam, Tensor, add, l1_loss, mse_loss, scale, save_checkpoint
from .networks import Discriminator, Generator

LOSS_KEYS = (
    "loss_G_adv",
    "loss_F_adv",
    "loss_cycle_fwd",
    "loss_cycle_bwd",
    "loss_D_s",
    "loss_D_t",
    "loss_identity",
)


@dataclass(frozen=True)
class CycleGanConfig:
    steps: int = 300
    lr: float = 2e-4
    betas: tuple[float, float] = (0.5, 0.999)
    lambda_cycle: float = 10.0
    lambda_identity: float = 0.0
    pool_size: int = 50
    seed: int = 0
    domain: str = "od"  # "od" or "rgb": which space the nets operate in
    base_channels: int = 32
    n_res: int = 4
    log_every: int = 10
    init: str = "default"  # "identity" zeroes the generator heads

    def __post_init__(self):
        if self.steps < 1:
            raise InvalidArgumentError("steps must be >= 1")
        if self.lr <= 0:
            raise InvalidArgumentError("lr must be positive")
        if self.lambda_cycle <= 0:
            raise InvalidArgumentError("lambda_cycle must be > 0")
        if self.lambda_identity < 0:
            raise InvalidArgumentError("lambda_identity must be >= 0")
        if self.pool_size < 1:
            raise InvalidArgumentError("pool_size must be >= 1")
        if self.domain not in ("od", "rgb"):
            raise InvalidArgumentError(f"domain must be 'od' or 'rgb', got {self.domain!r}")
        if self.init not in ("default", "identity"):
            raise InvalidArgumentError(
                f"init must be 'default' or 'identity', got {self.init!r}"
            )


class ImagePool:
    """History buffer of generated images (arrays, no tape).

    Until full, returns what it was given; afterwards, returns a stored
    image half the time and swaps the new one in.
    """

    def __init__(self, size: int = 50, seed: int = 0):
        if size < 1:
            raise InvalidArgumentError("pool size must be >= 1")
        self.size = size
        self.images: list[np.ndarray] = []
        self.rng = np.random.default_rng(np.random.SeedSequence([seed, 17]))

    def query(self, img: np.ndarray) -> np.ndarray:
        img = np.asarray(img)
        if len(self.images) < self.size:
            self.images.append(img.copy())
            return img
        if self.rng.random() < 0.5:
            idx = int(self.rng.integers(0, self.size))
            out = self.images[idx]
            self.images[idx] = img.copy()
            return out
        return img


@dataclass
class TrainState:
    config: CycleGanConfig
    G: Generator          # source -> target
    F: Generator          # target -> source
    D_t: Discriminator    # judges target-domain images
    D_s: Discriminator    # judges source-domain images
    opt_G: Adam
    opt_D_t: Adam
    opt_D_s: Adam
    pool_t: ImagePool
    pool_s: ImagePool
    rng: np.random.Generator
    step: int = 0
    history: list[dict] = field(default_factory=list)
    best_val: float | None = None
    best_step: int | None = None


def init_state(cfg: CycleGanConfig) -> TrainState:
    G = Generator(seed=cfg.seed, base_channels=cfg.base_channels, n_res=cfg.n_res)
    F = Generator(seed=cfg.seed + 1, base_channels=cfg.base_channels, n_res=cfg.n_res)
    if cfg.init == "identity":
        G.zero_head()
        F.zero_head()
    D_t = Discriminator(seed=cfg.seed + 2)
    D_s = Discriminator(seed=cfg.seed + 3)
    return TrainState(
        config=cfg,
        G=G,
        F=F,
        D_t=D_t,
        D_s=D_s,
        opt_G=Adam(G.parameters() + F.parameters(), lr=cfg.lr, betas=cfg.betas),
        opt_D_t=Adam(D_t.parameters(), lr=cfg.lr, betas=cfg.betas),
        opt_D_s=Adam(D_s.parameters(), lr=cfg.lr, betas=cfg.betas),
        pool_t=ImagePool(cfg.pool_size, seed=cfg.seed),
        pool_s=ImagePool(cfg.pool_size, seed=cfg.seed + 1),
        rng=np.random.default_rng(np.random.SeedSequence([cfg.seed, 23])),
    )


def _target(like: Tensor, value: float) -> Tensor:
    return Tensor(np.full(like.shape, value, dtype=like.dtype))


def train_step(state: TrainState, real_s: np.ndarray, real_t: np.ndarray) -> dict:
    """One optimization step on a single unpaired (source, target) batch.

    Inputs are (N, 3, H, W) float arrays in [0, 1].  Returns the loss
    scalars for this step; raises TrainingDivergedError (carrying the
    state) on any non-finite loss.
    """
    cfg = state.config
    xs = Tensor(np.asarray(real_s, dtype=np.float32))
    xt = Tensor(np.asarray(real_t, dtype=np.float32))

    # --- generator phase -------------------------------------------------
    state.opt_G.zero_grad()
    fake_t = state.G(xs)
    rec_s = state.F(fake_t)
    fake_s = state.F(xt)
    rec_t = state.G(fake_s)

    pred_fake_t = state.D_t(fake_t)
    pred_fake_s = state.D_s(fake_s)
    loss_G_adv = mse_loss(pred_fake_t, _target(pred_fake_t, 1.0))
    loss_F_adv = mse_loss(pred_fake_s, _target(pred_fake_s, 1.0))
    loss_cycle_fwd = scale(l1_loss(rec_s, xs), cfg.lambda_cycle)
    loss_cycle_bwd = scale(l1_loss(rec_t, xt), cfg.lambda_cycle)
    total = add(add(loss_G_adv, loss_F_adv), add(loss_cycle_fwd, loss_cycle_bwd))
    if cfg.lambda_identity > 0:
        idt = add(l1_loss(state.G(xt), xt), l1_loss(state.F(xs), xs))
        loss_identity = scale(idt, cfg.lambda_identity)
        total = add(total, loss_identity)
        identity_val = loss_identity.item()
    else:
        identity_val = 0.0
    total.backward()
    state.opt_G.step()
    # D parameters picked up gradients above; each D phase zeroes them
    # before its own backward, so they are never applied.

    fake_t_np = fake_t.data.copy()
    fake_s_np = fake_s.data.copy()

    # --- discriminator phase ---------------------------------------------
    state.opt_D_t.zero_grad()
    hist_t = Tensor(state.pool_t.query(fake_t_np))
    pr = state.D_t(xt)
    pf = state.D_t(hist_t)
    loss_D_t = scale(
        add(mse_loss(pr, _target(pr, 1.0)), mse_loss(pf, _target(pf, 0.0))), 0.5
    )
    loss_D_t.backward()
    state.opt_D_t.step()

    state.opt_D_s.zero_grad()
    hist_s = Tensor(state.pool_s.query(fake_s_np))
    pr = state.D_s(xs)
    pf = state.D_s(hist_s)
    loss_D_s = scale(
        add(mse_loss(pr, _target(pr, 1.0)), mse_loss(pf, _target(pf, 0.0))), 0.5
    )
    loss_D_s.backward()
    state.opt_D_s.step()

    state.step += 1
    losses = {
        "step": state.step,
        "loss_G_adv": loss_G_adv.item(),
        "loss_F_adv": loss_F_adv.item(),
        "loss_cycle_fwd": loss_cycle_fwd.item(),
        "loss_cycle_bwd": loss_cycle_bwd.item(),
        "loss_D_s": loss_D_s.item(),
        "loss_D_t": loss_D_t.item(),
        "loss_identity": identity_val,
    }
    if any(not math.isfinite(v) for v in losses.values()):
        bad = [k for k, v in losses.items() if not math.isfinite(v)]
        raise TrainingDivergedError(
            f"non-finite losses at step {state.step}: {bad}", state=state
        )
    state.history.append(losses)
    return losses


def _load_domain_batch(
    arrays: Sequence[np.ndarray], idx: int
) -> np.ndarray:
    arr = arrays[idx]
    return arr[None].transpose(0, 3, 1, 2)


def train(
    cfg: CycleGanConfig,
    source: Sequence[np.ndarray],
    target: Sequence[np.ndarray],
    metrics_path: str | Path | None = None,
    callback: Callable[[dict], None] | None = None,
    val_score: Callable[[Generator], float] | None = None,
) -> TrainState:
    """Run cfg.steps optimization steps over unpaired (H, W, 3) arrays in
    [0, 1], already converted into the configured domain.

    Every cfg.log_every steps (and at the last step) a metrics line is
    appended to metrics_path as JSON.  When val_score is given it is
    evaluated on G at the same cadence and the returned state's G carries
    the best-scoring weights seen (standard checkpoint selection; with
    unpaired data and a batch of one the adversarial updates drift, so the
    last step is rarely the best one).  F and the discriminators keep
    their final weights.
    """
    if not source or not target:
        raise InvalidArgumentError("both domains need at least one patch")
    state = init_state(cfg)
    fh = None
    best_weights: list[np.ndarray] | None = None
    if metrics_path is not None:
        metrics_path = Path(metrics_path)
        metrics_path.parent.mkdir(parents=True, exist_ok=True)
        fh = metrics_path.open("w")
    try:
        for _ in range(cfg.steps):
            i = int(state.rng.integers(0, len(source)))
            j = int(state.rng.integers(0, len(target)))
            losses = train_step(
                state, _load_domain_batch(source, i), _load_domain_batch(target, j)
            )
            logged = state.step % cfg.log_every == 0 or state.step == cfg.steps
            if logged and val_score is not None:
                v = float(val_score(state.G))
                losses["val_score"] = v
                if state.best_val is None or v > state.best_val:
                    state.best_val = v
                    state.best_step = state.step
                    best_weights = [p.data.copy() for p in state.G.parameters()]
            if fh is not None and logged:
                fh.write(json.dumps(losses, sort_keys=True) + "\n")
                fh.flush()
            if callback is not None:
                callback(losses)
    finally:
        if fh is not None:
            fh.close()
    if best_weights is not None:
        for param, arr in zip(state.G.parameters(), best_weights):
            param.data[...] = arr
    return state


def cycle_loss_total(entry: dict) -> float:
    return entry["loss_cycle_fwd"] + entry["loss_cycle_bwd"]


def save_state(state: TrainState, path: str | Path) -> Path:
    """Persist all four networks and run metadata to one checkpoint."""
    tensors: dict[str, np.ndarray] = {}
    for prefix, net in (
        ("G", state.G), ("F", state.F), ("D_t", state.D_t), ("D_s", state.D_s)
    ):
        for name, param in net.named_parameters().items():
            tensors[f"{prefix}.{name}"] = param.data
    meta = {"step": state.step, "config": asdict(state.config)}
    meta["config"]["betas"] = list(state.config.betas)
    if state.best_step is not None:
        meta["best_step"] = state.best_step
        meta["best_val"] = state.best_val
    return save_checkpoint(path, tensors, meta)


def load_generator(
    arrays: dict[str, np.ndarray], meta: dict, which: str = "G"
) -> tuple[Generator, str]:
    """Rebuild a generator from checkpoint arrays; returns (net, domain)."""
    cfg = meta.get("config", {})
    gen = Generator(
        seed=0,
        base_channels=int(cfg.get("base_channels", 32)),
        n_res=int(cfg.get("n_res", 4)),
    )
    gen.load_state(arrays, prefix=f"{which}.")
    return gen, cfg.get("domain", "od")
