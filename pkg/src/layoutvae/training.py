"""Optimizers, the plateau LR schedule, the training loop, and sweep harnesses.

Four optimizers are implemented against ParamTensor grad buffers: plain SGD
(optional momentum), RMSprop, Adam, and AdamW with decoupled weight decay.
The schedule halves the learning rate after a run of epochs without relative
validation improvement. Training is bit-deterministic given the three seeds
(init, shuffle, eps); validation always evaluates at z = mu with
teacher-forced feedback and no dropout, so the traces are reproducible.
"""

from __future__ import annotations

import copy
import math
import random
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .layoutdata import GridSpec, ValidationError
from .numcore import NumericError, ParamTensor
from .vaemodel import LayoutVae, LossParts, VaeConfig, VaeParams, feedback_matrix

OPTIMIZER_KINDS = ("sgd", "rmsprop", "adam", "adamw")


@dataclass(frozen=True)
class OptimConfig:
    kind: str = "adamw"
    lr: float = 0.001
    momentum: float = 0.0  # SGD only
    rho: float = 0.9  # RMSprop only
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-8
    weight_decay: float = 0.01  # AdamW only

    def __post_init__(self):
        object.__setattr__(self, "kind", self.kind.lower())
        if self.kind not in OPTIMIZER_KINDS:
            raise ValueError(f"unknown optimizer kind {self.kind!r}")
        if self.lr <= 0:
            raise ValueError("lr must be > 0")
        for name in ("momentum", "rho", "beta1", "beta2"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must be in [0,1), got {v}")
        if self.eps_hat <= 0:
            raise ValueError("eps_hat must be > 0")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")


class Optimizer:
    """Applies one update per step from accumulated grads, then zeroes them.

    The learning rate lives on the optimizer (self.lr) so the schedule can
    adjust it between epochs. A non-finite gradient raises before any
    parameter is touched, leaving the model unmodified for that step.
    """

    def __init__(self, params: list[ParamTensor], config: OptimConfig):
        self.params = params
        self.config = config
        self.lr = config.lr
        self.t = 0
        self._m = [np.zeros_like(p.value) for p in params]  # momentum / Adam m
        self._v = [np.zeros_like(p.value) for p in params]  # RMSprop s / Adam v

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        for p in self.params:
            if not np.all(np.isfinite(p.grad)):
                raise NumericError(f"non-finite gradient in {p.name or 'parameter'}")
        cfg = self.config
        self.t += 1
        for p, m, v in zip(self.params, self._m, self._v):
            g = p.grad
            if cfg.kind == "sgd":
                m *= cfg.momentum
                m += g
                p.value -= self.lr * m
            elif cfg.kind == "rmsprop":
                v *= cfg.rho
                v += (1.0 - cfg.rho) * g * g
                p.value -= self.lr * g / (np.sqrt(v) + cfg.eps_hat)
            else:  # adam / adamw
                m *= cfg.beta1
                m += (1.0 - cfg.beta1) * g
                v *= cfg.beta2
                v += (1.0 - cfg.beta2) * g * g
                m_hat = m / (1.0 - cfg.beta1**self.t)
                v_hat = v / (1.0 - cfg.beta2**self.t)
                update = m_hat / (np.sqrt(v_hat) + cfg.eps_hat)
                if cfg.kind == "adamw":
                    update = update + cfg.weight_decay * p.value
                p.value -= self.lr * update
        self.zero_grad()


@dataclass(frozen=True)
class PlateauConfig:
    factor: float = 0.5
    patience: int = 5
    min_lr: float = 1e-5
    rel_threshold: float = 1e-4

    def __post_init__(self):
        if not 0.0 < self.factor < 1.0:
            raise ValueError("factor must be in (0,1)")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.min_lr <= 0:
            raise ValueError("min_lr must be > 0")
        if self.rel_threshold < 0:
            raise ValueError("rel_threshold must be >= 0")


class PlateauSchedule:
    """Halve-on-stall schedule: a validation total counts as an improvement
    only when below best * (1 - rel_threshold); after `patience` consecutive
    stalls the lr is multiplied by `factor` (floored at min_lr) and the stall
    counter resets. Never raises the lr."""

    def __init__(self, config: PlateauConfig | None = None):
        self.config = config or PlateauConfig()
        self.best = math.inf
        self.stalls = 0

    def step(self, lr: float, val_total: float) -> float:
        cfg = self.config
        if val_total < self.best * (1.0 - cfg.rel_threshold):
            self.best = val_total
            self.stalls = 0
            return lr
        self.stalls += 1
        if self.stalls >= cfg.patience:
            self.stalls = 0
            return max(cfg.min_lr, lr * cfg.factor)
        return lr


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64
    epochs: int = 200
    optim: OptimConfig = field(default_factory=OptimConfig)
    plateau: PlateauConfig = field(default_factory=PlateauConfig)
    shuffle_seed: int = 0
    eps_seed: int = 0
    init_seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass
class TrainReport:
    train_loss: list[LossParts]
    val_loss: list[LossParts]
    lr_trace: list[float]
    wall_time: float
    best_epoch: int
    model: LayoutVae  # final-epoch parameters
    best_params: VaeParams  # snapshot at best_epoch

    def best_model(self) -> LayoutVae:
        return LayoutVae(self.model.config, self.best_params)

    def to_json(self) -> dict:
        return {
            "epochs": list(range(len(self.train_loss))),
            "train_loss": [p.to_json() for p in self.train_loss],
            "val_loss": [p.to_json() for p in self.val_loss],
            "lr": list(self.lr_trace),
            "best_epoch": self.best_epoch,
        }


def _epoch_mean(sums: dict, n: int, beta: float) -> LossParts:
    recon = sums["recon"] / n
    kl = sums["kl"] / n
    return LossParts(total=recon + beta * kl, recon=recon, kl=kl)


def train(
    config: VaeConfig,
    train_x: np.ndarray,
    val_x: np.ndarray,
    cfg: TrainConfig | None = None,
    spec: GridSpec | None = None,
) -> TrainReport:
    """Full training loop over pre-flattened grids (rows of train_x/val_x).

    Per epoch: seeded shuffle, minibatch forward/backward with fresh eps per
    example and teacher-forced feedback (dropped to neutral per example with
    probability feedback_dropout), one optimizer step per batch, then a
    deterministic validation pass (z = mu, no dropout) feeding the plateau
    schedule. The best-validation parameter snapshot is retained.
    """
    cfg = cfg or TrainConfig()
    train_x = np.asarray(train_x, dtype=np.float64)
    val_x = np.asarray(val_x, dtype=np.float64)
    if train_x.ndim != 2 or train_x.shape[0] == 0:
        raise ValidationError("train split is empty")
    if val_x.ndim != 2 or val_x.shape[0] == 0:
        raise ValidationError("val split is empty")

    if spec is None:
        spec = GridSpec()
    f_train = f_val = None
    if config.feedback_enabled:
        f_train = feedback_matrix(train_x, spec)
        f_val = feedback_matrix(val_x, spec)

    model = LayoutVae.init(config, cfg.init_seed)
    opt = Optimizer(model.params.all(), cfg.optim)
    sched = PlateauSchedule(cfg.plateau)
    shuffle_rng = random.Random(cfg.shuffle_seed)
    eps_seq, drop_seq = np.random.SeedSequence(cfg.eps_seed).spawn(2)
    eps_rng = np.random.Generator(np.random.PCG64(eps_seq))
    drop_rng = np.random.Generator(np.random.PCG64(drop_seq))

    n = train_x.shape[0]
    order = list(range(n))
    beta = config.effective_kl_weight
    stochastic = not config.deterministic_mode

    train_trace: list[LossParts] = []
    val_trace: list[LossParts] = []
    lr_trace: list[float] = []
    best_val = math.inf
    best_epoch = -1
    best_params = copy.deepcopy(model.params)
    t0 = time.perf_counter()

    for epoch in range(cfg.epochs):
        shuffle_rng.shuffle(order)
        sums = {"recon": 0.0, "kl": 0.0}
        for b, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            xb = train_x[idx]
            fb = None
            if f_train is not None:
                fb = f_train[idx].copy()
                if config.feedback_dropout > 0.0:
                    dropped = drop_rng.random(len(idx)) < config.feedback_dropout
                    fb[dropped] = 0.5
            eps = None
            if stochastic:
                eps = eps_rng.standard_normal((len(idx), config.latent_dim))
            parts = model.loss_and_grad(xb, fb, eps)
            if not math.isfinite(parts.total):
                raise NumericError(
                    f"non-finite loss at epoch {epoch} batch {b}: {parts}"
                )
            opt.step()
            sums["recon"] += parts.recon * len(idx)
            sums["kl"] += parts.kl * len(idx)
        train_trace.append(_epoch_mean(sums, n, beta))

        val_parts = model.elbo_loss(val_x, f_val, eps=None)
        if not math.isfinite(val_parts.total):
            raise NumericError(f"non-finite validation loss at epoch {epoch}")
        val_trace.append(val_parts)
        lr_trace.append(opt.lr)
        if val_parts.total < best_val:
            best_val = val_parts.total
            best_epoch = epoch
            best_params = copy.deepcopy(model.params)
        opt.lr = sched.step(opt.lr, val_parts.total)

    return TrainReport(
        train_loss=train_trace,
        val_loss=val_trace,
        lr_trace=lr_trace,
        wall_time=time.perf_counter() - t0,
        best_epoch=best_epoch,
        model=model,
        best_params=best_params,
    )


# --- sweep harnesses ---

DEFAULT_SWEEP_LRS = (0.005, 0.003, 0.002, 0.001)
DEFAULT_SWEEP_KINDS = ("rmsprop", "adam", "sgd", "adamw")


@dataclass
class SweepRow:
    key: str
    ssim: float  # mean over seeds
    mae: float
    val_total: float  # mean best-validation total over seeds
    per_seed: list[dict]

    def to_json(self) -> dict:
        return {
            "key": self.key,
            "ssim": self.ssim,
            "mae": self.mae,
            "val_total": self.val_total,
            "per_seed": self.per_seed,
        }


def _seed_cfg(base: TrainConfig, seed: int) -> TrainConfig:
    # disjoint offsets keep the three streams distinct across sweep seeds
    return replace(
        base, init_seed=seed, shuffle_seed=10000 + seed, eps_seed=20000 + seed
    )


def _run_cell(config, train_x, val_x, test_x, cfg, spec):
    from .evalmetrics import evaluate

    report = train(config, train_x, val_x, cfg, spec)
    metrics = evaluate(report.best_model(), test_x, spec)
    return {
        "seed": cfg.init_seed,
        "ssim": metrics.mean_ssim,
        "mae": metrics.mean_mae,
        "val_total": report.val_loss[report.best_epoch].total,
    }


def sweep_lr(
    config: VaeConfig,
    train_x: np.ndarray,
    val_x: np.ndarray,
    test_x: np.ndarray,
    base: TrainConfig | None = None,
    lrs=DEFAULT_SWEEP_LRS,
    n_seeds: int = 1,
    spec: GridSpec | None = None,
) -> list[SweepRow]:
    """One row per learning rate: mean SSIM/MAE of the best-val snapshot on
    the test split, averaged over n_seeds independent runs."""
    if not lrs or n_seeds < 1:
        raise ValidationError("need at least one lr and one seed")
    base = base or TrainConfig()
    rows = []
    for lr in lrs:
        cells = []
        for seed in range(n_seeds):
            cfg = _seed_cfg(replace(base, optim=replace(base.optim, lr=lr)), seed)
            cells.append(_run_cell(config, train_x, val_x, test_x, cfg, spec))
        rows.append(_reduce_row(str(lr), cells))
    return rows


def sweep_optimizers(
    config: VaeConfig,
    train_x: np.ndarray,
    val_x: np.ndarray,
    test_x: np.ndarray,
    base: TrainConfig | None = None,
    kinds=DEFAULT_SWEEP_KINDS,
    n_seeds: int = 1,
    spec: GridSpec | None = None,
) -> list[SweepRow]:
    """One row per optimizer kind, in the given order, same protocol as
    sweep_lr."""
    if not kinds or n_seeds < 1:
        raise ValidationError("need at least one optimizer kind and one seed")
    base = base or TrainConfig()
    rows = []
    for kind in kinds:
        cells = []
        for seed in range(n_seeds):
            cfg = _seed_cfg(replace(base, optim=replace(base.optim, kind=kind)), seed)
            cells.append(_run_cell(config, train_x, val_x, test_x, cfg, spec))
        rows.append(_reduce_row(str(kind), cells))
    return rows


def _reduce_row(key: str, cells: list[dict]) -> SweepRow:
    return SweepRow(
        key=key,
        ssim=sum(c["ssim"] for c in cells) / len(cells),
        mae=sum(c["mae"] for c in cells) / len(cells),
        val_total=sum(c["val_total"] for c in cells) / len(cells),
        per_seed=cells,
    )


def format_table(rows: list[SweepRow], key_header: str) -> str:
    """Aligned three-column text table: <key_header> | SSIM | MAE."""
    headers = (key_header, "SSIM", "MAE")
    body = [(r.key, f"{r.ssim:.4f}", f"{r.mae:.4f}") for r in rows]
    widths = [
        max(len(headers[i]), *(len(row[i]) for row in body)) if body else len(headers[i])
        for i in range(3)
    ]
    lines = [
        " | ".join(h.ljust(widths[i]) for i, h in enumerate(headers)),
        "-+-".join("-" * w for w in widths),
    ]
    lines += [" | ".join(c.ljust(widths[i]) for i, c in enumerate(row)) for row in body]
    return "\n".join(line.rstrip() for line in lines)
