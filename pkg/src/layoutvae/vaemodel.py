"""The layout VAE: encoder, Gaussian latent, feedback-conditioned decoder.

The encoder maps a flattened occupancy grid x (batch x D) through a ReLU
trunk to a diagonal Gaussian over the latent code z; sampling uses the
reparameterization z = mu + sigma * eps so gradients flow through the draw.
The decoder mirrors the trunk and conditions on a 10-entry feedback vector f
(6 class weights + 4 quadrant weights) concatenated to z, ending in a sigmoid
layer so outputs live in (0,1) like the grids themselves.

Training minimizes recon + beta * kl, the negation of the maximized evidence
lower bound; with deterministic_mode on the model degrades to a plain
autoencoder (z = mu, KL reported but excluded from the total).

All backward passes are hand-written against numcore's affine primitives and
are verified against central finite differences in the test suite.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .layoutdata import GridSpec, GridTensor, unflatten
from .numcore import (
    LayerCache,
    ParamTensor,
    ShapeError,
    affine_backward,
    affine_forward,
)

MAGIC = b"VAEW"
WEIGHT_FORMAT_VERSION = 1
FLAG_FEEDBACK = 1
FLAG_DETERMINISTIC = 2

LOGVAR_CLAMP = 10.0
PROB_EPS = 1e-7  # Bernoulli likelihood clamp for log terms

N_CLASS_WEIGHTS = 6
N_QUADRANT_WEIGHTS = 4


class FormatError(ValueError):
    """A weight file does not match the expected binary layout."""


@dataclass(frozen=True)
class VaeConfig:
    input_dim: int = 1440
    hidden: tuple[int, ...] = (512, 256, 128)
    latent_dim: int = 64
    feedback_dim: int = 10
    recon_loss: str = "bernoulli"  # bernoulli | gaussian
    kl_weight: float = 1.0
    deterministic_mode: bool = False
    feedback_enabled: bool = True
    feedback_dropout: float = 0.3

    def __post_init__(self):
        if self.input_dim < 1 or self.latent_dim < 1 or self.feedback_dim < 1:
            raise ValueError("all dimensions must be >= 1")
        if not self.hidden or any(h < 1 for h in self.hidden):
            raise ValueError(f"hidden widths must be >= 1, got {self.hidden}")
        if self.recon_loss not in ("bernoulli", "gaussian"):
            raise ValueError(f"unknown recon_loss {self.recon_loss!r}")
        if self.kl_weight < 0:
            raise ValueError("kl_weight must be >= 0")
        if not 0.0 <= self.feedback_dropout <= 1.0:
            raise ValueError("feedback_dropout must be in [0,1]")

    @property
    def decoder_input_dim(self) -> int:
        return self.latent_dim + (self.feedback_dim if self.feedback_enabled else 0)

    @property
    def effective_kl_weight(self) -> float:
        return 0.0 if self.deterministic_mode else self.kl_weight


@dataclass
class GaussianLatent:
    """Diagonal Gaussian posterior parameters; 1D for one example, 2D with
    examples as rows for a batch."""

    mu: np.ndarray
    log_var: np.ndarray  # clamped to [-LOGVAR_CLAMP, LOGVAR_CLAMP]

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.log_var = np.asarray(self.log_var, dtype=np.float64)
        if self.mu.shape != self.log_var.shape:
            raise ShapeError(
                f"mu shape {self.mu.shape} != log_var shape {self.log_var.shape}"
            )


@dataclass
class FeedbackVector:
    """Per-class and per-quadrant preference weights, all in [0,1].

    Quadrant order is top-left, top-right, bottom-left, bottom-right, judged
    by grid-cell midpoint (a midpoint exactly on the boundary counts as
    bottom/right).
    """

    class_weights: np.ndarray
    quadrant_weights: np.ndarray

    def __post_init__(self):
        self.class_weights = np.asarray(self.class_weights, dtype=np.float64).reshape(-1)
        self.quadrant_weights = np.asarray(self.quadrant_weights, dtype=np.float64).reshape(-1)
        if self.class_weights.size != N_CLASS_WEIGHTS:
            raise ShapeError(f"expected {N_CLASS_WEIGHTS} class weights")
        if self.quadrant_weights.size != N_QUADRANT_WEIGHTS:
            raise ShapeError(f"expected {N_QUADRANT_WEIGHTS} quadrant weights")
        values = self.as_array()
        if not np.all(np.isfinite(values)) or values.min() < 0.0 or values.max() > 1.0:
            raise ValueError("feedback weights must be finite and within [0,1]")

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.class_weights, self.quadrant_weights])

    @classmethod
    def neutral(cls) -> "FeedbackVector":
        return cls(np.full(N_CLASS_WEIGHTS, 0.5), np.full(N_QUADRANT_WEIGHTS, 0.5))

    @classmethod
    def from_array(cls, values: np.ndarray) -> "FeedbackVector":
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        if values.size != N_CLASS_WEIGHTS + N_QUADRANT_WEIGHTS:
            raise ShapeError(f"expected {N_CLASS_WEIGHTS + N_QUADRANT_WEIGHTS} entries")
        return cls(values[:N_CLASS_WEIGHTS], values[N_CLASS_WEIGHTS:])

    def to_json(self) -> dict:
        return {
            "class_weights": self.class_weights.tolist(),
            "quadrant_weights": self.quadrant_weights.tolist(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "FeedbackVector":
        return cls(
            np.asarray(d["class_weights"], dtype=np.float64),
            np.asarray(d["quadrant_weights"], dtype=np.float64),
        )


@dataclass
class LossParts:
    total: float
    recon: float
    kl: float

    def to_json(self) -> dict:
        return {"total": self.total, "recon": self.recon, "kl": self.kl}


@dataclass
class VaeParams:
    """All weights and biases, in serialization order.

    encoder trunk -> mu head -> log-variance head -> decoder trunk -> output
    layer, with each bias following its matrix.
    """

    encoder: list[tuple[ParamTensor, ParamTensor]]
    mu_w: ParamTensor
    mu_b: ParamTensor
    lv_w: ParamTensor
    lv_b: ParamTensor
    decoder: list[tuple[ParamTensor, ParamTensor]]
    out_w: ParamTensor
    out_b: ParamTensor

    def all(self) -> list[ParamTensor]:
        flat: list[ParamTensor] = []
        for w, b in self.encoder:
            flat += [w, b]
        flat += [self.mu_w, self.mu_b, self.lv_w, self.lv_b]
        for w, b in self.decoder:
            flat += [w, b]
        flat += [self.out_w, self.out_b]
        return flat

    @classmethod
    def zeros(cls, config: VaeConfig) -> "VaeParams":
        def pair(d_in: int, d_out: int, name: str):
            return (
                ParamTensor(np.zeros((d_in, d_out)), name=f"{name}.w"),
                ParamTensor(np.zeros((1, d_out)), name=f"{name}.b"),
            )

        enc_dims = [config.input_dim, *config.hidden]
        encoder = [
            pair(enc_dims[i], enc_dims[i + 1], f"enc{i}") for i in range(len(config.hidden))
        ]
        mu_w, mu_b = pair(config.hidden[-1], config.latent_dim, "mu")
        lv_w, lv_b = pair(config.hidden[-1], config.latent_dim, "logvar")
        dec_dims = [config.decoder_input_dim, *reversed(config.hidden)]
        decoder = [
            pair(dec_dims[i], dec_dims[i + 1], f"dec{i}") for i in range(len(config.hidden))
        ]
        out_w, out_b = pair(config.hidden[0], config.input_dim, "out")
        return cls(encoder, mu_w, mu_b, lv_w, lv_b, decoder, out_w, out_b)


def init_params(config: VaeConfig, seed: int) -> VaeParams:
    """He-style init: std sqrt(2/fan_in) before ReLU, sqrt(1/fan_in) for the
    linear heads and the sigmoid output layer; biases start at zero."""
    rng = np.random.Generator(np.random.PCG64(seed))
    params = VaeParams.zeros(config)
    for w, _ in params.encoder + params.decoder:
        fan_in = w.value.shape[0]
        w.value[...] = rng.standard_normal(w.value.shape) * np.sqrt(2.0 / fan_in)
    for w in (params.mu_w, params.lv_w, params.out_w):
        fan_in = w.value.shape[0]
        w.value[...] = rng.standard_normal(w.value.shape) * np.sqrt(1.0 / fan_in)
    return params


# --- loss pieces (module-level, usable on their own) ---


def kl_divergence(lat: GaussianLatent) -> float:
    """KL(N(mu, sigma^2) || N(0, I)) in closed form, always >= 0."""
    var = np.exp(lat.log_var)
    return float(0.5 * np.sum(lat.mu**2 + var - 1.0 - lat.log_var))


def reparameterize(lat: GaussianLatent, eps: np.ndarray) -> np.ndarray:
    """z = mu + sigma * eps with sigma = exp(log_var / 2)."""
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != lat.mu.shape:
        raise ShapeError(f"eps shape {eps.shape} != latent shape {lat.mu.shape}")
    return lat.mu + np.exp(lat.log_var / 2.0) * eps


def recon_loss(x: np.ndarray, x_hat: np.ndarray, mode: str = "bernoulli") -> float:
    """Negative log-likelihood of x under the decoder output, up to constants.

    bernoulli: soft-target cross entropy with x_hat clamped away from {0,1};
    gaussian: half squared error.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    x_hat = np.asarray(x_hat, dtype=np.float64).reshape(-1)
    if x.size != x_hat.size:
        raise ShapeError(f"length mismatch: {x.size} vs {x_hat.size}")
    if mode == "bernoulli":
        p = np.clip(x_hat, PROB_EPS, 1.0 - PROB_EPS)
        return float(-np.sum(x * np.log(p) + (1.0 - x) * np.log1p(-p)))
    if mode == "gaussian":
        return float(0.5 * np.sum((x - x_hat) ** 2))
    raise ValueError(f"unknown recon_loss mode {mode!r}")


def feedback_from_layout(g: GridTensor) -> FeedbackVector:
    """Teacher feedback derived from a grid: per-class and per-quadrant mass,
    each normalized by its maximum (all zeros for an empty grid)."""
    if g.spec.channels != N_CLASS_WEIGHTS:
        raise ShapeError(
            f"feedback needs a {N_CLASS_WEIGHTS}-channel grid, got {g.spec.channels}"
        )
    flat = g.cells.reshape(1, -1)
    return FeedbackVector.from_array(feedback_matrix(flat, g.spec)[0])


def feedback_matrix(x: np.ndarray, spec: GridSpec) -> np.ndarray:
    """Vectorized feedback_from_layout over flattened grids: (N, D) -> (N, 10)."""
    if spec.channels != N_CLASS_WEIGHTS:
        raise ShapeError(
            f"feedback needs a {N_CLASS_WEIGHTS}-channel grid, got {spec.channels}"
        )
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != spec.flat_dim:
        raise ShapeError(f"expected (N, {spec.flat_dim}) inputs, got {x.shape}")
    n = x.shape[0]
    g = x.reshape(n, spec.channels, spec.rows, spec.cols)

    class_mass = g.sum(axis=(2, 3))  # (N, C)
    class_max = class_mass.max(axis=1, keepdims=True)
    class_w = np.divide(
        class_mass, class_max, out=np.zeros_like(class_mass), where=class_max > 0
    )

    top = (np.arange(spec.rows) + 0.5) / spec.rows < 0.5
    left = (np.arange(spec.cols) + 0.5) / spec.cols < 0.5
    mass = g.sum(axis=1)  # (N, H, W)
    quads = np.stack(
        [
            mass[:, top][:, :, left].sum(axis=(1, 2)),
            mass[:, top][:, :, ~left].sum(axis=(1, 2)),
            mass[:, ~top][:, :, left].sum(axis=(1, 2)),
            mass[:, ~top][:, :, ~left].sum(axis=(1, 2)),
        ],
        axis=1,
    )  # (N, 4): TL, TR, BL, BR
    quad_max = quads.max(axis=1, keepdims=True)
    quad_w = np.divide(quads, quad_max, out=np.zeros_like(quads), where=quad_max > 0)
    return np.concatenate([class_w, quad_w], axis=1)


@dataclass
class _Forward:
    """Intermediates of one batched forward pass."""

    enc_caches: list[LayerCache]
    mu_cache: LayerCache
    lv_cache: LayerCache
    mu: np.ndarray
    log_var: np.ndarray  # clamped
    log_var_raw: np.ndarray
    eps: np.ndarray | None
    z: np.ndarray
    dec_caches: list[LayerCache]
    out_cache: LayerCache
    x_hat: np.ndarray


class LayoutVae:
    """Config plus parameters, with batched forward/backward as methods."""

    def __init__(self, config: VaeConfig, params: VaeParams):
        self.config = config
        self.params = params

    @classmethod
    def init(cls, config: VaeConfig, seed: int = 0) -> "LayoutVae":
        return cls(config, init_params(config, seed))

    # -- feedback plumbing --

    def _feedback_rows(self, f, n: int) -> np.ndarray | None:
        """Normalize any accepted feedback form to an (n, F) matrix."""
        if not self.config.feedback_enabled:
            return None
        fdim = self.config.feedback_dim
        if f is None:
            return np.full((n, fdim), 0.5)
        if isinstance(f, FeedbackVector):
            row = f.as_array()
        else:
            row = np.asarray(f, dtype=np.float64)
        if row.ndim == 1:
            if row.size != fdim:
                raise ShapeError(f"feedback length {row.size} != {fdim}")
            return np.broadcast_to(row, (n, fdim)).copy()
        if row.shape != (n, fdim):
            raise ShapeError(f"feedback shape {row.shape} != ({n}, {fdim})")
        return row

    # -- forward / backward --

    def _forward(self, x: np.ndarray, f_rows: np.ndarray | None,
                 eps: np.ndarray | None) -> _Forward:
        cfg = self.config
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != cfg.input_dim:
            raise ShapeError(f"expected (N, {cfg.input_dim}) inputs, got {x.shape}")
        if cfg.feedback_enabled and f_rows is None:
            f_rows = np.full((x.shape[0], cfg.feedback_dim), 0.5)

        h = x
        enc_caches = []
        for w, b in self.params.encoder:
            h, cache = affine_forward(h, w, b, act="relu")
            enc_caches.append(cache)
        mu, mu_cache = affine_forward(h, self.params.mu_w, self.params.mu_b, act="none")
        lv_raw, lv_cache = affine_forward(h, self.params.lv_w, self.params.lv_b, act="none")
        log_var = np.clip(lv_raw, -LOGVAR_CLAMP, LOGVAR_CLAMP)

        if cfg.deterministic_mode or eps is None:
            z = mu.copy()
            eps_used = None
        else:
            eps_used = np.asarray(eps, dtype=np.float64)
            if eps_used.shape != mu.shape:
                raise ShapeError(f"eps shape {eps_used.shape} != latent shape {mu.shape}")
            z = mu + np.exp(log_var / 2.0) * eps_used

        d_in = z if f_rows is None else np.concatenate([z, f_rows], axis=1)
        g = d_in
        dec_caches = []
        for w, b in self.params.decoder:
            g, cache = affine_forward(g, w, b, act="relu")
            dec_caches.append(cache)
        x_hat, out_cache = affine_forward(g, self.params.out_w, self.params.out_b,
                                          act="sigmoid")
        return _Forward(enc_caches, mu_cache, lv_cache, mu, log_var, lv_raw,
                        eps_used, z, dec_caches, out_cache, x_hat)

    def _loss_parts(self, x: np.ndarray, fwd: _Forward) -> LossParts:
        cfg = self.config
        n = x.shape[0]
        if cfg.recon_loss == "bernoulli":
            p = np.clip(fwd.x_hat, PROB_EPS, 1.0 - PROB_EPS)
            recon = float(-np.sum(x * np.log(p) + (1.0 - x) * np.log1p(-p)) / n)
        else:
            recon = float(0.5 * np.sum((x - fwd.x_hat) ** 2) / n)
        var = np.exp(fwd.log_var)
        kl = float(0.5 * np.sum(fwd.mu**2 + var - 1.0 - fwd.log_var) / n)
        beta = cfg.effective_kl_weight
        return LossParts(total=recon + beta * kl, recon=recon, kl=kl)

    def _backward(self, x: np.ndarray, fwd: _Forward) -> None:
        """Accumulate d total / d theta into every parameter's grad buffer."""
        cfg = self.config
        n = x.shape[0]

        if cfg.recon_loss == "bernoulli":
            inside = (fwd.x_hat > PROB_EPS) & (fwd.x_hat < 1.0 - PROB_EPS)
            with np.errstate(divide="ignore", invalid="ignore"):
                raw = -x / fwd.x_hat + (1.0 - x) / (1.0 - fwd.x_hat)
            d_xhat = np.where(inside, raw, 0.0) / n
        else:
            d_xhat = (fwd.x_hat - x) / n

        d_dec = affine_backward(d_xhat, fwd.out_cache, self.params.out_w, self.params.out_b)
        for cache, (w, b) in zip(reversed(fwd.dec_caches), reversed(self.params.decoder)):
            d_dec = affine_backward(d_dec, cache, w, b)
        d_z = d_dec[:, : cfg.latent_dim]

        beta = cfg.effective_kl_weight
        d_mu = d_z.copy()
        if fwd.eps is None:
            d_lv = np.zeros_like(fwd.log_var)
        else:
            sigma = np.exp(fwd.log_var / 2.0)
            d_lv = d_z * 0.5 * sigma * fwd.eps
        if beta > 0.0:
            d_mu += beta * fwd.mu / n
            d_lv += beta * 0.5 * (np.exp(fwd.log_var) - 1.0) / n
        clamp_open = np.abs(fwd.log_var_raw) < LOGVAR_CLAMP
        d_lv_raw = np.where(clamp_open, d_lv, 0.0)

        d_h = affine_backward(d_mu, fwd.mu_cache, self.params.mu_w, self.params.mu_b)
        d_h += affine_backward(d_lv_raw, fwd.lv_cache, self.params.lv_w, self.params.lv_b)
        for cache, (w, b) in zip(reversed(fwd.enc_caches), reversed(self.params.encoder)):
            d_h = affine_backward(d_h, cache, w, b)

    # -- public operations --

    def encode(self, x: np.ndarray) -> GaussianLatent:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        fwd = self._forward(x.reshape(1, -1) if single else x, None, eps=None)
        if single:
            return GaussianLatent(fwd.mu[0], fwd.log_var[0])
        return GaussianLatent(fwd.mu, fwd.log_var)

    def decode(self, z: np.ndarray, f=None) -> np.ndarray:
        """Decode latent codes (with optional feedback) to grids in (0,1)."""
        z = np.asarray(z, dtype=np.float64)
        single = z.ndim == 1
        zb = z.reshape(1, -1) if single else z
        if zb.shape[1] != self.config.latent_dim:
            raise ShapeError(
                f"z length {zb.shape[1]} != latent dim {self.config.latent_dim}"
            )
        f_rows = self._feedback_rows(f, zb.shape[0])
        d_in = zb if f_rows is None else np.concatenate([zb, f_rows], axis=1)
        g = d_in
        for w, b in self.params.decoder:
            g, _ = affine_forward(g, w, b, act="relu")
        x_hat, _ = affine_forward(g, self.params.out_w, self.params.out_b, act="sigmoid")
        return x_hat[0] if single else x_hat

    def elbo_loss(self, x: np.ndarray, f=None, eps: np.ndarray | None = None) -> LossParts:
        """Loss parts for one example or a batch; eps=None evaluates at z = mu."""
        x = np.asarray(x, dtype=np.float64)
        xb = x.reshape(1, -1) if x.ndim == 1 else x
        epsb = None
        if eps is not None:
            epsb = np.asarray(eps, dtype=np.float64)
            if epsb.ndim == 1:
                epsb = epsb.reshape(1, -1)
        f_rows = self._feedback_rows(f, xb.shape[0])
        fwd = self._forward(xb, f_rows, epsb)
        return self._loss_parts(xb, fwd)

    def loss_and_grad(self, x: np.ndarray, f=None,
                      eps: np.ndarray | None = None) -> LossParts:
        """elbo_loss plus gradient accumulation into the parameter buffers."""
        x = np.asarray(x, dtype=np.float64)
        xb = x.reshape(1, -1) if x.ndim == 1 else x
        f_rows = self._feedback_rows(f, xb.shape[0])
        fwd = self._forward(xb, f_rows, eps)
        parts = self._loss_parts(xb, fwd)
        self._backward(xb, fwd)
        return parts

    def reconstruct(self, x: np.ndarray, f=None) -> np.ndarray:
        """Deterministic reconstruction through z = mu (no sampling)."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        xb = x.reshape(1, -1) if single else x
        fwd = self._forward(xb, self._feedback_rows(f, xb.shape[0]), eps=None)
        return fwd.x_hat[0] if single else fwd.x_hat

    def generate(self, n: int, f=None, seed: int = 0,
                 spec: GridSpec | None = None) -> list[GridTensor]:
        """Draw z ~ N(0, I) from a seeded generator and decode, with neutral
        feedback unless given."""
        if n < 0:
            raise ValueError("n must be >= 0")
        if spec is None:
            spec = GridSpec()
        if spec.flat_dim != self.config.input_dim:
            raise ShapeError(
                f"grid spec flat dim {spec.flat_dim} != model input {self.config.input_dim}"
            )
        if n == 0:
            return []
        rng = np.random.Generator(np.random.PCG64(seed))
        z = rng.standard_normal((n, self.config.latent_dim))
        x_hat = self.decode(z, f)
        return [unflatten(row, spec) for row in x_hat]

    # -- persistence --

    def save(self, path: str | Path) -> None:
        save_params(self, path)

    @classmethod
    def load(cls, path: str | Path) -> "LayoutVae":
        return load_params(path)


def save_params(model: LayoutVae, path: str | Path) -> None:
    """Write the binary weight file (little-endian, versioned, bit-exact)."""
    cfg = model.config
    flags = (FLAG_FEEDBACK if cfg.feedback_enabled else 0) | (
        FLAG_DETERMINISTIC if cfg.deterministic_mode else 0
    )
    buf = bytearray()
    buf += MAGIC
    buf += struct.pack(
        "<6I",
        WEIGHT_FORMAT_VERSION,
        flags,
        cfg.input_dim,
        cfg.latent_dim,
        cfg.feedback_dim,
        len(cfg.hidden),
    )
    buf += struct.pack(f"<{len(cfg.hidden)}I", *cfg.hidden)
    for p in model.params.all():
        buf += np.ascontiguousarray(p.value, dtype="<f8").tobytes()
    Path(path).write_bytes(bytes(buf))


def load_params(path: str | Path) -> LayoutVae:
    """Read a weight file back into a model; rejects wrong magic, wrong
    version, and truncated or oversized payloads."""
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != MAGIC:
        found = data[:4]
        raise FormatError(f"bad magic {found!r}, expected {MAGIC!r}")
    header_end = 4 + struct.calcsize("<6I")
    if len(data) < header_end:
        raise FormatError("truncated header")
    version, flags, d, latent, fdim, n_hidden = struct.unpack(
        "<6I", data[4:header_end]
    )
    if version != WEIGHT_FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}")
    widths_end = header_end + 4 * n_hidden
    if len(data) < widths_end:
        raise FormatError("truncated hidden-width table")
    hidden = struct.unpack(f"<{n_hidden}I", data[header_end:widths_end])
    config = VaeConfig(
        input_dim=d,
        hidden=tuple(hidden),
        latent_dim=latent,
        feedback_dim=fdim,
        feedback_enabled=bool(flags & FLAG_FEEDBACK),
        deterministic_mode=bool(flags & FLAG_DETERMINISTIC),
    )
    params = VaeParams.zeros(config)
    offset = widths_end
    for p in params.all():
        nbytes = p.value.size * 8
        if len(data) < offset + nbytes:
            raise FormatError(f"truncated payload at parameter {p.name!r}")
        p.value[...] = np.frombuffer(
            data, dtype="<f8", count=p.value.size, offset=offset
        ).reshape(p.value.shape)
        offset += nbytes
    if offset != len(data):
        raise FormatError(f"{len(data) - offset} trailing bytes after payload")
    return LayoutVae(config, params)
