"""Dense variational autoencoder on raw audio windows.

All numerics are hand-rolled numpy: forward passes, analytic backprop,
Adam, and a finite-difference gradient checker. The encoder maps a
window to (mu, logvar) through leaky-rectified hidden layers and two
affine heads; the decoder mirrors the chain and squashes output through
tanh so samples stay inside (-1, 1).

Training runs in float64 so gradient checks are meaningful; checkpoints
persist float32, which is also the inference dtype.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .container import read_container, write_container
from .exceptions import (
    CorruptFileError,
    EmptyDatasetError,
    NonFiniteLossError,
    ShapeMismatchError,
)

CHECKPOINT_MAGIC = b"RAVAE\x00\x01"

_LEAKY_SLOPE = 0.01
_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8


def _leaky(pre: np.ndarray) -> np.ndarray:
    return np.where(pre > 0, pre, pre.dtype.type(_LEAKY_SLOPE) * pre)


def _leaky_grad(pre: np.ndarray) -> np.ndarray:
    one = pre.dtype.type(1.0)
    return np.where(pre > 0, one, pre.dtype.type(_LEAKY_SLOPE))


@dataclass(frozen=True)
class VaeHyperParams:
    """Architecture and optimization settings; every field round-trips
    through the checkpoint header."""

    window_size: int = 1024
    latent_dim: int = 256
    hidden_sizes: tuple = (512,)
    alpha: float = 1e-4
    learning_rate: float = 1e-4
    epochs: int = 500
    batch_size: int = 128
    sample_rate: int = 44100
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if self.latent_dim < 1 or self.window_size < 1:
            raise ValueError("latent_dim and window_size must be >= 1")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be > 0")
        if any(h < 1 for h in self.hidden_sizes):
            raise ValueError("hidden sizes must be >= 1")


@dataclass(frozen=True)
class LatentStats:
    """Per-window posterior: mean vector and log-variance vector."""

    mu: np.ndarray
    logvar: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu)
        logvar = np.asarray(self.logvar)
        if mu.ndim != 1 or mu.shape != logvar.shape:
            raise ValueError(
                f"mu/logvar must be 1-D and equal length, got {mu.shape} vs {logvar.shape}"
            )
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "logvar", logvar)

    def __len__(self) -> int:
        return len(self.mu)


@dataclass
class VaeModel:
    """Weights for one encoder/decoder pair.

    Layers are [W, b] lists with W shaped (fan_in, fan_out); activations
    flow as x @ W + b. The canonical parameter order (encoder hiddens,
    mu head, logvar head, decoder layers; W before b) is shared by
    gradients, Adam state, and the checkpoint tensor stream.
    """

    encoder_layers: list
    mu_head: list
    logvar_head: list
    decoder_layers: list
    hyper: VaeHyperParams

    @property
    def dtype(self):
        return self.mu_head[0].dtype

    def parameters(self) -> list:
        params = []
        for w, b in self.encoder_layers:
            params += [w, b]
        params += [self.mu_head[0], self.mu_head[1]]
        params += [self.logvar_head[0], self.logvar_head[1]]
        for w, b in self.decoder_layers:
            params += [w, b]
        return params


def _layer_dims(hyper: VaeHyperParams):
    """Shape chain: encoder hidden pairs, head fan-in, decoder pairs."""
    enc_dims = [hyper.window_size, *hyper.hidden_sizes]
    enc_pairs = list(zip(enc_dims[:-1], enc_dims[1:]))
    head_in = enc_dims[-1]
    dec_dims = [hyper.latent_dim, *reversed(hyper.hidden_sizes), hyper.window_size]
    dec_pairs = list(zip(dec_dims[:-1], dec_dims[1:]))
    return enc_pairs, head_in, dec_pairs


def n_param_tensors(hyper: VaeHyperParams) -> int:
    return 4 * len(hyper.hidden_sizes) + 6


def init_model(hyper: VaeHyperParams, rng=None, dtype=np.float64) -> VaeModel:
    """Seeded fan-in-scaled uniform weights, zero biases."""
    if rng is None:
        rng = np.random.default_rng(hyper.seed)

    def affine(n_in: int, n_out: int) -> list:
        bound = 1.0 / math.sqrt(n_in)
        w = rng.uniform(-bound, bound, size=(n_in, n_out)).astype(dtype)
        return [w, np.zeros(n_out, dtype=dtype)]

    enc_pairs, head_in, dec_pairs = _layer_dims(hyper)
    return VaeModel(
        encoder_layers=[affine(i, o) for i, o in enc_pairs],
        mu_head=affine(head_in, hyper.latent_dim),
        logvar_head=affine(head_in, hyper.latent_dim),
        decoder_layers=[affine(i, o) for i, o in dec_pairs],
        hyper=hyper,
    )


def encode_frames(model: VaeModel, frames: np.ndarray):
    """Batched encoder: (B, window_size) -> mu, logvar of shape (B, M)."""
    h = np.asarray(frames, dtype=model.dtype)
    if h.ndim != 2 or h.shape[1] != model.hyper.window_size:
        raise ShapeMismatchError(
            f"expected (B, {model.hyper.window_size}) frames, got {h.shape}"
        )
    for w, b in model.encoder_layers:
        h = _leaky(h @ w + b)
    return h @ model.mu_head[0] + model.mu_head[1], (
        h @ model.logvar_head[0] + model.logvar_head[1]
    )


def decode_frames(model: VaeModel, z: np.ndarray) -> np.ndarray:
    """Batched decoder: (B, M) -> frames of shape (B, window_size)."""
    h = np.asarray(z, dtype=model.dtype)
    if h.ndim != 2 or h.shape[1] != model.hyper.latent_dim:
        raise ShapeMismatchError(
            f"expected (B, {model.hyper.latent_dim}) latents, got {h.shape}"
        )
    for w, b in model.decoder_layers[:-1]:
        h = _leaky(h @ w + b)
    w, b = model.decoder_layers[-1]
    return np.tanh(h @ w + b)


def encoder_forward(model: VaeModel, x: np.ndarray) -> LatentStats:
    """Encode one window into its posterior statistics."""
    x = np.asarray(x)
    if x.ndim != 1 or x.shape[0] != model.hyper.window_size:
        raise ShapeMismatchError(
            f"expected a {model.hyper.window_size}-sample window, got shape {x.shape}"
        )
    mu, logvar = encode_frames(model, x[None, :])
    return LatentStats(mu[0], logvar[0])


def decoder_forward(model: VaeModel, z: np.ndarray) -> np.ndarray:
    """Decode one latent vector into a window of samples in (-1, 1)."""
    z = np.asarray(z)
    if z.ndim != 1 or z.shape[0] != model.hyper.latent_dim:
        raise ShapeMismatchError(
            f"expected a {model.hyper.latent_dim}-dim latent, got shape {z.shape}"
        )
    return decode_frames(model, z[None, :])[0]


def reparameterize(stats: LatentStats, eps) -> np.ndarray:
    """z = mu + exp(logvar/2) * eps; eps = 0 returns mu exactly."""
    eps = np.asarray(eps, dtype=stats.mu.dtype)
    if eps.shape != stats.mu.shape:
        raise ShapeMismatchError(f"eps shape {eps.shape} != mu shape {stats.mu.shape}")
    return stats.mu + np.exp(stats.logvar / 2) * eps


def kl_divergence(stats: LatentStats) -> float:
    """Closed-form KL(N(mu, sigma^2 I) || N(0, I)), summed over dims."""
    mu = stats.mu.astype(np.float64)
    logvar = stats.logvar.astype(np.float64)
    return float(0.5 * np.sum(mu * mu + np.exp(logvar) - logvar - 1.0))


def elbo_loss(x, x_hat, stats: LatentStats, alpha: float):
    """Return (total, recon, kl): per-window MSE plus alpha * KL sum."""
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ShapeMismatchError(f"x shape {x.shape} != x_hat shape {x_hat.shape}")
    recon = float(np.mean((x - x_hat) ** 2))
    kl = kl_divergence(stats)
    return recon + alpha * kl, recon, kl


def _forward_batch(model: VaeModel, frames: np.ndarray, eps: np.ndarray):
    """Forward pass keeping every pre-activation needed by the backward pass."""
    enc_pre = []
    h = frames
    for w, b in model.encoder_layers:
        pre = h @ w + b
        enc_pre.append((h, pre))
        h = _leaky(pre)
    mu = h @ model.mu_head[0] + model.mu_head[1]
    logvar = h @ model.logvar_head[0] + model.logvar_head[1]
    sigma = np.exp(logvar / 2)
    z = mu + sigma * eps

    dec_pre = []
    d = z
    for w, b in model.decoder_layers[:-1]:
        pre = d @ w + b
        dec_pre.append((d, pre))
        d = _leaky(pre)
    w_out, b_out = model.decoder_layers[-1]
    x_hat = np.tanh(d @ w_out + b_out)
    return {
        "enc_pre": enc_pre, "head_in": h, "mu": mu, "logvar": logvar,
        "sigma": sigma, "z": z, "dec_pre": dec_pre, "dec_in": d, "x_hat": x_hat,
    }


def _batch_losses(frames, cache, alpha):
    batch, width = frames.shape
    diff = cache["x_hat"] - frames
    recon = float(np.sum(diff * diff) / (batch * width))
    mu, logvar = cache["mu"], cache["logvar"]
    kl = float(0.5 * np.sum(mu * mu + np.exp(logvar) - logvar - 1.0) / batch)
    return recon + alpha * kl, recon, kl


def _backward_batch(model: VaeModel, frames: np.ndarray, eps: np.ndarray, alpha: float):
    """Analytic gradients of the batch-mean loss; returns (grads, losses).

    The loss is mean-over-batch of (per-window MSE + alpha * KL sum), so
    every upstream gradient carries the 1/batch factor once.
    """
    cache = _forward_batch(model, frames, eps)
    batch, width = frames.shape
    total, recon, kl = _batch_losses(frames, cache, alpha)

    grads = {"enc": [], "dec": []}

    # decoder output stage, through tanh
    d_xhat = 2.0 * (cache["x_hat"] - frames) / (batch * width)
    d_pre = d_xhat * (1.0 - cache["x_hat"] ** 2)
    w_out, _ = model.decoder_layers[-1]
    grads["dec"].append([cache["dec_in"].T @ d_pre, d_pre.sum(axis=0)])
    upstream = d_pre @ w_out.T
    for (layer_in, pre), (w, _) in zip(
        reversed(cache["dec_pre"]), reversed(model.decoder_layers[:-1])
    ):
        d_pre = upstream * _leaky_grad(pre)
        grads["dec"].append([layer_in.T @ d_pre, d_pre.sum(axis=0)])
        upstream = d_pre @ w.T
    grads["dec"].reverse()

    # reparameterization split: z = mu + sigma * eps
    d_z = upstream
    d_mu = d_z + alpha * cache["mu"] / batch
    d_logvar = d_z * eps * 0.5 * cache["sigma"] + (
        alpha * 0.5 * (np.exp(cache["logvar"]) - 1.0) / batch
    )

    head_in = cache["head_in"]
    grads["mu_head"] = [head_in.T @ d_mu, d_mu.sum(axis=0)]
    grads["logvar_head"] = [head_in.T @ d_logvar, d_logvar.sum(axis=0)]
    upstream = d_mu @ model.mu_head[0].T + d_logvar @ model.logvar_head[0].T

    for (layer_in, pre), (w, _) in zip(
        reversed(cache["enc_pre"]), reversed(model.encoder_layers)
    ):
        d_pre = upstream * _leaky_grad(pre)
        grads["enc"].append([layer_in.T @ d_pre, d_pre.sum(axis=0)])
        upstream = d_pre @ w.T

    flat = []
    for w_g, b_g in reversed(grads["enc"]):
        flat += [w_g, b_g]
    flat += grads["mu_head"] + grads["logvar_head"]
    for w_g, b_g in grads["dec"]:
        flat += [w_g, b_g]
    return flat, (total, recon, kl)


def backward(model: VaeModel, x: np.ndarray, eps: np.ndarray) -> list:
    """Gradients of the single-window loss w.r.t. every parameter.

    eps is held fixed, so the stochastic draw is differentiated through
    the deterministic reparameterized path. Gradient order matches
    VaeModel.parameters().
    """
    x = np.asarray(x, dtype=model.dtype)
    eps = np.asarray(eps, dtype=model.dtype)
    if x.ndim != 1 or x.shape[0] != model.hyper.window_size:
        raise ShapeMismatchError(f"bad window shape {x.shape}")
    if eps.shape != (model.hyper.latent_dim,):
        raise ShapeMismatchError(f"bad eps shape {eps.shape}")
    grads, _ = _backward_batch(model, x[None, :], eps[None, :], model.hyper.alpha)
    return grads


@dataclass
class AdamState:
    """First/second moment accumulators plus the shared step counter."""

    m: list
    v: list
    step: int = 0

    @classmethod
    def zeros_like(cls, params: list) -> "AdamState":
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
        )


def adam_step(params: list, grads: list, state: AdamState, learning_rate: float):
    """One bias-corrected Adam update, in place; increments state.step once."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeMismatchError("params/grads/state length mismatch")
    state.step += 1
    correction1 = 1.0 - _ADAM_BETA1 ** state.step
    correction2 = 1.0 - _ADAM_BETA2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= _ADAM_BETA1
        m += (1.0 - _ADAM_BETA1) * g
        v *= _ADAM_BETA2
        v += (1.0 - _ADAM_BETA2) * (g * g)
        m_hat = m / correction1
        v_hat = v / correction2
        p -= learning_rate * m_hat / (np.sqrt(v_hat) + _ADAM_EPS)
    return params, state


@dataclass
class Checkpoint:
    """Everything needed to resume or reuse a training run.

    Tensors are float32; loss_history rows are per-epoch
    (mean reconstruction, mean KL).
    """

    format_version: int
    hyper: VaeHyperParams
    params: list
    adam_m: list
    adam_v: list
    adam_step_count: int
    loss_history: np.ndarray


def _as_window_arrays(dataset) -> list:
    """Accept one WindowSet or an iterable of them; return frame arrays."""
    if hasattr(dataset, "frames"):
        dataset = [dataset]
    return [np.asarray(ws.frames) for ws in dataset]


def train(dataset, hyper: VaeHyperParams) -> Checkpoint:
    """Optimize a freshly initialized model over the window collection.

    One seeded generator drives initialization, the per-epoch shuffle,
    and one fresh eps row per window per visit, so identical inputs give
    byte-identical checkpoints.
    """
    arrays = _as_window_arrays(dataset)
    if not arrays or sum(len(a) for a in arrays) == 0:
        raise EmptyDatasetError("training needs at least one window")
    frames = np.concatenate(arrays, axis=0).astype(np.float64)
    if frames.shape[1] != hyper.window_size:
        raise ShapeMismatchError(
            f"dataset windows are {frames.shape[1]} wide, hyper says {hyper.window_size}"
        )

    rng = np.random.default_rng(hyper.seed)
    model = init_model(hyper, rng=rng)
    params = model.parameters()
    state = AdamState.zeros_like(params)
    n = len(frames)
    history = np.zeros((hyper.epochs, 2), dtype=np.float64)

    for epoch in range(hyper.epochs):
        order = rng.permutation(n)
        recon_sum = 0.0
        kl_sum = 0.0
        for start in range(0, n, hyper.batch_size):
            batch_idx = order[start : start + hyper.batch_size]
            batch = frames[batch_idx]
            eps = rng.standard_normal((len(batch), hyper.latent_dim))
            grads, (total, recon, kl) = _backward_batch(
                model, batch, eps, hyper.alpha
            )
            if not math.isfinite(total):
                raise NonFiniteLossError(
                    f"loss became non-finite at epoch {epoch + 1}"
                )
            adam_step(params, grads, state, hyper.learning_rate)
            recon_sum += recon * len(batch)
            kl_sum += kl * len(batch)
        history[epoch] = (recon_sum / n, kl_sum / n)

    return Checkpoint(
        format_version=1,
        hyper=hyper,
        params=[p.astype(np.float32) for p in params],
        adam_m=[m.astype(np.float32) for m in state.m],
        adam_v=[v.astype(np.float32) for v in state.v],
        adam_step_count=state.step,
        loss_history=history.astype(np.float32),
    )


def model_from_checkpoint(ckpt: Checkpoint) -> VaeModel:
    """Rebuild a float32 inference model from stored tensors."""
    hyper = ckpt.hyper
    enc_pairs, _, dec_pairs = _layer_dims(hyper)
    tensors = iter(np.array(p, dtype=np.float32) for p in ckpt.params)

    def take() -> list:
        return [next(tensors), next(tensors)]

    return VaeModel(
        encoder_layers=[take() for _ in enc_pairs],
        mu_head=take(),
        logvar_head=take(),
        decoder_layers=[take() for _ in dec_pairs],
        hyper=hyper,
    )


def _hyper_to_header(hyper: VaeHyperParams) -> dict:
    return {
        "window_size": hyper.window_size,
        "latent_dim": hyper.latent_dim,
        "hidden_sizes": ",".join(str(h) for h in hyper.hidden_sizes),
        "alpha": repr(hyper.alpha),
        "learning_rate": repr(hyper.learning_rate),
        "epochs": hyper.epochs,
        "batch_size": hyper.batch_size,
        "sample_rate": hyper.sample_rate,
        "seed": hyper.seed,
    }


def _hyper_from_header(header: dict) -> VaeHyperParams:
    sizes = header["hidden_sizes"]
    return VaeHyperParams(
        window_size=int(header["window_size"]),
        latent_dim=int(header["latent_dim"]),
        hidden_sizes=tuple(int(h) for h in sizes.split(",")) if sizes else (),
        alpha=float(header["alpha"]),
        learning_rate=float(header["learning_rate"]),
        epochs=int(header["epochs"]),
        batch_size=int(header["batch_size"]),
        sample_rate=int(header["sample_rate"]),
        seed=int(header["seed"]),
    )


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    """Persist weights, Adam state, and loss history; bit-exact on reload."""
    header = _hyper_to_header(ckpt.hyper)
    header["adam_step"] = ckpt.adam_step_count
    tensors = [*ckpt.params, *ckpt.adam_m, *ckpt.adam_v, ckpt.loss_history]
    write_container(path, CHECKPOINT_MAGIC, header, tensors)


def load_checkpoint(path) -> Checkpoint:
    header, tensors = read_container(path, CHECKPOINT_MAGIC)
    hyper = _hyper_from_header(header)
    n_params = n_param_tensors(hyper)
    if len(tensors) != 3 * n_params + 1:
        raise CorruptFileError(
            f"{path}: expected {3 * n_params + 1} tensors, found {len(tensors)}"
        )
    loss_history = tensors[-1]
    if loss_history.ndim != 2 or loss_history.shape[1] != 2:
        raise CorruptFileError(f"{path}: loss history has shape {loss_history.shape}")
    return Checkpoint(
        format_version=CHECKPOINT_MAGIC[-1],
        hyper=hyper,
        params=tensors[:n_params],
        adam_m=tensors[n_params : 2 * n_params],
        adam_v=tensors[2 * n_params : 3 * n_params],
        adam_step_count=int(header["adam_step"]),
        loss_history=loss_history,
    )


@dataclass(frozen=True)
class GradientCheckReport:
    max_rel_error: float
    n_checked: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def _scalar_loss(model: VaeModel, x: np.ndarray, eps: np.ndarray) -> float:
    cache = _forward_batch(model, x[None, :], eps[None, :])
    total, _, _ = _batch_losses(x[None, :], cache, model.hyper.alpha)
    return total


def gradient_check(
    hyper: VaeHyperParams,
    tolerance: float = 1e-3,
    n_samples: int = 100,
    seed: int = 0,
    step: float = 1e-4,
    eps: np.ndarray | None = None,
    grad_scale: float = 1.0,
) -> GradientCheckReport:
    """Compare analytic gradients against central finite differences.

    Probes at least n_samples randomly chosen parameter entries (every
    tensor gets at least one) on a model built from hyper. grad_scale
    multiplies the analytic side and exists so tests can prove the
    harness catches wrong gradients. Relative error uses
    |a - n| / max(|a|, |n|, 1e-8).
    """
    rng = np.random.default_rng(seed)
    model = init_model(hyper, rng=rng)
    x = rng.uniform(-1.0, 1.0, size=hyper.window_size)
    if eps is None:
        eps = rng.standard_normal(hyper.latent_dim)
    eps = np.asarray(eps, dtype=np.float64)

    analytic = backward(model, x, eps)
    params = model.parameters()
    # seed one probe per tensor so biases are always covered, then fill randomly
    coords = [(t, 0) for t in range(len(params))]
    while len(coords) < n_samples:
        t = int(rng.integers(len(params)))
        coords.append((t, int(rng.integers(params[t].size))))

    max_rel = 0.0
    for t, flat_idx in coords:
        p = params[t].reshape(-1)
        original = p[flat_idx]
        p[flat_idx] = original + step
        loss_plus = _scalar_loss(model, x, eps)
        p[flat_idx] = original - step
        loss_minus = _scalar_loss(model, x, eps)
        p[flat_idx] = original
        numeric = (loss_plus - loss_minus) / (2.0 * step)
        a = analytic[t].reshape(-1)[flat_idx] * grad_scale
        rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
        max_rel = max(max_rel, rel)
    return GradientCheckReport(max_rel_error=max_rel, n_checked=len(coords), tolerance=tolerance)
