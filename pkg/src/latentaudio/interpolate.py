"""Latent-path encoding and the three interpolation synthesis strategies.

A recording becomes a path: one (mu, sigma) pair per window. Synthesis
blends two paths, window by window, and decodes the blend back to audio:

  * stepwise: one global weight per segment, swept from 0 to r in steps
    of s, segments concatenated in sweep order;
  * meso: a per-window weight curve over non-overlapping windows, output
    duration matches the (truncated) inputs;
  * extended: the same per-window blend over overlapping windows, whose
    decoded frames are concatenated without overlap-add, stretching
    duration by window_size / hop.

Blending is linear in mu and in sigma (not log-variance). Weights are
applied to input a, complement to input b. All blend arithmetic runs in
float64 and is cast to the model dtype afterward, so weights 0 and 1
reproduce the endpoint encodings bit-exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .audio import AudioBuffer, truncate_pair, window
from .exceptions import (
    BadStepError,
    CurveLengthMismatchError,
    EmptySpecError,
    ShapeMismatchError,
)
from .vae import LatentStats, VaeModel, decode_frames, encode_frames

_SIGMA_FLOOR = 1e-6


@dataclass(frozen=True)
class LatentPath:
    """Ordered per-window posterior stats for one recording."""

    stats: tuple
    window_size: int
    hop: int
    sample_rate: int

    def __post_init__(self):
        stats = tuple(self.stats)
        dims = {len(s) for s in stats}
        if len(dims) > 1:
            raise ValueError(f"mixed latent dimensions in one path: {sorted(dims)}")
        object.__setattr__(self, "stats", stats)

    def __len__(self) -> int:
        return len(self.stats)

    @property
    def latent_dim(self) -> int:
        return len(self.stats[0]) if self.stats else 0

    def means(self) -> np.ndarray:
        return np.array([s.mu for s in self.stats])

    def sigmas(self) -> np.ndarray:
        return np.array([np.exp(s.logvar / 2) for s in self.stats])


@dataclass(frozen=True)
class InterpolationCurve:
    """Per-window blend weights, clamped into [-1, 1] on construction."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or len(values) < 1:
            raise ValueError("curve needs a 1-D, nonempty value sequence")
        if not np.isfinite(values).all():
            raise ValueError("curve values must be finite")
        object.__setattr__(self, "values", np.clip(values, -1.0, 1.0))

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class SynthesisMode:
    """How latents are realized: posterior means, or seeded sampling."""

    kind: str
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in ("mean_only", "sampled"):
            raise ValueError(f"unknown synthesis mode {self.kind!r}")
        if self.kind == "sampled" and self.seed is None:
            raise ValueError("sampled mode needs a seed")

    @classmethod
    def mean_only(cls) -> "SynthesisMode":
        return cls("mean_only")

    @classmethod
    def sampled(cls, seed: int) -> "SynthesisMode":
        return cls("sampled", seed)


def encode_audio(model: VaeModel, buffer: AudioBuffer, hop: int) -> LatentPath:
    """Window the buffer and encode every window, order preserved.

    The buffer must already be at the model's sample rate; the caller
    owns resampling.
    """
    ws = window(buffer, model.hyper.window_size, hop)
    mu, logvar = encode_frames(model, ws.frames)
    stats = tuple(LatentStats(m, lv) for m, lv in zip(mu, logvar))
    return LatentPath(stats, ws.window_size, hop, buffer.sample_rate)


def generate_curve(spec: str, length: int) -> InterpolationCurve:
    """Build a curve of the given length from a compact text spec.

    Forms: "const:<c>", "lin:<a>:<b>", "sine:p=<period>,ph=<phase>,
    a=<amplitude>,o=<offset>" (all optional, value = o + a*sin(2*pi*i/p
    + ph)), "bp:<idx>=<val>,..." (piecewise-linear breakpoints). Values
    land in [-1, 1] by clamping.
    """
    if length < 1:
        raise ValueError(f"curve length must be >= 1, got {length}")
    spec = (spec or "").strip()
    if not spec:
        raise EmptySpecError("empty curve spec")
    kind, _, body = spec.partition(":")

    if kind == "const":
        values = np.full(length, float(body))
    elif kind == "lin":
        start_s, _, end_s = body.partition(":")
        values = np.linspace(float(start_s), float(end_s), length)
    elif kind == "sine":
        params = {"p": float(length), "ph": 0.0, "a": 1.0, "o": 0.0}
        for item in filter(None, body.split(",")):
            key, _, val = item.partition("=")
            if key not in params:
                raise ValueError(f"unknown sine parameter {key!r}")
            params[key] = float(val)
        if params["p"] == 0:
            raise ValueError("sine period must be nonzero")
        i = np.arange(length)
        values = params["o"] + params["a"] * np.sin(
            2.0 * np.pi * i / params["p"] + params["ph"]
        )
    elif kind == "bp":
        points = []
        for item in filter(None, body.split(",")):
            idx_s, _, val_s = item.partition("=")
            points.append((float(idx_s), float(val_s)))
        if not points:
            raise ValueError("breakpoint spec needs at least one index=value pair")
        points.sort()
        xs, ys = zip(*points)
        values = np.interp(np.arange(length), xs, ys)
    else:
        raise ValueError(f"unknown curve kind {kind!r}")
    return InterpolationCurve(values)


def _crossfade_join(frames: np.ndarray, k: int) -> np.ndarray:
    """Concatenate decoded frames; k > 0 overlaps seams with linear ramps."""
    n, width = frames.shape
    if k == 0 or n < 2:
        return frames.reshape(-1)
    if not 0 < k < width:
        raise ValueError(f"crossfade must be in [0, {width}), got {k}")
    ramp = (np.arange(k, dtype=frames.dtype) + 1) / (k + 1)
    out = np.empty(n * width - (n - 1) * k, dtype=frames.dtype)
    out[:width] = frames[0]
    pos = width
    for frame in frames[1:]:
        out[pos - k : pos] = out[pos - k : pos] * (1 - ramp) + frame[:k] * ramp
        out[pos : pos + width - k] = frame[k:]
        pos += width - k
    return out


def decode_path(
    model: VaeModel, means, stds, mode: SynthesisMode, crossfade: int = 0
) -> AudioBuffer:
    """Decode a sequence of latent (mean, std) rows into one buffer.

    mean_only ignores stds; sampled draws one eps row per window from a
    single generator seeded by the mode, so equal seeds give identical
    audio. Frames are joined end-to-end (length = count * window_size)
    unless a crossfade width is given.
    """
    means = np.asarray(means, dtype=np.float64)
    stds = np.asarray(stds, dtype=np.float64)
    if means.ndim != 2 or means.shape != stds.shape:
        raise ShapeMismatchError(
            f"means {means.shape} and stds {stds.shape} must be equal 2-D shapes"
        )
    if means.shape[1] != model.hyper.latent_dim:
        raise ShapeMismatchError(
            f"latent dim {means.shape[1]} != model's {model.hyper.latent_dim}"
        )
    if np.any(stds < 0):
        raise ValueError("stds must be entrywise >= 0")

    if mode.kind == "mean_only":
        z = means
    else:
        rng = np.random.default_rng(mode.seed)
        z = means + stds * rng.standard_normal(means.shape)
    frames = decode_frames(model, z.astype(model.dtype, copy=False))
    return AudioBuffer(_crossfade_join(frames, crossfade), model.hyper.sample_rate)


def _blend(path_a: LatentPath, path_b: LatentPath, weights: np.ndarray):
    """weights on a, complement on b; sigma floored after blending."""
    w = weights[:, None]
    means = w * path_a.means() + (1.0 - w) * path_b.means()
    stds = w * path_a.sigmas() + (1.0 - w) * path_b.sigmas()
    return means, np.maximum(stds, _SIGMA_FLOOR)


def _encode_pair(model, a: AudioBuffer, b: AudioBuffer, hop: int):
    a, b = truncate_pair(a, b)
    return encode_audio(model, a, hop), encode_audio(model, b, hop)


def stepwise_interpolate(
    model: VaeModel,
    a: AudioBuffer,
    b: AudioBuffer,
    range_r: float,
    step_s: float,
    mode: SynthesisMode,
    crossfade: int = 0,
) -> AudioBuffer:
    """Sweep a global blend weight from 0 to range_r in steps of step_s.

    Segment i uses weight w = i * step_s on input a and (1 - w) on input
    b; the floor(range_r / step_s) + 1 equal-length segments are decoded
    as one path and concatenated in sweep order. Weights above 1 (when
    range_r > 1) extrapolate rather than clamp.
    """
    if step_s <= 0:
        raise BadStepError(f"step must be > 0, got {step_s}")
    if range_r < 0:
        raise BadStepError(f"range must be >= 0, got {range_r}")
    # small epsilon so ratios like 0.8/0.2 land on their exact integer
    n_segments = int(math.floor(range_r / step_s + 1e-9)) + 1
    path_a, path_b = _encode_pair(model, a, b, model.hyper.window_size)

    weights = np.repeat(np.arange(n_segments) * step_s, len(path_a))
    means, stds = _blend(
        _tile_path(path_a, n_segments), _tile_path(path_b, n_segments), weights
    )
    return decode_path(model, means, stds, mode, crossfade)


def _tile_path(path: LatentPath, reps: int) -> LatentPath:
    return LatentPath(path.stats * reps, path.window_size, path.hop, path.sample_rate)


def meso_interpolate(
    model: VaeModel,
    a: AudioBuffer,
    b: AudioBuffer,
    curve: InterpolationCurve,
    mode: SynthesisMode,
    crossfade: int = 0,
) -> AudioBuffer:
    """Blend per window under a weight curve; duration matches the inputs.

    Windows are non-overlapping, so the output is as long as the
    truncated inputs rounded down to whole windows.
    """
    return _curve_blend(model, a, b, curve, model.hyper.window_size, mode, crossfade)


def extended_interpolate(
    model: VaeModel,
    a: AudioBuffer,
    b: AudioBuffer,
    curve: InterpolationCurve,
    mode: SynthesisMode,
    hop: int = 256,
    crossfade: int = 0,
) -> AudioBuffer:
    """Per-window curve blend over overlapping windows.

    Decoded frames are concatenated without overlap-add, so every input
    sample is rendered window_size / hop times and the output duration
    stretches by that factor (4x at the 1024/256 defaults). hop equal to
    window_size degenerates to meso_interpolate.
    """
    return _curve_blend(model, a, b, curve, hop, mode, crossfade)


def _curve_blend(model, a, b, curve, hop, mode, crossfade) -> AudioBuffer:
    path_a, path_b = _encode_pair(model, a, b, hop)
    if len(curve) != len(path_a):
        raise CurveLengthMismatchError(
            f"curve has {len(curve)} values but the inputs give {len(path_a)} windows"
        )
    means, stds = _blend(path_a, path_b, curve.values)
    return decode_path(model, means, stds, mode, crossfade)


def export_latents(path: LatentPath, file) -> None:
    """Write one CSV row per window: index, mu entries, logvar entries.

    Values are float32 shortest-round-trip decimals; an empty path
    writes just the header.
    """
    if hasattr(file, "write"):
        _write_latents(path, file)
    else:
        with open(file, "w", encoding="utf-8") as fh:
            _write_latents(path, fh)


def _write_latents(path: LatentPath, fh) -> None:
    m = path.latent_dim
    columns = ["idx"] + [f"mu_{i}" for i in range(m)] + [f"lv_{i}" for i in range(m)]
    fh.write(",".join(columns) + "\n")
    for idx, stats in enumerate(path.stats):
        mu = stats.mu.astype(np.float32)
        lv = stats.logvar.astype(np.float32)
        fields = [str(idx)] + [str(v) for v in mu] + [str(v) for v in lv]
        fh.write(",".join(fields) + "\n")
