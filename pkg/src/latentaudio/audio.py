"""Audio loading, writing, and windowing.

Everything downstream consumes mono float32 buffers in [-1, 1], so the
decoders here normalize channel count and sample format at the door.
The WAV codec is deliberately minimal: RIFF/WAVE little-endian with
"fmt " and "data" chunks, PCM16 or IEEE float32 payloads, nothing else.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .exceptions import (
    MalformedWavError,
    RateMismatchError,
    TooShortError,
    UnsupportedEncodingError,
)

_WAVE_PCM = 1
_WAVE_IEEE_FLOAT = 3
_PCM16_SCALE = 32768.0


@dataclass(frozen=True)
class AudioBuffer:
    """Mono float32 samples plus their sample rate.

    Samples are dimensionless amplitudes; after normalization every value
    satisfies |s| <= 1. Empty buffers are legal but rejected by windowing.
    """

    samples: np.ndarray
    sample_rate: int
    source_label: str | None = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float32)
        if samples.ndim != 1:
            raise ValueError(f"samples must be 1-D, got shape {samples.shape}")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class WindowSet:
    """Fixed-size frames sliced from one buffer at a constant hop.

    Row i covers source samples [i*hop, i*hop + window_size); trailing
    samples that do not fill a frame are discarded.
    """

    frames: np.ndarray
    window_size: int
    hop: int
    origin_sample_rate: int

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float32)
        if frames.ndim != 2 or frames.shape[1] != self.window_size:
            raise ValueError(
                f"frames must be (N, {self.window_size}), got {frames.shape}"
            )
        if self.hop < 1:
            raise ValueError("hop must be >= 1")
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return len(self.frames)


def load_wav(path) -> AudioBuffer:
    """Decode a RIFF/WAVE file into a mono AudioBuffer.

    PCM16 samples are scaled by 1/32768; multichannel input is downmixed
    by arithmetic mean. The buffer keeps the file's native sample rate.

    Raises:
        MalformedWavError: broken header or chunk bookkeeping.
        UnsupportedEncodingError: any encoding other than PCM16/float32.
    """
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise MalformedWavError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id = raw[pos : pos + 4]
        (size,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8 : pos + 8 + size]
        if len(body) < size:
            raise MalformedWavError(f"{path}: chunk {chunk_id!r} overruns file")
        if chunk_id == b"fmt ":
            if size < 16:
                raise MalformedWavError(f"{path}: fmt chunk too small ({size} bytes)")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            data = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned

    if fmt is None or data is None:
        raise MalformedWavError(f"{path}: missing fmt or data chunk")

    tag, channels, rate, _byte_rate, _block_align, bits = fmt
    if channels < 1 or rate <= 0:
        raise MalformedWavError(f"{path}: invalid fmt fields (ch={channels}, rate={rate})")
    if (tag, bits) == (_WAVE_PCM, 16):
        dtype = np.dtype("<i2")
    elif (tag, bits) == (_WAVE_IEEE_FLOAT, 32):
        dtype = np.dtype("<f4")
    else:
        raise UnsupportedEncodingError(
            f"{path}: format tag {tag} at {bits} bits not supported"
        )

    if len(data) % (dtype.itemsize * channels) != 0:
        raise MalformedWavError(f"{path}: data size not a whole number of frames")
    values = np.frombuffer(data, dtype=dtype)
    samples = values.astype(np.float32)
    if tag == _WAVE_PCM:
        samples = samples / np.float32(_PCM16_SCALE)
    if channels > 1:
        samples = samples.reshape(-1, channels).mean(axis=1, dtype=np.float32)
    return AudioBuffer(samples, int(rate), source_label=str(path))


def save_wav(buffer: AudioBuffer, path, encoding: str = "float32") -> None:
    """Write a buffer as PCM16 or IEEE float32 WAV.

    float32 round-trips bit-exactly through load_wav; pcm16 quantizes to
    within 1/32768 of the original sample values.
    """
    if len(buffer) == 0:
        raise ValueError("refusing to write an empty buffer")
    if encoding == "float32":
        tag, bits = _WAVE_IEEE_FLOAT, 32
        payload = buffer.samples.astype("<f4").tobytes()
    elif encoding == "pcm16":
        tag, bits = _WAVE_PCM, 16
        ints = np.clip(np.rint(buffer.samples * _PCM16_SCALE), -32768, 32767)
        payload = ints.astype("<i2").tobytes()
    else:
        raise ValueError(f"unknown encoding {encoding!r}")

    block_align = bits // 8  # mono
    fmt_chunk = struct.pack(
        "<HHIIHH", tag, 1, buffer.sample_rate, buffer.sample_rate * block_align,
        block_align, bits,
    )
    pad = b"\x00" if len(payload) & 1 else b""
    riff_size = 4 + (8 + len(fmt_chunk)) + (8 + len(payload) + len(pad))
    with open(path, "wb") as fh:
        fh.write(b"RIFF" + struct.pack("<I", riff_size) + b"WAVE")
        fh.write(b"fmt " + struct.pack("<I", len(fmt_chunk)) + fmt_chunk)
        fh.write(b"data" + struct.pack("<I", len(payload)) + payload + pad)


def peak_normalize(buffer: AudioBuffer) -> AudioBuffer:
    """Scale so the loudest sample sits at exactly 1.0.

    Division by the peak (rather than multiplying by its reciprocal) makes
    the operation exactly idempotent. All-zero buffers pass through.
    """
    peak = np.max(np.abs(buffer.samples)) if len(buffer) else np.float32(0.0)
    if peak == 0.0 or peak == 1.0:
        return buffer
    return AudioBuffer(
        buffer.samples / peak, buffer.sample_rate, source_label=buffer.source_label
    )


def resample(buffer: AudioBuffer, target_rate: int) -> AudioBuffer:
    """Linear-interpolation resampling to target_rate.

    Output length is round(L * target_rate / source_rate). The identity
    rate returns the buffer unchanged.
    """
    if target_rate <= 0:
        raise ValueError(f"target_rate must be positive, got {target_rate}")
    if target_rate == buffer.sample_rate:
        return buffer
    n_out = int(round(len(buffer) * target_rate / buffer.sample_rate))
    if len(buffer) == 0 or n_out == 0:
        return AudioBuffer(
            np.zeros(n_out, dtype=np.float32), target_rate, buffer.source_label
        )
    positions = np.arange(n_out) * (buffer.sample_rate / target_rate)
    out = np.interp(positions, np.arange(len(buffer)), buffer.samples)
    return AudioBuffer(out.astype(np.float32), target_rate, buffer.source_label)


def window(buffer: AudioBuffer, window_size: int, hop: int) -> WindowSet:
    """Slice a buffer into N = floor((L - window_size)/hop) + 1 frames."""
    if window_size < 1 or hop < 1:
        raise ValueError("window_size and hop must be >= 1")
    if len(buffer) < window_size:
        raise TooShortError(
            f"buffer of {len(buffer)} samples is shorter than one "
            f"{window_size}-sample window"
        )
    frames = sliding_window_view(buffer.samples, window_size)[::hop].copy()
    return WindowSet(frames, window_size, hop, buffer.sample_rate)


def truncate_pair(a: AudioBuffer, b: AudioBuffer) -> tuple[AudioBuffer, AudioBuffer]:
    """Cut the longer buffer so both share the shorter one's length.

    Truncation keeps the head (sample 0 onward); the shorter buffer is
    returned unchanged.
    """
    if a.sample_rate != b.sample_rate:
        raise RateMismatchError(
            f"sample rates differ: {a.sample_rate} vs {b.sample_rate}"
        )
    n = min(len(a), len(b))
    if len(a) > n:
        a = AudioBuffer(a.samples[:n], a.sample_rate, a.source_label)
    if len(b) > n:
        b = AudioBuffer(b.samples[:n], b.sample_rate, b.source_label)
    return a, b
