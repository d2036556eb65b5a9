"""RIFF/WAVE reading and writing, plus synthetic test signals.

Only the ``fmt `` and ``data`` chunks are written.  On read, unknown chunks
are skipped.  16-bit PCM maps v -> v/32768; 32-bit float is passed through.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .dsp import AudioBlock

PCM = 1
IEEE_FLOAT = 3


class WavError(Exception):
    pass


class MalformedHeaderError(WavError):
    pass


class UnsupportedEncodingError(WavError):
    pass


class TruncatedDataError(WavError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class WavSpec:
    channels: int = 1
    sample_rate_hz: int = 44100
    bit_depth: str = "pcm16"  # or "float32"

    def __post_init__(self):
        if self.channels not in (1, 2):
            raise UnsupportedEncodingError(f"{self.channels} channels; only mono/stereo")
        if not 8000 <= self.sample_rate_hz <= 192000:
            raise UnsupportedEncodingError(f"sample rate {self.sample_rate_hz} Hz out of range")
        if self.bit_depth not in ("pcm16", "float32"):
            raise UnsupportedEncodingError(f"bit depth {self.bit_depth!r}")

    @property
    def sample_width(self) -> int:
        return 2 if self.bit_depth == "pcm16" else 4

    @property
    def format_code(self) -> int:
        return PCM if self.bit_depth == "pcm16" else IEEE_FLOAT

    @property
    def dtype(self) -> str:
        return "<i2" if self.bit_depth == "pcm16" else "<f4"


def _parse_header(data: bytes) -> tuple[WavSpec, int, int]:
    """Return (spec, data offset, declared data length)."""
    if len(data) < 12:
        raise TruncatedDataError("file too short for a RIFF header", len(data))
    riff, _, wave = struct.unpack_from("<4sI4s", data, 0)
    if riff != b"RIFF" or wave != b"WAVE":
        raise MalformedHeaderError("not a RIFF/WAVE file")
    pos = 12
    spec = None
    while True:
        if pos + 8 > len(data):
            if spec is None:
                raise MalformedHeaderError("no fmt chunk")
            raise MalformedHeaderError("no data chunk")
        cid, size = struct.unpack_from("<4sI", data, pos)
        body = pos + 8
        if cid == b"fmt ":
            if size < 16 or body + 16 > len(data):
                raise MalformedHeaderError(f"fmt chunk too short ({size} bytes)")
            code, channels, rate, _, _, bits = struct.unpack_from("<HHIIHH", data, body)
            if code == 0xFFFE and size >= 40:
                code = struct.unpack_from("<H", data, body + 24)[0]
            if (code, bits) == (PCM, 16):
                depth = "pcm16"
            elif (code, bits) == (IEEE_FLOAT, 32):
                depth = "float32"
            else:
                raise UnsupportedEncodingError(f"format code {code} with {bits} bits")
            spec = WavSpec(channels, rate, depth)
        elif cid == b"data":
            if spec is None:
                raise MalformedHeaderError("data chunk precedes fmt chunk")
            return spec, body, size
        pos = body + size + (size & 1)


def read_wav(path, block_frames: int = 4096) -> tuple[WavSpec, Iterator[AudioBlock]]:
    data = Path(path).read_bytes()
    spec, offset, size = _parse_header(data)
    frame_bytes = spec.channels * spec.sample_width
    if offset + size > len(data):
        raise TruncatedDataError(
            f"data chunk declares {size} bytes but only {len(data) - offset} are present",
            len(data))
    if size % frame_bytes:
        raise TruncatedDataError("data chunk ends mid-frame", offset + size - size % frame_bytes)
    raw = np.frombuffer(data, dtype=spec.dtype, count=size // spec.sample_width, offset=offset)
    raw = raw.reshape(-1, spec.channels).T
    samples = raw / 32768.0 if spec.bit_depth == "pcm16" else raw.astype(np.float64)

    def blocks() -> Iterator[AudioBlock]:
        for i in range(0, samples.shape[1], block_frames):
            yield AudioBlock(samples[:, i:i + block_frames], spec.sample_rate_hz)

    return spec, blocks()


def read_wav_block(path) -> tuple[WavSpec, AudioBlock]:
    """Whole file as one block (zero frames allowed only as an empty block list)."""
    spec, blocks = read_wav(path)
    blocks = list(blocks)
    if not blocks:
        return spec, AudioBlock(np.zeros((spec.channels, 0)), spec.sample_rate_hz)
    return spec, AudioBlock.concat(blocks)


def encode_pcm16(x: np.ndarray) -> tuple[np.ndarray, int]:
    """Clamp to [-1, 1], scale by 32768 and round half away from zero."""
    clipped = int(np.count_nonzero(np.abs(x) > 1.0))
    scaled = np.clip(x, -1.0, 1.0) * 32768.0
    rounded = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)
    return np.clip(rounded, -32768, 32767).astype("<i2"), clipped


def write_wav(path, spec: WavSpec, blocks: Iterable[AudioBlock]) -> int:
    """Write ``blocks`` to ``path``; returns the number of clipped samples."""
    chunks = []
    clipped = 0
    for b in blocks:
        if b.channels != spec.channels:
            raise ValueError(f"block has {b.channels} channels, spec says {spec.channels}")
        if b.sample_rate_hz != spec.sample_rate_hz:
            raise ValueError(f"block rate {b.sample_rate_hz} != spec rate {spec.sample_rate_hz}")
        if np.isnan(b.samples).any():
            raise ValueError("refusing to write NaN samples")
        if spec.bit_depth == "pcm16":
            enc, n = encode_pcm16(b.samples)
            clipped += n
        else:
            enc = b.samples.astype("<f4")
        chunks.append(enc.T.tobytes())
    payload = b"".join(chunks)
    width = spec.sample_width
    fmt = struct.pack("<HHIIHH", spec.format_code, spec.channels, spec.sample_rate_hz,
                      spec.sample_rate_hz * spec.channels * width, spec.channels * width,
                      8 * width)
    pad = b"\x00" if len(payload) & 1 else b""
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt \
        + b"data" + struct.pack("<I", len(payload)) + payload + pad
    Path(path).write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
    return clipped


# ---------------------------------------------------------------------------
# Test signals


def synth_signal(kind: str, duration_s: float, sample_rate_hz: int = 44100, *,
                 freq: float = 440.0, seed: int = 0, channels: int = 1,
                 block_frames: int | None = None) -> list[AudioBlock]:
    """Impulse, 0.5-amplitude sine, or seeded uniform noise in [-0.5, 0.5].

    ``duration_s`` is rounded to the nearest whole frame.
    """
    if not duration_s > 0:
        raise ValueError("duration must be positive")
    frames = max(1, int(round(duration_s * sample_rate_hz)))
    if kind == "impulse":
        x = np.zeros((channels, frames))
        x[:, 0] = 1.0
    elif kind == "sine":
        n = np.arange(frames)
        x = np.tile(0.5 * np.sin(2 * math.pi * freq * n / sample_rate_hz), (channels, 1))
    elif kind in ("noise", "white-noise"):
        x = np.random.default_rng(seed).uniform(-0.5, 0.5, size=(channels, frames))
    else:
        raise ValueError(f"unknown signal kind {kind!r}")
    block = AudioBlock(x, sample_rate_hz)
    return block.split(block_frames) if block_frames else [block]
