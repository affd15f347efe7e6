"""Minimal RIFF/WAVE reader and writer: PCM16 and IEEE float32 only.

The reader downmixes stereo to mono by channel mean and scales PCM16 by
1/32768.  Everything else (24-bit, extensible headers, other containers)
is rejected rather than guessed at.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import IoError, UnsupportedEncoding


@dataclass
class AudioBuffer:
    sample_rate: int
    samples: np.ndarray  # mono float64, nominally in [-1, 1]


def read_wav(path) -> AudioBuffer:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    if len(blob) < 12 or blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise IoError(f"{path} is not a RIFF/WAVE file")

    fmt = None
    data = None
    offset = 12
    while offset + 8 <= len(blob):
        chunk_id = blob[offset : offset + 4]
        (chunk_size,) = struct.unpack_from("<I", blob, offset + 4)
        body = blob[offset + 8 : offset + 8 + chunk_size]
        if len(body) < chunk_size:
            raise IoError(f"{path}: truncated {chunk_id!r} chunk")
        if chunk_id == b"fmt ":
            fmt = body
        elif chunk_id == b"data":
            data = body
        offset += 8 + chunk_size + (chunk_size & 1)  # chunks are word-aligned

    if fmt is None or data is None:
        raise IoError(f"{path}: missing fmt or data chunk")
    if len(fmt) < 16:
        raise IoError(f"{path}: fmt chunk too short")
    audio_format, channels, sample_rate, _, _, bits = struct.unpack_from("<HHIIHH", fmt)
    if channels not in (1, 2):
        raise UnsupportedEncoding(f"{channels} channels; only mono/stereo supported")

    if audio_format == 1 and bits == 16:
        raw = np.frombuffer(data, dtype="<i2")
        samples = raw.astype(np.float64) / 32768.0
    elif audio_format == 3 and bits == 32:
        samples = np.frombuffer(data, dtype="<f4").astype(np.float64)
    else:
        raise UnsupportedEncoding(
            f"format tag {audio_format} with {bits} bits is not supported "
            "(PCM16 or float32 only)"
        )
    if channels == 2:
        if samples.size % 2:
            raise IoError(f"{path}: odd sample count for stereo data")
        samples = samples.reshape(-1, 2).mean(axis=1)
    return AudioBuffer(sample_rate=sample_rate, samples=samples)


def write_wav(buffer: AudioBuffer, path, encoding: str = "float32") -> None:
    samples = np.asarray(buffer.samples, dtype=np.float64)
    if not np.all(np.isfinite(samples)):
        raise IoError("samples must be finite")
    if encoding == "pcm16":
        scaled = np.clip(np.round(samples * 32768.0), -32768, 32767)
        payload = scaled.astype("<i2").tobytes()
        fmt_tag, bits = 1, 16
    elif encoding == "float32":
        payload = samples.astype("<f4").tobytes()
        fmt_tag, bits = 3, 32
    else:
        raise UnsupportedEncoding(f"unknown encoding {encoding!r}")

    block_align = bits // 8
    byte_rate = buffer.sample_rate * block_align
    fmt = struct.pack(
        "<HHIIHH", fmt_tag, 1, buffer.sample_rate, byte_rate, block_align, bits
    )
    chunks = [(b"fmt ", fmt)]
    if fmt_tag == 3:
        chunks.append((b"fact", struct.pack("<I", samples.size)))
    chunks.append((b"data", payload))
    body = b"".join(
        cid + struct.pack("<I", len(c)) + c + (b"\x00" if len(c) & 1 else b"")
        for cid, c in chunks
    )
    try:
        with open(path, "wb") as fh:
            fh.write(b"RIFF" + struct.pack("<I", 4 + len(body)) + b"WAVE" + body)
    except OSError as exc:
        raise IoError(str(exc)) from exc
