"""DX7 SysEx bank parsing and per-operator oscillator frequency laws.

Reads the classic 32-voice bulk dump (4104 bytes): a 6-byte header,
4096 bytes of packed voice data (32 voices x 128 bytes), a 7-bit
two's-complement checksum and the EOX byte.  Fields the rest of the
toolchain never uses (LFO, key scaling, transpose, pitch EG) are decoded
only as far as needed to skip over them.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import BadHeader, ChecksumMismatch, IndexOutOfRange, WrongLength

BANK_FILE_SIZE = 4104
VOICE_COUNT = 32
PACKED_VOICE_SIZE = 128

# Detune is stored as 0..14 with 7 meaning "no detune"; each step away from
# center shifts the oscillator by this many cents.
DETUNE_CENTS_PER_STEP = 1.0


@dataclass(frozen=True)
class OperatorParams:
    """One oscillator's envelope and frequency settings."""

    eg_rates: tuple[int, int, int, int]
    eg_levels: tuple[int, int, int, int]
    freq_mode: str  # "ratio" or "fixed"
    freq_coarse: int
    freq_fine: int
    detune: int
    output_level: int
    velocity_sensitivity: int


@dataclass(frozen=True)
class Dx7Patch:
    """A fully decoded voice: routing, feedback and six operators.

    ``operators[0]`` is operator 1 (the packed dump stores operator 6
    first; decoding reverses that).
    """

    name: str
    algorithm: int  # 1..32
    feedback: int  # 0..7
    operators: tuple[OperatorParams, ...]


@dataclass(frozen=True)
class Dx7Bank:
    """32 packed voice records plus the checksum that validated them."""

    voices: tuple[bytes, ...]
    source_checksum: int


def _clamp(value: int, lo: int, hi: int) -> int:
    return min(max(value, lo), hi)


def parse_sysex_bank(data: bytes) -> Dx7Bank:
    """Parse and checksum-verify a 4104-byte 32-voice bulk dump."""
    if len(data) != BANK_FILE_SIZE:
        raise WrongLength(
            f"expected a {BANK_FILE_SIZE}-byte bulk dump, got {len(data)} bytes"
        )
    header = data[:6]
    expected = ((0, 0xF0), (1, 0x43), (3, 0x09), (4, 0x20), (5, 0x00))
    for offset, want in expected:
        if header[offset] != want:
            raise BadHeader(
                f"header byte at offset {offset} is 0x{header[offset]:02X}, "
                f"expected 0x{want:02X}"
            )
    if header[2] & 0xF0:
        raise BadHeader(f"status byte at offset 2 is 0x{header[2]:02X}, expected 0x0n")
    if data[-1] != 0xF7:
        raise BadHeader(f"terminator at offset {len(data) - 1} is not 0xF7")

    payload = data[6:-2]
    stored = data[-2]
    if (sum(payload) + stored) & 0x7F:
        raise ChecksumMismatch(
            f"stored checksum 0x{stored:02X} at offset {len(data) - 2} does not "
            f"match payload sum"
        )
    voices = tuple(
        bytes(payload[i * PACKED_VOICE_SIZE : (i + 1) * PACKED_VOICE_SIZE])
        for i in range(VOICE_COUNT)
    )
    return Dx7Bank(voices=voices, source_checksum=stored)


def _unpack_operator(raw: bytes) -> OperatorParams:
    # Packed operator record (17 bytes):
    #   0-3 EG rates, 4-7 EG levels, 8-10 keyboard scaling (ignored),
    #   11 curves (ignored), 12 = rate scaling | detune<<3,
    #   13 = AMS | velocity sensitivity<<2, 14 output level,
    #   15 = mode | coarse<<1, 16 fine
    rates = tuple(_clamp(b, 0, 99) for b in raw[0:4])
    levels = tuple(_clamp(b, 0, 99) for b in raw[4:8])
    detune = _clamp((raw[12] >> 3) & 0x0F, 0, 14)
    velocity_sensitivity = _clamp((raw[13] >> 2) & 0x07, 0, 7)
    output_level = _clamp(raw[14], 0, 99)
    freq_mode = "fixed" if raw[15] & 0x01 else "ratio"
    freq_coarse = _clamp((raw[15] >> 1) & 0x1F, 0, 31)
    freq_fine = _clamp(raw[16], 0, 99)
    return OperatorParams(
        eg_rates=rates,
        eg_levels=levels,
        freq_mode=freq_mode,
        freq_coarse=freq_coarse,
        freq_fine=freq_fine,
        detune=detune,
        output_level=output_level,
        velocity_sensitivity=velocity_sensitivity,
    )


def unpack_voice(bank: Dx7Bank, index: int) -> Dx7Patch:
    """Decode one packed 128-byte voice; out-of-range bytes are clamped."""
    if not 0 <= index < VOICE_COUNT:
        raise IndexOutOfRange(f"voice index {index} outside 0..{VOICE_COUNT - 1}")
    raw = bank.voices[index]
    # Operators are stored 6..1; reverse so operators[0] is operator 1.
    packed_ops = [raw[i * 17 : (i + 1) * 17] for i in range(6)]
    operators = tuple(_unpack_operator(op) for op in reversed(packed_ops))
    common = raw[102:128]
    algorithm = (common[8] & 0x1F) + 1  # stored value is algorithm - 1
    feedback = common[9] & 0x07
    name = "".join(
        chr(b & 0x7F) if 32 <= (b & 0x7F) < 127 else " " for b in common[16:26]
    )
    return Dx7Patch(
        name=name, algorithm=algorithm, feedback=feedback, operators=operators
    )


def op_frequency(op: OperatorParams, f0: float) -> float:
    """Oscillator frequency in Hz for a played fundamental ``f0``.

    Ratio mode scales the fundamental by the coarse/fine ratio (coarse 0
    means x0.5) and applies the detune offset in cents.  Fixed mode uses
    the decade/percent mapping and ignores the fundamental.
    """
    if op.freq_mode == "fixed":
        return 10.0 ** (op.freq_coarse % 4) * 10.0 ** (op.freq_fine / 100.0)
    coarse = 0.5 if op.freq_coarse == 0 else float(op.freq_coarse)
    freq = f0 * coarse * (1.0 + op.freq_fine / 100.0)
    cents = (op.detune - 7) * DETUNE_CENTS_PER_STEP
    return freq * 2.0 ** (cents / 1200.0)


def patch_summary(patch: Dx7Patch) -> str:
    """Human-readable one-voice summary (name, algorithm, operator table)."""
    lines = [
        f"name:      {patch.name!r}",
        f"algorithm: {patch.algorithm}",
        f"feedback:  {patch.feedback}",
        " op  mode   coarse fine det  OL  vel  rates        levels",
    ]
    for i, op in enumerate(patch.operators, start=1):
        rates = ",".join(f"{r:2d}" for r in op.eg_rates)
        levels = ",".join(f"{l:2d}" for l in op.eg_levels)
        lines.append(
            f"  {i}  {op.freq_mode:<6} {op.freq_coarse:4d} {op.freq_fine:4d} "
            f"{op.detune:3d} {op.output_level:3d} {op.velocity_sensitivity:3d}  "
            f"{rates}  {levels}"
        )
    return "\n".join(lines)
