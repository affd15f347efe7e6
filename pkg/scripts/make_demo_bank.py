#!/usr/bin/env python3
"""Write a synthetic 32-voice bank (demo_bank.syx) for trying the toolchain.

Voice 10 is an electric-piano-style patch; the rest are simple filler
voices spread over the 32 algorithms.  The output is a standard 4104-byte
32-voice bulk dump, so any bank you already have works just as well.
"""

import argparse


def pack_operator(rates, levels, output_level, mode=0, coarse=1, fine=0,
                  detune=7, velocity=0):
    data = list(rates) + list(levels)
    data += [
        0, 0, 0, 0,               # keyboard scaling, unused here
        (detune << 3) | 0,        # detune | rate scaling
        (velocity << 2) | 0,      # velocity sensitivity | AMS
        output_level,
        (coarse << 1) | mode,
        fine,
    ]
    return bytes(data)


def pack_voice(name, algorithm, feedback, ops):
    packed = b"".join(pack_operator(**op) for op in reversed(ops))
    common = [50] * 8                       # pitch EG, unused
    common += [algorithm - 1, feedback, 35, 0, 0, 0, 0, 24]
    return packed + bytes(common) + name.ljust(10)[:10].encode("ascii")


def epiano_ops():
    carrier = dict(rates=(95, 40, 30, 82), levels=(99, 85, 45, 0),
                   output_level=99, coarse=1, velocity=1)
    return [
        dict(carrier),
        dict(rates=(96, 60, 50, 85), levels=(99, 70, 0, 0), output_level=72,
             coarse=14, velocity=2),
        dict(carrier),
        dict(rates=(96, 62, 50, 85), levels=(99, 75, 0, 0), output_level=78,
             coarse=1, velocity=2),
        dict(carrier),
        dict(rates=(90, 60, 45, 85), levels=(99, 80, 30, 0), output_level=58,
             coarse=1, velocity=0),
    ]


def filler_ops():
    return [
        dict(rates=(95, 50, 35, 75), levels=(99, 90, 60, 0), output_level=99),
        dict(rates=(95, 55, 40, 80), levels=(99, 80, 40, 0), output_level=70, coarse=2),
        dict(rates=(95, 50, 35, 75), levels=(99, 90, 60, 0), output_level=85),
        dict(rates=(95, 55, 40, 80), levels=(99, 80, 40, 0), output_level=60, coarse=3),
        dict(rates=(95, 50, 35, 75), levels=(99, 90, 60, 0), output_level=80),
        dict(rates=(95, 55, 40, 80), levels=(99, 80, 40, 0), output_level=55, coarse=1),
    ]


def build_bank():
    voices = [
        pack_voice(f"VOICE {i:02d}", (i % 32) + 1, i % 8, filler_ops())
        for i in range(32)
    ]
    voices[10] = pack_voice("E.PIANO 1", 5, 3, epiano_ops())
    payload = b"".join(voices)
    assert len(payload) == 4096
    checksum = (-sum(payload)) & 0x7F
    return bytes([0xF0, 0x43, 0x00, 0x09, 0x20, 0x00]) + payload + bytes([checksum, 0xF7])


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="demo_bank.syx")
    args = parser.parse_args()
    with open(args.out, "wb") as fh:
        fh.write(build_bank())
    print(f"wrote {args.out} (voice 10 = E.PIANO 1)")


if __name__ == "__main__":
    main()
