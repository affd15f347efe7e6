"""fmtone: tone transfer onto a six-operator FM synthesizer.

The toolchain learns, from a synthesizer voice, a frame-rate mapping from
two audio features (normalized amplitude and pitch) to the six oscillator
envelope levels, then drives a phase-modulation oscillator bank with the
predictions to re-render monophonic audio in the learned timbre.
"""

__version__ = "0.1.0"
