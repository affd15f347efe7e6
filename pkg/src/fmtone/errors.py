"""Error taxonomy shared by all fmtone modules.

Every error carries a short machine-parsable ``category`` used by the CLI
for its one-line error output and exit status.
"""


class FmToneError(Exception):
    category = "error"


class WrongLength(FmToneError):
    category = "wrong-length"


class BadHeader(FmToneError):
    category = "bad-header"


class ChecksumMismatch(FmToneError):
    category = "checksum-mismatch"


class IndexOutOfRange(FmToneError):
    category = "index-out-of-range"


class VelocityOutOfRange(FmToneError):
    category = "velocity-out-of-range"


class BadFrameOrdering(FmToneError):
    category = "bad-frame-ordering"


class TupleOverflow(FmToneError):
    category = "tuple-overflow"


class DatasetTooSmall(FmToneError):
    category = "dataset-too-small"


class EmptyDataset(FmToneError):
    category = "empty-dataset"


class IoError(FmToneError):
    category = "io"


class BadMagic(FmToneError):
    category = "bad-magic"


class VersionMismatch(FmToneError):
    category = "version-mismatch"


class ShapeMismatch(FmToneError):
    category = "shape-mismatch"


class UnknownAlgorithm(FmToneError):
    category = "unknown-algorithm"


class UnsupportedSampleRate(FmToneError):
    category = "unsupported-sample-rate"


class UnsupportedEncoding(FmToneError):
    category = "unsupported-encoding"


class EmptyInput(FmToneError):
    category = "empty-input"


class ZeroReference(FmToneError):
    category = "zero-reference"


class NoNoteFound(FmToneError):
    category = "no-note-found"


class NoRampFound(FmToneError):
    category = "no-ramp-found"
