"""
Exception hierarchy for the simulator. Anything the caller got wrong (bad lengths, zero coefficients, malformed files)
is also a ValueError so generic input handling keeps working.
"""


class SeekDecodeError(Exception):
    pass


class FieldError(SeekDecodeError, ValueError):
    "Invalid finite-field input: zero has no inverse, reducible polynomial, element out of range"


class CodeError(SeekDecodeError, ValueError):
    "Channel code misuse or an unusable parity-check matrix"


class AlistError(CodeError):
    "Malformed or truncated alist text"


class ChannelError(SeekDecodeError, ValueError):
    "Bursts and channel realization do not fit together"


class FrameError(SeekDecodeError, ValueError):
    "Frame planning or assembly problem"


class BoundTruncationError(SeekDecodeError):
    "A truncated series in the throughput bound would leave a tail above the configured tolerance"


class ConfigError(SeekDecodeError):
    "Invalid experiment configuration or unusable output location"
