"""Exception hierarchy shared by all zstripe modules.

Two branches matter for the CLI exit-code mapping: ConfigError maps to
exit code 1, every other ZStripeError to exit code 2 (bad inputs or
format violations), anything else to 3.
"""

from __future__ import annotations


class ZStripeError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ZStripeError):
    """Invalid or inconsistent pipeline configuration."""


# --- container / file format errors -----------------------------------------

class MagicMismatch(ZStripeError):
    """File does not start with the FSEQ magic bytes."""


class TruncatedPayload(ZStripeError):
    """FSEQ payload is shorter than the header declares."""


class InvalidHeader(ZStripeError):
    """FSEQ header carries impossible geometry or an unknown channel type."""


class IoFailure(ZStripeError):
    """Underlying OS-level read or write failed."""


class MissingIndex(ZStripeError):
    """Gap in a numbered PGM frame directory."""


class UnsupportedPgm(ZStripeError):
    """PGM file is not binary 8-bit P5 with maxval 255."""


class ParseError(ZStripeError):
    """Malformed CSV row; message names the offending line."""


# --- geometry / stream errors ------------------------------------------------

class GeometryMismatch(ZStripeError):
    """Two inputs that must share geometry do not."""


class GeometryError(ZStripeError):
    """Requested synthetic geometry cannot produce a valid scenario."""


class DegenerateCell(ZStripeError):
    """Grid rasterization produced a zero-area cell or unordered edges."""


class UnorderedInput(ZStripeError):
    """Stream frames are not strictly increasing."""


# --- code-space errors --------------------------------------------------------

class CoordOverflow(ZStripeError):
    """Coordinate does not fit in the configured bits per dimension."""


class CodeOverflow(ZStripeError):
    """Morton code exceeds the configured code width."""


# --- evaluation errors --------------------------------------------------------

class UnknownScenario(ZStripeError):
    """Prediction references a scenario absent from the ground truth."""


class InvalidTiming(ZStripeError):
    """Throughput computation asked for zero frames or nonpositive time."""
