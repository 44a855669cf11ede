"""Exception hierarchy shared across the engine.

Exit-code contract used by the CLI: 0 success, 1 validation, 2 data, 3 runtime.
"""

from __future__ import annotations


class DriftcastError(Exception):
    """Base class for engine failures; maps to a runtime exit code."""

    exit_code = 3


class ConfigError(DriftcastError):
    """Invalid run configuration (unknown key, violated constraint)."""

    exit_code = 1


class DataError(DriftcastError):
    """Input data violates the declared contract."""

    exit_code = 2


class SchemaError(DataError):
    """CSV does not carry the columns the column-role mapping requires."""


class FormatError(DataError):
    """Malformed rows: unparsable, duplicated or misaligned timestamps."""


class UnrecoverableGapError(DataError):
    """A missing-value run too long to interpolate."""


class InsufficientDataError(DataError):
    """Series too short for the requested operation."""


class AlignmentError(DataError):
    """Two runs being compared do not share the same forecast origins."""


class ProtocolError(DriftcastError):
    """Test-then-train discipline violated (out-of-order instances)."""


class DegenerateTestError(DriftcastError):
    """Statistical test undefined for the given inputs (zero variance)."""
