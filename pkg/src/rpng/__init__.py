"""Randomized poly-nuclear growth with a columnar defect.

Simulation engines, height bookkeeping, coupled defect runs, level-line
geometry, the half-line wall model and speed estimators.
"""

__version__ = "0.1.0"

from .marks import (ChecksumError, FormatVersionError, LogFormatError, Mark, MarkKind, MarkLog,
                    TruncatedLogError, deserialize_log, generate_marks, serialize_log)
from .engine import (LatticeState, Trajectory, apply_mark, auto_half_width, run_faithful,
                     run_optimized, run_optimized_replay)

__all__ = [
    "ChecksumError",
    "FormatVersionError",
    "LatticeState",
    "LogFormatError",
    "Mark",
    "MarkKind",
    "MarkLog",
    "Trajectory",
    "TruncatedLogError",
    "apply_mark",
    "auto_half_width",
    "deserialize_log",
    "generate_marks",
    "run_faithful",
    "run_optimized",
    "run_optimized_replay",
    "serialize_log",
    "__version__",
]
