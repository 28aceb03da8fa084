"""Poisson mark systems of the graphical construction.

A :class:`MarkLog` is the complete random input of a run on the window of
edges ``<x, x+1>`` with ``-L <= x < L``: four arrow families of intensity
1/2 per edge, bulk nucleations of intensity ``lam`` per edge and defect
nucleations of intensity ``lam0`` on the origin edge ``<0, 1>``.

Each (edge, family) stream comes from its own Philox generator keyed by
``(seed, edge, family)``, so a mark stream on a given edge does not depend
on the window size or on the order in which streams are drawn.
"""

from __future__ import annotations

import enum
import io
import math
import struct
import zlib
from dataclasses import dataclass
from typing import Iterator

import numpy as np

__all__ = [
    "ARROW_RATE",
    "ChecksumError",
    "FormatVersionError",
    "LogFormatError",
    "Mark",
    "MarkKind",
    "MarkLog",
    "TruncatedLogError",
    "deserialize_log",
    "export_text",
    "generate_marks",
    "serialize_log",
    "thin_defect",
]

ARROW_RATE = 0.5
MAGIC = b"RPNG"
FORMAT_VERSION = 1

# little-endian, no padding
_HEADER = struct.Struct("<4sHddqQdQ")
_RECORD = np.dtype([("time", "<f8"), ("edge", "<i4"), ("kind", "u1")])
_CRC = struct.Struct("<I")


class MarkKind(enum.IntEnum):
    """Mark families; the ordinal is the tiebreak order."""

    ARROW_LEFT_ON_RIGHT = 0  # r-particles jump left
    ARROW_LEFT_ON_LEFT = 1  # l-particles jump left
    ARROW_RIGHT_ON_RIGHT = 2  # r-particles jump right
    ARROW_RIGHT_ON_LEFT = 3  # l-particles jump right
    NUCLEATION = 4
    DEFECT_NUCLEATION = 5

    @property
    def is_arrow(self) -> bool:
        return self <= MarkKind.ARROW_RIGHT_ON_LEFT

    @property
    def is_nucleation(self) -> bool:
        return self >= MarkKind.NUCLEATION


ARROW_KINDS = tuple(k for k in MarkKind if k.is_arrow)


class LogFormatError(ValueError):
    """Malformed serialized mark log."""


class FormatVersionError(LogFormatError):
    pass


class TruncatedLogError(LogFormatError):
    pass


class ChecksumError(LogFormatError):
    pass


@dataclass(frozen=True, order=True)
class Mark:
    time: float
    edge: int
    kind: MarkKind

    def __post_init__(self):
        if not self.time > 0 or not math.isfinite(self.time):
            raise ValueError(f"mark time must be finite and positive, got {self.time}")
        if self.kind == MarkKind.DEFECT_NUCLEATION and self.edge != 0:
            raise ValueError("defect nucleations live on the origin edge only")


@dataclass(frozen=True, eq=False)
class MarkLog:
    """Chronologically ordered marks plus the parameters that produced them.

    Marks are stored column-wise; iterate the log to get :class:`Mark`
    objects.
    """

    lam: float
    lam0: float
    half_width: int
    horizon: float
    seed: int
    times: np.ndarray
    edges: np.ndarray
    kinds: np.ndarray

    def __post_init__(self):
        for name, dtype in (("times", np.float64), ("edges", np.int32), ("kinds", np.uint8)):
            arr = np.ascontiguousarray(getattr(self, name), dtype=dtype)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = len(self.times)
        if len(self.edges) != n or len(self.kinds) != n:
            raise ValueError("mark columns have different lengths")

    def __len__(self) -> int:
        return len(self.times)

    def __iter__(self) -> Iterator[Mark]:
        for t, e, k in zip(self.times.tolist(), self.edges.tolist(), self.kinds.tolist()):
            yield Mark(t, e, MarkKind(k))

    def __eq__(self, other) -> bool:
        if not isinstance(other, MarkLog):
            return NotImplemented
        return serialize_log(self) == serialize_log(other)

    def __hash__(self) -> int:
        return hash(serialize_log(self))

    @property
    def n_edges(self) -> int:
        return 2 * self.half_width

    def count(self, kind: MarkKind) -> int:
        return int(np.count_nonzero(self.kinds == kind))

    def without_defect(self) -> "MarkLog":
        keep = self.kinds != MarkKind.DEFECT_NUCLEATION
        return MarkLog(self.lam, 0.0, self.half_width, self.horizon, self.seed,
                       self.times[keep], self.edges[keep], self.kinds[keep])

    @classmethod
    def from_marks(cls, marks, *, lam=0.0, lam0=0.0, half_width=1, horizon=1.0, seed=0) -> "MarkLog":
        """Build a log from explicit marks (sorted here); used for fixtures."""
        marks = sorted(marks, key=lambda m: (m.time, m.edge, int(m.kind)))
        for m in marks:
            if not -half_width <= m.edge < half_width:
                raise ValueError(f"mark edge {m.edge} outside window of half-width {half_width}")
            if m.time > horizon:
                raise ValueError(f"mark time {m.time} beyond horizon {horizon}")
        return cls(lam, lam0, half_width, horizon, seed,
                   np.array([m.time for m in marks], dtype=np.float64),
                   np.array([m.edge for m in marks], dtype=np.int32),
                   np.array([int(m.kind) for m in marks], dtype=np.uint8))


def _check_rate(name, value):
    if not math.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be finite and non-negative, got {value!r}")


def _stream_key(seed: int, edge: int, kind: int) -> np.ndarray:
    ss = np.random.SeedSequence([seed, edge & 0xFFFFFFFF, kind])
    return ss.generate_state(2, dtype=np.uint64)


def _poisson_times(rng: np.random.Generator, rate: float, horizon: float) -> np.ndarray:
    """Arrival times of a rate-``rate`` Poisson process on (0, horizon]."""
    if rate == 0.0:
        return np.empty(0)
    mean = rate * horizon
    batch = int(mean + 6.0 * math.sqrt(mean) + 16)
    times = np.cumsum(rng.exponential(1.0 / rate, size=batch))
    while times[-1] <= horizon:
        more = times[-1] + np.cumsum(rng.exponential(1.0 / rate, size=batch))
        times = np.concatenate([times, more])
    return times[: np.searchsorted(times, horizon, side="right")]


def edge_stream(seed: int, edge: int, kind: MarkKind, rate: float, horizon: float) -> np.ndarray:
    """Mark times of one (edge, family) stream; independent of the window."""
    rng = np.random.Generator(np.random.Philox(key=_stream_key(seed, edge, int(kind))))
    return _poisson_times(rng, rate, horizon)


def generate_marks(lam: float, lam0: float, half_width: int, horizon: float, seed: int) -> MarkLog:
    """Sample every mark on edges ``-L..L-1`` up to ``horizon``."""
    _check_rate("lam", lam)
    _check_rate("lam0", lam0)
    if not math.isfinite(horizon) or horizon <= 0:
        raise ValueError(f"horizon must be finite and positive, got {horizon!r}")
    if int(half_width) != half_width or half_width < 1:
        raise ValueError(f"half_width must be an integer >= 1, got {half_width!r}")
    half_width = int(half_width)
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must fit in an unsigned 64-bit integer, got {seed}")

    times, edges, kinds = [], [], []
    for edge in range(-half_width, half_width):
        for kind in MarkKind:
            if kind == MarkKind.DEFECT_NUCLEATION:
                if edge != 0:
                    continue
                rate = lam0
            elif kind == MarkKind.NUCLEATION:
                rate = lam
            else:
                rate = ARROW_RATE
            t = edge_stream(seed, edge, kind, rate, horizon)
            if len(t):
                times.append(t)
                edges.append(np.full(len(t), edge, dtype=np.int32))
                kinds.append(np.full(len(t), int(kind), dtype=np.uint8))

    if times:
        t = np.concatenate(times)
        e = np.concatenate(edges)
        k = np.concatenate(kinds)
        order = np.lexsort((k, e, t))
        t, e, k = t[order], e[order], k[order]
    else:
        t, e, k = np.empty(0), np.empty(0, np.int32), np.empty(0, np.uint8)
    return MarkLog(float(lam), float(lam0), half_width, float(horizon), seed, t, e, k)


def thin_defect(log: MarkLog, lam0: float, seed: int) -> MarkLog:
    """Keep each defect mark with probability ``lam0 / log.lam0``.

    The result is a log with defect rate ``lam0`` coupled to ``log``: its
    defect marks are a subset of the original ones, everything else is shared.
    """
    _check_rate("lam0", lam0)
    if lam0 > log.lam0:
        raise ValueError("thinning can only lower the defect rate")
    defect = log.kinds == MarkKind.DEFECT_NUCLEATION
    rng = np.random.Generator(np.random.Philox(key=_stream_key(seed, 0, 99)))
    u = rng.random(int(defect.sum()))
    keep = np.ones(len(log), dtype=bool)
    keep[defect] = u < (lam0 / log.lam0 if log.lam0 > 0 else 0.0)
    return MarkLog(log.lam, float(lam0), log.half_width, log.horizon, log.seed,
                   log.times[keep], log.edges[keep], log.kinds[keep])


def serialize_log(log: MarkLog) -> bytes:
    """Binary layout: header, packed (time f8, edge i4, kind u1) records, CRC-32."""
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, log.lam, log.lam0, log.half_width,
                          log.seed, log.horizon, len(log))
    records = np.empty(len(log), dtype=_RECORD)
    records["time"] = log.times
    records["edge"] = log.edges
    records["kind"] = log.kinds
    body = header + records.tobytes()
    return body + _CRC.pack(zlib.crc32(body))


def deserialize_log(blob: bytes) -> MarkLog:
    blob = bytes(blob)
    if len(blob) < _HEADER.size + _CRC.size:
        if blob[:4] and not MAGIC.startswith(blob[:4]):
            raise LogFormatError("not a mark log (bad magic)")
        raise TruncatedLogError(f"blob of {len(blob)} bytes is shorter than the header")
    magic, version, lam, lam0, half_width, seed, horizon, count = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise LogFormatError("not a mark log (bad magic)")
    if version != FORMAT_VERSION:
        raise FormatVersionError(f"unsupported format version {version}, expected {FORMAT_VERSION}")
    expected = _HEADER.size + count * _RECORD.itemsize + _CRC.size
    if len(blob) < expected:
        raise TruncatedLogError(f"expected {expected} bytes for {count} marks, got {len(blob)}")
    if len(blob) > expected:
        raise LogFormatError(f"{len(blob) - expected} trailing bytes after checksum")
    (crc,) = _CRC.unpack_from(blob, expected - _CRC.size)
    if zlib.crc32(blob[: expected - _CRC.size]) != crc:
        raise ChecksumError("CRC-32 mismatch")
    records = np.frombuffer(blob, dtype=_RECORD, count=count, offset=_HEADER.size)
    return MarkLog(lam, lam0, half_width, horizon, seed,
                   records["time"].copy(), records["edge"].copy(), records["kind"].copy())


def export_text(log: MarkLog, stream: io.TextIOBase | None = None) -> str:
    """One mark per line: ``time edge KIND``. Returns the text if no stream given."""
    out = stream if stream is not None else io.StringIO()
    out.write(f"# lam={log.lam!r} lam0={log.lam0!r} L={log.half_width} "
              f"T={log.horizon!r} seed={log.seed} marks={len(log)}\n")
    names = [k.name for k in MarkKind]
    for t, e, k in zip(log.times.tolist(), log.edges.tolist(), log.kinds.tolist()):
        out.write(f"{t!r} {e} {names[k]}\n")
    if stream is None:
        return out.getvalue()
    return ""
