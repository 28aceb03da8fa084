"""Zero-range dynamics with annihilation and nucleation.

Two engines share one contract.  :func:`run_faithful` applies every mark of
a :class:`~rpng.marks.MarkLog` through :func:`apply_mark` in plain Python.
:func:`run_optimized` is a compiled event loop that only keeps clocks for
non-empty sites and nucleations; :func:`run_optimized_replay` drives the
compiled update with a mark log and must reproduce the faithful trajectory
exactly.

Window validity
---------------
The lattice is cut to sites ``-L..L``.  Sites near the cut can differ from
the infinite-lattice process once the cut matters: from time 0 when
``lam > 0`` (the missing outer edges would nucleate), otherwise once a
particle sits on a boundary site.  From there the possibly-wrong region can
only grow by one site per mark on the edge at its inner front, and the run
is flagged ``boundary_touched`` once that region reaches the central half
``|x| <= L // 2``.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .marks import Mark, MarkKind, MarkLog

__all__ = [
    "ConsistencyError",
    "LatticeState",
    "MarkOrderError",
    "SiteOccupancy",
    "Species",
    "Trajectory",
    "TrajectorySample",
    "apply_mark",
    "auto_half_width",
    "default_sample_times",
    "run_faithful",
    "run_optimized",
    "run_optimized_replay",
    "trajectory_csv",
    "occupancy_csv",
]

DEFAULT_PROBE = 16
NO_PLATEAU = _kernels.NO_PLATEAU


class MarkOrderError(ValueError):
    """A mark outside the window or earlier than the current state time."""


class ConsistencyError(RuntimeError):
    """Two bookkeepings of the same quantity disagree."""


class Species(enum.Enum):
    EMPTY = "empty"
    LEFT = "l"
    RIGHT = "r"


@dataclass(frozen=True)
class SiteOccupancy:
    count: int
    species: Species

    def __post_init__(self):
        if (self.count == 0) != (self.species is Species.EMPTY):
            raise ValueError("a site is empty exactly when its count is zero")
        if self.count < 0:
            raise ValueError("negative particle count")

    @classmethod
    def from_signed(cls, value: int) -> "SiteOccupancy":
        if value > 0:
            return cls(value, Species.LEFT)
        if value < 0:
            return cls(-value, Species.RIGHT)
        return cls(0, Species.EMPTY)


def auto_half_width(lam: float, horizon: float, kappa: float | None = None) -> int:
    """Default window half-width ``ceil(kappa * T)`` with ``kappa = 4 (1 + lam)``."""
    if kappa is None:
        kappa = 4.0 * (1.0 + lam)
    return max(1, math.ceil(kappa * horizon))


def default_sample_times(horizon: float, n: int = 200) -> np.ndarray:
    """``n`` uniform times on ``(0, T]``."""
    return np.linspace(0.0, horizon, n + 1)[1:]


@dataclass
class LatticeState:
    """Mutable lattice state on sites ``-L..L``.

    ``occupancy`` is signed per site (``+n`` for l-particles, ``-n`` for
    r-particles), indexed by ``x + L``.  ``heights`` is the height of every
    edge ``<x, x+1>`` maintained mark by mark, independent of the
    reconstruction in :mod:`rpng.height`.
    """

    half_width: int
    occupancy: list = None
    heights: list = None
    time: float = 0.0
    flow_left: int = 0
    flow_right: int = 0
    origin_nucleations: int = 0
    boundary_touched: bool = False
    lam_positive: bool = False
    left_front: int | None = None
    right_front: int | None = None

    def __post_init__(self):
        L = self.half_width
        if L < 1:
            raise ValueError("half_width must be >= 1")
        if self.occupancy is None:
            self.occupancy = [0] * (2 * L + 1)
        if self.heights is None:
            self.heights = [0] * (2 * L)
        self._seed_fronts()

    @classmethod
    def empty(cls, half_width: int, lam: float = 0.0) -> "LatticeState":
        return cls(half_width, lam_positive=lam > 0)

    def n(self, x: int) -> int:
        return abs(self.occupancy[x + self.half_width])

    def site(self, x: int) -> SiteOccupancy:
        return SiteOccupancy.from_signed(self.occupancy[x + self.half_width])

    def height(self, edge: int) -> int:
        return self.heights[edge + self.half_width]

    def copy(self) -> "LatticeState":
        return LatticeState(self.half_width, list(self.occupancy), list(self.heights), self.time,
                            self.flow_left, self.flow_right, self.origin_nucleations,
                            self.boundary_touched, self.lam_positive, self.left_front,
                            self.right_front)

    def signed_occupancy(self) -> np.ndarray:
        return np.array(self.occupancy, dtype=np.int64)

    def _seed_fronts(self):
        last = 2 * self.half_width
        if self.left_front is None and (self.lam_positive or self.occupancy[0] != 0):
            self.left_front = 0
        if self.right_front is None and (self.lam_positive or self.occupancy[last] != 0):
            self.right_front = last

    def _spread_fronts(self, j):
        L = self.half_width
        if self.left_front is not None and j == self.left_front:
            self.left_front += 1
        if self.right_front is not None and j == self.right_front - 1:
            self.right_front -= 1
        if ((self.left_front is not None and self.left_front >= L - L // 2)
                or (self.right_front is not None and self.right_front <= L + L // 2)):
            self.boundary_touched = True


# arrow kind -> (source offset from edge's left site, step, species sign)
_ARROWS = {
    MarkKind.ARROW_LEFT_ON_RIGHT: (1, -1, -1),
    MarkKind.ARROW_LEFT_ON_LEFT: (1, -1, 1),
    MarkKind.ARROW_RIGHT_ON_RIGHT: (0, 1, -1),
    MarkKind.ARROW_RIGHT_ON_LEFT: (0, 1, 1),
}


def apply_mark(state: LatticeState, mark: Mark) -> LatticeState:
    """Apply one mark in place and return the state.

    An arrow moves one particle of its own species from its source site, if
    there is one; the moved particle cancels against an opposite-species
    occupant.  A nucleation on ``<x, x+1>`` adds an l-particle at ``x`` and
    an r-particle at ``x + 1`` with the same cancellation rule.
    """
    L = state.half_width
    if not -L <= mark.edge < L:
        raise MarkOrderError(f"mark edge {mark.edge} outside window [-{L}, {L})")
    if mark.time < state.time:
        raise MarkOrderError(f"mark at t={mark.time} precedes state time {state.time}")
    j = mark.edge + L
    occ = state.occupancy
    if mark.kind.is_nucleation:
        occ[j] += 1
        occ[j + 1] -= 1
        state.heights[j] += 1
        if mark.edge == 0:
            state.origin_nucleations += 1
    else:
        offset, step, sign = _ARROWS[mark.kind]
        src = j + offset
        if occ[src] * sign > 0:
            occ[src] -= sign
            occ[src + step] += sign
            state.heights[j] -= sign * step
            if mark.edge == 0:
                if sign > 0:
                    state.flow_left += step
                else:
                    state.flow_right += step
    state.time = mark.time
    state._seed_fronts()
    state._spread_fronts(j)
    return state


@dataclass
class TrajectorySample:
    time: float
    height_at_origin: int
    flow_left: int
    flow_right: int
    origin_nucleations: int
    boundary_touched: bool
    probe_heights: np.ndarray = field(repr=False)
    probe_first_edge: int = 0
    first_layer: tuple = (NO_PLATEAU, -NO_PLATEAU)
    occupancy: np.ndarray | None = field(default=None, repr=False)
    heights: np.ndarray | None = field(default=None, repr=False)

    def height(self, edge: int) -> int:
        return int(self.probe_heights[edge - self.probe_first_edge])


@dataclass
class Trajectory:
    """Samples of one run in column form.

    ``probe_heights[k]`` holds the heights of edges
    ``probe_first_edge .. probe_first_edge + width - 1`` at ``times[k]``.
    """

    times: np.ndarray
    probe_first_edge: int
    probe_heights: np.ndarray
    flow_left: np.ndarray
    flow_right: np.ndarray
    origin_nucleations: np.ndarray
    touched: np.ndarray
    left_end: np.ndarray
    right_end: np.ndarray
    half_width: int
    final_occupancy: np.ndarray = field(default=None, repr=False)
    final_heights: np.ndarray = field(default=None, repr=False)
    snapshots_occupancy: np.ndarray | None = field(default=None, repr=False)
    snapshots_heights: np.ndarray | None = field(default=None, repr=False)
    n_events: int = 0

    @classmethod
    def from_kernel(cls, sample_times, probe_lo, heights, cols, half_width, **extra):
        return cls(
            times=np.asarray(sample_times, dtype=np.float64),
            probe_first_edge=probe_lo,
            probe_heights=heights,
            flow_left=cols[:, _kernels.COL_PHI_L].copy(),
            flow_right=cols[:, _kernels.COL_PHI_R].copy(),
            origin_nucleations=cols[:, _kernels.COL_NUC0].copy(),
            touched=cols[:, _kernels.COL_TOUCHED].astype(bool),
            left_end=cols[:, _kernels.COL_LEFT_END].copy(),
            right_end=cols[:, _kernels.COL_RIGHT_END].copy(),
            half_width=half_width,
            **extra,
        )

    def __len__(self):
        return len(self.times)

    @property
    def boundary_touched(self) -> bool:
        return bool(self.touched[-1]) if len(self.touched) else False

    def heights_at(self, edge: int) -> np.ndarray:
        idx = edge - self.probe_first_edge
        if not 0 <= idx < self.probe_heights.shape[1]:
            raise KeyError(f"edge {edge} is not among the probed edges")
        return self.probe_heights[:, idx]

    @property
    def origin_heights(self) -> np.ndarray:
        return self.heights_at(0)

    def samples(self) -> list[TrajectorySample]:
        out = []
        for k in range(len(self.times)):
            out.append(TrajectorySample(
                time=float(self.times[k]),
                height_at_origin=int(self.origin_heights[k]),
                flow_left=int(self.flow_left[k]),
                flow_right=int(self.flow_right[k]),
                origin_nucleations=int(self.origin_nucleations[k]),
                boundary_touched=bool(self.touched[k]),
                probe_heights=self.probe_heights[k],
                probe_first_edge=self.probe_first_edge,
                first_layer=(int(self.left_end[k]), int(self.right_end[k])),
                occupancy=None if self.snapshots_occupancy is None else self.snapshots_occupancy[k],
                heights=None if self.snapshots_heights is None else self.snapshots_heights[k],
            ))
        return out

    def to_bytes(self) -> bytes:
        """Canonical byte form used to compare trajectories across engines."""
        parts = [self.times, self.probe_heights, self.flow_left, self.flow_right,
                 self.origin_nucleations, self.touched.astype(np.int64), self.left_end,
                 self.right_end]
        return b"".join(np.ascontiguousarray(p).tobytes() for p in parts)


def _probe_range(half_width: int, probe: int) -> tuple[int, int]:
    """Edge range ``[-p, p)`` clipped to the window."""
    p = min(probe, half_width)
    return -p, p


def _check_samples(sample_times, horizon):
    st = np.asarray(sample_times, dtype=np.float64)
    if st.ndim != 1 or len(st) == 0:
        raise ValueError("need a non-empty 1-d grid of sample times")
    if np.any(np.diff(st) <= 0):
        raise ValueError("sample times must be strictly increasing")
    if st[0] < 0 or st[-1] > horizon:
        raise ValueError(f"sample times must lie in [0, {horizon}]")
    return st


def run_faithful(log: MarkLog, sample_times=None, *, probe: int = DEFAULT_PROBE,
                 snapshots: bool = False, on_sample=None) -> Trajectory:
    """Apply every mark of ``log`` in order to the empty lattice.

    ``on_sample(state)`` is called at every sample time with the live state,
    which lets callers run extra checks without copying it.
    """
    if sample_times is None:
        sample_times = default_sample_times(log.horizon)
    st = _check_samples(sample_times, log.horizon)
    L = log.half_width
    lo, hi = _probe_range(L, probe)
    state = LatticeState.empty(L, log.lam)
    ns = len(st)
    heights = np.zeros((ns, hi - lo), np.int64)
    cols = np.zeros((ns, _kernels.N_COLS), np.int64)
    snap_s = np.zeros((ns, 2 * L + 1), np.int64) if snapshots else None
    snap_h = np.zeros((ns, 2 * L), np.int64) if snapshots else None

    def record(k):
        heights[k] = state.heights[lo + L: hi + L]
        cols[k] = (state.flow_left, state.flow_right, state.origin_nucleations,
                   int(state.boundary_touched), *_first_layer(state))
        if snapshots:
            snap_s[k] = state.occupancy
            snap_h[k] = state.heights
        if on_sample is not None:
            on_sample(state)

    k = 0
    for mark in log:
        while k < ns and st[k] < mark.time:
            record(k)
            k += 1
        apply_mark(state, mark)
    while k < ns:
        record(k)
        k += 1
    return Trajectory.from_kernel(st, lo, heights, cols, L,
                                  final_occupancy=state.signed_occupancy(),
                                  final_heights=np.array(state.heights, np.int64),
                                  snapshots_occupancy=snap_s, snapshots_heights=snap_h,
                                  n_events=len(log))


def _first_layer(state: LatticeState) -> tuple[int, int]:
    L = state.half_width
    h = state.heights
    if h[L] < 1:
        return NO_PLATEAU, -NO_PLATEAU
    j = L
    while j > 0 and h[j - 1] >= 1:
        j -= 1
    left = j - L
    j = L
    while j < len(h) - 1 and h[j + 1] >= 1:
        j += 1
    return left, j + 1 - L


def run_optimized_replay(log: MarkLog, sample_times=None, *, probe: int = DEFAULT_PROBE,
                         snapshots: bool = False) -> Trajectory:
    """Compiled replay of ``log``; equal to :func:`run_faithful` byte for byte."""
    if sample_times is None:
        sample_times = default_sample_times(log.horizon)
    st = _check_samples(sample_times, log.horizon)
    L = log.half_width
    lo, hi = _probe_range(L, probe)
    ns = len(st)
    if snapshots:
        snap_s = np.zeros((ns, 2 * L + 1), np.int64)
        snap_h = np.zeros((ns, 2 * L), np.int64)
    else:
        snap_s = np.zeros((0, 0), np.int64)
        snap_h = np.zeros((0, 0), np.int64)
    heights, cols, s, h = _kernels.replay(log.times, log.edges, log.kinds, L, log.lam > 0,
                                          st, lo + L, hi + L, snap_s, snap_h)
    return Trajectory.from_kernel(st, lo, heights, cols, L, final_occupancy=s, final_heights=h,
                                  snapshots_occupancy=snap_s if snapshots else None,
                                  snapshots_heights=snap_h if snapshots else None,
                                  n_events=len(log))


def run_optimized(lam: float, lam0: float, half_width: int | None, horizon: float, seed: int,
                  sample_times=None, *, probe: int = DEFAULT_PROBE) -> Trajectory:
    """Active-site event loop sampled at ``sample_times``.

    Statistically equivalent to :func:`run_faithful` on a freshly generated
    log, but driven by its own random stream, so paths differ.
    """
    for name, v in (("lam", lam), ("lam0", lam0)):
        if not math.isfinite(v) or v < 0:
            raise ValueError(f"{name} must be finite and non-negative, got {v!r}")
    if not math.isfinite(horizon) or horizon <= 0:
        raise ValueError("horizon must be finite and positive")
    if half_width is None:
        half_width = auto_half_width(lam, horizon)
    if half_width < 1:
        raise ValueError("half_width must be >= 1")
    if sample_times is None:
        sample_times = default_sample_times(horizon)
    st = _check_samples(sample_times, horizon)
    lo, hi = _probe_range(half_width, probe)
    heights, cols, s, h, n_events = _kernels.gillespie(
        float(lam), float(lam0), int(half_width), float(horizon), _kernels.rng_state(seed),
        st, lo + half_width, hi + half_width)
    return Trajectory.from_kernel(st, lo, heights, cols, half_width, final_occupancy=s,
                                  final_heights=h, n_events=int(n_events))


def trajectory_csv(trajectories, stream=None) -> str:
    """CSV with columns replica, time, h_e0, phi_l, phi_r, nuc_e0, boundary_touched."""
    out = stream if stream is not None else io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["replica", "time", "h_e0", "phi_l", "phi_r", "nuc_e0", "boundary_touched"])
    for r, traj in enumerate(trajectories):
        h0 = traj.origin_heights
        for k in range(len(traj)):
            w.writerow([r, repr(float(traj.times[k])), int(h0[k]), int(traj.flow_left[k]),
                        int(traj.flow_right[k]), int(traj.origin_nucleations[k]),
                        int(traj.touched[k])])
    return out.getvalue() if stream is None else ""


def occupancy_csv(traj: Trajectory, stream=None) -> str:
    """Snapshot export: time, x, count, species (non-empty sites only)."""
    if traj.snapshots_occupancy is None:
        raise ValueError("trajectory was recorded without snapshots")
    out = stream if stream is not None else io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["time", "x", "count", "species"])
    L = traj.half_width
    for k, t in enumerate(traj.times):
        occ = traj.snapshots_occupancy[k]
        for i in np.flatnonzero(occ):
            v = int(occ[i])
            w.writerow([repr(float(t)), int(i) - L, abs(v), "l" if v > 0 else "r"])
    return out.getvalue() if stream is None else ""
