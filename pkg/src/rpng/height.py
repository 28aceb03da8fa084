"""Height interface recovered from particle data."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .engine import ConsistencyError, LatticeState
from .svg import Canvas

__all__ = [
    "HeightProfile",
    "full_profile",
    "height_at_origin",
    "integrated_height",
    "profile_csv",
    "profile_svg",
]


@dataclass(frozen=True)
class HeightProfile:
    """Heights ``h[i]`` of edges ``first_edge + i``."""

    first_edge: int
    h: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        arr = np.asarray(self.h, dtype=np.int64)
        arr.setflags(write=False)
        object.__setattr__(self, "h", arr)
        if arr.size and arr.min() < 0:
            raise ConsistencyError(f"negative height {arr.min()} in profile")

    @property
    def edges(self) -> np.ndarray:
        return np.arange(self.first_edge, self.first_edge + len(self.h))

    def __getitem__(self, edge: int) -> int:
        i = edge - self.first_edge
        if not 0 <= i < len(self.h):
            raise KeyError(edge)
        return int(self.h[i])

    @classmethod
    def from_state(cls, state: LatticeState) -> "HeightProfile":
        """Profile read off the incrementally maintained heights."""
        return cls(-state.half_width, np.array(state.heights, np.int64), state.time)


def height_at_origin(state: LatticeState) -> int:
    """Nucleations on the origin edge minus l-flow plus r-flow through it."""
    h0 = state.origin_nucleations - state.flow_left + state.flow_right
    if h0 < 0:
        raise ConsistencyError(f"height at the origin edge is negative ({h0})")
    return h0


def full_profile(state: LatticeState, h0: int | None = None) -> HeightProfile:
    """Integrate signed occupancies outward from the origin edge.

    Crossing site ``x`` to the right raises the height by ``n_x`` over an
    l-site and lowers it by ``n_x`` over an r-site; crossing to the left
    does the opposite.
    """
    if h0 is None:
        h0 = height_at_origin(state)
    L = state.half_width
    s = np.asarray(state.occupancy, dtype=np.int64)
    h = np.empty(2 * L, np.int64)
    h[L] = h0
    # h[j] = h[j-1] + s[j] with edge index j = x + L
    if L > 0:
        h[L + 1:] = h0 + np.cumsum(s[L + 1: 2 * L])
        h[:L] = h0 - np.cumsum(s[L:0:-1])[::-1]
    if h.min() < 0:
        raise ConsistencyError("reconstructed profile has a negative height")
    return HeightProfile(-L, h, state.time)


def integrated_height(profile: HeightProfile, Q: int) -> int:
    """Sum of heights over the ``2Q`` edges ``<x, x+1>`` with ``-Q <= x < Q``."""
    if int(Q) != Q or Q < 1:
        raise ValueError(f"Q must be a positive integer, got {Q!r}")
    lo = -Q - profile.first_edge
    hi = Q - profile.first_edge
    if lo < 0 or hi > len(profile.h):
        raise ValueError(f"Q={Q} exceeds the profile window")
    return int(profile.h[lo:hi].sum())


def profile_csv(profiles, stream=None) -> str:
    out = stream if stream is not None else io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["time", "edge", "height"])
    for p in profiles:
        for e, v in zip(p.edges.tolist(), p.h.tolist()):
            w.writerow([repr(float(p.time)), e, v])
    return out.getvalue() if stream is None else ""


def profile_svg(profiles, xlim=None) -> str:
    """Staircase rendering: edge ``<x, x+1>`` is the flat step over ``[x, x+1]``."""
    profiles = list(profiles)
    if not profiles:
        raise ValueError("nothing to draw")
    if xlim is None:
        lo = min(p.first_edge for p in profiles)
        hi = max(p.first_edge + len(p.h) for p in profiles)
        # trim empty flanks
        nz = [p.edges[p.h > 0] for p in profiles]
        nz = [a for a in nz if len(a)]
        if nz:
            lo = min(int(a.min()) for a in nz) - 2
            hi = max(int(a.max()) for a in nz) + 3
        xlim = (lo, hi)
    ymax = max(int(p.h.max()) if len(p.h) else 0 for p in profiles)
    c = Canvas(xlim, (0, max(ymax, 1)))
    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"]
    for n, p in enumerate(profiles):
        xs, ys = [], []
        for e, v in zip(p.edges.tolist(), p.h.tolist()):
            if xlim[0] <= e < xlim[1]:
                xs += [e, e + 1]
                ys += [v, v]
        c.polyline(xs, ys, stroke=palette[n % len(palette)], width=1.5)
        c.text(c.width - c.margin, c.margin + 14 * (n + 1), f"t = {p.time:g}", size=10, anchor="end")
    c.axes("x", "height", "height profile")
    return c.render()
