"""Space-time geometry of plateau boundaries.

Edge ``<x, x+1>`` is drawn as the strip ``[x, x+1]`` in space, time runs
upward.  Layer ``k`` is the space-time set where ``h >= k``; its boundary
is made of vertical segments at sites where exactly one neighbouring edge
is in the layer (the path of a plateau endpoint) and horizontal unit
segments at the instants an edge joins or leaves the layer (births, and
jumps of endpoints).  Every mark changes a single edge height by one, so
each boundary vertex has degree two and the segments chain into closed
loops or curves that end on the horizon.

The height at any point is recovered by counting, layer by layer, the
boundary curves a vertical ray from the point down to ``t = 0`` crosses:
an odd count means the point lies in that layer.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .engine import NO_PLATEAU, LatticeState, Trajectory, apply_mark
from .marks import MarkLog
from .svg import Canvas

__all__ = [
    "FirstLayerTrace",
    "LevelLine",
    "LevelLineSet",
    "first_layer_trace",
    "level_lines_json",
    "level_lines_svg",
    "trace_level_lines",
]


@dataclass
class LevelLine:
    """One boundary curve of layer ``layer``; vertices are ``(x, t)`` pairs."""

    layer: int
    vertices: list
    closed: bool
    candidate: bool = False

    def crossings_below(self, x: float, t: float) -> int:
        """Horizontal pieces strictly below ``(x, t)`` whose span contains ``x``."""
        n = 0
        v = self.vertices
        pairs = zip(v, v[1:] + v[:1]) if self.closed else zip(v, v[1:])
        for (xa, ta), (xb, tb) in pairs:
            if ta == tb and ta < t and min(xa, xb) < x < max(xa, xb):
                n += 1
        return n

    def horizon_span(self) -> tuple[float, float] | None:
        if self.closed:
            return None
        xs = (self.vertices[0][0], self.vertices[-1][0])
        return min(xs), max(xs)


@dataclass
class LevelLineSet:
    horizon: float
    half_width: int
    lines: list = field(default_factory=list)

    def layer(self, k: int) -> list[LevelLine]:
        return [c for c in self.lines if c.layer == k]

    @property
    def layers(self) -> list[int]:
        return sorted({c.layer for c in self.lines})

    def loops(self, k: int | None = None) -> list[LevelLine]:
        return [c for c in self.lines if c.closed and (k is None or c.layer == k)]

    def open_curves(self, k: int | None = None) -> list[LevelLine]:
        return [c for c in self.lines if not c.closed and (k is None or c.layer == k)]

    def height_at(self, edge: int, t: float) -> int:
        """Height of ``edge`` at time ``t`` from crossing parity, layer by layer."""
        x = edge + 0.5
        per_layer = defaultdict(int)
        for c in self.lines:
            per_layer[c.layer] += c.crossings_below(x, t)
        return sum(n % 2 for n in per_layer.values())

    def decomposition_at(self, edge: int, t: float) -> tuple[int, int]:
        """(open curves crossed an odd number of times, loops containing the point)."""
        x = edge + 0.5
        odd_open = sum(c.crossings_below(x, t) % 2 for c in self.open_curves())
        inside = sum(c.crossings_below(x, t) % 2 for c in self.loops())
        return odd_open, inside


def _chain(segments):
    """Join degree-2 segments into polylines; returns (vertex list, closed) pairs."""
    adj = defaultdict(list)
    for i, (a, b) in enumerate(segments):
        adj[a].append(i)
        adj[b].append(i)
    used = np.zeros(len(segments), bool)
    out = []

    def walk(start, first_seg):
        verts = [start]
        cur, seg = start, first_seg
        while True:
            used[seg] = True
            a, b = segments[seg]
            nxt = b if a == cur else a
            verts.append(nxt)
            nxt_segs = [s for s in adj[nxt] if not used[s]]
            if not nxt_segs:
                return verts, nxt == start
            cur, seg = nxt, nxt_segs[0]

    # open curves start at degree-1 vertices (horizon ends)
    for v, segs in adj.items():
        if len(segs) == 1 and not used[segs[0]]:
            verts, _ = walk(v, segs[0])
            out.append((verts, False))
    for i in range(len(segments)):
        if not used[i]:
            verts, closed = walk(segments[i][0], i)
            out.append((verts[:-1] if closed else verts, closed))
    return out


def _simplify(verts, closed):
    """Drop vertices in the middle of straight runs."""
    if len(verts) < 3:
        return verts
    keep = []
    n = len(verts)
    for i, v in enumerate(verts):
        if not closed and i in (0, n - 1):
            keep.append(v)
            continue
        p, q = verts[i - 1], verts[(i + 1) % n]
        if (p[0] == v[0] == q[0]) or (p[1] == v[1] == q[1]):
            continue
        keep.append(v)
    return keep


def trace_level_lines(log: MarkLog, horizon: float | None = None, *,
                      simplify: bool = True) -> LevelLineSet:
    """Replay ``log`` up to ``horizon`` and collect every layer boundary."""
    T = log.horizon if horizon is None else float(horizon)
    if not 0 < T <= log.horizon:
        raise ValueError("horizon must lie in (0, log.horizon]")
    L = log.half_width
    state = LatticeState.empty(L, log.lam)
    h = state.heights
    segs = defaultdict(list)   # layer -> [(p, q)]
    vstart = {}                # (layer, site coordinate) -> start time of open vertical piece

    def inside(k, j):
        return 0 <= j < 2 * L and h[j] >= k

    def boundary(k, c):
        # site coordinate c sits between edge indices c+L-1 and c+L
        return inside(k, c + L - 1) != inside(k, c + L)

    for mark in log:
        if mark.time > T:
            break
        j = mark.edge + L
        before = h[j]
        x = mark.edge
        was = {}
        for k in {before, before + 1} - {0}:
            for c in (x, x + 1):
                was[k, c] = boundary(k, c)
        apply_mark(state, mark)
        after = h[j]
        if after == before:
            continue
        k = max(before, after)
        t = mark.time
        segs[k].append(((x, t), (x + 1, t)))
        for c in (x, x + 1):
            now = boundary(k, c)
            if was[k, c]:
                segs[k].append(((c, vstart.pop((k, c))), (c, t)))
            if now:
                vstart[k, c] = t
    for (k, c), t0 in vstart.items():
        segs[k].append(((c, t0), (c, T)))

    out = LevelLineSet(T, L)
    for k in sorted(segs):
        curves = []
        for verts, closed in _chain(segs[k]):
            if simplify:
                verts = _simplify(verts, closed)
            curves.append(LevelLine(k, verts, closed))
        opened = [c for c in curves if not c.closed]
        if opened:
            widest = max(opened, key=lambda c: c.horizon_span()[1] - c.horizon_span()[0])
            widest.candidate = True
        out.lines.extend(curves)
    return out


@dataclass
class FirstLayerTrace:
    """Ends of the first-layer plateau containing the origin edge.

    ``left`` and ``right`` are the sites of its l- and r-endpoints, so it
    covers edges ``left .. right - 1``; both are infinite when the origin
    edge has height 0.
    """

    times: np.ndarray
    left: np.ndarray
    right: np.ndarray

    def covers(self, K: int) -> np.ndarray:
        """Samples at which edges ``-K .. K - 1`` lie under the plateau."""
        return (self.left <= -K) & (self.right >= K)

    def last_uncovered(self, K: int) -> tuple[float, bool]:
        """(last sample time with ``[-K, K]`` uncovered, censored flag).

        Censored means it is still uncovered at the final sample; ``0.0``
        means covered at every sample.
        """
        cov = self.covers(K)
        bad = np.flatnonzero(~cov)
        if not len(bad):
            return 0.0, False
        return float(self.times[bad[-1]]), bool(bad[-1] == len(cov) - 1)

    def beyond(self, speed: float) -> np.ndarray:
        """Samples with ``R_t > speed * t`` and ``L_t < -speed * t``."""
        return (self.right > speed * self.times) & (self.left < -speed * self.times)


def first_layer_trace(run: Trajectory) -> FirstLayerTrace:
    left = run.left_end.astype(np.float64)
    right = run.right_end.astype(np.float64)
    empty = run.left_end == NO_PLATEAU
    left[empty] = np.inf
    right[empty] = -np.inf
    return FirstLayerTrace(np.asarray(run.times, np.float64), left, right)


def level_lines_json(lines: LevelLineSet) -> str:
    data = [{"layer": c.layer, "closed": c.closed, "candidate": c.candidate,
             "vertices": [[float(x), float(t)] for x, t in c.vertices]} for c in lines.lines]
    return json.dumps({"horizon": lines.horizon, "half_width": lines.half_width,
                       "lines": data}, indent=1)


def level_lines_svg(lines: LevelLineSet, xlim=None, max_layer: int | None = None) -> str:
    """Time upward; loops thin, horizon-open curves bold."""
    shown = [c for c in lines.lines if max_layer is None or c.layer <= max_layer]
    if xlim is None:
        xs = [v[0] for c in shown for v in c.vertices]
        xlim = (min(xs) - 1, max(xs) + 1) if xs else (-1, 1)
    c = Canvas(xlim, (0, lines.horizon), width=720, height=540)
    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    for line in shown:
        xs = [v[0] for v in line.vertices]
        ts = [v[1] for v in line.vertices]
        if line.closed:
            xs.append(xs[0])
            ts.append(ts[0])
        colour = palette[(line.layer - 1) % len(palette)]
        c.polyline(xs, ts, stroke=colour, width=0.6 if line.closed else 1.8)
    c.axes("x", "time", "level lines")
    return c.render()
