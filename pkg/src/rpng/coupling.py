"""Homogeneous and defect dynamics on shared marks.

The base system sees every arrow and bulk nucleation; the perturbed system
additionally sees the defect nucleations on the origin edge.  Attractiveness
keeps ``h' >= h`` everywhere, and the discrepancy ``h~ = h' - h`` is carried
by virtual particles: site ``x`` holds ``|h~(e_{x-1}) - h~(e_x)|`` of them,
virtual-r when the difference is positive and virtual-l when negative
(the same sign convention as real particles).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import _kernels
from .engine import (DEFAULT_PROBE, ConsistencyError, LatticeState, apply_mark, auto_half_width,
                     default_sample_times, _check_samples)
from .marks import Mark, MarkKind, MarkLog

__all__ = [
    "CoupledRun",
    "DominationWitness",
    "ArrowCase",
    "SymmetryAudit",
    "VirtualField",
    "coupled_trace_csv",
    "delta_csv",
    "domination_witness",
    "arrow_cases",
    "arrow_fixture_states",
    "run_coupled",
    "run_coupled_stream",
    "virtual_field_csv",
    "virtual_symmetry_audit",
]

# virtual jump columns
FAR_LEFT, FAR_RIGHT, NEAR_LEFT, NEAR_RIGHT = range(4)


@dataclass(frozen=True)
class VirtualField:
    """Signed virtual occupancy of sites ``first_site ..``: >0 virtual-r, <0 virtual-l."""

    first_site: int
    signed: np.ndarray
    time: float = 0.0

    @classmethod
    def from_discrepancy(cls, first_edge: int, h_tilde: np.ndarray, time: float = 0.0):
        h_tilde = np.asarray(h_tilde, np.int64)
        return cls(first_edge + 1, h_tilde[:-1] - h_tilde[1:], time)

    @property
    def counts(self) -> np.ndarray:
        return np.abs(self.signed)

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.first_site, self.first_site + len(self.signed))

    def at(self, x: int) -> int:
        return int(self.signed[x - self.first_site])

    def species(self, x: int) -> str | None:
        v = self.at(x)
        return "r" if v > 0 else "l" if v < 0 else None

    def mass(self, species: str, lo=None, hi=None) -> int:
        """Virtual particles of one species on sites ``lo <= x <= hi``."""
        sel = np.ones(len(self.signed), bool)
        if lo is not None:
            sel &= self.sites >= lo
        if hi is not None:
            sel &= self.sites <= hi
        v = self.signed[sel]
        return int(v[v > 0].sum()) if species == "r" else int(-v[v < 0].sum())


@dataclass
class CoupledRun:
    """Sampled output of one coupled run.

    ``h`` and ``h_prime`` hold probe-edge heights per sample;
    ``vjumps[k]`` counts virtual jumps in ``(t_{k-1}, t_k]`` as
    ``[far_left, far_right, near_left, near_right]`` where *near* means the
    jump left site 0 or 1.
    """

    lam: float
    lam0: float
    half_width: int
    times: np.ndarray
    probe_first_edge: int
    h: np.ndarray
    h_prime: np.ndarray
    cols: np.ndarray = field(repr=False)
    cols_prime: np.ndarray = field(repr=False)
    checks: np.ndarray = field(repr=False)
    vjumps: np.ndarray = field(repr=False)
    final_occupancy: np.ndarray = field(repr=False)
    final_heights: np.ndarray = field(repr=False)
    final_occupancy_prime: np.ndarray = field(repr=False)
    final_heights_prime: np.ndarray = field(repr=False)

    @property
    def h_tilde(self) -> np.ndarray:
        return self.h_prime - self.h

    def column(self, edge: int, prime: bool = False) -> np.ndarray:
        i = edge - self.probe_first_edge
        if not 0 <= i < self.h.shape[1]:
            raise KeyError(f"edge {edge} was not probed")
        return (self.h_prime if prime else self.h)[:, i]

    @property
    def delta(self) -> np.ndarray:
        """``h'(e0) - max(h'(e_-1), h'(e_1))`` per sample."""
        return self.column(0, True) - np.maximum(self.column(-1, True), self.column(1, True))

    @property
    def base_delta(self) -> np.ndarray:
        return self.column(0) - np.maximum(self.column(-1), self.column(1))

    @property
    def touched(self) -> bool:
        return bool(self.cols[-1, _kernels.COL_TOUCHED])

    @property
    def monotonicity_violations(self) -> int:
        return int(self.checks[:, 0].sum())

    @property
    def domination_violations(self) -> tuple[int, int]:
        return int(self.checks[:, 1].sum()), int(self.checks[:, 2].sum())

    def virtual_field(self, k: int) -> VirtualField:
        return VirtualField.from_discrepancy(self.probe_first_edge, self.h_tilde[k], float(self.times[k]))

    def final_virtual_field(self) -> VirtualField:
        return VirtualField.from_discrepancy(-self.half_width,
                                             self.final_heights_prime - self.final_heights)

    def positivity(self) -> np.ndarray:
        """Per sample: virtual-l at site 0 and virtual-r at site 1."""
        ht = self.h_tilde
        i = -self.probe_first_edge  # column of e0
        sigma0 = ht[:, i - 1] - ht[:, i]
        sigma1 = ht[:, i] - ht[:, i + 1]
        return (sigma0 < 0) & (sigma1 > 0)

    @property
    def t_star_index(self) -> int | None:
        """First sample from which positivity holds up to the horizon, if any."""
        good = self.positivity()
        if not len(good) or not good[-1]:
            return None
        bad = np.flatnonzero(~good)
        return int(bad[-1] + 1) if len(bad) else 0

    @property
    def t_star(self) -> float | None:
        k = self.t_star_index
        return None if k is None else float(self.times[k])

    def far_jumps_after_t_star(self) -> tuple[int, int]:
        k = self.t_star_index
        if k is None:
            return 0, 0
        rows = self.vjumps[k + 1:]
        return int(rows[:, FAR_LEFT].sum()), int(rows[:, FAR_RIGHT].sum())

    def spread_mass(self) -> int:
        """Virtual particles on sites ``x >= 2`` at the final time."""
        vf = self.final_virtual_field()
        return int(vf.counts[vf.sites >= 2].sum())

    def confinement(self) -> dict:
        """Wrong-side virtual mass after T_*: virtual-r left of 0, virtual-l right of 1.

        Such mass can only be created at the defect, which positivity rules
        out after T_*, so both series must be non-increasing from there on.
        """
        k0 = self.t_star_index
        if k0 is None:
            return {"detected": False, "increases": 0}
        r_left, l_right = [], []
        for k in range(k0, len(self.times)):
            vf = self.virtual_field(k)
            r_left.append(vf.mass("r", hi=-1))
            l_right.append(vf.mass("l", lo=2))
        inc = int(np.sum(np.diff(r_left) > 0) + np.sum(np.diff(l_right) > 0))
        return {"detected": True, "increases": inc, "r_left": r_left, "l_right": l_right}


def _probe(half_width, probe):
    if probe is None:
        return -half_width, half_width
    p = min(max(int(probe), 2), half_width)
    return -p, p


def _wrap(lam, lam0, L, st, lo, out, strict) -> CoupledRun:
    heights, heights2, cols, cols2, checks, vjumps, s, h, s2, h2 = out
    run = CoupledRun(lam, lam0, L, st, lo, heights, heights2, cols, cols2, checks, vjumps,
                     s, h, s2, h2)
    if strict and run.monotonicity_violations:
        raise ConsistencyError(f"h' < h at {run.monotonicity_violations} sampled edge/time pairs")
    return run


def run_coupled(log: MarkLog, sample_times=None, *, probe: int | None = DEFAULT_PROBE,
                strict: bool = True) -> CoupledRun:
    """Coupled run driven by an explicit mark log.

    Raises :class:`ConsistencyError` on any ``h' < h`` unless ``strict`` is off.
    """
    if sample_times is None:
        sample_times = default_sample_times(log.horizon)
    st = _check_samples(sample_times, log.horizon)
    L = log.half_width
    if L < 2:
        raise ValueError("coupled runs need half_width >= 2")
    lo, hi = _probe(L, probe)
    out = _kernels.coupled(log.times, log.edges, log.kinds, False, log.lam, log.lam0, L,
                           log.horizon, _kernels.rng_state(0), st, lo + L, hi + L)
    return _wrap(log.lam, log.lam0, L, st, lo, out, strict)


def run_coupled_stream(lam: float, lam0: float, half_width: int | None, horizon: float, seed: int,
                       sample_times=None, *, probe: int | None = DEFAULT_PROBE,
                       strict: bool = True) -> CoupledRun:
    """Coupled run with marks drawn on the fly (same law as a generated log)."""
    for name, v in (("lam", lam), ("lam0", lam0)):
        if not math.isfinite(v) or v < 0:
            raise ValueError(f"{name} must be finite and non-negative")
    if not math.isfinite(horizon) or horizon <= 0:
        raise ValueError("horizon must be finite and positive")
    if half_width is None:
        half_width = auto_half_width(lam, horizon)
    if half_width < 2:
        raise ValueError("coupled runs need half_width >= 2")
    if sample_times is None:
        sample_times = default_sample_times(horizon)
    st = _check_samples(sample_times, horizon)
    lo, hi = _probe(half_width, probe)
    empty = np.empty(0)
    out = _kernels.coupled(empty, np.empty(0, np.int32), np.empty(0, np.uint8), True,
                           float(lam), float(lam0), int(half_width), float(horizon),
                           _kernels.rng_state(seed), st, lo + half_width, hi + half_width)
    return _wrap(float(lam), float(lam0), int(half_width), st, lo, out, strict)


@dataclass(frozen=True)
class SymmetryAudit:
    left: int
    right: int
    runs: int
    runs_with_t_star: int
    pvalue: float

    @property
    def total(self) -> int:
        return self.left + self.right


def virtual_symmetry_audit(runs) -> SymmetryAudit:
    """Pool far-from-defect virtual jumps after T_* and test left/right balance."""
    if isinstance(runs, CoupledRun):
        runs = [runs]
    left = right = detected = n = 0
    for run in runs:
        n += 1
        if run.t_star_index is not None:
            detected += 1
        a, b = run.far_jumps_after_t_star()
        left += a
        right += b
    p = 1.0 if left + right == 0 else float(stats.binomtest(left, left + right, 0.5).pvalue)
    return SymmetryAudit(left, right, n, detected, p)


# --- domination witness at a single site ----------------------------------

@dataclass
class DominationWitness:
    """Bounding processes for ``n_x`` at the sample times."""

    site: int
    times: np.ndarray
    n: np.ndarray
    x_left: np.ndarray
    x_right: np.ndarray
    y: np.ndarray
    y_range: np.ndarray  # running max(Y) - min(Y)

    @property
    def bound(self) -> np.ndarray:
        return self.x_left + self.x_right + self.y_range

    @property
    def slack(self) -> np.ndarray:
        return self.bound - self.n


_LEFT_FAMILY = (MarkKind.ARROW_LEFT_ON_LEFT, MarkKind.ARROW_RIGHT_ON_LEFT)


def domination_witness(log: MarkLog, x: int, sample_times=None, *,
                       perturbed: bool = False) -> tuple[DominationWitness, bool]:
    """Replay ``log`` and build the reflected walks around site ``x``.

    ``X_l`` goes up at each l-arrow pointing into ``x`` and down (if
    positive) at each l-arrow pointing out of it; ``X_r`` likewise.  ``Y``
    is the nucleation count on ``<x, x+1>`` minus that on ``<x-1, x>``.
    Without ``perturbed`` the defect marks are dropped.
    """
    L = log.half_width
    if not -L < x < L:
        raise ValueError(f"site {x} is not strictly inside the window")
    if not perturbed:
        log = log.without_defect()
    if sample_times is None:
        sample_times = default_sample_times(log.horizon)
    st = _check_samples(sample_times, log.horizon)
    state = LatticeState.empty(L, log.lam)
    xl = xr = y = ymax = ymin = 0
    rows = []
    k = 0

    def snap():
        rows.append((state.n(x), xl, xr, y, ymax - ymin))

    for mark in log:
        while k < len(st) and st[k] < mark.time:
            snap()
            k += 1
        e = mark.edge
        if mark.kind.is_nucleation:
            if e == x:
                y += 1
            elif e == x - 1:
                y -= 1
            ymax, ymin = max(ymax, y), min(ymin, y)
        elif e in (x - 1, x):
            leftward = mark.kind in (MarkKind.ARROW_LEFT_ON_LEFT, MarkKind.ARROW_LEFT_ON_RIGHT)
            src = e + 1 if leftward else e
            dst = e if leftward else e + 1
            is_l = mark.kind in _LEFT_FAMILY
            if dst == x:
                if is_l:
                    xl += 1
                else:
                    xr += 1
            elif src == x:
                if is_l and xl > 0:
                    xl -= 1
                elif not is_l and xr > 0:
                    xr -= 1
        apply_mark(state, mark)
    while k < len(st):
        snap()
        k += 1
    a = np.array(rows, np.int64).reshape(-1, 5)
    w = DominationWitness(x, st, a[:, 0], a[:, 1], a[:, 2], a[:, 3], a[:, 4])
    return w, bool(np.all(w.n <= w.bound))


# --- hand-built fixture: one site with a base l and two virtual r ----------

def _state_from_occupancy(half_width, signed):
    occ = [0] * (2 * half_width + 1)
    for x, v in signed.items():
        occ[x + half_width] = v
    heights = np.cumsum(occ)[:-1].tolist()
    if min(heights) < 0 or sum(occ) != 0:
        raise ValueError("occupancy does not describe a non-negative finite profile")
    return LatticeState(half_width, occ, heights)


def arrow_fixture_states(x: int = 3, half_width: int = 8) -> tuple[LatticeState, LatticeState]:
    """Base has one l-particle at ``x``; the perturbed system one r-particle there.

    The discrepancy then carries ``b = 2`` virtual-r particles at ``x``
    against ``a = 1`` real l-particle.
    """
    base = _state_from_occupancy(half_width, {x: 1, x + 2: -1})
    pert = _state_from_occupancy(half_width, {x - 1: 2, x: -1, x + 2: -1})
    return base, pert


@dataclass(frozen=True)
class ArrowCase:
    kind: MarkKind
    edge: int
    dh_base: int
    dh_perturbed: int
    virtual_before: tuple  # signed virtual occupancy at x-1, x, x+1
    virtual_after: tuple

    @property
    def displacement(self) -> int:
        """Where the moved virtual-r went: -1 left, +1 right, 0 nowhere."""
        b, a = np.array(self.virtual_before), np.array(self.virtual_after)
        d = a - b
        if d[1] != -1:
            return 0
        return -1 if d[0] == 1 else 1 if d[2] == 1 else 0


def _virtual_near(base, pert, x):
    L = base.half_width
    ht = np.array(pert.heights) - np.array(base.heights)
    return tuple(int(ht[y - 1 + L] - ht[y + L]) for y in (x - 1, x, x + 1))


def arrow_cases(x: int = 3, half_width: int = 8) -> list[ArrowCase]:
    """Apply each arrow family on the edge it acts through from ``x``."""
    cases = []
    plan = [
        (MarkKind.ARROW_RIGHT_ON_RIGHT, x),
        (MarkKind.ARROW_LEFT_ON_RIGHT, x - 1),
        (MarkKind.ARROW_RIGHT_ON_LEFT, x),
        (MarkKind.ARROW_LEFT_ON_LEFT, x - 1),
    ]
    for kind, edge in plan:
        base, pert = arrow_fixture_states(x, half_width)
        before = _virtual_near(base, pert, x)
        hb, hp = base.height(edge), pert.height(edge)
        m = Mark(1.0, edge, kind)
        apply_mark(base, m)
        apply_mark(pert, m)
        cases.append(ArrowCase(kind, edge, base.height(edge) - hb, pert.height(edge) - hp,
                              before, _virtual_near(base, pert, x)))
    return cases


# --- exports ----------------------------------------------------------------

def coupled_trace_csv(run: CoupledRun, stream=None) -> str:
    out = stream if stream is not None else io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["time", "edge", "h", "h_prime", "h_tilde"])
    edges = range(run.probe_first_edge, run.probe_first_edge + run.h.shape[1])
    for k, t in enumerate(run.times.tolist()):
        for i, e in enumerate(edges):
            a, b = int(run.h[k, i]), int(run.h_prime[k, i])
            w.writerow([repr(t), e, a, b, b - a])
    return out.getvalue() if stream is None else ""


def virtual_field_csv(run: CoupledRun, stream=None) -> str:
    out = stream if stream is not None else io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["time", "x", "n_tilde", "species"])
    for k in range(len(run.times)):
        vf = run.virtual_field(k)
        for x, v in zip(vf.sites.tolist(), vf.signed.tolist()):
            if v:
                w.writerow([repr(vf.time), x, abs(v), "r" if v > 0 else "l"])
    return out.getvalue() if stream is None else ""


def delta_csv(run: CoupledRun, stream=None) -> str:
    out = stream if stream is not None else io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["time", "delta"])
    for t, d in zip(run.times.tolist(), run.delta.tolist()):
        w.writerow([repr(t), d])
    return out.getvalue() if stream is None else ""
