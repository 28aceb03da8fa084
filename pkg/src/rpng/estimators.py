"""Growth-speed estimates from replicated runs, and the phase scan in the defect rate."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .engine import Trajectory, auto_half_width, default_sample_times, run_optimized
from .parallel import map_replicas, replica_seeds
from .svg import Canvas

__all__ = [
    "AntennaResult",
    "PhaseScan",
    "ScanPoint",
    "SpeedEstimate",
    "antenna_check",
    "estimate_speed",
    "phase_scan",
    "phase_scan_csv",
    "phase_scan_svg",
    "replica_slopes",
    "simulate_replicas",
    "theory_speed",
]

log = logging.getLogger(__name__)

REFERENCE_EDGE = 10
DETECTION_SIGMAS = 3.0
SUPERCRITICAL_FROM = 1.5


def theory_speed(lam: float, lam0: float) -> float:
    return lam + max(lam0 - 1.0, 0.0)


@dataclass(frozen=True)
class SpeedEstimate:
    v_hat: float
    stderr: float
    replicas: int
    fit_window: tuple
    edge: int = 0
    slopes: np.ndarray = field(default=None, repr=False, compare=False)
    excluded: int = 0

    def within(self, target: float, floor: float, sigmas: float = 3.0) -> bool:
        """``|v_hat - target| <= max(floor, sigmas * stderr)``."""
        return abs(self.v_hat - target) <= max(floor, sigmas * self.stderr)


def replica_slopes(times, heights, fit_window) -> np.ndarray:
    """Least-squares slope of each row of ``heights`` over ``fit_window``."""
    t = np.asarray(times, dtype=np.float64)
    H = np.atleast_2d(np.asarray(heights, dtype=np.float64))
    lo, hi = fit_window
    sel = (t >= lo) & (t <= hi)
    if sel.sum() < 2:
        raise ValueError(f"fewer than two samples inside the fit window {fit_window}")
    ts = t[sel]
    tc = ts - ts.mean()
    Y = H[:, sel]
    return (Y - Y.mean(axis=1, keepdims=True)) @ tc / (tc @ tc)


def estimate_speed(times, heights, fit_window=None, *, touched=None, edge: int = 0) -> SpeedEstimate:
    """Mean of per-replica slopes; stderr is the replica standard error.

    ``heights`` is (replicas, samples).  Replicas flagged in ``touched`` are
    dropped with a warning.
    """
    t = np.asarray(times, dtype=np.float64)
    H = np.atleast_2d(np.asarray(heights))
    if fit_window is None:
        fit_window = (t[-1] / 2.0, t[-1])
    lo, hi = fit_window
    if not (0 <= lo < hi <= t[-1] + 1e-12):
        raise ValueError(f"fit window {fit_window} is not inside the sampled horizon")
    keep = np.ones(H.shape[0], bool)
    if touched is not None:
        keep = ~np.asarray(touched, bool)
    excluded = int((~keep).sum())
    if excluded:
        log.warning("dropping %d boundary-touched replica(s)", excluded)
    H = H[keep]
    if H.shape[0] < 2:
        raise ValueError("need at least two valid replicas")
    slopes = replica_slopes(t, H, fit_window)
    n = len(slopes)
    return SpeedEstimate(float(slopes.mean()), float(slopes.std(ddof=1) / math.sqrt(n)), n,
                         (float(lo), float(hi)), edge, slopes, excluded)


def simulate_replicas(lam, lam0, horizon, replicas, seed, *, half_width=None, sample_times=None,
                      jobs=None) -> list[Trajectory]:
    if half_width is None:
        half_width = auto_half_width(lam, horizon)
    if sample_times is None:
        sample_times = default_sample_times(horizon)
    return map_replicas(lambda s: run_optimized(lam, lam0, half_width, horizon, s, sample_times),
                        replica_seeds(seed, replicas), jobs)


def _estimate(runs, edge):
    H = np.vstack([r.heights_at(edge) for r in runs])
    return estimate_speed(runs[0].times, H, touched=[r.boundary_touched for r in runs], edge=edge)


@dataclass
class ScanPoint:
    lam0: float
    origin: SpeedEstimate
    reference: SpeedEstimate


@dataclass
class PhaseScan:
    lam: float
    horizon: float
    points: list
    ref_edge: int = REFERENCE_EDGE

    @property
    def grid(self) -> np.ndarray:
        return np.array([p.lam0 for p in self.points])

    @property
    def critical(self) -> float | None:
        """Smallest grid value where v(e0) - lam exceeds three standard errors."""
        for p in self.points:
            if p.origin.v_hat - self.lam > DETECTION_SIGMAS * p.origin.stderr:
                return p.lam0
        return None

    @property
    def critical_in_range(self) -> bool:
        return self.critical is not None

    def supercritical_slope(self, above: float = SUPERCRITICAL_FROM) -> float | None:
        pts = [p for p in self.points if p.lam0 >= above]
        if len(pts) < 2:
            return None
        x = np.array([p.lam0 for p in pts])
        y = np.array([p.origin.v_hat for p in pts])
        return float(np.polyfit(x, y, 1)[0])


def phase_scan(lam: float, grid, horizon: float, replicas: int, seed: int, *,
               ref_edge: int = REFERENCE_EDGE, jobs=None, half_width=None) -> PhaseScan:
    """Speed at the origin and at ``ref_edge`` for each defect rate in ``grid``."""
    grid = [float(g) for g in grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be strictly increasing")
    points = []
    for i, lam0 in enumerate(grid):
        runs = simulate_replicas(lam, lam0, horizon, replicas, seed + 7919 * i,
                                 half_width=half_width, jobs=jobs)
        points.append(ScanPoint(lam0, _estimate(runs, 0), _estimate(runs, ref_edge)))
    return PhaseScan(float(lam), float(horizon), points, ref_edge)


@dataclass
class AntennaResult:
    passed: bool
    estimate: SpeedEstimate
    slow_convergence: bool


def antenna_check(lam, lam0, ref_edge, horizon, replicas, seed, *, runs=None, jobs=None,
                  floor: float = 0.05) -> AntennaResult:
    """Speed away from the defect should stay at ``lam``.

    Edges touching the defect site (``e_-1`` and ``e_1``) are flagged as
    slow to converge; their estimate is still compared with the same rule.
    """
    if ref_edge == 0:
        raise ValueError("reference edge must differ from the origin edge")
    if runs is None:
        runs = simulate_replicas(lam, lam0, horizon, replicas, seed, jobs=jobs)
    est = _estimate(runs, ref_edge)
    return AntennaResult(est.within(lam, floor), est, abs(ref_edge) <= 1)


def phase_scan_csv(scan: PhaseScan, replicas: int | None = None, stream=None) -> str:
    out = stream if stream is not None else io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["lambda0", "v_hat_e0", "stderr_e0", "v_hat_ref", "stderr_ref", "replicas", "T"])
    for p in scan.points:
        w.writerow([p.lam0, f"{p.origin.v_hat:.6f}", f"{p.origin.stderr:.6f}",
                    f"{p.reference.v_hat:.6f}", f"{p.reference.stderr:.6f}",
                    p.origin.replicas if replicas is None else replicas, scan.horizon])
    return out.getvalue() if stream is None else ""


def phase_scan_svg(scan: PhaseScan) -> str:
    g = scan.grid
    lo, hi = min(0.0, g.min()), max(g.max(), 1.5)
    top = max([theory_speed(scan.lam, hi)] + [p.origin.v_hat + 2 * p.origin.stderr for p in scan.points])
    c = Canvas((lo, hi), (0, top * 1.05))
    xs = np.linspace(lo, hi, 200)
    c.polyline(xs, [theory_speed(scan.lam, x) for x in xs], stroke="#888", width=1.2, dash="5,4")
    for p in scan.points:
        e = p.origin
        c.polyline([p.lam0, p.lam0], [e.v_hat - 2 * e.stderr, e.v_hat + 2 * e.stderr], stroke="#1f77b4")
        c.circle(p.lam0, e.v_hat, fill="#1f77b4")
        c.circle(p.lam0, p.reference.v_hat, r=2, fill="#d62728")
    c.axes("lambda0", "speed", f"lambda = {scan.lam:g}: origin (blue), e_{scan.ref_edge} (red)")
    return c.render()
