"""Pedestals growing against a wall, and the exclusion process that mirrors them.

In the half-line model every pedestal has its left end pinned at the wall
site 0 and only its right boundary moves.  Boundaries interact as plateau
endpoints do, which for a stack anchored at one wall means a zero-range
walk: a site holding ``m`` boundaries releases the top one at total rate 1,
half to each side.  A boundary reaching 0 removes its pedestal, and new
pedestals appear at rate ``lam0`` with their boundary at site 1.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .parallel import map_replicas, replica_seeds

__all__ = [
    "HalfLineRun",
    "default_window",
    "halfline_csv",
    "run_exclusion_step",
    "run_exclusion_replicas",
    "run_halfline",
    "run_halfline_replicas",
]


class WindowExhausted(RuntimeError):
    pass


@dataclass
class HalfLineRun:
    """``values`` is N_t for the wall model and the rightmost particle for exclusion."""

    times: np.ndarray
    values: np.ndarray
    exhausted: bool
    window: int
    final_state: np.ndarray

    @property
    def final(self) -> int:
        return int(self.values[-1])


def default_window(horizon: float) -> int:
    """Far beyond diffusive reach: ``10 sqrt(T) + 50`` sites."""
    return int(math.ceil(10.0 * math.sqrt(horizon))) + 50


def _grid(horizon, sample_times):
    if sample_times is None:
        return np.array([float(horizon)])
    st = np.asarray(sample_times, dtype=np.float64)
    if st.ndim != 1 or not len(st) or np.any(np.diff(st) <= 0) or st[0] < 0 or st[-1] > horizon:
        raise ValueError("sample times must be strictly increasing within [0, horizon]")
    return st


def _check_horizon(horizon):
    if not math.isfinite(horizon) or horizon <= 0:
        raise ValueError("horizon must be finite and positive")


def run_halfline(lam0: float, horizon: float, seed: int, window: int | None = None,
                 sample_times=None) -> HalfLineRun:
    """Pedestal count N_t of the wall model; samples default to the horizon only."""
    if not math.isfinite(lam0) or lam0 <= 0:
        raise ValueError("lam0 must be positive")
    _check_horizon(horizon)
    window = default_window(horizon) if window is None else int(window)
    if window < 2:
        raise ValueError("window must be >= 2")
    st = _grid(horizon, sample_times)
    out, exhausted, n = _kernels.halfline(float(lam0), float(horizon), _kernels.rng_state(seed),
                                          window, st)
    return HalfLineRun(st, out, bool(exhausted), window, n)


def run_exclusion_step(horizon: float, seed: int, window: int | None = None,
                       sample_times=None) -> HalfLineRun:
    """Rightmost particle of symmetric exclusion started from ``{x <= 0}``."""
    _check_horizon(horizon)
    window = default_window(horizon) if window is None else int(window)
    if window < 2:
        raise ValueError("window must be >= 2")
    st = _grid(horizon, sample_times)
    out, exhausted, occ = _kernels.exclusion_step(float(horizon), _kernels.rng_state(seed), window, st)
    return HalfLineRun(st, out, bool(exhausted), window, occ)


def _replicas(fn, replicas, seed, jobs, strict):
    runs = map_replicas(fn, replica_seeds(seed, replicas), jobs)
    if strict and any(r.exhausted for r in runs):
        raise WindowExhausted("a replica reached the end of its window")
    return runs


def run_halfline_replicas(lam0, horizon, replicas, seed, *, window=None, sample_times=None,
                          jobs=None, strict=True) -> list[HalfLineRun]:
    return _replicas(lambda s: run_halfline(lam0, horizon, s, window, sample_times),
                     replicas, seed, jobs, strict)


def run_exclusion_replicas(horizon, replicas, seed, *, window=None, sample_times=None,
                           jobs=None, strict=True) -> list[HalfLineRun]:
    return _replicas(lambda s: run_exclusion_step(horizon, s, window, sample_times),
                     replicas, seed, jobs, strict)


def halfline_csv(runs, column="N_t", stream=None) -> str:
    """CSV (replica, time, <column>)."""
    out = stream if stream is not None else io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["replica", "time", column])
    for r, run in enumerate(runs):
        for t, v in zip(run.times.tolist(), run.values.tolist()):
            w.writerow([r, repr(t), v])
    return out.getvalue() if stream is None else ""
