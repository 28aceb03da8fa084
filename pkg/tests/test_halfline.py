import numpy as np
import pytest
from scipy import integrate, special, stats

from rpng.halfline import (WindowExhausted, halfline_csv, run_exclusion_replicas, run_exclusion_step,
                           run_halfline, run_halfline_replicas)


def _empty_probability(lam0, T):
    """P(N_T = 0) up to one birth: no birth, or one pedestal whose boundary walk hit 0."""
    absorbed = lambda u: 1 - (special.ive(0, u) + special.ive(1, u))
    one, _ = integrate.quad(lambda s: lam0 * np.exp(-lam0 * T) * absorbed(T - s), 0, T)
    return np.exp(-lam0 * T) + one, 1 - np.exp(-lam0 * T) * (1 + lam0 * T)


def test_tiny_birth_rate():
    n = 500
    runs = run_halfline_replicas(0.01, 10.0, n, 6)
    p, slack = _empty_probability(0.01, 10.0)
    lo, hi = stats.binom.interval(0.999, n, p)
    empty = sum(r.final == 0 for r in runs)
    assert lo <= empty <= hi + slack * n
    assert p > np.exp(-0.1)


def test_critical_rate_is_sublinear():
    runs = run_halfline_replicas(0.5, 5000.0, 50, 3)
    assert np.mean([r.final / 5000.0 for r in runs]) < 0.1


def test_supercritical_rate_grows_linearly():
    runs = run_halfline_replicas(2.0, 2000.0, 10, 5)
    assert np.mean([r.final / 2000.0 for r in runs]) >= 0.3


def test_exclusion_starts_at_zero():
    run = run_exclusion_step(50.0, 1, sample_times=[0.0, 25.0, 50.0])
    assert run.values[0] == 0


def test_exclusion_sublinear():
    runs = run_exclusion_replicas(5000.0, 50, 4)
    assert np.mean([r.final / 5000.0 for r in runs]) < 0.1


def test_exclusion_constraint_and_mass():
    run = run_exclusion_step(300.0, 8, window=400)
    assert set(np.unique(run.final_state)) <= {0, 1}
    assert run.final_state.sum() == 401
    occupied = np.flatnonzero(run.final_state)
    assert occupied[-1] - 400 == run.final
    assert run.final >= 0


def test_halfline_state_consistency():
    grid = np.linspace(1, 200, 50)
    run = run_halfline(1.5, 200.0, 11, sample_times=grid)
    assert run.final_state.sum() == run.final
    assert run.final_state[0] == 0
    assert np.all(run.values >= 0)


def test_correspondence_with_exclusion():
    a = [r.final for r in run_halfline_replicas(0.5, 100.0, 2000, 1)]
    b = [r.final for r in run_exclusion_replicas(100.0, 2000, 2)]
    assert stats.ks_2samp(a, b).pvalue > 0.01


def test_window_exhaustion():
    run = run_halfline(3.0, 200.0, 1, window=3)
    assert run.exhausted
    with pytest.raises(WindowExhausted):
        run_halfline_replicas(3.0, 200.0, 2, 1, window=3)
    assert run_exclusion_step(200.0, 1, window=3).exhausted


def test_bad_parameters():
    with pytest.raises(ValueError):
        run_halfline(0.0, 10.0, 1)
    with pytest.raises(ValueError):
        run_halfline(1.0, -1.0, 1)
    with pytest.raises(ValueError):
        run_exclusion_step(10.0, 1, sample_times=[5.0, 2.0])


def test_csv():
    runs = run_halfline_replicas(0.5, 10.0, 2, 1, sample_times=[5.0, 10.0])
    rows = halfline_csv(runs).splitlines()
    assert rows[0] == "replica,time,N_t" and len(rows) == 5
    assert halfline_csv(runs, "rightmost").startswith("replica,time,rightmost")
