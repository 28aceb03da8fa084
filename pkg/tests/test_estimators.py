import logging

import numpy as np
import pytest

from rpng.estimators import (PhaseScan, ScanPoint, SpeedEstimate, antenna_check, estimate_speed, phase_scan,
                             phase_scan_csv, phase_scan_svg, replica_slopes, simulate_replicas, theory_speed)


def test_exact_linear_input():
    t = np.linspace(0, 100, 51)
    est = estimate_speed(t, np.vstack([3 * t, 3 * t + 5]))
    assert est.v_hat == pytest.approx(3.0) and est.stderr == pytest.approx(0.0, abs=1e-12)
    assert est.fit_window == (50.0, 100.0) and est.replicas == 2


def test_slopes_use_only_the_window():
    t = np.linspace(0, 10, 11)
    h = np.where(t < 5, 0.0, 2 * (t - 5))
    assert replica_slopes(t, h, (5, 10))[0] == pytest.approx(2.0)


def test_touched_replicas_are_dropped(caplog):
    t = np.linspace(0, 10, 11)
    H = np.vstack([t, t, 100 * t])
    with caplog.at_level(logging.WARNING):
        est = estimate_speed(t, H, touched=[False, False, True])
    assert est.v_hat == pytest.approx(1.0) and est.excluded == 1
    assert "boundary-touched" in caplog.text
    with pytest.raises(ValueError):
        estimate_speed(t, H, touched=[True, True, True])


def test_bad_windows():
    t = np.linspace(0, 10, 11)
    with pytest.raises(ValueError):
        estimate_speed(t, np.vstack([t, t]), (5, 20))
    with pytest.raises(ValueError):
        estimate_speed(t, np.vstack([t]))


def test_theory():
    assert theory_speed(0.5, 0.5) == 0.5
    assert theory_speed(0.5, 3.0) == 2.5
    assert theory_speed(0.0, 2.0) == 1.0


def _est(v, se=0.01):
    return SpeedEstimate(v, se, 20, (0, 1))


def test_critical_point_and_slope_on_synthetic_scan():
    lam = 0.5
    pts = [ScanPoint(g, _est(theory_speed(lam, g)), _est(lam)) for g in (0.25, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0)]
    scan = PhaseScan(lam, 100.0, pts)
    assert scan.critical == 1.5
    assert scan.supercritical_slope() == pytest.approx(1.0)
    flat = PhaseScan(lam, 100.0, [ScanPoint(g, _est(lam), _est(lam)) for g in (0.25, 0.5)])
    assert flat.critical is None and not flat.critical_in_range
    assert flat.supercritical_slope() is None


def test_small_scan_runs_and_exports():
    scan = phase_scan(0.5, [0.5, 3.0], 60.0, 3, 1)
    assert len(scan.points) == 2
    assert scan.points[1].origin.v_hat > scan.points[0].origin.v_hat
    rows = phase_scan_csv(scan).splitlines()
    assert rows[0] == "lambda0,v_hat_e0,stderr_e0,v_hat_ref,stderr_ref,replicas,T" and len(rows) == 3
    assert phase_scan_svg(scan).startswith("<svg")
    with pytest.raises(ValueError):
        phase_scan(0.5, [2.0, 1.0], 10.0, 2, 1)


def test_antenna_degenerate_and_adjacent():
    runs = simulate_replicas(0.5, 0.0, 200.0, 6, 4)
    res = antenna_check(0.5, 0.0, 10, 200.0, 6, 4, runs=runs, floor=0.15)
    assert res.passed and not res.slow_convergence
    adj = antenna_check(0.5, 3.0, 1, 100.0, 3, 5)
    assert adj.slow_convergence
    with pytest.raises(ValueError):
        antenna_check(0.5, 3.0, 0, 100.0, 3, 5)


def test_doubling_replicas_is_stable():
    T = 200.0
    a = simulate_replicas(0.5, 0.0, T, 10, 1)
    b = a + simulate_replicas(0.5, 0.0, T, 10, 2)
    ea = estimate_speed(a[0].times, np.vstack([r.origin_heights for r in a]))
    eb = estimate_speed(b[0].times, np.vstack([r.origin_heights for r in b]))
    assert abs(ea.v_hat - eb.v_hat) < 3 * np.hypot(ea.stderr, eb.stderr)
