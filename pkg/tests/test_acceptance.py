"""End-to-end acceptance criteria at desk scale.

Each test records one PASS/FAIL line (collected in the terminal summary).
Tolerances are fixed below and never tuned to the outcome.
"""

import functools

import numpy as np
import pytest
from scipy import stats

from conftest import GOLDEN_SEEDS, golden_log, report
from rpng import _kernels
from rpng.coupling import arrow_cases, run_coupled, run_coupled_stream, virtual_symmetry_audit
from rpng.engine import run_faithful, run_optimized_replay
from rpng.estimators import antenna_check, estimate_speed, simulate_replicas, theory_speed
from rpng.halfline import run_exclusion_replicas, run_halfline_replicas
from rpng.height import HeightProfile, full_profile, height_at_origin, integrated_height
from rpng.level_lines import trace_level_lines
from rpng.marks import MarkKind
from rpng.parallel import map_replicas, replica_seeds

T = 1000.0
REPLICAS = 20
SEED = 20240601

# tolerances
LLN_FLOOR = 0.05
SUPER_FLOOR = 0.08
SIGMAS = 3.0
SLOPE_BAND = (0.85, 1.15)
H_SLACK = 1.3
H_MIN_GOOD = 18
KS_ALPHA = 0.01
SUBLINEAR_MAX = 0.1
SYMMETRY_ALPHA = 0.001
PROBES = 20


@functools.lru_cache(maxsize=None)
def runs(lam, lam0, horizon=T, replicas=REPLICAS):
    seed = SEED + int(1000 * lam) * 7 + int(1000 * lam0) * 13 + int(horizon)
    return tuple(simulate_replicas(lam, lam0, horizon, replicas, seed))


def origin_estimate(rs, edge=0):
    H = np.vstack([r.heights_at(edge) for r in rs])
    return estimate_speed(rs[0].times, H, touched=[r.boundary_touched for r in rs], edge=edge)


def eq4_holds(rs):
    return all(np.array_equal(r.origin_heights, r.origin_nucleations - r.flow_left + r.flow_right) for r in rs)


@functools.lru_cache(maxsize=None)
def defect_runs():
    seeds = replica_seeds(SEED + 555, 50)
    return tuple(map_replicas(lambda s: run_coupled_stream(0.5, 5.0, None, T, s, strict=False), seeds))


@pytest.mark.parametrize("lam", [0.25, 0.5, 1.0])
def test_c1_homogeneous_lln(lam):
    rs = runs(lam, 0.0)
    est = origin_estimate(rs)
    touched = sum(r.boundary_touched for r in rs)
    ok = est.within(lam, LLN_FLOOR, SIGMAS) and touched == 0 and est.replicas == REPLICAS and eq4_holds(rs)
    report(1, ok, f"lam={lam}: v={est.v_hat:.4f} +- {est.stderr:.4f} (target {lam}, "
                  f"tol max({LLN_FLOOR}, {SIGMAS} se)), touched={touched}")
    assert ok


@pytest.mark.parametrize("lam,lam0", [(0.5, 2.0), (0.5, 3.0), (0.0, 2.0)])
def test_c2_supercritical(lam, lam0):
    rs = runs(lam, lam0)
    est = origin_estimate(rs)
    target = lam + lam0 - 1
    touched = sum(r.boundary_touched for r in rs)
    ok = est.within(target, SUPER_FLOOR, SIGMAS) and touched == 0 and eq4_holds(rs)
    report(2, ok, f"(lam, lam0)=({lam}, {lam0}): v={est.v_hat:.4f} +- {est.stderr:.4f} "
                  f"(target {target}, tol max({SUPER_FLOOR}, {SIGMAS} se)), touched={touched}")
    assert ok


@pytest.mark.parametrize("lam,lam0", [(0.5, 0.5), (0.5, 0.9), (0.0, 0.5)])
def test_c3_subcritical(lam, lam0):
    rs = runs(lam, lam0)
    est = origin_estimate(rs)
    touched = sum(r.boundary_touched for r in rs)
    ok = est.within(lam, LLN_FLOOR, SIGMAS) and touched == 0 and eq4_holds(rs)
    report(3, ok, f"(lam, lam0)=({lam}, {lam0}): v={est.v_hat:.4f} +- {est.stderr:.4f} "
                  f"(target {lam}, tol max({LLN_FLOOR}, {SIGMAS} se)), touched={touched}")
    assert ok


def test_c4_supercritical_slope():
    grid = [1.5, 2.0, 2.5, 3.0]
    v = [origin_estimate(runs(0.5, g)).v_hat for g in grid]
    slope = float(np.polyfit(grid, v, 1)[0])
    ok = SLOPE_BAND[0] <= slope <= SLOPE_BAND[1]
    report(4, ok, f"slope of v(e0) over lam0 in {grid} at lam=0.5: {slope:.4f} "
                  f"(band {SLOPE_BAND}); v = {[round(x, 3) for x in v]}")
    assert ok


def test_c5_antenna():
    res = antenna_check(0.5, 3.0, 10, T, REPLICAS, SEED, runs=list(runs(0.5, 3.0)), floor=LLN_FLOOR)
    est = res.estimate
    report(5, res.passed, f"v(e_10) at (0.5, 3) = {est.v_hat:.4f} +- {est.stderr:.4f} "
                          f"(target 0.5, tol max({LLN_FLOOR}, {SIGMAS} se))")
    assert res.passed


def test_c6_coupling_exactness():
    mono = dom = samples = 0
    for r in defect_runs():
        mono += r.monotonicity_violations
        dom += sum(r.domination_violations)
        samples += len(r.times)
    for seed in GOLDEN_SEEDS:
        r = run_coupled(golden_log(seed, 200.0), probe=None, strict=False)
        mono += r.monotonicity_violations
        dom += sum(r.domination_violations)
        samples += len(r.times)
    ok = mono == 0 and dom == 0
    report(6, ok, f"{samples} sampled times over 60 coupled runs (every edge, every interior site): "
                  f"{mono} monotonicity and {dom} domination violations")
    assert ok


def test_c7_consistency_suite():
    eq4_bad = dual_bad = probe_bad = replay_bad = probes = 0
    rng = np.random.default_rng(7)
    for seed in GOLDEN_SEEDS:
        log = golden_log(seed)
        bad = [0, 0]

        def check(state):
            if height_at_origin(state) != state.height(0):
                bad[0] += 1
            if not np.array_equal(full_profile(state).h, HeightProfile.from_state(state).h):
                bad[1] += 1

        a = run_faithful(log, on_sample=check)
        eq4_bad += bad[0]
        dual_bad += bad[1]
        replay_bad += a.to_bytes() != run_optimized_replay(log).to_bytes()
        ll = trace_level_lines(log)
        pts = [(int(rng.integers(-40, 40)), float(rng.uniform(0.1, log.horizon))) for _ in range(PROBES)]
        times = np.array(sorted({t for _, t in pts}))
        tr = run_faithful(log, times, probe=log.half_width)
        for e, t in pts:
            probes += 1
            probe_bad += tr.heights_at(e)[int(np.searchsorted(times, t))] != ll.height_at(e, t)
    ok = eq4_bad == dual_bad == probe_bad == replay_bad == 0
    report(7, ok, f"10 golden logs: origin-height identity failures {eq4_bad}, dual bookkeeping failures "
                  f"{dual_bad}, level-line probe mismatches {probe_bad}/{probes}, replay differences {replay_bad}")
    assert ok


def test_c8_integrated_height_band():
    lam, Q, horizon = 1.0, 5, 500.0
    rs = runs(lam, 0.0, horizon)
    vals = [integrated_height(HeightProfile(-r.half_width, r.final_heights, horizon), Q) / horizon for r in rs]
    lo, hi = 2 * Q * lam - H_SLACK, 2 * Q * lam + H_SLACK
    good = sum(lo <= v <= hi for v in vals)
    ok = good >= H_MIN_GOOD and not any(r.boundary_touched for r in rs)
    report(8, ok, f"H_T(5)/T in [{lo}, {hi}] for {good}/20 replicas (need {H_MIN_GOOD}); "
                  f"range {min(vals):.2f}..{max(vals):.2f}")
    assert ok


def test_c9_halfline_exclusion():
    a = [r.final for r in run_halfline_replicas(0.5, 100.0, 2000, SEED + 1)]
    b = [r.final for r in run_exclusion_replicas(100.0, 2000, SEED + 2)]
    p = float(stats.ks_2samp(a, b).pvalue)
    nt = np.mean([r.final / 5000.0 for r in run_halfline_replicas(0.5, 5000.0, 50, SEED + 3)])
    ok = p > KS_ALPHA and nt < SUBLINEAR_MAX
    report(9, ok, f"KS p={p:.3f} (> {KS_ALPHA}); mean N_T/T at lam0=1/2, T=5000: {nt:.4f} (< {SUBLINEAR_MAX})")
    assert ok


def test_c10_virtual_symmetry_and_fixture():
    audit = virtual_symmetry_audit(defect_runs())
    expect = {
        MarkKind.ARROW_RIGHT_ON_RIGHT: (0, 1, 1),
        MarkKind.ARROW_LEFT_ON_RIGHT: (0, -1, -1),
        MarkKind.ARROW_RIGHT_ON_LEFT: (-1, 0, 1),
        MarkKind.ARROW_LEFT_ON_LEFT: (1, 0, -1),
    }
    fixture_ok = all((c.dh_base, c.dh_perturbed, c.displacement) == expect[c.kind] for c in arrow_cases())
    ok = audit.pvalue > SYMMETRY_ALPHA and fixture_ok and audit.total > 0
    report(10, ok, f"virtual jumps left/right {audit.left}/{audit.right} over {audit.runs} runs "
                   f"({audit.runs_with_t_star} with T_*), binomial p={audit.pvalue:.3f} (> {SYMMETRY_ALPHA}); "
                   f"four-case fixture {'reproduced' if fixture_ok else 'MISMATCH'}")
    assert ok
