import numpy as np
import pytest

from rpng.engine import ConsistencyError, LatticeState, apply_mark, run_faithful
from rpng.height import (HeightProfile, full_profile, height_at_origin, integrated_height, profile_csv,
                         profile_svg)
from rpng.marks import Mark, MarkKind


def test_fresh_state_has_zero_height():
    s = LatticeState.empty(5)
    assert height_at_origin(s) == 0
    assert np.all(full_profile(s, 0).h == 0)


def test_one_origin_nucleation():
    s = apply_mark(LatticeState.empty(5), Mark(1.0, 0, MarkKind.NUCLEATION))
    assert height_at_origin(s) == 1
    p = full_profile(s, 1)
    assert p[0] == 1 and p.h.sum() == 1


def test_nucleation_then_crossing_and_annihilation():
    s = apply_mark(LatticeState.empty(5), Mark(1.0, 0, MarkKind.NUCLEATION))
    apply_mark(s, Mark(2.0, 0, MarkKind.ARROW_RIGHT_ON_LEFT))
    assert (s.origin_nucleations, s.flow_left, s.flow_right) == (1, 1, 0)
    assert height_at_origin(s) == 0
    assert all(n == 0 for n in s.occupancy)


def test_pedestal_profile():
    s = LatticeState(4, occupancy=[0, 0, 0, 0, 1, -1, 0, 0, 0], heights=[0, 0, 0, 0, 1, 0, 0, 0])
    p = full_profile(s, 1)
    assert p[0] == 1 and p.h.sum() == 1


def test_profile_matches_incremental_heights_seed42(golden_logs):
    log = golden_logs[0]
    assert log.seed == 42
    checked = []

    def check(state):
        p = full_profile(state)
        assert np.array_equal(p.h, HeightProfile.from_state(state).h)
        assert height_at_origin(state) == state.height(0)
        checked.append(state.time)

    run_faithful(log, np.linspace(0.5, 20, 40), on_sample=check)
    assert len(checked) == 40


def test_negative_values_are_fatal():
    s = LatticeState.empty(3)
    s.flow_left = 2
    with pytest.raises(ConsistencyError):
        height_at_origin(s)
    s = LatticeState(2, occupancy=[0, 0, 0, -1, 1], heights=[0, 0, 0, 0])
    with pytest.raises(ConsistencyError):
        full_profile(s, 0)
    with pytest.raises(ConsistencyError):
        HeightProfile(0, [1, -1])


def test_integrated_height():
    zero = HeightProfile(-5, np.zeros(10, int))
    assert integrated_height(zero, 3) == 0
    h = np.zeros(10, int)
    h[5] = 3
    assert integrated_height(HeightProfile(-5, h), 2) == 3
    p = HeightProfile(-3, np.arange(6))
    assert integrated_height(p, 1) == 2 + 3
    with pytest.raises(ValueError):
        integrated_height(p, 4)
    with pytest.raises(ValueError):
        integrated_height(p, 0)


def test_integrated_height_band_single_run():
    from rpng.engine import run_optimized

    lam, Q, T = 1.0, 5, 500.0
    tr = run_optimized(lam, 0.0, None, T, 2024, [T])
    H = integrated_height(HeightProfile(-tr.half_width, tr.final_heights, T), Q)
    assert 2 * Q * lam - 1 - 0.3 <= H / T <= 2 * Q * lam + 1 + 0.3


def test_exports():
    p = HeightProfile(-2, [0, 1, 2, 0], time=1.5)
    csv_text = profile_csv([p])
    assert csv_text.splitlines()[:2] == ["time,edge,height", "1.5,-2,0"]
    svg = profile_svg([p, HeightProfile(-2, [1, 1, 1, 1], time=3.0)])
    assert svg.startswith("<svg") and svg.count("<polyline") == 2
