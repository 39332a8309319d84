import math

import numpy as np
import pytest

import oracles
from hmdesign.errors import EmptyInput
from hmdesign.optimizer import ProblemSpec, SolverConfig, max_hp_rate
from hmdesign.rateregion import (
    CSV_HEADER,
    FrontierPoint,
    RegionFrontier,
    convex_hull,
    default_thresholds,
    dominates,
    frontier_csv,
    hm_frontier,
    hqam_frontier,
    td_frontier,
)

BASE = ProblemSpec(2, 2, 2.92, 10.05, 0.0)


def _concave(f, tol=1e-6):
    rh, rl = f.r_h, f.r_l
    for i in range(1, len(rh) - 1):
        chord = rl[i - 1] + (rl[i + 1] - rl[i - 1]) * (rh[i] - rh[i - 1]) / (rh[i + 1] - rh[i - 1])
        if rl[i] < chord - tol:
            return False
    return True


def test_td_endpoints():
    f = td_frontier(2.92, 10.05, 1.0)
    assert f.points[0].r_h == 0.0
    assert f.points[0].r_l == pytest.approx(math.log2(1 + 10 ** 1.005), abs=1e-12)
    assert f.points[-1].r_h == pytest.approx(math.log2(1 + 10 ** 0.292), abs=1e-12)
    assert f.points[-1].r_l == 0.0
    assert f.points[-1].r_h == pytest.approx(1.565, abs=1e-3)
    assert f.points[0].r_l == pytest.approx(3.475, abs=1e-3)


def test_td_is_concave_and_close_to_exact():
    f = td_frontier(2.92, 10.05, 1.0)
    assert _concave(f)
    for rh in np.linspace(0.05, 1.5, 15):
        exact = oracles.td_exact(rh, 2.92, 10.05)
        # the grid hull is an inner approximation of the exact region
        assert exact - 1e-4 <= f.interp(rh) <= exact + 1e-9


def test_td_depends_on_snr_only():
    a = td_frontier(3.0, 12.0, 1.0)
    b = td_frontier(3.0, 12.0, 7.5)
    assert np.allclose(a.rates, b.rates, atol=1e-9)


def test_td_grid_size_checked():
    with pytest.raises(ValueError):
        td_frontier(3.0, 12.0, 1.0, grid_size=1)


def test_frontier_validation():
    with pytest.raises(ValueError):
        RegionFrontier("hull", [FrontierPoint(0.5, 1.0), FrontierPoint(0.5, 0.9)])
    with pytest.raises(ValueError):
        RegionFrontier("hull", [FrontierPoint(-0.1, 1.0)])


def test_hull_examples():
    td = td_frontier(2.92, 10.05)
    assert np.allclose(convex_hull([td]).rates, td.rates)
    seg = convex_hull([RegionFrontier("hull", [FrontierPoint(1.0, 0.0)]),
                       RegionFrontier("hull", [FrontierPoint(0.0, 2.0)])])
    assert np.allclose(seg.rates, [[0.0, 2.0], [1.0, 0.0]])
    with pytest.raises(EmptyInput):
        convex_hull([])


def test_hull_dominates_inputs():
    td = td_frontier(2.92, 10.05)
    bump = RegionFrontier("hm_optimized", [FrontierPoint(0.6, 2.9), FrontierPoint(1.2, 1.2)])
    h = convex_hull([td, bump])
    assert _concave(h, tol=1e-12)
    for f in (td, bump):
        for p in f.points:
            assert h.interp(p.r_h) >= p.r_l - 1e-12


def test_dominates_examples():
    td = td_frontier(2.92, 10.05)
    p = td.points[40]
    assert not dominates((p.r_h, p.r_l), td, 0.0)
    assert not dominates((p.r_h, p.r_l - 0.1), td, 0.0)
    assert dominates((p.r_h, p.r_l + 0.02), td, 0.01)
    assert not dominates((p.r_h, p.r_l + 0.005), td, 0.01)
    # beyond the right end nothing is achievable by the frontier
    assert dominates((td.points[-1].r_h + 0.1, 0.05), td, 0.01)


def test_default_thresholds():
    t = default_thresholds(BASE, 25)
    assert len(t) == 25 and t[0] == 0.0
    assert t[-1] == pytest.approx(0.98 * max_hp_rate(BASE), abs=1e-12)


def test_csv_format():
    f = RegionFrontier("hm_optimized", [FrontierPoint(0.123456789012, 1.5, 0.1, 1.0, 1.4767)])
    lines = frontier_csv(f).splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert lines[1] == "hm_optimized,0.1,0.123456789,1.5,1,1.4767"
    td = frontier_csv(td_frontier(2.92, 10.05)).splitlines()[1].split(",")
    assert td[0] == "td_gaussian" and td[1] == "" and td[5] == ""


def test_hqam_frontier_sweep():
    th = default_thresholds(BASE, 6)
    f = hqam_frontier(BASE, th, SolverConfig(starts=3))
    assert f.meta["solved"] >= 0.9 * len(th)
    assert np.all(np.diff(f.r_l) <= 1e-3)
    single = hqam_frontier(BASE, [0.0], SolverConfig(starts=3))
    assert len(single.points) == 1
    assert single.points[0].r_l == pytest.approx(oracles.hqam_grid_oracle(0.0, 2.92, 10.05)["refined"], abs=1e-3)


def test_sweep_skips_infeasible_thresholds():
    f = hqam_frontier(BASE, [0.5, 1.45], SolverConfig(starts=2))
    assert f.meta["solved"] == 1
    assert f.meta["skipped"][0]["r_star"] == 1.45
    with pytest.raises(ValueError):
        hm_frontier(BASE, [2.5])
    with pytest.raises(EmptyInput):
        hm_frontier(BASE, [])


def test_hm_frontier_thresholds_zero():
    f = hm_frontier(BASE, [0.0], SolverConfig(starts=2, seed=1))
    assert len(f.points) == 1
    h = hqam_frontier(BASE, [0.0], SolverConfig(starts=2))
    assert f.points[0].r_l >= h.points[0].r_l - 1e-3
