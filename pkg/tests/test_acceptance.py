"""Acceptance criteria 1-8; each test prints one PASS/FAIL line."""

import time

import numpy as np
import pytest

import oracles
from conftest import random_constellation
from hmdesign import capacity as cap
from hmdesign.capacity import ChannelSpec, QuadratureSpec
from hmdesign.constellation import new_natural, normalize_power, scale
from hmdesign.coverage import CoverageParams, snr_at_coverage
from hmdesign.errors import HMDesignError
from hmdesign.optimizer import (
    ProblemSpec,
    SolverConfig,
    derivatives,
    eval_problem,
    ip_newton_step,
    optimize_hqam,
    realify,
    solve,
)
from hmdesign.rateregion import default_thresholds, dominates, td_frontier

SCENARIO_1 = ProblemSpec(2, 2, 2.92, 10.05, 0.0, 1.0)
# (m_h, m_l) splits for 8, 16 and 32 points
SPLITS = [(1, 2), (2, 1), (2, 2), (1, 3), (3, 1), (2, 3), (3, 2), (1, 4)]


def report(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\nCRITERION {number}: {'PASS' if ok else 'FAIL'} | {detail}")
    assert ok, detail


def test_criterion_1_coverage_table(capsys):
    table = {0.95: -0.32, 0.90: 2.92, 0.85: 5.20, 0.70: 10.05, 0.60: 12.71, 0.50: 15.29, 0.40: 18.00}
    t0 = time.perf_counter()
    got = {f: snr_at_coverage(f, CoverageParams()) for f in table}
    elapsed = time.perf_counter() - t0
    worst = max(abs(got[f] - table[f]) for f in table)
    ok = worst <= 0.05 and elapsed < 1.0
    detail = ", ".join(f"{f:.2f}->{got[f]:.3f}" for f in table)
    report(capsys, 1, ok, f"max |err| {worst:.4f} dB (tol 0.05), {elapsed:.2f} s (< 1 s); {detail}")


def test_criterion_2_quadrature_vs_monte_carlo(capsys):
    rng = np.random.default_rng(20)
    t0 = time.perf_counter()
    worst_z, checked = 0.0, 0
    for k in range(20):
        m_h, m_l = SPLITS[k % len(SPLITS)]
        c = normalize_power(random_constellation(rng, m_h, m_l))
        ch = ChannelSpec(float(rng.uniform(0.0, 20.0)))
        quad = {"hp": cap.bit_mis_hp(c, ch), "lp": cap.bit_mis_lp_cond(c, ch)}
        for layer, bits in (("hp", m_h), ("lp", m_l)):
            for b in range(1, bits + 1):
                est, se = cap.mc_bit_mi(c, ch, layer, b, samples=200_000, seed=1000 * k + 10 * b + (layer == "lp"))
                worst_z = max(worst_z, abs(quad[layer][b - 1] - est) / se)
                checked += 1
    gray = new_natural(2, 0, np.array([1 + 1j, -1 + 1j, 1 - 1j, -1 - 1j]) / np.sqrt(2))
    gray_err = max(abs(cap.rate_hp(gray, ChannelSpec(s)) - oracles.gray_qpsk_rate(s)) for s in (0.0, 5.0, 10.0, 20.0))
    elapsed = time.perf_counter() - t0
    ok = worst_z < 3.0 and gray_err < 1e-5 and elapsed < 120
    report(capsys, 2, ok, f"{checked} bit MIs, worst |quad-mc|/se {worst_z:.2f} (< 3); "
                          f"Gray QPSK err {gray_err:.2e} (< 1e-5); {elapsed:.1f} s (< 120 s)")


def test_criterion_3_scaling_monotonicity_and_active_power(capsys):
    rng = np.random.default_rng(30)
    fine = QuadratureSpec(nodes_per_dim=128)
    t0 = time.perf_counter()
    worst = np.inf
    for k in range(50):
        m_h, m_l = SPLITS[k % len(SPLITS)]
        c = normalize_power(random_constellation(rng, m_h, m_l))
        ch = ChannelSpec(float(rng.uniform(0.0, 20.0)))
        rho = float(rng.uniform(1.0, 3.0)) + 1e-9
        big = scale(c, rho)
        worst = min(worst, cap.rate_hp(big, ch, fine) - cap.rate_hp(c, ch, fine),
                    cap.rate_lp(big, ch, fine) - cap.rate_lp(c, ch, fine))
    powers = []
    for r_star in (0.4, 1.0):
        spec = ProblemSpec(2, 2, 2.92, 10.05, r_star, 1.0)
        res = solve(spec, SolverConfig(starts=3, seed=3))
        powers.append(res.power_used)
        _, hres = optimize_hqam(spec, SolverConfig(starts=4))
        powers.append(hres.power_used)
    res = solve(ProblemSpec(2, 2, 2.92, 10.05, 0.8, 1.0, papr_limit=1.6), SolverConfig(starts=2, seed=3))
    powers.append(res.power_used)
    power_err = max(abs(p - 1.0) for p in powers)
    elapsed = time.perf_counter() - t0
    ok = worst >= -1e-6 and power_err <= 1e-6 and elapsed < 300
    report(capsys, 3, ok, f"50 scaling triples, min rate change {worst:+.2e} (>= -1e-6); "
                          f"{len(powers)} optima, max |power-p| {power_err:.2e} (<= 1e-6); {elapsed:.0f} s (< 300 s)")


def test_criterion_4_hqam_vs_grid_oracle(capsys):
    t0 = time.perf_counter()
    rows, ok = [], True
    for r_star in (0.0, 0.8, 1.2):
        _, res = optimize_hqam(ProblemSpec(2, 2, 2.92, 10.05, r_star, 1.0), SolverConfig(starts=8))
        oracle = oracles.hqam_grid_oracle(r_star, 2.92, 10.05)
        err = abs(res.r_l_achieved - oracle["refined"])
        # the solver must also never lose to the raw 200x200 grid
        ok &= err <= 1e-3 and res.r_l_achieved >= oracle["grid"] - 1e-3
        rows.append(f"r*={r_star}: {res.r_l_achieved:.6f} vs oracle {oracle['refined']:.6f} "
                    f"(grid {oracle['grid']:.6f})")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 600
    report(capsys, 4, ok, "; ".join(rows) + f"; tol 1e-3; {elapsed:.0f} s (< 600 s)")


@pytest.fixture(scope="module")
def scenario_one_sweep():
    thresholds = default_thresholds(SCENARIO_1, n=10)
    t0 = time.perf_counter()
    rows = []
    for r_star in thresholds:
        spec = ProblemSpec(2, 2, 2.92, 10.05, float(r_star), 1.0)
        row = {"r_star": float(r_star), "hm": None, "hqam": None}
        try:
            row["hm"] = solve(spec, SolverConfig(starts=8, seed=0))
        except HMDesignError:
            pass
        try:
            row["hqam"] = optimize_hqam(spec, SolverConfig(starts=8, seed=0))[1]
        except HMDesignError:
            pass
        rows.append(row)
    return rows, time.perf_counter() - t0


def test_criterion_5_shadow_region(capsys, scenario_one_sweep):
    rows, elapsed = scenario_one_sweep
    td = td_frontier(2.92, 10.05)
    best_gap, witness = -np.inf, None
    for row in rows:
        res = row["hm"]
        if res is None:
            continue
        gap = res.r_l_achieved - td.interp(res.r_h_achieved)
        if gap > best_gap:
            best_gap, witness = gap, res
    solved = sum(r["hm"] is not None for r in rows)
    ok = (witness is not None and dominates((witness.r_h_achieved, witness.r_l_achieved), td, margin=0.01)
          and elapsed < 1800)
    where = f"(r_H {witness.r_h_achieved:.4f}, r_L {witness.r_l_achieved:.4f})" if witness else "none"
    report(capsys, 5, ok, f"{solved}/10 thresholds solved; best HM point {where} beats TD by {best_gap:.4f} "
                          f"(>= 0.01); sweep {elapsed:.0f} s (< 1800 s)")


def test_criterion_6_hm_dominates_hqam(capsys, scenario_one_sweep):
    rows, _ = scenario_one_sweep
    common = [r for r in rows if r["hm"] is not None and r["hqam"] is not None]
    gaps = [r["hm"].r_l_achieved - r["hqam"].r_l_achieved for r in common]
    ok = len(common) >= 5 and min(gaps) >= -1e-3
    report(capsys, 6, ok, f"{len(common)} common thresholds; min(HM - H-QAM) {min(gaps):+.2e} (>= -1e-3); "
                          f"max {max(gaps):+.2e}")


def test_criterion_7_papr(capsys, scenario_one_sweep):
    rows, _ = scenario_one_sweep
    t0 = time.perf_counter()
    mid = rows[len(rows) // 2]
    hm, hq = mid["hm"], mid["hqam"]
    assert hm is not None and hq is not None, "mid-frontier threshold did not solve"
    lower_papr = hm.papr_used < hq.papr_used
    spec = ProblemSpec(2, 2, 2.92, 10.05, mid["r_star"], 1.0, papr_limit=hq.papr_used)
    con = solve(spec, SolverConfig(starts=8, seed=0))
    better = con.r_l_achieved >= hq.r_l_achieved - 1e-3 and con.papr_used <= hq.papr_used + 1e-3
    elapsed = time.perf_counter() - t0
    ok = lower_papr and better and elapsed < 900
    report(capsys, 7, ok, f"r*={mid['r_star']:.4f}: PAPR HM {hm.papr_used:.4f} (r_H {hm.r_h_achieved:.4f}) "
                          f"< H-QAM {hq.papr_used:.4f} (r_H {hq.r_h_achieved:.4f}); PAPR-limited HM r_L "
                          f"{con.r_l_achieved:.6f} >= H-QAM {hq.r_l_achieved:.6f} - 1e-3; {elapsed:.0f} s (< 900 s)")


def test_criterion_8_derivatives(capsys):
    rng = np.random.default_rng(80)
    spec = ProblemSpec(2, 2, 2.92, 10.05, 1.2, 1.0)
    cfg = SolverConfig()
    t0 = time.perf_counter()
    v = rng.standard_normal(32)
    d = derivatives(v, spec)
    h = 1e-6
    fd = np.array([(eval_problem(v + h * e, spec)[1][1] - eval_problem(v - h * e, spec)[1][1]) / (2 * h)
                   for e in np.eye(32)])
    power_rel = float(np.max(np.abs(fd - d.grads_f[1]) / np.abs(d.grads_f[1])))

    v = realify(normalize_power(random_constellation(rng, 2, 2)))
    d = derivatives(v, spec)
    half = cfg.fd_step / 2
    f0 = eval_problem(v, spec)[0]
    fd = np.array([(eval_problem(v + half * e, spec)[0] - f0) / half for e in np.eye(v.size)])
    obj_rel = float(np.max(np.abs(fd - d.grad_f0) / np.abs(d.grad_f0)))

    v = realify(normalize_power(random_constellation(rng, 2, 2), 0.9))
    d = derivatives(v, spec)
    t, lam = 1e8, np.array([0.8, 1.5])
    f = -1.0 / (t * lam)
    d.grad_f0 = -d.grads_f.T @ lam
    dv, dl, _ = ip_newton_step(v, lam, t, d, f)
    step = float(np.linalg.norm(np.concatenate([dv, dl])))
    elapsed = time.perf_counter() - t0
    ok = power_rel < 1e-6 and obj_rel < 1e-3 and step < 10 * cfg.kkt_tol and elapsed < 60
    report(capsys, 8, ok, f"power grad rel err {power_rel:.1e} (< 1e-6); objective half-step rel err "
                          f"{obj_rel:.1e} (< 1e-3); KKT step {step:.1e} (< {10 * cfg.kkt_tol:.0e}); {elapsed:.1f} s")
