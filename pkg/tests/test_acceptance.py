"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Lines are echoed in the "acceptance criteria" section at the end of the
pytest run (see conftest.py).  Tolerances are pinned here.
"""

import math

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from fixtures import RD_FIXTURES, random_code_fixtures, rd_fixture
from oracles import binary_hamming_rd, dense_laws, grid_rd, kl_dict
from rdlab import (
    ChannelExperiment,
    DistortionMeasure,
    JointLaw,
    RdSolution,
    Simplex,
    append_pathological_codeword,
    averaged_single_letter_marginal,
    backward_uniqueness_probe,
    block_output_entropy,
    build_induced_P,
    chain_rule_terms,
    check_membership_a,
    empirical_type,
    error_probability_Q,
    full_backward_matrix,
    goodness_report,
    normalized_block_mi,
    normalized_divergence,
    random_coordination_code,
    rate_schedule,
    reduce_alphabet,
    solve_rd,
    to_bits,
    tv_joint,
)
from rdlab.experiments import ExperimentConfig, build_code, channel_rows, divergence_rows

CHAIN_TOL = 1e-9
BINARY_RD_TOL_BITS = 1e-6
TERNARY_RD_TOL = 1e-3
UNIQUENESS_TOL = 1e-5
SANDWICH_SLACK = 1e-12  # float rounding only
AVERAGE_TYPE_TOL = 1e-12
# Smallest exact Q(error) over n = 2..10 on the bijective family (seed 0) was
# 0.714285714275 at n = 2 (5/7 up to solver precision); committed floor below it.
CALIBRATION_FLOOR = 0.71
MC_SAMPLES = 200_000
MC_Z = 3.0

GOOD_SWEEP = ExperimentConfig(source=[0.5, 0.5], target_distortion=0.2, slack_scale=0.5,
                              n_grid=[2, 4, 6, 8, 10], constructor="best", lloyd_inits=10)
BIJECTIVE_FAMILY = ExperimentConfig(source=[1 / 3, 1 / 3, 1 / 3], target_distortion=0.5,
                                    delta=0.25, n_grid=list(range(2, 11)), constructor="random",
                                    distinct=True, seed=0)


def report(k: int, ok: bool, detail: str):
    ACCEPTANCE_LINES.append(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
    print(ACCEPTANCE_LINES[-1])
    assert ok, detail


@pytest.fixture(scope="module")
def good_rows():
    return divergence_rows(GOOD_SWEEP)


@pytest.fixture(scope="module")
def family_rows():
    return channel_rows(BIJECTIVE_FAMILY)


def test_criterion_1_chain_rule():
    fixtures = random_code_fixtures(24, seed=2024)
    worst, checked = 0.0, 0
    for code, source, back in fixtures:
        pair = build_induced_P(code, source, back)
        div = normalized_divergence(pair) * pair.n
        t1, t2 = chain_rule_terms(pair)
        oracle = kl_dict(*dense_laws(code, source.mass, back))
        assert div == pytest.approx(oracle, abs=1e-10)
        worst = max(worst, abs(div - (t1 + t2)))
        checked += 1
    report(1, checked >= 20 and worst < CHAIN_TOL,
           f"{checked} random fixtures, max |D - (term1 + term2)| = {worst:.2e} < {CHAIN_TOL:g}")


def test_criterion_2_rd_oracles():
    grid = np.linspace(0.02, 0.48, 20)
    worst = 0.0
    for D in grid:
        sol = solve_rd(Simplex.uniform(2), DistortionMeasure.hamming(2), float(D))
        worst = max(worst, abs(to_bits(sol.rate) - to_bits(binary_hamming_rd(D))))
    source, d, D = rd_fixture(RD_FIXTURES[5])
    tern = solve_rd(source, d, D).rate
    oracle = grid_rd(source.mass, d.matrix, D)
    ok = worst < BINARY_RD_TOL_BITS and abs(tern - oracle) < TERNARY_RD_TOL
    report(2, ok, f"binary max err {worst:.2e} bits over 20 D; "
                  f"ternary |R - grid| = {abs(tern - oracle):.2e}")


def test_criterion_3_backward_uniqueness():
    worst, bad = 0.0, []
    for entry in RD_FIXTURES:
        rep = backward_uniqueness_probe(*rd_fixture(entry), num_restarts=10, seed=0)
        worst = max(worst, rep.max_deviation)
        if not rep.ok or rep.max_deviation >= UNIQUENESS_TOL:
            bad.append(entry[0])
    report(3, not bad, f"{len(RD_FIXTURES)} fixtures x 10 restarts, max entrywise deviation "
                       f"{worst:.2e}" + (f"; failing {bad}" if bad else ""))


def test_criterion_4_alphabet_reduction():
    cases, bad = 0, []
    for entry in RD_FIXTURES:
        source, d, D0 = rd_fixture(entry)
        for D in (D0 / 2, D0, min(1.5 * D0, d.d_max(source) * 0.99)):
            sol = reduce_alphabet(solve_rd(source, d, D))
            cases += 1
            if not check_membership_a(sol.joint):
                bad.append((entry[0], D))
    report(4, not bad, f"{cases} (fixture, D) cases reduced; membership holds on all"
           if not bad else f"membership fails on {bad}")


def test_criterion_5_divergence_trend(good_rows):
    div = [r["normalized_divergence"] for r in good_rows]
    t1 = [r["term1_over_n"] for r in good_rows]
    t2 = [r["term2_over_n"] for r in good_rows]
    ok = (all(math.isfinite(v) for v in div) and div[-1] < div[0]
          and t1[-1] < t1[0] and t2[-1] < t2[0])
    report(5, ok, f"(1/n)D: {div[0]:.4f} -> {div[-1]:.4f}; term1/n {t1[0]:.4f} -> {t1[-1]:.4f}; "
                  f"term2/n {t2[0]:.4f} -> {t2[-1]:.4f}")


def test_criterion_6_pathological_codeword():
    j = JointLaw([[0.5, 0.0], [0.25, 0.25]])
    rd = RdSolution.from_joint(j)
    assert not check_membership_a(j)
    hamming = DistortionMeasure.hamming(2)
    back = np.nan_to_num(full_backward_matrix(rd))
    all_inf, within, worst = True, True, 0.0
    for n in (2, 4, 6, 8):
        code = random_coordination_code(rd, n, rate_schedule(rd.rate, 0.5), n)
        bad = append_pathological_codeword(code, (0, 1), back, rd.source)
        all_inf &= normalized_divergence(build_induced_P(bad, rd.source, rd)) == math.inf
        before = goodness_report(code, rd.source, hamming, rd)
        after = goodness_report(bad, rd.source, hamming, rd)
        for a, b in zip(before[:3], after[:3]):
            worst = max(worst, abs(a - b) * code.M)
            within &= abs(a - b) < 1.0 / code.M
    report(6, all_inf and within,
           f"+inf at n = 2,4,6,8; goodness changes within 1/M (max M*|change| = {worst:.3f})")


def test_criterion_7_mi_sandwich(good_rows):
    fixtures = random_code_fixtures(24, seed=77)
    for n in GOOD_SWEEP.n_grid[:3]:
        rd = GOOD_SWEEP.target()
        fixtures.append((build_code(GOOD_SWEEP, rd, n), rd.source, full_backward_matrix(rd)))
    violations = 0
    for code, source, back in fixtures:
        pair = build_induced_P(code, source, back)
        mi, h = normalized_block_mi(pair), block_output_entropy(pair) / pair.n
        violations += not (mi <= h + SANDWICH_SLACK and h <= code.rate + SANDWICH_SLACK)
    gap = [abs(r["normalized_block_mi"] - r["target_mi"]) for r in good_rows]
    report(7, violations == 0 and gap[-1] < gap[0],
           f"sandwich holds on {len(fixtures)} codes; MI gap {gap[0]:.4f} -> {gap[-1]:.4f}")


def test_criterion_8_average_type(good_rows):
    fixtures = random_code_fixtures(20, seed=88)
    worst = 0.0
    for code, source, back in fixtures:
        pair = build_induced_P(code, source, back)
        avg = np.zeros((code.x_size, code.y_size))
        for xb, p, yb in zip(pair.x_blocks, pair.px, pair.y_blocks):
            avg += p * empirical_type(xb, yb, code.x_size, code.y_size).mass
        worst = max(worst, float(np.abs(avg - averaged_single_letter_marginal(pair).mass).max()))
    tv = [r["tv_avg_marginal_to_target"] for r in good_rows]
    report(8, worst < AVERAGE_TYPE_TOL and tv[-1] < tv[0],
           f"E[T] identity max err {worst:.1e}; ||P_XJYJ - P_XY|| {tv[0]:.4f} -> {tv[-1]:.4f}")


def test_criterion_9_divergence_without_tv(family_rows):
    q = [r["q_error"] for r in family_rows]
    div = [r["normalized_divergence"] for r in family_rows]
    assert q[0] == pytest.approx(0.7142857142752119, abs=1e-9)  # frozen exact value, n = 2
    ok = min(q) > CALIBRATION_FLOOR and div[-1] < div[0]
    report(9, ok, f"Q(E) in [{min(q):.4f}, {max(q):.4f}] > floor {CALIBRATION_FLOOR}; "
                  f"(1/n)D {div[0]:.4f} -> {div[-1]:.4f}")


def test_criterion_10_cross_validation(family_rows, good_rows):
    rd = BIJECTIVE_FAMILY.target()
    disagree = 0
    for n in range(2, 8):
        code = build_code(BIJECTIVE_FAMILY, rd, n, bijective=True)
        exact = error_probability_Q(ChannelExperiment(code, rd)).value
        mc = error_probability_Q(ChannelExperiment(code, rd, mode="monte_carlo",
                                                   samples=MC_SAMPLES, seed=n))
        disagree += not mc.agrees_with(exact, MC_Z)
    bound_ok = all(r["tv_lower_bound"] <= r["tv_joint"] + 1e-12
                   for r in family_rows if r["tv_joint_mode"] == "exact")
    pairs = [(r["tv_joint"], r["normalized_divergence"] * r["n"])
             for r in list(family_rows) + list(good_rows) if r["tv_joint_mode"] == "exact"]
    for code, source, back in random_code_fixtures(20, seed=1010):
        pair = build_induced_P(code, source, back)
        pairs.append((tv_joint(pair).value, normalized_divergence(pair) * pair.n))
    pinsker = all(tv <= math.sqrt(kl / 2) + 1e-12 for tv, kl in pairs)
    report(10, disagree == 0 and bound_ok and pinsker,
           f"MC vs exact Q(E) within {MC_Z:g} s.e. on 6 fixtures ({disagree} misses); "
           f"bound <= exact TV; Pinsker on {len(pairs)} pairs")
