import math

import numpy as np
import pytest

from oracles import dense_laws, error_prob_by_hand, tv_dict
from rdlab import (
    BlockCode,
    ChannelExperiment,
    ConfigError,
    DistortionMeasure,
    InvariantViolation,
    Simplex,
    build_induced_P,
    error_probability_P,
    error_probability_Q,
    extend_with_message,
    random_coordination_code,
    reduce_alphabet,
    solve_rd,
    tv_joint,
    tv_lower_bound,
    vanishing_slack_schedule,
    wilson_interval,
)


@pytest.fixture(scope="module")
def rd3():
    return reduce_alphabet(solve_rd(Simplex.uniform(3), DistortionMeasure.hamming(3), 0.5))


def codes(rd, ns=(2, 3, 4)):
    return [random_coordination_code(rd, n, vanishing_slack_schedule(rd.rate), n, distinct=True)
            for n in ns]


def test_wilson_interval():
    lo, hi = wilson_interval(50, 100, 1.0)
    assert lo < 0.5 < hi
    assert wilson_interval(0, 10)[0] == 0.0
    with pytest.raises(ValueError):
        wilson_interval(1, 0)


def test_requires_bijective_decoder():
    code = BlockCode(1, 2, 2, np.array([[0], [0]]), np.array([0, 1]))
    with pytest.raises(ConfigError):
        ChannelExperiment(code, np.full((2, 2), 0.5))


def test_exact_error_matches_hand(rd3):
    for code in codes(rd3):
        exp = ChannelExperiment(code, rd3)
        back = np.nan_to_num(exp.backward)
        assert error_probability_Q(exp).value == pytest.approx(error_prob_by_hand(code, back), abs=1e-12)


def test_monte_carlo_agrees_with_exact(rd3):
    code = codes(rd3, (3,))[0]
    exact = error_probability_Q(ChannelExperiment(code, rd3)).value
    mc = error_probability_Q(ChannelExperiment(code, rd3, mode="monte_carlo", samples=50_000, seed=1))
    assert mc.mode == "monte_carlo" and mc.stderr > 0
    assert mc.agrees_with(exact, z=3)


def test_error_under_p_is_zero_and_bounds_tv(rd3):
    for code in codes(rd3):
        pair = build_induced_P(code, rd3.source, rd3)
        exp = ChannelExperiment(code, rd3)
        assert error_probability_P(exp, pair) == 0.0
        assert error_probability_P(exp, pair, samples=1000, seed=0) == 0.0
        lb = tv_lower_bound(exp, pair)
        P, Q = dense_laws(code, rd3.source.mass, exp.backward)
        assert lb <= tv_dict(P, Q) + 1e-12
        assert lb <= tv_joint(pair).value + 1e-12


def test_invariant_violation_detected(rd3):
    code = codes(rd3, (2,))[0]
    pair = build_induced_P(code, rd3.source, rd3)
    enc = code.encoder.copy()
    enc[0] = (enc[0] + 1) % code.M
    tampered = BlockCode(code.n, code.x_size, code.y_size, code.codewords, enc)
    with pytest.raises(InvariantViolation):
        error_probability_P(ChannelExperiment(tampered, rd3), pair)


def test_single_message_has_no_error():
    code = BlockCode(2, 2, 2, np.array([[0, 1]]), np.zeros(4, dtype=int))
    assert error_probability_Q(ChannelExperiment(code, np.full((2, 2), 0.5))).value == 0.0


def test_message_extension_keeps_tv(rd3):
    for code in codes(rd3, (2, 3)):
        pair = build_induced_P(code, rd3.source, rd3)
        audit = extend_with_message(pair)
        assert audit.difference < 1e-12
        assert audit.tv_plain == pytest.approx(tv_joint(pair).value, abs=1e-12)


def test_exact_budget(rd3):
    from rdlab import ResourceError
    code = codes(rd3, (4,))[0]
    with pytest.raises(ResourceError):
        error_probability_Q(ChannelExperiment(code, rd3, budget=10))
    assert math.isfinite(error_probability_Q(
        ChannelExperiment(code, rd3, mode="monte_carlo", samples=1000, budget=10)).value)
