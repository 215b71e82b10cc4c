import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from rdlab import (
    Channel,
    EmpiricalType,
    JointLaw,
    ResourceError,
    Simplex,
    block_index,
    condition,
    empirical_type,
    entropy,
    enumerate_blocks,
    kl_divergence,
    law_from_dict,
    law_to_dict,
    mutual_information,
    product_extension,
    to_bits,
    variational_distance,
)


def _normalize(a):
    a = np.asarray(a, float) + 1e-3
    return a / a.sum()


probs = st.integers(2, 5).flatmap(
    lambda k: arrays(float, k, elements=st.floats(0, 1)).map(_normalize))


def joints(max_k=4):
    return st.tuples(st.integers(2, max_k), st.integers(2, max_k)).flatmap(
        lambda s: arrays(float, s, elements=st.floats(0, 1)).map(_normalize))


class TestSimplex:
    def test_rejects_bad_mass(self):
        with pytest.raises(ValueError):
            Simplex([0.5, 0.6])
        with pytest.raises(ValueError):
            Simplex([1.5, -0.5])
        with pytest.raises(ValueError):
            Simplex([[0.5, 0.5]])

    def test_read_only(self):
        s = Simplex([0.25, 0.75])
        with pytest.raises(ValueError):
            s.mass[0] = 1.0

    def test_channel_joint_output(self):
        ch = Channel.symmetric(2, 0.1)
        j = ch.joint(Simplex.uniform(2))
        np.testing.assert_allclose(j.mass, [[0.45, 0.05], [0.05, 0.45]])
        np.testing.assert_allclose(ch.output(Simplex([0.2, 0.8])).mass, [0.26, 0.74])

    def test_channel_rejects_bad_rows(self):
        with pytest.raises(ValueError):
            Channel([[0.5, 0.6], [0.5, 0.5]])


class TestFunctionals:
    def test_kl_by_hand(self):
        assert kl_divergence([0.5, 0.5], [0.25, 0.75]) == pytest.approx(
            0.5 * math.log(2) + 0.5 * math.log(2 / 3), abs=1e-15)

    def test_kl_infinite_sentinel(self):
        assert kl_divergence([0.5, 0.5], [1.0, 0.0]) == math.inf
        assert kl_divergence([1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2))

    def test_kl_shape_mismatch(self):
        with pytest.raises(ValueError):
            kl_divergence([0.5, 0.5], [1 / 3] * 3)

    def test_tv_and_entropy(self):
        assert variational_distance([0.5, 0.5, 0], [0, 0.5, 0.5]) == pytest.approx(0.5)
        assert entropy(Simplex.uniform(4)) == pytest.approx(math.log(4))
        assert to_bits(math.log(2)) == pytest.approx(1.0)

    def test_mutual_information_identity_channel(self):
        j = Channel.identity(3).joint(Simplex.uniform(3))
        assert mutual_information(j) == pytest.approx(math.log(3))
        assert mutual_information(np.full((2, 2), 0.25)) == 0.0

    @given(probs, st.data())
    @settings(max_examples=60, deadline=None)
    def test_kl_nonnegative_and_pinsker(self, p, data):
        q = data.draw(arrays(float, p.size, elements=st.floats(0, 1)).map(_normalize))
        kl = kl_divergence(p, q)
        tv = variational_distance(p, q)
        assert kl >= 0
        assert tv <= math.sqrt(kl / 2) + 1e-12

    @given(joints(), st.randoms(use_true_random=False))
    @settings(max_examples=50, deadline=None)
    def test_mi_permutation_invariant(self, m, rnd):
        rows = list(range(m.shape[0]))
        cols = list(range(m.shape[1]))
        rnd.shuffle(rows)
        rnd.shuffle(cols)
        assert mutual_information(m[rows][:, cols]) == pytest.approx(mutual_information(m), abs=1e-12)
        assert mutual_information(m.T) == pytest.approx(mutual_information(m), abs=1e-12)
        assert 0 <= mutual_information(m) <= min(entropy(m.sum(1)), entropy(m.sum(0))) + 1e-12


class TestTypes:
    def test_counts(self):
        t = empirical_type([0, 1, 1, 0], [0, 1, 0, 0])
        np.testing.assert_array_equal(t.counts, [[2, 0], [1, 1]])
        assert t.fractions()[0][0] == Fraction(1, 2)
        assert t.as_joint().mass[1, 1] == 0.25

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            empirical_type([0, 1], [0])
        with pytest.raises(ValueError):
            empirical_type([0, 2], [0, 1], x_size=2)

    @given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2)), min_size=1, max_size=20),
           st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2)), min_size=1, max_size=20))
    @settings(max_examples=50, deadline=None)
    def test_concatenation_is_weighted_average(self, a, b):
        ta = empirical_type(*zip(*a), x_size=3, y_size=3)
        tb = empirical_type(*zip(*b), x_size=3, y_size=3)
        tab = empirical_type(*zip(*(a + b)), x_size=3, y_size=3)
        np.testing.assert_array_equal(tab.counts, ta.counts + tb.counts)
        np.testing.assert_allclose(tab.mass, (len(a) * ta.mass + len(b) * tb.mass) / (len(a) + len(b)))


class TestBlocks:
    def test_lexicographic_order(self):
        b = enumerate_blocks(2, 3)
        assert b[1].tolist() == [0, 0, 1]
        assert b[4].tolist() == [1, 0, 0]
        np.testing.assert_array_equal(block_index(b, 2), np.arange(8))

    def test_budget(self):
        with pytest.raises(ResourceError):
            enumerate_blocks(3, 10, budget=1000)

    def test_product_extension_matches_kron(self):
        p = Simplex([0.2, 0.3, 0.5])
        ext = product_extension(p, 3)
        np.testing.assert_allclose(ext.mass, np.kron(np.kron(p.mass, p.mass), p.mass), rtol=1e-14)
        ch = Channel.symmetric(2, 0.1)
        np.testing.assert_allclose(product_extension(ch, 2).rows, np.kron(ch.rows, ch.rows))
        with pytest.raises(ResourceError):
            product_extension(p, 20, budget=1000)


class TestConditioning:
    def test_undefined_rows(self):
        j = JointLaw([[0.5, 0.0], [0.5, 0.0]])
        back = condition(j, given="y")
        assert back.defined.tolist() == [True, False]
        assert np.isnan(back.rows[1]).all()
        with pytest.raises(ValueError):
            back.channel()
        np.testing.assert_allclose(condition(j, "x").channel().rows, [[1, 0], [1, 0]])


@pytest.mark.parametrize("law", [
    Simplex([0.1, 0.9], labels=("a", "b")),
    Channel.symmetric(3, 0.2),
    JointLaw([[0.1, 0.2], [0.3, 0.4]]),
    EmpiricalType(np.array([[1, 2], [0, 3]]), 6),
])
def test_serialization_roundtrip(law):
    back = law_from_dict(law_to_dict(law))
    assert type(back) is type(law)
    np.testing.assert_array_equal(getattr(back, "mass", None) if not isinstance(law, Channel) else back.rows,
                                  getattr(law, "mass", None) if not isinstance(law, Channel) else law.rows)
