import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from divboot.divergence import Alphabet
from divboot.empirical import (
    Sample,
    apportion,
    empirical_measure,
    is_signed,
    normalized_weighted_empirical,
    weighted_empirical,
)

AB = Alphabet(["d1", "d2", "d3"])


class TestSample:
    def test_from_symbols(self):
        s = Sample.from_symbols(["d1", "d2"], ["d1", "d1", "d2"])
        np.testing.assert_array_equal(s.counts, [2, 1])
        assert s.n == 3
        assert s.symbols == ["d1", "d1", "d2"]

    def test_unknown_symbol_names_row(self):
        with pytest.raises(ValueError, match=r"observation 2: unknown symbol 'd9'"):
            Sample.from_symbols(AB, ["d1", "d2", "d9"])

    def test_from_counts(self):
        s = Sample.from_counts(AB, [2, 0, 1])
        np.testing.assert_array_equal(s.indices, [0, 0, 2])
        with pytest.raises(ValueError):
            Sample.from_counts(AB, [1, -1, 0])

    def test_immutable(self):
        s = Sample.from_counts(AB, [1, 1, 1])
        with pytest.raises(ValueError):
            s.counts[0] = 5


class TestApportion:
    def test_examples(self):
        np.testing.assert_array_equal(apportion(10, [0.5, 0.5]), [5, 5])
        np.testing.assert_array_equal(apportion(7, [0.5, 0.5]), [4, 3])
        np.testing.assert_array_equal(apportion(10, [0.05, 0.95]), [1, 9])
        np.testing.assert_array_equal(apportion(3, [0.2, 0.3, 0.5]), [1, 1, 1])
        np.testing.assert_array_equal(apportion(0, [0.2, 0.8]), [0, 0])

    @given(n=st.integers(0, 5000),
           p=st.lists(st.floats(0.001, 1.0), min_size=2, max_size=8))
    def test_properties(self, n, p):
        p = np.array(p) / np.sum(p)
        c = apportion(n, p)
        assert c.sum() == n
        assert np.all(np.abs(c - n * p) < 1.0 + 1e-9)
        assert np.all(c >= 0)


class TestMeasures:
    def test_empirical(self):
        s = Sample.from_symbols(AB, ["d1", "d3", "d3", "d3"])
        np.testing.assert_allclose(empirical_measure(s), [0.25, 0.0, 0.75])

    def test_unit_weights_recover_empirical(self):
        s = Sample.from_counts(AB, [3, 1, 2])
        w = np.ones(6)
        np.testing.assert_allclose(weighted_empirical(s, w), empirical_measure(s))
        np.testing.assert_allclose(normalized_weighted_empirical(s, w), empirical_measure(s))

    @given(w=st.lists(st.floats(0.01, 5.0), min_size=6, max_size=6))
    def test_normalized_is_probability(self, w):
        s = Sample.from_counts(AB, [3, 1, 2])
        q = normalized_weighted_empirical(s, w)
        assert q.sum() == pytest.approx(1.0, abs=1e-14)
        assert not is_signed(q)
        np.testing.assert_allclose(q, weighted_empirical(s, w) / weighted_empirical(s, w).sum())

    def test_signed_and_degenerate(self):
        s = Sample.from_counts(AB, [1, 1, 1])
        q = normalized_weighted_empirical(s, [2.0, -1.0, 0.5])
        assert is_signed(q)
        assert q.sum() == pytest.approx(1.0)
        assert normalized_weighted_empirical(s, [1.0, -1.0, 0.0]) is None

    def test_weight_length(self):
        s = Sample.from_counts(AB, [1, 1, 1])
        with pytest.raises(ValueError, match="expected 3 weights"):
            weighted_empirical(s, [1.0, 1.0])

    def test_empty(self):
        with pytest.raises(ValueError):
            empirical_measure(Sample.from_counts(AB, [0, 0, 0]))
