import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from binview.errors import DimensionMismatch, EmptyInput, InsufficientRows, KTooLarge, ZeroVector
from binview.numerics import (
    Population, apply_standardizer, cosine, fit_standardizer, mean_pool, pca_fit, pca_inverse,
    pca_transform,
)

from oracles import cosine_mp, pca_oracle, project

finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False, allow_infinity=False)
vectors = st.integers(2, 12).flatmap(lambda n: st.tuples(st.lists(finite, min_size=n, max_size=n),
                                                          st.lists(finite, min_size=n, max_size=n)))


def nonzero(v):
    return any(abs(x) > 1e-6 for x in v)


@pytest.mark.parametrize("x,y,expected", [
    ((1, 0, 0), (1, 0, 0), 1.0),
    ((1, 0), (0, 1), 0.0),
    ((1, 1), (-1, -1), -1.0),
])
def test_cosine_examples(x, y, expected):
    assert cosine(x, y) == expected


def test_cosine_high_precision_case():
    expected = cosine_mp((1, 2, 3), (4, 5, 6))
    assert abs(expected - 0.974631846) < 1e-9
    assert abs(cosine((1, 2, 3), (4, 5, 6)) - expected) <= 1e-6


def test_cosine_errors():
    with pytest.raises(ZeroVector):
        cosine((0, 0), (1, 0))
    with pytest.raises(DimensionMismatch):
        cosine((1, 0), (1, 0, 0))


@settings(max_examples=200, deadline=None)
@given(vectors)
def test_cosine_properties(pair):
    x, y = pair
    if not (nonzero(x) and nonzero(y)):
        return
    c = cosine(x, y)
    assert -1.0 <= c <= 1.0
    assert c == cosine(y, x)
    assert abs(cosine(np.array(x) * 3.7, y) - c) <= 1e-12


def test_standardizer_examples():
    s = fit_standardizer([(0.0,), (2.0,)])
    assert s.means.tolist() == [1.0] and s.stds.tolist() == [1.0]
    assert apply_standardizer((0.0,), s).tolist() == [-1.0]
    single = fit_standardizer([(3.0, 4.0)], Population.pair)
    assert single.stds.tolist() == [0.0, 0.0]
    const = fit_standardizer([(1.0, 5.0), (2.0, 5.0), (3.0, 5.0)])
    assert const.stds[1] == 0.0
    assert apply_standardizer((9.0, 7.0), const)[1] == 0.0
    assert apply_standardizer(const.means, const).tolist() == [0.0, 0.0]


def test_standardizer_errors():
    with pytest.raises(EmptyInput):
        fit_standardizer([])
    with pytest.raises(DimensionMismatch):
        apply_standardizer((1.0, 2.0), fit_standardizer([(1.0,)]))


def test_mean_pool_examples():
    assert mean_pool([(1, 0), (0, 1)]).tolist() == [0.5, 0.5]
    v = np.array([0.1, 0.7, -0.3])
    assert mean_pool([v]).tolist() == v.tolist()
    assert mean_pool([v] * 7).tolist() == v.tolist()
    with pytest.raises(EmptyInput):
        mean_pool([])


def test_mean_pool_permutation_invariant_bitwise():
    rng = random.Random(3)
    rows = [[rng.uniform(-1, 1) * 10 ** rng.randint(-8, 8) for _ in range(5)] for _ in range(40)]
    shuffled = rows[:]
    rng.shuffle(shuffled)
    assert mean_pool(rows).tolist() == mean_pool(shuffled).tolist()


def test_pca_rank_one_line():
    rows = [(t + 3.0, 2 * t - 1.0) for t in (-2.0, -0.5, 0.0, 1.0, 4.0)]
    m = pca_fit(rows, 1)
    np.testing.assert_allclose(m.components[0], np.array([1, 2]) / math.sqrt(5), atol=1e-12)
    assert abs(m.explained_variance_ratio[0] - 1.0) < 1e-12


def test_pca_isotropic_deterministic():
    rows = [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)]
    m1, m2 = pca_fit(rows, 2), pca_fit(rows, 2)
    np.testing.assert_array_equal(m1.components, m2.components)
    np.testing.assert_allclose(m1.components @ m1.components.T, np.eye(2), atol=1e-12)
    for comp in m1.components:
        assert comp[int(np.argmax(np.abs(comp)))] > 0


def test_pca_transform_examples():
    rng = np.random.default_rng(5)
    rows = rng.normal(size=(9, 4))
    m = pca_fit(rows, 3)
    np.testing.assert_allclose(pca_transform(m.mean, m), 0.0, atol=1e-15)
    unit = pca_transform(m.mean + m.components[0], m)
    np.testing.assert_allclose(unit, [1.0, 0.0, 0.0], atol=1e-8)
    comps, _, mean = pca_oracle(rows.tolist(), 3)
    np.testing.assert_allclose(pca_transform(rows[2], m), project(rows[2].tolist(), comps, mean), atol=1e-6)


def test_pca_reconstruction_full_rank():
    rows = np.random.default_rng(8).normal(size=(10, 5))
    m = pca_fit(rows, 5)
    for r in rows:
        assert np.max(np.abs(pca_inverse(pca_transform(r, m), m) - r)) <= 1e-8


def test_pca_errors():
    with pytest.raises(InsufficientRows):
        pca_fit([(1.0, 2.0)], 1)
    with pytest.raises(KTooLarge):
        pca_fit([(1.0, 2.0), (2.0, 1.0), (0.0, 0.0)], 3)
    m = pca_fit([(1.0, 2.0), (2.0, 1.0), (0.0, 0.0)], 1)
    with pytest.raises(DimensionMismatch):
        pca_transform((1.0,), m)
