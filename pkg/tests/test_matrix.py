import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from recallscore.errors import ConstantVector
from recallscore.matrix import CLAMP_EPS, Z_MAX, SimilarityMatrix, build_matrix, fisher_z, rank_average, spearman

from conftest import brute_ranks, brute_spearman


def test_spearman_examples():
    assert spearman([1, 2, 3], [1, 2, 3]) == 1.0
    assert spearman([1, 2, 3], [2, 1, 3]) == pytest.approx(0.5, abs=1e-15)
    # ranks (1, 2.5, 2.5, 4) vs (1, 2, 3, 4): 4.5 / sqrt(4.5 * 5)
    expected = 4.5 / math.sqrt(22.5)
    assert expected == pytest.approx(0.9486832980505138, abs=1e-15)
    assert spearman([1, 2, 2, 4], [1, 2, 3, 4]) == pytest.approx(expected, abs=1e-15)
    assert brute_spearman([1, 2, 2, 4], [1, 2, 3, 4]) == pytest.approx(expected, abs=1e-15)


def test_rank_average_matches_counting_oracle():
    x = [3.0, 1.0, 3.0, 2.0, 3.0, 0.5]
    assert rank_average(x).tolist() == brute_ranks(x)


def test_spearman_errors():
    with pytest.raises(ConstantVector):
        spearman([1, 1, 1], [1, 2, 3])
    with pytest.raises(ValueError):
        spearman([1, 2], [1, 2])
    with pytest.raises(ValueError):
        spearman([1, 2, 3], [1, 2, 3, 4])


vectors = st.integers(3, 12).flatmap(
    lambda n: st.tuples(
        st.lists(st.integers(-4, 4), min_size=n, max_size=n),
        st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=n, max_size=n),
    )
)


@settings(max_examples=400, deadline=None)
@given(vectors)
def test_spearman_matches_brute_force(pair):
    x, y = pair
    if len(set(x)) < 2 or len(set(y)) < 2:
        return
    assert abs(spearman(x, y) - brute_spearman(x, y)) < 1e-12
    assert spearman(x, y) == spearman(y, x)


@settings(max_examples=200, deadline=None)
@given(vectors)
def test_spearman_monotone_invariance(pair):
    _, y = pair
    x = np.linspace(-2, 2, len(y)) + np.arange(len(y)) % 3
    if len(set(y)) < 2:
        return
    r = spearman(x, y)
    for g in (lambda v: 3 * v + 7, lambda v: v**3, np.exp):
        assert spearman(g(x), y) == pytest.approx(r, abs=1e-12)


def test_fisher_z_values():
    assert fisher_z(0.0) == 0.0
    # atanh(0.5) = 0.5 * ln(3)
    assert fisher_z(0.5) == pytest.approx(0.5 * math.log(3), abs=1e-15)
    assert fisher_z(0.5) == pytest.approx(0.5493061443340548, abs=1e-15)
    clamped = 0.5 * math.log((2 - CLAMP_EPS) / CLAMP_EPS)
    assert fisher_z(1.0) == pytest.approx(clamped, abs=1e-9)
    assert fisher_z(1.0) == pytest.approx(8.405621391, abs=1e-9)
    assert fisher_z(-1.0) == -fisher_z(1.0)
    with pytest.raises(ValueError):
        fisher_z(1.5)


def _random_vectors(rng, k, dim=32):
    return [rng.standard_normal(dim) for _ in range(k)]


def test_self_matrix_diagonal():
    rng = np.random.default_rng(1)
    vs = _random_vectors(rng, 10)
    m = build_matrix(vs, vs)
    assert m.shape == (10, 10)
    assert np.all(np.diag(m.values) == Z_MAX)
    assert np.all(np.argmax(m.values, axis=1) == np.arange(10))
    assert np.all(np.abs(m.values) <= Z_MAX)


def test_build_matrix_transpose_symmetry():
    rng = np.random.default_rng(2)
    a, b = _random_vectors(rng, 10), _random_vectors(rng, 7)
    assert np.array_equal(build_matrix(a, b).values, build_matrix(b, a).values.T)


def test_build_matrix_entries_match_oracle():
    rng = np.random.default_rng(3)
    a, b = _random_vectors(rng, 4, 9), _random_vectors(rng, 4, 9)
    m = build_matrix(a, b)
    for i in range(4):
        for j in range(4):
            assert m.values[i, j] == pytest.approx(math.atanh(brute_spearman(a[i], b[j])), abs=1e-12)


def test_build_matrix_constant_vector_reports_cell():
    rng = np.random.default_rng(4)
    a = _random_vectors(rng, 3)
    b = _random_vectors(rng, 3)
    b[2] = np.ones(32)
    with pytest.raises(ConstantVector) as info:
        build_matrix(a, b)
    assert info.value.cell == (0, 2)


def test_matrix_dump_roundtrip(tmp_path):
    values = np.array([[0.1, np.nan], [1 / 3, 2.0]])
    m = SimilarityMatrix(values, "rating", "story:a", "recall:p:a")
    m.dump(tmp_path / "m.json")
    loaded = SimilarityMatrix.load(tmp_path / "m.json")
    assert loaded.mode == "rating" and loaded.row_label == "story:a"
    assert np.isnan(loaded.values[0, 1])
    assert loaded.values[1, 0] == pytest.approx(1 / 3, rel=1e-14)
    data = m.to_dict()
    assert set(data) == {"mode", "row_label", "col_label", "n", "values"}
    assert data["values"][0][1] is None
