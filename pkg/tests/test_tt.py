"""Tensor-train container and kernels against the dense oracle."""

import io

import numpy as np
import pytest

from ttergodic import (
    DenseTensor,
    TtTensor,
    num_params,
    tt_add,
    tt_element,
    tt_from_dense,
    tt_gather,
    tt_hadamard,
    tt_inner,
    tt_inner3,
    tt_load,
    tt_norm,
    tt_random,
    tt_rank1,
    tt_round,
    tt_save,
    tt_scale,
    tt_to_dense,
    tt_zeros,
)
from conftest import random_tt_corpus


def test_all_ones_rank1_element_is_one():
    t = tt_rank1([np.ones(3), np.ones(4), np.ones(5)])
    assert tt_element(t, (1, 1, 1)) == 1.0
    assert tt_element(t, (3, 4, 5)) == 1.0


def test_element_matches_dense_on_fig_shape(rng):
    t = tt_random((5, 6, 7, 8), (2, 3, 4), rng)
    dense = tt_to_dense(t)
    assert dense.values.size == 1680
    assert tt_element(t, (2, 3, 1, 4)) == pytest.approx(
        dense.element((2, 3, 1, 4)), abs=1e-12
    )
    # exhaustive element check
    for k in np.ndindex(*t.mode_sizes):
        k1 = tuple(i + 1 for i in k)
        assert tt_element(t, k1) == pytest.approx(dense.element(k1), abs=1e-12)


def test_element_bounds_error():
    t = tt_rank1([np.arange(3.0), np.arange(4.0)])
    with pytest.raises(IndexError):
        tt_element(t, (0, 1))
    with pytest.raises(IndexError):
        tt_element(t, (1, 5))
    with pytest.raises(IndexError):
        tt_element(t, (1, 1, 1))


def test_rank1_outer_product():
    t = tt_rank1([np.array([1.0, 2.0]), np.array([3.0, 4.0])])
    assert tt_element(t, (2, 1)) == 6.0
    assert tt_to_dense(t).values.tolist() == [[3.0, 4.0], [6.0, 8.0]]
    assert t.ranks == (1, 1, 1)


def test_rank1_single_nonzero():
    t = tt_rank1([np.array([1.0, 0.0]), np.array([0.0, 1.0])])
    dense = tt_to_dense(t).values
    assert dense[0, 1] == 1.0
    assert np.sum(np.abs(dense)) == 1.0


def test_rank1_random_matches_product(rng):
    vecs = [rng.standard_normal(k) for k in (3, 4, 2)]
    t = tt_rank1(vecs)
    for k in np.ndindex(3, 4, 2):
        expected = vecs[0][k[0]] * vecs[1][k[1]] * vecs[2][k[2]]
        assert tt_element(t, tuple(i + 1 for i in k)) == pytest.approx(expected)


def test_rank1_param_count():
    # rank-1 gradient-style tensors store K per dimension
    for d in (5, 6, 7):
        t = tt_rank1([np.ones(10)] * d)
        assert num_params(t) == 10 * d


def test_rank1_rejects_empty():
    with pytest.raises(ValueError):
        tt_rank1([])
    with pytest.raises(ValueError):
        tt_rank1([np.array([])])


def test_add_zero_keeps_elements(rng):
    t = tt_random((3, 4, 5), (2, 2), rng)
    s = tt_add(t, tt_zeros(t.mode_sizes))
    np.testing.assert_allclose(tt_to_dense(s).values, tt_to_dense(t).values)


def test_add_rank_bookkeeping(rng):
    a = tt_random((3, 3, 3, 3), (2, 3, 2), rng)
    b = tt_random((3, 3, 3, 3), (2, 3, 2), rng)
    s = tt_add(a, b)
    assert s.interior_ranks == (4, 6, 4)
    np.testing.assert_allclose(
        tt_to_dense(s).values,
        tt_to_dense(a).values + tt_to_dense(b).values,
        atol=1e-12,
    )


def test_add_shape_mismatch():
    a = tt_zeros((2, 3))
    b = tt_zeros((2, 4))
    with pytest.raises(ValueError):
        tt_add(a, b)


def test_scale(rng):
    t = tt_random((2, 3, 4, 2), (2, 2, 2), rng)
    dense = tt_to_dense(t).values
    assert np.all(tt_to_dense(tt_scale(0.0, t)).values == 0)
    np.testing.assert_allclose(tt_to_dense(tt_scale(1.0, t)).values, dense)
    scaled = tt_scale(-2.5, t)
    assert scaled.ranks == t.ranks
    np.testing.assert_allclose(tt_to_dense(scaled).values, -2.5 * dense, atol=1e-12)


def test_hadamard(rng):
    a = tt_random((3, 4, 5), (2, 3), rng)
    b = tt_random((3, 4, 5), (3, 2), rng)
    h = tt_hadamard(a, b)
    assert h.interior_ranks == (6, 6)
    np.testing.assert_allclose(
        tt_to_dense(h).values,
        tt_to_dense(a).values * tt_to_dense(b).values,
        atol=1e-12,
    )
    ones = tt_rank1([np.ones(3), np.ones(4), np.ones(5)])
    np.testing.assert_allclose(
        tt_to_dense(tt_hadamard(a, ones)).values, tt_to_dense(a).values, atol=1e-14
    )


def test_hadamard_rank1_separability(rng):
    va = [rng.standard_normal(3), rng.standard_normal(4)]
    vb = [rng.standard_normal(3), rng.standard_normal(4)]
    h = tt_hadamard(tt_rank1(va), tt_rank1(vb))
    assert h.interior_ranks == (1,)
    expected = tt_rank1([va[0] * vb[0], va[1] * vb[1]])
    np.testing.assert_allclose(
        tt_to_dense(h).values, tt_to_dense(expected).values, atol=1e-14
    )


def test_inner(rng):
    a = tt_random((3, 2, 4, 3), (2, 3, 2), rng)
    b = tt_random((3, 2, 4, 3), (1, 2, 3), rng)
    dense = float(np.sum(tt_to_dense(a).values * tt_to_dense(b).values))
    assert tt_inner(a, b) == pytest.approx(dense, rel=1e-12)
    assert tt_inner(a, tt_zeros(a.mode_sizes)) == 0.0
    # separable inner product factorizes into dot products
    va = [rng.standard_normal(4), rng.standard_normal(5)]
    vb = [rng.standard_normal(4), rng.standard_normal(5)]
    assert tt_inner(tt_rank1(va), tt_rank1(vb)) == pytest.approx(
        np.dot(va[0], vb[0]) * np.dot(va[1], vb[1])
    )


def test_inner3(rng):
    a = tt_random((3, 4, 2), (2, 2), rng)
    b = tt_random((3, 4, 2), (3, 2), rng)
    c = tt_random((3, 4, 2), (2, 3), rng)
    dense = float(
        np.sum(tt_to_dense(a).values * tt_to_dense(b).values * tt_to_dense(c).values)
    )
    assert tt_inner3(a, b, c) == pytest.approx(dense, rel=1e-12)


def test_norm(rng):
    assert tt_norm(tt_zeros((3, 4))) == 0.0
    unit = tt_rank1([np.array([1.0, 0.0]), np.array([0.0, 1.0, 0.0])])
    assert tt_norm(unit) == pytest.approx(1.0)
    t = tt_random((4, 3, 5), (3, 2), rng)
    assert tt_norm(t) == pytest.approx(
        np.linalg.norm(tt_to_dense(t).values), rel=1e-12
    )


def test_round_restores_ranks_after_self_add(rng):
    t = tt_random((4, 5, 6), (2, 3), rng)
    doubled = tt_round(tt_add(t, t), eps=1e-12)
    assert doubled.ranks == t.ranks
    np.testing.assert_allclose(
        tt_to_dense(doubled).values, 2 * tt_to_dense(t).values, atol=1e-10
    )


def test_round_rank_mode_no_truncation(rng):
    t = tt_random((4, 4, 4), (3, 3), rng)
    r = tt_round(t, max_rank=max(t.ranks))
    np.testing.assert_allclose(
        tt_to_dense(r).values, tt_to_dense(t).values, atol=1e-12
    )


def test_round_accuracy_contract(rng):
    for _ in range(20):
        for t, dense in random_tt_corpus(1, rng):
            norm = np.linalg.norm(dense)
            for eps in (1e-1, 1e-2, 1e-6):
                r = tt_round(t, eps=eps)
                err = np.linalg.norm(tt_to_dense(r).values - dense)
                assert err <= eps * norm * (1 + 1e-9)


def test_round_rank_mode_caps(rng):
    t = tt_random((5, 5, 5, 5), (4, 4, 4), rng)
    r = tt_round(t, max_rank=2)
    assert max(r.interior_ranks) <= 2


def test_round_argument_errors(rng):
    t = tt_random((3, 3), (2,), rng)
    with pytest.raises(ValueError):
        tt_round(t)
    with pytest.raises(ValueError):
        tt_round(t, eps=0.0)
    with pytest.raises(ValueError):
        tt_round(t, max_rank=0)


def test_round_zero_tensor():
    z = tt_round(tt_add(tt_zeros((3, 4)), tt_zeros((3, 4))), eps=1e-10)
    assert z.interior_ranks == (1,)
    assert np.all(tt_to_dense(z).values == 0)


def test_dense_roundtrip(rng):
    x = rng.standard_normal((4, 5, 3))
    t = tt_from_dense(x)
    np.testing.assert_allclose(tt_to_dense(t).values, x, atol=1e-12)


def test_dense_guard():
    with pytest.raises(ValueError):
        DenseTensor(np.zeros((300, 300, 300)))
    t = tt_zeros((300, 300, 300))
    with pytest.raises(ValueError):
        tt_to_dense(t)


def test_gather_matches_elements(rng):
    t = tt_random((4, 5, 6), (3, 2), rng)
    idx = np.column_stack([rng.integers(1, m + 1, size=50) for m in t.mode_sizes])
    vals = tt_gather(t, idx)
    for row, v in zip(idx, vals):
        assert v == pytest.approx(tt_element(t, row), abs=1e-12)


def test_serialization_roundtrip(rng):
    t = tt_random((3, 4, 5, 2), (2, 4, 3), rng)
    buf = io.BytesIO()
    tt_save(t, buf)
    buf.seek(0)
    back = tt_load(buf)
    assert back.mode_sizes == t.mode_sizes
    assert back.ranks == t.ranks
    for a, b in zip(t.cores, back.cores):
        np.testing.assert_array_equal(a, b)


def test_serialization_file_roundtrip(rng, tmp_path):
    t = tt_random((6, 2, 3), (2, 2), rng)
    path = tmp_path / "tensor.bin"
    tt_save(t, path)
    back = tt_load(path)
    np.testing.assert_array_equal(tt_to_dense(back).values, tt_to_dense(t).values)


def test_storage_formula(rng):
    t = tt_random((4, 5, 6), (2, 3), rng)
    expected = 1 * 2 * 4 + 2 * 3 * 5 + 3 * 1 * 6
    assert num_params(t) == expected


def test_constructor_validation():
    with pytest.raises(ValueError):
        TtTensor([])
    with pytest.raises(ValueError):
        TtTensor([np.zeros((2, 1, 3))])  # bad left boundary
    with pytest.raises(ValueError):
        TtTensor([np.zeros((1, 2, 3)), np.zeros((3, 1, 4))])  # rank chain broken


def test_oracle_equivalence_corpus(rng):
    """Every op agrees with the dense oracle on a random corpus."""
    for t, dense in random_tt_corpus(40, rng):
        nrm = max(np.linalg.norm(dense), 1e-30)
        assert abs(tt_norm(t) - np.linalg.norm(dense)) <= 1e-10 * max(1, nrm)
        r = tt_round(t, eps=1e-12)
        assert np.max(np.abs(tt_to_dense(r).values - dense)) <= 1e-10 * max(1, nrm)
        s = tt_add(t, t)
        assert np.max(np.abs(tt_to_dense(s).values - 2 * dense)) <= 1e-10 * max(1, nrm)
