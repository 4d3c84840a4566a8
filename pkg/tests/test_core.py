import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vecbal.core import (
    CombinationForest,
    Signing,
    VectorSet,
    brute_force_min,
    brute_force_min_naive,
    discrepancy,
    signed_sum,
)
from vecbal.errors import DimensionError, SizeError, SupportCollisionError, ValidationError


def col(*vals):
    return VectorSet.from_columns([np.atleast_1d(v) for v in vals])


def test_signed_sum_examples():
    assert signed_sum(col(1, 2, 3), Signing.from_string("++-")).tolist() == [0.0]
    X = VectorSet(np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert signed_sum(X, Signing.from_string("+-")).tolist() == [1.0, -1.0]


def test_all_plus_gives_row_sums(rng):
    X = VectorSet(rng.normal(size=(3, 7)))
    np.testing.assert_allclose(signed_sum(X, Signing.ones(7)), X.data.sum(axis=1), rtol=1e-14)


def test_discrepancy_examples():
    assert discrepancy(col(1, 2, 3), Signing.from_string("++-")).sup_norm == 0.0
    X = VectorSet(np.array([[1.0, 1.0], [1.0, -1.0]]))
    rep = discrepancy(X, Signing.from_string("++"))
    assert rep.sup_norm == 2.0
    assert rep.coordinate_sums.tolist() == [2.0, 0.0]
    assert discrepancy(col(1, 2), Signing.from_string("+-")).sup_norm == 1.0


def test_length_mismatch_is_dimension_error():
    with pytest.raises(DimensionError):
        signed_sum(col(1, 2, 3), Signing.from_string("++"))


def test_signing_validation():
    with pytest.raises(ValidationError):
        Signing(np.array([1, 0, -1]))
    with pytest.raises(ValidationError):
        Signing.from_string("+x-")
    assert str(Signing.from_string(" +-+\n")) == "+-+"


def test_vectorset_rejects_nonfinite():
    with pytest.raises(ValidationError):
        VectorSet(np.array([[1.0, np.nan]]))
    with pytest.raises(DimensionError):
        VectorSet.from_columns([[1.0, 2.0], [1.0]])


def test_oracle_small_examples():
    assert brute_force_min(col(1, 2, 3)).sup_norm == 0.0
    rep = brute_force_min(col(1, 2))
    assert rep.sup_norm == 1.0
    assert str(rep.signing) == "+-"


def test_oracle_matches_full_enumeration():
    gen = np.random.default_rng(7)
    X = VectorSet(gen.standard_normal((1, 10)))
    assert brute_force_min(X).sup_norm == pytest.approx(brute_force_min_naive(X), rel=1e-12)


def test_oracle_first_sign_and_ties():
    # every signing of (1, 1) and its negation tie pairwise; sigma_1 is pinned to +1
    rep = brute_force_min(col(1, 1, 1, 1))
    assert rep.sup_norm == 0.0
    assert rep.signing.signs[0] == 1
    # lexicographically smallest minimiser with -1 < +1
    best = min(
        (s for s in itertools.product((-1, 1), repeat=4) if s[0] == 1 and sum(s) == 0),
    )
    assert tuple(rep.signing.signs) == best


def test_oracle_size_guard():
    with pytest.raises(SizeError):
        brute_force_min(VectorSet(np.ones((1, 30))))


@pytest.mark.parametrize("chunks", [1, 3, 17])
def test_oracle_independent_of_split(chunks, rng):
    X = VectorSet(rng.uniform(-1, 1, (2, 14)))
    a = brute_force_min(X)
    b = brute_force_min(X, chunks=chunks)
    assert a.sup_norm == b.sup_norm
    assert str(a.signing) == str(b.signing)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(1, 11), st.integers(0, 2**32 - 1))
def test_oracle_sign_flip_symmetry_and_optimality(m, n, seed):
    gen = np.random.default_rng(seed)
    X = VectorSet(gen.standard_normal((m, n)))
    best = brute_force_min(X)
    assert brute_force_min(X.negated()).sup_norm == best.sup_norm
    sigma = gen.choice([-1, 1], n)
    assert best.sup_norm <= discrepancy(X, sigma).sup_norm
    assert best.sup_norm == pytest.approx(brute_force_min_naive(X), rel=1e-12, abs=1e-15)


def test_forest_tracks_signs():
    f = CombinationForest(4)
    a, b = f.combine([0, 2], 1, [1, 3], -1)  # x0 - x1, x2 - x3
    root = f.chain([a, b], [1, -1])  # x0 - x1 - x2 + x3
    assert f.leaf_signs(root).tolist() == [1, -1, -1, 1]
    assert f.support(a) == {0: 1, 1: -1}
    X = VectorSet(np.array([[1.0, 2.0, 4.0, 8.0]]))
    comb = f.combination(root, [1 - 2 - 4 + 8])
    assert comb.consistent_with(X)
    assert f.coverage([a, b]).tolist() == [1, 1, 1, 1]


def test_forest_refuses_reuse():
    f = CombinationForest(3)
    f.combine([0], 1, [1], -1)
    with pytest.raises(SupportCollisionError):
        f.combine([1], 1, [2], -1)


def test_forest_rollback_frees_children():
    f = CombinationForest(3)
    mark = f.checkpoint()
    f.combine([0], 1, [1], -1)
    f.rollback(mark)
    assert not f.is_consumed(0)
    f.combine([0], 1, [1], 1)


def test_chain_of_empties():
    f = CombinationForest(2)
    assert f.chain([-1, -1], [1, 1]) == -1
