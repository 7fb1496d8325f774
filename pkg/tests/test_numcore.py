"""Vector kernels, sparse payloads, named RNG streams, gradient checker."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from marina_sim.numcore import (
    SparseVector,
    UsageError,
    densify,
    dot,
    grad_check,
    scaled_add,
    scatter_add,
    sparsify,
    sq_norm,
)
from marina_sim.rng import stream


# ---------------------------------------------------------------------------
# kernels


def test_sq_norm_pythagorean():
    assert sq_norm(np.array([3.0, 4.0])) == 25.0


def test_sq_norm_zero():
    assert sq_norm(np.zeros(7)) == 0.0


def test_sq_norm_sparse():
    sv = SparseVector(np.array([1, 4]), np.array([3.0, 4.0]), 6)
    assert sq_norm(sv) == 25.0


def test_dot_and_scaled_add():
    a = np.array([1.0, 2.0, 3.0])
    b = np.array([4.0, 5.0, 6.0])
    assert dot(a, b) == 32.0
    assert np.array_equal(scaled_add(a, 2.0, b), np.array([9.0, 12.0, 15.0]))


def test_dimension_mismatch_errors():
    with pytest.raises(UsageError):
        dot(np.ones(2), np.ones(3))
    with pytest.raises(UsageError):
        scaled_add(np.ones(2), 1.0, np.ones(3))
    with pytest.raises(UsageError):
        scatter_add(np.ones(2), SparseVector(np.array([0]), np.array([1.0]), 3))


def test_scatter_add_touches_only_listed_indices():
    dense = np.ones(3)
    sv = SparseVector(np.array([0]), np.array([2.0]), 3)
    out = scatter_add(dense, sv)
    assert np.array_equal(out, np.array([3.0, 1.0, 1.0]))
    assert out is dense  # in-place


def test_scatter_add_scaled():
    dense = np.zeros(4)
    sv = SparseVector(np.array([1, 3]), np.array([1.0, 2.0]), 4)
    scatter_add(dense, sv, alpha=-0.5)
    assert np.array_equal(dense, np.array([0.0, -0.5, 0.0, -1.0]))


# ---------------------------------------------------------------------------
# SparseVector contract


def test_sparse_vector_validation():
    with pytest.raises(UsageError):
        SparseVector(np.array([1, 1]), np.array([1.0, 2.0]), 3)  # not strictly increasing
    with pytest.raises(UsageError):
        SparseVector(np.array([0, 3]), np.array([1.0, 2.0]), 3)  # index out of range
    with pytest.raises(UsageError):
        SparseVector(np.array([0]), np.array([np.inf]), 2)  # non-finite value


def test_sparse_vector_explicit_zero_counts():
    # a compressor that selected a zero coordinate still pays for it
    sv = SparseVector(np.array([2]), np.array([0.0]), 5)
    assert sv.nnz == 1


@settings(max_examples=100, deadline=None)
@given(hnp.arrays(np.float64, st.integers(1, 30), elements=st.floats(-1e6, 1e6)))
def test_sparsify_densify_round_trip(v):
    sv = sparsify(v)
    assert sv.nnz == v.size
    assert np.array_equal(densify(sv), v)


# ---------------------------------------------------------------------------
# RNG streams


def test_stream_determinism():
    a = stream(7, "coin").uniform(100)
    b = stream(7, "coin").uniform(100)
    assert np.array_equal(a, b)


def test_stream_seed_sensitivity():
    a = stream(7, "coin").uniform(100)
    b = stream(8, "coin").uniform(100)
    assert not np.array_equal(a, b)


def test_stream_label_sensitivity():
    a = stream(7, "coin").uniform(100)
    b = stream(7, "compressor/worker-0").uniform(100)
    assert not np.array_equal(a, b)


def test_bernoulli_p1_always_true():
    s = stream(0, "coin")
    assert np.all(s.bernoulli(1.0, size=1000))


def test_bernoulli_rate():
    s = stream(3, "coin")
    draws = s.bernoulli(0.3, size=20000)
    rate = draws.mean()
    stderr = np.sqrt(0.3 * 0.7 / 20000)
    assert abs(rate - 0.3) <= 4 * stderr


def test_integers_range():
    s = stream(1, "clients")
    draws = s.integers(5, size=1000)
    assert draws.min() >= 0 and draws.max() <= 4


# ---------------------------------------------------------------------------
# gradient checker


def test_grad_check_quadratic():
    f = lambda x: 0.5 * float(x @ x)
    grad = lambda x: x
    x = stream(0, "data-gen").normal(6)
    assert grad_check(f, grad, x, h=1e-5) <= 1e-8


def test_grad_check_constant():
    f = lambda x: 4.0
    grad = lambda x: np.zeros_like(x)
    assert grad_check(f, grad, np.ones(3)) == 0.0


def test_grad_check_loss_kernel():
    from marina_sim.problems import logsq_loss, logsq_loss_deriv

    rng = stream(5, "data-gen")
    for _ in range(5):
        m = float(rng.normal()) * 3.0
        f = lambda x: logsq_loss(float(x[0]), 1)
        grad = lambda x: np.array([logsq_loss_deriv(float(x[0]), 1)])
        assert grad_check(f, grad, np.array([m]), h=1e-5) <= 1e-5


def test_grad_check_rejects_bad_h():
    with pytest.raises(UsageError):
        grad_check(lambda x: 0.0, lambda x: x, np.ones(2), h=0.0)
