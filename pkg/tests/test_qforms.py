from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hamflow.errors import PreconditionError
from hamflow.qforms import (
    QuadraticForm,
    is_nondegenerate,
    perturbation_preserves,
    sgn,
    signature,
)


def test_signature_of_diagonal_forms():
    assert signature(QuadraticForm.from_matrix(np.diag([1.0, -1.0]))) == (1, 1, 0)
    assert sgn(QuadraticForm.from_matrix(np.diag([2.0, 3.0, -1.0]))) == 1
    assert signature(QuadraticForm.from_matrix(np.diag([1.0, 0.0]))) == (1, 0, 1)


def test_default_tolerance_is_relative():
    # default threshold is 1e-9 * ||L||
    assert signature(QuadraticForm.from_matrix(np.diag([1e3, 1e-4]))) == (2, 0, 0)
    assert signature(QuadraticForm.from_matrix(np.diag([1e6, 1e-4]))) == (1, 0, 1)
    assert signature(QuadraticForm.from_matrix(np.diag([1e3, 1e-4])), tol=1e-3) == (1, 0, 1)


def test_asymmetric_matrix_rejected():
    with pytest.raises(ValueError):
        QuadraticForm(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_evaluation_and_algebra():
    Q = QuadraticForm.from_matrix([[2.0, 1.0], [1.0, -1.0]])
    u = np.array([1.0, 2.0])
    assert Q(u) == pytest.approx(2 + 4 - 4)
    assert (Q + (-Q)).norm == 0.0
    assert Q.congruent(np.eye(2)).L == pytest.approx(Q.L)


def test_empty_form():
    Q = QuadraticForm.from_matrix(np.zeros((0, 0)))
    assert Q.dim == 0
    assert signature(Q) == (0, 0, 0)
    assert is_nondegenerate(Q)


def test_perturbation_requires_nondegenerate_and_matching_dims():
    with pytest.raises(PreconditionError):
        perturbation_preserves(QuadraticForm.from_matrix(np.diag([1.0, 0.0])), QuadraticForm.from_matrix(np.eye(2)))
    with pytest.raises(PreconditionError):
        perturbation_preserves(QuadraticForm.from_matrix(np.eye(2)), QuadraticForm.from_matrix(np.eye(3)))


def test_perturbation_bound_is_sharp():
    Q1 = QuadraticForm.from_matrix(np.diag([1.0, -2.0]))
    assert perturbation_preserves(Q1, QuadraticForm.from_matrix(0.99 * np.eye(2)))
    assert not perturbation_preserves(Q1, QuadraticForm.from_matrix(1.01 * np.eye(2)))


def _symmetric(rng, d):
    A = rng.standard_normal((d, d))
    return 0.5 * (A + A.T)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_congruence_preserves_signature(d, seed):
    rng = np.random.default_rng(seed)
    Q = QuadraticForm.from_matrix(_symmetric(rng, d))
    # well-conditioned change of basis: orthogonal times a mild diagonal
    O, _ = np.linalg.qr(rng.standard_normal((d, d)))
    M = O @ np.diag(rng.uniform(0.5, 2.0, d))
    assert signature(Q.congruent(M)) == signature(Q)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1), st.floats(0.0, 0.99))
def test_small_perturbation_keeps_signature(d, seed, frac):
    rng = np.random.default_rng(seed)
    L1 = _symmetric(rng, d)
    gap = np.min(np.abs(np.linalg.eigvalsh(L1)))
    L2 = _symmetric(rng, d)
    L2 *= frac * gap / max(np.linalg.norm(L2, 2), 1e-300)
    Q1, Q2 = QuadraticForm.from_matrix(L1), QuadraticForm.from_matrix(L2)
    assert perturbation_preserves(Q1, Q2)
    eig = np.linalg.eigvalsh(L1 + L2)
    assert signature(Q1 + Q2)[:2] == (int(np.sum(eig > 0)), int(np.sum(eig < 0)))
    assert signature(Q1 + Q2) == signature(Q1)
