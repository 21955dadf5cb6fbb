import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from aeroflex import linalg
from aeroflex.solvers import SplitJacobian


def test_assemble_sums_duplicates():
    A = linalg.assemble_sparse([0, 0, 1], [1, 1, 0], [2.0, 3.0, 4.0], (2, 2))
    assert A.toarray().tolist() == [[0.0, 5.0], [4.0, 0.0]]


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 30), st.integers(0, 2**31 - 1))
def test_sparse_and_dense_solves_agree_with_numpy(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n)) + n * np.eye(n)
    A[rng.random((n, n)) < 0.5] = 0.0
    np.fill_diagonal(A, n + rng.random(n))
    b = rng.standard_normal(n)
    ref = np.linalg.solve(A, b)
    for M in (A, sp.csr_matrix(A)):
        x = linalg.solve(linalg.factorize(M), b)
        assert np.allclose(x, ref, rtol=1e-10, atol=1e-12)


def test_row_permutation_needs_pivoting():
    A = np.array([[0.0, 1.0], [1.0, 0.0]])
    for M in (A, sp.csr_matrix(A)):
        F = linalg.factorize(M)
        assert np.allclose(linalg.solve(F, np.array([2.0, 3.0])), [3.0, 2.0])
        assert sorted(F.perm_r.tolist()) == [0, 1]


@pytest.mark.parametrize("as_sparse", [False, True])
def test_singular_detected(as_sparse):
    A = np.array([[1.0, 2.0, 0.0], [2.0, 4.0, 0.0], [0.0, 0.0, 1.0]])
    with pytest.raises(linalg.SingularMatrix):
        linalg.factorize(sp.csr_matrix(A) if as_sparse else A)


def test_zero_row_is_singular():
    with pytest.raises(linalg.SingularMatrix):
        linalg.factorize(sp.csr_matrix(np.diag([1.0, 0.0])))


def test_nonfinite_rejected():
    with pytest.raises(linalg.LinalgError):
        linalg.factorize(np.array([[1.0, np.nan], [0.0, 1.0]]))


def test_shape_errors():
    with pytest.raises(linalg.DimensionMismatch):
        linalg.factorize(np.ones((2, 3)))
    F = linalg.factorize(np.eye(3))
    with pytest.raises(linalg.DimensionMismatch):
        linalg.solve(F, np.ones(2))
    with pytest.raises(linalg.DimensionMismatch):
        linalg.matvec(np.eye(3), np.ones(4))


def test_dense_block_bounds_and_matvec():
    blk = linalg.DenseBlock(1, 2, np.ones((2, 2)))
    blk.check_fits((4, 4))
    with pytest.raises(linalg.DimensionMismatch):
        blk.check_fits((4, 3))
    out = np.zeros(4)
    blk.matvec(np.arange(4.0), out)
    assert out.tolist() == [0.0, 5.0, 5.0, 0.0]


def test_split_jacobian_materialize_matches_matvec():
    rng = np.random.default_rng(3)
    n_q = 4
    S = sp.random(10, 10, density=0.3, random_state=1) + sp.eye(10)
    Kqq, Kqs = rng.standard_normal((n_q, n_q)), rng.standard_normal((n_q, n_q))
    J = SplitJacobian(S, Kqq, Kqs, n_q)
    dense = S.toarray()
    dense[:n_q, :n_q] += Kqq
    dense[:n_q, n_q:2 * n_q] += Kqs
    x = rng.standard_normal(10)
    assert np.allclose(J.materialize().toarray(), dense)
    assert np.allclose(linalg.matvec(J, x), dense @ x)
    F = linalg.factorize(J)
    assert np.allclose(dense @ linalg.solve(F, x), x)


def test_pivot_growth_and_rcond_reported():
    F = linalg.factorize(np.diag([1.0, 1e-3]))
    assert F.rcond_estimate == pytest.approx(1e-3)
    assert F.pivot_growth == pytest.approx(1.0)
