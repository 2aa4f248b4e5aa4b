import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from uniporo import fem
from uniporo.errors import FactorizationError, InvalidArgumentError
from uniporo.linalg import block_compose, factorize, relative_residual, solve
from uniporo.mesh import build_unit_square_mesh


def test_identity_blocks_flatten_to_identity():
    bs = block_compose([[sp.identity(2), None], [None, sp.identity(3)]])
    np.testing.assert_array_equal(bs.matrix.toarray(), np.eye(5))
    assert bs.offsets.tolist() == [0, 2, 5]


def test_off_diagonal_block_placement():
    B = sp.csr_matrix(np.array([[1.0, 2.0, 3.0]]))
    bs = block_compose([[None, B], [None, None]], sizes=[1, 3])
    dense = np.zeros((4, 4))
    dense[0, 1:] = [1, 2, 3]
    np.testing.assert_array_equal(bs.matrix.toarray(), dense)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 2 ** 31 - 1))
def test_random_blocks_match_dense_placement(n1, n2, seed):
    rng = np.random.default_rng(seed)
    blocks = [[sp.random(n1, n1, 0.5, random_state=rng), sp.random(n1, n2, 0.5, random_state=rng)],
              [None, sp.random(n2, n2, 0.5, random_state=rng)]]
    bs = block_compose(blocks)
    dense = np.zeros((n1 + n2, n1 + n2))
    dense[:n1, :n1] = blocks[0][0].toarray()
    dense[:n1, n1:] = blocks[0][1].toarray()
    dense[n1:, n1:] = blocks[1][1].toarray()
    np.testing.assert_array_equal(bs.matrix.toarray(), dense)
    M = bs.matrix
    assert np.all(np.diff(M.indptr) >= 0)
    for r in range(M.shape[0]):
        cols = M.indices[M.indptr[r]:M.indptr[r + 1]]
        assert np.all(np.diff(cols) > 0)
    x = rng.standard_normal(n1 + n2)
    np.testing.assert_allclose(np.concatenate(bs.split(x)), x)


def test_inconsistent_blocks_rejected():
    with pytest.raises(InvalidArgumentError):
        block_compose([[sp.identity(2), sp.identity(3)], [None, sp.identity(2)]])


def test_identity_solve():
    F = factorize(sp.identity(4))
    b = np.arange(4.0)
    np.testing.assert_array_equal(solve(F, b), b)


def test_hand_2x2():
    F = factorize(sp.csr_matrix([[2.0, 1.0], [1.0, 2.0]]))
    np.testing.assert_allclose(F.solve(np.array([3.0, 3.0])), [1.0, 1.0], atol=1e-14)


def _dirichlet_laplacian(n):
    S = fem.build_space(build_unit_square_mesh(n), 1)
    A = fem.assemble_stiffness(S)
    cons = fem.DofConstraintSet.build(S.boundary_nodes())
    return fem.constrain_matrix(A, cons)


def test_laplacian_residual_and_determinism():
    A = _dirichlet_laplacian(4)
    F = factorize(A)
    b = np.random.default_rng(0).standard_normal(A.shape[0])
    x = F.solve(b)
    assert relative_residual(A, x, b) <= 1e-10
    np.testing.assert_array_equal(x, F.solve(b))
    np.testing.assert_array_equal(x, factorize(A).solve(b))
    np.testing.assert_allclose(F.solve(A @ np.ones(A.shape[0])), 1.0, atol=1e-10)
    assert np.all(F.solve(np.zeros(A.shape[0])) == 0)


def test_transpose_consistency():
    A = _dirichlet_laplacian(3) + sp.random(16, 16, 0.2, random_state=1)
    assert (A.T.T != A).nnz == 0


def test_singular_matrix_reports_pivot():
    with pytest.raises(FactorizationError):
        factorize(sp.csr_matrix([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(FactorizationError) as info:
        factorize(sp.csr_matrix(np.array([[1.0, 0.0], [0.0, 0.0]])))
    assert info.value.pivot_info is not None


def test_dimension_mismatch():
    F = factorize(sp.identity(3))
    with pytest.raises(InvalidArgumentError):
        F.solve(np.ones(4))
    with pytest.raises(InvalidArgumentError):
        factorize(sp.csr_matrix(np.ones((2, 3))))
