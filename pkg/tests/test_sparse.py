import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from wavedg.sparse import BlockSystem, SolveError, SparseMatrix, matvec, quadratic_form, solve


def tridiag(n, lo, d, up):
    return SparseMatrix.from_dense(np.diag([d] * n) + np.diag([lo] * (n - 1), -1) + np.diag([up] * (n - 1), 1))


def test_identity_matvec():
    assert np.array_equal(matvec(SparseMatrix.identity(3), [1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])


def test_zero_matrix_matvec():
    z = SparseMatrix.from_coo(4, 3, [], [], [])
    assert np.array_equal(matvec(z, [1.0, -2.0, 5.0]), np.zeros(4))


def test_tridiag_matvec():
    assert np.array_equal(matvec(tridiag(3, -1.0, 2.0, -1.0), np.ones(3)), [1.0, 0.0, 1.0])


def test_matvec_dimension_mismatch():
    with pytest.raises(ValueError):
        matvec(SparseMatrix.identity(3), np.ones(2))


def test_quadratic_forms():
    assert quadratic_form(SparseMatrix.identity(2), [3.0, 4.0], [3.0, 4.0]) == 25.0
    h = 0.5
    assert quadratic_form(tridiag(2, -1.0, 2.0, -1.0).scaled(1 / h), [1.0, 1.0], [1.0, 1.0]) == pytest.approx(4.0, abs=1e-14)
    with pytest.raises(ValueError):
        quadratic_form(SparseMatrix.identity(2), [1.0], [1.0, 2.0])


def test_duplicates_merged_and_sorted():
    m = SparseMatrix.from_coo(2, 3, [1, 0, 0, 1], [2, 1, 1, 0], [1.0, 2.0, 3.0, 4.0])
    assert list(m.row_offsets) == [0, 1, 3]
    assert list(m.col_indices) == [1, 0, 2]
    assert list(m.values) == [5.0, 4.0, 1.0]


def test_noncanonical_rejected():
    with pytest.raises(ValueError):
        SparseMatrix(1, 3, [0, 2], [2, 1], [1.0, 1.0])
    with pytest.raises(ValueError):
        SparseMatrix(1, 3, [0, 1], [3], [1.0])
    with pytest.raises(ValueError):
        SparseMatrix.from_dense([[1.0, 2.0], [0.0, 1.0]], symmetric=True)


def test_immutable_arrays():
    m = SparseMatrix.identity(2)
    with pytest.raises(ValueError):
        m.values[0] = 3.0


def test_diagonal_and_identity_solves():
    b = np.array([0.3, -1.0, 2.0])
    assert np.array_equal(solve(SparseMatrix.identity(3), b), b)
    np.testing.assert_allclose(solve(SparseMatrix.from_dense(np.diag([2.0, 4.0])), [2.0, 8.0]), [1.0, 2.0], rtol=1e-15)


@pytest.mark.parametrize("spd_hint", [False, True])
def test_random_spd_matches_dense_lu(spd_hint):
    rng = np.random.default_rng(7)
    g = rng.standard_normal((8, 8))
    a = g @ g.T + 8 * np.eye(8)
    b = rng.standard_normal(8)
    x = solve(SparseMatrix.from_dense(a, symmetric=True), b, spd_hint=spd_hint)
    np.testing.assert_allclose(x, np.linalg.solve(a, b), atol=1e-10)


def test_singular_raises_with_residual():
    with pytest.raises(SolveError) as info:
        solve(SparseMatrix.from_dense([[1.0, 1.0], [1.0, 1.0]]), [1.0, 0.0])
    assert hasattr(info.value, "residual")


def test_solve_matvec_roundtrip():
    rng = np.random.default_rng(1)
    m = tridiag(30, -1.0, 4.0, -1.5)
    for _ in range(5):
        b = rng.standard_normal(30)
        assert np.linalg.norm(matvec(m, solve(m, b)) - b) <= 1e-11 * np.linalg.norm(b)


def dense_block_oracle(grid):
    rows = []
    for row in grid:
        rows.append(np.hstack([np.zeros((r, c)) if e is None else e[0] * e[1].to_dense()
                               for e, (r, c) in zip(row, shapes_of(grid, row))]))
    return np.vstack(rows)


def shapes_of(grid, row):
    nr = next(e[1].n_rows for e in row if e is not None)
    return [(nr, next(g[j][1].n_cols for g in grid if g[j] is not None)) for j in range(len(row))]


def test_block_materialize_matches_dense():
    rng = np.random.default_rng(3)
    a = SparseMatrix.from_dense(rng.standard_normal((3, 3)))
    b = SparseMatrix.from_dense(rng.standard_normal((3, 2)))
    c = SparseMatrix.from_dense(rng.standard_normal((2, 3)))
    grid = (((2.0, a), (-1.5, b)), ((0.5, c), None), ((1.0, a), (3.0, b)))
    m = BlockSystem(grid).materialize()
    np.testing.assert_allclose(m.to_dense(), dense_block_oracle(grid), rtol=0, atol=0)
    assert m.shape == (8, 5)


def test_block_shape_mismatch():
    with pytest.raises(ValueError):
        BlockSystem((((1.0, SparseMatrix.identity(2)), (1.0, SparseMatrix.identity(3))),))


@settings(max_examples=40, deadline=None)
@given(arrays(float, (6, 6), elements=st.floats(-5, 5)).map(lambda a: np.where(np.abs(a) < 1.0, 0.0, a)),
       arrays(float, 6, elements=st.floats(-5, 5)))
def test_matvec_matches_dense(a, x):
    m = SparseMatrix.from_dense(a)
    np.testing.assert_allclose(matvec(m, x), a @ x, rtol=1e-13, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(arrays(float, (5, 5), elements=st.floats(-3, 3)), arrays(float, 5, elements=st.floats(-3, 3)),
       arrays(float, 5, elements=st.floats(-3, 3)))
def test_quadratic_form_symmetry(g, x, y):
    m = SparseMatrix.from_dense(g + g.T, symmetric=True)
    lhs, rhs = quadratic_form(m, x, y), quadratic_form(m, y, x)
    assert abs(lhs - rhs) <= 1e-13 * max(1.0, abs(lhs))
