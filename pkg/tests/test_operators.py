import numpy as np
import pytest

from xanes_unmix import (
    Dictionary,
    DimensionError,
    EnergyGrid,
    ImageGeometry,
    PhaseMap,
    ScalingField,
    cg_solve,
    divergence_adjoint,
    forward_difference,
    laplacian_apply,
    mix_forward,
)
from xanes_unmix.operators import build_dense_operator, grad_rows, div_adjoint_rows, mix_values


def loop_gradient(z, geom):
    """Scalar double-loop oracle applying the difference definition per pixel."""
    M, K = geom.rows, geom.cols
    img = z.reshape(M, K)
    dx = np.zeros((M, K))
    dy = np.zeros((M, K))
    for i in range(M):
        for j in range(K):
            dx[i, j] = img[i, (j + 1) % K] - img[i, j]
            dy[i, j] = img[(i + 1) % M, j] - img[i, j]
    return dx.ravel(), dy.ravel()


def dense_gradient_matrix(geom):
    """2N x N matrix of the gradient, built column by column."""
    n = geom.n_pixels
    G = np.zeros((2 * n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        gp = forward_difference(e, geom)
        G[:, j] = gp.stacked()
    return G


def test_forward_difference_constant_is_zero():
    geom = ImageGeometry(4, 5)
    gp = forward_difference(np.full(20, 5.0), geom)
    assert np.all(gp.dx == 0.0)
    assert np.all(gp.dy == 0.0)


def test_forward_difference_1x3_wraps():
    geom = ImageGeometry(1, 3)
    gp = forward_difference(np.array([1.0, 2.0, 4.0]), geom)
    assert np.array_equal(gp.dx, [1.0, 2.0, -3.0])
    assert np.array_equal(gp.dy, [0.0, 0.0, 0.0])


def test_forward_difference_matches_loop_oracle():
    geom = ImageGeometry(3, 3)
    z = np.zeros(9)
    z[4] = 1.0
    gp = forward_difference(z, geom)
    dx, dy = loop_gradient(z, geom)
    assert np.array_equal(gp.dx, dx)
    assert np.array_equal(gp.dy, dy)

    rng = np.random.default_rng(0)
    for geom in [ImageGeometry(4, 4), ImageGeometry(2, 7), ImageGeometry(5, 3)]:
        z = rng.normal(size=geom.n_pixels)
        gp = forward_difference(z, geom)
        dx, dy = loop_gradient(z, geom)
        assert np.array_equal(gp.dx, dx)
        assert np.array_equal(gp.dy, dy)


def test_forward_difference_length_mismatch():
    with pytest.raises(DimensionError):
        forward_difference(np.zeros(5), ImageGeometry(2, 2))


def test_divergence_adjoint_zero():
    geom = ImageGeometry(3, 4)
    from xanes_unmix import GradientPair

    g = GradientPair(geom, np.zeros(12), np.zeros(12))
    assert np.all(divergence_adjoint(g, geom) == 0.0)


def test_adjoint_identity_and_dense_oracle():
    rng = np.random.default_rng(1)
    geom = ImageGeometry(4, 4)
    G = dense_gradient_matrix(geom)
    from xanes_unmix import GradientPair

    for _ in range(50):
        z = rng.normal(size=16)
        gvec = rng.normal(size=32)
        g = GradientPair(geom, gvec[:16], gvec[16:])
        lhs = forward_difference(z, geom).stacked() @ gvec
        rhs = z @ divergence_adjoint(g, geom)
        assert abs(lhs - rhs) < 1e-10
        # the implementation must equal the dense transpose action
        assert np.allclose(divergence_adjoint(g, geom), G.T @ gvec, atol=1e-12)


def test_adjoint_of_constant_gradient_is_zero():
    geom = ImageGeometry(3, 3)
    g = forward_difference(np.full(9, 2.5), geom)
    assert np.all(divergence_adjoint(g, geom) == 0.0)


def test_laplacian_constant_and_impulse():
    geom = ImageGeometry(3, 3)
    assert np.all(laplacian_apply(np.full(9, 7.0), geom) == 0.0)
    z = np.zeros(9)
    z[4] = 1.0
    lap = laplacian_apply(z, geom).reshape(3, 3)
    expected = np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])
    assert np.array_equal(lap, expected)


def test_laplacian_equals_dense_oracle_and_row_sums():
    for geom in [ImageGeometry(3, 3), ImageGeometry(4, 5)]:
        G = dense_gradient_matrix(geom)
        lap_dense = -(G.T @ G)
        lap_op = build_dense_operator(lambda v: laplacian_apply(v, geom), geom.n_pixels)
        assert np.max(np.abs(lap_op - lap_dense)) < 1e-12
        assert np.max(np.abs(lap_op.sum(axis=1))) < 1e-12


def test_laplacian_negative_semidefinite():
    rng = np.random.default_rng(2)
    geom = ImageGeometry(5, 4)
    for _ in range(100):
        z = rng.normal(size=20)
        assert z @ (-laplacian_apply(z, geom)) >= 0.0


def test_laplacian_is_exact_composition():
    rng = np.random.default_rng(3)
    geom = ImageGeometry(4, 6)
    z = rng.normal(size=24)
    composed = -divergence_adjoint(forward_difference(z, geom), geom)
    assert np.array_equal(laplacian_apply(z, geom), composed)


def test_grad_rows_matches_per_row():
    rng = np.random.default_rng(4)
    geom = ImageGeometry(3, 5)
    X = rng.normal(size=(3, 15))
    G = grad_rows(X, geom)
    for j in range(3):
        gp = forward_difference(X[j], geom)
        assert np.array_equal(G[j], gp.stacked())
    back = div_adjoint_rows(G, geom)
    for j in range(3):
        from xanes_unmix import GradientPair

        gp = GradientPair(geom, G[j, :15], G[j, 15:])
        assert np.array_equal(back[j], divergence_adjoint(gp, geom))


def test_cg_identity_and_scaled_identity():
    rng = np.random.default_rng(5)
    r = rng.normal(size=12)
    res = cg_solve(lambda v: v, r)
    assert res.converged
    assert np.allclose(res.x, r, atol=1e-12)
    res = cg_solve(lambda v: 2.0 * v, r)
    assert np.allclose(res.x, r / 2.0, atol=1e-12)


def test_cg_matches_dense_factorization_oracle():
    rng = np.random.default_rng(6)
    B = rng.normal(size=(5, 5))
    A = B @ B.T + 5.0 * np.eye(5)
    rhs = rng.normal(size=5)
    expected = np.linalg.solve(A, rhs)
    res = cg_solve(lambda v: A @ v, rhs, tol=1e-12, max_iter=100)
    assert np.allclose(res.x, expected, atol=1e-8)


def test_cg_residual_contract_on_pixel_operator():
    rng = np.random.default_rng(7)
    geom = ImageGeometry(6, 6)
    s = rng.uniform(0.0, 2.0, geom.n_pixels)

    def apply(v):
        return s * s * v - laplacian_apply(v, geom) + v

    rhs = rng.normal(size=geom.n_pixels)
    res = cg_solve(apply, rhs, tol=1e-6, max_iter=200)
    assert res.converged
    assert np.linalg.norm(apply(res.x) - rhs) <= 1e-6 * np.linalg.norm(rhs)


def test_cg_flags_nonconvergence():
    rng = np.random.default_rng(8)
    B = rng.normal(size=(30, 30))
    A = B @ B.T + 1e-3 * np.eye(30)
    res = cg_solve(lambda v: A @ v, rng.normal(size=30), tol=1e-14, max_iter=2)
    assert not res.converged
    assert res.iterations == 2


def test_cg_zero_rhs_and_bad_inputs():
    res = cg_solve(lambda v: v, np.zeros(4))
    assert res.converged and np.all(res.x == 0.0)
    with pytest.raises(ValueError):
        cg_solve(lambda v: v, np.array([np.nan, 1.0]))
    with pytest.raises(ValueError):
        cg_solve(lambda v: v, np.ones(3), tol=0.0)


def test_mix_forward_unit_scaling_and_pure_pixels():
    grid = EnergyGrid(np.arange(4, dtype=float))
    A = Dictionary(grid, np.arange(8, dtype=float).reshape(4, 2) + 1.0)
    geom = ImageGeometry(1, 3)
    X = PhaseMap(geom, np.array([[1.0, 0.5, 0.0], [0.0, 0.5, 1.0]]))
    s = ScalingField(geom, np.ones(3))
    cube = mix_forward(A, X, s)
    assert np.array_equal(cube.values, A.spectra @ X.abundances)

    X_pure = PhaseMap(geom, np.array([[1.0, 1.0, 1.0], [0.0, 0.0, 0.0]]))
    s2 = ScalingField(geom, np.array([0.5, 1.0, 2.0]))
    cube = mix_forward(A, X_pure, s2)
    for k, sk in enumerate([0.5, 1.0, 2.0]):
        assert np.allclose(cube.values[:, k], sk * A.spectra[:, 0], atol=1e-14)


def test_mix_forward_matches_triple_loop_oracle():
    rng = np.random.default_rng(9)
    T, L, n = 4, 2, 3
    A = rng.normal(size=(T, L))
    X = rng.uniform(size=(L, n))
    s = rng.uniform(0.5, 1.5, n)
    got = mix_values(A, X, s)
    expected = np.zeros((T, n))
    for t in range(T):
        for k in range(n):
            acc = 0.0
            for l in range(L):
                acc += A[t, l] * X[l, k]
            expected[t, k] = s[k] * acc
    assert np.allclose(got, expected, atol=1e-12)


def test_mix_values_linear_in_X_and_s():
    rng = np.random.default_rng(10)
    A = rng.normal(size=(5, 3))
    X1, X2 = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
    s = rng.uniform(0.5, 2.0, 4)
    lhs = mix_values(A, X1 + 2.0 * X2, s)
    rhs = mix_values(A, X1, s) + 2.0 * mix_values(A, X2, s)
    assert np.allclose(lhs, rhs, atol=1e-12)
    lhs = mix_values(A, X1, 3.0 * s)
    assert np.allclose(lhs, 3.0 * mix_values(A, X1, s), atol=1e-12)


def test_mix_forward_dimension_mismatch():
    grid = EnergyGrid(np.arange(4, dtype=float))
    A = Dictionary(grid, np.ones((4, 2)))
    geom = ImageGeometry(1, 3)
    X = PhaseMap(geom, np.ones((3, 3)) / 3.0)
    s = ScalingField(geom, np.ones(3))
    with pytest.raises(DimensionError):
        mix_forward(A, X, s)
