import numpy as np
import pytest

from nustab.matfun import discretize, expm, expm_integral, transform_maps
from nustab.model import ContinuousPlant

from oracles import taylor_expm, taylor_expm_integral

# 40-digit Taylor sums for the bench plant (mpmath), frozen
EXPM_BENCH_01 = np.array([
    [1.0831410796080631805, -0.21956356670825233635, 0.0],
    [0.21956356670825233635, 1.0831410796080631805, 0.0],
    [0.0, 0.0, 1.0512710963760240397],
])
PHI_BENCH_03 = np.array([
    [0.32769235613591212074, -0.10680290357196324283, 0.0],
    [0.10680290357196324283, 0.32769235613591212074, 0.0],
    [0.0, 0.0, 0.32366848545656624523],
])


def rel(X, Y):
    return np.linalg.norm(X - Y) / np.linalg.norm(Y)


def test_expm_trivial():
    assert np.array_equal(expm(np.zeros((3, 3))), np.eye(3))
    assert np.allclose(expm(np.diag([np.log(2), np.log(3)])), np.diag([2.0, 3.0]), rtol=1e-14)


def test_expm_bench_plant(bench_plant):
    E = expm(0.1 * bench_plant.A)
    assert rel(E, EXPM_BENCH_01) <= 1e-14
    assert rel(E, taylor_expm(0.1 * bench_plant.A)) <= 1e-12


def test_expm_overflow():
    with pytest.raises(OverflowError):
        expm(np.array([[1000.0]]))


def test_expm_integral_trivial():
    assert np.allclose(expm_integral(np.zeros((2, 2)), 1.5), 1.5 * np.eye(2), rtol=0, atol=1e-15)
    assert expm_integral(np.array([[1.0]]), np.log(2))[0, 0] == pytest.approx(1.0, rel=1e-14)


def test_expm_integral_bench_plant(bench_plant):
    A = bench_plant.A
    Phi = expm_integral(A, 0.3)
    assert rel(Phi, PHI_BENCH_03) <= 1e-13
    assert rel(Phi, taylor_expm_integral(A, 0.3)) <= 1e-12
    assert np.max(np.abs(A @ Phi + np.eye(3) - expm(A * 0.3))) <= 1e-10


def test_expm_integral_singular_plant():
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    Phi = expm_integral(A, 2.0)
    assert np.allclose(Phi, [[2.0, 2.0], [0.0, 2.0]], atol=1e-14)


def test_discretize_trivial():
    maps = discretize(ContinuousPlant(np.zeros((2, 2)), np.eye(2)), 2.0)
    assert np.allclose(maps.F, np.eye(2)) and np.allclose(maps.G, 2 * np.eye(2))
    assert not maps.transformed
    maps = discretize(ContinuousPlant([[1.0]], [[1.0]]), np.log(2))
    assert maps.F[0, 0] == pytest.approx(2.0, rel=1e-14)
    assert maps.G[0, 0] == pytest.approx(1.0, rel=1e-14)
    with pytest.raises(ValueError):
        discretize(ContinuousPlant([[1.0]], [[1.0]]), 0.0)


def test_discretize_bench_plant(bench_plant):
    h = 0.5
    maps = discretize(bench_plant, h)
    assert rel(maps.F, taylor_expm(bench_plant.A * h)) <= 1e-12
    assert rel(maps.G, taylor_expm_integral(bench_plant.A, h) @ bench_plant.B) <= 1e-12
    # F x0 against 1000 small exponential steps
    x0 = np.array([1.0, -0.5, 2.0])
    small = expm(bench_plant.A * h / 1000)
    x = x0.copy()
    for _ in range(1000):
        x = small @ x
    assert np.allclose(maps.F @ x0, x, rtol=1e-10)


def test_discretize_small_h(bench_plant):
    A, B = bench_plant.A, bench_plant.B
    consts = []
    for h in (1e-3, 1e-4):
        maps = discretize(bench_plant, h)
        consts.append(np.linalg.norm(maps.F - np.eye(3) - A * h, 2) / h**2)
        consts.append(np.linalg.norm(maps.G - B * h, 2) / h**2)
    assert max(consts) < 10 * np.linalg.norm(A, 2) ** 2 * (1 + np.linalg.norm(B, 2))


def test_transform_maps(bench_plant, bench_cert):
    maps = discretize(bench_plant, 0.4)

    class Identity:
        T = np.eye(3)
        T_inv = np.eye(3)

    same = transform_maps(maps, Identity)
    assert np.array_equal(same.F, maps.F) and np.array_equal(same.G, maps.G) and same.transformed
    hat = transform_maps(maps, bench_cert)
    ev = np.sort_complex(np.linalg.eigvals(maps.F))
    ev_hat = np.sort_complex(np.linalg.eigvals(hat.F))
    assert np.allclose(ev, ev_hat, atol=1e-9)
    with pytest.raises(ValueError):
        transform_maps(hat, bench_cert)


def random_bounded(rng, n, bound):
    M = rng.standard_normal((n, n))
    return M * (rng.uniform(0, bound) / np.linalg.norm(M, 2))


def test_semigroup(rng):
    for _ in range(100):
        n = int(rng.integers(1, 7))
        A = random_bounded(rng, n, 5.0)
        h1, h2 = rng.uniform(0, 1, size=2)
        lhs = expm(A * (h1 + h2))
        assert rel(lhs, expm(A * h1) @ expm(A * h2)) <= 1e-9


def test_integral_consistency(rng):
    for _ in range(100):
        n = int(rng.integers(1, 7))
        A = random_bounded(rng, n, 5.0)
        h1, h2 = rng.uniform(0, 1, size=2)
        lhs = expm_integral(A, h1 + h2)
        rhs = expm_integral(A, h1) + expm(A * h1) @ expm_integral(A, h2)
        assert rel(lhs, rhs) <= 1e-9


def test_det_trace(rng):
    for _ in range(100):
        n = int(rng.integers(1, 7))
        M = random_bounded(rng, n, 5.0)
        assert np.linalg.det(expm(M)) == pytest.approx(np.exp(np.trace(M)), rel=1e-9)
