import numpy as np
import pytest

from nustab import gain_init
from nustab.errors import (
    ControllabilityError,
    DegenerateEigenvectorError,
    PlacementError,
    SpectrumError,
    ValidationError,
)
from nustab.gain_init import PoleSpec, accept_user_gain, diagonalize, place_poles
from nustab.model import ContinuousPlant

from conftest import BENCH_K
from oracles import random_controllable_plant


def test_polespec_validation():
    assert PoleSpec((-3, -1, -2)).poles == (-3.0, -2.0, -1.0)
    for bad in ((-1, 0), (-1, -1), (-1, -1 - 1e-9), (), (-1, float("nan"))):
        with pytest.raises(ValidationError):
            PoleSpec(bad)


def test_default_poles(bench_plant):
    assert PoleSpec.default(bench_plant).poles == (-3.0, -2.0, -1.0)
    fast = ContinuousPlant([[4.0]], [[1.0]])
    assert PoleSpec.default(fast).poles == (-4.0,)


def test_place_scalar():
    K = place_poles(ContinuousPlant([[1.0]], [[1.0]]), PoleSpec((-1.0,)))
    assert K == pytest.approx(np.array([[-2.0]]))


def test_place_double_integrator():
    plant = ContinuousPlant([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]])
    K = place_poles(plant, PoleSpec((-1.0, -2.0)))
    assert np.allclose(K, [[-2.0, -3.0]], atol=1e-12)


def test_place_reproduces_bench_spectrum(bench_plant):
    # independent spectrum of the reference gain, at 40 digits (mpmath):
    # -3, -2, -1 to within 1e-38
    spectrum = np.sort(np.linalg.eigvals(bench_plant.A + bench_plant.B @ np.array(BENCH_K)).real)
    assert np.allclose(spectrum, [-3.0, -2.0, -1.0], atol=1e-12)
    K = place_poles(bench_plant, PoleSpec(tuple(spectrum)))
    placed = np.sort(np.linalg.eigvals(bench_plant.A + bench_plant.B @ K).real)
    assert np.allclose(placed, spectrum, atol=1e-7)
    # single input: the gain is unique
    assert np.allclose(K, BENCH_K, atol=1e-9)


def test_place_uncontrollable():
    plant = ContinuousPlant(np.diag([-1.0, -1.0]), [[1.0], [1.0]])
    with pytest.raises(ControllabilityError):
        place_poles(plant, PoleSpec((-1.0, -2.0)))


def test_place_multi_input_needs_prefeedback():
    # A = 0, B = I: no single direction B v controls both states
    plant = ContinuousPlant(np.zeros((2, 2)), np.eye(2))
    K = place_poles(plant, PoleSpec((-1.0, -2.0)))
    assert np.allclose(np.sort(np.linalg.eigvals(K).real), [-2.0, -1.0], atol=1e-7)


def _intrinsically_unverifiable(plant, poles):
    # with one input the gain is unique, so an eigensolver cannot confirm
    # 1e-7 once eps * ||Acl|| * cond(eigenvectors) exceeds it
    if plant.m != 1:
        return False
    k = gain_init._ackermann(plant.A, plant.B[:, 0], poles)
    Acl = plant.A + np.outer(plant.B[:, 0], k)
    V = np.linalg.eig(Acl)[1]
    return np.finfo(float).eps * np.linalg.norm(Acl, 2) * np.linalg.cond(V) > 1e-7


def test_place_random_plants():
    rng = np.random.default_rng(2016)
    done = refused = 0
    while done < 200:
        n = int(rng.integers(1, 7))
        m = int(rng.integers(1, min(n, 3) + 1))
        plant = random_controllable_plant(rng, n, m)
        poles = -np.arange(1, n + 1, dtype=float) * rng.uniform(0.5, 2.0)
        try:
            K = place_poles(plant, PoleSpec(tuple(poles)))
        except PlacementError:
            assert _intrinsically_unverifiable(plant, poles)
            refused += 1
            continue
        eig = np.linalg.eigvals(plant.A + plant.B @ K)
        eig = eig[np.lexsort((eig.imag, eig.real))]
        assert np.max(np.abs(eig - np.sort(poles))) <= 1e-7
        done += 1
    assert refused <= 5


def test_accept_user_gain(bench_plant):
    K = accept_user_gain(bench_plant, BENCH_K)
    assert K.shape == (1, 3)
    with pytest.raises(SpectrumError) as info:
        accept_user_gain(bench_plant, np.zeros((1, 3)))
    assert len(info.value.eigenvalues) == 3
    K = accept_user_gain(ContinuousPlant([[1.0]], [[1.0]]), [[-2.0]])
    assert K[0, 0] == -2.0
    with pytest.raises(SpectrumError):
        accept_user_gain(ContinuousPlant([[1.0]], [[1.0]]), [[-0.5]])


def test_accept_rejects_repeated_poles():
    plant = ContinuousPlant([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]])
    with pytest.raises(SpectrumError):
        accept_user_gain(plant, [[-1.0, -2.0]])  # s^2 + 2 s + 1


def test_diagonalize_already_diagonal():
    plant = ContinuousPlant(np.diag([-1.0, -3.0, -2.0]), np.eye(3))
    d = diagonalize(plant, np.zeros((3, 3)))
    assert np.array_equal(d.D, [-3.0, -2.0, -1.0])
    assert np.allclose(np.abs(d.T), np.eye(3)[:, [1, 2, 0]])


def test_diagonalize_symmetric():
    S = np.array([[-2.0, 0.5, 0.0], [0.5, -3.0, 0.2], [0.0, 0.2, -1.0]])
    plant = ContinuousPlant(S, np.eye(3))
    d = diagonalize(plant, np.zeros((3, 3)))
    assert d.cond_T == pytest.approx(1.0, abs=1e-10)
    assert np.allclose(d.T.T @ d.T, np.eye(3), atol=1e-12)


def test_diagonalize_bench(bench_plant, bench_design):
    d = bench_design
    Acl = bench_plant.A + bench_plant.B @ d.K_c
    assert np.allclose(d.D, [-3.0, -2.0, -1.0], atol=1e-12)
    assert np.isfinite(d.cond_T) and d.cond_T < 1e3
    assert np.max(np.abs(d.T_inv @ Acl @ d.T - np.diag(d.D))) <= 1e-8
    assert np.allclose(np.linalg.norm(d.T, axis=0), 1.0)
    recon = d.T @ np.diag(d.D) @ d.T_inv
    assert np.max(np.abs(recon - Acl)) <= 1e-8 * np.linalg.norm(Acl)


def test_diagonalize_sign_and_determinism(bench_plant):
    d1 = diagonalize(bench_plant, BENCH_K)
    d2 = diagonalize(bench_plant, BENCH_K)
    assert np.array_equal(d1.T, d2.T) and np.array_equal(d1.T_inv, d2.T_inv)
    for col in d1.T.T:
        first = col[np.flatnonzero(np.abs(col) > 1e-12)[0]]
        assert first > 0


def test_diagonalize_random_reconstruction():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(1, 6))
        m = int(rng.integers(1, n + 1))
        plant = random_controllable_plant(rng, n, m)
        K = place_poles(plant, PoleSpec(tuple(-np.arange(1.0, n + 1))))
        try:
            d = diagonalize(plant, K)
        except DegenerateEigenvectorError:
            continue
        Acl = plant.A + plant.B @ K
        recon = d.T @ np.diag(d.D) @ d.T_inv
        assert np.max(np.abs(recon - Acl)) <= 1e-8 * np.linalg.norm(Acl)


def test_diagonalize_refuses_ill_conditioned(monkeypatch):
    plant = ContinuousPlant([[-1.0, 1.0], [0.0, -1.0 - 1e-6]], np.eye(2))
    monkeypatch.setattr(gain_init, "T_COND_MAX", 1e4)
    with pytest.raises(DegenerateEigenvectorError):
        diagonalize(plant, np.zeros((2, 2)))
