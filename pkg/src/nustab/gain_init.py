"""Continuous stabilizing gain with real distinct closed-loop poles, and the
eigenvector transform that diagonalizes the closed loop."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ControllabilityError,
    DegenerateEigenvectorError,
    DimensionError,
    PlacementError,
    SpectrumError,
    ValidationError,
)
from .model import ContinuousPlant, Diagonalization, numerical_rank

POLE_GAP_RTOL = 1e-6
IMAG_RTOL = 1e-8
PLACEMENT_ATOL = 1e-7
CTRB_COND_MAX = 1e12
T_COND_MAX = 1e8
INPUT_DIRECTION_SEED = 20160
MAX_DIRECTION_TRIES = 64


def _check_gap(poles: np.ndarray) -> bool:
    if poles.size < 2:
        return True
    scale = np.max(np.abs(poles))
    return bool(np.min(np.diff(np.sort(poles))) >= POLE_GAP_RTOL * scale)


@dataclass(frozen=True)
class PoleSpec:
    """Desired continuous closed-loop poles: real, negative, distinct."""

    poles: tuple

    def __post_init__(self):
        p = np.sort(np.asarray(self.poles, dtype=float).ravel())
        if p.size == 0 or not np.all(np.isfinite(p)):
            raise ValidationError("poles must be a non-empty list of finite numbers")
        if np.any(p >= 0):
            raise ValidationError(f"poles must be strictly negative: {p.tolist()}")
        if not _check_gap(p):
            raise ValidationError(f"poles must be pairwise distinct: {p.tolist()}")
        object.__setattr__(self, "poles", tuple(p.tolist()))

    @classmethod
    def default(cls, plant: ContinuousPlant) -> "PoleSpec":
        """``-1, -2, ..., -n`` scaled by ``max(1, spectral abscissa of A)``."""
        abscissa = float(np.max(np.linalg.eigvals(plant.A).real))
        scale = max(1.0, abscissa)
        return cls(tuple(-scale * k for k in range(1, plant.n + 1)))


def ctrb(A, b) -> np.ndarray:
    cols = [b]
    for _ in range(A.shape[0] - 1):
        cols.append(A @ cols[-1])
    return np.column_stack(cols)


def _ackermann(A, b, poles):
    """Row gain ``k`` with ``eig(A + b k) = poles`` (single input)."""
    n = A.shape[0]
    C = ctrb(A, b)
    if numerical_rank(C) < n:
        raise ControllabilityError("(A, b) is not controllable")
    if np.linalg.cond(C) > CTRB_COND_MAX:
        raise ControllabilityError(
            f"controllability matrix too ill-conditioned (cond = {np.linalg.cond(C):.3g})"
        )
    coeffs = np.poly(poles)
    pA = np.zeros_like(A)
    for c in coeffs:
        pA = pA @ A + c * np.eye(n)
    # last row of C^{-1} without forming the inverse
    e_n = np.zeros(n)
    e_n[-1] = 1.0
    y = np.linalg.solve(C.T, e_n)
    return -(y @ pA)


def _reductions(m: int, n: int):
    """Deterministic (v, K_0) pairs for the single-input reduction."""
    if m == 1:
        yield np.ones(1), np.zeros((1, n))
        return
    rng = np.random.default_rng(INPUT_DIRECTION_SEED)
    for k in range(MAX_DIRECTION_TRIES):
        v = rng.standard_normal(m)
        v /= np.linalg.norm(v)
        # second half: random pre-feedback so one direction reaches every mode
        K0 = rng.standard_normal((m, n)) if k >= MAX_DIRECTION_TRIES // 2 else np.zeros((m, n))
        yield v, K0


def place_poles(plant: ContinuousPlant, spec: PoleSpec) -> np.ndarray:
    """Gain ``K_c`` (m x n) with ``eig(A + B K_c) = spec.poles``.

    Multi-input plants are reduced to one input through ``B v`` for a
    deterministic sequence of unit directions ``v``; if none works, a
    deterministic pre-feedback ``K_0`` is added first (Heymann). The single
    input problem is solved with Ackermann's formula and the result is
    checked with an eigensolver.
    """
    A, B = plant.A, plant.B
    n, m = plant.n, plant.m
    poles = np.asarray(spec.poles)
    if poles.size != n:
        raise DimensionError(f"need {n} poles, got {poles.size}")

    last_error = None
    for v, K0 in _reductions(m, n):
        A0 = A + B @ K0
        try:
            k_row = _ackermann(A0, B @ v, poles)
        except ControllabilityError as exc:
            last_error = exc
            continue
        K = K0 + np.outer(v, k_row)
        if _placement_error(A + B @ K, poles) <= PLACEMENT_ATOL:
            return K
        last_error = PlacementError("closed-loop eigenvalues miss the requested poles")
    if isinstance(last_error, PlacementError):
        raise last_error
    raise ControllabilityError(
        "no input direction makes the plant controllable through a single input"
    ) from last_error


def _placement_error(Acl, poles) -> float:
    eig = np.linalg.eigvals(Acl)
    eig = eig[np.lexsort((eig.imag, eig.real))]
    return float(np.max(np.abs(eig - np.sort(poles))))


def accept_user_gain(plant: ContinuousPlant, K_c) -> np.ndarray:
    """Validate a user gain: ``A + B K_c`` must have real, distinct,
    negative eigenvalues. Raises :class:`SpectrumError` listing them
    otherwise."""
    K = np.array(K_c, dtype=float)
    if K.shape != (plant.m, plant.n):
        raise DimensionError(f"K_c must be {plant.m}x{plant.n}, got {K.shape}")
    eig = np.linalg.eigvals(plant.A + plant.B @ K)
    radius = float(np.max(np.abs(eig)))
    listed = ", ".join(f"{e:.6g}" for e in eig)
    if np.any(np.abs(eig.imag) > IMAG_RTOL * radius):
        raise SpectrumError(f"closed-loop eigenvalues are not real: {listed}", eig)
    real = np.sort(eig.real)
    if np.any(real >= 0):
        raise SpectrumError(f"closed loop is not Hurwitz: {listed}", eig)
    if not _check_gap(real):
        raise SpectrumError(f"closed-loop eigenvalues are not distinct: {listed}", eig)
    K.setflags(write=False)
    return K


def _normalize_signs(V):
    V = V.copy()
    for j in range(V.shape[1]):
        col = V[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12 * np.max(np.abs(col)))
        if col[nz[0]] < 0:
            V[:, j] = -col
    return V


def diagonalize(plant: ContinuousPlant, K_c) -> Diagonalization:
    """Eigenvector transform of ``A + B K_c``.

    Columns of ``T`` have unit Euclidean length, are ordered by ascending
    eigenvalue and have their first nonzero component positive, so ``T`` is
    a deterministic function of the plant and gain.
    """
    Acl = plant.A + plant.B @ np.asarray(K_c, dtype=float)
    D = np.sort(np.linalg.eigvals(Acl).real)
    n = plant.n
    # real null vector of (Acl - d I) per eigenvalue; avoids the arbitrary
    # complex phase eig() may attach when roundoff leaves tiny imaginary parts
    T = np.column_stack([np.linalg.svd(Acl - d * np.eye(n))[2][-1] for d in D])
    T = _normalize_signs(T)
    cond_T = float(np.linalg.cond(T))
    if not np.isfinite(cond_T) or cond_T > T_COND_MAX:
        raise DegenerateEigenvectorError(f"eigenvector matrix is near singular (cond = {cond_T:.3g})")
    T_inv = np.linalg.solve(T, np.eye(n))
    resid = np.max(np.abs(T_inv @ Acl @ T - np.diag(D)))
    if resid > 1e-8:
        raise DegenerateEigenvectorError(f"diagonalization residual too large ({resid:.3g})")
    return Diagonalization(K_c=np.asarray(K_c, dtype=float), T=T, T_inv=T_inv, D=D, cond_T=cond_T)
