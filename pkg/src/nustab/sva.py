"""Singular value assignment by state feedback.

For a pair ``(F, G)`` the closed loop splits as ``F + G K = P F + G M`` with
``P`` the orthogonal projector onto ``range(G)``'s complement and
``M = K + (G'G)^{-1} G' F``. The Gram matrix of the closed loop is then
``F' P F + M' G' G M``: the first term is fixed (its singular values are the
residual spectrum ``a``), the second is a sum of ``m`` rank-one PSD updates
we are free to choose. Singular values ``s`` are reachable iff
``a_j <= s_j <= a_{j+m}``; the construction below raises the spectrum of
``F' P F`` to ``s**2`` one rank-one update at a time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    InfeasibleAtPeriodError,
    InterlacingError,
    PostCheckError,
    RankError,
    ValidationError,
)

GRAM_COND_MAX = 1e12
ZERO_BRANCH_TOL = 1e-9
DEFLATION_RTOL = 1e-12
RAISE_RTOL = 1e-9
ASSIGN_RTOL = 1e-8
ZERO_TARGET_RFLOOR = 1e-6
THETA = 0.5
MU = 0.02


@dataclass(frozen=True)
class ResidualSpectrum:
    """Ascending singular values of ``P F``; the first ``m`` vanish."""

    a: np.ndarray
    m: int

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if a.ndim != 1 or not 1 <= self.m <= a.size:
            raise ValidationError("residual spectrum needs n values and 1 <= m <= n")
        if np.any(np.diff(a) < 0) or np.any(a < 0):
            raise ValidationError("residual spectrum must be nonnegative and ascending")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    @property
    def n(self) -> int:
        return self.a.size

    def upper(self, j: int) -> float:
        """``a_{j+m}`` for zero-based ``j``; infinite past the end."""
        return float(self.a[j + self.m]) if j + self.m < self.n else np.inf


@dataclass(frozen=True)
class TargetSpectrum:
    """Desired singular values with an interlacing feasibility witness.

    ``violated_index`` is the first one-based ``j`` with
    ``not a_j <= s_j <= a_{j+m}``, or ``None`` when feasible.
    """

    s: np.ndarray
    feasible: bool
    violated_index: Optional[int] = None


def projector(G) -> np.ndarray:
    """``I - G (G'G)^{-1} G'`` for a full column rank ``G``."""
    G = np.asarray(G, dtype=float)
    n, m = G.shape
    if np.linalg.cond(G.T @ G) > GRAM_COND_MAX:
        raise RankError("input map is numerically rank deficient (Gram condition > 1e12)")
    if m == n:
        return np.zeros((n, n))
    # I - Q Q' is the same operator and stays idempotent to machine precision
    Q, _ = np.linalg.qr(G)
    P = np.eye(n) - Q @ Q.T
    return 0.5 * (P + P.T)


def residual_spectrum(F, G) -> ResidualSpectrum:
    G = np.asarray(G, dtype=float)
    P = projector(G)
    a = np.sort(np.linalg.svd(P @ np.asarray(F, dtype=float), compute_uv=False))
    m = G.shape[1]
    # the projector annihilates m directions; strip roundoff from those branches
    a[:m] = 0.0
    return ResidualSpectrum(a=a, m=m)


def _feasibility_tol(a: ResidualSpectrum) -> float:
    return DEFLATION_RTOL * max(1.0, float(a.a[-1]))


def check_feasibility(a: ResidualSpectrum, s) -> TargetSpectrum:
    """Interlacing test ``a_j <= s_j <= a_{j+m}`` (equality counts as feasible)."""
    s = np.array(s, dtype=float)
    if s.shape != (a.n,):
        raise ValidationError(f"need {a.n} target values, got {s.shape}")
    if np.any(np.diff(s) < 0) or np.any(s < 0):
        raise ValidationError("targets must be nonnegative and ascending")
    s.setflags(write=False)
    tol = _feasibility_tol(a)
    for j in range(a.n):
        if s[j] < a.a[j] - tol or s[j] > a.upper(j) + tol:
            return TargetSpectrum(s=s, feasible=False, violated_index=j + 1)
    return TargetSpectrum(s=s, feasible=True)


def select_targets(a: ResidualSpectrum, gamma: float, theta: float = THETA, mu: float = MU) -> TargetSpectrum:
    """Pick targets inside the feasible band and below ``gamma``.

    ``s_j = a_j + theta * max(0, (1 - mu) * min(a_{j+m}, gamma) - a_j)``: the
    midpoint (for ``theta = 0.5``) between the floor ``a_j`` and a ceiling
    held a fraction ``mu`` below both ``a_{j+m}`` and ``gamma``. When the
    ceiling drops under the floor the target sits on the floor.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValidationError(f"gamma must lie in (0, 1], got {gamma}")
    if not (0.0 < theta <= 1.0 and 0.0 <= mu < 1.0):
        raise ValidationError("need 0 < theta <= 1 and 0 <= mu < 1")
    if a.a[-1] >= gamma:
        raise InfeasibleAtPeriodError(
            f"largest residual singular value {a.a[-1]:.6g} >= gamma = {gamma:.6g}"
        )
    ceiling = np.array([(1.0 - mu) * min(a.upper(j), gamma) for j in range(a.n)])
    s = a.a + theta * np.maximum(0.0, ceiling - a.a)
    target = check_feasibility(a, s)
    if not target.feasible or s[-1] >= gamma:
        raise InfeasibleAtPeriodError("could not place feasible targets below gamma")
    return target


def rank_one_raise(lam, mu) -> np.ndarray:
    """Solve the rank-one inverse eigenvalue problem ``eig(diag(lam) + w w') = mu``.

    Needs ascending ``lam`` and ``mu`` interlacing as
    ``lam_j <= mu_j <= lam_{j+1}``. Equal eigenvalues of ``diag(lam)`` and
    eigenvalues of ``diag(lam)`` that reappear in ``mu`` are deflated
    (``w_i = 0``; for a repeated value the lowest index carries the update).
    On the remaining strictly interlacing part

        w_i**2 = prod_j (mu_j - lam_i) / prod_{j != i} (lam_j - lam_i)

    which is positive, and ``w_i >= 0`` is taken.
    """
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    n = lam.size
    if mu.shape != (n,) or lam.ndim != 1:
        raise InterlacingError("lam and mu must be 1-d arrays of equal length")
    scale = float(max(np.max(np.abs(lam), initial=0.0), np.max(np.abs(mu), initial=0.0)))
    w = np.zeros(n)
    if scale == 0.0:
        return w
    tol = DEFLATION_RTOL * scale
    upper = np.append(lam[1:], np.inf)
    if np.any(np.diff(lam) < -tol) or np.any(mu < lam - tol) or np.any(mu > upper + tol):
        raise InterlacingError("mu does not interlace lam as lam_j <= mu_j <= lam_{j+1}")
    mu = np.clip(mu, lam, upper)

    # groups of equal lam: keep the first index, the group's other members
    # consume the mu values pinned to the same number
    idx, mus = [], []
    i = 0
    while i < n:
        k = i
        while k + 1 < n and lam[k + 1] - lam[i] <= tol:
            k += 1
        idx.append(i)
        mus.append(mu[k])
        i = k + 1

    # deflate pairs where a target coincides with an existing eigenvalue
    changed = True
    while changed:
        changed = False
        for p in range(len(idx)):
            if abs(mus[p] - lam[idx[p]]) <= tol:
                del idx[p], mus[p]
                changed = True
                break
            if p + 1 < len(idx) and abs(mus[p] - lam[idx[p + 1]]) <= tol:
                del idx[p + 1], mus[p]
                changed = True
                break

    ell = lam[idx]
    nu = np.array(mus)
    for p, i in enumerate(idx):
        others = np.arange(len(idx)) != p
        w2 = (nu[p] - ell[p]) * np.prod((nu[others] - ell[p]) / (ell[others] - ell[p]))
        w[i] = np.sqrt(max(w2, 0.0))

    achieved = np.linalg.eigvalsh(np.diag(lam) + np.outer(w, w))
    err = np.max(np.abs(achieved - np.sort(mu)))
    if err > RAISE_RTOL * scale:
        raise PostCheckError(f"rank-one update misses its target spectrum (error {err:.3g})")
    return w


def staged_spectra(lam, s, m: int) -> np.ndarray:
    """``nu[k, j] = max(lam_j, s_{j-m+k}**2)`` for ``k = 0..m`` (zero-based ``j``).

    Row 0 is ``lam`` and row ``m`` is ``s**2`` whenever ``s`` interlaces the
    residual spectrum; consecutive rows interlace one step at a time.
    """
    lam = np.asarray(lam, dtype=float)
    s2 = np.asarray(s, dtype=float) ** 2
    n = lam.size
    nu = np.empty((m + 1, n))
    for k in range(m + 1):
        for j in range(n):
            i = j - m + k
            nu[k, j] = max(lam[j], s2[i]) if i >= 0 else lam[j]
    return nu


def _inv_sqrt(S):
    e, U = np.linalg.eigh(S)
    if e[0] <= 0 or e[-1] / e[0] > GRAM_COND_MAX:
        raise RankError("input map is numerically rank deficient (Gram condition > 1e12)")
    return (U / np.sqrt(e)) @ U.T


def assign_singular_values(F, G, target: TargetSpectrum, check: bool = True) -> np.ndarray:
    """Gain ``K`` (m x n) such that ``F + G K`` has singular values ``target.s``."""
    F = np.asarray(F, dtype=float)
    G = np.asarray(G, dtype=float)
    n, m = G.shape
    if not target.feasible:
        raise InterlacingError(
            f"target spectrum is infeasible (first violation at j = {target.violated_index})"
        )
    s = np.asarray(target.s)
    PF = projector(G) @ F
    C = PF.T @ PF
    lam = np.clip(np.linalg.eigvalsh(C), 0.0, None)
    nu = staged_spectra(lam, s, m)

    N = np.zeros((m, n))
    for k in range(1, m + 1):
        cur, V = np.linalg.eigh(C)
        goal = np.maximum(nu[k], 0.0)
        # the actual spectrum carries roundoff; keep the goal interlaced with it
        upper = np.append(cur[1:], np.inf)
        goal = np.clip(goal, cur, upper)
        z = V @ rank_one_raise(cur, goal)
        N[k - 1] = z
        C = C + np.outer(z, z)

    gram = G.T @ G
    M = _inv_sqrt(gram) @ N
    K = M - np.linalg.solve(gram, G.T @ F)
    if check:
        achieved = np.sort(np.linalg.svd(F + G @ K, compute_uv=False))
        err = _relative_error(achieved, s)
        if err > ASSIGN_RTOL:
            raise PostCheckError(f"assigned singular values miss the targets (relative error {err:.3g})")
    return K


def _relative_error(achieved, s) -> float:
    """Entrywise relative error; targets below ``1e-6 * max(s)`` are measured
    against that floor instead (a zero target has no relative scale)."""
    floor = ZERO_TARGET_RFLOOR * float(np.max(s))
    denom = np.maximum(np.abs(s), floor) if floor > 0 else np.ones_like(s)
    return float(np.max(np.abs(achieved - s) / denom))


def gain_in_original_coordinates(K_hat, cert) -> np.ndarray:
    """``K_k = K_hat T_inv``."""
    return np.asarray(K_hat) @ cert.T_inv
