"""Certified maximum sampling period, residual-spectrum sweeps and the
period-indexed gain schedule."""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import sva
from .errors import (
    InfeasibleAtPeriodError,
    NoCrossingError,
    NoStabilizablePeriodError,
    PeriodOutOfCertificateError,
    PostCheckError,
    RankError,
    ValidationError,
)
from .matfun import discretize, transform_maps
from .model import ContinuousPlant, DesignCertificate

DEFAULT_GRID_POINTS = 256
DEFAULT_TOL_H = 1e-4
DEFAULT_DECAY = 10.0


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("NUSTAB_THREADS", "1")))
    except ValueError:
        return 1


def _fmt(x) -> str:
    return format(float(x), ".12g")


def transformed_maps(plant: ContinuousPlant, design, h: float):
    return transform_maps(discretize(plant, h), design)


def residual_at(plant: ContinuousPlant, design, h: float) -> sva.ResidualSpectrum:
    maps = transformed_maps(plant, design, h)
    return sva.residual_spectrum(maps.F, maps.G)


def default_h_hi(design) -> float:
    """Period after which the slowest desired mode has decayed by ``e**-10``."""
    return DEFAULT_DECAY / float(np.min(np.abs(design.D)))


@dataclass(frozen=True)
class SweepRow:
    h: float
    a: Optional[np.ndarray]
    sigma_bar: float
    targets: Optional[np.ndarray] = None
    error: Optional[str] = None


@dataclass(frozen=True)
class SweepTable:
    """Residual spectrum over a grid of periods.

    Branches ``m+1..n`` (one-based) are the nonzero ones worth plotting.
    """

    n: int
    m: int
    rows: tuple = field(default_factory=tuple)

    @property
    def h(self) -> np.ndarray:
        return np.array([r.h for r in self.rows])

    @property
    def sigma_bar(self) -> np.ndarray:
        return np.array([r.sigma_bar for r in self.rows])

    @property
    def nonzero_branches(self) -> range:
        return range(self.m + 1, self.n + 1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = (
            ["h"]
            + [f"a_{j}" for j in range(1, self.n + 1)]
            + ["sigma_bar"]
            + [f"s_{j}" for j in range(1, self.n + 1)]
        )
        writer.writerow(header)
        for r in self.rows:
            a = [_fmt(v) for v in r.a] if r.a is not None else [""] * self.n
            sb = _fmt(r.sigma_bar) if np.isfinite(r.sigma_bar) else ""
            s = [_fmt(v) for v in r.targets] if r.targets is not None else [""] * self.n
            writer.writerow([_fmt(r.h)] + a + [sb] + s)
        return buf.getvalue()


def _sweep_row(plant, design, h, gamma, theta, mu) -> SweepRow:
    try:
        a = residual_at(plant, design, h)
    except RankError as exc:
        return SweepRow(h=h, a=None, sigma_bar=np.nan, error=str(exc))
    targets = None
    if gamma is not None:
        try:
            targets = sva.select_targets(a, gamma, theta, mu).s
        except InfeasibleAtPeriodError:
            pass
    return SweepRow(h=h, a=a.a, sigma_bar=float(a.a[-1]), targets=targets)


def sweep(
    plant: ContinuousPlant,
    design,
    h_lo: float,
    h_hi: float,
    steps: int,
    gamma: Optional[float] = None,
    theta: float = sva.THETA,
    mu: float = sva.MU,
    workers: Optional[int] = None,
) -> SweepTable:
    """Residual spectrum on ``steps`` evenly spaced periods in ``[h_lo, h_hi]``.

    Rank failures are recorded per row and do not stop the sweep. When
    ``gamma`` is given, each row also carries the targets chosen by
    :func:`nustab.sva.select_targets` (absent where none exist).
    """
    if not 0.0 < h_lo < h_hi:
        raise ValidationError(f"need 0 < h_lo < h_hi, got {h_lo}, {h_hi}")
    if steps < 2:
        raise ValidationError("steps must be at least 2")
    grid = np.linspace(h_lo, h_hi, steps)
    workers = workers or _workers()

    def row(h):
        return _sweep_row(plant, design, float(h), gamma, theta, mu)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = tuple(pool.map(row, grid))
    else:
        rows = tuple(map(row, grid))
    return SweepTable(n=plant.n, m=plant.m, rows=rows)


def _below(plant, design, h, gamma) -> bool:
    try:
        return residual_at(plant, design, h).a[-1] < gamma
    except RankError:
        return False


def find_h_star(
    plant: ContinuousPlant,
    design,
    gamma: float = 1.0,
    tol_h: float = DEFAULT_TOL_H,
    h_hi: Optional[float] = None,
    grid_points: int = DEFAULT_GRID_POINTS,
    theta: float = sva.THETA,
    mu: float = sva.MU,
    allow_censored: bool = True,
) -> DesignCertificate:
    """Largest probed period below which ``sigma_bar < gamma`` at every probe.

    Probes ``tol_h`` first, then ``grid_points`` evenly spaced periods on
    ``(0, h_hi]``; the first failing grid point is bracketed by bisection
    down to ``tol_h``. Without any failing probe the certificate is
    right-censored at ``h_hi`` (or :class:`NoCrossingError` is raised when
    ``allow_censored`` is false).
    """
    if not 0.0 < gamma <= 1.0:
        raise ValidationError(f"gamma must lie in (0, 1], got {gamma}")
    if h_hi is None:
        h_hi = default_h_hi(design)
    if not _below(plant, design, tol_h, gamma):
        raise NoStabilizablePeriodError(
            f"sigma_bar >= gamma = {gamma} already at the smallest probe h = {tol_h:g}"
        )
    grid = h_hi * np.arange(1, grid_points + 1) / grid_points
    grid = grid[grid > tol_h]

    h_ok, h_bad = tol_h, None
    for h in grid:
        if _below(plant, design, float(h), gamma):
            h_ok = float(h)
        else:
            h_bad = float(h)
            break

    censored = h_bad is None
    if censored:
        if not allow_censored:
            raise NoCrossingError(f"no crossing of gamma = {gamma} below h_hi = {h_hi:g}", h_hi)
    else:
        while h_bad - h_ok > tol_h:
            mid = 0.5 * (h_ok + h_bad)
            if _below(plant, design, mid, gamma):
                h_ok = mid
            else:
                h_bad = mid

    return DesignCertificate(
        T=design.T,
        T_inv=design.T_inv,
        K_c=design.K_c,
        D=design.D,
        h_star=float(h_ok),
        gamma=float(gamma),
        cond_T=float(design.cond_T),
        theta=float(theta),
        mu=float(mu),
        tol_h=float(tol_h),
        grid_points=int(grid_points),
        h_hi=float(h_hi),
        right_censored=censored,
    )


@dataclass(frozen=True)
class GainStep:
    """Everything computed for one period: gains in both coordinates,
    targets and the achieved largest singular value."""

    h: float
    K: np.ndarray
    K_hat: np.ndarray
    targets: np.ndarray
    sigma_achieved: float
    F: np.ndarray
    G: np.ndarray


def design_step(plant: ContinuousPlant, cert: DesignCertificate, h: float) -> GainStep:
    h = float(h)
    if not 0.0 < h < cert.h_star:
        raise PeriodOutOfCertificateError(
            f"period h = {h:g} is outside the certified interval (0, {cert.h_star:g})"
        )
    raw = discretize(plant, h)
    maps = transform_maps(raw, cert)
    a = sva.residual_spectrum(maps.F, maps.G)
    target = sva.select_targets(a, cert.gamma, cert.theta, cert.mu)
    K_hat = sva.assign_singular_values(maps.F, maps.G, target)
    sigma = float(np.linalg.norm(maps.F + maps.G @ K_hat, 2))
    if not sigma < cert.gamma:
        raise PostCheckError(f"closed-loop sigma_bar {sigma:.6g} is not below gamma at h = {h:g}")
    return GainStep(
        h=h,
        K=sva.gain_in_original_coordinates(K_hat, cert),
        K_hat=K_hat,
        targets=target.s,
        sigma_achieved=sigma,
        F=raw.F,
        G=raw.G,
    )


def gain_at(plant: ContinuousPlant, cert: DesignCertificate, h: float) -> np.ndarray:
    """Feedback gain ``K_k`` for a sampling period ``h`` in ``(0, h_star)``."""
    return design_step(plant, cert, h).K


@dataclass(frozen=True)
class VerificationReport:
    probes: int
    step: float
    violations: tuple

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_certificate(plant: ContinuousPlant, cert: DesignCertificate, refinement: int = 8) -> VerificationReport:
    """Re-probe ``sigma_bar`` on a grid ``refinement`` times finer than the
    certificate's, up to and including ``h_star``.

    Each violation is a pair ``(h, sigma_bar)`` with ``sigma_bar >= gamma``
    (``nan`` when the input map lost rank).
    """
    if refinement < 1:
        raise ValidationError("refinement must be at least 1")
    h_hi = cert.h_hi if cert.h_hi > 0 else default_h_hi(cert)
    step = h_hi / (cert.grid_points * refinement)
    count = int(np.floor(cert.h_star / step))
    probes = [step * i for i in range(1, count + 1) if step * i < cert.h_star]
    probes.append(cert.h_star)
    probes = [h for h in probes if h > 0]

    violations = []
    for h in probes:
        try:
            sb = float(residual_at(plant, cert, h).a[-1])
        except RankError:
            sb = float("nan")
        if not sb < cert.gamma:
            violations.append((h, sb))
    return VerificationReport(probes=len(probes), step=step, violations=tuple(violations))
