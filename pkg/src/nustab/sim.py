"""Closed-loop simulation under nonuniform sampling."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .certify import SweepTable, design_step
from .errors import PeriodOutOfCertificateError, ValidationError
from .matfun import discretize
from .model import ContinuousPlant, DesignCertificate, SamplingSchedule, SamplingWindow

SCHEDULE_KINDS = ("uniform_random", "constant", "sweep_up", "worst_case_grid")
LYAP_ATOL = 1e-10
DEFAULT_SUBSTEPS = 20


def gen_schedule(
    kind: str,
    window: SamplingWindow,
    N: int,
    seed: int = 0,
    h: Optional[float] = None,
    table: Optional[SweepTable] = None,
) -> SamplingSchedule:
    """Build ``N`` sampling periods.

    ``uniform_random`` draws i.i.d. from ``[h_min, h_max]`` with a seeded
    generator; ``constant`` repeats ``h``; ``sweep_up`` ramps linearly from
    ``h_min`` to ``h_max``; ``worst_case_grid`` repeats the period of
    ``table`` inside the window with the largest ``sigma_bar``.
    """
    if N < 1:
        raise ValidationError("N must be at least 1")
    if kind == "uniform_random":
        rng = np.random.default_rng(seed)
        periods = rng.uniform(window.h_min, window.h_max, size=N)
    elif kind == "constant":
        if h is None or not h > 0:
            raise ValidationError("constant schedule needs a positive period h")
        periods = np.full(N, float(h))
    elif kind == "sweep_up":
        periods = np.linspace(window.h_min, window.h_max, N)
    elif kind == "worst_case_grid":
        if table is None:
            raise ValidationError("worst_case_grid needs a sweep table")
        rows = [
            r for r in table.rows
            if window.h_min <= r.h <= window.h_max and np.isfinite(r.sigma_bar)
        ]
        if not rows:
            raise ValidationError("sweep table has no usable rows inside the window")
        worst = max(rows, key=lambda r: r.sigma_bar)
        periods = np.full(N, worst.h)
    else:
        raise ValidationError(f"unknown schedule kind {kind!r}; expected one of {SCHEDULE_KINDS}")
    return SamplingSchedule(tuple(periods.tolist()))


def step_closed_loop(plant: ContinuousPlant, K_k, x_k, h_k: float) -> np.ndarray:
    """``x_{k+1} = (F(h_k) + G(h_k) K_k) x_k``."""
    maps = discretize(plant, h_k)
    x_k = np.asarray(x_k, dtype=float)
    return maps.F @ x_k + maps.G @ (np.asarray(K_k) @ x_k)


@dataclass(frozen=True)
class Trajectory:
    """Sampled states ``x[k]`` at instants ``t[k]`` (``k = 0..N``), held inputs
    ``u[k]`` and periods ``h[k]`` (``k = 0..N-1``), optional intersample
    states ``inter_x[k, j]`` at ``t[k] + (j+1)/substeps * h[k]``, and the
    transformed norm ``lyap[k] = |T_inv x[k]|_2``.
    """

    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    h: np.ndarray
    lyap: np.ndarray
    sigma: np.ndarray
    inter_t: np.ndarray
    inter_x: np.ndarray
    T_inv: np.ndarray

    @property
    def substeps(self) -> int:
        return self.inter_x.shape[1]

    def to_csv(self) -> str:
        n = self.x.shape[1]
        m = self.u.shape[1]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["t"] + [f"x_{i}" for i in range(1, n + 1)] + [f"u_{i}" for i in range(1, m + 1)]
            + ["lyap", "is_sample"]
        )

        def fmt(values):
            return [format(float(v), ".12g") for v in values]

        N = self.h.size
        for k in range(N):
            writer.writerow(fmt([self.t[k]]) + fmt(self.x[k]) + fmt(self.u[k]) + fmt([self.lyap[k]]) + ["1"])
            # the last substep coincides with the next sample row
            for j in range(self.substeps - 1):
                xi = self.inter_x[k, j]
                writer.writerow(
                    fmt([self.inter_t[k, j]]) + fmt(xi) + fmt(self.u[k])
                    + fmt([np.linalg.norm(self.T_inv @ xi)]) + ["0"]
                )
        writer.writerow(fmt([self.t[N]]) + fmt(self.x[N]) + [""] * m + fmt([self.lyap[N]]) + ["1"])
        return buf.getvalue()


def simulate(
    plant: ContinuousPlant,
    cert: DesignCertificate,
    schedule: SamplingSchedule,
    x0,
    substeps: int = DEFAULT_SUBSTEPS,
) -> Trajectory:
    """Run the sampled-data loop with ``u_k = K(h_k) x_k`` held over each period.

    Gains come from :func:`nustab.certify.design_step`, cached per exact
    period value. Intersample states use the exact partial-period
    discretization, so the last substep reproduces the next sample.
    """
    if substeps < 0:
        raise ValidationError("substeps must be nonnegative")
    periods = np.asarray(schedule.periods)
    if np.any(periods >= cert.h_star):
        bad = float(periods[periods >= cert.h_star][0])
        raise PeriodOutOfCertificateError(
            f"schedule period {bad:g} is outside the certified interval (0, {cert.h_star:g})"
        )
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (plant.n,):
        raise ValidationError(f"x0 must have {plant.n} entries")

    N = periods.size
    t = schedule.instants
    x = np.empty((N + 1, plant.n))
    u = np.empty((N, plant.m))
    sigma = np.empty(N)
    inter_t = np.empty((N, substeps))
    inter_x = np.empty((N, substeps, plant.n))
    x[0] = x0
    cache = {}
    for k, h in enumerate(periods):
        step = cache.get(h)
        if step is None:
            step = cache[h] = design_step(plant, cert, h)
        u[k] = step.K @ x[k]
        sigma[k] = step.sigma_achieved
        x[k + 1] = step.F @ x[k] + step.G @ u[k]
        for j in range(substeps):
            frac = (j + 1) / substeps
            inter_t[k, j] = t[k] + frac * h
            if j == substeps - 1:
                inter_x[k, j] = x[k + 1]
            else:
                sub = discretize(plant, frac * h)
                inter_x[k, j] = sub.F @ x[k] + sub.G @ u[k]
    lyap = np.linalg.norm(x @ cert.T_inv.T, axis=1)
    return Trajectory(
        t=t, x=x, u=u, h=periods, lyap=lyap, sigma=sigma,
        inter_t=inter_t, inter_x=inter_x, T_inv=np.asarray(cert.T_inv),
    )


@dataclass(frozen=True)
class LyapunovReport:
    steps: int
    max_ratio: float
    violations: tuple
    strictly_decreasing: bool

    @property
    def ok(self) -> bool:
        return not self.violations


def lyapunov_check(traj: Trajectory, cert: Optional[DesignCertificate] = None, atol: float = LYAP_ATOL) -> LyapunovReport:
    """Check ``|x_{k+1}|_T <= sigma_k |x_k|_T + atol`` at every step.

    ``sigma_k`` is the achieved largest singular value of the transformed
    closed loop for the period used at step ``k``. ``max_ratio`` is the
    largest observed ``|x_{k+1}|_T / |x_k|_T`` (0 for a zero trajectory).
    """
    lyap = traj.lyap
    if cert is not None:
        lyap = np.linalg.norm(traj.x @ np.asarray(cert.T_inv).T, axis=1)
    if lyap.size == 0:
        raise ValidationError("empty trajectory")
    prev, nxt = lyap[:-1], lyap[1:]
    bound = traj.sigma * prev + atol
    violations = tuple(int(k) for k in np.flatnonzero(nxt > bound))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(prev > 0, nxt / prev, 0.0)
    max_ratio = float(np.max(ratios)) if ratios.size else 0.0
    decreasing = bool(np.all(nxt - prev < 1e-12))
    return LyapunovReport(steps=prev.size, max_ratio=max_ratio, violations=violations, strictly_decreasing=decreasing)
