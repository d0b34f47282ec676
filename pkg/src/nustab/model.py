"""Domain types, configuration ingestion and validation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    DimensionError,
    ParseError,
    RankError,
    StabilizabilityError,
    ValidationError,
)

TOL_STAB = 1e-9
RANK_RTOL = 1e-12

CONFIG_KEYS = ("A", "B", "h_min", "h_max", "gamma", "poles", "K_c")


def _frozen(x, ndim=2) -> np.ndarray:
    arr = np.array(x, dtype=float)
    if arr.ndim != ndim:
        raise DimensionError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


def numerical_rank(X) -> int:
    """Count singular values above ``max(shape) * sigma_max * 1e-12``."""
    X = np.atleast_2d(np.asarray(X))
    if X.size == 0:
        return 0
    s = np.linalg.svd(X, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > max(X.shape) * s[0] * RANK_RTOL))


@dataclass(frozen=True)
class ContinuousPlant:
    """Continuous LTI plant ``x' = A x + B u``.

    Construction checks dimensions, ``rank(B) = m`` and PBH
    stabilizability; the arrays are read-only afterwards.
    """

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        try:
            A = _frozen(self.A)
            B = _frozen(self.B)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise DimensionError(f"matrices must be rectangular numeric arrays: {exc}") from exc
        n = A.shape[0]
        if A.shape != (n, n) or n < 1:
            raise DimensionError(f"A must be square and non-empty, got {A.shape}")
        if B.shape[0] != n:
            raise DimensionError(f"B must have {n} rows, got {B.shape[0]}")
        m = B.shape[1]
        if not 1 <= m <= n:
            raise DimensionError(f"need 1 <= m <= n, got m={m}, n={n}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
            raise ValidationError("plant matrices must be finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        if numerical_rank(B) != m:
            raise RankError(f"rank(B) = {numerical_rank(B)} < m = {m}")
        if not pbh_stabilizable(self):
            raise StabilizabilityError(
                "(A, B) is not stabilizable: PBH rank test fails at an eigenvalue "
                "with nonnegative real part"
            )

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


def pbh_stabilizable(plant, tol_stab: float = TOL_STAB) -> bool:
    """PBH test: ``rank([lam I - A, B]) = n`` at every eigenvalue with
    ``Re(lam) >= -tol_stab``.

    Accepts anything with ``A`` and ``B`` attributes, so it can be used
    before a :class:`ContinuousPlant` has been validated.
    """
    A = np.asarray(plant.A, dtype=float)
    B = np.asarray(plant.B, dtype=float)
    n = A.shape[0]
    for lam in np.linalg.eigvals(A):
        if lam.real < -tol_stab:
            continue
        pencil = np.hstack([lam * np.eye(n) - A, B.astype(complex)])
        if numerical_rank(pencil) < n:
            return False
    return True


@dataclass(frozen=True)
class SamplingWindow:
    h_min: float
    h_max: float

    def __post_init__(self):
        if not (0.0 < self.h_min <= self.h_max) or not np.isfinite(self.h_max):
            raise ValidationError(f"need 0 < h_min <= h_max, got [{self.h_min}, {self.h_max}]")


@dataclass(frozen=True)
class SamplingSchedule:
    """Finite sequence of sampling periods; instants start at ``t_0 = 0``."""

    periods: tuple

    def __post_init__(self):
        periods = tuple(float(h) for h in self.periods)
        if not all(h > 0.0 and np.isfinite(h) for h in periods):
            raise ValidationError("every sampling period must be positive and finite")
        object.__setattr__(self, "periods", periods)

    def __len__(self):
        return len(self.periods)

    @property
    def instants(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.periods)])


@dataclass(frozen=True)
class DiscreteMaps:
    h: float
    F: np.ndarray
    G: np.ndarray
    transformed: bool = False


@dataclass(frozen=True)
class Diagonalization:
    """Continuous gain and the eigenvector transform of ``A + B K_c``."""

    K_c: np.ndarray
    T: np.ndarray
    T_inv: np.ndarray
    D: np.ndarray
    cond_T: float


@dataclass(frozen=True)
class DesignCertificate:
    """Transform, gain and the certified period bound ``h_star``.

    ``h_star`` is backed by a grid of probes (``grid_points`` over
    ``(0, h_hi]`` refined by bisection to ``tol_h``), not by a proof over
    the continuum; see :func:`nustab.certify.verify_certificate`.
    """

    T: np.ndarray
    T_inv: np.ndarray
    K_c: np.ndarray
    D: np.ndarray
    h_star: float
    gamma: float
    cond_T: float
    theta: float = 0.5
    mu: float = 0.02
    tol_h: float = 1e-4
    grid_points: int = 256
    h_hi: float = 0.0
    right_censored: bool = False

    def __post_init__(self):
        for name in ("T", "T_inv", "K_c"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "D", _frozen(self.D, ndim=1))
        n = self.T.shape[0]
        if self.T.shape != (n, n) or self.T_inv.shape != (n, n) or self.D.shape != (n,):
            raise DimensionError("certificate transform shapes are inconsistent")
        if np.max(np.abs(self.T @ self.T_inv - np.eye(n))) > 1e-10:
            raise ValidationError("T_inv is not the inverse of T")
        if np.any(self.D >= 0.0) or np.any(np.diff(self.D) <= 0.0):
            raise ValidationError("D must be strictly negative and strictly ascending")
        if not self.h_star > 0.0:
            raise ValidationError(f"h_star must be positive, got {self.h_star}")
        if not 0.0 < self.gamma <= 1.0:
            raise ValidationError(f"gamma must lie in (0, 1], got {self.gamma}")

    def check_plant(self, plant: ContinuousPlant, atol: float = 1e-8) -> None:
        """Raise unless ``T_inv (A + B K_c) T`` is ``diag(D)``."""
        if self.T.shape[0] != plant.n or self.K_c.shape != (plant.m, plant.n):
            raise DimensionError("certificate does not match plant dimensions")
        Dm = self.T_inv @ (plant.A + plant.B @ self.K_c) @ self.T
        if np.max(np.abs(Dm - np.diag(self.D))) > atol:
            raise ValidationError("certificate transform does not diagonalize A + B K_c")

    def to_dict(self) -> dict:
        return {
            "T": self.T.tolist(),
            "T_inv": self.T_inv.tolist(),
            "K_c": self.K_c.tolist(),
            "D": self.D.tolist(),
            "h_star": self.h_star,
            "gamma": self.gamma,
            "cond_T": self.cond_T,
            "theta": self.theta,
            "mu": self.mu,
            "tol_h": self.tol_h,
            "grid_points": self.grid_points,
            "h_hi": self.h_hi,
            "right_censored": self.right_censored,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DesignCertificate":
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known - {"manifest"}
        if extra:
            raise ParseError(f"unknown certificate keys: {sorted(extra)}")
        try:
            return cls(**{k: v for k, v in data.items() if k in known})
        except TypeError as exc:
            raise ParseError(f"malformed certificate: {exc}") from exc


@dataclass(frozen=True)
class PlantConfig:
    """Parsed configuration file: the plant plus optional design inputs."""

    plant: ContinuousPlant
    h_min: Optional[float] = None
    h_max: Optional[float] = None
    gamma: Optional[float] = None
    poles: Optional[tuple] = None
    K_c: Optional[np.ndarray] = field(default=None)


def _matrix(value, name):
    if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
        raise ParseError(f"{name!r} must be a non-empty array of rows")
    width = len(value[0])
    if any(len(r) != width for r in value):
        raise DimensionError(f"{name!r} rows have unequal lengths")
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for r in value for v in r):
        raise ParseError(f"{name!r} entries must be numbers")
    return np.array(value, dtype=float)


def _scalar(value, name):
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ParseError(f"{name!r} must be a number")
    return float(value)


def parse_config(config_text: str) -> PlantConfig:
    """Parse a JSON plant configuration.

    Required keys are ``A`` and ``B``; ``h_min``, ``h_max``, ``gamma``,
    ``poles`` and ``K_c`` are optional. Unknown keys are rejected.
    """
    try:
        data = json.loads(config_text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ParseError("config must be a JSON object")
    unknown = set(data) - set(CONFIG_KEYS)
    if unknown:
        raise ParseError(f"unknown config keys: {sorted(unknown)}")
    for key in ("A", "B"):
        if key not in data:
            raise ParseError(f"missing required key {key!r}")
    plant = ContinuousPlant(_matrix(data["A"], "A"), _matrix(data["B"], "B"))
    opts = {}
    for key in ("h_min", "h_max", "gamma"):
        if key in data:
            opts[key] = _scalar(data[key], key)
    if "poles" in data:
        poles = data["poles"]
        if not isinstance(poles, list):
            raise ParseError("'poles' must be an array of numbers")
        opts["poles"] = tuple(_scalar(p, "poles") for p in poles)
        if len(opts["poles"]) != plant.n:
            raise DimensionError(f"'poles' needs {plant.n} entries, got {len(poles)}")
    if "K_c" in data:
        K = _matrix(data["K_c"], "K_c")
        if K.shape != (plant.m, plant.n):
            raise DimensionError(f"'K_c' must be {plant.m}x{plant.n}, got {K.shape}")
        opts["K_c"] = K
    return PlantConfig(plant=plant, **opts)


def load_plant(config_text: str) -> ContinuousPlant:
    return parse_config(config_text).plant


def serialize_plant(plant: ContinuousPlant) -> str:
    # float repr is the shortest string that round-trips bit-exactly
    return json.dumps({"A": plant.A.tolist(), "B": plant.B.tolist()})
