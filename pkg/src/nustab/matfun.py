"""Matrix exponential, its integral, and exact zero-order-hold discretization."""

import numpy as np
import scipy.linalg

from .model import ContinuousPlant, DiscreteMaps


def expm(M) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a Pade approximant.

    Raises OverflowError when the result is not representable.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expm needs a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("expm needs finite entries")
    with np.errstate(over="raise", invalid="raise"):
        try:
            E = scipy.linalg.expm(M)
        except FloatingPointError as exc:
            raise OverflowError(f"matrix exponential overflowed: {exc}") from exc
    if not np.all(np.isfinite(E)):
        raise OverflowError("matrix exponential overflowed")
    return E


def _augmented(A, h):
    n = A.shape[0]
    aug = np.zeros((2 * n, 2 * n))
    aug[:n, :n] = A * h
    aug[:n, n:] = np.eye(n) * h
    return expm(aug)


def expm_integral(A, h: float) -> np.ndarray:
    """Return ``int_0^h exp(A tau) dtau``.

    Read off the top-right block of ``exp(h [[A, I], [0, 0]])``, which
    stays valid when ``A`` is singular.
    """
    A = np.asarray(A, dtype=float)
    if h < 0:
        raise ValueError(f"h must be nonnegative, got {h}")
    n = A.shape[0]
    return _augmented(A, h)[:n, n:]


def discretize(plant: ContinuousPlant, h: float) -> DiscreteMaps:
    """Exact ZOH maps ``F = exp(A h)``, ``G = (int_0^h exp(A t) dt) B``."""
    if not h > 0:
        raise ValueError(f"sampling period must be positive, got {h}")
    n = plant.n
    E = _augmented(plant.A, h)
    return DiscreteMaps(h=float(h), F=E[:n, :n], G=E[:n, n:] @ plant.B, transformed=False)


def transform_maps(maps: DiscreteMaps, cert) -> DiscreteMaps:
    """Express the maps in eigenvector coordinates: ``T_inv F T`` and ``T_inv G``."""
    if maps.transformed:
        raise ValueError("maps are already in transformed coordinates")
    return DiscreteMaps(
        h=maps.h,
        F=cert.T_inv @ maps.F @ cert.T,
        G=cert.T_inv @ maps.G,
        transformed=True,
    )
