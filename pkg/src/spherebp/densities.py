"""Closed-form Jacobian weights of every change of variables.

All functions broadcast over leading batch dimensions of their parameter
arrays. Powers follow numpy semantics with ``0**0 == 1``; a factor with a
negative exponent at a vanishing base evaluates to ``inf``.
"""
from __future__ import annotations

import numpy as np

from .errors import InvalidInputError
from .geometry import (
    AnchoredParam,
    CircumscribedParam,
    PivotedCircleParam,
    SphereOnSphereParam,
    scaled_volume,
)
from .measures import symmetric_prefactor  # noqa: F401  (re-exported)
from .theorems import TheoremConfig, TheoremId


def _coords(u, frame) -> np.ndarray:
    """Coordinates of the rows of ``u`` (..., T, d) in the (possibly batched) frame."""
    return np.asarray(u, dtype=float) @ np.asarray(frame, dtype=float)


def _vec_coords(v, frame) -> np.ndarray:
    """Coordinates of vectors ``v`` (..., d) in the frame."""
    return (np.asarray(v, dtype=float)[..., None, :] @ np.asarray(frame, dtype=float))[..., 0, :]


def density_linear_bp(u, n: int) -> np.ndarray:
    """``[k! Vol_k(0, u)]^(n-k)`` for k points ``u``."""
    u = np.asarray(u, dtype=float)
    k = u.shape[-2]
    if k > n:
        raise InvalidInputError("k must not exceed n")
    vol = scaled_volume(u, pivot=np.zeros(u.shape[-1]))
    return vol ** (n - k)


def density_affine_bp(u, n: int) -> np.ndarray:
    """``[k! Vol_k(u)]^(n-k)`` for k+1 points ``u``."""
    u = np.asarray(u, dtype=float)
    k = u.shape[-2] - 1
    if k > n:
        raise InvalidInputError("k must not exceed n")
    return scaled_volume(u) ** (n - k)


def density_circumscribed(p: CircumscribedParam, n: int) -> np.ndarray:
    k = p.k
    r = np.asarray(p.r, dtype=float)
    vol = scaled_volume(_coords(p.u, p.L))
    return r ** (n * k - 1) * vol ** (n - k + 1)


def density_top(r, u, n: int) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape[-2] != n + 1:
        raise InvalidInputError(f"need n + 1 = {n + 1} points on S^{n - 1}")
    r = np.asarray(r, dtype=float)
    return r ** (n * n - 1) * scaled_volume(u)


def density_pivoted(p: PivotedCircleParam, n: int) -> np.ndarray:
    """Weight for spheres through a fixed (q-1)-circle of radius r0.

    With q = 0, r0 = 0 this is ``r^(mn-1) [m! Vol_m(-z, u)]^(n-m+1)``.
    """
    m, q, r0 = p.m, p.q, p.r0
    if m > n - q:
        raise InvalidInputError("m must not exceed n - q")
    r = np.asarray(p.r, dtype=float)
    if np.any(r < r0 * (1 - 1e-12)):
        raise InvalidInputError("radius below the fixed circle radius r0")
    rstar = p.rstar
    ratio = np.divide(rstar, r, out=np.ones_like(rstar), where=r > 0)
    apex = -ratio[..., None] * _vec_coords(p.z, p.L)
    vol = scaled_volume(_coords(p.u, p.L), pivot=apex)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        if r0 == 0:
            radial = r ** (m * n - 1)
        else:
            radial = r ** (m * (n - 1) + 1) * rstar ** float(m - 2)
        out = radial * vol ** (n - q - m + 1)
    # a vanishing volume wins over the m = 1 singularity at r = r0
    return np.where(vol == 0, 0.0, out)


def density_anchored(p: AnchoredParam, n: int) -> np.ndarray:
    k, m = p.k, p.F.dim
    if not 0 <= k <= m <= n:
        raise InvalidInputError("anchored density needs 0 <= k <= m <= n")
    alpha = n * (k + 1) - (m + 1)
    r = np.asarray(p.r, dtype=float)
    vol = scaled_volume(_coords(p.u, p.P))
    return r ** alpha * vol ** (m - k + 1)


def density_on_sphere(p: SphereOnSphereParam, n: int) -> np.ndarray:
    k = p.k
    if not 1 <= k <= n:
        raise InvalidInputError("on-sphere density needs 1 <= k <= n")
    vol = scaled_volume(_coords(p.u, p.sigma))
    return p.R ** (k * n - 2) * vol ** (n - k + 1)


def density_on_sphere_symmetric(t, u, k: int, n: int) -> np.ndarray:
    """Integrand weight of the rotation-reduced form; see :func:`symmetric_prefactor`."""
    t = np.asarray(t, dtype=float)
    if np.any((t < 0) | (t > 1)):
        raise InvalidInputError("t must lie in [0, 1]")
    u = np.asarray(u, dtype=float)
    if u.shape[-2:] != (k + 1, k):
        raise InvalidInputError(f"need k + 1 = {k + 1} points in R^{k}")
    vol = scaled_volume(u)
    return t ** ((k * n - 2) / 2) * (1 - t) ** ((n - k - 1) / 2) * vol ** (n - k + 1)


def density(config: TheoremConfig, param) -> np.ndarray:
    """Closed-form density of ``param`` under ``config.theorem``."""
    t, n = config.theorem, config.n
    if t is TheoremId.LINEAR_BP:
        return density_linear_bp(_coords(param.u, param.L), n)
    if t is TheoremId.AFFINE_BP:
        return density_affine_bp(_coords(param.u, param.L), n)
    if t is TheoremId.CIRCUMSCRIBED:
        return density_circumscribed(param, n)
    if t is TheoremId.TOP_DIMENSIONAL:
        return density_top(param.r, param.u, n)
    if t in (TheoremId.PIVOTED_1, TheoremId.PIVOTED_2, TheoremId.PIVOTED_CIRCLE):
        return density_pivoted(param, n)
    if t is TheoremId.ANCHORED:
        return density_anchored(param, n)
    if t is TheoremId.ON_SPHERE:
        return density_on_sphere(param, n)
    if t is TheoremId.ON_SPHERE_SYMMETRIC:
        return density_on_sphere_symmetric(param.t, param.u, config.k, n)
    raise InvalidInputError(f"no density for {t}")

