"""Measure constants and samplers for every factor of the parameter spaces.

Samplers draw from probability measures. The total masses of the compact
factors (spheres, Grassmannians, balls) and the reciprocal proposal densities
of the unbounded factors are multiplied into an importance weight, so that
``E[weight * g(param)]`` is the integral of ``g`` against the parameter-space
measure of the formula.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .geometry import (
    AffineParam,
    AnchoredParam,
    CircumscribedParam,
    LinearParam,
    PivotedCircleParam,
    SphereOnSphereParam,
    SymmetricSphereParam,
    gram_schmidt,
    orthocomplement,
)
from .theorems import TheoremConfig, TheoremId


def sphere_surface_area(n: int) -> float:
    """Total measure of S^{n-1}: ``2 pi^{n/2} / Gamma(n/2)``."""
    if n < 1:
        raise InvalidInputError("sphere_surface_area needs n >= 1")
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


def ball_volume(d: int, radius: float = 1.0) -> float:
    if d < 0:
        raise InvalidInputError("ball dimension must be >= 0")
    if d == 0:
        return 1.0
    return sphere_surface_area(d) / d * radius ** d


def grassmannian_measure(k: int, n: int) -> float:
    """``sigma_n ... sigma_{n-k+1} / (sigma_1 ... sigma_k)``.

    Evaluated with ``min(k, n - k)`` factors, so G(k, n) and G(n - k, n)
    give bit-identical values.
    """
    if n < 0 or not 0 <= k <= n:
        raise InvalidInputError(f"G({k}, {n}) needs 0 <= k <= n")
    j = min(k, n - k)
    value = 1.0
    for i in range(1, j + 1):
        value *= sphere_surface_area(n - i + 1) / sphere_surface_area(i)
    return value


def symmetric_prefactor(k: int, n: int) -> float:
    """``(sigma_{n+1} / 2) |G(k, n)|``, the constant of the rotation-reduced sphere formula."""
    return sphere_surface_area(n + 1) / 2 * grassmannian_measure(k, n)


@dataclass(frozen=True)
class RandomStream:
    """Reproducible substream ``(seed, stream_id)`` of a PCG64 family."""

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if self.stream_id < 0:
            raise InvalidInputError("stream_id must be non-negative")

    def generator(self, *subkeys: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed % 2 ** 64, spawn_key=(self.stream_id, *subkeys))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, stream_id: int) -> "RandomStream":
        return RandomStream(self.seed, stream_id)


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RandomStream):
        return rng.generator()
    return np.random.default_rng(rng)


def _shape(size) -> tuple:
    if size is None:
        return ()
    if isinstance(size, (int, np.integer)):
        return (int(size),)
    return tuple(size)


def sample_unit_sphere(dim: int, rng, size=None) -> np.ndarray:
    """Uniform points on S^{dim-1}, shape ``size + (dim,)``."""
    if dim < 1:
        raise InvalidInputError("sphere ambient dimension must be >= 1")
    g = as_generator(rng).standard_normal(_shape(size) + (dim,))
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def sample_frame(k: int, n: int, rng, size=None, complete: bool = False) -> np.ndarray:
    """Frame whose span is uniform on G(k, n), shape ``size + (n, k)``.

    With ``complete=True`` a full orthonormal basis ``size + (n, n)`` is
    returned whose first ``k`` columns are that frame.
    """
    if not 0 <= k <= n:
        raise InvalidInputError(f"frame G({k}, {n}) needs 0 <= k <= n")
    cols = n if complete else k
    g = as_generator(rng).standard_normal(_shape(size) + (n, cols))
    return gram_schmidt(g)


def sample_ball(dim: int, rng, size=None) -> np.ndarray:
    """Uniform points in the closed unit ball of R^dim."""
    gen = as_generator(rng)
    shape = _shape(size)
    if dim == 0:
        return np.zeros(shape + (0,))
    direction = sample_unit_sphere(dim, gen, shape)
    radius = gen.random(shape) ** (1.0 / dim)
    return radius[..., None] * direction


def _sphere_points(basis: np.ndarray, count: int, rng, shape) -> np.ndarray:
    """``count`` uniform points on the unit sphere of span(basis) (batched (..., n, d))."""
    d = basis.shape[-1]
    coords = sample_unit_sphere(d, rng, shape + (count,))
    return coords @ np.swapaxes(basis, -1, -2)



def _householder_tangent(a: np.ndarray) -> np.ndarray:
    """Orthonormal bases (..., d, d-1) of a-perp for unit vectors a (..., d).

    Columns 0..d-2 of the reflection swapping ``a`` and ``e_{d-1}``.
    """
    d = a.shape[-1]
    e = np.zeros(d)
    e[-1] = 1.0
    w = a - e
    ww = (w * w).sum(-1, keepdims=True)
    safe = ww[..., 0] > 1e-24
    scale = np.where(ww > 1e-24, 2.0 / np.where(ww > 1e-24, ww, 1.0), 0.0)
    H = np.eye(d) - scale[..., None] * w[..., :, None] * w[..., None, :]
    H = np.where(safe[..., None, None], H, np.eye(d))
    return H[..., :, : d - 1]


RADIAL_LAWS = ("half-normal", "gamma", "uniform")
MODES = ("conditional", "independent")
CLUSTER_FLOOR = 1e-6


@dataclass(frozen=True)
class ProposalSpec:
    """Importance proposals for the parameter spaces.

    ``mode="independent"`` draws every factor independently: radius from
    ``radial_law`` (half-normal(radial_scale), gamma(gamma_shape, radial_scale)
    or uniform(0, rmax)), centres isotropic normal(center_scale), sphere
    points uniformly.

    ``mode="conditional"`` (the default) targets the heavy tail of large
    circumradii with clustered sphere points:

    * the sphere points are a defensive mixture (``1 - cluster_weight``)
      uniform + (``cluster_weight``) clustered around an anchor, with
      tangent-plane spread ``rho`` with ``rho**cluster_power`` uniform on
      ``[(1e-6 * cluster_scale)**cluster_power, cluster_scale**cluster_power]``;
    * given the points, ``r**2 * S / (2 radial_scale**2)`` is Gamma((a+1)/2)
      where ``S`` is the quadratic decay rate of a unit Gaussian integrand and
      ``a`` the radial power, mixed with ``defensive_weight`` of ``radial_law``;
    * free centres are normal around ``-r * mean(u)`` with variance
      ``center_scale**2 / T``.

    For radii constrained to ``r >= r0`` the radial proposal is applied to
    ``sqrt(r^2 - r0^2)`` (``offset_mode="star"``) or to ``r - r0``
    (``offset_mode="shift"``).
    """

    mode: str = "conditional"
    radial_law: str = "half-normal"
    radial_scale: float = 1.0
    gamma_shape: float = 2.0
    rmax: float = 1.0
    center_scale: float = 1.0
    offset_mode: str = "star"
    cluster_weight: float = 0.5
    cluster_power: float = 0.5
    cluster_scale: float = 3.0
    defensive_weight: float = 0.2

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidInputError(f"mode must be one of {MODES}")
        if self.radial_law not in RADIAL_LAWS:
            raise InvalidInputError(f"radial_law must be one of {RADIAL_LAWS}")
        if min(self.radial_scale, self.gamma_shape, self.rmax, self.center_scale,
               self.cluster_power, self.cluster_scale) <= 0:
            raise InvalidInputError("proposal scales must be strictly positive")
        if self.offset_mode not in ("star", "shift"):
            raise InvalidInputError("offset_mode must be 'star' or 'shift'")
        if not (0 <= self.cluster_weight < 1 and 0 < self.defensive_weight <= 1):
            raise InvalidInputError("mixture weights out of range")

    # -- radial laws -------------------------------------------------------

    def radius_logpdf(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        s = self.radial_scale
        with np.errstate(divide="ignore"):
            if self.radial_law == "half-normal":
                return math.log(math.sqrt(2.0 / math.pi) / s) - 0.5 * (r / s) ** 2
            if self.radial_law == "gamma":
                a = self.gamma_shape
                return (a - 1) * np.log(r) - r / s - math.lgamma(a) - a * math.log(s)
            return np.where(r <= self.rmax, -math.log(self.rmax), -np.inf)

    def sample_radius(self, rng, shape) -> tuple[np.ndarray, np.ndarray]:
        """Radii >= 0 from ``radial_law`` and their proposal density."""
        gen = as_generator(rng)
        s = self.radial_scale
        if self.radial_law == "half-normal":
            r = np.abs(gen.standard_normal(shape)) * s
        elif self.radial_law == "gamma":
            r = gen.gamma(self.gamma_shape, s, shape)
        else:
            r = gen.random(shape) * self.rmax
        return r, np.exp(self.radius_logpdf(r))

    def sample_radius_above(self, r0: float, rng, shape) -> tuple[np.ndarray, np.ndarray]:
        """Radii >= r0 and their proposal density."""
        s, pdf_s = self.sample_radius(rng, shape)
        return _lift_radius(s, np.log(pdf_s), r0, self.offset_mode, return_pdf=True)

    def sample_center(self, dim: int, rng, shape, mean=None, scale=None):
        """Isotropic normal points in R^dim and their joint density."""
        s = self.center_scale if scale is None else scale
        c = as_generator(rng).standard_normal(shape + (dim,)) * s
        log_pdf = -0.5 * (c * c).sum(-1) / (s * s) - dim * math.log(s * math.sqrt(2 * math.pi))
        if mean is not None:
            c = c + mean
        return c, np.exp(log_pdf)


def _lift_radius(s, log_pdf_s, r0, offset_mode, return_pdf=False):
    """Map a proposal draw ``s >= 0`` to a radius ``r >= r0``, adjusting the density."""
    if r0 == 0.0:
        r, log_pdf = s, log_pdf_s
    elif offset_mode == "shift":
        r, log_pdf = r0 + s, log_pdf_s
    else:
        r = np.sqrt(r0 * r0 + s * s)
        # density of r is pdf(s) * ds/dr = pdf(s) * r / s
        with np.errstate(divide="ignore"):
            log_pdf = log_pdf_s + np.log(r) - np.log(s)
    return (r, np.exp(log_pdf)) if return_pdf else (r, log_pdf)


def _conditional_radius(S, a, proposal: ProposalSpec, gen, shape):
    """Radius from the Gamma law of r^2 S / (2 s^2), mixed with the defensive law."""
    s = proposal.radial_scale
    kappa = (a + 1) / 2
    S = np.maximum(S, 1e-300)
    G = gen.gamma(kappa, 1.0, shape)
    r_cond = s * np.sqrt(2.0 * G / S)
    r_def, _ = proposal.sample_radius(gen, shape)
    use_def = gen.random(shape) < proposal.defensive_weight
    r = np.where(use_def, r_def, r_cond)
    with np.errstate(divide="ignore"):
        Gr = S * r * r / (2 * s * s)
        log_cond = ((kappa - 1) * np.log(Gr) - Gr - math.lgamma(kappa)
                    + np.log(S * r / (s * s)))
    log_def = proposal.radius_logpdf(r)
    w = proposal.defensive_weight
    log_q = np.logaddexp(math.log1p(-w) + log_cond if w < 1 else -np.inf,
                         math.log(w) + log_def)
    return r, log_q


def _sphere_mixture(basis, count, proposal: ProposalSpec, gen, shape, anchor=None):
    """``count`` points on the unit sphere of span(basis) and their log density.

    The density is with respect to the product of surface measures. Clustered
    draws gather around ``anchor`` (coordinates in the basis) or, if it is
    None, around the first point.
    """
    d = basis.shape[-1]
    beta = proposal.cluster_weight
    n_clustered = count if anchor is not None else count - 1
    D = n_clustered * (d - 1)
    log_unif = -count * math.log(sphere_surface_area(d))
    coords = sample_unit_sphere(d, gen, shape + (count,))
    if beta == 0 or D == 0:
        return coords @ np.swapaxes(basis, -1, -2), np.full(shape, log_unif)

    a = coords[..., 0, :] if anchor is None else anchor
    tang = _householder_tangent(a)
    delta, sc = proposal.cluster_power, proposal.cluster_scale
    # rho**delta is uniform on [lo, sc**delta]; the floor keeps cluster points
    # resolvable in float64 (the uniform component still covers the cap)
    lo = (CLUSTER_FLOOR * sc) ** delta
    rho = (lo + (sc ** delta - lo) * gen.random(shape)) ** (1.0 / delta)
    v = rho[..., None] * sample_unit_sphere(D, gen, shape)
    y = v.reshape(shape + (n_clustered, d - 1))
    pts = a[..., None, :] + y @ np.swapaxes(tang, -1, -2)
    pts /= np.linalg.norm(pts, axis=-1, keepdims=True)
    use_cluster = gen.random(shape) < beta
    first = 0 if anchor is not None else 1
    coords[..., first:, :] = np.where(use_cluster[..., None, None], pts, coords[..., first:, :])

    # clustered-component density, evaluated at whatever was drawn
    clustered = coords[..., first:, :]
    cos = (clustered * a[..., None, :]).sum(-1)
    valid = np.all(cos > 0, axis=-1)
    safe_cos = np.where(cos > 0, cos, 1.0)
    y_back = (clustered @ tang) / safe_cos[..., None]
    rho_back = np.sqrt((y_back * y_back).sum((-1, -2)))
    valid &= (rho_back <= sc) & (rho_back >= CLUSTER_FLOOR * sc * (1 - 1e-9))
    rho_safe = np.where(valid, rho_back, 1.0)
    log_clust = (math.log(delta) + (delta - 1) * np.log(rho_safe) - math.log(sc ** delta - lo)
                 - math.log(sphere_surface_area(D)) - (D - 1) * np.log(rho_safe)
                 + 0.5 * d * np.log1p((y_back * y_back).sum(-1)).sum(-1))
    if anchor is None:
        log_clust = log_clust - math.log(sphere_surface_area(d))
    log_clust = np.where(valid, log_clust, -np.inf)
    log_q = np.logaddexp(math.log1p(-beta) + log_unif, math.log(beta) + log_clust)
    return coords @ np.swapaxes(basis, -1, -2), log_q


def sample_param(config: TheoremConfig, proposal: ProposalSpec, rng, size=None):
    """Draw ``(param, importance_weight)`` for ``config.theorem``.

    ``E[weight * g(param)]`` equals the integral of ``g`` over the parameter
    space of the formula, constants included.
    """
    gen = as_generator(rng)
    shape = _shape(size)
    sampler = _SAMPLERS.get(config.theorem)
    if sampler is None:
        raise InvalidInputError(f"no sampler for {config.theorem}")
    return sampler(config, proposal, gen, shape, config.n)


def _linear(config, proposal, gen, shape, n):
    k = config.k
    L = sample_frame(k, n, gen, shape)
    c, pdf = proposal.sample_center(k * k, gen, shape)
    u = c.reshape(shape + (k, k)) @ np.swapaxes(L, -1, -2)
    return LinearParam(L=L, u=u), grassmannian_measure(k, n) / pdf


def _affine(config, proposal, gen, shape, n):
    k = config.k
    full = sample_frame(k, n, gen, shape, complete=True)
    L, perp = full[..., :k], full[..., k:]
    g, pdf_h = proposal.sample_center(n - k, gen, shape)
    h = (g[..., None, :] @ np.swapaxes(perp, -1, -2))[..., 0, :]
    c, pdf_u = proposal.sample_center((k + 1) * k, gen, shape)
    u = c.reshape(shape + (k + 1, k)) @ np.swapaxes(L, -1, -2)
    return AffineParam(L=L, h=h, u=u), grassmannian_measure(k, n) / (pdf_h * pdf_u)


def _free_centre(basis, T, a, proposal, gen, shape, project=None):
    """Sphere points, radius and centre for the ``x = z + r u`` families.

    ``project`` (n, m) restricts the centre to ``span(project)``; returns
    (u, r, centre coordinates, log proposal density).
    """
    if proposal.mode == "independent":
        u = _sphere_points(basis, T, gen, shape)
        log_qu = np.full(shape, -T * math.log(sphere_surface_area(basis.shape[-1])))
        r, pdf_r = proposal.sample_radius(gen, shape)
        dim = basis.shape[-2] if project is None else project.shape[1]
        c, pdf_c = proposal.sample_center(dim, gen, shape)
        return u, r, c, log_qu + np.log(pdf_r) + np.log(pdf_c)

    u, log_qu = _sphere_mixture(basis, T, proposal, gen, shape)
    ubar = u.mean(-2)
    if project is not None:
        ubar = ubar @ project
    S = T * (1.0 - (ubar * ubar).sum(-1))
    r, log_qr = _conditional_radius(S, a, proposal, gen, shape)
    scale = proposal.center_scale / math.sqrt(T)
    c, pdf_c = proposal.sample_center(ubar.shape[-1], gen, shape, mean=-r[..., None] * ubar,
                                      scale=scale)
    return u, r, c, log_qu + log_qr + np.log(pdf_c)


def _circumscribed(config, proposal, gen, shape, n):
    k = config.k
    if k == n:
        L = np.broadcast_to(np.eye(n), shape + (n, n))
    else:
        L = sample_frame(k, n, gen, shape)
    u, r, z, log_q = _free_centre(L, k + 1, n * k - 1, proposal, gen, shape)
    weight = grassmannian_measure(k, n) * np.exp(-log_q)
    return CircumscribedParam(z=z, L=L, r=r, u=u), weight


def _pivoted(config, proposal, gen, shape, n):
    m, Q, r0 = config.m, config.Q, float(config.r0)
    q = Q.shape[1]
    Qperp = orthocomplement(Q)
    if m == n - q:
        L = np.broadcast_to(Qperp, shape + Qperp.shape)
    else:
        L = Qperp @ sample_frame(m, n - q, gen, shape)
    z = _sphere_points(L, 1, gen, shape)[..., 0, :]
    LQ = np.concatenate([L, np.broadcast_to(Q, shape + Q.shape)], axis=-1)
    if proposal.mode == "independent":
        u = _sphere_points(LQ, m, gen, shape)
        log_qu = -m * math.log(sphere_surface_area(m + q))
        s, pdf_s = proposal.sample_radius(gen, shape)
        r, log_qr = _lift_radius(s, np.log(pdf_s), r0, proposal.offset_mode)
    else:
        # z's coordinates in the L + Q basis are (z_L, 0)
        zc = np.concatenate([(z[..., None, :] @ L)[..., 0, :], np.zeros(shape + (q,))], -1)
        u, log_qu = _sphere_mixture(LQ, m, proposal, gen, shape, anchor=-zc)
        S = ((z[..., None, :] + u) ** 2).sum((-1, -2))
        s, log_qs = _conditional_radius(S, m * n - 1, proposal, gen, shape)
        r, log_qr = _lift_radius(s, log_qs, r0, "star")
    weight = (grassmannian_measure(m, n - q) * sphere_surface_area(m)
              * np.exp(-log_qu - log_qr))
    return PivotedCircleParam(Q=Q, r0=r0, L=L, r=r, z=z, u=u), weight


def _anchored(config, proposal, gen, shape, n):
    k, F = config.k, config.F
    m = F.dim
    D = F.direction
    if k == m:
        P = np.broadcast_to(D, shape + D.shape)
    else:
        P = D @ sample_frame(k, m, gen, shape)
    normal = F.normal_frame()
    PF = np.concatenate([P, np.broadcast_to(normal, shape + normal.shape)], axis=-1)
    alpha = n * (k + 1) - (m + 1)
    u, r, c, log_q = _free_centre(PF, k + 1, alpha, proposal, gen, shape, project=D)
    z = F.offset + c @ D.T
    weight = grassmannian_measure(k, m) * np.exp(-log_q)
    return AnchoredParam(F=F, z=z, r=r, P=P, u=u), weight


def _on_sphere(config, proposal, gen, shape, n):
    k = config.k
    full = sample_frame(k, n + 1, gen, shape, complete=True)
    sigma, perp = full[..., :k], full[..., k:]
    b = sample_ball(n + 1 - k, gen, shape)
    p = (b[..., None, :] @ np.swapaxes(perp, -1, -2))[..., 0, :]
    u = _sphere_points(sigma, k + 1, gen, shape)
    weight = (grassmannian_measure(k, n + 1) * ball_volume(n + 1 - k)
              * sphere_surface_area(k) ** (k + 1))
    return SphereOnSphereParam(sigma=sigma, p=p, u=u), np.full(shape, weight)


def _on_sphere_symmetric(config, proposal, gen, shape, n):
    k = config.k
    t = gen.random(shape)
    u = sample_unit_sphere(k, gen, shape + (k + 1,))
    weight = symmetric_prefactor(k, n) * sphere_surface_area(k) ** (k + 1)
    return SymmetricSphereParam(t=t, u=u, n=n), np.full(shape, weight)


_SAMPLERS = {
    TheoremId.LINEAR_BP: _linear,
    TheoremId.AFFINE_BP: _affine,
    TheoremId.CIRCUMSCRIBED: _circumscribed,
    TheoremId.TOP_DIMENSIONAL: _circumscribed,
    TheoremId.PIVOTED_1: _pivoted,
    TheoremId.PIVOTED_2: _pivoted,
    TheoremId.PIVOTED_CIRCLE: _pivoted,
    TheoremId.ANCHORED: _anchored,
    TheoremId.ON_SPHERE: _on_sphere,
    TheoremId.ON_SPHERE_SYMMETRIC: _on_sphere_symmetric,
}
