"""Simplex volumes, frames, and the point-tuple <-> sphere reparametrizations.

Conventions
-----------
* A point tuple is an array of shape ``(..., T, d)``: one row per point.
* A frame is an array of shape ``(..., d, k)`` whose columns are orthonormal.
* Parameter objects may carry leading batch dimensions; every ``reconstruct_*``
  broadcasts over them. The ``decompose_*`` functions take a single tuple.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, InvalidInputError

DEGENERACY_TOL = 1e-10
FRAME_TOL = 1e-12


def factorial(k: int) -> float:
    if k <= 20:
        return float(math.factorial(k))
    return math.exp(math.lgamma(k + 1))


def as_points(x, name="points") -> np.ndarray:
    try:
        arr = np.asarray(x, dtype=float)
    except ValueError as exc:  # ragged input
        raise InvalidInputError(f"{name}: points must share one ambient dimension") from exc
    if arr.ndim < 2:
        raise InvalidInputError(f"{name}: expected shape (..., count, dim), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name}: non-finite coordinates")
    return arr


def _qr_volume(edges: np.ndarray) -> np.ndarray:
    """sqrt(det(E E^T)) for edge rows E of shape (..., k, d) with k < d.

    Goes through R of E^T rather than the Gram matrix, so near-degenerate
    tuples keep absolute accuracy of order eps instead of sqrt(eps).
    """
    R = np.linalg.qr(np.swapaxes(edges, -1, -2), mode="r")
    return np.abs(np.prod(np.diagonal(R, axis1=-2, axis2=-1), axis=-1))


def scaled_volume(points, pivot=None) -> np.ndarray:
    """``k! Vol_k`` of the simplex; this is the quantity the densities raise to powers."""
    pts = as_points(points)
    if pivot is not None:
        piv = np.asarray(pivot, dtype=float)
        if piv.shape[-1] != pts.shape[-1]:
            raise InvalidInputError("pivot and points have different ambient dimensions")
        piv = np.broadcast_to(piv[..., None, :], pts.shape[:-2] + (1, pts.shape[-1]))
        pts = np.concatenate([piv, pts], axis=-2)
    k = pts.shape[-2] - 1
    if k > pts.shape[-1]:
        raise InvalidInputError(f"{k}-simplex cannot live in R^{pts.shape[-1]}")
    if k <= 0:
        return np.ones(pts.shape[:-2])
    edges = pts[..., 1:, :] - pts[..., :1, :]
    if k == pts.shape[-1]:
        return np.abs(np.linalg.det(edges))
    return _qr_volume(edges)


def simplex_volume(points, pivot=None) -> np.ndarray | float:
    """k-volume of the simplex spanned by ``points`` (prefixed with ``pivot`` if given).

    Degenerate (affinely dependent) vertex sets give 0. Broadcasts over leading
    batch dimensions.
    """
    pts = as_points(points)
    k = pts.shape[-2] - (0 if pivot is not None else 1)
    vol = scaled_volume(pts, pivot) / factorial(max(k, 0))
    return float(vol) if np.ndim(vol) == 0 else vol


def diameter(points) -> float:
    pts = as_points(points)
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((diff ** 2).sum(-1)).max())


def is_degenerate(points, tol: float = DEGENERACY_TOL) -> bool:
    """Scale-invariant test ``k! Vol_k < tol * diam^k`` for a single tuple."""
    pts = as_points(points)
    k = pts.shape[0] - 1
    if k == 0:
        return False
    diam = diameter(pts)
    if diam == 0.0:
        return True
    return float(scaled_volume(pts)) < tol * diam ** k


def gram_schmidt(vectors: np.ndarray) -> np.ndarray:
    """Orthonormalize the columns of ``vectors`` (..., d, k), in order.

    Modified Gram-Schmidt with one re-orthogonalization pass. Columns that are
    linearly dependent on their predecessors come back as garbage; callers
    screen for degeneracy first.
    """
    v = np.array(vectors, dtype=float, copy=True)
    k = v.shape[-1]
    for j in range(k):
        col = v[..., :, j]
        for _ in range(2):
            for i in range(j):
                prev = v[..., :, i]
                col = col - (col * prev).sum(-1, keepdims=True) * prev
        col = col / np.linalg.norm(col, axis=-1, keepdims=True)
        v[..., :, j] = col
    return v


def check_frame(frame, tol: float = FRAME_TOL) -> np.ndarray:
    f = np.asarray(frame, dtype=float)
    if f.ndim < 2:
        raise InvalidInputError("frame must have shape (..., ambient_dim, subspace_dim)")
    d, k = f.shape[-2:]
    if k > d:
        raise InvalidInputError(f"frame of dimension {k} in R^{d}")
    gram = np.swapaxes(f, -1, -2) @ f
    if np.abs(gram - np.eye(k)).max(initial=0.0) > tol:
        raise InvalidInputError("frame basis is not orthonormal")
    return f


def project_onto(frame, v) -> np.ndarray:
    """Orthogonal projection of ``v`` (..., d) onto the span of ``frame`` (d, k)."""
    f = np.asarray(frame, dtype=float)
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != f.shape[-2]:
        raise InvalidInputError(
            f"vector dimension {v.shape[-1]} does not match frame ambient dimension {f.shape[-2]}")
    coords = v @ f
    return coords @ np.swapaxes(f, -1, -2)


def orthocomplement(frame) -> np.ndarray:
    """Orthonormal basis (d, d-k) of the orthogonal complement of ``span(frame)``."""
    f = np.asarray(frame, dtype=float)
    k = f.shape[-1]
    if k == 0:
        return np.broadcast_to(np.eye(f.shape[-2]), f.shape[:-1] + (f.shape[-2],)).copy()
    q, _ = np.linalg.qr(f, mode="complete")
    return q[..., :, k:]


def _edge_frame(points: np.ndarray) -> np.ndarray:
    """Gram-Schmidt frame of the edges x_i - x_0, in input order."""
    return gram_schmidt((points[1:] - points[0]).T)


def _solve_qr(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(a)
    return np.linalg.solve(r, q.T @ b)


# ---------------------------------------------------------------------------
# parameter records

@dataclass(frozen=True)
class AffineFlat:
    """``offset + span(direction)`` with the offset orthogonal to the direction."""

    direction: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        d = check_frame(self.direction)
        h = np.asarray(self.offset, dtype=float)
        if h.shape != (d.shape[0],):
            raise InvalidInputError("flat offset must be a single vector in the ambient space")
        if np.abs(h @ d).max(initial=0.0) > FRAME_TOL * max(1.0, np.linalg.norm(h)):
            raise InvalidInputError("flat offset must be orthogonal to its direction")
        object.__setattr__(self, "direction", d)
        object.__setattr__(self, "offset", h)

    @classmethod
    def through(cls, point, direction) -> "AffineFlat":
        d = check_frame(direction)
        p = np.asarray(point, dtype=float)
        return cls(d, p - project_onto(d, p))

    @property
    def dim(self) -> int:
        return self.direction.shape[1]

    @property
    def ambient_dim(self) -> int:
        return self.direction.shape[0]

    def project(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.offset + project_onto(self.direction, x - self.offset)

    def normal_frame(self) -> np.ndarray:
        return orthocomplement(self.direction)


@dataclass(frozen=True)
class LinearParam:
    """L in G(k, n) and k points of L (ambient coordinates)."""

    L: np.ndarray
    u: np.ndarray


@dataclass(frozen=True)
class AffineParam:
    """L in G(k, n), offset h in L-perp and k+1 points of L."""

    L: np.ndarray
    h: np.ndarray
    u: np.ndarray


@dataclass(frozen=True)
class CircumscribedParam:
    z: np.ndarray
    L: np.ndarray
    r: np.ndarray
    u: np.ndarray

    @property
    def k(self) -> int:
        return self.u.shape[-2] - 1


@dataclass(frozen=True)
class PivotedCircleParam:
    """Sphere through the fixed circle S(0, r0, Q): x = sqrt(r^2 - r0^2) z + r u.

    ``Q`` has shape (n, q) and may be empty (q = 0, r0 = 0 for the sphere
    through the origin).
    """

    Q: np.ndarray
    r0: float
    L: np.ndarray
    r: np.ndarray
    z: np.ndarray
    u: np.ndarray

    @property
    def rstar(self) -> np.ndarray:
        r = np.asarray(self.r, dtype=float)
        return np.sqrt(np.clip(r * r - self.r0 ** 2, 0.0, None))

    @property
    def m(self) -> int:
        return self.u.shape[-2]

    @property
    def q(self) -> int:
        return self.Q.shape[1]


@dataclass(frozen=True)
class AnchoredParam:
    F: AffineFlat
    z: np.ndarray
    r: np.ndarray
    P: np.ndarray
    u: np.ndarray

    @property
    def k(self) -> int:
        return self.u.shape[-2] - 1


@dataclass(frozen=True)
class SphereOnSphereParam:
    sigma: np.ndarray
    p: np.ndarray
    u: np.ndarray

    @property
    def R(self) -> np.ndarray:
        p = np.asarray(self.p, dtype=float)
        return np.sqrt(np.clip(1.0 - (p * p).sum(-1), 0.0, None))

    @property
    def k(self) -> int:
        return self.sigma.shape[-1]


@dataclass(frozen=True)
class SymmetricSphereParam:
    """Rotation-reduced coordinates: t = R^2 and k+1 points on S^{k-1} in R^k.

    The tuple lives on S^n with u embedded in the first k coordinates and the
    centre on the (k+1)-th axis.
    """

    t: np.ndarray
    u: np.ndarray
    n: int

    @property
    def k(self) -> int:
        return self.u.shape[-1]


# ---------------------------------------------------------------------------
# circumscribed spheres

def decompose_circumscribed(x) -> CircumscribedParam:
    pts = as_points(x)
    if pts.ndim != 2:
        raise InvalidInputError("decompose takes a single tuple")
    k = pts.shape[0] - 1
    if not 1 <= k <= pts.shape[1]:
        raise InvalidInputError(f"need 2..{pts.shape[1] + 1} points, got {k + 1}")
    if is_degenerate(pts):
        raise DegenerateInputError("points are affinely dependent")
    L = _edge_frame(pts)
    y = (pts[1:] - pts[0]) @ L
    c = _solve_qr(2.0 * y, (y * y).sum(1))
    z = pts[0] + L @ c
    dist = np.linalg.norm(pts - z, axis=1)
    r = dist.mean()
    return CircumscribedParam(z=z, L=L, r=np.float64(r), u=(pts - z) / r)


def reconstruct_circumscribed(p: CircumscribedParam) -> np.ndarray:
    r = np.asarray(p.r, dtype=float)
    return np.asarray(p.z)[..., None, :] + r[..., None, None] * np.asarray(p.u)


# ---------------------------------------------------------------------------
# spheres containing a fixed circle

def decompose_pivoted_circle(x, Q=None, r0: float = 0.0) -> PivotedCircleParam:
    pts = as_points(x)
    if pts.ndim != 2:
        raise InvalidInputError("decompose takes a single tuple")
    m, n = pts.shape
    Q = np.zeros((n, 0)) if Q is None else check_frame(Q)
    q = Q.shape[1]
    if Q.shape[0] != n:
        raise InvalidInputError("Q and points have different ambient dimensions")
    if not 1 <= m <= n - q:
        raise InvalidInputError(f"need 1 <= m <= n - q, got m={m}, n={n}, q={q}")
    if r0 < 0 or (q == 0 and r0 != 0):
        raise InvalidInputError("r0 must be >= 0, and 0 when Q is empty")
    y = pts - project_onto(Q, pts)
    with_origin = np.vstack([np.zeros(n), y])
    if is_degenerate(with_origin):
        raise DegenerateInputError("projections onto Q-perp are linearly dependent")
    L = gram_schmidt(y.T)
    coords = y @ L
    a = _solve_qr(2.0 * coords, (pts * pts).sum(1) - r0 ** 2)
    c = L @ a
    cn = np.linalg.norm(c)
    if cn < DEGENERACY_TOL * max(1.0, diameter(with_origin)):
        raise DegenerateInputError("sphere centre coincides with the circle centre")
    r = math.sqrt(r0 ** 2 + cn ** 2)
    return PivotedCircleParam(Q=Q, r0=float(r0), L=L, r=np.float64(r), z=c / cn, u=(pts - c) / r)


def reconstruct_pivoted_circle(p: PivotedCircleParam) -> np.ndarray:
    r = np.asarray(p.r, dtype=float)
    centre = p.rstar[..., None] * np.asarray(p.z)
    return centre[..., None, :] + r[..., None, None] * np.asarray(p.u)


# ---------------------------------------------------------------------------
# spheres anchored at an affine flat

def decompose_anchored(x, F: AffineFlat) -> AnchoredParam:
    pts = as_points(x)
    if pts.ndim != 2:
        raise InvalidInputError("decompose takes a single tuple")
    k = pts.shape[0] - 1
    n = pts.shape[1]
    if F.ambient_dim != n:
        raise InvalidInputError("flat and points have different ambient dimensions")
    if k > F.dim:
        raise InvalidInputError(f"k={k} exceeds flat dimension m={F.dim}")
    a = F.project(pts)
    b2 = ((pts - a) ** 2).sum(1)
    if k == 0:
        P = np.zeros((n, 0))
        z = a[0]
    elif not is_degenerate(a):
        P = _edge_frame(a)
        y = (a[1:] - a[0]) @ P
        c = _solve_qr(2.0 * y, (y * y).sum(1) + b2[1:] - b2[0])
        z = a[0] + P @ c
    else:
        z, P = _anchored_collapsed(a, b2, F, k)
    r = np.linalg.norm(pts - z, axis=1).mean()
    if r == 0.0:
        raise DegenerateInputError("point lies on the flat; zero radius")
    return AnchoredParam(F=F, z=z, r=np.float64(r), P=P, u=(pts - z) / r)


def _greedy_frame(candidates: np.ndarray, k: int, tol: float) -> np.ndarray:
    """First ``k`` orthonormalized columns of ``candidates`` that add a new direction."""
    cols = []
    for v in candidates.T:
        w = v.copy()
        for _ in range(2):
            for c in cols:
                w = w - (w @ c) * c
        norm = np.linalg.norm(w)
        if norm > tol * max(1.0, np.linalg.norm(v)):
            cols.append(w / norm)
            if len(cols) == k:
                break
    return np.array(cols).T


def _anchored_collapsed(a, b2, F: AffineFlat, k: int):
    """Smallest F-centred sphere when the projected simplex is flat.

    The equidistant centres form an affine subspace of F (empty if the
    equations are inconsistent); take its point closest to the projection of x_0.
    """
    D = F.direction
    y = (a - F.offset) @ D
    A = 2.0 * (y[1:] - y[0])
    rhs = (y[1:] ** 2).sum(1) - (y[0] ** 2).sum() + b2[1:] - b2[0]
    scale = max(1.0, float(np.abs(A).max()), float(np.abs(rhs).max()))
    delta, *_ = np.linalg.lstsq(A, rhs - A @ y[0], rcond=DEGENERACY_TOL)
    c = y[0] + delta
    if np.abs(A @ c - rhs).max() > 1e-9 * scale:
        raise DegenerateInputError("projection onto the flat collapses the simplex "
                                   "and no centre in the flat is equidistant")
    # span of the projected edges, completed inside F in axis order
    P = D @ _greedy_frame(np.hstack([(y[1:] - y[0]).T, np.eye(D.shape[1])]), k, 1e-8)
    return F.offset + D @ c, P


def reconstruct_anchored(p: AnchoredParam) -> np.ndarray:
    r = np.asarray(p.r, dtype=float)
    return np.asarray(p.z)[..., None, :] + r[..., None, None] * np.asarray(p.u)


# ---------------------------------------------------------------------------
# subspheres of the unit sphere

def decompose_on_sphere(x) -> SphereOnSphereParam:
    pts = as_points(x)
    if pts.ndim != 2:
        raise InvalidInputError("decompose takes a single tuple")
    k = pts.shape[0] - 1
    if not 1 <= k <= pts.shape[1] - 1:
        raise InvalidInputError(f"need 2..{pts.shape[1]} points on S^{pts.shape[1] - 1}")
    if np.abs(np.linalg.norm(pts, axis=1) - 1.0).max() > 1e-10:
        raise InvalidInputError("points must lie on the unit sphere")
    if is_degenerate(pts):
        raise DegenerateInputError("points are affinely dependent")
    sigma = _edge_frame(pts)
    p = pts[0] - project_onto(sigma, pts[0])
    pn2 = float(p @ p)
    assert pn2 <= 1.0 + 1e-12, "affine hull of unit vectors cannot miss the closed ball"
    R = math.sqrt(max(1.0 - pn2, 0.0))
    return SphereOnSphereParam(sigma=sigma, p=p, u=(pts - p) / R)


def reconstruct_on_sphere(p: SphereOnSphereParam) -> np.ndarray:
    return np.asarray(p.p)[..., None, :] + p.R[..., None, None] * np.asarray(p.u)


def reconstruct_symmetric_sphere(p: SymmetricSphereParam) -> np.ndarray:
    t = np.asarray(p.t, dtype=float)
    u = np.asarray(p.u, dtype=float)
    k = u.shape[-1]
    x = np.zeros(u.shape[:-1] + (p.n + 1,))
    x[..., :k] = np.sqrt(t)[..., None, None] * u
    x[..., k] = np.sqrt(np.clip(1.0 - t, 0.0, None))[..., None]
    return x


# ---------------------------------------------------------------------------
# linear / affine flats

def reconstruct_linear(p: LinearParam) -> np.ndarray:
    return np.asarray(p.u, dtype=float)


def reconstruct_affine(p: AffineParam) -> np.ndarray:
    return np.asarray(p.h)[..., None, :] + np.asarray(p.u)


_RECONSTRUCT = {
    LinearParam: reconstruct_linear,
    AffineParam: reconstruct_affine,
    CircumscribedParam: reconstruct_circumscribed,
    PivotedCircleParam: reconstruct_pivoted_circle,
    AnchoredParam: reconstruct_anchored,
    SphereOnSphereParam: reconstruct_on_sphere,
    SymmetricSphereParam: reconstruct_symmetric_sphere,
}


def reconstruct(param) -> np.ndarray:
    """Forward map of whichever parametrization ``param`` belongs to."""
    try:
        fn = _RECONSTRUCT[type(param)]
    except KeyError:
        raise InvalidInputError(f"unknown parameter type {type(param).__name__}") from None
    return fn(param)
