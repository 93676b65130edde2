"""Theorem identifiers and the dimensional configuration each one needs."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .geometry import AffineFlat, check_frame


class TheoremId(enum.Enum):
    LINEAR_BP = "linear-bp"
    AFFINE_BP = "affine-bp"
    CIRCUMSCRIBED = "circumscribed"
    TOP_DIMENSIONAL = "top-dimensional"
    PIVOTED_1 = "pivoted-1"
    PIVOTED_2 = "pivoted-2"
    PIVOTED_CIRCLE = "pivoted-circle"
    ANCHORED = "anchored"
    ON_SPHERE = "on-sphere"
    ON_SPHERE_SYMMETRIC = "on-sphere-symmetric"

    @classmethod
    def parse(cls, name: str) -> "TheoremId":
        key = name.strip().lower().replace("_", "-")
        for t in cls:
            if t.value == key:
                return t
        raise InvalidInputError(f"unknown theorem {name!r}; choose from {[t.value for t in cls]}")

    @property
    def on_sphere(self) -> bool:
        return self in (TheoremId.ON_SPHERE, TheoremId.ON_SPHERE_SYMMETRIC)


def default_Q(n: int, q: int) -> np.ndarray:
    """The last ``q`` coordinate axes."""
    return np.eye(n)[:, n - q:]


def default_flat(n: int, m: int) -> AffineFlat:
    """The first ``m`` coordinate axes through the origin."""
    return AffineFlat(np.eye(n)[:, :m], np.zeros(n))


@dataclass(frozen=True)
class TheoremConfig:
    """Dimensions for one formula.

    Which of ``k``, ``m``, ``q``, ``r0`` matter depends on the theorem:

    ============================  =========================================
    linear-bp                     k points in a k-plane of R^n
    affine-bp, circumscribed      k+1 points, 1 <= k <= n
    top-dimensional               k = n
    pivoted-1                     m = n
    pivoted-2                     m points, 1 <= m <= n
    pivoted-circle                m <= n - q, fixed circle S(0, r0, Q)
    anchored                      0 <= k <= m <= n, flat F of dimension m
    on-sphere(-symmetric)         k+1 points on S^n, 1 <= k <= n
    ============================  =========================================
    """

    theorem: TheoremId
    n: int
    k: int | None = None
    m: int | None = None
    q: int = 0
    r0: float = 0.0
    Q: np.ndarray | None = field(default=None, compare=False, repr=False)
    F: AffineFlat | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        t, n = self.theorem, self.n
        if n < 1:
            raise InvalidInputError("n must be >= 1")
        if t is TheoremId.TOP_DIMENSIONAL:
            object.__setattr__(self, "k", n if self.k is None else self.k)
            if self.k != n:
                raise InvalidInputError("top-dimensional formula needs k = n")
        if t is TheoremId.PIVOTED_1:
            object.__setattr__(self, "m", n if self.m is None else self.m)
            if self.m != n:
                raise InvalidInputError("pivoted-1 needs m = n")

        if t in (TheoremId.LINEAR_BP, TheoremId.AFFINE_BP, TheoremId.CIRCUMSCRIBED,
                 TheoremId.ON_SPHERE, TheoremId.ON_SPHERE_SYMMETRIC):
            if self.k is None or not 1 <= self.k <= n:
                raise InvalidInputError(f"{t.value} needs 1 <= k <= n (k={self.k}, n={n})")

        if t in (TheoremId.PIVOTED_1, TheoremId.PIVOTED_2, TheoremId.PIVOTED_CIRCLE):
            q = self.q if t is TheoremId.PIVOTED_CIRCLE else 0
            if t is not TheoremId.PIVOTED_CIRCLE and (self.q != 0 or self.r0 != 0):
                raise InvalidInputError(f"{t.value} has no fixed circle (q = 0, r0 = 0)")
            if q < 0 or self.m is None or not 1 <= self.m <= n - q:
                raise InvalidInputError(
                    f"{t.value} needs 1 <= m <= n - q (m={self.m}, n={n}, q={q})")
            if self.r0 < 0:
                raise InvalidInputError("r0 must be >= 0")
            if q == 0 and self.r0 != 0:
                raise InvalidInputError("an empty circle (q = 0) has r0 = 0")
            if self.Q is None:
                object.__setattr__(self, "Q", default_Q(n, q))
            else:
                Q = check_frame(self.Q)
                if Q.shape != (n, q):
                    raise InvalidInputError(f"Q must be an (n, q) = ({n}, {q}) frame")
                object.__setattr__(self, "Q", Q)

        if t is TheoremId.ANCHORED:
            if self.k is None or self.m is None or not 0 <= self.k <= self.m <= n:
                raise InvalidInputError(f"anchored needs 0 <= k <= m <= n (k={self.k}, m={self.m})")
            if self.k == 0 and self.m == n:
                raise InvalidInputError("anchored with k = 0 needs m < n")
            if self.F is None:
                object.__setattr__(self, "F", default_flat(n, self.m))
            elif self.F.ambient_dim != n or self.F.dim != self.m:
                raise InvalidInputError("F must be an m-flat in R^n")

    @property
    def tuple_size(self) -> int:
        t = self.theorem
        if t is TheoremId.LINEAR_BP:
            return self.k
        if t in (TheoremId.PIVOTED_1, TheoremId.PIVOTED_2, TheoremId.PIVOTED_CIRCLE):
            return self.m
        return self.k + 1

    @property
    def ambient_dim(self) -> int:
        return self.n + 1 if self.theorem.on_sphere else self.n

    @property
    def chart_free(self) -> bool:
        """True when the parameter space has no Grassmannian factor to chart."""
        t = self.theorem
        if t in (TheoremId.TOP_DIMENSIONAL, TheoremId.PIVOTED_1):
            return True
        if t is TheoremId.PIVOTED_CIRCLE:
            return self.m == self.n - self.q
        if t is TheoremId.ANCHORED:
            return self.k == self.m
        if t is TheoremId.ON_SPHERE:
            return self.k == self.n
        return False

    def echo(self) -> dict:
        out = {"theorem": self.theorem.value, "n": self.n}
        for key in ("k", "m"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        if self.theorem is TheoremId.PIVOTED_CIRCLE:
            out["q"] = self.q
            out["r0"] = self.r0
        return out
