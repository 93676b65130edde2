"""Monte Carlo certification of the integral identities and a finite-difference
Jacobian oracle for the parametrizations without a Grassmannian factor."""
from __future__ import annotations

import enum
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .densities import density
from .errors import DegenerateInputError, InvalidInputError, UnsupportedTheoremError
from .geometry import (
    AnchoredParam,
    CircumscribedParam,
    PivotedCircleParam,
    SphereOnSphereParam,
    decompose_anchored,
    decompose_circumscribed,
    decompose_on_sphere,
    decompose_pivoted_circle,
    diameter,
    factorial,
    orthocomplement,
    reconstruct,
    simplex_volume,
)
from .measures import (
    ProposalSpec,
    RandomStream,
    as_generator,
    ball_volume,
    sample_param,
    sample_unit_sphere,
    sphere_surface_area,
)
from .theorems import TheoremConfig, TheoremId

CHUNK_SIZE = 1 << 16
DEFAULT_THRESHOLD = 3.5
FD_STEP = 1e-5


class IntegrandKind(enum.Enum):
    GAUSSIAN_PRODUCT = "gaussian"
    BALL_INDICATOR = "ball"
    VOLUME_POWER = "volume-power"
    CONSTANT_ON_SPHERE = "constant"


@dataclass(frozen=True)
class Integrand:
    """Non-negative test function of a point tuple ``x`` of shape (..., T, d).

    * gaussian: product of standard normal densities; integrates to 1 over (R^d)^T.
    * ball: indicator that every point lies in the ball of ``radius``.
    * volume-power: ``Vol(x)^exponent`` times the ball indicator of ``cutoff``.
    * constant: identically 1 (only integrable on the sphere).
    """

    kind: IntegrandKind = IntegrandKind.GAUSSIAN_PRODUCT
    radius: float = 1.0
    exponent: float = 1.0
    cutoff: float = 1.0

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        sq = (x * x).sum(-1)
        if self.kind is IntegrandKind.GAUSSIAN_PRODUCT:
            T, d = x.shape[-2:]
            return np.exp(-0.5 * sq.sum(-1)) / (2 * math.pi) ** (T * d / 2)
        if self.kind is IntegrandKind.BALL_INDICATOR:
            return np.all(sq <= self.radius ** 2, axis=-1).astype(float)
        if self.kind is IntegrandKind.VOLUME_POWER:
            inside = np.all(sq <= self.cutoff ** 2 * (1 + 1e-12), axis=-1)
            return np.where(inside, simplex_volume(x) ** self.exponent, 0.0)
        return np.ones(x.shape[:-2])

    def exact_lhs(self, tuple_size: int, n: int, on_sphere: bool = False) -> float | None:
        """Closed-form left-hand side where one is known, else None."""
        if on_sphere:
            if self.kind is IntegrandKind.CONSTANT_ON_SPHERE:
                return sphere_surface_area(n + 1) ** tuple_size
            if self.kind is IntegrandKind.BALL_INDICATOR and self.radius >= 1:
                return sphere_surface_area(n + 1) ** tuple_size
            return None
        if self.kind is IntegrandKind.GAUSSIAN_PRODUCT:
            return 1.0
        if self.kind is IntegrandKind.BALL_INDICATOR:
            return ball_volume(n, self.radius) ** tuple_size
        return None

    def support_scale(self) -> float | None:
        if self.kind is IntegrandKind.BALL_INDICATOR:
            return self.radius
        if self.kind is IntegrandKind.VOLUME_POWER:
            return self.cutoff
        return None

    def echo(self) -> dict:
        out = {"id": self.kind.value}
        if self.kind is IntegrandKind.BALL_INDICATOR:
            out["radius"] = self.radius
        elif self.kind is IntegrandKind.VOLUME_POWER:
            out.update(exponent=self.exponent, cutoff=self.cutoff)
        return out


@dataclass
class EstimatorReport:
    mean: float
    stderr: float
    samples: int
    seed: int
    config: dict = field(default_factory=dict)
    wall_time: float = 0.0
    exact: bool = False

    @classmethod
    def exact_value(cls, value: float, config: dict | None = None) -> "EstimatorReport":
        return cls(mean=float(value), stderr=0.0, samples=0, seed=0,
                   config=config or {}, exact=True)

    def to_dict(self) -> dict:
        out = {"mean": self.mean, "stderr": self.stderr, "n": self.samples}
        if self.exact:
            out["exact"] = True
        return out


@dataclass
class ComparisonVerdict:
    lhs: EstimatorReport | None
    rhs: EstimatorReport | None
    z_score: float | None
    passed: bool
    threshold: float = DEFAULT_THRESHOLD
    label: str = ""
    config: dict = field(default_factory=dict)
    reason: str | None = None

    @property
    def wall_time(self) -> float:
        return sum(r.wall_time for r in (self.lhs, self.rhs) if r is not None)


# ---------------------------------------------------------------------------
# Monte Carlo machinery

def _combine(stats: list[tuple[int, float, float]]) -> tuple[int, float, float]:
    """Merge per-chunk (count, mean, M2) in order (Chan et al.)."""
    n, mean, m2 = 0, 0.0, 0.0
    for nb, mb, m2b in stats:
        if nb == 0:
            continue
        tot = n + nb
        delta = mb - mean
        mean += delta * nb / tot
        m2 += m2b + delta * delta * n * nb / tot
        n = tot
    return n, mean, m2


def _monte_carlo(draw, samples: int, rng: RandomStream, side: int, config: dict,
                 workers: int = 1, chunk_size: int = CHUNK_SIZE) -> EstimatorReport:
    """Average ``draw(generator, size)`` over ``samples`` draws.

    Chunk ``j`` always uses substream ``(stream_id, side, j)``, so the result
    does not depend on ``workers``.
    """
    if samples < 2:
        raise InvalidInputError("need at least 2 samples")
    start = time.perf_counter()
    sizes = [chunk_size] * (samples // chunk_size)
    if samples % chunk_size:
        sizes.append(samples % chunk_size)

    def run(j):
        values = np.asarray(draw(rng.generator(side, j), sizes[j]), dtype=float)
        mean = values.mean()
        return values.size, float(mean), float(((values - mean) ** 2).sum())

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            stats = list(pool.map(run, range(len(sizes))))
    else:
        stats = [run(j) for j in range(len(sizes))]
    n, mean, m2 = _combine(stats)
    std = math.sqrt(m2 / (n - 1))
    return EstimatorReport(mean=mean, stderr=std / math.sqrt(n), samples=n, seed=rng.seed,
                           config=config, wall_time=time.perf_counter() - start)


def _as_stream(rng) -> RandomStream:
    if isinstance(rng, RandomStream):
        return rng
    return RandomStream(int(rng))


def estimate_lhs(f: Integrand, tuple_size: int, n: int, samples: int,
                 proposal: ProposalSpec | None = None, rng=0, on_sphere: bool = False,
                 workers: int = 1) -> EstimatorReport:
    """Importance-sampling estimate of the integral of ``f`` over (R^n)^T or (S^n)^T."""
    rng = _as_stream(rng)
    proposal = proposal or ProposalSpec()
    config = {"side": "lhs", "tuple_size": tuple_size, "n": n, "on_sphere": on_sphere,
              "integrand": f.echo()}
    if on_sphere:
        total = sphere_surface_area(n + 1) ** tuple_size

        def draw(gen, size):
            return total * f(sample_unit_sphere(n + 1, gen, (size, tuple_size)))
    else:
        s = proposal.center_scale
        dim = tuple_size * n
        log_norm = dim * math.log(s * math.sqrt(2 * math.pi))

        def draw(gen, size):
            x = gen.standard_normal((size, tuple_size, n)) * s
            log_pdf = -0.5 * (x * x).sum((-1, -2)) / (s * s) - log_norm
            return f(x) * np.exp(-log_pdf)

    return _monte_carlo(draw, samples, rng, 0, config, workers)


def radial_exponent(config: TheoremConfig) -> int | None:
    """Power of the radius in the density (None when there is no radius)."""
    t, n, k, m = config.theorem, config.n, config.k, config.m
    if t in (TheoremId.CIRCUMSCRIBED, TheoremId.TOP_DIMENSIONAL):
        return n * k - 1
    if t in (TheoremId.PIVOTED_1, TheoremId.PIVOTED_2, TheoremId.PIVOTED_CIRCLE):
        return m * n - 1
    if t is TheoremId.ANCHORED:
        return n * (k + 1) - (m + 1)
    return None


def default_proposal(config: TheoremConfig, f: Integrand) -> ProposalSpec:
    """Conditional proposal scaled to the integrand's decay length (1 for Gaussians)."""
    scale = f.support_scale()
    if scale is not None:
        return ProposalSpec(radial_scale=scale, center_scale=scale)
    return ProposalSpec()


def estimate_rhs(config: TheoremConfig, f: Integrand, samples: int,
                 proposal: ProposalSpec | None = None, rng=0,
                 workers: int = 1) -> EstimatorReport:
    """Estimate the parameter-space side of ``config.theorem`` for integrand ``f``."""
    rng = _as_stream(rng)
    proposal = proposal or default_proposal(config, f)
    echo = {"side": "rhs", **config.echo(), "integrand": f.echo()}

    def draw(gen, size):
        param, weight = sample_param(config, proposal, gen, size)
        # radii far in the proposal tail overflow r**a while f underflows to 0
        with np.errstate(over="ignore", invalid="ignore"):
            dens = density(config, param)
            fx = f(reconstruct(param))
            values = fx * dens * weight
        return np.where((dens == 0) | (fx == 0), 0.0, values)

    return _monte_carlo(draw, samples, rng, 1, echo, workers)


def compare(lhs, rhs: EstimatorReport, threshold: float = DEFAULT_THRESHOLD,
            label: str = "", config: dict | None = None) -> ComparisonVerdict:
    """z-test of equality; an exact (float) LHS contributes no variance."""
    if not isinstance(lhs, EstimatorReport):
        lhs = EstimatorReport.exact_value(lhs)
    diff = lhs.mean - rhs.mean
    se = math.hypot(lhs.stderr, rhs.stderr)
    if se > 0:
        z = diff / se
    elif abs(diff) <= 1e-12 * max(abs(lhs.mean), abs(rhs.mean), 1.0):
        z = 0.0
    else:
        z = math.copysign(math.inf, diff)
    passed = bool(math.isfinite(z) and abs(z) <= threshold)
    return ComparisonVerdict(lhs=lhs, rhs=rhs, z_score=z, passed=passed, threshold=threshold,
                             label=label, config=config or {})


# ---------------------------------------------------------------------------
# finite-difference Jacobian oracle

def _tangent(u: np.ndarray, span: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the tangent space at ``u`` of the unit sphere in span."""
    c = span.T @ u
    return span @ orthocomplement(c[:, None])


def _on_sphere_chart(u, T, t):
    v = u + T @ t
    return v / np.linalg.norm(v)


def _rotation_between(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Rotation in span(a, b) taking unit ``a`` to unit ``b`` (a != -b)."""
    K = np.outer(b, a) - np.outer(a, b)
    return np.eye(a.size) + K + K @ K / (1.0 + a @ b)


class _Chart:
    """Local coordinates t -> tuple x around a base parameter; t = 0 is the base."""

    def __init__(self, blocks, build, lhs_tangents=None):
        self.blocks = blocks
        self.dim = sum(blocks)
        self.build = build
        self.lhs_tangents = lhs_tangents

    def __call__(self, t):
        parts, i = [], 0
        for b in self.blocks:
            parts.append(t[i:i + b])
            i += b
        return self.build(parts)


def _chart(config: TheoremConfig, param) -> _Chart:
    t, n = config.theorem, config.n
    if t is TheoremId.TOP_DIMENSIONAL or (t is TheoremId.CIRCUMSCRIBED and config.k == n):
        p: CircumscribedParam = param
        z0, r0 = np.asarray(p.z, float), float(p.r)
        us = np.asarray(p.u, float)
        Ts = [_tangent(u, np.eye(n)) for u in us]

        def build(parts):
            z, r = z0 + parts[0], r0 + parts[1][0]
            return np.array([z + r * _on_sphere_chart(u, T, s)
                             for u, T, s in zip(us, Ts, parts[2:])])

        return _Chart([n, 1] + [n - 1] * len(us), build)

    if t in (TheoremId.PIVOTED_1, TheoremId.PIVOTED_CIRCLE) and config.chart_free:
        p: PivotedCircleParam = param
        m, rr0 = p.m, p.r0
        r0 = float(p.r)
        z0 = np.asarray(p.z, float)
        us = np.asarray(p.u, float)
        Tz = _tangent(z0, np.asarray(p.L, float))
        Ts = [_tangent(u, np.eye(n)) for u in us]

        def build(parts):
            r = r0 + parts[0][0]
            rstar = math.sqrt(max(r * r - rr0 * rr0, 0.0))
            z = _on_sphere_chart(z0, Tz, parts[1])
            return np.array([rstar * z + r * _on_sphere_chart(u, T, s)
                             for u, T, s in zip(us, Ts, parts[2:])])

        return _Chart([1, m - 1] + [n - 1] * m, build)

    if t is TheoremId.ANCHORED and config.k == config.m:
        p: AnchoredParam = param
        D = p.F.direction
        z0, r0 = np.asarray(p.z, float), float(p.r)
        us = np.asarray(p.u, float)
        Ts = [_tangent(u, np.eye(n)) for u in us]

        def build(parts):
            z, r = z0 + D @ parts[0], r0 + parts[1][0]
            return np.array([z + r * _on_sphere_chart(u, T, s)
                             for u, T, s in zip(us, Ts, parts[2:])])

        return _Chart([D.shape[1], 1] + [n - 1] * len(us), build)

    if t is TheoremId.ON_SPHERE and config.k == n:
        # G(n, n+1) charted by the unit normal; fibres carried along by a rotation
        p: SphereOnSphereParam = param
        nu0 = orthocomplement(np.asarray(p.sigma, float))[:, 0]
        s0 = float(np.asarray(p.p) @ nu0)
        us = np.asarray(p.u, float)
        ambient = np.eye(n + 1)
        Tnu = _tangent(nu0, ambient)
        sigma0 = np.asarray(p.sigma, float)
        Ts = [_tangent(u, sigma0) for u in us]
        x0 = reconstruct(p)
        lhs_tangents = [_tangent(x, ambient) for x in x0]

        def build(parts):
            nu = _on_sphere_chart(nu0, Tnu, parts[0])
            rot = _rotation_between(nu0, nu)
            s = s0 + parts[1][0]
            R = math.sqrt(max(1.0 - s * s, 0.0))
            return np.array([s * nu + R * (rot @ _on_sphere_chart(u, T, w))
                             for u, T, w in zip(us, Ts, parts[2:])])

        return _Chart([n, 1] + [n - 1] * len(us), build, lhs_tangents)

    raise UnsupportedTheoremError(
        f"{t.value} with {config.echo()} has a Grassmannian factor; no explicit chart")


def fd_jacobian_density(config: TheoremConfig, param, h: float = FD_STEP) -> float:
    """|det| of the central-difference Jacobian of the forward map in orthonormal charts."""
    chart = _chart(config, param)
    cols = []
    for j in range(chart.dim):
        e = np.zeros(chart.dim)
        e[j] = h
        d = (chart(e) - chart(-e)) / (2 * h)
        if chart.lhs_tangents is not None:
            d = np.concatenate([T.T @ row for T, row in zip(chart.lhs_tangents, d)])
        cols.append(d.ravel())
    J = np.array(cols).T
    if J.shape[0] != J.shape[1]:
        raise UnsupportedTheoremError(
            f"chart dimension {J.shape[1]} != tuple dimension {J.shape[0]}")
    return float(abs(np.linalg.det(J)))


ROUNDTRIP_THEOREMS = (TheoremId.CIRCUMSCRIBED, TheoremId.TOP_DIMENSIONAL, TheoremId.PIVOTED_1,
                      TheoremId.PIVOTED_2, TheoremId.PIVOTED_CIRCLE, TheoremId.ANCHORED,
                      TheoremId.ON_SPHERE)


def random_tuple(config: TheoremConfig, rng) -> np.ndarray:
    """A standard Gaussian tuple for ``config`` (uniform on S^n for on-sphere theorems)."""
    gen = as_generator(rng)
    if config.theorem.on_sphere:
        return sample_unit_sphere(config.n + 1, gen, config.tuple_size)
    return gen.standard_normal((config.tuple_size, config.n))


def decompose(config: TheoremConfig, x):
    """Inverse map of ``config.theorem`` applied to one tuple."""
    t = config.theorem
    if t in (TheoremId.CIRCUMSCRIBED, TheoremId.TOP_DIMENSIONAL):
        return decompose_circumscribed(x)
    if t in (TheoremId.PIVOTED_1, TheoremId.PIVOTED_2, TheoremId.PIVOTED_CIRCLE):
        return decompose_pivoted_circle(x, config.Q, config.r0)
    if t is TheoremId.ANCHORED:
        return decompose_anchored(x, config.F)
    if t is TheoremId.ON_SPHERE:
        return decompose_on_sphere(x)
    raise UnsupportedTheoremError(f"{t.value} has no point-tuple decomposition")


def roundtrip_errors(config: TheoremConfig, count: int, rng) -> np.ndarray:
    """Max-abs error of reconstruct(decompose(x)) over ``count`` random tuples."""
    if config.theorem not in ROUNDTRIP_THEOREMS:
        raise UnsupportedTheoremError(f"{config.theorem.value} has no point-tuple decomposition")
    gen = as_generator(rng)
    errors = np.empty(count)
    for i in range(count):
        x = random_tuple(config, gen)
        errors[i] = np.abs(reconstruct(decompose(config, x)) - x).max()
    return errors


def _well_conditioned(config: TheoremConfig, param, x: np.ndarray) -> bool:
    """Away from the singular set of the chart, so central differences are accurate."""
    span = diameter(x)
    if span == 0 or simplex_volume(x) * factorial(x.shape[0] - 1) < 0.05 * span ** (x.shape[0] - 1):
        return False
    if isinstance(param, SphereOnSphereParam):
        return float(param.R) > 0.2
    r = float(param.r)
    if not 0.2 < r < 5:
        return False
    if isinstance(param, PivotedCircleParam):
        return float(param.rstar) > 0.2 * r
    return True


def random_oracle_params(config: TheoremConfig, count: int, rng, max_tries: int = 100):
    """``count`` well-conditioned parameters from decomposed random tuples."""
    if not config.chart_free:
        raise UnsupportedTheoremError(f"{config.theorem.value} {config.echo()} is not chart-free")
    gen = as_generator(rng)
    out = []
    for _ in range(count * max_tries):
        x = random_tuple(config, gen)
        if config.theorem is TheoremId.PIVOTED_CIRCLE or config.theorem is TheoremId.PIVOTED_1:
            # include the pivot so the conditioning check sees the whole configuration
            check = np.vstack([np.zeros(config.n), x])
        else:
            check = x
        try:
            param = decompose(config, x)
        except DegenerateInputError:
            continue
        if _well_conditioned(config, param, check):
            out.append(param)
            if len(out) == count:
                return out
    raise DegenerateInputError("could not draw enough well-conditioned parameters")


def oracle_errors(config: TheoremConfig, count: int, rng, h: float = FD_STEP) -> np.ndarray:
    """|closed form - FD| / closed form on ``count`` random parameters."""
    errors = np.empty(count)
    for i, param in enumerate(random_oracle_params(config, count, rng)):
        exact = float(density(config, param))
        errors[i] = abs(fd_jacobian_density(config, param, h) - exact) / exact
    return errors


# ---------------------------------------------------------------------------
# suites

@dataclass(frozen=True)
class SuiteCase:
    config: TheoremConfig
    integrand: Integrand = Integrand()
    samples: int = 10 ** 6
    proposal: ProposalSpec | None = None

    @property
    def label(self) -> str:
        dims = ",".join(f"{k}={v}" for k, v in self.config.echo().items() if k != "theorem")
        return f"{self.config.theorem.value}({dims})[{self.integrand.kind.value}]"


def run_case(case: SuiteCase, rng: RandomStream, threshold: float = DEFAULT_THRESHOLD,
             workers: int = 1) -> ComparisonVerdict:
    cfg, f = case.config, case.integrand
    echo = {**cfg.echo(), "integrand": f.echo(), "samples": case.samples}
    exact = f.exact_lhs(cfg.tuple_size, cfg.n, cfg.theorem.on_sphere)
    if exact is not None:
        lhs = EstimatorReport.exact_value(exact, {"side": "lhs"})
    else:
        lhs = estimate_lhs(f, cfg.tuple_size, cfg.n, case.samples, case.proposal, rng,
                           on_sphere=cfg.theorem.on_sphere, workers=workers)
    rhs = estimate_rhs(cfg, f, case.samples, case.proposal, rng, workers=workers)
    return compare(lhs, rhs, threshold, label=case.label, config=echo)


def run_suite(cases, seed: int = 42, threshold: float = DEFAULT_THRESHOLD,
              workers: int = 1) -> list[ComparisonVerdict]:
    """Run each case on its own substream ``(seed, index)``; errors become failed verdicts."""
    verdicts = []
    for i, case in enumerate(cases):
        try:
            verdicts.append(run_case(case, RandomStream(seed, i), threshold, workers))
        except Exception as exc:  # reported, not raised
            label = getattr(case, "label", repr(case))
            verdicts.append(ComparisonVerdict(lhs=None, rhs=None, z_score=None, passed=False,
                                              threshold=threshold, label=label,
                                              reason=f"{type(exc).__name__}: {exc}"))
    return verdicts


def gaussian_cases(samples: int = 10 ** 6) -> list[SuiteCase]:
    T = TheoremId
    specs = (
        [(T.CIRCUMSCRIBED, dict(n=n, k=k)) for n, k in [(2, 1), (2, 2), (3, 1), (3, 2), (3, 3), (4, 2)]]
        + [(T.TOP_DIMENSIONAL, dict(n=n)) for n in (1, 2, 3)]
        + [(T.PIVOTED_1, dict(n=n)) for n in (2, 3)]
        + [(T.PIVOTED_2, dict(n=n, m=m)) for n, m in [(3, 2), (4, 2)]]
        + [(T.PIVOTED_CIRCLE, dict(n=n, m=m, q=q, r0=r0))
           for n, m, q, r0 in [(3, 2, 1, 1.0), (4, 2, 1, 0.5), (3, 1, 1, 1.0)]]
        + [(T.ANCHORED, dict(n=n, m=m, k=k)) for n, m, k in [(3, 2, 1), (3, 2, 2), (4, 3, 2)]]
        + [(t, dict(n=n, k=k)) for t in (T.AFFINE_BP, T.LINEAR_BP) for n, k in [(3, 1), (3, 2)]]
    )
    return [SuiteCase(TheoremConfig(t, **kw), Integrand(), samples) for t, kw in specs]


def sphere_cases(samples: int = 10 ** 6) -> list[SuiteCase]:
    one = Integrand(IntegrandKind.CONSTANT_ON_SPHERE)
    return [SuiteCase(TheoremConfig(t, n=n, k=1), one, samples)
            for t in (TheoremId.ON_SPHERE, TheoremId.ON_SPHERE_SYMMETRIC) for n in (2, 3)]


def default_suite(samples: int = 10 ** 6) -> list[SuiteCase]:
    return gaussian_cases(samples) + sphere_cases(samples)
