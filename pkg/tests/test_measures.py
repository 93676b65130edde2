import math

import mpmath
import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import stats

from spherebp.errors import InvalidInputError
from spherebp.geometry import reconstruct
from spherebp.measures import (
    ProposalSpec,
    RandomStream,
    ball_volume,
    grassmannian_measure,
    sample_ball,
    sample_frame,
    sample_param,
    sample_unit_sphere,
    sphere_surface_area,
    symmetric_prefactor,
)
from spherebp.theorems import TheoremConfig, TheoremId


def mp_sigma(n):
    return 2 * mpmath.power(mpmath.pi, mpmath.mpf(n) / 2) / mpmath.gamma(mpmath.mpf(n) / 2)


def mp_grassmannian(k, n):
    """Full product from the definition, in 50-digit arithmetic."""
    num = mpmath.fprod(mp_sigma(n - i) for i in range(k))
    den = mpmath.fprod(mp_sigma(i) for i in range(1, k + 1))
    return num / den


# -- constants ----------------------------------------------------------------

def test_sphere_surface_area_examples():
    assert sphere_surface_area(1) == 2.0
    assert sphere_surface_area(2) == pytest.approx(2 * math.pi, rel=1e-15)
    assert sphere_surface_area(3) == pytest.approx(4 * math.pi, rel=1e-15)
    assert sphere_surface_area(4) == pytest.approx(2 * math.pi ** 2, rel=1e-15)
    with pytest.raises(InvalidInputError):
        sphere_surface_area(0)


def test_sphere_surface_area_vs_mpmath():
    mpmath.mp.dps = 50
    for n in range(1, 21):
        assert sphere_surface_area(n) == pytest.approx(float(mp_sigma(n)), rel=1e-13)


def test_ball_volume():
    assert ball_volume(0) == 1.0
    assert ball_volume(2) == pytest.approx(math.pi)
    assert ball_volume(3, 2.0) == pytest.approx(4 / 3 * math.pi * 8)


def test_grassmannian_examples():
    assert grassmannian_measure(1, 2) == pytest.approx(math.pi, rel=1e-15)
    assert grassmannian_measure(2, 4) == pytest.approx(2 * math.pi ** 2, rel=1e-15)
    for n in range(0, 6):
        assert grassmannian_measure(0, n) == 1.0
    with pytest.raises(InvalidInputError):
        grassmannian_measure(3, 2)


def test_grassmannian_vs_mpmath_and_duality():
    mpmath.mp.dps = 50
    for n in range(1, 13):
        for k in range(n + 1):
            value = grassmannian_measure(k, n)
            assert value == grassmannian_measure(n - k, n)
            assert value == pytest.approx(float(mp_grassmannian(k, n)), rel=1e-12)
            # the dual side of the definition, evaluated independently
            assert value == pytest.approx(float(mp_grassmannian(n - k, n)), rel=1e-12)


def test_symmetric_prefactor():
    assert symmetric_prefactor(1, 2) == pytest.approx(2 * math.pi ** 2)


# -- RNG ---------------------------------------------------------------------

def test_random_stream_determinism():
    a = RandomStream(42, 3).generator(1, 2).standard_normal(5)
    b = RandomStream(42, 3).generator(1, 2).standard_normal(5)
    c = RandomStream(42, 4).generator(1, 2).standard_normal(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    with pytest.raises(InvalidInputError):
        RandomStream(1, -1)


# -- sphere and Grassmannian samplers ----------------------------------------

def test_unit_sphere_norm_and_mean():
    rng = np.random.default_rng(11)
    for dim in (2, 3, 5):
        x = sample_unit_sphere(dim, rng, 10 ** 6)
        assert np.abs(np.linalg.norm(x, axis=1) - 1).max() < 1e-12
        # each coordinate has variance 1/dim
        bound = 4 * math.sqrt(1 / dim) / math.sqrt(10 ** 6)
        assert np.abs(x.mean(0)).max() < bound


def test_unit_sphere_dim_one():
    x = sample_unit_sphere(1, np.random.default_rng(12), 10 ** 6)
    assert set(np.unique(x)) == {-1.0, 1.0}
    assert 0.497 <= (x > 0).mean() <= 0.503


def test_sample_frame_orthonormal():
    rng = np.random.default_rng(13)
    f = sample_frame(3, 6, rng, 100)
    gram = np.swapaxes(f, -1, -2) @ f
    assert np.abs(gram - np.eye(3)).max() < 1e-12
    full = sample_frame(4, 4, rng)
    assert_allclose(full @ full.T, np.eye(4), atol=1e-12)


def test_sample_frame_rotation_invariant():
    rng = np.random.default_rng(14)
    n, N = 4, 10 ** 5
    f = sample_frame(2, n, rng, N)
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    rot = q * np.sign(np.diag(r))
    g = sample_frame(2, n, rng, N)
    # squared cosine of the first basis vector with e1, rotated sample vs a fresh one
    a = (rot @ f)[:, 0, 0] ** 2
    b = g[:, 0, 0] ** 2
    d = stats.ks_2samp(a, b).statistic
    crit = 1.628 * math.sqrt(2 / N)  # 1% level
    assert d < crit
    # and the statistic follows Beta(1/2, (n-1)/2)
    assert stats.kstest(a, stats.beta(0.5, (n - 1) / 2).cdf).pvalue > 0.01


def test_sample_ball_inside():
    x = sample_ball(3, np.random.default_rng(15), 10 ** 5)
    r = np.linalg.norm(x, axis=1)
    assert r.max() <= 1.0
    # P(|x| < 1/2) = 1/8
    assert abs((r < 0.5).mean() - 0.125) < 4 * math.sqrt(0.125 * 0.875 / 10 ** 5)


# -- proposals and parameter sampler -----------------------------------------

def test_half_normal_weight_toy():
    spec = ProposalSpec(mode="independent")
    r, pdf = spec.sample_radius(np.random.default_rng(16), (10 ** 5,))
    vals = np.exp(-r) / pdf
    se = vals.std() / math.sqrt(vals.size)
    assert abs(vals.mean() - 1.0) < 3 * se


@pytest.mark.parametrize("law", ["half-normal", "gamma", "uniform"])
def test_radial_laws_normalized(law):
    spec = ProposalSpec(radial_law=law, rmax=3.0)
    r = np.linspace(0, 40, 400001)
    assert np.trapezoid(np.exp(spec.radius_logpdf(r)), r) == pytest.approx(1.0, abs=1e-3)


def test_proposal_validation():
    with pytest.raises(InvalidInputError):
        ProposalSpec(radial_scale=0)
    with pytest.raises(InvalidInputError):
        ProposalSpec(radial_law="cauchy")
    with pytest.raises(InvalidInputError):
        ProposalSpec(mode="adaptive")


CONFIGS = [
    TheoremConfig(TheoremId.LINEAR_BP, n=3, k=2),
    TheoremConfig(TheoremId.AFFINE_BP, n=3, k=1),
    TheoremConfig(TheoremId.CIRCUMSCRIBED, n=4, k=2),
    TheoremConfig(TheoremId.TOP_DIMENSIONAL, n=3),
    TheoremConfig(TheoremId.PIVOTED_1, n=3),
    TheoremConfig(TheoremId.PIVOTED_2, n=4, m=2),
    TheoremConfig(TheoremId.PIVOTED_CIRCLE, n=4, m=2, q=1, r0=0.5),
    TheoremConfig(TheoremId.ANCHORED, n=4, k=2, m=3),
    TheoremConfig(TheoremId.ON_SPHERE, n=3, k=2),
    TheoremConfig(TheoremId.ON_SPHERE_SYMMETRIC, n=3, k=1),
]


@pytest.mark.parametrize("mode", ["conditional", "independent"])
@pytest.mark.parametrize("config", CONFIGS, ids=lambda c: c.theorem.value)
def test_sample_param_invariants(config, mode):
    param, w = sample_param(config, ProposalSpec(mode=mode), RandomStream(5), 2000)
    assert w.shape == (2000,)
    assert np.all(np.isfinite(w)) and np.all(w > 0)
    u = np.asarray(param.u)
    if config.theorem not in (TheoremId.LINEAR_BP, TheoremId.AFFINE_BP):
        assert np.abs(np.linalg.norm(u, axis=-1) - 1).max() < 1e-12
    for name in ("L", "sigma", "P"):
        frame = getattr(param, name, None)
        if frame is not None and np.asarray(frame).shape[-1] > 0:
            gram = np.swapaxes(frame, -1, -2) @ frame
            assert np.abs(gram - np.eye(gram.shape[-1])).max() < 1e-12
    if config.theorem is TheoremId.PIVOTED_CIRCLE:
        assert np.all(param.r >= param.r0)
        assert np.abs(np.swapaxes(param.L, -1, -2) @ param.Q).max() < 1e-12
        assert np.abs(np.linalg.norm(param.z, axis=-1) - 1).max() < 1e-12
    if config.theorem is TheoremId.ON_SPHERE:
        assert np.all(np.linalg.norm(param.p, axis=-1) <= 1)
        assert np.abs(np.linalg.norm(reconstruct(param), axis=-1) - 1).max() < 1e-12
    if config.theorem is TheoremId.ANCHORED:
        F = config.F
        assert np.abs(F.project(param.z) - param.z).max() < 1e-12


def test_top_dimensional_draws_no_grassmannian():
    param, _ = sample_param(TheoremConfig(TheoremId.TOP_DIMENSIONAL, n=3), ProposalSpec(),
                            RandomStream(1), 10)
    assert np.all(param.L == np.eye(3))


def test_sample_param_deterministic():
    cfg = TheoremConfig(TheoremId.ANCHORED, n=3, k=1, m=2)
    a, wa = sample_param(cfg, ProposalSpec(), RandomStream(9, 2), 100)
    b, wb = sample_param(cfg, ProposalSpec(), RandomStream(9, 2), 100)
    assert np.array_equal(wa, wb)
    assert np.array_equal(a.u, b.u)


def test_sphere_total_measure_folded_into_weight():
    # E[weight] is the total parameter measure for on-sphere samplers (p uniform in a ball)
    cfg = TheoremConfig(TheoremId.ON_SPHERE, n=2, k=1)
    _, w = sample_param(cfg, ProposalSpec(), RandomStream(3), 10)
    expected = grassmannian_measure(1, 3) * ball_volume(2) * sphere_surface_area(1) ** 2
    assert_allclose(w, expected)
