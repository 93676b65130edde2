import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from spherebp.errors import DegenerateInputError, InvalidInputError
from spherebp.geometry import (
    AffineFlat,
    AnchoredParam,
    CircumscribedParam,
    PivotedCircleParam,
    SphereOnSphereParam,
    decompose_anchored,
    decompose_circumscribed,
    decompose_on_sphere,
    decompose_pivoted_circle,
    orthocomplement,
    project_onto,
    reconstruct,
    reconstruct_anchored,
    reconstruct_circumscribed,
    reconstruct_on_sphere,
    reconstruct_pivoted_circle,
    simplex_volume,
)
from spherebp.measures import sample_frame, sample_unit_sphere


def cayley_menger_volume(pts):
    """Independent oracle: k-volume from pairwise squared distances."""
    pts = np.asarray(pts, float)
    k = len(pts) - 1
    d2 = ((pts[:, None] - pts[None]) ** 2).sum(-1)
    cm = np.ones((k + 2, k + 2))
    cm[0, 0] = 0.0
    cm[1:, 1:] = d2
    coef = (-1) ** (k + 1) / (2 ** k * math.factorial(k) ** 2)
    return math.sqrt(max(coef * np.linalg.det(cm), 0.0))


def random_rotation(n, rng):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


# -- simplex volume ---------------------------------------------------------

def test_volume_examples():
    assert simplex_volume([[0, 0], [1, 0], [0, 1]]) == pytest.approx(0.5)
    assert simplex_volume([[1, 0], [0, 1]], pivot=[0, 0]) == pytest.approx(0.5)
    assert simplex_volume([[0, 0], [1, 1], [2, 2]]) == pytest.approx(0.0, abs=1e-15)


def test_volume_matches_cayley_menger():
    rng = np.random.default_rng(1)
    for _ in range(50):
        pts = rng.standard_normal((4, 3))
        assert_allclose(simplex_volume(pts), cayley_menger_volume(pts), rtol=1e-10, atol=1e-12)
    # lower-dimensional simplex in higher ambient space
    pts = rng.standard_normal((3, 5))
    assert_allclose(simplex_volume(pts), cayley_menger_volume(pts), rtol=1e-10)


def test_volume_rejects_bad_input():
    with pytest.raises(InvalidInputError):
        simplex_volume([[0, 0], [1, 0, 0]])
    with pytest.raises(InvalidInputError):
        simplex_volume([[0, 0], [1, np.nan]])
    with pytest.raises(InvalidInputError):
        simplex_volume([[0, 0], [1, 0]], pivot=[0, 0, 0])


def test_volume_batches():
    rng = np.random.default_rng(2)
    pts = rng.standard_normal((7, 3, 4))
    batched = simplex_volume(pts)
    assert_allclose(batched, [simplex_volume(p) for p in pts])


points_st = st.integers(1, 4).flatmap(
    lambda n: st.integers(1, n).flatmap(
        lambda k: st.lists(st.lists(st.floats(-10, 10), min_size=n, max_size=n),
                           min_size=k + 1, max_size=k + 1)))


@settings(max_examples=200, deadline=None)
@given(points_st, st.floats(0.1, 10), st.randoms(use_true_random=False))
def test_volume_invariances(pts, lam, rnd):
    pts = np.asarray(pts)
    k = len(pts) - 1
    vol = simplex_volume(pts)
    scale = max(1.0, np.abs(pts).max()) ** k
    perm = list(range(len(pts)))
    rnd.shuffle(perm)
    assert_allclose(simplex_volume(pts[perm]), vol, atol=1e-9 * scale)
    rot = random_rotation(pts.shape[1], np.random.default_rng(rnd.randint(0, 2 ** 32)))
    assert_allclose(simplex_volume(pts @ rot.T), vol, atol=1e-9 * scale)
    assert_allclose(simplex_volume(lam * pts), lam ** k * vol, rtol=1e-9, atol=1e-9 * scale * lam ** k)


# -- projections and complements --------------------------------------------

def test_project_onto_examples():
    assert_allclose(project_onto(np.eye(3)[:, :1], [3, 4, 5]), [3, 0, 0])
    assert_allclose(project_onto(np.eye(3), [3, 4, 5]), [3, 4, 5])
    assert_allclose(project_onto(np.array([[1.0], [1.0]]) / math.sqrt(2), [1, 0]), [0.5, 0.5])
    with pytest.raises(InvalidInputError):
        project_onto(np.eye(3)[:, :1], [1, 2])


def test_orthocomplement():
    perp = orthocomplement(np.eye(2)[:, :1])
    assert perp.shape == (2, 1)
    assert_allclose(np.abs(perp[:, 0]), [0, 1], atol=1e-15)
    assert orthocomplement(np.eye(4)).shape == (4, 0)
    rng = np.random.default_rng(3)
    f = sample_frame(2, 5, rng)
    g = orthocomplement(f)
    assert g.shape == (5, 3)
    assert np.abs(f.T @ g).max() < 1e-12
    both = np.hstack([f, g])
    assert_allclose(both.T @ both, np.eye(5), atol=1e-12)


def test_affine_flat_validation():
    with pytest.raises(InvalidInputError):
        AffineFlat(np.eye(3)[:, :1], np.array([1.0, 0, 0]))
    with pytest.raises(InvalidInputError):
        AffineFlat(np.array([[1.0], [1.0]]), np.zeros(2))
    flat = AffineFlat.through([1.0, 2.0, 3.0], np.eye(3)[:, :2])
    assert_allclose(flat.offset, [0, 0, 3])


# -- circumscribed ------------------------------------------------------------

def test_decompose_circumscribed_examples():
    p = decompose_circumscribed([[0, 0], [2, 0]])
    assert_allclose(p.z, [1, 0], atol=1e-15)
    assert p.r == pytest.approx(1.0)
    assert_allclose(np.abs(p.L[:, 0]), [1, 0])
    assert_allclose(p.u, [[-1, 0], [1, 0]], atol=1e-15)

    p = decompose_circumscribed([[0, 0], [1, 0], [0, 1]])
    assert_allclose(p.z, [0.5, 0.5])
    assert p.r == pytest.approx(math.sqrt(2) / 2)


def test_circumscribed_equidistant_and_in_hull():
    rng = np.random.default_rng(4)
    for n, k in [(2, 1), (3, 2), (4, 2), (5, 3), (3, 3)]:
        x = rng.standard_normal((k + 1, n))
        p = decompose_circumscribed(x)
        dist = np.linalg.norm(x - p.z, axis=1)
        assert np.ptp(dist) < 1e-10
        # z - x0 lies in the edge span
        edges = (x[1:] - x[0]).T
        coef, *_ = np.linalg.lstsq(edges, p.z - x[0], rcond=None)
        assert_allclose(edges @ coef, p.z - x[0], atol=1e-10)
        assert_allclose(reconstruct_circumscribed(p), x, atol=1e-12)


def test_reconstruct_circumscribed_scaling():
    u = np.array([[1.0, 0], [0, 1], [-1, 0]])
    p = CircumscribedParam(z=np.array([1.0, 1.0]), L=np.eye(2), r=np.float64(2.0), u=u)
    x = reconstruct_circumscribed(p)
    assert_allclose(np.linalg.norm(x - p.z, axis=1), 2.0)


def test_decompose_circumscribed_degenerate():
    with pytest.raises(DegenerateInputError):
        decompose_circumscribed([[0, 0], [1, 1], [2, 2]])
    with pytest.raises(DegenerateInputError):
        decompose_circumscribed([[1, 2, 3], [1, 2, 3]])


# -- pivoted circle -----------------------------------------------------------

def test_decompose_pivoted_examples():
    p = decompose_pivoted_circle([[2, 0], [0, 2]])
    assert_allclose(p.rstar * p.z, [1, 1])
    assert p.r == pytest.approx(math.sqrt(2))
    assert_allclose(p.z, np.array([1, 1]) / math.sqrt(2))


def test_pivoted_without_circle_is_sphere_through_origin():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((3, 3))
    p = decompose_pivoted_circle(x)
    q = decompose_circumscribed(np.vstack([np.zeros(3), x]))
    assert_allclose(p.rstar * p.z, q.z, atol=1e-10)
    assert p.r == pytest.approx(q.r)


def test_pivoted_residuals():
    rng = np.random.default_rng(6)
    for n, m, q, r0 in [(3, 2, 1, 1.0), (4, 2, 1, 0.5), (3, 1, 1, 1.0), (5, 2, 2, 0.7)]:
        Q = sample_frame(q, n, rng)
        x = rng.standard_normal((m, n))
        p = decompose_pivoted_circle(x, Q, r0)
        c = p.rstar * p.z
        res = ((c - x) ** 2).sum(1) - c @ c - r0 ** 2
        assert np.abs(res).max() < 1e-10
        assert np.abs(Q.T @ c).max() < 1e-12
        assert p.r ** 2 == pytest.approx(r0 ** 2 + c @ c, abs=1e-10)
        assert np.abs(p.L.T @ Q).max() < 1e-12
        assert_allclose(reconstruct_pivoted_circle(p), x, atol=1e-12)
        # every point of the fixed circle is on the sphere too
        w = sample_unit_sphere(q, rng)
        on_circle = r0 * (Q @ w)
        assert np.linalg.norm(on_circle - c) == pytest.approx(p.r)


def test_reconstruct_pivoted_special_cases():
    Q = np.eye(3)[:, 2:]
    u = np.array([[0.0, 1, 0], [0, 0, 1]])
    p = PivotedCircleParam(Q=Q, r0=1.0, L=np.eye(3)[:, :2], r=np.float64(1.0),
                           z=np.array([1.0, 0, 0]), u=u)
    assert_allclose(reconstruct_pivoted_circle(p), u)
    p2 = PivotedCircleParam(Q=np.zeros((2, 0)), r0=0.0, L=np.eye(2), r=np.float64(3.0),
                            z=np.array([1.0, 0]), u=np.array([[0.0, 1], [-1, 0]]))
    assert_allclose(reconstruct_pivoted_circle(p2), 3.0 * p2.z + 3.0 * p2.u)


def test_decompose_pivoted_rejects():
    with pytest.raises(InvalidInputError):
        decompose_pivoted_circle(np.ones((3, 3)), np.eye(3)[:, :1], 1.0)
    with pytest.raises(InvalidInputError):
        decompose_pivoted_circle([[1.0, 0.0]], None, 1.0)
    with pytest.raises(DegenerateInputError):
        decompose_pivoted_circle([[1.0, 1.0], [2.0, 2.0]])


# -- anchored -----------------------------------------------------------------

def test_anchored_symmetric_example():
    F = AffineFlat(np.eye(2)[:, :1], np.zeros(2))
    p = decompose_anchored([[0, 1], [0, -1]], F)
    assert_allclose(p.z, [0, 0], atol=1e-15)
    assert p.r == pytest.approx(1.0)


def test_anchored_full_flat_is_circumscribed():
    rng = np.random.default_rng(7)
    for n, k in [(3, 3), (3, 1), (4, 2)]:
        F = AffineFlat(np.eye(n), np.zeros(n))
        x = rng.standard_normal((k + 1, n))
        a, c = decompose_anchored(x, F), decompose_circumscribed(x)
        assert_allclose(a.z, c.z, atol=1e-10)
        assert a.r == pytest.approx(c.r, abs=1e-10)
        assert_allclose(a.u, c.u, atol=1e-10)


def test_anchored_perturbation_oracle():
    rng = np.random.default_rng(8)
    for n, m, k in [(3, 2, 1), (4, 3, 1), (5, 3, 2), (4, 3, 3)]:
        D = sample_frame(m, n, rng)
        F = AffineFlat.through(rng.standard_normal(n), D)
        x = rng.standard_normal((k + 1, n))
        p = decompose_anchored(x, F)
        assert np.abs(F.project(p.z) - p.z).max() < 1e-12
        dist = np.linalg.norm(x - p.z, axis=1)
        assert np.ptp(dist) < 1e-10
        # u lies in span(P) + F-perp
        basis = np.hstack([p.P, F.normal_frame()])
        assert np.abs(project_onto(basis, p.u) - p.u).max() < 1e-10
        # directions in F orthogonal to P keep equidistance; the radius is stationary along them
        free = D @ orthocomplement(D.T @ p.P) if k < m else np.zeros((n, 0))
        for w in free.T:
            eps = 1e-4
            d_plus = np.linalg.norm(x - (p.z + eps * w), axis=1)
            d_minus = np.linalg.norm(x - (p.z - eps * w), axis=1)
            assert np.ptp(d_plus) < 1e-9
            grad = (d_plus[0] - d_minus[0]) / (2 * eps)
            assert abs(grad) < 1e-8
            assert d_plus[0] > dist[0] and d_minus[0] > dist[0]
        assert_allclose(reconstruct_anchored(p), x, atol=1e-12)


def test_anchored_point_case():
    F = AffineFlat(np.eye(3)[:, :2], np.zeros(3))
    p = decompose_anchored([[1.0, 2.0, 3.0]], F)
    assert_allclose(p.z, [1, 2, 0])
    assert p.r == pytest.approx(3.0)


def test_anchored_rejects():
    F = AffineFlat(np.eye(3)[:, :1], np.zeros(3))
    with pytest.raises(InvalidInputError):
        decompose_anchored(np.eye(3), F)
    F2 = AffineFlat(np.eye(3)[:, :2], np.zeros(3))
    # both points project to the same spot of F
    with pytest.raises(DegenerateInputError):
        decompose_anchored([[1.0, 1.0, 0.0], [1.0, 1.0, 2.0]], F2)


# -- on the sphere ------------------------------------------------------------

def test_decompose_on_sphere_example():
    p = decompose_on_sphere([[1, 0, 0], [0, 1, 0]])
    assert_allclose(p.p, [0.5, 0.5, 0])
    assert float(p.R) == pytest.approx(math.sqrt(0.5))
    assert_allclose(p.u, np.array([[1, -1, 0], [-1, 1, 0]]) / math.sqrt(2))


def test_great_subsphere_and_pole():
    p = decompose_on_sphere([[1, 0, 0], [-1, 0, 0]])
    assert float(p.R) == pytest.approx(1.0)
    pole = SphereOnSphereParam(sigma=np.eye(3)[:, :1], p=np.array([0.0, 0.0, 1.0]),
                               u=np.array([[1.0, 0, 0], [-1.0, 0, 0]]))
    assert_allclose(reconstruct_on_sphere(pole), [[0, 0, 1], [0, 0, 1]])


def test_on_sphere_round_trip_unit_norm():
    rng = np.random.default_rng(9)
    for n, k in [(2, 1), (2, 2), (3, 1), (4, 3)]:
        x = sample_unit_sphere(n + 1, rng, k + 1)
        p = decompose_on_sphere(x)
        y = reconstruct_on_sphere(p)
        assert_allclose(y, x, atol=1e-12)
        assert np.abs(np.linalg.norm(p.p + float(p.R) * p.u, axis=1) - 1).max() < 1e-10
        assert np.abs(p.sigma.T @ p.p).max() < 1e-12


def test_on_sphere_rejects_off_sphere():
    with pytest.raises(InvalidInputError):
        decompose_on_sphere([[2, 0, 0], [0, 1, 0]])


# -- round trips in the parameter -> tuple -> parameter direction -------------

def test_param_round_trip_gauge_free():
    rng = np.random.default_rng(10)
    n, k = 4, 2
    L = sample_frame(k, n, rng)
    u = sample_unit_sphere(k, rng, k + 1) @ L.T
    p = CircumscribedParam(z=rng.standard_normal(n), L=L, r=np.float64(1.7), u=u)
    back = decompose_circumscribed(reconstruct(p))
    assert_allclose(back.z, p.z, atol=1e-9)
    assert back.r == pytest.approx(1.7, abs=1e-9)
    assert_allclose(back.L @ back.L.T, L @ L.T, atol=1e-9)

    Q = np.eye(n)[:, 3:]
    Lp = np.eye(n)[:, :2]
    z = np.array([0.6, 0.8, 0, 0])
    u = sample_unit_sphere(3, rng, 2) @ np.hstack([Lp, Q]).T
    pp = PivotedCircleParam(Q=Q, r0=0.5, L=Lp, r=np.float64(1.3), z=z, u=u)
    back = decompose_pivoted_circle(reconstruct(pp), Q, 0.5)
    assert back.r == pytest.approx(1.3, abs=1e-9)
    assert_allclose(back.z, z, atol=1e-9)
    assert_allclose(back.L @ back.L.T, Lp @ Lp.T, atol=1e-9)

    F = AffineFlat(np.eye(n)[:, :3], np.array([0, 0, 0, 2.0]))
    pa = AnchoredParam(F=F, z=np.array([1.0, 0, 0, 2.0]), r=np.float64(2.0),
                       P=np.eye(n)[:, :3], u=sample_unit_sphere(n, rng, 4))
    back = decompose_anchored(reconstruct(pa), F)
    assert_allclose(back.z, pa.z, atol=1e-9)
    assert back.r == pytest.approx(2.0, abs=1e-9)
