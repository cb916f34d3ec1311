import numpy as np
import pytest

from reflectsde import (
    BOUNDARY,
    EXTERIOR,
    INTERIOR,
    Ball,
    BallExterior,
    Box,
    ConvexPolyhedron,
    HalfSpace,
    WholeSpace,
    unit_box,
)
from reflectsde.errors import (
    NonFiniteInput,
    NonUnitVector,
    NotOnBoundary,
    ProjectionOutOfReach,
)


def square_polyhedron():
    """Unit square via the generic constructor (exercises the active set)."""
    eye = np.eye(2)
    return ConvexPolyhedron(np.vstack([eye, -eye]), [0.0, 0.0, -1.0, -1.0])


def test_classify_examples():
    assert Ball([0, 0], 1.0).classify([0.5, 0]) == INTERIOR
    assert HalfSpace([1, 0], 0.0).classify([0, 3]) == BOUNDARY
    assert BallExterior([0, 0], 1.0).classify([0.2, 0]) == EXTERIOR


def test_classify_rejects_non_finite():
    with pytest.raises(NonFiniteInput):
        Ball([0, 0], 1.0).classify([np.nan, 0])
    with pytest.raises(NonFiniteInput):
        HalfSpace([1, 0]).classify([np.inf, 0])


def test_project_examples():
    np.testing.assert_allclose(HalfSpace([1, 0], 0.0).project([-1, 2]), [0, 2])
    np.testing.assert_allclose(Ball([0, 0], 1.0).project([2, 0]), [1, 0])


def test_square_corner_projection_against_grid_search():
    # brute-force minimization of |x - y| over the square near the corner
    sq = square_polyhedron()
    x = np.array([1.5, 1.5])
    grid = np.linspace(0.99, 1.0, 101)  # 1e-4 resolution
    gx, gy = np.meshgrid(grid, grid)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    oracle = pts[np.argmin(np.linalg.norm(pts - x, axis=1))]
    np.testing.assert_allclose(oracle, [1.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(sq.project(x), [1.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(unit_box(2).project(x), [1.0, 1.0], atol=1e-12)


def test_inward_normal_witness_examples():
    gens, cone = Ball([0, 0], 1.0).inward_normal_witness([1, 0])
    np.testing.assert_allclose(gens, [[-1, 0]])
    assert not cone
    gens, cone = BallExterior([0, 0], 1.0).inward_normal_witness([1, 0])
    np.testing.assert_allclose(gens, [[1, 0]])
    gens, cone = square_polyhedron().inward_normal_witness([0, 0])
    assert cone
    assert sorted(map(tuple, gens.tolist())) == [(0.0, 1.0), (1.0, 0.0)]


def test_witness_requires_boundary_point():
    with pytest.raises(NotOnBoundary):
        Ball([0, 0], 1.0).inward_normal_witness([0.2, 0])
    with pytest.raises(NotOnBoundary):
        WholeSpace(2).inward_normal_witness([0, 0])


def test_is_inward_normal_examples():
    assert Ball([0, 0], 1.0).is_inward_normal([1, 0], [-1, 0], 5.0)
    be = BallExterior([0, 0], 1.0)
    assert be.is_inward_normal([1, 0], [1, 0], 1.0)
    assert not be.is_inward_normal([1, 0], [1, 0], 1.5)


def test_ball_exterior_radius_by_sampling():
    # oracle for the r = 1.5 rejection: the tangent ball contains exterior pts
    rng = np.random.default_rng(1)
    x, n, r = np.array([1.0, 0.0]), np.array([1.0, 0.0]), 1.5
    center = x - r * n
    pts = center + r * rng.uniform(-1, 1, size=(20000, 2))
    inside_ball = np.linalg.norm(pts - center, axis=1) < r
    in_domain = np.linalg.norm(pts, axis=1) > 1.0
    assert np.any(inside_ball & in_domain)


def test_is_inward_normal_validation():
    with pytest.raises(NonUnitVector):
        Ball([0, 0], 1.0).is_inward_normal([1, 0], [-2, 0], 1.0)
    with pytest.raises(NotOnBoundary):
        Ball([0, 0], 1.0).is_inward_normal([0.5, 0], [-1, 0], 1.0)


def _boundary_samples(domain, rng, count=20):
    if isinstance(domain, HalfSpace):
        tang = rng.normal(size=(count, domain.dim))
        tang -= np.outer(tang @ domain.a, domain.a)
        return domain.c * domain.a + tang
    if isinstance(domain, (Ball, BallExterior)):
        v = rng.normal(size=(count, domain.dim))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return domain.center + domain.radius * v
    # box: clamp interior samples onto a random face
    pts = rng.uniform(0.0, 1.0, size=(count, domain.dim))
    for i in range(count):
        j = rng.integers(domain.dim)
        pts[i, j] = float(rng.integers(2))
    return pts


def test_condition_a_holds_with_stored_r0():
    rng = np.random.default_rng(5)
    domains = [
        HalfSpace([0.6, 0.8], 0.3),
        Ball([0.5, -0.5], 2.0),
        BallExterior([0, 0], 1.0),
        unit_box(2),
    ]
    for domain in domains:
        r_candidates = (
            [0.1, 1.0, 25.0]
            if not np.isfinite(domain.r0)
            else [0.1 * domain.r0, 0.5 * domain.r0, domain.r0]
        )
        for x in _boundary_samples(domain, rng):
            gens, _ = domain.inward_normal_witness(x)
            for n in gens:
                for r in r_candidates:
                    assert domain.is_inward_normal(x, n, r)


def test_projection_idempotent_and_consistent():
    rng = np.random.default_rng(6)
    domains = [
        WholeSpace(3),
        HalfSpace([0, 1], -0.5),
        Ball([1, 1], 0.7),
        BallExterior([0, 0], 1.0),
        unit_box(2),
        square_polyhedron(),
    ]
    for domain in domains:
        for _ in range(50):
            x = rng.normal(0, 2, size=domain.dim)
            if isinstance(domain, BallExterior) and np.linalg.norm(x) == 0:
                continue
            y = domain.project(x)
            np.testing.assert_allclose(domain.project(y), y, atol=1e-12)
            assert domain.classify(y) in (INTERIOR, BOUNDARY)


def test_convex_projection_variational_inequality():
    rng = np.random.default_rng(7)
    domains = [HalfSpace([0.6, 0.8], 0.1), Ball([0, 0], 1.5), unit_box(2)]
    for domain in domains:
        for _ in range(10):
            x = rng.normal(0, 3, size=2)
            y = domain.project(x)
            for _ in range(100):
                z = domain.project(rng.normal(0, 3, size=2))
                assert (x - y) @ (z - y) <= 1e-9


def test_ball_exterior_projection_out_of_reach():
    be = BallExterior([0, 0], 1.0)
    with pytest.raises(ProjectionOutOfReach):
        be.project([0.0, 0.0])


def test_polyhedron_requires_interior():
    with pytest.raises(ValueError):
        ConvexPolyhedron([[1.0, 0.0], [-1.0, 0.0]], [1.0, 1.0])  # x>1 and x<-1


def test_constructor_validation():
    with pytest.raises(ValueError):
        Ball([0, 0], -1.0)
    with pytest.raises(ValueError):
        HalfSpace([2, 0], 0.0)
    with pytest.raises(ValueError):
        Box([0, 0], [1, -1])


def test_metadata():
    assert np.isinf(Ball([0, 0], 1.0).r0)
    be = BallExterior([0, 0], 2.0)
    assert be.r0 == 2.0
    assert be.delta < be.radius and be.beta >= 1.0
    assert not be.f_is_zero and be.gamma is None
    assert unit_box(2).f_is_zero and unit_box(2).gamma > 0
