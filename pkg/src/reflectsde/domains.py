"""Domains with membership, nearest-point projection and inward-normal queries.

Built-in kinds: whole space, half-space, open ball, ball exterior and convex
polyhedra (with an axis-aligned ``Box`` fast path).  Every kind carries the
geometric metadata used by the reflection solvers: the exterior-sphere radius
``r0`` (infinite for convex kinds), the uniform-cone parameters ``delta`` and
``beta``, and the convexity-control constant ``gamma`` where available.

All objects are immutable after construction and all queries are pure, so
they can be shared freely between concurrent workers.
"""

from itertools import combinations

import numpy as np
from scipy.optimize import linprog, nnls

from .errors import (
    NonFiniteInput,
    NonUnitVector,
    NotOnBoundary,
    ProjectionOutOfReach,
)

INTERIOR = "interior"
BOUNDARY = "boundary"
EXTERIOR = "exterior"

_UNIT_TOL = 1e-9


def _as_point(x, dim):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (dim,):
        raise ValueError(f"expected a point in R^{dim}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("point has NaN or infinite coordinates")
    return x


class Domain:
    """Base class.  Subclasses set ``dim`` and the condition metadata."""

    dim: int
    r0: float = np.inf           # exterior-sphere radius (condition (A))
    delta: float = 1.0           # uniform-cone reach (condition (B))
    beta: float = 1.0            # uniform-cone aperture (condition (B))
    gamma = 1.0                  # convexity-control constant, None if unknown
    f_is_zero: bool = True       # convexity-control function vanishes
    eps_bd: float = 1e-10        # boundary band, scaled by (1 + |x|)

    def boundary_tol(self, x):
        return self.eps_bd * (1.0 + float(np.linalg.norm(x)))

    # -- queries implemented per kind ------------------------------------
    def _boundary_distance(self, x):
        """Distance from x to the boundary (np.inf if there is none)."""
        raise NotImplementedError

    def _strictly_inside(self, x):
        raise NotImplementedError

    def project_many(self, x):
        """Nearest point of the closure for an array of shape (..., dim)."""
        raise NotImplementedError

    # -- shared operations -----------------------------------------------
    def classify(self, x):
        x = _as_point(x, self.dim)
        if self._boundary_distance(x) <= self.boundary_tol(x):
            return BOUNDARY
        return INTERIOR if self._strictly_inside(x) else EXTERIOR

    def project(self, x):
        x = _as_point(x, self.dim)
        return self.project_many(x[None, :])[0]

    def inward_normal_witness(self, x):
        """Generators of the inward normal cone at a boundary point.

        Returns ``(generators, is_cone)`` where generators is an array of
        unit vectors of shape (k, dim) and ``is_cone`` is True when the
        normal set is a genuine cone (more than one generator).
        """
        x = _as_point(x, self.dim)
        if self.classify(x) != BOUNDARY:
            raise NotOnBoundary(f"{x} is not on the boundary")
        gens = self._normal_generators(x)
        return gens, len(gens) > 1

    def _normal_generators(self, x):
        raise NotImplementedError

    def is_inward_normal(self, x, n, r):
        """True iff the open ball of radius r tangent at x in direction -n
        misses the domain, decided analytically per kind."""
        x = _as_point(x, self.dim)
        n = np.asarray(n, dtype=float).reshape(-1)
        if abs(np.linalg.norm(n) - 1.0) > _UNIT_TOL:
            raise NonUnitVector(f"|n| = {np.linalg.norm(n)} is not 1")
        if r <= 0:
            raise ValueError("r must be positive")
        if self.classify(x) != BOUNDARY:
            raise NotOnBoundary(f"{x} is not on the boundary")
        return self._exterior_ball_misses(x, n, float(r))

    def _exterior_ball_misses(self, x, n, r):
        raise NotImplementedError


class WholeSpace(Domain):
    """All of R^d; the boundary is empty, so reflection never acts."""

    def __init__(self, dim):
        self.dim = int(dim)

    def _boundary_distance(self, x):
        return np.inf

    def _strictly_inside(self, x):
        return True

    def project_many(self, x):
        return np.asarray(x, dtype=float)

    def _normal_generators(self, x):  # pragma: no cover - unreachable
        raise NotOnBoundary("the whole space has no boundary")

    def _exterior_ball_misses(self, x, n, r):  # pragma: no cover
        raise NotOnBoundary("the whole space has no boundary")


class HalfSpace(Domain):
    """D = {x : a.x > c} for a unit normal a."""

    def __init__(self, a, c=0.0):
        a = np.asarray(a, dtype=float).reshape(-1)
        if abs(np.linalg.norm(a) - 1.0) > 1e-12:
            raise ValueError("half-space normal must be a unit vector")
        self.a = a
        self.a.setflags(write=False)
        self.c = float(c)
        self.dim = a.size

    def _slack(self, x):
        return float(self.a @ x) - self.c

    def _boundary_distance(self, x):
        return abs(self._slack(x))

    def _strictly_inside(self, x):
        return self._slack(x) > 0.0

    def project_many(self, x):
        x = np.asarray(x, dtype=float)
        s = x @ self.a - self.c
        return x - np.minimum(s, 0.0)[..., None] * self.a

    def _normal_generators(self, x):
        return self.a[None, :].copy()

    def _exterior_ball_misses(self, x, n, r):
        # The ball B(x - r n, r) lies in {a.y <= c} iff a.(x - r n) + r <= c.
        tol = 1e-9 * (1.0 + np.linalg.norm(x) + r)
        return float(self.a @ (x - r * n)) + r <= self.c + tol


class Ball(Domain):
    """Open ball of given center and radius (a convex domain)."""

    def __init__(self, center, radius):
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.center = np.asarray(center, dtype=float).reshape(-1)
        self.center.setflags(write=False)
        self.radius = float(radius)
        self.dim = self.center.size

    def _boundary_distance(self, x):
        return abs(np.linalg.norm(x - self.center) - self.radius)

    def _strictly_inside(self, x):
        return np.linalg.norm(x - self.center) < self.radius

    def project_many(self, x):
        x = np.asarray(x, dtype=float)
        v = x - self.center
        d = np.linalg.norm(v, axis=-1)
        outside = d > self.radius
        if not np.any(outside):
            return x.copy()
        out = x.copy()
        scale = (self.radius / d[outside])[..., None]
        out[outside] = self.center + v[outside] * scale
        return out

    def _normal_generators(self, x):
        n = self.center - x
        return (n / np.linalg.norm(n))[None, :]

    def _exterior_ball_misses(self, x, n, r):
        tol = 1e-9 * (1.0 + np.linalg.norm(x) + r)
        return np.linalg.norm(x - r * n - self.center) >= self.radius + r - tol


class BallExterior(Domain):
    """Complement of a closed ball; the model non-convex kind.

    The exterior-sphere radius equals the removed ball's radius, so the
    nearest-point projection is only defined within reach ``r0`` (the ball
    center is the unique unreachable point).  No convexity-control function
    is known for this kind, hence ``gamma`` is None.
    """

    f_is_zero = False
    gamma = None

    def __init__(self, center, radius):
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.center = np.asarray(center, dtype=float).reshape(-1)
        self.center.setflags(write=False)
        self.radius = float(radius)
        self.dim = self.center.size
        self.r0 = self.radius
        self.delta = 0.5 * self.radius
        # aperture of the normal cone over a delta-cap of the sphere
        self.beta = 1.0 / np.cos(2.0 * np.arcsin(self.delta / (2.0 * self.radius)))

    def _boundary_distance(self, x):
        return abs(np.linalg.norm(x - self.center) - self.radius)

    def _strictly_inside(self, x):
        return np.linalg.norm(x - self.center) > self.radius

    def project_many(self, x):
        x = np.asarray(x, dtype=float)
        v = x - self.center
        d = np.linalg.norm(v, axis=-1)
        inside = d < self.radius
        if not np.any(inside):
            return x.copy()
        if np.any(d[inside] == 0.0):
            raise ProjectionOutOfReach(
                "point at the ball center is equidistant from the whole sphere"
            )
        out = x.copy()
        scale = (self.radius / d[inside])[..., None]
        out[inside] = self.center + v[inside] * scale
        return out

    def _normal_generators(self, x):
        n = x - self.center
        return (n / np.linalg.norm(n))[None, :]

    def _exterior_ball_misses(self, x, n, r):
        # B(x - r n, r) must sit inside the removed closed ball.
        tol = 1e-9 * (1.0 + np.linalg.norm(x) + r)
        return np.linalg.norm(x - r * n - self.center) + r <= self.radius + tol


class ConvexPolyhedron(Domain):
    """Intersection of half-spaces {a_i . x > c_i} with non-empty interior.

    Projection of an infeasible point runs an active-set search over face
    subsets; ties between numerically equal candidates are broken
    lexicographically on the sorted face-index tuple.
    """

    def __init__(self, normals, offsets):
        normals = np.asarray(normals, dtype=float)
        offsets = np.asarray(offsets, dtype=float).reshape(-1)
        if normals.ndim != 2 or normals.shape[0] != offsets.size:
            raise ValueError("need one offset per face normal")
        norms = np.linalg.norm(normals, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("face normals must be unit vectors")
        self.normals = normals
        self.normals.setflags(write=False)
        self.offsets = offsets
        self.offsets.setflags(write=False)
        self.dim = normals.shape[1]
        self._check_interior()

    def _check_interior(self):
        # Chebyshev-center feasibility probe: maximize the uniform slack.
        d, m = self.dim, self.normals.shape[0]
        cvec = np.zeros(d + 1)
        cvec[-1] = -1.0
        a_ub = np.hstack([-self.normals, np.ones((m, 1))])
        b_ub = -self.offsets
        bounds = [(None, None)] * d + [(None, 1e6)]
        res = linprog(cvec, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
        if not res.success or -res.fun <= 1e-12:
            raise ValueError("polyhedron has empty interior")

    def _slacks(self, x):
        return self.normals @ x - self.offsets

    def _boundary_distance(self, x):
        s = self._slacks(x)
        if np.all(s >= 0.0):
            return float(np.min(s))
        return float(np.linalg.norm(x - self.project(x)))

    def _strictly_inside(self, x):
        return bool(np.all(self._slacks(x) > 0.0))

    def _project_point(self, x):
        s = self._slacks(x)
        if np.all(s >= 0.0):
            return x.copy()
        best = None  # (dist, face tuple, point)
        m = self.normals.shape[0]
        for size in range(1, self.dim + 1):
            for faces in combinations(range(m), size):
                a = self.normals[list(faces)]
                gram = a @ a.T
                if np.linalg.matrix_rank(gram, tol=1e-12) < size:
                    continue
                lam = np.linalg.solve(gram, self.offsets[list(faces)] - a @ x)
                y = x + a.T @ lam
                sy = self._slacks(y)
                if np.min(sy) < -1e-9 * (1.0 + np.linalg.norm(y)):
                    continue
                dist = np.linalg.norm(x - y)
                if (
                    best is None
                    or dist < best[0] - 1e-12 * (1.0 + best[0])
                    or (abs(dist - best[0]) <= 1e-12 * (1.0 + best[0]) and faces < best[1])
                ):
                    best = (dist, faces, y)
        if best is None:  # pragma: no cover - cannot happen with interior
            raise ProjectionOutOfReach("active-set search found no candidate")
        return best[2]

    def project_many(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, self.dim)
        feasible = np.all(flat @ self.normals.T - self.offsets >= 0.0, axis=1)
        if np.all(feasible):
            return x.copy()
        out = flat.copy()
        for i in np.flatnonzero(~feasible):
            out[i] = self._project_point(flat[i])
        return out.reshape(x.shape)

    def _active_faces(self, x):
        tol = self.boundary_tol(x)
        return np.flatnonzero(np.abs(self._slacks(x)) <= tol)

    def _normal_generators(self, x):
        active = self._active_faces(x)
        if active.size == 0:
            raise NotOnBoundary(f"{x} has no active face")
        return self.normals[active].copy()

    def _exterior_ball_misses(self, x, n, r):
        # Convex case: independent of r, true iff n lies in the cone of the
        # active inward face normals.
        active = self._active_faces(x)
        if active.size == 0:
            return False
        _, resid = nnls(self.normals[active].T, n)
        return resid <= 1e-8


class Box(ConvexPolyhedron):
    """Axis-aligned box; projection specializes to componentwise clamping."""

    def __init__(self, lower, upper):
        lower = np.asarray(lower, dtype=float).reshape(-1)
        upper = np.asarray(upper, dtype=float).reshape(-1)
        if lower.size != upper.size or np.any(upper <= lower):
            raise ValueError("need lower < upper componentwise")
        d = lower.size
        eye = np.eye(d)
        normals = np.vstack([eye, -eye])
        offsets = np.concatenate([lower, -upper])
        super().__init__(normals, offsets)
        self.lower = lower
        self.upper = upper

    def project_many(self, x):
        x = np.asarray(x, dtype=float)
        return np.clip(x, self.lower, self.upper)


def unit_box(dim):
    """The unit cube [0, 1]^dim as a convex polyhedron."""
    return Box(np.zeros(dim), np.ones(dim))


def half_line():
    """The half-line (0, inf) as a one-dimensional half-space."""
    return HalfSpace([1.0], 0.0)


# module-level aliases matching the operation-style API
def classify(domain, x):
    return domain.classify(x)


def project(domain, x):
    return domain.project(x)


def inward_normal_witness(domain, x):
    return domain.inward_normal_witness(x)


def is_inward_normal(domain, x, n, r):
    return domain.is_inward_normal(x, n, r)
