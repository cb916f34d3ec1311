"""Piecewise-linear paths, their variational functionals, and dyadic
Brownian drivers generated by the Levy bridge construction.
"""

import io

import numpy as np
from scipy.spatial.distance import pdist

from .errors import BadTheta, LevelTooDeep, TimeOutOfRange


class PiecewiseLinearPath:
    """A time-stamped polyline in R^m.

    ``times`` is strictly increasing and starts at 0; ``values`` holds one
    point per knot.  Evaluation between knots is affine interpolation, which
    defines the continuous path all functionals refer to.  Instances are
    immutable.
    """

    def __init__(self, times, values):
        times = np.asarray(times, dtype=float).reshape(-1)
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if times.size == 0:
            raise ValueError("a path needs at least one knot")
        if times[0] != 0.0:
            raise ValueError("the first knot must sit at time 0")
        if times.size > 1 and np.any(np.diff(times) <= 0.0):
            raise ValueError("knot times must be strictly increasing")
        if values.shape[0] != times.size:
            raise ValueError("one value per knot time is required")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(values))):
            raise ValueError("knots must be finite")
        self.times = times
        self.values = values
        self.times.setflags(write=False)
        self.values.setflags(write=False)

    @property
    def dim(self):
        return self.values.shape[1]

    @property
    def horizon(self):
        return float(self.times[-1])

    def _check_time(self, t):
        slack = 1e-12 * (1.0 + self.horizon)
        if t < -slack or t > self.horizon + slack:
            raise TimeOutOfRange(f"t = {t} outside [0, {self.horizon}]")
        return min(max(t, 0.0), self.horizon)

    def eval(self, t):
        """Value at time t by affine interpolation; exact at knots."""
        t = self._check_time(float(t))
        i = np.searchsorted(self.times, t, side="right") - 1
        i = min(max(i, 0), self.times.size - 1)
        if self.times[i] == t or i == self.times.size - 1:
            return self.values[i].copy()
        t0, t1 = self.times[i], self.times[i + 1]
        lam = (t - t0) / (t1 - t0)
        return self.values[i] + lam * (self.values[i + 1] - self.values[i])

    def _window(self, s, t):
        s = self._check_time(float(s))
        t = self._check_time(float(t))
        if s > t:
            raise TimeOutOfRange(f"window [{s}, {t}] is reversed")
        inner = (self.times > s) & (self.times < t)
        ts = np.concatenate([[s], self.times[inner], [t]])
        vs = np.vstack([self.eval(s)[None, :], self.values[inner], self.eval(t)[None, :]])
        # collapse duplicated endpoints when s or t is itself a knot
        keep = np.concatenate([[True], np.diff(ts) > 0.0])
        return ts[keep], vs[keep]

    def sup_osc(self, s, t):
        """Oscillation max_{u,v in [s,t]} |w(u) - w(v)|.

        For a polyline the max is attained on the knot set extended by the
        window endpoints, so it is computed exactly over that finite set.
        """
        _, vs = self._window(s, t)
        if vs.shape[0] < 2:
            return 0.0
        return float(np.max(pdist(vs)))

    def total_variation(self, s, t):
        """Total variation over [s, t]; the exact knot sum for a polyline."""
        _, vs = self._window(s, t)
        if vs.shape[0] < 2:
            return 0.0
        return float(np.sum(np.linalg.norm(np.diff(vs, axis=0), axis=1)))

    def holder_quotient(self, s, t, theta):
        """Knot-pair Holder quotient sup |w(v)-w(u)| / |v-u|^theta.

        Evaluated over all pairs from the knot set extended by {s, t}.  This
        is a lower bound for the true supremum when theta < 1 (the extremum
        of a polyline can fall between knots); it is exact for theta = 1 on
        single-segment windows.
        """
        if not (0.0 < theta <= 1.0):
            raise BadTheta(f"theta = {theta} outside (0, 1]")
        ts, vs = self._window(s, t)
        if ts.size < 2:
            return 0.0
        dv = pdist(vs)
        dt = pdist(ts[:, None])
        return float(np.max(dv / dt**theta))

    def to_csv(self, target):
        """Write `t,x1,...,xm` rows at full double precision."""
        header = "t," + ",".join(f"x{i + 1}" for i in range(self.dim))
        lines = [header]
        for t, v in zip(self.times, self.values):
            lines.append(",".join(format(u, ".17g") for u in (t, *v)))
        text = "\n".join(lines) + "\n"
        if hasattr(target, "write"):
            target.write(text)
        else:
            with open(target, "w", newline="\n") as fh:
                fh.write(text)

    @classmethod
    def from_csv(cls, source):
        if hasattr(source, "read"):
            text = source.read()
        else:
            with open(source) as fh:
                text = fh.read()
        rows = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)
        return cls(rows[:, 0], rows[:, 1:])

    def __eq__(self, other):
        if not isinstance(other, PiecewiseLinearPath):
            return NotImplemented
        return np.array_equal(self.times, other.times) and np.array_equal(
            self.values, other.values
        )


class BrownianGenerator:
    """Deterministic dyadic Brownian paths with exact bridge coupling.

    Paths live on the grids {i T / 2^k}.  Values are produced by the Levy
    midpoint construction fed from a counter-based Philox stream keyed by
    (seed, path_id), with a fixed dyadic-node draw layout.  Consequently a
    level-k path restricted to the level-j grid (j < k) equals the level-j
    path bit for bit, and sampling is reproducible regardless of evaluation
    order or thread count.
    """

    def __init__(self, seed, dim, horizon=1.0, max_level=24):
        if horizon <= 0:
            raise ValueError("horizon must be positive")
        self.seed = int(seed)
        self.dim = int(dim)
        self.horizon = float(horizon)
        self.max_level = int(max_level)

    def _normals(self, path_id, count):
        bitgen = np.random.Philox(key=np.array([self.seed, path_id], dtype=np.uint64))
        return np.random.Generator(bitgen).standard_normal((count, self.dim))

    def knots(self, level, path_id=0):
        """Knot values on the level grid, shape (2^level + 1, dim)."""
        if level > self.max_level:
            raise LevelTooDeep(f"level {level} > max_level {self.max_level}")
        if level < 0:
            raise ValueError("level must be nonnegative")
        n = 1 << level
        z = self._normals(path_id, n)
        b = np.zeros((n + 1, self.dim))
        b[n] = np.sqrt(self.horizon) * z[0]
        for lev in range(1, level + 1):
            step = n >> lev
            left = b[0:n:2 * step]
            right = b[2 * step:n + 1:2 * step]
            h = self.horizon / (1 << (lev - 1))
            zblock = z[1 << (lev - 1):1 << lev]
            b[step::2 * step] = 0.5 * (left + right) + 0.5 * np.sqrt(h) * zblock
        return b

    def grid(self, level):
        n = 1 << level
        return np.arange(n + 1) * (self.horizon / n)

    def sample(self, level, path_id=0):
        """The level-grid Brownian polyline as a PiecewiseLinearPath."""
        return PiecewiseLinearPath(self.grid(level), self.knots(level, path_id))


def sample_brownian(gen, level, path_id=0):
    return gen.sample(level, path_id)
