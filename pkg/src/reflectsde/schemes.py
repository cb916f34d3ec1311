"""Time-stepping schemes for reflected SDEs.

Two schemes are provided: the left-frozen-coefficient scheme with in-step
reflection (``euler_peano``) and the piecewise-linear-driver scheme
(``wong_zakai``), which replaces the Brownian path by its grid polyline and
integrates the resulting reflected ODE.  The limit of the latter solves the
SDE with the Stratonovich-corrected drift b + (1/2) tr(Dsigma)(sigma),
available through ``stratonovich_drift``.

Coefficient maps are vectorized over a leading batch axis: sigma maps
(..., d) -> (..., d, n), b maps (..., d) -> (..., d) and dsigma maps
(..., d) -> (..., d, n, d) with component [i, a, j] = d sigma^{ia} / dx_j.
The internal ``*_core`` steppers advance whole batches of paths at once; the
public wrappers run a single path and return a ``SchemeRun``.
"""

import io
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .domains import EXTERIOR
from .errors import NonConvergent, StartOutsideClosure
from .paths import PiecewiseLinearPath


@dataclass(frozen=True)
class CoefficientSet:
    """Diffusion sigma, drift b and the diffusion derivative tensor.

    ``lipschitz_bound`` and ``sup_bound`` are stated constants; construction
    cross-checks dsigma against central finite differences and the sup bound
    at random probe points (the schemes assume bounded Lipschitz maps).
    """

    sigma: Callable
    b: Callable
    dsigma: Callable
    dim: int
    noise_dim: int
    lipschitz_bound: float = 1.0
    sup_bound: float = 10.0
    name: str = "custom"

    def __post_init__(self):
        self.validate()

    def validate(self, probes=100, seed=0, h=1e-5, tol=1e-6):
        rng = np.random.default_rng(seed)
        x = rng.normal(0.0, 2.0, size=(probes, self.dim))
        sig = np.asarray(self.sigma(x))
        drift = np.asarray(self.b(x))
        if sig.shape != (probes, self.dim, self.noise_dim):
            raise ValueError(f"sigma returned shape {sig.shape}")
        if drift.shape != (probes, self.dim):
            raise ValueError(f"b returned shape {drift.shape}")
        if np.max(np.linalg.norm(sig, axis=(1, 2))) > self.sup_bound or np.max(
            np.linalg.norm(drift, axis=1)
        ) > self.sup_bound:
            raise ValueError("coefficients exceed the stated sup bound")
        ds = np.asarray(self.dsigma(x))
        if ds.shape != (probes, self.dim, self.noise_dim, self.dim):
            raise ValueError(f"dsigma returned shape {ds.shape}")
        for j in range(self.dim):
            e = np.zeros(self.dim)
            e[j] = h
            fd = (np.asarray(self.sigma(x + e)) - np.asarray(self.sigma(x - e))) / (2 * h)
            if np.max(np.abs(fd - ds[..., j])) > tol:
                raise ValueError(f"dsigma disagrees with finite differences in x_{j}")


def stratonovich_drift(coef):
    """Replace the drift by b + (1/2) sum_{j,a} dsigma^{ia}_j sigma^{ja}."""
    base_b, sigma, dsigma = coef.b, coef.sigma, coef.dsigma

    def btilde(x):
        corr = 0.5 * np.einsum("...iaj,...ja->...i", dsigma(x), sigma(x))
        return base_b(x) + corr

    extra = 0.5 * coef.dim * coef.noise_dim * coef.lipschitz_bound * coef.sup_bound
    return replace(
        coef,
        b=btilde,
        sup_bound=coef.sup_bound + extra,
        name=coef.name + "+stratonovich",
    )


# ---------------------------------------------------------------------------
# built-in coefficient registry (bounded, globally Lipschitz by construction)


def constant_coefficients(dim, noise_dim=None, scale=1.0, drift=None):
    """sigma = scale * I (padded if n != d), constant drift (default 0)."""
    n = dim if noise_dim is None else noise_dim
    mat = scale * np.eye(dim, n)
    dvec = np.zeros(dim) if drift is None else np.asarray(drift, dtype=float)

    def sigma(x):
        x = np.asarray(x)
        return np.broadcast_to(mat, x.shape[:-1] + (dim, n)).copy()

    def b(x):
        x = np.asarray(x)
        return np.broadcast_to(dvec, x.shape[:-1] + (dim,)).copy()

    def dsigma(x):
        x = np.asarray(x)
        return np.zeros(x.shape[:-1] + (dim, n, dim))

    bound = max(np.linalg.norm(mat), np.linalg.norm(dvec)) + 1.0
    return CoefficientSet(sigma, b, dsigma, dim, n, 0.0, bound, name="constant")


def tanh_diag_coefficients(dim):
    """sigma(x) = diag(1 + tanh(x_i)/2), b = 0; nonzero drift correction."""

    def sigma(x):
        x = np.asarray(x)
        out = np.zeros(x.shape[:-1] + (dim, dim))
        diag = 1.0 + 0.5 * np.tanh(x)
        idx = np.arange(dim)
        out[..., idx, idx] = diag
        return out

    def b(x):
        x = np.asarray(x)
        return np.zeros(x.shape[:-1] + (dim,))

    def dsigma(x):
        x = np.asarray(x)
        out = np.zeros(x.shape[:-1] + (dim, dim, dim))
        deriv = 0.5 / np.cosh(x) ** 2
        idx = np.arange(dim)
        out[..., idx, idx, idx] = deriv
        return out

    return CoefficientSet(
        sigma, b, dsigma, dim, dim, 0.5, 1.5 * np.sqrt(dim) + 1.0, name="tanh_diag"
    )


def tanh_drift_coefficients(dim, sigma_scale=1.0):
    """sigma = sigma_scale * I, b(x) = -tanh(x) componentwise."""

    def sigma(x):
        x = np.asarray(x)
        return np.broadcast_to(
            sigma_scale * np.eye(dim), x.shape[:-1] + (dim, dim)
        ).copy()

    def b(x):
        return -np.tanh(np.asarray(x))

    def dsigma(x):
        x = np.asarray(x)
        return np.zeros(x.shape[:-1] + (dim, dim, dim))

    bound = max(abs(sigma_scale) * np.sqrt(dim), np.sqrt(dim)) + 1.0
    return CoefficientSet(sigma, b, dsigma, dim, dim, 1.0, bound, name="tanh_drift")


REGISTRY = {
    "constant": constant_coefficients,
    "tanh_diag": tanh_diag_coefficients,
    "tanh_drift": tanh_drift_coefficients,
}


def make_coefficients(name, dim, **kwargs):
    if name not in REGISTRY:
        raise KeyError(f"unknown coefficient set {name!r}; have {sorted(REGISTRY)}")
    return REGISTRY[name](dim, **kwargs)


# ---------------------------------------------------------------------------
# batch steppers


def _reflect_increment(domain, x, inc, substeps):
    """Catch-up reflection of a straight increment, batched over rows."""
    piece = inc / substeps
    phi = np.zeros_like(x)
    for _ in range(substeps):
        y = x + piece
        x = domain.project_many(y)
        phi += x - y
    return x, phi


def euler_peano_core(domain, coef, bknots, dt, x0, substeps=1):
    """Advance a batch of paths with left-frozen coefficients.

    bknots: Brownian knot values, shape (batch, K+1, n); x0: (batch, d).
    Returns (x, phi) arrays of shape (batch, K+1, d) on the grid.
    """
    batch, ksteps = bknots.shape[0], bknots.shape[1] - 1
    x = np.array(x0, dtype=float)
    xs = np.empty((batch, ksteps + 1, x.shape[1]))
    phis = np.zeros_like(xs)
    xs[:, 0] = x
    phi = np.zeros_like(x)
    for k in range(1, ksteps + 1):
        db = bknots[:, k] - bknots[:, k - 1]
        inc = np.einsum("bij,bj->bi", coef.sigma(x), db) + coef.b(x) * dt
        x, dphi = _reflect_increment(domain, x, inc, substeps)
        phi = phi + dphi
        xs[:, k] = x
        phis[:, k] = phi
    return xs, phis


def reflected_ode_core(domain, coef, driver, times, x0, substeps=16):
    """Integrate dx = sigma(x) dw + b(x) dt with reflection, batched.

    driver: (batch, K+1, n) knot values of a bounded-variation polyline on
    ``times``.  Each segment is split into ``substeps`` Euler pieces, each
    followed by a projection.
    """
    batch, ksteps = driver.shape[0], driver.shape[1] - 1
    x = np.array(x0, dtype=float)
    xs = np.empty((batch, ksteps + 1, x.shape[1]))
    phis = np.zeros_like(xs)
    xs[:, 0] = x
    phi = np.zeros_like(x)
    for k in range(1, ksteps + 1):
        dw = (driver[:, k] - driver[:, k - 1]) / substeps
        dts = (times[k] - times[k - 1]) / substeps
        for _ in range(substeps):
            inc = np.einsum("bij,bj->bi", coef.sigma(x), dw) + coef.b(x) * dts
            y = x + inc
            x = domain.project_many(y)
            phi = phi + (x - y)
        xs[:, k] = x
        phis[:, k] = phi
    return xs, phis


# ---------------------------------------------------------------------------
# single-path runs


@dataclass(frozen=True)
class SchemeRun:
    """One scheme trajectory: state path x, reflection term phi and the
    driving polyline, with x - phi recovering the unreflected increments."""

    x: PiecewiseLinearPath
    phi: PiecewiseLinearPath
    driver: PiecewiseLinearPath
    grid_n: int
    scheme_tag: str
    level: Optional[int] = None
    seed: Optional[int] = None

    def to_csv(self, target):
        buf = io.StringIO()
        buf.write(
            f"# scheme={self.scheme_tag},level={self.level},seed={self.seed}\n"
        )
        d = self.x.dim
        header = (
            "t,"
            + ",".join(f"x_{i + 1}" for i in range(d))
            + ","
            + ",".join(f"phi_{i + 1}" for i in range(d))
        )
        buf.write(header + "\n")
        for k, t in enumerate(self.x.times):
            nums = (t, *self.x.values[k], *self.phi.values[k])
            buf.write(",".join(format(u, ".17g") for u in nums) + "\n")
        text = buf.getvalue()
        if hasattr(target, "write"):
            target.write(text)
        else:
            with open(target, "w", newline="\n") as fh:
                fh.write(text)


def _check_start(domain, x0):
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if domain.classify(x0) == EXTERIOR:
        raise StartOutsideClosure(f"x0 = {x0} lies outside the closure")
    return x0


def euler_peano(domain, coef, gen, level, x0, substeps=1, path_id=0):
    """Left-frozen-coefficient scheme on the level-2^level grid."""
    x0 = _check_start(domain, x0)
    bknots = gen.knots(level, path_id)[None, :, :]
    n = 1 << level
    dt = gen.horizon / n
    xs, phis = euler_peano_core(domain, coef, bknots, dt, x0[None, :], substeps)
    times = gen.grid(level)
    return SchemeRun(
        x=PiecewiseLinearPath(times, xs[0]),
        phi=PiecewiseLinearPath(times, phis[0]),
        driver=PiecewiseLinearPath(times, bknots[0]),
        grid_n=n,
        scheme_tag="euler_peano",
        level=level,
        seed=gen.seed,
    )


def solve_reflected_ode(domain, coef, driver, x0, substeps=16):
    """Reflected ODE driven by a piecewise-linear path."""
    x0 = _check_start(domain, x0)
    xs, phis = reflected_ode_core(
        domain, coef, driver.values[None, :, :], driver.times, x0[None, :], substeps
    )
    return SchemeRun(
        x=PiecewiseLinearPath(driver.times, xs[0]),
        phi=PiecewiseLinearPath(driver.times, phis[0]),
        driver=driver,
        grid_n=driver.times.size - 1,
        scheme_tag="reflected_ode",
    )


def wong_zakai(domain, coef, gen, level, x0, substeps=16, path_id=0):
    """Reflected ODE driven by the grid polyline of the Brownian path."""
    x0 = _check_start(domain, x0)
    driver = gen.sample(level, path_id)
    run = solve_reflected_ode(domain, coef, driver, x0, substeps)
    return replace(run, scheme_tag="wong_zakai", level=level, seed=gen.seed)


def refine_reflected_ode(domain, coef, driver, x0, substeps=16, budget=1e-6,
                         max_doublings=8):
    """Double substeps until the state path stabilizes within ``budget``.

    Raises NonConvergent when the sup change at driver knots still exceeds
    the budget after ``max_doublings`` doublings.
    """
    prev = solve_reflected_ode(domain, coef, driver, x0, substeps)
    scale = 1.0 + float(np.max(np.abs(prev.x.values)))
    for _ in range(max_doublings):
        substeps *= 2
        cur = solve_reflected_ode(domain, coef, driver, x0, substeps)
        change = float(
            np.max(np.linalg.norm(prev.x.values - cur.x.values, axis=1))
        )
        if change <= budget * scale:
            return cur
        prev = cur
    raise NonConvergent(
        f"state still moving by {change:.3e} after {max_doublings} doublings"
    )
