"""Discrete solver for the Skorohod problem on the built-in domains.

Given a piecewise-linear driver w starting in the closure, ``solve`` produces
the reflected path xi and the boundary correction phi with xi = w + phi by
the catch-up projection scheme: each knot interval is split into equal
substeps and every substep displacement is followed by a nearest-point
projection.  In one dimension on the half-line the recursion coincides with
the classical running-maximum reflection formula, which ``solve_halfline_1d``
implements independently as an oracle.

The module also exposes the two explicit-constant inequalities satisfied by
solutions (the total-variation bound with constant 2(sqrt(2)+1) and the
1/2-Holder stability estimate) as checkable predicates.
"""

import io
from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

from .domains import EXTERIOR, BallExterior, WholeSpace
from .errors import (
    DomainMismatch,
    NonConvergent,
    ProjectionOutOfReach,
    StartOutsideClosure,
    TimeOutOfRange,
    WindowOutOfRange,
)
from .paths import PiecewiseLinearPath

XI_VARIATION_FACTOR = 2.0 * (np.sqrt(2.0) + 1.0)


@dataclass(frozen=True)
class SkorohodSolution:
    """Reflected path xi, correction phi, its running variation and
    boundary-contact flags, all on a common knot grid."""

    xi: PiecewiseLinearPath
    phi: PiecewiseLinearPath
    phi_variation: np.ndarray
    contact: np.ndarray

    @property
    def times(self):
        return self.xi.times

    def driver_values(self):
        """Knot values of the driver w = xi - phi."""
        return self.xi.values - self.phi.values

    def to_csv(self, target):
        d = self.xi.dim
        header = (
            "t,"
            + ",".join(f"xi_{i + 1}" for i in range(d))
            + ","
            + ",".join(f"phi_{i + 1}" for i in range(d))
            + ",phi_var,contact"
        )
        lines = [header]
        for k, t in enumerate(self.times):
            nums = (t, *self.xi.values[k], *self.phi.values[k], self.phi_variation[k])
            lines.append(
                ",".join(format(u, ".17g") for u in nums) + f",{int(self.contact[k])}"
            )
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
        d = (rows.shape[1] - 3) // 2
        t = rows[:, 0]
        return cls(
            xi=PiecewiseLinearPath(t, rows[:, 1:1 + d]),
            phi=PiecewiseLinearPath(t, rows[:, 1 + d:1 + 2 * d]),
            phi_variation=rows[:, 1 + 2 * d],
            contact=rows[:, 2 + 2 * d].astype(bool),
        )

    def __eq__(self, other):
        if not isinstance(other, SkorohodSolution):
            return NotImplemented
        return (
            self.xi == other.xi
            and self.phi == other.phi
            and np.array_equal(self.phi_variation, other.phi_variation)
            and np.array_equal(self.contact, other.contact)
        )


def _refined_knots(w, substeps):
    """Knot times/values of w subdivided into equal substeps per interval.

    substeps = 1 returns the original arrays unchanged so that downstream
    arithmetic is bit-identical to working on w directly.
    """
    if substeps == 1 or w.times.size == 1:
        return w.times, w.values
    t, v = w.times, w.values
    nseg = t.size - 1
    lam = np.arange(1, substeps + 1) / substeps
    seg_t = t[:-1, None] + lam[None, :] * np.diff(t)[:, None]
    seg_t[:, -1] = t[1:]
    seg_v = v[:-1, None, :] + lam[None, :, None] * np.diff(v, axis=0)[:, None, :]
    seg_v[:, -1, :] = v[1:]
    rt = np.concatenate([t[:1], seg_t.reshape(nseg * substeps)])
    rv = np.concatenate([v[:1], seg_v.reshape(nseg * substeps, v.shape[1])])
    return rt, rv


def solve(domain, w, substeps=1):
    """Catch-up projection solution of the Skorohod problem for driver w."""
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    x0 = w.values[0]
    if domain.classify(x0) == EXTERIOR:
        raise StartOutsideClosure(f"driver starts at {x0} outside the closure")
    rt, rv = _refined_knots(w, substeps)
    n = rt.size
    xi = np.empty_like(rv)
    xi[0] = x0
    guard = 0.5 * domain.r0 if isinstance(domain, BallExterior) else np.inf
    x = x0
    for k in range(1, n):
        dw = rv[k] - rv[k - 1]
        if np.linalg.norm(dw) >= guard:
            raise ProjectionOutOfReach(
                "substep displacement exceeds r0/2; increase substeps"
            )
        x = domain.project_many((x + dw)[None, :])[0]
        xi[k] = x
    phi = xi - rv
    phi[0] = 0.0
    return _assemble(domain, rt, xi, phi)


def _assemble(domain, times, xi, phi):
    phi_var = np.concatenate(
        [[0.0], np.cumsum(np.linalg.norm(np.diff(phi, axis=0), axis=1))]
    )
    contact = _on_boundary(domain, xi)
    return SkorohodSolution(
        xi=PiecewiseLinearPath(times, xi),
        phi=PiecewiseLinearPath(times, phi),
        phi_variation=phi_var,
        contact=contact,
    )


def _on_boundary(domain, pts):
    tol = domain.eps_bd * (1.0 + np.linalg.norm(pts, axis=1))
    if isinstance(domain, WholeSpace):
        return np.zeros(pts.shape[0], dtype=bool)
    if hasattr(domain, "a"):  # half-space
        return np.abs(pts @ domain.a - domain.c) <= tol
    if hasattr(domain, "radius"):  # ball or ball exterior
        gap = np.abs(np.linalg.norm(pts - domain.center, axis=1) - domain.radius)
        return gap <= tol
    slacks = pts @ domain.normals.T - domain.offsets
    return np.min(np.abs(slacks), axis=1) <= tol


def solve_halfline_1d(w):
    """Exact reflection on (0, inf): phi(t) = max(0, max_{s<=t} -w(s)).

    The running maximum of a piecewise-linear scalar path is attained at
    knots, so the formula is evaluated exactly on the knot grid.  Used as an
    independent oracle for ``solve``.
    """
    if w.dim != 1:
        raise ValueError("solve_halfline_1d needs a one-dimensional driver")
    v = w.values[:, 0]
    if v[0] < 0.0:
        raise StartOutsideClosure(f"driver starts at {v[0]} < 0")
    phi = np.maximum(np.maximum.accumulate(-v), 0.0)
    xi = v + phi
    from .domains import half_line

    return _assemble(half_line(), w.times, xi[:, None], phi[:, None])


def solve_refined(domain, w, substeps=1, budget=1e-6, max_doublings=8):
    """Double substeps until sup|xi| stabilizes within ``budget``.

    Successive solutions are compared at the original driver knots.  Raises
    NonConvergent when the change still exceeds the budget after
    ``max_doublings`` doublings.
    """
    prev = solve(domain, w, substeps)
    scale = 1.0 + float(np.max(np.abs(prev.xi.values)))
    for _ in range(max_doublings):
        substeps *= 2
        cur = solve(domain, w, substeps)
        stride_prev = (prev.times.size - 1) // (w.times.size - 1) if w.times.size > 1 else 1
        stride_cur = (cur.times.size - 1) // (w.times.size - 1) if w.times.size > 1 else 1
        a = prev.xi.values[::stride_prev]
        b = cur.xi.values[::stride_cur]
        change = float(np.max(np.linalg.norm(a - b, axis=1)))
        if change <= budget * scale:
            return cur
        prev = cur
    raise NonConvergent(
        f"sup|xi| still moving by {change:.3e} after {max_doublings} doublings"
    )


def _window_args(path, s, t):
    try:
        return path.total_variation(s, t)
    except TimeOutOfRange as exc:
        raise WindowOutOfRange(str(exc)) from exc


def check_xi_variation_bound(sol, w, s, t):
    """Total-variation bound |xi|_[s,t] <= 2(sqrt(2)+1) |w|_[s,t]."""
    lhs = _window_args(sol.xi, s, t)
    rhs = XI_VARIATION_FACTOR * _window_args(w, s, t)
    return {"lhs": lhs, "rhs": rhs, "ok": lhs <= rhs * (1.0 + 1e-9)}


def check_holder_stability(domain, sol, sol2, t):
    """1/2-Holder stability of the reflection map between two solutions.

    lhs = |xi(t) - xi'(t)|^2 is checked against
    {|w(t)-w'(t)|^2 + 4 (V + V') max_{s<=t} |w(s)-w'(s)|} exp((V + V')/r0)
    with V, V' the phi variations up to t.  For convex domains r0 is
    infinite and the exponential factor is 1.
    """
    if sol.xi.dim != domain.dim or sol2.xi.dim != domain.dim:
        raise DomainMismatch("solutions do not live in the domain's space")
    horizon = min(sol.times[-1], sol2.times[-1])
    if t < 0.0 or t > horizon * (1.0 + 1e-12):
        raise WindowOutOfRange(f"t = {t} beyond common horizon {horizon}")
    union = np.unique(np.concatenate([sol.times, sol2.times, [t]]))
    union = union[union <= t * (1.0 + 1e-15)]
    w1 = np.array([sol.xi.eval(u) - sol.phi.eval(u) for u in union])
    w2 = np.array([sol2.xi.eval(u) - sol2.phi.eval(u) for u in union])
    max_w = float(np.max(np.linalg.norm(w1 - w2, axis=1)))
    dw_t = float(np.linalg.norm(w1[-1] - w2[-1]))
    lhs = float(np.linalg.norm(sol.xi.eval(t) - sol2.xi.eval(t))) ** 2
    var_sum = float(
        np.interp(t, sol.times, sol.phi_variation)
        + np.interp(t, sol2.times, sol2.phi_variation)
    )
    ratio = var_sum / domain.r0 if np.isfinite(domain.r0) else 0.0
    with np.errstate(over="ignore"):
        rhs = (dw_t**2 + 4.0 * var_sum * max_w) * np.exp(ratio)
    return {"lhs": lhs, "rhs": float(rhs), "ok": lhs <= rhs * (1.0 + 1e-9)}


def diagnostics(sol, w, s, t, theta):
    """Window quantities feeding reports: phi variation, driver oscillation
    and the knot-pair Holder quotient."""
    return {
        "phi_variation": _window_args(sol.phi, s, t),
        "sup_osc": w.sup_osc(s, t) if s <= t <= w.horizon else _window_args(w, s, t),
        "holder_quotient": w.holder_quotient(s, t, theta),
    }


def _cone_angle(generators, v):
    """Angle between v and the cone spanned by the generator rows."""
    vhat = v / np.linalg.norm(v)
    if generators.shape[0] == 1:
        cosang = float(np.clip(generators[0] @ vhat, -1.0, 1.0))
        return float(np.arccos(cosang))
    _, resid = nnls(generators.T, vhat)
    return float(np.arcsin(min(1.0, resid)))


def verify_invariants(domain, sol, w, substeps=1):
    """Residuals of the five defining conditions of a Skorohod solution.

    Returns a dict of worst-case violations: decomposition xi = w + phi,
    containment in the closure, flat phi away from the boundary, phi
    increments pointing along inward normals, and consistency of the stored
    running variation.  Increments below the FP-noise floor are skipped in
    the direction check.
    """
    rt, rv = _refined_knots(w, substeps)
    xi = sol.xi.values
    phi = sol.phi.values
    scale = 1.0 + float(np.max(np.linalg.norm(rv, axis=1)))
    res = {}
    res["decomposition"] = float(np.max(np.abs(xi - rv - phi))) / scale
    proj = domain.project_many(xi)
    res["containment"] = float(np.max(np.linalg.norm(xi - proj, axis=1)))
    dphi = np.diff(phi, axis=0)
    norms = np.linalg.norm(dphi, axis=1)
    free = ~sol.contact[:-1] & ~sol.contact[1:]
    res["support"] = float(np.max(norms[free])) if np.any(free) else 0.0
    worst_angle = 0.0
    floor = 1e-9 * scale
    for k in np.flatnonzero(norms > floor):
        pt = xi[k + 1] if sol.contact[k + 1] else xi[k]
        try:
            gens = domain._normal_generators(pt)
        except Exception:
            continue
        worst_angle = max(worst_angle, _cone_angle(gens, dphi[k]))
    res["direction"] = worst_angle
    recomputed = np.concatenate([[0.0], np.cumsum(norms)])
    res["phi_variation"] = float(np.max(np.abs(recomputed - sol.phi_variation)))
    res["phi_var_monotone"] = bool(np.all(np.diff(sol.phi_variation) >= 0.0))
    return res
