"""Walk through the Skorohod decomposition on a few domains.

Solves xi = w + phi for a Brownian polyline pushed into the unit ball and
the exterior of a ball, prints the decomposition diagnostics, and checks
the explicit variation bound ||xi|| <= 2(sqrt(2)+1)||w||.

Run:  python3 demos/skorohod_map_demo.py
"""

import numpy as np

import reflectsde as r


def describe(domain, w, sol):
    name = type(domain).__name__
    inv = r.verify_invariants(domain, sol, w, substeps=4)
    var = r.check_xi_variation_bound(sol, w, 0.0, 1.0)
    d = r.diagnostics(sol, w, 0.0, 1.0, 0.5)
    touched = np.count_nonzero(sol.contact)
    print(f"--- {name} ---")
    print(f"  boundary contacts       : {touched} of {sol.contact.size} knots")
    print(f"  local-time variation    : {d['phi_variation']:.4f}")
    print(f"  decomposition residual  : {inv['decomposition']:.2e}")
    print(f"  normal-cone defect      : {inv['direction']:.2e}")
    print(
        f"  variation bound         : {var['lhs']:.3f} <= {var['rhs']:.3f}"
        f"  ({'ok' if var['ok'] else 'VIOLATED'})"
    )


def main():
    gen = r.BrownianGenerator(seed=12, dim=2, horizon=1.0, max_level=8)
    grid = gen.grid(7)
    knots = gen.knots(7, 0)

    # scaled up so the path actually hits the unit sphere a few times
    w_ball = r.PiecewiseLinearPath(grid, 1.5 * knots)
    ball = r.Ball([0.0, 0.0], 1.0)
    describe(ball, w_ball, r.solve(ball, w_ball, substeps=4))

    # same randomness, started outside the excluded ball
    w_ext = r.PiecewiseLinearPath(grid, knots + [1.5, 0.0])
    ext = r.BallExterior([0.0, 0.0], 1.0)
    describe(ext, w_ext, r.solve(ext, w_ext, substeps=4))

    # 1-d half line: the catch-up solver against the running-max formula
    w1 = r.PiecewiseLinearPath(grid, 0.5 + knots[:, :1])
    a = r.solve(r.half_line(), w1, substeps=1)
    b = r.solve_halfline_1d(w1)
    gap = np.max(np.abs(a.xi.values - b.xi.values))
    print(f"--- half line ---\n  solver vs closed form   : {gap:.2e}")


if __name__ == "__main__":
    main()
