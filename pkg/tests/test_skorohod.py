import io

import numpy as np
import pytest

import reflectsde as r
from reflectsde.errors import (
    DomainMismatch,
    NonConvergent,
    ProjectionOutOfReach,
    StartOutsideClosure,
    WindowOutOfRange,
)

HALF_LINE = r.half_line()
FACTOR = 2.0 * (np.sqrt(2.0) + 1.0)


def random_halfline_driver(rng, max_knots=200):
    n = int(rng.integers(2, max_knots))
    vals = np.concatenate(
        [[abs(rng.normal())], rng.normal(0, 0.3, n - 1)]
    ).cumsum()
    return r.PiecewiseLinearPath(np.arange(n, dtype=float), vals)


def brownian_driver(domain, seed, level=6, path_id=0, shift=None):
    gen = r.BrownianGenerator(seed, domain.dim, 1.0, max_level=level + 1)
    knots = gen.knots(level, path_id)
    if shift is not None:
        knots = knots + np.asarray(shift, dtype=float)
    return r.PiecewiseLinearPath(gen.grid(level), knots)


def test_interior_driver_passes_through():
    ball = r.Ball([0, 0], 5.0)
    w = brownian_driver(ball, seed=1, level=5)
    assert np.max(np.linalg.norm(w.values, axis=1)) < 4.0  # stays interior
    sol = r.solve(ball, w, substeps=2)
    assert np.all(sol.phi.values == 0.0)
    stride = 2
    np.testing.assert_array_equal(sol.xi.values[::stride], w.values)


def test_halfline_hand_example():
    w = r.PiecewiseLinearPath([0, 1, 2], [[1.0], [-1.0], [0.0]])
    sol = r.solve(HALF_LINE, w, substeps=1)
    assert sol.xi.eval(1)[0] == pytest.approx(0.0, abs=1e-15)
    assert sol.phi.eval(1)[0] == pytest.approx(1.0, abs=1e-15)
    assert sol.xi.eval(2)[0] == pytest.approx(1.0, abs=1e-15)
    assert sol.phi.eval(2)[0] == pytest.approx(1.0, abs=1e-15)


def test_ball_straight_segment():
    # straight pull from the center through the wall ends at the wall, and
    # a 10x-substep run agrees (radial symmetry pins the contact point)
    ball = r.Ball([0, 0], 1.0)
    w = r.PiecewiseLinearPath([0, 1], [[0.0, 0.0], [2.0, 0.0]])
    sol = r.solve(ball, w, substeps=20)
    fine = r.solve(ball, w, substeps=200)
    np.testing.assert_allclose(sol.xi.values[-1], [1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(sol.phi.values[-1], [-1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(fine.xi.values[-1], sol.xi.values[-1], atol=1e-12)


def test_start_outside_closure():
    w = r.PiecewiseLinearPath([0, 1], [[-1.0], [1.0]])
    with pytest.raises(StartOutsideClosure):
        r.solve(HALF_LINE, w)
    with pytest.raises(StartOutsideClosure):
        r.solve_halfline_1d(w)


class TestHalflineOracle:
    def test_nonnegative_driver(self):
        w = r.PiecewiseLinearPath([0, 1, 2], [[1.0], [0.5], [2.0]])
        sol = r.solve_halfline_1d(w)
        assert np.all(sol.phi.values == 0.0)

    def test_forced_by_formula(self):
        w = r.PiecewiseLinearPath([0, 1], [[0.0], [-2.0]])
        sol = r.solve_halfline_1d(w)
        assert sol.phi.values[-1, 0] == 2.0
        assert sol.xi.values[-1, 0] == 0.0
        w2 = r.PiecewiseLinearPath([0, 1, 2], [[1.0], [-1.0], [0.0]])
        assert r.solve_halfline_1d(w2).xi.values[-1, 0] == 1.0

    def test_solver_matches_oracle(self):
        rng = np.random.default_rng(10)
        for _ in range(50):
            w = random_halfline_driver(rng)
            a = r.solve(HALF_LINE, w, substeps=1)
            b = r.solve_halfline_1d(w)
            assert np.max(np.abs(a.xi.values - b.xi.values)) <= 1e-12


def test_variation_bound_examples():
    ball = r.Ball([0, 0], 5.0)
    w = brownian_driver(ball, seed=1, level=5)
    sol = r.solve(ball, w, substeps=1)
    res = r.check_xi_variation_bound(sol, w, 0.0, 1.0)
    assert res["ok"]
    assert res["lhs"] == pytest.approx(w.total_variation(0, 1.0), rel=1e-12)
    assert res["rhs"] == pytest.approx(FACTOR * res["lhs"], rel=1e-12)

    w2 = r.PiecewiseLinearPath([0, 1], [[0.0], [-1.0]])
    sol2 = r.solve(HALF_LINE, w2)
    res2 = r.check_xi_variation_bound(sol2, w2, 0.0, 1.0)
    assert res2["lhs"] == 0.0 and res2["ok"]

    with pytest.raises(WindowOutOfRange):
        r.check_xi_variation_bound(sol2, w2, 0.0, 3.0)


def test_variation_bound_random_sweep():
    ball = r.Ball([0, 0], 1.0)
    for seed in range(25):
        w = brownian_driver(ball, seed=seed, level=6)
        sol = r.solve(ball, w, substeps=2)
        assert r.check_xi_variation_bound(sol, w, 0.0, 1.0)["ok"]
        assert r.check_xi_variation_bound(sol, w, 0.25, 0.75)["ok"]


class TestHolderStability:
    def test_identical_solutions(self):
        ball = r.Ball([0, 0], 1.0)
        w = brownian_driver(ball, seed=3)
        sol = r.solve(ball, w, substeps=2)
        res = r.check_holder_stability(ball, sol, sol, 1.0)
        assert res["lhs"] == 0.0 and res["ok"]

    def test_interior_reduces_to_driver_distance(self):
        ball = r.Ball([0, 0], 50.0)
        w1 = brownian_driver(ball, seed=3)
        w2 = brownian_driver(ball, seed=4)
        s1, s2 = r.solve(ball, w1), r.solve(ball, w2)
        res = r.check_holder_stability(ball, s1, s2, 1.0)
        gap = np.linalg.norm(w1.values[-1] - w2.values[-1])
        assert res["lhs"] == pytest.approx(gap**2, rel=1e-12)
        assert res["ok"]

    def test_coupled_pairs_sweep(self):
        for domain, shift in [
            (r.Ball([0, 0], 1.0), None),
            (r.BallExterior([0, 0], 1.0), (1.5, 0.0)),
        ]:
            for pid in range(20):
                w1 = brownian_driver(domain, seed=9, level=6, path_id=pid, shift=shift)
                w2 = brownian_driver(domain, seed=9, level=7, path_id=pid, shift=shift)
                s1 = r.solve(domain, w1, substeps=4)
                s2 = r.solve(domain, w2, substeps=4)
                assert r.check_holder_stability(domain, s1, s2, 1.0)["ok"]

    def test_dimension_mismatch(self):
        w = r.PiecewiseLinearPath([0, 1], [[1.0], [2.0]])
        sol = r.solve_halfline_1d(w)
        with pytest.raises(DomainMismatch):
            r.check_holder_stability(r.Ball([0, 0], 1.0), sol, sol, 1.0)


def test_diagnostics():
    w = r.PiecewiseLinearPath([0, 1, 2], [[0.0], [-1.0], [0.0]])
    sol = r.solve_halfline_1d(w)
    d = r.diagnostics(sol, w, 0.0, 2.0, 0.5)
    assert d["phi_variation"] == pytest.approx(1.0, abs=1e-12)
    assert d["sup_osc"] == pytest.approx(1.0, abs=1e-12)
    assert d["holder_quotient"] == pytest.approx(1.0, abs=1e-12)
    # interior-only driver has no correction
    w2 = r.PiecewiseLinearPath([0, 1], [[1.0], [2.0]])
    sol2 = r.solve_halfline_1d(w2)
    assert r.diagnostics(sol2, w2, 0.0, 1.0, 0.5)["phi_variation"] == 0.0


def test_invariants_on_solver_outputs():
    cases = [
        (r.HalfSpace([1, 0], 0.0), None),
        (r.Ball([0, 0], 1.0), None),
        (r.unit_box(2), (0.5, 0.5)),
        (r.BallExterior([0, 0], 1.0), (1.5, 0.0)),
    ]
    for domain, shift in cases:
        for pid in range(5):
            w = brownian_driver(domain, seed=21, path_id=pid, shift=shift)
            sol = r.solve(domain, w, substeps=4)
            res = r.verify_invariants(domain, sol, w, substeps=4)
            scale = 1.0 + float(np.max(np.linalg.norm(sol.xi.values, axis=1)))
            assert res["decomposition"] <= 1e-12
            assert res["containment"] <= domain.eps_bd * scale
            assert res["support"] <= 1e-12
            assert res["direction"] <= 1e-6
            assert res["phi_variation"] <= 1e-12
            assert res["phi_var_monotone"]


def test_refinement_stability_on_ball():
    ball = r.Ball([0, 0], 1.0)
    for pid in range(3):
        w = brownian_driver(ball, seed=2, level=4, path_id=pid)
        sols = [r.solve(ball, w, substeps=s) for s in (4, 8, 16, 32)]
        diffs = []
        for a, b in zip(sols[:-1], sols[1:]):
            sa = (a.times.size - 1) // (w.times.size - 1)
            sb = (b.times.size - 1) // (w.times.size - 1)
            diffs.append(
                np.max(
                    np.linalg.norm(
                        a.xi.values[::sa] - b.xi.values[::sb], axis=1
                    )
                )
            )
        for d0, d1 in zip(diffs[:-1], diffs[1:]):
            assert d1 <= d0 / 1.5


def test_solve_refined():
    ball = r.Ball([0, 0], 1.0)
    w = brownian_driver(ball, seed=2, level=4)
    sol = r.solve_refined(ball, w, substeps=4, budget=1e-4)
    assert isinstance(sol, r.SkorohodSolution)
    with pytest.raises(NonConvergent):
        r.solve_refined(ball, w, substeps=1, budget=0.0, max_doublings=3)


def test_ball_exterior_step_guard():
    be = r.BallExterior([0, 0], 1.0)
    w = r.PiecewiseLinearPath([0, 1], [[1.5, 0.0], [-1.5, 0.0]])
    with pytest.raises(ProjectionOutOfReach):
        r.solve(be, w, substeps=1)
    sol = r.solve(be, w, substeps=16)  # short pieces stay in reach
    assert np.all(np.linalg.norm(sol.xi.values, axis=1) >= 1.0 - 1e-9)


def test_solution_csv_round_trip():
    ball = r.Ball([0, 0], 1.0)
    w = brownian_driver(ball, seed=5, level=4)
    sol = r.solve(ball, w, substeps=2)
    buf = io.StringIO()
    sol.to_csv(buf)
    buf.seek(0)
    again = r.SkorohodSolution.from_csv(buf)
    assert again == sol
