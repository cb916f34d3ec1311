"""Simulation of stochastic differential equations with normal reflection.

The package provides domains with nearest-point projection and inward-normal
queries, a discrete Skorohod-problem solver with the explicit stability
inequalities as checkable predicates, the left-frozen (Euler-Peano) and
piecewise-linear-driver (Wong-Zakai) schemes with the Stratonovich drift
correction, and a deterministic Monte Carlo harness for strong-error rates.
"""

from .converge import (
    ConvergenceReport,
    DriftCheckReport,
    drift_correction_study,
    fit_rate,
    strong_error_study,
)
from .domains import (
    BOUNDARY,
    EXTERIOR,
    INTERIOR,
    Ball,
    BallExterior,
    Box,
    ConvexPolyhedron,
    Domain,
    HalfSpace,
    WholeSpace,
    half_line,
    unit_box,
)
from .paths import BrownianGenerator, PiecewiseLinearPath, sample_brownian
from .schemes import (
    CoefficientSet,
    SchemeRun,
    constant_coefficients,
    euler_peano,
    make_coefficients,
    refine_reflected_ode,
    solve_reflected_ode,
    stratonovich_drift,
    tanh_diag_coefficients,
    tanh_drift_coefficients,
    wong_zakai,
)
from .skorohod import (
    XI_VARIATION_FACTOR,
    SkorohodSolution,
    check_holder_stability,
    check_xi_variation_bound,
    diagnostics,
    solve,
    solve_halfline_1d,
    solve_refined,
    verify_invariants,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
