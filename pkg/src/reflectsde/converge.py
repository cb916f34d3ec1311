"""Monte Carlo strong-error harness.

Measures E[max_t |X^N(t) - X(t)|^{2p}]^{1/(2p)} against a fine-grid
reference coupled through the dyadic Brownian skeleton, fits the log-log
rate, and runs the drift-identification experiment that separates the
Stratonovich-corrected limit from the uncorrected one.

Paths are independent work units processed in fixed-size chunks; the
reduction over paths is performed in path-id order no matter how many
workers execute the chunks, so reports are bit-reproducible for a given
(config, seed).
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, DegenerateFit, PathFailureBudgetExceeded, ReflectSDEError
from .paths import BrownianGenerator
from .schemes import euler_peano_core, reflected_ode_core, stratonovich_drift

_CHUNK = 250  # fixed chunk size; worker count must never change results


def fit_rate(levels, errors, horizon=1.0):
    """OLS slope of log error against log Delta_N = log(horizon / 2^level)."""
    levels = np.asarray(levels, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if levels.size < 3:
        raise ConfigError("rate fit needs at least 3 levels")
    if np.any(errors <= 0.0):
        raise DegenerateFit("zero error level; the scheme is exact here")
    deltas = horizon / 2.0**levels
    return float(np.polyfit(np.log(deltas), np.log(errors), 1)[0])


def _fmt(v):
    return format(v, ".17g")


@dataclass(frozen=True)
class ConvergenceReport:
    levels: tuple
    errors: tuple
    stderrs: tuple
    fitted_rate: float
    p: int
    ref_level: int
    horizon: float
    config_echo: dict

    def to_json(self):
        payload = {
            "levels": list(self.levels),
            "errors": [_fmt(e) for e in self.errors],
            "stderrs": [_fmt(e) for e in self.stderrs],
            "fitted_rate": _fmt(self.fitted_rate),
            "p": self.p,
            "ref_level": self.ref_level,
            "horizon": _fmt(self.horizon),
            "config": self.config_echo,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    def to_csv(self):
        lines = ["level,N,delta,error,stderr"]
        for k, e, s in zip(self.levels, self.errors, self.stderrs):
            n = 1 << k
            lines.append(
                f"{k},{n},{_fmt(self.horizon / n)},{_fmt(e)},{_fmt(s)}"
            )
        lines.append(f"fitted_rate={_fmt(self.fitted_rate)}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class DriftCheckReport:
    level: int
    ref_level: int
    p: int
    err_vs_stratonovich: float
    stderr_vs_stratonovich: float
    err_vs_ito: float
    stderr_vs_ito: float
    correction_active: bool
    config_echo: dict

    def to_json(self):
        payload = {
            "level": self.level,
            "ref_level": self.ref_level,
            "p": self.p,
            "err_vs_stratonovich": _fmt(self.err_vs_stratonovich),
            "stderr_vs_stratonovich": _fmt(self.stderr_vs_stratonovich),
            "err_vs_ito": _fmt(self.err_vs_ito),
            "stderr_vs_ito": _fmt(self.stderr_vs_ito),
            "correction_active": self.correction_active,
            "config": self.config_echo,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _moment_stats(z, p):
    """Root-moment estimate and its delta-method standard error."""
    m = float(np.mean(z))
    s = float(np.std(z, ddof=1)) / np.sqrt(z.size)
    root = m ** (1.0 / (2 * p))
    if m == 0.0:
        return 0.0, 0.0
    return root, s * m ** (1.0 / (2 * p) - 1.0) / (2 * p)


def _chunks(m):
    return [(i, min(i + _CHUNK, m)) for i in range(0, m, _CHUNK)]


def _synthetic_inject(ref_coarse, delta):
    """Test fixture: the reference shifted by a sqrt(delta) unit offset."""
    out = ref_coarse.copy()
    out[..., 0] += np.sqrt(delta)
    return out


def _run_chunk(domain, coef, ref_coef, scheme, gen, levels, ref_level, x0,
               substeps, start, stop, inject):
    npaths = stop - start
    d = coef.dim
    bfine = np.empty((npaths, (1 << ref_level) + 1, coef.noise_dim))
    for i, pid in enumerate(range(start, stop)):
        bfine[i] = gen.knots(ref_level, pid)
    x0b = np.broadcast_to(np.asarray(x0, dtype=float), (npaths, d))
    dt_ref = gen.horizon / (1 << ref_level)
    ref_xs, _ = euler_peano_core(domain, ref_coef, bfine, dt_ref, x0b, substeps=1)
    errs = np.empty((npaths, len(levels)))
    for j, lev in enumerate(levels):
        stride = 1 << (ref_level - lev)
        coarse = bfine[:, ::stride]
        ref_sub = ref_xs[:, ::stride]
        delta = gen.horizon / (1 << lev)
        if inject is not None:
            xs = inject(ref_sub, delta)
        elif scheme == "euler_peano":
            xs, _ = euler_peano_core(domain, coef, coarse, delta, x0b, substeps)
        elif scheme == "wong_zakai":
            times = gen.grid(lev)
            xs, _ = reflected_ode_core(domain, coef, coarse, times, x0b, substeps)
        else:
            raise ConfigError(f"unknown scheme {scheme!r}")
        errs[:, j] = np.max(np.linalg.norm(xs - ref_sub, axis=2), axis=1)
    return errs


def _run_chunk_guarded(args):
    """Run a chunk; on a numerical failure fall back to per-path runs so
    that only the offending paths are lost (marked NaN)."""
    (domain, coef, ref_coef, scheme, gen, levels, ref_level, x0, substeps,
     start, stop, inject) = args
    try:
        return _run_chunk(domain, coef, ref_coef, scheme, gen, levels,
                          ref_level, x0, substeps, start, stop, inject)
    except ReflectSDEError:
        out = np.empty((stop - start, len(levels)))
        for i, pid in enumerate(range(start, stop)):
            try:
                out[i] = _run_chunk(domain, coef, ref_coef, scheme, gen,
                                    levels, ref_level, x0, substeps,
                                    pid, pid + 1, inject)[0]
            except ReflectSDEError:
                out[i] = np.nan
        return out


def strong_error_study(domain, coef, scheme, p, levels, m, seed, *, x0,
                       horizon=1.0, substeps=None, workers=1, inject=None):
    """Coupled strong-error estimates of one scheme over dyadic levels.

    The reference is the left-frozen scheme at ref_level = max(levels) + 2,
    targeting SDE(sigma, b) for the euler_peano study and the
    Stratonovich-corrected SDE(sigma, b~) for the wong_zakai study.  All
    levels of each path share one Brownian skeleton through the dyadic
    bridge, and errors are taken over the coarse run's grid times.
    """
    if m < 100:
        raise ConfigError("need at least 100 Monte Carlo paths")
    if p not in (1, 2):
        raise ConfigError("p must be 1 or 2")
    levels = sorted(int(k) for k in levels)
    if len(set(levels)) != len(levels):
        raise ConfigError("levels must be distinct")
    ref_level = max(levels) + 2
    gen = BrownianGenerator(seed, coef.noise_dim, horizon, max_level=ref_level)
    if substeps is None:
        substeps = 16 if scheme == "wong_zakai" else 1
    if scheme == "synthetic":
        inject = _synthetic_inject
        scheme = "euler_peano"
    if scheme not in ("euler_peano", "wong_zakai"):
        raise ConfigError(f"unknown scheme {scheme!r}")
    ref_coef = stratonovich_drift(coef) if scheme == "wong_zakai" else coef
    if inject is None:
        _assert_coupling(gen, levels, ref_level)

    jobs = [
        (domain, coef, ref_coef, scheme, gen, levels, ref_level, x0, substeps,
         start, stop, inject)
        for start, stop in _chunks(m)
    ]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk_guarded, jobs))
    else:
        parts = [_run_chunk_guarded(j) for j in jobs]
    errs = np.vstack(parts)
    bad = np.any(np.isnan(errs), axis=1)
    if np.count_nonzero(bad) > 0.01 * m:
        raise PathFailureBudgetExceeded(
            f"{np.count_nonzero(bad)} of {m} paths aborted"
        )
    errs = errs[~bad]
    z = errs ** (2 * p)
    stats = [_moment_stats(z[:, j], p) for j in range(len(levels))]
    errors = tuple(s[0] for s in stats)
    stderrs = tuple(s[1] for s in stats)
    try:
        rate = fit_rate(levels, errors, horizon)
    except DegenerateFit:
        rate = np.inf  # exact-scheme sentinel
    echo = {
        "scheme": scheme,
        "coefficients": coef.name,
        "domain": type(domain).__name__,
        "p": p,
        "levels": levels,
        "paths": m,
        "seed": seed,
        "substeps": substeps,
        "x0": list(np.atleast_1d(np.asarray(x0, dtype=float))),
        "synthetic": inject is not None,
    }
    return ConvergenceReport(
        levels=tuple(levels),
        errors=errors,
        stderrs=stderrs,
        fitted_rate=rate,
        p=p,
        ref_level=ref_level,
        horizon=horizon,
        config_echo=echo,
    )


def _assert_coupling(gen, levels, ref_level, path_id=0):
    fine = gen.knots(ref_level, path_id)
    for lev in levels:
        stride = 1 << (ref_level - lev)
        if not np.array_equal(fine[::stride], gen.knots(lev, path_id)):
            raise AssertionError("bridge coupling violated across levels")


def drift_correction_study(domain, coef, p, level, m, seed, *, x0, horizon=1.0,
                           substeps=64, workers=1):
    """Coupled error of the polyline scheme against the two candidate limits.

    err_vs_stratonovich compares against the left-frozen reference for the
    corrected drift b~; err_vs_ito against the uncorrected drift b.  When the
    correction tr(Dsigma)(sigma) vanishes the two references coincide and the
    report flags correction_active = False.

    The default substep count is higher than for the convergence study: the
    inner integrator's bias, roughly |Dsigma sigma| T / (2 substeps), is
    level-independent and must sit well below the level errors being
    compared.
    """
    if m < 100:
        raise ConfigError("need at least 100 Monte Carlo paths")
    ref_level = level + 2
    gen = BrownianGenerator(seed, coef.noise_dim, horizon, max_level=ref_level)
    strat = stratonovich_drift(coef)
    probes = np.random.default_rng(0).normal(0.0, 2.0, size=(64, coef.dim))
    correction = strat.b(probes) - coef.b(probes)
    active = bool(np.max(np.abs(correction)) > 1e-12)

    def chunk_job(bounds):
        start, stop = bounds
        npaths = stop - start
        bfine = np.empty((npaths, (1 << ref_level) + 1, coef.noise_dim))
        for i, pid in enumerate(range(start, stop)):
            bfine[i] = gen.knots(ref_level, pid)
        x0b = np.broadcast_to(np.asarray(x0, dtype=float), (npaths, coef.dim))
        dt_ref = gen.horizon / (1 << ref_level)
        ref_strat, _ = euler_peano_core(domain, strat, bfine, dt_ref, x0b, 1)
        ref_ito, _ = euler_peano_core(domain, coef, bfine, dt_ref, x0b, 1)
        stride = 1 << (ref_level - level)
        coarse = bfine[:, ::stride]
        times = gen.grid(level)
        xs, _ = reflected_ode_core(domain, coef, coarse, times, x0b, substeps)
        e1 = np.max(np.linalg.norm(xs - ref_strat[:, ::stride], axis=2), axis=1)
        e2 = np.max(np.linalg.norm(xs - ref_ito[:, ::stride], axis=2), axis=1)
        return np.column_stack([e1, e2])

    jobs = _chunks(m)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(chunk_job, jobs))
    else:
        parts = [chunk_job(j) for j in jobs]
    errs = np.vstack(parts)
    z = errs ** (2 * p)
    e_strat, se_strat = _moment_stats(z[:, 0], p)
    e_ito, se_ito = _moment_stats(z[:, 1], p)
    echo = {
        "coefficients": coef.name,
        "domain": type(domain).__name__,
        "p": p,
        "level": level,
        "paths": m,
        "seed": seed,
        "substeps": substeps,
        "x0": list(np.atleast_1d(np.asarray(x0, dtype=float))),
    }
    return DriftCheckReport(
        level=level,
        ref_level=ref_level,
        p=p,
        err_vs_stratonovich=e_strat,
        stderr_vs_stratonovich=se_strat,
        err_vs_ito=e_ito,
        stderr_vs_ito=se_ito,
        correction_active=active,
        config_echo=echo,
    )
