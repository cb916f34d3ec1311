"""Command-line front end.

Experiments are described by a sectioned key-value config file (INI syntax)
naming one of five commands: ``skorohod``, ``simulate``, ``converge``,
``drift-check`` or ``check-bounds``.  Unknown sections or keys are rejected
so that a config file is a complete, reproducible experiment record.  The
``--threads`` flag only affects wall time, never results; the
``REFLECTSDE_SEED`` environment variable overrides the config seed.

Exit codes: 0 success, 1 validation error, 2 numerical failure, 3 a bound
check found a counterexample.
"""

import argparse
import configparser
import os
import sys

import numpy as np

from . import converge as cv
from . import domains as dm
from . import schemes as sc
from . import skorohod as sk
from .errors import (
    ConfigError,
    NonConvergent,
    PathFailureBudgetExceeded,
    ProjectionOutOfReach,
    ReflectSDEError,
    StartOutsideClosure,
)
from .paths import BrownianGenerator, PiecewiseLinearPath

_COMMANDS = ("skorohod", "simulate", "converge", "drift-check", "check-bounds")

_SCHEMA = {
    "run": {"command", "seed", "horizon", "out"},
    "domain": {"kind", "dim", "normal", "offset", "center", "radius",
               "lower", "upper", "normals", "offsets"},
    "coefficients": {"name", "dim", "scale"},
    "skorohod": {"level", "substeps", "x0"},
    "simulate": {"scheme", "level", "substeps", "x0", "path_id"},
    "converge": {"scheme", "levels", "paths", "p", "substeps", "x0"},
    "drift_check": {"level", "paths", "p", "substeps", "x0"},
    "check_bounds": {"cases", "level", "substeps", "x0"},
}

_DOMAIN_KEYS = {
    "whole_space": {"kind", "dim"},
    "half_space": {"kind", "normal", "offset"},
    "ball": {"kind", "center", "radius"},
    "ball_exterior": {"kind", "center", "radius"},
    "box": {"kind", "lower", "upper"},
    "polyhedron": {"kind", "normals", "offsets"},
}


def _floats(text):
    return np.array([float(tok) for tok in text.split()])


def _ints(text):
    return [int(tok) for tok in text.split()]


def load_config(path):
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file {path!r} not found")
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
    if "run" not in parser or "command" not in parser["run"]:
        raise ConfigError("missing [run] command")
    command = parser["run"]["command"]
    if command not in _COMMANDS:
        raise ConfigError(f"unknown command {command!r}; choose from {_COMMANDS}")
    return parser


def build_domain(cfg):
    if "domain" not in cfg:
        raise ConfigError("missing [domain] section")
    sec = cfg["domain"]
    kind = sec.get("kind")
    if kind not in _DOMAIN_KEYS:
        raise ConfigError(f"unknown domain kind {kind!r}")
    extra = set(sec) - _DOMAIN_KEYS[kind]
    if extra:
        raise ConfigError(f"keys {sorted(extra)} do not apply to kind {kind!r}")
    try:
        if kind == "whole_space":
            return dm.WholeSpace(int(sec["dim"]))
        if kind == "half_space":
            return dm.HalfSpace(_floats(sec["normal"]), float(sec.get("offset", 0.0)))
        if kind == "ball":
            return dm.Ball(_floats(sec["center"]), float(sec["radius"]))
        if kind == "ball_exterior":
            return dm.BallExterior(_floats(sec["center"]), float(sec["radius"]))
        if kind == "box":
            return dm.Box(_floats(sec["lower"]), _floats(sec["upper"]))
        rows = [_floats(row) for row in sec["normals"].split(";")]
        return dm.ConvexPolyhedron(np.vstack(rows), _floats(sec["offsets"]))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"invalid [domain] for kind {kind!r}: {exc}") from exc


def build_coefficients(cfg):
    if "coefficients" not in cfg:
        raise ConfigError("missing [coefficients] section")
    sec = cfg["coefficients"]
    name = sec.get("name")
    try:
        dim = int(sec["dim"])
    except KeyError as exc:
        raise ConfigError("missing [coefficients] dim") from exc
    kwargs = {}
    if "scale" in sec:
        key = "sigma_scale" if name == "tanh_drift" else "scale"
        kwargs[key] = float(sec["scale"])
    try:
        return sc.make_coefficients(name, dim, **kwargs)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [coefficients]: {exc}") from exc


def _seed(cfg):
    env = os.environ.get("REFLECTSDE_SEED")
    if env is not None:
        return int(env)
    return cfg.getint("run", "seed", fallback=0)


def _x0(sec, dim):
    x0 = _floats(sec.get("x0", "0"))
    if x0.size == 1 and dim > 1:
        x0 = np.full(dim, x0[0])
    if x0.size != dim:
        raise ConfigError(f"x0 has {x0.size} coordinates, expected {dim}")
    return x0


def _shifted_driver(gen, level, x0, path_id=0):
    knots = gen.knots(level, path_id) + x0
    return PiecewiseLinearPath(gen.grid(level), knots)


def run(cfg, threads=1, out=None):
    """Execute the configured command; returns the process exit status."""
    command = cfg["run"]["command"]
    seed = _seed(cfg)
    horizon = cfg.getfloat("run", "horizon", fallback=1.0)
    out = out or cfg.get("run", "out", fallback="reflectsde_out")
    domain = build_domain(cfg)

    if command == "skorohod":
        sec = cfg["skorohod"] if "skorohod" in cfg else {}
        level = int(sec.get("level", 6))
        substeps = int(sec.get("substeps", 1))
        x0 = _x0(sec, domain.dim)
        gen = BrownianGenerator(seed, domain.dim, horizon, max_level=level)
        sol = sk.solve(domain, _shifted_driver(gen, level, x0), substeps)
        sol.to_csv(f"{out}_skorohod.csv")
        return 0

    if command == "simulate":
        coef = build_coefficients(cfg)
        sec = cfg["simulate"] if "simulate" in cfg else {}
        scheme = sec.get("scheme", "euler_peano")
        level = int(sec.get("level", 6))
        path_id = int(sec.get("path_id", 0))
        x0 = _x0(sec, coef.dim)
        gen = BrownianGenerator(seed, coef.noise_dim, horizon, max_level=level)
        if scheme == "euler_peano":
            substeps = int(sec.get("substeps", 1))
            run_ = sc.euler_peano(domain, coef, gen, level, x0, substeps, path_id)
        elif scheme == "wong_zakai":
            substeps = int(sec.get("substeps", 16))
            run_ = sc.wong_zakai(domain, coef, gen, level, x0, substeps, path_id)
        else:
            raise ConfigError(f"unknown scheme {scheme!r}")
        run_.to_csv(f"{out}_run.csv")
        return 0

    if command == "converge":
        coef = build_coefficients(cfg)
        sec = cfg["converge"] if "converge" in cfg else {}
        report = cv.strong_error_study(
            domain,
            coef,
            sec.get("scheme", "euler_peano"),
            int(sec.get("p", 1)),
            _ints(sec.get("levels", "4 5 6")),
            int(sec.get("paths", 200)),
            seed,
            x0=_x0(sec, coef.dim),
            horizon=horizon,
            substeps=int(sec["substeps"]) if "substeps" in sec else None,
            workers=threads,
        )
        with open(f"{out}_converge.json", "w", newline="\n") as fh:
            fh.write(report.to_json())
        with open(f"{out}_converge.csv", "w", newline="\n") as fh:
            fh.write(report.to_csv())
        return 0

    if command == "drift-check":
        coef = build_coefficients(cfg)
        sec = cfg["drift_check"] if "drift_check" in cfg else {}
        report = cv.drift_correction_study(
            domain,
            coef,
            int(sec.get("p", 1)),
            int(sec.get("level", 6)),
            int(sec.get("paths", 200)),
            seed,
            x0=_x0(sec, coef.dim),
            horizon=horizon,
            substeps=int(sec.get("substeps", 16)),
            workers=threads,
        )
        with open(f"{out}_drift.json", "w", newline="\n") as fh:
            fh.write(report.to_json())
        return 0

    # check-bounds
    sec = cfg["check_bounds"] if "check_bounds" in cfg else {}
    cases = int(sec.get("cases", 100))
    level = int(sec.get("level", 6))
    substeps = int(sec.get("substeps", 4))
    x0 = _x0(sec, domain.dim)
    gen = BrownianGenerator(seed, domain.dim, horizon, max_level=level + 1)
    lines = []
    violations = 0
    for i in range(cases):
        w = _shifted_driver(gen, level, x0, path_id=i)
        w2 = _shifted_driver(gen, level + 1, x0, path_id=i)
        sol = sk.solve(domain, w, substeps)
        sol2 = sk.solve(domain, w2, substeps)
        var = sk.check_xi_variation_bound(sol, w, 0.0, horizon)
        hol = sk.check_holder_stability(domain, sol, sol2, horizon)
        ok = var["ok"] and hol["ok"]
        lines.append(
            f"case {i}: variation {'ok' if var['ok'] else 'VIOLATED'} "
            f"(lhs={var['lhs']:.6g} rhs={var['rhs']:.6g}), "
            f"holder {'ok' if hol['ok'] else 'VIOLATED'} "
            f"(lhs={hol['lhs']:.6g} rhs={hol['rhs']:.6g})"
        )
        if not ok:
            violations += 1
            w.to_csv(f"{out}_counterexample_{i}.csv")
    lines.append(f"total cases: {cases}, violations: {violations}")
    with open(f"{out}_bounds.txt", "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return 3 if violations else 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="reflectsde",
        description="Reflected-SDE simulation and convergence experiments.",
    )
    parser.add_argument("--config", required=True, help="experiment config file")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads (wall time only, never results)")
    parser.add_argument("--out", default=None, help="output file prefix")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        return run(cfg, threads=args.threads, out=args.out)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NonConvergent, PathFailureBudgetExceeded, ProjectionOutOfReach,
            StartOutsideClosure) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except ReflectSDEError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _entry():  # console-script hook
    sys.exit(main())


if __name__ == "__main__":
    _entry()
