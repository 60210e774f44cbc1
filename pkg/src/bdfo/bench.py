"""Benchmark harness: run matrices, data profiles, and file output.

A run is identified by ``(problem, fraction, seed, solver)``; its mask is drawn
from ``(n, fraction, seed)`` alone, so any run can be repeated exactly.  Cost is
the number of distinct oracle requests divided by ``n + 1``.  A problem counts
as solved at the first iterate whose true gradient norm is at most ``tau``.
"""
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import AvailableSet, DataSet, Datum, basis_size
from .interp import NotPoised, birkhoff_polynomials
from .oracle import get_problem, make_mask, problem_suite
from .pivot import complete
from .solver import SolverParams, hermite_solve, solve

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

__all__ = [
    "RunConfig",
    "ProfilePoint",
    "SUITE_NOTE",
    "data_profile",
    "default_template",
    "load_config",
    "median_units",
    "run_matrix",
    "run_one",
    "scan_function",
    "write_profiles",
]

SCHEMA_VERSION = 1
SOLVERS = {"birkhoff": solve, "hermite": hermite_solve}
SUITE_NOTE = "native analytic suite with closed-form derivatives, not a standard external collection"


def load_config(path):
    """Read a flat key/value document in TOML (``.toml``) or JSON syntax."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if str(path).endswith(".json"):
        return json.loads(raw.decode())
    return tomllib.loads(raw.decode())


def default_seed():
    return int(os.environ.get("BDFO_SEED", "1"))


@dataclass
class RunConfig:
    problems: list = field(default_factory=lambda: [p.name for p in problem_suite()])
    fractions: list = field(default_factory=lambda: [0.25, 0.5, 0.75])
    seeds: list = None
    solvers: list = field(default_factory=lambda: ["birkhoff"])
    taus: list = field(default_factory=lambda: [1e-2])
    budget: float = 500.0
    params: dict = field(default_factory=dict)
    workers: int = None

    def __post_init__(self):
        if self.workers is None:
            self.workers = os.cpu_count() or 1
        if self.seeds is None:
            s = default_seed()
            self.seeds = [s, s + 1, s + 2]
        for name in ("problems", "fractions", "seeds", "solvers", "taus"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be a nonempty list")
        if any(not 0 < f <= 1 for f in self.fractions):
            raise ValueError("fractions must lie in (0, 1]")
        unknown = [s for s in self.solvers if s not in SOLVERS]
        if unknown:
            raise ValueError(f"unknown solver(s) {unknown}")
        for name in self.problems:
            get_problem(name)
        if self.budget < 0:
            raise ValueError("budget must be nonnegative")

    @classmethod
    def from_mapping(cls, m):
        keys = set(cls.__dataclass_fields__)
        bad = set(m) - keys
        if bad:
            raise ValueError(f"unknown config keys {sorted(bad)}")
        return cls(**dict(m))

    def keys(self):
        """All runs in the canonical merge order."""
        return [(p, fr, s, sv) for p in self.problems for fr in self.fractions
                for s in self.seeds for sv in self.solvers]

    def to_dict(self):
        return asdict(self)


def run_one(problem_name, fraction, seed, solver, taus, budget, params=None):
    """Run one configuration and record when each ``tau`` was first reached.

    The run stops early once the smallest ``tau`` is met, since later
    iterates cannot change the profile.
    """
    problem = get_problem(problem_name)
    mask = make_mask(problem.n, fraction, seed)
    kw = dict(params or {})
    kw["budget"] = budget
    sp = SolverParams(**kw)
    taus = sorted(set(float(t) for t in taus), reverse=True)
    solved = {t: None for t in taus}

    def watch(rec):
        g = float(np.linalg.norm(problem.grad(np.asarray(rec.x))))
        for t in taus:
            if solved[t] is None and g <= t:
                solved[t] = rec.distinct
        return solved[taus[-1]] is not None

    rec = {
        "problem": problem_name,
        "n": problem.n,
        "fraction": float(fraction),
        "seed": int(seed),
        "solver": solver,
        "K": list(mask.known),
    }
    if budget == 0:
        rec.update(termination="budget", distinct_queries=0, solved={repr(t): None for t in taus})
        return rec
    try:
        res = SOLVERS[solver](problem, mask, params=sp, callback=watch)
    except Exception as exc:  # recorded per run, never fatal to the sweep
        rec.update(termination="error", distinct_queries=None, error=f"{type(exc).__name__}: {exc}",
                   solved={repr(t): None for t in taus})
        return rec
    # the initial point may already be stationary
    g0 = float(np.linalg.norm(problem.grad(problem.x0)))
    for t in taus:
        if g0 <= t:
            solved[t] = 1
    rec.update(
        termination=res.termination,
        distinct_queries=res.distinct_queries,
        f_final=res.f_final,
        solved={repr(t): solved[t] for t in taus},
    )
    return rec


def _run_key(args):
    key, taus, budget, params = args
    return run_one(*key, taus=taus, budget=budget, params=params)


def run_matrix(config):
    """All runs of ``config``, merged in :meth:`RunConfig.keys` order."""
    jobs = [(k, config.taus, config.budget, config.params) for k in config.keys()]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            return list(pool.map(_run_key, jobs))
    return [_run_key(j) for j in jobs]


@dataclass(frozen=True)
class ProfilePoint:
    normalized_units: float
    fraction_solved: float


def _units_to_solve(run, tau):
    q = run["solved"].get(repr(float(tau)))
    return math.inf if q is None else q / (run["n"] + 1)


def data_profile(runs, solver, fraction, tau):
    """Right-continuous step curve of the fraction of runs solved within a cost.

    The curve starts at ``(0, 0)`` and has one breakpoint per distinct cost at
    which some run was solved.
    """
    sel = [r for r in runs if r["solver"] == solver and r["fraction"] == fraction]
    if not sel:
        return []
    costs = sorted(_units_to_solve(r, tau) for r in sel)
    finite = [c for c in costs if math.isfinite(c)]
    pts = [ProfilePoint(0.0, 0.0)]
    for c in sorted(set(finite)):
        frac = sum(1 for v in finite if v <= c) / len(sel)
        if c == 0.0:
            pts[0] = ProfilePoint(0.0, frac)
        else:
            pts.append(ProfilePoint(float(c), frac))
    return pts


def median_units(runs, solver, fraction, tau):
    """Median cost to reach ``tau`` over the runs, unsolved runs counting as inf."""
    vals = [_units_to_solve(r, tau) for r in runs if r["solver"] == solver and r["fraction"] == fraction]
    if not vals:
        return math.nan
    return float(np.median(vals))


def _fmt(x):
    return repr(float(x)) if math.isfinite(x) else ("inf" if x > 0 else "nan")


def _tag(x):
    return format(float(x), "g")


def write_profiles(config, runs, out_dir):
    """Write one CSV per ``(solver, fraction, tau)`` curve and a combined JSON.

    Returns the list of paths written, JSON last.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    curves = []
    medians = []
    nprob = len(config.problems)
    for solver in config.solvers:
        for tau in config.taus:
            series = []
            for fr in config.fractions:
                pts = data_profile(runs, solver, fr, tau)
                name = f"profile_{solver}_frac{_tag(fr)}_tau{_tag(tau)}.csv"
                path = os.path.join(out_dir, name)
                with open(path, "w", newline="\n") as fh:
                    fh.write(f"# bdfo-profile schema={SCHEMA_VERSION} solver={solver} fraction={_tag(fr)} "
                             f"tau={_tag(tau)} problems={nprob} seeds={len(config.seeds)} "
                             f"suite=\"{SUITE_NOTE}\"\n")
                    fh.write("normalized_units,fraction_solved\n")
                    for p in pts:
                        fh.write(f"{_fmt(p.normalized_units)},{_fmt(p.fraction_solved)}\n")
                paths.append(path)
                curves.append({"solver": solver, "fraction": fr, "tau": tau, "file": name,
                               "points": [[p.normalized_units, p.fraction_solved] for p in pts]})
                med = median_units(runs, solver, fr, tau)
                series.append(med)
                medians.append({"solver": solver, "fraction": fr, "tau": tau,
                                "median_units": med if math.isfinite(med) else None})
            ordered = [m for _, m in sorted(zip(config.fractions, series))]
            monotone = all(b <= a for a, b in zip(ordered, ordered[1:]))
            medians.append({"solver": solver, "tau": tau, "nonincreasing_in_fraction": monotone})
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "profile",
        "suite": SUITE_NOTE,
        "config": config.to_dict(),
        "curves": curves,
        "medians": medians,
        "runs": runs,
    }
    path = os.path.join(out_dir, "profile.json")
    with open(path, "w", newline="\n") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True, default=_json_default)
        fh.write("\n")
    paths.append(path)
    return paths


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


# ---------------------------------------------------------------- heatmap configurations

_R = math.sqrt(2.0) / 2.0

HEATMAP_PRESETS = {
    # value and both first derivatives at y1; a value and d/dx1 are added at the cell
    "mixed-pair": {
        "base": [[[0.0, 0.0], [0, 0]], [[_R, _R], [0, 0]], [[_R, _R], [1, 0]], [[_R, _R], [0, 1]]],
        "additions": [[0, 0], [1, 0]],
    },
    # an extra value at (r, -r); only a value is added at the cell
    "value-only": {
        "base": [[[0.0, 0.0], [0, 0]], [[_R, _R], [0, 0]], [[_R, _R], [1, 0]], [[_R, _R], [0, 1]],
                 [[_R, -_R], [0, 0]]],
        "additions": [[0, 0]],
    },
}


def parse_heatmap_config(cfg):
    """Turn a mapping into ``(base, additions, A, center, radius, resolution)``.

    Keys: ``preset`` or ``base`` (list of ``[point, alpha]``) plus
    ``additions`` (list of alpha); optional ``available`` (list of alpha) or
    ``known`` (0-based coordinates), ``center``, ``radius``, ``resolution``.
    """
    cfg = dict(cfg)
    preset = cfg.pop("preset", None)
    if preset is not None:
        if preset not in HEATMAP_PRESETS:
            raise ValueError(f"unknown preset {preset!r}")
        merged = dict(HEATMAP_PRESETS[preset])
        merged.update(cfg)
        cfg = merged
    try:
        base = DataSet([Datum(p, a) for p, a in cfg["base"]])
        additions = [tuple(int(v) for v in a) for a in cfg["additions"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed heatmap configuration: {exc}") from exc
    n = base.n
    if "available" in cfg:
        A = AvailableSet(cfg["available"], n)
    elif "known" in cfg:
        A = AvailableSet.supported_on(n, cfg["known"])
    else:
        A = AvailableSet.full(n)
    center = np.asarray(cfg.get("center", base.center), dtype=float)
    return base, additions, A, center, float(cfg.get("radius", 1.0)), int(cfg.get("resolution", 64))


def parse_geometry(cfg):
    """Template data for error scans from ``{"data": [[point, alpha], ...]}``.

    The data must hold ``q + 1`` poised conditions, center first.
    """
    try:
        D = DataSet([Datum(p, a) for p, a in cfg["data"]])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed geometry: {exc}") from exc
    if len(D) != basis_size(D.n):
        raise ValueError(f"geometry needs {basis_size(D.n)} conditions for n={D.n}, got {len(D)}")
    try:
        birkhoff_polynomials(D)
    except NotPoised as exc:
        raise ValueError(f"geometry is not poised: {exc}") from exc
    return D


# ---------------------------------------------------------------- error-scan targets

def _scan_quadratic(n):
    Q = np.diag(np.arange(1.0, n + 1)) + 0.5 * (np.ones((n, n)) - np.eye(n))
    return (lambda x: 1.0 + x.sum() + 0.5 * x @ Q @ x,
            lambda x: 1.0 + Q @ x,
            lambda x: Q.copy(),
            lambda c, d: 0.0)


def _scan_exp1(n):
    def grad(x):
        g = np.zeros(n)
        g[0] = math.exp(x[0])
        return g

    def hess(x):
        H = np.zeros((n, n))
        H[0, 0] = math.exp(x[0])
        return H

    return (lambda x: math.exp(x[0]), grad, hess, lambda c, d: math.exp(c[0] + d))


def _scan_sincos(n):
    if n < 2:
        raise ValueError("sincos needs n >= 2")

    def f(x):
        return math.sin(x[0]) * math.cos(x[1])

    def grad(x):
        g = np.zeros(n)
        g[0] = math.cos(x[0]) * math.cos(x[1])
        g[1] = -math.sin(x[0]) * math.sin(x[1])
        return g

    def hess(x):
        H = np.zeros((n, n))
        s0, c0, s1, c1 = math.sin(x[0]), math.cos(x[0]), math.sin(x[1]), math.cos(x[1])
        H[0, 0] = H[1, 1] = -s0 * c1
        H[0, 1] = H[1, 0] = -c0 * s1
        return H

    # the third-derivative tensor has Frobenius norm at most 2 everywhere
    return f, grad, hess, lambda c, d: 2.0


SCAN_FUNCTIONS = {"quadratic": _scan_quadratic, "exp1": _scan_exp1, "sincos": _scan_sincos}


def scan_function(name, n):
    """``(f, grad, hess, lipschitz)`` for a named error-scan target in ``R^n``."""
    try:
        return SCAN_FUNCTIONS[name](n)
    except KeyError:
        raise KeyError(f"unknown scan function {name!r}; choose from {sorted(SCAN_FUNCTIONS)}") from None


def default_template(n, known=(0,)):
    """Poised unit-radius geometry from completing the empty history at the origin."""
    A = AvailableSet.supported_on(n, list(known))
    return complete([], np.zeros(n), 1.0, available=A).data
