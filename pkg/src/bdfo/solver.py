"""Trust-region minimization with Birkhoff interpolation models.

Each iteration completes the stored history to a poised set inside the trust
region, fits the quadratic through it, and takes the exact trust-region step.
Geometry is repaired with a one-condition swap whenever a step is rejected or
the model looks critical.  A Hermite least-squares variant, which queries every
available derivative at each sample point, is provided as a baseline.
"""
import hashlib
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import Datum, QuadraticModel, derivative_rows, zero_index
from .interp import NotPoised, column_scaling, radius, solve_model
from .linalg import eig_min_symmetric, min_quadratic_ball
from .oracle import Mask, QueryLedger, hermite_expand, query
from .pivot import CompletionFailure, _slack, complete, improve

__all__ = [
    "IterateRecord",
    "SolveResult",
    "SolverParams",
    "Unrecoverable",
    "check_stationarity",
    "hermite_solve",
    "solve",
]

TERMINATIONS = ("sigma_small", "delta_small", "budget", "unrecoverable", "target")


class Unrecoverable(RuntimeError):
    """Completion kept failing after every retry."""


@dataclass(frozen=True)
class SolverParams:
    eta: float = 0.1
    gamma_dec: float = 0.5
    gamma_inc: float = 2.0
    eps_c: float = 1e-2
    beta: float = 1.0
    mu: float = 2.0
    delta0: float = 0.5
    delta_max: float = None
    xi_acc: float = 1e-4
    xi_imp: float = 2.0
    budget: float = 500.0
    stop_sigma: float = 1e-9
    stop_delta: float = 1e-13
    max_retries: int = 10
    max_iter: int = 100000
    literal_expand: bool = False
    debug: bool = False

    def __post_init__(self):
        if self.delta_max is None:
            object.__setattr__(self, "delta_max", 1e3 * self.delta0)
        if not 0 <= self.eta < 1:
            raise ValueError("need 0 <= eta < 1")
        if not 0 < self.gamma_dec < 1 < self.gamma_inc:
            raise ValueError("need 0 < gamma_dec < 1 < gamma_inc")
        if not self.eps_c > 0:
            raise ValueError("need eps_c > 0")
        if not self.mu > self.beta > 0:
            raise ValueError("need mu > beta > 0")
        if not 0 < self.delta0 < self.delta_max:
            raise ValueError("need 0 < delta0 < delta_max")
        if not self.xi_acc > 0 or not self.xi_imp > 1:
            raise ValueError("need xi_acc > 0 and xi_imp > 1")

    def budget_units(self, n):
        """Distinct-query budget; ``budget`` is a multiple of ``n + 1``."""
        return int(math.floor(self.budget * (n + 1)))

    def to_dict(self):
        return asdict(self)


@dataclass
class IterateRecord:
    """One trace line.

    ``distinct`` counts distinct oracle requests so far and ``queries`` all
    requests including cache hits.  ``event`` is one of ``accept``,
    ``reject``, ``improve`` (rejected step followed by a geometry swap),
    ``criticality``, ``stop`` or ``failure``.
    """

    k: int
    x: list
    f: float
    delta: float
    sigma: float
    rho: float
    step_norm: float
    model_digest: str
    distinct: int
    queries: int
    event: str

    def to_dict(self):
        d = asdict(self)
        for key in ("f", "delta", "sigma", "rho", "step_norm"):
            v = d[key]
            d[key] = v if math.isfinite(v) else repr(v)
        return d


@dataclass
class SolveResult:
    x_final: np.ndarray
    f_final: float
    trace: list
    termination: str
    problem: str = ""
    n: int = 0
    mask: Mask = None
    params: SolverParams = None
    solver: str = "birkhoff"
    ledger: QueryLedger = field(default=None, repr=False)
    message: str = ""

    @property
    def distinct_queries(self):
        return self.ledger.distinct_count if self.ledger is not None else self.trace[-1].distinct

    def to_dict(self):
        return {
            "schema_version": 1,
            "kind": "solve",
            "solver": self.solver,
            "problem": self.problem,
            "n": self.n,
            "mask": self.mask.to_dict() if self.mask is not None else None,
            "params": self.params.to_dict() if self.params is not None else None,
            "x_final": [float(v) for v in self.x_final],
            "f_final": self.f_final,
            "distinct_queries": self.distinct_queries,
            "normalized_units": self.distinct_queries / (self.n + 1),
            "termination": self.termination,
            "message": self.message,
            "trace": [r.to_dict() for r in self.trace],
        }


def check_stationarity(problem, x, tau):
    """True when the true gradient norm at ``x`` is at most ``tau``."""
    if tau == math.inf:
        return True
    return bool(np.linalg.norm(problem.grad(np.asarray(x, dtype=float))) <= tau)


def _digest(model):
    return hashlib.sha256(np.ascontiguousarray(model.coefficients()).tobytes()).hexdigest()[:16]


def _sigma(model):
    return max(float(np.linalg.norm(model.g)), -eig_min_symmetric(model.H))


class _Run:
    """Mutable state shared by both solver variants."""

    def __init__(self, problem, mask, x0, params, ledger, callback):
        self.problem = problem
        self.mask = mask
        self.params = params
        self.ledger = ledger if ledger is not None else QueryLedger()
        self.callback = callback
        self.n = problem.n
        self.budget = params.budget_units(self.n)
        self.trace = []
        self.x = np.array(problem.x0 if x0 is None else x0, dtype=float)
        if self.x.shape != (self.n,) or not np.all(np.isfinite(self.x)):
            raise ValueError("x0 must be a finite vector of the problem dimension")
        self.x.setflags(write=False)
        self.fx = self.value(Datum(self.x, zero_index(self.n)))
        self.delta = params.delta0
        self.k = 0

    def value(self, datum):
        return query(self.ledger, self.problem, self.mask, datum.point, datum.index)

    @property
    def exhausted(self):
        return self.ledger.distinct_count >= self.budget or self.k >= self.params.max_iter

    def record(self, sigma, rho, step_norm, model, event):
        rec = IterateRecord(
            k=self.k,
            x=[float(v) for v in self.x],
            f=float(self.fx),
            delta=float(self.delta),
            sigma=float(sigma),
            rho=float(rho),
            step_norm=float(step_norm),
            model_digest=_digest(model) if model is not None else "",
            distinct=self.ledger.distinct_count,
            queries=len(self.ledger.log),
            event=event,
        )
        self.trace.append(rec)
        return bool(self.callback(rec)) if self.callback is not None else False

    def result(self, termination, solver, message=""):
        if not self.trace:
            self.record(math.nan, math.nan, 0.0, None, termination)
        return SolveResult(
            x_final=np.array(self.x),
            f_final=float(self.fx),
            trace=self.trace,
            termination=termination,
            problem=self.problem.name,
            n=self.n,
            mask=self.mask,
            params=self.params,
            solver=solver,
            ledger=self.ledger,
            message=message,
        )

    def step(self, model):
        """Trust-region step and guarded ratio; returns ``(s, trial, ftrial, rho)``."""
        ext = min_quadratic_ball(model.g, model.H, self.delta)
        s = ext.point
        pred = -ext.value
        trial = Datum(self.x + s, zero_index(self.n))
        ftrial = self.value(trial)
        ared = self.fx - ftrial
        if pred <= 1e-14 * (1.0 + abs(self.fx)):
            rho = -math.inf
        else:
            rho = ared / pred
        return s, trial, ftrial, rho

    def update_radius(self, rho, snorm, all_inside):
        p = self.params
        if rho >= p.eta and snorm >= self.delta * (1 - 1e-10):
            grown = p.gamma_inc * self.delta
            self.delta = max(grown, p.delta_max) if p.literal_expand else min(grown, p.delta_max)
        elif rho < p.eta and all_inside:
            self.delta *= p.gamma_dec


# ---------------------------------------------------------------- Birkhoff solver

class _Birkhoff(_Run):
    def __init__(self, *args):
        super().__init__(*args)
        self.history = [Datum(self.x, zero_index(self.n))]
        self.q1 = (self.n + 1) * (self.n + 2) // 2

    def _with_retry(self, fn, history=None, **kw):
        history = self.history if history is None else history
        xi = self.params.xi_acc
        for _ in range(self.params.max_retries + 1):
            try:
                return fn(history, self.x, self.delta, xi_acc=xi,
                          available=self.mask.available, **kw)
            except CompletionFailure:
                xi *= 0.5
        raise Unrecoverable(f"completion failed down to xi_acc={xi * 2:.3e}")

    def _absorb(self, res):
        for d in res.new_evals:
            self.value(d)
            self.history.append(d)

    def _model(self, res):
        rhs = [self.value(d) for d in res.data]
        model = solve_model(res.data, rhs)
        if self.params.debug:
            from .interp import interpolation_residuals
            resid = interpolation_residuals(res.data, model, rhs)
            assert np.max(np.abs(resid)) <= 1e-8 * (1 + np.max(np.abs(rhs)))
        return model

    def build(self, improving=False):
        """Complete (or improve) the history and fit the model."""
        if improving:
            res = self._with_retry(improve, xi_imp=self.params.xi_imp)
        else:
            res = self._with_retry(complete)
        self._absorb(res)
        try:
            return res, self._model(res)
        except NotPoised:
            # the pivots passed but the system is too ill conditioned: rebuild from
            # the center alone so every condition comes from the geometry branch
            res = self._with_retry(complete, history=[Datum(self.x, zero_index(self.n))])
            self._absorb(res)
            return res, self._model(res)

    def prune(self):
        cap = 50 * self.q1
        if len(self.history) <= cap:
            return
        near = [np.linalg.norm(d.point - self.x) <= 2 * self.delta for d in self.history]
        start = len(self.history) - cap
        self.history = [d for i, (d, c) in enumerate(zip(self.history, near)) if c or i >= start]

    def run(self):
        p = self.params
        while True:
            if self.exhausted:
                return self.result("budget", "birkhoff")
            res, model = self.build()
            sigma = _sigma(model)
            event = "accept"

            if sigma <= p.stop_sigma:
                res2, model2 = self.build(improving=True)
                if not res2.swapped:
                    self.record(sigma, math.nan, 0.0, model, "stop")
                    return self.result("sigma_small", "birkhoff")
                res, model, sigma = res2, model2, _sigma(model2)

            if sigma <= p.eps_c and self.delta > p.mu * sigma:
                res, model = self.build(improving=True)
                sigma = _sigma(model)
                self.delta = min(max(radius(res.data), p.beta * sigma), self.delta)
                event = "criticality"

            if self.delta <= p.stop_delta:
                self.record(sigma, math.nan, 0.0, model, "stop")
                return self.result("delta_small", "birkhoff")

            s, trial, ftrial, rho = self.step(model)
            snorm = float(np.linalg.norm(s))
            if trial not in set(self.history):
                self.history.append(trial)
            all_inside = bool(np.all(np.linalg.norm(res.data.points - self.x, axis=1)
                                     <= _slack(self.delta, self.x)))

            if rho >= p.eta:
                self.x, self.fx = trial.point, ftrial
                if event != "criticality":
                    event = "accept"
            else:
                event = "reject"
                if not self.exhausted:
                    try:
                        res2 = self._with_retry(improve, xi_imp=p.xi_imp)
                    except Unrecoverable as exc:
                        self.record(sigma, rho, snorm, model, "failure")
                        return self.result("unrecoverable", "birkhoff", str(exc))
                    self._absorb(res2)
                    if res2.swapped:
                        event = "improve"
            self.update_radius(rho, snorm, all_inside)
            stop = self.record(sigma, rho, snorm, model, event)
            self.k += 1
            self.prune()
            if stop:
                return self.result("target", "birkhoff")


def solve(problem, mask=None, x0=None, params=None, ledger=None, callback=None):
    """Minimize ``problem`` using only the derivatives ``mask`` makes available.

    Parameters
    ----------
    problem : Problem
    mask : Mask, optional
        Defaults to full availability.
    x0 : array_like, optional
        Defaults to ``problem.x0``.
    params : SolverParams, optional
    ledger : QueryLedger, optional
        Supply one to inspect or share the query cache.
    callback : callable, optional
        Called with every :class:`IterateRecord`; a true return value ends the
        run with termination ``"target"``.

    Returns
    -------
    SolveResult
    """
    params = params or SolverParams()
    mask = mask or Mask.from_known(problem.n, range(problem.n))
    run = _Birkhoff(problem, mask, x0, params, ledger, callback)
    try:
        return run.run()
    except Unrecoverable as exc:
        run.record(math.nan, math.nan, 0.0, None, "failure")
        return run.result("unrecoverable", "birkhoff", str(exc))


# ---------------------------------------------------------------- Hermite baseline

HERMITE_COND_MAX = 1e12


class _Hermite(_Run):
    def __init__(self, *args, seed=0):
        super().__init__(*args)
        A = self.mask.available
        self.q1 = (self.n + 1) * (self.n + 2) // 2
        self.npts = math.ceil(self.q1 / len(A))
        self.points = [self.x]
        self.rng = np.random.default_rng(seed)

    def _matrix(self, points):
        A = list(self.mask.available)
        scale = max(max(np.linalg.norm(y - self.x) for y in points), 0.0) or 1.0
        pts = np.repeat((np.array(points) - self.x) / scale, len(A), axis=0)
        alphas = np.tile(np.array(A), (len(points), 1))
        return derivative_rows(pts, alphas), scale, alphas.sum(axis=1)

    def _conditioning(self, points):
        # with fewer rows than unknowns, score the rank gained so far
        M, _, _ = self._matrix(points)
        sv = np.linalg.svd(M, compute_uv=False)
        r = min(len(sv), self.q1)
        if sv[0] <= 0:
            return 0.0
        return sv[r - 1] / sv[0]

    def _well_posed(self, points):
        M, _, _ = self._matrix(points)
        return M.shape[0] >= self.q1 and self._conditioning(points) * HERMITE_COND_MAX > 1

    def _candidates(self):
        out = []
        for k in range(self.n):
            e = np.zeros(self.n)
            e[k] = self.delta
            out += [self.x + e, self.x - e]
        for _ in range(2 * self.n):
            v = self.rng.standard_normal(self.n)
            out.append(self.x + self.delta * v / np.linalg.norm(v))
        return out

    def _repair(self):
        """Swap whichever non-center point most improves conditioning."""
        cands = self._candidates()
        best = None
        for j in range(1, len(self.points)):
            base = self.points[:j] + self.points[j + 1:]
            for y in cands:
                score = self._conditioning(base + [y])
                if best is None or score > best[0]:
                    best = (score, j, y)
        if best is not None:
            self.points[best[1]] = best[2]

    def _replace_farthest(self):
        """Swap the point farthest from the center for the best-conditioned candidate."""
        if len(self.points) < self.npts or len(self.points) == 1:
            base = self.points
        else:
            far = int(np.argmax([np.linalg.norm(y - self.x) for y in self.points[1:]])) + 1
            base = self.points[:far] + self.points[far + 1:]
        best = max(self._candidates(), key=lambda y: self._conditioning(base + [y]))
        self.points = base + [best]

    def fit(self):
        while True:
            while len(self.points) < self.npts:
                self._replace_farthest()
            for _ in range(self.npts + 1):
                if self._well_posed(self.points) or len(self.points) == 1:
                    break
                self._repair()
            if self._well_posed(self.points):
                break
            # repeated derivative rows can make every set of this size rank
            # deficient; one more point always adds a new function value
            if self.npts >= self.q1:
                raise Unrecoverable("Hermite regression system is rank deficient")
            self.npts += 1
        M, scale, orders = self._matrix(self.points)
        rhs = np.array([self.value(d) for y in self.points for d in hermite_expand(y, self.mask.available)])
        coef, _, rank, _ = np.linalg.lstsq(M, rhs * scale ** orders, rcond=None)
        if rank < self.q1:
            raise Unrecoverable("Hermite regression system is rank deficient")
        return QuadraticModel.from_coefficients(self.x, coef / column_scaling(self.n, scale))

    def run(self):
        p = self.params
        while True:
            if self.exhausted:
                return self.result("budget", "hermite")
            model = self.fit()
            sigma = _sigma(model)
            event = "accept"
            if sigma <= p.stop_sigma:
                self.record(sigma, math.nan, 0.0, model, "stop")
                return self.result("sigma_small", "hermite")
            if sigma <= p.eps_c and self.delta > p.mu * sigma:
                if len(self.points) > 1:
                    self._replace_farthest()
                model = self.fit()
                sigma = _sigma(model)
                rad = max(np.linalg.norm(y - self.x) for y in self.points)
                self.delta = min(max(rad, p.beta * sigma), self.delta)
                event = "criticality"
            if self.delta <= p.stop_delta:
                self.record(sigma, math.nan, 0.0, model, "stop")
                return self.result("delta_small", "hermite")

            s, trial, ftrial, rho = self.step(model)
            snorm = float(np.linalg.norm(s))
            dists = [np.linalg.norm(y - self.x) for y in self.points]
            all_inside = max(dists) <= _slack(self.delta, self.x)
            if snorm > 0:
                for d in hermite_expand(trial.point, self.mask.available):
                    self.value(d)
                far = int(np.argmax(dists[1:])) + 1 if len(self.points) > 1 else None
            if rho >= p.eta:
                old = self.x
                self.x, self.fx = trial.point, ftrial
                # the new center goes first; the old one takes the farthest slot
                rest = [y for y in self.points if y is not old]
                if len(self.points) >= self.npts and rest:
                    far = int(np.argmax([np.linalg.norm(y - self.x) for y in rest]))
                    rest.pop(far)
                self.points = [self.x, old] + rest
                self.points = self.points[:self.npts]
            else:
                event = "reject"
                if snorm > 0 and far is not None and np.linalg.norm(trial.point - self.x) < dists[far]:
                    self.points[far] = trial.point
                    event = "improve"
                elif not all_inside:
                    self._replace_farthest()
                    event = "improve"
            self.update_radius(rho, snorm, all_inside)
            stop = self.record(sigma, rho, snorm, model, event)
            self.k += 1
            if stop:
                return self.result("target", "hermite")


def hermite_solve(problem, mask=None, x0=None, params=None, ledger=None, callback=None, seed=0):
    """Baseline that queries every available derivative at each sample point.

    The sample set holds ``ceil((q + 1) / |A|)`` points; the quadratic is the
    least-squares solution of the scaled Hermite system.  Points are swapped
    for better-conditioned candidates on the trust-region sphere when the
    system degenerates.  Arguments match :func:`solve`.
    """
    params = params or SolverParams()
    mask = mask or Mask.from_known(problem.n, range(problem.n))
    run = _Hermite(problem, mask, x0, params, ledger, callback, seed=seed)
    try:
        return run.run()
    except Unrecoverable as exc:
        run.record(math.nan, math.nan, 0.0, None, "failure")
        return run.result("unrecoverable", "hermite", str(exc))
