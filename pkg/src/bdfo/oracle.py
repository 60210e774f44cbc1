"""Analytic test problems, derivative masks, and a counting partial-derivative oracle.

Cost is measured in distinct ``(point, alpha)`` requests: asking twice for the
same derivative at bit-identical coordinates is free the second time.
Benchmarks divide that count by ``n + 1``.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .core import AvailableSet, Datum, multi_index, total_order

__all__ = [
    "Mask",
    "Problem",
    "QueryLedger",
    "Unavailable",
    "get_problem",
    "hermite_expand",
    "make_mask",
    "problem_suite",
    "query",
    "replay_units",
]


class Unavailable(LookupError):
    """The oracle was asked for a derivative outside the available set."""


@dataclass(frozen=True)
class Problem:
    """Smooth unconstrained objective with closed-form derivatives.

    ``fmin`` is ``None`` when the optimal value is not known.
    """

    name: str
    n: int
    f: object = field(repr=False)
    grad: object = field(repr=False)
    hess: object = field(repr=False)
    x0: np.ndarray = field(repr=False)
    fmin: object = None

    def derivative(self, x, alpha):
        """``d^alpha f(x)`` for ``|alpha| <= 2``."""
        x = np.asarray(x, dtype=float)
        order = total_order(alpha)
        if order == 0:
            return float(self.f(x))
        nz = [k for k, a in enumerate(alpha) if a]
        if order == 1:
            return float(self.grad(x)[nz[0]])
        if order == 2:
            k = nz[0]
            l = nz[1] if len(nz) > 1 else k
            return float(self.hess(x)[k, l])
        raise ValueError("multi-index order must be at most 2")


@dataclass(frozen=True)
class Mask:
    """Known coordinates ``K`` (0-based) and the available set they induce."""

    known: tuple
    available: AvailableSet
    fraction: float = 1.0
    seed: int = 0

    @classmethod
    def from_known(cls, n, known, fraction=None, seed=0):
        known = tuple(sorted(int(k) for k in known))
        if any(k < 0 or k >= n for k in known):
            raise ValueError(f"known coordinates must lie in 0..{n - 1}")
        if fraction is None:
            fraction = len(known) / n
        return cls(known, AvailableSet.supported_on(n, known), float(fraction), int(seed))

    def to_dict(self):
        return {"fraction": self.fraction, "seed": self.seed, "K": list(self.known)}


def make_mask(n, fraction, seed):
    """Draw ``K`` uniformly without replacement with ``|K| = max(1, ceil(fraction n))``."""
    if n < 1:
        raise ValueError("n must be positive")
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    size = max(1, math.ceil(fraction * n - 1e-12))
    rng = np.random.default_rng(seed)
    known = rng.choice(n, size=size, replace=False)
    return Mask.from_known(n, known, fraction, seed)


class QueryLedger:
    """Cache of oracle answers keyed by exact coordinates and multi-index.

    ``log`` keeps every request, repeated or not, so a run can be recounted
    independently with :func:`replay_units`.
    """

    def __init__(self):
        self.cache = {}
        self.log = []

    @property
    def distinct_count(self):
        return len(self.cache)

    def units(self, n):
        return self.distinct_count / (n + 1)

    def lookup(self, datum):
        return self.cache[datum.key]

    def __contains__(self, datum):
        return datum.key in self.cache


def query(ledger, problem, mask, x, alpha):
    """Return ``d^alpha f(x)``, charging the ledger only on a cache miss."""
    alpha = multi_index(alpha)
    if alpha not in mask.available:
        raise Unavailable(f"derivative {list(alpha)} is not available for K={list(mask.known)}")
    d = Datum(x.point if isinstance(x, Datum) else x, alpha)
    ledger.log.append(d.key)
    try:
        return ledger.cache[d.key]
    except KeyError:
        val = problem.derivative(d.point, alpha)
        ledger.cache[d.key] = val
        return val


def replay_units(log, n, upto=None):
    """Recount distinct requests in ``log[:upto]`` and divide by ``n + 1``."""
    keys = log if upto is None else log[:upto]
    return len(set(keys)) / (n + 1)


def hermite_expand(x, A):
    """Every available condition at ``x``, function value first."""
    return [Datum(x, alpha) for alpha in A]


# ---------------------------------------------------------------- problem suite

def _least_squares(name, n, residual, jacobian, res_hessians, x0, fmin=0.0):
    # f = sum r_i^2
    def f(x):
        r = residual(x)
        return float(r @ r)

    def grad(x):
        return 2.0 * jacobian(x).T @ residual(x)

    def hess(x):
        J = jacobian(x)
        r = residual(x)
        H = 2.0 * J.T @ J
        for ri, Hi in zip(r, res_hessians(x)):
            H += 2.0 * ri * Hi
        return 0.5 * (H + H.T)

    return Problem(name, n, f, grad, hess, np.asarray(x0, dtype=float), fmin)


def _rotation(n, seed):
    rng = np.random.default_rng(seed)
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))


def _convex_quadratic(name, eigs, b, x0, seed):
    n = len(eigs)
    V = _rotation(n, seed)
    Q = V @ np.diag(eigs) @ V.T
    Q = 0.5 * (Q + Q.T)
    b = np.asarray(b, dtype=float)
    xstar = -np.linalg.solve(Q, b)
    fmin = float(0.5 * xstar @ Q @ xstar + b @ xstar)
    return Problem(
        name, n,
        lambda x: float(0.5 * x @ Q @ x + b @ x),
        lambda x: Q @ x + b,
        lambda x: Q.copy(),
        np.asarray(x0, dtype=float), fmin,
    )


def _sphere(n):
    return Problem(
        f"sphere{n}", n,
        lambda x: float(x @ x),
        lambda x: 2.0 * x,
        lambda x: 2.0 * np.eye(x.size),
        np.arange(1.0, n + 1.0) / 2.0, 0.0,
    )


def _rosenbrock(n, name):
    # chained pairs (x_{2i-1}, x_{2i})
    def residual(x):
        r = np.empty(n)
        r[0::2] = 10.0 * (x[1::2] - x[0::2] ** 2)
        r[1::2] = 1.0 - x[0::2]
        return r

    def jacobian(x):
        J = np.zeros((n, n))
        for i in range(0, n, 2):
            J[i, i] = -20.0 * x[i]
            J[i, i + 1] = 10.0
            J[i + 1, i] = -1.0
        return J

    def res_hessians(x):
        out = []
        for i in range(n):
            H = np.zeros((n, n))
            if i % 2 == 0:
                H[i, i] = -20.0
            out.append(H)
        return out

    x0 = np.tile([-1.2, 1.0], n // 2)
    return _least_squares(name, n, residual, jacobian, res_hessians, x0)


def _beale():
    c = np.array([1.5, 2.25, 2.625])
    p = np.arange(1, 4)

    def residual(x):
        return c - x[0] * (1.0 - x[1] ** p)

    def jacobian(x):
        return np.column_stack((-(1.0 - x[1] ** p), x[0] * p * x[1] ** (p - 1)))

    def res_hessians(x):
        out = []
        for k in p:
            d12 = k * x[1] ** (k - 1)
            d22 = x[0] * k * (k - 1) * x[1] ** (k - 2) if k >= 2 else 0.0
            out.append(np.array([[0.0, d12], [d12, d22]]))
        return out

    return _least_squares("beale", 2, residual, jacobian, res_hessians, [1.0, 1.0])


def _powell_singular():
    s5, s10 = math.sqrt(5.0), math.sqrt(10.0)

    def residual(x):
        return np.array([
            x[0] + 10.0 * x[1],
            s5 * (x[2] - x[3]),
            (x[1] - 2.0 * x[2]) ** 2,
            s10 * (x[0] - x[3]) ** 2,
        ])

    def jacobian(x):
        a = 2.0 * (x[1] - 2.0 * x[2])
        b = 2.0 * s10 * (x[0] - x[3])
        return np.array([
            [1.0, 10.0, 0.0, 0.0],
            [0.0, 0.0, s5, -s5],
            [0.0, a, -2.0 * a, 0.0],
            [b, 0.0, 0.0, -b],
        ])

    H3 = np.zeros((4, 4))
    H3[1, 1], H3[1, 2], H3[2, 1], H3[2, 2] = 2.0, -4.0, -4.0, 8.0
    H4 = np.zeros((4, 4))
    H4[0, 0], H4[0, 3], H4[3, 0], H4[3, 3] = 2 * s10, -2 * s10, -2 * s10, 2 * s10
    zero = np.zeros((4, 4))
    return _least_squares("powell_singular", 4, residual, jacobian,
                          lambda x: [zero, zero, H3, H4], [3.0, -1.0, 0.0, 1.0])


def _wood():
    def f(x):
        return float(100 * (x[0] ** 2 - x[1]) ** 2 + (x[0] - 1) ** 2 + (x[2] - 1) ** 2
                     + 90 * (x[2] ** 2 - x[3]) ** 2
                     + 10.1 * ((x[1] - 1) ** 2 + (x[3] - 1) ** 2)
                     + 19.8 * (x[1] - 1) * (x[3] - 1))

    def grad(x):
        return np.array([
            400 * x[0] * (x[0] ** 2 - x[1]) + 2 * (x[0] - 1),
            -200 * (x[0] ** 2 - x[1]) + 20.2 * (x[1] - 1) + 19.8 * (x[3] - 1),
            2 * (x[2] - 1) + 360 * x[2] * (x[2] ** 2 - x[3]),
            -180 * (x[2] ** 2 - x[3]) + 20.2 * (x[3] - 1) + 19.8 * (x[1] - 1),
        ])

    def hess(x):
        H = np.zeros((4, 4))
        H[0, 0] = 1200 * x[0] ** 2 - 400 * x[1] + 2
        H[0, 1] = H[1, 0] = -400 * x[0]
        H[1, 1] = 220.2
        H[1, 3] = H[3, 1] = 19.8
        H[2, 2] = 1080 * x[2] ** 2 - 360 * x[3] + 2
        H[2, 3] = H[3, 2] = -360 * x[2]
        H[3, 3] = 200.2
        return H

    return Problem("wood", 4, f, grad, hess, np.array([-3.0, -1.0, -3.0, -1.0]), 0.0)


def _trigonometric(n):
    idx = np.arange(1, n + 1)

    def residual(x):
        return n - np.sum(np.cos(x)) + idx * (1.0 - np.cos(x)) - np.sin(x)

    def jacobian(x):
        J = np.tile(np.sin(x), (n, 1))
        J[np.diag_indices(n)] += idx * np.sin(x) - np.cos(x)
        return J

    def res_hessians(x):
        out = []
        for i in range(n):
            H = np.diag(np.cos(x))
            H[i, i] += (i + 1) * np.cos(x[i]) + np.sin(x[i])
            out.append(H)
        return out

    return _least_squares(f"trigonometric{n}", n, residual, jacobian, res_hessians,
                          np.full(n, 1.0 / n))


def _broyden_tridiagonal(n):
    def residual(x):
        xp = np.concatenate(([0.0], x, [0.0]))
        return (3.0 - 2.0 * x) * x - xp[:-2] - 2.0 * xp[2:] + 1.0

    def jacobian(x):
        J = np.diag(3.0 - 4.0 * x)
        J[np.arange(1, n), np.arange(n - 1)] = -1.0
        J[np.arange(n - 1), np.arange(1, n)] = -2.0
        return J

    def res_hessians(x):
        out = []
        for i in range(n):
            H = np.zeros((n, n))
            H[i, i] = -4.0
            out.append(H)
        return out

    return _least_squares(f"broyden_tridiagonal{n}", n, residual, jacobian, res_hessians,
                          -np.ones(n))


def _freudenstein_roth():
    def residual(x):
        return np.array([
            -13.0 + x[0] + ((5.0 - x[1]) * x[1] - 2.0) * x[1],
            -29.0 + x[0] + ((x[1] + 1.0) * x[1] - 14.0) * x[1],
        ])

    def jacobian(x):
        y = x[1]
        return np.array([
            [1.0, 10.0 * y - 3.0 * y * y - 2.0],
            [1.0, 3.0 * y * y + 2.0 * y - 14.0],
        ])

    def res_hessians(x):
        y = x[1]
        return [np.array([[0.0, 0.0], [0.0, 10.0 - 6.0 * y]]),
                np.array([[0.0, 0.0], [0.0, 6.0 * y + 2.0]])]

    # the global minimum is 0 at (5, 4); a local minimum near (11.41, -0.897) has f ~ 48.98
    return _least_squares("freudenstein_roth", 2, residual, jacobian, res_hessians, [0.5, -2.0])


def _dixon_price(n):
    w = np.arange(2, n + 1, dtype=float)

    def f(x):
        return float((x[0] - 1) ** 2 + np.sum(w * (2 * x[1:] ** 2 - x[:-1]) ** 2))

    def grad(x):
        g = np.zeros(n)
        g[0] = 2 * (x[0] - 1)
        t = w * (2 * x[1:] ** 2 - x[:-1])
        g[1:] += 8 * x[1:] * t
        g[:-1] -= 2 * t
        return g

    def hess(x):
        H = np.zeros((n, n))
        H[0, 0] = 2.0
        for j in range(1, n):
            wj = w[j - 1]
            H[j, j] += wj * (48 * x[j] ** 2 - 8 * x[j - 1])
            H[j - 1, j - 1] += 2 * wj
            H[j, j - 1] -= 8 * wj * x[j]
            H[j - 1, j] -= 8 * wj * x[j]
        return H

    return Problem(f"dixon_price{n}", n, f, grad, hess, np.ones(n), 0.0)


def _zakharov(n):
    c = 0.5 * np.arange(1, n + 1)

    def f(x):
        s = c @ x
        return float(x @ x + s ** 2 + s ** 4)

    def grad(x):
        s = c @ x
        return 2 * x + (2 * s + 4 * s ** 3) * c

    def hess(x):
        s = c @ x
        return 2 * np.eye(n) + (2 + 12 * s ** 2) * np.outer(c, c)

    return Problem(f"zakharov{n}", n, f, grad, hess, np.ones(n), 0.0)


def _three_hump_camel():
    def f(x):
        a, b = x
        return float(2 * a ** 2 - 1.05 * a ** 4 + a ** 6 / 6 + a * b + b ** 2)

    def grad(x):
        a, b = x
        return np.array([4 * a - 4.2 * a ** 3 + a ** 5 + b, a + 2 * b])

    def hess(x):
        a = x[0]
        return np.array([[4 - 12.6 * a ** 2 + 5 * a ** 4, 1.0], [1.0, 2.0]])

    return Problem("three_hump_camel", 2, f, grad, hess, np.array([1.0, 1.0]), 0.0)


def problem_suite():
    """The fixed benchmark suite, in a stable order."""
    return [
        _sphere(5),
        _convex_quadratic("quad2_cond10", [1.0, 10.0], [1.0, -1.0], [3.0, 3.0], seed=2),
        _convex_quadratic("quad4_cond100", np.logspace(0, 2, 4), np.ones(4),
                          [1.0, -1.0, 1.0, -1.0], seed=4),
        _rosenbrock(2, "rosenbrock2"),
        _rosenbrock(4, "ext_rosenbrock4"),
        _beale(),
        _powell_singular(),
        _wood(),
        _trigonometric(3),
        _broyden_tridiagonal(5),
        _freudenstein_roth(),
        _dixon_price(4),
        _zakharov(3),
        _three_hump_camel(),
    ]


def get_problem(name):
    for p in problem_suite():
        if p.name == name:
            return p
    raise KeyError(f"unknown problem {name!r}; see `bdfo list-problems`")
