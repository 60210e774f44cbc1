"""Multi-indices, the natural quadratic basis, and the shared data types.

Every module in the package relies on one fixed ordering of the natural basis
of quadratics in ``n`` variables::

    1, y_1, ..., y_n, y_1**2/2, y_1*y_2, ..., y_1*y_n, y_2**2/2, ..., y_n**2/2

i.e. constant, linears in coordinate order, then quadratics in row-major
upper-triangle order.  With this scaling a coefficient vector
``[c, g, vec_upper(H)]`` evaluates to ``c + g.s + s.H.s / 2``.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = [
    "AvailableSet",
    "DataSet",
    "Datum",
    "QuadraticModel",
    "basis_size",
    "derivative_rows",
    "multi_index",
    "phi_derivative_vector",
    "phi_vector",
    "total_order",
    "unvec_upper",
    "vec_upper",
    "w_pair",
    "zero_index",
]


def multi_index(alpha):
    """Validate ``alpha`` and return it as a tuple of nonnegative ints."""
    out = tuple(int(a) for a in alpha)
    if any(a < 0 for a in out):
        raise ValueError(f"multi-index entries must be nonnegative, got {out}")
    if any(a != b for a, b in zip(out, alpha)):
        raise ValueError(f"multi-index entries must be integers, got {alpha!r}")
    return out


def zero_index(n):
    return (0,) * n


def total_order(alpha):
    """Total order of differentiation ``|alpha| = sum(alpha)``."""
    return int(sum(alpha))


def basis_size(n):
    """Number of natural basis functions ``q + 1 = (n + 1)(n + 2) / 2``."""
    return (n + 1) * (n + 2) // 2


@lru_cache(maxsize=None)
def _basis_tables(n):
    # exponents (q+1, n), scalar coefficient of each monomial, upper-triangle pairs
    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    exps = np.zeros((basis_size(n), n), dtype=np.int64)
    coef = np.ones(basis_size(n))
    for k in range(n):
        exps[1 + k, k] = 1
    for m, (i, j) in enumerate(pairs):
        exps[1 + n + m, i] += 1
        exps[1 + n + m, j] += 1
        if i == j:
            coef[1 + n + m] = 0.5
    exps.setflags(write=False)
    coef.setflags(write=False)
    return exps, coef, tuple(pairs)


def phi_vector(y):
    """Evaluate all natural basis functions at ``y``."""
    y = np.asarray(y, dtype=float)
    n = y.size
    iu = np.triu_indices(n)
    quad = np.outer(y, y)[iu]
    quad[iu[0] == iu[1]] *= 0.5
    return np.concatenate(([1.0], y, quad))


# e! / (e - a)! for e, a in {0, 1, 2}; zero where a > e
_FALLING = np.array([[1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [1.0, 2.0, 2.0]])


def derivative_rows(points, alphas):
    """Rows ``d^alpha_i phi(points_i)`` for a batch of conditions.

    Parameters
    ----------
    points : array_like, shape (m, n)
    alphas : array_like of int, shape (m, n)
        Multi-indices with total order at most 2.

    Returns
    -------
    numpy.ndarray, shape (m, q + 1)
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    alphas = np.atleast_2d(np.asarray(alphas, dtype=np.int64))
    m, n = points.shape
    if m == 0:
        return np.zeros((0, basis_size(n)))
    if alphas.shape != (m, n):
        raise ValueError("points and alphas must have matching shapes")
    if np.any(alphas < 0) or np.any(alphas.sum(axis=1) > 2):
        raise ValueError("multi-indices must be nonnegative with total order <= 2")
    exps, coef, _ = _basis_tables(n)
    rem = exps[None, :, :] - alphas[:, None, :]
    valid = np.all(rem >= 0, axis=2)
    remc = np.clip(rem, 0, 2)
    fall = np.prod(_FALLING[exps[None, :, :], np.clip(alphas[:, None, :], 0, 2)], axis=2)
    y = points[:, None, :]
    powers = np.where(remc == 0, 1.0, np.where(remc == 1, y, y * y))
    return np.where(valid, coef[None, :] * fall * np.prod(powers, axis=2), 0.0)


def phi_derivative_vector(alpha, y):
    """Evaluate ``d^alpha phi_j(y)`` for every natural basis function."""
    y = np.asarray(y, dtype=float)
    alpha = multi_index(alpha)
    if len(alpha) != y.size:
        raise ValueError("multi-index and point dimensions differ")
    return derivative_rows(y[None, :], np.asarray(alpha)[None, :])[0]


def vec_upper(H):
    """Upper triangle of a symmetric matrix in basis order."""
    H = np.asarray(H, dtype=float)
    return H[np.triu_indices(H.shape[0])].copy()


def unvec_upper(v, n):
    """Inverse of :func:`vec_upper`."""
    H = np.zeros((n, n))
    iu = np.triu_indices(n)
    H[iu] = v
    H[(iu[1], iu[0])] = v
    return H


def w_pair(x, z):
    """Vector ``w`` with ``w . vec_upper(B) == x.T @ B @ z`` for symmetric ``B``."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    W = np.outer(x, z)
    W = W + W.T
    W[np.diag_indices_from(W)] *= 0.5
    return vec_upper(W)


@dataclass(frozen=True, eq=False)
class Datum:
    """One interpolation condition ``d^index m(point) = d^index f(point)``.

    Two data are the same condition when their coordinates agree bit for bit
    and their multi-indices are equal; see :attr:`key`.
    """

    point: np.ndarray
    index: tuple

    def __post_init__(self):
        p = np.array(self.point, dtype=float).ravel()
        if not np.all(np.isfinite(p)):
            raise ValueError("datum point must be finite")
        p.setflags(write=False)
        idx = multi_index(self.index)
        if len(idx) != p.size:
            raise ValueError("datum point and multi-index dimensions differ")
        object.__setattr__(self, "point", p)
        object.__setattr__(self, "index", idx)

    @property
    def order(self):
        return total_order(self.index)

    @property
    def key(self):
        return (self.point.tobytes(), self.index)

    def __eq__(self, other):
        if not isinstance(other, Datum):
            return NotImplemented
        return self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        return f"Datum({self.point.tolist()}, {list(self.index)})"


class DataSet:
    """Ordered interpolation data whose first item is the center ``(y0, 0)``.

    Duplicates are permitted; they simply make the set non-poised.
    """

    def __init__(self, items):
        items = [d if isinstance(d, Datum) else Datum(*d) for d in items]
        if not items:
            raise ValueError("a data set needs at least the center datum")
        if items[0].order != 0:
            raise ValueError("the first datum must be the center with the zero multi-index")
        n = items[0].point.size
        if any(d.point.size != n for d in items):
            raise ValueError("all data must share one dimension")
        self.items = tuple(items)

    @property
    def center(self):
        return self.items[0].point

    @property
    def n(self):
        return self.center.size

    @property
    def points(self):
        return np.array([d.point for d in self.items])

    @property
    def alphas(self):
        return np.array([d.index for d in self.items], dtype=np.int64)

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __getitem__(self, i):
        return self.items[i]

    def __repr__(self):
        return f"DataSet({list(self.items)!r})"


def _alpha_sort_key(alpha):
    return (total_order(alpha), tuple(alpha))


class AvailableSet:
    """Finite set of multi-indices the oracle can serve.

    Always contains the zero multi-index; every member has total order at most
    2.  Iteration runs in order of increasing total order, then
    lexicographically, which is also the tie-breaking preference used when
    extremizing over the set.
    """

    def __init__(self, indices, n=None):
        idx = {multi_index(a) for a in indices}
        if n is None:
            if not idx:
                raise ValueError("cannot infer dimension of an empty available set")
            n = len(next(iter(idx)))
        if any(len(a) != n for a in idx):
            raise ValueError("all multi-indices must have length n")
        if any(total_order(a) > 2 for a in idx):
            raise ValueError("available multi-indices must have total order <= 2")
        idx.add(zero_index(n))
        self.n = n
        self.indices = tuple(sorted(idx, key=_alpha_sort_key))

    @classmethod
    def supported_on(cls, n, known):
        """All multi-indices of order <= 2 that vanish outside ``known``."""
        known = sorted(set(int(k) for k in known))
        out = [zero_index(n)]
        for a, i in enumerate(known):
            e = [0] * n
            e[i] = 1
            out.append(tuple(e))
            for j in known[a:]:
                e2 = list(e)
                e2[j] += 1
                out.append(tuple(e2))
        return cls(out, n)

    @classmethod
    def full(cls, n):
        return cls.supported_on(n, range(n))

    @classmethod
    def lagrange(cls, n):
        return cls([zero_index(n)], n)

    def __contains__(self, alpha):
        return tuple(alpha) in set(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __len__(self):
        return len(self.indices)

    def __eq__(self, other):
        return isinstance(other, AvailableSet) and self.indices == other.indices

    def __repr__(self):
        return f"AvailableSet({[list(a) for a in self.indices]})"


@dataclass(frozen=True)
class QuadraticModel:
    """``m(center + s) = c + g.s + s.H.s / 2``."""

    center: np.ndarray
    c: float
    g: np.ndarray
    H: np.ndarray = field(repr=False)

    def __post_init__(self):
        center = np.array(self.center, dtype=float).ravel()
        g = np.array(self.g, dtype=float).ravel()
        H = np.array(self.H, dtype=float).reshape(g.size, g.size)
        H = unvec_upper(vec_upper(H), g.size)
        for a in (center, g, H):
            a.setflags(write=False)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "H", H)

    @classmethod
    def from_coefficients(cls, center, v):
        """Build from a natural-basis coefficient vector ``[c, g, vec_upper(H)]``."""
        center = np.asarray(center, dtype=float)
        n = center.size
        v = np.asarray(v, dtype=float)
        return cls(center, v[0], v[1:n + 1], unvec_upper(v[n + 1:], n))

    @property
    def n(self):
        return self.g.size

    def coefficients(self):
        return np.concatenate(([self.c], self.g, vec_upper(self.H)))

    def __call__(self, x):
        s = np.asarray(x, dtype=float) - self.center
        return self.c + self.g @ s + 0.5 * s @ self.H @ s

    def gradient(self, x):
        return self.g + self.H @ (np.asarray(x, dtype=float) - self.center)

    def hessian(self, x=None):
        return np.array(self.H)

    def derivative(self, alpha, x):
        """``d^alpha m(x)`` for a multi-index of total order <= 2."""
        s = np.asarray(x, dtype=float) - self.center
        return float(self.coefficients() @ phi_derivative_vector(alpha, s))

    def decrease(self, s):
        """Model decrease ``m(center) - m(center + s)``."""
        s = np.asarray(s, dtype=float)
        return -(self.g @ s + 0.5 * s @ self.H @ s)

