"""Dense kernels: square solves, the trust-region subproblem, and exact
maximization of ``|d^alpha p|`` over a ball for quadratic ``p``.

All pivot and Birkhoff polynomials are quadratics, so every extremization the
geometry routines need has an exact answer:

* order 0: a trust-region subproblem for ``p`` and one for ``-p``;
* order 1: ``d_k p(s) = g_k + (H s)_k`` is affine in ``s``;
* order 2: the derivative is the constant ``H_kl``.
"""
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .core import total_order

__all__ = [
    "BallExtremum",
    "Singular",
    "argmax_over_available",
    "eig_min_symmetric",
    "max_abs_derivative_ball",
    "max_abs_quadratic_ball",
    "min_quadratic_ball",
    "solve_square",
    "spectral_norm_inverse",
]

SECULAR_TOL = 1e-12
SECULAR_MAXITER = 100


class Singular(np.linalg.LinAlgError):
    """A square system has a pivot too small to trust."""


@dataclass(frozen=True)
class BallExtremum:
    """Extremizer of a function over a ball.

    ``point`` is the offset from the ball center.  For the ``max_abs_*``
    routines ``value`` is the attained absolute value; for
    :func:`min_quadratic_ball` it is the (possibly negative) minimum and
    ``multiplier`` holds the Lagrange multiplier of the ball constraint.
    """

    point: np.ndarray
    value: float
    multiplier: float = 0.0


def solve_square(M, b):
    """Solve ``M x = b`` by partial-pivoting LU.

    Returns
    -------
    x : numpy.ndarray
    rcond : float
        LAPACK estimate of the reciprocal 1-norm condition number.

    Raises
    ------
    Singular
        If a pivot of the factorization falls below ``1e-14 * ||M||_inf``.
    """
    M = np.asarray(M, dtype=float)
    b = np.asarray(b, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("M must be square")
    norm_inf = np.abs(M).sum(axis=1).max() if M.size else 0.0
    with warnings.catch_warnings():
        # singularity is reported through the pivot test below
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(M, check_finite=True)
    if norm_inf == 0.0 or np.min(np.abs(np.diag(lu))) < 1e-14 * norm_inf:
        raise Singular("matrix is numerically singular")
    x = scipy.linalg.lu_solve((lu, piv), b)
    (gecon,) = scipy.linalg.get_lapack_funcs(("gecon",), (lu,))
    rcond, _ = gecon(lu, np.abs(M).sum(axis=0).max(), norm="1")
    return x, float(rcond)


def eig_min_symmetric(H):
    """Smallest eigenvalue of a symmetric matrix."""
    H = np.atleast_2d(np.asarray(H, dtype=float))
    return float(np.linalg.eigvalsh(H)[0])


def spectral_norm_inverse(M):
    """``||M^-1||_2`` computed as the reciprocal of the smallest singular value."""
    M = np.asarray(M, dtype=float)
    sv = np.linalg.svd(M, compute_uv=False)
    norm_inf = np.abs(M).sum(axis=1).max() if M.size else 0.0
    if sv[-1] <= 1e-14 * max(norm_inf, np.finfo(float).tiny):
        raise Singular("matrix is numerically singular")
    return float(1.0 / sv[-1])


def _quad_value(g, H, s):
    return float(g @ s + 0.5 * s @ H @ s)


def min_quadratic_ball(g, H, delta):
    """Global minimizer of ``g.s + s.H.s / 2`` subject to ``||s|| <= delta``.

    Uses the eigendecomposition of ``H`` and a safeguarded Newton iteration on
    the secular equation ``1/||s(mu)|| - 1/delta = 0``, with an explicit
    eigenvector step in the hard case.
    """
    g = np.asarray(g, dtype=float).ravel()
    H = np.asarray(H, dtype=float).reshape(g.size, g.size)
    if not delta > 0:
        raise ValueError("delta must be positive")
    # solve on the unit ball with an objective of order one so that tiny or
    # huge data neither underflow nor overflow in the secular iteration
    sc = float(np.abs(g).max(initial=0.0)) * delta + float(np.abs(H).max(initial=0.0)) * delta**2
    if sc == 0.0 or not np.isfinite(sc):
        if sc == 0.0:
            return BallExtremum(np.zeros(g.size), 0.0, 0.0)
        raise ValueError("g and H must be finite")
    r = _min_quadratic_unit(g * (delta / sc), H * (delta**2 / sc))
    s = delta * r.point
    return BallExtremum(s, _quad_value(g, H, s), r.multiplier * sc / delta**2)


def _min_quadratic_unit(g, H):
    delta = 1.0
    n = g.size
    lam, Q = np.linalg.eigh(0.5 * (H + H.T))
    a = Q.T @ g
    gnorm = float(np.linalg.norm(g))
    hnorm = float(np.max(np.abs(lam))) if n else 0.0
    scale = gnorm + hnorm * delta
    if scale == 0.0:
        return BallExtremum(np.zeros(n), 0.0, 0.0)
    lam1 = lam[0]

    # interior Newton step
    if lam1 > 0:
        s = -Q @ (a / lam)
        if np.linalg.norm(s) <= delta:
            return BallExtremum(s, _quad_value(g, H, s), 0.0)

    lo = max(0.0, -lam1)
    # hard case: g orthogonal to the leftmost eigenspace and the shifted
    # system's minimum-norm solution lies strictly inside the ball
    tied = lam <= lam1 + 1e-12 * max(hnorm, 1.0)
    if lam1 <= 0 and np.all(np.abs(a[tied]) <= 1e-14 * scale):
        d = lam + lo
        coef = np.zeros(n)
        free = ~tied
        coef[free] = -a[free] / d[free]
        base = np.linalg.norm(coef)
        if base <= delta:
            tau = np.sqrt(max(delta**2 - base**2, 0.0))
            coef[np.argmax(tied)] += tau
            s = Q @ coef
            return BallExtremum(s, _quad_value(g, H, s), lo)

    hi = lo + gnorm / delta
    # s(mu) is decreasing in mu on (lo, inf); bracket the root of 1/||s|| - 1/delta
    mu = hi if lo <= 0.0 else 0.5 * (lo + hi)
    for _ in range(SECULAR_MAXITER):
        d = lam + mu
        if np.any(d <= 0):
            mu = 0.5 * (lo + hi)
            continue
        w = a / d
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            hi = mu
            mu = 0.5 * (lo + hi)
            continue
        phi = 1.0 / nrm - 1.0 / delta
        if abs(phi) <= SECULAR_TOL / delta:
            break
        if phi < 0:
            lo = mu
        else:
            hi = mu
        # d(1/||w||)/dmu = (w.(a/d^2)) / ||w||^3
        dphi = (w @ (w / d)) / nrm**3
        step = mu - phi / dphi if dphi > 0 else 0.5 * (lo + hi)
        mu = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    s = -Q @ (a / (lam + mu))
    nrm = np.linalg.norm(s)
    if nrm > delta:
        s *= delta / nrm
    elif lam1 < 0 and nrm < delta:
        # nearly hard case: slide along the leftmost eigenvector to the boundary
        q1 = Q[:, 0]
        b = s @ q1
        tau = -b + np.sqrt(b * b + delta**2 - nrm**2)
        alt = -b - np.sqrt(b * b + delta**2 - nrm**2)
        cand = [s + tau * q1, s + alt * q1]
        s = min(cand, key=lambda v: _quad_value(g, H, v))
    return BallExtremum(s, _quad_value(g, H, s), float(mu))


def max_abs_quadratic_ball(c, g, H, delta):
    """Maximize ``|c + g.s + s.H.s / 2|`` over ``||s|| <= delta``."""
    g = np.asarray(g, dtype=float).ravel()
    H = np.asarray(H, dtype=float)
    lo = min_quadratic_ball(g, H, delta)
    hi = min_quadratic_ball(-g, -H, delta)
    vmin = c + lo.value
    vmax = c - hi.value
    if abs(vmax) > abs(vmin):
        return BallExtremum(hi.point, abs(vmax))
    return BallExtremum(lo.point, abs(vmin))


def max_abs_derivative_ball(u, alpha, delta):
    """Maximize ``|d^alpha u(s)|`` over ``||s|| <= delta`` for quadratic ``u``.

    Parameters
    ----------
    u : tuple (c, g, H)
    alpha : multi-index with total order <= 2
    delta : float
    """
    c, g, H = u
    g = np.asarray(g, dtype=float).ravel()
    H = np.asarray(H, dtype=float).reshape(g.size, g.size)
    order = total_order(alpha)
    if order == 0:
        return max_abs_quadratic_ball(c, g, H, delta)
    nz = [k for k, a in enumerate(alpha) if a]
    if order == 1:
        k = nz[0]
        row = H[k]
        rn = float(np.linalg.norm(row))
        if rn == 0.0:
            return BallExtremum(np.zeros(g.size), abs(float(g[k])))
        sign = 1.0 if g[k] >= 0 else -1.0
        return BallExtremum(sign * delta * row / rn, abs(float(g[k])) + delta * rn)
    if order == 2:
        k, l = (nz[0], nz[0]) if len(nz) == 1 else (nz[0], nz[1])
        return BallExtremum(np.zeros(g.size), abs(float(H[k, l])))
    raise ValueError("multi-index order must be at most 2")


def argmax_over_available(u, available, delta, weight=None):
    """Best ``(alpha, extremum)`` of ``|d^alpha u|`` over the ball times ``available``.

    Ties prefer smaller total order, then the lexicographically smaller
    multi-index (the iteration order of :class:`~bdfo.core.AvailableSet`).
    ``weight(s, alpha)``, when given, divides each candidate value.
    """
    best_alpha, best = None, None
    best_val = -np.inf
    for alpha in available:
        ext = max_abs_derivative_ball(u, alpha, delta)
        val = ext.value if weight is None else ext.value / weight(ext.point, alpha)
        if val > best_val:
            best_alpha, best, best_val = alpha, ext, val
    if weight is not None:
        best = BallExtremum(best.point, best_val)
    return best_alpha, best
