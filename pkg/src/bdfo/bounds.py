"""Error constants for fully quadratic Birkhoff models and empirical checks.

For poised data with ``n_l`` conditions of derivative order ``l`` and a
Hessian Lipschitz constant ``L``, the model errors on ``B(y0, Delta)`` obey::

    |m - f|         <= kappa_ef Delta**3
    ||grad m - f'|| <= kappa_eg Delta**2
    ||hess m - f''|| <= kappa_eh Delta

with every constant proportional to ``S = (9/4 n_0 + 4 n_1 + 4 n_2) ** 0.5``
times ``||Mhat^-1||``.  This module evaluates those constants, builds the
reduced error system whose inverse norm they actually depend on, and measures
the errors by sampling.
"""
import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .core import DataSet, Datum, basis_size, w_pair
from .interp import NotPoised, build_normalized, solve_model
from .linalg import Singular, spectral_norm_inverse
from .poise import SIGMA_INF, lambda_poisedness

__all__ = [
    "ErrorSystem",
    "FullyQuadraticConstants",
    "ScanRow",
    "constants",
    "corollary_constants",
    "count_orders",
    "error_scan",
    "error_system",
    "write_scan_csv",
]

SCHEMA_VERSION = 1


def _as_dataset(D):
    return D if isinstance(D, DataSet) else DataSet(D)


def count_orders(D):
    """Numbers ``(n0, n1, n2)`` of conditions of each derivative order."""
    D = _as_dataset(D)
    counts = [0, 0, 0]
    for d in D:
        counts[d.order] += 1
    return tuple(counts)


@dataclass(frozen=True)
class FullyQuadraticConstants:
    kappa_ef: float
    kappa_eg: float
    kappa_eh: float
    n0: int
    n1: int
    n2: int
    inv_norm_used: float
    L: float

    @property
    def S(self):
        return math.sqrt(2.25 * self.n0 + 4 * self.n1 + 4 * self.n2)

    def bounds(self, delta):
        """``(kappa_ef Delta^3, kappa_eg Delta^2, kappa_eh Delta)``."""
        return self.kappa_ef * delta**3, self.kappa_eg * delta**2, self.kappa_eh * delta


def _constants(counts, L, inv_norm):
    n0, n1, n2 = counts
    S = math.sqrt(2.25 * n0 + 4 * n1 + 4 * n2)
    return FullyQuadraticConstants(
        kappa_ef=(4.0 / 3.0 + 2 * (1 + 2 * math.sqrt(2)) * S * inv_norm) * L,
        kappa_eg=(1 + math.sqrt(2)) * S * L * inv_norm,
        kappa_eh=math.sqrt(2) * S * L * inv_norm,
        n0=n0, n1=n1, n2=n2,
        inv_norm_used=inv_norm,
        L=L,
    )


def constants(D, L):
    """Error constants using ``||Mhat^-1||_2`` of ``D``.

    Raises :class:`~bdfo.interp.NotPoised` for singular data.
    """
    D = _as_dataset(D)
    if L < 0:
        raise ValueError("the Lipschitz constant must be nonnegative")
    if len(D) != basis_size(D.n):
        raise ValueError(f"expected {basis_size(D.n)} conditions, got {len(D)}")
    try:
        inv = spectral_norm_inverse(build_normalized(D).Mhat)
    except Singular as exc:
        raise NotPoised(str(exc)) from exc
    return _constants(count_orders(D), float(L), inv)


def corollary_constants(D, L, A, delta=None):
    """Constants with ``||Mhat^-1||`` replaced by ``4 (q + 1) Lambda``."""
    D = _as_dataset(D)
    lam = lambda_poisedness(D, A, delta)
    return _constants(count_orders(D), float(L), basis_size(D.n) / SIGMA_INF * lam)


@dataclass(frozen=True)
class ErrorSystem:
    """Reduced error matrix ``Qhat`` and its relation to ``Mhat``.

    ``data`` holds the conditions sorted by derivative order (center first),
    the order in which ``Mhat == [[1, 0], [z, Qhat]]``.
    """

    Qhat: np.ndarray
    Mhat: np.ndarray
    z: np.ndarray
    data: DataSet
    inv_norm_Q: float
    inv_norm_M: float

    @property
    def embedding_residual(self):
        top = np.abs(self.Mhat[0] - np.eye(1, self.Mhat.shape[0])[0]).max()
        return max(top, np.abs(self.Mhat[1:, 0] - self.z).max(initial=0.0),
                   np.abs(self.Mhat[1:, 1:] - self.Qhat).max(initial=0.0))

    @property
    def dominated(self):
        return self.inv_norm_Q <= self.inv_norm_M * (1 + 1e-10)


def error_system(D):
    """Assemble ``Qhat`` row by row from the ``w`` pairing.

    Rows are ``[yhat, w(yhat, yhat)/2]`` for values, ``[e_k, w(e_k, yhat)]``
    for first derivatives and ``[0, w(e_k, e_l)]`` for second derivatives,
    with ``yhat = (y - y0) / Delta(Y)``.
    """
    D = _as_dataset(D)
    n = D.n
    items = [D[0]] + sorted(D[1:], key=lambda d: d.order)
    D = DataSet(items)
    system = build_normalized(D)
    scale = system.scale
    eye = np.eye(n)
    rows = []
    z = []
    for d in items[1:]:
        y = (d.point - D.center) / scale
        nz = [k for k, a in enumerate(d.index) if a]
        if d.order == 0:
            rows.append(np.concatenate((y, 0.5 * w_pair(y, y))))
        elif d.order == 1:
            e = eye[nz[0]]
            rows.append(np.concatenate((e, w_pair(e, y))))
        else:
            k = nz[0]
            l = nz[1] if len(nz) > 1 else k
            rows.append(np.concatenate((np.zeros(n), w_pair(eye[k], eye[l]))))
        z.append(1.0 if d.order == 0 else 0.0)
    Qhat = np.array(rows).reshape(len(items) - 1, basis_size(n) - 1)
    try:
        inv_q = spectral_norm_inverse(Qhat)
        inv_m = spectral_norm_inverse(system.Mhat)
    except Singular as exc:
        raise NotPoised(str(exc)) from exc
    return ErrorSystem(Qhat, system.Mhat, np.array(z), D, inv_q, inv_m)


@dataclass(frozen=True)
class ScanRow:
    delta: float
    err_f: float
    err_g: float
    err_h: float
    bound_f: float
    bound_g: float
    bound_h: float


def _ball_samples(rng, n, count):
    v = rng.standard_normal((count, n))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    r = rng.random(count) ** (1.0 / n)
    return v * r[:, None]


def _errors(model, f, grad, hess, x):
    ef = abs(model(x) - f(x))
    eg = float(np.linalg.norm(model.gradient(x) - grad(x)))
    eh = float(np.linalg.norm(model.H - hess(x), 2))
    return ef, eg, eh


def _polish(err, x0, center, delta):
    cons = {"type": "ineq", "fun": lambda x: delta**2 - np.sum((x - center) ** 2)}
    try:
        res = scipy.optimize.minimize(lambda x: -err(x), x0, method="SLSQP", constraints=[cons],
                                      options={"maxiter": 50, "ftol": 1e-14})
    except (ValueError, np.linalg.LinAlgError):
        return -math.inf
    if np.linalg.norm(res.x - center) > delta * (1 + 1e-9):
        return -math.inf
    return err(res.x)


def error_scan(f, grad, hess, template, deltas, center=None, lipschitz=None,
               samples=10_000, polish=3, seed=0):
    """Measured model errors for ``template`` scaled to each radius in ``deltas``.

    Parameters
    ----------
    f, grad, hess : callables
        The target and its first two derivatives.
    template : DataSet
        Poised geometry with center ``0`` and radius ``1``; it is shifted to
        ``center`` and scaled by each ``delta``.
    lipschitz : callable, optional
        ``lipschitz(center, delta)`` returns the Hessian Lipschitz constant on
        the ball; when given, bound columns are filled in, else they are nan.
    samples : int
        Uniform samples of the ball per radius.
    polish : int
        The best ``polish`` samples of each error are refined with SLSQP.
    """
    template = _as_dataset(template)
    n = template.n
    center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    tpl_pts = template.points - template.center
    r0 = float(np.max(np.linalg.norm(tpl_pts, axis=1)))
    if r0 > 0:
        tpl_pts = tpl_pts / r0
    rng = np.random.default_rng(seed)
    unit = _ball_samples(rng, n, samples)
    out = []
    for delta in deltas:
        items = [Datum(center + delta * p, d.index) for p, d in zip(tpl_pts, template)]
        D = DataSet(items)
        rhs = []
        for d in D:
            nz = [k for k, a in enumerate(d.index) if a]
            if d.order == 0:
                rhs.append(f(d.point))
            elif d.order == 1:
                rhs.append(grad(d.point)[nz[0]])
            else:
                rhs.append(hess(d.point)[nz[0], nz[-1]])
        model = solve_model(D, rhs)
        pts = center + delta * np.vstack((np.zeros((1, n)), unit))
        errs = np.array([_errors(model, f, grad, hess, x) for x in pts])
        best = errs.max(axis=0)
        if polish:
            for j in range(3):
                err = (lambda j: lambda x: _errors(model, f, grad, hess, x)[j])(j)
                for i in np.argsort(errs[:, j])[-polish:]:
                    best[j] = max(best[j], _polish(err, pts[i], center, delta))
        if lipschitz is not None:
            bf, bg, bh = constants(D, lipschitz(center, delta)).bounds(delta)
        else:
            bf = bg = bh = math.nan
        out.append(ScanRow(float(delta), float(best[0]), float(best[1]), float(best[2]), bf, bg, bh))
    return out


def write_scan_csv(rows, fh, label=""):
    """CSV with a schema header line followed by one row per radius."""
    fh.write(f"# bdfo-errscan schema={SCHEMA_VERSION} {label}".rstrip() + "\n")
    fh.write("delta,err_f,err_g,err_h,bound_f,bound_g,bound_h\n")
    for r in rows:
        fh.write(",".join(repr(float(v)) for v in (r.delta, r.err_f, r.err_g, r.err_h,
                                                     r.bound_f, r.bound_g, r.bound_h)) + "\n")
