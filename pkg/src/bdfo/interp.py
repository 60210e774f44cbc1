"""Birkhoff interpolation systems, models, and interpolation polynomials.

Data are centered at ``y0`` and scaled by ``Delta(Y) = max_i ||y_i - y0||`` so
that every nonzero entry of the system matrix is of order one.  Solutions are
mapped back to the unscaled frame by dividing gradient coefficients by
``Delta(Y)`` and Hessian coefficients by ``Delta(Y)**2``.
"""
from dataclasses import dataclass

import numpy as np

from .core import DataSet, QuadraticModel, basis_size, derivative_rows, phi_vector, unvec_upper
from .linalg import Singular, solve_square

__all__ = [
    "BirkhoffPolynomials",
    "NormalizedSystem",
    "NotPoised",
    "POISED_RCOND",
    "birkhoff_polynomials",
    "build_normalized",
    "column_scaling",
    "interpolation_residuals",
    "model_from_polynomials",
    "radius",
    "scaled_rhs",
    "solve_model",
]

POISED_RCOND = 1e-12


class NotPoised(np.linalg.LinAlgError):
    """The interpolation conditions do not determine a unique quadratic."""


def _as_dataset(D):
    return D if isinstance(D, DataSet) else DataSet(D)


def radius(D):
    """Radius of the smallest ball around the center containing every point."""
    D = _as_dataset(D)
    return float(np.max(np.linalg.norm(D.points - D.center, axis=1)))


@dataclass(frozen=True)
class NormalizedSystem:
    Mhat: np.ndarray
    radius: float
    center: np.ndarray
    orders: np.ndarray

    @property
    def scale(self):
        """Normalization length; equals :attr:`radius` unless all points coincide."""
        return self.radius if self.radius > 0 else 1.0


def build_normalized(D):
    """Assemble the normalized matrix ``Mhat`` for data ``D``.

    When every point coincides with the center the scaling length is taken to
    be 1, so sets made only of derivative conditions at the center remain
    representable.
    """
    D = _as_dataset(D)
    r = radius(D)
    scale = r if r > 0 else 1.0
    yhat = (D.points - D.center) / scale
    alphas = D.alphas
    return NormalizedSystem(derivative_rows(yhat, alphas), r, D.center, alphas.sum(axis=1))


def column_scaling(n, scale):
    """Factors ``[1, scale * ones(n), scale**2 * ones(n(n+1)/2)]``."""
    q1 = basis_size(n)
    out = np.empty(q1)
    out[0] = 1.0
    out[1:n + 1] = scale
    out[n + 1:] = scale * scale
    return out


def scaled_rhs(system, rhs):
    """Right-hand side entries ``Delta(Y)**|alpha_i| * rhs_i``."""
    return np.asarray(rhs, dtype=float) * system.scale ** system.orders


def _solve(Mhat, b):
    try:
        x, rcond = solve_square(Mhat, b)
    except Singular as exc:
        raise NotPoised(str(exc)) from exc
    if rcond < POISED_RCOND:
        raise NotPoised(f"reciprocal condition estimate {rcond:.3e} below {POISED_RCOND:g}")
    return x


def solve_model(D, rhs):
    """Quadratic model satisfying ``d^alpha_i m(y_i) = rhs_i`` for every datum.

    Raises
    ------
    NotPoised
        If the normalized system is singular or too ill-conditioned.
    """
    D = _as_dataset(D)
    if len(D) != basis_size(D.n):
        raise ValueError(f"expected {basis_size(D.n)} conditions, got {len(D)}")
    system = build_normalized(D)
    v = _solve(system.Mhat, scaled_rhs(system, rhs))
    return QuadraticModel.from_coefficients(D.center, v / column_scaling(D.n, system.scale))


@dataclass(frozen=True)
class BirkhoffPolynomials:
    """Columns of ``coeffs`` are the natural-basis coefficients of each lambda_i.

    The polynomials live in the normalized frame: ``lambda_i(xhat)`` with
    ``xhat = (x - center) / scale``.
    """

    coeffs: np.ndarray
    center: np.ndarray
    scale: float

    def __len__(self):
        return self.coeffs.shape[1]

    def quadratic(self, i):
        """``(c, g, H)`` of lambda_i in the normalized frame."""
        n = self.center.size
        v = self.coeffs[:, i]
        return v[0], v[1:n + 1], unvec_upper(v[n + 1:], n)

    def evaluate(self, x):
        """All ``lambda_i((x - center) / scale)``."""
        xhat = (np.asarray(x, dtype=float) - self.center) / self.scale
        return phi_vector(xhat) @ self.coeffs


def birkhoff_polynomials(D):
    """Birkhoff interpolation polynomials as the columns of ``Mhat^-1``."""
    D = _as_dataset(D)
    if len(D) != basis_size(D.n):
        raise ValueError(f"expected {basis_size(D.n)} conditions, got {len(D)}")
    system = build_normalized(D)
    inv = _solve(system.Mhat, np.eye(len(D)))
    return BirkhoffPolynomials(inv, D.center, system.scale)


def model_from_polynomials(D, rhs, polys=None):
    """Model as ``sum_i Delta(Y)**|alpha_i| rhs_i lambda_i((x - y0) / Delta(Y))``."""
    D = _as_dataset(D)
    if polys is None:
        polys = birkhoff_polynomials(D)
    system = build_normalized(D)
    weights = scaled_rhs(system, rhs)
    v = polys.coeffs @ weights
    return QuadraticModel.from_coefficients(D.center, v / column_scaling(D.n, polys.scale))


def interpolation_residuals(D, model, rhs):
    """``d^alpha_i m(y_i) - rhs_i`` for every datum."""
    D = _as_dataset(D)
    rows = derivative_rows(D.points - model.center, D.alphas)
    return rows @ model.coefficients() - np.asarray(rhs, dtype=float)
