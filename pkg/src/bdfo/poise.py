"""Geometry quality of Birkhoff interpolation data.

The poisedness constant of data ``D`` with respect to an available set ``A``
on the ball ``B(y0, delta)`` is::

    Lambda = max_i max_{alpha in A} max_{x in B} |d^alpha lambda_i((x - y0) / Delta(Y))|

where the normalization uses ``Delta(Y)`` even when ``delta`` differs from it.
Each inner maximum is over a quadratic, so it is computed exactly.
"""
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import AvailableSet, DataSet, Datum, basis_size
from .interp import NotPoised, birkhoff_polynomials, build_normalized, radius
from .linalg import Singular, max_abs_derivative_ball, spectral_norm_inverse

__all__ = [
    "HeatmapGrid",
    "PoisednessReport",
    "SIGMA_INF",
    "heatmap_grid",
    "lambda_poisedness",
    "poisedness_report",
]

SCHEMA_VERSION = 1

# sigma_infinity of the natural quadratic basis on the unit ball
SIGMA_INF = 0.25


def _as_dataset(D):
    return D if isinstance(D, DataSet) else DataSet(D)


def lambda_poisedness(D, A, delta=None, polys=None):
    """Exact poisedness constant of ``D`` over ``B(y0, delta) x A``.

    ``delta`` defaults to ``Delta(Y)``.  Raises :class:`~bdfo.interp.NotPoised`
    for data without unique Birkhoff polynomials.
    """
    D = _as_dataset(D)
    if polys is None:
        polys = birkhoff_polynomials(D)
    if delta is None:
        delta = radius(D)
    rhat = delta / polys.scale
    best = 0.0
    for i in range(len(polys)):
        u = polys.quadratic(i)
        for alpha in A:
            best = max(best, max_abs_derivative_ball(u, alpha, rhat).value)
    return float(best)


@dataclass(frozen=True)
class PoisednessReport:
    lambda_: float
    inv_norm: float
    det_abs: float
    certified_by_forward: bool
    q1: int

    @property
    def forward_bound(self):
        """``sqrt(q+1) ||Mhat^-1||``: a Lambda certified by the inverse norm alone."""
        return math.sqrt(self.q1) * self.inv_norm

    @property
    def converse_constant(self):
        """``C = (q + 1) / sigma_inf`` with ``||Mhat^-1|| <= C Lambda``."""
        return self.q1 / SIGMA_INF


def poisedness_report(D, A, delta=None):
    """Lambda, ``||Mhat^-1||_2`` and ``|det Mhat|`` for ``q + 1`` conditions.

    Non-poised data give ``lambda_ = inf``, ``inv_norm = inf`` and
    ``det_abs = 0``.
    """
    D = _as_dataset(D)
    q1 = basis_size(D.n)
    if len(D) != q1:
        raise ValueError(f"expected {q1} conditions, got {len(D)}")
    Mhat = build_normalized(D).Mhat
    try:
        lam = lambda_poisedness(D, A, delta)
        inv_norm = spectral_norm_inverse(Mhat)
    except (NotPoised, Singular):
        return PoisednessReport(math.inf, math.inf, 0.0, False, q1)
    det_abs = abs(float(np.linalg.det(Mhat)))
    return PoisednessReport(float(lam), inv_norm, det_abs, bool(inv_norm <= lam / math.sqrt(q1)), q1)


@dataclass
class HeatmapGrid:
    """Lambda over a planar grid; ``inf`` marks non-poised completions.

    ``values[i, j]`` belongs to the point ``(xs[j], ys[i])``.  Cells outside
    the disk are ``nan`` with ``in_region`` false.
    """

    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray
    in_region: np.ndarray
    center: np.ndarray
    radius: float

    @property
    def poised(self):
        return self.in_region & np.isfinite(self.values)

    def _cells(self):
        big = np.finfo(float).max
        for i, y in enumerate(self.ys):
            for j, x in enumerate(self.xs):
                v = self.values[i, j]
                if not self.in_region[i, j]:
                    yield i, j, x, y, "nan", 0, 0
                elif np.isfinite(v):
                    yield i, j, x, y, repr(float(v)), 1, 1
                else:
                    yield i, j, x, y, repr(big), 1, 0

    def to_csv(self, fh):
        c = self.center
        fh.write(
            f"# bdfo-heatmap schema={SCHEMA_VERSION} center={float(c[0])!r},{float(c[1])!r} "
            f"radius={self.radius!r} resolution={len(self.xs)}x{len(self.ys)}\n"
        )
        fh.write("row,col,x1,x2,lambda,in_region,poised\n")
        for i, j, x, y, v, inr, ok in self._cells():
            fh.write(f"{i},{j},{float(x)!r},{float(y)!r},{v},{inr},{ok}\n")

    def to_json(self, fh):
        big = np.finfo(float).max
        vals = np.where(self.in_region, np.where(np.isfinite(self.values), self.values, big), 0.0)
        doc = {
            "schema_version": SCHEMA_VERSION,
            "kind": "heatmap",
            "center": [float(v) for v in self.center],
            "radius": float(self.radius),
            "xs": [float(v) for v in self.xs],
            "ys": [float(v) for v in self.ys],
            "values": vals.tolist(),
            "in_region": self.in_region.astype(int).tolist(),
            "poised": self.poised.astype(int).tolist(),
        }
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def _cell_lambda(args):
    base, additions, A, point, delta = args
    items = list(base) + [Datum(point, alpha) for alpha in additions]
    try:
        return lambda_poisedness(DataSet(items), A, delta)
    except NotPoised:
        return math.inf


def heatmap_grid(base, additions, A, center=None, radius_=1.0, resolution=64,
                 xs=None, ys=None, workers=1):
    """Lambda of ``base`` completed by ``additions`` at each grid point.

    Parameters
    ----------
    base : sequence of Datum
        Fixed conditions; the first must be the center ``(y0, 0)``.
    additions : sequence of multi-indices
        One condition ``(x, alpha)`` is appended per entry, with ``x`` the
        grid point.
    A : AvailableSet
    center, radius_ : region ``B(center, radius_)``; center defaults to y0.
    resolution : int
        Grid points per axis spanning ``[center - radius_, center + radius_]``.
    xs, ys : optional explicit grid axes.
    workers : int
        Process count for the per-cell fan-out; results are assembled by cell
        index, so the output does not depend on it.
    """
    base = list(_as_dataset(base))
    if base[0].point.size != 2:
        raise ValueError("heatmaps are defined for n = 2")
    if len(base) + len(additions) != basis_size(2):
        raise ValueError("base plus additions must give q + 1 = 6 conditions")
    if not isinstance(A, AvailableSet):
        A = AvailableSet(A, 2)
    center = base[0].point if center is None else np.asarray(center, dtype=float)
    if xs is None:
        xs = np.linspace(center[0] - radius_, center[0] + radius_, resolution) if resolution > 1 else center[:1].copy()
    if ys is None:
        ys = np.linspace(center[1] - radius_, center[1] + radius_, resolution) if resolution > 1 else center[1:].copy()
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    X, Y = np.meshgrid(xs, ys)
    in_region = (X - center[0]) ** 2 + (Y - center[1]) ** 2 <= radius_**2 * (1 + 1e-12)
    cells = list(zip(*np.nonzero(in_region)))
    jobs = [(base, list(additions), A, np.array([X[i, j], Y[i, j]]), radius_) for i, j in cells]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_cell_lambda, jobs, chunksize=64))
    else:
        results = [_cell_lambda(job) for job in jobs]
    values = np.full(X.shape, np.nan)
    for (i, j), v in zip(cells, results):
        values[i, j] = v
    return HeatmapGrid(xs, ys, values, in_region, center, float(radius_))
