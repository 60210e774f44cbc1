"""Greedy pivot-polynomial completion and one-swap improvement of data.

Pivot polynomials start as the natural basis and are orthogonalized by
Gaussian elimination against each selected condition, so that after pivot
``i`` every later polynomial ``u_j`` satisfies ``d^beta_i u_j(zhat_i) = 0``.
Each pivot takes the condition, from history or from the trust region,
where ``|d^alpha u_i|`` is largest; the derivative order is chosen per pivot
rather than fixed in advance.

All values are measured in one normalized frame for the whole call: points
are centered at ``y0`` and divided by the radius of the history that survives
the trust-region filter (or by ``delta`` when only the center survives).
"""
from dataclasses import dataclass, field, replace

import numpy as np

from .core import AvailableSet, DataSet, Datum, basis_size, derivative_rows, unvec_upper, zero_index
from .interp import NotPoised, build_normalized
from .linalg import argmax_over_available, max_abs_derivative_ball, solve_square

__all__ = [
    "CompletionFailure",
    "CompletionResult",
    "complete",
    "improve",
]

DEFAULT_XI_ACC = 1e-4
DEFAULT_XI_IMP = 2.0


class CompletionFailure(RuntimeError):
    """No condition reaches the acceptance threshold for some pivot."""

    def __init__(self, pivot, best, xi_acc):
        super().__init__(f"pivot {pivot}: best value {best:.3e} below xi_acc={xi_acc:.3e}")
        self.pivot = pivot
        self.best = best
        self.xi_acc = xi_acc


@dataclass
class CompletionResult:
    """Poised data produced by :func:`complete` or :func:`improve`.

    Attributes
    ----------
    data : DataSet
        ``q + 1`` conditions in pivot order, center first.
    final_pivot : numpy.ndarray
        Natural-basis coefficients of ``u_q`` in the normalized frame.
    pivot_values : numpy.ndarray
        Signed ``d^beta_i u_i(zhat_i)`` for each pivot.
    new_evals : list of Datum
        Conditions not present in the input history; these need oracle calls.
    scale : float
        Normalization length used throughout the call.
    pivots : numpy.ndarray
        All pivot polynomials as rows.
    from_history : list of bool
    swapped : bool
        Whether :func:`improve` replaced the last condition.
    """

    data: DataSet
    final_pivot: np.ndarray
    pivot_values: np.ndarray
    new_evals: list
    scale: float
    pivots: np.ndarray = field(repr=False)
    from_history: list = field(default_factory=list)
    swapped: bool = False


def _as_quadratic(v, n):
    return v[0], v[1:n + 1], unvec_upper(v[n + 1:], n)


def _slack(delta, center):
    # points generated on the sphere lose a few ulps of |center| when stored
    return delta * (1 + 1e-12) + 8 * np.finfo(float).eps * float(np.abs(center).max(initial=0.0))


def _unique(history):
    seen = set()
    out = []
    for d in history:
        if d.key not in seen:
            seen.add(d.key)
            out.append(d)
    return out


def complete(history, center, delta, xi_acc=DEFAULT_XI_ACC, available=None, weight=None,
             alpha_order=None):
    """Select ``q + 1`` poised conditions from ``history``, generating more if needed.

    Parameters
    ----------
    history : iterable of Datum
    center : array_like
        Model center ``y0``; ``(y0, 0)`` is always the first condition.
    delta : float
        Trust-region radius.  History farther than ``delta`` is ignored and new
        conditions are generated inside ``B(y0, delta)``.
    xi_acc : float
        Acceptance threshold for pivot values.
    available : AvailableSet, optional
        Multi-indices usable for generated conditions; function values only
        when omitted.
    weight : callable, optional
        ``weight(point, alpha) > 0`` divides every candidate value.
    alpha_order : sequence of multi-indices, optional
        Force the multi-index of pivots ``1..q`` (compatibility mode showing
        why a fixed pairing can fail).

    Raises
    ------
    CompletionFailure
        When neither history nor the trust region offers a pivot value of at
        least ``xi_acc``.
    """
    if not xi_acc > 0 or not delta > 0:
        raise ValueError("xi_acc and delta must be positive")
    center = np.asarray(center, dtype=float).ravel()
    n = center.size
    q1 = basis_size(n)
    if available is None:
        available = AvailableSet.lagrange(n)
    seed = Datum(center, zero_index(n))
    history = [d if isinstance(d, Datum) else Datum(*d) for d in history]
    history_keys = {d.key for d in history}

    # seed with the center and drop history outside the region
    cand = [d for d in _unique(history) if d.key != seed.key]
    if cand:
        pts = np.array([d.point for d in cand])
        dist = np.linalg.norm(pts - center, axis=1)
        keep = dist <= _slack(delta, center)
        cand = [d for d, k in zip(cand, keep) if k]
        dist = dist[keep]
    scale = float(dist.max()) if cand and dist.max() > 0 else float(delta)

    if cand:
        rows = derivative_rows((np.array([d.point for d in cand]) - center) / scale,
                               np.array([d.index for d in cand]))
        orders = np.array([d.order for d in cand])
        alphas = [d.index for d in cand]
        w = np.array([weight(d.point, d.index) for d in cand]) if weight else np.ones(len(cand))
    else:
        rows = np.zeros((0, q1))
        orders = np.zeros(0, dtype=int)
        alphas = []
        w = np.ones(0)
    alive = np.ones(len(cand), dtype=bool)

    U = np.eye(q1)
    selected = [seed]
    from_history = [True]
    new_evals = []
    pivot_values = np.empty(q1)

    def eliminate(i, r):
        pv = r @ U[i]
        pivot_values[i] = pv
        if i + 1 < q1:
            U[i + 1:] -= np.outer(U[i + 1:] @ r / pv, U[i])

    eliminate(0, derivative_rows(np.zeros((1, n)), np.zeros((1, n), dtype=int))[0])

    geo_weight = None
    if weight is not None:
        def geo_weight(s, alpha):
            return weight(center + scale * s, alpha)

    for i in range(1, q1):
        forced = tuple(alpha_order[i - 1]) if alpha_order is not None else None
        mask = alive.copy()
        if forced is not None:
            mask &= np.array([a == forced for a in alphas], dtype=bool)
        best_hist = 0.0
        pick = None
        if mask.any():
            idx = np.flatnonzero(mask)
            vals = np.abs(rows[idx] @ U[i]) / w[idx]
            best_hist = float(vals.max())
            ties = idx[vals == best_hist]
            pick = int(min(ties, key=lambda t: (orders[t], t)))
        if pick is not None and best_hist > xi_acc:
            alive[pick] = False
            datum = cand[pick]
            r = rows[pick]
            from_history.append(True)
        else:
            # extremize over the trust region times the available set
            choices = available if forced is None else [forced]
            alpha, ext = argmax_over_available(_as_quadratic(U[i], n), choices, delta / scale, geo_weight)
            if ext.value < xi_acc:
                raise CompletionFailure(i, ext.value, xi_acc)
            datum = Datum(center + scale * ext.point, alpha)
            r = derivative_rows(ext.point[None, :], np.array([alpha]))[0]
            from_history.append(datum.key in history_keys)
            if datum.key not in history_keys:
                new_evals.append(datum)
        selected.append(datum)
        eliminate(i, r)

    return CompletionResult(
        data=DataSet(selected),
        final_pivot=U[-1].copy(),
        pivot_values=pivot_values,
        new_evals=new_evals,
        scale=scale,
        pivots=U,
        from_history=from_history,
    )


def improve(history, center, delta, xi_acc=DEFAULT_XI_ACC, xi_imp=DEFAULT_XI_IMP, available=None,
            weight=None):
    """Complete ``history`` and try to replace its last condition.

    The last pivot polynomial is maximized over ``B(y0, delta) x A``.  If the
    best value exceeds ``xi_imp`` times the current last pivot value, the last
    condition is swapped for the maximizer and ``swapped`` is set; otherwise
    the completion is returned unchanged, certifying that no single swap of
    the last condition improves it by that factor.  Earlier pivots do not
    depend on the last condition, so they stay valid after a swap.
    """
    if not xi_imp > 1:
        raise ValueError("xi_imp must exceed 1")
    center = np.asarray(center, dtype=float).ravel()
    n = center.size
    if available is None:
        available = AvailableSet.lagrange(n)
    res = complete(history, center, delta, xi_acc, available, weight)
    u = _as_quadratic(res.final_pivot, n)
    best_alpha, best = None, None
    for alpha in available:
        ext = max_abs_derivative_ball(u, alpha, delta / res.scale)
        val = ext.value if weight is None else ext.value / weight(center + res.scale * ext.point, alpha)
        if best is None or val > best[0]:
            best_alpha, best = alpha, (val, ext)
    current = abs(res.pivot_values[-1])
    if best[0] <= xi_imp * current:
        return res
    ext = best[1]
    new = Datum(center + res.scale * ext.point, best_alpha)
    old = res.data[-1]
    items = list(res.data)[:-1] + [new]
    history_keys = {d.key for d in history}
    new_evals = [d for d in res.new_evals if d.key != old.key]
    if new.key not in history_keys:
        new_evals.append(new)
    r = derivative_rows(ext.point[None, :], np.array([best_alpha]))[0]
    pivot_values = res.pivot_values.copy()
    pivot_values[-1] = r @ res.final_pivot
    data = DataSet(items)
    try:
        solve_square(build_normalized(data).Mhat, np.zeros(len(data)))
    except np.linalg.LinAlgError as exc:
        raise NotPoised("swapped data failed recertification") from exc
    return replace(
        res,
        data=data,
        pivot_values=pivot_values,
        new_evals=new_evals,
        from_history=res.from_history[:-1] + [new.key in history_keys],
        swapped=True,
    )
