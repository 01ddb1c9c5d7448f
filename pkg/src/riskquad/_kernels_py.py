"""Numpy implementations of the hot kernels.

Used when the compiled ``_kernels`` extension is unavailable or when
``RISKQUAD_PURE=1`` is set. Every function here has an identically named,
identically behaving counterpart in ``_kernels.pyx``.
"""

from __future__ import annotations

import math

import numpy as np


def left_quantile_index(n: int, alpha: float) -> int:
    """0-based index of the smallest order statistic with mass >= alpha."""
    k = int(math.ceil(alpha * n))
    k = min(max(k, 1), n)
    while k > 1 and (k - 1) / n >= alpha:
        k -= 1
    while k < n and k / n < alpha:
        k += 1
    return k - 1


def sorted_var(s: np.ndarray, alpha: float) -> float:
    return float(s[left_quantile_index(s.shape[0], alpha)])


def sorted_es(s: np.ndarray, alpha: float) -> float:
    """Minimum of c + mean((s - c)_+)/(1 - alpha) over the distinct values of ``s``.

    ``s`` must be sorted ascending.
    """
    n = s.shape[0]
    scale = 1.0 / ((1.0 - alpha) * n)
    # suffix[i] = sum(s[i:])
    suffix = np.concatenate((np.cumsum(s[::-1])[::-1], [0.0]))
    # last index of each run of equal values
    last = np.flatnonzero(np.concatenate((s[1:] != s[:-1], [True])))
    vals = s[last]
    above = n - 1 - last
    g = vals + scale * (suffix[last + 1] - above * vals)
    return float(g.min())


def mean_pos_part(s: np.ndarray, shift: float) -> float:
    """mean(max(s - shift, 0))."""
    # sequential accumulation keeps results bit-identical to the compiled loop
    return float(np.cumsum(np.maximum(s - shift, 0.0))[-1] / s.shape[0])


def ratio_test(
    xb: np.ndarray,
    lb: np.ndarray,
    ub: np.ndarray,
    delta: np.ndarray,
    basis: np.ndarray,
    piv_tol: float,
    bland: bool,
) -> tuple[int, float]:
    """Bounded-variable ratio test.

    Basic variable ``i`` moves by ``delta[i] * step``. Returns the row that
    blocks first and the blocking step, or ``(-1, inf)`` when nothing blocks.
    Ties (within 1e-12 relative) go to the largest ``|delta|`` or, in Bland
    mode, to the smallest variable index in ``basis``.
    """
    step = np.full(xb.shape[0], np.inf)
    dec = delta < -piv_tol
    inc = delta > piv_tol
    with np.errstate(invalid="ignore"):
        step[dec] = np.maximum(xb[dec] - lb[dec], 0.0) / -delta[dec]
        step[inc] = np.maximum(ub[inc] - xb[inc], 0.0) / delta[inc]
    best = step.min() if step.shape[0] else np.inf
    if not np.isfinite(best):
        return -1, math.inf
    ties = np.flatnonzero(step <= best + 1e-12 * max(1.0, best))
    if bland:
        r = int(ties[np.argmin(basis[ties])])
    else:
        mags = np.abs(delta[ties])
        top = ties[mags == mags.max()]
        r = int(top[np.argmin(basis[top])])
    return r, float(step[r])


def price(
    d: np.ndarray,
    status: np.ndarray,
    tol: float,
    bland: bool,
) -> tuple[int, int]:
    """Choose an entering column from reduced costs ``d``.

    ``status`` codes: 0 basic, 1 at lower, 2 at upper, 3 free at zero,
    4 fixed. Returns ``(index, direction)`` or ``(-1, 0)`` at optimality.
    """
    viol = np.zeros(d.shape[0])
    direction = np.zeros(d.shape[0], dtype=np.int64)
    lo = (status == 1) & (d < -tol)
    hi = (status == 2) & (d > tol)
    fr = (status == 3) & (np.abs(d) > tol)
    viol[lo] = -d[lo]
    direction[lo] = 1
    viol[hi] = d[hi]
    direction[hi] = -1
    viol[fr] = np.abs(d[fr])
    direction[fr] = np.where(d[fr] < 0, 1, -1)
    cand = np.flatnonzero(viol > 0)
    if cand.shape[0] == 0:
        return -1, 0
    q = int(cand[0]) if bland else int(cand[np.argmax(viol[cand])])
    return q, int(direction[q])


def eta_update(binv: np.ndarray, col: np.ndarray, r: int) -> None:
    """In-place product-form update of an explicit basis inverse.

    ``col`` is the entering column already multiplied by ``binv``; row ``r``
    is the pivot row.
    """
    binv[r] /= col[r]
    f = col.copy()
    f[r] = 0.0
    rows = np.flatnonzero(f)
    binv[rows] -= np.multiply.outer(f[rows], binv[r])
