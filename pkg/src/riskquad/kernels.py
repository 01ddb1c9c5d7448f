"""Kernel backend selection.

The compiled extension is preferred; the numpy fallback is used when it
is not built or when ``RISKQUAD_PURE=1`` is set in the environment.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

if os.environ.get("RISKQUAD_PURE", "") in ("", "0"):
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
        BACKEND = "python"
else:
    _impl = _kernels_py
    BACKEND = "python"

left_quantile_index = _impl.left_quantile_index
_sorted_es = _impl.sorted_es
_sorted_var = _impl.sorted_var
_mean_pos_part = _impl.mean_pos_part
_ratio_test = _impl.ratio_test
_price = _impl.price
_eta_update = _impl.eta_update


def sorted_es(s, alpha: float) -> float:
    return _sorted_es(np.ascontiguousarray(s, dtype=np.float64), float(alpha))


def sorted_var(s, alpha: float) -> float:
    return _sorted_var(np.ascontiguousarray(s, dtype=np.float64), float(alpha))


def mean_pos_part(s, shift: float = 0.0) -> float:
    return _mean_pos_part(np.ascontiguousarray(s, dtype=np.float64), float(shift))


def ratio_test(xb, lb, ub, delta, basis, piv_tol: float, bland: bool):
    return _ratio_test(xb, lb, ub, delta, basis, piv_tol, bland)


def price(d, status, tol: float, bland: bool):
    return _price(d, status, tol, bland)


def eta_update(binv: np.ndarray, col: np.ndarray, r: int) -> None:
    _eta_update(binv, np.ascontiguousarray(col, dtype=np.float64), int(r))
