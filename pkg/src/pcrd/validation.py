"""Input checks shared by the estimator wrappers and the CLI."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .rdmodel import QP_MAX, QP_MIN


def check_qp_pairs(X) -> np.ndarray:
    """``(n, 2)`` float array of integer-valued QP pairs within range."""
    X = check_array(X, dtype=np.float64, ensure_min_samples=1)
    if X.shape[1] != 2:
        raise ValueError(f"expected (q_g, q_c) columns, got {X.shape[1]} columns")
    if not np.all(X == np.rint(X)):
        raise ValueError("QPs must be integers")
    if X.min() < QP_MIN or X.max() > QP_MAX:
        raise ValueError(f"QPs must lie in [{QP_MIN}, {QP_MAX}]")
    return X


def check_qp_grid(X) -> np.ndarray:
    """Like ``check_qp_pairs`` but real-valued QPs are allowed (model evaluation)."""
    X = check_array(X, dtype=np.float64, ensure_min_samples=1)
    if X.shape[1] != 2:
        raise ValueError(f"expected (q_g, q_c) columns, got {X.shape[1]} columns")
    return X


def check_rd_targets(y, n: int) -> np.ndarray:
    """``(n, 2)`` array of measured (D, R) with D >= 0 and R > 0."""
    y = check_array(y, dtype=np.float64, ensure_2d=True)
    if y.shape != (n, 2):
        raise ValueError(f"expected targets of shape ({n}, 2) holding (D, R), got {y.shape}")
    if (y[:, 0] < 0).any() or (y[:, 1] <= 0).any():
        raise ValueError("distortion must be >= 0 and rate > 0")
    return y


def check_budgets(budgets) -> np.ndarray:
    b = check_array(np.atleast_1d(np.asarray(budgets, dtype=np.float64)), ensure_2d=False)
    if b.ndim != 1:
        raise ValueError("budgets must be a 1-D sequence of Mbps values")
    if (b <= 0).any():
        raise ValueError("target rates must be positive")
    return b
