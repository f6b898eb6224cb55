import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)


@dataclass
class PowerIterationReport:
    value: float
    iterations: int
    converged: bool
    history: list


def power_iteration(apply, x0, tol=1e-3, max_iter=500, min_iter=3):
    """Dominant eigenvalue of a self-adjoint positive operator by Rayleigh quotients.

    Stops when successive estimates differ by less than ``tol`` relative.
    """
    x = np.asarray(x0)
    x = x.astype(np.result_type(x.dtype, np.float64))
    x = x / np.linalg.norm(x)
    prev = None
    hist = []
    for it in range(1, max_iter + 1):
        y = apply(x)
        lam = float(np.vdot(x, y).real)
        hist.append(lam)
        ny = np.linalg.norm(y)
        if ny == 0:
            return PowerIterationReport(0.0, it, True, hist)
        x = y / ny
        if prev is not None and it >= min_iter and abs(lam - prev) <= tol * abs(lam):
            return PowerIterationReport(lam, it, True, hist)
        prev = lam
    return PowerIterationReport(hist[-1], max_iter, False, hist)
