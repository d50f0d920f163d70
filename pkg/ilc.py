import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd
import scipy.linalg

from system_model import LiftedOperators

logger = logging.getLogger(__name__)

DEFAULT_MAX_ITERS = 500
DEFAULT_ERR_TOL = 1e-10


class DivergentGainError(ValueError):
    """Raised when the learning gain is outside (0, 2 / sigma_max(G)^2)."""


@dataclass(frozen=True, eq=False)
class IlcRun:
    """Record of one gradient ILC run.

    error_norms[k] is the tracking error of trial k; trial 0 uses the initial input, so
    the record holds iterations + 1 entries.
    """

    u_final: np.ndarray
    y_final: np.ndarray
    error_norms: np.ndarray
    iterations: int
    converged: bool
    learning_gain: float

    @property
    def final_error(self) -> float:
        return float(self.error_norms[-1])

    @property
    def final_rms(self) -> float:
        return self.final_error / np.sqrt(self.y_final.size)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"iteration": np.arange(self.error_norms.size), "error_norm": self.error_norms})


def tracking_error(y: np.ndarray, r: np.ndarray) -> float:
    """Euclidean norm of r - y."""
    y = np.asarray(y, dtype=float).reshape(-1)
    r = np.asarray(r, dtype=float).reshape(-1)
    if y.size != r.size:
        raise ValueError(f"output has {y.size} samples but the reference has {r.size}")
    return float(np.linalg.norm(r - y))


def rms_error(y: np.ndarray, r: np.ndarray) -> float:
    y = np.asarray(y, dtype=float).reshape(-1)
    return tracking_error(y, r) / np.sqrt(y.size)


def max_stable_gain(lifted: LiftedOperators) -> float:
    """Supremum 2 / sigma_max(G)^2 of the monotonically convergent gains (inf when G = 0)."""
    sigma = scipy.linalg.svdvals(lifted.G)[0] if lifted.G.size else 0.0
    return np.inf if sigma == 0.0 else 2.0 / sigma**2


def gradient_ilc(
    lifted: LiftedOperators,
    x0: np.ndarray,
    reference: np.ndarray,
    gamma: Optional[float] = None,
    max_iters: int = DEFAULT_MAX_ITERS,
    err_tol: float = DEFAULT_ERR_TOL,
    u0: Optional[np.ndarray] = None,
) -> IlcRun:
    """Trial-to-trial update u <- u + gamma G^T e with e = r - (G u + L x0).

    Without ``gamma`` the gain 1 / sigma_max(G)^2 is used. Stops when ||e|| <= err_tol or
    after max_iters updates; untrackable reference components remain in the final error.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    reference = np.asarray(reference, dtype=float).reshape(-1)
    if reference.size != lifted.n_y * lifted.T:
        raise ValueError(f"reference: expected length {lifted.n_y * lifted.T}, got {reference.size}")
    if max_iters < 0:
        raise ValueError(f"max_iters must be non-negative, got {max_iters}")

    limit = max_stable_gain(lifted)
    if gamma is None:
        if np.isinf(limit):
            logger.warning("G is zero: the input has no effect on the output, using gain 1")
            gamma = 1.0
        else:
            gamma = limit / 2.0
    if gamma <= 0.0:
        raise DivergentGainError(f"learning gain must be positive, got {gamma}")
    if gamma >= limit:
        raise DivergentGainError(f"learning gain {gamma:.6g} is not below 2/sigma_max(G)^2 = {limit:.6g}")

    u = np.zeros(lifted.n_u * lifted.T) if u0 is None else np.array(u0, dtype=float).reshape(-1)
    if u.size != lifted.n_u * lifted.T:
        raise ValueError(f"u0: expected length {lifted.n_u * lifted.T}, got {u.size}")

    free_response = lifted.L @ x0
    y = lifted.G @ u + free_response
    error = reference - y
    norms = [float(np.linalg.norm(error))]
    iterations = 0
    while norms[-1] > err_tol and iterations < max_iters:
        u = u + gamma * (lifted.G.T @ error)
        y = lifted.G @ u + free_response
        error = reference - y
        norms.append(float(np.linalg.norm(error)))
        iterations += 1

    converged = norms[-1] <= err_tol
    logger.info(
        "ILC finished after %d iterations: ||e|| = %.3e (converged=%s, gain=%.4g)",
        iterations,
        norms[-1],
        converged,
        gamma,
    )
    error_norms = np.array(norms)
    for array in (u, y, error_norms):
        array.setflags(write=False)
    return IlcRun(
        u_final=u,
        y_final=y,
        error_norms=error_norms,
        iterations=iterations,
        converged=bool(converged),
        learning_gain=float(gamma),
    )
