import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from system_model import LiftedOperators

logger = logging.getLogger(__name__)

DEFAULT_MEMBERSHIP_TOL = 1e-8
# Relative slack under which two column entries count as equally large for the sign rule.
SIGN_TIE_RTOL = 1e-12
RANK_RTOL = 1e-12


class BehaviorError(RuntimeError):
    """Raised when the kernel basis of [-G, I] cannot be built."""


@dataclass(frozen=True, eq=False)
class BehaviorDecomposition:
    """Admissible behavior as span(H) + w_off."""

    H: np.ndarray
    w_off: np.ndarray
    lifted: LiftedOperators
    x0: np.ndarray

    @property
    def ambient_dim(self) -> int:
        return self.H.shape[0]

    @property
    def subspace_dim(self) -> int:
        return self.H.shape[1]

    @property
    def rhs(self) -> np.ndarray:
        """L x0, the right-hand side of [-G, I] w = L x0."""
        return self.lifted.L @ self.x0


@dataclass(frozen=True)
class Membership:
    admissible: bool
    residual: float


def _check_length(vector: np.ndarray, expected: int, what: str) -> np.ndarray:
    vector = np.asarray(vector, dtype=float).reshape(-1)
    if vector.size != expected:
        raise ValueError(f"{what}: expected length {expected}, got {vector.size}")
    return vector


def orientation_signs(matrix: np.ndarray) -> np.ndarray:
    """Per-column sign making the largest-magnitude entry positive (lowest index wins ties)."""
    magnitudes = np.abs(matrix)
    peak = magnitudes.max(axis=0)
    pivot = np.argmax(magnitudes >= peak * (1.0 - SIGN_TIE_RTOL), axis=0)
    signs = np.sign(matrix[pivot, np.arange(matrix.shape[1])])
    signs[signs == 0] = 1.0
    return signs


def decompose(lifted: LiftedOperators, x0: np.ndarray, pivoting: bool = False) -> BehaviorDecomposition:
    """Split the admissible behavior into an orthonormal kernel basis H and the offset col(0, L x0).

    The columns of col(I, G) span ker([-G, I]); a thin QR orthonormalizes them. With
    ``pivoting`` the QR uses column pivoting, which changes H but not its span.
    """
    x0 = _check_length(x0, lifted.n_x, "x0")
    n_free = lifted.n_u * lifted.T
    stacked = np.vstack([np.eye(n_free), lifted.G])
    if pivoting:
        Q, R, _ = scipy.linalg.qr(stacked, mode="economic", pivoting=True)
    else:
        Q, R = scipy.linalg.qr(stacked, mode="economic")

    diagonal = np.abs(np.diag(R))
    if diagonal.min() <= RANK_RTOL * diagonal.max():
        raise BehaviorError(f"kernel basis lost rank: min |R_kk| = {diagonal.min():.3e}")

    H = Q * orientation_signs(Q)
    w_off = np.concatenate([np.zeros(n_free), lifted.L @ x0])
    H.setflags(write=False)
    w_off.setflags(write=False)
    x0 = x0.copy()
    x0.setflags(write=False)
    return BehaviorDecomposition(H=H, w_off=w_off, lifted=lifted, x0=x0)


def contains(dec: BehaviorDecomposition, w: np.ndarray, tol: float = DEFAULT_MEMBERSHIP_TOL) -> Membership:
    """Test w against [-G, I] w = L x0 with a residual relative to 1 + ||L x0||."""
    w = _check_length(w, dec.ambient_dim, "trajectory")
    rhs = dec.rhs
    residual = float(np.linalg.norm(dec.lifted.constraint_matrix @ w - rhs))
    return Membership(admissible=residual <= tol * (1.0 + np.linalg.norm(rhs)), residual=residual)


def project_subspace(H: np.ndarray, z: np.ndarray) -> np.ndarray:
    z = _check_length(z, H.shape[0], "vector")
    return H @ (H.T @ z)


def project_behavior(dec: BehaviorDecomposition, x: np.ndarray) -> np.ndarray:
    """Closest admissible trajectory to x: w_off + P_W(x - w_off)."""
    x = _check_length(x, dec.ambient_dim, "vector")
    return dec.w_off + project_subspace(dec.H, x - dec.w_off)


def sample_members(dec: BehaviorDecomposition, rng: np.random.Generator, count: int, scale: float = 1.0) -> np.ndarray:
    """Draw admissible trajectories H c + w_off with Gaussian coefficients; one per row."""
    coefficients = scale * rng.standard_normal((count, dec.subspace_dim))
    return coefficients @ dec.H.T + dec.w_off
