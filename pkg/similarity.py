import logging
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np
import pandas as pd
import scipy.linalg

from behavior import BehaviorDecomposition, orientation_signs
from system_model import LiftedOperators

logger = logging.getLogger(__name__)

DEFAULT_SIMILARITY_TOL = 1e-8
DEFAULT_GRID_COUNT = 10_000
BRUTEFORCE_MAX_DIM = 3
ZERO_INDEX_TOL = 1e-9


class DimensionMismatchError(ValueError):
    """Raised when two behaviors do not live in the same trajectory space."""


@dataclass(frozen=True, eq=False)
class SimilarityCheck:
    similar: bool
    witness: Optional[np.ndarray]
    residual: float


@dataclass(frozen=True, eq=False)
class SimilarityReport:
    """Similarity indexes of a (host, guest) pair with their principal vectors.

    s holds the cosines of the principal angles in nonincreasing order. The columns of
    P_host = H_host U and P_guest = H_guest V are the paired principal vectors.
    """

    s: np.ndarray
    U: np.ndarray
    V: np.ndarray
    P_host: np.ndarray
    P_guest: np.ndarray
    similar: bool
    witness: Optional[np.ndarray]
    feasibility_residual: float

    @property
    def theta(self) -> np.ndarray:
        """Principal angles in radians."""
        return np.arccos(self.s)

    @property
    def D_diag(self) -> np.ndarray:
        return np.diag(self.s)

    @property
    def mean_index(self) -> float:
        return float(np.mean(self.s))

    def unusable_directions(self, tol: float = ZERO_INDEX_TOL) -> np.ndarray:
        """Indices k (0-based) whose index is numerically zero: guest experience along them is lost."""
        return np.flatnonzero(self.s <= tol)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "k": np.arange(1, self.s.size + 1),
                "s_k": self.s,
                "theta_k_radians": self.theta,
            }
        )


def _require_compatible(lifted1: LiftedOperators, lifted2: LiftedOperators) -> None:
    dims1 = (lifted1.n_u, lifted1.n_y, lifted1.T)
    dims2 = (lifted2.n_u, lifted2.n_y, lifted2.T)
    if dims1 != dims2:
        raise DimensionMismatchError(f"(n_u, n_y, T) differ between the systems: {dims1} vs {dims2}")


def check_similar(
    lifted1: LiftedOperators,
    x1: np.ndarray,
    lifted2: LiftedOperators,
    x2: np.ndarray,
    tol: float = DEFAULT_SIMILARITY_TOL,
) -> SimilarityCheck:
    """Decide whether the two admissible behaviors share a trajectory.

    Solves [[-G1, I], [-G2, I]] w = [L1 x1; L2 x2] in least squares. The witness is the
    common trajectory closest to the first system's offset col(0, L1 x1).
    """
    _require_compatible(lifted1, lifted2)
    stacked = np.vstack([lifted1.constraint_matrix, lifted2.constraint_matrix])
    rhs = np.concatenate([lifted1.L @ np.asarray(x1, dtype=float), lifted2.L @ np.asarray(x2, dtype=float)])
    offset = np.concatenate([np.zeros(lifted1.n_u * lifted1.T), lifted1.L @ np.asarray(x1, dtype=float)])

    correction = scipy.linalg.lstsq(stacked, rhs - stacked @ offset)[0]
    candidate = offset + correction
    residual = float(np.linalg.norm(stacked @ candidate - rhs))
    similar = residual <= tol * (1.0 + np.linalg.norm(rhs))
    logger.debug("similarity residual %.3e (similar=%s)", residual, similar)
    return SimilarityCheck(similar=bool(similar), witness=candidate if similar else None, residual=residual)


def similarity_indexes(
    dec_host: BehaviorDecomposition,
    dec_guest: BehaviorDecomposition,
    tol: float = DEFAULT_SIMILARITY_TOL,
) -> SimilarityReport:
    """Similarity indexes from the SVD H_host^T H_guest = U D V^T, plus the similarity verdict."""
    if dec_host.H.shape != dec_guest.H.shape:
        raise DimensionMismatchError(
            f"behavior bases have shapes {dec_host.H.shape} and {dec_guest.H.shape}"
        )
    U, s, Vt = scipy.linalg.svd(dec_host.H.T @ dec_guest.H)
    V = Vt.T
    s = np.clip(s, 0.0, 1.0)

    signs = orientation_signs(dec_host.H @ U)
    U = U * signs
    V = V * signs
    check = check_similar(dec_host.lifted, dec_host.x0, dec_guest.lifted, dec_guest.x0, tol=tol)
    if not check.similar:
        logger.warning(
            "behaviors are not similar (residual %.3e); indexes reported for a dissimilar pair",
            check.residual,
        )
    for array in (s, U, V):
        array.setflags(write=False)
    return SimilarityReport(
        s=s,
        U=U,
        V=V,
        P_host=dec_host.H @ U,
        P_guest=dec_guest.H @ V,
        similar=check.similar,
        witness=check.witness,
        feasibility_residual=check.residual,
    )


def _unit_grid(dim: int, grid_count: int) -> np.ndarray:
    """Unit coefficient vectors covering the sphere in R^dim, one per column."""
    if dim == 1:
        return np.array([[1.0, -1.0]])
    if dim == 2:
        phi = np.linspace(0.0, 2.0 * np.pi, grid_count, endpoint=False)
        return np.vstack([np.cos(phi), np.sin(phi)])
    # Fibonacci lattice on the 2-sphere
    index = np.arange(grid_count) + 0.5
    polar = np.arccos(1.0 - 2.0 * index / grid_count)
    azimuth = np.pi * (1.0 + np.sqrt(5.0)) * index
    return np.vstack([np.cos(azimuth) * np.sin(polar), np.sin(azimuth) * np.sin(polar), np.cos(polar)])


def _as_basis(H: np.ndarray) -> np.ndarray:
    """A 1-D vector is the basis of a line: one column."""
    H = np.asarray(H, dtype=float)
    return H.reshape(-1, 1) if H.ndim == 1 else H


def _deflate(basis: np.ndarray, direction: np.ndarray) -> np.ndarray:
    coefficients = basis.T @ direction
    return basis @ scipy.linalg.null_space(coefficients[np.newaxis, :])


def principal_angles_bruteforce(
    H1: np.ndarray, H2: np.ndarray, grid_count: int = DEFAULT_GRID_COUNT
) -> np.ndarray:
    """Cosines of the principal angles by the recursive max-inner-product definition.

    At each step the first unit vector is searched over a grid of the remaining part of
    span(H1); the best partner in span(H2) is its normalized projection. The found pair is
    removed from both subspaces before the next step. Only ambient dimension <= 3 is supported.
    """
    H1 = _as_basis(H1)
    H2 = _as_basis(H2)
    if H1.shape[0] > BRUTEFORCE_MAX_DIM:
        raise ValueError(f"brute-force search supports ambient dimension <= {BRUTEFORCE_MAX_DIM}, got {H1.shape[0]}")
    if H1.shape != H2.shape:
        raise DimensionMismatchError(f"subspace bases have shapes {H1.shape} and {H2.shape}")

    Q1 = scipy.linalg.orth(H1)
    Q2 = scipy.linalg.orth(H2)
    cosines = []
    for _ in range(H1.shape[1]):
        candidates = Q1 @ _unit_grid(Q1.shape[1], grid_count)
        reach = np.linalg.norm(Q2.T @ candidates, axis=0)
        best = int(np.argmax(reach))
        x = candidates[:, best]
        projection = Q2.T @ x
        if reach[best] > 0.0:
            y = Q2 @ projection / reach[best]
        else:
            y = Q2[:, 0]
        cosines.append(min(float(reach[best]), 1.0))
        Q1 = _deflate(Q1, x)
        Q2 = _deflate(Q2, y)
    return np.sort(np.array(cosines))[::-1]


def rank_guests(
    dec_host: BehaviorDecomposition,
    guests: Mapping[str, BehaviorDecomposition],
    tol: float = DEFAULT_SIMILARITY_TOL,
) -> pd.DataFrame:
    """Order candidate guests by mean similarity index to the host, most similar first."""
    rows = []
    for name, dec_guest in guests.items():
        report = similarity_indexes(dec_host, dec_guest, tol=tol)
        rows.append(
            {
                "guest": name,
                "mean_index": report.mean_index,
                "min_index": float(report.s.min()),
                "similar": report.similar,
                "feasibility_residual": report.feasibility_residual,
            }
        )
    frame = pd.DataFrame(rows, columns=["guest", "mean_index", "min_index", "similar", "feasibility_residual"])
    frame = frame.sort_values("mean_index", ascending=False, kind="mergesort").reset_index(drop=True)
    frame["rank"] = np.arange(1, len(frame) + 1)
    return frame
