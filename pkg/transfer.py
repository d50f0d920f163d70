import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from behavior import BehaviorDecomposition, contains, project_behavior, project_subspace
from similarity import SimilarityReport
from system_model import LiftedOperators, Trajectory

logger = logging.getLogger(__name__)

DEFAULT_EXPERIENCE_TOL = 1e-8
# Largest entry of P - H H^T P accepted when checking that a report belongs to a pair.
REPORT_SPAN_TOL = 1e-8


class TransferError(ValueError):
    """Base class for failures of similarity-based learning."""


class InadmissibleExperienceError(TransferError):
    """The guest trajectory is not an admissible trajectory of the guest."""


class ReportMismatchError(TransferError):
    """The similarity report was not computed from (host, guest) in that order."""


class DissimilarBehaviorsError(TransferError):
    """Transfer requested between dissimilar behaviors without an override."""


@dataclass(frozen=True, eq=False)
class Experience:
    g_bar: np.ndarray
    residual: float
    admissible: bool


@dataclass(frozen=True, eq=False)
class TransferResult:
    w_h: np.ndarray
    w_g: np.ndarray
    g_bar: np.ndarray
    guest_residual: float
    host_residual: float
    distance: float
    projection_gap: float
    directly_adoptable: bool

    def host_trajectory(self, n_u: int, T: int) -> Trajectory:
        return Trajectory.from_stacked(self.w_h, n_u, T)


def _span_defect(H: np.ndarray, P: np.ndarray) -> float:
    return float(np.max(np.abs(P - H @ (H.T @ P)), initial=0.0))


def extract_experience(
    dec_guest: BehaviorDecomposition,
    report: SimilarityReport,
    w_g: np.ndarray,
    tol: float = DEFAULT_EXPERIENCE_TOL,
    strict: bool = True,
) -> Experience:
    """Coordinates g_bar of w_g - w_off in the guest principal vectors P_guest = H_guest V.

    P_guest has orthonormal columns, so g_bar = P_guest^T (w_g - w_off). The residual
    ||P_guest g_bar + w_off - w_g|| is zero exactly when w_g is admissible for the guest.
    """
    w_g = np.asarray(w_g, dtype=float).reshape(-1)
    if w_g.size != dec_guest.ambient_dim:
        raise ValueError(f"guest trajectory: expected length {dec_guest.ambient_dim}, got {w_g.size}")
    g_bar = report.P_guest.T @ (w_g - dec_guest.w_off)
    residual = float(np.linalg.norm(report.P_guest @ g_bar + dec_guest.w_off - w_g))
    admissible = residual <= tol * (1.0 + np.linalg.norm(w_g))
    if not admissible:
        message = f"guest trajectory is not admissible for the guest (residual {residual:.3e})"
        if strict:
            raise InadmissibleExperienceError(message)
        logger.warning("%s; transferring its projection", message)
    return Experience(g_bar=g_bar, residual=residual, admissible=bool(admissible))


class TransferPlan:
    """Similarity-based learning for one (host, guest) pair.

    The task-independent term P_W1(w2_off - w1_off) + w1_off is computed once, so each
    further task only costs the coordinates g_bar of the new guest trajectory.
    """

    def __init__(
        self,
        dec_host: BehaviorDecomposition,
        dec_guest: BehaviorDecomposition,
        report: SimilarityReport,
        allow_dissimilar: bool = False,
    ):
        if report.P_host.shape != dec_host.H.shape or report.P_guest.shape != dec_guest.H.shape:
            raise ReportMismatchError("similarity report dimensions do not match the behaviors")
        if _span_defect(dec_host.H, report.P_host) > REPORT_SPAN_TOL or _span_defect(dec_guest.H, report.P_guest) > REPORT_SPAN_TOL:
            raise ReportMismatchError("similarity report was not computed from (host, guest) in that order")
        if not report.similar:
            if not allow_dissimilar:
                raise DissimilarBehaviorsError(
                    f"behaviors are not similar (residual {report.feasibility_residual:.3e})"
                )
            logger.warning(
                "transferring between dissimilar behaviors (residual %.3e) by override",
                report.feasibility_residual,
            )
        self.dec_host = dec_host
        self.dec_guest = dec_guest
        self.report = report
        offset_term = project_subspace(dec_host.H, dec_guest.w_off - dec_host.w_off) + dec_host.w_off
        offset_term.setflags(write=False)
        self.offset_term = offset_term

    def transfer(self, w_g: np.ndarray, tol: float = DEFAULT_EXPERIENCE_TOL, strict: bool = True) -> TransferResult:
        """w_h = H1 U D g_bar + P_W1(w2_off - w1_off) + w1_off."""
        w_g = np.asarray(w_g, dtype=float).reshape(-1)
        experience = extract_experience(self.dec_guest, self.report, w_g, tol=tol, strict=strict)
        w_h = self.report.P_host @ (self.report.s * experience.g_bar) + self.offset_term

        projection_gap = float(np.linalg.norm(w_h - project_behavior(self.dec_host, w_g)))
        logger.debug("closed-form vs projection gap %.3e", projection_gap)
        return TransferResult(
            w_h=w_h,
            w_g=w_g,
            g_bar=experience.g_bar,
            guest_residual=experience.residual,
            host_residual=contains(self.dec_host, w_h, tol=tol).residual,
            distance=float(np.linalg.norm(w_g - w_h)),
            projection_gap=projection_gap,
            directly_adoptable=contains(self.dec_host, w_g, tol=tol).admissible,
        )


def similarity_based_learning(
    dec_host: BehaviorDecomposition,
    dec_guest: BehaviorDecomposition,
    report: SimilarityReport,
    w_g: np.ndarray,
    tol: float = DEFAULT_EXPERIENCE_TOL,
    allow_dissimilar: bool = False,
) -> TransferResult:
    """Optimal host trajectory closest to the guest's solved trajectory w_g."""
    plan = TransferPlan(dec_host, dec_guest, report, allow_dissimilar=allow_dissimilar)
    return plan.transfer(w_g, tol=tol)


def constrained_projection_oracle(lifted_host: LiftedOperators, x1: np.ndarray, w_g: np.ndarray) -> np.ndarray:
    """Minimize ||w - w_g|| subject to [-G1, I] w = L1 x1 through the normal equations."""
    M = lifted_host.constraint_matrix
    w_g = np.asarray(w_g, dtype=float).reshape(-1)
    if w_g.size != M.shape[1]:
        raise ValueError(f"trajectory: expected length {M.shape[1]}, got {w_g.size}")
    defect = M @ w_g - lifted_host.L @ np.asarray(x1, dtype=float)
    multiplier = scipy.linalg.cho_solve(scipy.linalg.cho_factor(M @ M.T), defect)
    return w_g - M.T @ multiplier
