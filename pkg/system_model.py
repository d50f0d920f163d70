import logging
from dataclasses import dataclass
from typing import Any, Mapping, Optional

import numpy as np

logger = logging.getLogger(__name__)

# Affine-in-time shorthand keys: M(t) = base + t * slope
AFFINE_BASE_KEY = "base"
AFFINE_SLOPE_KEY = "slope"
STEPS_KEY = "steps"


class SystemValidationError(ValueError):
    """Raised when a raw system description is inconsistent."""


def _freeze(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class LtvSystem:
    """Discrete LTV system x(t+1) = A(t)x(t) + B(t)u(t), y(t) = C(t)x(t) + D(t)u(t).

    Matrices are stored per step with a leading time axis, e.g. A has shape (T, n_x, n_x).
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    x0: np.ndarray
    name: str = ""

    @property
    def T(self) -> int:
        return self.A.shape[0]

    @property
    def n_x(self) -> int:
        return self.A.shape[1]

    @property
    def n_u(self) -> int:
        return self.B.shape[2]

    @property
    def n_y(self) -> int:
        return self.C.shape[1]

    @property
    def n_w(self) -> int:
        return self.n_u + self.n_y


@dataclass(frozen=True, eq=False)
class LiftedOperators:
    """Lifted maps of one system: y = G u + L x0 over the whole horizon."""

    G: np.ndarray
    L: np.ndarray
    n_x: int
    n_u: int
    n_y: int
    T: int

    @property
    def n_w(self) -> int:
        return self.n_u + self.n_y

    @property
    def constraint_matrix(self) -> np.ndarray:
        """[-G, I], whose solutions w satisfy [-G, I] w = L x0."""
        return np.hstack([-self.G, np.eye(self.n_y * self.T)])

    def output(self, u: np.ndarray, x0: np.ndarray) -> np.ndarray:
        return self.G @ u + self.L @ x0


@dataclass(frozen=True, eq=False)
class Trajectory:
    u: np.ndarray
    y: np.ndarray

    @property
    def w(self) -> np.ndarray:
        """Stacked trajectory col(u, y), input block first."""
        return np.concatenate([self.u, self.y])

    @classmethod
    def from_stacked(cls, w: np.ndarray, n_u: int, T: int) -> "Trajectory":
        w = np.asarray(w, dtype=float)
        split = n_u * T
        return cls(u=_freeze(w[:split].copy()), y=_freeze(w[split:].copy()))


def per_step(stacked: np.ndarray, width: int) -> np.ndarray:
    """Reshape a stacked signal into rows of one time step each."""
    return np.asarray(stacked, dtype=float).reshape(-1, width)


def _as_matrix(value: Any, label: str) -> np.ndarray:
    try:
        matrix = np.atleast_2d(np.asarray(value, dtype=float))
    except (TypeError, ValueError) as exc:
        raise SystemValidationError(f"{label}: expected a numeric matrix ({exc})") from exc
    if matrix.ndim != 2:
        raise SystemValidationError(f"{label}: expected a 2-D matrix, got {matrix.ndim} dimensions")
    return matrix


def _expand(spec: Any, label: str, T: int) -> list:
    """Expand one matrix description into a list of T per-step matrices."""
    if isinstance(spec, Mapping):
        allowed = {STEPS_KEY} if STEPS_KEY in spec else {AFFINE_BASE_KEY, AFFINE_SLOPE_KEY}
        unknown = set(spec) - allowed
        if unknown:
            raise SystemValidationError(f"{label}: unknown keys {sorted(map(str, unknown))}")
        if STEPS_KEY in spec:
            steps = spec[STEPS_KEY]
            if len(steps) != T:
                raise SystemValidationError(f"{label} has {len(steps)} steps, expected T={T}")
            return [_as_matrix(step, f"{label}({t})") for t, step in enumerate(steps)]
        if AFFINE_BASE_KEY not in spec:
            raise SystemValidationError(
                f"{label}: expected a matrix, a '{STEPS_KEY}' list or a '{AFFINE_BASE_KEY}'/'{AFFINE_SLOPE_KEY}' pair"
            )
        base = _as_matrix(spec[AFFINE_BASE_KEY], f"{label}.{AFFINE_BASE_KEY}")
        slope = _as_matrix(spec.get(AFFINE_SLOPE_KEY, np.zeros_like(base)), f"{label}.{AFFINE_SLOPE_KEY}")
        if slope.shape != base.shape:
            raise SystemValidationError(
                f"dimension mismatch at {label}: slope shape {slope.shape} differs from base shape {base.shape}"
            )
        return [base + t * slope for t in range(T)]
    if isinstance(spec, np.ndarray) and spec.ndim == 3:
        if spec.shape[0] != T:
            raise SystemValidationError(f"{label} has {spec.shape[0]} steps, expected T={T}")
        return [_as_matrix(step, f"{label}({t})") for t, step in enumerate(spec)]
    matrix = _as_matrix(spec, label)
    return [matrix] * T


def _check_steps(steps: list, label: str, expected: tuple) -> np.ndarray:
    for t, matrix in enumerate(steps):
        if matrix.shape != expected:
            raise SystemValidationError(
                f"dimension mismatch at {label}({t}): expected {expected}, got {matrix.shape}"
            )
        if not np.all(np.isfinite(matrix)):
            raise SystemValidationError(f"non-finite entry in {label}({t})")
    return _freeze(np.stack(steps).astype(float))


def _horizon(raw: Mapping[str, Any]) -> int:
    if "T" not in raw:
        raise SystemValidationError("missing horizon T")
    T = raw["T"]
    if isinstance(T, bool) or not isinstance(T, (int, np.integer, float)) or int(T) != T:
        raise SystemValidationError(f"horizon T must be an integer, got {T!r}")
    T = int(T)
    if T < 1:
        raise SystemValidationError(f"horizon T must be at least 1, got {T}")
    return T


def validate(raw: Mapping[str, Any], name: str = "") -> LtvSystem:
    """Check a raw system description and expand it into per-step matrices.

    Each of A, B, C, D is a constant matrix, an explicit list of T matrices under
    ``steps``, or the affine shorthand ``{"base": M0, "slope": M1}`` meaning M0 + t*M1.
    D defaults to zero and x0 to the origin.
    """
    T = _horizon(raw)
    for key in ("A", "B", "C"):
        if key not in raw:
            raise SystemValidationError(f"missing matrix {key}")

    A_steps = _expand(raw["A"], "A", T)
    B_steps = _expand(raw["B"], "B", T)
    C_steps = _expand(raw["C"], "C", T)
    n_x = A_steps[0].shape[0]
    n_u = B_steps[0].shape[1]
    n_y = C_steps[0].shape[0]

    A = _check_steps(A_steps, "A", (n_x, n_x))
    B = _check_steps(B_steps, "B", (n_x, n_u))
    C = _check_steps(C_steps, "C", (n_y, n_x))
    if raw.get("D") is None:
        D = _freeze(np.zeros((T, n_y, n_u)))
    else:
        D = _check_steps(_expand(raw["D"], "D", T), "D", (n_y, n_u))

    x0 = raw.get("x0")
    if x0 is None:
        x0 = np.zeros(n_x)
    try:
        x0 = np.asarray(x0, dtype=float).reshape(-1)
    except (TypeError, ValueError) as exc:
        raise SystemValidationError(f"x0: expected a numeric vector ({exc})") from exc
    if x0.shape != (n_x,):
        raise SystemValidationError(f"dimension mismatch at x0: expected {n_x} entries, got {x0.size}")
    if not np.all(np.isfinite(x0)):
        raise SystemValidationError("non-finite entry in x0")

    logger.debug("validated system %r: n_x=%d n_u=%d n_y=%d T=%d", name, n_x, n_u, n_y, T)
    return LtvSystem(A=A, B=B, C=C, D=D, x0=_freeze(x0.copy()), name=name)


def state_transition(system: LtvSystem, t_end: int, t_start: int) -> np.ndarray:
    """Phi(t_end, t_start) = A(t_end-1) ... A(t_start); identity when the steps coincide."""
    if t_start > t_end:
        raise ValueError(f"t_start={t_start} exceeds t_end={t_end}")
    if t_start < 0 or t_end > system.T:
        raise ValueError(f"steps must lie in [0, {system.T}], got ({t_end}, {t_start})")
    phi = np.eye(system.n_x)
    for t in range(t_start, t_end):
        phi = system.A[t] @ phi
    return phi


def lift(system: LtvSystem) -> LiftedOperators:
    """Build the block lower-triangular G and the initial-state map L."""
    T, n_x, n_u, n_y = system.T, system.n_x, system.n_u, system.n_y
    G = np.zeros((n_y * T, n_u * T))
    L = np.zeros((n_y * T, n_x))
    for t in range(T):
        rows = slice(t * n_y, (t + 1) * n_y)
        G[rows, t * n_u:(t + 1) * n_u] = system.D[t]
        phi = np.eye(n_x)  # Phi(t, tau + 1)
        for tau in range(t - 1, -1, -1):
            G[rows, tau * n_u:(tau + 1) * n_u] = system.C[t] @ phi @ system.B[tau]
            phi = phi @ system.A[tau]
        L[rows] = system.C[t] @ phi
    return LiftedOperators(G=_freeze(G), L=_freeze(L), n_x=n_x, n_u=n_u, n_y=n_y, T=T)


def rollout(system: LtvSystem, u: np.ndarray, x0: Optional[np.ndarray] = None) -> Trajectory:
    """Simulate the system step by step from x0 (the system's own initial state by default)."""
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.size != system.n_u * system.T:
        raise ValueError(f"expected input of length {system.n_u * system.T}, got {u.size}")
    x = np.array(system.x0 if x0 is None else x0, dtype=float).reshape(-1)
    if x.size != system.n_x:
        raise ValueError(f"expected initial state of length {system.n_x}, got {x.size}")

    inputs = per_step(u, system.n_u)
    outputs = np.empty((system.T, system.n_y))
    for t in range(system.T):
        outputs[t] = system.C[t] @ x + system.D[t] @ inputs[t]
        x = system.A[t] @ x + system.B[t] @ inputs[t]
    return Trajectory(u=_freeze(u.copy()), y=_freeze(outputs.reshape(-1)))


def random_system(
    rng: np.random.Generator,
    n_x: int,
    n_u: int,
    n_y: int,
    T: int,
    spectral_radius: float = 0.9,
    name: str = "",
) -> LtvSystem:
    """Draw a random LTV system with bounded per-step A(t) and a random initial state."""
    A = rng.standard_normal((T, n_x, n_x))
    for t in range(T):
        radius = np.max(np.abs(np.linalg.eigvals(A[t])))
        if radius > 0:
            A[t] *= spectral_radius / radius
    raw = {
        "T": T,
        "A": A,
        "B": rng.standard_normal((T, n_x, n_u)),
        "C": rng.standard_normal((T, n_y, n_x)),
        "D": rng.standard_normal((T, n_y, n_u)),
        "x0": rng.standard_normal(n_x),
    }
    return validate(raw, name=name)
