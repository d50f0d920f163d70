import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

import numpy as np
import yaml

from behavior import DEFAULT_MEMBERSHIP_TOL
from ilc import DEFAULT_ERR_TOL, DEFAULT_MAX_ITERS
from similarity import DEFAULT_SIMILARITY_TOL
from system_model import STEPS_KEY, LtvSystem, SystemValidationError, validate
from transfer import DEFAULT_EXPERIENCE_TOL

logger = logging.getLogger(__name__)

TASK_NAME_PATTERN = re.compile(r"[A-Za-z0-9_.-]+")
TOP_LEVEL_KEYS = {
    "horizon",
    "systems",
    "references",
    "tasks",
    "tolerances",
    "ilc",
    "output_dir",
    "allow_dissimilar",
    "seed",
}
SYSTEM_KEYS = {"T", "A", "B", "C", "D", "x0"}

# Generator defaults: a sine of period 8 is sin(pi t / 4); the pulse is on for t mod 8 in {1, 2, 3, 4}
SINE_DEFAULTS = {"amplitude": 1.0, "period": 8.0, "phase": 0.0}
PULSE_DEFAULTS = {"amplitude": 1.0, "period": 8, "on": [1, 2, 3, 4]}


class ScenarioError(ValueError):
    """Raised for unreadable scenario files and schema violations."""


@dataclass(frozen=True)
class Task:
    name: str
    guest: str
    host: str
    reference: str


@dataclass(frozen=True)
class Tolerances:
    membership: float = DEFAULT_MEMBERSHIP_TOL
    similarity: float = DEFAULT_SIMILARITY_TOL
    experience: float = DEFAULT_EXPERIENCE_TOL

    @classmethod
    def uniform(cls, tol: float) -> "Tolerances":
        return cls(membership=tol, similarity=tol, experience=tol)


@dataclass(frozen=True)
class IlcSettings:
    gamma: Optional[float] = None
    max_iters: int = DEFAULT_MAX_ITERS
    err_tol: float = DEFAULT_ERR_TOL


@dataclass(frozen=True, eq=False)
class Scenario:
    """A validated experiment: systems on one horizon, reference signals and transfer tasks."""

    systems: Dict[str, LtvSystem]
    horizon: int
    references: Dict[str, np.ndarray]
    tasks: List[Task] = field(default_factory=list)
    tolerances: Tolerances = field(default_factory=Tolerances)
    ilc: IlcSettings = field(default_factory=IlcSettings)
    output_dir: Optional[str] = None
    allow_dissimilar: bool = False
    seed: Optional[int] = None

    @property
    def n_u(self) -> int:
        return next(iter(self.systems.values())).n_u

    @property
    def n_y(self) -> int:
        return next(iter(self.systems.values())).n_y

    def with_overrides(self, **changes: Any) -> "Scenario":
        """Copy with the given fields replaced; ``None`` values keep the current setting."""
        return replace(self, **{key: value for key, value in changes.items() if value is not None})


def sine_reference(T: int, amplitude: float = 1.0, period: float = 8.0, phase: float = 0.0) -> np.ndarray:
    """r(t) = amplitude * sin(2 pi t / period + phase) for t = 0..T-1."""
    t = np.arange(T)
    return amplitude * np.sin(2.0 * np.pi * t / period + phase)


def pulse_reference(T: int, amplitude: float = 1.0, period: int = 8, on: Any = (1, 2, 3, 4)) -> np.ndarray:
    """r(t) = amplitude when t mod period is one of ``on``, else 0."""
    t = np.arange(T)
    return np.where(np.isin(t % period, list(on)), float(amplitude), 0.0)


REFERENCE_GENERATORS = {
    "sine": (sine_reference, SINE_DEFAULTS),
    "pulse": (pulse_reference, PULSE_DEFAULTS),
}


def _fail(path: str, message: str) -> ScenarioError:
    return ScenarioError(f"{path}: {message}" if path else message)


def _require_mapping(value: Any, path: str) -> Mapping:
    if not isinstance(value, Mapping):
        raise _fail(path, f"expected a mapping, got {type(value).__name__}")
    return value


def _number(value: Any, path: str, positive: bool = False) -> float:
    if isinstance(value, bool):
        raise _fail(path, f"expected a number, got {value!r}")
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise _fail(path, f"expected a number, got {value!r}") from None
    if not np.isfinite(number):
        raise _fail(path, f"expected a finite number, got {value!r}")
    if positive and number <= 0.0:
        raise _fail(path, f"must be positive, got {number}")
    return number


def _integer(value: Any, path: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise _fail(path, f"expected an integer, got {value!r}")
    if value < minimum:
        raise _fail(path, f"must be at least {minimum}, got {value}")
    return value


def _parse_systems(raw: Any, horizon: int) -> Dict[str, LtvSystem]:
    raw = _require_mapping(raw, "systems")
    if not raw:
        raise _fail("systems", "at least one system is required")
    systems: Dict[str, LtvSystem] = {}
    for name, spec in raw.items():
        path = f"systems.{name}"
        spec = dict(_require_mapping(spec, path))
        unknown = set(spec) - SYSTEM_KEYS
        if unknown:
            raise _fail(path, f"unknown keys {sorted(unknown)}")
        if "T" in spec and spec["T"] != horizon:
            raise _fail(f"{path}.T", f"differs from the scenario horizon {horizon}")
        spec["T"] = horizon
        try:
            system = validate(spec, name=str(name))
        except SystemValidationError as exc:
            raise _fail(path, str(exc)) from exc
        systems[str(name)] = system

    first_name, first = next(iter(systems.items()))
    for name, system in systems.items():
        if (system.n_u, system.n_y) != (first.n_u, first.n_y):
            raise _fail(
                f"systems.{name}",
                f"dimension inconsistency: (n_u, n_y) = {(system.n_u, system.n_y)} "
                f"but {first_name} has {(first.n_u, first.n_y)}",
            )
    return systems


def _parse_reference(spec: Any, path: str, T: int, n_y: int) -> np.ndarray:
    spec = _require_mapping(spec, path)
    if "samples" in spec:
        try:
            samples = np.asarray(spec["samples"], dtype=float)
        except (TypeError, ValueError):
            raise _fail(f"{path}.samples", "expected numeric samples") from None
        if samples.size != n_y * T or samples.ndim > 2 or (samples.ndim == 2 and samples.shape != (T, n_y)):
            raise _fail(f"{path}.samples", f"expected {n_y * T} samples (T={T}, n_y={n_y}), got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise _fail(f"{path}.samples", "non-finite sample")
        return samples.reshape(-1)

    kind = spec.get("type")
    if kind not in REFERENCE_GENERATORS:
        raise _fail(f"{path}.type", f"expected one of {sorted(REFERENCE_GENERATORS)} or explicit 'samples', got {kind!r}")
    generator, defaults = REFERENCE_GENERATORS[kind]
    unknown = set(spec) - set(defaults) - {"type"}
    if unknown:
        raise _fail(path, f"unknown parameters {sorted(unknown)} for a {kind} reference")
    params = dict(defaults)
    for key, value in spec.items():
        if key == "type":
            continue
        if key == "on":
            if not isinstance(value, (list, tuple)):
                raise _fail(f"{path}.on", f"expected a list of phases, got {value!r}")
            params[key] = [_integer(item, f"{path}.on") for item in value]
        elif key == "period" and kind == "pulse":
            params[key] = _integer(value, f"{path}.period", minimum=1)
        elif key == "period":
            params[key] = _number(value, f"{path}.period", positive=True)
        else:
            params[key] = _number(value, f"{path}.{key}")
    signal = generator(T, **params)
    # every output channel follows the same signal
    return np.repeat(signal, n_y)


def _parse_tasks(raw: Any, systems: Mapping, references: Mapping) -> List[Task]:
    if raw is None:
        return []
    if not isinstance(raw, list):
        raise _fail("tasks", f"expected a list, got {type(raw).__name__}")
    tasks: List[Task] = []
    seen = set()
    for index, spec in enumerate(raw):
        path = f"tasks[{index}]"
        spec = _require_mapping(spec, path)
        for key in ("guest", "host", "reference"):
            if key not in spec:
                raise _fail(path, f"missing '{key}'")
        for key in ("guest", "host"):
            if str(spec[key]) not in systems:
                raise _fail(f"{path}.{key}", f"unknown system: {spec[key]}")
        if str(spec["reference"]) not in references:
            raise _fail(f"{path}.reference", f"unknown reference: {spec['reference']}")
        name = str(spec.get("name") or f"{spec['guest']}_{spec['reference']}")
        if not TASK_NAME_PATTERN.fullmatch(name):
            raise _fail(f"{path}.name", f"task name {name!r} must match {TASK_NAME_PATTERN.pattern}")
        if name in seen:
            raise _fail(f"{path}.name", f"duplicate task name {name!r}")
        seen.add(name)
        tasks.append(Task(name=name, guest=str(spec["guest"]), host=str(spec["host"]), reference=str(spec["reference"])))
    return tasks


def _parse_tolerances(raw: Any) -> Tolerances:
    if raw is None:
        return Tolerances()
    raw = _require_mapping(raw, "tolerances")
    values = {}
    for key, value in raw.items():
        if key not in Tolerances.__dataclass_fields__:
            raise _fail("tolerances", f"unknown tolerance {key!r}")
        values[key] = _number(value, f"tolerances.{key}", positive=True)
    return Tolerances(**values)


def _parse_ilc(raw: Any) -> IlcSettings:
    if raw is None:
        return IlcSettings()
    raw = _require_mapping(raw, "ilc")
    unknown = set(raw) - set(IlcSettings.__dataclass_fields__)
    if unknown:
        raise _fail("ilc", f"unknown keys {sorted(unknown)}")
    gamma = raw.get("gamma")
    return IlcSettings(
        gamma=None if gamma is None else _number(gamma, "ilc.gamma", positive=True),
        max_iters=_integer(raw.get("max_iters", DEFAULT_MAX_ITERS), "ilc.max_iters"),
        err_tol=_nonnegative(raw.get("err_tol", DEFAULT_ERR_TOL), "ilc.err_tol"),
    )


def _nonnegative(value: Any, path: str) -> float:
    number = _number(value, path)
    if number < 0.0:
        raise _fail(path, f"must not be negative, got {number}")
    return number


def parse_scenario(raw: Any) -> Scenario:
    """Validate a scenario document already loaded into Python objects."""
    raw = _require_mapping(raw, "")
    unknown = set(raw) - TOP_LEVEL_KEYS
    if unknown:
        raise ScenarioError(f"unknown top-level keys {sorted(unknown)}")
    if "horizon" not in raw:
        raise _fail("horizon", "missing horizon")
    horizon = _integer(raw["horizon"], "horizon", minimum=1)
    if "systems" not in raw:
        raise _fail("systems", "missing systems")
    systems = _parse_systems(raw["systems"], horizon)
    n_y = next(iter(systems.values())).n_y

    references: Dict[str, np.ndarray] = {}
    for name, spec in _require_mapping(raw.get("references") or {}, "references").items():
        signal = _parse_reference(spec, f"references.{name}", horizon, n_y)
        signal.setflags(write=False)
        references[str(name)] = signal

    seed = raw.get("seed")
    allow_dissimilar = raw.get("allow_dissimilar", False)
    if not isinstance(allow_dissimilar, bool):
        raise _fail("allow_dissimilar", f"expected true or false, got {allow_dissimilar!r}")
    scenario = Scenario(
        systems=systems,
        horizon=horizon,
        references=references,
        tasks=_parse_tasks(raw.get("tasks"), systems, references),
        tolerances=_parse_tolerances(raw.get("tolerances")),
        ilc=_parse_ilc(raw.get("ilc")),
        output_dir=None if raw.get("output_dir") is None else str(raw["output_dir"]),
        allow_dissimilar=allow_dissimilar,
        seed=None if seed is None else _integer(seed, "seed"),
    )
    logger.debug(
        "scenario with %d systems, %d references, %d tasks over T=%d",
        len(systems),
        len(references),
        len(scenario.tasks),
        horizon,
    )
    return scenario


def load_scenario(path) -> Scenario:
    """Read and validate a YAML scenario file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"{path}: cannot read scenario ({exc.strerror or exc})") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        position = f"{mark.line + 1}:{mark.column + 1}" if mark is not None else "?"
        raise ScenarioError(f"{path}:{position}: {exc.problem}") from exc
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    if raw is None:
        raise ScenarioError(f"{path}: empty scenario file")
    try:
        return parse_scenario(raw)
    except ScenarioError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def _system_document(system: LtvSystem) -> dict:
    return {
        "A": {STEPS_KEY: system.A.tolist()},
        "B": {STEPS_KEY: system.B.tolist()},
        "C": {STEPS_KEY: system.C.tolist()},
        "D": {STEPS_KEY: system.D.tolist()},
        "x0": system.x0.tolist(),
    }


def scenario_document(scenario: Scenario) -> dict:
    """Plain-data form of a scenario: per-step matrices and explicit reference samples."""
    document = {
        "horizon": scenario.horizon,
        "systems": {name: _system_document(system) for name, system in scenario.systems.items()},
        "references": {name: {"samples": signal.tolist()} for name, signal in scenario.references.items()},
        "tasks": [
            {"name": task.name, "guest": task.guest, "host": task.host, "reference": task.reference}
            for task in scenario.tasks
        ],
        "tolerances": {
            "membership": scenario.tolerances.membership,
            "similarity": scenario.tolerances.similarity,
            "experience": scenario.tolerances.experience,
        },
        "ilc": {
            "gamma": scenario.ilc.gamma,
            "max_iters": scenario.ilc.max_iters,
            "err_tol": scenario.ilc.err_tol,
        },
        "allow_dissimilar": scenario.allow_dissimilar,
    }
    if scenario.output_dir is not None:
        document["output_dir"] = scenario.output_dir
    if scenario.seed is not None:
        document["seed"] = scenario.seed
    return document


def dump_scenario(scenario: Scenario) -> str:
    return yaml.safe_dump(scenario_document(scenario), sort_keys=False)


def save_scenario(scenario: Scenario, path) -> Path:
    path = Path(path)
    path.write_text(dump_scenario(scenario), encoding="utf-8")
    logger.info("scenario written to %s", path)
    return path
