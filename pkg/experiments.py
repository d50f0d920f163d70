import itertools
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from behavior import BehaviorDecomposition, contains, decompose, sample_members
from benchmarks import example_scenario
from ilc import IlcRun, gradient_ilc, tracking_error
from scenario import Scenario, Task
from similarity import SimilarityReport, rank_guests, similarity_indexes
from system_model import Trajectory, lift, random_system, rollout
from transfer import TransferPlan, TransferResult, constrained_projection_oracle

logger = logging.getLogger(__name__)

STAGES = ("similarity", "ilc", "transfer")

# Randomized sweep: dimensions with n_u >= n_y keep random pairs similar
SWEEP_DIMENSIONS = {"n_x": 3, "n_u": 2, "n_y": 1, "T": 4}
SWEEP_PAIRS = 200
SWEEP_SAMPLES = 1000
SWEEP_ORACLE_RTOL = 1e-7
SWEEP_MEMBERSHIP_TOL = 1e-8
SWEEP_OPTIMALITY_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class TaskOutcome:
    task: Task
    reference: np.ndarray
    guest: Trajectory
    host: Trajectory
    result: TransferResult
    oracle_gap: float
    host_admissible: bool
    host_tracking_error: float


@dataclass(frozen=True, eq=False)
class ExperimentResults:
    """Everything one scenario run produced, keyed the way the report files are named."""

    scenario: Scenario
    reports: Dict[Tuple[str, str], SimilarityReport] = field(default_factory=dict)
    ilc_runs: Dict[str, IlcRun] = field(default_factory=dict)
    outcomes: List[TaskOutcome] = field(default_factory=list)
    comparison: Optional[pd.DataFrame] = None


def _pairs(scenario: Scenario) -> List[Tuple[str, str]]:
    """(host, guest) pairs to analyse: those of the tasks, else every pair of distinct systems."""
    if scenario.tasks:
        return list(dict.fromkeys((task.host, task.guest) for task in scenario.tasks))
    return list(itertools.combinations(scenario.systems, 2))


def _comparison(
    scenario: Scenario,
    decompositions: Dict[str, BehaviorDecomposition],
    outcomes: List[TaskOutcome],
) -> Optional[pd.DataFrame]:
    """Rank guests that solved the same reference for the same host."""
    groups: Dict[Tuple[str, str], List[TaskOutcome]] = {}
    for outcome in outcomes:
        groups.setdefault((outcome.task.host, outcome.task.reference), []).append(outcome)

    frames = []
    for (host, reference), members in groups.items():
        guests = list(dict.fromkeys(outcome.task.guest for outcome in members))
        if len(guests) < 2:
            continue
        ranking = rank_guests(
            decompositions[host],
            {guest: decompositions[guest] for guest in guests},
            tol=scenario.tolerances.similarity,
        )
        by_guest = {outcome.task.guest: outcome for outcome in members}
        ranking.insert(0, "reference", reference)
        ranking.insert(0, "host", host)
        ranking["task"] = [by_guest[guest].task.name for guest in ranking["guest"]]
        ranking["distance"] = [by_guest[guest].result.distance for guest in ranking["guest"]]
        ranking["host_tracking_error"] = [by_guest[guest].host_tracking_error for guest in ranking["guest"]]
        frames.append(ranking)
    if not frames:
        return None
    return pd.concat(frames, ignore_index=True)


def run_scenario(scenario: Scenario, stage: str = "transfer") -> ExperimentResults:
    """Run the pipeline up to ``stage``: similarity analysis, guest ILC, then transfer to the host."""
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}; choose one of {STAGES}")
    depth = STAGES.index(stage)
    tolerances = scenario.tolerances

    decompositions: Dict[str, BehaviorDecomposition] = {}

    def decomposition(name: str) -> BehaviorDecomposition:
        if name not in decompositions:
            system = scenario.systems[name]
            decompositions[name] = decompose(lift(system), system.x0)
        return decompositions[name]

    reports: Dict[Tuple[str, str], SimilarityReport] = {}
    for host, guest in _pairs(scenario):
        report = similarity_indexes(decomposition(host), decomposition(guest), tol=tolerances.similarity)
        logger.info(
            "pair %s <- %s: mean index %.6f, similar=%s", host, guest, report.mean_index, report.similar
        )
        reports[(host, guest)] = report
    if depth < STAGES.index("ilc"):
        return ExperimentResults(scenario=scenario, reports=reports)

    ilc_runs: Dict[str, IlcRun] = {}
    solved: Dict[Tuple[str, str], IlcRun] = {}
    for task in scenario.tasks:
        key = (task.guest, task.reference)
        if key not in solved:
            dec_guest = decomposition(task.guest)
            solved[key] = gradient_ilc(
                dec_guest.lifted,
                dec_guest.x0,
                scenario.references[task.reference],
                gamma=scenario.ilc.gamma,
                max_iters=scenario.ilc.max_iters,
                err_tol=scenario.ilc.err_tol,
            )
        ilc_runs[task.name] = solved[key]
    if depth < STAGES.index("transfer"):
        return ExperimentResults(scenario=scenario, reports=reports, ilc_runs=ilc_runs)

    plans: Dict[Tuple[str, str], TransferPlan] = {}
    outcomes: List[TaskOutcome] = []
    for task in scenario.tasks:
        pair = (task.host, task.guest)
        if pair not in plans:
            plans[pair] = TransferPlan(
                decomposition(task.host),
                decomposition(task.guest),
                reports[pair],
                allow_dissimilar=scenario.allow_dissimilar,
            )
        host_system = scenario.systems[task.host]
        guest = rollout(scenario.systems[task.guest], ilc_runs[task.name].u_final)
        result = plans[pair].transfer(guest.w, tol=tolerances.experience)

        dec_host = decomposition(task.host)
        oracle = constrained_projection_oracle(dec_host.lifted, dec_host.x0, guest.w)
        membership = contains(dec_host, result.w_h, tol=tolerances.membership)
        if not membership.admissible:
            logger.warning("task %s: host trajectory misses the host behavior (residual %.3e)", task.name, membership.residual)
        host = result.host_trajectory(host_system.n_u, host_system.T)
        reference = scenario.references[task.reference]
        outcomes.append(
            TaskOutcome(
                task=task,
                reference=reference,
                guest=guest,
                host=host,
                result=result,
                oracle_gap=float(np.linalg.norm(result.w_h - oracle)),
                host_admissible=membership.admissible,
                host_tracking_error=tracking_error(host.y, reference),
            )
        )
        logger.info("task %s: distance %.6g, host tracking error %.6g", task.name, result.distance, outcomes[-1].host_tracking_error)

    return ExperimentResults(
        scenario=scenario,
        reports=reports,
        ilc_runs=ilc_runs,
        outcomes=outcomes,
        comparison=_comparison(scenario, decompositions, outcomes),
    )


def run_demo(
    example_id: int,
    directory,
    excel: bool = False,
    **overrides,
) -> Tuple[ExperimentResults, List[Path]]:
    """Reproduce one built-in example end to end and write its report files."""
    from reports import emit_outputs

    scenario = example_scenario(example_id).with_overrides(**overrides)
    results = run_scenario(scenario, stage="transfer")
    return results, emit_outputs(results, Path(directory), excel=excel)


def run_sweep(
    seed: int,
    pairs: int = SWEEP_PAIRS,
    samples: int = SWEEP_SAMPLES,
    dimensions: Optional[Dict[str, int]] = None,
) -> pd.DataFrame:
    """Transfer between random similar pairs and check it against the normal-equation oracle.

    Each row records the relative oracle gap, the host membership residual and the
    optimality slack: the smallest margin by which ``samples`` random host trajectories
    are farther from w_g than w_h is.
    """
    dims = dict(SWEEP_DIMENSIONS if dimensions is None else dimensions)
    rng = np.random.default_rng(seed)
    rows = []
    for index in range(pairs):
        host = random_system(rng, name="host", **dims)
        guest = random_system(rng, name="guest", **dims)
        dec_host = decompose(lift(host), host.x0)
        dec_guest = decompose(lift(guest), guest.x0)
        report = similarity_indexes(dec_host, dec_guest)
        w_g = sample_members(dec_guest, rng, 1)[0]

        row = {"pair": index, "similar": report.similar, "mean_index": report.mean_index}
        if report.similar:
            result = TransferPlan(dec_host, dec_guest, report).transfer(w_g)
            oracle = constrained_projection_oracle(dec_host.lifted, host.x0, w_g)
            candidates = sample_members(dec_host, rng, samples)
            margins = np.linalg.norm(candidates - w_g, axis=1) - result.distance
            membership = contains(dec_host, result.w_h, tol=SWEEP_MEMBERSHIP_TOL)
            row.update(
                oracle_gap=float(np.linalg.norm(result.w_h - oracle) / (1.0 + np.linalg.norm(oracle))),
                host_residual=membership.residual,
                optimality_slack=float(margins.min()),
            )
            row["passed"] = bool(
                row["oracle_gap"] <= SWEEP_ORACLE_RTOL
                and membership.admissible
                and row["optimality_slack"] >= -SWEEP_OPTIMALITY_SLACK
            )
        else:
            row.update(oracle_gap=np.nan, host_residual=np.nan, optimality_slack=np.nan, passed=False)
        rows.append(row)

    frame = pd.DataFrame(
        rows,
        columns=["pair", "similar", "mean_index", "oracle_gap", "host_residual", "optimality_slack", "passed"],
    )
    logger.info("sweep: %d of %d pairs passed", int(frame["passed"].sum()), len(frame))
    return frame
