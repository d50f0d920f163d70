import logging
from pathlib import Path
from typing import TYPE_CHECKING, Dict, List

import numpy as np
import pandas as pd

from system_model import per_step

if TYPE_CHECKING:
    from experiments import ExperimentResults, TaskOutcome

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
LINE_TERMINATOR = "\r\n"
SIMILARITY_COLUMNS = ["host", "guest", "k", "s_k", "theta_k_radians"]
SUMMARY_COLUMNS = ["task", "distance", "guest_residual", "host_residual", "ilc_final_error", "host_tracking_error"]
WORKBOOK_NAME = "report.xlsx"
SHEET_NAME_LIMIT = 31
INSTRUCTIONS = [
    "Each sheet holds one of the CSV files written next to this workbook.",
    "similarity: indexes s_k and principal angles per (host, guest) pair.",
    "summary: transfer distance, residuals and tracking errors per task.",
    "trajectory_<task>: reference, guest and host inputs and outputs per time step.",
    "ilc_<task>: tracking error norm per ILC iteration.",
    "There are no charts in this file; select a sheet's columns and use Insert > Chart to plot them.",
]


class OutputError(OSError):
    """Raised when a report file cannot be written."""


def similarity_frame(results: "ExperimentResults") -> pd.DataFrame:
    frames = []
    for (host, guest), report in results.reports.items():
        frame = report.to_frame()
        frame.insert(0, "guest", guest)
        frame.insert(0, "host", host)
        frames.append(frame)
    if not frames:
        return pd.DataFrame(columns=SIMILARITY_COLUMNS)
    return pd.concat(frames, ignore_index=True)[SIMILARITY_COLUMNS]


def _channels(prefix: str, values: np.ndarray) -> Dict[str, np.ndarray]:
    """One column per channel; a suffix _<channel> only when there is more than one."""
    if values.shape[1] == 1:
        return {prefix: values[:, 0]}
    return {f"{prefix}_{channel + 1}": values[:, channel] for channel in range(values.shape[1])}


def trajectory_frame(outcome: "TaskOutcome", T: int) -> pd.DataFrame:
    """Per-step reference, guest and host signals of one task."""
    n_u = outcome.guest.u.size // T
    n_y = outcome.guest.y.size // T
    columns = {"t": np.arange(T)}
    columns.update(_channels("reference", per_step(outcome.reference, n_y)))
    columns.update(_channels("guest_u", per_step(outcome.guest.u, n_u)))
    columns.update(_channels("guest_y", per_step(outcome.guest.y, n_y)))
    columns.update(_channels("host_u", per_step(outcome.host.u, n_u)))
    columns.update(_channels("host_y", per_step(outcome.host.y, n_y)))
    return pd.DataFrame(columns)


def summary_frame(results: "ExperimentResults") -> pd.DataFrame:
    rows = []
    for outcome in results.outcomes:
        rows.append(
            {
                "task": outcome.task.name,
                "distance": outcome.result.distance,
                "guest_residual": outcome.result.guest_residual,
                "host_residual": outcome.result.host_residual,
                "ilc_final_error": results.ilc_runs[outcome.task.name].final_error,
                "host_tracking_error": outcome.host_tracking_error,
            }
        )
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def report_frames(results: "ExperimentResults") -> Dict[str, pd.DataFrame]:
    """File stem -> table, in writing order. Only similarity is unconditional."""
    frames = {"similarity": similarity_frame(results)}
    if results.outcomes:
        frames["summary"] = summary_frame(results)
    if results.comparison is not None:
        frames["comparison"] = results.comparison
    for outcome in results.outcomes:
        frames[f"trajectory_{outcome.task.name}"] = trajectory_frame(outcome, results.scenario.horizon)
    for name, run in results.ilc_runs.items():
        frames[f"ilc_{name}"] = run.to_frame()
    return frames


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    try:
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator=LINE_TERMINATOR)
    except OSError as exc:
        raise OutputError(f"{path}: cannot write ({exc.strerror or exc})") from exc
    logger.info("wrote %s (%d rows)", path, len(frame))
    return path


def _sheet_names(stems: List[str]) -> Dict[str, str]:
    names: Dict[str, str] = {}
    used = set()
    for stem in stems:
        name = stem[:SHEET_NAME_LIMIT]
        counter = 2
        while name in used:
            suffix = f"~{counter}"
            name = stem[: SHEET_NAME_LIMIT - len(suffix)] + suffix
            counter += 1
        used.add(name)
        names[stem] = name
    return names


def write_workbook(frames: Dict[str, pd.DataFrame], path: Path) -> Path:
    """All tables in one workbook plus an Instructions sheet."""
    sheet_names = _sheet_names(list(frames))
    try:
        with pd.ExcelWriter(path, engine="xlsxwriter") as writer:
            for stem, frame in frames.items():
                frame.to_excel(writer, index=False, sheet_name=sheet_names[stem])
            pd.DataFrame({"Instructions": INSTRUCTIONS}).to_excel(writer, index=False, sheet_name="Instructions")
    except OSError as exc:
        raise OutputError(f"{path}: cannot write ({exc.strerror or exc})") from exc
    logger.info("wrote %s (%d sheets)", path, len(frames) + 1)
    return path


def emit_outputs(results: "ExperimentResults", directory, excel: bool = False) -> List[Path]:
    """Write the report CSVs (and optionally the workbook) into ``directory``."""
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"{directory}: cannot create output directory ({exc.strerror or exc})") from exc

    frames = report_frames(results)
    written = [write_csv(frame, directory / f"{stem}.csv") for stem, frame in frames.items()]
    if excel:
        written.append(write_workbook(frames, directory / WORKBOOK_NAME))
    return written


def write_sweep(frame: pd.DataFrame, directory) -> Path:
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"{directory}: cannot create output directory ({exc.strerror or exc})") from exc
    return write_csv(frame, directory / "sweep.csv")
