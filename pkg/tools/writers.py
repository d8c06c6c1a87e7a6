"""Result artifacts: summary document, curve and individual tables, path dumps."""
import json
from pathlib import Path
from typing import Any, Callable, Dict, Union

import numpy as np
import pandas as pd

from core.models import PopulationResult, RunManifest, Trajectory
from utils.tracing import log_event

PathLike = Union[str, Path]


class OutputError(Exception):
    """A result file could not be written."""

    def __init__(self, path: PathLike, reason: str):
        self.path = Path(path)
        self.reason = reason
        super().__init__(f"cannot write {self.path}: {reason}")


def _write(path: PathLike, writer: Callable[[Path], None]) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        writer(path)
    except OSError as e:
        raise OutputError(path, e.strerror or str(e)) from e
    log_event("WRITE", f"Wrote {path}")
    return path


def summary_document(result: PopulationResult, manifest: RunManifest) -> Dict[str, Any]:
    """Key-value summary of a run plus its manifest."""
    summary = result.summary
    return {
        "median_le": summary.life_expectancy.median,
        "le_q25": summary.life_expectancy.q25,
        "le_q75": summary.life_expectancy.q75,
        "median_x_at_death": summary.hrqol_at_death.median,
        "xq25": summary.hrqol_at_death.q25,
        "xq75": summary.hrqol_at_death.q75,
        "median_haly": summary.haly.median,
        "haly_q25": summary.haly.q25,
        "haly_q75": summary.haly.q75,
        "n": summary.n,
        "censored": summary.censored,
        "manifest": manifest.model_dump(),
    }


def render_summary(result: PopulationResult, manifest: RunManifest) -> str:
    """JSON text of summary_document; floats keep their shortest exact repr."""
    return json.dumps(summary_document(result, manifest), indent=2) + "\n"


def write_summary(result: PopulationResult, manifest: RunManifest, path: PathLike) -> Path:
    text = render_summary(result, manifest)
    return _write(path, lambda target: target.write_text(text, encoding="utf-8"))


def _write_csv(frame: pd.DataFrame, path: PathLike) -> Path:
    return _write(path, lambda target: frame.to_csv(target, index=False, lineterminator="\n"))


def write_curves(result: PopulationResult, path: PathLike) -> Path:
    """age,q25,q50,q75 table on the stored grid."""
    curves = result.curves
    frame = pd.DataFrame({
        "age": curves.ages,
        "q25": curves.q25,
        "q50": curves.q50,
        "q75": curves.q75,
    })
    return _write_csv(frame, path)


def write_individuals(result: PopulationResult, path: PathLike) -> Path:
    """id,tau,x_at_death,haly table ordered by id."""
    trajectories = sorted(result.trajectories, key=lambda trajectory: trajectory.index)
    frame = pd.DataFrame({
        "id": [trajectory.index for trajectory in trajectories],
        "tau": [trajectory.tau for trajectory in trajectories],
        "x_at_death": [trajectory.x_at_death for trajectory in trajectories],
        "haly": [trajectory.haly for trajectory in trajectories],
    })
    return _write_csv(frame, path)


def write_path(trajectory: Trajectory, path: PathLike) -> Path:
    """One stopped path as an age,hrqol table."""
    frame = pd.DataFrame({"age": trajectory.times, "hrqol": trajectory.values})
    return _write_csv(frame, path)


def dump_paths(result: PopulationResult, path: PathLike) -> Path:
    """All stored paths as a compressed npz with ``ages`` and ``paths`` arrays."""
    paths = np.stack([trajectory.values for trajectory in result.trajectories])
    return _write(path, lambda target: np.savez_compressed(target, ages=result.ages, paths=paths))
