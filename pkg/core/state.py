"""State carried through the stages of one simulation run."""
from pathlib import Path
from typing import Dict, List, Literal, Optional, TypedDict

from pydantic import BaseModel, ConfigDict, Field

from core.config import RuntimeConfig, SimConfig
from core.models import PopulationResult, RunManifest

ErrorKind = Literal["timeout", "output", "simulation"]


class RunState(TypedDict):
    """Mutable state handed from stage to stage by the runner."""
    # Input fields
    config: SimConfig
    runtime: RuntimeConfig
    out_dir: Optional[Path]
    dump_paths: bool

    # Stage results
    result: Optional[PopulationResult]
    manifest: Optional[RunManifest]
    written: Dict[str, Path]

    # Metadata
    error_messages: List[str]


class RunOutcome(BaseModel):
    """What a finished (or failed) run reports back to its caller."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    success: bool
    result: Optional[PopulationResult] = None
    manifest: Optional[RunManifest] = None
    written: Dict[str, Path] = Field(default_factory=dict, description="Artifact name to file path")
    execution_time: float = 0.0
    error: Optional[str] = None
    error_kind: Optional[ErrorKind] = None
    errors: List[str] = Field(default_factory=list)
