import json
from pathlib import Path
from typing import Any, Union

import numpy as np

from pathctl.helpers.classes import convert_to_obj
from pathctl.helpers.constants import GRID_TOLERANCE
from pathctl.helpers.errors import GridAlignmentError


def grid_steps(duration: float, dt: float, what: str = "duration") -> int:
    """Number of whole steps of size dt in duration; raises when duration is off the grid."""
    if not dt > 0:
        raise GridAlignmentError(f"Grid step must be positive, got dt={dt!r}")
    ratio = duration / dt
    steps = int(round(ratio))
    if abs(ratio - steps) > GRID_TOLERANCE * max(1.0, abs(ratio)):
        raise GridAlignmentError(f"{what} {duration!r} is not a multiple of dt={dt!r}")
    return steps


def same_step(a: float, b: float) -> bool:
    return abs(a - b) <= GRID_TOLERANCE * max(abs(a), abs(b))


def combined_stderr(*stderrs: float) -> float:
    return float(np.sqrt(np.sum(np.square(stderrs))))


def write_json(path: Union[str, Path], payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(convert_to_obj(payload), indent=2, sort_keys=True) + "\n")
    return path


def read_json(path: Union[str, Path]) -> Any:
    return json.loads(Path(path).read_text())
