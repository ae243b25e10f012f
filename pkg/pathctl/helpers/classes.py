from dataclasses import asdict, is_dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Type, TypeVar

import numpy as np
from pydantic import BaseModel

T = TypeVar('T', bound=BaseModel)


# ================== Utils for model <-> dict parsing ===========================
def dict_to_basemodel(cls: Type[T], data: Dict[str, Any]) -> T:
    """Validates a dictionary into a BaseModel instance; nested models are validated by pydantic."""
    if not (isinstance(cls, type) and issubclass(cls, BaseModel)):
        raise TypeError(f"{cls} is not a BaseModel.")
    return cls.model_validate(data)


def convert_to_obj(data: Any) -> Any:
    """Turns models, dataclasses and numpy values into plain JSON-ready python objects."""
    if is_dataclass(data) and not isinstance(data, type):
        return {k: convert_to_obj(v) for k, v in asdict(data).items()}
    elif isinstance(data, BaseModel):
        return {k: convert_to_obj(v) for k, v in data.model_dump().items()}
    elif isinstance(data, np.ndarray):
        return [convert_to_obj(item) for item in data.tolist()]
    elif isinstance(data, np.generic):
        return data.item()
    elif isinstance(data, (list, tuple)):
        return [convert_to_obj(item) for item in data]
    elif isinstance(data, dict):
        return {str(k): convert_to_obj(v) for k, v in data.items()}
    elif isinstance(data, Enum):
        return data.value
    elif isinstance(data, Path):
        return str(data)
    return data
