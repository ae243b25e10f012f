from typing import Union

import numpy as np

from pathctl.paths import SampledPath
from pathctl.solver import LQParams
from pathctl.helpers.constants import REFERENCE_PARAMS


class CLOSE_IN_VALUE:
    # Keeps ndarray.__eq__ from broadcasting over this object
    __array_ufunc__ = None

    value: Union[float, np.ndarray]
    tolerance: float

    def __init__(self, value: Union[float, np.ndarray], tolerance: float = 0.0) -> None:
        self.value = value
        self.tolerance = tolerance

    def __eq__(self, __o: Union[float, np.ndarray]) -> bool:
        # True if __o lies in [value - tolerance, value + tolerance], elementwise for arrays
        return bool(np.all(np.abs(np.asarray(__o, dtype=float) - np.asarray(self.value, dtype=float)) <= self.tolerance))

    def __repr__(self) -> str:
        return f"{self.value!r} +/- {self.tolerance!r}"


def reference_params(**overrides) -> LQParams:
    return LQParams(**{**REFERENCE_PARAMS, **overrides})


def path(values, t0: float = 0.0, dt: float = 1.0) -> SampledPath:
    return SampledPath(t0=t0, dt=dt, values=np.asarray(values, dtype=float))


def random_path(rng: np.random.Generator, n_nodes: int, dim: int = 1, t0: float = 0.0, dt: float = 0.1) -> SampledPath:
    return SampledPath(t0=t0, dt=dt, values=rng.normal(size=(n_nodes, dim)))
