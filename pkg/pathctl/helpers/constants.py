from typing import Dict, Final, Tuple

# Grid membership is decided up to this fraction of a step
GRID_TOLERANCE: Final[float] = 1e-9

# Functional derivative defaults
SPACE_STEP_SCALE: Final[float] = 1e-4
PREDICATE_RTOL: Final[float] = 1e-8
PREDICATE_ATOL: Final[float] = 1e-10
ROUNDOFF_FLOOR: Final[float] = 1e-12

SYMMETRY_TOLERANCE: Final[float] = 1e-12

# Monte Carlo bands, in units of (combined) standard errors
EQUALITY_BAND: Final[float] = 3.0
DOMINANCE_BAND: Final[float] = 2.0
STRICT_BAND: Final[float] = 3.0
# Equality tolerance relative to |V| when the estimate has no sampling error (sigma = 0)
DETERMINISTIC_RTOL: Final[float] = 0.02
MIN_STRICTLY_WORSE: Final[int] = 2

MC_CHUNK_SIZE: Final[int] = 256
ORACLE_MAX_UNKNOWNS: Final[int] = 400

CROSS_FACTORS: Final[Dict[str, float]] = {
    "half": 0.5,
    "one": 1.0,
}

# Steps per delay used by the refinement ladders, coarse to fine
RESIDUAL_LADDER: Final[Tuple[int, ...]] = (5, 10, 20)
N_LADDER: Final[Tuple[int, ...]] = (2, 10, 50, 100)

# Parameter set of the reference surface plot
REFERENCE_PARAMS: Final[Dict[str, float]] = {
    "q": 1.0,
    "eps": 2.0,
    "c": 0.0,
    "horizon": 1.0,
    "tau": 0.05,
    "sigma": 1.0,
}

EVENTS_RETENTION_SIZE: Final[int] = 2 * 1024 * 1024

# Steps used by the functional Itô refinement study, coarse to fine
ITO_LEVELS: Final[Tuple[float, ...]] = (0.04, 0.01, 0.0025)

MIN_CONVERGENCE_SLOPE: Final[float] = 0.9
MAX_N_LADDER_RATIO: Final[float] = 0.25
