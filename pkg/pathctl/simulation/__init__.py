from pathctl.simulation.models import (
    CostEstimate,
    DppReport,
    EstimateRecord,
    NashReport,
    SimConfig,
    SimulationDefaults,
    VerificationReport,
)
from pathctl.simulation.history import AdaptedHistory
from pathctl.simulation.policies import (
    BridgePolicy,
    ConstantPolicy,
    ControlPolicy,
    FeedbackPolicy,
    PerturbedPolicy,
    ZeroPolicy,
)
from pathctl.simulation.engine import CostModel, LQCost, SimulationResult, simulate_cost, simulate_paths
from pathctl.simulation.checks import default_bridges, default_rivals, dpp_check, verification_check
from pathctl.simulation.oracle import (
    OracleResult,
    backward_induction_reference,
    deterministic_oracle,
    trajectory_cost,
)
