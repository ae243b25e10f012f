from pathctl.solver.models import GameParams
from pathctl.solver.surfaces import GameSurfaces
from pathctl.game.solver import (
    game_feedback,
    game_feedback_coefficients,
    game_hjb_residual,
    game_probe_residual,
    game_value,
    n_ladder,
    select_game_cross_factor,
    solve_e_system,
    surface_gap,
)
from pathctl.game.simulation import GameCost, GameFeedbackPolicy, default_deviations, nash_deviation_check
