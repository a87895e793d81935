"""Linear-quadratic pursuit-evasion games under disturbance attenuation.

Riccati solvers, game and Kalman estimators, guidance laws, existence
checks, and the boat and missile engagement scenarios built on them.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .estimator import (EstimatorState, game_estimator_step, hinf_transform, kalman_step,
                        omega)
from .feasibility import (DEFAULT_THRESHOLD, Feasibility, GammaSearchResult, OmegaTrace,
                          gamma_critical_numeric, is_feasible, omega_trace, sbgp_gamma_critical,
                          sbgp_psi)
from .guidance import (GainTrace, GuidanceLaw, ccg_control, da_control, da_gain, equivalent_N,
                       gain_trace, perfect_state_control, pn_control, saturate,
                       separation_control)
from .model import GameModel, TimeGrid, ValidationReport, validate
from .riccati import (RiccatiSolution, evaluate, sbgp_X_closed_form, sbgp_Y_closed_form,
                      solve_X, solve_Y)
from .sim import NoiseStream, RunRecord, measure, propagate_true, simulate
