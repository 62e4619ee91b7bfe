"""Best-arm identification complexity laboratory."""

from .arms import Arm, ArmFamily, BanditInstance, best_arm, check_weights, kl, sample, validate
from .complexity import (
    ComplexityResult,
    TransportCost,
    gamma_fc,
    gamma_na,
    transport_cost_fc,
    transport_cost_na,
    two_armed_gaussian_closed_form,
)
from .policies import (
    HistoryState,
    fixed_weight_policy,
    sigma_proportional_policy,
    track_and_stop_policy,
    uniform_policy,
)
from .sim import (
    estimate_rate,
    probe_conjectures,
    probe_uniform_dominance,
    run_fixed_budget,
    run_fixed_confidence,
)

__version__ = "0.1.0"
