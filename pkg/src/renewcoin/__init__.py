"""Simulation and inference for coin tossing at hidden renewal times."""

from .errors import *  # noqa: F401,F403
from .estimators import (
    BlockSchedule,
    EstimateReport,
    block_schedule,
    linear_estimate,
    run_statistics,
    simple_weighted_estimate,
    singularity_score,
    theta_from_runs,
)
from .experiments import ExperimentConfig, asymptotics_report, run_sweep
from .ratefn import (
    lambda_star_dp,
    lambda_star_dual,
    psi_eval,
    psi_inverse,
    rate_tables,
    reconstruction_constants,
)
from .renewal import (
    RenewalLaw,
    builtin_law,
    compose_laws,
    delay_law,
    f_from_u,
    kaluza_power_law,
    law_stats,
    u_from_f,
)
from .rng import RngStream
from .simulate import (
    DiscreteDist,
    joint_renewals,
    observe_coin,
    observe_general,
    quenched_q,
    sample_path,
)

__version__ = "0.1.0"
