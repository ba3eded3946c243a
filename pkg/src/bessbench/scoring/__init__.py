"""Forecast evaluation: ensemble, rank, association and tail scores plus DM tests."""

from bessbench.scoring.calibration import (
    MarginalCalibration,
    joint_var_cvar_scores,
    marginal_calibration,
    pinball_and_joint_var_cvar,
)
from bessbench.scoring.dm import DMResult, dm_test
from bessbench.scoring.ensemble import (
    crps,
    crps_per_hour,
    dawid_sebastiani,
    energy_score,
    ensemble_quantiles,
    mpd_mhd,
    point_scores,
    variogram_score,
)
from bessbench.scoring.kendall import KendallMode, kendall_score, kendall_tau_b
from bessbench.scoring.ranks import RankEnsemble, price_ranks, rank_scores, top_k_scores

__all__ = [
    "DMResult",
    "KendallMode",
    "MarginalCalibration",
    "RankEnsemble",
    "crps",
    "crps_per_hour",
    "dawid_sebastiani",
    "dm_test",
    "energy_score",
    "ensemble_quantiles",
    "joint_var_cvar_scores",
    "kendall_score",
    "kendall_tau_b",
    "marginal_calibration",
    "mpd_mhd",
    "pinball_and_joint_var_cvar",
    "point_scores",
    "price_ranks",
    "rank_scores",
    "top_k_scores",
    "variogram_score",
]
