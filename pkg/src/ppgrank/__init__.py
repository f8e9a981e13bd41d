"""Black-box permutation optimization for fair re-ranking."""

__version__ = "0.1.0"

from .metrics import (
    ExposureModel,
    QueryInstance,
    QueryItem,
    dtr,
    eel,
    exhaustive_minimum,
    expected_exposure,
    make_objective,
    ndcg_at_k,
    split_into_sessions,
    target_exposure,
)
from .optimize import (
    ConstraintSpec,
    Objective,
    TrainConfig,
    TrainResult,
    apply_constraints,
    concatenate_sessions,
    load_checkpoint,
    reinforce_step,
    save_checkpoint,
    train,
    update_reference,
)
from .permutations import (
    apply_inversion_set,
    complement_inversion_set,
    inversion_set,
    is_valid_inversion_set,
    kendall_distance,
    support_edges,
)
from .plackett_luce import PlModel, pl_log_prob_gradient, pl_probability, pl_sample
from .ppg import (
    PpgModel,
    SampleOutcome,
    SamplerStats,
    adjacent_sweep_sample,
    conditional_probability,
    exact_beta,
    exact_rho,
    log_prob_gradient,
    merge_sample,
    raw_outcome_probability,
    rejection_sample,
    uniform_model,
)

__all__ = [name for name in dir() if not name.startswith("_")]
