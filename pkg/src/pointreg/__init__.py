"""Closed-form weighted alignment and iterative registration of unlabeled point sets."""

from .align import (
    AlignmentSolution,
    Transform,
    cost,
    negative_branch_error,
    solve,
    solve_labeled,
    solve_rigid,
    solve_similarity,
)
from .errors import (
    AllPairsPruned,
    DegenerateSet,
    DegenerateSource,
    DimensionMismatch,
    IllPosed,
    InvalidConfig,
    InvalidSpec,
    NoAlignment,
    NoConvergence,
    NotPSD,
    NotSymmetric,
    PointRegError,
    RankDeficient,
    ZeroWeightMass,
)
from .registration import (
    IterationRecord,
    RegistrationConfig,
    RegistrationResult,
    prune_and_reweight,
    register,
    residual,
    similarity_score,
)
from .stats import MomentSummary, PairTable, WellPosedness, check_well_posed, moments, normalize_weights
from .symmat import pd_inv_sqrt, pd_sqrt, polar_rotation, sym_eigen
from .synth import SynthInstance, SynthSpec, generate, oracle_grid_2d, proximity_weights

__version__ = "0.1.0"
