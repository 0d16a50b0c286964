"""Angle-conditioned traversability risk estimation.

Smooth per-bin Fourier functions over the 1-sphere map any approach angle to
the concentration parameters of a categorical risk distribution; discrete
CVaR of that distribution drives a risk-bounded lattice planner.  Functions
are computed once per terrain patch, cached, and queried for any angle and
tail level without re-running a model.
"""

__version__ = "0.1.0"

from .errors import (
    BoundsError,
    CacheFull,
    ConfigError,
    DimensionError,
    EmptyInput,
    FormatError,
    GenerationError,
    HeadContractError,
    InvalidAngle,
    NoPath,
    SpartaError,
    TrainingDiverged,
    UnderdeterminedFit,
)
from .fourier import (
    AngleOfApproach,
    ConcentrationVector,
    FourierCoefficients,
    FourierRiskFunction,
    LipschitzBound,
    empirical_max_slope,
    eval_concentrations,
    eval_raw,
    fourier_basis,
    lipschitz_bound,
    wrap_angle,
)
from .riskdist import (
    BinGeometry,
    CvarLevel,
    DEFAULT_GEOMETRY,
    RiskDistribution,
    cvar,
    emd2,
    emd2_grad,
    mean,
    normalize,
    value_at_risk,
)
from .terrain import (
    PointCloud,
    Terrain,
    TerrainPatch,
    VehicleSpec,
    empirical_distribution,
    extract_patch,
    gen_boulder_field,
    gen_obstacle_row,
    sample_point_cloud,
    traversal_risk,
    traversal_risk_core,
)
from .features import FeatureGrid, normalize_cloud, pillarize
from .model import (
    Dataset,
    DatasetItem,
    SpartaModel,
    TrainConfig,
    backward,
    build_model,
    fit_patch_direct,
    forward,
    loss,
    train,
)
from .cache import CoefficientCache, PatchKey, query_risk
from .planner import (
    LatticeGraph,
    PlanQuery,
    PlanResult,
    RolloutStats,
    build_lattice,
    edge_cost,
    evaluate_rollout,
    plan,
    plan_elev_baseline,
)
from .experiment import ExperimentConfig, run_experiment
