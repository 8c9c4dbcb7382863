"""Flow-matching MIMO channel estimation with range/null-space consistency."""

__version__ = "0.1.0"

from .channels import (
    ChannelDataset,
    ClusterChannelConfig,
    generate_cluster_channel,
    generate_dataset,
    load_dataset,
    normalize_dataset,
    save_dataset,
    split_dataset,
)
from .errors import (
    ConfigError,
    DataError,
    DomainError,
    FormatError,
    NsfmError,
    NumericError,
    RankError,
    ShapeError,
    TrainingDivergedError,
)
from .estimator import (
    EstimatorConfig,
    LmmseStats,
    ScheduleConfig,
    correct,
    estimate,
    euler_predict,
    guidance_factor,
    lmmse_estimate,
    lmmse_fit,
    ls_estimate,
    make_schedule,
    nmse_db,
)
from .flow import (
    CheckpointMeta,
    TrainConfig,
    VelocityNet,
    fm_loss_and_grad,
    forward,
    init_velocity_net,
    interpolate,
    load_checkpoint,
    sample,
    save_checkpoint,
    time_embed,
    train,
)
from .measurement import (
    MeasurementModel,
    PilotConfig,
    build_measurement_matrix,
    build_pilot_matrix,
    make_measurement_model,
    null_project,
    observe,
    range_project,
    sigma_from_snr,
)
from .rng import derive_rng, make_rng
