"""Message-level reading estimation: features, models, training, evaluation."""

from .evaluate import (
    CVResult,
    EvalReport,
    LabeledSession,
    MessageEstimate,
    classify_read_level,
    cross_validate,
    estimate_session,
    evaluate_model,
    labeled_sessions_from_dataset,
    level_index,
    mean_report,
    DETAIL,
    LEVELS,
    SKIM,
    SKIP,
)
from .features import (
    BASELINE_FEATURES,
    FEATURE_ORDER,
    FeatureTable,
    MSG_USER_FEATURES,
    N_FEATURES,
    PATTERN_FEATURES,
    baseline_p,
    build_features,
    section_geometry,
    sessional_features,
)
from .models import (
    ALL_VARIANTS,
    BASELINE_VARIANTS,
    Model,
    SESSIONAL_VARIANTS,
    TIMESTEP_VARIANTS,
    TRAINABLE_VARIANTS,
    architecture_for,
    init_params,
    loss_and_grad,
    new_model,
    predict_sessional,
    predict_timestep,
)
from .training import (
    CSV_HEADER,
    SessionalDataset,
    TimestepDataset,
    TrainConfig,
    build_sessional_dataset,
    train_model,
)

__all__ = [name for name in dir() if not name.startswith("_")]
