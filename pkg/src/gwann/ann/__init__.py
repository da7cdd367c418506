from .estimators import (
    LMEnsembleRegressor,
    LMNetworkRegressor,
    predict_ensemble,
    train,
    train_ensemble,
)
from .network import (
    NetworkParams,
    NetworkShape,
    flatten,
    forward,
    init_params,
    lm_step,
    loss,
    normal_equations,
    residuals_and_jacobian,
    tansig,
    unflatten,
)
from .persistence import load_ensemble, save_ensemble
from .scaling import RangeScaler, ScalingSpec, apply_scaler, fit_scaler, invert_scaler
from .training import TrainingDivergedError, TrainingLog, lm_train

__all__ = [
    "LMEnsembleRegressor",
    "LMNetworkRegressor",
    "NetworkParams",
    "NetworkShape",
    "RangeScaler",
    "ScalingSpec",
    "TrainingDivergedError",
    "TrainingLog",
    "apply_scaler",
    "fit_scaler",
    "flatten",
    "forward",
    "init_params",
    "invert_scaler",
    "lm_step",
    "lm_train",
    "load_ensemble",
    "loss",
    "normal_equations",
    "predict_ensemble",
    "residuals_and_jacobian",
    "save_ensemble",
    "tansig",
    "train",
    "train_ensemble",
    "unflatten",
]
