"""JSON persistence for trained networks and ensembles."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .estimators import LMEnsembleRegressor, LMNetworkRegressor
from .network import NetworkShape
from .scaling import RangeScaler
from .training import TrainingLog

FORMAT_VERSION = 1


def network_to_dict(est: LMNetworkRegressor) -> dict:
    s = est.shape_
    return {
        "params": est.get_params(),
        "shape": [s.d1, s.d2, s.d3],
        "single_output": bool(est._single_output),
        "x_scaler": est.x_scaler_.to_dict(),
        "y_scaler": est.y_scaler_.to_dict(),
        "theta": est.params_.tolist(),
        "training_log": est.training_log_.to_dict(),
    }


def network_from_dict(d: dict) -> LMNetworkRegressor:
    est = LMNetworkRegressor(**d["params"])
    est.shape_ = NetworkShape(*d["shape"])
    est.n_features_in_ = est.shape_.d1
    est._single_output = d["single_output"]
    est.x_scaler_ = RangeScaler.from_dict(d["x_scaler"])
    est.y_scaler_ = RangeScaler.from_dict(d["y_scaler"])
    est.params_ = np.asarray(d["theta"], dtype=float)
    est.training_log_ = TrainingLog.from_dict(d["training_log"])
    return est


def ensemble_to_dict(ens: LMEnsembleRegressor, extra: dict | None = None) -> dict:
    params = ens.get_params()
    params.pop("n_jobs", None)
    return {
        "format_version": FORMAT_VERSION,
        "kind": "lm_ensemble",
        "params": params,
        "seeds": list(ens.seeds_),
        "single_output": bool(ens._single_output),
        "members": [network_to_dict(m) for m in ens.estimators_],
        "metadata": extra or {},
    }


def ensemble_from_dict(d: dict) -> LMEnsembleRegressor:
    if d.get("format_version") != FORMAT_VERSION or d.get("kind") != "lm_ensemble":
        raise ValueError("not a supported ensemble file")
    ens = LMEnsembleRegressor(**d["params"])
    ens.seeds_ = list(d["seeds"])
    ens._single_output = d["single_output"]
    ens.estimators_ = [network_from_dict(m) for m in d["members"]]
    ens.n_features_in_ = ens.estimators_[0].n_features_in_
    ens.metadata_ = d.get("metadata", {})
    return ens


def save_ensemble(ens: LMEnsembleRegressor, path: str | Path, extra: dict | None = None) -> None:
    Path(path).write_text(json.dumps(ensemble_to_dict(ens, extra), indent=1, sort_keys=True))


def load_ensemble(path: str | Path) -> LMEnsembleRegressor:
    return ensemble_from_dict(json.loads(Path(path).read_text()))
