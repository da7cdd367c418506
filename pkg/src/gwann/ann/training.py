"""Full-batch Levenberg-Marquardt training with validation early stopping."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .network import NetworkShape, SingularSystemError, damped_solve, loss, normal_equations

STOP_MAX_EPOCHS = "max_epochs"
STOP_VALIDATION = "validation_checks"
STOP_MU_MAX = "mu_max"
MU_FLOOR = 1e-20


class TrainingDivergedError(ArithmeticError):
    def __init__(self, epoch: int, value: float):
        super().__init__(f"training loss became non-finite ({value}) at epoch {epoch}")
        self.epoch = epoch


@dataclass
class TrainingLog:
    epochs: int
    best_epoch: int
    train_loss: float
    val_loss: float
    stop_reason: str
    final_mu: float
    train_history: list[float] = field(default_factory=list)
    scaler_fit: str = "full_dataset"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingLog":
        return cls(**d)


def lm_train(
    theta0: np.ndarray,
    shape: NetworkShape,
    X_train: np.ndarray,
    Y_train: np.ndarray,
    X_val: np.ndarray | None = None,
    Y_val: np.ndarray | None = None,
    *,
    max_epochs: int = 1000,
    max_fail: int = 6,
    mu: float = 1e-3,
    mu_dec: float = 0.1,
    mu_inc: float = 10.0,
    mu_max: float = 1e10,
) -> tuple[np.ndarray, TrainingLog]:
    """Train on already-scaled data; return the best-validation parameters.

    A candidate step is accepted only when it lowers the training loss, after
    which ``mu`` shrinks by ``mu_dec``; otherwise ``mu`` grows by ``mu_inc``
    and the step is recomputed. Training stops after ``max_epochs`` accepted
    steps, after ``max_fail`` consecutive epochs in which the validation loss
    rose over the previous epoch, or once ``mu`` exceeds ``mu_max``. The
    returned parameters are those with the lowest validation loss seen.
    """
    theta = np.array(theta0, dtype=float)
    has_val = X_val is not None and len(X_val) > 0
    perf = loss(theta, X_train, Y_train, shape)
    if not np.isfinite(perf):
        raise TrainingDivergedError(0, perf)
    best = theta.copy()
    best_val = loss(theta, X_val, Y_val, shape) if has_val else perf
    prev_val = best_val
    best_train = perf
    best_epoch = 0
    fails = 0
    history = [perf]
    stop = STOP_MAX_EPOCHS
    epoch = 0
    for epoch in range(1, max_epochs + 1):
        H, g, _ = normal_equations(theta, X_train, Y_train, shape)
        accepted = False
        while mu <= mu_max:
            try:
                candidate = theta - damped_solve(H, g, mu)
            except SingularSystemError:
                mu = max(mu, MU_FLOOR) * mu_inc
                continue
            new_perf = loss(candidate, X_train, Y_train, shape)
            if new_perf < perf:
                mu = max(mu * mu_dec, MU_FLOOR)
                accepted = True
                break
            mu = max(mu, MU_FLOOR) * mu_inc
        if not accepted:
            stop = STOP_MU_MAX
            epoch -= 1
            break
        theta, perf = candidate, new_perf
        if not np.isfinite(perf):
            raise TrainingDivergedError(epoch, perf)
        history.append(perf)
        if has_val:
            vperf = loss(theta, X_val, Y_val, shape)
            if vperf < best_val:
                best, best_val, best_train, best_epoch = theta.copy(), vperf, perf, epoch
            fails = fails + 1 if vperf > prev_val else 0
            prev_val = vperf
            if fails >= max_fail:
                stop = STOP_VALIDATION
                break
        else:
            best, best_val, best_train, best_epoch = theta.copy(), perf, perf, epoch
    log = TrainingLog(
        epochs=epoch,
        best_epoch=best_epoch,
        train_loss=float(best_train),
        val_loss=float(best_val),
        stop_reason=stop,
        final_mu=float(mu),
        train_history=[float(h) for h in history],
    )
    return best, log
