"""Three-layer feedforward network: tansig hidden layer, linear output.

Parameters travel as one flat vector ``theta`` laid out as W1 (row-major,
``d2 x d1``), b1, W2 (row-major, ``d3 x d2``), b2. Residuals are stacked
sample-major: entry ``i * d3 + j`` is ``h(x_i)_j - y_ij``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg


class SingularSystemError(np.linalg.LinAlgError):
    """The damped normal equations could not be factorised."""


@dataclass(frozen=True)
class NetworkShape:
    d1: int
    d2: int
    d3: int

    def __post_init__(self):
        if min(self.d1, self.d2, self.d3) < 1:
            raise ValueError(f"all layer sizes must be >= 1, got {self}")

    @property
    def n_params(self) -> int:
        return self.d1 * self.d2 + self.d2 * self.d3 + self.d2 + self.d3

    @property
    def slices(self) -> tuple[slice, slice, slice, slice]:
        d1, d2, d3 = self.d1, self.d2, self.d3
        a = d1 * d2
        b = a + d2
        c = b + d2 * d3
        return slice(0, a), slice(a, b), slice(b, c), slice(c, c + d3)


@dataclass(frozen=True, eq=False)
class NetworkParams:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    @property
    def shape(self) -> NetworkShape:
        return NetworkShape(self.W1.shape[1], self.W1.shape[0], self.W2.shape[0])


def flatten(params: NetworkParams) -> np.ndarray:
    return np.concatenate([params.W1.ravel(), params.b1.ravel(), params.W2.ravel(), params.b2.ravel()])


def unflatten(theta: np.ndarray, shape: NetworkShape) -> NetworkParams:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (shape.n_params,):
        raise ValueError(f"expected {shape.n_params} parameters, got {theta.shape}")
    s1, s2, s3, s4 = shape.slices
    return NetworkParams(
        W1=theta[s1].reshape(shape.d2, shape.d1),
        b1=theta[s2],
        W2=theta[s3].reshape(shape.d3, shape.d2),
        b2=theta[s4],
    )


def init_params(shape: NetworkShape, rng: np.random.Generator) -> np.ndarray:
    """Uniform in +-1/sqrt(fan_in) per layer (weights and biases alike)."""
    lim1 = 1.0 / np.sqrt(shape.d1)
    lim2 = 1.0 / np.sqrt(shape.d2)
    w1 = rng.uniform(-lim1, lim1, size=shape.d1 * shape.d2)
    b1 = rng.uniform(-lim1, lim1, size=shape.d2)
    w2 = rng.uniform(-lim2, lim2, size=shape.d2 * shape.d3)
    b2 = rng.uniform(-lim2, lim2, size=shape.d3)
    return np.concatenate([w1, b1, w2, b2])


def tansig(z: np.ndarray) -> np.ndarray:
    """Hyperbolic tangent written as 2 / (1 + exp(-2z)) - 1."""
    with np.errstate(over="ignore"):
        return 2.0 / (1.0 + np.exp(-2.0 * np.asarray(z, dtype=float))) - 1.0


def _hidden(p: NetworkParams, X: np.ndarray) -> np.ndarray:
    return tansig(X @ p.W1.T + p.b1)


def forward(theta, X, shape: NetworkShape | None = None) -> np.ndarray:
    """Network output for one input vector or a batch of row vectors.

    ``theta`` may be a flat vector (then ``shape`` is required) or a
    :class:`NetworkParams`.
    """
    p = theta if isinstance(theta, NetworkParams) else unflatten(theta, shape)
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X2 = X[None, :] if single else X
    out = _hidden(p, X2) @ p.W2.T + p.b2
    return out[0] if single else out


def hidden_activations(theta, X, shape: NetworkShape | None = None) -> np.ndarray:
    p = theta if isinstance(theta, NetworkParams) else unflatten(theta, shape)
    return _hidden(p, np.atleast_2d(np.asarray(X, dtype=float)))


def loss(theta, X, Y, shape: NetworkShape | None = None) -> float:
    """Mean squared error over all N * d3 output components."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    E = forward(theta, np.atleast_2d(X), shape) - Y
    return float(np.mean(E * E))


def residuals_and_jacobian(theta, X, Y, shape: NetworkShape | None = None):
    """Residual vector and its analytic Jacobian with respect to ``theta``.

    The Jacobian is built by backpropagation: output-layer derivatives first,
    then through the tansig derivative ``1 - a**2`` to the first layer.

    Returns
    -------
    e : ndarray, shape (N * d3,)
    J : ndarray, shape (N * d3, n_params)
    """
    p = theta if isinstance(theta, NetworkParams) else unflatten(theta, shape)
    shape = p.shape
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    n, d1, d2, d3 = X.shape[0], shape.d1, shape.d2, shape.d3
    A = _hidden(p, X)
    E = A @ p.W2.T + p.b2 - Y
    dz = p.W2[None, :, :] * (1.0 - A * A)[:, None, :]  # (N, d3, d2): d output / d z
    J_w1 = (dz[:, :, :, None] * X[:, None, None, :]).reshape(n * d3, d2 * d1)
    J_b1 = dz.reshape(n * d3, d2)
    eye = np.eye(d3)
    J_w2 = (eye[None, :, :, None] * A[:, None, None, :]).reshape(n * d3, d3 * d2)
    J_b2 = np.tile(eye, (n, 1))
    return E.reshape(-1), np.hstack([J_w1, J_b1, J_w2, J_b2])


def _grouped_permutation(shape: NetworkShape) -> np.ndarray:
    """Map grouped ordering [(k, m~)..., (j, l~)...] to flat theta indices."""
    d1, d2, d3 = shape.d1, shape.d2, shape.d3
    _, s_b1, s_w2, s_b2 = shape.slices
    g1 = np.empty((d2, d1 + 1), dtype=int)
    g1[:, :d1] = np.arange(d1 * d2).reshape(d2, d1)
    g1[:, d1] = np.arange(s_b1.start, s_b1.stop)
    g2 = np.empty((d3, d2 + 1), dtype=int)
    g2[:, :d2] = np.arange(s_w2.start, s_w2.stop).reshape(d3, d2)
    g2[:, d2] = np.arange(s_b2.start, s_b2.stop)
    return np.concatenate([g1.ravel(), g2.ravel()])


def normal_equations(theta, X, Y, shape: NetworkShape):
    """``(J^T J, J^T e, sum of squared residuals)`` without forming ``J``.

    Exploits the layer structure of the Jacobian: the output-layer block is
    a Kronecker product and the first-layer block factors through
    ``W2^T W2``. Equivalent to ``residuals_and_jacobian`` followed by the
    products, at a fraction of the memory.
    """
    p = unflatten(theta, shape)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    n, d1, d2, d3 = X.shape[0], shape.d1, shape.d2, shape.d3
    A = _hidden(p, X)
    E = A @ p.W2.T + p.b2 - Y
    ones = np.ones((n, 1))
    Xt = np.hstack([X, ones])
    At = np.hstack([A, ones])
    P = ((1.0 - A * A)[:, :, None] * Xt[:, None, :]).reshape(n, d2 * (d1 + 1))
    g1 = d2 * (d1 + 1)

    w2tw2 = p.W2.T @ p.W2
    h11 = (P.T @ P).reshape(d2, d1 + 1, d2, d1 + 1) * w2tw2[:, None, :, None]
    h22 = np.kron(np.eye(d3), At.T @ At)
    pta = (P.T @ At).reshape(d2, d1 + 1, d2 + 1)
    h12 = pta[:, :, None, :] * p.W2.T[:, None, :, None]  # (d2, d1+1, d3, d2+1)

    H = np.empty((shape.n_params, shape.n_params))
    Hg = np.empty_like(H)
    Hg[:g1, :g1] = h11.reshape(g1, g1)
    Hg[g1:, g1:] = h22
    Hg[:g1, g1:] = h12.reshape(g1, -1)
    Hg[g1:, :g1] = Hg[:g1, g1:].T
    back = (E @ p.W2) * (1.0 - A * A)
    grad_g = np.concatenate([(back.T @ Xt).reshape(-1), (E.T @ At).reshape(-1)])

    perm = _grouped_permutation(shape)
    H[np.ix_(perm, perm)] = Hg
    grad = np.empty(shape.n_params)
    grad[perm] = grad_g
    return H, grad, float(np.sum(E * E))


def damped_solve(JtJ: np.ndarray, Jte: np.ndarray, mu: float) -> np.ndarray:
    """Solve ``(J^T J + mu I) delta = J^T e``."""
    A = JtJ + mu * np.eye(JtJ.shape[0])
    try:
        factor = scipy.linalg.cho_factor(A, lower=False, check_finite=False)
        delta = scipy.linalg.cho_solve(factor, Jte, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"damped normal equations singular at mu={mu:g}") from exc
    if not np.all(np.isfinite(delta)):
        raise SingularSystemError(f"damped normal equations singular at mu={mu:g}")
    return delta


def lm_step(theta, J, e, mu: float) -> np.ndarray:
    """One Levenberg-Marquardt update ``theta - (J^T J + mu I)^-1 J^T e``."""
    if mu < 0:
        raise ValueError("mu must be non-negative")
    J = np.atleast_2d(np.asarray(J, dtype=float))
    e = np.asarray(e, dtype=float).ravel()
    return np.asarray(theta, dtype=float) - damped_solve(J.T @ J, J.T @ e, mu)
