"""Three-layer network mapping instruction distributions to PCVs.

Two relu hidden layers (128 and 64 wide by default) and a linear output,
trained with Adam on the summed squared error over both members of every
original/obfuscated pair against the original's principal-component vector.
Plain numpy throughout; everything is deterministic given the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from sklearn.base import BaseEstimator

from .errors import NonFiniteLoss
from .validation import as_float_matrix, check_fitted

INPUT_SCALINGS = ("none", "log1p")


@dataclass
class TrainingConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    input_scaling: str = "none"

    def __post_init__(self):
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must be in (0, 1)")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.input_scaling not in INPUT_SCALINGS:
            raise ValueError(f"input_scaling must be one of {INPUT_SCALINGS}")


@dataclass
class NetworkParams:
    weights: list[np.ndarray]  # [(h1, n), (h2, h1), (m, h2)]
    biases: list[np.ndarray]   # [(h1,), (h2,), (m,)]

    def copy(self) -> "NetworkParams":
        return NetworkParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def finite(self) -> bool:
        return all(np.isfinite(w).all() for w in self.weights) and all(
            np.isfinite(b).all() for b in self.biases
        )


def scale_inputs(X: np.ndarray, mode: str) -> np.ndarray:
    if mode == "none":
        return np.asarray(X, dtype=np.float64)
    if mode == "log1p":
        return np.log1p(np.asarray(X, dtype=np.float64))
    raise ValueError(f"unknown input scaling {mode!r}")


def init_network(n_inputs: int, n_outputs: int, seed: int,
                 hidden: tuple[int, ...] = (128, 64)) -> NetworkParams:
    """He-style fan-in-scaled weights, zero biases, fully seeded."""
    rng = np.random.default_rng(seed)
    sizes = [n_inputs, *hidden, n_outputs]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return NetworkParams(weights, biases)


def forward(params: NetworkParams, x: np.ndarray) -> np.ndarray:
    """Single-vector inference: relu hidden layers, linear output."""
    h = np.asarray(x, dtype=np.float64)
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = w @ h + b
        if i != last:
            h = np.maximum(h, 0.0)
    return h


def _forward_batch(params: NetworkParams, X: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Batch forward pass keeping hidden activations for backprop."""
    hidden: list[np.ndarray] = []
    h = X
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w.T + b
        if i != last:
            h = np.maximum(h, 0.0)
            hidden.append(h)
    return hidden, h


def loss(params: NetworkParams, X: np.ndarray, Y: np.ndarray) -> float:
    """Summed squared error over the batch."""
    _, out = _forward_batch(params, X)
    return float(((Y - out) ** 2).sum())


def gradients(params: NetworkParams, X: np.ndarray, Y: np.ndarray) -> NetworkParams:
    """Exact analytic gradient of loss(); relu subgradient at 0 taken as 0."""
    hidden, out = _forward_batch(params, X)
    layers_in = [X, *hidden]
    grad_w = [np.empty_like(w) for w in params.weights]
    grad_b = [np.empty_like(b) for b in params.biases]
    delta = 2.0 * (out - Y)
    for i in range(len(params.weights) - 1, -1, -1):
        grad_w[i] = delta.T @ layers_in[i]
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i]) * (hidden[i - 1] > 0)
    return NetworkParams(grad_w, grad_b)


@dataclass
class AdamState:
    m: NetworkParams
    v: NetworkParams
    step: int = 0

    @classmethod
    def zeros_like(cls, params: NetworkParams) -> "AdamState":
        zero = lambda arrs: [np.zeros_like(a) for a in arrs]
        return cls(
            m=NetworkParams(zero(params.weights), zero(params.biases)),
            v=NetworkParams(zero(params.weights), zero(params.biases)),
        )


def adam_step(
    params: NetworkParams,
    grads: NetworkParams,
    state: AdamState,
    config: TrainingConfig,
) -> tuple[NetworkParams, AdamState]:
    """One bias-corrected Adam update; returns new params and moment state."""
    t = state.step + 1
    b1, b2, eps, lr = config.beta1, config.beta2, config.epsilon, config.learning_rate
    new_params = params.copy()
    new_m = state.m.copy()
    new_v = state.v.copy()
    for group in ("weights", "biases"):
        ps = getattr(new_params, group)
        gs = getattr(grads, group)
        ms = getattr(new_m, group)
        vs = getattr(new_v, group)
        for i in range(len(ps)):
            ms[i] = b1 * ms[i] + (1 - b1) * gs[i]
            vs[i] = b2 * vs[i] + (1 - b2) * gs[i] ** 2
            m_hat = ms[i] / (1 - b1 ** t)
            v_hat = vs[i] / (1 - b2 ** t)
            ps[i] = ps[i] - lr * m_hat / (np.sqrt(v_hat) + eps)
    return new_params, AdamState(m=new_m, v=new_v, step=t)


def train(
    X: np.ndarray,
    Y: np.ndarray,
    config: TrainingConfig,
    hidden: tuple[int, ...] = (128, 64),
) -> tuple[NetworkParams, list[float]]:
    """Seeded mini-batch training; history holds per-sample mean loss per epoch.

    Raw (unscaled) X is expected here: scaling per config.input_scaling is
    applied internally so inference paths can share scale_inputs().
    """
    X = scale_inputs(as_float_matrix(X), config.input_scaling)
    Y = as_float_matrix(Y, name="Y")
    if X.shape[0] == 0:
        raise ValueError("training needs at least one sample")
    if X.shape[0] != Y.shape[0]:
        raise ValueError("X and Y row counts differ")
    params = init_network(X.shape[1], Y.shape[1], config.seed, hidden=hidden)
    state = AdamState.zeros_like(params)
    shuffle_rng = np.random.default_rng([config.seed, 1])
    history: list[float] = []
    n = X.shape[0]
    for _ in range(config.epochs):
        order = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            xb, yb = X[batch], Y[batch]
            batch_loss = loss(params, xb, yb)
            if not np.isfinite(batch_loss):
                raise NonFiniteLoss(
                    "training diverged (non-finite loss); try a lower learning_rate"
                )
            grads = gradients(params, xb, yb)
            params, state = adam_step(params, grads, state, config)
            if not params.finite():
                raise NonFiniteLoss("training diverged (non-finite parameters)")
            epoch_loss += batch_loss
        history.append(epoch_loss / n)
    return params, history


def paired_training_set(
    originals: np.ndarray, obfuscated: np.ndarray, targets: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Stack pair members so each contributes a term against the same target."""
    originals = as_float_matrix(originals, "originals")
    obfuscated = as_float_matrix(obfuscated, "obfuscated")
    targets = as_float_matrix(targets, "targets")
    if not (originals.shape[0] == obfuscated.shape[0] == targets.shape[0]):
        raise ValueError("originals, obfuscated and targets must pair up row for row")
    if originals.shape[1] != obfuscated.shape[1]:
        raise ValueError("pair members must share the input dimension")
    X = np.vstack([originals, obfuscated])
    Y = np.vstack([targets, targets])
    return X, Y


class PcvNetwork(BaseEstimator):
    """sklearn-style wrapper: fit(X, Y) trains the classifier, predict(X)
    infers principal-component vectors for raw instruction distributions."""

    def __init__(
        self,
        hidden: tuple[int, ...] = (128, 64),
        learning_rate: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
        epochs: int = 100,
        batch_size: int = 32,
        seed: int = 0,
        input_scaling: str = "none",
    ):
        self.hidden = hidden
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed
        self.input_scaling = input_scaling

    def _config(self) -> TrainingConfig:
        return TrainingConfig(
            learning_rate=self.learning_rate,
            beta1=self.beta1,
            beta2=self.beta2,
            epsilon=self.epsilon,
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=self.seed,
            input_scaling=self.input_scaling,
        )

    def fit(self, X, Y):
        X = as_float_matrix(X)
        Y = as_float_matrix(Y, "Y")
        # condition the regression: standardize inputs (after the configured
        # count scaling) and target components, then undo the target side at
        # predict time. Component variances span three orders of magnitude;
        # without this the summed loss ignores the low-variance components
        # that discriminate near neighbors.
        scaled = scale_inputs(X, self.input_scaling)
        self.input_center_ = scaled.mean(axis=0)
        spread = scaled.std(axis=0)
        self.input_spread_ = np.where(spread > 0, spread, 1.0)
        target_scale = Y.std(axis=0)
        floor = max(float(target_scale.max()) * 1e-6, 1e-12)
        self.target_scale_ = np.where(target_scale > floor, target_scale, floor)
        self.params_, self.loss_history_ = train(
            (scaled - self.input_center_) / self.input_spread_,
            Y / self.target_scale_,
            replace(self._config(), input_scaling="none"),
            hidden=self.hidden,
        )
        self.n_features_in_ = X.shape[1]
        return self

    def _prepare(self, X: np.ndarray) -> np.ndarray:
        scaled = scale_inputs(X, self.input_scaling)
        return (scaled - self.input_center_) / self.input_spread_

    def predict(self, X) -> np.ndarray:
        check_fitted(self, "params_")
        _, out = _forward_batch(self.params_, self._prepare(as_float_matrix(X)))
        return out * self.target_scale_

    def predict_one(self, vec) -> np.ndarray:
        check_fitted(self, "params_")
        prepared = self._prepare(np.asarray(vec, dtype=np.float64)[None, :])
        return forward(self.params_, prepared[0]) * self.target_scale_
