"""One-hidden-layer feedforward network trained by backpropagation.

Architecture ``5 -> H -> 1``: tanh hidden units, logistic output. Training
minimises the mean squared error with full-batch gradient descent and keeps
the weights from the epoch with the lowest validation error.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..features import FeatureVector, N_FEATURES, ScalerParams, fit_scaler

HIDDEN_SIZES = (5, 10, 20)


@dataclass(frozen=True)
class NetHyper:
    learning_rate: float = 0.1
    epochs: int = 2000

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning rate must be positive, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be positive, got {self.epochs}")


@dataclass(frozen=True)
class NeuralNetModel:
    w1: np.ndarray  # (H, 5)
    b1: np.ndarray  # (H,)
    w2: np.ndarray  # (1, H)
    b2: np.ndarray  # (1,)
    scaler: ScalerParams
    meta: dict = field(default_factory=dict, compare=False)

    kind = "net"

    def __post_init__(self):
        h = self.w1.shape[0]
        if self.w1.shape != (h, N_FEATURES) or self.b1.shape != (h,) \
                or self.w2.shape != (1, h) or self.b2.shape != (1,):
            raise ValueError("inconsistent layer dimensions")
        for a in (self.w1, self.b1, self.w2, self.b2):
            a.setflags(write=False)

    @property
    def hidden(self) -> int:
        return self.w1.shape[0]

    def forward_scaled(self, Z):
        h = np.tanh(Z @ self.w1.T + self.b1)
        out = _logistic(h @ self.w2.T + self.b2)
        return h, out[:, 0]

    def score(self, X) -> np.ndarray:
        Z = self.scaler.apply(X)
        return self.forward_scaled(Z)[1]


def _logistic(z):
    # split by sign so large |z| neither overflows nor loses the tail
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def net_init(hidden: int, scaler: ScalerParams, seed: int) -> NeuralNetModel:
    """Uniform weights in [-0.5, 0.5]; drawn in the order w1, b1, w2, b2."""
    rng = np.random.default_rng(seed)
    w1 = rng.uniform(-0.5, 0.5, (hidden, N_FEATURES))
    b1 = rng.uniform(-0.5, 0.5, hidden)
    w2 = rng.uniform(-0.5, 0.5, (1, hidden))
    b2 = rng.uniform(-0.5, 0.5, 1)
    return NeuralNetModel(w1, b1, w2, b2, scaler, {"seed": seed})


def net_forward(model: NeuralNetModel, x) -> float:
    if isinstance(x, FeatureVector):
        x = x.as_array()
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != N_FEATURES:
        raise ValueError(f"expected {N_FEATURES} inputs, got {x.shape[-1]}")
    return float(model.score(x.reshape(1, N_FEATURES))[0])


@dataclass
class Gradient:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    loss: float

    def max_abs(self) -> float:
        return max(float(np.abs(g).max()) for g in (self.w1, self.b1, self.w2, self.b2))


def mse(model: NeuralNetModel, Z, y) -> float:
    _, out = model.forward_scaled(Z)
    return float(np.mean((out - y) ** 2))


def _backprop(w1, b1, w2, b2, Z, y):
    h = np.tanh(Z @ w1.T + b1)
    out = _logistic(h @ w2.T + b2)[:, 0]
    err = out - y
    n = y.size
    d_out = (2.0 / n) * err * out * (1.0 - out)  # dL/dz2, shape (n,)
    g_w2 = d_out @ h
    g_b2 = d_out.sum()
    d_hidden = np.outer(d_out, w2[0]) * (1.0 - h * h)  # dL/dz1, shape (n, H)
    g_w1 = d_hidden.T @ Z
    g_b1 = d_hidden.sum(axis=0)
    return g_w1, g_b1, g_w2.reshape(1, -1), np.array([g_b2]), float(np.mean(err * err))


def net_gradient(model: NeuralNetModel, Z, y) -> Gradient:
    """Analytic MSE gradient for a batch of *scaled* inputs ``Z`` and targets ``y``."""
    Z = np.asarray(Z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y.size == 0:
        raise ValueError("net_gradient needs a non-empty batch")
    if Z.ndim != 2 or Z.shape != (y.size, N_FEATURES):
        raise ValueError(f"batch must be (n, {N_FEATURES}) with n targets")
    return Gradient(*_backprop(model.w1, model.b1, model.w2, model.b2, Z, y))


def net_fit(X_train, y_train, X_cv, y_cv, hidden: int = 10, hyper: NetHyper = NetHyper(),
            seed: int = 42, scaler: ScalerParams | None = None) -> NeuralNetModel:
    """Full-batch gradient descent with a best-validation snapshot."""
    X_train = np.asarray(X_train, dtype=np.float64)
    X_cv = np.asarray(X_cv, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.float64)
    y_cv = np.asarray(y_cv, dtype=np.float64)
    if y_train.size == 0 or y_cv.size == 0:
        raise ValueError("net_fit needs non-empty training and validation sets")
    if hidden < 1:
        raise ValueError("hidden layer needs at least one unit")
    if scaler is None:
        scaler = fit_scaler(X_train)
    Z = scaler.apply(X_train)
    Zc = scaler.apply(X_cv)
    init = net_init(hidden, scaler, seed)
    w1, b1, w2, b2 = (np.array(a) for a in (init.w1, init.b1, init.w2, init.b2))
    lr = hyper.learning_rate

    best = None
    best_err = np.inf
    best_epoch = 0
    cv_err = np.inf
    for epoch in range(1, hyper.epochs + 1):
        g_w1, g_b1, g_w2, g_b2, _ = _backprop(w1, b1, w2, b2, Z, y_train)
        w1 -= lr * g_w1
        b1 -= lr * g_b1
        w2 -= lr * g_w2
        b2 -= lr * g_b2
        h = np.tanh(Zc @ w1.T + b1)
        cv_out = _logistic(h @ w2.T + b2)[:, 0]
        cv_err = float(np.mean((cv_out - y_cv) ** 2))
        if cv_err < best_err:
            best_err = cv_err
            best_epoch = epoch
            best = (w1.copy(), b1.copy(), w2.copy(), b2.copy())
    if best is None:  # validation error was NaN throughout
        best = (w1.copy(), b1.copy(), w2.copy(), b2.copy())
        best_err = cv_err
    meta = {
        "seed": seed,
        "epochs_run": hyper.epochs,
        "best_epoch": best_epoch,
        "best_cv_error": best_err,
        "final_cv_error": cv_err,
        "learning_rate": lr,
    }
    return NeuralNetModel(*best, scaler, meta)


def with_weights(model: NeuralNetModel, w1, b1, w2, b2) -> NeuralNetModel:
    return replace(model, w1=np.array(w1, dtype=np.float64), b1=np.array(b1, dtype=np.float64),
                   w2=np.array(w2, dtype=np.float64), b2=np.array(b2, dtype=np.float64))
