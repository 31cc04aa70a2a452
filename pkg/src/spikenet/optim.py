"""First-order optimizers: SGD, RMSProp, ADAM, NADAM.

All methods share one state container holding per-parameter moment
buffers keyed by transition index.  Delays use a separate learning-rate
multiplier (their units are milliseconds, not weight units) and are
clamped to stay nonnegative after every step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .backprop import Gradients
from .errors import NumericError, ParameterError, ShapeError
from .topology import Network

_METHODS = ("sgd", "rmsprop", "adam", "nadam")


@dataclass
class OptimizerState:
    """Method tag, hyperparameters, step counter and moment buffers.

    Buffers are allocated lazily on the first step so a fresh state can
    be built before the network exists.  ``delay_lr_scale`` multiplies
    the learning rate for delay updates.
    """

    method: str = "adam"
    learning_rate: float = 0.001
    delay_lr_scale: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    gamma: float = 0.9
    eps_stab: float = 1e-8
    step_count: int = 0
    moment1: dict = field(default_factory=dict)
    moment2: dict = field(default_factory=dict)

    def __post_init__(self):
        self.method = self.method.lower()
        if self.method not in _METHODS:
            raise ParameterError(
                f"unknown optimizer '{self.method}', expected one of {_METHODS}"
            )
        if self.learning_rate < 0:
            raise ParameterError("learning rate must be nonnegative")
        if self.delay_lr_scale < 0:
            raise ParameterError("delay learning-rate scale must be nonnegative")

    @classmethod
    def sgd(cls, learning_rate: float = 0.01, **kw) -> "OptimizerState":
        return cls(method="sgd", learning_rate=learning_rate, **kw)

    @classmethod
    def rmsprop(cls, learning_rate: float = 0.001, gamma: float = 0.9, **kw) -> "OptimizerState":
        return cls(method="rmsprop", learning_rate=learning_rate, gamma=gamma, **kw)

    @classmethod
    def adam(cls, learning_rate: float = 0.001, **kw) -> "OptimizerState":
        return cls(method="adam", learning_rate=learning_rate, **kw)

    @classmethod
    def nadam(cls, learning_rate: float = 0.001, **kw) -> "OptimizerState":
        return cls(method="nadam", learning_rate=learning_rate, **kw)


def _buffer(store: dict, key: str, like: np.ndarray) -> np.ndarray:
    if key not in store:
        store[key] = np.zeros_like(like)
    elif store[key].shape != like.shape:
        raise ShapeError(f"optimizer buffer '{key}' shape {store[key].shape} != {like.shape}")
    return store[key]


def _update(state: OptimizerState, key: str, param: np.ndarray, grad: np.ndarray, lr: float):
    """Apply one in-place update of the configured method to ``param``."""
    if state.method == "sgd":
        param -= lr * grad
        return
    if state.method == "rmsprop":
        v = _buffer(state.moment2, key, param)
        v *= state.gamma
        v += (1.0 - state.gamma) * grad * grad
        param -= lr * grad / (np.sqrt(v) + state.eps_stab)
        return
    # adam and nadam share the moment recursions
    m = _buffer(state.moment1, key, param)
    v = _buffer(state.moment2, key, param)
    t = state.step_count
    m *= state.beta1
    m += (1.0 - state.beta1) * grad
    v *= state.beta2
    v += (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    if state.method == "nadam":
        # Nesterov look-ahead on the first moment
        m_hat = state.beta1 * m_hat + (1.0 - state.beta1) * grad / (1.0 - state.beta1**t)
    param -= lr * m_hat / (np.sqrt(v_hat) + state.eps_stab)


def step(state: OptimizerState, net: Network, grads: Gradients) -> None:
    """Advance parameters one optimizer step in place; clamps delays >= 0."""
    if len(grads.delays) != net.n_transitions:
        raise ShapeError(
            f"gradients cover {len(grads.delays)} transitions, network has "
            f"{net.n_transitions}"
        )
    state.step_count += 1
    delay_lr = state.learning_rate * state.delay_lr_scale
    for t, params in enumerate(net.params):
        if params.weights is not None:
            if grads.weights[t] is None or grads.weights[t].shape != params.weights.shape:
                raise ShapeError(f"weight gradient shape mismatch in transition {t}")
            _update(state, f"w{t}", params.weights, grads.weights[t], state.learning_rate)
        if grads.delays[t].shape != params.delays.shape:
            raise ShapeError(f"delay gradient shape mismatch in transition {t}")
        _update(state, f"d{t}", params.delays, grads.delays[t], delay_lr)
    clamp_delays(net)
    for t, params in enumerate(net.params):
        if params.weights is not None and not np.all(np.isfinite(params.weights)):
            raise NumericError(f"non-finite weights after update in transition {t}")
        if not np.all(np.isfinite(params.delays)):
            raise NumericError(f"non-finite delays after update in transition {t}")


def clamp_delays(net: Network) -> Network:
    """Force every axonal delay to be nonnegative, in place."""
    for params in net.params:
        np.maximum(params.delays, 0.0, out=params.delays)
    return net
