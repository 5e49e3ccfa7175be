"""
Feedforward, simple recurrent and LSTM binary classifiers trained by mini-batch backpropagation.

Recurrent kinds read each record as a sequence of scalars (one per feature, in column
order) and map the final hidden state to a single logit.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import DimensionMismatch, DivergenceDetected, InvalidParameter
from .ingest import as_array
from .rng import generator

logger = logging.getLogger(__name__)

KINDS = ("fnn", "rnn", "lstm")
ACTIVATIONS = ("relu", "tanh", "sigmoid")
OPTIMIZERS = ("sgd", "adam")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class NeuralSpec:
    kind: str = "fnn"
    hidden: tuple = (16, 8)
    activation: str = "relu"
    epochs: int = 200
    batch_size: int = 16
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    seed: int = 42

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameter("kind", self.kind, "one of " + ", ".join(KINDS))
        if self.activation not in ACTIVATIONS:
            raise InvalidParameter("activation", self.activation, "one of " + ", ".join(ACTIVATIONS))
        if self.optimizer not in OPTIMIZERS:
            raise InvalidParameter("optimizer", self.optimizer, "one of " + ", ".join(OPTIMIZERS))
        hidden = (self.hidden,) if isinstance(self.hidden, int) else tuple(int(h) for h in self.hidden)
        object.__setattr__(self, "hidden", hidden)
        if not hidden or any(h < 1 for h in hidden):
            raise InvalidParameter("hidden", self.hidden, "positive layer sizes")
        if self.kind != "fnn" and len(hidden) != 1:
            raise InvalidParameter("hidden", self.hidden, "a single hidden width for rnn/lstm")
        if self.epochs < 0:
            raise InvalidParameter("epochs", self.epochs, "epochs >= 0")
        if self.batch_size < 1:
            raise InvalidParameter("batch_size", self.batch_size, "batch_size >= 1")
        if not self.learning_rate > 0:
            raise InvalidParameter("learning_rate", self.learning_rate, "learning_rate > 0")

    @property
    def width(self):
        return self.hidden[0]

    def to_dict(self):
        return {
            "kind": self.kind,
            "hidden": list(self.hidden),
            "activation": self.activation,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "optimizer": self.optimizer,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(kind=d["kind"], hidden=tuple(d["hidden"]), activation=d["activation"],
                   epochs=int(d["epochs"]), batch_size=int(d["batch_size"]),
                   learning_rate=float(d["learning_rate"]), optimizer=d["optimizer"], seed=int(d["seed"]))


def default_spec(kind, **overrides):
    if kind == "fnn":
        spec = dict(kind="fnn", hidden=(16, 8), activation="relu")
    else:
        spec = dict(kind=kind, hidden=(16,), activation="tanh")
    spec.update(overrides)
    return NeuralSpec(**spec)


@dataclass(frozen=True)
class NeuralModel:
    spec: NeuralSpec
    params: dict
    n_features: int
    final_loss: float
    loss_history: tuple = field(default_factory=tuple)  # index 0 = before the first epoch

    def to_dict(self):
        return {
            "spec": self.spec.to_dict(),
            "tensors": {name: value.tolist() for name, value in self.params.items()},
            "n_features": self.n_features,
            "final_loss": self.final_loss,
            "loss_history": list(self.loss_history),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(spec=NeuralSpec.from_dict(d["spec"]),
                   params={name: np.array(value, dtype=float) for name, value in d["tensors"].items()},
                   n_features=int(d["n_features"]), final_loss=float(d["final_loss"]),
                   loss_history=tuple(d.get("loss_history", ())))


# Activations; derivatives are expressed through the activation output

def _activate(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    return expit(z)


def _derivative(name, a):
    if name == "relu":
        return (a > 0).astype(float)
    if name == "tanh":
        return 1.0 - a ** 2
    return a * (1.0 - a)


# Parameters

def _glorot(rng, fan_in, fan_out, shape):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(spec, n_features, rng=None):
    """Glorot-uniform weights, zero biases; LSTM forget-gate bias 1.0."""
    rng = rng if rng is not None else generator(spec.seed, 0)
    params = {}
    if spec.kind == "fnn":
        sizes = (n_features,) + spec.hidden + (1,)
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            params[f"W{i}"] = _glorot(rng, fan_in, fan_out, (fan_in, fan_out))
            params[f"b{i}"] = np.zeros(fan_out)
        return params

    h = spec.width
    gates = 4 if spec.kind == "lstm" else 1
    params["Wx"] = _glorot(rng, 1, gates * h, (gates * h,))
    params["Wh"] = _glorot(rng, h, gates * h, (h, gates * h))
    params["b"] = np.zeros(gates * h)
    if spec.kind == "lstm":
        params["b"][h:2 * h] = 1.0
    params["Wo"] = _glorot(rng, h, 1, (h,))
    params["bo"] = np.zeros(1)
    return params


def param_count(spec, n_features):
    if spec.kind == "fnn":
        sizes = (n_features,) + spec.hidden + (1,)
        return sum((a + 1) * b for a, b in zip(sizes[:-1], sizes[1:]))
    h = spec.width
    head = h + 1
    if spec.kind == "lstm":
        return 4 * (h * (h + 1) + h) + head
    return h * (h + 1) + h + head


# Forward passes return (logits, cache)

def _forward_fnn(params, spec, X):
    n_layers = len(spec.hidden) + 1
    activations = [X]
    a = X
    for i in range(n_layers - 1):
        a = _activate(spec.activation, a @ params[f"W{i}"] + params[f"b{i}"])
        activations.append(a)
    last = n_layers - 1
    logits = (a @ params[f"W{last}"] + params[f"b{last}"]).ravel()
    return logits, {"activations": activations}


def _forward_rnn(params, spec, X):
    n, steps = X.shape
    h = np.zeros((n, spec.width))
    states = [h]
    for t in range(steps):
        h = _activate(spec.activation, X[:, t:t + 1] * params["Wx"] + h @ params["Wh"] + params["b"])
        states.append(h)
    logits = h @ params["Wo"] + params["bo"][0]
    return logits, {"states": states}


def _forward_lstm(params, spec, X):
    n, steps = X.shape
    width = spec.width
    h = np.zeros((n, width))
    c = np.zeros((n, width))
    states, cells, gates = [h], [c], []
    for t in range(steps):
        z = X[:, t:t + 1] * params["Wx"] + h @ params["Wh"] + params["b"]
        i = expit(z[:, :width])
        f = expit(z[:, width:2 * width])
        g = _activate(spec.activation, z[:, 2 * width:3 * width])
        o = expit(z[:, 3 * width:])
        c = f * c + i * g
        h = o * _activate(spec.activation, c)
        gates.append((i, f, g, o))
        states.append(h)
        cells.append(c)
    logits = h @ params["Wo"] + params["bo"][0]
    return logits, {"states": states, "cells": cells, "gates": gates}


_FORWARD = {"fnn": _forward_fnn, "rnn": _forward_rnn, "lstm": _forward_lstm}


def bce_loss(logits, y):
    """Mean binary cross-entropy on logits."""
    return float(np.mean(np.logaddexp(0.0, logits) - y * logits))


# Backward passes take dL/dlogits

def _backward_fnn(params, spec, cache, dlogits):
    activations = cache["activations"]
    n_layers = len(spec.hidden) + 1
    grads = {}
    delta = dlogits[:, None]
    for i in reversed(range(n_layers)):
        a_in = activations[i]
        grads[f"W{i}"] = a_in.T @ delta
        grads[f"b{i}"] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params[f"W{i}"].T) * _derivative(spec.activation, a_in)
    return grads


def _backward_rnn(params, spec, X, cache, dlogits):
    states = cache["states"]
    grads = {name: np.zeros_like(value) for name, value in params.items()}
    grads["Wo"] = states[-1].T @ dlogits
    grads["bo"] = np.array([dlogits.sum()])
    dh = np.outer(dlogits, params["Wo"])
    for t in reversed(range(X.shape[1])):
        dz = dh * _derivative(spec.activation, states[t + 1])
        grads["Wx"] += X[:, t] @ dz
        grads["Wh"] += states[t].T @ dz
        grads["b"] += dz.sum(axis=0)
        dh = dz @ params["Wh"].T
    return grads


def _backward_lstm(params, spec, X, cache, dlogits):
    states, cells, gates = cache["states"], cache["cells"], cache["gates"]
    grads = {name: np.zeros_like(value) for name, value in params.items()}
    grads["Wo"] = states[-1].T @ dlogits
    grads["bo"] = np.array([dlogits.sum()])
    dh = np.outer(dlogits, params["Wo"])
    dc = np.zeros_like(dh)
    for t in reversed(range(X.shape[1])):
        i, f, g, o = gates[t]
        squashed = _activate(spec.activation, cells[t + 1])
        dc = dc + dh * o * _derivative(spec.activation, squashed)
        dz = np.concatenate([
            dc * g * i * (1.0 - i),
            dc * cells[t] * f * (1.0 - f),
            dc * i * _derivative(spec.activation, g),
            dh * squashed * o * (1.0 - o),
        ], axis=1)
        grads["Wx"] += X[:, t] @ dz
        grads["Wh"] += states[t].T @ dz
        grads["b"] += dz.sum(axis=0)
        dh = dz @ params["Wh"].T
        dc = dc * f
    return grads


def loss_and_gradients(params, spec, X, y):
    """Mean BCE and its analytic gradient for every parameter tensor."""
    X = as_array(X)
    y = np.asarray(y, dtype=float)
    logits, cache = _FORWARD[spec.kind](params, spec, X)
    dlogits = (expit(logits) - y) / len(y)
    if spec.kind == "fnn":
        grads = _backward_fnn(params, spec, cache, dlogits)
    elif spec.kind == "rnn":
        grads = _backward_rnn(params, spec, X, cache, dlogits)
    else:
        grads = _backward_lstm(params, spec, X, cache, dlogits)
    return bce_loss(logits, y), grads


def gradient_check(spec, X_small, y_small, h=1e-5, params=None):
    """Max relative error between analytic gradients and central differences over every parameter."""
    X = as_array(X_small)
    y = np.asarray(y_small, dtype=float)
    if len(X) > 10:
        raise InvalidParameter("X_small", f"{len(X)} rows", "at most 10 rows")
    params = {k: v.copy() for k, v in (params or init_params(spec, X.shape[1])).items()}
    _, analytic = loss_and_gradients(params, spec, X, y)

    worst = 0.0
    for name, tensor in params.items():
        flat = tensor.reshape(-1)
        grad = analytic[name].reshape(-1)
        for j in range(flat.size):
            original = flat[j]
            flat[j] = original + h
            upper = bce_loss(_FORWARD[spec.kind](params, spec, X)[0], y)
            flat[j] = original - h
            lower = bce_loss(_FORWARD[spec.kind](params, spec, X)[0], y)
            flat[j] = original
            numeric = (upper - lower) / (2.0 * h)
            error = abs(numeric - grad[j]) / max(abs(numeric) + abs(grad[j]), 1e-4)
            worst = max(worst, error)
    return worst


# Optimizers

class _Adam:
    def __init__(self, params, learning_rate):
        self.learning_rate = learning_rate
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        correction1 = 1.0 - ADAM_BETA1 ** self.t
        correction2 = 1.0 - ADAM_BETA2 ** self.t
        for name in params:
            self.m[name] = ADAM_BETA1 * self.m[name] + (1.0 - ADAM_BETA1) * grads[name]
            self.v[name] = ADAM_BETA2 * self.v[name] + (1.0 - ADAM_BETA2) * grads[name] ** 2
            m_hat = self.m[name] / correction1
            v_hat = self.v[name] / correction2
            params[name] -= self.learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


class _Sgd:
    def __init__(self, params, learning_rate):
        self.learning_rate = learning_rate

    def step(self, params, grads):
        for name in params:
            params[name] -= self.learning_rate * grads[name]


def batch_schedule(spec, n):
    """Per-epoch row permutations, from their own seed stream so init and shuffling are independent."""
    rng = generator(spec.seed, 1)
    for _ in range(spec.epochs):
        yield rng.permutation(n)


def train_neural(X, y, spec=None):
    spec = spec or default_spec("fnn")
    X = as_array(X)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    params = init_params(spec, d)
    optimizer = (_Adam if spec.optimizer == "adam" else _Sgd)(params, spec.learning_rate)

    history = [bce_loss(_FORWARD[spec.kind](params, spec, X)[0], y)]
    for epoch, order in enumerate(batch_schedule(spec, n), start=1):
        for start in range(0, n, spec.batch_size):
            rows = order[start:start + spec.batch_size]
            _, grads = loss_and_gradients(params, spec, X[rows], y[rows])
            optimizer.step(params, grads)
        loss = bce_loss(_FORWARD[spec.kind](params, spec, X)[0], y)
        if not np.isfinite(loss) or not all(np.all(np.isfinite(v)) for v in params.values()):
            raise DivergenceDetected(epoch, loss)
        history.append(loss)
        if epoch % 50 == 0:
            logger.debug("%s epoch %d: loss %.6f", spec.kind, epoch, loss)

    return NeuralModel(spec=spec, params=params, n_features=d, final_loss=history[-1],
                       loss_history=tuple(history))


def forward_trace(m, X):
    """Forward-pass intermediates (activations, hidden states, LSTM gates) for inspection."""
    X = _checked(m, X)
    return _FORWARD[m.spec.kind](m.params, m.spec, X)[1]


def _checked(m, X):
    X = as_array(X)
    if X.shape[1] != m.n_features:
        raise DimensionMismatch(m.n_features, X.shape[1])
    return X


def predict_neural(m, X):
    X = _checked(m, X)
    logits, _ = _FORWARD[m.spec.kind](m.params, m.spec, X)
    probabilities = expit(logits)
    return probabilities, (probabilities >= 0.5).astype(int)
