"""Feedforward and LSTM networks with Adam, written against numpy only.

Covers both classifier branches: the deep-narrow perceptron stack over PCA
features and the recurrent baseline over precomputed note embeddings.  The
trainer implements the full callback set: plateau-triggered learning-rate
reduction with a hard floor, early stopping with best-epoch restore, a hard
epoch cap, and a pre-training reinitialization guard that rejects initial
weights already scoring suspiciously well on the training set (a symptom of
majority-class memorization).

Training is single-threaded and fully seeded; a fixed seed reproduces runs
bit-for-bit on one platform.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import ConfigError, ConvergenceError, DataError
from .metrics import micro_f1

log = logging.getLogger(__name__)

MLP_HIDDEN_DEFAULT = (32, 16, 8, 4, 2, 1)
LSTM_HIDDEN_DEFAULT = (64,)
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class NetSpec:
    input_dim: int
    hidden_layers: tuple[int, ...]
    output_classes: int
    cell: str = "dense"  # "dense" | "lstm"
    dropout_rate: float = 0.0
    activation: str = "relu"  # hidden activation (dense cell only)

    def __post_init__(self):
        self.hidden_layers = tuple(int(h) for h in self.hidden_layers)
        if self.input_dim < 1 or self.output_classes < 1:
            raise ConfigError("input_dim and output_classes must be >= 1")
        if any(h < 1 for h in self.hidden_layers):
            raise ConfigError("all hidden layer sizes must be >= 1")
        if not (0.0 <= self.dropout_rate < 1.0):
            raise ConfigError("dropout_rate must be in [0, 1)")
        if self.cell not in ("dense", "lstm"):
            raise ConfigError(f"unknown cell type {self.cell!r}")
        if self.activation not in ("relu", "tanh"):
            raise ConfigError(f"unknown activation {self.activation!r}")


@dataclass
class TrainerConfig:
    learning_rate: float = 0.001
    lr_floor: float = 0.00005
    lr_reduce_factor: float = 0.5
    lr_patience: int = 10
    early_stop_patience: int = 25
    min_delta: float = 1e-4
    max_epochs: int = 500
    restart_f1_threshold: float = 0.6
    max_restarts: int = 5
    class_weights: np.ndarray | None = None
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.lr_floor > self.learning_rate:
            raise ConfigError("lr_floor must not exceed the initial learning rate")
        if not (0.0 < self.lr_reduce_factor < 1.0):
            raise ConfigError("lr_reduce_factor must be in (0, 1)")
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")


def _glorot(rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
    fan_out, fan_in = shape
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=shape)


class NeuralNet:
    """Parameters plus the layer spec; the trainer attaches a history dict."""

    def __init__(self, spec: NetSpec, seed: int = 0):
        self.spec = spec
        self.params: dict[str, np.ndarray] = {}
        self.history: dict = {}
        self.initialize(np.random.default_rng(seed))

    def initialize(self, rng: np.random.Generator) -> None:
        """(Re-)draw Glorot-uniform weights and zero biases."""
        spec = self.spec
        self.params = {}
        if spec.cell == "dense":
            sizes = [spec.input_dim, *spec.hidden_layers, spec.output_classes]
            for l in range(len(sizes) - 1):
                self.params[f"W{l}"] = _glorot(rng, (sizes[l + 1], sizes[l]))
                self.params[f"b{l}"] = np.zeros(sizes[l + 1])
        else:
            in_dim = spec.input_dim
            for l, h in enumerate(spec.hidden_layers):
                self.params[f"Wx{l}"] = _glorot(rng, (4 * h, in_dim))
                self.params[f"Wh{l}"] = _glorot(rng, (4 * h, h))
                self.params[f"b{l}"] = np.zeros(4 * h)
                in_dim = h
            self.params["W_out"] = _glorot(rng, (spec.output_classes, in_dim))
            self.params["b_out"] = np.zeros(spec.output_classes)

    def clone_params(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params.items()}

    def load_params(self, params: dict[str, np.ndarray]) -> None:
        self.params = {k: v.copy() for k, v in params.items()}

    # -- inference ---------------------------------------------------------

    def predict_proba(self, inputs) -> np.ndarray:
        if self.spec.cell == "dense":
            X = np.asarray(inputs, dtype=np.float64)
            probs, _ = _dense_forward(self, X, train_mode=False, rng=None)
            return probs
        return np.array(
            [_lstm_forward(self, seq, train_mode=False, rng=None)[0] for seq in inputs]
        )

    def predict(self, inputs) -> np.ndarray:
        return np.argmax(self.predict_proba(inputs), axis=1)


def forward(net: NeuralNet, x, train_mode: bool = False, rng=None) -> np.ndarray:
    """Class probabilities for one input (vector for dense, sequence for lstm).

    Dropout only fires in train_mode, with inverted scaling, so inference
    needs no rescaling.
    """
    if train_mode and net.spec.dropout_rate > 0.0 and rng is None:
        raise ConfigError("train_mode forward with dropout needs an rng")
    if net.spec.cell == "dense":
        X = np.asarray(x, dtype=np.float64).reshape(1, -1)
        probs, _ = _dense_forward(net, X, train_mode, rng)
        return probs[0]
    seq = np.asarray(x, dtype=np.float64)
    if seq.ndim != 2:
        raise DataError("lstm input must be a (T, dim) sequence of vectors")
    probs, _ = _lstm_forward(net, seq, train_mode, rng)
    return probs


def backward(net: NeuralNet, x, target_one_hot, class_weight: float = 1.0):
    """Gradients of the weighted cross-entropy for one example.

    Returns (loss, grads).  The loss contribution is
    class_weight * (-log p[target]); log-probabilities are computed via
    log-sum-exp so confident mistakes cannot underflow to NaN.
    """
    target = int(np.argmax(np.asarray(target_one_hot)))
    if net.spec.cell == "dense":
        X = np.asarray(x, dtype=np.float64).reshape(1, -1)
        return _dense_loss_and_grads(
            net, X, np.array([target]), np.array([class_weight]), False, None
        )
    seq = np.asarray(x, dtype=np.float64)
    return _lstm_loss_and_grads(
        net, [seq], np.array([target]), np.array([class_weight]), False, None
    )


def compute_class_weights(labels, n_classes: int | None = None) -> np.ndarray:
    """Balanced per-class loss multipliers: N / (n_classes * count_c)."""
    y = np.asarray(labels, dtype=np.int64)
    if n_classes is None:
        n_classes = int(y.max()) + 1 if len(y) else 0
    counts = np.bincount(y, minlength=n_classes)
    if np.any(counts == 0):
        empty = np.flatnonzero(counts == 0).tolist()
        raise DataError(f"cannot weight classes with no examples: {empty}")
    return len(y) / (n_classes * counts.astype(np.float64))


# ---------------------------------------------------------------------------
# Dense forward/backward (vectorized over the batch)


def _activation(z: np.ndarray, kind: str) -> np.ndarray:
    return np.maximum(z, 0.0) if kind == "relu" else np.tanh(z)


def _activation_grad(z: np.ndarray, h: np.ndarray, kind: str) -> np.ndarray:
    return (z > 0.0).astype(np.float64) if kind == "relu" else 1.0 - h * h


def _softmax_logp(logits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    shifted = logits - logits.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logz
    return np.exp(logp), logp


def _check_finite(arr: np.ndarray, layer: int) -> None:
    if not np.all(np.isfinite(arr)):
        raise ConvergenceError(f"non-finite activation at layer {layer}")


def _dropout_mask(rng, shape, rate: float) -> np.ndarray:
    keep = 1.0 - rate
    return (rng.random(shape) < keep).astype(np.float64) / keep


def _dense_forward(net: NeuralNet, X: np.ndarray, train_mode: bool, rng):
    spec = net.spec
    if X.shape[1] != spec.input_dim:
        raise DataError(f"input has {X.shape[1]} features, spec wants {spec.input_dim}")
    cache = []
    a = X
    n_hidden = len(spec.hidden_layers)
    for l in range(n_hidden):
        z = a @ net.params[f"W{l}"].T + net.params[f"b{l}"]
        h = _activation(z, spec.activation)
        _check_finite(h, l)
        mask = None
        out = h
        if train_mode and spec.dropout_rate > 0.0:
            mask = _dropout_mask(rng, h.shape, spec.dropout_rate)
            out = h * mask
        cache.append({"a_in": a, "z": z, "h": h, "mask": mask})
        a = out
    logits = a @ net.params[f"W{n_hidden}"].T + net.params[f"b{n_hidden}"]
    _check_finite(logits, n_hidden)
    probs, logp = _softmax_logp(logits)
    return probs, {"layers": cache, "a_last": a, "probs": probs, "logp": logp}


def _dense_loss_and_grads(net, X, y, sample_weights, train_mode, rng):
    spec = net.spec
    B = X.shape[0]
    probs, cache = _dense_forward(net, X, train_mode, rng)
    logp = cache["logp"]
    losses = -logp[np.arange(B), y] * sample_weights
    loss = float(losses.mean())

    grads = {k: np.zeros_like(v) for k, v in net.params.items()}
    dlogits = probs.copy()
    dlogits[np.arange(B), y] -= 1.0
    dlogits *= (sample_weights / B)[:, None]
    n_hidden = len(spec.hidden_layers)
    grads[f"W{n_hidden}"] = dlogits.T @ cache["a_last"]
    grads[f"b{n_hidden}"] = dlogits.sum(axis=0)
    da = dlogits @ net.params[f"W{n_hidden}"]
    for l in range(n_hidden - 1, -1, -1):
        layer = cache["layers"][l]
        if layer["mask"] is not None:
            da = da * layer["mask"]
        dz = da * _activation_grad(layer["z"], layer["h"], spec.activation)
        grads[f"W{l}"] = dz.T @ layer["a_in"]
        grads[f"b{l}"] = dz.sum(axis=0)
        da = dz @ net.params[f"W{l}"]
    return loss, grads


# ---------------------------------------------------------------------------
# LSTM forward/backward (per example; gates ordered input, forget,
# candidate, output inside the stacked 4H parameter blocks)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def lstm_cell_step(Wx, Wh, b, x_t, h_prev, c_prev):
    """One cell update; returns (h, c, gates) with gates = (i, f, g, o)."""
    H = Wh.shape[1]
    z = Wx @ x_t + Wh @ h_prev + b
    i = _sigmoid(z[0:H])
    f = _sigmoid(z[H : 2 * H])
    g = np.tanh(z[2 * H : 3 * H])
    o = _sigmoid(z[3 * H : 4 * H])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return h, c, (i, f, g, o)


def _lstm_forward(net: NeuralNet, seq: np.ndarray, train_mode: bool, rng):
    spec = net.spec
    if seq.ndim != 2 or seq.shape[1] != spec.input_dim:
        raise DataError(
            f"lstm input must be (T, {spec.input_dim}); got {seq.shape}"
        )
    layers_cache = []
    inputs = seq
    for l, H in enumerate(spec.hidden_layers):
        Wx, Wh, b = net.params[f"Wx{l}"], net.params[f"Wh{l}"], net.params[f"b{l}"]
        T = inputs.shape[0]
        h = np.zeros(H)
        c = np.zeros(H)
        steps = []
        outs = np.empty((T, H))
        for t in range(T):
            h_prev, c_prev = h, c
            h, c, (i, f, g, o) = lstm_cell_step(Wx, Wh, b, inputs[t], h_prev, c_prev)
            steps.append(
                {"x": inputs[t], "h_prev": h_prev, "c_prev": c_prev,
                 "i": i, "f": f, "g": g, "o": o, "c": c, "tc": np.tanh(c)}
            )
            outs[t] = h
        _check_finite(outs, l)
        mask = None
        dropped = outs
        if train_mode and spec.dropout_rate > 0.0:
            mask = _dropout_mask(rng, outs.shape, spec.dropout_rate)
            dropped = outs * mask
        layers_cache.append({"steps": steps, "mask": mask, "out": dropped})
        inputs = dropped
    final = inputs[-1]
    logits = net.params["W_out"] @ final + net.params["b_out"]
    _check_finite(logits, len(spec.hidden_layers))
    probs, logp = _softmax_logp(logits.reshape(1, -1))
    return probs[0], {"layers": layers_cache, "final": final, "logp": logp[0]}


def _lstm_backward_one(net, cache, dlogits):
    spec = net.spec
    grads = {}
    grads["W_out"] = np.outer(dlogits, cache["final"])
    grads["b_out"] = dlogits.copy()
    n_layers = len(spec.hidden_layers)
    T = len(cache["layers"][0]["steps"])
    # gradient wrt each layer's (post-dropout) output sequence
    dout = np.zeros((T, spec.hidden_layers[-1]))
    dout[-1] = net.params["W_out"].T @ dlogits
    for l in range(n_layers - 1, -1, -1):
        layer = cache["layers"][l]
        Wx, Wh = net.params[f"Wx{l}"], net.params[f"Wh{l}"]
        H = spec.hidden_layers[l]
        if layer["mask"] is not None:
            dout = dout * layer["mask"]
        dWx = np.zeros_like(Wx)
        dWh = np.zeros_like(Wh)
        db = np.zeros(4 * H)
        in_dim = Wx.shape[1]
        dx_seq = np.zeros((T, in_dim))
        dh_carry = np.zeros(H)
        dc_carry = np.zeros(H)
        for t in range(T - 1, -1, -1):
            s = layer["steps"][t]
            dh = dout[t] + dh_carry
            i, f, g, o, tc = s["i"], s["f"], s["g"], s["o"], s["tc"]
            do = dh * tc
            dc = dc_carry + dh * o * (1.0 - tc * tc)
            di = dc * g
            dg = dc * i
            df = dc * s["c_prev"]
            dc_carry = dc * f
            dz = np.concatenate(
                [di * i * (1.0 - i), df * f * (1.0 - f),
                 dg * (1.0 - g * g), do * o * (1.0 - o)]
            )
            dWx += np.outer(dz, s["x"])
            dWh += np.outer(dz, s["h_prev"])
            db += dz
            dx_seq[t] = Wx.T @ dz
            dh_carry = Wh.T @ dz
        grads[f"Wx{l}"] = dWx
        grads[f"Wh{l}"] = dWh
        grads[f"b{l}"] = db
        dout = dx_seq
    return grads


def _lstm_loss_and_grads(net, seqs, y, sample_weights, train_mode, rng):
    B = len(seqs)
    total_loss = 0.0
    grads = {k: np.zeros_like(v) for k, v in net.params.items()}
    for b in range(B):
        probs, cache = _lstm_forward(net, np.asarray(seqs[b], dtype=np.float64),
                                     train_mode, rng)
        logp = cache["logp"]
        total_loss += -float(logp[y[b]]) * sample_weights[b]
        dlogits = probs.copy()
        dlogits[y[b]] -= 1.0
        dlogits *= sample_weights[b] / B
        for k, g in _lstm_backward_one(net, cache, dlogits).items():
            grads[k] += g
    return total_loss / B, grads


# ---------------------------------------------------------------------------
# Adam + trainer


class Adam:
    def __init__(self, params: dict[str, np.ndarray]):
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
             lr: float) -> None:
        self.t += 1
        b1_corr = 1.0 - ADAM_BETA1 ** self.t
        b2_corr = 1.0 - ADAM_BETA2 ** self.t
        for k in params:
            g = grads[k]
            self.m[k] = ADAM_BETA1 * self.m[k] + (1.0 - ADAM_BETA1) * g
            self.v[k] = ADAM_BETA2 * self.v[k] + (1.0 - ADAM_BETA2) * (g * g)
            m_hat = self.m[k] / b1_corr
            v_hat = self.v[k] / b2_corr
            params[k] -= lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


def _loss_and_grads(net, inputs, y, sample_weights, train_mode, rng):
    if net.spec.cell == "dense":
        return _dense_loss_and_grads(
            net, np.asarray(inputs, dtype=np.float64), y, sample_weights,
            train_mode, rng,
        )
    return _lstm_loss_and_grads(net, inputs, y, sample_weights, train_mode, rng)


def _mean_ce_loss(net, inputs, y) -> float:
    """Unweighted mean cross-entropy in eval mode (the monitored quantity)."""
    if net.spec.cell == "dense":
        _, cache = _dense_forward(net, np.asarray(inputs, dtype=np.float64), False, None)
        logp = cache["logp"]
        return float((-logp[np.arange(len(y)), y]).mean())
    total = 0.0
    for seq, target in zip(inputs, y):
        _, cache = _lstm_forward(net, np.asarray(seq, dtype=np.float64), False, None)
        total += -float(cache["logp"][target])
    return total / len(y)


def _take(inputs, idx):
    if isinstance(inputs, np.ndarray):
        return inputs[idx]
    return [inputs[i] for i in idx]


def train(net: NeuralNet, train_set, valid_set=None,
          config: TrainerConfig | None = None) -> dict:
    """Fit the net in place; returns (and attaches) the training history.

    ``train_set``/``valid_set`` are (inputs, labels) pairs: a (N, dim) matrix
    for dense nets, a list of (T, dim) sequences for lstm nets.  The monitored
    loss is the validation loss when a validation set is given, else the
    training loss.
    """
    config = config or TrainerConfig()
    X, y = train_set
    y = np.asarray(y, dtype=np.int64)
    n = len(y)
    if n == 0:
        raise DataError("training set is empty")
    has_valid = valid_set is not None and len(valid_set[1]) > 0
    if has_valid:
        Xv, yv = valid_set
        yv = np.asarray(yv, dtype=np.int64)
    weights = config.class_weights
    if weights is None:
        weights = np.ones(net.spec.output_classes)
    weights = np.asarray(weights, dtype=np.float64)

    rng = np.random.default_rng(config.seed)
    history: dict = {"epochs": [], "events": [], "restarts": 0}

    # reinitialization guard: an untrained net that already scores well on
    # the training set has memorized the majority class by luck of the draw
    restarts = 0
    while True:
        init_f1 = micro_f1(net.predict(X), y)
        if init_f1 < config.restart_f1_threshold or restarts >= config.max_restarts:
            break
        restarts += 1
        history["events"].append(
            {"type": "restart", "initial_f1": init_f1, "attempt": restarts}
        )
        net.initialize(rng)
    history["restarts"] = restarts

    adam = Adam(net.params)
    lr = config.learning_rate
    best_loss = np.inf
    best_params = None
    best_epoch = 0
    wait_lr = 0
    wait_es = 0
    stop_epoch = config.max_epochs

    for epoch in range(1, config.max_epochs + 1):
        perm = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            loss, grads = _loss_and_grads(
                net, _take(X, idx), y[idx], weights[y[idx]], True, rng
            )
            if not np.isfinite(loss):
                raise ConvergenceError(
                    f"non-finite loss at epoch {epoch}, batch {start // config.batch_size}"
                )
            adam.step(net.params, grads, lr)
        for name, p in net.params.items():
            if not np.all(np.isfinite(p)):
                raise ConvergenceError(f"non-finite parameter {name} after epoch {epoch}")

        train_loss = _mean_ce_loss(net, X, y)
        train_f1 = micro_f1(net.predict(X), y)
        val_loss = _mean_ce_loss(net, Xv, yv) if has_valid else None
        monitor = val_loss if has_valid else train_loss
        history["epochs"].append(
            {"epoch": epoch, "lr": lr, "train_loss": train_loss,
             "train_f1": train_f1, "val_loss": val_loss, "monitor": monitor}
        )

        if monitor < best_loss - config.min_delta:
            best_loss = monitor
            best_params = net.clone_params()
            best_epoch = epoch
            wait_lr = 0
            wait_es = 0
        else:
            wait_lr += 1
            wait_es += 1
            if wait_lr >= config.lr_patience:
                new_lr = max(lr * config.lr_reduce_factor, config.lr_floor)
                if new_lr < lr:
                    history["events"].append(
                        {"type": "lr_reduce", "epoch": epoch, "lr": new_lr}
                    )
                lr = new_lr
                wait_lr = 0
            if wait_es >= config.early_stop_patience:
                history["events"].append({"type": "early_stop", "epoch": epoch})
                stop_epoch = epoch
                break

    if best_params is not None:
        net.load_params(best_params)
    history["best_epoch"] = best_epoch
    history["best_loss"] = None if best_params is None else float(best_loss)
    history["stop_epoch"] = min(stop_epoch, len(history["epochs"]))
    net.history = history
    return history


# ---------------------------------------------------------------------------
# Embedding baseline


def embed_baseline_train(embeddings, labels, config: TrainerConfig | None = None,
                         hidden_layers: tuple[int, ...] = LSTM_HIDDEN_DEFAULT,
                         dropout_rate: float = 0.25,
                         valid_set=None) -> NeuralNet:
    """Train the recurrent baseline over per-note embedding vectors.

    Averaged-mode sets become length-1 sequences; per-chunk sets keep one
    timestep per chunk.  Class weights default to the balanced scheme
    computed from the labels.
    """
    config = config or TrainerConfig()
    y = np.asarray(labels, dtype=np.int64)
    seqs = embeddings_to_sequences(embeddings)
    if len(seqs) != len(y):
        raise DataError(
            f"{len(seqs)} embedding records but {len(y)} labels"
        )
    if len(seqs) == 0:
        raise DataError("embedding set is empty")
    n_classes = int(y.max()) + 1
    if config.class_weights is None:
        config = replace(config, class_weights=compute_class_weights(y, n_classes))
    spec = NetSpec(
        input_dim=embeddings.dim, hidden_layers=tuple(hidden_layers),
        output_classes=n_classes, cell="lstm", dropout_rate=dropout_rate,
    )
    net = NeuralNet(spec, seed=config.seed)
    train(net, (seqs, y), valid_set, config)
    return net


def embeddings_to_sequences(embeddings) -> list[np.ndarray]:
    """Per-note (T, dim) float64 sequences from an EmbeddingSet."""
    if embeddings.mode == "averaged":
        return [v.reshape(1, -1).astype(np.float64) for v in embeddings.vectors]
    return [np.asarray(v, dtype=np.float64) for v in embeddings.vectors]


# ---------------------------------------------------------------------------
# Serialization


def save_net(net: NeuralNet, path, extra: dict | None = None) -> None:
    payload = {
        "algo": "mlp" if net.spec.cell == "dense" else "lstm",
        "spec": asdict(net.spec),
        "params": {k: v.tolist() for k, v in net.params.items()},
        "history": net.history,
    }
    if extra:
        payload.update(extra)
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
    os.replace(tmp, path)


def load_net(payload: dict) -> NeuralNet:
    spec_d = dict(payload["spec"])
    spec_d["hidden_layers"] = tuple(spec_d["hidden_layers"])
    spec = NetSpec(**spec_d)
    net = NeuralNet(spec, seed=0)
    net.params = {k: np.asarray(v, dtype=np.float64) for k, v in payload["params"].items()}
    net.history = payload.get("history", {})
    return net
