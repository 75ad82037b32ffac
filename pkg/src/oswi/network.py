"""Plain-numpy MLP: manual backprop, softmax cross-entropy, Adam, optional BN.

Batches are row-major: an input batch has shape (batch, N_0) and layer l
computes ``h_l = f(h_{l-1} @ W_l.T + b_l)`` with ``W_l`` of shape
(N_l, N_{l-1}).  The last layer is linear and feeds a softmax.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import rng as _rng
from .activations import ActivationSpec, derivative, evaluate, format_spec, omega, parse_spec
from .calibration import sigma_star
from .errors import BatchTooSmall, ShapeMismatch
from .initializers import PROPOSED, InitScheme, layer_weights, pack_matrix, unpack_matrices

BN_EPS = 1e-3
BN_MOMENTUM = 0.99
LEARNED_MARGIN = 0.05


@dataclass(frozen=True)
class NetworkConfig:
    layer_widths: tuple[int, ...]
    activation: ActivationSpec
    init: InitScheme
    batch_norm: bool = False
    seed: int = 0  # shuffling / training-side randomness; weights use init.seed

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        if len(widths) < 2 or min(widths) < 1:
            raise ValueError("need at least input and output widths, all >= 1")
        object.__setattr__(self, "layer_widths", widths)

    @property
    def n_hidden(self) -> int:
        return len(self.layer_widths) - 2


def mlp_config(activation, init_kind, n_hidden, width, n_in=784, n_out=10, p=0.3,
               seed=0, batch_norm=False) -> NetworkConfig:
    """Constant-width MLP; the proposed scheme is calibrated at depth ``n_hidden``."""
    if init_kind == PROPOSED:
        w = omega(activation)
        init = InitScheme.proposed(sigma_star(p, max(n_hidden, 1), w), w, seed)
    else:
        init = InitScheme(init_kind, seed)
    widths = (n_in,) + (width,) * n_hidden + (n_out,)
    return NetworkConfig(widths, activation, init, batch_norm, seed)


@dataclass(frozen=True)
class TrainConfig:
    lr: float
    epochs: int = 1
    batch_size: int = 128
    val_fraction: float = 0.15
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        if not 0 < self.val_fraction < 1:
            raise ValueError("val_fraction must lie in (0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")


class BatchNorm:
    """Per-feature batch normalisation of pre-activations."""

    def __init__(self, width, eps=BN_EPS, momentum=BN_MOMENTUM):
        self.gamma = np.ones(width)
        self.beta = np.zeros(width)
        self.running_mean = np.zeros(width)
        self.running_var = np.ones(width)
        self.eps = eps
        self.momentum = momentum

    def forward(self, z, train: bool):
        if train:
            if z.shape[0] < 2:
                raise BatchTooSmall("batch norm needs at least two samples in train mode")
            mu = z.mean(axis=0)
            var = z.var(axis=0)
            self.running_mean = self.momentum * self.running_mean + (1 - self.momentum) * mu
            self.running_var = self.momentum * self.running_var + (1 - self.momentum) * var
        else:
            mu, var = self.running_mean, self.running_var
        inv = 1.0 / np.sqrt(var + self.eps)
        zhat = (z - mu) * inv
        return self.gamma * zhat + self.beta, (zhat, inv)

    def backward(self, dy, cache):
        zhat, inv = cache
        n = dy.shape[0]
        dgamma = np.sum(dy * zhat, axis=0)
        dbeta = np.sum(dy, axis=0)
        dzhat = dy * self.gamma
        dz = inv / n * (n * dzhat - dzhat.sum(axis=0) - zhat * np.sum(dzhat * zhat, axis=0))
        return dz, dgamma, dbeta


def batch_norm_layer(x, bn: BatchNorm, mode: str):
    """Functional entry point: normalise ``x`` with ``bn`` in 'train' or 'eval' mode."""
    if mode not in ("train", "eval"):
        raise ValueError("mode must be 'train' or 'eval'")
    return bn.forward(np.asarray(x, dtype=float), mode == "train")[0]


def log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def cross_entropy(logits, labels) -> float:
    lp = log_softmax(logits)
    return float(-lp[np.arange(len(labels)), labels].mean())


class MLP:
    def __init__(self, config: NetworkConfig):
        self.config = config
        self.spec = config.activation
        widths = config.layer_widths
        self.weights = [layer_weights(config.init, widths[l], widths[l - 1], l)
                        for l in range(1, len(widths))]
        self.biases = [np.zeros(widths[l]) for l in range(1, len(widths))]
        self.bn = [BatchNorm(w) for w in widths[1:-1]] if config.batch_norm else []

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def parameters(self) -> list[np.ndarray]:
        """Trainable arrays in a fixed order: W_1, b_1, ..., W_L, b_L, then BN (gamma, beta)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        for bn in self.bn:
            out += [bn.gamma, bn.beta]
        return out

    def forward(self, x, train: bool = False):
        """Return (logits, cache); cache holds per-layer inputs and pre-activations."""
        h = np.asarray(x, dtype=float)
        if h.ndim != 2 or h.shape[1] != self.config.layer_widths[0]:
            raise ShapeMismatch(f"expected (batch, {self.config.layer_widths[0]}), got {h.shape}")
        cache = []
        for l in range(self.n_layers - 1):
            z = h @ self.weights[l].T + self.biases[l]
            bn_cache = None
            if self.bn:
                z, bn_cache = self.bn[l].forward(z, train)
            cache.append((h, z, bn_cache))
            h = evaluate(self.spec, z)
        logits = h @ self.weights[-1].T + self.biases[-1]
        cache.append((h, None, None))
        return logits, cache

    def loss_and_grads(self, x, labels, train: bool = True):
        """Mean cross-entropy and gradients aligned with :meth:`parameters`."""
        labels = np.asarray(labels)
        logits, cache = self.forward(x, train)
        if labels.shape != (logits.shape[0],):
            raise ShapeMismatch("one label per sample required")
        n = logits.shape[0]
        lp = log_softmax(logits)
        loss = float(-lp[np.arange(n), labels].mean())
        self.last_logits = logits

        delta = np.exp(lp)
        delta[np.arange(n), labels] -= 1.0
        delta /= n

        gw = [None] * self.n_layers
        gb = [None] * self.n_layers
        g_bn = [None] * len(self.bn)
        h_prev = cache[-1][0]
        gw[-1] = delta.T @ h_prev
        gb[-1] = delta.sum(axis=0)
        dh = delta @ self.weights[-1]
        for l in range(self.n_layers - 2, -1, -1):
            h_in, z, bn_cache = cache[l]
            dz = dh * derivative(self.spec, z)
            if self.bn:
                dz, dgamma, dbeta = self.bn[l].backward(dz, bn_cache)
                g_bn[l] = (dgamma, dbeta)
            gw[l] = dz.T @ h_in
            gb[l] = dz.sum(axis=0)
            if l:
                dh = dz @ self.weights[l]
        grads = []
        for w, b in zip(gw, gb):
            grads += [w, b]
        for dgamma, dbeta in g_bn:
            grads += [dgamma, dbeta]
        return loss, grads

    def predict(self, x, batch_size=1024):
        out = []
        for start in range(0, len(x), batch_size):
            logits, _ = self.forward(x[start:start + batch_size], train=False)
            out.append(logits)
        return np.concatenate(out) if out else np.zeros((0, self.config.layer_widths[-1]))

    def evaluate(self, x, labels):
        logits = self.predict(x)
        return cross_entropy(logits, labels), float(np.mean(logits.argmax(axis=1) == labels))

    # checkpoint: OSWI containers for every parameter plus a JSON manifest

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        arrays = self.parameters()
        for bn in self.bn:
            arrays += [bn.running_mean, bn.running_var]
        (directory / "weights.oswi").write_bytes(b"".join(pack_matrix(a) for a in arrays))
        init = self.config.init
        manifest = {
            "layer_widths": list(self.config.layer_widths),
            "activation": format_spec(self.spec),
            "init": asdict(init),
            "batch_norm": self.config.batch_norm,
            "seed": self.config.seed,
            "order": "W1,b1,...,WL,bL,[gamma,beta]*,[running_mean,running_var]*",
        }
        (directory / "manifest.json").write_text(json.dumps(manifest, indent=2))

    @classmethod
    def load(cls, directory) -> "MLP":
        directory = Path(directory)
        manifest = json.loads((directory / "manifest.json").read_text())
        config = NetworkConfig(tuple(manifest["layer_widths"]), parse_spec(manifest["activation"]),
                               InitScheme(**manifest["init"]), manifest["batch_norm"],
                               manifest["seed"])
        net = cls(config)
        arrays = unpack_matrices((directory / "weights.oswi").read_bytes())
        targets = net.parameters()
        for bn in net.bn:
            targets += [bn.running_mean, bn.running_var]
        if len(arrays) != len(targets):
            raise ShapeMismatch("checkpoint does not match the manifest")
        for dst, src in zip(targets, arrays):
            dst[...] = src.reshape(dst.shape)
        return net


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(params, grads, state: AdamState, lr: float) -> AdamState:
    """In-place bias-corrected Adam update of ``params``."""
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    state.t += 1
    c1 = 1.0 - state.beta1**state.t
    c2 = 1.0 - state.beta2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return state


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float


@dataclass
class TrainReport:
    epochs: list[EpochStats]
    n_classes: int = 10
    label: str = ""

    @property
    def best_val_acc(self) -> float:
        return max(e.val_acc for e in self.epochs)

    @property
    def learned(self) -> bool:
        return self.best_val_acc >= 1.0 / self.n_classes + LEARNED_MARGIN

    def to_dict(self):
        return {
            "label": self.label,
            "best_val_acc": self.best_val_acc,
            "learned": self.learned,
            "epochs": [asdict(e) for e in self.epochs],
        }

    def to_csv(self) -> str:
        lines = ["epoch,train_loss,train_acc,val_loss,val_acc"]
        for e in self.epochs:
            lines.append(f"{e.epoch},{e.train_loss!r},{e.train_acc!r},{e.val_loss!r},{e.val_acc!r}")
        return "\n".join(lines) + "\n"


def train(net_config: NetworkConfig, train_config: TrainConfig, train_set, val_set,
          label: str = "") -> TrainReport:
    return fit(MLP(net_config), train_config, train_set, val_set, label)


def fit(net: MLP, train_config: TrainConfig, train_set, val_set, label: str = "") -> TrainReport:
    """Minibatch Adam on ``net`` in place; epoch e shuffles with (seed, SHUFFLE, e)."""
    net_config = net.config
    x_tr, y_tr = train_set.images, train_set.labels
    x_va, y_va = val_set.images, val_set.labels
    if x_tr.shape[1] != net_config.layer_widths[0]:
        raise ShapeMismatch("dataset feature count does not match the input width")
    state = AdamState(train_config.beta1, train_config.beta2, train_config.eps)
    params = net.parameters()
    bs = train_config.batch_size
    history = []
    for epoch in range(1, train_config.epochs + 1):
        order = _rng.substream(net_config.seed, _rng.SHUFFLE, epoch).permutation(len(y_tr))
        loss_sum = 0.0
        correct = seen = 0
        for start in range(0, len(order), bs):
            idx = order[start:start + bs]
            if net_config.batch_norm and len(idx) < 2:
                continue
            xb = np.asarray(x_tr[idx], dtype=float)
            loss, grads = net.loss_and_grads(xb, y_tr[idx], train=True)
            # running train metrics use the pre-update train-mode logits
            correct += int(np.sum(net.last_logits.argmax(axis=1) == y_tr[idx]))
            loss_sum += loss * len(idx)
            seen += len(idx)
            adam_step(params, grads, state, train_config.lr)
        val_loss, val_acc = net.evaluate(np.asarray(x_va, dtype=float), y_va)
        history.append(EpochStats(epoch, loss_sum / max(seen, 1), correct / max(seen, 1),
                                  val_loss, val_acc))
    return TrainReport(history, net_config.layer_widths[-1], label)

