"""Small feed-forward networks in plain numpy.

Linear layers with ReLU activations, optional per-layer batch
normalisation, exact manual backpropagation, and an SGD step with weight
decay and Gaussian gradient noise. Networks may also normalise and
rectify their *input* before the first linear layer; the alternating
trainer uses that to place an activation between the representation
network and the score head stacked on top of it.

Train-mode forward passes use batch statistics and update the running
averages in place; eval-mode passes use the stored running averages.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MlpSpec",
    "BnState",
    "BnGrads",
    "MlpParams",
    "MlpGrads",
    "SgdConfig",
    "init_params",
    "forward",
    "backward",
    "sgd_step",
    "params_to_dict",
    "params_from_dict",
]

BN_MOMENTUM = 0.9
BN_EPS = 1e-5


@dataclass(frozen=True)
class MlpSpec:
    """Network shape: layer widths plus activation/normalisation flags.

    ``layer_sizes`` has at least two entries (input and output width).
    ``hidden_batchnorm`` holds one flag per hidden layer; a plain bool
    broadcasts. ``input_batchnorm``/``input_relu`` act on the input before
    the first linear layer.
    """

    layer_sizes: tuple[int, ...]
    hidden_batchnorm: tuple[bool, ...] = ()
    input_batchnorm: bool = False
    input_relu: bool = False

    def __post_init__(self) -> None:
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ValueError(f"layer_sizes needs >= 2 positive widths, got {sizes}")
        n_hidden = len(sizes) - 2
        bn = self.hidden_batchnorm
        if isinstance(bn, bool):
            bn = (bn,) * n_hidden
        bn = tuple(bool(f) for f in bn)
        if len(bn) == 0:
            bn = (False,) * n_hidden
        if len(bn) != n_hidden:
            raise ValueError(
                f"hidden_batchnorm needs one flag per hidden layer "
                f"({n_hidden}), got {len(bn)}"
            )
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "hidden_batchnorm", bn)

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1

    @property
    def in_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def out_dim(self) -> int:
        return self.layer_sizes[-1]

    @property
    def has_batchnorm(self) -> bool:
        return self.input_batchnorm or any(self.hidden_batchnorm)


@dataclass
class BnState:
    """Batch-normalisation parameters and running statistics for one layer."""

    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray

    @classmethod
    def identity(cls, width: int) -> "BnState":
        return cls(np.ones(width), np.zeros(width), np.zeros(width), np.ones(width))


@dataclass
class BnGrads:
    gamma: np.ndarray
    beta: np.ndarray


@dataclass
class MlpParams:
    """All learnable state of a network.

    Layout parallels the owning :class:`MlpSpec`: one weight matrix and
    bias per linear layer, one optional batchnorm state per hidden layer.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    hidden_bn: list[BnState | None]
    input_bn: BnState | None = None

    def clone(self) -> "MlpParams":
        return copy.deepcopy(self)


@dataclass
class MlpGrads:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    hidden_bn: list[BnGrads | None]
    input_bn: BnGrads | None = None


@dataclass(frozen=True)
class SgdConfig:
    """Step size, weight decay, gradient noise scale, batch size, seed."""

    learning_rate: float
    weight_decay: float = 0.0
    grad_noise_std: float = 0.0
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.learning_rate >= 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.weight_decay < 0 or self.grad_noise_std < 0:
            raise ValueError("weight_decay and grad_noise_std must be >= 0")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


def init_params(spec: MlpSpec, seed) -> MlpParams:
    """Glorot-uniform weights, zero biases, identity batchnorm."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(spec.layer_sizes, spec.layer_sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    hidden_bn = [
        BnState.identity(w) if flag else None
        for w, flag in zip(spec.layer_sizes[1:-1], spec.hidden_batchnorm)
    ]
    input_bn = BnState.identity(spec.in_dim) if spec.input_batchnorm else None
    return MlpParams(weights, biases, hidden_bn, input_bn)


@dataclass
class _Cache:
    mode: str
    out_shape: tuple[int, int]
    stages: list[tuple]
    spec: MlpSpec
    params: MlpParams


def _bn_forward(x: np.ndarray, bn: BnState, mode: str):
    if mode == "train":
        mean = x.mean(axis=0)
        var = x.var(axis=0)
        bn.running_mean = BN_MOMENTUM * bn.running_mean + (1 - BN_MOMENTUM) * mean
        bn.running_var = BN_MOMENTUM * bn.running_var + (1 - BN_MOMENTUM) * var
    else:
        mean, var = bn.running_mean, bn.running_var
    inv_std = 1.0 / np.sqrt(var + BN_EPS)
    x_hat = (x - mean) * inv_std
    return bn.gamma * x_hat + bn.beta, x_hat, inv_std


def forward(params: MlpParams, spec: MlpSpec, x: np.ndarray, mode: str):
    """Run the network; returns ``(output, cache)``.

    ``mode`` is ``"train"`` (batch statistics, running averages updated)
    or ``"eval"`` (running statistics, params untouched). Train mode with
    batch normalisation present requires at least two rows.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != spec.in_dim:
        raise ValueError(f"input must be 2-d with {spec.in_dim} columns, got shape {x.shape}")
    if mode == "train" and spec.has_batchnorm and x.shape[0] < 2:
        raise ValueError("train-mode batch normalisation needs a batch of at least 2")

    stages: list[tuple] = []
    if spec.input_batchnorm:
        x, x_hat, inv_std = _bn_forward(x, params.input_bn, mode)
        stages.append(("bn", "input", x_hat, inv_std))
    if spec.input_relu:
        mask = x > 0
        x = np.where(mask, x, 0.0)
        stages.append(("relu", mask))
    for i in range(spec.n_layers):
        stages.append(("linear", i, x))
        x = x @ params.weights[i] + params.biases[i]
        if i < spec.n_layers - 1:
            if spec.hidden_batchnorm[i]:
                x, x_hat, inv_std = _bn_forward(x, params.hidden_bn[i], mode)
                stages.append(("bn", i, x_hat, inv_std))
            mask = x > 0
            x = np.where(mask, x, 0.0)
            stages.append(("relu", mask))
    return x, _Cache(mode, x.shape, stages, spec, params)


def _bn_backward(g: np.ndarray, bn: BnState, x_hat: np.ndarray, inv_std: np.ndarray):
    m = g.shape[0]
    g_gamma = (g * x_hat).sum(axis=0)
    g_beta = g.sum(axis=0)
    g_hat = g * bn.gamma
    gx = (inv_std / m) * (
        m * g_hat - g_hat.sum(axis=0) - x_hat * (g_hat * x_hat).sum(axis=0)
    )
    return gx, BnGrads(g_gamma, g_beta)


def backward(cache: _Cache, output_grad: np.ndarray):
    """Exact gradients for the forward pass recorded in ``cache``.

    ``output_grad`` holds the partial derivatives of a scalar loss with
    respect to the network output. Returns ``(MlpGrads, input_grad)``.
    Gradients do not flow through running statistics.
    """
    if cache.mode != "train":
        raise ValueError("backward requires a cache from a train-mode forward pass")
    g = np.asarray(output_grad, dtype=float)
    if g.shape != cache.out_shape:
        raise ValueError(
            f"output_grad shape {g.shape} does not match cached output {cache.out_shape}"
        )
    params = cache.params
    grads = MlpGrads(
        weights=[np.zeros_like(w) for w in params.weights],
        biases=[np.zeros_like(b) for b in params.biases],
        hidden_bn=[None] * len(params.hidden_bn),
        input_bn=None,
    )
    for stage in reversed(cache.stages):
        kind = stage[0]
        if kind == "linear":
            _, i, x_in = stage
            grads.weights[i] = x_in.T @ g
            grads.biases[i] = g.sum(axis=0)
            g = g @ params.weights[i].T
        elif kind == "relu":
            g = g * stage[1]
        else:
            _, key, x_hat, inv_std = stage
            bn = params.input_bn if key == "input" else params.hidden_bn[key]
            g, bn_grads = _bn_backward(g, bn, x_hat, inv_std)
            if key == "input":
                grads.input_bn = bn_grads
            else:
                grads.hidden_bn[key] = bn_grads
    return grads, g


def _noisy(g: np.ndarray, std: float, rng: np.random.Generator) -> np.ndarray:
    if std == 0.0:
        return g
    return g + rng.normal(0.0, std, size=g.shape)


def sgd_step(
    params: MlpParams, grads: MlpGrads, config: SgdConfig, step_rng: np.random.Generator
) -> MlpParams:
    """One SGD update; returns new params, the inputs are untouched.

    Every gradient gets independent Gaussian noise; weight decay applies
    to weights and biases but not to batchnorm scale/shift; running
    statistics are carried over unchanged. Noise is drawn in a fixed
    order (weights and biases layer by layer, then batchnorm stages) so a
    seeded generator reproduces the update exactly.
    """
    lr = config.learning_rate
    wd = config.weight_decay
    std = config.grad_noise_std
    weights = [
        w - lr * (_noisy(gw, std, step_rng) + wd * w)
        for w, gw in zip(params.weights, grads.weights)
    ]
    biases = [
        b - lr * (_noisy(gb, std, step_rng) + wd * b)
        for b, gb in zip(params.biases, grads.biases)
    ]

    def _bn_update(bn: BnState | None, g: BnGrads | None) -> BnState | None:
        if bn is None:
            return None
        gamma, beta = bn.gamma, bn.beta
        if g is not None:
            gamma = gamma - lr * _noisy(g.gamma, std, step_rng)
            beta = beta - lr * _noisy(g.beta, std, step_rng)
        return BnState(gamma, beta, bn.running_mean.copy(), bn.running_var.copy())

    input_bn = _bn_update(params.input_bn, grads.input_bn)
    hidden_bn = [_bn_update(bn, g) for bn, g in zip(params.hidden_bn, grads.hidden_bn)]
    return MlpParams(weights, biases, hidden_bn, input_bn)


def _bn_to_dict(bn: BnState | None):
    if bn is None:
        return None
    return {
        "gamma": bn.gamma.tolist(),
        "beta": bn.beta.tolist(),
        "running_mean": bn.running_mean.tolist(),
        "running_var": bn.running_var.tolist(),
    }


def _bn_from_dict(doc) -> BnState | None:
    if doc is None:
        return None
    return BnState(*(np.asarray(doc[k], dtype=float) for k in
                     ("gamma", "beta", "running_mean", "running_var")))


def params_to_dict(params: MlpParams) -> dict:
    """JSON-ready parameters, layer-major with row-major weight matrices."""
    return {
        "layers": [
            {"weight": w.tolist(), "bias": b.tolist()}
            for w, b in zip(params.weights, params.biases)
        ],
        "input_bn": _bn_to_dict(params.input_bn),
        "hidden_bn": [_bn_to_dict(bn) for bn in params.hidden_bn],
    }


def params_from_dict(doc: dict) -> MlpParams:
    """Inverse of :func:`params_to_dict`; round-trips exactly."""
    try:
        weights = [np.asarray(layer["weight"], dtype=float) for layer in doc["layers"]]
        biases = [np.asarray(layer["bias"], dtype=float) for layer in doc["layers"]]
        hidden_bn = [_bn_from_dict(d) for d in doc["hidden_bn"]]
        input_bn = _bn_from_dict(doc["input_bn"])
    except KeyError as exc:
        raise ValueError(f"params document is missing key {exc.args[0]!r}") from None
    return MlpParams(weights, biases, hidden_bn, input_bn)
