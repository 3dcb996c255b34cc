"""Minimal fully connected network with ReLU, dropout, MSE, and plain SGD.

Everything is float64 and explicit: a parameter record, a forward pass that
can cache activations, an analytic backward pass, and an in-place SGD step.
Dropout uses inverted scaling (survivors multiplied by 1/(1-p) at train
time) so evaluation needs no rescaling.  The batch variants are the same
arithmetic over a (batch, dim) matrix; the vector forms wrap them with a
single-row batch.

Checkpoints are bit-exact: magic ``DQNW``, a version byte, then the layer
count and per-layer (in-dim, out-dim) as unsigned 32-bit little-endian,
then per layer the row-major weights followed by the bias, all float64
little-endian, then a UTF-8 text block echoing the dropout/activation
configuration plus any caller-supplied metadata.
"""

from __future__ import annotations

import io
import os
import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Sequence

import numpy as np

__all__ = [
    "LayerParams",
    "MlpParams",
    "MlpGrads",
    "MlpCache",
    "SgdState",
    "mlp_init",
    "forward",
    "forward_batch",
    "backward",
    "backward_batch",
    "sgd_step",
    "clone_params",
    "copy_into",
    "save_checkpoint",
    "load_checkpoint",
    "CHECKPOINT_MAGIC",
    "CHECKPOINT_VERSION",
]

CHECKPOINT_MAGIC = b"DQNW"
CHECKPOINT_VERSION = 1


@dataclass
class LayerParams:
    """One dense layer: weights (out, in), bias (out,), ReLU or identity."""

    weights: np.ndarray
    bias: np.ndarray
    relu: bool

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ValueError(f"weights must be 2-D (out, in), got {self.weights.shape}")
        if self.bias.shape != (self.weights.shape[0],):
            raise ValueError(
                f"bias shape {self.bias.shape} does not match weights "
                f"{self.weights.shape}"
            )

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


@dataclass
class MlpParams:
    """Ordered dense layers plus one dropout probability per junction.

    Junction ``i`` sits on the input of layer ``i``; the conventional
    configuration drops at junction 0 only (probability 0.4 on the raw
    input components) and nowhere else.
    """

    layers: list[LayerParams]
    dropout: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.layers:
            raise ValueError("at least one layer required")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if nxt.in_dim != prev.out_dim:
                raise ValueError(
                    f"layer dims mismatch: {prev.out_dim} feeds {nxt.in_dim}"
                )
        self.dropout = tuple(float(p) for p in self.dropout)
        if len(self.dropout) != len(self.layers):
            raise ValueError(
                f"need one dropout probability per junction "
                f"({len(self.layers)}), got {len(self.dropout)}"
            )
        for p in self.dropout:
            if not (0.0 <= p < 1.0):
                raise ValueError(f"dropout probability must be in [0, 1), got {p}")

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.in_dim,) + tuple(layer.out_dim for layer in self.layers)

    def num_parameters(self) -> int:
        return sum(l.weights.size + l.bias.size for l in self.layers)


@dataclass
class MlpGrads:
    """Parameter-shaped gradient buffers (d_weights, d_bias per layer)."""

    d_weights: list[np.ndarray]
    d_bias: list[np.ndarray]

    @classmethod
    def zeros_like(cls, params: MlpParams) -> "MlpGrads":
        return cls(
            d_weights=[np.zeros_like(l.weights) for l in params.layers],
            d_bias=[np.zeros_like(l.bias) for l in params.layers],
        )

    def add(self, other: "MlpGrads") -> None:
        for mine, theirs in zip(self.d_weights, other.d_weights):
            mine += theirs
        for mine, theirs in zip(self.d_bias, other.d_bias):
            mine += theirs

    def scale(self, factor: float) -> None:
        for dw in self.d_weights:
            dw *= factor
        for db in self.d_bias:
            db *= factor

    def zero(self) -> None:
        for dw in self.d_weights:
            dw[:] = 0.0
        for db in self.d_bias:
            db[:] = 0.0

    def max_abs(self) -> float:
        return max(
            max((float(np.max(np.abs(dw))) for dw in self.d_weights), default=0.0),
            max((float(np.max(np.abs(db))) for db in self.d_bias), default=0.0),
        )


@dataclass
class MlpCache:
    """Activations recorded by a train-mode forward, consumed by backward.

    ``layer_inputs[i]`` is the (batch, in) matrix actually fed to layer i
    (after any dropout), ``pre_activations[i]`` the (batch, out) affine
    result before the nonlinearity, and ``masks[i]`` the dropout scale
    matrix for junction i or None where no dropout applied.
    """

    layer_inputs: list[np.ndarray] = field(default_factory=list)
    pre_activations: list[np.ndarray] = field(default_factory=list)
    masks: list[np.ndarray | None] = field(default_factory=list)


@dataclass
class SgdState:
    """Learning rate plus an accumulation buffer shaped like the params."""

    eta: float
    grads: MlpGrads

    def __post_init__(self) -> None:
        if not (self.eta > 0.0):
            raise ValueError(f"learning rate must be positive, got {self.eta}")

    @classmethod
    def for_params(cls, params: MlpParams, eta: float) -> "SgdState":
        return cls(eta=eta, grads=MlpGrads.zeros_like(params))

    def apply_and_reset(self, params: MlpParams) -> None:
        sgd_step(params, self.grads, self.eta)
        self.grads.zero()


def mlp_init(
    layer_dims: Sequence[int],
    rng: np.random.Generator,
    first_junction_dropout: float = 0.4,
) -> MlpParams:
    """Build an MLP with uniform +-sqrt(6/(fan_in+fan_out)) weights.

    Hidden layers get ReLU, the output layer is linear, biases start at
    zero, and dropout applies on the first junction only.  Weights are
    drawn layer by layer in order, so a given rng seed pins the full
    initialization.
    """
    if len(layer_dims) < 2:
        raise ValueError("need at least an input and an output dimension")
    layers = []
    n_layers = len(layer_dims) - 1
    for i in range(n_layers):
        fan_in, fan_out = int(layer_dims[i]), int(layer_dims[i + 1])
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        layers.append(LayerParams(
            weights=weights,
            bias=np.zeros(fan_out),
            relu=i < n_layers - 1,
        ))
    dropout = (first_junction_dropout,) + (0.0,) * (n_layers - 1)
    return MlpParams(layers=layers, dropout=dropout)


def _forward_impl(
    params: MlpParams,
    x: np.ndarray,
    mode: str,
    rng: np.random.Generator | None,
    cache: MlpCache | None,
    masks: Sequence[np.ndarray | None] | None,
) -> np.ndarray:
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    if x.ndim != 2 or x.shape[1] != params.in_dim:
        raise ValueError(
            f"input has shape {x.shape}, expected (batch, {params.in_dim})"
        )
    if masks is not None and len(masks) != len(params.layers):
        raise ValueError("need one mask entry (or None) per junction")
    train = mode == "train"
    if train and masks is None and any(p > 0 for p in params.dropout) and rng is None:
        raise ValueError("train-mode forward with dropout needs an rng")

    activation = x.astype(np.float64, copy=False)
    for i, layer in enumerate(params.layers):
        mask: np.ndarray | None = None
        if masks is not None and masks[i] is not None:
            mask = np.asarray(masks[i], dtype=np.float64)
            activation = activation * mask
        elif train and params.dropout[i] > 0.0:
            p = params.dropout[i]
            keep = rng.random(activation.shape) >= p
            mask = keep.astype(np.float64) / (1.0 - p)
            activation = activation * mask
        if cache is not None:
            cache.masks.append(mask)
            cache.layer_inputs.append(activation)
        z = activation @ layer.weights.T + layer.bias
        if cache is not None:
            cache.pre_activations.append(z)
        activation = np.maximum(z, 0.0) if layer.relu else z
    return activation


def forward(
    params: MlpParams,
    x: np.ndarray,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
    cache: MlpCache | None = None,
    masks: Sequence[np.ndarray | None] | None = None,
) -> np.ndarray:
    """Run the network on one input vector; returns the output vector.

    In train mode each junction with a nonzero dropout probability drops
    components independently with that probability and scales survivors by
    1/(1-p); eval mode is deterministic.  Pass an empty ``cache`` to record
    the activations needed by :func:`backward`.  ``masks`` overrides the
    random dropout with fixed scale vectors (a testing hook for gradient
    checks through the dropout path).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"input must be a vector, got shape {x.shape}")
    fixed = None
    if masks is not None:
        fixed = [None if m is None else np.asarray(m, dtype=np.float64)[None, :]
                 for m in masks]
    return _forward_impl(params, x[None, :], mode, rng, cache, fixed)[0]


def forward_batch(
    params: MlpParams,
    x: np.ndarray,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
    cache: MlpCache | None = None,
) -> np.ndarray:
    """Vectorized :func:`forward` over a (batch, in_dim) matrix of inputs.

    Train-mode dropout draws an independent mask per row.
    """
    return _forward_impl(params, np.asarray(x, dtype=np.float64), mode, rng, cache, None)


def backward_batch(
    params: MlpParams,
    cache: MlpCache,
    dloss_dy: np.ndarray,
) -> MlpGrads:
    """Backpropagate a (batch, out_dim) loss gradient; grads sum over rows.

    The cache must come from a forward over the same parameters; dropout
    masks recorded there are reused so the gradient matches the exact
    function that was evaluated.
    """
    if cache is None or not cache.layer_inputs:
        raise TypeError("backward requires the cache produced by a forward pass")
    if len(cache.layer_inputs) != len(params.layers):
        raise ValueError("cache does not match the network depth")
    g = np.asarray(dloss_dy, dtype=np.float64)
    if g.shape != cache.pre_activations[-1].shape:
        raise ValueError(
            f"loss gradient shape {g.shape} does not match output "
            f"{cache.pre_activations[-1].shape}"
        )
    grads = MlpGrads.zeros_like(params)
    for i in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[i]
        dz = g * (cache.pre_activations[i] > 0.0) if layer.relu else g
        grads.d_weights[i][:] = dz.T @ cache.layer_inputs[i]
        grads.d_bias[i][:] = dz.sum(axis=0)
        if i > 0 or cache.masks[i] is not None:
            g = dz @ layer.weights
            if cache.masks[i] is not None:
                g = g * cache.masks[i]
    return grads


def backward(
    params: MlpParams,
    cache: MlpCache,
    dloss_dy: np.ndarray,
) -> MlpGrads:
    """Backpropagate a loss gradient at the output of a single-vector forward."""
    g = np.asarray(dloss_dy, dtype=np.float64)
    if g.ndim != 1:
        raise ValueError(f"loss gradient must be a vector, got shape {g.shape}")
    return backward_batch(params, cache, g[None, :])


def sgd_step(params: MlpParams, grads: MlpGrads, eta: float) -> MlpParams:
    """In-place update theta <- theta - eta * gradient; returns params."""
    for layer, dw, db in zip(params.layers, grads.d_weights, grads.d_bias):
        layer.weights -= eta * dw
        layer.bias -= eta * db
    return params


def clone_params(params: MlpParams) -> MlpParams:
    """Deep value copy; later updates to either side leave the other alone."""
    return MlpParams(
        layers=[LayerParams(weights=l.weights.copy(), bias=l.bias.copy(), relu=l.relu)
                for l in params.layers],
        dropout=params.dropout,
    )


def copy_into(source: MlpParams, target: MlpParams) -> None:
    """Copy parameter values from source into target's arrays, in place."""
    if len(source.layers) != len(target.layers):
        raise ValueError("parameter records have different depths")
    for src, dst in zip(source.layers, target.layers):
        if src.weights.shape != dst.weights.shape:
            raise ValueError(
                f"shape mismatch: {src.weights.shape} vs {dst.weights.shape}"
            )
        dst.weights[:] = src.weights
        dst.bias[:] = src.bias
        dst.relu = src.relu
    target.dropout = source.dropout


def _activation_name(layer: LayerParams) -> str:
    return "relu" if layer.relu else "identity"


def save_checkpoint(
    params: MlpParams, file: str | os.PathLike | BinaryIO, extra_text: str = ""
) -> None:
    """Write the bit-exact binary checkpoint followed by the text block."""
    own = isinstance(file, (str, os.PathLike))
    fh: BinaryIO = open(file, "wb") if own else file
    try:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<B", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(params.layers)))
        for layer in params.layers:
            fh.write(struct.pack("<II", layer.in_dim, layer.out_dim))
        for layer in params.layers:
            fh.write(np.ascontiguousarray(layer.weights, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(layer.bias, dtype="<f8").tobytes())
        text = "dropout=" + ",".join(repr(p) for p in params.dropout) + "\n"
        text += "activation=" + ",".join(_activation_name(l) for l in params.layers) + "\n"
        if extra_text:
            text += extra_text
            if not extra_text.endswith("\n"):
                text += "\n"
        fh.write(text.encode("utf-8"))
    finally:
        if own:
            fh.close()


def load_checkpoint(file: str | os.PathLike | BinaryIO) -> tuple[MlpParams, str]:
    """Read a checkpoint; returns the parameters and the full text block."""
    own = isinstance(file, (str, os.PathLike))
    fh: BinaryIO = open(file, "rb") if own else file
    try:
        data = fh.read()
    finally:
        if own:
            fh.close()
    buf = io.BytesIO(data)

    def read_exact(n: int) -> bytes:
        chunk = buf.read(n)
        if len(chunk) < n:
            raise ValueError("checkpoint truncated")
        return chunk

    magic = read_exact(4)
    if magic != CHECKPOINT_MAGIC:
        raise ValueError(f"bad checkpoint magic {magic!r}")
    (version,) = struct.unpack("<B", read_exact(1))
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    (n_layers,) = struct.unpack("<I", read_exact(4))
    dims = [struct.unpack("<II", read_exact(8)) for _ in range(n_layers)]
    layers = []
    for in_dim, out_dim in dims:
        w_bytes = read_exact(8 * in_dim * out_dim)
        b_bytes = read_exact(8 * out_dim)
        weights = np.frombuffer(w_bytes, dtype="<f8").reshape(out_dim, in_dim).copy()
        bias = np.frombuffer(b_bytes, dtype="<f8").copy()
        layers.append(LayerParams(weights=weights, bias=bias, relu=True))
    text = buf.read().decode("utf-8")

    dropout: tuple[float, ...] | None = None
    for line in text.splitlines():
        if line.startswith("dropout="):
            dropout = tuple(float(v) for v in line[len("dropout="):].split(","))
        elif line.startswith("activation="):
            names = line[len("activation="):].split(",")
            if len(names) != n_layers:
                raise ValueError("activation list does not match layer count")
            for layer, name in zip(layers, names):
                layer.relu = name == "relu"
    if dropout is None:
        raise ValueError("checkpoint text block is missing the dropout line")
    return MlpParams(layers=layers, dropout=dropout), text
