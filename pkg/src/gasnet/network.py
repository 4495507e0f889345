"""Feed-forward network topology, activation functions and forward evaluation.

A network layer l maps the previous layer's activations x^(l-1) through a
weight table W^l of shape (d_(l-1) + 1, d_l): row 0 is the bias row, driven
by a constant input of 1, so biases and weights share one uniform index
space. That same convention fixes the flat parameter-vector order used by
the trainer: layers first, within a layer neuron by neuron, within a neuron
the bias followed by the incoming weights.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .numerics import DimensionMismatch, make_rng

HIDDEN_ACTIVATIONS = ("tansig", "logsig")
ACTIVATION_KINDS = ("tansig", "logsig", "purelin")

SCHEMA_VERSION = 1


class LengthMismatch(ValueError):
    """Flat parameter vector length does not match the architecture."""


def _tansig(x):
    v = np.tanh(x)
    return v, 1.0 - v * v


def _logsig(x):
    v = expit(x)
    return v, v * (1.0 - v)


def _purelin(x):
    return x, np.ones_like(x)


_ACTIVATION_FNS = {"tansig": _tansig, "logsig": _logsig, "purelin": _purelin}


def activation_eval(kind, x):
    """Evaluate an activation and its analytic derivative.

    Works elementwise on arrays; scalars come back as floats. Saturates
    instead of overflowing for large |x| (tanh and the stable logistic
    form never produce NaN for finite input).
    """
    if kind not in _ACTIVATION_FNS:
        raise ValueError(f"unknown activation kind {kind!r}")
    arr = np.asarray(x, dtype=np.float64)
    v, d = _ACTIVATION_FNS[kind](arr)
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(v), float(d)
    return v, d


@dataclass(frozen=True)
class Architecture:
    """Topology descriptor: 9 fuel/process inputs, 1 or 2 hidden layers,
    purelin output of width 1 (single-target) or 3 (joint)."""

    input_dim: int
    hidden_sizes: tuple
    hidden_activations: tuple
    output_dim: int
    output_activation: str = "purelin"

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(n) for n in self.hidden_sizes))
        object.__setattr__(self, "hidden_activations", tuple(self.hidden_activations))
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("input_dim and output_dim must be >= 1")
        if not 1 <= len(self.hidden_sizes) <= 2:
            raise ValueError("expected 1 or 2 hidden layers")
        if len(self.hidden_activations) != len(self.hidden_sizes):
            raise ValueError("hidden_sizes and hidden_activations lengths differ")
        if any(n < 1 for n in self.hidden_sizes):
            raise ValueError("hidden layer sizes must be >= 1")
        for act in self.hidden_activations:
            if act not in HIDDEN_ACTIVATIONS:
                raise ValueError(f"hidden activation must be tansig or logsig, got {act!r}")
        if self.output_activation != "purelin":
            raise ValueError("output activation must be purelin")

    @property
    def layer_sizes(self):
        return (self.input_dim, *self.hidden_sizes, self.output_dim)

    @property
    def layer_activations(self):
        return (*self.hidden_activations, self.output_activation)

    def to_dict(self):
        return {
            "input_dim": self.input_dim,
            "hidden_sizes": list(self.hidden_sizes),
            "hidden_activations": list(self.hidden_activations),
            "output_dim": self.output_dim,
            "output_activation": self.output_activation,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            input_dim=int(d["input_dim"]),
            hidden_sizes=tuple(d["hidden_sizes"]),
            hidden_activations=tuple(d["hidden_activations"]),
            output_dim=int(d["output_dim"]),
            output_activation=d.get("output_activation", "purelin"),
        )


def param_count(arch):
    """Total weights and biases: sum over layers of (d_(l-1) + 1) * d_l."""
    sizes = arch.layer_sizes
    return sum((sizes[l] + 1) * sizes[l + 1] for l in range(len(sizes) - 1))


@dataclass
class Network:
    """An architecture plus its weight tables, one (d_prev + 1, d_l) array
    per layer with the bias in row 0."""

    architecture: Architecture
    layer_weights: list = field(default_factory=list)

    def __post_init__(self):
        sizes = self.architecture.layer_sizes
        if len(self.layer_weights) != len(sizes) - 1:
            raise DimensionMismatch("wrong number of weight tables")
        for l, w in enumerate(self.layer_weights):
            expected = (sizes[l] + 1, sizes[l + 1])
            if w.shape != expected:
                raise DimensionMismatch(
                    f"layer {l} weights have shape {w.shape}, expected {expected}"
                )

    def copy(self):
        return Network(self.architecture, [w.copy() for w in self.layer_weights])


def init_weights(arch, seed):
    """Fresh network with weights drawn i.i.d. uniform on [-0.5, 0.5]."""
    rng = make_rng(seed)
    sizes = arch.layer_sizes
    weights = [
        rng.uniform(-0.5, 0.5, size=(sizes[l] + 1, sizes[l + 1]))
        for l in range(len(sizes) - 1)
    ]
    return Network(arch, weights)


def forward_batch(net, inputs):
    """Evaluate a whole (n, input_dim) batch, returning (n, output_dim)."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[1] != net.architecture.input_dim:
        raise DimensionMismatch(
            f"inputs shape {inputs.shape} incompatible with input_dim "
            f"{net.architecture.input_dim}"
        )
    a = inputs
    ones = np.ones((inputs.shape[0], 1))
    for kind, w in zip(net.architecture.layer_activations, net.layer_weights):
        z = np.hstack([ones, a]) @ w
        a, _ = _ACTIVATION_FNS[kind](z)
    return a


def forward(net, x):
    """Evaluate one input vector, returning the output vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch(f"expected 1-d input, got shape {x.shape}")
    return forward_batch(net, x[None, :])[0]


def flatten(net):
    """Flat parameter vector: per layer, per neuron, bias then weights."""
    return np.concatenate([w.T.ravel() for w in net.layer_weights])


def unflatten(arch, params):
    """Inverse of flatten; params length must equal param_count(arch)."""
    params = np.asarray(params, dtype=np.float64)
    expected = param_count(arch)
    if params.ndim != 1 or params.shape[0] != expected:
        raise LengthMismatch(
            f"parameter vector has length {params.size}, expected {expected}"
        )
    sizes = arch.layer_sizes
    weights = []
    at = 0
    for l in range(len(sizes) - 1):
        rows, cols = sizes[l] + 1, sizes[l + 1]
        block = params[at : at + rows * cols]
        weights.append(block.reshape(cols, rows).T.copy())
        at += rows * cols
    return Network(arch, weights)


def network_to_doc(net, normalizer_doc=None, output_names=None):
    """Versioned JSON-ready document for a trained network.

    Floats survive the JSON round trip bit-exactly (shortest-repr decimal
    serialization). The normalizer document, when given, is embedded so a
    model file is self-contained for prediction.
    """
    return {
        "schema_version": SCHEMA_VERSION,
        "architecture": net.architecture.to_dict(),
        "params": [float(v) for v in flatten(net)],
        "normalizer": normalizer_doc,
        "output_names": list(output_names) if output_names is not None else None,
    }


def network_from_doc(doc):
    """Rebuild (Network, normalizer_doc, output_names) from network_to_doc output."""
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported model schema_version {doc.get('schema_version')!r}")
    arch = Architecture.from_dict(doc["architecture"])
    net = unflatten(arch, np.asarray(doc["params"], dtype=np.float64))
    return net, doc.get("normalizer"), doc.get("output_names")
