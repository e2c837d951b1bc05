"""Layered ReLU network model, evaluation, and compression transforms.

A network is a chain of affine layers; ReLU is applied after every layer
except the last. Layers carry a prune mask with the same shape as the
weight matrix: a masked edge contributes exactly zero in evaluation and
in every constraint encoding, while the stored weight value is retained.

Layer and position indices are 1-based throughout the package: hidden
layer 1 is the first layer after the input, position 1 is the first
neuron of a layer. The input layer is layer 0.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterator, Sequence

import numpy as np

from .errors import InputError

ACTIVE = "active"
INACTIVE = "inactive"

IDENTICAL = "identical"
QUANTIZED_LIKE = "quantized_like"
PRUNED_LIKE = "pruned_like"
INCOMPATIBLE = "incompatible"


@dataclass(frozen=True, order=True)
class NeuronId:
    """A hidden neuron: (hidden layer index, position), both 1-based."""

    layer: int
    pos: int

    def __post_init__(self):
        if self.layer < 1 or self.pos < 1:
            raise InputError(f"neuron indices are 1-based, got ({self.layer}, {self.pos})")


@dataclass(frozen=True, order=True)
class ActivationLiteral:
    """Assertion that a hidden neuron is in one ReLU phase.

    active:   pre >= 0 and post == pre
    inactive: pre <  0 and post == 0
    """

    neuron: NeuronId
    phase: str

    def __post_init__(self):
        if self.phase not in (ACTIVE, INACTIVE):
            raise InputError(f"unknown phase {self.phase!r}")

    def negated(self) -> "ActivationLiteral":
        return ActivationLiteral(self.neuron, INACTIVE if self.phase == ACTIVE else ACTIVE)


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True)
    out.setflags(write=False)
    return out


def _freeze_mask(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.uint8, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Layer:
    """One affine layer: weights (out_dim x in_dim), bias, prune mask."""

    weights: np.ndarray
    bias: np.ndarray
    prune_mask: np.ndarray = None  # defaults to all-zero

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.weights, dtype=float))
        b = np.asarray(self.bias, dtype=float).reshape(-1)
        if w.ndim != 2:
            raise InputError(f"weights must be a matrix, got ndim={w.ndim}")
        if b.shape[0] != w.shape[0]:
            raise InputError(f"bias length {b.shape[0]} != rows of weights {w.shape[0]}")
        if not np.all(np.isfinite(w)) or not np.all(np.isfinite(b)):
            raise InputError("weights and biases must be finite")
        if self.prune_mask is None:
            m = np.zeros_like(w, dtype=np.uint8)
        else:
            m = np.asarray(self.prune_mask)
            if m.shape != w.shape:
                raise InputError(f"prune_mask shape {m.shape} != weights shape {w.shape}")
            if not np.all((m == 0) | (m == 1)):
                raise InputError("prune_mask entries must be 0 or 1")
        object.__setattr__(self, "weights", _freeze(w))
        object.__setattr__(self, "bias", _freeze(b))
        object.__setattr__(self, "prune_mask", _freeze_mask(m))

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    def effective_weights(self) -> np.ndarray:
        """Weights with pruned edges zeroed."""
        return self.weights * (1.0 - self.prune_mask)

    def __eq__(self, other):
        if not isinstance(other, Layer):
            return NotImplemented
        return (
            np.array_equal(self.weights, other.weights)
            and np.array_equal(self.bias, other.bias)
            and np.array_equal(self.prune_mask, other.prune_mask)
        )


@dataclass(frozen=True, eq=False)
class Network:
    """An ordered chain of layers; ReLU after each layer except the last."""

    layers: tuple

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise InputError("a network needs at least one layer")
        for k in range(1, len(layers)):
            if layers[k].in_dim != layers[k - 1].out_dim:
                raise InputError(
                    f"layer {k + 1} expects {layers[k].in_dim} inputs, "
                    f"previous layer produces {layers[k - 1].out_dim}"
                )
        object.__setattr__(self, "layers", layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def num_hidden_layers(self) -> int:
        return len(self.layers) - 1

    def hidden_sizes(self) -> tuple:
        return tuple(layer.out_dim for layer in self.layers[:-1])

    def hidden_neurons(self) -> Iterator[NeuronId]:
        for k, size in enumerate(self.hidden_sizes(), start=1):
            for j in range(1, size + 1):
                yield NeuronId(k, j)

    def check_hidden(self, nid: NeuronId) -> None:
        sizes = self.hidden_sizes()
        if not (1 <= nid.layer <= len(sizes)) or not (1 <= nid.pos <= sizes[nid.layer - 1]):
            raise InputError(f"{nid} is not a hidden neuron of this network")

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return len(self.layers) == len(other.layers) and all(
            a == b for a, b in zip(self.layers, other.layers)
        )


@dataclass(frozen=True)
class CompressionSpec:
    """Description of one compression transform.

    kind="quantize" uses quantize_step; kind="prune" uses
    prune_mask_per_layer (one 0/1 matrix per layer, 1 = edge pruned).
    """

    kind: str
    quantize_step: float = None
    prune_mask_per_layer: tuple = None

    def __post_init__(self):
        if self.kind == "quantize":
            if self.quantize_step is None or not (self.quantize_step > 0):
                raise InputError("quantize requires a positive quantize_step")
            if self.prune_mask_per_layer is not None:
                raise InputError("quantize spec must not carry prune masks")
        elif self.kind == "prune":
            if self.prune_mask_per_layer is None:
                raise InputError("prune requires prune_mask_per_layer")
            if self.quantize_step is not None:
                raise InputError("prune spec must not carry a quantize step")
            object.__setattr__(
                self, "prune_mask_per_layer", tuple(_freeze_mask(np.atleast_2d(m)) for m in self.prune_mask_per_layer)
            )
        else:
            raise InputError(f"unknown compression kind {self.kind!r}")


def forward_eval(net: Network, x: Sequence[float]) -> np.ndarray:
    """Evaluate the network on one input vector.

    Masked edges contribute zero. The last layer is affine only.
    """
    v = np.asarray(x, dtype=float).reshape(-1)
    if v.shape[0] != net.input_dim:
        raise InputError(f"input has length {v.shape[0]}, network expects {net.input_dim}")
    if not np.all(np.isfinite(v)):
        raise InputError("input entries must be finite")
    for k, layer in enumerate(net.layers):
        v = layer.effective_weights() @ v + layer.bias
        if k < len(net.layers) - 1:
            v = np.maximum(v, 0.0)
    return v


def _snap(value: float, step: float) -> float:
    # decimal round-half-away-from-zero; repr() recovers the decimal
    # literal the value was parsed from, so 2.35/0.1 lands on 23.5 exactly
    ratio = Decimal(repr(float(value))) / Decimal(repr(float(step)))
    return float(ratio.to_integral_value(rounding=ROUND_HALF_UP) * Decimal(repr(float(step))))


def quantize(net: Network, step: float) -> Network:
    """Snap every weight and bias to the uniform grid of size `step`.

    Ties round half away from zero. Shapes and prune masks are unchanged.
    """
    if not (isinstance(step, (int, float)) and step > 0 and np.isfinite(step)):
        raise InputError(f"quantization step must be a positive real, got {step!r}")
    layers = []
    for layer in net.layers:
        w = np.array([[_snap(v, step) for v in row] for row in layer.weights])
        b = np.array([_snap(v, step) for v in layer.bias])
        layers.append(Layer(w, b, layer.prune_mask))
    return Network(tuple(layers))


def prune(net: Network, spec: CompressionSpec) -> Network:
    """Mask edges per `spec`; existing masks are kept (union)."""
    if spec.kind != "prune":
        raise InputError("prune() requires a CompressionSpec with kind='prune'")
    masks = spec.prune_mask_per_layer
    if len(masks) != len(net.layers):
        raise InputError(f"expected {len(net.layers)} masks, got {len(masks)}")
    layers = []
    for layer, m in zip(net.layers, masks):
        if m.shape != layer.weights.shape:
            raise InputError(f"mask shape {m.shape} != layer shape {layer.weights.shape}")
        layers.append(Layer(layer.weights, layer.bias, np.maximum(layer.prune_mask, m)))
    return Network(tuple(layers))


def node_prune_spec(net: Network, neurons: Sequence[NeuronId]) -> CompressionSpec:
    """Mask every edge entering or leaving the given hidden neurons."""
    masks = [np.zeros_like(layer.prune_mask) for layer in net.layers]
    for nid in neurons:
        net.check_hidden(nid)
        masks[nid.layer - 1][nid.pos - 1, :] = 1
        masks[nid.layer][:, nid.pos - 1] = 1
    return CompressionSpec(kind="prune", prune_mask_per_layer=tuple(masks))


def diff_classify(f: Network, f_prime: Network) -> str:
    """Classify how f_prime relates to f for proof-reuse purposes."""
    if len(f.layers) != len(f_prime.layers):
        return INCOMPATIBLE
    for a, b in zip(f.layers, f_prime.layers):
        if a.weights.shape != b.weights.shape:
            return INCOMPATIBLE

    masks_equal = all(np.array_equal(a.prune_mask, b.prune_mask) for a, b in zip(f.layers, f_prime.layers))
    params_equal = all(
        np.array_equal(a.weights, b.weights) and np.array_equal(a.bias, b.bias)
        for a, b in zip(f.layers, f_prime.layers)
    )
    if masks_equal and params_equal:
        return IDENTICAL
    if masks_equal:
        return QUANTIZED_LIKE

    superset = all(np.all(b.prune_mask >= a.prune_mask) for a, b in zip(f.layers, f_prime.layers))
    if superset:
        unmasked_equal = all(
            np.array_equal(a.bias, b.bias)
            and np.array_equal(a.weights[b.prune_mask == 0], b.weights[b.prune_mask == 0])
            for a, b in zip(f.layers, f_prime.layers)
        )
        if unmasked_equal:
            return PRUNED_LIKE
    return INCOMPATIBLE


# ---------------------------------------------------------------------------
# file format


def network_to_dict(net: Network) -> dict:
    layers = []
    for layer in net.layers:
        entry = {
            "weights": [[float(v) for v in row] for row in layer.weights],
            "bias": [float(v) for v in layer.bias],
        }
        if np.any(layer.prune_mask):
            entry["prune_mask"] = [[int(v) for v in row] for row in layer.prune_mask]
        layers.append(entry)
    return {"input_dim": net.input_dim, "layers": layers}


def network_from_dict(data: dict, source: str = "<network>") -> Network:
    if not isinstance(data, dict):
        raise InputError(f"{source}: expected a top-level object")
    try:
        input_dim = int(data["input_dim"])
        raw_layers = data["layers"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{source}: missing or malformed 'input_dim'/'layers' ({exc})") from exc
    if not isinstance(raw_layers, list) or not raw_layers:
        raise InputError(f"{source}: 'layers' must be a non-empty array")

    layers = []
    prev = input_dim
    for idx, entry in enumerate(raw_layers):
        where = f"{source}: layers[{idx}]"
        if not isinstance(entry, dict) or "weights" not in entry or "bias" not in entry:
            raise InputError(f"{where}: each layer needs 'weights' and 'bias'")
        try:
            w = np.array(entry["weights"], dtype=float)
            b = np.array(entry["bias"], dtype=float)
        except (TypeError, ValueError) as exc:
            raise InputError(f"{where}: non-numeric entry ({exc})") from exc
        if w.ndim != 2:
            raise InputError(f"{where}: 'weights' must be an array of rows")
        if w.shape[1] != prev:
            raise InputError(f"{where}: rows have {w.shape[1]} entries, expected {prev}")
        mask = entry.get("prune_mask")
        try:
            layers.append(Layer(w, b, None if mask is None else np.array(mask)))
        except InputError as exc:
            raise InputError(f"{where}: {exc}") from exc
        prev = w.shape[0]
    return Network(tuple(layers))


def load_network(path: str) -> Network:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc})") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return network_from_dict(data, source=path)


def save_network(net: Network, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(network_to_dict(net), fh, indent=1, sort_keys=True)
        fh.write("\n")
