"""Per-neuron pre-activation bounds via forward interval propagation.

Plain interval arithmetic: push the input box through each layer,
clipping hidden intervals at zero before the next affine map. Sound but
not tight; tight enough to classify many neurons as stable and to feed
the triangle relaxation. The module boundary allows swapping in a
tighter propagator without touching callers.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import InconsistentAssumption, InputError
from .network import ACTIVE, INACTIVE, ActivationLiteral, Network, NeuronId
from .props import InputBox

STABLE_ACTIVE = "stable_active"
STABLE_INACTIVE = "stable_inactive"
UNSTABLE = "unstable"


def classify(lower: float, upper: float) -> str:
    # tie at zero: upper == 0 wins as inactive, then lower == 0 as active
    if upper <= 0.0:
        return STABLE_INACTIVE
    if lower >= 0.0:
        return STABLE_ACTIVE
    return UNSTABLE


@dataclass(frozen=True)
class NeuronBounds:
    lower: float
    upper: float
    stability: str

    def __post_init__(self):
        if self.lower > self.upper:
            raise InputError(f"lower {self.lower} > upper {self.upper}")

    @classmethod
    def of(cls, lower: float, upper: float) -> "NeuronBounds":
        return cls(float(lower), float(upper), classify(lower, upper))


@dataclass(frozen=True)
class BoundsMap:
    """Bounds for every hidden neuron plus output pre-activation bounds."""

    hidden: Mapping[NeuronId, NeuronBounds]
    output: tuple  # tuple of (lower, upper) per output neuron
    network: Network
    box: InputBox

    def neuron(self, nid: NeuronId) -> NeuronBounds:
        try:
            return self.hidden[nid]
        except KeyError:
            raise InputError(f"{nid} has no recorded bounds") from None

    def unstable_neurons(self) -> tuple:
        return tuple(nid for nid, nb in self.hidden.items() if nb.stability == UNSTABLE)


def _affine_interval(layer, lo: np.ndarray, hi: np.ndarray):
    w = layer.effective_weights()
    wp = np.clip(w, 0.0, None)
    wn = np.clip(w, None, 0.0)
    return wp @ lo + wn @ hi + layer.bias, wp @ hi + wn @ lo + layer.bias


def interval_propagate(net: Network, box: InputBox) -> BoundsMap:
    """Sound pre-activation interval for every neuron over the box."""
    if box.dim != net.input_dim:
        raise InputError(f"box dimension {box.dim} != network input dim {net.input_dim}")
    lo, hi = box.lower.copy(), box.upper.copy()
    hidden = {}
    output = None
    for k, layer in enumerate(net.layers, start=1):
        plo, phi = _affine_interval(layer, lo, hi)
        if k == len(net.layers):
            output = tuple((float(a), float(b)) for a, b in zip(plo, phi))
        else:
            for j in range(layer.out_dim):
                hidden[NeuronId(k, j + 1)] = NeuronBounds.of(plo[j], phi[j])
            lo, hi = np.maximum(plo, 0.0), np.maximum(phi, 0.0)
    return BoundsMap(hidden=hidden, output=output, network=net, box=box)


def refresh_under_assumptions(bmap: BoundsMap, fixed: Iterable[ActivationLiteral]) -> BoundsMap:
    """Re-propagate intervals with some neurons pinned to a phase.

    The result is sound for every input consistent with the fixed phases
    and never looser than the map passed in (per-neuron intersection).
    If no input is consistent, the intervals are vacuous and may collapse
    to a point.
    """
    phase_of = {}
    for lit in fixed:
        bmap.network.check_hidden(lit.neuron)
        if phase_of.get(lit.neuron, lit.phase) != lit.phase:
            raise InconsistentAssumption(f"both phases assumed for {lit.neuron}")
        phase_of[lit.neuron] = lit.phase

    net = bmap.network
    lo, hi = bmap.box.lower.copy(), bmap.box.upper.copy()
    hidden = {}
    output = None
    for k, layer in enumerate(net.layers, start=1):
        plo, phi = _affine_interval(layer, lo, hi)
        if k == len(net.layers):
            old = bmap.output
            output = tuple(
                (max(float(a), o[0]), min(float(b), o[1])) for (a, b), o in zip(zip(plo, phi), old)
            )
            break
        nlo = np.empty(layer.out_dim)
        nhi = np.empty(layer.out_dim)
        for j in range(layer.out_dim):
            nid = NeuronId(k, j + 1)
            prev = bmap.hidden[nid]
            a = max(float(plo[j]), prev.lower)
            b = min(float(phi[j]), prev.upper)
            phase = phase_of.get(nid)
            if phase == ACTIVE:
                a = max(a, 0.0)
                if b < a:
                    b = a  # contradictory assumption; interval is vacuous
            elif phase == INACTIVE:
                b = min(b, 0.0)
                if a > b:
                    a = b
            else:
                if b < a:
                    b = a
            hidden[nid] = NeuronBounds.of(a, b)
            if phase == ACTIVE:
                nlo[j], nhi[j] = max(a, 0.0), max(b, 0.0)
            elif phase == INACTIVE:
                nlo[j], nhi[j] = 0.0, 0.0
            else:
                nlo[j], nhi[j] = max(a, 0.0), max(b, 0.0)
        lo, hi = nlo, nhi
    return BoundsMap(hidden=hidden, output=output, network=net, box=bmap.box)
