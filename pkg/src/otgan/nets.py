"""Small MLPs with hand-rolled reverse-mode gradients, plus Adam.

Networks are stacks of fully connected layers with ReLU between them and an
identity output head; embedding networks additionally L2-normalize output
rows so cosine costs computed downstream are plain dot products. Forward
passes record a tape of intermediates, and backward replays it exactly, so
the traced computation (not the network's possibly-updated parameters) is
what gets differentiated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import Rng, as_matrix, check_finite

__all__ = [
    "AdamState",
    "Gradients",
    "Mlp",
    "Tape",
    "adam_step",
    "init_mlp",
]


@dataclass
class Mlp:
    """Layer widths, per-layer parameters, optional L2-normalized output.

    weights[i] has shape (sizes[i], sizes[i+1]); biases[i] has shape
    (sizes[i+1],). A single-entry size list is the identity map, useful as a
    fixed embedding when the transport cost is computed on raw features.
    """

    sizes: list
    weights: list
    biases: list
    normalize_output: bool = False

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def forward(self, inputs: np.ndarray):
        """Run the network; returns (output, tape) with K x d_out output."""
        h = as_matrix(inputs, "inputs")
        if h.shape[1] != self.sizes[0]:
            raise ValueError(
                f"input width {h.shape[1]} does not match first layer size {self.sizes[0]}"
            )
        layer_inputs = []
        preacts = []
        for i in range(self.n_layers):
            layer_inputs.append(h)
            z = h @ self.weights[i] + self.biases[i]
            preacts.append(z)
            h = np.maximum(z, 0.0) if i < self.n_layers - 1 else z
        norms = None
        if self.normalize_output:
            norms = np.sqrt(np.sum(h * h, axis=1, keepdims=True))
            bad = np.nonzero(norms[:, 0] == 0.0)[0]
            if bad.size:
                raise ValueError(f"cannot L2-normalize: output row {int(bad[0])} has zero norm")
            h = h / norms
        check_finite(h, "network output")
        tape = Tape(
            weights=[w for w in self.weights],
            layer_inputs=layer_inputs,
            preacts=preacts,
            norms=norms,
            output=h,
        )
        return h, tape

    def to_dict(self) -> dict:
        return {
            "sizes": [int(s) for s in self.sizes],
            "normalize_output": bool(self.normalize_output),
            "weights": [w.ravel().tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Mlp":
        sizes = [int(s) for s in d["sizes"]]
        weights = [
            np.array(w, dtype=np.float64).reshape(sizes[i], sizes[i + 1])
            for i, w in enumerate(d["weights"])
        ]
        biases = [np.array(b, dtype=np.float64) for b in d["biases"]]
        return cls(sizes=sizes, weights=weights, biases=biases,
                   normalize_output=bool(d["normalize_output"]))


@dataclass
class Tape:
    """Intermediates of one forward pass, consumed by `backward`."""

    weights: list
    layer_inputs: list
    preacts: list
    norms: np.ndarray | None
    output: np.ndarray

    def backward(self, output_grad: np.ndarray):
        """Reverse-mode gradients of the traced pass.

        Returns (Gradients, input_grad); `output_grad` is dLoss/dOutput of
        the traced output and must match its shape.
        """
        g = as_matrix(output_grad, "output_grad")
        if g.shape != self.output.shape:
            raise ValueError(
                f"output_grad shape {g.shape} does not match traced output "
                f"shape {self.output.shape}; stale or mismatched tape"
            )
        if self.norms is not None:
            y = self.output
            g = (g - y * np.sum(g * y, axis=1, keepdims=True)) / self.norms
        d_weights = [None] * len(self.weights)
        d_biases = [None] * len(self.weights)
        for i in range(len(self.weights) - 1, -1, -1):
            if i < len(self.weights) - 1:
                g = g * (self.preacts[i] > 0.0)
            d_weights[i] = self.layer_inputs[i].T @ g
            d_biases[i] = g.sum(axis=0)
            g = g @ self.weights[i].T
        return Gradients(weights=d_weights, biases=d_biases), g


@dataclass
class Gradients:
    """Parameter-shaped gradient container matching an Mlp's layout."""

    weights: list
    biases: list

    @classmethod
    def zeros_like(cls, net: Mlp) -> "Gradients":
        return cls(
            weights=[np.zeros_like(w) for w in net.weights],
            biases=[np.zeros_like(b) for b in net.biases],
        )

    def add_(self, other: "Gradients", scale: float = 1.0) -> "Gradients":
        for i in range(len(self.weights)):
            self.weights[i] += scale * other.weights[i]
            self.biases[i] += scale * other.biases[i]
        return self

    def max_abs(self) -> float:
        vals = [np.max(np.abs(a)) if a.size else 0.0 for a in self.weights + self.biases]
        return float(max(vals, default=0.0))

    def flat(self) -> np.ndarray:
        parts = [a.ravel() for a in self.weights] + [b.ravel() for b in self.biases]
        return np.concatenate(parts) if parts else np.zeros(0)


def init_mlp(rng: Rng, sizes, normalize_output: bool = False) -> Mlp:
    """He-scaled normal weights, zero biases; deterministic given the seed."""
    sizes = [int(s) for s in sizes]
    if not sizes:
        raise ValueError("layer size list must not be empty")
    if any(s < 1 for s in sizes):
        raise ValueError("all layer sizes must be >= 1")
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        scale = np.sqrt(2.0 / fan_in)
        weights.append(rng.standard_normal(fan_in, fan_out) * scale)
        biases.append(np.zeros(fan_out))
    return Mlp(sizes=sizes, weights=weights, biases=biases, normalize_output=normalize_output)


@dataclass
class AdamState:
    """Moment accumulators and step counter for one network."""

    m_weights: list
    m_biases: list
    v_weights: list
    v_biases: list
    t: int = 0
    alpha: float = 3e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_net(cls, net: Mlp, alpha: float = 3e-4, beta1: float = 0.5,
                beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(
            m_weights=[np.zeros_like(w) for w in net.weights],
            m_biases=[np.zeros_like(b) for b in net.biases],
            v_weights=[np.zeros_like(w) for w in net.weights],
            v_biases=[np.zeros_like(b) for b in net.biases],
            t=0, alpha=alpha, beta1=beta1, beta2=beta2, eps=eps,
        )

    def to_dict(self) -> dict:
        return {
            "t": int(self.t),
            "alpha": self.alpha,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "m_weights": [a.ravel().tolist() for a in self.m_weights],
            "m_biases": [a.tolist() for a in self.m_biases],
            "v_weights": [a.ravel().tolist() for a in self.v_weights],
            "v_biases": [a.tolist() for a in self.v_biases],
        }

    @classmethod
    def from_dict(cls, d: dict, net: Mlp) -> "AdamState":
        def unflatten(flats, refs):
            return [np.array(f, dtype=np.float64).reshape(r.shape) for f, r in zip(flats, refs)]

        return cls(
            m_weights=unflatten(d["m_weights"], net.weights),
            m_biases=unflatten(d["m_biases"], net.biases),
            v_weights=unflatten(d["v_weights"], net.weights),
            v_biases=unflatten(d["v_biases"], net.biases),
            t=int(d["t"]),
            alpha=float(d["alpha"]),
            beta1=float(d["beta1"]),
            beta2=float(d["beta2"]),
            eps=float(d["eps"]),
        )


def adam_step(net: Mlp, grads: Gradients, state: AdamState, direction: str = "minimize"):
    """Bias-corrected Adam update applied to `net` in place.

    `direction="maximize"` negates the gradient (ascent). Parameter arrays
    are replaced rather than mutated, so tapes recorded before the step stay
    consistent with the pass they traced.
    """
    if direction not in ("minimize", "maximize"):
        raise ValueError(f"direction must be 'minimize' or 'maximize', got {direction!r}")
    if len(grads.weights) != len(net.weights):
        raise ValueError("gradient/parameter layer count mismatch")
    for gw, w in zip(grads.weights, net.weights):
        if gw.shape != w.shape:
            raise ValueError(f"gradient shape {gw.shape} does not match parameter shape {w.shape}")
    sign = -1.0 if direction == "maximize" else 1.0
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for i in range(len(net.weights)):
        for kind, params in (("weights", net.weights), ("biases", net.biases)):
            g = sign * getattr(grads, kind)[i]
            m = getattr(state, "m_" + kind)
            v = getattr(state, "v_" + kind)
            m[i] = b1 * m[i] + (1.0 - b1) * g
            v[i] = b2 * v[i] + (1.0 - b2) * g * g
            m_hat = m[i] / bc1
            v_hat = v[i] / bc2
            params[i] = params[i] - state.alpha * m_hat / (np.sqrt(v_hat) + state.eps)
    return net, state
