"""Deep feedforward ReLU network with fixed sign output layer.

The network computes ``f(x) = v . relu(W_L^T ... relu(W_1^T x))`` where the
output vector ``v`` has half +1 and half -1 entries.  The forward pass
records, for each layer, the binary pattern of strictly positive
pre-activations; gradients reuse those captured patterns, which makes the
derivative at a pre-activation of exactly 0 equal to 0 (a measure-zero
choice, but finite-difference checks must avoid kink-adjacent coordinates).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .linalg import PortableRng, gaussian_matrix

__all__ = [
    "BatchTrace",
    "ForwardTrace",
    "LayerGradients",
    "NetworkParams",
    "backprop_signals",
    "batch_forward",
    "batch_loss",
    "forward",
    "gradient_norms",
    "init_network",
    "load_params",
    "loss_gradient",
    "output_telescope",
    "save_params",
]

# One gradient matrix per layer, same shapes as NetworkParams.weights.
LayerGradients = list


@dataclass
class NetworkParams:
    """Weights of the network.

    ``layer_dims = [d, m_1, ..., m_L]``; ``weights[l]`` has shape
    ``(m_l, m_{l+1})`` so layer l maps via ``W^T``.  ``output_vector`` is the
    fixed +-1 vector, first half +1.
    """

    layer_dims: tuple
    weights: list
    output_vector: np.ndarray
    seed: int | None = None

    @property
    def depth(self) -> int:
        return len(self.layer_dims) - 1

    def validate(self) -> None:
        dims = tuple(self.layer_dims)
        if len(dims) < 2 or any(m < 1 for m in dims):
            raise ValueError(f"bad layer dims {dims}")
        if len(self.weights) != len(dims) - 1:
            raise ValueError("wrong number of weight matrices")
        for l, w in enumerate(self.weights):
            if w.shape != (dims[l], dims[l + 1]):
                raise ValueError(
                    f"weights[{l}] has shape {w.shape}, expected {(dims[l], dims[l+1])}")
        m_out = dims[-1]
        if m_out % 2 != 0:
            raise ValueError("output width must be even")
        v = self.output_vector
        if v.shape != (m_out,) or not np.all(np.abs(v) == 1.0):
            raise ValueError("output vector must be +-1 of output width")
        if np.count_nonzero(v > 0) != m_out // 2:
            raise ValueError("output vector must have half +1 and half -1 entries")

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            layer_dims=tuple(self.layer_dims),
            weights=[w.copy() for w in self.weights],
            output_vector=self.output_vector.copy(),
            seed=self.seed,
        )


@dataclass
class ForwardTrace:
    """Single-example forward pass: hidden outputs, patterns, output.

    ``hidden[0]`` is the input; ``hidden[l]`` the layer-l output;
    ``patterns[l-1]`` the bool mask of strictly positive layer-l
    pre-activations.
    """

    hidden: list
    patterns: list
    output: float


@dataclass
class BatchTrace:
    """Vectorized forward pass over a batch of inputs (one row per example)."""

    hidden: list      # hidden[l]: (n, m_l), hidden[0] = inputs
    preacts: list     # preacts[l-1]: (n, m_l) pre-activations of layer l
    patterns: list    # patterns[l-1]: (n, m_l) bool
    outputs: np.ndarray


def init_network(layer_dims, seed: int) -> NetworkParams:
    """Gaussian-initialized network.

    Each column of ``weights[l]`` is drawn N(0, 2/m_{l+1} I) from a single
    PortableRng(seed) stream consumed layer by layer, so the whole
    parameter set is a pure function of (layer_dims, seed).  The output
    vector is deterministic: first half +1, second half -1.
    """
    dims = tuple(int(m) for m in layer_dims)
    if len(dims) < 2:
        raise ValueError("need at least one hidden layer")
    if any(m < 1 for m in dims):
        raise ValueError(f"all layer dims must be >= 1, got {dims}")
    if dims[-1] % 2 != 0:
        raise ValueError(f"output width must be even, got {dims[-1]}")
    rng = PortableRng(seed)
    weights = [
        gaussian_matrix(dims[l], dims[l + 1], 2.0 / dims[l + 1], rng)
        for l in range(len(dims) - 1)
    ]
    half = dims[-1] // 2
    v = np.concatenate([np.ones(half), -np.ones(half)])
    params = NetworkParams(layer_dims=dims, weights=weights, output_vector=v, seed=seed)
    params.validate()
    return params


def forward(params: NetworkParams, x: np.ndarray) -> ForwardTrace:
    """Forward pass of one input, capturing hidden outputs and patterns."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.layer_dims[0],):
        raise ValueError(
            f"input has shape {x.shape}, expected ({params.layer_dims[0]},)")
    hidden = [x]
    patterns = []
    h = x
    for w in params.weights:
        z = w.T @ h
        p = z > 0
        h = np.where(p, z, 0.0)
        patterns.append(p)
        hidden.append(h)
    return ForwardTrace(hidden=hidden, patterns=patterns,
                        output=float(params.output_vector @ h))


def batch_forward(params: NetworkParams, inputs: np.ndarray) -> BatchTrace:
    """Forward pass of a whole batch (rows of `inputs`)."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.layer_dims[0]:
        raise ValueError(
            f"inputs have shape {x.shape}, expected (n, {params.layer_dims[0]})")
    hidden = [x]
    preacts = []
    patterns = []
    h = x
    for w in params.weights:
        z = h @ w
        p = z > 0
        h = np.where(p, z, 0.0)
        preacts.append(z)
        patterns.append(p)
        hidden.append(h)
    return BatchTrace(hidden=hidden, preacts=preacts, patterns=patterns,
                      outputs=h @ params.output_vector)


def output_telescope(params: NetworkParams, trace: ForwardTrace, layer: int) -> float:
    """Recompute the output from `layer` onward using the captured patterns.

    For ``layer = L + 1`` the masked product is empty and the result is
    ``v . hidden[L]``; every valid `layer` must reproduce ``trace.output``
    up to roundoff.
    """
    depth = params.depth
    if not 1 <= layer <= depth + 1:
        raise ValueError(f"layer must be in [1, {depth + 1}], got {layer}")
    t = trace.hidden[layer - 1]
    for r in range(layer, depth + 1):
        t = np.where(trace.patterns[r - 1], params.weights[r - 1].T @ t, 0.0)
    return float(params.output_vector @ t)


def batch_loss(params: NetworkParams, dataset, loss) -> float:
    """Mean loss of y_i * f(x_i) over the dataset."""
    trace = batch_forward(params, dataset.inputs)
    return float(np.mean(loss.value(dataset.labels * trace.outputs)))


def backprop_signals(params: NetworkParams, trace: BatchTrace) -> list:
    """Per-layer backward signals g_l with rows g_{l,i} (shape (n, m_l)).

    ``g_{L,i}`` is the output vector masked by the layer-L pattern of
    example i; ``g_{l,i}`` propagates it down through the captured masks.
    The gradient of f at example i w.r.t. weights[l-1] is the outer
    product ``hidden[l-1][i] g_{l,i}^T``.
    """
    v = params.output_vector
    sig = trace.patterns[-1] * v[None, :]
    out = [sig]
    for l in range(params.depth - 1, 0, -1):
        sig = (sig @ params.weights[l].T) * trace.patterns[l - 1]
        out.append(sig)
    out.reverse()
    return out


def _gradients_from_trace(params: NetworkParams, trace: BatchTrace,
                          coeff: np.ndarray, rows: np.ndarray | None = None) -> list:
    """Gradients sum_i coeff_i * x_{l-1,i} g_{l,i}^T, optionally on a row subset."""
    signals = backprop_signals(params, trace)
    grads = []
    for l in range(params.depth):
        h = trace.hidden[l]
        g = signals[l]
        if rows is not None:
            h = h[rows]
            g = g[rows]
        grads.append(h.T @ (coeff[:, None] * g))
    return grads


def loss_gradient(params: NetworkParams, dataset, loss) -> list:
    """Analytic gradient of the mean loss, one matrix per layer.

    Patterns are the ones captured by the forward pass at the current
    parameters (derivative 0 at ReLU kinks).
    """
    trace = batch_forward(params, dataset.inputs)
    y = dataset.labels
    n = y.shape[0]
    coeff = np.asarray(loss.deriv(y * trace.outputs), dtype=np.float64) * y / n
    return _gradients_from_trace(params, trace, coeff)


def gradient_norms(params: NetworkParams, trace: BatchTrace, labels: np.ndarray,
                   loss, rows: np.ndarray | None = None) -> tuple:
    """(spectral, frobenius) norms per layer of the (batch) loss gradient.

    Exploits that each layer gradient is A^T B with n-row factors, so its
    nonzero singular values are those of an n x n problem: exact norms at
    O(n^2 m) cost without materializing anything beyond the factors.
    """
    y = labels if rows is None else labels[rows]
    outs = trace.outputs if rows is None else trace.outputs[rows]
    coeff = np.asarray(loss.deriv(y * outs), dtype=np.float64) * y / y.shape[0]
    signals = backprop_signals(params, trace)
    spectral = []
    frobenius = []
    for l in range(params.depth):
        a = trace.hidden[l]
        g = signals[l]
        if rows is not None:
            a = a[rows]
            g = g[rows]
        b = coeff[:, None] * g
        gram_a = a @ a.T
        gram_b = b @ b.T
        frobenius.append(float(np.sqrt(max(0.0, np.sum(gram_a * gram_b)))))
        eigs = np.linalg.eigvals(gram_b @ gram_a)
        spectral.append(float(np.sqrt(max(0.0, float(np.max(eigs.real))))))
    return spectral, frobenius


# --- checkpoint container -------------------------------------------------
#
# Deterministic binary format (identical bytes for identical params):
#   line 1: b"OPNET1"
#   line 2: JSON header {layer_dims, seed} (sorted keys)
#   then little-endian float64 C-order raw bytes of W_1..W_L and v.

_MAGIC = b"OPNET1"


def save_params(params: NetworkParams, path) -> None:
    params.validate()
    header = {
        "layer_dims": [int(m) for m in params.layer_dims],
        "seed": params.seed,
    }
    with open(path, "wb") as fh:
        fh.write(_MAGIC + b"\n")
        fh.write(json.dumps(header, sort_keys=True).encode("ascii") + b"\n")
        for w in params.weights:
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(params.output_vector, dtype="<f8").tobytes())


def load_params(path) -> NetworkParams:
    with open(path, "rb") as fh:
        if fh.readline().strip() != _MAGIC:
            raise ValueError(f"{path}: not a network checkpoint")
        header = json.loads(fh.readline().decode("ascii"))
        dims = tuple(int(m) for m in header["layer_dims"])
        weights = []
        for l in range(len(dims) - 1):
            count = dims[l] * dims[l + 1]
            buf = fh.read(8 * count)
            weights.append(np.frombuffer(buf, dtype="<f8").reshape(dims[l], dims[l + 1]).copy())
        v = np.frombuffer(fh.read(8 * dims[-1]), dtype="<f8").copy()
    params = NetworkParams(layer_dims=dims, weights=weights, output_vector=v,
                           seed=header.get("seed"))
    params.validate()
    return params
