"""Minimal dense feed-forward networks with analytic gradients.

Three hidden rectified-linear layers, then either a "simplex" head
(normalized exponentials, rows sum to 1) or a "squash" head (per-unit
logistic, outputs in (0, 1)).  All math is float64; forward/backward accept
a batch of row vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HEADS = ("simplex", "squash")


@dataclass
class DenseNet:
    dims: tuple
    head: str
    weights: list   # per layer, shape (fan_in, fan_out)
    biases: list    # per layer, shape (fan_out,)

    def __post_init__(self):
        if self.head not in HEADS:
            raise ValueError(f"unknown head {self.head!r}")
        if len(self.weights) != len(self.dims) - 1 or len(self.biases) != len(self.dims) - 1:
            raise ValueError("one weight matrix and bias vector per layer required")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.dims[l], self.dims[l + 1]) or b.shape != (self.dims[l + 1],):
                raise ValueError(
                    f"layer {l}: shapes {w.shape}/{b.shape} do not match dims {self.dims}"
                )

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def param_list(self) -> list:
        """Weights and biases interleaved: [W0, b0, W1, b1, ...]."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def copy(self) -> "DenseNet":
        return DenseNet(self.dims, self.head,
                        [w.copy() for w in self.weights],
                        [b.copy() for b in self.biases])


def init_net(dims, head: str, rng: np.random.Generator) -> DenseNet:
    """Zero-mean uniform weights with half-width sqrt(6 / (fan_in + fan_out)),
    biases zero."""
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims):
        raise ValueError(f"all layer dims must be >= 1, got {dims}")
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        half = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-half, half, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return DenseNet(dims, head, weights, biases)


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def forward(net: DenseNet, x: np.ndarray):
    """Returns (output, cache).  x may be a single vector or a (B, d_in) batch;
    the output shape mirrors the input."""
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != net.dims[0]:
        raise ValueError(f"input width {X.shape[1]} != expected {net.dims[0]}")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite network input")
    acts = [X]
    pre = []
    h = X
    last = net.n_layers - 1
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        pre.append(z)
        h = z if l == last else np.maximum(z, 0.0)
        acts.append(h)
    y = _softmax_rows(pre[-1]) if net.head == "simplex" else 1.0 / (1.0 + np.exp(-pre[-1]))
    cache = (acts, pre, y)
    return (y[0] if squeeze else y), cache


def backward(net: DenseNet, cache, upstream: np.ndarray):
    """Gradient of sum(output * upstream) for every parameter and the input.

    Returns (dweights, dbiases, dx); parameter gradients are summed over the
    batch, dx keeps the batch shape.
    """
    acts, pre, y = cache
    g = np.atleast_2d(np.asarray(upstream, dtype=np.float64))
    if g.shape != y.shape:
        raise ValueError(f"upstream shape {g.shape} != output shape {y.shape}")
    if net.head == "simplex":
        dz = y * (g - (g * y).sum(axis=1, keepdims=True))
    else:
        dz = g * y * (1.0 - y)
    dweights = [None] * net.n_layers
    dbiases = [None] * net.n_layers
    for l in range(net.n_layers - 1, -1, -1):
        dweights[l] = acts[l].T @ dz
        dbiases[l] = dz.sum(axis=0)
        da = dz @ net.weights[l].T
        dz = da if l == 0 else da * (pre[l - 1] > 0.0)
    dx = dz  # after the l == 0 pass, dz is the input gradient
    if np.asarray(upstream).ndim == 1:
        dx = dx[0]
    return dweights, dbiases, dx


@dataclass
class AdamState:
    """Bias-corrected moment accumulators, one pair per parameter tensor."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_net(cls, net: DenseNet, lr: float) -> "AdamState":
        params = net.param_list()
        return cls(lr=lr,
                   m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params])


def adam_step(state: AdamState, params: list, grads: list) -> None:
    """One in-place update of `params` (and `state`) from matching `grads`."""
    if len(params) != len(state.m) or len(grads) != len(params):
        raise ValueError("parameter/gradient count mismatch")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


# ---------------------------------------------------------------------------
# tensor dump: binary blob with a JSON manifest of (name, shape, offset)
# ---------------------------------------------------------------------------

_MAGIC = b"ATD1"


def save_tensors(path, tensors: dict, meta: dict | None = None) -> None:
    """Single-file dump: magic, manifest length, JSON manifest, then the raw
    float64/int64 little-endian blobs in manifest order (names sorted)."""
    import json

    names = sorted(tensors)
    manifest = {"meta": meta or {}, "tensors": []}
    offset = 0
    blobs = []
    for name in names:
        arr = np.ascontiguousarray(tensors[name])
        if arr.dtype not in (np.float64, np.int64):
            arr = arr.astype(np.float64)
        blob = arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes()
        manifest["tensors"].append({
            "name": name,
            "shape": list(arr.shape),
            "dtype": str(arr.dtype),
            "offset": offset,
            "nbytes": len(blob),
        })
        blobs.append(blob)
        offset += len(blob)
    header = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(len(header).to_bytes(8, "little"))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load_tensors(path):
    """Inverse of save_tensors: returns (tensors dict, meta dict)."""
    import json

    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path}: not a tensor dump")
        header_len = int.from_bytes(fh.read(8), "little")
        manifest = json.loads(fh.read(header_len))
        body = fh.read()
    tensors = {}
    for entry in manifest["tensors"]:
        start = entry["offset"]
        raw = body[start:start + entry["nbytes"]]
        arr = np.frombuffer(raw, dtype=np.dtype(entry["dtype"]).newbyteorder("<"))
        tensors[entry["name"]] = arr.reshape(entry["shape"]).copy()
    return tensors, manifest["meta"]
