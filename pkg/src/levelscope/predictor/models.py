"""Two small three-class backbones with analytic gradients.

``TemporalBilinear`` projects the 40 input rows to 60 hidden rows, re-weights
each hidden row over time with a learned soft attention, then collapses time
with a learned temporal weighting.  ``Convolutional`` projects each level's
four rows to one row with weights shared across levels, runs a width-5
temporal convolution with ReLU, and averages over time.

Public functions take a batch ``X`` of shape (B, 40, T).
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from types import MappingProxyType

import numpy as np

from ..lob_data import N_LEVELS, N_ROWS

N_CLASSES = 3
PROB_FLOOR = 1e-12

HIDDEN = 60
CONV_CHANNELS = 16
CONV_WIDTH = 5


class BackboneKind(str, Enum):
    TEMPORAL_BILINEAR = "bilinear"
    CONVOLUTIONAL = "conv"

    @classmethod
    def parse(cls, text: str) -> BackboneKind:
        text = text.strip().lower()
        aliases = {"temporalbilinear": "bilinear", "tabl": "bilinear", "convolutional": "conv", "deeplob": "conv"}
        return cls(aliases.get(text, text))


@dataclass(frozen=True)
class ModelParams:
    kind: BackboneKind
    T: int
    seed: int
    weights: MappingProxyType

    def __post_init__(self):
        frozen = {}
        for name, arr in dict(self.weights).items():
            arr = np.array(arr, dtype=np.float64)
            arr.setflags(write=False)
            frozen[name] = arr
        object.__setattr__(self, "weights", MappingProxyType(frozen))

    def __getitem__(self, name: str) -> np.ndarray:
        return self.weights[name]

    def replace(self, weights: dict) -> ModelParams:
        return ModelParams(self.kind, self.T, self.seed, weights)

    def equals(self, other: ModelParams) -> bool:
        """Bit-for-bit equality of kind, shape and every weight."""
        if (self.kind, self.T) != (other.kind, other.T) or list(self.weights) != list(other.weights):
            return False
        return all(np.array_equal(self.weights[k], other.weights[k]) for k in self.weights)


def param_shapes(kind: BackboneKind, T: int) -> dict[str, tuple[int, ...]]:
    if kind is BackboneKind.TEMPORAL_BILINEAR:
        return {
            "W1": (HIDDEN, N_ROWS),
            "W": (T, T),
            "lam_logit": (1,),
            "W2": (T, 1),
            "b1": (HIDDEN,),
            "W_out": (N_CLASSES, HIDDEN),
            "b2": (N_CLASSES,),
        }
    return {
        "W_proj": (1, 4),
        "W_conv": (CONV_CHANNELS, N_LEVELS, CONV_WIDTH),
        "b_conv": (CONV_CHANNELS,),
        "W_out": (N_CLASSES, CONV_CHANNELS),
        "b_out": (N_CLASSES,),
    }


def _fans(name: str, shape: tuple[int, ...]) -> tuple[int, int] | None:
    if name == "W_conv":
        out_ch, in_ch, width = shape
        return in_ch * width, out_ch * width
    if name.startswith("W"):
        return shape[1], shape[0]
    return None


def init_params(kind: BackboneKind, T: int, seed: int) -> ModelParams:
    """Glorot-uniform weight matrices, zero biases, attention mix at 0.5."""
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    kind = BackboneKind(kind)
    rng = np.random.default_rng(seed)
    weights = {}
    for name, shape in param_shapes(kind, T).items():
        fans = _fans(name, shape)
        if fans is None:
            weights[name] = np.zeros(shape)
        else:
            limit = np.sqrt(6.0 / (fans[0] + fans[1]))
            weights[name] = rng.uniform(-limit, limit, size=shape)
    return ModelParams(kind, T, int(seed), weights)


def _softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    e = np.exp(z - z.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _check_input(params: ModelParams, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[None]
    if X.shape[1:] != (N_ROWS, params.T):
        raise ValueError(f"expected inputs of shape (B, {N_ROWS}, {params.T}), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise FloatingPointError("non-finite value in network input")
    return X


# --------------------------------------------------------------------------
# Internals use a time-major layout: Z has shape (T, B, 40) and hidden
# activations (T, B, H), so every contraction is a single matrix product and
# reductions over time run across contiguous slabs.


def to_time_major(X: np.ndarray) -> np.ndarray:
    """(B, 40, T) -> contiguous (T, B, 40)."""
    return np.ascontiguousarray(np.transpose(X, (2, 0, 1)))


def _bilinear_forward(w, Z):
    T, B, _ = Z.shape
    Yb = (Z.reshape(T * B, N_ROWS) @ w["W1"].T).reshape(T, B, HIDDEN)
    E = (w["W"].T @ Yb.reshape(T, B * HIDDEN)).reshape(T, B, HIDDEN)
    E -= E.max(axis=0)
    A = np.exp(E)
    A /= A.sum(axis=0)
    lam = _sigmoid(w["lam_logit"][0])
    G = Yb * A
    Yt = lam * G + (1.0 - lam) * Yb
    z = (w["W2"][:, 0] @ Yt.reshape(T, B * HIDDEN)).reshape(B, HIDDEN) + w["b1"]
    logits = z @ w["W_out"].T + w["b2"]
    return logits, (Z, Yb, A, G, Yt, z, lam)


def _bilinear_backward(w, cache, dlogits):
    Z, Yb, A, G, Yt, z, lam = cache
    T, B, _ = Z.shape
    grads = {}
    grads["W_out"] = dlogits.T @ z
    grads["b2"] = dlogits.sum(axis=0)
    dz = dlogits @ w["W_out"]  # (B, 60)
    grads["b1"] = dz.sum(axis=0)
    grads["W2"] = (Yt.reshape(T, B * HIDDEN) @ dz.reshape(B * HIDDEN))[:, None]
    dYt = w["W2"][:, 0][:, None, None] * dz[None]  # (T, B, 60)
    grads["lam_logit"] = np.array([np.vdot(dYt, G - Yb) * lam * (1.0 - lam)], dtype=Z.dtype)
    dG = lam * dYt
    dA = dG * Yb
    dYb = (1.0 - lam) * dYt + dG * A
    dE = A * (dA - np.sum(dA * A, axis=0))
    Yb2 = Yb.reshape(T, B * HIDDEN)
    dE2 = dE.reshape(T, B * HIDDEN)
    grads["W"] = Yb2 @ dE2.T
    dYb += (w["W"] @ dE2).reshape(T, B, HIDDEN)
    grads["W1"] = dYb.reshape(T * B, HIDDEN).T @ Z.reshape(T * B, N_ROWS)
    return grads


# --------------------------------------------------------------------------
# convolutional

_PAD = CONV_WIDTH // 2


def _conv_forward(w, Z):
    T, B, _ = Z.shape
    L = (Z.reshape(T * B * N_LEVELS, 4) @ w["W_proj"][0]).reshape(T, B, N_LEVELS)
    Lp = np.zeros((T + 2 * _PAD, B, N_LEVELS), dtype=Z.dtype)
    Lp[_PAD : _PAD + T] = L
    # im2col over the time axis: (T*B, 10*5), column index = channel*5 + offset
    cols = np.stack([Lp[j : j + T] for j in range(CONV_WIDTH)], axis=-1).reshape(T * B, N_LEVELS * CONV_WIDTH)
    C = (cols @ w["W_conv"].reshape(CONV_CHANNELS, -1).T).reshape(T, B, CONV_CHANNELS) + w["b_conv"]
    R = np.maximum(C, 0.0)
    g = R.mean(axis=0)
    logits = g @ w["W_out"].T + w["b_out"]
    return logits, (Z, cols, C, g)


def _conv_backward(w, cache, dlogits):
    Z, cols, C, g = cache
    T, B, _ = Z.shape
    grads = {}
    grads["W_out"] = dlogits.T @ g
    grads["b_out"] = dlogits.sum(axis=0)
    dg = dlogits @ w["W_out"]  # (B, 16)
    dC = ((C > 0) * (dg[None] / T)).reshape(T * B, CONV_CHANNELS)
    grads["b_conv"] = dC.sum(axis=0)
    grads["W_conv"] = (dC.T @ cols).reshape(w["W_conv"].shape)
    dcols = (dC @ w["W_conv"].reshape(CONV_CHANNELS, -1)).reshape(T, B, N_LEVELS, CONV_WIDTH)
    dLp = np.zeros((T + 2 * _PAD, B, N_LEVELS), dtype=Z.dtype)
    for j in range(CONV_WIDTH):
        dLp[j : j + T] += dcols[..., j]
    dL = dLp[_PAD : _PAD + T]  # (T, B, 10)
    grads["W_proj"] = (dL.reshape(-1) @ Z.reshape(T * B * N_LEVELS, 4))[None, :]
    return grads


_FORWARD = {BackboneKind.TEMPORAL_BILINEAR: _bilinear_forward, BackboneKind.CONVOLUTIONAL: _conv_forward}
_BACKWARD = {BackboneKind.TEMPORAL_BILINEAR: _bilinear_backward, BackboneKind.CONVOLUTIONAL: _conv_backward}


def raw_logits(kind: BackboneKind, w, Z: np.ndarray) -> np.ndarray:
    """Unchecked logits (B, 3) for a time-major batch."""
    return _FORWARD[kind](w, Z)[0]


def predict_proba(params: ModelParams, X: np.ndarray) -> np.ndarray:
    """Class probabilities (B, 3) for a batch of masked windows."""
    X = _check_input(params, X)
    return _softmax(raw_logits(params.kind, params.weights, to_time_major(X)), axis=1)


def forward(params: ModelParams, X: np.ndarray) -> np.ndarray:
    """Probability 3-vector for a single 40 x T input."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("forward takes one 40 x T matrix; use predict_proba for batches")
    return predict_proba(params, X)[0]


def batch_loss_and_gradient(params: ModelParams, X: np.ndarray, y: np.ndarray):
    """Mean cross-entropy of a batch and its gradient w.r.t. every weight.

    Probabilities below ``PROB_FLOOR`` are clamped inside the log; the clamped
    samples then contribute zero gradient.
    """
    X = _check_input(params, X)
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    return raw_loss_and_gradient(params.kind, params.weights, to_time_major(X), np.asarray(y, dtype=np.int64))


def raw_loss_and_gradient(kind: BackboneKind, w, Z: np.ndarray, y: np.ndarray):
    """Unchecked core of :func:`batch_loss_and_gradient` on a time-major batch."""
    B = Z.shape[1]
    logits, cache = _FORWARD[kind](w, Z)
    P = _softmax(logits, axis=1)
    p_true = P[np.arange(B), y]
    loss = float(np.mean(-np.log(np.maximum(p_true, PROB_FLOOR))))
    dlogits = P.copy()
    dlogits[np.arange(B), y] -= 1.0
    dlogits[p_true < PROB_FLOOR] = 0.0
    dlogits /= B
    return loss, _BACKWARD[kind](w, cache, dlogits)


def loss_and_gradient(params: ModelParams, batch):
    """Same as :func:`batch_loss_and_gradient` for a list of (matrix, label) pairs."""
    batch = list(batch)
    if not batch:
        raise ValueError("empty batch")
    X = np.stack([np.asarray(m, dtype=np.float64) for m, _ in batch])
    y = np.array([int(lbl) for _, lbl in batch])
    return batch_loss_and_gradient(params, X, y)


# --------------------------------------------------------------------------
# binary container
#
#   magic  b"LVLSCOPE1"
#   u8 tag length, tag (ascii backbone value)
#   u32 T, i64 seed, u32 tensor count
#   per tensor: u16 name length, name (ascii), u8 ndim, u32 dims..., f64 data (row-major)
# All integers and floats little-endian.

MAGIC = b"LVLSCOPE1"


def params_to_bytes(params: ModelParams) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    tag = params.kind.value.encode("ascii")
    buf.write(struct.pack("<B", len(tag)) + tag)
    buf.write(struct.pack("<Iq", params.T, params.seed))
    buf.write(struct.pack("<I", len(params.weights)))
    for name, arr in params.weights.items():
        raw = name.encode("ascii")
        buf.write(struct.pack("<H", len(raw)) + raw)
        buf.write(struct.pack("<B", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return buf.getvalue()


def params_from_bytes(data: bytes) -> ModelParams:
    view = memoryview(data)
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(view):
            raise ValueError("truncated parameter container")
        chunk = view[pos : pos + n]
        pos += n
        return bytes(chunk)

    if take(len(MAGIC)) != MAGIC:
        raise ValueError("not a parameter container (bad magic)")
    (tag_len,) = struct.unpack("<B", take(1))
    kind = BackboneKind(take(tag_len).decode("ascii"))
    T, seed = struct.unpack("<Iq", take(12))
    (count,) = struct.unpack("<I", take(4))
    weights = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode("ascii")
        (ndim,) = struct.unpack("<B", take(1))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim)) if ndim else ()
        n = int(np.prod(shape)) if shape else 1
        weights[name] = np.frombuffer(take(8 * n), dtype="<f8").reshape(shape).astype(np.float64)
    if pos != len(view):
        raise ValueError("trailing bytes after parameter container")
    expected = param_shapes(kind, T)
    if {k: v.shape for k, v in weights.items()} != expected:
        raise ValueError("tensor shapes do not match the backbone definition")
    return ModelParams(kind, T, seed, weights)


def save_params(params: ModelParams, path) -> None:
    Path(path).write_bytes(params_to_bytes(params))


def load_params(path) -> ModelParams:
    return params_from_bytes(Path(path).read_bytes())
