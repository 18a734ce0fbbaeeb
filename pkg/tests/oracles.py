"""Slow, literal reference implementations used to check the fast code."""
from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np


def mask_by_loops(bits, T):
    M = np.zeros((40, T))
    for i in range(1, 41):
        k = (i - 1) // 4 + 1
        for j in range(T):
            M[i - 1, j] = bits[k - 1]
    return M


def f1_by_counting(y_true, y_pred):
    """Macro F1 via 2tp / (2tp + fp + fn) per class, counted with plain loops."""
    per_class = []
    for c in range(3):
        tp = fp = fn = 0
        for t, p in zip(y_true, y_pred):
            if t == c and p == c:
                tp += 1
            elif p == c:
                fp += 1
            elif t == c:
                fn += 1
        den = 2 * tp + fp + fn
        per_class.append(Fraction(2 * tp, den) if den else Fraction(0))
    return float(sum(per_class) / 3), [float(f) for f in per_class]


def _softmax(v):
    e = np.exp(v - v.max())
    return e / e.sum()


def bilinear_reference(w, X):
    """One 40 x T input through the attention-bilinear stand-in, matrix form."""
    Ybar = w["W1"] @ X
    E = Ybar @ w["W"]
    A = np.vstack([_softmax(row) for row in E])
    lam = 1.0 / (1.0 + math.exp(-float(w["lam_logit"][0])))
    Ytil = lam * (Ybar * A) + (1 - lam) * Ybar
    z = (Ytil @ w["W2"]).ravel() + w["b1"]
    return _softmax(w["W_out"] @ z + w["b2"])


def conv_reference(w, X):
    """One 40 x T input through the convolutional stand-in, with explicit loops."""
    T = X.shape[1]
    L = np.zeros((10, T))
    for k in range(10):
        for t in range(T):
            L[k, t] = sum(w["W_proj"][0, r] * X[4 * k + r, t] for r in range(4))
    C, _, width = w["W_conv"].shape
    pad = width // 2
    H = np.zeros((C, T))
    for c in range(C):
        for t in range(T):
            acc = w["b_conv"][c]
            for k in range(10):
                for j in range(width):
                    u = t + j - pad
                    if 0 <= u < T:
                        acc += w["W_conv"][c, k, j] * L[k, u]
            H[c, t] = max(acc, 0.0)
    g = H.mean(axis=1)
    return _softmax(w["W_out"] @ g + w["b_out"])


def numeric_gradient(loss_fn, weights, step=1e-5):
    """Central differences of ``loss_fn(weights)`` for every weight entry."""
    grads = {}
    for name, arr in weights.items():
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]
            arr[idx] = orig + step
            up = loss_fn(weights)
            arr[idx] = orig - step
            down = loss_fn(weights)
            arr[idx] = orig
            g[idx] = (up - down) / (2 * step)
        grads[name] = g
    return grads


def all_masks():
    return [tuple(bits) for bits in itertools.product((0, 1), repeat=10)]


def exhaustive_best(f):
    """(best fitness, list of maximizing bit tuples) over all 1024 masks."""
    scores = {bits: f(bits) for bits in all_masks()}
    best = max(scores.values())
    return best, [b for b, v in scores.items() if v == best]


def sample_std(values):
    n = len(values)
    mean = sum(values) / n
    return math.sqrt(sum((v - mean) ** 2 for v in values) / (n - 1))


def pairs_from_column(counts, runs):
    """Split per-level counts (summing to 2*runs) into ``runs`` level pairs.

    Greedy: repeatedly pair the two levels with the most remaining count.
    """
    left = dict(counts)
    out = []
    for _ in range(runs):
        a, b = sorted((k for k in left if left[k] > 0), key=lambda k: (-left[k], k))[:2]
        left[a] -= 1
        left[b] -= 1
        out.append((a, b))
    assert all(v == 0 for v in left.values())
    return out


def sets_from_column(counts, runs):
    """Spread per-level membership counts over ``runs`` nonempty sets."""
    sets = [set() for _ in range(runs)]
    pos = 0
    for level in sorted(counts):
        for _ in range(counts[level]):
            sets[pos % runs].add(level)
            pos += 1
    assert all(sets), "every run needs at least one level"
    return sets
