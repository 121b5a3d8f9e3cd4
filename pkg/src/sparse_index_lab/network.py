"""Two-layer ReLU networks under the symmetric-pairing convention.

A width-2m network pairs index j with 2m-j+1 (1-based): the paired neuron
carries the negated output weight and identical first-layer row and bias,
so the network output is identically zero at initialization and the risk
gradient in W reduces to a pure correlation term.

ReLU subgradient convention: phi'(0) = 0 (ties broken to the flat side).
This is a measure-zero event under Gaussian inputs but has to be fixed for
determinism.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Dataset


def relu(t):
    return np.maximum(t, 0.0)


def relu_prime(t):
    # strict inequality: phi'(0) = 0
    return (t > 0).astype(float)


@dataclass
class NetParams:
    a: np.ndarray  # (2m,)
    W: np.ndarray  # (2m, d)
    b: np.ndarray  # (2m,)
    m: int

    @property
    def d(self) -> int:
        return self.W.shape[1]


def mirror(half: np.ndarray, negate: bool = False) -> np.ndarray:
    """Extend an m-row draw to 2m rows under the (j, 2m-j+1) pairing."""
    tail = -half[::-1] if negate else half[::-1]
    return np.concatenate([half, tail], axis=0)


def init_symmetric(m: int, d: int, seed: int) -> NetParams:
    """a_j ~ Unif{-1,+1}, b_j ~ N(0,1) for j in [m], mirrored; W rows drawn
    uniformly on the unit sphere (callers pruning/training overwrite W with
    their own restricted draws)."""
    if m < 1:
        raise ValueError("need m >= 1")
    rng = np.random.default_rng(seed)
    a_half = rng.integers(0, 2, size=m) * 2.0 - 1.0
    b_half = rng.standard_normal(m)
    G = rng.standard_normal((m, d))
    W_half = G / np.linalg.norm(G, axis=1, keepdims=True)
    return NetParams(
        a=mirror(a_half, negate=True),
        W=mirror(W_half),
        b=mirror(b_half),
        m=m,
    )


def forward(net: NetParams, x: np.ndarray):
    """y_hat(x) = <a, phi(W x + b)>; accepts one point (d,) or a batch (n, d)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != net.d:
        raise ValueError(f"input dimension {x.shape[-1]} != network dimension {net.d}")
    pre = x @ net.W.T + net.b
    out = relu(pre) @ net.a
    return float(out) if x.ndim == 1 else out


def empirical_risk(net: NetParams, data: Dataset) -> float:
    """R_n = (1/2n) sum (y_hat(x_i) - y_i)^2."""
    if data.n == 0:
        raise ValueError("empty dataset")
    resid = forward(net, data.X) - data.y
    return float(resid @ resid) / (2 * data.n)


def grad_w_row(data: Dataset, a_j: float, w: np.ndarray, b_j: float) -> np.ndarray:
    """First-layer risk gradient for one row at symmetric initialization:

        (-a_j / n) sum_i y_i x_i phi'(<w, x_i> + b_j).

    Valid whenever the network output vanishes, which every call site
    (probing, one-step training) guarantees via the pairing.
    """
    act = relu_prime(data.X @ w + b_j)
    return (-a_j / data.n) * (data.X.T @ (data.y * act))


def grad_even_odd(data: Dataset, a: np.ndarray, e_bar: np.ndarray, b: np.ndarray, sign: str) -> np.ndarray:
    """Per-neuron gradients with every first-layer row equal to `e_bar`,
    computed against one parity component of the activation.

    sign '-' keeps the odd Hermite components of t -> phi(t + b_j) (kernel
    0.5*[phi'(t+b) + phi'(-t+b)], even in t); sign '+' keeps the even
    components (kernel 0.5*[phi'(t+b) - phi'(-t+b)]).  Equivalently the '-'
    part is the half-sum of the full gradients at the probes +/- e_bar and
    the '+' part the half-difference, so '+' plus '-' recovers the full
    gradient at e_bar.  Returns a (2m, d) array of rows.
    """
    if sign not in ("+", "-"):
        raise ValueError("sign must be '+' or '-'")
    t = data.X @ e_bar
    # indicator pieces: u_plus = phi'(t + b_j), u_minus = phi'(-t + b_j)
    u_plus = (t[:, None] + b[None, :]) > 0
    u_minus = (b[None, :] - t[:, None]) > 0
    if sign == "-":
        kern = 0.5 * (u_plus.astype(float) + u_minus.astype(float))
    else:
        kern = 0.5 * (u_plus.astype(float) - u_minus.astype(float))
    G = data.X.T @ (data.y[:, None] * kern)  # (d, 2m)
    return (-(a / data.n))[:, None] * G.T


def grad_a(net: NetParams, data: Dataset) -> np.ndarray:
    """Risk gradient with respect to the output weights:
    (1/n) sum_i (y_hat_i - y_i) phi(W x_i + b)."""
    feats = relu(data.X @ net.W.T + net.b)
    resid = feats @ net.a - data.y
    return feats.T @ resid / data.n
