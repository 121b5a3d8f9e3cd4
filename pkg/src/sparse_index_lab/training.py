"""Restricted re-initialization, one large first-layer step, ridge output fit.

The first-layer update uses weight decay lambda_1 = 1/eta_1, under which

    W1_j = W0_j - eta_1 (grad_j|_J + (1/eta_1) W0_j) = -eta_1 * grad_j|_J

exactly; the implementation computes the right-hand side directly so the
cancellation is algebraic, not a float coincidence.  The second layer is
trained by gradient descent on the ridge objective from a = 0 with the step
size 1/(L + lambda_t), L the empirical feature smoothness, stopping at a
gradient-norm tolerance.

In multi-index mode an estimate of the first Hermite component,
mu_hat = (1/n) sum y_i x_i restricted to the recovered support, is
subtracted from the labels before the first-layer step and added back at
prediction time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .model import Dataset
from .network import NetParams, grad_w_row, mirror, relu
from .pruning import PruneConfig, SupportSet, prune_network

PREDICTOR_HEADER = "sparse-index-lab/predictor v1"


@dataclass(frozen=True)
class TrainConfig:
    M: int
    c: float
    m: int
    mode: str = "single"  # or "multi"
    seed: int = 0
    eta1: float | None = None  # default kappa * M^((k*-1)/2) (single), kappa * M (multi)
    kappa: float = 1.0
    k_star: int = 2
    lambda_t: float | None = None  # default m / log(d)^2
    T_max: int | None = None  # default 50 * ceil(log(n m))
    grad_tol: float | None = None  # default 1e-8 * (1 + |objective at start|)
    line3_probe: int | None = None

    def __post_init__(self):
        if self.mode not in ("single", "multi"):
            raise ValueError("mode must be 'single' or 'multi'")
        if self.eta1 is not None and self.eta1 <= 0:
            raise ValueError("eta1 must be positive")

    def resolve_eta1(self) -> float:
        if self.eta1 is not None:
            return self.eta1
        if self.mode == "multi":
            return self.kappa * self.M
        return self.kappa * self.M ** ((self.k_star - 1) / 2)

    @property
    def lambda1(self) -> float:
        # enforced identity: weight decay inverse to the step size
        return 1.0 / self.resolve_eta1()


@dataclass(frozen=True)
class Predictor:
    """Trained network plus the linear correction term; everything outside
    the recovered support is exactly zero."""

    a_final: np.ndarray  # (2m,)
    W1: np.ndarray  # (2m, d)
    b1: np.ndarray  # (2m,)
    mu_hat_J: np.ndarray  # (d,), zero in single mode
    J: SupportSet


def _sub_seed(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence(entropy=seed, spawn_key=(stream,)).generate_state(1)[0])


def restricted_reinit(J: SupportSet, m: int, d: int, seed: int) -> NetParams:
    """Fresh symmetric (a, b); first-layer rows uniform on the unit sphere
    of the coordinates in J, mirrored pairwise."""
    idx = np.asarray(J.indices, dtype=int)
    if idx.size == 0:
        raise ValueError("empty support")
    rng = np.random.default_rng(seed)
    a_half = rng.integers(0, 2, size=m) * 2.0 - 1.0
    b_half = rng.standard_normal(m)
    G = rng.standard_normal((m, idx.size))
    G /= np.linalg.norm(G, axis=1, keepdims=True)
    W_half = np.zeros((m, d))
    W_half[:, idx] = G
    return NetParams(a=mirror(a_half, negate=True), W=mirror(W_half), b=mirror(b_half), m=m)


def first_layer_step(data: Dataset, net: NetParams, J: SupportSet, eta1: float, mode: str = "single") -> np.ndarray:
    """One large gradient step on the first layer: W1_j = -eta_1 grad_j|_J.

    In multi mode the caller has already subtracted the linear correction
    from the labels.  Mirrored pairs come out as exact negations of each
    other because the gradient carries the output weight's sign.
    """
    idx = np.asarray(J.indices, dtype=int)
    W1 = np.zeros_like(net.W)
    for j in range(2 * net.m):
        g = grad_w_row(data, net.a[j], net.W[j], net.b[j])
        W1[j, idx] = -eta1 * g[idx]
    return W1


def second_layer_fit(
    data: Dataset,
    W1: np.ndarray,
    m: int,
    lambda_t: float,
    T_max: int,
    grad_tol: float | None,
    seed: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient descent on R_n(a) + (lambda_t/2)||a||^2 from a = 0.

    Fresh symmetric bias draw; step size 1/(L + lambda_t) with
    L = (1/n) sum_i ||phi(W1 x_i + b1)||^2, an upper bound on the smoothness
    of the quadratic part, so the objective decreases monotonically.
    """
    rng = np.random.default_rng(seed)
    b1 = mirror(rng.standard_normal(m))
    feats = relu(data.X @ W1.T + b1)  # (n, 2m)
    n = data.n
    L = float(np.einsum("ij,ij->", feats, feats)) / n
    if not math.isfinite(L):
        raise ArithmeticError("non-finite features; first-layer step exploded")
    step = 1.0 / (L + lambda_t)
    a = np.zeros(2 * m)
    resid = -data.y
    obj = float(resid @ resid) / (2 * n)
    if grad_tol is None:
        grad_tol = 1e-8 * (1.0 + abs(obj))
    for _ in range(T_max):
        grad = feats.T @ resid / n + lambda_t * a
        gnorm = float(np.linalg.norm(grad))
        if not math.isfinite(gnorm):
            raise ArithmeticError("non-finite objective in second-layer descent")
        if gnorm <= grad_tol:
            break
        a = a - step * grad
        resid = feats @ a - data.y
    return a, b1


def fit(data: Dataset, cfg: TrainConfig, force_full_support: bool = False) -> Predictor:
    """Full pipeline: prune, (multi mode) subtract the linear component,
    re-initialize on the support, one first-layer step, ridge output fit.

    `force_full_support` skips pruning and uses J = all coordinates — the
    unpruned baseline with everything else identical.
    """
    if not data.augmented:
        raise ValueError("fit requires augmented data")
    n, d = data.X.shape
    if force_full_support:
        J = SupportSet(indices=tuple(range(d)), source={i: ("forced",) for i in range(d)})
    else:
        J = prune_network(
            data,
            PruneConfig(M=cfg.M, c=cfg.c, m=cfg.m, seed=_sub_seed(cfg.seed, 0), line3_probe=cfg.line3_probe),
        )

    mu_hat_J = np.zeros(d)
    work = data
    if cfg.mode == "multi":
        mu = data.X.T @ data.y / n
        idx = np.asarray(J.indices, dtype=int)
        mu_hat_J[idx] = mu[idx]
        work = replace(data, y=data.y - data.X @ mu_hat_J)

    net0 = restricted_reinit(J, cfg.m, d, _sub_seed(cfg.seed, 1))
    W1 = first_layer_step(work, net0, J, cfg.resolve_eta1(), cfg.mode)

    lambda_t = cfg.lambda_t if cfg.lambda_t is not None else cfg.m / math.log(d) ** 2
    T_max = cfg.T_max if cfg.T_max is not None else 50 * math.ceil(math.log(n * cfg.m))
    a_final, b1 = second_layer_fit(work, W1, cfg.m, lambda_t, T_max, cfg.grad_tol, _sub_seed(cfg.seed, 2))
    return Predictor(a_final=a_final, W1=W1, b1=b1, mu_hat_J=mu_hat_J, J=J)


def predict(p: Predictor, x: np.ndarray):
    """<mu_hat|_J, x> + <a, phi(W1 x + b1)> on augmented inputs."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != p.W1.shape[1]:
        raise ValueError(f"input dimension {x.shape[-1]} != predictor dimension {p.W1.shape[1]}")
    out = x @ p.mu_hat_J + relu(x @ p.W1.T + p.b1) @ p.a_final
    return float(out) if x.ndim == 1 else out


def excess_risk(p: Predictor, model, n_test: int, seed: int) -> float:
    """Monte-Carlo E[(y_hat - y)^2] - Delta on fresh augmented data."""
    from .model import augment, sample_dataset

    test = augment(sample_dataset(model, n_test, seed), _sub_seed(seed, 7))
    resid = predict(p, test.X) - test.y
    return float(resid @ resid) / n_test - model.noise_delta


def save_predictor(p: Predictor, path) -> None:
    """Versioned text bundle; floats in shortest round-trip form."""
    idx = np.asarray(p.J.indices, dtype=int)
    with open(path, "w") as fh:
        fh.write(PREDICTOR_HEADER + "\n")
        fh.write(f"d {p.W1.shape[1]} m {p.W1.shape[0] // 2}\n")
        fh.write("J " + " ".join(str(i) for i in p.J.indices) + "\n")
        fh.write("mu " + " ".join(f"{i}:{float(p.mu_hat_J[i])!r}" for i in idx) + "\n")
        fh.write("a " + " ".join(repr(float(v)) for v in p.a_final) + "\n")
        fh.write("b " + " ".join(repr(float(v)) for v in p.b1) + "\n")
        for j in range(p.W1.shape[0]):
            fh.write(f"W {j} " + " ".join(f"{i}:{float(p.W1[j, i])!r}" for i in idx) + "\n")


def load_predictor(path) -> Predictor:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != PREDICTOR_HEADER:
            raise ValueError(f"unrecognized predictor file (header {header!r})")
        parts = fh.readline().split()
        d, m = int(parts[1]), int(parts[3])
        J_line = fh.readline().split()[1:]
        indices = tuple(int(i) for i in J_line)
        mu = np.zeros(d)
        for tok in fh.readline().split()[1:]:
            i, _, v = tok.partition(":")
            mu[int(i)] = float(v)
        a = np.array([float(v) for v in fh.readline().split()[1:]])
        b = np.array([float(v) for v in fh.readline().split()[1:]])
        W = np.zeros((2 * m, d))
        for line in fh:
            toks = line.split()
            if not toks or toks[0] != "W":
                continue
            j = int(toks[1])
            for tok in toks[2:]:
                i, _, v = tok.partition(":")
                W[j, int(i)] = float(v)
    return Predictor(a_final=a, W1=W, b1=b, mu_hat_J=mu, J=SupportSet(indices=indices, source={}))
