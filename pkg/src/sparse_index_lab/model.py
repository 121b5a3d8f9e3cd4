"""Statistical models: sparse directions, sampling, augmentation.

A model is y = sigma(V^T x) + sqrt(Delta) * eps with x ~ N(0, I_d), V a
d x r orthonormal matrix and eps standard normal (one valid sub-Gaussian
noise; nothing downstream depends on the tail constant).  Multi-index
links are additive across columns: sigma(z) = sum_j sigma_j(z_j), which
covers the additive Hermite family and every fixture in this package.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .hermite import LinkSpec

ORTHO_TOL = 1e-10


@dataclass(frozen=True)
class IndexModel:
    """Direction matrix V (d x r), one polynomial link per column, noise level."""

    V: np.ndarray
    links: tuple[LinkSpec, ...]
    noise_delta: float = 0.0

    def __post_init__(self):
        V = np.atleast_2d(np.asarray(self.V, dtype=float))
        if V.shape[0] < V.shape[1]:
            raise ValueError("need r <= d")
        object.__setattr__(self, "V", V)
        links = self.links
        if isinstance(links, LinkSpec):
            links = (links,)
        links = tuple(links)
        if len(links) != V.shape[1]:
            raise ValueError("need one link per column of V")
        object.__setattr__(self, "links", links)
        gram = V.T @ V
        if np.max(np.abs(gram - np.eye(V.shape[1]))) > ORTHO_TOL:
            raise ValueError("V must have orthonormal columns")
        if self.noise_delta < 0:
            raise ValueError("noise level must be non-negative")

    @property
    def d(self) -> int:
        return self.V.shape[0]

    @property
    def r(self) -> int:
        return self.V.shape[1]

    def link_sum(self, Z: np.ndarray) -> np.ndarray:
        """Evaluate sigma(z) = sum_j sigma_j(z_j) row-wise on Z (n x r)."""
        Z = np.atleast_2d(Z)
        out = np.zeros(Z.shape[0])
        for j, link in enumerate(self.links):
            out += link.eval(Z[:, j])
        return out


@dataclass(frozen=True)
class Dataset:
    """Feature matrix (n x d) with labels; `augmented` marks the appended
    non-informative last coordinate."""

    X: np.ndarray
    y: np.ndarray
    augmented: bool = False
    seed: int = 0

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def make_sparse_direction(d: int, s: int, profile: str = "flat", eps: float | None = None) -> np.ndarray:
    """Unit vector with s-sparse support on the first coordinates.

    flat:          first s entries equal 1/sqrt(s)
    dominated(eps): first entry sqrt(1 - (s-1) eps^2), next s-1 entries eps
    """
    if not 1 <= s <= d:
        raise ValueError("need 1 <= s <= d")
    v = np.zeros(d)
    if profile == "flat":
        v[:s] = 1.0 / np.sqrt(s)
    elif profile == "dominated":
        if eps is None or not 0.0 < eps < s ** -0.5:
            raise ValueError("dominated profile needs 0 < eps < 1/sqrt(s)")
        v[0] = np.sqrt(1.0 - (s - 1) * eps * eps)
        v[1:s] = eps
    else:
        raise ValueError(f"unknown profile {profile!r}")
    return v


def make_sparse_frame(d: int, r: int, s: int, seed: int = 0) -> np.ndarray:
    """Orthonormal d x r frame, column j flat s-sparse inside coordinate
    block j of size floor(d/r).  Support positions are shuffled within each
    block so nothing aligns with basis-dependent baselines by accident."""
    if r * s > d:
        raise ValueError("need r * s <= d")
    block = d // r
    if s > block:
        raise ValueError("sparsity exceeds block size")
    rng = np.random.default_rng(seed)
    V = np.zeros((d, r))
    for j in range(r):
        idx = rng.permutation(block)[:s] + j * block
        V[idx, j] = 1.0 / np.sqrt(s)
    return V


def soft_sparsity(V: np.ndarray, q: float) -> float:
    """Row-wise sparsity functional ||V||_{2,q}^q = sum_i ||V_{i*}||_2^q.

    q = 0 counts nonzero rows (the convention ||.||_{2,0}^0 := ||.||_{2,0}).
    Rejects q >= 2, where the functional stops measuring sparsity.
    """
    if not 0.0 <= q < 2.0:
        raise ValueError("need q in [0, 2)")
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if V.shape[0] < V.shape[1]:
        V = V.T
    row_norms = np.linalg.norm(V, axis=1)
    if q == 0.0:
        return float(np.count_nonzero(row_norms))
    return float(np.sum(row_norms**q))


def sample_dataset(model: IndexModel, n: int, seed: int) -> Dataset:
    """n iid samples; bitwise reproducible for equal (model, n, seed)."""
    if n < 1:
        raise ValueError("need n >= 1")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, model.d))
    y = model.link_sum(X @ model.V)
    if model.noise_delta > 0:
        y = y + np.sqrt(model.noise_delta) * rng.standard_normal(n)
    return Dataset(X=X, y=y, augmented=False, seed=seed)


def augment(data: Dataset, seed: int) -> Dataset:
    """Append one iid standard-normal coordinate (independent of y)."""
    if data.augmented:
        raise ValueError("dataset is already augmented")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((data.n, 1))
    return replace(data, X=np.hstack([data.X, z]), augmented=True)


def check_assumption_full_rank(
    link: Sequence[LinkSpec] | Callable[[np.ndarray], np.ndarray],
    r: int,
    mc_samples: int = 10**6,
    seed: int = 0,
    tol: float = 1e-2,
) -> tuple[np.ndarray, bool]:
    """Monte-Carlo estimate of D = E[sigma(z) z z^T], z ~ N(0, I_r), and
    whether its smallest singular value clears `tol` (non-degeneracy).

    `link` is either a list of per-coordinate LinkSpecs (additive link) or a
    callable mapping an (n x r) array of z's to n link values.
    """
    rng = np.random.default_rng(seed)
    D = np.zeros((r, r))
    remaining = int(mc_samples)
    chunk = 1 << 17
    while remaining > 0:
        m = min(chunk, remaining)
        Z = rng.standard_normal((m, r))
        if callable(link):
            s = np.asarray(link(Z), dtype=float)
        else:
            s = np.zeros(m)
            for j, lk in enumerate(link):
                s += lk.eval(Z[:, j])
        D += (Z * s[:, None]).T @ Z
        remaining -= m
    D /= mc_samples
    smin = float(np.linalg.svd(D, compute_uv=False)[-1])
    return D, smin > tol


def dataset_to_csv(data: Dataset, path) -> None:
    """CSV with header x_1,...,x_d,y; shortest round-trip decimals."""
    d = data.d
    header = ",".join([f"x_{i + 1}" for i in range(d)] + ["y"])
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row, yi in zip(data.X, data.y):
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("," + repr(float(yi)) + "\n")


def dataset_from_csv(path, augmented: bool = False, seed: int = 0) -> Dataset:
    arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if arr.shape[1] < 2:
        raise ValueError("expected at least one feature column plus labels")
    return Dataset(X=arr[:, :-1], y=arr[:, -1], augmented=augmented, seed=seed)
