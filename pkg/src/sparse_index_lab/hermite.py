"""One-dimensional Hermite polynomial machinery.

Everything here uses the probabilists' polynomials He_k, orthogonal under
the standard Gaussian with E[He_j He_k] = k! delta_jk.

Convention used throughout the package: a polynomial link sigma is stored
through coefficients gamma_k with

    sigma(t) = sum_k (gamma_k / k!) * He_k(t).

Mind the 1/k!: the alternative convention sigma = sum gamma_k He_k silently
rescales every test that involves the information exponent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

# Relative tolerance for deciding that a Hermite coefficient is zero.  The
# basis change below is exact on exact inputs, so this only guards float
# noise from upstream arithmetic.
COEFF_REL_TOL = 1e-10

MAX_EXACT_DEGREE = 32


@lru_cache(maxsize=None)
def he_monomial_coeffs(k: int) -> tuple[int, ...]:
    """Integer coefficients of He_k in the monomial basis, constant first.

    Computed once through the recurrence He_{k+1} = t He_k - k He_{k-1}
    with Python integers, so the table is exact at any degree.
    """
    if k < 0:
        raise ValueError("degree must be non-negative")
    if k == 0:
        return (1,)
    if k == 1:
        return (0, 1)
    prev2, prev = he_monomial_coeffs(k - 2), he_monomial_coeffs(k - 1)
    out = [0] * (k + 1)
    for j, c in enumerate(prev):  # t * He_{k-1}
        out[j + 1] += c
    for j, c in enumerate(prev2):  # -(k-1) * He_{k-2}
        out[j] -= (k - 1) * c
    return tuple(out)


def he_eval(k: int, t):
    """Evaluate He_k(t) by the three-term recurrence.

    He_0 = 1, He_1 = t, He_{k+1}(t) = t He_k(t) - k He_{k-1}(t).
    Accepts scalars or arrays.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    t = np.asarray(t, dtype=float)
    prev = np.ones_like(t)
    if k == 0:
        return prev if prev.ndim else float(prev)
    cur = t.copy()
    for j in range(1, k):
        prev, cur = cur, t * cur - j * prev
    return cur if cur.ndim else float(cur)


def relu_shift_coeff(k: int, b: float) -> float:
    """Hermite coefficient rho_k(b) of the shifted ReLU t -> max(t + b, 0).

    rho_1(b) = 1 - Phi(-b) and rho_k(b) = exp(-b^2/2)/sqrt(2 pi) * He_{k-2}(-b)
    for k >= 2, with Phi the standard normal CDF.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1:
        return 0.5 * math.erfc(-b / math.sqrt(2.0))
    return math.exp(-b * b / 2.0) / math.sqrt(2.0 * math.pi) * he_eval(k - 2, -b)


def to_hermite(monomial_coeffs) -> list[float]:
    """Change of basis: monomial coefficients -> gamma_0..gamma_p.

    Solves sum_k (gamma_k / k!) He_k = sum_k c_k t^k by back-substitution
    against the exact integer expansion of He_k (the polynomials are monic,
    so the triangular system has unit diagonal).  No quadrature involved.
    """
    c = [float(x) for x in monomial_coeffs]
    if not c:
        return [0.0]
    p = len(c) - 1
    scaled = [0.0] * (p + 1)  # gamma_k / k!
    residual = c[:]
    for k in range(p, -1, -1):
        coeff = residual[k]
        scaled[k] = coeff
        if coeff != 0.0:
            for j, hk in enumerate(he_monomial_coeffs(k)):
                residual[j] -= coeff * hk
    return [scaled[k] * math.factorial(k) for k in range(p + 1)]


def to_monomial(hermite_coeffs) -> list[float]:
    """Inverse basis change: gamma_0..gamma_p -> monomial coefficients."""
    g = [float(x) for x in hermite_coeffs]
    p = len(g) - 1
    out = [0.0] * (p + 1)
    for k, gk in enumerate(g):
        if gk == 0.0:
            continue
        scale = gk / math.factorial(k)
        for j, hk in enumerate(he_monomial_coeffs(k)):
            out[j] += scale * hk
    return out


@dataclass(frozen=True)
class LinkSpec:
    """Polynomial link sigma(t) = sum c_k t^k = sum (gamma_k/k!) He_k(t).

    ``info_exponent`` is the smallest k >= 1 with gamma_k nonzero (None when
    every gamma_k, k >= 1 vanishes above tolerance).
    """

    monomial_coeffs: tuple[float, ...]
    hermite_coeffs: tuple[float, ...]
    info_exponent: int | None
    degree: int

    def eval(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for k in range(self.degree, -1, -1):
            out = out * t + self.monomial_coeffs[k]
        return out if out.ndim else float(out)

    def gamma_scaled(self) -> np.ndarray:
        """gamma_k / k! for k = 0..p, the coefficients multiplying He_k."""
        return np.array(
            [g / math.factorial(k) for k, g in enumerate(self.hermite_coeffs)]
        )


def _info_exponent(gammas, tol: float | None) -> int | None:
    mags = [abs(g) for g in gammas[1:]]
    if not mags:
        return None
    if tol is None:
        top = max(abs(g) for g in gammas)
        tol = COEFF_REL_TOL * top if top > 0 else 0.0
    for k, g in enumerate(gammas[1:], start=1):
        if abs(g) > tol:
            return k
    return None


def link_from_monomial(coeffs, tol: float | None = None) -> LinkSpec:
    c = tuple(float(x) for x in coeffs)
    if not c:
        raise ValueError("empty coefficient list")
    g = tuple(to_hermite(c))
    return LinkSpec(c, g, _info_exponent(g, tol), len(c) - 1)


def link_from_hermite(gammas, tol: float | None = None) -> LinkSpec:
    g = tuple(float(x) for x in gammas)
    if not g:
        raise ValueError("empty coefficient list")
    c = tuple(to_monomial(g))
    return LinkSpec(c, g, _info_exponent(g, tol), len(g) - 1)


def normalize_link(spec: LinkSpec) -> LinkSpec:
    """Center and scale so that E[sigma(Z)] = 0 and E[sigma(Z)^2] = 1.

    By orthogonality E[sigma(Z)] = gamma_0 and
    E[sigma(Z)^2] = sum_{k>=1} gamma_k^2 / k! once gamma_0 = 0.
    """
    g = list(spec.hermite_coeffs)
    g[0] = 0.0
    sq = sum(gk * gk / math.factorial(k) for k, gk in enumerate(g) if k >= 1)
    if sq <= 0.0:
        raise ValueError("cannot normalize a link with no nonzero gamma_k, k >= 1")
    scale = math.sqrt(sq)
    return link_from_hermite([gk / scale for gk in g])


def information_exponent(spec: LinkSpec, tol: float | None = None) -> int:
    """Smallest k >= 1 with |gamma_k| above tolerance; rejects degenerate links."""
    k = _info_exponent(spec.hermite_coeffs, tol)
    if k is None:
        raise ValueError("degenerate link: no Hermite coefficient above tolerance")
    return k


@lru_cache(maxsize=32)
def _gh_nodes(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    if nodes <= 150:
        return np.polynomial.hermite_e.hermegauss(nodes)
    # numpy's hermegauss overflows beyond ~200 nodes; fall back to the
    # Golub-Welsch eigenvalue construction of the same rule.
    J = np.diag(np.sqrt(np.arange(1, nodes)), 1)
    J = J + J.T
    vals, vecs = np.linalg.eigh(J)
    weights = math.sqrt(2.0 * math.pi) * vecs[0] ** 2
    return vals, weights


def gauss_hermite_expect(f, nodes: int) -> float:
    """Gauss-Hermite estimate of E[f(Z)], Z standard normal.

    Exact for polynomial integrands of degree <= 2*nodes - 1.
    """
    if nodes < 2:
        raise ValueError("nodes must be >= 2")
    x, w = _gh_nodes(nodes)
    vals = np.asarray(f(x), dtype=float)
    if vals.shape != x.shape:
        vals = np.array([float(f(xi)) for xi in x])
    return float(vals @ w / math.sqrt(2.0 * math.pi))
