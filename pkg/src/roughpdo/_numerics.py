"""Small numerical helpers shared across modules."""

from __future__ import annotations

import itertools
from math import comb, factorial

import numpy as np


def as_multi(alpha, n: int) -> tuple[int, ...]:
    if alpha is None:
        return (0,) * n
    if np.isscalar(alpha):
        if n != 1:
            raise ValueError("scalar multi-index only allowed in one dimension")
        return (int(alpha),)
    out = tuple(int(a) for a in alpha)
    if len(out) != n:
        raise ValueError(f"multi-index {out} has wrong length for dimension {n}")
    if any(a < 0 for a in out):
        raise ValueError("multi-index entries must be nonnegative")
    return out


def multi_indices(n: int, order: int, exact: bool = False):
    """All multi-indices of length n with |alpha| <= order (or == order)."""
    for a in itertools.product(range(order + 1), repeat=n):
        s = sum(a)
        if s == order or (not exact and s < order):
            yield a


def sub_indices(alpha):
    """Pairs (gamma, prod binom(alpha_i, gamma_i)) for gamma <= alpha."""
    for g in itertools.product(*(range(a + 1) for a in alpha)):
        c = 1
        for a, b in zip(alpha, g):
            c *= comb(a, b)
        yield g, c


def mfactorial(alpha) -> int:
    out = 1
    for a in alpha:
        out *= factorial(a)
    return out


def as_points(p, n: int) -> np.ndarray:
    """Coerce to an array of points with trailing axis n."""
    arr = np.asarray(p, dtype=float)
    if n == 1 and (arr.ndim == 0 or arr.shape[-1] != 1):
        arr = arr[..., None]
    if arr.shape[-1] != n:
        raise ValueError(f"points need trailing axis of length {n}, got shape {arr.shape}")
    return arr


def falling(p: float, j: int) -> float:
    out = 1.0
    for i in range(j):
        out *= p - i
    return out


def _square_chain_coeffs(a: int):
    # d^a/dt^a G(t^2) = sum_j c_{a,j} (2t)^{2j-a} G^{(j)}(t^2)
    return [(j, factorial(a) // (factorial(2 * j - a) * factorial(a - j))) for j in range((a + 1) // 2, a + 1)]


def square_chain(xi: np.ndarray, G, alpha) -> np.ndarray:
    """d_xi^alpha G(|xi|^2) given ``G(s, j)``, the j-th derivative of G at s."""
    n = xi.shape[-1]
    alpha = as_multi(alpha, n)
    s = np.sum(xi**2, axis=-1)
    if not any(alpha):
        return G(s, 0)
    out = np.zeros(xi.shape[:-1])
    for combo in itertools.product(*[_square_chain_coeffs(a) for a in alpha]):
        term = G(s, sum(j for j, _ in combo))
        for axis, ((j, c), a) in enumerate(zip(combo, alpha)):
            term = term * c * (2 * xi[..., axis]) ** (2 * j - a)
        out = out + term
    return out


def bracket_power(xi: np.ndarray, p: float, alpha=None) -> np.ndarray:
    """d_xi^alpha <xi>^p for points xi of shape (..., n)."""
    return square_chain(xi, lambda s, j: falling(p / 2, j) * (1.0 + s) ** (p / 2 - j), alpha)


def central_difference(f, x, xi, alpha, beta, hx, hxi):
    """Mixed central differences with one Richardson step.

    ``f(x, xi)`` is evaluated at shifted copies of ``x`` and ``xi`` (trailing
    axis n).  ``hx`` and ``hxi`` broadcast against the leading axes.
    """

    def stencil(h_x, h_xi):
        shifts = []
        for axis, k in enumerate(alpha):
            shifts.append(("xi", axis, k))
        for axis, k in enumerate(beta):
            shifts.append(("x", axis, k))
        active = [s for s in shifts if s[2] > 0]
        total = 0.0
        for js in itertools.product(*(range(k + 1) for _, _, k in active)):
            xx = np.array(x, dtype=float, copy=True)
            qq = np.array(xi, dtype=float, copy=True)
            w = 1.0
            for (kind, axis, k), j in zip(active, js):
                h = h_xi if kind == "xi" else h_x
                off = (k / 2 - j) * h
                if kind == "xi":
                    qq[..., axis] = qq[..., axis] + off
                else:
                    xx[..., axis] = xx[..., axis] + off
                w = w * (-1) ** j * comb(k, j)
            total = total + np.asarray(w)[..., None, None] * f(xx, qq)
        scale = 1.0
        for kind, axis, k in active:
            h = h_xi if kind == "xi" else h_x
            scale = scale * np.asarray(h) ** k
        return total / np.asarray(scale)[..., None, None]

    coarse = stencil(hx, hxi)
    fine = stencil(np.asarray(hx) / 2, np.asarray(hxi) / 2)
    return (4 * fine - coarse) / 3


def loglog_fit(xs, ys):
    """Least-squares slope of log2(ys) against log2(xs); returns (slope, rms)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    keep = ys > 0
    if not np.any(keep):
        return -np.inf, 0.0
    lx, ly = np.log2(xs[keep]), np.log2(ys[keep])
    if lx.size < 2 or np.ptp(lx) == 0:
        return 0.0, 0.0
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ coef
    return float(coef[0]), float(np.sqrt(np.mean(resid**2)))
