"""Littlewood-Paley cutoffs and the frequency mollifier J_eps = phi(eps D_x).

Cutoffs are radial and parametrized in u = |xi|^2: chi(xi) = q(|xi|^2) with
q = 1 on u <= 1 and q = 0 on u >= 4.  The square-chain rule then gives exact
partial derivatives in any dimension.

Partition convention: psi_0 = chi and, for j >= 1,
psi_j(xi) = chi(2^-j xi) - chi(2^-(j-1) xi), so sum_{j<=J} psi_j = chi(2^-J xi).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial

import numpy as np

from ._numerics import as_multi, loglog_fit, square_chain, sub_indices
from .errors import ParameterError
from .grid import Grid, GridFunction, fourier_multiplier, spectral_derivative
from .symbol_core import holder_norm_estimate

PROFILES = ("exp_bump", "poly_bump")


def _exp_step(t: np.ndarray, k: int) -> np.ndarray:
    """k-th derivative of S(t) = f(t)/(f(t) + f(1-t)), f(t) = exp(-1/t)."""

    def f(s, order):
        # derivatives of exp(-1/s) by the recurrence f' = g' f with g = -1/s
        pos = s > 0
        ss = np.where(pos, s, 1.0)
        vals = [np.where(pos, np.exp(-1.0 / ss), 0.0)]
        g = [None] + [-((-1) ** i) * factorial(i) / ss ** (i + 1) for i in range(1, order + 1)]
        for n in range(1, order + 1):
            acc = sum(comb(n - 1, i) * g[i + 1] * vals[n - 1 - i] for i in range(n))
            vals.append(np.where(pos, acc, 0.0))
        return vals

    fa = f(t, k)
    fb = [(-1) ** i * v for i, v in enumerate(f(1.0 - t, k))]
    den = [a + b for a, b in zip(fa, fb)]
    s = []
    for n in range(k + 1):
        acc = fa[n] - sum(comb(n, i) * s[i] * den[n - i] for i in range(n))
        s.append(acc / den[0])
    return s[k]


def _poly_step(t: np.ndarray, k: int) -> np.ndarray:
    """Quintic smoothstep 6t^5 - 15t^4 + 10t^3 (C^2 at the joins)."""
    c = np.array([0.0, 0.0, 0.0, 10.0, -15.0, 6.0])
    c = np.polynomial.polynomial.polyder(c, k) if k else c
    inside = np.polynomial.polynomial.polyval(t, c)
    outside = 1.0 if k == 0 else 0.0
    return np.where(t <= 0, 0.0, np.where(t >= 1, outside, inside))


@dataclass(frozen=True)
class RadialCutoff:
    """chi(xi) = q(|xi|^2), q(u) = 1 - S((u - 1)/3)."""

    profile: str = "exp_bump"

    def q(self, u, k: int = 0):
        step = _exp_step if self.profile == "exp_bump" else _poly_step
        t = (np.asarray(u, dtype=float) - 1.0) / 3.0
        t = np.clip(t, -1.0, 2.0)
        v = step(t, k) / 3.0**k
        return 1.0 - v if k == 0 else -v

    def __call__(self, xi, alpha=None):
        """d_xi^alpha chi at points xi of shape (..., n)."""
        xi = np.asarray(xi, dtype=float)
        return square_chain(xi, self.q, alpha)

    def radial(self, r, k: int = 0):
        """k-th derivative of chi along a ray, r >= 0."""
        r = np.asarray(r, dtype=float)
        return square_chain(r[..., None], self.q, (k,))


@dataclass(frozen=True)
class CutoffPair:
    phi: RadialCutoff
    psi0: RadialCutoff

    @property
    def profile(self):
        return self.phi.profile


def build_cutoffs(profile: str = "exp_bump") -> CutoffPair:
    """phi and psi0, both equal to 1 on |xi| <= 1 and vanishing on |xi| >= 2.

    ``exp_bump`` is C-infinity; ``poly_bump`` is only C^2 and its third
    derivative jumps at |xi| = 1 and 2.
    """
    if profile not in PROFILES:
        raise ParameterError(f"unknown cutoff profile {profile!r}; use one of {PROFILES}")
    c = RadialCutoff(profile)
    return CutoffPair(phi=c, psi0=c)


@dataclass(frozen=True)
class DyadicPartition:
    cutoffs: CutoffPair
    J_max: int
    gamma: float = 0.5

    def __post_init__(self):
        if self.J_max < 1:
            raise ParameterError("J_max must be at least 1")
        if not 0 < self.gamma <= 1:
            raise ParameterError("gamma must lie in (0, 1]")

    def eps(self, j: int) -> float:
        return 2.0 ** (-j * self.gamma)


def default_J_max(grid: Grid) -> int:
    """log2(P/2) - 1: the top annulus stays below the Nyquist frequency."""
    return int(np.log2(grid.points / 2)) - 1


def make_partition(grid: Grid | None = None, profile: str = "exp_bump", J_max: int | None = None, gamma: float = 0.5) -> DyadicPartition:
    if J_max is None:
        if grid is None:
            raise ParameterError("need a grid or an explicit J_max")
        J_max = default_J_max(grid)
    return DyadicPartition(build_cutoffs(profile), J_max, gamma)


def psi(partition: DyadicPartition, j: int, xi, alpha=None, tail: bool = False) -> np.ndarray:
    """d^alpha psi_j(xi).  With ``tail`` the top index absorbs all higher ones,
    psi_J = 1 - chi(2^-(J-1) xi), so the truncated sum is exactly 1."""
    if not 0 <= j <= partition.J_max:
        raise ParameterError(f"j = {j} outside 0..{partition.J_max}")
    xi = np.asarray(xi, dtype=float)
    if xi.ndim == 0:
        xi = xi[None]
    alpha = as_multi(alpha, xi.shape[-1])
    chi = partition.cutoffs.psi0
    order = sum(alpha)

    def scaled(k):
        return 2.0 ** (-k * order) * chi(2.0 ** (-k) * xi, alpha)

    if j == 0:
        return scaled(0)
    upper = (np.full(xi.shape[:-1], 0.0 if order else 1.0)) if (tail and j == partition.J_max) else scaled(j)
    return upper - scaled(j - 1)


def active(partition: DyadicPartition, xi) -> list[int]:
    """Indices j whose support annulus can meet the points xi."""
    r = np.sqrt(np.sum(np.asarray(xi, dtype=float) ** 2, axis=-1))
    lo, hi = float(np.min(r)), float(np.max(r))
    out = []
    for j in range(partition.J_max + 1):
        inner = 0.0 if j == 0 else 2.0 ** (j - 1)
        outer = np.inf if j == partition.J_max else 2.0 ** (j + 1)
        if hi >= inner and lo <= outer:
            out.append(j)
    return out


def psi_estimate_check(partition: DyadicPartition, order: int = 3, samples: int = 4000) -> dict:
    """Scan sup |d^alpha psi_j| <xi>^|alpha| over the support of psi_j, and the
    ratio 2^-j <xi> there, along a ray (the cutoffs are radial)."""
    consts = {k: [] for k in range(order + 1)}
    lo_ratio, hi_ratio = np.inf, 0.0
    for j in range(partition.J_max + 1):
        inner = 0.0 if j == 0 else 2.0 ** (j - 1)
        r = np.linspace(inner, 2.0 ** (j + 1), samples)[:, None]
        br = np.sqrt(1.0 + r[:, 0] ** 2)
        for k in range(order + 1):
            consts[k].append(float(np.max(np.abs(psi(partition, j, r, (k,))) * br**k)))
        ratio = 2.0 ** (-j) * br
        lo_ratio, hi_ratio = min(lo_ratio, ratio.min()), max(hi_ratio, ratio.max())
    return {
        "constants": {k: max(v) for k, v in consts.items()},
        "per_j": consts,
        "scale_ratio": (float(lo_ratio), float(hi_ratio)),
    }


def apply_J(eps: float, f: GridFunction, cutoffs: CutoffPair | None = None) -> GridFunction:
    """J_eps f = phi(eps D) f as a Fourier multiplier on the lattice."""
    if eps <= 0:
        raise ParameterError("eps must be positive")
    phi = (cutoffs or build_cutoffs()).phi
    return fourier_multiplier(f, phi(eps * f.grid.xi))


def j_epsilon_estimate_sweep(f: GridFunction, s: float, beta, eps_list, t: float | None = None, tol: float = 0.15, bound: float = 2.0, cutoffs: CutoffPair | None = None) -> dict:
    """Fitted log-log slopes in eps of the mollifier estimates.

    * J: for |beta| > s the slope of ||D^beta J_eps f||_inf must be at least
      -(|beta| - s); otherwise its ratio to ||f||_{C^s} must stay below ``bound``.
    * remainder (|beta| <= s): slope of ||D^beta (1 - J_eps) f||_inf >= s - |beta|.
    * Hölder slope (beta = 0 only): ||(1 - J_eps) f||_{C^{s-t}}, claimed >= t.
    """
    eps_list = sorted(float(e) for e in eps_list)
    if len(eps_list) < 4:
        raise ParameterError("need at least 4 eps values")
    g = f.grid
    beta = as_multi(beta, g.dim)
    order = sum(beta)
    t = s / 2 if t is None else t
    low, rem, hol = [], [], []
    for e in eps_list:
        smooth = apply_J(e, f, cutoffs)
        rough = f - smooth
        d_s = spectral_derivative(smooth, beta) if order else smooth
        d_r = spectral_derivative(rough, beta) if order else rough
        low.append(float(np.max(np.abs(d_s.values))))
        rem.append(float(np.max(np.abs(d_r.values))))
        if order == 0 and s - t > 0:
                hol.append(holder_norm_estimate(rough, 0, s - t, window=g.box / 8))
    j_slope, j_res = loglog_fit(eps_list, low)
    r_slope, r_res = loglog_fit(eps_list, rem)
    out = {
        "eps": eps_list,
        "J_norms": low,
        "remainder_norms": rem,
        "J_slope": j_slope,
        "J_residual": j_res,
        "remainder_slope": r_slope,
        "remainder_residual": r_res,
        "verdicts": {},
    }
    if order > s:
        out["J_claim"] = -(order - s)
        out["verdicts"]["J"] = bool(j_slope >= -(order - s) - tol)
    else:
        k = int(np.floor(s))
        ref = holder_norm_estimate(f, k, s - k, window=g.box / 8) if s > k else holder_norm_estimate(f, k, 0.5, window=g.box / 8)
        out["J_ratio"] = max(low) / ref if ref > 0 else 0.0
        out["verdicts"]["J"] = bool(out["J_ratio"] <= bound)
        out["remainder_claim"] = s - order
        out["verdicts"]["remainder"] = bool(r_slope >= s - order - tol or not np.isfinite(r_slope))
    if hol:
        h_slope, _ = loglog_fit(eps_list, hol)
        out.update(holder_norms=hol, holder_slope=h_slope, holder_claim=t)
        out["verdicts"]["holder"] = bool(h_slope >= t - tol or not np.isfinite(h_slope))
    return out


def leibniz_psi(partition: DyadicPartition, j: int, xi, alpha, tail: bool = True):
    """Pairs (gamma, binom * d^gamma psi_j) for the Leibniz rule in xi."""
    for g, c in sub_indices(alpha):
        yield g, c * psi(partition, j, xi, g, tail=tail)


__all__ = [
    "CutoffPair",
    "DyadicPartition",
    "RadialCutoff",
    "active",
    "apply_J",
    "build_cutoffs",
    "default_J_max",
    "j_epsilon_estimate_sweep",
    "make_partition",
    "psi",
    "psi_estimate_check",
]
