"""One-dimensional functions with exact derivative oracles.

Every profile is called as ``p(t, k)`` and returns the k-th derivative at
``t``.  They are the x-building blocks of the symbol gallery.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial

import numpy as np

from ._numerics import bracket_power


class Profile:
    name = "profile"

    def __call__(self, t, k: int = 0):
        raise NotImplementedError

    def __mul__(self, other):
        if np.isscalar(other):
            return Scaled(self, other)
        return Product(self, other)

    __rmul__ = __mul__

    def __add__(self, other):
        if np.isscalar(other):
            return Sum(self, Constant(other))
        return Sum(self, other)

    __radd__ = __add__


@dataclass
class Constant(Profile):
    value: complex = 1.0
    name = "constant"

    def __call__(self, t, k=0):
        t = np.asarray(t, dtype=float)
        return np.full(t.shape, self.value if k == 0 else 0.0, dtype=complex if np.iscomplexobj(self.value) else float)


@dataclass
class Cosine(Profile):
    """cos(freq * t + phase)."""

    freq: float = 1.0
    phase: float = 0.0
    name = "cosine"

    def __call__(self, t, k=0):
        t = np.asarray(t, dtype=float)
        return self.freq**k * np.cos(self.freq * t + self.phase + k * np.pi / 2)


def Sine(freq=1.0):
    return Cosine(freq, -np.pi / 2)


@dataclass
class Weierstrass(Profile):
    """sum_{j < terms} 2^{-j s} cos(2^j t).

    Lies in C^s for non-integer s; the truncated series is smooth but keeps
    the rough behavior at every scale above 2^{-(terms-1)}.
    """

    s: float = 0.5
    terms: int = 12
    name = "weierstrass"

    def __call__(self, t, k=0):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for j in range(self.terms):
            f = 2.0**j
            out += 2.0 ** (-j * self.s) * f**k * np.cos(f * t + k * np.pi / 2)
        return out

    def sup(self) -> float:
        return float(sum(2.0 ** (-j * self.s) for j in range(self.terms)))


@dataclass
class Polynomial(Profile):
    coeffs: tuple = (0.0, 1.0)  # c0 + c1 t + ...
    name = "polynomial"

    def __call__(self, t, k=0):
        t = np.asarray(t, dtype=float)
        c = np.polynomial.polynomial.polyder(np.asarray(self.coeffs, dtype=float), k) if k else np.asarray(self.coeffs, float)
        return np.polynomial.polynomial.polyval(t, c)


class ExpOf(Profile):
    """exp(g) for a profile g, derivatives by the Faa di Bruno recurrence."""

    name = "exp"

    def __init__(self, g: Profile, support=None):
        self.g = g
        self.support = support  # optional mask function

    def __call__(self, t, k=0):
        t = np.asarray(t, dtype=float)
        mask = np.ones(t.shape, bool) if self.support is None else self.support(t)
        tt = np.where(mask, t, 0.0)
        gs = [self.g(tt, j) for j in range(1, k + 1)]
        f = [np.where(mask, np.exp(self.g(tt, 0)), 0.0)]
        with np.errstate(invalid="ignore", over="ignore"):
            for order in range(1, k + 1):
                acc = np.zeros(t.shape)
                for i in range(order):
                    acc = acc + comb(order - 1, i) * gs[i] * f[order - 1 - i]
                f.append(np.where(mask & (f[0] > 1e-300), acc, 0.0))
        return f[k]


class _BumpExponent(Profile):
    # 1 - 1/(1 - t^2) = 1 - (1/(1-t) + 1/(1+t))/2 on (-1, 1)
    def __call__(self, t, k=0):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            if k == 0:
                return 1.0 - 1.0 / (1.0 - t * t)
            fk = factorial(k)
            return -0.5 * (fk / (1.0 - t) ** (k + 1) + (-1) ** k * fk / (1.0 + t) ** (k + 1))


class Bump(Profile):
    """C-infinity bump exp(1 - 1/(1 - (t/R)^2)), equal to 1 at 0, zero for |t| >= R."""

    name = "bump"

    def __init__(self, radius: float = 2.0):
        self.radius = float(radius)
        self._inner = ExpOf(_BumpExponent(), support=lambda u: np.abs(u) < 1.0)

    def __call__(self, t, k=0):
        t = np.asarray(t, dtype=float)
        return self._inner(t / self.radius, k) / self.radius**k

    def __repr__(self):
        return f"Bump(radius={self.radius})"


class PeriodicGaussian(Profile):
    """exp(beta (cos(t/L) - 1)): entire, periodic on the box, sharply peaked at 0.

    Its Fourier coefficients decay faster than any exponential, which keeps
    products with it free of aliasing on moderate grids.
    """

    name = "periodic_gaussian"

    def __init__(self, beta: float = 4.0, L: float = 1.0):
        self.beta = float(beta)
        self.L = float(L)
        self._inner = ExpOf(Sum(Scaled(Cosine(1.0 / self.L), self.beta), Constant(-self.beta)))

    def __call__(self, t, k=0):
        return self._inner(t, k)

    def __repr__(self):
        return f"PeriodicGaussian(beta={self.beta}, L={self.L})"


class Gaussian(Profile):
    """exp(-t^2 / (2 sigma^2))."""

    name = "gaussian"

    def __init__(self, sigma: float = 1.0):
        self.sigma = float(sigma)
        self._inner = ExpOf(Polynomial((0.0, 0.0, -0.5 / self.sigma**2)))

    def __call__(self, t, k=0):
        return self._inner(t, k)


@dataclass
class Scaled(Profile):
    inner: Profile
    factor: complex

    def __call__(self, t, k=0):
        return self.factor * self.inner(t, k)


@dataclass
class Sum(Profile):
    a: Profile
    b: Profile

    def __call__(self, t, k=0):
        return self.a(t, k) + self.b(t, k)


@dataclass
class Product(Profile):
    a: Profile
    b: Profile

    def __call__(self, t, k=0):
        out = 0.0
        for i in range(k + 1):
            out = out + comb(k, i) * self.a(t, i) * self.b(t, k - i)
        return out


@dataclass
class Sampled(Profile):
    """Wrap a plain callable; only k = 0 is available."""

    fn: object

    def __call__(self, t, k=0):
        if k:
            from .errors import CapabilityError

            raise CapabilityError("sampled profile has no derivative oracle")
        return np.asarray(self.fn(np.asarray(t, dtype=float)))


class Bracket(Profile):
    """<scale * t>^p = (1 + scale^2 t^2)^(p/2)."""

    name = "bracket"

    def __init__(self, p: float, scale: float = 1.0):
        self.p = float(p)
        self.scale = float(scale)

    def __call__(self, t, k=0):
        t = np.asarray(t, dtype=float)
        return bracket_power(self.scale * t[..., None], self.p, (k,)) * self.scale**k

    def __repr__(self):
        return f"Bracket(p={self.p}, scale={self.scale})"


@dataclass
class PlaneWave(Profile):
    """exp(i c t)."""

    c: float = 1.0
    name = "plane_wave"

    def __call__(self, t, k=0):
        t = np.asarray(t, dtype=float)
        return (1j * self.c) ** k * np.exp(1j * self.c * t)
