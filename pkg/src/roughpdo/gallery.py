"""Named test symbols.

All entries carry exact derivative oracles.  Windows are either the compact
C-infinity bump (rough_elliptic, so the symbol is exactly constant in x far
out) or the periodic Gaussian exp(beta(cos x - 1)), whose Fourier
coefficients decay fast enough that products stay alias-free on the grid.
"""

from __future__ import annotations

import math

import numpy as np

from . import profiles as pr
from ._numerics import bracket_power
from .errors import ParameterError
from .symbol_core import (
    Symbol,
    SymbolClassSpec,
    matrix_diag as _matrix_diag,
    product,
    x_function,
    xi_function,
)


def bessel(m: float = 0.0, dim: int = 1) -> Symbol:
    """<xi>^m."""
    s = xi_function(lambda xi, a: bracket_power(xi, m, a), SymbolClassSpec(m=m), dim, name=f"bessel({m})")
    s.params = {"m": m}
    return s


def multiplier(g="bracket", p: float = 1.0, dim: int = 1) -> Symbol:
    """x-independent symbol g(xi): 'bracket' (<xi>^p), 'xi', 'i_xi', or a callable g(xi, alpha)."""
    if callable(g):
        return xi_function(g, SymbolClassSpec(m=p), dim, name="multiplier")
    if g == "bracket":
        return bessel(p, dim)
    if g in ("xi", "i_xi"):
        c = 1j if g == "i_xi" else 1.0

        def lin(xi, alpha):
            a = sum(alpha)
            if a == 0:
                return c * xi[..., 0]
            if a == 1 and alpha[0] == 1:
                return np.full(xi.shape[:-1], c, dtype=complex)
            return np.zeros(xi.shape[:-1], dtype=complex)

        s = xi_function(lin, SymbolClassSpec(m=1.0), dim, name=g)
        return s
    raise ParameterError(f"unknown multiplier {g!r}")


_X_PROFILES = {
    "sin": lambda **k: pr.Sine(k.get("freq", 1.0)),
    "cos": lambda **k: pr.Cosine(k.get("freq", 1.0)),
    "gaussian": lambda **k: pr.Gaussian(k.get("sigma", 1.0)),
    "bump": lambda **k: pr.Bump(k.get("radius", 2.0)),
    "periodic_gaussian": lambda **k: pr.PeriodicGaussian(k.get("beta", 4.0), k.get("L", 1.0)),
    "weierstrass": lambda **k: pr.Weierstrass(k.get("tau", 0.3), k.get("terms", 12)),
}


def x_profile(v, **kw) -> pr.Profile:
    if isinstance(v, pr.Profile):
        return v
    if callable(v):
        return pr.Sampled(v)
    try:
        return _X_PROFILES[v](**kw)
    except KeyError:
        raise ParameterError(f"unknown x-profile {v!r}") from None


def multiplication(v="sin", dim: int = 1, tau: float = 0.5, holder_int: int = 0, **kw) -> Symbol:
    """Multiplication by v(x); in two dimensions v acts on x_1 times a unit factor in x_2."""
    prof = x_profile(v, **kw)
    smooth = not isinstance(prof, (pr.Weierstrass, pr.Sampled))
    spec = SymbolClassSpec(m=0.0, holder_int=holder_int, holder_frac=tau)
    factors = [prof] + [pr.Constant(1.0)] * (dim - 1)
    x_order = math.inf if smooth else (0 if isinstance(prof, pr.Sampled) else holder_int)
    s = x_function(factors, spec, dim, name=f"multiplication({v if isinstance(v, str) else 'v'})", x_order=x_order)
    s.params = {"v": v if isinstance(v, str) else "custom", **kw}
    return s


def rough_elliptic(m: float = 0.0, tau: float = 0.3, c: float = 0.5, holder_int: int = 0, terms: int = 12, window: float = 2.0, dim: int = 1) -> Symbol:
    """(2 + c W(x_1) w(x)) <xi>^m with W the Weierstrass series of exponent m~ + tau.

    ``w`` is the compact bump of radius ``window``, so a(x, xi) = 2<xi>^m for
    |x| >= window and the limit at infinity is exactly 2<xi>^m.
    """
    W = pr.Weierstrass(holder_int + tau, terms)
    w = pr.Bump(window)
    spec = SymbolClassSpec(m=m, holder_int=holder_int, holder_frac=tau, variant="tilde")
    bes = bessel(m, dim)
    factors = [pr.Product(W, w)] + [w] * (dim - 1)
    rough = x_function(factors, spec, dim, x_order=holder_int)
    rough_part = product(rough, bes)
    base = 2.0 * bes

    def fn(x, xi, alpha, beta):
        out = c * rough_part(x, xi, alpha, beta)
        if not any(beta):
            out = out + base(x, xi, alpha, beta)
        return out

    def limit(xi, alpha):
        return 2.0 * bracket_power(xi, m, alpha)[..., None, None]

    s = Symbol(fn, spec, dim, limit, name="rough_elliptic", x_order=holder_int)
    s.params = {"m": m, "tau": tau, "c": c, "holder_int": holder_int, "terms": terms, "window": window}
    return s


def weierstrass(m: float = 0.0, tau: float = 0.3, terms: int = 12, dim: int = 1) -> Symbol:
    """W_tau(x_1) <xi>^m, unwindowed (periodic on boxes with integer L)."""
    W = pr.Weierstrass(tau, terms)
    spec = SymbolClassSpec(m=m, holder_frac=tau)
    s = product(x_function([W] + [pr.Constant(1.0)] * (dim - 1), spec, dim, x_order=0), bessel(m, dim))
    s.spec = spec
    s.name = "weierstrass"
    s.params = {"m": m, "tau": tau, "terms": terms}
    return s


def smooth_elliptic(m: float = 0.0, c: float = 0.5, freq: float = 1.0, dim: int = 1) -> Symbol:
    """(2 + c cos(freq x_1)) <xi>^m: smooth in x, three Fourier modes."""
    prof = pr.Sum(pr.Constant(2.0), pr.Scaled(pr.Cosine(freq), c))
    v = x_function([prof] + [pr.Constant(1.0)] * (dim - 1), SymbolClassSpec(m=0.0), dim, x_order=math.inf)
    s = product(v, bessel(m, dim))
    s.spec = SymbolClassSpec(m=m, holder_int=3, holder_frac=0.5)
    s.name = "smooth_elliptic"
    s.x_order = math.inf
    s.params = {"m": m, "c": c, "freq": freq}
    return s


def transport(c: float = 1.0, beta: float = 4.0, L: float = 1.0, dim: int = 1) -> Symbol:
    """c sin(x_1) w(x_1) (i xi_1) with the periodic Gaussian window w."""
    prof = pr.Scaled(pr.Product(pr.Sine(1.0), pr.PeriodicGaussian(beta, L)), c)
    v = x_function([prof] + [pr.Constant(1.0)] * (dim - 1), SymbolClassSpec(m=0.0), dim, x_order=math.inf)
    s = product(v, multiplier("i_xi", dim=dim))
    s.spec = SymbolClassSpec(m=1.0, holder_int=3, holder_frac=0.5, variant="dot")
    s.name = "transport"
    s.x_order = math.inf
    s.params = {"c": c, "beta": beta, "L": L}
    return s


def annihilation(L: float = 1.0) -> Symbol:
    """L sin(x/L) + i xi: a periodized x + d/dx.  Outside the studied classes; calibration only.

    Its kernel on the periodic box is spanned by exp(L^2 cos(x/L)).
    """
    xs = x_function(pr.Scaled(pr.Sine(1.0 / L), L), SymbolClassSpec(m=0.0), 1, x_order=math.inf)
    s = xs + multiplier("i_xi")
    s.spec = SymbolClassSpec(m=1.0, holder_int=3, holder_frac=0.5)
    s.name = "annihilation"
    s.x_order = math.inf
    s.params = {"L": L, "oracle_only": True}
    return s


def punctured(radius_x: float = 1.5, radius_xi: float = 1.5) -> Symbol:
    """1 - b(x) b(xi) with compact bumps b; vanishes only at (0, 0)."""
    bx, bxi = pr.Bump(radius_x), pr.Bump(radius_xi)
    bump_x = x_function(bx, SymbolClassSpec(m=0.0), 1, x_order=math.inf)
    bump_xi = xi_function(lambda xi, a: bxi(xi[..., 0], a[0]), SymbolClassSpec(m=0.0), 1)
    one = bessel(0.0)
    s = one - product(bump_x, bump_xi)
    s.spec = SymbolClassSpec(m=0.0, holder_int=3, holder_frac=0.5)
    s.name = "punctured"
    s.x_order = math.inf
    s.limit = lambda xi, alpha: np.full(xi.shape[:-1] + (1, 1), 0.0 if any(alpha) else 1.0, dtype=complex)
    s.params = {"radius_x": radius_x, "radius_xi": radius_xi}
    return s


def matrix_diag(entries=None, dim: int = 1) -> Symbol:
    """Diagonal matrix symbol.  Entries are Symbols or (name, params) pairs; default diag(<xi>, <xi>)."""
    if entries is None:
        entries = [("bessel", {"m": 1.0}), ("bessel", {"m": 1.0})]
    syms = [e if isinstance(e, Symbol) else gallery(e[0], **dict(e[1], dim=dim)) for e in entries]
    s = _matrix_diag(syms)
    s.spec = SymbolClassSpec(m=max(e.spec.m for e in syms), N=len(syms),
                             holder_int=min(e.spec.holder_int for e in syms),
                             holder_frac=min(e.spec.holder_frac for e in syms))
    s.name = "matrix_diag"
    return s


_GALLERY = {
    "annihilation": (annihilation, "L sin(x/L) + i xi; calibration oracle for kernel counts"),
    "bessel": (bessel, "<xi>^m"),
    "matrix_diag": (matrix_diag, "diagonal matrix of gallery symbols, default diag(<xi>, <xi>)"),
    "multiplication": (multiplication, "v(x): sin, cos, gaussian, bump, periodic_gaussian, weierstrass"),
    "multiplier": (multiplier, "g(xi): bracket (<xi>^p), xi, i_xi"),
    "punctured": (punctured, "1 - b(x) b(xi); elliptic except at the origin"),
    "rough_elliptic": (rough_elliptic, "(2 + c W(x) w(x)) <xi>^m with Hölder exponent m~ + tau"),
    "smooth_elliptic": (smooth_elliptic, "(2 + c cos x) <xi>^m"),
    "transport": (transport, "sin(x) w(x) (i xi), periodic Gaussian window"),
    "weierstrass": (weierstrass, "W_tau(x) <xi>^m"),
}


def gallery(name: str, **params) -> Symbol:
    try:
        factory = _GALLERY[name][0]
    except KeyError:
        raise LookupError(f"unknown gallery symbol {name!r}; known: {', '.join(sorted(_GALLERY))}") from None
    s = factory(**params)
    s.params.setdefault("gallery", name)
    s.params["gallery"] = name
    return s


def list_gallery() -> list[dict]:
    return [{"name": k, "description": _GALLERY[k][1]} for k in sorted(_GALLERY)]
