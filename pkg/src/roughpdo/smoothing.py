"""Symbol smoothing a = a_sharp + a_flat and checks of the order shifts.

a_sharp(x, xi) = sum_j psi_j(xi) (J_{eps_j} a)(x, xi) with eps_j = 2^{-j gamma}.
Both parts are tabulated in x on the configuration grid: for a batch of xi
points the source is sampled on the x-lattice, transformed once, and the
mollifiers act diagonally on the x-frequencies.  x-derivatives of the parts
are spectral; xi-derivatives follow from the Leibniz rule, since J_eps
commutes with d_xi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from ._numerics import as_multi, multi_indices, sub_indices
from .dyadic import DyadicPartition, active, make_partition, psi
from .errors import CapabilityError, ParameterError
from .grid import Grid
from .symbol_core import (
    SamplingPlan,
    SeminormReport,
    Symbol,
    SymbolClassSpec,
    _quotient,
    annulus_sup,
    envelope_verdict,
    fit_decay_exponent,
    key,
    sampling_plan,
    x_envelope,
)

MAX_X_ORDER = 6  # spectral derivatives beyond this amplify roundoff by more than (P/2)^6


@dataclass(frozen=True)
class SmoothingConfig:
    gamma: float
    partition: DyadicPartition
    grid: Grid
    eps_tilde: float | None = None

    def __post_init__(self):
        if abs(self.partition.gamma - self.gamma) > 1e-15:
            raise ParameterError("partition gamma differs from config gamma")

    @classmethod
    def build(cls, grid: Grid, gamma: float = 0.5, profile: str = "exp_bump", J_max: int | None = None, eps_tilde: float | None = None):
        return cls(gamma, make_partition(grid, profile, J_max, gamma), grid, eps_tilde)

    @property
    def J_max(self) -> int:
        return self.partition.J_max

    def eps_tilde_for(self, spec: SymbolClassSpec) -> float:
        """Default 0.5 (gamma - delta) tau, inside the open interval the lemma allows."""
        if self.eps_tilde is not None:
            return self.eps_tilde
        return 0.5 * (self.gamma - spec.delta) * spec.holder_frac

    def fit_annuli(self) -> list[int]:
        """Annuli with 2 <= <xi> <= 2^(J_max - 2), padded to at least four."""
        top = max(self.J_max - 3, 4)
        return list(range(1, top + 1))

    def plan(self, **kw) -> SamplingPlan:
        return sampling_plan(self.grid, annuli=self.fit_annuli(), **kw)


class TabulatedSymbol(Symbol):
    """Symbol given by x-Fourier coefficients on a grid, per xi point.

    ``coeffs(xi, alpha)`` maps xi points (K, dim) to unnormalized FFT
    coefficients of shape (K, *grid.shape, N, N).  Evaluation at lattice
    nodes is an inverse FFT; off-lattice x uses the trigonometric interpolant.
    """

    def __init__(self, grid: Grid, coeffs: Callable, spec: SymbolClassSpec, name="tabulated", limit=None, x_independent=False):
        super().__init__(self._eval, spec, grid.dim, limit=limit, name=name, x_order=MAX_X_ORDER, xi_order=spec.M, x_independent=x_independent)
        self.grid = grid
        self.coeffs = coeffs

    def _chunk(self) -> int:
        return max(1, (1 << 22) // (self.grid.size * self.N * self.N))

    def _eval(self, x, xi, alpha, beta):
        g = self.grid
        n = g.dim
        lead = np.broadcast_shapes(x.shape[:-1], xi.shape[:-1])
        X = np.broadcast_to(x, lead + (n,)).reshape(-1, n)
        Q = np.broadcast_to(xi, lead + (n,)).reshape(-1, n)
        out = np.zeros((X.shape[0], self.N, self.N), dtype=complex)
        if X.shape[0] == 0:
            return out.reshape(lead + (self.N, self.N))
        uniq, inv = np.unique(Q, axis=0, return_inverse=True)
        inv = inv.ravel()
        pos = (X + np.pi * g.L) / g.spacing
        idx = np.rint(pos)
        nodes = bool(np.all(np.abs(pos - idx) < 1e-6))
        idx = np.mod(idx.astype(int), g.points)
        mult = np.ones(g.shape, dtype=complex)
        for axis, b in enumerate(beta):
            if b:
                mult = mult * (1j * g.xi[..., axis]) ** b
        order = np.argsort(inv, kind="stable")
        bounds = np.searchsorted(inv[order], np.arange(len(uniq) + 1))
        step = self._chunk()
        for start in range(0, len(uniq), step):
            stop = min(start + step, len(uniq))
            C = self.coeffs(uniq[start:stop], alpha)
            if any(beta):
                C = C * mult[(None, ...) + (None, None)]
            if nodes:
                vals = np.fft.ifftn(C, axes=tuple(range(1, n + 1)))
            for u in range(start, stop):
                rows = order[bounds[u]:bounds[u + 1]]
                if nodes:
                    out[rows] = vals[(u - start,) + tuple(idx[rows, d] for d in range(n))]
                else:
                    out[rows] = self._interp(C[u - start], X[rows])
        return out.reshape(lead + (self.N, self.N))

    def _interp(self, C, pts):
        g = self.grid
        rel = pts + np.pi * g.L
        k = g.xi.reshape(-1, g.dim)
        flat = C.reshape(g.size, -1)
        res = []
        for s in range(0, len(rel), 2048):
            E = np.exp(1j * rel[s:s + 2048] @ k.T)
            res.append(E @ flat / g.size)
        return np.concatenate(res).reshape(len(rel), self.N, self.N)


class SmoothingSplit(NamedTuple):
    a_sharp: TabulatedSymbol
    a_flat: TabulatedSymbol
    config: SmoothingConfig
    source: Symbol


def _source_coeffs(a: Symbol, grid: Grid, xi: np.ndarray, alpha) -> np.ndarray:
    n = grid.dim
    vals = a(grid.x[(None,) * 1], xi.reshape((len(xi),) + (1,) * n + (n,)), alpha, None)
    vals = np.broadcast_to(vals, (len(xi),) + grid.shape + (a.N, a.N))
    return np.fft.fftn(vals, axes=tuple(range(1, n + 1)))


def _check_gamma(spec: SymbolClassSpec, gamma: float):
    if not spec.delta < gamma < spec.rho:
        raise ParameterError(f"gamma = {gamma} must lie strictly between delta = {spec.delta} and rho = {spec.rho}")


def split(a: Symbol, cfg: SmoothingConfig) -> SmoothingSplit:
    """Tabulate a_sharp and a_flat = a - a_sharp on the configuration grid.

    The top partition index absorbs every higher one, so the parts add up to
    the source at all lattice frequencies, not only resolved ones.
    """
    _check_gamma(a.spec, cfg.gamma)
    if a.dim != cfg.grid.dim:
        raise ParameterError("symbol and grid dimensions differ")
    g, part = cfg.grid, cfg.partition
    phis = {j: part.cutoffs.phi(part.eps(j) * g.xi) for j in range(part.J_max + 1)}

    def sharp_coeffs(xi, alpha):
        base = {}
        if a.x_independent:
            return _source_coeffs(a, g, xi, alpha)
        out = np.zeros((len(xi),) + g.shape + (a.N, a.N), dtype=complex)
        for j in active(part, xi):
            for gam, c in sub_indices(alpha):
                w = c * psi(part, j, xi, gam, tail=True)
                if not np.any(w):
                    continue
                rest = tuple(x - y for x, y in zip(alpha, gam))
                if rest not in base:
                    base[rest] = _source_coeffs(a, g, xi, rest)
                out += w.reshape((-1,) + (1,) * (g.dim + 2)) * phis[j][(None, ...) + (None, None)] * base[rest]
        return out

    def flat_coeffs(xi, alpha):
        if a.x_independent:
            return np.zeros((len(xi),) + g.shape + (a.N, a.N), dtype=complex)
        return _source_coeffs(a, g, xi, alpha) - sharp_coeffs(xi, alpha)

    sp = a.spec
    sharp_spec = SymbolClassSpec(m=sp.m, rho=sp.rho, delta=cfg.gamma, holder_int=sp.holder_int, holder_frac=sp.holder_frac, M=sp.M, N=sp.N, variant=sp.variant)
    flat_m = sp.m - (cfg.gamma - sp.delta) * sp.regularity
    flat_spec = SymbolClassSpec(m=flat_m, rho=sp.rho, delta=cfg.gamma, holder_int=sp.holder_int, holder_frac=sp.holder_frac, M=sp.M, N=sp.N, variant=sp.variant)
    lim_sharp = lim_flat = None
    if a.limit is not None:
        lim_sharp = a.limit

        def lim_flat(xi, alpha):
            return np.zeros(xi.shape[:-1] + (a.N, a.N), dtype=complex)

    sharp = TabulatedSymbol(g, sharp_coeffs, sharp_spec, name=f"{a.name}#", limit=lim_sharp, x_independent=a.x_independent)
    flat = TabulatedSymbol(g, flat_coeffs, flat_spec, name=f"{a.name}b", limit=lim_flat, x_independent=a.x_independent)
    return SmoothingSplit(sharp, flat, cfg, a)


def _order_cells(sym: Symbol, plan: SamplingPlan, cells, tol: float, rep: SeminormReport, prefix: str, decay=None):
    """Fit sup_x |d^alpha d_x^beta sym| over annuli for each (alpha, beta, bound)."""
    br = plan.bracket
    X = plan.x[:, None, :]
    XI = plan.xi[None, :, :]
    for al, be, bound in cells:
        vals = np.abs(sym(X, XI, al, be)).max(axis=(-1, -2))
        sup_x = vals.max(axis=0)
        kk = key(al, be)
        rep.constants[kk] = float(np.max(sup_x * br ** (-bound)))
        rep.annulus_sups[kk] = [list(r) for r in annulus_sup(br, sup_x)]
        e, res = fit_decay_exponent(zip(br, sup_x))
        rep.exponents[kk] = {"exponent": e, "residual": res, "bound": bound}
        rep.verdicts[f"{prefix}_{kk}"] = bool(e <= bound + tol)
        if decay is not None and decay(be):
            env_r, env_v = x_envelope((vals * br[None, :] ** (-bound)).max(axis=1), plan.x)
            ok, info = envelope_verdict(env_r, env_v, plan.grid.box)
            rep.x_envelope[kk] = {"radius": env_r.tolist(), "sup": env_v.tolist(), **info}
            rep.verdicts[f"decay_{kk}"] = ok


def _decay_rule(spec: SymbolClassSpec):
    if spec.variant == "dot":
        return lambda be: True
    if spec.variant == "tilde":
        return lambda be: sum(be) >= 1
    return None


def verify_sharp(sp: SmoothingSplit, max_extra_derivs: int = 2, plan: SamplingPlan | None = None, alpha_cap: int = 1, tol: float = 0.1) -> SeminormReport:
    """Orders of x-derivatives of a_sharp.

    Total x-order k is split as |beta| = min(k, m~) plus |beta~| = k - |beta|,
    with claimed order m - rho|alpha| + delta|beta| + gamma|beta~|.
    """
    src = sp.source.spec
    n = sp.config.grid.dim
    top = src.holder_int + max_extra_derivs
    if top > MAX_X_ORDER:
        raise CapabilityError(f"x-derivatives of order {top} exceed the tabulation limit {MAX_X_ORDER}")
    plan = plan or sp.config.plan()
    gamma = sp.config.gamma
    cells = []
    for ka in range(min(alpha_cap, src.M) + 1):
        for al in multi_indices(n, ka, exact=True):
            for k in range(top + 1):
                for be in multi_indices(n, k, exact=True):
                    kb = min(k, src.holder_int)
                    bound = src.m - src.rho * ka + src.delta * kb + gamma * (k - kb)
                    cells.append((al, be, bound))
    rep = SeminormReport(claimed={**sp.a_sharp.spec.to_dict(), "gamma": gamma, "max_extra_derivs": max_extra_derivs})
    _order_cells(sp.a_sharp, plan, cells, tol, rep, "sharp", _decay_rule(src))
    return rep


def verify_flat(sp: SmoothingSplit, plan: SamplingPlan | None = None, alpha_cap: int = 1, tol: float = 0.1, holder: bool = True) -> SeminormReport:
    """Orders of D_x^beta a_flat (|beta| <= m~) and of its Hölder norms.

    Claimed sup order: m - (gamma - delta)(m~ + tau) + gamma|beta| - rho|alpha|,
    shifted up by eps~ for dot and tilde sources.  Claimed Hölder order of
    d_xi^alpha D^beta a_flat in C^{m~-|beta|, tau}: the sup order plus
    gamma(m~ - |beta| + tau).
    """
    src = sp.source.spec
    cfg = sp.config
    n = cfg.grid.dim
    gamma = cfg.gamma
    plan = plan or cfg.plan()
    shift = cfg.eps_tilde_for(src) if src.variant in ("dot", "tilde") else 0.0
    base = src.m - (gamma - src.delta) * src.regularity + shift
    alphas = [al for ka in range(int(min(alpha_cap, src.M)) + 1) for al in multi_indices(n, ka, exact=True)]
    cells = []
    for al in alphas:
        for k in range(src.holder_int + 1):
            for be in multi_indices(n, k, exact=True):
                cells.append((al, be, base + gamma * k - src.rho * sum(al)))
    rep = SeminormReport(claimed={**sp.a_flat.spec.to_dict(), "gamma": gamma, "eps_tilde": shift})
    _order_cells(sp.a_flat, plan, cells, tol, rep, "flat", _decay_rule(src))
    if holder:
        _flat_holder(sp, plan, alphas, base, tol, rep)
    return rep


def _flat_holder(sp, plan, alphas, base, tol, rep):
    g = sp.config.grid
    src = sp.source.spec
    tau, mt, gamma = src.holder_frac, src.holder_int, sp.config.gamma
    window = plan.window or g.box / 8
    br = plan.bracket
    n = g.dim
    xs = g.x[(slice(None),) * n + (None,)]
    for al in alphas:
        for k in range(mt + 1):
            for be in multi_indices(n, k, exact=True):
                lower = [b for kk in range(mt - k + 1) for b in multi_indices(n, kk, exact=True)]
                top = [b for b in lower if sum(b) == mt - k]
                tables = {b: sp.a_flat(xs, plan.xi, al, tuple(x + y for x, y in zip(be, b))) for b in lower}
                norms = np.zeros(len(br))
                for i in range(len(br)):
                    sup = max(float(np.abs(t[(Ellipsis, i, slice(None), slice(None))]).max()) for t in tables.values())
                    quot = max(_quotient(tables[b][(Ellipsis, i, slice(None), slice(None))], g.spacing, tau, window, n) for b in top)
                    norms[i] = sup + quot
                bound = base + gamma * k - src.rho * sum(al) + gamma * (mt - k + tau)
                kk = key(al, be)
                e, res = fit_decay_exponent(zip(br, norms))
                rep.holder_exponents[kk] = {"exponent": e, "residual": res, "bound": bound}
                rep.holder_constants[kk] = float(np.max(norms * br ** (-bound)))
                rep.verdicts[f"holder_{kk}"] = bool(e <= bound + tol)


class InfinitySplit(NamedTuple):
    a_inf: Symbol
    b: Symbol
    b_split: SmoothingSplit


def split_at_infinity(a: Symbol, cfg: SmoothingConfig) -> InfinitySplit:
    """a(inf, .) as an x-independent symbol, b = a - a(inf, .), and the split of b."""
    if a.limit is None:
        raise CapabilityError(f"{a.name} has no limit at spatial infinity")
    sp = a.spec
    lim = a.limit

    def inf_fn(x, xi, alpha, beta):
        if any(beta):
            return np.zeros(np.broadcast_shapes(x.shape[:-1], xi.shape[:-1]) + (a.N, a.N), dtype=complex)
        return lim(xi, alpha)

    inf_spec = SymbolClassSpec(m=sp.m, rho=sp.rho, delta=sp.delta, holder_int=sp.holder_int, holder_frac=sp.holder_frac, M=sp.M, N=sp.N)
    a_inf = Symbol(inf_fn, inf_spec, a.dim, limit=lim, name=f"{a.name}(inf)", x_order=math.inf, x_independent=True)
    b = a - a_inf
    b.spec = sp
    b.x_order = a.x_order

    def zero_limit(xi, alpha):
        return np.zeros(xi.shape[:-1] + (a.N, a.N), dtype=complex)

    b.limit = zero_limit
    b.name = f"{a.name}-a(inf)"
    return InfinitySplit(a_inf, b, split(b, cfg))


def infinity_identity_residual(a: Symbol, cfg: SmoothingConfig, xi=None) -> float:
    """max |a_sharp - a(inf) - b_sharp| / max |a_sharp| over the x-lattice and ``xi``."""
    g = cfg.grid
    xi = cfg.plan().xi if xi is None else np.asarray(xi, dtype=float)
    inf = split_at_infinity(a, cfg)
    sharp = split(a, cfg).a_sharp
    xs = g.x.reshape(-1, g.dim)[:, None, :]
    lhs = sharp(xs, xi[None])
    rhs = inf.a_inf(xs, xi[None]) + inf.b_split.a_sharp(xs, xi[None])
    scale = float(np.abs(lhs).max())
    return float(np.abs(lhs - rhs).max()) / scale if scale else 0.0


def decomposition_residual(sp: SmoothingSplit, xi=None) -> float:
    """max |a - a_sharp - a_flat| / max |a| on the x-lattice."""
    g = sp.config.grid
    xi = sp.config.plan().xi if xi is None else np.asarray(xi, dtype=float)
    xs = g.x.reshape(-1, g.dim)[:, None, :]
    a = sp.source(xs, xi[None])
    r = a - sp.a_sharp(xs, xi[None]) - sp.a_flat(xs, xi[None])
    scale = float(np.abs(a).max())
    return float(np.abs(r).max()) / scale if scale else float(np.abs(r).max())


def flat_order(sp: SmoothingSplit, beta=None, plan: SamplingPlan | None = None) -> tuple[float, float]:
    """Fitted xi-order of sup_x |D_x^beta a_flat| on the fit annuli."""
    plan = plan or sp.config.plan()
    be = as_multi(beta, sp.config.grid.dim)
    vals = np.abs(sp.a_flat(plan.x[:, None, :], plan.xi[None], None, be)).max(axis=(0, -1, -2))
    return fit_decay_exponent(zip(plan.bracket, vals))


__all__ = [
    "InfinitySplit",
    "SmoothingConfig",
    "SmoothingSplit",
    "TabulatedSymbol",
    "decomposition_residual",
    "flat_order",
    "infinity_identity_residual",
    "split",
    "split_at_infinity",
    "verify_flat",
    "verify_sharp",
]
