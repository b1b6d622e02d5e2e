"""Ellipticity, parametrices, compactness proxies and the Fredholm experiment.

Compactness cannot be certified on a lattice.  The proxy used here looks at
the singular values of a Sobolev-conjugated residual on several refinements:
a compact operator has sigma_k that settle as the lattice is refined and
decay in k, while a non-compact one keeps a plateau.
"""

from __future__ import annotations

import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ._numerics import as_multi, loglog_fit, square_chain, sub_indices
from .calculus import DiscretizedOperator, identity, quantize, sharp_product
from .dyadic import _exp_step, _poly_step
from .errors import (
    CapabilityError,
    ConditioningError,
    HypothesisError,
    HypothesisWarning,
    InversionError,
    ParameterError,
    RoughPDOError,
)
from .grid import Grid
from .symbol_core import Symbol, xi_weight

VERDICTS = ("compact-like", "not-compact-like", "inconclusive")


def _clean(o):
    if isinstance(o, dict):
        return {str(k): _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, (np.floating, float)):
        f = float(o)
        return f if math.isfinite(f) else ("inf" if f > 0 else ("-inf" if f < 0 else "nan"))
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return _clean(o.tolist())
    return o


# ---------------------------------------------------------------------------
# ellipticity


@dataclass
class EllipticityPlan:
    """Phase-space sample points: x (nx, dim) and xi (nxi, dim)."""

    x: np.ndarray
    xi: np.ndarray

    @classmethod
    def default(cls, dim: int = 1, x_max: float = 8.0, xi_max: float = 1024.0) -> "EllipticityPlan":
        if dim == 1:
            x1 = np.linspace(-x_max, x_max, 1601)
            lin = np.linspace(-8.0, 8.0, 33)
            geo = np.geomspace(8.0, xi_max, 16)[1:]
        else:
            x1 = np.linspace(-x_max, x_max, 41)
            lin = np.linspace(-4.0, 4.0, 9)
            geo = np.geomspace(4.0, xi_max, 9)[1:]
        xi1 = np.concatenate([-geo[::-1], lin, geo])
        return cls(_tensor(x1, dim), _tensor(xi1, dim))


def _tensor(v, dim):
    return np.stack(np.meshgrid(*([v] * dim), indexing="ij"), axis=-1).reshape(-1, dim)


@dataclass
class EllipticityReport:
    C0: float
    R: float
    m: float
    violating_points: list
    violation_count: int
    violation_threshold: float
    det_min_profile: list  # [radius, min |det a~| over |x| + |xi| >= radius]
    limit_envelope: list | None = None  # [|x|, sup_{|x'| >= |x|, xi} |a - a(inf)| <xi>^-m]
    limit_decay: bool | None = None

    @property
    def elliptic(self) -> bool:
        return self.C0 > 0

    def to_dict(self):
        d = _clean(asdict(self))
        d["elliptic"] = self.elliptic
        return d


DEFAULT_RADII = (0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0)


def ellipticity_check(a: Symbol, plan: EllipticityPlan | None = None, radii=DEFAULT_RADII,
                      violation_frac: float = 0.1, check_limit: bool | None = None, max_report: int = 32) -> EllipticityReport:
    """Scan |det a(x, xi)| <xi>^{-Nm} on a lattice and pick the smallest admissible R.

    A point violates when its normalized determinant is below
    ``violation_frac`` times the minimum over the outermost shell.  R is the
    smallest candidate radius with no violating point on or beyond it, and
    C0 the lattice minimum there.  Only radii up to half the x-extent of the
    plan qualify; when none does, C0 = 0.
    """
    plan = plan or EllipticityPlan.default(a.dim)
    m, N = a.spec.m, a.N
    X, XI = plan.x[:, None, :], plan.xi[None, :, :]
    br = np.sqrt(1.0 + np.sum(plan.xi**2, axis=-1))[None, :]
    vals = a(X, XI)
    q = np.abs(np.linalg.det(vals)) * br ** (-N * m) if N > 1 else np.abs(vals[..., 0, 0]) * br ** (-m)
    r = np.sqrt(np.sum(X**2, axis=-1)) + np.sqrt(np.sum(XI**2, axis=-1))
    radii = sorted(float(R) for R in radii if R < r.max())
    profile = []
    for R in radii:
        sel = r >= R
        profile.append([R, float(q[sel].min())])
    far = profile[-1][1]
    thr = violation_frac * far
    bad = q < thr if far > 0 else np.ones_like(q, dtype=bool)
    idx = np.argwhere(bad)
    order = np.argsort(q[bad])[:max_report]
    points = [
        {"x": plan.x[i].tolist(), "xi": plan.xi[j].tolist(), "value": float(q[i, j])}
        for i, j in idx[order]
    ]
    # beyond half the x-extent the lattice no longer samples large |x|
    x_ext = float(np.sqrt(np.sum(plan.x**2, axis=-1)).max())
    R_sel, C0 = radii[-1], 0.0
    if far > 0:
        r_bad = r[bad].max() if bad.any() else -1.0
        for R, c in profile:
            if R > x_ext / 2:
                break
            if R > r_bad:
                R_sel, C0 = R, c
                break
    rep = EllipticityReport(C0, R_sel, m, points, int(bad.sum()), float(thr), profile)

    if check_limit is None:
        check_limit = a.limit is not None
    if check_limit:
        if a.limit is None:
            raise CapabilityError(f"{a.name} has no limit at spatial infinity; condition-2 check impossible")
        lim = a.limit_at(plan.xi)[None]
        dev = np.abs(vals - lim).max(axis=(-1, -2)) * br ** (-m)
        sup_xi = dev.max(axis=1)
        rx = np.sqrt(np.sum(plan.x**2, axis=-1))
        order = np.argsort(rx)
        tail = np.maximum.accumulate(sup_xi[order][::-1])[::-1]
        rs = rx[order]
        # keep the radii where the running sup drops, plus both ends
        keep = np.r_[True, np.diff(tail) != 0]
        keep[-1] = True
        env = [[float(u), float(v)] for u, v in zip(rs[keep], tail[keep])]
        top = env[0][1]
        rep.limit_envelope = env
        rep.limit_decay = bool(env[-1][1] <= 1e-12 or env[-1][1] <= 0.05 * top)
    return rep


# ---------------------------------------------------------------------------
# parametrix


PSI_PROFILES = ("quintic", "exp")


@dataclass(frozen=True)
class ParametrixConfig:
    """psi(R^-2 (|x|^2 + |xi|^2)) with psi = 0 on [0, 1] and psi = 1 on [2, inf)."""

    R: float = 1.0
    psi_profile: str = "quintic"

    def __post_init__(self):
        if not self.R > 0:
            raise ParameterError("parametrix radius R must be positive")
        if self.psi_profile not in PSI_PROFILES:
            raise ParameterError(f"psi_profile must be one of {PSI_PROFILES}")

    def psi(self, x, xi, gamma_xi=None, gamma_x=None) -> np.ndarray:
        """d_xi^gamma_xi d_x^gamma_x of the phase-space cutoff."""
        n = x.shape[-1]
        gx, gxi = as_multi(gamma_x, n), as_multi(gamma_xi, n)
        z = np.concatenate(np.broadcast_arrays(xi, x), axis=-1) / self.R
        step = _poly_step if self.psi_profile == "quintic" else _exp_step
        out = square_chain(z, lambda s, j: step(s - 1.0, j), gxi + gx)
        return out * self.R ** (-sum(gxi) - sum(gx))


def _inverse(A: np.ndarray) -> np.ndarray:
    """Explicit inverse: Cramer's rule up to 3 x 3, LU beyond."""
    N = A.shape[-1]
    if N == 1:
        return 1.0 / A
    if N == 2:
        det = A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]
        adj = np.stack([np.stack([A[..., 1, 1], -A[..., 0, 1]], -1), np.stack([-A[..., 1, 0], A[..., 0, 0]], -1)], -2)
        return adj / det[..., None, None]
    if N == 3:
        r0, r1, r2 = A[..., 0, :], A[..., 1, :], A[..., 2, :]
        cols = [np.cross(r1, r2), np.cross(r2, r0), np.cross(r0, r1)]
        det = np.sum(r0 * cols[0], axis=-1)
        return np.stack(cols, axis=-1) / det[..., None, None]
    return np.linalg.inv(A)


def _det_scale(A):
    N = A.shape[-1]
    det = np.linalg.det(A) if N > 1 else A[..., 0, 0]
    return np.abs(det), np.abs(A).max(axis=(-1, -2)) ** N


def _inverse_derivatives(get, gamma, n):
    """d^gamma (A^-1) from d^mu A by differentiating A A^-1 = I.

    ``get(mu)`` returns d^mu A with mu a 2n multi-index (xi part first).
    """
    memo = {}

    def c(g):
        if g in memo:
            return memo[g]
        if not any(g):
            memo[g] = inv0
            return inv0
        acc = 0.0
        for mu, coeff in sub_indices(g):
            if not any(mu):
                continue
            rest = tuple(a - b for a, b in zip(g, mu))
            acc = acc + coeff * (get(mu) @ c(rest))
        memo[g] = -(inv0 @ acc)
        return memo[g]

    inv0 = _inverse(get((0,) * (2 * n)))
    return c(tuple(gamma))


def build_parametrix(a: Symbol, cfg: ParametrixConfig) -> Symbol:
    """b = psi(R^-2 (|x|^2 + |xi|^2)) a^-1, of order -m.

    The inverse is explicit at every evaluation point with psi > 0; inside
    the closed ball |x|^2 + |xi|^2 <= R^2 the symbol is set to 0 with all its
    derivatives.  A singular a where psi > 0 raises InversionError with the
    offending (x, xi).
    """
    n, N = a.dim, a.N

    def fn(x, xi, alpha, beta):
        lead = np.broadcast_shapes(x.shape[:-1], xi.shape[:-1])
        xb = np.broadcast_to(x, lead + (n,))
        qb = np.broadcast_to(xi, lead + (n,))
        live = (np.sum(xb**2, -1) + np.sum(qb**2, -1)) / cfg.R**2 > 1.0
        eye = np.broadcast_to(np.eye(N, dtype=complex), lead + (N, N))
        cache = {}

        def get(mu):
            if mu not in cache:
                v = np.broadcast_to(a(xb, qb, mu[:n], mu[n:]), lead + (N, N)).copy()
                v[~live] = eye[~live] if not any(mu) else 0.0
                cache[mu] = v
            return cache[mu]

        A0 = get((0,) * (2 * n))
        det, scale = _det_scale(A0)
        sing = live & ~(det > 1e-12 * scale)
        if sing.any():
            k = tuple(np.argwhere(sing)[0])
            loc = {"x": xb[k].tolist(), "xi": qb[k].tolist()}
            raise InversionError(f"{a.name} is singular at x = {loc['x']}, xi = {loc['xi']} where psi > 0", loc)
        gamma = tuple(alpha) + tuple(beta)
        out = np.zeros(lead + (N, N), dtype=complex)
        for mu, coeff in sub_indices(gamma):
            p = cfg.psi(xb, qb, mu[:n], mu[n:])
            if not np.any(p):
                continue
            rest = tuple(g - h for g, h in zip(gamma, mu))
            out = out + coeff * p[..., None, None] * _inverse_derivatives(get, rest, n)
        return out

    limit = None
    if a.limit is not None:
        def limit(xi, alpha):
            return _inverse_derivatives(lambda mu: a.limit_at(xi, mu[:n]), tuple(alpha) + (0,) * n, n)

    spec = replace(a.spec, m=-a.spec.m, variant="tilde")
    b = Symbol(fn, spec, n, limit, a.derivative_mode, f"parametrix({a.name})", a.x_order, a.xi_order)
    b.params = {"R": cfg.R, "psi_profile": cfg.psi_profile, "of": a.name}
    return b


def normalized(a: Symbol) -> Symbol:
    """a~ = a <xi>^-m, order 0."""
    if a.spec.m == 0:
        return a
    out = xi_weight(a, -a.spec.m)
    out.name = f"{a.name}<xi>^{-a.spec.m:g}"
    return out


# ---------------------------------------------------------------------------
# compactness proxy


def fourier_block(M: np.ndarray, grid: Grid, N: int = 1, s: float = 0.0, m: float = 0.0, band: float = 1.0) -> np.ndarray:
    """<D>^s M <D>^-(s+m) in the unitary Fourier basis, cut to |xi_i| <= band * P / (2L).

    Singular values are unchanged by the basis switch, so this is the L^2
    matrix of the conjugated operator, compressed to the retained band.
    """
    n = grid.size * N
    axes = tuple(range(grid.dim))

    def left_fft(T):
        return np.fft.fftn(T.reshape(grid.shape + (N, n)), axes=axes, norm="ortho").reshape(n, n)

    H = left_fft(left_fft(np.asarray(M)).conj().T).conj().T
    xi = np.repeat(grid.xi.reshape(-1, grid.dim), N, axis=0)
    br = np.sqrt(1.0 + np.sum(xi**2, axis=-1))
    keep = np.max(np.abs(xi), axis=-1) <= band * grid.points / (2 * grid.half_length) + 1e-9
    H = (br**s)[:, None] * H * (br ** (-(s + m)))[None, :]
    return H[np.ix_(keep, keep)]


@dataclass
class CompactnessReport:
    levels: list
    singular_values: list
    tail_exponent: float
    stability: list
    max_deviation: float
    compared: int
    plateau: list
    verdict: str
    floor: float = 0.0
    extra: dict = field(default_factory=dict)

    def to_dict(self, full: bool = True):
        d = asdict(self)
        if not full:
            d["singular_values"] = [sv[: max(self.compared, 8)] for sv in self.singular_values]
        return _clean(d)

    def csv_rows(self):
        """(level, k, sigma_k) rows, plot-ready."""
        for P, sv in zip(self.levels, self.singular_values):
            for k, v in enumerate(sv, 1):
                yield P, k, float(v)


def _svals(M):
    return np.linalg.svd(M, compute_uv=False)


def _as_matrix(K, s):
    if isinstance(K, DiscretizedOperator):
        return fourier_block(K.matrix, K.grid, K.N, s, K.order)
    return np.asarray(K)


def compactness_proxy(K, levels=None, s: float = 0.0, stability_tol: float = 0.2, tail_min: float = 0.5,
                      rtol: float = 1e-8, atol: float = 1e-12, scale: float = 0.0, workers: int = 1) -> CompactnessReport:
    """Refinement test on singular values.

    ``K`` is a list of L^2 matrices (or DiscretizedOperators, conjugated here
    with their own order), one per level, or a callable level -> matrix with
    ``levels`` given.  Only sigma_k above ``max(atol, rtol * sigma_1)`` at the
    finest level and with k <= (coarsest size) / 4 are compared; the tail
    exponent r in sigma_k ~ k^-r is fitted over the upper three quarters of
    that range.  A spectrum that reaches the floor before k = (coarsest
    size) / 4 counts as finite rank (r = inf).  ``scale`` is the size of
    the terms K was formed from; sigma below 1e-10 * scale is roundoff.
    """
    if callable(K) and not isinstance(K, (list, tuple)):
        if levels is None:
            raise ParameterError("levels are required when K is a callable")
        mats = [_as_matrix(K(P), s) for P in levels]
    else:
        mats = [_as_matrix(k, s) for k in K]
        levels = list(levels) if levels is not None else [m.shape[0] for m in mats]
    if len(mats) < 2:
        raise ParameterError("compactness proxy needs at least two refinement levels")
    if len(levels) != len(mats):
        raise ParameterError("levels and operators differ in length")
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            svals = list(ex.map(_svals, mats))
    else:
        svals = [_svals(M) for M in mats]

    finest = svals[-1]
    s1 = float(finest[0]) if finest.size else 0.0
    atol = max(atol, 1e-10 * scale)
    if s1 <= atol:
        return CompactnessReport(list(levels), [sv.tolist() for sv in svals], math.inf, [], 0.0, 0, [0.0] * len(svals), "compact-like", atol,
                                 {"rank": 0})
    floor = max(atol, rtol * s1)
    k_cap = max(1, min(sv.size for sv in svals) // 4)
    n_sig = int(np.sum(finest > floor))
    K_cmp = min(n_sig, k_cap)
    table = np.array([sv[:K_cmp] for sv in svals])
    hi, lo = table.max(axis=0), table.min(axis=0)
    dev = (hi - lo) / np.where(hi > 0, hi, 1.0)
    max_dev = float(dev.max()) if dev.size else 0.0

    if n_sig < k_cap:
        r = math.inf  # the spectrum reaches the floor: finite rank up to roundoff
    else:
        k0 = max(1, K_cmp // 4)
        ks = np.arange(k0, K_cmp + 1)
        r = -loglog_fit(ks, finest[k0 - 1:K_cmp])[0]
    plateau = [float(sv[K_cmp - 1] / sv[0]) if sv[0] > 0 else 0.0 for sv in svals]

    if max_dev <= stability_tol and r > tail_min:
        verdict = "compact-like"
    elif r < 0.1 and min(plateau) >= 0.1:
        verdict = "not-compact-like"
    else:
        verdict = "inconclusive"
    return CompactnessReport(list(levels), [sv.tolist() for sv in svals], float(r), dev.tolist(), max_dev, K_cmp, plateau, verdict, floor,
                             {"significant": n_sig, "k_cap": k_cap})


# ---------------------------------------------------------------------------
# experiment configuration and residuals


@dataclass(frozen=True)
class FredholmExperimentConfig:
    """Parameters of the Fredholm experiment.

    ``svd_threshold`` is relative to the largest singular value at the finest
    level.  ``band`` keeps |xi_i| <= band * P / (2L) in residual matrices;
    values below 1 drop the aliased edge of lattice products.
    """

    s: float = 0.1
    p: float = 2.0
    theta: float = 0.1
    eps_tilde: float = 0.05
    levels: tuple = (256, 512, 1024)
    svd_threshold: float = 1e-6
    L: float = 1.0
    R: float | None = None
    psi_profile: str = "quintic"
    band: float = 0.5
    workers: int = 1

    def __post_init__(self):
        levels = tuple(int(P) for P in self.levels)
        object.__setattr__(self, "levels", levels)
        if len(levels) < 2:
            raise ParameterError("at least two refinement levels are needed")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ParameterError("refinement levels must increase")
        if not self.p >= 1:
            raise ParameterError("p must be at least 1")
        if not self.theta > 0 or not self.eps_tilde > 0:
            raise ParameterError("theta and eps_tilde must be positive")
        if not 0 < self.svd_threshold < 1:
            raise ParameterError("svd_threshold is relative and must lie in (0, 1)")
        if not 0 < self.band <= 1:
            raise ParameterError("band must lie in (0, 1]")

    def window(self, spec, n: int) -> tuple[float, float]:
        reg = spec.regularity
        return (1 - spec.rho) * n / 2 - (1 - spec.delta) * reg + self.theta + self.eps_tilde, reg

    def hypothesis_issues(self, spec, n: int) -> list[tuple[str, str]]:
        """(label, message) for every hypothesis of the theorem the parameters miss."""
        out = []
        lo, hi = self.window(spec, n)
        if not lo < self.s < hi:
            out.append(("fredholm-window", f"s = {self.s} outside ({lo:.4g}, {hi:.4g})"))
        top = min(spec.regularity * (spec.rho - spec.delta), 1.0)
        if not self.theta < top:
            out.append(("fredholm-theta", f"theta = {self.theta} not in (0, {top:.4g})"))
        need = (n + 2) + n * max(0.5, 1 / self.p)
        if spec.M < need:
            out.append(("fredholm-xi-regularity", f"M = {spec.M} below (n+2) + n max(1/2, 1/p) = {need}"))
        if self.p != 2:
            out.append(("fredholm-p", f"p = {self.p}: norms are computed for p = 2 only"))
        return out


def _warn(issues, stacklevel=3):
    for label, msg in issues:
        warnings.warn(HypothesisWarning(label, msg), stacklevel=stacklevel)


def _staged(stage):
    def wrap(fn):
        def inner(*args, **kw):
            try:
                return fn(*args, **kw)
            except RoughPDOError as e:
                if getattr(e, "stage", None) is None:
                    e.stage = stage
                    e.args = (f"[{stage}] {e.args[0] if e.args else ''}",) + e.args[1:]
                raise
        return inner
    return wrap


def composition_residual(a1: Symbol, a2: Symbol, cfg: FredholmExperimentConfig, k: int | None = None) -> CompactnessReport:
    """Proxy for op(a1) op(a2) - op(a1 #_k a2), k = ceil(theta) by default, conjugated H^{s+m1+m2} -> H^s."""
    issues = cfg.hypothesis_issues(a1.spec, a1.dim) + cfg.hypothesis_issues(a2.spec, a2.dim)
    _warn(sorted(set(issues)))
    k = k if k is not None else max(1, math.ceil(cfg.theta))
    sharp = sharp_product(a1, a2, k)
    m = a1.spec.m + a2.spec.m

    scale = 0.0

    def residual(P):
        nonlocal scale
        g = Grid(a1.dim, cfg.L, P)
        prod = quantize(a1, g).matrix @ quantize(a2, g).matrix
        scale = max(scale, float(np.abs(fourier_block(prod, g, a1.N, cfg.s, m, cfg.band)).max()))
        return fourier_block(prod - quantize(sharp, g).matrix, g, a1.N, cfg.s, m, cfg.band)

    mats = [residual(P) for P in cfg.levels]
    rep = compactness_proxy(mats, cfg.levels, scale=scale, workers=cfg.workers)
    rep.extra.update({"k": k, "order": m, "ceil_theta_changes": math.ceil(cfg.theta) != k})
    return rep


# ---------------------------------------------------------------------------
# kernel counts and winding


@dataclass
class KernelReport:
    levels: list
    counts: list  # per level, at the nominal threshold
    counts_low: list  # threshold / 10
    counts_high: list  # threshold * 10
    threshold: float
    smallest: list  # per level, the few smallest sigma / sigma_max
    robust: bool
    stable: bool

    def to_dict(self):
        return _clean(asdict(self))


def _count_small(sv, rel):
    return int(np.sum(sv < rel * sv[0])) if sv.size and sv[0] > 0 else int(sv.size)


def kernel_dimensions(a: Symbol, levels, s: float = 0.0, svd_threshold: float = 1e-6, L: float = 1.0, workers: int = 1,
                      adjoint: bool = False) -> KernelReport:
    """Count sigma below svd_threshold * sigma_max of <D>^s op(a) <D>^-(s+m) per level.

    ``robust`` means the counts are unchanged at threshold / 10 and * 10 on
    every level; ``stable`` that the count agrees across levels.
    """
    def sv(P):
        g = Grid(a.dim, L, int(P))
        M = quantize(a, g).matrix
        if adjoint:
            M = M.conj().T
        return _svals(fourier_block(M, g, a.N, s, a.spec.m))

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            svals = list(ex.map(sv, levels))
    else:
        svals = [sv(P) for P in levels]
    c = [_count_small(v, svd_threshold) for v in svals]
    lo = [_count_small(v, svd_threshold / 10) for v in svals]
    hi = [_count_small(v, svd_threshold * 10) for v in svals]
    smallest = [(v[::-1][:4] / v[0]).tolist() for v in svals]
    return KernelReport(list(levels), c, lo, hi, svd_threshold, smallest, c == lo == hi, len(set(c)) == 1)


def winding_index(a: Symbol, R: float, samples: int = 4096, C0: float | None = None, max_samples: int = 1 << 20) -> int:
    """Winding number of a~ = a <xi>^-m along the boundary of [-R, R]^2, counterclockwise in (x, xi).

    Samples double until every argument step is below pi/4.  Values below
    0.1 C0 on the loop raise ConditioningError; C0 defaults to the
    ellipticity constant of a on the standard plan.
    """
    if a.dim != 1 or a.N != 1:
        raise ParameterError("winding_index needs n = N = 1")
    if not R > 0:
        raise ParameterError("R must be positive")
    if C0 is None:
        C0 = ellipticity_check(a, check_limit=False).C0
    m = a.spec.m
    while True:
        t = np.linspace(0.0, 4.0, samples * 4, endpoint=False)
        side, u = np.divmod(t, 1.0)
        s = -R + 2 * R * u
        x = np.select([side == 0, side == 1, side == 2], [s, np.full_like(s, R), -s], np.full_like(s, -R))
        xi = np.select([side == 0, side == 1, side == 2], [np.full_like(s, -R), s, np.full_like(s, R)], -s)
        z = a.scalar(x, xi) * (1.0 + xi**2) ** (-m / 2)
        if np.abs(z).min() < 0.1 * C0 or not np.all(np.isfinite(z)):
            raise ConditioningError(f"|a~| = {np.abs(z).min():.3g} on the loop, below 0.1 C0 = {0.1 * C0:.3g}")
        steps = np.angle(np.roll(z, -1) / z)
        if np.abs(steps).max() < np.pi / 4:
            w = steps.sum() / (2 * np.pi)
            if abs(w - round(w)) > 1e-6:
                raise ConditioningError(f"accumulated argument {w} is not an integer")
            return int(round(w))
        if samples >= max_samples:
            raise ConditioningError("argument steps stay large; the loop is not resolved")
        samples *= 2


# ---------------------------------------------------------------------------
# the experiment


@dataclass
class FredholmReport:
    symbol: str
    m: float
    dim: int
    N: int
    config: dict
    ellipticity: dict
    R: float
    residual_left: CompactnessReport
    residual_right: CompactnessReport
    kernel: KernelReport
    kernel_dim: int
    cokernel_dim: int
    index: int | None
    index_method: str
    winding: int | None
    caveat: str
    hypotheses: list
    adjoint: bool = False
    timings: dict = field(default_factory=dict)

    @property
    def compact_residuals(self) -> bool:
        return self.residual_left.verdict == self.residual_right.verdict == "compact-like"

    @property
    def passed(self) -> bool:
        return self.compact_residuals and self.kernel.robust and self.index is not None

    def to_dict(self, full_spectra: bool = False):
        d = {k: v for k, v in self.__dict__.items() if k not in ("residual_left", "residual_right", "kernel")}
        d["residual_left"] = self.residual_left.to_dict(full_spectra)
        d["residual_right"] = self.residual_right.to_dict(full_spectra)
        d["kernel"] = self.kernel.to_dict()
        d["compact_residuals"] = self.compact_residuals
        d["passed"] = self.passed
        return _clean(d)

    def csv_rows(self):
        for name, rep in (("left", self.residual_left), ("right", self.residual_right)):
            for P, k, v in rep.csv_rows():
                yield name, P, k, v


CAVEAT = ("square truncations have equal threshold counts for K and K*, so kernel and cokernel "
          "counts coincide by construction; the index comes from the winding number when n = N = 1")


def fredholm_experiment(a: Symbol, cfg: FredholmExperimentConfig, adjoint: bool = False, strict: bool = False) -> FredholmReport:
    """Parametrix residuals, kernel counts and index for op(a): H^{m+s} -> H^s.

    With ``adjoint`` the experiment runs on the lattice adjoint: every
    matrix is replaced by its conjugate transpose and s by -s (the dual
    pairing), so the left and right residuals swap and the winding number
    changes sign.
    """
    timings = {}
    if adjoint:
        # the lattice adjoint of H^s -> H^s acts on H^-s
        cfg = replace(cfg, s=-cfg.s)
    issues = cfg.hypothesis_issues(a.spec, a.dim)
    if strict and issues:
        raise HypothesisError(issues[0][0], issues[0][1])
    _warn(issues)

    t0 = time.perf_counter()
    at = normalized(a)
    ell = _staged("ellipticity")(ellipticity_check)(at)
    if not ell.elliptic:
        err = HypothesisError("ellipticity", f"{a.name}: no radius R with |det a~| bounded below on the lattice")
        err.stage = "ellipticity"
        raise err
    if ell.limit_decay is False:
        issues.append(("limit-at-infinity", f"{a.name}: |a - a(inf)| envelope does not decay"))
        _warn(issues[-1:])
    R = cfg.R if cfg.R is not None else max(ell.R, 1.0)
    timings["ellipticity"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    b = _staged("parametrix")(build_parametrix)(at, ParametrixConfig(R, cfg.psi_profile))

    def residuals(P):
        g = Grid(a.dim, cfg.L, int(P))
        A = quantize(at, g).matrix
        B = quantize(b, g).matrix
        if adjoint:
            A, B = A.conj().T, B.conj().T
        eye = identity(g, a.N).matrix
        return (fourier_block(A @ B - eye, g, a.N, cfg.s, 0.0, cfg.band),
                fourier_block(B @ A - eye, g, a.N, cfg.s, 0.0, cfg.band))

    pairs = _staged("residuals")(lambda: [residuals(P) for P in cfg.levels])()
    timings["assembly"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    proxy = _staged("compactness")(compactness_proxy)
    left = proxy([p[0] for p in pairs], cfg.levels, scale=1.0, workers=cfg.workers)
    right = proxy([p[1] for p in pairs], cfg.levels, scale=1.0, workers=cfg.workers)
    timings["compactness"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    kern = _staged("kernel")(kernel_dimensions)(at, cfg.levels[-1:], cfg.s, cfg.svd_threshold, cfg.L, adjoint=adjoint)
    kdim = kern.counts[-1]
    winding = None
    if a.dim == 1 and a.N == 1:
        w_R = max(2 * ell.R, 4.0)
        winding = _staged("winding")(winding_index)(at, w_R, C0=ell.C0)
        if adjoint:
            winding = -winding
    timings["kernel"] = time.perf_counter() - t0
    if not kern.robust:
        index, method = None, "inconclusive"
    elif winding is not None:
        index, method = winding, "winding"
    else:
        index, method = kdim - kdim, "kernel_counts"  # equal by construction, see CAVEAT
    return FredholmReport(
        a.name, a.spec.m, a.dim, a.N, _clean(asdict(cfg)), ell.to_dict(), R, left, right, kern, kdim, kdim,
        index, method, winding, CAVEAT, [list(i) for i in issues], adjoint, timings,
    )


__all__ = [
    "CompactnessReport",
    "EllipticityPlan",
    "EllipticityReport",
    "FredholmExperimentConfig",
    "FredholmReport",
    "KernelReport",
    "ParametrixConfig",
    "build_parametrix",
    "compactness_proxy",
    "composition_residual",
    "ellipticity_check",
    "fourier_block",
    "fredholm_experiment",
    "kernel_dimensions",
    "normalized",
    "winding_index",
]
