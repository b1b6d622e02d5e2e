"""Regularized oscillatory integrals  osint e^{-iy eta} a(y, eta) dy dbar-eta  in one dimension.

The damped integral for each eps is a lattice sum: y runs over [-box, box)
with ``resolution`` points and eta over the DFT-dual lattice (spacing
pi/box), so that y = eta = 0 are nodes and the undamped kernel sums to a
discrete delta.  The eps -> 0 limit is taken by Richardson extrapolation
with an order estimated from the sequence itself.

Regularizers are the integration-by-parts operators of the theory, written
as they act on the amplitude:

* A^l(D_y, eta), l even:  <eta>^-l (1 - d_y^2)^(l/2)
* A^l(D_y, eta), l odd:   <eta>^-l-1 <D_y>^(l-1) + eta <eta>^-l-1 <D_y>^(l-1) D_y
  (the transpose of the exponential-side form, since D_y moves across)
* A^l'(D_eta, y): the same with the roles of y and eta exchanged
* B^l(y, Delta_eta) with kappa = <xi_ref>^delta, in its amplitude-side form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from math import comb
from typing import Callable, NamedTuple

import numpy as np

from . import profiles as pr
from .errors import CapabilityError, ParameterError

MAX_GROWTH = 8.0


class Amplitude:
    """a(y, eta) with derivative oracle ``fn(y, eta, alpha, beta)``.

    ``alpha`` counts eta-derivatives and ``beta`` y-derivatives; the oracle
    must deliver alpha <= N_deg and beta <= M_deg.  ``m`` and ``tau`` are the
    claimed growth exponents (1 + |eta|)^m (1 + |y|)^tau.
    """

    def __init__(self, fn: Callable, m: float = 0.0, tau: float = 0.0, N_deg=math.inf, M_deg=math.inf, name: str = "amplitude"):
        self.fn = fn
        self.m = float(m)
        self.tau = float(tau)
        self.N_deg = N_deg
        self.M_deg = M_deg
        self.name = name

    def __repr__(self):
        return f"Amplitude({self.name}, m={self.m}, tau={self.tau})"

    def __call__(self, y, eta, alpha: int = 0, beta: int = 0) -> np.ndarray:
        if alpha > self.N_deg or beta > self.M_deg:
            raise CapabilityError(f"{self.name}: derivative ({alpha}, {beta}) exceeds degrees ({self.N_deg}, {self.M_deg})")
        y = np.asarray(y, dtype=float)
        eta = np.asarray(eta, dtype=float)
        out = np.asarray(self.fn(y, eta, int(alpha), int(beta)), dtype=complex)
        return np.broadcast_to(out, np.broadcast_shapes(y.shape, eta.shape))

    def __add__(self, other: "Amplitude") -> "Amplitude":
        return Amplitude(
            lambda y, e, a, b: self.fn(y, e, a, b) + other.fn(y, e, a, b),
            max(self.m, other.m), max(self.tau, other.tau),
            min(self.N_deg, other.N_deg), min(self.M_deg, other.M_deg),
            f"({self.name} + {other.name})",
        )

    def __mul__(self, c) -> "Amplitude":
        if isinstance(c, Amplitude):
            return NotImplemented
        return Amplitude(lambda y, e, a, b: c * self.fn(y, e, a, b), self.m, self.tau, self.N_deg, self.M_deg, f"{c}*{self.name}")

    __rmul__ = __mul__

    def check_growth(self, y=None, eta=None, orders: int = 2) -> dict:
        """Sampled max of |d_eta^a d_y^b a| / ((1+|eta|)^m (1+|y|)^tau) per derivative pair."""
        y = np.linspace(-30, 30, 121) if y is None else np.asarray(y, dtype=float)
        eta = np.linspace(-30, 30, 121) if eta is None else np.asarray(eta, dtype=float)
        Y, E = np.meshgrid(y, eta, indexing="ij")
        weight = (1 + np.abs(E)) ** self.m * (1 + np.abs(Y)) ** self.tau
        out = {}
        for a in range(int(min(orders, self.N_deg)) + 1):
            for b in range(int(min(orders, self.M_deg)) + 1):
                out[(a, b)] = float(np.max(np.abs(self(Y, E, a, b)) / weight))
        return out


def separable(fy: pr.Profile, feta: pr.Profile, m: float = 0.0, tau: float = 0.0, name: str = "separable") -> Amplitude:
    """a(y, eta) = fy(y) feta(eta) from profiles with exact derivatives."""
    return Amplitude(lambda y, e, a, b: fy(y, b) * feta(e, a), m, tau, name=name)


def amplitude_gallery(name: str, **p) -> Amplitude:
    """Named test amplitudes.

    gaussian        exp(-y^2 - eta^2)
    one             1
    reproduce       u(x + y) with u = exp(-(.)^2 / (2 sigma^2)); the integral is u(x)
    bessel_gaussian u(y) <eta>^m; the integral is (<D>^m u)(0)
    plane_wave      exp(i c y)
    """
    one = pr.Constant(1.0)
    if name == "gaussian":
        return separable(pr.Gaussian(1 / math.sqrt(2)), pr.Gaussian(1 / math.sqrt(2)), 0.0, 0.0, name)
    if name == "one":
        return separable(one, one, 0.0, 0.0, name)
    if name == "reproduce":
        x, sigma = float(p.get("x", 0.0)), float(p.get("sigma", 1.0))
        g = pr.Gaussian(sigma)
        return separable(_Shifted(g, x), one, 0.0, 0.0, name)
    if name == "bessel_gaussian":
        m, sigma = float(p.get("m", 2.0)), float(p.get("sigma", 1.0))
        return separable(pr.Gaussian(sigma), pr.Bracket(m), m, 0.0, name)
    if name == "plane_wave":
        return separable(pr.PlaneWave(float(p.get("c", 1.0))), one, 0.0, 0.0, name)
    raise LookupError(f"unknown amplitude {name!r}; known: bessel_gaussian, gaussian, one, plane_wave, reproduce")


@dataclass
class _Shifted(pr.Profile):
    inner: pr.Profile
    shift: float

    def __call__(self, t, k=0):
        return self.inner(np.asarray(t, dtype=float) + self.shift, k)


# ---------------------------------------------------------------------------
# regularizers


class _Term(NamedTuple):
    coef: complex
    wy: pr.Profile
    weta: pr.Profile
    dy: int
    deta: int


_ONE = pr.Constant(1.0)


def _bessel_poly(h: int, scale2: float = 1.0):
    """(1 - scale2 d^2)^h as (coefficient, derivative order) pairs."""
    return [(comb(h, k) * (-scale2) ** k, 2 * k) for k in range(h + 1)]


def _a_terms(l: int, in_y: bool) -> list[_Term]:
    def make(coef, weight, order, extra):
        if in_y:
            return _Term(coef, _ONE, weight, order + extra, 0)
        return _Term(coef, weight, _ONE, 0, order + extra)

    if l == 0:
        return [_Term(1.0, _ONE, _ONE, 0, 0)]
    if l % 2 == 0:
        return [make(c, pr.Bracket(-l), k, 0) for c, k in _bessel_poly(l // 2)]
    h = (l - 1) // 2
    lin = pr.Product(pr.Polynomial((0.0, 1.0)), pr.Bracket(-l - 1))
    out = [make(c, pr.Bracket(-l - 1), k, 0) for c, k in _bessel_poly(h)]
    out += [make(-1j * c, lin, k, 1) for c, k in _bessel_poly(h)]  # D = -i d
    return out


def _b_terms(l: int, kappa: float) -> list[_Term]:
    if l == 0:
        return [_Term(1.0, _ONE, _ONE, 0, 0)]
    k2 = kappa * kappa
    if l % 2 == 0:
        return [_Term(c, pr.Bracket(-l, kappa), _ONE, 0, k) for c, k in _bessel_poly(l // 2, k2)]
    h = (l - 1) // 2
    lin = pr.Product(pr.Polynomial((0.0, k2)), pr.Bracket(-l - 1, kappa))
    out = [_Term(c, pr.Bracket(-l - 1, kappa), _ONE, 0, k) for c, k in _bessel_poly(h, k2)]
    out += [_Term(-1j * c, lin, _ONE, 0, k + 1) for c, k in _bessel_poly(h, k2)]
    return out


@dataclass(frozen=True)
class Regularizer:
    """A_type: A^l in y then A^l' in eta.  B_type: B^l(y, Delta_eta)."""

    kind: str = "A_type"
    l: int = 0
    l_prime: int = 0
    delta_weight: float = 0.0
    xi_ref: float = 0.0

    def __post_init__(self):
        if self.kind not in ("A_type", "B_type"):
            raise ParameterError("kind must be A_type or B_type")
        if self.l < 0 or self.l_prime < 0:
            raise ParameterError("regularizer orders must be nonnegative")
        if self.kind == "B_type" and self.l_prime:
            raise ParameterError("B_type has no l_prime")

    @property
    def kappa(self) -> float:
        return (1.0 + self.xi_ref**2) ** (self.delta_weight / 2)

    def stages(self) -> list[list[_Term]]:
        if self.kind == "B_type":
            return [_b_terms(self.l, self.kappa)]
        return [_a_terms(self.l, True), _a_terms(self.l_prime, False)]

    def label(self) -> str:
        if self.kind == "B_type":
            return f"B{self.l}(delta={self.delta_weight}, xi={self.xi_ref})"
        return f"A{self.l}y.A{self.l_prime}eta"


def _apply_terms(terms: list[_Term], a: Amplitude) -> Amplitude:
    need_y = max(t.dy for t in terms)
    need_eta = max(t.deta for t in terms)
    if need_y > a.M_deg or need_eta > a.N_deg:
        raise CapabilityError(f"{a.name} lacks the derivatives the regularizer consumes ({need_eta} in eta, {need_y} in y)")

    def fn(y, e, alpha, beta):
        out = 0.0
        for t in terms:
            for i in range(beta + 1):
                wy = t.wy(y, i)
                if not np.any(wy):
                    continue
                for j in range(alpha + 1):
                    we = t.weta(e, j)
                    if not np.any(we):
                        continue
                    out = out + t.coef * comb(beta, i) * comb(alpha, j) * wy * we * a.fn(y, e, alpha - j + t.deta, beta - i + t.dy)
        return out

    return Amplitude(fn, a.m, a.tau, a.N_deg - need_eta, a.M_deg - need_y, a.name)


def apply_regularizer(reg: Regularizer, a: Amplitude) -> Amplitude:
    """Compose the regularizer with the amplitude's derivative oracle."""
    out = a
    for terms in reg.stages():
        out = _apply_terms(terms, out)
    if reg.kind == "A_type":
        out.m, out.tau = a.m - reg.l, a.tau - reg.l_prime
    else:
        out.tau = a.tau - reg.l
    out.name = f"{reg.label()}[{a.name}]"
    return out


# ---------------------------------------------------------------------------
# quadrature


def _chi_profile(name: str) -> pr.Profile:
    if name == "gaussian":
        return pr.Gaussian(1.0)
    if name == "bump":
        return pr.Bump(2.0)
    raise ParameterError(f"unknown cutoff {name!r}; use gaussian or bump")


@dataclass(frozen=True)
class OscIntConfig:
    chi: str = "gaussian"
    epsilon_schedule: tuple = tuple(2.0**-k for k in range(1, 7))
    box: float = 8 * math.pi
    resolution: int = 256
    box_check: bool = True

    def __post_init__(self):
        eps = np.asarray(self.epsilon_schedule, dtype=float)
        if eps.size < 3 or np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
            raise ParameterError("epsilon_schedule must hold at least 3 strictly decreasing positive values")
        if self.box <= 0 or self.resolution < 8 or self.resolution % 2:
            raise ParameterError("box must be positive and resolution an even integer >= 8")
        _chi_profile(self.chi)

    def lattice(self, box: float | None = None, resolution: int | None = None):
        box = self.box if box is None else box
        R = self.resolution if resolution is None else resolution
        hy = 2 * box / R
        heta = math.pi / box
        k = np.arange(R) - R // 2
        return k * hy, k * heta, hy * heta / (2 * math.pi)


def _lattice_values(a: Amplitude, y, eta):
    return a(y[:, None], eta[None, :])


def _damped_sums(vals, y, eta, w, chi: pr.Profile, eps_list):
    phase = np.exp(-1j * np.outer(y, eta))
    base = vals * phase
    out = []
    for e in eps_list:
        cy = chi(e * y)
        ce = chi(e * eta)
        out.append(complex(w * (cy @ base @ ce)))
    return out


def richardson(eps, values, order=None):
    """Romberg extrapolation to eps -> 0 in powers eps^p, eps^2p, ...

    The order p is estimated from the last three values unless given, and
    snapped to the nearest half-integer when within 0.1 of one.
    Returns (limit, p, table).
    """
    eps = np.asarray(eps, dtype=float)
    v = np.asarray(values, dtype=complex)
    p = order
    if p is None:
        d1, d2 = abs(v[-2] - v[-3]), abs(v[-1] - v[-2])
        r = eps[-2] / eps[-1]
        if d1 > 0 and d2 > 0 and d2 < d1:
            p = float(np.log(d1 / d2) / np.log(r))
        else:
            p = 1.0
        p = float(np.clip(p, 0.5, 8.0))
        # smooth cutoffs give integer or half-integer orders; snap near ones
        if abs(2 * p - round(2 * p)) < 0.2:
            p = round(2 * p) / 2
    h = eps**p
    table = [list(v)]
    for level in range(1, len(v)):
        prev = table[-1]
        # Neville step in h = eps^p: entries span eps indices i .. i+level
        table.append([prev[i + 1] + (prev[i + 1] - prev[i]) / (h[i] / h[i + level] - 1) for i in range(len(prev) - 1)])
    best = table[-1][-1]
    return best, p, table


@dataclass
class OscIntDiagnostics:
    eps: list
    sequence: list
    order: float
    deltas: list
    divergent: bool
    box_value: complex
    box_sensitivity: float
    extrapolation_error: float = 0.0
    regularizer: str | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        def c(z):
            return [float(np.real(z)), float(np.imag(z))]

        return {
            "eps": list(self.eps),
            "sequence": [c(z) for z in self.sequence],
            "order": self.order,
            "deltas": list(self.deltas),
            "divergent": self.divergent,
            "box_value": c(self.box_value),
            "box_sensitivity": self.box_sensitivity,
            "extrapolation_error": self.extrapolation_error,
            "regularizer": self.regularizer,
            **self.extra,
        }


def _feasible(a: Amplitude):
    if a.m > MAX_GROWTH or a.tau > MAX_GROWTH:
        raise ParameterError(f"{a.name}: growth (m={a.m}, tau={a.tau}) too large for lattice quadrature; regularize first")


def _limit(a: Amplitude, cfg: OscIntConfig, box: float, resolution: int):
    y, eta, w = cfg.lattice(box, resolution)
    vals = _lattice_values(a, y, eta)
    seq = _damped_sums(vals, y, eta, w, _chi_profile(cfg.chi), cfg.epsilon_schedule)
    val, p, table = richardson(cfg.epsilon_schedule, seq)
    # size of the integrand on the lattice, the reference for round-off
    mag = float(w * np.abs(vals).sum())
    return val, p, seq, table, mag


def osc_integral(a: Amplitude, cfg: OscIntConfig | None = None, reg: Regularizer | None = None):
    """Value of the oscillatory integral and its diagnostics.

    Box sensitivity is the change of the limit when the box grows by 25%
    at fixed y-spacing.  ``extrapolation_error`` is the change of the limit
    when the finest eps is dropped; a large value means the schedule never reached the
    asymptotic regime (broad amplitudes need smaller eps).
    """
    cfg = cfg or OscIntConfig()
    if reg is not None:
        a = apply_regularizer(reg, a)
    _feasible(a)
    val, p, seq, table, mag = _limit(a, cfg, cfg.box, cfg.resolution)
    if cfg.box_check:
        R2 = 2 * int(round(cfg.resolution * 1.25 / 2))
        val2, *_ = _limit(a, cfg, cfg.box * R2 / cfg.resolution, R2)
    else:
        val2 = val
    diag_row = [abs(table[k][-1] - table[k - 1][-1]) for k in range(1, len(table))]
    deltas = [float(abs(seq[i] - seq[i - 1])) for i in range(1, len(seq))]
    tiny = 1e-12 * max(mag, max(abs(s) for s in seq))
    divergent = bool(deltas[-1] > deltas[-2] and deltas[-1] > tiny)
    diag = OscIntDiagnostics(
        eps=list(cfg.epsilon_schedule),
        sequence=seq,
        order=p,
        deltas=deltas,
        divergent=divergent,
        box_value=val2,
        box_sensitivity=float(abs(val2 - val)),
        extrapolation_error=float(abs(val - richardson(cfg.epsilon_schedule[:-1], seq[:-1])[0])),
        regularizer=None if reg is None else reg.label(),
        extra={"extrapolation_deltas": [float(d) for d in diag_row]},
    )
    return val, diag


def invariance_check(a: Amplitude, cfg: OscIntConfig | None = None, reg_list=(), chis=("gaussian",), tol: float = 1e-5) -> dict:
    """Values across regularizers (plus none) and cutoff profiles, and their spread."""
    cfg = cfg or OscIntConfig()
    rows = []
    for chi in chis:
        c = replace(cfg, chi=chi)
        for reg in (None, *reg_list):
            v, _ = osc_integral(a, c, reg)
            rows.append({"chi": chi, "regularizer": None if reg is None else reg.label(), "value": v})
    vals = np.array([r["value"] for r in rows])
    scale = float(np.max(np.abs(vals)))
    spread = float(np.max(np.abs(vals - vals[0])))
    rel = spread / scale if scale > 0 else 0.0
    return {"values": rows, "spread": spread, "relative_spread": rel, "passed": bool(rel <= tol)}


def sequence_continuity_check(a_seq, a: Amplitude, cfg: OscIntConfig | None = None, tol: float = 1e-4) -> dict:
    """|osint a_j - osint a| along the sequence: non-increasing and small at the end."""
    cfg = cfg or OscIntConfig()
    target, _ = osc_integral(a, cfg)
    vals = [osc_integral(aj, cfg)[0] for aj in a_seq]
    errs = [float(abs(v - target)) for v in vals]
    scale = max(abs(target), 1.0)
    slack = 1e-10 * scale
    monotone = all(e2 <= e1 + slack for e1, e2 in zip(errs, errs[1:]))
    return {"target": target, "values": vals, "errors": errs, "monotone": monotone, "passed": bool(monotone and errs[-1] <= tol * scale)}


__all__ = [
    "Amplitude",
    "OscIntConfig",
    "OscIntDiagnostics",
    "Regularizer",
    "amplitude_gallery",
    "apply_regularizer",
    "invariance_check",
    "osc_integral",
    "richardson",
    "separable",
    "sequence_continuity_check",
]
