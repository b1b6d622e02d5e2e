import math

import numpy as np
import pytest

from roughpdo import profiles as pr
from roughpdo.errors import CapabilityError, ParameterError
from roughpdo.oscint import (
    Amplitude,
    OscIntConfig,
    Regularizer,
    amplitude_gallery,
    apply_regularizer,
    invariance_check,
    osc_integral,
    richardson,
    separable,
    sequence_continuity_check,
)

CFG = OscIntConfig()
DEEP = OscIntConfig(epsilon_schedule=tuple(2.0**-k for k in range(1, 10)), resolution=1024)


def test_config_validation():
    with pytest.raises(ParameterError):
        OscIntConfig(epsilon_schedule=(0.5, 0.5, 0.25))
    with pytest.raises(ParameterError):
        OscIntConfig(epsilon_schedule=(0.25, 0.5, 0.125))
    with pytest.raises(ParameterError):
        OscIntConfig(chi="tophat")
    y, eta, w = CFG.lattice()
    assert y[CFG.resolution // 2] == 0 and eta[CFG.resolution // 2] == 0
    assert w * CFG.resolution == pytest.approx(1.0)


def test_gaussian_against_direct_quadrature():
    v, d = osc_integral(amplitude_gallery("gaussian"), CFG)
    # the y-integral is sqrt(pi) exp(-eta^2/4); what remains is a 1D integral
    eta = np.linspace(-20, 20, 40001)
    direct = np.trapezoid(math.sqrt(math.pi) * np.exp(-eta**2 / 4) * np.exp(-eta**2), eta) / (2 * math.pi)
    assert direct == pytest.approx(1 / math.sqrt(5), abs=1e-12)
    assert abs(v - direct) <= 1e-8
    assert not d.divergent
    assert d.box_sensitivity < 1e-10


def test_one_gives_one():
    v, d = osc_integral(amplitude_gallery("one"), CFG)
    assert abs(v - 1) <= 1e-8
    assert d.order == pytest.approx(4.0)


@pytest.mark.parametrize("x", np.linspace(-2.5, 2.5, 8))
def test_reproduction(x):
    v, _ = osc_integral(amplitude_gallery("reproduce", x=x), CFG)
    assert abs(v - math.exp(-x * x / 2)) <= 1e-6


def test_bessel_gaussian_value():
    # <D>^2 applied to exp(-y^2/2) at 0 is 1 - u''(0) = 2
    v, _ = osc_integral(amplitude_gallery("bessel_gaussian", m=2), CFG)
    assert abs(v - 2) <= 1e-8


def test_zero_amplitude():
    z = 0 * amplitude_gallery("gaussian")
    r = invariance_check(z, CFG, [Regularizer("A_type", 2, 0)])
    assert all(row["value"] == 0 for row in r["values"])
    assert r["passed"]


def test_identity_regularizer():
    a = amplitude_gallery("gaussian")
    b = apply_regularizer(Regularizer("A_type", 0, 0), a)
    y, e = np.meshgrid(np.linspace(-2, 2, 9), np.linspace(-2, 2, 7), indexing="ij")
    for al, be in [(0, 0), (1, 2)]:
        assert np.array_equal(a(y, e, al, be), b(y, e, al, be))


def test_plane_wave_A2():
    c = 1.7
    a = amplitude_gallery("plane_wave", c=c)
    b = apply_regularizer(Regularizer("A_type", 2, 0), a)
    y, e = np.meshgrid(np.linspace(-3, 3, 13), np.linspace(-4, 4, 11), indexing="ij")
    expected = (1 + e**2) ** -1 * (1 + c * c) * np.exp(1j * c * y)
    assert np.abs(b(y, e) - expected).max() <= 1e-14
    assert b.m == a.m - 2 and b.tau == a.tau


def _fd(f, t, k, h=1e-3):
    # central differences of order 2 and 4 accuracy, first and second derivative
    if k == 1:
        return (-f(t + 2 * h) + 8 * f(t + h) - 8 * f(t - h) + f(t - 2 * h)) / (12 * h)
    return (-f(t + 2 * h) + 16 * f(t + h) - 30 * f(t) + 16 * f(t - h) - f(t - 2 * h)) / (12 * h * h)


def test_B2_against_finite_differences():
    a = amplitude_gallery("gaussian")
    b = apply_regularizer(Regularizer("B_type", 2, 0, 0.0, 0.0), a)
    y = np.linspace(-2, 2, 9)[:, None]
    e = np.linspace(-2, 2, 9)[None, :]

    def g(t):
        return np.exp(-y**2 - t**2)

    # (1 + y^2)^-1 (1 - d_eta^2) a with the eta-derivative by differences
    oracle = (g(e) - _fd(g, e, 2)) / (1 + y**2)
    assert np.abs(b(y, e) - oracle).max() <= 1e-6


def test_capability_error():
    u = Amplitude(lambda y, e, a, b: np.exp(-y**2) + 0 * e, 0, 0, N_deg=0, M_deg=1, name="thin")
    with pytest.raises(CapabilityError):
        apply_regularizer(Regularizer("A_type", 2, 0), u)
    with pytest.raises(CapabilityError):
        apply_regularizer(Regularizer("B_type", 1), u)
    with pytest.raises(CapabilityError):
        u(0.0, 0.0, 1, 0)


def test_regularizer_validation():
    with pytest.raises(ParameterError):
        Regularizer("C_type", 1)
    with pytest.raises(ParameterError):
        Regularizer("B_type", 2, 1)
    with pytest.raises(ParameterError):
        Regularizer("A_type", -1)


def test_feasibility_heuristic():
    a = separable(pr.Gaussian(), pr.Bracket(10.0), m=10.0, tau=-10.0)
    with pytest.raises(ParameterError):
        osc_integral(a, CFG)


def test_growth_bookkeeping():
    a = amplitude_gallery("bessel_gaussian", m=2)
    assert apply_regularizer(Regularizer("A_type", 3, 1), a).m == a.m - 3
    assert apply_regularizer(Regularizer("A_type", 3, 1), a).tau == a.tau - 1
    assert apply_regularizer(Regularizer("B_type", 2, delta_weight=0.5, xi_ref=3.0), a).tau == a.tau - 2


def test_check_growth_bounded():
    a = amplitude_gallery("bessel_gaussian", m=2)
    g = a.check_growth()
    assert max(g.values()) < 10


def test_linearity():
    a, b = amplitude_gallery("gaussian"), amplitude_gallery("reproduce", x=0.4)
    va, _ = osc_integral(a, CFG)
    vb, _ = osc_integral(b, CFG)
    vc, _ = osc_integral(2.5 * a + (-1.5j) * b, CFG)
    assert abs(vc - (2.5 * va - 1.5j * vb)) <= 1e-8 * abs(vc)


@pytest.mark.parametrize(
    "reg",
    [Regularizer("A_type", 2, 0), Regularizer("A_type", 1, 0), Regularizer("A_type", 0, 2), Regularizer("A_type", 3, 3)],
    ids=lambda r: r.label(),
)
def test_A_invariance_gaussian(reg):
    r = invariance_check(amplitude_gallery("gaussian"), CFG, [reg])
    assert r["spread"] <= 1e-6


def test_chi_independence_reproduction():
    r = invariance_check(amplitude_gallery("reproduce", x=0.9), CFG, [], chis=("gaussian", "bump"))
    assert r["passed"]


def test_B_even_delta0_equals_A_in_eta():
    a = amplitude_gallery("bessel_gaussian", m=2)
    vb, _ = osc_integral(a, CFG, Regularizer("B_type", 2, 0, 0.0, 5.0))
    va, _ = osc_integral(a, CFG, Regularizer("A_type", 0, 2))
    assert abs(vb - va) <= 1e-6


@pytest.mark.parametrize("l", [1, 2, 3])
def test_B_invariance_weighted(l):
    a = amplitude_gallery("bessel_gaussian", m=2)
    v0, _ = osc_integral(a, DEEP)
    v, d = osc_integral(a, DEEP, Regularizer("B_type", l, 0, 1.0, 2.0))
    assert abs(v - v0) <= 1e-5 * abs(v0)
    assert d.extrapolation_error <= 1e-5


def test_short_schedule_reports_extrapolation_error():
    # kappa = sqrt(5) widens the amplitude in eta; six levels are not enough
    a = amplitude_gallery("bessel_gaussian", m=2)
    v, d = osc_integral(a, CFG, Regularizer("B_type", 3, 0, 1.0, 2.0))
    assert abs(v - 2) > 1e-3
    assert d.extrapolation_error > 1e-3


def test_divergence_flag():
    # <y>^8 with no eta-decay: the lattice sums keep growing as eps shrinks
    a = separable(pr.Bracket(8.0), pr.Constant(1.0), m=0.0, tau=8.0)
    _, d = osc_integral(a, OscIntConfig(resolution=64))
    assert d.divergent
    _, d = osc_integral(amplitude_gallery("gaussian"), CFG)
    assert not d.divergent


def test_richardson_exact_on_polynomial_error():
    eps = np.array([2.0**-k for k in range(1, 6)])
    vals = 3.0 + 0.7 * eps**2 - 0.2 * eps**4
    lim, p, _ = richardson(eps, vals)
    assert p == 2.0
    assert abs(lim - 3.0) < 1e-12


def test_sequence_continuity_linear():
    a = amplitude_gallery("reproduce", x=0.3)
    seq = [(1 - 1 / j) * a for j in (2, 4, 8, 16, 64, 10**5)]
    r = sequence_continuity_check(seq, a, CFG)
    assert r["monotone"] and r["passed"]


def test_sequence_continuity_cutoff():
    base = amplitude_gallery("bessel_gaussian", m=2)
    seq = [
        separable(pr.Product(pr.Gaussian(), pr.Gaussian(j)), pr.Product(pr.Bracket(2.0), pr.Gaussian(j)), m=2, tau=0)
        for j in (1, 2, 4, 8, 16, 32, 64, 128, 256)
    ]
    r = sequence_continuity_check(seq, base, CFG)
    assert r["monotone"] and r["passed"], r["errors"]


def test_sequence_constant():
    a = amplitude_gallery("gaussian")
    r = sequence_continuity_check([a, a, a], a, CFG)
    assert r["passed"] and max(r["errors"]) == 0
