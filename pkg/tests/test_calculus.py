import math
import warnings

import numpy as np
import pytest

from roughpdo import profiles as pr
from roughpdo.calculus import (
    CompositionPlan,
    DiscretizedOperator,
    DoubleSpec,
    DoubleSymbol,
    as_double,
    bessel_matrix,
    boundedness_probe,
    identity,
    left_symbol_report,
    left_symbol_theta,
    operator_norm,
    product_double,
    quantize,
    quantize_double,
    sharp_expansion,
    sharp_product,
)
from roughpdo.errors import CapabilityError, HypothesisWarning, ShapeError
from roughpdo.gallery import gallery
from roughpdo.grid import Grid, spectral_derivative
from roughpdo.symbol_core import SymbolClassSpec, matrix_diag, x_function

G = Grid(1, 1.0, 128)


def smooth_u(grid):
    return grid.function(lambda x: np.exp(-2 * x[..., 0] ** 2) * (1 + 0.3 * np.sin(3 * x[..., 0])))


def test_identity_and_derivative():
    one = quantize(gallery("bessel", m=0.0), G)
    assert np.abs(one.matrix - np.eye(G.P)).max() <= 1e-12
    d = quantize(gallery("multiplier", g="i_xi"), G)
    u = G.function(lambda x: np.exp(2j * x[..., 0]))
    assert np.abs(d.apply(u).values - 2j * u.values).max() <= 1e-12
    v = smooth_u(G)
    ref = spectral_derivative(v, (1,)).values * 1j
    assert np.abs(d.apply(v).values - ref).max() <= 1e-11


def test_multiplication_is_diagonal():
    op = quantize(gallery("multiplication", v="gaussian"), G)
    diag = np.exp(-G.x1**2 / 2)
    assert np.abs(op.matrix - np.diag(diag)).max() <= 1e-12


def test_linearity_exact():
    a, b = gallery("smooth_elliptic", m=1.0), gallery("transport")
    lhs = quantize(2.0 * a + (-0.5j) * b, G).matrix
    rhs = 2.0 * quantize(a, G).matrix - 0.5j * quantize(b, G).matrix
    assert np.abs(lhs - rhs).max() <= 1e-12 * np.abs(lhs).max()


def test_multipliers_compose():
    a, b = gallery("bessel", m=1.5), gallery("multiplier", g="i_xi")
    prod = quantize(a, G) @ quantize(b, G)
    assert np.abs(prod.matrix - quantize(a * b, G).matrix).max() <= 1e-10 * np.abs(prod.matrix).max()
    assert prod.order == pytest.approx(2.5)


def test_matrix_symbol_blockwise():
    a, b = gallery("bessel", m=1.0), gallery("multiplication", v="sin")
    M = quantize(matrix_diag([a, b]), G).matrix.reshape(G.P, 2, G.P, 2)
    assert np.abs(M[:, 0, :, 0] - quantize(a, G).matrix).max() <= 1e-12
    assert np.abs(M[:, 1, :, 1] - quantize(b, G).matrix).max() <= 1e-12
    assert np.abs(M[:, 0, :, 1]).max() == 0


def test_two_dimensional_quantization():
    g2 = Grid(2, 1.0, 16)
    op = quantize(gallery("bessel", m=2.0, dim=2), g2)
    u = g2.function(lambda x: np.exp(1j * (x[..., 0] + 2 * x[..., 1])))
    assert np.abs(op.apply(u).values - 6 * u.values).max() <= 1e-11


def test_shape_errors():
    with pytest.raises(ShapeError):
        quantize(gallery("bessel", m=1.0, dim=2), G)
    with pytest.raises(ShapeError):
        quantize(gallery("bessel", m=1.0), G, N=2)


def test_save_load_roundtrip(tmp_path):
    op = quantize(gallery("transport"), Grid(1, 1.0, 32))
    data, head = op.save(tmp_path / "op")
    assert data.stat().st_size == 32 * 32 * 16
    back = DiscretizedOperator.load(tmp_path / "op")
    assert np.array_equal(back.matrix, op.matrix) and back.grid == op.grid and back.order == op.order


def test_bessel_matrix_inverse():
    B = bessel_matrix(G, 1.3) @ bessel_matrix(G, -1.3)
    assert np.abs(B - np.eye(G.P)).max() <= 1e-12


# double symbols


def _generic(d: DoubleSymbol) -> DoubleSymbol:
    """Same symbol without the product shortcut."""
    return DoubleSymbol(d.fn, d.spec, d.dim, d.orders, d.name + "_generic")


def test_double_only_xi_prime():
    g = Grid(1, 1.0, 16)
    a1 = gallery("bessel", m=1.0)
    op = quantize_double(_generic(as_double(a1)), g)
    assert np.abs(op.matrix - quantize(a1, g).matrix).max() <= 1e-12


def test_double_collapses_to_single():
    g = Grid(1, 1.0, 16)
    a1 = gallery("smooth_elliptic", m=1.0)
    op = quantize_double(_generic(as_double(a1)), g)
    assert np.abs(op.matrix - quantize(a1, g).matrix).max() <= 1e-11


def test_double_product_dense_path():
    g = Grid(1, 1.0, 16)
    v, mult = gallery("multiplication", v="cos"), gallery("bessel", m=1.0)
    d = product_double(v, mult)  # v(x) <xi'>
    dense = quantize(v, g).matrix @ quantize(mult, g).matrix
    assert np.abs(quantize_double(_generic(d), g).matrix - dense).max() <= 1e-11
    assert np.abs(quantize_double(d, g).matrix - dense).max() <= 1e-12


def test_double_growth_check():
    d = product_double(gallery("bessel", m=1.0), gallery("smooth_elliptic", m=-1.0))
    xs = np.linspace(-3, 3, 5)
    xis = np.geomspace(1, 100, 6)
    assert d.growth_check(xs, xis, xs, xis) <= 3.0
    assert d.growth_check(xs, xis, xs, xis, d=(1, 0, 1, 1)) <= 3.0


def test_double_spec_variant():
    with pytest.raises(Exception):
        DoubleSpec(0, 0, variant="tilde")


# left reduction


def test_left_symbol_x_prime_independent():
    a1 = gallery("smooth_elliptic", m=1.0)
    aL = left_symbol_theta(_generic(as_double(a1)), 0.7)
    x = np.array([-1.0, 0.3, 2.0])[:, None, None]
    xi = np.array([0.5, 4.0, 40.0])[None, :, None]
    assert np.abs(aL(x, xi) - a1(x, xi)).max() <= 1e-10


def test_left_symbol_mode_shift():
    # a1(xi) sin(2 x'): a_L = sum_+- (+-1/2i) e^{+-2ix} <xi +- 2 theta>
    theta = 0.6
    aL = left_symbol_theta(product_double(gallery("bessel", m=1.0), gallery("multiplication", v="sin", freq=2.0)), theta)
    x = np.array([-2.0, 0.0, 1.1])[:, None]
    xi = np.array([0.0, 3.0, 50.0])[None, :]
    ref = sum(s / 2j * np.exp(s * 2j * x) * np.sqrt(1 + (xi + s * 2 * theta) ** 2) for s in (1, -1))
    got = aL(x[..., None], xi[..., None])[..., 0, 0]
    assert np.abs(got - ref).max() <= 1e-9


def test_left_symbol_theta_zero_is_diagonal():
    a1, a2 = gallery("bessel", m=1.0), gallery("transport")
    d = product_double(a1, a2)
    aL = left_symbol_theta(d, 0.0)
    x = np.array([-1.5, 0.2, 0.9])[:, None, None]
    xi = np.array([1.0, 7.0])[None, :, None]
    assert np.abs(aL(x, xi) - d(x, xi, x, xi)).max() <= 1e-10


def test_left_symbol_theta_continuity():
    d = product_double(gallery("bessel", m=1.0), gallery("smooth_elliptic", m=0.0))
    x, xi = np.array([[0.4]]), np.array([[3.0]])
    vals = np.array([left_symbol_theta(d, t)(x, xi)[0, 0, 0] for t in np.linspace(0, 1, 11)])
    scale = np.abs(vals).max()
    assert np.abs(np.diff(vals)).max() <= 0.05 * scale


def test_left_symbol_derivatives():
    # d_xi a_L for a_L = <xi> (2 + c cos x) summed over shifts
    d = product_double(gallery("bessel", m=1.0), gallery("smooth_elliptic", m=0.0, c=0.5))
    aL = left_symbol_theta(d, 1.0)
    x, xi, h = np.array([[0.3]]), 2.0, 1e-3
    fd = (aL(x, np.array([[xi + h]])) - aL(x, np.array([[xi - h]]))) / (2 * h)
    ex = aL(x, np.array([[xi]]), (1,), None)
    assert abs(fd[0, 0, 0] - ex[0, 0, 0]) <= 1e-6


def test_left_symbol_class_verdict():
    d = product_double(gallery("bessel", m=1.0), gallery("smooth_elliptic", m=0.0))
    rep = left_symbol_report(d, 1.0)
    assert rep.passed, rep.verdicts
    assert rep.exponents["a0_b0"]["exponent"] == pytest.approx(1.0, abs=0.05)


def test_quantize_double_matches_left_symbol():
    g = Grid(1, 1.0, 16)
    d = product_double(gallery("bessel", m=1.0), gallery("multiplication", v="sin"))
    aL = left_symbol_theta(d, 1.0)
    via_left = quantize(aL, g)
    u = g.function(lambda x: np.exp(np.cos(x[..., 0])))
    lhs = quantize_double(d, g).apply(u).values
    rhs = via_left.apply(u).values
    # wrap-around at the top modes differs; a smooth input does not see it
    assert np.abs(lhs - rhs).max() <= 1e-6 * np.abs(lhs).max()


# composition


PLAN = CompositionPlan.default(nx=6, nxi=10, xi_max=128.0)


def test_expansion_x_independent_right_factor():
    a1, a2 = gallery("smooth_elliptic", m=1.0), gallery("bessel", m=-0.5)
    for k in (1, 2):
        r = sharp_expansion(a1, a2, k, plan=PLAN)
        prod = a1(PLAN.x[:, None, None], PLAN.xi[None, :, None]) @ a2(PLAN.x[:, None, None], PLAN.xi[None, :, None])
        assert np.abs(sum(r.expansion_terms) - prod).max() <= 1e-12
        assert np.abs(r.remainder).max() <= 1e-8
        assert r.fitted_remainder_order == -math.inf


def test_expansion_exact_for_xi_sin():
    r = sharp_expansion(gallery("multiplier", g="xi"), gallery("multiplication", v="sin"), 2, plan=PLAN)
    assert np.abs(r.remainder).max() <= 1e-8
    X, XI = PLAN.x[:, None], PLAN.xi[None, :]
    assert np.abs(r.a_L[..., 0, 0] - (XI * np.sin(X) - 1j * np.cos(X))).max() <= 1e-8


def test_k1_is_pointwise_product():
    a1, a2 = gallery("bessel", m=1.0), gallery("smooth_elliptic")
    r = sharp_expansion(a1, a2, 1, plan=PLAN)
    X, XI = PLAN.x[:, None, None], PLAN.xi[None, :, None]
    assert np.abs(r.expansion_terms[0] - a1(X, XI) @ a2(X, XI)).max() <= 1e-14


def test_remainder_two_ways_and_telescoping():
    a1, a2 = gallery("bessel", m=1.0), gallery("smooth_elliptic")
    sups, orders = [], []
    for k in (1, 2, 3):
        r = sharp_expansion(a1, a2, k, plan=PLAN)
        assert r.agreement <= 1e-8
        assert r.fitted_remainder_order <= r.claimed_order + 0.1
        sups.append(np.abs(r.remainder).max())
        orders.append(r.fitted_remainder_order)
    assert sups[0] > sups[1] > sups[2]
    assert orders[0] - orders[1] >= 0.7 and orders[1] - orders[2] >= 0.7


def test_sharp_product_symbol():
    a1, a2 = gallery("bessel", m=1.0), gallery("smooth_elliptic")
    s = sharp_product(a1, a2, 3)
    r = sharp_expansion(a1, a2, 3, plan=CompositionPlan.default(nx=3, nxi=3))
    X, XI = r.plan.x[:, None, None], r.plan.xi[None, :, None]
    assert np.abs(s(X, XI) - sum(r.expansion_terms)).max() <= 1e-12
    assert s.spec.m == 1.0


def test_expansion_capability():
    with pytest.raises(CapabilityError):
        sharp_expansion(gallery("bessel", m=1.0), gallery("rough_elliptic"), 2, plan=PLAN)
    with pytest.raises(CapabilityError):
        sharp_product(gallery("bessel", m=1.0), gallery("rough_elliptic"), 2)


def test_rough_right_factor_k1_skips_quadrature():
    r = sharp_expansion(gallery("bessel", m=1.0), gallery("rough_elliptic", terms=4), 1, plan=CompositionPlan.default(nx=3, nxi=4))
    assert r.remainder_quadrature is None and r.agreement is None


# boundedness


def test_bessel_probe_exact_one():
    rep = boundedness_probe(gallery("bessel", m=1.5), 0.2, (64, 128))
    assert all(abs(n - 1.0) <= 1e-10 for n in rep.norms)
    assert rep.passed


def test_multiplication_probe_matches_svd():
    a = gallery("multiplication", v="periodic_gaussian")
    g = Grid(1, 1.0, 128)
    T = quantize(a, g).conjugated(0.0, 0.0)
    assert operator_norm(T) == pytest.approx(np.linalg.svd(T, compute_uv=False)[0], rel=1e-8)
    rep = boundedness_probe(a, 0.0, (64, 128))
    assert rep.norms[-1] == pytest.approx(1.0, rel=1e-6)  # sup of the window


def test_rough_elliptic_probe_bounded():
    rep = boundedness_probe(gallery("rough_elliptic", m=0.0, tau=0.3), 0.1, (256, 512, 1024))
    assert rep.in_window and rep.passed


def test_probe_out_of_window_warns():
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        rep = boundedness_probe(gallery("rough_elliptic", m=0.0, tau=0.3), 0.9, (64, 128))
    assert not rep.in_window
    assert any(issubclass(x.category, HypothesisWarning) for x in w)


def test_identity_operator():
    I = identity(G)
    assert I.order == 0 and np.array_equal(I.matrix, np.eye(G.P))
    u = smooth_u(G)
    assert np.array_equal(I.apply(u).values, u.values)


def test_x_function_quantize_custom():
    v = x_function(pr.Cosine(2.0), SymbolClassSpec(m=0.0), x_order=math.inf)
    op = quantize(v, G)
    assert np.abs(np.diag(op.matrix) - np.cos(2 * G.x1)).max() <= 1e-12
