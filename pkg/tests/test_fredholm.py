import json
import warnings

import numpy as np
import pytest

from roughpdo import gallery
from roughpdo import profiles as pr
from roughpdo.calculus import bessel_matrix, identity, quantize
from roughpdo.errors import CapabilityError, ConditioningError, HypothesisError, HypothesisWarning, InversionError, ParameterError
from roughpdo.fredholm import (
    EllipticityPlan,
    FredholmExperimentConfig,
    ParametrixConfig,
    _inverse,
    build_parametrix,
    compactness_proxy,
    composition_residual,
    ellipticity_check,
    fourier_block,
    fredholm_experiment,
    kernel_dimensions,
    normalized,
    winding_index,
)
from roughpdo.grid import Grid
from roughpdo.symbol_core import Symbol, SymbolClassSpec, matrix_from_blocks, sampling_plan, verify_symbol_class, x_function

FAST = FredholmExperimentConfig(levels=(128, 256))


def _raw(f, m=0.0, name="raw"):
    return Symbol(lambda x, xi, al, be: f(x[..., 0], xi[..., 0])[..., None, None], SymbolClassSpec(m=m), name=name, x_order=0, xi_order=0)


def _mesh(lo=-6, hi=6, n=61):
    v = np.linspace(lo, hi, n)
    X, Q = np.meshgrid(v, v, indexing="ij")
    return X[..., None], Q[..., None]


# ---------------------------------------------------------------- ellipticity


def test_ellipticity_bessel():
    r = ellipticity_check(gallery("bessel", m=1.5))
    assert r.C0 == pytest.approx(1.0, abs=1e-12)
    assert r.R == 0.0 and r.violation_count == 0


def test_ellipticity_rough_elliptic():
    r = ellipticity_check(gallery("rough_elliptic"))
    assert r.R == 0.0
    # a lattice minimum bounds the true one (1.4994) from above
    assert 1.4994 <= r.C0 < 1.6
    assert r.limit_decay is True
    env = np.array(r.limit_envelope)
    assert np.all(np.diff(env[:, 1]) <= 0)
    assert env[env[:, 0] >= 2.0, 1].max() == 0.0
    fine = EllipticityPlan(np.linspace(-1.06, -1.03, 3001)[:, None], np.zeros((1, 1)))
    assert ellipticity_check(gallery("rough_elliptic"), fine, radii=(0.0, 1.0)).C0 == pytest.approx(1.49944, abs=1e-4)


def test_ellipticity_punctured_reports_violation():
    r = ellipticity_check(gallery("punctured"))
    assert r.violating_points[0]["x"] == [0.0] and r.violating_points[0]["xi"] == [0.0]
    assert r.violating_points[0]["value"] == pytest.approx(0.0, abs=1e-14)
    assert r.det_min_profile[0] == [0.0, pytest.approx(0.0, abs=1e-14)]
    assert r.R > 0 and r.C0 > 0
    # no violating point on or beyond R
    assert all(abs(p["x"][0]) + abs(p["xi"][0]) < r.R for p in r.violating_points)


def test_ellipticity_never_elliptic():
    r = ellipticity_check(gallery("annihilation"), check_limit=False)
    assert r.C0 == 0.0 and not r.elliptic


def test_ellipticity_limit_capability():
    a = _raw(lambda x, xi: 2 + np.cos(x) + 0 * xi)
    with pytest.raises(CapabilityError):
        ellipticity_check(a, check_limit=True)
    assert ellipticity_check(a).limit_decay is None


def test_ellipticity_matrix_uses_det():
    a = gallery("matrix_diag", entries=[("bessel", {"m": 1.0}), ("rough_elliptic", {"m": 1.0})])
    r = ellipticity_check(a)
    # det a <xi>^-2 = 2 + 0.5 W w
    assert 1.4994 <= r.C0 < 1.6
    assert r.R == 0.0


def test_ellipticity_2d():
    r = ellipticity_check(gallery("bessel", m=1.0, dim=2), EllipticityPlan.default(2))
    assert r.C0 == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------- parametrix


def test_parametrix_config_validation():
    with pytest.raises(ParameterError):
        ParametrixConfig(R=0.0)
    with pytest.raises(ParameterError):
        ParametrixConfig(psi_profile="linear")


@pytest.mark.parametrize("profile", ["quintic", "exp"])
def test_psi_plateaus_and_monotone(profile):
    cfg = ParametrixConfig(2.0, profile)
    r = np.linspace(0, 5, 2001)
    x = (r / np.sqrt(2))[:, None]
    v = cfg.psi(x, x)
    assert np.all(v[r <= 2.0] == 0)
    assert np.allclose(v[r**2 >= 8.0], 1.0, atol=1e-15)
    assert np.all(np.diff(v) >= -1e-15)


def test_psi_derivative_matches_differences():
    cfg = ParametrixConfig(1.5)
    x, xi, h = np.array([[1.1]]), np.array([[0.9]]), 1e-6
    d_xi = cfg.psi(x, xi, (1,), (0,))
    d_x = cfg.psi(x, xi, (0,), (1,))
    assert d_xi == pytest.approx((cfg.psi(x, xi + h) - cfg.psi(x, xi - h)) / (2 * h), rel=1e-7)
    assert d_x == pytest.approx((cfg.psi(x + h, xi) - cfg.psi(x - h, xi)) / (2 * h), rel=1e-7)


def test_parametrix_of_bessel():
    m, R = 1.5, 1.2
    cfg = ParametrixConfig(R)
    b = build_parametrix(gallery("bessel", m=m), cfg)
    X, Q = _mesh()
    want = cfg.psi(X, Q) * (1 + Q[..., 0] ** 2) ** (-m / 2)
    assert np.abs(b.scalar(X, Q) - want).max() <= 1e-15
    assert b.spec.m == -m and b.spec.variant == "tilde"


def test_parametrix_exact_off_ball_and_zero_inside():
    a = gallery("rough_elliptic", m=1.0)
    R = 1.0
    b = build_parametrix(a, ParametrixConfig(R))
    X, Q = _mesh(-8, 8, 161)
    prod = (a(X, Q) @ b(X, Q))[..., 0, 0]
    r2 = X[..., 0] ** 2 + Q[..., 0] ** 2
    assert np.abs(prod[r2 >= 4 * R**2] - 1).max() <= 1e-12
    assert np.all(b.scalar(X, Q)[r2 <= R**2] == 0)
    psi = ParametrixConfig(R).psi(X, Q)
    assert np.abs(prod - psi).max() <= 1e-12


def test_parametrix_diagonal_matrix():
    a = gallery("matrix_diag", entries=[("bessel", {"m": 1.0}), ("smooth_elliptic", {"m": 0.0})])
    cfg = ParametrixConfig(1.0)
    b = build_parametrix(a, cfg)
    X, Q = _mesh()
    B = b(X, Q)
    psi = cfg.psi(X, Q)
    assert np.abs(B[..., 0, 1]).max() == 0 and np.abs(B[..., 1, 0]).max() == 0
    assert np.abs(B[..., 0, 0] - psi / np.sqrt(1 + Q[..., 0] ** 2)).max() <= 1e-15
    assert np.abs(B[..., 1, 1] - psi / (2 + 0.5 * np.cos(X[..., 0]))).max() <= 1e-15


def test_parametrix_derivatives_against_differences():
    a = gallery("smooth_elliptic", m=1.0)
    b = build_parametrix(a, ParametrixConfig(1.0))
    x, xi, h = np.array([[0.7]]), np.array([[1.3]]), 1e-5
    for al, be, num in [
        ((1,), (0,), (b(x, xi + h) - b(x, xi - h)) / (2 * h)),
        ((0,), (1,), (b(x + h, xi) - b(x - h, xi)) / (2 * h)),
        ((1,), (1,), (b(x + h, xi + h) - b(x + h, xi - h) - b(x - h, xi + h) + b(x - h, xi - h)) / (4 * h * h)),
    ]:
        assert b(x, xi, al, be)[0, 0, 0] == pytest.approx(num[0, 0, 0], rel=1e-5)


def test_parametrix_limit_is_inverse_limit():
    b = build_parametrix(gallery("rough_elliptic", m=1.0), ParametrixConfig(1.0))
    xi = np.linspace(-5, 5, 11)
    assert np.allclose(b.limit_at(xi)[..., 0, 0], 0.5 / np.sqrt(1 + xi**2), atol=1e-15)
    assert np.allclose(b.limit_at(xi, 1)[..., 0, 0], -0.5 * xi * (1 + xi**2) ** -1.5, atol=1e-15)


def test_parametrix_inversion_error_location():
    a = x_function(pr.Polynomial((-3.0, 1.0)), SymbolClassSpec(m=0.0), x_order=1)
    b = build_parametrix(a, ParametrixConfig(1.0))
    with pytest.raises(InversionError) as e:
        b(np.linspace(0, 4, 9)[:, None], np.zeros((9, 1)))
    assert e.value.location["x"] == [3.0]
    # inside the ball the zero is harmless
    a2 = x_function(pr.Polynomial((-0.5, 1.0)), SymbolClassSpec(m=0.0), x_order=1)
    assert build_parametrix(a2, ParametrixConfig(1.0)).scalar(0.5, 0.0) == 0


def test_cramer_and_lu_inverses(rng):
    for N in (1, 2, 3, 5):
        A = rng.standard_normal((7, N, N)) + 1j * rng.standard_normal((7, N, N)) + 3 * np.eye(N)
        assert np.abs(_inverse(A) @ A - np.eye(N)).max() <= 1e-12


def test_parametrix_3x3_full_matrix():
    e = gallery("bessel", m=0.0)
    blocks = [[2.0 * e, e, None], [None, 3.0 * e, e], [e, None, 4.0 * e]]
    a = matrix_from_blocks(blocks)
    b = build_parametrix(a, ParametrixConfig(1.0))
    X, Q = _mesh(3, 6, 7)
    assert np.abs(a(X, Q) @ b(X, Q) - np.eye(3)).max() <= 1e-14


@pytest.mark.parametrize("m", [0.0, 1.0])
def test_parametrix_class_verdict(m):
    b = build_parametrix(gallery("rough_elliptic", m=m), ParametrixConfig(1.0))
    rep = verify_symbol_class(b, sampling_plan(Grid(1, 2.0, 1024), per_annulus=8, x_stride=8))
    assert rep.passed, rep.verdicts


# ---------------------------------------------------------------- compactness proxy


def test_proxy_controls():
    z = compactness_proxy([np.zeros((P, P)) for P in (64, 128, 256)])
    assert z.verdict == "compact-like" and all(max(sv) == 0 for sv in z.singular_values)
    i = compactness_proxy([np.eye(P) for P in (64, 128, 256)])
    assert i.verdict == "not-compact-like"
    assert i.tail_exponent == pytest.approx(0.0, abs=1e-12)


def test_proxy_levels_error():
    with pytest.raises(ParameterError):
        compactness_proxy([np.eye(8)])
    with pytest.raises(ParameterError):
        compactness_proxy(lambda P: np.eye(P))


def test_proxy_smoothing_operator():
    def K(P):
        g = Grid(1, 1.0, P)
        return bessel_matrix(g, -1.0) @ np.diag(np.exp(-g.x1**2))

    r = compactness_proxy(K, (256, 512, 1024))
    assert r.verdict == "compact-like"
    assert r.tail_exponent == pytest.approx(1.0, abs=0.2)
    assert r.max_deviation <= 1e-3
    for sv in r.singular_values:
        assert np.all(np.diff(sv) <= 0) and min(sv) >= 0


def test_proxy_accepts_discretized_operators():
    ops = [quantize(gallery("bessel", m=-1.0), Grid(1, 1.0, P)) for P in (64, 128)]
    r = compactness_proxy(ops, s=0.3)
    # conjugation with its own order makes it the identity
    assert r.verdict == "not-compact-like"


def test_fourier_block_is_unitary_conjugation(rng):
    g = Grid(1, 1.0, 32)
    M = rng.standard_normal((32, 32))
    H = fourier_block(M, g)
    assert np.allclose(np.linalg.svd(H, compute_uv=False), np.linalg.svd(M, compute_uv=False), atol=1e-12)
    assert fourier_block(M, g, band=0.5).shape == (17, 17)
    D = fourier_block(identity(g).matrix, g, s=0.7, m=-0.7)
    assert np.allclose(D, np.diag(np.diag(D)))
    assert np.allclose(np.diag(D), (1 + g.xi1**2) ** 0.35)


# ---------------------------------------------------------------- composition residual


def test_composition_residual_x_independent():
    r = composition_residual(gallery("bessel", m=1.0), gallery("bessel", m=-1.0), FAST)
    assert r.verdict == "compact-like" and r.compared == 0


def test_composition_residual_xi_sin_exact():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HypothesisWarning)
        r = composition_residual(gallery("multiplier", g="xi"), gallery("multiplication", v="sin"), FAST, k=2)
    assert max(sv[0] for sv in r.singular_values) <= 1e-8
    assert r.verdict == "compact-like"


def test_composition_residual_rough_pair():
    r = composition_residual(gallery("rough_elliptic"), gallery("rough_elliptic"), FredholmExperimentConfig())
    assert r.verdict == "compact-like"


def test_composition_residual_smooth_pair_decays():
    cfg = FredholmExperimentConfig(levels=(128, 256, 512))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HypothesisWarning)
        r = composition_residual(gallery("smooth_elliptic", m=1.0), gallery("smooth_elliptic", m=1.0), cfg)
    assert r.verdict == "compact-like"
    assert r.tail_exponent == pytest.approx(1.0, abs=0.2)


# ---------------------------------------------------------------- kernel counts and winding


def test_annihilation_kernel_count():
    k = kernel_dimensions(gallery("annihilation"), (256, 512))
    assert k.counts == [1, 1] and k.robust and k.stable
    assert all(s[0] < 1e-12 and s[1] > 0.1 for s in k.smallest)
    assert kernel_dimensions(gallery("annihilation"), (256,), adjoint=True).counts == [1]


def test_winding_trivial_and_synthetic():
    assert winding_index(gallery("bessel", m=0.0), 3.0) == 0
    loop = _raw(lambda x, xi: (x + 1j * xi) / np.abs(x + 1j * xi))
    assert winding_index(loop, 2.0, C0=1.0) == 1
    twice = _raw(lambda x, xi: ((x + 1j * xi) / np.abs(x + 1j * xi)) ** -2)
    assert winding_index(twice, 2.0, samples=8, C0=1.0) == -2
    assert winding_index(gallery("rough_elliptic"), 4.0) == 0


def test_winding_errors():
    with pytest.raises(ConditioningError):
        winding_index(_raw(lambda x, xi: x - 2.0 + 0j * xi), 2.0, C0=1.0)
    with pytest.raises(ParameterError):
        winding_index(gallery("matrix_diag"), 2.0)


# ---------------------------------------------------------------- experiment


def test_config_validation():
    with pytest.raises(ParameterError):
        FredholmExperimentConfig(levels=(256,))
    with pytest.raises(ParameterError):
        FredholmExperimentConfig(levels=(512, 256))
    with pytest.raises(ParameterError):
        FredholmExperimentConfig(svd_threshold=2.0)
    lo, hi = FredholmExperimentConfig().window(gallery("rough_elliptic").spec, 1)
    assert lo == pytest.approx(-0.15) and hi == pytest.approx(0.3)


def test_experiment_bessel():
    r = fredholm_experiment(gallery("bessel", m=1.0), FAST)
    assert r.compact_residuals and r.passed
    assert (r.kernel_dim, r.cokernel_dim, r.index, r.index_method) == (0, 0, 0, "winding")
    json.dumps(r.to_dict())


def test_experiment_matrix_uses_kernel_counts():
    r = fredholm_experiment(gallery("matrix_diag"), FAST)
    assert r.compact_residuals
    assert (r.kernel_dim, r.index, r.index_method) == (0, 0, "kernel_counts")


def test_experiment_adjoint_swaps():
    a = gallery("rough_elliptic")
    r = fredholm_experiment(a, FAST)
    s = fredholm_experiment(a, FAST, adjoint=True)
    assert (s.kernel_dim, s.cokernel_dim) == (r.cokernel_dim, r.kernel_dim)
    assert s.residual_left.singular_values[-1][:3] == pytest.approx(r.residual_right.singular_values[-1][:3], rel=1e-10)


def test_experiment_window_warning_and_strict():
    cfg = FredholmExperimentConfig(levels=(64, 128), s=0.5)
    with pytest.warns(HypothesisWarning, match="fredholm-window"):
        fredholm_experiment(gallery("rough_elliptic"), cfg)
    with pytest.raises(HypothesisError):
        fredholm_experiment(gallery("rough_elliptic"), cfg, strict=True)


def test_experiment_rejects_non_elliptic():
    with pytest.raises(HypothesisError) as e:
        fredholm_experiment(gallery("annihilation"), FAST)
    assert e.value.stage == "ellipticity"


def test_normalized_symbol():
    a = normalized(gallery("rough_elliptic", m=2.0))
    b = gallery("rough_elliptic", m=0.0)
    X, Q = _mesh()
    assert a.spec.m == 0
    assert np.abs(a(X, Q) - b(X, Q)).max() <= 1e-12
