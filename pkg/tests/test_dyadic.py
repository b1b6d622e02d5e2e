import numpy as np
import pytest

from roughpdo import profiles as pr
from roughpdo.dyadic import (
    active,
    apply_J,
    build_cutoffs,
    default_J_max,
    j_epsilon_estimate_sweep,
    make_partition,
    psi,
    psi_estimate_check,
)
from roughpdo.errors import ParameterError
from roughpdo.grid import Grid, spectral_derivative


@pytest.fixture(scope="module")
def part():
    return make_partition(J_max=8)


@pytest.mark.parametrize("profile", ["exp_bump", "poly_bump"])
def test_cutoff_values(profile):
    c = build_cutoffs(profile)
    assert c.phi.radial(0.5) == 1.0
    assert c.psi0.radial(3.0) == 0.0
    assert c.phi.radial(2.0) == 0.0 and c.phi.radial(1.0) == 1.0
    r = np.linspace(1.0, 2.0, 2001)
    v = c.phi.radial(r)
    assert 0 < c.phi.radial(1.5) < 1
    assert np.all(np.diff(v) <= 1e-15)
    assert v.min() >= 0 and v.max() <= 1


def test_unknown_profile():
    with pytest.raises(ParameterError):
        build_cutoffs("tophat")


def test_radial_derivatives_match_fd():
    c = build_cutoffs()
    r = np.linspace(0.9, 2.1, 37)
    h = 1e-5
    for k in range(1, 5):
        fd = (c.phi.radial(r + h, k - 1) - c.phi.radial(r - h, k - 1)) / (2 * h)
        ex = c.phi.radial(r, k)
        assert np.abs(fd - ex).max() <= 1e-6 * max(1.0, np.abs(ex).max())


def test_partial_derivatives_2d():
    c = build_cutoffs()
    xi = np.array([[0.9, 0.8], [1.2, -0.3], [0.2, 1.6]])
    h = 1e-6
    fd = (c.phi(xi + [h, 0]) - c.phi(xi - [h, 0])) / (2 * h)
    assert np.allclose(fd, c.phi(xi, (1, 0)), atol=1e-7)
    fd = (c.phi(xi + [0, h], (1, 0)) - c.phi(xi - [0, h], (1, 0))) / (2 * h)
    assert np.allclose(fd, c.phi(xi, (1, 1)), atol=1e-6)


def test_psi_examples(part):
    assert psi(part, 0, 0.5) == pytest.approx(1.0)
    assert psi(part, 3, 1.0) == 0.0
    with pytest.raises(ParameterError):
        psi(part, 9, 1.0)
    with pytest.raises(ParameterError):
        psi(part, -1, 1.0)


def test_partition_of_unity_and_overlap(part):
    xi = np.linspace(-300, 300, 60001)[:, None]
    vals = np.array([psi(part, j, xi) for j in range(part.J_max + 1)])
    inside = np.sqrt(1 + xi[:, 0] ** 2) <= 2.0 ** (part.J_max - 1)
    assert np.abs(vals.sum(axis=0) - 1)[inside].max() <= 1e-12
    assert (vals != 0).sum(axis=0).max() <= 3
    tail = np.array([psi(part, j, xi, tail=True) for j in range(part.J_max + 1)])
    assert np.abs(tail.sum(axis=0) - 1).max() <= 1e-12


def test_partition_2d():
    part = make_partition(J_max=5)
    rng = np.random.default_rng(3)
    xi = rng.uniform(-15, 15, size=(4000, 2))
    total = sum(psi(part, j, xi) for j in range(6))
    assert np.abs(total - 1).max() <= 1e-12


def test_supports(part):
    for j in range(1, part.J_max + 1):
        r = np.concatenate([np.linspace(0, 2.0 ** (j - 1), 200), np.linspace(2.0 ** (j + 1), 2.0 ** (j + 2), 200)])
        assert np.all(psi(part, j, r[:, None]) == 0)


def test_active(part):
    assert active(part, np.array([[0.3]])) == [0]
    assert 5 in active(part, np.array([[40.0]]))


def test_psi_estimates(part):
    rep = psi_estimate_check(part)
    assert rep["constants"][0] <= 1.0 + 1e-12
    lo, hi = rep["scale_ratio"]
    assert 0.25 <= lo and hi <= 4
    # uniform in j and stable as J_max grows
    d1 = rep["per_j"][1]
    assert max(d1[2:]) / min(d1[2:]) < 1.5
    bigger = psi_estimate_check(make_partition(J_max=12))
    for k in (1, 2, 3):
        assert bigger["constants"][k] <= 1.1 * rep["constants"][k]


def test_default_J_max():
    assert default_J_max(Grid(1, 1.0, 1024)) == 8


def test_apply_J_modes():
    g = Grid(1, 1.0, 256)
    k = 5
    f = g.function(lambda x: np.exp(1j * k * x[..., 0]))
    assert np.allclose(apply_J(0.1, f).values, f.values, atol=1e-14)
    assert np.allclose(apply_J(0.4, f).values, 0, atol=1e-14)
    c = g.function(lambda x: np.full(x.shape[:-1], 2.0))
    assert np.allclose(apply_J(3.0, c).values, 2.0)
    with pytest.raises(ParameterError):
        apply_J(0.0, c)


def test_apply_J_contraction_and_commutes():
    g = Grid(1, 1.0, 256)
    rng = np.random.default_rng(0)
    f = g.function(lambda x: rng.standard_normal(x.shape[:-1]) + 0j)
    for k in range(-128, 128, 17):
        mode = g.function(lambda x: np.exp(1j * k * x[..., 0]))
        assert np.abs(apply_J(0.3, mode).values).max() <= 1 + 1e-12
    lhs = spectral_derivative(apply_J(0.2, f), (1,)).values
    rhs = apply_J(0.2, spectral_derivative(f, (1,))).values
    assert np.abs(lhs - rhs).max() <= 1e-12 * np.abs(lhs).max()


def test_j_epsilon_weierstrass():
    g = Grid(1, 1.0, 4096)
    W = pr.Weierstrass(0.3, 10)
    f = g.function(lambda x: W(x[..., 0]))
    eps = [2.0**-k for k in range(2, 8)]
    rep = j_epsilon_estimate_sweep(f, 0.3, (1,), eps)
    assert rep["J_slope"] == pytest.approx(-0.7, abs=0.15)
    assert rep["verdicts"]["J"]
    rep0 = j_epsilon_estimate_sweep(f, 0.3, (0,), eps)
    assert all(rep0["verdicts"].values())
    assert rep0["remainder_slope"] >= 0.3 - 0.15


def test_j_epsilon_smooth_and_constant():
    g = Grid(1, 1.0, 512)
    eps = [2.0**-k for k in range(1, 6)]
    rep = j_epsilon_estimate_sweep(g.function(lambda x: np.sin(3 * x[..., 0])), 0.5, (0,), eps)
    assert np.isfinite(rep["J_slope"])
    assert rep["remainder_norms"][0] <= 1e-12 or rep["remainder_norms"][-1] <= 1e-12
    const = g.function(lambda x: np.full(x.shape[:-1], 1.5))
    rep = j_epsilon_estimate_sweep(const, 0.5, (1,), eps)
    assert max(rep["J_norms"]) <= 1e-12
    with pytest.raises(ParameterError):
        j_epsilon_estimate_sweep(const, 0.5, (1,), eps[:3])
