import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from graphtf.penalties import Penalty, check_step, prox_group, prox_scalar, rho, rho_derivative, validate_assumption1


def integrand(kind, lam, gamma):
    """Penalty derivative written from the integral definitions, not the library."""
    if kind == "scad":
        return lambda u: lam * min(1.0, max(gamma * lam - u, 0.0) / ((gamma - 1) * lam))
    return lambda u: lam * max(1.0 - u / (lam * gamma), 0.0)


@pytest.mark.parametrize(
    "kind,lam,gamma,t,expected",
    [("scad", 2, 3.7, 1, 2.0), ("scad", 2, 3.7, 10, 9.4), ("mcp", 2, 1.4, 3, 2.8)],
)
def test_rho_values(kind, lam, gamma, t, expected):
    p = Penalty(kind, lam, gamma)
    assert rho(p, t) == pytest.approx(expected)
    f = integrand(kind, lam, gamma)
    assert quad(f, 0, t, points=[lam, gamma * lam], limit=200)[0] == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("kind", ["scad", "mcp"])
def test_rho_matches_quadrature(kind, rng):
    for _ in range(20):
        lam = rng.uniform(0.2, 3)
        gamma = rng.uniform(2.1, 5) if kind == "scad" else rng.uniform(1.1, 4)
        t = rng.uniform(0, 3 * gamma * lam)
        f = integrand(kind, lam, gamma)
        val = quad(f, 0, t, points=[lam, gamma * lam], limit=200)[0]
        assert rho(Penalty(kind, lam, gamma), t) == pytest.approx(val, abs=1e-9)
        assert rho(Penalty(kind, lam, gamma), -t) == pytest.approx(val, abs=1e-9)


def test_mu_constants():
    assert Penalty("l1", 1).mu == 0
    assert Penalty("scad", 1, 3.7).mu == pytest.approx(1 / 2.7)
    assert Penalty("mcp", 1, 1.4).mu == pytest.approx(1 / 1.4)


def test_derivative_values():
    for kind in ("l1", "scad", "mcp"):
        assert rho_derivative(Penalty(kind, 2.0), 1e-12) == pytest.approx(2.0)
    assert rho_derivative(Penalty("mcp", 2.0, 1.4), 3.0) == 0
    assert rho_derivative(Penalty("scad", 2, 3.7), 4.0) == pytest.approx(2 * (3.7 - 2) / 2.7)


@pytest.mark.parametrize("kind", ["l1", "scad", "mcp"])
def test_derivative_finite_difference(kind):
    p = Penalty(kind, 1.3)
    t = np.linspace(0.05, 8, 400)
    breaks = np.array([p.lam, (p.gamma or 1) * p.lam])
    t = t[np.min(np.abs(t[:, None] - breaks[None, :]), axis=1) > 1e-3]
    h = 1e-6
    fd = (rho(p, t + h) - rho(p, t - h)) / (2 * h)
    np.testing.assert_allclose(rho_derivative(p, t), fd, atol=1e-6)


def test_large_gamma_tends_to_l1():
    t = np.linspace(-5, 5, 101)
    l1 = rho(Penalty("l1", 1.0), t)
    for kind in ("scad", "mcp"):
        gaps = [np.abs(l1 - rho(Penalty(kind, 1.0, g), t)).max() for g in (5, 50, 500)]
        assert gaps[0] >= gaps[1] >= gaps[2]
        # on [-5, 5] the gap is at most 5**2 / (2 (gamma - 1) lam)
        assert gaps[2] <= 25 / (2 * 499) + 1e-12


@pytest.mark.parametrize(
    "p,alpha,v,expected",
    [
        (Penalty("l1", 1), 1, 3, 2),
        (Penalty("mcp", 1, 2), 1, 3, 3),
        (Penalty("mcp", 1, 2), 1, 1.5, 1.0),
    ],
)
def test_prox_examples(p, alpha, v, expected):
    assert prox_scalar(p, v, alpha) == pytest.approx(expected)
    grid = np.linspace(-5, 5, 200001)
    brute = grid[np.argmin(0.5 * (grid - v) ** 2 + alpha * rho(p, grid))]
    assert brute == pytest.approx(expected, abs=1e-4)


def test_prox_group_examples():
    p = Penalty("l1", 1)
    np.testing.assert_allclose(prox_group(p, np.array([3.0, 4.0]), 1), [2.4, 3.2])
    np.testing.assert_array_equal(prox_group(p, np.zeros(3), 1), 0)
    q = Penalty("scad", 1.0)
    assert prox_group(q, np.array([-2.5]), 0.5)[0] == pytest.approx(prox_scalar(q, -2.5, 0.5))


def test_check_step():
    with pytest.raises(ValueError):
        check_step(Penalty("mcp", 1, 2), 2.0)
    with pytest.raises(ValueError):
        prox_scalar(Penalty("scad", 1, 3), 0.4, 2.0)
    check_step(Penalty("mcp", 1, 2), 1.999)


penalties = st.builds(
    lambda kind, lam, g: Penalty(kind, lam, None if kind == "l1" else (2.05 + g if kind == "scad" else 1.05 + g)),
    st.sampled_from(["l1", "scad", "mcp"]),
    st.floats(0.1, 10),
    st.floats(0, 5),
)


@settings(max_examples=200, deadline=None)
@given(penalties, st.floats(0.05, 0.95), st.floats(-20, 20), st.floats(-20, 20))
def test_prox_properties(p, frac, v, w):
    alpha = frac / p.mu if p.mu > 0 else 5 * frac
    x = prox_scalar(p, v, alpha)
    assert prox_scalar(p, -v, alpha) == pytest.approx(-x)
    assert abs(x) <= abs(v) + 1e-12
    # the prox of a weakly convex function with alpha * mu < 1 is monotone
    y = prox_scalar(p, w, alpha)
    assert (x - y) * (v - w) >= -1e-9


@settings(max_examples=100, deadline=None)
@given(penalties, st.floats(0.05, 0.95), st.lists(st.floats(-10, 10), min_size=1, max_size=4))
def test_prox_group_direction(p, frac, v):
    alpha = frac / p.mu if p.mu > 0 else 5 * frac
    v = np.array(v)
    x = prox_group(p, v, alpha)
    c = x @ v
    assert c >= -1e-12
    np.testing.assert_allclose(x, v * (c / (v @ v)) if v @ v > 0 else 0, atol=1e-9)


def test_parse_round_trip():
    for spec in ("l1:lambda=2", "scad:lambda=2,gamma=3.7", "mcp:lambda=2,gamma=1.4"):
        p = Penalty.parse(spec)
        assert Penalty.parse(p.spec()) == p
    assert Penalty.parse("mcp:lambda=1").gamma == 1.4
    with pytest.raises(ValueError):
        Penalty.parse("scad:gamma=3")
    with pytest.raises(ValueError):
        Penalty.parse("huber:lambda=1")
    with pytest.raises(ValueError):
        Penalty("scad", 1, 1.5)


def test_assumption_checks():
    assert validate_assumption1(Penalty("l1", 0.7)).passed
    scad = Penalty("scad", 2, 3.7)
    assert validate_assumption1(scad).passed
    bad = validate_assumption1(scad, mu=0.5 * scad.mu)
    assert bad.symmetric_monotone and bad.ratio_nonincreasing and not bad.convex_with_mu
    assert validate_assumption1(Penalty("mcp", 1, 1.4)).passed
