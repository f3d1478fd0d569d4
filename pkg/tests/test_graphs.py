import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from chs_dynbc import graphs as G

CANONICAL = {
    "cubic": G.cubic_graph(),
    "logarithmic": G.logarithmic_graph(),
    "obstacle": G.obstacle_graph(),
    "linear": G.linear_graph(2.0),
}
EPS_LEVELS = (1.0, 0.1, 0.01)


def interior(graph, n=1000, seed=0):
    rng = np.random.default_rng(seed)
    if graph.bounded:
        return rng.uniform(-1 + 1e-6, 1 - 1e-6, n)
    return rng.uniform(-3, 3, n)


# --- resolvent / yosida examples -------------------------------------------

def test_obstacle_resolvent_is_projection():
    assert G.resolvent(G.obstacle_graph(), 0.5, 2.0) == 1.0
    # scan oracle: minimize (s - 2)^2 / (2 * 0.5) over [-1, 1]
    s = np.linspace(-1, 1, 20001)
    assert s[np.argmin((s - 2.0) ** 2)] == pytest.approx(1.0)


def test_cubic_resolvent_solves_s_plus_s_cubed():
    s = G.resolvent(G.cubic_graph(), 1.0, 2.0)
    assert s == pytest.approx(1.0, abs=1e-12)
    assert s + s ** 3 == pytest.approx(2.0, abs=1e-12)


@pytest.mark.parametrize("name", list(CANONICAL))
@pytest.mark.parametrize("eps", EPS_LEVELS)
def test_resolvent_and_yosida_fix_origin(name, eps):
    graph = CANONICAL[name]
    assert G.resolvent(graph, eps, 0.0) == 0.0
    assert G.yosida(graph, eps, 0.0) == 0.0
    assert G.yosida_antiderivative(graph, eps, 0.0) == 0.0


def test_yosida_examples():
    assert G.yosida(G.obstacle_graph(), 0.5, 2.0) == pytest.approx(2.0)
    y = G.yosida(G.cubic_graph(), 1.0, 2.0)
    assert y == pytest.approx(1.0, abs=1e-12)
    assert abs(y) <= abs(G.cubic_graph().minimal_section(2.0)) == 8.0


def test_obstacle_antiderivative_examples():
    ob = G.obstacle_graph()
    for eps in EPS_LEVELS:
        assert G.yosida_antiderivative(ob, eps, 0.7) == 0.0
    assert G.yosida_antiderivative(ob, 0.5, 2.0) == pytest.approx(1.0, abs=1e-14)
    val, _ = quad(lambda s: G.yosida(ob, 0.5, s), 0.0, 2.0, points=[1.0])
    assert val == pytest.approx(1.0, rel=1e-10)


def test_resolvent_satisfies_defining_relation():
    rng = np.random.default_rng(3)
    r = rng.uniform(-4, 4, 200)
    for eps in EPS_LEVELS:
        s = G.resolvent(CANONICAL["logarithmic"], eps, r)
        assert np.all(np.abs(s) < 1)
        # the relation in r is ill-conditioned near |s| = 1; scale by dr/ds
        resid = np.abs(s + eps * np.log((1 + s) / (1 - s)) - r)
        assert np.all(resid <= 1e-12 * (1 + 2 * eps / (1 - s * s)) * (1 + np.abs(r)))
        s = G.resolvent(CANONICAL["cubic"], eps, r)
        np.testing.assert_allclose(s + eps * s ** 3, r, atol=1e-11)


def test_resolvent_rejects_bad_eps():
    with pytest.raises(ValueError):
        G.resolvent(G.cubic_graph(), 0.0, 1.0)


# --- Yosida properties over random samples ---------------------------------

@pytest.mark.parametrize("name", list(CANONICAL))
def test_yosida_monotone_lipschitz_and_bounded(name):
    graph = CANONICAL[name]
    wide = np.sort(np.random.default_rng(1).uniform(-2.5, 2.5, 1000))
    r = interior(graph)
    for eps in EPS_LEVELS:
        y = G.yosida(graph, eps, wide)
        assert np.all(np.diff(y) >= -1e-12)
        assert np.all(np.abs(np.diff(y)) <= np.diff(wide) / eps * (1 + 1e-9) + 1e-12)
        assert np.all(np.abs(G.yosida(graph, eps, r))
                      <= np.abs(graph.minimal_section(r)) * (1 + 1e-12) + 1e-12)


@pytest.mark.parametrize("name", list(CANONICAL))
def test_yosida_converges_monotonically_to_minimal_section(name):
    graph = CANONICAL[name]
    r = interior(graph)
    gaps = [np.abs(G.yosida(graph, eps, r) - graph.minimal_section(r)) for eps in EPS_LEVELS]
    for coarse, fine in zip(gaps, gaps[1:]):
        assert np.all(fine <= coarse * (1 + 1e-9) + 1e-12)
    if name == "obstacle":
        assert np.max(gaps[-1]) == 0.0   # beta^eps vanishes on [-1, 1]
    else:
        assert np.max(gaps[-1]) < np.max(gaps[0])


@pytest.mark.parametrize("name", list(CANONICAL))
def test_yosida_antiderivative_between_zero_and_beta_hat(name):
    graph = CANONICAL[name]
    r = interior(graph)
    prev = np.zeros_like(r)
    for eps in EPS_LEVELS:
        hat = G.yosida_antiderivative(graph, eps, r)
        assert np.all(hat >= 0)
        assert np.all(hat <= graph.antiderivative(r) * (1 + 1e-12) + 1e-15)
        assert np.all(hat >= prev * (1 - 1e-12))
        prev = hat


@pytest.mark.parametrize("name", list(CANONICAL))
@pytest.mark.parametrize("eps", EPS_LEVELS)
def test_yosida_antiderivative_matches_quadrature(name, eps):
    graph = CANONICAL[name]
    for r in (-2.2, -0.95, -0.3, 0.5, 0.99, 1.7):
        points = [p for p in (-1.0, 1.0) if min(0, r) < p < max(0, r)] if graph.bounded else None
        ref, _ = quad(lambda s: G.yosida(graph, eps, s), 0.0, r, epsabs=1e-14, epsrel=1e-12,
                      points=points, limit=200)
        got = G.yosida_antiderivative(graph, eps, r)
        assert got == pytest.approx(ref, rel=1e-8, abs=1e-14)


@given(st.floats(-50, 50), st.floats(-50, 50), st.sampled_from(list(CANONICAL)),
       st.sampled_from(EPS_LEVELS))
def test_resolvent_nonexpansive(a, b, name, eps):
    graph = CANONICAL[name]
    sa, sb = G.resolvent(graph, eps, a), G.resolvent(graph, eps, b)
    assert abs(sa - sb) <= abs(a - b) * (1 + 1e-9) + 1e-12
    if graph.bounded:
        assert -1 <= sa <= 1


@given(st.floats(-1e3, 1e3), st.sampled_from(list(CANONICAL)), st.sampled_from(EPS_LEVELS))
def test_yosida_slope_matches_finite_difference(r, name, eps):
    graph = CANONICAL[name]
    h = 1e-6 * max(1.0, abs(r))
    fd = (G.yosida(graph, eps, r + h) - G.yosida(graph, eps, r - h)) / (2 * h)
    slope = G.yosida_slope(graph, eps, r)
    assert 0 <= slope <= 1 / eps * (1 + 1e-12)
    # skip kinks of the obstacle Yosida map
    if name != "obstacle" or abs(abs(r) - 1) > 10 * h:
        assert slope == pytest.approx(fd, rel=1e-4, abs=1e-6)


# --- canonical graph invariants --------------------------------------------

@pytest.mark.parametrize("name", list(CANONICAL))
def test_graph_normalization_and_convexity(name):
    graph = CANONICAL[name]
    assert graph.contains(0.0)
    assert graph.minimal_section(np.array(0.0)) == 0
    assert graph.antiderivative(np.array(0.0)) == 0
    r = np.sort(interior(graph, 400))
    assert np.all(np.diff(graph.minimal_section(r)) >= 0)
    hat = graph.antiderivative(r)
    assert np.all(hat >= 0)
    x = np.linspace(r[0], r[-1], 401)
    h = graph.antiderivative(x)
    assert np.all(h[:-2] - 2 * h[1:-1] + h[2:] >= -1e-12)


def test_regular_split_examples():
    reg = G.make_regular_split()
    assert reg.W_prime(1.0) == 0.0
    assert reg.graph.minimal_section(0.0) == 0 and reg.perturbation(np.array(0.0)) == 0
    assert reg.graph.antiderivative(2.0) == pytest.approx(quad(lambda s: s ** 3, 0, 2)[0])
    r = np.linspace(-2, 2, 41)
    np.testing.assert_allclose(reg.W(r), 0.25 * (r ** 2 - 1) ** 2, atol=1e-14)
    np.testing.assert_allclose(reg.W_prime(r), r ** 3 - r, atol=1e-14)


def test_logarithmic_split_examples():
    c = 2.0
    log = G.make_logarithmic_split(c)
    assert log.graph.minimal_section(0.0) == 0
    assert log.graph.minimal_section(0.5) == pytest.approx(math.log(3))
    # W' + 2 c r recovers beta°: finite difference of W + c r^2
    h = 1e-6
    fd = ((log.W(0.5 + h) + c * (0.5 + h) ** 2) - (log.W(0.5 - h) + c * (0.5 - h) ** 2)) / (2 * h)
    assert fd == pytest.approx(math.log(3), rel=1e-7)
    assert log.graph.minimal_section(1 - 1e-7) > log.graph.minimal_section(1 - 1e-6) > 14
    r = np.linspace(-0.99, 0.99, 51)
    expected = (1 + r) * np.log1p(r) + (1 - r) * np.log1p(-r) - c * r ** 2
    np.testing.assert_allclose(log.W(r), expected, atol=1e-13)
    np.testing.assert_allclose(log.perturbation(r), -2 * c * r)
    with pytest.raises(G.DomainError):
        log.graph.section(1.0)
    assert log.W(1.5) == np.inf


def test_logarithmic_requires_c_above_one():
    with pytest.raises(ValueError, match="c > 1"):
        G.make_logarithmic_split(0.5)


def test_obstacle_split_examples():
    ob = G.make_obstacle_split(1.0)
    assert ob.graph.antiderivative(0.5) == 0
    assert ob.graph.minimal_section(1.0) == 0
    assert G.resolvent(ob.graph, 0.5, 2.0) == 1.0
    assert ob.W(1.2) == np.inf
    np.testing.assert_allclose(ob.W(np.array([-1.0, 0.3, 1.0])), -np.array([1.0, 0.09, 1.0]))
    assert not ob.smooth


@given(st.floats(-5, 5), st.floats(-5, 5),
       st.sampled_from(["regular", "logarithmic", "obstacle", "linear"]))
def test_perturbation_is_lipschitz(a, b, name):
    split = G.make_split(name, None)
    assert abs(split.perturbation(np.array(a)) - split.perturbation(np.array(b))) \
        <= split.lipschitz * abs(a - b) * (1 + 1e-12) + 1e-15


# --- domination --------------------------------------------------------------

def test_domination_examples():
    log, cubic = G.logarithmic_graph(), G.cubic_graph()
    assert G.check_domination(log, log, 1.0, 0.0, G.domain_samples(log, 101)).passed
    assert G.check_domination(cubic, G.cubic_graph(2.0), 1.0, 0.0, np.linspace(-5, 5, 51)).passed
    report = G.check_domination(cubic, G.obstacle_graph(), 1.0, 0.0, [0.9])
    assert not report.passed
    assert report.bulk_abs[0] == pytest.approx(0.729) and report.bound[0] == 0.0


@pytest.mark.parametrize("name", list(CANONICAL))
def test_every_graph_dominates_itself(name):
    graph = CANONICAL[name]
    assert G.check_domination(graph, graph, 1.0, 0.0, G.domain_samples(graph, 201)).passed


def test_domination_rejects_samples_outside_boundary_domain():
    with pytest.raises(G.DomainError):
        G.check_domination(G.cubic_graph(), G.logarithmic_graph(), 1.0, 0.0, [1.5])


def test_domination_needs_domain_inclusion():
    # D(obstacle) = [-1, 1] is not inside D(log) = (-1, 1)
    report = G.check_domination(G.logarithmic_graph(), G.obstacle_graph(), 1.0, 5.0, [0.0])
    assert not report.passed


# --- coupling ----------------------------------------------------------------

def test_default_coupling_examples():
    g = G.make_default_coupling()
    assert g.g(np.array(0.0)) == 0.5
    assert g.extended_g(-10.0) >= -1 / 3
    r = np.linspace(-1, 1, 101)
    np.testing.assert_array_equal(g.extended_g(r), g.g(r))


def test_extension_is_c1_at_junctions():
    g = G.make_default_coupling()
    for x in (-1.0, 1.0):
        left, right = g.extended_g_prime(x - 1e-9), g.extended_g_prime(x + 1e-9)
        assert left == pytest.approx(right, abs=1e-8)
    r = np.linspace(-6, 6, 4001)
    ge, gp = g.extended_g(r), g.extended_g_prime(r)
    fd = np.gradient(ge, r)
    inner = np.abs(np.diff(np.sign(ge - (-1 / 3)), prepend=1)) == 0   # away from the floor kink
    np.testing.assert_allclose(gp[inner][2:-2], fd[inner][2:-2], atol=5e-3)


@given(st.floats(-1e6, 1e6))
def test_extension_floor_and_alpha_bound(r):
    g = G.make_default_coupling()
    assert g.extended_g(r) >= -1 / 3
    a = G.alpha(g, r)
    assert np.isfinite(a) and 0 < a <= math.sqrt(3) * (1 + 1e-15)


def test_extension_floor_is_reached_by_steep_g():
    g = G.extend_coupling(lambda r: 2.0 * (1 + np.asarray(r)), lambda r: np.full_like(np.asarray(r, float), 2.0))
    assert g.extended_g(-1.5) == pytest.approx(-1 / 3)
    assert g.extended_g_prime(-1.5) == 0.0


def test_alpha_examples():
    assert np.all(G.alpha(G.make_zero_coupling(), np.linspace(-5, 5, 11)) == 1.0)
    assert G.alpha(G.make_default_coupling(), 1.0) == pytest.approx(3 ** -0.5)


@pytest.mark.parametrize("g, gp", [
    (lambda r: np.asarray(r, float) ** 2, lambda r: 2 * np.asarray(r, float)),     # convex
    (lambda r: np.asarray(r, float) - 2, lambda r: np.ones_like(np.asarray(r, float))),  # negative
])
def test_extension_rejects_a5_violations(g, gp):
    with pytest.raises(ValueError, match=r"\(A5\)"):
        G.extend_coupling(g, gp)


def test_make_coupling_unknown_name():
    with pytest.raises(KeyError):
        G.make_coupling("nope")
