import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zollfrei.fermat import (ChartDomainError, ChartError, HopfChart, StationaryChart, arrival_time,
                             fermat_eval, gauss_kronrod, lift_curve)
from zollfrei.ode import integrate
from zollfrei.verify import arrival_shift, measured_shift, wrap

seeds = st.integers(0, 2 ** 32 - 1)


def flat_chart():
    return StationaryChart(g0=lambda x: np.eye(2), delta=lambda x: np.zeros(2), beta=lambda x: 1.0)


def random_chart(rng):
    """Smooth stationary data on the plane with a small drift."""
    a = rng.standard_normal((2, 2))
    base = a @ a.T + 2 * np.eye(2)
    w = 0.3 * rng.standard_normal(2)
    d = 0.2 * rng.standard_normal(2)
    b0 = rng.uniform(0.5, 2.0)

    def g0(x):
        return base * (1 + 0.1 * np.sin(x @ w))

    def delta(x):
        return d * np.cos(x[0])

    def beta(x):
        return b0 + 0.2 * np.sin(x[1])

    return StationaryChart(g0=g0, delta=delta, beta=beta)


def circle(radius=1.0, speed=1.0, turns=1.0):
    w = speed / radius

    def rhs(t, y):
        return np.stack([y[..., 2], y[..., 3], -w * w * y[..., 0], -w * w * y[..., 1]], axis=-1)

    return integrate(rhs, 0.0, [radius, 0.0, 0.0, speed], turns * 2 * np.pi / w, 1e-12)


def test_gauss_kronrod_polynomial_and_oscillatory():
    parts, err = gauss_kronrod(lambda s: s ** 7, np.array([0.0]), np.array([2.0]))
    assert parts.sum() == pytest.approx(2 ** 8 / 8, rel=1e-14)
    parts, _ = gauss_kronrod(np.cos, np.array([0.0, 1.0]), np.array([1.0, 30.0]))
    assert parts.sum() == pytest.approx(np.sin(30.0), abs=1e-12)


def test_flat_chart_is_riemannian_length():
    chart = flat_chart()
    v = np.array([3.0, 4.0])
    assert fermat_eval(chart, np.zeros(2), v) == 5.0
    # the reference is exact; the integrated circle carries ~1e-10 relative speed error
    assert arrival_time(chart, circle(2.0, 1.5)) == pytest.approx(4 * np.pi, rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(seed=seeds, lam=st.floats(0.01, 100))
def test_fermat_homogeneous_and_positive(seed, lam):
    rng = np.random.default_rng(seed)
    chart = random_chart(rng)
    x, v = rng.standard_normal(2), rng.standard_normal(2)
    f = fermat_eval(chart, x, v)
    assert f > 0
    assert fermat_eval(chart, x, lam * v) == pytest.approx(lam * f, rel=1e-13)


@settings(max_examples=30, deadline=None)
@given(seed=seeds)
def test_conformal_rescale_leaves_fermat_unchanged(seed):
    rng = np.random.default_rng(seed)
    chart = random_chart(rng)
    k = 0.5 * rng.standard_normal(2)

    def factor(x):
        return np.exp(np.sin(x @ k))

    scaled = StationaryChart(g0=lambda x: factor(x) * chart.g0(x), delta=chart.delta,
                             beta=lambda x: factor(x) * chart.beta(x))
    x, v = rng.standard_normal(2), rng.standard_normal(2)
    assert fermat_eval(scaled, x, v) == pytest.approx(fermat_eval(chart, x, v), rel=1e-12)


def test_nonpositive_beta_rejected():
    chart = StationaryChart(g0=lambda x: np.eye(2), delta=lambda x: np.zeros(2), beta=lambda x: 0.0)
    with pytest.raises(ChartError):
        fermat_eval(chart, np.zeros(2), np.ones(2))


def test_arrival_matches_fermat_quadrature():
    rng = np.random.default_rng(4)
    chart = random_chart(rng)
    curve = circle(0.8, 1.0)
    s = np.linspace(0, curve.t_end, 4001)
    vals = np.array([fermat_eval(chart, y[:2], y[2:]) for y in curve.dense(s)])
    h = s[1] - s[0]
    simpson = h / 3 * (vals[0] + vals[-1] + 4 * vals[1:-1:2].sum() + 2 * vals[2:-1:2].sum())
    assert arrival_time(chart, curve) == pytest.approx(simpson, abs=1e-10)


def test_arrival_additive():
    chart = random_chart(np.random.default_rng(5))
    curve = circle(1.2, 0.7, turns=1.5)
    a, b = 2.1, curve.t_end
    whole = arrival_time(chart, curve, 0.0, b)
    assert arrival_time(chart, curve, 0.0, a) + arrival_time(chart, curve, a, b) == pytest.approx(
        whole, abs=1e-12)


def test_domain_exit_reports_parameter():
    chart = StationaryChart(g0=lambda x: np.eye(2), delta=lambda x: np.zeros(2), beta=lambda x: 1.0,
                            contains=lambda x: x[0] > -0.5)
    curve = circle(1.0)
    with pytest.raises(ChartDomainError) as info:
        arrival_time(chart, curve)
    # x0 = cos s first drops below -1/2 at s = 2 pi / 3; the report uses the first node outside
    assert 2 * np.pi / 3 <= info.value.exit_parameter < 2 * np.pi / 3 + 0.5
    with pytest.raises(ChartDomainError):
        lift_curve(chart, curve)


def test_flat_lift_of_geodesic():
    line = integrate(lambda t, y: np.concatenate([y[..., 2:], np.zeros_like(y[..., 2:])], axis=-1),
                     0.0, [0.0, 0.0, 0.6, 0.8], 5.0, 1e-12)
    lifted = lift_curve(flat_chart(), line)
    np.testing.assert_allclose(lifted.t, lifted.s, atol=1e-12)
    assert lifted.lightlike_residual < 1e-14


def test_lift_is_lightlike_and_future_directed():
    chart = random_chart(np.random.default_rng(6))
    lifted = lift_curve(chart, circle(0.9, 1.3, turns=2.0))
    assert lifted.lightlike_residual < 1e-9
    assert np.all(np.diff(lifted.t) > 0)
    assert np.all(lifted.t_dot > 0)


def test_lift_trace_independent_of_speed():
    chart = random_chart(np.random.default_rng(7))
    slow_curve, fast_curve = circle(1.0, 1.0), circle(1.0, 2.0)
    slow, fast = lift_curve(chart, slow_curve), lift_curve(chart, fast_curve)
    assert fast.t[-1] == pytest.approx(slow.t[-1], abs=1e-9)
    # the fast curve visits the same base point at half the parameter
    for s in np.linspace(0.5, 2 * np.pi, 6):
        assert arrival_time(chart, fast_curve, 0.0, s / 2) == pytest.approx(
            arrival_time(chart, slow_curve, 0.0, s), abs=1e-9)


# -- Hopf charts ----------------------------------------------------------------------------

@pytest.mark.parametrize("phi", [0.3, np.pi / 4, 1.2])
def test_hopf_horizontal_unit_vector(phi):
    chart = HopfChart(phi, center=(0.0, 0.6, 0.8))
    x = chart.center / 2
    a = chart.pullback_alpha(x)
    v = np.cross(chart.center, np.array([1.0, 0.0, 0.0]))
    v /= np.linalg.norm(v)
    assert np.linalg.norm(a) < 1e-15  # the section is horizontal at the chart centre
    assert fermat_eval(chart, x, v) == pytest.approx(np.tan(phi), abs=1e-13)


@pytest.mark.parametrize("phi", [0.3, 0.9])
def test_hopf_reduced_matches_generic(phi):
    chart = HopfChart(phi)
    rng = np.random.default_rng(1)
    for _ in range(25):
        ang = 0.9 * chart.radius * rng.uniform()
        u = rng.standard_normal(3)
        u -= (u @ chart.center) * chart.center
        u /= np.linalg.norm(u)
        n = np.cos(ang) * chart.center + np.sin(ang) * u
        v = np.cross(n, rng.standard_normal(3))
        x = n / 2
        reduced = chart.reduced(x, v)
        assert fermat_eval(chart, x, v) == pytest.approx(reduced, abs=1e-12 * max(1, np.linalg.norm(v)))
        assert chart.fermat_batch(x[None], v[None])[0] == pytest.approx(reduced, abs=1e-12)


def test_hopf_chart_rejects_non_spacelike_domain():
    with pytest.raises(ChartError):
        HopfChart(0.1, radius=2.5)


@pytest.mark.parametrize("phi", [np.pi / 8, np.pi / 4, 1.0])
def test_hopf_arrival_equals_fiber_shift(phi):
    arrival, delta = arrival_shift(phi)
    assert abs(wrap(arrival - delta)) < 1e-5
    assert abs(wrap(arrival - measured_shift(phi, 1e-12))) < 1e-5
