import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zollfrei.berger import (BergerParams, LightlikeState, alpha_eval, base_dvol, base_phase,
                             base_trajectory, curvature_factor, curvature_samples, exact_lightlike,
                             fiber_shift, fit_base_circle, frame_vector, h_eval, h_form, hopf_project,
                             hopf_push, integrate_lightlike, lightcone_sample, matched_magnetic_state)
from zollfrei.magnetic import ExtremalState, MagneticSystem, integrate_extremal
from zollfrei.oracle import curve_hausdorff
from zollfrei.quaternion import I, J, K, ONE, fiber_action, qmul, random_unit
from zollfrei.surfaces import ModelSurface

seeds = st.integers(0, 2 ** 32 - 1)
PHI_STAR = np.arccos(1 / 3)


def random_tangent(rng, q):
    v = rng.standard_normal(4)
    return v - (v @ q) * q


def test_params_reject_endpoints():
    for phi in (0.0, 1e-7, np.pi / 2, -0.3):
        with pytest.raises(ValueError):
            BergerParams(phi)
    np.testing.assert_allclose(BergerParams(np.pi / 4).inertia, [-1, 1, 1], atol=1e-15)


# -- Hopf projection and connection --------------------------------------------------

def test_hopf_project_examples():
    np.testing.assert_allclose(hopf_project(ONE), [0.5, 0, 0], atol=1e-16)
    for t in (0.3, 2.0, -4.1):
        np.testing.assert_allclose(hopf_project(fiber_action(t, ONE)), [0.5, 0, 0], atol=1e-15)
    # conj(q) i q = k for q = (1 + j)/sqrt 2
    p = hopf_project((ONE + J) / np.sqrt(2))
    np.testing.assert_allclose(p, [0, 0, 0.5], atol=1e-15)
    assert np.linalg.norm(p) == pytest.approx(0.5, abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(seed=seeds, t=st.floats(-10, 10))
def test_hopf_project_fiber_invariant(seed, t):
    q = random_unit(np.random.default_rng(seed))
    p = hopf_project(q)
    assert np.linalg.norm(p) == pytest.approx(0.5, abs=1e-14)
    np.testing.assert_allclose(hopf_project(fiber_action(t, q)), p, atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(seed=seeds)
def test_horizontal_differential_is_isometry(seed):
    rng = np.random.default_rng(seed)
    q = random_unit(rng)
    a, b = rng.standard_normal(2), rng.standard_normal(2)
    u, w = frame_vector(q, [0, *a]), frame_vector(q, [0, *b])
    assert hopf_push(q, u) @ hopf_push(q, w) == pytest.approx(a @ b, abs=1e-13)
    np.testing.assert_allclose(hopf_push(q, frame_vector(q, [1.0, 0, 0])), 0, atol=1e-15)
    eps = 1e-6
    numeric = (hopf_project(q + eps * u) - hopf_project(q - eps * u)) / (2 * eps)
    np.testing.assert_allclose(hopf_push(q, u), numeric, atol=1e-8)


def test_alpha_examples():
    assert alpha_eval(ONE, I) == 1.0
    assert alpha_eval(ONE, J) == 0.0
    rng = np.random.default_rng(0)
    for _ in range(10):
        q = random_unit(rng)
        assert alpha_eval(q, qmul(I, q)) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        alpha_eval(ONE, ONE)


@settings(max_examples=30, deadline=None)
@given(seed=seeds, t=st.floats(-5, 5))
def test_alpha_invariant_under_fiber_flow(seed, t):
    rng = np.random.default_rng(seed)
    q = random_unit(rng)
    v = random_tangent(rng, q)
    # the fiber flow is left multiplication, whose differential maps v to e^{it} v
    assert alpha_eval(fiber_action(t, q), fiber_action(t, v)) == pytest.approx(alpha_eval(q, v),
                                                                                abs=1e-13)
    # finite-difference Lie derivative along the fiber generator
    eps = 1e-5
    lie = (alpha_eval(fiber_action(eps, q), fiber_action(eps, v))
           - alpha_eval(fiber_action(-eps, q), fiber_action(-eps, v))) / (2 * eps)
    assert abs(lie) < 1e-8


def test_curvature_factor_is_two():
    ratios = curvature_samples(20, seed=0)
    assert np.ptp(ratios) < 1e-9
    assert curvature_factor() == pytest.approx(2.0, abs=1e-9)
    assert curvature_factor(seed=7) == pytest.approx(2.0, abs=1e-9)


def test_curvature_bracket_oracle():
    # d alpha(J, K) = -alpha([J, K]) with the frame bracket [jq, kq] = -2 iq
    rng = np.random.default_rng(1)
    for _ in range(5):
        q = random_unit(rng)
        jq, kq = qmul(J, q), qmul(K, q)
        bracket = -2 * qmul(I, q)
        assert -alpha_eval(q, bracket) == pytest.approx(2.0, abs=1e-14)
        area = base_dvol(hopf_project(q), hopf_push(q, jq), hopf_push(q, kq))
        assert area == pytest.approx(1.0, abs=1e-14)


def test_curvature_antisymmetric_and_vertical():
    from zollfrei.berger import _d_alpha_chart

    from zollfrei import charts

    rng = np.random.default_rng(2)
    for _ in range(5):
        x = rng.uniform(-0.7, 0.7, 3)
        d = _d_alpha_chart(x)
        np.testing.assert_allclose(d, -d.T, atol=1e-15)
        q = charts.to_sphere(0, x)
        jac = charts.jacobian(0, x)
        iq_chart = np.linalg.lstsq(jac, qmul(I, q), rcond=None)[0]
        xi = rng.standard_normal(3)
        assert abs(iq_chart @ d @ xi) < 1e-8 * np.linalg.norm(xi)


# -- lightlike flow --------------------------------------------------------------------------

@settings(max_examples=30, deadline=None)
@given(phi=st.floats(0.01, 1.55), psi=st.floats(-10, 10))
def test_lightcone_sample(phi, psi):
    st_ = lightcone_sample(ONE, phi, psi)
    assert abs(h_eval(BergerParams(phi), st_.omega)) < 1e-14 * (1 + np.tan(phi) ** 2)
    other = lightcone_sample(ONE, phi, psi + 2 * np.pi)
    np.testing.assert_allclose(other.omega, st_.omega, atol=1e-14)
    assert st_.omega[0] > 0


def test_h_form_matches_frame():
    params = BergerParams(0.7)
    rng = np.random.default_rng(3)
    q = random_unit(rng)
    om = rng.standard_normal(3)
    v = frame_vector(q, om)
    assert v @ h_form(params, q) @ v == pytest.approx(h_eval(params, om), abs=1e-13)


def test_integrate_rejects_bad_states():
    params = BergerParams(0.5)
    with pytest.raises(ValueError):
        integrate_lightlike(params, LightlikeState(ONE, np.array([1.0, 1.0, 0.0])), 1.0)
    with pytest.raises(ValueError):
        integrate_lightlike(params, LightlikeState(ONE, np.array([-np.tan(0.5), 1.0, 0.0])), 1.0)


@pytest.mark.parametrize("phi", [np.pi / 8, PHI_STAR])
def test_conservation_long_run(phi):
    params = BergerParams(phi)
    q = random_unit(np.random.default_rng(4))
    traj = integrate_lightlike(params, lightcone_sample(q, phi, 0.4), 100.0, 1e-10)
    assert traj.status == "finished"
    assert traj.stats["omega1_drift"] < 1e-9
    assert traj.stats["lightlike_residual"] < 1e-10
    assert traj.stats["norm_drift"] < 1e-12


@pytest.mark.parametrize("phi", [0.3, 1.0])
def test_matches_exact_solution(phi):
    params = BergerParams(phi)
    st0 = lightcone_sample(random_unit(np.random.default_rng(5)), phi, 1.3)
    traj = integrate_lightlike(params, st0, 10.0, 1e-12)
    exact = exact_lightlike(params, st0, traj.t)
    assert np.max(np.abs(traj.y - exact)) < 1e-8


def test_batched_matches_single():
    phi = 0.6
    params = BergerParams(phi)
    rng = np.random.default_rng(6)
    states = [lightcone_sample(random_unit(rng), phi, psi) for psi in (0.0, 2.0, 4.0)]
    batch = integrate_lightlike(params, np.array([s.as_array() for s in states]), 5.0, 1e-11)
    for b, s in enumerate(states):
        exact = exact_lightlike(params, s, batch.t_end)[0]
        assert np.max(np.abs(batch.y[-1, b] - exact)) < 1e-8


# -- conjugacy with the magnetic flow ----------------------------------------------------------

@pytest.mark.parametrize("phi", [np.pi / 8, np.pi / 4, 1.1])
def test_projection_is_magnetic_extremal(phi):
    params = BergerParams(phi)
    st0 = lightcone_sample(random_unit(np.random.default_rng(7)), phi, 0.9)
    traj = integrate_lightlike(params, st0, 4.0, 1e-12)
    fs = fiber_shift(params, traj, 1e-10)
    base = base_trajectory(traj, fs.base_period)
    p, v, lam = matched_magnetic_state(st0)
    assert lam * np.linalg.norm(v) == pytest.approx(st0.omega[0], rel=1e-14)
    assert lam == pytest.approx(np.tan(phi), rel=1e-12)
    system = MagneticSystem(ModelSurface.sphere(0.5), lam, -curvature_factor())
    ext = integrate_extremal(system, ExtremalState(p, v), fs.base_period, 1e-12)
    grid = np.linspace(0, fs.base_period, 400)
    dist = curve_hausdorff(lambda s: base.dense(s)[:, :3], grid,
                           lambda s: ext.dense(s)[:, :3], grid)
    assert dist < 1e-5
    # the opposite sign of the flux traces a different circle
    wrong = integrate_extremal(MagneticSystem(system.surface, lam, 2.0), ExtremalState(p, v),
                               fs.base_period, 1e-10)
    assert curve_hausdorff(lambda s: base.dense(s)[:, :3], grid,
                           lambda s: wrong.dense(s)[:, :3], grid) > 1e-2


@pytest.mark.parametrize("phi", [0.2, np.pi / 4, 1.3])
def test_fitted_latitude_gives_curvature_factor(phi):
    params = BergerParams(phi)
    st0 = lightcone_sample(random_unit(np.random.default_rng(8)), phi, 2.0)
    traj = integrate_lightlike(params, st0, 4.0, 1e-12)
    fs = fiber_shift(params, traj, 1e-10)
    pts = base_trajectory(traj, fs.base_period).y[:, :3]
    _, theta = fit_base_circle(pts)
    c_dyn = 2 * np.tan(phi) / np.tan(theta)
    assert abs(c_dyn) == pytest.approx(abs(curvature_factor()), abs=1e-4)
    assert theta == pytest.approx(phi, abs=1e-8)


# -- fiber shift -----------------------------------------------------------------------------

def test_shift_vanishes_when_orbit_closes():
    params = BergerParams(PHI_STAR)
    st0 = lightcone_sample(ONE, PHI_STAR, 0.0)
    traj = integrate_lightlike(params, st0, 4.0, 1e-12)
    fs = fiber_shift(params, traj, 1e-10)
    assert min(fs.delta, 2 * np.pi - fs.delta) < 1e-7
    np.testing.assert_allclose(traj.state_at(fs.base_period)[:4], ONE, atol=1e-7)
    assert fs.base_period == pytest.approx(np.pi * np.sin(PHI_STAR), abs=1e-8)


def test_shift_rejects_open_projection():
    params = BergerParams(0.5)
    traj = integrate_lightlike(params, lightcone_sample(ONE, 0.5, 0.0), 0.5, 1e-10)
    with pytest.raises(Exception):
        fiber_shift(params, traj)


def test_shift_continuous_in_phi():
    # grid steps shrink with the slope pi sec(phi) tan(phi) so that a continuous shift moves
    # by about 0.07 between neighbours
    phis = [0.2]
    while phis[-1] < 1.15:
        phi = phis[-1]
        phis.append(phi + 0.07 / (np.pi / np.cos(phi) * np.tan(phi) + 0.5))
    phis = np.array(phis)
    deltas = []
    for phi in phis:
        params = BergerParams(phi)
        # one base loop of this initial direction takes pi sin(phi)
        traj = integrate_lightlike(params, lightcone_sample(ONE, phi, 0.0), 1.3 * np.pi * np.sin(phi), 1e-11)
        deltas.append(fiber_shift(params, traj, 1e-9).delta)
    unwrapped = np.unwrap(deltas)
    assert np.max(np.abs(np.diff(unwrapped))) < 0.1
    np.testing.assert_allclose(np.mod(unwrapped, 2 * np.pi),
                               np.mod(np.pi * (1 / np.cos(phis) - 1), 2 * np.pi), atol=1e-7)


def test_base_phase_shape():
    y = lightcone_sample(ONE, 0.5, 0.0).as_array()
    assert base_phase(y).shape == (6,)
    assert base_phase(np.stack([y, y])).shape == (2, 6)
