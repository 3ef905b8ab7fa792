import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import dunesim as ds
from dunesim.errors import ConfigurationError
from dunesim.physics import U_FLOOR


@pytest.mark.parametrize("sigma,expected", [(-1.0, 0.0), (0.0, 0.0), (4.0, 8.0)])
def test_chi_values(sigma, expected):
    assert ds.chi(sigma) == pytest.approx(expected, abs=1e-15)


def test_chi_continuous_at_zero():
    eps = 1e-8
    assert ds.chi(eps) <= eps
    assert ds.chi(-eps) == 0.0
    arr = ds.chi(np.array([-2.0, 0.0, 0.25]))
    assert np.allclose(arr, [0.0, 0.0, 0.125])


def test_eval_g_power3():
    law = ds.power3_law()
    assert ds.eval_g(law, "diffusion", 2.0) == pytest.approx(8.0)
    assert ds.eval_g(law, "transport", 2.0) == pytest.approx(8.0)
    assert ds.eval_g(law, "diffusion", 0.0) == 0.0


def test_eval_g_vanrijn():
    law = ds.van_rijn_law(u_crit_sq=0.5)
    assert ds.eval_g(law, "diffusion", 1.0) == pytest.approx(0.5 ** 1.5)
    assert ds.eval_g(law, "transport", 0.0) == 0.0
    # below the critical speed the response is identically zero
    assert ds.eval_g(law, "diffusion", 0.5) == 0.0


def test_eval_g_rejects_bad_input():
    law = ds.power3_law()
    with pytest.raises(ConfigurationError):
        ds.eval_g(law, "diffusion", -1.0)
    with pytest.raises(ConfigurationError):
        ds.eval_g(law, "sideways", 1.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(min_value=0.0, max_value=10.0))
def test_transport_response_never_exceeds_diffusion_response(u):
    for law in (ds.power3_law(), ds.van_rijn_law()):
        assert ds.eval_g(law, "transport", u) <= ds.eval_g(law, "diffusion", u)


def test_response_flat_at_zero_speed():
    # transported flux must vanish to second order at zero speed
    for law in (ds.power3_law(), ds.van_rijn_law()):
        d = 1e-5
        g0 = ds.eval_g(law, "transport", 0.0)
        g1 = ds.eval_g(law, "transport", d)
        assert g0 == 0.0
        assert g1 / d <= 1e-9  # derivative at zero vanishes


def test_threshold_floor_pair():
    law = ds.van_rijn_law(u_crit_sq=0.5, g_floor=1e-3)
    u = np.linspace(law.u_threshold, 10.0, 500)
    assert np.all(law.response(u) >= law.g_floor - 1e-15)
    p3 = ds.power3_law()
    assert p3.u_threshold == 0.0
    u = np.linspace(0.01, 10.0, 500)
    assert np.all(p3.response(u) >= p3.g_floor - 1e-15)


def test_rotating_forcing_evaluation():
    f = ds.rotating_tide(amplitude=1.0)
    (u1, u2), m = ds.forcing_eval(f, 0.0, 0.0, 0.25, (np.array(0.3), np.array(0.7)))
    assert u1 == pytest.approx(0.0, abs=1e-15)
    assert u2 == pytest.approx(1.0)
    # speed equals the amplitude at every phase
    for theta in np.linspace(0, 1, 17):
        (u1, u2), _ = ds.forcing_eval(f, 0.0, 0.0, theta, (0.1, 0.9))
        assert np.hypot(u1, u2) == pytest.approx(1.0)


def test_unidirectional_zero_at_phase_zero():
    f = ds.unidirectional_tide()
    (u1, u2), _ = ds.forcing_eval(f, 0.0, 0.0, 0.0, (0.5, 0.5))
    assert u1 == 0.0 and u2 == 0.0


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=0.0, max_value=1.0),
       st.floats(min_value=0.0, max_value=1.0),
       st.floats(min_value=0.0, max_value=2.0))
def test_forcing_is_one_periodic_in_phase(theta, x1, t):
    for f in (ds.rotating_tide(modulation=0.2, spatial_variation=0.3),
              ds.unidirectional_tide(direction=(1.0, 2.0))):
        (a1, a2), m1 = ds.forcing_eval(f, t, 0.0, theta, (x1, 0.25))
        (b1, b2), m2 = ds.forcing_eval(f, t, 0.0, theta + 1.0, (x1, 0.25))
        assert abs(a1 - b1) <= 1e-12 and abs(a2 - b2) <= 1e-12
        assert abs(m1 - m2) <= 1e-12


def test_forcing_zero_phase_mean():
    thetas = (np.arange(256) + 0.5) / 256
    for f in (ds.rotating_tide(spatial_variation=0.4), ds.unidirectional_tide()):
        us = np.array([f.velocity(0.0, th, 0.3, 0.6) for th in thetas])
        ms = np.array([f.height(0.0, 0.0, th, 0.3, 0.6) for th in thetas])
        assert np.max(np.abs(us.mean(axis=0))) <= 1e-12
        assert abs(ms.mean()) <= 1e-12


def test_forcing_speed_above_threshold_on_window():
    law = ds.van_rijn_law(u_crit_sq=0.25)
    f = ds.unidirectional_tide(amplitude=2.0)
    lo, hi = f.theta_window
    for theta in np.linspace(lo, hi, 21):
        (u1, u2), _ = ds.forcing_eval(f, 0.0, 0.0, theta, (0.2, 0.8))
        assert np.hypot(u1, u2) >= law.u_threshold


def _short_regime(eps=1 / 200):
    return ds.snapped_regime("short_small", epsilon=eps)


def test_assemble_zero_velocity_gives_zero_coefficients():
    regime = _short_regime()
    sample = ds.assemble_coefficients(regime.law, ds.zero_forcing(), regime,
                                      0.0, 0.0, 0.3, (0.5, 0.5))
    assert sample.diffusivity == 0.0
    assert np.all(sample.flux == 0.0)


def test_assemble_short_term_snapped_sample():
    # at phase 1/4 the height variation vanishes and the rotating speed is 1
    regime = _short_regime()
    forcing = ds.rotating_tide(amplitude=1.0)
    s = ds.assemble_coefficients(regime.law, forcing, regime, 0.0, 0.0, 0.25, (0.1, 0.2))
    assert s.diffusivity == pytest.approx(0.5, abs=1e-12)
    assert np.hypot(*s.flux) == pytest.approx(10.0, abs=1e-11)


def test_assemble_split_identity_is_exact():
    regime = _short_regime(eps=1 / 50)
    forcing = ds.rotating_tide(amplitude=1.3, spatial_variation=0.2)
    for theta in (0.0, 0.1, 0.37, 0.5, 0.93):
        s = ds.assemble_coefficients(regime.law, forcing, regime, 0.2, 0.0,
                                     theta, (0.3, 0.8))
        assert s.diffusivity == s.base_diffusivity + s.split_scale * s.diffusivity_corr
        assert np.all(s.flux == s.base_flux + s.split_scale * s.flux_corr)
        assert s.split_scale == regime.epsilon


def test_assemble_mean_term_scale_is_sqrt_epsilon():
    regime = ds.snapped_regime("mean_small")
    s = ds.assemble_coefficients(regime.law, ds.rotating_tide(), regime,
                                 0.0, 0.0, 0.1, (0.5, 0.5))
    assert s.split_scale == pytest.approx(np.sqrt(regime.epsilon))


def test_flux_dominated_by_diffusivity():
    # |C|^2 <= c^2 * d * A on a sampled lattice
    regime = _short_regime(eps=1 / 100)
    law = regime.law
    forcing = ds.rotating_tide(amplitude=1.1, spatial_variation=0.3)
    gamma = law.c ** 2 * law.deriv_bound
    for theta in np.linspace(0, 1, 9):
        for x1 in np.linspace(0, 1, 5):
            s = ds.assemble_coefficients(law, forcing, regime, 0.0, 0.0,
                                         theta, (x1, 0.4))
            assert np.dot(s.flux, s.flux) <= gamma * s.diffusivity + 1e-14


def test_assembled_coefficients_one_periodic():
    regime = _short_regime()
    forcing = ds.rotating_tide(spatial_variation=0.25)
    for theta in np.linspace(0, 1, 7):
        s0 = ds.assemble_coefficients(regime.law, forcing, regime, 0.0, 0.0,
                                      theta, (0.3, 0.6))
        s1 = ds.assemble_coefficients(regime.law, forcing, regime, 0.0, 0.0,
                                      theta + 1.0, (0.3, 0.6))
        assert abs(s0.diffusivity - s1.diffusivity) <= 1e-12
        assert np.max(np.abs(s0.flux - s1.flux)) <= 1e-12


def test_rotating_diffusivity_strictly_positive(grid16):
    regime = _short_regime()
    forcing = ds.rotating_tide(amplitude=1.0, spatial_variation=0.25)
    provider = ds.CoefficientProvider(regime.law, forcing, regime, grid16)
    floor = regime.a * regime.law.response(0.75) * (1 - regime.b * regime.epsilon)
    for theta in np.linspace(0, 1, 9):
        f = provider.fine(0.0, 0.0, theta)
        assert np.min(f.diff_east) >= floor - 1e-12
        assert np.min(f.diff_north) >= floor - 1e-12


def test_unidirectional_diffusivity_vanishes_at_slack(grid16):
    regime = _short_regime()
    forcing = ds.unidirectional_tide()
    provider = ds.CoefficientProvider(regime.law, forcing, regime, grid16)
    for theta in (0.0, 0.5):
        f = provider.fine(0.0, 0.0, theta)
        assert np.max(np.abs(f.diff_east)) <= 1e-40
        assert np.max(np.abs(f.flux_east)) <= 1e-40


def test_direction_floor_handles_tiny_speeds():
    regime = _short_regime()
    forcing = ds.unidirectional_tide(amplitude=U_FLOOR / 10)
    s = ds.assemble_coefficients(regime.law, forcing, regime, 0.0, 0.0, 0.25,
                                 (0.5, 0.5))
    assert np.all(s.flux == 0.0)


def test_negative_height_coupling_rejected(grid16):
    # b*scale*m beyond 1 would flip the sign of the diffusivity
    regime = ds.snapped_regime("short_small", epsilon=0.5)
    forcing = ds.rotating_tide()
    provider = ds.CoefficientProvider(regime.law, forcing, regime, grid16)
    with pytest.raises(ConfigurationError):
        provider.fine(0.0, 0.0, 0.0)


def test_homogenized_fields_are_scale_free(grid16):
    forcing = ds.rotating_tide(spatial_variation=0.25)
    law = ds.power3_law()
    r1 = ds.snapped_regime("short_small", epsilon=1 / 25, law=law)
    r2 = ds.snapped_regime("short_small", epsilon=1 / 100, law=law)
    p1 = ds.CoefficientProvider(r1.law, forcing, r1, grid16)
    p2 = ds.CoefficientProvider(r2.law, forcing, r2, grid16)
    f1 = p1.homogenized(0.0, 0.0, 0.3)
    f2 = p2.homogenized(0.0, 0.0, 0.3)
    assert np.array_equal(f1.diff_east, f2.diff_east)
    assert np.array_equal(f1.flux_north, f2.flux_north)


def test_first_order_fields_match_pointwise_split(grid16):
    regime = _short_regime(eps=1 / 50)
    forcing = ds.rotating_tide(spatial_variation=0.2)
    provider = ds.CoefficientProvider(regime.law, forcing, regime, grid16)
    theta = 0.37
    f1 = provider.first_order(0.0, 0.0, theta)
    x1 = grid16.x1_east[3, 5]
    x2 = grid16.x2_east[3, 5]
    s = ds.assemble_coefficients(regime.law, forcing, regime, 0.0, 0.0, theta, (x1, x2))
    assert f1.diff_east[3, 5] == pytest.approx(s.diffusivity_corr, rel=1e-12)
    assert f1.flux_east[3, 5] == pytest.approx(s.flux_corr[0], rel=1e-12)


def test_tabulated_forcing_roundtrip(tmp_path, grid16):
    thetas = np.array([0.0, 0.25, 0.5, 0.75])
    names = []
    hnames = []
    for i, th in enumerate(thetas):
        u = np.empty((16, 16, 2))
        u[:, :, 0] = np.cos(2 * np.pi * th)
        u[:, :, 1] = np.sin(2 * np.pi * th)
        name = f"vel_{i}.bin"
        ds.save_vector(ds.VectorField(grid16, u), tmp_path / name)
        names.append(name)
        hname = f"hgt_{i}.csv"
        ds.save_scalar(ds.ScalarField(grid16, np.full((16, 16), np.cos(2 * np.pi * th))),
                       tmp_path / hname)
        hnames.append(hname)
    (tmp_path / "manifest.txt").write_text(
        "thetas=" + ",".join(str(t) for t in thetas) + "\n"
        + "velocity_files=" + ",".join(names) + "\n"
        + "height_files=" + ",".join(hnames) + "\n")
    f = ds.tabulated_forcing(tmp_path)
    (u1, u2), m = ds.forcing_eval(f, 0.0, 0.0, 0.25, (0.5, 0.5))
    assert u1 == pytest.approx(0.0, abs=1e-12)
    assert u2 == pytest.approx(1.0)
    assert m == pytest.approx(0.0, abs=1e-12)
    # interpolation halfway between samples
    (u1, u2), _ = ds.forcing_eval(f, 0.0, 0.0, 0.125, (0.5, 0.5))
    assert u1 == pytest.approx(0.5)
    assert u2 == pytest.approx(0.5)


def test_tabulated_forcing_missing_manifest(tmp_path):
    with pytest.raises(ConfigurationError):
        ds.tabulated_forcing(tmp_path)


def test_mean_term_composes_slow_velocity_perturbation():
    import dataclasses

    def slow_perturbation(t, tau, theta, x1, x2):
        one = np.ones_like(np.asarray(x1, dtype=float))
        return 0.5 * np.cos(2 * np.pi * tau) * one, 0.0 * one

    base = ds.rotating_tide(amplitude=1.0)
    forcing = dataclasses.replace(base, velocity_slow=slow_perturbation)
    regime = ds.snapped_regime("mean_small", epsilon=1 / 100)
    root = np.sqrt(regime.epsilon)
    # at phase 1/4 the base velocity is (0, 1); tau = 0 adds (0.5*sqrt(eps), 0)
    s = ds.assemble_coefficients(regime.law, forcing, regime, 0.0, 0.0, 0.25,
                                 (0.5, 0.5))
    speed = np.hypot(0.5 * root, 1.0)
    m = np.cos(2 * np.pi * 0.25)
    expected = regime.a * (1.0 - regime.b * root * m) * speed ** 3
    assert s.diffusivity == pytest.approx(expected, rel=1e-12)


def test_long_term_composes_squared_epsilon_perturbations():
    import dataclasses

    def long_velocity(t, theta, x1, x2):
        one = np.ones_like(np.asarray(x1, dtype=float))
        return 2.0 * one, 0.0 * one

    def long_height(t, tau, theta, x1, x2):
        return 3.0 * np.ones_like(np.asarray(x1, dtype=float))

    base = ds.rotating_tide(amplitude=1.0)
    forcing = dataclasses.replace(base, velocity_long=long_velocity,
                                  height_long=long_height)
    regime = ds.snapped_regime("long_small", epsilon=1 / 10)
    eps2 = regime.epsilon ** 2
    s = ds.assemble_coefficients(regime.law, forcing, regime, 0.0, 0.0, 0.25,
                                 (0.5, 0.5))
    speed = np.hypot(2.0 * eps2, 1.0)
    m = np.cos(2 * np.pi * 0.25) + eps2 * 3.0
    expected = regime.a * (1.0 - regime.b * regime.epsilon * m) * speed ** 3
    assert s.diffusivity == pytest.approx(expected, rel=1e-12)


def test_tabulated_forcing_drives_cell_solve(tmp_path):
    """A forcing tabulated from the rotating preset at the solver's phase
    lattice reproduces the analytic preset's periodic profile (up to the
    node-to-face interpolation of the tabulated fields)."""
    n, N = 16, 16
    grid = ds.make_grid(n)
    cfg = ds.SolverConfig(dt_per_period=N)
    analytic = ds.rotating_tide(spatial_variation=0.3)
    thetas = np.arange(N) / N
    vnames, hnames = [], []
    for j, th in enumerate(thetas):
        (u1, u2), m = ds.forcing_eval(analytic, 0.0, 0.0, th, (grid.x1, grid.x2))
        vals = np.stack([u1, u2], axis=-1)
        vname, hname = f"v_{j}.bin", f"h_{j}.bin"
        ds.save_vector(ds.VectorField(grid, vals), tmp_path / vname)
        ds.save_scalar(ds.ScalarField(grid, m), tmp_path / hname)
        vnames.append(vname)
        hnames.append(hname)
    (tmp_path / "manifest.txt").write_text(
        "thetas=" + ",".join(repr(float(t)) for t in thetas) + "\n"
        + "velocity_files=" + ",".join(vnames) + "\n"
        + "height_files=" + ",".join(hnames) + "\n")
    tabulated = ds.tabulated_forcing(tmp_path)
    law = ds.power3_law()
    p_exact = ds.cell_solve(0.0, law, analytic, cfg, grid)
    p_table = ds.cell_solve(0.0, law, tabulated, cfg, grid)
    assert p_table.distance(p_exact) <= 0.05 * p_exact.max_l2()
    assert np.max(np.abs(p_table.spatial_means())) <= 1e-10
