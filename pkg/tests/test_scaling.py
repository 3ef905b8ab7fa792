import math

import pytest

import dunesim as ds
from dunesim.errors import ConfigurationError
from dunesim.scaling import REFERENCE_MAGNITUDES, SNAPPED


def _derived(kind, **overrides):
    params, defaulted = ds.params_for(kind, **overrides)
    return ds.derive_regime(params, kind, defaulted=defaulted)


def test_short_small_reproduces_reference_magnitudes():
    spec = _derived("short_small")
    d = spec.derivation
    assert d.epsilon == pytest.approx(4.7e4 / 8.6e6)
    assert d.factors["f_diff"] == pytest.approx(90.0, rel=0.05)
    assert d.factors["f_src"] == pytest.approx(1800.0, rel=0.05)
    assert d.factors["f_height"] == pytest.approx(2e-2, rel=0.05)
    for name, ratio in d.ratios.items():
        assert 1 / 1.5 <= ratio <= 1.5, name


def test_short_big_reproduces_reference_magnitudes():
    spec = _derived("short_big")
    d = spec.derivation
    assert d.factors["f_diff"] == pytest.approx(74.3, rel=0.01)
    assert d.factors["f_src"] == pytest.approx(891.0, rel=0.01)
    assert d.factors["f_height"] == pytest.approx(1.33e-2, rel=0.01)
    for name, ratio in d.ratios.items():
        assert 1 / 1.5 <= ratio <= 1.5, name
    # exact coefficients sit near their snapped counterparts
    assert d.a == pytest.approx(0.5, rel=0.25)
    assert d.b == pytest.approx(3.0, rel=0.25)
    assert d.c == pytest.approx(5.0, rel=0.1)


def test_short_big_with_shallow_water_misses_height_reference():
    # the documented depth choice: at 50 m the height factor is 2.2x the
    # reference while the other two factors barely move
    spec = _derived("short_big", water_height=50.0)
    d = spec.derivation
    assert d.ratios["f_height"] > 2.0
    assert 1 / 1.5 <= d.ratios["f_diff"] <= 1.5
    assert 1 / 1.5 <= d.ratios["f_src"] <= 1.5


def test_mean_small_scale_separation():
    spec = _derived("mean_small")
    d = spec.derivation
    assert d.epsilon == pytest.approx(1 / 3000, rel=0.05)
    assert d.lunar_ratio == pytest.approx(1 / 54, rel=0.05)
    # the lunar ratio realizes the square root of the main separation
    assert d.lunar_ratio == pytest.approx(math.sqrt(d.epsilon), rel=0.05)


def test_long_small_epsilon():
    spec = _derived("long_small")
    assert spec.derivation.epsilon == pytest.approx(1 / 192, rel=0.01)


def test_snapped_values_table():
    for kind, (eps, a, b, c) in SNAPPED.items():
        spec = ds.snapped_regime(kind)
        assert (spec.epsilon, spec.a, spec.b, spec.c) == (eps, a, b, c)
        assert spec.law.a == a and spec.law.b == b and spec.law.c == c
    assert ds.snapped_regime("short_big").law.kind == "vanrijn"
    assert ds.snapped_regime("short_big").law.u_crit_sq == 0.5
    assert ds.snapped_regime("short_small").law.kind == "power3"


def test_regime_structure_flags():
    short = ds.snapped_regime("short_small")
    mean = ds.snapped_regime("mean_small")
    long_ = ds.snapped_regime("long_small")
    assert short.stiffness == pytest.approx(1 / short.epsilon)
    assert long_.stiffness == pytest.approx(1 / long_.epsilon ** 2)
    assert short.split_scale == short.epsilon
    assert mean.split_scale == pytest.approx(math.sqrt(mean.epsilon))
    assert long_.split_scale == long_.epsilon
    assert mean.is_mean and not mean.is_long
    assert long_.is_long and not long_.is_mean


def test_with_epsilon_keeps_coefficients():
    spec = ds.snapped_regime("short_small").with_epsilon(1 / 40)
    assert spec.epsilon == 1 / 40
    assert (spec.a, spec.b, spec.c) == (0.5, 4.0, 10.0)


def test_derive_rejects_no_scale_separation():
    params, _ = ds.params_for("short_small", t_bar=1e4)  # shorter than the tide
    with pytest.raises(ConfigurationError):
        ds.derive_regime(params, "short_small")


def test_params_reject_huge_grain():
    with pytest.raises(ConfigurationError):
        ds.params_for("short_small", grain_diameter=1000.0)


def test_params_reject_unknown_override():
    with pytest.raises(ConfigurationError):
        ds.params_for("short_small", wavelength=3.0)


def test_defaulted_fields_are_reported():
    params, defaulted = ds.params_for("short_small", t_bar=9e6)
    assert "t_bar" not in defaulted
    assert "alpha" in defaulted
    spec = ds.derive_regime(params, "short_small", defaulted=defaulted)
    assert spec.derivation.defaulted == defaulted


@pytest.mark.parametrize("t1,t2", [(5e6, 1e7), (1e7, 5e7)])
def test_diffusion_factor_increases_with_observation_time(t1, t2):
    d1 = _derived("short_small", t_bar=t1).derivation
    d2 = _derived("short_small", t_bar=t2).derivation
    assert d2.factors["f_diff"] > d1.factors["f_diff"]


@pytest.mark.parametrize("l1,l2", [(5.0, 10.0), (10.0, 40.0)])
def test_diffusion_factor_decreases_with_wavelength(l1, l2):
    d1 = _derived("short_small", l_bar=l1).derivation
    d2 = _derived("short_small", l_bar=l2).derivation
    assert d2.factors["f_diff"] < d1.factors["f_diff"]


def test_regime_report_and_csv_are_parseable():
    spec = _derived("short_small")
    report = ds.regime_report(spec)
    entries = dict(line.split("=", 1) for line in report.splitlines())
    assert entries["kind"] == "short_small"
    assert float(entries["epsilon_exact"]) == pytest.approx(spec.derivation.epsilon)
    header, row, _ = ds.regime_csv(spec).split("\n")
    assert len(header.split(",")) == len(row.split(","))


def test_regime_spec_validation():
    with pytest.raises(ConfigurationError):
        ds.RegimeSpec(kind="short_small", epsilon=1.5, a=1.0, b=0.0, c=1.0,
                      law=ds.power3_law())
    with pytest.raises(ConfigurationError):
        ds.RegimeSpec(kind="nope", epsilon=0.1, a=1.0, b=0.0, c=1.0,
                      law=ds.power3_law())


def test_reference_table_is_consistent_with_snapped():
    for kind, refs in REFERENCE_MAGNITUDES.items():
        assert refs["epsilon"] == pytest.approx(SNAPPED[kind][0])
