import math

import pytest

from rbmrelax.errors import ConfigError, ParameterError
from rbmrelax.hydro import (
    A_S_ACETONE_DEFAULT,
    A_S_WATER_DEFAULT,
    HydroParams,
    default_table_path,
    effective_solvent_radius,
    hydro_params_at,
    load_viscosity_table,
    microviscosity_factor,
    mixture_viscosity,
    rbm_rate,
    reference_mixture,
    total_rate,
    translational_diffusivity,
    translational_rate,
)


def test_microviscosity_continuum_limit():
    assert microviscosity_factor(0.5e-9, 0.0) == 1.0


def test_microviscosity_frozen_values():
    # hand-evaluated: u=1 gives 1/(6 + 2/27), u=0.5 gives 1/3.21875
    assert microviscosity_factor(1e-9, 1e-9) == pytest.approx(0.16463414634146339, rel=1e-14)
    assert microviscosity_factor(1e-9, 0.5e-9) == pytest.approx(0.31067961165048541, rel=1e-14)


def test_microviscosity_bounded_and_decreasing():
    prev = 1.0
    for a_s in (0.05e-9, 0.1e-9, 0.2e-9, 0.5e-9, 1e-9, 5e-9):
        f = microviscosity_factor(0.5e-9, a_s)
        assert 0.0 < f <= 1.0
        assert f < prev
        prev = f


def test_rbm_rate_continuum_value():
    # hand-evaluated k_B T / (8 pi a^3 eta) at T=300 K, a=0.5 nm, 1 mPa s
    p = HydroParams(a=0.5e-9, a_s=0.0, eta=1.0e-3, temperature=300.0)
    assert rbm_rate(p) == pytest.approx(1318422678.1492929, rel=1e-12)


def test_rbm_rate_microviscosity_speedup():
    # f_r < 1 divides the friction, so the rate grows
    slow = HydroParams(a=0.5e-9, a_s=0.0, eta=1.0e-3, temperature=300.0)
    fast = HydroParams(a=0.5e-9, a_s=0.25e-9, eta=1.0e-3, temperature=300.0)
    assert rbm_rate(fast) > rbm_rate(slow)
    ratio = rbm_rate(fast) / rbm_rate(slow)
    assert ratio == pytest.approx(1.0 / microviscosity_factor(0.5e-9, 0.25e-9), rel=1e-12)


def test_translational_values():
    # hand-evaluated Stokes-Einstein at T=300 K, a=0.5 nm, 1 mPa s
    p = HydroParams(a=0.5e-9, a_s=0.0, eta=1.0e-3, temperature=300.0)
    assert translational_diffusivity(p) == pytest.approx(4.3947422604976441e-10, rel=1e-12)
    assert translational_rate(p, 12.5e-9) == pytest.approx(2812635.0467184926, rel=1e-12)


def test_hydro_params_validation():
    with pytest.raises(ParameterError):
        HydroParams(a=0.0, a_s=0.0, eta=1e-3, temperature=300.0)
    with pytest.raises(ParameterError):
        HydroParams(a=1e-9, a_s=-1e-10, eta=1e-3, temperature=300.0)
    with pytest.raises(ParameterError):
        HydroParams(a=1e-9, a_s=0.0, eta=0.0, temperature=300.0)
    with pytest.raises(ParameterError):
        HydroParams(a=1e-9, a_s=0.0, eta=1e-3, temperature=0.0)


def test_mixture_endpoints_match_table():
    # the interpolant passes through the table nodes
    m = reference_mixture()
    assert mixture_viscosity(m, 1.0) == pytest.approx(0.890e-3, rel=1e-12)
    assert mixture_viscosity(m, 0.0) == pytest.approx(0.306e-3, rel=1e-12)


def test_mixture_has_interior_maximum():
    # the water-acetone viscosity peaks at intermediate composition
    m = reference_mixture()
    etas = [mixture_viscosity(m, x / 100.0) for x in range(101)]
    peak = max(etas)
    assert peak > etas[0] and peak > etas[-1]
    assert peak == pytest.approx(1.298e-3, rel=0.02)


def test_mixture_coverage_enforced():
    m = reference_mixture()
    with pytest.raises(ParameterError):
        mixture_viscosity(m, -0.01)
    with pytest.raises(ParameterError):
        mixture_viscosity(m, 1.01)


def test_effective_solvent_radius_linear_rule():
    m = reference_mixture()
    assert effective_solvent_radius(m, 1.0) == pytest.approx(A_S_WATER_DEFAULT, rel=1e-14)
    assert effective_solvent_radius(m, 0.0) == pytest.approx(A_S_ACETONE_DEFAULT, rel=1e-14)
    assert effective_solvent_radius(m, 0.5) == pytest.approx(1.95e-10, rel=1e-14)


def test_hydro_params_at_wires_mixture():
    m = reference_mixture(x_water=0.5)
    p = hydro_params_at(m, a=0.5e-9, temperature=298.0)
    assert p.eta == mixture_viscosity(m, 0.5)
    assert p.a_s == effective_solvent_radius(m, 0.5)
    q = hydro_params_at(m, a=0.5e-9, temperature=298.0, x=1.0)
    assert q.eta == pytest.approx(0.890e-3, rel=1e-12)


def test_total_rate_is_component_sum():
    br = total_rate(r_dip=1.0e9, r_vib=2.0e9, r_trans=3.0e6, r_rot=4.0e9)
    assert br.r_total == pytest.approx(
        br.r_dip + br.r_vib + br.r_trans + br.r_rot, rel=1e-14)
    assert br.as_dict()["total"] == br.r_total
    with pytest.raises(ParameterError):
        total_rate(r_dip=-1.0, r_vib=0.0, r_trans=0.0, r_rot=1.0e9)


def test_load_viscosity_table_roundtrip():
    rows = load_viscosity_table(default_table_path())
    xs = [x for x, _ in rows]
    assert xs[0] == 0.0 and xs[-1] == 1.0
    assert all(b > a for a, b in zip(xs, xs[1:]))
    # file stores mPa s, loader returns Pa s
    assert dict(rows)[1.0] == pytest.approx(0.890e-3, rel=1e-12)


def test_load_viscosity_table_errors(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("mole_fraction viscosity_mPa_s\n0.0 0.3\n0.5 not_a_number\n")
    with pytest.raises(ConfigError) as err:
        load_viscosity_table(bad)
    assert ":3" in str(err.value)
    with pytest.raises(ConfigError):
        load_viscosity_table(tmp_path / "missing.txt")
    partial = tmp_path / "partial.txt"
    partial.write_text("mole_fraction viscosity_mPa_s\n0.2 0.3\n1.0 0.9\n")
    with pytest.raises(ConfigError):
        load_viscosity_table(partial)  # must cover [0, 1]
