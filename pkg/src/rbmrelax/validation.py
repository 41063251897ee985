"""Cross-checks pitting closed forms against independent numerical routes.

Three families of checks are bundled here:

* ``quadrature``: the Lorentzian spectral density integrates back to its
  variance, checked by adaptive quadrature and by the arctan antiderivative.
* ``bath_mc``: the closed-form mean-square transverse fields agree with
  the Monte Carlo dipolar sum within statistics, and the Monte Carlo
  standard error shrinks as samples^-1/2.
* ``sensitivity``: the minimal-detectable-rate formula tracks an
  independent error-propagation estimate up to a constant factor.

Each check produces an OracleCheck carrying the statistics behind the
verdict, so a failure is diagnosable from the report alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import quad

from .bath import (
    ParticleGeometry,
    SurfaceBath,
    VolumeBath,
    b_perp_mc,
    b_perp_sq_surface,
    b_perp_sq_volume,
)
from .constants import GAMMA_E, OMEGA_0
from .core_relax import NoiseSource, lorentzian_psd
from .errors import ParameterError
from .sensitivity import SensitivityInputs, delta_r_min, delta_r_oracle

# statistical acceptance band for Monte Carlo vs closed form
MC_SIGMA_BAND = 3.0
# allowed departure of the stderr scaling exponent from -1/2
SLOPE_TOLERANCE = 0.05
# allowed spread of formula/oracle ratios around their mean
RATIO_SPREAD = 0.10
# half-width (relative to omega0) of the resonance exclusion window
RESONANCE_EXCLUSION = 0.2


@dataclass(frozen=True)
class OracleCheck:
    """One named comparison with its verdict and supporting numbers."""

    name: str
    passed: bool
    details: dict


@dataclass(frozen=True)
class OracleReport:
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def format_report(report: OracleReport) -> str:
    lines = []
    for check in report.checks:
        lines.append(f"{'PASS' if check.passed else 'FAIL'}  {check.name}")
        for key in sorted(check.details):
            lines.append(f"      {key} = {check.details[key]}")
    lines.append(f"overall: {'PASS' if report.passed else 'FAIL'}")
    return "\n".join(lines)


def check_lorentzian_quadrature() -> OracleCheck:
    """Integrated spectral density equals the field variance.

    The density is even in frequency, so the full-line integral is twice
    the half-line one.  Frequency is rescaled by the correlation time so
    the adaptive sampler sees the knee at order one; the integrand is
    still the implementation under test.  Two routes are compared:
    quadrature to infinity against the variance itself (1e-6 budget), and
    a finite window against the arctan antiderivative (1e-8 budget).
    """
    cases = ((1.0, 1.0e-9), (2.5e-8, 1.0 / 18.0e9), (0.3, 1.0e-6))
    details = {}
    worst_full = 0.0
    worst_window = 0.0
    for i, (b2, tau_c) in enumerate(cases):
        src = NoiseSource(gamma=GAMMA_E, b_perp_sq=b2, tau_c=tau_c)

        def density(u, _src=src, _tau=tau_c):
            return lorentzian_psd(_src, u / _tau) / _tau

        below, _ = quad(density, 0.0, 1.0, limit=200, epsabs=0.0, epsrel=1e-12)
        above, _ = quad(density, 1.0, np.inf, limit=200, epsabs=0.0, epsrel=1e-12)
        full = 2.0 * (below + above) / (2.0 * math.pi)
        err_full = abs(full - b2) / b2

        window = 50.0
        part, _ = quad(density, 0.0, window, points=[1.0], limit=200, epsabs=0.0, epsrel=1e-13)
        part = 2.0 * part / (2.0 * math.pi)
        analytic = (2.0 * b2 / math.pi) * math.atan(window)
        err_window = abs(part - analytic) / analytic

        worst_full = max(worst_full, err_full)
        worst_window = max(worst_window, err_window)
        details[f"case{i}_rel_err_full"] = err_full
        details[f"case{i}_rel_err_window"] = err_window
    details["worst_rel_err_full"] = worst_full
    details["worst_rel_err_window"] = worst_window
    passed = worst_full < 1e-6 and worst_window < 1e-8
    return OracleCheck("lorentzian_quadrature", passed, details)


# fixed comparison point: 25 nm particle, 1 spin per nm^2 surface bath
_MC_GEOMETRY = ParticleGeometry(diameter=25.0e-9)
_MC_SURFACE = SurfaceBath(areal_density=1.0e18, spin_quantum_number=0.5)
_MC_VOLUME = VolumeBath(number_density=1.0e26, spin_quantum_number=3.5)


def check_bath_mc(samples: int = 1_000_000, seed: int = 20260822) -> OracleCheck:
    """Monte Carlo dipolar sums agree with the closed forms.

    Both bath geometries are compared at the fixed reference point within
    MC_SIGMA_BAND standard errors, and the surface-bath standard error is
    fitted against sample count on a log-log grid to confirm the
    samples^-1/2 scaling.
    """
    details = {"samples": samples, "seed": seed}

    closed_s = b_perp_sq_surface(_MC_GEOMETRY, _MC_SURFACE)
    mc_s = b_perp_mc(_MC_GEOMETRY, _MC_SURFACE, samples=samples, seed=seed)
    z_s = (mc_s.mean - closed_s) / mc_s.stderr
    details["surface_closed_t2"] = closed_s
    details["surface_mc_t2"] = mc_s.mean
    details["surface_stderr_t2"] = mc_s.stderr
    details["surface_z"] = z_s

    closed_v = b_perp_sq_volume(_MC_GEOMETRY, _MC_VOLUME)
    mc_v = b_perp_mc(_MC_GEOMETRY, _MC_VOLUME, samples=samples, seed=seed + 1)
    z_v = (mc_v.mean - closed_v) / mc_v.stderr
    details["volume_closed_t2"] = closed_v
    details["volume_mc_t2"] = mc_v.mean
    details["volume_stderr_t2"] = mc_v.stderr
    details["volume_z"] = z_v
    details["volume_tail_fraction"] = mc_v.tail_fraction

    sizes = [10_000, 31_623, 100_000, 316_228, 1_000_000]
    errs = [b_perp_mc(_MC_GEOMETRY, _MC_SURFACE, samples=n, seed=seed + 10 + i).stderr
            for i, n in enumerate(sizes)]
    slope = float(np.polyfit(np.log(sizes), np.log(errs), 1)[0])
    details["stderr_slope"] = slope

    passed = (abs(z_s) <= MC_SIGMA_BAND and abs(z_v) <= MC_SIGMA_BAND
              and abs(slope + 0.5) <= SLOPE_TOLERANCE)
    return OracleCheck("bath_mc", passed, details)


def check_sensitivity_ratio(n_points: int = 40) -> OracleCheck:
    """Formula and error-propagation oracle differ by a constant factor.

    Evaluated on a log grid of total rates spanning 0.1 to 100 times the
    level splitting, excluding a +-RESONANCE_EXCLUSION*omega0 window around
    the splitting where both expressions blow up.  The ratio must stay
    within RATIO_SPREAD of its mean; the mean itself is reported, and is
    expected near sqrt(2 / (e * s(tau=T1))) from the noise model mismatch
    (the formula prices the shot noise of a bare exponential at depth 1/e,
    the oracle prices the full signal including its baseline).
    """
    template = SensitivityInputs(
        contrast=0.2, photon_rate=1.0e5, detection_window=500.0e-9,
        acquisition_time=10.0, b_perp_sq=1.0e-8, r_total=OMEGA_0 / 10.0)
    w = template.omega0
    grid = np.logspace(math.log10(0.1 * w), math.log10(100.0 * w), n_points)
    ratios = []
    excluded = 0
    for r in grid:
        if abs(r - w) < RESONANCE_EXCLUSION * w:
            excluded += 1
            continue
        inp = replace(template, r_total=float(r))
        ratios.append(delta_r_min(inp) / delta_r_oracle(inp))
    if len(ratios) < 2:
        raise ParameterError("rate grid left fewer than 2 usable points")

    mean = float(np.mean(ratios))
    max_dev = float(np.max(np.abs(np.array(ratios) / mean - 1.0)))
    depth = 1.0 - template.contrast + template.contrast / math.e
    expected = math.sqrt(2.0 / (math.e * depth))

    mid = replace(template, r_total=10.0 * w)
    h = 1e-3 * mid.r_total
    halving_shift = abs(delta_r_oracle(mid, h / 2.0) / delta_r_oracle(mid, h) - 1.0)

    details = {
        "points_used": len(ratios),
        "points_excluded": excluded,
        "mean_ratio": mean,
        "max_relative_deviation": max_dev,
        "expected_constant_offset": expected,
        "perturbation_halving_shift": halving_shift,
    }
    passed = max_dev <= RATIO_SPREAD and halving_shift < 0.005
    return OracleCheck("sensitivity_ratio", passed, details)


_CHECKS = {
    "quadrature": (check_lorentzian_quadrature,),
    "bath_mc": (check_bath_mc,),
    "sensitivity": (check_sensitivity_ratio,),
}


def run_oracles(which: str = "all") -> OracleReport:
    """Run one named check family, or all of them."""
    if which == "all":
        names = ("quadrature", "bath_mc", "sensitivity")
    elif which in _CHECKS:
        names = (which,)
    else:
        valid = ", ".join(sorted(_CHECKS) + ["all"])
        raise ParameterError(f"unknown oracle {which!r}; expected one of: {valid}")
    checks = tuple(fn() for name in names for fn in _CHECKS[name])
    return OracleReport(checks=checks)
