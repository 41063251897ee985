"""Longitudinal relaxation of a spin sensor coupled to fluctuating fields.

Each independent noise source is a transverse magnetic field with Lorentzian
spectral density, characterised by its mean-square transverse amplitude and a
single correlation time.  Sources add in rate:

    1/T1 = 1/T1_bulk + sum_k 3 gamma_k^2 <B_perp,k^2> tau_k / (1 + omega0^2 tau_k^2)

The prefactor 3 follows from the sensor's two near-degenerate transitions
sampling the transverse noise at the level splitting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .constants import (
    OMEGA_0,
    TAU_C_MAX,
    TAU_C_MIN,
    T1_BULK_DEFAULT,
    omega_to_ghz,
)
from .errors import ParameterError


@dataclass(frozen=True)
class AngularFrequency:
    """An angular frequency in rad/s.

    Exists so that the sensor splitting cannot be confused with motional
    fluctuation rates (plain 1/s floats) at interface boundaries.  Zero is
    allowed: spectral densities are evaluated at zero frequency in tests and
    in the zero-field limit.
    """

    rad_per_s: float

    def __post_init__(self):
        if not math.isfinite(self.rad_per_s) or self.rad_per_s < 0.0:
            raise ParameterError(
                f"angular frequency must be finite and >= 0, got {self.rad_per_s!r}"
            )

    @property
    def cyclic_ghz(self) -> float:
        return omega_to_ghz(self.rad_per_s)


def _as_omega(value) -> float:
    """Accept AngularFrequency or a raw rad/s float, returning rad/s."""
    if isinstance(value, AngularFrequency):
        return value.rad_per_s
    omega = float(value)
    if not math.isfinite(omega) or omega < 0.0:
        raise ParameterError(f"angular frequency must be finite and >= 0, got {value!r}")
    return omega


@dataclass(frozen=True)
class NoiseSource:
    """One independent Lorentzian magnetic-noise source.

    Parameters
    ----------
    gamma : float
        Gyromagnetic ratio of the fluctuating moments, rad/(s*T).  Sign is
        irrelevant (enters squared) but zero is rejected.
    b_perp_sq : float
        Mean-square transverse field at the sensor, T^2.  May be zero
        (source contributes nothing) but not negative.
    tau_c : float
        Correlation time of the fluctuations, s.  Equal to 1/R where R is
        the source's total fluctuation rate.
    label : str
        Free-form tag used in rate breakdowns.
    """

    gamma: float
    b_perp_sq: float
    tau_c: float
    label: str = ""

    def __post_init__(self):
        if not math.isfinite(self.gamma) or self.gamma == 0.0:
            raise ParameterError(f"gamma must be finite and nonzero, got {self.gamma!r}")
        if not math.isfinite(self.b_perp_sq) or self.b_perp_sq < 0.0:
            raise ParameterError(f"b_perp_sq must be finite and >= 0, got {self.b_perp_sq!r}")
        if not (TAU_C_MIN <= self.tau_c <= TAU_C_MAX):
            raise ParameterError(
                f"tau_c must lie in [{TAU_C_MIN:g}, {TAU_C_MAX:g}] s, got {self.tau_c!r}"
            )

    @property
    def rate(self) -> float:
        """Fluctuation rate 1/tau_c in 1/s."""
        return 1.0 / self.tau_c

    def with_rate(self, rate: float) -> "NoiseSource":
        """Copy of this source with tau_c = 1/rate."""
        if not math.isfinite(rate) or rate <= 0.0:
            raise ParameterError(f"rate must be finite and positive, got {rate!r}")
        return NoiseSource(self.gamma, self.b_perp_sq, 1.0 / rate, self.label)


def lorentzian_psd(source: NoiseSource, omega) -> float:
    """One-sided spectral density S(omega) of an exponentially correlated field.

        S(omega) = b_perp_sq * 2 tau_c / (1 + omega^2 tau_c^2)

    Even in omega, maximal at omega = 0, and normalised so that
    integral S(omega) d omega / (2 pi) over the real line = b_perp_sq.
    Units: T^2 * s.
    """
    w = _as_omega(omega)
    x = w * source.tau_c
    return source.b_perp_sq * 2.0 * source.tau_c / (1.0 + x * x)


def rate_contribution(source: NoiseSource, omega0=OMEGA_0) -> float:
    """Relaxation rate (1/s) induced by a single noise source.

    Equals (3/2) gamma^2 S(omega0); non-negative.
    """
    return 1.5 * source.gamma**2 * lorentzian_psd(source, omega0)


@dataclass(frozen=True)
class RelaxationResult:
    """Total T1 with its additive decomposition.

    per_source_rates maps source label to its rate contribution in 1/s and
    excludes the bulk term, so rate_total = rate_bulk + sum of the values.
    """

    t1: float
    rate_total: float
    rate_bulk: float
    per_source_rates: dict = field(default_factory=dict)

    def dominant_source(self) -> str:
        """Label of the largest contribution, "bulk" if bulk dominates."""
        best = max(self.per_source_rates, key=self.per_source_rates.get, default=None)
        if best is None or self.per_source_rates[best] < self.rate_bulk:
            return "bulk"
        return best


def t1_total(sources, t1_bulk: float = T1_BULK_DEFAULT, omega0=OMEGA_0) -> RelaxationResult:
    """Combine bulk relaxation with any number of noise sources.

    An empty source list is valid and returns t1 = t1_bulk.  Duplicate
    labels are rejected: silently merging them would hide a double-counted
    source.  Unlabeled sources are keyed by position.
    """
    if not math.isfinite(t1_bulk) or t1_bulk <= 0.0:
        raise ParameterError(f"t1_bulk must be finite and positive, got {t1_bulk!r}")
    w = _as_omega(omega0)
    rates = {}
    for i, src in enumerate(sources):
        key = src.label or f"source_{i}"
        if key == "bulk" or key in rates:
            raise ParameterError(f"duplicate or reserved noise-source label {key!r}")
        rates[key] = rate_contribution(src, w)
    bulk = 1.0 / t1_bulk
    total = bulk + sum(rates.values())
    return RelaxationResult(t1=1.0 / total, rate_total=total, rate_bulk=bulk,
                            per_source_rates=rates)


def motional_narrowing_curve(source_template: NoiseSource, omega0, rate_grid):
    """Rate contribution versus fluctuation rate at fixed field variance.

    For each R in the grid the template's correlation time is replaced by
    1/R.  Returns a list of (rate, contribution) pairs.  The curve has a
    single maximum at R = omega0: both the fast- and slow-fluctuation limits
    decouple the sensor from the noise.

    The grid must be sorted ascending and strictly positive.
    """
    w = _as_omega(omega0)
    grid = [float(r) for r in rate_grid]
    if any(r <= 0.0 or not math.isfinite(r) for r in grid):
        raise ParameterError("rate grid must be finite and positive")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ParameterError("rate grid must be sorted ascending")
    return [(r, rate_contribution(source_template.with_rate(r), w)) for r in grid]
