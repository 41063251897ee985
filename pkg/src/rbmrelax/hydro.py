"""Hydrodynamic fluctuation rates: rotational Brownian motion of a tracked
molecule, translational diffusion, and the composition of the total
fluctuation rate from its four components (dipolar, vibrational,
translational, rotational).

Rotational rates follow Stokes-Einstein-Debye with a microviscosity
correction for solvent molecules of finite size; solvent-mixture viscosity
comes from a shipped reference table with monotone cubic interpolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

from scipy.interpolate import PchipInterpolator

from .constants import K_B
from .errors import ConfigError, ParameterError


@dataclass(frozen=True)
class HydroParams:
    """Hydrodynamic inputs for one molecule in one solvent.

    a: hydrodynamic radius of the tracked molecule (m); a_s: effective
    solvent molecule radius (m, 0 recovers the continuum limit); eta:
    dynamic viscosity (Pa*s); temperature in K.
    """

    a: float
    a_s: float
    eta: float
    temperature: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and self.a > 0.0):
            raise ParameterError(f"molecule radius must be positive, got {self.a!r}")
        if not (math.isfinite(self.a_s) and self.a_s >= 0.0):
            raise ParameterError(f"solvent radius must be >= 0, got {self.a_s!r}")
        if not (math.isfinite(self.eta) and self.eta > 0.0):
            raise ParameterError(f"viscosity must be positive, got {self.eta!r}")
        if not (math.isfinite(self.temperature) and self.temperature > 0.0):
            raise ParameterError(f"temperature must be positive, got {self.temperature!r}")


@dataclass(frozen=True)
class SolventMixture:
    """Binary water/cosolvent mixture with a tabulated viscosity curve.

    x_water is the nominal composition of this mixture; the viscosity table
    is a tuple of (mole fraction water, viscosity Pa*s) rows at the
    reference temperature, sorted ascending and covering [0, 1].
    """

    x_water: float
    viscosity_table: tuple
    a_s_water: float
    a_s_other: float

    def __post_init__(self):
        if not (0.0 <= self.x_water <= 1.0):
            raise ParameterError(f"x_water must lie in [0, 1], got {self.x_water!r}")
        if self.a_s_water < 0.0 or self.a_s_other < 0.0:
            raise ParameterError("solvent radii must be >= 0")
        table = tuple((float(x), float(eta)) for x, eta in self.viscosity_table)
        if len(table) < 2:
            raise ParameterError("viscosity table needs at least 2 rows")
        xs = [row[0] for row in table]
        if xs != sorted(xs) or len(set(xs)) != len(xs):
            raise ParameterError("viscosity table must be strictly sorted by mole fraction")
        if xs[0] != 0.0 or xs[-1] != 1.0:
            raise ParameterError("viscosity table must cover mole fractions [0, 1]")
        if any(eta <= 0.0 for _, eta in table):
            raise ParameterError("viscosities must be positive")
        object.__setattr__(self, "viscosity_table", table)


@dataclass(frozen=True)
class RateBreakdown:
    """The four fluctuation-rate components and their sum, all in 1/s."""

    r_dip: float
    r_vib: float
    r_trans: float
    r_rot: float
    r_total: float

    def as_dict(self) -> dict:
        return {"dip": self.r_dip, "vib": self.r_vib, "trans": self.r_trans,
                "rot": self.r_rot, "total": self.r_total}


def microviscosity_factor(a: float, a_s: float) -> float:
    """Finite-solvent-size correction to continuum rotational friction.

    f_r = [6 u + (1 + 3u/(1+2u)) / (1+2u)^3]^-1  with u = a_s/a.

    Always in (0, 1]; equals 1 in the continuum limit a_s = 0 and decreases
    monotonically as the solvent molecules grow relative to the solute.
    """
    if not (math.isfinite(a) and a > 0.0):
        raise ParameterError(f"molecule radius must be positive, got {a!r}")
    if not (math.isfinite(a_s) and a_s >= 0.0):
        raise ParameterError(f"solvent radius must be >= 0, got {a_s!r}")
    u = a_s / a
    one_plus_2u = 1.0 + 2.0 * u
    bracket = 6.0 * u + (1.0 + 3.0 * u / one_plus_2u) / one_plus_2u**3
    return 1.0 / bracket


def rbm_rate(p: HydroParams) -> float:
    """Rotational Brownian fluctuation rate, 1/s.

    R_rot = k_B T / (8 pi a^3 eta f_r); strictly decreasing in both a and
    eta.  This is the inverse rotational correlation time of the molecule.
    """
    f_r = microviscosity_factor(p.a, p.a_s)
    return K_B * p.temperature / (8.0 * math.pi * p.a**3 * p.eta * f_r)


def translational_diffusivity(p: HydroParams) -> float:
    """Stokes-Einstein translational diffusion coefficient, m^2/s."""
    return K_B * p.temperature / (6.0 * math.pi * p.eta * p.a)


def translational_rate(p: HydroParams, length_scale: float) -> float:
    """Rate at which diffusion decorrelates the coupling, D_t / L^2 in 1/s.

    The length scale is the distance over which a molecule must move for
    its dipolar coupling to the sensor to change appreciably; the particle
    radius is the natural choice.
    """
    if not (math.isfinite(length_scale) and length_scale > 0.0):
        raise ParameterError(f"length scale must be positive, got {length_scale!r}")
    return translational_diffusivity(p) / length_scale**2


@lru_cache(maxsize=8)
def _interpolator(table: tuple) -> PchipInterpolator:
    xs = [row[0] for row in table]
    etas = [row[1] for row in table]
    return PchipInterpolator(xs, etas)


def mixture_viscosity(m: SolventMixture, x: float) -> float:
    """Viscosity of the mixture at water mole fraction x, Pa*s.

    Monotone cubic interpolation through the table: exact at the nodes and
    free of the over/undershoot a plain cubic spline would produce around
    the interior viscosity maximum.
    """
    if not (0.0 <= x <= 1.0):
        raise ParameterError(f"mole fraction must lie in [0, 1], got {x!r}")
    return float(_interpolator(m.viscosity_table)(x))


def effective_solvent_radius(m: SolventMixture, x: float) -> float:
    """Mole-fraction-weighted effective solvent radius, m."""
    if not (0.0 <= x <= 1.0):
        raise ParameterError(f"mole fraction must lie in [0, 1], got {x!r}")
    return x * m.a_s_water + (1.0 - x) * m.a_s_other


def hydro_params_at(m: SolventMixture, a: float, temperature: float,
                    x: float | None = None) -> HydroParams:
    """HydroParams for the mixture evaluated at composition x.

    Defaults to the mixture's own x_water.
    """
    if x is None:
        x = m.x_water
    return HydroParams(a=a, a_s=effective_solvent_radius(m, x),
                       eta=mixture_viscosity(m, x), temperature=temperature)


def total_rate(r_dip: float, r_vib: float, r_trans: float, r_rot: float) -> RateBreakdown:
    """Compose the total fluctuation rate from its four components."""
    parts = {"r_dip": r_dip, "r_vib": r_vib, "r_trans": r_trans, "r_rot": r_rot}
    for name, value in parts.items():
        if not (math.isfinite(value) and value >= 0.0):
            raise ParameterError(f"{name} must be finite and >= 0, got {value!r}")
    return RateBreakdown(r_dip=r_dip, r_vib=r_vib, r_trans=r_trans, r_rot=r_rot,
                         r_total=r_dip + r_vib + r_trans + r_rot)


def load_viscosity_table(path) -> tuple:
    """Load a solvent viscosity table from a delimited text file.

    Expected format: one header line, then rows of
    ``mole_fraction viscosity_mPa_s`` separated by whitespace or commas.
    Viscosities are converted to Pa*s.  The table must be sorted ascending
    and cover mole fractions 0 through 1.
    """
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read viscosity table {path}: {exc}") from exc
    rows = []
    seen_header = False
    for lineno, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if not seen_header:
            seen_header = True  # first non-blank line is the column header
            continue
        fields = text.replace(",", " ").split()
        if len(fields) != 2:
            raise ConfigError(f"{path}:{lineno}: expected 2 columns, got {len(fields)}")
        try:
            x, eta_mpa_s = float(fields[0]), float(fields[1])
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: non-numeric row: {text!r}") from exc
        rows.append((x, eta_mpa_s * 1e-3))
    if not rows:
        raise ConfigError(f"{path}: no data rows found")
    xs = [r[0] for r in rows]
    if xs != sorted(xs):
        raise ConfigError(f"{path}: rows must be sorted by mole fraction")
    if xs[0] != 0.0 or xs[-1] != 1.0:
        raise ConfigError(f"{path}: table must cover mole fractions [0, 1]")
    return tuple(rows)


def default_table_path() -> Path:
    """Path of the water/acetone viscosity table shipped with the package."""
    return Path(resources.files("rbmrelax").joinpath(
        "data/water_acetone_viscosity_298K.txt"))


# Literature-typical effective molecular radii, m.  Configurable per scenario.
A_S_WATER_DEFAULT = 0.14e-9
A_S_ACETONE_DEFAULT = 0.25e-9


def reference_mixture(x_water: float = 1.0) -> SolventMixture:
    """Water/acetone mixture backed by the shipped viscosity table."""
    return SolventMixture(x_water=x_water,
                          viscosity_table=load_viscosity_table(default_table_path()),
                          a_s_water=A_S_WATER_DEFAULT, a_s_other=A_S_ACETONE_DEFAULT)
