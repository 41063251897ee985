"""One complete physical and measurement configuration.

A Scenario bundles the particle, both magnetic baths, the solvent, the
tracked molecule, and the acquisition settings, and composes the forward
prediction: bath fields -> fluctuation rates -> noise sources -> T1.  It
also owns the INI-style config format (strict schema, unknown keys are
errors) and its canonical serialization used for run hashing.

The calibrated constants below were derived once (see calibration.py) and
are frozen here so that importing the package never re-runs root searches:

* MOLECULE_RADIUS_CAL: hydrodynamic radius of the magnetic molecule; root
  of rbm_rate(a) = 14.2 GHz in pure acetone at 298 K.
* SURFACE_DENSITY_CAL: areal surface-spin density; closed-form inversion
  of a bare 25 nm particle relaxing at T1 = 130 us against a 3 ms bulk
  background, with the surface fluctuation rate at the response maximum
  (SURFACE_RATE_CAL = omega0 in rate units).
* VIBRATION_RATE_CAL and KAPPA_DIP_CAL: vibrational offset and dipolar
  rate-per-density coefficient of the molecular bath, pinned so the
  minimal-detectable-rate curve of a 20 nm particle bottoms out at
  6.9 GHz with a total rate of 60.2 GHz.
* OPTIMAL_DENSITY_CAL: the density at that optimum; default grid center
  for density sweeps.

Regression tests re-derive each value through calibration.py.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import math
from dataclasses import dataclass, fields, replace
from decimal import Decimal, InvalidOperation
from functools import lru_cache
from pathlib import Path

from .bath import (
    ParticleGeometry,
    SurfaceBath,
    VolumeBath,
    b_perp_sq_surface,
    b_perp_sq_volume,
)
from .constants import GAMMA_E, TAU_C_MAX, TAU_C_MIN
from .core_relax import NoiseSource, RelaxationResult, t1_total
from .errors import ConfigError, ParameterError
from .hydro import (
    A_S_ACETONE_DEFAULT,
    A_S_WATER_DEFAULT,
    HydroParams,
    RateBreakdown,
    SolventMixture,
    default_table_path,
    hydro_params_at,
    load_viscosity_table,
    microviscosity_factor,
    rbm_rate,
    total_rate,
    translational_rate,
)
from .measure_sim import MeasurementPlan, default_dark_times
from .sensitivity import (
    SensitivityCurve,
    SensitivityInputs,
    default_density_grid,
    optimize_density,
)

MOLECULE_RADIUS_CAL = 4.96071985972771303e-10   # m
SURFACE_DENSITY_CAL = 1.60756319173900774e+18   # 1/m^2 (1.61 /nm^2)
SURFACE_RATE_CAL = 18.0e9                       # 1/s
VIBRATION_RATE_CAL = 2.85289116413692436e+10    # 1/s
KAPPA_DIP_CAL = 4.13478003922003705e-16         # (1/s) per (1/m^3)
OPTIMAL_DENSITY_CAL = 6.89475863191954133e+25   # 1/m^3

# 1 millimolar of molecules in SI number density.
PER_M3_PER_MM = 6.02214076e23


@dataclass(frozen=True)
class Scenario:
    """Full configuration with calibrated defaults (bare 25 nm particle in
    water; add a molecular bath by setting gd_density)."""

    # particle
    diameter: float = 25e-9
    sensor_offset: float = 0.0
    # surface bath
    surface_density: float = SURFACE_DENSITY_CAL
    surface_rate: float = SURFACE_RATE_CAL
    surface_spin: float = 0.5
    surface_gamma: float = GAMMA_E
    # molecular bath
    gd_density: float = 0.0
    gd_spin: float = 3.5
    gd_gamma: float = GAMMA_E
    standoff: float = 0.0
    vibration_rate: float = VIBRATION_RATE_CAL
    kappa_dip: float = KAPPA_DIP_CAL
    # solvent and molecule
    x_water: float = 1.0
    viscosity_table: str = ""       # "" = table shipped with the package
    a_s_water: float = A_S_WATER_DEFAULT
    a_s_other: float = A_S_ACETONE_DEFAULT
    molecule_radius: float = MOLECULE_RADIUS_CAL
    # environment
    temperature: float = 298.0
    t1_bulk: float = 3e-3
    # measurement
    shots_per_point: int = 200_000
    detection_window: float = 500e-9
    photon_rate: float = 1e5
    contrast: float = 0.2
    include_reference: bool = True
    n_dark_times: int = 12
    tau_min: float = 1e-6
    tau_span_factor: float = 5.0
    acquisition_time: float = 10.0
    # spot-to-spot jitter (relative log-normal spreads, demo-grade)
    density_jitter: float = 0.0
    diameter_jitter: float = 0.0
    # reproducibility
    seed: int = 12345

    def __post_init__(self):
        # constituent types carry most invariants; build probes eagerly so
        # a bad scenario fails at construction, not first use
        self.geometry()
        self.surface_source_bath()
        self.molecular_bath()
        if not (TAU_C_MIN <= 1.0 / self.surface_rate <= TAU_C_MAX):
            raise ParameterError(f"surface_rate {self.surface_rate!r} out of range")
        for name in ("vibration_rate", "kappa_dip", "density_jitter", "diameter_jitter"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0.0):
                raise ParameterError(f"{name} must be finite and >= 0, got {v!r}")
        for name in ("molecule_radius", "temperature", "t1_bulk", "detection_window",
                     "photon_rate", "tau_min", "tau_span_factor", "acquisition_time"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise ParameterError(f"{name} must be positive, got {v!r}")
        if not (0.0 <= self.x_water <= 1.0):
            raise ParameterError(f"x_water must lie in [0, 1], got {self.x_water!r}")
        if self.a_s_water < 0.0 or self.a_s_other < 0.0:
            raise ParameterError("solvent radii must be >= 0")
        if not (0.0 < self.contrast < 1.0):
            raise ParameterError(f"contrast must lie in (0, 1), got {self.contrast!r}")
        if self.shots_per_point < 1:
            raise ParameterError("shots_per_point must be >= 1")
        if self.n_dark_times < 4:
            raise ParameterError("n_dark_times must be >= 4")
        if self.seed < 0:
            raise ParameterError("seed must be a non-negative integer")

    # constituent builders

    def geometry(self, diameter: float | None = None) -> ParticleGeometry:
        return ParticleGeometry(
            diameter=self.diameter if diameter is None else diameter,
            sensor_depth_offset=self.sensor_offset)

    def surface_source_bath(self, areal_density: float | None = None) -> SurfaceBath:
        return SurfaceBath(
            areal_density=self.surface_density if areal_density is None else areal_density,
            spin_quantum_number=self.surface_spin, gamma=self.surface_gamma)

    def molecular_bath(self, number_density: float | None = None) -> VolumeBath:
        return VolumeBath(
            number_density=self.gd_density if number_density is None else number_density,
            spin_quantum_number=self.gd_spin, gamma=self.gd_gamma,
            standoff=self.standoff)

    def mixture(self) -> SolventMixture:
        return SolventMixture(x_water=self.x_water, viscosity_table=self._table(),
                              a_s_water=self.a_s_water, a_s_other=self.a_s_other)

    def _table(self) -> tuple:
        path = self.viscosity_table or str(default_table_path())
        return _cached_table(path)

    def hydro_at(self, x: float | None = None) -> HydroParams:
        return hydro_params_at(self.mixture(), self.molecule_radius,
                               self.temperature, x=x)

    # forward model

    def gd_rate_breakdown(self, number_density: float | None = None,
                          x: float | None = None,
                          diameter: float | None = None) -> RateBreakdown:
        """Fluctuation-rate components of the molecular bath.

        The translational decorrelation length is the closest sensor-molecule
        distance, particle radius plus standoff.
        """
        n = self.gd_density if number_density is None else number_density
        p = self.hydro_at(x)
        r_min = self.geometry(diameter).radius + self.standoff
        return total_rate(r_dip=self.kappa_dip * n, r_vib=self.vibration_rate,
                          r_trans=translational_rate(p, r_min), r_rot=rbm_rate(p))


@dataclass(frozen=True)
class ScenarioPrediction:
    """Forward prediction for one parameter point."""

    relaxation: RelaxationResult
    gd_rates: RateBreakdown
    b2_surface: float
    b2_molecular: float
    viscosity: float
    microviscosity: float
    x_water: float
    diameter: float
    gd_density: float
    surface_density: float

    @property
    def t1(self) -> float:
        return self.relaxation.t1

    def as_dict(self) -> dict:
        return {
            "t1_s": self.relaxation.t1,
            "rate_total_per_s": self.relaxation.rate_total,
            "rate_bulk_per_s": self.relaxation.rate_bulk,
            "per_source_rates_per_s": dict(self.relaxation.per_source_rates),
            "gd_rates_per_s": self.gd_rates.as_dict(),
            "b_perp_sq_surface_t2": self.b2_surface,
            "b_perp_sq_molecular_t2": self.b2_molecular,
            "viscosity_pa_s": self.viscosity,
            "microviscosity_factor": self.microviscosity,
            "x_water": self.x_water,
            "diameter_m": self.diameter,
            "gd_density_per_m3": self.gd_density,
            "surface_density_per_m2": self.surface_density,
        }


def predict(sc: Scenario, *, gd_density: float | None = None,
            x_water: float | None = None, diameter: float | None = None,
            surface_density: float | None = None) -> ScenarioPrediction:
    """Predict T1 and every intermediate quantity for a scenario.

    Keyword overrides evaluate nearby parameter points without rebuilding
    the scenario; they are how sweeps and spot jitter are implemented.
    """
    n = sc.gd_density if gd_density is None else gd_density
    x = sc.x_water if x_water is None else x_water
    d = sc.diameter if diameter is None else diameter
    sigma = sc.surface_density if surface_density is None else surface_density

    geom = sc.geometry(d)
    b2_surf = b_perp_sq_surface(geom, sc.surface_source_bath(sigma))
    b2_mol = b_perp_sq_volume(geom, sc.molecular_bath(n))
    rates = sc.gd_rate_breakdown(n, x=x, diameter=d)

    sources = [NoiseSource(gamma=sc.surface_gamma, b_perp_sq=b2_surf,
                           tau_c=1.0 / sc.surface_rate, label="surface")]
    if b2_mol > 0.0:
        sources.append(NoiseSource(gamma=sc.gd_gamma, b_perp_sq=b2_mol,
                                   tau_c=1.0 / rates.r_total, label="molecular"))
    relax = t1_total(sources, t1_bulk=sc.t1_bulk)

    p = sc.hydro_at(x)
    return ScenarioPrediction(
        relaxation=relax, gd_rates=rates, b2_surface=b2_surf, b2_molecular=b2_mol,
        viscosity=p.eta, microviscosity=microviscosity_factor(p.a, p.a_s),
        x_water=x, diameter=d, gd_density=n, surface_density=sigma)


def measurement_plan(sc: Scenario, t1_expected: float) -> MeasurementPlan:
    """Acquisition plan with the default log-spaced tau grid."""
    return MeasurementPlan(
        dark_times=default_dark_times(t1_expected, n_points=sc.n_dark_times,
                                      tau_min=sc.tau_min,
                                      span_factor=sc.tau_span_factor),
        shots_per_point=sc.shots_per_point,
        detection_window=sc.detection_window, photon_rate=sc.photon_rate,
        contrast=sc.contrast, include_reference=sc.include_reference)


def t1_sampler(sc: Scenario):
    """Per-spot T1 sampler with log-normal density and size jitter.

    Each call draws, in fixed order, a diameter factor, a molecular-density
    factor, and a surface-density factor (median-preserving log-normals with
    the configured relative spreads), then runs the full forward model.  The
    draw order is fixed even at zero jitter so stream layouts stay
    comparable across configurations.
    """

    def sample(rng) -> float:
        d = sc.diameter * math.exp(rng.normal(0.0, sc.diameter_jitter))
        n = sc.gd_density * math.exp(rng.normal(0.0, sc.density_jitter))
        sigma = sc.surface_density * math.exp(rng.normal(0.0, sc.density_jitter))
        return predict(sc, gd_density=n, diameter=d, surface_density=sigma).t1

    return sample


def sensitivity_template(sc: Scenario, number_density: float | None = None) -> SensitivityInputs:
    """SensitivityInputs at the given molecular-bath density."""
    n = number_density if number_density is not None else (
        sc.gd_density if sc.gd_density > 0.0 else OPTIMAL_DENSITY_CAL)
    geom = sc.geometry()
    return SensitivityInputs(
        contrast=sc.contrast, photon_rate=sc.photon_rate,
        detection_window=sc.detection_window, acquisition_time=sc.acquisition_time,
        b_perp_sq=b_perp_sq_volume(geom, sc.molecular_bath(n)),
        r_total=sc.gd_rate_breakdown(n).r_total)


def density_sensitivity_curve(sc: Scenario, grid=None) -> SensitivityCurve:
    """Minimal detectable rate versus molecular-bath density."""
    center = sc.gd_density if sc.gd_density > 0.0 else OPTIMAL_DENSITY_CAL
    if grid is None:
        grid = default_density_grid(center)
    geom = sc.geometry()
    return optimize_density(
        grid,
        b2_fn=lambda n: b_perp_sq_volume(geom, sc.molecular_bath(n)),
        r_fn=lambda n: sc.gd_rate_breakdown(n).r_total,
        template=sensitivity_template(sc, center))


def inverse_t1_predictor(sc: Scenario):
    """Callable n -> predicted 1/T1; the fixed-scenario closure used when
    fitting an effective density scale to measured data."""

    def predict_rate(n: float) -> float:
        return predict(sc, gd_density=n).relaxation.rate_total

    return predict_rate


@lru_cache(maxsize=32)
def _cached_table(path: str) -> tuple:
    return load_viscosity_table(path)


# config format: INI sections with strict schema; every key optional,
# unknown sections/keys rejected.  Conversions are (text -> SI, SI -> text).
# All unit scales are powers of ten, applied as exact decimal exponent
# shifts, so parse and serialize are exact inverses bit for bit.

def _decimal_text(d: Decimal) -> str:
    # prettify without changing the value: plain notation for moderate
    # magnitudes, scientific otherwise, trailing zeros stripped
    if d == 0:
        return "0"
    n = d.normalize()
    _, digits, exp = n.as_tuple()
    adjusted = exp + len(digits) - 1
    if -4 <= adjusted <= 16:
        return format(n, "f")
    return format(n, "e")


def _scaled(k: int):
    def to_si(s: str) -> float:
        try:
            return float(Decimal(s).scaleb(k))
        except InvalidOperation:
            # Decimal signals syntax errors as ArithmeticError; config
            # parsing needs the ValueError family
            raise ValueError(f"not a number: {s!r}") from None

    def to_text(v: float) -> str:
        return _decimal_text(Decimal(repr(float(v))).scaleb(-k))

    return to_si, to_text


_FLOAT = _scaled(0)
_INT = (int, str)
_NM = _scaled(-9)
_NS = _scaled(-9)
_US = _scaled(-6)
_MS = _scaled(-3)
_GHZ = _scaled(9)
_PER_NM2 = _scaled(18)


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("true", "yes", "on", "1"):
        return True
    if v in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


_BOOL = (_parse_bool, lambda v: "true" if v else "false")
_STR = (lambda s: s.strip(), str)

# (section, key) -> (scenario attribute, parse, format)
_SCHEMA = {
    ("particle", "diameter_nm"): ("diameter", *_NM),
    ("particle", "sensor_offset_nm"): ("sensor_offset", *_NM),
    ("surface_bath", "areal_density_per_nm2"): ("surface_density", *_PER_NM2),
    ("surface_bath", "fluctuation_rate_ghz"): ("surface_rate", *_GHZ),
    ("surface_bath", "spin"): ("surface_spin", *_FLOAT),
    ("surface_bath", "gamma_rad_per_s_per_t"): ("surface_gamma", *_FLOAT),
    ("molecular_bath", "density_per_m3"): ("gd_density", *_FLOAT),
    ("molecular_bath", "spin"): ("gd_spin", *_FLOAT),
    ("molecular_bath", "gamma_rad_per_s_per_t"): ("gd_gamma", *_FLOAT),
    ("molecular_bath", "standoff_nm"): ("standoff", *_NM),
    ("molecular_bath", "vibration_rate_ghz"): ("vibration_rate", *_GHZ),
    ("molecular_bath", "dipolar_coefficient_m3_per_s"): ("kappa_dip", *_FLOAT),
    ("solvent", "x_water"): ("x_water", *_FLOAT),
    ("solvent", "table_path"): ("viscosity_table", *_STR),
    ("solvent", "a_s_water_nm"): ("a_s_water", *_NM),
    ("solvent", "a_s_other_nm"): ("a_s_other", *_NM),
    ("molecule", "radius_nm"): ("molecule_radius", *_NM),
    ("environment", "temperature_k"): ("temperature", *_FLOAT),
    ("environment", "t1_bulk_ms"): ("t1_bulk", *_MS),
    ("measurement", "shots_per_point"): ("shots_per_point", *_INT),
    ("measurement", "detection_window_ns"): ("detection_window", *_NS),
    ("measurement", "photon_rate_per_s"): ("photon_rate", *_FLOAT),
    ("measurement", "contrast"): ("contrast", *_FLOAT),
    ("measurement", "include_reference"): ("include_reference", *_BOOL),
    ("measurement", "n_dark_times"): ("n_dark_times", *_INT),
    ("measurement", "tau_min_us"): ("tau_min", *_US),
    ("measurement", "tau_span_factor"): ("tau_span_factor", *_FLOAT),
    ("measurement", "acquisition_time_s"): ("acquisition_time", *_FLOAT),
    ("spots", "density_jitter"): ("density_jitter", *_FLOAT),
    ("spots", "diameter_jitter"): ("diameter_jitter", *_FLOAT),
    ("random", "seed"): ("seed", *_INT),
}

_VALID_FIELDS = {f.name for f in fields(Scenario)}
assert all(attr in _VALID_FIELDS for attr, _, _ in _SCHEMA.values())


def _new_parser() -> configparser.ConfigParser:
    return configparser.ConfigParser(interpolation=None, strict=True,
                                     inline_comment_prefixes=("#",))


def parse_config(path) -> Scenario:
    """Load a scenario config file.

    Unknown sections or keys, duplicate keys, unparsable values, and missing
    referenced files are all rejected with the offending location named.
    Relative table paths resolve against the config file's directory.
    """
    path = Path(path)
    parser = _new_parser()
    try:
        with path.open() as fh:
            parser.read_file(fh, source=str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    kwargs = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            try:
                attr, to_si, _ = _SCHEMA[(section, key)]
            except KeyError:
                known = sorted(k for s, k in _SCHEMA if s == section)
                if known:
                    raise ConfigError(
                        f"{path}: unknown key [{section}] {key}; "
                        f"valid keys: {', '.join(known)}") from None
                raise ConfigError(f"{path}: unknown section [{section}]") from None
            try:
                kwargs[attr] = to_si(raw)
            except ValueError as exc:
                raise ConfigError(f"{path}: bad value for [{section}] {key}: {exc}") from exc

    table = kwargs.get("viscosity_table", "")
    if table:
        resolved = Path(table)
        if not resolved.is_absolute():
            resolved = path.parent / resolved
        if not resolved.is_file():
            raise ConfigError(f"{path}: [solvent] table_path does not exist: {resolved}")
        kwargs["viscosity_table"] = str(resolved.resolve())
    return Scenario(**kwargs)


def serialize_scenario(sc: Scenario) -> str:
    """Canonical INI text: every key explicit, sections and keys sorted.

    Two semantically identical scenarios serialize to identical text, which
    is what makes the config hash stable under key reordering.
    """
    by_section: dict = {}
    for (section, key), (attr, _, to_text) in _SCHEMA.items():
        by_section.setdefault(section, {})[key] = to_text(getattr(sc, attr))
    out = io.StringIO()
    for section in sorted(by_section):
        out.write(f"[{section}]\n")
        for key in sorted(by_section[section]):
            out.write(f"{key} = {by_section[section][key]}\n")
        out.write("\n")
    return out.getvalue()


def scenario_from_text(text: str) -> Scenario:
    """Parse config text that references no external files (tests, round trips)."""
    parser = _new_parser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    kwargs = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            if (section, key) not in _SCHEMA:
                raise ConfigError(f"unknown key [{section}] {key}")
            attr, to_si, _ = _SCHEMA[(section, key)]
            kwargs[attr] = to_si(raw)
    return Scenario(**kwargs)


def config_hash(sc: Scenario) -> str:
    """SHA-256 of the canonical serialization."""
    return hashlib.sha256(serialize_scenario(sc).encode("utf-8")).hexdigest()


def with_seed(sc: Scenario, seed: int | None) -> Scenario:
    return sc if seed is None else replace(sc, seed=seed)
