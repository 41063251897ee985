"""Mean-square transverse dipolar fields at a sensor inside a nanoparticle.

Two bath geometries are supported: spins spread over the particle surface
with an areal density, and molecules filling the exterior volume with a
number density.  Closed forms exist for a sensor at the particle center;
a Monte Carlo dipolar sum validates them and covers off-center sensors.

The closed forms rest on two geometric constants that the Monte Carlo
oracle checks rather than assumes:

* the orientation-averaged squared dipolar field of one moment mu at
  distance r is 2 * (mu0/4pi)^2 mu^2 / r^6;
* a sensor whose axis is random with respect to the bath sees 2/3 of that
  variance transverse to its axis.

Their product is the factor 4/3 in the amplitude constants below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .constants import GAMMA_E, HBAR, MU0_OVER_4PI, OMEGA_0
from .core_relax import NoiseSource, rate_contribution
from .errors import FitError, NoSolutionError, ParameterError

# Orientation-averaged variance factor of a single dipole (see module
# docstring) and the transverse fraction for a randomly oriented sensor.
ISOTROPIC_VARIANCE_FACTOR = 2.0
TRANSVERSE_FRACTION = 2.0 / 3.0
_GEOM = ISOTROPIC_VARIANCE_FACTOR * TRANSVERSE_FRACTION  # 4/3

# Monte Carlo defaults
MIN_MC_SAMPLES = 10_000
DEFAULT_CUTOFF_FACTOR = 20.0
_CHUNK = 250_000


def _check_spin(s: float) -> float:
    if not math.isfinite(s) or s <= 0.0 or abs(2.0 * s - round(2.0 * s)) > 1e-9:
        raise ParameterError(f"spin quantum number must be a positive half-integer, got {s!r}")
    return s


def moment_sq(spin: float, gamma: float) -> float:
    """Squared magnitude gamma^2 hbar^2 S(S+1) of a fluctuating moment, (J/T)^2."""
    s = _check_spin(spin)
    return gamma**2 * HBAR**2 * s * (s + 1.0)


@dataclass(frozen=True)
class ParticleGeometry:
    """Spherical particle hosting the sensor.

    sensor_depth_offset displaces the sensor from the center along a fixed
    axis; 0 means exactly centered.
    """

    diameter: float
    sensor_depth_offset: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.diameter) and self.diameter > 0.0):
            raise ParameterError(f"diameter must be positive, got {self.diameter!r}")
        if abs(self.sensor_depth_offset) >= self.diameter / 2.0:
            raise ParameterError("sensor offset must stay inside the particle")

    @property
    def radius(self) -> float:
        return self.diameter / 2.0


@dataclass(frozen=True)
class SurfaceBath:
    """Unpaired spins spread uniformly over the particle surface."""

    areal_density: float        # 1/m^2
    spin_quantum_number: float = 0.5
    gamma: float = GAMMA_E

    def __post_init__(self):
        if not (math.isfinite(self.areal_density) and self.areal_density >= 0.0):
            raise ParameterError(f"areal density must be >= 0, got {self.areal_density!r}")
        _check_spin(self.spin_quantum_number)
        if self.gamma == 0.0 or not math.isfinite(self.gamma):
            raise ParameterError("gamma must be finite and nonzero")


@dataclass(frozen=True)
class VolumeBath:
    """Magnetic molecules filling the solvent outside the particle.

    standoff is the closest-approach distance beyond the particle radius
    (0 means molecules reach the surface).
    """

    number_density: float       # 1/m^3
    spin_quantum_number: float = 3.5
    gamma: float = GAMMA_E
    standoff: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.number_density) and self.number_density >= 0.0):
            raise ParameterError(f"number density must be >= 0, got {self.number_density!r}")
        _check_spin(self.spin_quantum_number)
        if self.gamma == 0.0 or not math.isfinite(self.gamma):
            raise ParameterError("gamma must be finite and nonzero")
        if not (math.isfinite(self.standoff) and self.standoff >= 0.0):
            raise ParameterError(f"standoff must be >= 0, got {self.standoff!r}")


def _require_centered(g: ParticleGeometry):
    if g.sensor_depth_offset != 0.0:
        raise ParameterError(
            "no closed form for an off-center sensor; use b_perp_mc instead")


def surface_amplitude(bath: SurfaceBath) -> float:
    """Amplitude A such that B_perp^2 = A * sigma / r0^4, units T^2 m^2."""
    return MU0_OVER_4PI**2 * moment_sq(bath.spin_quantum_number, bath.gamma) \
        * _GEOM * 4.0 * math.pi


def volume_amplitude(bath: VolumeBath) -> float:
    """Amplitude A such that B_perp^2 = A * n / r_min^3, units T^2 m^3."""
    return MU0_OVER_4PI**2 * moment_sq(bath.spin_quantum_number, bath.gamma) \
        * _GEOM * (4.0 * math.pi / 3.0)


def b_perp_sq_surface(g: ParticleGeometry, bath: SurfaceBath) -> float:
    """Mean-square transverse field from the surface bath, T^2.

    Integrating the single-spin variance 2 (mu0/4pi)^2 mu^2 / r0^6 times the
    transverse fraction over the sphere gives A_s * sigma / r0^4; linear in
    the areal density.
    """
    _require_centered(g)
    return surface_amplitude(bath) * bath.areal_density / g.radius**4


def b_perp_sq_volume(g: ParticleGeometry, bath: VolumeBath) -> float:
    """Mean-square transverse field from the exterior molecular bath, T^2.

    The exterior integral of r^-6 from r_min = r0 + standoff outward gives
    A_v * n / r_min^3; linear in the number density.
    """
    _require_centered(g)
    r_min = g.radius + bath.standoff
    return volume_amplitude(bath) * bath.number_density / r_min**3


@dataclass(frozen=True)
class McFieldResult:
    """Monte Carlo estimate of B_perp^2 with its reproducibility record.

    tail_fraction is the analytic beyond-cutoff share added to the mean
    (volume baths only); tail_warning flags a cutoff too small for the
    requested precision (tail correction exceeding the standard error).
    """

    mean: float
    stderr: float
    samples: int
    seed: int
    tail_fraction: float = 0.0
    tail_warning: bool = False


def _perp_sq(bfield: np.ndarray, axis: np.ndarray | None) -> np.ndarray:
    # centered, isotropic ensembles may use the lab z axis; otherwise a
    # random sensor axis per sample keeps the estimator unbiased
    if axis is None:
        return bfield[:, 0] ** 2 + bfield[:, 1] ** 2
    proj = np.einsum("ij,ij->i", bfield, axis)
    return np.einsum("ij,ij->i", bfield, bfield) - proj**2


def _unit_vectors(rng: np.random.Generator, k: int) -> np.ndarray:
    v = rng.standard_normal((k, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _dipole_samples(rng, k, g: ParticleGeometry, bath, r_min, r_cut) -> np.ndarray:
    """Per-spin transverse field variance samples, T^2."""
    if isinstance(bath, SurfaceBath):
        radii = np.full(k, g.radius)
    else:
        u = rng.random(k)
        radii = np.cbrt(r_min**3 + u * (r_cut**3 - r_min**3))
    pos = _unit_vectors(rng, k) * radii[:, None]
    moments = _unit_vectors(rng, k)

    sensor = np.array([0.0, 0.0, g.sensor_depth_offset])
    disp = pos - sensor
    dist = np.linalg.norm(disp, axis=1)
    rhat = disp / dist[:, None]

    mu = math.sqrt(moment_sq(bath.spin_quantum_number, bath.gamma))
    cosang = np.einsum("ij,ij->i", moments, rhat)
    field = MU0_OVER_4PI * mu * (3.0 * cosang[:, None] * rhat - moments) / dist[:, None] ** 3

    axis = None if g.sensor_depth_offset == 0.0 else _unit_vectors(rng, k)
    return _perp_sq(field, axis)


def b_perp_mc(g: ParticleGeometry, bath, samples: int, seed: int,
              cutoff_factor: float = DEFAULT_CUTOFF_FACTOR) -> McFieldResult:
    """Monte Carlo dipolar sum for either bath geometry.

    Positions are sampled uniformly on the sphere surface (surface bath) or
    uniformly in the exterior shell out to cutoff_factor * r_min (volume
    bath, with the analytic r^-6 tail beyond the cutoff added back).  Spin
    orientations are isotropic.  Sampling is split into fixed-size chunks,
    each drawing from its own spawned child stream, and chunk statistics are
    merged by weighted average, so the result is reproducible for a given
    (samples, seed) regardless of how chunks are dispatched.

    Returns the estimated mean and standard error of B_perp^2 in T^2;
    deterministic for fixed inputs.
    """
    if samples < MIN_MC_SAMPLES:
        raise ParameterError(f"need at least {MIN_MC_SAMPLES} samples, got {samples}")
    r_cut = None
    if isinstance(bath, SurfaceBath):
        density, r_min = bath.areal_density, g.radius
        n_spins = bath.areal_density * 4.0 * math.pi * g.radius**2
        tail = 0.0
    elif isinstance(bath, VolumeBath):
        density = bath.number_density
        r_min = g.radius + bath.standoff
        r_cut = cutoff_factor * r_min
        if cutoff_factor <= 1.0:
            raise ParameterError("cutoff_factor must exceed 1")
        n_spins = bath.number_density * (4.0 * math.pi / 3.0) * (r_cut**3 - r_min**3)
        tail = volume_amplitude(bath) * bath.number_density / r_cut**3
    else:
        raise ParameterError(f"unsupported bath type {type(bath).__name__}")

    if density == 0.0:
        return McFieldResult(0.0, 0.0, samples, seed)

    n_chunks = (samples + _CHUNK - 1) // _CHUNK
    streams = np.random.SeedSequence(seed).spawn(n_chunks)
    count, total, total_sq = 0, 0.0, 0.0
    for i, child in enumerate(streams):
        k = min(_CHUNK, samples - i * _CHUNK)
        vals = _dipole_samples(np.random.default_rng(child), k, g, bath, r_min, r_cut)
        count += k
        total += float(vals.sum())
        total_sq += float(np.dot(vals, vals))

    mean_one = total / count
    var_one = max(total_sq / count - mean_one**2, 0.0) * count / (count - 1)
    stderr = math.sqrt(var_one / count) * n_spins
    mean = mean_one * n_spins + tail
    tail_fraction = tail / mean if mean > 0.0 else 0.0
    return McFieldResult(mean=mean, stderr=stderr, samples=samples, seed=seed,
                         tail_fraction=tail_fraction,
                         tail_warning=bool(stderr > 0.0 and tail > stderr))


def calibrate_surface_density(t1_measured: float, g: ParticleGeometry,
                              t1_bulk: float, omega0=OMEGA_0,
                              tau_c_surface: float = 1.0 / 18.0e9,
                              spin: float = 0.5, gamma: float = GAMMA_E) -> float:
    """Areal spin density that reproduces a measured bare-particle T1.

    B_perp^2 is linear in sigma, so the inversion is closed-form:
    sigma = (1/t1_measured - 1/t1_bulk) / rate-per-unit-density.
    """
    if not (math.isfinite(t1_measured) and t1_measured > 0.0):
        raise ParameterError(f"t1_measured must be positive, got {t1_measured!r}")
    if t1_measured >= t1_bulk:
        raise NoSolutionError(
            f"t1_measured ({t1_measured:g} s) must be shorter than t1_bulk ({t1_bulk:g} s)")
    rate_needed = 1.0 / t1_measured - 1.0 / t1_bulk
    unit_bath = SurfaceBath(areal_density=1.0, spin_quantum_number=spin, gamma=gamma)
    b2_per_sigma = b_perp_sq_surface(g, unit_bath)
    rate_per_sigma = rate_contribution(
        NoiseSource(gamma=gamma, b_perp_sq=b2_per_sigma, tau_c=tau_c_surface), omega0)
    return rate_needed / rate_per_sigma


def effective_gd_density_fit(t1_points, predict_inverse_t1) -> float:
    """Single multiplicative density-scale factor fitted to T1 data.

    t1_points is a sequence of (prepared number density, measured t1);
    predict_inverse_t1 maps an effective density to a predicted 1/T1 with
    every other scenario parameter held fixed.  Minimizes squared residuals
    of predicted vs measured relaxation rates.  A factor above 1 indicates
    the effective density exceeds the prepared one (e.g. aggregation), but
    no bound is enforced.
    """
    pts = [(float(n), float(t1)) for n, t1 in t1_points]
    if len(pts) < 3:
        raise ParameterError(f"need at least 3 points, got {len(pts)}")
    if any(t1 <= 0.0 for _, t1 in pts):
        raise ParameterError("measured t1 values must be positive")
    if len({n for n, _ in pts}) == 1:
        raise FitError("all prepared densities are equal; scale is unidentifiable")

    dens = np.array([n for n, _ in pts])
    rates = np.array([1.0 / t1 for _, t1 in pts])

    def residuals(s):
        return np.array([predict_inverse_t1(s[0] * n) for n in dens]) - rates

    result = least_squares(residuals, x0=[1.0], bounds=([1e-12], [np.inf]))
    if not result.success:
        raise FitError(f"density-scale fit did not converge: {result.message}")
    return float(result.x[0])
