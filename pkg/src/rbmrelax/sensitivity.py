"""Minimal detectable change of the total fluctuation rate, and its
optimization over bath density.

The closed form propagates photon shot noise through the Lorentzian
relaxation model for a readout at the optimal dark time tau = T1, where a
factor exp(-1) enters the signal derivative; that is the origin of Euler's
number in the expression:

    delta_R_min = (1 / (C sqrt(D T_D T))) * sqrt(2 e R / (3 gamma^2 B_perp^2))
                  * (R^2 + omega0^2)^(3/2) / |R^2 - omega0^2|

It diverges at R = omega0: there the relaxation rate is stationary in R and
the sensor carries no first-order information about rate changes.  An
independent numerical error-propagation oracle validates the formula up to
a constant factor (documented where it is measured).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

from .constants import GAMMA_E, OMEGA_0
from .errors import ConfigError, ParameterError, SingularityError

# Relative half-width of the rejected resonance neighborhood.  Within it the
# formula's divergence is dominated by cancellation noise, not physics.
RESONANCE_GUARD = 1e-9


@dataclass(frozen=True)
class SensitivityInputs:
    """Everything the minimal-detectable-rate formula needs.

    r_total is the total fluctuation rate of the probed bath (1/s);
    b_perp_sq its mean-square transverse field (T^2); acquisition_time the
    total averaging time T (s).
    """

    contrast: float
    photon_rate: float
    detection_window: float
    acquisition_time: float
    b_perp_sq: float
    r_total: float
    gamma_e: float = GAMMA_E
    omega0: float = OMEGA_0

    def __post_init__(self):
        if not (0.0 < self.contrast < 1.0):
            raise ParameterError(f"contrast must lie in (0, 1), got {self.contrast!r}")
        for name in ("photon_rate", "detection_window", "acquisition_time",
                     "b_perp_sq", "r_total", "gamma_e", "omega0"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ParameterError(f"{name} must be finite and positive, got {value!r}")


def _guard_resonance(r_total: float, omega0: float):
    if abs(r_total - omega0) <= RESONANCE_GUARD * omega0:
        raise SingularityError(
            f"rate {r_total:g} /s sits on the level splitting {omega0:g} rad/s; "
            "the sensor is first-order insensitive to rate changes there")


def delta_r_min(inp: SensitivityInputs) -> float:
    """Minimal detectable rate change, 1/s.

    Scales as 1/sqrt(T) and 1/sqrt(B_perp^2); invariant under the trade
    C -> C/k, photon_rate -> k^2 photon_rate.
    """
    r, w = inp.r_total, inp.omega0
    _guard_resonance(r, w)
    prefactor = 1.0 / (inp.contrast * math.sqrt(
        inp.photon_rate * inp.detection_window * inp.acquisition_time))
    core = math.sqrt(2.0 * math.e * r / (3.0 * inp.gamma_e**2 * inp.b_perp_sq))
    lor = (r**2 + w**2) ** 1.5 / abs(r**2 - w**2)
    return prefactor * core * lor


def induced_rate(inp: SensitivityInputs, r: float) -> float:
    """Bath-induced relaxation rate 3 gamma^2 B_perp^2 r / (r^2 + omega0^2)."""
    return 3.0 * inp.gamma_e**2 * inp.b_perp_sq * r / (r**2 + inp.omega0**2)


def delta_r_oracle(inp: SensitivityInputs, perturbation: float | None = None) -> float:
    """Numerical error-propagation estimate of the minimal detectable rate.

    Models the actual measurement: a single-dark-time readout at tau = T1,
    where T1 = 1/(induced rate).  The signal derivative d(signal)/dR is taken
    by central finite difference with the given rate perturbation (default
    0.1% of r_total, must stay below 1%), and the photon shot noise of the
    normalized signal accumulated over the acquisition time (shot duration
    dominated by the dark time, reference taken as exactly known) is divided
    by that derivative.

    Bulk relaxation is deliberately excluded: the closed form ignores it too,
    and it carries no information about the bath rate.
    """
    r, w = inp.r_total, inp.omega0
    _guard_resonance(r, w)
    h = 1e-3 * r if perturbation is None else float(perturbation)
    if not (0.0 < h <= 0.01 * r):
        raise ParameterError(f"perturbation must lie in (0, 0.01 * r_total], got {h!r}")

    t1 = 1.0 / induced_rate(inp, r)

    def signal(rate):
        return 1.0 - inp.contrast + inp.contrast * math.exp(-t1 * induced_rate(inp, rate))

    ds_dr = (signal(r + h) - signal(r - h)) / (2.0 * h)
    if ds_dr == 0.0:
        raise SingularityError("signal derivative vanishes; rate is not detectable")

    n_shots = inp.acquisition_time / t1
    photons = inp.photon_rate * inp.detection_window * n_shots
    sigma_signal = math.sqrt(signal(r) / photons)
    return sigma_signal / abs(ds_dr)


@dataclass(frozen=True)
class SensitivityCurve:
    """delta_r_min versus bath density, with its minimum located.

    points: tuple of (density 1/m^3, r_total 1/s, delta_r_min 1/s), sorted
    by density.  skipped lists densities rejected as resonant.
    boundary_warning means the minimum sits on the grid edge: either the
    grid is too narrow or the curve has no interior minimum.
    """

    points: tuple
    argmin_index: int
    boundary_warning: bool
    skipped: tuple = ()

    def __post_init__(self):
        pts = tuple((float(n), float(r), float(d)) for n, r, d in self.points)
        if not pts:
            raise ParameterError("curve needs at least one point")
        if any(b[0] <= a[0] for a, b in zip(pts, pts[1:])):
            raise ParameterError("curve points must be strictly sorted by density")
        if not (0 <= self.argmin_index < len(pts)):
            raise ParameterError("argmin index out of range")
        if pts[self.argmin_index][2] != min(p[2] for p in pts):
            raise ParameterError("argmin record inconsistent with points")
        object.__setattr__(self, "points", pts)

    @property
    def argmin_density(self) -> float:
        return self.points[self.argmin_index][0]

    @property
    def rate_at_min(self) -> float:
        return self.points[self.argmin_index][1]

    @property
    def delta_min(self) -> float:
        return self.points[self.argmin_index][2]


def default_density_grid(center: float, decades: float = 3.0,
                         per_decade: int = 40) -> tuple:
    """Log grid of densities centered (geometrically) on a given value."""
    if not (math.isfinite(center) and center > 0.0):
        raise ParameterError(f"grid center must be positive, got {center!r}")
    n = int(round(decades * per_decade)) + 1
    half = decades / 2.0
    lo, hi = math.log10(center) - half, math.log10(center) + half
    return tuple(10.0 ** (lo + (hi - lo) * i / (n - 1)) for i in range(n))


def optimize_density(density_grid, b2_fn, r_fn,
                     template: SensitivityInputs) -> SensitivityCurve:
    """Evaluate delta_r_min over a density grid and locate its minimum.

    b2_fn(n) and r_fn(n) map a bath density to its field variance and total
    fluctuation rate; all other inputs come from the template.  The grid
    must be sorted ascending and span at least two decades.  Grid points on
    the resonance are skipped, not fatal.
    """
    grid = [float(n) for n in density_grid]
    if len(grid) < 2 or any(n <= 0.0 or not math.isfinite(n) for n in grid):
        raise ParameterError("density grid must contain >= 2 positive values")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ParameterError("density grid must be strictly ascending")
    if grid[-1] / grid[0] < 100.0:
        raise ParameterError("density grid must span at least two decades")

    points, skipped = [], []
    for n in grid:
        inp = replace(template, b_perp_sq=float(b2_fn(n)), r_total=float(r_fn(n)))
        try:
            points.append((n, inp.r_total, delta_r_min(inp)))
        except SingularityError:
            skipped.append(n)
    if not points:
        raise ParameterError("every grid point was resonant; nothing to optimize")

    values = [p[2] for p in points]
    idx = values.index(min(values))
    boundary = idx in (0, len(points) - 1)
    return SensitivityCurve(points=tuple(points), argmin_index=idx,
                            boundary_warning=boundary, skipped=tuple(skipped))


CURVE_COLUMNS = ("density_per_m3", "r_total_per_s", "delta_r_min_per_s")


def write_sensitivity_curve(curve: SensitivityCurve, path) -> None:
    """Write the curve as delimited text plus an argmin summary block."""
    lines = ["\t".join(CURVE_COLUMNS)]
    for n, r, d in curve.points:
        lines.append(f"{n:.17g}\t{r:.17g}\t{d:.17g}")
    lines.append("# argmin")
    lines.append(f"# density_per_m3 = {curve.argmin_density:.17g}")
    lines.append(f"# r_total_per_s = {curve.rate_at_min:.17g}")
    lines.append(f"# delta_r_min_per_s = {curve.delta_min:.17g}")
    lines.append(f"# boundary_warning = {str(curve.boundary_warning).lower()}")
    if curve.skipped:
        lines.append("# skipped_densities = " +
                     ",".join(f"{n:.17g}" for n in curve.skipped))
    Path(path).write_text("\n".join(lines) + "\n")


def read_sensitivity_curve(path) -> SensitivityCurve:
    """Parse a file written by write_sensitivity_curve."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read sensitivity curve {path}: {exc}") from exc
    points, meta, seen_header = [], {}, False
    for lineno, line in enumerate(lines, start=1):
        text = line.strip()
        if not text:
            continue
        if text.startswith("#"):
            body = text.lstrip("#").strip()
            if "=" in body:
                key, _, value = body.partition("=")
                meta[key.strip()] = value.strip()
            continue
        if not seen_header:
            if tuple(text.split()) != CURVE_COLUMNS:
                raise ConfigError(f"{path}:{lineno}: unexpected header {text!r}")
            seen_header = True
            continue
        fields = text.split()
        if len(fields) != 3:
            raise ConfigError(f"{path}:{lineno}: expected 3 columns, got {len(fields)}")
        try:
            points.append(tuple(float(v) for v in fields))
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: non-numeric row: {text!r}") from exc
    if not points:
        raise ConfigError(f"{path}: no data rows")
    values = [p[2] for p in points]
    idx = values.index(min(values))
    skipped = tuple(float(v) for v in meta.get("skipped_densities", "").split(",") if v)
    boundary = meta.get("boundary_warning", "false") == "true"
    return SensitivityCurve(points=tuple(points), argmin_index=idx,
                            boundary_warning=boundary, skipped=skipped)
