"""Command-line front end for the relaxometry engine.

Verbs:

* ``t1``: forward-predict T1 and its rate attribution for one config.
* ``sweep``: tabulate predictions along one parameter axis.
* ``simulate``: generate, fit, and summarize synthetic spot ensembles.
* ``fit``: fit a stored relaxation curve.
* ``sensitivity``: minimal detectable rate versus molecular density.
* ``oracle``: run closed-form vs numerical cross-checks.

Exit codes: 0 success, 1 invalid input or configuration, 2 numerical
failure (singular point or non-converged fit), 3 failed oracle check.

Every file-producing verb writes a JSON manifest beside its outputs.
Timestamps live only in manifests, so the data files of reruns with the
same config and seed are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, ParameterError
from .measure_sim import (
    failed_fit,
    fit_exponential,
    gaussian_summary,
    read_curve,
    separation_scores,
    simulate_curve,
    write_curve,
    write_fit_json,
)
from .scenario import (
    config_hash,
    density_sensitivity_curve,
    measurement_plan,
    parse_config,
    predict,
    t1_sampler,
    with_seed,
)
from .sensitivity import write_sensitivity_curve
from .validation import format_report, run_oracles

SWEEP_AXES = ("gd_density", "water_fraction", "diameter")
ORACLE_NAMES = ("bath_mc", "sensitivity", "quadrature", "all")


class _Parser(argparse.ArgumentParser):
    """Raises instead of exiting, so usage errors map to exit code 1."""

    def error(self, message):
        raise ConfigError(message)


@dataclass(frozen=True)
class RunManifest:
    """Audit record for one file-producing command.

    configs holds (path, sha256-of-canonical-serialization, seed) per input
    config; outputs lists every data file the command wrote, relative to
    the manifest's own directory.
    """

    command: str
    version: str
    created_utc: str
    configs: tuple
    outputs: tuple

    def as_dict(self) -> dict:
        return {
            "command": self.command,
            "version": self.version,
            "created_utc": self.created_utc,
            "configs": [{"path": p, "sha256": h, "seed": s}
                        for p, h, s in self.configs],
            "outputs": list(self.outputs),
        }


def _write_manifest(path: Path, command: str, configs, outputs) -> None:
    manifest = RunManifest(
        command=command, version=__version__,
        created_utc=datetime.now(timezone.utc).isoformat(),
        configs=tuple(configs), outputs=tuple(sorted(str(o) for o in outputs)))
    path.write_text(json.dumps(manifest.as_dict(), indent=2, sort_keys=True) + "\n")


def _parse_grid(spec: str) -> tuple:
    """Parse 'lo:hi:n[:log|lin]' or a comma-separated ascending list."""
    text = spec.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) not in (3, 4):
            raise ConfigError(f"grid must be lo:hi:n[:log|lin], got {spec!r}")
        scale = parts[3] if len(parts) == 4 else "lin"
        if scale not in ("lin", "log"):
            raise ConfigError(f"grid scale must be 'log' or 'lin', got {scale!r}")
        try:
            lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise ConfigError(f"non-numeric grid bounds in {spec!r}") from None
        if n < 2:
            raise ConfigError("grid needs at least 2 points")
        if not lo < hi:
            raise ConfigError(f"grid requires lo < hi, got {lo!r}:{hi!r}")
        if scale == "log":
            if lo <= 0.0:
                raise ConfigError("log grid requires positive bounds")
            return tuple(float(v) for v in np.geomspace(lo, hi, n))
        return tuple(float(v) for v in np.linspace(lo, hi, n))
    values = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            values.append(float(token))
        except ValueError:
            raise ConfigError(f"non-numeric grid value {token!r}") from None
    if len(values) < 2:
        raise ConfigError("grid needs at least 2 points")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError("grid values must be strictly ascending")
    return tuple(values)


def _load_scenario(args):
    return with_seed(parse_config(args.config), args.seed)


def _t1_report(pred) -> str:
    doc = pred.as_dict()
    lines = []
    for key in ("t1_s", "rate_total_per_s", "rate_bulk_per_s"):
        lines.append(f"{key} = {doc[key]:.17g}")
    sources = doc["per_source_rates_per_s"]
    for label in sorted(sources):
        lines.append(f"rate_source_{label}_per_s = {sources[label]:.17g}")
    for comp, value in doc["gd_rates_per_s"].items():
        lines.append(f"gd_rate_{comp}_per_s = {value:.17g}")
    for key in ("b_perp_sq_surface_t2", "b_perp_sq_molecular_t2",
                "viscosity_pa_s", "microviscosity_factor", "x_water",
                "diameter_m", "gd_density_per_m3", "surface_density_per_m2"):
        lines.append(f"{key} = {doc[key]:.17g}")
    return "\n".join(lines) + "\n"


def cmd_t1(args) -> int:
    sc = _load_scenario(args)
    report = _t1_report(predict(sc))
    sys.stdout.write(report)
    if args.out:
        out = Path(args.out)
        out.write_text(report)
        _write_manifest(out.with_name(out.name + ".manifest.json"), "t1",
                        [(str(args.config), config_hash(sc), sc.seed)],
                        [out.name])
    return 0


SWEEP_COLUMNS = ("viscosity_pa_s", "microviscosity_factor",
                 "gd_rate_dip_per_s", "gd_rate_vib_per_s",
                 "gd_rate_trans_per_s", "gd_rate_rot_per_s",
                 "gd_rate_total_per_s", "b_perp_sq_surface_t2",
                 "b_perp_sq_molecular_t2", "t1_s")


def cmd_sweep(args) -> int:
    sc = _load_scenario(args)
    grid = _parse_grid(args.grid)
    # reject out-of-range grids before computing anything
    if args.axis == "gd_density":
        if min(grid) < 0.0:
            raise ConfigError("gd_density grid values must be >= 0")
        column, override = "gd_density_per_m3", "gd_density"
    elif args.axis == "water_fraction":
        if min(grid) < 0.0 or max(grid) > 1.0:
            raise ConfigError("water_fraction grid must lie within [0, 1]")
        column, override = "x_water", "x_water"
    else:
        if min(grid) <= 2.0 * abs(sc.sensor_offset):
            raise ConfigError(
                "diameter grid must be positive and keep the sensor inside")
        column, override = "diameter_m", "diameter"

    rows = []
    for v in grid:
        pred = predict(sc, **{override: v})
        g = pred.gd_rates
        rows.append((v, pred.viscosity, pred.microviscosity, g.r_dip, g.r_vib,
                     g.r_trans, g.r_rot, g.r_total, pred.b2_surface,
                     pred.b2_molecular, pred.relaxation.t1))

    out = Path(args.out)
    lines = ["\t".join((column,) + SWEEP_COLUMNS)]
    lines += ["\t".join(f"{v:.17g}" for v in row) for row in rows]
    out.write_text("\n".join(lines) + "\n")
    _write_manifest(out.with_name(out.name + ".manifest.json"), "sweep",
                    [(str(args.config), config_hash(sc), sc.seed)], [out.name])
    t1s = [row[-1] for row in rows]
    print(f"{len(rows)} rows over {args.axis} -> {out}")
    print(f"t1 range: {min(t1s):.6g} s to {max(t1s):.6g} s")
    return 0


def cmd_simulate(args) -> int:
    if args.spots < 2:
        raise ConfigError(f"--spots must be >= 2, got {args.spots}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    probe = out_dir / ".writable"
    try:
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory {out_dir} is not writable: {exc}")

    conditions = []
    taken = set()
    for index, cfg in enumerate(args.config):
        sc = with_seed(parse_config(cfg), args.seed)
        name = Path(cfg).stem
        if name in taken:
            name = f"{name}_{index}"
        taken.add(name)
        # distinct per-condition streams even when configs share a seed
        conditions.append((name, cfg, sc, sc.seed + index))

    outputs = []
    summaries = []
    summary_doc = {"conditions": {}, "separation": None}
    for name, cfg, sc, seed in conditions:
        cond_dir = out_dir / name
        cond_dir.mkdir(exist_ok=True)
        t1_pred = predict(sc).t1
        plan = measurement_plan(sc, t1_pred)
        sampler = t1_sampler(sc)
        t1_hats = []
        n_converged = 0
        for j, child in enumerate(np.random.SeedSequence(seed).spawn(args.spots)):
            rng = np.random.default_rng(child)
            t1_true = float(sampler(rng))
            curve = simulate_curve(t1_true, plan, rng)
            try:
                fit = fit_exponential(curve)
            except ParameterError as exc:
                fit = failed_fit(str(exc))
            write_curve(curve, cond_dir / f"spot_{j:04d}_curve.tsv")
            write_fit_json(fit, cond_dir / f"spot_{j:04d}_fit.json", plan=plan,
                           seed=seed,
                           extra={"condition": name, "spot": j,
                                  "t1_true_s": t1_true})
            outputs += [f"{name}/spot_{j:04d}_curve.tsv",
                        f"{name}/spot_{j:04d}_fit.json"]
            if fit.converged:
                n_converged += 1
                t1_hats.append(fit.t1_hat)

        cond_doc = {
            "config": str(cfg), "config_sha256": config_hash(sc), "seed": seed,
            "n_spots": args.spots, "n_converged": n_converged,
            "t1_predicted_s": t1_pred, "gaussian": None,
        }
        summ = None
        if len(t1_hats) >= 5:
            try:
                summ = gaussian_summary(t1_hats)
                cond_doc["gaussian"] = {"mean_t1_s": summ.mean,
                                        "sigma_t1_s": summ.sigma, "n": summ.n}
            except ParameterError as exc:
                cond_doc["gaussian_note"] = str(exc)
        summaries.append(summ)
        summary_doc["conditions"][name] = cond_doc

    if len(conditions) == 2 and all(s is not None for s in summaries):
        summary_doc["separation"] = separation_scores(summaries[0], summaries[1])

    (out_dir / "summary.json").write_text(
        json.dumps(summary_doc, indent=2, sort_keys=True) + "\n")
    outputs.append("summary.json")
    _write_manifest(out_dir / "manifest.json", "simulate",
                    [(str(cfg), config_hash(sc), seed)
                     for _, cfg, sc, seed in conditions], outputs)

    for (name, _, _, _), summ in zip(conditions, summaries):
        if summ is not None:
            print(f"{name}: t1 = {summ.mean:.6g} s +- {summ.sigma:.6g} s "
                  f"(n = {summ.n})")
        else:
            print(f"{name}: no gaussian summary (too few converged fits)")
    if summary_doc["separation"] is not None:
        z = summary_doc["separation"]
        print(f"separation: z_geometric = {z['z_geometric']:.3f}, "
              f"z_pooled = {z['z_pooled']:.3f}")
    return 0


def cmd_fit(args) -> int:
    curve = read_curve(args.data)
    fit = fit_exponential(curve)
    print(json.dumps(fit.as_dict(), indent=2, sort_keys=True))
    if args.out:
        out = Path(args.out)
        write_fit_json(fit, out)
        _write_manifest(out.with_name(out.name + ".manifest.json"), "fit",
                        [], [out.name])
    if not fit.converged:
        print(f"fit did not converge: {fit.message}", file=sys.stderr)
        return 2
    return 0


def cmd_sensitivity(args) -> int:
    sc = _load_scenario(args)
    grid = _parse_grid(args.grid) if args.grid else None
    curve = density_sensitivity_curve(sc, grid=grid)
    out = Path(args.out)
    write_sensitivity_curve(curve, out)
    _write_manifest(out.with_name(out.name + ".manifest.json"), "sensitivity",
                    [(str(args.config), config_hash(sc), sc.seed)], [out.name])
    print(f"minimum delta_r = {curve.delta_min:.6g} /s at density "
          f"{curve.argmin_density:.6g} /m^3 (r_total {curve.rate_at_min:.6g} /s)")
    for n in curve.skipped:
        print(f"notice: grid point {n:.6g} /m^3 skipped "
              "(rate sits on the level splitting)")
    if curve.boundary_warning:
        print("warning: minimum lies on the grid boundary; widen the grid",
              file=sys.stderr)
    return 0


def cmd_oracle(args) -> int:
    if args.config:
        parse_config(args.config)  # validated even though checks are fixed-point
    report = run_oracles(args.which)
    print(format_report(report))
    return 0 if report.passed else 3


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rbmrelax",
                     description="Relaxometry of rotational Brownian motion: "
                                 "forward models, simulations, and fits.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("t1", help="forward-predict T1 for one config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="also write the report here")
    p.set_defaults(func=cmd_t1)

    p = sub.add_parser("sweep", help="tabulate predictions along one axis")
    p.add_argument("--config", required=True)
    p.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p.add_argument("--grid", required=True,
                   help="lo:hi:n[:log|lin] or comma-separated ascending values")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate",
                       help="simulate and fit spot ensembles (1-2 configs)")
    p.add_argument("--config", action="append", required=True,
                   help="repeat for a two-condition comparison")
    p.add_argument("--spots", type=int, default=25)
    p.add_argument("--seed", type=int, default=None,
                   help="overrides every config seed; condition index is "
                        "added so conditions get distinct streams")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a stored relaxation curve")
    p.add_argument("data", help="curve file (tau_s signal stderr)")
    p.add_argument("--out", default=None, help="write the fit as JSON here")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sensitivity",
                       help="minimal detectable rate vs molecular density")
    p.add_argument("--config", required=True)
    p.add_argument("--grid", default=None,
                   help="density grid, lo:hi:n[:log|lin] or comma list")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("oracle", help="closed form vs numerical cross-checks")
    p.add_argument("which", choices=ORACLE_NAMES)
    p.add_argument("--config", default=None,
                   help="optional config to validate alongside the checks")
    p.set_defaults(func=cmd_oracle)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ArithmeticError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
