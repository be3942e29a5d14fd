"""Configuration loading, command dispatch and output formats.

The configuration is one JSON file with nested sections mirroring the
domain types (crystal, detector, couplings, sweep, ...); every physical
constant, including the default crystal's Sellmeier data, lives there.
All validation happens at load time with field-level diagnostics.

Output files are written to a temporary name and atomically renamed, so
a failed run never leaves a partial table behind.  CSV numbers carry 17
significant digits and round-trip exactly.

Exit codes: 0 success, 2 invalid configuration, 3 no phase-matching
solution / empty band, 4 unmet statistical precondition.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, replace
from importlib import resources

from . import coupling as cp
from . import dispersion as dp
from .detection import (DetectorSpec, dark_rate_curve, ratio_down, ratio_up)
from .errors import (BandError, ConfigError, InvalidArgumentError,
                     NoSolutionError, StatisticalError, UndefinedRatioError,
                     ZpRainbowError)
from .rainbow import (Couplings, POINT_FIELDS, mc_mean_intensities,
                      pdc_system, puc_system, satellite_summary, sweep)
from .zpf import Mode, ORDINARY, sample_vacuum, vacuum_state

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NO_SOLUTION = 3
EXIT_STATISTICAL = 4


@dataclass(frozen=True)
class RunConfig:
    crystal: dp.CrystalSpec
    detector: DetectorSpec
    engine: str
    trials: int
    seed: int
    workers: int
    sweep_band: tuple
    couplings: Couplings
    ratios_omega: float
    ratios_trials: int
    darkrate_windows: tuple
    output_path: str
    output_format: str


def default_config_path() -> str:
    return str(resources.files("zprainbow").joinpath("configs/default.json"))


def _section(raw, name, expected=dict):
    value = raw.get(name)
    if not isinstance(value, expected):
        raise ConfigError(name, f"missing or not a {expected.__name__}")
    return value


def _field(section, path, name, types, default=None, required=False):
    if name not in section:
        if required:
            raise ConfigError(f"{path}.{name}", "missing required field")
        return default
    value = section[name]
    if not isinstance(value, types) or isinstance(value, bool):
        raise ConfigError(f"{path}.{name}", f"expected {types}, got {value!r}")
    return value


def _sellmeier(section, path, name):
    terms = _field(section, path, name, list, required=True)
    try:
        return dp.SellmeierCoefficients(tuple((float(b), float(c))
                                              for b, c in terms))
    except (TypeError, ValueError, InvalidArgumentError) as e:
        raise ConfigError(f"{path}.{name}", str(e)) from None


def load_config(path: str | None = None) -> RunConfig:
    """Parse and fully validate a configuration file."""
    cfg_path = path or default_config_path()
    try:
        with open(cfg_path, "rb") as fh:
            raw = json.load(fh)
    except OSError as e:
        raise ConfigError("config", f"cannot read {cfg_path}: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError("config", f"invalid JSON in {cfg_path}: {e}") from None

    c = _section(raw, "crystal")
    try:
        crystal = dp.CrystalSpec(
            sellmeier_o=_sellmeier(c, "crystal", "sellmeier_o"),
            sellmeier_e=_sellmeier(c, "crystal", "sellmeier_e"),
            cut_angle_deg=float(_field(c, "crystal", "cut_angle_deg",
                                       (int, float), required=True)),
            length_mm=float(_field(c, "crystal", "length_mm", (int, float),
                                   required=True)),
            pump_wavelength_nm=float(_field(c, "crystal", "pump_wavelength_nm",
                                            (int, float), required=True)),
            gain_per_mm=float(_field(c, "crystal", "gain_per_mm", (int, float),
                                     required=True)),
            pump_polarization=_field(c, "crystal", "pump_polarization", str,
                                     default="extraordinary"),
            window_um=tuple(_field(c, "crystal", "window_um", list,
                                   required=True)),
        )
    except InvalidArgumentError as e:
        raise ConfigError("crystal", str(e)) from None

    d = _section(raw, "detector")
    try:
        detector = DetectorSpec(
            threshold=float(_field(d, "detector", "threshold", (int, float),
                                   default=0.5)),
            window_samples=int(_field(d, "detector", "window_samples", int,
                                      default=1)),
            efficiency=float(_field(d, "detector", "efficiency", (int, float),
                                    default=1.0)),
        )
    except InvalidArgumentError as e:
        raise ConfigError("detector", str(e)) from None

    engine = raw.get("engine", "covariance")
    if engine not in ("covariance", "montecarlo"):
        raise ConfigError("engine", f"unknown engine {engine!r}")
    trials = _field(raw, "", "trials", int, default=100_000)
    seed = _field(raw, "", "seed", int, default=0)
    workers = _field(raw, "", "workers", int, default=1)
    if trials < 1:
        raise ConfigError("trials", "must be >= 1")
    if workers < 1:
        raise ConfigError("workers", "must be >= 1")

    s = _section(raw, "sweep")
    band = (float(_field(s, "sweep", "omega_min", (int, float), required=True)),
            float(_field(s, "sweep", "omega_max", (int, float), required=True)),
            int(_field(s, "sweep", "steps", int, required=True)))
    if not 0.0 < band[0] < band[1] < 1.0:
        raise ConfigError("sweep", "need 0 < omega_min < omega_max < 1")
    if band[2] < 2:
        raise ConfigError("sweep.steps", "must be >= 2")

    k = raw.get("couplings", {})
    if k == "auto":
        k = {}
    if not isinstance(k, dict):
        raise ConfigError("couplings", "must be a section or \"auto\"")

    def opt_g(name):
        v = k.get(name)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)) or v < 0:
            raise ConfigError(f"couplings.{name}", "must be a number >= 0")
        return float(v)

    couplings = Couplings(
        g_down=opt_g("g_down"), g_up=opt_g("g_up"),
        phi_down=float(_field(k, "couplings", "phi_down", (int, float),
                              default=0.0)),
        phi_up=float(_field(k, "couplings", "phi_up", (int, float),
                            default=0.0)))

    r = raw.get("ratios", {})
    ratios_omega = float(_field(r, "ratios", "omega", (int, float),
                                default=0.5))
    ratios_trials = int(_field(r, "ratios", "trials", int, default=trials))
    if not 0.0 < ratios_omega < 1.0:
        raise ConfigError("ratios.omega", "must lie in (0, 1)")

    dk = raw.get("darkrate", {})
    windows = tuple(_field(dk, "darkrate", "windows", list,
                           default=[1, 10, 100]))
    if not windows or any((isinstance(w, bool) or not isinstance(w, int)
                           or w < 1) for w in windows):
        raise ConfigError("darkrate.windows", "must be positive integers")

    o = raw.get("output", {})
    out_path = _field(o, "output", "path", str, default="zprainbow_out.csv")
    out_format = _field(o, "output", "format", str, default="csv")
    if out_format not in ("csv", "json"):
        raise ConfigError("output.format", f"unknown format {out_format!r}")

    return RunConfig(crystal=crystal, detector=detector, engine=engine,
                     trials=trials, seed=seed, workers=workers,
                     sweep_band=band, couplings=couplings,
                     ratios_omega=ratios_omega, ratios_trials=ratios_trials,
                     darkrate_windows=windows, output_path=out_path,
                     output_format=out_format)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return format(value, ".17g")
    return str(value)


def write_table(path: str, fmt: str, header, rows) -> None:
    """Serialize a table atomically (temp file + rename)."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".part")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            if fmt == "csv":
                fh.write(",".join(header) + "\n")
                for row in rows:
                    fh.write(",".join(_fmt(v) for v in row) + "\n")
            else:
                payload = [{k: (None if isinstance(v, float) and math.isnan(v)
                                else v)
                            for k, v in zip(header, row)} for row in rows]
                json.dump(payload, fh, indent=2, sort_keys=True)
                fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def cmd_angles(config: RunConfig, out_path: str, fmt: str) -> int:
    """Dispersion-only table of matching angles and solver residuals."""
    import numpy as np
    lo, hi, steps = config.sweep_band
    header = ("omega", "theta_d_int", "theta_d_ext", "theta_u_int",
              "theta_u_ext", "residual_down", "residual_up")
    rows, n_down = [], 0
    for omega in np.linspace(lo, hi, steps):
        omega = float(omega)
        row = [omega] + [float("nan")] * 6
        try:
            sol = dp.match_down(omega, config.crystal)
            row[1:3] = [sol.theta_in_internal, sol.theta_in_external]
            row[5] = sol.residual_dk
            n_down += 1
        except ZpRainbowError:
            pass
        try:
            sol = dp.match_up(omega, config.crystal)
            row[3:5] = [sol.theta_in_internal, sol.theta_in_external]
            row[6] = sol.residual_dk
        except ZpRainbowError:
            pass
        rows.append(row)
    if n_down == 0:
        raise BandError("no frequency in the sweep band phase matches")
    write_table(out_path, fmt, header, rows)
    print(f"angles: {len(rows)} rows ({n_down} matched) -> {out_path}")
    return EXIT_OK


def cmd_rainbow(config: RunConfig, out_path: str, fmt: str) -> int:
    """Full rainbow synthesis (both rainbows, both engines)."""
    lo, hi, steps = config.sweep_band
    table = sweep(lo, hi, steps, config.crystal, config.detector,
                  engine=config.engine, trials=config.trials,
                  seed=config.seed, couplings=config.couplings,
                  workers=config.workers)
    rows = [[getattr(p, f) for f in POINT_FIELDS] for p in table.points]
    write_table(out_path, fmt, POINT_FIELDS, rows)
    print(f"rainbow: {len(rows)} points -> {out_path}")
    print(f"config fingerprint: {table.config_fingerprint}")
    try:
        mean_ratio, angle_ratio = satellite_summary(table)
        print(f"satellite/main rate ratio (band mean): {mean_ratio:.6g}")
        print(f"theta_u/theta_d (band mean): {angle_ratio:.6g}")
    except BandError:
        print("satellite rainbow: not present in this band")
    return EXIT_OK


def forced_angle_report(config: RunConfig, theta_low_deg: float,
                        theta_high_deg: float) -> dict:
    """Photon-rate ratio with the matched angles forced by hand.

    Runs the pure pair squeezer at the crystal gain and detects the two
    conjugate channels at the given external angles.
    """
    th_lo, th_hi = math.radians(theta_low_deg), math.radians(theta_high_deg)
    gl = config.crystal.gain_per_mm * config.crystal.length_mm
    modes = (Mode(0.5, th_lo, th_lo, ORDINARY, "input"),
             Mode(0.5, -th_hi, -th_hi, ORDINARY, "signal"))
    t = cp.squeeze_pair(gl, config.couplings.phi_down)
    if config.engine == "covariance":
        state = cp.propagate_covariance(t, vacuum_state(2))
        means = [state.mode_intensity(i) for i in range(2)]
    else:
        means = [float(v) for v in mc_mean_intensities(
            [t], config.ratios_trials, config.seed, config.workers)[0]]
    from .rainbow import _rate_from_mean
    rate_lo = _rate_from_mean(modes[0], means[0])
    rate_hi = _rate_from_mean(modes[1], means[1])
    return {
        "theta_low_deg": theta_low_deg,
        "theta_high_deg": theta_high_deg,
        "engine": config.engine,
        "rate_ratio": ratio_down(rate_lo, rate_hi),
        "cosine_ratio": math.cos(th_hi) / math.cos(th_lo),
        "photon_theory_ratio": 1.0,
    }


def physical_ratio_report(config: RunConfig, omega: float) -> dict:
    """Eq.-style rate ratios at one matched frequency.

    The down-conversion ratio uses the pair process alone; the
    up-conversion entry reports the signed above-zeropoint value of the
    upper channel, its clamped rate, and the signed ratio.
    """
    nan = float("nan")
    system_a = pdc_system(config.crystal, omega, config.couplings)
    pair_only = cp.ThreeWaveSystem(
        g_down=system_a.g_down, g_up=0.0, phi_down=system_a.phi_down,
        phi_up=0.0, dk_down=system_a.dk_down, dk_up=0.0,
        length_mm=system_a.length_mm, modes=system_a.modes)
    try:
        system_b = puc_system(config.crystal, omega, config.couplings)
    except (NoSolutionError, BandError):
        system_b = None
    transforms = [cp.integrate_three_wave(pair_only)]
    if system_b is not None:
        transforms.append(cp.integrate_three_wave(system_b))

    from .rainbow import _rate_from_mean
    if config.engine == "covariance":
        means = [[cp.propagate_covariance(t, vacuum_state(3)).mode_intensity(i)
                  for i in range(3)] for t in transforms]
    else:
        means = mc_mean_intensities(transforms, config.ratios_trials,
                                    config.seed, config.workers)
    pair_rates = [_rate_from_mean(system_a.modes[i], means[0][i])
                  for i in range(2)]

    report = {
        "omega": omega,
        "engine": config.engine,
        "eq1_ratio": ratio_down(pair_rates[0], pair_rates[1]),
        "eq1_cosine_ratio": (math.cos(system_a.modes[1].theta_external)
                             / math.cos(system_a.modes[0].theta_external)),
        "photon_theory_ratio": 1.0,
        "lower_above_zeropoint": nan,
        "upper_above_zeropoint": nan,
        "upper_clamped_rate": nan,
        "eq2_cosine_ratio": nan,
        "eq2_ratio": nan,
    }
    if system_b is not None:
        puc_rates = [_rate_from_mean(system_b.modes[i], means[1][i])
                     for i in range(3)]
        report.update(
            lower_above_zeropoint=puc_rates[0].above_zeropoint,
            upper_above_zeropoint=puc_rates[2].above_zeropoint,
            upper_clamped_rate=puc_rates[2].photon_rate,
            eq2_cosine_ratio=-(math.cos(system_b.modes[2].theta_external)
                               / math.cos(system_b.modes[0].theta_external)))
        try:
            report["eq2_ratio"] = ratio_up(
                puc_rates[0], puc_rates[2].above_zeropoint,
                system_b.modes[2].theta_external)
        except UndefinedRatioError:
            pass
    return report


def cmd_ratios(config: RunConfig, omega: float, out_path: str, fmt: str,
               theta_low_deg=None, theta_high_deg=None) -> int:
    if (theta_low_deg is None) != (theta_high_deg is None):
        raise ConfigError("ratios", "forced angles need both "
                          "--theta-low-deg and --theta-high-deg")
    if theta_low_deg is not None:
        report = forced_angle_report(config, theta_low_deg, theta_high_deg)
    else:
        report = physical_ratio_report(config, omega)
    header = tuple(report.keys())
    write_table(out_path, fmt, header, [list(report.values())])
    for key, value in report.items():
        print(f"{key}: {_fmt(value)}")
    print(f"ratios report -> {out_path}")
    return EXIT_OK


def cmd_darkrate(config: RunConfig, windows, out_path: str, fmt: str) -> int:
    spec = config.detector
    if spec.threshold <= 0.5:
        raise ConfigError("detector.threshold",
                          "dark-rate runs need threshold > 1/2")
    rows = dark_rate_curve(spec, windows, config.trials, config.seed)
    write_table(out_path, fmt, ("window_samples", "dark_probability",
                                "standard_error"), rows)
    for m, p, err in rows:
        print(f"M={m}: dark probability {p:.6g} +- {err:.2g}")
    print(f"darkrate curve -> {out_path}")
    return EXIT_OK


def cmd_simulate(config: RunConfig, omega: float, out_path: str, fmt: str,
                 raw_vacuum: bool = False) -> int:
    """Dump the per-trial amplitudes of the matched three-wave triple."""
    system = pdc_system(config.crystal, omega, config.couplings)
    ensemble = sample_vacuum(system.modes, config.trials, config.seed,
                             config.workers)
    if not raw_vacuum:
        ensemble = cp.apply(cp.integrate_three_wave(system), ensemble)
    header = ("trial", "w_re", "w_im", "s_re", "s_im", "u_re", "u_im")
    amp = ensemble.amplitudes
    rows = ([i, amp[i, 0].real, amp[i, 0].imag, amp[i, 1].real,
             amp[i, 1].imag, amp[i, 2].real, amp[i, 2].imag]
            for i in range(ensemble.n_trials))
    write_table(out_path, fmt, header, rows)
    print(f"simulate: {ensemble.n_trials} trials -> {out_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zprainbow",
        description="Zeropoint-field simulator of parametric down- and "
                    "up-conversion rainbows")
    parser.add_argument("--config", default=None,
                        help="configuration file (JSON); defaults to the "
                             "packaged default config")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--engine", choices=("covariance", "montecarlo"),
                       default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--output", default=None)
        p.add_argument("--format", choices=("csv", "json"), default=None)

    common(sub.add_parser("angles", help="phase-matching angle table"))
    common(sub.add_parser("rainbow", help="synthesize both rainbows"))
    p = sub.add_parser("ratios", help="rate-ratio report at one frequency")
    common(p)
    p.add_argument("--omega", type=float, default=None)
    p.add_argument("--theta-low-deg", type=float, default=None)
    p.add_argument("--theta-high-deg", type=float, default=None)
    p = sub.add_parser("darkrate", help="vacuum dark-rate curve")
    common(p)
    p.add_argument("--windows", type=int, nargs="+", default=None)
    p = sub.add_parser("simulate", help="raw ensemble dump at one frequency")
    common(p)
    p.add_argument("--omega", type=float, default=None)
    p.add_argument("--raw-vacuum", action="store_true")
    return parser


def _apply_overrides(config: RunConfig, args) -> RunConfig:
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.trials is not None:
        if args.trials < 1:
            raise ConfigError("trials", "must be >= 1")
        updates["trials"] = args.trials
        updates["ratios_trials"] = args.trials
    if args.engine is not None:
        updates["engine"] = args.engine
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("workers", "must be >= 1")
        updates["workers"] = args.workers
    if args.output is not None:
        updates["output_path"] = args.output
    if args.format is not None:
        updates["output_format"] = args.format
    return replace(config, **updates) if updates else config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _apply_overrides(load_config(args.config), args)
        out, fmt = config.output_path, config.output_format
        if args.command == "angles":
            return cmd_angles(config, out, fmt)
        if args.command == "rainbow":
            return cmd_rainbow(config, out, fmt)
        if args.command == "ratios":
            omega = args.omega if args.omega is not None else config.ratios_omega
            return cmd_ratios(config, omega, out, fmt,
                              args.theta_low_deg, args.theta_high_deg)
        if args.command == "darkrate":
            windows = args.windows or list(config.darkrate_windows)
            return cmd_darkrate(config, windows, out, fmt)
        if args.command == "simulate":
            omega = args.omega if args.omega is not None else config.ratios_omega
            return cmd_simulate(config, omega, out, fmt, args.raw_vacuum)
        raise ConfigError("command", f"unknown command {args.command!r}")
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (NoSolutionError, BandError) as e:
        print(f"no solution: {e}", file=sys.stderr)
        return EXIT_NO_SOLUTION
    except (StatisticalError,) as e:
        print(f"statistical precondition: {e}", file=sys.stderr)
        return EXIT_STATISTICAL
    except InvalidArgumentError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
