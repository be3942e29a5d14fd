"""Frequency sweep synthesizing the main and satellite rainbows.

Each sampled frequency w (as a fraction of the pump) is evaluated at two
geometries:

  * the down-conversion-matched geometry, where the pair process is exact
    and the competing up-conversion runs with its natural mismatch; this
    yields the main rainbow channel at w and its conjugate at w0 - w;
  * the up-conversion-matched geometry, where the conversion is exact and
    the pair process is mismatched; the residual pair excess that survives
    the mismatch is the satellite channel at w, and the signed excess of
    the w0 + w channel feeds the up-conversion rate relation.

The eq1_ratio column isolates the pair process (up-conversion coupling
off) so it reflects the pure geometric cosine asymmetry; main_rate and
conjugate_rate keep the full three-wave physics.

Frequencies whose phase matching has no solution are marked absent (NaN
fields), never extrapolated.  Both engines share the same geometry code:
`covariance` propagates the exact Gaussian state, `montecarlo` pushes a
sampled vacuum ensemble through the same transforms with per-point seeds
derived from the master seed.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, fields

import numpy as np

from concurrent.futures import ThreadPoolExecutor

from . import coupling as cp
from . import dispersion as dp
from .detection import ChannelRate, DetectorSpec, channel_rate, ratio_down, ratio_up
from .errors import (BandError, DomainError, InvalidArgumentError,
                     NoSolutionError, UndefinedRatioError)
from .zpf import block_amplitudes, trial_blocks, vacuum_state

ENGINES = ("covariance", "montecarlo")


@dataclass(frozen=True)
class Couplings:
    """Effective three-wave couplings; None means auto from the crystal gain."""

    g_down: float | None = None
    g_up: float | None = None
    phi_down: float = 0.0
    phi_up: float = 0.0

    def resolve(self, crystal: dp.CrystalSpec) -> "Couplings":
        g = crystal.gain_per_mm
        return Couplings(
            g_down=g if self.g_down is None else self.g_down,
            g_up=g if self.g_up is None else self.g_up,
            phi_down=self.phi_down, phi_up=self.phi_up)


@dataclass(frozen=True)
class RainbowPoint:
    """One frequency sample of the synthesized rainbows (NaN = absent)."""

    omega: float
    theta_d_ext: float
    theta_u_ext: float
    main_rate: float
    conjugate_rate: float
    satellite_rate: float
    upper_above_zeropoint: float
    eq1_ratio: float
    eq2_ratio: float

    @property
    def has_main(self) -> bool:
        return not math.isnan(self.theta_d_ext)

    @property
    def has_satellite(self) -> bool:
        return not math.isnan(self.theta_u_ext)


POINT_FIELDS = tuple(f.name for f in fields(RainbowPoint))


@dataclass(frozen=True)
class RainbowTable:
    points: tuple
    config_fingerprint: str

    def __post_init__(self):
        omegas = [p.omega for p in self.points]
        if any(b <= a for a, b in zip(omegas, omegas[1:])):
            raise InvalidArgumentError("points must be strictly ordered in omega")
        object.__setattr__(self, "points", tuple(self.points))


def config_fingerprint(payload: dict) -> str:
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()


def _point_seed(seed: int, index: int, slot: int) -> int:
    return int(np.random.SeedSequence(
        seed, spawn_key=(index, slot)).generate_state(1, np.uint64)[0])


def pdc_system(crystal: dp.CrystalSpec, omega: float, couplings: Couplings,
               force_dk_down_zero: bool = False) -> cp.ThreeWaveSystem:
    """Three-wave system at the down-conversion-matched geometry."""
    sol = dp.match_down(omega, crystal)
    return _system_at(crystal, omega, sol.theta_in_internal, couplings,
                      force_dk_down_zero)


def puc_system(crystal: dp.CrystalSpec, omega: float, couplings: Couplings,
               force_dk_down_zero: bool = False) -> cp.ThreeWaveSystem:
    """Three-wave system at the up-conversion-matched geometry."""
    sol = dp.match_up(omega, crystal)
    return _system_at(crystal, omega, sol.theta_in_internal, couplings,
                      force_dk_down_zero)


def _system_at(crystal, omega, theta_in, couplings, force_dk_down_zero=False):
    """Assemble the (w, w0-w, w0+w) triple for an input at theta_in.

    The conjugate and up-converted directions balance the input's
    transverse momentum exactly; the longitudinal mismatches are whatever
    the geometry leaves over.
    """
    c = couplings.resolve(crystal)
    pump = dp.pump_mode(crystal)
    m_in = dp.make_mode(crystal, omega, theta_in, dp.ORDINARY, "input")
    kt, _ = dp.wavevector(m_in, crystal)

    k_s = dp._k_ordinary(1.0 - omega, crystal)
    if abs(kt) > k_s:
        raise NoSolutionError("conjugate cannot balance transverse momentum")
    m_conj = dp.make_mode(crystal, 1.0 - omega, -math.asin(kt / k_s),
                          dp.ORDINARY, "signal")
    _, dk_down = dp.mismatch([pump], [m_in, m_conj], crystal)

    theta_up = dp._up_output_angle(1.0 + omega, kt, crystal)
    if math.isnan(theta_up):
        raise NoSolutionError("up-converted wave cannot balance "
                              "transverse momentum")
    m_up = dp.make_mode(crystal, 1.0 + omega, theta_up,
                        dp.EXTRAORDINARY, "signal")
    _, dk_up = dp.mismatch([pump, m_in], [m_up], crystal)

    return cp.ThreeWaveSystem(
        g_down=c.g_down, g_up=c.g_up,
        phi_down=c.phi_down, phi_up=c.phi_up,
        dk_down=0.0 if force_dk_down_zero else dk_down, dk_up=dk_up,
        length_mm=crystal.length_mm, modes=(m_in, m_conj, m_up))


def mc_mean_intensities(transforms, trials: int, seed: int,
                        workers: int = 1) -> list[np.ndarray]:
    """Monte Carlo mean |alpha|^2 per mode for several transforms at once.

    Streams the vacuum over the sampler's fixed trial blocks, so memory
    stays bounded and the result is bit-identical for any worker count
    (partial sums are combined in block order).
    """
    if trials < 1:
        raise InvalidArgumentError("trials must be >= 1")
    n_modes = transforms[0].n_modes
    blocks = trial_blocks(trials)

    def one_block(task):
        b, start, stop = task
        amp = block_amplitudes(n_modes, seed, b, stop - start)
        conj = amp.conj()
        return [np.sum(np.abs(amp @ t.u.T + conj @ t.v.T) ** 2, axis=0)
                for t in transforms]

    if workers == 1:
        partials = [one_block(task) for task in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(one_block, blocks))

    sums = [np.zeros(n_modes) for _ in transforms]
    for part in partials:
        for acc, p in zip(sums, part):
            acc += p
    return [s / trials for s in sums]


def _channel_rates(system, engine, trials, seed, n_steps=None, workers=1):
    """Rates of the (w, w0-w, w0+w) channels plus the pair-only pair rates."""
    t_full = cp.integrate_three_wave(system, n_steps)
    pair_only = cp.ThreeWaveSystem(
        g_down=system.g_down, g_up=0.0, phi_down=system.phi_down,
        phi_up=0.0, dk_down=system.dk_down, dk_up=0.0,
        length_mm=system.length_mm, modes=system.modes)
    t_pair = cp.integrate_three_wave(pair_only, n_steps)
    modes = system.modes
    if engine == "covariance":
        full = cp.propagate_covariance(t_full, vacuum_state(3))
        pair = cp.propagate_covariance(t_pair, vacuum_state(3))
        full_rates = [channel_rate(full, modes[i], index=i) for i in range(3)]
        pair_rates = [channel_rate(pair, modes[i], index=i) for i in range(2)]
    else:
        means_full, means_pair = mc_mean_intensities(
            [t_full, t_pair], trials, seed, workers)
        full_rates = [_rate_from_mean(modes[i], means_full[i]) for i in range(3)]
        pair_rates = [_rate_from_mean(modes[i], means_pair[i]) for i in range(2)]
    return full_rates, pair_rates


def _rate_from_mean(mode, mean_intensity):
    above = float(mean_intensity) - 0.5
    return ChannelRate(mode=mode, mean_intensity=float(mean_intensity),
                       above_zeropoint=above,
                       photon_rate=max(above, 0.0) / math.cos(mode.theta_external),
                       detected=above > 0.0)


def sweep(omega_min: float, omega_max: float, steps: int,
          crystal: dp.CrystalSpec, detector: DetectorSpec,
          engine: str = "covariance", trials: int = 100_000, seed: int = 0,
          couplings: Couplings = Couplings(), n_steps: int | None = None,
          workers: int = 1) -> RainbowTable:
    """Sample the matched band and synthesize both rainbows.

    A point is present when its full (w, w0-w, w0+w) triple is
    representable inside the transparency window and down conversion
    phase matches; the satellite additionally needs an up-conversion
    match.  Raises BandError when no frequency in the requested range
    matches at all.
    """
    if not 0.0 < omega_min < omega_max < 1.0:
        raise InvalidArgumentError("need 0 < omega_min < omega_max < 1")
    if steps < 2:
        raise InvalidArgumentError("steps must be >= 2")
    if engine not in ENGINES:
        raise InvalidArgumentError(f"unknown engine {engine!r}")

    fingerprint = config_fingerprint(dict(
        omega_min=omega_min, omega_max=omega_max, steps=steps,
        crystal=crystal, detector=detector, engine=engine,
        trials=trials, seed=seed, couplings=couplings))

    points = []
    for i, omega in enumerate(np.linspace(omega_min, omega_max, steps)):
        omega = float(omega)
        nan = float("nan")
        theta_d = theta_u = main = conj = sat = upper = eq1 = eq2 = nan
        try:
            sol_d = dp.match_down(omega, crystal)
            system_a = _system_at(crystal, omega, sol_d.theta_in_internal,
                                  couplings)
        except (NoSolutionError, DomainError):
            system_a = None
        if system_a is not None:
            theta_d = sol_d.theta_in_external
            (r_w, r_s, _), (p_w, p_s) = _channel_rates(
                system_a, engine, trials, _point_seed(seed, i, 0), n_steps,
                workers)
            main, conj = r_w.photon_rate, r_s.photon_rate
            try:
                eq1 = ratio_down(p_w, p_s)
            except UndefinedRatioError:
                pass
            # without an up-conversion coupling there is no satellite process
            if couplings.resolve(crystal).g_up == 0.0:
                system_b = None
            else:
                try:
                    sol_u = dp.match_up(omega, crystal)
                    system_b = _system_at(crystal, omega,
                                          sol_u.theta_in_internal, couplings)
                except (NoSolutionError, DomainError):
                    system_b = None
            if system_b is not None:
                theta_u = sol_u.theta_in_external
                (q_w, _, q_u), _ = _channel_rates(
                    system_b, engine, trials, _point_seed(seed, i, 1), n_steps,
                    workers)
                sat = q_w.photon_rate
                upper = q_u.above_zeropoint
                try:
                    eq2 = ratio_up(q_w, upper,
                                   system_b.modes[2].theta_external)
                except UndefinedRatioError:
                    pass
        points.append(RainbowPoint(
            omega=omega, theta_d_ext=theta_d, theta_u_ext=theta_u,
            main_rate=main, conjugate_rate=conj, satellite_rate=sat,
            upper_above_zeropoint=upper, eq1_ratio=eq1, eq2_ratio=eq2))

    if not any(p.has_main for p in points):
        raise BandError(
            f"no phase-matched frequency in [{omega_min}, {omega_max}]; "
            "check the crystal dispersion and pump settings")
    return RainbowTable(points=tuple(points), config_fingerprint=fingerprint)


def satellite_summary(table: RainbowTable) -> tuple[float, float]:
    """(mean satellite/main rate ratio, mean theta_u/theta_d) over the band.

    Averages the points where both rainbows are present and the main
    channel carries signal.
    """
    rates, angles = [], []
    for p in table.points:
        if p.has_main and p.has_satellite and p.main_rate > 0.0:
            rates.append(p.satellite_rate / p.main_rate)
            angles.append(p.theta_u_ext / p.theta_d_ext)
    if not rates:
        raise BandError("no sweep point carries both rainbows")
    return float(np.mean(rates)), float(np.mean(angles))
