"""Zeropoint-threshold detection model.

A detector never sees the mean zeropoint background: its working quantity
is the intensity ABOVE the vacuum mean of 1/2.  Mean photon-equivalent
rates divide that excess by the cosine of the external propagation angle
(flux through the detector plane), and clamp at zero - a channel sitting
below the zeropoint is simply dark.

Click statistics model the finite detector time window by averaging the
intensity of `window_samples` independent trials before comparing against
the threshold; window averaging is what suppresses vacuum dark counts.
(The averaged-intensity window is a concrete stand-in for the detector's
long integration time, many light oscillations per decision.)  Mean-rate
quantities use expectation values directly and never threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (ConfigError, InvalidArgumentError, StatisticalError,
                     UndefinedRatioError)
from .zpf import GaussianState, Mode, VacuumEnsemble

ZEROPOINT = 0.5


@dataclass(frozen=True)
class DetectorSpec:
    """Threshold detector parameters, intensities in zeropoint units."""

    threshold: float = ZEROPOINT
    window_samples: int = 1
    efficiency: float = 1.0

    def __post_init__(self):
        if self.threshold < 0:
            raise InvalidArgumentError("threshold must be >= 0")
        if self.window_samples < 1:
            raise InvalidArgumentError("window_samples must be >= 1")
        if not 0.0 <= self.efficiency <= 1.0:
            raise InvalidArgumentError("efficiency must lie in [0, 1]")


@dataclass(frozen=True)
class ChannelRate:
    """Mean-rate summary of one output channel."""

    mode: Mode
    mean_intensity: float
    above_zeropoint: float
    photon_rate: float
    detected: bool

    @property
    def signed_rate(self) -> float:
        """Unclamped above-zeropoint flux, negative below the vacuum."""
        return self.above_zeropoint / math.cos(self.mode.theta_external)


def channel_rate(source, mode: Mode, index: int | None = None) -> ChannelRate:
    """Channel summary from a Monte Carlo ensemble or an exact state.

    For a GaussianState the caller must say which mode index the Mode
    labels; ensembles carry their own mode list.
    """
    if isinstance(source, VacuumEnsemble):
        idx = source.index_of(mode) if index is None else index
        mean = float(np.mean(source.intensities(idx)))
    elif isinstance(source, GaussianState):
        if index is None:
            raise InvalidArgumentError(
                "channel_rate from a GaussianState needs the mode index")
        mean = source.mode_intensity(index)
    else:
        raise InvalidArgumentError(f"unsupported source {type(source).__name__}")
    above = mean - ZEROPOINT
    rate = max(above, 0.0) / math.cos(mode.theta_external)
    return ChannelRate(mode=mode, mean_intensity=mean, above_zeropoint=above,
                       photon_rate=rate, detected=above > 0.0)


def ratio_down(rate_low: ChannelRate, rate_high: ChannelRate) -> float:
    """Down-conversion photon-rate ratio between the conjugate channels.

    For equal above-zeropoint intensities this equals
    cos(theta_high) / cos(theta_low): the rate asymmetry is pure geometry.
    """
    if not (rate_low.detected and rate_high.detected):
        raise UndefinedRatioError("both channels must be detected")
    return rate_low.photon_rate / rate_high.photon_rate


def ratio_up(rate_low: ChannelRate, upper_above_zeropoint: float,
             theta_upper_external: float) -> float:
    """Signed up-conversion rate ratio, lower channel over upper.

    The upper channel uses its raw (unclamped) above-zeropoint value, so
    the ratio carries the sign of the upper channel's excess.
    """
    if upper_above_zeropoint == 0.0:
        raise UndefinedRatioError("upper channel sits exactly at zeropoint")
    upper = upper_above_zeropoint / math.cos(theta_upper_external)
    return rate_low.signed_rate / upper


def threshold_counts(ensemble: VacuumEnsemble, mode: Mode, spec: DetectorSpec,
                     rng_seed: int) -> tuple[int, int]:
    """Windowed threshold clicks: (clicks, windows).

    Trials are grouped into consecutive windows of `window_samples`, the
    window-averaged intensity is compared against the threshold, and
    clicks are thinned independently with probability `efficiency`.
    The click probability estimate is clicks / windows.
    """
    m = spec.window_samples
    n_windows = ensemble.n_trials // m
    if n_windows < 1:
        raise InvalidArgumentError(
            f"need at least {m} trials for one window, "
            f"got {ensemble.n_trials}")
    intensities = ensemble.intensities(ensemble.index_of(mode))
    averaged = intensities[:n_windows * m].reshape(n_windows, m).mean(axis=1)
    raw = averaged > spec.threshold
    if spec.efficiency >= 1.0:
        kept = raw
    elif spec.efficiency <= 0.0:
        kept = np.zeros_like(raw)
    else:
        rng = np.random.Generator(np.random.Philox(
            np.random.SeedSequence(rng_seed, spawn_key=(0xD7,))))
        kept = raw & (rng.random(n_windows) < spec.efficiency)
    return int(np.count_nonzero(kept)), int(n_windows)


def dark_rate_curve(spec_base: DetectorSpec, window_list, trials: int,
                    seed: int):
    """Vacuum dark-click probability versus window size.

    Returns rows (window_samples, dark_probability, standard_error); one
    shared vacuum ensemble feeds every window size, so the M = 1 row is
    exactly threshold_counts at M = 1.
    """
    if spec_base.threshold <= ZEROPOINT:
        raise ConfigError("detector.threshold",
                          "dark-rate curve needs a threshold above the "
                          "mean zeropoint intensity 1/2")
    if not window_list:
        raise InvalidArgumentError("window_list must be non-empty")
    if trials < max(window_list):
        raise StatisticalError(
            f"{trials} trials cannot fill a window of {max(window_list)}")
    from .zpf import sample_vacuum
    probe = Mode(omega=0.5, theta_external=0.0, theta_internal=0.0,
                 polarization="ordinary", role="input")
    ensemble = sample_vacuum((probe,), trials, seed)
    rows = []
    for m in window_list:
        spec = DetectorSpec(threshold=spec_base.threshold, window_samples=int(m),
                            efficiency=spec_base.efficiency)
        clicks, windows = threshold_counts(ensemble, probe, spec, rng_seed=seed)
        p = clicks / windows
        stderr = math.sqrt(max(p * (1.0 - p), 1.0 / windows) / windows)
        rows.append((int(m), p, stderr))
    return rows
