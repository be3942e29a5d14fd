"""Stochastic zeropoint-field simulator of parametric conversion rainbows.

The vacuum is a Gaussian distribution over plane-wave mode amplitudes
(mean intensity 1/2 per mode); the pumped crystal acts on it as a linear
Bogoliubov map.  Exact Gaussian-state propagation and Monte Carlo sampling
run the same pipelines and cross-validate each other.
"""

from .coupling import (BogoliubovTransform, ThreeWaveSystem, apply,
                       convert_pair, integrate_three_wave,
                       perturbative_transform, propagate_covariance,
                       squeeze_pair)
from .detection import ChannelRate, DetectorSpec, channel_rate, dark_rate_curve
from .dispersion import (CrystalSpec, PhaseMatchSolution,
                         SellmeierCoefficients, match_down, match_up,
                         refractive_index, wavevector)
from .rainbow import Couplings, RainbowPoint, RainbowTable, satellite_summary, sweep
from .zpf import (GaussianState, Mode, VacuumEnsemble, mean_intensity,
                  sample_vacuum, vacuum_state)

__version__ = "0.1.0"

__all__ = [
    "BogoliubovTransform", "ChannelRate", "Couplings", "CrystalSpec",
    "DetectorSpec", "GaussianState", "Mode", "PhaseMatchSolution",
    "RainbowPoint", "RainbowTable", "SellmeierCoefficients",
    "ThreeWaveSystem", "VacuumEnsemble", "apply", "channel_rate",
    "convert_pair", "dark_rate_curve", "integrate_three_wave", "match_down",
    "match_up", "mean_intensity", "perturbative_transform",
    "propagate_covariance", "refractive_index", "sample_vacuum",
    "satellite_summary", "squeeze_pair", "sweep", "vacuum_state",
    "wavevector",
]
