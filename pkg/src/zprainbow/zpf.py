"""Zeropoint (vacuum) field representation and sampling.

Conventions
-----------
Every plane-wave mode carries a complex amplitude alpha.  Quadratures are
x = sqrt(2) Re(alpha), p = sqrt(2) Im(alpha), so the vacuum has

    Var(x) = Var(p) = 1/2,    <|alpha|^2> = (Var(x) + Var(p)) / 2 = 1/2.

All intensities in the package are |alpha|^2 in these zeropoint units: the
mean vacuum intensity per mode is exactly 1/2.  Exact Gaussian states store
the quadrature mean vector and covariance matrix in xxpp ordering
(x_1..x_M, p_1..p_M); the M-mode vacuum is zero mean with covariance
(1/2) * identity.

Monte Carlo sampling uses one counter-based Philox stream per
(mode, trial-block) pair, every stream keyed from the master seed.  Trials
are tiled into fixed blocks of 2**16, so the amplitude table depends only on
(seed, mode list, n_trials) - never on scheduling, worker count, or the
order in which blocks are filled.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, NotFoundError

ORDINARY = "ordinary"
EXTRAORDINARY = "extraordinary"

ROLES = ("input", "signal", "idler", "pump")

# trials per RNG stream; fixed so block boundaries are part of the contract
_BLOCK = 1 << 16


@dataclass(frozen=True)
class Mode:
    """One plane-wave mode of the field.

    omega is the angular frequency as a fraction of the pump frequency
    (pump modes have omega == 1), angles are in radians and signed by the
    transverse direction, polarization is 'ordinary' or 'extraordinary'.
    """

    omega: float
    theta_external: float
    theta_internal: float
    polarization: str
    role: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise InvalidArgumentError(f"unknown mode role {self.role!r}")
        if self.polarization not in (ORDINARY, EXTRAORDINARY):
            raise InvalidArgumentError(
                f"unknown polarization {self.polarization!r}")
        if self.role == "pump":
            if self.omega != 1.0:
                raise InvalidArgumentError("pump modes must have omega == 1")
        elif not 0.0 < self.omega < 2.0:
            raise InvalidArgumentError(
                f"omega must lie in (0, 2), got {self.omega}")
        for name in ("omega", "theta_external", "theta_internal"):
            if not np.isfinite(getattr(self, name)):
                raise InvalidArgumentError(f"{name} must be finite")


@dataclass
class GaussianState:
    """Exact Gaussian (Wigner) state: quadrature mean and covariance.

    xxpp ordering; the vacuum covariance is (1/2) * identity.
    """

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.covariance = np.asarray(self.covariance, dtype=float)
        if self.mean.ndim != 1 or self.covariance.shape != (self.mean.size,) * 2:
            raise InvalidArgumentError("mean/covariance dimensions disagree")
        if self.mean.size % 2:
            raise InvalidArgumentError("state dimension must be 2 * n_modes")
        if not np.allclose(self.covariance, self.covariance.T, atol=1e-12, rtol=0.0):
            raise InvalidArgumentError("covariance must be symmetric to 1e-12")

    @property
    def n_modes(self) -> int:
        return self.mean.size // 2

    def mode_intensity(self, index: int) -> float:
        """Mean |alpha|^2 of one mode, (<x^2> + <p^2>) / 2."""
        m = self.n_modes
        if not 0 <= index < m:
            raise NotFoundError(f"mode index {index} out of range")
        i, j = index, m + index
        return 0.5 * (self.covariance[i, i] + self.covariance[j, j]
                      + self.mean[i] ** 2 + self.mean[j] ** 2)

    def is_positive_semidefinite(self, tol: float = 1e-10) -> bool:
        return bool(np.linalg.eigvalsh(self.covariance).min() >= -tol)


def vacuum_state(n_modes: int) -> GaussianState:
    """The M-mode vacuum: zero mean, covariance (1/2) * identity."""
    if n_modes < 1:
        raise InvalidArgumentError("n_modes must be >= 1")
    return GaussianState(np.zeros(2 * n_modes), 0.5 * np.eye(2 * n_modes))


@dataclass
class VacuumEnsemble:
    """Monte Carlo table of complex mode amplitudes, one row per trial.

    The table is written once at construction and then frozen; all reads
    are safe concurrently.  (seed, modes, n_trials) fully determine it.
    """

    modes: tuple
    n_trials: int
    seed: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.modes = tuple(self.modes)
        if self.amplitudes.shape != (self.n_trials, len(self.modes)):
            raise InvalidArgumentError("amplitude table shape mismatch")
        self.amplitudes.setflags(write=False)

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    def index_of(self, mode: Mode) -> int:
        try:
            return self.modes.index(mode)
        except ValueError:
            raise NotFoundError(f"mode {mode} not in ensemble") from None

    def intensities(self, index: int) -> np.ndarray:
        """Per-trial |alpha|^2 for one mode column."""
        a = self.amplitudes[:, index]
        return a.real ** 2 + a.imag ** 2

    def quadratures(self, index: int) -> tuple[np.ndarray, np.ndarray]:
        """Per-trial (x, p) samples for one mode column."""
        a = self.amplitudes[:, index]
        root2 = np.sqrt(2.0)
        return root2 * a.real, root2 * a.imag

    def replace_amplitudes(self, amplitudes: np.ndarray) -> "VacuumEnsemble":
        """New ensemble with the same metadata and a new amplitude table."""
        return VacuumEnsemble(self.modes, self.n_trials, self.seed,
                              np.ascontiguousarray(amplitudes))


def block_amplitudes(n_modes: int, seed: int, block_index: int,
                     length: int) -> np.ndarray:
    """Vacuum amplitudes for one trial block, (length, n_modes) complex.

    Block `b` covers trials [b * 2**16, (b + 1) * 2**16); every consumer
    of vacuum randomness draws through this function, so chunked and
    monolithic sampling see identical numbers.
    """
    out = np.empty((length, n_modes), dtype=np.complex128)
    for m in range(n_modes):
        bits = np.random.Philox(
            np.random.SeedSequence(seed, spawn_key=(m, block_index)))
        # interleaved draws keep each trial at a fixed stream position,
        # so a short final block is a prefix of the full block
        z = np.random.Generator(bits).standard_normal((length, 2))
        # Re/Im std 1/2 <=> quadrature variance 1/2
        out[:, m] = 0.5 * (z[:, 0] + 1j * z[:, 1])
    return out


def trial_blocks(n_trials: int):
    """The fixed block grid: (block_index, start, stop) triples."""
    return [(b, start, min(start + _BLOCK, n_trials))
            for b, start in enumerate(range(0, n_trials, _BLOCK))]


def sample_vacuum(modes, n_trials: int, seed: int, workers: int = 1) -> VacuumEnsemble:
    """Draw a vacuum ensemble: i.i.d. Gaussian amplitudes for each mode.

    Each quadrature is N(0, 1/2), independent across modes and trials.
    `workers` only controls how many threads fill the table; the result is
    bit-identical for any worker count.
    """
    modes = tuple(modes)
    if not modes:
        raise InvalidArgumentError("mode list must be non-empty")
    if n_trials < 1:
        raise InvalidArgumentError("n_trials must be >= 1")
    if workers < 1:
        raise InvalidArgumentError("workers must be >= 1")

    table = np.empty((n_trials, len(modes)), dtype=np.complex128)

    def fill(task):
        b, start, stop = task
        table[start:stop, :] = block_amplitudes(len(modes), seed, b, stop - start)

    tasks = trial_blocks(n_trials)
    if workers == 1:
        for task in tasks:
            fill(task)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for _ in pool.map(fill, tasks):
                pass

    return VacuumEnsemble(modes, n_trials, seed, table)


def mean_intensity(ensemble: VacuumEnsemble, mode: Mode) -> float:
    """Trial average of |alpha|^2 for one mode of the ensemble."""
    return float(np.mean(ensemble.intensities(ensemble.index_of(mode))))
