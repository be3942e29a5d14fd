import math

import numpy as np
import pytest

from zprainbow.errors import BandError, InvalidArgumentError
from zprainbow.rainbow import (Couplings, RainbowPoint, RainbowTable,
                               mc_mean_intensities, pdc_system, puc_system,
                               satellite_summary, sweep)
from zprainbow import coupling as cp

PAIR_ONLY = Couplings(g_up=0.0)


def points_equal(a, b):
    """Field-wise point comparison treating NaN (absent) as equal to NaN."""
    from zprainbow.rainbow import POINT_FIELDS
    if len(a) != len(b):
        return False
    for pa, pb in zip(a, b):
        for name in POINT_FIELDS:
            va, vb = getattr(pa, name), getattr(pb, name)
            if va != vb and not (math.isnan(va) and math.isnan(vb)):
                return False
    return True


@pytest.fixture(scope="module")
def default_table(crystal, detector, couplings):
    return sweep(0.44, 0.58, 15, crystal, detector, engine="covariance",
                 couplings=couplings)


class TestSweepStructure:
    def test_points_ordered_and_counted(self, default_table):
        omegas = [p.omega for p in default_table.points]
        assert len(omegas) == 15
        assert all(b > a for a, b in zip(omegas, omegas[1:]))

    def test_degenerate_angle_in_paper_band(self, default_table):
        mid = min(default_table.points, key=lambda p: abs(p.omega - 0.5))
        assert math.radians(5.0) < mid.theta_d_ext < math.radians(15.0)

    def test_absent_points_are_nan_not_extrapolated(self, crystal, detector):
        table = sweep(0.42, 0.62, 21, crystal, detector, engine="covariance")
        edge = [p for p in table.points if p.omega > 0.6]
        assert edge and all(not p.has_main for p in edge)
        assert all(math.isnan(p.main_rate) for p in edge)

    def test_satellite_subset_of_main(self, default_table):
        for p in default_table.points:
            if p.has_satellite:
                assert p.has_main
                assert p.satellite_rate >= 0.0
                assert p.main_rate >= 0.0

    def test_band_error_when_nothing_matches(self, crystal, detector):
        with pytest.raises(BandError):
            sweep(0.601, 0.607, 3, crystal, detector, engine="covariance")

    def test_argument_validation(self, crystal, detector):
        with pytest.raises(InvalidArgumentError):
            sweep(0.6, 0.4, 5, crystal, detector)
        with pytest.raises(InvalidArgumentError):
            sweep(0.4, 0.6, 1, crystal, detector)
        with pytest.raises(InvalidArgumentError):
            sweep(0.4, 0.6, 5, crystal, detector, engine="tarot")


class TestEqOneColumn:
    def test_crosses_unity_at_degenerate(self, crystal, detector):
        table = sweep(0.46, 0.54, 9, crystal, detector, engine="covariance")
        mid = table.points[4]
        assert mid.omega == pytest.approx(0.5, abs=1e-12)
        assert mid.eq1_ratio == pytest.approx(1.0, abs=1e-9)
        below = [p.eq1_ratio for p in table.points if p.omega < 0.5]
        above = [p.eq1_ratio for p in table.points if p.omega > 0.5]
        assert all(r > 1.0 for r in below)
        assert all(r < 1.0 for r in above)

    def test_band_reciprocal_symmetry(self, crystal, detector):
        # pure pair process: eq1(w) * eq1(1 - w) = 1 in covariance mode
        table = sweep(0.44, 0.56, 13, crystal, detector, engine="covariance",
                      couplings=PAIR_ONLY)
        ratios = {round(p.omega, 6): p.eq1_ratio for p in table.points}
        for omega, r in ratios.items():
            mirror = ratios.get(round(1.0 - omega, 6))
            if mirror is not None and not (math.isnan(r) or math.isnan(mirror)):
                assert r * mirror == pytest.approx(1.0, abs=1e-9)

class TestCrossEngine:
    def test_rates_agree_within_noise(self, crystal, detector, couplings):
        exact = sweep(0.50, 0.58, 5, crystal, detector, engine="covariance",
                      couplings=couplings)
        sampled = sweep(0.50, 0.58, 5, crystal, detector, engine="montecarlo",
                        trials=10 ** 6, seed=31, couplings=couplings)
        bound = 5 * 0.52 / 1000.0  # intensity spread over sqrt(1e6)
        for pe, pm in zip(exact.points, sampled.points):
            assert pm.has_main == pe.has_main
            if pe.has_main:
                assert abs(pm.main_rate - pe.main_rate) < bound
                assert abs(pm.conjugate_rate - pe.conjugate_rate) < bound
            if pe.has_satellite:
                assert abs(pm.upper_above_zeropoint
                           - pe.upper_above_zeropoint) < bound


class TestDeterminism:
    def test_covariance_reruns_identical(self, crystal, detector, couplings):
        a = sweep(0.46, 0.54, 5, crystal, detector, engine="covariance",
                  couplings=couplings)
        b = sweep(0.46, 0.54, 5, crystal, detector, engine="covariance",
                  couplings=couplings)
        assert a.config_fingerprint == b.config_fingerprint
        assert points_equal(a.points, b.points)

    def test_montecarlo_reruns_identical(self, crystal, detector, couplings):
        kw = dict(engine="montecarlo", trials=50_000, seed=8,
                  couplings=couplings)
        a = sweep(0.50, 0.56, 4, crystal, detector, **kw)
        b = sweep(0.50, 0.56, 4, crystal, detector, **kw)
        assert points_equal(a.points, b.points)

    def test_seed_matters(self, crystal, detector, couplings):
        a = sweep(0.50, 0.56, 4, crystal, detector, engine="montecarlo",
                  trials=50_000, seed=8, couplings=couplings)
        b = sweep(0.50, 0.56, 4, crystal, detector, engine="montecarlo",
                  trials=50_000, seed=9, couplings=couplings)
        assert not points_equal(a.points, b.points)

    @pytest.mark.parametrize("workers", [4, 8])
    def test_worker_invariance(self, crystal, couplings, workers):
        t = cp.integrate_three_wave(pdc_system(crystal, 0.52, couplings))
        base = mc_mean_intensities([t], 150_000, seed=5, workers=1)
        par = mc_mean_intensities([t], 150_000, seed=5, workers=workers)
        assert np.array_equal(base[0], par[0])


class TestSatelliteSummary:
    def test_band_values(self, default_table):
        mean_ratio, angle_ratio = satellite_summary(default_table)
        assert 0.01 <= mean_ratio <= 0.10
        assert 2.0 <= angle_ratio <= 3.0

    def test_absent_without_up_coupling(self, crystal, detector):
        table = sweep(0.50, 0.58, 5, crystal, detector, engine="covariance",
                      couplings=PAIR_ONLY)
        with pytest.raises(BandError):
            satellite_summary(table)

    def test_suppression_vanishes_without_mismatch(self, crystal, couplings):
        # zero the competing pair mismatch at the up-matched geometry: the
        # satellite channel must recover the full pair gain
        from zprainbow.zpf import vacuum_state
        natural = puc_system(crystal, 0.54, couplings)
        forced = puc_system(crystal, 0.54, couplings, force_dk_down_zero=True)
        sat_nat = cp.propagate_covariance(
            cp.integrate_three_wave(natural),
            vacuum_state(3)).mode_intensity(0) - 0.5
        sat_forced = cp.propagate_covariance(
            cp.integrate_three_wave(forced),
            vacuum_state(3)).mode_intensity(0) - 0.5
        main = math.sinh(crystal.gain_per_mm * crystal.length_mm) ** 2
        assert sat_nat / main < 0.10
        assert sat_forced / main > 0.5


class TestRainbowTable:
    def test_disordered_points_rejected(self):
        nan = float("nan")
        p = RainbowPoint(0.5, nan, nan, nan, nan, nan, nan, nan, nan)
        q = RainbowPoint(0.4, nan, nan, nan, nan, nan, nan, nan, nan)
        with pytest.raises(InvalidArgumentError):
            RainbowTable(points=(p, q), config_fingerprint="x")


class TestThreeWaveGeometry:
    def test_matched_mismatch_pattern(self, crystal, couplings):
        a = pdc_system(crystal, 0.5, couplings)
        assert abs(a.dk_down) < 1e-9
        assert abs(a.dk_up) > 1e-2
        b = puc_system(crystal, 0.54, couplings)
        assert abs(b.dk_up) < 1e-9
        assert abs(b.dk_down) > 1e-2

    def test_sweep_angles_match_solver(self, crystal, default_table):
        from zprainbow.dispersion import match_down
        mid = min(default_table.points, key=lambda p: abs(p.omega - 0.5))
        sol = match_down(mid.omega, crystal)
        assert mid.theta_d_ext == sol.theta_in_external


class TestCrossEngineEqOne:
    def test_eq1_column_within_noise(self, crystal, detector, couplings):
        exact = sweep(0.48, 0.56, 5, crystal, detector, engine="covariance",
                      couplings=couplings)
        sampled = sweep(0.48, 0.56, 5, crystal, detector, engine="montecarlo",
                        trials=10 ** 6, seed=37, couplings=couplings)
        for pe, pm in zip(exact.points, sampled.points):
            if not pe.has_main:
                continue
            # conservative ratio spread: independent thermal channels
            above = pe.main_rate * math.cos(pe.theta_d_ext)
            rel = math.sqrt(2.0) * (0.5 + above) / math.sqrt(10 ** 6) / above
            assert abs(pm.eq1_ratio - pe.eq1_ratio) < 5 * rel
