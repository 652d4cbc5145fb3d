import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spacor.allocation import AllocationPattern, Scheme, make_allocation
from spacor.beampattern import (
    BeamGrid,
    BeamPatternSurface,
    angular_resolution,
    beampattern_at,
    beampattern_instant,
    chip_correlations,
    dirichlet,
    expected_closed,
    first_null,
    fix1_closed,
    full_closed,
    pattern_moments,
    peak_normalizer,
    sample_beampatterns,
    transmit_gain,
    variance_closed,
    write_surface_csv,
)
from spacor.config import table1_config

from oracles import beampattern_direct


@pytest.fixture(scope="module")
def grid():
    return BeamGrid.symmetric(table1_config(), 41, 41)


def test_transmit_gain_examples(rng):
    assert transmit_gain([0, 1], 0.0) == pytest.approx(2)
    assert transmit_gain([0, 2], math.pi) == pytest.approx(2)
    f = rng.uniform(-math.pi, math.pi, 100)
    np.testing.assert_allclose(np.abs(transmit_gain(range(4), f)), np.abs(dirichlet(f, 4)), atol=1e-12)


def test_dirichlet_limit():
    assert dirichlet(0.0, 4) == pytest.approx(4)
    assert abs(dirichlet(2 * math.pi, 4)) == pytest.approx(4)
    assert abs(dirichlet(math.pi / 2, 4)) < 1e-12


def test_grid_validation(cfg):
    with pytest.raises(ValueError):
        BeamGrid(np.array([0.0, 0.0]), np.array([0.0, 1.0]))
    g = BeamGrid.symmetric(cfg, 5, 5)
    assert g.tau_d[2] == 0 and g.f_theta[2] == 0 and g.f_theta[0] == -math.pi


def test_delay_outside_window_rejected(cfg):
    with pytest.raises(ValueError, match="receive window"):
        chip_correlations(cfg, [0.0], tau_tilde=0.5 * cfg.T_r)
    with pytest.raises(ValueError):
        chip_correlations(cfg, [0.0], tau_tilde=cfg.T_pri - 0.5 * cfg.T_r)


def test_instant_matches_direct_sum(cfg, rng):
    alloc = make_allocation(Scheme.SPACOR, cfg, rng=rng)
    sets = [alloc.slot(k) for k in range(cfg.K)]
    tau = np.array([0.0, 1.3e-8, -4.4e-8, 1 / cfg.B_r, 7.7e-8])
    f = np.array([0.0, 0.4, -2.2, 1.1, 3.0])
    got = beampattern_at(alloc, cfg, tau, f)
    want = [beampattern_direct(sets, fi, ti, 2 * cfg.T_r, cfg) for ti, fi in zip(tau, f)]
    np.testing.assert_allclose(got, want, rtol=1e-9, atol=1e-8)


def test_instant_origin_full(cfg, grid):
    surf = beampattern_instant(make_allocation("Full", cfg), cfg, grid)
    assert surf.values[20, 20] == pytest.approx(cfg.N_r * cfg.M)
    assert surf.kind == "instant"


@pytest.mark.parametrize("scheme, closed", [("Full", full_closed), ("Fix1", fix1_closed)])
def test_instant_matches_closed_forms(cfg, grid, scheme, closed):
    inst = beampattern_instant(make_allocation(scheme, cfg), cfg, grid).magnitude()
    ref = closed(cfg, grid).magnitude()
    assert np.max(np.abs(inst - ref)) <= 0.02 * ref.max()


def test_fix1_peak_is_radar_count_times_samples(cfg, grid):
    assert fix1_closed(cfg, grid).values.max() == pytest.approx(cfg.M_T_r * cfg.N_r)


def test_expected_closed_scales_full(cfg, grid):
    e = expected_closed(cfg, grid).values
    assert e[20, 20] == pytest.approx(cfg.M_T_r * cfg.N_r)
    np.testing.assert_allclose(e, 0.5 * full_closed(cfg, grid).values)


def test_variance_zero_on_boresight(cfg, grid):
    for scheme in ("SpaCoR", "Fix2"):
        v = variance_closed(cfg, grid, scheme).values
        assert np.all(v >= 0)
        assert np.all(v[:, 20] <= 1e-12)


def test_variance_ratio_at_zero_delay(cfg, grid):
    s = variance_closed(cfg, grid, "SpaCoR").values[20]
    x = variance_closed(cfg, grid, "Fix2").values[20]
    nz = s > 1e-12
    np.testing.assert_allclose(x[nz] / s[nz], cfg.K)


def test_variance_rejects_fixed_schemes(cfg, grid):
    with pytest.raises(ValueError):
        variance_closed(cfg, grid, "Fix1")


def test_fix2_is_spacor_with_one_slot(cfg, grid):
    one = cfg.replace(K=1, T_c=cfg.T_r)
    np.testing.assert_allclose(variance_closed(cfg, grid, "Fix2").values, variance_closed(one, grid, "SpaCoR").values)
    np.testing.assert_allclose(expected_closed(cfg, grid).values, expected_closed(one, grid).values)


@given(phase=st.floats(-math.pi, math.pi), seed=st.integers(0, 2**31))
def test_global_phase_invariance(phase, seed):
    cfg = table1_config()
    alloc = make_allocation("SpaCoR", cfg, rng=seed)
    tau = np.array([0.0, 2e-8])
    f = np.array([0.3, -1.0])
    chi = beampattern_at(alloc, cfg, tau, f)
    np.testing.assert_allclose(np.abs(np.exp(1j * phase) * chi), np.abs(chi))


def test_monte_carlo_mean_and_variance(cfg, rng):
    g = BeamGrid.symmetric(cfg, 101, 101)
    T, F = np.meshgrid(g.tau_d, g.f_theta, indexing="ij")
    pick = rng.choice(np.flatnonzero(np.abs(F.ravel()) >= 2 * math.pi / cfg.M), 20, replace=False)
    samples = sample_beampatterns(cfg, "SpaCoR", T.ravel()[pick], F.ravel()[pick], 20000, rng)
    norm = cfg.M_T_r * cfg.N_r
    mean_err = np.abs(np.abs(samples.mean(0)) - expected_closed(cfg, g).values.ravel()[pick]) / norm
    assert mean_err.max() <= 0.02
    var = np.var(samples / norm, axis=0)
    ref = variance_closed(cfg, g, "SpaCoR").values.ravel()[pick]
    np.testing.assert_allclose(var, ref, rtol=0.05)


def test_moments_equal_trialwise_sampling(cfg):
    g = BeamGrid.symmetric(cfg, 7, 9)
    mean, var = pattern_moments(cfg, "Fix2", g, 3000, np.random.default_rng(5))
    T, F = np.meshgrid(g.tau_d, g.f_theta, indexing="ij")
    s = sample_beampatterns(cfg, "Fix2", T.ravel(), F.ravel(), 3000, np.random.default_rng(5))
    np.testing.assert_allclose(mean.values.ravel(), s.mean(0), atol=1e-8)
    np.testing.assert_allclose(var.values.ravel(), s.var(0), rtol=1e-8, atol=1e-6)
    assert mean.kind == "mean" and np.all(var.values >= 0)


def test_mean_error_shrinks_with_trials(cfg):
    g = BeamGrid.symmetric(cfg, 11, 11)
    ref = expected_closed(cfg, g).values / peak_normalizer("SpaCoR", cfg)
    errs = []
    for n in (100, 1000, 10000):
        m, _ = pattern_moments(cfg, "SpaCoR", g, n, np.random.default_rng(n))
        errs.append(np.median(np.abs(np.abs(m.values) / peak_normalizer("SpaCoR", cfg) - ref)))
    assert errs[0] > errs[1] > errs[2]


def test_mean_peak_at_origin(cfg):
    g = BeamGrid.symmetric(cfg, 21, 21)
    for scheme in Scheme:
        m, _ = pattern_moments(cfg, scheme, g, 2000, np.random.default_rng(1))
        assert np.unravel_index(np.argmax(np.abs(m.values)), m.values.shape) == (10, 10)


def test_angular_resolution(cfg):
    assert angular_resolution("SpaCoR", cfg) == pytest.approx(math.pi / 2)
    assert angular_resolution("Full", cfg) == pytest.approx(math.pi / 2)
    assert angular_resolution("Fix1", cfg) == pytest.approx(math.pi)
    full = table1_config(M_T_r=4, M_T_c=0)
    assert angular_resolution("Fix1", full) == angular_resolution("SpaCoR", full)


def test_first_null_locations(cfg, grid):
    pos = grid.f_theta >= 0
    full = full_closed(cfg, grid).values[20, pos]
    fix1 = fix1_closed(cfg, grid).values[20, pos]
    assert first_null(grid.f_theta[pos], full) == pytest.approx(math.pi / 2)
    assert first_null(grid.f_theta[pos], fix1) == pytest.approx(math.pi)
    assert math.isnan(first_null([0.1, 0.2], [1.0, 1.0]))


def test_surface_csv(tmp_path, grid, cfg):
    surf = beampattern_instant(make_allocation("Fix1", cfg), cfg, grid)
    write_surface_csv(tmp_path / "s.csv", surf)
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "tau_d_s,f_theta_rad,value"
    assert len(lines) == 1 + 41 * 41
    assert float(lines[1 + 20 * 41 + 20].split(",")[2]) == pytest.approx(3000)


def test_normalizer(cfg):
    assert peak_normalizer("Full", cfg) == cfg.M * cfg.N_r
    assert peak_normalizer("SpaCoR", cfg) == cfg.M_T_r * cfg.N_r
