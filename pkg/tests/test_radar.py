import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spacor.allocation import make_allocation
from spacor.config import table1_config
from spacor.radar import (
    ChipDictionary,
    DelayAngleGrid,
    EchoBlock,
    RecoveredScene,
    RecoveryError,
    SensingMatrixTooLarge,
    Target,
    TargetScene,
    build_sensing_matrix,
    echo_template,
    echo_templates,
    generate_clutter,
    hit_test,
    load_scene,
    noise_floor_epsilon,
    omp_recover,
    radar_noise_sigma,
    save_scene,
    support_window,
    synthesize_echo,
    wrap_angle,
    write_recovery_csv,
)

from oracles import echo_direct, omp_textbook

TAU0 = 40e-6


@pytest.fixture(scope="module")
def small():
    cfg = table1_config()
    grid = DelayAngleGrid.around(cfg, TAU0 - 2 / cfg.B_r, 8, oversample=2)
    alloc = make_allocation("SpaCoR", cfg, rng=np.random.default_rng(3))
    D = ChipDictionary(grid, alloc, cfg)
    return cfg, grid, alloc, D, D.dense()


@pytest.mark.parametrize("scheme", ["SpaCoR", "Fix1", "Fix2", "Full"])
@pytest.mark.parametrize("tau", [TAU0, TAU0 + 1 / 50e6, TAU0 + 3.3e-9, 12.34567e-6])
def test_template_matches_slot_loop(scheme, tau):
    cfg = table1_config()
    alloc = make_allocation(scheme, cfg, rng=np.random.default_rng(7))
    sets = [alloc.slot(k) for k in range(cfg.K)]
    n = np.arange(cfg.N_rec)
    h = echo_templates(tau, 0.9, alloc, cfg)
    for m in range(cfg.M):
        np.testing.assert_allclose(h[m], echo_direct(m, tau, 0.9, sets, cfg, n), atol=1e-7)


def test_single_template_indexing(cfg):
    alloc = make_allocation("Fix1", cfg)
    n = np.array([5000, 2100, 2500])
    full = echo_templates(TAU0, -0.4, alloc, cfg)
    np.testing.assert_allclose(echo_template(2, n, TAU0, -0.4, alloc, cfg), full[2, n])


@given(tau=st.floats(10e-6, 150e-6), th=st.floats(-math.pi, math.pi, exclude_max=True), seed=st.integers(0, 999))
def test_magnitude_equal_across_elements(tau, th, seed):
    cfg = table1_config()
    h = echo_templates(tau, th, make_allocation("SpaCoR", cfg, rng=seed), cfg)
    np.testing.assert_allclose(np.abs(h), np.broadcast_to(np.abs(h[0]), h.shape), atol=1e-12)


def test_echo_is_linear_in_targets(cfg, rng):
    alloc = make_allocation("SpaCoR", cfg, rng=rng)
    a = Target(TAU0, 1.0, 0.5 - 0.2j)
    b = Target(TAU0 + 7e-8, -2.0, 2j)
    both = synthesize_echo(TargetScene([a, b]), alloc, cfg).samples
    sep = synthesize_echo(TargetScene([a]), alloc, cfg).samples + synthesize_echo(TargetScene([b]), alloc, cfg).samples
    np.testing.assert_allclose(both, sep, atol=1e-12)
    unit = echo_templates(a.tau, a.vartheta, alloc, cfg)
    np.testing.assert_allclose(synthesize_echo(TargetScene([a]), alloc, cfg).samples, a.alpha * unit)


def test_support_window_holds_all_energy(cfg):
    alloc = make_allocation("Full", cfg)
    win = support_window(cfg, TAU0, TAU0 + 1e-7)
    for tau in (TAU0, TAU0 + 0.5e-7, TAU0 + 1e-7):
        e_full = np.sum(np.abs(echo_templates(tau, 0.3, alloc, cfg)) ** 2)
        e_win = np.sum(np.abs(echo_templates(tau, 0.3, alloc, cfg, win)) ** 2)
        assert e_win == pytest.approx(e_full)


def test_noise_power(cfg, rng):
    sigma = radar_noise_sigma(cfg, 3.0)
    assert sigma ** 2 == pytest.approx(cfg.M_T_r ** 2 * cfg.T_r / cfg.T_pri / 10 ** 0.3)
    y = synthesize_echo(TargetScene([]), make_allocation("Fix1", cfg), cfg, sigma, rng).samples
    assert np.mean(np.abs(y) ** 2) == pytest.approx(sigma ** 2, rel=0.03)
    assert noise_floor_epsilon(2.0, 50) == pytest.approx(20.0)
    with pytest.raises(ValueError):
        synthesize_echo(TargetScene([]), make_allocation("Fix1", cfg), cfg, 1.0, None)


def test_dictionary_matches_dense(small, rng):
    cfg, grid, alloc, D, A = small
    assert A.shape == D.shape
    y = rng.standard_normal(A.shape[0]) + 1j * rng.standard_normal(A.shape[0])
    np.testing.assert_allclose(D.correlate(y), A.conj().T @ y, rtol=1e-9, atol=1e-7)
    np.testing.assert_allclose(D.column_norms2(), np.sum(np.abs(A) ** 2, axis=0), rtol=1e-9)
    cols = [0, 17, grid.size - 1]
    np.testing.assert_allclose(D.gram_columns(cols), A.conj().T @ A[:, cols], rtol=1e-9, atol=1e-7)


def test_dense_builder_columns_are_templates(small):
    cfg, grid, alloc, D, _ = small
    A = build_sensing_matrix(grid, alloc, cfg, window=D.window)
    p, q = 3, 5
    tau, th = grid.point(p, q)
    np.testing.assert_allclose(A[:, grid.column(p, q)], echo_templates(tau, th, alloc, cfg, D.window).reshape(-1))


def test_dense_builder_size_guard(small):
    cfg, grid, alloc, _, _ = small
    with pytest.raises(SensingMatrixTooLarge):
        build_sensing_matrix(grid, alloc, cfg, max_bytes=1 << 20)


def test_mutual_coherence_below_one():
    cfg = table1_config()
    grid = DelayAngleGrid(TAU0, TAU0 + 10 / (2 * cfg.B_r), 10, 10)
    grid.check(cfg)
    A = build_sensing_matrix(grid, make_allocation("SpaCoR", cfg, rng=11), cfg,
                             window=support_window(cfg, grid.tau_min, grid.tau_max))
    n = np.linalg.norm(A, axis=0)
    keep = n > 1e-9 * n.max()
    An = A[:, keep] / n[keep]
    G = np.abs(An.conj().T @ An)
    np.fill_diagonal(G, 0)
    assert G.max() < 1 - 1e-6


def test_grid_checks(cfg):
    with pytest.raises(ValueError):
        DelayAngleGrid(1.0, 1.0, 4, 4)
    with pytest.raises(ValueError, match="delay"):
        DelayAngleGrid(TAU0, TAU0 + 4 / cfg.B_r, 2, 8).check(cfg)
    with pytest.raises(ValueError, match="angle"):
        DelayAngleGrid(TAU0, TAU0 + 1 / cfg.B_r, 2, 3).check(cfg)


@given(p=st.integers(0, 39), q=st.integers(0, 19))
def test_grid_cell_roundtrip(p, q):
    cfg = table1_config()
    g = DelayAngleGrid.around(cfg, TAU0, 40)
    tau, th = g.point(p, q)
    assert (g.delay_cell(tau), g.angle_cell(th)) == (p, q)
    assert g.cell(g.column(p, q)) == (p, q)


@given(x=st.floats(-100, 100))
def test_wrap_angle(x):
    w = float(wrap_angle(x))
    assert -math.pi <= w < math.pi
    assert math.isclose(math.cos(w), math.cos(x), abs_tol=1e-9)
    assert math.isclose(math.sin(w), math.sin(x), abs_tol=1e-9)


def test_omp_routes_agree_with_textbook(small):
    cfg, grid, alloc, D, A = small
    pts = [grid.point(2, 3), grid.point(5, 6)]
    scene = TargetScene([Target(pts[0][0], pts[0][1], 1.0), Target(pts[1][0], pts[1][1], 0.7j)])
    y = synthesize_echo(scene, alloc, cfg, 1.0, np.random.default_rng(4), window=D.window).flat()
    S_ref, b_ref = omp_textbook(y, A, 2)
    dense = omp_recover(y, A, 2, grid=grid)
    gram = omp_recover(y, D, 2)
    assert [grid.column(*c) for c in dense.cells()] == S_ref
    assert [grid.column(*c) for c in gram.cells()] == S_ref
    np.testing.assert_allclose([a for _, a in dense.entries], b_ref, rtol=1e-8)
    np.testing.assert_allclose([a for _, a in gram.entries], b_ref, rtol=1e-6)
    assert gram.residual_norm == pytest.approx(dense.residual_norm, rel=1e-6)


@pytest.mark.parametrize("scheme", ["SpaCoR", "Fix1", "Full"])
def test_noiseless_on_grid_target_recovered_exactly(scheme):
    cfg = table1_config()
    grid = DelayAngleGrid.around(cfg, TAU0, 10)
    alloc = make_allocation(scheme, cfg, rng=2)
    tau, th = grid.point(4, 13)
    D = ChipDictionary(grid, alloc, cfg)
    y = synthesize_echo(TargetScene([Target(tau, th, 0.3 - 1.1j)]), alloc, cfg, window=D.window)
    rec = omp_recover(y, D, 3)
    assert rec.entries[0][0] == (4, 13)
    assert rec.entries[0][1] == pytest.approx(0.3 - 1.1j, rel=1e-8)
    assert len(rec.entries) == 1
    assert hit_test(TargetScene([Target(tau, th)]), rec, grid).all()


def test_residual_non_increasing(small):
    cfg, grid, alloc, D, A = small
    rng = np.random.default_rng(9)
    y = rng.standard_normal(A.shape[0]) + 1j * rng.standard_normal(A.shape[0])
    for rec in (omp_recover(y, A, 6, grid=grid), omp_recover(y, D, 6)):
        h = np.array(rec.residual_history)
        assert len(h) == 7
        assert np.all(np.diff(h) <= 1e-9 * h[0])


def test_epsilon_stop(small):
    cfg, grid, alloc, D, A = small
    y = np.ones(A.shape[0], dtype=complex)
    rec = omp_recover(y, D, 5, epsilon=2 * np.linalg.norm(y))
    assert rec.entries == [] and rec.residual_norm == pytest.approx(np.linalg.norm(y))


def test_recovery_error_on_reselection():
    A = np.eye(3, 2, dtype=complex)
    y = np.array([1, 0, 1], dtype=complex)
    with pytest.raises(RecoveryError):
        omp_recover(y, A, 2, grid=DelayAngleGrid(0.0, 1.0, 1, 2))


def test_omp_argument_errors(small):
    _, _, _, D, A = small
    with pytest.raises(ValueError):
        omp_recover(np.zeros(A.shape[0]), D, 0)
    with pytest.raises(ValueError, match="grid"):
        omp_recover(np.zeros(A.shape[0]), A, 1)


def test_clutter_statistics(cfg):
    rng = np.random.default_rng(21)
    scene = TargetScene([Target(TAU0, 0.0, 2.0)])
    p, th = [], []
    for _ in range(10000):
        c = generate_clutter(scene, cfg, -6.0, rng).targets[1:]
        p += [abs(t.alpha) ** 2 for t in c]
        th += [t.vartheta for t in c]
        assert all(t.clutter and t.tau == TAU0 for t in c)
    assert np.mean(p) == pytest.approx(4.0 / 10 ** -0.6, rel=0.03)
    assert np.min(np.abs(wrap_angle(np.array(th) - cfg.steer_spatial_freq))) > 2 * math.pi / cfg.M


def test_clutter_vanishes_at_infinite_scr(cfg, rng):
    c = generate_clutter(TargetScene([Target(TAU0, 0.0)]), cfg, math.inf, rng)
    assert len(c) == 3 and all(t.alpha == 0 for t in c.targets[1:])
    with pytest.raises(ValueError):
        generate_clutter(TargetScene([]), cfg, 0.0, rng)


def test_hit_test_examples(cfg):
    grid = DelayAngleGrid.around(cfg, TAU0, 10)
    tau, th = grid.point(3, 7)
    truth = TargetScene([Target(tau, th), Target(tau, th + 1.0, clutter=True)])
    hit = RecoveredScene([((3, 7), 1.0)], 0.0, [0.0])
    assert hit_test(truth, hit, grid).tolist() == [True]
    assert hit_test(truth, RecoveredScene([], 1.0, [1.0]), grid).tolist() == [False]
    assert hit_test(truth, RecoveredScene([((4, 7), 1.0)], 0.0, [0.0]), grid).tolist() == [False]
    assert hit_test(truth, RecoveredScene([((3, 8), 1.0)], 0.0, [0.0]), grid).tolist() == [False]
    off = TargetScene([Target(tau, th + 0.49 * grid.dtheta)])
    assert hit_test(off, hit, grid).tolist() == [True]


def test_scene_validation(cfg):
    with pytest.raises(ValueError, match="delay"):
        TargetScene([Target(0.5 * cfg.T_r, 0.0)]).validate(cfg)
    with pytest.raises(ValueError, match="delay"):
        TargetScene([Target(cfg.T_pri, 0.0)]).validate(cfg)
    with pytest.raises(ValueError, match="spatial"):
        TargetScene([Target(TAU0, math.pi)]).validate(cfg)


def test_scene_io(tmp_path):
    scene = TargetScene([Target(4e-5, 1.25, 0.5 - 2j), Target(4.1e-5, -3.0, 1.0)])
    save_scene(tmp_path / "s.csv", scene)
    assert load_scene(tmp_path / "s.csv") == scene
    (tmp_path / "bad.csv").write_text("tau_s,vartheta_rad,alpha_re\nx,1,1\n")
    with pytest.raises(ValueError, match="malformed"):
        load_scene(tmp_path / "bad.csv")
    with pytest.raises(FileNotFoundError):
        load_scene(tmp_path / "missing.csv")


def test_recovery_csv(tmp_path, cfg):
    grid = DelayAngleGrid.around(cfg, TAU0, 10)
    write_recovery_csv(tmp_path / "r.csv", RecoveredScene([((1, 2), 1 + 1j)], 0.5, [1.0, 0.5]), grid)
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "p,q,tau_s,vartheta_rad,amp_re,amp_im,residual"
    assert lines[1].startswith("1,2,")


def test_echo_block():
    b = EchoBlock(np.arange(6).reshape(2, 3), 10)
    assert b.window == (10, 13)
    assert b.flat().tolist() == [0, 1, 2, 3, 4, 5]
