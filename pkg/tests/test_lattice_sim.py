import numpy as np
import pytest

from spdest import (
    GridConfig,
    NoiseSpec,
    SimulationDiverged,
    ValidationError,
    WindowUnavailable,
    apply_drift,
    builtin_model,
    custom_model,
    em_step,
    simulate_stream,
    solve_deterministic,
)
from spdest.lattice_sim import RollingField


def dirichlet_series(x, t, n_terms=300):
    """Truncated Fourier-series solution of du/dt = (1/2) u_xx on [0, 1]
    with u = 0 at the ends and u(x, 0) = 6."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for k in range(n_terms):
        m = 2 * k + 1
        out += (24.0 / (m * np.pi)) * np.sin(m * np.pi * x) * np.exp(-((m * np.pi) ** 2) * t / 2.0)
    return out


class TestGridConfig:
    def test_defaults_follow_nt_rule(self):
        cfg = GridConfig(n_x=2 ** 5)
        assert cfg.n_t == 2 ** 10
        assert cfg.dt == cfg.dx ** 2  # equality admitted

    def test_validation(self):
        with pytest.raises(ValidationError):
            GridConfig(n_x=2)
        with pytest.raises(ValidationError):
            GridConfig(n_x=8, n_t=0, time_step_rule="explicit")
        with pytest.raises(ValidationError):
            GridConfig(length=-1.0, n_x=8, n_t=64, time_step_rule="explicit")
        # dt > dx^2 violates explicit-scheme stability
        with pytest.raises(ValidationError):
            GridConfig(n_x=32, n_t=1000, time_step_rule="explicit")
        with pytest.raises(ValidationError):
            GridConfig(n_x=32, n_t=1025, time_step_rule="nt-equals-nx-squared")

    def test_initial_row(self):
        cfg = GridConfig(n_x=8, n_t=64, time_step_rule="explicit")
        row = cfg.initial_row()
        assert row[0] == 0.0 and row[-1] == 0.0
        assert np.all(row[1:-1] == 6.0)


class TestDrift:
    def test_constant_interior_in_kernel(self):
        cfg = GridConfig(n_x=16, n_t=256, time_step_rule="explicit")
        state = np.zeros(cfg.n_sites)
        state[1:-1] = 4.2
        out = apply_drift(state, cfg)
        # sites whose full stencil lies in the constant region
        assert np.all(out[2:-2] == 0.0)
        assert out[0] == 0.0 and out[-1] == 0.0

    def test_unit_vector_stencil(self):
        cfg = GridConfig(n_x=16, n_t=256, time_step_rule="explicit")
        e_k = np.zeros(cfg.n_sites)
        k = 7
        e_k[k] = 1.0
        out = apply_drift(e_k, cfg)
        c = 0.5 * cfg.n_x ** 2  # L = 1 so 1/(2 dx^2) = n_x^2 / 2
        assert out[k] == -2.0 * c
        assert out[k - 1] == c and out[k + 1] == c

    def test_row_sums_vanish_on_interior(self):
        cfg = GridConfig(n_x=16, n_t=256, time_step_rule="explicit")
        # each interior row of the stencil sums to zero: drift of the
        # all-ones vector vanishes away from the boundary rows
        ones = np.ones(cfg.n_sites)
        out = apply_drift(ones, cfg)
        assert np.all(out[2:-2] == 0.0)

    def test_length_mismatch(self):
        cfg = GridConfig(n_x=16, n_t=256, time_step_rule="explicit")
        with pytest.raises(ValidationError):
            apply_drift(np.zeros(7), cfg)


class TestEmStep:
    def test_zero_model_zero_state_fixed_point(self):
        cfg = GridConfig(n_x=16, n_t=256, time_step_rule="explicit")
        state = np.zeros(cfg.n_sites)
        gauss = np.random.default_rng(0).standard_normal(cfg.n_sites)
        out = em_step(state, cfg, builtin_model("zero"), gauss)
        assert np.array_equal(out, state)

    def test_zero_model_noise_term_vanishes(self):
        cfg = GridConfig(n_x=16, n_t=256, time_step_rule="explicit")
        rng = np.random.default_rng(1)
        state = np.zeros(cfg.n_sites)
        state[1:-1] = rng.uniform(0, 6, cfg.n_x - 1)
        gauss = rng.standard_normal(cfg.n_sites)
        out = em_step(state, cfg, builtin_model("zero"), gauss)
        expected = state + cfg.dt * apply_drift(state, cfg)
        expected[0] = expected[-1] = 0.0
        assert np.allclose(out, expected, rtol=0, atol=0)

    def test_constant_interior_site_unchanged(self):
        cfg = GridConfig(n_x=16, n_t=256, time_step_rule="explicit")
        state = cfg.initial_row()
        out = em_step(state, cfg, builtin_model("zero"), np.zeros(cfg.n_sites))
        # deep-interior site: both neighbours interior, second difference 0
        assert out[cfg.n_x // 2] == 6.0

    def test_divergence_reports_step(self):
        cfg = GridConfig(n_x=16, n_t=256, time_step_rule="explicit")
        blow = custom_model(lambda u: np.full_like(u, 1e300), lipschitz=0.0)
        state = cfg.initial_row()
        gauss = np.full(cfg.n_sites, 1e10)
        with pytest.raises(SimulationDiverged) as err:
            em_step(state, cfg, blow, gauss, step_index=17)
        assert err.value.step_index == 17


class TestRollingField:
    def test_residency_and_eviction(self):
        ring = RollingField(n_sites=5, depth=3)
        for j in range(5):
            row = np.zeros(5)
            row[2] = j
            ring.append(row)
        assert ring.newest_index == 4
        assert ring.row(4)[2] == 4.0
        assert ring.row(2)[2] == 2.0
        with pytest.raises(WindowUnavailable):
            ring.row(1)  # evicted
        with pytest.raises(WindowUnavailable):
            ring.row(5)  # future
        win = ring.window(2, 4, 1, 3)
        assert win.shape == (3, 3)
        assert list(win[:, 1]) == [2.0, 3.0, 4.0]

    def test_boundary_zeros_preserved(self):
        cfg = GridConfig(n_x=16, n_t=256, time_step_rule="explicit")
        seen = []

        def observer(j, ring):
            row = ring.row(j)
            seen.append((row[0], row[-1]))

        simulate_stream(cfg, builtin_model("sigma2"), NoiseSpec(3, 0),
                        observer=observer)
        assert all(pair == (0.0, 0.0) for pair in seen)


class TestStream:
    def test_zero_model_matches_deterministic_exactly(self):
        cfg = GridConfig(n_x=2 ** 7, n_t=2 ** 14)
        final = {}

        def observer(j, ring):
            if j == cfg.n_t:
                final["row"] = ring.row(j).copy()

        simulate_stream(cfg, builtin_model("zero"), NoiseSpec(5, 0), observer=observer)
        det = solve_deterministic(cfg)
        assert np.array_equal(final["row"], det.row(cfg.n_t))

    def test_bit_identical_summaries_for_fixed_seed(self):
        cfg = GridConfig(n_x=2 ** 5, n_t=2 ** 10)
        model = builtin_model("sigma1")
        s1 = simulate_stream(cfg, model, NoiseSpec(99, 4))
        s2 = simulate_stream(cfg, model, NoiseSpec(99, 4))
        assert (s1.min_value, s1.max_value, s1.steps) == \
               (s2.min_value, s2.max_value, s2.steps)

    def test_distinct_realizations_differ(self):
        cfg = GridConfig(n_x=2 ** 5, n_t=2 ** 10)
        model = builtin_model("sigma2")
        s0 = simulate_stream(cfg, model, NoiseSpec(7, 0))
        s1 = simulate_stream(cfg, model, NoiseSpec(7, 1))
        assert (s0.min_value, s0.max_value) != (s1.min_value, s1.max_value)


class TestDeterministicSolve:
    def test_initial_row(self):
        cfg = GridConfig(n_x=2 ** 5, n_t=2 ** 10)
        det = solve_deterministic(cfg)
        row0 = det.row(0)
        assert np.all(row0[1:-1] == 6.0) and row0[0] == 0.0 and row0[-1] == 0.0

    def test_final_row_in_range_and_symmetric(self):
        cfg = GridConfig(n_x=2 ** 6, n_t=2 ** 12)
        det = solve_deterministic(cfg)
        row = det.row(cfg.n_t)
        interior = row[1:-1]
        assert np.all(interior > 0.0) and np.all(interior < 6.0)
        assert np.allclose(row, row[::-1], rtol=0, atol=1e-12)

    def test_matches_fourier_series_oracle(self):
        cfg = GridConfig(n_x=2 ** 7, n_t=2 ** 14)
        det = solve_deterministic(cfg)
        j = round(0.1 * cfg.n_t)
        t = j * cfg.dt
        x = np.arange(cfg.n_sites) * cfg.dx
        oracle = dirichlet_series(x, t)
        assert np.max(np.abs(det.row(j) - oracle)) < 1e-2
        mid = cfg.n_x // 2
        assert det.row(j)[mid] == pytest.approx(dirichlet_series(0.5, t), abs=1e-2)

    def test_checkpointed_access_equals_full(self):
        cfg = GridConfig(n_x=2 ** 5, n_t=2 ** 10)
        full = solve_deterministic(cfg)
        ckpt = solve_deterministic(cfg, max_full_bytes=1024)  # force checkpoint mode
        assert ckpt.stride > 1
        for j in (0, 1, 17, 513, cfg.n_t):
            assert np.array_equal(full.row(j), ckpt.row(j))
        win_a = full.window(100, 140, 3, 9)
        win_b = ckpt.window(100, 140, 3, 9)
        assert np.array_equal(win_a, win_b)


def test_monte_carlo_mean_tracks_deterministic():
    # pointwise sample mean at t = T/2 within 5 standard errors of the
    # zero-noise solution, 100 fixed-seed realizations
    cfg = GridConfig(n_x=2 ** 5, n_t=2 ** 10)
    model = builtin_model("sigma1")
    half = cfg.n_t // 2
    rows = []
    for r in range(100):
        grab = {}

        def observer(j, ring, grab=grab):
            if j == half:
                grab["row"] = ring.row(j).copy()

        simulate_stream(cfg, model, NoiseSpec(314159, r), observer=observer)
        rows.append(grab["row"])
    rows = np.array(rows)
    det = solve_deterministic(cfg).row(half)
    mean = rows.mean(axis=0)
    se = rows.std(axis=0, ddof=1) / np.sqrt(rows.shape[0])
    interior = slice(1, -1)
    assert np.all(np.abs(mean[interior] - det[interior]) < 5.0 * se[interior])
