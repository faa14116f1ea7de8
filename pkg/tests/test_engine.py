import math

import numpy as np
import pytest
from scipy.stats import chisquare, kstest, norm

from modesmc import (
    RestrictedKernel,
    RunConfig,
    WeightCollapseError,
    cell_tracking_error,
    estimate,
    estimate_log_partition,
    gaussian_mixture_target,
    index_family,
    index_partition,
    initialize,
    ising_target,
    mutate,
    resample,
    run,
    stage_kernel,
    tv_distance,
)
from modesmc import analytic_catalog
from modesmc import rng as rngmod
from modesmc.engine import ParticleSystem


def _cfg(space, **kw):
    args = dict(
        family=space.to_family(),
        partition=space.to_partition(),
        n_particles=kw.pop("n", 2000),
        mutation_steps=kw.pop("t", 20),
        seed=kw.pop("seed", 1),
    )
    args.update(kw)
    return RunConfig(**args)


class TestInitialize:
    def test_uniform_spins_chi_square(self):
        fam, part = ising_target(3, 1.0)
        cfg = RunConfig(family=fam, partition=part, n_particles=100_000,
                        mutation_steps=0, seed=11)
        system = initialize(cfg)
        idx = ((system.states > 0) << np.arange(3)).sum(axis=1)
        counts = np.bincount(idx, minlength=8)
        assert chisquare(counts).pvalue > 0.01
        se = math.sqrt((1 / 8) * (7 / 8) / cfg.n_particles)
        assert np.all(np.abs(counts / cfg.n_particles - 1 / 8) <= 3 * se)

    def test_fixed_seed_bit_identical(self):
        fam, part = gaussian_mixture_target(3)
        cfg = RunConfig(family=fam, partition=part, n_particles=5_000,
                        mutation_steps=0, seed=99)
        a, b = initialize(cfg), initialize(cfg)
        assert np.array_equal(a.states, b.states)
        assert np.array_equal(a.cells, b.cells)

    def test_gaussian_occupancy_matches_catalog(self):
        fam, part = gaussian_mixture_target(2)
        cat = analytic_catalog(fam)
        cfg = RunConfig(family=fam, partition=part, n_particles=100_000,
                        mutation_steps=0, seed=5)
        system = initialize(cfg)
        occ = np.bincount(system.cells, minlength=2) / cfg.n_particles
        expected = cat.cell_probability(0)
        se = math.sqrt(0.25 / cfg.n_particles)
        assert np.all(np.abs(occ - expected) <= 4 * se)

    def test_gaussian_projection_ks(self):
        # oracle: explicit cdf of the projected tempered mixture
        d = 2
        fam, part = gaussian_mixture_target(d)
        beta = fam.betas[0]
        m, sd = math.sqrt(d), 1.0 / math.sqrt(beta)
        tail = norm.cdf(-m / sd)

        def cdf_pos(s):  # cdf of the positive truncated component
            return (norm.cdf((s - m) / sd) - tail) / (1.0 - tail)

        def cdf(s):
            s = np.asarray(s, dtype=float)
            out = np.where(s > 0, 0.5 + 0.5 * cdf_pos(np.abs(s)),
                           0.5 * (1.0 - cdf_pos(np.abs(s))))
            return out

        cfg = RunConfig(family=fam, partition=part, n_particles=100_000,
                        mutation_steps=0, seed=21)
        system = initialize(cfg)
        s = system.states.sum(axis=1) / math.sqrt(d)
        assert kstest(s, cdf).pvalue > 0.01


class TestResample:
    def _system(self, n):
        states = np.arange(n)
        part = index_partition(np.zeros(n, dtype=int))
        return ParticleSystem(states=states, cells=part.classify(states), v=0), part

    def test_equal_weights_multinomial_chi_square(self):
        n, reps = 1000, 1000
        system, part = self._system(n)
        total = np.zeros(n)
        gen = rngmod.stream(3, 0, rngmod.REPLICATE)
        for _ in range(reps):
            out, _ = resample(system, np.ones(n), gen, part)
            total += np.bincount(out.states, minlength=n)
        assert chisquare(total).pvalue > 0.01

    def test_single_heavy_particle_takes_over(self):
        system, part = self._system(5)
        w = np.array([0.0, 0.0, 1.0, 0.0, 0.0])
        out, diag = resample(system, w, rngmod.stream(4, 0, 5), part)
        assert np.all(out.states == 2)
        assert diag.occupancy_after[0] == 5

    def test_two_to_one_weight_frequency(self):
        system, part = self._system(3)
        gen = rngmod.stream(5, 0, rngmod.REPLICATE)
        picks = 0
        reps = 4000
        for _ in range(reps):
            out, _ = resample(system, np.array([2.0, 1.0, 1.0]), gen, part)
            picks += (out.states == 0).sum()
        freq = picks / (3 * reps)
        se = math.sqrt(0.25 / (3 * reps))
        assert abs(freq - 0.5) <= 4 * se

    def test_all_zero_weights_collapse(self):
        system, part = self._system(4)
        with pytest.raises(WeightCollapseError) as err:
            resample(system, np.zeros(4), rngmod.stream(6, 0, 5), part)
        assert err.value.stage == 1

    def test_negative_weights_rejected(self):
        system, part = self._system(4)
        with pytest.raises(ValueError):
            resample(system, np.array([1.0, -1.0, 0.0, 0.0]),
                     rngmod.stream(7, 0, 5), part)

    def test_diagnostics_fields(self, space):
        fam, part = space.to_family(), space.to_partition()
        states = np.array([0, 1, 2, 3] * 25)
        system = ParticleSystem(states=states, cells=part.classify(states), v=0)
        w = fam.log_weight(1, states)
        out, diag = resample(system, np.exp(w), rngmod.stream(8, 0, 5), part)
        assert np.isclose(diag.resample_probs.sum(), 1.0, atol=1e-12)
        assert diag.occupancy_before.sum() == 100
        assert diag.occupancy_after.sum() == 100
        # w_hat agrees with the direct average of weights per cell
        for j in (0, 1):
            mask = system.cells == j
            assert np.isclose(diag.cell_weight_sums[j],
                              np.exp(w[mask]).sum() / 100)


class TestMutate:
    def test_zero_steps_is_identity(self, space):
        fam, part = space.to_family(), space.to_partition()
        states = np.array([0, 1, 2, 3])
        system = ParticleSystem(states=states, cells=part.classify(states), v=1)
        kernel = RestrictedKernel(stage_kernel(fam, 1), part)
        out = mutate(system, kernel, 0, rngmod.stream(9, 0, 5))
        assert np.array_equal(out.states, states)

    def test_cells_invariant(self):
        fam, part = gaussian_mixture_target(3)
        cfg = RunConfig(family=fam, partition=part, n_particles=3_000,
                        mutation_steps=0, seed=31)
        system = initialize(cfg)
        kernel = RestrictedKernel(stage_kernel(fam, 1), part)
        out = mutate(system, kernel, 15, rngmod.stream(10, 0, 5))
        assert np.array_equal(part.classify(out.states), system.cells)
        assert np.array_equal(out.cells, system.cells)

    def test_within_cell_law_reaches_conditional(self, space):
        # point starts, 50 restricted steps, compare to exact conditionals
        fam, part = space.to_family(), space.to_partition()
        n = 100_000
        states = np.concatenate([np.zeros(n // 2), np.full(n // 2, 2)]).astype(int)
        system = ParticleSystem(states=states, cells=part.classify(states), v=3)
        kernel = RestrictedKernel(stage_kernel(fam, 3), part)
        out = mutate(system, kernel, 50, rngmod.stream(11, 0, 5))
        for j, members in ((0, [0, 1]), (1, [2, 3])):
            got = np.bincount(out.states, minlength=4)[members]
            emp = got / got.sum()
            assert tv_distance(emp, space.conditional(3, j)) < 0.02

    def test_restricted_rwm_preserves_truncated_law(self):
        # start from the exact half-space conditional; a long restricted
        # random-walk run must keep the projected mean at the truncated
        # normal's value
        from scipy.stats import truncnorm

        d = 2
        fam, part = gaussian_mixture_target(d)
        beta = fam.betas[-1]
        gen = rngmod.stream(12, 0, 5)
        x = fam.sample_stage(fam.n_stages, 1_500, gen)
        keep = x.sum(axis=1) > 0  # one cell only
        x = x[keep]
        system = ParticleSystem(states=x, cells=part.classify(x), v=fam.n_stages)
        kernel = RestrictedKernel(stage_kernel(fam, fam.n_stages), part)
        out = mutate(system, kernel, 400, rngmod.stream(13, 0, 5))
        s = out.states.sum(axis=1) / math.sqrt(d)
        m, sd = math.sqrt(d), 1.0 / math.sqrt(beta)
        ref = truncnorm(a=-m / sd, b=np.inf, loc=m, scale=sd)
        # generous allowance: restricted-chain samples are autocorrelated
        assert abs(s.mean() - ref.mean()) < 8 * ref.std() / math.sqrt(s.size)


class TestRun:
    def test_no_stages_edge(self):
        fam = index_family(np.log([0.25, 0.75]), betas=(1.0,))
        part = index_partition(np.array([0, 1]))
        report = run(RunConfig(family=fam, partition=part, n_particles=500,
                               mutation_steps=5, seed=2))
        assert report.diagnostics == []
        assert report.log_z == 0.0
        assert report.final_states.shape == (500,)

    def test_worker_count_invariance_spin(self):
        fam, part = ising_target(5, 1.0)
        reports = [
            run(RunConfig(family=fam, partition=part, n_particles=2_000,
                          mutation_steps=10, seed=77, workers=w))
            for w in (1, 8)
        ]
        assert np.array_equal(reports[0].final_states, reports[1].final_states)
        for a, b in zip(reports[0].diagnostics, reports[1].diagnostics):
            assert np.array_equal(a.resample_probs, b.resample_probs)
            assert a.log_z_increment == b.log_z_increment

    def test_worker_count_invariance_real(self):
        fam, part = gaussian_mixture_target(3)
        reports = [
            run(RunConfig(family=fam, partition=part, n_particles=1_500,
                          mutation_steps=12, seed=78, workers=w))
            for w in (1, 6)
        ]
        assert np.array_equal(reports[0].final_states, reports[1].final_states)

    def test_count_path_deterministic(self, space):
        a = run(_cfg(space, seed=5))
        b = run(_cfg(space, seed=5))
        assert np.array_equal(a.final_states, b.final_states)
        assert a.log_z == b.log_z

    def test_count_and_particle_paths_share_law(self, space):
        # same config through both engines: per-stage mean resampling
        # probabilities agree within Monte Carlo error
        seeds = range(40)
        means = {}
        for mode in ("counts", "particles"):
            probs = [
                run(_cfg(space, n=2_000, t=10, seed=rngmod.substream_seed(13, s),
                         engine_mode=mode)).diagnostics[-1].resample_probs[0]
                for s in seeds
            ]
            means[mode] = (np.mean(probs), np.std(probs, ddof=1) / math.sqrt(len(probs)))
        gap = abs(means["counts"][0] - means["particles"][0])
        se = math.hypot(means["counts"][1], means["particles"][1])
        assert gap <= 4 * se

    def test_count_and_particle_log_z_distributions_match(self, space):
        # two-sample KS on the normalizing-constant estimator across seeds
        from scipy.stats import ks_2samp

        samples = {}
        for mode in ("counts", "particles"):
            samples[mode] = [
                run(_cfg(space, n=2_000, t=10, seed=rngmod.substream_seed(14, s),
                         engine_mode=mode)).log_z
                for s in range(150)
            ]
        assert ks_2samp(samples["counts"], samples["particles"]).pvalue > 0.01

    def test_restricted_toggle_allows_crossing(self):
        fam, part = ising_target(5, 1.0)
        cfg = RunConfig(family=fam, partition=part, n_particles=500,
                        mutation_steps=30, seed=3, restricted=False)
        report = run(cfg)  # smoke: unrestricted baseline stays runnable
        assert report.final_cells.shape == (500,)

    def test_conservation_every_stage(self, space):
        for cfg in (_cfg(space, seed=9), _cfg(space, seed=9, engine_mode="particles")):
            report = run(cfg)
            for d in report.diagnostics:
                assert abs(d.resample_probs.sum() - 1.0) < 1e-12
                assert d.occupancy_before.sum() == cfg.n_particles
                assert d.occupancy_after.sum() == cfg.n_particles


class TestEstimators:
    def test_constant_function(self, space):
        report = run(_cfg(space, seed=17))
        assert estimate(report, lambda x: np.ones(x.shape[0])) == 1.0

    def test_out_of_range_rejected(self, space):
        report = run(_cfg(space, seed=17))
        with pytest.raises(ValueError):
            estimate(report, lambda x: np.full(x.shape[0], 1.5))

    def test_symmetric_spin_sign_is_centered(self):
        fam, part = ising_target(5, 1.0)
        report = run(RunConfig(family=fam, partition=part, n_particles=4_000,
                               mutation_steps=25, seed=19))
        value = estimate(report, lambda x: np.sign(x.sum(axis=1)))
        assert abs(value) < 0.15  # ~4 resampling-accumulated standard errors

    def test_halfspace_indicator_centered(self):
        fam, part = gaussian_mixture_target(3)
        report = run(RunConfig(family=fam, partition=part, n_particles=4_000,
                               mutation_steps=25, seed=23))
        value = estimate(report, lambda x: (x.sum(axis=1) > 0).astype(float))
        assert abs(value - 0.5) < 0.08

    def test_log_partition_single_flat_stage(self):
        c = 2.5
        fam = index_family(np.full(3, 2.0 * math.log(c)), betas=(0.5, 1.0))
        part = index_partition(np.zeros(3, dtype=int))
        report = run(RunConfig(family=fam, partition=part, n_particles=100,
                               mutation_steps=0, seed=3))
        assert np.isclose(estimate_log_partition(report), math.log(c), atol=1e-12)

    def test_log_partition_reference_family(self, space):
        exact = space.log_z(3) - space.log_z(0)
        hits = 0
        for s in range(20):
            report = run(_cfg(space, n=10_000, t=100,
                              seed=rngmod.substream_seed(29, s)))
            hits += abs(report.log_z - exact) / abs(exact) <= 0.05
        assert hits >= 19

    def test_log_partition_gaussian_d1(self):
        fam, part = gaussian_mixture_target(1, betas=(0.25, 0.5, 1.0))
        cat = analytic_catalog(fam)
        exact = cat.log_z(1.0) - cat.log_z(0.25)
        report = run(RunConfig(family=fam, partition=part, n_particles=10_000,
                               mutation_steps=40, seed=31))
        assert abs(report.log_z - exact) / abs(exact) <= 0.05


class TestCellTracking:
    def test_symmetric_spin_tracking_small(self):
        fam, part = ising_target(5, 1.0)
        cat = analytic_catalog(fam)
        report = run(RunConfig(family=fam, partition=part, n_particles=10_000,
                               mutation_steps=25, seed=37))
        errs = cell_tracking_error(report, cat)
        assert errs.shape == (5,)
        assert errs.max() < 5 * math.sqrt(5 * 0.25 / 10_000)

    def test_single_particle_degenerate(self, space):
        report = run(_cfg(space, n=1, t=5, seed=41))
        errs = cell_tracking_error(report, space)
        bound = max(
            1 - space.cell_probs(v).min() for v in range(1, space.n_stages + 1)
        )
        assert errs.max() <= bound + 1e-12

    def test_works_against_enumerated_space(self, space):
        report = run(_cfg(space, n=50_000, t=20, seed=43))
        errs = cell_tracking_error(report, space)
        assert errs.max() < 0.02


class TestTrace:
    def test_resampled_trace_counts(self, space):
        report = run(_cfg(space, n=1_000, t=5, seed=47, record_resampled=True))
        assert len(report.resampled_trace) == space.n_stages
        for counts in report.resampled_trace:
            assert counts.sum() == 1_000
