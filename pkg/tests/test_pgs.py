"""Outer sampler loop, checkpointing, surface estimation, diagnostics."""

import numpy as np
import pytest

from coalpgs import belief, genealogy as gn
from coalpgs.config import RunConfig
from coalpgs.errors import ConfigError
from coalpgs.mutation import make_binary_model
from coalpgs.pgs import (PgsState, diagnostics, load_checkpoint, pgs_run,
                         relative_likelihood_surface, save_checkpoint)


@pytest.fixture
def small_problem(rng):
    g = gn.simulate_prior(5, rng)
    model = make_binary_model()
    aln = gn.simulate_data(g, model, 2.0, 3, rng)
    cfg = RunConfig(model="binary", theta0=2.0, iterations=12, burn_in=4,
                    thinning=2, particles=6, gibbs_rounds=2, seed=99)
    return aln, model, cfg


def test_pgs_run_sample_bookkeeping(small_problem):
    aln, model, cfg = small_problem
    state = pgs_run(aln, model, cfg)
    assert state.iteration == cfg.iterations
    # iterations 4, 6, 8, 10 are retained under burn_in=4, thinning=2
    assert len(state.samples) == 4
    assert len(state.sample_logliks) == 4
    for g in state.samples:
        g.validate()
        assert g.n == aln.n
    assert diagnostics(state)["retained_samples"] == 4


def test_pgs_run_deterministic(small_problem):
    aln, model, cfg = small_problem
    a = pgs_run(aln, model, cfg)
    b = pgs_run(aln, model, cfg)
    assert a.sample_logliks == b.sample_logliks
    for x, y in zip(a.samples, b.samples):
        assert x.events == y.events
        assert np.array_equal(x.times, y.times)


def test_checkpoint_resume_matches_uninterrupted(small_problem, tmp_path):
    aln, model, cfg = small_problem
    full = pgs_run(aln, model, cfg)

    cfg_half = RunConfig(**{**cfg.to_json(), "iterations": 6, "burn_in": 4})
    half = pgs_run(aln, model, cfg_half)
    ckpt = tmp_path / "state.json"
    save_checkpoint(ckpt, half, cfg.seed)
    resumed_state, seed = load_checkpoint(ckpt)
    assert seed == cfg.seed
    resumed = pgs_run(aln, model, cfg, state=resumed_state)

    assert resumed.sample_logliks == full.sample_logliks
    assert resumed.genealogy.events == full.genealogy.events
    assert np.array_equal(resumed.genealogy.times, full.genealogy.times)


def test_checkpoint_interval_writes_file(small_problem, tmp_path):
    aln, model, cfg = small_problem
    path = tmp_path / "auto.json"
    cfg2 = RunConfig(**{**cfg.to_json(), "checkpoint_path": str(path),
                        "checkpoint_interval": 5})
    pgs_run(aln, model, cfg2)
    state, seed = load_checkpoint(path)
    assert seed == cfg.seed
    assert state.iteration in (5, 10)


def test_state_json_roundtrip(small_problem):
    aln, model, cfg = small_problem
    state = pgs_run(aln, model, cfg)
    back = PgsState.from_json(state.to_json(cfg.seed))
    assert back.iteration == state.iteration
    assert back.sample_logliks == state.sample_logliks
    assert back.genealogy.events == state.genealogy.events


def test_surface_reference_point_is_exact_zero(small_problem):
    aln, model, cfg = small_problem
    state = pgs_run(aln, model, cfg)
    grid = [1.0, 2.0, 4.0]
    est = relative_likelihood_surface(state.samples, aln, model, grid, 2.0)
    j = grid.index(2.0)
    assert est.log_relative_likelihood[j] == 0.0
    assert est.stderr[j] == 0.0
    assert np.all(np.isfinite(est.log_relative_likelihood))


def test_surface_matches_direct_average(small_problem):
    aln, model, cfg = small_problem
    state = pgs_run(aln, model, cfg)
    theta = 3.0
    est = relative_likelihood_surface(state.samples, aln, model, [theta], 2.0)
    ratios = [np.exp(belief.log_likelihood(g, aln, model, theta)
                     - belief.log_likelihood(g, aln, model, 2.0))
              for g in state.samples]
    assert np.exp(est.log_relative_likelihood[0]) == pytest.approx(np.mean(ratios),
                                                                   rel=1e-10)


def test_surface_csv_format(small_problem):
    aln, model, cfg = small_problem
    state = pgs_run(aln, model, cfg)
    est = relative_likelihood_surface(state.samples, aln, model, [1.0, 2.0], 2.0)
    lines = est.to_csv().splitlines()
    assert lines[0] == "theta,log_rel_likelihood,stderr"
    assert len(lines) == 3
    for line in lines[1:]:
        theta, v, s = (float(x) for x in line.split(","))
        assert theta in (1.0, 2.0)


def test_surface_requires_samples(small_problem):
    aln, model, _ = small_problem
    with pytest.raises(ConfigError):
        relative_likelihood_surface([], aln, model, [1.0], 2.0)


def test_diagnostics_fields(small_problem):
    aln, model, cfg = small_problem
    state = pgs_run(aln, model, cfg)
    report = diagnostics(state)
    for key in ("iterations", "retained_samples", "structure_changes",
                "structure_change_rate", "pair_weight_evals", "lineage_evals",
                "gibbs_seconds", "csmc_seconds"):
        assert key in report
    assert 0.0 <= report["structure_change_rate"] <= 1.0
