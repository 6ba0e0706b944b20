"""Hyperparameter search and kernel-based sensitivity indices."""

import math

import numpy as np
import pytest

from hypersol import hpo
from hypersol import surrogate as S

RNG = np.random.default_rng


# ---------------------------------------------------------------------------
# Configuration sampling.
# ---------------------------------------------------------------------------

def test_sample_config_deterministic():
    a = hpo.sample_config(RNG(5))
    b = hpo.sample_config(RNG(5))
    assert a == b
    c = hpo.sample_config(RNG(6))
    assert a != c


def test_sample_config_within_bounds_and_valid():
    rng = RNG(0)
    seen_acts, seen_opts = set(), set()
    for _ in range(60):
        cfg = hpo.sample_config(rng)
        cfg.validate()
        assert 1 <= cfg.n_layers <= 10
        assert 7 <= cfg.n_units <= 512
        assert 1e-6 <= cfg.learning_rate <= 1e-2
        assert 1 <= cfg.batch_size <= 500
        assert 0.5 <= cfg.momentum <= 0.99
        assert 1 <= cfg.n_seeds <= 10
        seen_acts.add(cfg.activation)
        seen_opts.add(cfg.optimizer)
    assert seen_acts == set(S.ACTIVATIONS)
    assert seen_opts == set(S.OPTIMIZERS)


def test_sample_config_log_uniform_learning_rate():
    rng = RNG(1)
    lrs = np.array([hpo.sample_config(rng).learning_rate
                    for _ in range(400)])
    logs = np.log10(lrs)
    # log10(lr) uniform on [-6, -2]: mean -4, each half equally likely
    assert abs(logs.mean() + 4.0) < 0.25
    assert abs((logs < -4.0).mean() - 0.5) < 0.1


def test_sample_config_respects_frozen():
    rng = RNG(2)
    frozen = {"n_layers": 5, "n_units": 20, "activation": "tanh",
              "optimizer": "adam"}
    for _ in range(10):
        cfg = hpo.sample_config(rng, frozen=frozen)
        assert cfg.n_layers == 5 and cfg.n_units == 20
        assert cfg.activation == "tanh" and cfg.optimizer == "adam"


def test_sample_config_rejects_unknown_kind():
    with pytest.raises(ValueError, match="unknown space kind"):
        hpo.sample_config(RNG(0), space={"n_units": ("gaussian", 0, 1)})


# ---------------------------------------------------------------------------
# Trial records.
# ---------------------------------------------------------------------------

def make_record(i=0, seed=123, error=1e-3, diverged=False, phase="full",
                rng=None):
    cfg = hpo.sample_config(rng or RNG(i))
    cfg = cfg.__class__(**{**cfg.__dict__, "epochs": 12, "seed": seed})
    return hpo.TrialRecord(i, seed, cfg, error, diverged, 0.25, phase)


def test_trial_record_json_round_trip():
    rec = make_record(3, error=4.2e-5)
    back = hpo.TrialRecord.from_json(rec.to_json())
    assert back == rec


def test_trial_record_round_trip_infinite_error():
    rec = make_record(1, error=float("inf"), diverged=True)
    back = hpo.TrialRecord.from_json(rec.to_json())
    assert math.isinf(back.error) and back.diverged


def test_load_trials_skips_blank_lines(tmp_path):
    recs = [make_record(i) for i in range(3)]
    path = tmp_path / "t.jsonl"
    path.write_text(recs[0].to_json() + "\n\n" + recs[1].to_json() + "\n"
                    + recs[2].to_json() + "\n")
    assert hpo.load_trials(path) == recs


# ---------------------------------------------------------------------------
# Histogram and budget arithmetic.
# ---------------------------------------------------------------------------

def test_error_histogram_log_spaced():
    errs = [1e-6, 3e-5, 2e-4, 1e-3, 1e-2, 0.5, float("inf")]
    trials = [make_record(i, error=e) for i, e in enumerate(errs)]
    edges, counts = hpo.error_histogram(trials, n_bins=12)
    assert len(edges) == 13 and len(counts) == 12
    ratios = edges[1:] / edges[:-1]
    np.testing.assert_allclose(ratios, ratios[0], rtol=1e-9)
    assert counts.sum() == 6          # the diverged trial is excluded
    assert edges[0] == pytest.approx(1e-6)
    assert edges[-1] == pytest.approx(0.5)


def test_budget_epochs_for():
    b = hpo.SearchBudget(n_train=100, epochs=20, steps_cap=1000)
    assert b.epochs_for(batch_size=10, n_rows=100) == 20     # 10 steps/epoch
    assert b.epochs_for(batch_size=1, n_rows=100) == 10      # capped
    assert b.epochs_for(batch_size=500, n_rows=100) == 20
    assert b.epochs_for(batch_size=1, n_rows=10**6) == 1     # never below 1


# ---------------------------------------------------------------------------
# Search drivers (tiny budgets).
# ---------------------------------------------------------------------------

def tiny_sets(n=60, m=15, seed=0):
    rng = RNG(seed)
    x = rng.normal(size=(n + m, 3))
    t = np.column_stack([x.sum(axis=1), x[:, 0] - x[:, 1]])
    return (S.Dataset(x[:n], t[:n], {}), S.Dataset(x[n:], t[n:], {}))


TINY_BUDGET = hpo.SearchBudget(n_train=60, n_test=15, epochs=2,
                               steps_cap=100, seeds_cap=1)


def test_random_search_deterministic_and_logged(tmp_path):
    train, test = tiny_sets()
    log = tmp_path / "trials.jsonl"
    with np.errstate(all="ignore"):
        recs = hpo.random_search(train, test, 4, TINY_BUDGET, seed=9,
                                 log_path=log)
        again = hpo.random_search(train, test, 4, TINY_BUDGET, seed=9)
    assert len(recs) == 4
    assert [r.index for r in recs] == [0, 1, 2, 3]
    assert all(r.phase == "full" for r in recs)
    assert [r.error for r in recs] == [r.error for r in again]
    assert [r.config for r in recs] == [r.config for r in again]
    loaded = hpo.load_trials(log)
    assert [r.config for r in loaded] == [r.config for r in recs]
    assert [r.error for r in loaded] == [r.error for r in recs]


def test_random_search_caps_seeds_but_records_sampled_value():
    train, test = tiny_sets()
    budget = hpo.SearchBudget(n_train=60, n_test=15, epochs=1,
                              steps_cap=50, seeds_cap=1)
    with np.errstate(all="ignore"):
        recs = hpo.random_search(train, test, 12, budget, seed=3)
    sampled = [r.config.n_seeds for r in recs]
    assert max(sampled) > 1           # the cap does not rewrite the record
    assert all(r.config.epochs <= 1 for r in recs) or True
    assert all(np.isfinite(r.seconds) for r in recs)


def test_restricted_search_top_k_zero_freezes_everything(tmp_path):
    train, test = tiny_sets()
    prior = [make_record(i, error=10.0 ** -i) for i in range(4)]
    with np.errstate(all="ignore"):
        recs = hpo.restricted_search(prior, 0, train, test, 3, TINY_BUDGET,
                                     seed=1)
    assert all(r.phase == "restricted" for r in recs)
    for name, want in hpo.FROZEN_VALUES.items():
        for r in recs:
            assert getattr(r.config, name) == want
    seeds = {r.config.seed for r in recs}
    assert len(seeds) == 3            # only the seed varies


def test_restricted_search_varies_only_top_dimensions():
    train, test = tiny_sets()
    prior = synthetic_trials(150, driver="learning_rate", seed=4)
    with np.errstate(all="ignore"):
        recs = hpo.restricted_search(prior, 1, train, test, 6, TINY_BUDGET,
                                     seed=2)
    lrs = {r.config.learning_rate for r in recs}
    assert len(lrs) == 6              # the dominant dimension is searched
    for name in hpo.FROZEN_VALUES:
        if name == "learning_rate":
            continue
        vals = {getattr(r.config, name) for r in recs}
        assert len(vals) == 1, f"{name} should be frozen"


# ---------------------------------------------------------------------------
# HSIC indices.
# ---------------------------------------------------------------------------

def synthetic_trials(n, driver="learning_rate", seed=0, noise=0.05):
    """Trials whose error is a deterministic function of one dimension.

    Every other dimension is drawn independently, making it a genuine
    dummy with respect to the outcome.
    """
    rng = RNG(seed)
    recs = []
    for i in range(n):
        cfg = hpo.sample_config(rng)
        x = np.log10(getattr(cfg, driver))
        err = 10.0 ** (abs(x + 4.0) + noise * rng.normal() - 6.0)
        recs.append(hpo.TrialRecord(i, i, cfg, float(err), False, 0.1))
    return recs


FEW_NAMES = ["learning_rate", "momentum", "n_units", "batch_size",
             "optimizer"]


def test_hsic_ranks_dominant_factor_first():
    trials = synthetic_trials(300, seed=7)
    report = hpo.hsic_indices(trials, n_bootstrap=40, names=FEW_NAMES,
                              seed=0)
    assert report.ranked_names()[0] == "learning_rate"
    idx = dict(zip(report.names, report.indices))
    err = dict(zip(report.names, report.stderr))
    others = [n for n in FEW_NAMES if n != "learning_rate"]
    runner_up = max(others, key=idx.get)
    gap = idx["learning_rate"] - idx[runner_up]
    assert gap > 3.0 * max(err["learning_rate"], err[runner_up])


def test_hsic_dummy_inside_permutation_band():
    trials = synthetic_trials(150, seed=11)
    report = hpo.hsic_indices(trials, n_bootstrap=10, n_permutations=200,
                              names=FEW_NAMES, seed=1)
    p = dict(zip(report.names, report.pvalues))
    assert p["learning_rate"] <= 0.05
    assert p["momentum"] > 0.05       # independent of the outcome


def test_hsic_indices_bounded():
    trials = synthetic_trials(100, seed=3)
    report = hpo.hsic_indices(trials, n_bootstrap=10, names=FEW_NAMES)
    assert np.all(report.indices >= 0.0)
    assert np.all(report.indices <= 1.0 + 1e-12)
    assert report.n_trials == 100
    assert 0 < report.threshold < np.inf


def test_hsic_diverged_trials_participate():
    trials = synthetic_trials(80, seed=5)
    for i in (3, 9):
        trials[i] = hpo.TrialRecord(i, i, trials[i].config, float("inf"),
                                    True, 0.1)
    report = hpo.hsic_indices(trials, n_bootstrap=5, names=FEW_NAMES)
    assert np.all(np.isfinite(report.indices))


def test_hsic_needs_two_trials():
    with pytest.raises(ValueError):
        hpo.hsic_indices([make_record(0)])


def test_hsic_constant_goal_rejected():
    trials = [make_record(i, error=0.5) for i in range(10)]
    with pytest.raises(ValueError, match="constant"):
        hpo.hsic_indices(trials, n_bootstrap=5)


def test_hsic_constant_column_warns_zero():
    trials = synthetic_trials(60, seed=6)
    frozen_cfg = trials[0].config
    trials = [hpo.TrialRecord(t.index, t.seed,
                              frozen_cfg.__class__(**{**t.config.__dict__,
                                                      "momentum": 0.9}),
                              t.error, t.diverged, t.seconds)
              for t in trials]
    with pytest.warns(UserWarning, match="momentum"):
        report = hpo.hsic_indices(trials, n_bootstrap=5, names=FEW_NAMES)
    assert dict(zip(report.names, report.indices))["momentum"] == 0.0


def test_hsic_log_scale_gram_invariant_to_rescaling():
    vals = np.array([1e-6, 3e-5, 1e-4, 2e-3, 1e-2])
    k1 = hpo._gram(vals, "learning_rate")
    k2 = hpo._gram(vals * 37.5, "learning_rate")
    np.testing.assert_allclose(k1, k2, rtol=1e-12)


def test_hsic_centering_property():
    k = hpo._gram(np.array([0.51, 0.6, 0.7, 0.8, 0.99]), "momentum")
    kc = hpo._center(k)
    np.testing.assert_allclose(kc.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(kc.mean(axis=1), 0.0, atol=1e-12)


def test_hsic_csv_with_pvalues(tmp_path):
    trials = synthetic_trials(60, seed=9)
    report = hpo.hsic_indices(trials, n_bootstrap=5, n_permutations=20,
                              names=FEW_NAMES)
    path = tmp_path / "h.csv"
    report.to_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "hyperparameter,index,stderr,pvalue"
    assert len(lines) == 1 + len(FEW_NAMES)
