"""Shared fixtures: the expensive artifacts are built once per session.

The suite trains one surrogate, runs each flow case once, and performs
one hyperparameter search; everything downstream (acceptance checks,
comparison tables, uncertainty propagation) reuses those objects.
"""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hypersol import hpo, hybrid, surrogate
from hypersol import config as cfgmod
from hypersol.thermo import toy_atmosphere

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def atm():
    return toy_atmosphere()


@pytest.fixture(scope="session")
def desk_dataset():
    """The 20k/2k closure sample every training-related test shares."""
    return surrogate.generate_dataset(20_000, 2_000, seed=0)


@pytest.fixture(scope="session")
def tuned_model(desk_dataset):
    """(model, report) from the shipped default training recipe.

    This is the session's reference surrogate; the recipe lives in the
    configuration defaults so the command line trains the same model.
    """
    train_set, test_set = desk_dataset
    tc = cfgmod.train_config_from(cfgmod.default_config())
    model, report = surrogate.train(train_set, test_set, tc)
    return model, report


@pytest.fixture(scope="session")
def quick_model(desk_dataset):
    """A cheap, rough surrogate for plumbing tests that only need shapes."""
    train_set, test_set = desk_dataset
    tc = surrogate.TrainConfig(activation="tanh", epochs=60, batch_size=500,
                               learning_rate=3e-3, seed=0)
    model, _ = surrogate.train(train_set, test_set, tc)
    return model


@pytest.fixture(scope="session")
def low_case():
    return hybrid.CaseConfig(n_radial=15, n_angular=50)


@pytest.fixture(scope="session")
def high_case():
    return hybrid.CaseConfig(n_radial=30, n_angular=100)


@pytest.fixture(scope="session")
def eq_low(low_case):
    return hybrid.run(hybrid.RunMode("eq"), low_case)


@pytest.fixture(scope="session")
def pg_low(low_case):
    return hybrid.run(hybrid.RunMode("pg"), low_case)


@pytest.fixture(scope="session")
def nn_low(low_case, tuned_model):
    model, _ = tuned_model
    return hybrid.run(hybrid.RunMode("nn", model=model), low_case)


@pytest.fixture(scope="session")
def warm_low(low_case, tuned_model):
    model, _ = tuned_model
    return hybrid.run_warm_start(low_case, model)


@pytest.fixture(scope="session")
def eq_high(high_case):
    return hybrid.run(hybrid.RunMode("eq"), high_case)


@pytest.fixture(scope="session")
def pg_high_gamma_diatomic(high_case):
    """Chemistry-neglected run with the diatomic Laplace constant."""
    return hybrid.run(hybrid.RunMode("pg", gamma=1.4), high_case)


@pytest.fixture(scope="session")
def search_budget():
    return hpo.SearchBudget(n_train=2_000, n_test=500, epochs=12,
                            steps_cap=4_000, seeds_cap=2)


@pytest.fixture(scope="session")
def search_trials(desk_dataset, search_budget):
    """One 100-trial random search shared by the search-facing tests."""
    train_set, test_set = desk_dataset
    sub_train = surrogate.Dataset(train_set.inputs[:2_000],
                                  train_set.targets[:2_000], train_set.meta)
    sub_test = surrogate.Dataset(test_set.inputs[:500],
                                 test_set.targets[:500], test_set.meta)
    return hpo.random_search(sub_train, sub_test, 100,
                             budget=search_budget, seed=0)


def rng(seed: int = 0) -> np.random.Generator:
    return np.random.default_rng(seed)
