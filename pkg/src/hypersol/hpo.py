"""Hyperparameter search and goal-oriented sensitivity analysis.

A random search samples full training configurations, trains each on a shared
dataset under a fixed budget, and logs one JSON record per trial (append-only,
crash-safe). Post-processing computes, per hyperparameter, a normalized HSIC
dependence index between the sampled values and the binary goal "error in the
best decile". The indices tell which hyperparameters matter for reaching good
accuracy, so a second, restricted search can freeze the unimportant ones to
cost-effective values (small fixed architecture) and sample only the top few.

HSIC estimator: biased V-statistic on centered Gram matrices, Gaussian kernel
with median-heuristic bandwidth for numeric hyperparameters (log-space for
log-sampled ones), discrete delta kernel for categorical/boolean ones,
normalized cross-covariance style: HSIC(h, Z) / sqrt(HSIC(h, h) HSIC(Z, Z)).
Uncertainty comes from bootstrap resampling of trials; an optional permutation
test provides p-values against the independence null.
"""

from __future__ import annotations

import json
import time
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .surrogate import (
    Dataset,
    TrainConfig,
    TrainingDiverged,
    train,
)

# Sampled dimensions of the search space. Kinds: int / float (uniform),
# logfloat (log-uniform), cat (uniform over options), bool.
SEARCH_SPACE = {
    "n_layers": ("int", 1, 10),
    "n_units": ("int", 7, 512),
    "activation": ("cat", ("elu", "relu", "tanh", "sigmoid")),
    "dropout": ("bool",),
    "dropout_rate": ("float", 0.0, 1.0),
    "batch_norm": ("bool",),
    "learning_rate": ("logfloat", 1e-6, 1e-2),
    "weights_reg_l1": ("logfloat", 1e-6, 0.1),
    "weights_reg_l2": ("logfloat", 1e-6, 0.1),
    "bias_reg_l1": ("logfloat", 1e-6, 0.1),
    "bias_reg_l2": ("logfloat", 1e-6, 0.1),
    "batch_size": ("int", 1, 500),
    "loss": ("cat", ("l2", "l1")),
    "optimizer": ("cat", ("adam", "sgd", "rmsprop", "adagrad", "nadam")),
    "amsgrad": ("bool",),
    "moment_decay_1": ("float", 0.8, 1.0),
    "moment_decay_2": ("float", 0.8, 1.0),
    "centered": ("bool",),
    "nesterov": ("bool",),
    "momentum": ("float", 0.5, 0.99),
    "n_seeds": ("int", 1, 10),
    "vbsw_sampling": ("bool",),
    "vbsw_weighting": ("bool",),
}

# Frozen values for dimensions excluded from a restricted search: the found
# cost-effective architecture plus neutral training settings.
FROZEN_VALUES = {
    "n_layers": 5,
    "n_units": 20,
    "activation": "tanh",
    "dropout": False,
    "dropout_rate": 0.0,
    "batch_norm": False,
    "learning_rate": 1e-3,
    "weights_reg_l1": 0.0,
    "weights_reg_l2": 0.0,
    "bias_reg_l1": 0.0,
    "bias_reg_l2": 0.0,
    "batch_size": 100,
    "loss": "l2",
    "optimizer": "adam",
    "amsgrad": False,
    "moment_decay_1": 0.9,
    "moment_decay_2": 0.999,
    "centered": False,
    "nesterov": False,
    "momentum": 0.9,
    "n_seeds": 1,
    "vbsw_sampling": False,
    "vbsw_weighting": False,
}

# Full-scale search size used for the production analysis; desk runs default
# to ~100 trials.
FULL_SCALE_N_TRIALS = 3000


@dataclass(frozen=True)
class SearchBudget:
    """Per-trial training budget.

    ``epochs`` is the nominal epoch count; trials with tiny batch sizes are
    additionally capped at ``steps_cap`` optimizer steps per restart so a
    batch_size=1 draw cannot dominate the search's wall-clock. Sampled
    ``n_seeds`` values above ``seeds_cap`` are trained with ``seeds_cap``
    restarts (the sampled value is still what the analysis sees). Budget
    capping is deterministic, so searches are reproducible.
    """

    n_train: int | None = 4000      # training-subset rows (None = all)
    n_test: int | None = 1000
    epochs: int = 20
    steps_cap: int = 20000
    seeds_cap: int | None = 3

    def epochs_for(self, batch_size: int, n_rows: int) -> int:
        by_steps = max(1, (self.steps_cap * batch_size) // max(n_rows, 1))
        return max(1, min(self.epochs, by_steps))


@dataclass
class TrialRecord:
    index: int
    seed: int
    config: TrainConfig
    error: float                 # +inf when diverged
    diverged: bool
    seconds: float
    phase: str = "full"          # "full" | "restricted"

    def to_json(self) -> str:
        cfg = {k: getattr(self.config, k) for k in SEARCH_SPACE}
        cfg["epochs"] = self.config.epochs
        cfg["seed"] = self.config.seed
        return json.dumps({
            "trial": self.index, "seed": self.seed, "error": self.error,
            "diverged": self.diverged, "seconds": round(self.seconds, 4),
            "phase": self.phase, "config": cfg,
        })

    @classmethod
    def from_json(cls, line: str) -> "TrialRecord":
        doc = json.loads(line)
        return cls(doc["trial"], doc["seed"], TrainConfig(**doc["config"]),
                   float(doc["error"]), doc["diverged"], doc["seconds"],
                   doc.get("phase", "full"))


def sample_config(rng: np.random.Generator,
                  space: dict | None = None,
                  frozen: dict | None = None) -> TrainConfig:
    """Draw one configuration; dimensions in ``frozen`` are not sampled."""
    space = SEARCH_SPACE if space is None else space
    values = dict(FROZEN_VALUES)
    for name, spec in space.items():
        if frozen is not None and name in frozen:
            values[name] = frozen[name]
            continue
        kind = spec[0]
        if kind == "int":
            values[name] = int(rng.integers(spec[1], spec[2] + 1))
        elif kind == "float":
            values[name] = float(rng.uniform(spec[1], spec[2]))
        elif kind == "logfloat":
            values[name] = float(np.exp(rng.uniform(np.log(spec[1]),
                                                    np.log(spec[2]))))
        elif kind == "cat":
            values[name] = spec[1][int(rng.integers(len(spec[1])))]
        elif kind == "bool":
            values[name] = bool(rng.integers(2))
        else:
            raise ValueError(f"unknown space kind {kind!r} for {name}")
    return TrainConfig(**values)


def _subset(ds: Dataset, n: int | None) -> Dataset:
    if n is None or n >= len(ds):
        return ds
    return Dataset(ds.inputs[:n], ds.targets[:n], dict(ds.meta))


def _run_trials(train_set, test_set, n_trials, budget, seed, log_path,
                phase, frozen):
    tr = _subset(train_set, budget.n_train)
    te = _subset(test_set, budget.n_test)
    rng = np.random.default_rng(seed)
    records = []
    log = open(log_path, "a") if log_path is not None else None
    try:
        for i in range(n_trials):
            trial_seed = int(rng.integers(2**31))
            cfg = sample_config(rng, frozen=frozen)
            cfg = replace(cfg, epochs=budget.epochs_for(cfg.batch_size, len(tr)),
                          seed=trial_seed)
            run_cfg = cfg
            if budget.seeds_cap is not None and cfg.n_seeds > budget.seeds_cap:
                run_cfg = replace(cfg, n_seeds=budget.seeds_cap)
            t0 = time.perf_counter()
            try:
                with np.errstate(all="ignore"):
                    _, report = train(tr, te, run_cfg)
                err, div = report.final_test_error, False
                if not np.isfinite(err):
                    err, div = float("inf"), True
            except TrainingDiverged:
                err, div = float("inf"), True
            rec = TrialRecord(i, trial_seed, cfg, err, div,
                              time.perf_counter() - t0, phase)
            records.append(rec)
            if log is not None:
                log.write(rec.to_json() + "\n")
                log.flush()
    finally:
        if log is not None:
            log.close()
    return records


def random_search(train_set: Dataset, test_set: Dataset, n_trials: int,
                  budget: SearchBudget | None = None, seed: int = 0,
                  log_path=None) -> list[TrialRecord]:
    """Uniform Monte Carlo search over the full space. Deterministic in seed."""
    budget = budget or SearchBudget()
    return _run_trials(train_set, test_set, n_trials, budget, seed, log_path,
                       "full", frozen=None)


def restricted_search(trials: list[TrialRecord], top_k: int,
                      train_set: Dataset, test_set: Dataset, n_trials: int,
                      budget: SearchBudget | None = None, seed: int = 0,
                      log_path=None) -> list[TrialRecord]:
    """Search only the ``top_k`` most sensitive dimensions of a prior search.

    Every other dimension is frozen to its cost-effective value (including
    the small found architecture: 5 hidden layers of 20 units). ``top_k = 0``
    therefore produces identical configurations that differ only in seed.
    """
    budget = budget or SearchBudget()
    if top_k > 0:
        report = hsic_indices(trials)
        keep = set(report.ranked_names()[:top_k])
    else:
        keep = set()
    frozen = {k: v for k, v in FROZEN_VALUES.items() if k not in keep}
    return _run_trials(train_set, test_set, n_trials, budget, seed, log_path,
                       "restricted", frozen=frozen)


def load_trials(path) -> list[TrialRecord]:
    out = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(TrialRecord.from_json(line))
    return out


def error_histogram(trials: list[TrialRecord], n_bins: int = 30):
    """Log-spaced histogram of finite trial errors -> (edges, counts)."""
    errs = np.array([t.error for t in trials])
    errs = errs[np.isfinite(errs) & (errs > 0)]
    lo, hi = errs.min(), errs.max()
    edges = np.logspace(np.log10(lo), np.log10(hi), n_bins + 1)
    counts, _ = np.histogram(errs, edges)
    return edges, counts


# ---------------------------------------------------------------------------
# HSIC sensitivity indices.
# ---------------------------------------------------------------------------

# Hyperparameters whose values are compared on a log scale (they were sampled
# log-uniformly, so distances are natural in log space).
_LOG_SCALE = {"learning_rate", "weights_reg_l1", "weights_reg_l2",
              "bias_reg_l1", "bias_reg_l2"}
_CATEGORICAL = {name for name, spec in SEARCH_SPACE.items()
                if spec[0] in ("cat", "bool")}


@dataclass
class HsicReport:
    names: list
    indices: np.ndarray          # normalized, in [0, 1]
    stderr: np.ndarray           # bootstrap standard error
    percentile: float
    threshold: float             # error value at the percentile
    n_trials: int
    n_bootstrap: int
    pvalues: np.ndarray | None = None

    def ranked_names(self) -> list:
        order = np.argsort(-self.indices)
        return [self.names[i] for i in order]

    def to_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write("hyperparameter,index,stderr" +
                    (",pvalue\n" if self.pvalues is not None else "\n"))
            for i, n in enumerate(self.names):
                row = f"{n},{self.indices[i]:.6e},{self.stderr[i]:.6e}"
                if self.pvalues is not None:
                    row += f",{self.pvalues[i]:.4f}"
                f.write(row + "\n")


def _gram(values: np.ndarray, name: str) -> np.ndarray | None:
    """Gram matrix for one hyperparameter column; None when degenerate."""
    if name in _CATEGORICAL:
        cats = np.asarray(values)
        if np.all(cats == cats[0]):
            return None
        return (cats[:, None] == cats[None, :]).astype(float)
    x = np.asarray(values, dtype=float)
    if name in _LOG_SCALE:
        x = np.log(np.maximum(x, 1e-300))
    d = np.abs(x[:, None] - x[None, :])
    nz = d[d > 0]
    if nz.size == 0:
        return None
    bw = np.median(nz)
    return np.exp(-(d * d) / (2.0 * bw * bw))


def _goal_gram(z: np.ndarray) -> np.ndarray | None:
    if np.all(z == z[0]):
        return None
    return (z[:, None] == z[None, :]).astype(float)


def _center(K: np.ndarray) -> np.ndarray:
    return K - K.mean(axis=0) - K.mean(axis=1)[:, None] + K.mean()


def _normalized_hsic(K: np.ndarray, L: np.ndarray) -> float:
    Kc, Lc = _center(K), _center(L)
    xy = float((Kc * Lc).mean())
    xx = float((Kc * Kc).mean())
    yy = float((Lc * Lc).mean())
    if xx <= 0.0 or yy <= 0.0:
        return 0.0
    return xy / np.sqrt(xx * yy)


def _column_values(trials, name):
    return [getattr(t.config, name) for t in trials]


def hsic_indices(trials: list[TrialRecord], percentile: float = 0.10,
                 n_bootstrap: int = 200, seed: int = 0,
                 names: list | None = None,
                 n_permutations: int = 0) -> HsicReport:
    """Normalized HSIC between each hyperparameter and the goal indicator.

    The goal variable is Z = 1{error <= percentile quantile of all trial
    errors}; diverged trials participate (with infinite error, hence Z = 0).
    Degenerate columns (a single observed value) get index 0 with a warning.
    With ``n_permutations`` > 0, per-hyperparameter permutation p-values for
    the independence null are attached.
    """
    if len(trials) < 2:
        raise ValueError("need at least two trials")
    names = list(SEARCH_SPACE) if names is None else list(names)
    errs = np.array([t.error for t in trials])
    thr = float(np.quantile(errs, percentile))
    z = (errs <= thr).astype(float)
    L = _goal_gram(z)
    if L is None:
        raise ValueError("goal variable is constant; adjust the percentile")

    rng = np.random.default_rng(seed)
    n = len(trials)
    indices = np.zeros(len(names))
    stderr = np.zeros(len(names))
    pvals = np.zeros(len(names)) if n_permutations else None
    for j, name in enumerate(names):
        K = _gram(np.array(_column_values(trials, name)), name)
        if K is None:
            warnings.warn(f"hyperparameter {name!r} is constant across "
                          "trials; index set to 0")
            continue
        indices[j] = _normalized_hsic(K, L)
        boots = np.empty(n_bootstrap)
        for b in range(n_bootstrap):
            idx = rng.integers(n, size=n)
            boots[b] = _normalized_hsic(K[np.ix_(idx, idx)],
                                        L[np.ix_(idx, idx)])
        stderr[j] = float(boots.std())
        if n_permutations:
            null = np.empty(n_permutations)
            for p in range(n_permutations):
                perm = rng.permutation(n)
                null[p] = _normalized_hsic(K, L[np.ix_(perm, perm)])
            pvals[j] = (1.0 + float((null >= indices[j]).sum())) \
                / (n_permutations + 1.0)
    return HsicReport(names, indices, stderr, percentile, thr, n, n_bootstrap,
                      pvals)
