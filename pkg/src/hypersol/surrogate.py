"""Feed-forward surrogate of the equilibrium closure map.

Dataset generation samples (rho, eps) over the closure's input rectangle and
labels each point with the full equilibrium output vector
(x_1..x_ns, p, T, cp, cv, c). The network is a plain multilayer perceptron
trained by minibatch first-order optimization; all five optimizer update
rules are implemented here from their standard formulations so training has
no framework dependency. Inference is a pure vectorized function of an
immutable model — the single batched forward pass per solver iteration is
what makes the hybrid run cheap.

Model quality is measured as a Frobenius-norm ratio in output-standardized
space (outputs span ~10 orders of magnitude, so a raw L2 ratio would be
dominated by pressure alone).
"""

from __future__ import annotations

import json
import struct
import time
from dataclasses import dataclass, field

import numpy as np

from .equilibrium import equilibrate_fields
from .thermo import (
    AtmosphereSpec,
    TOY_ELEMENT_FRACTIONS,
    TOY_EPS_RANGE,
    TOY_RHO_RANGE,
    toy_atmosphere,
)

_BN_EPS = 1e-3           # batch-norm variance epsilon
_OPT_EPS = 1e-8          # adaptive-optimizer denominator epsilon
_MAGIC = b"MLPM"
_FORMAT_VERSION = 1

ACTIVATIONS = ("elu", "relu", "tanh", "sigmoid")
OPTIMIZERS = ("adam", "sgd", "rmsprop", "adagrad", "nadam")


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; carries the offending step's context."""

    def __init__(self, learning_rate, batch_index, epoch, seed_index):
        super().__init__(
            f"non-finite loss at epoch {epoch}, batch {batch_index} "
            f"(learning_rate={learning_rate:g}, restart {seed_index})"
        )
        self.learning_rate = learning_rate
        self.batch_index = batch_index
        self.epoch = epoch
        self.seed_index = seed_index


class ModelFormatError(ValueError):
    """Model file is corrupt, truncated, or from an unknown format version."""


class DatasetError(RuntimeError):
    """Dataset generation failed (excessive equilibrium failures)."""


# ---------------------------------------------------------------------------
# Activations.
# ---------------------------------------------------------------------------

def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "elu":
        return np.where(z > 0.0, z, np.expm1(np.minimum(z, 0.0)))
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    raise ValueError(f"unknown activation {name!r}")


def _act_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Derivative of the activation, given pre-activation z and output a."""
    if name == "elu":
        return np.where(z > 0.0, 1.0, a + 1.0)
    if name == "relu":
        return (z > 0.0).astype(z.dtype)
    if name == "tanh":
        return 1.0 - a * a
    if name == "sigmoid":
        return a * (1.0 - a)
    raise ValueError(f"unknown activation {name!r}")


# ---------------------------------------------------------------------------
# Scalers and the inference model.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AffineScaler:
    """Per-feature affine map x -> (x - shift) / scale."""

    shift: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, data: np.ndarray) -> "AffineScaler":
        """Standardization; constant columns get unit scale."""
        shift = data.mean(axis=0)
        scale = data.std(axis=0)
        scale = np.where(scale > 0.0, scale, 1.0)
        return cls(shift, scale)

    @classmethod
    def identity(cls, n: int) -> "AffineScaler":
        return cls(np.zeros(n), np.ones(n))

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (x - self.shift) / self.scale

    def inverse(self, x: np.ndarray) -> np.ndarray:
        return x * self.scale + self.shift


@dataclass(frozen=True)
class MlpModel:
    """Immutable inference-time network: affine layers + activations.

    ``weights[l]`` has shape (n_out, n_in); the forward recursion is
    h <- act(h @ W^T + b) for hidden layers and a plain affine final layer.
    Normalization layers used during training are folded into the affine
    parameters on export, so inference is deterministic by construction.
    ``input_low``/``input_high`` record the training input box (used by
    callers that must clamp out-of-domain queries).
    """

    weights: tuple
    biases: tuple
    activations: tuple              # one name per hidden layer
    in_scaler: AffineScaler
    out_scaler: AffineScaler
    input_low: np.ndarray | None = None
    input_high: np.ndarray | None = None

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise ValueError("weights/biases length mismatch")
        if len(self.activations) != len(self.weights) - 1:
            raise ValueError("need exactly one activation per hidden layer")
        for a in self.activations:
            if a not in ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")
        for l in range(1, len(self.weights)):
            if self.weights[l].shape[1] != self.weights[l - 1].shape[0]:
                raise ValueError(f"layer {l} input dim does not chain")

    @property
    def d_in(self) -> int:
        return self.weights[0].shape[1]

    @property
    def d_out(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


def forward_batch(model: MlpModel, inputs: np.ndarray) -> np.ndarray:
    """Vectorized forward pass over a batch of input rows. Pure function."""
    x = np.asarray(inputs, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.d_in:
        raise ValueError(f"expected (N, {model.d_in}) inputs, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite values in inputs")
    h = model.in_scaler.transform(x)
    last = len(model.weights) - 1
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        h = h @ w.T + b
        if l < last:
            h = _act(model.activations[l], h)
    return model.out_scaler.inverse(h)


# ---------------------------------------------------------------------------
# Datasets.
# ---------------------------------------------------------------------------

@dataclass
class Dataset:
    """Labeled sample of the closure map plus its sampling metadata."""

    inputs: np.ndarray      # (N, ne + 2): element fractions, rho, eps
    targets: np.ndarray     # (N, ns + 5): x_1..x_ns, p, T, cp, cv, c
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.inputs.shape[0]


DEFAULT_RANGES = {
    "rho": TOY_RHO_RANGE,           # uniform
    "eps": TOY_EPS_RANGE,           # log-uniform
    "elements": TOY_ELEMENT_FRACTIONS,
}

# The production-scale dataset sizes; desk runs use much smaller ones.
FULL_SCALE_N_TRAIN = 170_000
FULL_SCALE_N_TEST = 20_000


def _equilibrium_targets(z, rho, eps, atm):
    ys, Ts, ps, cps, cvs, cs, status = equilibrate_fields(z, rho, eps, atm)
    out = np.column_stack([ys, ps, Ts, cps, cvs, cs])
    return out, status


def generate_dataset(n_train: int, n_test: int,
                     atm: AtmosphereSpec | None = None,
                     ranges: dict | None = None,
                     seed: int = 0) -> tuple[Dataset, Dataset]:
    """Sample the closure domain and label with the equilibrium solver.

    rho is drawn uniformly and eps log-uniformly over their ranges; element
    fractions are fixed. Points where the equilibrium solve fails are
    resampled (and counted in the metadata); generation aborts if more than
    1% of all attempts fail, since that signals a domain/solver mismatch
    rather than bad luck.
    """
    atm = atm or toy_atmosphere()
    rng_spec = dict(DEFAULT_RANGES if ranges is None else ranges)
    zfix = np.asarray(rng_spec["elements"], dtype=float)
    rho_lo, rho_hi = rng_spec["rho"]
    eps_lo, eps_hi = rng_spec["eps"]
    rng = np.random.default_rng(seed)
    n = n_train + n_test

    def draw(k):
        rho = rng.uniform(rho_lo, rho_hi, k)
        eps = np.exp(rng.uniform(np.log(eps_lo), np.log(eps_hi), k))
        return rho, eps

    rho, eps = draw(n)
    z = np.tile(zfix, (n, 1))
    targets, status = _equilibrium_targets(z, rho, eps, atm)
    n_failed = 0
    bad = np.flatnonzero(status != 0)
    while bad.size:
        n_failed += bad.size
        if n_failed > max(1, 0.01 * n):
            raise DatasetError(
                f"{n_failed} equilibrium failures while generating {n} points"
            )
        rho_b, eps_b = draw(bad.size)
        rho[bad], eps[bad] = rho_b, eps_b
        tb, sb = _equilibrium_targets(z[bad], rho_b, eps_b, atm)
        targets[bad] = tb
        bad = bad[sb != 0]

    inputs = np.column_stack([z, rho, eps])
    meta = {
        "seed": seed,
        "ranges": {"rho": [rho_lo, rho_hi], "eps": [eps_lo, eps_hi],
                   "elements": zfix.tolist()},
        "distributions": {"rho": "uniform", "eps": "log-uniform"},
        "n_failed_resampled": n_failed,
        "atmosphere": atm.name,
    }
    train = Dataset(inputs[:n_train], targets[:n_train], dict(meta))
    test = Dataset(inputs[n_train:], targets[n_train:], dict(meta))
    return train, test


_DS_PREFIX = ("x_elem_", "rho", "epsilon", "x_", "p", "T", "cp", "cv", "c")


def dataset_columns(ne: int, ns: int) -> list[str]:
    return ([f"x_elem_{k + 1}" for k in range(ne)] + ["rho", "epsilon"]
            + [f"x_{i + 1}" for i in range(ns)] + ["p", "T", "cp", "cv", "c"])


def save_dataset_csv(ds: Dataset, path, ne: int | None = None) -> None:
    ne = ds.inputs.shape[1] - 2 if ne is None else ne
    ns = ds.targets.shape[1] - 5
    cols = dataset_columns(ne, ns)
    data = np.column_stack([ds.inputs, ds.targets])
    header = ",".join(cols)
    np.savetxt(path, data, delimiter=",", header=header, comments="",
               fmt="%.17g")


def load_dataset_csv(path, ne: int) -> Dataset:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Dataset(data[:, :ne + 2], data[:, ne + 2:], {"source": str(path)})


# ---------------------------------------------------------------------------
# Training configuration (full search-space field set).
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    """Every tunable of the training procedure, with its admissible range.

    Regularization strengths may be exactly 0 (feature off) or within their
    active range. ``vbsw_sampling``/``vbsw_weighting`` are accepted for
    search-space parity but are experimental and currently map to uniform
    sample weighting. ``lr_decay`` (an exponential per-epoch learning-rate
    schedule) is an extension beyond the searched dimensions; searches leave
    it at 1 (constant rate).
    """

    n_layers: int = 5                 # hidden layers, {1..10}; 0 = pure affine
                                      # (diagnostic use; searches sample >= 1)
    n_units: int = 20                 # {7..512}
    activation: str = "elu"
    dropout: bool = False
    dropout_rate: float = 0.0         # [0, 1]
    batch_norm: bool = False
    learning_rate: float = 1e-3       # [1e-6, 1e-2]
    weights_reg_l1: float = 0.0       # 0 or [1e-6, 0.1]
    weights_reg_l2: float = 0.0
    bias_reg_l1: float = 0.0
    bias_reg_l2: float = 0.0
    batch_size: int = 100             # {1..500}
    loss: str = "l2"                  # "l2" | "l1"
    optimizer: str = "adam"
    amsgrad: bool = False
    moment_decay_1: float = 0.9       # [0.8, 1]
    moment_decay_2: float = 0.999     # [0.8, 1]
    centered: bool = False            # rmsprop variant
    nesterov: bool = False            # sgd variant
    momentum: float = 0.9             # [0.5, 0.99]
    n_seeds: int = 1                  # {1..10} independent restarts
    vbsw_sampling: bool = False
    vbsw_weighting: bool = False
    epochs: int = 200
    lr_decay: float = 1.0             # per-epoch multiplicative factor, (0, 1]
    seed: int = 0

    def validate(self) -> None:
        def _in(v, lo, hi, name):
            if not (lo <= v <= hi):
                raise ValueError(f"{name}={v!r} outside [{lo}, {hi}]")

        _in(self.n_layers, 0, 10, "n_layers")
        _in(self.n_units, 7, 512, "n_units")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        _in(self.dropout_rate, 0.0, 1.0, "dropout_rate")
        _in(self.learning_rate, 1e-6, 1e-2, "learning_rate")
        for name in ("weights_reg_l1", "weights_reg_l2",
                     "bias_reg_l1", "bias_reg_l2"):
            v = getattr(self, name)
            if v != 0.0:
                _in(v, 1e-6, 0.1, name)
        _in(self.batch_size, 1, 500, "batch_size")
        if self.loss not in ("l2", "l1"):
            raise ValueError(f"loss must be 'l2' or 'l1', got {self.loss!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        _in(self.moment_decay_1, 0.8, 1.0, "moment_decay_1")
        _in(self.moment_decay_2, 0.8, 1.0, "moment_decay_2")
        _in(self.momentum, 0.5, 0.99, "momentum")
        _in(self.n_seeds, 1, 10, "n_seeds")
        if not (0.0 < self.lr_decay <= 1.0):
            raise ValueError("lr_decay must be in (0, 1]")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.dropout and self.dropout_rate >= 1.0:
            raise ValueError("dropout_rate must be < 1 when dropout is on")


# ---------------------------------------------------------------------------
# Trainable network (adds normalization/dropout to the inference model).
# ---------------------------------------------------------------------------

class _Network:
    """Mutable training-time network; exports to a folded MlpModel."""

    def __init__(self, cfg: TrainConfig, d_in: int, d_out: int,
                 rng: np.random.Generator):
        sizes = [d_in] + [cfg.n_units] * cfg.n_layers + [d_out]
        self.cfg = cfg
        self.W, self.b = [], []
        for l in range(len(sizes) - 1):
            fan_in, fan_out = sizes[l], sizes[l + 1]
            lim = np.sqrt(6.0 / (fan_in + fan_out))
            self.W.append(rng.uniform(-lim, lim, (fan_out, fan_in)))
            self.b.append(np.zeros(fan_out))
        self.n_hidden = cfg.n_layers
        if cfg.batch_norm:
            self.gamma = [np.ones(cfg.n_units) for _ in range(self.n_hidden)]
            self.beta = [np.zeros(cfg.n_units) for _ in range(self.n_hidden)]
            self.r_mean = [np.zeros(cfg.n_units) for _ in range(self.n_hidden)]
            self.r_var = [np.ones(cfg.n_units) for _ in range(self.n_hidden)]
        else:
            self.gamma = self.beta = self.r_mean = self.r_var = None

    # -- parameter bookkeeping (fixed order: all W, all b, all gamma, beta) --

    def params(self) -> list:
        out = self.W + self.b
        if self.cfg.batch_norm:
            out = out + self.gamma + self.beta
        return out

    def clone_params(self) -> list:
        state = [p.copy() for p in self.params()]
        if self.cfg.batch_norm:
            state += [m.copy() for m in self.r_mean]
            state += [v.copy() for v in self.r_var]
        return state

    def restore_params(self, state: list) -> None:
        live = self.params()
        for dst, src in zip(live, state):
            dst[...] = src
        if self.cfg.batch_norm:
            k = len(live)
            for l in range(self.n_hidden):
                self.r_mean[l][...] = state[k + l]
                self.r_var[l][...] = state[k + self.n_hidden + l]

    # -- forward/backward --

    def forward_eval(self, x: np.ndarray) -> np.ndarray:
        """Inference mode: running normalization statistics, no dropout."""
        h = x
        for l in range(self.n_hidden):
            z = h @ self.W[l].T + self.b[l]
            if self.cfg.batch_norm:
                z = self.gamma[l] * (z - self.r_mean[l]) \
                    / np.sqrt(self.r_var[l] + _BN_EPS) + self.beta[l]
            h = _act(self.cfg.activation, z)
        return h @ self.W[-1].T + self.b[-1]

    def loss_and_grads(self, x, t, masks=None, update_running=False):
        """Training-mode loss and gradients in parameter order.

        ``masks`` fixes the dropout pattern (gradient checks); by default
        dropout is off inside this pure function and applied by the caller's
        mask argument. Running statistics are only touched when
        ``update_running`` is set, keeping the loss a pure function of the
        parameters otherwise.
        """
        cfg = self.cfg
        B = x.shape[0]
        h = x
        caches = []
        for l in range(self.n_hidden):
            z = h @ self.W[l].T + self.b[l]
            if cfg.batch_norm:
                mu = z.mean(axis=0)
                var = z.var(axis=0)
                inv = 1.0 / np.sqrt(var + _BN_EPS)
                zhat = (z - mu) * inv
                zn = self.gamma[l] * zhat + self.beta[l]
                if update_running:
                    self.r_mean[l] = 0.99 * self.r_mean[l] + 0.01 * mu
                    self.r_var[l] = 0.99 * self.r_var[l] + 0.01 * var
            else:
                zhat = inv = None
                zn = z
            a = _act(cfg.activation, zn)
            caches.append((h, z, zhat, inv, zn, a))
            # the raw activation stays cached: activation derivatives are
            # reconstructed from it, so the mask must not contaminate it
            h = a if masks is None else a * masks[l]
        out = h @ self.W[-1].T + self.b[-1]

        diff = out - t
        nel = diff.size
        if cfg.loss == "l2":
            data_loss = float(np.sum(diff * diff)) / nel
            dout = 2.0 * diff / nel
        else:
            data_loss = float(np.sum(np.abs(diff))) / nel
            dout = np.sign(diff) / nel

        gW = [None] * len(self.W)
        gb = [None] * len(self.b)
        ggam = [None] * self.n_hidden if cfg.batch_norm else None
        gbet = [None] * self.n_hidden if cfg.batch_norm else None

        gW[-1] = dout.T @ h
        gb[-1] = dout.sum(axis=0)
        da = dout @ self.W[-1]
        for l in range(self.n_hidden - 1, -1, -1):
            hin, z, zhat, inv, zn, a = caches[l]
            if masks is not None:
                da = da * masks[l]
            dzn = da * _act_grad(cfg.activation, zn, a)
            if cfg.batch_norm:
                ggam[l] = (dzn * zhat).sum(axis=0)
                gbet[l] = dzn.sum(axis=0)
                dzh = dzn * self.gamma[l]
                dz = inv * (dzh - dzh.mean(axis=0)
                            - zhat * (dzh * zhat).mean(axis=0))
            else:
                dz = dzn
            gW[l] = dz.T @ hin
            gb[l] = dz.sum(axis=0)
            if l > 0:
                da = dz @ self.W[l]

        reg_loss = 0.0
        for l, w in enumerate(self.W):
            if cfg.weights_reg_l1:
                reg_loss += cfg.weights_reg_l1 * float(np.abs(w).sum())
                gW[l] = gW[l] + cfg.weights_reg_l1 * np.sign(w)
            if cfg.weights_reg_l2:
                reg_loss += cfg.weights_reg_l2 * float((w * w).sum())
                gW[l] = gW[l] + 2.0 * cfg.weights_reg_l2 * w
        for l, bb in enumerate(self.b):
            if cfg.bias_reg_l1:
                reg_loss += cfg.bias_reg_l1 * float(np.abs(bb).sum())
                gb[l] = gb[l] + cfg.bias_reg_l1 * np.sign(bb)
            if cfg.bias_reg_l2:
                reg_loss += cfg.bias_reg_l2 * float((bb * bb).sum())
                gb[l] = gb[l] + 2.0 * cfg.bias_reg_l2 * bb

        grads = gW + gb
        if cfg.batch_norm:
            grads = grads + ggam + gbet
        return data_loss + reg_loss, grads

    def export(self, in_scaler: AffineScaler, out_scaler: AffineScaler,
               input_low=None, input_high=None) -> MlpModel:
        """Fold normalization layers into the affine parameters."""
        W = [w.copy() for w in self.W]
        b = [bb.copy() for bb in self.b]
        if self.cfg.batch_norm:
            for l in range(self.n_hidden):
                k = self.gamma[l] / np.sqrt(self.r_var[l] + _BN_EPS)
                W[l] = k[:, None] * W[l]
                b[l] = k * (b[l] - self.r_mean[l]) + self.beta[l]
        return MlpModel(
            tuple(W), tuple(b),
            tuple([self.cfg.activation] * self.n_hidden),
            in_scaler, out_scaler,
            None if input_low is None else np.asarray(input_low, dtype=float),
            None if input_high is None else np.asarray(input_high, dtype=float),
        )


# ---------------------------------------------------------------------------
# Optimizers (standard update rules, no framework).
# ---------------------------------------------------------------------------

class _Optimizer:
    def __init__(self, cfg: TrainConfig, params: list):
        self.cfg = cfg
        self.lr = cfg.learning_rate
        self.t = 0
        self.slots = [
            {k: np.zeros_like(p) for k in self._slot_names()} for p in params
        ]

    def _slot_names(self):
        return ()

    def step(self, params: list, grads: list) -> None:
        self.t += 1
        for p, g, s in zip(params, grads, self.slots):
            self._update(p, g, s)


class _Sgd(_Optimizer):
    def _slot_names(self):
        return ("v",)

    def _update(self, p, g, s):
        c = self.cfg
        s["v"][...] = c.momentum * s["v"] - self.lr * g
        if c.nesterov:
            p += c.momentum * s["v"] - self.lr * g
        else:
            p += s["v"]


class _Adam(_Optimizer):
    def _slot_names(self):
        return ("m", "v", "vmax") if self.cfg.amsgrad else ("m", "v")

    def _update(self, p, g, s):
        b1, b2 = self.cfg.moment_decay_1, self.cfg.moment_decay_2
        s["m"][...] = b1 * s["m"] + (1.0 - b1) * g
        s["v"][...] = b2 * s["v"] + (1.0 - b2) * g * g
        mhat = s["m"] / (1.0 - b1 ** self.t)
        vhat = s["v"] / (1.0 - b2 ** self.t)
        if self.cfg.amsgrad:
            np.maximum(s["vmax"], vhat, out=s["vmax"])
            vhat = s["vmax"]
        p -= self.lr * mhat / (np.sqrt(vhat) + _OPT_EPS)


class _Nadam(_Optimizer):
    """Adam with a Nesterov lookahead on the first moment."""

    def _slot_names(self):
        return ("m", "v")

    def _update(self, p, g, s):
        b1, b2 = self.cfg.moment_decay_1, self.cfg.moment_decay_2
        s["m"][...] = b1 * s["m"] + (1.0 - b1) * g
        s["v"][...] = b2 * s["v"] + (1.0 - b2) * g * g
        mhat = (b1 * s["m"] / (1.0 - b1 ** (self.t + 1))
                + (1.0 - b1) * g / (1.0 - b1 ** self.t))
        vhat = s["v"] / (1.0 - b2 ** self.t)
        p -= self.lr * mhat / (np.sqrt(vhat) + _OPT_EPS)


class _RmsProp(_Optimizer):
    def _slot_names(self):
        return ("s", "gm") if self.cfg.centered else ("s",)

    def _update(self, p, g, s):
        rho = self.cfg.moment_decay_2
        s["s"][...] = rho * s["s"] + (1.0 - rho) * g * g
        if self.cfg.centered:
            s["gm"][...] = rho * s["gm"] + (1.0 - rho) * g
            denom = np.sqrt(np.maximum(s["s"] - s["gm"] ** 2, 0.0)) + _OPT_EPS
        else:
            denom = np.sqrt(s["s"]) + _OPT_EPS
        p -= self.lr * g / denom


class _Adagrad(_Optimizer):
    def _slot_names(self):
        return ("acc",)

    def _update(self, p, g, s):
        s["acc"][...] += g * g
        p -= self.lr * g / (np.sqrt(s["acc"]) + _OPT_EPS)


_OPTIMIZER_TABLE = {
    "sgd": _Sgd, "adam": _Adam, "nadam": _Nadam,
    "rmsprop": _RmsProp, "adagrad": _Adagrad,
}


def make_optimizer(cfg: TrainConfig, params: list) -> _Optimizer:
    return _OPTIMIZER_TABLE[cfg.optimizer](cfg, params)


# ---------------------------------------------------------------------------
# Training.
# ---------------------------------------------------------------------------

@dataclass
class TrainReport:
    train_loss: list            # per restart: per-epoch mean batch loss
    test_error: list            # per restart: per-epoch normalized L2
    best_seed: int
    best_epoch: int
    final_test_error: float
    n_params: int
    seconds: float


def _check_disjoint(train_set: Dataset, test_set: Dataset) -> None:
    seen = {row.tobytes() for row in train_set.inputs}
    for row in test_set.inputs:
        if row.tobytes() in seen:
            raise ValueError("train and test sets share an input row")


def train(train_set: Dataset, test_set: Dataset,
          cfg: TrainConfig) -> tuple[MlpModel, TrainReport]:
    """Minibatch training with best-test-error selection.

    Runs ``cfg.n_seeds`` independently initialized restarts and keeps the
    parameters of whichever epoch of whichever restart scored the lowest
    normalized L2 test error. Aborts with ``TrainingDiverged`` the moment a
    batch loss goes non-finite.
    """
    cfg.validate()
    if len(test_set) == 0:
        raise ValueError("empty test set")
    _check_disjoint(train_set, test_set)
    t0 = time.perf_counter()

    in_scaler = AffineScaler.fit(train_set.inputs)
    out_scaler = AffineScaler.fit(train_set.targets)
    xs = in_scaler.transform(train_set.inputs)
    ts = out_scaler.transform(train_set.targets)
    xs_test = in_scaler.transform(test_set.inputs)
    ts_test = out_scaler.transform(test_set.targets)
    tnorm = float(np.linalg.norm(ts_test))
    d_in, d_out = xs.shape[1], ts.shape[1]
    n = xs.shape[0]

    best = (np.inf, None, -1, -1)       # error, params, seed index, epoch
    all_losses, all_errors = [], []
    net = None
    for si in range(cfg.n_seeds):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, si]))
        net = _Network(cfg, d_in, d_out, rng)
        opt = make_optimizer(cfg, net.params())
        drop_keep = 1.0 - cfg.dropout_rate if cfg.dropout else 1.0
        losses, errors = [], []
        for epoch in range(cfg.epochs):
            opt.lr = cfg.learning_rate * cfg.lr_decay**epoch
            order = rng.permutation(n)
            epoch_loss = 0.0
            nb = 0
            for start in range(0, n, cfg.batch_size):
                idx = order[start:start + cfg.batch_size]
                masks = None
                if cfg.dropout and cfg.dropout_rate > 0.0:
                    masks = [
                        (rng.random((idx.size, cfg.n_units)) < drop_keep)
                        / drop_keep
                        for _ in range(cfg.n_layers)
                    ]
                loss, grads = net.loss_and_grads(
                    xs[idx], ts[idx], masks=masks, update_running=True
                )
                if not np.isfinite(loss):
                    raise TrainingDiverged(cfg.learning_rate, nb, epoch, si)
                opt.step(net.params(), grads)
                epoch_loss += loss
                nb += 1
            losses.append(epoch_loss / max(nb, 1))
            pred = net.forward_eval(xs_test)
            err = float(np.linalg.norm(pred - ts_test)) / tnorm
            errors.append(err)
            if err < best[0]:
                best = (err, net.clone_params(), si, epoch)
        all_losses.append(losses)
        all_errors.append(errors)

    err, params, si, epoch = best
    net.restore_params(params)
    model = net.export(in_scaler, out_scaler,
                       train_set.inputs.min(axis=0),
                       train_set.inputs.max(axis=0))
    report = TrainReport(all_losses, all_errors, si, epoch, err,
                         model.n_params, time.perf_counter() - t0)
    return model, report


def normalized_l2_error(model: MlpModel, test_set: Dataset) -> float:
    """Frobenius-norm error ratio in output-standardized space."""
    if len(test_set) == 0:
        raise ValueError("empty test set")
    pred = model.out_scaler.transform(forward_batch(model, test_set.inputs))
    targ = model.out_scaler.transform(test_set.targets)
    return float(np.linalg.norm(pred - targ) / np.linalg.norm(targ))


# ---------------------------------------------------------------------------
# Model persistence: versioned binary + JSON export.
# ---------------------------------------------------------------------------
#
# Byte layout (little-endian):
#   0:4    magic "MLPM"
#   4:8    u32 format version
#   8:12   u32 header length H
#   12:12+H  JSON header: activations, layer shapes, scaler size, input box flag
#   then float64 arrays, C-order, in a fixed sequence:
#     in_scaler shift, in_scaler scale, out_scaler shift, out_scaler scale,
#     [input_low, input_high if present], then per layer: W, b.


def _model_array_seq(model: MlpModel):
    seq = [model.in_scaler.shift, model.in_scaler.scale,
           model.out_scaler.shift, model.out_scaler.scale]
    if model.input_low is not None:
        seq += [model.input_low, model.input_high]
    for w, b in zip(model.weights, model.biases):
        seq.append(w)
        seq.append(b)
    return seq


def save_model(model: MlpModel, path) -> None:
    header = json.dumps({
        "activations": list(model.activations),
        "shapes": [list(w.shape) for w in model.weights],
        "has_input_box": model.input_low is not None,
    }).encode()
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<II", _FORMAT_VERSION, len(header)))
        f.write(header)
        for arr in _model_array_seq(model):
            f.write(np.ascontiguousarray(arr, dtype=np.float64).tobytes())


def load_model(path) -> MlpModel:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 12 or blob[:4] != _MAGIC:
        raise ModelFormatError(f"{path}: not a model file")
    version, hlen = struct.unpack("<II", blob[4:12])
    if version != _FORMAT_VERSION:
        raise ModelFormatError(
            f"{path}: format version {version}, expected {_FORMAT_VERSION}"
        )
    if len(blob) < 12 + hlen:
        raise ModelFormatError(f"{path}: truncated header")
    try:
        header = json.loads(blob[12:12 + hlen])
        shapes = [tuple(s) for s in header["shapes"]]
        activations = tuple(header["activations"])
        has_box = bool(header["has_input_box"])
    except (ValueError, KeyError, TypeError) as exc:
        raise ModelFormatError(f"{path}: bad header: {exc}") from exc

    d_in, d_out = shapes[0][1], shapes[-1][0]
    sizes = [d_in, d_in, d_out, d_out]
    if has_box:
        sizes += [d_in, d_in]
    for (r, c) in shapes:
        sizes += [r * c, r]
    expect = 12 + hlen + 8 * sum(sizes)
    if len(blob) != expect:
        raise ModelFormatError(
            f"{path}: expected {expect} bytes, found {len(blob)} (truncated "
            "or corrupt)"
        )
    flat = np.frombuffer(blob[12 + hlen:], dtype="<f8")
    pos = 0

    def take(k):
        nonlocal pos
        out = flat[pos:pos + k].copy()
        pos += k
        return out

    in_scaler = AffineScaler(take(d_in), take(d_in))
    out_scaler = AffineScaler(take(d_out), take(d_out))
    low = high = None
    if has_box:
        low, high = take(d_in), take(d_in)
    weights, biases = [], []
    for (r, c) in shapes:
        weights.append(take(r * c).reshape(r, c))
        biases.append(take(r))
    return MlpModel(tuple(weights), tuple(biases), activations,
                    in_scaler, out_scaler, low, high)


def export_json(model: MlpModel, path) -> None:
    """Human-inspectable dump of every parameter (not the load format)."""
    doc = {
        "format_version": _FORMAT_VERSION,
        "d_in": model.d_in,
        "d_out": model.d_out,
        "activations": list(model.activations),
        "in_scaler": {"shift": model.in_scaler.shift.tolist(),
                      "scale": model.in_scaler.scale.tolist()},
        "out_scaler": {"shift": model.out_scaler.shift.tolist(),
                       "scale": model.out_scaler.scale.tolist()},
        "input_low": None if model.input_low is None else model.input_low.tolist(),
        "input_high": None if model.input_high is None else model.input_high.tolist(),
        "layers": [
            {"weights": w.tolist(), "bias": b.tolist()}
            for w, b in zip(model.weights, model.biases)
        ],
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=1)
