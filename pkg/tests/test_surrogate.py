"""Network training: gradients, optimizers, datasets, persistence."""

import json

import numpy as np
import pytest

from hypersol import surrogate as S
from hypersol.thermo import TOY_EPS_RANGE, TOY_RHO_RANGE, toy_atmosphere
from hypersol.equilibrium import EquilibriumInput, equilibrate

RNG = np.random.default_rng


def micro_net(cfg, d_in=3, d_out=2, seed=7):
    return S._Network(cfg, d_in, d_out, RNG(seed))


def fd_grads(net, x, t, masks=None, h=1e-6):
    """Central finite differences of the training loss, parameter by
    parameter, in the network's own parameter order."""
    out = []
    for p in net.params():
        g = np.zeros_like(p)
        pf, gf = p.ravel(), g.ravel()
        for i in range(pf.size):
            orig = pf[i]
            pf[i] = orig + h
            lp, _ = net.loss_and_grads(x, t, masks=masks)
            pf[i] = orig - h
            lm, _ = net.loss_and_grads(x, t, masks=masks)
            pf[i] = orig
            gf[i] = (lp - lm) / (2.0 * h)
        out.append(g)
    return out


def assert_grads_close(analytic, numeric, tol=1e-5):
    ga_all = np.concatenate([g.ravel() for g in analytic])
    gn_all = np.concatenate([g.ravel() for g in numeric])
    scale = max(np.linalg.norm(ga_all), np.linalg.norm(gn_all))
    rel = np.linalg.norm(ga_all - gn_all) / scale
    assert rel <= tol, f"gradient mismatch: rel {rel:.3e}"
    # per-tensor, with an absolute floor for parameters whose true gradient
    # is exactly zero (a constant shift before normalization, for example):
    # both routes then return pure roundoff and only its size is checkable
    for ga, gn in zip(analytic, numeric):
        err = np.linalg.norm(ga - gn)
        assert err <= tol * max(np.linalg.norm(ga), np.linalg.norm(gn)) \
            + 1e-8 * max(scale, 1.0)


def batch(seed=3, n=6, d_in=3, d_out=2):
    rng = RNG(seed)
    return rng.normal(size=(n, d_in)), rng.normal(size=(n, d_out))


# ---------------------------------------------------------------------------
# Backpropagation vs central finite differences.
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("act", S.ACTIVATIONS)
def test_gradients_match_fd(act):
    cfg = S.TrainConfig(n_layers=2, n_units=7, activation=act)
    net = micro_net(cfg)
    x, t = batch()
    _, grads = net.loss_and_grads(x, t)
    assert_grads_close(grads, fd_grads(net, x, t))


@pytest.mark.parametrize("act", S.ACTIVATIONS)
def test_gradients_match_fd_batch_norm(act):
    cfg = S.TrainConfig(n_layers=2, n_units=7, activation=act,
                        batch_norm=True)
    net = micro_net(cfg)
    x, t = batch()
    _, grads = net.loss_and_grads(x, t)
    assert_grads_close(grads, fd_grads(net, x, t))


def test_gradients_match_fd_l1_loss():
    cfg = S.TrainConfig(n_layers=1, n_units=7, activation="tanh", loss="l1")
    net = micro_net(cfg)
    x, t = batch(seed=11)
    _, grads = net.loss_and_grads(x, t)
    assert_grads_close(grads, fd_grads(net, x, t))


def test_gradients_match_fd_regularized():
    cfg = S.TrainConfig(n_layers=2, n_units=7, activation="sigmoid",
                        weights_reg_l1=1e-3, weights_reg_l2=1e-2,
                        bias_reg_l2=1e-3)
    net = micro_net(cfg)
    # move biases off zero so the l1 penalty is differentiable everywhere
    for b in net.b:
        b += 0.1
    x, t = batch(seed=5)
    _, grads = net.loss_and_grads(x, t)
    assert_grads_close(grads, fd_grads(net, x, t))


def test_gradients_match_fd_fixed_dropout_masks():
    cfg = S.TrainConfig(n_layers=2, n_units=7, activation="elu",
                        dropout=True, dropout_rate=0.4)
    net = micro_net(cfg)
    x, t = batch(seed=9)
    rng = RNG(17)
    masks = [(rng.random((x.shape[0], 7)) < 0.6) / 0.6 for _ in range(2)]
    _, grads = net.loss_and_grads(x, t, masks=masks)
    assert_grads_close(grads, fd_grads(net, x, t, masks=masks))


def test_loss_is_pure_without_update_running():
    cfg = S.TrainConfig(n_layers=2, n_units=7, batch_norm=True)
    net = micro_net(cfg)
    x, t = batch()
    r_mean0 = [m.copy() for m in net.r_mean]
    l1, _ = net.loss_and_grads(x, t)
    l2, _ = net.loss_and_grads(x, t)
    assert l1 == l2
    for m0, m in zip(r_mean0, net.r_mean):
        assert np.array_equal(m0, m)
    net.loss_and_grads(x, t, update_running=True)
    assert not np.array_equal(r_mean0[0], net.r_mean[0])


# ---------------------------------------------------------------------------
# Optimizer update rules vs independently written references.
# ---------------------------------------------------------------------------

EPS = 1e-8


def ref_sgd(cfg, lr, t, p, g, s):
    s.setdefault("v", np.zeros_like(p))
    s["v"] = cfg.momentum * s["v"] - lr * g
    if cfg.nesterov:
        return p + cfg.momentum * s["v"] - lr * g
    return p + s["v"]


def ref_adam(cfg, lr, t, p, g, s):
    b1, b2 = cfg.moment_decay_1, cfg.moment_decay_2
    s.setdefault("m", np.zeros_like(p))
    s.setdefault("v", np.zeros_like(p))
    s["m"] = b1 * s["m"] + (1 - b1) * g
    s["v"] = b2 * s["v"] + (1 - b2) * g * g
    mhat = s["m"] / (1 - b1 ** t)
    vhat = s["v"] / (1 - b2 ** t)
    if cfg.amsgrad:
        s.setdefault("vmax", np.zeros_like(p))
        s["vmax"] = np.maximum(s["vmax"], vhat)
        vhat = s["vmax"]
    return p - lr * mhat / (np.sqrt(vhat) + EPS)


def ref_nadam(cfg, lr, t, p, g, s):
    b1, b2 = cfg.moment_decay_1, cfg.moment_decay_2
    s.setdefault("m", np.zeros_like(p))
    s.setdefault("v", np.zeros_like(p))
    s["m"] = b1 * s["m"] + (1 - b1) * g
    s["v"] = b2 * s["v"] + (1 - b2) * g * g
    mhat = (b1 * s["m"] / (1 - b1 ** (t + 1))
            + (1 - b1) * g / (1 - b1 ** t))
    vhat = s["v"] / (1 - b2 ** t)
    return p - lr * mhat / (np.sqrt(vhat) + EPS)


def ref_rmsprop(cfg, lr, t, p, g, s):
    rho = cfg.moment_decay_2
    s.setdefault("s", np.zeros_like(p))
    s["s"] = rho * s["s"] + (1 - rho) * g * g
    if cfg.centered:
        s.setdefault("gm", np.zeros_like(p))
        s["gm"] = rho * s["gm"] + (1 - rho) * g
        denom = np.sqrt(np.maximum(s["s"] - s["gm"] ** 2, 0.0)) + EPS
    else:
        denom = np.sqrt(s["s"]) + EPS
    return p - lr * g / denom


def ref_adagrad(cfg, lr, t, p, g, s):
    s.setdefault("acc", np.zeros_like(p))
    s["acc"] = s["acc"] + g * g
    return p - lr * g / (np.sqrt(s["acc"]) + EPS)


REFS = {"sgd": ref_sgd, "adam": ref_adam, "nadam": ref_nadam,
        "rmsprop": ref_rmsprop, "adagrad": ref_adagrad}

OPT_VARIANTS = [
    ("sgd", {}), ("sgd", {"nesterov": True, "momentum": 0.85}),
    ("adam", {}), ("adam", {"amsgrad": True}),
    ("nadam", {}),
    ("rmsprop", {}), ("rmsprop", {"centered": True}),
    ("adagrad", {}),
]


@pytest.mark.parametrize("name,extra", OPT_VARIANTS,
                         ids=[f"{n}{'-' + next(iter(e), '') if e else ''}"
                              for n, e in OPT_VARIANTS])
def test_optimizer_step_matches_reference(name, extra):
    cfg = S.TrainConfig(optimizer=name, learning_rate=3e-3, **extra)
    rng = RNG(1)
    p = rng.normal(size=(4, 3))
    opt = S.make_optimizer(cfg, [p])
    ref_p, state = p.copy(), {}
    for t in range(1, 5):
        g = rng.normal(size=p.shape)
        opt.step([p], [g.copy()])
        ref_p = REFS[name](cfg, cfg.learning_rate, t, ref_p, g, state)
        np.testing.assert_allclose(p, ref_p, rtol=1e-12, atol=0)


@pytest.mark.parametrize("name", S.OPTIMIZERS)
def test_optimizer_descends_quadratic(name):
    cfg = S.TrainConfig(optimizer=name, learning_rate=1e-2)
    target = np.array([1.0, -2.0, 0.5])
    p = np.zeros(3)
    opt = S.make_optimizer(cfg, [p])
    loss0 = float(np.sum((p - target) ** 2))
    steps = 10_000 if name == "adagrad" else 2_000   # 1/sqrt(t) step decay
    for _ in range(steps):
        opt.step([p], [2.0 * (p - target)])
    assert float(np.sum((p - target) ** 2)) < 0.2 * loss0


def test_unknown_optimizer_rejected():
    with pytest.raises(ValueError):
        S.TrainConfig(optimizer="lion").validate()


# ---------------------------------------------------------------------------
# Forward pass and scalers.
# ---------------------------------------------------------------------------

def test_forward_batch_matches_manual_affine_chain():
    w0 = np.array([[1.0, 2.0], [0.0, -1.0], [0.5, 0.5]])
    b0 = np.array([0.1, -0.2, 0.0])
    w1 = np.array([[1.0, -1.0, 2.0]])
    b1 = np.array([0.3])
    model = S.MlpModel((w0, w1), (b0, b1), ("tanh",),
                       S.AffineScaler.identity(2), S.AffineScaler.identity(1))
    x = RNG(0).normal(size=(5, 2))
    want = np.tanh(x @ w0.T + b0) @ w1.T + b1
    np.testing.assert_allclose(S.forward_batch(model, x), want,
                               rtol=1e-15, atol=0)


def test_forward_batch_rows_independent(quick_model):
    x = RNG(2).uniform([0.8, 0.2, 0.5, 3e7], [0.8, 0.2, 3.0, 2e8],
                       size=(8, 4))
    full = S.forward_batch(quick_model, x)
    for i in range(8):
        row = S.forward_batch(quick_model, x[i:i + 1])[0]
        np.testing.assert_allclose(full[i], row, rtol=1e-13, atol=1e-13)


def test_forward_batch_validates_inputs(quick_model):
    with pytest.raises(ValueError):
        S.forward_batch(quick_model, np.ones((3, 7)))
    bad = np.ones((2, 4))
    bad[0, 1] = np.nan
    with pytest.raises(ValueError):
        S.forward_batch(quick_model, bad)


def test_affine_scaler_standardizes():
    data = RNG(4).normal(loc=3.0, scale=5.0, size=(1000, 3))
    sc = S.AffineScaler.fit(data)
    z = sc.transform(data)
    np.testing.assert_allclose(z.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(z.std(axis=0), 1.0, rtol=1e-12)
    np.testing.assert_allclose(sc.inverse(z), data, rtol=1e-12, atol=1e-12)


def test_affine_scaler_constant_column_safe():
    data = np.column_stack([np.full(50, 2.5), np.arange(50.0)])
    sc = S.AffineScaler.fit(data)
    assert sc.scale[0] == 1.0
    assert np.all(np.isfinite(sc.transform(data)))


# ---------------------------------------------------------------------------
# Dataset generation.
# ---------------------------------------------------------------------------

def test_generate_dataset_deterministic():
    a_tr, a_te = S.generate_dataset(120, 30, seed=42)
    b_tr, b_te = S.generate_dataset(120, 30, seed=42)
    assert np.array_equal(a_tr.inputs, b_tr.inputs)
    assert np.array_equal(a_tr.targets, b_tr.targets)
    assert np.array_equal(a_te.inputs, b_te.inputs)
    c_tr, _ = S.generate_dataset(120, 30, seed=43)
    assert not np.array_equal(a_tr.inputs, c_tr.inputs)


def test_generate_dataset_labels_match_scalar_solver():
    train, _ = S.generate_dataset(40, 5, seed=1)
    atm = toy_atmosphere()
    for i in (0, 13, 39):
        z = train.inputs[i, :2]
        rho, eps = train.inputs[i, 2], train.inputs[i, 3]
        out = equilibrate(EquilibriumInput(z, rho, eps), atm)
        np.testing.assert_allclose(train.targets[i, :3],
                                   out.species_fractions, atol=1e-9)
        np.testing.assert_allclose(train.targets[i, 3], out.p, rtol=1e-9)
        np.testing.assert_allclose(train.targets[i, 4], out.T, rtol=1e-9)


def test_desk_dataset_covers_domain(desk_dataset):
    train, test = desk_dataset
    allx = np.vstack([train.inputs, test.inputs])
    assert len(train) == 20_000 and len(test) == 2_000
    assert np.all(allx[:, 0] == 0.8) and np.all(allx[:, 1] == 0.2)
    rho, eps = allx[:, 2], allx[:, 3]
    rho_lo, rho_hi = TOY_RHO_RANGE
    eps_lo, eps_hi = TOY_EPS_RANGE
    span = rho_hi - rho_lo
    assert rho.min() <= rho_lo + 0.01 * span
    assert rho.max() >= rho_hi - 0.01 * span
    log_span = np.log(eps_hi / eps_lo)
    assert np.log(eps.min() / eps_lo) <= 0.01 * log_span
    assert np.log(eps_hi / eps.max()) <= 0.01 * log_span
    assert np.all(np.isfinite(train.targets))
    assert np.all(train.targets[:, :3] >= 0)


def test_generate_dataset_aborts_on_bad_domain():
    bad = {"rho": TOY_RHO_RANGE, "eps": (1e5, 2e5), "elements": (0.8, 0.2)}
    with pytest.raises(S.DatasetError):
        S.generate_dataset(50, 10, ranges=bad, seed=0)


def test_dataset_csv_round_trip(tmp_path):
    train, _ = S.generate_dataset(25, 5, seed=3)
    path = tmp_path / "ds.csv"
    S.save_dataset_csv(train, path)
    header = path.read_text().splitlines()[0]
    assert header.split(",") == S.dataset_columns(2, 3)
    back = S.load_dataset_csv(path, ne=2)
    np.testing.assert_array_equal(back.inputs, train.inputs)
    np.testing.assert_array_equal(back.targets, train.targets)


# ---------------------------------------------------------------------------
# Training loop behavior.
# ---------------------------------------------------------------------------

def tiny_sets(seed=0, n=60, m=12, d_in=3, d_out=2):
    rng = RNG(seed)
    x = rng.normal(size=(n + m, d_in))
    t = rng.normal(size=(n + m, d_out))
    return (S.Dataset(x[:n], t[:n], {}), S.Dataset(x[n:], t[n:], {}))


def test_train_rejects_overlapping_sets():
    train, _ = tiny_sets()
    leak = S.Dataset(train.inputs[:5], train.targets[:5], {})
    with pytest.raises(ValueError, match="share"):
        S.train(train, leak, S.TrainConfig(epochs=1))


def test_train_rejects_empty_test_set():
    train, _ = tiny_sets()
    empty = S.Dataset(np.empty((0, 3)), np.empty((0, 2)), {})
    with pytest.raises(ValueError):
        S.train(train, empty, S.TrainConfig(epochs=1))


def test_train_deterministic_and_decay_plumbed():
    train, test = tiny_sets(seed=8)
    base = dict(n_layers=1, n_units=7, epochs=1, batch_size=20, seed=5)
    m1, _ = S.train(train, test, S.TrainConfig(**base, lr_decay=1.0))
    m2, _ = S.train(train, test, S.TrainConfig(**base, lr_decay=0.5))
    for a, b in zip(m1.weights, m2.weights):
        assert np.array_equal(a, b)     # decay starts at epoch 1

    base["epochs"] = 3
    m3, _ = S.train(train, test, S.TrainConfig(**base, lr_decay=1.0))
    m4, _ = S.train(train, test, S.TrainConfig(**base, lr_decay=0.5))
    assert not np.array_equal(m3.weights[0], m4.weights[0])
    m5, _ = S.train(train, test, S.TrainConfig(**base, lr_decay=1.0))
    for a, b in zip(m3.weights, m5.weights):
        assert np.array_equal(a, b)     # same recipe, same bits


def test_train_report_consistent_with_exported_model():
    train, test = tiny_sets(seed=2)
    cfg = S.TrainConfig(n_layers=2, n_units=8, activation="tanh",
                        epochs=25, batch_size=20, learning_rate=5e-3, seed=1)
    model, report = S.train(train, test, cfg)
    assert report.final_test_error == min(min(e) for e in report.test_error)
    assert report.n_params == model.n_params
    err = S.normalized_l2_error(model, test)
    assert err == pytest.approx(report.final_test_error, rel=1e-10)


def test_train_batch_norm_fold_preserves_error():
    train, test = tiny_sets(seed=6)
    cfg = S.TrainConfig(n_layers=2, n_units=8, activation="relu",
                        batch_norm=True, epochs=15, batch_size=20, seed=3)
    model, report = S.train(train, test, cfg)
    err = S.normalized_l2_error(model, test)
    assert err == pytest.approx(report.final_test_error, rel=1e-9)


def test_train_multi_seed_picks_best():
    train, test = tiny_sets(seed=4)
    cfg = S.TrainConfig(n_layers=1, n_units=7, epochs=8, batch_size=20,
                        n_seeds=3, seed=0)
    model, report = S.train(train, test, cfg)
    assert len(report.test_error) == 3
    best = min(min(e) for e in report.test_error)
    assert report.final_test_error == best
    assert report.best_seed == int(np.argmin([min(e) for e in
                                              report.test_error]))


def test_linear_map_is_learned_exactly():
    rng = RNG(12)
    A = rng.normal(size=(2, 3))
    bias = rng.normal(size=2)
    x = rng.normal(size=(260, 3))
    t = x @ A.T + bias
    train = S.Dataset(x[:250], t[:250], {})
    test = S.Dataset(x[250:], t[250:], {})
    cfg = S.TrainConfig(n_layers=0, optimizer="adam", learning_rate=1e-2,
                        epochs=4000, batch_size=250, seed=0)
    model, report = S.train(train, test, cfg)
    assert report.final_test_error < 1e-6
    np.testing.assert_allclose(S.forward_batch(model, test.inputs),
                               test.targets, rtol=1e-5, atol=1e-6)


def test_training_diverged_carries_context():
    train, test = tiny_sets(seed=0, n=60, m=10, d_in=3, d_out=1)
    cfg = S.TrainConfig(n_layers=2, n_units=512, activation="elu",
                        optimizer="sgd", momentum=0.99, learning_rate=1e-2,
                        batch_size=1, epochs=8, seed=0)
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(S.TrainingDiverged) as exc:
            S.train(train, test, cfg)
    err = exc.value
    assert err.learning_rate == 1e-2
    assert err.epoch >= 0 and err.batch_index >= 0 and err.seed_index == 0
    assert "diverged" in str(err).lower() or "finite" in str(err).lower()


# ---------------------------------------------------------------------------
# Error metric fixtures.
# ---------------------------------------------------------------------------

def test_normalized_error_zero_for_exact_model():
    ident = S.MlpModel((np.eye(3),), (np.zeros(3),), (),
                       S.AffineScaler.identity(3), S.AffineScaler.identity(3))
    x = RNG(1).normal(size=(40, 3))
    ds = S.Dataset(x, x.copy(), {})
    assert S.normalized_l2_error(ident, ds) == 0.0


def test_normalized_error_one_for_mean_predictor():
    rng = RNG(2)
    t = rng.normal(size=(200, 2)) * 3.0 + 1.0
    x = rng.normal(size=(200, 3))
    sc = S.AffineScaler.fit(t)
    model = S.MlpModel((np.zeros((2, 3)),), (np.zeros(2),), (),
                       S.AffineScaler.identity(3), sc)
    err = S.normalized_l2_error(model, S.Dataset(x, t, {}))
    assert err == pytest.approx(1.0, rel=1e-12)


def test_normalized_error_rejects_empty():
    ident = S.MlpModel((np.eye(2),), (np.zeros(2),), (),
                       S.AffineScaler.identity(2), S.AffineScaler.identity(2))
    with pytest.raises(ValueError):
        S.normalized_l2_error(ident, S.Dataset(np.empty((0, 2)),
                                               np.empty((0, 2)), {}))


# ---------------------------------------------------------------------------
# Persistence.
# ---------------------------------------------------------------------------

def test_save_load_round_trip(tmp_path, quick_model):
    path = tmp_path / "m.mlpm"
    S.save_model(quick_model, path)
    back = S.load_model(path)
    assert back.activations == quick_model.activations
    for a, b in zip(back.weights, quick_model.weights):
        assert np.array_equal(a, b)
    for a, b in zip(back.biases, quick_model.biases):
        assert np.array_equal(a, b)
    assert np.array_equal(back.in_scaler.shift, quick_model.in_scaler.shift)
    assert np.array_equal(back.out_scaler.scale, quick_model.out_scaler.scale)
    assert np.array_equal(back.input_low, quick_model.input_low)
    assert np.array_equal(back.input_high, quick_model.input_high)
    x = RNG(5).uniform([0.8, 0.2, 0.5, 3e7], [0.8, 0.2, 3.0, 2e8], (6, 4))
    assert np.array_equal(S.forward_batch(back, x),
                          S.forward_batch(quick_model, x))


def test_load_rejects_bad_files(tmp_path, quick_model):
    path = tmp_path / "m.mlpm"
    S.save_model(quick_model, path)
    blob = path.read_bytes()

    wrong_magic = tmp_path / "a.mlpm"
    wrong_magic.write_bytes(b"XXXX" + blob[4:])
    with pytest.raises(S.ModelFormatError, match="not a model"):
        S.load_model(wrong_magic)

    truncated = tmp_path / "b.mlpm"
    truncated.write_bytes(blob[:len(blob) // 2])
    with pytest.raises(S.ModelFormatError):
        S.load_model(truncated)

    import struct
    future = tmp_path / "c.mlpm"
    future.write_bytes(blob[:4] + struct.pack("<I", 99) + blob[8:])
    with pytest.raises(S.ModelFormatError, match="version"):
        S.load_model(future)


def test_export_json_complete(tmp_path, quick_model):
    path = tmp_path / "m.json"
    S.export_json(quick_model, path)
    doc = json.loads(path.read_text())
    assert doc["d_in"] == 4 and doc["d_out"] == 8
    assert len(doc["layers"]) == len(quick_model.weights)
    w0 = np.asarray(doc["layers"][0]["weights"])
    np.testing.assert_array_equal(w0, quick_model.weights[0])


def test_model_shape_validation():
    with pytest.raises(ValueError):
        S.MlpModel((np.eye(3), np.eye(2)), (np.zeros(3), np.zeros(2)),
                   ("tanh",), S.AffineScaler.identity(3),
                   S.AffineScaler.identity(2))          # dims do not chain
    with pytest.raises(ValueError):
        S.MlpModel((np.eye(3),), (np.zeros(3),), ("tanh",),
                   S.AffineScaler.identity(3), S.AffineScaler.identity(3))
    with pytest.raises(ValueError):
        S.MlpModel((np.eye(3), np.eye(3)), (np.zeros(3), np.zeros(3)),
                   ("softplus",), S.AffineScaler.identity(3),
                   S.AffineScaler.identity(3))


# ---------------------------------------------------------------------------
# Configuration validation.
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("bad", [
    dict(n_units=6), dict(n_layers=11), dict(activation="swish"),
    dict(learning_rate=0.5), dict(learning_rate=0.0),
    dict(batch_size=0), dict(loss="huber"), dict(momentum=0.2),
    dict(n_seeds=0), dict(lr_decay=0.0), dict(lr_decay=1.5),
    dict(epochs=0), dict(weights_reg_l1=0.5),
    dict(dropout=True, dropout_rate=1.0),
])
def test_train_config_rejects(bad):
    with pytest.raises(ValueError):
        S.TrainConfig(**bad).validate()


def test_train_config_defaults_valid():
    S.TrainConfig().validate()


# ---------------------------------------------------------------------------
# Shipped recipe regression.
# ---------------------------------------------------------------------------

def test_default_recipe_reaches_documented_accuracy(tuned_model,
                                                    desk_dataset):
    """The committed training recipe on the committed dataset sizes.

    The measured normalized L2 test error of this recipe is ~1.1e-3; the
    bound here (2e-3) is a regression guard with seed/jitter headroom, not
    a target. Accuracy demands on the surrogate-in-the-loop are enforced
    via the wall-pressure comparison in the acceptance suite.
    """
    model, report = tuned_model
    train_set, _ = desk_dataset
    assert len(train_set) >= 20_000
    assert model.d_in == 4 and model.d_out == 8
    assert [w.shape for w in model.weights] == \
        [(20, 4)] + [(20, 20)] * 4 + [(8, 20)]
    assert report.final_test_error <= 2e-3
    assert np.isfinite(report.final_test_error)
