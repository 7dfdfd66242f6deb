import json
import math

import numpy as np
import pytest

from gnnbench import tensor as T
from gnnbench import (ModelConfig, TrainConfig, build_graph, build_model,
                      accuracy, weighted_accuracy, roc_auc_multitask,
                      cluster_config, generate_cluster)
from gnnbench.optim import AdamState
from gnnbench.splits import Split
from gnnbench import train as train_mod
from gnnbench.train import (evaluate, fit, train_epoch_full,
                            train_epoch_minibatch)

from helpers import random_graph_arrays


# ---------------------------------------------------------------------------
# Adam

def test_adam_zero_gradient_no_motion():
    p = T.Tensor(np.array([[1.0, -2.0]]), requires_grad=True)
    opt = AdamState([p], lr=0.1)
    p.grad = np.zeros((1, 2))
    opt.step()
    np.testing.assert_array_equal(p.data, [[1.0, -2.0]])


def test_adam_first_step_magnitude():
    p = T.Tensor(np.array([[0.0]]), requires_grad=True)
    opt = AdamState([p], lr=0.1)
    p.grad = np.array([[1.0]])
    opt.step()
    # bias-corrected m_hat / sqrt(v_hat) = 1 up to eps
    assert abs(p.data[0, 0] + 0.1) < 1e-8


def _adam_reference(x0, target, lr, steps, beta1=0.9, beta2=0.999,
                    eps=1e-8):
    """Independent scalar-by-scalar implementation of the update rule."""
    x = [float(v) for v in x0]
    m = [0.0] * len(x)
    v = [0.0] * len(x)
    for t in range(1, steps + 1):
        g = [2.0 * (xi - ci) for xi, ci in zip(x, target)]
        c1 = 1.0 - beta1 ** t
        c2 = 1.0 - beta2 ** t
        for i in range(len(x)):
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i]
            v[i] = beta2 * v[i] + (1.0 - beta2) * (g[i] * g[i])
            x[i] = x[i] - lr * (m[i] / c1) / (math.sqrt(v[i] / c2) + eps)
    return np.asarray(x)


def test_adam_trajectory_matches_independent_reference():
    target = np.array([3.0, -1.0, 0.5])
    p = T.Tensor(np.zeros((1, 3)), requires_grad=True)
    opt = AdamState([p], lr=0.05)
    for _ in range(100):
        p.grad = 2.0 * (p.data - target)
        opt.step()
    expect = _adam_reference(np.zeros(3), target, 0.05, 100)
    np.testing.assert_allclose(p.data[0], expect, atol=1e-12, rtol=0)


def test_adam_converges_on_quadratic():
    p = T.Tensor(np.zeros((1, 1)), requires_grad=True)
    opt = AdamState([p], lr=0.1)
    for _ in range(500):
        p.grad = 2.0 * (p.data - 3.0)
        opt.step()
    assert abs(p.data[0, 0] - 3.0) < 1e-3


# ---------------------------------------------------------------------------
# epoch loops

def _toy_multigraph(r, n_graphs=7):
    cfg = cluster_config(n_graphs=n_graphs, seed=int(r.integers(1000)),
                         total_range=None, size_range=(5, 9))
    return generate_cluster(cfg, r)


def _toy_model(graphs, hidden=8, layers=2, arch="gcn", batchnorm=True):
    cfg = ModelConfig(architecture=arch, num_layers=layers,
                      hidden_dim=hidden, in_dim=graphs[0].feature_dim,
                      n_classes=6, batchnorm=batchnorm)
    return build_model(cfg, np.random.default_rng(0))


def test_minibatch_single_step_when_batch_covers_all():
    r = rng = np.random.default_rng(0)
    graphs = _toy_multigraph(r)
    model = _toy_model(graphs)
    cfg = TrainConfig(batch_size=32)
    opt = AdamState(model.parameters(), lr=1e-3)
    train_epoch_minibatch(model, graphs, np.arange(7), cfg, opt, rng)
    assert opt.t == 1


def test_minibatch_step_count_is_ceil():
    r = np.random.default_rng(1)
    graphs = _toy_multigraph(r)
    model = _toy_model(graphs)
    cfg = TrainConfig(batch_size=3)
    opt = AdamState(model.parameters(), lr=1e-3)
    train_epoch_minibatch(model, graphs, np.arange(7), cfg, opt, r)
    assert opt.t == math.ceil(7 / 3)


def test_minibatch_lr_zero_leaves_params_bit_identical():
    r = np.random.default_rng(2)
    graphs = _toy_multigraph(r)
    model = _toy_model(graphs, batchnorm=False)
    before = {k: v.data.copy() for k, v in model.params.items()}
    cfg = TrainConfig(batch_size=4)
    opt = AdamState(model.parameters(), lr=0.0)
    train_epoch_minibatch(model, graphs, np.arange(7), cfg, opt, r)
    for k, v in model.params.items():
        np.testing.assert_array_equal(before[k], v.data)


def test_minibatch_empty_train_set_rejected():
    r = np.random.default_rng(3)
    graphs = _toy_multigraph(r)
    model = _toy_model(graphs)
    with pytest.raises(ValueError):
        train_epoch_minibatch(model, graphs, np.array([], dtype=int),
                              TrainConfig(), AdamState(model.parameters()),
                              r)


def _single_graph(r, n=24):
    edges = random_graph_arrays(r, n, 0.2)
    feats = r.uniform(-1, 1, (n, 4))
    labels = r.integers(0, 3, n)
    return build_graph(edges, n, node_features=feats, labels=labels)


def test_full_graph_initial_loss_near_ln_c():
    r = np.random.default_rng(4)
    g = _single_graph(r, 40)
    cfg = ModelConfig(architecture="mlp", num_layers=2, hidden_dim=8,
                      in_dim=4, n_classes=3)
    model = build_model(cfg, np.random.default_rng(5))
    tcfg = TrainConfig()
    opt = AdamState(model.parameters(), lr=1e-3)
    loss = train_epoch_full(model, g, np.arange(40), tcfg, opt)
    assert abs(loss - np.log(3.0)) < 0.1 * np.log(3.0)


def test_full_graph_lr_zero_control():
    r = np.random.default_rng(6)
    g = _single_graph(r)
    model = _toy_model([g], arch="gcn", batchnorm=False)
    before = {k: v.data.copy() for k, v in model.params.items()}
    opt = AdamState(model.parameters(), lr=0.0)
    train_epoch_full(model, g, np.arange(10), TrainConfig(), opt)
    for k, v in model.params.items():
        np.testing.assert_array_equal(before[k], v.data)


def test_full_graph_l_hop_locality_of_training_loss():
    # path graph: distance from the only training node controls influence
    n, layers = 10, 2
    edges = [(i, i + 1) for i in range(n - 1)]
    r = np.random.default_rng(7)
    feats = r.uniform(-1, 1, (n, 3))
    labels = r.integers(0, 2, n)
    cfg = ModelConfig(architecture="gcn", num_layers=layers, hidden_dim=6,
                      in_dim=3, n_classes=2, batchnorm=False)
    tcfg = TrainConfig()

    def loss_with(feats_arr):
        g = build_graph(edges, n, node_features=feats_arr, labels=labels)
        model = build_model(cfg, np.random.default_rng(8))
        opt = AdamState(model.parameters(), lr=0.0)
        return train_epoch_full(model, g, np.array([0]), tcfg, opt)

    base = loss_with(feats)
    far = feats.copy()
    far[5] += 1.0  # 5 hops away > L=2: unreachable
    assert loss_with(far) == base
    near = feats.copy()
    near[2] += 1.0  # exactly L hops: reachable
    assert loss_with(near) != base


# ---------------------------------------------------------------------------
# fit: plateau schedule semantics

def _patch_static_training(monkeypatch, val_losses):
    """Replace the epoch and evaluation work with a rigged sequence."""
    calls = {"n": -1}

    def fake_epoch(*args, **kwargs):
        return 1.0

    def fake_eval(*args, **kwargs):
        calls["n"] += 1
        idx = min(calls["n"], len(val_losses) - 1)
        return val_losses[idx], 0.0

    monkeypatch.setattr(train_mod, "train_epoch_full", fake_epoch)
    monkeypatch.setattr(train_mod, "train_epoch_minibatch", fake_epoch)
    monkeypatch.setattr(train_mod, "evaluate", fake_eval)


def _schedule_fixture():
    r = np.random.default_rng(9)
    g = _single_graph(r, 30)
    model = _toy_model([g], hidden=4, layers=1, batchnorm=False)
    split = Split(np.arange(20), np.arange(20, 25), np.arange(25, 30))
    return g, model, split


def test_fit_non_improving_halves_at_patience_and_stops(monkeypatch):
    g, model, split = _schedule_fixture()
    _patch_static_training(monkeypatch, [1.0])
    cfg = TrainConfig(init_lr=1e-3, lr_schedule_patience=5, min_lr=1e-5)
    logs, best = fit(model, g, split, cfg, n_classes=3)
    # halvings at 5,10,...: j halvings needed with 1e-3 * 0.5^j <= 1e-5
    j = math.ceil(math.log2(100))
    assert len(logs) == 5 * j == 35
    lrs = [e.lr for e in logs]
    for i, lr in enumerate(lrs):
        assert lr == pytest.approx(1e-3 * 0.5 ** ((i + 1) // 5))
    assert logs[-1].lr <= cfg.min_lr
    assert best == 0


def test_fit_improving_loss_never_reduces_lr(monkeypatch):
    g, model, split = _schedule_fixture()
    _patch_static_training(monkeypatch,
                           [10.0 - 0.1 * i for i in range(100)])
    cfg = TrainConfig(max_epochs=20, lr_schedule_patience=5)
    logs, best = fit(model, g, split, cfg, n_classes=3)
    assert len(logs) == 20
    assert all(e.lr == 1e-3 for e in logs)
    assert best == 20


def test_fit_max_time_zero_stops_after_first_epoch(monkeypatch):
    g, model, split = _schedule_fixture()
    _patch_static_training(monkeypatch, [1.0])
    cfg = TrainConfig(max_time=0.0)
    logs, _ = fit(model, g, split, cfg, n_classes=3)
    assert len(logs) == 1


def test_fit_lr_sequence_is_halving_chain(monkeypatch):
    g, model, split = _schedule_fixture()
    rig = [5.0, 4.0, 4.5, 4.5, 3.0] + [3.5] * 100
    _patch_static_training(monkeypatch, rig)
    cfg = TrainConfig(lr_schedule_patience=3, max_epochs=30)
    logs, _ = fit(model, g, split, cfg, n_classes=3)
    for e in logs:
        ratio = 1e-3 / e.lr
        assert abs(ratio - 2 ** round(math.log2(ratio))) < 1e-12
        assert e.lr <= 1e-3
    lrs = [e.lr for e in logs]
    assert all(a >= b for a, b in zip(lrs, lrs[1:]))


def test_fit_returns_best_validation_snapshot():
    r = np.random.default_rng(10)
    g = _single_graph(r, 40)
    model = _toy_model([g], hidden=6, layers=1, arch="mlp")
    split = Split(np.arange(30), np.arange(30, 35), np.arange(35, 40))
    cfg = TrainConfig(max_epochs=8, seed=1)
    logs, best_epoch = fit(model, g, split, cfg, n_classes=6)
    best_from_log = min(range(len(logs)),
                        key=lambda i: logs[i].val_loss) + 1
    # the returned epoch is either 0 (init) or the argmin of the log
    if best_epoch != 0:
        assert logs[best_epoch - 1].val_loss <= logs[best_from_log - 1] \
            .val_loss + 1e-12


def test_fit_writes_jsonl_log(tmp_path):
    r = np.random.default_rng(11)
    g = _single_graph(r, 30)
    model = _toy_model([g], hidden=4, layers=1, arch="mlp")
    split = Split(np.arange(20), np.arange(20, 25), np.arange(25, 30))
    path = tmp_path / "log.jsonl"
    fit(model, g, split, TrainConfig(max_epochs=3, max_time=60.0),
        n_classes=6, log_path=str(path))
    lines = path.read_text().strip().split("\n")
    assert len(lines) == 3
    entry = json.loads(lines[0])
    assert sorted(entry) == ["elapsed_s", "epoch", "lr", "train_loss",
                             "val_loss", "val_metric"]
    epochs = [json.loads(ln)["epoch"] for ln in lines]
    assert epochs == [1, 2, 3]


# ---------------------------------------------------------------------------
# metrics

def test_accuracy_basic_cases():
    assert accuracy([1, 0, 1], [1, 0, 1]) == 1.0
    assert accuracy([1, 1, 1], [0, 0, 0]) == 0.0
    preds = np.array([0, 1, 1, 0, 1, 0, 1, 1, 0, 1])
    labels = np.array([0, 1, 1, 0, 1, 1, 0, 1, 1, 1])
    assert accuracy(preds, labels) == 0.7


def test_accuracy_excludes_unlabeled():
    assert accuracy([1, 0], [1, -1]) == 1.0
    with pytest.raises(ValueError):
        accuracy([1], [-1])


def test_weighted_accuracy_balanced_equals_plain():
    r = np.random.default_rng(12)
    labels = np.repeat([0, 1], 30)
    preds = r.integers(0, 2, 60)
    w = weighted_accuracy(preds, labels, 2)
    per0 = (preds[:30] == 0).mean()
    per1 = (preds[30:] == 1).mean()
    assert w == pytest.approx((per0 + per1) / 2)


def test_weighted_accuracy_majority_predictor_is_half():
    labels = np.array([0] * 90 + [1] * 10)
    preds = np.zeros(100, dtype=int)
    assert weighted_accuracy(preds, labels, 2) == 0.5


def test_weighted_accuracy_three_class_case():
    # class accuracies 1.0, 0.5, 0.0 -> mean 0.5
    labels = np.array([0, 0, 1, 1, 2, 2])
    preds = np.array([0, 0, 1, 0, 1, 1])
    assert weighted_accuracy(preds, labels, 3) == 0.5


def test_auc_perfect_separation():
    scores = np.array([0.9, 0.8, 0.2, 0.1])
    targets = np.array([1, 1, 0, 0])
    assert roc_auc_multitask(scores, targets) == 1.0


def test_auc_all_tied_is_half():
    scores = np.zeros(8)
    targets = np.array([1, 0] * 4)
    assert roc_auc_multitask(scores, targets) == 0.5


def test_auc_matches_pair_counting_oracle():
    r = np.random.default_rng(13)
    scores = r.random(6)
    targets = np.array([1, 0, 1, 0, 0, 1])
    pos = scores[targets == 1]
    neg = scores[targets == 0]
    wins = sum((p > n) + 0.5 * (p == n) for p in pos for n in neg)
    expect = wins / (len(pos) * len(neg))
    assert roc_auc_multitask(scores, targets) == pytest.approx(expect)


def test_auc_multitask_skips_single_class_tasks():
    scores = np.array([[0.9, 0.4], [0.1, 0.6]])
    targets = np.array([[1, 1], [0, 1]])  # task 1 has positives only
    assert roc_auc_multitask(scores, targets) == 1.0
    with pytest.raises(ValueError):
        roc_auc_multitask(np.array([[1.0], [2.0]]), np.array([[1], [1]]))


def test_metrics_are_pure():
    preds = np.array([0, 1, 1])
    labels = np.array([0, 1, 0])
    a = weighted_accuracy(preds, labels, 2)
    b = weighted_accuracy(preds, labels, 2)
    assert a == b
    np.testing.assert_array_equal(preds, [0, 1, 1])


# ---------------------------------------------------------------------------
# evaluate

def test_evaluate_multigraph_matches_single_pass():
    r = np.random.default_rng(14)
    graphs = _toy_multigraph(r, n_graphs=6)
    model = _toy_model(graphs)
    cfg = TrainConfig(batch_size=2)
    loss_a, metric_a = evaluate(model, graphs, np.arange(6), cfg, 6,
                                "weighted_acc")
    cfg_big = TrainConfig(batch_size=64)
    loss_b, metric_b = evaluate(model, graphs, np.arange(6), cfg_big, 6,
                                "weighted_acc")
    assert loss_a == pytest.approx(loss_b, abs=1e-9)
    assert metric_a == pytest.approx(metric_b, abs=1e-12)


def test_functional_adam_step_matches_state_step():
    r = np.random.default_rng(15)
    pa = T.Tensor(r.standard_normal((2, 3)), requires_grad=True)
    pb = T.Tensor(pa.data.copy(), requires_grad=True)
    grads = [r.standard_normal((2, 3)) for _ in range(3)]
    from gnnbench.optim import adam_step
    state_a = AdamState([pa], lr=0.01)
    state_b = AdamState([pb], lr=0.01)
    for g in grads:
        adam_step([pa], [g], state_a)
        pb.grad = g.copy()
        state_b.step()
    np.testing.assert_array_equal(pa.data, pb.data)
    with pytest.raises(ValueError):
        adam_step([pa], [np.zeros((9, 9))], state_a)
