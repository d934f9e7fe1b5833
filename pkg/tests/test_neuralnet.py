import numpy as np
import pytest

from oracles import central_diff_grads, relative_error
from phenotext.errors import ConfigError, ConvergenceError, DataError
from phenotext.embeddings import EmbeddingSet, synth_embeddings
from phenotext.neuralnet import (
    Adam,
    NetSpec,
    NeuralNet,
    TrainerConfig,
    backward,
    compute_class_weights,
    embed_baseline_train,
    embeddings_to_sequences,
    forward,
    load_net,
    lstm_cell_step,
    save_net,
    train,
)


def onehot(i, n):
    v = np.zeros(n)
    v[i] = 1.0
    return v


class TestSpecs:
    def test_netspec_validation(self):
        with pytest.raises(ConfigError):
            NetSpec(input_dim=0, hidden_layers=(4,), output_classes=2)
        with pytest.raises(ConfigError):
            NetSpec(input_dim=3, hidden_layers=(0,), output_classes=2)
        with pytest.raises(ConfigError):
            NetSpec(input_dim=3, hidden_layers=(4,), output_classes=2, dropout_rate=1.0)
        with pytest.raises(ConfigError):
            NetSpec(input_dim=3, hidden_layers=(4,), output_classes=2, cell="gru")
        with pytest.raises(ConfigError):
            NetSpec(input_dim=3, hidden_layers=(4,), output_classes=2, activation="elu")

    def test_trainer_config_validation(self):
        with pytest.raises(ConfigError):
            TrainerConfig(learning_rate=1e-5, lr_floor=1e-3)
        with pytest.raises(ConfigError):
            TrainerConfig(lr_reduce_factor=1.0)
        with pytest.raises(ConfigError):
            TrainerConfig(max_epochs=0)
        with pytest.raises(ConfigError):
            TrainerConfig(batch_size=0)


class TestInitialization:
    def test_dense_shapes_and_zero_biases(self):
        net = NeuralNet(NetSpec(input_dim=5, hidden_layers=(4, 3), output_classes=2))
        assert net.params["W0"].shape == (4, 5)
        assert net.params["W1"].shape == (3, 4)
        assert net.params["W2"].shape == (2, 3)
        for l in range(3):
            assert not np.any(net.params[f"b{l}"])

    def test_lstm_shapes(self):
        net = NeuralNet(
            NetSpec(input_dim=6, hidden_layers=(5, 4), output_classes=3, cell="lstm")
        )
        assert net.params["Wx0"].shape == (20, 6)
        assert net.params["Wh0"].shape == (20, 5)
        assert net.params["b0"].shape == (20,)
        assert net.params["Wx1"].shape == (16, 5)
        assert net.params["W_out"].shape == (3, 4)

    def test_glorot_bound(self):
        net = NeuralNet(NetSpec(input_dim=10, hidden_layers=(20,), output_classes=2))
        a = np.sqrt(6.0 / (10 + 20))
        W = net.params["W0"]
        assert np.all(np.abs(W) <= a)
        assert W.std() > 0.1 * a  # actually random, not degenerate

    def test_seed_reproducibility(self):
        spec = NetSpec(input_dim=4, hidden_layers=(3,), output_classes=2)
        a, b = NeuralNet(spec, seed=5), NeuralNet(spec, seed=5)
        c = NeuralNet(spec, seed=6)
        assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)
        assert any(not np.array_equal(a.params[k], c.params[k]) for k in a.params)


class TestForward:
    def test_zero_params_give_uniform_probabilities(self):
        net = NeuralNet(NetSpec(input_dim=4, hidden_layers=(3,), output_classes=5))
        net.params = {k: np.zeros_like(v) for k, v in net.params.items()}
        probs = net.predict_proba(np.random.default_rng(0).standard_normal((6, 4)))
        assert np.allclose(probs, 0.2, atol=1e-12)

    def test_probabilities_sum_to_one_under_extreme_logits(self):
        net = NeuralNet(NetSpec(input_dim=2, hidden_layers=(), output_classes=3))
        net.params["W0"] = np.array([[800.0, 0.0], [-800.0, 0.0], [0.0, 0.0]])
        probs = net.predict_proba(np.array([[1.0, 0.0]]))
        assert np.all(np.isfinite(probs))
        assert abs(probs.sum() - 1.0) < 1e-9
        assert probs[0, 0] == pytest.approx(1.0, abs=1e-12)

    def test_forward_single_matches_batch(self):
        rng = np.random.default_rng(1)
        net = NeuralNet(NetSpec(input_dim=4, hidden_layers=(6, 3), output_classes=2))
        X = rng.standard_normal((5, 4))
        batch = net.predict_proba(X)
        for i in range(5):
            assert np.allclose(forward(net, X[i]), batch[i], atol=1e-15)

    def test_train_mode_without_rng_needs_no_rng_when_dropout_zero(self):
        net = NeuralNet(NetSpec(input_dim=3, hidden_layers=(4,), output_classes=2))
        x = np.ones(3)
        assert np.allclose(forward(net, x, train_mode=True), forward(net, x))

    def test_train_mode_with_dropout_requires_rng(self):
        net = NeuralNet(
            NetSpec(input_dim=3, hidden_layers=(4,), output_classes=2, dropout_rate=0.5)
        )
        with pytest.raises(ConfigError, match="needs an rng"):
            forward(net, np.ones(3), train_mode=True)

    def test_dropout_changes_train_forward_but_not_eval(self):
        net = NeuralNet(
            NetSpec(input_dim=8, hidden_layers=(32,), output_classes=2,
                    dropout_rate=0.5),
            seed=3,
        )
        x = np.random.default_rng(4).standard_normal(8)
        eval_probs = forward(net, x)
        train_probs = forward(net, x, train_mode=True, rng=np.random.default_rng(0))
        assert not np.allclose(eval_probs, train_probs)
        assert np.allclose(forward(net, x), eval_probs)  # eval is deterministic

    def test_non_finite_activation_raises(self):
        net = NeuralNet(NetSpec(input_dim=2, hidden_layers=(2,), output_classes=2))
        net.params["W0"] = np.full((2, 2), 1e308)
        with np.errstate(over="ignore"):
            with pytest.raises(ConvergenceError, match="non-finite activation at layer"):
                forward(net, np.array([1e10, 1e10]))


class TestLstmCell:
    def test_zero_weights_zero_state(self):
        H = 4
        Wx, Wh, b = np.zeros((4 * H, 3)), np.zeros((4 * H, H)), np.zeros(4 * H)
        h, c, (i, f, g, o) = lstm_cell_step(Wx, Wh, b, np.ones(3), np.zeros(H), np.zeros(H))
        assert np.allclose(i, 0.5) and np.allclose(f, 0.5) and np.allclose(o, 0.5)
        assert np.allclose(g, 0.0)
        assert np.allclose(c, 0.0) and np.allclose(h, 0.0)

    def test_zero_weights_carry_state(self):
        H = 2
        Wx, Wh, b = np.zeros((4 * H, 1)), np.zeros((4 * H, H)), np.zeros(4 * H)
        c_prev = np.array([1.0, -2.0])
        h, c, _ = lstm_cell_step(Wx, Wh, b, np.zeros(1), np.zeros(H), c_prev)
        assert np.allclose(c, 0.5 * c_prev)  # forget gate 0.5, input term 0
        assert np.allclose(h, 0.5 * np.tanh(c))  # output gate 0.5

    def test_matches_hand_formula(self):
        rng = np.random.default_rng(7)
        H, D = 3, 2
        Wx = rng.standard_normal((4 * H, D))
        Wh = rng.standard_normal((4 * H, H))
        b = rng.standard_normal(4 * H)
        x, h0, c0 = rng.standard_normal(D), rng.standard_normal(H), rng.standard_normal(H)
        h, c, _ = lstm_cell_step(Wx, Wh, b, x, h0, c0)
        z = Wx @ x + Wh @ h0 + b
        sig = lambda v: 1.0 / (1.0 + np.exp(-v))
        i, f = sig(z[:H]), sig(z[H : 2 * H])
        g, o = np.tanh(z[2 * H : 3 * H]), sig(z[3 * H :])
        c_ref = f * c0 + i * g
        assert np.allclose(c, c_ref, atol=1e-12)
        assert np.allclose(h, o * np.tanh(c_ref), atol=1e-12)

    def test_forward_wires_cells_and_classifier(self):
        rng = np.random.default_rng(8)
        net = NeuralNet(
            NetSpec(input_dim=3, hidden_layers=(4,), output_classes=2, cell="lstm"),
            seed=2,
        )
        seq = rng.standard_normal((3, 3))
        h = np.zeros(4)
        c = np.zeros(4)
        for t in range(3):
            h, c, _ = lstm_cell_step(
                net.params["Wx0"], net.params["Wh0"], net.params["b0"], seq[t], h, c
            )
        logits = net.params["W_out"] @ h + net.params["b_out"]
        ref = np.exp(logits - logits.max())
        ref /= ref.sum()
        assert np.allclose(forward(net, seq), ref, atol=1e-12)


class TestGradients:
    def check(self, spec, x, target, weight=1.0, seed=0):
        net = NeuralNet(spec, seed=seed)
        _, grads = backward(net, x, onehot(target, spec.output_classes), weight)
        loss_fn = lambda: backward(net, x, onehot(target, spec.output_classes), weight)[0]
        numeric = central_diff_grads(loss_fn, net.params, eps=1e-5)
        for name in net.params:
            err = relative_error(grads[name], numeric[name])
            assert err < 1e-4, f"{name}: rel err {err:.2e}"

    def test_dense_relu(self):
        spec = NetSpec(input_dim=4, hidden_layers=(3,), output_classes=2)
        x = np.random.default_rng(10).standard_normal(4)
        self.check(spec, x, target=1)

    def test_dense_tanh_deep(self):
        spec = NetSpec(input_dim=4, hidden_layers=(5, 3), output_classes=3,
                       activation="tanh")
        x = np.random.default_rng(11).standard_normal(4)
        self.check(spec, x, target=2, weight=1.7)

    def test_lstm_single_layer(self):
        spec = NetSpec(input_dim=3, hidden_layers=(5,), output_classes=2, cell="lstm")
        seq = np.random.default_rng(12).standard_normal((4, 3))
        self.check(spec, seq, target=0)

    def test_lstm_stacked(self):
        spec = NetSpec(input_dim=2, hidden_layers=(3, 3), output_classes=2, cell="lstm")
        seq = np.random.default_rng(13).standard_normal((3, 2))
        self.check(spec, seq, target=1, weight=0.5)

    def test_class_weight_scales_gradients_linearly(self):
        spec = NetSpec(input_dim=3, hidden_layers=(4,), output_classes=2)
        net = NeuralNet(spec, seed=1)
        x = np.random.default_rng(14).standard_normal(3)
        loss1, g1 = backward(net, x, onehot(0, 2), 1.0)
        loss2, g2 = backward(net, x, onehot(0, 2), 2.0)
        assert loss2 == pytest.approx(2 * loss1, rel=1e-12)
        for k in g1:
            assert np.allclose(g2[k], 2 * g1[k], atol=1e-15)

    def test_confidently_correct_prediction_has_tiny_gradients(self):
        net = NeuralNet(NetSpec(input_dim=2, hidden_layers=(), output_classes=2))
        net.params["W0"] = np.array([[40.0, 0.0], [-40.0, 0.0]])
        net.params["b0"] = np.zeros(2)
        loss, grads = backward(net, np.array([1.0, 0.0]), onehot(0, 2))
        assert loss < 1e-6
        assert all(np.abs(g).max() < 1e-6 for g in grads.values())


class TestClassWeights:
    def test_balanced_formula(self):
        y = [0] * 90 + [1] * 10
        w = compute_class_weights(y)
        assert np.allclose(w, [100 / 180, 100 / 20], atol=1e-12)

    def test_uniform_when_balanced(self):
        assert np.allclose(compute_class_weights([0, 1, 0, 1]), [1.0, 1.0])

    def test_empty_class_raises(self):
        with pytest.raises(DataError, match=r"\[1\]"):
            compute_class_weights([0, 0, 2, 2], n_classes=3)


class TestAdam:
    def test_first_step_is_signed_learning_rate(self):
        params = {"w": np.array([1.0, 1.0])}
        adam = Adam(params)
        adam.step(params, {"w": np.array([0.5, -2.0])}, lr=0.1)
        # bias-corrected first step: lr * g / (|g| + eps) ~= lr * sign(g)
        assert np.allclose(params["w"], [0.9, 1.1], atol=1e-7)

    def test_matches_reference_loop(self):
        rng = np.random.default_rng(15)
        params = {"w": rng.standard_normal(4)}
        ref = params["w"].copy()
        adam = Adam(params)
        m = np.zeros(4)
        v = np.zeros(4)
        for t in range(1, 6):
            g = rng.standard_normal(4)
            adam.step(params, {"w": g}, lr=0.01)
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            ref -= 0.01 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
        assert np.allclose(params["w"], ref, atol=1e-15)


def separable_set(n=40, dim=4, seed=0):
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    X = rng.standard_normal((n, dim)) + np.where(y[:, None] == 1, 3.0, -3.0)
    return X, y


class TestTrainer:
    def test_separable_data_reaches_full_train_accuracy(self):
        X, y = separable_set()
        net = NeuralNet(NetSpec(input_dim=4, hidden_layers=(8,), output_classes=2),
                        seed=1)
        history = train(net, (X, y), config=TrainerConfig(seed=1))
        assert history["stop_epoch"] <= 500
        assert history["best_loss"] < 0.01  # near-zero cross-entropy
        assert np.array_equal(net.predict(X), y)

    def test_bit_reproducible_with_fixed_seed(self):
        X, y = separable_set(seed=2)
        cfg = TrainerConfig(max_epochs=8, seed=4)
        spec = NetSpec(input_dim=4, hidden_layers=(6, 3), output_classes=2)
        net_a, net_b = NeuralNet(spec, seed=4), NeuralNet(spec, seed=4)
        hist_a = train(net_a, (X, y), config=cfg)
        hist_b = train(net_b, (X, y), config=cfg)
        assert all(np.array_equal(net_a.params[k], net_b.params[k]) for k in net_a.params)
        assert hist_a == hist_b

    def test_seed_changes_the_run(self):
        X, y = separable_set(seed=2)
        spec = NetSpec(input_dim=4, hidden_layers=(6,), output_classes=2)
        net_a, net_b = NeuralNet(spec, seed=4), NeuralNet(spec, seed=5)
        train(net_a, (X, y), config=TrainerConfig(max_epochs=3, seed=4))
        train(net_b, (X, y), config=TrainerConfig(max_epochs=3, seed=5))
        assert any(not np.array_equal(net_a.params[k], net_b.params[k])
                   for k in net_a.params)

    def test_monitor_is_validation_loss_when_given(self):
        X, y = separable_set(seed=3)
        Xv, yv = separable_set(n=20, seed=30)
        net = NeuralNet(NetSpec(input_dim=4, hidden_layers=(5,), output_classes=2))
        hist = train(net, (X, y), (Xv, yv), TrainerConfig(max_epochs=6))
        for rec in hist["epochs"]:
            assert rec["val_loss"] is not None
            assert rec["monitor"] == rec["val_loss"]

    def test_monitor_is_train_loss_without_validation(self):
        X, y = separable_set(seed=3)
        net = NeuralNet(NetSpec(input_dim=4, hidden_layers=(5,), output_classes=2))
        hist = train(net, (X, y), None, TrainerConfig(max_epochs=4))
        for rec in hist["epochs"]:
            assert rec["val_loss"] is None
            assert rec["monitor"] == rec["train_loss"]

    def test_best_epoch_params_are_restored(self):
        from phenotext.neuralnet import _mean_ce_loss

        X, y = separable_set(seed=6)
        Xv, yv = separable_set(n=16, seed=60)
        net = NeuralNet(NetSpec(input_dim=4, hidden_layers=(6,), output_classes=2))
        hist = train(net, (X, y), (Xv, yv), TrainerConfig(max_epochs=30, seed=2))
        # after restore, re-evaluating the monitored loss reproduces best_loss
        assert _mean_ce_loss(net, Xv, yv) == pytest.approx(hist["best_loss"], abs=1e-12)

    def test_improvement_threshold_respected(self):
        X, y = separable_set(seed=7)
        net = NeuralNet(NetSpec(input_dim=4, hidden_layers=(5,), output_classes=2))
        hist = train(net, (X, y), config=TrainerConfig(max_epochs=40, seed=0))
        monitors = [rec["monitor"] for rec in hist["epochs"]]
        assert hist["best_loss"] <= min(monitors) + 1e-4

    def test_empty_training_set_raises(self):
        net = NeuralNet(NetSpec(input_dim=4, hidden_layers=(5,), output_classes=2))
        with pytest.raises(DataError, match="empty"):
            train(net, (np.zeros((0, 4)), np.zeros(0, dtype=int)))

    def test_exploding_parameters_raise_convergence_error(self):
        X, y = separable_set(seed=8)
        net = NeuralNet(NetSpec(input_dim=4, hidden_layers=(4,), output_classes=2))
        net.params["W0"] = np.full((4, 4), 1e308)
        with np.errstate(over="ignore"):
            with pytest.raises(ConvergenceError):
                train(net, (X, y), config=TrainerConfig(max_epochs=1,
                                                        restart_f1_threshold=2.0))


class TestPlateauAndEarlyStop:
    def frozen_history(self):
        # zero class weights zero every gradient, so Adam never moves the
        # parameters and the (unweighted) monitored loss is exactly constant
        rng = np.random.default_rng(9)
        X = rng.standard_normal((8, 3))
        y = np.array([0, 1] * 4)
        net = NeuralNet(NetSpec(input_dim=3, hidden_layers=(4,), output_classes=2),
                        seed=9)
        before = net.clone_params()
        cfg = TrainerConfig(class_weights=np.array([0.0, 0.0]), lr_patience=1,
                            restart_f1_threshold=2.0)
        hist = train(net, (X, y), config=cfg)
        return hist, net, before

    def test_lr_halves_to_exact_floor_and_stays(self):
        hist, _, _ = self.frozen_history()
        lrs = [rec["lr"] for rec in hist["epochs"]]
        assert lrs[:7] == [0.001, 0.001, 0.0005, 0.00025, 0.000125, 0.0000625, 0.00005]
        assert all(a >= b for a, b in zip(lrs, lrs[1:]))  # non-increasing
        assert min(lrs) == 0.00005  # exact clamp, never below
        assert lrs[-1] == 0.00005

    def test_lr_reduce_events_stop_at_the_floor(self):
        hist, _, _ = self.frozen_history()
        reduces = [e for e in hist["events"] if e["type"] == "lr_reduce"]
        assert [e["lr"] for e in reduces] == [0.0005, 0.00025, 0.000125, 0.0000625,
                                              0.00005]
        assert [e["epoch"] for e in reduces] == [2, 3, 4, 5, 6]

    def test_early_stop_fires_after_patience_epochs(self):
        hist, _, _ = self.frozen_history()
        stops = [e for e in hist["events"] if e["type"] == "early_stop"]
        assert len(stops) == 1
        assert stops[0]["epoch"] == 26  # epoch 1 improves from inf, then 25 waits
        assert hist["stop_epoch"] == 26
        assert len(hist["epochs"]) == 26

    def test_zero_gradients_leave_parameters_untouched(self):
        _, net, before = self.frozen_history()
        assert all(np.array_equal(net.params[k], before[k]) for k in before)


class TestRestartGuard:
    def test_lucky_initialization_triggers_restart(self):
        spec = NetSpec(input_dim=5, hidden_layers=(4,), output_classes=2)
        net = NeuralNet(spec, seed=7)
        X = np.random.default_rng(70).standard_normal((30, 5))
        y = net.predict(X)  # gold == the untrained net's own output
        hist = train(net, (X, y), config=TrainerConfig(max_epochs=1))
        assert hist["restarts"] >= 1
        first = hist["events"][0]
        assert first["type"] == "restart"
        assert first["initial_f1"] == 1.0

    def test_restart_cap_respected(self):
        spec = NetSpec(input_dim=5, hidden_layers=(4,), output_classes=2)
        net = NeuralNet(spec, seed=7)
        X = np.random.default_rng(70).standard_normal((30, 5))
        y = net.predict(X)
        hist = train(net, (X, y),
                     config=TrainerConfig(max_epochs=1, max_restarts=0))
        assert hist["restarts"] == 0
        assert not [e for e in hist["events"] if e["type"] == "restart"]

    def test_poor_initialization_skips_restart(self):
        spec = NetSpec(input_dim=5, hidden_layers=(4,), output_classes=2)
        net = NeuralNet(spec, seed=7)
        X = np.random.default_rng(70).standard_normal((30, 5))
        y = 1 - net.predict(X)  # gold is the exact opposite: initial F1 == 0
        hist = train(net, (X, y), config=TrainerConfig(max_epochs=1))
        assert hist["restarts"] == 0


class TestEmbeddingBaseline:
    def test_learns_separated_clusters(self):
        es, labels = synth_embeddings(24, 6, seed=1, separation=6.0)
        net = embed_baseline_train(
            es, labels, TrainerConfig(max_epochs=60, seed=0), hidden_layers=(8,),
            dropout_rate=0.0,
        )
        seqs = embeddings_to_sequences(es)
        assert np.array_equal(net.predict(seqs), labels)

    def test_per_chunk_sequences_train(self):
        es, labels = synth_embeddings(16, 5, mode="per_chunk", seed=2, separation=6.0)
        net = embed_baseline_train(
            es, labels, TrainerConfig(max_epochs=10, seed=0), hidden_layers=(6,),
        )
        assert net.spec.cell == "lstm"
        lengths = {len(s) for s in embeddings_to_sequences(es)}
        assert len(lengths) > 1  # genuinely ragged input

    def test_averaged_mode_gives_length_one_sequences(self):
        es, _ = synth_embeddings(5, 4, seed=3)
        seqs = embeddings_to_sequences(es)
        assert all(s.shape == (1, 4) for s in seqs)

    def test_empty_set_raises(self):
        es = EmbeddingSet(mode="averaged", dim=4, ids=[], vectors=[])
        with pytest.raises(DataError, match="empty"):
            embed_baseline_train(es, [])

    def test_count_mismatch_raises(self):
        es, labels = synth_embeddings(6, 4, seed=4)
        with pytest.raises(DataError, match="labels"):
            embed_baseline_train(es, labels[:-1])


class TestSerialization:
    @pytest.mark.parametrize("cell", ["dense", "lstm"])
    def test_round_trip(self, tmp_path, cell):
        import json

        spec = NetSpec(input_dim=3, hidden_layers=(4,), output_classes=2, cell=cell)
        net = NeuralNet(spec, seed=11)
        net.history = {"restarts": 0}
        path = tmp_path / "net.json"
        save_net(net, path, extra={"class_names": ["x", "y"]})
        payload = json.loads(path.read_text())
        assert payload["algo"] == ("mlp" if cell == "dense" else "lstm")
        back = load_net(payload)
        assert back.spec == spec
        assert all(np.array_equal(back.params[k], net.params[k]) for k in net.params)
        if cell == "dense":
            probe = np.random.default_rng(0).standard_normal((4, 3))
        else:
            probe = [np.random.default_rng(0).standard_normal((2, 3))]
        assert np.array_equal(back.predict(probe), net.predict(probe))
