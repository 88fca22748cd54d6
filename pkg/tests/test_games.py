import copy
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from threeplayer import games, toy
from threeplayer.nets import classification_loss, init_xavier_sqrt2, mlp_forward

SMALL = dict(batch_size=16, g_hidden=(8,), d_hidden=(8,), latent_dim=3)


def toy_data(n=8, seed=1):
    return toy.sample_mixture(toy.separable_spec(), n, seed)


def same(a, b):
    return a.keys() == b.keys() and all(np.array_equal(a[k], b[k]) for k in a)


def sigmoid(v):
    return 1.0 / (1.0 + math.exp(-v))


def scalar_state(**over):
    """One-dimensional world with a single class: G(z) = a z + c, D = sigmoid(w x + u), C = v x + b."""
    cfg = games.GameConfig(num_classes=1, data_dim=1, latent_dim=1, g_hidden=(), d_hidden=(), batch_size=5,
                           gan_beta1=0.0, **over)
    state = games.new_game_state(cfg)
    state.g = {"W0": np.array([[0.5], [0.2]]), "b0": np.zeros(1)}
    state.g0 = copy.deepcopy(state.g)
    state.d = {"W0": np.array([[0.8], [0.1]]), "b0": np.zeros(1)}
    state.c = {"W0": np.array([[1.5]]), "b0": np.array([0.3])}
    return state


class TestSampling:
    def test_shape_and_labels(self):
        cfg = games.GameConfig(**SMALL)
        x, y = games.sample_generator(cfg.g_spec(), init_xavier_sqrt2(cfg.g_spec(), 0), 4, np.random.default_rng(0))
        assert x.shape == (4, 2) and set(y.tolist()) <= {0, 1}

    def test_same_rng_state_same_batch(self):
        cfg = games.GameConfig(**SMALL)
        g = init_xavier_sqrt2(cfg.g_spec(), 0)
        a = games.sample_generator(cfg.g_spec(), g, 10, np.random.default_rng(3))
        b = games.sample_generator(cfg.g_spec(), g, 10, np.random.default_rng(3))
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_zero_generator_is_constant(self):
        cfg = games.GameConfig(**SMALL)
        g = {k: np.zeros_like(v) for k, v in init_xavier_sqrt2(cfg.g_spec(), 0).items()}
        x, _ = games.sample_generator(cfg.g_spec(), g, 20, np.random.default_rng(1))
        assert np.all(x == x[0])

    def test_nonpositive_size_rejected(self):
        cfg = games.GameConfig(**SMALL)
        with pytest.raises(ValueError):
            games.sample_generator(cfg.g_spec(), init_xavier_sqrt2(cfg.g_spec(), 0), 0, np.random.default_rng(0))

    def test_streams_are_independent_and_named(self):
        a, b = games.stream(5, "d"), games.stream(5, "g")
        assert not np.array_equal(a.random(4), b.random(4))
        assert np.array_equal(games.stream(5, "d").random(4), games.stream(5, "d").random(4))
        with pytest.raises(KeyError):
            games.stream(5, "nope")


class TestDiscriminatorStep:
    def test_half_everywhere(self):
        state = games.new_game_state(games.GameConfig(**SMALL))
        state.d = {k: np.zeros_like(v) for k, v in state.d.items()}
        batch = (np.ones((16, 2)), np.zeros(16, dtype=int))
        assert games.discriminator_step(state, batch, batch) == pytest.approx(2 * math.log(0.5), abs=1e-6)

    def test_clamped_at_perfect_discriminator(self):
        state = scalar_state()
        state.d = {"W0": np.array([[0.0], [0.0]]), "b0": np.array([1000.0])}
        batch = (np.zeros((5, 1)), np.zeros(5, dtype=int))
        value = games.discriminator_step(state, batch, batch)
        assert value == pytest.approx(math.log(1e-12), rel=1e-9)

    def test_one_parameter_hand_step(self):
        state = scalar_state()
        xr, xf = np.array([0.5, 1.0, -0.2, 2.0, 0.3]), np.array([-1.0, 0.4, 0.0, 1.2, -0.6])
        lab = np.zeros(5, dtype=int)
        w, u, lr = 0.8, 0.1, state.config.lr_d
        dr = [sigmoid(w * v + u) for v in xr]
        df = [sigmoid(w * v + u) for v in xf]
        want_obj = np.mean([math.log(p) for p in dr]) + np.mean([math.log(1 - p) for p in df])
        # ascent gradient of the objective with respect to w
        gw = np.mean([(1 - p) * v for p, v in zip(dr, xr)]) - np.mean([p * v for p, v in zip(df, xf)])
        before = copy.deepcopy(state.d)
        got = games.discriminator_step(state, (xr[:, None], lab), (xf[:, None], lab))
        assert got == pytest.approx(want_obj, rel=1e-14)
        # beta1 = 0: the first moment is exactly the descended gradient
        assert state.d_opt.m["W0"][0, 0] == pytest.approx(-gw, rel=1e-12)
        assert state.d["W0"][0, 0] - before["W0"][0, 0] == pytest.approx(lr * gw / (abs(gw) + 1e-8), rel=1e-12)

    def test_size_mismatch(self):
        state = scalar_state()
        with pytest.raises(ValueError):
            games.discriminator_step(state, (np.zeros((5, 1)), np.zeros(5, int)), (np.zeros((4, 1)), np.zeros(4, int)))

    def test_nonfinite_aborts(self):
        state = scalar_state()
        batch = (np.full((5, 1), np.nan), np.zeros(5, dtype=int))
        with pytest.raises(games.TrainingDiverged):
            games.discriminator_step(state, batch, batch)


class TestGeneratorStep:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    @pytest.mark.parametrize("nonsaturating", [False, True])
    def test_lambda_zero_is_cgan_step(self, seed, nonsaturating):
        cfg = games.GameConfig(seed=seed, nonsaturating=nonsaturating, **SMALL)
        a, b = games.new_game_state(cfg), games.new_game_state(cfg)
        ga = games.generator_step(a, None)
        gb = games.generator_step(b, 0.0)
        assert ga[0] == gb[0] and math.isnan(ga[1]) and not math.isnan(gb[1])
        assert same(a.g, b.g)

    def test_one_parameter_hand_step(self):
        state = scalar_state()
        lam = 0.1
        z, _ = games._draw_latent(copy.deepcopy(state.rng_g), 5, 1, 1)
        z = z[:, 0]
        a, c, w, u, v, bc = 0.5, 0.2, 0.8, 0.1, 1.5, 0.3
        xg = a * z + c
        sd = np.array([sigmoid(w * x + u) for x in xg])
        active = (1 + v * xg + bc) > 0  # single class: hinge label -1
        # d/da of mean log(1 - D(G)) and of the reversed classifier term
        g_gan = np.mean(-sd * w * z)
        g_cls = -lam * np.mean(np.where(active, v * z, 0.0))
        d0, c0 = copy.deepcopy(state.d), copy.deepcopy(state.c)
        gan, cls = games.generator_step(state, lam)
        assert gan == pytest.approx(np.mean(np.log(1 - sd)), rel=1e-14)
        assert cls == pytest.approx(np.mean(np.maximum(0, 1 + v * xg + bc)), rel=1e-14)
        assert state.g_opt.m["W0"][0, 0] == pytest.approx(g_gan + g_cls, rel=1e-12)
        assert same(state.d, d0) and same(state.c, c0)

    def test_negative_lambda_rejected(self):
        with pytest.raises(ValueError):
            games.generator_step(scalar_state(), -0.1)

    def _injected(self, lam, reverse=True, seed=0):
        cfg = games.GameConfig(seed=seed, **SMALL)
        rng = np.random.default_rng(seed)
        g = init_xavier_sqrt2(cfg.g_spec(), seed)
        c = init_xavier_sqrt2(cfg.c_spec(), seed + 1)
        z, y = rng.normal(size=(16, cfg.latent_dim)), rng.integers(0, 2, 16)

        def classify(x, labels):
            return classification_loss("hinge", mlp_forward(cfg.c_spec(), c, x), labels)

        return games.generator_class_gradient(cfg.g_spec(), g, z, y, classify, lam, reverse)

    @staticmethod
    def _norm(grads):
        return math.sqrt(sum(float(np.sum(v * v)) for v in grads.values()))

    @pytest.mark.parametrize("seed", [0, 3])
    def test_injected_gradient_scales_linearly(self, seed):
        small, big = self._norm(self._injected(0.05, seed=seed)), self._norm(self._injected(0.1, seed=seed))
        assert small > 0
        assert abs(big / small - 2.0) < 1e-9
        assert self._norm(self._injected(0.0, seed=seed)) == 0.0

    def test_acgan_direction_is_the_negation(self):
        rev, fwd = self._injected(0.1, True), self._injected(0.1, False)
        for k in rev:
            np.testing.assert_allclose(fwd[k], -rev[k], rtol=1e-12, atol=1e-15)


class TestClassifierStep:
    def test_largest_remainder_counts(self):
        assert games.BatchPlan().counts(6) == (2, 2, 2)
        assert games.BatchPlan().counts(64) == (22, 21, 21)
        # quotas 1.5, 0.75, 0.75: the two larger remainders take the leftover slots
        assert games.BatchPlan(0.5, 0.25, 0.25).counts(3) == (1, 1, 1)
        assert games.BatchPlan(0.5, 0.5, 0.0).counts(3) == (2, 1, 0)

    @given(st.floats(0, 1), st.floats(0, 1), st.integers(1, 500))
    def test_counts_sum_and_stay_near_quota(self, a, b, m):
        lo, hi = sorted((a, b))
        plan = games.BatchPlan(lo, hi - lo, 1 - hi)
        counts = plan.counts(m)
        assert sum(counts) == m
        for n, f in zip(counts, (lo, hi - lo, 1 - hi)):
            assert abs(n - f * m) < 1.0

    def test_invalid_plan(self):
        with pytest.raises(ValueError):
            games.BatchPlan(0.5, 0.5, 0.5)
        with pytest.raises(ValueError):
            games.BatchPlan(-0.1, 0.6, 0.5)

    def test_batch_composition(self, monkeypatch):
        cfg = games.GameConfig(batch_size=6, **{k: v for k, v in SMALL.items() if k != "batch_size"})
        state = games.new_game_state(cfg)
        # constant generators: G0 emits (5, 5), the current G emits (-7, -7)
        state.g0 = {k: np.zeros_like(v) for k, v in state.g.items()}
        state.g0[f"b{cfg.g_spec().num_layers - 1}"] = np.full(2, 5.0)
        state.g = copy.deepcopy(state.g0)
        state.g[f"b{cfg.g_spec().num_layers - 1}"] = np.full(2, -7.0)
        seen = []
        real = mlp_forward

        def spy(spec, params, x, labels=None):
            if spec == cfg.c_spec():
                seen.append(np.array(x))
            return real(spec, params, x, labels)

        monkeypatch.setattr(games, "mlp_forward", spy)
        games.classifier_step(state, games.BatchPlan(), np.zeros((3, 2)), np.array([0, 1, 0]))
        (batch,) = seen
        assert [int(np.sum(np.all(batch == v, axis=1))) for v in (0.0, 5.0, -7.0)] == [2, 2, 2]

    def test_real_only_plan_is_supervised_training(self):
        cfg = games.GameConfig(**SMALL)
        x, y = toy_data()
        state = games.new_game_state(cfg)
        games.classifier_step(state, games.BatchPlan(1.0, 0.0, 0.0), x, y)
        plain = games.train_classifier(cfg, x, y, iterations=1)
        assert same(state.c, plain.classifier.params)

    def test_descent_on_fixed_batch(self):
        cfg = games.GameConfig(lr_c=1e-3, weight_decay=0.0, **SMALL)
        state = games.new_game_state(cfg)
        x, y = np.array([[0.3, -0.2]]), np.array([1])
        before = games.classifier_step(state, games.BatchPlan(1.0, 0.0, 0.0), x, y)
        after = float(state.classifier().loss_on(np.repeat(x, 16, 0), np.repeat(y, 16)).value)
        assert after < before

    def test_empty_real_data_rejected(self):
        state = games.new_game_state(games.GameConfig(**SMALL))
        with pytest.raises(ValueError):
            games.classifier_step(state, games.BatchPlan(), np.zeros((0, 2)), np.zeros(0, dtype=int))


class TestOwnership:
    def test_each_step_touches_only_its_network(self):
        cfg = games.GameConfig(**SMALL)
        x, y = toy_data()
        state = games.new_game_state(cfg)
        state.g = {k: v + 0.01 for k, v in state.g.items()}  # so G differs from G0

        def check(changed):
            after = games.snapshot(state)
            for name in ("g", "d", "c", "g0"):
                assert same(before[name], after[name]) == (name != changed), name

        before = games.snapshot(state)
        games.discriminator_step(state, games.sample_real(x, y, 16, state.rng_d),
                                 games.sample_generator(state.g_spec, state.g, 16, state.rng_d))
        check("d")
        before = games.snapshot(state)
        games.generator_step(state, 0.1)
        check("g")
        before = games.snapshot(state)
        games.classifier_step(state, games.BatchPlan(), x, y)
        check("c")


class TestTrainingLoops:
    def test_zero_iterations_keep_init(self):
        cfg = games.GameConfig(seed=4, **SMALL)
        x, y = toy_data()
        r = games.train_cgan(cfg, x, y, iterations=0)
        assert same(r.g, init_xavier_sqrt2(cfg.g_spec(), games.stream_seed(4, "init_g")))
        assert same(r.d, init_xavier_sqrt2(cfg.d_spec(), games.stream_seed(4, "init_d")))
        a = games.train_acgan(cfg, x, y, iterations=0)
        assert same(a.d, init_xavier_sqrt2(cfg.acgan_d_spec(), games.stream_seed(4, "init_d")))

    def test_cgan_deterministic(self):
        cfg = games.GameConfig(**SMALL)
        x, y = toy_data()
        a, b = games.train_cgan(cfg, x, y, iterations=30), games.train_cgan(cfg, x, y, iterations=30)
        assert same(a.g, b.g) and same(a.d, b.d) and a.g_trace == b.g_trace and a.d_trace == b.d_trace

    def test_empty_data_rejected(self):
        cfg = games.GameConfig(**SMALL)
        for fn in (games.train_cgan, games.train_acgan, games.train_classifier):
            with pytest.raises(ValueError):
                fn(cfg, np.zeros((0, 2)), np.zeros(0, dtype=int))

    def test_three_player_needs_pretrained(self):
        x, y = toy_data()
        with pytest.raises(ValueError):
            games.train_three_player(games.GameConfig(**SMALL), x, y, None, None)

    @pytest.mark.parametrize("nonsaturating", [False, True])
    def test_zero_weight_game_replays_cgan(self, nonsaturating):
        cfg = games.GameConfig(w_c=0.0, nonsaturating=nonsaturating, **SMALL)
        x, y = toy_data()
        pre = games.train_cgan(cfg, x, y, iterations=20)
        game = games.train_three_player(cfg, x, y, pre.g, pre.d, iterations=40)
        cont = games.train_cgan(cfg, x, y, pre.g, pre.d, iterations=40, lr_decay=cfg.lr_decay)
        assert same(game.g, cont.g) and same(game.d, cont.d)
        assert game.traces["gan_loss"] == cont.g_trace and game.traces["d_objective"] == cont.d_trace

    def test_one_iteration_runs_d_g_c_in_order(self, monkeypatch):
        cfg = games.GameConfig(**SMALL)
        x, y = toy_data()
        pre = games.train_cgan(cfg, x, y, iterations=2)
        calls = []
        for name in ("discriminator_step", "generator_step", "classifier_step"):
            original = getattr(games, name)

            def wrapped(*args, _f=original, _n=name, **kw):
                calls.append(_n)
                return _f(*args, **kw)

            monkeypatch.setattr(games, name, wrapped)
        r = games.train_three_player(cfg, x, y, pre.g, pre.d, iterations=1)
        assert calls == ["discriminator_step", "generator_step", "classifier_step"]
        assert not same(r.g, pre.g) and not same(r.d, pre.d) and same(r.g0, pre.g)

    def test_frozen_classifier_is_untouched(self):
        cfg = games.GameConfig(**SMALL)
        x, y = toy_data()
        pre = games.train_cgan(cfg, x, y, iterations=5)
        c = games.train_classifier(cfg, x, y, iterations=5).classifier.params
        r = games.train_three_player(cfg, x, y, pre.g, pre.d, c, freeze_classifier=True, iterations=5)
        assert same(r.c, c) and all(math.isnan(v) for v in r.traces["c_loss"])
        lam = r.traces["lambda"]
        assert lam[0] == 0.0 and lam == sorted(lam) and lam[-1] < cfg.w_c

    def test_three_player_deterministic(self):
        cfg = games.GameConfig(**SMALL)
        x, y = toy_data()
        pre = games.train_cgan(cfg, x, y, iterations=5)
        a = games.train_three_player(cfg, x, y, pre.g, pre.d, iterations=10)
        b = games.train_three_player(cfg, x, y, pre.g, pre.d, iterations=10)
        assert all(same(getattr(a, k), getattr(b, k)) for k in ("g", "d", "c", "g0"))

    def test_divergence_reports_iteration(self):
        cfg = games.GameConfig(**SMALL)
        x, y = toy_data()
        x = x.copy()
        x[3] = np.inf
        with pytest.raises(games.TrainingDiverged) as info, np.errstate(invalid="ignore"):
            games.train_cgan(cfg, x, y, iterations=50)
        assert info.value.iteration is not None

    def test_acgan_above_chance(self):
        cfg = games.GameConfig(seed=0, cgan_iters=1500)
        x, y = toy_data(64, 3)
        r = games.train_acgan(cfg, x, y)
        xt, yt = toy.sample_mixture(toy.separable_spec(), 500, 77)
        assert r.classifier.accuracy(xt, yt) > 0.5


class TestClassifierTraining:
    def test_two_point_dataset_reaches_zero_hinge(self):
        cfg = games.GameConfig(batch_size=8, weight_decay=0.0)
        x, y = np.array([[1.0, 1.0], [-1.0, -1.0]]), np.array([1, 0])
        r = games.train_classifier(cfg, x, y, iterations=500)
        assert r.loss_trace[-1] == 0.0

    def test_toy_training_set_separated(self):
        x, y = toy_data(8, 100)
        r = games.train_classifier(games.GameConfig(), x, y)
        assert r.accuracy_trace[-1] == 1.0 and r.classifier.accuracy(x, y) == 1.0

    def test_same_seed_same_params(self):
        cfg = games.GameConfig(**SMALL)
        x, y = toy_data()
        a = games.train_classifier(cfg, x, y, iterations=20)
        b = games.train_classifier(cfg, x, y, iterations=20)
        assert same(a.classifier.params, b.classifier.params)

    def test_generated_only_ignores_real_batches(self):
        cfg = games.GameConfig(**SMALL)
        x, y = toy_data()
        g = init_xavier_sqrt2(cfg.g_spec(), 0)
        a = games.train_classifier(cfg, x, y, generator=(cfg.g_spec(), g), augment_fraction=1.0, iterations=5)
        b = games.train_classifier(cfg, x + 100.0, y, generator=(cfg.g_spec(), g), augment_fraction=1.0, iterations=5)
        assert same(a.classifier.params, b.classifier.params)

    def test_plan_retraining_real_only_matches_supervised(self):
        cfg = games.GameConfig(plan=games.BatchPlan(1.0, 0.0, 0.0), **SMALL)
        x, y = toy_data()
        g = init_xavier_sqrt2(cfg.g_spec(), 0)
        a = games.train_classifier_on_plan(cfg, x, y, g, g, iterations=15)
        b = games.train_classifier(cfg, x, y, iterations=15)
        assert same(a.classifier.params, b.classifier.params) and a.loss_trace == b.loss_trace

    def test_softmax_decision_and_normal(self):
        spec = games.GameConfig(classifier_loss="softmax").c_spec()
        clf = games.Classifier(spec, {"W0": np.array([[0.0, 1.0], [0.0, 1.0]]), "b0": np.zeros(2)}, "softmax")
        classes, score = clf.decide(np.array([[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]]))
        assert classes.tolist() == [1, 0, -1] and score.tolist() == [2.0, -2.0, 0.0]
        assert clf.linear_normal().tolist() == [1.0, 1.0]

    def test_linear_normal_rejects_deep_nets(self):
        cfg = games.GameConfig(c_hidden=(4,))
        clf = games.Classifier(cfg.c_spec(), init_xavier_sqrt2(cfg.c_spec(), 0))
        with pytest.raises(ValueError):
            clf.linear_normal()
