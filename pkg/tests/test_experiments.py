import numpy as np
import pytest

from pusmi.data import ClassPrior, sample_gaussian_labeled
from pusmi.errors import CapacityError
from pusmi.estimator import EstimatorConfig
from pusmi.experiments import (
    FIG1_COLUMNS,
    fig1_sweep,
    fig1_sweep_labeled,
    keyed_seed,
    purl_toy,
    toy_purl_config,
)

CHEAP = EstimatorConfig(b_max=32, folds=3)


class TestKeyedSeed:
    def test_same_key_same_stream(self):
        root = np.random.SeedSequence(5)
        a = np.random.default_rng(keyed_seed(root, 3, 1)).random(4)
        b = np.random.default_rng(keyed_seed(root, 3, 1)).random(4)
        assert np.array_equal(a, b)

    def test_distinct_keys_distinct_streams(self):
        root = np.random.SeedSequence(5)
        a = np.random.default_rng(keyed_seed(root, 3, 1)).random(4)
        b = np.random.default_rng(keyed_seed(root, 3, 2)).random(4)
        c = np.random.default_rng(keyed_seed(root, 1, 3)).random(4)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)


class TestFig1Sweep:
    def test_rows_sorted_and_shaped(self, toy_spec):
        rows = fig1_sweep(
            toy_spec, [30, 15], vary="n_p", n_fixed=40, trials=3, seed=1, config=CHEAP
        )
        assert FIG1_COLUMNS == ("n", "mse_mean", "mse_stderr")
        assert [row[0] for row in rows] == [15, 30]
        for _, mse, stderr in rows:
            assert mse >= 0.0 and stderr >= 0.0

    def test_deterministic_and_thread_invariant(self, toy_spec):
        args = dict(n_grid=[12, 25], vary="n_u", n_fixed=20, trials=4, seed=2,
                    config=CHEAP)
        serial = fig1_sweep(toy_spec, **args, threads=1)
        again = fig1_sweep(toy_spec, **args, threads=1)
        threaded = fig1_sweep(toy_spec, **args, threads=2)
        assert serial == again
        assert serial == threaded

    def test_argument_validation(self, toy_spec):
        with pytest.raises(ValueError, match="non-empty"):
            fig1_sweep(toy_spec, [], "n_p", 40, trials=3)
        with pytest.raises(ValueError, match="trials"):
            fig1_sweep(toy_spec, [10], "n_p", 40, trials=1)
        with pytest.raises(ValueError, match="vary"):
            fig1_sweep(toy_spec, [10], "rows", 40, trials=3)


class TestFig1SweepLabeled:
    def test_runs_on_labeled_corpus(self, toy_spec):
        corpus = sample_gaussian_labeled(toy_spec, 600, 11)
        rows = fig1_sweep_labeled(
            corpus, toy_spec.prior, [10, 20], vary="n_p", n_fixed=30,
            trials=3, seed=4, config=CHEAP,
        )
        assert [row[0] for row in rows] == [10, 20]
        assert all(row[1] >= 0 for row in rows)
        again = fig1_sweep_labeled(
            corpus, toy_spec.prior, [10, 20], vary="n_p", n_fixed=30,
            trials=3, seed=4, config=CHEAP,
        )
        assert rows == again

    def test_small_corpus_exhausts_class_pool(self, toy_spec):
        corpus = sample_gaussian_labeled(toy_spec, 60, 12)
        with pytest.raises(CapacityError, match="positive"):
            fig1_sweep_labeled(
                corpus, ClassPrior(0.5), [25], vary="n_p", n_fixed=5,
                trials=2, seed=5, config=CHEAP,
            )


class TestToyPurlConfig:
    def test_recipe_shape(self):
        cfg = toy_purl_config(epochs=17)
        assert cfg.v_spec.layer_sizes == (2, 1)
        assert cfg.w_spec.layer_sizes == (1, 1)
        assert cfg.w_spec.input_relu
        assert not cfg.w_spec.input_batchnorm  # the dead-zone hazard
        assert cfg.epochs == 17
        assert cfg.validation is None


class TestPurlToy:
    def test_zero_epochs_keeps_first_initialisation(self, toy_spec):
        result = purl_toy(toy_spec, n_p=30, n_u=60, epochs=0, restarts=3, eval_n=40,
                          seed=6)
        assert result.train.history == ()
        assert np.linalg.norm(result.purl_direction) == pytest.approx(1.0)

    def test_fields_are_consistent(self, toy_spec):
        result = purl_toy(toy_spec, n_p=40, n_u=80, epochs=4, restarts=2, eval_n=50,
                          seed=7)
        assert result.cos_horizontal == abs(float(result.purl_direction[0]))
        assert result.cos_vertical == abs(float(result.pca_direction[1]))
        assert 0.0 <= result.cos_horizontal <= 1.0
        assert np.linalg.norm(result.pca_direction) == pytest.approx(1.0)
        assert result.eval_data.n == 50
        assert result.purl_projection.shape == (50,)
        assert result.pca_projection.shape == (50,)

    def test_pca_axis_tracks_vertical_variance(self, toy_spec):
        result = purl_toy(toy_spec, n_p=50, n_u=400, epochs=2, restarts=1, eval_n=30,
                          seed=8)
        assert result.cos_vertical > 0.95

    def test_deterministic_in_seed(self, toy_spec):
        a = purl_toy(toy_spec, n_p=30, n_u=60, epochs=3, restarts=2, eval_n=20, seed=9)
        b = purl_toy(toy_spec, n_p=30, n_u=60, epochs=3, restarts=2, eval_n=20, seed=9)
        assert np.array_equal(a.purl_direction, b.purl_direction)
        assert np.array_equal(a.purl_projection, b.purl_projection)
        assert a.train.history == b.train.history

    def test_argument_validation(self, toy_spec, null_spec):
        with pytest.raises(ValueError, match="restarts"):
            purl_toy(toy_spec, restarts=0)
        from pusmi.data import GaussianMixtureSpec

        flat = GaussianMixtureSpec((1.0, 0.0, 0.0), (-1.0, 0.0, 0.0), (1.0, 1.0, 1.0),
                                   ClassPrior(0.5))
        with pytest.raises(ValueError, match="two-dimensional"):
            purl_toy(flat)
