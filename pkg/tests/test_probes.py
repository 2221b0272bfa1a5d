import numpy as np
import pytest

from dcies.core import TEST, TRAIN, CodedDataset, FactorSpec, assign_splits
from dcies.probes import (
    ConfigError,
    EmptySplit,
    SchemaMismatch,
    TrainingConfig,
    TrainingDiverged,
    baseline_loss,
    build_ladder,
    evaluate_probe,
    fit_probe,
    load_probe,
    mlp_excess_params,
    rescale,
    save_probe,
    train_ladder,
)
from dcies.probes.mlp import MlpProbe
from dcies.synthetic import MixingSpec, desk_specs, make_dataset
from dcies.core import normalize_dataset

FAST = TrainingConfig(epochs=60, learning_rate=1e-2, rf_n_trees=30)


class TestBuildLadder:
    def test_rf_default_depths(self):
        lad = build_ladder("rf", n_inputs=7, n_factors=7)
        assert [e.params["max_depth"] for e in lad.entries] == [1, 2, 4, 8, 16, 32]
        np.testing.assert_array_equal(lad.capacities, [1, 2, 4, 8, 16, 32])

    def test_rff_default_span(self):
        lad = build_ladder("rff", n_inputs=7, n_factors=7)
        assert lad.capacities[0] == 4.0
        assert lad.capacities[-1] == 17.0

    def test_mlp_linear_rung_capacity_zero(self):
        lad = build_ladder("mlp", n_inputs=7, n_factors=7)
        assert mlp_excess_params(0, 7) == 0
        assert lad.capacities[0] == 0.0
        assert lad.entries[0].params["width"] == 0
        widths = [e.params["width"] for e in lad.entries[1:]]
        assert widths == [14, 28, 56, 112, 224, 448, 896, 1792, 3584]

    def test_too_few_rungs(self):
        with pytest.raises(ConfigError):
            build_ladder("rf", 7, 7, {"rf_depths": [4]})

    def test_non_monotone_override(self):
        with pytest.raises(ConfigError):
            build_ladder("rf", 7, 7, {"rf_depths": [4, 2, 8]})

    def test_rescale_roundtrip(self):
        lad = build_ladder("rff", 7, 7, {"rff_log2_features": [4, 6, 8]})
        linear = rescale(lad, "linear")
        np.testing.assert_array_equal(linear.capacities, [16, 64, 256])
        back = rescale(linear, "log")
        np.testing.assert_array_equal(back.capacities, lad.capacities)


class TestBaselineLoss:
    def test_continuous_near_one(self, small_desk_dataset):
        assert baseline_loss(small_desk_dataset, 0) == pytest.approx(1.0, abs=0.05)

    def test_categorical_log_cardinality(self, small_desk_dataset):
        # desk factors 4, 5, 6 have cardinalities 6, 3, 2
        assert baseline_loss(small_desk_dataset, 4) == pytest.approx(np.log(6))
        assert baseline_loss(small_desk_dataset, 6) == pytest.approx(np.log(2))


def _zero_probe(dataset, factor):
    spec = dataset.factor_specs[factor]
    l = dataset.n_codes
    if spec.is_categorical:
        params = (np.zeros((l, spec.cardinality)), np.zeros(spec.cardinality))
        kind, classes = "classification", spec.cardinality
    else:
        params = (np.zeros((l, 1)), np.zeros(1))
        kind, classes = "regression", None
    return MlpProbe(
        probe_class="mlp", factor=factor, capacity_index=0, capacity_value=0.0,
        task_kind=kind, n_inputs=l, n_classes=classes, params=params, width=0,
    )


class TestEvaluateProbe:
    def test_perfect_linear_probe(self, small_desk_dataset):
        ds = small_desk_dataset
        w = np.zeros((ds.n_codes, 1))
        w[0, 0] = 1.0  # identity representation: factor 0 is code 0
        probe = MlpProbe(
            probe_class="mlp", factor=0, capacity_index=0, capacity_value=0.0,
            task_kind="regression", n_inputs=ds.n_codes, params=(w, np.zeros(1)), width=0,
        )
        loss = evaluate_probe(probe, ds)
        assert loss.raw == pytest.approx(0.0, abs=1e-12)
        assert loss.normalized == pytest.approx(0.0, abs=1e-12)

    def test_mean_baseline_probe_scores_one(self, small_desk_dataset):
        loss = evaluate_probe(_zero_probe(small_desk_dataset, 0), small_desk_dataset)
        assert loss.normalized == pytest.approx(1.0, abs=0.05)

    def test_uniform_classifier_scores_one(self, small_desk_dataset):
        loss = evaluate_probe(_zero_probe(small_desk_dataset, 4), small_desk_dataset)
        assert loss.raw == pytest.approx(np.log(6))
        assert loss.normalized == 1.0

    def test_worse_than_baseline_clamps(self, small_desk_dataset):
        ds = small_desk_dataset
        w = np.full((ds.n_codes, 1), -25.0)
        probe = MlpProbe(
            probe_class="mlp", factor=0, capacity_index=0, capacity_value=0.0,
            task_kind="regression", n_inputs=ds.n_codes, params=(w, np.zeros(1)), width=0,
        )
        assert evaluate_probe(probe, ds).normalized == 1.0

    def test_schema_mismatch(self, small_desk_dataset, tiny_dataset):
        lad = build_ladder("rf", small_desk_dataset.n_codes, 7, {"rf_depths": [1, 2]})
        probe = fit_probe(small_desk_dataset, 0, "rf", lad.entries[0], seed=0, config=FAST)
        with pytest.raises(SchemaMismatch):
            evaluate_probe(probe, tiny_dataset)


class TestFitProbe:
    def test_identity_linear_regression(self, small_desk_dataset):
        lad = build_ladder("mlp", 7, 7, {"mlp_width_factors": [2]})
        probe = fit_probe(small_desk_dataset, 0, "mlp", lad.entries[0], seed=0, config=FAST)
        assert evaluate_probe(probe, small_desk_dataset).raw <= 1e-3

    def test_sign_stump_forest_matches_oracle(self):
        rng = np.random.default_rng(11)
        codes = rng.normal(size=(2000, 3))
        labels = (codes[:, 1] > 0).astype(float)
        ds = CodedDataset(
            codes=codes, factors=labels[:, None],
            factor_specs=(FactorSpec("s", "categorical", 2),),
            split=assign_splits(2000, 1),
        )
        lad = build_ladder("rf", 3, 1, {"rf_depths": [1, 2]})
        cfg = TrainingConfig(rf_n_trees=50, rf_max_features=1.0)
        probe = fit_probe(ds, 0, "rf", lad.entries[0], seed=0, config=cfg)
        test = ds.mask(TEST)
        pred = probe.predict(ds.codes[test]).argmax(axis=1)
        acc = np.mean(pred == labels[test])

        # hand-built stump oracle: best single threshold on the train split
        train = ds.mask(TRAIN)
        x, y = codes[train, 1], labels[train]
        order = np.argsort(x)
        xs, ys = x[order], y[order]
        mids = (xs[1:] + xs[:-1]) / 2
        accs = [max(np.mean((x > m) == y), np.mean((x <= m) == y)) for m in mids[:: len(mids) // 200 + 1]]
        best_mid = mids[:: len(mids) // 200 + 1][int(np.argmax(accs))]
        oracle_acc = np.mean((codes[test, 1] > best_mid) == labels[test])
        assert acc >= 0.99
        assert oracle_acc >= 0.99

    def test_pure_noise_codes_score_baseline(self):
        rng = np.random.default_rng(3)
        codes = rng.normal(size=(3000, 4))
        factors = rng.normal(size=(3000, 1))
        ds = normalize_dataset(CodedDataset(
            codes=codes, factors=factors,
            factor_specs=(FactorSpec("z", "continuous"),),
            split=assign_splits(3000, 3),
        ))
        lad = build_ladder("mlp", 4, 1, {"mlp_width_factors": [2]})
        probe = fit_probe(ds, 0, "mlp", lad.entries[0], seed=0, config=FAST)
        loss = evaluate_probe(probe, ds)
        # independent check: the train-mean predictor on the same draw
        train, test = ds.mask(TRAIN), ds.mask(TEST)
        base = np.mean((ds.factors[test, 0] - ds.factors[train, 0].mean()) ** 2)
        assert abs(loss.raw / base - 1.0) <= 0.1
        assert abs(loss.normalized - 1.0) <= 0.1

    def test_divergence_raises(self, small_desk_dataset):
        lad = build_ladder("mlp", 7, 7, {"mlp_width_factors": [2]})
        bad = TrainingConfig(epochs=3, learning_rate=1e200)
        with pytest.raises(TrainingDiverged):
            fit_probe(small_desk_dataset, 0, "mlp", lad.entries[1], seed=0, config=bad)

    def test_empty_validation_raises(self):
        ds = make_dataset(desk_specs(), MixingSpec("identity"), 300, seed=0,
                          split_fractions=(0.8, 0.0, 0.2))
        ds = normalize_dataset(ds)
        lad = build_ladder("mlp", 7, 7, {"mlp_width_factors": [2]})
        with pytest.raises(EmptySplit):
            fit_probe(ds, 0, "mlp", lad.entries[0], seed=0, config=FAST)


class TestDeterminism:
    def test_rf_bit_identical(self, small_desk_dataset):
        lad = build_ladder("rf", 7, 7, {"rf_depths": [2, 4]})
        a = fit_probe(small_desk_dataset, 4, "rf", lad.entries[1], seed=9, config=FAST)
        b = fit_probe(small_desk_dataset, 4, "rf", lad.entries[1], seed=9, config=FAST)
        la = evaluate_probe(a, small_desk_dataset)
        lb = evaluate_probe(b, small_desk_dataset)
        assert la.raw == lb.raw

    def test_rff_bit_identical(self, small_desk_dataset):
        lad = build_ladder("rff", 7, 7, {"rff_log2_features": [4, 6]})
        a = fit_probe(small_desk_dataset, 0, "rff", lad.entries[1], seed=9, config=FAST)
        b = fit_probe(small_desk_dataset, 0, "rff", lad.entries[1], seed=9, config=FAST)
        assert evaluate_probe(a, small_desk_dataset).raw == evaluate_probe(b, small_desk_dataset).raw

    def test_mlp_reproducible(self, small_desk_dataset):
        lad = build_ladder("mlp", 7, 7, {"mlp_width_factors": [2]})
        cfg = TrainingConfig(epochs=5, learning_rate=1e-2)
        a = fit_probe(small_desk_dataset, 0, "mlp", lad.entries[1], seed=9, config=cfg)
        b = fit_probe(small_desk_dataset, 0, "mlp", lad.entries[1], seed=9, config=cfg)
        for pa, pb in zip(a.params, b.params):
            assert np.max(np.abs(pa - pb)) < 1e-6

    def test_rf_monotone_transform_invariance(self):
        """Tree splits depend only on value order: transforming a column by a
        strictly increasing map leaves predictions unchanged at a fixed seed
        (inputs live on a shared value grid)."""
        ds = make_dataset(desk_specs(), MixingSpec("identity"), 1500, seed=2)
        lad = build_ladder("rf", 7, 7, {"rf_depths": [4, 8]})
        cfg = TrainingConfig(rf_n_trees=30)
        probe_a = fit_probe(ds, 4, "rf", lad.entries[0], seed=5, config=cfg)
        pred_a = probe_a.predict(ds.codes_for(TEST))

        warped = np.array(ds.codes)
        for col in (0, 4):
            warped[:, col] = warped[:, col] ** 3 + warped[:, col]
        ds_b = CodedDataset(codes=warped, factors=ds.factors,
                            factor_specs=ds.factor_specs, split=ds.split)
        probe_b = fit_probe(ds_b, 4, "rf", lad.entries[0], seed=5, config=cfg)
        pred_b = probe_b.predict(ds_b.codes_for(TEST))
        np.testing.assert_array_equal(pred_a, pred_b)


class TestTrainLadder:
    def test_min_not_above_first_rung(self, small_desk_dataset):
        lad = build_ladder("rf", 7, 7, {"rf_depths": [1, 4]})
        res = train_ladder(small_desk_dataset, lad, seed=0, config=FAST)
        for pos in range(7):
            assert res.best_loss[pos] <= res.normalized_losses(pos)[0] + 1e-12

    def test_gt_labels_max_capacity_low_loss(self, small_desk_dataset):
        # all-features splits for the forest: with random 2-of-7 candidate
        # features, misrouted test points inflate cross-entropy at this n
        configs = {
            "mlp": ({"mlp_width_factors": [2, 8]}, FAST),
            "rff": ({"rff_log2_features": [4, 6, 8]}, FAST),
            "rf": ({"rf_depths": [4, 16]}, TrainingConfig(rf_n_trees=50, rf_max_features=1.0)),
        }
        for pc, (overrides, cfg) in configs.items():
            lad = build_ladder(pc, 7, 7, overrides)
            res = train_ladder(small_desk_dataset, lad, seed=0, config=cfg)
            for pos in range(7):
                assert res.normalized_losses(pos)[-1] <= 0.02, (pc, pos)

    def test_error_carries_context(self, small_desk_dataset):
        lad = build_ladder("mlp", 7, 7, {"mlp_width_factors": [2]})
        bad = TrainingConfig(epochs=2, learning_rate=1e200)
        with pytest.raises(TrainingDiverged, match="factor 0, capacity index 0"):
            train_ladder(small_desk_dataset, lad, seed=0, factors=[0], config=bad)


class TestCheckpoints:
    def test_roundtrip(self, small_desk_dataset, tmp_path):
        lad = build_ladder("rf", 7, 7, {"rf_depths": [2, 4]})
        probe = fit_probe(small_desk_dataset, 4, "rf", lad.entries[0], seed=3, config=FAST)
        path = save_probe(probe, tmp_path)
        assert path.name == "rf_f4_t0_s3.probe"
        loaded = load_probe(path)
        x = small_desk_dataset.codes_for(TEST)
        np.testing.assert_array_equal(loaded.predict(x), probe.predict(x))

    def test_mlp_roundtrip(self, small_desk_dataset, tmp_path):
        lad = build_ladder("mlp", 7, 7, {"mlp_width_factors": [2]})
        cfg = TrainingConfig(epochs=3, learning_rate=1e-2)
        probe = fit_probe(small_desk_dataset, 0, "mlp", lad.entries[1], seed=1, config=cfg)
        loaded = load_probe(save_probe(probe, tmp_path))
        x = small_desk_dataset.codes_for(TEST)
        np.testing.assert_array_equal(loaded.predict(x), probe.predict(x))
