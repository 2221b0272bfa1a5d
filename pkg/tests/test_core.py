import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcies.core import (
    TRAIN,
    CodedDataset,
    FactorSpec,
    InvalidImportance,
    NegativeImportance,
    ZeroVarianceColumn,
    assign_splits,
    normalize_dataset,
    row_distributions,
    validate_importance,
)
from dcies.data_io import load_dataset, save_dataset


def dataset_from_arrays(codes, factors, specs, seed=0):
    codes = np.asarray(codes, dtype=float)
    split = assign_splits(codes.shape[0], seed)
    return CodedDataset(codes=codes, factors=factors, factor_specs=tuple(specs), split=split)


def all_train_dataset(codes, factors, specs):
    codes = np.asarray(codes, dtype=float)
    return CodedDataset(
        codes=codes,
        factors=np.asarray(factors, dtype=float),
        factor_specs=tuple(specs),
        split=np.asarray([TRAIN] * codes.shape[0]),
    )


class TestFactorSpec:
    def test_categorical_needs_cardinality(self):
        with pytest.raises(ValueError):
            FactorSpec("x", "categorical")
        with pytest.raises(ValueError):
            FactorSpec("x", "categorical", 1)

    def test_continuous_rejects_cardinality(self):
        with pytest.raises(ValueError):
            FactorSpec("x", "continuous", 4)


class TestNormalizeDataset:
    def test_standardizes_simple_column(self):
        ds = all_train_dataset(
            [[2.0], [4.0], [6.0]], [[0.0], [1.0], [2.0]], [FactorSpec("z", "continuous")]
        )
        out = normalize_dataset(ds)
        np.testing.assert_allclose(out.codes[:, 0], [-1.2247, 0.0, 1.2247], atol=1e-4)

    def test_idempotent(self, tiny_dataset):
        again = normalize_dataset(tiny_dataset)
        np.testing.assert_allclose(again.codes, tiny_dataset.codes, atol=1e-6)
        np.testing.assert_allclose(again.factors, tiny_dataset.factors, atol=1e-6)

    def test_train_statistics(self, tiny_dataset):
        train = tiny_dataset.mask(TRAIN)
        assert np.abs(tiny_dataset.codes[train].mean(axis=0)).max() < 1e-6
        assert np.abs(tiny_dataset.codes[train].var(axis=0) - 1).max() < 1e-3
        for j, spec in enumerate(tiny_dataset.factor_specs):
            if spec.is_categorical:
                continue
            col = tiny_dataset.factors[train, j]
            assert abs(col.mean()) < 1e-6
            assert abs(col.var() - 1) < 1e-3

    def test_constant_column_raises(self):
        ds = all_train_dataset(
            [[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]],
            [[0.0], [1.0], [2.0]],
            [FactorSpec("z", "continuous")],
        )
        with pytest.raises(ZeroVarianceColumn) as err:
            normalize_dataset(ds)
        assert err.value.index == 0

    def test_categorical_untouched(self):
        factors = [[0.0], [1.0], [2.0], [1.0]]
        ds = all_train_dataset(
            [[1.0], [2.0], [3.0], [4.0]], factors, [FactorSpec("z", "categorical", 3)]
        )
        out = normalize_dataset(ds)
        np.testing.assert_array_equal(out.factors, factors)


class TestValidateImportance:
    def test_permutation_accepted_unchanged(self):
        p = np.array([[0.0, 1.0], [1.0, 0.0]])
        m = validate_importance(p)
        np.testing.assert_array_equal(m.values, p)

    def test_tolerance_renormalized(self):
        m = validate_importance(np.array([[0.5 + 1e-8, 0.5], [0.5, 0.5]]))
        np.testing.assert_allclose(m.values.sum(axis=0), 1.0, atol=1e-15)

    def test_negative_rejected(self):
        with pytest.raises(NegativeImportance):
            validate_importance(np.array([[1.1, 0.5], [-0.1, 0.5]]))

    def test_tiny_negative_clamped(self):
        m = validate_importance(np.array([[1.0 + 5e-10, 0.5], [-5e-10, 0.5]]))
        assert m.values[1, 0] == 0.0

    def test_bad_column_sum(self):
        with pytest.raises(InvalidImportance) as err:
            validate_importance(np.array([[0.6, 0.5], [0.6, 0.5]]))
        assert err.value.column == 0


class TestRowDistributions:
    def test_identity(self):
        m = validate_importance(np.eye(2))
        rows = row_distributions(m)
        np.testing.assert_array_equal(rows.values, np.eye(2))
        np.testing.assert_allclose(rows.row_weights, [0.5, 0.5])

    def test_rows_already_normalized(self):
        r = np.array([[0.8, 0.2], [0.2, 0.8]])
        rows = row_distributions(validate_importance(r))
        # rows of this matrix sum to one, so P equals R and rho is uniform
        np.testing.assert_allclose(rows.values, r, atol=1e-12)
        np.testing.assert_allclose(rows.row_weights, [0.5, 0.5], atol=1e-12)

    def test_dead_row(self):
        r = np.array([[1.0, 1.0], [0.0, 0.0]])
        rows = row_distributions(validate_importance(r))
        np.testing.assert_allclose(rows.row_weights, [1.0, 0.0])
        assert rows.dead_rows == (1,)
        assert np.all(np.isfinite(rows.values))

    @given(
        st.integers(min_value=1, max_value=6),
        st.integers(min_value=1, max_value=6),
        st.integers(min_value=0, max_value=2**32 - 1),
    )
    @settings(max_examples=80, deadline=None)
    def test_weights_sum_to_one(self, l, k, seed):
        rng = np.random.default_rng(seed)
        values = rng.dirichlet(np.ones(l), size=k).T
        rows = row_distributions(validate_importance(values))
        assert abs(rows.row_weights.sum() - 1.0) < 1e-9
        assert np.all(np.isfinite(rows.values))
        live = np.setdiff1d(np.arange(l), rows.dead_rows)
        np.testing.assert_allclose(rows.values[live].sum(axis=1), 1.0, atol=1e-6)


class TestSplitsAndIo:
    def test_assign_splits_fractions(self):
        split = assign_splits(1000, seed=1)
        assert (split == "train").sum() == 700
        assert (split == "validation").sum() == 100
        assert (split == "test").sum() == 200

    def test_assign_splits_deterministic(self):
        np.testing.assert_array_equal(assign_splits(50, 3), assign_splits(50, 3))

    def test_dataset_roundtrip(self, tiny_dataset, tmp_path):
        paths = save_dataset(tiny_dataset, tmp_path)
        loaded = load_dataset(
            paths["codes"], paths["factors"], paths["factor_specs"], paths["split"]
        )
        np.testing.assert_allclose(loaded.codes, tiny_dataset.codes, atol=1e-12)
        np.testing.assert_allclose(loaded.factors, tiny_dataset.factors, atol=1e-12)
        np.testing.assert_array_equal(loaded.split, tiny_dataset.split)
        assert loaded.factor_specs == tiny_dataset.factor_specs

    def test_load_without_split_assigns(self, tiny_dataset, tmp_path):
        paths = save_dataset(tiny_dataset, tmp_path)
        loaded = load_dataset(
            paths["codes"], paths["factors"], paths["factor_specs"], split_seed=9
        )
        assert set(np.unique(loaded.split)) <= {"train", "validation", "test"}

    def test_header_mismatch(self, tiny_dataset, tmp_path):
        paths = save_dataset(tiny_dataset, tmp_path)
        bad = tmp_path / "bad.csv"
        bad.write_text(paths["codes"].read_text().replace("c0", "x0"))
        with pytest.raises(ValueError):
            load_dataset(bad, paths["factors"], paths["factor_specs"], paths["split"])


class TestDatasetInvariants:
    def test_rejects_nonfinite_codes(self):
        with pytest.raises(ValueError):
            dataset_from_arrays(
                [[np.nan], [1.0]], [[0.0], [1.0]], [FactorSpec("z", "continuous")]
            )

    def test_rejects_out_of_range_categorical(self):
        with pytest.raises(ValueError):
            dataset_from_arrays(
                [[1.0], [2.0]], [[0.0], [3.0]], [FactorSpec("z", "categorical", 3)]
            )

    def test_immutable(self, tiny_dataset):
        with pytest.raises(ValueError):
            tiny_dataset.codes[0, 0] = 5.0
