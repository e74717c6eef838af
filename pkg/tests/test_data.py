"""Blob generation, CSV round trips, and stratified fold plans."""

import numpy as np
import pytest

from mislabel_forge.corruption import CorruptionSpec, corrupt
from mislabel_forge.data import (
    FoldPlan,
    LabeledDataset,
    SyntheticSpec,
    generate_blobs,
    load_csv,
    make_folds,
    save_csv,
)
from mislabel_forge.errors import ConfigurationError
from mislabel_forge.losses import LossSpec
from mislabel_forge.net import NetConfig, init_network
from mislabel_forge.training import TrainConfig, accuracy, train


def test_blobs_deterministic():
    spec = SyntheticSpec(num_classes=3, samples_per_class=10, feature_dim=4, separation=5, spread=1, seed=2)
    a = generate_blobs(spec)
    b = generate_blobs(spec)
    assert np.array_equal(a.features, b.features)
    assert np.array_equal(a.clean_labels, b.clean_labels)


def test_blobs_balanced_and_clean():
    spec = SyntheticSpec(num_classes=4, samples_per_class=25, feature_dim=8, separation=5, spread=1, seed=0)
    d = generate_blobs(spec)
    assert len(d) == 100
    assert np.all(np.bincount(d.clean_labels) == 25)
    assert not d.corrupted_mask.any()
    d.validate_mask()


def test_blobs_two_class_axis_gap():
    sep, spread, n = 6.0, 0.8, 4000
    spec = SyntheticSpec(num_classes=2, samples_per_class=n, feature_dim=5, separation=sep, spread=spread, seed=3)
    d = generate_blobs(spec)
    m0 = d.features[d.clean_labels == 0].mean(axis=0)
    m1 = d.features[d.clean_labels == 1].mean(axis=0)
    tol = 3 * spread / np.sqrt(n)
    assert abs((m0[0] - m1[0]) - sep) < tol
    assert np.all(np.abs(m0[1:]) < tol) and np.all(np.abs(m1[1:]) < tol)


def test_blobs_separable_limit_trains_to_perfect_accuracy():
    spec = SyntheticSpec(num_classes=3, samples_per_class=60, feature_dim=6, separation=8, spread=1e-3, seed=1)
    d = generate_blobs(spec)
    net = init_network(NetConfig(input_dim=6, hidden_dims=(), num_classes=3, init_seed=0))
    train(net, d, TrainConfig(epochs=10, learning_rate=0.05, loss=LossSpec(kind="ce"), shuffle_seed=0))
    assert accuracy(net, d) == 1.0


def test_blobs_validation():
    with pytest.raises(ConfigurationError):
        SyntheticSpec(num_classes=1, samples_per_class=5, feature_dim=4)
    with pytest.raises(ConfigurationError):
        SyntheticSpec(num_classes=9, samples_per_class=5, feature_dim=4)  # needs K <= 2r
    with pytest.raises(ConfigurationError):
        SyntheticSpec(num_classes=3, samples_per_class=5, feature_dim=4, spread=0.0)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    d = LabeledDataset.from_clean(rng.normal(size=(3, 2)), np.array([0, 1, 0]), num_classes=2)
    path = tmp_path / "data.csv"
    save_csv(d, path)
    back = load_csv(path)
    assert np.array_equal(back.features, d.features)
    assert np.array_equal(back.observed_labels, d.observed_labels)
    assert np.array_equal(back.clean_labels, d.clean_labels)


def test_csv_round_trip_after_corruption(tmp_path):
    d = generate_blobs(SyntheticSpec(num_classes=3, samples_per_class=20, feature_dim=3, separation=4, spread=1, seed=5))
    out = corrupt(d, CorruptionSpec(mode="uniform", eta=0.25, seed=6))
    path = tmp_path / "corr.csv"
    save_csv(out, path)
    back = load_csv(path)
    assert np.array_equal(back.observed_labels, out.observed_labels)
    assert np.array_equal(back.corrupted_mask, out.corrupted_mask)
    back.validate_mask()


def test_csv_string_labels_alphabetical(tmp_path):
    path = tmp_path / "pets.csv"
    path.write_text("f0,f1,label\n1.0,2.0,dog\n3.0,4.0,cat\n5.0,6.0,cat\n")
    d = load_csv(path)
    assert d.num_classes == 2
    assert d.label_names == ("cat", "dog")
    assert list(d.observed_labels) == [1, 0, 0]


def test_csv_errors(tmp_path):
    missing = tmp_path / "missing.csv"
    missing.write_text("f0,f1,klass\n1,2,0\n")
    with pytest.raises(ConfigurationError, match="label"):
        load_csv(missing)

    ragged = tmp_path / "ragged.csv"
    ragged.write_text("f0,f1,label\n1,2,0\n1,0\n")
    with pytest.raises(ConfigurationError, match="row 3"):
        load_csv(ragged)

    nonnum = tmp_path / "nonnum.csv"
    nonnum.write_text("f0,f1,label\n1,x,0\n")
    with pytest.raises(ConfigurationError, match="non-numeric"):
        load_csv(nonnum)

    unknown = tmp_path / "unknown.csv"
    unknown.write_text("f0,label\n1,horse\n")
    with pytest.raises(ConfigurationError, match="unknown labels"):
        load_csv(unknown, label_map={"cat": 0, "dog": 1})


# ---------------------------------------------------------------------------
# Folds
# ---------------------------------------------------------------------------


def test_folds_partition_and_sizes():
    d = generate_blobs(SyntheticSpec(num_classes=4, samples_per_class=25, feature_dim=4, separation=4, spread=1, seed=0))
    plan = make_folds(d, 5, seed=1)
    sizes = np.bincount(plan.assignments, minlength=5)
    assert np.all(sizes == 20)
    covered = np.concatenate([plan.predict_indices(f) for f in range(5)])
    assert sorted(covered.tolist()) == list(range(100))
    for f in range(5):
        assert set(plan.train_indices(f)) | set(plan.predict_indices(f)) == set(range(100))
        assert not (set(plan.train_indices(f)) & set(plan.predict_indices(f)))


def test_folds_stratified_per_class():
    d = generate_blobs(SyntheticSpec(num_classes=5, samples_per_class=10, feature_dim=4, separation=4, spread=1, seed=2))
    plan = make_folds(d, 5, seed=3)
    for c in range(5):
        idx = np.where(d.observed_labels == c)[0]
        per_fold = np.bincount(plan.assignments[idx], minlength=5)
        assert np.all(per_fold == 2)


def test_folds_stratify_by_observed_not_clean():
    d = generate_blobs(SyntheticSpec(num_classes=2, samples_per_class=30, feature_dim=3, separation=4, spread=1, seed=4))
    out = corrupt(d, CorruptionSpec(mode="uniform", eta=0.4, seed=5))
    plan = make_folds(out, 3, seed=6)
    for c in range(2):
        idx = np.where(out.observed_labels == c)[0]
        per_fold = np.bincount(plan.assignments[idx], minlength=3)
        assert per_fold.max() - per_fold.min() <= 1


def test_folds_size_imbalance_bounded():
    rng = np.random.default_rng(7)
    labels = rng.integers(3, size=103)
    d = LabeledDataset.from_clean(rng.normal(size=(103, 2)), labels, num_classes=3)
    plan = make_folds(d, 4, seed=8)
    sizes = np.bincount(plan.assignments, minlength=4)
    assert sizes.max() - sizes.min() <= 1


def test_folds_validation():
    d = generate_blobs(SyntheticSpec(num_classes=3, samples_per_class=2, feature_dim=3, separation=4, spread=1, seed=9))
    with pytest.raises(ConfigurationError):
        make_folds(d, 1, seed=0)
    with pytest.raises(ConfigurationError):
        make_folds(d, 5, seed=0)  # 6 samples < 5 folds * 3 classes
