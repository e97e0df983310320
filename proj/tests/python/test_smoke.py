"""Smoke tests for the python module: shapes, determinism, invariants."""

import numpy as np
import pytest

import mieeg

SMALL_CONFIG = """
n_channels = 8
n_samples = 250
trials_per_class = 8
erd_channels = 0,1|2,3|4,5|6,7
window_length = 125
window_step = 62
batch_st = 8
max_epochs = 3
patience = 5
seed = 5
"""


def test_parameter_budget():
    counts = mieeg.param_counts()
    assert counts["dense_block"] == 4944
    assert counts["bilstm"] == 16640
    assert counts["attention"] == 4225
    assert counts["ae_total"] == 14822
    assert counts["st_total"] == 27077
    assert counts["total"] == 41899


def test_generation_shapes_and_determinism():
    data, labels, fs, n_classes = mieeg.generate_epochs(SMALL_CONFIG)
    assert data.shape == (32, 8, 250)
    assert labels.shape == (32,)
    assert fs == 250.0
    assert n_classes == 4
    data2, labels2, _, _ = mieeg.generate_epochs(SMALL_CONFIG)
    assert np.array_equal(data, data2)
    assert np.array_equal(labels, labels2)


def test_epoch_file_round_trip(tmp_path):
    data, labels, fs, n_classes = mieeg.generate_epochs(SMALL_CONFIG)
    path = str(tmp_path / "epochs.epoc")
    mieeg.write_epochs(path, data, labels, fs, n_classes)
    back, back_labels, back_fs, back_classes = mieeg.read_epochs(path)
    assert np.array_equal(back, data)
    assert np.array_equal(back_labels, labels)
    assert back_fs == fs
    assert back_classes == n_classes


def test_car_removes_channel_mean():
    data, labels, fs, n_classes = mieeg.generate_epochs(SMALL_CONFIG)
    referenced = mieeg.common_average_reference(data, labels, fs, n_classes)
    means = referenced.mean(axis=1)
    assert np.abs(means).max() < 1e-5


def test_feature_extraction_shape():
    data, labels, fs, n_classes = mieeg.generate_epochs(SMALL_CONFIG)
    feats, wlabels = mieeg.extract_features(data, labels, fs, n_classes, 125, 62)
    per_trial = (250 - 125) // 62 + 1
    assert feats.shape == (32 * per_trial, 8, mieeg.FEATURE_COUNT)
    assert wlabels.shape == (32 * per_trial,)
    assert np.isfinite(feats).all()


def test_pearson_adjacency_properties():
    data, labels, fs, n_classes = mieeg.generate_epochs(SMALL_CONFIG)
    corr = mieeg.pearson_adjacency(data, labels, fs, n_classes)
    assert corr.shape == (8, 8)
    assert np.allclose(corr, corr.T)
    assert np.allclose(np.diag(corr), 1.0)
    assert corr.min() >= -1.0 - 1e-9 and corr.max() <= 1.0 + 1e-9


def test_masked_row_softmax():
    rng = np.random.default_rng(3)
    raw = rng.normal(size=(6, 6))
    norm = mieeg.masked_row_softmax(raw)
    assert np.allclose(np.diag(norm), 0.0)
    assert np.allclose(norm.sum(axis=1), 1.0, atol=1e-9)
    assert (norm >= 0).all()


def test_gradcheck_ops_pass_at_double_precision():
    rows = mieeg.gradcheck_ops()
    assert len(rows) >= 20
    for name, err in rows:
        assert err < 1e-4, f"{name}: {err}"


def test_training_smoke_and_determinism():
    data, labels, fs, n_classes = mieeg.generate_epochs(SMALL_CONFIG)
    result = mieeg.train(data, labels, fs, n_classes, SMALL_CONFIG)
    metrics = result["metrics"]
    for key in ("accuracy", "kappa", "macro_f1", "macro_auc", "confusion"):
        assert key in metrics
    assert 0.0 <= metrics["accuracy"] <= 1.0
    assert len(result["log"]) == result["epochs_run"]
    assert result["param_count"] > 0

    adj = result["adjacency_after"]
    assert np.allclose(np.diag(adj), 0.0)
    assert np.allclose(adj.sum(axis=1), 1.0, atol=1e-6)

    again = mieeg.train(data, labels, fs, n_classes, SMALL_CONFIG)
    assert again["metrics"]["accuracy"] == metrics["accuracy"]
    assert np.array_equal(again["adjacency_after"], adj)

    deltas = mieeg.top_k_edge_deltas(result["adjacency_before"], adj, 5)
    assert len(deltas) == 5
    mags = [abs(d) for _, _, d in deltas]
    assert mags == sorted(mags, reverse=True)


def test_bad_config_key_is_rejected():
    with pytest.raises(Exception, match="not_a_key"):
        mieeg.generate_epochs("not_a_key = 1\n")
