import numpy as np
import pytest

from ureid.clustering import DbscanParams, dbscan
from ureid.dataset import GenConfig, generate
from ureid.distance import DIRECT
from ureid.encoder import Encoder
from ureid.errors import InvalidConfigError
from ureid.memory import ClusterMemory, InstanceMemory
from ureid.numerics import pairwise_similarity, spawn_rng
from ureid.sampler import SamplerConfig, epoch_batches
from ureid.trainer import (EPOCH_CSV_HEADER, TrainConfig, VARIANTS, reports_to_csv,
                           train)
from ureid.distance import plain_distance


def separable_dataset(seed=0):
    # tight identity blobs, mild camera shift: trivially clusterable raw space
    return generate(GenConfig(n_identities=10, n_cameras=2, images_per_id_per_cam=4,
                              input_dim=32, camera_shift=0.2, noise_sigma=0.05,
                              seed=seed))


def pca_encoder(ds):
    raws = np.stack([inst.raw for inst in ds.instances])
    return Encoder.linear_pca(raws, 32)


def easy_config(**overrides):
    base = dict(variant="stochastic_online", epochs=4, use_camera_offset=False,
                eps=0.35, min_samples=3, P=4, K=4, learning_rate=0.01, seed=0)
    base.update(overrides)
    return TrainConfig(**base)


def test_loss_decreases_on_separable_data():
    ds = separable_dataset()
    result = train(ds, pca_encoder(ds), easy_config(epochs=6))
    losses = [r.mean_loss for r in result.reports]
    assert all(np.isfinite(losses))
    assert losses[-1] < losses[0]
    assert result.final_clustering_acc == pytest.approx(1.0)
    assert result.final_labeling.num_clusters == 10
    assert len(result.reports) == 6


def test_reports_carry_epoch_stats():
    ds = separable_dataset()
    result = train(ds, pca_encoder(ds), easy_config(epochs=3))
    for i, r in enumerate(result.reports):
        assert r.epoch == i
        assert r.num_clusters == 10
        assert r.num_outliers == 0
        assert r.clustering_acc == pytest.approx(1.0)
        assert r.seconds >= 0.0


def test_training_is_deterministic_per_seed():
    ds = separable_dataset()
    res_a = train(ds, pca_encoder(ds), easy_config(epochs=3))
    res_b = train(ds, pca_encoder(ds), easy_config(epochs=3))
    assert np.array_equal(res_a.encoder.theta, res_b.encoder.theta)
    assert np.array_equal(res_a.instance_memory.feats, res_b.instance_memory.feats)
    assert reports_to_csv(res_a.reports) == reports_to_csv(res_b.reports)

    res_c = train(ds, pca_encoder(ds), easy_config(epochs=3, seed=1))
    assert not np.array_equal(res_a.encoder.theta, res_c.encoder.theta)


def test_csv_format_round_trips():
    ds = separable_dataset()
    result = train(ds, pca_encoder(ds), easy_config(epochs=2))
    csv_text = reports_to_csv(result.reports)
    lines = csv_text.strip().split("\n")
    assert lines[0] == EPOCH_CSV_HEADER
    assert len(lines) == 3
    for line, report in zip(lines[1:], result.reports):
        epoch, y, outliers, acc, loss = line.split(",")
        assert int(epoch) == report.epoch
        assert int(y) == report.num_clusters
        assert int(outliers) == report.num_outliers
        assert float(acc) == report.clustering_acc  # repr round-trip is exact
        assert float(loss) == report.mean_loss
    assert "seconds" not in csv_text


def test_first_batch_classifiers_match_replayed_state():
    # replays epoch 0 from public pieces: initial V is the encoder output,
    # the labeling comes from plain distance on it, and the cluster bank picks
    # members with the cluster-init stream
    ds = separable_dataset()
    encoder = pca_encoder(ds)
    view = ds.train_view()
    feats0, _ = encoder.forward_batch(view.raws, view.dataset_indices)

    cfg = easy_config(variant="stochastic_online", epochs=1)
    labeling = dbscan(plain_distance(pairwise_similarity(feats0)),
                      DbscanParams(cfg.eps, cfg.min_samples))
    expected_m = ClusterMemory.from_instances(
        InstanceMemory(feats0, cfg.instance_momentum), labeling,
        spawn_rng(cfg.seed, "cluster-init"), cfg.cluster_momentum)
    expected_batches = epoch_batches(labeling, view.cameras,
                                     SamplerConfig(cfg.P, cfg.K),
                                     spawn_rng(cfg.seed, "sampler"))

    trace = []
    train(ds, pca_encoder(ds), cfg, trace=trace)
    assert np.array_equal(trace[0]["batch"], expected_batches[0])
    assert np.array_equal(trace[0]["targets"], labeling.labels[expected_batches[0]])
    assert np.allclose(trace[0]["classifiers"], expected_m.feats, atol=0)


def test_baseline_first_batch_uses_full_centroids():
    ds = separable_dataset()
    encoder = pca_encoder(ds)
    view = ds.train_view()
    feats0, _ = encoder.forward_batch(view.raws, view.dataset_indices)
    cfg = easy_config(variant="baseline", epochs=1)
    labeling = dbscan(plain_distance(pairwise_similarity(feats0)),
                      DbscanParams(cfg.eps, cfg.min_samples))
    trace = []
    train(ds, pca_encoder(ds), cfg, trace=trace)
    got = trace[0]["classifiers"]
    for j in range(labeling.num_clusters):
        members = labeling.members(j)
        want = feats0[members].mean(axis=0)
        want /= np.linalg.norm(want)
        assert np.allclose(got[j], want, atol=1e-12)


def test_trace_covers_every_epoch_and_stays_in_range():
    ds = separable_dataset()
    trace = []
    cfg = easy_config(epochs=3)
    train(ds, pca_encoder(ds), cfg, trace=trace)
    n = len(ds.train_view())
    assert {t["epoch"] for t in trace} == {0, 1, 2}
    for t in trace:
        assert np.all(t["batch"] >= 0) and np.all(t["batch"] < n)
        assert t["classifiers"].shape[1] == 32
        assert np.all(t["targets"] >= 0)
        assert t["targets"].max() < t["classifiers"].shape[0]


def test_use_temporal_toggle_changes_memory_dynamics():
    ds = separable_dataset()
    blended = train(ds, pca_encoder(ds), easy_config(epochs=2, use_temporal=True))
    replaced = train(ds, pca_encoder(ds), easy_config(epochs=2, use_temporal=False))
    assert not np.array_equal(blended.instance_memory.feats,
                              replaced.instance_memory.feats)


def handcrafted_outlier_dataset():
    # two tight 5-member blobs plus two isolated points that can never reach
    # core status; cameras alternate inside each blob
    from ureid.dataset import Dataset, Instance, TRAIN

    rng = np.random.default_rng(13)
    rows, cams, ids = [], [], []
    for blob, axis in ((0, 0), (1, 1)):
        for k in range(5):
            v = np.zeros(4)
            v[axis] = 1.0
            v += 0.01 * rng.standard_normal(4)
            rows.append(v / np.linalg.norm(v))
            cams.append(k % 2)
            ids.append(blob)
    rows.append(np.array([0.0, 0.0, 1.0, 0.0]))
    cams.append(0)
    ids.append(2)
    rows.append(np.array([0.0, 0.0, 0.0, 1.0]))
    cams.append(1)
    ids.append(3)
    instances = [Instance(i, rows[i], cams[i], ids[i]) for i in range(12)]
    return Dataset(instances, n_cam=2, input_dim=4, split=[TRAIN] * 12)


def test_outliers_refreshed_from_final_encoder():
    ds = handcrafted_outlier_dataset()
    raws = np.stack([inst.raw for inst in ds.instances])
    encoder = Encoder.linear_pca(raws, 4)
    cfg = easy_config(epochs=1, min_samples=3, eps=0.5, P=2, K=3,
                      learning_rate=0.05)
    theta0 = encoder.theta.copy()
    result = train(ds, encoder, cfg)
    assert result.reports[0].num_clusters == 2
    assert result.reports[0].num_outliers == 2

    view = ds.train_view()
    fresh, _ = result.encoder.forward_batch(view.raws, view.dataset_indices)
    # the two isolated points (positions 10, 11) were never sampled, so only
    # the end-of-epoch refresh can explain their rows matching the final
    # encoder bit for bit
    assert not np.array_equal(result.encoder.theta, theta0)
    assert np.array_equal(result.instance_memory.feats[10], fresh[10])
    assert np.array_equal(result.instance_memory.feats[11], fresh[11])


def test_all_outlier_epochs_complete_without_training():
    ds = separable_dataset()
    encoder = pca_encoder(ds)
    theta0 = encoder.theta.copy()
    cfg = easy_config(epochs=3, eps=1e-6)
    result = train(ds, encoder, cfg)
    for r in result.reports:
        assert r.num_clusters == 0
        assert r.num_outliers == len(ds.train_view())
        assert np.isnan(r.mean_loss)
        assert np.isnan(r.clustering_acc)
    assert np.array_equal(result.encoder.theta, theta0)  # no optimizer steps
    assert result.final_labeling.num_clusters == 0
    assert np.isnan(result.final_clustering_acc)


def test_all_variants_run_and_report_finite_loss():
    ds = separable_dataset()
    for variant in VARIANTS:
        cfg = easy_config(variant=variant, epochs=2, centroid_fraction=0.5)
        result = train(ds, pca_encoder(ds), cfg)
        assert len(result.reports) == 2
        assert np.isfinite(result.reports[-1].mean_loss)


def test_camera_offset_path_runs_both_modes():
    ds = separable_dataset()
    for mode in (DIRECT, "softmax_relative"):
        cfg = easy_config(use_camera_offset=True, distance_mode=mode, epochs=2,
                          eps=0.9 if mode == DIRECT else 0.6)
        result = train(ds, pca_encoder(ds), cfg)
        assert len(result.reports) == 2


def test_config_validation_errors():
    with pytest.raises(InvalidConfigError):
        TrainConfig(variant="centroid").validate()
    with pytest.raises(InvalidConfigError):
        TrainConfig(epochs=0).validate()
    with pytest.raises(InvalidConfigError):
        TrainConfig(centroid_fraction=0.0).validate()
    with pytest.raises(InvalidConfigError):
        TrainConfig(cluster_momentum=1.5).validate()
    with pytest.raises(InvalidConfigError):
        TrainConfig(temperature=-1.0).validate()
    with pytest.raises(InvalidConfigError):
        TrainConfig(cam_weight=-0.1).validate()
    with pytest.raises(InvalidConfigError):
        TrainConfig(seed=-1).validate()
    with pytest.raises(InvalidConfigError):
        TrainConfig(distance_mode="cosine").validate()


def test_empty_train_split_raises():
    ds = generate(GenConfig(n_identities=4, n_cameras=2, images_per_id_per_cam=2,
                            input_dim=8, camera_shift=0.0, noise_sigma=0.1, seed=0))
    # two images per cell: one query, one gallery, zero train
    with pytest.raises(InvalidConfigError, match="train split"):
        train(ds, Encoder(("linear"), np.eye(8), 8, 8), easy_config())