import numpy as np
import pytest

from atlab.data import (
    Dataset,
    IdxBadMagic,
    IdxCountMismatch,
    IdxTruncated,
    batch_iter,
    emit_metrics,
    gen_gaussian_blobs,
    load_idx_dataset,
    load_metrics,
    read_idx,
    subsample,
    write_idx,
)
from atlab.models import Model, classify
from atlab.seeding import derive_seed
from atlab.tensor import Tensor


def test_blobs_counts_and_balance():
    ds = gen_gaussian_blobs(3, 8, 100, 0.1, seed=0)
    assert len(ds) == 300
    assert np.array_equal(np.bincount(ds.labels), [100, 100, 100])
    assert ds.dim == 8
    assert ds.features.min() >= 0.0 and ds.features.max() <= 1.0


def test_blobs_deterministic():
    a = gen_gaussian_blobs(3, 8, 50, 0.1, seed=5)
    b = gen_gaussian_blobs(3, 8, 50, 0.1, seed=5)
    assert np.array_equal(a.features, b.features)
    assert np.array_equal(a.labels, b.labels)


def test_blobs_tiny_spread_linearly_separable():
    ds = gen_gaussian_blobs(3, 6, 40, 1e-6, seed=1)
    # nearest-mean classifier as a linear model: w_c = mu_c, b_c = -|mu_c|^2 / 2
    means = np.full((3, 6), 0.2)
    means[np.arange(3), np.arange(3)] = 0.8
    model = Model([6, 3], [Tensor(means.T, requires_grad=True)],
                  [Tensor(-0.5 * np.sum(means**2, axis=1), requires_grad=True)])
    assert np.mean(classify(model, ds.features) == ds.labels) == 1.0


def test_blobs_validation():
    with pytest.raises(ValueError):
        gen_gaussian_blobs(1, 8, 10, 0.1, seed=0)
    with pytest.raises(ValueError):
        gen_gaussian_blobs(3, 2, 10, 0.1, seed=0)  # d < classes
    with pytest.raises(ValueError):
        gen_gaussian_blobs(3, 8, 10, 0.0, seed=0)


def test_dataset_rejects_out_of_range_features():
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        Dataset(np.array([[0.5, 1.5]]), np.array([0]))


def test_idx_round_trip_reproduces_bytes(tmp_path):
    rng = np.random.default_rng(2)
    images = rng.integers(0, 256, size=(3, 28, 28), dtype=np.uint8)
    labels = rng.integers(0, 10, size=3, dtype=np.uint8)
    ipath, lpath = tmp_path / "img.idx", tmp_path / "lab.idx"
    write_idx(ipath, images)
    write_idx(lpath, labels)
    original_bytes = ipath.read_bytes()

    loaded = read_idx(ipath)
    assert np.array_equal(loaded, images)
    repath = tmp_path / "img2.idx"
    write_idx(repath, loaded)
    assert repath.read_bytes() == original_bytes

    ds = load_idx_dataset(ipath, lpath)
    assert ds.dim == 784
    assert ds.features.max() <= 1.0
    assert np.array_equal(ds.labels, labels)


def test_idx_count_mismatch(tmp_path):
    write_idx(tmp_path / "img.idx", np.zeros((3, 4, 4), dtype=np.uint8))
    write_idx(tmp_path / "lab.idx", np.zeros(2, dtype=np.uint8))
    with pytest.raises(IdxCountMismatch, match="count mismatch"):
        load_idx_dataset(tmp_path / "img.idx", tmp_path / "lab.idx")


def test_idx_bad_magic(tmp_path):
    path = tmp_path / "bad.idx"
    path.write_bytes(b"\x01\x00\x08\x01" + b"\x00" * 8)
    with pytest.raises(IdxBadMagic):
        read_idx(path)


def test_idx_truncated(tmp_path):
    path = tmp_path / "short.idx"
    write_idx(path, np.zeros((4, 3), dtype=np.uint8))
    blob = path.read_bytes()
    path.write_bytes(blob[:-2])
    with pytest.raises(IdxTruncated):
        read_idx(path)


def test_batch_sizes_keep_partial_batch():
    ds = gen_gaussian_blobs(2, 4, 5, 0.05, seed=3)  # N = 10
    sizes = [bx.shape[0] for bx, _ in batch_iter(ds, 4, epoch_seed=0)]
    assert sizes == [4, 4, 2]


def test_batch_iter_deterministic_and_permutation():
    ds = gen_gaussian_blobs(2, 4, 8, 0.05, seed=4)
    a = [bx for bx, _ in batch_iter(ds, 3, epoch_seed=11)]
    b = [bx for bx, _ in batch_iter(ds, 3, epoch_seed=11)]
    for xa, xb in zip(a, b):
        assert np.array_equal(xa, xb)
    stacked = np.concatenate(a)
    # multiset equality via lexicographic row sort
    assert np.array_equal(np.sort(stacked.view("f8,f8,f8,f8"), axis=0),
                          np.sort(ds.features.view("f8,f8,f8,f8"), axis=0))


def test_subsample_fixed_and_bounded():
    ds = gen_gaussian_blobs(3, 6, 30, 0.05, seed=5)
    sub = subsample(ds, 20, seed=7)
    assert len(sub) == 20
    assert np.array_equal(sub.features, subsample(ds, 20, seed=7).features)
    assert subsample(ds, 1000, seed=7) is ds


def test_emit_metrics_csv_round_trip(tmp_path):
    records = [
        {"epoch": 0, "step": 1, "lr": 0.01, "tag": "a", "maybe": None},
        {"epoch": 0, "step": 2, "lr": 0.001953125, "tag": "b", "maybe": 3.5},
    ]
    path = tmp_path / "m.csv"
    emit_metrics(records, path, "csv")
    text = path.read_text()
    assert text.splitlines()[0] == "epoch,step,lr,tag,maybe"
    assert len(text.splitlines()) == 3
    assert load_metrics(path) == records


def test_emit_metrics_single_record(tmp_path):
    emit_metrics([{"a": 1}], tmp_path / "one.csv")
    assert (tmp_path / "one.csv").read_text() == "a\n1\n"


def test_emit_metrics_json_mirror(tmp_path):
    import json

    records = [{"a": 1, "b": 0.5}]
    emit_metrics(records, tmp_path / "m.json", "json")
    assert json.loads((tmp_path / "m.json").read_text()) == records


def test_emit_metrics_rejects_empty():
    with pytest.raises(ValueError, match="nonempty"):
        emit_metrics([], "nowhere.csv")


def test_emit_metrics_rejects_new_keys(tmp_path):
    with pytest.raises(ValueError, match="missing from header"):
        emit_metrics([{"a": 1}, {"a": 2, "b": 3}], tmp_path / "m.csv")


def test_derive_seed_paths_are_distinct_and_stable():
    s1 = derive_seed(0, "noise", 3, 4)
    s2 = derive_seed(0, "noise", 3, 5)
    s3 = derive_seed(0, "shuffle", 3)
    assert len({s1, s2, s3}) == 3
    assert derive_seed(0, "noise", 3, 4) == s1
    with pytest.raises(ValueError, match="unknown label"):
        derive_seed(0, "bogus")
