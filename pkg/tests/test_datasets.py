import struct

import numpy as np
import pytest

from noiserobust.datasets import (DataFormatError, ingest_dataset, make_blob_images, make_blobs,
                                  read_dataset_csv, write_dataset_csv, write_idx_images,
                                  write_idx_labels)
from noiserobust.models import TrainConfig, train_logistic


def test_blobs_separable():
    data = make_blobs(20, 2000, 6.0, seed=1)
    res = train_logistic(data, TrainConfig(epochs=300))
    assert np.mean(res.model.predict(data.X) == data.y) >= 0.95


def test_blobs_zero_separation():
    data = make_blobs(20, 2000, 0.0, seed=2)
    test = make_blobs(20, 2000, 0.0, seed=3)
    m = train_logistic(data, TrainConfig(epochs=300)).model
    assert abs(np.mean(m.predict(test.X) == test.y) - 0.5) <= 0.05


def test_blobs_deterministic_and_geometry():
    a, b = make_blobs(5, 300, seed=4), make_blobs(5, 300, seed=4)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
    assert not np.array_equal(a.X, make_blobs(5, 300, seed=5).X)
    big = make_blobs(8, 40_000, 6.0, seed=6, classes=3)
    mu = np.stack([big.X[big.y == k].mean(0) for k in range(3)])
    for i in range(3):
        for j in range(i):
            assert np.linalg.norm(mu[i] - mu[j]) == pytest.approx(6.0, abs=0.1)
    with pytest.raises(ValueError):
        make_blobs(1, 10)
    with pytest.raises(ValueError):
        make_blobs(3, 10, classes=4)


def test_blob_images_range_and_shape():
    data = make_blob_images(60, seed=0)
    assert data.X.shape == (60, 256) and data.X.min() >= 0 and data.X.max() <= 255
    assert set(np.unique(data.y)) == {0, 1, 2}
    assert np.array_equal(data.X, make_blob_images(60, seed=0).X)


def test_csv_example(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("label,f0,f1\n1,0.5,-0.25\n")
    data = ingest_dataset(p)
    assert len(data) == 1 and data.d == 2 and data.y.tolist() == [1]
    assert data.X.tolist() == [[0.5, -0.25]]


def test_csv_roundtrip(tmp_path, rng):
    data = make_blobs(4, 30, seed=7)
    p = tmp_path / "d.csv"
    write_dataset_csv(p, data)
    back = read_dataset_csv(p)
    assert np.array_equal(back.X, data.X) and np.array_equal(back.y, data.y)


@pytest.mark.parametrize("text, where", [
    ("label,f0,f1\n1,0.5,-0.25\n0,0.1\n", ":3:"),
    ("label,f0,f1\n1,0.5,x\n", ":2:"),
    ("lab,f0\n1,2\n", ":1:"),
    ("label,f0\n1.5,2\n", ":2:"),
])
def test_csv_errors_name_line(tmp_path, text, where):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(DataFormatError, match=where):
        ingest_dataset(p)


def test_idx_example(tmp_path, rng):
    imgs = rng.integers(0, 256, (10, 28, 28))
    labels = rng.integers(0, 10, 10)
    write_idx_images(tmp_path / "im", imgs)
    write_idx_labels(tmp_path / "lb", labels)
    raw = (tmp_path / "im").read_bytes()
    assert raw[:16] == struct.pack(">IIII", 0x803, 10, 28, 28) and len(raw) == 16 + 7840
    data = ingest_dataset(tmp_path / "im", labels_path=tmp_path / "lb")
    assert data.X.shape == (10, 784)
    assert np.array_equal(data.X[3], imgs[3].ravel()) and np.array_equal(data.y, labels)


def test_idx_errors(tmp_path, rng):
    write_idx_images(tmp_path / "im", rng.integers(0, 256, (4, 3, 3)))
    write_idx_labels(tmp_path / "lb", [0, 1, 0])
    with pytest.raises(DataFormatError, match="3 labels for 4"):
        ingest_dataset(tmp_path / "im", labels_path=tmp_path / "lb")
    raw = (tmp_path / "im").read_bytes()
    (tmp_path / "short").write_bytes(raw[:-1])
    with pytest.raises(DataFormatError):
        ingest_dataset(tmp_path / "short", format="idx")
    (tmp_path / "magic").write_bytes(struct.pack(">IIII", 0x801, 1, 1, 1) + b"\0")
    with pytest.raises(DataFormatError, match="magic"):
        ingest_dataset(tmp_path / "magic", format="idx")
