import math

import numpy as np
import pytest

import modviz


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    d = tmp_path_factory.mktemp("pipeline")
    data = str(d / "d.rmlb")
    modviz.generate(data, schemes=["BPSK", "QPSK"], count=10, snr_min=10, snr_max=12, n_x=32, seed=4)
    lenet = str(d / "lenet.mwts")
    hist = modviz.train("lenet", data, lenet, epochs=2, seed=4,
                        overrides={"lenet.conv1": "8", "lenet.conv2": "8", "lenet.dense1": "16", "lenet.dense2": "8"})
    lstm = str(d / "lstm.mwts")
    modviz.train("lstm", data, lstm, epochs=1, seed=4, overrides={"lstm.hidden": "4"})
    return {"dir": d, "data": data, "lenet": lenet, "lstm": lstm, "history": hist}


def test_dataset_arrays(pipeline):
    ds = modviz.load_dataset(pipeline["data"])
    assert ds["iq"].shape == (2 * 2 * 10, 32)
    assert ds["iq"].dtype == np.complex64
    assert set(ds["label"].tolist()) == {modviz.label_names().index("BPSK"), modviz.label_names().index("QPSK")}
    assert set(ds["snr_db"].tolist()) == {10, 12}
    # 10 per cell split 8 / 1 / 1.
    assert np.bincount(ds["split"], minlength=3).tolist() == [32, 4, 4]


def test_amplitude_phase():
    a, ph = modviz.amplitude_phase(np.array([3 + 4j, -1 + 0j, 0j], dtype=np.complex64))
    assert a[0] == pytest.approx(5.0)
    assert ph[0] == pytest.approx(0.92730, abs=1e-5)
    assert ph[1] == pytest.approx(math.pi)
    assert a[2] == 0.0 and ph[2] == 0.0


def test_parameter_counts():
    assert modviz.parameter_count("lenet") == 2671899
    assert modviz.parameter_count("resnet") == 123051


def test_training_history(pipeline):
    hist = pipeline["history"]
    assert [e["epoch"] for e in hist["epochs"]] == [1, 2]
    assert 0.0 <= hist["best_val_accuracy"] <= 1.0


def test_evaluate(pipeline):
    r = modviz.evaluate(pipeline["lenet"], pipeline["data"], "test")
    assert r["count"] == 4
    cm = r["confusion"]
    sums = cm.sum(axis=1)
    for s in sums:
        assert s == pytest.approx(1.0) or s == 0.0


def test_gradcam(pipeline):
    r = modviz.gradcam(pipeline["lenet"], pipeline["data"], 3)
    w = r["w"]
    assert w.shape == (32,)
    assert w.min() >= 0.0 and w.max() <= 1.0
    assert w.max() == 0.0 or w.max() == pytest.approx(1.0)
    scaled = modviz.gradcam(pipeline["lenet"], pipeline["data"], 3, score_scale=5.0)
    np.testing.assert_allclose(scaled["w"], w, atol=1e-9)
    with pytest.raises(modviz.NoTapPoint):
        modviz.gradcam(pipeline["lstm"], pipeline["data"], 0)
    with pytest.raises(ValueError):
        modviz.gradcam(pipeline["lenet"], pipeline["data"], 10_000)


def test_mask(pipeline):
    r = modviz.mask(pipeline["lstm"], pipeline["data"], 2, iterations=30)
    assert r["w"].shape == (32,)
    assert ((r["w"] >= 0) & (r["w"] <= 1)).all()
    assert len(r["objective"]) == 31
    assert r["objective"][r["best_iteration"]] <= r["objective"][0]


def test_resize_and_segments():
    np.testing.assert_allclose(modviz.resize_bilinear(np.array([0.0, 1.0]), 4), [0, 0.25, 0.75, 1], atol=1e-12)
    np.testing.assert_allclose(modviz.normalize_unit(np.array([1.0, 2.0, 4.0])), [0.25, 0.5, 1.0])
    assert modviz.connect_segments(np.array([0.5, 0.45, 0.2, 0.6, 0.7]), 0.4) == [(0, 1), (3, 4)]


def test_svg_is_deterministic():
    rng = np.random.default_rng(1)
    iq = (rng.normal(size=64) + 1j * rng.normal(size=64)).astype(np.complex64)
    w = rng.uniform(size=64)
    a = modviz.constellation_svg(iq, w, eta=0.3)
    assert a == modviz.constellation_svg(iq, w, eta=0.3)
    assert a.count("<circle") == 64
    assert a.count("<line") == len(modviz.connect_segments(w, 0.3))
    with pytest.raises(ValueError):
        modviz.constellation_svg(iq, w[:10])


def test_cli_in_process(pipeline):
    code, out, _ = modviz.cli(["eval", "--model-file", pipeline["lenet"], "--data", pipeline["data"],
                               "--report", str(pipeline["dir"] / "r.txt")])
    assert code == 0
    assert "accuracy" in out
    code, _, _ = modviz.cli(["frobnicate"])
    assert code == 2
