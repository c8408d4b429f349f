import logging
import math

import numpy as np
import pytest

from tbcough.errors import LayoutError, LeakageError, NotFittedError, SchemaError
from tbcough.lld import LOG_MEL_FLOOR
from tbcough.tabular import (METADATA_FIELDS, FeatureTable, Imputer, Layout, crop_or_pad,
                             encode_metadata, fit_scaler, apply_scaler, flatten_spectrogram,
                             format_metadata, fuse, parse_metadata, Scaler)

BASE = dict(age="30", sex="female", height="170", weight="65", cough_duration_days="21",
            heart_rate="80", temperature="36.6")


def _raw(**kw):
    raw = {n: "no" for n in METADATA_FIELDS} | BASE | kw
    return raw


def test_encode_all_no():
    v = encode_metadata(parse_metadata(_raw()))
    assert v.shape == (16,)
    by_name = dict(zip(METADATA_FIELDS, v))
    assert {k: by_name[k] for k in ("age", "height", "weight", "cough_duration_days",
                                    "heart_rate", "temperature")} == \
        dict(age=30, height=170, weight=65, cough_duration_days=21, heart_rate=80,
             temperature=36.6)
    assert all(by_name[k] == 0 for k in METADATA_FIELDS if k not in BASE or k == "sex")


def test_yes_and_missing():
    rec = parse_metadata(_raw(fever="yes", height=""))
    assert rec.fever == 1.0 and rec.height is None
    assert math.isnan(encode_metadata(rec)[METADATA_FIELDS.index("height")])


def test_round_trip_format():
    rec = parse_metadata(_raw(sex="male", night_sweats="yes", weight=""))
    assert parse_metadata(format_metadata(rec)) == rec


def test_bad_values():
    with pytest.raises(SchemaError):
        parse_metadata(_raw(heart_rate="fast"))
    with pytest.raises(SchemaError):
        parse_metadata(_raw(fever="maybe"))


def test_underage_warns(caplog):
    with caplog.at_level(logging.WARNING):
        parse_metadata(_raw(age="16"))
    assert "below cohort minimum" in caplog.text


def test_median_imputation_on_training_rows():
    X = np.array([[160.0, 1.0], [165.0, 1.0], [190.0, 0.0], [np.nan, np.nan], [np.nan, 0.0]])
    tags = np.array([0, 0, 0, 1, 1])
    train = tags != 1
    imp = Imputer(["numeric", "binary"]).fit(X[train], tags[train], test_fold=1)
    out = imp.transform(X[~train])
    assert out[0].tolist() == [165.0, 1.0]
    assert out[1].tolist() == [165.0, 0.0]


def test_imputer_refuses_test_rows():
    with pytest.raises(LeakageError):
        Imputer(["numeric"]).fit(np.zeros((3, 1)), [0, 1, 0], test_fold=1)


def test_scaler_examples():
    s = fit_scaler(np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]))
    np.testing.assert_allclose(apply_scaler(s, [[1, 5], [2, 5], [3, 5]]),
                               [[-1, 0], [0, 0], [1, 0]], atol=1e-15)
    assert apply_scaler(s, [[2, 7]]).tolist() == [[0.0, 0.0]]


def test_scaler_centres_training_rows(rng):
    X = rng.standard_normal((50, 6)) * [1, 10, 100, 1e3, 1e-3, 5] + 7
    Z = apply_scaler(fit_scaler(X), X)
    assert np.all(np.abs(Z.mean(axis=0)) < 1e-9)


def test_scaler_leakage_and_state():
    with pytest.raises(LeakageError):
        fit_scaler(np.zeros((4, 2)), fold_tags=[0, 0, 3, 1], test_fold=3)
    with pytest.raises(NotFittedError):
        Scaler().transform(np.zeros((1, 2)))
    s = fit_scaler(np.ones((3, 2)))
    with pytest.raises(LayoutError):
        s.transform(np.zeros((1, 3)))


def test_flatten_noop(rng):
    s = rng.standard_normal((128, 24))
    flat = flatten_spectrogram(s)
    assert flat.size == 3072
    np.testing.assert_array_equal(flat, s.ravel())


def test_flatten_crop(rng):
    s = rng.standard_normal((128, 30))
    np.testing.assert_array_equal(flatten_spectrogram(s).reshape(128, 24), s[:, 3:27])


def test_flatten_pad(rng):
    s = rng.standard_normal((128, 10))
    out = flatten_spectrogram(s).reshape(128, 24)
    floor = np.log(LOG_MEL_FLOOR)
    assert np.all(out[:, :7] == floor) and np.all(out[:, 17:] == floor)
    np.testing.assert_array_equal(out[:, 7:17], s)


def test_crop_or_pad_odd_pad():
    out = crop_or_pad(np.ones((2, 3)), 6, 0.0)
    assert out.tolist() == [[0, 1, 1, 1, 0, 0]] * 2


def test_fuse_lengths_and_projection(rng):
    audio, meta, flat = rng.standard_normal(84), rng.standard_normal(16), rng.standard_normal(3072)
    assert fuse(audio, meta).values.size == 100
    fv = fuse(audio, meta, flat)
    assert fv.values.size == 3172
    for name, block in (("audio_summary", audio), ("metadata", meta),
                        ("flat_spectrogram", flat)):
        np.testing.assert_array_equal(fv.layout.project(fv.values, name), block)
    assert fuse(audio).layout.blocks == (("audio_summary", 84),)


def test_fuse_layout_mismatch(rng):
    with pytest.raises(LayoutError):
        fuse(np.zeros(84), np.zeros(15), layout=Layout((("audio_summary", 84), ("metadata", 16))))


def test_layout_partitions():
    lay = Layout((("a", 3), ("b", 5), ("c", 2)))
    assert lay.offsets == {"a": (0, 3), "b": (3, 8), "c": (8, 10)}
    assert Layout.from_list(lay.as_list()) == lay


def test_feature_table_select_blocks(rng):
    lay = Layout((("audio_summary", 3), ("metadata", 2)))
    t = FeatureTable(rng.standard_normal((4, 5)), list("abcd"), ["p", "p", "q", "q"], [1, 1, 0, 0],
                     lay, list("vwxyz"), [None, None, None, "numeric", "binary"])
    s = t.select_blocks(["metadata"])
    np.testing.assert_array_equal(s.X, t.X[:, 3:])
    assert s.kinds == ["numeric", "binary"] and s.layout.width == 2
    with pytest.raises(LayoutError):
        FeatureTable(np.zeros((2, 4)), ["a", "b"], ["p", "q"], [0, 1], lay, list("vwxy"),
                     [None] * 4)
