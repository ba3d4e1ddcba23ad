import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import T0, make_hotspot
from hotspot_disambig.data import RasterPatch, SceneConfig, Sensor, generate_synthetic_scene
from hotspot_disambig.features import (
    ALL_FEATURES, BLOCK_ORDER, FEATURE_SETS, FeatureSetConfig, assemble_features, compute_nph,
    compute_time_features, encode_lulc, feature_matrix, read_feature_csv, select_columns, write_feature_csv,
)
from hotspot_disambig.geo import STIndex
from oracles import brute_nph


def utc(*args):
    return int(dt.datetime(*args, tzinfo=dt.timezone.utc).timestamp())


def test_presets_match_table():
    flags = {name: set(fs.blocks) for name, fs in FEATURE_SETS.items()}
    assert flags == {
        "FS1": {"sensor", "time"},
        "FS2": {"sensor", "time", "land_cover"},
        "FS3": {"sensor", "time", "land_cover", "sentinel3"},
        "FS4": {"sensor", "time", "land_cover", "sentinel3", "nph"},
        "FS5": {"time", "land_cover", "sentinel3", "nph"},
        "FS6": {"land_cover", "sentinel3"},
    }


@pytest.mark.parametrize("name,dim", [("FS1", 18), ("FS2", 27), ("FS3", 59), ("FS4", 62), ("FS5", 48), ("FS6", 41)])
def test_dimensions(name, dim):
    assert FEATURE_SETS[name].dim == dim
    assert len(FEATURE_SETS[name].names) == len(set(FEATURE_SETS[name].names))


def test_block_order_is_fixed():
    names = ALL_FEATURES.names
    firsts = [names.index(n) for n in ("frp", "week_sin", "lulc_1", "s3_00", "nph_12h")]
    assert firsts == sorted(firsts) == [0, 14, 18, 27, 59]
    assert ALL_FEATURES.blocks == BLOCK_ORDER


def test_parse_specs():
    assert FeatureSetConfig.parse("fs3") is FEATURE_SETS["FS3"]
    custom = FeatureSetConfig.parse({"time": True, "nph": True})
    assert custom.dim == 7 and not custom.needs_patch
    with pytest.raises(ValueError):
        FeatureSetConfig.parse("FS9")
    with pytest.raises(ValueError):
        FeatureSetConfig.parse({"weather": True})


def test_isolated_hotspot_has_zero_nph():
    h = make_hotspot(1, 40, 10, T0)
    assert compute_nph(STIndex.from_records([h]), h) == (0, 0, 0)


def test_nph_hand_example():
    h = make_hotspot(3, 40, 10, T0 + 100 * 3600)
    prior = [make_hotspot(1, 40, 10, h.time - 6 * 3600), make_hotspot(2, 40, 10, h.time - 20 * 3600)]
    assert compute_nph(STIndex.from_records(prior + [h]), h) == (1, 2, 2)


def test_nph_window_edges():
    h = make_hotspot(10, 40, 10, T0 + 100 * 3600)
    others = [
        make_hotspot(1, 40, 10, h.time - 12 * 3600),  # exactly 12 h: counts in every window
        make_hotspot(2, 40, 10, h.time - 36 * 3600),  # exactly 36 h: only the longest window
        make_hotspot(3, 40, 10, h.time - 36 * 3600 - 1),  # just too old
        make_hotspot(4, 40, 10, h.time),  # simultaneous: not "before"
        make_hotspot(5, 40, 10, h.time + 10),  # after
        make_hotspot(6, 40.0095, 10, h.time - 60),  # ~1.06 km away
    ]
    assert compute_nph(STIndex.from_records(others + [h]), h) == (1, 1, 2)


def test_nph_matches_brute_force_and_is_monotone():
    for seed in range(3):
        scene = generate_synthetic_scene(SceneConfig(n_points=600, n_industrial_sites=2), seed=seed)
        hs = scene.hotspots
        idx = STIndex.from_records(hs)
        expected = brute_nph(hs)
        for h in hs:
            got = compute_nph(idx, h)
            assert got == expected[h.id]
            assert got[0] <= got[1] <= got[2]


def test_time_features_monday_midnight():
    t = utc(2021, 7, 5)  # a Monday
    np.testing.assert_allclose(compute_time_features(t), [0, 1, 0, 1], atol=1e-12)


def test_time_features_thursday_noon():
    t = utc(2021, 7, 8, 12)
    np.testing.assert_allclose(compute_time_features(t), [0, -1, 0, -1], atol=1e-12)


@given(st.integers(0, 4_000_000_000))
def test_time_features_match_scalar_oracle(t):
    d = dt.datetime.fromtimestamp(t, tz=dt.timezone.utc)
    monday = (d - dt.timedelta(days=d.weekday())).replace(hour=0, minute=0, second=0)
    w = (d - monday).total_seconds() / 604800
    s = (d.hour * 3600 + d.minute * 60 + d.second) / 86400
    expected = [math.sin(2 * math.pi * w), math.cos(2 * math.pi * w), math.sin(2 * math.pi * s), math.cos(2 * math.pi * s)]
    np.testing.assert_allclose(compute_time_features(t), expected, atol=1e-9)


@given(st.integers(0, 3_000_000_000))
def test_week_shift_invariance(t):
    a, b = compute_time_features(t), compute_time_features(t + 7 * 86400)
    np.testing.assert_allclose(a[:2], b[:2], atol=1e-9)


def test_encode_lulc():
    assert encode_lulc(1).tolist() == [1, 0, 0, 0, 0, 0, 0, 0, 0]
    assert encode_lulc(9).tolist() == [0, 0, 0, 0, 0, 0, 0, 0, 1]
    for bad in (0, 10, 2.5):
        with pytest.raises(ValueError):
            encode_lulc(bad)


def _patch(hid=1, lulc=4):
    v = np.arange(32 * 32 * 33, dtype=np.float32).reshape(32, 32, 33) / 1000
    v[:, :, 32] = lulc
    return RasterPatch(hid, v)


def test_fs1_modis_layout():
    h = make_hotspot(1, 40, 10, utc(2021, 7, 5), frp=12.5, bands={"t_21": 330.0})
    fv = assemble_features(h, FEATURE_SETS["FS1"])
    assert len(fv) == 18
    assert fv.values[:7].tolist() == [12.5, 330.0, 0, 0, 0, 0, 0]
    assert fv.values[7:14].tolist() == [1, 1, 0, 0, 0, 0, 0]
    np.testing.assert_allclose(fv.values[14:], [0, 1, 0, 1], atol=1e-12)


def test_fs4_and_fs6_layout():
    h = make_hotspot(1, 40, 10, T0, sensor=Sensor.VIIRS375, bands={"t_i4": 340.0, "t_i5": 300.0})
    p = _patch(lulc=7)
    fv4 = assemble_features(h, FEATURE_SETS["FS4"], p, (1, 2, 3))
    assert len(fv4) == 62
    assert fv4.values[18:27].tolist() == encode_lulc(7).tolist()
    np.testing.assert_array_equal(fv4.values[27:59], p.values[16, 16, :32].astype(np.float64))
    assert fv4.values[59:].tolist() == [1, 2, 3]
    fv6 = assemble_features(h, FEATURE_SETS["FS6"], p)
    assert len(fv6) == 41
    np.testing.assert_array_equal(fv6.values, fv4.values[18:59])


def test_missing_patch_or_nph_rejected():
    h = make_hotspot(1, 40, 10, T0)
    with pytest.raises(ValueError):
        assemble_features(h, FEATURE_SETS["FS2"])
    with pytest.raises(ValueError):
        assemble_features(h, FEATURE_SETS["FS4"], _patch())


def test_feature_matrix_and_select_columns():
    scene = generate_synthetic_scene(SceneConfig(n_points=120), seed=8)
    X, names = feature_matrix(scene.hotspots, ALL_FEATURES, scene.patches)
    X2, _ = feature_matrix(scene.hotspots, ALL_FEATURES, scene.patches)
    np.testing.assert_array_equal(X, X2)
    assert X.shape == (120, 62)
    for name in ("FS1", "FS3", "FS6"):
        fs = FEATURE_SETS[name]
        direct, _ = feature_matrix(scene.hotspots, fs, scene.patches)
        sub, sub_names = select_columns(X, names, fs)
        np.testing.assert_array_equal(direct, sub)
        assert sub_names == fs.names
    with pytest.raises(ValueError):
        select_columns(X[:, :18], names[:18], FEATURE_SETS["FS6"])


def test_feature_csv_round_trip(tmp_path, rng):
    X = rng.normal(size=(5, 3))
    write_feature_csv(tmp_path / "f.csv", [3, 1, 4, 1_000_000_000_000, 5], X, ("a", "b", "c"), [0, 1, 0, 1, 1])
    ids, X2, names, labels = read_feature_csv(tmp_path / "f.csv")
    assert ids.tolist() == [3, 1, 4, 1_000_000_000_000, 5]
    assert names == ("a", "b", "c")
    np.testing.assert_array_equal(X, X2)
    assert labels.tolist() == [0, 1, 0, 1, 1]
