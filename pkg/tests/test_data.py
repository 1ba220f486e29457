import shutil

import numpy as np
import pytest

from mlhnet.data import SyntheticSpec, build_dataset, build_synthetic_dataset, scan_modelnet, synthetic_shapes
from mlhnet.errors import EmptyClass, ParseError
from mlhnet.formats import dataset_bytes


@pytest.fixture(scope="module")
def small_synth():
    return build_synthetic_dataset(SyntheticSpec(classes=4, per_class=10), N=32, k=5, seed=7)


def test_synthetic_count_and_determinism(small_synth):
    assert len(small_synth.records) == 40
    again = build_synthetic_dataset(SyntheticSpec(classes=4, per_class=10), N=32, k=5, seed=7)
    assert dataset_bytes(again) == dataset_bytes(small_synth)


def test_synthetic_parallel_matches_serial(small_synth):
    par = build_synthetic_dataset(SyntheticSpec(classes=4, per_class=10), N=32, k=5, seed=7,
                                  workers=4)
    assert dataset_bytes(par) == dataset_bytes(small_synth)


def test_synthetic_seed_changes_data(small_synth):
    other = build_synthetic_dataset(SyntheticSpec(classes=4, per_class=10), N=32, k=5, seed=8)
    assert dataset_bytes(other) != dataset_bytes(small_synth)


def test_synthetic_split_and_labels(small_synth):
    splits = [r.split for r in small_synth.records]
    assert splits.count("test") == 8 and splits.count("train") == 32
    for label in range(4):
        recs = [r for r in small_synth.records if r.label == label]
        assert len(recs) == 10 and sum(r.split == "test" for r in recs) == 2
    assert small_synth.classes == ["box", "sphere", "cylinder", "cone"]


def test_synthetic_shapes_are_jittered():
    shapes = synthetic_shapes(SyntheticSpec(classes=1, per_class=3), seed=0)
    v = [s[2].vertices for s in shapes]
    assert not np.array_equal(v[0], v[1])


def test_spec_validation():
    with pytest.raises(EmptyClass):
        SyntheticSpec(per_class=0)


@pytest.fixture
def toy_tree(tmp_path, cube_path):
    root = tmp_path / "toy"
    for cls in ("zebra", "apple"):
        for split, n in (("train", 2), ("test", 1)):
            d = root / cls / split
            d.mkdir(parents=True)
            for i in range(n):
                shutil.copy(cube_path, d / f"{cls}_{i}.off")
    return root


def test_modelnet_labels_sorted(toy_tree):
    classes, entries = scan_modelnet(toy_tree)
    assert classes == ["apple", "zebra"]
    ds = build_dataset(toy_tree, N=8, k=2, seed=0)
    assert ds.classes == ["apple", "zebra"]
    assert {(r.shape_id.split("/")[0], r.label) for r in ds.records} == {("apple", 0), ("zebra", 1)}
    assert sum(r.split == "test" for r in ds.records) == 2


def test_modelnet_unreadable_file_named(toy_tree):
    bad = toy_tree / "zebra" / "train" / "broken.off"
    bad.write_text("OFF\n3 1 0\n0 0 0\n")
    with pytest.raises(ParseError) as err:
        build_dataset(toy_tree, N=8, k=2)
    assert "broken.off" in str(err.value)


def test_modelnet_empty_class(toy_tree):
    (toy_tree / "empty" / "train").mkdir(parents=True)
    with pytest.raises(EmptyClass):
        scan_modelnet(toy_tree)
