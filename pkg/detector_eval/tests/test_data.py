from __future__ import annotations

import pytest

from detector_eval.data import (InsufficientData, Record, SchemaMismatch,
                                Vocabulary, anomaly_family,
                                assert_test_isolation,
                                build_degradation_experiment, load_records,
                                merge_training)

from conftest import synthetic_record, write_records


def test_load_fixture(augmentation_records):
    assert len(augmentation_records) == 41
    labels = {r.anomalous for r in augmentation_records}
    assert labels == {True, False}
    ids = [r.record_id for r in augmentation_records]
    assert len(ids) == len(set(ids))


def test_schema_mismatch_missing_field(tmp_path):
    path = write_records(tmp_path / "bad.jsonl",
                         [{"id": "x", "fingerprints": ["a"]}])
    with pytest.raises(SchemaMismatch):
        load_records(path)


def test_schema_mismatch_bad_label(tmp_path):
    path = write_records(
        tmp_path / "bad.jsonl",
        [{"id": "x", "fingerprints": ["a"], "anomaly_label": "odd"}])
    with pytest.raises(SchemaMismatch):
        load_records(path)


def test_schema_mismatch_not_json(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text("{nope\n", encoding="utf-8")
    with pytest.raises(SchemaMismatch):
        load_records(path)


def test_vocabulary_round_trip(augmentation_records):
    vocab = Vocabulary.build(augmentation_records)
    assert len(vocab) == len({f for r in augmentation_records
                              for f in r.fingerprints}) + 1
    encoded = vocab.encode(augmentation_records[0], 24)
    assert len(encoded) == 24
    assert all(isinstance(i, int) for i in encoded)


def test_anomaly_family_is_severe_event():
    rec = Record("r", ("<A:a> [INFO]", "<B:b> [WARN]", "<C:c> [ERROR]"), True)
    assert anomaly_family(rec) == "<B:b> [WARN]"
    assert anomaly_family(Record("r2", ("<A:a> [INFO]",), False)) is None


def test_degradation_experiment_shape(augmentation_records):
    exp = build_degradation_experiment(augmentation_records, seed=1)
    assert exp.removed_families
    assert_test_isolation(exp)
    # removed families absent from baseline training, present in test
    train_fams = {anomaly_family(r) for r in exp.train_baseline if r.anomalous}
    assert not (train_fams & set(exp.removed_families))
    test_fams = {anomaly_family(r) for r in exp.test if r.anomalous}
    assert test_fams & set(exp.removed_families)
    # augmentation reintroduces them
    aug_fams = {anomaly_family(r) for r in exp.train_augmented if r.anomalous}
    assert set(exp.removed_families) <= aug_fams
    # both classes survive degradation
    assert {r.anomalous for r in exp.train_baseline} == {True, False}


def test_degradation_experiment_deterministic(augmentation_records):
    a = build_degradation_experiment(augmentation_records, seed=5)
    b = build_degradation_experiment(augmentation_records, seed=5)
    assert [r.record_id for r in a.test] == [r.record_id for r in b.test]
    assert a.removed_families == b.removed_families
    c = build_degradation_experiment(augmentation_records, seed=6)
    assert [r.record_id for r in a.test] != [r.record_id for r in c.test] or \
        a.removed_families != c.removed_families


def test_merge_training_dedups_by_id():
    train = [Record("a", ("x",), False), Record("b", ("y",), True)]
    augmentation = [Record("b", ("y",), True), Record("c", ("z",), False)]
    merged = merge_training(train, augmentation)
    assert [r.record_id for r in merged] == ["a", "b", "c"]


def test_single_class_augmentation_rejected(tmp_path):
    records = [synthetic_record(f"r{i}", ["<A:a> [INFO]"], False)
               for i in range(10)]
    path = write_records(tmp_path / "mono.jsonl", records)
    with pytest.raises(InsufficientData):
        build_degradation_experiment(load_records(path), seed=0)
