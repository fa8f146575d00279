"""Dataset loading, vocabulary, splits, and the degradation experiment.

Input is the synthesizer's line-delimited record format: each line is a
JSON object with `id`, `fingerprints`, and `anomaly_label` (plus context we
do not need here).  Only the schema is shared with the producer; nothing
from its implementation is imported.

The constructed degradation experiment measures direction of effect: a
baseline corpus is expanded from the synthesized sequences, anomaly
families are stripped from the baseline's training half (they stay in the
test half), and the full synthesized dataset is offered back as
augmentation.  A detector that learns the reintroduced families recovers
recall on the untouched test set.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

REQUIRED_FIELDS = {"id", "fingerprints", "anomaly_label"}


class SchemaMismatch(Exception):
    """A record does not match the dataset schema."""


class InsufficientData(Exception):
    """Training data lacks both classes."""


@dataclass(frozen=True)
class Record:
    record_id: str
    fingerprints: tuple[str, ...]
    anomalous: bool


def load_records(path) -> list[Record]:
    records = []
    for lineno, line in enumerate(
            Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaMismatch(f"{path}:{lineno}: not JSON: {exc}")
        missing = REQUIRED_FIELDS - set(data)
        if missing:
            raise SchemaMismatch(f"{path}:{lineno}: missing {sorted(missing)}")
        if data["anomaly_label"] not in ("Normal", "Anomalous"):
            raise SchemaMismatch(
                f"{path}:{lineno}: bad label {data['anomaly_label']!r}")
        if not isinstance(data["fingerprints"], list) or not all(
                isinstance(f, str) for f in data["fingerprints"]):
            raise SchemaMismatch(f"{path}:{lineno}: bad fingerprints")
        records.append(Record(
            record_id=str(data["id"]),
            fingerprints=tuple(data["fingerprints"]),
            anomalous=data["anomaly_label"] == "Anomalous",
        ))
    return records


@dataclass
class Vocabulary:
    index: dict[str, int]

    @classmethod
    def build(cls, records: list[Record]) -> "Vocabulary":
        tokens = sorted({f for r in records for f in r.fingerprints})
        # 0 is padding
        return cls(index={tok: i + 1 for i, tok in enumerate(tokens)})

    def __len__(self) -> int:
        return len(self.index) + 1

    def encode(self, record: Record, max_len: int) -> list[int]:
        ids = [self.index.get(f, 0) for f in record.fingerprints[:max_len]]
        return ids + [0] * (max_len - len(ids))


def anomaly_family(record: Record) -> str | None:
    """The trigger of an anomalous sequence: its first fingerprint that is
    rare among normals -- operationally, the lexicographically first WARN or
    ERROR or FATAL event."""
    severe = [f for f in record.fingerprints
              if "[WARN]" in f or "[ERROR]" in f or "[FATAL]" in f]
    return min(severe) if severe else None


@dataclass
class Experiment:
    train_baseline: list[Record]
    train_augmented: list[Record]
    test: list[Record]
    removed_families: list[str] = field(default_factory=list)


def _perturb(rng: random.Random, base: Record, normals: list[Record],
             counter: int) -> Record:
    """A baseline variant of one synthesized sequence: light, label-safe
    edits (prefix/suffix filler from normal traffic, occasional event
    duplication)."""
    events = list(base.fingerprints)
    if normals and rng.random() < 0.7:
        filler = rng.choice(normals).fingerprints
        if filler:
            events = [rng.choice(filler)] + events
    if events and rng.random() < 0.3:
        i = rng.randrange(len(events))
        events.insert(i, events[i])
    return Record(record_id=f"base-{counter:05d}",
                  fingerprints=tuple(events), anomalous=base.anomalous)


def build_degradation_experiment(augmentation: list[Record], seed: int,
                                 n_baseline: int = 400,
                                 removed_fraction: float = 0.5) -> Experiment:
    """Expand a baseline corpus from the synthesized records, hold out an
    untouched test half, strip a seeded subset of anomaly families from the
    training half, and pair it with the full synthesized set as
    augmentation (deduplicated by record id)."""
    rng = random.Random(seed)
    normals = [r for r in augmentation if not r.anomalous]
    anomalous = [r for r in augmentation if r.anomalous]
    if not normals or not anomalous:
        raise InsufficientData("need both classes in the augmentation set")

    baseline = []
    for i in range(n_baseline):
        pool = anomalous if rng.random() < 0.35 else normals
        baseline.append(_perturb(rng, rng.choice(pool), normals, i))

    rng.shuffle(baseline)
    half = len(baseline) // 2
    test, train_full = baseline[:half], baseline[half:]

    families = sorted({f for r in anomalous
                       for f in [anomaly_family(r)] if f})
    n_removed = max(1, int(len(families) * removed_fraction))
    removed = rng.sample(families, n_removed)
    removed_set = set(removed)

    train_degraded = [
        r for r in train_full
        if not (r.anomalous and anomaly_family(r) in removed_set)
    ]
    train_augmented = merge_training(train_degraded, augmentation)

    if len({r.anomalous for r in train_degraded}) < 2:
        raise InsufficientData("degraded training set lost a class entirely")
    return Experiment(
        train_baseline=train_degraded,
        train_augmented=train_augmented,
        test=test,
        removed_families=sorted(removed),
    )


def merge_training(train: list[Record], augmentation: list[Record]) -> list[Record]:
    """Training union, deduplicated by record id (self-augmentation is a
    no-op by construction)."""
    seen = {r.record_id for r in train}
    merged = list(train)
    for record in augmentation:
        if record.record_id not in seen:
            seen.add(record.record_id)
            merged.append(record)
    return merged


def assert_test_isolation(experiment: Experiment) -> None:
    test_ids = {r.record_id for r in experiment.test}
    for name in ("train_baseline", "train_augmented"):
        overlap = test_ids & {r.record_id for r in getattr(experiment, name)}
        if overlap:
            raise AssertionError(f"test split leaked into {name}: {overlap}")
