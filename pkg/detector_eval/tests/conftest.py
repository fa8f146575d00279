from __future__ import annotations

import json
from pathlib import Path

import pytest

from detector_eval.data import load_records

FIXTURE = Path(__file__).parent / "fixtures" / "augmentation.jsonl"


@pytest.fixture(scope="session")
def augmentation_path() -> Path:
    return FIXTURE


@pytest.fixture(scope="session")
def augmentation_records():
    return load_records(FIXTURE)


def write_records(path: Path, records: list[dict]) -> Path:
    path.write_text("".join(json.dumps(r) + "\n" for r in records),
                    encoding="utf-8")
    return path


def synthetic_record(record_id: str, fingerprints: list[str],
                     anomalous: bool) -> dict:
    return {
        "id": record_id,
        "fingerprints": fingerprints,
        "anomaly_label": "Anomalous" if anomalous else "Normal",
    }
