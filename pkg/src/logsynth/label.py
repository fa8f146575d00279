"""Knowledge-rule anomaly annotation and annotation-consistency statistics.

Explicit rules capture the obvious signals (severe log levels, exception
keywords); implicit rules catch anomalies that only show up as error codes
or failure wording inside otherwise benign-looking messages.  Every match
is recorded as evidence (rule id, event index, matched text), so a record
is anomalous exactly when its evidence list is non-empty.

A seeded sample of records supports an external review workflow; reviewer
agreement is summarized with Krippendorff's alpha (nominal metric,
missing-data tolerant).
"""

from __future__ import annotations

import csv
import json
import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .errors import EmptyInputError
from .lang import LogLevel
from .merge import LogSequence


@dataclass
class Rule:
    rule_id: str
    kind: str  # "explicit" | "implicit"


@dataclass
class RuleSet:
    min_level: LogLevel = LogLevel.ERROR
    explicit_keywords: tuple[str, ...] = ("Exception",)
    error_code_pattern: str = r"error_code=(\d+)"
    error_code_min: int = 400
    failure_keywords: tuple[str, ...] = ("fail", "cannot", "invalid")

    def __post_init__(self) -> None:
        self._code_re = re.compile(self.error_code_pattern)
        ids = [r.rule_id for r in self.rules()]
        if len(ids) != len(set(ids)):
            raise ValueError("rule ids must be unique")

    def rules(self) -> list[Rule]:
        out = [Rule(f"explicit.level>={self.min_level.name}", "explicit")]
        out += [Rule(f"explicit.keyword:{k}", "explicit")
                for k in self.explicit_keywords]
        out.append(Rule("implicit.error-code", "implicit"))
        out += [Rule(f"implicit.keyword:{k}", "implicit")
                for k in self.failure_keywords]
        return out

    @classmethod
    def from_file(cls, path) -> "RuleSet":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        explicit = data.get("explicit", {})
        implicit = data.get("implicit", {})
        return cls(
            min_level=LogLevel[explicit.get("min_level", "ERROR")],
            explicit_keywords=tuple(explicit.get("keywords", ["Exception"])),
            error_code_pattern=implicit.get("error_code_pattern",
                                            r"error_code=(\d+)"),
            error_code_min=implicit.get("error_code_min", 400),
            failure_keywords=tuple(implicit.get(
                "failure_keywords", ["fail", "cannot", "invalid"])),
        )

    def to_dict(self) -> dict:
        return {
            "explicit": {"min_level": self.min_level.name,
                         "keywords": list(self.explicit_keywords)},
            "implicit": {"error_code_pattern": self.error_code_pattern,
                         "error_code_min": self.error_code_min,
                         "failure_keywords": list(self.failure_keywords)},
        }


@dataclass(frozen=True)
class Evidence:
    rule_id: str
    event_index: int
    matched: str


@dataclass
class AnomalyRecord:
    log_sequence: LogSequence
    anomaly_label: str  # "Normal" | "Anomalous"
    evidence: list[Evidence] = field(default_factory=list)

    @property
    def execution_context(self):
        return self.log_sequence.context

    @property
    def anomalous(self) -> bool:
        return self.anomaly_label == "Anomalous"


def _level_from_fingerprint(fingerprint: str) -> LogLevel:
    name = fingerprint.rsplit("[", 1)[1].rstrip("]")
    return LogLevel[name]


def label_sequence(seq: LogSequence, rules: RuleSet) -> AnomalyRecord:
    """Pure function of (sequence, rules): explicit rules first, then
    implicit; every match becomes evidence."""
    evidence: list[Evidence] = []
    level_rule = f"explicit.level>={rules.min_level.name}"
    for idx, event in enumerate(seq.events):
        level = _level_from_fingerprint(event.fingerprint)
        if level.severity >= rules.min_level.severity:
            evidence.append(Evidence(level_rule, idx, f"[{level.name}]"))
        for keyword in rules.explicit_keywords:
            if keyword in event.rendered:
                evidence.append(Evidence(f"explicit.keyword:{keyword}", idx,
                                         keyword))
    for idx, event in enumerate(seq.events):
        for match in rules._code_re.finditer(event.rendered):
            try:
                code = int(match.group(1))
            except (IndexError, ValueError):
                continue
            if code >= rules.error_code_min:
                evidence.append(Evidence("implicit.error-code", idx,
                                         match.group(0)))
        lowered = event.rendered.lower()
        for keyword in rules.failure_keywords:
            pos = lowered.find(keyword.lower())
            if pos >= 0:
                evidence.append(Evidence(
                    f"implicit.keyword:{keyword}", idx,
                    event.rendered[pos:pos + len(keyword)]))
    label = "Anomalous" if evidence else "Normal"
    return AnomalyRecord(log_sequence=seq, anomaly_label=label,
                         evidence=evidence)


def sample_for_review(records: Sequence, rate: float, seed: int) -> list:
    """floor(rate*N) records drawn uniformly without replacement; the same
    seed always yields the same sample."""
    if not records:
        raise EmptyInputError("no records to sample")
    if not 0 < rate <= 1:
        raise ValueError(f"rate must be in (0, 1], got {rate}")
    k = int(rate * len(records))
    rng = random.Random(seed)
    return rng.sample(list(records), k)


# ---------------------------------------------------------------------------
# Krippendorff's alpha (nominal)
# ---------------------------------------------------------------------------

@dataclass
class AgreementReport:
    alpha: float
    n_items: int
    n_annotators: int
    disagreement_items: list = field(default_factory=list)
    degenerate: bool = False


def krippendorff_alpha(matrix: Sequence[Sequence], *,
                       metric: str = "nominal") -> AgreementReport:
    """alpha = 1 - observed/expected disagreement over an item x annotator
    matrix; None entries mark missing codings.  Items with fewer than two
    codings cannot be paired and are skipped.
    """
    if metric != "nominal":
        raise ValueError("only the nominal metric is supported")
    if not matrix:
        raise EmptyInputError("no items")
    n_annotators = max(len(row) for row in matrix)
    if n_annotators < 2:
        raise EmptyInputError("need at least two annotators")

    units: list[list] = []
    disagreement_items = []
    for item_idx, row in enumerate(matrix):
        values = [v for v in row if v is not None]
        if len(values) >= 2:
            units.append(values)
            if len(set(values)) > 1:
                disagreement_items.append(item_idx)
    if not units:
        raise EmptyInputError("no item carries two or more codings")

    n_pairable = sum(len(u) for u in units)
    # coincidence matrix accumulated as pair counts
    counts: dict = {}
    totals: dict = {}
    for unit in units:
        m = len(unit)
        for a in unit:
            totals[a] = totals.get(a, 0) + 1
        for i, a in enumerate(unit):
            for j, b in enumerate(unit):
                if i == j:
                    continue
                counts[(a, b)] = counts.get((a, b), 0) + 1.0 / (m - 1)

    observed = sum(v for (a, b), v in counts.items() if a != b) / n_pairable
    expected_num = 0.0
    for a, na in totals.items():
        for b, nb in totals.items():
            if a != b:
                expected_num += na * nb
    expected = expected_num / (n_pairable * (n_pairable - 1))

    if expected == 0:
        # every pairable coding is the same single value: report perfect
        # agreement with the degenerate flag set
        return AgreementReport(alpha=1.0, n_items=len(matrix),
                               n_annotators=n_annotators,
                               disagreement_items=disagreement_items,
                               degenerate=True)
    alpha = 1.0 - observed / expected
    return AgreementReport(alpha=alpha, n_items=len(matrix),
                           n_annotators=n_annotators,
                           disagreement_items=disagreement_items)


def load_annotation_matrix(path) -> tuple[list[list], list[str], list[str]]:
    """Read a long-format CSV (item_id, annotator_id, label) into a matrix.

    Returns (matrix, item_ids, annotator_ids); missing codings are None.
    """
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith("#"):
                continue
            if len(row) != 3:
                raise ValueError(f"expected 3 columns, got {row!r}")
            rows.append(tuple(cell.strip() for cell in row))
    if rows and rows[0] == ("item_id", "annotator_id", "label"):
        rows = rows[1:]
    items = sorted({r[0] for r in rows})
    annotators = sorted({r[1] for r in rows})
    index = {(r[0], r[1]): r[2] for r in rows}
    matrix = [[index.get((item, ann)) for ann in annotators] for item in items]
    return matrix, items, annotators
