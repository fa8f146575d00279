"""Comprehensiveness metrics over an emitted dataset.

Coverage counts distinct generated log events against the corpus total; an
event's identity is its owner method plus normalized template (parameters
masked), so differently-rendered instances of one statement count once.
R-coverage measures how much of an external reference dataset's template
set the generated events reproduce, and the increment is the floor ratio of
event counts, written "NX".
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .corpus import Corpus, LogStatement, list_log_statements
from .errors import EmptyReferenceError, ZeroDenominatorError

_MASK_RE = re.compile(r"<\*>|\{\}")
_WS_RE = re.compile(r"\s+")


def normalize_template(template: str) -> str:
    """Mask parameter slots to <*> and collapse whitespace; idempotent."""
    masked = _MASK_RE.sub("<*>", template)
    return _WS_RE.sub(" ", masked).strip()


@dataclass
class CoverageReport:
    n_generated_events: int
    n_total_events: int
    coverage: float
    missing_events: list[LogStatement] = field(default_factory=list)
    r_coverage: float | None = None
    increment: str | None = None

    def coverage_percent(self) -> str:
        return f"{self.coverage * 100:.2f}%"


def _event_identity(owner: str, template: str) -> tuple[str, str]:
    return (owner, normalize_template(template))


def coverage(dataset_events: list[tuple[str, str]], corpus: Corpus) -> CoverageReport:
    """dataset_events: (owner method, template) pairs from emitted sequences."""
    statements = list_log_statements(corpus)
    if not statements:
        raise ZeroDenominatorError("corpus has no log statements")
    generated = {_event_identity(owner, template)
                 for owner, template in dataset_events}
    covered_ids = set()
    missing = []
    for stmt in statements:
        identity = _event_identity(stmt.owner, stmt.template)
        if identity in generated:
            covered_ids.add(identity)
        else:
            missing.append(stmt)
    n_total = len(statements)
    n_generated = n_total - len(missing)
    return CoverageReport(
        n_generated_events=n_generated,
        n_total_events=n_total,
        coverage=n_generated / n_total,
        missing_events=missing,
    )


def coverage_ratio(n_generated: int, n_total: int) -> float:
    """Plain ratio in [0, 1]; the published-table arithmetic check."""
    if n_total == 0:
        raise ZeroDenominatorError("total event count is zero")
    return n_generated / n_total


def r_coverage(generated_templates: list[str],
               reference_templates: list[str]) -> float:
    """Fraction of reference templates matched by some generated event after
    identical normalization."""
    if not reference_templates:
        raise EmptyReferenceError("reference template set is empty")
    generated = {normalize_template(t) for t in generated_templates}
    reference = [normalize_template(t) for t in reference_templates]
    matched = sum(1 for t in reference if t in generated)
    return matched / len(reference)


def increment(n_generated: int, n_reference: int) -> str:
    """Floor multiplier of generated events over a reference count, "NX"."""
    if n_reference <= 0:
        raise ZeroDenominatorError("reference event count must be positive")
    return f"{n_generated // n_reference}X"
