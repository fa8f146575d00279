"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL
line.  Tolerances are pinned here, not configurable.

The published full-scale numbers (thousands of events on real systems,
downstream F1 gains) are not reproducible at desk scale; the property and
oracle suite below, plus arithmetic validation of the published ratios, is
the substitute.  That substitution is itself asserted as the final
criterion note.
"""

from __future__ import annotations

import random
import sys
import time
from pathlib import Path

import pytest

from logsynth.callgraph import prune
from logsynth.label import RuleSet, krippendorff_alpha, label_sequence
from logsynth.merge import verify_merge
from logsynth.metrics import coverage, coverage_ratio, increment, r_coverage

import interp
from conftest import FIXTURE_DIR, fixture_paths
from oracles import reach_direct_fixpoint
from test_callgraph import random_graph, tagged_graph
from test_label import GOLDEN, make_seq, oracle_alpha_nominal
from test_merge import mutate_out_of_bracket


REPORT_PATH = Path(__file__).parent.parent / "acceptance_report.txt"


@pytest.fixture(scope="module", autouse=True)
def _fresh_report():
    REPORT_PATH.write_text("", encoding="utf-8")
    yield


def _report(name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    line = f"[acceptance] {name}: {status}"
    if detail:
        line += f" ({detail})"
    print(line, file=sys.__stdout__, flush=True)
    with REPORT_PATH.open("a", encoding="utf-8") as fh:
        fh.write(line + "\n")
    assert ok, line


# ---------------------------------------------------------------------------

def test_acceptance_pruning_correctness():
    start = time.monotonic()
    mismatches = 0
    for seed in range(1000):
        node_ids, edges, direct = random_graph(seed)
        graph = tagged_graph(node_ids, edges, direct)
        pruned = prune(graph)
        expected = reach_direct_fixpoint(node_ids, edges, direct)
        if {n.id for n in pruned.nodes} != expected:
            mismatches += 1
    elapsed = time.monotonic() - start
    _report("pruning-correctness",
            mismatches == 0 and elapsed < 10.0,
            f"1000 graphs, {mismatches} mismatches, {elapsed:.2f}s")


def test_acceptance_metric_arithmetic():
    checks = [
        (round(coverage_ratio(9225, 9662) * 100, 2), 95.48),
        (round(coverage_ratio(2874, 2889) * 100, 2), 99.48),
        (round(r_coverage([f"t{i}" for i in range(93)],
                          [f"t{i}" for i in range(107)]) * 100, 2), 86.92),
        (round(r_coverage([f"t{i}" for i in range(14)],
                          [f"t{i}" for i in range(15)]) * 100, 2), 93.33),
    ]
    ok = all(abs(got - want) <= 0.01 for got, want in checks)
    ok = ok and increment(2874, 30) == "95X" and increment(9225, 242) == "38X"
    _report("metric-arithmetic", ok,
            ", ".join(f"{got}~{want}" for got, want in checks)
            + f", {increment(2874, 30)}, {increment(9225, 242)}")


def test_acceptance_interpreter_soundness(merged):
    corpus = merged["store"].corpus
    violations = 0
    for seq in merged["sequences"]:
        src = corpus.get(seq.root_method)
        args = [seq.context.bindings[p.name] for p in src.method.params]
        run = interp.run_method(corpus, seq.root_method, args,
                                seq.context.dispatch)
        got = [(e.fingerprint, e.rendered) for e in run.events]
        want = [(e.fingerprint, e.rendered) for e in seq.events]
        if got != want:
            violations += 1
    _report("interpreter-soundness", violations == 0,
            f"{len(merged['sequences'])} sequences, {violations} violations")


def test_acceptance_interpreter_completeness(merged, corpus):
    emitted = {}
    for seq in merged["sequences"]:
        emitted.setdefault(seq.root_method, set()).add(
            tuple((e.fingerprint, e.template) for e in seq.events))
    missing = 0
    checked = 0
    for sub in merged["subgraphs"]:
        root = merged["graph"].by_id[sub.root].fq_name
        src = corpus.get(root)
        if src is None:
            continue
        for dispatch in interp.dispatch_choices(corpus):
            for args in interp.input_assignments(corpus, root):
                run = interp.run_method(
                    corpus, root, [args[p.name] for p in src.method.params],
                    dispatch)
                if not run.events:
                    continue
                checked += 1
                key = tuple((e.fingerprint, e.template) for e in run.events)
                if key not in emitted.get(root, set()):
                    missing += 1
    events = [(e.source_method, e.template)
              for s in merged["sequences"] for e in s.events]
    cov = coverage(events, corpus)
    _report("interpreter-completeness",
            missing == 0 and cov.coverage == 1.0,
            f"{checked} interpreter runs, {missing} uncovered, "
            f"fixture coverage {cov.coverage_percent()}")


def test_acceptance_stack_discipline(merged):
    rng = random.Random(271828)
    sequences = merged["sequences"]
    bad_brackets = 0
    for _ in range(10_000):
        seq = rng.choice(sequences)
        brackets = seq.context.brackets()
        for a in brackets:
            for b in brackets:
                if a is not b and a[0] < b[0] < a[1] < b[1]:
                    bad_brackets += 1
        for i, step in enumerate(seq.context.path):
            if step.kind in ("call-enter", "call-exit"):
                continue
            containing = sum(1 for enter, leave, _ in brackets
                             if enter < i < leave)
            if step.depth != containing:
                bad_brackets += 1

    eligible = [s for s in sequences if mutate_out_of_bracket(s) is not None]
    reasoner = merged["reasoner"]
    rejected = 0
    total = 1000
    for i in range(total):
        seq = eligible[i % len(eligible)]
        mutated = mutate_out_of_bracket(seq)
        # displace a different inside-bracket log each round when possible
        verdict = verify_merge(mutated, reasoner)
        if not verdict.accepted:
            rejected += 1
    _report("stack-discipline",
            bad_brackets == 0 and rejected == total,
            f"10000 checks, {bad_brackets} violations; "
            f"{rejected}/{total} mutations rejected")


def test_acceptance_exception_path_fidelity(merged):
    seqs = [s for s in merged["sequences"]
            if s.root_method == "FSNamesystem.setPermission/2"]
    success = [
        s for s in seqs
        if [e.fingerprint for e in s.events][:2] ==
           ["<FSPermissionChecker:checkOwner> [DEBUG]",
            "<FSNamesystem:setPermission> [INFO]"]
        and len(s.events) == 3
        and "logAuditEvent" in s.events[2].fingerprint
    ]
    failure = [
        s for s in seqs
        if s.events and s.events[0].fingerprint ==
           "<FSNamesystem:setPermission> [WARN]"
        and len(s.events) == 2
        and "logAuditEvent" in s.events[1].fingerprint
        and s.context.path[-1].kind == "exit"
    ]
    # the exception route must really propagate the denied exception
    failure = [
        s for s in failure
        if any(step.kind == "catch-entry" for step in s.context.path)
    ]
    ok = len(success) >= 2 and len(failure) >= 2  # one per audit candidate
    _report("exception-path-fidelity", ok,
            f"{len(success)} success-path, {len(failure)} exception-path")


def test_acceptance_labeling_rules():
    rules = RuleSet()
    failures = 0
    for events, expected, rule_ids in GOLDEN:
        record = label_sequence(make_seq(events), rules)
        if record.anomaly_label != expected or \
                {e.rule_id for e in record.evidence} != rule_ids:
            failures += 1
            continue
        for ev in record.evidence:
            event = record.log_sequence.events[ev.event_index]
            if ev.matched not in event.rendered and \
                    ev.matched not in event.fingerprint:
                failures += 1
                break
    _report("labeling-rules", failures == 0,
            f"{len(GOLDEN)} golden cases, {failures} failures")


def test_acceptance_krippendorff_alpha():
    perfect = krippendorff_alpha([["N", "N"], ["A", "A"]] * 5)
    ok = perfect.alpha == 1.0

    micro = [
        [["A", "A"], ["B", "B"], ["A", "B"], ["B", "B"]],
        [["A", "A", None], ["B", None, "B"], ["A", "B", "A"],
         [None, "B", "B"], ["A", "A", "A"]],
        [[1, 1], [2, 2], [3, 3], [1, 2], [2, 3]],
    ]
    max_err = 0.0
    for matrix in micro:
        err = abs(krippendorff_alpha(matrix).alpha -
                  oracle_alpha_nominal(matrix))
        max_err = max(max_err, err)
    ok = ok and max_err <= 1e-9

    rng = random.Random(31337)
    matrix = [[rng.choice(["N", "A"]), rng.choice(["N", "A"])]
              for _ in range(10_000)]
    monte = krippendorff_alpha(matrix).alpha
    ok = ok and abs(monte) < 0.05
    _report("krippendorff-alpha", ok,
            f"perfect={perfect.alpha}, micro-err={max_err:.2e}, "
            f"random-coder={monte:+.4f}")


def test_acceptance_determinism(tmp_path):
    from logsynth.config import PipelineConfig
    from logsynth.pipeline import run

    def one_run(name: str) -> bytes:
        config = PipelineConfig(
            corpus_paths=[str(p) for p in fixture_paths()],
            meta_path=str(FIXTURE_DIR / "corpus.meta.json"),
            out_dir=str(tmp_path / name),
        )
        run(config)
        return Path(config.out_dir, "dataset.jsonl").read_bytes()

    a = one_run("first")
    b = one_run("second")
    _report("determinism", a == b and len(a) > 0,
            f"{len(a)} bytes, byte-identical={a == b}")


def test_acceptance_desk_scale_note(merged):
    # the full-scale published results are out of reach at desk scale; this
    # suite substitutes properties, oracles, and published-ratio arithmetic.
    # Assert the substitute actually ran against a real synthesized dataset.
    ok = len(merged["sequences"]) > 0
    _report("desk-scale-substitution-note", ok,
            f"{len(merged['sequences'])} synthesized sequences under test")
