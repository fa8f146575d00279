from __future__ import annotations

import copy

from logsynth.callgraph import build_call_graph, prune, tag_log_methods
from logsynth.corpus import parse_corpus_text
from logsynth.lcfg import extract_subgraphs
from logsynth.merge import (LogSequence, enumerate_method_paths,
                            merge_bottom_up, optimize_sequences, verify_merge)
from logsynth.paths import LoopPolicy
from logsynth.pipeline import enhance_corpus
from logsynth.reasoner import Reasoner

import interp


def mini_pipeline(text: str, meta=None, entry=2, depth=3):
    corpus = parse_corpus_text([("mini.jsub", text)])
    if meta:
        corpus.meta.interfaces.update(meta.get("interfaces", {}))
        corpus.meta.domains.update(meta.get("domains", {}))
    graph = tag_log_methods(build_call_graph(corpus), corpus)
    pruned = prune(graph)
    subgraphs = extract_subgraphs(pruned, entry, depth)
    reasoner = Reasoner()
    store = enhance_corpus(corpus, graph, subgraphs, reasoner)
    sequences = []
    stats = []
    for sub in subgraphs:
        seqs, st = merge_bottom_up(sub, graph, store.per_method, corpus,
                                   reasoner)
        sequences.extend(seqs)
        stats.append(st)
    return corpus, graph, subgraphs, store, sequences, stats


# ---------------------------------------------------------------------------
# Path enumeration on enhanced graphs
# ---------------------------------------------------------------------------

def test_branch_two_paths(merged):
    cfg = merged["store"].per_method["BlockManager.addBlock/1"]
    result = enumerate_method_paths(cfg)
    projections = sorted(len(p.log_nodes(cfg.graph)) for p in result.paths)
    assert projections == [1, 1]


def test_loop_policy_projection_lengths(merged):
    cfg = merged["store"].per_method["BlockScanner.scan/1"]
    result = enumerate_method_paths(cfg, LoopPolicy(k=2))
    lengths = sorted(len(p.log_nodes(cfg.graph)) for p in result.paths)
    assert lengths == [0, 1, 2]


def test_path_budget_flags_truncation(merged):
    cfg = merged["store"].per_method["RpcServer.handle/1"]
    result = enumerate_method_paths(cfg, max_paths=1)
    assert result.truncated
    assert len(result.paths) == 1


def test_enumeration_matches_bruteforce_walk(merged):
    # oracle: recursive graph walk with the same iteration counts, written
    # directly over the edge lists
    cfg = merged["store"].per_method["BlockManager.replicate/1"]
    graph = cfg.graph
    out = {}
    for e in graph.edges:
        out.setdefault(e.src, []).append(e)

    results = set()

    def walk(node_id, visits, trail):
        node = graph.node(node_id)
        if node_id in graph.exits:
            results.add(tuple(trail))
            return
        edges = sorted(out.get(node_id, []), key=lambda e: (e.label, e.dst))
        for e in edges:
            if e.label == "loop-body":
                if visits.get(node_id, 0) >= 2:
                    continue
                walk(e.dst, {**visits, node_id: visits.get(node_id, 0) + 1},
                     trail + [(node_id, e.label)])
            elif e.label == "loop-exit":
                cur = visits.get(node_id, 0)
                if cur in (0, 1, 2):
                    cleared = {k: v for k, v in visits.items() if k != node_id}
                    walk(e.dst, cleared, trail + [(node_id, e.label)])
            else:
                walk(e.dst, visits, trail + [(node_id, e.label)])

    walk(graph.entry, {}, [])
    got = {tuple((s.node, s.label) for s in p.steps[:-1])
           for p in enumerate_method_paths(cfg, LoopPolicy(k=2)).paths}
    assert got == results


# ---------------------------------------------------------------------------
# Stack discipline splicing
# ---------------------------------------------------------------------------

PARENT_CHILD = """
class P {
    static void run() {
        log.info("P1");
        C.child();
        log.info("P2");
    }
}
class C {
    static void child() {
        log.info("C1");
    }
}
"""


def test_parent_child_splice_order():
    _, _, _, _, sequences, _ = mini_pipeline(PARENT_CHILD)
    parent_seqs = [s for s in sequences if s.root_method == "P.run/0"]
    assert parent_seqs
    templates = [tuple(e.template for e in s.events) for s in parent_seqs]
    assert ("P1", "C1", "P2") in templates


def test_audit_scenario_one_sequence_per_candidate(merged):
    seqs = [s for s in merged["sequences"]
            if s.root_method == "FSNamesystem.setPermission/2"]
    assert seqs
    dispatches = {s.context.dispatch.get("AuditLogger.logAuditEvent")
                  for s in seqs}
    assert dispatches == {"DefaultAuditLogger.logAuditEvent/1",
                          "HdfsAuditLogger.logAuditEvent/1"}
    hdfs_audit = [s for s in seqs
                  if s.context.dispatch["AuditLogger.logAuditEvent"]
                  == "HdfsAuditLogger.logAuditEvent/1"]
    assert any("hdfs-audit" in e.rendered for s in hdfs_audit
               for e in s.events)
    default_audit = [s for s in seqs
                     if s.context.dispatch["AuditLogger.logAuditEvent"]
                     == "DefaultAuditLogger.logAuditEvent/1"]
    assert any(e.rendered.startswith("audit:") for s in default_audit
               for e in s.events)


def test_exception_and_success_paths_emitted(merged):
    seqs = [s for s in merged["sequences"]
            if s.root_method == "FSNamesystem.setPermission/2"]
    success = [s for s in seqs
               if any("setPermission: perm=" in e.rendered for e in s.events)]
    denied = [s for s in seqs
              if any("denied" in e.rendered for e in s.events)]
    assert success and denied
    for seq in success:
        fingerprints = s_fps = seq.fingerprints()
        assert "<FSPermissionChecker:checkOwner> [DEBUG]" in s_fps
        assert any("AuditLogger" in fp or "audit" in e.rendered.lower()
                   for fp, e in zip(fingerprints, seq.events))
    for seq in denied:
        assert "<FSNamesystem:setPermission> [WARN]" in seq.fingerprints()


def test_callee_events_contiguous_within_bracket(merged):
    checked = 0
    for seq in merged["sequences"]:
        brackets = seq.context.brackets()
        if not brackets:
            continue
        checked += 1
        # brackets nest like a call stack: no partial overlap
        for a in brackets:
            for b in brackets:
                if a is not b:
                    assert not (a[0] < b[0] < a[1] < b[1])
        # a step's recorded frame depth equals the number of brackets that
        # strictly contain it: callee blocks are contiguous and bracketed
        for i, step in enumerate(seq.context.path):
            containing = sum(1 for enter, leave, _ in brackets
                             if enter < i < leave)
            if step.kind in ("call-enter", "call-exit"):
                continue
            assert step.depth == containing, (seq.root_method, i, step)
    assert checked > 0


# ---------------------------------------------------------------------------
# verify_merge
# ---------------------------------------------------------------------------

CROSS_FRAME_CONFLICT = """
class P {
    static void run() {
        boolean flag = false;
        C.child(flag);
    }
}
class C {
    static void child(boolean flag) {
        if (flag) {
            log.info("child saw true");
        } else {
            log.info("child saw false");
        }
    }
}
"""


def test_cross_frame_conflict_rejected_as_data_flow():
    _, _, _, _, sequences, stats = mini_pipeline(CROSS_FRAME_CONFLICT)
    reasons = {}
    for st in stats:
        for reason, count in st.rejection_reasons.items():
            reasons[reason] = reasons.get(reason, 0) + count
    assert reasons.get("data-flow-conflict", 0) >= 1
    # the feasible branch is still emitted
    assert any("child saw false" in e.rendered
               for s in sequences for e in s.events)
    assert not any("child saw true" in e.rendered
                   for s in sequences if s.root_method == "P.run/0"
                   for e in s.events)


def test_wellformed_sequence_accepted(merged):
    reasoner = merged["reasoner"]
    for seq in merged["sequences"][:10]:
        verdict = verify_merge(seq, reasoner, seq.context.bindings and {
            k: [v] for k, v in seq.context.bindings.items()} or {})
        assert verdict.accepted


def mutate_out_of_bracket(seq: LogSequence):
    """Move one callee log step outside its call bracket."""
    ctx = seq.context
    brackets = ctx.brackets()
    for enter, leave, depth in brackets:
        inside_logs = [i for i, s in enumerate(ctx.path)
                       if s.kind == "log" and enter < i < leave and
                       s.depth > depth]
        if not inside_logs:
            continue
        mutated = copy.deepcopy(seq)
        step = mutated.context.path.pop(inside_logs[0])
        mutated.context.path.append(step)  # now after the bracket exit
        return mutated
    return None


def test_mutated_sequences_rejected(merged):
    reasoner = merged["reasoner"]
    mutated_count = 0
    for seq in merged["sequences"]:
        mutated = mutate_out_of_bracket(seq)
        if mutated is None:
            continue
        mutated_count += 1
        verdict = verify_merge(mutated, reasoner)
        assert not verdict.accepted
        assert set(verdict.reasons) & {"missing-call-link",
                                       "control-flow-conflict"}
    assert mutated_count > 0


def test_use_before_def_rejected(merged):
    reasoner = merged["reasoner"]
    seq = next(s for s in merged["sequences"] if s.context.variable_chain)
    broken = copy.deepcopy(seq)
    var, d, u = broken.context.variable_chain[0]
    broken.context.variable_chain[0] = (var, u + 1, u)
    verdict = verify_merge(broken, reasoner)
    assert not verdict.accepted
    assert "data-flow-conflict" in verdict.reasons


LOOP_THROW = """
class T {
    static void f(int n) {
        try {
            while (n > 0) {
                log.debug("iter {}", n);
                if (n == 2) {
                    throw Boom;
                }
                n = n - 1;
            }
            log.info("clean");
        } catch (Boom e) {
            log.warn("boom at {}", n);
        }
    }
}
"""


def test_exception_out_of_loop_round_trip():
    meta = {"domains": {"n": [0, 1, 2, 3]}}
    corpus, graph, subgraphs, store, sequences, _ = mini_pipeline(
        LOOP_THROW, meta)
    emitted = {tuple(e.rendered for e in s.events) for s in sequences}
    # the interpreter over the declared domain produces exactly these
    expected = set()
    for n in [0, 1, 2, 3]:
        run = interp.run_method(corpus, "T.f/1", [n])
        expected.add(tuple(e.rendered for e in run.events))
    assert expected <= emitted
    assert ("iter 3", "iter 2", "boom at 2") in emitted
    # and every emitted sequence is reproducible from its witness
    for seq in sequences:
        run = interp.run_method(corpus, "T.f/1",
                                [seq.context.bindings["n"]])
        assert [e.rendered for e in run.events] == \
            [e.rendered for e in seq.events]


# ---------------------------------------------------------------------------
# Interpreter round trip (soundness/completeness on a small slice; the
# full-corpus version runs in the acceptance suite)
# ---------------------------------------------------------------------------

def test_emitted_sequences_reproduced_by_interpreter(merged):
    for seq in merged["sequences"]:
        root = seq.root_method
        src = merged["store"].corpus.get(root)
        args = [seq.context.bindings[p.name] for p in src.method.params]
        run = interp.run_method(merged["store"].corpus, root, args,
                                seq.context.dispatch)
        got = [(e.fingerprint, e.rendered) for e in run.events]
        want = [(e.fingerprint, e.rendered) for e in seq.events]
        assert got == want, f"{root} with {seq.context.bindings}"


def test_interpreter_lists_covered_by_emission(merged):
    corpus = merged["store"].corpus
    emitted = {}
    for seq in merged["sequences"]:
        emitted.setdefault(seq.root_method, set()).add(
            tuple((e.fingerprint, e.template) for e in seq.events))
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
                key = tuple((e.fingerprint, e.template) for e in run.events)
                assert key in emitted.get(root, set()), \
                    f"{root} {args} {dispatch}: {key}"


# ---------------------------------------------------------------------------
# optimize_sequences
# ---------------------------------------------------------------------------

def test_emitted_sequences_all_accepted(merged):
    for seq in merged["raw_sequences"]:
        assert seq.verdict is not None and seq.verdict.accepted


def test_unfilled_placeholder_renders_masked():
    from logsynth.evalexpr import UNKNOWN
    from logsynth.merge import _SymbolicEvent, _render_event

    event = _SymbolicEvent(
        fingerprint="<T:m> [INFO]", template="v={} w={}",
        source_method="T.m/0", source_node=1,
        values=[UNKNOWN, 3], param_texts=["x", "y"], step_index=0)
    rendered = _render_event(event, {})
    assert rendered.rendered == "v=<*> w=3"
    assert rendered.incomplete


def test_optimize_removes_exact_duplicates(merged):
    seqs = merged["raw_sequences"]
    doubled = seqs + [copy.deepcopy(seqs[0])]
    optimized = optimize_sequences(doubled, merged["store"].per_method)
    keys = [(tuple(s.fingerprints()), s.constraint_key()) for s in optimized]
    assert len(keys) == len(set(keys))


def test_optimize_empty_input():
    assert optimize_sequences([]) == []


def test_optimize_matches_multiset_dedup_oracle(merged):
    seqs = merged["raw_sequences"]
    optimized = optimize_sequences(seqs, merged["store"].per_method)
    # oracle: dict-based dedup of (fingerprints, constraint set)
    oracle = {}
    for s in seqs:
        oracle.setdefault((tuple(s.fingerprints()), s.constraint_key()), s)
    assert len(optimized) == len(oracle)
    assert {(tuple(s.fingerprints()), s.constraint_key())
            for s in optimized} == set(oracle)


def test_optimize_drops_integrity_failures(merged):
    seqs = [copy.deepcopy(merged["sequences"][0])]
    object.__setattr__(seqs[0].events[0], "source_node", 10_000)
    assert optimize_sequences(seqs, merged["store"].per_method) == []


def test_optimize_output_deterministic(merged):
    a = optimize_sequences(list(merged["raw_sequences"]),
                           merged["store"].per_method)
    b = optimize_sequences(list(reversed(merged["raw_sequences"])),
                           merged["store"].per_method)
    assert [s.sort_key() for s in a] == [s.sort_key() for s in b]
