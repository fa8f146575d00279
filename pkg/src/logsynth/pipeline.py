"""Stage orchestration: parse -> graph -> prune -> extract -> enhance ->
merge -> label -> report, with one persisted artifact per stage.

Every stage reads its input from the previous stage's artifact on disk, so
stages are individually resumable and a full run is literally the
composition of the stage functions.  With the rule-engine backend the whole
pipeline is a pure function of (inputs, config): rerunning produces
byte-identical artifacts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import callgraph as cg
from . import corpus as corpus_mod
from . import label as label_mod
from . import merge as merge_mod
from . import metrics as metrics_mod
from .config import PipelineConfig
from .enhance import EnhancedCfg, VerificationOutcome, enhance_ternary, \
    compute_may_propagate, make_ternary
from .errors import MissingUpstreamArtifactError
from .lcfg import Subgraph, extract_subgraphs
from .paths import LoopPolicy
from .reasoner import LlmClient, LlmSettings, Reasoner, RuleEngine

SCHEMA_VERSION = 1

ARTIFACTS = {
    "corpus": "corpus.json",
    "graph": "callgraph.json",
    "graph_edges": "callgraph.edges",
    "pruned": "pruned.json",
    "pruned_edges": "pruned.edges",
    "subgraphs": "subgraphs.json",
    "enhanced": "enhanced.json",
    "enhanced_text": "enhanced.txt",
    "sequences": "sequences.jsonl",
    "dataset": "dataset.jsonl",
    "report": "report.json",
    "report_text": "report.txt",
}


def make_reasoner(config: PipelineConfig) -> Reasoner:
    if config.reasoner_backend == "llm":
        backend = LlmClient(LlmSettings(
            endpoint=config.llm_endpoint, model=config.llm_model,
            credential_env=config.credential_env,
        ))
    else:
        backend = RuleEngine()
    return Reasoner(backend=backend, cache_dir=config.cache_dir,
                    rate_per_sec=config.rate_per_sec,
                    max_concurrency=config.max_concurrency)


def _artifact(out_dir: Path, name: str) -> Path:
    return out_dir / ARTIFACTS[name]


def _require(out_dir: Path, name: str) -> Path:
    path = _artifact(out_dir, name)
    if not path.exists():
        raise MissingUpstreamArtifactError(str(path))
    return path


def _write_json(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, sort_keys=True, indent=1) + "\n",
                    encoding="utf-8")


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------

def stage_parse(config: PipelineConfig) -> dict:
    corpus = corpus_mod.parse_corpus(config.corpus_paths, config.meta_path)
    out_dir = Path(config.out_dir)
    statements = corpus_mod.list_log_statements(corpus)
    data = corpus_mod.corpus_to_dict(corpus)
    data["n_methods"] = len(corpus.source_index)
    data["n_log_statements"] = len(statements)
    _write_json(_artifact(out_dir, "corpus"), data)
    return {"methods": len(corpus.source_index),
            "log_statements": len(statements)}


def _load_corpus(out_dir: Path) -> corpus_mod.Corpus:
    data = json.loads(_require(out_dir, "corpus").read_text(encoding="utf-8"))
    return corpus_mod.corpus_from_dict(data)


def stage_graph(config: PipelineConfig) -> dict:
    out_dir = Path(config.out_dir)
    corpus = _load_corpus(out_dir)
    if config.import_graph_path:
        graph = cg.import_call_graph(config.import_graph_path)
        # overlay corpus-derived nodes so tagging has sources to inspect
        built = cg.build_call_graph(corpus)
        for node in built.nodes:
            graph.add_node(node.fq_name, has_source=node.has_source)
        existing = {(e.caller, e.callee) for e in graph.edges}
        for e in built.edges:
            caller = graph.node(built.by_id[e.caller].fq_name).id
            callee = graph.node(built.by_id[e.callee].fq_name).id
            if (caller, callee) not in existing:
                graph.add_edge(caller, callee, e.line, e.dynamic)
    else:
        graph = cg.build_call_graph(corpus)
    graph = cg.tag_log_methods(graph, corpus, config.api_patterns)
    _write_json(_artifact(out_dir, "graph"), cg.graph_to_dict(graph))
    _artifact(out_dir, "graph_edges").write_text(cg.export_edge_list(graph),
                                                 encoding="utf-8")
    tagged = len(graph.tagged_nodes())
    return {"nodes": len(graph.nodes), "edges": len(graph.edges),
            "tagged": tagged, "direct": len(graph.direct_nodes()),
            "warnings": len(graph.warnings)}


def stage_prune(config: PipelineConfig) -> dict:
    out_dir = Path(config.out_dir)
    data = json.loads(_require(out_dir, "graph").read_text(encoding="utf-8"))
    graph = cg.graph_from_dict(data)
    pruned = cg.prune(graph)
    _write_json(_artifact(out_dir, "pruned"), cg.graph_to_dict(pruned))
    _artifact(out_dir, "pruned_edges").write_text(cg.export_edge_list(pruned),
                                                  encoding="utf-8")
    retained = len(pruned.nodes) / len(graph.nodes) if graph.nodes else 0.0
    return {"nodes": len(pruned.nodes), "edges": len(pruned.edges),
            "retained": round(retained, 4)}


def stage_extract(config: PipelineConfig) -> dict:
    out_dir = Path(config.out_dir)
    data = json.loads(_require(out_dir, "pruned").read_text(encoding="utf-8"))
    pruned = cg.graph_from_dict(data)
    subgraphs = extract_subgraphs(pruned, config.entry_threshold,
                                  config.depth_threshold)
    payload = [
        {"root": s.root, "root_fq": pruned.by_id[s.root].fq_name,
         "members": sorted(s.members), "depth": s.depth}
        for s in subgraphs
    ]
    _write_json(_artifact(out_dir, "subgraphs"), payload)
    return {"subgraphs": len(subgraphs)}


@dataclass
class EnhancedStore:
    """In-memory view of the enhance artifact used by merge/report."""

    corpus: corpus_mod.Corpus
    graph: cg.CallGraph
    subgraphs: list[Subgraph]
    per_method: dict[str, EnhancedCfg] = field(default_factory=dict)
    quarantined: list[str] = field(default_factory=list)


def enhance_corpus(corpus, graph, subgraphs, reasoner,
                   loop_k: int = 2, path_budget: int = 10_000) -> EnhancedStore:
    """Enhance every source method: subgraph members with their call-chain
    context first, then the remaining corpus methods (log-free helpers are
    still needed as callee frames during merging)."""
    store = EnhancedStore(corpus=corpus, graph=graph, subgraphs=subgraphs)
    may_propagate = compute_may_propagate(corpus)
    policy = LoopPolicy(k=loop_k)

    def enhance_one(ternary) -> None:
        fq = ternary.source.fq_name
        cfg = enhance_ternary(ternary, corpus, reasoner, policy,
                              path_budget, may_propagate)
        if cfg.consistency is VerificationOutcome.QUARANTINED:
            store.quarantined.append(fq)
        else:
            store.per_method[fq] = cfg

    for subgraph in subgraphs:
        for member in sorted(subgraph.members):
            node = graph.by_id.get(member)
            if node is None or not node.has_source:
                continue
            if node.fq_name in store.per_method or \
               node.fq_name in store.quarantined:
                continue
            enhance_one(make_ternary(subgraph, graph, corpus, member))
    for fq in sorted(corpus.source_index):
        if fq in store.per_method or fq in store.quarantined:
            continue
        node = graph.node(fq)
        if node is None:
            continue
        trivial = Subgraph(root=node.id, members=frozenset({node.id}), depth=0)
        enhance_one(make_ternary(trivial, graph, corpus, node.id))
    return store


def _build_enhanced(config: PipelineConfig, reasoner: Reasoner) -> EnhancedStore:
    out_dir = Path(config.out_dir)
    corpus = _load_corpus(out_dir)
    graph = cg.graph_from_dict(
        json.loads(_require(out_dir, "graph").read_text(encoding="utf-8")))
    sub_data = json.loads(
        _require(out_dir, "subgraphs").read_text(encoding="utf-8"))
    subgraphs = [Subgraph(root=s["root"], members=frozenset(s["members"]),
                          depth=s["depth"]) for s in sub_data]
    return enhance_corpus(corpus, graph, subgraphs, reasoner,
                          config.loop_k, config.path_budget)


def stage_enhance(config: PipelineConfig,
                  reasoner: Optional[Reasoner] = None) -> dict:
    out_dir = Path(config.out_dir)
    reasoner = reasoner or make_reasoner(config)
    store = _build_enhanced(config, reasoner)
    payload = {
        "methods": {},
        "quarantined": sorted(store.quarantined),
    }
    texts = []
    for fq in sorted(store.per_method):
        cfg = store.per_method[fq]
        payload["methods"][fq] = {
            "kept_paths": len(cfg.path_constraints),
            "inserted_calls": [list(map(str, (n,))) + [info.get("callee", "")]
                               for n, info in cfg.inserted_calls],
            "exception_branches": [[n, et, kind, target] for n, et, kind, target
                                   in cfg.exception_branches],
            "log_var_links": [[n, v, d] for n, v, d in cfg.log_var_links],
            "consistency": cfg.consistency.value,
        }
        texts.append(cfg.to_text())
    _write_json(_artifact(out_dir, "enhanced"), payload)
    _artifact(out_dir, "enhanced_text").write_text("\n".join(texts),
                                                   encoding="utf-8")
    return {"enhanced": len(store.per_method),
            "quarantined": len(store.quarantined)}


def stage_merge(config: PipelineConfig,
                reasoner: Optional[Reasoner] = None) -> dict:
    out_dir = Path(config.out_dir)
    _require(out_dir, "enhanced")
    reasoner = reasoner or make_reasoner(config)
    store = _build_enhanced(config, reasoner)

    all_sequences: list[merge_mod.LogSequence] = []
    stats_total = merge_mod.MergeStats()
    debug_dir = out_dir / "merge_debug"
    debug_dir.mkdir(parents=True, exist_ok=True)
    for subgraph in store.subgraphs:
        sequences, stats = merge_mod.merge_bottom_up(
            subgraph, store.graph, store.per_method, store.corpus, reasoner,
            config.recursion_reentry_cap, config.path_budget)
        root_fq = store.graph.by_id[subgraph.root].fq_name
        dump_name = root_fq.replace("/", "_") + ".jsonl"
        (debug_dir / dump_name).write_text(
            "".join(json.dumps(_sequence_to_dict(s, i, config), sort_keys=True,
                               separators=(",", ":")) + "\n"
                    for i, s in enumerate(sequences)),
            encoding="utf-8")
        all_sequences.extend(sequences)
        stats_total.candidates += stats.candidates
        stats_total.accepted += stats.accepted
        stats_total.rejected_structural += stats.rejected_structural
        stats_total.rejected_infeasible += stats.rejected_infeasible
        stats_total.empty_projection += stats.empty_projection
        stats_total.truncated = stats_total.truncated or stats.truncated
        stats_total.errors.extend(stats.errors)
        for reason, count in stats.rejection_reasons.items():
            stats_total.rejection_reasons[reason] = \
                stats_total.rejection_reasons.get(reason, 0) + count

    optimized = merge_mod.optimize_sequences(all_sequences, store.per_method)
    lines = []
    for idx, seq in enumerate(optimized):
        lines.append(json.dumps(_sequence_to_dict(seq, idx, config),
                                sort_keys=True, separators=(",", ":")))
    path = _artifact(out_dir, "sequences")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    merge_meta = {
        "stats": {
            "candidates": stats_total.candidates,
            "accepted": stats_total.accepted,
            "rejected_structural": stats_total.rejected_structural,
            "rejected_infeasible": stats_total.rejected_infeasible,
            "empty_projection": stats_total.empty_projection,
            "rejection_reasons": dict(sorted(
                stats_total.rejection_reasons.items())),
            "truncated": stats_total.truncated,
            "errors": stats_total.errors,
        },
    }
    _write_json(out_dir / "merge_stats.json", merge_meta)
    return {"sequences": len(optimized), **merge_meta["stats"]}


def _sequence_to_dict(seq: merge_mod.LogSequence, idx: int,
                      config: PipelineConfig) -> dict:
    ctx = seq.context
    return {
        "schema_version": SCHEMA_VERSION,
        "id": f"seq-{idx:06d}",
        "fingerprints": seq.fingerprints(),
        "messages": [e.rendered for e in seq.events],
        "events": [
            {"fingerprint": e.fingerprint, "template": e.template,
             "rendered": e.rendered, "owner": e.source_method,
             "log_node": e.source_node, "incomplete": e.incomplete,
             "bindings": [[k, v] for k, v in e.bindings]}
            for e in seq.events
        ],
        "execution_context": {
            "path": [
                {"method": s.method, "node": s.node, "depth": s.depth,
                 "kind": s.kind, "decision": s.decision, "atom": s.atom,
                 "truth": s.truth}
                for s in ctx.path
            ],
            "variable_chain": [[v, d, u] for v, d, u in ctx.variable_chain],
            "atoms": [[a, req, cross] for a, req, cross in ctx.atoms],
            "condition_values": ctx.bindings,
            "dispatch": ctx.dispatch,
        },
        "provenance": {
            "subgraph": seq.origin_subgraph,
            "root_method": seq.root_method,
            "root_path": seq.root_path_id,
            "backend": seq.verdict.backend if seq.verdict else "",
            "config_hash": config.config_hash(),
        },
    }


def stage_label(config: PipelineConfig) -> dict:
    out_dir = Path(config.out_dir)
    seq_path = _require(out_dir, "sequences")
    rules = (label_mod.RuleSet.from_file(config.rules_path)
             if config.rules_path else label_mod.RuleSet())
    records_out = []
    n_anomalous = 0
    for line in seq_path.read_text(encoding="utf-8").splitlines():
        record = json.loads(line)
        label, evidence = _label_record(record, rules)
        record["anomaly_label"] = label
        record["evidence"] = evidence
        if label == "Anomalous":
            n_anomalous += 1
        records_out.append(json.dumps(record, sort_keys=True,
                                      separators=(",", ":")))
    dataset = _artifact(out_dir, "dataset")
    dataset.write_text("".join(line + "\n" for line in records_out),
                       encoding="utf-8")
    sampled = 0
    if records_out:
        sample = label_mod.sample_for_review(records_out, config.review_rate,
                                             config.seed)
        (out_dir / "review_sample.jsonl").write_text(
            "".join(line + "\n" for line in sample), encoding="utf-8")
        sampled = len(sample)
    return {"records": len(records_out), "anomalous": n_anomalous,
            "normal": len(records_out) - n_anomalous,
            "review_sample": sampled}


def _label_record(record: dict, rules: label_mod.RuleSet) -> tuple[str, list]:
    """Apply the rule set to one on-disk record (same logic as
    label_sequence, over the serialized event shape)."""
    from .lang import LogLevel

    evidence = []
    events = record["events"]
    level_rule = f"explicit.level>={rules.min_level.name}"
    for idx, event in enumerate(events):
        level_name = event["fingerprint"].rsplit("[", 1)[1].rstrip("]")
        level = LogLevel[level_name]
        if level.severity >= rules.min_level.severity:
            evidence.append({"rule": level_rule, "event_index": idx,
                             "matched": f"[{level.name}]"})
        for keyword in rules.explicit_keywords:
            if keyword in event["rendered"]:
                evidence.append({"rule": f"explicit.keyword:{keyword}",
                                 "event_index": idx, "matched": keyword})
    for idx, event in enumerate(events):
        for match in rules._code_re.finditer(event["rendered"]):
            try:
                code = int(match.group(1))
            except (IndexError, ValueError):
                continue
            if code >= rules.error_code_min:
                evidence.append({"rule": "implicit.error-code",
                                 "event_index": idx, "matched": match.group(0)})
        lowered = event["rendered"].lower()
        for keyword in rules.failure_keywords:
            pos = lowered.find(keyword.lower())
            if pos >= 0:
                evidence.append({
                    "rule": f"implicit.keyword:{keyword}", "event_index": idx,
                    "matched": event["rendered"][pos:pos + len(keyword)]})
    label = "Anomalous" if evidence else "Normal"
    return label, evidence


def stage_report(config: PipelineConfig) -> dict:
    out_dir = Path(config.out_dir)
    corpus = _load_corpus(out_dir)
    dataset_path = _require(out_dir, "dataset")
    records = [json.loads(line) for line in
               dataset_path.read_text(encoding="utf-8").splitlines()]
    dataset_events = [(e["owner"], e["template"])
                      for r in records for e in r["events"]]
    if corpus_mod.list_log_statements(corpus):
        report = metrics_mod.coverage(dataset_events, corpus)
    else:
        report = metrics_mod.CoverageReport(0, 0, 0.0)

    r_cov = None
    inc = None
    if config.reference_templates_path:
        reference = [
            line for line in Path(config.reference_templates_path)
            .read_text(encoding="utf-8").splitlines() if line.strip()
        ]
        generated_templates = [t for _, t in dataset_events]
        r_cov = metrics_mod.r_coverage(generated_templates, reference)
        inc = metrics_mod.increment(report.n_generated_events, len(reference))
        report.r_coverage = r_cov
        report.increment = inc

    agreement = None
    if config.annotations_path:
        matrix, _, annotators = label_mod.load_annotation_matrix(
            config.annotations_path)
        result = label_mod.krippendorff_alpha(matrix)
        agreement = {
            "alpha": result.alpha,
            "n_items": result.n_items,
            "n_annotators": result.n_annotators,
            "disagreement_items": result.disagreement_items,
            "degenerate": result.degenerate,
            "meets_bar": result.alpha >= 0.8,
        }

    n_anomalous = sum(1 for r in records if r["anomaly_label"] == "Anomalous")
    payload = {
        "n_records": len(records),
        "n_anomalous": n_anomalous,
        "n_normal": len(records) - n_anomalous,
        "n_generated_events": report.n_generated_events,
        "n_total_events": report.n_total_events,
        "coverage": report.coverage,
        "coverage_percent": report.coverage_percent(),
        "missing_events": [
            {"owner": s.owner, "template": s.template, "line": s.position}
            for s in report.missing_events
        ],
        "r_coverage": r_cov,
        "increment": inc,
        "agreement": agreement,
    }
    _write_json(_artifact(out_dir, "report"), payload)
    text_lines = [
        "dataset report",
        f"  records:            {payload['n_records']}"
        f" ({n_anomalous} anomalous)",
        f"  event coverage:     {payload['coverage_percent']}"
        f" ({report.n_generated_events}/{report.n_total_events})",
    ]
    if r_cov is not None:
        text_lines.append(f"  r-coverage:         {r_cov * 100:.2f}%")
        text_lines.append(f"  increment:          {inc}")
    if agreement is not None:
        flag = "" if agreement["meets_bar"] else "  ** below 0.8 bar **"
        text_lines.append(
            f"  annotator alpha:    {agreement['alpha']:.4f} over "
            f"{agreement['n_items']} items{flag}")
    for stmt in report.missing_events:
        text_lines.append(f"  missing: {stmt.owner} line {stmt.position}"
                          f" {stmt.template!r}")
    _artifact(out_dir, "report_text").write_text(
        "\n".join(text_lines) + "\n", encoding="utf-8")
    return payload


STAGES = ["parse", "graph", "prune", "extract", "enhance", "merge", "label",
          "report"]


def run(config: PipelineConfig) -> dict:
    """Run all stages in order; each stage persists its artifact and the
    next stage reads it back, so `run` equals the subcommand composition."""
    config.validate()
    Path(config.out_dir).mkdir(parents=True, exist_ok=True)
    reasoner = make_reasoner(config)
    summary = {}
    summary["parse"] = stage_parse(config)
    summary["graph"] = stage_graph(config)
    summary["prune"] = stage_prune(config)
    summary["extract"] = stage_extract(config)
    summary["enhance"] = stage_enhance(config, reasoner)
    summary["merge"] = stage_merge(config, reasoner)
    summary["label"] = stage_label(config)
    summary["report"] = stage_report(config)
    return summary
