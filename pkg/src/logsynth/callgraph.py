"""Global caller/callee graph: construction, log-method tagging, pruning.

The graph is the substrate of the whole pipeline.  Methods that directly
invoke a logging API are tagged Direct; anything with a call path into a
Direct method is tagged Indirect via multi-source reverse breadth-first
traversal (forward enumeration over the full graph is deliberately avoided:
it explodes on large systems).  Pruning then keeps exactly the tagged nodes.

Graphs can also be imported from an external generator as a CSV edge list
(one ``caller,callee`` pair per line) and exported as a sorted edge list for
diffing.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

from .corpus import Corpus, call_sites, log_calls
from .errors import FormatError

DEFAULT_API_PATTERNS = [r"^log\.(trace|debug|info|warn|error|fatal)$"]


class LogTag(Enum):
    NONE = "none"
    DIRECT = "direct"
    INDIRECT = "indirect"


@dataclass
class MethodNode:
    id: int
    fq_name: str
    log_tag: LogTag = LogTag.NONE
    has_source: bool = True


@dataclass(frozen=True)
class CallEdge:
    caller: int
    callee: int
    line: int
    dynamic: bool = False


@dataclass
class CallGraph:
    nodes: list[MethodNode] = field(default_factory=list)
    edges: list[CallEdge] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._by_name = {n.fq_name: n for n in self.nodes}
        self.by_id = {n.id: n for n in self.nodes}
        self.reindex()

    def reindex(self) -> None:
        self.forward: dict[int, list[CallEdge]] = {n.id: [] for n in self.nodes}
        self.reverse: dict[int, list[CallEdge]] = {n.id: [] for n in self.nodes}
        for e in self.edges:
            self.forward[e.caller].append(e)
            self.reverse[e.callee].append(e)

    def node(self, fq: str) -> Optional[MethodNode]:
        return self._by_name.get(fq)

    def add_node(self, fq: str, has_source: bool = True) -> MethodNode:
        existing = self._by_name.get(fq)
        if existing is not None:
            return existing
        next_id = max(self.by_id, default=-1) + 1
        node = MethodNode(id=next_id, fq_name=fq, has_source=has_source)
        self.nodes.append(node)
        self._by_name[fq] = node
        self.by_id[node.id] = node
        self.forward[node.id] = []
        self.reverse[node.id] = []
        return node

    def add_edge(self, caller: int, callee: int, line: int,
                 dynamic: bool = False) -> None:
        edge = CallEdge(caller, callee, line, dynamic)
        self.edges.append(edge)
        self.forward[caller].append(edge)
        self.reverse[callee].append(edge)

    def in_degree(self, node_id: int) -> int:
        return len(self.reverse[node_id])

    def callees(self, node_id: int) -> list[int]:
        return [e.callee for e in self.forward[node_id]]

    def direct_nodes(self) -> list[MethodNode]:
        return [n for n in self.nodes if n.log_tag is LogTag.DIRECT]

    def tagged_nodes(self) -> list[MethodNode]:
        return [n for n in self.nodes if n.log_tag is not LogTag.NONE]


def build_call_graph(corpus: Corpus) -> CallGraph:
    """One node per corpus method, one edge per syntactic call site.

    ``calldyn`` sites contribute one dynamic edge per candidate declared in
    the corpus metadata.  Calls to methods absent from the corpus become
    boundary nodes (has_source=False); undeclared ones are additionally
    recorded as warnings, never fatal.
    """
    graph = CallGraph()
    for src in corpus.methods():
        graph.add_node(src.fq_name, has_source=True)
    declared_external = set(corpus.meta.external)
    for src in corpus.methods():
        caller = graph.node(src.fq_name)
        assert caller is not None
        for call in call_sites(src.method):
            if call.dynamic:
                candidates = corpus.meta.candidates(call.cls, call.name)
                if not candidates:
                    graph.warnings.append(
                        f"{src.fq_name}:{call.line}: no candidates declared for "
                        f"calldyn {call.cls}.{call.name}"
                    )
                for cand in candidates:
                    target = graph.node(cand) or graph.add_node(
                        cand, has_source=cand in corpus.source_index)
                    graph.add_edge(caller.id, target.id, call.line, dynamic=True)
                continue
            fq = corpus.resolve_call(src.class_name, call)
            if fq is None:
                fq = f"{call.cls or src.class_name}.{call.name}/{call.arity}"
                target = graph.node(fq) or graph.add_node(fq, has_source=False)
                if fq not in declared_external:
                    graph.warnings.append(
                        f"{src.fq_name}:{call.line}: unresolved callee {fq}"
                    )
            else:
                target = graph.node(fq)
                assert target is not None
            graph.add_edge(caller.id, target.id, call.line, dynamic=False)
    return graph


def import_call_graph(path) -> CallGraph:
    """Read a CSV edge list (``caller,callee`` per line) into a graph.

    Imported names have no corpus source; nodes are synthesized with
    has_source=False.  Blank lines are ignored.
    """
    graph = CallGraph()
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(),
                                 start=1):
        line = raw.strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2 or not all(parts):
            raise FormatError(f"expected 'caller,callee', got {raw!r}", lineno)
        caller = graph.add_node(parts[0], has_source=False)
        callee = graph.add_node(parts[1], has_source=False)
        graph.add_edge(caller.id, callee.id, line=lineno)
    return graph


def tag_log_methods(graph: CallGraph, corpus: Corpus,
                    api_patterns: Optional[list[str]] = None) -> CallGraph:
    """Tag Direct log methods by API-pattern match, then mark Indirect ones
    by reverse BFS from all Direct nodes.  Idempotent; cycles terminate via
    the visited set."""
    patterns = [re.compile(p) for p in (api_patterns or DEFAULT_API_PATTERNS)]
    for node in graph.nodes:
        node.log_tag = LogTag.NONE
        src = corpus.get(node.fq_name)
        if src is None:
            continue
        for call in log_calls(src.method):
            api = f"log.{call.level.value}"
            if any(p.search(api) for p in patterns):
                node.log_tag = LogTag.DIRECT
                break
    queue = deque(n.id for n in graph.nodes if n.log_tag is LogTag.DIRECT)
    visited = set(queue)
    while queue:
        current = queue.popleft()
        for edge in graph.reverse[current]:
            if edge.caller not in visited:
                visited.add(edge.caller)
                if graph.by_id[edge.caller].log_tag is LogTag.NONE:
                    graph.by_id[edge.caller].log_tag = LogTag.INDIRECT
                queue.append(edge.caller)
    return graph


def prune(graph: CallGraph) -> CallGraph:
    """Keep exactly the Direct/Indirect nodes and the edges between them.

    Node ids are preserved so pruned graphs stay cross-referenceable with
    the original."""
    keep = {n.id for n in graph.tagged_nodes()}
    nodes = [MethodNode(n.id, n.fq_name, n.log_tag, n.has_source)
             for n in graph.nodes if n.id in keep]
    edges = [e for e in graph.edges if e.caller in keep and e.callee in keep]
    pruned = CallGraph(nodes=nodes, edges=edges, warnings=list(graph.warnings))
    return pruned


def export_edge_list(graph: CallGraph) -> str:
    """Deterministic sorted ``caller,callee`` edge list for diffing."""
    lines = sorted({
        f"{graph.by_id[e.caller].fq_name},{graph.by_id[e.callee].fq_name}"
        for e in graph.edges
    })
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# Artifact serialization
# ---------------------------------------------------------------------------

def graph_to_dict(graph: CallGraph) -> dict:
    return {
        "nodes": [
            {"id": n.id, "fq_name": n.fq_name, "log_tag": n.log_tag.value,
             "has_source": n.has_source}
            for n in graph.nodes
        ],
        "edges": [
            {"caller": e.caller, "callee": e.callee, "line": e.line,
             "dynamic": e.dynamic}
            for e in graph.edges
        ],
        "warnings": graph.warnings,
    }


def graph_from_dict(data: dict) -> CallGraph:
    nodes = [MethodNode(n["id"], n["fq_name"], LogTag(n["log_tag"]),
                        n["has_source"])
             for n in data["nodes"]]
    edges = [CallEdge(e["caller"], e["callee"], e["line"], e["dynamic"])
             for e in data["edges"]]
    return CallGraph(nodes=nodes, edges=edges, warnings=list(data.get("warnings", [])))
