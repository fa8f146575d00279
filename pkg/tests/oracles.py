"""Independent brute-force oracles the module tests check against.

Each oracle deliberately uses a different strategy than the implementation
it checks: line-regex scanning instead of parsing, statement-tree walking
instead of graph construction, edge-scan fixpoints instead of reverse BFS.
"""

from __future__ import annotations

import re
from pathlib import Path

from logsynth import lang

METHOD_HEADER_RE = re.compile(
    r"^\s*(?:static\s+)?(?:void|int|string|boolean)\s+(\w+)\s*\(")
LOG_CALL_RE = re.compile(r"\blog\.(trace|debug|info|warn|error|fatal)\s*\(")


def scan_method_count(paths: list[Path]) -> int:
    count = 0
    for path in paths:
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if line.lstrip().startswith("//"):
                continue
            if METHOD_HEADER_RE.match(line):
                count += 1
    return count


def scan_log_statements(paths: list[Path]) -> list[tuple[str, str, int]]:
    """(file, level, line number) per log call found by the line scan."""
    found = []
    for path in paths:
        for lineno, line in enumerate(
                Path(path).read_text(encoding="utf-8").splitlines(), start=1):
            if line.lstrip().startswith("//"):
                continue
            match = LOG_CALL_RE.search(line)
            if match:
                found.append((str(path), match.group(1), lineno))
    return found


def tree_walk_call_pairs(corpus) -> set[tuple[str, str]]:
    """(caller, callee) pairs by walking statement trees directly; dynamic
    sites expand to their declared candidates."""
    from logsynth.corpus import call_sites

    pairs = set()
    for src in corpus.methods():
        for call in call_sites(src.method):
            if call.dynamic:
                for cand in corpus.meta.candidates(call.cls, call.name):
                    pairs.add((src.fq_name, cand))
            else:
                cls = call.cls or src.class_name
                pairs.add((src.fq_name, f"{cls}.{call.name}/{call.arity}"))
    return pairs


def reach_direct_fixpoint(n_nodes: list[int], edges: list[tuple[int, int]],
                          direct: set[int]) -> set[int]:
    """Nodes with a directed path into the direct set, by naive fixpoint
    over the raw edge list (no adjacency indices)."""
    reach = set(direct)
    changed = True
    while changed:
        changed = False
        for caller, callee in edges:
            if callee in reach and caller not in reach:
                reach.add(caller)
                changed = True
    return reach


def path_walk_constraints(cfg, node_id: int) -> list[set[tuple[str, bool]]]:
    """All decision sets along acyclic entry->node walks (loop back edges
    skipped); the dominating constraint set is their intersection."""
    from logsynth.lcfg import NodeKind

    results: list[set[tuple[str, bool]]] = []

    def walk(current: int, taken: set, visited: frozenset) -> None:
        if current == node_id:
            results.append(set(taken))
            return
        for edge in cfg.out_edges(current):
            if edge.back or edge.dst in visited:
                continue
            node = cfg.node(edge.src)
            extra = None
            if node.kind is NodeKind.BRANCH and edge.label in ("true", "false"):
                extra = (lang.format_expr(node.cond), edge.label == "true")
            if node.kind is NodeKind.LOOP_HEAD and edge.label in (
                    "loop-body", "loop-exit"):
                extra = (lang.format_expr(node.cond), edge.label == "loop-body")
            next_taken = taken | {extra} if extra else taken
            walk(edge.dst, next_taken, visited | {current})

    walk(cfg.entry, set(), frozenset())
    return results
