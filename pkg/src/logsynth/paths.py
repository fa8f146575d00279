"""Entry-to-exit path enumeration under a bounded loop policy.

Loop bodies are expanded 0, 1, or K times (K configurable); each iteration
of a body may take a different internal route, which is what keeps the
enumeration complete for data-dependent branches inside loops.  The walker
keeps a stack of active loop plans aligned with each node's statically
recorded enclosing loops, so routes that leave a loop early (exceptions,
returns) discard stale iteration state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import lang
from .lcfg import Lcfg, LcfgEdge, NodeKind


@dataclass(frozen=True)
class PathStep:
    node: int
    label: Optional[str]          # out-edge label taken; None at the exit
    etype: Optional[str] = None   # exception in flight when label=exception


@dataclass
class MethodPath:
    owner: str
    steps: tuple[PathStep, ...]
    termination: Optional[str]    # None = normal return, else exception type

    def log_nodes(self, cfg: Lcfg) -> list[int]:
        return [s.node for s in self.steps
                if cfg.node(s.node).kind is NodeKind.LOG]

    def decisions(self, cfg: Lcfg) -> list[tuple[int, bool]]:
        out = []
        for s in self.steps:
            kind = cfg.node(s.node).kind
            if kind is NodeKind.BRANCH and s.label in ("true", "false"):
                out.append((s.node, s.label == "true"))
            elif kind is NodeKind.LOOP_HEAD and s.label in ("loop-body",
                                                            "loop-exit"):
                out.append((s.node, s.label == "loop-body"))
        return out

    def atoms(self, cfg: Lcfg) -> list[tuple[str, bool]]:
        return [(lang.format_expr(cfg.node(n).cond), d)
                for n, d in self.decisions(cfg)]

    def fingerprint_key(self, cfg: Lcfg) -> tuple:
        return tuple((s.node, s.label) for s in self.steps)


@dataclass
class PathEnumeration:
    paths: list[MethodPath] = field(default_factory=list)
    truncated: bool = False


@dataclass(frozen=True)
class LoopPolicy:
    """Iteration counts tried per loop head: 0, 1, and K."""

    k: int = 2

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(sorted({0, 1, max(0, self.k)}))


def enumerate_paths(cfg: Lcfg, policy: LoopPolicy = LoopPolicy(),
                    max_paths: int = 10_000) -> PathEnumeration:
    """All entry-to-exit walks of the graph under the loop policy.

    Stops (with ``truncated=True``) once ``max_paths`` distinct paths were
    produced; partial results are kept.
    """
    result = PathEnumeration()
    seen: set[tuple] = set()
    edges_out: dict[int, list[LcfgEdge]] = {}
    for e in cfg.edges:
        edges_out.setdefault(e.src, []).append(e)
    for lst in edges_out.values():
        lst.sort(key=lambda e: (e.label, e.dst))

    def finish(steps: list[PathStep], exit_node: int) -> None:
        path = MethodPath(
            owner=cfg.owner,
            steps=tuple(steps) + (PathStep(exit_node, None),),
            termination=cfg.node(exit_node).etype,
        )
        key = path.fingerprint_key(cfg)
        if key not in seen:
            seen.add(key)
            result.paths.append(path)

    # loop_stack entries: [loop head id, planned iterations, body entries so far]
    def walk(node_id: int, loop_stack: list[list[int]],
             steps: list[PathStep]) -> None:
        if result.truncated or len(result.paths) >= max_paths:
            result.truncated = result.truncated or len(result.paths) >= max_paths
            return
        node = cfg.node(node_id)

        enclosing = list(node.enclosing_loops)
        keep_self = (node.kind is NodeKind.LOOP_HEAD and loop_stack
                     and loop_stack[-1][0] == node_id)
        want = enclosing + ([node_id] if keep_self else [])
        while loop_stack and [f[0] for f in loop_stack] != want[:len(loop_stack)]:
            loop_stack = loop_stack[:-1]

        out = edges_out.get(node_id, [])

        if node.kind is NodeKind.EXIT:
            finish(steps, node_id)
            return

        if node.kind is NodeKind.LOOP_HEAD:
            body = next(e for e in out if e.label == "loop-body")
            exit_edge = next(e for e in out if e.label == "loop-exit")
            if keep_self:
                frame = loop_stack[-1]
                if frame[2] < frame[1]:
                    frame = [frame[0], frame[1], frame[2] + 1]
                    walk(body.dst, loop_stack[:-1] + [frame],
                         steps + [PathStep(node_id, "loop-body")])
                else:
                    walk(exit_edge.dst, loop_stack[:-1],
                         steps + [PathStep(node_id, "loop-exit")])
                return
            for count in LoopPolicy(k=policy.k).counts:
                if count == 0:
                    walk(exit_edge.dst, list(loop_stack),
                         steps + [PathStep(node_id, "loop-exit")])
                else:
                    walk(body.dst, loop_stack + [[node_id, count, 1]],
                         steps + [PathStep(node_id, "loop-body")])
            return

        if node.kind is NodeKind.BRANCH:
            for e in out:
                walk(e.dst, list(loop_stack), steps + [PathStep(node_id, e.label)])
            return

        # call nodes may carry exception edges besides their seq edge
        for e in out:
            walk(e.dst, list(loop_stack),
                 steps + [PathStep(node_id, e.label, e.etype)])
        if not out:
            # degenerate: dangling node treated as normal completion
            finish(steps, node_id)

    walk(cfg.entry, [], [])
    result.paths.sort(key=lambda p: p.fingerprint_key(cfg))
    return result
