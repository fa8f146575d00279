"""Log-oriented control flow graphs and dual-threshold subgraph extraction.

Each method gets a per-method CFG whose nodes distinguish the things the
log-sequence synthesis cares about: branches, loop heads, call sites, log
output points, throws, and catch entries.  Edge labels carry the control
decision (``true``/``false``/``loop-body``/``loop-exit``) or the transfer
kind (``seq``/``exception``/``finally``).

try/catch/finally is compiled the classic way: finally blocks are inlined
once per continuation route (normal completion, each exception route, each
early return), so that every entry-to-exit path remains a plain walk of the
graph.  Explicit ``throw`` statements are wired to their handler (or to a
typed propagate-exit) at build time; exception edges for call sites are
added later by the enhancement stage, which is corpus-aware.

Subgraph extraction bounds the later analysis: roots are near-entry methods
(in-degree at most the entry threshold) and members are the depth-bounded
forward closure, re-rooted downward until every subgraph owns at least one
direct log method.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from . import lang
from .callgraph import CallGraph, LogTag
from .corpus import MethodSource
from .errors import NoSubgraphsError


class NodeKind(Enum):
    ENTRY = "entry"
    EXIT = "exit"
    STATEMENT = "statement"
    BRANCH = "branch"
    LOOP_HEAD = "loop-head"
    CALL = "call"
    LOG = "log"
    THROW = "throw"
    CATCH_ENTRY = "catch-entry"


EDGE_LABELS = ("seq", "true", "false", "loop-body", "loop-exit", "exception",
               "finally")


@dataclass
class LcfgNode:
    id: int
    kind: NodeKind
    line: int = 0
    # kind-specific payloads
    stmt: Optional[lang.Assign] = None            # STATEMENT (None = anchor)
    cond: Optional[lang.Expr] = None              # BRANCH / LOOP_HEAD
    call: Optional[lang.Call] = None              # CALL
    assign_target: Optional[str] = None           # CALL used as `x = f(...)`
    resolved: bool = True                         # CALL: statically resolved
    candidates: tuple[str, ...] = ()              # CALL: dynamic candidates
    log: Optional[lang.LogCall] = None            # LOG
    etype: Optional[str] = None                   # THROW / CATCH_ENTRY / EXIT
    catch_var: Optional[str] = None               # CATCH_ENTRY
    return_value: Optional[lang.Expr] = None      # STATEMENT acting as return
    is_return: bool = False
    enclosing_loops: tuple[int, ...] = ()
    scope_path: tuple[int, ...] = ()              # indices into Lcfg.scopes
    constraints: tuple[tuple[str, bool], ...] = ()
    unresolved: bool = False

    def describe(self) -> str:
        if self.kind is NodeKind.BRANCH or self.kind is NodeKind.LOOP_HEAD:
            return lang.format_expr(self.cond)
        if self.kind is NodeKind.CALL:
            return lang.format_call(self.call)
        if self.kind is NodeKind.LOG:
            return f"log.{self.log.level.value}({self.log.template!r})"
        if self.kind is NodeKind.THROW:
            return f"throw {self.etype}"
        if self.kind is NodeKind.CATCH_ENTRY:
            return f"catch {self.etype}"
        if self.kind is NodeKind.EXIT:
            return f"exit[{self.etype}]" if self.etype else "exit"
        if self.kind is NodeKind.STATEMENT:
            if self.is_return:
                return "return"
            if self.stmt is None:
                return "pass"
            return f"{self.stmt.target} = ..."
        return self.kind.value


@dataclass(frozen=True)
class LcfgEdge:
    src: int
    dst: int
    label: str
    back: bool = False
    etype: Optional[str] = None  # set on exception edges


@dataclass
class TryScope:
    """Handler context captured at build time, reused by the enhancement
    stage to route call-site exceptions exactly like built-in throws."""

    catches: tuple[tuple[str, int], ...]   # (exception type, CatchEntry id)
    finally_body: Optional[lang.Block]
    loops_at_try: tuple[int, ...]
    outer_scope_path: tuple[int, ...]


@dataclass
class Lcfg:
    owner: str
    nodes: list[LcfgNode] = field(default_factory=list)
    edges: list[LcfgEdge] = field(default_factory=list)
    entry: int = 0
    exits: set[int] = field(default_factory=set)
    scopes: list[TryScope] = field(default_factory=list)

    def node(self, node_id: int) -> LcfgNode:
        return self.nodes[node_id]

    def out_edges(self, node_id: int) -> list[LcfgEdge]:
        return [e for e in self.edges if e.src == node_id]

    def in_edges(self, node_id: int) -> list[LcfgEdge]:
        return [e for e in self.edges if e.dst == node_id]

    def successors(self, node_id: int) -> list[int]:
        return [e.dst for e in self.out_edges(node_id)]

    def log_nodes(self) -> list[LcfgNode]:
        return [n for n in self.nodes if n.kind is NodeKind.LOG]

    def call_nodes(self) -> list[LcfgNode]:
        return [n for n in self.nodes if n.kind is NodeKind.CALL]

    def reachable_from_entry(self) -> set[int]:
        seen = {self.entry}
        queue = deque([self.entry])
        adj: dict[int, list[int]] = {}
        for e in self.edges:
            adj.setdefault(e.src, []).append(e.dst)
        while queue:
            cur = queue.popleft()
            for nxt in adj.get(cur, []):
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        return seen

    def to_text(self) -> str:
        lines = [f"lcfg {self.owner}"]
        for n in self.nodes:
            flags = []
            if n.id == self.entry:
                flags.append("entry")
            if n.id in self.exits:
                flags.append("exit")
            if n.unresolved:
                flags.append("unresolved")
            suffix = f" ({','.join(flags)})" if flags else ""
            lines.append(f"  node {n.id} {n.kind.value} {n.describe()}{suffix}")
        for e in sorted(self.edges, key=lambda e: (e.src, e.label, e.dst)):
            lines.append(f"  edge {e.src} -{e.label}-> {e.dst}")
        return "\n".join(lines) + "\n"

    def to_dot(self) -> str:
        lines = [f'digraph "{self.owner}" {{']
        for n in self.nodes:
            label = f"{n.id}: {n.kind.value}\\n{n.describe()}"
            shape = {
                NodeKind.BRANCH: "diamond",
                NodeKind.LOOP_HEAD: "diamond",
                NodeKind.LOG: "note",
            }.get(n.kind, "box")
            lines.append(f'  n{n.id} [label="{label}", shape={shape}];')
        for e in sorted(self.edges, key=lambda e: (e.src, e.label, e.dst)):
            lines.append(f'  n{e.src} -> n{e.dst} [label="{e.label}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------

Frontier = list[tuple[int, str]]  # dangling (node id, edge label) pairs


class _Builder:
    def __init__(self, source: MethodSource, cfg: Optional[Lcfg] = None):
        self.source = source
        self.cfg = cfg if cfg is not None else Lcfg(owner=source.fq_name)
        self.loops: tuple[int, ...] = ()
        self.scope_path: tuple[int, ...] = ()
        self._normal_exit: Optional[int] = None
        self._propagate_exits: dict[str, int] = {}
        for node in self.cfg.nodes:
            if node.kind is NodeKind.EXIT:
                if node.etype is None:
                    self._normal_exit = node.id
                else:
                    self._propagate_exits[node.etype] = node.id

    # -- node/edge plumbing --------------------------------------------------

    def new_node(self, kind: NodeKind, **attrs) -> LcfgNode:
        node = LcfgNode(id=len(self.cfg.nodes), kind=kind,
                        enclosing_loops=self.loops,
                        scope_path=self.scope_path, **attrs)
        self.cfg.nodes.append(node)
        return node

    def connect(self, frontier: Frontier, target: int, back: bool = False,
                etype: Optional[str] = None) -> None:
        for src, label in frontier:
            self.cfg.edges.append(LcfgEdge(src, target, label, back, etype))

    def normal_exit(self) -> int:
        if self._normal_exit is None:
            node = self.new_node(NodeKind.EXIT)
            self._normal_exit = node.id
            self.cfg.exits.add(node.id)
        return self._normal_exit

    def propagate_exit(self, etype: str) -> int:
        if etype not in self._propagate_exits:
            node = self.new_node(NodeKind.EXIT, etype=etype)
            self._propagate_exits[etype] = node.id
            self.cfg.exits.add(node.id)
        return self._propagate_exits[etype]

    # -- exception / return routing ------------------------------------------

    def route_exception(self, from_node: int, etype: str) -> None:
        """Wire an exception edge to the matching handler, executing every
        intervening finally block on the way (Java handler resolution)."""
        pending: list[int] = []
        target: Optional[int] = None
        for scope_idx in reversed(self.scope_path):
            scope = self.cfg.scopes[scope_idx]
            hit = next((cid for et, cid in scope.catches if et == etype), None)
            if hit is not None:
                target = hit
                break
            if scope.finally_body is not None:
                pending.append(scope_idx)
        if target is None:
            target = self.propagate_exit(etype)
        self._chain(from_node, "exception", pending, target, etype)

    def route_return(self, from_node: int) -> None:
        pending = [idx for idx in reversed(self.scope_path)
                   if self.cfg.scopes[idx].finally_body is not None]
        self._chain(from_node, "seq", pending, self.normal_exit(), None)

    def _chain(self, from_node: int, first_label: str,
               finally_scopes: list[int], target: int,
               etype: Optional[str]) -> None:
        frontier: Frontier = [(from_node, first_label)]
        first_etype = etype
        for scope_idx in finally_scopes:
            entry, exit_frontier = self.build_finally_copy(scope_idx)
            self.connect(frontier, entry, etype=first_etype)
            first_etype = None
            frontier = exit_frontier
        self.connect(frontier, target, etype=first_etype)

    def build_finally_copy(self, scope_idx: int) -> tuple[int, Frontier]:
        """Inline one copy of a scope's finally block, built in the context
        that surrounds the owning try statement."""
        scope = self.cfg.scopes[scope_idx]
        saved_loops, saved_path = self.loops, self.scope_path
        self.loops = scope.loops_at_try
        self.scope_path = scope.outer_scope_path
        anchor = self.new_node(NodeKind.STATEMENT)  # no-op entry anchor
        frontier = self.build_block(scope.finally_body, [(anchor.id, "seq")])
        self.loops, self.scope_path = saved_loops, saved_path
        return anchor.id, frontier

    # -- statements ------------------------------------------------------------

    def build(self) -> Lcfg:
        entry = self.new_node(NodeKind.ENTRY, line=self.source.start_line)
        self.cfg.entry = entry.id
        frontier = self.build_block(self.source.body, [(entry.id, "seq")])
        if frontier:
            self.connect(frontier, self.normal_exit())
        reachable = self.cfg.reachable_from_entry()
        for node in self.cfg.nodes:
            # catch entries (and their bodies) wait for the enhancement
            # stage to wire call-site exception edges into them
            node.unresolved = node.id not in reachable
        return self.cfg

    def build_block(self, block: lang.Block, frontier: Frontier) -> Frontier:
        for stmt in block.stmts:
            frontier = self.build_stmt(stmt, frontier)
            if not frontier:
                break  # unreachable tail after throw/return on all routes
        return frontier

    def build_stmt(self, stmt: lang.Stmt, frontier: Frontier) -> Frontier:
        if isinstance(stmt, lang.Assign):
            return self._build_assign(stmt, frontier)
        if isinstance(stmt, lang.If):
            return self._build_if(stmt, frontier)
        if isinstance(stmt, lang.While):
            return self._build_loop(stmt.cond, None, stmt.body, None,
                                    stmt.line, frontier)
        if isinstance(stmt, lang.For):
            return self._build_loop(stmt.cond, stmt.init, stmt.body,
                                    stmt.update, stmt.line, frontier)
        if isinstance(stmt, lang.Switch):
            return self._build_switch(stmt, frontier)
        if isinstance(stmt, lang.Try):
            return self._build_try(stmt, frontier)
        if isinstance(stmt, lang.Throw):
            node = self.new_node(NodeKind.THROW, etype=stmt.etype, line=stmt.line)
            self.connect(frontier, node.id)
            self.route_exception(node.id, stmt.etype)
            return []
        if isinstance(stmt, lang.CallStmt):
            node = self._call_node(stmt.call, None)
            self.connect(frontier, node.id)
            return [(node.id, "seq")]
        if isinstance(stmt, lang.LogCall):
            node = self.new_node(NodeKind.LOG, log=stmt, line=stmt.line)
            self.connect(frontier, node.id)
            return [(node.id, "seq")]
        if isinstance(stmt, lang.Return):
            node = self.new_node(NodeKind.STATEMENT, is_return=True,
                                 return_value=stmt.value, line=stmt.line)
            self.connect(frontier, node.id)
            self.route_return(node.id)
            return []
        raise TypeError(f"unhandled statement {stmt!r}")

    def _call_node(self, call: lang.Call, assign_target: Optional[str]) -> LcfgNode:
        return self.new_node(
            NodeKind.CALL, call=call, assign_target=assign_target,
            resolved=not call.dynamic, line=call.line,
        )

    def _build_assign(self, stmt: lang.Assign, frontier: Frontier) -> Frontier:
        if isinstance(stmt.value, lang.Call):
            node = self._call_node(stmt.value, stmt.target)
        else:
            node = self.new_node(NodeKind.STATEMENT, stmt=stmt, line=stmt.line)
        self.connect(frontier, node.id)
        return [(node.id, "seq")]

    def _build_if(self, stmt: lang.If, frontier: Frontier) -> Frontier:
        branch = self.new_node(NodeKind.BRANCH, cond=stmt.cond, line=stmt.line)
        self.connect(frontier, branch.id)
        then_frontier = self.build_block(stmt.then, [(branch.id, "true")])
        if stmt.orelse is not None:
            else_frontier = self.build_block(stmt.orelse, [(branch.id, "false")])
        else:
            else_frontier = [(branch.id, "false")]
        return then_frontier + else_frontier

    def _build_loop(self, cond: lang.Expr, init: Optional[lang.Assign],
                    body: lang.Block, update: Optional[lang.Assign],
                    line: int, frontier: Frontier) -> Frontier:
        if init is not None:
            frontier = self._build_assign(init, frontier)
        head = self.new_node(NodeKind.LOOP_HEAD, cond=cond, line=line)
        self.connect(frontier, head.id)
        self.loops = self.loops + (head.id,)
        body_frontier = self.build_block(body, [(head.id, "loop-body")])
        if update is not None:
            body_frontier = self._build_assign(update, body_frontier)
        self.loops = self.loops[:-1]
        self.connect(body_frontier, head.id, back=True)
        return [(head.id, "loop-exit")]

    def _build_switch(self, stmt: lang.Switch, frontier: Frontier) -> Frontier:
        # Compiled as an equality-test branch chain; no fallthrough semantics.
        result: Frontier = []
        for case in stmt.cases:
            cond = lang.Binary("==", stmt.scrutinee, case.match)
            branch = self.new_node(NodeKind.BRANCH, cond=cond, line=stmt.line)
            self.connect(frontier, branch.id)
            result += self.build_block(case.body, [(branch.id, "true")])
            frontier = [(branch.id, "false")]
        if stmt.default is not None:
            result += self.build_block(stmt.default, frontier)
        else:
            result += frontier
        return result

    def _build_try(self, stmt: lang.Try, frontier: Frontier) -> Frontier:
        catch_entries = [
            self.new_node(NodeKind.CATCH_ENTRY, etype=c.etype, catch_var=c.var,
                          line=c.line)
            for c in stmt.catches
        ]
        scope = TryScope(
            catches=tuple((c.etype, n.id) for c, n in zip(stmt.catches,
                                                          catch_entries)),
            finally_body=stmt.finally_body,
            loops_at_try=self.loops,
            outer_scope_path=self.scope_path,
        )
        scope_idx = len(self.cfg.scopes)
        self.cfg.scopes.append(scope)

        self.scope_path = self.scope_path + (scope_idx,)
        body_frontier = self.build_block(stmt.body, frontier)
        self.scope_path = self.scope_path[:-1]

        completion: Frontier = list(body_frontier)
        if stmt.finally_body is not None:
            catch_scope_idx = len(self.cfg.scopes)
            self.cfg.scopes.append(TryScope(
                catches=(), finally_body=stmt.finally_body,
                loops_at_try=self.loops, outer_scope_path=self.scope_path,
            ))
        else:
            catch_scope_idx = None
        for catch, entry in zip(stmt.catches, catch_entries):
            if catch_scope_idx is not None:
                self.scope_path = self.scope_path + (catch_scope_idx,)
            completion += self.build_block(catch.body, [(entry.id, "seq")])
            if catch_scope_idx is not None:
                self.scope_path = self.scope_path[:-1]

        if stmt.finally_body is None:
            return completion
        anchor, out = self.build_finally_copy(scope_idx)
        self.connect([(n, "finally") for n, _ in completion], anchor)
        return out


def build_lcfg(source: MethodSource) -> Lcfg:
    """Structural translation of a method's statement tree into its CFG."""
    return _Builder(source).build()


def route_call_exception(cfg: Lcfg, source: MethodSource, call_node_id: int,
                         etype: str) -> None:
    """Add an exception route from a call site on an already-built graph,
    honoring the handler scopes and finally blocks recorded at build time."""
    builder = _Builder(source, cfg)
    node = cfg.node(call_node_id)
    builder.loops = node.enclosing_loops
    builder.scope_path = node.scope_path
    builder.route_exception(call_node_id, etype)


# ---------------------------------------------------------------------------
# Path-constraint annotation
# ---------------------------------------------------------------------------

def annotate_lcfg(cfg: Lcfg) -> Lcfg:
    """Attach to each log and call node the conjunction of branch decisions
    that dominate it.  Pure metadata: the graph shape is unchanged.

    Dominance is computed over an edge-split view of the graph so that the
    two arms of one branch node dominate different things.
    """
    # Virtual ids: nodes keep their ids; edge k gets id len(nodes)+k.
    n_nodes = len(cfg.nodes)
    succ: dict[int, list[int]] = {i: [] for i in range(n_nodes + len(cfg.edges))}
    pred: dict[int, list[int]] = {i: [] for i in range(n_nodes + len(cfg.edges))}
    for k, e in enumerate(cfg.edges):
        mid = n_nodes + k
        succ[e.src].append(mid)
        succ[mid].append(e.dst)
        pred[mid].append(e.src)
        pred[e.dst].append(mid)

    reachable = {cfg.entry}
    queue = deque([cfg.entry])
    while queue:
        cur = queue.popleft()
        for nxt in succ[cur]:
            if nxt not in reachable:
                reachable.add(nxt)
                queue.append(nxt)

    dom: dict[int, set[int]] = {v: set(reachable) for v in reachable}
    dom[cfg.entry] = {cfg.entry}
    changed = True
    while changed:
        changed = False
        for v in sorted(reachable):
            if v == cfg.entry:
                continue
            preds = [p for p in pred[v] if p in reachable]
            if not preds:
                new = {v}
            else:
                new = set.intersection(*(dom[p] for p in preds)) | {v}
            if new != dom[v]:
                dom[v] = new
                changed = True

    decision_edges: dict[int, tuple[int, bool]] = {}
    for k, e in enumerate(cfg.edges):
        node = cfg.nodes[e.src]
        if node.kind is NodeKind.BRANCH and e.label in ("true", "false"):
            decision_edges[n_nodes + k] = (e.src, e.label == "true")
        elif node.kind is NodeKind.LOOP_HEAD and e.label in ("loop-body",
                                                             "loop-exit"):
            decision_edges[n_nodes + k] = (e.src, e.label == "loop-body")

    for node in cfg.nodes:
        if node.kind not in (NodeKind.LOG, NodeKind.CALL):
            continue
        if node.id not in reachable:
            node.constraints = ()
            continue
        atoms = []
        for mid, (branch_id, polarity) in decision_edges.items():
            if mid in dom[node.id]:
                atoms.append((branch_id, polarity))
        atoms.sort(key=lambda t: t[0])
        node.constraints = tuple(
            (lang.format_expr(cfg.nodes[b].cond), pol) for b, pol in atoms
        )
    return cfg


def render_constraint(atom: tuple[str, bool]) -> str:
    text, polarity = atom
    return text if polarity else f"!({text})"


# ---------------------------------------------------------------------------
# Dual-threshold subgraph extraction
# ---------------------------------------------------------------------------

@dataclass
class Subgraph:
    root: int
    members: frozenset[int]
    depth: int

    def sort_key(self, graph: CallGraph) -> str:
        return graph.by_id[self.root].fq_name


def _closure(graph: CallGraph, root: int, depth: int) -> frozenset[int]:
    members = {root}
    frontier = [root]
    for _ in range(depth):
        nxt = []
        for node in frontier:
            for callee in graph.callees(node):
                if callee not in members:
                    members.add(callee)
                    nxt.append(callee)
        frontier = nxt
        if not frontier:
            break
    return frozenset(members)


def extract_subgraphs(graph: CallGraph, entry_threshold: int = 2,
                      depth_threshold: int = 3) -> list[Subgraph]:
    """Extract depth-bounded subgraphs rooted at near-entry methods.

    Every emitted subgraph contains at least one direct log method; roots
    whose closure has none are re-rooted at their callees.  A final sweep
    guarantees every direct node of the pruned graph is covered by some
    subgraph (overlap is allowed; duplicates are resolved downstream by
    sequence fingerprint).
    """
    if entry_threshold < 1:
        raise ValueError("entry_threshold must be >= 1")
    if depth_threshold < 0:
        raise ValueError("depth_threshold must be >= 0")
    if not graph.nodes:
        raise NoSubgraphsError("pruned graph is empty")

    direct = {n.id for n in graph.nodes if n.log_tag is LogTag.DIRECT}
    ordered = sorted(graph.nodes, key=lambda n: n.id)
    worklist = deque(n.id for n in ordered if graph.in_degree(n.id) <= entry_threshold)
    covered: set[int] = set()
    queued: set[int] = set(worklist)
    result: list[Subgraph] = []

    def emit(root: int) -> None:
        members = _closure(graph, root, depth_threshold)
        result.append(Subgraph(root=root, members=members, depth=depth_threshold))
        covered.update(members)

    while worklist:
        root = worklist.popleft()
        if root in covered:
            continue
        members = _closure(graph, root, depth_threshold)
        if members & direct:
            emit(root)
        else:
            for callee in sorted(set(graph.callees(root))):
                if callee not in queued:
                    queued.add(callee)
                    worklist.append(callee)

    for node_id in sorted(direct):
        if node_id not in covered:
            emit(node_id)

    result.sort(key=lambda s: s.sort_key(graph))
    return result


def call_path(graph: CallGraph, subgraph: Subgraph, member: int) -> list[str]:
    """Shortest root-to-member call chain inside a subgraph (BFS, smallest
    node id wins ties); used to assemble enhancement ternaries."""
    if member == subgraph.root:
        return [graph.by_id[member].fq_name]
    parent: dict[int, int] = {subgraph.root: -1}
    queue = deque([subgraph.root])
    while queue:
        cur = queue.popleft()
        for callee in sorted(set(graph.callees(cur))):
            if callee in subgraph.members and callee not in parent:
                parent[callee] = cur
                if callee == member:
                    queue.clear()
                    break
                queue.append(callee)
    if member not in parent:
        return [graph.by_id[member].fq_name]
    chain = [member]
    while chain[-1] != subgraph.root:
        chain.append(parent[chain[-1]])
    return [graph.by_id[n].fq_name for n in reversed(chain)]
