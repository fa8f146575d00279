"""CFG enhancement from (source, call chain, per-method CFG) context.

The per-method graph built by the frontend is deliberately conservative;
this stage completes it using whole-program context, in four moves:

1. call matching and completion: dynamic call sites get their candidate
   implementations resolved, and calls known from the call chain but absent
   from the graph are inserted at a structurally legal position;
2. exception path augmentation: every call whose callee may propagate an
   exception gains an exception edge to the matching handler (or a typed
   propagate-exit), via the same routing used for explicit throws;
3. log-flow association: each log parameter is linked to the definitions
   that reach it (assignments, parameters, call returns, catch binders);
4. path constraining and consistency verification: per-path condition
   conjunctions are checked over the declared finite domains, infeasible
   paths are pruned, witness bindings are recorded, and a graph is
   quarantined if any log node survives on no feasible path.

A reasoner backend is consulted for completion positions, binding
proposals, and audits, but every proposal passes a structural validator
before it touches the graph: the reasoner is advisory, the validator is
authoritative.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from . import lang
from .corpus import Corpus, MethodSource
from .errors import CompletionRejectedError, InconsistentCfgError
from .evalexpr import UNKNOWN, atom_holds, first_satisfying
from .lcfg import (Lcfg, LcfgEdge, NodeKind, Subgraph, annotate_lcfg,
                   build_lcfg, call_path, route_call_exception)
from .paths import LoopPolicy, MethodPath, enumerate_paths
from .reasoner import Reasoner, ReasonerRequest, RequestKind


class VerificationOutcome(Enum):
    PENDING = "pending"
    VERIFIED = "verified"
    QUARANTINED = "quarantined"


@dataclass
class Ternary:
    """<source, call chain, per-method CFG> plus the derived outgoing-call
    facts the completion step cross-validates against."""

    source: MethodSource
    call_path: list[str]
    lcfg: Lcfg
    call_edges: list[tuple[str, int, bool]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.call_path and self.call_path[-1] != self.source.fq_name:
            raise ValueError("call path must end at the ternary's own method")


@dataclass
class KeptPath:
    path_id: str
    path: MethodPath
    atoms: list[tuple[str, bool]]
    bindings: dict


@dataclass
class EnhancedCfg:
    base: Lcfg
    graph: Lcfg
    source: MethodSource
    inserted_calls: list[tuple[int, dict]] = field(default_factory=list)
    exception_branches: list[tuple[int, str, str, int]] = field(default_factory=list)
    log_var_links: list[tuple[int, str, Optional[int]]] = field(default_factory=list)
    path_constraints: list[KeptPath] = field(default_factory=list)
    consistency: VerificationOutcome = VerificationOutcome.PENDING
    quarantine_reason: str = ""

    @property
    def owner(self) -> str:
        return self.graph.owner

    def kept_paths(self) -> list[MethodPath]:
        return [k.path for k in self.path_constraints]

    def to_text(self) -> str:
        lines = [self.graph.to_text().rstrip("\n")]
        for kept in self.path_constraints:
            conj = " && ".join(
                (a if req else f"!({a})") for a, req in kept.atoms) or "true"
            binds = ", ".join(f"{k}={v}" for k, v in sorted(kept.bindings.items()))
            lines.append(f"  path {kept.path_id} constraint [{conj}]"
                         f" bindings [{binds}]")
        lines.append(f"  consistency {self.consistency.value}")
        return "\n".join(lines) + "\n"


def make_ternary(subgraph: Subgraph, graph, corpus: Corpus, member: int,
                 lcfg: Optional[Lcfg] = None) -> Ternary:
    """Assemble the enhancement input for one subgraph member."""
    fq = graph.by_id[member].fq_name
    source = corpus.get(fq)
    if source is None:
        raise ValueError(f"no source for {fq}")
    chain = call_path(graph, subgraph, member)
    edges = [(graph.by_id[e.callee].fq_name, e.line, e.dynamic)
             for e in graph.forward[member]]
    edges.sort(key=lambda t: (t[1], t[0]))
    return Ternary(
        source=source,
        call_path=chain,
        lcfg=lcfg if lcfg is not None else annotate_lcfg(build_lcfg(source)),
        call_edges=edges,
    )


# ---------------------------------------------------------------------------
# Step 1: call matching and completion
# ---------------------------------------------------------------------------

def _legal_insertion_slots(graph: Lcfg) -> list[int]:
    """Nodes after which a straight-line call can be inserted: top-level
    positions outside any branch, loop, or handler scope."""
    slots = []
    for node in graph.nodes:
        if node.enclosing_loops or node.scope_path:
            continue
        if node.kind not in (NodeKind.ENTRY, NodeKind.STATEMENT,
                             NodeKind.LOG, NodeKind.CALL):
            continue
        out = graph.out_edges(node.id)
        if len(out) == 1 and out[0].label == "seq" and not out[0].back:
            slots.append(node.id)
    return slots


def _source_hint(source: MethodSource, callee_fq: str, graph: Lcfg,
                 slots: list[int]) -> Optional[int]:
    """Position suggested by the source text: the top-level statement right
    before the missing call, mapped to its graph node."""
    stmts = source.body.stmts
    for idx, stmt in enumerate(stmts):
        call = None
        if isinstance(stmt, lang.CallStmt):
            call = stmt.call
        elif isinstance(stmt, lang.Assign) and isinstance(stmt.value, lang.Call):
            call = stmt.value
        if call is None or call.dynamic:
            continue
        fq = f"{call.cls or source.class_name}.{call.name}/{call.arity}"
        if fq != callee_fq:
            continue
        if idx == 0:
            return graph.entry if graph.entry in slots else None
        prev_line = stmts[idx - 1].line
        for node_id in slots:
            if graph.node(node_id).line == prev_line:
                return node_id
        return None
    return None


def match_and_complete_calls(ternary: Ternary, reasoner: Reasoner,
                             corpus: Corpus) -> EnhancedCfg:
    cfg = EnhancedCfg(base=ternary.lcfg, graph=copy.deepcopy(ternary.lcfg),
                      source=ternary.source)
    graph = cfg.graph

    for node in graph.call_nodes():
        if node.call.dynamic and not node.candidates:
            candidates = tuple(sorted(
                corpus.meta.candidates(node.call.cls, node.call.name)))
            node.candidates = candidates
            node.resolved = bool(candidates)
            reasoner.infer(ReasonerRequest(
                kind=RequestKind.ENHANCE_PROPOSAL,
                payload={"op": "resolve-dynamic",
                         "call": f"{node.call.cls}.{node.call.name}",
                         "candidates": list(candidates)},
            ))

    matched: set[str] = set()
    for node in graph.call_nodes():
        if node.call.dynamic:
            matched.update(node.candidates)
        else:
            cls = node.call.cls or ternary.source.class_name
            matched.add(f"{cls}.{node.call.name}/{node.call.arity}")

    for callee_fq, line, dynamic in ternary.call_edges:
        if dynamic or callee_fq in matched:
            continue
        slots = _legal_insertion_slots(graph)
        hint = _source_hint(ternary.source, callee_fq, graph, slots)
        verdict = reasoner.infer(ReasonerRequest(
            kind=RequestKind.ENHANCE_PROPOSAL,
            payload={"op": "insert-call", "missing": callee_fq,
                     "slots": slots, "source_hint": hint,
                     "bindable": ["position"]},
        ))
        if not verdict.accepted:
            raise CompletionRejectedError(
                f"no legal insertion point for {callee_fq} in {graph.owner}")
        position = verdict.bindings.get("position")
        if position not in slots:
            raise CompletionRejectedError(
                f"illegal insertion position {position!r} for {callee_fq}")
        node_id = _insert_call_after(graph, position, callee_fq, line)
        matched.add(callee_fq)
        cfg.inserted_calls.append((node_id, {
            "callee": callee_fq, "after_node": position,
            "source_hint": hint, "backend": verdict.backend,
        }))
    return cfg


def _insert_call_after(graph: Lcfg, position: int, callee_fq: str,
                       line: int) -> int:
    cls_and_name, arity = callee_fq.rsplit("/", 1)
    cls, name = cls_and_name.split(".", 1)
    anchor = graph.node(position)
    call = lang.Call(cls=cls, name=name, args=[], dynamic=False, line=line)
    node = type(anchor)(
        id=len(graph.nodes), kind=NodeKind.CALL, line=line, call=call,
        resolved=True, enclosing_loops=anchor.enclosing_loops,
        scope_path=anchor.scope_path,
    )
    graph.nodes.append(node)
    old = next(e for e in graph.out_edges(position)
               if e.label == "seq" and not e.back)
    graph.edges.remove(old)
    graph.edges.append(LcfgEdge(position, node.id, "seq"))
    graph.edges.append(LcfgEdge(node.id, old.dst, old.label, old.back, old.etype))
    return node.id


# ---------------------------------------------------------------------------
# Step 2: exception path augmentation
# ---------------------------------------------------------------------------

def compute_may_propagate(corpus: Corpus) -> dict[str, set[str]]:
    """Exception types that can escape each method, by fixpoint over the
    statement trees (local handlers subtracted, callee sets propagated)."""
    result: dict[str, set[str]] = {fq: set() for fq in corpus.source_index}

    def escaping(source: MethodSource) -> set[str]:
        out: set[str] = set()

        def walk(block: lang.Block, handlers: tuple[frozenset, ...]) -> None:
            for stmt in block.stmts:
                if isinstance(stmt, lang.Throw):
                    if not any(stmt.etype in h for h in handlers):
                        out.add(stmt.etype)
                elif isinstance(stmt, lang.If):
                    walk(stmt.then, handlers)
                    if stmt.orelse:
                        walk(stmt.orelse, handlers)
                elif isinstance(stmt, (lang.While,)):
                    walk(stmt.body, handlers)
                elif isinstance(stmt, lang.For):
                    walk(stmt.body, handlers)
                elif isinstance(stmt, lang.Switch):
                    for case in stmt.cases:
                        walk(case.body, handlers)
                    if stmt.default:
                        walk(stmt.default, handlers)
                elif isinstance(stmt, lang.Try):
                    inner = handlers + (frozenset(c.etype for c in stmt.catches),)
                    walk(stmt.body, inner)
                    for catch in stmt.catches:
                        walk(catch.body, handlers)
                    if stmt.finally_body:
                        walk(stmt.finally_body, handlers)
                else:
                    for callee_fq in _stmt_callees(stmt, source, corpus):
                        for etype in result.get(callee_fq, set()):
                            if not any(etype in h for h in handlers):
                                out.add(etype)

        walk(source.body, ())
        return out

    changed = True
    while changed:
        changed = False
        for fq in sorted(corpus.source_index):
            new = escaping(corpus.source_index[fq])
            if new != result[fq]:
                result[fq] = new
                changed = True
    return result


def _stmt_callees(stmt, source: MethodSource, corpus: Corpus) -> list[str]:
    call = None
    if isinstance(stmt, lang.CallStmt):
        call = stmt.call
    elif isinstance(stmt, lang.Assign) and isinstance(stmt.value, lang.Call):
        call = stmt.value
    if call is None:
        return []
    if call.dynamic:
        return corpus.meta.candidates(call.cls, call.name)
    fq = f"{call.cls or source.class_name}.{call.name}/{call.arity}"
    return [fq]


def call_node_etypes(node, source: MethodSource, corpus: Corpus,
                     may_propagate: dict[str, set[str]]) -> list[str]:
    if node.call.dynamic:
        types: set[str] = set()
        for cand in node.candidates:
            types |= may_propagate.get(cand, set())
        return sorted(types)
    cls = node.call.cls or source.class_name
    fq = f"{cls}.{node.call.name}/{node.call.arity}"
    return sorted(may_propagate.get(fq, set()))


def augment_exception_paths(cfg: EnhancedCfg, corpus: Corpus,
                            may_propagate: Optional[dict] = None) -> EnhancedCfg:
    if may_propagate is None:
        may_propagate = compute_may_propagate(corpus)
    graph = cfg.graph
    for node in list(graph.call_nodes()):
        existing = {e.etype for e in graph.out_edges(node.id)
                    if e.label == "exception"}
        for etype in call_node_etypes(node, cfg.source, corpus, may_propagate):
            if etype in existing:
                continue  # idempotent
            before = {e.dst for e in graph.out_edges(node.id)}
            route_call_exception(graph, cfg.source, node.id, etype)
            added = [e for e in graph.out_edges(node.id) if e.dst not in before]
            target = added[0].dst if added else -1
            kind = ("propagate"
                    if graph.node(_chain_end(graph, target)).kind is NodeKind.EXIT
                    else "handler")
            cfg.exception_branches.append((node.id, etype, kind, target))
    for node in graph.nodes:
        if node.unresolved and graph.in_edges(node.id):
            node.unresolved = False
    return cfg


def _chain_end(graph: Lcfg, node_id: int) -> int:
    # follow single-successor chain (finally copies) to its destination
    seen = set()
    cur = node_id
    while cur not in seen:
        seen.add(cur)
        node = graph.node(cur)
        if node.kind in (NodeKind.EXIT, NodeKind.CATCH_ENTRY):
            return cur
        out = [e for e in graph.out_edges(cur) if not e.back]
        if len(out) != 1:
            return cur
        cur = out[0].dst
    return cur


# ---------------------------------------------------------------------------
# Step 3: log-flow association (reaching definitions)
# ---------------------------------------------------------------------------

def _node_definitions(graph: Lcfg, source: MethodSource) -> dict[int, list[str]]:
    defs: dict[int, list[str]] = {}
    for node in graph.nodes:
        if node.kind is NodeKind.ENTRY:
            defs[node.id] = [p.name for p in source.method.params]
        elif node.kind is NodeKind.STATEMENT and node.stmt is not None:
            defs[node.id] = [node.stmt.target]
        elif node.kind is NodeKind.CALL and node.assign_target:
            defs[node.id] = [node.assign_target]
        elif node.kind is NodeKind.CATCH_ENTRY and node.catch_var:
            defs[node.id] = [node.catch_var]
    return defs


def reaching_definitions(graph: Lcfg,
                         source: MethodSource) -> dict[int, set[tuple[str, int]]]:
    """Worklist dataflow: which (variable, defining node) pairs reach each
    node's entry."""
    defs = _node_definitions(graph, source)
    preds: dict[int, list[int]] = {n.id: [] for n in graph.nodes}
    succs: dict[int, list[int]] = {n.id: [] for n in graph.nodes}
    for e in graph.edges:
        preds[e.dst].append(e.src)
        succs[e.src].append(e.dst)

    in_sets: dict[int, set[tuple[str, int]]] = {n.id: set() for n in graph.nodes}
    out_sets: dict[int, set[tuple[str, int]]] = {n.id: set() for n in graph.nodes}
    work = list(range(len(graph.nodes)))
    while work:
        node_id = work.pop(0)
        new_in = set()
        for p in preds[node_id]:
            new_in |= out_sets[p]
        killed_vars = set(defs.get(node_id, []))
        new_out = {d for d in new_in if d[0] not in killed_vars}
        new_out |= {(v, node_id) for v in defs.get(node_id, [])}
        if new_in != in_sets[node_id] or new_out != out_sets[node_id]:
            in_sets[node_id] = new_in
            out_sets[node_id] = new_out
            work.extend(succs[node_id])
    return in_sets


def associate_log_flow(cfg: EnhancedCfg, reasoner: Reasoner) -> EnhancedCfg:
    graph = cfg.graph
    reaching = reaching_definitions(graph, cfg.source)
    links: list[tuple[int, str, Optional[int]]] = []
    for node in graph.log_nodes():
        seen_vars: set[str] = set()
        for param in node.log.params:
            for var in lang.expr_vars(param):
                if var in seen_vars:
                    continue
                seen_vars.add(var)
                defs = sorted(d for v, d in reaching[node.id] if v == var)
                if defs:
                    for d in defs:
                        links.append((node.id, var, d))
                else:
                    links.append((node.id, var, None))  # unresolved: free
    cfg.log_var_links = links
    reasoner.infer(ReasonerRequest(
        kind=RequestKind.ENHANCE_PROPOSAL,
        payload={"op": "log-flow",
                 "links": [[n, v, d] for n, v, d in links]},
    ))
    return cfg


# ---------------------------------------------------------------------------
# Step 4+5: path constraints, binding simulation, consistency verification
# ---------------------------------------------------------------------------

def path_residual_atoms(graph: Lcfg, source: MethodSource,
                        path) -> Optional[list[tuple[str, bool]]]:
    """Symbolically replay one intraprocedural path: assignments are folded,
    so each decision becomes either concretely checkable (a mismatch prunes
    the path; returns None) or a residual condition over the method's
    parameters.  Call returns are opaque here; conditions that depend on
    them stay deferred to the interprocedural merge."""
    from . import evalexpr

    env: dict = {p.name: lang.Var(p.name) for p in source.method.params}
    atoms: list[tuple[str, bool]] = []
    for step in path.steps:
        node = graph.node(step.node)
        if node.kind in (NodeKind.BRANCH, NodeKind.LOOP_HEAD):
            required = step.label in ("true", "loop-body")
            try:
                value = evalexpr.partial_eval(node.cond, env)
            except evalexpr.EvalError:
                return None
            if value is UNKNOWN:
                continue  # call-dependent: deferred
            if isinstance(value, bool):
                if value != required:
                    return None
            elif isinstance(value, (int, str)):
                return None
            else:
                atoms.append((lang.format_expr(value), required))
        elif node.kind is NodeKind.STATEMENT and node.stmt is not None:
            try:
                env[node.stmt.target] = evalexpr.partial_eval(
                    node.stmt.value, env)
            except evalexpr.EvalError:
                env[node.stmt.target] = UNKNOWN
        elif node.kind is NodeKind.CALL and node.assign_target:
            env[node.assign_target] = UNKNOWN
        elif node.kind is NodeKind.CATCH_ENTRY and node.catch_var:
            env[node.catch_var] = node.etype
    return atoms


def constrain_and_verify(cfg: EnhancedCfg, reasoner: Reasoner, corpus: Corpus,
                         policy: LoopPolicy = LoopPolicy(),
                         max_paths: int = 10_000,
                         strict: bool = False) -> EnhancedCfg:
    graph = cfg.graph
    domains = {p.name: corpus.meta.domain_for(p.name, p.type)
               for p in cfg.source.method.params}
    enumeration = enumerate_paths(graph, policy, max_paths)
    kept: list[KeptPath] = []
    for idx, path in enumerate(enumeration.paths):
        atoms = path_residual_atoms(graph, cfg.source, path)
        if atoms is None:
            continue  # concretely contradictory along the path: pruned
        witness = first_satisfying(atoms, domains)
        if witness is None:
            continue  # unsatisfiable conjunction: pruned
        template = " | ".join(
            graph.node(n).log.template for n in path.log_nodes(graph))
        verdict = reasoner.infer(ReasonerRequest(
            kind=RequestKind.PARAM_SIMULATION,
            payload={"template": template,
                     "atoms": [[a, req] for a, req in atoms],
                     "variables": {k: list(v) for k, v in sorted(domains.items())}},
        ))
        bindings = dict(witness)
        if verdict.accepted and verdict.bindings:
            proposed = dict(witness)
            proposed.update(verdict.bindings)
            checked = all(
                atom_holds(a, req, proposed) is not False for a, req in atoms)
            in_domain = all(
                verdict.bindings[k] in domains.get(k, []) for k in verdict.bindings)
            if checked and in_domain:
                bindings = proposed
        bindings = {k: v for k, v in bindings.items() if v is not UNKNOWN}
        kept.append(KeptPath(path_id=f"p{idx}", path=path, atoms=atoms,
                             bindings=bindings))
    cfg.path_constraints = kept

    reachable_logs = {n for k in kept for n in k.path.log_nodes(graph)}
    missing = [n.id for n in graph.log_nodes() if n.id not in reachable_logs]
    if missing:
        cfg.consistency = VerificationOutcome.QUARANTINED
        cfg.quarantine_reason = (
            f"log nodes unreachable on every kept path: {missing}")
        if strict:
            raise InconsistentCfgError(f"{graph.owner}: {cfg.quarantine_reason}")
    else:
        cfg.consistency = VerificationOutcome.VERIFIED
    return cfg


def enhance_ternary(ternary: Ternary, corpus: Corpus, reasoner: Reasoner,
                    policy: LoopPolicy = LoopPolicy(),
                    max_paths: int = 10_000,
                    may_propagate: Optional[dict] = None) -> EnhancedCfg:
    """Run the full enhancement pipeline for one ternary."""
    cfg = match_and_complete_calls(ternary, reasoner, corpus)
    cfg = augment_exception_paths(cfg, corpus, may_propagate)
    cfg = associate_log_flow(cfg, reasoner)
    annotate_lcfg(cfg.graph)
    cfg = constrain_and_verify(cfg, reasoner, corpus, policy, max_paths)
    return cfg
