"""Bottom-up recursive merging of per-method log projections.

A subgraph's root paths are expanded depth-first: every call site splices a
callee path whose termination matches the route the parent takes after the
call (normal continuation vs. a specific exception type), exactly like a
call stack pushing and popping frames.  Dynamic call sites branch once per
candidate implementation, held consistent per interface across one merged
sequence.

Each structural candidate is then replayed once with the root inputs left
symbolic: assignments and argument bindings are substituted and folded, so
every branch decision reduces to a concrete boolean (which must match the
taken edge) or a residual condition over root inputs.  The conjunction of
residual conditions is decided by finite-domain enumeration, which both
rejects infeasible candidates and produces the witness bindings used to
render the log parameters.

Sequences that survive are verified (bracket discipline, def-before-use,
constraint satisfiability) through the reasoner interface, deduplicated,
and integrity-checked.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import lang
from .corpus import Corpus
from .enhance import EnhancedCfg
from .errors import LogsynthError
from .evalexpr import (UNKNOWN, EvalError, eval_expr, first_satisfying,
                       partial_eval, render_template, render_value)
from .lcfg import NodeKind, Subgraph
from .paths import LoopPolicy, MethodPath, PathEnumeration, enumerate_paths
from .reasoner import (Reasoner, ReasonerRequest, ReasonerVerdict, RequestKind,
                       RuleEngine)


def enumerate_method_paths(cfg: EnhancedCfg,
                           loop_policy: LoopPolicy = LoopPolicy(),
                           max_paths: int = 10_000) -> PathEnumeration:
    """All feasible entry-to-exit paths of an enhanced graph with their log
    projections (wrapper over the shared walker, on the enhanced graph)."""
    return enumerate_paths(cfg.graph, loop_policy, max_paths)


# ---------------------------------------------------------------------------
# Data model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LogEvent:
    fingerprint: str               # "<Class:method> [LEVEL]"
    rendered: str
    template: str
    source_method: str
    source_node: int
    bindings: tuple[tuple[str, str], ...] = ()
    incomplete: bool = False       # some placeholder rendered as <*>


@dataclass
class ContextStep:
    method: str
    node: int
    depth: int
    kind: str                      # node kind value, or call-enter/call-exit
    decision: Optional[str] = None # edge label taken at branch/loop nodes
    atom: Optional[str] = None     # residual condition text
    truth: Optional[bool] = None


@dataclass
class ExecutionContext:
    path: list[ContextStep] = field(default_factory=list)
    variable_chain: list[tuple[str, int, int]] = field(default_factory=list)
    atoms: list[tuple[str, bool, bool]] = field(default_factory=list)
    bindings: dict = field(default_factory=dict)
    dispatch: dict[str, str] = field(default_factory=dict)

    def brackets(self) -> list[tuple[int, int, int]]:
        out = []
        stack = []
        for idx, step in enumerate(self.path):
            if step.kind == "call-enter":
                stack.append((idx, step.depth))
            elif step.kind == "call-exit":
                if not stack:
                    out.append((idx, idx, step.depth))  # malformed marker
                    continue
                enter, depth = stack.pop()
                out.append((enter, idx, depth))
        while stack:
            enter, depth = stack.pop()
            out.append((enter, enter, depth))  # unclosed marker
        out.sort()
        return out


@dataclass
class LogSequence:
    events: list[LogEvent]
    context: ExecutionContext
    verdict: Optional[ReasonerVerdict]
    origin_subgraph: str
    root_method: str
    root_path_id: str

    def fingerprints(self) -> list[str]:
        return [e.fingerprint for e in self.events]

    def constraint_key(self) -> frozenset:
        return frozenset((a, req) for a, req, _ in self.context.atoms)

    def sort_key(self) -> tuple:
        return (self.origin_subgraph, self.root_method, self.root_path_id,
                tuple(self.fingerprints()),
                tuple(sorted((a, req) for a, req, _ in self.context.atoms)),
                tuple(e.rendered for e in self.events))


@dataclass
class MergeNode:
    """One frame of a structural merge candidate."""

    fq: str
    path: Optional[MethodPath]           # None for opaque (sourceless) calls
    children: dict[int, "MergeNode"] = field(default_factory=dict)  # step idx

    def methods(self) -> set[str]:
        out = {self.fq}
        for child in self.children.values():
            out |= child.methods()
        return out


@dataclass
class MergeStats:
    candidates: int = 0
    accepted: int = 0
    rejected_structural: int = 0
    rejected_infeasible: int = 0
    empty_projection: int = 0
    rejection_reasons: dict[str, int] = field(default_factory=dict)
    truncated: bool = False
    errors: list[str] = field(default_factory=list)

    def count_reason(self, reason: str) -> None:
        self.rejection_reasons[reason] = self.rejection_reasons.get(reason, 0) + 1


class AllMergesRejected(LogsynthError):
    """Every candidate for a root path failed verification."""

    def __init__(self, root: str, path_id: str, reasons: dict[str, int]):
        super().__init__(f"{root} {path_id}: all merge candidates rejected "
                         f"({reasons})")
        self.reasons = reasons


# ---------------------------------------------------------------------------
# Structural expansion
# ---------------------------------------------------------------------------

def _call_target(node, owner_class: str) -> str:
    cls = node.call.cls or owner_class
    return f"{cls}.{node.call.name}/{node.call.arity}"


def _expand(fq: str, termination: Optional[str],
            per_method: dict[str, EnhancedCfg], corpus: Corpus,
            stack: tuple[str, ...], dispatch: dict[str, str],
            reentry_cap: int, budget: list[int]):
    """Yield (MergeNode, dispatch) variants for one callee frame."""
    cfg = per_method.get(fq)
    if cfg is None:
        if fq in corpus.source_index:
            return  # has source but no verified cfg: cannot merge soundly
        yield MergeNode(fq=fq, path=None), dispatch  # opaque external
        return
    if stack.count(fq) > reentry_cap:
        return
    for kept in cfg.path_constraints:
        if kept.path.termination != termination:
            continue
        yield from _expand_path(cfg, kept.path, per_method, corpus,
                                stack + (fq,), dispatch, reentry_cap, budget)


def _expand_path(cfg: EnhancedCfg, path: MethodPath,
                 per_method: dict[str, EnhancedCfg], corpus: Corpus,
                 stack: tuple[str, ...], dispatch: dict[str, str],
                 reentry_cap: int, budget: list[int]):
    graph = cfg.graph
    call_steps = [
        (idx, step) for idx, step in enumerate(path.steps)
        if graph.node(step.node).kind is NodeKind.CALL
    ]

    def rec(pos: int, children: dict[int, MergeNode], disp: dict[str, str]):
        if budget[0] <= 0:
            return
        if pos == len(call_steps):
            yield MergeNode(fq=cfg.owner, path=path, children=dict(children)), disp
            return
        idx, step = call_steps[pos]
        node = graph.node(step.node)
        need = step.etype if step.label == "exception" else None
        if node.call.dynamic:
            key = f"{node.call.cls}.{node.call.name}"
            candidates = [disp[key]] if key in disp else list(node.candidates)
            for cand in candidates:
                new_disp = dict(disp)
                new_disp[key] = cand
                for child, d2 in _expand(cand, need, per_method, corpus,
                                         stack, new_disp, reentry_cap, budget):
                    children[idx] = child
                    yield from rec(pos + 1, children, d2)
                    children.pop(idx, None)
        else:
            target = _call_target(node, cfg.source.class_name)
            for child, d2 in _expand(target, need, per_method, corpus,
                                     stack, disp, reentry_cap, budget):
                children[idx] = child
                yield from rec(pos + 1, children, d2)
                children.pop(idx, None)

    yield from rec(0, {}, dispatch)


# ---------------------------------------------------------------------------
# Symbolic replay of a merge candidate
# ---------------------------------------------------------------------------

class _ReplayConflict(Exception):
    def __init__(self, reason: str, atom: str, cross_frame: bool):
        super().__init__(atom)
        self.reason = reason
        self.atom = atom
        self.cross_frame = cross_frame


@dataclass
class _SymbolicEvent:
    fingerprint: str
    template: str
    source_method: str
    source_node: int
    values: list          # concrete | UNKNOWN | residual expr per placeholder
    param_texts: list[str]
    step_index: int


@dataclass
class _ReplayResult:
    atoms: list[tuple[str, bool, bool]]
    events: list[_SymbolicEvent]
    context: ExecutionContext


def _symbolic_replay(tree: MergeNode, per_method: dict[str, EnhancedCfg],
                     corpus: Corpus) -> _ReplayResult:
    """Walk the merged structure once, folding data flow; collects residual
    decision atoms, symbolic log events, and the execution context."""
    ctx = ExecutionContext()
    atoms: list[tuple[str, bool, bool]] = []
    events: list[_SymbolicEvent] = []
    root_cfg = per_method[tree.fq]
    root_params = [p.name for p in root_cfg.source.method.params]

    def fingerprint(owner: str, level: str) -> str:
        cls, rest = owner.split(".", 1)
        method = rest.split("/", 1)[0]
        return f"<{cls}:{method}> [{level}]"

    def frame(node_tree: MergeNode, env: dict, depth: int,
              cross_frame: bool) -> object:
        """Replay one frame; returns the frame's return value."""
        cfg = per_method[node_tree.fq]
        graph = cfg.graph
        path = node_tree.path
        ret_value: object = UNKNOWN
        def_steps: dict[str, int] = {}

        for idx, step in enumerate(path.steps):
            node = graph.node(step.node)
            step_no = len(ctx.path)
            kind = node.kind

            if kind is NodeKind.ENTRY:
                ctx.path.append(ContextStep(cfg.owner, node.id, depth,
                                            "call-enter" if depth else "entry"))
                for name in [p.name for p in cfg.source.method.params]:
                    def_steps[name] = step_no
                continue
            if kind is NodeKind.EXIT:
                ctx.path.append(ContextStep(cfg.owner, node.id, depth,
                                            "call-exit" if depth else "exit"))
                continue

            if kind in (NodeKind.BRANCH, NodeKind.LOOP_HEAD):
                required = step.label in ("true", "loop-body")
                try:
                    value = partial_eval(node.cond, env)
                except EvalError as exc:
                    raise _ReplayConflict("condition-conflict", str(exc),
                                          cross_frame)
                if value is UNKNOWN:
                    raise _ReplayConflict("unreachable-path",
                                          lang.format_expr(node.cond),
                                          cross_frame)
                if isinstance(value, bool):
                    atom_text = render_value(value)
                    if value != required:
                        reason = ("data-flow-conflict" if cross_frame
                                  else "condition-conflict")
                        raise _ReplayConflict(
                            reason, lang.format_expr(node.cond), cross_frame)
                elif isinstance(value, (int, str)):
                    raise _ReplayConflict("condition-conflict",
                                          lang.format_expr(node.cond),
                                          cross_frame)
                else:
                    atom_text = lang.format_expr(value)
                    atoms.append((atom_text, required, cross_frame))
                ctx.path.append(ContextStep(
                    cfg.owner, node.id, depth, kind.value,
                    decision=step.label, atom=atom_text, truth=required))
                continue

            if kind is NodeKind.STATEMENT:
                ctx.path.append(ContextStep(cfg.owner, node.id, depth,
                                            kind.value))
                if node.is_return:
                    if node.return_value is not None:
                        try:
                            ret_value = partial_eval(node.return_value, env)
                        except EvalError as exc:
                            raise _ReplayConflict("condition-conflict",
                                                  str(exc), cross_frame)
                elif node.stmt is not None:
                    try:
                        env[node.stmt.target] = partial_eval(node.stmt.value, env)
                    except EvalError as exc:
                        raise _ReplayConflict("condition-conflict", str(exc),
                                              cross_frame)
                    def_steps[node.stmt.target] = step_no
                continue

            if kind is NodeKind.LOG:
                values = []
                texts = []
                for param in node.log.params:
                    texts.append(lang.format_expr(param))
                    try:
                        values.append(partial_eval(param, env))
                    except EvalError:
                        values.append(UNKNOWN)
                    for var in lang.expr_vars(param):
                        if var in def_steps:
                            ctx.variable_chain.append((var, def_steps[var],
                                                       step_no))
                ctx.path.append(ContextStep(cfg.owner, node.id, depth,
                                            kind.value))
                events.append(_SymbolicEvent(
                    fingerprint=fingerprint(cfg.owner, node.log.level.name),
                    template=node.log.template,
                    source_method=cfg.owner,
                    source_node=node.id,
                    values=values,
                    param_texts=texts,
                    step_index=step_no,
                ))
                continue

            if kind is NodeKind.THROW:
                ctx.path.append(ContextStep(cfg.owner, node.id, depth,
                                            kind.value))
                continue

            if kind is NodeKind.CATCH_ENTRY:
                ctx.path.append(ContextStep(cfg.owner, node.id, depth,
                                            kind.value))
                if node.catch_var:
                    env[node.catch_var] = node.etype
                    def_steps[node.catch_var] = step_no
                continue

            if kind is NodeKind.CALL:
                ctx.path.append(ContextStep(cfg.owner, node.id, depth,
                                            kind.value, decision=step.label))
                child = node_tree.children.get(idx)
                if child is None or child.path is None:
                    if node.assign_target:
                        env[node.assign_target] = UNKNOWN
                        def_steps[node.assign_target] = step_no
                    continue
                child_cfg = per_method[child.fq]
                child_env: dict = {}
                crossed = cross_frame
                args = node.call.args
                params = child_cfg.source.method.params
                for pos, param in enumerate(params):
                    if pos < len(args):
                        try:
                            child_env[param.name] = partial_eval(args[pos], env)
                        except EvalError as exc:
                            raise _ReplayConflict("data-flow-conflict",
                                                  str(exc), True)
                        crossed = True
                    else:
                        child_env[param.name] = UNKNOWN
                value = frame(child, child_env, depth + 1, crossed)
                if node.assign_target:
                    env[node.assign_target] = value
                    def_steps[node.assign_target] = len(ctx.path) - 1
                continue

            ctx.path.append(ContextStep(cfg.owner, node.id, depth, kind.value))
        return ret_value

    root_env = {name: lang.Var(name) for name in root_params}
    frame(tree, root_env, 0, False)
    ctx.atoms = atoms
    return _ReplayResult(atoms=atoms, events=events, context=ctx)


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------

def merge_payload(candidate: LogSequence) -> dict:
    ctx = candidate.context
    return {
        "fingerprints": candidate.fingerprints(),
        "atoms": [[a, req, cross] for a, req, cross in ctx.atoms],
        "variables": {},
        "brackets": [list(b) for b in ctx.brackets()],
        "events": [[i, st.depth] for i, st in enumerate(ctx.path)
                   if st.kind == "log"],
        "uses": [[use, d] for _, d, use in ctx.variable_chain],
        "n_steps": len(ctx.path),
    }


def verify_merge(candidate: LogSequence, reasoner: Reasoner,
                 domains: Optional[dict[str, list]] = None) -> ReasonerVerdict:
    """Reject when the constraint conjunction is unsatisfiable, a variable
    is consumed before definition, or callee events escape their call
    bracket.  The reasoner is consulted; the rule-engine check of the same
    payload is authoritative."""
    payload = merge_payload(candidate)
    if domains is not None:
        payload["variables"] = {k: list(v) for k, v in sorted(domains.items())}
    request = ReasonerRequest(kind=RequestKind.MERGE_VERDICT, payload=payload)
    verdict = reasoner.infer(request)
    authoritative = RuleEngine().infer(request)
    if verdict.decision != authoritative.decision:
        authoritative.backend = f"{verdict.backend}+overridden"
        return authoritative
    return verdict


# ---------------------------------------------------------------------------
# Bottom-up merge driver
# ---------------------------------------------------------------------------

def merge_bottom_up(subgraph: Subgraph, graph, per_method: dict[str, EnhancedCfg],
                    corpus: Corpus, reasoner: Reasoner,
                    reentry_cap: int = 1,
                    max_candidates: int = 10_000) -> tuple[list[LogSequence], MergeStats]:
    """Merge every root path of one subgraph into full log sequences."""
    stats = MergeStats()
    root_fq = graph.by_id[subgraph.root].fq_name
    root_cfg = per_method.get(root_fq)
    sequences: list[LogSequence] = []
    if root_cfg is None:
        stats.errors.append(f"{root_fq}: no verified cfg for subgraph root")
        return sequences, stats

    domains = {p.name: corpus.meta.domain_for(p.name, p.type)
               for p in root_cfg.source.method.params}
    budget = [max_candidates]

    for kept in root_cfg.path_constraints:
        path_rejections: dict[str, int] = {}
        emitted_for_path = 0
        for tree, dispatch in _expand_path(root_cfg, kept.path, per_method,
                                           corpus, (root_fq,), {}, reentry_cap,
                                           budget):
            if budget[0] <= 0:
                stats.truncated = True
                break
            budget[0] -= 1
            stats.candidates += 1
            try:
                replay = _symbolic_replay(tree, per_method, corpus)
            except _ReplayConflict as conflict:
                stats.rejected_structural += 1
                stats.count_reason(conflict.reason)
                path_rejections[conflict.reason] = \
                    path_rejections.get(conflict.reason, 0) + 1
                continue

            residual = [(a, req) for a, req, _ in replay.atoms]
            witness = first_satisfying(residual, domains)
            if witness is None:
                stats.rejected_infeasible += 1
                cross = any(c for _, _, c in replay.atoms)
                reason = "data-flow-conflict" if cross else "condition-conflict"
                stats.count_reason(reason)
                path_rejections[reason] = path_rejections.get(reason, 0) + 1
                continue
            witness = {k: v for k, v in witness.items() if v is not UNKNOWN}

            if not replay.events:
                stats.empty_projection += 1  # no log information to keep
                continue
            events = [_render_event(e, witness) for e in replay.events]
            context = replay.context
            context.bindings = dict(sorted(witness.items()))
            context.dispatch = dict(sorted(dispatch.items()))
            candidate = LogSequence(
                events=events, context=context, verdict=None,
                origin_subgraph=graph.by_id[subgraph.root].fq_name,
                root_method=root_fq, root_path_id=kept.path_id,
            )
            verdict = verify_merge(candidate, reasoner, domains)
            candidate.verdict = verdict
            if verdict.accepted:
                stats.accepted += 1
                emitted_for_path += 1
                sequences.append(candidate)
            else:
                stats.rejected_structural += 1
                for reason in verdict.reasons:
                    stats.count_reason(reason)
                    path_rejections[reason] = path_rejections.get(reason, 0) + 1
        if emitted_for_path == 0 and path_rejections:
            stats.errors.append(
                f"{root_fq} {kept.path_id}: all merge candidates rejected "
                f"({dict(sorted(path_rejections.items()))})")
    return sequences, stats


def _render_event(event: _SymbolicEvent, witness: dict) -> LogEvent:
    values = []
    incomplete = False
    for value in event.values:
        if value is UNKNOWN:
            values.append(UNKNOWN)
            incomplete = True
        elif isinstance(value, (bool, int, str)):
            values.append(value)
        else:
            try:
                concrete = eval_expr(value, dict(witness))
            except EvalError:
                concrete = UNKNOWN
            if concrete is UNKNOWN:
                incomplete = True
            values.append(concrete)
    rendered = render_template(event.template, values)
    bindings = tuple(
        (text, render_value(v)) for text, v in zip(event.param_texts, values))
    return LogEvent(
        fingerprint=event.fingerprint, rendered=rendered,
        template=event.template, source_method=event.source_method,
        source_node=event.source_node, bindings=bindings,
        incomplete=incomplete,
    )


# ---------------------------------------------------------------------------
# Optimization: dedup + integrity
# ---------------------------------------------------------------------------

def optimize_sequences(seqs: list[LogSequence],
                       per_method: Optional[dict[str, EnhancedCfg]] = None
                       ) -> list[LogSequence]:
    """Drop exact duplicates (same fingerprint list and constraint set) and
    sequences whose events reference log nodes absent from their graph;
    output order is deterministic."""
    kept: list[LogSequence] = []
    seen: set = set()
    for seq in sorted(seqs, key=lambda s: s.sort_key()):
        key = (tuple(seq.fingerprints()), seq.constraint_key())
        if key in seen:
            continue
        if per_method is not None and not _integrity_ok(seq, per_method):
            continue
        seen.add(key)
        kept.append(seq)
    return kept


def _integrity_ok(seq: LogSequence, per_method: dict[str, EnhancedCfg]) -> bool:
    for event in seq.events:
        cfg = per_method.get(event.source_method)
        if cfg is None:
            return False
        nodes = cfg.graph.nodes
        if event.source_node >= len(nodes):
            return False
        if nodes[event.source_node].kind is not NodeKind.LOG:
            return False
    return True
