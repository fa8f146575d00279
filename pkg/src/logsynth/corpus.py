"""Corpus assembly: parse ``.jsub`` sources into method-level statement trees.

A corpus is the analysis subject: every method body, every call site, and
every log statement found in the input files, plus the metadata sidecar
(``corpus.meta.json``) that declares dynamic-dispatch candidates, known
external methods, and finite value domains for variables.

The log statements enumerated here are the coverage denominator used by the
metrics stage.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

from . import lang
from .errors import DuplicateMethodError, LogsynthError
from .lang import Block, ClassDecl, LogCall, LogLevel, Method

META_FILENAME = "corpus.meta.json"

DEFAULT_DOMAINS = {
    "int": [0, 1, 2],
    "boolean": [False, True],
    "string": ["a", "b"],
}


def fq_name(class_name: str, method: Method) -> str:
    return f"{class_name}.{method.name}/{method.arity}"


@dataclass
class MethodSource:
    """One method with its statement tree and source location."""

    fq_name: str
    class_name: str
    method_name: str
    method: Method
    file: str
    start_line: int
    end_line: int

    @property
    def body(self) -> Block:
        return self.method.body

    @property
    def source_span(self) -> tuple[str, int, int]:
        return (self.file, self.start_line, self.end_line)


@dataclass(frozen=True)
class LogStatement:
    """One log call site; identity is (owner, position)."""

    owner: str
    level: LogLevel
    template: str
    param_exprs: tuple[str, ...]
    position: int
    file: str

    @property
    def api_call(self) -> str:
        return f"log.{self.level.value}"

    @property
    def fingerprint(self) -> str:
        cls, rest = self.owner.split(".", 1)
        method = rest.split("/", 1)[0]
        return f"<{cls}:{method}> [{self.level.name}]"


@dataclass
class CorpusMeta:
    """Sidecar metadata: dispatch candidates, externals, value domains."""

    interfaces: dict[str, list[str]] = field(default_factory=dict)
    external: list[str] = field(default_factory=list)
    domains: dict[str, list] = field(default_factory=dict)

    @classmethod
    def from_file(cls, path: Path) -> "CorpusMeta":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            interfaces=data.get("interfaces", {}),
            external=data.get("external", []),
            domains=data.get("domains", {}),
        )

    def to_dict(self) -> dict:
        return {
            "interfaces": self.interfaces,
            "external": self.external,
            "domains": self.domains,
        }

    def candidates(self, interface: str, method: str) -> list[str]:
        declared = self.interfaces.get(interface, [])
        return [c for c in declared if c.split(".", 1)[1].split("/", 1)[0] == method]

    def domain_for(self, name: str, type_hint: Optional[str] = None) -> list:
        if name in self.domains:
            return list(self.domains[name])
        return list(DEFAULT_DOMAINS.get(type_hint or "int", DEFAULT_DOMAINS["int"]))


@dataclass
class Corpus:
    """Parsed analysis subject; immutable once built."""

    classes: list[ClassDecl]
    source_index: dict[str, MethodSource]
    meta: CorpusMeta

    def methods(self) -> list[MethodSource]:
        return [self.source_index[k] for k in sorted(self.source_index)]

    def get(self, fq: str) -> Optional[MethodSource]:
        return self.source_index.get(fq)

    def resolve_call(self, caller_class: str, call: lang.Call) -> Optional[str]:
        """Resolve a static call site to a corpus fq_name, or None if absent."""
        cls = call.cls or caller_class
        fq = f"{cls}.{call.name}/{call.arity}"
        return fq if fq in self.source_index else None


def _walk_statements(block: Block) -> Iterable[lang.Stmt]:
    for stmt in block.stmts:
        yield stmt
        if isinstance(stmt, lang.If):
            yield from _walk_statements(stmt.then)
            if stmt.orelse:
                yield from _walk_statements(stmt.orelse)
        elif isinstance(stmt, lang.While):
            yield from _walk_statements(stmt.body)
        elif isinstance(stmt, lang.For):
            if stmt.init:
                yield stmt.init
            if stmt.update:
                yield stmt.update
            yield from _walk_statements(stmt.body)
        elif isinstance(stmt, lang.Switch):
            for case in stmt.cases:
                yield from _walk_statements(case.body)
            if stmt.default:
                yield from _walk_statements(stmt.default)
        elif isinstance(stmt, lang.Try):
            yield from _walk_statements(stmt.body)
            for catch in stmt.catches:
                yield from _walk_statements(catch.body)
            if stmt.finally_body:
                yield from _walk_statements(stmt.finally_body)


def iter_statements(method: Method) -> Iterable[lang.Stmt]:
    """All statements in a method body, preorder."""
    return _walk_statements(method.body)


def log_calls(method: Method) -> list[LogCall]:
    return [s for s in iter_statements(method) if isinstance(s, LogCall)]


def call_sites(method: Method) -> list[lang.Call]:
    out = []
    for s in iter_statements(method):
        if isinstance(s, lang.CallStmt):
            out.append(s.call)
        elif isinstance(s, lang.Assign) and isinstance(s.value, lang.Call):
            out.append(s.value)
    return out


def parse_corpus(paths: list, meta_path: Optional[Union[str, Path]] = None) -> Corpus:
    """Parse source files into a Corpus.

    Deterministic: the same input bytes always produce the same Corpus.  If
    ``meta_path`` is omitted, a ``corpus.meta.json`` next to the first source
    file is used when present.
    """
    classes: list[ClassDecl] = []
    index: dict[str, MethodSource] = {}
    for raw in paths:
        path = Path(raw)
        text = path.read_text(encoding="utf-8")
        for cls in lang.parse_source(text, str(path)):
            classes.append(cls)
            for m in cls.methods:
                fq = fq_name(cls.name, m)
                if fq in index:
                    prev = index[fq]
                    raise DuplicateMethodError(
                        f"{fq} defined in both {prev.file}:{prev.start_line} "
                        f"and {path}:{m.line}"
                    )
                index[fq] = MethodSource(
                    fq_name=fq,
                    class_name=cls.name,
                    method_name=m.name,
                    method=m,
                    file=str(path),
                    start_line=m.line,
                    end_line=m.end_line,
                )
    meta = CorpusMeta()
    if meta_path is not None:
        meta = CorpusMeta.from_file(Path(meta_path))
    elif paths:
        candidate = Path(paths[0]).parent / META_FILENAME
        if candidate.exists():
            meta = CorpusMeta.from_file(candidate)
    return Corpus(classes=classes, source_index=index, meta=meta)


def parse_corpus_text(named_sources: list[tuple[str, str]],
                      meta: Optional[CorpusMeta] = None) -> Corpus:
    """Parse in-memory (name, text) sources; used by tests and demos."""
    classes: list[ClassDecl] = []
    index: dict[str, MethodSource] = {}
    for name, text in named_sources:
        for cls in lang.parse_source(text, name):
            classes.append(cls)
            for m in cls.methods:
                fq = fq_name(cls.name, m)
                if fq in index:
                    raise DuplicateMethodError(f"{fq} defined twice")
                index[fq] = MethodSource(fq, cls.name, m.name, m, name,
                                         m.line, m.end_line)
    return Corpus(classes, index, meta or CorpusMeta())


def list_log_statements(corpus: Corpus) -> list[LogStatement]:
    """All log statements in deterministic (file, line) order."""
    out: list[LogStatement] = []
    for cls in corpus.classes:
        for m in cls.methods:
            owner = fq_name(cls.name, m)
            for call in log_calls(m):
                out.append(LogStatement(
                    owner=owner,
                    level=call.level,
                    template=call.template,
                    param_exprs=tuple(lang.format_expr(p) for p in call.params),
                    position=call.line,
                    file=cls.file,
                ))
    out.sort(key=lambda s: (s.file, s.position, s.owner))
    return out


def pretty_print_corpus(corpus: Corpus) -> str:
    """Canonical re-rendering of every class, grouped by source file."""
    by_file: dict[str, list[ClassDecl]] = {}
    for cls in corpus.classes:
        by_file.setdefault(cls.file, []).append(cls)
    chunks = [lang.pretty_print(by_file[f]) for f in sorted(by_file)]
    return "\n".join(chunks)


# ---------------------------------------------------------------------------
# Artifact serialization
# ---------------------------------------------------------------------------

def corpus_to_dict(corpus: Corpus) -> dict:
    return {
        "classes": [
            {
                "name": cls.name,
                "file": cls.file,
                "line": cls.line,
                "methods": [
                    {
                        "name": m.name,
                        "params": [[p.type, p.name] for p in m.params],
                        "ret_type": m.ret_type,
                        "static": m.static,
                        "throws": m.throws,
                        "line": m.line,
                        "end_line": m.end_line,
                        "body": lang.stmt_to_dict(m.body),
                    }
                    for m in cls.methods
                ],
            }
            for cls in corpus.classes
        ],
        "meta": corpus.meta.to_dict(),
    }


def corpus_from_dict(data: dict) -> Corpus:
    classes = []
    index: dict[str, MethodSource] = {}
    for c in data["classes"]:
        methods = []
        for m in c["methods"]:
            body = lang.stmt_from_dict(m["body"])
            methods.append(Method(
                name=m["name"],
                params=[lang.Param(t, n) for t, n in m["params"]],
                ret_type=m["ret_type"],
                static=m["static"],
                throws=list(m["throws"]),
                body=body,
                line=m["line"],
                end_line=m["end_line"],
            ))
        cls = ClassDecl(c["name"], methods, c["file"], c["line"])
        classes.append(cls)
        for m in methods:
            fq = fq_name(cls.name, m)
            if fq in index:
                raise LogsynthError(f"corrupt corpus artifact: duplicate {fq}")
            index[fq] = MethodSource(fq, cls.name, m.name, m, cls.file,
                                     m.line, m.end_line)
    meta_data = data.get("meta", {})
    meta = CorpusMeta(
        interfaces=meta_data.get("interfaces", {}),
        external=meta_data.get("external", []),
        domains=meta_data.get("domains", {}),
    )
    return Corpus(classes, index, meta)
