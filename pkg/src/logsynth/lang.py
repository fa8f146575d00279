"""Frontend for the analyzed source subset (``.jsub`` files).

The subset is a small Java-like language: classes containing static or
instance methods, eight statement kinds (assignment, if/else, while, for,
switch, try/catch/finally, throw, call / log call, return), and expressions
over integers, strings, and booleans.  Logging statements follow the
positional-placeholder convention ``log.info("size={} user={}", n, u)``.

Dynamic dispatch is expressed with an explicit ``calldyn`` statement:
``calldyn AuditLogger.logAuditEvent(user);`` names an interface whose
candidate implementations are declared in the corpus metadata, giving the
later analysis stages something statically unresolvable to complete.

Everything here is deterministic: the same bytes always parse to the same
tree, and :func:`pretty_print` emits a canonical rendering that re-parses to
a structurally equal tree.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

from .errors import JsubSyntaxError


class LogLevel(Enum):
    TRACE = "trace"
    DEBUG = "debug"
    INFO = "info"
    WARN = "warn"
    ERROR = "error"
    FATAL = "fatal"

    @property
    def severity(self) -> int:
        return list(LogLevel).index(self)


TYPE_NAMES = ("void", "int", "string", "boolean")
KEYWORDS = {
    "class", "static", "if", "else", "while", "for", "switch", "case",
    "default", "try", "catch", "finally", "throw", "throws", "return",
    "calldyn", "true", "false", "log",
} | set(TYPE_NAMES)


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class StrLit:
    value: str


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "!" or "-"
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[IntLit, StrLit, BoolLit, Var, Unary, Binary]


def expr_vars(expr: Expr) -> list[str]:
    """Variable names referenced by an expression, in reading order."""
    out: list[str] = []

    def walk(e: Expr) -> None:
        if isinstance(e, Var):
            if e.name not in out:
                out.append(e.name)
        elif isinstance(e, Unary):
            walk(e.operand)
        elif isinstance(e, Binary):
            walk(e.left)
            walk(e.right)

    walk(expr)
    return out


# ---------------------------------------------------------------------------
# Statements
# ---------------------------------------------------------------------------

@dataclass
class Call:
    """A call site: ``Cls.m(a, b)``, ``m(a)`` (same class) or ``calldyn I.m(a)``."""

    cls: Optional[str]
    name: str
    args: list[Expr]
    dynamic: bool
    line: int

    @property
    def arity(self) -> int:
        return len(self.args)


@dataclass
class Assign:
    target: str
    value: Union[Expr, Call]
    decl_type: Optional[str]
    line: int


@dataclass
class If:
    cond: Expr
    then: "Block"
    orelse: Optional["Block"]
    line: int


@dataclass
class While:
    cond: Expr
    body: "Block"
    line: int


@dataclass
class For:
    init: Optional[Assign]
    cond: Expr
    update: Optional[Assign]
    body: "Block"
    line: int


@dataclass
class SwitchCase:
    match: Union[IntLit, StrLit]
    body: "Block"


@dataclass
class Switch:
    scrutinee: Expr
    cases: list[SwitchCase]
    default: Optional["Block"]
    line: int


@dataclass
class Catch:
    etype: str
    var: str
    body: "Block"
    line: int


@dataclass
class Try:
    body: "Block"
    catches: list[Catch]
    finally_body: Optional["Block"]
    line: int


@dataclass
class Throw:
    etype: str
    rethrown_var: Optional[str]  # set when written as `throw e;` inside a catch
    line: int


@dataclass
class CallStmt:
    call: Call
    line: int


@dataclass
class LogCall:
    level: LogLevel
    template: str
    params: list[Expr]
    line: int

    @property
    def placeholder_count(self) -> int:
        return self.template.count("{}")


@dataclass
class Return:
    value: Optional[Expr]
    line: int


Stmt = Union[Assign, If, While, For, Switch, Try, Throw, CallStmt, LogCall, Return]


@dataclass
class Block:
    stmts: list[Stmt] = field(default_factory=list)


@dataclass
class Param:
    type: str
    name: str


@dataclass
class Method:
    name: str
    params: list[Param]
    ret_type: str
    static: bool
    throws: list[str]
    body: Block
    line: int
    end_line: int

    @property
    def arity(self) -> int:
        return len(self.params)


@dataclass
class ClassDecl:
    name: str
    methods: list[Method]
    file: str
    line: int


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Token:
    kind: str  # IDENT, INT, STRING, PUNCT, EOF
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>&&|\|\||==|!=|<=|>=|[{}()\[\];:,.<>+\-*/%=!])
    """,
    re.VERBOSE,
)


def tokenize(text: str, file: str) -> list[Token]:
    tokens: list[Token] = []
    line = 1
    line_start = 0
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise JsubSyntaxError(
                f"unexpected character {text[pos]!r}", file, line, pos - line_start + 1
            )
        kind = m.lastgroup
        value = m.group()
        col = pos - line_start + 1
        if kind in ("ws", "comment"):
            nl = value.count("\n")
            if nl:
                line += nl
                line_start = pos + value.rfind("\n") + 1
        elif kind == "string":
            tokens.append(Token("STRING", value, line, col))
        elif kind == "int":
            tokens.append(Token("INT", value, line, col))
        elif kind == "ident":
            tokens.append(Token("IDENT", value, line, col))
        else:
            tokens.append(Token("PUNCT", value, line, col))
        pos = m.end()
    tokens.append(Token("EOF", "", line, n - line_start + 1))
    return tokens


def _unquote(raw: str) -> str:
    body = raw[1:-1]
    return body.replace('\\"', '"').replace("\\\\", "\\")


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, tokens: list[Token], file: str):
        self.tokens = tokens
        self.file = file
        self.pos = 0
        self.catch_vars: list[tuple[str, str]] = []  # (var, exception type) scopes

    # -- token plumbing ----------------------------------------------------

    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def error(self, message: str, tok: Optional[Token] = None) -> JsubSyntaxError:
        tok = tok or self.peek()
        return JsubSyntaxError(message, self.file, tok.line, tok.col)

    def expect(self, text: str) -> Token:
        tok = self.peek()
        if tok.text != text:
            raise self.error(f"expected {text!r}, found {tok.text!r}")
        return self.advance()

    def expect_ident(self) -> Token:
        tok = self.peek()
        if tok.kind != "IDENT" or tok.text in KEYWORDS:
            raise self.error(f"expected identifier, found {tok.text!r}")
        return self.advance()

    def at(self, text: str, offset: int = 0) -> bool:
        return self.peek(offset).text == text

    # -- grammar -----------------------------------------------------------

    def parse_file(self) -> list[ClassDecl]:
        classes = []
        while not self.peek().kind == "EOF":
            classes.append(self.parse_class())
        return classes

    def parse_class(self) -> ClassDecl:
        start = self.expect("class")
        name = self.expect_ident().text
        self.expect("{")
        methods = []
        while not self.at("}"):
            methods.append(self.parse_method())
        self.expect("}")
        return ClassDecl(name, methods, self.file, start.line)

    def parse_method(self) -> Method:
        start = self.peek()
        static = False
        if self.at("static"):
            static = True
            self.advance()
        rtok = self.peek()
        if rtok.text not in TYPE_NAMES:
            raise self.error(f"expected return type, found {rtok.text!r}")
        self.advance()
        name = self.expect_ident().text
        self.expect("(")
        params = []
        if not self.at(")"):
            while True:
                ptok = self.peek()
                if ptok.text not in TYPE_NAMES or ptok.text == "void":
                    raise self.error(f"expected parameter type, found {ptok.text!r}")
                self.advance()
                pname = self.expect_ident().text
                params.append(Param(ptok.text, pname))
                if self.at(","):
                    self.advance()
                    continue
                break
        self.expect(")")
        throws = []
        if self.at("throws"):
            self.advance()
            throws.append(self.expect_ident().text)
            while self.at(","):
                self.advance()
                throws.append(self.expect_ident().text)
        body = self.parse_block()
        end_line = self.tokens[self.pos - 1].line
        return Method(name, params, rtok.text, static, throws, body, start.line, end_line)

    def parse_block(self) -> Block:
        self.expect("{")
        stmts = []
        while not self.at("}"):
            stmts.append(self.parse_stmt())
        self.expect("}")
        return Block(stmts)

    def parse_stmt(self) -> Stmt:
        tok = self.peek()
        if tok.text == "if":
            return self.parse_if()
        if tok.text == "while":
            return self.parse_while()
        if tok.text == "for":
            return self.parse_for()
        if tok.text == "switch":
            return self.parse_switch()
        if tok.text == "try":
            return self.parse_try()
        if tok.text == "throw":
            return self.parse_throw()
        if tok.text == "return":
            return self.parse_return()
        if tok.text == "log" and self.at(".", 1):
            return self.parse_log()
        if tok.text == "calldyn":
            call = self.parse_call()
            self.expect(";")
            return CallStmt(call, tok.line)
        if tok.text in TYPE_NAMES and tok.text != "void":
            # typed local declaration: `int x = ...;`
            self.advance()
            target = self.expect_ident().text
            self.expect("=")
            value = self.parse_assign_rhs()
            self.expect(";")
            return Assign(target, value, tok.text, tok.line)
        if tok.kind == "IDENT" and tok.text not in KEYWORDS:
            if self.at("=", 1):
                self.advance()
                self.expect("=")
                value = self.parse_assign_rhs()
                self.expect(";")
                return Assign(tok.text, value, None, tok.line)
            if self.at("(", 1) or (self.at(".", 1) and self.peek(3).text == "("):
                call = self.parse_call()
                self.expect(";")
                return CallStmt(call, tok.line)
        raise self.error(f"unexpected token {tok.text!r} at statement start")

    def parse_assign_rhs(self) -> Union[Expr, Call]:
        tok = self.peek()
        if tok.text == "calldyn":
            return self.parse_call()
        if tok.kind == "IDENT" and tok.text not in KEYWORDS:
            if self.at("(", 1) or (self.at(".", 1) and self.peek(3).text == "("):
                return self.parse_call()
        return self.parse_expr()

    def parse_call(self) -> Call:
        tok = self.peek()
        dynamic = False
        if tok.text == "calldyn":
            dynamic = True
            self.advance()
        first = self.expect_ident()
        cls: Optional[str] = None
        name = first.text
        if self.at("."):
            self.advance()
            cls = first.text
            name = self.expect_ident().text
        elif dynamic:
            raise self.error("calldyn requires an interface-qualified target", first)
        self.expect("(")
        args = []
        if not self.at(")"):
            args.append(self.parse_expr())
            while self.at(","):
                self.advance()
                args.append(self.parse_expr())
        self.expect(")")
        return Call(cls, name, args, dynamic, tok.line)

    def parse_if(self) -> If:
        tok = self.expect("if")
        self.expect("(")
        cond = self.parse_expr()
        self.expect(")")
        then = self.parse_block()
        orelse = None
        if self.at("else"):
            self.advance()
            if self.at("if"):
                orelse = Block([self.parse_if()])
            else:
                orelse = self.parse_block()
        return If(cond, then, orelse, tok.line)

    def parse_while(self) -> While:
        tok = self.expect("while")
        self.expect("(")
        cond = self.parse_expr()
        self.expect(")")
        return While(cond, self.parse_block(), tok.line)

    def parse_for(self) -> For:
        tok = self.expect("for")
        self.expect("(")
        init = None
        if not self.at(";"):
            init = self.parse_simple_assign()
        self.expect(";")
        cond = self.parse_expr()
        self.expect(";")
        update = None
        if not self.at(")"):
            update = self.parse_simple_assign()
        self.expect(")")
        return For(init, cond, update, self.parse_block(), tok.line)

    def parse_simple_assign(self) -> Assign:
        tok = self.peek()
        decl_type = None
        if tok.text in TYPE_NAMES and tok.text != "void":
            decl_type = tok.text
            self.advance()
        target = self.expect_ident().text
        self.expect("=")
        value = self.parse_expr()
        return Assign(target, value, decl_type, tok.line)

    def parse_switch(self) -> Switch:
        tok = self.expect("switch")
        self.expect("(")
        scrutinee = self.parse_expr()
        self.expect(")")
        self.expect("{")
        cases = []
        default = None
        while not self.at("}"):
            if self.at("case"):
                self.advance()
                lit_tok = self.peek()
                if lit_tok.kind == "INT":
                    self.advance()
                    match: Union[IntLit, StrLit] = IntLit(int(lit_tok.text))
                elif lit_tok.kind == "STRING":
                    self.advance()
                    match = StrLit(_unquote(lit_tok.text))
                else:
                    raise self.error("case label must be an int or string literal")
                self.expect(":")
                cases.append(SwitchCase(match, self.parse_block()))
            elif self.at("default"):
                if default is not None:
                    raise self.error("duplicate default clause")
                self.advance()
                self.expect(":")
                default = self.parse_block()
            else:
                raise self.error(f"expected case/default, found {self.peek().text!r}")
        self.expect("}")
        return Switch(scrutinee, cases, default, tok.line)

    def parse_try(self) -> Try:
        tok = self.expect("try")
        body = self.parse_block()
        catches = []
        while self.at("catch"):
            ctok = self.advance()
            self.expect("(")
            etype = self.expect_ident().text
            var = self.expect_ident().text
            self.expect(")")
            self.catch_vars.append((var, etype))
            cbody = self.parse_block()
            self.catch_vars.pop()
            catches.append(Catch(etype, var, cbody, ctok.line))
        finally_body = None
        if self.at("finally"):
            self.advance()
            finally_body = self.parse_block()
        if not catches and finally_body is None:
            raise self.error("try requires at least one catch or a finally", tok)
        return Try(body, catches, finally_body, tok.line)

    def parse_throw(self) -> Throw:
        tok = self.expect("throw")
        name = self.expect_ident().text
        self.expect(";")
        for var, etype in reversed(self.catch_vars):
            if var == name:
                return Throw(etype, name, tok.line)
        return Throw(name, None, tok.line)

    def parse_return(self) -> Return:
        tok = self.expect("return")
        value = None
        if not self.at(";"):
            value = self.parse_expr()
        self.expect(";")
        return Return(value, tok.line)

    def parse_log(self) -> LogCall:
        tok = self.expect("log")
        self.expect(".")
        level_tok = self.expect_ident()
        try:
            level = LogLevel(level_tok.text)
        except ValueError:
            raise self.error(f"unknown log level {level_tok.text!r}", level_tok)
        self.expect("(")
        tmpl_tok = self.peek()
        if tmpl_tok.kind != "STRING":
            raise self.error("log template must be a string literal")
        self.advance()
        template = _unquote(tmpl_tok.text)
        params = []
        while self.at(","):
            self.advance()
            params.append(self.parse_expr())
        self.expect(")")
        self.expect(";")
        if template.count("{}") != len(params):
            raise self.error(
                f"template has {template.count('{}')} placeholders "
                f"but {len(params)} parameters",
                tmpl_tok,
            )
        return LogCall(level, template, params, tok.line)

    # -- expressions (precedence climbing) ----------------------------------

    def parse_expr(self) -> Expr:
        return self.parse_or()

    def parse_or(self) -> Expr:
        left = self.parse_and()
        while self.at("||"):
            self.advance()
            left = Binary("||", left, self.parse_and())
        return left

    def parse_and(self) -> Expr:
        left = self.parse_equality()
        while self.at("&&"):
            self.advance()
            left = Binary("&&", left, self.parse_equality())
        return left

    def parse_equality(self) -> Expr:
        left = self.parse_relational()
        while self.peek().text in ("==", "!="):
            op = self.advance().text
            left = Binary(op, left, self.parse_relational())
        return left

    def parse_relational(self) -> Expr:
        left = self.parse_additive()
        while self.peek().text in ("<", "<=", ">", ">="):
            op = self.advance().text
            left = Binary(op, left, self.parse_additive())
        return left

    def parse_additive(self) -> Expr:
        left = self.parse_multiplicative()
        while self.peek().text in ("+", "-"):
            op = self.advance().text
            left = Binary(op, left, self.parse_multiplicative())
        return left

    def parse_multiplicative(self) -> Expr:
        left = self.parse_unary()
        while self.peek().text in ("*", "/", "%"):
            op = self.advance().text
            left = Binary(op, left, self.parse_unary())
        return left

    def parse_unary(self) -> Expr:
        tok = self.peek()
        if tok.text in ("!", "-"):
            self.advance()
            return Unary(tok.text, self.parse_unary())
        return self.parse_primary()

    def parse_primary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "INT":
            self.advance()
            return IntLit(int(tok.text))
        if tok.kind == "STRING":
            self.advance()
            return StrLit(_unquote(tok.text))
        if tok.text == "true":
            self.advance()
            return BoolLit(True)
        if tok.text == "false":
            self.advance()
            return BoolLit(False)
        if tok.text == "(":
            self.advance()
            inner = self.parse_expr()
            self.expect(")")
            return inner
        if tok.kind == "IDENT" and tok.text not in KEYWORDS:
            self.advance()
            return Var(tok.text)
        raise self.error(f"unexpected token {tok.text!r} in expression")


def parse_source(text: str, file: str = "<string>") -> list[ClassDecl]:
    """Parse one source file into class declarations."""
    return _Parser(tokenize(text, file), file).parse_file()


def parse_expr_text(text: str) -> Expr:
    """Parse a standalone expression (used for serialized condition atoms)."""
    parser = _Parser(tokenize(text, "<expr>"), "<expr>")
    expr = parser.parse_expr()
    tok = parser.peek()
    if tok.kind != "EOF":
        raise JsubSyntaxError(f"trailing input {tok.text!r}", "<expr>",
                              tok.line, tok.col)
    return expr


# ---------------------------------------------------------------------------
# Pretty printer (canonical rendering; reparses to a structurally equal tree)
# ---------------------------------------------------------------------------

_PRECEDENCE = {
    "||": 1, "&&": 2, "==": 3, "!=": 3,
    "<": 4, "<=": 4, ">": 4, ">=": 4,
    "+": 5, "-": 5, "*": 6, "/": 6, "%": 6,
}


def format_expr(expr: Expr, parent_prec: int = 0) -> str:
    if isinstance(expr, IntLit):
        return str(expr.value)
    if isinstance(expr, StrLit):
        return _quote(expr.value)
    if isinstance(expr, BoolLit):
        return "true" if expr.value else "false"
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Unary):
        return expr.op + format_expr(expr.operand, 7)
    if isinstance(expr, Binary):
        prec = _PRECEDENCE[expr.op]
        inner = (
            f"{format_expr(expr.left, prec)} {expr.op} "
            f"{format_expr(expr.right, prec + 1)}"
        )
        return f"({inner})" if prec < parent_prec else inner
    raise TypeError(f"not an expression: {expr!r}")


def format_call(call: Call) -> str:
    head = "calldyn " if call.dynamic else ""
    target = f"{call.cls}.{call.name}" if call.cls else call.name
    args = ", ".join(format_expr(a) for a in call.args)
    return f"{head}{target}({args})"


class _Printer:
    def __init__(self) -> None:
        self.lines: list[str] = []
        self.depth = 0

    def emit(self, text: str) -> None:
        self.lines.append("    " * self.depth + text)

    def block(self, block: Block) -> None:
        self.depth += 1
        for stmt in block.stmts:
            self.stmt(stmt)
        self.depth -= 1

    def stmt(self, stmt: Stmt) -> None:
        if isinstance(stmt, Assign):
            prefix = f"{stmt.decl_type} " if stmt.decl_type else ""
            rhs = format_call(stmt.value) if isinstance(stmt.value, Call) else format_expr(stmt.value)
            self.emit(f"{prefix}{stmt.target} = {rhs};")
        elif isinstance(stmt, If):
            self.emit(f"if ({format_expr(stmt.cond)}) {{")
            self.block(stmt.then)
            if stmt.orelse is not None:
                self.emit("} else {")
                self.block(stmt.orelse)
            self.emit("}")
        elif isinstance(stmt, While):
            self.emit(f"while ({format_expr(stmt.cond)}) {{")
            self.block(stmt.body)
            self.emit("}")
        elif isinstance(stmt, For):
            init = self._assign_inline(stmt.init) if stmt.init else ""
            update = self._assign_inline(stmt.update) if stmt.update else ""
            self.emit(f"for ({init}; {format_expr(stmt.cond)}; {update}) {{")
            self.block(stmt.body)
            self.emit("}")
        elif isinstance(stmt, Switch):
            self.emit(f"switch ({format_expr(stmt.scrutinee)}) {{")
            self.depth += 1
            for case in stmt.cases:
                self.emit(f"case {format_expr(case.match)}: {{")
                self.block(case.body)
                self.emit("}")
            if stmt.default is not None:
                self.emit("default: {")
                self.block(stmt.default)
                self.emit("}")
            self.depth -= 1
            self.emit("}")
        elif isinstance(stmt, Try):
            self.emit("try {")
            self.block(stmt.body)
            for catch in stmt.catches:
                self.emit(f"}} catch ({catch.etype} {catch.var}) {{")
                self.block(catch.body)
            if stmt.finally_body is not None:
                self.emit("} finally {")
                self.block(stmt.finally_body)
            self.emit("}")
        elif isinstance(stmt, Throw):
            self.emit(f"throw {stmt.rethrown_var or stmt.etype};")
        elif isinstance(stmt, CallStmt):
            self.emit(f"{format_call(stmt.call)};")
        elif isinstance(stmt, LogCall):
            parts = [_quote(stmt.template)] + [format_expr(p) for p in stmt.params]
            self.emit(f"log.{stmt.level.value}({', '.join(parts)});")
        elif isinstance(stmt, Return):
            if stmt.value is None:
                self.emit("return;")
            else:
                self.emit(f"return {format_expr(stmt.value)};")
        else:
            raise TypeError(f"not a statement: {stmt!r}")

    def _assign_inline(self, a: Assign) -> str:
        prefix = f"{a.decl_type} " if a.decl_type else ""
        assert not isinstance(a.value, Call)
        return f"{prefix}{a.target} = {format_expr(a.value)}"


def pretty_print(classes: list[ClassDecl]) -> str:
    """Render class declarations in canonical form."""
    p = _Printer()
    for cls in classes:
        p.emit(f"class {cls.name} {{")
        p.depth += 1
        for m in cls.methods:
            static = "static " if m.static else ""
            params = ", ".join(f"{q.type} {q.name}" for q in m.params)
            throws = f" throws {', '.join(m.throws)}" if m.throws else ""
            p.emit(f"{static}{m.ret_type} {m.name}({params}){throws} {{")
            p.block(m.body)
            p.emit("}")
        p.depth -= 1
        p.emit("}")
    return "\n".join(p.lines) + "\n"


# ---------------------------------------------------------------------------
# Structural identity (ignores line numbers and file names)
# ---------------------------------------------------------------------------

def structure(node) -> object:
    """Position-independent structural key, used for round-trip comparison."""
    if isinstance(node, ClassDecl):
        return ("class", node.name, tuple(structure(m) for m in node.methods))
    if isinstance(node, Method):
        return (
            "method", node.name, tuple((p.type, p.name) for p in node.params),
            node.ret_type, node.static, tuple(node.throws), structure(node.body),
        )
    if isinstance(node, Block):
        return tuple(structure(s) for s in node.stmts)
    if isinstance(node, Assign):
        return ("assign", node.target, node.decl_type, structure(node.value))
    if isinstance(node, If):
        return ("if", structure(node.cond), structure(node.then),
                structure(node.orelse) if node.orelse else None)
    if isinstance(node, While):
        return ("while", structure(node.cond), structure(node.body))
    if isinstance(node, For):
        return ("for", structure(node.init) if node.init else None,
                structure(node.cond),
                structure(node.update) if node.update else None,
                structure(node.body))
    if isinstance(node, Switch):
        return ("switch", structure(node.scrutinee),
                tuple((structure(c.match), structure(c.body)) for c in node.cases),
                structure(node.default) if node.default else None)
    if isinstance(node, Try):
        return ("try", structure(node.body),
                tuple((c.etype, c.var, structure(c.body)) for c in node.catches),
                structure(node.finally_body) if node.finally_body else None)
    if isinstance(node, Throw):
        return ("throw", node.etype, node.rethrown_var)
    if isinstance(node, CallStmt):
        return ("callstmt", structure(node.call))
    if isinstance(node, Call):
        return ("call", node.cls, node.name, node.dynamic,
                tuple(structure(a) for a in node.args))
    if isinstance(node, LogCall):
        return ("log", node.level.value, node.template,
                tuple(structure(p) for p in node.params))
    if isinstance(node, Return):
        return ("return", structure(node.value) if node.value else None)
    if isinstance(node, (IntLit, StrLit, BoolLit)):
        return (type(node).__name__, node.value)
    if isinstance(node, Var):
        return ("var", node.name)
    if isinstance(node, Unary):
        return ("unary", node.op, structure(node.operand))
    if isinstance(node, Binary):
        return ("binary", node.op, structure(node.left), structure(node.right))
    raise TypeError(f"no structural key for {node!r}")


# ---------------------------------------------------------------------------
# JSON round-trip for statement trees (pipeline artifacts)
# ---------------------------------------------------------------------------

def stmt_to_dict(node) -> object:
    if isinstance(node, Block):
        return [stmt_to_dict(s) for s in node.stmts]
    if isinstance(node, Assign):
        return {"k": "assign", "target": node.target, "decl": node.decl_type,
                "value": stmt_to_dict(node.value), "line": node.line}
    if isinstance(node, If):
        return {"k": "if", "cond": stmt_to_dict(node.cond),
                "then": stmt_to_dict(node.then),
                "else": stmt_to_dict(node.orelse) if node.orelse else None,
                "line": node.line}
    if isinstance(node, While):
        return {"k": "while", "cond": stmt_to_dict(node.cond),
                "body": stmt_to_dict(node.body), "line": node.line}
    if isinstance(node, For):
        return {"k": "for",
                "init": stmt_to_dict(node.init) if node.init else None,
                "cond": stmt_to_dict(node.cond),
                "update": stmt_to_dict(node.update) if node.update else None,
                "body": stmt_to_dict(node.body), "line": node.line}
    if isinstance(node, Switch):
        return {"k": "switch", "scrutinee": stmt_to_dict(node.scrutinee),
                "cases": [[stmt_to_dict(c.match), stmt_to_dict(c.body)]
                          for c in node.cases],
                "default": stmt_to_dict(node.default) if node.default else None,
                "line": node.line}
    if isinstance(node, Try):
        return {"k": "try", "body": stmt_to_dict(node.body),
                "catches": [[c.etype, c.var, stmt_to_dict(c.body), c.line]
                            for c in node.catches],
                "finally": stmt_to_dict(node.finally_body)
                           if node.finally_body else None,
                "line": node.line}
    if isinstance(node, Throw):
        return {"k": "throw", "etype": node.etype, "var": node.rethrown_var,
                "line": node.line}
    if isinstance(node, CallStmt):
        return {"k": "callstmt", "call": stmt_to_dict(node.call), "line": node.line}
    if isinstance(node, Call):
        return {"k": "callexpr", "cls": node.cls, "name": node.name,
                "args": [stmt_to_dict(a) for a in node.args],
                "dynamic": node.dynamic, "line": node.line}
    if isinstance(node, LogCall):
        return {"k": "log", "level": node.level.value, "template": node.template,
                "params": [stmt_to_dict(p) for p in node.params], "line": node.line}
    if isinstance(node, Return):
        return {"k": "return",
                "value": stmt_to_dict(node.value) if node.value else None,
                "line": node.line}
    if isinstance(node, IntLit):
        return {"k": "int", "v": node.value}
    if isinstance(node, StrLit):
        return {"k": "str", "v": node.value}
    if isinstance(node, BoolLit):
        return {"k": "bool", "v": node.value}
    if isinstance(node, Var):
        return {"k": "var", "name": node.name}
    if isinstance(node, Unary):
        return {"k": "unary", "op": node.op, "operand": stmt_to_dict(node.operand)}
    if isinstance(node, Binary):
        return {"k": "binary", "op": node.op, "left": stmt_to_dict(node.left),
                "right": stmt_to_dict(node.right)}
    raise TypeError(f"not serializable: {node!r}")


def stmt_from_dict(data):
    if isinstance(data, list):
        return Block([stmt_from_dict(s) for s in data])
    k = data["k"]
    if k == "assign":
        return Assign(data["target"], stmt_from_dict(data["value"]),
                      data["decl"], data["line"])
    if k == "if":
        return If(stmt_from_dict(data["cond"]), stmt_from_dict(data["then"]),
                  stmt_from_dict(data["else"]) if data["else"] is not None else None,
                  data["line"])
    if k == "while":
        return While(stmt_from_dict(data["cond"]), stmt_from_dict(data["body"]),
                     data["line"])
    if k == "for":
        return For(stmt_from_dict(data["init"]) if data["init"] is not None else None,
                   stmt_from_dict(data["cond"]),
                   stmt_from_dict(data["update"]) if data["update"] is not None else None,
                   stmt_from_dict(data["body"]), data["line"])
    if k == "switch":
        return Switch(stmt_from_dict(data["scrutinee"]),
                      [SwitchCase(stmt_from_dict(m), stmt_from_dict(b))
                       for m, b in data["cases"]],
                      stmt_from_dict(data["default"])
                      if data["default"] is not None else None,
                      data["line"])
    if k == "try":
        return Try(stmt_from_dict(data["body"]),
                   [Catch(e, v, stmt_from_dict(b), ln)
                    for e, v, b, ln in data["catches"]],
                   stmt_from_dict(data["finally"])
                   if data["finally"] is not None else None,
                   data["line"])
    if k == "throw":
        return Throw(data["etype"], data["var"], data["line"])
    if k == "callstmt":
        return CallStmt(stmt_from_dict(data["call"]), data["line"])
    if k == "callexpr":
        return Call(data["cls"], data["name"],
                    [stmt_from_dict(a) for a in data["args"]],
                    data["dynamic"], data["line"])
    if k == "log":
        return LogCall(LogLevel(data["level"]), data["template"],
                       [stmt_from_dict(p) for p in data["params"]], data["line"])
    if k == "return":
        return Return(stmt_from_dict(data["value"])
                      if data["value"] is not None else None, data["line"])
    if k == "int":
        return IntLit(data["v"])
    if k == "str":
        return StrLit(data["v"])
    if k == "bool":
        return BoolLit(data["v"])
    if k == "var":
        return Var(data["name"])
    if k == "unary":
        return Unary(data["op"], stmt_from_dict(data["operand"]))
    if k == "binary":
        return Binary(data["op"], stmt_from_dict(data["left"]),
                      stmt_from_dict(data["right"]))
    raise ValueError(f"unknown node kind {k!r}")
