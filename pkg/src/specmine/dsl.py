"""The rule DSL: grammar instantiation, parsing, and statement utilities.

A statement is one primary-predicate application, optionally guarded by an
``if`` condition over normal predicates, terminated by ``;``::

    ThrowsOnUnauthorized("transferFrom", "AuthorizationCondition");
    MintsTokens(f, t, a) if Optional(f) and not Returns(f, v);

The grammar is the fixed template below specialized with one alternative per
predicate. Rendering is bit-stable for a given (sorts, predicates) input, so
the grammar text itself is a reproducible artifact. The parser is a
recursive-descent implementation of the same grammar with a closed-world
lexicon: predicate names are keywords, unknown names never parse.

Lexing follows the grammar's terminal semantics: longest match wins, and a
keyword (including every predicate name and ``TargetAttr``) beats the
identifier token VAR on equal-length matches.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from .errors import DuplicatePredicateName, NoPrimaryPredicate, ParseError, PathError
from .grammar import Predicate, Sort

# ---------------------------------------------------------------------------
# Fixed grammar template
# ---------------------------------------------------------------------------

TEMPLATE_HEADER = '''// ===== Base tokens =====

VAR: /[A-Za-z_][A-Za-z0-9_]*/

TRUE: "true"
FALSE: "false"

COMMA: ","

// ===== Target Attribute Selector =====
target_attr_selector: "TargetAttr" LPAREN ESCAPED_STRING RPAREN  // e.g., TargetAttr("<JSONPath>")

// A simple value type used as predicate arguments.
?value: ESCAPED_STRING
      | SIGNED_NUMBER
      | TRUE
      | FALSE
      | VAR
      | target_attr_selector

// ===== DSL entry =====
?start: stmt+

stmt: check (IF condition)? SEMI

IF: "if"
SEMI: ";"

// ===== Condition boolean expression =====
?condition: or_expr

?or_expr: and_expr
       | or_expr OR and_expr   -> or

?and_expr: not_expr
        | and_expr AND not_expr -> and

?not_expr: atom
        | NOT not_expr          -> not

?atom: LPAREN condition RPAREN -> group
     | cond_atom

OR: "or"
AND: "and"
NOT: "not"

LPAREN: "("
RPAREN: ")"
'''

# Definitions for the terminals the template pulls from the standard
# library; appended so the rendered grammar is self-contained for any
# grammar-driven loader.
TEMPLATE_FOOTER = """// ===== Standard terminals =====
%import common.ESCAPED_STRING
%import common.SIGNED_NUMBER
%import common.WS
%ignore WS
"""

KEYWORDS = {"true": "TRUE", "false": "FALSE", "if": "IF", "and": "AND", "or": "OR", "not": "NOT"}
TARGET_ATTR = "TargetAttr"


def _alternative(kind: str, pred: Predicate, index: int) -> tuple[str, str]:
    rule_name = f"{kind}_{pred.name.lower()}_{index}"
    slots = " COMMA value" * (pred.arity - 1)
    line = f'{rule_name}: "{pred.name}" LPAREN value{slots} RPAREN  // - {pred.signature()}: {pred.description}'
    return rule_name, line


@dataclass(frozen=True)
class InducedGrammar:
    """The fixed template specialized with a run's sorts and predicates."""

    sorts: tuple[Sort, ...]
    predicates: tuple[Predicate, ...]
    rendered_ebnf: str

    @property
    def primary(self) -> dict[str, Predicate]:
        return {p.name: p for p in self.predicates if p.primary}

    @property
    def normal(self) -> dict[str, Predicate]:
        return {p.name: p for p in self.predicates if not p.primary}

    def lookup(self, name: str) -> Predicate | None:
        for pred in self.predicates:
            if pred.name == name:
                return pred
        return None


def instantiate(sorts: Sequence[Sort], predicates: Sequence[Predicate]) -> InducedGrammar:
    """Render the concrete grammar for this predicate set.

    Each primary predicate becomes one ``check`` alternative, each normal
    predicate one ``cond_atom`` alternative; every alternative fixes the
    predicate's exact arity. With no normal predicates the ``cond_atom``
    section is omitted and conditions are unusable.
    """
    names = [pred.name for pred in predicates]
    duplicates = {name for name in names if names.count(name) > 1}
    if duplicates:
        raise DuplicatePredicateName(f"duplicate predicate names: {sorted(duplicates)}")
    primaries = [pred for pred in predicates if pred.primary]
    normals = [pred for pred in predicates if not pred.primary]
    if not primaries:
        raise NoPrimaryPredicate("the grammar needs at least one primary predicate for its check rule")

    primary_rules = [_alternative("primary", pred, i) for i, pred in enumerate(primaries)]
    normal_rules = [_alternative("cond", pred, i) for i, pred in enumerate(normals)]

    sections = [TEMPLATE_HEADER]
    sections.append("?check: " + " | ".join(rule for rule, _ in primary_rules) + "\n")
    sections.append("\n".join(line for _, line in primary_rules) + "\n")
    if normal_rules:
        sections.append("?cond_atom: " + " | ".join(rule for rule, _ in normal_rules) + "\n")
        sections.append("\n".join(line for _, line in normal_rules) + "\n")
    sections.append(TEMPLATE_FOOTER)
    rendered = "\n".join(sections)
    return InducedGrammar(sorts=tuple(sorts), predicates=tuple(predicates), rendered_ebnf=rendered)


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

ESCAPED_STRING_RE = re.compile(r'"(?:\\.|[^"\\\n])*"')
SIGNED_NUMBER_RE = re.compile(r"[+-]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?")
IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
WS_RE = re.compile(r"[ \t\f\r\n]+")
PUNCT = {"(": "LPAREN", ")": "RPAREN", ",": "COMMA", ";": "SEMI"}


@dataclass(frozen=True)
class Token:
    kind: str
    lexeme: str
    position: int


def tokenize(text: str, predicate_names: frozenset[str] = frozenset()) -> list[Token]:
    """Lex a statement; predicate names and TargetAttr lex as keywords."""
    tokens: list[Token] = []
    pos = 0
    length = len(text)
    while pos < length:
        ws = WS_RE.match(text, pos)
        if ws:
            pos = ws.end()
            continue
        ident = IDENT_RE.match(text, pos)
        number = SIGNED_NUMBER_RE.match(text, pos)
        if ident and (not number or ident.end() >= number.end()):
            lexeme = ident.group(0)
            if lexeme in KEYWORDS:
                kind = KEYWORDS[lexeme]
            elif lexeme == TARGET_ATTR:
                kind = "TATTR"
            elif lexeme in predicate_names:
                kind = "PRED"
            else:
                kind = "VAR"
            tokens.append(Token(kind, lexeme, pos))
            pos = ident.end()
            continue
        if number:
            tokens.append(Token("NUMBER", number.group(0), pos))
            pos = number.end()
            continue
        string = ESCAPED_STRING_RE.match(text, pos)
        if string:
            tokens.append(Token("STRING", string.group(0), pos))
            pos = string.end()
            continue
        if text[pos] in PUNCT:
            tokens.append(Token(PUNCT[text[pos]], text[pos], pos))
            pos += 1
            continue
        raise ParseError(f"unexpected character {text[pos]!r} at position {pos}", position=pos)
    tokens.append(Token("EOF", "", length))
    return tokens


def decode_string(lexeme: str) -> str:
    """Decode a double-quoted lexeme; unknown escapes keep the escaped char."""
    body = lexeme[1:-1]
    out: list[str] = []
    i = 0
    simple = {"n": "\n", "t": "\t", "r": "\r", '"': '"', "\\": "\\", "/": "/"}
    while i < len(body):
        ch = body[i]
        if ch == "\\" and i + 1 < len(body):
            out.append(simple.get(body[i + 1], body[i + 1]))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


# ---------------------------------------------------------------------------
# Parse tree
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StringValue:
    lexeme: str

    @property
    def value(self) -> str:
        return decode_string(self.lexeme)


@dataclass(frozen=True)
class NumberValue:
    lexeme: str

    @property
    def value(self) -> float:
        return float(self.lexeme)


@dataclass(frozen=True)
class BoolValue:
    lexeme: str

    @property
    def value(self) -> bool:
        return self.lexeme == "true"


@dataclass(frozen=True)
class VarValue:
    name: str


@dataclass(frozen=True)
class AttrSelector:
    """A ``TargetAttr("<JSONPath>")`` argument."""

    path_lexeme: str

    @property
    def path(self) -> str:
        return decode_string(self.path_lexeme)


@dataclass(frozen=True)
class PredicateApp:
    name: str
    args: tuple[object, ...]


@dataclass(frozen=True)
class NotExpr:
    operand: object


@dataclass(frozen=True)
class AndExpr:
    left: object
    right: object


@dataclass(frozen=True)
class OrExpr:
    left: object
    right: object


@dataclass(frozen=True)
class Group:
    inner: object


@dataclass(frozen=True)
class Statement:
    check: PredicateApp
    condition: object | None


@dataclass(frozen=True)
class DslStatement:
    text: str
    tree: Statement


# ---------------------------------------------------------------------------
# Recursive-descent parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, grammar: InducedGrammar, tokens: list[Token]) -> None:
        self.grammar = grammar
        self.tokens = tokens
        self.index = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.index]

    def advance(self) -> Token:
        token = self.current
        self.index += 1
        return token

    def fail(self, expected: tuple[str, ...], detail: str | None = None) -> ParseError:
        token = self.current
        found = token.lexeme or "end of input"
        message = detail or f"expected one of {{{', '.join(expected)}}} but found {found!r}"
        return ParseError(f"{message} at position {token.position}", position=token.position, expected=expected)

    def expect(self, kind: str, label: str) -> Token:
        if self.current.kind != kind:
            raise self.fail((label,))
        return self.advance()

    def parse_statement(self) -> Statement:
        check = self.parse_app(primary=True)
        condition = None
        if self.current.kind == "IF":
            self.advance()
            condition = self.parse_or()
        self.expect("SEMI", "';'")
        if self.current.kind != "EOF":
            raise self.fail(("end of input",), "expected exactly one statement; found trailing content")
        return Statement(check=check, condition=condition)

    def parse_app(self, primary: bool) -> PredicateApp:
        table = self.grammar.primary if primary else self.grammar.normal
        role = "primary" if primary else "non-primary"
        token = self.current
        if token.kind != "PRED":
            if token.kind == "VAR":
                raise self.fail(
                    (f"{role} predicate name",),
                    f"unknown predicate {token.lexeme!r}; the grammar declares {sorted(table)}",
                )
            raise self.fail((f"{role} predicate name",))
        if token.lexeme not in table:
            raise self.fail(
                (f"{role} predicate name",),
                f"predicate {token.lexeme!r} is not usable here; expected a {role} predicate from {sorted(table)}",
            )
        self.advance()
        predicate = table[token.lexeme]
        self.expect("LPAREN", "'('")
        args: list[object] = [self.parse_value()]
        while self.current.kind == "COMMA":
            self.advance()
            args.append(self.parse_value())
        closing = self.current
        self.expect("RPAREN", "')'")
        if len(args) != predicate.arity:
            raise ParseError(
                f"predicate {predicate.name!r} expects {predicate.arity} argument(s), got {len(args)} "
                f"at position {closing.position}",
                position=closing.position,
                expected=("argument count " + str(predicate.arity),),
            )
        return PredicateApp(name=predicate.name, args=tuple(args))

    def parse_value(self) -> object:
        token = self.current
        if token.kind == "STRING":
            self.advance()
            return StringValue(token.lexeme)
        if token.kind == "NUMBER":
            self.advance()
            return NumberValue(token.lexeme)
        if token.kind in ("TRUE", "FALSE"):
            self.advance()
            return BoolValue(token.lexeme)
        if token.kind == "VAR":
            self.advance()
            return VarValue(token.lexeme)
        if token.kind == "TATTR":
            self.advance()
            self.expect("LPAREN", "'('")
            path = self.expect("STRING", "escaped string")
            self.expect("RPAREN", "')'")
            return AttrSelector(path.lexeme)
        raise self.fail(("string", "number", "true", "false", "identifier", "TargetAttr(...)"))

    def parse_or(self) -> object:
        node = self.parse_and()
        while self.current.kind == "OR":
            self.advance()
            node = OrExpr(left=node, right=self.parse_and())
        return node

    def parse_and(self) -> object:
        node = self.parse_not()
        while self.current.kind == "AND":
            self.advance()
            node = AndExpr(left=node, right=self.parse_not())
        return node

    def parse_not(self) -> object:
        if self.current.kind == "NOT":
            self.advance()
            return NotExpr(operand=self.parse_not())
        return self.parse_atom()

    def parse_atom(self) -> object:
        if self.current.kind == "LPAREN":
            self.advance()
            inner = self.parse_or()
            self.expect("RPAREN", "')'")
            return Group(inner=inner)
        return self.parse_app(primary=False)


def parse(grammar: InducedGrammar, text: str) -> DslStatement:
    """Accept ``text`` iff it derives exactly one statement under ``grammar``."""
    names = frozenset(pred.name for pred in grammar.predicates)
    tokens = tokenize(text, names)
    tree = _Parser(grammar, tokens).parse_statement()
    return DslStatement(text=text, tree=tree)


# ---------------------------------------------------------------------------
# Rendering (round trip)
# ---------------------------------------------------------------------------


def _render_value(value: object) -> str:
    if isinstance(value, (StringValue, NumberValue, BoolValue)):
        return value.lexeme
    if isinstance(value, VarValue):
        return value.name
    if isinstance(value, AttrSelector):
        return f"TargetAttr({value.path_lexeme})"
    raise TypeError(f"not a value node: {value!r}")


def _render_expr(node: object) -> str:
    if isinstance(node, PredicateApp):
        return f"{node.name}({', '.join(_render_value(arg) for arg in node.args)})"
    if isinstance(node, NotExpr):
        return f"not {_render_expr(node.operand)}"
    if isinstance(node, AndExpr):
        return f"{_render_expr(node.left)} and {_render_expr(node.right)}"
    if isinstance(node, OrExpr):
        return f"{_render_expr(node.left)} or {_render_expr(node.right)}"
    if isinstance(node, Group):
        return f"({_render_expr(node.inner)})"
    raise TypeError(f"not an expression node: {node!r}")


def render_statement(tree: Statement) -> str:
    head = _render_expr(tree.check)
    if tree.condition is not None:
        return f"{head} if {_render_expr(tree.condition)};"
    return f"{head};"


# ---------------------------------------------------------------------------
# TargetAttr resolution (JSONPath subset)
# ---------------------------------------------------------------------------

_PATH_MEMBER = re.compile(r"\.([A-Za-z_][A-Za-z0-9_]*)")
_PATH_INDEX = re.compile(r"\[(-?\d+)\]")
_PATH_QUOTED = re.compile(r"\[(['\"])((?:\\.|[^\\])*?)\1\]")
_PATH_WILDCARD = re.compile(r"\[\*\]")


def _path_steps(path: str) -> list[object]:
    """Parse the supported JSONPath subset: $, .name, [i], ["name"], [*]."""
    if not path.startswith("$"):
        raise PathError(f"JSONPath must start with '$': {path!r}")
    steps: list[object] = []
    pos = 1
    while pos < len(path):
        member = _PATH_MEMBER.match(path, pos)
        if member:
            steps.append(member.group(1))
            pos = member.end()
            continue
        index = _PATH_INDEX.match(path, pos)
        if index:
            steps.append(int(index.group(1)))
            pos = index.end()
            continue
        quoted = _PATH_QUOTED.match(path, pos)
        if quoted:
            steps.append(quoted.group(2))
            pos = quoted.end()
            continue
        if _PATH_WILDCARD.match(path, pos):
            steps.append(None)  # wildcard
            pos += 3
            continue
        raise PathError(f"invalid JSONPath step at offset {pos} in {path!r}")
    return steps


def eval_path(path: str, root: object) -> list[object]:
    """Evaluate a selector; returns every matched node (possibly none)."""
    nodes: list[object] = [root]
    for step in _path_steps(path):
        matched: list[object] = []
        for node in nodes:
            if step is None:  # wildcard
                if isinstance(node, list):
                    matched.extend(node)
                elif isinstance(node, dict):
                    matched.extend(node.values())
            elif isinstance(step, int):
                if isinstance(node, list) and -len(node) <= step < len(node):
                    matched.append(node[step])
            else:
                if isinstance(node, dict) and step in node:
                    matched.append(node[step])
        nodes = matched
    return nodes


def collect_selectors(tree: Statement) -> list[AttrSelector]:
    found: list[AttrSelector] = []

    def walk(node: object) -> None:
        if isinstance(node, AttrSelector):
            found.append(node)
        elif isinstance(node, PredicateApp):
            for arg in node.args:
                walk(arg)
        elif isinstance(node, NotExpr):
            walk(node.operand)
        elif isinstance(node, (AndExpr, OrExpr)):
            walk(node.left)
            walk(node.right)
        elif isinstance(node, Group):
            walk(node.inner)

    walk(tree.check)
    if tree.condition is not None:
        walk(tree.condition)
    return found


def resolve_target_attr(stmt: DslStatement, values: dict) -> dict[str, object]:
    """Evaluate every TargetAttr selector in the statement against an
    attribute record; selectors that match nothing are omitted (the caller
    may warn). A syntactically invalid path raises PathError."""
    resolved: dict[str, object] = {}
    for selector in collect_selectors(stmt.tree):
        matches = eval_path(selector.path, values)
        if not matches:
            continue
        resolved[selector.path] = matches[0] if len(matches) == 1 else matches
    return resolved


def unresolved_selectors(stmt: DslStatement, values: dict) -> list[str]:
    return [
        selector.path
        for selector in collect_selectors(stmt.tree)
        if not eval_path(selector.path, values)
    ]


# ---------------------------------------------------------------------------
# Metrics support
# ---------------------------------------------------------------------------


def distinct_tokens(stmts: Sequence[DslStatement]) -> int:
    """Count distinct terminal lexemes across all statements."""
    lexemes: set[str] = set()
    for stmt in stmts:
        for token in tokenize(stmt.text):
            if token.kind != "EOF":
                lexemes.add(token.lexeme)
    return len(lexemes)
