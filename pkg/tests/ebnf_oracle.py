"""Independent grammar-driven recognizer used as a parsing oracle.

Reads a rendered grammar.ebnf file generically (terminal definitions, rules
with |, ?, +, *, groups, aliases, %import/%ignore) and answers accept/reject
for input text via an Earley recognizer. Nothing here knows the shape of the
DSL template: everything is derived from the grammar text, so disagreements
with the hand-built parser indicate a real bug on one side.

Lexing semantics: longest match wins; on equal length a literal terminal
beats a regex terminal (keywords shadow identifiers).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

# Standard-library terminal definitions pulled in via %import common.<NAME>.
COMMON_TERMINALS = {
    "ESCAPED_STRING": r'"(?:\\.|[^"\\\n])*"',
    "SIGNED_NUMBER": r"[+-]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?",
    "WS": r"[ \t\f\r\n]+",
}


class OracleGrammarError(Exception):
    pass


def _strip_comment(line: str) -> str:
    in_string: str | None = None
    i = 0
    while i < len(line):
        ch = line[i]
        if in_string:
            if ch == "\\":
                i += 2
                continue
            if ch == in_string:
                in_string = None
        elif ch in "\"'/":
            if ch == "/" and line.startswith("//", i):
                return line[:i]
            in_string = ch if ch in "\"'" else "/"
        i += 1
    return line


def _statements(text: str) -> list[str]:
    """Group physical lines into definitions: indentation continues a statement."""
    statements: list[str] = []
    current: list[str] = []
    for raw in text.splitlines():
        line = _strip_comment(raw).rstrip()
        if not line.strip():
            continue
        if line[0].isspace():
            if not current:
                raise OracleGrammarError(f"continuation with no open statement: {raw!r}")
            current.append(line.strip())
        else:
            if current:
                statements.append(" ".join(current))
            current = [line.strip()]
    if current:
        statements.append(" ".join(current))
    return statements


# --- expansion parsing -------------------------------------------------------

_EXP_TOKEN = re.compile(
    r"""
    (?P<string>"(?:\\.|[^"\\])*")
  | (?P<regex>/(?:\\.|[^/\\])+/)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<arrow>->)
  | (?P<punct>[()|?+*])
  | (?P<space>\s+)
    """,
    re.VERBOSE,
)


def _exp_tokens(text: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    while pos < len(text):
        match = _EXP_TOKEN.match(text, pos)
        if not match:
            raise OracleGrammarError(f"cannot tokenize grammar expansion at {text[pos:pos+20]!r}")
        pos = match.end()
        kind = match.lastgroup
        if kind != "space":
            tokens.append((kind, match.group(0)))
    tokens.append(("eof", ""))
    return tokens


@dataclass
class _Symbol:
    """One grammar symbol: a terminal id or a nonterminal name."""

    name: str
    terminal: bool


class _ExpansionParser:
    """Parses ``a B "lit" (x | y)? z+`` into alternative lists of symbols,
    desugaring ?, +, * and groups into fresh nonterminals."""

    def __init__(self, grammar: "GrammarOracle", rule_name: str, text: str) -> None:
        self.grammar = grammar
        self.rule_name = rule_name
        self.tokens = _exp_tokens(text)
        self.index = 0
        self.fresh = 0

    def peek(self) -> tuple[str, str]:
        return self.tokens[self.index]

    def advance(self) -> tuple[str, str]:
        token = self.tokens[self.index]
        self.index += 1
        return token

    def parse_alternatives(self, stop_at_rparen: bool = False) -> list[list[_Symbol]]:
        alternatives = [self.parse_sequence()]
        while self.peek() == ("punct", "|"):
            self.advance()
            alternatives.append(self.parse_sequence())
        if stop_at_rparen:
            if self.peek() != ("punct", ")"):
                raise OracleGrammarError(f"expected ')' in {self.rule_name}")
            self.advance()
        return alternatives

    def parse_sequence(self) -> list[_Symbol]:
        symbols: list[_Symbol] = []
        while True:
            kind, value = self.peek()
            if kind == "eof" or (kind == "punct" and value in "|)"):
                break
            if kind == "arrow":  # alias: irrelevant for acceptance
                self.advance()
                self.advance()
                continue
            symbols.append(self.parse_item())
        return symbols

    def _fresh_rule(self, alternatives: list[list[_Symbol]]) -> _Symbol:
        self.fresh += 1
        name = f"__{self.rule_name}_{self.fresh}"
        self.grammar.rules[name] = alternatives
        return _Symbol(name=name, terminal=False)

    def parse_item(self) -> _Symbol:
        symbol = self.parse_atom()
        while True:
            kind, value = self.peek()
            if (kind, value) == ("punct", "?"):
                self.advance()
                symbol = self._fresh_rule([[symbol], []])
            elif (kind, value) == ("punct", "+"):
                self.advance()
                plus = self._fresh_rule([])
                self.grammar.rules[plus.name] = [[symbol], [plus, symbol]]
                symbol = plus
            elif (kind, value) == ("punct", "*"):
                self.advance()
                star = self._fresh_rule([])
                self.grammar.rules[star.name] = [[], [star, symbol]]
                symbol = star
            else:
                return symbol

    def parse_atom(self) -> _Symbol:
        kind, value = self.advance()
        if kind == "string":
            literal = _unescape_grammar_string(value)
            return _Symbol(name=self.grammar.add_literal(literal), terminal=True)
        if kind == "name":
            if value[0].isupper():
                return _Symbol(name=value, terminal=True)
            return _Symbol(name=value, terminal=False)
        if (kind, value) == ("punct", "("):
            return self._fresh_rule(self.parse_alternatives(stop_at_rparen=True))
        raise OracleGrammarError(f"unexpected {value!r} in expansion of {self.rule_name}")


def _unescape_grammar_string(lexeme: str) -> str:
    body = lexeme[1:-1]
    return body.replace("\\\\", "\\").replace('\\"', '"')


# --- the oracle --------------------------------------------------------------

_DEF_RE = re.compile(r"^(\??)([A-Za-z_][A-Za-z0-9_]*)\s*:\s*(.*)$")


class GrammarOracle:
    def __init__(self, grammar_text: str, start: str = "stmt") -> None:
        self.start = start
        self.rules: dict[str, list[list[_Symbol]]] = {}
        self.terminals: dict[str, tuple[str, str]] = {}  # name -> (kind, pattern)
        self.ignored: set[str] = set()
        self._literal_ids: dict[str, str] = {}
        pending_rules: list[tuple[str, str]] = []

        for statement in _statements(grammar_text):
            if statement.startswith("%import"):
                name = statement.split(".")[-1].strip()
                if name not in COMMON_TERMINALS:
                    raise OracleGrammarError(f"no common definition for {name}")
                self.terminals[name] = ("regex", COMMON_TERMINALS[name])
                continue
            if statement.startswith("%ignore"):
                self.ignored.add(statement.split()[-1])
                continue
            match = _DEF_RE.match(statement)
            if not match:
                raise OracleGrammarError(f"cannot parse grammar statement: {statement!r}")
            _, name, body = match.groups()
            if name[0].isupper():
                body = body.strip()
                if body.startswith('"') and body.endswith('"'):
                    self.terminals[name] = ("literal", _unescape_grammar_string(body))
                elif body.startswith("/") and body.endswith("/"):
                    self.terminals[name] = ("regex", body[1:-1])
                else:
                    raise OracleGrammarError(f"unsupported terminal definition: {statement!r}")
            else:
                pending_rules.append((name, body))

        for name, body in pending_rules:
            parser = _ExpansionParser(self, name, body)
            alternatives = parser.parse_alternatives()
            if parser.peek()[0] != "eof":
                raise OracleGrammarError(f"trailing content in rule {name}")
            self.rules[name] = alternatives

        if self.start not in self.rules:
            raise OracleGrammarError(f"start rule {self.start!r} not defined")
        self._nullable = self._compute_nullable()

    def add_literal(self, literal: str) -> str:
        if literal not in self._literal_ids:
            terminal_id = f"__LIT_{len(self._literal_ids)}"
            self._literal_ids[literal] = terminal_id
            self.terminals[terminal_id] = ("literal", literal)
        return self._literal_ids[literal]

    # -- lexer --

    def _lex(self, text: str) -> list[str] | None:
        """Token kinds for the input, or None when lexing fails."""
        compiled = {
            name: (kind, re.compile(pattern if kind == "regex" else re.escape(pattern)))
            for name, (kind, pattern) in self.terminals.items()
        }
        tokens: list[str] = []
        pos = 0
        while pos < len(text):
            best_name: str | None = None
            best_len = 0
            best_is_literal = False
            for name, (kind, regex) in compiled.items():
                match = regex.match(text, pos)
                if not match or match.end() == pos:
                    continue
                length = match.end() - pos
                is_literal = kind == "literal"
                if length > best_len or (length == best_len and is_literal and not best_is_literal):
                    best_name, best_len, best_is_literal = name, length, is_literal
            if best_name is None:
                return None
            if best_name not in self.ignored:
                tokens.append(best_name)
            pos += best_len
        return tokens

    # -- Earley recognizer --

    def _compute_nullable(self) -> set[str]:
        nullable: set[str] = set()
        changed = True
        while changed:
            changed = False
            for name, alternatives in self.rules.items():
                if name in nullable:
                    continue
                for alternative in alternatives:
                    if all((not s.terminal) and s.name in nullable for s in alternative):
                        nullable.add(name)
                        changed = True
                        break
        return nullable

    def accepts(self, text: str) -> bool:
        tokens = self._lex(text)
        if tokens is None:
            return False
        n = len(tokens)
        # Items: (rule_name, alt_index, dot, origin)
        charts: list[set[tuple[str, int, int, int]]] = [set() for _ in range(n + 1)]

        def add(chart_index: int, item: tuple[str, int, int, int], worklist: list) -> None:
            if item not in charts[chart_index]:
                charts[chart_index].add(item)
                worklist.append(item)

        seed: list[tuple[str, int, int, int]] = []
        for alt_index in range(len(self.rules[self.start])):
            add(0, (self.start, alt_index, 0, 0), seed)

        for i in range(n + 1):
            work = seed if i == 0 else list(charts[i])
            index = 0
            while index < len(work):
                rule_name, alt_index, dot, origin = work[index]
                index += 1
                alternative = self.rules[rule_name][alt_index]
                if dot < len(alternative):
                    symbol = alternative[dot]
                    if symbol.terminal:
                        if i < n and tokens[i] == symbol.name:
                            next_item = (rule_name, alt_index, dot + 1, origin)
                            if next_item not in charts[i + 1]:
                                charts[i + 1].add(next_item)
                    else:
                        for sub_alt in range(len(self.rules.get(symbol.name, []))):
                            add(i, (symbol.name, sub_alt, 0, i), work)
                        if symbol.name in self._nullable:
                            add(i, (rule_name, alt_index, dot + 1, origin), work)
                else:
                    for parent in list(charts[origin]):
                        p_rule, p_alt, p_dot, p_origin = parent
                        p_alternative = self.rules[p_rule][p_alt]
                        if p_dot < len(p_alternative):
                            p_symbol = p_alternative[p_dot]
                            if not p_symbol.terminal and p_symbol.name == rule_name:
                                add(i, (p_rule, p_alt, p_dot + 1, p_origin), work)

        return any(
            rule_name == self.start and dot == len(self.rules[self.start][alt_index]) and origin == 0
            for rule_name, alt_index, dot, origin in charts[n]
        )
