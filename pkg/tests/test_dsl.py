from __future__ import annotations

import pytest

from reference_grammar import REFERENCE_PREDICATES, REFERENCE_SORTS
from specmine.dsl import (
    AndExpr,
    AttrSelector,
    BoolValue,
    Group,
    InducedGrammar,
    NotExpr,
    NumberValue,
    OrExpr,
    PredicateApp,
    StringValue,
    VarValue,
    distinct_tokens,
    eval_path,
    instantiate,
    parse,
    render_statement,
    resolve_target_attr,
    tokenize,
    unresolved_selectors,
)
from specmine.errors import (
    DuplicatePredicateName,
    NoPrimaryPredicate,
    ParseError,
    PathError,
)
from specmine.grammar import Predicate, Sort


@pytest.fixture(scope="module")
def grammar() -> InducedGrammar:
    return instantiate(REFERENCE_SORTS, REFERENCE_PREDICATES)


class TestInstantiate:
    def test_check_alternative_enforces_arity_two(self, grammar):
        assert (
            'primary_throwsonunauthorized_5: "ThrowsOnUnauthorized" LPAREN value COMMA value RPAREN'
            in grammar.rendered_ebnf
        )

    def test_alternative_indices_follow_insertion_order(self, grammar):
        lines = grammar.rendered_ebnf.splitlines()
        primaries = [l for l in lines if l.startswith("primary_")]
        conds = [l for l in lines if l.startswith("cond_")]
        assert primaries[0].startswith("primary_improvesusability_0:")
        assert primaries[9].startswith("primary_musttriggerapprovalevent_9:")
        assert conds[0].startswith("cond_optional_0:")
        assert conds[11].startswith("cond_emitstransfereventwithzerofrom_11:")

    def test_check_and_cond_atom_unions(self, grammar):
        check_line = next(l for l in grammar.rendered_ebnf.splitlines() if l.startswith("?check:"))
        assert check_line.count("|") == 9  # ten alternatives
        cond_line = next(l for l in grammar.rendered_ebnf.splitlines() if l.startswith("?cond_atom:"))
        assert cond_line.count("|") == 11  # twelve alternatives

    def test_alternative_comment_carries_signature_and_description(self, grammar):
        line = next(
            l for l in grammar.rendered_ebnf.splitlines() if l.startswith("primary_throwsonunauthorized_5:")
        )
        assert "// - ThrowsOnUnauthorized(function: Function, condition: AuthorizationCondition):" in line
        assert line.endswith("does not hold.")

    def test_fixed_template_sections_present(self, grammar):
        for fragment in (
            "VAR: /[A-Za-z_][A-Za-z0-9_]*/",
            'target_attr_selector: "TargetAttr" LPAREN ESCAPED_STRING RPAREN',
            "stmt: check (IF condition)? SEMI",
            "?not_expr: atom\n        | NOT not_expr          -> not",
            "%import common.ESCAPED_STRING",
            "%ignore WS",
        ):
            assert fragment in grammar.rendered_ebnf

    def test_rendering_is_bit_stable(self):
        first = instantiate(REFERENCE_SORTS, REFERENCE_PREDICATES).rendered_ebnf
        second = instantiate(REFERENCE_SORTS, REFERENCE_PREDICATES).rendered_ebnf
        assert first == second

    def test_degenerate_grammar_single_primary_no_conditions(self):
        grammar = instantiate([Sort("S", "d")], [Predicate("P", "d", True, (("x", "S"),))])
        assert "?check: primary_p_0" in grammar.rendered_ebnf
        assert "?cond_atom:" not in grammar.rendered_ebnf
        assert parse(grammar, "P(x);").tree.check.name == "P"
        with pytest.raises(ParseError):
            parse(grammar, "P(x) if Q(y);")

    def test_zero_primaries_rejected(self):
        with pytest.raises(NoPrimaryPredicate):
            instantiate([Sort("S", "d")], [Predicate("P", "d", False, (("x", "S"),))])

    def test_duplicate_names_rejected(self):
        predicates = [
            Predicate("P", "d", True, (("x", "S"),)),
            Predicate("P", "d", True, (("x", "S"), ("y", "S"))),
        ]
        with pytest.raises(DuplicatePredicateName):
            instantiate([Sort("S", "d")], predicates)


class TestParse:
    def test_accepts_the_reference_statements(self, grammar):
        for text in (
            'ThrowsOnUnauthorized("transferFrom", "AuthorizationCondition");',
            'MintsTokens(f, t, a) if Optional(f) and not Returns(f, v);',
            'ThrowsOnUnauthorized(TargetAttr("$.name"), "AuthorizationCondition");',
            'ZeroTransferIsNormal("transfer") if MustFireTransferEvent("transfer", "Transfer") '
            'or EmitsTransferEventWithZeroFrom("transfer", "Transfer");',
        ):
            assert parse(grammar, text).text == text

    def test_accepts_allocated_by_allocator_under_its_own_grammar(self):
        sorts = [Sort("Pointer", "a pointer"), Sort("Allocator", "an allocator")]
        predicates = [
            Predicate("AllocatedByAllocator", "True when the buffer is allocated by the allocator.",
                      True, (("pointer", "Pointer"), ("allocator", "Allocator"))),
        ]
        grammar = instantiate(sorts, predicates)
        statement = parse(grammar, "AllocatedByAllocator(ptr, self);")
        assert statement.tree.check.args == (VarValue("ptr"), VarValue("self"))

    def test_rejects_arity_mutant(self, grammar):
        with pytest.raises(ParseError) as err:
            parse(grammar, 'ThrowsOnUnauthorized("transferFrom");')
        assert "expects 2 argument(s)" in str(err.value)

    def test_rejects_missing_semicolon(self, grammar):
        with pytest.raises(ParseError) as err:
            parse(grammar, 'ThrowsOnUnauthorized("transferFrom", "AuthorizationCondition")')
        assert err.value.expected

    def test_rejects_unknown_predicate(self, grammar):
        with pytest.raises(ParseError) as err:
            parse(grammar, 'TotallyMadeUp("a");')
        assert "unknown predicate" in str(err.value)

    def test_rejects_multi_statement_input(self, grammar):
        with pytest.raises(ParseError) as err:
            parse(grammar, 'ZeroTransferIsNormal("a"); ZeroTransferIsNormal("b");')
        assert "exactly one statement" in str(err.value)

    def test_rejects_primary_in_condition_position(self, grammar):
        with pytest.raises(ParseError):
            parse(grammar, 'ZeroTransferIsNormal("a") if MintsTokens(f, t, a);')

    def test_rejects_condition_predicate_as_check(self, grammar):
        with pytest.raises(ParseError):
            parse(grammar, "Optional(f);")

    def test_condition_tree_shape(self, grammar):
        statement = parse(grammar, "MintsTokens(f, t, a) if Optional(f) and not Returns(f, v);")
        condition = statement.tree.condition
        assert isinstance(condition, AndExpr)
        assert condition.left == PredicateApp("Optional", (VarValue("f"),))
        assert isinstance(condition.right, NotExpr)
        assert condition.right.operand == PredicateApp("Returns", (VarValue("f"), VarValue("v")))

    def test_precedence_not_over_and_over_or(self, grammar):
        statement = parse(
            grammar,
            "MintsTokens(f, t, a) if Optional(a) or Optional(b) and not Optional(c);",
        )
        condition = statement.tree.condition
        assert isinstance(condition, OrExpr)
        assert isinstance(condition.right, AndExpr)
        assert isinstance(condition.right.right, NotExpr)

    def test_and_or_left_associative(self, grammar):
        statement = parse(grammar, "MintsTokens(f, t, a) if Optional(a) and Optional(b) and Optional(c);")
        condition = statement.tree.condition
        assert isinstance(condition, AndExpr)
        assert isinstance(condition.left, AndExpr)

    def test_group_nodes_are_preserved(self, grammar):
        statement = parse(grammar, "MintsTokens(f, t, a) if (Optional(a) or Optional(b)) and Optional(c);")
        condition = statement.tree.condition
        assert isinstance(condition, AndExpr)
        assert isinstance(condition.left, Group)
        assert isinstance(condition.left.inner, OrExpr)

    def test_value_kinds(self, grammar):
        statement = parse(grammar, 'MintsTokens("text", -3.5e2, true);')
        args = statement.tree.check.args
        assert args[0] == StringValue('"text"') and args[0].value == "text"
        assert isinstance(args[1], NumberValue) and args[1].value == -350.0
        assert args[2] == BoolValue("true") and args[2].value is True

    def test_keyword_cannot_be_a_value(self, grammar):
        with pytest.raises(ParseError):
            parse(grammar, "ZeroTransferIsNormal(if);")

    def test_identifier_with_keyword_prefix_is_fine(self, grammar):
        statement = parse(grammar, "ZeroTransferIsNormal(iffy);")
        assert statement.tree.check.args == (VarValue("iffy"),)

    def test_predicate_name_cannot_be_a_value(self, grammar):
        with pytest.raises(ParseError):
            parse(grammar, "ZeroTransferIsNormal(Optional);")

    def test_error_carries_position_and_expected(self, grammar):
        try:
            parse(grammar, 'ThrowsOnUnauthorized("a" "b");')
        except ParseError as exc:
            assert exc.position == 25
            assert exc.expected
        else:
            pytest.fail("expected ParseError")

    def test_unterminated_string_rejected(self, grammar):
        with pytest.raises(ParseError):
            parse(grammar, 'ZeroTransferIsNormal("oops);')


class TestRoundTrip:
    CASES = [
        'ThrowsOnUnauthorized("transferFrom", "AuthorizationCondition");',
        "MintsTokens(f, t, a) if Optional(f) and not Returns(f, v);",
        "MintsTokens(f, t, a) if (Optional(a) or Optional(b)) and not (Returns(c, d));",
        'ImprovesUsability(TargetAttr("$.parameters[0].name"));',
        'MintsTokens("s", -1.5, false);',
    ]

    @pytest.mark.parametrize("text", CASES)
    def test_render_after_parse_normalizes_whitespace_only(self, grammar, text):
        statement = parse(grammar, text)
        assert render_statement(statement.tree) == text

    @pytest.mark.parametrize("text", CASES)
    def test_parse_of_render_is_identity_on_trees(self, grammar, text):
        tree = parse(grammar, text).tree
        assert parse(grammar, render_statement(tree)).tree == tree

    def test_messy_whitespace_normalized(self, grammar):
        messy = 'MintsTokens( f ,t,   a )   if  Optional( f ) ;'
        assert render_statement(parse(grammar, messy).tree) == "MintsTokens(f, t, a) if Optional(f);"


class TestTargetAttrResolution:
    RECORD = {
        "name": "transferFrom",
        "parameters": [
            {"name": "_from", "type": "address"},
            {"name": "_to", "type": "address"},
            {"name": "_value", "type": "uint256"},
        ],
        "visibility": "public",
    }

    def test_dollar_name_resolves(self, grammar):
        statement = parse(grammar, 'ThrowsOnUnauthorized(TargetAttr("$.name"), "AuthorizationCondition");')
        assert resolve_target_attr(statement, self.RECORD) == {"$.name": "transferFrom"}

    def test_indexed_path_resolves(self, grammar):
        statement = parse(grammar, 'ImprovesUsability(TargetAttr("$.parameters[0].name"));')
        assert resolve_target_attr(statement, self.RECORD) == {"$.parameters[0].name": "_from"}

    def test_statement_without_selectors_resolves_empty(self, grammar):
        statement = parse(grammar, 'ImprovesUsability("name");')
        assert resolve_target_attr(statement, self.RECORD) == {}

    def test_unresolvable_path_reported_not_fatal(self, grammar):
        statement = parse(grammar, 'ImprovesUsability(TargetAttr("$.does_not_exist"));')
        assert resolve_target_attr(statement, self.RECORD) == {}
        assert unresolved_selectors(statement, self.RECORD) == ["$.does_not_exist"]

    def test_invalid_path_syntax_raises(self, grammar):
        statement = parse(grammar, 'ImprovesUsability(TargetAttr("name"));')
        with pytest.raises(PathError):
            resolve_target_attr(statement, self.RECORD)
        statement = parse(grammar, 'ImprovesUsability(TargetAttr("$.a..b"));')
        with pytest.raises(PathError):
            resolve_target_attr(statement, self.RECORD)

    def test_wildcard_and_quoted_member(self):
        data = {"parameters": [{"name": "a"}, {"name": "b"}], "weird key": 7}
        assert eval_path("$.parameters[*].name", data) == ["a", "b"]
        assert eval_path('$["weird key"]', data) == [7]
        assert eval_path("$.parameters[-1].name", data) == ["b"]
        assert eval_path("$.parameters[5]", data) == []

    def test_selectors_in_conditions_are_collected(self, grammar):
        statement = parse(
            grammar,
            'MintsTokens(f, t, a) if Returns(TargetAttr("$.name"), TargetAttr("$.visibility"));',
        )
        resolved = resolve_target_attr(statement, self.RECORD)
        assert resolved == {"$.name": "transferFrom", "$.visibility": "public"}


class TestDistinctTokens:
    def make(self, grammar, *texts):
        return [parse(grammar, t) for t in texts]

    def test_empty_set_is_zero(self):
        assert distinct_tokens([]) == 0

    def test_hand_tokenized_single_statement(self):
        # P(a, a); lexes to {P, (, a, ",", ), ;} -> 6 distinct lexemes.
        grammar = instantiate([Sort("S", "d")], [Predicate("P", "d", True, (("x", "S"), ("y", "S")))])
        stmts = self.make(grammar, "P(a, a);")
        assert distinct_tokens(stmts) == 6

    def test_duplicates_do_not_change_the_count(self, grammar):
        once = self.make(grammar, 'ZeroTransferIsNormal("x");')
        twice = self.make(grammar, 'ZeroTransferIsNormal("x");', 'ZeroTransferIsNormal("x");')
        assert distinct_tokens(once) == distinct_tokens(twice) == 5

    def test_reordering_invariant(self, grammar):
        a = 'ZeroTransferIsNormal("x");'
        b = "MintsTokens(f, t, a) if Optional(f);"
        assert distinct_tokens(self.make(grammar, a, b)) == distinct_tokens(self.make(grammar, b, a))

    def test_hand_tokenized_fixture_sets(self, grammar):
        # Counted by hand against the lexer's token definitions.
        fixtures = [
            (["MintsTokens(f, t, a) if Optional(f);"], 10),
            # shares (, ), ,, ; f t a Optional if with the first: adds Returns, v
            (["MintsTokens(f, t, a) if Optional(f);",
              "MintsTokens(f, t, a) if Returns(f, v);"], 12),
            (['ImprovesUsability("name");', 'ImprovesUsability("name") if Optional("name");'], 7),
            # MintsTokens ( "a" , 1 true ) ; -> 8 distinct lexemes
            (['MintsTokens("a", 1, true);'], 8),
            # ThrowsOnUnauthorized ( TargetAttr "$.name" ) , "AuthorizationCondition" ; -> 8
            (['ThrowsOnUnauthorized(TargetAttr("$.name"), "AuthorizationCondition");'], 8),
        ]
        for texts, expected in fixtures:
            assert distinct_tokens(self.make(grammar, *texts)) == expected, texts

    def test_lexemes_not_kinds_are_counted(self, grammar):
        # Two different string literals are two lexemes of the same kind.
        stmts = self.make(grammar, 'ZeroTransferIsNormal("x");', 'ZeroTransferIsNormal("y");')
        assert distinct_tokens(stmts) == 6


class TestTokenizer:
    def test_longest_match_wins(self):
        kinds = [(t.kind, t.lexeme) for t in tokenize("iffy if", frozenset())]
        assert kinds[:2] == [("VAR", "iffy"), ("IF", "if")]

    def test_number_then_identifier(self):
        kinds = [(t.kind, t.lexeme) for t in tokenize("123abc", frozenset())]
        assert kinds[:2] == [("NUMBER", "123"), ("VAR", "abc")]

    def test_unexpected_character(self):
        with pytest.raises(ParseError):
            tokenize("P(@);", frozenset({"P"}))
