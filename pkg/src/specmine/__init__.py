"""specmine: mine API documents for rules and formalize them under an induced grammar.

The pipeline runs in five stages over a line-indexed document: locate
entities with model-proposed regex patterns, extract entity attributes,
grade description sentences into rules, induce a DSL grammar (sorts and
predicates over a fixed template), and formalize each rule as a statement
that parses under that grammar. Every model call goes through a cassette so
runs replay deterministically offline.
"""

__version__ = "0.1.0"
