"""JSGF-subset grammar parsing and compilation to a word automaton.

Supported constructs: a `grammar NAME;` header, `public <rule> = expr;`
definitions (the `=` may be omitted), alternation with `|`, grouping
with parentheses, sequencing by juxtaposition, postfix `*`, rule
references, and `//` or block comments. Imports, weights, tags, `+`,
and `[...]` optional groups are rejected as unsupported; so is rule
recursion.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from .errors import GrammarSyntaxError, UndefinedRule, UnsupportedFeature

EPSILON = None  # edge label for the empty word


# expression tree

@dataclass(frozen=True)
class Terminal:
    word: str


@dataclass(frozen=True)
class Sequence:
    items: tuple


@dataclass(frozen=True)
class Alternation:
    items: tuple


@dataclass(frozen=True)
class KleeneStar:
    item: object


@dataclass(frozen=True)
class RuleRef:
    name: str


@dataclass(frozen=True)
class GrammarAst:
    name: str
    rules: dict[str, object]
    public_names: tuple[str, ...]

    @property
    def public_rules(self) -> dict[str, object]:
        return {name: self.rules[name] for name in self.public_names}


# tokenizer

_PUNCT = {"=", ";", "(", ")", "|", "*", "<", ">"}
_REJECTED = {"+": "`+` repetition", "[": "`[...]` optional groups", "]": "`[...]` optional groups",
             "{": "`{...}` tags", "}": "`{...}` tags", "/": "weights"}


@dataclass(frozen=True)
class _Token:
    kind: str  # 'word', 'punct', 'eof'
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch.isspace():
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        if text.startswith("/*", i):
            end = text.find("*/", i + 2)
            if end < 0:
                raise GrammarSyntaxError("unterminated block comment", line, col)
            skipped = text[i:end + 2]
            line += skipped.count("\n")
            col = len(skipped) - skipped.rfind("\n") if "\n" in skipped else col + len(skipped)
            i = end + 2
            continue
        if ch in _REJECTED:
            raise UnsupportedFeature(
                f"line {line}, column {col}: {_REJECTED[ch]} are not supported")
        if ch in _PUNCT:
            tokens.append(_Token("punct", ch, line, col))
            i += 1
            col += 1
            continue
        if ch.isalnum() or ch in "_.'-":
            start = i
            while i < n and (text[i].isalnum() or text[i] in "_.'-"):
                i += 1
            tokens.append(_Token("word", text[start:i], line, col))
            col += i - start
            continue
        raise GrammarSyntaxError(f"unexpected character {ch!r}", line, col)
    tokens.append(_Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    @property
    def current(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        token = self.current
        self.pos += 1
        return token

    def fail(self, message: str):
        token = self.current
        raise GrammarSyntaxError(message, token.line, token.column)

    def expect_punct(self, text: str) -> None:
        if self.current.kind != "punct" or self.current.text != text:
            self.fail(f"expected {text!r}, found {self.current.text or 'end of file'!r}")
        self.advance()

    def expect_word(self, description: str) -> str:
        if self.current.kind != "word":
            self.fail(f"expected {description}, found {self.current.text or 'end of file'!r}")
        return self.advance().text

    def parse_grammar(self) -> GrammarAst:
        header = self.expect_word("the `grammar` keyword")
        if header != "grammar":
            self.fail("grammar file must start with a `grammar NAME;` header")
        name = self.expect_word("a grammar name")
        self.expect_punct(";")

        rules: dict[str, object] = {}
        public_names: list[str] = []
        while self.current.kind != "eof":
            is_public = False
            if self.current.kind == "word" and self.current.text == "import":
                raise UnsupportedFeature(
                    f"line {self.current.line}: `import` is not supported")
            if self.current.kind == "word" and self.current.text == "public":
                is_public = True
                self.advance()
            self.expect_punct("<")
            rule_name = self.expect_word("a rule name")
            self.expect_punct(">")
            # strict JSGF requires `=` but the omitted form is also accepted
            if self.current.kind == "punct" and self.current.text == "=":
                self.advance()
            expr = self.parse_alternation()
            self.expect_punct(";")
            if rule_name in rules:
                self.fail(f"rule <{rule_name}> defined twice")
            rules[rule_name] = expr
            if is_public:
                public_names.append(rule_name)

        if not public_names:
            raise GrammarSyntaxError("grammar defines no public rule", 1, 1)
        ast = GrammarAst(name, rules, tuple(public_names))
        _check_references(ast)
        return ast

    def parse_alternation(self):
        branches = [self.parse_sequence()]
        while self.current.kind == "punct" and self.current.text == "|":
            self.advance()
            branches.append(self.parse_sequence())
        return branches[0] if len(branches) == 1 else Alternation(tuple(branches))

    def parse_sequence(self):
        items = [self.parse_postfixed()]
        while (self.current.kind == "word"
               or (self.current.kind == "punct" and self.current.text in ("(", "<"))):
            items.append(self.parse_postfixed())
        return items[0] if len(items) == 1 else Sequence(tuple(items))

    def parse_postfixed(self):
        expr = self.parse_atom()
        while self.current.kind == "punct" and self.current.text == "*":
            self.advance()
            expr = KleeneStar(expr)
        return expr

    def parse_atom(self):
        token = self.current
        if token.kind == "word":
            self.advance()
            return Terminal(token.text)
        if token.kind == "punct" and token.text == "(":
            self.advance()
            expr = self.parse_alternation()
            self.expect_punct(")")
            return expr
        if token.kind == "punct" and token.text == "<":
            self.advance()
            name = self.expect_word("a rule name")
            self.expect_punct(">")
            return RuleRef(name)
        self.fail("expected a word, `(`, or a rule reference")


def _check_references(ast: GrammarAst) -> None:
    def refs(expr):
        if isinstance(expr, Terminal):
            return
        if isinstance(expr, RuleRef):
            yield expr.name
        elif isinstance(expr, KleeneStar):
            yield from refs(expr.item)
        elif isinstance(expr, (Sequence, Alternation)):
            for item in expr.items:
                yield from refs(item)

    for rule_name, expr in ast.rules.items():
        for ref in refs(expr):
            if ref not in ast.rules:
                raise UndefinedRule(f"rule <{ref}> referenced in <{rule_name}> is never defined")

    # reject recursion: depth-first search for a cycle in the reference graph
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {name: WHITE for name in ast.rules}

    def visit(name):
        color[name] = GRAY
        for ref in refs(ast.rules[name]):
            if color[ref] == GRAY:
                raise UnsupportedFeature(f"rule <{ref}> is recursive; recursion is not supported")
            if color[ref] == WHITE:
                visit(ref)
        color[name] = BLACK

    for name in ast.rules:
        if color[name] == WHITE:
            visit(name)


def parse_jsgf(text: str) -> GrammarAst:
    """Parse grammar text in the supported JSGF subset."""
    return _Parser(_tokenize(text)).parse_grammar()


# word-level finite automaton

@dataclass(frozen=True)
class WordFsa:
    """Epsilon-free automaton over words; states are 0..num_states-1."""

    num_states: int
    start: int
    finals: frozenset[int]
    edges: tuple[tuple[int, str, int], ...]  # (from, word, to)

    @property
    def terminals(self) -> tuple[str, ...]:
        return tuple(sorted({word for _, word, _ in self.edges}))

    def edges_from(self, state: int) -> list[tuple[int, str, int]]:
        return [edge for edge in self.edges if edge[0] == state]


class _NfaBuilder:
    """Thompson-style construction producing epsilon edges."""

    def __init__(self, rules: dict[str, object]):
        self.rules = rules
        self.edges: list[tuple[int, str | None, int]] = []
        self.count = 0

    def new_state(self) -> int:
        self.count += 1
        return self.count - 1

    def add(self, src: int, label: str | None, dst: int) -> None:
        self.edges.append((src, label, dst))

    def build(self, expr) -> tuple[int, int]:
        if isinstance(expr, Terminal):
            src, dst = self.new_state(), self.new_state()
            self.add(src, expr.word, dst)
            return src, dst
        if isinstance(expr, RuleRef):
            return self.build(self.rules[expr.name])  # acyclic, safe to inline
        if isinstance(expr, Sequence):
            first_in, prev_out = self.build(expr.items[0])
            for item in expr.items[1:]:
                nxt_in, nxt_out = self.build(item)
                self.add(prev_out, EPSILON, nxt_in)
                prev_out = nxt_out
            return first_in, prev_out
        if isinstance(expr, Alternation):
            src, dst = self.new_state(), self.new_state()
            for item in expr.items:
                b_in, b_out = self.build(item)
                self.add(src, EPSILON, b_in)
                self.add(b_out, EPSILON, dst)
            return src, dst
        if isinstance(expr, KleeneStar):
            src, dst = self.new_state(), self.new_state()
            b_in, b_out = self.build(expr.item)
            self.add(src, EPSILON, dst)
            self.add(src, EPSILON, b_in)
            self.add(b_out, EPSILON, b_in)
            self.add(b_out, EPSILON, dst)
            return src, dst
        raise TypeError(f"unknown expression node {expr!r}")


def compile_fsa(ast: GrammarAst, start_rule: str | None = None) -> WordFsa:
    """Compile a public rule into an epsilon-free word automaton.

    Defaults to the first public rule. States unreachable from the start
    are pruned and the remainder renumbered in breadth-first order.
    """
    if start_rule is None:
        start_rule = ast.public_names[0]
    if start_rule not in ast.rules:
        raise UndefinedRule(f"rule <{start_rule}> is not defined")
    if start_rule not in ast.public_names:
        raise ValueError(f"rule <{start_rule}> is not public")

    builder = _NfaBuilder(ast.rules)
    start, final = builder.build(ast.rules[start_rule])

    closure = _epsilon_closures(builder.count, builder.edges)
    labeled = [(src, word, dst) for src, word, dst in builder.edges if word is not EPSILON]

    new_edges: set[tuple[int, str, int]] = set()
    finals: set[int] = set()
    for state in range(builder.count):
        reachable_now = closure[state]
        if final in reachable_now:
            finals.add(state)
        for src, word, dst in labeled:
            if src in reachable_now:
                new_edges.add((state, word, dst))

    start, finals, new_edges = _merge_bisimilar(builder.count, start, finals, new_edges)

    # breadth-first renumbering from the start state; unreachable states drop out
    order = [start]
    index = {start: 0}
    cursor = 0
    outgoing: dict[int, list[tuple[int, str, int]]] = {}
    for edge in sorted(new_edges):
        outgoing.setdefault(edge[0], []).append(edge)
    while cursor < len(order):
        state = order[cursor]
        cursor += 1
        for _, _, dst in outgoing.get(state, []):
            if dst not in index:
                index[dst] = len(order)
                order.append(dst)

    edges = tuple(sorted((index[s], w, index[d]) for s, w, d in new_edges
                         if s in index and d in index))
    kept_finals = frozenset(index[s] for s in finals if s in index)
    return WordFsa(len(order), 0, kept_finals, edges)


def _merge_bisimilar(num_states: int, start: int, finals: set[int], edges: set):
    """Collapse states with identical behavior (forward bisimulation quotient).

    Thompson construction leaves many interchangeable states; merging
    them keeps the language while shrinking the automaton the decoder
    must later expand.
    """
    outgoing: dict[int, list[tuple[int, str, int]]] = {}
    for edge in edges:
        outgoing.setdefault(edge[0], []).append(edge)

    partition = [0 if s in finals else 1 for s in range(num_states)]
    while True:
        signatures: dict[tuple, int] = {}
        refined = []
        for state in range(num_states):
            signature = (partition[state],
                         frozenset((word, partition[dst])
                                   for _, word, dst in outgoing.get(state, [])))
            if signature not in signatures:
                signatures[signature] = len(signatures)
            refined.append(signatures[signature])
        if refined == partition:
            break
        partition = refined

    merged_edges = {(partition[s], w, partition[d]) for s, w, d in edges}
    merged_finals = {partition[s] for s in finals}
    return partition[start], merged_finals, merged_edges


def _epsilon_closures(num_states: int, edges) -> list[set[int]]:
    eps_out: dict[int, list[int]] = {}
    for src, word, dst in edges:
        if word is EPSILON:
            eps_out.setdefault(src, []).append(dst)
    closures = []
    for state in range(num_states):
        seen = {state}
        stack = [state]
        while stack:
            node = stack.pop()
            for dst in eps_out.get(node, []):
                if dst not in seen:
                    seen.add(dst)
                    stack.append(dst)
        closures.append(seen)
    return closures


def accepts(fsa: WordFsa, words) -> bool:
    """True iff the word sequence is in the automaton's language."""
    current = {fsa.start}
    for word in words:
        current = {dst for src, label, dst in fsa.edges if src in current and label == word}
        if not current:
            return False
    return bool(current & fsa.finals)


def builtin_grammar_text() -> str:
    """Text of the shipped digit-loop grammar."""
    return resources.files("digitspeech.assets").joinpath("arabicdigits.gram").read_text(
        encoding="utf-8")
