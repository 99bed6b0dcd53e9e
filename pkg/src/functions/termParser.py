"""
Prolog-style term parsing.

Parses the fact, clause and mode-declaration syntax shared by stream files,
theory files and mode files, e.g. ``happensAt(walk(id1),1).`` or
``initiatedAt(moving(X,Y),T) :- happensAt(walk(X),T), distLessThan(X,Y,25,T).``
"""

import logging
import re
from typing import Iterator, List, Tuple

from src.models.Term import Atom, Constant, Term, Variable

logger = logging.getLogger(__name__)

LIST_FUNCTOR = "[]"

_TOKEN = re.compile(
    r"\s*(?:(?P<name>-?\d+(?:\.\d+)?|[+\-#]?[A-Za-z0-9_]+)|(?P<punct>[(),\[\]]))"
)


class TermSyntaxError(ValueError):
    """Raised for malformed term text."""

    def __init__(self, message: str, text: str, column: int):
        super().__init__(f"{message} at column {column + 1}: {text!r}")
        self.text = text
        self.column = column


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens: List[Tuple[str, str, int]] = []
        position = 0
        while position < len(text):
            if text[position:].strip() == "":
                break
            match = _TOKEN.match(text, position)
            if match is None or match.end() == position:
                raise TermSyntaxError("Unexpected character", text, position)
            kind = "name" if match.group("name") is not None else "punct"
            value = match.group(kind)
            self.tokens.append((kind, value, match.start(kind)))
            position = match.end()
        self.index = 0

    def _peek(self) -> Tuple[str, str, int]:
        if self.index >= len(self.tokens):
            return ("end", "", len(self.text))
        return self.tokens[self.index]

    def parse_term(self) -> Term:
        kind, token, column = self._peek()
        if kind == "punct" and token == "[":
            self.index += 1
            items = self._parse_arguments("]")
            return Atom(LIST_FUNCTOR, tuple(items))
        if kind != "name":
            raise TermSyntaxError("Expected a term", self.text, column)
        self.index += 1
        next_kind, next_token, _ = self._peek()
        if next_kind == "punct" and next_token == "(":
            self.index += 1
            args = self._parse_arguments(")")
            return Atom(token, tuple(args))
        if token[0].isupper() or token[0] == "_":
            return Variable(token)
        return Constant(token)

    def _parse_arguments(self, closing: str) -> List[Term]:
        args: List[Term] = []
        kind, token, _ = self._peek()
        if kind == "punct" and token == closing:
            self.index += 1
            return args
        while True:
            args.append(self.parse_term())
            kind, token, column = self._peek()
            if kind == "punct" and token == ",":
                self.index += 1
                continue
            if kind == "punct" and token == closing:
                self.index += 1
                return args
            raise TermSyntaxError(f"Expected ',' or {closing!r}", self.text, column)

    def parse_sequence(self) -> List[Term]:
        """Parse ``t1, t2, ...`` up to end of input."""
        terms = [self.parse_term()]
        while True:
            kind, token, column = self._peek()
            if kind == "end":
                return terms
            if kind == "punct" and token == ",":
                self.index += 1
                terms.append(self.parse_term())
                continue
            raise TermSyntaxError("Expected ','", self.text, column)

    def finish(self) -> None:
        kind, _, column = self._peek()
        if kind != "end":
            raise TermSyntaxError("Trailing input", self.text, column)


def parse_term(text: str) -> Term:
    parser = _Parser(text)
    term = parser.parse_term()
    parser.finish()
    return term


def parse_atom(text: str) -> Atom:
    term = parse_term(text)
    if not isinstance(term, Atom):
        raise TermSyntaxError("Expected a compound term", text, 0)
    return term


def strip_period(text: str) -> str:
    stripped = text.strip()
    if not stripped.endswith("."):
        raise TermSyntaxError("Missing terminating '.'", text, len(text.rstrip()))
    return stripped[:-1]


def parse_fact(text: str) -> Atom:
    """Parse a single ``atom.`` statement."""
    return parse_atom(strip_period(text))


def parse_clause(text: str) -> Tuple[Atom, List[Atom]]:
    """Parse ``head :- b1, ..., bn.`` or ``head.`` into head and body atoms."""
    statement = strip_period(text)
    if ":-" in statement:
        head_text, body_text = statement.split(":-", 1)
    else:
        head_text, body_text = statement, ""
    head = parse_atom(head_text)
    if not body_text.strip():
        return head, []
    parser = _Parser(body_text)
    body = parser.parse_sequence()
    for literal in body:
        if not isinstance(literal, Atom):
            raise TermSyntaxError("Body literals must be compound terms", body_text, 0)
    return head, list(body)


def iter_statements(text: str) -> Iterator[Tuple[int, str]]:
    """Yield (line number, statement) for every '.'-terminated statement.

    ``%`` starts a comment running to the end of the line. Statements may
    span lines; the reported line is the one the statement starts on.
    """
    buffer: List[str] = []
    start_line = 0
    depth = 0
    for line_number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("%", 1)[0]
        for position, char in enumerate(line):
            if not buffer:
                if char.isspace():
                    continue
                start_line = line_number
            if char in "([":
                depth += 1
            elif char in ")]":
                depth -= 1
            buffer.append(char)
            is_last = position + 1 == len(line) or line[position + 1].isspace()
            if char == "." and depth == 0 and is_last:
                statement = "".join(buffer).strip()
                buffer = []
                yield start_line, statement
        if buffer:
            buffer.append(" ")
    leftover = "".join(buffer).strip()
    if leftover:
        raise TermSyntaxError("Unterminated statement", leftover, len(leftover))
