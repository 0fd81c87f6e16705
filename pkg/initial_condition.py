import math
import re
from dataclasses import dataclass
from typing import List, Optional, Tuple

from classes.errors import ParseError, RejectsConstant
from classes.fourier_field import FourierField


@dataclass(frozen=True)
class Term:
    amplitude: float
    kind: str  # 'sin' | 'cos'
    wavenumber: int


@dataclass(frozen=True)
class InitialConditionExpr:
    terms: Tuple[Term, ...]

    def __post_init__(self):
        if not self.terms:
            raise ValueError("An initial condition needs at least one term")
        for term in self.terms:
            if term.wavenumber < 1:
                raise ValueError(f"Invalid wavenumber {term.wavenumber}: constant modes are not mean-zero")

    @property
    def max_wavenumber(self) -> int:
        return max(t.wavenumber for t in self.terms)

    def to_field(self, n_modes: Optional[int] = None) -> FourierField:
        n = n_modes or self.max_wavenumber
        if self.max_wavenumber > n:
            raise ValueError(f"Initial condition needs {self.max_wavenumber} modes, only {n} available")
        return FourierField.from_terms([(t.amplitude, t.kind, t.wavenumber) for t in self.terms], n)

    def render(self) -> str:
        parts = []
        for i, t in enumerate(self.terms):
            sign = "-" if t.amplitude < 0 else ("+" if i else "")
            arg = "x" if t.wavenumber == 1 else f"{t.wavenumber}x"
            parts.append(f"{sign}{abs(t.amplitude)!r}*{t.kind}({arg})")
        return "".join(parts)


# one token per alternative; whitespace is skipped between tokens
_TOKEN = re.compile(r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
                    r"|(?P<func>sin|cos)|(?P<op>[-+*()])|(?P<x>x))")


class _Tokens:
    def __init__(self, text: str):
        self.text = text
        self.items: List[Tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            match = _TOKEN.match(text, pos)
            if not match or match.end() == pos:
                offset = pos + len(text[pos:]) - len(text[pos:].lstrip())
                raise ParseError(f"Unexpected character '{text[offset]}'", offset)
            kind = match.lastgroup
            self.items.append((kind, match.group(kind), match.start(kind)))
            pos = match.end()
        self.index = 0

    def peek(self) -> Optional[Tuple[str, str, int]]:
        return self.items[self.index] if self.index < len(self.items) else None

    def take(self, kind: str, value: Optional[str] = None, expected: str = "") -> Tuple[str, str, int]:
        token = self.peek()
        if token is None or token[0] != kind or (value is not None and token[1] != value):
            where = token[2] if token else len(self.text)
            found = f"'{token[1]}'" if token else "end of input"
            raise ParseError(f"Expected {expected or value or kind}, found {found}", where)
        self.index += 1
        return token


def parse_ic(text: str) -> InitialConditionExpr:
    """
    Parses a sum of terms [+-][coeff[*]]sin(kx) / cos(kx) with integer k >= 1, e.g.
    '1.5*sin(x) + sin(2x)'. Whitespace is ignored.
    """
    if not text or not text.strip():
        raise ParseError("Empty initial condition", 0)
    tokens = _Tokens(text)
    terms: List[Term] = []
    first = True
    while tokens.peek() is not None or first:
        sign = 1.0
        token = tokens.peek()
        if token and token[0] == "op" and token[1] in "+-":
            sign = -1.0 if token[1] == "-" else 1.0
            tokens.index += 1
        elif not first:
            tokens.take("op", "+", expected="'+' or '-'")

        amplitude = 1.0
        token = tokens.peek()
        if token and token[0] == "num":
            amplitude = float(token[1])
            if not math.isfinite(amplitude):
                raise ParseError(f"Coefficient out of range: '{token[1]}'", token[2])
            tokens.index += 1
            token = tokens.peek()
            if token and token[0] == "op" and token[1] == "*":
                tokens.index += 1

        func = tokens.take("func", expected="'sin' or 'cos'")
        tokens.take("op", "(", expected="'('")
        k, k_pos = 1, None
        token = tokens.peek()
        if token and token[0] == "num":
            if not re.fullmatch(r"\d+", token[1]):
                raise ParseError(f"Wavenumber must be an integer, found '{token[1]}'", token[2])
            k, k_pos = int(token[1]), token[2]
            tokens.index += 1
        tokens.take("x", expected="'x'")
        tokens.take("op", ")", expected="')'")
        if k == 0:
            raise RejectsConstant("Wavenumber 0 is a constant, not mean-zero", k_pos)
        terms.append(Term(sign * amplitude, func[1], k))
        first = False
    return InitialConditionExpr(tuple(terms))
