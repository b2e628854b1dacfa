"""
Model specifications and their canonical text form.

    const(4,1.0)                       constant curvature kappa on R^n
    fs(2)                              Fubini-Study on C^m = R^{2m}
    prod(const(2,1.0),const(2,1.0))    orthogonal product
    flat(const(4,1.0),1)               product with flat R^k
    rand(5,seed=7,scale=0.3)           random Bianchi-projected tensor
    shift(rand(4,seed=3,scale=1.0),pic2,0.0)
                                       base shifted toward constant curvature
                                       until the cone margin reaches the target
"""

import re
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

from conditions.cones import Cone, parse_cone
from utils.errors import ParseError, SpecInvalid


@dataclass(frozen=True)
class ConstantCurvature:
    n: int
    kappa: float = 1.0

    def __post_init__(self):
        if self.n < 2:
            raise SpecInvalid(f"const needs n >= 2, got {self.n}")

    @property
    def dimension(self) -> int:
        return self.n


@dataclass(frozen=True)
class FubiniStudy:
    m: int

    def __post_init__(self):
        if self.m < 1:
            raise SpecInvalid(f"fs needs m >= 1, got {self.m}")

    @property
    def dimension(self) -> int:
        return 2 * self.m


@dataclass(frozen=True)
class Product:
    first: "ModelSpec"
    second: "ModelSpec"

    @property
    def dimension(self) -> int:
        return self.first.dimension + self.second.dimension


@dataclass(frozen=True)
class FlatExtend:
    base: "ModelSpec"
    k: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise SpecInvalid(f"flat needs k >= 1, got {self.k}")

    @property
    def dimension(self) -> int:
        return self.base.dimension + self.k


@dataclass(frozen=True)
class Random:
    n: int
    seed: int = 0
    scale: float = 1.0

    def __post_init__(self):
        if self.n < 2:
            raise SpecInvalid(f"rand needs n >= 2, got {self.n}")
        if not self.scale > 0.0:
            raise SpecInvalid(f"rand needs scale > 0, got {self.scale}")

    @property
    def dimension(self) -> int:
        return self.n


@dataclass(frozen=True)
class Shifted:
    base: "ModelSpec"
    cone: Cone
    margin: float = 0.0

    @property
    def dimension(self) -> int:
        return self.base.dimension


ModelSpec = Union[ConstantCurvature, FubiniStudy, Product, FlatExtend, Random, Shifted]


# text form

def _num(value: Union[int, float]) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def format_model(spec: ModelSpec) -> str:
    if isinstance(spec, ConstantCurvature):
        return f"const({spec.n},{_num(float(spec.kappa))})"
    if isinstance(spec, FubiniStudy):
        return f"fs({spec.m})"
    if isinstance(spec, Product):
        return f"prod({format_model(spec.first)},{format_model(spec.second)})"
    if isinstance(spec, FlatExtend):
        return f"flat({format_model(spec.base)},{spec.k})"
    if isinstance(spec, Random):
        return f"rand({spec.n},seed={spec.seed},scale={_num(float(spec.scale))})"
    if isinstance(spec, Shifted):
        return f"shift({format_model(spec.base)},{spec.cone.text()},{_num(float(spec.margin))})"
    raise SpecInvalid(f"Not a model spec: {spec!r}")


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<punct>[(),=]))"
)


@dataclass
class _Token:
    kind: str
    text: str
    position: int


@dataclass
class _Call:
    name: str
    args: List[Tuple[Optional[str], object]]
    position: int
    source: str


def _tokenize(text: str) -> List[_Token]:
    tokens, pos = [], 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        match = _TOKEN_RE.match(text, pos)
        if not match:
            raise ParseError(f"Unexpected character {text[pos]!r}", text, pos)
        kind = match.lastgroup
        tokens.append(_Token(kind, match.group(kind), match.start(kind)))
        pos = match.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    """Recursive descent over name(arg, ..., key=value) terms."""

    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.index = 0

    @property
    def current(self) -> _Token:
        return self.tokens[self.index]

    def expect(self, text: str) -> _Token:
        token = self.current
        if token.text != text:
            found = token.text or "end of input"
            raise ParseError(f"Expected '{text}', found '{found}'", self.text, token.position)
        self.index += 1
        return token

    def term(self):
        token = self.current
        if token.kind == "number":
            self.index += 1
            return float(token.text) if any(c in token.text for c in ".eE") else int(token.text)
        if token.kind != "name":
            raise ParseError(f"Expected a model, cone or number, found '{token.text or 'end of input'}'",
                             self.text, token.position)
        self.index += 1
        if self.current.text != "(":
            return _Call(token.text, [], token.position, token.text)
        self.expect("(")
        args: List[Tuple[Optional[str], object]] = []
        while self.current.text != ")":
            key = None
            if self.current.kind == "name" and self.tokens[self.index + 1].text == "=":
                key = self.current.text
                self.index += 2
            args.append((key, self.term()))
            if self.current.text != ")":
                self.expect(",")
        close = self.expect(")")
        return _Call(token.text, args, token.position, self.text[token.position:close.position + 1])

    def parse(self):
        result = self.term()
        if self.current.kind != "end":
            raise ParseError(f"Trailing input '{self.current.text}'", self.text, self.current.position)
        return result


def _bind(call: _Call, text: str, names: List[str], required: int) -> List[object]:
    """Match positional and keyword arguments against parameter names."""
    values: List[object] = [None] * len(names)
    seen_keyword = False
    for position, (key, value) in enumerate(call.args):
        if key is None:
            if seen_keyword:
                raise ParseError("Positional argument after keyword argument", text, call.position)
            if position >= len(names):
                raise ParseError(f"'{call.name}' takes at most {len(names)} arguments", text, call.position)
            values[position] = value
        else:
            seen_keyword = True
            if key not in names:
                raise ParseError(f"'{call.name}' has no argument '{key}'", text, call.position)
            values[names.index(key)] = value
    for i in range(required):
        if values[i] is None:
            raise ParseError(f"'{call.name}' is missing argument '{names[i]}'", text, call.position)
    return values


def _as_int(value, call: _Call, text: str, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ParseError(f"'{call.name}' argument '{name}' must be an integer", text, call.position)
    return int(value)


def _as_float(value, call: _Call, text: str, name: str) -> float:
    if not isinstance(value, (int, float)):
        raise ParseError(f"'{call.name}' argument '{name}' must be a number", text, call.position)
    return float(value)


def _to_spec(node, text: str) -> ModelSpec:
    if not isinstance(node, _Call):
        raise ParseError("Expected a model", text, 0)
    name = node.name.lower()
    if name == "const":
        n, kappa = _bind(node, text, ["n", "kappa"], 1)
        return ConstantCurvature(_as_int(n, node, text, "n"), 1.0 if kappa is None else _as_float(kappa, node, text, "kappa"))
    if name == "fs":
        (m,) = _bind(node, text, ["m"], 1)
        return FubiniStudy(_as_int(m, node, text, "m"))
    if name == "prod":
        a, b = _bind(node, text, ["first", "second"], 2)
        return Product(_to_spec(a, text), _to_spec(b, text))
    if name == "flat":
        base, k = _bind(node, text, ["base", "k"], 1)
        return FlatExtend(_to_spec(base, text), 1 if k is None else _as_int(k, node, text, "k"))
    if name == "rand":
        n, seed, scale = _bind(node, text, ["n", "seed", "scale"], 1)
        return Random(
            _as_int(n, node, text, "n"),
            0 if seed is None else _as_int(seed, node, text, "seed"),
            1.0 if scale is None else _as_float(scale, node, text, "scale"),
        )
    if name == "shift":
        base, cone, margin = _bind(node, text, ["base", "cone", "margin"], 2)
        if not isinstance(cone, _Call):
            raise ParseError("'shift' needs a cone name as its second argument", text, node.position)
        return Shifted(
            _to_spec(base, text),
            parse_cone(cone.source),
            0.0 if margin is None else _as_float(margin, node, text, "margin"),
        )
    raise ParseError(f"Unknown model '{node.name}'", text, node.position)


def parse_model(text: str) -> ModelSpec:
    """
    Parse a model text such as 'prod(const(2,1),const(2,1))'.

    Raises:
        ParseError: malformed text, with the offending position
        SpecInvalid: well-formed text describing an invalid model
    """
    return _to_spec(_Parser(text).parse(), text)
