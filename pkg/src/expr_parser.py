"""
Text format for operator expressions: parser and canonical renderer.

Grammar summary::

    a_1(k)  a+_2(k')  da_1[1](k)  da+_2[1,3](q)  a_3(.)     operators
    delta(k,q)  delta(k,q)'[1,2]                              deltas
    k[2](k)  w_1(k)  w_1(k)^-1  fn_F(k)                       kernels
    1/2  -3  2/3i  i  m1^2                                    coefficients
    int(q)                                                    bound label
    E_1^2(k,k')  Elow_{12}(k,q)  Eup^{123}(p1,p2,p3)          macros
    A[1]_{12}(k,k')  B[2]_{12}(k,k')                          derivative macros

Juxtaposition is the operator product, ``+``/``-`` separate terms and
parentheses group sub-expressions. ``int(q)`` binds q in the term it prefixes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Any, List, Optional, Tuple

import pyparsing as pp

from .exceptions import ErrorCode, ExpressionParseError, SymbolicError
from .models.expression import (
    DISCRETE,
    ComponentPower,
    DeltaFactor,
    Energy,
    Expr,
    KernelFactor,
    MomentumLabel,
    OperatorFactor,
    Profile,
    Term,
)
from .models.scalar import Scalar
from .models.workbench_config import WorkbenchConfig
from .symbolic_core import add_exprs, canonicalize, multiply_exprs, multiply_terms, negate, scale_expr
from .utils.logging_utils import LoggerMixin

_ALLOWED_CHARACTERS = re.compile(r"[A-Za-z0-9\s_+\-/()\[\]{},.'^]")


@dataclass(frozen=True)
class _Node:
    kind: str
    loc: int
    data: Any


def _node(kind: str):
    def action(source, loc, tokens):
        return _Node(kind, loc, tokens)
    return action


@lru_cache(maxsize=1)
def _grammar() -> pp.ParserElement:
    lpar, rpar, comma = pp.Suppress("("), pp.Suppress(")"), pp.Suppress(",")
    label = pp.Regex(r"[A-Za-z][A-Za-z0-9]*'*|\.")
    axes = pp.Group(pp.Suppress("[") + pp.Regex(r"\d+") + pp.ZeroOrMore(comma + pp.Regex(r"\d+")) + pp.Suppress("]"))
    power = pp.Optional(pp.Suppress("^") + pp.Regex(r"-?\d+")("power"))
    label_list = pp.Group(label + pp.ZeroOrMore(comma + label))

    integral = pp.Regex(r"int(?=\()")("head") + lpar + label("label") + rpar
    operator = pp.Regex(r"d?a\+?_\d+")("head") + pp.Optional(axes("axes")) + lpar + label("label") + rpar
    delta = (
        pp.Regex(r"delta(?=\()")("head") + lpar + label("lhs") + comma + label("rhs") + rpar
        + pp.Optional(pp.Suppress("'") + axes("axes"))
    )
    component = pp.Regex(r"k\[\d+\]")("head") + lpar + label("label") + rpar + power
    energy = pp.Regex(r"w_\d+")("head") + lpar + label("label") + rpar + power
    profile = pp.Regex(r"fn_[A-Za-z][A-Za-z0-9]*")("head") + lpar + label("label") + rpar + power
    e_macro = pp.Regex(r"E_\d+\^\d+")("head") + lpar + label("l1") + comma + label("l2") + rpar
    low_macro = pp.Regex(r"Elow_\{[\d,\s]+\}")("head") + lpar + label_list("labels") + rpar
    up_macro = pp.Regex(r"Eup\^\{[\d,\s]+\}")("head") + lpar + label_list("labels") + rpar
    deriv_macro = pp.Regex(r"[AB]\[\d+\]_\{[\d,\s]+\}")("head") + lpar + label("l1") + comma + label("l2") + rpar
    imaginary = pp.Regex(r"(?:\d+(?:/\d+)?)?i(?![A-Za-z0-9_'(\[{])")
    real = pp.Regex(r"\d+(?:/\d+)?")
    atom = pp.Regex(r"[A-Za-z][A-Za-z0-9]*(?![A-Za-z0-9_'(\[{+])")("head") + power

    expression = pp.Forward()
    group = lpar + expression + rpar

    factor = (
        integral.setParseAction(_node("int"))
        | operator.setParseAction(_node("op"))
        | delta.setParseAction(_node("delta"))
        | component.setParseAction(_node("component"))
        | energy.setParseAction(_node("energy"))
        | profile.setParseAction(_node("profile"))
        | low_macro.setParseAction(_node("Elow"))
        | up_macro.setParseAction(_node("Eup"))
        | e_macro.setParseAction(_node("E"))
        | deriv_macro.setParseAction(_node("deriv_macro"))
        | imaginary.setParseAction(_node("imaginary"))
        | real.setParseAction(_node("real"))
        | atom.setParseAction(_node("atom"))
        | group.setParseAction(_node("group"))
    )
    sign = pp.Literal("+") | pp.Literal("-")
    first_term = pp.Optional(sign) + pp.OneOrMore(factor)
    next_term = sign + pp.OneOrMore(factor)
    expression <<= first_term.setParseAction(_node("term")) + pp.ZeroOrMore(next_term.setParseAction(_node("term")))
    return expression + pp.StringEnd()


class ExpressionParser(LoggerMixin):
    """
    Parse and render operator expressions for a session with ``species_count``
    species and momentum dimension ``dimension``.
    """

    def __init__(self, species_count: int = 3, dimension: int = 3) -> None:
        if species_count < 1:
            raise ValueError("species_count must be at least 1")
        if dimension not in (1, 2, 3):
            raise ValueError("dimension must be 1, 2 or 3")
        self.species_count = species_count
        self.dimension = dimension
        self._source = ""

    @classmethod
    def from_config(cls, config: WorkbenchConfig) -> "ExpressionParser":
        return cls(species_count=config.species_count, dimension=config.momentum_dimension)

    def parse(self, source: str) -> Expr:
        """
        Parse source text into a canonical expression; macros are expanded.

        Raises:
            ExpressionParseError: with a 1-based line and column
        """
        self._source = source
        self._check_characters(source)
        self._check_parentheses(source)

        try:
            nodes = _grammar().parseString(source, parseAll=True)
        except pp.ParseException as exc:
            raise ExpressionParseError(
                f"Syntax error: {exc.msg}",
                ErrorCode.PARSE_SYNTAX,
                line=exc.lineno,
                column=exc.col,
                source=source,
                cause=exc,
            ) from exc

        try:
            result = add_exprs(*(self._build_term(node) for node in nodes))
        except SymbolicError as exc:
            raise ExpressionParseError(
                exc.message, ErrorCode.PARSE_SYNTAX, line=1, column=1, source=source, cause=exc
            ) from exc

        self.logger.debug("Parsed %r into %d term(s)", source, len(result.terms))
        return result

    # -- validation before the grammar runs -------------------------------------------------

    def _check_characters(self, source: str) -> None:
        for index, character in enumerate(source):
            if not _ALLOWED_CHARACTERS.match(character):
                self._fail(f"Unexpected character {character!r}", ErrorCode.PARSE_LEXICAL, index)

    def _check_parentheses(self, source: str) -> None:
        opened: List[int] = []
        for index, character in enumerate(source):
            if character == "(":
                opened.append(index)
            elif character == ")":
                if not opened:
                    self._fail("Unmatched closing parenthesis", ErrorCode.PARSE_UNBALANCED, index)
                opened.pop()
        if opened:
            self._fail("Unclosed parenthesis", ErrorCode.PARSE_UNBALANCED, opened[-1])

    def _fail(self, message: str, code: ErrorCode, loc: int) -> None:
        raise ExpressionParseError(
            message,
            code,
            line=pp.lineno(loc, self._source),
            column=pp.col(loc, self._source),
            source=self._source,
        )

    # -- building ----------------------------------------------------------------------------

    def _build_term(self, node: _Node) -> Expr:
        tokens = list(node.data)
        negative = False
        if tokens and isinstance(tokens[0], str):
            negative = tokens.pop(0) == "-"

        bound: List[Tuple[str, int]] = []
        factors: List[Expr] = []
        for factor in tokens:
            if factor.kind == "int":
                name = factor.data["label"]
                if name == DISCRETE:
                    self._fail("Discrete label cannot be integrated", ErrorCode.PARSE_SYNTAX, factor.loc)
                bound.append((name, factor.loc))
            else:
                factors.append(self._build_factor(factor))

        product = multiply_exprs(*factors) if factors else Expr((Term(Scalar.one()),))
        if bound:
            product = self._bind(product, bound)
        return negate(product) if negative else product

    def _bind(self, product: Expr, bound: List[Tuple[str, int]]) -> Expr:
        terms = []
        for term in product.terms:
            extra = []
            for name, loc in bound:
                if name not in term.free_names():
                    self._fail(f"Integrated label '{name}' does not occur in its term", ErrorCode.PARSE_SYNTAX, loc)
                extra.append(self._label(name, loc))
            terms.append(Term(term.coeff, term.kernels, term.deltas, term.ops, term.bound + tuple(extra)))
        return canonicalize(Expr(tuple(terms)))

    def _build_factor(self, node: _Node) -> Expr:
        builder = getattr(self, f"_build_{node.kind}")
        return builder(node)

    def _build_group(self, node: _Node) -> Expr:
        return add_exprs(*(self._build_term(child) for child in node.data))

    def _build_real(self, node: _Node) -> Expr:
        return self._number(node.data[0], node.loc, imaginary=False)

    def _build_imaginary(self, node: _Node) -> Expr:
        text = node.data[0][:-1] or "1"
        return self._number(text, node.loc, imaginary=True)

    def _build_atom(self, node: _Node) -> Expr:
        power = self._power(node)
        return Expr((Term(Scalar.symbol(node.data["head"], power)),))

    def _build_op(self, node: _Node) -> Expr:
        match = re.fullmatch(r"(d?)a(\+?)_(\d+)", node.data["head"])
        derivative, dagger, species = match.group(1) == "d", match.group(2) == "+", int(match.group(3))
        self._check_species(species, node.loc)
        axes = self._axes(node, "axes")
        if derivative and not axes:
            self._fail("Derivative operator requires an axis list", ErrorCode.PARSE_SYNTAX, node.loc)
        if axes and not derivative:
            self._fail("Axis list is only allowed on derivative operators", ErrorCode.PARSE_SYNTAX, node.loc)
        label = self._optional_label(node.data["label"], node.loc)
        if label is None and axes:
            self._fail("Discrete-mode operators have no momentum axes", ErrorCode.PARSE_UNKNOWN_AXIS, node.loc)
        return Expr((Term(Scalar.one(), ops=(OperatorFactor(species, dagger, label, axes),)),))

    def _build_delta(self, node: _Node) -> Expr:
        lhs = self._label(node.data["lhs"], node.loc)
        rhs = self._label(node.data["rhs"], node.loc)
        axes = self._axes(node, "axes")
        return canonicalize(Expr((Term(Scalar.one(), deltas=(DeltaFactor(lhs, rhs, axes),)),)))

    def _build_component(self, node: _Node) -> Expr:
        axis = int(node.data["head"][2:-1])
        self._check_axis(axis, node.loc)
        kind = ComponentPower(axis, self._power(node))
        return self._kernel(kind, node)

    def _build_energy(self, node: _Node) -> Expr:
        species = int(node.data["head"][2:])
        self._check_species(species, node.loc)
        return self._kernel(Energy(species, self._power(node)), node)

    def _build_profile(self, node: _Node) -> Expr:
        return self._kernel(Profile(node.data["head"][3:], self._power(node)), node)

    def _build_E(self, node: _Node) -> Expr:
        mu, nu = (int(part) for part in node.data["head"][2:].split("^"))
        self._check_species(mu, node.loc)
        self._check_species(nu, node.loc)
        l1 = self._optional_label(node.data["l1"], node.loc)
        l2 = self._optional_label(node.data["l2"], node.loc)
        return self._anticommutator_half(OperatorFactor(mu, False, l1), OperatorFactor(nu, True, l2))

    def _build_Elow(self, node: _Node) -> Expr:
        return self._product_macro(node, dagger=False)

    def _build_Eup(self, node: _Node) -> Expr:
        return self._product_macro(node, dagger=True)

    def _build_deriv_macro(self, node: _Node) -> Expr:
        match = re.fullmatch(r"([AB])\[(\d+)\]_\{([\d,\s]+)\}", node.data["head"])
        which, axis = match.group(1), int(match.group(2))
        self._check_axis(axis, node.loc)
        species = self._species_list(match.group(3), node.loc)
        if len(species) != 2:
            self._fail("Derivative macros take exactly two species indices", ErrorCode.PARSE_SYNTAX, node.loc)
        mu, nu = species
        l1 = self._label(node.data["l1"], node.loc)
        l2 = self._label(node.data["l2"], node.loc)
        if which == "A":
            return self._anticommutator_half(OperatorFactor(mu, False, l1, (axis,)), OperatorFactor(nu, True, l2))
        return self._anticommutator_half(OperatorFactor(mu, False, l1), OperatorFactor(nu, True, l2, (axis,)))

    # -- helpers -----------------------------------------------------------------------------

    def _anticommutator_half(self, first: OperatorFactor, second: OperatorFactor) -> Expr:
        half = Scalar.of(Fraction(1, 2))
        return canonicalize(Expr((
            Term(half, ops=(first, second)),
            Term(half, ops=(second, first)),
        )))

    def _product_macro(self, node: _Node, dagger: bool) -> Expr:
        head = node.data["head"]
        species = self._species_list(head[head.index("{") + 1:-1], node.loc)
        labels = [self._optional_label(name, node.loc) for name in node.data["labels"]]
        if len(species) < 2 or len(species) != len(labels):
            self._fail("Product macros need matching species and labels (at least two)", ErrorCode.PARSE_SYNTAX, node.loc)
        ops = tuple(OperatorFactor(mu, dagger, label) for mu, label in zip(species, labels))
        return canonicalize(Expr((Term(Scalar.one(), ops=ops),)))

    def _species_list(self, text: str, loc: int) -> List[int]:
        compact = re.sub(r"\s", "", text)
        parts = compact.split(",") if "," in compact else list(compact)
        try:
            species = [int(part) for part in parts]
        except ValueError:
            self._fail(f"Malformed species list '{text}'", ErrorCode.PARSE_SYNTAX, loc)
        for mu in species:
            self._check_species(mu, loc)
        return species

    def _kernel(self, kind, node: _Node) -> Expr:
        label = self._label(node.data["label"], node.loc)
        return Expr((Term(Scalar.one(), kernels=(KernelFactor(kind, label),)),))

    def _number(self, text: str, loc: int, imaginary: bool) -> Expr:
        try:
            value = Fraction(text)
        except (ValueError, ZeroDivisionError):
            self._fail(f"Invalid rational literal '{text}'", ErrorCode.PARSE_SYNTAX, loc)
        coeff = Scalar(Fraction(0), value) if imaginary else Scalar(value)
        return Expr((Term(coeff),)) if not coeff.is_zero() else Expr(())

    def _power(self, node: _Node) -> int:
        if "power" not in node.data:
            return 1
        power = int(node.data["power"])
        if power == 0:
            self._fail("Exponent must be nonzero", ErrorCode.PARSE_SYNTAX, node.loc)
        return power

    def _axes(self, node: _Node, name: str) -> Tuple[int, ...]:
        if name not in node.data:
            return ()
        axes = tuple(int(axis) for axis in node.data[name])
        for axis in axes:
            self._check_axis(axis, node.loc)
        return axes

    def _check_axis(self, axis: int, loc: int) -> None:
        if not 1 <= axis <= self.dimension:
            self._fail(
                f"Unknown axis {axis} for momentum dimension {self.dimension}", ErrorCode.PARSE_UNKNOWN_AXIS, loc
            )

    def _check_species(self, species: int, loc: int) -> None:
        if not 1 <= species <= self.species_count:
            self._fail(
                f"Species {species} outside 1..{self.species_count}", ErrorCode.PARSE_SPECIES_RANGE, loc
            )

    def _label(self, name: str, loc: int) -> MomentumLabel:
        if name == DISCRETE:
            self._fail("A momentum label is required here", ErrorCode.PARSE_SYNTAX, loc)
        return MomentumLabel(name, self.dimension)

    def _optional_label(self, name: str, loc: int) -> Optional[MomentumLabel]:
        return None if name == DISCRETE else self._label(name, loc)


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def render(e: Expr) -> str:
    """Deterministic text for a canonical expression; ``parse(render(e)) == e``."""
    if not e.terms:
        return "0"
    pieces = []
    for index, term in enumerate(e.terms):
        negative, body = _render_term(term)
        if index == 0:
            pieces.append(("-" if negative else "") + body)
        else:
            pieces.append((" - " if negative else " + ") + body)
    return "".join(pieces)


def _render_term(term: Term) -> Tuple[bool, str]:
    coeff = term.coeff
    negative = (coeff.im == 0 and coeff.re < 0) or (coeff.re == 0 and coeff.im < 0)
    magnitude = -coeff if negative else coeff

    parts = [f"int({label.name})" for label in term.bound]
    number = _render_number(magnitude)
    atoms = [name if exponent == 1 else f"{name}^{exponent}" for name, exponent in magnitude.atoms]
    factors = (
        [_render_kernel(kernel) for kernel in term.kernels]
        + [_render_delta(delta) for delta in term.deltas]
        + [_render_operator(op) for op in term.ops]
    )
    if not number and not atoms and not factors:
        number = "1"
    if number:
        parts.append(number)
    parts.extend(atoms)
    parts.extend(factors)
    return negative, " ".join(parts)


def _render_number(value: Scalar) -> str:
    re_part, im_part = value.re, value.im
    if im_part == 0:
        return "" if re_part == 1 else str(re_part)
    if re_part == 0:
        return "i" if im_part == 1 else f"{im_part}i"
    sign = "+" if im_part > 0 else "-"
    magnitude = abs(im_part)
    return f"({re_part}{sign}{'' if magnitude == 1 else magnitude}i)"


def _render_power(power: int) -> str:
    return "" if power == 1 else f"^{power}"


def _render_axes(axes: Tuple[int, ...]) -> str:
    return "[" + ",".join(str(axis) for axis in axes) + "]"


def _render_kernel(kernel: KernelFactor) -> str:
    kind = kernel.kind
    if isinstance(kind, ComponentPower):
        head = f"k[{kind.axis}]"
    elif isinstance(kind, Energy):
        head = f"w_{kind.species}"
    else:
        head = f"fn_{kind.name}"
    return f"{head}({kernel.label.name}){_render_power(kind.power)}"


def _render_delta(delta: DeltaFactor) -> str:
    suffix = "'" + _render_axes(delta.deriv) if delta.deriv else ""
    return f"delta({delta.lhs.name},{delta.rhs.name}){suffix}"


def _render_operator(op: OperatorFactor) -> str:
    head = ("d" if op.deriv else "") + "a" + ("+" if op.dagger else "") + f"_{op.species}"
    axes = _render_axes(op.deriv) if op.deriv else ""
    return f"{head}{axes}({op.label_name})"


def parse(source: str, species_count: int = 3, dimension: int = 3) -> Expr:
    """Module-level convenience wrapper around ``ExpressionParser.parse``."""
    return ExpressionParser(species_count=species_count, dimension=dimension).parse(source)
