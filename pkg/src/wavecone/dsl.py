"""Parser for the operator-description text format and builtin operator registry.

Grammar (whitespace-insensitive, '#' comments to end of line):

    file     := operator+
    operator := "operator" IDENT "{" field+ "}"
    field    := ("vars"|"from"|"order") "=" INT ";" | "symbol" "=" matrix ";"
    matrix   := "[" row ("," row)* "]"
    row      := "[" poly ("," poly)* "]"
    poly     := ["-"] term (("+"|"-") term)*
    term     := [coeff ["*"]] factor ("*" factor)*  |  coeff
    factor   := "d" INT ["^" INT]
    coeff    := INT ["/" INT]

"dI" stands for the I-th frequency/derivative variable (1-based).  The target
dimension is inferred from the matrix row count; "from" is validated against
the column count.  Every entry must be homogeneous of the declared order
(the zero polynomial is fine at any order).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Callable, Optional

from .operators import OperatorSymbol
from .polyalg import DomainError, HomPoly, MultiIndex, PolyMatrix, multi_indices
from .potentials import PROVENANCE_USER, PotentialSymbol


@dataclass(frozen=True)
class OperatorSource:
    text: str
    filename: str = "<string>"


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int, filename: str = "<string>"):
        super().__init__(f"{filename}:{line}:{col}: {message}")
        self.line = line
        self.col = col
        self.filename = filename


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<punct>[{}\[\]=,;+\-*/^])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "int" | "ident" | "punct" | "eof"
    value: str
    line: int
    col: int


def _tokenize(src: OperatorSource) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    pos = 0
    text = src.text
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col, src.filename)
        kind = m.lastgroup
        value = m.group()
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, value, line, col))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            col = len(value) - value.rfind("\n")
        else:
            col += len(value)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, src: OperatorSource):
        self.src = src
        self.tokens = _tokenize(src)
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def error(self, message: str, tok: Token | None = None):
        tok = tok or self.peek()
        raise ParseError(message, tok.line, tok.col, self.src.filename)

    def expect(self, kind: str, value: str | None = None) -> Token:
        tok = self.peek()
        if tok.kind != kind or (value is not None and tok.value != value):
            want = value if value is not None else kind
            got = tok.value if tok.kind != "eof" else "end of input"
            self.error(f"expected {want!r}, found {got!r}", tok)
        return self.next()

    def at_punct(self, value: str) -> bool:
        tok = self.peek()
        return tok.kind == "punct" and tok.value == value

    # polynomial entries are collected inhomogeneously first so that the
    # homogeneity diagnostic can name the stray monomial
    def parse_poly(self, nvars: int) -> dict[tuple[int, ...], Fraction]:
        terms: dict[tuple[int, ...], Fraction] = {}
        sign = Fraction(1)
        if self.at_punct("-"):
            self.next()
            sign = Fraction(-1)
        while True:
            alpha, coeff = self.parse_term(nvars)
            coeff *= sign
            terms[alpha] = terms.get(alpha, Fraction(0)) + coeff
            if self.at_punct("+"):
                self.next()
                sign = Fraction(1)
            elif self.at_punct("-"):
                self.next()
                sign = Fraction(-1)
            else:
                break
        return {a: c for a, c in terms.items() if c != 0}

    def parse_term(self, nvars: int) -> tuple[tuple[int, ...], Fraction]:
        tok = self.peek()
        coeff = Fraction(1)
        have_coeff = False
        if tok.kind == "int":
            self.next()
            num = int(tok.value)
            if self.at_punct("/"):
                self.next()
                den_tok = self.expect("int")
                den = int(den_tok.value)
                if den == 0:
                    self.error("zero denominator", den_tok)
                coeff = Fraction(num, den)
            else:
                coeff = Fraction(num)
            have_coeff = True
            if self.at_punct("*"):
                self.next()
        exponents = [0] * nvars
        have_factor = False
        while True:
            tok = self.peek()
            if tok.kind == "ident" and re.fullmatch(r"d\d+", tok.value):
                self.next()
                idx = int(tok.value[1:])
                if not 1 <= idx <= nvars:
                    self.error(f"variable {tok.value} out of range for vars={nvars}", tok)
                power = 1
                if self.at_punct("^"):
                    self.next()
                    power = int(self.expect("int").value)
                exponents[idx - 1] += power
                have_factor = True
                if self.at_punct("*"):
                    nxt = self.tokens[self.pos + 1]
                    if nxt.kind == "ident" and re.fullmatch(r"d\d+", nxt.value):
                        self.next()
                        continue
                continue
            break
        if not have_coeff and not have_factor:
            self.error("expected a coefficient or a variable factor")
        return tuple(exponents), coeff

    def parse_row(self, nvars: int) -> list[dict[tuple[int, ...], Fraction]]:
        self.expect("punct", "[")
        polys = [self.parse_poly(nvars)]
        while self.at_punct(","):
            self.next()
            polys.append(self.parse_poly(nvars))
        self.expect("punct", "]")
        return polys

    def parse_matrix(self, nvars: int) -> list[list[dict[tuple[int, ...], Fraction]]]:
        self.expect("punct", "[")
        rows = [self.parse_row(nvars)]
        while self.at_punct(","):
            self.next()
            rows.append(self.parse_row(nvars))
        self.expect("punct", "]")
        return rows

    def parse_operator(self) -> OperatorSymbol:
        self.expect("ident", "operator")
        name_tok = self.expect("ident")
        self.expect("punct", "{")
        fields: dict[str, int] = {}
        matrix = None
        matrix_tok = None
        while not self.at_punct("}"):
            key_tok = self.expect("ident")
            key = key_tok.value
            if key not in ("vars", "from", "order", "symbol"):
                self.error(f"unknown field {key!r} (expected vars, from, order or symbol)", key_tok)
            self.expect("punct", "=")
            if key == "symbol":
                if "vars" not in fields:
                    self.error("'vars' must be declared before 'symbol'", key_tok)
                matrix_tok = self.peek()
                matrix = self.parse_matrix(fields["vars"])
            else:
                if key in fields:
                    self.error(f"duplicate field {key!r}", key_tok)
                fields[key] = int(self.expect("int").value)
            self.expect("punct", ";")
        self.expect("punct", "}")
        for required in ("vars", "from", "order"):
            if required not in fields:
                self.error(f"missing field {required!r} in operator {name_tok.value!r}", name_tok)
        if matrix is None:
            self.error(f"missing symbol in operator {name_tok.value!r}", name_tok)
        nvars, dim_from, order = fields["vars"], fields["from"], fields["order"]
        ncols = len(matrix[0])
        if any(len(row) != ncols for row in matrix):
            self.error("ragged matrix rows", matrix_tok)
        if ncols != dim_from:
            self.error(
                f"declared from={dim_from} but the matrix has {ncols} columns", matrix_tok
            )
        entries = []
        for i, row in enumerate(matrix):
            out_row = []
            for j, raw in enumerate(row):
                for alpha, coeff in raw.items():
                    if sum(alpha) != order:
                        mono = _render_monomial(alpha, coeff)
                        self.error(
                            f"entry ({i + 1},{j + 1}) is not homogeneous of order {order}: "
                            f"stray monomial {mono!r}",
                            matrix_tok,
                        )
                out_row.append(HomPoly(nvars, order, raw))
            entries.append(out_row)
        return OperatorSymbol.from_symbol(name_tok.value, PolyMatrix(entries))

    def parse_file(self) -> list[OperatorSymbol]:
        ops = [self.parse_operator()]
        while self.peek().kind != "eof":
            ops.append(self.parse_operator())
        return ops


def _render_monomial(alpha: tuple[int, ...], coeff: Fraction) -> str:
    factors = [f"d{i + 1}" + (f"^{e}" if e > 1 else "") for i, e in enumerate(alpha) if e]
    if not factors:
        return str(coeff)
    return f"{coeff}*" + "*".join(factors)


def parse_operators(src: OperatorSource | str, filename: str = "<string>") -> list[OperatorSymbol]:
    if isinstance(src, str):
        src = OperatorSource(src, filename)
    return _Parser(src).parse_file()


def parse_operator(src: OperatorSource | str, filename: str = "<string>") -> OperatorSymbol:
    ops = parse_operators(src, filename)
    if len(ops) != 1:
        raise DomainError(f"expected exactly one operator, found {len(ops)}")
    return ops[0]


def serialize_operator(op: OperatorSymbol) -> str:
    """Stable .op rendering; reparsing yields an identical OperatorSymbol."""
    lines = [f"operator {op.name} {{"]
    lines.append(f"  vars = {op.n};")
    lines.append(f"  from = {op.dim_from};")
    lines.append(f"  order = {op.order};")
    rows = []
    for i in range(op.dim_to):
        row = ", ".join(op.symbol.entries[i][j].render() for j in range(op.dim_from))
        rows.append(f"    [{row}]")
    lines.append("  symbol = [\n" + ",\n".join(rows) + "\n  ];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def operator_to_json_dict(op: OperatorSymbol) -> dict:
    """JSON export mirroring the coefficient view."""
    coeffs = {}
    for alpha in multi_indices(op.n, op.order):
        mat = op.coeffs[alpha]
        if mat.is_zero():
            continue
        key = ",".join(str(e) for e in alpha)
        coeffs[key] = [[str(x) for x in row] for row in mat.entries]
    return {"vars": op.n, "order": op.order, "coeffs": coeffs}


def operator_to_json(op: OperatorSymbol) -> str:
    return json.dumps(operator_to_json_dict(op), sort_keys=True)


# ---------------------------------------------------------------------------
# Builtin operators


@dataclass(frozen=True)
class BuiltinDescriptor:
    name: str
    signature: str
    notes: str
    generator: Callable[..., OperatorSymbol] = field(repr=False)
    potential_generator: Optional[Callable[..., OperatorSymbol]] = field(
        default=None, repr=False
    )


def _zero(n: int) -> HomPoly:
    return HomPoly.zero(n, 1)


def _var(n: int, i: int) -> HomPoly:
    return HomPoly.variable(n, i)


def _grad_coordinates(n: int, m: int, k: int) -> list[tuple[int, MultiIndex]]:
    """Target coordinates of the k-th order gradient: (component, alpha)."""
    return [(mu, alpha) for mu in range(m) for alpha in multi_indices(n, k)]


def _grad_potential(n: int, m: int, k: int) -> OperatorSymbol:
    coords = _grad_coordinates(n, m, k)
    entries = []
    for mu, alpha in coords:
        row = [
            HomPoly.monomial(n, alpha) if nu == mu else HomPoly.zero(n, k)
            for nu in range(m)
        ]
        entries.append(row)
    return OperatorSymbol.from_symbol(f"grad{k}_{n}x{m}", PolyMatrix(entries))


def _grad_annihilator(n: int, m: int, k: int) -> OperatorSymbol:
    """First-order compatibility operator for k-th order gradients."""
    coords = _grad_coordinates(n, m, k)
    index = {c: pos for pos, c in enumerate(coords)}
    rows = []
    for mu in range(m):
        for beta in multi_indices(n, k - 1):
            for i in range(n):
                for j in range(i + 1, n):
                    row = [_zero(n) for _ in coords]
                    a_j = tuple(b + (1 if t == j else 0) for t, b in enumerate(beta))
                    a_i = tuple(b + (1 if t == i else 0) for t, b in enumerate(beta))
                    row[index[(mu, a_j)]] = row[index[(mu, a_j)]].add(_var(n, i))
                    row[index[(mu, a_i)]] = row[index[(mu, a_i)]].sub(_var(n, j))
                    rows.append(row)
    return OperatorSymbol.from_symbol(f"curl{k}_{n}x{m}", PolyMatrix(rows))


def _div_operator(n: int, rows: int) -> OperatorSymbol:
    entries = []
    for mu in range(rows):
        row = [_zero(n)] * (rows * n)
        for j in range(n):
            row[mu * n + j] = _var(n, j)
        entries.append(row)
    return OperatorSymbol.from_symbol(f"div{n}_rows{rows}", PolyMatrix(entries))


def _div_potential(n: int, rows: int) -> OperatorSymbol | None:
    if n == 2:
        # row-wise rotated gradient: v_mu = (d2 u_mu, -d1 u_mu)
        entries = []
        for mu in range(rows):
            for j in range(2):
                row = [HomPoly.zero(2, 1)] * rows
                row[mu] = _var(2, 1) if j == 0 else _var(2, 0).neg()
                entries.append(row)
        return OperatorSymbol.from_symbol(f"perpgrad_rows{rows}", PolyMatrix(entries))
    if n == 3:
        # row-wise curl potential: v_mu = xi x u_mu
        cross = [
            [_zero(3), _var(3, 2).neg(), _var(3, 1)],
            [_var(3, 2), _zero(3), _var(3, 0).neg()],
            [_var(3, 1).neg(), _var(3, 0), _zero(3)],
        ]
        entries = []
        for mu in range(rows):
            for i in range(3):
                row = [_zero(3)] * (3 * rows)
                for j in range(3):
                    row[mu * 3 + j] = cross[i][j]
                entries.append(row)
        return OperatorSymbol.from_symbol(f"curlpot_rows{rows}", PolyMatrix(entries))
    return None


def _sym_pairs(n: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(n) for j in range(i, n)]


def _symgrad_potential(n: int) -> OperatorSymbol:
    pairs = _sym_pairs(n)
    entries = []
    for i, j in pairs:
        row = []
        for mu in range(n):
            p = HomPoly.zero(n, 1)
            if i == j:
                if mu == i:
                    p = _var(n, i)
            else:
                if mu == i:
                    p = _var(n, j).scale(Fraction(1, 2))
                elif mu == j:
                    p = _var(n, i).scale(Fraction(1, 2))
            row.append(p)
        entries.append(row)
    return OperatorSymbol.from_symbol(f"symgrad{n}", PolyMatrix(entries))


def _saint_venant(n: int) -> OperatorSymbol:
    """Second-order compatibility operator for symmetric gradients.

    Rows d_kl v_ij + d_ij v_kl - d_jk v_il - d_il v_jk over all index
    quadruples, with zero rows dropped and sign-duplicates collapsed.
    """
    pairs = _sym_pairs(n)
    index = {p: pos for pos, p in enumerate(pairs)}

    def coord(i: int, j: int) -> int:
        return index[(min(i, j), max(i, j))]

    def mono(i: int, j: int) -> HomPoly:
        alpha = [0] * n
        alpha[i] += 1
        alpha[j] += 1
        return HomPoly.monomial(n, alpha)

    rows = []
    seen: set[tuple] = set()
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    row = [HomPoly.zero(n, 2) for _ in pairs]
                    row[coord(i, j)] = row[coord(i, j)].add(mono(k, l))
                    row[coord(k, l)] = row[coord(k, l)].add(mono(i, j))
                    row[coord(i, l)] = row[coord(i, l)].sub(mono(j, k))
                    row[coord(j, k)] = row[coord(j, k)].sub(mono(i, l))
                    if all(p.is_zero() for p in row):
                        continue
                    key = _row_signature(row)
                    if key in seen:
                        continue
                    seen.add(key)
                    rows.append(row)
    return OperatorSymbol.from_symbol(f"saintvenant{n}", PolyMatrix(rows))


def _row_signature(row: list[HomPoly]) -> tuple:
    flat = []
    for pos, p in enumerate(row):
        for alpha in sorted(p.terms):
            flat.append((pos, alpha, p.terms[alpha]))
    if not flat:
        return ()
    lead = flat[0][2]
    sign = 1 if lead > 0 else -1
    return tuple((pos, alpha, sign * c) for pos, alpha, c in flat)


def _divcurl_operator(n: int) -> OperatorSymbol:
    # fields (b, e) in R^{2n}: div b = 0 and curl e = 0
    rows = []
    div_row = [_var(n, j) for j in range(n)] + [_zero(n)] * n
    rows.append(div_row)
    for i in range(n):
        for j in range(i + 1, n):
            row = [_zero(n)] * (2 * n)
            row[n + j] = _var(n, i)
            row[n + i] = _var(n, j).neg()
            rows.append(row)
    return OperatorSymbol.from_symbol(f"divcurl{n}", PolyMatrix(rows))


def _divcurl_potential(n: int) -> OperatorSymbol | None:
    div_pot = _div_potential(n, 1)
    if div_pot is None:
        return None
    u_div = div_pot.dim_from
    entries = []
    for i in range(n):
        row = list(div_pot.symbol.entries[i]) + [_zero(n)]
        entries.append(row)
    for i in range(n):
        row = [_zero(n)] * u_div + [_var(n, i)]
        entries.append(row)
    return OperatorSymbol.from_symbol(f"divcurlpot{n}", PolyMatrix(entries))


def _separate_convexity(n: int) -> OperatorSymbol:
    rows = []
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            row = [_zero(n)] * n
            row[j] = _var(n, i)
            rows.append(row)
    return OperatorSymbol.from_symbol(f"sepconv{n}", PolyMatrix(rows))


def _load_data_operator(basename: str) -> OperatorSymbol:
    text = resources.files("wavecone.data").joinpath(basename).read_text()
    return parse_operator(OperatorSource(text, basename))


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise DomainError(message)


_REGISTRY: dict[str, BuiltinDescriptor] = {}


def _register(desc: BuiltinDescriptor) -> None:
    _REGISTRY[desc.name] = desc


_register(
    BuiltinDescriptor(
        name="grad",
        signature="grad(n, m=1, k=1)",
        notes="k-th order gradients of m-component fields; operator is the "
        "first-order compatibility system, potential is D^k",
        generator=lambda n, m=1, k=1: (
            _require(n >= 2 and m >= 1 and k >= 1, "grad needs n>=2, m>=1, k>=1"),
            _grad_annihilator(n, m, k),
        )[1],
        potential_generator=lambda n, m=1, k=1: _grad_potential(n, m, k),
    )
)
_register(
    BuiltinDescriptor(
        name="curl",
        signature="curl(n, rows=1)",
        notes="row-wise curl on (rows x n)-matrix fields; gradient potential attached",
        generator=lambda n, rows=1: (
            _require(n >= 2 and rows >= 1, "curl needs n>=2, rows>=1"),
            _grad_annihilator(n, rows, 1),
        )[1],
        potential_generator=lambda n, rows=1: _grad_potential(n, rows, 1),
    )
)
_register(
    BuiltinDescriptor(
        name="div",
        signature="div(n, rows=1)",
        notes="row-wise divergence on (rows x n)-matrix fields; rotated-gradient "
        "potential for n=2, curl potential for n=3",
        generator=lambda n, rows=1: (
            _require(n >= 2 and rows >= 1, "div needs n>=2, rows>=1"),
            _div_operator(n, rows),
        )[1],
        potential_generator=lambda n, rows=1: _div_potential(n, rows),
    )
)
_register(
    BuiltinDescriptor(
        name="symgrad",
        signature="symgrad(n)",
        notes="annihilator of symmetric gradients (Saint-Venant compatibility) "
        "with the symmetric-derivative potential attached",
        generator=lambda n: (
            _require(n >= 2, "symgrad needs n>=2"),
            _saint_venant(n),
        )[1],
        potential_generator=lambda n: _symgrad_potential(n),
    )
)
_register(
    BuiltinDescriptor(
        name="curlcurl",
        signature="curlcurl(n)",
        notes="Saint-Venant compatibility operator on symmetric-matrix fields",
        generator=lambda n: (
            _require(n >= 2, "curlcurl needs n>=2"),
            _saint_venant(n),
        )[1],
        potential_generator=lambda n: _symgrad_potential(n),
    )
)
_register(
    BuiltinDescriptor(
        name="divcurl",
        signature="divcurl(n)",
        notes="coupled constraint div b = 0, curl e = 0 on pairs (b, e); "
        "first-order potential attached for n in {2, 3}",
        generator=lambda n: (
            _require(n >= 2, "divcurl needs n>=2"),
            _divcurl_operator(n),
        )[1],
        potential_generator=lambda n: _divcurl_potential(n),
    )
)
_register(
    BuiltinDescriptor(
        name="hessian",
        signature="hessian(n)",
        notes="annihilator of second gradients of scalar fields; potential is D^2",
        generator=lambda n: (
            _require(n >= 2, "hessian needs n>=2"),
            _grad_annihilator(n, 1, 2),
        )[1],
        potential_generator=lambda n: _grad_potential(n, 1, 2),
    )
)
_register(
    BuiltinDescriptor(
        name="separate_convexity",
        signature="separate_convexity(n)",
        notes="off-diagonal derivative constraints (d_i v_j for i != j); "
        "exhibits rank drop along coordinate directions, not constant rank",
        generator=lambda n: (
            _require(n >= 2, "separate_convexity needs n>=2"),
            _separate_convexity(n),
        )[1],
    )
)
_register(
    BuiltinDescriptor(
        name="appendix_A",
        signature="appendix_A()",
        notes="3x7 first-order operator of rank 3 admitting two genuinely "
        "different order-3 potentials; loaded from the shipped .op data file",
        generator=lambda: _load_data_operator("appendix_A.op"),
        potential_generator=lambda: _load_data_operator("appendix_B1.op"),
    )
)
_register(
    BuiltinDescriptor(
        name="appendix_B1",
        signature="appendix_B1()",
        notes="first of the two order-3 potentials for appendix_A",
        generator=lambda: _load_data_operator("appendix_B1.op"),
    )
)
_register(
    BuiltinDescriptor(
        name="appendix_B2",
        signature="appendix_B2()",
        notes="second of the two order-3 potentials for appendix_A; "
        "not isomorphic to appendix_B1",
        generator=lambda: _load_data_operator("appendix_B2.op"),
    )
)


def list_builtins() -> list[BuiltinDescriptor]:
    return [_REGISTRY[name] for name in sorted(_REGISTRY)]


def builtin(name: str, **params) -> tuple[OperatorSymbol, Optional[PotentialSymbol]]:
    if name not in _REGISTRY:
        known = ", ".join(sorted(_REGISTRY))
        raise DomainError(f"unknown builtin {name!r} (known: {known})")
    desc = _REGISTRY[name]
    try:
        op = desc.generator(**params)
    except TypeError as exc:
        raise DomainError(f"bad parameters for {desc.signature}: {exc}") from None
    pot = None
    if desc.potential_generator is not None:
        pot_op = desc.potential_generator(**params)
        if pot_op is not None:
            pot = PotentialSymbol(op=pot_op, provenance=PROVENANCE_USER)
    return op, pot
