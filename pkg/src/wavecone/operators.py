"""Structural analysis of homogeneous differential operator symbols.

An operator acts on V-valued fields through a matrix-valued homogeneous
polynomial symbol.  This module certifies constant rank (exact upper bound via
characteristic-coefficient tail vanishing, probabilistic lower bound via
sampling), computes the span of the wave cone, and tests cocancellation.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .polyalg import (
    DimensionMismatch,
    DomainError,
    HomPoly,
    MultiIndex,
    PolyMatrix,
    RationalMatrix,
    faddeev_leverrier,
    multi_indices,
)

VERDICT_CONSTANT_RANK = "constant_rank_verified_probabilistic"
VERDICT_NOT_CONSTANT = "rank_not_constant"
VERDICT_INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class OperatorSymbol:
    """A homogeneous operator symbol with both matrix and coefficient views.

    The symbol is a dim_to x dim_from matrix of degree-`order` polynomials in
    `n` variables; `coeffs` maps each exponent tuple of total degree `order`
    to the rational matrix of that monomial's coefficients.  The two views
    agree entrywise by construction.
    """

    name: str
    n: int
    order: int
    dim_from: int
    dim_to: int
    symbol: PolyMatrix
    coeffs: dict[MultiIndex, RationalMatrix] = field(repr=False)

    @classmethod
    def from_symbol(cls, name: str, symbol: PolyMatrix) -> "OperatorSymbol":
        coeffs: dict[MultiIndex, RationalMatrix] = {}
        for alpha in multi_indices(symbol.n, symbol.degree):
            coeffs[alpha] = RationalMatrix(
                [
                    [symbol.entries[i][j].terms.get(alpha, Fraction(0)) for j in range(symbol.cols)]
                    for i in range(symbol.rows)
                ]
            )
        return cls(
            name=name,
            n=symbol.n,
            order=symbol.degree,
            dim_from=symbol.cols,
            dim_to=symbol.rows,
            symbol=symbol,
            coeffs=coeffs,
        )

    @classmethod
    def from_coeffs(
        cls,
        name: str,
        n: int,
        order: int,
        coeffs: dict[MultiIndex, RationalMatrix],
    ) -> "OperatorSymbol":
        if not coeffs:
            raise DimensionMismatch("need at least one coefficient matrix")
        shapes = {(m.rows, m.cols) for m in coeffs.values()}
        if len(shapes) != 1:
            raise DimensionMismatch("coefficient matrices have inconsistent shapes")
        rows, cols = shapes.pop()
        full = {alpha: coeffs.get(alpha) for alpha in multi_indices(n, order)}
        entries = []
        for i in range(rows):
            row = []
            for j in range(cols):
                terms = {
                    alpha: m.entries[i][j]
                    for alpha, m in full.items()
                    if m is not None and m.entries[i][j] != 0
                }
                row.append(HomPoly(n, order, terms))
            entries.append(row)
        return cls.from_symbol(name, PolyMatrix(entries))

    def adjoint(self) -> "OperatorSymbol":
        return OperatorSymbol.from_symbol(self.name + "*", self.symbol.transpose())

    def __call__(self, xi: Sequence) -> RationalMatrix:
        return self.symbol.eval(xi)


@dataclass(frozen=True)
class RankReport:
    generic_rank: int
    tail_vanishes: bool
    min_sampled_cr: Fraction
    sample_count: int
    rank_drop_points: list[tuple[int, ...]]
    verdict: str
    seed: int

    def to_json_dict(self) -> dict:
        return {
            "generic_rank": self.generic_rank,
            "tail_vanishes": self.tail_vanishes,
            "verdict": self.verdict,
            "drop_points": [list(p) for p in self.rank_drop_points],
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


@dataclass(frozen=True)
class WaveConeReport:
    span_basis: list[tuple[Fraction, ...]]
    witnesses: list[tuple[int, ...]]
    spans_V: bool
    samples_used: int

    def to_json_dict(self) -> dict:
        return {
            "span_dim": len(self.span_basis),
            "spans_V": self.spans_V,
            "samples_used": self.samples_used,
            "basis": [[str(x) for x in v] for v in self.span_basis],
            "witnesses": [list(w) for w in self.witnesses],
        }


def sample_points(n: int, count: int, rng: random.Random) -> list[tuple[int, ...]]:
    """Deterministic sampling set: coordinate directions, +-e_i +- e_j, then
    `count` random nonzero integer vectors with coordinates in [-9, 9]."""
    pts: list[tuple[int, ...]] = []
    seen: set[tuple[int, ...]] = set()

    def push(p: tuple[int, ...]) -> None:
        if any(p) and p not in seen:
            seen.add(p)
            pts.append(p)

    for i in range(n):
        e = [0] * n
        e[i] = 1
        push(tuple(e))
    for i in range(n):
        for j in range(i + 1, n):
            for si in (1, -1):
                for sj in (1, -1):
                    e = [0] * n
                    e[i], e[j] = si, sj
                    push(tuple(e))
    produced = 0
    while produced < count:
        p = tuple(rng.randint(-9, 9) for _ in range(n))
        if not any(p):
            continue
        produced += 1
        push(p)
    return pts


def symbol_rank_at(a: OperatorSymbol, xi: Sequence) -> int:
    """Exact rank of the symbol at a nonzero rational frequency."""
    if len(xi) != a.n:
        raise DimensionMismatch(f"frequency has {len(xi)} coordinates, expected {a.n}")
    if not any(Fraction(x) != 0 for x in xi):
        raise DomainError("rank at the origin is 0 and carries no information")
    return a(xi).rank()


def constant_rank_check(a: OperatorSymbol, sample_count: int = 200, seed: int = 0) -> RankReport:
    """Certify rank <= r everywhere (exact) and rank >= r on samples.

    With M = A(xi)A(xi)* positive semidefinite, (-1)^j c_j equals the sum of
    principal j-minors of M, so c_j == 0 identically for j > r certifies that
    the rank never exceeds r, while (-1)^r c_r(xi) > 0 witnesses rank r at xi.
    The lower bound for *all* xi is not decidable by sampling, hence the
    probabilistic verdict.
    """
    if sample_count < a.dim_to:
        raise DomainError("sample_count must be at least dim_to")
    rng = random.Random(seed)
    pts = sample_points(a.n, sample_count, rng)

    m = a.symbol.mul(a.symbol.transpose())
    cs = faddeev_leverrier(m)

    ranks = {pt: a(pt).rank() for pt in pts}
    r = max(ranks.values())
    tail_vanishes = all(cs[j].is_zero() for j in range(r, len(cs)))
    drop_points = [pt for pt in pts if ranks[pt] < r]

    if r == 0:
        min_cr = Fraction(0)
    else:
        sign = Fraction(-1) ** r
        min_cr = min(sign * cs[r - 1].eval(pt) for pt in pts)

    if drop_points:
        verdict = VERDICT_NOT_CONSTANT
    elif tail_vanishes:
        verdict = VERDICT_CONSTANT_RANK
    else:
        verdict = VERDICT_INCONCLUSIVE

    return RankReport(
        generic_rank=r,
        tail_vanishes=tail_vanishes,
        min_sampled_cr=min_cr,
        sample_count=len(pts),
        rank_drop_points=drop_points,
        verdict=verdict,
        seed=seed,
    )


def generic_rank(a: OperatorSymbol) -> int:
    """Largest j with c_j not identically zero for M = AA*; exact and seed-free."""
    m = a.symbol.mul(a.symbol.transpose())
    cs = faddeev_leverrier(m)
    for j in range(len(cs), 0, -1):
        if not cs[j - 1].is_zero():
            return j
    return 0


def _extend_span(
    span_rows: list[tuple[Fraction, ...]], candidate: Sequence[Fraction]
) -> bool:
    """Append candidate if it enlarges the rational span; returns True if added."""
    trial = span_rows + [tuple(Fraction(x) for x in candidate)]
    if RationalMatrix(trial).rank() == len(trial):
        span_rows.append(trial[-1])
        return True
    return False


def wave_cone_span(a: OperatorSymbol, sample_count: int = 50, seed: int = 0) -> WaveConeReport:
    """Span of the union of ker A(xi) over sampled nonzero frequencies.

    Kernels are exact; the span can only be a lower bound for the span of the
    full wave cone, which suffices for certifying spans_V = True.
    """
    if sample_count < 1:
        raise DomainError("sample_count must be positive")
    rng = random.Random(seed)
    pts = sample_points(a.n, sample_count, rng)
    span: list[tuple[Fraction, ...]] = []
    witnesses: list[tuple[int, ...]] = []
    used = 0
    for pt in pts:
        used += 1
        _, kernel = a(pt).nullspace()
        for vec in kernel:
            if _extend_span(span, vec):
                witnesses.append(pt)
        if len(span) == a.dim_from:
            break
    return WaveConeReport(
        span_basis=span,
        witnesses=witnesses,
        spans_V=(len(span) == a.dim_from),
        samples_used=used,
    )


def cocanceling_check(b: OperatorSymbol) -> tuple[list[tuple[Fraction, ...]], bool]:
    """Basis of the joint kernel of all coefficient matrices; empty iff cocanceling.

    The intersection of ker B(xi) over all xi equals the intersection of the
    kernels of the coefficient matrices, computed here by stacking them.
    """
    stacked: list[Sequence[Fraction]] = []
    for alpha in sorted(b.coeffs, key=lambda t: (sum(t), t)):
        stacked.extend(b.coeffs[alpha].entries)
    _, basis = RationalMatrix(stacked).nullspace()
    return basis, not basis
