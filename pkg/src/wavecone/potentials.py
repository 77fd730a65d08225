"""Construction and verification of potential operators.

A potential for an annihilator A is an operator B whose symbol satisfies
im B(xi) = ker A(xi) off the origin.  The construction used here builds
B(xi) = c_r(xi) * (I - pinv(A)(xi) A(xi)) out of the characteristic
coefficients of M = A A*, which is a polynomial matrix of order 2*l*r; the
embedded pseudoinverse follows the Decell characteristic-polynomial formula
and is cross-checked against the exact Moore-Penrose pseudoinverse at sample
frequencies rather than trusted.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .operators import OperatorSymbol, generic_rank, sample_points
from .polyalg import (
    DimensionMismatch,
    DomainError,
    HomPoly,
    MultiIndex,
    PolyMatrix,
    RationalMatrix,
    _faddeev_leverrier_aux,
    moore_penrose,
    multi_indices,
)

PROVENANCE_RAITA = "raita_construction"
PROVENANCE_USER = "user_supplied"
PROVENANCE_SEARCH = "order_search"


class ConstructionError(RuntimeError):
    """Internal self-check failure; never silently repaired."""


@dataclass(frozen=True)
class PotentialSymbol:
    op: OperatorSymbol
    provenance: str

    @property
    def order(self) -> int:
        return self.op.order

    @property
    def dim_u(self) -> int:
        return self.op.dim_from

    @property
    def dim_v(self) -> int:
        return self.op.dim_to


@dataclass(frozen=True)
class ExactnessReport:
    product_is_zero: bool
    rank_complementarity: bool
    samples: int

    @property
    def exact(self) -> bool:
        return self.product_is_zero and self.rank_complementarity

    def to_json_dict(self) -> dict:
        return {
            "product_is_zero": self.product_is_zero,
            "rank_complementarity": self.rank_complementarity,
            "samples": self.samples,
            "exact": self.exact,
        }


@dataclass(frozen=True)
class OrderSearchReport:
    order: int
    solution_space_dim: int
    basis: list[PotentialSymbol]
    max_generic_rank: int
    required_rank: int
    potential_exists: bool
    seed: int

    def to_json_dict(self) -> dict:
        return {
            "order": self.order,
            "solution_space_dim": self.solution_space_dim,
            "max_generic_rank": self.max_generic_rank,
            "required_rank": self.required_rank,
            "potential_exists": self.potential_exists,
            "seed": self.seed,
        }


def decell_pseudoinverse(
    a: OperatorSymbol, r: int, check_points: int = 20, seed: int = 0
) -> tuple[HomPoly, PolyMatrix]:
    """Characteristic-coefficient form of the symbol pseudoinverse.

    Returns (c_r, N) with N(xi) = A*(xi) (M^(r-1) + c_1 M^(r-2) + ... + c_{r-1} I)
    for M = A A*, so that -N(xi)/c_r(xi) is the pseudoinverse of A(xi) for
    xi != 0.  The sign convention is enforced by comparing against the exact
    Moore-Penrose pseudoinverse at `check_points` sampled frequencies; a
    mismatch raises ConstructionError instead of flipping signs.
    """
    if not 1 <= r <= a.dim_to:
        raise DomainError(f"rank {r} out of range for a {a.dim_to}x{a.dim_from} symbol")
    m = a.symbol.mul(a.symbol.transpose())
    coeffs, partials = _faddeev_leverrier_aux(m)
    c_r = coeffs[r - 1]
    if c_r.is_zero():
        raise DomainError(
            f"c_{r} vanishes identically; the symbol does not have generic rank {r}"
        )
    numerator = a.symbol.transpose().mul(partials[r - 1])

    rng = random.Random(seed)
    checked = 0
    for pt in sample_points(a.n, check_points * 4, rng):
        if checked >= check_points:
            break
        c_val = c_r.eval(pt)
        if c_val == 0:
            continue
        candidate = numerator.eval(pt).scale(Fraction(-1) / c_val)
        if candidate != moore_penrose(a(pt)):
            raise ConstructionError(
                f"Decell convention mismatch at frequency {pt}"
            )
        checked += 1
    if checked < check_points:
        raise ConstructionError("could not collect enough sample frequencies with c_r != 0")
    return c_r, numerator


def raita_potential(a: OperatorSymbol, r: int | None = None, seed: int = 0) -> PotentialSymbol:
    """Potential of order 2*l*r built from the pseudoinverse projection.

    B(xi) = c_r(xi) I + A*(xi)(M^(r-1) + c_1 M^(r-2) + ... + c_{r-1} I) A(xi)
    equals c_r(xi) * Proj_{ker A(xi)}, so its image is exactly ker A(xi)
    wherever c_r does not vanish, i.e. for all xi != 0 under constant rank.
    The caller is expected to have certified constant rank beforehand.
    """
    if r is None:
        r = generic_rank(a)
    if r == 0:
        raise DomainError("zero operator has no meaningful potential")
    c_r, numerator = decell_pseudoinverse(a, r, seed=seed)
    # c_r * I_V lives in degree 2*l*r, matching A* S A.
    correction = numerator.mul(a.symbol)
    b_symbol = PolyMatrix.scalar(a.dim_from, c_r).add(correction)
    op = OperatorSymbol.from_symbol(f"{a.name}_potential", b_symbol)
    return PotentialSymbol(op=op, provenance=PROVENANCE_RAITA)


def verify_exactness(
    a: OperatorSymbol,
    b: OperatorSymbol | PotentialSymbol,
    samples: int = 100,
    seed: int = 0,
) -> ExactnessReport:
    """Exactness certificate: A(xi)B(xi) = 0 symbolically and rank
    complementarity rank B(xi) = dim V - rank A(xi) at sampled frequencies.

    AB = 0 gives im B(xi) a subset of ker A(xi); matching dimensions upgrade
    the inclusion to equality at each sampled frequency.
    """
    bop = b.op if isinstance(b, PotentialSymbol) else b
    if a.dim_from != bop.dim_to:
        raise DimensionMismatch(
            f"annihilator expects {a.dim_from} components, potential produces {bop.dim_to}"
        )
    if a.n != bop.n:
        raise DimensionMismatch("variable counts differ")
    product_zero = a.symbol.mul(bop.symbol).is_zero()
    rng = random.Random(seed)
    pts = sample_points(a.n, samples, rng)
    complement = all(bop(pt).rank() == a.dim_from - a(pt).rank() for pt in pts)
    return ExactnessReport(
        product_is_zero=product_zero,
        rank_complementarity=complement,
        samples=len(pts),
    )


def _potential_unknowns(
    n: int, kappa: int, dim_v: int, dim_u: int
) -> list[tuple[MultiIndex, int, int]]:
    """Unknown order: alpha graded-lex, then row-major entries of B_alpha."""
    return [
        (alpha, i, j)
        for alpha in multi_indices(n, kappa)
        for i in range(dim_v)
        for j in range(dim_u)
    ]


def potentials_of_order(
    a: OperatorSymbol,
    kappa: int,
    seed: int = 0,
    dim_u: int | None = None,
    rank_trials: int = 10,
) -> OrderSearchReport:
    """All order-kappa symbols B with A(xi)B(xi) = 0, and a generic-rank probe.

    The unknowns are the entries of every coefficient matrix B_alpha with
    |alpha| = kappa; equating every polynomial coefficient of A(xi)B(xi) to
    zero gives an exact linear system whose nullspace is returned.  A member
    is a potential iff its rank equals dim V - rank A at *every* xi != 0, so
    each probe trial takes a seeded random combination of the basis and
    records the minimum exact rank over the standard sampling set (which
    includes the coordinate subspaces where rank drops happen);
    max_generic_rank is the best such guarantee over the trials.
    """
    if kappa < 1:
        raise DomainError("potential order must be at least 1")
    dim_v = a.dim_from
    dim_u = dim_v if dim_u is None else dim_u
    unknowns = _potential_unknowns(a.n, kappa, dim_v, dim_u)
    index_of = {key: pos for pos, key in enumerate(unknowns)}

    # Rows: coefficient of xi^gamma in entry (i, j) of A(xi) B(xi).
    rows: dict[tuple[MultiIndex, int, int], list[Fraction]] = {}
    for beta, a_mat in a.coeffs.items():
        for alpha in multi_indices(a.n, kappa):
            gamma = tuple(x + y for x, y in zip(beta, alpha))
            for i in range(a.dim_to):
                for k in range(dim_v):
                    coeff = a_mat.entries[i][k]
                    if coeff == 0:
                        continue
                    for j in range(dim_u):
                        key = (gamma, i, j)
                        if key not in rows:
                            rows[key] = [Fraction(0)] * len(unknowns)
                        rows[key][index_of[(alpha, k, j)]] += coeff
    system = RationalMatrix([rows[k] for k in sorted(rows)])
    _, basis = system.nullspace()

    def vector_to_symbol(vec: Sequence[Fraction], tag: str) -> PotentialSymbol:
        coeffs = {}
        for alpha in multi_indices(a.n, kappa):
            coeffs[alpha] = RationalMatrix(
                [
                    [vec[index_of[(alpha, i, j)]] for j in range(dim_u)]
                    for i in range(dim_v)
                ]
            )
        op = OperatorSymbol.from_coeffs(tag, a.n, kappa, coeffs)
        return PotentialSymbol(op=op, provenance=PROVENANCE_SEARCH)

    candidates = [
        vector_to_symbol(vec, f"{a.name}_order{kappa}_{idx}")
        for idx, vec in enumerate(basis)
    ]

    required = dim_v - generic_rank(a)
    rng = random.Random(seed)
    max_rank = 0
    if basis:
        probe_points = sample_points(a.n, 20, rng)
        for _ in range(rank_trials):
            combo = [Fraction(0)] * len(unknowns)
            for vec in basis:
                w = Fraction(rng.randint(-9, 9))
                if w:
                    combo = [c + w * x for c, x in zip(combo, vec)]
            symbol = vector_to_symbol(combo, "probe").op
            trial_rank = min(symbol(pt).rank() for pt in probe_points)
            max_rank = max(max_rank, trial_rank)
            if max_rank >= required:
                break
    return OrderSearchReport(
        order=kappa,
        solution_space_dim=len(basis),
        basis=candidates,
        max_generic_rank=max_rank,
        required_rank=required,
        potential_exists=(max_rank == required),
        seed=seed,
    )


def symbol_isomorphism(
    b1: OperatorSymbol | PotentialSymbol,
    b2: OperatorSymbol | PotentialSymbol,
    trials: int = 10,
    seed: int = 0,
) -> Optional[RationalMatrix]:
    """Invertible Q with B1_alpha Q = B2_alpha for every alpha, if one exists.

    The matrix equations form an exact linear system in the entries of Q; if
    it is consistent, invertibility over the affine solution set is probed by
    seeded random combinations of the homogeneous solutions.
    """
    op1 = b1.op if isinstance(b1, PotentialSymbol) else b1
    op2 = b2.op if isinstance(b2, PotentialSymbol) else b2
    if (op1.dim_to, op1.dim_from) != (op2.dim_to, op2.dim_from) or op1.n != op2.n:
        raise DimensionMismatch("symbols must share shape and variable count")
    if op1.order != op2.order:
        raise DimensionMismatch("symbols must share order")
    u = op1.dim_from
    # Unknown Q is u x u, flattened row-major.
    rows: list[list[Fraction]] = []
    rhs: list[Fraction] = []
    for alpha in sorted(op1.coeffs, key=lambda t: (sum(t), t)):
        m1 = op1.coeffs[alpha]
        m2 = op2.coeffs[alpha]
        for i in range(op1.dim_to):
            for j in range(u):
                row = [Fraction(0)] * (u * u)
                for k in range(u):
                    row[k * u + j] = m1.entries[i][k]
                rows.append(row)
                rhs.append(m2.entries[i][j])
    particular, kernel = RationalMatrix(rows).solve(rhs)
    if particular is None:
        return None

    def to_matrix(flat: Sequence[Fraction]) -> RationalMatrix:
        return RationalMatrix([[flat[i * u + j] for j in range(u)] for i in range(u)])

    rng = random.Random(seed)
    candidates = [list(particular)]
    for _ in range(trials):
        flat = list(particular)
        for vec in kernel:
            w = Fraction(rng.randint(-9, 9))
            if w:
                flat = [c + w * x for c, x in zip(flat, vec)]
        candidates.append(flat)
    for flat in candidates:
        q = to_matrix(flat)
        if q.rank() == u:
            return q
    return None
