"""Enumeration of quasiaffine polynomials (null Lagrangians) of a given degree.

The route goes through the jet realization of the potential: writing B as a
constant linear map T applied to the full k-jet, every weakly continuous
polynomial pulls back to an affine combination of minors of the N x n matrix
representation of the jet.  Requiring that the combination only depends on the
T-image direction yields an exact linear system for the minor coefficients
c_M; its nullspace is mapped back to polynomials on the field space V.

Degree-1 functionals are quasiaffine for every operator with mean-zero test
fields and are reported without solving any system.
"""

from __future__ import annotations

import random
import warnings
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Sequence

from .operators import OperatorSymbol, sample_points
from .polyalg import (
    DimensionMismatch,
    DomainError,
    HomPoly,
    MultiIndex,
    RationalMatrix,
    grlex_key,
    moore_penrose,
    multi_indices,
)
from .potentials import PotentialSymbol

DEFAULT_MINOR_CAP = 20000


@dataclass(frozen=True)
class JetSpace:
    """Coordinates of the symmetric k-jet of U-valued maps on R^n.

    Coordinates are pairs (component, alpha) with |alpha| = k, ordered by
    component first and graded-lex on alpha; N is the row count of the matrix
    representation, i.e. dim_u times the number of multi-indices of degree
    k - 1.
    """

    n: int
    k: int
    dim_u: int

    @property
    def coordinates(self) -> list[tuple[int, MultiIndex]]:
        return [
            (nu, alpha)
            for nu in range(self.dim_u)
            for alpha in multi_indices(self.n, self.k)
        ]

    @property
    def dim(self) -> int:
        return self.dim_u * len(multi_indices(self.n, self.k))

    @property
    def rows(self) -> list[tuple[int, MultiIndex]]:
        return [
            (nu, beta)
            for nu in range(self.dim_u)
            for beta in multi_indices(self.n, self.k - 1)
        ]

    @property
    def N(self) -> int:
        return self.dim_u * len(multi_indices(self.n, self.k - 1))


@dataclass(frozen=True)
class JetLinearMap:
    """The constant map T with B = T o D^k, plus derived exact projections.

    `t` maps jet coordinates to V.  `j_hat` (the pseudoinverse of t) is a
    right inverse of t on its image; `t_hat` = j_hat * t is the projection of
    the jet space onto the orthogonal complement of ker T.  `surjective`
    records whether T is onto V, which is equivalent to the wave cone of the
    annihilator spanning V.
    """

    jet: JetSpace
    t: RationalMatrix
    j_hat: RationalMatrix
    t_hat: RationalMatrix
    surjective: bool

    @property
    def dim_v(self) -> int:
        return self.t.rows

    def with_complement(self, complement: Sequence[Sequence[Fraction]]) -> "JetLinearMap":
        """Same T, but identified along a user-chosen complement of ker T.

        `complement` is a basis (rows) of a subspace J with jet = ker T + J;
        the replacement for j_hat becomes the inverse of T restricted to J and
        t_hat the projection onto J along ker T.  Only available when T is
        surjective.
        """
        if not self.surjective:
            raise DomainError("complement identification needs a surjective T")
        basis = RationalMatrix([list(row) for row in complement]).transpose()
        if basis.rows != self.jet.dim or basis.cols != self.dim_v:
            raise DimensionMismatch("complement basis has the wrong shape")
        t_on_j = self.t.mul(basis)
        j_hat = basis.mul(t_on_j.inverse())
        t_hat = j_hat.mul(self.t)
        return JetLinearMap(
            jet=self.jet, t=self.t, j_hat=j_hat, t_hat=t_hat, surjective=True
        )


@dataclass(frozen=True)
class Minor:
    rows: tuple[int, ...]
    cols: tuple[int, ...]

    @property
    def order(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class NullLagrangianBasis:
    degree: int
    c_space_dim: int
    f_space_dim: int
    elements: list[tuple[tuple[Fraction, ...], HomPoly]]

    def functions(self) -> list[HomPoly]:
        return [f for _, f in self.elements]

    def to_json_dict(self) -> dict:
        return {
            "degree": self.degree,
            "c_space_dim": self.c_space_dim,
            "f_space_dim": self.f_space_dim,
            "elements": [
                {"c": [str(x) for x in c], "F": f.render("v")}
                for c, f in self.elements
            ],
        }


def potential_to_jet_map(b: OperatorSymbol | PotentialSymbol) -> JetLinearMap:
    """The constant linear map T with T(D^k u) = B u.

    T sends the jet coordinate block X_alpha (a U-vector per multi-index) to
    sum_alpha B_alpha X_alpha.
    """
    op = b.op if isinstance(b, PotentialSymbol) else b
    jet = JetSpace(n=op.n, k=op.order, dim_u=op.dim_from)
    cols: list[list[Fraction]] = []
    entries = [
        [op.coeffs[alpha].entries[v][nu] for v in range(op.dim_to)]
        for nu, alpha in jet.coordinates
    ]
    t = RationalMatrix(entries).transpose()
    j_hat = moore_penrose(t)
    t_hat = j_hat.mul(t)
    surjective = t.rank() == op.dim_to
    return JetLinearMap(jet=jet, t=t, j_hat=j_hat, t_hat=t_hat, surjective=surjective)


def enumerate_minors(n_rows: int, n_cols: int, s: int) -> list[Minor]:
    """All s x s minors of an n_rows x n_cols matrix, lexicographic in (rows, cols)."""
    if not 1 <= s <= min(n_rows, n_cols):
        raise DomainError(
            f"minor order {s} out of range for a {n_rows}x{n_cols} matrix"
        )
    return [
        Minor(rows=r, cols=c)
        for r in combinations(range(n_rows), s)
        for c in combinations(range(n_cols), s)
    ]


def _det_of_linear_forms(grid: list[list[HomPoly]]) -> HomPoly:
    """Exact determinant (cofactor expansion) of a small matrix of polynomials."""
    size = len(grid)
    if size == 1:
        return grid[0][0]
    n = grid[0][0].n
    deg = grid[0][0].degree
    acc = HomPoly.zero(n, deg * size)
    for j in range(size):
        entry = grid[0][j]
        if entry.is_zero():
            continue
        sub = [[row[c] for c in range(size) if c != j] for row in grid[1:]]
        cofactor = _det_of_linear_forms(sub)
        term = entry.mul(cofactor)
        acc = acc.add(term if j % 2 == 0 else term.neg())
    return acc


def _jet_matrix_forms(
    jet: JetSpace, coordinate_forms: list[HomPoly]
) -> list[list[HomPoly]]:
    """N x n matrix of linear forms: row (nu, beta), column i holds the form
    for coordinate (nu, beta + e_i)."""
    index = {c: pos for pos, c in enumerate(jet.coordinates)}
    grid = []
    for nu, beta in jet.rows:
        row = []
        for i in range(jet.n):
            alpha = tuple(b + (1 if t == i else 0) for t, b in enumerate(beta))
            row.append(coordinate_forms[index[(nu, alpha)]])
        grid.append(row)
    return grid


def _minor_pullback(minor: Minor, grid: list[list[HomPoly]]) -> HomPoly:
    sub = [[grid[r][c] for c in minor.cols] for r in minor.rows]
    return _det_of_linear_forms(sub)


def _linear_forms_from_matrix(m: RationalMatrix, n_vars: int) -> list[HomPoly]:
    """Row i of m becomes the linear form sum_j m[i][j] * x_j in n_vars variables."""
    forms = []
    for i in range(m.rows):
        terms = {}
        for j in range(m.cols):
            c = m.entries[i][j]
            if c:
                alpha = [0] * n_vars
                alpha[j] = 1
                terms[tuple(alpha)] = c
        forms.append(HomPoly(n_vars, 1, terms))
    return forms


def assemble_system(
    t: JetLinearMap, s: int, minor_cap: int = DEFAULT_MINOR_CAP
) -> RationalMatrix:
    """Linear system on minor coefficients expressing invariance along ker T.

    For each minor M of the jet-matrix representation, the polynomial
    M(Psi(X)) - M(Psi(t_hat X)) is expanded exactly in the free jet
    coordinates; rows are monomial coefficients (graded-lex), columns are
    minors.  The nullspace of the returned matrix is the admissible c-space.
    """
    jet = t.jet
    if not 2 <= s <= min(jet.N, jet.n):
        raise DomainError(
            f"minor order {s} out of range (need 2 <= s <= min(N={jet.N}, n={jet.n}))"
        )
    minors = enumerate_minors(jet.N, jet.n, s)
    if len(minors) > minor_cap:
        raise DomainError(
            f"minor system too large: {len(minors)} minors of order {s} for an "
            f"N={jet.N}, n={jet.n} jet exceeds the cap of {minor_cap}; "
            "prefer a lower-order potential for this operator"
        )
    if not t.surjective:
        warnings.warn(
            "jet map is not surjective (wave cone does not span V); functions "
            "along unreached directions are unconstrained and not enumerated",
            stacklevel=2,
        )
    dim = jet.dim
    free_forms = _linear_forms_from_matrix(RationalMatrix.identity(dim), dim)
    proj_forms = _linear_forms_from_matrix(t.t_hat, dim)
    grid_free = _jet_matrix_forms(jet, free_forms)
    grid_proj = _jet_matrix_forms(jet, proj_forms)

    columns: list[dict[MultiIndex, Fraction]] = []
    monomials: set[MultiIndex] = set()
    for minor in minors:
        diff = _minor_pullback(minor, grid_free).sub(_minor_pullback(minor, grid_proj))
        columns.append(diff.terms)
        monomials.update(diff.terms)
    ordered = sorted(monomials, key=grlex_key)
    if not ordered:
        return RationalMatrix.zero(1, len(minors))
    return RationalMatrix(
        [
            [col.get(mono, Fraction(0)) for col in columns]
            for mono in ordered
        ]
    )


def _independent_span(
    items: list[tuple[tuple[Fraction, ...], HomPoly]]
) -> list[tuple[tuple[Fraction, ...], HomPoly]]:
    """Keep elements whose polynomials extend the span of the previous ones."""
    kept: list[tuple[tuple[Fraction, ...], HomPoly]] = []
    rows: list[tuple[Fraction, ...]] = []
    monomials: list[MultiIndex] = sorted(
        {alpha for _, f in items for alpha in f.terms}, key=grlex_key
    )
    if not monomials:
        return []
    for c, f in items:
        if f.is_zero():
            continue
        row = tuple(f.terms.get(m, Fraction(0)) for m in monomials)
        trial = rows + [row]
        if RationalMatrix(trial).rank() == len(trial):
            rows.append(row)
            kept.append((c, f))
    return kept


def solve_null_lagrangians(
    b: OperatorSymbol | PotentialSymbol,
    s: int,
    minor_cap: int = DEFAULT_MINOR_CAP,
    jet_map: JetLinearMap | None = None,
) -> NullLagrangianBasis:
    """Basis of the degree-s quasiaffine polynomials on V for the potential b.

    The admissible minor-coefficient space is computed exactly; each basis
    coefficient vector c is mapped to F(v) = sum_M c_M M(Psi(j_hat v)) and an
    independent spanning set of the results is returned (the map c -> F may
    have a kernel, so f_space_dim <= c_space_dim).
    """
    t = jet_map if jet_map is not None else potential_to_jet_map(b)
    dim_v = t.dim_v
    if s == 1:
        elements = [
            ((), HomPoly.variable(dim_v, i)) for i in range(dim_v)
        ]
        return NullLagrangianBasis(
            degree=1, c_space_dim=dim_v, f_space_dim=dim_v, elements=elements
        )
    bound = min(t.jet.n, dim_v)
    if not 2 <= s <= bound:
        raise DomainError(
            f"degree {s} out of range: quasiaffine polynomials have degree at "
            f"most min(n, dim V) = {bound}"
        )
    system = assemble_system(t, s, minor_cap=minor_cap)
    _, c_basis = system.nullspace()

    jet = t.jet
    pull_forms = _linear_forms_from_matrix(t.j_hat, dim_v)
    grid = _jet_matrix_forms(jet, pull_forms)
    minors = enumerate_minors(jet.N, jet.n, s)
    minor_polys: dict[int, HomPoly] = {}

    items: list[tuple[tuple[Fraction, ...], HomPoly]] = []
    for c in c_basis:
        f = HomPoly.zero(dim_v, s)
        for pos, coeff in enumerate(c):
            if coeff == 0:
                continue
            if pos not in minor_polys:
                minor_polys[pos] = _minor_pullback(minors[pos], grid)
            f = f.add(minor_polys[pos].scale(coeff))
        items.append((c, f))
    elements = _independent_span(items)
    return NullLagrangianBasis(
        degree=s,
        c_space_dim=len(c_basis),
        f_space_dim=len(elements),
        elements=elements,
    )


def directional_derivative(
    f: HomPoly, base: Sequence, directions: list[Sequence]
) -> Fraction:
    """Exact r-fold mixed directional derivative of f at a rational point.

    Substitutes v -> t_0 * base + t_1 d_1 + ... + t_r d_r (homogenized) and
    reads off the coefficient of t_1 ... t_r at t_0 = 1.
    """
    r = len(directions)
    if r > f.degree:
        return Fraction(0)
    subs = []
    for j in range(f.n):
        terms = {}
        alpha0 = [0] * (r + 1)
        alpha0[0] = 1
        c0 = Fraction(base[j])
        if c0:
            terms[tuple(alpha0)] = c0
        for i, d in enumerate(directions):
            ci = Fraction(d[j])
            if ci:
                alpha = [0] * (r + 1)
                alpha[i + 1] = 1
                terms[tuple(alpha)] = ci
        subs.append(HomPoly(r + 1, 1, terms))
    expanded = f.compose(subs)
    target = (f.degree - r,) + (1,) * r
    return expanded.terms.get(target, Fraction(0))


def murat_check(
    f: HomPoly,
    a: OperatorSymbol,
    trials: int = 20,
    seed: int = 0,
    redraw_budget: int = 5,
) -> tuple[bool, list[dict]]:
    """Spot-check of the directional-derivative cancellation conditions.

    For each r in 2..deg F and each trial, draws a rational subspace of
    dimension r - 1, frequencies inside it, exact kernel directions, and
    verifies that the r-fold mixed derivative of F vanishes exactly at a
    random rational base point.  Trials with all kernels trivial are redrawn
    up to the budget.
    """
    if f.degree < 2:
        raise DomainError("the derivative conditions apply to degree >= 2")
    if f.n != a.dim_from:
        raise DimensionMismatch(
            f"polynomial lives on a {f.n}-dimensional space, operator acts on {a.dim_from}"
        )
    rng = random.Random(seed)
    failures: list[dict] = []
    for r in range(2, f.degree + 1):
        done = 0
        attempts = 0
        while done < trials and attempts < trials * redraw_budget:
            attempts += 1
            # rational subspace of dimension r-1 spanned by random integer rows
            span = [
                [rng.randint(-5, 5) for _ in range(a.n)] for _ in range(r - 1)
            ]
            if RationalMatrix(span).rank() < min(r - 1, a.n):
                continue
            freqs = []
            for _ in range(r):
                combo = [0] * a.n
                for row in span:
                    w = rng.randint(-3, 3)
                    combo = [c + w * x for c, x in zip(combo, row)]
                freqs.append(tuple(combo))
            if any(not any(xi) for xi in freqs):
                continue
            lambdas = []
            trivial = False
            for xi in freqs:
                _, kernel = a(xi).nullspace()
                if not kernel:
                    trivial = True
                    break
                lam = [Fraction(0)] * a.dim_from
                for vec in kernel:
                    w = rng.randint(-3, 3)
                    if w:
                        lam = [c + w * x for c, x in zip(lam, vec)]
                if not any(lam):
                    lam = list(kernel[0])
                lambdas.append(lam)
            if trivial:
                continue
            base = [rng.randint(-4, 4) for _ in range(f.n)]
            value = directional_derivative(f, base, lambdas)
            done += 1
            if value != 0:
                failures.append(
                    {
                        "order": r,
                        "frequencies": [list(x) for x in freqs],
                        "value": str(value),
                    }
                )
    return not failures, failures
