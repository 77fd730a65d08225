"""Exact rational arithmetic for homogeneous multivariate polynomials and matrices.

Polynomials are stored sparsely as a map from exponent tuples to Fraction
coefficients.  Everything in this module is exact: no floating point, no
tolerance.  Homogeneity is a type invariant, not a runtime property — every
polynomial carries its declared degree and every stored monomial must match it.

Monomial order is graded-lexicographic (degree first, then ascending tuple
comparison) and is fixed globally so that linear-system assembly elsewhere in
the package is deterministic.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd
from typing import Sequence

MultiIndex = tuple[int, ...]


class DimensionMismatch(ValueError):
    """Shapes, variable counts or degrees do not line up."""


class DomainError(ValueError):
    """Input outside the mathematical domain of the operation."""


def grlex_key(alpha: MultiIndex) -> tuple[int, MultiIndex]:
    return (sum(alpha), alpha)


def multi_indices(n: int, degree: int) -> list[MultiIndex]:
    """All exponent tuples of length n with total degree `degree`, grlex order."""
    if n == 0:
        return [()] if degree == 0 else []
    out: list[MultiIndex] = []

    def rec(prefix: tuple[int, ...], remaining: int, slots: int) -> None:
        if slots == 1:
            out.append(prefix + (remaining,))
            return
        for e in range(remaining + 1):
            rec(prefix + (e,), remaining - e, slots - 1)

    rec((), degree, n)
    return out


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    raise TypeError(f"expected an exact rational, got {type(x).__name__}")


class HomPoly:
    """Homogeneous polynomial with exact rational coefficients.

    The zero polynomial keeps its declared degree and has an empty term map.
    Instances are immutable by convention; all operations return new objects.
    """

    __slots__ = ("n", "degree", "terms")

    def __init__(self, n: int, degree: int, terms: dict[MultiIndex, Fraction] | None = None):
        if n < 0 or degree < 0:
            raise DomainError("variable count and degree must be non-negative")
        clean: dict[MultiIndex, Fraction] = {}
        for alpha, c in (terms or {}).items():
            c = _as_fraction(c)
            if c == 0:
                continue
            if len(alpha) != n or sum(alpha) != degree or any(e < 0 for e in alpha):
                raise DimensionMismatch(
                    f"monomial {alpha} invalid for a degree-{degree} polynomial in {n} variables"
                )
            clean[alpha] = c
        self.n = n
        self.degree = degree
        self.terms = clean

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, n: int, degree: int) -> "HomPoly":
        return cls(n, degree, {})

    @classmethod
    def constant(cls, n: int, value) -> "HomPoly":
        return cls(n, 0, {(0,) * n: _as_fraction(value)})

    @classmethod
    def variable(cls, n: int, index: int, degree: int = 1) -> "HomPoly":
        """The monomial x_index^degree (index is 0-based)."""
        if not 0 <= index < n:
            raise DomainError(f"variable index {index} out of range for n={n}")
        alpha = [0] * n
        alpha[index] = degree
        return cls(n, degree, {tuple(alpha): Fraction(1)})

    @classmethod
    def monomial(cls, n: int, alpha: Sequence[int], coeff=1) -> "HomPoly":
        alpha = tuple(alpha)
        return cls(n, sum(alpha), {alpha: _as_fraction(coeff)})

    # -- predicates ---------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other) -> bool:
        if not isinstance(other, HomPoly):
            return NotImplemented
        return self.n == other.n and self.degree == other.degree and self.terms == other.terms

    __hash__ = None  # mutable dict inside; value semantics via __eq__ only

    # -- arithmetic ---------------------------------------------------------

    def _check_compatible(self, other: "HomPoly", need_degree: bool) -> None:
        if self.n != other.n:
            raise DimensionMismatch(f"variable counts differ: {self.n} vs {other.n}")
        if need_degree and self.degree != other.degree:
            raise DimensionMismatch(f"degrees differ: {self.degree} vs {other.degree}")

    def add(self, other: "HomPoly") -> "HomPoly":
        self._check_compatible(other, need_degree=True)
        terms = dict(self.terms)
        for alpha, c in other.terms.items():
            terms[alpha] = terms.get(alpha, Fraction(0)) + c
        return HomPoly(self.n, self.degree, terms)

    def sub(self, other: "HomPoly") -> "HomPoly":
        return self.add(other.neg())

    def neg(self) -> "HomPoly":
        return HomPoly(self.n, self.degree, {a: -c for a, c in self.terms.items()})

    def scale(self, factor) -> "HomPoly":
        factor = _as_fraction(factor)
        return HomPoly(self.n, self.degree, {a: c * factor for a, c in self.terms.items()})

    def mul(self, other: "HomPoly") -> "HomPoly":
        self._check_compatible(other, need_degree=False)
        terms: dict[MultiIndex, Fraction] = {}
        for a1, c1 in self.terms.items():
            for a2, c2 in other.terms.items():
                a = tuple(e1 + e2 for e1, e2 in zip(a1, a2))
                terms[a] = terms.get(a, Fraction(0)) + c1 * c2
        return HomPoly(self.n, self.degree + other.degree, terms)

    def pow(self, k: int) -> "HomPoly":
        if k < 0:
            raise DomainError("negative polynomial power")
        result = HomPoly.constant(self.n, 1)
        base = self
        while k:
            if k & 1:
                result = result.mul(base)
            base = base.mul(base) if k > 1 else base
            k >>= 1
        return result

    def __add__(self, other):
        return self.add(other)

    def __sub__(self, other):
        return self.sub(other)

    def __neg__(self):
        return self.neg()

    def __mul__(self, other):
        if isinstance(other, HomPoly):
            return self.mul(other)
        return self.scale(other)

    # -- evaluation / calculus ---------------------------------------------

    def eval(self, point: Sequence) -> Fraction:
        """Exact value at a rational point."""
        if len(point) != self.n:
            raise DimensionMismatch(f"point has {len(point)} coordinates, expected {self.n}")
        pt = [_as_fraction(x) for x in point]
        total = Fraction(0)
        for alpha, c in self.terms.items():
            v = c
            for x, e in zip(pt, alpha):
                if e:
                    v *= x**e
            total += v
        return total

    def eval_float(self, arrays: Sequence) -> object:
        """Evaluate on numpy arrays (or floats); used by the spectral harness."""
        total = None
        for alpha, c in self.terms.items():
            v = float(c)
            for x, e in zip(arrays, alpha):
                if e:
                    v = v * x**e
            total = v if total is None else total + v
        if total is None:
            return 0.0 * arrays[0] if self.n else 0.0
        return total

    def partial(self, index: int) -> "HomPoly":
        """Partial derivative with respect to variable `index` (0-based)."""
        if not 0 <= index < self.n:
            raise DomainError(f"variable index {index} out of range")
        if self.degree == 0:
            return HomPoly.zero(self.n, 0)
        terms: dict[MultiIndex, Fraction] = {}
        for alpha, c in self.terms.items():
            e = alpha[index]
            if e == 0:
                continue
            beta = list(alpha)
            beta[index] = e - 1
            terms[tuple(beta)] = terms.get(tuple(beta), Fraction(0)) + c * e
        return HomPoly(self.n, self.degree - 1, terms)

    def compose(self, subs: Sequence["HomPoly"]) -> "HomPoly":
        """Substitute each variable by a polynomial; all `subs` must share n and degree."""
        if len(subs) != self.n:
            raise DimensionMismatch(f"need {self.n} substitution polynomials, got {len(subs)}")
        if not subs:
            raise DomainError("compose needs at least one variable")
        inner_n = subs[0].n
        inner_deg = subs[0].degree
        for p in subs:
            if p.n != inner_n or p.degree != inner_deg:
                raise DimensionMismatch("substitution polynomials must share n and degree")
        result = HomPoly.zero(inner_n, self.degree * inner_deg)
        for alpha, c in self.terms.items():
            term = HomPoly.constant(inner_n, c)
            for p, e in zip(subs, alpha):
                if e:
                    term = term.mul(p.pow(e))
            result = result.add(term)
        return result

    # -- rendering ----------------------------------------------------------

    def render(self, prefix: str = "d") -> str:
        """Stable debug rendering, e.g. "-3/2*d1^2*d3".  Re-parseable by the DSL."""
        if not self.terms:
            return "0"
        pieces: list[str] = []
        for alpha in sorted(self.terms, key=grlex_key, reverse=True):
            c = self.terms[alpha]
            factors = [
                f"{prefix}{i + 1}" + (f"^{e}" if e > 1 else "")
                for i, e in enumerate(alpha)
                if e
            ]
            mag = abs(c)
            if not factors:
                body = str(mag)
            elif mag == 1:
                body = "*".join(factors)
            else:
                body = str(mag) + "*" + "*".join(factors)
            if not pieces:
                pieces.append(("-" if c < 0 else "") + body)
            else:
                pieces.append((" - " if c < 0 else " + ") + body)
        return "".join(pieces)

    def __repr__(self) -> str:
        return f"HomPoly({self.render()!r}, n={self.n}, degree={self.degree})"


# ---------------------------------------------------------------------------
# Dense rational matrices


class RationalMatrix:
    """Dense matrix of Fractions with exact linear algebra."""

    __slots__ = ("rows", "cols", "entries")

    def __init__(self, entries: Sequence[Sequence]):
        rows = [tuple(_as_fraction(x) for x in row) for row in entries]
        if not rows:
            raise DimensionMismatch("matrix needs at least one row")
        cols = len(rows[0])
        if any(len(r) != cols for r in rows):
            raise DimensionMismatch("ragged matrix rows")
        if cols == 0:
            raise DimensionMismatch("matrix needs at least one column")
        self.rows = len(rows)
        self.cols = cols
        self.entries = tuple(rows)

    @classmethod
    def zero(cls, rows: int, cols: int) -> "RationalMatrix":
        return cls([[0] * cols for _ in range(rows)])

    @classmethod
    def identity(cls, size: int) -> "RationalMatrix":
        return cls([[1 if i == j else 0 for j in range(size)] for i in range(size)])

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence]) -> "RationalMatrix":
        return cls(rows)

    @classmethod
    def column(cls, vec: Sequence) -> "RationalMatrix":
        return cls([[x] for x in vec])

    def __eq__(self, other) -> bool:
        if not isinstance(other, RationalMatrix):
            return NotImplemented
        return self.entries == other.entries

    __hash__ = None

    def __getitem__(self, ij: tuple[int, int]) -> Fraction:
        i, j = ij
        return self.entries[i][j]

    def row(self, i: int) -> tuple[Fraction, ...]:
        return self.entries[i]

    def col(self, j: int) -> tuple[Fraction, ...]:
        return tuple(r[j] for r in self.entries)

    def is_zero(self) -> bool:
        return all(x == 0 for row in self.entries for x in row)

    def transpose(self) -> "RationalMatrix":
        return RationalMatrix([self.col(j) for j in range(self.cols)])

    def add(self, other: "RationalMatrix") -> "RationalMatrix":
        if (self.rows, self.cols) != (other.rows, other.cols):
            raise DimensionMismatch("matrix shapes differ")
        return RationalMatrix(
            [
                [a + b for a, b in zip(r1, r2)]
                for r1, r2 in zip(self.entries, other.entries)
            ]
        )

    def sub(self, other: "RationalMatrix") -> "RationalMatrix":
        return self.add(other.scale(-1))

    def scale(self, factor) -> "RationalMatrix":
        f = _as_fraction(factor)
        return RationalMatrix([[x * f for x in row] for row in self.entries])

    def mul(self, other: "RationalMatrix") -> "RationalMatrix":
        if self.cols != other.rows:
            raise DimensionMismatch(
                f"cannot multiply {self.rows}x{self.cols} by {other.rows}x{other.cols}"
            )
        ot = other.transpose()
        return RationalMatrix(
            [
                [sum((a * b for a, b in zip(row, col)), Fraction(0)) for col in ot.entries]
                for row in self.entries
            ]
        )

    def matvec(self, vec: Sequence) -> tuple[Fraction, ...]:
        if len(vec) != self.cols:
            raise DimensionMismatch("vector length does not match column count")
        v = [_as_fraction(x) for x in vec]
        return tuple(sum((a * b for a, b in zip(row, v)), Fraction(0)) for row in self.entries)

    def __mul__(self, other):
        if isinstance(other, RationalMatrix):
            return self.mul(other)
        return self.scale(other)

    def hstack(self, other: "RationalMatrix") -> "RationalMatrix":
        if self.rows != other.rows:
            raise DimensionMismatch("row counts differ")
        return RationalMatrix(
            [list(r1) + list(r2) for r1, r2 in zip(self.entries, other.entries)]
        )

    def vstack(self, other: "RationalMatrix") -> "RationalMatrix":
        if self.cols != other.cols:
            raise DimensionMismatch("column counts differ")
        return RationalMatrix(list(self.entries) + list(other.entries))

    # -- elimination core ----------------------------------------------------

    def _integer_rows(self) -> list[list[int]]:
        """Row-wise rescaled integer copy (row scaling preserves rank and kernel)."""
        out = []
        for row in self.entries:
            denom_lcm = 1
            for x in row:
                d = x.denominator
                denom_lcm = denom_lcm * d // gcd(denom_lcm, d)
            ints = [int(x * denom_lcm) for x in row]
            g = 0
            for v in ints:
                g = gcd(g, abs(v))
            if g > 1:
                ints = [v // g for v in ints]
            out.append(ints)
        return out

    def _echelon(self) -> tuple[list[list[int]], list[int]]:
        """Fraction-free (Bareiss) row echelon form; returns (matrix, pivot columns)."""
        m = self._integer_rows()
        nrows, ncols = self.rows, self.cols
        pivots: list[int] = []
        prev = 1
        r = 0
        for c in range(ncols):
            if r == nrows:
                break
            pivot_row = None
            for i in range(r, nrows):
                if m[i][c] != 0:
                    pivot_row = i
                    break
            if pivot_row is None:
                continue
            if pivot_row != r:
                m[r], m[pivot_row] = m[pivot_row], m[r]
            p = m[r][c]
            # Every row below the pivot must be rescaled, even when its pivot
            # column is 0, or later exact divisions by `prev` break.
            for i in range(r + 1, nrows):
                mic = m[i][c]
                row_i = m[i]
                row_r = m[r]
                for j in range(c, ncols):
                    row_i[j] = (p * row_i[j] - mic * row_r[j]) // prev
            prev = p
            pivots.append(c)
            r += 1
        return m, pivots

    def rank(self) -> int:
        return len(self._echelon()[1])

    def rref(self) -> tuple["RationalMatrix", list[int]]:
        """Reduced row echelon form over the rationals, with pivot columns."""
        ech, pivots = self._echelon()
        rows = [[Fraction(x) for x in row] for row in ech[: len(pivots)]]
        for r in range(len(pivots) - 1, -1, -1):
            pc = pivots[r]
            inv = 1 / rows[r][pc]
            rows[r] = [x * inv for x in rows[r]]
            for i in range(r):
                f = rows[i][pc]
                if f:
                    rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        if not rows:
            return RationalMatrix.zero(1, self.cols), []
        return RationalMatrix(rows), pivots

    def nullspace(self) -> tuple[int, list[tuple[Fraction, ...]]]:
        """Exact rank and a basis of {x : Mx = 0}; rank + len(basis) == cols."""
        red, pivots = self.rref()
        rank = len(pivots)
        free = [c for c in range(self.cols) if c not in pivots]
        basis: list[tuple[Fraction, ...]] = []
        for f in free:
            vec = [Fraction(0)] * self.cols
            vec[f] = Fraction(1)
            for r, pc in enumerate(pivots):
                vec[pc] = -red.entries[r][f]
            basis.append(tuple(vec))
        return rank, basis

    def solve(self, rhs: Sequence) -> tuple[tuple[Fraction, ...] | None, list[tuple[Fraction, ...]]]:
        """Solve Mx = rhs exactly.

        Returns (particular solution or None if inconsistent, kernel basis).
        """
        if len(rhs) != self.rows:
            raise DimensionMismatch("right-hand side length does not match row count")
        aug = RationalMatrix([list(r) + [b] for r, b in zip(self.entries, rhs)])
        red, pivots = aug.rref()
        if self.cols in pivots:
            return None, self.nullspace()[1]
        particular = [Fraction(0)] * self.cols
        for r, pc in enumerate(pivots):
            particular[pc] = red.entries[r][self.cols]
        return tuple(particular), self.nullspace()[1]

    def inverse(self) -> "RationalMatrix":
        if self.rows != self.cols:
            raise DimensionMismatch("only square matrices are invertible")
        aug = self.hstack(RationalMatrix.identity(self.rows))
        red, pivots = aug.rref()
        if pivots != list(range(self.rows)):
            raise DomainError("matrix is singular")
        return RationalMatrix([row[self.rows :] for row in red.entries])

    def __repr__(self) -> str:
        body = "; ".join(" ".join(str(x) for x in row) for row in self.entries)
        return f"RationalMatrix({self.rows}x{self.cols}: {body})"


def moore_penrose(m: RationalMatrix) -> RationalMatrix:
    """Exact Moore-Penrose pseudoinverse via rank factorization.

    Writes M = C F with C of full column rank (pivot columns of M) and F of
    full row rank (nonzero rows of the RREF), then
    M^+ = F* (F F*)^-1 (C* C)^-1 C*.  Satisfies all four Penrose axioms exactly.
    """
    red, pivots = m.rref()
    r = len(pivots)
    if r == 0:
        return RationalMatrix.zero(m.cols, m.rows)
    c = RationalMatrix([[row[p] for p in pivots] for row in m.entries])
    f = RationalMatrix([red.entries[i] for i in range(r)])
    ft = f.transpose()
    ct = c.transpose()
    middle = (f.mul(ft)).inverse().mul((ct.mul(c)).inverse())
    return ft.mul(middle).mul(ct)


# ---------------------------------------------------------------------------
# Matrices of homogeneous polynomials


class PolyMatrix:
    """Matrix of HomPoly entries sharing the same variable count and degree."""

    __slots__ = ("rows", "cols", "n", "degree", "entries")

    def __init__(self, entries: Sequence[Sequence[HomPoly]]):
        grid = [tuple(row) for row in entries]
        if not grid or not grid[0]:
            raise DimensionMismatch("polynomial matrix needs at least one entry")
        cols = len(grid[0])
        if any(len(r) != cols for r in grid):
            raise DimensionMismatch("ragged matrix rows")
        first = grid[0][0]
        for row in grid:
            for p in row:
                if p.n != first.n or p.degree != first.degree:
                    raise DimensionMismatch("entries must share variable count and degree")
        self.rows = len(grid)
        self.cols = cols
        self.n = first.n
        self.degree = first.degree
        self.entries = tuple(grid)

    @classmethod
    def zero(cls, rows: int, cols: int, n: int, degree: int) -> "PolyMatrix":
        z = HomPoly.zero(n, degree)
        return cls([[z] * cols for _ in range(rows)])

    @classmethod
    def identity(cls, size: int, n: int) -> "PolyMatrix":
        one = HomPoly.constant(n, 1)
        zero = HomPoly.zero(n, 0)
        return cls([[one if i == j else zero for j in range(size)] for i in range(size)])

    @classmethod
    def scalar(cls, size: int, p: HomPoly) -> "PolyMatrix":
        """p times the identity, as a degree-p.degree matrix."""
        zero = HomPoly.zero(p.n, p.degree)
        return cls([[p if i == j else zero for j in range(size)] for i in range(size)])

    def __eq__(self, other) -> bool:
        if not isinstance(other, PolyMatrix):
            return NotImplemented
        return (
            self.rows == other.rows
            and self.cols == other.cols
            and all(
                a == b
                for r1, r2 in zip(self.entries, other.entries)
                for a, b in zip(r1, r2)
            )
        )

    __hash__ = None

    def __getitem__(self, ij: tuple[int, int]) -> HomPoly:
        i, j = ij
        return self.entries[i][j]

    def is_zero(self) -> bool:
        return all(p.is_zero() for row in self.entries for p in row)

    def transpose(self) -> "PolyMatrix":
        return PolyMatrix(
            [[self.entries[i][j] for i in range(self.rows)] for j in range(self.cols)]
        )

    def add(self, other: "PolyMatrix") -> "PolyMatrix":
        if (self.rows, self.cols) != (other.rows, other.cols):
            raise DimensionMismatch("matrix shapes differ")
        return PolyMatrix(
            [
                [a.add(b) for a, b in zip(r1, r2)]
                for r1, r2 in zip(self.entries, other.entries)
            ]
        )

    def scale(self, factor) -> "PolyMatrix":
        return PolyMatrix([[p.scale(factor) for p in row] for row in self.entries])

    def mul(self, other: "PolyMatrix") -> "PolyMatrix":
        if self.cols != other.rows:
            raise DimensionMismatch(
                f"cannot multiply {self.rows}x{self.cols} by {other.rows}x{other.cols}"
            )
        if self.n != other.n:
            raise DimensionMismatch("variable counts differ")
        out = []
        for i in range(self.rows):
            row = []
            for j in range(other.cols):
                acc = HomPoly.zero(self.n, self.degree + other.degree)
                for k in range(self.cols):
                    acc = acc.add(self.entries[i][k].mul(other.entries[k][j]))
                row.append(acc)
            out.append(row)
        return PolyMatrix(out)

    def mul_scalar_poly(self, p: HomPoly) -> "PolyMatrix":
        return PolyMatrix([[q.mul(p) for q in row] for row in self.entries])

    def eval(self, point: Sequence) -> RationalMatrix:
        return RationalMatrix(
            [[p.eval(point) for p in row] for row in self.entries]
        )

    def trace(self) -> HomPoly:
        if self.rows != self.cols:
            raise DimensionMismatch("trace needs a square matrix")
        acc = HomPoly.zero(self.n, self.degree)
        for i in range(self.rows):
            acc = acc.add(self.entries[i][i])
        return acc

    def __repr__(self) -> str:
        return f"PolyMatrix({self.rows}x{self.cols}, n={self.n}, degree={self.degree})"


def polymatrix_mul(p: PolyMatrix, q: PolyMatrix) -> PolyMatrix:
    return p.mul(q)


def faddeev_leverrier(p: PolyMatrix) -> list[HomPoly]:
    """Characteristic polynomial coefficients of a square polynomial matrix.

    Convention det(lambda*I - P) = lambda^w + c_1 lambda^(w-1) + ... + c_w; the
    coefficient c_j is homogeneous of degree j*deg(P).  All divisions in the
    recurrence are exact over the rationals.
    """
    return _faddeev_leverrier_aux(p)[0]


def _faddeev_leverrier_aux(p: PolyMatrix) -> tuple[list[HomPoly], list[PolyMatrix]]:
    """Coefficients c_1..c_w plus the partial sums S_k = sum_{i<k} c_i M^(k-1-i).

    S_1 = I and S_{k+1} = M*S_k + c_k*I; the S_k feed the Decell pseudoinverse.
    """
    if p.rows != p.cols:
        raise DimensionMismatch("characteristic polynomial needs a square matrix")
    w = p.rows
    coeffs: list[HomPoly] = []
    partials: list[PolyMatrix] = [PolyMatrix.identity(w, p.n)]
    n_k = p
    for k in range(1, w + 1):
        c_k = n_k.trace().scale(Fraction(-1, k))
        coeffs.append(c_k)
        if k < w:
            s_next = n_k.add(PolyMatrix.scalar(w, c_k))
            partials.append(s_next)
            n_k = p.mul(s_next)
    return coeffs, partials
