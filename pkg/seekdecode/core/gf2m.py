"""
Arithmetic over GF(2^m) and the linear algebra built on it.

Elements are plain integers in [0, 2^m) whose bits are polynomial coefficients (bit j is the coefficient of x^j).
Addition is XOR. Multiplication is a carry-less shift-and-XOR product reduced by the field's polynomial; for
m <= 12 log/antilog tables are built once per field and used for the vectorised paths.

The same code serves the slot level (GF(2), combination indicators) and the frame level (GF(2^n_bc), precoding
coefficients), so matrices always carry their field.
"""

import logging
import math
import typing as t
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field, model_validator

from seekdecode.core.errors import FieldError

logger = logging.getLogger(__name__)

FieldElement: t.TypeAlias = int
IntArray: t.TypeAlias = npt.NDArray[np.int64]

MAX_DEGREE = 16
TABLE_MAX_DEGREE = 12


def poly_degree(poly: int) -> int:
    return poly.bit_length() - 1


def poly_mod(a: int, mod: int) -> int:
    "Remainder of a divided by mod, both polynomials over GF(2) as bitmasks"
    mod_degree = poly_degree(mod)
    while a and poly_degree(a) >= mod_degree:
        a ^= mod << (poly_degree(a) - mod_degree)
    return a


def is_irreducible(poly: int) -> bool:
    """
    Trial division by every polynomial of degree 1 .. deg/2. A reducible polynomial always has a factor of at most
    half its degree, so this covers all lower-degree divisors.
    """
    degree = poly_degree(poly)
    if degree < 1:
        return False
    for divisor_degree in range(1, degree // 2 + 1):
        for divisor in range(1 << divisor_degree, 1 << (divisor_degree + 1)):
            if poly_mod(poly, divisor) == 0:
                return False
    return True


@lru_cache(maxsize=None)
def default_polynomial(m: int) -> int:
    "The lexicographically smallest irreducible polynomial of degree m"
    if not 1 <= m <= MAX_DEGREE:
        raise FieldError(f"extension degree {m} outside 1..{MAX_DEGREE}")
    for poly in range(1 << m, 1 << (m + 1)):
        if is_irreducible(poly):
            return poly
    raise AssertionError(f"no irreducible polynomial of degree {m}")  # pragma: no cover


def _mul_direct(a: int, b: int, poly: int, m: int) -> int:
    result = 0
    top = 1 << m
    while b:
        if b & 1:
            result ^= a
        b >>= 1
        a <<= 1
        if a & top:
            a ^= poly
    return result


class FieldSpec(BaseModel):
    """
    GF(2^m) described by its extension degree and reduction polynomial (bitmask including the x^m term). When no
    polynomial is given the smallest irreducible one of degree m is used.
    """

    model_config = ConfigDict(frozen=True, ignored_types=(cached_property,))

    m: int = Field(ge=1, le=MAX_DEGREE)
    reduction_polynomial: int = 0

    @model_validator(mode="before")
    @classmethod
    def _fill_default_polynomial(cls, data: t.Any) -> t.Any:
        if isinstance(data, dict) and not data.get("reduction_polynomial") and isinstance(data.get("m"), int):
            if 1 <= data["m"] <= MAX_DEGREE:
                data = {**data, "reduction_polynomial": default_polynomial(data["m"])}
        return data

    @model_validator(mode="after")
    def _check_polynomial(self) -> "FieldSpec":
        if poly_degree(self.reduction_polynomial) != self.m:
            raise ValueError(f"reduction polynomial {self.reduction_polynomial:#x} does not have degree {self.m}")
        if not is_irreducible(self.reduction_polynomial):
            raise ValueError(f"reduction polynomial {self.reduction_polynomial:#x} is reducible")
        return self

    @property
    def order(self) -> int:
        return 1 << self.m

    def same_field(self, other: "FieldSpec") -> bool:
        return self.m == other.m and self.reduction_polynomial == other.reduction_polynomial

    def check(self, a: FieldElement) -> FieldElement:
        if not 0 <= a < self.order:
            raise FieldError(f"{a} is not an element of GF({self.order})")
        return a

    def check_array(self, values: npt.ArrayLike) -> IntArray:
        arr = np.asarray(values, dtype=np.int64)
        if arr.size and (arr.min() < 0 or arr.max() >= self.order):
            raise FieldError(f"array holds values outside GF({self.order})")
        return arr

    @cached_property
    def log_tables(self) -> tuple[IntArray, IntArray] | None:
        """
        (exp, log) for fields up to TABLE_MAX_DEGREE. exp has length 2(q-1) so that exp[log a + log b] needs no
        modulo. The generator is searched for since the default polynomial need not be primitive.
        """
        if self.m > TABLE_MAX_DEGREE:
            return None
        q = self.order
        for generator in range(1 if q == 2 else 2, q):
            powers = [1]
            x = 1
            for _ in range(q - 2):
                x = _mul_direct(x, generator, self.reduction_polynomial, self.m)
                if x == 1:
                    break
                powers.append(x)
            if len(powers) == q - 1:
                exp = np.array(powers + powers, dtype=np.int64)
                log = np.zeros(q, dtype=np.int64)
                log[exp[: q - 1]] = np.arange(q - 1, dtype=np.int64)
                logger.debug(f"GF({q}) tables built with generator {generator}")
                return exp, log
        raise AssertionError(f"GF({q}) has no generator")  # pragma: no cover

    def mul(self, a: FieldElement, b: FieldElement) -> FieldElement:
        return _mul_direct(self.check(a), self.check(b), self.reduction_polynomial, self.m)

    def inv(self, a: FieldElement) -> FieldElement:
        if self.check(a) == 0:
            raise FieldError("zero has no multiplicative inverse")
        # a^(q-2) by square-and-multiply
        result, base, exponent = 1, a, self.order - 2
        while exponent:
            if exponent & 1:
                result = _mul_direct(result, base, self.reduction_polynomial, self.m)
            base = _mul_direct(base, base, self.reduction_polynomial, self.m)
            exponent >>= 1
        return result

    def mul_array(self, a: npt.ArrayLike, b: npt.ArrayLike) -> IntArray:
        "Elementwise product with numpy broadcasting"
        x = np.asarray(a, dtype=np.int64)
        y = np.asarray(b, dtype=np.int64)
        tables = self.log_tables
        if tables is None:
            return self._mul_array_direct(x, y)
        exp, log = tables
        product = exp[log[x] + log[y]]
        return np.where((x == 0) | (y == 0), 0, product)

    def _mul_array_direct(self, a: IntArray, b: IntArray) -> IntArray:
        a, b = np.broadcast_arrays(a, b)
        a = a.copy()
        result = np.zeros(a.shape, dtype=np.int64)
        top = 1 << self.m
        for bit in range(self.m):
            result ^= np.where((b >> bit) & 1, a, 0)
            a <<= 1
            a = np.where(a & top, a ^ self.reduction_polynomial, a)
        return result

    def inv_array(self, a: npt.ArrayLike) -> IntArray:
        x = np.asarray(a, dtype=np.int64)
        if np.any(x == 0):
            raise FieldError("zero has no multiplicative inverse")
        tables = self.log_tables
        if tables is None:
            return np.vectorize(self.inv, otypes=[np.int64])(x)
        exp, log = tables
        return exp[(self.order - 1 - log[x]) % (self.order - 1)]


def gf_mul(a: FieldElement, b: FieldElement, f: FieldSpec) -> FieldElement:
    return f.mul(a, b)


def gf_inv(a: FieldElement, f: FieldSpec) -> FieldElement:
    return f.inv(a)


@dataclass(frozen=True)
class FieldMatrix:
    """
    Dense matrix over a GF(2^m). entries has shape (rows, cols); a matrix with zero rows is valid (no equations yet).
    """

    entries: IntArray
    field: FieldSpec

    def __post_init__(self) -> None:
        entries = self.field.check_array(self.entries)
        if entries.ndim != 2:
            raise FieldError(f"matrix entries must be 2-D, got shape {entries.shape}")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_rows(cls, rows: t.Sequence[t.Sequence[int]], field: FieldSpec, cols: int | None = None) -> "FieldMatrix":
        if not rows:
            return cls(np.zeros((0, cols or 0), dtype=np.int64), field)
        return cls(np.array(rows, dtype=np.int64), field)

    @property
    def rows(self) -> int:
        return int(self.entries.shape[0])

    @property
    def cols(self) -> int:
        return int(self.entries.shape[1])


def _rref(a: IntArray, field: FieldSpec, b: IntArray | None = None) -> tuple[IntArray, IntArray | None, list[int]]:
    """
    Reduced row echelon form with the same row operations applied to b. Returns (R, b', pivot columns).
    """
    r_mat = a.copy()
    b_mat = None if b is None else b.copy()
    n_rows, n_cols = r_mat.shape
    pivots: list[int] = []
    row = 0
    for col in range(n_cols):
        if row == n_rows:
            break
        candidates = np.flatnonzero(r_mat[row:, col])
        if candidates.size == 0:
            continue
        pivot = row + int(candidates[0])
        if pivot != row:
            r_mat[[row, pivot]] = r_mat[[pivot, row]]
            if b_mat is not None:
                b_mat[[row, pivot]] = b_mat[[pivot, row]]
        scale = field.inv(int(r_mat[row, col]))
        if scale != 1:
            r_mat[row] = field.mul_array(r_mat[row], scale)
            if b_mat is not None:
                b_mat[row] = field.mul_array(b_mat[row], scale)
        factors = r_mat[:, col].copy()
        factors[row] = 0
        targets = np.flatnonzero(factors)
        if targets.size:
            r_mat[targets] ^= field.mul_array(factors[targets, None], r_mat[row][None, :])
            if b_mat is not None:
                b_mat[targets] ^= field.mul_array(factors[targets, None], b_mat[row][None, :])
        pivots.append(col)
        row += 1
    return r_mat, b_mat, pivots


def gf2_rank(bits: npt.ArrayLike) -> int:
    """
    Rank over GF(2) with each row packed into one integer, keeping a basis indexed by leading bit.
    """
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.size == 0:
        return 0
    weights = [1 << j for j in range(arr.shape[1])]
    basis: dict[int, int] = {}
    for row in arr:
        packed = sum(w for w, bit in zip(weights, row) if bit & 1)
        while packed:
            lead = packed.bit_length() - 1
            if lead not in basis:
                basis[lead] = packed
                break
            packed ^= basis[lead]
    return len(basis)


def mat_rank_generic(matrix: FieldMatrix) -> int:
    "Reference rank by Gaussian elimination in the matrix's own field"
    if matrix.rows == 0 or matrix.cols == 0:
        return 0
    _, _, pivots = _rref(matrix.entries, matrix.field)
    return len(pivots)


def mat_rank(matrix: FieldMatrix) -> int:
    if matrix.field.m == 1:
        return gf2_rank(matrix.entries)
    return mat_rank_generic(matrix)


@dataclass(frozen=True)
class PartialSolution:
    """
    values maps an unknown's column index to its (uniquely determined) symbol vector. inconsistent is set when some
    equation reduced to 0 = nonzero; values then only come from the equations that take part in no linear dependency
    (every dependent equation belongs to some contradicting combination once one exists).
    """

    values: dict[int, IntArray]
    rank: int
    inconsistent: bool


def _independent_values(a: FieldMatrix, payload: IntArray) -> dict[int, IntArray]:
    "Determined unknowns of the equations whose removal lowers the rank"
    full = mat_rank(a)
    keep = [i for i in range(a.rows) if mat_rank(FieldMatrix(np.delete(a.entries, i, axis=0), a.field)) < full]
    if not keep:
        return {}
    reduced, reduced_b, pivots = _rref(a.entries[keep], a.field, payload[keep])
    assert reduced_b is not None
    return {col: reduced_b[i].copy() for i, col in enumerate(pivots) if np.count_nonzero(reduced[i]) == 1}


def gauss_solve_partial(a: FieldMatrix, b: npt.ArrayLike) -> PartialSolution:
    """
    Solve a·u = b for as many unknowns as the system pins down. An unknown is determined exactly when the unit vector
    of its column lies in the row space, i.e. when some row of the reduced form has its pivot as only nonzero entry.

    a has one row per equation and one column per unknown; b has one row of payload symbols per equation.
    """
    payload = a.field.check_array(b)
    if payload.ndim == 1:
        payload = payload[:, None]
    if payload.shape[0] != a.rows:
        raise FieldError(f"{a.rows} equations but {payload.shape[0]} payload rows")
    if a.rows == 0:
        return PartialSolution(values={}, rank=0, inconsistent=False)

    reduced, reduced_b, pivots = _rref(a.entries, a.field, payload)
    assert reduced_b is not None
    values = {col: reduced_b[i].copy() for i, col in enumerate(pivots) if np.count_nonzero(reduced[i]) == 1}
    inconsistent = bool(np.any(reduced_b[len(pivots) :]))
    if inconsistent:
        logger.warning(f"inconsistent system: {a.rows - len(pivots)} dependent rows, some with nonzero payload")
        values = _independent_values(a, payload)
    return PartialSolution(values=values, rank=len(pivots), inconsistent=inconsistent)


def full_rank_probability(n: int, delta: int, q: int) -> float:
    """
    Probability that a uniformly random n x (n + delta) matrix over GF(q) has rank n:

        prod_{i=1..n} (1 - q^(i-1) / q^(n+delta))

    Exhaustive enumeration of small binary matrices agrees with the product, not with its complement.
    """
    if n < 1 or delta < 0 or q < 2:
        raise FieldError(f"full_rank_probability needs n >= 1, delta >= 0, q >= 2 (got {n}, {delta}, {q})")
    return math.prod(1.0 - float(q) ** (i - 1 - n - delta) for i in range(1, n + 1))


def full_rank_probabilities(n: int, deltas: npt.ArrayLike, q: int) -> npt.NDArray[np.float64]:
    "full_rank_probability for many column excesses at once"
    excess = np.asarray(deltas, dtype=np.float64)
    if n < 1 or q < 2 or np.any(excess < 0):
        raise FieldError(f"full_rank_probabilities needs n >= 1, deltas >= 0, q >= 2 (got {n}, {q})")
    exponents = np.arange(1, n + 1, dtype=np.float64)[None, :] - 1.0 - n - excess.reshape(-1, 1)
    with np.errstate(under="ignore"):
        return np.prod(1.0 - np.power(float(q), exponents), axis=1).reshape(excess.shape)
