"""Polynomials in (x, w, w̄) and weighted truncated jets.

A monomial is an exponent tuple laid out as ``(a_1..a_l, b_1..b_n, c_1..c_n)``
where ``a`` runs over the real variables x, ``b`` over w and ``c`` over w̄.
Variables are addressed as ``("x", h)``, ``("w", k)`` or ``("cw", k)`` with
zero-based indices.
"""

import logging
import numbers
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from typing_extensions import override

from crext.config import config
from crext.custom_exceptions import (
    CutoffMismatchError,
    DimensionMismatchError,
    ParameterError,
    SingularJetError,
)

Monomial = Tuple[int, ...]
Var = Tuple[str, int]
Scalar = Union[int, float, complex]

logger = logging.getLogger(__name__)


class _Infinite:
    """Weight of a block whose x variables never contribute a finite order."""

    _instance: Optional["_Infinite"] = None

    def __new__(cls) -> "_Infinite":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    @override
    def __repr__(self) -> str:
        return "INFINITE"

    def __lt__(self, other: object) -> bool:
        return False

    def __le__(self, other: object) -> bool:
        return other is self

    def __gt__(self, other: object) -> bool:
        return other is not self

    def __ge__(self, other: object) -> bool:
        return True

    @override
    def __eq__(self, other: object) -> bool:
        return other is self

    @override
    def __hash__(self) -> int:
        return hash("INFINITE")

    def __add__(self, other: object) -> "_Infinite":
        return self

    __radd__ = __add__


INFINITE = _Infinite()
Weight = Union[int, _Infinite]


def is_finite(weight: Weight) -> bool:
    return weight is not INFINITE


def weight_to_json(weight: Weight) -> Union[int, str]:
    return "inf" if weight is INFINITE else int(weight)  # type: ignore[arg-type]


@dataclass(frozen=True)
class WeightVector:
    """Block sizes l_1..l_r of the x variables with strictly increasing weights m_1..m_r.

    Every w and w̄ variable has weight 1. Only the last weight may be INFINITE.
    """

    blocks: Tuple[int, ...]
    weights: Tuple[Weight, ...]
    _x_weights: Tuple[Weight, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.blocks) != len(self.weights) or not self.blocks:
            raise ParameterError("blocks and weights must be nonempty lists of equal length")
        if any(size < 1 for size in self.blocks):
            raise ParameterError("block sizes must be positive")
        for i, weight in enumerate(self.weights):
            if weight is INFINITE:
                if i != len(self.weights) - 1:
                    raise ParameterError("only the last weight may be infinite")
            elif not isinstance(weight, int) or weight < 1:
                raise ParameterError(f"invalid weight {weight!r}")
        for lower, upper in zip(self.weights, self.weights[1:]):
            if not lower < upper:
                raise ParameterError("weights must be strictly increasing")
        per_x: List[Weight] = []
        for size, weight in zip(self.blocks, self.weights):
            per_x.extend([weight] * size)
        object.__setattr__(self, "_x_weights", tuple(per_x))

    @classmethod
    def uniform(cls, l: int) -> "WeightVector":
        """Ordinary degree: every x has weight 1."""
        return cls((l,), (1,))

    @property
    def l(self) -> int:
        return len(self._x_weights)

    @property
    def r(self) -> int:
        return len(self.blocks)

    def ranges(self) -> List[range]:
        out = []
        start = 0
        for size in self.blocks:
            out.append(range(start, start + size))
            start += size
        return out

    def weight_of(self, h: int) -> Weight:
        return self._x_weights[h]

    def block_of(self, h: int) -> int:
        for i, rng in enumerate(self.ranges()):
            if h in rng:
                return i
        raise ParameterError(f"x index {h} out of range")

    @property
    def top_finite(self) -> int:
        finite = [int(m) for m in self.weights if m is not INFINITE]  # type: ignore[arg-type]
        return max(finite) if finite else 0

    def monomial_degree(self, mono: Monomial) -> Weight:
        l = self.l
        total = sum(mono[l:])
        for h in range(l):
            if mono[h]:
                weight = self._x_weights[h]
                if weight is INFINITE:
                    return INFINITE
                total += weight * mono[h]  # type: ignore[operator]
        return total

    def to_json(self) -> Dict[str, List[Union[int, str]]]:
        return {
            "blocks": list(self.blocks),
            "weights": [weight_to_json(m) for m in self.weights],
        }


def _slot(var: Var, nvars: Tuple[int, int]) -> int:
    kind, index = var
    l, n = nvars
    if kind == "x" and 0 <= index < l:
        return index
    if kind == "w" and 0 <= index < n:
        return l + index
    if kind == "cw" and 0 <= index < n:
        return l + n + index
    raise ParameterError(f"unknown variable {var!r} for nvars {nvars}")


class Poly:
    """Complex-coefficient polynomial in (x, w, w̄). Instances are immutable."""

    __slots__ = ("_terms", "nvars")

    _terms: Dict[Monomial, complex]
    nvars: Tuple[int, int]

    def __init__(self, terms: Mapping[Monomial, Scalar], nvars: Tuple[int, int]) -> None:
        l, n = nvars
        size = l + 2 * n
        clean: Dict[Monomial, complex] = {}
        for mono, coeff in terms.items():
            if len(mono) != size:
                raise DimensionMismatchError(
                    f"monomial {mono} does not fit {l} real and {n} complex variables"
                )
            value = complex(coeff)
            if value != 0:
                clean[tuple(int(e) for e in mono)] = value
        self._terms = clean
        self.nvars = (l, n)

    # construction helpers

    @classmethod
    def zero(cls, nvars: Tuple[int, int]) -> "Poly":
        return cls({}, nvars)

    @classmethod
    def constant(cls, value: Scalar, nvars: Tuple[int, int]) -> "Poly":
        l, n = nvars
        return cls({(0,) * (l + 2 * n): value}, nvars)

    @classmethod
    def variable(cls, var: Var, nvars: Tuple[int, int]) -> "Poly":
        l, n = nvars
        mono = [0] * (l + 2 * n)
        mono[_slot(var, nvars)] = 1
        return cls({tuple(mono): 1.0}, nvars)

    # accessors

    @property
    def terms(self) -> Mapping[Monomial, complex]:
        return MappingProxyType(self._terms)

    @property
    def l(self) -> int:
        return self.nvars[0]

    @property
    def n(self) -> int:
        return self.nvars[1]

    def items(self) -> Iterator[Tuple[Monomial, complex]]:
        return iter(sorted(self._terms.items()))

    def coefficient(self, mono: Monomial) -> complex:
        return self._terms.get(tuple(mono), 0j)

    def constant_term(self) -> complex:
        return self.coefficient((0,) * (self.l + 2 * self.n))

    def is_zero(self) -> bool:
        return not self._terms

    def variables_used(self) -> List[Var]:
        l, n = self.nvars
        used = set()
        for mono in self._terms:
            for slot, exp in enumerate(mono):
                if exp:
                    used.add(slot)
        out: List[Var] = []
        for slot in sorted(used):
            if slot < l:
                out.append(("x", slot))
            elif slot < l + n:
                out.append(("w", slot - l))
            else:
                out.append(("cw", slot - l - n))
        return out

    def _wrap(self, terms: Mapping[Monomial, Scalar], hermitian: bool) -> "Poly":
        if hermitian:
            return RealPoly(terms, self.nvars, check=False)
        return Poly(terms, self.nvars)

    def _coerce(self, other: object) -> Optional["Poly"]:
        if isinstance(other, Poly):
            if other.nvars != self.nvars:
                raise DimensionMismatchError(f"nvars {self.nvars} vs {other.nvars}")
            return other
        if isinstance(other, numbers.Number):
            return Poly.constant(complex(other), self.nvars)  # type: ignore[arg-type]
        return None

    # arithmetic

    def __add__(self, other: object) -> "Poly":
        rhs = self._coerce(other)
        if rhs is None:
            return NotImplemented
        terms = dict(self._terms)
        for mono, coeff in rhs._terms.items():
            terms[mono] = terms.get(mono, 0j) + coeff
        return self._wrap(terms, _both_real(self, other))

    def __radd__(self, other: object) -> "Poly":
        return self.__add__(other)

    def __neg__(self) -> "Poly":
        return self._wrap({m: -c for m, c in self._terms.items()}, isinstance(self, RealPoly))

    def __sub__(self, other: object) -> "Poly":
        rhs = self._coerce(other)
        if rhs is None:
            return NotImplemented
        return self + (-rhs)

    def __rsub__(self, other: object) -> "Poly":
        return (-self) + other

    def __mul__(self, other: object) -> "Poly":
        if isinstance(other, numbers.Number) and not isinstance(other, Poly):
            value = complex(other)  # type: ignore[arg-type]
            return self._wrap(
                {m: c * value for m, c in self._terms.items()},
                isinstance(self, RealPoly) and value.imag == 0,
            )
        rhs = self._coerce(other)
        if rhs is None:
            return NotImplemented
        terms: Dict[Monomial, complex] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in rhs._terms.items():
                mono = tuple(e1 + e2 for e1, e2 in zip(m1, m2))
                terms[mono] = terms.get(mono, 0j) + c1 * c2
        return self._wrap(terms, _both_real(self, rhs))

    def __rmul__(self, other: object) -> "Poly":
        return self.__mul__(other)

    def __pow__(self, exponent: int) -> "Poly":
        if exponent < 0:
            raise ParameterError("negative powers are not polynomials")
        result: Poly = Poly.constant(1.0, self.nvars)
        if isinstance(self, RealPoly):
            result = RealPoly.constant(1.0, self.nvars)
        for _ in range(exponent):
            result = result * self
        return result

    @override
    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Poly):
            return NotImplemented
        return self.nvars == other.nvars and self._terms == other._terms

    @override
    def __hash__(self) -> int:
        return hash((self.nvars, frozenset(self._terms.items())))

    @override
    def __repr__(self) -> str:
        return f"{type(self).__name__}({dict(self.items())!r}, nvars={self.nvars})"

    # calculus and structure

    def conjugate(self) -> "Poly":
        """Complex conjugate: conjugates coefficients and swaps w with w̄."""
        l, n = self.nvars
        terms = {}
        for mono, coeff in self._terms.items():
            swapped = mono[:l] + mono[l + n :] + mono[l : l + n]
            terms[swapped] = coeff.conjugate()
        return self._wrap(terms, isinstance(self, RealPoly))

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        scale = max((abs(c) for c in self._terms.values()), default=0.0)
        diff = self - self.conjugate()
        return all(abs(c) <= tol * max(scale, 1.0) for c in diff._terms.values())

    def derivative(self, var: Var) -> "Poly":
        slot = _slot(var, self.nvars)
        terms: Dict[Monomial, complex] = {}
        for mono, coeff in self._terms.items():
            exp = mono[slot]
            if exp:
                lowered = mono[:slot] + (exp - 1,) + mono[slot + 1 :]
                terms[lowered] = terms.get(lowered, 0j) + coeff * exp
        # ∂_x keeps Hermitian symmetry, ∂_w does not
        return self._wrap(terms, isinstance(self, RealPoly) and var[0] == "x")

    def weighted_order(self, weights: WeightVector) -> Weight:
        return weighted_order(self, weights)

    def homogeneous_part(self, weights: WeightVector, degree: int) -> "Poly":
        return self._wrap(
            {m: c for m, c in self._terms.items() if weights.monomial_degree(m) == degree},
            isinstance(self, RealPoly),
        )

    def truncate(self, weights: WeightVector, cutoff: int) -> "Poly":
        return self._wrap(
            {m: c for m, c in self._terms.items() if weights.monomial_degree(m) <= cutoff},
            isinstance(self, RealPoly),
        )

    def chop(self, tol: float) -> "Poly":
        return self._wrap(
            {m: c for m, c in self._terms.items() if abs(c) > tol}, isinstance(self, RealPoly)
        )

    def substitute(self, assignments: Mapping[Var, "Poly"]) -> "Poly":
        """Compose with the given polynomials, without truncation."""
        names = _slot_names(self.nvars)
        powers: Dict[Tuple[int, int], Poly] = {}

        def power(slot: int, exp: int) -> Poly:
            key = (slot, exp)
            if key not in powers:
                base = assignments.get(names[slot])
                if base is None:
                    base = Poly.variable(names[slot], self.nvars)
                powers[key] = base**exp
            return powers[key]

        target = self.nvars
        for value in assignments.values():
            if value.nvars != target:
                raise DimensionMismatchError("substituted polynomials must share nvars")
        result = Poly.zero(target)
        for mono, coeff in self._terms.items():
            term: Poly = Poly.constant(coeff, target)
            for slot, exp in enumerate(mono):
                if exp:
                    term = term * power(slot, exp)
            result = result + term
        return result

    def evaluate(self, x: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Evaluate on samples ``x`` of shape (N, l) and ``w`` of shape (N, n)."""
        l, n = self.nvars
        w = np.asarray(w, dtype=complex).reshape(-1, n)
        samples = w.shape[0]
        x = np.asarray(x, dtype=float).reshape(samples, l) if l else np.zeros((samples, 0))
        cw = np.conj(w)
        out = np.zeros(samples, dtype=complex)
        for mono, coeff in self._terms.items():
            value = np.full(samples, coeff, dtype=complex)
            for h in range(l):
                if mono[h]:
                    value = value * x[:, h] ** mono[h]
            for k in range(n):
                if mono[l + k]:
                    value = value * w[:, k] ** mono[l + k]
                if mono[l + n + k]:
                    value = value * cw[:, k] ** mono[l + n + k]
            out += value
        return out


class RealPoly(Poly):
    """Hermitian-symmetric polynomial: coeff(a, b, c) == conj(coeff(a, c, b))."""

    __slots__ = ()

    def __init__(
        self, terms: Mapping[Monomial, Scalar], nvars: Tuple[int, int], check: bool = True
    ) -> None:
        super().__init__(terms, nvars)
        if check and not self.is_hermitian():
            raise ParameterError("polynomial is not real-valued")

    @classmethod
    def from_poly(cls, poly: Poly) -> "RealPoly":
        return cls(poly.terms, poly.nvars)

    @classmethod
    @override
    def zero(cls, nvars: Tuple[int, int]) -> "RealPoly":
        return cls({}, nvars, check=False)

    @classmethod
    @override
    def constant(cls, value: Scalar, nvars: Tuple[int, int]) -> "RealPoly":
        l, n = nvars
        return cls({(0,) * (l + 2 * n): float(np.real(value))}, nvars, check=False)

    @override
    def evaluate(self, x: np.ndarray, w: np.ndarray) -> np.ndarray:
        return super().evaluate(x, w).real


def _both_real(a: object, b: object) -> bool:
    if not isinstance(a, RealPoly):
        return False
    if isinstance(b, RealPoly):
        return True
    return isinstance(b, numbers.Number) and complex(b).imag == 0  # type: ignore[arg-type]


def _slot_names(nvars: Tuple[int, int]) -> List[Var]:
    l, n = nvars
    return (
        [("x", h) for h in range(l)] + [("w", k) for k in range(n)] + [("cw", k) for k in range(n)]
    )


def weighted_order(p: Poly, weights: WeightVector) -> Weight:
    """Lowest weighted degree among the terms of ``p``; INFINITE for the zero polynomial."""
    if weights.l != p.l:
        raise DimensionMismatchError(f"weights cover {weights.l} x variables, polynomial has {p.l}")
    order: Weight = INFINITE
    for mono in p.terms:
        degree = weights.monomial_degree(mono)
        if degree < order:
            order = degree
    return order


def numerical_rank(matrix: np.ndarray, rtol: Optional[float] = None) -> int:
    """Rank by singular values above ``rtol`` times the largest one."""
    rtol = config.rank_rtol if rtol is None else rtol
    matrix = np.atleast_2d(np.asarray(matrix))
    if matrix.size == 0:
        return 0
    singular = np.linalg.svd(matrix, compute_uv=False)
    if singular[0] == 0:
        return 0
    return int(np.sum(singular > rtol * singular[0]))


class Jet:
    """Polynomial truncated above a weighted degree."""

    __slots__ = ("cutoff", "poly", "weights")

    poly: Poly
    weights: WeightVector
    cutoff: int

    def __init__(self, poly: Poly, weights: WeightVector, cutoff: int) -> None:
        if weights.l != poly.l:
            raise DimensionMismatchError("weights and polynomial disagree on l")
        self.poly = poly.truncate(weights, cutoff)
        self.weights = weights
        self.cutoff = cutoff

    @classmethod
    def zero(cls, nvars: Tuple[int, int], weights: WeightVector, cutoff: int) -> "Jet":
        return cls(Poly.zero(nvars), weights, cutoff)

    @classmethod
    def constant(
        cls, value: Scalar, nvars: Tuple[int, int], weights: WeightVector, cutoff: int
    ) -> "Jet":
        return cls(Poly.constant(value, nvars), weights, cutoff)

    @classmethod
    def variable(
        cls, var: Var, nvars: Tuple[int, int], weights: WeightVector, cutoff: int
    ) -> "Jet":
        return cls(Poly.variable(var, nvars), weights, cutoff)

    def with_poly(self, poly: Poly) -> "Jet":
        return Jet(poly, self.weights, self.cutoff)

    @property
    def nvars(self) -> Tuple[int, int]:
        return self.poly.nvars

    def _check(self, other: "Jet") -> None:
        if (
            other.cutoff != self.cutoff
            or other.weights != self.weights
            or other.nvars != self.nvars
        ):
            raise CutoffMismatchError(
                f"jet cutoff {self.cutoff} with {self.weights} vs "
                f"cutoff {other.cutoff} with {other.weights}"
            )

    def __add__(self, other: object) -> "Jet":
        if isinstance(other, Jet):
            self._check(other)
            return self.with_poly(self.poly + other.poly)
        if isinstance(other, numbers.Number):
            return self.with_poly(self.poly + other)
        return NotImplemented

    def __radd__(self, other: object) -> "Jet":
        return self.__add__(other)

    def __neg__(self) -> "Jet":
        return self.with_poly(-self.poly)

    def __sub__(self, other: object) -> "Jet":
        if isinstance(other, Jet):
            self._check(other)
            return self.with_poly(self.poly - other.poly)
        if isinstance(other, numbers.Number):
            return self.with_poly(self.poly - other)
        return NotImplemented

    def __mul__(self, other: object) -> "Jet":
        if isinstance(other, Jet):
            return jet_mul(self, other)
        if isinstance(other, numbers.Number):
            return self.with_poly(self.poly * other)
        return NotImplemented

    def __rmul__(self, other: object) -> "Jet":
        return self.__mul__(other)

    @override
    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Jet):
            return NotImplemented
        return (
            self.cutoff == other.cutoff
            and self.weights == other.weights
            and self.poly == other.poly
        )

    @override
    def __hash__(self) -> int:
        return hash((self.poly, self.weights, self.cutoff))

    @override
    def __repr__(self) -> str:
        return f"Jet({self.poly!r}, cutoff={self.cutoff})"

    def derivative(self, var: Var) -> "Jet":
        return self.with_poly(self.poly.derivative(var))

    def conjugate(self) -> "Jet":
        return self.with_poly(self.poly.conjugate())

    def constant_term(self) -> complex:
        return self.poly.constant_term()

    def is_zero(self) -> bool:
        return self.poly.is_zero()


def jet_mul(a: Jet, b: Jet) -> Jet:
    """Product of two jets, skipping every pair of terms above the cutoff."""
    a._check(b)
    weights, cutoff = a.weights, a.cutoff
    left = [(m, c, weights.monomial_degree(m)) for m, c in a.poly.terms.items()]
    right = [(m, c, weights.monomial_degree(m)) for m, c in b.poly.terms.items()]
    terms: Dict[Monomial, complex] = {}
    for m1, c1, d1 in left:
        for m2, c2, d2 in right:
            if d1 + d2 > cutoff:  # type: ignore[operator]
                continue
            mono = tuple(e1 + e2 for e1, e2 in zip(m1, m2))
            terms[mono] = terms.get(mono, 0j) + c1 * c2
    product: Poly = Poly(terms, a.nvars)
    if isinstance(a.poly, RealPoly) and isinstance(b.poly, RealPoly):
        product = RealPoly(terms, a.nvars, check=False)
    return Jet(product, weights, cutoff)


def _jet_matmul(left: Sequence[Sequence[Jet]], right: Sequence[Sequence[Jet]]) -> List[List[Jet]]:
    rows, inner, cols = len(left), len(right), len(right[0])
    out = []
    for i in range(rows):
        row = []
        for j in range(cols):
            acc = left[i][0] * right[0][j]
            for k in range(1, inner):
                acc = acc + left[i][k] * right[k][j]
            row.append(acc)
        out.append(row)
    return out


def jet_matrix_inverse(matrix: Sequence[Sequence[Jet]]) -> List[List[Jet]]:
    """Inverse of a square jet matrix: Neumann series (I + C⁻¹N)⁻¹C⁻¹, C = M(0)."""
    size = len(matrix)
    if size == 0 or any(len(row) != size for row in matrix):
        raise DimensionMismatchError("jet_matrix_inverse needs a nonempty square matrix")
    ref = matrix[0][0]
    for row in matrix:
        for entry in row:
            ref._check(entry)
    nvars, weights, cutoff = ref.nvars, ref.weights, ref.cutoff

    const = np.array([[entry.constant_term() for entry in row] for row in matrix])
    if numerical_rank(const) < size:
        raise SingularJetError(f"constant term of the {size}x{size} jet matrix is singular")
    const_inv = np.linalg.inv(const)

    def constant(value: complex) -> Jet:
        return Jet.constant(complex(value), nvars, weights, cutoff)

    nilpotent = [
        [
            sum(
                (
                    (matrix[k][j] - complex(const[k, j])) * complex(const_inv[i, k])
                    for k in range(size)
                ),
                Jet.zero(nvars, weights, cutoff),
            )
            for j in range(size)
        ]
        for i in range(size)
    ]
    minus_nilpotent = [[-entry for entry in row] for row in nilpotent]

    term = [[constant(const_inv[i, j]) for j in range(size)] for i in range(size)]
    result = term
    # every entry of the nilpotent part has weighted order >= 1
    for _ in range(cutoff + 1):
        term = _jet_matmul(minus_nilpotent, term)
        if all(entry.is_zero() for row in term for entry in row):
            break
        result = [[result[i][j] + term[i][j] for j in range(size)] for i in range(size)]
    return result


def jet_substitute(p: Jet, assignments: Mapping[Var, Jet]) -> Jet:
    """Compose ``p`` with the assigned jets, truncating every intermediate product."""
    for value in assignments.values():
        p._check(value)
    names = _slot_names(p.nvars)
    cache: Dict[Tuple[int, int], Jet] = {}

    def power(slot: int, exp: int) -> Jet:
        key = (slot, exp)
        if key not in cache:
            if exp == 1:
                base = assignments.get(names[slot])
                cache[key] = (
                    base
                    if base is not None
                    else Jet.variable(names[slot], p.nvars, p.weights, p.cutoff)
                )
            else:
                cache[key] = power(slot, exp - 1) * power(slot, 1)
        return cache[key]

    result = Jet.zero(p.nvars, p.weights, p.cutoff)
    for mono, coeff in p.poly.terms.items():
        term = Jet.constant(coeff, p.nvars, p.weights, p.cutoff)
        for slot, exp in enumerate(mono):
            if exp:
                term = term * power(slot, exp)
                if term.is_zero():
                    break
        result = result + term
    return result


def default_cutoff(weights: WeightVector) -> int:
    return weights.top_finite + 2
