"""Lie brackets of CR vector fields on truncated jets.

Fields are written in the ambient frame ∂_z, ∂_z̄, ∂_w, ∂_w̄ with coefficients
that are jets in the coordinates (x, w, w̄) of M. A field acts on a function
f(x, w, w̄) as Σ (c_z + c_z̄)/2 ∂_x f + c_w ∂_w f + c_w̄ ∂_w̄ f, which is all a
bracket of tangent fields needs. Jets here are truncated in ordinary degree
(every x has weight 1), so a derivative never drops a term that the value at the
origin of a later bracket depends on.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from crext.config import config
from crext.custom_exceptions import (
    CutoffMismatchError,
    DimensionMismatchError,
    InfiniteWeightError,
    InvariantViolationError,
    ParameterError,
)
from crext.manifold import LineRestriction, ManifoldModel, ModelLike, as_model
from crext.polyalg import (
    Jet,
    Monomial,
    Poly,
    WeightVector,
    default_cutoff,
    is_finite,
    jet_matrix_inverse,
    numerical_rank,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class VectorFieldJet:
    dz: Tuple[Jet, ...]
    dzb: Tuple[Jet, ...]
    dw: Tuple[Jet, ...]
    dwb: Tuple[Jet, ...]

    def __post_init__(self) -> None:
        coefficients = self.coefficients()
        ref = coefficients[0]
        for jet in coefficients[1:]:
            if jet.cutoff != ref.cutoff or jet.weights != ref.weights:
                raise CutoffMismatchError("vector field coefficients must share one cutoff")
        if len(self.dz) != len(self.dzb) or len(self.dw) != len(self.dwb):
            raise DimensionMismatchError("unbalanced vector field components")

    @classmethod
    def zero(cls, nvars: Tuple[int, int], weights: WeightVector, cutoff: int) -> "VectorFieldJet":
        l, n = nvars
        zero = Jet.zero(nvars, weights, cutoff)
        return cls((zero,) * l, (zero,) * l, (zero,) * n, (zero,) * n)

    @property
    def cutoff(self) -> int:
        return self.dz[0].cutoff if self.dz else self.dw[0].cutoff

    @property
    def nvars(self) -> Tuple[int, int]:
        return (len(self.dz), len(self.dw))

    def coefficients(self) -> Tuple[Jet, ...]:
        return (*self.dz, *self.dzb, *self.dw, *self.dwb)

    def _rebuild(self, coefficients: Sequence[Jet]) -> "VectorFieldJet":
        l, n = self.nvars
        return VectorFieldJet(
            tuple(coefficients[:l]),
            tuple(coefficients[l : 2 * l]),
            tuple(coefficients[2 * l : 2 * l + n]),
            tuple(coefficients[2 * l + n :]),
        )

    def __add__(self, other: "VectorFieldJet") -> "VectorFieldJet":
        return self._rebuild([a + b for a, b in zip(self.coefficients(), other.coefficients())])

    def __sub__(self, other: "VectorFieldJet") -> "VectorFieldJet":
        return self._rebuild([a - b for a, b in zip(self.coefficients(), other.coefficients())])

    def scaled(self, factor: object) -> "VectorFieldJet":
        """Multiply every coefficient by a number or a jet."""
        return self._rebuild([c * factor for c in self.coefficients()])

    def conjugate(self) -> "VectorFieldJet":
        return VectorFieldJet(
            tuple(c.conjugate() for c in self.dzb),
            tuple(c.conjugate() for c in self.dz),
            tuple(c.conjugate() for c in self.dwb),
            tuple(c.conjugate() for c in self.dw),
        )

    def truncated(self, degree: int) -> "VectorFieldJet":
        """Drop coefficient terms of weighted degree above ``degree``."""
        if degree >= self.cutoff:
            return self
        return self._rebuild(
            [
                c.with_poly(c.poly.truncate(c.weights, max(degree, -1)))
                for c in self.coefficients()
            ]
        )

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.coefficients())

    def apply(self, f: Jet) -> Jet:
        """Derivative of a function of (x, w, w̄) along the field."""
        l, n = self.nvars
        out = Jet.zero(f.nvars, f.weights, f.cutoff)
        for h in range(l):
            df = f.derivative(("x", h))
            if not df.is_zero():
                out = out + (self.dz[h] + self.dzb[h]) * 0.5 * df
        for k in range(n):
            df = f.derivative(("w", k))
            if not df.is_zero():
                out = out + self.dw[k] * df
            df = f.derivative(("cw", k))
            if not df.is_zero():
                out = out + self.dwb[k] * df
        return out

    def apply_to_defining(self, h_i: Jet, i: int) -> Jet:
        """The field applied to r_i = -y_i + h_i."""
        y_component = (self.dzb[i] - self.dz[i]) * 0.5j
        return self.apply(h_i) - y_component

    def value_at_origin(self) -> np.ndarray:
        """Components (x_1..x_l, y_1..y_l, w_1..w_n, w̄_1..w̄_n) at 0 as a complex vector."""
        dz = np.array([c.constant_term() for c in self.dz])
        dzb = np.array([c.constant_term() for c in self.dzb])
        dw = np.array([c.constant_term() for c in self.dw])
        dwb = np.array([c.constant_term() for c in self.dwb])
        return np.concatenate([(dz + dzb) / 2, 0.5j * (dzb - dz), dw, dwb])


@dataclass(frozen=True)
class FiltrationReport:
    dims: Tuple[int, ...]
    hormander_numbers: List[Tuple[int, int]]
    finite_type: bool
    cap: int
    cutoff: int

    @property
    def status(self) -> str:
        return "finite type" if self.finite_type else f"type > {self.cap}"

    def to_json(self) -> Dict[str, object]:
        return {
            "dims": list(self.dims),
            "hormander_numbers": [list(pair) for pair in self.hormander_numbers],
            "finite_type": self.finite_type,
            "status": self.status,
            "cap": self.cap,
            "cutoff": self.cutoff,
        }


def cr_basis(m: ModelLike, cutoff: Optional[int] = None) -> List[VectorFieldJet]:
    """X_j = Σ_h a_jh ∂_z_h + ∂_w_j with A = −ᵗ(∂_w r)·ᵗ(∂_z r)⁻¹."""
    model = as_model(m)
    cutoff = cutoff if cutoff is not None else default_cutoff(model.weights)
    if cutoff < 2:
        raise ParameterError(f"cutoff {cutoff} below 2")
    l, n = model.nvars
    nvars = model.nvars
    weights = WeightVector.uniform(l)

    def jet(p: Poly) -> Jet:
        return Jet(p, weights, cutoff)

    def constant(value: complex) -> Jet:
        return Jet.constant(value, nvars, weights, cutoff)

    h = [jet(p) for p in model.h]
    # t[row h][column i] = ∂_z_h r_i = (i/2)δ_hi + (1/2)∂_x_h h_i
    t = [
        [h[i].derivative(("x", row)) * 0.5 + (0.5j if row == i else 0.0) for i in range(l)]
        for row in range(l)
    ]
    t_inv = jet_matrix_inverse(t)

    zero = constant(0.0)
    fields = []
    for j in range(n):
        dr_w = [h[i].derivative(("w", j)) for i in range(l)]
        a = []
        for col in range(l):
            acc = zero
            for i in range(l):
                if not dr_w[i].is_zero():
                    acc = acc - dr_w[i] * t_inv[i][col]
            a.append(acc)
        dw = tuple(constant(1.0 if k == j else 0.0) for k in range(n))
        fields.append(VectorFieldJet(tuple(a), (zero,) * l, dw, (zero,) * n))
    return fields


def lie_bracket(x: VectorFieldJet, y: VectorFieldJet) -> VectorFieldJet:
    if x.cutoff != y.cutoff:
        raise CutoffMismatchError(f"bracket of fields with cutoffs {x.cutoff} and {y.cutoff}")
    coefficients = [
        x.apply(cy) - y.apply(cx) for cx, cy in zip(x.coefficients(), y.coefficients())
    ]
    return x._rebuild(coefficients)


def _flatten(fields: Sequence[VectorFieldJet]) -> np.ndarray:
    keys: Dict[Tuple[int, Monomial], int] = {}
    entries = []
    for col, field in enumerate(fields):
        for comp, coeff in enumerate(field.coefficients()):
            for mono, value in coeff.poly.terms.items():
                row = keys.setdefault((comp, mono), len(keys))
                entries.append((row, col, value))
    matrix = np.zeros((max(len(keys), 1), len(fields)), dtype=complex)
    for row, col, value in entries:
        matrix[row, col] += value
    return matrix


def _independent(fields: List[VectorFieldJet]) -> List[VectorFieldJet]:
    """A subset of ``fields`` spanning the same space of jets over the constants."""
    if len(fields) <= 1:
        return fields
    matrix = _flatten(fields)
    _, r, pivots = scipy.linalg.qr(matrix, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0:
        return []
    rank = int(np.sum(diag > config.rank_rtol * diag[0]))
    return [fields[i] for i in sorted(pivots[:rank])]


def filtration(
    m: ModelLike, cap: Optional[int] = None, cutoff: Optional[int] = None
) -> FiltrationReport:
    """Dimensions of L^j at the origin and the Hörmander numbers read off their jumps."""
    model = as_model(m)
    cap = cap if cap is not None else config.filtration_cap
    if cap < 2:
        raise ParameterError(f"bracket length cap {cap} below 2")
    cutoff = cutoff if cutoff is not None else cap + 1
    if cutoff < cap - 1:
        raise ParameterError(f"cutoff {cutoff} too small for brackets of length {cap}")
    l, n = model.nvars
    full = 2 * n + l

    holomorphic = cr_basis(model, cutoff)
    base = holomorphic + [x.conjugate() for x in holomorphic]
    values = [field.value_at_origin() for field in base]
    dims = [numerical_rank(np.array(values))]
    level = _independent([field.truncated(cap - 1) for field in base])
    numbers: List[Tuple[int, int]] = []

    for length in range(2, cap + 1):
        if dims[-1] == full:
            break
        brackets = []
        for field in base:
            for inner in level:
                bracket = lie_bracket(field, inner).truncated(cap - length)
                if not bracket.is_zero():
                    brackets.append(bracket)
        values.extend(bracket.value_at_origin() for bracket in brackets)
        dim = numerical_rank(np.array(values))
        if dim > dims[-1]:
            numbers.append((length, dim - dims[-1]))
            logger.info("L^%s gains %s direction(s)", length, dim - dims[-1])
        dims.append(dim)
        level = _independent(brackets)

    return FiltrationReport(
        dims=tuple(dims),
        hormander_numbers=numbers,
        finite_type=dims[-1] == full,
        cap=cap,
        cutoff=cutoff,
    )


def _word_field(
    word: Sequence[int], x_o: VectorFieldJet, xb_o: VectorFieldJet
) -> VectorFieldJet:
    """[F_1, [F_2, ..., [F_{k-1}, F_k]]] with F = X_o for +1 and X̄_o for -1."""
    pick = {1: x_o, -1: xb_o}
    if len(word) < 2 or any(eps not in pick for eps in word):
        raise ParameterError(f"invalid bracket word {tuple(word)}")
    field = pick[word[-1]]
    for eps in reversed(word[:-1]):
        field = lie_bracket(pick[eps], field)
    return field


def _base_fields(
    model: ManifoldModel, cutoff: int, w_o: Optional[Sequence[complex]]
) -> Tuple[VectorFieldJet, VectorFieldJet]:
    fields = cr_basis(model, cutoff)
    direction = np.zeros(model.n, dtype=complex)
    if w_o is None:
        direction[0] = 1.0
    else:
        direction[:] = np.asarray(w_o, dtype=complex)
    if not np.any(direction):
        raise ParameterError("base direction w_o must be nonzero")
    x_o = VectorFieldJet.zero(model.nvars, fields[0].dz[0].weights, cutoff)
    for j, field in enumerate(fields):
        if direction[j] != 0:
            x_o = x_o + field.scaled(complex(direction[j]))
    return x_o, x_o.conjugate()


def _pairing(field: VectorFieldJet) -> np.ndarray:
    # ⟨∂r_i, B⟩(0) = Σ_h ∂_z_h r_i(0) c_z_h(0) with ∂_z r(0) = (i/2)·I
    return 0.5j * np.array([c.constant_term() for c in field.dz])


def bracket_pairing(
    word: Sequence[int],
    m: ModelLike,
    block: int,
    w_o: Optional[Sequence[complex]] = None,
    cutoff: Optional[int] = None,
) -> np.ndarray:
    """Pairing of ∂r_{I_block} with the word bracket of X_o, X̄_o at the origin.

    Normalized so that the word (1, -1) on y = |w|² gives 1. A word of length
    m_block pairs to zero with every later block; a nonzero value there raises
    InvariantViolationError.
    """
    model = as_model(m)
    cutoff = cutoff if cutoff is not None else len(word) + 2
    if len(word) > cutoff - 2:
        raise ParameterError(f"word of length {len(word)} needs cutoff >= {len(word) + 2}")
    rng = model.block_range(block)
    x_o, xb_o = _base_fields(model, cutoff, w_o)
    pairing = _pairing(_word_field(word, x_o, xb_o))
    if len(word) == model.block_weight(block):
        _check_later_blocks(pairing, rng.stop, word)
    return pairing[rng.start : rng.stop]


def _check_later_blocks(pairing: np.ndarray, start: int, word: Sequence[int]) -> None:
    later = pairing[start:]
    scale = max(1.0, float(np.max(np.abs(pairing), initial=0.0)))
    leak = float(np.max(np.abs(later), initial=0.0))
    if leak > config.rank_rtol * scale:
        logger.error("Word %s pairs to %s with the later blocks", tuple(word), later)
        raise InvariantViolationError(
            f"word of length {len(word)} pairs to {leak:.3e} with a block of higher weight"
        )


def _check_first_number(line: LineRestriction, k: int) -> None:
    first = line.weights.weights[0]
    if not is_finite(k) or not is_finite(first):
        raise InfiniteWeightError("the line restriction has no finite first Hörmander number")
    if k != first:
        raise ParameterError(f"k = {k} differs from the first Hörmander number {first}")


def bp_direction(line: LineRestriction, k: int, phi: float) -> np.ndarray:
    """v = Σ C(k−2, m−1)/(m!n!) ∂^m ∂̄^n h(0) along w_o = e^{iφ}, for m + n = k."""
    _check_first_number(line, k)
    l = line.l
    v = np.zeros(l, dtype=complex)
    for i, p in enumerate(line.h):
        for mono, coeff in p.terms.items():
            if any(mono[:l]):
                continue
            holo, anti = mono[l], mono[l + 1]
            if holo + anti != k or holo < 1 or anti < 1:
                continue
            # ∂^m ∂̄^n (w^m w̄^n)(0) = m! n! cancels the 1/(m! n!) weight
            v[i] += math.comb(k - 2, holo - 1) * coeff * np.exp(1j * (holo - anti) * phi)
    if np.max(np.abs(v.imag), initial=0.0) > 1e-9 * max(1.0, float(np.max(np.abs(v)))):
        logger.warning("bp_direction has imaginary part %s", v.imag)
    return v.real


def bracket_word_sum(
    line: LineRestriction, k: int, phi: float, cutoff: Optional[int] = None
) -> np.ndarray:
    """Direct sum over words ε ∈ {±1}^(k−2) closed by (X_o, X̄_o), weighted 1/(n!m!)."""
    _check_first_number(line, k)
    cutoff = cutoff if cutoff is not None else k + 2
    x_o, xb_o = _base_fields(line.model, cutoff, [np.exp(1j * phi)])
    total = np.zeros(line.l, dtype=complex)
    for prefix in itertools.product((1, -1), repeat=k - 2):
        word = (*prefix, 1, -1)
        holo = word.count(1)
        anti = word.count(-1)
        weight = 1.0 / (math.factorial(holo) * math.factorial(anti))
        total += weight * _pairing(_word_field(word, x_o, xb_o))
    return total.real


def all_brackets(
    m: ModelLike, max_length: int, cutoff: Optional[int] = None
) -> Dict[Tuple[int, ...], VectorFieldJet]:
    """Every right-nested bracket of X_j, X̄_j up to ``max_length``, keyed by its word.

    Letters are j + 1 for X_j and −(j + 1) for X̄_j.
    """
    model = as_model(m)
    cutoff = cutoff if cutoff is not None else max_length + 1
    fields = cr_basis(model, cutoff)
    letters = {j + 1: f for j, f in enumerate(fields)}
    letters.update({-(j + 1): f.conjugate() for j, f in enumerate(fields)})
    out: Dict[Tuple[int, ...], VectorFieldJet] = {(key,): f for key, f in letters.items()}
    frontier = dict(out)
    for _ in range(2, max_length + 1):
        nxt = {}
        for word, inner in frontier.items():
            for key, f in letters.items():
                nxt[(key, *word)] = lie_bracket(f, inner)
        out.update(nxt)
        frontier = nxt
    return out
