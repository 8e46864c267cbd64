"""Generic submanifolds y = h(x, w) of C^N through the origin.

Manifold specs are INI documents with a single ``[manifold]`` section::

    [manifold]
    l = 2
    n = 2
    blocks = 1, 1
    weights = 2, 4
    h =
        w1*cw1 + w2*cw2
        (w2*cw2)^2 + x1*w1*cw1

``blocks`` and ``weights`` are optional; when omitted they are computed from the
bracket filtration. Polynomials use ``x1..xl``, ``w1..wn`` and ``cw1..cwn`` (the
conjugates), ``^`` for powers, and the helpers ``Re(...)``, ``Im(...)`` and
``abs2(...)``.
"""

import configparser
import hashlib
import itertools
import logging
import os
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import sympy
from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations

from crext.config import config
from crext.custom_exceptions import (
    DimensionMismatchError,
    InfiniteWeightError,
    ManifoldSpecError,
    ManifoldValidationError,
    NonHomogeneousError,
    ParameterError,
)
from crext.polyalg import (
    INFINITE,
    Jet,
    Poly,
    RealPoly,
    Weight,
    WeightVector,
    is_finite,
    jet_substitute,
    numerical_rank,
    weighted_order,
)

logger = logging.getLogger(__name__)

BUNDLED_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "manifolds")

_TRANSFORMATIONS = (*standard_transformations, convert_xor)


@dataclass(frozen=True)
class ManifoldModel:
    """Graph-form model y_j = h_j(x, w), j = 1..l, with base point at the origin."""

    l: int
    n: int
    weights: WeightVector
    h: Tuple[RealPoly, ...]

    def __post_init__(self) -> None:
        if self.l < 1 or self.n < 1:
            raise DimensionMismatchError("a model needs l >= 1 and n >= 1")
        if self.weights.l != self.l:
            raise DimensionMismatchError(
                f"blocks cover {self.weights.l} coordinates but l = {self.l}"
            )
        if len(self.h) != self.l:
            raise DimensionMismatchError(
                f"expected {self.l} defining polynomials, got {len(self.h)}"
            )
        for p in self.h:
            if p.nvars != (self.l, self.n):
                raise DimensionMismatchError(
                    f"polynomial over {p.nvars}, model is {(self.l, self.n)}"
                )

    @property
    def nvars(self) -> Tuple[int, int]:
        return (self.l, self.n)

    @property
    def dimension(self) -> int:
        """Real dimension of M: 2n + l."""
        return 2 * self.n + self.l

    def block_range(self, block: int) -> range:
        ranges = self.weights.ranges()
        if not 1 <= block <= len(ranges):
            raise ParameterError(f"block {block} out of range 1..{len(ranges)}")
        return ranges[block - 1]

    def block_weight(self, block: int) -> Weight:
        self.block_range(block)
        return self.weights.weights[block - 1]

    def evaluate(self, x: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Values of h on samples, shape (N, l)."""
        return np.stack([p.evaluate(x, w) for p in self.h], axis=-1)


@dataclass(frozen=True)
class LineRestriction:
    """The model cut by the complex line of one w-direction (1-based ``direction``).

    ``seminormal`` is False when a coordinate of infinite weight still carries
    terms of finite weighted order, as y2 = x1|w1|² on the w1-line of the
    two-block example.
    """

    model: ManifoldModel
    direction: int
    seminormal: bool = True

    def __post_init__(self) -> None:
        if self.model.n != 1:
            raise DimensionMismatchError("a line restriction keeps exactly one w variable")

    @property
    def l(self) -> int:
        return self.model.l

    @property
    def n(self) -> int:
        return 1

    @property
    def weights(self) -> WeightVector:
        return self.model.weights

    @property
    def h(self) -> Tuple[RealPoly, ...]:
        return self.model.h

    @property
    def nvars(self) -> Tuple[int, int]:
        return self.model.nvars


ModelLike = Union[ManifoldModel, LineRestriction]


def as_model(m: ModelLike) -> ManifoldModel:
    return m.model if isinstance(m, LineRestriction) else m


@dataclass(frozen=True)
class PluriharmonicResult:
    is_pluriharmonic: bool
    weight: Optional[int]
    # holomorphic F in (z, w); its x slots stand for the z variables
    witness: Optional[Poly]


# validation


def validate_model(model: ManifoldModel, infinite_blocks: bool = True) -> None:
    """Raise ManifoldValidationError naming the first violated invariant.

    With ``infinite_blocks=False`` the weighted-order check skips blocks of
    infinite weight.
    """
    for j, p in enumerate(model.h, start=1):
        if abs(p.constant_term()) > 0:
            raise ManifoldValidationError(f"h(0)=0 violated for h{j}")
        for mono in p.terms:
            if sum(mono) == 1:
                raise ManifoldValidationError(f"∂h(0)=0 violated for h{j}")
        if not p.is_hermitian():
            raise ManifoldValidationError(f"h{j} is not real-valued")
    for block, rng in enumerate(model.weights.ranges(), start=1):
        declared = model.weights.weights[block - 1]
        if not infinite_blocks and not is_finite(declared):
            continue
        for h in rng:
            order = weighted_order(model.h[h], model.weights)
            if order < declared:
                raise ManifoldValidationError(
                    f"weighted order {order} of h{h + 1} is below declared m{block} = {declared}"
                )


def check_against_filtration(model: ManifoldModel, cap: Optional[int] = None) -> None:
    """Compare declared blocks/weights with the Hörmander numbers from brackets."""
    from crext import hormander

    cap = max(cap or config.filtration_cap, model.weights.top_finite)
    report = hormander.filtration(model, cap)
    declared = [
        (int(m), size)  # type: ignore[arg-type]
        for m, size in zip(model.weights.weights, model.weights.blocks)
        if is_finite(m)
    ]
    infinite_tail = not is_finite(model.weights.weights[-1])
    agrees = report.hormander_numbers == declared and report.finite_type != infinite_tail
    if not agrees:
        raise ManifoldValidationError(
            f"declared weights {declared}{' + inf' if infinite_tail else ''} disagree with "
            f"bracket filtration {report.hormander_numbers} ({report.status})"
        )


def weights_from_filtration(model: ManifoldModel, cap: Optional[int] = None) -> WeightVector:
    from crext import hormander

    cap = max(cap or config.filtration_cap, model.weights.top_finite)
    report = hormander.filtration(model, cap)
    blocks = [size for _, size in report.hormander_numbers]
    weights: List[Weight] = [m for m, _ in report.hormander_numbers]
    rest = model.l - sum(blocks)
    if rest:
        blocks.append(rest)
        weights.append(INFINITE)
    return WeightVector(tuple(blocks), tuple(weights))


# parsing and printing


def _symbols(l: int, n: int) -> Tuple[List[sympy.Symbol], List[sympy.Symbol], List[sympy.Symbol]]:
    xs = [sympy.Symbol(f"x{h + 1}", real=True) for h in range(l)]
    ws = [sympy.Symbol(f"w{k + 1}", real=True) for k in range(n)]
    cws = [sympy.Symbol(f"cw{k + 1}", real=True) for k in range(n)]
    return xs, ws, cws


def parse_polynomial(text: str, l: int, n: int) -> Poly:
    """Parse one polynomial string over x1..xl, w1..wn, cw1..cwn."""
    xs, ws, cws = _symbols(l, n)
    swap = {**dict(zip(ws, cws)), **dict(zip(cws, ws))}

    def conj(expr: Any) -> Any:
        return sympy.conjugate(sympy.sympify(expr).xreplace(swap))

    namespace: Dict[str, Any] = {str(s): s for s in (*xs, *ws, *cws)}
    namespace.update(
        {
            "Re": lambda e: (e + conj(e)) / 2,
            "Im": lambda e: (e - conj(e)) / (2 * sympy.I),
            "abs2": lambda e: e * conj(e),
            "I": sympy.I,
        }
    )
    try:
        expr = sympy.expand(
            parse_expr(text, local_dict=namespace, transformations=_TRANSFORMATIONS)
        )
    except (SyntaxError, TypeError, ValueError, sympy.SympifyError) as e:
        raise ManifoldSpecError(f"cannot parse polynomial {text!r}: {e}") from e
    unknown = sorted(str(s) for s in expr.free_symbols - set(namespace.values()))
    if unknown:
        raise ManifoldSpecError(f"unknown variables {', '.join(unknown)} in {text!r}")
    try:
        poly = sympy.Poly(expr, *xs, *ws, *cws)
    except sympy.PolynomialError as e:
        raise ManifoldSpecError(f"{text!r} is not a polynomial") from e
    terms = {}
    for mono, coeff in poly.terms():
        terms[tuple(mono)] = complex(coeff)
    return Poly(terms, (l, n))


def _parse_int_list(raw: str, name: str) -> List[int]:
    try:
        return [int(item) for item in raw.split(",") if item.strip()]
    except ValueError as e:
        raise ManifoldSpecError(f"{name} must be a comma-separated list of integers") from e


def _parse_weights(raw: str) -> List[Weight]:
    out: List[Weight] = []
    for item in raw.split(","):
        item = item.strip().lower()
        if not item:
            continue
        if item in ("inf", "infinite", "infinity"):
            out.append(INFINITE)
        else:
            try:
                out.append(int(item))
            except ValueError as e:
                raise ManifoldSpecError(f"invalid weight {item!r}") from e
    return out


def parse_and_validate(text: str, check_weights: bool = True) -> ManifoldModel:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
        section = parser["manifold"]
        l = section.getint("l")
        n = section.getint("n")
        h_lines = [line.strip() for line in section["h"].splitlines() if line.strip()]
    except (configparser.Error, KeyError, ValueError, TypeError) as e:
        raise ManifoldSpecError(f"invalid manifold spec: {e}") from e
    if l is None or n is None or l < 1 or n < 1:
        raise ManifoldSpecError("l and n must be positive integers")
    if len(h_lines) != l:
        raise ManifoldSpecError(f"expected {l} polynomials in h, found {len(h_lines)}")

    polys = [parse_polynomial(line, l, n) for line in h_lines]
    provisional = WeightVector.uniform(l)
    draft = ManifoldModel(
        l, n, provisional, tuple(RealPoly(p.terms, p.nvars, check=False) for p in polys)
    )
    validate_model(draft)

    declared = "weights" in section
    if declared:
        weights_list = _parse_weights(section["weights"])
        blocks = _parse_int_list(section.get("blocks", ""), "blocks")
        if not blocks and len(weights_list) == 1:
            blocks = [l]
        try:
            weights = WeightVector(tuple(blocks), tuple(weights_list))
        except ParameterError as e:
            raise ManifoldSpecError(str(e)) from e
        if weights.l != l:
            raise ManifoldSpecError(f"blocks cover {weights.l} coordinates but l = {l}")
        model = ManifoldModel(l, n, weights, draft.h)
        validate_model(model)
        if check_weights:
            check_against_filtration(model)
    elif "blocks" in section:
        raise ManifoldSpecError("blocks given without weights")
    else:
        model = ManifoldModel(l, n, weights_from_filtration(draft), draft.h)
        validate_model(model)
    logger.info("Parsed manifold with l=%s, n=%s, weights %s", l, n, model.weights.to_json())
    return model


def load_model(source: str, check_weights: bool = True) -> ManifoldModel:
    """Load a spec from a path, or from the bundled specs by name (``levi``, ``levi.mfd``)."""
    path = source
    if not os.path.isfile(path):
        name = os.path.splitext(os.path.basename(source))[0]
        path = os.path.join(BUNDLED_DIR, name + ".mfd")
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ManifoldSpecError(f"cannot read manifold spec {source!r}") from e
    return parse_and_validate(text, check_weights=check_weights)


def _format_coefficient(c: complex) -> str:
    if c.imag == 0:
        return repr(c.real)
    if c.real == 0:
        return f"({c.imag!r}*I)"
    return f"({c.real!r} + {c.imag!r}*I)"


def format_poly(p: Poly) -> str:
    if p.is_zero():
        return "0"
    names = [f"x{h + 1}" for h in range(p.l)]
    names += [f"w{k + 1}" for k in range(p.n)] + [f"cw{k + 1}" for k in range(p.n)]
    terms = []
    for mono, coeff in p.items():
        factors = [
            name if exp == 1 else f"{name}^{exp}" for name, exp in zip(names, mono) if exp
        ]
        terms.append("*".join([_format_coefficient(coeff), *factors]))
    return " + ".join(terms)


def print_model(model: ManifoldModel) -> str:
    weights = ", ".join(
        "inf" if m is INFINITE else str(m) for m in model.weights.weights
    )
    lines = [
        "[manifold]",
        f"l = {model.l}",
        f"n = {model.n}",
        f"blocks = {', '.join(str(b) for b in model.weights.blocks)}",
        f"weights = {weights}",
        "h =",
    ]
    lines.extend(f"    {format_poly(p)}" for p in model.h)
    return "\n".join(lines) + "\n"


def model_hash(model: ManifoldModel) -> str:
    return hashlib.sha256(print_model(model).encode("utf-8")).hexdigest()


# restriction and leading parts


def restrict_to_line(model: ManifoldModel, k: int) -> LineRestriction:
    """Keep only w_k (1-based); the other w variables are set to 0."""
    if not 1 <= k <= model.n:
        raise ParameterError(f"direction {k} out of range 1..{model.n}")
    l, n = model.nvars
    keep = k - 1
    restricted = []
    for p in model.h:
        terms = {}
        for mono, coeff in p.terms.items():
            b, c = mono[l : l + n], mono[l + n :]
            if any(b[j] or c[j] for j in range(n) if j != keep):
                continue
            terms[(*mono[:l], b[keep], c[keep])] = coeff
        restricted.append(RealPoly(terms, (l, 1), check=False))
    draft = ManifoldModel(l, 1, WeightVector.uniform(l), tuple(restricted))
    line_model = ManifoldModel(l, 1, weights_from_filtration(draft), draft.h)
    validate_model(line_model, infinite_blocks=False)
    try:
        validate_model(line_model)
    except ManifoldValidationError as e:
        logger.info("Restriction to w%s is not seminormal: %s", k, e.message)
        return LineRestriction(line_model, k, seminormal=False)
    return LineRestriction(line_model, k)


def lowest_weight_part(model: ModelLike, block: int) -> Tuple[RealPoly, ...]:
    m = as_model(model)
    weight = m.block_weight(block)
    if not is_finite(weight):
        raise InfiniteWeightError(f"block {block} has infinite weight")
    degree = int(weight)  # type: ignore[arg-type]
    return tuple(m.h[h].homogeneous_part(m.weights, degree) for h in m.block_range(block))


def homogeneous_weight(g: Poly, weights: WeightVector) -> int:
    degrees = {weights.monomial_degree(mono) for mono in g.terms}
    if len(degrees) != 1 or not all(is_finite(d) for d in degrees):
        raise NonHomogeneousError(f"polynomial is not weighted-homogeneous (degrees {degrees})")
    return int(degrees.pop())  # type: ignore[arg-type]


def _holomorphic_monomials(weights: WeightVector, l: int, bound: int) -> List[Tuple[int, ...]]:
    """Exponents (alpha over z, beta over w) with weighted degree <= bound.

    Only z variables of weight below ``bound`` enter; z_h of weight ``bound``
    restricts to x_h + i h_h and would reproduce the defining equation itself.
    """
    z_weights = [weights.weight_of(h) for h in range(l)]
    ranges = []
    for weight in z_weights:
        usable = is_finite(weight) and int(weight) < bound  # type: ignore[arg-type]
        top = bound // int(weight) if usable else 0  # type: ignore[arg-type]
        ranges.append(range(top + 1))
    out = []
    for alpha in itertools.product(*ranges):
        used = sum(a * int(wt) for a, wt in zip(alpha, z_weights) if a)  # type: ignore[arg-type]
        if used > bound:
            continue
        for beta in range(bound - used + 1):
            out.append((*alpha, beta))
    return out


def pluriharmonic_test(g: Poly, line: LineRestriction) -> PluriharmonicResult:
    """Decide whether g = Im F restricted to the line model, modulo weight > m.

    F ranges over holomorphic polynomials in w and the z variables of lower
    weight, so a non-harmonic leading part such as |w|² tests False.
    """
    model = line.model
    weights, (l, n) = model.weights, model.nvars
    if g.nvars != (l, n):
        raise DimensionMismatchError(f"g is over {g.nvars}, line model over {(l, n)}")
    if g.is_zero():
        return PluriharmonicResult(True, None, Poly.zero((l, n)))
    m = homogeneous_weight(g, weights)

    # z_h restricted to the line model: x_h + i h_h(x, w)
    assignments = {
        ("x", h): Jet(Poly.variable(("x", h), (l, n)) + model.h[h] * 1j, weights, m)
        for h in range(l)
    }
    basis = _holomorphic_monomials(weights, l, m)
    columns: List[Poly] = []
    for alpha_beta in basis:
        mono = (*alpha_beta, 0)
        restricted = jet_substitute(Jet(Poly({mono: 1.0}, (l, n)), weights, m), assignments).poly
        conj = restricted.conjugate()
        columns.append((restricted - conj) * (-0.5j))  # Im q
        columns.append((restricted + conj) * 0.5)  # Re q

    rows = sorted({mono for col in columns for mono in col.terms} | set(g.terms))
    a = np.zeros((2 * len(rows), len(columns)))
    b = np.zeros(2 * len(rows))
    for i, mono in enumerate(rows):
        for j, col in enumerate(columns):
            value = col.coefficient(mono)
            a[2 * i, j], a[2 * i + 1, j] = value.real, value.imag
        target = g.coefficient(mono)
        b[2 * i], b[2 * i + 1] = target.real, target.imag

    rank_a = numerical_rank(a)
    rank_ab = numerical_rank(np.column_stack([a, b]))
    if rank_ab > rank_a:
        return PluriharmonicResult(False, m, None)
    solution = np.linalg.lstsq(a, b, rcond=None)[0]
    witness_terms = {}
    for k, alpha_beta in enumerate(basis):
        coeff = complex(solution[2 * k], solution[2 * k + 1])
        if abs(coeff) > 1e-12:
            witness_terms[(*alpha_beta, 0)] = coeff
    return PluriharmonicResult(True, m, Poly(witness_terms, (l, n)))


# bundled models


def _w(k: int, nvars: Tuple[int, int]) -> Poly:
    return Poly.variable(("w", k), nvars)


def _abs2(k: int, nvars: Tuple[int, int]) -> RealPoly:
    w = _w(k, nvars)
    return RealPoly.from_poly(w * w.conjugate())


def levi_model() -> ManifoldModel:
    """y = |w|² in C²."""
    nvars = (1, 1)
    return ManifoldModel(1, 1, WeightVector((1,), (2,)), (_abs2(0, nvars),))


def flat_model() -> ManifoldModel:
    return ManifoldModel(1, 1, WeightVector((1,), (INFINITE,)), (RealPoly.zero((1, 1)),))


def mainexample_model() -> ManifoldModel:
    """y1 = |w1|² + |w2|², y2 = |w2|⁴ + x1|w1|² in C⁴."""
    nvars = (2, 2)
    x1 = RealPoly.from_poly(Poly.variable(("x", 0), nvars))
    h1 = _abs2(0, nvars) + _abs2(1, nvars)
    h2 = _abs2(1, nvars) ** 2 + x1 * _abs2(0, nvars)
    return ManifoldModel(
        2, 2, WeightVector((1, 1), (2, 4)), (RealPoly.from_poly(h1), RealPoly.from_poly(h2))
    )


def example_model(k: int, p: int, a: float) -> ManifoldModel:
    """y1 = |w|^k + a|w|^(k-p) Re w^p, y2 = |w|^k in C³."""
    if k % 2 or p % 2 or not 2 <= p <= k - 2:
        raise ParameterError(f"need even k, even p with 2 <= p <= k-2, got k={k}, p={p}")
    nvars = (2, 1)
    w = _w(0, nvars)
    modulus = _abs2(0, nvars)
    re_wp = RealPoly.from_poly((w**p + w.conjugate() ** p) * 0.5)
    h1 = modulus ** (k // 2) + modulus ** ((k - p) // 2) * re_wp * float(a)
    h2 = modulus ** (k // 2)
    return ManifoldModel(
        2, 1, WeightVector((2,), (k,)), (RealPoly.from_poly(h1), RealPoly.from_poly(h2))
    )
