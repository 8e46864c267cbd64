"""Sign analysis of homogeneous polynomials on the circle of one w-direction.

A polynomial in (w, w̄) is read on |w| = 1 as a real trigonometric polynomial
g(θ) = a0 + Σ a_d cos dθ + b_d sin dθ. Arcs of constant sign are located by
dense sampling and refined with Brent's method.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from crext.config import config
from crext.custom_exceptions import (
    DimensionMismatchError,
    InfiniteWeightError,
    InvariantViolationError,
    ParameterError,
    ZeroPolynomialError,
)
from crext.manifold import LineRestriction, ModelLike, restrict_to_line
from crext.polyalg import Poly, RealPoly, is_finite

logger = logging.getLogger(__name__)

TWO_PI = 2 * np.pi


@dataclass(frozen=True)
class TrigPoly:
    a0: float
    cos: Tuple[float, ...] = ()
    sin: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if len(self.cos) != len(self.sin):
            raise DimensionMismatchError("cosine and sine coefficient lists differ in length")

    @classmethod
    def from_coefficients(
        cls, a0: float, cos: Sequence[float] = (), sin: Sequence[float] = ()
    ) -> "TrigPoly":
        size = max(len(cos), len(sin))
        c = list(cos) + [0.0] * (size - len(cos))
        s = list(sin) + [0.0] * (size - len(sin))
        return cls(float(a0), tuple(float(v) for v in c), tuple(float(v) for v in s))

    @classmethod
    def cosine_family(cls, terms: Dict[int, float], a0: float = 0.0) -> "TrigPoly":
        """a0 + Σ terms[d] cos dθ."""
        size = max(terms, default=0)
        cos = [0.0] * size
        for d, value in terms.items():
            cos[d - 1] += value
        return cls.from_coefficients(a0, cos)

    @classmethod
    def from_poly(cls, p: Poly, direction: int = 1) -> "TrigPoly":
        """Restriction of a polynomial in (w_k, w̄_k) to |w_k| = 1."""
        l, n = p.nvars
        keep = direction - 1
        if not 0 <= keep < n:
            raise ParameterError(f"direction {direction} out of range 1..{n}")
        by_frequency: Dict[int, complex] = {}
        for mono, coeff in p.terms.items():
            others = [e for slot, e in enumerate(mono) if slot not in (l + keep, l + n + keep)]
            if any(others):
                raise ParameterError("polynomial involves variables other than w and its conjugate")
            d = mono[l + keep] - mono[l + n + keep]
            by_frequency[d] = by_frequency.get(d, 0j) + coeff
        top = max((abs(d) for d in by_frequency), default=0)
        cos = [0.0] * top
        sin = [0.0] * top
        for d in range(1, top + 1):
            c = by_frequency.get(d, 0j)
            cos[d - 1] = 2 * c.real
            sin[d - 1] = -2 * c.imag
        return cls.from_coefficients(by_frequency.get(0, 0j).real, cos, sin)

    @property
    def degree(self) -> int:
        for d in range(len(self.cos), 0, -1):
            if self.cos[d - 1] or self.sin[d - 1]:
                return d
        return 0

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(abs(v) <= tol for v in (self.a0, *self.cos, *self.sin))

    def __call__(self, theta: Union[float, np.ndarray]) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        out = np.full(theta.shape, self.a0)
        for d, (c, s) in enumerate(zip(self.cos, self.sin), start=1):
            if c:
                out = out + c * np.cos(d * theta)
            if s:
                out = out + s * np.sin(d * theta)
        return out

    def __neg__(self) -> "TrigPoly":
        return TrigPoly(-self.a0, tuple(-c for c in self.cos), tuple(-s for s in self.sin))

    def __add__(self, other: "TrigPoly") -> "TrigPoly":
        size = max(len(self.cos), len(other.cos))
        pad = lambda v: list(v) + [0.0] * (size - len(v))  # noqa: E731
        return TrigPoly.from_coefficients(
            self.a0 + other.a0,
            [a + b for a, b in zip(pad(self.cos), pad(other.cos))],
            [a + b for a, b in zip(pad(self.sin), pad(other.sin))],
        )

    def scaled(self, factor: float) -> "TrigPoly":
        return TrigPoly(
            self.a0 * factor,
            tuple(c * factor for c in self.cos),
            tuple(s * factor for s in self.sin),
        )

    def derivative(self) -> "TrigPoly":
        return TrigPoly(
            0.0,
            tuple(d * s for d, s in enumerate(self.sin, start=1)),
            tuple(-d * c for d, c in enumerate(self.cos, start=1)),
        )

    def to_json(self) -> Dict[str, object]:
        return {"a0": self.a0, "cos": list(self.cos), "sin": list(self.sin)}


@dataclass(frozen=True)
class Sector:
    center: float
    width: float

    def __post_init__(self) -> None:
        if not 0 < self.width <= TWO_PI + 1e-12:
            raise ParameterError(f"sector width {self.width} outside (0, 2π]")

    @classmethod
    def from_bounds(cls, start: float, end: float) -> "Sector":
        width = (end - start) % TWO_PI
        if width == 0:
            width = TWO_PI
        return cls((start + width / 2) % TWO_PI, width)

    @property
    def start(self) -> float:
        return (self.center - self.width / 2) % TWO_PI

    @property
    def end(self) -> float:
        return (self.center + self.width / 2) % TWO_PI

    def contains(self, theta: float) -> bool:
        return ((theta - self.start) % TWO_PI) <= self.width

    def to_json(self) -> Dict[str, float]:
        return {"center": self.center, "width": self.width}


def circle_restriction(
    p: Union[Poly, Sequence[Poly]], xi: Optional[Sequence[float]] = None, direction: int = 1
) -> TrigPoly:
    """g(θ) = ⟨ξ, P(e^{iθ})⟩ for P depending on (w_k, w̄_k) only."""
    polys = [p] if isinstance(p, Poly) else list(p)
    weights = np.ones(len(polys)) if xi is None else np.asarray(xi, dtype=float)
    if weights.shape != (len(polys),):
        raise DimensionMismatchError(f"xi has {weights.size} entries for {len(polys)} components")
    total = TrigPoly(0.0)
    for coeff, poly in zip(weights, polys):
        if coeff:
            total = total + TrigPoly.from_poly(poly, direction).scaled(float(coeff))
    return total


def _refine(g: TrigPoly, inside: float, outside: float, floor: float = 0.0) -> float:
    """Root of g between a sample inside an arc and the first sample past it.

    A sample with |g| <= floor is taken as the root itself.
    """
    f_in, f_out = float(g(inside)), float(g(outside))
    if abs(f_out) <= floor:
        return outside
    if abs(f_in) <= floor:
        return inside
    if f_in * f_out > 0:
        # both within rounding of the floor
        return outside if abs(f_out) < abs(f_in) else inside
    lo, hi = min(inside, outside), max(inside, outside)
    return float(brentq(lambda t: float(g(t)), lo, hi, xtol=config.root_xtol))


def _runs(mask: np.ndarray) -> List[Tuple[int, int]]:
    """Circular runs of True as (first, last) index pairs."""
    size = mask.size
    starts = [i for i in range(size) if mask[i] and not mask[i - 1]]
    runs = []
    for start in starts:
        end = start
        while mask[(end + 1) % size] and (end + 1) % size != start:
            end += 1
        runs.append((start, end % size))
    return runs


def positive_sectors(
    g: TrigPoly, strict: bool = True, samples: Optional[int] = None
) -> List[Sector]:
    """Maximal arcs where g > 0 (or g >= 0), sorted by start angle."""
    scale = max(abs(v) for v in (g.a0, *g.cos, *g.sin)) if not g.is_zero() else 0.0
    if scale == 0:
        raise ZeroPolynomialError("positive_sectors of the zero polynomial")
    samples = samples or config.sector_samples
    theta = TWO_PI * np.arange(samples) / samples
    values = g(theta)
    floor = 1e-12 * scale
    mask = values > floor if strict else values >= -floor
    if mask.all():
        return [Sector(0.0, TWO_PI)]
    if not mask.any():
        return []
    step = TWO_PI / samples
    sectors = []
    for first, last in _runs(mask):
        left_out = theta[first] - step
        right_out = theta[last] + step
        start = _refine(g, theta[first], left_out, floor)
        end = _refine(g, theta[last], right_out, floor)
        width = (end - start) % TWO_PI
        if width > 0:
            sectors.append(Sector.from_bounds(start, end))
    return sorted(sectors, key=lambda s: s.start)


def negative_sectors(g: TrigPoly, strict: bool = True) -> List[Sector]:
    return positive_sectors(-g, strict)


def sign_table(g: TrigPoly) -> List[Tuple[Sector, int]]:
    rows = [(s, 1) for s in positive_sectors(g)] + [(s, -1) for s in negative_sectors(g)]
    return sorted(rows, key=lambda row: row[0].start)


def trig_roots(g: TrigPoly, samples: Optional[int] = None) -> List[float]:
    """Sign changes of g on [0, 2π), refined to the configured angular accuracy."""
    samples = samples or config.sector_samples
    theta = TWO_PI * np.arange(samples + 1) / samples
    values = g(theta)
    roots = []
    for k in range(samples):
        if values[k] == 0:
            roots.append(float(theta[k]))
        elif values[k] * values[k + 1] < 0:
            roots.append(_refine(g, theta[k], theta[k + 1]))
    return roots


def global_minimum(g: TrigPoly) -> Tuple[float, float]:
    """(argmin, min) from the critical points of g."""
    candidates = trig_roots(g.derivative()) if g.degree else [0.0]
    candidates = candidates or [0.0]
    values = g(np.array(candidates))
    k = int(np.argmin(values))
    return float(candidates[k]), float(values[k])


# sector condition


@dataclass(frozen=True)
class SectorReport:
    holds: bool
    mode: str
    block: int
    weight: int
    required_width: float
    best_sector: Optional[Sector]
    sectors: Tuple[Sector, ...]
    alternative_widths: Dict[str, Optional[float]]
    g: Optional[TrigPoly] = None
    c: Optional[float] = None

    def to_json(self) -> Dict[str, object]:
        return {
            "holds": self.holds,
            "mode": self.mode,
            "block": self.block,
            "weight": self.weight,
            "required_width": self.required_width,
            "best_sector": self.best_sector.to_json() if self.best_sector else None,
            "sectors": [s.to_json() for s in self.sectors],
            "alternative_widths": self.alternative_widths,
            "g": self.g.to_json() if self.g else None,
            "c": self.c,
        }


def _line(m: ModelLike, direction: int) -> LineRestriction:
    if isinstance(m, LineRestriction):
        return m
    if m.n == 1:
        return LineRestriction(m, 1)
    return restrict_to_line(m, direction)


def pairing_polynomial(line: LineRestriction, xi: np.ndarray) -> RealPoly:
    out = RealPoly.zero(line.nvars)
    for h, coeff in enumerate(xi):
        if coeff:
            out = out + line.h[h] * float(coeff)
    return RealPoly.from_poly(out)


def sector_condition(
    m: ModelLike,
    block: int,
    xi: Sequence[float],
    c: Optional[float] = None,
    direction: int = 1,
    mode: Optional[str] = None,
    required_width: Optional[float] = None,
) -> SectorReport:
    """Sign of ⟨ξ, h⟩ on a sector of the w_k-circle wider than π/m_j.

    ``mode="leading"`` checks ⟨ξ, P_{I_j}⟩ >= 0 for a semirigid leading part;
    ``mode="constrained"`` checks ⟨ξ, h⟩ > 0 under |x_{I_i}| < c|w|^{m_i}
    at the radii 2^-s, s = 0..20. Without ``mode`` the leading check is used
    whenever the leading part is free of x.
    """
    line = _line(m, direction)
    model = line.model
    xi_arr = np.asarray(xi, dtype=float)
    if xi_arr.shape != (line.l,):
        raise DimensionMismatchError(f"xi has shape {xi_arr.shape}, expected ({line.l},)")
    if not np.any(xi_arr):
        raise ParameterError("covector xi must be nonzero")
    rng = model.block_range(block)
    if np.any(xi_arr[: rng.start]):
        raise ParameterError(f"xi must be supported on blocks {block}.. of the model")
    weight = model.block_weight(block)
    if not is_finite(weight):
        raise InfiniteWeightError(f"block {block} has infinite weight")
    m_j = int(weight)  # type: ignore[arg-type]
    required = required_width if required_width is not None else np.pi / m_j
    alternatives = {
        "pi/m": np.pi / m_j,
        "pi/(m-1)": np.pi / (m_j - 1) if m_j > 1 else None,
        "pi/(m-2)": np.pi / (m_j - 2) if m_j > 2 else None,
    }

    pairing = pairing_polynomial(line, xi_arr)
    leading = pairing.homogeneous_part(model.weights, m_j)
    semirigid = not any(any(mono[: line.l]) for mono in leading.terms)
    if mode is None:
        mode = "leading" if semirigid else "constrained"
    if mode == "leading":
        if not semirigid:
            raise ParameterError("leading part depends on x; use the constrained mode")
        if leading.is_zero():
            return SectorReport(False, mode, block, m_j, required, None, (), alternatives)
        g = TrigPoly.from_poly(leading, 1)
        arcs = tuple(positive_sectors(g, strict=False))
        best = max(arcs, key=lambda s: s.width) if arcs else None
        holds = best is not None and best.width > required
        return SectorReport(holds, mode, block, m_j, required, best, arcs, alternatives, g)
    if mode != "constrained":
        raise ParameterError(f"unknown sector mode {mode!r}")

    c = c if c is not None else config.constraint_c
    if c <= 0:
        raise ParameterError(f"constraint constant c = {c} gives an empty box")
    arcs = tuple(_constrained_arcs(line, pairing, c))
    best = max(arcs, key=lambda s: s.width) if arcs else None
    holds = best is not None and best.width > required
    return SectorReport(holds, mode, block, m_j, required, best, arcs, alternatives, None, c)


def _constrained_arcs(line: LineRestriction, q: Poly, c: float) -> List[Sector]:
    """Arcs where the interval lower bound of q over the x-box stays positive at every radius."""
    l = line.l
    weights = line.weights
    by_x: Dict[Tuple[int, ...], Dict[Tuple[int, ...], complex]] = {}
    for mono, coeff in q.terms.items():
        by_x.setdefault(mono[:l], {})[(0,) * l + mono[l:]] = coeff
    samples = config.sector_samples
    theta = TWO_PI * np.arange(samples) / samples
    mask = np.ones(samples, dtype=bool)
    for s in range(21):
        rho = 2.0**-s
        w = rho * np.exp(1j * theta)
        lower = np.zeros(samples)
        for x_exp, terms in by_x.items():
            part = Poly(terms, line.nvars).evaluate(np.zeros((samples, l)), w.reshape(-1, 1)).real
            if not any(x_exp):
                lower += part
                continue
            bound = 1.0
            for h, e in enumerate(x_exp):
                if e:
                    weight = weights.weight_of(h)
                    finite = is_finite(weight)
                    radius = c * rho ** int(weight) if finite else 0.0  # type: ignore[arg-type]
                    bound *= radius**e
            if all(e % 2 == 0 for e in x_exp):
                lower += np.minimum(part * bound, 0.0)
            else:
                lower -= np.abs(part) * bound
        mask &= lower > 0
    if mask.all():
        return [Sector(0.0, TWO_PI)]
    step = TWO_PI / samples
    return [
        Sector.from_bounds(theta[first] - step / 2, theta[last] + step / 2)
        for first, last in _runs(mask)
    ]


# thresholds and barriers


@dataclass(frozen=True)
class Thresholds:
    k: int
    p: int
    q: int
    bp_coef: float
    sector_coef: float

    def to_json(self) -> Dict[str, float]:
        return {
            "k": self.k,
            "p": self.p,
            "q": self.q,
            "bp_coef": self.bp_coef,
            "sector_coef": self.sector_coef,
        }


def _check_kp(k: int, p: int) -> None:
    if k % 2 or p % 2 or k < 4 or not 2 <= p <= k - 2:
        raise ParameterError(f"need even k >= 4 and even p with 2 <= p <= k-2, got k={k}, p={p}")


def _threshold_values(k: int, p: int) -> Thresholds:
    _check_kp(k, p)
    q = (k - 2 - p) // 2
    half = k // 2
    bp = (
        math.factorial(p + q)
        * math.factorial(q)
        / (math.factorial(half - 1) * math.factorial(k - 1 - half))
    )
    sector = 1.0 / math.cos(p * math.pi / (2 * k))
    return Thresholds(k, p, q, bp, sector)


def thresholds(k: int, p: int) -> Thresholds:
    """Coefficient thresholds on a for extension by the bracket direction and by sectors."""
    values = _threshold_values(k, p)
    if not values.bp_coef > values.sector_coef:
        raise InvariantViolationError(
            f"bracket threshold {values.bp_coef} not above sector threshold {values.sector_coef}"
        )
    return values


@dataclass(frozen=True)
class Barrier:
    k: int
    p: int
    a: float
    b: float
    g1: TrigPoly
    argmin: float
    min_value: float

    def to_json(self) -> Dict[str, object]:
        return {
            "k": self.k,
            "p": self.p,
            "a": self.a,
            "b": self.b,
            "g1": self.g1.to_json(),
            "argmin": self.argmin,
            "min_value": self.min_value,
        }


def barrier_construct(k: int, p: int, a: Optional[float] = None) -> Barrier:
    """g1 = 1 − a cos pθ + b cos kθ, b = (p/k) tan(pπ/2k).

    g1 stays nonnegative for a up to the sector threshold.
    """
    if p == 0 or k % p:
        raise ParameterError(f"p = {p} does not divide k = {k}")
    limits = thresholds(k, p)
    a = limits.sector_coef if a is None else float(a)
    if a > limits.sector_coef * (1 + 1e-12):
        raise ParameterError(f"a = {a} above the sector threshold {limits.sector_coef}")
    b = (p / k) * math.tan(p * math.pi / (2 * k))
    g1 = TrigPoly.cosine_family({p: -a, k: b}, a0=1.0)
    argmin, min_value = global_minimum(g1)
    if min_value < -1e-10:
        raise InvariantViolationError(f"barrier minimum {min_value:.3e} is negative")
    return Barrier(k, p, a, b, g1, argmin, min_value)


@dataclass(frozen=True)
class IffScan:
    k: int
    p: int
    threshold: float
    rows: Tuple[Tuple[float, float, bool], ...]

    @property
    def consistent(self) -> bool:
        return all(exceeds == (a > self.threshold) for a, _, exceeds in self.rows)


def widest_negative_width(a: float, p: int) -> float:
    g = TrigPoly.cosine_family({p: a}, a0=1.0)
    arcs = negative_sectors(g)
    return max((s.width for s in arcs), default=0.0)


def sector_iff_scan(k: int, p: int, resolution: float = 1e-5, steps: int = 5) -> IffScan:
    """Widest arc of 1 + a cos pθ < 0 against π/k for a stepping across 1/cos(pπ/2k)."""
    _check_kp(k, p)
    threshold = 1.0 / math.cos(p * math.pi / (2 * k))
    rows = []
    for j in range(-steps, steps + 1):
        if j == 0:
            continue
        a = threshold + j * resolution
        width = widest_negative_width(a, p)
        rows.append((a, width, width > np.pi / k))
    return IffScan(k, p, threshold, tuple(rows))


def lemma_scan(
    k_values: Sequence[int] = tuple(range(4, 21, 2))
) -> List[Tuple[int, int, float, float, bool]]:
    """(k, p, bp_coef, sector_coef, bp > sector) for every valid even p."""
    rows = []
    for k in k_values:
        for p in range(2, k - 1, 2):
            values = _threshold_values(k, p)
            bp, sector = values.bp_coef, values.sector_coef
            rows.append((k, p, bp, sector, bp > sector))
    return rows


def xi_samples(l: int, count: int = 8, seed: int = 0) -> List[np.ndarray]:
    """Unit covectors: ±1 for l = 1, evenly spaced for l = 2, axes and random ones above."""
    if l < 1 or count < 1:
        raise ParameterError("xi_samples needs l >= 1 and count >= 1")
    if l == 1:
        return [np.array([1.0]), np.array([-1.0])]
    if l == 2:
        angles = TWO_PI * np.arange(count) / count
        out = [np.array([math.cos(t), math.sin(t)]) for t in angles]
        for v in out:
            v[np.abs(v) < 1e-12] = 0.0
        return out
    out = []
    for h in range(l):
        for sign in (1.0, -1.0):
            e = np.zeros(l)
            e[h] = sign
            out.append(e)
    rng = np.random.default_rng(seed)
    for _ in range(count):
        v = rng.normal(size=l)
        out.append(v / np.linalg.norm(v))
    return out


def write_g_csv(g: TrigPoly, path: str, samples: int = 1024) -> None:
    theta = TWO_PI * np.arange(samples) / samples
    data = np.column_stack([theta, g(theta)])
    np.savetxt(path, data, delimiter=",", header="theta,g", comments="# ")


def write_sector_csv(g: TrigPoly, path: str) -> None:
    rows = [(s.center, s.width, sign) for s, sign in sign_table(g)]
    data = np.array(rows, dtype=float).reshape(-1, 3)
    np.savetxt(path, data, delimiter=",", header="center,width,sign", comments="# ")
