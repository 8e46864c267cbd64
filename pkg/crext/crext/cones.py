"""Cones of extension directions in the normal space R^l.

A cone is kept as a list of generators (directions lying in its closure) plus,
when it is polyhedral, inward face normals. ``combine="all"`` means the open
intersection {y : ⟨n_i, y⟩ > 0 for all i}; ``combine="any"`` the union of the
open half-spaces, which is how the planar cones {y₁ > −c|y₂|} with c > 0 are
written. An empty normal list with ``combine="all"`` is the whole space, and
``normals=None`` leaves only the generators (a ray, or a degenerate hull).
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog, nnls
from scipy.spatial import ConvexHull, QhullError

from crext.config import config
from crext.custom_exceptions import DimensionMismatchError, ParameterError
from crext.manifold import ModelLike, as_model
from crext.polyalg import is_finite, numerical_rank
from crext.sector import Thresholds, thresholds

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ConeDescription:
    generators: np.ndarray
    normals: Optional[np.ndarray] = None
    combine: str = "all"
    margin: float = 0.0

    def __post_init__(self) -> None:
        gens = np.atleast_2d(np.asarray(self.generators, dtype=float))
        object.__setattr__(self, "generators", gens)
        if gens.size == 0:
            raise ParameterError("a cone needs at least one generator")
        if np.any(np.linalg.norm(gens, axis=1) == 0):
            raise ParameterError("zero vector among cone generators")
        if self.combine not in ("all", "any"):
            raise ParameterError(f"unknown combine mode {self.combine!r}")
        if self.normals is not None:
            normals = np.asarray(self.normals, dtype=float).reshape(-1, gens.shape[1])
            object.__setattr__(self, "normals", normals)
            for g in gens:
                if not self.closure_contains(g):
                    raise ParameterError(f"generator {g} violates the face inequalities")

    @property
    def dim(self) -> int:
        return int(self.generators.shape[1])

    @property
    def is_convex(self) -> bool:
        return self.combine == "all" or self.normals is None or len(self.normals) <= 1

    def closure_contains(self, y: Sequence[float], tol: Optional[float] = None) -> bool:
        tol = config.lp_tol if tol is None else tol
        vec = np.asarray(y, dtype=float)
        scale = max(float(np.linalg.norm(vec)), 1e-300)
        if self.normals is None:
            return _in_hull(self.generators, vec, tol)
        if len(self.normals) == 0:
            return True
        values = self.normals @ vec / scale
        if self.combine == "all":
            return bool(np.all(values >= -tol))
        return bool(np.any(values >= -tol))

    def contains(self, y: Sequence[float], tol: Optional[float] = None) -> bool:
        """Membership in the open cone (the relative interior for generator-only cones)."""
        tol = config.lp_tol if tol is None else tol
        vec = np.asarray(y, dtype=float)
        if not np.any(vec):
            return False
        if self.normals is None:
            return _in_hull(self.generators, vec, tol)
        if len(self.normals) == 0:
            return True
        values = self.normals @ vec / float(np.linalg.norm(vec))
        if self.combine == "all":
            return bool(np.all(values > tol))
        return bool(np.any(values > tol))


def _in_hull(generators: np.ndarray, y: np.ndarray, tol: float) -> bool:
    """y in the closed conic hull of the rows of ``generators``."""
    scale = float(np.linalg.norm(y))
    if scale == 0:
        return True
    _, residual = nnls(generators.T, y / scale)
    return bool(residual <= max(tol, 1e-9))


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _rotate(v: np.ndarray, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


def _planar_hull(dirs: np.ndarray, eps: float) -> ConeDescription:
    angles = np.sort(np.mod(np.arctan2(dirs[:, 1], dirs[:, 0]), 2 * np.pi))
    gaps = np.diff(np.concatenate([angles, [angles[0] + 2 * np.pi]]))
    i = int(np.argmax(gaps))
    widest = float(gaps[i])
    tol = 1e-12
    if widest < np.pi - tol:
        return ConeDescription(dirs, np.zeros((0, 2)), "all", eps)
    start = float(angles[(i + 1) % len(angles)])
    width = 2 * np.pi - widest
    if width <= 2 * eps + tol:
        # a ray, or shrunk down to its bisector
        mid = start + width / 2
        return ConeDescription(np.array([[math.cos(mid), math.sin(mid)]]), None, "all", eps)
    start, width = start + eps, width - 2 * eps
    first = np.array([math.cos(start), math.sin(start)])
    last = np.array([math.cos(start + width), math.sin(start + width)])
    if abs(width - np.pi) <= tol:
        normals = np.array([_rotate(first, np.pi / 2)])
        middle = _rotate(first, np.pi / 2)
        return ConeDescription(np.array([first, middle, last]), normals, "all", eps)
    normals = np.array([_rotate(first, np.pi / 2), _rotate(last, -np.pi / 2)])
    return ConeDescription(np.array([first, last]), normals, "all", eps)


def _shrink_towards_center(dirs: np.ndarray, eps: float) -> np.ndarray:
    center = dirs.sum(axis=0)
    if eps == 0 or np.linalg.norm(center) == 0:
        return dirs
    center = _unit(center)
    out = []
    for d in dirs:
        angle = math.acos(float(np.clip(d @ center, -1.0, 1.0)))
        step = min(eps, angle)
        if angle == 0:
            out.append(d)
            continue
        ortho = _unit(center - (d @ center) * d)
        out.append(math.cos(step) * d + math.sin(step) * ortho)
    return np.array(out)


def _spatial_hull(dirs: np.ndarray, eps: float) -> ConeDescription:
    dirs = _shrink_towards_center(dirs, eps)
    l = dirs.shape[1]
    if numerical_rank(dirs) < l:
        return ConeDescription(dirs, None, "all", eps)
    try:
        hull = ConvexHull(np.vstack([np.zeros(l), dirs]))
    except QhullError:
        return ConeDescription(dirs, None, "all", eps)
    normals = []
    for equation in hull.equations:
        normal, offset = equation[:l], equation[l]
        if abs(offset) <= 1e-10:
            normals.append(-normal)
    if not normals:
        return ConeDescription(dirs, np.zeros((0, l)), "all", eps)
    unique = np.unique(np.round(np.array(normals), 12), axis=0)
    return ConeDescription(dirs, unique, "all", eps)


def collect_directions(dirs: Sequence[Sequence[float]], eps: float = 0.0) -> ConeDescription:
    """Convex conic hull of the directions, every face tightened by the angle ``eps``."""
    if len(dirs) == 0:
        raise ParameterError("collect_directions needs at least one direction")
    arr = np.array([np.asarray(d, dtype=float) for d in dirs])
    norms = np.linalg.norm(arr, axis=1)
    if np.any(norms == 0):
        raise ParameterError("zero vector among the collected directions")
    if eps < 0:
        raise ParameterError("eps must be nonnegative")
    arr = arr / norms[:, None]
    l = arr.shape[1]
    if l == 1:
        signs = set(np.sign(arr[:, 0]).astype(int))
        if len(signs) == 2:
            return ConeDescription(np.array([[1.0], [-1.0]]), np.zeros((0, 1)), "all", eps)
        sign = float(signs.pop())
        return ConeDescription(np.array([[sign]]), np.array([[sign]]), "all", eps)
    if l == 2:
        return _planar_hull(arr, eps)
    return _spatial_hull(arr, eps)


def cone_dimension(c: ConeDescription) -> int:
    return numerical_rank(c.generators)


def abs_cone(c: float) -> ConeDescription:
    """{y : y₁ > −c|y₂|} in the plane."""
    if c > 0:
        normals = np.array([[1.0, c], [1.0, -c]])
        gens = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, -1.0], [-c, 1.0], [-c, -1.0]])
        return ConeDescription(gens, normals, "any")
    if c == 0:
        gens = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
        return ConeDescription(gens, np.array([[1.0, 0.0]]), "all")
    k = -c
    normals = np.array([[1.0, -k], [1.0, k]]) / math.hypot(1.0, k)
    gens = np.array([[k, 1.0], [k, -1.0]])
    return ConeDescription(gens, normals, "all")


@dataclass(frozen=True, eq=False)
class HalfspaceCones:
    limits: Thresholds
    a: float
    a1: float
    a2: float
    bp: ConeDescription
    sector: ConeDescription

    def to_json(self) -> Dict[str, object]:
        return {
            "a": self.a,
            "a1": self.a1,
            "a2": self.a2,
            "bp": cone_to_json(self.bp),
            "sector": cone_to_json(self.sector),
            "bp_in_sector": cone_contains(self.sector, self.bp),
            "sector_in_bp": cone_contains(self.bp, self.sector),
        }


def halfspace_cones(k: int, p: int, a: float) -> HalfspaceCones:
    """Cones {y₁ > −|y₂|(a_i − 1)}, i = 1 from the bracket direction, i = 2 from sectors."""
    if a <= 0:
        raise ParameterError(f"coefficient a = {a} must be positive")
    limits = thresholds(k, p)
    a1 = a / limits.bp_coef
    a2 = a / limits.sector_coef
    return HalfspaceCones(limits, a, a1, a2, abs_cone(a1 - 1), abs_cone(a2 - 1))


def _pieces(cone: ConeDescription) -> List[Tuple[str, np.ndarray]]:
    if cone.is_convex:
        return [("hull", cone.generators)]
    assert cone.normals is not None
    return [("halfspace", normal) for normal in cone.normals]


def _escape_lp(kind: str, piece: np.ndarray, normals: np.ndarray) -> float:
    """max t with ⟨n_i, y⟩ + t <= 0 for all given normals and y in the piece."""
    l = normals.shape[1]
    if kind == "hull":
        m = piece.shape[0]
        # variables (λ_1..λ_m, t), y = Σ λ_j g_j
        c = np.zeros(m + 1)
        c[-1] = -1.0
        a_ub = np.hstack([normals @ piece.T, np.ones((len(normals), 1))])
        b_ub = np.zeros(len(normals))
        a_eq = np.concatenate([np.ones(m), [0.0]]).reshape(1, -1)
        bounds = [(0, None)] * m + [(None, 1.0)]
        res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0], bounds=bounds, method="highs")
    else:
        # variables (y_1..y_l, t) with ⟨m, y⟩ >= 0 and |y_h| <= 1
        c = np.zeros(l + 1)
        c[-1] = -1.0
        a_ub = np.vstack(
            [
                np.hstack([normals, np.ones((len(normals), 1))]),
                np.concatenate([-piece, [0.0]]).reshape(1, -1),
            ]
        )
        b_ub = np.zeros(len(normals) + 1)
        bounds = [(-1.0, 1.0)] * l + [(None, 1.0)]
        res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status == 2:
        return -math.inf
    if res.status != 0:
        raise ParameterError(f"containment linear program failed: {res.message}")
    return float(-res.fun)


def cone_contains(
    outer: ConeDescription, inner: ConeDescription, tol: Optional[float] = None
) -> bool:
    """Closure of ``inner`` inside the closure of ``outer``."""
    if outer.dim != inner.dim:
        raise DimensionMismatchError(f"cones in R^{outer.dim} and R^{inner.dim}")
    tol = config.lp_tol if tol is None else tol
    if outer.normals is None:
        return all(_in_hull(outer.generators, g, tol) for g in inner.generators)
    if len(outer.normals) == 0:
        return True
    for kind, piece in _pieces(inner):
        if outer.combine == "all":
            for normal in outer.normals:
                if _escape_lp(kind, piece, normal.reshape(1, -1)) > tol:
                    return False
        elif _escape_lp(kind, piece, outer.normals) > tol:
            return False
    return True


def cone_opens_below(cone: ConeDescription, tol: Optional[float] = None) -> bool:
    """Whether the open cone holds a direction with y₁ < 0."""
    tol = config.lp_tol if tol is None else tol
    l = cone.dim
    if cone.normals is None:
        return bool(np.any(cone.generators[:, 0] < -tol))
    if len(cone.normals) == 0:
        return True
    groups = [cone.normals] if cone.combine == "all" else [n.reshape(1, -1) for n in cone.normals]
    for normals in groups:
        # max t with y₁ <= −t, ⟨n_i, y⟩ >= t, |y_h| <= 1
        c = np.zeros(l + 1)
        c[-1] = -1.0
        first = np.zeros(l + 1)
        first[0], first[-1] = 1.0, 1.0
        a_ub = np.vstack([first, np.hstack([-normals, np.ones((len(normals), 1))])])
        bounds = [(-1.0, 1.0)] * l + [(None, 1.0)]
        res = linprog(c, A_ub=a_ub, b_ub=np.zeros(len(a_ub)), bounds=bounds, method="highs")
        if res.status == 0 and -res.fun > tol:
            return True
    return False


def cone_to_json(cone: ConeDescription) -> Dict[str, object]:
    return {
        "generators": cone.generators.tolist(),
        "inequalities": None if cone.normals is None else cone.normals.tolist(),
        "combine": cone.combine,
        "margin": cone.margin,
        "dimension": cone_dimension(cone),
    }


def ladder_directions(
    m: ModelLike,
    direction: int = 1,
    xis: Optional[Sequence[Sequence[float]]] = None,
    etas: Sequence[float] = (0.02, 0.3),
    alpha: Optional[float] = None,
) -> List[np.ndarray]:
    """Directions v'_o = ∂_r v(1) of discs at separated η scales, one per (ξ, η).

    A covector whose sector condition fails is skipped; a disc whose pairing
    ⟨ξ, v'_o⟩ is not negative is dropped.
    """
    from crext import bishop, sector

    line = bishop._as_line(as_model(m), direction)
    xis = xis if xis is not None else sector.xi_samples(line.l)
    out = []
    for xi in xis:
        xi_arr = np.asarray(xi, dtype=float)
        block = bishop._leading_block(line, xi_arr)
        weight = line.weights.weights[block - 1]
        if not is_finite(weight):
            continue
        order = int(weight)  # type: ignore[arg-type]
        try:
            report = sector.sector_condition(line, block, xi_arr)
        except ParameterError:
            continue
        if not report.holds or report.best_sector is None:
            continue
        phase = report.best_sector.center if report.best_sector.width < 2 * np.pi else np.pi / 2
        a = alpha if alpha is not None else bishop.default_alpha(order)
        for eta in etas:
            component = (
                bishop.PolynomialComponent(float(eta), phase)
                if a == 1
                else bishop.SingularComponent(a, float(eta), phase)
            )
            disc = bishop.solve_bishop(line, component)
            v_prime = bishop.radial_derivative_at_one(disc)
            if float(xi_arr @ v_prime) < 0:
                out.append(v_prime)
    logger.info("Collected %s extension directions along w%s", len(out), direction)
    return out
