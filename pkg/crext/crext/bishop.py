"""Analytic discs attached to y = h(x, w) by a spectral Bishop solver.

Boundary functions are sampled at θ_k = −π + 2πk/N. The disc with prescribed
CR component w(τ) and base point x solves u = −T₁ h(u + x, w), v = h(u + x, w),
so that (x + u) + iv extends holomorphically to the unit disc and u(1) = 0.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Protocol, Sequence, Tuple, Union

import numpy as np

from crext.config import config
from crext.custom_exceptions import (
    ConvergenceError,
    DimensionMismatchError,
    FitError,
    InvariantViolationError,
    NoTransversalGainError,
    ParameterError,
)
from crext.manifold import LineRestriction, ManifoldModel, ModelLike, as_model, restrict_to_line
from crext.polyalg import RealPoly, is_finite, numerical_rank

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CircleGrid:
    n: int

    def __post_init__(self) -> None:
        if self.n < 64 or self.n & (self.n - 1):
            raise ParameterError(f"grid size {self.n} must be a power of two >= 64")

    @cached_property
    def theta(self) -> np.ndarray:
        return -np.pi + 2 * np.pi * np.arange(self.n) / self.n

    @cached_property
    def tau(self) -> np.ndarray:
        return np.exp(1j * self.theta)

    @property
    def zero_index(self) -> int:
        return self.n // 2

    @property
    def spacing(self) -> float:
        return 2 * np.pi / self.n

    @cached_property
    def frequencies(self) -> np.ndarray:
        return np.fft.fftfreq(self.n, d=1.0 / self.n).astype(int)

    def refined(self) -> "CircleGrid":
        return CircleGrid(2 * self.n)


@dataclass(frozen=True, eq=False)
class BoundaryFn:
    """Samples of a function on the unit circle, shape (N,) or (N, d)."""

    grid: CircleGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.shape[0] != self.grid.n:
            raise DimensionMismatchError(
                f"{self.values.shape[0]} samples on a grid of {self.grid.n} points"
            )

    @cached_property
    def coefficients(self) -> np.ndarray:
        """Fourier coefficients ĉ_n in FFT order, for the grid starting at θ = −π."""
        raw = np.fft.fft(self.values, axis=0) / self.grid.n
        sign = np.where(self.grid.frequencies % 2 == 0, 1.0, -1.0)
        return raw * sign.reshape((-1,) + (1,) * (raw.ndim - 1))

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values) or bool(
            np.max(np.abs(self.values.imag), initial=0.0)
            <= 1e-12 * max(1.0, float(np.max(np.abs(self.values), initial=0.0)))
        )

    def at_one(self) -> np.ndarray:
        return self.values[self.grid.zero_index]

    def column(self, index: int) -> "BoundaryFn":
        return BoundaryFn(self.grid, self.values[:, index])

    def negative_frequency_residual(self) -> float:
        """Largest |ĉ_n| over n < 0, the Nyquist mode excluded."""
        freqs = self.grid.frequencies
        mask = (freqs < 0) & (freqs != -self.grid.n // 2)
        return float(np.max(np.abs(self.coefficients[mask]), initial=0.0))

    def without_mean_and_nyquist(self) -> "BoundaryFn":
        spectrum = np.fft.fft(self.values, axis=0)
        spectrum[0] = 0.0
        spectrum[self.grid.n // 2] = 0.0
        values = np.fft.ifft(spectrum, axis=0)
        return BoundaryFn(self.grid, values if np.iscomplexobj(self.values) else values.real)

    def tail_energy(self) -> float:
        """Share of spectral energy in the top quarter of the frequency range."""
        power = np.abs(self.coefficients) ** 2
        if power.ndim > 1:
            power = power.sum(axis=tuple(range(1, power.ndim)))
        total = float(power.sum())
        if total == 0:
            return 0.0
        top = np.abs(self.grid.frequencies) > 3 * self.grid.n // 8
        return float(power[top].sum()) / total

    def harmonic_extension(self, radii: Sequence[float], theta: float = 0.0) -> np.ndarray:
        """Σ ĉ_n r^|n| e^{inθ} at the points r e^{iθ}; one row per radius."""
        freqs = self.grid.frequencies
        coeffs = self.coefficients
        out = []
        for r in radii:
            kernel = (float(r) ** np.abs(freqs)) * np.exp(1j * freqs * theta)
            kernel[freqs == -self.grid.n // 2] = 0.0
            out.append(np.tensordot(kernel, coeffs, axes=(0, 0)))
        values = np.array(out)
        return values.real if not np.iscomplexobj(self.values) else values


def hilbert_transform(sigma: BoundaryFn) -> BoundaryFn:
    """T₁σ: σ + iT₁σ has no negative frequencies and T₁σ(τ=1) = 0."""
    if not sigma.is_real:
        raise ParameterError("hilbert_transform needs a real boundary function")
    values = np.real(sigma.values)
    grid = sigma.grid
    multiplier = -1j * np.sign(grid.frequencies).astype(complex)
    multiplier[grid.frequencies == -grid.n // 2] = 0.0
    spectrum = np.fft.fft(values, axis=0)
    transformed = np.fft.ifft(
        spectrum * multiplier.reshape((-1,) + (1,) * (values.ndim - 1)), axis=0
    ).real
    return BoundaryFn(grid, transformed - transformed[grid.zero_index])


# CR components


class CRComponent(Protocol):
    def sample(self, grid: CircleGrid) -> BoundaryFn: ...


def taylor_coefficients(alpha: float, n_terms: int) -> np.ndarray:
    """Coefficients c_0..c_N of (1−τ)^α = Σ c_j τ^j."""
    coeffs = np.empty(n_terms + 1)
    coeffs[0] = 1.0
    for j in range(1, n_terms + 1):
        coeffs[j] = coeffs[j - 1] * (j - 1 - alpha) / j
    return coeffs


def partial_sum(alpha: float, n_terms: int, tau: np.ndarray) -> np.ndarray:
    return np.polynomial.polynomial.polyval(tau, taylor_coefficients(alpha, n_terms))


def _check_component(alpha: float, eta: float) -> None:
    if not 0 < alpha < 1:
        raise ParameterError(f"alpha = {alpha} outside (0, 1)")
    if eta <= 0:
        raise ParameterError(f"eta = {eta} must be positive")


@dataclass(frozen=True)
class SingularComponent:
    """w(τ) = η e^{iφ} (1−τ)^α on the principal branch."""

    alpha: float
    eta: float
    phase: float = np.pi / 2

    def __post_init__(self) -> None:
        _check_component(self.alpha, self.eta)

    def sample(self, grid: CircleGrid) -> BoundaryFn:
        base = (1 - grid.tau) ** self.alpha
        base[grid.zero_index] = 0.0
        return BoundaryFn(grid, self.eta * np.exp(1j * self.phase) * base)


@dataclass(frozen=True)
class PartialSumComponent:
    """w(τ) = η e^{iφ} (S_N(τ) − S_N(1)) with S_N the Taylor partial sum of (1−τ)^α."""

    alpha: float
    eta: float
    n_terms: int
    phase: float = np.pi / 2

    def __post_init__(self) -> None:
        _check_component(self.alpha, self.eta)
        if self.n_terms < 1:
            raise ParameterError("partial sums need at least one term")

    def sample(self, grid: CircleGrid) -> BoundaryFn:
        coeffs = taylor_coefficients(self.alpha, self.n_terms)
        values = np.polynomial.polynomial.polyval(grid.tau, coeffs) - coeffs.sum()
        values[grid.zero_index] = 0.0
        return BoundaryFn(grid, self.eta * np.exp(1j * self.phase) * values)


@dataclass(frozen=True)
class PolynomialComponent:
    """w(τ) = η e^{iφ} (1−τ), the smooth member α = 1 of the family."""

    eta: float
    phase: float = np.pi / 2

    def __post_init__(self) -> None:
        if self.eta <= 0:
            raise ParameterError(f"eta = {self.eta} must be positive")

    def sample(self, grid: CircleGrid) -> BoundaryFn:
        return BoundaryFn(grid, self.eta * np.exp(1j * self.phase) * (1 - grid.tau))


def cr_component(
    kind: str,
    alpha: float,
    eta: float,
    grid: CircleGrid,
    n_terms: Optional[int] = None,
    phase: float = np.pi / 2,
) -> BoundaryFn:
    if kind == "singular":
        return SingularComponent(alpha, eta, phase).sample(grid)
    if kind == "partial_sum":
        if n_terms is None:
            raise ParameterError("partial_sum needs n_terms")
        return PartialSumComponent(alpha, eta, n_terms, phase).sample(grid)
    raise ParameterError(f"unknown CR component kind {kind!r}")


# Bishop's equation


@dataclass(frozen=True, eq=False)
class DiscSolution:
    x: np.ndarray
    u: BoundaryFn
    v: BoundaryFn
    w: BoundaryFn
    iterations: int
    residual: float
    manifold_residual: float
    holomorphy_residual: float
    tol: float
    damping: float = 1.0
    component: Optional[CRComponent] = field(default=None, repr=False)

    @property
    def grid(self) -> CircleGrid:
        return self.u.grid

    def metadata(self) -> Dict[str, Union[int, float]]:
        return {
            "N": self.grid.n,
            "tol": self.tol,
            "iterations": self.iterations,
            "residual": self.residual,
            "manifold_residual": self.manifold_residual,
            "holomorphy_residual": self.holomorphy_residual,
            "damping": self.damping,
        }


DiscInput = Union[BoundaryFn, CRComponent]


def _as_w_columns(w: BoundaryFn, n: int, direction: int) -> np.ndarray:
    values = np.asarray(w.values, dtype=complex)
    if values.ndim == 1:
        if not 1 <= direction <= n:
            raise ParameterError(f"direction {direction} out of range 1..{n}")
        out = np.zeros((w.grid.n, n), dtype=complex)
        out[:, direction - 1] = values
        return out
    if values.shape[1] != n:
        raise DimensionMismatchError(
            f"CR component has {values.shape[1]} columns, model has n = {n}"
        )
    return values


def solve_bishop(
    m: ModelLike,
    w: DiscInput,
    x: Optional[Sequence[float]] = None,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    warm_start: Optional[DiscSolution] = None,
    damping: float = 1.0,
    grid: Optional[CircleGrid] = None,
    direction: int = 1,
    w_offset: Optional[Sequence[complex]] = None,
) -> DiscSolution:
    """Picard iteration u ← u + λ(−T₁h(u + x, w) − u), λ halved when the update grows.

    A CR component is sampled on ``grid`` and the grid is doubled while the
    spectral tail of v stays above the configured share. ``w_offset`` adds a
    constant vector to the CR component (perturbation of the base point).
    """
    model = as_model(m)
    l, n = model.nvars
    tol = tol if tol is not None else config.picard_tol
    max_iter = max_iter if max_iter is not None else config.max_iter
    if not 0 < damping <= 1:
        raise ParameterError(f"damping {damping} outside (0, 1]")
    base = np.zeros(l) if x is None else np.asarray(x, dtype=float)
    if base.shape != (l,):
        raise DimensionMismatchError(f"base point has shape {base.shape}, expected ({l},)")

    component: Optional[CRComponent] = None
    if isinstance(w, BoundaryFn):
        boundary = w
    else:
        component = w
        if grid is None:
            grid = warm_start.grid if warm_start is not None else CircleGrid(config.grid_size)
        boundary = component.sample(grid)
    grid = boundary.grid
    w_values = _as_w_columns(boundary, n, direction)
    if w_offset is not None:
        w_values = w_values + np.asarray(w_offset, dtype=complex).reshape(1, n)

    if warm_start is not None and warm_start.grid == grid:
        u = np.array(warm_start.u.values, dtype=float)
    else:
        u = np.zeros((grid.n, l))
    lam = damping
    previous = math.inf
    contraction: Optional[float] = None
    change = math.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        target = -hilbert_transform(BoundaryFn(grid, model.evaluate(u + base, w_values))).values
        step = lam * (target - u)
        change = float(np.max(np.abs(step), initial=0.0))
        if not np.isfinite(change):
            logger.error("Bishop iteration diverged at step %s", iterations)
            raise ConvergenceError(
                "Bishop iteration produced non-finite values", change, contraction
            )
        if previous < math.inf and previous > 0:
            contraction = change / previous
        if iterations > 2 and change > previous:
            lam /= 2
            logger.warning(
                "Bishop update grew (%.3e > %.3e), damping now %s", change, previous, lam
            )
            if lam < 1.0 / 64:
                logger.error("Bishop iteration does not contract at damping %s", lam)
                raise ConvergenceError("Bishop iteration does not contract", change, contraction)
            previous = change
            continue
        u = u + step
        previous = change
        if change <= tol:
            break
    else:
        logger.error("Bishop iteration stopped after %s steps, change %.3e", max_iter, change)
        raise ConvergenceError(
            f"no convergence within {max_iter} iterations", change, contraction
        )

    v = model.evaluate(u + base, w_values)
    u_fn = BoundaryFn(grid, u)
    v_fn = BoundaryFn(grid, v)
    # T₁u = v − mean v on every frequency but the Nyquist mode
    mismatch = BoundaryFn(grid, hilbert_transform(u_fn).values - v).without_mean_and_nyquist()
    manifold_residual = float(np.max(np.abs(mismatch.values), initial=0.0))
    holomorphy_residual = BoundaryFn(grid, u + 1j * v).negative_frequency_residual()
    solution = DiscSolution(
        x=base,
        u=u_fn,
        v=v_fn,
        w=BoundaryFn(grid, w_values),
        iterations=iterations,
        residual=change,
        manifold_residual=manifold_residual,
        holomorphy_residual=holomorphy_residual,
        tol=tol,
        damping=lam,
        component=component,
    )

    tail = v_fn.tail_energy()
    if tail > config.spectral_tail:
        if component is not None and 2 * grid.n <= config.max_grid_size:
            logger.info("Spectral tail %.2e on N=%s, refining the grid", tail, grid.n)
            return solve_bishop(
                model,
                component,
                base,
                tol,
                max_iter,
                None,
                damping,
                grid.refined(),
                direction,
                w_offset,
            )
        logger.warning(
            "Spectral tail %.2e on N=%s exceeds %.1e", tail, grid.n, config.spectral_tail
        )

    _check_disc(solution)
    logger.info(
        "Bishop solve converged on N=%s in %s iterations (residual %.2e)",
        grid.n,
        iterations,
        change,
    )
    return solution


def _check_disc(d: DiscSolution) -> None:
    scale = max(1.0, float(np.max(np.abs(d.v.values), initial=0.0)))
    if d.manifold_residual > config.manifold_tol * scale:
        raise InvariantViolationError(
            f"boundary-on-manifold residual {d.manifold_residual:.3e}"
            f" above {config.manifold_tol:.1e}"
        )
    if d.holomorphy_residual > config.holomorphy_tol * scale:
        raise InvariantViolationError(
            f"negative-frequency residual {d.holomorphy_residual:.3e}"
            f" above {config.holomorphy_tol:.1e}"
        )
    anchor = float(np.max(np.abs(d.u.at_one()), initial=0.0))
    if anchor > 1e-12 * scale:
        raise InvariantViolationError(
            f"u(1) = {anchor:.3e}, disc is not anchored at the base point"
        )


def radial_derivative_at_one(d: DiscSolution) -> np.ndarray:
    """∂_r v at τ = 1 for the harmonic extension: Σ |n| v̂_n."""
    freqs = d.grid.frequencies
    weights = np.abs(freqs).astype(float)
    weights[freqs == -d.grid.n // 2] = 0.0
    return np.tensordot(weights, d.v.coefficients, axes=(0, 0)).real


def radial_extension(d: DiscSolution, radii: Sequence[float]) -> np.ndarray:
    """Points of the disc at τ = r in real coordinates (x, y, Re w, Im w)."""
    z_real = d.u.harmonic_extension(radii) + d.x
    z_imag = d.v.harmonic_extension(radii)
    freqs = d.grid.frequencies
    w_coeffs = d.w.coefficients
    rows = []
    for r in radii:
        kernel = np.where(freqs >= 0, float(r) ** np.abs(freqs), 0.0)
        rows.append(np.tensordot(kernel, w_coeffs, axes=(0, 0)))
    w_ext = np.array(rows)
    return np.hstack([z_real, z_imag, w_ext.real, w_ext.imag])


def deformation_constant(
    m: ModelLike,
    base: DiscSolution,
    steps: Sequence[float] = (1e-4, 1e-3),
) -> float:
    """Largest sup|u' − u| / |δ| over perturbations δ of x and of the constant w."""
    model = as_model(m)
    l, n = model.nvars
    if base.component is None:
        raise ParameterError("deformation_constant needs a disc solved from a CR component")
    ratios = []
    for step in steps:
        for axis in range(l + 2 * n):
            x, offset = _perturbation(l, n, axis, step)
            moved = solve_bishop(
                model, base.component, base.x + x, base.tol, warm_start=base, w_offset=offset
            )
            ratios.append(float(np.max(np.abs(moved.u.values - base.u.values))) / step)
    return max(ratios)


def _perturbation(l: int, n: int, axis: int, step: float) -> Tuple[np.ndarray, np.ndarray]:
    x = np.zeros(l)
    offset = np.zeros(n, dtype=complex)
    if axis < n:
        offset[axis] = step
    elif axis < 2 * n:
        offset[axis - n] = 1j * step
    else:
        x[axis - 2 * n] = step
    return x, offset


# Hopf lemma scan


@dataclass(frozen=True, eq=False)
class HopfResult:
    order: int
    alpha: float
    phase: float
    etas: np.ndarray
    pairings: np.ndarray
    coefficient: float
    exponent: Optional[float]
    direction: np.ndarray
    sign_ok: bool
    fit_residual: float
    feedback: Dict[str, List[float]]
    discs: List[DiscSolution] = field(repr=False, default_factory=list)

    @property
    def eta_derivative(self) -> float:
        """∂_η^m ⟨ξ, ∂_r v(1)⟩ at η = 0."""
        return self.coefficient * math.factorial(self.order)

    def to_json(self) -> Dict[str, object]:
        return {
            "order": self.order,
            "alpha": self.alpha,
            "phase": self.phase,
            "etas": [float(e) for e in self.etas],
            "pairings": [float(s) for s in self.pairings],
            "coefficient": self.coefficient,
            "eta_derivative": self.eta_derivative,
            "exponent": self.exponent,
            "direction": [float(c) for c in self.direction],
            "sign_ok": self.sign_ok,
            "fit_residual": self.fit_residual,
            "feedback": self.feedback,
        }


def default_alpha(order: int) -> float:
    """Midpoint of the window 1/m < α < 1/(m−1)."""
    if order < 2:
        raise ParameterError(f"order {order} below 2")
    return 0.5 * (1.0 / order + 1.0 / (order - 1))


def _as_line(m: ModelLike, direction: int) -> LineRestriction:
    if isinstance(m, LineRestriction):
        return m
    if m.n == 1:
        return LineRestriction(m, 1)
    return restrict_to_line(m, direction)


def _leading_block(line: LineRestriction, xi: np.ndarray) -> int:
    for block, rng in enumerate(line.weights.ranges(), start=1):
        if np.any(xi[rng.start : rng.stop]):
            return block
    raise ParameterError("covector xi must be nonzero")


def _auto_phase(line: LineRestriction, xi: np.ndarray, order: int) -> float:
    from crext import sector

    l = line.l
    pairing = RealPoly.zero(line.nvars)
    for h, coeff in enumerate(xi):
        if coeff:
            pairing = pairing + line.h[h] * float(coeff)
    leading = {
        mono: c
        for mono, c in pairing.terms.items()
        if not any(mono[:l]) and line.weights.monomial_degree(mono) == order
    }
    if not leading:
        return np.pi / 2
    g = sector.TrigPoly.from_poly(RealPoly(leading, line.nvars, check=False))
    arcs = sector.positive_sectors(g, strict=True)
    if not arcs or arcs[0].width >= 2 * np.pi - 1e-12:
        return np.pi / 2
    return max(arcs, key=lambda s: s.width).center


def hopf_scan(
    m: ModelLike,
    xi: Sequence[float],
    alpha: Optional[float] = None,
    eta_grid: Optional[Sequence[float]] = None,
    order: Optional[int] = None,
    direction: int = 1,
    phase: Optional[float] = None,
    n_terms: Optional[int] = None,
    grid: Optional[CircleGrid] = None,
    fit_tol: float = 0.05,
    tol: Optional[float] = None,
) -> HopfResult:
    """Fit ⟨ξ, ∂_r v(1)⟩(η) ≈ c η^m over a disc family; the Hopf sign is that of c."""
    line = _as_line(m, direction)
    xi_arr = np.asarray(xi, dtype=float)
    if xi_arr.shape != (line.l,):
        raise DimensionMismatchError(f"xi has shape {xi_arr.shape}, expected ({line.l},)")
    block = _leading_block(line, xi_arr)
    if order is None:
        weight = line.weights.weights[block - 1]
        if is_finite(weight):
            order = int(weight)  # type: ignore[arg-type]
        else:
            logger.warning("Block %s has infinite weight, fitting against eta^2", block)
            order = 2
    alpha = alpha if alpha is not None else default_alpha(order)
    if not 0 < alpha <= 1:
        raise ParameterError(f"alpha = {alpha} outside (0, 1]")
    etas = np.asarray(
        eta_grid if eta_grid is not None else np.linspace(0.02, 0.1, order + 2), dtype=float
    )
    if etas.size < order + 2 or np.any(etas <= 0):
        raise ParameterError(
            f"eta grid needs at least {order + 2} positive values to fit eta^{order}"
        )
    phase = phase if phase is not None else _auto_phase(line, xi_arr, order)

    discs = []
    pairings = []
    for eta in etas:
        component: CRComponent
        if alpha == 1:
            component = PolynomialComponent(float(eta), phase)
        elif n_terms is not None:
            component = PartialSumComponent(alpha, float(eta), n_terms, phase)
        else:
            component = SingularComponent(alpha, float(eta), phase)
        disc = solve_bishop(line, component, tol=tol, grid=grid)
        discs.append(disc)
        pairings.append(float(xi_arr @ radial_derivative_at_one(disc)))
    s = np.array(pairings)

    powers = etas**order
    coefficient = float(s @ powers / (powers @ powers))
    norm = float(np.linalg.norm(s))
    fit_residual = float(np.linalg.norm(s - coefficient * powers)) / norm if norm > 0 else 0.0
    if fit_residual > fit_tol:
        logger.error("eta^%s fit leaves relative residual %.3e", order, fit_residual)
        raise FitError(f"eta^{order} fit residual {fit_residual:.3e} above {fit_tol}")
    exponent = None
    if np.all(s != 0):
        exponent = float(np.polyfit(np.log(etas), np.log(np.abs(s)), 1)[0])

    return HopfResult(
        order=order,
        alpha=alpha,
        phase=float(phase),
        etas=etas,
        pairings=s,
        coefficient=coefficient,
        exponent=exponent,
        direction=radial_derivative_at_one(discs[-1]),
        sign_ok=coefficient < 0,
        fit_residual=fit_residual,
        feedback=feedback_ratios(line, discs[-1]),
        discs=discs,
    )


def feedback_ratios(line: LineRestriction, d: DiscSolution) -> Dict[str, List[float]]:
    """max |u_{I_i}| / |w|^{m_i} and the same for v, per finite-weight block."""
    modulus = np.abs(d.w.values[:, 0])
    mask = modulus > 1e-3 * float(np.max(modulus, initial=0.0))
    out: Dict[str, List[float]] = {"u": [], "v": []}
    for block, rng in enumerate(line.weights.ranges(), start=1):
        weight = line.weights.weights[block - 1]
        if not is_finite(weight) or not np.any(mask):
            continue
        scale = modulus[mask] ** int(weight)  # type: ignore[arg-type]
        for key, fn in (("u", d.u), ("v", d.v)):
            values = np.abs(fn.values[mask][:, rng.start : rng.stop]).max(axis=1)
            out[key].append(float(np.max(values / scale)))
    return out


# partial sums of (1 − τ)^α


@dataclass(frozen=True)
class FGammaRow:
    n_terms: int
    sup_error: float
    fgamma_error: float
    c5_bound_ok: bool
    value_at_one: float

    def to_json(self) -> Dict[str, object]:
        return {
            "N": self.n_terms,
            "sup_error": self.sup_error,
            "fgamma_error": self.fgamma_error,
            "c5_bound_ok": self.c5_bound_ok,
            "value_at_one": self.value_at_one,
        }


def holder_seminorm(values: np.ndarray, grid: CircleGrid, gamma: float, chunk: int = 256) -> float:
    """max over grid pairs of |f_j − f_k| / d(θ_j, θ_k)^γ with the circular distance."""
    theta = grid.theta
    best = 0.0
    for start in range(0, grid.n, chunk):
        rows = slice(start, start + chunk)
        gap = np.abs(theta[rows, None] - theta[None, :])
        dist = np.minimum(gap, 2 * np.pi - gap)
        diff = np.abs(values[rows, None] - values[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dist > 0, diff / np.power(dist, gamma), 0.0)
        best = max(best, float(ratio.max()))
    return best


def fgamma_report(
    alpha: float,
    gamma: float,
    n_list: Sequence[int] = (8, 16, 32, 64, 128),
    grid: Optional[CircleGrid] = None,
    radii: Sequence[float] = (0.5, 0.9, 0.99),
) -> List[FGammaRow]:
    """Discrete F^γ distance between S_N and (1−τ)^α, with the interior derivative bound."""
    if not 0 < gamma < alpha < 1:
        raise ParameterError(f"need 0 < gamma < alpha < 1, got gamma={gamma}, alpha={alpha}")
    grid = grid or CircleGrid(config.grid_size)
    tau = grid.tau
    target = (1 - tau) ** alpha
    target[grid.zero_index] = 0.0
    rows = []
    for n_terms in n_list:
        coeffs = taylor_coefficients(alpha, n_terms)
        diff = np.polynomial.polynomial.polyval(tau, coeffs) - target
        # centered differences in θ
        derivative = (np.roll(diff, -1) - np.roll(diff, 1)) / (2 * grid.spacing)
        weighted = (1 - tau) * derivative
        sup_error = float(np.max(np.abs(diff)))
        fgamma_error = sup_error + holder_seminorm(weighted, grid, gamma)

        derivative_coeffs = np.polynomial.polynomial.polyder(coeffs)
        bound_ok = True
        for r in radii:
            inner = np.polynomial.polynomial.polyval(r * tau, derivative_coeffs)
            bound = alpha * (1 - r) ** (alpha - 1)
            if np.max(np.abs(inner)) > bound * (1 + 1e-12):
                bound_ok = False
        rows.append(
            FGammaRow(
                n_terms=int(n_terms),
                sup_error=sup_error,
                fgamma_error=fgamma_error,
                c5_bound_ok=bound_ok,
                value_at_one=float(coeffs.sum()),
            )
        )
        logger.info("S_%s: sup error %.3e, F^gamma error %.3e", n_terms, sup_error, fgamma_error)
    return rows


# attached family


@dataclass(frozen=True, eq=False)
class SweepResult:
    points: np.ndarray
    jacobian: np.ndarray
    tangent_rank: int
    expected_rank: int
    gained_direction: np.ndarray
    v_prime: np.ndarray
    angle: float

    def to_json(self) -> Dict[str, object]:
        return {
            "tangent_rank_at_p": self.tangent_rank,
            "expected_rank": self.expected_rank,
            "gained_direction": [float(c) for c in self.gained_direction],
            "v_prime": [float(c) for c in self.v_prime],
            "angle": self.angle,
            "points": int(self.points.shape[0]),
        }


def sweep_attached_family(
    m: ModelLike,
    base: DiscSolution,
    step: float = 1e-3,
    r_window: Tuple[float, float] = (0.98, 1.0),
    n_r: int = 5,
    rank_rtol: float = 1e-4,
    angle_tol: float = 1e-3,
) -> SweepResult:
    """Union of the perturbed discs on a radial window, and its tangent space at the base point.

    Every real parameter of (w, x) is moved by ±step, the disc re-solved with the
    base disc as warm start, and the cloud fitted by an affine map in
    (parameters, r − 1). The fit must have rank dim M + 1 and its r-column,
    taken modulo the other columns, must point along v'_o = ∂_r v(1).
    """
    model = as_model(m)
    l, n = model.nvars
    if base.component is None:
        raise ParameterError("sweep_attached_family needs a disc solved from a CR component")
    v_prime = radial_derivative_at_one(base)
    scale = max(1.0, float(np.max(np.abs(base.v.values), initial=0.0)))
    if float(np.linalg.norm(v_prime)) <= 1e-10 * scale:
        raise NoTransversalGainError("no transversal gain: v'_o vanishes for this disc")

    radii = np.linspace(r_window[0], r_window[1], n_r)
    n_params = 2 * n + l
    samples = [(np.zeros(n_params), base)]
    for axis in range(n_params):
        for sign in (1.0, -1.0):
            x, offset = _perturbation(l, n, axis, sign * step)
            disc = solve_bishop(
                model, base.component, base.x + x, base.tol, warm_start=base, w_offset=offset
            )
            params = np.zeros(n_params)
            params[axis] = sign * step
            samples.append((params, disc))

    design = []
    points = []
    for params, disc in samples:
        for r, point in zip(radii, radial_extension(disc, radii)):
            design.append(np.concatenate([[1.0], params, [r - 1.0]]))
            points.append(point)
    design_arr = np.array(design)
    points_arr = np.array(points)
    fit = np.linalg.lstsq(design_arr, points_arr, rcond=None)[0]
    jacobian = fit[1:].T

    rank = numerical_rank(jacobian, rtol=rank_rtol)
    expected = model.dimension + 1
    others, r_column = jacobian[:, :-1], jacobian[:, -1]
    q, _ = np.linalg.qr(others)
    gained_full = r_column - q @ (q.T @ r_column)
    gained = gained_full[l : 2 * l]
    cosine = float(gained @ v_prime) / (np.linalg.norm(gained) * np.linalg.norm(v_prime))
    angle = float(np.arccos(np.clip(cosine, -1.0, 1.0)))
    result = SweepResult(points_arr, jacobian, rank, expected, gained, v_prime, angle)
    if rank != expected:
        raise InvariantViolationError(f"tangent rank {rank} at the base point, expected {expected}")
    if angle > angle_tol:
        raise InvariantViolationError(
            f"gained direction is {angle:.2e} rad away from v'_o (tolerance {angle_tol})"
        )
    logger.info("Attached family gains v'_o = %s with rank %s", v_prime, rank)
    return result


def write_disc_csv(d: DiscSolution, path: str) -> None:
    """θ, u_1..u_l, v_1..v_l, Re w_k, Im w_k with '#' metadata lines."""
    u = np.atleast_2d(d.u.values.T).T
    v = np.atleast_2d(d.v.values.T).T
    w = np.atleast_2d(d.w.values.T).T
    l, n = u.shape[1], w.shape[1]
    columns = (
        ["theta"]
        + [f"u{h + 1}" for h in range(l)]
        + [f"v{h + 1}" for h in range(l)]
        + [f"re_w{k + 1}" for k in range(n)]
        + [f"im_w{k + 1}" for k in range(n)]
    )
    header = "\n".join(f"{key}={value}" for key, value in d.metadata().items())
    data = np.column_stack([d.grid.theta, u, v, w.real, w.imag])
    np.savetxt(path, data, delimiter=",", header=header + "\n" + ",".join(columns), comments="# ")
