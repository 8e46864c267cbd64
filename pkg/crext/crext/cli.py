#!/usr/bin/env python3
import json
import logging
import os
from functools import wraps
from typing import Any, Callable, Dict, List, NoReturn, Optional, Sequence

import click
import numpy as np

from crext import __version__
from crext.bishop import (
    CircleGrid,
    fgamma_report,
    hopf_scan,
    sweep_attached_family,
    write_disc_csv,
)
from crext.cones import cone_opens_below, halfspace_cones
from crext.config import config
from crext.custom_exceptions import CRExtError, NoTransversalGainError, ParameterError
from crext.hormander import filtration
from crext.manifold import (
    ManifoldModel,
    load_model,
    lowest_weight_part,
    model_hash,
    pluriharmonic_test,
    restrict_to_line,
)
from crext.polyalg import is_finite, weight_to_json
from crext.sector import (
    TrigPoly,
    barrier_construct,
    sector_condition,
    thresholds,
    write_g_csv,
    write_sector_csv,
    xi_samples,
)

log = logging.getLogger("crext-cli")


def _default(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, np.bool_)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


def dump(report: Dict[str, Any]) -> str:
    return json.dumps(report, sort_keys=True, default=_default)


def error_exit(e: CRExtError) -> NoReturn:
    click.echo(dump({"error": {"type": type(e).__name__, "message": e.message}}))
    raise SystemExit(e.exit_code)


def report_command(func: Callable[..., Dict[str, Any]]) -> Callable[..., None]:
    """Run a report builder, print its JSON and mirror it to --json; errors become one JSON line."""

    @wraps(func)
    def wrapper(*args: Any, json_path: Optional[str] = None, **kwargs: Any) -> None:
        try:
            report = func(*args, **kwargs)
        except CRExtError as e:
            log.error("%s: %s", type(e).__name__, e.message)
            error_exit(e)
        report["version"] = __version__
        report["tolerances"] = config.get_tolerances()
        text = dump(report)
        click.echo(text)
        if json_path:
            with open(json_path, "w", encoding="utf-8") as f:
                f.write(text + "\n")

    return wrapper


def output_options(func: Callable[..., None]) -> Callable[..., None]:
    func = click.option("--json", "json_path", default=None, help="Also write the JSON here.")(func)
    func = click.option("--csv-dir", default=None, help="Directory for CSV output.")(func)
    return func


def solver_options(func: Callable[..., None]) -> Callable[..., None]:
    func = click.option("--tol", type=float, default=None, help="Picard tolerance override.")(func)
    func = click.option("--grid", type=int, default=None, help="Circle grid size N.")(func)
    return func


def parse_floats(raw: Optional[str], name: str) -> Optional[List[float]]:
    if raw is None:
        return None
    try:
        return [float(item) for item in raw.split(",") if item.strip()]
    except ValueError as e:
        raise ParameterError(f"--{name} must be a comma-separated list of numbers") from e


def parse_a_range(raw: str) -> List[float]:
    """``1,1.5,2`` or ``start:stop:count``."""
    if ":" in raw:
        parts = raw.split(":")
        try:
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        except (ValueError, IndexError) as e:
            raise ParameterError("--a-range must look like start:stop:count") from e
        if len(parts) != 3 or count < 1:
            raise ParameterError("--a-range must look like start:stop:count")
        return [float(a) for a in np.linspace(start, stop, count)]
    values = parse_floats(raw, "a-range")
    if not values:
        raise ParameterError("--a-range is empty")
    return values


def _csv_dir(path: Optional[str]) -> Optional[str]:
    if path is None:
        return None
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise ParameterError(f"cannot create CSV directory {path!r}") from e
    return path


def _model_echo(model: ManifoldModel, source: str) -> Dict[str, Any]:
    return {
        "source": os.path.basename(source),
        "hash": model_hash(model),
        "l": model.l,
        "n": model.n,
        "weights": model.weights.to_json(),
    }


@click.group()
def cli() -> None:
    pass


# analyze


def direction_section(
    model: ManifoldModel,
    k: int,
    xis: Sequence[np.ndarray],
    c: Optional[float],
    out_dir: Optional[str] = None,
) -> Dict[str, Any]:
    line = restrict_to_line(model, k)
    blocks = []
    for block, weight in enumerate(line.weights.weights, start=1):
        entry: Dict[str, Any] = {"block": block, "weight": weight_to_json(weight)}
        if is_finite(weight):
            results = [pluriharmonic_test(p, line) for p in lowest_weight_part(line, block)]
            entry["pluriharmonic"] = [r.is_pluriharmonic for r in results]
        blocks.append(entry)

    sectors = []
    for xi in xis:
        block = next(
            b
            for b, rng in enumerate(line.weights.ranges(), start=1)
            if np.any(xi[rng.start : rng.stop])
        )
        if not is_finite(line.weights.weights[block - 1]):
            sectors.append({"xi": xi, "block": block, "holds": None, "note": "infinite weight"})
            continue
        report = sector_condition(line, block, xi, c=c)
        sectors.append({"xi": xi, **report.to_json()})
        if out_dir is not None and report.g is not None:
            stem = os.path.join(out_dir, f"w{k}_xi{len(sectors) - 1}")
            write_g_csv(report.g, stem + "_g.csv")
            write_sector_csv(report.g, stem + "_sectors.csv")
    return {
        "direction": k,
        "weights": line.weights.to_json(),
        "seminormal": line.seminormal,
        "blocks": blocks,
        "sectors": sectors,
    }


def run_analyze(
    spec: str,
    cap: Optional[int],
    c: Optional[float],
    xi_count: int,
    seed: int,
    csv_dir: Optional[str],
) -> Dict[str, Any]:
    model = load_model(spec)
    report = filtration(model, cap)
    log.info("Filtration of %s: %s", spec, report.status)
    xis = xi_samples(model.l, xi_count, seed)
    out_dir = _csv_dir(csv_dir)
    directions = []
    for k in range(1, model.n + 1):
        try:
            directions.append(direction_section(model, k, xis, c, out_dir))
        except CRExtError as e:
            log.warning("Direction w%s skipped: %s", k, e.message)
            error = {"type": type(e).__name__, "message": e.message}
            directions.append({"direction": k, "error": error})
    return {
        "command": "analyze",
        "model": _model_echo(model, spec),
        "filtration": report.to_json(),
        "directions": directions,
        "options": {
            "cap": report.cap,
            "c": c if c is not None else config.constraint_c,
            "xi_count": xi_count,
            "seed": seed,
        },
    }


@cli.command()
@click.argument("spec")
@click.option("--cap", type=int, default=None, help="Highest bracket length explored.")
@click.option("--c", "c", type=float, default=None, help="Box constant, constrained mode.")
@click.option("--xi-count", type=int, default=8, help="Number of sampled covectors.")
@click.option("--seed", type=int, default=0, help="Seed for sampled covectors.")
@output_options
def analyze(**kwargs: Any) -> None:
    """Hörmander numbers, pluriharmonic leading parts and sector verdicts for a manifold spec."""
    report_command(run_analyze)(**kwargs)


# disc


def run_disc(
    spec: str,
    direction: int,
    xi: Optional[str],
    alpha: Optional[float],
    eta_grid: Optional[str],
    partial_sum: Optional[int],
    phase: Optional[float],
    sweep: bool,
    fgamma: Optional[float],
    csv_dir: Optional[str],
    tol: Optional[float],
    grid: Optional[int],
) -> Dict[str, Any]:
    model = load_model(spec)
    line = restrict_to_line(model, direction)
    xi_values = parse_floats(xi, "xi")
    if xi_values is None:
        xi_values = [1.0] + [0.0] * (line.l - 1)
    circle = CircleGrid(grid) if grid is not None else None
    result = hopf_scan(
        line,
        xi_values,
        alpha=alpha,
        eta_grid=parse_floats(eta_grid, "eta-grid"),
        phase=phase,
        n_terms=partial_sum,
        grid=circle,
        tol=tol,
    )
    base = result.discs[-1]
    notes = []
    gain = bool(np.any(result.direction)) and result.coefficient != 0
    if not gain:
        notes.append("no transversal gain")
    report: Dict[str, Any] = {
        "command": "disc",
        "model": _model_echo(model, spec),
        "direction": direction,
        "xi": xi_values,
        "hopf": result.to_json(),
        "disc": base.metadata(),
        "notes": notes,
    }

    if sweep:
        try:
            report["sweep"] = sweep_attached_family(line, base).to_json()
        except NoTransversalGainError as e:
            report["sweep"] = None
            if "no transversal gain" not in notes:
                notes.append("no transversal gain")
            log.warning("Sweep skipped: %s", e.message)
    if fgamma is not None:
        report["fgamma"] = [
            row.to_json() for row in fgamma_report(result.alpha, fgamma, grid=circle)
        ]

    out_dir = _csv_dir(csv_dir)
    if out_dir is not None:
        for i, disc in enumerate(result.discs):
            write_disc_csv(disc, os.path.join(out_dir, f"disc_w{direction}_eta{i}.csv"))
    return report


@cli.command()
@click.argument("spec")
@click.option("--direction", type=int, default=1, help="Complex direction w_k (1-based).")
@click.option("--xi", default=None, help="Covector, comma-separated. Defaults to e_1.")
@click.option("--alpha", type=float, default=None, help="Exponent of (1 - tau)^alpha.")
@click.option("--eta-grid", default=None, help="Disc sizes, comma-separated.")
@click.option("--partial-sum", type=int, default=None, help="Use the partial sum S_N.")
@click.option("--phase", type=float, default=None, help="Rotation of the CR component.")
@click.option("--sweep", is_flag=True, default=False, help="Run the attached-family sweep.")
@click.option("--fgamma", type=float, default=None, help="Report F^gamma errors for this gamma.")
@solver_options
@output_options
def disc(**kwargs: Any) -> None:
    """Hopf-lemma scan over a family of attached analytic discs."""
    report_command(run_disc)(**kwargs)


# compare


def run_compare(
    k: int,
    p: int,
    a_range: str,
    csv_dir: Optional[str],
) -> Dict[str, Any]:
    limits = thresholds(k, p)
    values = parse_a_range(a_range)
    out_dir = _csv_dir(csv_dir)
    rows = []
    for a in values:
        if a <= 0:
            raise ParameterError(f"a = {a} must be positive")
        row: Dict[str, Any] = {
            "a": a,
            "extends_by_bracket": a > limits.bp_coef,
            "extends_by_sector": a > limits.sector_coef,
        }
        if k % p == 0 and a <= limits.sector_coef * (1 + 1e-12):
            row["barrier_min"] = barrier_construct(k, p, a).min_value
        else:
            row["barrier_min"] = None
        cones = halfspace_cones(k, p, a)
        row["cones"] = cones.to_json()
        row["bp_opens_below"] = cone_opens_below(cones.bp)
        row["sector_opens_below"] = cone_opens_below(cones.sector)
        rows.append(row)
        if out_dir is not None:
            g = TrigPoly.cosine_family({p: a}, a0=1.0)
            write_g_csv(g, os.path.join(out_dir, f"g_k{k}_p{p}_a{a:g}.csv"))

    notes = []
    if (k, p) == (6, 4):
        notes.append(
            "threshold ratio bp/sector = 3 from the formulas; "
            "the value 3/sqrt(3) quoted for this pair is a suspected typo"
        )
    return {
        "command": "compare",
        "thresholds": limits.to_json(),
        "rows": rows,
        "notes": notes,
    }


@cli.command()
@click.option("--k", "k", type=int, required=True, help="Even degree k >= 4.")
@click.option("--p", "p", type=int, required=True, help="Even p with 2 <= p <= k - 2.")
@click.option(
    "--a-range", default="1,1.4142135623730951,1.8,2,3", help="a values or start:stop:count."
)
@output_options
def compare(**kwargs: Any) -> None:
    """Bracket and sector thresholds, barrier minima and the two half-plane cones."""
    report_command(run_compare)(**kwargs)


if __name__ == "__main__":
    cli()
