"""Command line front-end of confdimlab.

Every subcommand writes a versioned JSON summary (to ``--output`` or stdout) and
optionally a CSV table and an SVG plot. Exit codes are 0 on success, 2 on invalid
input and 3 when a solver does not converge; partial results are still written.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .config_params import ConfigParams
from .energy_ops import (
    ProductEnergyForm,
    axiom_suite,
    energy,
    energy_form,
    energy_measure,
    product_energy,
    product_form,
)
from .entities import DiscreteFunction, FractalSpec
from .errors import ConfdimlabError, NonConvergence
from .fractal_ops import max_degree, resolve_spec
from .graph_cache import load_or_build_graph
from .modulus_ops import (
    CurveFamily,
    annulus_modulus,
    ball_to_ball_modulus,
    solve_modulus,
)
from .report_ops import (
    envelope,
    error_record,
    to_json,
    write_csv,
    write_json,
    write_loglog_svg,
    write_tv_svg,
)
from .scaling_ops import estimate_confdim, fit_exponent
from .singularity_ops import concentration_scan, product_singularity_demo
from .utils import QuietContext

COMMANDS = ("build", "modulus", "scaling", "confdim", "energy", "axioms", "singularity", "product-demo")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NON_CONVERGENCE = 3

CSV_COLUMNS = {
    "build": ["spec", "level", "num_cells", "num_edges", "max_degree"],
    "modulus": ["spec", "level", "p", "value", "lower_bound", "iterations", "slack", "duality_gap"],
    "scaling": ["spec", "p", "level", "eps_over_r", "modulus", "slack"],
    "confdim": ["spec", "p", "slope"],
    "energy": ["cell", "mass"],
    "axioms": ["axiom", "samples", "violations", "worst_residual"],
    "singularity": ["spec", "p", "level", "max_cell_ratio", "gini", "tv_distance", "energy", "renormalization"],
    "product-demo": ["spec_x", "spec_y", "p", "level", "mutual_tv", "tv_lambda_x", "tv_lambda_y"],
}


@dataclass
class RunConfig:
    """A fully resolved batch run."""

    command: str
    spec: str
    level: Optional[int] = None
    levels: Tuple[int, ...] = ()
    p: Optional[float] = None
    p_grid: Tuple[float, ...] = ()
    tol: Optional[float] = None
    modulus_tol: Optional[float] = None
    seed: int = 0
    samples: int = 100
    family: str = "annulus"
    center: Optional[int] = None
    r: Optional[float] = None
    x: Optional[int] = None
    y: Optional[int] = None
    separation_factor: float = 4.0
    source: Tuple[int, ...] = ()
    target: Tuple[int, ...] = ()
    bracket: Optional[Tuple[float, float]] = None
    boundary: str = "corner"
    conductance_rule: str = "fitted"
    function: str = "ramp"
    output: Optional[str] = None
    csv: Optional[str] = None
    svg: Optional[str] = None
    cache_dir: Optional[str] = None
    workers: int = field(default_factory=lambda: ConfigParams.workers)
    quiet: bool = False

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ValueError(f"Unknown command: {self.command}")
        for name in ("tol", "modulus_tol"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ValueError(f"Tolerance {name} must be positive: {value}")
        if self.samples < 1:
            raise ValueError(f"Sample count must be positive: {self.samples}")
        if self.workers < 1:
            raise ValueError(f"Worker count must be positive: {self.workers}")
        if self.command in ("build", "modulus", "energy", "axioms") and self.level is None:
            raise ValueError(f"Command {self.command} needs --level")
        if self.command in ("scaling", "confdim", "singularity", "product-demo") and not self.levels:
            raise ValueError(f"Command {self.command} needs --levels")

    def to_record(self) -> Dict[str, Any]:
        """The config embedded in the outputs, without the settings that cannot change them."""
        record = asdict(self)
        for key in ("workers", "quiet"):
            record.pop(key)
        return record


## PARSING
def parse_levels(text: str) -> Tuple[int, ...]:
    """Parse ``"2..5"`` (inclusive) or ``"2,3,5"``."""
    try:
        if ".." in text:
            low, high = text.split("..", 1)
            return tuple(range(int(low), int(high) + 1))
        return tuple(int(item) for item in text.split(",") if item.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"Invalid level range: {text}")


def parse_floats(text: str) -> Tuple[float, ...]:
    try:
        return tuple(float(item) for item in text.split(",") if item.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"Invalid number list: {text}")


def parse_ints(text: str) -> Tuple[int, ...]:
    try:
        return tuple(int(item) for item in text.split(",") if item.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"Invalid index list: {text}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="confdimlab",
        description="Discrete modulus, energy and singularity computations on self-similar fractals.",
    )
    parser.add_argument("--version", action="version", version=f"confdimlab {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", required=True, help="registry name or product expression, e.g. carpet^2 or interval*gasket")
    common.add_argument("--output", help="JSON summary path (default: stdout)")
    common.add_argument("--csv", help="CSV table path")
    common.add_argument("--emit-svg", dest="svg", help="SVG plot path")
    common.add_argument("--cache-dir", help="graph cache directory (default: $CONFDIMLAB_CACHE_DIR)")
    common.add_argument("--workers", type=int, default=ConfigParams.workers, help="worker processes")
    common.add_argument("--quiet", action="store_true", help="only log warnings")
    common.add_argument("--seed", type=int, default=0)

    commands = parser.add_subparsers(dest="command", required=True)

    build = commands.add_parser("build", parents=[common], help=f"build and cache a graph; CSV: {','.join(CSV_COLUMNS['build'])}")
    build.add_argument("--level", type=int)

    modulus = commands.add_parser("modulus", parents=[common], help=f"solve one modulus problem; CSV: {','.join(CSV_COLUMNS['modulus'])}")
    modulus.add_argument("--level", type=int)
    modulus.add_argument("--family", choices=["annulus", "ball2ball", "point2point"], default="annulus")
    modulus.add_argument("--p", type=float, default=2.0)
    modulus.add_argument("--tol", dest="modulus_tol", type=float)
    modulus.add_argument("--center", type=int, help="annulus center cell (default: middle cell)")
    modulus.add_argument("--r", type=float, help="annulus or ball radius (default: cell diameter)")
    modulus.add_argument("--x", type=int, help="first ball center cell")
    modulus.add_argument("--y", type=int, help="second ball center cell")
    modulus.add_argument("--A", dest="separation_factor", type=float, default=4.0, help="largest ball separation in units of r")
    modulus.add_argument("--source", type=parse_ints, default=(), help="point-to-point source cells (default: first cell)")
    modulus.add_argument("--target", type=parse_ints, default=(), help="point-to-point target cells (default: last cell)")

    scaling = commands.add_parser("scaling", parents=[common], help=f"fit modulus scaling exponents; CSV: {','.join(CSV_COLUMNS['scaling'])}")
    scaling.add_argument("--levels", type=parse_levels)
    scaling.add_argument("--p", type=float)
    scaling.add_argument("--p-grid", type=parse_floats, default=())
    scaling.add_argument("--r", type=float)
    scaling.add_argument("--modulus-tol", type=float)

    confdim = commands.add_parser("confdim", parents=[common], help=f"estimate the conformal dimension; CSV: {','.join(CSV_COLUMNS['confdim'])}")
    confdim.add_argument("--levels", type=parse_levels)
    confdim.add_argument("--bracket", type=parse_floats)
    confdim.add_argument("--tol", type=float, help="bisection tolerance on p")
    confdim.add_argument("--r", type=float)
    confdim.add_argument("--modulus-tol", type=float)

    energy_cmd = commands.add_parser("energy", parents=[common], help=f"energy and energy measure of a function; CSV: {','.join(CSV_COLUMNS['energy'])}")
    energy_cmd.add_argument("--level", type=int)
    energy_cmd.add_argument("--p", type=float, default=2.0)
    energy_cmd.add_argument("--function", choices=["ramp", "random"], default="ramp")

    axioms = commands.add_parser("axioms", parents=[common], help=f"energy measure axiom suite; CSV: {','.join(CSV_COLUMNS['axioms'])}")
    axioms.add_argument("--level", type=int)
    axioms.add_argument("--p", type=float, default=2.0)
    axioms.add_argument("--samples", type=int, default=100)
    axioms.add_argument("--tol", type=float)

    singularity = commands.add_parser("singularity", parents=[common], help=f"energy concentration scan; CSV: {','.join(CSV_COLUMNS['singularity'])}")
    singularity.add_argument("--levels", type=parse_levels)
    singularity.add_argument("--p", type=float, default=2.0)
    singularity.add_argument("--boundary", default="corner", help="corner, ramp or comma separated corner values")
    singularity.add_argument("--conductance-rule", default="fitted", help="unit, fitted or a per-level factor")

    demo = commands.add_parser("product-demo", parents=[common], help=f"product measure singularity table; CSV: {','.join(CSV_COLUMNS['product-demo'])}")
    demo.add_argument("--levels", type=parse_levels)
    demo.add_argument("--p", type=float, default=2.0)

    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values = {key: value for key, value in vars(args).items() if key in RunConfig.__dataclass_fields__}
    if values.get("bracket") is not None:
        if len(values["bracket"]) != 2:
            raise ValueError(f"A bracket needs two exponents: {values['bracket']}")
        values["bracket"] = tuple(values["bracket"])
    return RunConfig(**{key: value for key, value in values.items() if value is not None})


## COMMANDS
def _load(spec: FractalSpec, level: int, config: RunConfig) -> Any:
    return load_or_build_graph(spec, level, cache_dir=config.cache_dir)


def _run_build(spec: FractalSpec, config: RunConfig) -> Tuple[Dict[str, Any], List[Dict[str, Any]], None]:
    assert config.level is not None
    graph = _load(spec, config.level, config)
    row = {
        "spec": spec.name,
        "level": graph.level,
        "num_cells": graph.num_cells,
        "num_edges": int(graph.edges.shape[0]),
        "max_degree": max_degree(graph),
    }
    summary = dict(row, hausdorff_dim=spec.hausdorff_dim, cell_diameter=graph.cell_diameter, digest=spec.digest().hex())
    return summary, [row], None


def _run_modulus(spec: FractalSpec, config: RunConfig) -> Tuple[Dict[str, Any], List[Dict[str, Any]], None]:
    assert config.level is not None and config.p is not None
    graph = _load(spec, config.level, config)
    r = graph.cell_diameter if config.r is None else config.r

    if config.family == "annulus":
        center = graph.num_cells // 2 if config.center is None else config.center
        result = annulus_modulus(graph, center, r, config.p, config.modulus_tol)
    elif config.family == "ball2ball":
        if config.x is None or config.y is None:
            raise ValueError("Ball-to-ball families need --x and --y")
        result = ball_to_ball_modulus(graph, config.x, config.y, r, config.separation_factor, config.p, config.modulus_tol)
    else:
        source = config.source or (0,)
        target = config.target or (graph.num_cells - 1,)
        family = CurveFamily.point_to_point(graph, source, target)
        result = solve_modulus(family, config.p, config.modulus_tol)
    if not result.converged:
        raise NonConvergence(f"Modulus stalled at slack {result.slack:.3g}", partial=result)

    record = result.to_record()
    record["rho"] = result.optimal_rho.rho
    return record, [result.to_record()], None


def _run_scaling(spec: FractalSpec, config: RunConfig) -> Tuple[Dict[str, Any], List[Dict[str, Any]], Any]:
    grid = config.p_grid or ((config.p,) if config.p is not None else (2.0,))
    fits = [
        fit_exponent(spec, p, config.levels, r=config.r, tol=config.modulus_tol, workers=config.workers)
        for p in sorted(grid)
    ]
    rows = [row for fit in fits for row in fit.rows()]
    return {"fits": [fit.to_record() for fit in fits]}, rows, lambda path: write_loglog_svg(path, fits)


def _run_confdim(spec: FractalSpec, config: RunConfig) -> Tuple[Dict[str, Any], List[Dict[str, Any]], None]:
    estimate = estimate_confdim(
        spec,
        config.levels,
        p_bracket=config.bracket,
        bisect_tol=0.02 if config.tol is None else config.tol,
        r=config.r,
        tol=config.modulus_tol,
        workers=config.workers,
    )
    rows = [{"spec": spec.name, "p": p, "slope": slope} for p, slope in estimate.per_p_slopes]
    return estimate.to_record(), rows, None


def _sample_function(graph: Any, config: RunConfig) -> np.ndarray:
    if config.function == "random":
        return np.random.default_rng(config.seed).standard_normal(graph.num_nodes)
    return graph.embedding[:, 0].copy()


def _form(spec: FractalSpec, graph: Any, config: RunConfig) -> Any:
    """The energy form of a graph, the product of the factor forms for two-factor specs."""
    assert config.level is not None and config.p is not None
    if len(spec.factors) == 2:
        factor_x = energy_form(_load(spec.factors[0], config.level, config), config.p)
        factor_y = energy_form(_load(spec.factors[1], config.level, config), config.p)
        return product_form(factor_x, factor_y, graph)
    return energy_form(graph, config.p)


def _run_energy(spec: FractalSpec, config: RunConfig) -> Tuple[Dict[str, Any], List[Dict[str, Any]], None]:
    assert config.level is not None and config.p is not None
    graph = _load(spec, config.level, config)
    form = _form(spec, graph, config)
    f = DiscreteFunction(graph, _sample_function(graph, config))
    measure = energy_measure(form, f)
    value = product_energy(form, f) if isinstance(form, ProductEnergyForm) else energy(form, f)
    rows = [{"cell": cell, "mass": mass} for cell, mass in enumerate(measure.cell_mass.tolist())]
    summary = {"spec": spec.name, "level": graph.level, "p": config.p, "function": config.function, "energy": value, "measure_total": measure.total}
    return summary, rows, None


def _run_axioms(spec: FractalSpec, config: RunConfig) -> Tuple[Dict[str, Any], List[Dict[str, Any]], None]:
    assert config.level is not None and config.p is not None
    graph = _load(spec, config.level, config)
    results = axiom_suite(_form(spec, graph, config), config.samples, config.seed, 1e-9 if config.tol is None else config.tol)
    rows = [result.to_record() for result in results]
    summary = {"spec": spec.name, "level": graph.level, "p": config.p, "seed": config.seed, "axioms": rows}
    return summary, rows, None


def _boundary_pattern(text: str) -> Any:
    if text in ("corner", "ramp"):
        return text
    return [float(value) for value in text.split(",")]


def _conductance_rule(text: str) -> Any:
    return text if text in ("unit", "fitted") else float(text)


def _run_singularity(spec: FractalSpec, config: RunConfig) -> Tuple[Dict[str, Any], List[Dict[str, Any]], Any]:
    assert config.p is not None
    report = concentration_scan(
        spec,
        config.p,
        _boundary_pattern(config.boundary),
        config.levels,
        _conductance_rule(config.conductance_rule),
        workers=config.workers,
    )
    return report.to_record(), report.rows(), lambda path: write_tv_svg(path, report)


def _run_product_demo(spec: FractalSpec, config: RunConfig) -> Tuple[Dict[str, Any], List[Dict[str, Any]], Any]:
    assert config.p is not None
    if len(spec.factors) != 2:
        raise ValueError(f"product-demo needs a product spec such as gasket*gasket, got {spec.name}")
    report = product_singularity_demo(spec.factors[0], spec.factors[1], config.p, config.levels)
    return report.to_record(), report.table(), lambda path: write_tv_svg(path, report)


_RUNNERS = {
    "build": _run_build,
    "modulus": _run_modulus,
    "scaling": _run_scaling,
    "confdim": _run_confdim,
    "energy": _run_energy,
    "axioms": _run_axioms,
    "singularity": _run_singularity,
    "product-demo": _run_product_demo,
}


def _emit(config: RunConfig, result: Any, rows: Sequence[Dict[str, Any]], plot: Any, partial: bool) -> None:
    payload = envelope(config.command, config.to_record(), result, __version__, partial=partial)
    if config.output is None:
        sys.stdout.write(to_json(payload))
    else:
        write_json(config.output, payload)

    if config.csv is not None:
        columns = CSV_COLUMNS[config.command]
        if partial:
            columns = columns + ["partial"]
            rows = [dict(row, partial=True) for row in rows]
        write_csv(config.csv, rows, columns)
    if config.svg is not None and plot is not None:
        plot(config.svg)


def run(config: RunConfig) -> int:
    """Execute a run and write its artifacts.

    Returns
    -------
    int
        The exit status: 0 on success, 2 on invalid input, 3 on non-convergence.
    """
    try:
        config.validate()
        spec = resolve_spec(config.spec)
        saved = ConfigParams.cache_dir, ConfigParams.workers
        if config.cache_dir is not None:
            ConfigParams.cache_dir = config.cache_dir
        ConfigParams.workers = config.workers
        try:
            if config.quiet:
                with QuietContext():
                    result, rows, plot = _RUNNERS[config.command](spec, config)
            else:
                result, rows, plot = _RUNNERS[config.command](spec, config)
        finally:
            ConfigParams.cache_dir, ConfigParams.workers = saved
    except NonConvergence as err:
        sys.stderr.write(to_json(error_record(err)))
        partial = err.partial.to_record() if hasattr(err.partial, "to_record") else None
        _emit(config, partial, [partial] if isinstance(partial, dict) else [], None, partial=True)
        return EXIT_NON_CONVERGENCE
    except (ValueError, KeyError) as err:
        sys.stderr.write(to_json(error_record(err)))
        return EXIT_INVALID
    except ConfdimlabError as err:
        sys.stderr.write(to_json(error_record(err)))
        return EXIT_NON_CONVERGENCE

    _emit(config, result, rows, plot, partial=False)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )

    try:
        config = config_from_args(args)
    except (TypeError, ValueError) as err:
        sys.stderr.write(to_json(error_record(err)))
        return EXIT_INVALID
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
