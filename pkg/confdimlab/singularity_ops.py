from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from .config_params import ConfigParams
from .entities import DiscreteFunction, FractalSpec, VertexGraph
from .energy_ops import EnergyForm, energy, energy_form, energy_measure, minimal_energy_dominant
from .errors import EmptyBall, GraphMismatch, NonConvergence, ZeroMass
from .fractal_ops import build_graph, build_vertex_graph, factor_indices, product_spec
from .type_stubs import FloatArray
from .utils import logger, operation_boilerplate, parallel_map

ConductanceRule = Union[str, float]

# Newton steps allowed to the p-harmonic solver
HARMONIC_MAX_ITER = 200

# Named boundary patterns of concentration scans, one value per reference corner
BOUNDARY_PATTERNS: Dict[str, Dict[int, Tuple[float, ...]]] = {
    "ramp": {2: (0.0, 1.0), 3: (0.0, 0.5, 1.0)},
    "corner": {2: (1.0, 0.0), 3: (1.0, 0.0, 0.0)},
}


@dataclass(frozen=True, eq=False)
class HarmonicProblem:
    """Minimize the energy of a form among functions with prescribed boundary values.

    Parameters
    ----------
    form
        The energy form.
    boundary
        Node index to value.
    tol
        Largest accepted gradient norm on the free nodes. Defaults to
        ``ConfigParams.harmonic_tol``.
    """

    form: EnergyForm
    boundary: Mapping[int, float]
    tol: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.boundary:
            raise EmptyBall("A harmonic problem needs a non-empty boundary")
        num_nodes = self.form.graph.num_nodes
        for node, value in self.boundary.items():
            if not 0 <= node < num_nodes:
                raise GraphMismatch(f"Boundary node {node} is outside {self.form.graph}")
            if not math.isfinite(value):
                raise ValueError(f"Boundary value at node {node} is not finite: {value}")


def _gradient(form: EnergyForm, values: FloatArray) -> FloatArray:
    edges = form.graph.edges
    delta = values[edges[:, 0]] - values[edges[:, 1]]
    flux = form.renormalization * form.conductance * form.p * np.abs(delta) ** (form.p - 1) * np.sign(delta)
    return np.bincount(edges[:, 0], weights=flux, minlength=values.shape[0]) - np.bincount(
        edges[:, 1], weights=flux, minlength=values.shape[0]
    )


def _laplacian(form: EnergyForm, edge_weights: FloatArray) -> sparse.csr_matrix:
    edges = form.graph.edges
    num_nodes = form.graph.num_nodes
    rows = np.concatenate((edges[:, 0], edges[:, 1], edges[:, 0], edges[:, 1]))
    cols = np.concatenate((edges[:, 1], edges[:, 0], edges[:, 0], edges[:, 1]))
    data = np.concatenate((-edge_weights, -edge_weights, edge_weights, edge_weights))
    return sparse.csr_matrix((data, (rows, cols)), shape=(num_nodes, num_nodes))


@operation_boilerplate(no_log=True)
def solve_p_harmonic(problem: HarmonicProblem) -> DiscreteFunction:
    """Solve a discrete ``p``-harmonic boundary value problem.

    ``p = 2`` is a sparse linear solve. Other exponents use Newton steps on the
    strictly convex energy, damped by an Armijo line search, starting from the
    ``p = 2`` solution.

    Parameters
    ----------
    problem
        The form and the boundary data.

    Returns
    -------
    DiscreteFunction
        The minimizer, equal to the boundary data on the boundary.
    """
    form = problem.form
    tol = ConfigParams.harmonic_tol if problem.tol is None else problem.tol
    num_nodes = form.graph.num_nodes
    fixed = np.array(sorted(problem.boundary), dtype=np.int64)
    free = np.setdiff1d(np.arange(num_nodes), fixed)

    values = np.full(num_nodes, float(np.mean(list(problem.boundary.values()))))
    values[fixed] = [problem.boundary[int(node)] for node in fixed]
    if free.size == 0:
        return DiscreteFunction(form.graph, values)

    # The p = 2 solution is exact for p = 2 and the Newton start otherwise
    laplacian = _laplacian(form, form.renormalization * form.conductance)
    system = laplacian[free][:, free].tocsc()
    rhs = -laplacian[free][:, fixed] @ values[fixed]
    values[free] = splinalg.spsolve(system, rhs)
    if form.p == 2.0:
        return DiscreteFunction(form.graph, values)

    edges = form.graph.edges
    p = form.p
    residual = math.inf
    for iteration in range(HARMONIC_MAX_ITER):
        gradient = _gradient(form, values)[free]
        residual = float(np.abs(gradient).max())
        logger.debug(f"p-harmonic step {iteration}: gradient {residual:.3e}")
        if residual <= tol:
            return DiscreteFunction(form.graph, values)

        delta = np.abs(values[edges[:, 0]] - values[edges[:, 1]])
        floor = 1e-9 * max(1.0, float(np.ptp(values)))
        curvature = form.renormalization * form.conductance * p * (p - 1) * np.maximum(delta, floor) ** (p - 2)
        hessian = _laplacian(form, curvature)[free][:, free].tocsc()
        step = -splinalg.spsolve(hessian, gradient)

        current = float(form.edge_terms(values).sum())
        slope = float(gradient @ step)
        t = 1.0
        while t > 1e-12:
            trial = values.copy()
            trial[free] += t * step
            if float(form.edge_terms(trial).sum()) <= current + 1e-4 * t * slope + 1e-14 * abs(current):
                break
            t *= 0.5
        values[free] += t * step

    partial = DiscreteFunction(form.graph, values)
    raise NonConvergence(
        f"p-harmonic solve stopped at gradient {residual:.3e} after {HARMONIC_MAX_ITER} steps",
        partial={"function": partial, "residual": residual},
    )


def boundary_values(graph: VertexGraph, pattern: Union[str, Sequence[float]]) -> Dict[int, float]:
    """Map the reference corners of a vertex graph to the values of a pattern."""
    corners = graph.boundary.tolist()
    if isinstance(pattern, str):
        if pattern not in BOUNDARY_PATTERNS:
            raise ValueError(f"Unknown boundary pattern: {pattern}")
        pattern = BOUNDARY_PATTERNS[pattern][len(corners)]
    if len(pattern) != len(corners):
        raise ValueError(f"Boundary pattern needs {len(corners)} values, got {len(pattern)}")
    return {corner: float(value) for corner, value in zip(corners, pattern)}


def corner_harmonic_family(form: EnergyForm) -> List[DiscreteFunction]:
    """Harmonic functions equal to 1 at one reference corner and 0 at the others."""
    graph = form.graph
    if not isinstance(graph, VertexGraph):
        raise GraphMismatch("Corner problems live on vertex graphs")

    family = []
    for corner in graph.boundary.tolist():
        boundary = {int(b): float(b == corner) for b in graph.boundary.tolist()}
        family.append(solve_p_harmonic(HarmonicProblem(form, boundary)))
    return family


## CONCENTRATION
@dataclass(frozen=True)
class ConcentrationLevel:
    level: int
    max_cell_ratio: float
    gini: float
    tv_distance: float
    energy: float
    renormalization: float


@dataclass(frozen=True)
class ConcentrationReport:
    """Per-level statistics of the energy measure of a harmonic function against ``mu``."""

    spec: str
    p: float
    levels: Tuple[int, ...]
    statistic_per_level: Tuple[ConcentrationLevel, ...]

    def rows(self) -> List[Dict[str, Any]]:
        return [
            {"spec": self.spec, "p": self.p, **row.__dict__} for row in self.statistic_per_level
        ]

    def to_record(self) -> Dict[str, Any]:
        return {
            "spec": self.spec,
            "p": self.p,
            "levels": list(self.levels),
            "statistic_per_level": [dict(row.__dict__) for row in self.statistic_per_level],
        }


def tv_distance(a: FloatArray, b: FloatArray) -> float:
    """Total variation distance between the normalizations of two measures."""
    return 0.5 * float(np.abs(a / a.sum() - b / b.sum()).sum())


def gini_coefficient(masses: FloatArray, reference: FloatArray) -> float:
    """Gini coefficient of ``masses`` against ``reference`` from the Lorenz curve.

    Cells are sorted by increasing density ``masses / reference``; the coefficient is
    1 minus twice the area under the curve of cumulative normalized mass against
    cumulative normalized reference.
    """
    share = masses / masses.sum()
    weight = reference / reference.sum()
    order = np.argsort(share / weight, kind="stable")
    x = np.concatenate(([0.0], np.cumsum(weight[order])))
    y = np.concatenate(([0.0], np.cumsum(share[order])))
    area = float(np.sum(np.diff(x) * (y[1:] + y[:-1]) / 2.0))
    return min(max(1.0 - 2.0 * area, 0.0), 1.0)


def concentration_stats(masses: FloatArray, reference: FloatArray) -> Tuple[float, float, float]:
    """``(max_cell_ratio, gini, tv_distance)`` of cell masses against a reference measure."""
    if masses.sum() <= 0:
        raise ZeroMass("The energy measure vanishes")
    share = masses / masses.sum()
    weight = reference / reference.sum()
    return float((share / weight).max()), gini_coefficient(masses, reference), tv_distance(masses, reference)


def _harmonic_energy(task: Tuple[FractalSpec, float, Sequence[float], int]) -> Tuple[float, FloatArray, FloatArray]:
    spec, p, pattern, level = task
    graph = build_vertex_graph(spec, level)
    form = energy_form(graph, p, conductance=1.0)
    f = solve_p_harmonic(HarmonicProblem(form, boundary_values(graph, pattern)))
    return energy(form, f), energy_measure(form, f).cell_mass, graph.cells.cell_measure


def renormalization_factors(
    unit_energies: Mapping[int, float], rule: ConductanceRule
) -> Dict[int, float]:
    """Per-level renormalizations from unit-conductance energies keyed by level.

    ``"unit"`` keeps every level at 1, a number ``F`` gives ``F ** n``, and
    ``"fitted"`` multiplies the observed ratios ``E_(k-1) / E_k`` of levels
    ``1..n``, which must all be present together with level 0.
    """
    if rule == "unit":
        return {level: 1.0 for level in unit_energies}
    if rule == "fitted":
        factors = {0: 1.0}
        for level in range(1, max(unit_energies) + 1):
            factors[level] = factors[level - 1] * unit_energies[level - 1] / unit_energies[level]
        return {level: factors[level] for level in unit_energies}
    factor = float(rule)
    if not factor > 0:
        raise ValueError(f"Conductance factor must be positive: {rule}")
    return {level: factor**level for level in unit_energies}


@operation_boilerplate(format_finish=lambda report: f"{len(report.statistic_per_level)} levels")
def concentration_scan(
    spec: FractalSpec,
    p: float,
    boundary_pattern: Union[str, Sequence[float]],
    levels: Sequence[int],
    conductance_rule: ConductanceRule = "fitted",
    workers: Optional[int] = None,
) -> ConcentrationReport:
    """Track how the energy measure of a harmonic function concentrates with the level.

    Parameters
    ----------
    spec
        A spec with a vertex graph approximation (interval or gasket).
    p
        The exponent.
    boundary_pattern
        Values at the reference corners, or ``"ramp"`` / ``"corner"``.
    levels
        The levels to scan.
    conductance_rule
        ``"unit"``, a renormalization factor per level, or ``"fitted"``.
    workers
        Worker processes for the independent level solves.

    Returns
    -------
    ConcentrationReport
        The maximal share ratio, Gini coefficient and total variation distance of
        the energy measure against the self-similar measure, per level.
    """
    ordered = sorted(set(int(level) for level in levels))
    if not ordered:
        raise ValueError("At least one level is required")

    pattern = boundary_pattern
    if isinstance(pattern, str):
        corners = build_vertex_graph(spec, 0).boundary.shape[0]
        pattern = BOUNDARY_PATTERNS[pattern][corners] if pattern in BOUNDARY_PATTERNS else pattern

    all_levels = list(range(ordered[-1] + 1)) if conductance_rule == "fitted" else ordered
    solved = dict(
        zip(all_levels, parallel_map(_harmonic_energy, [(spec, p, pattern, n) for n in all_levels], workers))
    )

    factors = renormalization_factors({n: solved[n][0] for n in all_levels}, conductance_rule)

    rows = []
    for level in ordered:
        unit_energy, masses, reference = solved[level]
        ratio, gini, tv = concentration_stats(masses, reference)
        rows.append(ConcentrationLevel(level, ratio, gini, tv, unit_energy * factors[level], factors[level]))

    return ConcentrationReport(spec.name, p, tuple(ordered), tuple(rows))


## PRODUCTS
@dataclass(frozen=True)
class ProductSingularityLevel:
    level: int
    mutual_tv: float
    tv_lambda_x: float
    tv_lambda_y: float
    profile_x: Tuple[float, ...] = field(default=(), repr=False)
    profile_y: Tuple[float, ...] = field(default=(), repr=False)


@dataclass(frozen=True)
class ProductSingularityReport:
    """Total variation distances between ``Lambda_X (x) mu_Y`` and ``mu_X (x) Lambda_Y``."""

    spec_x: str
    spec_y: str
    p: float
    rows: Tuple[ProductSingularityLevel, ...]

    def table(self) -> List[Dict[str, Any]]:
        return [
            {
                "spec_x": self.spec_x,
                "spec_y": self.spec_y,
                "p": self.p,
                "level": row.level,
                "mutual_tv": row.mutual_tv,
                "tv_lambda_x": row.tv_lambda_x,
                "tv_lambda_y": row.tv_lambda_y,
            }
            for row in self.rows
        ]

    def to_record(self) -> Dict[str, Any]:
        return {"spec_x": self.spec_x, "spec_y": self.spec_y, "p": self.p, "rows": self.table()}


def dominant_profile(
    spec: FractalSpec, p: float, level: int, pattern: Optional[Sequence[float]] = None
) -> FloatArray:
    """The normalized minimal energy dominant measure of a harmonic family.

    The family is made of the corner problems, weighted by ``2 ** -(i + 1)``, or of
    the single problem with the given boundary pattern.
    """
    graph = build_vertex_graph(spec, level)
    form = energy_form(graph, p, conductance=1.0)
    if pattern is None:
        family = corner_harmonic_family(form)
    else:
        family = [solve_p_harmonic(HarmonicProblem(form, boundary_values(graph, pattern)))]
    dominant = minimal_energy_dominant(form, family)
    if dominant.total <= 0:
        raise ZeroMass(f"Harmonic family of {spec.name} at level {level} has no energy")
    return dominant.normalized()


@operation_boilerplate(format_finish=lambda report: f"{len(report.rows)} levels")
def product_singularity_demo(
    spec_x: FractalSpec,
    spec_y: FractalSpec,
    p: float,
    levels: Sequence[int],
    pattern: Optional[Sequence[float]] = None,
) -> ProductSingularityReport:
    """Compare the two product measures built from the factor dominant measures.

    For every level, ``Lambda_X (x) mu_Y`` and ``mu_X (x) Lambda_Y`` are laid out on the
    cells of the product graph; the report gives their mutual total variation distance
    and the distance of each to the uniform product measure.
    """
    product = product_spec(spec_x, spec_y)

    rows = []
    for level in sorted(set(int(level) for level in levels)):
        lambda_x = dominant_profile(spec_x, p, level, pattern)
        lambda_y = dominant_profile(spec_y, p, level, pattern)
        mu_x = np.full(lambda_x.shape[0], 1.0 / lambda_x.shape[0])
        mu_y = np.full(lambda_y.shape[0], 1.0 / lambda_y.shape[0])

        index_x, index_y = factor_indices(build_graph(product, level))
        left = lambda_x[index_x] * mu_y[index_y]
        right = mu_x[index_x] * lambda_y[index_y]
        uniform = mu_x[index_x] * mu_y[index_y]

        rows.append(
            ProductSingularityLevel(
                level=level,
                mutual_tv=tv_distance(left, right),
                tv_lambda_x=tv_distance(left, uniform),
                tv_lambda_y=tv_distance(right, uniform),
                profile_x=tuple(lambda_x.tolist()),
                profile_y=tuple(lambda_y.tolist()),
            )
        )
        logger.debug(f"Product level {level}: mutual tv {rows[-1].mutual_tv:.6f}")

    return ProductSingularityReport(spec_x.name, spec_y.name, p, tuple(rows))


## RESISTANCE
def triangle_star_resistance(level: int) -> Fraction:
    """Exact corner-to-corner resistance of the level-``n`` gasket network of unit resistors.

    Each level replaces the three copies of the network by their star equivalents,
    merges the inner triangle of stars into one star and converts the result back
    to a triangle.
    """
    if level < 0:
        raise ValueError(f"Level must be nonnegative: {level}")

    side = Fraction(1)
    for _ in range(level):
        arm = side / 3
        inner_arm = 2 * arm / 3
        side = 3 * (arm + inner_arm)
    return 2 * side / 3


def effective_resistance(form: EnergyForm, a: int, b: int) -> float:
    """Effective resistance between two nodes of a ``p = 2`` network.

    Uses the pseudo-inverse of the weighted Laplacian; only suited to small graphs.
    """
    if form.p != 2.0:
        raise ValueError(f"Effective resistance needs p = 2, got {form.p}")

    laplacian = _laplacian(form, form.renormalization * form.conductance).toarray()
    inverse = np.linalg.pinv(laplacian)
    return float(inverse[a, a] + inverse[b, b] - 2.0 * inverse[a, b])
