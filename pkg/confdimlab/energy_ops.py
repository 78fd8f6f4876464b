from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .config_params import ConfigParams
from .entities import ApproximationGraph, DiscreteFunction, MeasureVector, VertexGraph
from .errors import BadExponent, EmptyBall, EmptyFamily, GraphMismatch, RadiusOutOfRange
from .fractal_ops import factor_indices, metric_ball
from .type_stubs import FloatArray, IntArray, NetworkT
from .utils import operation_boilerplate, stride_sample

# Lipschitz maps the contractivity axiom composes with
CONTRACTIONS: Dict[str, Callable[[FloatArray], FloatArray]] = {
    "clamp": lambda values: np.clip(values, 0.0, 0.5),
    "abs": np.abs,
    "soft_shrink": lambda values: np.sign(values) * np.maximum(np.abs(values) - 0.5, 0.0),
}

AXIOMS = (
    "homogeneity",
    "triangle_inequality",
    "contractivity",
    "strong_locality",
    "mass_conservation",
    "lower_semicontinuity",
)


## FORMS
@dataclass(frozen=True, eq=False)
class EnergyForm:
    """A discrete ``p``-energy on the edges of a cell graph or a vertex graph.

    ``E(f) = renormalization * sum_e conductance_e * |f(i_e) - f(j_e)| ** p``. On a
    cell graph the energy measure splits every edge term evenly between its end
    cells; on a vertex graph the whole term goes to the cell owning the edge.
    """

    graph: NetworkT
    p: float
    conductance: FloatArray
    renormalization: float = 1.0

    def __post_init__(self) -> None:
        if not self.p > 1.0:
            raise BadExponent(f"The exponent p must be above 1: {self.p}")
        if self.conductance.shape != (self.graph.edges.shape[0],):
            raise GraphMismatch(
                f"Form has {self.conductance.shape[0]} conductances for {self.graph.edges.shape[0]} edges"
            )
        if np.any(self.conductance <= 0) or not np.all(np.isfinite(self.conductance)):
            raise ValueError("Conductances must be finite and positive")
        if not self.renormalization > 0:
            raise ValueError(f"Renormalization must be positive: {self.renormalization}")

    @property
    def cells(self) -> ApproximationGraph:
        """The cell graph carrying the energy measures."""
        if isinstance(self.graph, VertexGraph):
            return self.graph.cells
        return self.graph

    def edge_terms(self, values: FloatArray) -> FloatArray:
        edges = self.graph.edges
        delta = np.abs(values[edges[:, 0]] - values[edges[:, 1]])
        return self.renormalization * self.conductance * delta**self.p

    def cell_masses(self, values: FloatArray) -> FloatArray:
        terms = self.edge_terms(values)
        num_cells = self.cells.num_cells
        if isinstance(self.graph, VertexGraph):
            return np.bincount(self.graph.edge_cell, weights=terms, minlength=num_cells)

        edges = self.graph.edges
        half = 0.5 * terms
        return np.bincount(edges[:, 0], weights=half, minlength=num_cells) + np.bincount(
            edges[:, 1], weights=half, minlength=num_cells
        )

    def __str__(self) -> str:
        return f"EnergyForm({self.graph}, p={self.p})"


@dataclass(frozen=True, eq=False)
class EnergyMeasure:
    """The energy measure of a function, as a mass per cell."""

    form: Union[EnergyForm, "ProductEnergyForm"]
    f: DiscreteFunction
    cell_mass: FloatArray

    @property
    def total(self) -> float:
        return float(self.cell_mass.sum())

    def mass(self, cells: Sequence[int]) -> float:
        return float(self.cell_mass[np.asarray(list(cells), dtype=np.int64)].sum())


@dataclass(frozen=True, eq=False)
class ProductEnergyForm:
    """The product of two cell-graph forms of the same level.

    The energy of ``u`` integrates the ``Y``-energies of the sections ``u(x, .)``
    against ``mu_X`` and the ``X``-energies of the sections ``u(., y)`` against
    ``mu_Y``.
    """

    factor_x: EnergyForm
    factor_y: EnergyForm
    graph: ApproximationGraph

    def __post_init__(self) -> None:
        for factor in (self.factor_x, self.factor_y):
            if isinstance(factor.graph, VertexGraph):
                raise GraphMismatch("Product forms are built from cell graph forms")
        if self.factor_x.p != self.factor_y.p:
            raise GraphMismatch(f"Factor exponents differ: {self.factor_x.p} and {self.factor_y.p}")
        if self.factor_x.cells.level != self.factor_y.cells.level:
            raise GraphMismatch("Factor forms must have the same level")
        if self.graph.num_cells != self.factor_x.cells.num_cells * self.factor_y.cells.num_cells:
            raise GraphMismatch(f"{self.graph} is not the product of the factor graphs")

    @property
    def p(self) -> float:
        return self.factor_x.p

    @property
    def cells(self) -> ApproximationGraph:
        return self.graph

    def sections(self, values: FloatArray) -> FloatArray:
        """The values as an ``(N_X, N_Y)`` table indexed by factor cells."""
        index_x, index_y = factor_indices(self.graph)
        table = np.zeros((self.factor_x.cells.num_cells, self.factor_y.cells.num_cells))
        table[index_x, index_y] = values
        return table

    def section_masses(self, values: FloatArray) -> Tuple[FloatArray, FloatArray]:
        """Cellwise energy measures of all sections.

        Returns
        -------
        Tuple[FloatArray, FloatArray]
            ``mass_x[x, y] = Gamma_X<u(., y)>(x)`` and ``mass_y[x, y] = Gamma_Y<u(x, .)>(y)``.
        """
        table = self.sections(values)
        mass_x = np.column_stack([self.factor_x.cell_masses(column) for column in table.T])
        mass_y = np.vstack([self.factor_y.cell_masses(row) for row in table])
        return mass_x, mass_y

    def cell_masses(self, values: FloatArray) -> FloatArray:
        mass_x, mass_y = self.section_masses(values)
        mu_x = self.factor_x.cells.cell_measure
        mu_y = self.factor_y.cells.cell_measure
        density = mu_x[:, None] * mass_y + mu_y[None, :] * mass_x
        index_x, index_y = factor_indices(self.graph)
        return density[index_x, index_y]

    def __str__(self) -> str:
        return f"ProductEnergyForm({self.factor_x.cells.name} x {self.factor_y.cells.name}, p={self.p})"


AnyForm = Union[EnergyForm, ProductEnergyForm]


def default_conductance(graph: NetworkT, beta_ref: Optional[float] = None) -> float:
    """The conductance ``r ** (-n * (beta_ref - d_H))`` of a level-``n`` edge.

    ``beta_ref`` defaults to ``ConfigParams.beta_ref``, and to ``d_H`` when that is
    unset, which makes every conductance 1.
    """
    spec = graph.spec
    if spec is None:
        return 1.0
    beta_ref = ConfigParams.beta_ref if beta_ref is None else beta_ref
    if beta_ref is None:
        return 1.0
    return float(spec.contraction_ratio) ** (-graph.level * (beta_ref - spec.hausdorff_dim))


def energy_form(
    graph: NetworkT,
    p: float,
    beta_ref: Optional[float] = None,
    conductance: Optional[Union[float, FloatArray]] = None,
    renormalization: float = 1.0,
) -> EnergyForm:
    """Build an energy form with uniform default conductances unless given."""
    if conductance is None:
        conductance = default_conductance(graph, beta_ref)
    values = np.broadcast_to(
        np.asarray(conductance, dtype=np.float64), (graph.edges.shape[0],)
    ).copy()
    return EnergyForm(graph, p, values, renormalization)


def product_form(
    factor_x: EnergyForm, factor_y: EnergyForm, graph: ApproximationGraph
) -> ProductEnergyForm:
    return ProductEnergyForm(factor_x, factor_y, graph)


## EVALUATION
def _check_function(form: AnyForm, f: DiscreteFunction) -> None:
    if f.graph is not form.graph:
        raise GraphMismatch(f"Function does not live on the graph of {form}")


def energy(form: EnergyForm, f: DiscreteFunction) -> float:
    """``E(f)``, the renormalized sum of the edge terms."""
    _check_function(form, f)
    return float(form.edge_terms(f.values).sum())


def energy_measure(form: AnyForm, f: DiscreteFunction) -> EnergyMeasure:
    """The energy measure of ``f``; its total mass is the energy of ``f``."""
    _check_function(form, f)
    return EnergyMeasure(form, f, form.cell_masses(f.values))


def product_energy(form: ProductEnergyForm, u: DiscreteFunction) -> float:
    """``sum_x mu_X(x) E_Y(u(x, .)) + sum_y mu_Y(y) E_X(u(., y))``."""
    _check_function(form, u)
    table = form.sections(u.values)
    mu_x = form.factor_x.cells.cell_measure
    mu_y = form.factor_y.cells.cell_measure
    along_y = np.array([form.factor_y.edge_terms(row).sum() for row in table])
    along_x = np.array([form.factor_x.edge_terms(column).sum() for column in table.T])
    return float(mu_x @ along_y + mu_y @ along_x)


def product_energy_density(form: ProductEnergyForm, u: DiscreteFunction) -> FloatArray:
    """The mass of the product energy measure of ``u`` on every product cell."""
    _check_function(form, u)
    return form.cell_masses(u.values)


def product_energy_measure(
    form: ProductEnergyForm, u: DiscreteFunction, cell_set: Sequence[int]
) -> float:
    """The product energy measure of a set of product cells."""
    density = product_energy_density(form, u)
    return float(density[np.asarray(list(cell_set), dtype=np.int64)].sum())


## AXIOMS
@dataclass(frozen=True)
class AxiomResult:
    axiom: str
    samples: int
    violations: int
    worst_residual: float

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_record(self) -> Dict[str, Any]:
        return {
            "axiom": self.axiom,
            "samples": self.samples,
            "violations": self.violations,
            "worst_residual": self.worst_residual,
        }


def _num_nodes(form: AnyForm) -> int:
    return form.graph.num_nodes


def _locality_nodes(form: AnyForm, cells: IntArray) -> IntArray:
    """Nodes whose values determine the energy measure of ``cells``."""
    if isinstance(form, EnergyForm) and isinstance(form.graph, VertexGraph):
        owned = np.isin(form.graph.edge_cell, cells)
        return np.unique(form.graph.edges[owned])

    adjacency = form.graph.adjacency
    neighbors = adjacency[cells].indices
    return np.unique(np.concatenate((cells, neighbors)))


def _sample_axioms(
    form: AnyForm, rng: np.random.Generator, index: int
) -> Dict[str, float]:
    """Residuals of every axiom on one pseudorandom sample; positive means violated."""
    p = form.p
    num_nodes = _num_nodes(form)
    num_cells = form.cells.num_cells
    f = rng.standard_normal(num_nodes)
    g = rng.standard_normal(num_nodes)
    h = rng.standard_normal(num_nodes)
    scale = rng.uniform(-3.0, 3.0)
    cells = np.nonzero(rng.random(num_cells) < 0.5)[0]
    if cells.size == 0:
        cells = np.array([int(rng.integers(num_cells))])

    gamma_f = form.cell_masses(f)
    size = max(1.0, float(gamma_f.max()))
    residuals = {}

    gamma_scaled = form.cell_masses(scale * f)
    residuals["homogeneity"] = float(
        np.abs(gamma_scaled - abs(scale) ** p * gamma_f).max() / max(1.0, abs(scale) ** p * size)
    )

    def on(masses: FloatArray) -> float:
        return float(masses[cells].sum())

    gamma_g = form.cell_masses(g)
    residuals["triangle_inequality"] = (
        on(form.cell_masses(f + g)) ** (1 / p) - on(gamma_f) ** (1 / p) - on(gamma_g) ** (1 / p)
    )

    name = list(CONTRACTIONS)[index % len(CONTRACTIONS)]
    contracted = form.cell_masses(CONTRACTIONS[name](f))
    residuals["contractivity"] = float((contracted - gamma_f).max()) / size

    frozen = f.copy()
    frozen[_locality_nodes(form, cells)] = rng.standard_normal()
    residuals["strong_locality"] = on(form.cell_masses(frozen)) / size

    if isinstance(form, ProductEnergyForm):
        total = product_energy(form, DiscreteFunction(form.graph, f))
    else:
        total = float(form.edge_terms(f).sum())
    residuals["mass_conservation"] = abs(float(gamma_f.sum()) - total) / max(1.0, total)

    delta = 1e-3
    moved = on(form.cell_masses(f + delta * h)) ** (1 / p)
    bound = delta * on(form.cell_masses(h)) ** (1 / p)
    residuals["lower_semicontinuity"] = abs(moved - on(gamma_f) ** (1 / p)) - bound

    return residuals


@operation_boilerplate(
    format_finish=lambda results: ", ".join(f"{r.axiom}: {r.violations}" for r in results)
)
def axiom_suite(
    form: AnyForm, sample_count: int = 100, seed: int = 0, tol: float = 1e-9
) -> List[AxiomResult]:
    """Check the energy measure axioms on pseudorandom samples.

    Sample ``i`` draws from ``numpy.random.default_rng([seed, i])``, so results do
    not depend on how the samples are scheduled.

    Parameters
    ----------
    form
        An energy form or a product energy form.
    sample_count
        The number of samples.
    seed
        The seed of the sample generators.
    tol
        Residuals above ``tol`` count as violations.

    Returns
    -------
    List[AxiomResult]
        One result per axiom, in the order of ``AXIOMS``.
    """
    if tol <= 0:
        raise ValueError(f"The tolerance must be positive: {tol}")

    residuals: Dict[str, List[float]] = {axiom: [] for axiom in AXIOMS}
    for index in range(sample_count):
        rng = np.random.default_rng([seed, index])
        for axiom, residual in _sample_axioms(form, rng, index).items():
            residuals[axiom].append(residual)

    return [
        AxiomResult(
            axiom=axiom,
            samples=len(values),
            violations=sum(1 for value in values if value > tol),
            worst_residual=max(values) if values else 0.0,
        )
        for axiom, values in residuals.items()
    ]


## DOMINANT MEASURES
def minimal_energy_dominant(
    form: AnyForm,
    function_family: Sequence[DiscreteFunction],
    weights: Optional[Sequence[float]] = None,
) -> MeasureVector:
    """The weighted sum of the energy measures of a function family.

    Parameters
    ----------
    form
        The form the functions are measured with.
    function_family
        The functions.
    weights
        Positive summable weights, ``2 ** -(i + 1)`` by default.

    Returns
    -------
    MeasureVector
        A measure on the cells charging every cell that some energy measure of the
        family charges.
    """
    if not function_family:
        raise EmptyFamily("The function family is empty")

    if weights is None:
        weights = [2.0 ** -(i + 1) for i in range(len(function_family))]
    if len(weights) != len(function_family):
        raise ValueError(f"Got {len(weights)} weights for {len(function_family)} functions")
    if any(not w > 0 or not math.isfinite(w) for w in weights):
        raise ValueError("Weights must be finite and positive")

    total = np.zeros(form.cells.num_cells)
    for weight, f in zip(weights, function_family):
        total += weight * energy_measure(form, f).cell_mass
    return MeasureVector(form.cells, total)


def is_dominated(measure: FloatArray, dominant: MeasureVector) -> bool:
    """Whether ``dominant`` charges every cell that ``measure`` charges."""
    return bool(np.all((measure <= 0) | (dominant.weights > 0)))


## COMPARATORS
def ks_energy(
    graph: ApproximationGraph,
    measure: MeasureVector,
    f: DiscreteFunction,
    p: float,
    radii: Sequence[float],
) -> float:
    """The Korevaar-Schoen type energy, maximized over a list of radii.

    For every radius, sums ``nu(x) * nu(y) * |f(x) - f(y)| ** p / nu(B(x, r))`` over
    the cells ``x`` and the cells ``y`` of the ball ``B(x, r)``.
    """
    if f.graph is not graph or measure.graph is not graph:
        raise GraphMismatch(f"Function and measure must live on {graph}")
    if not radii:
        raise ValueError("At least one radius is required")

    nu = measure.weights
    best = 0.0
    for r in radii:
        if r < graph.cell_diameter - 1e-12:
            raise RadiusOutOfRange(f"Radius {r} is below the cell diameter {graph.cell_diameter}")
        value = 0.0
        for x in range(graph.num_cells):
            ball = metric_ball(graph, x, r)
            mass = float(nu[ball].sum())
            if mass <= 0.0:
                raise EmptyBall(f"Ball of radius {r} around cell {x} carries no mass")
            spread = float(np.sum(nu[ball] * np.abs(f.values[ball] - f.values[x]) ** p))
            value += nu[x] * spread / mass
        best = max(best, value)
    return best


def _scale_exponent(graph: ApproximationGraph, beta: Optional[float]) -> float:
    if beta is not None:
        return beta
    if ConfigParams.beta_ref is not None:
        return ConfigParams.beta_ref
    assert graph.spec is not None
    return graph.spec.hausdorff_dim


def poincare_constant(
    form: AnyForm,
    samples: int = 20,
    seed: int = 0,
    beta: Optional[float] = None,
    sigma: float = 2.0,
    radii: Optional[Sequence[float]] = None,
    centers: Optional[Sequence[int]] = None,
) -> float:
    """Sampled lower estimate of the constant of the ``(p, beta)``-Poincare inequality.

    Returns the largest observed ratio of ``sum_B |f - f_B| ** p mu`` over
    ``r ** beta * Gamma<f>(B(x, sigma r))`` among the sampled functions, balls and
    radii.
    """
    cells = form.cells
    if isinstance(form, EnergyForm) and isinstance(form.graph, VertexGraph):
        raise GraphMismatch("Poincare constants need functions on cells")

    beta = _scale_exponent(cells, beta)
    if radii is None:
        radii = [cells.cell_diameter * 2**k for k in (1, 2) if cells.cell_diameter * 2**k <= cells.diameter]
    if centers is None:
        centers = stride_sample(list(range(cells.num_cells)), 8)
    mu = cells.cell_measure

    best = 0.0
    for index in range(samples):
        rng = np.random.default_rng([seed, index])
        f = rng.standard_normal(cells.num_cells)
        gamma = form.cell_masses(f)
        for center in centers:
            for r in radii:
                ball = metric_ball(cells, center, r)
                big = metric_ball(cells, center, sigma * r)
                mass = mu[ball].sum()
                mean = float(mu[ball] @ f[ball] / mass)
                spread = float(mu[ball] @ np.abs(f[ball] - mean) ** form.p)
                denominator = r**beta * float(gamma[big].sum())
                if denominator > 0:
                    best = max(best, spread / denominator)
    return best


def cutoff_capacity_ratio(
    form: EnergyForm, center: int, r: float, beta: Optional[float] = None
) -> float:
    """``E(phi) * r ** beta / mu(B(x, r))`` for the cutoff between ``B(x, r)`` and ``B(x, 2r)``.

    ``phi`` is 1 on the inner ball, vanishes outside the outer ball and is linear
    in the distance to the center in between.
    """
    if isinstance(form.graph, VertexGraph):
        raise GraphMismatch("Cutoff functions are built on cell graphs")
    if r <= 0:
        raise RadiusOutOfRange(f"Radius must be positive: {r}")

    graph = form.graph
    beta = _scale_exponent(graph, beta)
    distance = graph.distances_from(center)
    phi = np.clip(2.0 - distance / r, 0.0, 1.0)
    mass = float(graph.cell_measure[metric_ball(graph, center, r)].sum())
    return energy(form, DiscreteFunction(graph, phi)) * r**beta / mass
