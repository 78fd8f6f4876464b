from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache, reduce
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.sparse import csgraph

from .config_params import ConfigParams
from .entities import (
    CUBE,
    SIMPLEX,
    ApproximationGraph,
    CellAddress,
    CellMap,
    FractalSpec,
    MeasureVector,
    VertexGraph,
)
from .errors import (
    CapExceeded,
    GraphMismatch,
    InvalidSpec,
    RadiusOutOfRange,
    RatioMismatch,
    UnknownSpec,
    ZeroMass,
)
from .type_stubs import FloatArray, IntArray
from .utils import logger, operation_boilerplate, stride_sample

CellRef = Union[CellAddress, int]


## SPECS
def interval_spec() -> FractalSpec:
    """The unit interval as the attractor of two maps of ratio 1/2."""
    half = Fraction(1, 2)
    return FractalSpec(
        name="interval",
        alphabet_size=2,
        contraction_ratio=half,
        translations=((Fraction(0),), (half,)),
        blocks=((CUBE, 1),),
    )


def carpet_spec() -> FractalSpec:
    """The standard Sierpinski carpet: 8 maps of ratio 1/3."""
    third = Fraction(1, 3)
    translations = tuple(
        (i * third, j * third)
        for i, j in itertools.product(range(3), repeat=2)
        if (i, j) != (1, 1)
    )
    return FractalSpec("carpet", 8, third, translations, ((CUBE, 2),))


def sponge_spec() -> FractalSpec:
    """The Menger sponge: 20 maps of ratio 1/3."""
    third = Fraction(1, 3)
    translations = tuple(
        (i * third, j * third, k * third)
        for i, j, k in itertools.product(range(3), repeat=3)
        if (i, j, k).count(1) <= 1
    )
    return FractalSpec("sponge", 20, third, translations, ((CUBE, 3),))


def gasket_spec() -> FractalSpec:
    """The Sierpinski gasket in barycentric coordinates: 3 maps of ratio 1/2."""
    half = Fraction(1, 2)
    translations = tuple(
        tuple(half if axis == corner else Fraction(0) for axis in range(3))
        for corner in range(3)
    )
    return FractalSpec("gasket", 3, half, translations, ((SIMPLEX, 3),))


def product_spec(a: FractalSpec, b: FractalSpec) -> FractalSpec:
    """Build the Cartesian product of two specs.

    Parameters
    ----------
    a
        The first factor.
    b
        The second factor; it must share the contraction ratio of ``a``.

    Returns
    -------
    FractalSpec
        The spec whose letters are the pairs ``(i, j)``, enumerated as
        ``i * b.alphabet_size + j``, with concatenated translations and the
        sup-metric of the factors.
    """
    if a.contraction_ratio != b.contraction_ratio:
        raise RatioMismatch(
            f"Cannot multiply {a.name} and {b.name}: ratios {a.contraction_ratio} and {b.contraction_ratio} differ"
        )

    translations = tuple(ta + tb for ta in a.translations for tb in b.translations)
    return FractalSpec(
        name=f"{a.name}*{b.name}",
        alphabet_size=a.alphabet_size * b.alphabet_size,
        contraction_ratio=a.contraction_ratio,
        translations=translations,
        blocks=a.blocks + b.blocks,
        factors=(a, b),
    )


def power_spec(spec: FractalSpec, k: int) -> FractalSpec:
    """The ``k``-fold Cartesian product of ``spec`` with itself."""
    if k < 1:
        raise InvalidSpec(f"Product power must be positive: {k}")
    if k == 1:
        return spec

    power = reduce(product_spec, [spec] * k)
    return FractalSpec(
        f"{spec.name}^{k}",
        power.alphabet_size,
        power.contraction_ratio,
        power.translations,
        power.blocks,
        power.factors,
    )


def _square_spec() -> FractalSpec:
    square = product_spec(interval_spec(), interval_spec())
    return FractalSpec(
        "square",
        square.alphabet_size,
        square.contraction_ratio,
        square.translations,
        square.blocks,
        square.factors,
    )


_REGISTRY = {
    "interval": interval_spec,
    "square": _square_spec,
    "carpet": carpet_spec,
    "gasket": gasket_spec,
    "sponge": sponge_spec,
}

_TERM = re.compile(r"^(?P<name>[a-z_]+)(\^(?P<power>\d+))?$")


def registered_specs() -> List[str]:
    """Names of the irreducible specs of the registry."""
    return sorted(_REGISTRY)


@lru_cache(maxsize=None)
def resolve_spec(expression: str) -> FractalSpec:
    """Resolve a registry name or a product expression to a spec.

    Terms are registry names optionally raised to a power (``carpet^2``) and are
    joined by ``*`` or ``x`` (``interval*carpet``, ``gasketxgasket``).

    Parameters
    ----------
    expression
        The expression to resolve, e.g. ``"carpet^2"`` or ``"interval*interval"``.

    Returns
    -------
    FractalSpec
        The resolved spec.
    """
    terms = [term for term in re.split(r"\s*[*x×]\s*", expression.strip().lower())]
    specs = []
    for term in terms:
        match = _TERM.match(term)
        if match is None or match.group("name") not in _REGISTRY:
            raise UnknownSpec(f"Unknown spec: {term or expression}")
        spec = _REGISTRY[match.group("name")]()
        if match.group("power") is not None:
            spec = power_spec(spec, int(match.group("power")))
        specs.append(spec)

    if len(specs) == 1:
        return specs[0]
    return reduce(product_spec, specs)


## GRAPHS
def _neighbor_displacements(spec: FractalSpec) -> IntArray:
    """Lattice displacements between intersecting cells of the same level."""
    per_block = []
    for kind, width in spec.blocks:
        if kind == CUBE:
            per_block.append(list(itertools.product((-1, 0, 1), repeat=width)))
        else:
            moves = [(0,) * width]
            for i, j in itertools.permutations(range(width), 2):
                move = [0] * width
                move[i], move[j] = 1, -1
                moves.append(tuple(move))
            per_block.append(moves)

    displacements = [
        sum(combo, ()) for combo in itertools.product(*per_block) if any(sum(combo, ()))
    ]
    return np.array(displacements, dtype=np.int64).reshape(-1, spec.dimension)


def _lattice_coords(spec: FractalSpec, level: int) -> IntArray:
    lattice = spec.lattice_translations
    coords = np.zeros((1, spec.dimension), dtype=np.int64)
    for _ in range(level):
        coords = (coords[:, None, :] * spec.scale + lattice[None, :, :]).reshape(
            -1, spec.dimension
        )
    return coords


def _lattice_keys(coords: IntArray, base: int) -> IntArray:
    keys = np.zeros(coords.shape[0], dtype=np.int64)
    for axis in range(coords.shape[1]):
        keys = keys * base + coords[:, axis]
    return keys


@operation_boilerplate(
    format_finish=lambda graph: f"{graph.num_cells} cells, {graph.edges.shape[0]} edges"
)
def build_graph(
    spec: FractalSpec, level: int, cap: Optional[int] = None
) -> ApproximationGraph:
    """Build the level-``n`` cell graph of a spec.

    Parameters
    ----------
    spec
        The spec to approximate.
    level
        The level ``n >= 0``.
    cap
        Largest accepted number of cells. Defaults to ``ConfigParams.cell_cap``.

    Returns
    -------
    ApproximationGraph
        The graph of the ``alphabet_size ** level`` cells, adjacent when their closed
        cells intersect, with the uniform self-similar measure.
    """
    if level < 0:
        raise ValueError(f"Level must be nonnegative: {level}")

    cap = ConfigParams.cell_cap if cap is None else cap
    num_cells = spec.alphabet_size**level
    if num_cells > cap:
        raise CapExceeded(
            f"{spec.name} at level {level} has {num_cells} cells, above the cap of {cap}"
        )

    side = spec.scale**level
    if side ** spec.dimension >= 2**62:
        raise CapExceeded(f"Lattice of {spec.name} at level {level} is too large")

    coords = _lattice_coords(spec, level)
    keys = _lattice_keys(coords, side)
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]

    pairs = []
    for displacement in _neighbor_displacements(spec):
        shifted = coords + displacement
        inside = np.all((shifted >= 0) & (shifted < side), axis=1)
        if not np.any(inside):
            continue
        source = np.nonzero(inside)[0]
        shifted_keys = _lattice_keys(shifted[inside], side)
        position = np.searchsorted(sorted_keys, shifted_keys)
        position = np.minimum(position, num_cells - 1)
        found = sorted_keys[position] == shifted_keys
        target = order[position[found]]
        source = source[found]
        keep = source < target
        pairs.append(np.column_stack((source[keep], target[keep])))

    if pairs:
        edges = np.unique(np.vstack(pairs), axis=0).astype(np.int64)
    else:
        edges = np.zeros((0, 2), dtype=np.int64)

    measure = np.full(num_cells, 1.0 / num_cells)
    graph = ApproximationGraph(spec, level, coords, edges, measure, spec.name)

    if num_cells > 1:
        num_components, _ = csgraph.connected_components(graph.adjacency, directed=False)
        if num_components != 1:
            logger.warning(f"{graph} has {num_components} connected components")

    return graph


def build_vertex_graph(spec: FractalSpec, level: int) -> VertexGraph:
    """Build the graph of cell corners of a post-critically finite spec.

    Only single-block specs whose cells meet at corners are supported: the interval
    (a 1-dimensional cube block) and simplex specs such as the gasket.

    Parameters
    ----------
    spec
        The spec to approximate.
    level
        The level ``n >= 0``.

    Returns
    -------
    VertexGraph
        Vertices are the corners of the level-``n`` cells, edges the sides of the
        cells, each owned by its cell.
    """
    if len(spec.blocks) != 1 or spec.blocks[0] not in ((CUBE, 1), (SIMPLEX, 3)):
        raise InvalidSpec(f"{spec.name} has no vertex graph approximation")

    cells = build_graph(spec, level)
    coords = cells.coords
    assert coords is not None
    kind, width = spec.blocks[0]

    if kind == CUBE:
        corner_offsets = np.array([[0], [1]], dtype=np.int64)
    else:
        corner_offsets = np.eye(width, dtype=np.int64)
    num_corners = corner_offsets.shape[0]

    corners = (coords[:, None, :] + corner_offsets[None, :, :]).reshape(-1, width)
    vertex_coords, inverse = np.unique(corners, axis=0, return_inverse=True)
    corner_ids = inverse.reshape(cells.num_cells, num_corners)

    sides = list(itertools.combinations(range(num_corners), 2))
    ends = np.vstack([corner_ids[:, [i, j]] for i, j in sides])
    edge_cell = np.tile(np.arange(cells.num_cells, dtype=np.int64), len(sides))
    ends = np.sort(ends, axis=1)
    order = np.lexsort((ends[:, 1], ends[:, 0]))

    side = spec.scale**level
    reference_corners = corner_offsets * side if kind == SIMPLEX else np.array([[0], [side]])
    boundary = np.array(
        [
            int(np.nonzero(np.all(vertex_coords == corner, axis=1))[0][0])
            for corner in reference_corners
        ],
        dtype=np.int64,
    )

    return VertexGraph(
        cells=cells,
        vertex_coords=vertex_coords.astype(np.int64),
        edges=ends[order].astype(np.int64),
        edge_cell=edge_cell[order],
        boundary=boundary,
    )


def uniform_measure(graph: ApproximationGraph) -> MeasureVector:
    """The self-similar (uniform) measure of the cells of ``graph``."""
    return MeasureVector(graph, graph.cell_measure.copy())


def cell_measure_exact(spec: FractalSpec, level: int) -> Fraction:
    """The exact measure ``alphabet_size ** -level`` of one level-``n`` cell."""
    return Fraction(1, spec.alphabet_size**level)


def max_degree(graph: ApproximationGraph) -> int:
    """The largest number of neighbors of a cell."""
    return int(graph.degrees.max()) if graph.num_cells else 0


def factor_indices(graph: ApproximationGraph) -> Tuple[IntArray, IntArray]:
    """Indices of the factor cells of every cell of a product graph.

    Returns
    -------
    Tuple[IntArray, IntArray]
        For every product cell, the index of its first and of its second factor cell
        at the same level.
    """
    spec = graph.spec
    if spec is None or len(spec.factors) != 2:
        raise GraphMismatch(f"{graph} is not a product graph")

    size_a = spec.factors[0].alphabet_size
    size_b = spec.factors[1].alphabet_size
    remaining = np.arange(graph.num_cells, dtype=np.int64)
    index_a = np.zeros(graph.num_cells, dtype=np.int64)
    index_b = np.zeros(graph.num_cells, dtype=np.int64)
    for position in range(graph.level):
        remaining, digit = np.divmod(remaining, spec.alphabet_size)
        index_a += (digit // size_b) * size_a**position
        index_b += (digit % size_b) * size_b**position
    return index_a, index_b


## METRIC
def _cell_index(graph: ApproximationGraph, cell: CellRef) -> int:
    if isinstance(cell, CellAddress):
        return graph.index_of(cell)
    if not 0 <= int(cell) < graph.num_cells:
        raise GraphMismatch(f"Cell index {cell} is outside {graph}")
    return int(cell)


def metric_ball(graph: ApproximationGraph, center_cell: CellRef, radius: float) -> IntArray:
    """Cells whose center lies within ``radius`` of the center of ``center_cell``.

    Parameters
    ----------
    graph
        The graph to search.
    center_cell
        The center, as an address or a cell index.
    radius
        The radius, in the metric of the spec (sup-metric across product factors).

    Returns
    -------
    IntArray
        Sorted indices of the cells in the closed ball.
    """
    if radius < 0:
        raise RadiusOutOfRange(f"Radius must be nonnegative: {radius}")

    index = _cell_index(graph, center_cell)
    distances = graph.distances_from(index)
    return np.nonzero(distances <= radius + 1e-12)[0].astype(np.int64)


def cell_pushforward(measure: MeasureVector, cell_map: CellMap) -> MeasureVector:
    """Restrict a measure to a cell and pull it back to the coarser source graph.

    Parameters
    ----------
    measure
        A measure on the level-``n`` graph of ``cell_map``.
    cell_map
        The similitude onto a level-``k`` cell.

    Returns
    -------
    MeasureVector
        The normalized measure on the level-``(n - k)`` graph whose weight at a source
        cell is the mass of its image divided by the mass of the target cell.
    """
    if measure.graph is not cell_map.graph:
        raise GraphMismatch("The measure does not live on the graph of the cell map")

    images = cell_map.image_indices()
    restricted = measure.weights[images]
    mass = restricted.sum()
    if mass <= 0.0:
        raise ZeroMass(f"{cell_map.target_cell} carries no mass")

    spec = cell_map.graph.spec
    assert spec is not None
    source = build_graph(spec, cell_map.source_level)
    return MeasureVector(source, restricted / mass)


## REGULARITY
@dataclass(frozen=True)
class AhlforsReport:
    """The ratios ``mu(B(x, r)) / r ** d_H`` sampled over centers and radii."""

    constant: float
    min_ratio: float
    max_ratio: float
    radii: Tuple[float, ...]
    samples: int


def ahlfors_regularity(
    graph: ApproximationGraph,
    centers: Optional[Sequence[int]] = None,
    radii: Optional[Sequence[float]] = None,
) -> AhlforsReport:
    """Estimate the Ahlfors-regularity constant of a graph at its level.

    Parameters
    ----------
    graph
        The graph to scan.
    centers
        Cell indices used as ball centers. Defaults to 16 cells picked by stride.
    radii
        Radii to test. Defaults to the cell diameter times powers of two up to the
        diameter.

    Returns
    -------
    AhlforsReport
        The smallest ``C`` with ``C^-1 r^d_H <= mu(B) <= C r^d_H`` on the samples.
    """
    spec = graph.spec
    if spec is None:
        raise GraphMismatch(f"{graph} carries no geometry")

    if centers is None:
        centers = stride_sample(list(range(graph.num_cells)), 16)
    if radii is None:
        radii = []
        radius = graph.cell_diameter
        while radius <= graph.diameter + 1e-12:
            radii.append(radius)
            radius *= 2
    dimension = spec.hausdorff_dim

    ratios = []
    for center in centers:
        distances = graph.distances_from(int(center))
        for radius in radii:
            mass = graph.cell_measure[distances <= radius + 1e-12].sum()
            ratios.append(mass / radius**dimension)

    low, high = min(ratios), max(ratios)
    return AhlforsReport(
        constant=max(high, 1.0 / low),
        min_ratio=low,
        max_ratio=high,
        radii=tuple(radii),
        samples=len(ratios),
    )


def uniform_scalability_defect(
    graph: ApproximationGraph, measure: Optional[MeasureVector] = None
) -> float:
    """Largest deviation of the normalized push-forwards of a measure from the measure.

    For every level-``k`` cell, ``k <= n``, the restriction of ``measure`` to the cell
    is pulled back to the level-``(n - k)`` graph with :func:`cell_pushforward` and
    compared with ``measure`` aggregated to level ``n - k``. Self-similar measures have
    a zero defect.

    Parameters
    ----------
    graph
        The level-``n`` graph.
    measure
        The measure to check. Defaults to the uniform measure of ``graph``.

    Returns
    -------
    float
        The largest absolute weight difference over all cells and source cells.
    """
    spec = graph.spec
    if spec is None:
        raise GraphMismatch(f"{graph} carries no cell structure")
    if measure is None:
        measure = uniform_measure(graph)
    elif measure.graph is not graph:
        raise GraphMismatch("The measure does not live on the given graph")

    weights = measure.normalized()
    defect = 0.0
    for k in range(graph.level + 1):
        # The level-(n - k) ancestors own contiguous blocks of `alphabet_size ** k` cells
        coarse = weights.reshape(-1, spec.alphabet_size**k).sum(axis=1)
        for word in itertools.product(range(spec.alphabet_size), repeat=k):
            pushed = cell_pushforward(measure, CellMap(CellAddress(word), graph))
            defect = max(defect, float(np.abs(pushed.weights - coarse).max()))
    return defect


def hausdorff_dims() -> Dict[str, float]:
    """Similarity dimensions of the registered specs."""
    return {name: factory().hausdorff_dim for name, factory in _REGISTRY.items()}


def expected_dimension(spec: FractalSpec) -> float:
    """``log(alphabet_size) / log(1 / r)`` computed independently of the spec."""
    return math.log(spec.alphabet_size) / -math.log(float(spec.contraction_ratio))
