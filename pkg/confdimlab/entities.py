from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from .errors import GraphMismatch, InvalidSpec
from .type_stubs import FloatArray, IntArray, NetworkT

# Geometry kinds of a spec block: axis-aligned cubes or barycentric triangles
CUBE = "cube"
SIMPLEX = "simplex"

_SQRT3_HALF = math.sqrt(3.0) / 2.0


@dataclass(frozen=True)
class FractalSpec:
    """A combinatorial description of a self-similar set.

    The maps of the iterated function system are ``x -> r x + t_D`` acting on a
    reference cell (a unit cube, a standard simplex, or a product of those). Only the
    translations ``t_D`` are stored; they decide cell adjacency and ball membership.

    Parameters
    ----------
    name
        Registry name of the spec, e.g. ``"carpet"`` or ``"interval*gasket"``.
    alphabet_size
        The number of maps of the system.
    contraction_ratio
        The common contraction ratio ``r`` of all maps.
    translations
        One translation vector per letter, in exact rational coordinates. Product
        specs concatenate the translations of their factors.
    blocks
        The geometry of consecutive coordinate blocks as ``(kind, width)`` pairs, with
        kind ``"cube"`` (``width`` axes) or ``"simplex"`` (3 barycentric coordinates).
    factors
        The factor specs of a product spec; empty for irreducible specs.
    """

    name: str
    """Stored registry name from the constructor."""

    alphabet_size: int
    """Stored number of letters from the constructor."""

    contraction_ratio: Fraction
    """Stored contraction ratio from the constructor."""

    translations: Tuple[Tuple[Fraction, ...], ...]
    """Stored per-letter translation vectors from the constructor."""

    blocks: Tuple[Tuple[str, int], ...]
    """Stored coordinate blocks from the constructor."""

    factors: Tuple["FractalSpec", ...] = ()
    """Stored factor specs from the constructor."""

    def __post_init__(self) -> None:
        if self.alphabet_size < 1 or len(self.translations) != self.alphabet_size:
            raise InvalidSpec(
                f"Spec {self.name} needs one translation per letter, "
                f"got {len(self.translations)} for {self.alphabet_size} letters"
            )
        if not 0 < self.contraction_ratio < 1:
            raise InvalidSpec(
                f"Contraction ratio must lie in (0, 1): {self.contraction_ratio}"
            )
        if self.contraction_ratio.numerator != 1:
            raise InvalidSpec(
                f"Contraction ratio must be 1/m for an integer m: {self.contraction_ratio}"
            )
        if any(len(t) != self.dimension for t in self.translations):
            raise InvalidSpec(f"Translations of {self.name} do not match its blocks")
        if len(set(self.translations)) != self.alphabet_size:
            raise InvalidSpec(f"Letters of {self.name} collide in the geometry model")

    @property
    def geometry_model(self) -> Tuple[Tuple[Fraction, ...], ...]:
        """The per-letter translation vectors."""
        return self.translations

    @property
    def dimension(self) -> int:
        """The number of coordinates of the reference geometry."""
        return sum(width for _, width in self.blocks)

    @property
    def scale(self) -> int:
        """The integer ``m = 1 / r``."""
        return self.contraction_ratio.denominator

    @property
    def hausdorff_dim(self) -> float:
        """The similarity dimension ``log(alphabet_size) / log(1 / r)``."""
        return math.log(self.alphabet_size) / math.log(self.scale)

    @cached_property
    def lattice_translations(self) -> IntArray:
        """The translations in units of ``r``, as an integer array."""
        lattice = np.zeros((self.alphabet_size, self.dimension), dtype=np.int64)
        for letter, translation in enumerate(self.translations):
            for axis, value in enumerate(translation):
                scaled = value * self.scale
                if scaled.denominator != 1:
                    raise InvalidSpec(
                        f"Translations of {self.name} must lie on the lattice of step {self.contraction_ratio}"
                    )
                lattice[letter, axis] = int(scaled)
        return lattice

    def canonical(self) -> str:
        """A canonical text description, stable across processes."""
        translations = ";".join(",".join(str(v) for v in t) for t in self.translations)
        blocks = ",".join(f"{kind}:{width}" for kind, width in self.blocks)
        return f"{self.name}|{self.alphabet_size}|{self.contraction_ratio}|{blocks}|{translations}"

    def digest(self) -> bytes:
        """SHA-256 digest of the canonical description."""
        return hashlib.sha256(self.canonical().encode("utf-8")).digest()

    def __str__(self) -> str:
        return f"FractalSpec({repr(self.name)})"


@dataclass(frozen=True)
class CellAddress:
    """The address of a cell, i.e. the word ``D_1 ... D_n`` of the composed maps."""

    word: Tuple[int, ...]
    """Stored letters of the address."""

    @property
    def level(self) -> int:
        return len(self.word)

    def __str__(self) -> str:
        return f"CellAddress({'.'.join(str(letter) for letter in self.word) or '-'})"


@dataclass(frozen=True, eq=False)
class ApproximationGraph:
    """The level-``n`` cell graph of a spec.

    Cells are indexed lexicographically by their address, so the cells below a
    level-``k`` cell form one contiguous index range.

    Parameters
    ----------
    spec
        The spec the graph approximates; ``None`` for hand-made graphs.
    level
        The level ``n``.
    coords
        Lattice coordinates of every cell, in units of the cell size. ``None`` for
        hand-made graphs.
    edges
        Sorted ``(i, j)`` pairs with ``i < j`` of cells whose closed cells intersect.
    cell_measure
        The self-similar measure of every cell.
    """

    spec: Optional[FractalSpec]
    level: int
    coords: Optional[IntArray]
    edges: IntArray
    cell_measure: FloatArray
    name: str = ""

    @classmethod
    def from_edge_list(
        cls,
        num_cells: int,
        edges: Sequence[Tuple[int, int]],
        cell_measure: Optional[Sequence[float]] = None,
        name: str = "custom",
    ) -> "ApproximationGraph":
        """Build a graph without geometry from an explicit edge list.

        Useful for hand-computed instances; metric operations are unavailable on it.
        """
        pairs = sorted({(min(i, j), max(i, j)) for i, j in edges if i != j})
        edge_array = np.array(pairs, dtype=np.int64).reshape(-1, 2)
        if cell_measure is None:
            measure = np.full(num_cells, 1.0 / num_cells)
        else:
            measure = np.asarray(cell_measure, dtype=np.float64)
        return cls(None, 0, None, edge_array, measure, name)

    @property
    def num_cells(self) -> int:
        return int(self.cell_measure.shape[0])

    @property
    def num_nodes(self) -> int:
        return self.num_cells

    @property
    def has_geometry(self) -> bool:
        return self.spec is not None and self.coords is not None

    @cached_property
    def adjacency(self) -> sparse.csr_matrix:
        """Symmetric 0/1 adjacency matrix of the cells."""
        return _symmetric_adjacency(self.num_cells, self.edges)

    @property
    def cell_diameter(self) -> float:
        """Diameter of a level-``n`` cell; the reference cell has diameter 1."""
        if self.spec is None:
            return 1.0
        return float(self.spec.contraction_ratio**self.level)

    @property
    def diameter(self) -> float:
        return 1.0

    @cached_property
    def degrees(self) -> IntArray:
        return np.diff(self.adjacency.indptr).astype(np.int64)

    @cached_property
    def embedding(self) -> FloatArray:
        """Cell centers in the reference geometry, one block after the other.

        Simplex blocks are mapped to the plane with the corners ``(0, 0)``, ``(1, 0)``
        and ``(1/2, sqrt(3)/2)``.
        """
        spec, coords = self._require_geometry()
        size = self.cell_diameter
        columns = []
        axis = 0
        for kind, width in spec.blocks:
            block = coords[:, axis : axis + width].astype(np.float64)
            if kind == CUBE:
                columns.append((block + 0.5) * size)
            else:
                barycentric = (block + 1.0 / 3.0) * size
                columns.append(
                    np.column_stack(
                        (
                            barycentric[:, 1] + barycentric[:, 2] / 2.0,
                            barycentric[:, 2] * _SQRT3_HALF,
                        )
                    )
                )
            axis += width
        return np.hstack(columns)

    @cached_property
    def _metric_blocks(self) -> Tuple[Tuple[str, int, int], ...]:
        """Embedding column ranges of every block, with the block kind."""
        spec, _ = self._require_geometry()
        blocks = []
        start = 0
        for kind, width in spec.blocks:
            embedded = width if kind == CUBE else 2
            blocks.append((kind, start, start + embedded))
            start += embedded
        return tuple(blocks)

    def distances_from(self, index: int) -> FloatArray:
        """Distances of all cell centers to the center of cell ``index``.

        Cube blocks use the sup-norm, simplex blocks the planar Euclidean norm, and
        blocks of a product are combined by the maximum.
        """
        delta = self.embedding - self.embedding[index]
        distance = np.zeros(self.num_cells)
        for kind, start, stop in self._metric_blocks:
            block = delta[:, start:stop]
            if kind == CUBE:
                block_distance = np.abs(block).max(axis=1)
            else:
                block_distance = np.sqrt((block**2).sum(axis=1))
            distance = np.maximum(distance, block_distance)
        return distance

    def boundary_margin(self) -> FloatArray:
        """Distance of every cell center to the boundary of the reference cell."""
        spec, coords = self._require_geometry()
        margin = np.full(self.num_cells, np.inf)
        size = self.cell_diameter
        axis = 0
        for kind, width in spec.blocks:
            block = coords[:, axis : axis + width].astype(np.float64)
            if kind == CUBE:
                centers = (block + 0.5) * size
                block_margin = np.minimum(centers, 1.0 - centers).min(axis=1)
            else:
                barycentric = (block + 1.0 / 3.0) * size
                block_margin = barycentric.min(axis=1) * _SQRT3_HALF
            margin = np.minimum(margin, block_margin)
            axis += width
        return margin

    def address(self, index: int) -> CellAddress:
        """The address of the cell with the given index."""
        if self.spec is None:
            raise GraphMismatch(f"Graph {self.name} has no cell addresses")
        word = []
        for _ in range(self.level):
            index, letter = divmod(index, self.spec.alphabet_size)
            word.append(letter)
        return CellAddress(tuple(reversed(word)))

    def index_of(self, address: CellAddress) -> int:
        """The index of the cell with the given address."""
        if self.spec is None or address.level != self.level:
            raise GraphMismatch(f"{address} is not a cell of {self}")
        index = 0
        for letter in address.word:
            if not 0 <= letter < self.spec.alphabet_size:
                raise GraphMismatch(f"{address} uses a letter outside the alphabet")
            index = index * self.spec.alphabet_size + letter
        return index

    def _require_geometry(self) -> Tuple[FractalSpec, IntArray]:
        if self.spec is None or self.coords is None:
            raise GraphMismatch(f"Graph {self.name} carries no geometry")
        return self.spec, self.coords

    def __str__(self) -> str:
        return f"ApproximationGraph({repr(self.name)}, level={self.level}, cells={self.num_cells})"


@dataclass(frozen=True, eq=False)
class VertexGraph:
    """The graph of cell corners of a post-critically finite approximation.

    Every edge is a side of exactly one level-``n`` cell, which owns its energy.

    Parameters
    ----------
    cells
        The level-``n`` cell graph the vertices belong to.
    vertex_coords
        Lattice coordinates of the vertices.
    edges
        Sorted vertex pairs, one per cell side.
    edge_cell
        The owning cell of every edge.
    boundary
        Indices of the corners of the reference cell.
    """

    cells: ApproximationGraph
    vertex_coords: IntArray
    edges: IntArray
    edge_cell: IntArray
    boundary: IntArray

    @property
    def num_nodes(self) -> int:
        return int(self.vertex_coords.shape[0])

    @property
    def level(self) -> int:
        return self.cells.level

    @property
    def spec(self) -> Optional[FractalSpec]:
        return self.cells.spec

    @cached_property
    def adjacency(self) -> sparse.csr_matrix:
        return _symmetric_adjacency(self.num_nodes, self.edges)

    def __str__(self) -> str:
        return f"VertexGraph({repr(self.cells.name)}, level={self.level}, vertices={self.num_nodes})"


@dataclass(frozen=True, eq=False)
class MeasureVector:
    """A finite measure on the cells of a graph."""

    graph: ApproximationGraph
    weights: FloatArray

    def __post_init__(self) -> None:
        if self.weights.shape != (self.graph.num_cells,):
            raise GraphMismatch(
                f"Measure has {self.weights.shape[0]} weights for {self.graph.num_cells} cells"
            )
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
            raise ValueError("Measure weights must be finite and nonnegative")

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    def mass(self, cells: Sequence[int]) -> float:
        """The mass of a set of cells, given by index."""
        return float(self.weights[np.asarray(list(cells), dtype=np.int64)].sum())

    def normalized(self) -> FloatArray:
        """The weights divided by the total mass (all zeros for the zero measure)."""
        total = self.total
        if total == 0.0:
            return np.zeros_like(self.weights)
        return self.weights / total


@dataclass(frozen=True, eq=False)
class CellMap:
    """The similitude sending the level-``(n - k)`` graph onto a level-``k`` cell.

    Parameters
    ----------
    target_cell
        The level-``k`` cell receiving the image.
    graph
        The level-``n`` graph the image cells belong to.
    """

    target_cell: CellAddress
    graph: ApproximationGraph

    @property
    def source_level(self) -> int:
        return self.graph.level - self.target_cell.level

    def image_indices(self) -> IntArray:
        """Level-``n`` indices of the images of the source cells, in source order."""
        if self.graph.spec is None or self.source_level < 0:
            raise GraphMismatch(f"{self.target_cell} is not above the cells of {self.graph}")
        prefix = _prefix_index(self.target_cell, self.graph.spec.alphabet_size)
        block = self.graph.spec.alphabet_size**self.source_level
        return np.arange(prefix * block, (prefix + 1) * block, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class DiscreteFunction:
    """A real function on the nodes of a cell graph or a vertex graph."""

    graph: NetworkT
    values: FloatArray

    def __post_init__(self) -> None:
        if self.values.shape != (self.graph.num_nodes,):
            raise GraphMismatch(
                f"Function has {self.values.shape[0]} values for {self.graph.num_nodes} nodes"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("Function values must be finite")


@dataclass(frozen=True, eq=False)
class WeightFunction:
    """A nonnegative weight ``rho`` on the cells of a graph."""

    graph: ApproximationGraph
    rho: FloatArray = field(repr=False)

    def __post_init__(self) -> None:
        if self.rho.shape != (self.graph.num_cells,):
            raise GraphMismatch(
                f"Weight has {self.rho.shape[0]} entries for {self.graph.num_cells} cells"
            )
        if np.any(self.rho < 0) or not np.all(np.isfinite(self.rho)):
            raise ValueError("Weights must be finite and nonnegative")


def _prefix_index(address: CellAddress, alphabet_size: int) -> int:
    index = 0
    for letter in address.word:
        index = index * alphabet_size + letter
    return index


def _symmetric_adjacency(num_nodes: int, edges: IntArray) -> sparse.csr_matrix:
    rows = np.concatenate((edges[:, 0], edges[:, 1]))
    cols = np.concatenate((edges[:, 1], edges[:, 0]))
    data = np.ones(rows.shape[0], dtype=np.float64)
    matrix = sparse.csr_matrix((data, (rows, cols)), shape=(num_nodes, num_nodes))
    matrix.sort_indices()
    return matrix
