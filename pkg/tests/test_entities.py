import math
from fractions import Fraction

import numpy as np
import pytest

from confdimlab import (
    ApproximationGraph,
    CellAddress,
    CellMap,
    FractalSpec,
    GraphMismatch,
    InvalidSpec,
    MeasureVector,
    WeightFunction,
    build_graph,
    resolve_spec,
)

ZERO = Fraction(0)
HALF = Fraction(1, 2)
LINE = (("cube", 1),)


@pytest.fixture
def carpet_spec():
    return resolve_spec("carpet")


@pytest.fixture
def hand_graph():
    return ApproximationGraph.from_edge_list(3, [(0, 1), (2, 0)], name="V")


@pytest.mark.parametrize(
    "entity_name, expected",
    [
        ("carpet_spec", "FractalSpec('carpet')"),
        ("interval_graph", "ApproximationGraph('interval', level=4, cells=16)"),
        ("gasket_vertex_graph", "VertexGraph('gasket', level=1, vertices=6)"),
        ("hand_graph", "ApproximationGraph('V', level=0, cells=3)"),
    ],
)
def test_entity_str_method(entity_name, expected, request):
    entity = request.getfixturevalue(entity_name)
    assert str(entity) == expected


@pytest.mark.parametrize(
    "word, expected",
    [((0, 2, 1), "CellAddress(0.2.1)"), ((), "CellAddress(-)")],
)
def test_cell_address_str_method(word, expected):
    assert str(CellAddress(word)) == expected


def test_spec_rejects_wrong_translation_count():
    with pytest.raises(InvalidSpec, match="needs one translation per letter"):
        FractalSpec("bad", 3, HALF, ((ZERO,), (HALF,)), LINE)


def test_spec_rejects_non_integer_scale():
    with pytest.raises(InvalidSpec, match="1/m for an integer m"):
        FractalSpec("bad", 2, Fraction(2, 5), ((ZERO,), (HALF,)), LINE)


def test_spec_rejects_colliding_letters():
    with pytest.raises(InvalidSpec, match="collide"):
        FractalSpec("bad", 2, HALF, ((ZERO,), (ZERO,)), LINE)


def test_spec_rejects_off_lattice_translations():
    spec = FractalSpec("bad", 2, HALF, ((ZERO,), (Fraction(1, 4),)), LINE)
    with pytest.raises(InvalidSpec, match="lattice"):
        _ = spec.lattice_translations


def test_spec_digest_is_stable(carpet_spec):
    assert carpet_spec.digest() == resolve_spec("carpet").digest()
    assert carpet_spec.digest() != resolve_spec("gasket").digest()
    assert len(carpet_spec.digest()) == 32


def test_address_and_index_agree():
    graph = build_graph(resolve_spec("carpet"), 2)
    assert graph.address(13) == CellAddress((1, 5))
    assert graph.index_of(CellAddress((1, 5))) == 13


def test_index_of_rejects_foreign_addresses(interval_graph):
    with pytest.raises(GraphMismatch):
        interval_graph.index_of(CellAddress((0, 1)))
    with pytest.raises(GraphMismatch, match="outside the alphabet"):
        interval_graph.index_of(CellAddress((0, 1, 2, 0)))


def test_interval_distances_and_margins():
    graph = build_graph(resolve_spec("interval"), 2)
    np.testing.assert_allclose(graph.distances_from(0), [0.0, 0.25, 0.5, 0.75])
    np.testing.assert_allclose(graph.boundary_margin(), [0.125, 0.375, 0.375, 0.125])


def test_gasket_embedding_is_the_centroid():
    graph = build_graph(resolve_spec("gasket"), 0)
    np.testing.assert_allclose(graph.embedding[0], [0.5, math.sqrt(3) / 6])


def test_hand_graph_has_no_geometry(hand_graph):
    assert not hand_graph.has_geometry
    np.testing.assert_array_equal(hand_graph.edges, [[0, 1], [0, 2]])
    with pytest.raises(GraphMismatch, match="carries no geometry"):
        hand_graph.distances_from(0)


def test_cell_map_image_is_a_contiguous_block():
    graph = build_graph(resolve_spec("carpet"), 2)
    np.testing.assert_array_equal(
        CellMap(CellAddress((3,)), graph).image_indices(), np.arange(24, 32)
    )
    assert CellMap(CellAddress((3,)), graph).source_level == 1


def test_measure_vector_validation(interval_graph):
    with pytest.raises(ValueError, match="finite and nonnegative"):
        MeasureVector(interval_graph, -np.ones(16))
    with pytest.raises(GraphMismatch, match="16 cells"):
        MeasureVector(interval_graph, np.ones(3))

    measure = MeasureVector(interval_graph, np.arange(16.0))
    assert measure.total == 120.0
    assert measure.mass([1, 2, 3]) == 6.0
    assert measure.normalized().sum() == pytest.approx(1.0)


def test_weight_function_validation(hand_graph):
    with pytest.raises(ValueError, match="nonnegative"):
        WeightFunction(hand_graph, np.array([1.0, -1.0, 0.0]))
    with pytest.raises(GraphMismatch):
        WeightFunction(hand_graph, np.ones(4))
