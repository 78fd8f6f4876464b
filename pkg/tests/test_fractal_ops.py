import math

import numpy as np
import pytest

from confdimlab import (
    CapExceeded,
    CellAddress,
    CellMap,
    GraphMismatch,
    InvalidSpec,
    MeasureVector,
    RadiusOutOfRange,
    RatioMismatch,
    UnknownSpec,
    ZeroMass,
    ahlfors_regularity,
    build_graph,
    build_vertex_graph,
    cell_pushforward,
    factor_indices,
    max_degree,
    metric_ball,
    product_spec,
    registered_specs,
    resolve_spec,
    uniform_measure,
    uniform_scalability_defect,
)
from confdimlab.fractal_ops import expected_dimension, hausdorff_dims

HAUSDORFF_DIMS = {
    "interval": 1.0,
    "square": 2.0,
    "carpet": math.log(8) / math.log(3),
    "gasket": math.log(3) / math.log(2),
    "sponge": math.log(20) / math.log(3),
}


def _cell_at(graph, *coords):
    return int(np.nonzero(np.all(graph.coords == coords, axis=1))[0][0])


def test_registry_names():
    assert registered_specs() == ["carpet", "gasket", "interval", "sponge", "square"]


@pytest.mark.parametrize("name, dimension", HAUSDORFF_DIMS.items())
def test_hausdorff_dimensions(name, dimension):
    spec = resolve_spec(name)
    assert spec.hausdorff_dim == pytest.approx(dimension, rel=1e-12)
    assert expected_dimension(spec) == pytest.approx(dimension, rel=1e-12)
    assert hausdorff_dims()[name] == pytest.approx(dimension, rel=1e-12)


def test_unknown_spec():
    with pytest.raises(UnknownSpec, match="Unknown spec: moon"):
        resolve_spec("moon")
    with pytest.raises(UnknownSpec):
        resolve_spec("carpet*moon")


def test_product_needs_equal_ratios():
    with pytest.raises(RatioMismatch, match="ratios 1/2 and 1/3 differ"):
        product_spec(resolve_spec("interval"), resolve_spec("carpet"))


@pytest.mark.parametrize(
    "expression, name, alphabet_size, dimension",
    [
        ("carpet^2", "carpet^2", 64, 4),
        ("interval*interval", "interval*interval", 4, 2),
        ("gasketxgasket", "gasket*gasket", 9, 6),
        ("interval * gasket", "interval*gasket", 6, 4),
    ],
)
def test_product_expressions(expression, name, alphabet_size, dimension):
    spec = resolve_spec(expression)
    assert spec.name == name
    assert spec.alphabet_size == alphabet_size
    assert spec.dimension == dimension
    assert len(spec.factors) == 2


def test_product_dimension_is_additive():
    spec = resolve_spec("interval*gasket")
    assert spec.hausdorff_dim == pytest.approx(
        HAUSDORFF_DIMS["interval"] + HAUSDORFF_DIMS["gasket"]
    )


@pytest.mark.parametrize(
    "name, level, num_cells, num_edges",
    [
        ("interval", 0, 1, 0),
        ("interval", 5, 32, 31),
        ("square", 1, 4, 6),
        ("square", 2, 16, 42),
        ("carpet", 1, 8, 12),
        ("gasket", 1, 3, 3),
        ("gasket", 2, 9, 12),
        ("sponge", 1, 20, None),
    ],
)
def test_graph_sizes(name, level, num_cells, num_edges):
    graph = build_graph(resolve_spec(name), level)
    assert graph.num_cells == num_cells
    if num_edges is not None:
        assert graph.edges.shape[0] == num_edges
    assert np.all(graph.edges[:, 0] < graph.edges[:, 1])
    assert graph.cell_measure.sum() == pytest.approx(1.0)


def test_interval_cells_are_in_address_order():
    graph = build_graph(resolve_spec("interval"), 3)
    np.testing.assert_array_equal(graph.coords[:, 0], np.arange(8))
    np.testing.assert_array_equal(graph.edges, [[i, i + 1] for i in range(7)])


@pytest.mark.parametrize("name, level, degree", [("interval", 3, 2), ("square", 2, 8), ("gasket", 3, 3)])
def test_max_degree(name, level, degree):
    assert max_degree(build_graph(resolve_spec(name), level)) == degree


def test_build_graph_cap():
    with pytest.raises(CapExceeded, match="above the cap of 100"):
        build_graph(resolve_spec("carpet"), 3, cap=100)


def test_build_graph_rejects_negative_levels():
    with pytest.raises(ValueError, match="nonnegative"):
        build_graph(resolve_spec("carpet"), -1)


@pytest.mark.parametrize(
    "level, num_vertices, num_edges",
    [(0, 3, 3), (1, 6, 9), (2, 15, 27), (3, 42, 81)],
)
def test_gasket_vertex_graph(level, num_vertices, num_edges):
    graph = build_vertex_graph(resolve_spec("gasket"), level)
    assert graph.num_nodes == num_vertices
    assert graph.edges.shape[0] == num_edges
    assert graph.boundary.shape == (3,)
    np.testing.assert_array_equal(np.bincount(graph.edge_cell), np.full(3**level, 3))


def test_interval_vertex_graph():
    graph = build_vertex_graph(resolve_spec("interval"), 3)
    assert graph.num_nodes == 9
    np.testing.assert_array_equal(graph.boundary, [0, 8])
    np.testing.assert_array_equal(graph.edge_cell, np.arange(8))


def test_vertex_graph_needs_finitely_ramified_spec():
    with pytest.raises(InvalidSpec, match="no vertex graph"):
        build_vertex_graph(resolve_spec("carpet"), 1)


def test_metric_ball_on_interval():
    graph = build_graph(resolve_spec("interval"), 3)
    np.testing.assert_array_equal(metric_ball(graph, 3, 1 / 8), [2, 3, 4])
    np.testing.assert_array_equal(metric_ball(graph, 3, 0.0), [3])
    np.testing.assert_array_equal(metric_ball(graph, CellAddress((0, 1, 1)), 1 / 8), [2, 3, 4])

    with pytest.raises(RadiusOutOfRange):
        metric_ball(graph, 3, -0.1)
    with pytest.raises(GraphMismatch, match="outside"):
        metric_ball(graph, 8, 0.1)


def test_metric_ball_uses_the_sup_metric(square_graph):
    center = _cell_at(square_graph, 3, 3)
    ball = metric_ball(square_graph, center, 1 / 8)
    assert ball.shape == (9,)
    assert set(map(tuple, square_graph.coords[ball])) == {
        (x, y) for x in (2, 3, 4) for y in (2, 3, 4)
    }


def test_pushforward_of_uniform_measure_is_uniform(carpet_graph):
    pushed = cell_pushforward(uniform_measure(carpet_graph), CellMap(CellAddress((3,)), carpet_graph))
    assert pushed.graph.level == 1
    np.testing.assert_allclose(pushed.weights, np.full(8, 1 / 8))


def test_pushforward_normalizes_the_restriction():
    graph = build_graph(resolve_spec("interval"), 2)
    measure = MeasureVector(graph, np.array([0.1, 0.3, 0.2, 0.4]))
    pushed = cell_pushforward(measure, CellMap(CellAddress((1,)), graph))
    np.testing.assert_allclose(pushed.weights, [1 / 3, 2 / 3])


def test_pushforward_of_empty_cell():
    graph = build_graph(resolve_spec("interval"), 2)
    measure = MeasureVector(graph, np.array([0.5, 0.5, 0.0, 0.0]))
    with pytest.raises(ZeroMass):
        cell_pushforward(measure, CellMap(CellAddress((1,)), graph))


def test_factor_indices_match_the_factor_coordinates(square_graph):
    index_x, index_y = factor_indices(square_graph)
    np.testing.assert_array_equal(index_x, square_graph.coords[:, 0])
    np.testing.assert_array_equal(index_y, square_graph.coords[:, 1])


def test_factor_indices_of_irreducible_graph(carpet_graph):
    with pytest.raises(GraphMismatch, match="not a product graph"):
        factor_indices(carpet_graph)


@pytest.mark.parametrize("name, level", [("carpet", 2), ("gasket", 3), ("interval", 5)])
def test_self_similar_measures_are_regular(name, level):
    graph = build_graph(resolve_spec(name), level)
    report = ahlfors_regularity(graph)
    assert 1.0 <= report.constant < 20.0
    assert report.samples == min(16, graph.num_cells) * len(report.radii)
    assert uniform_scalability_defect(graph) == pytest.approx(0.0, abs=1e-12)


def test_bernoulli_measure_is_scalable():
    graph = build_graph(resolve_spec("interval"), 3)
    letter = np.array([0.3, 0.7])
    weights = np.kron(np.kron(letter, letter), letter)
    assert uniform_scalability_defect(graph, MeasureVector(graph, weights)) == pytest.approx(
        0.0, abs=1e-12
    )


def test_scalability_defect_of_a_non_uniform_measure():
    graph = build_graph(resolve_spec("interval"), 2)
    measure = MeasureVector(graph, np.array([0.4, 0.1, 0.1, 0.4]))
    # Both halves pull back to (0.8, 0.2) or (0.2, 0.8) against the level-1 masses (0.5, 0.5)
    assert uniform_scalability_defect(graph, measure) == pytest.approx(0.3)


def test_scalability_defect_of_a_foreign_measure(interval_graph):
    graph = build_graph(resolve_spec("interval"), 2)
    with pytest.raises(GraphMismatch, match="does not live"):
        uniform_scalability_defect(interval_graph, MeasureVector(graph, np.full(4, 0.25)))


def test_product_graphs_multiply_cell_counts(create_graph):
    product = create_graph("carpet^2", 1)
    assert product.num_cells == create_graph("carpet", 1).num_cells ** 2
    assert create_graph("carpet^2", 1) is product
