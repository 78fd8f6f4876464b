# So that sphinx picks up on the type aliases
from __future__ import annotations

from pathlib import Path
from typing import Callable, Dict, Tuple

import pytest

from .config_params import ConfigParams
from .entities import ApproximationGraph, VertexGraph
from .fractal_ops import build_graph, build_vertex_graph, resolve_spec
from .type_stubs import YieldFixture


@pytest.fixture()
def interval_graph() -> ApproximationGraph:
    """The level-4 interval graph: a path of 16 cells.

    Returns
    -------
    ApproximationGraph
    """
    return build_graph(resolve_spec("interval"), 4)


@pytest.fixture()
def square_graph() -> ApproximationGraph:
    """The level-3 square graph, 64 cells with king-move adjacency.

    Returns
    -------
    ApproximationGraph
    """
    return build_graph(resolve_spec("square"), 3)


@pytest.fixture()
def carpet_graph() -> ApproximationGraph:
    """The level-2 Sierpinski carpet graph of 64 cells.

    Returns
    -------
    ApproximationGraph
    """
    return build_graph(resolve_spec("carpet"), 2)


@pytest.fixture()
def gasket_graph() -> ApproximationGraph:
    """The level-2 Sierpinski gasket cell graph of 9 cells.

    Returns
    -------
    ApproximationGraph
    """
    return build_graph(resolve_spec("gasket"), 2)


@pytest.fixture()
def gasket_vertex_graph() -> VertexGraph:
    """The level-1 gasket vertex graph: 6 vertices, 9 edges, 3 cells.

    Returns
    -------
    VertexGraph
    """
    return build_vertex_graph(resolve_spec("gasket"), 1)


@pytest.fixture()
def graph_cache_dir(tmp_path: Path) -> YieldFixture[Path]:
    """A temporary graph cache directory, installed in ``ConfigParams``.

    Yields
    ------
    Path
        The directory. The previous cache directory is restored afterwards.
    """
    previous = ConfigParams.cache_dir
    ConfigParams.cache_dir = str(tmp_path)

    yield tmp_path

    # Clean up
    ConfigParams.cache_dir = previous


@pytest.fixture()
def create_graph() -> YieldFixture[Callable[[str, int], ApproximationGraph]]:
    """A factory fixture building the graph of any spec expression and level.

    Graphs are memoized for the duration of the test.

    Example
    -------
    .. code-block:: python

        def test_products_have_more_cells(create_graph):
            assert create_graph("carpet^2", 1).num_cells == 64

    Yields
    ------
    Callable[[str, int], ApproximationGraph]
        A function taking a spec expression and a level.
    """
    built: Dict[Tuple[str, int], ApproximationGraph] = {}

    def _create_graph(expression: str, level: int) -> ApproximationGraph:
        key = (expression, level)
        if key not in built:
            built[key] = build_graph(resolve_spec(expression), level)
        return built[key]

    yield _create_graph

    # Clean up
    built.clear()
