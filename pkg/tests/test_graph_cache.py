import logging

import numpy as np
import pytest

from confdimlab import CapExceeded, build_graph, load_or_build_graph, resolve_spec
from confdimlab.graph_cache import MAGIC, cache_path, read_graph, write_graph


def test_graph_is_cached(graph_cache_dir):
    spec = resolve_spec("carpet")
    built = load_or_build_graph(spec, 2)

    path = cache_path(spec, 2)
    assert path.parent == graph_cache_dir
    assert path.name.endswith("-2.cdlg")
    assert path.read_bytes()[:4] == MAGIC

    cached = load_or_build_graph(spec, 2)
    np.testing.assert_array_equal(cached.edges, built.edges)
    np.testing.assert_array_equal(cached.coords, built.coords)
    assert cached.num_cells == 64


def test_cache_matches_a_fresh_build(tmp_path):
    spec = resolve_spec("gasket")
    path = tmp_path / "gasket.cdlg"
    write_graph(build_graph(spec, 3), path)

    fresh = build_graph(spec, 3)
    cached = read_graph(spec, 3, path)
    np.testing.assert_array_equal(cached.edges, fresh.edges)
    np.testing.assert_allclose(cached.cell_measure, fresh.cell_measure)


def test_cache_of_another_spec_is_rejected(tmp_path):
    path = tmp_path / "carpet.cdlg"
    write_graph(build_graph(resolve_spec("carpet"), 1), path)

    with pytest.raises(ValueError, match="another spec or level"):
        read_graph(resolve_spec("gasket"), 1, path)
    with pytest.raises(ValueError, match="another spec or level"):
        read_graph(resolve_spec("carpet"), 2, path)


def test_corrupt_cache_is_rebuilt(graph_cache_dir, caplog):
    spec = resolve_spec("interval")
    path = cache_path(spec, 4)
    path.write_bytes(b"garbage")

    caplog.set_level(logging.WARNING, logger="confdimlab")
    graph = load_or_build_graph(spec, 4)
    assert graph.edges.shape == (15, 2)
    assert any("Rebuilding graph cache" in message for message in caplog.messages)

    # The rebuilt graph replaced the corrupt file
    np.testing.assert_array_equal(read_graph(spec, 4, path).edges, graph.edges)


def test_cache_respects_the_cap(graph_cache_dir):
    with pytest.raises(CapExceeded):
        load_or_build_graph(resolve_spec("sponge"), 2, cap=100)
    assert list(graph_cache_dir.iterdir()) == []
