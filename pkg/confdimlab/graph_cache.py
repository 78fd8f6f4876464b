from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .config_params import ConfigParams
from .entities import ApproximationGraph, FractalSpec
from .errors import CapExceeded
from .fractal_ops import _lattice_coords, build_graph
from .utils import logger

MAGIC = b"CDLG"
FORMAT_VERSION = 1

# magic, version, reserved, spec digest, level, cell count, edge count
_HEADER = struct.Struct("<4sHH32sIQQ")


def cache_path(spec: FractalSpec, level: int, cache_dir: Optional[Union[str, Path]] = None) -> Path:
    """The cache file of the level-``n`` graph of ``spec``."""
    directory = Path(ConfigParams.cache_dir if cache_dir is None else cache_dir)
    return directory / f"{spec.digest().hex()[:16]}-{level}.cdlg"


def write_graph(graph: ApproximationGraph, path: Union[str, Path]) -> None:
    """Write the edge list of a graph in the little-endian cache format.

    The file is replaced atomically, so concurrent readers see either the old or
    the new content.
    """
    if graph.spec is None:
        raise ValueError(f"Only graphs built from a spec can be cached: {graph}")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = _HEADER.pack(
        MAGIC,
        FORMAT_VERSION,
        0,
        graph.spec.digest(),
        graph.level,
        graph.num_cells,
        graph.edges.shape[0],
    )
    body = np.ascontiguousarray(graph.edges, dtype="<i8").tobytes()

    fd, tmp_name = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(header)
            handle.write(body)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def read_graph(spec: FractalSpec, level: int, path: Union[str, Path]) -> ApproximationGraph:
    """Read a cached graph, checking it was written for ``spec`` at ``level``."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"Truncated graph cache: {path}")

    magic, version, _, digest, stored_level, num_cells, num_edges = _HEADER.unpack_from(data)
    if magic != MAGIC or version != FORMAT_VERSION:
        raise ValueError(f"Not a version {FORMAT_VERSION} graph cache: {path}")
    if digest != spec.digest() or stored_level != level:
        raise ValueError(f"Graph cache {path} belongs to another spec or level")
    if num_cells != spec.alphabet_size**level:
        raise ValueError(f"Graph cache {path} has an inconsistent cell count")
    if len(data) != _HEADER.size + 16 * num_edges:
        raise ValueError(f"Truncated graph cache: {path}")

    edges = np.frombuffer(data, dtype="<i8", offset=_HEADER.size).reshape(-1, 2)
    measure = np.full(num_cells, 1.0 / num_cells)
    return ApproximationGraph(
        spec,
        level,
        _lattice_coords(spec, level),
        edges.astype(np.int64),
        measure,
        spec.name,
    )


def load_or_build_graph(
    spec: FractalSpec,
    level: int,
    cache_dir: Optional[Union[str, Path]] = None,
    cap: Optional[int] = None,
) -> ApproximationGraph:
    """Return the level-``n`` graph of ``spec``, from the cache when possible.

    Unreadable or stale cache files are rebuilt and overwritten.
    """
    cap = ConfigParams.cell_cap if cap is None else cap
    if spec.alphabet_size**level > cap:
        raise CapExceeded(
            f"{spec.name} at level {level} has {spec.alphabet_size**level} cells, above the cap of {cap}"
        )

    path = cache_path(spec, level, cache_dir)
    if path.exists():
        try:
            return read_graph(spec, level, path)
        except ValueError as err:
            logger.warning(f"Rebuilding graph cache: {err}")

    graph = build_graph(spec, level, cap=cap)
    try:
        write_graph(graph, path)
    except OSError as err:
        logger.warning(f"Could not write graph cache {path}: {err}")
    return graph
