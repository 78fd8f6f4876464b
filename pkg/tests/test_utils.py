import logging

import pytest

from confdimlab import QuietContext, build_graph, resolve_spec
from confdimlab.utils import operation_boilerplate, parallel_map, stride_sample


@operation_boilerplate(format_finish=lambda value: f"value {value}")
def _double(value):
    return 2 * value


@operation_boilerplate(no_log=True)
def _silent(value):
    return value


def test_operation_logs_start_and_finish(caplog):
    caplog.set_level(logging.INFO, logger="confdimlab")
    assert _double(21) == 42
    assert caplog.messages == ["Running _double", "Finished _double with: value 42"]


def test_build_graph_logs_its_size(caplog):
    caplog.set_level(logging.INFO, logger="confdimlab")
    build_graph(resolve_spec("interval"), 3)
    assert caplog.messages == [
        "Running build_graph",
        "Finished build_graph with: 8 cells, 7 edges",
    ]


def test_no_log_operation(caplog):
    caplog.set_level(logging.INFO, logger="confdimlab")
    assert _silent(3) == 3
    assert caplog.messages == []


def test_quiet_context(caplog):
    caplog.set_level(logging.INFO, logger="confdimlab")
    with QuietContext():
        _double(1)
        build_graph(resolve_spec("interval"), 2)
    assert caplog.messages == []

    # Logging is restored on exit
    _double(1)
    assert caplog.messages[0] == "Running _double"


@pytest.mark.parametrize("workers", [1, 2])
def test_parallel_map_keeps_input_order(workers):
    assert parallel_map(abs, [-3, 1, -2, 5], workers=workers) == [3, 1, 2, 5]


def test_parallel_map_of_nothing():
    assert parallel_map(abs, [], workers=4) == []


@pytest.mark.parametrize(
    "items, count, expected",
    [
        (list(range(10)), 5, [0, 2, 4, 6, 8]),
        (list(range(10)), 3, [0, 3, 6]),
        (list(range(3)), 5, [0, 1, 2]),
        (list(range(3)), 0, []),
        ([], 2, []),
    ],
)
def test_stride_sample(items, count, expected):
    assert stride_sample(items, count) == expected
