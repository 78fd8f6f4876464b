import dataclasses
import json

import numpy as np
import pytest

from confdimlab import (
    ConfigParams,
    DiscreteFunction,
    build_graph,
    energy_form,
    product_energy,
    product_form,
    resolve_spec,
)
from confdimlab import cli as cli_module
from confdimlab.cli import EXIT_INVALID, EXIT_NON_CONVERGENCE, EXIT_OK, main, parse_levels


@pytest.fixture
def cli(graph_cache_dir):
    def _cli(*argv):
        return main([*argv, "--cache-dir", str(graph_cache_dir), "--workers", "1", "--quiet"])

    return _cli


def _cell_at(graph, *coords):
    return int(np.nonzero(np.all(graph.coords == coords, axis=1))[0][0])


def test_build(cli, tmp_path):
    output = tmp_path / "build.json"
    assert cli("build", "--spec", "interval", "--level", "4", "--output", str(output)) == EXIT_OK

    payload = json.loads(output.read_text())
    assert payload["schema"] == "v1"
    assert payload["command"] == "build"
    assert payload["partial"] is False
    assert payload["result"]["num_cells"] == 16
    assert payload["result"]["num_edges"] == 15
    assert payload["result"]["max_degree"] == 2


def test_run_restores_the_config(cli, graph_cache_dir, monkeypatch):
    monkeypatch.setattr(ConfigParams, "workers", 7)
    other = graph_cache_dir / "other"
    argv = ["build", "--spec", "interval", "--level", "2", "--cache-dir", str(other), "--workers", "1"]
    assert main([*argv, "--quiet"]) == EXIT_OK
    assert ConfigParams.cache_dir == str(graph_cache_dir)
    assert ConfigParams.workers == 7

    assert cli("build", "--spec", "moon", "--level", "1") == EXIT_INVALID
    assert ConfigParams.workers == 7


def test_point_to_point_modulus(cli, tmp_path):
    output, table = tmp_path / "mod.json", tmp_path / "mod.csv"
    status = cli(
        "modulus",
        "--spec",
        "interval",
        "--level",
        "3",
        "--family",
        "point2point",
        "--p",
        "2",
        "--output",
        str(output),
        "--csv",
        str(table),
    )
    assert status == EXIT_OK

    payload = json.loads(output.read_text())
    assert payload["result"]["value"] == pytest.approx(0.125, rel=1e-6)
    assert payload["config"]["family"] == "point2point"
    assert "workers" not in payload["config"]

    header, row = table.read_text().splitlines()
    assert header == "spec,level,p,value,lower_bound,iterations,slack,duality_gap"
    assert row.startswith("interval,3,2.0,")


def test_output_is_deterministic(cli, capsys):
    argv = ("modulus", "--spec", "gasket", "--level", "2", "--family", "point2point", "--p", "3")
    assert cli(*argv) == EXIT_OK
    first = capsys.readouterr().out
    assert cli(*argv) == EXIT_OK
    second = capsys.readouterr().out

    assert first == second
    assert json.loads(first)["result"]["converged"] is True


def test_unknown_spec(cli, capsys):
    assert cli("build", "--spec", "moon", "--level", "1") == EXIT_INVALID
    captured = capsys.readouterr()
    assert captured.out == ""
    assert '"error": "UnknownSpec"' in captured.err


@pytest.mark.parametrize(
    "argv",
    [
        ("build", "--spec", "interval"),
        ("scaling", "--spec", "interval"),
        ("product-demo", "--spec", "interval", "--levels", "1..3"),
        ("modulus", "--spec", "interval", "--level", "3", "--family", "ball2ball"),
        ("modulus", "--spec", "interval", "--level", "3", "--tol", "-1"),
        ("confdim", "--spec", "interval", "--levels", "3..5", "--bracket", "1.5"),
    ],
)
def test_invalid_input(cli, argv):
    assert cli(*argv) == EXIT_INVALID


def test_non_convergence_writes_a_partial_result(cli, tmp_path, monkeypatch):
    monkeypatch.setattr(ConfigParams, "max_iter", 1)
    graph = build_graph(resolve_spec("square"), 2)
    output, table = tmp_path / "partial.json", tmp_path / "partial.csv"

    status = cli(
        "modulus",
        "--spec",
        "square",
        "--level",
        "2",
        "--family",
        "point2point",
        "--source",
        str(_cell_at(graph, 0, 0)),
        "--target",
        str(_cell_at(graph, 3, 3)),
        "--output",
        str(output),
        "--csv",
        str(table),
    )
    assert status == EXIT_NON_CONVERGENCE

    payload = json.loads(output.read_text())
    assert payload["partial"] is True
    assert payload["result"]["converged"] is False
    assert table.read_text().splitlines()[0].endswith(",partial")


def test_stalled_modulus_exits_as_non_converged(cli, tmp_path, monkeypatch):
    solve = cli_module.solve_modulus
    monkeypatch.setattr(
        cli_module,
        "solve_modulus",
        lambda *args, **kwargs: dataclasses.replace(solve(*args, **kwargs), converged=False),
    )
    output = tmp_path / "stalled.json"

    status = cli(
        "modulus", "--spec", "interval", "--level", "3", "--family", "point2point", "--output", str(output)
    )
    assert status == EXIT_NON_CONVERGENCE

    payload = json.loads(output.read_text())
    assert payload["partial"] is True
    assert payload["result"]["converged"] is False


def test_axioms_table(cli, tmp_path):
    table = tmp_path / "axioms.csv"
    status = cli(
        "axioms", "--spec", "carpet", "--level", "1", "--samples", "10", "--seed", "2", "--csv", str(table)
    )
    assert status == EXIT_OK

    lines = table.read_text().splitlines()
    assert lines[0] == "axiom,samples,violations,worst_residual"
    assert len(lines) > 1
    assert all(line.split(",")[2] == "0" for line in lines[1:])


def test_energy_of_a_product_spec(cli, tmp_path):
    output = tmp_path / "energy.json"
    status = cli("energy", "--spec", "interval*interval", "--level", "2", "--output", str(output))
    assert status == EXIT_OK
    summary = json.loads(output.read_text())["result"]

    factor = build_graph(resolve_spec("interval"), 2)
    graph = build_graph(resolve_spec("interval*interval"), 2)
    form = product_form(energy_form(factor, 2.0), energy_form(factor, 2.0), graph)
    u = DiscreteFunction(graph, graph.embedding[:, 0].copy())
    assert summary["energy"] == pytest.approx(product_energy(form, u))
    assert summary["measure_total"] == pytest.approx(summary["energy"])


def test_scaling_plot(cli, tmp_path):
    output, plot = tmp_path / "fit.json", tmp_path / "fit.svg"
    status = cli(
        "scaling",
        "--spec",
        "interval",
        "--levels",
        "3..5",
        "--p-grid",
        "2,3",
        "--output",
        str(output),
        "--emit-svg",
        str(plot),
    )
    assert status == EXIT_OK

    fits = json.loads(output.read_text())["result"]["fits"]
    assert [fit["p"] for fit in fits] == [2.0, 3.0]
    assert fits[0]["slope"] == pytest.approx(1.0, abs=1e-5)
    assert plot.read_text().lstrip().startswith("<?xml")


def test_singularity_and_product_demo(cli, tmp_path):
    scan = tmp_path / "scan.json"
    assert cli("singularity", "--spec", "gasket", "--levels", "1,2", "--output", str(scan)) == EXIT_OK
    rows = json.loads(scan.read_text())["result"]["statistic_per_level"]
    assert rows[0]["tv_distance"] == pytest.approx(4 / 15)

    demo = tmp_path / "demo.csv"
    assert cli("product-demo", "--spec", "gasket*gasket", "--levels", "1", "--csv", str(demo)) == EXIT_OK
    header, row = demo.read_text().splitlines()
    assert header == "spec_x,spec_y,p,level,mutual_tv,tv_lambda_x,tv_lambda_y"
    assert row.startswith("gasket,gasket,2.0,1,")


@pytest.mark.parametrize(
    "text, levels",
    [("2..5", (2, 3, 4, 5)), ("2,3,5", (2, 3, 5)), ("4", (4,))],
)
def test_parse_levels(text, levels):
    assert parse_levels(text) == levels
