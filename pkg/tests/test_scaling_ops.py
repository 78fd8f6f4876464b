import math

import numpy as np
import pytest

from confdimlab import (
    BadExponent,
    BracketFailure,
    InsufficientLevels,
    build_graph,
    estimate_confdim,
    fit_exponent,
    resolve_spec,
    slope_monotonicity_report,
)
from confdimlab import scaling_ops
from confdimlab.scaling_ops import (
    ScalingFit,
    ScalingSample,
    _inversions,
    annulus_centers,
    descendant_center,
)


@pytest.fixture
def interval():
    return resolve_spec("interval")


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_interval_slope_is_p_minus_one(interval, p):
    fit = fit_exponent(interval, p, range(3, 9), workers=1)

    assert fit.slope == pytest.approx(p - 1.0, abs=1e-5)
    assert fit.r2 == pytest.approx(1.0, abs=1e-9)
    assert fit.beta_p == pytest.approx(p, abs=1e-5)
    # Level 3 only places the annulus
    assert fit.unresolved == (3,)
    np.testing.assert_allclose(fit.level_slopes, np.full(4, p - 1.0), atol=1e-5)

    # Mod_p of the annulus is exactly 2 (r / eps) ** (1 - p)
    for sample in fit.samples:
        assert sample.modulus == pytest.approx(2.0 * sample.eps_over_r ** (p - 1.0), rel=1e-6)


def test_fit_samples_and_record(interval):
    fit = fit_exponent(interval, 2.0, [5, 3, 4, 4], workers=1)

    assert [sample.level for sample in fit.samples] == [4, 5]
    assert [sample.eps_over_r for sample in fit.samples] == [0.5, 0.25]
    assert all(sample.converged for sample in fit.samples)
    assert fit.unresolved == (3,)
    assert fit.centers == (2, 3, 4, 5)
    assert fit.radius == 0.125
    assert str(fit) == "ScalingFit('interval', p=2.0, slope=1.0000, r2=1.0000)"

    record = fit.to_record()
    assert record["samples"] == fit.rows()
    assert record["unresolved_levels"] == [3]
    assert {"slope", "intercept", "r2", "stderr", "beta_p", "level_ratios"} <= set(record)


def test_fit_does_not_depend_on_the_worker_count(interval):
    serial = fit_exponent(interval, 2.5, range(3, 6), workers=1)
    parallel = fit_exponent(interval, 2.5, range(3, 6), workers=2)
    assert serial.to_record() == parallel.to_record()


def test_fit_needs_three_levels(interval):
    with pytest.raises(InsufficientLevels, match="at least 3 levels"):
        fit_exponent(interval, 2.0, [3, 4, 4], workers=1)


def test_fit_needs_two_resolved_levels(interval):
    # Cells of levels 3 and 4 are at least as wide as r
    with pytest.raises(InsufficientLevels, match="needs 2 levels"):
        fit_exponent(interval, 2.0, [3, 4, 5], r=1 / 16, workers=1)


def test_fit_needs_p_above_one(interval):
    with pytest.raises(BadExponent):
        fit_exponent(interval, 1.0, range(3, 6), workers=1)


def test_square_slope_changes_sign():
    square = resolve_spec("square")
    below = fit_exponent(square, 1.5, range(2, 5), workers=1)
    above = fit_exponent(square, 3.0, range(2, 5), workers=1)
    assert below.slope < 0.0 < above.slope


def test_gasket_modulus_ratio():
    fit = fit_exponent(resolve_spec("gasket"), 2.0, range(3, 7), workers=1)
    assert [sample.level for sample in fit.samples] == [4, 5, 6]
    assert 0.4 < fit.slope < 1.2
    assert fit.level_ratios == pytest.approx([0.6, 0.6], rel=0.1)


def test_annulus_centers_avoid_the_boundary(interval):
    coarse = build_graph(interval, 3)
    assert annulus_centers(coarse, 1 / 8) == [2, 3, 4, 5]
    assert annulus_centers(coarse, 1 / 8, count=2) == [2, 4]
    # No cell is far enough from the boundary: fall back to all cells
    assert annulus_centers(coarse, 0.5, count=3) == [0, 2, 5]


def test_descendant_center(interval):
    coarse, fine = build_graph(interval, 3), build_graph(interval, 5)
    assert descendant_center(coarse, 2, fine) == 9
    assert descendant_center(coarse, 0, coarse) == 0


def test_interval_conformal_dimension_is_clamped(interval):
    estimate = estimate_confdim(interval, range(3, 7), workers=1)

    assert estimate.q_estimate == pytest.approx(1.01)
    assert estimate.flags == ("clamped_low",)
    assert estimate.levels_used == (4, 5, 6)
    assert estimate.per_p_slopes[0][1] == pytest.approx(0.01, abs=1e-4)


def test_empty_bracket(interval):
    with pytest.raises(BracketFailure, match="Empty exponent bracket"):
        estimate_confdim(interval, range(3, 6), p_bracket=(2.0, 1.5), workers=1)


def test_monotonicity_report(interval):
    rows = slope_monotonicity_report(interval, [1.5, 2.0, 3.0], range(3, 6), workers=1)

    assert [row.p for row in rows] == [1.5, 2.0, 3.0]
    np.testing.assert_allclose([row.slope for row in rows], [0.5, 1.0, 2.0], atol=1e-5)
    assert not any(row.flagged for row in rows)


def test_monotonicity_report_needs_a_sorted_grid(interval):
    with pytest.raises(ValueError, match="must be sorted"):
        slope_monotonicity_report(interval, [2.0, 1.5], range(3, 6), workers=1)


@pytest.mark.parametrize(
    "rows, expected",
    [
        ([(1.5, 1.0, 0.01), (2.0, 0.5, 0.01)], [1]),
        ([(1.5, 1.0, 0.3), (2.0, 0.5, 0.3)], []),
        ([(1.5, 0.1, 0.0), (2.0, 0.4, 0.0), (3.0, 0.2, 0.0)], [2]),
    ],
)
def test_slope_inversions(rows, expected):
    assert _inversions(rows) == expected


def test_path_pool_seeds_the_next_exponent(interval):
    pool = {}
    first = fit_exponent(interval, 2.0, range(3, 6), workers=1, path_pool=pool)
    assert sorted(pool) == [(level, c) for level in (4, 5) for c in first.centers]

    seeded = fit_exponent(interval, 2.5, range(3, 6), workers=1, path_pool=pool)
    cold = fit_exponent(interval, 2.5, range(3, 6), workers=1)
    assert seeded.slope == pytest.approx(cold.slope, abs=1e-6)


def _linear_slopes(monkeypatch, root):
    """Replace the fits by the slope ``p - root``."""

    def fit(spec, p, levels, **kwargs):
        samples = (ScalingSample(3, 0.5, 1.0, 0.0), ScalingSample(4, 0.25, 1.0, 0.0))
        return ScalingFit(
            spec=spec.name,
            p=p,
            samples=samples,
            slope=p - root,
            intercept=0.0,
            r2=1.0,
            stderr=0.0,
            hausdorff_dim=spec.hausdorff_dim,
            radius=0.25,
            centers=(0,),
        )

    monkeypatch.setattr(scaling_ops, "fit_exponent", fit)


def test_root_inside_the_dimension_is_kept(monkeypatch):
    _linear_slopes(monkeypatch, 1.6)
    estimate = estimate_confdim(resolve_spec("square"), range(2, 5))

    assert estimate.q_estimate == pytest.approx(1.6, abs=0.02)
    assert estimate.flags == ()
    assert estimate.levels_used == (3, 4)


def test_root_above_the_dimension_is_clamped(monkeypatch):
    _linear_slopes(monkeypatch, 2.5)
    estimate = estimate_confdim(resolve_spec("square"), range(2, 5))

    assert estimate.q_estimate == pytest.approx(2.0)
    assert estimate.flags == ("clamped_high",)
    assert estimate.bracket[0] < 2.5 <= estimate.bracket[1]


def test_root_below_the_floor_is_clamped(monkeypatch):
    _linear_slopes(monkeypatch, 0.5)
    estimate = estimate_confdim(resolve_spec("square"), range(2, 5), p_bracket=(1.5, 3.0))

    assert estimate.q_estimate == pytest.approx(1.01)
    assert estimate.flags == ("clamped_low",)


def test_slope_negative_up_to_the_widest_bracket(monkeypatch):
    _linear_slopes(monkeypatch, 4.0)
    with pytest.raises(BracketFailure, match="stays negative"):
        estimate_confdim(resolve_spec("square"), range(2, 5))


@pytest.mark.slow
def test_square_conformal_dimension():
    estimate = estimate_confdim(
        resolve_spec("square"), range(2, 6), p_bracket=(1.5, 3.0), bisect_tol=0.05, workers=4
    )
    assert estimate.q_estimate == pytest.approx(2.0, abs=0.2)
    assert estimate.levels_used == (3, 4, 5)


@pytest.mark.slow
def test_carpet_conformal_dimension_is_below_the_hausdorff_dimension():
    carpet = resolve_spec("carpet")
    estimate = estimate_confdim(carpet, range(2, 5), bisect_tol=0.05, workers=4)
    assert 1.0 < estimate.q_estimate < math.log(8) / math.log(3)

    rows = slope_monotonicity_report(carpet, [1.3, 1.5, 1.7, 1.9], range(2, 5), workers=4)
    assert not any(row.flagged for row in rows)


@pytest.mark.slow
def test_product_raises_the_conformal_dimension(interval):
    single = estimate_confdim(interval, range(3, 7), workers=1)
    product = estimate_confdim(
        resolve_spec("interval*interval"), range(2, 5), p_bracket=(1.5, 3.0), bisect_tol=0.1, workers=4
    )
    assert product.q_estimate > single.q_estimate


@pytest.mark.slow
def test_estimate_is_stable_under_refinement():
    gasket = resolve_spec("gasket")
    coarse = estimate_confdim(gasket, range(3, 6), bisect_tol=0.1, workers=4)
    fine = estimate_confdim(gasket, range(3, 7), bisect_tol=0.1, workers=4)

    width = max(coarse.bracket[1] - coarse.bracket[0], fine.bracket[1] - fine.bracket[0])
    assert abs(fine.q_estimate - coarse.q_estimate) <= width
