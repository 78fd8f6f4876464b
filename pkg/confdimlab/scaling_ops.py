from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .config_params import ConfigParams
from .entities import ApproximationGraph, FractalSpec
from .errors import (
    BadExponent,
    BracketFailure,
    InsufficientLevels,
    NonMonotoneSlope,
    ZeroMass,
)
from .fractal_ops import build_graph
from .modulus_ops import annulus_modulus
from .utils import logger, operation_boilerplate, parallel_map, stride_sample

# Smallest exponent the conformal dimension search evaluates
P_FLOOR = 1.01

Paths = Tuple[Tuple[int, ...], ...]
PathPool = Dict[Tuple[int, int], Paths]


@dataclass(frozen=True)
class ScalingSample:
    """The center-averaged annulus modulus at one level."""

    level: int
    eps_over_r: float
    modulus: float
    slack: float
    converged: bool = True


@dataclass(frozen=True)
class ScalingFit:
    """A least-squares fit of ``log Mod_p`` against ``log(eps / r)``.

    The slope estimates ``beta_p - d_H``, so ``beta_p = slope + d_H``.
    """

    spec: str
    p: float
    samples: Tuple[ScalingSample, ...]
    slope: float
    intercept: float
    r2: float
    stderr: float
    hausdorff_dim: float
    radius: float
    centers: Tuple[int, ...]
    unresolved: Tuple[int, ...] = ()
    """Requested levels whose cells are as wide as ``radius``, left out of the fit."""

    @property
    def beta_p(self) -> float:
        return self.slope + self.hausdorff_dim

    @property
    def level_slopes(self) -> List[float]:
        """Slopes between consecutive levels, the ratio estimate of the exponent."""
        return [
            math.log(b.modulus / a.modulus) / math.log(b.eps_over_r / a.eps_over_r)
            for a, b in zip(self.samples, self.samples[1:])
        ]

    @property
    def level_ratios(self) -> List[float]:
        """``Mod`` at level ``n + 1`` divided by ``Mod`` at level ``n``."""
        return [b.modulus / a.modulus for a, b in zip(self.samples, self.samples[1:])]

    def rows(self) -> List[Dict[str, Any]]:
        """One CSV row per level."""
        return [
            {
                "spec": self.spec,
                "p": self.p,
                "level": sample.level,
                "eps_over_r": sample.eps_over_r,
                "modulus": sample.modulus,
                "slack": sample.slack,
                "converged": sample.converged,
            }
            for sample in self.samples
        ]

    def to_record(self) -> Dict[str, Any]:
        return {
            "spec": self.spec,
            "p": self.p,
            "slope": self.slope,
            "intercept": self.intercept,
            "r2": self.r2,
            "stderr": self.stderr,
            "beta_p": self.beta_p,
            "hausdorff_dim": self.hausdorff_dim,
            "radius": self.radius,
            "centers": list(self.centers),
            "unresolved_levels": list(self.unresolved),
            "level_slopes": self.level_slopes,
            "level_ratios": self.level_ratios,
            "samples": self.rows(),
        }

    def __str__(self) -> str:
        return f"ScalingFit({self.spec!r}, p={self.p}, slope={self.slope:.4f}, r2={self.r2:.4f})"


@dataclass(frozen=True)
class ConfDimEstimate:
    """The critical exponent at which the modulus scaling slope changes sign."""

    spec: str
    q_estimate: float
    bracket: Tuple[float, float]
    per_p_slopes: Tuple[Tuple[float, float], ...]
    levels_used: Tuple[int, ...]
    flags: Tuple[str, ...] = ()

    def to_record(self) -> Dict[str, Any]:
        return {
            "spec": self.spec,
            "q_estimate": self.q_estimate,
            "bracket": list(self.bracket),
            "per_p_slopes": [list(pair) for pair in self.per_p_slopes],
            "levels_used": list(self.levels_used),
            "flags": list(self.flags),
        }

    def __str__(self) -> str:
        return f"ConfDimEstimate({self.spec!r}, q={self.q_estimate:.4f}, bracket={self.bracket})"


@dataclass(frozen=True)
class MonotonicityRow:
    p: float
    slope: float
    stderr: float
    flagged: bool = False


@lru_cache(maxsize=32)
def _graph(spec: FractalSpec, level: int) -> ApproximationGraph:
    return build_graph(spec, level)


def _check_levels(levels: Sequence[int]) -> List[int]:
    ordered = sorted(set(int(level) for level in levels))
    if len(ordered) < 3:
        raise InsufficientLevels(f"A scaling fit needs at least 3 levels, got {ordered}")
    return ordered


def annulus_centers(
    coarse: ApproximationGraph, r: float, count: Optional[int] = None
) -> List[int]:
    """Pick annulus centers among the cells of the coarsest graph.

    Cells whose center is at least ``2r`` from the reference boundary are preferred;
    the centers are then taken with a fixed index stride.
    """
    count = ConfigParams.annulus_centers if count is None else count
    margin = coarse.boundary_margin()
    inner = np.nonzero(margin >= 2.0 * r - 1e-12)[0].tolist()
    candidates = inner if inner else list(range(coarse.num_cells))
    return stride_sample(candidates, count)


def descendant_center(
    coarse: ApproximationGraph, center: int, fine: ApproximationGraph
) -> int:
    """The descendant of a coarse cell whose center is closest to the coarse center."""
    assert coarse.spec is not None
    block = coarse.spec.alphabet_size ** (fine.level - coarse.level)
    descendants = np.arange(center * block, (center + 1) * block)
    delta = fine.embedding[descendants] - coarse.embedding[center]
    distance = np.round(np.sqrt((delta**2).sum(axis=1)), 12)
    return int(descendants[int(np.argmin(distance))])


def _annulus_task(
    task: Tuple[FractalSpec, int, int, int, float, float, Optional[float], Paths]
) -> Tuple[float, float, bool, Paths]:
    spec, coarse_level, level, center, r, p, tol, seed_paths = task
    coarse, fine = _graph(spec, coarse_level), _graph(spec, level)
    cell = descendant_center(coarse, center, fine)
    result = annulus_modulus(fine, cell, r, p, tol, initial_paths=seed_paths)
    return result.value, result.slack, result.converged, result.paths


@operation_boilerplate(format_finish=str)
def fit_exponent(
    spec: FractalSpec,
    p: float,
    levels: Sequence[int],
    r: Optional[float] = None,
    centers: Optional[Sequence[int]] = None,
    tol: Optional[float] = None,
    workers: Optional[int] = None,
    path_pool: Optional[PathPool] = None,
) -> ScalingFit:
    """Fit the exponent of the annulus modulus across levels.

    Levels whose cells are at least as wide as ``r`` cannot resolve the annulus. They
    are not solved and are reported in ``ScalingFit.unresolved``. With the default
    radius this is the coarsest level, which then only places the annulus centers.

    Parameters
    ----------
    spec
        The spec to scan.
    p
        The exponent of the modulus.
    levels
        At least three levels, of which at least two resolve ``r``.
    r
        The inner annulus radius. Defaults to the cell diameter of the coarsest level.
    centers
        Coarse cell indices of the annulus centers. Defaults to
        ``ConfigParams.annulus_centers`` cells picked by ``annulus_centers``.
    tol
        Tolerance of the modulus solver.
    workers
        Worker processes for the independent modulus problems.
    path_pool
        Active paths per ``(level, center)`` from an earlier fit of the same spec,
        radius and centers. They seed the solves and are replaced by the new ones.

    Returns
    -------
    ScalingFit
        The fit of the center-averaged moduli; the samples are sorted by level.
    """
    if not p > 1.0:
        raise BadExponent(f"The exponent p must be above 1: {p}")

    ordered = _check_levels(levels)
    coarse = _graph(spec, ordered[0])
    r = coarse.cell_diameter if r is None else r
    chosen = annulus_centers(coarse, r) if centers is None else [int(c) for c in centers]

    resolved = [level for level in ordered if float(spec.contraction_ratio**level) < r * (1.0 - 1e-9)]
    unresolved = [level for level in ordered if level not in resolved]
    if len(resolved) < 2:
        raise InsufficientLevels(
            f"A scaling fit needs 2 levels with cells narrower than r = {r}, got {resolved}"
        )
    if unresolved:
        logger.debug(f"{spec.name}: levels {unresolved} do not resolve r = {r} and are not fitted")

    pool: PathPool = {} if path_pool is None else path_pool
    keys = [(level, center) for level in resolved for center in chosen]
    tasks = [(spec, ordered[0], level, center, r, p, tol, pool.get((level, center), ())) for level, center in keys]
    results = parallel_map(_annulus_task, tasks, workers)
    for key, (_, _, _, paths) in zip(keys, results):
        pool[key] = paths

    samples = []
    for i, level in enumerate(resolved):
        chunk = results[i * len(chosen) : (i + 1) * len(chosen)]
        modulus = float(np.mean([value for value, _, _, _ in chunk]))
        if modulus <= 0.0:
            raise ZeroMass(f"Annulus modulus of {spec.name} vanished at level {level}")
        converged = all(done for _, _, done, _ in chunk)
        if not converged:
            logger.warning(f"{spec.name} p={p} level {level}: an annulus modulus did not reach the tolerance")
        eps_over_r = float(spec.contraction_ratio**level) / r
        samples.append(ScalingSample(level, eps_over_r, modulus, min(s for _, s, _, _ in chunk), converged))
        logger.debug(f"{spec.name} p={p} level {level}: modulus {modulus:.8g}")

    x = np.log([sample.eps_over_r for sample in samples])
    y = np.log([sample.modulus for sample in samples])
    fit = stats.linregress(x, y)

    return ScalingFit(
        spec=spec.name,
        p=p,
        samples=tuple(samples),
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        r2=float(min(max(fit.rvalue**2, 0.0), 1.0)),
        stderr=float(fit.stderr),
        hausdorff_dim=spec.hausdorff_dim,
        radius=r,
        centers=tuple(chosen),
        unresolved=tuple(unresolved),
    )


def _inversions(slopes: Sequence[Tuple[float, float, float]]) -> List[int]:
    """Positions ``i`` where the slope drops from row ``i - 1`` beyond twice the noise."""
    flagged = []
    for i in range(1, len(slopes)):
        _, previous, previous_err = slopes[i - 1]
        _, current, current_err = slopes[i]
        if current < previous - 2.0 * max(previous_err, current_err) - 1e-9:
            flagged.append(i)
    return flagged


@operation_boilerplate(format_finish=str)
def estimate_confdim(
    spec: FractalSpec,
    levels: Sequence[int],
    p_bracket: Optional[Tuple[float, float]] = None,
    bisect_tol: float = 0.02,
    r: Optional[float] = None,
    tol: Optional[float] = None,
    workers: Optional[int] = None,
) -> ConfDimEstimate:
    """Estimate the conformal dimension as the root of the scaling slope in ``p``.

    The bracket defaults to ``[1.01, d_H + 1]``. When the slope has no sign change on
    the given bracket it is widened to that range. A slope already nonnegative at
    ``p = 1.01`` returns 1.01 with the ``clamped_low`` flag, and a root above ``d_H``
    returns ``d_H`` with the ``clamped_high`` flag. Every fit reuses the active paths
    of the previous exponent.

    Returns
    -------
    ConfDimEstimate
        The midpoint of the final bracket, once it is narrower than ``bisect_tol``.
    """
    ordered = _check_levels(levels)
    widest = (P_FLOOR, spec.hausdorff_dim + 1.0)
    ceiling = max(spec.hausdorff_dim, P_FLOOR)
    p_low, p_high = widest if p_bracket is None else p_bracket
    p_low = max(p_low, P_FLOOR)
    if not p_low < p_high:
        raise BracketFailure(f"Empty exponent bracket: [{p_low}, {p_high}]")

    fits: Dict[float, ScalingFit] = {}
    flags: List[str] = []
    pool: PathPool = {}

    def slope(p: float) -> float:
        if p not in fits:
            fits[p] = fit_exponent(
                spec, p, ordered, r=r, tol=tol, workers=workers, path_pool=pool
            )
        return fits[p].slope

    def estimate(q: float, low: float, high: float) -> ConfDimEstimate:
        rows = sorted((p, f.slope, f.stderr) for p, f in fits.items())
        for i in _inversions(rows):
            message = f"Slope of {spec.name} drops from {rows[i - 1][1]:.4f} at p={rows[i - 1][0]} to {rows[i][1]:.4f} at p={rows[i][0]}"
            warnings.warn(message, NonMonotoneSlope)
            flags.append(f"non_monotone:{rows[i - 1][0]}-{rows[i][0]}")
        if q > ceiling:
            logger.warning(f"Slope root of {spec.name} at p={q:.4f} lies above d_H = {spec.hausdorff_dim:.4f}")
            flags.append("clamped_high")
            q = ceiling
        fitted = next(iter(fits.values())).samples
        return ConfDimEstimate(
            spec=spec.name,
            q_estimate=q,
            bracket=(low, high),
            per_p_slopes=tuple((p, s) for p, s, _ in rows),
            levels_used=tuple(sample.level for sample in fitted),
            flags=tuple(flags),
        )

    if slope(p_low) > 0.0 and p_low > P_FLOOR:
        logger.info(f"Widening the lower end of the bracket of {spec.name} to {P_FLOOR}")
        p_low = P_FLOOR
    if slope(p_low) >= 0.0:
        if slope(p_low) > 0.0:
            flags.append("clamped_low")
        return estimate(p_low, p_low, p_high)

    if slope(p_high) < 0.0 and p_high < widest[1]:
        logger.info(f"Widening the upper end of the bracket of {spec.name} to {widest[1]}")
        p_high = widest[1]
    if slope(p_high) < 0.0:
        raise BracketFailure(
            f"Slope of {spec.name} stays negative up to p={p_high}: {slope(p_high):.4f}"
        )
    if slope(p_high) == 0.0:
        return estimate(p_high, p_high, p_high)

    while p_high - p_low >= bisect_tol:
        middle = 0.5 * (p_low + p_high)
        if slope(middle) < 0.0:
            p_low = middle
        else:
            p_high = middle

    return estimate(0.5 * (p_low + p_high), p_low, p_high)


def slope_monotonicity_report(
    spec: FractalSpec,
    p_grid: Sequence[float],
    levels: Sequence[int],
    r: Optional[float] = None,
    workers: Optional[int] = None,
) -> List[MonotonicityRow]:
    """Fit the slope for every exponent of a sorted grid and flag the inversions.

    Each fit is seeded with the active paths of the previous exponent.
    """
    grid = [float(p) for p in p_grid]
    if any(p <= 1.0 for p in grid):
        raise BadExponent(f"All exponents must be above 1: {grid}")
    if grid != sorted(grid):
        raise ValueError(f"The exponent grid must be sorted: {grid}")

    pool: PathPool = {}
    fits = [fit_exponent(spec, p, levels, r=r, workers=workers, path_pool=pool) for p in grid]
    rows = [(f.p, f.slope, f.stderr) for f in fits]
    flagged = set(_inversions(rows))
    return [
        MonotonicityRow(p, slope, stderr, i in flagged)
        for i, (p, slope, stderr) in enumerate(rows)
    ]
