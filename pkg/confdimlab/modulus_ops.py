from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from scipy import optimize, sparse

from .config_params import ConfigParams
from .entities import (
    ApproximationGraph,
    CellAddress,
    DiscreteFunction,
    WeightFunction,
)
from .errors import (
    BadExponent,
    BallsOverlap,
    CapExceeded,
    EmptyBall,
    GraphMismatch,
    NonConvergence,
    RadiusOutOfRange,
)
from .fractal_ops import _cell_index, metric_ball
from .type_stubs import FloatArray, IntArray
from .utils import logger, operation_boilerplate

CellRef = Union[CellAddress, int]

ANNULUS_CROSSING = "annulus_crossing"
BALL_TO_BALL = "ball_to_ball"
POINT_TO_POINT = "point_to_point"

# Ball membership and region tests allow this much rounding in center distances
_RADIUS_SLACK = 1e-12

# Largest graph the exhaustive oracle accepts without `force`
EXHAUSTIVE_MAX_CELLS = 12


## FAMILIES
@dataclass(frozen=True, eq=False)
class CurveFamily:
    """All cell paths of a graph joining a source set to a target set.

    A path is admissible for a weight ``rho`` when the sum of ``rho`` over its cells,
    both ends included, is at least 1. Ball-to-ball families additionally bound the
    diameter of their paths.

    Use the ``annulus_crossing``, ``ball_to_ball`` and ``point_to_point``
    constructors rather than the raw initializer.
    """

    kind: str
    graph: ApproximationGraph
    source: IntArray
    target: IntArray
    diameter_cap: Optional[float] = None
    params: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def annulus_crossing(
        cls, graph: ApproximationGraph, center: CellRef, r: float, R: float
    ) -> "CurveFamily":
        """Paths crossing the annulus ``B(x, R) \\ B(x, r)`` around a cell.

        The source is made of the cells whose center is within ``r`` of the center
        cell, the target of the cells reaching outside ``B(x, R)``, i.e. whose center
        is at least ``R - eps`` away for the cell diameter ``eps``.
        """
        if not 0 < r < R <= graph.diameter + _RADIUS_SLACK:
            raise RadiusOutOfRange(
                f"Annulus radii must satisfy 0 < r < R <= {graph.diameter}: r={r}, R={R}"
            )

        index = _cell_index(graph, center)
        distances = graph.distances_from(index)
        source = np.nonzero(distances <= r + _RADIUS_SLACK)[0]
        target = np.nonzero(distances >= R - graph.cell_diameter - _RADIUS_SLACK)[0]
        if source.size == 0 or target.size == 0:
            raise EmptyBall(f"Annulus around cell {index} with r={r}, R={R} is degenerate")

        return cls(
            ANNULUS_CROSSING,
            graph,
            source.astype(np.int64),
            target.astype(np.int64),
            params={"center": index, "r": r, "R": R},
        )

    @classmethod
    def ball_to_ball(
        cls,
        graph: ApproximationGraph,
        x: CellRef,
        y: CellRef,
        r: float,
        cap_factor: Optional[float] = None,
    ) -> "CurveFamily":
        """Paths of diameter at most ``cap_factor * r`` joining ``B(x, r)`` to ``B(y, r)``."""
        if r <= 0:
            raise RadiusOutOfRange(f"Ball radius must be positive: {r}")

        cap_factor = ConfigParams.loewner_cap if cap_factor is None else cap_factor
        x_index, y_index = _cell_index(graph, x), _cell_index(graph, y)
        source = metric_ball(graph, x_index, r)
        target = metric_ball(graph, y_index, r)
        if np.intersect1d(source, target).size:
            raise BallsOverlap(f"Balls of radius {r} around cells {x_index} and {y_index} intersect")

        return cls(
            BALL_TO_BALL,
            graph,
            source,
            target,
            diameter_cap=cap_factor * r,
            params={"x": x_index, "y": y_index, "r": r, "cap_factor": cap_factor},
        )

    @classmethod
    def point_to_point(
        cls, graph: ApproximationGraph, a: Sequence[int], b: Sequence[int]
    ) -> "CurveFamily":
        """All paths joining the cell set ``a`` to the cell set ``b``."""
        source = np.unique(np.asarray(list(a), dtype=np.int64))
        target = np.unique(np.asarray(list(b), dtype=np.int64))
        if source.size == 0 or target.size == 0:
            raise EmptyBall("Both cell sets of a point-to-point family must be non-empty")
        if source.min() < 0 or target.min() < 0 or max(source.max(), target.max()) >= graph.num_cells:
            raise GraphMismatch(f"Cell sets reach outside {graph}")

        return cls(POINT_TO_POINT, graph, source, target)

    def separation(self) -> float:
        """The smallest center distance between a source cell and a target cell."""
        return float(
            min(self.graph.distances_from(int(s))[self.target].min() for s in self.source)
        )

    def to_record(self) -> Dict[str, Any]:
        record: Dict[str, Any] = {"kind": self.kind, **self.params}
        if self.kind == POINT_TO_POINT:
            record["source"] = self.source.tolist()
            record["target"] = self.target.tolist()
        return record

    def __str__(self) -> str:
        return f"CurveFamily({self.kind}, graph={self.graph.name}, sources={self.source.size}, targets={self.target.size})"


@dataclass(frozen=True, eq=False)
class ModulusResult:
    """The minimizing weight of a modulus problem with its optimality certificate.

    Parameters
    ----------
    value
        ``sum(rho ** p)`` of the reported weight. The weight is exactly admissible, so
        this is an upper bound of the discrete modulus.
    optimal_rho
        The reported admissible weight.
    p
        The exponent.
    slack
        Shortest path length minus one before the final rescaling.
    lower_bound
        The dual lower bound of the discrete modulus.
    iterations
        Number of constraint generation rounds.
    num_paths
        Size of the final active path set.
    family
        The curve family.
    converged
        Whether the shortest path reached length ``1 - tol`` before the rescaling.
    paths
        The final active paths, reusable as ``initial_paths`` of a related solve.
    """

    value: float
    optimal_rho: WeightFunction
    p: float
    slack: float
    lower_bound: float
    iterations: int
    num_paths: int
    family: CurveFamily
    converged: bool = True
    paths: Tuple[Tuple[int, ...], ...] = field(default=(), repr=False)

    @property
    def duality_gap(self) -> float:
        return max(self.value - self.lower_bound, 0.0)

    @property
    def certificate(self) -> Dict[str, float]:
        return {"slack": self.slack, "duality_gap": self.duality_gap}

    def to_record(self) -> Dict[str, Any]:
        graph = self.family.graph
        return {
            "spec": graph.name,
            "level": graph.level,
            "family": self.family.to_record(),
            "p": self.p,
            "value": self.value,
            "lower_bound": self.lower_bound,
            "iterations": self.iterations,
            "slack": self.slack,
            "duality_gap": self.duality_gap,
            "converged": self.converged,
        }

    def __str__(self) -> str:
        return f"ModulusResult(value={self.value:.6g}, p={self.p}, iterations={self.iterations})"


## SHORTEST PATHS
@dataclass
class _PathField:
    """Node-weighted distances to the target set and the successor toward it."""

    dist: List[float]
    succ: List[int]

    def path(self, start: int) -> Tuple[int, ...]:
        cells = [start]
        while self.succ[cells[-1]] >= 0:
            cells.append(self.succ[cells[-1]])
        return tuple(cells)


def _node_weighted_dijkstra(
    indptr: List[int],
    indices: List[int],
    rho: List[float],
    targets: Sequence[int],
    allowed: Optional[FloatArray] = None,
    stop_at: Optional[Sequence[int]] = None,
) -> _PathField:
    """Dijkstra on cell weights, grown backwards from the target set.

    ``dist[c]`` is the smallest sum of ``rho`` over a path from ``c`` to the target,
    both ends included. Heap entries are ``(distance, index)`` pairs, so ties settle
    the lowest index first and the successors are deterministic.
    """
    num_nodes = len(indptr) - 1
    dist = [math.inf] * num_nodes
    succ = [-1] * num_nodes
    settled = [False] * num_nodes
    heap: List[Tuple[float, int]] = []

    for t in targets:
        if allowed is None or allowed[t]:
            dist[t] = rho[t]
            heap.append((rho[t], t))
    heapq.heapify(heap)

    pending = None if stop_at is None else set(stop_at)
    while heap:
        d, u = heapq.heappop(heap)
        if settled[u]:
            continue
        settled[u] = True
        if pending is not None:
            pending.discard(u)
            if not pending:
                break

        for v in indices[indptr[u] : indptr[u + 1]]:
            if settled[v] or (allowed is not None and not allowed[v]):
                continue
            candidate = d + rho[v]
            if candidate < dist[v]:
                dist[v] = candidate
                succ[v] = u
                heapq.heappush(heap, (candidate, v))

    return _PathField(dist, succ)


def _shortest_paths(
    family: CurveFamily, rho: FloatArray
) -> List[Tuple[float, int, _PathField]]:
    """The shortest family path from every source cell, sorted by ``(length, cell)``.

    Diameter-capped families are relaxed to windows: the source cells are grouped in
    buckets of side ``cap / 4`` and the paths of a bucket may only use cells at most
    five buckets away in every coordinate. This contains every capped path and no
    path much longer than the cap.
    """
    adjacency = family.graph.adjacency
    indptr, indices = adjacency.indptr.tolist(), adjacency.indices.tolist()
    weights = rho.tolist()

    found: List[Tuple[float, int, _PathField]] = []
    if family.diameter_cap is None:
        paths = _node_weighted_dijkstra(
            indptr, indices, weights, family.target.tolist(), stop_at=family.source.tolist()
        )
        found = [(paths.dist[s], s, paths) for s in family.source.tolist()]
    else:
        side = family.diameter_cap / 4.0
        buckets = np.floor(family.graph.embedding / side).astype(np.int64)
        source_buckets = buckets[family.source]
        for bucket in np.unique(source_buckets, axis=0):
            allowed = np.all(np.abs(buckets - bucket) <= 5, axis=1)
            members = family.source[np.all(source_buckets == bucket, axis=1)].tolist()
            paths = _node_weighted_dijkstra(
                indptr, indices, weights, family.target.tolist(), allowed, stop_at=members
            )
            found.extend((paths.dist[s], s, paths) for s in members)

    found.sort(key=lambda item: (item[0], item[1]))
    return found


## RESTRICTED PROGRAM
# Largest restricted programs the Newton refinement densifies
REFINE_MAX_PATHS = 4000
REFINE_STEPS = 50
# Dual norms beyond this overflow the squared norm
_NORM_CEILING = 1e150


def _q_norm(x: FloatArray, q: float) -> float:
    x = np.maximum(x, 0.0)
    scale = float(x.max()) if x.size else 0.0
    if not math.isfinite(scale):
        return math.inf
    if scale <= 0.0:
        return 0.0
    return scale * float(np.sum((x / scale) ** q) ** (1.0 / q))


def _solve_dual(
    incidence: sparse.csr_matrix, p: float, warm_start: FloatArray
) -> Tuple[FloatArray, FloatArray, float]:
    """Solve the dual of the modulus program restricted to the active paths.

    Minimizes ``0.5 * ||A^T lam||_q ** 2 - sum(lam)`` over ``lam >= 0`` with the
    conjugate exponent ``q``, whose minimizers are proportional to the extremal path
    measures.

    Returns
    -------
    Tuple[FloatArray, FloatArray, float]
        The dual variable, the primal weight it induces (admissible on the active
        paths at optimality), and the dual lower bound of the modulus.
    """
    q = p / (p - 1.0)
    transposed = incidence.T.tocsr()

    def objective(lam: FloatArray) -> Tuple[float, FloatArray]:
        x = np.maximum(transposed @ lam, 0.0)
        norm = _q_norm(x, q)
        if not norm < _NORM_CEILING:
            # Rejected by the line search
            return math.inf, np.zeros_like(lam)
        if norm == 0.0:
            return -float(lam.sum()), -np.ones_like(lam)
        grad_x = norm * (x / norm) ** (q - 1.0)
        return 0.5 * norm**2 - float(lam.sum()), incidence @ grad_x - 1.0

    solution = optimize.minimize(
        objective,
        warm_start,
        jac=True,
        method="L-BFGS-B",
        bounds=[(0.0, None)] * warm_start.shape[0],
        options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 5000},
    )
    lam = solution.x if np.all(np.isfinite(solution.x)) else warm_start
    lam = np.maximum(lam, 0.0)
    return lam, *_primal_of_dual(transposed, p, lam)


def _primal_of_dual(
    transposed: sparse.csr_matrix, p: float, lam: FloatArray
) -> Tuple[FloatArray, float]:
    q = p / (p - 1.0)
    x = np.maximum(transposed @ lam, 0.0)
    norm = _q_norm(x, q)
    total = float(lam.sum())
    if not 0.0 < norm < math.inf or total == 0.0:
        return np.zeros(transposed.shape[0]), 0.0

    rho = (total / norm) * (x / norm) ** (q - 1.0)
    return rho, (total / norm) ** p


def _refine_dual(
    incidence: sparse.csr_matrix, p: float, lam: FloatArray, tol: float
) -> Optional[Tuple[FloatArray, FloatArray, float]]:
    """Polish a restricted solution with Newton steps on its stationarity system.

    With the multipliers ``mu`` the weight is ``rho = (A^T mu / p) ** (q - 1)``. Paths
    with ``mu > 0`` must have ``rho``-length one and the other active paths at least
    one. The steps stop once every active path is admissible to within ``tol`` and a
    step changes ``sum(rho ** p)`` by less than ``tol`` relative, or when no step
    reduces the residual any more.

    Returns
    -------
    Optional[Tuple[FloatArray, FloatArray, float]]
        The dual variable in the scaling of :func:`_solve_dual`, the weight and the
        Lagrangian lower bound, or ``None`` when the program is out of reach.
    """
    if incidence.shape[0] > REFINE_MAX_PATHS:
        return None

    q = p / (p - 1.0)
    transposed = incidence.T.tocsr()
    x = np.maximum(transposed @ lam, 0.0)
    norm, total = _q_norm(x, q), float(lam.sum())
    if not 0.0 < norm < math.inf or total <= 0.0:
        return None
    mu = lam * (p * total ** (p - 1.0) / norm**p)

    def evaluate(mu: FloatArray) -> Tuple[FloatArray, FloatArray, FloatArray, float]:
        x = np.maximum(transposed @ mu, 0.0)
        rho = (x / p) ** (q - 1.0)
        residual = incidence @ rho - 1.0
        # Paths without dual mass only need to be long enough
        defect = np.where(mu > 0.0, residual, np.minimum(residual, 0.0))
        return x, rho, residual, float(defect @ defect)

    x, rho, residual, merit = evaluate(mu)
    value = float(np.sum(rho**p))
    for _ in range(REFINE_STEPS):
        free = (mu > 0.0) | (residual < 0.0)
        rows = incidence[np.nonzero(free)[0]]
        positive = x > 0.0
        curvature = np.zeros_like(x)
        curvature[positive] = (q - 1.0) / p * (x[positive] / p) ** (q - 2.0)
        jacobian = (rows @ sparse.diags(curvature) @ rows.T).toarray()
        ridge = 1e-12 * max(float(jacobian.diagonal().max()), 1.0)
        jacobian[np.diag_indices_from(jacobian)] += ridge
        try:
            step = np.linalg.solve(jacobian, -residual[free])
        except np.linalg.LinAlgError:
            break

        t = 1.0
        while t > 1e-10:
            trial = mu.copy()
            trial[free] = np.maximum(mu[free] + t * step, 0.0)
            state = evaluate(trial)
            if state[3] < merit:
                break
            t *= 0.5
        else:
            break

        mu = trial
        x, rho, residual, merit = state
        previous, value = value, float(np.sum(rho**p))
        if residual.min() >= -tol and abs(previous - value) < tol * value:
            break

    total, norm = float(mu.sum()), _q_norm(x, q)
    if not 0.0 < norm < math.inf:
        return None
    lower_bound = total - (p - 1.0) * float(np.sum(rho**p))
    return mu * (total / norm**2), rho, lower_bound


def _incidence(paths: List[Tuple[int, ...]], num_cells: int) -> sparse.csr_matrix:
    rows = np.repeat(np.arange(len(paths)), [len(path) for path in paths])
    cols = np.fromiter((cell for path in paths for cell in path), dtype=np.int64)
    data = np.ones(cols.shape[0])
    return sparse.csr_matrix((data, (rows, cols)), shape=(len(paths), num_cells))


## SOLVERS
def _check_exponent(p: float) -> None:
    if not p > 1.0 or not math.isfinite(p):
        raise BadExponent(f"The exponent p must be a finite number above 1: {p}")


@operation_boilerplate(
    format_finish=lambda result: f"value {result.value:.6g} after {result.iterations} iterations"
)
def solve_modulus(
    family: CurveFamily,
    p: float,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    initial_rho: Optional[FloatArray] = None,
    initial_paths: Optional[Sequence[Sequence[int]]] = None,
) -> ModulusResult:
    """Compute the discrete ``p``-modulus of a curve family by constraint generation.

    The active path set starts with ``initial_paths`` and the shortest paths under
    ``initial_rho`` (unit weights by default). Each round solves the program
    restricted to the active paths, then adds up to
    ``ConfigParams.paths_per_iteration`` of the shortest paths that the current weight
    violates. When every violated path is active already, the restricted solution is
    polished by Newton steps before the family is searched again.

    The result is converged only when the shortest family path has length at least
    ``1 - tol`` before the final rescaling. A solve that stalls above the tolerance
    returns its rescaled weight with ``converged=False``.

    Parameters
    ----------
    family
        The curve family.
    p
        The exponent, strictly larger than 1.
    tol
        The admissibility tolerance. Defaults to ``ConfigParams.modulus_tol``.
    max_iter
        The round limit. Defaults to ``ConfigParams.max_iter``.
    initial_rho
        The weight selecting the initial paths.
    initial_paths
        Paths of the same family to start from, e.g. the ``paths`` of a result for a
        nearby exponent. Paths that do not join the source to the target are ignored.

    Returns
    -------
    ModulusResult
        The admissible minimizing weight, its value and the dual lower bound.
    """
    _check_exponent(p)
    tol = ConfigParams.modulus_tol if tol is None else tol
    max_iter = ConfigParams.max_iter if max_iter is None else max_iter
    if tol <= 0:
        raise ValueError(f"The tolerance must be positive: {tol}")

    graph = family.graph
    num_cells = graph.num_cells
    per_round = max(1, ConfigParams.paths_per_iteration)

    seed = np.ones(num_cells) if initial_rho is None else np.asarray(initial_rho, dtype=np.float64)
    if seed.shape != (num_cells,) or np.any(seed < 0):
        raise GraphMismatch("The initial weight must be a nonnegative value per cell")

    candidates = _shortest_paths(family, seed)
    if not candidates or not math.isfinite(candidates[0][0]):
        logger.info(f"{family} has no connecting path")
        return ModulusResult(
            0.0, WeightFunction(graph, np.zeros(num_cells)), p, math.inf, 0.0, 0, 0, family
        )

    active: List[Tuple[int, ...]] = []
    seen = set()

    def add_paths(found: List[Tuple[float, int, _PathField]], bound: float) -> int:
        added = 0
        for length, start, paths in found:
            if added >= per_round or not length < bound:
                break
            path = paths.path(start)
            key = tuple(sorted(path))
            if key not in seen:
                seen.add(key)
                active.append(path)
                added += 1
        return added

    sources, targets = set(family.source.tolist()), set(family.target.tolist())
    for path in initial_paths or ():
        path = tuple(int(cell) for cell in path)
        key = tuple(sorted(path))
        if path and path[0] in sources and path[-1] in targets and key not in seen:
            seen.add(key)
            active.append(path)
    add_paths(candidates, math.inf)

    lam = np.zeros(len(active))
    rho = np.zeros(num_cells)
    lower_bound = 0.0
    shortest = 0.0
    for iteration in range(1, max_iter + 1):
        lam = np.concatenate((lam, np.zeros(len(active) - lam.shape[0])))
        incidence = _incidence(active, num_cells)
        lam, rho, lower_bound = _solve_dual(incidence, p, lam)

        found = _shortest_paths(family, rho)
        shortest = found[0][0]
        logger.debug(
            f"Modulus round {iteration}: {len(active)} paths, shortest {shortest:.12g}, "
            f"value {float(np.sum(rho**p)):.12g}"
        )
        if shortest >= 1.0 - tol:
            return _finish(family, p, rho, shortest, lower_bound, iteration, active)
        if add_paths(found, 1.0 - tol) > 0:
            continue

        # Every violated path is active already
        refined = _refine_dual(incidence, p, lam, tol)
        if refined is not None:
            lam, rho, lower_bound = refined
            found = _shortest_paths(family, rho)
            shortest = found[0][0]
            logger.debug(f"Modulus round {iteration} refined: shortest {shortest:.12g}")
            if shortest >= 1.0 - tol:
                return _finish(family, p, rho, shortest, lower_bound, iteration, active)
            if add_paths(found, 1.0 - tol) > 0:
                continue

        logger.warning(
            f"Modulus of {family} stalled at slack {shortest - 1.0:.3g}, beyond the tolerance {tol:g}"
        )
        return _finish(
            family, p, rho, shortest, lower_bound, iteration, active, converged=False
        )

    partial = _finish(family, p, rho, shortest, lower_bound, max_iter, active, converged=False)
    raise NonConvergence(
        f"Modulus of {family} did not converge in {max_iter} rounds; bounds [{partial.lower_bound:.6g}, {partial.value:.6g}]",
        partial=partial,
    )


def _finish(
    family: CurveFamily,
    p: float,
    rho: FloatArray,
    shortest: float,
    lower_bound: float,
    iterations: int,
    active: List[Tuple[int, ...]],
    converged: bool = True,
) -> ModulusResult:
    """Rescale ``rho`` to be exactly admissible and package the result."""
    admissible = rho / shortest if shortest > 0 else rho
    value = float(np.sum(admissible**p))
    return ModulusResult(
        value=value,
        optimal_rho=WeightFunction(family.graph, admissible),
        p=p,
        slack=shortest - 1.0,
        lower_bound=min(lower_bound, value),
        iterations=iterations,
        num_paths=len(active),
        family=family,
        converged=converged,
        paths=tuple(active),
    )


def annulus_modulus(
    graph: ApproximationGraph,
    center: CellRef,
    r: float,
    p: float,
    tol: Optional[float] = None,
    initial_paths: Optional[Sequence[Sequence[int]]] = None,
) -> ModulusResult:
    """Modulus of the paths crossing the annulus between radii ``r`` and ``2r``.

    ``r`` must be at least the cell diameter and at most
    ``ConfigParams.annulus_radius_fraction`` times the graph diameter. ``initial_paths``
    seeds the solve as in :func:`solve_modulus`.
    """
    largest = ConfigParams.annulus_radius_fraction * graph.diameter
    if r > largest + _RADIUS_SLACK:
        raise RadiusOutOfRange(f"Annulus radius {r} exceeds {largest}")
    if r < graph.cell_diameter - _RADIUS_SLACK:
        raise RadiusOutOfRange(
            f"Annulus radius {r} is below the cell diameter {graph.cell_diameter}"
        )

    family = CurveFamily.annulus_crossing(graph, center, r, 2.0 * r)
    return solve_modulus(family, p, tol, initial_paths=initial_paths)


def ball_to_ball_modulus(
    graph: ApproximationGraph,
    x: CellRef,
    y: CellRef,
    r: float,
    A: float,
    p: float,
    tol: Optional[float] = None,
    cap_factor: Optional[float] = None,
) -> ModulusResult:
    """Modulus of the diameter-capped paths joining ``B(x, r)`` to ``B(y, r)``.

    The balls must be disjoint and at most ``A * r`` apart; the diameter cap is
    ``cap_factor * r`` with ``cap_factor`` defaulting to ``ConfigParams.loewner_cap``.
    """
    family = CurveFamily.ball_to_ball(graph, x, y, r, cap_factor)
    separation = family.separation()
    if separation > A * r + _RADIUS_SLACK:
        raise RadiusOutOfRange(f"Balls are {separation} apart, more than A * r = {A * r}")

    return solve_modulus(family, p, tol)


def potential_from_weights(family: CurveFamily, rho: WeightFunction) -> DiscreteFunction:
    """The ``rho``-distance of every cell to the target side of a family.

    ``f(c)`` is the smallest sum of ``rho`` over a path from ``c`` to a target cell,
    both ends included, and ``f`` is reset to 0 on the target, so the last step into the
    target is ``rho(c) + rho(t)``. Cells that cannot reach the target get the largest
    finite value.
    """
    if rho.graph is not family.graph:
        raise GraphMismatch("The weight does not live on the graph of the family")

    adjacency = family.graph.adjacency
    paths = _node_weighted_dijkstra(
        adjacency.indptr.tolist(),
        adjacency.indices.tolist(),
        rho.rho.tolist(),
        family.target.tolist(),
    )
    values = np.array(paths.dist)
    values[family.target] = 0.0

    finite = np.isfinite(values)
    values[~finite] = values[finite].max() if np.any(finite) else 0.0
    return DiscreteFunction(family.graph, values)


## ORACLE
def family_paths(family: CurveFamily) -> List[Tuple[int, ...]]:
    """All simple paths of a family, as sorted cell tuples without duplicates."""
    graph = nx.Graph()
    graph.add_nodes_from(range(family.graph.num_cells))
    graph.add_edges_from(family.graph.edges.tolist())

    targets = family.target.tolist()
    paths = set()
    for s in family.source.tolist():
        if s in targets:
            paths.add((s,))
            continue
        for path in nx.all_simple_paths(graph, s, targets):
            if family.diameter_cap is not None and _path_diameter(family.graph, path) > family.diameter_cap + _RADIUS_SLACK:
                continue
            paths.add(tuple(sorted(path)))
    return sorted(paths)


def _path_diameter(graph: ApproximationGraph, path: Sequence[int]) -> float:
    return max(float(graph.distances_from(cell)[list(path)].max()) for cell in path)


def exhaustive_modulus(family: CurveFamily, p: float, force: bool = False) -> float:
    """Solve the modulus program over the full explicit path set.

    Every simple path of the family is enumerated, so this only suits tiny graphs.
    Diameter caps are applied exactly.
    """
    _check_exponent(p)
    if family.graph.num_cells > EXHAUSTIVE_MAX_CELLS and not force:
        raise CapExceeded(
            f"Exhaustive modulus is limited to {EXHAUSTIVE_MAX_CELLS} cells, {family.graph} has more"
        )

    paths = family_paths(family)
    if not paths:
        return 0.0

    incidence = _incidence(paths, family.graph.num_cells).toarray()
    start = np.full(family.graph.num_cells, 1.0 / min(len(path) for path in paths))
    solution = optimize.minimize(
        lambda rho: float(np.sum(rho**p)),
        start,
        jac=lambda rho: p * rho ** (p - 1.0),
        method="SLSQP",
        bounds=[(0.0, None)] * start.shape[0],
        constraints=[
            {
                "type": "ineq",
                "fun": lambda rho: incidence @ rho - 1.0,
                "jac": lambda rho: incidence,
            }
        ],
        options={"ftol": 1e-15, "maxiter": 1000},
    )
    rho = np.maximum(solution.x, 0.0)
    shortest = float((incidence @ rho).min())
    return float(np.sum((rho / shortest) ** p))
