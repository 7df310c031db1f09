"""Representative-period selection on a feature-by-period matrix.

Three families of methods:

- ``kmeans``: synthetic representatives (centroids), Lloyd iterations;
- ``kmedoids``: representatives are actual data columns, alternating
  assign/update sweeps;
- ``greedy_hull``: grows a set of extreme data columns so that the chosen
  hull (convex, convex-with-null, or conic) covers the remaining columns as
  well as possible.  Conic coverage is reduced to the convex case by scaling
  every column onto the hyperplane <x, q> = 1 (gnomonic projection).

All methods are deterministic functions of the matrix, the parameters and
the seed; argmax/argmin ties always resolve to the lowest index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .weights import PgdParams, least_squares_init, pgd, project_simplex, resolve_learning_rate

HULL_TYPES = ("convex", "convex_null", "conic")

DEGENERATE_TOL = 1e-12


@dataclass
class RepSelection:
    """Chosen representative periods.

    ``rep_matrix`` holds one column per representative in selection order.
    ``source_indices`` gives the originating column of each representative
    when they are actual data columns (medoids, hull points); it is None for
    synthetic centroids.  ``step_max_distances`` records, for hull methods,
    the maximal point-to-hull distance seen at each greedy step.
    """

    rep_matrix: np.ndarray
    method: str
    hull_type: str = "none"
    source_indices: np.ndarray | None = None
    step_max_distances: list[float] = field(default_factory=list)

    @property
    def n_rp(self) -> int:
        return self.rep_matrix.shape[1]


@dataclass
class ClusterAssignment:
    """Hard assignment of every base period to a representative index.

    ``cost`` is the within-cluster sum of squared distances for k-means and
    the total Euclidean distance for k-medoids.
    """

    assignment: np.ndarray  # (n_periods,) of rep positions
    cost: float


@dataclass
class GnomonicProjection:
    """Columns rescaled onto the hyperplane <x, q> = 1.

    ``degenerate`` lists columns whose inner product with the reference
    direction is at most the tolerance; they cannot be rescaled and are left
    as zero columns.
    """

    scaled: np.ndarray
    q: np.ndarray
    degenerate: list[int]


def _check_k(k: int, n_periods: int):
    if not 1 <= k <= n_periods:
        raise ValueError(f"number of representatives {k} outside 1..{n_periods}")


def _column_distances(matrix: np.ndarray, col: np.ndarray) -> np.ndarray:
    diff = matrix - col[:, None]
    return np.sqrt(np.einsum("ij,ij->j", diff, diff))


def _farthest_point_init(matrix: np.ndarray, k: int, seed: int) -> list[int]:
    """Seeded greedy farthest-point start: a random first column, then
    repeatedly the column farthest from the chosen set."""
    n_periods = matrix.shape[1]
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(n_periods))]
    dmin = _column_distances(matrix, matrix[:, chosen[0]])
    dmin[chosen[0]] = -np.inf
    while len(chosen) < k:
        nxt = int(np.argmax(dmin))
        chosen.append(nxt)
        dmin = np.minimum(dmin, _column_distances(matrix, matrix[:, nxt]))
        dmin[nxt] = -np.inf
    return chosen


def kmeans(
    matrix: np.ndarray, k: int, seed: int, max_iter: int = 300
) -> tuple[RepSelection, ClusterAssignment]:
    """Lloyd's algorithm with greedy farthest-point initialization.

    Returns synthetic centroid columns (no source indices) and the final
    hard assignment with its sum of squared distances.
    """
    C = np.asarray(matrix, dtype=float)
    n_periods = C.shape[1]
    _check_k(k, n_periods)
    centers = C[:, _farthest_point_init(C, k, seed)].copy()
    assign = np.full(n_periods, -1)
    for _ in range(max_iter):
        d2 = _sqdist_to_centers(C, centers)
        new_assign = np.argmin(d2, axis=1)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(k):
            members = np.nonzero(assign == j)[0]
            if members.size:
                centers[:, j] = C[:, members].mean(axis=1)
        centers = _relocate_empty(C, centers, assign)
    # re-derive the assignment so the returned pair is consistent even when
    # the iteration cap cut the loop between the two half-steps
    d2 = _sqdist_to_centers(C, centers)
    assign = np.argmin(d2, axis=1)
    sse = float(d2[np.arange(n_periods), assign].sum())
    return (
        RepSelection(rep_matrix=centers, method="kmeans"),
        ClusterAssignment(assignment=assign, cost=sse),
    )


def _sqdist_to_centers(C: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # (n_periods, k) squared Euclidean distances
    diff = C[:, :, None] - centers[:, None, :]
    return np.einsum("ijk,ijk->jk", diff, diff)


def _relocate_empty(C: np.ndarray, centers: np.ndarray, assign: np.ndarray) -> np.ndarray:
    """Move each empty cluster's center to the point worst-served by its own
    center; keep the center in place when every point is served exactly."""
    k = centers.shape[1]
    taken: set[int] = set()
    d2 = _sqdist_to_centers(C, centers)
    own = d2[np.arange(C.shape[1]), assign].copy()
    for j in range(k):
        if np.any(assign == j):
            continue
        for idx in np.argsort(-own, kind="stable"):
            if int(idx) not in taken:
                break
        if own[idx] > 0.0:
            centers[:, j] = C[:, idx]
            taken.add(int(idx))
    return centers


def kmedoids(
    matrix: np.ndarray, k: int, seed: int, max_iter: int = 300
) -> tuple[RepSelection, ClusterAssignment]:
    """Alternating assign/update k-medoids on Euclidean distances.

    Medoids are actual data columns; each update sweep re-centers every
    cluster on the member minimizing the within-cluster total distance, so
    the total cost never increases.
    """
    C = np.asarray(matrix, dtype=float)
    n_periods = C.shape[1]
    _check_k(k, n_periods)
    dist = np.zeros((n_periods, n_periods))
    for d in range(n_periods):
        dist[d] = _column_distances(C, C[:, d])
    medoids = _farthest_point_init(C, k, seed)
    for _ in range(max_iter):
        assign = np.argmin(dist[:, medoids], axis=1)
        new_medoids = list(medoids)
        for j in range(k):
            members = np.nonzero(assign == j)[0]
            if members.size == 0:
                continue
            within = dist[np.ix_(members, members)].sum(axis=0)
            new_medoids[j] = int(members[np.argmin(within)])
        if new_medoids == medoids:
            break
        medoids = new_medoids
    assign = np.argmin(dist[:, medoids], axis=1)
    cost = float(dist[np.arange(n_periods), [medoids[j] for j in assign]].sum())
    return (
        RepSelection(
            rep_matrix=C[:, medoids].copy(),
            method="kmedoids",
            source_indices=np.array(medoids),
        ),
        ClusterAssignment(assignment=assign, cost=cost),
    )


def gnomonic_project(matrix: np.ndarray, tol: float = DEGENERATE_TOL) -> GnomonicProjection:
    """Scale every column onto the hyperplane <x, q> = 1, where q is the
    normalized column mean.

    A point lies in the conic hull of a column set exactly when its scaled
    image lies in the convex hull of the scaled set, so conic selection can
    reuse the convex machinery.
    """
    C = np.asarray(matrix, dtype=float)
    mean = C.mean(axis=1)
    norm = np.linalg.norm(mean)
    if norm == 0.0:
        raise ValueError("gnomonic projection undefined: mean column is zero")
    q = mean / norm
    inner = q @ C
    degenerate = [int(d) for d in np.nonzero(inner <= tol)[0]]
    scaled = np.zeros_like(C)
    ok = inner > tol
    scaled[:, ok] = C[:, ok] / inner[ok]
    return GnomonicProjection(scaled=scaled, q=q, degenerate=degenerate)


def hull_distance(
    c: np.ndarray,
    rep_matrix: np.ndarray,
    params: PgdParams | None = None,
    *,
    pinv: np.ndarray | None = None,
    alpha: float | None = None,
) -> tuple[float, np.ndarray]:
    """Euclidean distance from ``c`` to the convex hull of the columns of
    ``rep_matrix``, with the optimal convex weights.

    Solved by projected gradient descent on the least-squares objective over
    the simplex, starting from the projected pseudoinverse solution.  A
    column identical to ``c`` short-circuits to distance zero.  ``pinv`` and
    ``alpha`` may be supplied to amortize repeated calls against one matrix.
    """
    params = params or PgdParams()
    R = np.asarray(rep_matrix, dtype=float)
    if R.ndim != 2 or R.shape[1] == 0:
        raise ValueError("rep_matrix must have at least one column")
    c = np.asarray(c, dtype=float)
    for j in range(R.shape[1]):
        if np.array_equal(R[:, j], c):
            w = np.zeros(R.shape[1])
            w[j] = 1.0
            return 0.0, w
    if alpha is None:
        alpha = resolve_learning_rate(params, R)
    init = pinv @ c if pinv is not None else least_squares_init(R, c)
    gram = R.T @ R
    rtc = R.T @ c
    w = pgd(project_simplex(init), lambda x: gram @ x - rtc, project_simplex, params, alpha=alpha)
    return float(np.linalg.norm(R @ w - c)), w


def _greedy_select(
    matrix: np.ndarray,
    n_rp: int,
    initial: list[int],
    candidates: np.ndarray,
    params: PgdParams,
    use_cache: bool,
) -> tuple[list[int], list[float]]:
    """Core greedy loop: repeatedly add the candidate column farthest from
    the convex hull of the current selection.

    The distance cache is reused for a candidate unless the newest
    representative is closer to it than its cached hull distance (the hull
    only grows, so cached distances are upper bounds, but a nearby new
    point is evidence the true distance dropped).
    """
    reps = list(initial)
    steps: list[float] = []
    if not reps:
        mean = matrix.mean(axis=1)
        dist_to_mean = _column_distances(matrix, mean)
        masked = np.where(candidates, dist_to_mean, -np.inf)
        reps.append(int(np.argmax(masked)))
    cache: dict[int, float] = {}
    while len(reps) < n_rp:
        R = matrix[:, reps]
        pinv = np.linalg.pinv(R)
        alpha = resolve_learning_rate(params, R)
        r_new = reps[-1]
        new_col = matrix[:, r_new]
        in_reps = set(reps)
        best_dist = -np.inf
        best_idx = -1
        for d in range(matrix.shape[1]):
            if d in in_reps or not candidates[d]:
                continue
            cached = cache.get(d)
            if (
                use_cache
                and cached is not None
                and float(np.linalg.norm(matrix[:, d] - new_col)) >= cached
            ):
                cur = cached
            else:
                cur, _ = hull_distance(matrix[:, d], R, params, pinv=pinv, alpha=alpha)
                cache[d] = cur
            if cur > best_dist:
                best_dist = cur
                best_idx = d
        if best_idx < 0:
            raise ValueError("not enough selectable columns to reach the requested count")
        reps.append(best_idx)
        steps.append(best_dist)
    return reps, steps


def greedy_hull(
    matrix: np.ndarray,
    n_rp: int,
    hull_type: str = "convex",
    initial_reps: tuple[int, ...] = (),
    params: PgdParams | None = None,
    use_cache: bool = True,
) -> RepSelection:
    """Greedy hull clustering in one of three variants.

    - ``convex``: run the greedy loop on the matrix directly;
    - ``convex_null``: append a zero column, force it as the initial
      representative, select one extra point, then drop the zero column
      (covers weight rows summing to at most one);
    - ``conic``: select on the gnomonically scaled matrix and return the
      unscaled columns; degenerate columns are excluded from selection.

    Without ``initial_reps``, selection starts from the column farthest from
    the column mean.
    """
    if hull_type not in HULL_TYPES:
        raise ValueError(f"unknown hull type {hull_type!r}; expected one of {HULL_TYPES}")
    C = np.asarray(matrix, dtype=float)
    n_periods = C.shape[1]
    _check_k(n_rp, n_periods)
    params = params or PgdParams()
    initial = [int(i) for i in initial_reps]

    if hull_type == "convex":
        candidates = np.ones(n_periods, dtype=bool)
        reps, steps = _greedy_select(C, n_rp, initial, candidates, params, use_cache)
        chosen = reps
    elif hull_type == "convex_null":
        augmented = np.hstack([C, np.zeros((C.shape[0], 1))])
        null_idx = n_periods
        candidates = np.ones(n_periods + 1, dtype=bool)
        reps, steps = _greedy_select(
            augmented, n_rp + 1, [null_idx] + initial, candidates, params, use_cache
        )
        chosen = [r for r in reps if r != null_idx]
    else:  # conic
        proj = gnomonic_project(C)
        candidates = np.ones(n_periods, dtype=bool)
        candidates[proj.degenerate] = False
        if candidates.sum() < n_rp:
            raise ValueError(
                f"only {int(candidates.sum())} non-degenerate columns available for {n_rp} representatives"
            )
        reps, steps = _greedy_select(proj.scaled, n_rp, initial, candidates, params, use_cache)
        chosen = reps

    return RepSelection(
        rep_matrix=C[:, chosen].copy(),
        method="hull",
        hull_type=hull_type,
        source_indices=np.array(chosen),
        step_max_distances=steps,
    )
