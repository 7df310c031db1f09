"""Blending-weight fitting: exact projections onto the four weight spaces and
projected gradient descent for the per-period least-squares problem.

A weight row expresses one base period as a combination of representative
periods.  Four row spaces are supported, nested from most to least
restrictive:

- ``dirac``          one entry equal to 1, all others 0 (hard assignment)
- ``convex``         nonnegative, summing to exactly 1
- ``subunit_conic``  nonnegative, summing to at most 1
- ``conic``          nonnegative

Sub-unit rows are the largest class that keeps every upper-bound inequality
satisfied by the representatives valid for the reconstructed base periods.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

WEIGHT_TYPES = ("dirac", "convex", "subunit_conic", "conic")

_WEIGHT_ALIASES = {"subunit": "subunit_conic", "sub_unit": "subunit_conic"}


def canonical_weight_type(tag: str) -> str:
    """Normalize a weight-type tag, accepting the short CLI alias 'subunit'."""
    tag = _WEIGHT_ALIASES.get(tag, tag)
    if tag not in WEIGHT_TYPES:
        raise ValueError(f"unknown weight type {tag!r}; expected one of {WEIGHT_TYPES}")
    return tag


@dataclass(frozen=True)
class PgdParams:
    """Projected-gradient-descent settings.

    ``learning_rate`` may be a positive float or ``"auto"``, in which case the
    caller resolves it to ``1 / L`` where ``L`` is the largest eigenvalue of
    the Gram matrix of the representative columns (guarantees monotone
    descent of the least-squares objective).
    """

    max_iter: int = 2000
    tolerance: float = 1e-8
    learning_rate: float | str = "auto"

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be > 0")
        if self.learning_rate != "auto" and not float(self.learning_rate) > 0:
            raise ValueError("learning_rate must be > 0 or 'auto'")


@dataclass
class WeightMatrix:
    """Fitted blending weights, one row per base period.

    ``projection_errors[d]`` is the Euclidean residual between base-period
    column d and its weighted reconstruction from the representatives.
    """

    values: np.ndarray  # (n_periods, n_rp)
    weight_type: str
    projection_errors: np.ndarray  # (n_periods,)

    @property
    def n_periods(self) -> int:
        return self.values.shape[0]

    @property
    def n_rp(self) -> int:
        return self.values.shape[1]

    @property
    def rep_totals(self) -> np.ndarray:
        """Per-representative total weight (number of periods it stands for,
        generalized to fractional blends)."""
        return self.values.sum(axis=0)


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Exact Euclidean projection of ``v`` onto the probability simplex
    {x >= 0, sum(x) = 1}.

    Scan-based O(n) method: maintains a candidate active set and the running
    pivot, then filters until the pivot is consistent, so no sort is needed.
    """
    v = np.asarray(v, dtype=float)
    y = v.ravel()
    n = y.size
    if n == 0:
        raise ValueError("cannot project an empty vector")
    if n == 1:
        return np.ones(1)

    # Invariant throughout: pivot == (sum(active) - 1) / len(active).
    active = [y[0]]
    waiting: list[float] = []
    pivot = y[0] - 1.0
    for k in range(1, n):
        yk = y[k]
        if yk > pivot:
            pivot += (yk - pivot) / (len(active) + 1)
            if pivot > yk - 1.0:
                active.append(yk)
            else:
                waiting.extend(active)
                active = [yk]
                pivot = yk - 1.0
    for yk in waiting:
        if yk > pivot:
            active.append(yk)
            pivot += (yk - pivot) / len(active)
    changed = True
    while changed:
        changed = False
        for yk in list(active):
            if yk <= pivot:
                # len(active) >= 2 here: a singleton has pivot = yk - 1 < yk
                active.remove(yk)
                pivot += (pivot - yk) / len(active)
                changed = True
    return np.maximum(y - pivot, 0.0)


def project_nonneg(v: np.ndarray) -> np.ndarray:
    """Projection onto the nonnegative orthant (conic weights)."""
    return np.maximum(np.asarray(v, dtype=float), 0.0)


def project_subunit(v: np.ndarray) -> np.ndarray:
    """Exact projection onto {x >= 0, sum(x) <= 1}.

    If clipping negatives already lands inside the set, that is the
    projection; otherwise the sum constraint is active and the answer
    coincides with the simplex projection.
    """
    clipped = project_nonneg(v)
    if clipped.sum() <= 1.0:
        return clipped
    return project_simplex(v)


def project_dirac(v: np.ndarray) -> np.ndarray:
    """Projection onto the unit basis vectors: 1 at the largest coordinate
    (lowest index on ties), 0 elsewhere."""
    v = np.asarray(v, dtype=float)
    w = np.zeros_like(v)
    w[int(np.argmax(v))] = 1.0
    return w


_PROJECTORS = {
    "dirac": project_dirac,
    "convex": project_simplex,
    "subunit_conic": project_subunit,
    "conic": project_nonneg,
}


def project_weights(v: np.ndarray, weight_type: str) -> np.ndarray:
    """Exact Euclidean projection of ``v`` onto the given weight space."""
    return _PROJECTORS[canonical_weight_type(weight_type)](v)


def least_squares_init(rep_matrix: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Unconstrained least-squares weights (minimum-norm on rank deficiency).

    Equals the pseudoinverse solution of ``rep_matrix @ w = target``; used as
    the starting guess before projecting and descending.
    """
    R = np.asarray(rep_matrix, dtype=float)
    if R.ndim != 2 or R.shape[1] == 0:
        raise ValueError("rep_matrix must be a nonempty 2-d array")
    sol, *_ = np.linalg.lstsq(R, np.asarray(target, dtype=float), rcond=None)
    return sol


def lipschitz_constant(rep_matrix: np.ndarray, iterations: int = 50) -> float:
    """Largest eigenvalue of R^T R estimated by power iteration.

    Deterministic all-ones start; the Rayleigh quotient after ``iterations``
    steps is returned.  Zero for an all-zero matrix.
    """
    R = np.asarray(rep_matrix, dtype=float)
    gram = R.T @ R
    n = gram.shape[0]
    b = np.full(n, 1.0 / np.sqrt(n))
    for _ in range(iterations):
        nxt = gram @ b
        norm = np.linalg.norm(nxt)
        if norm == 0.0:
            return 0.0
        b = nxt / norm
    return float(b @ (gram @ b))


def resolve_learning_rate(params: PgdParams, rep_matrix: np.ndarray) -> float:
    """Turn PgdParams.learning_rate into a concrete step size for the
    least-squares objective built on ``rep_matrix``."""
    if params.learning_rate != "auto":
        return float(params.learning_rate)
    lip = lipschitz_constant(rep_matrix)
    if lip <= 0.0:
        return 1.0
    return 1.0 / lip


def pgd(x0, objective_grad, projector, params: PgdParams, alpha: float | None = None) -> np.ndarray:
    """Projected gradient descent.

    Projects the start point, then repeats gradient step + projection for at
    most ``params.max_iter`` iterations, stopping early once the iterate
    moves by no more than ``tolerance / max_iter`` in the infinity norm.

    ``alpha`` overrides the step size; otherwise ``params.learning_rate``
    must be numeric (callers resolve "auto" against their matrix).
    """
    if alpha is None:
        if params.learning_rate == "auto":
            raise ValueError("learning_rate 'auto' must be resolved by the caller")
        alpha = float(params.learning_rate)
    x = projector(np.asarray(x0, dtype=float))
    stall = params.tolerance / params.max_iter
    for iteration in range(params.max_iter):
        g = objective_grad(x)
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(
                f"non-finite gradient at iteration {iteration}: {g}"
            )
        x_prev = x
        x = projector(x - alpha * g)
        if np.max(np.abs(x_prev - x)) <= stall:
            break
    return x


def _nearest_rep_index(rep_matrix: np.ndarray, target: np.ndarray) -> int:
    """Index of the representative column closest to ``target`` (lowest
    index on ties)."""
    diffs = rep_matrix - target[:, None]
    return int(np.argmin(np.einsum("ij,ij->j", diffs, diffs)))


def fit_weights(
    rep_matrix: np.ndarray,
    data_matrix: np.ndarray,
    weight_type: str,
    params: PgdParams | None = None,
    dirac_assignment: np.ndarray | None = None,
) -> WeightMatrix:
    """Fit one weight row per base-period column of ``data_matrix``.

    Each row solves min ||R w - c_d||^2 over the declared weight space by
    projected gradient descent.  The start point is the better (smaller
    residual) of the projected pseudoinverse solution and a hard-assignment
    row; the latter comes from ``dirac_assignment`` when a clustering
    provided one, else from the nearest representative.

    For ``weight_type="dirac"`` with an assignment available, the assignment
    rows are returned as-is; no descent is run.
    """
    weight_type = canonical_weight_type(weight_type)
    params = params or PgdParams()
    R = np.asarray(rep_matrix, dtype=float)
    C = np.asarray(data_matrix, dtype=float)
    if C.ndim == 1:
        C = C[:, None]
    if R.shape[0] != C.shape[0]:
        raise ValueError(
            f"representative and data matrices disagree on feature count: {R.shape[0]} vs {C.shape[0]}"
        )
    n_rp = R.shape[1]
    n_periods = C.shape[1]
    if dirac_assignment is not None:
        dirac_assignment = np.asarray(dirac_assignment, dtype=int)
        if dirac_assignment.shape != (n_periods,):
            raise ValueError("dirac_assignment must have one entry per period")

    W = np.zeros((n_periods, n_rp))
    errors = np.zeros(n_periods)

    if weight_type == "dirac" and dirac_assignment is not None:
        for d in range(n_periods):
            W[d, dirac_assignment[d]] = 1.0
            errors[d] = np.linalg.norm(R[:, dirac_assignment[d]] - C[:, d])
        return WeightMatrix(W, weight_type, errors)

    projector = _PROJECTORS[weight_type]
    alpha = resolve_learning_rate(params, R)
    pinv = np.linalg.pinv(R)
    gram = R.T @ R
    for d in range(n_periods):
        c = C[:, d]
        rtc = R.T @ c
        init_ls = projector(pinv @ c)
        if dirac_assignment is not None:
            j = int(dirac_assignment[d])
        else:
            j = _nearest_rep_index(R, c)
        init_hard = np.zeros(n_rp)
        init_hard[j] = 1.0
        if np.linalg.norm(R @ init_ls - c) <= np.linalg.norm(R[:, j] - c):
            start = init_ls
        else:
            start = init_hard
        w = pgd(start, lambda x: gram @ x - rtc, projector, params, alpha=alpha)
        W[d] = w
        errors[d] = np.linalg.norm(R @ w - c)
    return WeightMatrix(W, weight_type, errors)
