"""Transport costs and entropically smoothed matching between mini-batches.

A mini-batch is a K x d matrix. A pair of batches induces a K x K cost
matrix C, and the soft matching M is the positive matrix with all rows and
columns summing to one that minimizes Tr[M C^T] - eps * h(M), where
h(M) = -sum_ij M_ij log M_ij. The reported transport distance is the plain
transport term Tr[M C^T]; the entropy term is internal to the solver.

Because rows and columns each sum to one, the plan carries total mass K and
the distance is a sum over matched pairs rather than an average. The exact
(unsmoothed) counterpart under the same marginals is an assignment problem
over permutations, solved here by brute force for small K and by the
O(K^3) assignment routine in general.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import logsumexp

from .numerics import Rng, as_matrix, check_finite

__all__ = [
    "COST_KINDS",
    "CostSpec",
    "SinkhornConfig",
    "SinkhornResult",
    "pairwise_cost",
    "sinkhorn",
    "exact_assignment",
    "plan_entropy",
    "random_match_distance",
    "uniform_plan_distance",
]

COST_KINDS = ("learned-cosine", "raw-cosine", "squared-euclidean", "euclidean")

BRUTE_FORCE_LIMIT = 8


@dataclass(frozen=True)
class CostSpec:
    """Which ground cost c(x, y) to build the cost matrix from.

    `learned-cosine` is cosine distance between critic embeddings; callers
    embed the batches first and then the matrix itself is computed exactly
    like `raw-cosine`. Both cosine kinds lie in [0, 2]; the Euclidean kinds
    are unbounded but nonnegative. All kinds are symmetric.
    """

    kind: str = "learned-cosine"

    def __post_init__(self):
        if self.kind not in COST_KINDS:
            raise ValueError(f"unknown cost kind {self.kind!r}; expected one of {COST_KINDS}")

    @property
    def is_cosine(self) -> bool:
        return self.kind in ("learned-cosine", "raw-cosine")

    @property
    def needs_critic(self) -> bool:
        return self.kind == "learned-cosine"


@dataclass(frozen=True)
class SinkhornConfig:
    """Solver knobs: entropy weight, iteration cap, marginal stopping tolerance.

    The default pairing max_iters=500 with eps=1/500 reads the shared tuning
    value as both the iteration budget and the inverse entropy weight; both
    knobs are independent here and freely overridable.
    """

    epsilon: float = 1.0 / 500.0
    max_iters: int = 500
    marginal_tol: float = 1e-6

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.marginal_tol <= 0:
            raise ValueError("marginal_tol must be > 0")


@dataclass
class SinkhornResult:
    plan: np.ndarray  # K x K, strictly positive, rows/cols ~ 1
    distance: float  # Tr[M C^T], regularization excluded
    iterations_used: int
    marginal_residual: float
    converged: bool


def _norms(x: np.ndarray, side: str) -> np.ndarray:
    norms = np.sqrt(np.sum(x * x, axis=1))
    bad = np.nonzero(norms == 0.0)[0]
    if bad.size:
        raise ValueError(f"cosine cost undefined: {side} row {int(bad[0])} has zero norm")
    return norms


def pairwise_cost(x: np.ndarray, y: np.ndarray, spec: CostSpec) -> np.ndarray:
    """K x K cost matrix C with C[i, j] = c(x_i, y_j).

    For the cosine kinds `x` and `y` are whatever space the cost is defined
    on: raw features for `raw-cosine`, critic embeddings for
    `learned-cosine`.
    """
    x = as_matrix(x, "x")
    y = as_matrix(y, "y")
    if x.shape[1] != y.shape[1]:
        raise ValueError(f"dimension mismatch: x has d={x.shape[1]}, y has d={y.shape[1]}")
    if spec.is_cosine:
        nx = _norms(x, "x")
        ny = _norms(y, "y")
        cos = (x @ y.T) / np.outer(nx, ny)
        c = 1.0 - np.clip(cos, -1.0, 1.0)
    elif spec.kind == "squared-euclidean":
        sq = np.sum(x * x, axis=1)[:, None] + np.sum(y * y, axis=1)[None, :] - 2.0 * (x @ y.T)
        c = np.maximum(sq, 0.0)
    else:  # euclidean
        sq = np.sum(x * x, axis=1)[:, None] + np.sum(y * y, axis=1)[None, :] - 2.0 * (x @ y.T)
        c = np.sqrt(np.maximum(sq, 0.0))
    return check_finite(c, "cost matrix")


def _check_square_cost(c: np.ndarray) -> np.ndarray:
    c = as_matrix(c, "cost matrix")
    if c.shape[0] != c.shape[1]:
        raise ValueError(f"cost matrix must be square, got {c.shape}")
    if not np.all(np.isfinite(c)):
        raise ValueError("cost matrix contains non-finite entries")
    return c


def sinkhorn(c: np.ndarray, cfg: SinkhornConfig, log_domain: bool = True) -> SinkhornResult:
    """Solve the smoothed matching problem for cost matrix `c`.

    Alternates row/column potential updates in the log domain (the default;
    survives epsilon down to ~1e-3 on order-one costs without underflow) or
    in the plain scaling domain, which is only safe at large epsilon and is
    kept as an independent cross-check path.

    Stops once both marginal residuals (inf-norm of row sums minus one and
    column sums minus one) fall below `cfg.marginal_tol`, or at
    `cfg.max_iters`; hitting the cap flags the result as unconverged rather
    than raising.
    """
    c = _check_square_cost(c)
    if log_domain:
        return _sinkhorn_log(c, cfg)
    return _sinkhorn_plain(c, cfg)


def _plan_from_potentials(c: np.ndarray, f: np.ndarray, g: np.ndarray, eps: float) -> np.ndarray:
    return np.exp((f[:, None] + g[None, :] - c) / eps)


def _lse_cols(a: np.ndarray) -> np.ndarray:
    m = a.max(axis=0)
    return m + np.log(np.exp(a - m[None, :]).sum(axis=0))


def _lse_rows(a: np.ndarray) -> np.ndarray:
    m = a.max(axis=1)
    return m + np.log(np.exp(a - m[:, None]).sum(axis=1))


def _sinkhorn_log(c: np.ndarray, cfg: SinkhornConfig) -> SinkhornResult:
    """Log-domain iterations with a geometric warm start on epsilon.

    Cold-started iterations at small epsilon spend thousands of sweeps in a
    transient, so the potentials are first carried down a decreasing epsilon
    ladder (a handful of sweeps per rung) before iterating at the target
    value until the marginal criterion is met. The fixed point at the target
    epsilon is unchanged; only the approach to it is accelerated. All sweeps,
    warm-up included, count against max_iters.
    """
    eps_target = cfg.epsilon
    k = c.shape[0]
    f = np.zeros(k)
    g = np.zeros(k)
    iterations = 0

    spread = float(c.max() - c.min())
    ladder = []
    if spread > 0:
        eps = spread
        while eps > eps_target:
            ladder.append(eps)
            eps /= 3.0
    for eps in ladder:
        for _ in range(5):
            if iterations >= cfg.max_iters:
                break
            g = -eps * _lse_cols((f[:, None] - c) / eps)
            f = -eps * _lse_rows((g[None, :] - c) / eps)
            iterations += 1

    eps = eps_target
    settled = 0
    while iterations < cfg.max_iters:
        # One reduction serves both the column-residual check of the current
        # plan and the next column-potential update: the plan's column sums
        # are exp(g/eps + t) with t below, and its row sums are exactly one
        # once f has been set from the current g at this epsilon.
        t = _lse_cols((f[:, None] - c) / eps)
        if settled > 0:
            col_res = float(np.max(np.abs(np.exp(g / eps + t) - 1.0)))
            if col_res <= cfg.marginal_tol:
                break
        g = -eps * t
        f = -eps * _lse_rows((g[None, :] - c) / eps)
        iterations += 1
        settled += 1
    plan = _plan_from_potentials(c, f, g, eps)
    return _finish(plan, c, iterations, cfg)


def _sinkhorn_plain(c: np.ndarray, cfg: SinkhornConfig) -> SinkhornResult:
    eps = cfg.epsilon
    k = c.shape[0]
    kernel = np.exp(-c / eps)
    if np.any(kernel <= 0.0) or not np.all(np.isfinite(kernel)):
        raise FloatingPointError(
            "plain-domain kernel underflowed; rerun with log_domain=True or larger epsilon"
        )
    u = np.ones(k)
    v = np.ones(k)
    iterations = 0
    for iterations in range(1, cfg.max_iters + 1):
        v = 1.0 / (kernel.T @ u)
        u = 1.0 / (kernel @ v)
        plan = (u[:, None] * kernel) * v[None, :]
        row_res = float(np.max(np.abs(plan.sum(axis=1) - 1.0)))
        col_res = float(np.max(np.abs(plan.sum(axis=0) - 1.0)))
        if row_res <= cfg.marginal_tol and col_res <= cfg.marginal_tol:
            break
    plan = (u[:, None] * kernel) * v[None, :]
    return _finish(plan, c, iterations, cfg)


def _finish(plan: np.ndarray, c: np.ndarray, iterations: int, cfg: SinkhornConfig) -> SinkhornResult:
    row_res = float(np.max(np.abs(plan.sum(axis=1) - 1.0)))
    col_res = float(np.max(np.abs(plan.sum(axis=0) - 1.0)))
    residual = max(row_res, col_res)
    distance = float(np.sum(plan * c))
    converged = residual <= cfg.marginal_tol
    check_finite(plan, "transport plan")
    return SinkhornResult(
        plan=plan,
        distance=distance,
        iterations_used=iterations,
        marginal_residual=residual,
        converged=converged,
    )


def exact_assignment(c: np.ndarray, enumeration_limit: int = BRUTE_FORCE_LIMIT):
    """Minimizing permutation and its total cost under unit marginals.

    With unit row/column marginals the exact optimum of the matching problem
    is a permutation matrix, so this doubles as the unsmoothed reference the
    solver above is tested against. Uses exhaustive enumeration up to
    `enumeration_limit` and the polynomial assignment path beyond; the two
    agree exactly where both run.
    """
    c = _check_square_cost(c)
    k = c.shape[0]
    if k <= enumeration_limit:
        best_perm = None
        best = np.inf
        rows = np.arange(k)
        for perm in itertools.permutations(range(k)):
            total = float(c[rows, perm].sum())
            if total < best:
                best = total
                best_perm = perm
        return np.array(best_perm, dtype=np.intp), best
    rows, cols = linear_sum_assignment(c)
    perm = np.empty(k, dtype=np.intp)
    perm[rows] = cols
    return perm, float(c[rows, cols].sum())


def plan_entropy(plan: np.ndarray) -> float:
    """Entropy -sum_ij M_ij log M_ij of a strictly positive plan."""
    plan = as_matrix(plan, "plan")
    if np.any(plan <= 0.0):
        raise ValueError("plan entropy requires strictly positive entries")
    return float(-np.sum(plan * np.log(plan)))


def random_match_distance(c: np.ndarray, rng: Rng) -> float:
    """Transport cost of a uniformly random permutation matching.

    Averaged over permutations this equals Tr[U C^T] with U the uniform plan
    (all entries 1/K), i.e. K times the grand mean of C.
    """
    c = _check_square_cost(c)
    perm = rng.permutation(c.shape[0])
    return float(c[np.arange(c.shape[0]), perm].sum())


def uniform_plan_distance(c: np.ndarray) -> float:
    """Tr[U C^T] for the uniform plan U with every entry 1/K."""
    c = _check_square_cost(c)
    return float(c.sum() / c.shape[0])
