"""Discrete Monge-Kantorovitch solver and validators.

Quadratic-cost couplings between weighted point clouds: an exact solver
(assignment for uniform clouds, LP otherwise) with a complementary-slackness
certificate, empirical squared-Wasserstein estimation by importance
resampling, the relative-entropy transport bound, cyclic-monotonicity
probing of plan supports, and closed-form Gaussian transport maps with
their Jacobian identity.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from math import erfc, exp, sqrt

import numpy as np
from scipy import sparse
from scipy.optimize import linear_sum_assignment, linprog

from .gaussian import SamplePool, derived_seed
from .inequalities import InequalityReport, make_report
from .measure import det2

EXACT_SIZE_CAP = 4096
MARGINAL_TOL = 1e-9
SLACKNESS_TOL = 1e-8


class SolverSizeError(ValueError):
    """Instance too large for the exact path; entropic mode is the fallback."""


@dataclass(frozen=True)
class PointCloud:
    """Weighted empirical measure: n points in R^d, weights summing to 1."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        w = np.asarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        if len(w) != pts.shape[0]:
            raise ValueError("one weight per point required")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")

    @classmethod
    def uniform(cls, points):
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        n = points.shape[0]
        return cls(points, np.full(n, 1.0 / n))

    @property
    def size(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    def to_csv(self, path):
        header = ",".join(f"x{j + 1}" for j in range(self.dim)) + ",weight"
        np.savetxt(path, np.hstack([self.points, self.weights[:, None]]),
                   delimiter=",", header=header, comments="", fmt="%.17g")


def _cost_matrix(source: PointCloud, target: PointCloud) -> np.ndarray:
    diff = source.points[:, None, :] - target.points[None, :, :]
    return np.sum(diff * diff, axis=2)


@dataclass
class TransportPlan:
    """Coupling matrix with marginals, cost and an optimality certificate."""

    matrix: np.ndarray
    source: PointCloud
    target: PointCloud
    cost: float
    optimality_residual: float | None = None
    method: str = "exact"
    epsilon: float | None = None
    marginal_tol: float = MARGINAL_TOL

    def __post_init__(self):
        g = self.matrix
        if np.any(g < -self.marginal_tol):
            raise ValueError("coupling has negative mass")
        if (np.abs(g.sum(axis=1) - self.source.weights).max() > self.marginal_tol
                or np.abs(g.sum(axis=0) - self.target.weights).max() > self.marginal_tol):
            raise ValueError("coupling marginals do not match the clouds")

    def support(self, rel_tol: float = 1e-12):
        """Indices (i, j) carrying mass above rel_tol * max entry."""
        threshold = rel_tol * self.matrix.max()
        rows, cols = np.nonzero(self.matrix > threshold)
        return list(zip(rows.tolist(), cols.tolist()))

    def to_csv(self, path):
        rows, cols = np.nonzero(self.matrix)
        triplets = np.column_stack([rows, cols, self.matrix[rows, cols]])
        np.savetxt(path, triplets, delimiter=",", header="i,j,mass",
                   comments="", fmt=["%d", "%d", "%.17g"])


def _assignment_duals(cost, perm):
    """Feasible dual potentials for an optimal assignment.

    Bellman-Ford relaxation of v_j <= v_{perm(i)} + c_ij - c_{i,perm(i)};
    converges because an optimal matching admits no negative cycle.
    """
    n = cost.shape[0]
    matched_cost = cost[np.arange(n), perm]
    v = np.zeros(n)
    for _ in range(n):
        candidates = v[perm][:, None] + cost - matched_cost[:, None]
        new_v = np.minimum(v, candidates.min(axis=0))
        if np.allclose(new_v, v, rtol=0.0, atol=1e-15):
            v = new_v
            break
        v = new_v
    u = matched_cost - v[perm]
    return u, v


def _slackness_residual(cost, plan, u, v):
    spread = u[:, None] + v[None, :] - cost
    feasibility = max(0.0, float(spread.max()))
    mass = plan > 1e-12 * plan.max()
    support_gap = float(np.abs(spread[mass]).max()) if mass.any() else 0.0
    return max(feasibility, support_gap)


def solve_discrete_ot(source: PointCloud, target: PointCloud,
                      method: str = "exact",
                      epsilon: float | None = None) -> TransportPlan:
    """Optimal quadratic-cost coupling between two clouds.

    The exact path solves an assignment problem when both clouds are uniform
    with equal counts, an LP otherwise, and certifies optimality by the
    complementary-slackness residual of recovered dual potentials.  The
    entropic path (explicit opt-in) runs log-domain scaling iterations with
    the stated regularization and carries no certificate.
    """
    if source.dim != target.dim:
        raise ValueError("clouds live in different dimensions")
    n, m = source.size, target.size
    cost = _cost_matrix(source, target)

    if method == "entropic":
        if epsilon is None or epsilon <= 0:
            raise ValueError("entropic mode needs a positive epsilon")
        plan = _sinkhorn(source.weights, target.weights, cost, epsilon)
        return TransportPlan(plan, source, target,
                             float(np.sum(plan * cost)),
                             optimality_residual=None,
                             method="entropic", epsilon=epsilon,
                             marginal_tol=1e-6)
    if method != "exact":
        raise ValueError("method must be 'exact' or 'entropic'")
    if max(n, m) > EXACT_SIZE_CAP:
        raise SolverSizeError(
            f"instance size {max(n, m)} exceeds {EXACT_SIZE_CAP}; "
            "use method='entropic' with an explicit epsilon"
        )

    uniform = (n == m
               and np.allclose(source.weights, 1.0 / n, rtol=0.0, atol=1e-12)
               and np.allclose(target.weights, 1.0 / n, rtol=0.0, atol=1e-12))
    if uniform:
        rows, cols = linear_sum_assignment(cost)
        perm = cols[np.argsort(rows)]
        plan = np.zeros((n, n))
        plan[np.arange(n), perm] = 1.0 / n
        u, v = _assignment_duals(cost, perm)
        residual = _slackness_residual(cost, plan, u, v)
        total = float(cost[np.arange(n), perm].mean())
        return TransportPlan(plan, source, target, total,
                             optimality_residual=residual)

    a_eq = sparse.vstack([
        sparse.kron(sparse.eye(n), np.ones((1, m))),
        sparse.kron(np.ones((1, n)), sparse.eye(m)),
    ]).tocsr()
    b_eq = np.concatenate([source.weights, target.weights])
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq,
                  bounds=(0, None), method="highs")
    if not res.success:
        raise ValueError(f"transport LP failed: {res.message}")
    plan = res.x.reshape(n, m)
    duals = np.asarray(res.eqlin.marginals)
    u, v = duals[:n], duals[n:]
    residual = _slackness_residual(cost, plan, u, v)
    return TransportPlan(plan, source, target, float(res.fun),
                         optimality_residual=residual)


def _sinkhorn(a, b, cost, epsilon, max_iter=5000, tol=1e-12):
    log_a = np.log(a)
    log_b = np.log(b)
    f = np.zeros(len(a))
    g = np.zeros(len(b))
    scaled = -cost / epsilon
    for _ in range(max_iter):
        g = epsilon * (log_b - _logsumexp_rows((scaled + f[:, None] / epsilon).T))
        f = epsilon * (log_a - _logsumexp_rows(scaled + g[None, :] / epsilon))
        plan = np.exp(scaled + f[:, None] / epsilon + g[None, :] / epsilon)
        if np.abs(plan.sum(axis=0) - b).max() < tol:
            break
    # ending on the f-update makes row marginals exact; the column error is
    # the convergence tolerance and stays within the entropic plan tolerance
    plan *= (a / plan.sum(axis=1))[:, None]
    return plan


def _logsumexp_rows(mat):
    peak = mat.max(axis=1, keepdims=True)
    return (peak + np.log(np.exp(mat - peak).sum(axis=1, keepdims=True))).ravel()


def brute_force_uniform_cost(source: PointCloud, target: PointCloud) -> float:
    """Minimum over all permutations; oracle for small uniform instances."""
    from itertools import permutations

    n = source.size
    if n != target.size or n > 8:
        raise ValueError("brute force is for uniform instances of size <= 8")
    cost = _cost_matrix(source, target)
    best = np.inf
    for perm in permutations(range(n)):
        best = min(best, cost[np.arange(n), perm].mean())
    return float(best)


def cyclic_monotonicity_residual(plan: TransportPlan, cycle_len: int = 4,
                                 trials: int = 10000, seed: int = 0) -> float:
    """Largest sampled cycle sum sum_i <y_i, x_{s(i)} - x_i> over the support.

    Nonpositive (up to tolerance) exactly when the support is cyclically
    monotone; small supports are enumerated exhaustively.
    """
    if not 2 <= cycle_len <= 6:
        raise ValueError("cycle length must be between 2 and 6")
    support = plan.support()
    if not support:
        raise ValueError("plan has empty support")
    xs = plan.source.points
    ys = plan.target.points

    def cycle_sum(pairs):
        x = xs[[i for i, _ in pairs]]
        y = ys[[j for _, j in pairs]]
        x_next = np.roll(x, -1, axis=0)
        return float(np.sum(y * (x_next - x)))

    best = -np.inf
    from itertools import combinations, permutations

    n_support = len(support)
    total_cycles = 0.0
    for k in range(2, cycle_len + 1):
        count = 1.0
        for i in range(k):
            count *= max(n_support - i, 1)
        total_cycles += count
    if total_cycles <= trials:
        for k in range(2, cycle_len + 1):
            for combo in combinations(range(n_support), k):
                first = combo[0]
                for rest in permutations(combo[1:]):
                    pairs = [support[first]] + [support[r] for r in rest]
                    best = max(best, cycle_sum(pairs))
    else:
        rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
        for _ in range(trials):
            k = int(rng.integers(2, cycle_len + 1))
            take = rng.choice(n_support, size=min(k, n_support), replace=False)
            best = max(best, cycle_sum([support[t] for t in take]))
    return best


# -- empirical Wasserstein estimation --------------------------------------------


def systematic_resample(weights, n_points, offset):
    """Low-variance resampling: n stratified positions against the weight CDF."""
    w = np.asarray(weights, dtype=np.float64)
    w = w / w.sum()
    positions = (offset + np.arange(n_points)) / n_points
    return np.searchsorted(np.cumsum(w), positions)


@dataclass
class WassersteinEstimate:
    """Resampled squared-distance estimate with repetition spread."""

    estimate: float
    se: float
    repetitions: int
    n_points: int
    effective_sample_size: float
    per_rep: list = field(default_factory=list)


def wasserstein_sq(density, pool: SamplePool, n_points: int,
                   repetitions: int = 20,
                   project_dim: int | None = None) -> WassersteinEstimate:
    """Squared transport distance between the base law and density * law.

    Draws the source cloud uniformly from one half of the pool and the
    target cloud by systematic importance resampling from the other half,
    solves the exact coupling, and repeats; the standard error is the spread
    across repetitions.  The estimate converges from below as the projection
    dimension grows and carries the usual empirical upward bias at finite n.
    """
    x = pool.samples
    m = len(x)
    if 2 * n_points > m:
        raise ValueError("pool too small for the requested cloud size")
    half = m // 2
    src_rows, tgt_rows = x[:half], x[half:]
    w = np.asarray(density(tgt_rows), dtype=np.float64)
    if np.any(w < 0):
        raise ValueError("density must be nonnegative")
    w_mean = w.mean()
    if abs(w_mean - 1.0) > 0.05:
        warnings.warn(
            f"density has sample mean {w_mean:.3f}; renormalizing", stacklevel=2
        )
    ess = float(w.sum() ** 2 / np.sum(w * w))
    if ess < 4 * n_points:
        warnings.warn(
            f"degenerate density: effective sample size {ess:.0f} "
            f"for clouds of {n_points}", stacklevel=2
        )
    take = slice(None, project_dim) if project_dim else slice(None)
    costs = []
    for rep in range(repetitions):
        rng = np.random.Generator(
            np.random.Philox(key=np.uint64(derived_seed(pool.seed, 1000 + rep)))
        )
        src_idx = rng.choice(half, size=n_points, replace=False)
        tgt_idx = systematic_resample(w, n_points, rng.random())
        source = PointCloud.uniform(src_rows[src_idx][:, take])
        target = PointCloud.uniform(tgt_rows[tgt_idx][:, take])
        costs.append(solve_discrete_ot(source, target).cost)
    costs = np.asarray(costs)
    se = float(costs.std(ddof=1) / sqrt(repetitions)) if repetitions > 1 else 0.0
    return WassersteinEstimate(
        estimate=float(costs.mean()), se=se, repetitions=repetitions,
        n_points=n_points, effective_sample_size=ess, per_rep=costs.tolist(),
    )


def talagrand_check(density, pool: SamplePool, n_points: int,
                    repetitions: int = 20) -> InequalityReport:
    """d^2(density*mu, mu) <= 2 E[L log L], both sides estimated."""
    est = wasserstein_sq(density, pool, n_points, repetitions)
    w = np.asarray(density(pool.samples), dtype=np.float64)
    terms = np.where(w > 0, w * np.log(np.where(w > 0, w, 1.0)), 0.0)
    rhs = 2.0 * float(terms.mean())
    rhs_se = 2.0 * float(terms.std(ddof=1) / sqrt(len(terms)))
    return make_report("talagrand", est.estimate, rhs, est.se, rhs_se)


def dim_monotonicity_check(density, dims, pool: SamplePool, n_points: int,
                           repetitions: int = 20):
    """Squared-distance estimates under coordinate projections.

    Returns [(m, estimate, se)] for the ascending dims plus a flag that the
    sequence is nondecreasing within two combined standard errors.
    """
    dims = list(dims)
    if any(b <= a for a, b in zip(dims, dims[1:])):
        raise ValueError("dims must be strictly increasing")
    rows = []
    for m in dims:
        est = wasserstein_sq(density, pool, n_points, repetitions, project_dim=m)
        rows.append((m, est.estimate, est.se))
    monotone = all(
        rows[k + 1][1] >= rows[k][1] - 2.0 * sqrt(rows[k][2] ** 2 + rows[k + 1][2] ** 2)
        for k in range(len(rows) - 1)
    )
    return rows, monotone


# -- Gaussian closed forms ---------------------------------------------------------


@dataclass(frozen=True)
class BrenierMap:
    """Linear transport map x -> A x from the standard Gaussian, with its
    quadratic potential x -> <(A - I) x, x> / 2."""

    matrix: np.ndarray

    def apply(self, samples):
        return np.asarray(samples, dtype=np.float64) @ self.matrix.T

    def potential(self, coords):
        coords = np.asarray(coords, dtype=np.float64)
        shifted = self.matrix - np.eye(self.matrix.shape[0])
        return 0.5 * float(coords @ shifted @ coords)

    @property
    def hessian(self):
        return self.matrix - np.eye(self.matrix.shape[0])

    @property
    def min_hessian_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.hessian).min())

    @property
    def one_convex(self):
        return self.min_hessian_eigenvalue >= -1.0 + 1e-12


def gaussian_brenier(cov_target) -> BrenierMap:
    """Transport of the standard Gaussian onto N(0, cov): T(x) = cov^{1/2} x."""
    cov = np.asarray(cov_target, dtype=np.float64)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError("covariance must be square")
    if np.abs(cov - cov.T).max() > 1e-10:
        raise ValueError("covariance must be symmetric")
    eigvals, eigvecs = np.linalg.eigh(cov)
    if eigvals.min() <= 0:
        raise ValueError("covariance must be positive definite")
    root = eigvecs @ np.diag(np.sqrt(eigvals)) @ eigvecs.T
    bmap = BrenierMap(root)
    assert bmap.one_convex
    return bmap


def gaussian_density_ratio(cov_target, points) -> np.ndarray:
    """dN(0, cov)/dN(0, I) at the given points."""
    cov = np.asarray(cov_target, dtype=np.float64)
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    inv = np.linalg.inv(cov)
    logdet = np.linalg.slogdet(cov)[1]
    quad = np.einsum("mi,ij,mj->m", points, inv, points)
    return np.exp(-0.5 * logdet - 0.5 * quad + 0.5 * np.sum(points * points, axis=1))


def monge_ampere_residual(cov_target, test_points) -> float:
    """max |Lambda(x) L(T x) - 1| over the test points, where Lambda is the
    Gaussian Jacobian det2(I + D^2 phi) exp(-L_a phi - |grad phi|^2 / 2)."""
    bmap = gaussian_brenier(cov_target)
    points = np.atleast_2d(np.asarray(test_points, dtype=np.float64))
    hess = bmap.hessian
    grads = points @ hess.T
    div_term = np.sum(grads * points, axis=1) - np.trace(hess)
    jacobian = det2(hess) * np.exp(-div_term - 0.5 * np.sum(grads * grads, axis=1))
    ratio = gaussian_density_ratio(cov_target, bmap.apply(points))
    return float(np.abs(jacobian * ratio - 1.0).max())


def gauge_halfspace_check(threshold: float, pool: SamplePool) -> InequalityReport:
    """mu{x_1 >= a} <= exp(-E[q_A^2]/2) with the gauge q_A(x) = (a - x_1)_+.

    The left side uses the exact Gaussian tail; the expectation on the right
    is empirical.
    """
    lhs = 0.5 * erfc(threshold / sqrt(2.0))
    gauge_sq = np.maximum(threshold - pool.samples[:, 0], 0.0) ** 2
    mean = float(gauge_sq.mean())
    mean_se = float(gauge_sq.std(ddof=1) / sqrt(len(gauge_sq)))
    rhs = exp(-mean / 2.0)
    rhs_se = rhs * mean_se / 2.0
    return make_report(f"gauge_halfspace_a={threshold:g}", lhs, rhs, 0.0, rhs_se)
