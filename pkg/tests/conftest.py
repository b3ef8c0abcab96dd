"""Shared generators and independent brute-force oracles."""

import itertools

import numpy as np

from abconvex import (
    ConstrainedInstance,
    ConstraintMap,
    ElemFamily,
    GridFn,
    PerturbationProblem,
    TransportProblem,
    build_metric_space,
    default_dual_grid,
)


def line_space(points, validate="full"):
    return build_metric_space(np.asarray(points, dtype=float)[:, None],
                              validate=validate)


def spaced_line(rng, n, min_gap=0.05, max_gap=1.0):
    """1-D metric space with a guaranteed minimum spacing."""
    gaps = rng.uniform(min_gap, max_gap, size=n - 1)
    pts = np.concatenate([[0.0], np.cumsum(gaps)])
    pts -= pts[rng.integers(n)]
    return build_metric_space(pts[:, None], validate="fast")


def random_dual_grid(rng, Y, V=None, kind=None):
    kinds = ["affine", "quad_minus", "metric", "sigma_nu"]
    kind = kind or kinds[rng.integers(len(kinds))]
    if kind == "affine":
        fam = ElemFamily.affine(Y)
        return default_dual_grid(fam, V, slope_count=7)
    if kind == "quad_minus":
        fam = ElemFamily.quad_minus(Y)
        return default_dual_grid(fam, V, slope_count=3, curvature_levels=3)
    if kind == "metric":
        fam = ElemFamily.metric(Y)
        return default_dual_grid(fam, V, curvature_levels=3, max_anchors=6)
    sigma, nu = random_sigma_nu(rng, Y)
    fam = ElemFamily.sigma_nu(Y, sigma, nu)
    return default_dual_grid(fam, curvature_levels=4)


def random_sigma_nu(rng, Y):
    """Random sigma/nu pair honoring the vanish-at-origin constraint."""
    sigma = np.abs(rng.normal(size=Y.n))
    nu = rng.normal(size=Y.n)
    o = Y.origin_index()
    if o is not None:
        sigma[o] = 0.0
        nu[o] = 0.0
    return GridFn(Y, sigma), GridFn(Y, nu)


def random_perturbation(rng, max_x=50, max_y=50, inf_prob=0.3):
    """A random proper perturbation table with a mixed-family multiplier grid."""
    n_x = int(rng.integers(1, max_x + 1))
    n_y = int(rng.integers(2, max_y + 1))
    Y = spaced_line(rng, n_y)
    scale = float(rng.choice([0.5, 2.0, 10.0]))
    p = rng.normal(size=(n_x, n_y)) * scale
    if rng.random() < inf_prob:
        mask = rng.random(size=p.shape) < 0.25
        p = np.where(mask, np.inf, p)
        for y in np.flatnonzero(~np.isfinite(p).any(axis=0)):
            p[rng.integers(n_x), y] = rng.normal() * scale
    y0 = int(rng.integers(n_y))
    prob = PerturbationProblem(Y=Y, p=p, y0=y0)
    V = GridFn(Y, p.min(axis=0))
    grid = random_dual_grid(rng, Y, V)
    return prob, grid


def random_constrained(rng, max_x=20, max_y=20):
    """Feasible, bounded constrained instance (y0 admits a finite objective)."""
    n_x = int(rng.integers(1, max_x + 1))
    n_y = int(rng.integers(2, max_y + 1))
    Y = spaced_line(rng, n_y, min_gap=0.1)
    f = rng.uniform(-5.0, 5.0, size=n_x)
    sets = []
    for y in range(n_y):
        size = int(rng.integers(1, n_x + 1))
        sets.append(frozenset(rng.choice(n_x, size=size, replace=False).tolist()))
    y0 = int(rng.integers(n_y))
    cmap = ConstraintMap(feasible=tuple(sets), n_x=n_x)
    return ConstrainedInstance(f=GridFn(n_x, f), map=cmap, Y=Y, y0=y0)


def random_transport(rng, max_n=50, max_m=50):
    n = int(rng.integers(1, max_n + 1))
    m = int(rng.integers(1, max_m + 1))
    cost = rng.uniform(0.0, 10.0, size=(n, m))
    mu = rng.uniform(0.1, 1.0, size=n)
    nu = rng.uniform(0.1, 1.0, size=m)
    mu *= nu.sum() / mu.sum()
    return TransportProblem(cost=cost, mu=mu, nu=nu)


# ---------------------------------------------------------------------------
# independent oracles (plain loops, no shared code paths with the library)
# ---------------------------------------------------------------------------

def brute_conjugate(member_values, f_values):
    """sup_x (phi(x) - f(x)) by direct scan."""
    out = []
    for row in member_values:
        best = -np.inf
        for phi, fv in zip(row, f_values):
            best = max(best, phi - fv)
        out.append(best)
    return np.asarray(out)


def brute_biconjugate(member_values, f_values):
    star = brute_conjugate(member_values, f_values)
    out = []
    for x in range(len(f_values)):
        best = -np.inf
        for j in range(len(star)):
            best = max(best, member_values[j][x] - star[j])
        out.append(best)
    return np.asarray(out)


def brute_duality_values(p, member_values, y0):
    """(primal, dual) by direct triple loops over the tables."""
    n_x, n_y = p.shape
    P = len(member_values)
    L = np.empty((n_x, P))
    for x in range(n_x):
        for j in range(P):
            s = -np.inf
            for y in range(n_y):
                s = max(s, member_values[j][y] - p[x, y])
            L[x, j] = member_values[j][y0] - s
    primal = min(max(L[x, j] for j in range(P)) for x in range(n_x))
    dual = max(min(L[x, j] for x in range(n_x)) for j in range(P))
    return primal, dual


def lower_convex_envelope_1d(xs, fs):
    """Values at xs of the lower convex envelope of the sample points."""
    n = len(xs)
    out = np.full(n, np.inf)
    for i in range(n):
        for a in range(n):
            for b in range(n):
                if xs[a] <= xs[i] <= xs[b] and xs[b] > xs[a]:
                    t = (xs[i] - xs[a]) / (xs[b] - xs[a])
                    out[i] = min(out[i], (1 - t) * fs[a] + t * fs[b])
        if not np.isfinite(out[i]):
            out[i] = fs[i]
    return out


def transport_vertex_oracle(cost, mu, nu, feas_tol=1e-9):
    """Exhaustive basic-feasible-solution enumeration of the transport polytope."""
    n, m = cost.shape
    cells = list(itertools.product(range(n), range(m)))
    k = n + m - 1
    best = np.inf
    rows = n + m
    for subset in itertools.combinations(cells, k):
        A = np.zeros((rows, k))
        for col, (i, j) in enumerate(subset):
            A[i, col] = 1.0
            A[n + j, col] = 1.0
        b = np.concatenate([mu, nu])
        A_red, b_red = A[:-1], b[:-1]
        if np.linalg.matrix_rank(A_red) < k:
            continue
        q, *_ = np.linalg.lstsq(A_red, b_red, rcond=None)
        if np.abs(A @ q - b).max() > 1e-7:
            continue
        if q.min() < -feas_tol:
            continue
        best = min(best, sum(qq * cost[i, j] for qq, (i, j) in zip(q, subset)))
    return best
