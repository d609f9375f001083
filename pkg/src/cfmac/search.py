"""Distribution searches over product inputs and p(u0) prod_j p(x_j|u0).

Nothing here is certified globally optimal. The product-input MI search
is exact coordinate ascent on a concave-per-block objective, restarted from
a coarse grid and random points; the envelope search is seeded hill
climbing on softmax logits.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product as iproduct

import numpy as np

from .info import product_pmf


def _xlogy_rows(w):
    # sum_y w log2 w per row, with 0 log 0 = 0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(w > 0, w * np.log2(np.where(w > 0, w, 1.0)), 0.0)
    return t.sum(axis=-1)


def product_mi(mac, marginals) -> float:
    """I(X_1..X_k; Y) for independent inputs with the given marginals."""
    px = product_pmf(marginals)
    py = np.tensordot(px, mac.transition, axes=px.ndim)
    hy = -float(_xlogy_rows(py[None])[0])
    hyx = -float((px * _xlogy_rows(mac.transition)).sum())
    return max(hy - hyx, 0.0)


def _user_gain(mac, marginals, j, neg_hrow):
    """Per-symbol gradient of I w.r.t. p_j: E[D(W(.|x) || p(y)) | x_j]."""
    px = product_pmf(marginals)
    py = np.tensordot(px, mac.transition, axes=px.ndim)
    with np.errstate(divide="ignore"):
        log_py = np.where(py > 0, np.log2(np.where(py > 0, py, 1.0)), 0.0)
    # E_{x_-j}[ sum_y W log 1/p(y) ] - E_{x_-j}[ H(W(.|x)) ]
    cross = -np.tensordot(mac.transition, log_py, axes=([-1], [0]))  # shape of inputs
    d = cross - neg_hrow
    others = [m if i != j else np.ones_like(m) for i, m in enumerate(marginals)]
    weight = product_pmf(others)
    d = np.moveaxis(d * weight, j, 0).reshape(mac.input_sizes[j], -1).sum(axis=1)
    return d


def _tilt(p, g, table=None, budget=None):
    """p * 2^(g - s*b), normalized, with the smallest s >= 0 meeting the budget."""
    def tilted(s):
        e = g - (0.0 if table is None else s * table)
        e = e - e[p > 0].max()
        q = np.where(p > 0, p * np.exp2(e), 0.0)
        return q / q.sum()

    q = tilted(0.0)
    if table is None or np.dot(q, table) <= budget:
        return q
    lo, hi = 0.0, 1.0
    while np.dot(tilted(hi), table) > budget and hi < 1e6:
        hi *= 2
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if np.dot(tilted(mid), table) > budget:
            lo = mid
        else:
            hi = mid
    return tilted(hi)


@dataclass
class ProductSearchResult:
    value: float
    marginals: list
    converged: bool
    iterations: int

    @property
    def pmf(self) -> np.ndarray:
        return product_pmf(self.marginals)


def _ascend(mac, marginals, tol, max_iter):
    neg_hrow = -_xlogy_rows(mac.transition)
    costs = mac.costs
    value = product_mi(mac, marginals)
    for it in range(1, max_iter + 1):
        for j in range(mac.k):
            g = _user_gain(mac, marginals, j, neg_hrow)
            table = None if costs is None else costs[j].table
            budget = None if costs is None else costs[j].budget
            marginals[j] = _tilt(marginals[j], g, table, budget)
        new = product_mi(mac, marginals)
        if abs(new - value) < tol:
            return new, True, it
        value = new
    return value, False, max_iter


def _feasible_start(mac, marginals):
    if mac.costs is None:
        return marginals
    out = []
    for m, c in zip(marginals, mac.costs):
        if np.dot(m, c.table) > c.budget:
            # pull toward the cheapest symbol until the budget holds
            cheap = np.zeros_like(m)
            cheap[np.argmin(c.table)] = 1.0
            lo, hi = 0.0, 1.0
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if np.dot((1 - mid) * m + mid * cheap, c.table) > c.budget:
                    lo = mid
                else:
                    hi = mid
            m = (1 - hi) * m + hi * cheap
            m = np.maximum(m, 1e-300)
            m /= m.sum()
        out.append(m)
    return out


def max_product_mi(mac, seed: int = 0, restarts: int = 8, grid: int = 5,
                   tol: float = 1e-14, max_iter: int = 20000) -> ProductSearchResult:
    """Maximize I(X;Y) over independent inputs p(x_1)...p(x_k).

    Starts: the uniform point, a coarse per-axis grid (binary inputs only,
    ``grid`` points in the open unit interval per axis) and Dirichlet draws.
    Each start is refined by blockwise exponentiated-gradient ascent, which
    is the Blahut-Arimoto update for one encoder with the others held fixed.
    """
    rng = np.random.default_rng(seed)
    starts = [[np.full(s, 1.0 / s) for s in mac.input_sizes]]
    if all(s == 2 for s in mac.input_sizes) and grid > 0 and grid ** mac.k <= 4096:
        pts = (np.arange(grid) + 0.5) / grid
        for combo in iproduct(pts, repeat=mac.k):
            starts.append([np.array([1 - a, a]) for a in combo])
    for _ in range(restarts):
        starts.append([rng.dirichlet(np.ones(s)) for s in mac.input_sizes])
    # cheap screening pass, then polish the best few
    scored = []
    for s in starts:
        s = _feasible_start(mac, [m.copy() for m in s])
        v, _, _ = _ascend(mac, s, 1e-9, 200)
        scored.append((v, s))
    scored.sort(key=lambda t: -t[0])
    best = None
    for v, s in scored[:3]:
        v, conv, it = _ascend(mac, s, tol, max_iter)
        if best is None or v > best.value:
            best = ProductSearchResult(v, s, conv, it)
    return best


def product_grid_oracle(mac, points: int = 64) -> tuple[float, tuple]:
    """Brute-force max of I over a grid of product pmfs (binary k=2 inputs)."""
    if mac.k != 2 or tuple(mac.input_sizes) != (2, 2):
        raise ValueError("grid oracle implemented for two binary inputs")
    a = np.linspace(0.0, 1.0, points)
    best, arg = -np.inf, None
    for p1 in a:
        for p2 in a:
            v = product_mi(mac, [np.array([1 - p1, p1]), np.array([1 - p2, p2])])
            if v > best:
                best, arg = v, (p1, p2)
    return best, arg


# -- envelope search over p(u0) prod_j p(x_j | u0) ---------------------------

def _softmax(z, axis=-1):
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def conditional_product_pmf(pu0, conds) -> np.ndarray:
    """Joint over (U0, X_1..X_k) from p(u0) and per-user tables p(x_j|u0)."""
    out = np.asarray(pu0, dtype=np.float64)
    for j, c in enumerate(conds):
        # broadcast p(x_j|u0) against the axes built so far
        out = out[..., None] * np.asarray(c).reshape((c.shape[0],) + (1,) * j + (c.shape[1],))
    return out


@dataclass
class EnvelopeResult:
    value: float
    pmf: np.ndarray  # joint over (U0, X_1..X_k)
    evaluations: int
    history: list


def _decode(theta, n_u0, sizes):
    pu0 = _softmax(theta[0])
    conds = [_softmax(t, axis=1) for t in theta[1:]]
    return conditional_product_pmf(pu0, conds)


def _random_theta(rng, n_u0, sizes, scale):
    return [rng.normal(0, scale, n_u0)] + [rng.normal(0, scale, (n_u0, s)) for s in sizes]


def envelope_search(objective, input_sizes, seed: int = 0, u0_sizes=(1, 2, 3, 4),
                    restarts: int = 3, steps: int = 60, extra_starts=()) -> EnvelopeResult:
    """Seeded hill climbing of ``objective(joint_u0_x)`` over product-given-U0 pmfs.

    ``objective`` returns a float (larger is better) or -inf for infeasible
    points. For every |U0| in ``u0_sizes`` several random logit initializations
    are climbed with Gaussian perturbations of shrinking scale. The search is a
    pure function of ``seed``, so two objectives explored with the same seed
    see the same sequence of candidate distributions as long as they accept
    the same moves.
    """
    rng = np.random.default_rng(seed)
    sizes = tuple(input_sizes)
    best_v, best_p, evals, history = -np.inf, None, 0, []
    for p in extra_starts:
        v = objective(np.asarray(p))
        evals += 1
        history.append(v)
        if v > best_v:
            best_v, best_p = v, np.asarray(p)
    for n_u0 in u0_sizes:
        for r in range(restarts):
            # first restart per size starts from uniform tables
            theta = _random_theta(rng, n_u0, sizes, 0.0 if r == 0 else 2.0)
            p = _decode(theta, n_u0, sizes)
            v = objective(p)
            evals += 1
            scale = 1.0
            for step in range(steps):
                cand = [t + rng.normal(0, scale, t.shape) for t in theta]
                pc = _decode(cand, n_u0, sizes)
                vc = objective(pc)
                evals += 1
                if vc > v:
                    theta, p, v = cand, pc, vc
                else:
                    scale = max(scale * 0.9, 1e-3)
            history.append(v)
            if v > best_v:
                best_v, best_p = v, p
    return EnvelopeResult(float(best_v), best_p, evals, history)
