"""Two-user Gaussian MAC with a CF: closed-form achievable region and its optimization.

Inputs are built as X_i / sqrt(P_i) = rho_i X'_i + sqrt(1 - rho_i^2) U0 with
U0 ~ N(0, 1) and (X'_1, X'_2) unit-variance Gaussians of correlation rho0.
Both CF output links carry c_out; the CF sees both messages. All rates are
in bits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOG2E = float(np.log2(np.e))


class Gaussian2Error(ValueError):
    pass


def rho0_cap(c1d, c2d):
    """Largest admissible rho0 for a given coordination split."""
    return np.sqrt(1.0 - np.exp2(-2.0 * (np.asarray(c1d) + np.asarray(c2d))))


def conditional_input_mi(rho0, rho1, rho2):
    """I(X1; X2 | U0) for the construction; zero once either input is a function of U0."""
    rho0 = np.asarray(rho0, dtype=np.float64)
    active = (np.asarray(rho1) > 0) & (np.asarray(rho2) > 0)
    with np.errstate(divide="ignore"):
        val = -0.5 * np.log2(np.maximum(1.0 - rho0 ** 2, 0.0))
    return np.where(active, val, 0.0)


@dataclass(frozen=True)
class Gaussian2Point:
    gamma1: float
    gamma2: float
    c_out: float
    rho0: float
    rho1: float
    rho2: float
    c1d: float
    c2d: float

    def __post_init__(self):
        if min(self.gamma1, self.gamma2, self.c_out) < 0:
            raise Gaussian2Error("SNRs and c_out must be nonnegative")
        for name in ("rho0", "rho1", "rho2"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise Gaussian2Error(f"{name} must lie in [0, 1]")
        if not (0 <= self.c1d <= self.c_out + 1e-15 and 0 <= self.c2d <= self.c_out + 1e-15):
            raise Gaussian2Error("c1d, c2d must lie in [0, c_out]")
        if self.rho0 > rho0_cap(self.c1d, self.c2d) + 1e-12:
            raise Gaussian2Error(f"rho0={self.rho0} exceeds its cap {float(rho0_cap(self.c1d, self.c2d)):.6g}")

    @property
    def c10(self) -> float:
        return self.c_out - self.c2d

    @property
    def c20(self) -> float:
        return self.c_out - self.c1d

    @property
    def zeta(self) -> float:
        return self.c1d + self.c2d - float(conditional_input_mi(self.rho0, self.rho1, self.rho2))


def corner_rates(g1, g2, c_out, rho0, rho1, rho2, c1d, c2d):
    """Vectorized right-hand sides (R1max, R2max, sum1, sum2) and which branch of each max binds."""
    g1, g2 = np.asarray(g1, dtype=np.float64), np.asarray(g2, dtype=np.float64)
    gbar = np.sqrt(g1 * g2)
    r0s = np.asarray(rho0) ** 2
    a1, a2 = np.asarray(rho1) ** 2 * g1, np.asarray(rho2) ** 2 * g2
    zeta = np.asarray(c1d) + np.asarray(c2d) - conditional_input_mi(rho0, rho1, rho2)
    c10 = np.asarray(c_out) - np.asarray(c2d)
    c20 = np.asarray(c_out) - np.asarray(c1d)
    num = 1.0 + a1 + a2 + 2.0 * np.asarray(rho0) * np.asarray(rho1) * np.asarray(rho2) * gbar
    lnum = 0.5 * np.log2(num)
    r1_a = lnum - 0.5 * np.log2(1.0 + (1.0 - r0s) * a2) - c1d
    r1_b = 0.5 * np.log2(1.0 + (1.0 - r0s) * a1) - zeta
    r2_a = lnum - 0.5 * np.log2(1.0 + (1.0 - r0s) * a1) - c2d
    r2_b = 0.5 * np.log2(1.0 + (1.0 - r0s) * a2) - zeta
    r1 = np.maximum(r1_a, r1_b) + c10
    r2 = np.maximum(r2_a, r2_b) + c20
    sum1 = lnum - zeta + c10 + c20
    cross = np.sqrt(np.maximum((1 - np.asarray(rho1) ** 2) * (1 - np.asarray(rho2) ** 2), 0.0))
    sum2 = 0.5 * np.log2(1.0 + g1 + g2 + 2.0 * (np.asarray(rho0) * np.asarray(rho1) * np.asarray(rho2) + cross) * gbar) - zeta
    branch = (r1_b > r1_a).astype(int) + 2 * (r2_b > r2_a).astype(int)
    return r1, r2, sum1, sum2, zeta, branch


def region_corner_rates(pt: Gaussian2Point):
    r1, r2, s1, s2, _, _ = corner_rates(pt.gamma1, pt.gamma2, pt.c_out, pt.rho0, pt.rho1, pt.rho2, pt.c1d, pt.c2d)
    return float(r1), float(r2), float(s1), float(s2)


def weighted_value(alpha, r1, r2, s, zeta=None):
    """max alpha R1 + (1 - alpha) R2 over {0 <= R1 <= r1, 0 <= R2 <= r2, R1 + R2 <= s}.

    -inf where the polytope is empty or zeta < 0.
    """
    r1, r2, s = np.broadcast_arrays(*(np.asarray(x, dtype=np.float64) for x in (r1, r2, s)))
    ok = (r1 >= 0) & (r2 >= 0) & (s >= 0)
    if zeta is not None:
        ok &= np.asarray(zeta) >= -1e-12
    if alpha >= 0.5:
        x1 = np.minimum(r1, s)
        x2 = np.minimum(r2, s - x1)
    else:
        x2 = np.minimum(r2, s)
        x1 = np.minimum(r1, s - x2)
    val = alpha * x1 + (1 - alpha) * x2
    return np.where(ok, val, -np.inf)


def c_alpha_zero(alpha, g1, g2) -> float:
    """Weighted no-cooperation optimum (corner of the classical pentagon)."""
    if alpha > 0.5:
        return c_alpha_zero(1 - alpha, g2, g1)
    return alpha / 2 * np.log2(1 + g1 + g2) + (1 - 2 * alpha) / 2 * np.log2(1 + g2)


@dataclass
class OptimizeResult:
    value: float
    point: Gaussian2Point
    branch: int
    evaluations: int


def _params_to_point(g1, g2, c_out, x):
    rho1, rho2, u1, u2, t = x
    c1d, c2d = u1 * c_out, u2 * c_out
    rho0 = np.asarray(t) * rho0_cap(c1d, c2d)
    return rho0, rho1, rho2, c1d, c2d


def _evaluate(g1, g2, c_out, alpha, x):
    rho0, rho1, rho2, c1d, c2d = _params_to_point(g1, g2, c_out, x)
    r1, r2, s1, s2, zeta, branch = corner_rates(g1, g2, c_out, rho0, rho1, rho2, c1d, c2d)
    return weighted_value(alpha, r1, r2, np.minimum(s1, s2), zeta), branch


def optimize_weighted(gamma1, gamma2, c_out, alpha, grid: int = 64, coarse: int = 12,
                      sweeps: int = 8, seeds=()) -> OptimizeResult:
    """Maximize alpha R1 + (1-alpha) R2 over the closed-form region.

    Parameters are (rho1, rho2, c1d/c_out, c2d/c_out, rho0/cap) in [0, 1]^5.
    A coarse tensor grid with ``coarse`` points per axis picks a start.
    Cyclic line searches with ``grid`` points per axis then refine it, each
    sweep shrinking the window around the incumbent. The Prop-5 and
    forwarding-only points are always among the starts. Deterministic.
    """
    if grid < 2 or coarse < 2:
        raise Gaussian2Error("grids need at least two points")
    g1, g2, c_out = float(gamma1), float(gamma2), float(c_out)
    axes = np.linspace(0.0, 1.0, coarse)
    mesh = np.meshgrid(*([axes] * 5), indexing="ij")
    flat = [m.ravel() for m in mesh]
    vals, _ = _evaluate(g1, g2, c_out, alpha, flat)
    starts = [np.array([f[int(np.argmax(vals))] for f in flat])]
    starts.append(np.array([1.0, 1.0, 1.0, 1.0, 1.0]))  # Prop-5 style: full coordination
    starts.append(np.array([1.0, 1.0, 0.0, 0.0, 0.0]))  # forwarding only
    starts.extend(np.asarray(s, dtype=np.float64) for s in seeds)
    evals = vals.size
    best_x, best_v = None, -np.inf
    for x in starts:
        x = x.copy()
        v = float(_evaluate(g1, g2, c_out, alpha, x)[0])
        width = 1.0
        for _ in range(sweeps):
            for i in range(5):
                lo, hi = max(0.0, x[i] - width / 2), min(1.0, x[i] + width / 2)
                line = np.unique(np.concatenate([np.linspace(lo, hi, grid), [x[i]]]))
                trial = np.tile(x[:, None], (1, line.size))
                trial[i] = line
                lv, _ = _evaluate(g1, g2, c_out, alpha, list(trial))
                evals += line.size
                j = int(np.argmax(lv))
                if lv[j] > v:
                    v, x = float(lv[j]), trial[:, j].copy()
            width *= 0.5
        if v > best_v:
            best_v, best_x = v, x
    rho0, rho1, rho2, c1d, c2d = _params_to_point(g1, g2, c_out, best_x)
    pt = Gaussian2Point(g1, g2, c_out, float(min(rho0, rho0_cap(c1d, c2d))), float(rho1), float(rho2),
                        float(c1d), float(c2d))
    branch = int(_evaluate(g1, g2, c_out, alpha, best_x)[1])
    return OptimizeResult(best_v, pt, branch, evals)


def forwarding_weighted(gamma1, gamma2, c_out, alpha, grid: int = 64, sweeps: int = 8) -> float:
    """Same optimization restricted to forwarding (no coordination, rho0 = 0)."""
    g1, g2, c_out = float(gamma1), float(gamma2), float(c_out)

    def f(r1, r2):
        a, b, s1, s2, z, _ = corner_rates(g1, g2, c_out, 0.0, r1, r2, 0.0, 0.0)
        return weighted_value(alpha, a, b, np.minimum(s1, s2), z)

    axis = np.linspace(0.0, 1.0, grid)
    m1, m2 = np.meshgrid(axis, axis, indexing="ij")
    vals = f(m1, m2)
    i = np.unravel_index(int(np.argmax(vals)), vals.shape)
    x, v = np.array([axis[i[0]], axis[i[1]]]), float(vals[i])
    width = 2.0 / grid
    for _ in range(sweeps):
        for d in range(2):
            line = np.linspace(max(0.0, x[d] - width), min(1.0, x[d] + width), grid)
            trial = np.tile(x[:, None], (1, grid))
            trial[d] = line
            lv = f(trial[0], trial[1])
            j = int(np.argmax(lv))
            if lv[j] > v:
                v, x = float(lv[j]), trial[:, j].copy()
        width *= 0.5
    return v


@dataclass
class AlphaBound:
    alpha: float
    c_out: float
    lower_bound: float
    sqrt_coefficient: float
    r1: float
    r2: float


def sqrt_coefficient(alpha, gamma1, gamma2) -> float:
    """Coefficient of sqrt(c_out) in the weighted-gain lower bound (log e taken as log2 e)."""
    return 2 * np.sqrt(gamma1 * gamma2 * LOG2E) / (1 + gamma1 + gamma2) * min(alpha, 1 - alpha)


def prop5_lower_bound(alpha, c_out, gamma1, gamma2) -> AlphaBound:
    """Exact gain alpha R1* + (1-alpha) R2* - C_alpha(0) of the full-coordination pair.

    For alpha > 1/2 the users' roles are swapped.
    """
    if c_out < 0:
        raise Gaussian2Error("c_out must be nonnegative")
    swap = alpha > 0.5
    a, ga, gb = (1 - alpha, gamma2, gamma1) if swap else (alpha, gamma1, gamma2)
    rho0 = np.sqrt(1 - np.exp2(-4 * c_out))
    gbar = np.sqrt(ga * gb)
    r1 = 0.5 * np.log2((1 + ga + gb + 2 * rho0 * gbar) / (1 + (1 - rho0 ** 2) * gb)) - c_out
    r2 = 0.5 * np.log2(1 + (1 - rho0 ** 2) * gb)
    bound = a * r1 + (1 - a) * r2 - c_alpha_zero(a, ga, gb)
    if swap:
        r1, r2 = r2, r1
    return AlphaBound(alpha, c_out, float(bound), sqrt_coefficient(alpha, gamma1, gamma2), float(r1), float(r2))


def figure2_data(c_out_grid, gamma1: float = 100.0, gamma2: float = 100.0, grid: int = 64) -> np.ndarray:
    """Rows (c_out, full sum gain, forwarding sum gain, sqrt term) at alpha = 1/2."""
    base = 2 * c_alpha_zero(0.5, gamma1, gamma2)
    coef = 2 * sqrt_coefficient(0.5, gamma1, gamma2)
    rows = []
    for c in np.asarray(c_out_grid, dtype=np.float64):
        if c < 0 or c > 1:
            raise Gaussian2Error("c_out grid must lie in [0, 1]")
        if c == 0:
            rows.append((0.0, 0.0, 0.0, 0.0))
            continue
        full = 2 * optimize_weighted(gamma1, gamma2, c, 0.5, grid=grid).value - base
        fwd = 2 * forwarding_weighted(gamma1, gamma2, c, 0.5, grid=grid) - base
        rows.append((float(c), max(full, 0.0), max(fwd, 0.0), coef * np.sqrt(c)))
    return np.array(rows)
