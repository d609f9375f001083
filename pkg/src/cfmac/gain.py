"""Sum-capacity gain near zero CF output capacity.

The achievable family behind the infinite-slope result:

* ``U0`` is binary with P(U0 = 1) = mix_weight.
* ``U`` follows p_lam = (1 - lam) p_a + lam p_b on the input alphabets.
* X_j = U_j when U0 = 1; otherwise X_j is drawn from p_a(x_j).

For a CF output vector h*v the coordination cost lam*(h) solves
h sum(v) = TC_lam(U) + eps lam sum(v), and the sum rate
mix_weight I_lam*(X;Y) + (1 - mix_weight) I_a(X;Y) - k h sum(v) is achievable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect, linprog

from .info import ARITH_TOL, EntropyCache, SupportError, is_product, product_pmf
from .region import corner_point, fmt_set, mask_of, subsets
from .search import max_product_mi


class GainError(ValueError):
    pass


class LambdaBracketError(GainError):
    def __init__(self, h, h_max):
        self.h = h
        self.h_max = h_max
        super().__init__(f"h={h:g} has no root on the lambda bracket; h_max ~ {h_max:.6g}")


class GainPreconditionError(GainError):
    def __init__(self, what, subset=None, value=None):
        self.what = what
        self.subset = subset
        self.value = value
        where = "" if subset is None else f" at S={subset}"
        val = "" if value is None else f" (value {value:.6g})"
        super().__init__(f"{what}{where}{val}")


def _log2(x):
    with np.errstate(divide="ignore"):
        return np.where(x > 0, np.log2(np.where(x > 0, x, 1.0)), 0.0)


def _row_divergence(mac, py) -> np.ndarray:
    """D(W(.|x) || py) for every input tuple; inf where the support escapes py."""
    w = mac.transition
    bad = ((w > 0) & (py <= 0)).any(axis=-1)
    d = (w * (_log2(w) - _log2(py))).sum(axis=-1)
    return np.where(bad, np.inf, d)


def _output(mac, px):
    return np.tensordot(px, mac.transition, axes=px.ndim)


def input_mi(mac, px) -> float:
    px = np.asarray(px, dtype=np.float64)
    d = _row_divergence(mac, _output(mac, px))
    return max(float((px[px > 0] * d[px > 0]).sum()), 0.0)


def conditional_input_mi(mac, px, S) -> float:
    """I(X_S; Y | X_{S^c}) under input pmf px."""
    k = mac.k
    ent = EntropyCache(np.asarray(px)[..., None] * mac.transition)
    S = set(S)
    return ent.mi(S, {k}, set(range(k)) - S)


# -- C* membership -------------------------------------------------------------

@dataclass
class CStarWitness:
    p_ind: np.ndarray
    p_dep: np.ndarray
    i_ind: float
    i_dep: float
    divergence: float
    margin: float
    converged: bool = True


def cstar_margin(mac, p_ind, p_dep) -> CStarWitness:
    """I_dep + D(p_dep(y) || p_ind(y)) - I_ind for a given pair."""
    p_ind = np.asarray(p_ind, dtype=np.float64)
    p_dep = np.asarray(p_dep, dtype=np.float64)
    if not is_product(p_ind):
        raise GainError("p_ind is not a product distribution")
    outside = (p_dep > 0) & (p_ind <= 0)
    if outside.any():
        idx = tuple(int(i) for i in np.argwhere(outside)[0])
        raise SupportError(idx, float(p_dep[idx]))
    from .info import kl_divergence
    i_ind, i_dep = input_mi(mac, p_ind), input_mi(mac, p_dep)
    d = kl_divergence(_output(mac, p_dep), _output(mac, p_ind))
    return CStarWitness(p_ind, p_dep, i_ind, i_dep, d, i_dep + d - i_ind)


def cstar_test(mac, seed: int = 0, threshold: float = 1e-6) -> CStarWitness | None:
    """Search for a witness that the channel belongs to the class C*.

    p_ind comes from the product-input MI search. The margin is linear in
    p_dep: it equals E_dep[D(W(.|X) || p_ind(y))] - I_ind. Its maximum over
    the support of p_ind, subject to the cost budgets, is therefore a
    small linear program. Without costs the optimum is a point mass.

    A single-user channel never qualifies: at a capacity-achieving input
    every support symbol has the same divergence, so the margin is zero.
    Returns None in that case and whenever the best margin is at most
    ``threshold``.
    """
    if mac.k < 2:
        return None
    found = max_product_mi(mac, seed=seed)
    p_ind = found.pmf
    d = _row_divergence(mac, _output(mac, p_ind))
    support = np.flatnonzero(p_ind.ravel() > 0)
    dvals = d.ravel()[support]
    a_ub, b_ub = [], []
    if mac.costs is not None:
        for j, c in enumerate(mac.costs):
            idx = np.unravel_index(support, p_ind.shape)[j]
            a_ub.append(c.table[idx])
            b_ub.append(c.budget)
    res = linprog(
        -dvals,
        A_ub=np.array(a_ub) if a_ub else None,
        b_ub=np.array(b_ub) if b_ub else None,
        A_eq=np.ones((1, len(support))),
        b_eq=[1.0],
        bounds=[(0, None)] * len(support),
        method="highs",
    )
    if not res.success:
        raise GainError(f"margin LP failed: {res.message}")
    p_dep = np.zeros(p_ind.size)
    p_dep[support] = np.maximum(res.x, 0.0)
    p_dep = (p_dep / p_dep.sum()).reshape(p_ind.shape)
    w = cstar_margin(mac, p_ind, p_dep)
    w.converged = found.converged
    if w.margin <= threshold:
        return None
    return w


def gaussian_cstar(powers) -> bool:
    """A Gaussian MAC is in C* iff at least two users have positive power."""
    return sum(1 for p in powers if p > 0) >= 2


# -- mixture derivatives ----------------------------------------------------------

def _marg(p, axes):
    p = np.asarray(p, dtype=np.float64)
    if axes is None:
        return p
    keep = sorted(set(axes))
    return p.sum(axis=tuple(a for a in range(p.ndim) if a not in keep))


def _check_lambda(lam, p_a, p_b):
    if not 0.0 <= lam <= 1.0:
        raise GainError("lambda must lie in [0, 1]")
    if lam in (0.0, 1.0):
        base = p_a if lam == 0.0 else p_b
        other = p_b if lam == 0.0 else p_a
        if np.any((other > 0) & (base <= 0)):
            raise SupportError(tuple(int(i) for i in np.argwhere((other > 0) & (base <= 0))[0]), 0.0)


def mixture_entropy_derivative(p_a, p_b, lam, axes=None) -> float:
    """d/dlam H_lam(axes) = -sum (p_b - p_a) log2 p_lam on the marginal."""
    a, b = _marg(p_a, axes), _marg(p_b, axes)
    _check_lambda(lam, a, b)
    pl = (1 - lam) * a + lam * b
    diff = b - a
    return float(-(diff * _log2(pl)).sum())


def mixture_mi_derivative(mac, p_a, p_b, lam) -> float:
    """d/dlam I_lam(X;Y) = sum_x (p_b - p_a)(x) D(W(.|x) || p_lam(y))."""
    p_a = np.asarray(p_a, dtype=np.float64)
    p_b = np.asarray(p_b, dtype=np.float64)
    _check_lambda(lam, p_a, p_b)
    pl = (1 - lam) * p_a + lam * p_b
    diff = p_b - p_a
    d = _row_divergence(mac, _output(mac, pl))
    mask = diff != 0
    if np.any(~np.isfinite(d[mask])):
        raise SupportError(tuple(int(i) for i in np.argwhere(mask & ~np.isfinite(d))[0]), 0.0)
    return float((diff[mask] * d[mask]).sum())


def mixture_tc_derivative(p_a, p_b, lam, axes=None) -> float:
    """d/dlam of sum_j H_lam(X_j) - H_lam(X_S): sum (p_b - p_a) log2(p_lam(x_S) / prod_j p_lam(x_j))."""
    a, b = _marg(p_a, axes), _marg(p_b, axes)
    _check_lambda(lam, a, b)
    pl = (1 - lam) * a + lam * b
    singles = [pl.sum(axis=tuple(i for i in range(pl.ndim) if i != j)) for j in range(pl.ndim)]
    prod = product_pmf(singles)
    diff = b - a
    mask = diff != 0
    return float((diff[mask] * (_log2(pl) - _log2(prod))[mask]).sum())


def mixture_tc_derivative_at_zero(p_a, p_b, axes=None) -> float:
    """Total-correlation slope at lam = 0+; zero whenever p_a is a product and supp p_b is inside supp p_a."""
    a, b = _marg(p_a, axes), _marg(p_b, axes)
    if not is_product(a):
        raise GainError("p_a must be a product distribution")
    outside = (b > 0) & (a <= 0)
    if outside.any():
        idx = tuple(int(i) for i in np.argwhere(outside)[0])
        raise SupportError(idx, float(b[idx]))
    return mixture_tc_derivative(a, b, 0.0)


def total_correlation_array(p, axes=None) -> float:
    m = _marg(p, axes)
    ent = EntropyCache(m)
    return ent.tc(range(m.ndim))


# -- the mixture family --------------------------------------------------------------

def choose_mix_weight(mac, p_a, c_in, grid: float = 0.01, margin: float = 1e-6) -> float:
    """Largest multiple of ``grid`` in (0, 1) with mix_weight I_a(X_S;Y|X_Sc) < sum_S C_in - margin."""
    k = mac.k
    limits = []
    for S in subsets(range(k), nonempty=True):
        i_s = conditional_input_mi(mac, p_a, S)
        budget = sum(c_in[j] for j in S) - margin
        if budget <= 0:
            raise GainPreconditionError("C_in must be positive", fmt_set(S), budget)
        limits.append(np.inf if i_s <= 0 else budget / i_s)
    top = min(min(limits), 1.0)
    steps = int(np.floor(top / grid - 1e-12))
    mu = min(steps * grid, 1.0 - grid)
    if mu <= 0:
        raise GainPreconditionError("no admissible mix weight on the grid")
    return round(mu, 12)


@dataclass
class MixtureFamily:
    p_a: np.ndarray
    p_b: np.ndarray
    mix_weight: float
    epsilon: float
    v: np.ndarray
    c_in: tuple
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.p_a = np.asarray(self.p_a, dtype=np.float64)
        self.p_b = np.asarray(self.p_b, dtype=np.float64)
        self.v = np.asarray(self.v, dtype=np.float64)
        if not 0 < self.mix_weight < 1:
            raise GainError("mix weight must lie in (0, 1)")
        if self.epsilon <= 0:
            raise GainError("epsilon must be positive")
        if np.any(self.v <= 0) or abs(np.linalg.norm(self.v) - 1) > 1e-9:
            raise GainError("direction v must be a strictly positive unit vector")
        if not is_product(self.p_a):
            raise GainError("p_a must be a product distribution")
        if np.any((self.p_b > 0) & (self.p_a <= 0)):
            raise GainError("p_b must be supported inside the support of p_a")

    @property
    def k(self) -> int:
        return self.p_a.ndim

    def p_lambda(self, lam) -> np.ndarray:
        return (1 - lam) * self.p_a + lam * self.p_b

    def tc(self, lam, S=None) -> float:
        return total_correlation_array(self.p_lambda(lam), S)

    def residual(self, lam, h) -> float:
        s = self.v.sum()
        return self.tc(lam) + self.epsilon * lam * s - h * s


def make_family(mac, c_in, epsilon: float, v=None, witness: CStarWitness | None = None,
                mix_weight: float | None = None, seed: int = 0) -> MixtureFamily:
    """Build the family from a C* witness (searched when not given)."""
    if witness is None:
        witness = cstar_test(mac, seed=seed)
        if witness is None:
            raise GainPreconditionError("channel failed the C* test")
    k = mac.k
    v = np.full(k, 1 / np.sqrt(k)) if v is None else np.asarray(v, dtype=np.float64)
    for j in range(k):
        if conditional_input_mi(mac, witness.p_ind, {j}) <= ARITH_TOL:
            raise GainPreconditionError("I_a(X_j;Y|X_-j) must be positive", fmt_set({j}))
    mu = choose_mix_weight(mac, witness.p_ind, c_in) if mix_weight is None else mix_weight
    return MixtureFamily(witness.p_ind, witness.p_dep, mu, epsilon, v, tuple(c_in))


def solve_lambda_star(fam: MixtureFamily, h: float, xtol: float = 1e-14) -> float:
    """Root of h sum(v) = TC_lam(U) + eps lam sum(v), by bisection.

    The bracket is found by doubling lambda from 1e-8; the first sign
    change gives the branch that starts at lambda*(0) = 0.
    """
    if h < 0:
        raise GainError("h must be nonnegative")
    if h == 0:
        return 0.0
    lo, hi = 0.0, 1e-8
    best = -np.inf
    while True:
        r = fam.residual(hi, h)
        best = max(best, r + h * fam.v.sum())
        if r >= 0:
            break
        lo = hi
        if hi >= 1.0:
            raise LambdaBracketError(h, best / fam.v.sum())
        hi = min(2 * hi, 1.0)
    if r == 0:
        return hi
    return bisect(fam.residual, lo, hi, args=(h,), xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=400)


@dataclass
class GainCurvePoint:
    h: float
    lambda_star: float
    r_sum: float
    g: float
    slope_ratio: float
    phi_sum: float = np.nan
    diagnostics: dict = field(default_factory=dict)


def _family_terms(fam: MixtureFamily, mac, lam):
    """Conditional MIs under p_a and p_lam and the subset total correlations."""
    k = fam.k
    ent_a = EntropyCache(fam.p_a[..., None] * mac.transition)
    pl = fam.p_lambda(lam)
    ent_l = EntropyCache(pl[..., None] * mac.transition)
    ent_u = EntropyCache(pl)
    Y = {k}
    users = set(range(k))
    i_a, i_l, tc = {}, {}, {}
    for S in subsets(users):
        i_a[S] = ent_a.mi(S, Y, users - S)
        i_l[S] = ent_l.mi(S, Y, users - S)
        tc[S] = ent_u.tc(S) if S else 0.0
    return i_a, i_l, tc


def family_tables(fam: MixtureFamily, mac, h: float, lam: float | None = None) -> dict:
    """zeta_S(h), F_S(h), f_{S,T}(h) and Phi_S(h) for the family at scale h."""
    lam = solve_lambda_star(fam, h) if lam is None else lam
    k, mu = fam.k, fam.mix_weight
    users = frozenset(range(k))
    i_a, i_l, tc = _family_terms(fam, mac, lam)
    hv = h * fam.v
    zeta = {S: float(hv[list(S)].sum()) - tc[S] if S else 0.0 for S in subsets(users)}
    z_all = zeta[users]
    F = {S: mu * i_l[S] + (1 - mu) * i_a[S] - z_all for S in subsets(users)}
    f = {}
    for S in subsets(users):
        for T in subsets(users):
            ST = S | T
            f[S, T] = mu * i_l[S] + (1 - mu) * i_a[ST] + sum(fam.c_in[j] for j in T - S) - z_all
    phi = np.zeros(1 << k)
    for S in subsets(users, nonempty=True):
        phi[mask_of(S)] = F[S] + zeta[users - S] + float(hv[list(S)].sum())
    return {"lambda": lam, "zeta": zeta, "F": F, "f": f, "phi": phi, "i_a": i_a, "i_l": i_l, "tc": tc}


def achievable_sum_rate(fam: MixtureFamily, mac, h: float, check: bool = True,
                        tol: float = 1e-12) -> GainCurvePoint:
    """Sum rate of the family at CF output h*v and its gain over h = 0."""
    k = fam.k
    users = frozenset(range(k))
    t = family_tables(fam, mac, h)
    lam = t["lambda"]
    i_a, i_l = t["i_a"][users], t["i_l"][users]
    s = float(fam.v.sum())
    r_sum = fam.mix_weight * i_l + (1 - fam.mix_weight) * i_a - k * h * s
    g = r_sum - i_a
    diag = {"zeta_min": min(t["zeta"][S] for S in subsets(users, nonempty=True))}
    if check and h > 0:
        for S in subsets(users, nonempty=True):
            if t["zeta"][S] <= 0:
                raise GainPreconditionError("zeta_S(h) must be positive", fmt_set(S), t["zeta"][S])
        for (S, T), val in t["f"].items():
            if val < t["F"][S | T] - tol:
                raise GainPreconditionError(
                    "f_{S,T}(h) >= F_{S u T}(h) fails", f"{fmt_set(S)},T={fmt_set(T)}", val - t["F"][S | T])
        for j in range(k):
            pj = t["phi"][1 << j]
            if pj <= k * h * s:
                raise GainPreconditionError("Phi_j(h) must exceed k sum C_out", fmt_set({j}), pj)
    phi_sum = t["phi"][-1] - k * h * s
    return GainCurvePoint(h, lam, r_sum, g, g / h if h > 0 else np.nan, phi_sum, diag)


def gain_curve(fam: MixtureFamily, mac, hs, check: bool = True) -> list:
    return [achievable_sum_rate(fam, mac, float(h), check=check) for h in hs]


def slope_limit(fam: MixtureFamily, mac) -> float:
    """lim_{h->0} g/h for fixed epsilon: mix_weight dI/dlam(0) / eps - k sum(v)."""
    d = mixture_mi_derivative(mac, fam.p_a, fam.p_b, 0.0)
    return fam.mix_weight * d / fam.epsilon - fam.k * float(fam.v.sum())


def family_corner_points(fam: MixtureFamily, mac, h: float) -> list:
    """Greedy corners of {sum_S R <= Phi_S(h)} for the cyclic user orders."""
    phi = family_tables(fam, mac, h)["phi"]
    k = fam.k
    return [corner_point(phi, [(j + i) % k for i in range(k)]) for j in range(k)]


# -- two-round conferencing ----------------------------------------------------------

@dataclass
class ConferencingTable:
    x3_star: int
    g1: float
    c_out: np.ndarray
    g2_lower: np.ndarray
    applicable: bool
    h_threshold: float | None
    note: str = ""


def two_round_conferencing_demo(mac3, c_in1: float, c_in2: float, c_out_grid,
                                epsilon: float | None = None, seed: int = 0) -> ConferencingTable:
    """Compare one conferencing round (constant g1) with the two-round lower bound.

    Encoder 3 acts as the facilitator for encoders 1 and 2: C_13 = c_in1,
    C_23 = c_in2 and C_31 = C_32 = c_out, so the CF output direction is
    v = (1, 1)/sqrt(2) with h = sqrt(2) c_out.
    """
    if mac3.k != 3:
        raise GainError("expects a 3-user channel")
    grid = np.asarray(c_out_grid, dtype=np.float64)
    best = None
    for x3 in range(mac3.input_sizes[2]):
        sub = mac3.restrict(2, x3)
        r = max_product_mi(sub, seed=seed)
        if best is None or r.value > best[1] + 1e-12:
            best = (x3, r.value, sub)
    x3, g1, sub = best
    w = cstar_test(sub, seed=seed)
    if w is None:
        return ConferencingTable(x3, g1, grid, np.full(grid.shape, g1), False, None,
                                 "induced 2-user channel is not in C*")
    v = np.full(2, 1 / np.sqrt(2))
    if epsilon is None:
        mu = choose_mix_weight(sub, w.p_ind, (c_in1, c_in2))
        d = mixture_mi_derivative(sub, w.p_ind, w.p_dep, 0.0)
        epsilon = mu * d / (2 * 2 * v.sum())
    fam = make_family(sub, (c_in1, c_in2), epsilon, v, witness=w)
    g2 = np.empty(grid.shape)
    for i, c in enumerate(grid):
        if c == 0:
            g2[i] = g1
            continue
        try:
            pt = achievable_sum_rate(fam, sub, np.sqrt(2) * c)
            g2[i] = g1 + max(pt.g, 0.0)
        except GainError:
            g2[i] = g1
    threshold = None
    for c, val in zip(grid, g2):
        if c == 0:
            continue
        if val > g1:
            threshold = float(np.sqrt(2) * c)
        else:
            break
    return ConferencingTable(x3, g1, grid, g2, True, threshold,
                             f"epsilon={epsilon:.6g}, mix_weight={fam.mix_weight:.2f}")
