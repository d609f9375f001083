"""Rate-region polytopes for a MAC with a cooperation facilitator (CF).

Regions are lists of linear constraints ``coef . R <= bound`` over the rate
vector, intersected with R >= 0. The coordination inner bound is
disjunctive: for each (S, T) pair at least one (A, B) alternative must hold.
Such regions keep their alternatives in ``groups`` and are maximized as a
small mixed-integer program.

Axis layout conventions
-----------------------
* coordination distributions: (U0, U_1..U_k, X_1..X_k)
* forwarding / outer-bound inputs: (U0, X_1..X_k)
* ``submodular_phi`` joints: (U_1..U_k, X_1..X_k, Y)

Users are indexed 0..k-1 in code; subsets are frozensets or bitmasks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations, product as iproduct

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .info import ARITH_TOL, EntropyCache, JointPmf

GAMMA_TOL = 1e-12


class RegionError(ValueError):
    pass


class PreconditionError(RegionError):
    """A distribution or split falls outside the class a bound is stated for."""


class EmptyRegionError(RegionError):
    pass


class UnboundedRegionError(RegionError):
    pass


# -- subsets -----------------------------------------------------------------

def subsets(items, nonempty=False):
    items = tuple(sorted(items))
    start = 1 if nonempty else 0
    for r in range(start, len(items) + 1):
        for c in combinations(items, r):
            yield frozenset(c)


def mask_of(s) -> int:
    return sum(1 << j for j in s)


def fmt_set(s) -> str:
    return "{" + ",".join(str(j + 1) for j in sorted(s)) + "}"


# -- configuration -----------------------------------------------------------

@dataclass(frozen=True)
class CfConfig:
    c_in: tuple
    c_out: tuple

    def __post_init__(self):
        c_in = tuple(float(c) for c in self.c_in)
        c_out = tuple(float(c) for c in self.c_out)
        if len(c_in) != len(c_out):
            raise RegionError("c_in and c_out must have the same length")
        if min(c_in + c_out, default=0.0) < 0:
            raise RegionError("link capacities must be nonnegative")
        object.__setattr__(self, "c_in", c_in)
        object.__setattr__(self, "c_out", c_out)

    @property
    def k(self) -> int:
        return len(self.c_in)


@dataclass(frozen=True)
class CfSplit:
    """Per-user split of the CF output link into forwarded (c0) and coordination (cd) parts."""

    c0: tuple
    cd: tuple

    def __post_init__(self):
        c0 = tuple(float(c) for c in self.c0)
        cd = tuple(float(c) for c in self.cd)
        if len(c0) != len(cd):
            raise RegionError("c0 and cd must have the same length")
        if min(c0 + cd, default=0.0) < 0:
            raise RegionError("split rates must be nonnegative")
        object.__setattr__(self, "c0", c0)
        object.__setattr__(self, "cd", cd)

    @property
    def k(self) -> int:
        return len(self.c0)

    @property
    def sd(self) -> frozenset:
        return frozenset(j for j, c in enumerate(self.cd) if c != 0)

    def check(self, cfg: CfConfig, tol: float = 1e-12) -> None:
        if cfg.k != self.k:
            raise RegionError("split and configuration disagree on k")
        total0 = sum(self.c0)
        for j in range(self.k):
            if self.c0[j] > cfg.c_in[j] + tol:
                raise RegionError(f"C_{j + 1}0 = {self.c0[j]} exceeds C_in = {cfg.c_in[j]}")
            used = self.cd[j] + total0 - self.c0[j]
            if used > cfg.c_out[j] + tol:
                raise RegionError(f"encoder {j + 1} output link overloaded: {used} > {cfg.c_out[j]}")


@dataclass(frozen=True, eq=False)
class CoordinationDist:
    """p(u0, u_1..u_k, x_1..x_k); shape (|U0|, |U_1|..|U_k|, |X_1|..|X_k|)."""

    mass: np.ndarray

    def __post_init__(self):
        m = JointPmf(self.mass, tol=ARITH_TOL).mass
        if (m.ndim - 1) % 2:
            raise RegionError("coordination pmf needs axes (U0, U_1..U_k, X_1..X_k)")
        object.__setattr__(self, "mass", m)

    @property
    def k(self) -> int:
        return (self.mass.ndim - 1) // 2

    @property
    def x_sizes(self) -> tuple:
        return self.mass.shape[1 + self.k:]

    @classmethod
    def from_forwarding(cls, p_u0x) -> "CoordinationDist":
        """Embed p(u0, x) with trivial U_j alphabets."""
        p = np.asarray(p_u0x, dtype=np.float64)
        k = p.ndim - 1
        return cls(p.reshape((p.shape[0],) + (1,) * k + p.shape[1:]))

    def input_pmf(self) -> np.ndarray:
        return self.mass.sum(axis=tuple(range(1 + self.k)))

    def check_factorization(self, sd, tol: float = 1e-9) -> None:
        """Raise PreconditionError unless p = p(u0) prod_{Sd^c} p(u_i|u0) p(u_Sd|u0,u_Sd^c) prod_j p(x_j|u0,u_j)."""
        k, m = self.k, self.mass
        ax_u0, ax_u, ax_x = 0, [1 + j for j in range(k)], [1 + k + j for j in range(k)]
        pu = m.sum(axis=tuple(ax_x))
        rebuilt = pu.reshape(pu.shape + (1,) * k)
        for j in range(k):
            drop = tuple(a for a in range(m.ndim) if a not in (ax_u0, ax_u[j], ax_x[j]))
            pj = m.sum(axis=drop)  # (u0, u_j, x_j)
            marg = pj.sum(axis=2, keepdims=True)
            cond = np.divide(pj, marg, out=np.zeros_like(pj), where=marg > 0)
            shape = [1] * m.ndim
            shape[0], shape[ax_u[j]], shape[ax_x[j]] = pj.shape
            rebuilt = rebuilt * cond.reshape(shape)
        err = float(np.max(np.abs(rebuilt - m)))
        if err > tol:
            raise PreconditionError(f"X_j is not conditionally independent given (U0, U_j) (error {err:.3g})")
        free = [j for j in range(k) if j not in sd]
        if len(free) > 1:
            keep = [0] + [ax_u[j] for j in free]
            drop = tuple(a for a in range(m.ndim) if a not in keep)
            pf = m.sum(axis=drop)
            p0 = pf.sum(axis=tuple(range(1, pf.ndim)))
            prod = p0.copy()
            for i in range(len(free)):
                d = tuple(a for a in range(1, pf.ndim) if a != i + 1)
                pi = pf.sum(axis=d)
                cond = np.divide(pi, p0[:, None], out=np.zeros_like(pi), where=p0[:, None] > 0)
                prod = prod[..., None] * cond.reshape((cond.shape[0],) + (1,) * i + (cond.shape[1],))
            err = float(np.max(np.abs(prod - pf)))
            if err > tol:
                raise PreconditionError(f"U_j outside S_d are not conditionally independent given U0 (error {err:.3g})")


def random_coordination_dist(rng, k, u0_size=2, u_sizes=2, x_sizes=2, sd=None,
                             floor: float = 0.0) -> CoordinationDist:
    """Random member of the factorized class for a given S_d (default: all users)."""
    u_sizes = (u_sizes,) * k if np.isscalar(u_sizes) else tuple(u_sizes)
    x_sizes = (x_sizes,) * k if np.isscalar(x_sizes) else tuple(x_sizes)
    sd = frozenset(range(k)) if sd is None else frozenset(sd)

    def draw(n, size=None):
        d = rng.dirichlet(np.ones(n), size=size)
        return (1 - floor) * d + floor / n if floor else d

    pu0 = draw(u0_size)
    # p(u | u0): free users independent given u0, S_d block arbitrary given the rest
    pu = np.empty((u0_size,) + u_sizes)
    free = [j for j in range(k) if j not in sd]
    for u0 in range(u0_size):
        block = np.ones(())
        for j in free:
            block = np.multiply.outer(block, draw(u_sizes[j]))
        full = np.empty(u_sizes)
        dep = [j for j in range(k) if j in sd]
        for idx in np.ndindex(*[u_sizes[j] for j in free]):
            joint_dep = draw(int(np.prod([u_sizes[j] for j in dep])) if dep else 1)
            joint_dep = joint_dep.reshape([u_sizes[j] for j in dep])
            sl = [slice(None)] * k
            for j, v in zip(free, idx):
                sl[j] = v
            full[tuple(sl)] = block[idx] * joint_dep
        pu[u0] = full * pu0[u0]
    out = pu.reshape(pu.shape + (1,) * k)
    for j in range(k):
        cond = draw(x_sizes[j], size=(u0_size, u_sizes[j]))
        shape = [1] * (1 + 2 * k)
        shape[0], shape[1 + j], shape[1 + k + j] = u0_size, u_sizes[j], x_sizes[j]
        out = out * cond.reshape(shape)
    out = out / out.sum()
    return CoordinationDist(out)


# -- regions -----------------------------------------------------------------

@dataclass
class Constraint:
    coef: np.ndarray
    bound: float
    tag: str = ""

    def __post_init__(self):
        self.coef = np.asarray(self.coef, dtype=np.float64)
        self.bound = float(self.bound)


def subset_constraint(k, s, bound, tag="") -> Constraint:
    coef = np.zeros(k)
    coef[list(s)] = 1.0
    return Constraint(coef, bound, tag or f"S={fmt_set(s)}")


@dataclass
class RateRegion:
    """Polytope {R >= 0 : every constraint} optionally intersected with disjunctive groups.

    ``groups[g]`` is a list of alternatives; each alternative is a list of
    constraints that must hold jointly. A rate vector belongs to the region
    when, for every group, at least one alternative holds.
    """

    k: int
    constraints: list = field(default_factory=list)
    groups: list = field(default_factory=list)
    group_tags: list = field(default_factory=list)
    alternative_tags: list = field(default_factory=list)
    empty_reason: str | None = None

    def add(self, c: Constraint):
        self.constraints.append(c)

    @property
    def is_disjunctive(self) -> bool:
        return bool(self.groups)

    def contains(self, rates, tol: float = 1e-9) -> bool:
        r = np.asarray(rates, dtype=np.float64)
        if self.empty_reason is not None or np.any(r < -tol):
            return False
        if any(c.coef @ r > c.bound + tol for c in self.constraints):
            return False
        for alts in self.groups:
            if not any(all(c.coef @ r <= c.bound + tol for c in alt) for alt in alts):
                return False
        return True

    def candidates(self):
        """Explicit polytopes, one per selection of an alternative in every group."""
        for choice in iproduct(*[range(len(g)) for g in self.groups]):
            cons = list(self.constraints)
            for g, a in zip(self.groups, choice):
                cons.extend(g[a])
            yield choice, RateRegion(self.k, cons)

    def n_candidates(self) -> int:
        return int(np.prod([len(g) for g in self.groups])) if self.groups else 1

    def to_rows(self):
        """(kind, group, alternative, coef..., bound, tag) rows for CSV export."""
        rows = []
        for c in self.constraints:
            rows.append(("sure", "", "", *c.coef.tolist(), c.bound, c.tag))
        for g, alts in enumerate(self.groups):
            for a, alt in enumerate(alts):
                for c in alt:
                    rows.append(("alt", g, a, *c.coef.tolist(), c.bound, c.tag))
        return rows

    def to_json(self) -> str:
        def enc(c):
            return {"coef": c.coef.tolist(), "bound": c.bound, "tag": c.tag}
        doc = {
            "k": self.k,
            "constraints": [enc(c) for c in self.constraints],
            "groups": [
                {"tag": t, "alternatives": [[enc(c) for c in alt] for alt in alts]}
                for t, alts in zip(self.group_tags or [""] * len(self.groups), self.groups)
            ],
            "empty_reason": self.empty_reason,
        }
        return json.dumps(doc, indent=1)


@dataclass
class WeightedSum:
    value: float
    rates: np.ndarray
    selection: tuple | None = None


def _box(region: RateRegion, weights) -> np.ndarray:
    """Per-rate upper bounds implied by nonnegative-coefficient constraints."""
    k = region.k
    box = np.full(k, np.inf)
    for c in region.constraints:
        if np.all(c.coef >= 0):
            for j in np.flatnonzero(c.coef > 0):
                box[j] = min(box[j], c.bound / c.coef[j])
    for alts in region.groups:
        per_alt = np.zeros((len(alts), k))
        for a, alt in enumerate(alts):
            b = np.full(k, np.inf)
            for c in alt:
                for j in np.flatnonzero(c.coef > 0):
                    b[j] = min(b[j], c.bound / c.coef[j])
            per_alt[a] = b
        box = np.minimum(box, per_alt.max(axis=0))
    return box


def max_weighted_sum(region: RateRegion, weights) -> WeightedSum:
    """max sum_j w_j R_j over the region (R >= 0).

    Plain polytopes go to a linear program. Disjunctive regions are solved
    as a MILP with one binary per alternative, followed by an LP on the
    chosen alternatives to polish the value.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (region.k,) or np.any(w < 0):
        raise RegionError("weights must be k nonnegative reals")
    if region.empty_reason is not None:
        raise EmptyRegionError(region.empty_reason)
    if not region.groups:
        return _lp(region.k, region.constraints, w)

    for c in region.constraints + [c for g in region.groups for alt in g for c in alt]:
        if np.any(c.coef < 0):
            raise RegionError("disjunctive regions must use nonnegative coefficients")
    box = _box(region, w)
    if np.any(box < -ARITH_TOL):
        raise EmptyRegionError("a constraint forces a negative rate")
    unbounded = (~np.isfinite(box)) & (w > 0)
    if unbounded.any():
        raise UnboundedRegionError(f"no constraint bounds rate(s) {np.flatnonzero(unbounded) + 1}")
    # a rate with zero weight and no bound can sit at 0 without loss
    box = np.where(np.isfinite(box), np.maximum(box, 0.0), 0.0)

    k = region.k
    alt_index = [(g, a) for g, alts in enumerate(region.groups) for a in range(len(alts))]
    nz = len(alt_index)
    rows, lo, hi = [], [], []
    for c in region.constraints:
        rows.append(np.concatenate([c.coef, np.zeros(nz)]))
        lo.append(-np.inf)
        hi.append(c.bound)
    for zi, (g, a) in enumerate(alt_index):
        for c in region.groups[g][a]:
            big = max(0.0, float(c.coef @ box) - c.bound) + 1.0
            row = np.concatenate([c.coef, np.zeros(nz)])
            row[k + zi] = big
            rows.append(row)
            lo.append(-np.inf)
            hi.append(c.bound + big)
    start = 0
    for alts in region.groups:
        row = np.zeros(k + nz)
        row[k + start:k + start + len(alts)] = 1.0
        rows.append(row)
        lo.append(1.0)
        hi.append(np.inf)
        start += len(alts)
    res = milp(
        c=np.concatenate([-w, np.zeros(nz)]),
        constraints=LinearConstraint(np.array(rows), lo, hi),
        integrality=np.concatenate([np.zeros(k), np.ones(nz)]),
        bounds=Bounds(np.zeros(k + nz), np.concatenate([box, np.ones(nz)])),
        options={"mip_rel_gap": 1e-12},
    )
    if res.status == 2 or res.x is None:
        raise EmptyRegionError("no selection of alternatives is feasible with R >= 0")
    if not res.success:
        raise RegionError(f"MILP failed: {res.message}")
    z = res.x[k:] > 0.5
    choice = []
    cons = list(region.constraints)
    start = 0
    for g, alts in enumerate(region.groups):
        picked = [a for a in range(len(alts)) if z[start + a]]
        a = picked[0]
        choice.append(a)
        cons.extend(alts[a])
        start += len(alts)
    polished = _lp(k, cons, w)
    return WeightedSum(polished.value, polished.rates, tuple(choice))


def _lp(k, constraints, w) -> WeightedSum:
    if constraints:
        a = np.array([c.coef for c in constraints])
        b = np.array([c.bound for c in constraints])
    else:
        a, b = None, None
    res = linprog(-w, A_ub=a, b_ub=b, bounds=[(0, None)] * k, method="highs")
    if res.status == 2:
        raise EmptyRegionError("constraints are infeasible with R >= 0")
    if res.status == 3:
        raise UnboundedRegionError("weighted sum is unbounded over the region")
    if not res.success:
        raise RegionError(f"LP failed: {res.message}")
    return WeightedSum(float(-res.fun), res.x)


def max_weighted_sum_enumerated(region: RateRegion, weights) -> WeightedSum:
    """Reference maximization by explicit enumeration of candidate polytopes."""
    best = None
    for choice, poly in region.candidates():
        try:
            r = _lp(region.k, poly.constraints, np.asarray(weights, dtype=np.float64))
        except EmptyRegionError:
            continue
        if best is None or r.value > best.value:
            best = WeightedSum(r.value, r.rates, choice)
    if best is None:
        raise EmptyRegionError("every candidate polytope is empty")
    return best


def vertex_enumeration_max(constraints, k, weights) -> float:
    """Max of w.R over {R >= 0, constraints} by enumerating basic solutions.

    Independent of the LP solver; intended for k <= 3 test oracles.
    """
    rows = [c.coef for c in constraints] + [-np.eye(k)[j] for j in range(k)]
    rhs = [c.bound for c in constraints] + [0.0] * k
    rows, rhs = np.array(rows), np.array(rhs)
    best = -np.inf
    for idx in combinations(range(len(rows)), k):
        a = rows[list(idx)]
        if abs(np.linalg.det(a)) < 1e-12:
            continue
        x = np.linalg.solve(a, rhs[list(idx)])
        if np.all(rows @ x <= rhs + 1e-9):
            best = max(best, float(np.dot(weights, x)))
    return best


# -- bounds ------------------------------------------------------------------

def _with_output(mass_inputs_last: np.ndarray, mac) -> np.ndarray:
    """Append the channel output as a last axis; inputs must be the trailing axes."""
    n_lead = mass_inputs_last.ndim - mac.k
    w = mac.transition.reshape((1,) * n_lead + mac.transition.shape)
    return mass_inputs_last[..., None] * w


def zeta(S, split: CfSplit, p: CoordinationDist, _ent=None) -> float:
    """Coordination surplus sum_S C_jd - sum_S H(U_j|U0) + H(U_S | U0, U_{Sd^c})."""
    S = frozenset(S)
    sd = split.sd
    if not S <= sd:
        raise RegionError(f"S={fmt_set(S)} is not a subset of S_d={fmt_set(sd)}")
    if not S:
        return 0.0
    ent = _ent or EntropyCache(p.mass)
    u = lambda js: {1 + j for j in js}
    sdc = frozenset(range(p.k)) - sd
    return (
        sum(split.cd[j] for j in S)
        - sum(ent.cond_h(u([j]), {0}) for j in S)
        + ent.cond_h(u(S), {0} | u(sdc))
    )


def _check_costs(mac, input_pmf):
    if not mac.inputs_admissible(input_pmf):
        raise PreconditionError("input distribution violates a cost constraint")


def inner_bound(p: CoordinationDist, split: CfSplit, cfg: CfConfig, mac) -> RateRegion:
    """Coordination inner bound for one distribution and one split.

    An (A, B) alternative is admissible only when its right-hand side gamma
    is strictly positive: its left side is a sum of positive parts, so
    gamma <= 0 leaves nothing. Admissible alternatives are expanded into one
    subset-sum constraint per nonempty subset of the users involved, and the
    resulting strict inequalities are stored as their closures.
    """
    k = cfg.k
    if p.k != k or mac.k != k:
        raise RegionError("distribution, configuration and channel disagree on k")
    if tuple(p.x_sizes) != tuple(mac.input_sizes):
        raise RegionError("distribution X alphabets do not match the channel")
    split.check(cfg)
    sd = split.sd
    p.check_factorization(sd)
    _check_costs(mac, p.input_pmf())

    ent = EntropyCache(_with_output(p.mass, mac))
    for S in subsets(sd, nonempty=True):
        z = zeta(S, split, p, ent)
        if z <= 0:
            raise PreconditionError(f"zeta_{fmt_set(S)} = {z:.6g} <= 0")

    U = lambda js: {1 + j for j in js}
    X = lambda js: {1 + k + j for j in js}
    Y = {1 + 2 * k}
    users = frozenset(range(k))
    sdc = users - sd
    region = RateRegion(k)
    i_all = ent.mi(X(users), Y)
    region.add(Constraint(np.ones(k), i_all - zeta(sd, split, p, ent), "sum"))

    for S in subsets(users):
        Sc = users - S
        for T in subsets(users):
            if not S and not T:
                continue
            alternatives, tags, trivial = [], [], False
            for a_extra in subsets(S & sd):
                A = (S & sdc) | a_extra
                for b_extra in subsets(Sc & sd):
                    B = (Sc & sdc) | b_extra
                    BT = B & T
                    gamma = ent.mi(U(A) | X(A | BT), Y, {0} | U(B) | X(B - T)) \
                        - zeta((A | B) & sd, split, p, ent)
                    # strict inequality with a nonnegative left side: need gamma > 0
                    if gamma <= GAMMA_TOL:
                        continue
                    involved = A | BT
                    if not involved:
                        trivial = True
                        break
                    alpha = {j: split.c0[j] for j in A}
                    alpha.update({j: cfg.c_in[j] for j in BT})
                    tag = f"S={fmt_set(S)},T={fmt_set(T)},A={fmt_set(A)},B={fmt_set(B)}"
                    alt = [
                        subset_constraint(k, D, gamma + sum(alpha[j] for j in D), f"{tag},D={fmt_set(D)}")
                        for D in subsets(involved, nonempty=True)
                    ]
                    alternatives.append(alt)
                    tags.append(tag)
                if trivial:
                    break
            if trivial:
                continue
            gtag = f"S={fmt_set(S)},T={fmt_set(T)}"
            if not alternatives:
                region.empty_reason = f"no admissible (A,B) for {gtag}"
                continue
            if len(alternatives) == 1:
                region.constraints.extend(alternatives[0])
            else:
                region.groups.append(alternatives)
                region.group_tags.append(gtag)
                region.alternative_tags.append(tags)
    return region


def _check_product_given_u0(p_u0x: np.ndarray, tol: float = 1e-9) -> None:
    k = p_u0x.ndim - 1
    p0 = p_u0x.sum(axis=tuple(range(1, k + 1)))
    prod = p0.copy()
    for j in range(k):
        pj = p_u0x.sum(axis=tuple(a for a in range(1, k + 1) if a != j + 1))
        cond = np.divide(pj, p0[:, None], out=np.zeros_like(pj), where=p0[:, None] > 0)
        prod = prod[..., None] * cond.reshape((cond.shape[0],) + (1,) * j + (cond.shape[1],))
    err = float(np.max(np.abs(prod - p_u0x)))
    if err > tol:
        raise PreconditionError(f"inputs are not conditionally independent given U0 (error {err:.3g})")


def _subset_bound_region(p_u0x, mac, extra, tag) -> RateRegion:
    p_u0x = JointPmf(p_u0x, tol=ARITH_TOL).mass
    k = mac.k
    if p_u0x.ndim != k + 1 or tuple(p_u0x.shape[1:]) != tuple(mac.input_sizes):
        raise RegionError("distribution must have axes (U0, X_1..X_k) matching the channel")
    _check_product_given_u0(p_u0x)
    _check_costs(mac, p_u0x.sum(axis=0))
    ent = EntropyCache(_with_output(p_u0x, mac))
    X = lambda js: {1 + j for j in js}
    Y = {1 + k}
    users = frozenset(range(k))
    region = RateRegion(k)
    for S in subsets(users, nonempty=True):
        bound = ent.mi(X(S), Y, {0} | X(users - S)) + sum(extra[j] for j in S)
        region.add(subset_constraint(k, S, bound, f"{tag},S={fmt_set(S)}"))
    region.add(Constraint(np.ones(k), ent.mi(X(users), Y), "sum"))
    return region


def forwarding_bound(p_u0x, c0, mac, cfg: CfConfig | None = None) -> RateRegion:
    """Forwarding-only inner bound (no coordination, C_jd = 0)."""
    c0 = tuple(float(c) for c in c0)
    if len(c0) != mac.k or min(c0) < 0:
        raise RegionError("c0 must list k nonnegative rates")
    if cfg is not None:
        CfSplit(c0, (0.0,) * mac.k).check(cfg)
    return _subset_bound_region(p_u0x, mac, c0, "fwd")


def outer_bound(mac, cfg: CfConfig, p_u0x) -> RateRegion:
    if cfg.k != mac.k:
        raise RegionError("configuration and channel disagree on k")
    return _subset_bound_region(p_u0x, mac, cfg.c_in, "outer")


def conferencing_in_capacities(c_matrix) -> tuple:
    c = np.asarray(c_matrix, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise RegionError("conferencing capacities must be a square matrix")
    if np.any(np.diag(c) != 0):
        raise RegionError("conferencing matrix must have a zero diagonal")
    if np.any(c < 0):
        raise RegionError("conferencing capacities must be nonnegative")
    return tuple(c.sum(axis=1))


def conferencing_outer(mac, c_matrix, p_u0x) -> RateRegion:
    """Outer bound with C_in^j replaced by the row sum sum_{i != j} C_ji."""
    c_in = conferencing_in_capacities(c_matrix)
    return outer_bound(mac, CfConfig(c_in, (0.0,) * len(c_in)), p_u0x)


def bounds_agree_condition(cfg: CfConfig, tol: float = 0.0) -> bool:
    """True when every C_out^j covers the other users' C_in (forwarding is then optimal)."""
    total = sum(cfg.c_in)
    return all(cfg.c_out[j] + tol >= total - cfg.c_in[j] for j in range(cfg.k))


# -- envelopes ----------------------------------------------------------------

def _safe_value(build, weights):
    try:
        return max_weighted_sum(build(), weights).value
    except PreconditionError:
        return -np.inf


def outer_envelope(mac, cfg: CfConfig, weights, seed: int = 0, **kw):
    from .search import envelope_search
    obj = lambda p: _safe_value(lambda: outer_bound(mac, cfg, p), weights)
    return envelope_search(obj, mac.input_sizes, seed=seed, **kw)


def forwarding_envelope(mac, c0, weights, seed: int = 0, **kw):
    from .search import envelope_search
    obj = lambda p: _safe_value(lambda: forwarding_bound(p, c0, mac), weights)
    return envelope_search(obj, mac.input_sizes, seed=seed, **kw)


def lift_to_outer(p: CoordinationDist) -> np.ndarray:
    """Merge (U0, U_1..U_k) into a single time-sharing variable.

    Given (U0, U), the inputs are conditionally independent, so the result is
    a valid (U0', X) distribution for the forwarding and outer bounds.
    """
    k = p.k
    lead = int(np.prod(p.mass.shape[: 1 + k]))
    return p.mass.reshape((lead,) + tuple(p.x_sizes))


# -- submodular set function and greedy corners --------------------------------

def check_phi_factorization(p, k: int, mac=None, tol: float = 1e-9) -> None:
    m = p.mass if isinstance(p, JointPmf) else np.asarray(p, dtype=np.float64)
    if m.ndim != 2 * k + 1:
        raise PreconditionError("joint must have axes (U_1..U_k, X_1..X_k, Y)")
    pux = m.sum(axis=-1)
    pu = pux.sum(axis=tuple(range(k, 2 * k)))
    rebuilt = pu.reshape(pu.shape + (1,) * k)
    for j in range(k):
        pj = m.sum(axis=tuple(a for a in range(2 * k + 1) if a not in (j, k + j)))
        marg = pj.sum(axis=1, keepdims=True)
        cond = np.divide(pj, marg, out=np.zeros_like(pj), where=marg > 0)
        shape = [1] * (2 * k)
        shape[j], shape[k + j] = cond.shape
        rebuilt = rebuilt * cond.reshape(shape)
    err = float(np.max(np.abs(rebuilt - pux)))
    if err > tol:
        raise PreconditionError(f"X_j not conditionally independent given U_j (error {err:.3g})")
    px = pux.sum(axis=tuple(range(k)))
    pxy = m.sum(axis=tuple(range(k)))
    chan = np.divide(pxy, px[..., None], out=np.zeros_like(pxy), where=px[..., None] > 0)
    err = float(np.max(np.abs(pux[..., None] * chan.reshape((1,) * k + chan.shape) - m)))
    if err > tol:
        raise PreconditionError(f"Y depends on U beyond X (error {err:.3g})")


def phi_joint(pu, x_given_u, mac) -> np.ndarray:
    """Joint (U_1..U_k, X_1..X_k, Y) from p(u), per-user p(x_j|u_j) and the channel."""
    k = mac.k
    pu = np.asarray(pu, dtype=np.float64)
    out = pu.reshape(pu.shape + (1,) * k)
    for j, c in enumerate(x_given_u):
        shape = [1] * (2 * k)
        shape[j], shape[k + j] = c.shape
        out = out * np.asarray(c).reshape(shape)
    return _with_output(out, mac)


def submodular_phi(p, S, k: int | None = None, check: bool = True, _ent=None) -> float:
    """I(X_S; Y | U_Sc, X_Sc) + sum_S H(U_j) - H(U_S | U_Sc)."""
    m = p.mass if isinstance(p, JointPmf) else np.asarray(p, dtype=np.float64)
    k = (m.ndim - 1) // 2 if k is None else k
    if check:
        check_phi_factorization(m, k)
    S = frozenset(S)
    if not S:
        return 0.0
    ent = _ent or EntropyCache(m)
    Sc = frozenset(range(k)) - S
    U = lambda js: set(js)
    X = lambda js: {k + j for j in js}
    Y = {2 * k}
    return (
        ent.mi(X(S), Y, U(Sc) | X(Sc))
        + sum(ent.h(U([j])) for j in S)
        - ent.cond_h(U(S), U(Sc))
    )


def phi_table(p, k: int | None = None) -> np.ndarray:
    """Phi over all 2^k subsets, indexed by bitmask."""
    m = p.mass if isinstance(p, JointPmf) else np.asarray(p, dtype=np.float64)
    k = (m.ndim - 1) // 2 if k is None else k
    check_phi_factorization(m, k)
    ent = EntropyCache(m)
    table = np.zeros(1 << k)
    for S in subsets(range(k), nonempty=True):
        table[mask_of(S)] = submodular_phi(m, S, k, check=False, _ent=ent)
    return table


def corner_point(phi, order) -> np.ndarray:
    """Greedy vertex: the i-th user in ``order`` gets Phi(first i) - Phi(first i-1)."""
    phi = np.asarray(phi, dtype=np.float64)
    k = int(round(np.log2(len(phi))))
    order = list(order)
    if sorted(order) != list(range(k)):
        raise RegionError("order must be a permutation of the users")
    if abs(phi[0]) > ARITH_TOL:
        raise RegionError("phi of the empty set must be 0")
    r = np.zeros(k)
    mask = 0
    for j in order:
        nxt = mask | (1 << j)
        r[j] = phi[nxt] - phi[mask]
        mask = nxt
    return r


def is_submodular(phi, tol: float = 1e-9) -> bool:
    phi = np.asarray(phi)
    n = len(phi)
    return all(phi[a] + phi[b] >= phi[a | b] + phi[a & b] - tol for a in range(n) for b in range(n))


def is_nondecreasing(phi, tol: float = 1e-9) -> bool:
    phi = np.asarray(phi)
    n = len(phi)
    return all(phi[a] <= phi[b] + tol for a in range(n) for b in range(n) if a & b == a)
