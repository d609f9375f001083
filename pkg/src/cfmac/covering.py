"""Weak joint typicality and Monte Carlo tests of the multivariate covering lemma.

The typicality engine here is shared with the codec simulator. A tuple of
length-n sequences is weakly typical when every nonempty subset S of the
tracked axes satisfies |-(1/n) log2 p(u_S^n) - H(U_S)| <= delta.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.stats import binomtest

from .info import JointPmf, as_pmf, EntropyCache

SEARCH_BUDGET = 2 ** 20
_TIE_TOL = 1e-9
_NEG = -1e12  # stands in for log2(0) inside matrix products
_CHUNK = 1 << 22


class CoveringError(ValueError):
    pass


class BudgetError(CoveringError):
    """The exhaustive search or codebook would exceed its size budget."""

    def __init__(self, what: str, size: float, budget: float):
        self.size = size
        self.budget = budget
        super().__init__(f"{what}: {size:.4g} exceeds budget {budget:.4g}")


def worker_count() -> int:
    env = os.environ.get("CFMAC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise CoveringError(f"CFMAC_THREADS must be an integer, got {env!r}")
    return os.cpu_count() or 1


def run_trials(fn, trials: int, workers: int | None = None) -> list:
    """Evaluate fn(0..trials-1); results come back in trial order."""
    workers = worker_count() if workers is None else workers
    if workers <= 1 or trials <= 1:
        return [fn(t) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, range(trials)))


def wilson_interval(successes: int, trials: int, level: float = 0.95) -> tuple:
    if trials == 0:
        return (0.0, 1.0)
    ci = binomtest(int(successes), int(trials)).proportion_ci(confidence_level=level, method="wilson")
    return (float(ci.low), float(ci.high))


# -- typicality ---------------------------------------------------------------

def _axes_of(mask: int, naxes: int) -> tuple:
    return tuple(a for a in range(naxes) if mask >> a & 1)


class TypicalityCheck:
    """Weak typicality test against ``base`` at tolerance ``delta`` for block length ``n``.

    Log-marginal tables and entropies for every nonempty axis subset are
    computed once at construction.
    """

    def __init__(self, base, delta: float, n: int):
        if not delta > 0:
            raise CoveringError(f"delta must be positive, got {delta}")
        if int(n) != n or n < 1:
            raise CoveringError(f"n must be a positive integer, got {n}")
        self.base = base if isinstance(base, JointPmf) else as_pmf(base)
        self.delta = float(delta)
        self.n = int(n)
        mass = self.base.mass
        self.naxes = mass.ndim
        self.sizes = mass.shape
        self.entropy = {}
        self.log_table = {}
        ent = EntropyCache(mass)
        for mask in range(1, 1 << self.naxes):
            axes = _axes_of(mask, self.naxes)
            drop = tuple(a for a in range(self.naxes) if a not in axes)
            marg = mass.sum(axis=drop) if drop else mass
            with np.errstate(divide="ignore"):
                self.log_table[mask] = np.log2(marg)
            self.entropy[mask] = ent.h(axes)

    def masks(self):
        return range(1, 1 << self.naxes)

    def with_delta(self, delta: float) -> "TypicalityCheck":
        return TypicalityCheck(self.base, delta, self.n)

    def ok(self, mask: int, log_prob) -> np.ndarray:
        """Elementwise test of summed log-probabilities for subset ``mask``."""
        emp = -np.asarray(log_prob, dtype=np.float64) / self.n
        return np.abs(emp - self.entropy[mask]) <= self.delta + _TIE_TOL


@dataclass
class TypicalityReport:
    typical: bool
    empirical: dict = field(default_factory=dict)  # mask -> -(1/n) log2 p(u_S^n)
    entropy: dict = field(default_factory=dict)

    def deviation(self, mask: int) -> float:
        return abs(self.empirical[mask] - self.entropy[mask])

    def worst(self) -> tuple:
        m = max(self.empirical, key=self.deviation)
        return m, self.deviation(m)


def _as_sequences(sequences, check: TypicalityCheck) -> np.ndarray:
    seqs = np.asarray(sequences)
    if seqs.ndim == 1 and check.naxes == 1:
        seqs = seqs[None]
    if seqs.shape != (check.naxes, check.n):
        raise CoveringError(f"expected {check.naxes} sequences of length {check.n}, got shape {seqs.shape}")
    for a in range(check.naxes):
        if seqs[a].min() < 0 or seqs[a].max() >= check.sizes[a]:
            raise CoveringError(f"axis {a} has symbols outside its alphabet of size {check.sizes[a]}")
    return seqs.astype(np.intp)


def is_weakly_typical(sequences, check: TypicalityCheck) -> TypicalityReport:
    """Test one tuple of sequences, reporting -(1/n) log2 p for every subset.

    A symbol with zero probability makes the tuple atypical (its empirical
    value is +inf).
    """
    seqs = _as_sequences(sequences, check)
    report = TypicalityReport(True)
    for mask in check.masks():
        axes = _axes_of(mask, check.naxes)
        lp = check.log_table[mask][tuple(seqs[a] for a in axes)].sum()
        emp = -lp / check.n
        report.empirical[mask] = float(emp)
        report.entropy[mask] = check.entropy[mask]
        if not check.ok(mask, lp):
            report.typical = False
    return report


def sample_iid(p, n: int, rng) -> np.ndarray:
    """n i.i.d. draws of the joint pmf; returns shape (ndim, n)."""
    mass = as_pmf(p).mass
    flat = rng.choice(mass.size, size=n, p=mass.ravel())
    return np.array(np.unravel_index(flat, mass.shape))


# -- lexicographic search over candidate slots --------------------------------

def _symbol_index(seqs, sizes):
    """Mixed-radix code of several symbol arrays (last one least significant)."""
    idx = np.zeros(np.shape(seqs[0]), dtype=np.intp) if seqs else None
    for s, size in zip(seqs, sizes):
        idx = idx * size + s
    return idx


class _Plan:
    def __init__(self, check, fixed, slots):
        self.check = check
        self.fixed = {int(a): np.asarray(s, dtype=np.intp) for a, s in fixed.items()}
        self.slots = [(tuple(int(a) for a in axes), np.asarray(c)) for axes, c in slots]
        owner = {a: -1 for a in self.fixed}
        for i, (axes, cand) in enumerate(self.slots):
            if cand.ndim == 2 and len(axes) == 1:
                cand = cand[:, None, :]
                self.slots[i] = (axes, cand)
            if cand.ndim != 3 or cand.shape[1] != len(axes) or cand.shape[2] != check.n:
                raise CoveringError(f"slot {i} candidates have shape {cand.shape}")
            for a in axes:
                if a in owner:
                    raise CoveringError(f"axis {a} assigned twice")
                owner[a] = i
        if sorted(owner) != list(range(check.naxes)):
            raise CoveringError("fixed axes and slots must cover every tracked axis exactly once")
        self.owner = owner
        # group subsets by the last slot they touch
        self.fixed_masks, self.by_slot = [], [[] for _ in self.slots]
        for mask in check.masks():
            axes = _axes_of(mask, check.naxes)
            last = max(owner[a] for a in axes)
            if last < 0:
                self.fixed_masks.append(mask)
            else:
                self.by_slot[last].append(mask)

    def split(self, mask, i):
        axes = _axes_of(mask, self.check.naxes)
        fixed = [a for a in axes if self.owner[a] == -1]
        prev = [a for a in axes if 0 <= self.owner[a] < i]
        cur = [a for a in axes if self.owner[a] == i]
        return axes, fixed, prev, cur

    def table(self, mask, i):
        """Log table reordered to (fixed+prev axes, current axes), flattened 2-D."""
        axes, fixed, prev, cur = self.split(mask, i)
        order = fixed + prev + cur
        t = np.transpose(self.check.log_table[mask], [axes.index(a) for a in order])
        sizes = self.check.sizes
        ve = int(np.prod([sizes[a] for a in fixed + prev], dtype=np.int64))
        vc = int(np.prod([sizes[a] for a in cur], dtype=np.int64))
        return t.reshape(ve, vc), fixed, prev, cur

    def cand_symbols(self, i, cur, rows=None):
        axes, cand = self.slots[i]
        c = cand if rows is None else cand[rows]
        sizes = self.check.sizes
        return _symbol_index([c[:, axes.index(a), :] for a in cur], [sizes[a] for a in cur])

    def prefix_symbols(self, fixed, prev, prefix):
        """Mixed-radix code of fixed+prev axes per partial tuple: shape (np, n)."""
        sizes = self.check.sizes
        n = self.check.n
        parts, radices = [], []
        for a in fixed:
            parts.append(np.broadcast_to(self.fixed[a], (len(prefix), n)))
            radices.append(sizes[a])
        for a in prev:
            j = self.owner[a]
            axes, cand = self.slots[j]
            parts.append(cand[prefix[:, j], axes.index(a), :])
            radices.append(sizes[a])
        return _symbol_index(parts, radices)


def typical_search(check: TypicalityCheck, fixed: dict, slots, limit: int | None = 1) -> np.ndarray:
    """Lexicographically ordered index tuples that make the full tuple typical.

    ``fixed`` maps axis -> sequence. ``slots`` is an ordered list of
    ``(axes, candidates)`` with candidates shaped (M, len(axes), n); slot 0 is
    the most significant position of the index tuple. The search stops after
    ``limit`` hits (``None`` returns all of them). Returns an int array of
    shape (hits, len(slots)).
    """
    plan = _Plan(check, fixed, slots)
    n = check.n
    k = len(plan.slots)
    for mask in plan.fixed_masks:
        axes = _axes_of(mask, check.naxes)
        lp = check.log_table[mask][tuple(plan.fixed[a] for a in axes)].sum()
        if not check.ok(mask, lp):
            return np.zeros((0, k), dtype=np.intp)

    # candidates that pass every subset not touching earlier slots
    alive, multi = [], []
    for i in range(k):
        m = plan.slots[i][1].shape[0]
        single, pair = [], []
        # larger subsets first: they usually reject the most
        for mask in sorted(plan.by_slot[i], key=lambda q: -bin(q).count("1")):
            table, f, prev, cur = plan.table(mask, i)
            if prev:
                pair.append((mask, table, f, prev, cur))
            else:
                e = plan.prefix_symbols(f, [], np.zeros((1, k), dtype=np.intp))[0] if f else np.zeros(n, dtype=np.intp)
                single.append((mask, table, e, cur))
        keep = []
        step = max(1, _CHUNK // (4 * n))
        for start in range(0, m, step):
            rows = np.arange(start, min(m, start + step))
            for mask, table, e, cur in single:
                if rows.size == 0:
                    break
                c = plan.cand_symbols(i, cur, rows)
                rows = rows[check.ok(mask, table[e[None, :], c].sum(axis=1))]
            keep.append(rows)
        alive.append(np.concatenate(keep) if keep else np.zeros(0, dtype=np.intp))
        multi.append(pair)

    found = []
    want = np.inf if limit is None else limit

    def descend(i, prefix):
        # prefix: (np, k) array, columns >= i unused
        if i == k:
            take = prefix[: int(min(len(prefix), want - len(found)))]
            found.extend(take.tolist())
            return
        rows = alive[i]
        if rows.size == 0 or prefix.size == 0:
            return
        pairs = multi[i]
        step = max(1, _CHUNK // max(1, rows.size * n))
        for start in range(0, len(prefix), step):
            part = prefix[start:start + step]
            ok = np.ones((len(part), rows.size), dtype=bool)
            for mask, table, f, prev, cur in pairs:
                e = plan.prefix_symbols(f, prev, part)  # (np, n)
                c = plan.cand_symbols(i, cur, rows)  # (nc, n)
                ve = table.shape[0]
                finite = np.where(np.isfinite(table), table, _NEG)
                g = finite[:, c]  # (ve, nc, n)
                g = np.transpose(g, (2, 0, 1)).reshape(n * ve, rows.size)
                onehot = np.zeros((len(part), n * ve))
                onehot[np.arange(len(part))[:, None], np.arange(n)[None, :] * ve + e] = 1.0
                ok &= check.ok(mask, onehot @ g)
                if not ok.any():
                    break
            r, c = np.nonzero(ok)
            if r.size:
                nxt = part[r].copy()
                nxt[:, i] = rows[c]
                descend(i + 1, nxt)
            if len(found) >= want:
                return

    descend(0, np.zeros((1, k), dtype=np.intp))
    return np.array(found, dtype=np.intp).reshape(-1, k)


def brute_force_search(check: TypicalityCheck, fixed: dict, slots) -> np.ndarray:
    """Every typical index tuple by explicit enumeration (small instances only)."""
    sizes = [np.asarray(c).shape[0] for _, c in slots]
    hits = []
    for idx in np.ndindex(*sizes):
        seqs = np.zeros((check.naxes, check.n), dtype=np.intp)
        for a, s in fixed.items():
            seqs[a] = s
        for (axes, cand), m in zip(slots, idx):
            cand = np.asarray(cand)
            if cand.ndim == 2:
                cand = cand[:, None, :]
            for q, a in enumerate(axes):
                seqs[a] = cand[m, q]
        if is_weakly_typical(seqs, check).typical:
            hits.append(idx)
    return np.array(hits, dtype=np.intp).reshape(-1, len(slots))


# -- covering experiments ------------------------------------------------------

def default_delta(n: int) -> float:
    return 0.1 if n < 400 else 0.05


@dataclass(frozen=True)
class CoveringConfig:
    """Codebook rates for users 1..k; sizes are ceil(2^(n R_j))."""

    rates: tuple
    trials: int = 100
    seed: int = 0

    def __post_init__(self):
        rates = tuple(float(r) for r in self.rates)
        if any(r < 0 for r in rates):
            raise CoveringError("rates must be nonnegative")
        if self.trials < 1:
            raise CoveringError("trials must be positive")
        object.__setattr__(self, "rates", rates)

    def sizes(self, n: int) -> tuple:
        # small epsilon keeps exact powers of two from rounding up
        return tuple(max(1, int(np.ceil(2.0 ** (n * r) - 1e-9))) for r in self.rates)

    @classmethod
    def from_sizes(cls, sizes, n: int, trials: int = 100, seed: int = 0) -> "CoveringConfig":
        return cls(tuple(np.log2(m) / n for m in sizes), trials, seed)


def covering_target_layout(p) -> tuple:
    """k for a pmf over (U0, U_1..U_k, U_{k+1})."""
    mass = as_pmf(p).mass
    if mass.ndim < 3:
        raise CoveringError("covering target needs axes (U0, U_1..U_k, U_{k+1})")
    return mass.ndim - 2


def doubly_symmetric_target(crossover: float = 0.0) -> np.ndarray:
    """U0 and U3 trivial; U1 a fair bit and U2 = U1 flipped with prob ``crossover``."""
    a = float(crossover)
    pair = 0.5 * np.array([[1 - a, a], [a, 1 - a]])
    return pair.reshape(1, 2, 2, 1)


def _inverse_cdf(cdf_rows, cond_index, uniforms):
    # cdf_rows: (|cond|, |U|); pick symbol per (row, t)
    c = cdf_rows[cond_index]  # (n, |U|)
    return (uniforms[..., None] > c[None, :, :-1]).sum(axis=-1)


def draw_covering_instance(p, n: int, sizes, seed: int, trial: int):
    """U0^n, U_{k+1}^n and nested codebooks for one trial.

    Codeword m of user j depends only on (seed, trial, j, m), so a larger
    codebook always contains the smaller one as a prefix.
    """
    mass = as_pmf(p).mass
    k = mass.ndim - 2
    outer = mass.sum(axis=tuple(range(1, k + 1)))  # (u0, u_{k+1})
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial, 0)))
    flat = rng.choice(outer.size, size=n, p=outer.ravel())
    u0, uk1 = np.unravel_index(flat, outer.shape)
    p0 = outer.sum(axis=1)
    books = []
    for j in range(k):
        drop = tuple(a for a in range(mass.ndim) if a not in (0, j + 1))
        pj = mass.sum(axis=drop)
        cond = np.divide(pj, p0[:, None], out=np.full_like(pj, 1.0 / pj.shape[1]), where=p0[:, None] > 0)
        cdf = np.cumsum(cond, axis=1)
        rj = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial, j + 1)))
        unif = rj.random((sizes[j], n))
        books.append(_inverse_cdf(cdf, u0, unif))
    return u0, uk1, books


def covering_trial(p, cfg: CoveringConfig, check: TypicalityCheck, trial: int) -> bool:
    """One draw of the covering experiment: is some codeword tuple jointly typical?"""
    k = covering_target_layout(p)
    if len(cfg.rates) != k:
        raise CoveringError(f"{len(cfg.rates)} rates for {k} users")
    sizes = cfg.sizes(check.n)
    total = float(np.prod([float(m) for m in sizes]))
    if total > SEARCH_BUDGET:
        raise BudgetError("covering search size prod M_j", total, SEARCH_BUDGET)
    u0, uk1, books = draw_covering_instance(p, check.n, sizes, cfg.seed, trial)
    slots = [((j + 1,), books[j]) for j in range(k)]
    hits = typical_search(check, {0: u0, k + 1: uk1}, slots, limit=1)
    return bool(len(hits))


@dataclass
class Thresholds:
    raw: dict  # mask over users (bit j = user j+1) -> sum H(U_j|U0) - H(U_S|U0,U_{k+1})
    direct: dict
    converse: dict


def covering_thresholds(p, delta: float) -> Thresholds:
    mass = as_pmf(p).mass
    k = mass.ndim - 2
    ent = EntropyCache(mass)
    raw, direct, converse = {}, {}, {}
    full = (1 << k) - 1
    for mask in range(1, full + 1):
        users = [j for j in range(k) if mask >> j & 1]
        r = sum(ent.cond_h({j + 1}, {0}) for j in users) - ent.cond_h({j + 1 for j in users}, {0, k + 1})
        s = len(users)
        raw[mask] = r
        direct[mask] = r + (2 * (k + 1) if mask == full else 8 * k - 2 * s + 10) * delta
        converse[mask] = r - 2 * (s + 1) * delta
    return Thresholds(raw, direct, converse)


def finite_n_constants(p, delta: float, n: int) -> dict:
    """The alpha_S, beta_S and gamma exponents used by the covering bounds."""
    mass = as_pmf(p).mass
    k = mass.ndim - 2
    ent = EntropyCache(mass)
    out = {"alpha": {}, "beta": {}}
    for mask in range(1, 1 << k):
        users = {j + 1 for j in range(k) if mask >> j & 1}
        rest = {j + 1 for j in range(k)} - users
        base = sum(ent.cond_h({u}, {0}) for u in users)
        slack = 2 * (len(users) + 1) * delta
        out["alpha"][mask] = n * (base - ent.cond_h(users, {0, k + 1}) - slack)
        out["beta"][mask] = n * (base - ent.cond_h(users, {0, k + 1} | rest) - slack)
    allu = set(range(1, k + 1))
    out["gamma"] = n * (sum(ent.cond_h({u}, {0}) for u in allu) - ent.cond_h(allu, {0, k + 1}) + 2 * (k + 1) * delta)
    return out


@dataclass
class PhasePoint:
    rates: tuple
    sizes: tuple
    successes: int
    trials: int
    interval: tuple
    direct: float  # thresholds on the sum over all users
    converse: float

    @property
    def fraction(self) -> float:
        return self.successes / self.trials

    @property
    def sum_rate(self) -> float:
        return float(sum(self.rates))


def covering_success(p, cfg: CoveringConfig, check: TypicalityCheck, workers=None) -> int:
    return int(sum(run_trials(lambda t: covering_trial(p, cfg, check, t), cfg.trials, workers)))


def covering_phase_curve(p, check: TypicalityCheck, rate_grid, trials: int, seed: int = 0,
                         workers=None) -> list:
    """Empirical covering success over a grid of rate tuples."""
    th = covering_thresholds(p, check.delta)
    full = max(th.raw)
    out = []
    for rates in rate_grid:
        cfg = CoveringConfig(tuple(rates), trials, seed)
        s = covering_success(p, cfg, check, workers)
        out.append(PhasePoint(cfg.rates, cfg.sizes(check.n), s, trials, wilson_interval(s, trials),
                              th.direct[full], th.converse[full]))
    return out


def phase_rows(points) -> list:
    rows = [("sum_rate", "rates", "sizes", "success_fraction", "ci_low", "ci_high",
             "direct_threshold", "converse_threshold")]
    for pt in points:
        rows.append((pt.sum_rate, " ".join(f"{r:.6g}" for r in pt.rates), " ".join(map(str, pt.sizes)),
                     pt.fraction, pt.interval[0], pt.interval[1], pt.direct, pt.converse))
    return rows


# -- large deviations ----------------------------------------------------------

def _log_moment(probs, weights, t):
    # log2 E[p^(-t)] over the support
    return float(np.log2(np.sum(weights * np.exp2(-t * np.log2(probs)))))


def ldp_exponent(p, S, epsilon: float, t_max: float = 10.0) -> float:
    """Chernoff exponent I_S(eps) (bits) for |-(1/n) log2 p(U_S^n) - H(U_S)| > eps.

    Both tails are bounded and the smaller exponent is returned. The
    optimum over t in (1e-6, t_max) is found by bounded scalar minimization.
    """
    if not epsilon > 0:
        raise CoveringError("epsilon must be positive")
    mass = as_pmf(p).mass
    axes = tuple(sorted(S))
    if not axes:
        raise CoveringError("subset must be nonempty")
    drop = tuple(a for a in range(mass.ndim) if a not in axes)
    marg = (mass.sum(axis=drop) if drop else mass).ravel()
    marg = marg[marg > 0]
    h = float(-(marg * np.log2(marg)).sum())
    lo = 1e-6

    def best(fn):
        res = minimize_scalar(lambda t: -fn(t), bounds=(lo, t_max), method="bounded",
                              options={"xatol": 1e-10})
        return max(-res.fun, fn(lo), fn(t_max))

    upper = best(lambda t: t * (h + epsilon) - _log_moment(marg, marg, t))
    lower = best(lambda t: -t * (h - epsilon) - _log_moment(marg, marg, -t))
    return float(min(upper, lower))


def ldp_combined(p, epsilon: float, t_max: float = 10.0) -> float:
    """I(eps) = min over nonempty S of I_S(eps), halved."""
    ndim = as_pmf(p).mass.ndim
    vals = [ldp_exponent(p, S, epsilon, t_max)
            for r in range(1, ndim + 1) for S in combinations(range(ndim), r)]
    return 0.5 * min(vals)


def atypicality_rate(p, n: int, epsilon: float, trials: int, seed: int = 0) -> float:
    """Fraction of i.i.d. blocks that fail weak typicality at tolerance epsilon."""
    check = TypicalityCheck(p, epsilon, n)
    bad = 0
    for t in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(t,)))
        if not is_weakly_typical(sample_iid(p, n, rng), check).typical:
            bad += 1
    return bad / trials
