"""Desk-scale simulation of the cooperation-facilitator random code.

Each message is split into a part forwarded by the CF (w_j0), a part the
CF learns and uses for coordination (w_jd) and a private part (w_jj).
The CF picks coordination indices Z_j so that the selected U_j codewords
look jointly typical with U0; decoding is joint typicality over
(U0, U, X, Y).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from itertools import product as iproduct

import numpy as np

from .channel import DiscreteMac, transmit
from .covering import (BudgetError, TypicalityCheck, default_delta, run_trials,
                       typical_search, wilson_interval)
from .region import CfConfig, CfSplit, CoordinationDist, RegionError, fmt_set

BOOK_BUDGET = 2 ** 26
MAX_N = 64
MAX_ALPHABET = 4


class CodecError(ValueError):
    pass


def _count(rate: float, n: int) -> int:
    # ceil(2^(nR)); the small slack keeps exact powers of two exact
    return max(1, int(np.ceil(2.0 ** (n * rate) - 1e-9)))


@dataclass(frozen=True)
class CodeSpec:
    mac: DiscreteMac
    p: CoordinationDist
    split: CfSplit
    cfg: CfConfig
    rates: tuple
    n: int
    seed: int = 0
    delta: float | None = None

    def __post_init__(self):
        k = self.mac.k
        rates = tuple(float(r) for r in self.rates)
        if len(rates) != k or self.p.k != k or self.split.k != k or self.cfg.k != k:
            raise CodecError("channel, distribution, split, configuration and rates disagree on k")
        if min(rates) < 0:
            raise CodecError("rates must be nonnegative")
        if tuple(self.p.x_sizes) != tuple(self.mac.input_sizes):
            raise CodecError("input alphabets of the distribution and channel differ")
        try:
            self.split.check(self.cfg)
        except RegionError as exc:
            raise CodecError(str(exc)) from None
        if int(self.n) != self.n or self.n < 1:
            raise CodecError("n must be a positive integer")
        object.__setattr__(self, "rates", rates)
        if self.delta is None:
            object.__setattr__(self, "delta", default_delta(self.n))

    @property
    def k(self) -> int:
        return self.mac.k

    @property
    def epsilon(self) -> float:
        return 2.0 * self.delta

    def sub_rates(self) -> list:
        """(R_j0, R_jd, R_jj) per user."""
        out = []
        for r, c0, cin in zip(self.rates, self.split.c0, self.cfg.c_in):
            r0 = min(r, c0)
            rd = min(r, cin) - r0
            out.append((r0, max(rd, 0.0), max(r - cin, 0.0)))
        return out

    def sizes(self) -> dict:
        n = self.n
        sub = self.sub_rates()
        return {
            "m0": tuple(_count(s[0], n) for s in sub),
            "md": tuple(_count(s[1], n) for s in sub),
            "mj": tuple(_count(s[2], n) for s in sub),
            "L": tuple(_count(c, n) for c in self.split.cd),
        }

    def book_symbols(self) -> int:
        sz = self.sizes()
        w0 = int(np.prod(sz["m0"]))
        per = sum(md * L * (1 + mj) for md, L, mj in zip(sz["md"], sz["L"], sz["mj"]))
        return self.n * w0 * (1 + per)


@dataclass(frozen=True, eq=False)
class Codebooks:
    spec: CodeSpec
    u0: np.ndarray  # (|W0|, n)
    u: tuple  # per user (|W0|, M_jd, L_j, n)
    x: tuple  # per user (|W0|, M_jd, L_j, M_jj, n)
    cost_ok: tuple  # per user boolean array over the X-book index, or None

    @property
    def sizes(self) -> dict:
        return self.spec.sizes()


def _conditional_sampler(joint, cond_axes, target_axis):
    """CDF table of p(target | cond) with cond flattened; shape (|cond|, |target|)."""
    keep = sorted(set(cond_axes) | {target_axis})
    drop = tuple(a for a in range(joint.ndim) if a not in keep)
    m = joint.sum(axis=drop) if drop else joint
    order = [keep.index(a) for a in cond_axes] + [keep.index(target_axis)]
    m = np.transpose(m, order)
    m = m.reshape(-1, m.shape[-1])
    tot = m.sum(axis=1, keepdims=True)
    cond = np.divide(m, tot, out=np.full_like(m, 1.0 / m.shape[1]), where=tot > 0)
    return np.cumsum(cond, axis=1)


def _draw(cdf, cond_index, rng, shape):
    """Sample symbols given a broadcastable conditioning index array."""
    unif = rng.random(shape)
    rows = cdf[np.broadcast_to(cond_index, shape)]
    return (unif[..., None] > rows[..., :-1]).sum(axis=-1).astype(np.uint8)


def build_code(spec: CodeSpec) -> Codebooks:
    """Draw all codebooks from the seed (same seed, same books)."""
    if spec.n > MAX_N:
        raise BudgetError("block length", spec.n, MAX_N)
    mass = spec.p.mass
    if max(mass.shape) > MAX_ALPHABET:
        raise CodecError(f"alphabets larger than {MAX_ALPHABET} are outside desk scale")
    total = spec.book_symbols()
    if total > BOOK_BUDGET:
        raise BudgetError("codebook symbols", total, BOOK_BUDGET)
    k, n = spec.k, spec.n
    sz = spec.sizes()
    w0 = int(np.prod(sz["m0"]))
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(0,)))
    p0 = mass.sum(axis=tuple(range(1, mass.ndim)))
    u0 = _draw(np.cumsum(p0)[None, :], np.zeros((), dtype=np.intp), rng, (w0, n))
    us, xs, oks = [], [], []
    for j in range(k):
        ua, xa = 1 + j, 1 + k + j
        md, L, mj = sz["md"][j], sz["L"][j], sz["mj"][j]
        cdf_u = _conditional_sampler(mass, [0], ua)
        uj = _draw(cdf_u, u0[:, None, None, :].astype(np.intp), rng, (w0, md, L, n))
        cdf_x = _conditional_sampler(mass, [0, ua], xa)
        cond = (u0[:, None, None, :].astype(np.intp) * mass.shape[ua] + uj)[:, :, :, None, :]
        xj = _draw(cdf_x, cond, rng, (w0, md, L, mj, n))
        us.append(uj)
        xs.append(xj)
        if spec.mac.costs is None:
            oks.append(None)
        else:
            c = spec.mac.costs[j]
            oks.append(c.table[xj].sum(axis=-1) <= n * c.budget + 1e-9)
    return Codebooks(spec, u0, tuple(us), tuple(xs), tuple(oks))


def coordination_check(spec: CodeSpec) -> TypicalityCheck:
    """Typicality of (U0, U_1..U_k) at the encoder tolerance delta."""
    mass = spec.p.mass
    return TypicalityCheck(mass.sum(axis=tuple(range(1 + spec.k, mass.ndim))), spec.delta, spec.n)


def decoding_check(spec: CodeSpec) -> TypicalityCheck:
    """Typicality of (U0, U, X, Y) at the decoder tolerance 2 delta."""
    mass = spec.p.mass
    joint = mass[..., None] * spec.mac.transition.reshape((1,) * (1 + spec.k) + spec.mac.transition.shape)
    return TypicalityCheck(joint, spec.epsilon, spec.n)


def cf_coordinate(u0n, mu_maps, check: TypicalityCheck) -> tuple:
    """Lexicographically smallest z with (u0, mu_1(z_1)..mu_k(z_k)) typical.

    ``mu_maps[j]`` has shape (L_j, n). Returns (z, found); z is all zeros
    (the first index) when nothing is typical.
    """
    slots = [((j + 1,), np.asarray(m)) for j, m in enumerate(mu_maps)]
    hits = typical_search(check, {0: u0n}, slots, limit=1)
    if len(hits):
        return tuple(int(v) for v in hits[0]), True
    return (0,) * len(mu_maps), False


def cf_coordinate_exhaustive(u0n, mu_maps, check: TypicalityCheck) -> tuple:
    """Oracle for cf_coordinate: scan every z in lexicographic order."""
    from .covering import is_weakly_typical

    for z in iproduct(*[range(len(m)) for m in mu_maps]):
        seqs = np.vstack([u0n] + [mu_maps[j][z[j]] for j in range(len(z))])
        if is_weakly_typical(seqs, check).typical:
            return tuple(z), True
    return (0,) * len(mu_maps), False


@dataclass(frozen=True)
class Message:
    """One user's message as its three components (0-based indices)."""

    w0: int
    wd: int
    wj: int


def _w0_index(ms, m0) -> int:
    return int(np.ravel_multi_index(tuple(m.w0 for m in ms), m0))


class _Decoder:
    def __init__(self, books: Codebooks):
        self.books = books
        spec = books.spec
        self.k, self.n = spec.k, spec.n
        self.sz = spec.sizes()
        self.ccheck = coordination_check(spec)
        self.dcheck = decoding_check(spec)
        self._z = {}

    def z_for(self, w0, wd) -> tuple:
        key = (w0, wd)
        if key not in self._z:
            b = self.books
            maps = [b.u[j][w0, wd[j]] for j in range(self.k)]
            self._z[key] = cf_coordinate(b.u0[w0], maps, self.ccheck)
        return self._z[key]

    def tuples(self, yn, limit: int = 2) -> list:
        """Typical (w0 index, wd tuple, wj tuple) triples in lexicographic order."""
        b, k = self.books, self.k
        w0_count = b.u0.shape[0]
        found = []
        for w0 in range(w0_count):
            for wd in iproduct(*[range(m) for m in self.sz["md"]]):
                z, _ = self.z_for(w0, wd)
                fixed = {0: b.u0[w0], 2 * k + 1: yn}
                for j in range(k):
                    fixed[1 + j] = b.u[j][w0, wd[j], z[j]]
                slots = [((1 + k + j,), b.x[j][w0, wd[j], z[j]]) for j in range(k)]
                hits = typical_search(self.dcheck, fixed, slots, limit=limit - len(found))
                found.extend((w0, wd, tuple(int(v) for v in h)) for h in hits)
                if len(found) >= limit:
                    return found
        return found


def _to_messages(w0, wd, wj, m0) -> tuple:
    parts = np.unravel_index(w0, m0)
    return tuple(Message(int(parts[j]), int(wd[j]), int(wj[j])) for j in range(len(m0)))


def decode(yn, books: Codebooks, check: TypicalityCheck | None = None) -> tuple:
    """The unique typical message tuple, or the all-first tuple otherwise.

    ``check`` overrides the decoder's typicality test; by default it is
    built from the code's distribution at tolerance 2 delta.
    """
    dec = _Decoder(books)
    if check is not None:
        dec.dcheck = check
    hits = dec.tuples(np.asarray(yn), limit=2)
    m0 = books.sizes["m0"]
    if len(hits) == 1:
        return _to_messages(*hits[0], m0)
    return tuple(Message(0, 0, 0) for _ in range(books.spec.k))


@dataclass
class TrialResult:
    sent: tuple
    decoded: tuple
    error: bool
    failure: str | None = None  # "cost", "enc", "typ" or "wrong"
    S: frozenset = frozenset()  # users whose w_jd differs (for "wrong")
    T: frozenset = frozenset()  # users whose w_jj differs
    w0_wrong: bool = False
    z: tuple = ()
    coordinated: bool = True

    @property
    def label(self) -> str | None:
        if self.failure != "wrong":
            return self.failure
        head = "wrong(w0)" if self.w0_wrong else "wrong"
        return f"{head} S={fmt_set(self.S)} T={fmt_set(self.T)}"


def draw_messages(spec: CodeSpec, rng) -> tuple:
    sz = spec.sizes()
    return tuple(Message(int(rng.integers(sz["m0"][j])), int(rng.integers(sz["md"][j])),
                         int(rng.integers(sz["mj"][j]))) for j in range(spec.k))


def run_trial(books: Codebooks, trial: int, decoder: _Decoder | None = None) -> TrialResult:
    """Encode fresh uniform messages, pass them through the channel and decode."""
    spec = books.spec
    k = spec.k
    dec = decoder or _Decoder(books)
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(1, trial)))
    sent = draw_messages(spec, rng)
    w0 = _w0_index(sent, dec.sz["m0"])
    wd = tuple(m.wd for m in sent)
    z, found = dec.z_for(w0, wd)
    xn = np.vstack([books.x[j][w0, wd[j], z[j], sent[j].wj] for j in range(k)])
    cost_bad = any(ok is not None and not ok[w0, wd[j], z[j], sent[j].wj] for j, ok in enumerate(books.cost_ok))
    yn = transmit(spec.mac, xn, rng)
    hits = dec.tuples(yn, limit=2)
    truth = (w0, wd, tuple(m.wj for m in sent))
    m0 = dec.sz["m0"]
    decoded = _to_messages(*hits[0], m0) if len(hits) == 1 else tuple(Message(0, 0, 0) for _ in range(k))
    res = TrialResult(sent, decoded, decoded != sent or cost_bad, z=z, coordinated=found)
    if not res.error:
        return res
    if cost_bad:
        res.failure = "cost"
    elif not found:
        res.failure = "enc"
    elif truth not in hits and not _true_typical(dec, books, truth, z, yn):
        res.failure = "typ"
    else:
        res.failure = "wrong"
        rival = next(h for h in hits if h != truth)
        res.w0_wrong = rival[0] != truth[0]
        res.S = frozenset(j for j in range(k) if rival[1][j] != truth[1][j])
        res.T = frozenset(j for j in range(k) if rival[2][j] != truth[2][j])
    return res


def _true_typical(dec, books, truth, z, yn) -> bool:
    from .covering import is_weakly_typical

    w0, wd, wj = truth
    k = dec.k
    seqs = [books.u0[w0]] + [books.u[j][w0, wd[j], z[j]] for j in range(k)]
    seqs += [books.x[j][w0, wd[j], z[j], wj[j]] for j in range(k)] + [yn]
    return is_weakly_typical(np.vstack(seqs), dec.dcheck).typical


@dataclass
class ErrorEstimate:
    n: int
    rates: tuple
    trials: int
    errors: int
    interval: tuple
    histogram: Counter = field(default_factory=Counter)  # coarse class -> count
    detail: Counter = field(default_factory=Counter)  # labelled class -> count
    results: list = field(default_factory=list, repr=False)

    @property
    def p_error(self) -> float:
        return self.errors / self.trials

    def class_fractions(self) -> dict:
        return {c: self.histogram.get(c, 0) / self.trials for c in ("cost", "enc", "typ", "wrong")}


def estimate_error(spec: CodeSpec, trials: int, workers=None, keep_results: bool = False) -> ErrorEstimate:
    """Monte Carlo block error rate of one drawn code, with a Wilson interval."""
    if trials < 100:
        raise CodecError("use at least 100 trials")
    books = build_code(spec)
    dec = _Decoder(books)
    results = run_trials(lambda t: run_trial(books, t, dec), trials, workers)
    errs = [r for r in results if r.error]
    est = ErrorEstimate(spec.n, spec.rates, trials, len(errs), wilson_interval(len(errs), trials),
                        Counter(r.failure for r in errs), Counter(r.label for r in errs))
    if keep_results:
        est.results = results
    return est


def product_code_spec(mac, input_marginals, rates, n, seed: int = 0, delta=None) -> CodeSpec:
    """No cooperation: trivial U alphabets, zero CF capacities."""
    from .info import product_pmf

    k = mac.k
    px = product_pmf(input_marginals)
    p = CoordinationDist.from_forwarding(px[None])
    zeros = (0.0,) * k
    return CodeSpec(mac, p, CfSplit(zeros, zeros), CfConfig(zeros, zeros), tuple(rates), n, seed, delta)


def error_rows(estimates) -> list:
    rows = [("n", "rates", "p_error", "ci_low", "ci_high", "cost", "enc", "typ", "wrong")]
    for e in estimates:
        f = e.class_fractions()
        rows.append((e.n, " ".join(f"{r:.6g}" for r in e.rates), e.p_error, e.interval[0], e.interval[1],
                     f["cost"], f["enc"], f["typ"], f["wrong"]))
    return rows


def joint_type_l1(u1n, u2n, target) -> float:
    """L1 distance between the empirical joint type of two sequences and ``target``."""
    target = np.asarray(target, dtype=np.float64)
    counts = np.zeros_like(target)
    np.add.at(counts, (np.asarray(u1n, dtype=np.intp), np.asarray(u2n, dtype=np.intp)), 1.0)
    return float(np.abs(counts / len(u1n) - target).sum())
