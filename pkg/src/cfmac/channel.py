"""Memoryless multiple-access channels with finite alphabets.

A channel is a transition tensor ``W[x_1, ..., x_k, y] = p(y | x_1..x_k)``.
The additive Gaussian family is kept symbolic (noise variance and powers);
its rates are handled by closed forms elsewhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .info import ARITH_TOL, STOCHASTIC_TOL


class ChannelError(ValueError):
    """Malformed channel description (schema, shape or stochasticity)."""


@dataclass(frozen=True)
class CostSpec:
    table: np.ndarray
    budget: float

    def __post_init__(self):
        table = np.array(self.table, dtype=np.float64)
        if table.ndim != 1:
            raise ChannelError("cost table must be one-dimensional")
        if np.any(table < 0):
            raise ChannelError("cost table entries must be nonnegative")
        if self.budget < 0:
            raise ChannelError("cost budget must be nonnegative")
        table.setflags(write=False)
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "budget", float(self.budget))

    def block_cost(self, xn) -> float:
        """Average per-letter cost of a codeword."""
        return float(self.table[np.asarray(xn)].mean())

    def admissible(self, marginal) -> bool:
        return float(np.dot(self.table, marginal)) <= self.budget + ARITH_TOL


@dataclass(frozen=True, eq=False)
class Violation:
    kind: str
    row: tuple | None = None
    value: float | None = None

    def __str__(self):
        where = "" if self.row is None else f" at row {self.row}"
        val = "" if self.value is None else f" (value {self.value!r})"
        return f"{self.kind}{where}{val}"


@dataclass(frozen=True, eq=False)
class DiscreteMac:
    """Finite-alphabet memoryless MAC.

    Construction validates the tensor; an invalid tensor raises ChannelError.
    Use ``validate`` on a raw array to get a report instead.
    """

    transition: np.ndarray
    costs: tuple | None = None
    tol: float = field(default=STOCHASTIC_TOL, repr=False)

    def __post_init__(self):
        w = np.array(self.transition, dtype=np.float64)
        problem = _check_tensor(w, self.tol)
        if problem is not None:
            raise ChannelError(str(problem))
        w.setflags(write=False)
        object.__setattr__(self, "transition", w)
        if self.costs is not None:
            costs = tuple(c if isinstance(c, CostSpec) else CostSpec(*c) for c in self.costs)
            if len(costs) != self.k:
                raise ChannelError("need one cost spec per encoder")
            for c, size in zip(costs, self.input_sizes):
                if c.table.shape != (size,):
                    raise ChannelError("cost table must cover every input symbol")
            object.__setattr__(self, "costs", costs)

    @property
    def k(self) -> int:
        return self.transition.ndim - 1

    @property
    def input_sizes(self) -> tuple[int, ...]:
        return self.transition.shape[:-1]

    @property
    def output_size(self) -> int:
        return self.transition.shape[-1]

    def __eq__(self, other):
        if not isinstance(other, DiscreteMac):
            return NotImplemented
        return (
            self.transition.shape == other.transition.shape
            and np.array_equal(self.transition, other.transition)
            and _costs_equal(self.costs, other.costs)
        )

    __hash__ = None

    def inputs_admissible(self, input_pmf) -> bool:
        """True when every encoder's marginal meets its average-cost budget."""
        if self.costs is None:
            return True
        mass = np.asarray(getattr(input_pmf, "mass", input_pmf))
        for j, c in enumerate(self.costs):
            drop = tuple(i for i in range(self.k) if i != j)
            if not c.admissible(mass.sum(axis=drop)):
                return False
        return True

    def restrict(self, axis: int, symbol: int) -> "DiscreteMac":
        """Channel seen by the other encoders when encoder ``axis`` sends ``symbol``."""
        w = np.take(self.transition, symbol, axis=axis)
        costs = None if self.costs is None else tuple(c for i, c in enumerate(self.costs) if i != axis)
        return DiscreteMac(w, costs, tol=max(self.tol, ARITH_TOL))


def _costs_equal(a, b):
    if a is None or b is None:
        return a is b
    return len(a) == len(b) and all(
        np.array_equal(x.table, y.table) and x.budget == y.budget for x, y in zip(a, b)
    )


def _check_tensor(w: np.ndarray, tol: float):
    if w.ndim < 2:
        return Violation("shape: need at least one input axis and an output axis")
    if 0 in w.shape:
        return Violation("shape: empty alphabet")
    if not np.all(np.isfinite(w)):
        return Violation("non-finite entry")
    neg = np.argwhere(w < 0)
    if len(neg):
        idx = tuple(int(i) for i in neg[0])
        return Violation("negative entry", idx[:-1], float(w[idx]))
    big = np.argwhere(w > 1)
    if len(big):
        idx = tuple(int(i) for i in big[0])
        return Violation("entry above 1", idx[:-1], float(w[idx]))
    sums = w.sum(axis=-1)
    bad = np.argwhere(np.abs(sums - 1.0) > tol)
    if len(bad):
        row = tuple(int(i) for i in bad[0])
        return Violation("non-stochastic row", row, float(sums[row]))
    return None


def validate(mac, tol: float = STOCHASTIC_TOL):
    """Return None when ``mac`` is a valid channel, else the first Violation.

    Accepts a DiscreteMac or a raw tensor indexed (x_1..x_k, y).
    """
    w = mac.transition if isinstance(mac, DiscreteMac) else np.asarray(mac, dtype=np.float64)
    return _check_tensor(w, tol)


def from_function(input_sizes, output_size, fn) -> DiscreteMac:
    """Deterministic channel y = fn(x_1, ..., x_k)."""
    w = np.zeros(tuple(input_sizes) + (output_size,))
    for x in np.ndindex(*input_sizes):
        w[x + (int(fn(*x)),)] = 1.0
    return DiscreteMac(w)


def make_binary_erasure_mac() -> DiscreteMac:
    """Two-user binary adder channel Y = X1 + X2."""
    return from_function((2, 2), 3, lambda a, b: a + b)


def make_adder_mac(k: int = 2) -> DiscreteMac:
    return from_function((2,) * k, k + 1, lambda *x: sum(x))


def random_mac(input_sizes, output_size, rng, floor: float = 0.0) -> DiscreteMac:
    """Rows drawn from a flat Dirichlet; ``floor`` mixes in uniform mass."""
    shape = tuple(input_sizes) + (output_size,)
    w = rng.dirichlet(np.ones(output_size), size=int(np.prod(input_sizes))).reshape(shape)
    if floor:
        w = (1 - floor) * w + floor / output_size
    w /= w.sum(axis=-1, keepdims=True)
    return DiscreteMac(w)


def sample_output(mac: DiscreteMac, x, rng) -> int:
    x = tuple(int(v) for v in np.atleast_1d(x))
    if len(x) != mac.k:
        raise IndexError(f"expected {mac.k} input symbols, got {len(x)}")
    for v, size in zip(x, mac.input_sizes):
        if not 0 <= v < size:
            raise IndexError(f"input symbol {v} outside alphabet of size {size}")
    return int(rng.choice(mac.output_size, p=mac.transition[x]))


def transmit(mac: DiscreteMac, xn, rng) -> np.ndarray:
    """Pass k length-n codewords (array shape (k, n)) through the channel."""
    xn = np.asarray(xn, dtype=np.intp)
    rows = mac.transition[tuple(xn)]  # (n, |Y|)
    cdf = np.cumsum(rows, axis=1)
    u = rng.random(rows.shape[0])[:, None]
    y = (u >= cdf).sum(axis=1)
    return np.minimum(y, mac.output_size - 1)


@dataclass(frozen=True)
class GaussianMac:
    """Y = sum_j X_j + Z with Z ~ N(0, N) and E[X_j^2] <= P_j."""

    noise_variance: float
    powers: tuple

    def __post_init__(self):
        powers = tuple(float(p) for p in self.powers)
        if not self.noise_variance > 0:
            raise ChannelError("noise variance must be positive")
        if any(p < 0 for p in powers):
            raise ChannelError("powers must be nonnegative")
        object.__setattr__(self, "powers", powers)

    @property
    def k(self) -> int:
        return len(self.powers)

    @property
    def snr(self) -> np.ndarray:
        return np.array(self.powers) / self.noise_variance


def to_json(mac: DiscreteMac) -> dict:
    doc = {
        "k": mac.k,
        "input_sizes": [int(s) for s in mac.input_sizes],
        "output_size": int(mac.output_size),
        "transition": mac.transition.ravel().tolist(),
    }
    if mac.costs is not None:
        doc["costs"] = [{"table": c.table.tolist(), "budget": c.budget} for c in mac.costs]
    return doc


def from_json(doc: dict) -> DiscreteMac:
    if not isinstance(doc, dict):
        raise ChannelError("schema: channel document must be a JSON object")
    for key in ("k", "input_sizes", "output_size", "transition"):
        if key not in doc:
            raise ChannelError(f"schema: missing key {key!r}")
    k, sizes, out = doc["k"], doc["input_sizes"], doc["output_size"]
    if not isinstance(k, int) or k < 1:
        raise ChannelError("schema: 'k' must be a positive integer")
    if not isinstance(sizes, list) or len(sizes) != k or not all(isinstance(s, int) and s > 0 for s in sizes):
        raise ChannelError("schema: 'input_sizes' must list k positive integers")
    if not isinstance(out, int) or out < 1:
        raise ChannelError("schema: 'output_size' must be a positive integer")
    flat = np.asarray(doc["transition"], dtype=np.float64)
    expected = int(np.prod(sizes)) * out
    if flat.ndim != 1 or flat.size != expected:
        raise ChannelError(f"shape: transition has {flat.size} entries, expected {expected}")
    costs = None
    if doc.get("costs") is not None:
        raw = doc["costs"]
        if not isinstance(raw, list) or not all(isinstance(c, dict) and "table" in c and "budget" in c for c in raw):
            raise ChannelError("schema: 'costs' must be a list of {table, budget} objects")
        costs = tuple(CostSpec(c["table"], c["budget"]) for c in raw)
    return DiscreteMac(flat.reshape(tuple(sizes) + (out,)), costs)


def save_channel(mac: DiscreteMac, path) -> None:
    # repr-based float serialization in json keeps doubles bit-exact
    Path(path).write_text(json.dumps(to_json(mac)))


def load_channel(path) -> DiscreteMac:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ChannelError(f"schema: not valid JSON ({exc})") from exc
    return from_json(doc)
