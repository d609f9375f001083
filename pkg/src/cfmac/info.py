"""Exact information measures over finite joint pmfs.

All quantities are in bits. Axes are referred to by integer position or,
when the pmf carries labels, by label.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

STOCHASTIC_TOL = 1e-12
ARITH_TOL = 1e-9


class SupportError(ValueError):
    """Raised when a divergence hits p > 0 where q = 0."""

    def __init__(self, index, p_value):
        self.index = index
        self.p_value = p_value
        super().__init__(f"support violation at index {index}: p={p_value!r} but q=0")


@dataclass(frozen=True, eq=False)
class JointPmf:
    """Probability mass over a product of finite alphabets.

    ``mass`` is stored with one array dimension per axis.
    """

    mass: np.ndarray
    labels: tuple[str, ...] | None = None
    tol: float = STOCHASTIC_TOL

    def __post_init__(self):
        mass = np.array(self.mass, dtype=np.float64)
        if mass.ndim == 0:
            raise ValueError("a JointPmf needs at least one axis")
        if np.any(mass < 0):
            raise ValueError("negative probability mass")
        total = mass.sum()
        if abs(total - 1.0) > self.tol:
            raise ValueError(f"mass sums to {total!r}, not 1")
        mass.setflags(write=False)
        object.__setattr__(self, "mass", mass)
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != mass.ndim or len(set(labels)) != len(labels):
                raise ValueError("labels must be unique, one per axis")
            object.__setattr__(self, "labels", labels)

    @classmethod
    def from_flat(cls, axis_sizes, flat, labels=None, tol=STOCHASTIC_TOL):
        return cls(np.asarray(flat, dtype=np.float64).reshape(tuple(axis_sizes)), labels, tol)

    @property
    def axis_sizes(self) -> tuple[int, ...]:
        return self.mass.shape

    @property
    def ndim(self) -> int:
        return self.mass.ndim

    @property
    def flat(self) -> np.ndarray:
        return self.mass.ravel()

    def axis_index(self, axis) -> int:
        if isinstance(axis, (int, np.integer)):
            if not 0 <= axis < self.ndim:
                raise IndexError(f"axis {axis} out of range for {self.ndim} axes")
            return int(axis)
        if self.labels is None:
            raise KeyError(f"pmf has no labels; cannot resolve {axis!r}")
        return self.labels.index(axis)

    def resolve(self, axes) -> tuple[int, ...]:
        if axes is None:
            return ()
        if isinstance(axes, (int, np.integer, str)):
            axes = (axes,)
        return tuple(sorted({self.axis_index(a) for a in axes}))

    def marginal(self, axes) -> np.ndarray:
        """Marginal mass on ``axes`` (kept in ascending axis order)."""
        keep = self.resolve(axes)
        drop = tuple(i for i in range(self.ndim) if i not in keep)
        return self.mass.sum(axis=drop) if drop else self.mass

    def support(self) -> np.ndarray:
        return self.mass > 0

    def __eq__(self, other):
        if not isinstance(other, JointPmf):
            return NotImplemented
        return self.mass.shape == other.mass.shape and np.array_equal(self.mass, other.mass)

    __hash__ = None


def as_pmf(p, tol=ARITH_TOL) -> JointPmf:
    if isinstance(p, JointPmf):
        return p
    return JointPmf(np.asarray(p, dtype=np.float64), tol=tol)


def _h(mass: np.ndarray) -> float:
    m = mass[mass > 0]
    return float(-(m * np.log2(m)).sum())


def _joint_h(p: JointPmf, axes: Sequence[int]) -> float:
    # entropy of an (possibly empty) axis set; H(empty) = 0
    if not axes:
        return 0.0
    return _h(p.marginal(axes))


def _disjoint(*groups):
    seen = set()
    for g in groups:
        if seen & set(g):
            return False
        seen |= set(g)
    return True


def entropy(p, axes=None) -> float:
    """H(axes). With ``axes=None`` the entropy of the whole pmf."""
    p = as_pmf(p)
    axes = tuple(range(p.ndim)) if axes is None else p.resolve(axes)
    if not axes:
        raise ValueError("entropy needs a nonempty axis set")
    return _joint_h(p, axes)


def conditional_entropy(p, axes, cond=()) -> float:
    p = as_pmf(p)
    a, c = p.resolve(axes), p.resolve(cond)
    if not a:
        raise ValueError("entropy needs a nonempty axis set")
    if not _disjoint(a, c):
        raise ValueError("conditioning axes overlap the target axes")
    return max(_joint_h(p, tuple(sorted(set(a) | set(c)))) - _joint_h(p, c), 0.0)


def mutual_information(p, axes_a, axes_b, cond=()) -> float:
    """I(A;B|C) = H(A,C) + H(B,C) - H(A,B,C) - H(C), clamped at 0."""
    p = as_pmf(p)
    a, b, c = p.resolve(axes_a), p.resolve(axes_b), p.resolve(cond)
    if not _disjoint(a, b, c):
        raise ValueError("axis sets must be pairwise disjoint")
    if not a or not b:
        return 0.0
    ac = tuple(sorted(set(a) | set(c)))
    bc = tuple(sorted(set(b) | set(c)))
    abc = tuple(sorted(set(a) | set(b) | set(c)))
    value = _joint_h(p, ac) + _joint_h(p, bc) - _joint_h(p, abc) - _joint_h(p, c)
    return max(value, 0.0)


def kl_divergence(p, q) -> float:
    """D(p||q) in bits. Raises SupportError if p puts mass where q has none."""
    pm = p.mass if isinstance(p, JointPmf) else np.asarray(p, dtype=np.float64)
    qm = q.mass if isinstance(q, JointPmf) else np.asarray(q, dtype=np.float64)
    if pm.shape != qm.shape:
        raise ValueError(f"shape mismatch {pm.shape} vs {qm.shape}")
    bad = (pm > 0) & (qm <= 0)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise SupportError(idx if len(idx) > 1 else idx[0], float(pm[idx]))
    pos = pm > 0
    return max(float((pm[pos] * (np.log2(pm[pos]) - np.log2(qm[pos]))).sum()), 0.0)


def total_correlation(p, axes, cond=()) -> float:
    """sum_j H(j|C) - H(axes|C)."""
    p = as_pmf(p)
    a, c = p.resolve(axes), p.resolve(cond)
    if not a:
        raise ValueError("total correlation needs a nonempty axis set")
    if not _disjoint(a, c):
        raise ValueError("conditioning axes overlap the target axes")
    hc = _joint_h(p, c)
    singles = sum(_joint_h(p, tuple(sorted({j} | set(c)))) - hc for j in a)
    joint = _joint_h(p, tuple(sorted(set(a) | set(c)))) - hc
    return max(singles - joint, 0.0)


def product_pmf(marginals: Iterable) -> np.ndarray:
    """Outer product of 1-D marginals as a k-dimensional array."""
    out = np.ones(())
    for m in marginals:
        out = np.multiply.outer(out, np.asarray(m, dtype=np.float64))
    return out


def is_product(p, tol=ARITH_TOL) -> bool:
    p = as_pmf(p)
    margs = [p.marginal(i) for i in range(p.ndim)]
    return bool(np.max(np.abs(p.mass - product_pmf(margs))) <= tol)


def _check_input(mac, input_pmf) -> np.ndarray:
    mass = input_pmf.mass if isinstance(input_pmf, JointPmf) else np.asarray(input_pmf, dtype=np.float64)
    if mass.shape != tuple(mac.input_sizes):
        raise ValueError(f"input pmf shape {mass.shape} does not match channel inputs {tuple(mac.input_sizes)}")
    return mass


def output_pmf(mac, input_pmf) -> JointPmf:
    """p(y) = sum_x p(x) p(y|x)."""
    mass = _check_input(mac, input_pmf)
    py = np.tensordot(mass, mac.transition, axes=mass.ndim)
    return JointPmf(py, tol=ARITH_TOL)


def joint_input_output(mac, input_pmf) -> JointPmf:
    """p(x_1..x_k, y) = p(x) p(y|x); Y is the last axis."""
    mass = _check_input(mac, input_pmf)
    return JointPmf(mass[..., None] * mac.transition, tol=ARITH_TOL)


class EntropyCache:
    """Memoized marginal entropies of one fixed joint array (axes by position)."""

    def __init__(self, mass: np.ndarray):
        self.mass = np.asarray(mass)
        self.cache = {(): 0.0}

    def h(self, axes) -> float:
        key = tuple(sorted(set(axes)))
        if key not in self.cache:
            drop = tuple(a for a in range(self.mass.ndim) if a not in key)
            self.cache[key] = _h(self.mass.sum(axis=drop) if drop else self.mass)
        return self.cache[key]

    def cond_h(self, a, c=()) -> float:
        return self.h(set(a) | set(c)) - self.h(c)

    def mi(self, a, b, c=()) -> float:
        a, b, c = set(a), set(b), set(c)
        if not a or not b:
            return 0.0
        v = self.h(a | c) + self.h(b | c) - self.h(a | b | c) - self.h(c)
        return max(v, 0.0)

    def tc(self, axes, c=()) -> float:
        axes, c = set(axes), set(c)
        v = sum(self.cond_h({j}, c) for j in axes) - self.cond_h(axes, c)
        return max(v, 0.0)
