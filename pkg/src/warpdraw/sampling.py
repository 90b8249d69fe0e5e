"""Sequential discrete-distribution machinery.

Prefix tables with linear/binary CDF-inversion search, a Vose-built alias
table, and an extended-precision brute-force oracle that every other
sampler in the package is checked against.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .rng import Xoshiro256StarStar


class EmptyWeightsError(ValueError):
    """The weight vector is empty."""


class AllZeroError(ValueError):
    """Every weight is zero, so no outcome can be drawn."""


def as_weights(weights, dtype=np.float64) -> np.ndarray:
    w = np.asarray(weights, dtype=dtype)
    if w.ndim != 1 or w.size == 0:
        raise EmptyWeightsError("need a non-empty 1-D weight vector")
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    return w


@dataclass
class PrefixTable:
    """Running sums of relative probabilities; p is nondecreasing."""

    p: np.ndarray
    total: float


def build_prefix(weights, dtype=np.float64) -> PrefixTable:
    """Left-to-right running sums in the requested precision."""
    w = as_weights(weights, dtype)
    p = np.cumsum(w, dtype=dtype)
    total = p[-1]
    if not total > 0:
        raise AllZeroError("weights sum to zero")
    return PrefixTable(p=p, total=float(total))


def linear_search(table: PrefixTable, stop: float) -> int:
    """Smallest j with p[j] > stop; clamps to K-1 when stop >= total."""
    if stop < 0:
        raise ValueError("stop must be non-negative")
    p = table.p
    j = 0
    last = len(p) - 1
    while j < last and stop >= p[j]:
        j += 1
    return j


def binary_search(table: PrefixTable, stop: float) -> int:
    """Same contract as linear_search, by bisection on the monotone table."""
    if stop < 0:
        raise ValueError("stop must be non-negative")
    p = table.p
    j, k = 0, len(p) - 1
    while j < k:
        mid = (j + k) // 2
        if stop < p[mid]:
            k = mid
        else:
            j = mid + 1
    return j


def draw(table: PrefixTable, rng: Xoshiro256StarStar) -> int:
    if not table.total > 0:
        raise AllZeroError("weights sum to zero")
    stop = table.total * rng.next_unit()
    return binary_search(table, stop)


@dataclass
class AliasTable:
    """Acceptance thresholds F (exact rationals in [0,1]) and alias targets A.

    F is kept in exact arithmetic so the mass partition
    (F[k]/n)*total + sum over j aliased to k of ((1-F[j])/n)*total == w[k]
    holds exactly for any float-representable input.
    """

    F: list
    A: np.ndarray
    n: int
    total: float


def build_alias_vose(weights) -> AliasTable:
    """One-pass small/large worklist construction of the alias table."""
    w = as_weights(weights)
    n = len(w)
    exact = [Fraction(x) for x in w.tolist()]
    total = sum(exact)
    if total <= 0:
        raise AllZeroError("weights sum to zero")

    scaled = [x * n / total for x in exact]
    F: list = [None] * n
    A = np.arange(n)
    # Boundary weights (scaled exactly 1) are classified as large.
    small = [k for k in range(n) if scaled[k] < 1]
    large = [k for k in range(n) if scaled[k] >= 1]
    while small and large:
        s = small.pop()
        g = large.pop()
        F[s] = scaled[s]
        A[s] = g
        scaled[g] = scaled[g] - (1 - scaled[s])
        if scaled[g] < 1:
            small.append(g)
        else:
            large.append(g)
    for rest in (small, large):
        while rest:
            g = rest.pop()
            F[g] = Fraction(1)
    return AliasTable(F=F, A=A, n=n, total=float(total))


def alias_draw(table: AliasTable, rng: Xoshiro256StarStar) -> int:
    """Constant-time draw: slot k from rng, then accept k or take its alias."""
    k = int(rng.next_unit() * table.n)
    u = rng.next_unit()
    return k if u < table.F[k] else int(table.A[k])


def _is_integral(w: np.ndarray) -> bool:
    return bool(np.all(np.equal(np.mod(w, 1), 0)))


def oracle_index(weights, stop: float) -> int:
    """Brute-force reference: smallest j with sum(w[0..j]) > stop.

    Runs in exact rational arithmetic when the weights are integral,
    otherwise with a Neumaier-compensated running sum; independent of the
    table-based search paths it is used to check.
    """
    w = as_weights(weights)
    if stop < 0:
        raise ValueError("stop must be non-negative")
    if not np.sum(w) > 0:
        raise AllZeroError("weights sum to zero")
    last = len(w) - 1
    if _is_integral(w):
        exact_stop = Fraction(stop)
        running = Fraction(0)
        for j, x in enumerate(w.tolist()):
            running += Fraction(x)
            if running > exact_stop:
                return j
        return last
    s = 0.0
    comp = 0.0
    for j, x in enumerate(w.tolist()):
        t = s + x
        if abs(s) >= abs(x):
            comp += (s - t) + x
        else:
            comp += (x - t) + s
        s = t
        if s + comp > stop:
            return j
    return last


def oracle_index_batch(weights: np.ndarray, stops: np.ndarray) -> np.ndarray:
    """Vectorized oracle over rows of weights: extended-precision cumsum."""
    w = np.asarray(weights, dtype=np.longdouble)
    prefix = np.cumsum(w, axis=-1)
    stops = np.asarray(stops, dtype=np.longdouble)
    hit = prefix > stops[..., None]
    idx = hit.argmax(axis=-1)
    none = ~hit.any(axis=-1)
    return np.where(none, w.shape[-1] - 1, idx)


def load_weights(path) -> np.ndarray:
    """Weights file: one non-negative decimal per line."""
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                x = float(text)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: not a number: {text!r}") from exc
            if x < 0:
                raise ValueError(f"{path}:{lineno}: negative weight {x}")
            values.append(x)
    if not values:
        raise EmptyWeightsError(f"{path}: no weights")
    return np.asarray(values, dtype=np.float64)
