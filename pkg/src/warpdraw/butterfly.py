"""Butterfly-patterned partial sums: schedule and closed-form layout.

A W x W block of per-document products (row = storage index, column =
lane) is swept by log2(W) sets of four-entry replacement computations.
Each replacement pairs two rows and two columns whose indices differ by
the same power of two and rewrites

    [a b; c d]  ->  [a d; a+b c+d].

After the full sweep the entry at (row i, column j) holds one contiguous
span sum of a single document's products; ``entry_span`` gives that
(document, lo, hi) triple in closed form and ``entry_oracle`` evaluates it
by direct summation.  The same sweep applied to symbolic singleton spans
(``SpanSum``) reproduces the layout exactly and is used to verify the
schedule itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Replacement:
    """Four-entry update at rows (i, j) and columns (k, l), j-i == l-k == 2^b."""

    i: int
    j: int
    k: int
    l: int


def replace_four(a, b, c, d):
    """[a b; c d] -> (a, d, a+b, c+d)."""
    return a, d, a + b, c + d


def replacement_schedule(lanes: int) -> list[list[Replacement]]:
    """The log2(W) ordered sets of independent replacements for a W x W block.

    Set b pairs rows (d, d+bit) for d = 2*bit*t + (bit-1) with every column
    pair (c, c^bit), bit = 2^b.  Sets must be applied in order; the
    replacements within one set commute.
    """
    if lanes < 2 or lanes & (lanes - 1):
        raise ValueError("lane count must be a power of 2, at least 2")
    sets = []
    for b in range(lanes.bit_length() - 1):
        bit = 1 << b
        rows = [2 * bit * t + (bit - 1) for t in range(lanes // (2 * bit))]
        cols = [c for c in range(lanes) if not c & bit]
        sets.append([Replacement(d, d + bit, c, c ^ bit) for d in rows for c in cols])
    return sets


def entry_span(i: int, j: int, lanes: int) -> tuple[int, int, int]:
    """(document, lo, hi) stored at (row i, column j) after the full sweep."""
    if not (0 <= i < lanes and 0 <= j < lanes):
        raise ValueError("row and column must lie in 0..W-1")
    m = i ^ (i + 1)
    k = m >> 1
    u = (i & ~m) + (j & m)
    v = j & ~k
    return u, v, v + k


def entry_oracle(i: int, j: int, lanes: int, products) -> float:
    """Direct summation of the span the final table holds at (i, j).

    products[u][t] is document u's product for block-local topic t.
    """
    u, lo, hi = entry_span(i, j, lanes)
    return float(np.sum(np.asarray(products)[u, lo : hi + 1]))


@dataclass(frozen=True)
class SpanSum:
    """Sum of one document's products over the contiguous topics lo..hi."""

    doc: int
    lo: int
    hi: int

    def __add__(self, other: "SpanSum") -> "SpanSum":
        if self.doc != other.doc:
            raise ValueError(f"cannot merge spans of documents {self.doc} and {other.doc}")
        if other.lo != self.hi + 1:
            raise ValueError(f"spans {self} and {other} are not adjacent")
        return SpanSum(self.doc, self.lo, other.hi)

    def __str__(self):
        return f"Z{self.doc}[{self.lo}:{self.hi}]"


def singleton_grid(lanes: int) -> list[list[SpanSum]]:
    """Start state of a block: (row k, column c) holds document k's topic-c product."""
    return [[SpanSum(doc=row, lo=col, hi=col) for col in range(lanes)] for row in range(lanes)]


def apply_replacement_sets(grid, sets) -> list[list[list]]:
    """Apply the schedule to a mutable square grid; returns a snapshot per set.

    Works on anything with +, so the same replay drives both numeric and
    symbolic verification.
    """
    snapshots = []
    for batch in sets:
        for rep in batch:
            a, b = grid[rep.i][rep.k], grid[rep.i][rep.l]
            c, d = grid[rep.j][rep.k], grid[rep.j][rep.l]
            (
                grid[rep.i][rep.k],
                grid[rep.i][rep.l],
                grid[rep.j][rep.k],
                grid[rep.j][rep.l],
            ) = replace_four(a, b, c, d)
        snapshots.append([row.copy() for row in grid])
    return snapshots


def final_symbolic(lanes: int) -> list[list[SpanSum]]:
    """Closed-form final state of the symbolic sweep."""
    return [
        [SpanSum(*entry_span(i, j, lanes)) for j in range(lanes)]
        for i in range(lanes)
    ]
