"""Deterministic lockstep emulator of a SIMD warp.

A Warp holds W lanes that execute one host-level program together.
Per-lane values are numpy arrays whose last axis has length W; an optional
leading batch axis lets the same lane program run many independent warps
at once (used by bulk statistical runs, with tracing off).

Memory is modeled by address pattern only: each array gets a fresh
line-aligned base, and one "simultaneous" access by the active lanes is
charged the number of distinct line_size-aligned segments its addresses
touch.  Global 2-D arrays are row-major; local arrays interleave the lanes
(lane r's element j lives at slot j*W + r) the way per-thread memory does
on real SIMD hardware, so a lane-uniform index yields consecutive
addresses.  Register arrays generate no memory traffic at all.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


class LaneOutOfRangeError(IndexError):
    """shuffle source lane outside 0..W-1."""


class MaskOutOfRangeError(IndexError):
    """shuffle_xor lane mask outside 0..W-1."""


class OutOfBoundsError(IndexError):
    """A lane addressed an element outside its array's extent."""


def _is_pow2(x: int) -> bool:
    return x > 0 and (x & (x - 1)) == 0


@dataclass(frozen=True)
class WarpConfig:
    lanes: int = 32          # W, power of 2
    elem_size: int = 4       # bytes per element
    line_size: int = 128     # bytes per memory transaction segment

    def __post_init__(self):
        if not _is_pow2(self.lanes) or not 2 <= self.lanes <= 64:
            raise ValueError(f"lane count must be a power of 2 in [2, 64], got {self.lanes}")
        if self.elem_size not in (4, 8):
            raise ValueError(f"elem_size must be 4 or 8, got {self.elem_size}")
        ratio, rem = divmod(self.line_size, self.elem_size)
        if rem or not _is_pow2(ratio):
            raise ValueError("line_size must be a power-of-2 multiple of elem_size")

    @property
    def log2_lanes(self) -> int:
        return self.lanes.bit_length() - 1


@dataclass
class MemoryEvent:
    step: int
    space: str            # "global" | "local"
    kind: str             # "read" | "write"
    active_lanes: int
    transactions: int
    array: str = ""
    phase: str = ""


class Trace:
    """Per-warp recorder of memory events and op counters.

    Counters are keyed by (phase, op); op is one of "shuffle",
    "shuffle_xor", "add".  Phases are free-form labels set by the lane
    programs ("cache_theta", "table_build", "search").
    """

    def __init__(self):
        self.events: list[MemoryEvent] = []
        self.phase = ""
        self.counters: dict[tuple[str, str], int] = {}

    def set_phase(self, phase: str):
        self.phase = phase

    def count(self, op: str, n: int = 1):
        key = (self.phase, op)
        self.counters[key] = self.counters.get(key, 0) + n

    def op_total(self, op: str, phase: str | None = None) -> int:
        return sum(
            v
            for (ph, o), v in self.counters.items()
            if o == op and (phase is None or ph == phase)
        )

    def merge(self, other: "Trace"):
        """Append another warp's recordings; steps are renumbered."""
        offset = len(self.events)
        for ev in other.events:
            self.events.append(
                MemoryEvent(
                    step=offset + ev.step,
                    space=ev.space,
                    kind=ev.kind,
                    active_lanes=ev.active_lanes,
                    transactions=ev.transactions,
                    array=ev.array,
                    phase=ev.phase,
                )
            )
        for key, v in other.counters.items():
            self.counters[key] = self.counters.get(key, 0) + v

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "space", "kind", "active_lanes", "transactions"])
            for ev in self.events:
                writer.writerow([ev.step, ev.space, ev.kind, ev.active_lanes, ev.transactions])


class Warp:
    """W lanes in lockstep, with shuffle primitives and traced memory."""

    def __init__(self, config: WarpConfig, trace: Trace | None = None):
        self.config = config
        self.trace = trace
        self.lane_ids = np.arange(config.lanes)
        self._next_base = 0
        self._step = 0

    # --- address space ---

    def alloc(self, n_elems: int) -> int:
        """Reserve a fresh line-aligned base for an array of n_elems."""
        base = self._next_base
        nbytes = n_elems * self.config.elem_size
        line = self.config.line_size
        self._next_base = base + ((nbytes + line - 1) // line) * line
        return base

    # --- lane exchange primitives ---
    # Every lane always participates in an exchange: a "predicated-off"
    # source lane still contributes its current register value.

    def shuffle(self, values, src):
        """Every lane receives the value held by lane src (per-lane operand)."""
        v = np.asarray(values)
        s = np.asarray(src)
        if np.any(s < 0) or np.any(s >= self.config.lanes):
            raise LaneOutOfRangeError(f"shuffle source lane out of range: {src}")
        if self.trace is not None:
            self.trace.count("shuffle")
        idx = np.broadcast_to(s, v.shape).astype(np.intp)
        return np.take_along_axis(v, idx, axis=-1)

    def shuffle_xor(self, values, mask):
        """Lane r receives the value held by lane r ^ mask."""
        v = np.asarray(values)
        m = np.asarray(mask)
        if np.any(m < 0) or np.any(m >= self.config.lanes):
            raise MaskOutOfRangeError(f"shuffle_xor mask out of range: {mask}")
        if self.trace is not None:
            self.trace.count("shuffle_xor")
        src = self.lane_ids ^ m
        idx = np.broadcast_to(src, v.shape).astype(np.intp)
        return np.take_along_axis(v, idx, axis=-1)

    def any_lane(self, pred) -> bool:
        """True iff at least one lane's predicate holds (uniform result)."""
        return bool(np.any(pred))

    def count_adds(self, n: int = 1):
        if self.trace is not None:
            self.trace.count("add", n)

    def set_phase(self, phase: str):
        if self.trace is not None:
            self.trace.set_phase(phase)

    # --- transaction recording ---

    def traced_access(self, space: str, addresses, kind: str, array: str = "", active=None):
        """Record one simultaneous access; returns the event (or None if untraced).

        addresses are per-lane byte addresses; lanes where active is False
        contribute none.  Transactions = distinct line-aligned segments.
        """
        if self.trace is None:
            return None
        addrs = np.asarray(addresses)
        if addrs.ndim != 1:
            raise ValueError("tracing requires unbatched per-lane addresses")
        if active is not None:
            addrs = addrs[np.asarray(active, dtype=bool)]
        n_active = int(addrs.size)
        if n_active == 0:
            return None
        lines = set((addrs // self.config.line_size).tolist())
        event = MemoryEvent(
            step=self._step,
            space=space,
            kind=kind,
            active_lanes=n_active,
            transactions=len(lines),
            array=array,
            phase=self.trace.phase,
        )
        self._step += 1
        self.trace.events.append(event)
        return event


def _first_offender(bad_mask) -> int:
    hits = np.argwhere(np.atleast_1d(bad_mask))
    return int(hits[0][-1]) if hits.size else -1


class GlobalArray2D:
    """Row-major rows x cols array in the simulated global space."""

    def __init__(self, warp: Warp, data: np.ndarray, name: str):
        self.warp = warp
        self.data = np.asarray(data)
        if self.data.ndim != 2:
            raise ValueError("GlobalArray2D wraps 2-D data")
        self.name = name
        self.rows, self.cols = self.data.shape
        self.base = warp.alloc(self.rows * self.cols)

    def _check(self, i, j):
        bad = (np.asarray(i) < 0) | (np.asarray(i) >= self.rows) | (
            np.asarray(j) < 0
        ) | (np.asarray(j) >= self.cols)
        if np.any(bad):
            lane = _first_offender(bad)
            raise OutOfBoundsError(f"{self.name}[{i}, {j}]: lane {lane} out of bounds")

    def _record(self, i, j, kind, active):
        if self.warp.trace is None:
            return
        ii = np.broadcast_to(np.asarray(i), (self.warp.config.lanes,))
        jj = np.broadcast_to(np.asarray(j), (self.warp.config.lanes,))
        addrs = self.base + (ii * self.cols + jj) * self.warp.config.elem_size
        self.warp.traced_access("global", addrs, kind, self.name, active)

    def read(self, i, j, active=None):
        self._check(i, j)
        self._record(i, j, "read", active)
        return self.data[i, j]

    def write(self, i, j, values, active=None):
        self._check(i, j)
        self._record(i, j, "write", active)
        if active is None:
            self.data[i, j] = values
        else:
            act = np.asarray(active, dtype=bool)
            old = self.data[i, j]
            self.data[i, j] = np.where(act, values, old)


class LocalArray:
    """Per-lane array of a fixed length, interleaved across the warp.

    Lane r's element j sits at byte offset (j*W + r)*elem_size, so a
    lane-uniform index touches W consecutive addresses.  backing shape is
    (length, *batch, W); batched instances cannot be traced.
    """

    def __init__(self, warp: Warp, length: int, name: str, dtype=np.float64, batch_shape=()):
        self.warp = warp
        self.length = length
        self.name = name
        self.batch_shape = tuple(batch_shape)
        self.data = np.zeros((length, *self.batch_shape, warp.config.lanes), dtype=dtype)
        self.base = warp.alloc(length * warp.config.lanes)

    def _check_elem(self, e):
        bad = (np.asarray(e) < 0) | (np.asarray(e) >= self.length)
        if np.any(bad):
            lane = _first_offender(bad)
            raise OutOfBoundsError(f"{self.name}[{e}]: lane {lane} out of bounds")

    def _record(self, element, owner, kind, active):
        if self.warp.trace is None:
            return
        W = self.warp.config.lanes
        ee = np.broadcast_to(np.asarray(element), (W,))
        oo = np.broadcast_to(np.asarray(owner), (W,))
        addrs = self.base + (ee * W + oo) * self.warp.config.elem_size
        self.warp.traced_access("local", addrs, kind, self.name, active)

    def read(self, element, active=None):
        """Each lane reads element (uniform int or per-lane) of its own row."""
        self._check_elem(element)
        self._record(element, self.warp.lane_ids, "read", active)
        if np.ndim(element) == 0:
            return self.data[int(element)].copy()
        idx = np.asarray(element, dtype=np.intp)
        return np.take_along_axis(self.data, idx[np.newaxis], axis=0)[0]

    def write(self, element, values, active=None):
        """Each lane writes element of its own row; active masks the effect."""
        self._check_elem(element)
        self._record(element, self.warp.lane_ids, "write", active)
        vals = np.asarray(values, dtype=self.data.dtype)
        if np.ndim(element) == 0:
            if active is None:
                self.data[int(element)] = vals
            else:
                act = np.asarray(active, dtype=bool)
                self.data[int(element)] = np.where(act, vals, self.data[int(element)])
            return
        idx = np.asarray(element, dtype=np.intp)[np.newaxis]
        current = np.take_along_axis(self.data, idx, axis=0)[0]
        if active is not None:
            vals = np.where(np.asarray(active, dtype=bool), vals, current)
        np.put_along_axis(self.data, idx, vals[np.newaxis], axis=0)

    def read_lane(self, owner, element, active=None):
        """Cross-lane gather: each lane reads `element` of lane `owner`'s row."""
        if self.batch_shape:
            raise ValueError("cross-lane access is unbatched only")
        self._check_elem(element)
        self._record(element, owner, "read", active)
        oo = np.broadcast_to(np.asarray(owner), (self.warp.config.lanes,))
        ee = np.broadcast_to(np.asarray(element), (self.warp.config.lanes,))
        return self.data[ee, oo]

    def write_lane(self, owner, element, values, active=None):
        """Cross-lane scatter: each lane writes `element` of lane `owner`'s row."""
        if self.batch_shape:
            raise ValueError("cross-lane access is unbatched only")
        self._check_elem(element)
        self._record(element, owner, "write", active)
        W = self.warp.config.lanes
        oo = np.broadcast_to(np.asarray(owner), (W,))
        ee = np.broadcast_to(np.asarray(element), (W,))
        vals = np.broadcast_to(np.asarray(values, dtype=self.data.dtype), (W,))
        if active is None:
            self.data[ee, oo] = vals
        else:
            act = np.asarray(active, dtype=bool)
            self.data[ee[act], oo[act]] = vals[act]


class RegisterArray:
    """Per-lane array held in registers: no addresses, no transactions."""

    def __init__(self, warp: Warp, length: int, dtype=np.float64, batch_shape=()):
        self.length = length
        self.data = np.zeros((length, *tuple(batch_shape), warp.config.lanes), dtype=dtype)

    def read(self, element):
        return self.data[int(element)].copy()

    def write(self, element, values, active=None):
        vals = np.asarray(values, dtype=self.data.dtype)
        if active is None:
            self.data[int(element)] = vals
        else:
            act = np.asarray(active, dtype=bool)
            self.data[int(element)] = np.where(act, vals, self.data[int(element)])
