"""Lane programs for drawing topic assignments on the warp emulator.

Three kernels share one contract: given document lengths N, weight
matrices theta (docs x topics) and phi (vocab x topics), and word ids w,
draw z[m][i] with probability proportional to theta[m,k] * phi[w[m][i],k].

* draw_z_basic      - warp-free sequential reference (products, running
                      sums, bisection per word).
* draw_z_transposed - warp kernel with transposed global access; pays for
                      it with scattered local reads when the per-document
                      running sums are gathered back into lane order.
* draw_z_butterfly  - warp kernel that keeps the exchange in registers,
                      builds a butterfly-patterned table, and reconstructs
                      the running sums it needs on the fly during search.

All kernels consume stop randomness through a provider object so that
identical unit values can be injected across kernels for one-for-one
differential comparison.  Master-index looping keeps every lane active:
lanes whose document ended keep redrawing their final word, and the last
redraw wins.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .sampling import AllZeroError, PrefixTable, binary_search
from .warp import GlobalArray2D, LocalArray, RegisterArray, Trace, Warp, WarpConfig


class StopOutOfRangeError(ValueError):
    """A search was handed a stop value outside [0, sum)."""


# --- stop randomness providers ---


class SeededStops:
    """Fresh hashed stream per (document, master iteration).

    Redraws of a short document's final word consume fresh randomness, so
    different kernels are not draw-for-draw comparable in this mode.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)

    def units(self, m, i, i_master):
        return _rng.units_for(self.seed, m, i_master)


class InjectedStops:
    """Pre-drawn unit values looked up by (document, word index).

    Master-index redraws reuse the final word's value, which makes the
    kernels draw-for-draw comparable.
    """

    def __init__(self, units):
        self._units = [np.asarray(u, dtype=np.float64) for u in units]

    @classmethod
    def from_seed(cls, seed: int, lengths) -> "InjectedStops":
        return cls([_rng.units_for(seed, np.full(n, m), np.arange(n)) for m, n in enumerate(lengths)])

    @classmethod
    def from_file(cls, path, lengths) -> "InjectedStops":
        flat = np.loadtxt(path, dtype=np.float64, ndmin=1)
        if flat.size != int(np.sum(lengths)):
            raise ValueError(
                f"stop file {path} holds {flat.size} values, corpus needs {int(np.sum(lengths))}"
            )
        if np.any(flat < 0) or np.any(flat >= 1):
            raise ValueError("injected values must lie in [0, 1)")
        out, start = [], 0
        for n in lengths:
            out.append(flat[start : start + n])
            start += n
        return cls(out)

    def units(self, m, i, i_master):
        mm = np.atleast_1d(np.asarray(m))
        ii = np.atleast_1d(np.asarray(i))
        out = np.zeros(mm.shape, dtype=np.float64)
        for t in range(mm.size):
            row = self._units[int(mm.flat[t])]
            out.flat[t] = row[int(ii.flat[t])] if row.size else 0.0
        return out


def _stops_from_units(sums, units, dtype):
    """stop = sum * u in the table dtype, kept strictly below sum."""
    u = np.asarray(units).astype(dtype)
    stop = (np.asarray(sums) * u).astype(dtype)
    below = np.nextafter(sums, np.zeros_like(sums))
    stop = np.where((stop >= sums) & (sums > 0), below, stop)
    return np.where(sums > 0, stop, np.zeros_like(stop))


# --- lane programs ---


def cache_theta_transposed(warp: Warp, theta: GlobalArray2D, theta_local: LocalArray, q: int):
    """Cache one warp's theta rows into per-lane storage.

    Remnant topics are fetched per lane (strided); each block row is
    fetched cooperatively, so the W simultaneous addresses are
    consecutive.  Block data lands transposed: lane r's entry j+k holds
    theta[q*W+k, j+r].
    """
    W = warp.config.lanes
    K = theta_local.length
    lanes = warp.lane_ids
    m = q * W + lanes
    j = 0
    while j < K % W:
        theta_local.write(j, theta.read(m, j))
        j += 1
    while j < K:
        for k in range(W):
            theta_local.write(j + k, theta.read(q * W + k, j + lanes))
        j += W


def compute_partial_sums_transposed(
    warp: Warp,
    theta_local: LocalArray,
    phi: GlobalArray2D,
    p: LocalArray,
    a: LocalArray,
    c_warp: LocalArray,
    words,
):
    """Straight per-document running sums via transposed product blocks.

    phi is read cooperatively (coalesced), but gathering each lane's own
    running sums back requires one scattered local read of `a` per block
    column - the cost the butterfly construction removes.
    """
    W = warp.config.lanes
    K = theta_local.length
    lanes = warp.lane_ids
    dtype = p.data.dtype
    for k in range(W):
        c_warp.write_lane(k, lanes, words)
    sums = np.zeros(p.data.shape[1:], dtype=dtype)
    j = 0
    while j < K % W:
        prod = theta_local.read(j) * phi.read(words, j)
        sums = (sums + prod).astype(dtype)
        warp.count_adds()
        p.write(j, sums)
        j += 1
    while j < K:
        for k in range(W):
            a.write(k, theta_local.read(j + k) * phi.read(c_warp.read(k), j + lanes))
        for k in range(W):
            prod = a.read_lane(k, lanes)
            sums = (sums + prod).astype(dtype)
            warp.count_adds()
            p.write(j + k, sums)
        j += W
    return sums


def build_butterfly_table(
    warp: Warp,
    theta_local: LocalArray,
    phi: GlobalArray2D,
    p: LocalArray,
    words,
):
    """Butterfly-patterned partial sums; exchange stays in registers.

    Remnant entries are plain running sums.  Each W-topic block is filled
    with products, then swept by log2(W) exchange sets: on each step a
    lane contributes a[d] or a[d+bit] depending on its own bit, swaps it
    with lane r^bit, and folds the received value in.  Row d of the block
    is stored when it is the pair's low row; the final row carries the
    running total across remnant and earlier blocks.
    """
    cfg = warp.config
    W = cfg.lanes
    K = theta_local.length
    lanes = warp.lane_ids
    dtype = p.data.dtype
    batch = p.data.shape[1:-1]

    words = np.asarray(words)
    c_reg = RegisterArray(warp, W, dtype=np.int64, batch_shape=batch)
    for k in range(W):
        c_reg.write(k, warp.shuffle(words, k))

    sums = np.zeros(p.data.shape[1:], dtype=dtype)
    j = 0
    while j < K % W:
        prod = theta_local.read(j) * phi.read(words, j)
        sums = (sums + prod).astype(dtype)
        warp.count_adds()
        p.write(j, sums)
        j += 1
    while j < K:
        a = RegisterArray(warp, W, dtype=dtype, batch_shape=batch)
        for k in range(W):
            a.write(k, theta_local.read(j + k) * phi.read(c_reg.read(k), j + lanes))
        for b in range(cfg.log2_lanes):
            bit = 1 << b
            for t in range(W // (2 * bit)):
                d = 2 * bit * t + (bit - 1)
                hi_lane = (lanes & bit) != 0
                h = np.where(hi_lane, a.read(d), a.read(d + bit))
                v = warp.shuffle_xor(h, bit)
                a.write(d, a.read(d + bit), active=hi_lane)
                a.write(d + bit, a.read(d) + v)
                warp.count_adds()
                p.write(j + d, a.read(d))
        sums = (sums + a.read(W - 1)).astype(dtype)
        warp.count_adds()
        p.write(j + (W - 1), sums)
        j += W
    return sums


@dataclass
class ButterflyTable:
    """Snapshot of one warp's butterfly table: p[k][..., r] is lane r's entry k."""

    p: np.ndarray
    sums: np.ndarray
    lanes: int


@dataclass
class SearchState:
    """Per-set walk state: running bracket values and the column flip mask."""

    bit: int
    low_value: np.ndarray
    high_value: np.ndarray
    flip: np.ndarray
    block_base: np.ndarray


def _prefix_binary_search(warp: Warp, p: LocalArray, stop):
    """Per-lane bisection over each lane's own straight running sums."""
    K = p.length
    j = np.zeros(np.shape(stop), dtype=np.int64)
    k = np.full(np.shape(stop), K - 1, dtype=np.int64)
    while warp.any_lane(j < k):
        act = j < k
        mid = (j + k) >> 1
        vals = p.read(np.where(act, mid, 0), active=_lane_mask(act))
        less = stop < vals
        k = np.where(act & less, mid, k)
        j = np.where(act & ~less, mid + 1, j)
    return j


def _lane_mask(act):
    # Trace-level active mask only makes sense unbatched.
    return act if np.ndim(act) == 1 else None


def _butterfly_block_walk(warp: Warp, p: LocalArray, stop, block_base, observer=None):
    """Bisect within the selected W-topic block using cross-lane fetches.

    Lanes keep bracket values (low_value, high_value) equal to straight
    running sums at the live range's edges; each set fetches the one
    butterfly entry that bisects the range - usually from another lane's
    storage - and routes it home with shuffle_xor by the accumulated flip
    mask.  The final index is block_base + (flip ^ r).
    """
    cfg = warp.config
    W = cfg.lanes
    lanes = warp.lane_ids
    has_prev = block_base > 0
    prev = np.maximum(block_base - 1, 0)
    prev_vals = p.read(prev, active=_lane_mask(has_prev))
    low = np.where(has_prev, prev_vals, np.zeros_like(prev_vals))
    high = p.read(block_base + (W - 1))
    flip = np.zeros_like(block_base)
    for b in range(cfg.log2_lanes):
        bit = 1 << (cfg.log2_lanes - 1 - b)
        mask = ((W - 1) * (2 * bit)) & (W - 1)
        y = np.zeros_like(high)
        for t in range(W // (2 * bit)):
            d = (bit - 1) + 2 * bit * t
            him = (d & mask) + (lanes & ~mask)
            his_base = warp.shuffle(block_base, him)
            fetched = p.read(his_base + d)
            tval = warp.shuffle_xor(fetched, flip)
            take = ((lanes ^ d) & mask) == 0
            y = np.where(take, tval, y)
        hi_half = (lanes & bit) != 0
        compare = np.where(hi_half, high - y, low + y)
        less = stop < compare
        high = np.where(less, compare, high)
        low = np.where(less, low, compare)
        flip = np.where(less, flip ^ (bit & lanes), flip ^ (bit & ~lanes))
        if observer is not None:
            observer(
                SearchState(
                    bit=bit,
                    low_value=np.array(low, copy=True),
                    high_value=np.array(high, copy=True),
                    flip=np.array(flip, copy=True),
                    block_base=np.array(block_base, copy=True),
                )
            )
    return block_base + (flip ^ lanes)


def butterfly_search(warp: Warp, p: LocalArray, sums, stop, observer=None):
    """Find the smallest index whose straight running sum exceeds stop.

    Block-level bisection over the blocks' final rows, then the in-block
    cooperative walk, then a linear fallback over the remnant when the
    stop falls before the selected block.  Lanes with sums == 0 (discarded
    padding lanes) are tolerated with stop == 0 and return index 0.
    """
    W = warp.config.lanes
    K = p.length
    stop = np.asarray(stop)
    sums = np.asarray(sums)
    live = sums > 0
    if np.any((stop < 0) | (live & (stop >= sums)) | (~live & (stop > 0))):
        raise StopOutOfRangeError("stop values must lie in [0, sum)")

    search_base = (K % W) + (W - 1)
    n_blocks = K // W
    j = np.zeros(np.shape(stop), dtype=np.int64)
    k = np.full(np.shape(stop), n_blocks - 1, dtype=np.int64)
    while warp.any_lane(j < k):
        act = j < k
        mid = (j + k) >> 1
        vals = p.read(np.where(act, mid * W + search_base, 0), active=_lane_mask(act))
        less = stop < vals
        k = np.where(act & less, mid, k)
        j = np.where(act & ~less, mid + 1, j)

    block_base = (K % W) + j * W
    if K >= W:
        result = _butterfly_block_walk(warp, p, stop, block_base, observer)
    else:
        result = np.zeros_like(j)

    rem = K % W
    has_prev = block_base > 0
    prev_vals = p.read(np.maximum(block_base - 1, 0), active=_lane_mask(has_prev))
    need = has_prev & (stop < prev_vals) & live
    if np.any(need):
        pending = need.copy()
        for t in range(rem):
            vals = p.read(t, active=_lane_mask(pending))
            hit = pending & (stop < vals)
            result = np.where(hit, t, result)
            pending = pending & ~hit
    return result


# --- kernels ---


def _ragged_zeros(N):
    return [np.zeros(int(n), dtype=np.int64) for n in N]


def _gather_words(w, N, m, i):
    # Padding lanes (empty documents) participate with word id 0.
    return np.array(
        [int(w[mm][ii]) if N[mm] > 0 else 0 for mm, ii in zip(m.tolist(), i.tolist())],
        dtype=np.int64,
    )


def draw_z_basic(N, theta, phi, w, stops) -> list[np.ndarray]:
    """Sequential reference: per word, products -> running sums -> bisection."""
    theta = np.asarray(theta)
    phi = np.asarray(phi)
    dtype = theta.dtype
    z = _ragged_zeros(N)
    for m in range(len(N)):
        row = theta[m]
        n = int(N[m])
        if n == 0:
            continue
        positions = np.arange(n)
        units = stops.units(np.full(n, m), positions, positions)
        for i in range(n):
            prods = (row * phi[int(w[m][i])]).astype(dtype)
            prefix = np.cumsum(prods, dtype=dtype)
            total = prefix[-1]
            if not total > 0:
                raise AllZeroError(f"document {m}, word {i}: all products are zero")
            stop = float(_stops_from_units(total, units[i], dtype))
            z[m][i] = binary_search(PrefixTable(p=prefix, total=float(total)), stop)
    return z


def _run_warps(n_warps, worker, trace, threads):
    """Execute per-warp workers, merging their traces in warp order."""
    if threads <= 1 or n_warps <= 1:
        for q in range(n_warps):
            wtrace = Trace() if trace is not None else None
            worker(q, wtrace)
            if trace is not None:
                trace.merge(wtrace)
        return
    traces = [Trace() if trace is not None else None for _ in range(n_warps)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(lambda q: worker(q, traces[q]), range(n_warps)))
    if trace is not None:
        for wtrace in traces:
            trace.merge(wtrace)


def _check_live_sums(sums, n_lane, m):
    dead = (n_lane > 0) & ~(np.asarray(sums) > 0)
    if np.any(dead):
        doc = int(m[np.argwhere(dead)[0][0]])
        raise AllZeroError(f"document {doc}: all products are zero")


def draw_z_transposed(
    N,
    theta,
    phi,
    w,
    config: WarpConfig,
    stops,
    trace: Trace | None = None,
    threads: int = 1,
    step_hook=None,
) -> list[np.ndarray]:
    """Warp kernel with transposed theta/phi access and straight sums."""
    theta = np.asarray(theta)
    phi = np.asarray(phi)
    N = np.asarray(N, dtype=np.int64)
    W = config.lanes
    M, K = theta.shape
    if M % W:
        raise ValueError("document count must be a multiple of the lane count (pad upstream)")
    dtype = theta.dtype
    z = _ragged_zeros(N)

    def worker(q, wtrace):
        warp = Warp(config, wtrace)
        theta_g = GlobalArray2D(warp, theta, "theta")
        phi_g = GlobalArray2D(warp, phi, "phi")
        theta_local = LocalArray(warp, K, "theta_local", dtype=dtype)
        p = LocalArray(warp, K, "p", dtype=dtype)
        a = LocalArray(warp, W, "a", dtype=dtype)
        c_warp = LocalArray(warp, W, "c_warp", dtype=np.int64)
        lanes = warp.lane_ids
        m = q * W + lanes
        n_lane = N[m]
        warp.set_phase("cache_theta")
        cache_theta_transposed(warp, theta_g, theta_local, q)
        i_master = 0
        while warp.any_lane(i_master < n_lane):
            i = np.minimum(i_master, np.maximum(n_lane - 1, 0))
            words = _gather_words(w, N, m, i)
            warp.set_phase("table_build")
            sums = compute_partial_sums_transposed(
                warp, theta_local, phi_g, p, a, c_warp, words
            )
            _check_live_sums(sums, n_lane, m)
            units = stops.units(m, i, np.full(W, i_master))
            stop = _stops_from_units(sums, units, dtype)
            warp.set_phase("search")
            idx = _prefix_binary_search(warp, p, stop)
            for r in range(W):
                if n_lane[r] > 0:
                    z[m[r]][i[r]] = idx[r]
            if step_hook is not None:
                step_hook(q, i_master, i.copy(), idx.copy())
            i_master += 1

    _run_warps(M // W, worker, trace, threads)
    return z


def draw_z_butterfly(
    N,
    theta,
    phi,
    w,
    config: WarpConfig,
    stops,
    trace: Trace | None = None,
    threads: int = 1,
    step_hook=None,
) -> list[np.ndarray]:
    """Warp kernel drawing through butterfly-patterned partial sums."""
    theta = np.asarray(theta)
    phi = np.asarray(phi)
    N = np.asarray(N, dtype=np.int64)
    W = config.lanes
    M, K = theta.shape
    if M % W:
        raise ValueError("document count must be a multiple of the lane count (pad upstream)")
    dtype = theta.dtype
    z = _ragged_zeros(N)

    def worker(q, wtrace):
        warp = Warp(config, wtrace)
        theta_g = GlobalArray2D(warp, theta, "theta")
        phi_g = GlobalArray2D(warp, phi, "phi")
        theta_local = LocalArray(warp, K, "theta_local", dtype=dtype)
        p = LocalArray(warp, K, "p", dtype=dtype)
        lanes = warp.lane_ids
        m = q * W + lanes
        n_lane = N[m]
        warp.set_phase("cache_theta")
        cache_theta_transposed(warp, theta_g, theta_local, q)
        i_master = 0
        while warp.any_lane(i_master < n_lane):
            i = np.minimum(i_master, np.maximum(n_lane - 1, 0))
            words = _gather_words(w, N, m, i)
            warp.set_phase("table_build")
            sums = build_butterfly_table(warp, theta_local, phi_g, p, words)
            _check_live_sums(sums, n_lane, m)
            units = stops.units(m, i, np.full(W, i_master))
            stop = _stops_from_units(sums, units, dtype)
            warp.set_phase("search")
            idx = butterfly_search(warp, p, sums, stop)
            for r in range(W):
                if n_lane[r] > 0:
                    z[m[r]][i[r]] = idx[r]
            if step_hook is not None:
                step_hook(q, i_master, i.copy(), idx.copy())
            i_master += 1

    _run_warps(M // W, worker, trace, threads)
    return z


KERNELS = {
    "basic": draw_z_basic,
    "transposed": draw_z_transposed,
    "butterfly": draw_z_butterfly,
}


def draw_z(kernel: str, N, theta, phi, w, config: WarpConfig, stops, **kwargs):
    """Dispatch a kernel by name with a uniform signature."""
    if kernel not in KERNELS:
        raise ValueError(f"unknown kernel {kernel!r}; pick one of {sorted(KERNELS)}")
    if kernel == "basic":
        return draw_z_basic(N, theta, phi, w, stops)
    return KERNELS[kernel](N, theta, phi, w, config, stops, **kwargs)


# --- standalone table helpers (verification and bulk sampling) ---


def fill_theta_local_transposed(theta_local: LocalArray, products):
    """Host-side fill with cache_theta_transposed's postcondition.

    products has shape (*batch, W, K), document-major.  Used where the
    traced cache phase is not itself under test (bulk batched runs).
    """
    K = theta_local.length
    W = theta_local.data.shape[-1]
    prods = np.asarray(products)
    rem = K % W
    for j in range(rem):
        theta_local.data[j] = prods[..., :, j]
    j = rem
    while j < K:
        for k in range(W):
            theta_local.data[j + k] = prods[..., k, j : j + W]
        j += W


def build_block_tables(products, config: WarpConfig, trace: Trace | None = None):
    """Build butterfly tables straight from per-document product rows.

    products: (*batch, W, K).  Returns (warp, p, sums); with a batch axis
    present, tracing must stay off.
    """
    prods = np.asarray(products)
    if prods.shape[-2] != config.lanes:
        raise ValueError("products must carry one row per lane")
    *batch, _, K = prods.shape
    if batch and trace is not None:
        raise ValueError("batched builds cannot be traced")
    warp = Warp(config, trace)
    theta_local = LocalArray(warp, K, "theta_local", dtype=prods.dtype, batch_shape=batch)
    p = LocalArray(warp, K, "p", dtype=prods.dtype, batch_shape=batch)
    phi_g = GlobalArray2D(warp, np.ones((1, K), dtype=prods.dtype), "phi")
    fill_theta_local_transposed(theta_local, prods)
    words = np.zeros((*batch, config.lanes), dtype=np.int64)
    warp.set_phase("table_build")
    sums = build_butterfly_table(warp, theta_local, phi_g, p, words)
    return warp, p, sums


def table_snapshot(p: LocalArray, sums) -> ButterflyTable:
    return ButterflyTable(p=np.array(p.data, copy=True), sums=np.asarray(sums).copy(), lanes=p.data.shape[-1])
