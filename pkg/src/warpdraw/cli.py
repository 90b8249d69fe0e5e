"""Command-line driver: verification suites, sampling, LDA runs, trace sweeps.

Exit codes: 0 success, 1 verification/assertion failure, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import bench, butterfly, kernels, lda, rng as _rng, sampling
from .warp import WarpConfig

DOUBLE_REL_TOL = 2.0**-40
SINGLE_REL_TOL = 2.0**-16


class ConfigError(Exception):
    """Bad flag combination or invalid runtime configuration."""


def _warp_config(args) -> WarpConfig:
    elem = 4 if args.precision == "single" else 8
    try:
        return WarpConfig(lanes=args.w, elem_size=elem)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _dtype(args):
    return np.float32 if args.precision == "single" else np.float64


def _rel_tol(args) -> float:
    return SINGLE_REL_TOL if args.precision == "single" else DOUBLE_REL_TOL


def _close(got, expected, rel_tol) -> np.ndarray:
    got = np.asarray(got, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    scale = np.maximum(np.abs(got), np.abs(expected))
    return np.abs(got - expected) <= rel_tol * np.maximum(scale, 1e-300)


# --- verify ---


def _verify_closure(args, n_cases=20):
    """Every interior table entry equals the closed-form span sum, per block."""
    config = _warp_config(args)
    dtype = _dtype(args)
    W, K = args.w, args.k
    gen = np.random.default_rng(_rng.derive_seed(args.seed, 11))
    rel = _rel_tol(args)
    products = gen.uniform(0.0, 1.0, size=(n_cases, W, K)).astype(dtype)
    _, p, _ = kernels.build_block_tables(products, config)
    worst = 0.0
    checked = 0
    for start in range(K % W, K, W):
        block = products[:, :, start : start + W].astype(np.float64)
        for i in range(W - 1):
            for j in range(W):
                doc, lo, hi = butterfly.entry_span(i, j, W)
                expected = block[:, doc, lo : hi + 1].sum(axis=-1)
                got = p.data[start + i, :, j].astype(np.float64)
                scale = np.maximum(np.maximum(np.abs(got), np.abs(expected)), 1e-300)
                deviation = np.abs(got - expected) / scale
                if np.any(deviation > rel):
                    case = int(np.argmax(deviation))
                    return False, (
                        f"entry ({start + i},{j}) = {got[case]}, expected {expected[case]}"
                    )
                worst = max(worst, float(deviation.max()))
                checked += n_cases
    if checked == 0:
        return True, "no blocks at this shape; remnant covered by the bottom-row check"
    return True, f"{checked} entries, max relative deviation {worst:.3e}"


def _verify_schedule(args):
    """Symbolic replay of the replacement sets lands on the closed form."""
    W = args.w
    grid = butterfly.singleton_grid(W)
    try:
        snapshots = butterfly.apply_replacement_sets(grid, butterfly.replacement_schedule(W))
    except ValueError as exc:
        return False, f"replay produced a malformed span: {exc}"
    final = snapshots[-1]
    expected = butterfly.final_symbolic(W)
    if final != expected:
        return False, "final symbolic table deviates from the closed form"
    return True, f"{len(snapshots)} replacement sets verified"


def _verify_bottom_rows(args, n_cases=20):
    """Remnant rows are bit-exact running sums; block-final rows match within tolerance."""
    config = _warp_config(args)
    dtype = _dtype(args)
    W, K = args.w, args.k
    gen = np.random.default_rng(_rng.derive_seed(args.seed, 12))
    rel = _rel_tol(args)
    for _ in range(n_cases):
        products = gen.uniform(0.0, 1.0, size=(W, K)).astype(dtype)
        _, p, sums = kernels.build_block_tables(products[np.newaxis], config)
        table = p.data[:, 0, :]
        straight = np.cumsum(products, axis=1, dtype=dtype)
        rem = K % W
        if rem and not np.array_equal(table[:rem], straight[:, :rem].T):
            return False, "remnant rows are not bit-exact running sums"
        for end in range(rem + W - 1, K, W):
            if not np.all(_close(table[end], straight[:, end], rel)):
                return False, f"block-final row {end} deviates beyond tolerance"
        if not np.all(_close(sums[0], straight[:, -1], rel)):
            return False, "lane totals deviate from the full running sums"
    return True, "remnant exact, block-final rows within tolerance"


def _verify_search(args, n_cases=2000):
    """Butterfly search agrees with the extended-precision oracle."""
    config = _warp_config(args)
    dtype = _dtype(args)
    W, K = args.w, args.k
    gen = np.random.default_rng(_rng.derive_seed(args.seed, 13))
    rows = -(-n_cases // W)
    products = gen.uniform(0.0, 1.0, size=(rows, W, K)).astype(dtype)
    warp, p, sums = kernels.build_block_tables(products, config)
    units = gen.random(size=(rows, W))
    stops = kernels._stops_from_units(sums, units, dtype)
    got = np.asarray(kernels.butterfly_search(warp, p, sums, stops))
    expected = sampling.oracle_index_batch(products, stops)
    agree = got == expected
    if np.all(agree):
        return True, f"{agree.size} searches, full agreement"
    # Disagreements are only tolerable at representation-boundary ties.
    straight = np.cumsum(products, axis=-1, dtype=dtype)
    gap = np.min(np.abs(straight - stops[..., None]), axis=-1)
    ulp = 4 * np.spacing(straight[..., -1])
    ties = gap <= ulp
    bad = ~agree & ~ties
    rate = float(np.mean(agree))
    if np.any(bad):
        return False, f"non-tie disagreements: {int(bad.sum())} of {agree.size}"
    if rate < 0.999:
        return False, f"agreement rate {rate:.5f} below 0.999"
    return True, f"agreement rate {rate:.5f}, all disagreements are boundary ties"


VERIFY_CHECKS = [
    ("closure-formula", _verify_closure),
    ("schedule", _verify_schedule),
    ("bottom-row", _verify_bottom_rows),
    ("search-equivalence", _verify_search),
]


def cmd_verify(args) -> int:
    _warp_config(args)
    if args.k < 1:
        raise ConfigError("--k must be at least 1")
    rem, blocks = args.k % args.w, args.k // args.w
    print(f"table shape: W={args.w} K={args.k} -> remnant {rem} + {blocks} block(s) of {args.w}")
    results = []
    failed = False
    for name, check in VERIFY_CHECKS:
        ok, detail = check(args)
        results.append((name, ok, detail))
        failed |= not ok
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["check", "status", "detail"])
            for name, ok, detail in results:
                writer.writerow([name, "pass" if ok else "fail", detail])
    return 1 if failed else 0


# --- sample ---


def cmd_sample(args) -> int:
    weights = sampling.load_weights(args.weights)
    if args.n < 0:
        raise ConfigError("--n must be non-negative")
    draws = bench.SAMPLERS[args.method](weights, args.n, args.seed)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            for d in draws:
                fh.write(f"{int(d)}\n")
    if args.n == 0:
        return 0
    counts = np.bincount(draws, minlength=len(weights))
    probs = weights / weights.sum()
    print("index count expected")
    for k, (c, q) in enumerate(zip(counts, probs)):
        print(f"{k} {int(c)} {q * args.n:.2f}")
    keep = probs > 0
    stat, dof = bench.chi_square(counts[keep], probs[keep])
    critical = bench.chi_square_critical(dof)
    verdict = "ok" if stat < critical else "SUSPECT"
    print(f"chi-square: stat={stat:.4f} dof={dof} critical(0.001)={critical:.4f} {verdict}")
    return 0


# --- lda ---


def _load_injected_iterations(path, lengths, iterations):
    flat = np.loadtxt(path, dtype=np.float64, ndmin=1)
    per_iter = int(np.sum(lengths))
    if flat.size != per_iter * iterations:
        raise ConfigError(
            f"stop file holds {flat.size} values; need {per_iter} x {iterations} iterations"
        )
    if np.any(flat < 0) or np.any(flat >= 1):
        raise ConfigError("injected values must lie in [0, 1)")
    out = []
    pos = 0
    for _ in range(iterations):
        ragged = []
        for n in lengths:
            ragged.append(flat[pos : pos + int(n)])
            pos += int(n)
        out.append(ragged)
    return out


def _write_matrix_csv(matrix, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for row in np.asarray(matrix):
            writer.writerow([repr(float(x)) for x in row])


def cmd_lda(args) -> int:
    if args.topics < 1 or args.iters < 1:
        raise ConfigError("--topics and --iters must be at least 1")
    corpus = lda.load_corpus(args.corpus)
    config = _warp_config(args)
    injected = None
    if args.stop_inject:
        injected = _load_injected_iterations(args.stop_inject, corpus.lengths, args.iters)
    params, z, trajectory = lda.run_gibbs(
        corpus,
        args.topics,
        args.iters,
        args.kernel,
        config,
        args.seed,
        injected_units=injected,
        threads=args.threads,
        dtype=_dtype(args),
    )
    outdir = args.out or "."
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "z.csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["doc", "pos", "topic"])
        for m in range(corpus.n_docs):
            for i in range(int(corpus.lengths[m])):
                writer.writerow([m, i, int(z[m][i])])
    with open(os.path.join(outdir, "likelihood.csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "log_likelihood"])
        for t, ll in enumerate(trajectory):
            writer.writerow([t, repr(float(ll))])
    _write_matrix_csv(params.theta[: corpus.n_docs], os.path.join(outdir, "theta.csv"))
    _write_matrix_csv(params.phi, os.path.join(outdir, "phi.csv"))
    print(f"{args.iters} iterations, final log-likelihood {trajectory[-1]:.6f}")
    return 0


# --- trace ---


def cmd_trace(args) -> int:
    corpus = lda.load_corpus(args.corpus)
    config = _warp_config(args)
    k_values = [int(x) for x in args.k.split(",")] if args.k else list(bench.DEFAULT_K_SWEEP)
    if any(k < 1 for k in k_values):
        raise ConfigError("topic counts must be positive")
    kernel_names = [args.kernel] if args.kernel else ["basic", "transposed", "butterfly"]
    rows = bench.run_sweep(
        corpus, k_values, kernel_names, args.seed, config, dtype=_dtype(args), threads=args.threads
    )
    out = args.out or "sweep.csv"
    bench.write_sweep_csv(rows, out)
    print(f"wrote {len(rows)} rows to {out}")
    return 0


# --- parser ---


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="warpdraw",
        description="Butterfly-patterned partial sums for discrete sampling on an emulated warp",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, lanes_default=32):
        p.add_argument("--w", type=int, default=lanes_default, help="warp lane count (power of 2)")
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--precision", choices=["single", "double"], default="double")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--out", default=None)

    p_verify = sub.add_parser("verify", help="run the construction/search verification suites")
    common(p_verify)
    p_verify.add_argument("--k", type=int, default=19, help="topic count")
    p_verify.set_defaults(func=cmd_verify)

    p_sample = sub.add_parser("sample", help="draw from a weights file and report frequencies")
    common(p_sample, lanes_default=8)
    p_sample.add_argument("--weights", required=True)
    p_sample.add_argument("--n", type=int, default=10000)
    p_sample.add_argument("--method", choices=sorted(bench.SAMPLERS), default="binary")
    p_sample.set_defaults(func=cmd_sample)

    p_lda = sub.add_parser("lda", help="run the Gibbs sampler on a corpus")
    common(p_lda)
    p_lda.add_argument("--corpus", required=True)
    p_lda.add_argument("--topics", type=int, required=True)
    p_lda.add_argument("--iters", type=int, default=100)
    p_lda.add_argument("--kernel", choices=sorted(kernels.KERNELS), default="butterfly")
    p_lda.add_argument("--stop-inject", dest="stop_inject", default=None)
    p_lda.set_defaults(func=cmd_lda)

    p_trace = sub.add_parser("trace", help="run the transaction-count sweep")
    common(p_trace)
    p_trace.add_argument("--corpus", required=True)
    p_trace.add_argument("--k", default=None, help="comma-separated topic counts")
    p_trace.add_argument("--kernel", choices=sorted(kernels.KERNELS), default=None)
    p_trace.set_defaults(func=cmd_trace)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (
        sampling.AllZeroError,
        sampling.EmptyWeightsError,
        lda.CorpusParseError,
        lda.WordIdOutOfRangeError,
        FileNotFoundError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
