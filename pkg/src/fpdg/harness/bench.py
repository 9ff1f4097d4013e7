"""Timing benchmark for the cell-average projection kernel.

The synthetic average vector samples cos^8(2 pi x) + 1e-13 on a uniform
grid over the unit square, with two strips forced to -0.25; the strip
width is calibrated so the negative fraction hits the requested target.
Each size is solved repeatedly to the standard tolerance and the mean wall
time per solve is reported; per-iteration work is O(N), so quadrupling the
size should roughly quadruple the time.
"""
import math
import time
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..positivity import LimiterProblem, dr_parameters, dr_solve

DEFAULT_SIZES = tuple(4**k for k in range(7, 12))  # 2^14 .. 2^22
NEGATIVE_VALUE = -0.25


def build_benchmark_vector(size: int, neg_frac: float = 0.05, tol: float = 0.005):
    """Synthetic averages on a sqrt(size)^2 grid with calibrated negatives.

    Returns (w, achieved_fraction).  Raises when no strip width can land
    within ``tol`` of the requested fraction on this grid.
    """
    nx = math.isqrt(size)
    if nx * nx != size:
        raise ConfigError(f"benchmark size must be a perfect square, got {size}")
    xs = np.arange(nx) / nx
    base = np.cos(2.0 * np.pi * xs) ** 8 + 1e-13
    # strips are symmetric about x = 0.25 and 0.75, which sit on grid nodes,
    # so each captures an odd column count c at width delta = 2 c dx
    target_cols = neg_frac * nx / 2.0
    best = None
    for c in (2 * round((target_cols - 1) / 2) + 1, 2 * round((target_cols + 1) / 2) - 1):
        if c < 1:
            continue
        frac = 2.0 * c / nx
        if best is None or abs(frac - neg_frac) < abs(best[1] - neg_frac):
            best = (c, frac)
    if best is None or abs(best[1] - neg_frac) > tol:
        raise ConfigError(
            f"cannot calibrate a {neg_frac:.3%} negative fraction on a {nx}x{nx} grid"
        )
    c, frac = best
    delta = 2.0 * c / nx
    neg = (np.abs(xs - 0.25) <= delta / 4.0) | (np.abs(xs - 0.75) <= delta / 4.0)
    col = np.where(neg, NEGATIVE_VALUE, base)
    achieved = float(np.count_nonzero(neg)) / nx
    w = np.tile(col, nx)
    return w, achieved


@dataclass
class BenchRow:
    size: int
    mean_time: float
    ratio: float | None
    neg_fraction: float
    iterations: int
    impl: str


def dr_benchmark(sizes=DEFAULT_SIZES, neg_frac: float = 0.05, reps: int = 100,
                 eps_tol: float = 1e-13, impl: str = "auto"):
    """Mean wall time of the projection solve per size, plus size ratios.

    Timing wraps the solve only (vector construction excluded).  The
    repetitions visit the sizes in interleaved rounds, after one untimed
    warmup round, so background load drifts into every size's mean equally
    rather than biasing whole per-size blocks.
    """
    sizes = list(sizes)
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ConfigError("sizes must be strictly increasing")
    problems = []
    for size in sizes:
        w, achieved = build_benchmark_vector(size, neg_frac)
        h_scale = 1.0 / math.isqrt(size)  # h^(d/2) with d = 2 on the unit square
        problem = LimiterProblem(w=w, m_bound=1e-13, b_cons=float(w.sum()),
                                 eps_tol=eps_tol, h_scale=h_scale)
        r_hat = int(np.count_nonzero(w < problem.m_bound))
        problems.append((size, achieved, problem, dr_parameters(r_hat, size)))
    elapsed = {size: 0.0 for size in sizes}
    iterations = {}
    for size, _, problem, (c, lam) in problems:  # warmup round
        iterations[size] = dr_solve(problem, c, lam, impl=impl).iterations
    for _ in range(reps):
        for size, _, problem, (c, lam) in problems:
            t0 = time.perf_counter()
            dr_solve(problem, c, lam, impl=impl)
            elapsed[size] += time.perf_counter() - t0
    rows = []
    prev_time = None
    for size, achieved, _, _ in problems:
        mean = elapsed[size] / reps
        rows.append(BenchRow(
            size=size, mean_time=mean,
            ratio=None if prev_time is None else mean / prev_time,
            neg_fraction=achieved, iterations=iterations[size], impl=impl,
        ))
        prev_time = mean
    return rows


def write_bench_csv(path, rows):
    with open(path, "w") as fh:
        fh.write("size,mean_time,ratio,neg_fraction,iterations,impl\n")
        for r in rows:
            ratio = "" if r.ratio is None else repr(r.ratio)
            fh.write(
                f"{r.size},{r.mean_time!r},{ratio},{r.neg_fraction!r},"
                f"{r.iterations},{r.impl}\n"
            )


def format_bench_table(rows) -> str:
    lines = [f"{'size':>9} {'mean time [s]':>14} {'ratio':>7} {'neg %':>6} {'iters':>6} impl"]
    for r in rows:
        ratio = f"{r.ratio:7.3f}" if r.ratio is not None else "      -"
        lines.append(
            f"{r.size:>9} {r.mean_time:14.6f} {ratio} {100 * r.neg_fraction:6.2f} "
            f"{r.iterations:>6} {r.impl}"
        )
    return "\n".join(lines)
