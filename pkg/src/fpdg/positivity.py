"""Two-stage positivity postprocessing for broken-polynomial fields.

Stage 1 repairs out-of-bound cell averages by the constrained L2
projection: minimize |x - w|^2 subject to sum(x) = sum(w) and m <= x <= M,
solved by relaxed Douglas-Rachford splitting with nearly optimal
parameters.  Stage 2 is the scaling limiter: each cell polynomial is
contracted toward its (now admissible) average until every tensor
quadrature value clears the bound.

A brute-force active-set oracle for the stage-1 problem is included for
testing; it is deliberately independent of the iterative path.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConvergenceError, InfeasibleError
from .fields import DGField, quadrature_table

DEFAULT_LOWER_BOUND = 1e-13
DEFAULT_TOLERANCE = 1e-13
DETECTION_KEEP_THRESHOLD = 1e-8
MAX_DR_ITERATIONS = 10**6

# fraction by which the stage-2 scaling is tightened so the post-limit
# minimum clears the bound despite rounding in theta itself
_THETA_MARGIN = 1e-12


@dataclass
class LimiterProblem:
    """Cell-average projection data, possibly restricted to an active set.

    ``w`` is the working average vector (full length or |K| after
    restriction), ``b_cons`` the conserved sum over those entries, and
    ``h_scale`` the factor h^(d/2) turning plain 2-norms into the discrete
    L2 norm used by the stopping test.
    """

    w: np.ndarray
    m_bound: float = DEFAULT_LOWER_BOUND
    M_bound: float = math.inf
    b_cons: float | None = None
    eps_tol: float = DEFAULT_TOLERANCE
    h_scale: float = 1.0
    active: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.w = np.ascontiguousarray(self.w, dtype=float)
        if self.eps_tol <= 0.0:
            raise ValueError("eps_tol must be positive")
        if self.b_cons is None:
            self.b_cons = float(self.w.sum())
        n = self.w.size
        slack = 1e-12 * (1.0 + abs(self.b_cons))
        if self.b_cons < n * self.m_bound - slack:
            raise InfeasibleError(
                f"conserved sum {self.b_cons} below {n} * m = {n * self.m_bound}"
            )
        if np.isfinite(self.M_bound) and self.b_cons > n * self.M_bound + slack:
            raise InfeasibleError(
                f"conserved sum {self.b_cons} above {n} * M = {n * self.M_bound}"
            )

    @property
    def size(self) -> int:
        return self.w.size


@dataclass
class DRResult:
    """Converged iterate plus the recorded residual history.

    ``residuals`` holds ||y_{k+1} - y_k|| in the h-scaled discrete norm,
    one entry per iteration performed.
    """

    x: np.ndarray
    iterations: int
    residuals: np.ndarray


def detect_bad_cells(w, m_bound=DEFAULT_LOWER_BOUND, M_bound=math.inf):
    """Active set K = {i : w_i out of [m, M] or w_i >= 1e-8} and bad count.

    Cells that are tiny but admissible stay frozen; returns (K, r_hat)
    where r_hat counts genuine bound violations.
    """
    w = np.asarray(w, dtype=float)
    bad = (w < m_bound) | (w > M_bound)
    keep = bad | (w >= DETECTION_KEEP_THRESHOLD)
    return np.flatnonzero(keep), int(np.count_nonzero(bad))


def dr_parameters(r_hat: int, n: int):
    """Nearly optimal (c, lambda) from the bad-cell fraction.

    theta = arccos(sqrt(r_hat/n)) selects among three branches covering
    (3pi/8, pi/2], (pi/4, 3pi/8], and (0, pi/4].  The endpoint theta = 0
    (every cell bad) is degenerate: its limit c = 1 corresponds to a zero
    proximal step size, which erases the data term from the iteration and
    either stalls on arbitrary feasible points (n >= 2) or oscillates
    undamped (n = 1, lambda = 2).  Since the trouble-cell detection always
    keeps admissible cells in the active set, the endpoint only arises in
    synthetic problems; the parameters are evaluated at the nearest
    non-degenerate fraction (n-1)/n instead.
    """
    if n < 1 or not 0 <= r_hat <= n:
        raise ValueError(f"need 0 <= r_hat <= n with n >= 1, got r_hat={r_hat}, n={n}")
    if r_hat == n:
        r_hat = n - 1
    theta = math.acos(math.sqrt(r_hat / n))
    if theta > 3.0 * math.pi / 8.0:
        return 0.5, 4.0 / (2.0 - math.cos(2.0 * theta))
    c = 1.0 / (math.cos(theta) + math.sin(theta)) ** 2
    if theta > math.pi / 4.0:
        cot = math.cos(theta) / math.sin(theta)
        return c, 2.0 / (1.0 + 1.0 / (1.0 + cot) - c)
    return c, 2.0


def dr_solve(problem: LimiterProblem, c: float, lam: float,
             max_iter: int = MAX_DR_ITERATIONS, impl: str = "auto") -> DRResult:
    """Relaxed Douglas-Rachford iteration for the cell-average projection.

    Starts from y = w, x = clip(w); stops when the h-scaled step norm
    drops below eps_tol.  The returned x satisfies the box bounds exactly;
    the conserved sum is met to an eps_tol-commensurate accuracy.
    """
    if not (0.0 < c <= 1.0) or not (0.0 < lam <= 2.0):
        raise ValueError(f"parameters out of range: c={c}, lam={lam}")
    kern = _kernels.get_impl(impl)
    y = problem.w.copy()
    x = np.clip(problem.w, problem.m_bound, problem.M_bound)
    resid = np.empty(max_iter)
    stop = problem.eps_tol / problem.h_scale
    # The textbook update hard-wires b = sum(w), the only case arising in
    # the scheme.  For a general conserved target the data-term proximal
    # map carries an extra (1-c) sum(w) contribution, equivalent to running
    # the same iteration against an effective target.
    b = problem.b_cons
    sum_w = float(problem.w.sum())
    if b != sum_w:
        b = (b - (1.0 - c) * sum_w) / c
    k = kern.dr_iterate(
        y, x, problem.w, problem.m_bound, problem.M_bound,
        b, c, lam, stop, max_iter, resid,
    )
    history = resid[:k] * problem.h_scale
    if k == max_iter and history[-1] >= problem.eps_tol:
        raise ConvergenceError(
            f"no convergence in {max_iter} iterations; last residuals "
            f"{history[-5:]} (infeasible problem or pathological parameters?)"
        )
    return DRResult(x=x, iterations=k, residuals=history)


def _enumerate_states(n_active: int, finite_upper: bool, chunk: int):
    """Yield (chunk_size, state matrix) over all per-entry status tuples.

    Status 0 = free, 1 = at the lower bound, 2 = at the upper bound.
    """
    base = 3 if finite_upper else 2
    total = base**n_active
    digits = base ** np.arange(n_active)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        yield (idx[:, None] // digits[None, :]) % base


def qp_oracle(problem: LimiterProblem, kkt_tol: float = 1e-10) -> np.ndarray:
    """Exact stage-1 minimizer by enumeration of active sets.

    Each entry is free, pinned at m, or pinned at M; the free block of a
    KKT-feasible candidate carries a common shift fixing the conserved sum.
    Enumeration cost is 3^n (2^n for M = +inf), so n is capped at 20.
    """
    n = problem.size
    if n > 20:
        raise ValueError(f"oracle enumeration capped at 20 entries, got {n}")
    w, m, M, b = problem.w, problem.m_bound, problem.M_bound, problem.b_cons
    finite_upper = np.isfinite(M)
    scale = 1.0 + np.abs(w).max() + abs(b)
    best_obj = math.inf
    best_x = None
    for states in _enumerate_states(n, finite_upper, chunk=1 << 18):
        free = states == 0
        at_m = states == 1
        at_M = states == 2
        n_free = free.sum(axis=1)
        fixed_sum = at_m.sum(axis=1) * m + (at_M.sum(axis=1) * M if finite_upper else 0.0)
        free_w_sum = (w[None, :] * free).sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            shift = (b - fixed_sum - free_w_sum) / n_free
        # all-pinned candidates are feasible only if the sums match exactly
        degenerate = n_free == 0
        shift = np.where(degenerate, 0.0, shift)
        x = np.where(free, w[None, :] + shift[:, None], 0.0)
        x = np.where(at_m, m, x)
        if finite_upper:
            x = np.where(at_M, M, x)
        ok = ~degenerate | (np.abs(fixed_sum - b) <= kkt_tol * scale)
        # primal feasibility of the free block
        ok &= ~(free & (x < m - kkt_tol * scale)).any(axis=1)
        if finite_upper:
            ok &= ~(free & (x > M + kkt_tol * scale)).any(axis=1)
        # dual feasibility: multiplier mu = 2*shift on the free block
        mu = 2.0 * shift
        lam_m = 2.0 * (m - w[None, :]) - mu[:, None]
        ok &= ~(at_m & (lam_m < -kkt_tol * scale)).any(axis=1)
        if finite_upper:
            nu = mu[:, None] - 2.0 * (M - w[None, :])
            ok &= ~(at_M & (nu < -kkt_tol * scale)).any(axis=1)
        if not ok.any():
            continue
        obj = np.where(ok, ((x - w[None, :]) ** 2).sum(axis=1), math.inf)
        j = int(np.argmin(obj))
        if obj[j] < best_obj:
            best_obj = obj[j]
            best_x = x[j].copy()
    if best_x is None:
        raise InfeasibleError("active-set enumeration found no KKT point")
    return best_x


@dataclass
class LimiterReport:
    """Per-invocation stage-1 record, filled when requested."""

    triggered: bool = False
    active_size: int = 0
    r_hat: int = 0
    iterations: int = 0
    residuals: np.ndarray | None = None


def _restore_conserved_sum(x, m_bound, M_bound, target):
    """Spread the leftover conservation gap over entries with slack.

    The gap after the iterative solve is eps_tol-sized; distributing it
    over well-inside entries keeps the box bounds intact and makes the
    summed averages match the pre-limit sum to rounding accuracy.
    """
    gap = target - x.sum()
    if gap == 0.0:
        return
    if gap > 0.0:
        room = M_bound - x if np.isfinite(M_bound) else np.full_like(x, math.inf)
    else:
        room = x - m_bound
    eligible = room > 2.0 * abs(gap)
    count = int(np.count_nonzero(eligible))
    if count == 0:
        return
    x[eligible] += gap / count


def limit_cell_averages(f: DGField, m_bound=DEFAULT_LOWER_BOUND, M_bound=math.inf,
                        eps_tol=DEFAULT_TOLERANCE, detect: bool = True,
                        report: LimiterReport | None = None) -> DGField:
    """Stage 1: project cell averages onto the admissible set.

    Returns the field unchanged when every average is already in bounds.
    Otherwise only the constant modes of cells in the active set are
    overwritten; higher modes and the global mass are untouched.
    """
    w = f.coeffs[:, 0]
    if not ((w < m_bound).any() or (w > M_bound).any()):
        return f
    if detect:
        active, r_hat = detect_bad_cells(w, m_bound, M_bound)
    else:
        active = np.arange(w.size)
        r_hat = int(np.count_nonzero((w < m_bound) | (w > M_bound)))
    w_active = w[active]
    target = float(w_active.sum())
    n = active.size
    if target < n * m_bound - 1e-12 * (1.0 + abs(target)):
        raise InfeasibleError(
            "total mass insufficient for positivity on active set: "
            f"sum={target} < {n} * m_bound={n * m_bound}"
        )
    problem = LimiterProblem(
        w=w_active, m_bound=m_bound, M_bound=M_bound, b_cons=target,
        eps_tol=eps_tol, h_scale=f.mesh.h, active=active,
    )
    c, lam = dr_parameters(r_hat, n)
    result = dr_solve(problem, c, lam)
    x = result.x
    _restore_conserved_sum(x, m_bound, M_bound, target)
    out = f.coeffs.copy()
    out[active, 0] = x
    if report is not None:
        report.triggered = True
        report.active_size = n
        report.r_hat = r_hat
        report.iterations = result.iterations
        report.residuals = result.residuals
    return DGField(f.mesh, f.basis, out)


def zhang_shu_limit(f: DGField, eps_zs=DEFAULT_LOWER_BOUND, q: int | None = None) -> DGField:
    """Stage 2: contract each cell polynomial toward its average.

    Requires every cell average to be at least eps_zs (stage 1 guarantees
    this).  Cells whose minimum over the tensor quadrature set already
    clears eps_zs are untouched; limited cells keep their average exactly.
    """
    avg = f.coeffs[:, 0]
    if (avg < eps_zs).any():
        worst = float(avg.min())
        raise ValueError(
            f"cell average {worst} below eps_zs={eps_zs}; run the cell-average "
            "limiter first"
        )
    vals = f.values_at_quadrature(q)
    minv = vals.min(axis=1)
    need = minv < eps_zs
    if not need.any():
        return f
    theta = (avg[need] - eps_zs) / (avg[need] - minv[need])
    theta = np.minimum(1.0, theta) * (1.0 - _THETA_MARGIN)
    out = f.coeffs.copy()
    out[need, 1:] *= theta[:, None]
    return DGField(f.mesh, f.basis, out)
