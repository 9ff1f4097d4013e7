import math

import numpy as np
import pytest

from fpdg.basis import legendre_basis
from fpdg.errors import ConvergenceError, InfeasibleError
from fpdg.fields import DGField
from fpdg.mesh import build_mesh
from fpdg.positivity import (
    LimiterProblem,
    LimiterReport,
    detect_bad_cells,
    dr_parameters,
    dr_solve,
    limit_cell_averages,
    qp_oracle,
    zhang_shu_limit,
)


def make_field(averages, slopes=None, k=1, domain=2.0):
    averages = np.asarray(averages, dtype=float)
    n = averages.size
    mesh = build_mesh((0, 0), (domain * n, domain), n, 1)
    basis = legendre_basis(k)
    coeffs = np.zeros((n, basis.n_b))
    coeffs[:, 0] = averages
    if slopes is not None:
        coeffs[:, 1] = slopes
    return DGField(mesh, basis, coeffs)


# ---------------------------------------------------------------- detection

def test_detection_keeps_large_and_bad_cells_only():
    k, r_hat = detect_bad_cells(np.array([0.5, -0.1, 3e-9]), 0.0)
    assert list(k) == [0, 1]
    assert r_hat == 1


def test_detection_all_admissible():
    w = np.array([0.2, 1.0, 0.7])
    k, r_hat = detect_bad_cells(w, 0.0)
    assert list(k) == [0, 1, 2]
    assert r_hat == 0


def test_detection_single_negative():
    k, r_hat = detect_bad_cells(np.array([-1.0]), 0.0)
    assert list(k) == [0]
    assert r_hat == 1


# ---------------------------------------------------------------- parameters

def test_parameters_no_bad_cells():
    c, lam = dr_parameters(0, 8)
    assert c == pytest.approx(0.5)
    assert lam == pytest.approx(4.0 / 3.0)


def test_parameters_all_bad_cells_guarded():
    # the raw theta = 0 limit (c = 1) drops the data term from the
    # iteration; the guarded parameters use the (n-1)/n angle instead
    c, lam = dr_parameters(8, 8)
    c_ref, lam_ref = dr_parameters(7, 8)
    assert (c, lam) == (c_ref, lam_ref)
    assert c < 1.0
    assert lam == pytest.approx(2.0)
    # a single all-bad cell borrows the r_hat = 0 parameters
    assert dr_parameters(1, 1) == pytest.approx((0.5, 4.0 / 3.0))


def test_dr_all_cells_bad_still_finds_minimizer():
    w = np.array([-1.0, 3.0])
    p = LimiterProblem(w=w, m_bound=0.0, M_bound=1.5, b_cons=2.0)
    res = dr_solve(p, *dr_parameters(2, 2))
    assert res.x == pytest.approx(qp_oracle(p), abs=1e-9)


def test_parameters_half_bad():
    c, lam = dr_parameters(4, 8)
    assert c == pytest.approx(0.5)
    assert lam == pytest.approx(2.0)


def test_parameters_middle_branch():
    # r/n = 0.05 -> theta ~ 1.345 rad sits in the first branch
    c, lam = dr_parameters(5, 100)
    theta = math.acos(math.sqrt(0.05))
    assert theta > 3 * math.pi / 8
    assert c == pytest.approx(0.5)
    assert lam == pytest.approx(4.0 / (2.0 - math.cos(2 * theta)))
    # r/n = 0.5 - eps lands in the middle branch
    c2, lam2 = dr_parameters(4, 10)
    th2 = math.acos(math.sqrt(0.4))
    assert math.pi / 4 < th2 <= 3 * math.pi / 8
    assert c2 == pytest.approx(1.0 / (math.cos(th2) + math.sin(th2)) ** 2)


def test_parameters_validation():
    with pytest.raises(ValueError):
        dr_parameters(5, 4)
    with pytest.raises(ValueError):
        dr_parameters(0, 0)


# ---------------------------------------------------------------- dr_solve

def test_dr_two_cell_example():
    p = LimiterProblem(w=np.array([-0.1, 0.5]), m_bound=0.0, b_cons=0.4)
    res = dr_solve(p, *dr_parameters(1, 2))
    assert res.x == pytest.approx([0.0, 0.4], abs=1e-10)


def test_dr_three_cell_example():
    p = LimiterProblem(w=np.array([-0.2, 0.3, 0.5]), m_bound=0.0, b_cons=0.6)
    res = dr_solve(p, *dr_parameters(1, 3))
    assert res.x == pytest.approx([0.0, 0.2, 0.4], abs=1e-10)


def test_dr_feasible_input_converges_immediately():
    w = np.array([0.2, 0.3, 0.1])
    p = LimiterProblem(w=w, m_bound=0.0, b_cons=float(w.sum()))
    res = dr_solve(p, *dr_parameters(0, 3))
    assert res.iterations == 1
    assert res.x == pytest.approx(w, abs=1e-15)


def test_dr_residuals_asymptotically_linear(rng):
    w = rng.uniform(-1.0, 2.0, size=400)
    p = LimiterProblem(w=w, m_bound=0.0, M_bound=math.inf,
                       b_cons=float(abs(w.sum())) + 1.0, eps_tol=1e-13)
    r_hat = int((w < 0).sum())
    res = dr_solve(p, *dr_parameters(r_hat, w.size))
    hist = res.residuals
    assert hist[-1] < 1e-13
    tail = np.log(hist[len(hist) // 2:])
    ks = np.arange(tail.size)
    slope, _ = np.polyfit(ks, tail, 1)
    assert math.exp(slope) < 1.0  # contraction


def test_dr_box_bounds_exact(rng):
    w = rng.uniform(-1.0, 2.0, size=64)
    p = LimiterProblem(w=w, m_bound=0.0, M_bound=1.5,
                       b_cons=float(np.clip(w, 0, 1.5).mean() * 64))
    r_hat = int(((w < 0) | (w > 1.5)).sum())
    res = dr_solve(p, *dr_parameters(r_hat, 64))
    assert res.x.min() >= 0.0
    assert res.x.max() <= 1.5
    assert abs(res.x.sum() - p.b_cons) < 1e-9


def test_dr_iteration_cap_raises():
    p = LimiterProblem(w=np.array([-1.0, 3.0]), m_bound=0.0, b_cons=2.0,
                       eps_tol=1e-13)
    with pytest.raises(ConvergenceError):
        dr_solve(p, 1e-6, 1e-6, max_iter=4)


def test_dr_parameter_range_validation():
    p = LimiterProblem(w=np.array([0.5, 0.5]), m_bound=0.0, b_cons=1.0)
    with pytest.raises(ValueError):
        dr_solve(p, 1.5, 1.0)
    with pytest.raises(ValueError):
        dr_solve(p, 0.5, 2.5)


# ---------------------------------------------------------------- qp oracle

def test_oracle_matches_dr_examples():
    for w, b, expected in [
        ([-0.1, 0.5], 0.4, [0.0, 0.4]),
        ([-0.2, 0.3, 0.5], 0.6, [0.0, 0.2, 0.4]),
    ]:
        p = LimiterProblem(w=np.array(w), m_bound=0.0, b_cons=b)
        assert qp_oracle(p) == pytest.approx(expected, abs=1e-12)


def test_oracle_single_cell_pinned_by_conservation():
    p = LimiterProblem(w=np.array([-1.0]), m_bound=0.0, M_bound=1.0, b_cons=0.3)
    assert qp_oracle(p) == pytest.approx([0.3], abs=1e-14)


def test_oracle_infeasible_detection():
    with pytest.raises(InfeasibleError):
        LimiterProblem(w=np.array([-1.0, -2.0]), m_bound=0.0, b_cons=-3.0)


def test_oracle_vs_dr_random_problems(rng):
    # smaller version of the acceptance sweep
    for _ in range(100):
        n = int(rng.integers(1, 13))
        w = rng.uniform(-1.0, 2.0, size=n)
        upper = math.inf if rng.random() < 0.5 else 1.5
        lo, hi = 0.0, n * (1.5 if np.isfinite(upper) else 10.0)
        b = float(np.clip(w.sum(), lo + 1e-3, hi - 1e-3))
        p = LimiterProblem(w=w, m_bound=0.0, M_bound=upper, b_cons=b)
        r_hat = int(((w < 0) | (w > upper)).sum())
        res = dr_solve(p, *dr_parameters(r_hat, n))
        x_ref = qp_oracle(p)
        assert np.abs(res.x - x_ref).max() <= 1e-9


def test_oracle_size_cap():
    p = LimiterProblem(w=np.zeros(21) + 0.5, m_bound=0.0, b_cons=10.5)
    with pytest.raises(ValueError):
        qp_oracle(p)


# ------------------------------------------------------- cell-average limiter

def test_limiter_identity_on_admissible_field():
    f = make_field([0.3, 0.4, 0.5])
    out = limit_cell_averages(f, m_bound=1e-13)
    assert out is f  # bitwise-identical, same object


def test_limiter_two_cell_field():
    f = make_field([-0.1, 0.5], slopes=[0.02, -0.07])
    report = LimiterReport()
    out = limit_cell_averages(f, m_bound=0.0, report=report)
    assert out.coeffs[:, 0] == pytest.approx([0.0, 0.4], abs=1e-10)
    assert out.coeffs[:, 1] == pytest.approx([0.02, -0.07], abs=0)
    assert report.triggered
    assert report.r_hat == 1


def test_limiter_conservation():
    rng = np.random.default_rng(7)
    w = rng.uniform(-0.05, 1.0, size=256)
    f = make_field(w)
    out = limit_cell_averages(f, m_bound=1e-13)
    before = f.coeffs[:, 0].sum()
    after = out.coeffs[:, 0].sum()
    assert abs(after - before) <= 10 * 1e-13 / f.mesh.h


def test_limiter_mass_restoration_is_exact():
    rng = np.random.default_rng(11)
    w = rng.uniform(-0.05, 1.0, size=512)
    f = make_field(w)
    out = limit_cell_averages(f, m_bound=1e-13)
    assert out.global_mass() == pytest.approx(f.global_mass(), rel=1e-14)


def test_limiter_distance_non_increase_and_variational_inequality(rng):
    w = rng.uniform(-0.2, 1.0, size=40)
    f = make_field(w)
    out = limit_cell_averages(f, m_bound=0.0, detect=False)
    x = out.coeffs[:, 0]
    b = w.sum()
    for _ in range(100):
        # random feasible y: start from x*, move along a zero-sum direction
        d = rng.standard_normal(40)
        d -= d.mean()
        room = np.where(d < 0, (x - 0.0) / np.maximum(-d, 1e-300), math.inf)
        smax = 0.9 * min(1.0, float(room.min()))
        y = x + smax * rng.random() * d
        assert y.min() >= -1e-12
        assert abs(y.sum() - b) < 1e-9
        assert np.linalg.norm(x - y) <= np.linalg.norm(w - y) + 1e-9
        assert (x - w) @ (y - x) >= -1e-9


def test_limiter_infeasible_active_set():
    f = make_field([-1.0, -2.0, 1e-10])
    with pytest.raises(InfeasibleError):
        limit_cell_averages(f, m_bound=1e-13)


def test_limiter_idempotent(rng):
    w = rng.uniform(-0.1, 1.0, size=64)
    f = make_field(w)
    out = limit_cell_averages(f, m_bound=1e-13)
    again = limit_cell_averages(out, m_bound=1e-13)
    assert again is out


# ------------------------------------------------------------ scaling limiter

def test_zhang_shu_half_scaling():
    # average 0.5, quadrature minimum -0.5 -> theta = 1/2, new minimum 0
    f = make_field([0.5], slopes=[1.0])
    vals = f.values_at_quadrature()
    assert vals.min() == pytest.approx(-0.5, rel=1e-12)
    out = zhang_shu_limit(f, eps_zs=0.0)
    new_vals = out.values_at_quadrature()
    assert new_vals.min() >= 0.0
    assert new_vals.min() == pytest.approx(0.0, abs=1e-11)
    assert out.coeffs[0, 0] == f.coeffs[0, 0]  # average bitwise unchanged


def test_zhang_shu_no_op_when_admissible():
    f = make_field([0.5], slopes=[0.1])
    out = zhang_shu_limit(f, eps_zs=1e-13)
    assert out is f


def test_zhang_shu_bound_satisfaction_and_average_preservation(rng):
    n = 32
    averages = rng.uniform(0.1, 1.0, size=n)
    slopes = rng.standard_normal(n)
    f = make_field(averages, slopes=slopes, k=2)
    f.coeffs[:, 2] = 0.3 * rng.standard_normal(n)
    eps = 1e-13
    out = zhang_shu_limit(f, eps_zs=eps)
    assert np.array_equal(out.coeffs[:, 0], f.coeffs[:, 0])
    assert out.values_at_quadrature().min() >= eps - 1e-15
    # one common scaling factor per cell on the higher modes
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = out.coeffs[:, 1:] / f.coeffs[:, 1:]
    for c in range(n):
        r = ratio[c][np.isfinite(ratio[c])]
        if r.size:
            assert r.max() - r.min() < 1e-12
            assert 0.0 <= r.min() <= 1.0 + 1e-12


def test_zhang_shu_idempotent(rng):
    f = make_field(rng.uniform(0.2, 1.0, size=16), slopes=rng.standard_normal(16))
    once = zhang_shu_limit(f, eps_zs=1e-13)
    twice = zhang_shu_limit(once, eps_zs=1e-13)
    assert twice is once


def test_zhang_shu_precondition_violation():
    f = make_field([1e-20], slopes=[0.5])
    with pytest.raises(ValueError):
        zhang_shu_limit(f, eps_zs=1e-13)
