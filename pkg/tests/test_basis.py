import numpy as np
import pytest

from fpdg.basis import legendre_basis
from fpdg.errors import ConfigError
from fpdg.quadrature import gauss_rule, tensor_rule


def gram_matrix(basis, q):
    pts, wts = tensor_rule(gauss_rule(q))
    vals = basis.values(pts)
    return np.einsum("q,qa,qb->ab", wts, vals, vals)


def test_dimensions():
    assert legendre_basis(1).n_b == 3
    assert legendre_basis(2).n_b == 6
    assert legendre_basis(3).n_b == 10


def test_first_function_is_constant_one(rng):
    basis = legendre_basis(3)
    pts = rng.uniform(-0.5, 0.5, size=(20, 2))
    assert basis.values(pts)[:, 0] == pytest.approx(np.ones(20), abs=1e-15)


def test_second_function_is_scaled_x(rng):
    basis = legendre_basis(1)
    pts = rng.uniform(-0.5, 0.5, size=(20, 2))
    vals = basis.values(pts)
    assert vals[:, 1] == pytest.approx(2.0 * np.sqrt(3.0) * pts[:, 0], abs=1e-14)
    assert vals[:, 2] == pytest.approx(2.0 * np.sqrt(3.0) * pts[:, 1], abs=1e-14)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_orthonormality(k):
    basis = legendre_basis(k)
    gram = gram_matrix(basis, k + 1)
    assert np.abs(gram - np.eye(basis.n_b)).max() < 1e-13


def test_degree_below_one_rejected():
    with pytest.raises(ConfigError):
        legendre_basis(0)


def test_mapped_mass_matrix_is_cell_area_times_identity():
    # int_E phi_ij phi_il = |E| delta_jl under the affine map
    basis = legendre_basis(2)
    h = 0.37
    pts, wts = tensor_rule(gauss_rule(4))
    vals = basis.values(pts)
    mass = (h * h) * np.einsum("q,qa,qb->ab", wts, vals, vals)
    assert np.abs(mass - h * h * np.eye(basis.n_b)).max() < 1e-15


def test_reference_gradients_match_finite_differences(rng):
    # physical gradient of phi(F^{-1}(v)) is (1/h) * reference gradient
    basis = legendre_basis(3)
    h = 0.25
    center = np.array([1.3, -0.7])
    step = 1e-5
    pts_phys = center + h * rng.uniform(-0.4, 0.4, size=(30, 2))

    def phys_vals(v):
        return basis.values((v - center) / h)

    grads = basis.gradients((pts_phys - center) / h) / h
    for d in range(2):
        e = np.zeros(2)
        e[d] = step
        fd = (phys_vals(pts_phys + e) - phys_vals(pts_phys - e)) / (2 * step)
        assert np.abs(fd - grads[:, :, d]).max() < 1e-6
