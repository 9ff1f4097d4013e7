"""Analytic transport coefficients for a static Maxwellian background.

Provides the Maxwellian distribution, the closed-form potential functions
of a Maxwellian background (H, G), the resulting Cartesian diffusion
tensor, and the preset coefficient fields used by the experiments.

All formulas are written for velocity dimension d = 2.  The closed forms
for H, G, and the diffusion tensor are 0/0 at v' = 0 and cancel
catastrophically in floating point, so below w_b = |v - u| * sqrt(m_b/2T)
< 1e-3 they switch to Taylor expansions (4th order for the tensor).
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

_SQRT_PI = math.sqrt(math.pi)
W_SERIES_THRESHOLD = 1e-3


@dataclass(frozen=True)
class SpeciesParams:
    """Background/test species parameters; n_b defaults to 1."""

    m_b: float
    m: float
    T: float
    u: tuple = (0.0, 0.0)
    eps_inv: float = 1.0
    n_b: float = 1.0

    def __post_init__(self):
        for name in ("m_b", "m", "T", "eps_inv", "n_b"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")

    @property
    def w_scale(self) -> float:
        """sqrt(m_b / 2T): converts |v - u| to the scaled speed w_b."""
        return math.sqrt(self.m_b / (2.0 * self.T))


def maxwellian(v, n, u, T, m):
    """Gaussian equilibrium n/(pi vth^2) * exp(-(m/2T)|v-u|^2), vth^2 = 2T/m."""
    v = np.asarray(v, dtype=float)
    u = np.asarray(u, dtype=float)
    r2 = np.sum((v - u) ** 2, axis=-1)
    vth2 = 2.0 * T / m
    return n / (math.pi * vth2) * np.exp(-r2 / vth2)


def rosenbluth_H(vprime, params: SpeciesParams):
    """First potential of a Maxwellian background: n_b erf(w)/v'.

    Near v' = 0 the series n_b s (2/sqrt(pi)) (1 - w^2/3 + w^4/10) is used,
    with s = sqrt(m_b/2T) and w = s v'.
    """
    vprime = np.asarray(vprime, dtype=float)
    s = params.w_scale
    w = s * vprime
    small = w < W_SERIES_THRESHOLD
    w_safe = np.where(small, 1.0, vprime)
    closed = params.n_b * erf(w) / w_safe
    w2 = w * w
    series = params.n_b * s * (2.0 / _SQRT_PI) * (1.0 - w2 / 3.0 + w2 * w2 / 10.0)
    return np.where(small, series, closed)


def rosenbluth_G(vprime, params: SpeciesParams):
    """Second potential: n_b v'[(1 + 1/(2w^2)) erf(w) + exp(-w^2)/(sqrt(pi) w)].

    Finite at v' = 0; the series value there is 2 n_b / (s sqrt(pi)).
    """
    vprime = np.asarray(vprime, dtype=float)
    s = params.w_scale
    w = s * vprime
    small = w < W_SERIES_THRESHOLD
    w_safe = np.where(small, 1.0, w)
    closed = params.n_b * vprime * (
        (1.0 + 0.5 / (w_safe * w_safe)) * erf(w_safe)
        + np.exp(-w_safe * w_safe) / (_SQRT_PI * w_safe)
    )
    w2 = w * w
    series = params.n_b / (s * _SQRT_PI) * (2.0 + (2.0 / 3.0) * w2 - w2 * w2 / 15.0)
    return np.where(small, series, closed)


def _radial_tangential_rates(w, s, n_b):
    """Eigenvalues of the diffusion tensor along and across v - u.

    The tensor of a radial potential G factors as
        D = (G'/v') (I - vhat vhat^T) + G'' vhat vhat^T,
    which is the two-branch componentwise formula in disguise.  Returns
    (tangential, radial) rates; both tend to 4 n_b s / (3 sqrt(pi)) at w = 0.
    """
    w = np.asarray(w, dtype=float)
    small = w < W_SERIES_THRESHOLD
    w_safe = np.where(small, 1.0, w)
    erfw = erf(w_safe)
    expw = np.exp(-w_safe * w_safe)
    w2s = w_safe * w_safe
    tangential = n_b * s * (
        erfw * (1.0 - 0.5 / w2s) + expw / (_SQRT_PI * w_safe)
    ) / w_safe
    radial = n_b * s * (erfw / (w2s * w_safe) - 2.0 * expw / (_SQRT_PI * w2s))
    w2 = w * w
    w4 = w2 * w2
    pref = n_b * s / _SQRT_PI
    tang_series = pref * (4.0 / 3.0 - (4.0 / 15.0) * w2 + (2.0 / 35.0) * w4)
    rad_series = pref * (4.0 / 3.0 - (4.0 / 5.0) * w2 + (2.0 / 7.0) * w4)
    return (
        np.where(small, tang_series, tangential),
        np.where(small, rad_series, radial),
    )


def diffusion_tensor_maxwellian(v, params: SpeciesParams):
    """Cartesian diffusion tensor of a Maxwellian background; shape (..., 2, 2).

    Exactly symmetric by construction and positive semidefinite for all v.
    """
    v = np.asarray(v, dtype=float)
    vp = v - np.asarray(params.u, dtype=float)
    r = np.sqrt(np.sum(vp * vp, axis=-1))
    s = params.w_scale
    lam_t, lam_r = _radial_tangential_rates(r * s, s, params.n_b)
    r_safe = np.where(r == 0.0, 1.0, r)
    vhat = vp / r_safe[..., None]
    vhat = np.where(r[..., None] == 0.0, 0.0, vhat)
    out = np.zeros(v.shape[:-1] + (2, 2))
    out[..., 0, 0] = lam_t
    out[..., 1, 1] = lam_t
    diff = lam_r - lam_t
    out += diff[..., None, None] * (vhat[..., :, None] * vhat[..., None, :])
    return out


class CoefficientProvider:
    """Time- and velocity-dependent coefficients of one model problem.

    Subclasses supply a symmetric positive-semidefinite matrix field
    ``diffusion(t, v)`` and the drift ``drift(t, v)``.  For the physical
    presets the drift is D(v) (u - v); the anisotropic preset supplies its
    drift directly, which is why ``drift`` is the primitive here.
    """

    time_dependent_diffusion = False
    advection_scale = 1.0  # the m/T factor multiplying the convection form

    def diffusion(self, t, v):
        raise NotImplementedError

    def drift(self, t, v):
        raise NotImplementedError

    def affine_diffusion(self):
        """Optional decomposition D(t, v) = D0(v) + sum_a theta_a(t) Da(v).

        Returns (static_field, [(theta, field), ...]) or None.  Lets the
        scheme assemble each component once and recombine per step.
        """
        return None


class OUIdentityProvider(CoefficientProvider):
    """D = I, u = 0: drift b = -v and unit scale factors."""

    def diffusion(self, t, v):
        v = np.asarray(v, dtype=float)
        out = np.zeros(v.shape[:-1] + (2, 2))
        out[..., 0, 0] = 1.0
        out[..., 1, 1] = 1.0
        return out

    def drift(self, t, v):
        return -np.asarray(v, dtype=float)


def ou_identity_provider() -> OUIdentityProvider:
    return OUIdentityProvider()


class AnisotropicCovarianceProvider(CoefficientProvider):
    """Relaxation model with D_ij = delta_ij(|v|^2 + 2E) - v_i v_j - Sigma_ij(t).

    Sigma(t) = Sigma_inf - (Sigma_inf - Sigma_0) exp(-4 d t) with d = 2,
    Sigma_0 = diag(sigma1, sigma2), Sigma_inf = (2E/d) I, 2E = tr Sigma_0.
    The drift is supplied directly as b = -(d-1) v = -v.
    """

    time_dependent_diffusion = True

    def __init__(self, sigma1: float, sigma2: float):
        if sigma1 <= 0.0 or sigma2 <= 0.0:
            raise ValueError("initial covariance entries must be positive")
        self.sigma0 = np.diag([sigma1, sigma2])
        self.two_e = sigma1 + sigma2
        self.sigma_inf = np.eye(2) * (self.two_e / 2.0)

    def sigma(self, t: float) -> np.ndarray:
        decay = math.exp(-8.0 * t)  # 4 d t with d = 2
        return self.sigma_inf - (self.sigma_inf - self.sigma0) * decay

    def _static_part(self, v):
        v = np.asarray(v, dtype=float)
        vsq = np.sum(v * v, axis=-1)
        out = np.zeros(v.shape[:-1] + (2, 2))
        out[..., 0, 0] = vsq + self.two_e
        out[..., 1, 1] = vsq + self.two_e
        out -= v[..., :, None] * v[..., None, :]
        return out

    def diffusion(self, t, v):
        return self._static_part(v) - self.sigma(t)

    def drift(self, t, v):
        return -np.asarray(v, dtype=float)

    def affine_diffusion(self):
        parts = []
        for i, j in ((0, 0), (1, 1), (0, 1)):
            unit = np.zeros((2, 2))
            unit[i, j] = 1.0
            unit[j, i] = 1.0
            # skip components whose coefficient is identically zero
            if self.sigma0[i, j] == 0.0 and self.sigma_inf[i, j] == 0.0:
                continue

            def theta(t, i=i, j=j):
                return -self.sigma(t)[i, j]

            def fld(v, unit=unit):
                v = np.asarray(v, dtype=float)
                return np.broadcast_to(unit, v.shape[:-1] + (2, 2)).copy()

            parts.append((theta, fld))
        return self._static_part, parts


def anisotropic_provider(sigma1: float, sigma2: float) -> AnisotropicCovarianceProvider:
    return AnisotropicCovarianceProvider(sigma1, sigma2)


class MaxwellianBackgroundProvider(CoefficientProvider):
    """Analytic tensor of a Maxwellian background; drift b = D(v) (u - v)."""

    def __init__(self, params: SpeciesParams):
        self.params = params
        self.advection_scale = params.m / params.T

    def diffusion(self, t, v):
        return diffusion_tensor_maxwellian(v, self.params)

    def drift(self, t, v):
        v = np.asarray(v, dtype=float)
        d = self.diffusion(t, v)
        rel = np.asarray(self.params.u, dtype=float) - v
        return np.einsum("...ij,...j->...i", d, rel)


def maxwellian_background_provider(params: SpeciesParams) -> MaxwellianBackgroundProvider:
    return MaxwellianBackgroundProvider(params)
