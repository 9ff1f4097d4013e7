"""Experiment presets wiring coefficient fields, initial states, and outputs.

Each preset encodes the reference parameters of one experiment family;
every ExperimentConfig key can override them.  Runs write a diagnostics
CSV and a final-field grid dump into the output directory; the accuracy
presets also append their error metrics to a one-row convergence CSV, and
``run_convergence`` stitches multi-level refinement tables.
"""
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .. import coefficients as coeff
from ..basis import legendre_basis
from ..errors import ConfigError
from ..mesh import build_mesh
from ..stepping import RunResult, StepConfig, run
from .config import ExperimentConfig
from .diagnostics import (
    DiagnosticsRecord,
    convergence_rate,
    covariance_moments,
    l2h_error,
    linf_error,
    write_convergence_csv,
    write_diagnostics_csv,
    write_grid_dump,
)

DOMAIN = ((-10.0, -10.0), (10.0, 10.0))
ANISO_SIGMA = (1.8, 0.2)

PRESET_NAMES = (
    "ou_accuracy",
    "anisotropic",
    "rfp_reduced",
    "beam_relaxation",
    "positivity_importance",
)

_DEFAULTS = {
    "ou_accuracy": dict(degree=2, nx=64, ny=64, tau=4e-2, t0=1.0, t_end=20.0,
                        m=1.0, m_b=1.0, T=1.0, u=(0.0, 0.0), eps_inv=1.0),
    "anisotropic": dict(degree=2, nx=64, ny=64, tau=4e-4, t0=0.0, t_end=2.0,
                        m=1.0, m_b=1.0, T=1.0, u=(0.0, 0.0), eps_inv=1.0),
    "rfp_reduced": dict(degree=2, nx=128, ny=128, tau=5e-4, t0=0.0, t_end=20.0,
                        m=10.0, m_b=2000.0, T=1.0, u=(2.5, 0.0), eps_inv=1e3),
    "beam_relaxation": dict(degree=2, nx=128, ny=128, tau=5e-4, t0=0.0, t_end=200.0,
                            m=1.0, m_b=100.0, T=1.0, u=(0.0, 0.0), eps_inv=1e2),
    "positivity_importance": dict(degree=2, nx=128, ny=128, tau=5e-4, t0=0.0,
                                  t_end=20.0, m=30.0, m_b=100.0, T=1.0,
                                  u=(0.0, 0.0), eps_inv=1e2),
}


def preset_defaults(name: str) -> ExperimentConfig:
    if name == "dr_benchmark":
        return ExperimentConfig(preset=name)
    if name not in _DEFAULTS:
        raise ConfigError(f"unknown preset {name!r}")
    return ExperimentConfig(preset=name, **_DEFAULTS[name])


def ou_exact_solution(t, v):
    """Self-similar Gaussian of the unit isotropic relaxation problem."""
    s2 = 1.0 - math.exp(-2.0 * t)
    r2 = np.sum(np.asarray(v, dtype=float) ** 2, axis=-1)
    return np.exp(-r2 / (2.0 * s2)) / (2.0 * math.pi * s2)


def _aniso_initial(v):
    s1, s2 = ANISO_SIGMA
    v = np.asarray(v, dtype=float)
    norm = 2.0 * math.pi * math.sqrt(s1 * s2)
    return np.exp(-v[..., 0] ** 2 / (2 * s1) - v[..., 1] ** 2 / (2 * s2)) / norm


@dataclass
class PresetSetup:
    config: ExperimentConfig
    mesh: object
    basis: object
    provider: object
    step_config: StepConfig
    initial: object
    exact: object = None  # exact solution f(t, v) when known


def build_setup(config: ExperimentConfig) -> PresetSetup:
    """Materialize mesh, provider, and scheme configuration for a preset."""
    name = config.preset
    mesh = build_mesh(DOMAIN[0], DOMAIN[1], config.nx, config.ny)
    basis = legendre_basis(config.degree)
    duration = config.t_end - config.t0
    n_steps = duration / config.tau
    if abs(n_steps - round(n_steps)) > 1e-9:
        # keep tau exact and land on the first uniform grid point past t_end
        n_steps = math.ceil(n_steps - 1e-9)
        t_end = config.t0 + n_steps * config.tau
    else:
        t_end = config.t_end
    step_cfg = StepConfig(
        tau=config.tau, t0=config.t0, t_end=t_end, sigma=config.sigma,
        eps_inv=config.eps_inv, m=config.m, T=config.T,
        limiter_enabled=config.limiter,
    )
    if name == "ou_accuracy":
        provider = coeff.ou_identity_provider()
        initial = lambda v: ou_exact_solution(config.t0, v)
        exact = ou_exact_solution
    elif name == "anisotropic":
        provider = coeff.anisotropic_provider(*ANISO_SIGMA)
        initial = _aniso_initial
        exact = None
    elif name == "rfp_reduced":
        params = coeff.SpeciesParams(m_b=config.m_b, m=config.m, T=config.T,
                                     u=config.u, eps_inv=config.eps_inv)
        provider = coeff.maxwellian_background_provider(params)
        initial = lambda v: np.full(np.asarray(v).shape[:-1], 1.0 / 400.0)
        exact = None
    elif name == "beam_relaxation":
        params = coeff.SpeciesParams(m_b=config.m_b, m=config.m, T=config.T,
                                     u=config.u, eps_inv=config.eps_inv)
        provider = coeff.maxwellian_background_provider(params)
        initial = lambda v: coeff.maxwellian(v, 1.0, (7.0, 0.0), 0.25, 1.0)
        exact = None
    elif name == "positivity_importance":
        params = coeff.SpeciesParams(m_b=config.m_b, m=config.m, T=config.T,
                                     u=config.u, eps_inv=config.eps_inv)
        provider = coeff.maxwellian_background_provider(params)
        initial = lambda v: coeff.maxwellian(v, 1.0, (0.0, 0.0), 1.0, 1.0)
        exact = None
    else:
        raise ConfigError(f"preset {name!r} is not a simulation preset")
    return PresetSetup(config, mesh, basis, provider, step_cfg, initial, exact)


@dataclass
class PresetArtifacts:
    result: RunResult
    records: list
    diagnostics_path: str
    dump_path: str
    l2h_final: float | None = None
    linf_final: float | None = None
    sigma_final: np.ndarray | None = None


def run_preset(config: ExperimentConfig) -> PresetArtifacts:
    if config.preset == "dr_benchmark":
        from .bench import dr_benchmark, write_bench_csv

        os.makedirs(config.out_dir, exist_ok=True)
        table = dr_benchmark()
        path = os.path.join(config.out_dir, "bench_dr.csv")
        write_bench_csv(path, table)
        return PresetArtifacts(result=None, records=[], diagnostics_path=path,
                               dump_path="")
    setup = build_setup(config)
    os.makedirs(config.out_dir, exist_ok=True)
    records = []
    track_sigma = config.preset == "anisotropic"
    n_steps = setup.step_config.n_steps
    snap_digits = len(str(n_steps))

    def diagnose(k, t, f):
        rec = DiagnosticsRecord(
            step=k, time=t, mass=f.global_mass(),
            min_cell_avg=float(f.coeffs[:, 0].min()),
            min_quad_val=float(f.values_at_quadrature().min()),
        )
        if setup.exact is not None:
            rec.l2h_err = l2h_error(f, setup.exact, t)
            rec.linf_err = linf_error(f, setup.exact, t)
        if track_sigma:
            s = covariance_moments(f)
            rec.sigma11 = s[0, 0]
            rec.sigma22 = s[1, 1]
        records.append(rec)
        if k % config.output_stride == 0 and k < n_steps:
            snap = os.path.join(
                config.out_dir,
                f"{config.preset}_snap_{k:0{snap_digits}d}.dat",
            )
            write_grid_dump(snap, f, t)

    result = run(
        setup.initial, setup.mesh, setup.basis, setup.step_config,
        setup.provider, callbacks=[diagnose], callback_stride=config.output_stride,
    )
    for rec in records:
        rec.dr_iters = int(result.dr_iterations[rec.step])
    diag_path = os.path.join(config.out_dir, f"{config.preset}_diagnostics.csv")
    write_diagnostics_csv(diag_path, records)
    dump_path = os.path.join(config.out_dir, f"{config.preset}_final.dat")
    write_grid_dump(dump_path, result.field, setup.step_config.t_end)
    art = PresetArtifacts(result=result, records=records,
                          diagnostics_path=diag_path, dump_path=dump_path)
    if setup.exact is not None:
        art.l2h_final = records[-1].l2h_err
        art.linf_final = records[-1].linf_err
    if track_sigma:
        art.sigma_final = covariance_moments(result.field)
    return art


# refinement ladder anchors: (base nx, base tau) per (preset, degree)
_LADDER_BASE = {
    ("ou_accuracy", 2): (64, 4e-2),
    ("ou_accuracy", 3): (64, 1.6e-1),
    ("anisotropic", 2): (64, 4e-4),
    ("anisotropic", 3): (32, 1.6e-2),
}


def _tau_refinement(degree: int) -> float:
    """Per-halving time-step scaling matching the scheme's spatial order."""
    order = degree if degree % 2 == 0 else degree + 1
    return 0.5**order


def run_convergence(preset: str, degrees, levels: int, out_dir: str = ".",
                    limiter: bool = True):
    """Run a refinement ladder and write one convergence CSV per degree.

    For ``ou_accuracy`` the errors are the discrete L2/Linf norms against
    the exact solution; for ``anisotropic`` they are |Sigma^h_ii(t_end) -
    Sigma_ii(inf)| for i = 1, 2, written in the same columns.
    """
    if levels < 1:
        raise ConfigError("levels must be >= 1")
    os.makedirs(out_dir, exist_ok=True)
    outputs = {}
    for degree in degrees:
        key = (preset, degree)
        if key not in _LADDER_BASE:
            raise ConfigError(f"no refinement ladder for preset {preset!r}, k={degree}")
        nx0, tau0 = _LADDER_BASE[key]
        scale = _tau_refinement(degree)
        rows = []
        errors = []
        for lev in range(levels):
            cfg = replace(
                preset_defaults(preset),
                degree=degree, nx=nx0 * 2**lev, ny=nx0 * 2**lev,
                tau=tau0 * scale**lev, limiter=limiter, out_dir=out_dir,
                output_stride=10**9,  # endpoints only
            )
            art = run_preset(cfg)
            if preset == "ou_accuracy":
                e1, e2 = art.l2h_final, art.linf_final
            else:
                target = (ANISO_SIGMA[0] + ANISO_SIGMA[1]) / 2.0
                e1 = abs(art.sigma_final[0, 0] - target)
                e2 = abs(art.sigma_final[1, 1] - target)
            dx = 20.0 / cfg.nx
            r1 = convergence_rate(errors[-1][0], e1) if errors else None
            r2 = convergence_rate(errors[-1][1], e2) if errors else None
            errors.append((e1, e2))
            rows.append((dx, cfg.tau, e1, r1, e2, r2))
        path = os.path.join(out_dir, f"{preset}_k{degree}_convergence.csv")
        write_convergence_csv(path, rows)
        outputs[degree] = (path, rows)
    return outputs
