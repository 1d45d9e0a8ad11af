"""Quantitative functionals: weighted relative energies, exponential-weight
norms, Foster-Lyapunov drift verification, explicit confinement radii, and
1D Wasserstein distances on marginals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fv_solver import SolverConfig, SolverMode, evolve
from .grid import DensityField, Grid2D
from .kernels import (
    AssumptionConstants,
    KernelParams,
    LyapunovWeight,
    a1_of_density,
    a2_of_density,
    phi_beta,
    quadratic_form,
)


@dataclass(frozen=True)
class PhiBetaWeight:
    beta: float
    gamma: float


@dataclass(frozen=True)
class InverseSteadyStateWeight:
    """phi = 1/f_inf; cells below floor_ratio * max(f_inf) are excluded
    (the weight blows up in the tails of the discrete steady state)."""

    floor_ratio: float = 1e-12


def _phi_on_grid(grid: Grid2D, beta: float, gamma: float) -> np.ndarray:
    P, Q = np.meshgrid(grid.rho_centers, grid.R_centers, indexing="ij")
    return phi_beta(P, Q, LyapunovWeight(beta, gamma))


def relative_energy(f: DensityField, f_inf: DensityField, weight) -> float:
    """Weighted L1 distance E(f; f_inf) = integral of phi |f - f_inf|."""
    if f.grid != f_inf.grid:
        raise ValueError("grid mismatch")
    diff = np.abs(f.values - f_inf.values)
    if isinstance(weight, PhiBetaWeight):
        phi = _phi_on_grid(f.grid, weight.beta, weight.gamma)
        return float(np.sum(phi * diff)) * f.grid.cell_area
    if isinstance(weight, InverseSteadyStateWeight):
        floor = weight.floor_ratio * float(f_inf.values.max())
        mask = f_inf.values >= floor
        return float(np.sum(diff[mask] / f_inf.values[mask])) * f.grid.cell_area
    raise TypeError(f"unknown weight {weight!r}")


def excluded_mass(f_inf: DensityField, weight: InverseSteadyStateWeight) -> float:
    """Mass of f_inf in cells the inverse weight excludes."""
    floor = weight.floor_ratio * float(f_inf.values.max())
    return float(f_inf.values[f_inf.values < floor].sum()) * f_inf.grid.cell_area


def beta_norm(f: DensityField, beta: float, gamma: float) -> float:
    """Exponentially weighted total variation, integral of phi_beta |f|."""
    phi = _phi_on_grid(f.grid, beta, gamma)
    return float(np.sum(phi * np.abs(f.values))) * f.grid.cell_area


def beta_norm_diff(f: DensityField, g: DensityField, beta: float, gamma: float) -> float:
    if f.grid != g.grid:
        raise ValueError("grid mismatch")
    return beta_norm(f.copy_with(f.values - g.values), beta, gamma)


@dataclass
class DriftCheckResult:
    lambda_hat: float
    A_hat: float
    B_hat: float
    violation_fraction: float


def generator_on_weight(
    mu: DensityField,
    w: LyapunovWeight,
    params: KernelParams,
    rho: np.ndarray,
    R: np.ndarray,
) -> np.ndarray:
    """Analytic L* phi_beta / phi_beta at the given points.

    Drift part: beta(-3 a1 rho - gamma a2 R - a2 rho)/sqrt(Q); diffusion
    part: sigma^2/2 [beta(3R^2 + 4/gamma)/Q^{3/2} + beta^2 (R + 4rho/gamma)^2/Q]
    with Q the confinement quadratic form. Evaluated in closed form, not by
    finite-differencing the weight.
    """
    beta, gamma = w.beta, w.gamma
    a1 = a1_of_density(mu, rho, params)
    a2 = a2_of_density(mu, R, params)
    Q = quadratic_form(rho, R, gamma)
    drift = beta * (-3.0 * a1 * rho - gamma * a2 * R - a2 * rho) / np.sqrt(Q)
    diff = 0.5 * params.sigma**2 * (
        beta * (3.0 * R * R + 4.0 / gamma) / Q**1.5
        + beta**2 * (R + 4.0 * rho / gamma) ** 2 / Q
    )
    return drift + diff


def lyapunov_drift_check(
    mu: DensityField,
    w: LyapunovWeight,
    params: KernelParams,
    exterior_ball: float,
    eval_grid: Grid2D | None = None,
) -> DriftCheckResult:
    """Fit the drift inequality L* phi <= -lambda phi + A 1_{|(rho,R)| <= B}.

    B_hat is the smallest tabulated radius outside of which the generator
    ratio is strictly negative; lambda_hat the margin there. Violations are
    cells outside exterior_ball where the ratio is nonnegative.
    """
    g = eval_grid if eval_grid is not None else mu.grid
    P, Q = np.meshgrid(g.rho_centers, g.R_centers, indexing="ij")
    ratio = generator_on_weight(mu, w, params, P, Q)
    radius = np.hypot(P, Q)
    r_flat = radius.ravel()
    g_flat = ratio.ravel()
    order = np.argsort(r_flat)
    r_sorted = r_flat[order]
    g_sorted = g_flat[order]
    # suffix max of the generator ratio over cells at radius >= r
    suffix_max = np.maximum.accumulate(g_sorted[::-1])[::-1]
    outside_neg = np.empty_like(suffix_max)
    outside_neg[:-1] = suffix_max[1:]
    outside_neg[-1] = -np.inf
    negative = outside_neg < 0
    if not negative.any():
        B_hat = float(r_sorted[-1])
        lambda_hat = 0.0
    else:
        idx = int(np.argmax(negative))
        B_hat = float(r_sorted[idx])
        lambda_hat = float(-outside_neg[idx])
    phi = phi_beta(P, Q, w)
    A_hat = float(np.max((ratio + lambda_hat) * phi))
    exterior = radius > exterior_ball
    n_ext = int(exterior.sum())
    violations = int((ratio[exterior] >= 0).sum()) if n_ext else 0
    frac = violations / n_ext if n_ext else 0.0
    return DriftCheckResult(lambda_hat, A_hat, B_hat, frac)


@dataclass
class ConfinementRadii:
    z1: float
    z2: float
    delta: float
    delta_prime: float
    delta_prime_statement: float
    delta_prime_proof: float
    M: float
    C_prime: float


def confinement_radii(
    M: float, beta: float, gamma: float, assumption: AssumptionConstants
) -> ConfinementRadii:
    """Explicit radii z1 = log(4 M C')/delta, z2 = log(4 M C')/delta'.

    The source gives two inconsistent expressions for delta'; both are
    computed and the smaller (conservative: larger z2) is used.
    """
    a = assumption.alpha
    Cp = assumption.C_decay
    if 4.0 * M * Cp <= 1.0:
        raise ValueError("M too small for positive confinement radii")
    delta = 2.0 * a * beta * math.sqrt(3.0) / (a * math.sqrt(gamma) + beta * math.sqrt(3.0))
    dp_statement = 2.0 * a * beta * math.sqrt(3.0 * gamma) / (
        a * math.sqrt(gamma) + beta * math.sqrt(3.0)
    )
    dp_proof = 4.0 * a * beta * math.sqrt(3.0 * gamma) / (
        2.0 * a + beta * math.sqrt(3.0 * gamma)
    )
    dp = min(dp_statement, dp_proof)
    logterm = math.log(4.0 * M * Cp)
    return ConfinementRadii(
        z1=logterm / delta,
        z2=logterm / dp,
        delta=delta,
        delta_prime=dp,
        delta_prime_statement=dp_statement,
        delta_prime_proof=dp_proof,
        M=M,
        C_prime=Cp,
    )


def wasserstein1_marginal(f: DensityField, g: DensityField, axis: str) -> float:
    """Exact 1D W1 between the chosen marginals: L1 distance of the CDFs.

    Inputs are renormalized to unit mass.
    """
    if f.grid != g.grid:
        raise ValueError("grid mismatch")
    if axis == "rho":
        mf, _ = f.marginals()
        mg, _ = g.marginals()
        h = f.grid.h_rho
    elif axis == "R":
        _, mf = f.marginals()
        _, mg = g.marginals()
        h = f.grid.h_R
    else:
        raise ValueError("axis must be 'rho' or 'R'")
    sf, sg = mf.sum(), mg.sum()
    if sf <= 0 or sg <= 0:
        raise ValueError("zero-mass marginal")
    cdf_f = np.cumsum(mf) / sf
    cdf_g = np.cumsum(mg) / sg
    return float(np.sum(np.abs(cdf_f - cdf_g))) * h


def wasserstein1_samples_vs_marginal(
    samples: np.ndarray, f: DensityField, axis: str
) -> float:
    """W1 between an empirical sample and a grid marginal along one axis.

    Evaluated as the L1 distance between the empirical CDF and the
    piecewise-linear grid CDF on a merged breakpoint set.
    """
    if axis == "rho":
        m, _ = f.marginals()
        edges = f.grid.rho_faces
    else:
        _, m = f.marginals()
        edges = f.grid.R_faces
    m = m / m.sum()
    grid_cdf_at_edges = np.concatenate([[0.0], np.cumsum(m)])
    xs = np.sort(np.asarray(samples, dtype=float))
    n = len(xs)
    # integrate |F_emp - F_grid| over the union of sample points and edges
    pts = np.unique(np.concatenate([xs, edges]))
    pts = np.concatenate([[min(pts[0], edges[0])], pts])
    F_emp = np.searchsorted(xs, pts, side="right") / n
    F_grid = np.interp(pts, edges, grid_cdf_at_edges, left=0.0, right=1.0)
    # F_emp is right-continuous step, F_grid piecewise linear; use trapezoid on
    # F_grid and the left-constant value of F_emp on each interval
    dx = np.diff(pts)
    emp_seg = F_emp[:-1]
    grid_seg = 0.5 * (F_grid[:-1] + F_grid[1:])
    return float(np.sum(np.abs(emp_seg - grid_seg) * dx))


def coefficient_gap(mu1: DensityField, mu2: DensityField, params: KernelParams,
                    grid: Grid2D) -> float:
    """||a1[mu1]-a1[mu2]||_inf + ||a2[mu1]-a2[mu2]||_inf on a grid's faces."""
    d1 = np.max(np.abs(
        a1_of_density(mu1, grid.rho_faces, params) - a1_of_density(mu2, grid.rho_faces, params)
    ))
    d2 = np.max(np.abs(
        a2_of_density(mu1, grid.R_faces, params) - a2_of_density(mu2, grid.R_faces, params)
    ))
    return float(d1 + d2)


@dataclass
class ContinuityProbeResult:
    w1_rho: float
    w1_R: float
    gap: float

    @property
    def total(self) -> float:
        return self.w1_rho + self.w1_R


def semigroup_continuity_probe(
    mu1: DensityField,
    mu2: DensityField,
    nu: DensityField,
    t: float,
    params: KernelParams,
    dt: float | None = None,
) -> ContinuityProbeResult:
    """Evolve nu under the two frozen-coefficient equations to time t and
    compare the marginals; used to check the exp(Ct)-Lipschitz bound shape."""
    out = []
    for mu in (mu1, mu2):
        cfg = SolverConfig(
            t_final=t, dt=dt, mode=SolverMode.LINEAR_FROZEN, frozen_mu=mu
        )
        out.append(evolve(nu, cfg, params).final)
    f1, f2 = out
    return ContinuityProbeResult(
        w1_rho=wasserstein1_marginal(f1, f2, "rho"),
        w1_R=wasserstein1_marginal(f1, f2, "R"),
        gap=coefficient_gap(mu1, mu2, params, nu.grid),
    )
