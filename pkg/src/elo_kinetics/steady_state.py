"""Steady states of the rating model, three ways.

G(mu) is realized by time-marching the frozen-coefficient linear equation
to stationarity (the semigroup viewpoint; positivity and mass are inherited
from the solver). Fixed points of G are steady states of the nonlinear
equation; the fixed-point iteration is reported honestly when it does not
converge, since the existence proof is non-constructive.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diagnostics import beta_norm, beta_norm_diff
from .fv_solver import (
    SolverConfig,
    SolverMode,
    a_field,
    cfl_limit,
    enforce_positivity,
    strang_step,
)
from .grid import DensityField
from .kernels import KernelParams, LyapunovWeight, phi_beta


class NonConvergenceError(RuntimeError):
    def __init__(self, message: str, history: list[float]):
        super().__init__(message)
        self.history = history


@dataclass
class FixedPointConfig:
    tol_state: float = 5e-4   # stationarity residual ||f_{t+D}-f_t||_beta / D
    tol_map: float = 2e-3     # fixed-point tolerance ||mu_{k+1}-mu_k||_beta
    max_outer: int = 40
    beta: float = 0.1
    t_max: float = 20.0       # equilibration horizon per map evaluation
    dt: float | None = None   # None: CFL-chosen
    cfl_safety: float = 0.45
    check_every: int = 100    # residual cadence, Delta = check_every * dt
    theta: float = 1.0        # damping: mu_{k+1} = (1-theta) mu_k + theta G(mu_k)

    def __post_init__(self):
        if self.tol_state <= 0 or self.tol_map <= 0 or self.beta <= 0:
            raise ValueError("tolerances and beta must be positive")
        if not (0 < self.theta <= 1):
            raise ValueError("theta must be in (0, 1]")


@dataclass
class SteadyStateResult:
    density: DensityField
    residual: float
    moment_beta: float
    outer_iterations: int
    norm_diff_history: list[float] = field(default_factory=list)
    moment_history: list[float] = field(default_factory=list)


def _equilibrate(
    f0: DensityField,
    cfg: FixedPointConfig,
    params: KernelParams,
    mode: SolverMode,
    frozen_mu: DensityField | None,
) -> tuple[DensityField, float]:
    """March until the discrete d_t proxy drops below tol_state."""
    solver_cfg = SolverConfig(
        t_final=np.inf, dt=cfg.dt, cfl_safety=cfg.cfl_safety,
        mode=mode, frozen_mu=frozen_mu,
    )
    frozen_coeff = None
    if mode is SolverMode.LINEAR_FROZEN:
        frozen_coeff = a_field(frozen_mu, params, f0.grid)
    f = f0
    t = 0.0
    t_mark = 0.0
    f_mark = f
    history: list[float] = []
    while t < cfg.t_max:
        if cfg.dt is not None:
            dt = cfg.dt
        else:
            coeff = frozen_coeff if frozen_coeff is not None else a_field(f, params)
            dt = cfg.cfl_safety * cfl_limit(coeff, f.grid, params)
        for _ in range(cfg.check_every):
            f = strang_step(f, dt, solver_cfg, params, frozen_coeff)
            f, _, _ = enforce_positivity(f, solver_cfg.clip_budget)
            t += dt
        delta = t - t_mark
        res = beta_norm_diff(f, f_mark, cfg.beta, params.gamma) / delta
        history.append(res)
        if res < cfg.tol_state:
            return f, res
        t_mark, f_mark = t, f
    raise NonConvergenceError(
        f"no stationarity within horizon t_max={cfg.t_max}", history
    )


def _moment(f: DensityField, beta: float, gamma: float) -> float:
    w = LyapunovWeight(beta, gamma)
    return f.weighted_integral(lambda p, q: phi_beta(p, q, w))


def map_G(
    mu: DensityField,
    cfg: FixedPointConfig,
    params: KernelParams,
    initial_guess: DensityField | None = None,
) -> SteadyStateResult:
    """Steady state of the linear equation with coefficients frozen at mu."""
    guess = initial_guess if initial_guess is not None else mu
    f, res = _equilibrate(guess, cfg, params, SolverMode.LINEAR_FROZEN, mu)
    return SteadyStateResult(
        density=f,
        residual=res,
        moment_beta=_moment(f, cfg.beta, params.gamma),
        outer_iterations=0,
    )


def nonlinear_equilibrate(
    f0: DensityField, cfg: FixedPointConfig, params: KernelParams
) -> SteadyStateResult:
    """Reference steady state f_inf: direct equilibration of the nonlinear
    equation from f0."""
    f, res = _equilibrate(f0, cfg, params, SolverMode.NONLINEAR, None)
    return SteadyStateResult(
        density=f,
        residual=res,
        moment_beta=_moment(f, cfg.beta, params.gamma),
        outer_iterations=0,
    )


def fixed_point_iterate(
    mu0: DensityField, cfg: FixedPointConfig, params: KernelParams
) -> SteadyStateResult:
    """Iterate mu_{k+1} = (1-theta) mu_k + theta G(mu_k) until the beta-norm
    difference falls below tol_map."""
    mu = mu0
    diffs: list[float] = []
    moments: list[float] = []
    last: SteadyStateResult | None = None
    for k in range(cfg.max_outer):
        result = map_G(mu, cfg, params)
        g = result.density
        diff = beta_norm_diff(g, mu, cfg.beta, params.gamma)
        diffs.append(diff)
        moments.append(result.moment_beta)
        mu = g if cfg.theta == 1.0 else mu.copy_with(
            (1.0 - cfg.theta) * mu.values + cfg.theta * g.values
        )
        last = result
        if diff < cfg.tol_map:
            return SteadyStateResult(
                density=mu,
                residual=last.residual,
                moment_beta=_moment(mu, cfg.beta, params.gamma),
                outer_iterations=k + 1,
                norm_diff_history=diffs,
                moment_history=moments,
            )
    raise NonConvergenceError(
        f"fixed point not reached in {cfg.max_outer} outer iterations", diffs
    )


def moment_map_exponent(
    family: list[DensityField],
    beta: float,
    params: KernelParams,
    cfg: FixedPointConfig,
) -> float:
    """Empirical exponent eta_hat: slope of log moment(G(mu)) vs log moment(mu).

    eta_hat < 1 is the preserved-moment-set mechanism.
    """
    if len(family) < 3:
        raise ValueError("family must have at least 3 members")
    Ms = np.array([_moment(mu, beta, params.gamma) for mu in family])
    logM = np.log(Ms)
    if np.ptp(logM) < 1e-8:
        raise ValueError("degenerate family: moments are not distinct")
    logG = np.log([
        map_G(mu, cfg, params).moment_beta for mu in family
    ])
    slope, _ = np.polyfit(logM, logG, 1)
    return float(slope)
