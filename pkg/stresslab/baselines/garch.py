"""
GARCH(1,1) with variance-standardized Student-t innovations.

Fitting runs SLSQP from a fixed grid of starts on returns rescaled to unit
variance; parameters are reported in the original units.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter
from scipy.special import gammaln

from stresslab.baselines.historical import BaselineResult
from stresslab.config.worker_config import COMPONENT_SETTINGS
from stresslab.core.errors import GarchFitError, InsufficientDataError
from stresslab.risk.simulation import path_drawdowns, var_cvar

logger = logging.getLogger(__name__)

SETTINGS = COMPONENT_SETTINGS["garch"]
STATIONARITY_MARGIN = 1e-6
NU_BOUNDS = (2.05, 100.0)
OMEGA_FLOOR = 1e-8


@dataclass(frozen=True, slots=True)
class GarchFit:
    omega: float
    alpha: float
    beta: float
    nu: float
    loglik: float
    mean: float
    h_next: float
    n_obs: int
    starts_converged: int

    def params(self) -> dict:
        return asdict(self)


def variance_path(params: np.ndarray, r: np.ndarray, h0: float) -> np.ndarray:
    """h_t = omega + alpha * r_{t-1}^2 + beta * h_{t-1}, h_0 given; length len(r) + 1."""
    omega, alpha, beta = params[:3]
    u = omega + alpha * r * r
    tail = lfilter([1.0], [1.0, -beta], u, zi=[beta * h0])[0]
    return np.concatenate([[h0], tail])


def t_loglik(r: np.ndarray, h: np.ndarray, nu: float) -> float:
    z2 = r * r / h
    const = gammaln((nu + 1.0) / 2.0) - gammaln(nu / 2.0) - 0.5 * np.log(np.pi * (nu - 2.0))
    return float(np.sum(const - 0.5 * np.log(h) - (nu + 1.0) / 2.0 * np.log1p(z2 / (nu - 2.0))))


def _neg_loglik(theta: np.ndarray, x: np.ndarray, h0: float) -> float:
    h = variance_path(theta, x, h0)[:-1]
    if not np.all(np.isfinite(h)) or np.any(h <= 0):
        return 1e10
    value = -t_loglik(x, h, theta[3])
    return value if np.isfinite(value) else 1e10


def fit_garch_t(returns: np.ndarray) -> GarchFit:
    r = np.asarray(returns, dtype=float)
    r = r[np.isfinite(r)]
    if r.size < SETTINGS["min_obs"]:
        raise InsufficientDataError(f"GARCH fit needs at least {SETTINGS['min_obs']} returns, got {r.size}")

    mean = float(r.mean())
    scale = float(r.std(ddof=1))
    if scale <= 0:
        raise InsufficientDataError("GARCH fit on a constant series")
    x = (r - mean) / scale
    h0 = float(np.var(x))

    bounds = [(OMEGA_FLOOR, 10.0), (0.0, 1.0), (0.0, 1.0), NU_BOUNDS]
    constraints = [{"type": "ineq", "fun": lambda th: 1.0 - STATIONARITY_MARGIN - th[1] - th[2]}]

    best, best_value, converged = None, np.inf, 0
    for alpha, beta, nu in itertools.product(SETTINGS["start_alpha"], SETTINGS["start_beta"], SETTINGS["start_nu"]):
        start = np.array([max(OMEGA_FLOOR, (1.0 - alpha - beta) * h0), alpha, beta, nu])
        try:
            res = minimize(_neg_loglik, start, args=(x, h0), method="SLSQP", bounds=bounds,
                           constraints=constraints, options={"maxiter": 500, "ftol": 1e-10})
        except (ValueError, FloatingPointError) as e:
            logger.debug(f"stage=baselines event=garch_start_failed start={start.tolist()} error={str(e)}")
            continue
        feasible = res.x[1] + res.x[2] < 1.0 and res.x[0] > 0 and res.x[3] > 2.0
        if res.success and feasible and np.isfinite(res.fun):
            converged += 1
            if res.fun < best_value:
                best, best_value = res.x, float(res.fun)
        elif best is None and np.isfinite(res.fun) and res.fun < best_value:
            best_value = float(res.fun)

    if best is None or converged == 0:
        raise GarchFitError("GARCH(1,1)-t did not converge from any start", best={"neg_loglik": best_value})

    omega_x, alpha, beta, nu = (float(v) for v in best)
    h_path = variance_path(best, x, h0)
    # log-likelihood in original units adds the Jacobian of the rescaling
    loglik = -best_value - r.size * np.log(scale)
    fit = GarchFit(
        omega=omega_x * scale**2,
        alpha=alpha,
        beta=beta,
        nu=nu,
        loglik=float(loglik),
        mean=mean,
        h_next=float(h_path[-1]) * scale**2,
        n_obs=int(r.size),
        starts_converged=converged,
    )
    logger.info(
        f"stage=baselines event=garch_fitted omega={fit.omega:.3e} alpha={alpha:.4f} "
        f"beta={beta:.4f} nu={nu:.2f} starts_converged={converged}"
    )
    return fit


def simulate_garch_t(fit: GarchFit, horizon: int, n_paths: int, seed: int) -> np.ndarray:
    """n_paths x horizon daily returns starting from the one-step-ahead variance."""
    rng = np.random.default_rng(seed)
    scale = np.sqrt((fit.nu - 2.0) / fit.nu)
    out = np.empty((n_paths, horizon))
    h = np.full(n_paths, fit.h_next)
    for t in range(horizon):
        eps = np.sqrt(h) * rng.standard_t(fit.nu, size=n_paths) * scale
        out[:, t] = fit.mean + eps
        h = fit.omega + fit.alpha * eps * eps + fit.beta * h
    return out


def garch_var(
    fit: GarchFit,
    horizon: int = 63,
    n_paths: int = 20000,
    seed: int = 0,
    window: tuple[str, str] = ("", ""),
) -> BaselineResult:
    paths = simulate_garch_t(fit, horizon, n_paths, seed)
    losses = -(np.prod(1.0 + paths, axis=1) - 1.0)
    var, cvar = var_cvar(losses)
    params = {k: v for k, v in fit.params().items()}
    params.update({"horizon": horizon, "n_paths": n_paths, "seed": seed})
    return BaselineResult(
        method="garch_t",
        var95=var,
        cvar95=cvar,
        window=window,
        params=params,
        mdd=float(min(0.0, path_drawdowns(paths).mean())),
    )
