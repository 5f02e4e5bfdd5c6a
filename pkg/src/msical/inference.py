"""Parametric-bootstrap test of near-stationarity across replicates.

The null hypothesis is that every replicate shares a single parameter
vector, i.e. the between-replicate distribution of the noise parameters
is a point mass.  Under the null the pooled AWV fit describes all
replicates, so the weighted lack of fit

    S = sum_i w_i || nu_hat_i - nu(theta_dagger) ||^2_Omega

is small; parameter dispersion across replicates inflates it.  The null
distribution of S is approximated by simulating replicate sets from the
fitted model, refitting, and recomputing the statistic.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import NumericalError, SizeError, UnreliableTestError
from .fit import (
    FitOptions,
    FitResult,
    WeightScheme,
    _align,
    _canonical_model,
    _minimize_wv_distance,
    awv_fit,
    compute_weights,
    resolve_omega,
)
from .models import CompositeModel, simulate_path
from .theory import WVEvaluator
from .wavelet import WVEstimate, estimate_wv

__all__ = ["TestResult", "near_stationarity_test"]

# Stream tag keeping bootstrap draws disjoint from simulation streams.
_BOOT_STREAM = 7001


@dataclass(frozen=True)
class TestResult:
    """Outcome of the near-stationarity bootstrap test."""

    statistic: float
    bootstrap_statistics: np.ndarray
    p_value: float
    n_boot: int
    n_failed: int
    level: float
    reject: bool
    fit: FitResult

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "bootstrap_statistics": [float(v) for v in self.bootstrap_statistics],
            "p_value": self.p_value,
            "n_boot": self.n_boot,
            "n_failed": self.n_failed,
            "level": self.level,
            "reject": self.reject,
            "fit": self.fit.to_dict(),
        }


def _weighted_objective(nus, weights, omega, nu_model) -> float:
    resid = nus - nu_model
    return float(np.einsum("i,ij,jk,ik->", weights, resid, omega, resid))


def near_stationarity_test(
    wvs: list[WVEstimate],
    template: CompositeModel,
    *,
    weights: WeightScheme | None = None,
    omega_mode: str = "identity",
    n_boot: int = 100,
    level: float = 0.05,
    options: FitOptions | None = None,
    refit_options: FitOptions | None = None,
    seed: int = 0,
) -> TestResult:
    """Test whether all replicates share one parameter vector.

    The pooled model ``theta_dagger`` is the AWV fit to the supplied WV
    estimates.  ``n_boot`` replicate sets of matching lengths are
    simulated from it, each refitted (warm-started at ``theta_dagger``),
    and the observed statistic is ranked among the bootstrap draws with
    the smoothed estimator p = (1 + #{boot >= observed}) / (n_ok + 1),
    where n_ok counts converged refits, so p is never exactly zero.

    The weighting matrix is resolved once from the observed data and
    held fixed across all bootstrap refits so every statistic measures
    lack of fit on a common scale.

    Parameters
    ----------
    wvs : list of WVEstimate
        One WV estimate per replicate; bootstrap replicate lengths are
        taken from their ``n_samples`` fields.
    template : CompositeModel
        Model structure to fit under the null.
    weights : WeightScheme, optional
        Replicate weights; default is duration proportional to sample
        count with unit quality factors.
    omega_mode : str
        Weighting matrix mode; modes other than "identity" require the
        WV estimates to carry bootstrap covariances.
    n_boot : int
        Number of bootstrap resamples (>= 19).
    level : float
        Decision level; ``reject`` is ``p_value <= level``.
    options, refit_options : FitOptions, optional
        Optimizer settings for the observed fit and for the bootstrap
        refits.  Refits default to two starts, warm-started at the
        pooled estimate.
    seed : int
        Root seed for the bootstrap simulation streams.

    Raises
    ------
    UnreliableTestError
        If more than 20% of bootstrap refits fail to converge.
    """
    if len(wvs) < 2:
        raise SizeError("near-stationarity test needs at least 2 replicates")
    if n_boot < 19:
        raise SizeError(f"n_boot must be >= 19, got {n_boot}")
    if not 0.0 < level < 1.0:
        raise SizeError(f"level must lie in (0, 1), got {level}")
    options = options or FitOptions()

    lengths = [wv.n_samples for wv in wvs]
    if weights is None:
        weights = compute_weights(lengths)
    depth = min(wv.depth for wv in wvs)
    nus_obs, covs = _align(wvs, depth)
    omega = resolve_omega(
        omega_mode,
        covs=covs if omega_mode != "identity" else None,
        weights=weights,
        depth=depth,
    )

    fit = awv_fit(wvs, template, weights=weights, omega=omega, options=options)
    # Record the mode the matrix was resolved from, not "explicit".
    fit = replace(fit, omega_mode=omega_mode)
    w = weights.weights
    evaluator = WVEvaluator(template, depth)
    s_obs = _weighted_objective(nus_obs, w, omega, evaluator(fit.theta))

    if refit_options is None:
        # Warm-started, polish-free refits: the statistic is quadratic
        # around the minimum, so simplex-tolerance accuracy suffices.
        refit_options = replace(
            options, n_starts=2, init_thetas=(tuple(fit.theta),), polish=False
        )

    taus = (1 << np.arange(1, depth + 1)).astype(float)
    boot_stats: list[float] = []
    n_failed = 0
    for b in range(n_boot):
        nus_b = np.empty((len(wvs), depth))
        for i, t_i in enumerate(lengths):
            x = simulate_path(fit.model, t_i, seed, stream=(_BOOT_STREAM, b, i))
            nus_b[i] = estimate_wv(x, depth=depth).nu
        nu_bar = w @ nus_b
        try:
            theta_b, _, _ = _minimize_wv_distance(
                template, taus, omega, nu_bar[None, :], np.ones(1), nu_bar, refit_options
            )
        except NumericalError:
            n_failed += 1
            continue
        theta_b = _canonical_model(template, theta_b).flatten()
        boot_stats.append(_weighted_objective(nus_b, w, omega, evaluator(theta_b)))

    if n_failed > 0.2 * n_boot:
        raise UnreliableTestError(
            f"{n_failed} of {n_boot} bootstrap refits failed to converge"
        )
    boot_arr = np.asarray(boot_stats)
    p_value = (1.0 + int(np.sum(boot_arr >= s_obs))) / (boot_arr.size + 1.0)
    return TestResult(
        statistic=s_obs,
        bootstrap_statistics=boot_arr,
        p_value=p_value,
        n_boot=n_boot,
        n_failed=n_failed,
        level=level,
        reject=p_value <= level,
        fit=fit,
    )
