"""Monte Carlo comparison of the averaging and averaged-WV estimators.

Each trial draws K parameter vectors from the population law G,
simulates one replicate per vector, and fits both estimators to the
replicate set.  Aggregated over B trials the two estimate clouds center
on different targets (theta_mean for the averaging estimator and
theta_zero for the averaged-WV estimator), which is the effect the
oracle targets quantify.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import NumericalError, SizeError
from ..fit import FitOptions, agmwm_fit, awv_fit
from ..models import InternalSensorModel, draw_parameters, simulate_path
from ..wavelet import default_depth, estimate_wv, estimate_wv_cov
from .oracles import OracleTargets, theta0_oracle

__all__ = ["StudyConfig", "StudyReport", "run_simulation_study"]

# Stream tags: parameter draws and path simulation are separated so that
# adding replicates or trials never perturbs earlier draws.
_DRAW_STREAM = 6001
_PATH_STREAM = 6002


@dataclass(frozen=True)
class StudyConfig:
    """Settings for one simulation study."""

    g: InternalSensorModel
    k: int = 6
    t: int = 100_000
    b: int = 100
    depth: int | None = None
    omega_mode: str = "identity"
    n_boot_cov: int = 100
    oracle_draws: int = 1000
    oracle_mode: str = "draws"
    seed: int = 0
    options: FitOptions = field(default_factory=FitOptions)

    def validate(self) -> None:
        if self.k < 1:
            raise SizeError(f"need at least 1 replicate, got k={self.k}")
        if self.t < 16:
            raise SizeError(f"replicate length too short: t={self.t}")
        if self.b < 1:
            raise SizeError(f"need at least 1 trial, got b={self.b}")

    def to_dict(self) -> dict:
        return {
            "g": self.g.to_dict(),
            "k": self.k,
            "t": self.t,
            "b": self.b,
            "depth": self.depth,
            "omega_mode": self.omega_mode,
            "n_boot_cov": self.n_boot_cov,
            "oracle_draws": self.oracle_draws,
            "oracle_mode": self.oracle_mode,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class StudyReport:
    """Estimate arrays per method plus the oracle targets."""

    config: dict
    param_names: tuple
    estimates: dict  # method -> (B, p) array with NaN rows for skipped trials
    skipped: dict  # method -> sorted trial indices
    targets: OracleTargets

    def median(self, method: str) -> np.ndarray:
        return np.nanmedian(self.estimates[method], axis=0)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "param_names": list(self.param_names),
            "estimates": {
                m: [[float(v) for v in row] for row in arr]
                for m, arr in self.estimates.items()
            },
            "skipped": {m: list(map(int, idx)) for m, idx in self.skipped.items()},
            "targets": self.targets.to_dict(),
        }


def run_simulation_study(config: StudyConfig) -> StudyReport:
    """Run B trials of K replicates each and fit both estimators.

    Replicates within a trial share the length ``t``; the common depth
    is ``min(13, floor(log2 t) - 1)`` unless ``depth`` narrows it.  When
    ``omega_mode`` needs WV covariances they are estimated per replicate
    by the moving-block bootstrap with ``n_boot_cov`` resamples.

    A trial in which an estimator fails to converge is recorded in
    ``skipped`` for that method and its estimate row is NaN; since a
    trial involves at most K+1 minimizations, a single failure already
    exceeds the 10% tolerance, so no partial trials are kept.
    """
    config.validate()
    g = config.g
    template = g.template
    p = template.p
    need_cov = config.omega_mode != "identity"
    depth = config.depth or default_depth(config.t)

    targets = theta0_oracle(
        g,
        depth=depth,
        n_draws=config.oracle_draws,
        mode=config.oracle_mode,
        seed=config.seed,
        options=config.options,
    )

    estimates = {m: np.full((config.b, p), np.nan) for m in ("AGMWM", "AWV")}
    skipped: dict = {m: [] for m in ("AGMWM", "AWV")}
    for trial in range(config.b):
        draws = draw_parameters(g, config.k, config.seed, stream=(_DRAW_STREAM, trial))
        wvs = []
        for i, model_i in enumerate(draws):
            x = simulate_path(model_i, config.t, config.seed, stream=(_PATH_STREAM, trial, i))
            wv = estimate_wv(x, depth=depth)
            if need_cov:
                cov = estimate_wv_cov(
                    x, wv.depth, n_boot=config.n_boot_cov, seed=config.seed
                )
                wv = replace(wv, cov=cov)
            wvs.append(wv)
        for method, fit_fn in (("AGMWM", agmwm_fit), ("AWV", awv_fit)):
            try:
                res = fit_fn(
                    wvs, template, omega_mode=config.omega_mode, options=config.options
                )
            except NumericalError:
                skipped[method].append(trial)
                continue
            estimates[method][trial] = res.theta

    return StudyReport(
        config=config.to_dict(),
        param_names=template.param_names(),
        estimates=estimates,
        skipped={m: sorted(v) for m, v in skipped.items()},
        targets=targets,
    )
