"""Population targets of the multi-replicate estimators.

For a population law G over parameter vectors, the averaging estimator
targets the mean parameter theta_circ = E[theta], while the averaged-WV
estimator targets

    theta_zero = argmin_theta || E[nu(vartheta)] - nu(theta) ||^2_Omega,

the best single model for the population-average wavelet variance.
When every block's WV is linear in its parameters the two coincide; the
AR1 block makes them differ.  This module computes both targets either
by Monte Carlo over G ("draws") or from analytic per-block expectations
("expected").
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError, SizeError
from ..fit import FitOptions, _canonical_model, _minimize_wv_distance
from ..models import Ar1, CompositeModel, InternalSensorModel, draw_parameters
from ..theory import theoretical_wv

__all__ = ["OracleTargets", "theta0_oracle"]

# Stream tag keeping oracle draws disjoint from study and test streams.
_ORACLE_STREAM = 5001


@dataclass(frozen=True)
class OracleTargets:
    """Population targets theta_zero (matched WV) and theta_mean (E[theta])."""

    theta_zero_model: CompositeModel
    theta_mean_model: CompositeModel
    se_theta_zero: np.ndarray
    n_draws: int
    mode: str
    depth: int
    omega_mode: str

    @property
    def theta_zero(self) -> np.ndarray:
        return self.theta_zero_model.flatten()

    @property
    def theta_mean(self) -> np.ndarray:
        return self.theta_mean_model.flatten()

    @property
    def param_names(self) -> tuple:
        return self.theta_zero_model.param_names()

    def to_dict(self) -> dict:
        return {
            "theta_zero": [float(v) for v in self.theta_zero],
            "theta_mean": [float(v) for v in self.theta_mean],
            "se_theta_zero": [float(v) for v in self.se_theta_zero],
            "param_names": list(self.param_names),
            "n_draws": self.n_draws,
            "mode": self.mode,
            "depth": self.depth,
            "omega_mode": self.omega_mode,
        }


def _fit_to_target(template, target_nu, depth, omega, options):
    taus = (1 << np.arange(1, depth + 1)).astype(float)
    theta, _, _ = _minimize_wv_distance(
        template, taus, omega, target_nu[None, :], np.ones(1), target_nu, options
    )
    return _canonical_model(template, theta)


def _expected_nu(g: InternalSensorModel, depth: int, quad_nodes: int) -> np.ndarray:
    """E[nu(vartheta)] over G from per-block expectations.

    Blocks whose WV is linear in the parameter contribute nu at the
    parameter mean; the drift WV is quadratic in omega, so its second
    moment enters; the AR1 expectation is a one-dimensional integral
    over phi, evaluated with Gauss-Legendre quadrature against the
    rescaled-Beta density.
    """
    total = np.zeros(depth)
    offset = 0
    for block in g.template.blocks:
        n_par = len(block.param_names)
        margs = g.marginals[offset : offset + n_par]
        offset += n_par
        if isinstance(block, Ar1):
            phi_m, eta_m = margs
            if phi_m.upper == phi_m.lower:
                unit = theoretical_wv(
                    CompositeModel((Ar1(phi_m.lower, 1.0),)), depth
                ).nu
            else:
                from scipy.stats import beta as beta_dist

                z, w = np.polynomial.legendre.leggauss(quad_nodes)
                width = phi_m.upper - phi_m.lower
                phis = phi_m.lower + 0.5 * width * (z + 1.0)
                pdf = beta_dist.pdf((phis - phi_m.lower) / width, phi_m.a, phi_m.b) / width
                wq = 0.5 * width * w * pdf
                wq = wq / wq.sum()  # exactness on constants
                unit = np.zeros(depth)
                for phi_q, w_q in zip(phis, wq):
                    unit += w_q * theoretical_wv(
                        CompositeModel((Ar1(phi_q, 1.0),)), depth
                    ).nu
            total += eta_m.mean * unit
        elif block.tag == "DR":
            unit = theoretical_wv(
                CompositeModel((block.with_params([1.0]),)), depth
            ).nu
            total += margs[0].second_moment * unit
        else:
            # WV linear in the single variance parameter.
            mean_block = block.with_params([margs[0].mean])
            total += theoretical_wv(CompositeModel((mean_block,)), depth).nu
    return total


def theta0_oracle(
    g: InternalSensorModel,
    depth: int = 13,
    *,
    omega: np.ndarray | None = None,
    n_draws: int = 1000,
    mode: str = "draws",
    n_batches: int = 10,
    quad_nodes: int = 128,
    seed: int = 0,
    options: FitOptions | None = None,
) -> OracleTargets:
    """Compute the population targets of the averaging and AWV estimators.

    In "draws" mode the population-average WV is estimated by Monte
    Carlo: ``n_draws`` parameter vectors are drawn from G, their exact
    theoretical WVs averaged, and theta_zero fitted to that average.
    Minimizing the average squared distance over the draws is the same
    problem, since the two objectives differ by a theta-free constant.
    The reported standard error comes from refitting ``n_batches``
    consecutive batches of draws.

    In "expected" mode the population-average WV is computed analytically
    (AR1 blocks by quadrature over phi) and the standard errors are zero.

    Parameters
    ----------
    g : InternalSensorModel
        Population law of per-replicate parameters.
    depth : int
        Number of WV levels to match.
    omega : ndarray, optional
        Weighting matrix; identity when omitted.
    n_draws : int
        Monte Carlo draws in "draws" mode (>= 100).
    mode : str
        "draws" or "expected".
    n_batches : int
        Batches for the Monte Carlo standard error.
    quad_nodes : int
        Gauss-Legendre nodes for the AR1 expectation in "expected" mode.
    seed : int
        Root seed for the draws.
    options : FitOptions, optional
        Optimizer settings for the target fits.
    """
    if mode not in ("draws", "expected"):
        raise DataError(f"mode must be 'draws' or 'expected', got {mode!r}")
    options = options or FitOptions()
    template = g.template
    om = np.eye(depth) if omega is None else np.asarray(omega, dtype=float)
    if om.shape != (depth, depth):
        raise SizeError(f"omega must be {depth}x{depth}, got {om.shape}")
    omega_mode = "identity" if omega is None else "explicit"

    if mode == "expected":
        target = _expected_nu(g, depth, quad_nodes)
        model_zero = _fit_to_target(template, target, depth, om, options)
        se = np.zeros(template.p)
        n_used = 0
    else:
        if n_draws < 100:
            raise SizeError(f"n_draws must be >= 100, got {n_draws}")
        draws = draw_parameters(g, n_draws, seed, stream=(_ORACLE_STREAM,))
        nus = np.vstack([theoretical_wv(m, depth).nu for m in draws])
        model_zero = _fit_to_target(template, nus.mean(axis=0), depth, om, options)
        per_batch = []
        batch_edges = np.linspace(0, n_draws, n_batches + 1).astype(int)
        for lo, hi in zip(batch_edges[:-1], batch_edges[1:]):
            m = _fit_to_target(template, nus[lo:hi].mean(axis=0), depth, om, options)
            per_batch.append(m.flatten())
        se = np.std(np.vstack(per_batch), axis=0, ddof=1) / np.sqrt(n_batches)
        n_used = n_draws

    return OracleTargets(
        theta_zero_model=model_zero,
        theta_mean_model=g.mean_model(),
        se_theta_zero=se,
        n_draws=n_used,
        mode=mode,
        depth=depth,
        omega_mode=omega_mode,
    )
