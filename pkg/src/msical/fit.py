"""Moment-matching estimators on wavelet variances.

Single-replicate fits minimize the weighted quadratic distance between
the estimated and the model-implied wavelet-variance vectors.  For K
replicates three estimators are provided:

* ``agmwm_fit``: fit each replicate separately, then average the
  parameter estimates with the replicate weights.
* ``awv_fit``: average the wavelet variances first, then fit once.
* ``msgmwm_fit``: minimize the weighted sum of per-replicate distances
  directly.  Algebraically this has the same minimizer as ``awv_fit``;
  it is kept as an independent code path so the equivalence can be
  checked rather than assumed.

All optimizers run a multi-start Nelder-Mead simplex on transformed
parameters (log for positive parameters, scaled logit for AR1 phi), so
no derivatives of the objective are required.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit

from .errors import (
    ConditioningError,
    ConvergenceError,
    DegenerateWeightsError,
    ShapeError,
    SizeError,
    UnderIdentifiedError,
)
from .models import Ar1, CompositeModel
from .theory import WVEvaluator, theoretical_wv, wv_jacobian
from .wavelet import WVEstimate

__all__ = [
    "WeightScheme",
    "FitOptions",
    "FitResult",
    "compute_weights",
    "resolve_omega",
    "gmwm_fit",
    "agmwm_fit",
    "awv_fit",
    "msgmwm_fit",
    "asymptotic_covariance",
]

OMEGA_MODES = ("identity", "diag_inv_var", "inv_var", "averaged")


# ---------------------------------------------------------------------------
# Weights and Omega


@dataclass(frozen=True)
class WeightScheme:
    """Normalized replicate weights w_i = d_i T_i / sum_j d_j T_j."""

    weights: np.ndarray
    concentrated: bool = False

    @property
    def k(self) -> int:
        return self.weights.size


def compute_weights(durations, factors=None) -> WeightScheme:
    """Duration-proportional weights with optional quality factors.

    Raw weights are d_i * T_i / sum_j T_j, then renormalized to sum to
    one.  A warning is raised (and flagged) when a single replicate
    carries more than 10/K of the total weight.
    """
    t = np.asarray(durations, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ShapeError("durations must be a non-empty 1-D sequence")
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise DegenerateWeightsError(f"durations must be finite and >= 0, got {t}")
    if factors is None:
        d = np.ones_like(t)
    else:
        d = np.asarray(factors, dtype=float)
        if d.shape != t.shape:
            raise ShapeError("factors must match durations in length")
        if np.any(d < 0) or not np.all(np.isfinite(d)):
            raise DegenerateWeightsError(f"factors must be finite and >= 0, got {d}")
    raw = d * t
    total = raw.sum()
    if total <= 0.0:
        raise DegenerateWeightsError("all replicate weights are zero")
    w = raw / total
    concentrated = bool(w.max() > 10.0 / w.size)
    if concentrated:
        warnings.warn(
            f"replicate weights are concentrated: max weight {w.max():.3g} "
            f"exceeds 10/K = {10.0 / w.size:.3g}",
            UserWarning,
            stacklevel=2,
        )
    return WeightScheme(weights=w, concentrated=concentrated)


def _regularized_inverse(v: np.ndarray) -> np.ndarray:
    """Pseudo-inverse with eigenvalues floored at 1e-12 * trace / J."""
    v = 0.5 * (v + v.T)
    trace = float(np.trace(v))
    if not np.isfinite(trace) or trace <= 0.0:
        raise ConditioningError("covariance matrix has non-positive trace")
    floor = 1e-12 * trace / v.shape[0]
    eigvals, eigvecs = np.linalg.eigh(v)
    return (eigvecs / np.maximum(eigvals, floor)) @ eigvecs.T


def resolve_omega(mode: str, covs=None, weights: WeightScheme | None = None, depth: int | None = None) -> np.ndarray:
    """Build the weighting matrix Omega for a given mode.

    ``identity`` needs only ``depth``.  ``diag_inv_var`` averages the
    reciprocal diagonal variances; ``inv_var`` inverts the weighted
    average covariance; ``averaged`` averages the per-replicate
    regularized inverses.  All modes symmetrize their output.
    """
    if mode == "identity":
        if depth is None:
            raise ShapeError("identity mode needs the number of scales")
        return np.eye(depth)
    if mode not in OMEGA_MODES:
        raise ShapeError(f"unknown omega mode {mode!r}; choose from {OMEGA_MODES}")
    if not covs:
        raise ShapeError(f"omega mode {mode!r} needs per-replicate covariance matrices")
    covs = [np.asarray(c, dtype=float) for c in covs]
    j = covs[0].shape[0]
    for c in covs:
        if c.shape != (j, j):
            raise ShapeError("all covariance matrices must be square with equal size")
    if weights is None:
        w = np.full(len(covs), 1.0 / len(covs))
    else:
        w = weights.weights
        if w.size != len(covs):
            raise ShapeError("weights and covariances disagree in length")
    if mode == "diag_inv_var":
        trace_floor = [1e-12 * max(np.trace(c), 0.0) / j for c in covs]
        diags = [np.maximum(np.diag(c), max(f, 1e-300)) for c, f in zip(covs, trace_floor)]
        return np.diag(sum(wi / d for wi, d in zip(w, diags)))
    if mode == "inv_var":
        vbar = sum(wi * c for wi, c in zip(w, covs))
        return _regularized_inverse(vbar)
    # averaged: weighted mean of per-replicate inverses
    omega = sum(wi * _regularized_inverse(c) for wi, c in zip(w, covs))
    return 0.5 * (omega + omega.T)


# ---------------------------------------------------------------------------
# Parameter transforms


@dataclass(frozen=True)
class FitOptions:
    """Knobs for the multi-start simplex optimizer."""

    n_starts: int = 10
    seed: int = 0
    phi_box: tuple = (0.9, 0.99999)
    init_thetas: tuple = ()  # extra warm starts in natural parameters
    jitter: float = 1.0
    maxiter_factor: int = 400  # maxiter = factor * p per start
    xatol: float = 1e-7
    fatol: float = 1e-14
    polish: bool = True
    polish_xatol: float = 1e-11
    polish_fatol: float = 1e-22
    refine_steps: int = 3  # Gauss-Newton passes after the simplex stages


class _Transform:
    """Bijection between natural parameters and unconstrained space.

    Positive parameters go through log; AR1 phi goes through a scaled
    logit on ``phi_box``.  The logit argument is clipped away from 0/1
    so round trips never produce infinities.
    """

    def __init__(self, template: CompositeModel, phi_box: tuple):
        lo, hi = float(phi_box[0]), float(phi_box[1])
        if not (0.0 < lo < hi < 1.0):
            raise ShapeError(f"phi_box must satisfy 0 < lo < hi < 1, got {phi_box}")
        self.lo, self.hi = lo, hi
        self.is_phi = np.zeros(template.p, dtype=bool)
        k = 0
        for block in template.blocks:
            for name in block.param_names:
                if isinstance(block, Ar1) and name == "phi":
                    self.is_phi[k] = True
                k += 1

    def to_z(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        z = np.empty_like(theta)
        pos = ~self.is_phi
        z[pos] = np.log(theta[pos])
        if self.is_phi.any():
            frac = (theta[self.is_phi] - self.lo) / (self.hi - self.lo)
            z[self.is_phi] = logit(np.clip(frac, 1e-12, 1.0 - 1e-12))
        return z

    def to_theta(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        theta = np.empty_like(z)
        pos = ~self.is_phi
        theta[pos] = np.exp(z[pos])
        if self.is_phi.any():
            theta[self.is_phi] = self.lo + (self.hi - self.lo) * expit(z[self.is_phi])
        return theta

    def clip_phi(self, value: float) -> float:
        span = self.hi - self.lo
        return float(np.clip(value, self.lo + 1e-6 * span, self.hi - 1e-6 * span))


# ---------------------------------------------------------------------------
# Heuristic starting point


def _heuristic_theta(template: CompositeModel, nu: np.ndarray, taus: np.ndarray, tf: _Transform) -> np.ndarray:
    """Crude but scale-aware initial parameters from the WV profile.

    White-ish power is read off the first scale, random-walk power off
    the last scale, and each AR1 elbow off the largest residual after
    removing those trends.  The result only needs to land in the basin
    of attraction; jittered restarts cover the rest.
    """
    nu = np.maximum(nu, 1e-300)
    j_count = nu.size
    floor = 1e-12 * float(np.max(nu))
    tags = [b.tag for b in template.blocks]
    has_wn, has_qn = "WN" in tags, "QN" in tags
    residual = nu.copy()
    theta = []
    # First pass: blocks identified by the profile ends.
    scale1_split = 1.0 + (1.0 if (has_wn and has_qn) else 0.0)
    assigned = {}
    for i, block in enumerate(template.blocks):
        if block.tag == "WN":
            assigned[i] = (taus[0] * nu[0] / scale1_split,)
        elif block.tag == "QN":
            assigned[i] = (taus[0] ** 2 * nu[0] / (3.0 * scale1_split),)
        elif block.tag == "RW":
            assigned[i] = (12.0 * nu[-1] / taus[-1],)
        elif block.tag == "DR":
            assigned[i] = (4.0 * math.sqrt(nu[-1]) / taus[-1],)
    for i, values in assigned.items():
        single = CompositeModel((template.blocks[i].with_params(values),))
        residual = residual - WVEvaluator(single, j_count)(np.asarray(values))
    residual = np.maximum(residual, floor)
    # Second pass: AR1 elbows on what is left.
    ar1_indices = [i for i, b in enumerate(template.blocks) if b.tag == "AR1"]
    n_ar1 = len(ar1_indices)
    if n_ar1:
        elbow = int(np.argmax(residual))
        for rank, i in enumerate(ar1_indices):
            # Spread multiple AR1 components over neighbouring scales.
            j_star = int(np.clip(elbow - rank, 0, j_count - 1))
            phi0 = tf.clip_phi(1.0 - 1.0 / taus[j_star])
            unit = CompositeModel((Ar1(phi0, 1.0),))
            shape = WVEvaluator(unit, j_count)(np.array([phi0, 1.0]))
            eta0 = max(residual[j_star] / max(shape[j_star], 1e-300), 1e-300)
            assigned[i] = (phi0, eta0)
    for i, block in enumerate(template.blocks):
        theta.extend(assigned.get(i, block.params()))
    return np.asarray(theta, dtype=float)


# ---------------------------------------------------------------------------
# Core optimizer


def _canonical_model(template: CompositeModel, theta: np.ndarray) -> CompositeModel:
    """Rebuild the fitted model, restoring the descending-phi ordering."""
    from .models import PHI_GAP

    blocks = []
    pos = 0
    for block in template.blocks:
        k = len(block.param_names)
        blocks.append(block.with_params(theta[pos : pos + k]))
        pos += k
    ar1 = sorted((b for b in blocks if isinstance(b, Ar1)), key=lambda b: -b.phi)
    for a, b in zip(ar1, ar1[1:]):
        if a.phi - b.phi <= PHI_GAP:
            raise ConvergenceError(
                "two AR1 components collapsed onto the same phi; "
                "the template is over-parameterized for this signal"
            )
    it = iter(ar1)
    ordered = tuple(next(it) if isinstance(b, Ar1) else b for b in blocks)
    return CompositeModel(ordered)


def _run_simplex(objective, z0: np.ndarray, xatol: float, fatol: float, maxiter: int, spread: float):
    simplex = np.vstack([z0] + [z0 + spread * np.eye(z0.size)[k] for k in range(z0.size)])
    return minimize(
        objective,
        z0,
        method="Nelder-Mead",
        options={
            "initial_simplex": simplex,
            "xatol": xatol,
            "fatol": fatol,
            "maxiter": maxiter,
            "maxfev": 4 * maxiter,
            "adaptive": z0.size > 3,
        },
    )


def _gauss_newton_refine(
    evaluator: WVEvaluator,
    template: CompositeModel,
    omega: np.ndarray,
    nu_bar: np.ndarray,
    theta: np.ndarray,
    objective_theta,
    obj: float,
    tf: "_Transform",
    n_steps: int,
):
    """Polish the simplex solution with damped Gauss-Newton steps.

    The weighted multi-target objective has gradient proportional to
    A' Omega (nu_bar - nu(theta)), so the step direction only needs the
    weighted-average target.  Steps are accepted only when they stay in
    the transform's domain and strictly decrease the objective; for
    templates whose nu is linear in theta a single step lands on the
    closed-form optimum.
    """
    is_phi = np.array([name.endswith(".phi") for name in template.param_names()])

    def in_domain(cand: np.ndarray) -> bool:
        if not np.all(np.isfinite(cand)) or not np.all(cand > 0.0):
            return False
        phis = cand[is_phi]
        return bool(np.all((phis >= tf.lo) & (phis <= tf.hi)))

    for _ in range(n_steps):
        jac = evaluator.jacobian(theta)
        h = jac.T @ omega @ jac
        d = np.sqrt(np.diag(h))
        if not np.all(np.isfinite(d)) or np.any(d <= 0.0):
            break
        hs = h / np.outer(d, d)
        g = jac.T @ omega @ (nu_bar - evaluator(theta))
        try:
            delta = np.linalg.solve(hs, g / d) / d
        except np.linalg.LinAlgError:
            break
        step = 1.0
        improved = False
        while step > 1e-4:
            cand = theta + step * delta
            if in_domain(cand):
                val = objective_theta(cand)
                # Near the optimum the float objective cannot resolve the
                # improvement, but the step (built from residuals, not
                # objective differences) is still exact; allow round-off.
                if val <= obj * (1.0 + 1e-12):
                    theta, obj, improved = cand, val, True
                    break
            step *= 0.5
        if not improved:
            break
    return theta, obj


def _minimize_wv_distance(
    template: CompositeModel,
    taus: np.ndarray,
    omega: np.ndarray,
    targets: np.ndarray,
    target_weights: np.ndarray,
    start_nu: np.ndarray,
    options: FitOptions,
):
    """Shared engine: minimize sum_i w_i (nu_i - nu(theta))' Omega (nu_i - nu(theta)).

    ``targets`` is (K, J); the single-target case passes K=1, w=(1,).
    Starts are always derived from ``start_nu`` so that estimators that
    must agree can be launched from identical points.
    """
    depth = taus.size
    p = template.p
    if p > depth:
        raise UnderIdentifiedError(f"{p} parameters but only {depth} scales")
    evaluator = WVEvaluator(template, depth)
    tf = _Transform(template, options.phi_box)

    scale = float(start_nu @ omega @ start_nu)
    if not np.isfinite(scale) or scale <= 0.0:
        scale = 1.0

    def objective(z):
        nu_model = evaluator(tf.to_theta(z))
        resid = targets - nu_model
        value = float(np.einsum("i,ij,jk,ik->", target_weights, resid, omega, resid))
        return value / scale

    theta0 = _heuristic_theta(template, start_nu, taus, tf)
    z0 = tf.to_z(theta0)
    from .rng import substream

    rng = substream(options.seed, 91)
    starts = [tf.to_z(np.asarray(theta, dtype=float)) for theta in options.init_thetas]
    starts.append(z0)
    while len(starts) < options.n_starts:
        starts.append(z0 + options.jitter * rng.normal(size=p))

    maxiter = options.maxiter_factor * p
    best = None
    start_values = []
    nfev = 0
    for z_init in starts:
        res = _run_simplex(objective, z_init, options.xatol, options.fatol, maxiter, spread=0.5)
        nfev += res.nfev
        start_values.append(float(objective(z_init)))
        if best is None or res.fun < best.fun:
            best = res
    if best is None or not np.isfinite(best.fun):
        raise ConvergenceError("no simplex start produced a finite objective")
    if options.polish:
        res = _run_simplex(objective, best.x, options.polish_xatol, options.polish_fatol, 4 * maxiter, spread=0.02)
        nfev += res.nfev
        if res.fun <= best.fun:
            best = res
    theta_hat = tf.to_theta(best.x)
    best_fun = float(best.fun)
    if options.refine_steps > 0:
        w_total = float(target_weights.sum())
        nu_bar = (target_weights @ targets) / w_total if w_total > 0.0 else targets[0]

        def objective_theta(theta):
            resid = targets - evaluator(theta)
            return float(np.einsum("i,ij,jk,ik->", target_weights, resid, omega, resid)) / scale

        theta_hat, best_fun = _gauss_newton_refine(
            evaluator, template, omega, nu_bar, theta_hat, objective_theta, best_fun, tf, options.refine_steps
        )
    diagnostics = {
        "n_starts": len(starts),
        "nfev": int(nfev),
        "start_objectives": [v * scale for v in start_values],
        "objective_scale": scale,
    }
    return theta_hat, best_fun * scale, diagnostics


# ---------------------------------------------------------------------------
# Sandwich covariance


def _sandwich(model: CompositeModel, omega: np.ndarray, vbar: np.ndarray, depth: int) -> np.ndarray:
    """H^-1 A' Omega V Omega A H^-1 with a column-equilibrated solve.

    The parameters span many orders of magnitude, so H = A' Omega A is
    rescaled to unit diagonal before inversion; its condition number is
    checked there, where it reflects actual rank deficiency instead of
    units.
    """
    a, _ = wv_jacobian(model, depth)
    h = a.T @ omega @ a
    d = np.sqrt(np.diag(h))
    if not np.all(np.isfinite(d)) or np.any(d <= 0.0):
        raise ConditioningError("H = A' Omega A has a non-positive diagonal")
    hs = h / np.outer(d, d)
    if np.linalg.cond(hs) > 1e12:
        raise ConditioningError("H = A' Omega A is numerically singular")
    m = a.T @ omega @ vbar @ omega @ a
    ms = m / np.outer(d, d)
    inner = np.linalg.solve(hs, np.linalg.solve(hs, ms).T)
    lam = inner / np.outer(d, d)
    return 0.5 * (lam + lam.T)


def asymptotic_covariance(
    model: CompositeModel,
    covs,
    weights: WeightScheme | None,
    omega: np.ndarray,
    depth: int,
) -> np.ndarray:
    """Plug-in covariance H^-1 A' Omega Vbar Omega A H^-1 at ``model``.

    ``covs`` are per-replicate covariance estimates of the WV vectors;
    Vbar is their weighted average.  The result is normalized so that
    Cov(theta_hat) is approximately Lambda * sum_i w_i**2 (= Lambda / K
    for equal weights).
    """
    covs = [np.asarray(c, dtype=float) for c in covs]
    if not covs:
        raise ShapeError("need at least one covariance matrix")
    if weights is None:
        w = np.full(len(covs), 1.0 / len(covs))
    else:
        w = weights.weights
    vbar = sum(wi * c for wi, c in zip(w, covs))
    return _sandwich(model, omega, vbar, depth)


# ---------------------------------------------------------------------------
# Public estimators


@dataclass
class FitResult:
    """Outcome of a wavelet-variance moment fit."""

    method: str
    model: CompositeModel
    theta: np.ndarray
    objective: float
    implied_wv: object
    omega_mode: str
    weights: np.ndarray | None = None
    lambda_hat: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)
    per_replicate: list | None = None

    def to_dict(self) -> dict:
        out = {
            "method": self.method,
            "model": self.model.to_dict(),
            "theta": [float(v) for v in self.theta],
            "param_names": list(self.model.param_names()),
            "objective": float(self.objective),
            "omega_mode": self.omega_mode,
            "implied_wv": self.implied_wv.to_dict(),
            "diagnostics": {
                k: (int(v) if isinstance(v, (int, np.integer)) else v)
                for k, v in self.diagnostics.items()
                if k in ("n_starts", "nfev")
            },
        }
        if self.weights is not None:
            out["weights"] = [float(v) for v in self.weights]
        if self.lambda_hat is not None:
            out["lambda_hat"] = [[float(v) for v in row] for row in self.lambda_hat]
        if self.per_replicate is not None:
            out["per_replicate"] = [r.to_dict() for r in self.per_replicate]
        return out


def _single_omega(mode: str, wv: WVEstimate, omega):
    if omega is not None:
        return np.asarray(omega, dtype=float)
    covs = [wv.cov] if wv.cov is not None else None
    return resolve_omega(mode, covs=covs, weights=None, depth=wv.depth)


def gmwm_fit(
    wv: WVEstimate,
    template: CompositeModel,
    omega_mode: str = "identity",
    omega: np.ndarray | None = None,
    options: FitOptions | None = None,
) -> FitResult:
    """Fit one replicate by minimizing (nu_hat - nu(theta))' Omega (nu_hat - nu(theta))."""
    options = options or FitOptions()
    om = _single_omega(omega_mode, wv, omega)
    taus = np.asarray(wv.taus, dtype=float)
    theta, obj, diag = _minimize_wv_distance(
        template,
        taus,
        om,
        targets=wv.nu[None, :],
        target_weights=np.ones(1),
        start_nu=wv.nu,
        options=options,
    )
    model = _canonical_model(template, theta)
    lam = None
    if wv.cov is not None:
        lam = _sandwich(model, om, wv.cov, wv.depth)
    return FitResult(
        method="GMWM",
        model=model,
        theta=model.flatten(),
        objective=obj,
        implied_wv=theoretical_wv(model, wv.depth),
        omega_mode=omega_mode if omega is None else "explicit",
        lambda_hat=lam,
        diagnostics=diag,
    )


def _common_depth(wvs) -> int:
    if not wvs:
        raise SizeError("need at least one replicate")
    return min(wv.depth for wv in wvs)


def _align(wvs, depth: int):
    nus = np.vstack([wv.nu[:depth] for wv in wvs])
    covs = [wv.cov[:depth, :depth] for wv in wvs] if all(wv.cov is not None for wv in wvs) else None
    return nus, covs


def _resolve_multi(wvs, weights, omega_mode, omega, factors=None):
    depth = _common_depth(wvs)
    nus, covs = _align(wvs, depth)
    if weights is None:
        weights = compute_weights([wv.n_samples for wv in wvs], factors)
    if weights.k != len(wvs):
        raise ShapeError("weights and replicates disagree in length")
    if omega is not None:
        om = np.asarray(omega, dtype=float)
    else:
        om = resolve_omega(omega_mode, covs=covs, weights=weights, depth=depth)
    return depth, nus, covs, weights, om


def agmwm_fit(
    wvs,
    template: CompositeModel,
    weights: WeightScheme | None = None,
    omega_mode: str = "identity",
    omega: np.ndarray | None = None,
    options: FitOptions | None = None,
) -> FitResult:
    """Average of per-replicate fits (estimates the mean parameter).

    Each replicate is fitted on the common scale range with the shared
    Omega; the parameter estimates are averaged with the replicate
    weights in natural space.  ``lambda_hat`` is the weighted average
    of the per-replicate sandwich covariances (when WV covariances are
    available); Cov(theta_hat) is approximately lambda_hat * sum w_i^2.
    """
    options = options or FitOptions()
    depth, nus, covs, weights, om = _resolve_multi(wvs, weights, omega_mode, omega)
    taus = (1 << np.arange(1, depth + 1)).astype(float)
    fits = []
    for i in range(nus.shape[0]):
        theta, obj, diag = _minimize_wv_distance(
            template, taus, om, nus[i][None, :], np.ones(1), nus[i], options
        )
        model_i = _canonical_model(template, theta)
        lam_i = _sandwich(model_i, om, covs[i], depth) if covs is not None else None
        fits.append(
            FitResult(
                method="GMWM",
                model=model_i,
                theta=model_i.flatten(),
                objective=obj,
                implied_wv=theoretical_wv(model_i, depth),
                omega_mode=omega_mode if omega is None else "explicit",
                lambda_hat=lam_i,
                diagnostics=diag,
            )
        )
    w = weights.weights
    theta_bar = np.sum([wi * f.theta for wi, f in zip(w, fits)], axis=0)
    model = _canonical_model(template, theta_bar)
    evaluator = WVEvaluator(template, depth)
    resid = nus - evaluator(model.flatten())
    objective = float(np.einsum("i,ij,jk,ik->", w, resid, om, resid))
    lam = None
    if covs is not None:
        lam = np.sum([wi * f.lambda_hat for wi, f in zip(w, fits)], axis=0)
    return FitResult(
        method="AGMWM",
        model=model,
        theta=model.flatten(),
        objective=objective,
        implied_wv=theoretical_wv(model, depth),
        omega_mode=omega_mode if omega is None else "explicit",
        weights=w,
        lambda_hat=lam,
        diagnostics={"n_starts": options.n_starts, "nfev": sum(f.diagnostics["nfev"] for f in fits)},
        per_replicate=fits,
    )


def awv_fit(
    wvs,
    template: CompositeModel,
    weights: WeightScheme | None = None,
    omega_mode: str = "identity",
    omega: np.ndarray | None = None,
    options: FitOptions | None = None,
) -> FitResult:
    """Fit the weighted average WV vector (estimates the matched parameter)."""
    options = options or FitOptions()
    depth, nus, covs, weights, om = _resolve_multi(wvs, weights, omega_mode, omega)
    taus = (1 << np.arange(1, depth + 1)).astype(float)
    nu_bar = weights.weights @ nus
    theta, obj, diag = _minimize_wv_distance(
        template, taus, om, nu_bar[None, :], np.ones(1), nu_bar, options
    )
    model = _canonical_model(template, theta)
    lam = None
    if covs is not None:
        lam = asymptotic_covariance(model, covs, weights, om, depth)
    return FitResult(
        method="AWV",
        model=model,
        theta=model.flatten(),
        objective=obj,
        implied_wv=theoretical_wv(model, depth),
        omega_mode=omega_mode if omega is None else "explicit",
        weights=weights.weights,
        lambda_hat=lam,
        diagnostics=diag,
    )


def msgmwm_fit(
    wvs,
    template: CompositeModel,
    weights: WeightScheme | None = None,
    omega_mode: str = "identity",
    omega: np.ndarray | None = None,
    options: FitOptions | None = None,
) -> FitResult:
    """Minimize the weighted sum of per-replicate WV distances directly.

    Reports the full weighted-sum objective; its minimizer coincides
    with :func:`awv_fit` (the two objectives differ by a constant), and
    both are launched from identical multi-starts derived from the
    average WV so the numerical agreement can be verified externally.
    """
    options = options or FitOptions()
    depth, nus, covs, weights, om = _resolve_multi(wvs, weights, omega_mode, omega)
    taus = (1 << np.arange(1, depth + 1)).astype(float)
    nu_bar = weights.weights @ nus
    theta, obj, diag = _minimize_wv_distance(
        template, taus, om, nus, weights.weights, nu_bar, options
    )
    model = _canonical_model(template, theta)
    lam = None
    if covs is not None:
        lam = asymptotic_covariance(model, covs, weights, om, depth)
    return FitResult(
        method="MSGMWM",
        model=model,
        theta=model.flatten(),
        objective=obj,
        implied_wv=theoretical_wv(model, depth),
        omega_mode=omega_mode if omega is None else "explicit",
        weights=weights.weights,
        lambda_hat=lam,
        diagnostics=diag,
    )
