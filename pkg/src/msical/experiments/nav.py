"""Planar strapdown Monte Carlo harness for fitted sensor models.

A synthetic ground-truth trajectory supplies noise-free IMU readings
(body-frame specific force and yaw rate).  Each Monte Carlo run adds a
distinct continuous chunk of sensor error to those readings, feeds them
to a linearized Kalman filter built from a fitted composite model
(white noise as measurement noise, AR1 and random-walk blocks as
augmented bias states), applies GNSS position fixes outside a
configured outage, and scores position and heading errors during the
final part of the outage.

The filter propagates its state with the estimated heading but its
covariance along the reference trajectory, so the gain and covariance
sequences depend only on (model, scenario).  They are computed once per
model and shared by all runs, which makes the per-run work a handful of
vectorized array operations per IMU step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DataError, DataExhaustedError, SizeError
from ..models import CompositeModel, simulate_path
from ..rng import substream
from .statespace import StateSpaceSpec, model_to_state_space

__all__ = ["NavMetrics", "NavScenario", "NoiseSource", "nav_eval"]

# Half-width of a centered 50% interval in standard deviations.
_Z50 = 0.6744897501960817
_NEES_LIMIT = 1e6
_GNSS_STREAM = 8002
_SOURCE_STREAM = 8003


@dataclass(frozen=True)
class NavScenario:
    """Trajectory, sensor timing, and outage layout for one evaluation."""

    waypoints: tuple
    speed: float = 10.0
    turn_rate: float = 0.3
    duration_s: float = 120.0
    imu_rate_hz: float = 100.0
    gnss_rate_hz: float = 1.0
    gnss_sigma: float = 0.025
    outage_start_s: float = 75.0
    outage_duration_s: float = 30.0
    eval_window_s: float = 15.0
    eval_tick_s: float = 0.5
    n_runs: int = 100
    init_pos_sigma: float | None = None  # defaults to gnss_sigma
    init_vel_sigma: float = 0.1
    init_heading_sigma: float = 0.01

    def validate(self) -> None:
        if len(self.waypoints) < 2:
            raise SizeError("need at least 2 waypoints")
        pts = np.asarray(self.waypoints, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise DataError("waypoints must be (x, y) pairs")
        if np.any(np.linalg.norm(np.diff(pts, axis=0), axis=1) == 0.0):
            raise DataError("adjacent waypoints must be distinct")
        for name in ("speed", "turn_rate", "imu_rate_hz", "gnss_rate_hz", "eval_tick_s"):
            if getattr(self, name) <= 0:
                raise DataError(f"{name} must be > 0")
        if self.gnss_sigma < 0:
            raise DataError("gnss_sigma must be >= 0")
        if self.n_runs < 1:
            raise SizeError("n_runs must be >= 1")
        outage_end = self.outage_start_s + self.outage_duration_s
        if not (0.0 <= self.outage_start_s and outage_end <= self.duration_s):
            raise DataError("outage must lie inside the trajectory duration")
        if self.eval_window_s > self.outage_duration_s:
            raise DataError("eval window must lie inside the outage")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration_s * self.imu_rate_hz))

    def to_dict(self) -> dict:
        return {
            "waypoints": [[float(x), float(y)] for x, y in self.waypoints],
            "speed": self.speed,
            "turn_rate": self.turn_rate,
            "duration_s": self.duration_s,
            "imu_rate_hz": self.imu_rate_hz,
            "gnss_rate_hz": self.gnss_rate_hz,
            "gnss_sigma": self.gnss_sigma,
            "outage_start_s": self.outage_start_s,
            "outage_duration_s": self.outage_duration_s,
            "eval_window_s": self.eval_window_s,
            "eval_tick_s": self.eval_tick_s,
            "n_runs": self.n_runs,
            "init_pos_sigma": self.init_pos_sigma,
            "init_vel_sigma": self.init_vel_sigma,
            "init_heading_sigma": self.init_heading_sigma,
        }


@dataclass(frozen=True)
class Trajectory:
    """Discrete ground truth and the noise-free IMU readings it implies."""

    dt: float
    pos: np.ndarray  # (n+1, 2)
    vel: np.ndarray  # (n+1, 2)
    psi: np.ndarray  # (n+1,)
    f_body: np.ndarray  # (n, 2)
    gyro: np.ndarray  # (n,)


def synthesize_trajectory(scenario: NavScenario) -> Trajectory:
    """Constant-speed waypoint path with rate-limited turns.

    The yaw-rate profile alternates cruise and constant-rate turn
    phases derived from the waypoint polyline; once the waypoints are
    exhausted the vehicle continues straight.  Truth is integrated with
    the same first-order updates the filter uses, so noise-free IMU
    readings reproduce it exactly.
    """
    scenario.validate()
    pts = np.asarray(scenario.waypoints, dtype=float)
    headings = np.arctan2(np.diff(pts[:, 1]), np.diff(pts[:, 0]))
    lengths = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    phases = [(lengths[0] / scenario.speed, 0.0)]
    for prev, cur, seg_len in zip(headings[:-1], headings[1:], lengths[1:]):
        turn = math.remainder(cur - prev, 2.0 * math.pi)
        if turn != 0.0:
            phases.append((abs(turn) / scenario.turn_rate, math.copysign(scenario.turn_rate, turn)))
        phases.append((seg_len / scenario.speed, 0.0))

    n = scenario.n_steps
    dt = 1.0 / scenario.imu_rate_hz
    psidot = np.zeros(n)
    k = 0
    for dur, rate in phases:
        span = min(int(round(dur / dt)), n - k)
        psidot[k : k + span] = rate
        k += span
        if k >= n:
            break

    psi = np.concatenate(([headings[0]], headings[0] + np.cumsum(psidot) * dt))
    vel = scenario.speed * np.column_stack((np.cos(psi), np.sin(psi)))
    pos = pts[0] + np.concatenate(
        (np.zeros((1, 2)), np.cumsum(vel[:-1] * dt, axis=0))
    )
    a_nav = np.diff(vel, axis=0) / dt
    cos_k, sin_k = np.cos(psi[:-1]), np.sin(psi[:-1])
    f_body = np.column_stack(
        (cos_k * a_nav[:, 0] + sin_k * a_nav[:, 1], -sin_k * a_nav[:, 0] + cos_k * a_nav[:, 1])
    )
    return Trajectory(dt=dt, pos=pos, vel=vel, psi=psi, f_body=f_body, gyro=psidot)


@dataclass(frozen=True)
class NoiseSource:
    """Per-channel sensor error records sliced into per-run chunks.

    ``channels`` holds the error signals for (specific force x, specific
    force y, yaw rate), each long enough for ``n_runs`` contiguous
    chunks of the scenario length.  Chunks are assumed to start at the
    record's origin, which matters only for drift blocks (their known
    ramp is subtracted using the global sample index).
    """

    label: str
    rate_hz: float
    channels: tuple

    @classmethod
    def from_models(
        cls,
        accel_model: CompositeModel,
        gyro_model: CompositeModel,
        n_total: int,
        rate_hz: float,
        seed: int,
        label: str,
        stream: tuple = (),
    ) -> "NoiseSource":
        """Simulate three error channels of ``n_total`` samples each."""
        chans = tuple(
            simulate_path(model, n_total, seed, stream=(_SOURCE_STREAM, *stream, c))
            for c, model in enumerate((accel_model, accel_model, gyro_model))
        )
        return cls(label=label, rate_hz=rate_hz, channels=chans)

    def chunks(self, n_runs: int, n_steps: int) -> tuple:
        """Reshape each channel into (n_runs, n_steps) contiguous chunks."""
        need = n_runs * n_steps
        out = []
        for c, chan in enumerate(self.channels):
            chan = np.asarray(chan, dtype=float)
            if chan.size < need:
                raise DataExhaustedError(
                    f"source {self.label!r} channel {c} has {chan.size} samples, "
                    f"needs {need} for {n_runs} runs of {n_steps}"
                )
            out.append(chan[:need].reshape(n_runs, n_steps))
        return tuple(out)


@dataclass(frozen=True)
class NavMetrics:
    """Aggregated outage errors for each (model, source) pair."""

    model_labels: tuple
    source_labels: tuple
    tick_times_s: np.ndarray
    median_pos_err: np.ndarray  # (M, S) meters
    median_heading_err: np.ndarray  # (M, S) radians
    coverage_pos: np.ndarray  # (M, S)
    coverage_heading: np.ndarray  # (M, S)
    rel_to_best_pos: np.ndarray  # (M, S) percent, best model at 0
    n_excluded: np.ndarray  # (M, S) runs dropped for NEES divergence
    pos_err_series: np.ndarray  # (M, S, n_ticks) per-tick median
    scenario: dict

    def to_dict(self) -> dict:
        return {
            "model_labels": list(self.model_labels),
            "source_labels": list(self.source_labels),
            "tick_times_s": [float(v) for v in self.tick_times_s],
            "median_pos_err": _listify(self.median_pos_err),
            "median_heading_err": _listify(self.median_heading_err),
            "coverage_pos": _listify(self.coverage_pos),
            "coverage_heading": _listify(self.coverage_heading),
            "rel_to_best_pos": _listify(self.rel_to_best_pos),
            "n_excluded": [[int(v) for v in row] for row in self.n_excluded],
            "pos_err_series": [_listify(m) for m in self.pos_err_series],
            "scenario": self.scenario,
        }


def _listify(arr) -> list:
    return [[float(v) for v in row] for row in np.asarray(arr)]


class _FilterDesign:
    """Per-model quantities shared by every run: gains and covariances."""

    def __init__(
        self,
        accel_spec: StateSpaceSpec,
        gyro_spec: StateSpaceSpec,
        scenario: NavScenario,
        traj: Trajectory,
        update_steps: np.ndarray,
        tick_steps: np.ndarray,
    ):
        self.accel_spec = accel_spec
        self.gyro_spec = gyro_spec
        na = len(accel_spec.bias_states)
        ng = len(gyro_spec.bias_states)
        self.na, self.ng = na, ng
        n_x = 5 + 2 * na + ng
        self.n_x = n_x
        dt = traj.dt

        # Bias layout: accel block m occupies states 5+2m (x), 5+2m+1 (y);
        # gyro block m occupies state 5+2*na+m.
        f_diag = np.ones(n_x)
        q_diag = np.zeros(n_x)
        q_diag[2] = q_diag[3] = accel_spec.wn_variance * dt * dt
        q_diag[4] = gyro_spec.wn_variance * dt * dt
        init = np.zeros(n_x)
        pos_sigma = scenario.init_pos_sigma
        if pos_sigma is None:
            pos_sigma = scenario.gnss_sigma
        init[0] = init[1] = pos_sigma**2
        init[2] = init[3] = scenario.init_vel_sigma**2
        init[4] = scenario.init_heading_sigma**2
        # A random-walk bias in a chunked record can start anywhere the
        # record has wandered to, so its initial variance is inflated to
        # the worst-case accumulated variance over the whole record.
        total_len = scenario.n_runs * scenario.n_steps
        for m, b in enumerate(accel_spec.bias_states):
            for col in (5 + 2 * m, 5 + 2 * m + 1):
                f_diag[col] = b.f
                q_diag[col] = b.q
                init[col] = b.init_var if np.isfinite(b.correlation_samples) else 4.0 * b.q * total_len
        for m, b in enumerate(gyro_spec.bias_states):
            col = 5 + 2 * na + m
            f_diag[col] = b.f
            q_diag[col] = b.q
            init[col] = b.init_var if np.isfinite(b.correlation_samples) else 4.0 * b.q * total_len
        self.f_diag = f_diag
        self.init_sigma = np.sqrt(init[:5])

        r_gnss = max(scenario.gnss_sigma**2, 1e-30) * np.eye(2)
        h = np.zeros((2, n_x))
        h[0, 0] = h[1, 1] = 1.0

        cos_k, sin_k = np.cos(traj.psi[:-1]), np.sin(traj.psi[:-1])
        fx, fy = traj.f_body[:, 0], traj.f_body[:, 1]
        # G_k = dR/dpsi @ f_body: heading error couples into acceleration.
        g_x = -sin_k * fx - cos_k * fy
        g_y = cos_k * fx - sin_k * fy

        update_set = {int(k): i for i, k in enumerate(update_steps)}
        tick_set = {int(k): i for i, k in enumerate(tick_steps)}
        p = np.diag(init)
        f_mat = np.diag(f_diag)
        f_mat[0, 2] = f_mat[1, 3] = dt
        eye = np.eye(n_x)
        gains = np.empty((len(update_steps), n_x, 2))
        sigma_ticks = np.empty((len(tick_steps), 3))  # pos x, pos y, heading
        core_inv = np.empty((len(tick_steps), 5, 5))
        n = scenario.n_steps
        for k in range(n + 1):
            t_idx = tick_set.get(k)
            if t_idx is not None:
                # Floors keep the noise-free sanity case well defined: a
                # collapsed covariance would otherwise score rounding
                # error as divergence.  Nanometer scale, so real cases
                # (sigma >= millimeters) are untouched.
                sigma_ticks[t_idx] = np.maximum(np.sqrt(np.diag(p)[[0, 1, 4]]), 1e-9)
                core_inv[t_idx] = np.linalg.inv(p[:5, :5] + 1e-18 * eye[:5, :5])
            u_idx = update_set.get(k)
            if u_idx is not None:
                s = h @ p @ h.T + r_gnss
                gain = np.linalg.solve(s.T, (p @ h.T).T).T
                gains[u_idx] = gain
                ikh = eye - gain @ h
                p = ikh @ p @ ikh.T + gain @ r_gnss @ gain.T
                p = 0.5 * (p + p.T)
            if k == n:
                break
            f_mat[2, 4] = dt * g_x[k]
            f_mat[3, 4] = dt * g_y[k]
            for m in range(na):
                f_mat[2, 5 + 2 * m] = -dt * cos_k[k]
                f_mat[2, 5 + 2 * m + 1] = dt * sin_k[k]
                f_mat[3, 5 + 2 * m] = -dt * sin_k[k]
                f_mat[3, 5 + 2 * m + 1] = -dt * cos_k[k]
            for m in range(ng):
                f_mat[4, 5 + 2 * na + m] = -dt
            p = f_mat @ p @ f_mat.T
            p[np.diag_indices(n_x)] += q_diag
        self.gains = gains
        self.sigma_ticks = sigma_ticks
        self.core_inv = core_inv


def _run_filter(design, traj, scenario, chunks, gnss_noise, init_err, update_steps, tick_steps):
    """Propagate all runs through the filter; returns per-tick errors.

    Returns (pos_err (ticks, R, 2), heading_err (ticks, R), nees (ticks, R)).
    """
    n_runs = scenario.n_runs
    dt = traj.dt
    na, ng = design.na, design.ng
    fx_n, fy_n, g_n = chunks
    gyro_cols = slice(2 * na, 2 * na + ng)
    x_cols = np.arange(0, 2 * na, 2)
    y_cols = x_cols + 1

    pos = traj.pos[0] + init_err[:, 0:2]
    vel = traj.vel[0] + init_err[:, 2:4]
    psi = traj.psi[0] + init_err[:, 4]
    bias = np.zeros((n_runs, 2 * na + ng))
    f_bias = design.f_diag[5:]

    d_f = design.accel_spec.drift_rate
    d_g = design.gyro_spec.drift_rate
    n_steps = scenario.n_steps
    run_offsets = np.arange(n_runs) * n_steps

    update_set = {int(k): i for i, k in enumerate(update_steps)}
    tick_set = {int(k): i for i, k in enumerate(tick_steps)}
    pos_err = np.empty((len(tick_steps), n_runs, 2))
    head_err = np.empty((len(tick_steps), n_runs))
    nees = np.empty((len(tick_steps), n_runs))

    for k in range(n_steps + 1):
        t_idx = tick_set.get(k)
        if t_idx is not None:
            dp = pos - traj.pos[k]
            dv = vel - traj.vel[k]
            dpsi = np.remainder(psi - traj.psi[k] + np.pi, 2.0 * np.pi) - np.pi
            pos_err[t_idx] = dp
            head_err[t_idx] = dpsi
            core = np.column_stack((dp, dv, dpsi))
            nees[t_idx] = np.einsum("ri,ij,rj->r", core, design.core_inv[t_idx], core)
        u_idx = update_set.get(k)
        if u_idx is not None:
            innov = traj.pos[k] + gnss_noise[u_idx] - pos
            dx = innov @ design.gains[u_idx].T
            pos += dx[:, 0:2]
            vel += dx[:, 2:4]
            psi += dx[:, 4]
            bias += dx[:, 5:]
        if k == n_steps:
            break
        g_idx = run_offsets + k
        f_meas_x = traj.f_body[k, 0] + fx_n[:, k] - d_f * (g_idx + 1)
        f_meas_y = traj.f_body[k, 1] + fy_n[:, k] - d_f * (g_idx + 1)
        gyro_meas = traj.gyro[k] + g_n[:, k] - d_g * (g_idx + 1)
        if na:
            f_meas_x = f_meas_x - bias[:, x_cols].sum(axis=1)
            f_meas_y = f_meas_y - bias[:, y_cols].sum(axis=1)
        if ng:
            gyro_meas = gyro_meas - bias[:, gyro_cols].sum(axis=1)
        c, s = np.cos(psi), np.sin(psi)
        pos += vel * dt
        vel = vel + dt * np.column_stack(
            (c * f_meas_x - s * f_meas_y, s * f_meas_x + c * f_meas_y)
        )
        psi = psi + dt * gyro_meas
        if bias.shape[1]:
            bias *= f_bias
    return pos_err, head_err, nees


def nav_eval(
    scenario: NavScenario,
    models: dict,
    sources: list,
    seed: int = 0,
) -> NavMetrics:
    """Score fitted models against noise sources on one trajectory.

    Parameters
    ----------
    scenario : NavScenario
        Trajectory, timing, outage, and Monte Carlo settings.
    models : dict
        ``label -> (accel_model, gyro_model)`` composite-model pairs;
        each is converted with ``model_to_state_space``.
    sources : list of NoiseSource
        Error records to inject; each must supply ``n_runs`` chunks.
    seed : int
        Root seed for GNSS noise and initial-state draws, which are
        shared across models so every model sees identical data.

    Returns
    -------
    NavMetrics
        Median errors, 50% interval coverages (median over ticks and
        axes), percent distance to the best model per source, and
        NEES-based exclusion counts.
    """
    scenario.validate()
    traj = synthesize_trajectory(scenario)
    rate = scenario.imu_rate_hz
    n_steps = scenario.n_steps

    gnss_step = int(round(rate / scenario.gnss_rate_hz))
    outage_lo = scenario.outage_start_s * rate
    outage_hi = (scenario.outage_start_s + scenario.outage_duration_s) * rate
    update_steps = np.array(
        [
            k
            for k in range(gnss_step, n_steps + 1, gnss_step)
            if not outage_lo <= k < outage_hi
        ]
    )
    outage_end_s = scenario.outage_start_s + scenario.outage_duration_s
    n_ticks = int(round(scenario.eval_window_s / scenario.eval_tick_s))
    tick_times = outage_end_s - scenario.eval_window_s + scenario.eval_tick_s * np.arange(
        1, n_ticks + 1
    )
    tick_steps = np.round(tick_times * rate).astype(int)

    model_labels = tuple(models)
    source_labels = tuple(s.label for s in sources)
    m_n, s_n = len(model_labels), len(source_labels)
    median_pos = np.empty((m_n, s_n))
    median_head = np.empty((m_n, s_n))
    cov_pos = np.empty((m_n, s_n))
    cov_head = np.empty((m_n, s_n))
    excluded = np.zeros((m_n, s_n), dtype=int)
    series = np.empty((m_n, s_n, n_ticks))

    designs = []
    for label in model_labels:
        accel_model, gyro_model = models[label]
        designs.append(
            _FilterDesign(
                model_to_state_space(accel_model, rate),
                model_to_state_space(gyro_model, rate),
                scenario,
                traj,
                update_steps,
                tick_steps,
            )
        )

    for s_idx, source in enumerate(sources):
        if source.rate_hz != rate:
            raise DataError(
                f"source {source.label!r} rate {source.rate_hz} Hz does not match "
                f"IMU rate {rate} Hz"
            )
        chunks = source.chunks(scenario.n_runs, n_steps)
        gnss_noise = scenario.gnss_sigma * substream(seed, _GNSS_STREAM, s_idx).normal(
            size=(len(update_steps), scenario.n_runs, 2)
        )
        init_draw = substream(seed, _GNSS_STREAM, s_idx, 1).normal(size=(scenario.n_runs, 5))
        for m_idx, design in enumerate(designs):
            init_err = init_draw * design.init_sigma
            pos_err, head_err, nees = _run_filter(
                design, traj, scenario, chunks, gnss_noise, init_err, update_steps, tick_steps
            )
            keep = ~(np.max(nees, axis=0) > _NEES_LIMIT)
            excluded[m_idx, s_idx] = int(np.sum(~keep))
            if not np.any(keep):
                median_pos[m_idx, s_idx] = np.nan
                median_head[m_idx, s_idx] = np.nan
                cov_pos[m_idx, s_idx] = np.nan
                cov_head[m_idx, s_idx] = np.nan
                series[m_idx, s_idx] = np.nan
                continue
            dp = pos_err[:, keep, :]
            dpsi = head_err[:, keep]
            norms = np.hypot(dp[..., 0], dp[..., 1])
            median_pos[m_idx, s_idx] = float(np.median(norms))
            median_head[m_idx, s_idx] = float(np.median(np.abs(dpsi)))
            series[m_idx, s_idx] = np.median(norms, axis=1)
            thr = _Z50 * design.sigma_ticks  # (ticks, 3)
            cov_axis = np.mean(
                np.abs(dp) <= thr[:, None, 0:2], axis=1
            )  # (ticks, 2)
            cov_pos[m_idx, s_idx] = float(np.median(cov_axis))
            cov_head[m_idx, s_idx] = float(
                np.median(np.mean(np.abs(dpsi) <= thr[:, None, 2], axis=1))
            )

    best = np.nanmin(median_pos, axis=0, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = 100.0 * (median_pos - best) / best
    rel = np.where(np.isfinite(rel), rel, 0.0)

    return NavMetrics(
        model_labels=model_labels,
        source_labels=source_labels,
        tick_times_s=tick_times,
        median_pos_err=median_pos,
        median_heading_err=median_head,
        coverage_pos=cov_pos,
        coverage_heading=cov_head,
        rel_to_best_pos=rel,
        n_excluded=excluded,
        pos_err_series=series,
        scenario=scenario.to_dict(),
    )
