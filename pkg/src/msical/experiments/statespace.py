"""Mapping from composite noise models to Kalman-filter augmentations.

A fitted sensor-error model enters a navigation filter in three ways:
the white-noise block sets the measurement-noise variance, each AR1 or
random-walk block becomes one augmented first-order bias state, and a
drift block becomes a deterministic known-rate bias that is subtracted
during mechanization rather than estimated.  Quantization noise has no
finite-dimensional Markov representation, so it is rejected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import UnsupportedBlockError
from ..models import Ar1, CompositeModel, Drift, RandomWalk, WhiteNoise

__all__ = ["BiasState", "StateSpaceSpec", "model_to_state_space"]


@dataclass(frozen=True)
class BiasState:
    """One augmented scalar bias state x' = f x + w, Var w = q per sample."""

    tag: str
    f: float
    q: float
    init_var: float
    correlation_samples: float  # inf for a random walk

    def to_dict(self) -> dict:
        return {
            "tag": self.tag,
            "f": self.f,
            "q": self.q,
            "init_var": self.init_var,
            "correlation_samples": self.correlation_samples,
        }


@dataclass(frozen=True)
class StateSpaceSpec:
    """Discrete-time filter ingredients for one sensor channel."""

    wn_variance: float  # per-sample measurement noise variance
    bias_states: tuple
    drift_rate: float  # deterministic bias slope per sample (0 if absent)
    rate_hz: float | None = None

    @property
    def n_states(self) -> int:
        return len(self.bias_states)

    def correlation_seconds(self) -> tuple:
        """Correlation times in seconds (requires ``rate_hz``)."""
        if self.rate_hz is None:
            raise ValueError("rate_hz not set on this spec")
        return tuple(b.correlation_samples / self.rate_hz for b in self.bias_states)

    def to_dict(self) -> dict:
        return {
            "wn_variance": self.wn_variance,
            "bias_states": [b.to_dict() for b in self.bias_states],
            "drift_rate": self.drift_rate,
            "rate_hz": self.rate_hz,
            "n_states": self.n_states,
        }


def model_to_state_space(model: CompositeModel, rate_hz: float | None = None) -> StateSpaceSpec:
    """Convert a composite model into filter augmentation parameters.

    White noise maps to the per-sample measurement variance.  An AR1
    block with coefficient phi maps to a Gauss-Markov bias state with
    per-sample transition phi, process variance eta2, stationary initial
    variance eta2 / (1 - phi^2), and correlation time 1 / (1 - phi)
    samples (divide by ``rate_hz`` for seconds).  A random-walk block
    maps to an integrating bias state; its initial variance is reported
    as 0 and should be inflated by the caller to reflect the unknown
    starting level of the injected data.  A drift block contributes a
    known constant-rate bias handled as a deterministic input.

    Raises
    ------
    UnsupportedBlockError
        If the model contains a quantization-noise block.
    """
    wn_variance = 0.0
    drift_rate = 0.0
    bias_states = []
    for block in model.blocks:
        if isinstance(block, WhiteNoise):
            wn_variance = block.sigma2
        elif isinstance(block, Ar1):
            bias_states.append(
                BiasState(
                    tag="AR1",
                    f=block.phi,
                    q=block.eta2,
                    init_var=block.eta2 / (1.0 - block.phi**2),
                    correlation_samples=1.0 / (1.0 - block.phi),
                )
            )
        elif isinstance(block, RandomWalk):
            bias_states.append(
                BiasState(
                    tag="RW",
                    f=1.0,
                    q=block.gamma2,
                    init_var=0.0,
                    correlation_samples=np.inf,
                )
            )
        elif isinstance(block, Drift):
            drift_rate += block.omega
        else:
            raise UnsupportedBlockError(
                f"{block.tag} block has no Markov filter representation"
            )
    return StateSpaceSpec(
        wn_variance=wn_variance,
        bias_states=tuple(bias_states),
        drift_rate=drift_rate,
        rate_hz=rate_hz,
    )
