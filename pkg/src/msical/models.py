"""Composite stochastic error models and their simulation.

A sensor error signal is modelled as the sum of independent latent
blocks drawn from a small catalogue: white noise (WN), quantization
noise (QN), first-order autoregressions (AR1), a random walk (RW) and a
deterministic ramp (DR).  A :class:`CompositeModel` is an ordered list
of such blocks; an :class:`InternalSensorModel` describes a population
of composite models whose parameters vary from replicate to replicate
as independent rescaled Beta variables.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .errors import ParameterDomainError, ShapeError, SizeError, DataError
from .rng import substream

__all__ = [
    "WhiteNoise",
    "QuantizationNoise",
    "Ar1",
    "RandomWalk",
    "Drift",
    "CompositeModel",
    "Replicate",
    "BetaMarginal",
    "InternalSensorModel",
    "simulate_path",
    "draw_parameters",
]

# Minimum spacing between the phi values of two AR1 blocks in one model.
PHI_GAP = 1e-6


def _require_positive(name: str, value: float) -> None:
    if not np.isfinite(value) or value <= 0.0:
        raise ParameterDomainError(f"{name} must be finite and > 0, got {value!r}")


@dataclass(frozen=True)
class WhiteNoise:
    """White noise with per-sample variance ``sigma2``."""

    sigma2: float
    tag = "WN"
    param_names = ("sigma2",)

    def validate(self) -> None:
        _require_positive("sigma2", self.sigma2)

    def params(self) -> tuple[float, ...]:
        return (self.sigma2,)

    def with_params(self, values) -> "WhiteNoise":
        return WhiteNoise(float(values[0]))

    def sample_path(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.normal(0.0, np.sqrt(self.sigma2), n)

    def autocovariance(self, max_lag: int) -> np.ndarray:
        acov = np.zeros(max_lag + 1)
        acov[0] = self.sigma2
        return acov


@dataclass(frozen=True)
class QuantizationNoise:
    """Quantization-style noise with per-sample variance ``q2``.

    Simulated as the scaled first difference of independent uniform
    levels on ``(-sqrt(3*q2), +sqrt(3*q2))``; the 1/sqrt(2) factor keeps
    the variance of the differenced signal equal to ``q2``.  The result
    is an MA(1)-type signal with autocovariance ``(q2, -q2/2, 0, ...)``.
    """

    q2: float
    tag = "QN"
    param_names = ("q2",)

    def validate(self) -> None:
        _require_positive("q2", self.q2)

    def params(self) -> tuple[float, ...]:
        return (self.q2,)

    def with_params(self, values) -> "QuantizationNoise":
        return QuantizationNoise(float(values[0]))

    def sample_path(self, n: int, rng: np.random.Generator) -> np.ndarray:
        half_width = np.sqrt(3.0 * self.q2)
        levels = rng.uniform(-half_width, half_width, n + 1)
        return np.diff(levels) / np.sqrt(2.0)

    def autocovariance(self, max_lag: int) -> np.ndarray:
        acov = np.zeros(max_lag + 1)
        acov[0] = self.q2
        if max_lag >= 1:
            acov[1] = -0.5 * self.q2
        return acov


@dataclass(frozen=True)
class Ar1:
    """Stationary first-order autoregression (Gauss-Markov bias)."""

    phi: float
    eta2: float
    tag = "AR1"
    param_names = ("phi", "eta2")

    def validate(self) -> None:
        if not np.isfinite(self.phi) or not (0.0 < self.phi < 1.0):
            raise ParameterDomainError(f"phi must lie strictly in (0, 1), got {self.phi!r}")
        _require_positive("eta2", self.eta2)

    def params(self) -> tuple[float, ...]:
        return (self.phi, self.eta2)

    def with_params(self, values) -> "Ar1":
        return Ar1(float(values[0]), float(values[1]))

    def sample_path(self, n: int, rng: np.random.Generator) -> np.ndarray:
        # Stationary start, then x[t] = phi*x[t-1] + e[t] via an IIR filter.
        x0 = rng.normal(0.0, np.sqrt(self.eta2 / (1.0 - self.phi**2)))
        innov = rng.normal(0.0, np.sqrt(self.eta2), n)
        out, _ = lfilter([1.0], [1.0, -self.phi], innov, zi=np.array([self.phi * x0]))
        return out

    def autocovariance(self, max_lag: int) -> np.ndarray:
        lags = np.arange(max_lag + 1)
        return (self.eta2 / (1.0 - self.phi**2)) * self.phi**lags


@dataclass(frozen=True)
class RandomWalk:
    """Random walk with per-sample increment variance ``gamma2``; starts at 0."""

    gamma2: float
    tag = "RW"
    param_names = ("gamma2",)

    def validate(self) -> None:
        _require_positive("gamma2", self.gamma2)

    def params(self) -> tuple[float, ...]:
        return (self.gamma2,)

    def with_params(self, values) -> "RandomWalk":
        return RandomWalk(float(values[0]))

    def sample_path(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.cumsum(rng.normal(0.0, np.sqrt(self.gamma2), n))


@dataclass(frozen=True)
class Drift:
    """Deterministic ramp ``omega * t`` for t = 1..n.

    The wavelet variance only sees ``omega**2``, so the sign of the
    slope is not identifiable; we fix the convention ``omega > 0``.
    """

    omega: float
    tag = "DR"
    param_names = ("omega",)

    def validate(self) -> None:
        _require_positive("omega", self.omega)

    def params(self) -> tuple[float, ...]:
        return (self.omega,)

    def with_params(self, values) -> "Drift":
        return Drift(float(values[0]))

    def sample_path(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.omega * np.arange(1, n + 1, dtype=float)


BLOCK_TYPES = {
    "WN": WhiteNoise,
    "QN": QuantizationNoise,
    "AR1": Ar1,
    "RW": RandomWalk,
    "DR": Drift,
}

# Blocks whose output is stationary and therefore has an autocovariance.
STATIONARY_TAGS = ("WN", "QN", "AR1")


@dataclass(frozen=True)
class CompositeModel:
    """Ordered sum of independent noise blocks."""

    blocks: tuple

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        self.validate()

    def validate(self) -> None:
        if len(self.blocks) == 0:
            raise ShapeError("a composite model needs at least one block")
        seen_singletons = set()
        phis = []
        for block in self.blocks:
            tag = getattr(block, "tag", None)
            if tag not in BLOCK_TYPES:
                raise ParameterDomainError(f"unknown block {block!r}")
            block.validate()
            if tag == "AR1":
                phis.append(block.phi)
            else:
                if tag in seen_singletons:
                    raise ShapeError(f"at most one {tag} block is allowed")
                seen_singletons.add(tag)
        for a, b in zip(phis, phis[1:]):
            if not (a - b > PHI_GAP):
                raise ParameterDomainError(
                    "AR1 blocks must be ordered by strictly descending phi "
                    f"with gaps above {PHI_GAP:g}; got {phis}"
                )

    @property
    def p(self) -> int:
        """Number of free scalar parameters."""
        return sum(len(b.param_names) for b in self.blocks)

    def param_names(self) -> tuple[str, ...]:
        names = []
        for i, block in enumerate(self.blocks):
            for pname in block.param_names:
                names.append(f"{block.tag.lower()}{i}.{pname}")
        return tuple(names)

    def flatten(self) -> np.ndarray:
        """Concatenate block parameters in declaration order."""
        values = []
        for block in self.blocks:
            values.extend(block.params())
        return np.asarray(values, dtype=float)

    def unflatten(self, vector) -> "CompositeModel":
        """Rebuild a model with the same block structure from ``vector``."""
        vector = np.asarray(vector, dtype=float)
        if vector.shape != (self.p,):
            raise ShapeError(f"expected parameter vector of length {self.p}, got shape {vector.shape}")
        blocks = []
        pos = 0
        for block in self.blocks:
            k = len(block.param_names)
            blocks.append(block.with_params(vector[pos : pos + k]))
            pos += k
        return CompositeModel(tuple(blocks))

    def to_dict(self) -> dict:
        out = []
        for block in self.blocks:
            entry = {"type": block.tag}
            entry.update({name: getattr(block, name) for name in block.param_names})
            out.append(entry)
        return {"blocks": out}

    @staticmethod
    def from_dict(data: dict) -> "CompositeModel":
        try:
            raw_blocks = data["blocks"]
        except (TypeError, KeyError):
            raise DataError("model dict needs a 'blocks' list")
        blocks = []
        for entry in raw_blocks:
            tag = entry.get("type")
            cls = BLOCK_TYPES.get(tag)
            if cls is None:
                raise DataError(f"unknown block type {tag!r}")
            try:
                kwargs = {name: float(entry[name]) for name in cls.param_names}
            except KeyError as exc:
                raise DataError(f"block {tag} is missing parameter {exc}")
            blocks.append(cls(**kwargs))
        return CompositeModel(tuple(blocks))


@dataclass
class Replicate:
    """One recorded or simulated error signal."""

    samples: np.ndarray
    rate_hz: float = 1.0
    label: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float).ravel()
        if self.samples.size < 2:
            raise SizeError("a replicate needs at least 2 samples")
        if not np.all(np.isfinite(self.samples)):
            raise DataError("replicate contains NaN or inf")
        if not (np.isfinite(self.rate_hz) and self.rate_hz > 0):
            raise ParameterDomainError(f"rate_hz must be > 0, got {self.rate_hz!r}")

    def __len__(self) -> int:
        return self.samples.size


def simulate_path(model: CompositeModel, n: int, seed: int, stream: tuple = ()) -> np.ndarray:
    """Simulate ``n`` samples from ``model``.

    Each block consumes its own counter-based substream keyed by
    ``(*stream, block_index)``, so paths are reproducible regardless of
    how many blocks the model has or in which order they are evaluated.
    """
    if n < 1:
        raise SizeError(f"n must be >= 1, got {n}")
    model.validate()
    total = np.zeros(n)
    for i, block in enumerate(model.blocks):
        total += block.sample_path(n, substream(seed, *stream, i))
    return total


@dataclass(frozen=True)
class BetaMarginal:
    """Rescaled Beta law for one scalar parameter: lower + Beta(a, b) * (upper - lower)."""

    lower: float
    upper: float
    a: float
    b: float

    def validate(self) -> None:
        if not (np.isfinite(self.lower) and np.isfinite(self.upper)) or self.lower > self.upper:
            raise ParameterDomainError(f"need lower <= upper, got ({self.lower!r}, {self.upper!r})")
        if not (self.a > 0 and self.b > 0):
            raise ParameterDomainError("Beta shapes must be > 0")

    @property
    def mean(self) -> float:
        return self.lower + (self.upper - self.lower) * self.a / (self.a + self.b)

    @property
    def var(self) -> float:
        ab = self.a + self.b
        return (self.upper - self.lower) ** 2 * self.a * self.b / (ab**2 * (ab + 1.0))

    @property
    def second_moment(self) -> float:
        return self.var + self.mean**2

    def to_dict(self) -> dict:
        return {"lower": self.lower, "upper": self.upper, "a": self.a, "b": self.b}

    @staticmethod
    def from_dict(data: dict) -> "BetaMarginal":
        try:
            return BetaMarginal(
                float(data["lower"]), float(data["upper"]), float(data["a"]), float(data["b"])
            )
        except KeyError as exc:
            raise DataError(f"marginal is missing field {exc}")


@dataclass(frozen=True)
class InternalSensorModel:
    """Population law G of per-replicate parameter vectors.

    ``marginals[k]`` governs the k-th entry of the flattened parameter
    vector of ``template``; entries are drawn independently.  A marginal
    with ``lower == upper`` is a point mass, so a fully degenerate model
    reproduces the classical single-parameter setting.
    """

    template: CompositeModel
    marginals: tuple

    def __post_init__(self):
        object.__setattr__(self, "marginals", tuple(self.marginals))
        self.validate()

    def validate(self) -> None:
        self.template.validate()
        if len(self.marginals) != self.template.p:
            raise ShapeError(
                f"need {self.template.p} marginals for this template, got {len(self.marginals)}"
            )
        for m in self.marginals:
            m.validate()
        # Bounds must themselves be admissible parameter vectors.
        lo = np.array([m.lower for m in self.marginals])
        hi = np.array([m.upper for m in self.marginals])
        self.template.unflatten(lo)
        self.template.unflatten(hi)

    @property
    def p(self) -> int:
        return self.template.p

    def mean_model(self) -> CompositeModel:
        """Model at the componentwise mean of G (exact Beta means)."""
        return self.template.unflatten([m.mean for m in self.marginals])

    def to_dict(self) -> dict:
        return {
            "template": self.template.to_dict(),
            "marginals": [m.to_dict() for m in self.marginals],
        }

    @staticmethod
    def from_dict(data: dict) -> "InternalSensorModel":
        try:
            template = CompositeModel.from_dict(data["template"])
            marginals = tuple(BetaMarginal.from_dict(m) for m in data["marginals"])
        except (TypeError, KeyError) as exc:
            raise DataError(f"sensor model dict is malformed: {exc}")
        return InternalSensorModel(template, marginals)


def draw_parameters(g: InternalSensorModel, k: int, seed: int, stream: tuple = ()) -> list:
    """Draw ``k`` iid parameter vectors from G as composite models.

    Draw ``i`` uses substream ``(*stream, i)``, so extending ``k`` keeps
    earlier draws unchanged.
    """
    if k < 0:
        raise SizeError(f"k must be >= 0, got {k}")
    a = np.array([m.a for m in g.marginals])
    b = np.array([m.b for m in g.marginals])
    lo = np.array([m.lower for m in g.marginals])
    width = np.array([m.upper - m.lower for m in g.marginals])
    out = []
    for i in range(k):
        y = substream(seed, *stream, i).beta(a, b)
        out.append(g.template.unflatten(lo + y * width))
    return out
