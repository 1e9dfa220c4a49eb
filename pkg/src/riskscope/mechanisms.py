"""Laplace and Gaussian mechanisms with calibrated, reproducible noise.

Randomness comes from counter-based Philox streams keyed by SHA-256 over a
root seed and a label path (e.g. seed -> query id -> "release"). The same
seed and label path produces bit-identical draws on any platform, and sibling
streams are independent, so threshold-test noise and release noise never
share state.

Samplers are fixed transforms of uniform draws:
  Laplace(b):  u = U[0,1) - 1/2,  z = -b * sgn(u) * ln(1 - 2|u|)
  Gaussian(s): z = s * ndtri(U(0,1))
one uniform per output coordinate. A draw that would hit the open-interval
boundary (probability 2^-53) is discarded and redrawn.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .errors import ParameterError
from .queries import L1, L2, QueryOutput

LAPLACE = "laplace"
GAUSSIAN = "gaussian"
FAMILIES = (LAPLACE, GAUSSIAN)

#: Epsilon sentinel for "no DP applied"; valid in risk profiles, never in releases.
NO_DP = math.inf


class RngStream:
    """A derivable, value-semantics random stream (Philox counter-based)."""

    def __init__(self, key: bytes):
        if len(key) != 32:
            raise ParameterError("stream key must be 32 bytes")
        self._key = key
        words = np.frombuffer(key[:16], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=words))
        self.draws = 0

    @classmethod
    def from_seed(cls, seed: int) -> "RngStream":
        return cls(hashlib.sha256(b"riskscope-root:" + str(int(seed)).encode()).digest())

    def child(self, *labels: str | int) -> "RngStream":
        """Derive an independent substream for a label path."""
        h = hashlib.sha256(self._key)
        for label in labels:
            h.update(b"\x1f")
            h.update(str(label).encode("utf-8"))
        return RngStream(h.digest())

    def uniform(self) -> float:
        self.draws += 1
        return float(self._gen.random())

    def laplace(self, scale: float) -> float:
        if scale <= 0:
            raise ParameterError(f"Laplace scale must be positive, got {scale}")
        u = self.uniform() - 0.5
        while u == -0.5:
            u = self.uniform() - 0.5
        return -scale * math.copysign(1.0, u) * math.log(1.0 - 2.0 * abs(u)) if u != 0 else 0.0

    def normal(self, sigma: float) -> float:
        if sigma <= 0:
            raise ParameterError(f"Gaussian sigma must be positive, got {sigma}")
        u = self.uniform()
        while u == 0.0:
            u = self.uniform()
        return sigma * float(ndtri(u))


@dataclass(frozen=True)
class MechanismSpec:
    """Mechanism family plus its privacy parameters.

    Laplace requires delta == 0; Gaussian requires 0 < delta < 1. An infinite
    epsilon is allowed only so risk profiles can show the "no DP" reference
    column; `apply_mechanism` refuses it.
    """

    family: str
    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown mechanism family {self.family!r}")
        if math.isnan(self.epsilon) or self.epsilon <= 0:
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")
        if self.family == LAPLACE and self.delta != 0:
            raise ParameterError(f"Laplace takes delta == 0, got {self.delta}")
        if self.family == GAUSSIAN and not (0 < self.delta < 1):
            raise ParameterError(f"Gaussian needs delta in (0, 1), got {self.delta}")

    @property
    def norm(self) -> str:
        return L1 if self.family == LAPLACE else L2

    def with_epsilon(self, epsilon: float) -> "MechanismSpec":
        return MechanismSpec(family=self.family, epsilon=epsilon, delta=self.delta)


@dataclass(frozen=True)
class NoiseParams:
    scale_b: float | None = None
    variance_sigma2: float | None = None

    @property
    def sigma(self) -> float:
        return math.sqrt(self.variance_sigma2)


def noise_params(spec: MechanismSpec, sensitivity: float) -> NoiseParams:
    """Closed-form noise parameters: b = D1/eps, sigma^2 = 2 D2^2 ln(1.25/delta) / eps^2."""
    if not sensitivity > 0:
        raise ParameterError(f"sensitivity must be positive, got {sensitivity}")
    if math.isinf(spec.epsilon):
        raise ParameterError("infinite epsilon has no noise parameters")
    if spec.family == LAPLACE:
        return NoiseParams(scale_b=sensitivity / spec.epsilon)
    sigma2 = 2.0 * sensitivity**2 * math.log(1.25 / spec.delta) / spec.epsilon**2
    return NoiseParams(variance_sigma2=sigma2)


def apply_mechanism(
    output: QueryOutput, spec: MechanismSpec, sensitivity: float, stream: RngStream
) -> QueryOutput:
    """Add i.i.d. calibrated noise per coordinate (exactly k draws, in order).

    The no-DP sentinel passes the output through untouched; release paths never
    produce it because candidate grids only admit finite values.
    """
    if math.isinf(spec.epsilon):
        return output
    params = noise_params(spec, sensitivity)
    if spec.family == LAPLACE:
        noisy = tuple(v + stream.laplace(params.scale_b) for v in output.values)
    else:
        sigma = params.sigma
        noisy = tuple(v + stream.normal(sigma) for v in output.values)
    return QueryOutput(values=noisy)
