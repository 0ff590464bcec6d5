"""Model specifications: baseline rates and the two-population system."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import MarkKernel, OdeKernel

__all__ = ["RateFunction", "StandardModel", "GeneralModel"]

RATE_FAMILY_CODES = {"constant": 0, "cos_squared": 1}


class RateFunction:
    """Deterministic non-negative arrival rate with analytic sup and integral."""

    def __init__(self, family: str, params: dict):
        self.family = family
        self.params = params

    @classmethod
    def constant(cls, value: float) -> "RateFunction":
        if value < 0:
            raise ValueError("rate must be non-negative")
        return cls("constant", {"value": float(value)})

    @classmethod
    def cos_squared(cls, amplitude: float, alpha: float) -> "RateFunction":
        """rate(t) = amplitude * cos(alpha t)^2."""
        if amplitude < 0:
            raise ValueError("amplitude must be non-negative")
        return cls("cos_squared", {"amplitude": float(amplitude), "alpha": float(alpha)})

    def value(self, t: float) -> float:
        if self.family == "constant":
            return self.params["value"]
        return self.params["amplitude"] * math.cos(self.params["alpha"] * t) ** 2

    def sup_on(self, t0: float, t1: float) -> float:
        if self.family == "constant":
            return self.params["value"]
        return self.params["amplitude"]

    def integral(self, t: float) -> float:
        """Integral of the rate over [0, t]."""
        if self.family == "constant":
            return self.params["value"] * t
        amp, a = self.params["amplitude"], self.params["alpha"]
        if a == 0.0:
            return amp * t
        return amp * (t / 2.0 + math.sin(2.0 * a * t) / (4.0 * a))

    def is_zero(self) -> bool:
        if self.family == "constant":
            return self.params["value"] == 0.0
        return self.params["amplitude"] == 0.0

    def code_params(self):
        if self.family == "constant":
            return RATE_FAMILY_CODES["constant"], np.array([self.params["value"], 0.0])
        return RATE_FAMILY_CODES["cos_squared"], np.array(
            [self.params["amplitude"], self.params["alpha"]])

    def __repr__(self):
        return f"RateFunction.{self.family}({self.params})"


@dataclass(frozen=True)
class StandardModel:
    """Self-exciting counting process: baseline mu plus kernel excitation."""

    kernel: OdeKernel
    mu: float
    label: str = "standard"

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("baseline rate mu must be positive")


@dataclass(frozen=True)
class GeneralModel:
    """Two-population model: externally and self-excited counting process.

    Population 1 (external shocks) arrives at rate rho(t) with marks from
    the psi kernel's mark distribution; population 2 (the observed process)
    arrives at rate mu(t) + self-excitation by phi + external excitation
    by psi, with marks from the phi kernel's mark distribution.
    """

    mu: RateFunction
    rho: RateFunction
    phi: MarkKernel
    psi: MarkKernel | None = None
    label: str = "general"

    def __post_init__(self):
        if self.psi is None and not self.rho.is_zero():
            raise ValueError(
                "rho > 0 requires a psi kernel; use a zero kernel carrying the "
                "external mark distribution for non-exciting external events")

    @property
    def has_external(self) -> bool:
        return self.psi is not None and not self.rho.is_zero()

    def intensity_parts(self, t: float, s1, s2) -> float:
        """lambda(t) from the two aggregated age-stacks (index 1 = kernel slot)."""
        lam = self.mu.value(t) + self.phi.time_factor.value(t) * s2[1]
        if self.has_external:
            lam += self.psi.time_factor.value(t) * s1[1]
        return lam
