"""First and second moments of the state vector via linear forward ODEs.

The mean of the Markov state solves u' = mu*m + A u with A = C + m J (J
selecting the kernel slot); the second-moment matrix solves a Lyapunov-type
linear ODE driven by u.  Closed forms for the exponential and delayed
kernels are implemented separately and serve as independent oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np

from .kernels import OdeKernel
from .numerics import OdePath, rk4

__all__ = [
    "MomentSystem",
    "mean_ode",
    "second_moment_ode",
    "closed_form_mean_exp",
    "closed_form_mean_delayed",
    "closed_form_var_exp",
    "closed_form_var_intensity_critical",
]

DEFAULT_STEP = 1e-3

# |1 - c| below which the non-critical variance formula is evaluated in high
# precision: its terms carry a (1-c)^-4 amplification that double precision
# cannot cancel.
_NEAR_CRITICAL = 1e-3


@dataclass(frozen=True)
class MomentSystem:
    """Drift matrix A = C + m J of the mean equation, with its ingredients."""

    kernel: OdeKernel
    mu: float

    @property
    def J(self) -> np.ndarray:
        J = np.zeros(self.kernel.dim)
        J[1] = 1.0
        return J

    @property
    def A(self) -> np.ndarray:
        return self.kernel.companion + np.outer(self.kernel.jump_vec, self.J)


def mean_ode(kernel: OdeKernel, mu: float, T: float, h: float = DEFAULT_STEP) -> OdePath:
    """Mean state path u(t) = E[X_t] on [0, T], starting from an empty population."""
    sys = MomentSystem(kernel, mu)
    A = sys.A
    m = kernel.jump_vec

    def rhs(t, u):
        return mu * m + A @ u

    path = rk4(rhs, np.zeros(kernel.dim), 0.0, T, h,
               guard=lambda y: np.max(np.abs(y)) > 1e12)
    path.meta["system"] = "mean"
    return path


def second_moment_ode(kernel: OdeKernel, mu: float, T: float,
                      h: float = DEFAULT_STEP) -> OdePath:
    """Second-moment matrix path v(t) = E[X_t X_t^T]; integrated jointly with
    the mean so no interpolation enters the driving terms."""
    sys = MomentSystem(kernel, mu)
    A = sys.A
    J = sys.J
    m = kernel.jump_vec
    mm = np.outer(m, m)
    N = kernel.dim

    def rhs(t, y):
        u = y[:N]
        v = y[N:].reshape(N, N)
        du = mu * m + A @ u
        dv = (v @ A.T + A @ v
              + mu * (mm + np.outer(u, m) + np.outer(m, u))
              + (J @ u) * mm)
        return np.concatenate([du, dv.ravel()])

    joint = rk4(rhs, np.zeros(N + N * N), 0.0, T, h,
                guard=lambda y: np.max(np.abs(y)) > 1e14)
    v_values = joint.values[:, N:].reshape(-1, N, N)
    path = OdePath(grid=joint.grid, values=v_values,
                   meta={"solver": "rk4", "step": h, "direction": "forward",
                         "system": "second_moment",
                         "mean": joint.values[:, :N]},
                   blowup=joint.blowup, blowup_time=joint.blowup_time)
    return path


def closed_form_mean_exp(c: float, mu: float, t: float) -> float:
    """E[N_t] for the exponential kernel exp(-c a); critical branch at c = 1."""
    if c == 1.0:
        return mu * (t + t * t / 2.0)
    omc = 1.0 - c
    return mu * (math.expm1(omc * t) / (omc * omc) - c * t / omc)


def closed_form_mean_delayed(alpha: float, beta: float, mu: float, t: float) -> float:
    """E[N_t] for the delayed kernel alpha^2 a exp(-beta a)."""
    if alpha == beta:
        return mu / (8.0 * beta) * (-math.expm1(-2.0 * beta * t)) \
            + 0.75 * mu * t + beta * mu * t * t / 4.0
    d = alpha - beta
    s = alpha + beta
    return (mu * beta * beta / (beta * beta - alpha * alpha) * t
            + alpha * mu / 2.0 * (math.expm1(d * t) / (d * d)
                                  - math.expm1(-s * t) / (s * s)))


def closed_form_var_exp(c: float, mu: float, t: float) -> float:
    """Var(N_t) for the exponential kernel; critical branch at c = 1.

    Near criticality the printed formula cancels at order (1-c)^4, so it is
    evaluated in 50-digit arithmetic inside a small window around c = 1.
    """
    if c == 1.0:
        return mu * t * (1.0 + 1.5 * t + (2.0 / 3.0) * t * t + t ** 3 / 12.0)
    if abs(1.0 - c) < _NEAR_CRITICAL:
        with mpmath.workdps(50):
            cc = mpmath.mpf(c)
            tt = mpmath.mpf(t)
            omc = 1 - cc
            val = mpmath.mpf(mu) / omc ** 3 * (
                (1 - cc / 2) / omc * mpmath.e ** (2 * omc * tt)
                + ((3 * cc * cc - 1) / omc - 2 * cc * tt) * mpmath.e ** (omc * tt)
                - cc ** 3 * tt + cc * (mpmath.mpf(1) / 2 - 3 * cc) / omc)
            return float(val)
    omc = 1.0 - c
    return mu / omc ** 3 * (
        (1.0 - c / 2.0) / omc * math.exp(2.0 * omc * t)
        + ((3.0 * c * c - 1.0) / omc - 2.0 * c * t) * math.exp(omc * t)
        - c ** 3 * t + c * (0.5 - 3.0 * c) / omc)


def closed_form_var_intensity_critical(beta: float, mu: float, t: float) -> float:
    """Var(lambda_t) for the critical delayed kernel beta^2 a exp(-beta a)."""
    bt = beta * t
    return beta * mu * (-7.0 / 128.0 + 3.0 * bt / 32.0 + bt * bt / 16.0
                        + (1.0 - bt) / 8.0 * math.exp(-2.0 * bt)
                        - 9.0 / 128.0 * math.exp(-4.0 * bt))
