"""Fertility kernels closed under a linear ODE, time factors, and marks.

A kernel phi is represented by the coefficient vector ``c = (c[-1], c0, ...,
c[n-1])`` of the linear ODE its n-th derivative satisfies, together with the
initial derivative stack ``m_init = (phi(0), ..., phi^(n-1)(0))``.  The
derivative stack ``(1, phi, phi', ..., phi^(n-1))`` then evolves in age by a
companion matrix, so states built from the kernel propagate exactly between
events via matrix exponentials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateRate,
    HawkespopError,
    MarkMomentError,
    NonPositiveKernel,
)
from .numerics import Propagator

__all__ = [
    "OdeKernel",
    "build_ode_kernel",
    "eval_kernel_stack",
    "kernel_from_exponential_modes",
    "power_law_kernel",
    "exponential_kernel",
    "delayed_kernel",
    "zero_kernel",
    "branching_ratio",
    "BranchingRatio",
    "companion_matrix",
    "TimeFactor",
    "MarkDistribution",
    "MarkKernel",
]

NEG_TOL = 1e-12          # tolerated undershoot of phi on the validation grid
VALIDATION_STEP = 1e-3   # age-grid step for the non-negativity check


def companion_matrix(c: np.ndarray) -> np.ndarray:
    """Companion matrix of the derivative stack (1, phi, ..., phi^(n-1)).

    Row 0 (the constant slot) is zero, rows 1..n-1 shift to the next
    derivative, and the last row holds the ODE coefficients including the
    constant forcing term in column 0.
    """
    c = np.asarray(c, dtype=float)
    n = len(c) - 1
    C = np.zeros((n + 1, n + 1))
    for i in range(1, n):
        C[i, i + 1] = 1.0
    C[n, :] = c
    return C


class OdeKernel:
    """Fertility function phi(a) determined by (c, m_init); immutable.

    Attributes
    ----------
    c : ndarray, shape (n+1,)
        ODE coefficients (constant term first).
    m_init : ndarray, shape (n,)
        Derivatives of phi at age zero.
    companion : ndarray, shape (n+1, n+1)
        Stack propagation matrix.
    jump_vec : ndarray, shape (n+1,)
        State increment (1, m_init) contributed by a newborn individual.
    """

    def __init__(self, c, m_init, validate: bool = True):
        c = np.atleast_1d(np.asarray(c, dtype=float))
        m_init = np.atleast_1d(np.asarray(m_init, dtype=float))
        if len(c) != len(m_init) + 1:
            raise DimensionMismatch(
                f"need len(c) == len(m_init) + 1, got {len(c)} and {len(m_init)}")
        self.c = c
        self.m_init = m_init
        self.n = len(m_init)
        self.dim = self.n + 1
        self.companion = companion_matrix(c)
        self.jump_vec = np.concatenate([[1.0], m_init])
        self.propagator = Propagator(self.companion)
        block_eigs = np.linalg.eigvals(self.companion[1:, 1:]) if self.n else np.array([])
        self.block_eigenvalues = block_eigs
        self.decay_rate = float(np.max(block_eigs.real)) if self.n else 0.0
        self.possibly_divergent = bool(self.c[0] != 0.0 or self.decay_rate >= -1e-12)
        if self.decay_rate < -1e-12:
            self.a_check = max(10.0, 5.0 / abs(self.decay_rate))
        else:
            self.a_check = 10.0
        self.phi_grid_min = None
        if validate:
            self._validate_nonnegative()

    def _validate_nonnegative(self):
        count = int(math.ceil(self.a_check / VALIDATION_STEP))
        values = self.stack_grid(VALIDATION_STEP, count)[:, 1]
        if not np.all(np.isfinite(values)):
            raise HawkespopError("kernel validation overflowed; coefficients too extreme")
        self.phi_grid_min = float(values.min())
        if self.phi_grid_min < -NEG_TOL:
            a_bad = float(np.argmin(values)) * VALIDATION_STEP
            raise NonPositiveKernel(
                f"phi({a_bad:.4g}) = {self.phi_grid_min:.3e} < 0 on [0, {self.a_check:.3g}]")

    def stack(self, a: float) -> np.ndarray:
        """Derivative stack (1, phi(a), ..., phi^(n-1)(a))."""
        out = self.propagator.apply(a, self.jump_vec)
        out[0] = 1.0
        return out

    def stack_many(self, ages) -> np.ndarray:
        """Stacks at several ages; shape (len(ages), n+1)."""
        out = self.propagator.apply_many(np.asarray(ages, dtype=float), self.jump_vec)
        out[:, 0] = 1.0
        return out

    def stack_grid(self, h: float, count: int) -> np.ndarray:
        """Stacks on the uniform age grid 0, h, ..., count*h by exact stepping."""
        step = self.propagator.matrix(h)
        out = np.empty((count + 1, self.dim))
        y = self.jump_vec.copy()
        out[0] = y
        for k in range(1, count + 1):
            y = step @ y
            out[k] = y
        out[:, 0] = 1.0
        return out

    def phi(self, a):
        """Kernel value(s) at age(s) ``a``."""
        if np.isscalar(a):
            return float(self.stack(float(a))[1])
        return self.stack_many(a)[:, 1]

    def __repr__(self):
        return f"OdeKernel(c={self.c.tolist()}, m_init={self.m_init.tolist()})"


def build_ode_kernel(c, m_init) -> OdeKernel:
    """Build and validate a kernel from ODE coefficients and initial stack.

    Raises ``DimensionMismatch`` on inconsistent lengths and
    ``NonPositiveKernel`` if phi dips below -1e-12 on the validation grid.
    """
    return OdeKernel(c, m_init)


def eval_kernel_stack(kernel: OdeKernel, a: float) -> np.ndarray:
    """Stack (1, phi(a), ..., phi^(n-1)(a)); requires a >= 0."""
    if a < 0:
        raise ValueError("age must be non-negative")
    return kernel.stack(a)


def exponential_kernel(rate: float) -> OdeKernel:
    """phi(a) = exp(-rate * a)."""
    return OdeKernel([0.0, -rate], [1.0])


def delayed_kernel(alpha: float, beta: float) -> OdeKernel:
    """phi(a) = alpha^2 * a * exp(-beta * a): smooth delay at excitation."""
    return OdeKernel([0.0, -beta * beta, -2.0 * beta], [0.0, alpha * alpha])


def zero_kernel() -> OdeKernel:
    """phi identically zero (plain Poisson process)."""
    return OdeKernel([0.0, -1.0], [0.0])


def kernel_from_exponential_modes(weights, rates) -> OdeKernel:
    """Kernel phi(a) = sum_i weights[i] * exp(-rates[i] * a).

    The ODE coefficients come from the characteristic polynomial with roots
    at the negated rates; repeated rates are rejected (``DuplicateRate``)
    rather than handled with polynomial factors.
    """
    weights = np.asarray(weights, dtype=float)
    rates = np.asarray(rates, dtype=float)
    if weights.shape != rates.shape or weights.ndim != 1:
        raise DimensionMismatch("weights and rates must be 1-d of equal length")
    if np.any(rates <= 0):
        raise ValueError("rates must be positive")
    srt = np.sort(rates)
    if np.any(np.diff(srt) <= 1e-10 * srt[-1]):
        raise DuplicateRate(f"rates must be distinct, got {rates.tolist()}")
    # monic polynomial with roots -rates: y^M + a_{M-1} y^{M-1} + ... + a_0
    poly = np.poly(-rates)
    c = np.concatenate([[0.0], -poly[1:][::-1]])
    M = len(rates)
    m_init = np.array([np.sum(weights * (-rates) ** k) for k in range(M)])
    return OdeKernel(c, m_init)


def power_law_kernel(tau0: float, ratio: float, epsilon: float, terms: int) -> OdeKernel:
    """Smooth power-law kernel as a sum of exponentials with a fast cut-off.

    phi(a) = sum_{i<terms} exp(-a/(tau0*ratio^i)) / (tau0*ratio^i)^(1+epsilon)
             - S * exp(-a*ratio/tau0),   with S forcing phi(0) = 0.
    """
    if tau0 <= 0 or ratio <= 1 or epsilon <= 0 or terms < 1:
        raise ValueError("need tau0 > 0, ratio > 1, epsilon > 0, terms >= 1")
    scales = tau0 * ratio ** np.arange(terms)
    weights = scales ** -(1.0 + epsilon)
    S = weights.sum()
    all_weights = np.concatenate([weights, [-S]])
    all_rates = np.concatenate([1.0 / scales, [ratio / tau0]])
    return kernel_from_exponential_modes(all_weights, all_rates)


@dataclass(frozen=True)
class BranchingRatio:
    """Mean offspring count per individual over [0, horizon] plus a tail report."""

    value: float
    tail_bound: float
    possibly_divergent: bool


def branching_ratio(kernel: OdeKernel, horizon: float) -> BranchingRatio:
    """Integral of phi over [0, horizon] with a decay-envelope tail estimate.

    Flagged possibly divergent when the constant forcing term is non-zero or
    the dominant stack eigenvalue does not have negative real part; the flag
    is informational, supercritical kernels are allowed.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    value = float(kernel.propagator.integral_apply(horizon, kernel.jump_vec)[1])
    if kernel.possibly_divergent:
        tail = math.inf
    else:
        stack_end = kernel.stack(horizon)
        tail = float(np.sum(np.abs(stack_end[1:])) / abs(kernel.decay_rate))
    return BranchingRatio(value=value, tail_bound=tail,
                          possibly_divergent=kernel.possibly_divergent)


class TimeFactor:
    """Multiplicative time factor v(t) whose derivative stack obeys a linear ODE.

    Supported families keep the stack companion matrix constant in time so
    that matrix-state propagation between events stays exact:

    - ``constant``: v(t) = value
    - ``cos_squared``: v(t) = amplitude * cos(alpha t)^2, v'' = 4 alpha^2 (amplitude - v)
    - ``polynomial``: v(t) = sum_j coeffs[j] t^j (zero ODE coefficients)
    """

    def __init__(self, family: str, params: dict, p: int, d: np.ndarray):
        self.family = family
        self.params = params
        self.p = p
        self.d = np.asarray(d, dtype=float)
        self.D = companion_matrix(self.d)
        self.dim = p + 1

    @classmethod
    def constant(cls, value: float = 1.0) -> "TimeFactor":
        if value < 0:
            raise ValueError("time factor must be non-negative")
        return cls("constant", {"value": float(value)}, p=1, d=[0.0, 0.0])

    @classmethod
    def cos_squared(cls, alpha: float, amplitude: float = 1.0) -> "TimeFactor":
        # v = A cos^2(at) = A(1 + cos 2at)/2 gives v'' = 2 a^2 A - 4 a^2 v
        if amplitude < 0:
            raise ValueError("amplitude must be non-negative")
        a2 = alpha * alpha
        return cls("cos_squared", {"alpha": float(alpha), "amplitude": float(amplitude)},
                   p=2, d=[2.0 * a2 * amplitude, -4.0 * a2, 0.0])

    @classmethod
    def polynomial(cls, coeffs) -> "TimeFactor":
        coeffs = [float(v) for v in coeffs]
        if not coeffs:
            raise ValueError("need at least one coefficient")
        p = len(coeffs)
        fac = cls("polynomial", {"coeffs": coeffs}, p=p, d=[0.0] * (p + 1))
        # critical points for exact window suprema
        deriv = np.polyder(np.array(coeffs[::-1]))
        roots = np.roots(deriv) if len(deriv) else np.array([])
        fac._crit = np.sort(roots[np.isreal(roots)].real) if len(roots) else np.array([])
        return fac

    def stack(self, t: float) -> np.ndarray:
        """(1, v(t), v'(t), ..., v^(p-1)(t)), evaluated in closed form."""
        if self.family == "constant":
            return np.array([1.0, self.params["value"]])
        if self.family == "cos_squared":
            a, amp = self.params["alpha"], self.params["amplitude"]
            return np.array([1.0,
                             amp * math.cos(a * t) ** 2,
                             -amp * a * math.sin(2.0 * a * t)])
        coeffs = self.params["coeffs"]
        out = np.empty(self.p + 1)
        out[0] = 1.0
        cur = np.array(coeffs[::-1])
        for k in range(self.p):
            out[k + 1] = np.polyval(cur, t)
            cur = np.polyder(cur) if len(cur) > 1 else np.zeros(1)
        return out

    def stack_many(self, ts) -> np.ndarray:
        """Stacks at several times; shape (len(ts), p+1)."""
        ts = np.asarray(ts, dtype=float)
        out = np.empty((len(ts), self.p + 1))
        out[:, 0] = 1.0
        if self.family == "constant":
            out[:, 1] = self.params["value"]
            return out
        if self.family == "cos_squared":
            a, amp = self.params["alpha"], self.params["amplitude"]
            out[:, 1] = amp * np.cos(a * ts) ** 2
            out[:, 2] = -amp * a * np.sin(2.0 * a * ts)
            return out
        cur = np.array(self.params["coeffs"][::-1])
        for k in range(self.p):
            out[:, k + 1] = np.polyval(cur, ts)
            cur = np.polyder(cur) if len(cur) > 1 else np.zeros(1)
        return out

    def value(self, t: float) -> float:
        return float(self.stack(t)[1])

    def sup_value(self, t0: float, t1: float) -> float:
        """Exact supremum of |v| on [t0, t1]."""
        if self.family == "constant":
            return self.params["value"]
        if self.family == "cos_squared":
            return self.params["amplitude"]
        pts = [t0, t1] + [c for c in self._crit if t0 <= c <= t1]
        return max(abs(self.value(p)) for p in pts)

    def sup_bounds(self, T: float) -> np.ndarray:
        """Per-derivative suprema of |v^(l)| on [0, T] (l = 0..p-1)."""
        if self.family == "constant":
            return np.array([self.params["value"]])
        if self.family == "cos_squared":
            a, amp = self.params["alpha"], self.params["amplitude"]
            return np.array([amp, amp * abs(a)])
        sups = []
        cur = np.array(self.params["coeffs"][::-1])
        for _ in range(self.p):
            grid = np.linspace(0.0, T, 4097)
            sups.append(float(np.max(np.abs(np.polyval(cur, grid)))))
            cur = np.polyder(cur) if len(cur) > 1 else np.zeros(1)
        return np.array(sups)

    def validate_nonnegative(self, T: float = 10.0):
        # constant and cos_squared families are non-negative by construction
        if self.family == "polynomial":
            grid = np.linspace(0.0, T, 20001)
            vals = np.polyval(np.array(self.params["coeffs"][::-1]), grid)
            if vals.min() < -NEG_TOL:
                raise ValueError(f"time factor negative on [0, {T}]")

    def __repr__(self):
        return f"TimeFactor.{self.family}({self.params})"


# family codes shared with the jitted simulation cores
TIME_FACTOR_CODES = {"constant": 0, "cos_squared": 1, "polynomial": 2}
MARK_FAMILY_CODES = {"point_mass": 0, "uniform": 1, "exponential": 2, "discrete": 3}


class MarkDistribution:
    """Distribution of the positive marks carried by newborn individuals."""

    def __init__(self, family: str, params: dict):
        self.family = family
        self.params = params

    @classmethod
    def point_mass(cls, value: float) -> "MarkDistribution":
        if value < 0:
            raise ValueError("marks must be non-negative")
        return cls("point_mass", {"value": float(value)})

    @classmethod
    def uniform(cls, a: float, b: float) -> "MarkDistribution":
        if not 0 <= a < b:
            raise ValueError("need 0 <= a < b")
        return cls("uniform", {"a": float(a), "b": float(b)})

    @classmethod
    def exponential(cls, rate: float) -> "MarkDistribution":
        if rate <= 0:
            raise ValueError("rate must be positive")
        return cls("exponential", {"rate": float(rate)})

    @classmethod
    def discrete(cls, values, probs) -> "MarkDistribution":
        values = [float(v) for v in values]
        probs = [float(p) for p in probs]
        if len(values) != len(probs) or not values:
            raise ValueError("values and probs must be non-empty, equal length")
        if any(v < 0 for v in values) or any(p < 0 for p in probs):
            raise ValueError("values and probs must be non-negative")
        if abs(sum(probs) - 1.0) > 1e-12:
            raise ValueError("probs must sum to 1")
        return cls("discrete", {"values": values, "probs": probs})

    def sample(self, rng: np.random.Generator, size=None):
        f = self.family
        if f == "point_mass":
            v = self.params["value"]
            return v if size is None else np.full(size, v)
        if f == "uniform":
            return rng.uniform(self.params["a"], self.params["b"], size)
        if f == "exponential":
            return rng.exponential(1.0 / self.params["rate"], size)
        idx = rng.choice(len(self.params["values"]), size=size, p=self.params["probs"])
        return np.asarray(self.params["values"])[idx]

    def mean(self) -> float:
        f = self.family
        if f == "point_mass":
            return self.params["value"]
        if f == "uniform":
            return 0.5 * (self.params["a"] + self.params["b"])
        if f == "exponential":
            return 1.0 / self.params["rate"]
        return float(np.dot(self.params["values"], self.params["probs"]))

    def var(self) -> float:
        f = self.family
        if f == "point_mass":
            return 0.0
        if f == "uniform":
            return (self.params["b"] - self.params["a"]) ** 2 / 12.0
        if f == "exponential":
            return 1.0 / self.params["rate"] ** 2
        v = np.asarray(self.params["values"])
        p = np.asarray(self.params["probs"])
        return float(np.dot(v * v, p) - np.dot(v, p) ** 2)

    def mgf(self, s: float) -> float:
        """E[exp(s X)]; +inf outside the convergence domain."""
        f = self.family
        if f == "point_mass":
            return math.exp(s * self.params["value"])
        if f == "uniform":
            a, b = self.params["a"], self.params["b"]
            if s == 0.0:
                return 1.0
            return (math.expm1(s * b) - math.expm1(s * a)) / (s * (b - a))
        if f == "exponential":
            rate = self.params["rate"]
            return rate / (rate - s) if s < rate else math.inf
        v = np.asarray(self.params["values"])
        p = np.asarray(self.params["probs"])
        return float(np.sum(p * np.exp(s * v)))

    def mgf_domain_sup(self) -> float:
        """Supremum of the MGF convergence domain."""
        return self.params["rate"] if self.family == "exponential" else math.inf

    def support_bounds(self):
        f = self.family
        if f == "point_mass":
            v = self.params["value"]
            return v, v
        if f == "uniform":
            return self.params["a"], self.params["b"]
        if f == "exponential":
            return 0.0, math.inf
        return min(self.params["values"]), max(self.params["values"])

    def numeric_mgf(self, s: float, nodes: int = 64) -> float:
        """Gauss-Legendre fallback for the exponential moment.

        Closed forms exist for every supported family; this generic route is
        kept as a cross-check and for mark families added later.
        """
        f = self.family
        if f in ("point_mass", "discrete"):
            return self.mgf(s)
        x, w = np.polynomial.legendre.leggauss(nodes)
        if f == "uniform":
            a, b = self.params["a"], self.params["b"]
            xs = 0.5 * (b - a) * x + 0.5 * (a + b)
            return float(np.sum(w * np.exp(s * xs)) * 0.5)
        rate = self.params["rate"]
        if s >= rate:
            return math.inf
        # substitute y = rate x: Gauss-Laguerre handles the exp(-y) weight
        y, wl = np.polynomial.laguerre.laggauss(nodes)
        return float(np.sum(wl * np.exp((s / rate) * y)))

    def code_params(self):
        """(family code, parameter array, auxiliary array) for jitted samplers."""
        f = self.family
        if f == "point_mass":
            return MARK_FAMILY_CODES[f], np.array([self.params["value"]]), np.zeros(1)
        if f == "uniform":
            return MARK_FAMILY_CODES[f], np.array([self.params["a"], self.params["b"]]), np.zeros(1)
        if f == "exponential":
            return MARK_FAMILY_CODES[f], np.array([self.params["rate"]]), np.zeros(1)
        return (MARK_FAMILY_CODES[f], np.asarray(self.params["values"], dtype=float),
                np.cumsum(self.params["probs"]))

    def __repr__(self):
        return f"MarkDistribution.{self.family}({self.params})"


class MarkKernel:
    """Birth rate v(t) * phi(a, x) with a mark-dependent initial stack.

    The age part solves the same constant-coefficient ODE for every mark x;
    only the initial conditions depend on x, and each initial derivative is
    affine in the mark: phi^(k)(0, x) = phi0_const[k] + phi0_lin[k] * x.
    The newborn state increment is therefore m(x) = m_const + x * m_lin.
    """

    def __init__(self, c, init, time_factor: TimeFactor | None = None,
                 mark_dist: MarkDistribution | None = None,
                 lambda_max: float = 1.0, validate: bool = True):
        c = np.atleast_1d(np.asarray(c, dtype=float))
        self.c = c
        self.n = len(c) - 1
        self.dim = self.n + 1
        const = np.zeros(self.n)
        lin = np.zeros(self.n)
        if len(init) != self.n:
            raise DimensionMismatch(f"need {self.n} initial-stack entries, got {len(init)}")
        for k, entry in enumerate(init):
            kind, value = entry
            if kind == "const":
                const[k] = value
            elif kind == "linear":
                lin[k] = value
            else:
                raise ValueError(f"unsupported initial-stack family {kind!r}")
        self.phi0_const = const
        self.phi0_lin = lin
        self.companion = companion_matrix(c)
        self.propagator = Propagator(self.companion)
        self.m_const = np.concatenate([[1.0], const])
        self.m_lin = np.concatenate([[0.0], lin])
        self.time_factor = time_factor if time_factor is not None else TimeFactor.constant()
        self.mark_dist = mark_dist if mark_dist is not None else MarkDistribution.point_mass(1.0)
        self.lambda_max = lambda_max
        if validate:
            self._validate(lambda_max)

    @classmethod
    def from_ode_kernel(cls, kernel: OdeKernel, time_factor=None, mark_dist=None) -> "MarkKernel":
        """Mark-independent kernel: the standard phi(a) with constant initial stack."""
        init = [("const", v) for v in kernel.m_init]
        return cls(kernel.c, init, time_factor=time_factor, mark_dist=mark_dist)

    @classmethod
    def dassios_zhao(cls, delta: float, mark_dist: MarkDistribution,
                     time_factor=None) -> "MarkKernel":
        """phi(a, x) = x * exp(-delta * a)."""
        return cls([0.0, -delta], [("linear", 1.0)], time_factor=time_factor,
                   mark_dist=mark_dist)

    def _validate(self, lambda_max: float):
        # phi(a, x) is affine in x: check both envelope functions on the grid
        lo, hi = self.mark_dist.support_bounds()
        count = int(math.ceil(10.0 / VALIDATION_STEP))
        grid = np.linspace(0.0, 10.0, count + 1)
        pc = self.propagator.apply_many(grid, self.m_const)[:, 1]
        pl = self.propagator.apply_many(grid, self.m_lin)[:, 1]
        low_env = pc + lo * pl
        if low_env.min() < -NEG_TOL:
            raise NonPositiveKernel("phi(a, x) negative at the lower mark bound")
        if math.isinf(hi):
            if pl.min() < -NEG_TOL:
                raise NonPositiveKernel("phi(a, x) negative for large marks")
        elif (pc + hi * pl).min() < -NEG_TOL:
            raise NonPositiveKernel("phi(a, x) negative at the upper mark bound")
        self.time_factor.validate_nonnegative()
        # exponential moment of the initial stack must be finite up to lambda_max
        growth = max(np.max(self.phi0_lin, initial=0.0), 0.0)
        if lambda_max * growth >= self.mark_dist.mgf_domain_sup():
            raise MarkMomentError(
                f"exp moment of the initial stack diverges at lambda={lambda_max}: "
                f"linear growth {growth} vs MGF domain sup {self.mark_dist.mgf_domain_sup()}")

    def m_of(self, x: float) -> np.ndarray:
        """Newborn state increment for mark x."""
        return self.m_const + x * self.m_lin

    def stack(self, a: float, x: float) -> np.ndarray:
        out = self.propagator.apply(a, self.m_of(x))
        out[0] = 1.0
        return out

    def phi(self, a: float, x: float) -> float:
        """Age part phi(a, x) without the time factor."""
        return float(self.stack(a, x)[1])

    def birth_rate(self, t: float, a: float, x: float) -> float:
        """Full rate v(t) * phi(a, x)."""
        return self.time_factor.value(t) * self.phi(a, x)

    def w_jump(self, t: float, x: float) -> np.ndarray:
        """Matrix-state increment of a birth at time t with mark x."""
        return np.outer(self.m_of(x), self.time_factor.stack(t))

    def tr_exponent_coeffs(self, A: np.ndarray, t: float):
        """Coefficients (g0, g1) with Tr(A W(t, x)) = g0 + g1 * x."""
        V = self.time_factor.stack(t)
        g0 = float(V @ (A @ self.m_const))
        g1 = float(V @ (A @ self.m_lin))
        return g0, g1

    def is_time_constant_unit(self) -> bool:
        return self.time_factor.family == "constant" and \
            self.time_factor.params["value"] == 1.0

    def __repr__(self):
        return (f"MarkKernel(c={self.c.tolist()}, const={self.phi0_const.tolist()}, "
                f"lin={self.phi0_lin.tolist()}, tf={self.time_factor}, marks={self.mark_dist})")
