"""Deterministic numeric kernel: fixed-step RK4, matrix exponentials, quadrature.

Everything here is pure and reproducible: fixed step sizes, no adaptivity,
so that repeated runs (and Richardson step-halving checks) are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "OdePath",
    "VectorField",
    "rk4",
    "expm",
    "expm_action",
    "expm_integral_action",
    "Propagator",
    "quad_simpson",
    "fd_derivative",
]


@dataclass
class OdePath:
    """Time grid plus solution values of an integrated ODE system.

    ``values[i]`` is the state at ``grid[i]``; states may be vectors or
    matrices.  ``blowup`` marks paths truncated at a non-finite state or a
    guard violation, with ``blowup_time`` the first bad time.
    """

    grid: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)
    blowup: bool = False
    blowup_time: float | None = None

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]

    def at(self, t: float) -> np.ndarray:
        """Linear interpolation of the path at time ``t`` (componentwise)."""
        grid = self.grid
        flip = grid[0] > grid[-1]
        if flip:
            grid = grid[::-1]
        flat = self.values.reshape(len(self.grid), -1)
        if flip:
            flat = flat[::-1]
        out = np.empty(flat.shape[1])
        for j in range(flat.shape[1]):
            out[j] = np.interp(t, grid, flat[:, j])
        return out.reshape(self.values.shape[1:])

    def to_csv(self, path) -> None:
        """Write ``t`` plus one column per component (row-major for matrices)."""
        flat = self.values.reshape(len(self.grid), -1)
        header = "t," + ",".join(f"y{j}" for j in range(flat.shape[1]))
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for t, row in zip(self.grid, flat):
                fh.write(f"{t:.17g}," + ",".join(f"{v:.17g}" for v in row) + "\n")


@dataclass(frozen=True)
class VectorField:
    """Right-hand side f(t, y) of an ODE system, with its state dimension."""

    dimension: int
    rhs: callable


def rk4(field, y0, t0: float, t1: float, h: float, guard=None) -> OdePath:
    """Classical fixed-step RK4 from ``t0`` to ``t1`` (backward if t1 < t0).

    The final step is shortened to land exactly on ``t1``.  A non-finite
    state (or ``guard(y)`` returning True) truncates the path and sets the
    blow-up flag instead of raising.
    """
    if h <= 0:
        raise ValueError("step size must be positive")
    f = field.rhs if isinstance(field, VectorField) else field
    y = np.array(y0, dtype=float)
    span = t1 - t0
    direction = 1.0 if span >= 0 else -1.0
    n_full = int(abs(span) // h)
    targets = [t0 + (k + 1) * h * direction for k in range(n_full)]
    if not targets or abs(t1 - targets[-1]) > 1e-14 * max(1.0, abs(span)):
        targets.append(t1)
    else:
        targets[-1] = t1

    grid = [t0]
    values = [y.copy()]
    t = t0
    blowup = False
    for t_next in targets:
        dt = t_next - t
        k1 = f(t, y)
        k2 = f(t + dt / 2, y + dt / 2 * k1)
        k3 = f(t + dt / 2, y + dt / 2 * k2)
        k4 = f(t + dt, y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t_next
        if not np.all(np.isfinite(y)) or (guard is not None and guard(y)):
            blowup = True
            break
        grid.append(t)
        values.append(y.copy())
    path = OdePath(
        grid=np.array(grid),
        values=np.array(values),
        meta={"solver": "rk4", "step": h, "direction": "backward" if direction < 0 else "forward"},
        blowup=blowup,
        blowup_time=t if blowup else None,
    )
    return path


# Pade-13 coefficients for the scaling-and-squaring matrix exponential.
_PADE13_B = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
)
_PADE13_THETA = 5.371920351148152


def expm(M: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring with a degree-13 Pade approximant."""
    A = np.asarray(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("expm expects a square matrix")
    n = A.shape[0]
    norm = np.linalg.norm(A, 1)
    s = max(0, int(math.ceil(math.log2(norm / _PADE13_THETA))) if norm > _PADE13_THETA else 0)
    A = A / (2.0 ** s)
    b = _PADE13_B
    ident = np.eye(n)
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A2 @ A4
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
             + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
         + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident)
    R = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        R = R @ R
    return R


def expm_action(M: np.ndarray, s: float, x: np.ndarray) -> np.ndarray:
    """Compute exp(s*M) @ x by a scaled Taylor series (no full exponential)."""
    y = np.array(x, dtype=float)
    norm = np.linalg.norm(M, 1) * abs(s)
    segments = max(1, int(math.ceil(norm / 0.8)))
    h = s / segments
    hM = h * M
    for _ in range(segments):
        term = y.copy()
        acc = y.copy()
        for k in range(1, 30):
            term = hM @ term / k
            acc += term
            if np.max(np.abs(term)) <= 1e-17 * max(1.0, np.max(np.abs(acc))):
                break
        y = acc
    return y


def expm_integral_action(M: np.ndarray, s: float, x: np.ndarray) -> np.ndarray:
    """Compute the integral of exp(u*M) @ x for u from 0 to s (exact, via an
    augmented exponential)."""
    n = M.shape[0]
    aug = np.zeros((n + 1, n + 1))
    aug[:n, :n] = M
    aug[:n, n] = np.asarray(x, dtype=float)
    return expm(s * aug)[:n, n]


class Propagator:
    """Fast repeated evaluation of exp(s*M) actions for a fixed matrix M.

    Diagonalizable, well-conditioned matrices get a cached eigendecomposition
    (two small matvecs per call); defective ones fall back to scaled Taylor.
    """

    def __init__(self, M: np.ndarray, cond_limit: float = 1e6):
        self.M = np.array(M, dtype=float)
        self.norm1 = float(np.linalg.norm(self.M, 1))
        self._mode = "taylor"
        try:
            w, V = np.linalg.eig(self.M)
            Vinv = np.linalg.inv(V)
            cond = np.linalg.norm(V, 1) * np.linalg.norm(Vinv, 1)
            recon = np.linalg.norm((V * w) @ Vinv - self.M, 1)
            if (np.all(np.isfinite(V)) and cond < cond_limit
                    and recon <= 1e-12 * max(1.0, self.norm1)):
                self._w, self._V, self._Vinv = w, V, Vinv
                self._mode = "eigen"
        except np.linalg.LinAlgError:
            pass

    @property
    def mode(self) -> str:
        return self._mode

    def apply(self, s: float, x: np.ndarray) -> np.ndarray:
        if self._mode == "eigen":
            return (self._V @ (np.exp(s * self._w) * (self._Vinv @ x))).real
        return expm_action(self.M, s, x)

    def apply_many(self, s: np.ndarray, x: np.ndarray) -> np.ndarray:
        """exp(s_i * M) @ x for every s_i; returns shape (len(s), dim)."""
        s = np.asarray(s, dtype=float)
        if self._mode == "eigen":
            coeff = self._Vinv @ x
            E = np.exp(np.outer(s, self._w)) * coeff
            return (E @ self._V.T).real
        return np.array([expm_action(self.M, si, x) for si in s])

    def matrix(self, s: float) -> np.ndarray:
        if self._mode == "eigen":
            return ((self._V * np.exp(s * self._w)) @ self._Vinv).real
        return expm(s * self.M)

    def integral_apply(self, s: float, x: np.ndarray) -> np.ndarray:
        """Integral of exp(u*M) @ x over u in [0, s]."""
        if self._mode == "eigen":
            z = s * self._w
            phi = np.empty_like(z)
            small = np.abs(z) <= 1e-4
            phi[small] = s * (1.0 + z[small] / 2.0 + z[small] ** 2 / 6.0)
            phi[~small] = (np.exp(z[~small]) - 1.0) / self._w[~small]
            return (self._V @ (phi * (self._Vinv @ x))).real
        return expm_integral_action(self.M, s, x)


def quad_simpson(f, a: float, b: float, n: int) -> float:
    """Composite Simpson quadrature with ``n`` subintervals (rounded up to even)."""
    if b == a:
        return 0.0
    n = max(2, n + (n % 2))
    x = np.linspace(a, b, n + 1)
    try:
        fx = np.asarray(f(x), dtype=float)
        if fx.shape != x.shape:
            raise TypeError
    except (TypeError, ValueError):
        fx = np.array([f(xi) for xi in x], dtype=float)
    h = (b - a) / n
    return h / 3 * (fx[0] + fx[-1] + 4 * fx[1:-1:2].sum() + 2 * fx[2:-1:2].sum())


def fd_derivative(f, x: float, h: float, order: int = 1) -> float:
    """Central finite difference of first or second order."""
    if order == 1:
        return (f(x + h) - f(x - h)) / (2 * h)
    if order == 2:
        return (f(x + h) - 2 * f(x) + f(x - h)) / (h * h)
    raise ValueError("order must be 1 or 2")
