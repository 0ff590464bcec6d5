"""Monte Carlo estimation and statistical comparison against analytic values.

Paths are simulated in fixed-size chunks, each chunk on its own child seed,
and per-path values land in arrays indexed by path, so aggregation is
identical no matter how chunks are scheduled across workers.  Comparisons
use |z| <= z_max with z_max = 4 by default: many checks run in one suite and
the wide gate keeps the family-wise false-alarm rate negligible.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .errors import HawkespopError, ZeroVariance
from .laplace import (martingale_value_general, martingale_value_standard,
                      solve_A_ode, solve_matrix_riccati)
from .models import GeneralModel, StandardModel
from .simulate import (compensator_at_events, simulate_general,
                       simulate_standard, simulate_standard_batch)

__all__ = [
    "McReport",
    "EstimateResult",
    "estimate",
    "estimate_state_stats",
    "compare",
    "ks_time_rescaling",
]

CHUNK = 4096

STATE_STATS = ("N_T", "lambda_T", "N_T2", "lambda_T2", "exp_theta_X",
               "exp_theta_count")


@dataclass(frozen=True)
class McReport:
    """One analytic-vs-empirical comparison."""

    name: str
    analytic: float
    empirical_mean: float
    std_error: float
    n_paths: int
    z: float
    passed: bool

    def row(self) -> str:
        tag = "pass" if self.passed else "FAIL"
        return (f"{self.name}: analytic={self.analytic:.8g} "
                f"mc={self.empirical_mean:.8g} se={self.std_error:.3g} "
                f"z={self.z:+.3f} [{tag}]")


@dataclass
class EstimateResult:
    """Aggregated per-path statistic values ready for comparison."""

    statistic: str
    mean: float
    std_error: float
    n_paths: int
    values: np.ndarray | None = None
    n_failed: int = 0


def _chunk_seed(seed, chunk_start: int) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(entropy=seed.entropy,
                                      spawn_key=tuple(seed.spawn_key) + (chunk_start,))
    return np.random.SeedSequence(entropy=int(seed), spawn_key=(chunk_start,))


def _state_values(model: StandardModel, stat: str, theta, X_T, counts) -> np.ndarray:
    if stat == "N_T":
        return counts.astype(float)
    if stat == "lambda_T":
        return model.mu + X_T[:, 1]
    if stat == "N_T2":
        return counts.astype(float) ** 2
    if stat == "lambda_T2":
        return (model.mu + X_T[:, 1]) ** 2
    if stat == "exp_theta_X":
        return np.exp(X_T @ np.asarray(theta, dtype=float))
    if stat == "exp_theta_count":
        return np.exp(float(theta) * counts)
    raise ValueError(f"unknown state statistic {stat!r}")


def _standard_chunk(model, T, seed, chunk_start, count, specs):
    X_T, counts, _ = simulate_standard_batch(
        model.kernel, model.mu, T, _chunk_seed(seed, chunk_start), count)
    return [_state_values(model, s["stat"], s.get("theta"), X_T, counts)
            for s in specs]


def _general_chunk(model, T, seed, chunk_start, count, specs):
    out = [np.empty(count) for _ in specs]
    for i in range(count):
        ss = _chunk_seed(seed, chunk_start + i)
        _, obs = simulate_general(model, T, ss)
        n = obs.n_events
        for j, s in enumerate(specs):
            stat = s["stat"]
            if stat == "N_T":
                out[j][i] = n
            elif stat == "N_T2":
                out[j][i] = float(n) ** 2
            elif stat == "exp_theta_count":
                out[j][i] = math.exp(float(s["theta"]) * n)
            else:
                raise ValueError(f"unsupported general-model statistic {stat!r}")
    return out


def estimate_state_stats(model, specs, T: float, n_paths: int, seed,
                         workers: int = 1) -> list[EstimateResult]:
    """Estimate several terminal-state statistics from one set of paths.

    Each spec is a dict with keys ``name``, ``stat`` and optional ``theta``.
    """
    if n_paths < 100:
        raise ValueError("need n_paths >= 100")
    chunk_fn = _standard_chunk if isinstance(model, StandardModel) else _general_chunk
    starts = list(range(0, n_paths, CHUNK))
    jobs = [(s, min(CHUNK, n_paths - s)) for s in starts]
    buf = [np.empty(n_paths) for _ in specs]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(chunk_fn, model, T, seed, s, c, specs) for s, c in jobs]
            for (s, c), fut in zip(jobs, futs):
                vals = fut.result()
                for j in range(len(specs)):
                    buf[j][s:s + c] = vals[j]
    else:
        for s, c in jobs:
            vals = chunk_fn(model, T, seed, s, c, specs)
            for j in range(len(specs)):
                buf[j][s:s + c] = vals[j]
    out = []
    for j, spec in enumerate(specs):
        v = buf[j]
        out.append(EstimateResult(
            statistic=spec.get("name", spec["stat"]),
            mean=float(v.mean()),
            std_error=float(v.std(ddof=1) / math.sqrt(n_paths)),
            n_paths=n_paths, values=None))
    return out


def estimate(model, statistic: str, T: float, n_paths: int, seed, *,
             theta=None, exponent=None, at_time=None, u_matrix=None,
             v_matrix=None, workers: int = 1) -> EstimateResult:
    """Per-path simulation and evaluation of one statistic.

    Terminal-state statistics use the batched simulator; the martingale
    statistics re-walk each path against a solved exponent path.
    """
    if statistic in STATE_STATS:
        spec = {"name": statistic, "stat": statistic, "theta": theta}
        return estimate_state_stats(model, [spec], T, n_paths, seed,
                                    workers=workers)[0]
    if n_paths < 100:
        raise ValueError("need n_paths >= 100")
    if statistic == "martingale_standard":
        if not isinstance(model, StandardModel):
            raise ValueError("martingale_standard needs a standard model")
        v = np.asarray(exponent, dtype=float)
        rp = solve_A_ode(model.kernel, v, T)

        def one_path(i):
            log = simulate_standard(model.kernel, model.mu, T, _chunk_seed(seed, i))
            return martingale_value_standard(model.kernel, model.mu, rp, log,
                                             T if at_time is None else float(at_time))
        return _per_path_estimate(statistic, one_path, n_paths)
    if statistic == "martingale_general":
        if not isinstance(model, GeneralModel):
            raise ValueError("martingale_general needs a general model")
        rp = solve_matrix_riccati(model, u_matrix, v_matrix, T)

        def one_path(i):
            ext, obs = simulate_general(model, T, _chunk_seed(seed, i))
            return martingale_value_general(model, rp, obs, ext,
                                            T if at_time is None else float(at_time))
        return _per_path_estimate(statistic, one_path, n_paths)
    raise ValueError(f"unknown statistic {statistic!r}")


def _per_path_estimate(statistic: str, one_path, n_paths: int) -> EstimateResult:
    """Per-path evaluation; failed paths are counted and excluded, not fatal."""
    vals = np.empty(n_paths)
    ok = np.ones(n_paths, dtype=bool)
    for i in range(n_paths):
        try:
            vals[i] = one_path(i)
        except HawkespopError:
            ok[i] = False
    good = vals[ok]
    if len(good) < 2:
        raise ZeroVariance(f"{statistic}: too few successful paths")
    return EstimateResult(statistic=statistic, mean=float(good.mean()),
                          std_error=float(good.std(ddof=1) / math.sqrt(len(good))),
                          n_paths=int(len(good)), values=good,
                          n_failed=int(n_paths - len(good)))


def compare(name: str, analytic: float, est: EstimateResult,
            z_max: float = 4.0) -> McReport:
    """z-score gate of an empirical mean against its analytic target."""
    if est.std_error <= 0.0:
        raise ZeroVariance(f"{name}: all {est.n_paths} paths produced the same value")
    z = (est.mean - analytic) / est.std_error
    return McReport(name=name, analytic=float(analytic),
                    empirical_mean=est.mean, std_error=est.std_error,
                    n_paths=est.n_paths, z=float(z), passed=bool(abs(z) <= z_max))


def ks_time_rescaling(model: StandardModel, T: float, n_paths: int, seed):
    """Kolmogorov-Smirnov test of the time-rescaled interarrivals.

    Transforming event times by the integrated intensity must yield unit
    exponential interarrivals; returns (statistic, p_value, n_samples) for
    the pooled sample over ``n_paths`` paths.
    """
    pooled = []
    for i in range(n_paths):
        log = simulate_standard(model.kernel, model.mu, T, _chunk_seed(seed, i))
        if log.n_events == 0:
            continue
        lam_int = compensator_at_events(log, model)
        pooled.append(np.diff(np.concatenate([[0.0], lam_int])))
    sample = np.concatenate(pooled) if pooled else np.array([])
    if len(sample) < 10:
        raise ValueError("too few events pooled for a KS test")
    res = sps.kstest(sample, "expon")
    return float(res.statistic), float(res.pvalue), len(sample)
