import math

import numpy as np
import pytest

from hawkespop.kernels import MarkDistribution, MarkKernel, TimeFactor
from hawkespop.models import GeneralModel, RateFunction
from hawkespop.numerics import quad_simpson
from hawkespop.pyramid import (MarkovState, apply_jump, integrate,
                               markov_state_at, markov_state_propagated,
                               matrix_state_at, propagate_state, pyramid_at,
                               pyramid_to_csv)
from hawkespop.simulate import EventLog, simulate_general, simulate_standard


def _log_from_times(times, horizon):
    times = np.asarray(times, dtype=float)
    n = len(times)
    return EventLog(times=times, marks=np.zeros(n),
                    gens=np.full(n, -1, np.int64), pops=np.full(n, 2, np.int64),
                    horizon=horizon, seed=None)


def test_pyramid_empty():
    log = _log_from_times([], 1.0)
    pyr = pyramid_at(log, 0.7)
    assert pyr.size == 0
    assert integrate(pyr, lambda a: 1.0) == 0.0


def test_pyramid_ages_direct():
    log = _log_from_times([0.2, 0.7], 1.5)
    pyr = pyramid_at(log, 1.0)
    np.testing.assert_allclose(np.sort(pyr.ages), [0.3, 0.8])


def test_pyramid_counting_oracle(model_exp2, rng):
    for seed in range(20):
        log = simulate_standard(model_exp2.kernel, model_exp2.mu, 3.0, seed)
        for t in rng.uniform(0.0, 3.0, size=5):
            pyr = pyramid_at(log, t)
            assert integrate(pyr, lambda a: 1.0) == log.count_at(t)


def test_integrate_two_term_sum(kernel_exp2):
    log = _log_from_times([0.2, 0.7], 1.5)
    pyr = pyramid_at(log, 1.0)
    got = integrate(pyr, lambda a: kernel_exp2.phi(a))
    assert got == pytest.approx(math.exp(-1.6) + math.exp(-0.6), rel=1e-12)


def test_integrate_matches_state_component(model_exp2):
    log = simulate_standard(model_exp2.kernel, model_exp2.mu, 2.0, seed=5)
    k = model_exp2.kernel
    for t in (0.5, 1.3, 2.0):
        pyr = pyramid_at(log, t)
        direct = integrate(pyr, lambda a: k.phi(a))
        state = markov_state_at(log, k, t)
        assert abs(direct - state.X[1]) <= 1e-9 * max(1.0, abs(direct))


def test_propagate_zero_state(kernel_exp2):
    s = MarkovState(t=0.0, X=np.zeros(2))
    out = propagate_state(s, 1.7, kernel_exp2)
    np.testing.assert_array_equal(out.X, np.zeros(2))


def test_propagate_closed_form(kernel_exp2):
    # companion of the rate-2 exponential kernel is diag-like: closed form
    s = MarkovState(t=0.0, X=np.array([1.0, 1.0]))
    out = propagate_state(s, 1.0, kernel_exp2)
    np.testing.assert_allclose(out.X, [1.0, math.exp(-2.0)], rtol=1e-12)


def test_count_invariance_and_jump(kernel_delayed):
    s = MarkovState(t=0.0, X=np.array([3.0, 0.4, -0.1]))
    moved = propagate_state(s, 2.0, kernel_delayed)
    assert moved.X[0] == pytest.approx(3.0, abs=1e-12)
    jumped = apply_jump(moved, kernel_delayed)
    assert jumped.X[0] == pytest.approx(4.0, abs=1e-12)
    np.testing.assert_allclose(jumped.X - moved.X, kernel_delayed.jump_vec)


def test_direct_vs_propagated_states(model_exp2, kernel_delayed):
    from hawkespop.models import StandardModel
    models = [model_exp2, StandardModel(kernel=kernel_delayed, mu=1.0)]
    for model in models:
        for seed in range(10):
            log = simulate_standard(model.kernel, model.mu, 2.0, seed)
            for t in (0.7, 1.4, 2.0):
                a = markov_state_at(log, model.kernel, t)
                b = markov_state_propagated(log, model.kernel, t)
                scale = max(1.0, np.max(np.abs(a.X)))
                assert np.max(np.abs(a.X - b.X)) / scale < 1e-8


def test_aging_decomposition_event_free(model_exp2):
    # on an event-free interval the change of <Z, f> is pure transport:
    # <Z_{t+h}, f> - <Z_t, f> = integral of <Z_s, f'> (no births)
    log = simulate_standard(model_exp2.kernel, model_exp2.mu, 2.0, seed=9)
    k = model_exp2.kernel
    gaps = np.diff(np.concatenate([[0.0], log.times, [2.0]]))
    i = int(np.argmax(gaps))
    left = np.concatenate([[0.0], log.times, [2.0]])[i]
    h = min(1e-4, gaps[i] / 3)
    t = left + gaps[i] / 2
    f_t = integrate(pyramid_at(log, t), lambda a: k.phi(a))
    f_th = integrate(pyramid_at(log, t + h), lambda a: k.phi(a))
    dN = log.count_at(t + h) - log.count_at(t)
    assert dN == 0
    mid = integrate(pyramid_at(log, t + h / 2), lambda a: float(k.stack(a)[2])
                    if k.dim > 2 else float(k.c @ k.stack(a)))
    # exponential kernel: phi' = c . stack
    assert abs((f_th - f_t) - (k.phi(0.0) * dN + h * mid)) < 1e-7 * max(1.0, abs(f_t))


def test_stack_transport_identity(model_exp2, kernel_delayed):
    # <Z_t, phi^(k)> = m_k N_t + integral_0^t <Z_s, phi^(k+1)> ds
    from hawkespop.models import StandardModel
    for model in (model_exp2, StandardModel(kernel=kernel_delayed, mu=1.0)):
        log = simulate_standard(model.kernel, model.mu, 1.5, seed=3)
        k = model.kernel
        t = 1.5

        def seg_sum(s, comp, cutoff):
            # population frozen at the segment start: integrand is smooth
            atoms = log.times[log.times <= cutoff]
            if len(atoms) == 0:
                return 0.0
            stacks = k.stack_many(s - atoms)
            if comp < k.dim:
                return float(stacks[:, comp].sum())
            return float(k.c @ stacks.sum(axis=0))

        for comp in range(1, k.dim):
            lhs = seg_sum(t, comp, t)
            total = 0.0
            breaks = np.concatenate([[0.0], log.times[log.times <= t], [t]])
            for a, b in zip(breaks[:-1], breaks[1:]):
                if b > a + 1e-12:
                    total += quad_simpson(lambda s: seg_sum(s, comp + 1, a), a, b, 64)
            rhs = k.m_init[comp - 1] * log.count_at(t) + total
            assert abs(lhs - rhs) < 1e-6 * max(1.0, abs(lhs))


def test_matrix_state_empty(dz_model):
    log = _log_from_times([], 1.0)
    ms = matrix_state_at(log, dz_model, 0.5, external_log=_log_from_times([], 1.0))
    assert np.all(ms.M2 == 0.0)
    assert np.all(ms.M1 == 0.0)


def test_matrix_state_single_event_hand_case(dz_model):
    t1, x1, t = 0.4, 2.0, 1.0
    log = EventLog(times=np.array([t1]), marks=np.array([x1]),
                   gens=np.array([-1]), pops=np.array([2]), horizon=1.5, seed=None)
    empty = _log_from_times([], 1.5)
    ms = matrix_state_at(log, dz_model, t, external_log=empty)
    contrib = x1 * math.exp(-(t - t1))
    np.testing.assert_allclose(ms.M2, [[1.0, 1.0], [contrib, contrib]], rtol=1e-10)
    assert ms.M2[0, 0] == pytest.approx(1.0)  # count entry
    assert ms.M2[1, 1] == pytest.approx(contrib, rel=1e-10)


def test_matrix_state_time_constant_column_equals_vector_state(kernel_exp2):
    # unit constant time factor: every column of M2 equals the plain state
    phi = MarkKernel.from_ode_kernel(kernel_exp2,
                                     mark_dist=MarkDistribution.point_mass(1.0))
    gm = GeneralModel(mu=RateFunction.constant(1.0),
                      rho=RateFunction.constant(0.0), phi=phi, psi=None)
    log = simulate_standard(kernel_exp2, 1.0, 2.0, seed=11)
    ms = matrix_state_at(log, gm, 1.7)
    X = markov_state_at(log, kernel_exp2, 1.7).X
    np.testing.assert_allclose(ms.M2[:, 0], X, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(ms.M2[:, 1], X, rtol=1e-9, atol=1e-12)


def test_matrix_state_cross_check_on_simulated_paths(dz_model):
    for seed in range(5):
        ext, obs = simulate_general(dz_model, 1.0, seed)
        ms = matrix_state_at(obs, dz_model, 1.0, external_log=ext)
        lam_direct = (dz_model.mu.value(1.0) + ms.M2[1, 1] + ms.M1[1, 1])
        grid = np.array([1.0])
        from hawkespop.simulate import intensity_path
        lam = intensity_path(obs, dz_model, grid, external_log=ext)[0]
        assert lam == pytest.approx(lam_direct, rel=1e-8)


def test_matrix_state_cos_squared_cross_check():
    phi = MarkKernel.dassios_zhao(1.0, MarkDistribution.exponential(2.0),
                                  time_factor=TimeFactor.cos_squared(1.0))
    gm = GeneralModel(mu=RateFunction.constant(1.0),
                      rho=RateFunction.constant(0.0), phi=phi, psi=None)
    _, obs = simulate_general(gm, 1.5, seed=4)
    # direct-vs-propagated assertion runs inside matrix_state_at
    ms = matrix_state_at(obs, gm, 1.5)
    assert ms.M2.shape == (2, 3)


def test_pyramid_csv_export(tmp_path, model_exp2):
    log = simulate_standard(model_exp2.kernel, model_exp2.mu, 2.0, seed=2)
    pyr = pyramid_at(log, 2.0)
    f = tmp_path / "pyr.csv"
    pyramid_to_csv(pyr, f, age_bin=0.1)
    lines = f.read_text().splitlines()
    assert lines[0] == "age_bin_left,count"
    counts = sum(int(l.split(",")[1]) for l in lines[1:])
    assert counts == pyr.size
    f2 = tmp_path / "pyr2.csv"
    pyramid_to_csv(pyr, f2, age_bin=0.1, mark_bin=0.5)
    assert f2.read_text().splitlines()[0] == "age_bin_left,mark_bin_left,count"
