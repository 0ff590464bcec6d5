import math

import numpy as np
import pytest
import sympy

from hawkespop.errors import BlowUp
from hawkespop.kernels import (MarkDistribution, MarkKernel,
                               exponential_kernel, zero_kernel)
from hawkespop.laplace import (b_coefficients, joint_laplace_N_lambda,
                               laplace_general, laplace_X,
                               martingale_value_standard, solve_A_ode,
                               solve_matrix_riccati)
from hawkespop.models import GeneralModel, RateFunction, StandardModel
from hawkespop.moments import mean_ode, second_moment_ode


def test_zero_terminal_is_fixed_point(kernel_exp2):
    rp = solve_A_ode(kernel_exp2, np.zeros(2), 1.0)
    assert not rp.blowup
    assert np.max(np.abs(rp.path.values[:, :2])) == 0.0
    assert laplace_X(kernel_exp2, 1.0, np.zeros(2), 1.0) == 1.0


def test_laplace_zero_baseline(kernel_exp2):
    assert laplace_X(kernel_exp2, 0.0, np.array([-0.5, -0.2]), 1.0) == 1.0


def test_solve_A_richardson(kernel_exp2):
    v = np.array([-0.5, -0.2])
    a = solve_A_ode(kernel_exp2, v, 1.0, h=1e-3).state_at_zero()
    b = solve_A_ode(kernel_exp2, v, 1.0, h=5e-4).state_at_zero()
    assert np.max(np.abs(a - b)) <= 1e-9


def test_poisson_closed_form_oracle():
    # phi == 0: N_T Poisson(mu T), lambda_T = mu; both routes must match
    kz = zero_kernel()
    mu, T, th1, th2 = 1.3, 0.9, -0.5, -0.2
    exact = math.exp(th2 * mu) * math.exp(mu * T * math.expm1(th1))
    via_G = joint_laplace_N_lambda(kz, mu, th1, th2, T)
    via_A = math.exp(th2 * mu) * laplace_X(kz, mu, np.array([th1, th2]), T)
    assert via_G == pytest.approx(exact, rel=1e-10)
    assert via_A == pytest.approx(exact, rel=1e-10)


def test_b_coefficients_small_orders(kernel_delayed, kernel_modes):
    np.testing.assert_allclose(b_coefficients([0.0, -2.0], [1.0]), [1.0])
    np.testing.assert_allclose(b_coefficients(kernel_delayed.c, kernel_delayed.m_init),
                               [1.0, 0.0], atol=1e-14)
    np.testing.assert_allclose(b_coefficients(kernel_modes.c, kernel_modes.m_init),
                               [1.0 - 1.0 * kernel_modes.c[2], -1.0])


def test_b_coefficients_symbolic_rederivation():
    # order 2: eliminate the exponent components of the backward vector ODE
    # symbolically and read off the coefficients of G', G''
    m0, m1, c0, c1, cm1, th1 = sympy.symbols("m0 m1 c0 c1 cm1 th1")
    t = sympy.symbols("t")
    G = sympy.Function("G")
    # A_{-1} = th1 - cm1*G, A_1 = G', A_0 = -c1*G' - G''
    A_m1 = th1 - cm1 * G(t)
    A_1 = sympy.diff(G(t), t)
    A_0 = -c1 * A_1 - sympy.diff(A_1, t)
    exponent = sympy.expand(A_m1 * 1 + A_0 * m0 + A_1 * m1)
    coeff_G1 = exponent.coeff(sympy.diff(G(t), t))
    coeff_G2 = exponent.coeff(sympy.diff(G(t), t, 2))
    assert sympy.simplify(coeff_G1 - (m1 - m0 * c1)) == 0
    assert sympy.simplify(coeff_G2 - (-m0)) == 0
    got = b_coefficients([0.0, -3.0, -4.0], [1.0, 1.0])
    np.testing.assert_allclose(got, [1.0 - 1.0 * (-4.0), -1.0])


def test_route_equivalence_orders_1_and_2(kernel_exp2, kernel_delayed, kernel_modes,
                                           kernel_oscillating):
    mu, T = 1.0, 1.0
    for k in (kernel_exp2, kernel_delayed, kernel_modes, kernel_oscillating):
        for th1, th2 in [(-0.5, -0.2), (-1.0, 0.0), (0.0, -0.7), (-0.25, -0.6)]:
            v = np.zeros(k.dim)
            v[0], v[1] = th1, th2
            via_A = math.exp(th2 * mu) * laplace_X(k, mu, v, T)
            via_G = joint_laplace_N_lambda(k, mu, th1, th2, T)
            assert abs(via_A - via_G) <= 1e-7


def test_joint_laplace_at_zero_is_one(kernel_exp2, kernel_delayed):
    for k in (kernel_exp2, kernel_delayed):
        assert joint_laplace_N_lambda(k, 1.0, 0.0, 0.0, 1.0) == 1.0


def test_moment_extraction_by_finite_differences(kernel_exp2):
    mu, T, h = 1.0, 1.0, 1e-4
    mean = mean_ode(kernel_exp2, mu, T).final[0]
    vpath = second_moment_ode(kernel_exp2, mu, T)
    u = vpath.meta["mean"][-1]
    var = vpath.final[0, 0] - u[0] ** 2

    def logL(th1):
        return math.log(joint_laplace_N_lambda(kernel_exp2, mu, th1, 0.0, T))

    mean_fd = (logL(h) - logL(-h)) / (2 * h)
    var_fd = (logL(h) - 2 * logL(0.0) + logL(-h)) / (h * h)
    assert abs(mean_fd - mean) / mean <= 1e-4
    assert abs(var_fd - var) / var <= 1e-3


def test_laplace_monotone_in_exponent(kernel_exp2):
    vals = []
    for s in np.linspace(-1.0, -0.2, 5):
        vals.append(laplace_X(kernel_exp2, 1.0, np.array([s, -0.3]), 1.0))
    assert np.all(np.diff(vals) > 0)
    vals = []
    for s in np.linspace(-1.0, -0.2, 5):
        vals.append(laplace_X(kernel_exp2, 1.0, np.array([-0.3, s]), 1.0))
    assert np.all(np.diff(vals) > 0)


def test_log_transform_convex(kernel_exp2):
    h = 1e-3
    for th1 in (-0.5, -0.1):
        second = (math.log(joint_laplace_N_lambda(kernel_exp2, 1.0, th1 + h, 0.0, 1.0))
                  - 2 * math.log(joint_laplace_N_lambda(kernel_exp2, 1.0, th1, 0.0, 1.0))
                  + math.log(joint_laplace_N_lambda(kernel_exp2, 1.0, th1 - h, 0.0, 1.0))) / h ** 2
        assert second >= -1e-8


def test_blowup_reported(kernel_exp1):
    # strongly positive exponent on the critical kernel: transform is infinite
    with pytest.raises(BlowUp) as exc:
        laplace_X(kernel_exp1, 1.0, np.array([3.0, 3.0]), 5.0)
    assert exc.value.blowup_time is not None


def test_laplace_mc_oracle(kernel_exp2):
    from hawkespop.mc import estimate_state_stats
    model = StandardModel(kernel=kernel_exp2, mu=1.0)
    v = np.array([-0.5, 0.0])
    ana = laplace_X(kernel_exp2, 1.0, v, 1.0)
    res = estimate_state_stats(model, [{"name": "L", "stat": "exp_theta_X",
                                        "theta": v.tolist()}], 1.0, 20000, 4242)[0]
    assert abs(res.mean - ana) <= 4 * res.std_error


def test_matrix_riccati_zero_fixed_point(dz_model):
    u = np.zeros((2, 2))
    v = np.zeros((2, 2))
    rp = solve_matrix_riccati(dz_model, u, v, 1.0)
    assert not rp.blowup
    assert np.max(np.abs(rp.path.values[:, :8])) == 0.0
    assert laplace_general(dz_model, u, v, 1.0) == 1.0


def test_matrix_riccati_degenerates_to_vector(kernel_exp2):
    phi = MarkKernel.from_ode_kernel(kernel_exp2,
                                     mark_dist=MarkDistribution.point_mass(1.0))
    gm = GeneralModel(mu=RateFunction.constant(1.0),
                      rho=RateFunction.constant(0.0), phi=phi, psi=None)
    vq = np.zeros((2, 2))
    vq[:, 0] = [-0.5, -0.2]
    lg = laplace_general(gm, None, vq, 1.0)
    lx = laplace_X(kernel_exp2, 1.0, np.array([-0.5, -0.2]), 1.0)
    assert abs(lg - lx) <= 1e-8
    # the row-sum of the matrix exponent reduces to the vector exponent
    rp_m = solve_matrix_riccati(gm, None, vq, 1.0)
    rp_v = solve_A_ode(kernel_exp2, np.array([-0.5, -0.2]), 1.0)
    A2_0 = rp_m.state_at_zero()[:4].reshape(2, 2)
    np.testing.assert_allclose(A2_0[0] + A2_0[1], rp_v.state_at_zero()[:2],
                               atol=1e-8)


def test_laplace_general_no_events_is_one(dz_model):
    gm = GeneralModel(mu=RateFunction.constant(0.0), rho=RateFunction.constant(0.0),
                      phi=dz_model.phi, psi=dz_model.psi)
    u = np.zeros((2, 2))
    v = np.full((2, 2), -0.4)
    assert laplace_general(gm, u, v, 1.0) == pytest.approx(1.0, abs=1e-14)


def test_laplace_general_mc_oracle(dz_model):
    from hawkespop.mc import estimate_state_stats
    v = np.zeros((2, 2))
    v[0, 0] = -0.3
    u = np.zeros((2, 2))
    ana = laplace_general(dz_model, u, v, 1.0)
    res = estimate_state_stats(dz_model, [{"name": "L", "stat": "exp_theta_count",
                                           "theta": -0.3}], 1.0, 10000, 808)[0]
    assert abs(res.mean - ana) <= 4 * res.std_error


def test_martingale_value_deterministic_at_zero(kernel_exp2, model_exp2):
    # empty path: the martingale at time 0+ is exp(A_0 . 0 - 0) = 1
    from hawkespop.simulate import EventLog
    rp = solve_A_ode(kernel_exp2, np.array([-0.5, -0.2]), 1.0)
    log = EventLog(times=np.array([]), marks=np.array([]),
                   gens=np.array([], np.int64), pops=np.array([], np.int64),
                   horizon=1.0, seed=None)
    val = martingale_value_standard(kernel_exp2, 1.0, rp, log, 0.0)
    assert val == pytest.approx(1.0, abs=1e-12)


def test_martingale_mean_small(model_exp2):
    from hawkespop.mc import estimate
    res = estimate(model_exp2, "martingale_standard", 1.0, 2000, 515,
                   exponent=np.array([-0.5, -0.2]), at_time=0.5)
    assert abs(res.mean - 1.0) <= 4 * res.std_error


def test_martingale_general_mean_small(dz_model):
    from hawkespop.mc import estimate
    u = np.zeros((2, 2))
    v = np.zeros((2, 2))
    v[0, 0] = -0.3
    for t_eval in (0.5, 1.0):
        res = estimate(dz_model, "martingale_general", 1.0, 1500, 616,
                       u_matrix=u, v_matrix=v, at_time=t_eval)
        assert abs(res.mean - 1.0) <= 4 * res.std_error
