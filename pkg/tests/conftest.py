import numpy as np
import pytest

from hawkespop.kernels import (MarkDistribution, MarkKernel, delayed_kernel,
                               exponential_kernel, kernel_from_exponential_modes,
                               zero_kernel)
from hawkespop.models import GeneralModel, RateFunction, StandardModel


@pytest.fixture(scope="session")
def kernel_exp2():
    return exponential_kernel(2.0)


@pytest.fixture(scope="session")
def kernel_exp1():
    """Critical exponential kernel (unit branching ratio)."""
    return exponential_kernel(1.0)


@pytest.fixture(scope="session")
def kernel_delayed():
    """Critical delayed kernel a*exp(-a)."""
    return delayed_kernel(1.0, 1.0)


@pytest.fixture(scope="session")
def kernel_modes():
    """Generic order-2 kernel 2exp(-a) - exp(-3a) with nonzero value at 0."""
    return kernel_from_exponential_modes([2.0, -1.0], [1.0, 3.0])


@pytest.fixture(scope="session")
def kernel_oscillating():
    """exp(-a)(1 + cos a): order 3 with a complex-conjugate eigenpair."""
    from hawkespop.kernels import build_ode_kernel
    return build_ode_kernel([0.0, -2.0, -4.0, -3.0], [2.0, -2.0, 1.0])


@pytest.fixture(scope="session")
def model_exp2(kernel_exp2):
    return StandardModel(kernel=kernel_exp2, mu=1.0)


@pytest.fixture(scope="session")
def model_poisson():
    return StandardModel(kernel=zero_kernel(), mu=1.0)


@pytest.fixture(scope="session")
def dz_model():
    """Both birth rates x*exp(-a), Exp(2) marks, unit constant baselines."""
    phi = MarkKernel.dassios_zhao(1.0, MarkDistribution.exponential(2.0))
    psi = MarkKernel.dassios_zhao(1.0, MarkDistribution.exponential(2.0))
    return GeneralModel(mu=RateFunction.constant(1.0),
                        rho=RateFunction.constant(1.0), phi=phi, psi=psi)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240901)
