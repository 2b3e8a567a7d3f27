import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phs_lab.core import TwoPortPhs
from phs_lab.errors import ConvergenceError, SingularMatrixError
from phs_lab.legendre import legendre_involution, partial_legendre, verify_legendre_identities
from phs_lab.models import ActuatorParams, GasPistonParams, gas_entropy, make_actuator, make_gas_piston


def quadratic(a, b, c):
    """H = a x1^2/2 + b x1 x2 + c x2^2/2 with n1 = n2 = 1."""
    return TwoPortPhs(
        n1=1,
        n2=1,
        m2=1,
        hamiltonian=lambda x1, x2: 0.5 * a * x1[0] ** 2 + b * x1[0] * x2[0] + 0.5 * c * x2[0] ** 2,
        J1=lambda x1, x2: np.zeros((1, 1)),
        J2=lambda x1, x2: np.zeros((1, 1)),
        G1=np.eye(1),
        G2=lambda x1, x2: np.eye(1),
        gradient=lambda x1, x2: (np.array([a * x1[0] + b * x2[0]]), np.array([b * x1[0] + c * x2[0]])),
        hessian11=lambda x1, x2: np.array([[a]]),
        hessian12=lambda x1, x2: np.array([[b]]),
    )


def test_quadratic_closed_form():
    a, b, c = 2.0, 0.5, 3.0
    sys = quadratic(a, b, c)
    e1, x2 = 1.3, -0.4
    pt = partial_legendre(sys, [e1], [x2], [0.0])
    x1 = (e1 - b * x2) / a
    assert pt.x1_solved[0] == pytest.approx(x1, rel=1e-14)
    expected = 0.5 * a * x1**2 + b * x1 * x2 + 0.5 * c * x2**2 - e1 * x1
    assert pt.h_star == pytest.approx(expected, rel=1e-14)
    # H* = -(e1 - b x2)^2/(2a) + c x2^2/2
    assert pt.h_star == pytest.approx(-((e1 - b * x2) ** 2) / (2 * a) + 0.5 * c * x2**2, rel=1e-13)


@settings(max_examples=40, deadline=None)
@given(
    a=st.floats(0.5, 5.0),
    b=st.floats(-2.0, 2.0),
    e1=st.floats(-3.0, 3.0),
    x2=st.floats(-3.0, 3.0),
)
def test_identities_and_involution_on_quadratics(a, b, e1, x2):
    sys = quadratic(a, b, 1.0)
    pt = partial_legendre(sys, [e1], [x2], [0.0])
    r1, r2 = verify_legendre_identities(sys, pt)
    assert r1 < 1e-6 and r2 < 1e-6
    inv = legendre_involution(sys, pt.x1_solved, [x2])
    assert inv.error < 1e-6


def test_gas_and_actuator_identities():
    gp = GasPistonParams()
    gas = make_gas_piston(gp)
    x2 = np.array([1.5e-3, 0.3])
    pt = partial_legendre(gas, [350.0], x2, [gas_entropy(gp, 300.0, 1.5e-3)])
    assert gas.e1(pt.x1_solved, x2)[0] == pytest.approx(350.0, rel=1e-12)
    r1, r2 = verify_legendre_identities(gas, pt)
    assert r1 < 1e-5 and r2 < 1e-5
    act = make_actuator(ActuatorParams())
    pt = partial_legendre(act, [1.5], [0.2, 0.1], [0.0])
    r1, r2 = verify_legendre_identities(act, pt)
    assert r1 < 1e-5 and r2 < 1e-5
    assert legendre_involution(act, [0.4], [0.2, 0.1]).error < 1e-6


def test_singular_hessian_is_reported():
    sys = quadratic(0.0, 1.0, 1.0)
    with pytest.raises(SingularMatrixError) as info:
        partial_legendre(sys, [1.0], [0.0], [0.0])
    assert info.value.condition > 1e12


def test_unreachable_e1_does_not_converge():
    # dH/dx1 = tanh(x1) never reaches 2
    sys = TwoPortPhs(
        n1=1,
        n2=1,
        m2=1,
        hamiltonian=lambda x1, x2: float(np.log(np.cosh(x1[0]))) + 0.5 * x2[0] ** 2,
        J1=lambda x1, x2: np.zeros((1, 1)),
        J2=lambda x1, x2: np.zeros((1, 1)),
        G1=np.eye(1),
        G2=lambda x1, x2: np.eye(1),
        gradient=lambda x1, x2: (np.tanh(x1), x2.copy()),
        hessian11=lambda x1, x2: np.array([[1.0 - np.tanh(x1[0]) ** 2]]),
        hessian12=lambda x1, x2: np.zeros((1, 1)),
    )
    with pytest.raises((ConvergenceError, SingularMatrixError)):
        partial_legendre(sys, [2.0], [0.0], [0.0])
