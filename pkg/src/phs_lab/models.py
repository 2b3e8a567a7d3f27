"""Built-in models with closed-form gradients and Hessians.

Units are SI throughout.  Defaults are chosen so that every acceptance
scenario runs with them unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import PhsSystem, SystemKernel, TwoPortPhs
from .errors import DomainError

R_GAS = 8.314


# --------------------------------------------------------------------- gas piston


@dataclass(frozen=True)
class GasPistonParams:
    """Ideal gas under a piston.

    The internal energy is
    ``U(S, V) = n c_v T0 exp((S - S0)/(n c_v)) (V/V0)^(-R/c_v)`` so that
    ``dU/dS = T`` and ``-dU/dV = n R T / V``.
    """

    n_mol: float = 1.0
    c_v: float = 1.5 * R_GAS
    R_gas: float = R_GAS
    A: float = 0.01
    m: float = 1.0
    S0: float = 0.0
    V0: float = 1e-3
    T0: float = 300.0

    def __post_init__(self):
        for name in ("n_mol", "c_v", "R_gas", "A", "m", "V0", "T0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"GasPistonParams.{name} must be positive")

    @property
    def mass(self):
        return self.m

    @property
    def coupling(self):
        return self.A


def gas_temperature(p: GasPistonParams, S, V):
    if np.any(np.asarray(V) <= 0):
        raise DomainError(f"volume must be positive, got {V}")
    return p.T0 * np.exp((S - p.S0) / (p.n_mol * p.c_v)) * (V / p.V0) ** (-p.R_gas / p.c_v)


def gas_internal_energy(p: GasPistonParams, S, V):
    return p.n_mol * p.c_v * gas_temperature(p, S, V)


def gas_pressure(p: GasPistonParams, S, V):
    return p.n_mol * p.R_gas * gas_temperature(p, S, V) / V


def gas_entropy(p: GasPistonParams, T, V):
    """Entropy of the state with temperature T and volume V (inverse of T(S, V))."""
    return p.S0 + p.n_mol * p.c_v * math.log(T / p.T0) + p.n_mol * p.R_gas * math.log(V / p.V0)


def adiabat_volume(p: GasPistonParams, T_from, V_from, T_to):
    """Volume reached from (T_from, V_from) at temperature T_to along S = const."""
    return V_from * (T_from / T_to) ** (p.c_v / p.R_gas)


def make_gas_piston(p: GasPistonParams = GasPistonParams()) -> TwoPortPhs:
    """Gas-piston two-port: x1 = S (thermal port), x2 = (V, pi) (mechanical port)."""
    ncv = p.n_mol * p.c_v

    def temperature(S, V):
        if V <= 0:
            raise DomainError(f"volume must be positive, got {V}")
        return p.T0 * math.exp((S - p.S0) / ncv) * (V / p.V0) ** (-p.R_gas / p.c_v)

    def H(x1, x2):
        V, pi = x2
        return ncv * temperature(x1[0], V) + 0.5 * pi * pi / p.m

    def grad(x1, x2):
        V, pi = x2
        T = temperature(x1[0], V)
        return np.array([T]), np.array([-p.n_mol * p.R_gas * T / V, pi / p.m])

    def hess11(x1, x2):
        return np.array([[temperature(x1[0], x2[0]) / ncv]])

    def hess12(x1, x2):
        V = x2[0]
        return np.array([[-(p.R_gas / p.c_v) * temperature(x1[0], V) / V, 0.0]])

    J1 = np.zeros((1, 1))
    J2 = np.array([[0.0, p.A], [-p.A, 0.0]])
    G2 = np.array([[0.0], [1.0]])
    return TwoPortPhs(
        n1=1,
        n2=2,
        m2=1,
        hamiltonian=H,
        J1=lambda x1, x2: J1,
        J2=lambda x1, x2: J2,
        G1=np.eye(1),
        G2=lambda x1, x2: G2,
        gradient=grad,
        hessian11=hess11,
        hessian12=hess12,
        state_labels=("S", "V", "pi"),
        input_labels=("entropy_flow", "force"),
        output_labels=("T", "velocity"),
        units={"S": "J/K", "V": "m^3", "pi": "kg m/s", "entropy_flow": "W/K", "force": "N",
               "T": "K", "velocity": "m/s", "H": "J"},
        name="gas_piston",
        params=p,
    )


# ---------------------------------------------------------------------- actuator


@dataclass(frozen=True)
class Inductance:
    """``L(q) = L0 a / (a + q)``: positive, decreasing in the displacement q."""

    L0: float = 1.0
    a: float = 0.05

    def _check(self, q):
        if np.any(np.asarray(q) < 0):
            raise DomainError(f"displacement must be >= 0, got {q}")

    def value(self, q):
        self._check(q)
        return self.L0 * self.a / (self.a + q)

    def derivative(self, q):
        self._check(q)
        return -self.L0 * self.a / (self.a + q) ** 2

    def second_derivative(self, q):
        self._check(q)
        return 2.0 * self.L0 * self.a / (self.a + q) ** 3

    def inverse(self, L):
        """Displacement at which the inductance equals L."""
        if not 0 < L <= self.L0:
            raise DomainError(f"inductance {L} not attainable for q >= 0")
        return self.a * (self.L0 / L - 1.0)

    __call__ = value


@dataclass(frozen=True)
class ActuatorParams:
    L0: float = 1.0
    a: float = 0.05
    m: float = 0.1

    def __post_init__(self):
        for name in ("L0", "a", "m"):
            if not getattr(self, name) > 0:
                raise ValueError(f"ActuatorParams.{name} must be positive")

    @property
    def inductance(self):
        return Inductance(self.L0, self.a)

    @property
    def mass(self):
        return self.m

    @property
    def coupling(self):
        return 1.0


def make_actuator(p: ActuatorParams = ActuatorParams()) -> TwoPortPhs:
    """Electromagnetic actuator: x1 = flux phi, x2 = (q, p); y1 = current I."""
    ind = p.inductance

    def H(x1, x2):
        q, mom = x2
        return 0.5 * x1[0] ** 2 / ind.value(q) + 0.5 * mom * mom / p.m

    def grad(x1, x2):
        phi = x1[0]
        q, mom = x2
        L = ind.value(q)
        dL = ind.derivative(q)
        return np.array([phi / L]), np.array([-0.5 * phi * phi * dL / (L * L), mom / p.m])

    def hess11(x1, x2):
        return np.array([[1.0 / ind.value(x2[0])]])

    def hess12(x1, x2):
        q = x2[0]
        L = ind.value(q)
        return np.array([[-x1[0] * ind.derivative(q) / (L * L), 0.0]])

    J1 = np.zeros((1, 1))
    J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])
    G2 = np.array([[0.0], [1.0]])
    return TwoPortPhs(
        n1=1,
        n2=2,
        m2=1,
        hamiltonian=H,
        J1=lambda x1, x2: J1,
        J2=lambda x1, x2: J2,
        G1=np.eye(1),
        G2=lambda x1, x2: G2,
        gradient=grad,
        hessian11=hess11,
        hessian12=hess12,
        state_labels=("phi", "q", "p"),
        input_labels=("voltage", "force"),
        output_labels=("current", "velocity"),
        units={"phi": "Wb", "q": "m", "p": "kg m/s", "voltage": "V", "force": "N",
               "current": "A", "velocity": "m/s", "H": "J"},
        name="actuator",
        params=p,
    )


# ----------------------------------------------------------------- heat exchanger


@dataclass(frozen=True)
class HeatExchangerParams:
    """Two reservoirs with ``E_i(S_i) = C_i T_ref exp(S_i / C_i)``."""

    lam: float = 2.0
    C1: float = 1000.0
    C2: float = 1000.0
    T_ref: float = 300.0

    def __post_init__(self):
        for name in ("lam", "C1", "C2", "T_ref"):
            if not getattr(self, name) > 0:
                raise ValueError(f"HeatExchangerParams.{name} must be positive")

    def entropy(self, T, reservoir):
        C = self.C1 if reservoir == 1 else self.C2
        return C * math.log(T / self.T_ref)


def make_heat_exchanger(p: HeatExchangerParams = HeatExchangerParams()) -> PhsSystem:
    """Heat exchanger in entropy coordinates.

    The interconnection matrix depends on the state only through the
    temperatures (a "quasi" port-Hamiltonian system); it is represented as
    an ordinary state-dependent J(x).
    """

    def temps(x):
        return p.T_ref * np.exp(x[0] / p.C1), p.T_ref * np.exp(x[1] / p.C2)

    def H(x):
        t1, t2 = temps(x)
        return p.C1 * t1 + p.C2 * t2

    def grad(x):
        return np.array(temps(x))

    def J(x):
        t1, t2 = temps(x)
        c = p.lam * (t2 - t1) / (t1 * t2)
        return np.array([[0.0, c], [-c, 0.0]])

    eye = np.eye(2)
    return PhsSystem(
        n=2,
        m=2,
        hamiltonian=H,
        structure=J,
        input_map=lambda x: eye,
        gradient=grad,
        state_labels=("S1", "S2"),
        input_labels=("entropy_flow1", "entropy_flow2"),
        output_labels=("T1", "T2"),
        units={"S1": "J/K", "S2": "J/K", "T1": "K", "T2": "K", "H": "J"},
        port_partition=(1, 1),
        name="heat_exchanger",
        kernel=SystemKernel(
            kernels.heat_exchanger_rhs,
            kernels.heat_exchanger_output,
            kernels.heat_exchanger_energy,
            kernels.zero_dissipation,
            np.array([p.lam, p.C1, p.C2, p.T_ref]),
        ),
    )


# ------------------------------------------------------- mass-spring-damper, scalar


@dataclass(frozen=True)
class MsdParams:
    m: float = 1.0
    k: float = 2.0
    d: float = 1.0

    def __post_init__(self):
        if not (self.m > 0 and self.k > 0 and self.d >= 0):
            raise ValueError("MSD needs m > 0, k > 0, d >= 0")


def linear_phs(Q, J, R, G, **kw) -> PhsSystem:
    """Linear system with ``H = x^T Q x / 2`` and constant J, R, G."""
    Q, J, R, G = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (Q, J, R, G))
    n, m = G.shape
    lossless = not np.any(R)
    return PhsSystem(
        n=n,
        m=m,
        hamiltonian=lambda x: 0.5 * float(x @ Q @ x),
        structure=lambda x: J,
        input_map=lambda x: G,
        dissipation=None if lossless else (lambda x, e: R @ e),
        gradient=lambda x: Q @ x,
        linear=(Q, J, R, G),
        kernel=SystemKernel(
            kernels.linear_rhs,
            kernels.linear_output,
            kernels.linear_energy,
            kernels.linear_dissipation,
            kernels.pack_linear(Q, J, R, G),
        ),
        **kw,
    )


def make_msd(p: MsdParams = MsdParams()) -> PhsSystem:
    """Mass-spring-damper, x = (q, p), input force, output velocity."""
    return linear_phs(
        Q=np.diag([p.k, 1.0 / p.m]),
        J=np.array([[0.0, 1.0], [-1.0, 0.0]]),
        R=np.array([[0.0, 0.0], [0.0, p.d]]),
        G=np.array([[0.0], [1.0]]),
        state_labels=("q", "p"),
        input_labels=("force",),
        output_labels=("velocity",),
        units={"q": "m", "p": "kg m/s", "force": "N", "velocity": "m/s", "H": "J"},
        name="msd",
    )


def make_scalar_exp() -> PhsSystem:
    """``xdot = u, y = exp(x)``: lossless with storage ``exp(x)``."""
    zero = np.zeros((1, 1))
    one = np.ones((1, 1))
    return PhsSystem(
        n=1,
        m=1,
        hamiltonian=lambda x: math.exp(x[0]),
        structure=lambda x: zero,
        input_map=lambda x: one,
        gradient=lambda x: np.exp(x),
        state_labels=("x",),
        input_labels=("u",),
        output_labels=("y",),
        name="scalar_exp",
        kernel=SystemKernel(
            kernels.scalar_exp_rhs,
            kernels.scalar_exp_output,
            kernels.scalar_exp_energy,
            kernels.zero_dissipation,
            np.zeros(1),
        ),
    )


# ------------------------------------------------------------------------ samplers


def sample_states(model: str, rng: np.random.Generator, count: int, params=None):
    """Random states in the physical region of a built-in model."""
    if model == "msd":
        return list(rng.uniform(-3, 3, size=(count, 2)))
    if model == "scalar_exp":
        return list(rng.uniform(-3, 3, size=(count, 1)))
    if model == "gas_piston":
        p = params or GasPistonParams()
        T = rng.uniform(200, 600, count)
        V = rng.uniform(0.3, 4.0, count) * p.V0
        pi = rng.uniform(-5, 5, count)
        return [np.array([gas_entropy(p, t, v), v, w]) for t, v, w in zip(T, V, pi)]
    if model == "actuator":
        return list(np.column_stack([rng.uniform(-2, 2, count), rng.uniform(0.01, 5, count), rng.uniform(-3, 3, count)]))
    if model == "heat_exchanger":
        p = params or HeatExchangerParams()
        T = rng.uniform(200, 600, size=(count, 2))
        return [np.array([p.entropy(a, 1), p.entropy(b, 2)]) for a, b in T]
    raise ValueError(f"unknown model {model!r}")
