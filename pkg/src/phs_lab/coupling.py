"""Feedback constructions that create off-diagonal interconnection.

* Energy router: skew output feedback between two lossless systems,
  ``u1 = -y1 |y2|^2 + v1``, ``u2 = y2 |y1|^2 + v2``.
* IDA-PBC for the electromagnetic actuator: ``u1 = beta(x) + v1`` turns the
  plant into a system with interconnection ``J_d`` (flux-momentum coupling
  alpha) and doubled magnetic energy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels
from .core import PhsSystem, SystemKernel, TwoPortPhs, outputs
from .errors import DimensionError, DomainError

_G_ACT = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]])
_J_ACT = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]])


# -------------------------------------------------------------------- router


def router_feedback(y1, y2, v1, v2):
    """``(u1, u2) = (-y1 |y2|^2 + v1, y2 |y1|^2 + v2)``."""
    y1, y2, v1, v2 = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (y1, y2, v1, v2))
    if y1.shape != v1.shape or y2.shape != v2.shape:
        raise DimensionError("v1, v2 must match the shapes of y1, y2")
    return -y1 * (y2 @ y2) + v1, y2 * (y1 @ y1) + v2


@dataclass(frozen=True)
class RouterCoupling:
    sys_a: PhsSystem
    sys_b: PhsSystem
    samples: Optional[Sequence] = None


def _check_lossless(sys: PhsSystem, samples, label):
    if sys.dissipation is None:
        return
    rng = np.random.default_rng(0)
    pts = samples if samples is not None else rng.normal(size=(32, sys.n))
    for x in pts:
        x = np.asarray(x, dtype=float)
        r = sys.dissipation_vector(x, sys.grad(x))
        if np.max(np.abs(r)) > 1e-12:
            raise ValueError(f"router component {label} is not lossless (R != 0 at x={x})")


def compose_router(c: RouterCoupling) -> PhsSystem:
    """Closed loop of two lossless systems under the router feedback.

    The result has ``H = H_a + H_b``, new inputs ``(v1, v2)`` and the
    state-dependent skew interconnection

        J = [[J_a, -g_a y1 y2^T g_b^T], [g_b y2 y1^T g_a^T, J_b]].
    """
    a, b = c.sys_a, c.sys_b
    _check_lossless(a, c.samples, "a")
    _check_lossless(b, c.samples, "b")
    na, nb, ma, mb = a.n, b.n, a.m, b.m
    n, m = na + nb, ma + mb

    def H(x):
        return a.hamiltonian(x[:na]) + b.hamiltonian(x[na:])

    def grad(x):
        return np.concatenate([a.grad(x[:na]), b.grad(x[na:])])

    def J(x):
        xa, xb = x[:na], x[na:]
        ga, gb = a.input_map(xa), b.input_map(xb)
        y1 = ga.T @ a.grad(xa)
        y2 = gb.T @ b.grad(xb)
        out = np.zeros((n, n))
        out[:na, :na] = a.structure(xa)
        out[na:, na:] = b.structure(xb)
        out[:na, na:] = -ga @ np.outer(y1, y2) @ gb.T
        out[na:, :na] = gb @ np.outer(y2, y1) @ ga.T
        return out

    def G(x):
        out = np.zeros((n, m))
        out[:na, :ma] = a.input_map(x[:na])
        out[na:, ma:] = b.input_map(x[na:])
        return out

    kernel = None
    if a.linear is not None and b.linear is not None:
        pa = kernels.pack_linear(*a.linear)
        pb = kernels.pack_linear(*b.linear)
        kernel = SystemKernel(
            kernels.router_linear_rhs,
            kernels.router_linear_output,
            kernels.router_linear_energy,
            kernels.router_linear_dissipation,
            kernels.pack_router(pa, pb),
        )
    return PhsSystem(
        n=n,
        m=m,
        hamiltonian=H,
        structure=J,
        input_map=G,
        gradient=grad,
        state_labels=tuple(f"a.{s}" for s in a.state_labels) + tuple(f"b.{s}" for s in b.state_labels),
        input_labels=tuple(f"v1.{s}" for s in a.input_labels) + tuple(f"v2.{s}" for s in b.input_labels),
        output_labels=tuple(f"y1.{s}" for s in a.output_labels) + tuple(f"y2.{s}" for s in b.output_labels),
        port_partition=(ma, mb),
        name=f"router({a.name},{b.name})",
        kernel=kernel,
    )


def router_power_split(c: RouterCoupling, x, v=None):
    """``(dH_a/dt, dH_b/dt)`` at state x of the composed system."""
    a, b = c.sys_a, c.sys_b
    xa, xb = np.asarray(x[:a.n]), np.asarray(x[a.n:])
    y1, y2 = outputs(a, xa), outputs(b, xb)
    v = np.zeros(a.m + b.m) if v is None else np.asarray(v, dtype=float)
    transfer = (y1 @ y1) * (y2 @ y2)
    return -transfer + y1 @ v[:a.m], transfer + y2 @ v[a.m:]


def kick_start(sys: PhsSystem, x0, impulse, port: int = 2):
    """Apply an input impulse on one port: ``x0 + G_port(x0) impulse``.

    The router cannot start transferring while the receiving side is at
    rest (y2 = 0); a small impulse on v2 leaves that dead state.
    """
    x0 = np.asarray(x0, dtype=float)
    start = sum(sys.port_partition[:port - 1])
    cols = slice(start, start + sys.port_partition[port - 1])
    return x0 + sys.input_map(x0)[:, cols] @ np.atleast_1d(np.asarray(impulse, dtype=float))


# ------------------------------------------------------------------- IDA-PBC


@dataclass(frozen=True)
class IdaPbcDesign:
    """Energy-shaping design for the actuator, states ``x = (phi, q, p)``."""

    alpha: Callable
    beta: Callable
    h_a: Callable
    h_d: Callable
    j_d: Callable
    hamiltonian: Callable
    grad_h: Callable
    grad_h_a: Callable
    grad_h_d: Callable
    mass: float
    h_d_magnetic: Callable = None


def _positive_inductance(inductance, q):
    L = inductance.value(q)
    if not L > 0:
        raise DomainError(f"inductance must be positive, got L({q}) = {L}")
    return L


def ida_pbc_actuator(inductance, m: float) -> IdaPbcDesign:
    """Closed-form IDA-PBC solution for the actuator.

    ``alpha = L'(q) phi / (4 L(q))``, ``beta = alpha p / m``,
    ``H_a = phi^2 / (2 L)`` and ``H_d = phi^2 / L + p^2 / (2 m)``.
    ``inductance`` must provide ``value(q)`` and ``derivative(q)``.
    """
    if not m > 0:
        raise ValueError("mass must be positive")

    def alpha(phi, q):
        L = _positive_inductance(inductance, q)
        return 0.25 * inductance.derivative(q) / L * phi

    def beta(phi, q, p):
        return alpha(phi, q) * p / m

    def h_a(phi, q):
        return phi * phi / (2.0 * _positive_inductance(inductance, q))

    def hamiltonian(x):
        phi, q, p = x
        return phi * phi / (2.0 * _positive_inductance(inductance, q)) + p * p / (2.0 * m)

    def h_d_magnetic(phi, q):
        return phi * phi / _positive_inductance(inductance, q)

    def h_d(x):
        phi, q, p = x
        return h_d_magnetic(phi, q) + p * p / (2.0 * m)

    def grad_h(x):
        phi, q, p = x
        L = _positive_inductance(inductance, q)
        return np.array([phi / L, -0.5 * phi * phi * inductance.derivative(q) / (L * L), p / m])

    def grad_h_a(x):
        phi, q, _ = x
        L = _positive_inductance(inductance, q)
        return np.array([phi / L, -0.5 * phi * phi * inductance.derivative(q) / (L * L), 0.0])

    def grad_h_d(x):
        phi, q, p = x
        L = _positive_inductance(inductance, q)
        return np.array([2.0 * phi / L, -phi * phi * inductance.derivative(q) / (L * L), p / m])

    def j_d(x):
        return jd_matrix(alpha(x[0], x[1]))

    return IdaPbcDesign(alpha, beta, h_a, h_d, j_d, hamiltonian, grad_h, grad_h_a, grad_h_d, m, h_d_magnetic)


def jd_matrix(alpha: float) -> np.ndarray:
    return np.array([[0.0, 0.0, alpha], [0.0, 0.0, 1.0], [-alpha, -1.0, 0.0]])


def matching_residual(design: IdaPbcDesign, samples, inputs=None) -> float:
    """Max absolute residual of the matching equations and the closed loop.

    For each state checks

        alpha dHa/dp = -alpha dH/dp + beta
        dHa/dp = 0
        -alpha dHa/dphi - dHa/dq = alpha dH/dphi

    and ``J_d dH_d/dx + G v = J dH/dx + G (beta + v1, v2)`` for every ``v``
    in ``inputs`` (default: zero and two fixed nonzero vectors).
    """
    if inputs is None:
        inputs = [np.zeros(2), np.array([0.7, -1.3]), np.array([-2.0, 0.4])]
    worst = 0.0
    for x in samples:
        x = np.asarray(x, dtype=float)
        phi, q, p = x
        a = design.alpha(phi, q)
        b = design.beta(phi, q, p)
        gh = design.grad_h(x)
        ga = design.grad_h_a(x)
        r = [
            a * ga[2] - (-a * gh[2] + b),
            ga[2],
            -a * ga[0] - ga[1] - a * gh[0],
        ]
        worst = max(worst, max(abs(v) for v in r))
        lhs_free = design.j_d(x) @ design.grad_h_d(x)
        rhs_free = _J_ACT @ gh
        for v in inputs:
            v = np.asarray(v, dtype=float)
            lhs = lhs_free + _G_ACT @ v
            rhs = rhs_free + _G_ACT @ np.array([b + v[0], v[1]])
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


def ida_pbc_closed_loop(design: IdaPbcDesign) -> PhsSystem:
    """Closed loop ``xdot = J_d dH_d/dx + G v`` as a general system.

    It is lossless and has off-diagonal structure, so it no longer fits the
    block-diagonal two-port form.
    """
    return PhsSystem(
        n=3,
        m=2,
        hamiltonian=design.h_d,
        structure=design.j_d,
        input_map=lambda x: _G_ACT,
        gradient=design.grad_h_d,
        state_labels=("phi", "q", "p"),
        input_labels=("v1", "v2"),
        output_labels=("yd1", "yd2"),
        port_partition=(1, 1),
        name="actuator_ida_pbc",
    )


def direct_feedback_law(alpha):
    """Output feedback ``u1 = alpha y2 + v1``, ``u2 = -alpha y1 + v2``.

    ``alpha`` is a constant or a callable of the state.  Returns
    ``law(x, y, v) -> u``.
    """

    def law(x, y, v):
        a = alpha(x) if callable(alpha) else float(alpha)
        return np.array([a * y[1] + v[0], -a * y[0] + v[1]])

    return law


def direct_feedback_system(plant: TwoPortPhs, alpha) -> PhsSystem:
    """Plant with its J replaced by ``J_d(alpha)`` and its original Hamiltonian."""
    n1 = plant.n1

    def grad(x):
        e1, e2 = plant.grads(x[:n1], x[n1:])
        return np.concatenate([e1, e2])

    def J(x):
        a = alpha(x) if callable(alpha) else float(alpha)
        return jd_matrix(a)

    return PhsSystem(
        n=3,
        m=2,
        hamiltonian=lambda x: plant.h(x[:n1], x[n1:]),
        structure=J,
        input_map=lambda x: _G_ACT,
        gradient=grad,
        state_labels=plant.state_labels,
        port_partition=(1, 1),
        name="actuator_direct_feedback",
    )
