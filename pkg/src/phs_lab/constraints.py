"""Port-1 input synthesis for constrained motions of two-port systems.

``adiabatic_input`` holds x1 fixed, ``isothermal_input`` holds e1 (hence y1)
fixed.  Both rely on G1 being constant and invertible; the isothermal law
also needs d2H/dx1^2 to be invertible.  Port 2 is always evaluated first:
the x2 equation does not involve u1, so x2dot is well defined given u2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import TwoPortPhs
from .integrator import EnergyLedger, InputLaw, Trajectory, supplied_energy


def _split(sys2p, x):
    return sys2p.split(np.asarray(x, dtype=float))


def adiabatic_input(sys2p: TwoPortPhs, x) -> np.ndarray:
    """``u1 = G1^{-1} (R1 e1 - J1 e1)``, which makes x1dot vanish."""
    x1, x2 = _split(sys2p, x)
    e1 = sys2p.e1(x1, x2)
    return sys2p.G1_inv @ (sys2p.r1(x1, x2) @ e1 - np.asarray(sys2p.J1(x1, x2)) @ e1)


def isothermal_input(sys2p: TwoPortPhs, x, x2_dot) -> np.ndarray:
    """Port-1 input keeping e1 constant while x2 moves with rate ``x2_dot``.

    ``x1dot = -(d2H/dx1^2)^{-1} (d2H/dx1dx2) x2_dot`` and
    ``u1 = G1^{-1} (x1dot + R1 e1 - J1 e1)``.
    """
    x1, x2 = _split(sys2p, x)
    inv, _ = sys2p.hess11_inverse(x1, x2)
    x1_dot = -inv @ (sys2p.hess12(x1, x2) @ np.asarray(x2_dot, dtype=float))
    e1 = sys2p.e1(x1, x2)
    return sys2p.G1_inv @ (x1_dot + sys2p.r1(x1, x2) @ e1 - np.asarray(sys2p.J1(x1, x2)) @ e1)


def constrained_law(sys2p: TwoPortPhs, mode: str, u2_law: Callable) -> InputLaw:
    """Full input law: ``u2 = u2_law(t, x)`` then u1 from the constraint.

    ``mode`` is ``"adiabatic"`` or ``"isothermal"``.
    """
    if mode not in ("adiabatic", "isothermal"):
        raise ValueError(f"unknown constraint mode {mode!r}")

    def law(t, x):
        u2 = np.atleast_1d(np.asarray(u2_law(t, x), dtype=float))
        if mode == "adiabatic":
            u1 = adiabatic_input(sys2p, x)
        else:
            x1, x2 = sys2p.split(x)
            u1 = isothermal_input(sys2p, x, sys2p.x2_rate(x1, x2, u2))
        return np.concatenate([u1, u2])

    return InputLaw.from_feedback(law, partition=(sys2p.m1, sys2p.m2))


@dataclass
class ConstantEffortAudit:
    applicable: bool
    reason: str
    port1_integral: float
    port2_integral: float
    tolerance: float
    closure_error: float
    y1_variation: float
    port1_ok: bool
    port2_ok: bool

    @property
    def passed(self):
        return self.applicable and self.port1_ok and self.port2_ok


def constant_effort_audit(
    traj: Trajectory,
    ledger: EnergyLedger = None,
    y1_tolerance: float = 1e-6,
    tol: float = None,
    closure_eps: float = None,
) -> ConstantEffortAudit:
    """Check both port integrals are nonnegative on a constant-y1 cycle.

    The run must be cyclic (``closure_eps``, default ``1e-6 (1 + |x(0)|)``)
    and y1 may vary by at most ``y1_tolerance`` relative to its mean;
    otherwise the audit is returned as inapplicable rather than failed.
    ``tol`` defaults to ``1e-6`` times the total absolute exchanged energy.
    """
    if ledger is not None:
        p1, p2 = ledger.port_totals[:2]
    else:
        p1 = supplied_energy(traj, port=1)
        p2 = supplied_energy(traj, port=2)
    s1 = traj.port_slice(1)
    y1 = traj.outputs[:, s1]
    ref = np.maximum(np.abs(np.mean(y1, axis=0)), 1e-300)
    variation = float(np.max(np.abs(y1 - y1[0]) / ref))
    closure = traj.closure_error
    if closure_eps is None:
        closure_eps = 1e-6 * (1.0 + float(np.max(np.abs(traj.states[0]))))
    if tol is None:
        tol = 1e-6 * exchanged_energy(traj)
    reason = ""
    applicable = True
    if closure >= closure_eps:
        applicable, reason = False, f"not cyclic (closure {closure:.3g} >= {closure_eps:.3g})"
    elif variation > y1_tolerance:
        applicable, reason = False, f"y1 not constant (relative variation {variation:.3g})"
    return ConstantEffortAudit(
        applicable=applicable,
        reason=reason,
        port1_integral=p1,
        port2_integral=p2,
        tolerance=tol,
        closure_error=closure,
        y1_variation=variation,
        port1_ok=p1 >= -tol,
        port2_ok=p2 >= -tol,
    )


def exchanged_energy(traj: Trajectory) -> float:
    """Trapezoidal integral of ``sum_k |y_k^T u_k|`` over ports (energy scale)."""
    total = 0.0
    for k in range(len(traj.port_partition)):
        s = traj.port_slice(k + 1)
        p = np.abs(np.sum(traj.outputs[:, s] * traj.inputs[:, s], axis=1))
        total += float(np.sum(0.5 * traj.step * (p[1:] + p[:-1])))
    return total
