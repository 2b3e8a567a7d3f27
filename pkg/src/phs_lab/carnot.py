"""Generalized Carnot cycles on two-port systems.

A cycle is isothermal (e1 = e1_hot), adiabatic (x1 fixed), isothermal
(e1 = e1_cold), adiabatic.  Port 1 follows the constraint laws of
``constraints``; port 2 is a computed-force tracking controller that
steers the shape coordinate of x2 = (shape, momentum) along a reference
path.  The controller assumes the mechanical block

    shape_dot = c * dH/dmomentum,   momentum_dot = -c * dH/dshape + u2

which covers the gas piston (c = A) and the actuator (c = 1).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

from .constraints import constrained_law
from .core import TwoPortPhs, embed_two_port
from .errors import DomainError, ScheduleError
from .integrator import (
    EnergyLedger,
    Trajectory,
    concatenate,
    energy_balance,
    simulate,
    supplied_energy_cumulative,
)
from .models import ActuatorParams, GasPistonParams, adiabat_volume, gas_entropy

PHASES = ("iso_hot", "adiabatic_1", "iso_cold", "adiabatic_2")
MODES = ("isothermal", "adiabatic", "isothermal", "adiabatic")


def smooth_path(start: float, end: float, duration: float) -> Callable:
    """Quintic rest-to-rest path; returns ``t -> (r, rdot, rddot)``.

    Velocity and acceleration vanish at both ends, so the constraint laws
    are continuous across phase switches.
    """
    delta = end - start

    def ref(t):
        s = min(max(t / duration, 0.0), 1.0)
        s2 = s * s
        pos = s2 * s * (10.0 - 15.0 * s + 6.0 * s2)
        vel = 30.0 * s2 * (1.0 - s) ** 2 / duration
        acc = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s) / duration**2
        return start + delta * pos, delta * vel, delta * acc

    ref.start, ref.end = start, end
    return ref


@dataclass(frozen=True)
class CarnotSchedule:
    """Four-phase plan.

    ``x2_reference[k]`` maps local phase time to ``(r, rdot, rddot)`` for the
    shape coordinate; ``tracking_gains`` are ``(kp, kd)`` of the error
    dynamics; ``inertia`` and ``coupling`` describe the mechanical block.
    """

    e1_hot: float
    e1_cold: float
    phase_durations: tuple
    x2_reference: tuple
    tracking_gains: tuple
    inertia: float
    coupling: float
    x0: np.ndarray
    step: float = 1e-3
    endpoint_tol: float = 1e-3
    tracking_tol: float = 1e-3

    def __post_init__(self):
        if len(self.phase_durations) != 4 or len(self.x2_reference) != 4:
            raise ValueError("a Carnot schedule has exactly four phases")
        if any(not d > 0 for d in self.phase_durations):
            raise ValueError("phase durations must be positive")
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float))

    def scaled(self, factor: float) -> "CarnotSchedule":
        """Same cycle with every phase slowed down by ``factor``."""
        refs = tuple(smooth_path(r.start, r.end, d * factor) for r, d in zip(self.x2_reference, self.phase_durations))
        kp, kd = self.tracking_gains
        return CarnotSchedule(
            self.e1_hot, self.e1_cold, tuple(d * factor for d in self.phase_durations), refs,
            (kp, kd), self.inertia, self.coupling, self.x0, self.step, self.endpoint_tol, self.tracking_tol,
        )


def tracking_force(sys2p: TwoPortPhs, ref: Callable, t0: float, gains, inertia, coupling) -> Callable:
    """Computed-force law ``u2(t, x)`` making the shape error obey
    ``e'' + kd e' + kp e = 0``."""
    kp, kd = gains
    m, c = inertia, coupling
    n1 = sys2p.n1

    def u2(t, x):
        x1, x2 = x[:n1], x[n1:]
        _, e2 = sys2p.grads(x1, x2)
        r, rd, rdd = ref(t - t0)
        err = x2[0] - r
        derr = c * e2[1] - rd
        return np.array([m * rdd / c + c * e2[0] - (m / c) * (kp * err + kd * derr)])

    return u2


@dataclass
class CycleReport:
    work_out: float
    heat_hot: float
    heat_cold: float
    delta_x1_hot: float
    delta_x1_cold: float
    efficiency_measured: float
    efficiency_ideal: float
    closure_error: float
    inequality_slack: float
    e1_hot: float
    e1_cold: float
    delta_x1_sum: float
    port1_total: float
    balance_residual: float
    max_tracking_error: float

    def to_dict(self):
        return {k: float(v) for k, v in sorted(asdict(self).items())}


def efficiency_ideal(e1_hot: float, e1_cold: float) -> float:
    """``1 - e1_cold / e1_hot``."""
    if e1_hot == 0:
        raise ZeroDivisionError("e1_hot must be nonzero")
    if not e1_hot > 0:
        raise ValueError("e1_hot must be positive")
    return 1.0 - e1_cold / e1_hot


def run_cycle(sys2p: TwoPortPhs, schedule: CarnotSchedule):
    """Simulate the four phases and audit the result.

    Returns ``(trajectory, report)``.  Raises ``ScheduleError`` when the
    shape coordinate leaves its reference or an adiabatic phase does not
    land on the next isothermal level.
    """
    sys = embed_two_port(sys2p)
    n1 = sys2p.n1
    targets = (schedule.e1_hot, schedule.e1_hot, schedule.e1_cold, schedule.e1_cold)
    # e1 level expected at the end of each phase
    end_levels = (schedule.e1_hot, schedule.e1_cold, schedule.e1_cold, schedule.e1_hot)

    x = schedule.x0.copy()
    e1_start = float(sys2p.e1(x[:n1], x[n1:])[0])
    if abs(e1_start - targets[0]) > schedule.endpoint_tol * abs(targets[0]):
        raise ScheduleError(f"initial e1={e1_start:.6g} does not match e1_hot={targets[0]:.6g}")

    t = 0.0
    segments = []
    max_err = 0.0
    for k in range(4):
        ref = schedule.x2_reference[k]
        u2 = tracking_force(sys2p, ref, t, schedule.tracking_gains, schedule.inertia, schedule.coupling)
        law = constrained_law(sys2p, MODES[k], u2)
        try:
            seg = simulate(sys, x, law, schedule.phase_durations[k], schedule.step, t0=t, phase=PHASES[k])
        except DomainError as exc:
            raise ScheduleError(f"phase {PHASES[k]} left the model domain: {exc}") from exc
        refs = np.array([ref(tt - t)[0] for tt in seg.times])
        span = max(abs(ref(schedule.phase_durations[k])[0] - ref(0.0)[0]), 1e-12)
        err = float(np.max(np.abs(seg.states[:, n1] - refs)) / span)
        max_err = max(max_err, err)
        if err > schedule.tracking_tol:
            raise ScheduleError(f"tracking diverged in {PHASES[k]} (relative error {err:.3g})")
        xe = seg.states[-1]
        e1_end = float(sys2p.e1(xe[:n1], xe[n1:])[0])
        if abs(e1_end - end_levels[k]) > schedule.endpoint_tol * abs(end_levels[k]):
            raise ScheduleError(
                f"{PHASES[k]} ends at e1={e1_end:.6g}, expected {end_levels[k]:.6g}; schedule infeasible"
            )
        segments.append(seg)
        x = xe.copy()
        t = float(seg.times[-1])

    traj = concatenate(segments)
    ledger = energy_balance(traj, sys)
    report = _report(traj, ledger, segments, schedule, n1)
    report.max_tracking_error = max_err
    return traj, report


def _report(traj: Trajectory, ledger: EnergyLedger, segments, schedule, n1):
    bounds = [0]
    for seg in segments:
        bounds.append(bounds[-1] + len(seg) - 1)
    cum1 = supplied_energy_cumulative(traj, port=1)
    cum2 = supplied_energy_cumulative(traj, port=2)
    heat_hot = float(cum1[bounds[1]] - cum1[bounds[0]])
    heat_cold = float(cum1[bounds[3]] - cum1[bounds[2]])
    x1 = traj.states[:, 0]
    dh = float(x1[bounds[1]] - x1[bounds[0]])
    dc = float(x1[bounds[3]] - x1[bounds[2]])
    work = -float(cum2[-1])
    eh, ec = schedule.e1_hot, schedule.e1_cold
    return CycleReport(
        work_out=work,
        heat_hot=heat_hot,
        heat_cold=heat_cold,
        delta_x1_hot=dh,
        delta_x1_cold=dc,
        efficiency_measured=work / heat_hot if heat_hot != 0 else math.nan,
        efficiency_ideal=efficiency_ideal(eh, ec),
        closure_error=traj.closure_error,
        inequality_slack=eh * dh + ec * dc - work,
        e1_hot=eh,
        e1_cold=ec,
        delta_x1_sum=dh + dc,
        port1_total=ledger.port_totals[0],
        balance_residual=ledger.balance_residual,
        max_tracking_error=0.0,
    )


def stirling_identity_check(report: CycleReport, ledger: EnergyLedger = None) -> float:
    """``|work_out - (heat_hot + heat_cold)|``.

    With a ledger, the port-1 total over the whole cycle is used instead
    of the two isothermal heats (the adiabatic phases contribute nothing
    when they are exact).
    """
    heat = ledger.port_totals[0] if ledger is not None else report.heat_hot + report.heat_cold
    return abs(report.work_out - heat)


# ------------------------------------------------------------ schedule builders


def _gains(omega):
    return (omega * omega, 2.0 * omega)


def gas_piston_schedule(
    params: GasPistonParams,
    T_hot: float = 400.0,
    T_cold: float = 300.0,
    V_start: float = 1e-3,
    V_hot_end: float = 2e-3,
    durations: Sequence[float] = (1.0, 1.0, 1.0, 1.0),
    step: float = 1e-3,
    omega: float = 20.0,
) -> CarnotSchedule:
    """Ideal-gas cycle; adiabat endpoints from ``T V^(R/c_v) = const``."""
    V3 = adiabat_volume(params, T_hot, V_hot_end, T_cold)
    V4 = adiabat_volume(params, T_hot, V_start, T_cold)
    path = (V_start, V_hot_end, V3, V4, V_start)
    refs = tuple(smooth_path(path[k], path[k + 1], durations[k]) for k in range(4))
    x0 = np.array([gas_entropy(params, T_hot, V_start), V_start, 0.0])
    return CarnotSchedule(T_hot, T_cold, tuple(durations), refs, _gains(omega), params.m, params.A, x0, step)


def actuator_schedule(
    params: ActuatorParams,
    I_a: float = 2.0,
    I_b: float = 1.0,
    q_start: float = 0.25,
    q_hot_end: float = 0.15,
    durations: Sequence[float] = (1.0, 1.0, 1.0, 1.0),
    step: float = 1e-3,
    omega: float = 20.0,
) -> CarnotSchedule:
    """Actuator cycle at currents I_a (hot) and I_b (cold).

    Flux is constant on the adiabatic phases, so their endpoints solve
    ``phi / L(q) = I`` in closed form.
    """
    L = params.inductance
    phi_a = L(q_start) * I_a
    phi_b = L(q_hot_end) * I_a
    q_c = L.inverse(phi_b / I_b)
    q_d = L.inverse(phi_a / I_b)
    path = (q_start, q_hot_end, q_c, q_d, q_start)
    refs = tuple(smooth_path(path[k], path[k + 1], durations[k]) for k in range(4))
    x0 = np.array([phi_a, q_start, 0.0])
    return CarnotSchedule(I_a, I_b, tuple(durations), refs, _gains(omega), params.m, 1.0, x0, step)


# ------------------------------------------------------ constant-e1 loops


def isothermal_loop(sys2p: TwoPortPhs, x0, waypoints: Sequence[float], durations: Sequence[float],
                    step: float = 1e-3, omega: float = 20.0, inertia: float = None, coupling: float = None):
    """Move the shape coordinate through ``waypoints`` and back to its start at constant e1.

    Every segment is a quintic rest-to-rest path under the isothermal law,
    so y1 stays at its initial value and the run is cyclic up to tracking
    and integration error.  Returns the concatenated trajectory.
    """
    x0 = np.asarray(x0, dtype=float)
    n1 = sys2p.n1
    path = [float(x0[n1])] + [float(w) for w in waypoints] + [float(x0[n1])]
    if len(durations) != len(path) - 1:
        raise ValueError("need one duration per segment (waypoints + 1)")
    params = sys2p.params
    m = inertia if inertia is not None else params.mass
    c = coupling if coupling is not None else params.coupling
    sys = embed_two_port(sys2p)
    x, t = x0.copy(), 0.0
    segments = []
    for k, T in enumerate(durations):
        ref = smooth_path(path[k], path[k + 1], T)
        law = constrained_law(sys2p, "isothermal", tracking_force(sys2p, ref, t, _gains(omega), m, c))
        try:
            seg = simulate(sys, x, law, T, step, t0=t, phase=f"iso_{k + 1}")
        except DomainError as exc:
            raise ScheduleError(f"isothermal loop left the model domain: {exc}") from exc
        segments.append(seg)
        x, t = seg.states[-1].copy(), float(seg.times[-1])
    return concatenate(segments)
